//! Verification-condition suite runs for one datatype.

use mrdt_core::vcsuite::{run_full_suite, suite_passed, VcReport};
use mrdt_core::{lookup_for_mode, Alphabet, Mode};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub datatype: String,
    pub mode: Mode,
    pub cases: usize,
    pub seed: u64,
    pub passed: bool,
    pub failing_rows: Vec<String>,
    pub rows: Vec<VcReport>,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    /// Rows that could run but rarely met their pre-condition.
    pub fn low_coverage_rows(&self) -> Vec<&VcReport> {
        self.rows.iter().filter(|r| r.vacuous && !r.inapplicable).collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let status = if !r.passed() {
                "FAIL"
            } else if r.inapplicable {
                "n/a "
            } else if r.vacuous {
                "low "
            } else {
                "ok  "
            };
            out.push_str(&format!(
                "{status} {:<22} run {:>5}  pre {:>5}  failed {:>5}\n",
                r.vc_name, r.cases_run, r.cases_pre_satisfied, r.cases_failed
            ));
        }
        out.push_str(&format!(
            "{} {} ({}): {}\n",
            self.datatype,
            self.mode,
            self.cases,
            if self.passed { "pass" } else { "FAIL" }
        ));
        out
    }
}

pub fn cmd_vc(datatype: &str, mode: Mode, alphabet: &Alphabet, cases: usize, seed: u64) -> anyhow::Result<SuiteReport> {
    let spec = lookup_for_mode(datatype, mode, alphabet)?;
    let rows = run_full_suite(&spec, mode, cases, seed)?;
    Ok(SuiteReport {
        datatype: datatype.to_string(),
        mode,
        cases,
        seed,
        passed: suite_passed(&rows),
        failing_rows: rows.iter().filter(|r| !r.passed()).map(|r| r.vc_name.clone()).collect(),
        rows,
    })
}
