use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use solenoid_kms::campaign::SuiteReport;

/// `println!` that returns I/O errors instead of panicking, so a closed
/// pipe ends the command quietly.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($arg)*)?
    }};
}

pub struct Printer {
    pub precision: usize,
    pub json: bool,
}

impl Printer {
    pub fn num(&self, x: f64) -> String {
        format!("{:.*}", self.precision, x)
    }

    pub fn row(&self, xs: &[f64]) -> String {
        xs.iter().map(|&x| self.num(x)).collect::<Vec<_>>().join(",")
    }

    /// Prints the reports and returns whether all of them passed.
    pub fn reports(&self, reports: &[SuiteReport]) -> Result<bool> {
        if self.json {
            say!("{}", serde_json::to_string_pretty(reports)?);
        } else {
            for r in reports {
                say!("{}", summary_line(r));
            }
        }
        Ok(all_pass(reports))
    }
}

pub fn all_pass(reports: &[SuiteReport]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.pass)
}

pub fn summary_line(r: &SuiteReport) -> String {
    format!(
        "{} {} cases={} max_residual={:e} tolerance={:e}",
        if r.pass { "PASS" } else { "FAIL" },
        r.test,
        r.cases,
        r.max_residual,
        r.tolerance
    )
}

pub fn write_reports(path: &Path, reports: &[SuiteReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing report {}", path.display()))
}

/// A report for a single measured quantity. A failing report always carries
/// `witness`, or a placeholder when none was supplied.
pub fn single_report(
    test: &str,
    parameters: Value,
    residual: f64,
    tolerance: f64,
    cases: usize,
    witness: Option<Value>,
    started: Instant,
) -> SuiteReport {
    let pass = cases > 0 && residual <= tolerance;
    let witnesses = match (pass, witness) {
        (true, _) => Vec::new(),
        (false, Some(w)) => vec![w],
        (false, None) => vec![json!({"residual": residual.to_string(), "cases": cases})],
    };
    SuiteReport {
        test: test.to_string(),
        parameters,
        max_residual: if residual.is_finite() { residual } else { f64::MAX },
        tolerance,
        pass,
        cases,
        witnesses,
        wall_time_ms: started.elapsed().as_millis() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_single_report_has_witness() {
        let r = single_report("t", json!({}), 2.0, 1.0, 3, None, Instant::now());
        assert!(!r.pass);
        assert_eq!(r.witnesses.len(), 1);
        let r = single_report("t", json!({}), 0.0, 1.0, 0, None, Instant::now());
        assert!(!r.pass, "zero cases never pass");
        let r = single_report("t", json!({}), f64::NAN, 1.0, 1, None, Instant::now());
        assert!(!r.pass);
    }

    #[test]
    fn precision_controls_digits() {
        let p = Printer {
            precision: 3,
            json: false,
        };
        assert_eq!(p.row(&[2.0 / 3.0, 0.5]), "0.667,0.500");
    }
}
