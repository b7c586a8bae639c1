use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SupCfError,
    L1Density,
    MomentZScores,
    VarianceRatio,
    /// Deterministic residual such as a mass defect or a relative error.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One statistic compared against its threshold. For z-score metrics the
/// magnitude of `value` is compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment_id: String,
    pub metric: Metric,
    pub value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl ComparisonReport {
    pub fn new(experiment_id: impl Into<String>, metric: Metric, value: f64, threshold: f64) -> Self {
        let judged = match metric {
            Metric::MomentZScores | Metric::VarianceRatio => value.abs(),
            _ => value,
        };
        let verdict = if judged <= threshold { Verdict::Pass } else { Verdict::Fail };
        Self { experiment_id: experiment_id.into(), metric, value, threshold, verdict, metadata: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Same statistic judged against a different threshold.
    pub fn rethreshold(self, threshold: f64) -> Self {
        let mut r = Self::new(self.experiment_id, self.metric, self.value, threshold);
        r.metadata = self.metadata;
        r
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

pub fn write_json_lines<W: Write>(reports: &[ComparisonReport], mut w: W) -> Result<()> {
    for r in reports {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(())
}

pub fn summary_table(reports: &[ComparisonReport]) -> String {
    let width = reports.iter().map(|r| r.experiment_id.len()).max().unwrap_or(0).max(10);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:<15}  {:>12}  {:>12}  verdict", "experiment", "metric", "value", "threshold");
    for r in reports {
        let metric = serde_json::to_value(r.metric).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{:<width$}  {:<15}  {:>12.5e}  {:>12.5e}  {verdict}", r.experiment_id, metric, r.value, r.threshold);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert!(ComparisonReport::new("a", Metric::L1Density, 0.04, 0.05).passed());
        assert!(!ComparisonReport::new("a", Metric::L1Density, 0.06, 0.05).passed());
        assert!(ComparisonReport::new("z", Metric::MomentZScores, -2.9, 3.0).passed());
        assert!(!ComparisonReport::new("z", Metric::MomentZScores, -3.1, 3.0).passed());
        assert!(!ComparisonReport::new("n", Metric::SupCfError, f64::NAN, 1.0).passed());
    }

    #[test]
    fn json_line_shape() {
        let r = ComparisonReport::new("cf", Metric::SupCfError, 0.01, 0.02).with("n", 100);
        let mut buf = Vec::new();
        write_json_lines(&[r.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("\"metric\":\"sup_cf_error\""));
        assert!(text.contains("\"verdict\":\"pass\""));
        let back: ComparisonReport = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, r);
        assert!(summary_table(&[r]).contains("PASS"));
    }
}
