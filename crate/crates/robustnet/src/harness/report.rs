//! Experiment reports: JSON round-trip, summary/CDF CSVs, method comparison.
//!
//! Everything emitted here is deterministic for a fixed (config, seed) pair:
//! no timestamps, stable field order, shortest round-trip float encoding in
//! JSON, and fixed significant-digit decimals in the CSVs. Summary artifacts
//! report rates in Mbps; the JSON report keeps bits/s.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::units::MBPS;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Format with a fixed number of significant digits as a plain decimal.
pub fn format_sig(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub mean_nominal_bps: f64,
    pub mean_robust_bps: f64,
    /// Per-scenario robust values; the CDF samples.
    pub per_scenario_robust_bps: Vec<f64>,
    pub per_scenario_nominal_bps: Vec<f64>,
    /// Best validation epoch for learned methods.
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub tool_version: String,
    pub master_seed: u64,
    /// Full resolved configuration; no silent defaults.
    pub config: ExperimentConfig,
    pub methods: Vec<MethodReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("bad report: {e}")))
    }

    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// One row per method: mean nominal and robust min-rates in Mbps.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,mean_nominal_mbps,mean_robust_mbps\n");
        for m in &self.methods {
            out.push_str(&format!(
                "{},{},{}\n",
                m.method,
                format_sig(m.mean_nominal_bps / MBPS, 6),
                format_sig(m.mean_robust_bps / MBPS, 6),
            ));
        }
        out
    }

    /// Sorted robust values with empirical CDF ordinates `k / n`.
    pub fn cdf_csv(&self, method: &str) -> Result<String> {
        let m = self
            .method(method)
            .ok_or_else(|| Error::Usage(format!("method {method:?} not in report")))?;
        let mut values = m.per_scenario_robust_bps.clone();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len();
        let mut out = String::from("robust_min_rate_mbps,cdf\n");
        for (k, v) in values.iter().enumerate() {
            out.push_str(&format!(
                "{},{}\n",
                format_sig(v / MBPS, 6),
                format_sig((k + 1) as f64 / n as f64, 6)
            ));
        }
        Ok(out)
    }
}

/// Pairwise method comparison and the reference ordering checks.
#[derive(Clone, Debug)]
pub struct CompareSummary {
    pub methods: Vec<String>,
    pub mean_robust_bps: Vec<f64>,
    pub mean_nominal_bps: Vec<f64>,
    /// `robust_ratios[i][j] = robust_i / robust_j`.
    pub robust_ratios: Vec<Vec<f64>>,
    pub nominal_ratios: Vec<Vec<f64>>,
    /// inject > nominal-trained > maxmin on the robust metric, when all
    /// three are present.
    pub robust_ordering_holds: Option<bool>,
    /// maxmin > nominal-trained >= inject on the nominal metric.
    pub nominal_ordering_holds: Option<bool>,
}

impl CompareSummary {
    pub fn ratio(&self, metric_robust: bool, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(if metric_robust {
            self.robust_ratios[i][j]
        } else {
            self.nominal_ratios[i][j]
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>18} {:>18}\n",
            "method", "nominal (Mbps)", "robust (Mbps)"
        ));
        for (i, m) in self.methods.iter().enumerate() {
            out.push_str(&format!(
                "{:<10} {:>18} {:>18}\n",
                m,
                format_sig(self.mean_nominal_bps[i] / MBPS, 6),
                format_sig(self.mean_robust_bps[i] / MBPS, 6)
            ));
        }
        out.push_str("\nrobust ratios (row / column):\n");
        out.push_str(&format!("{:<10}", ""));
        for m in &self.methods {
            out.push_str(&format!(" {m:>9}"));
        }
        out.push('\n');
        for (i, m) in self.methods.iter().enumerate() {
            out.push_str(&format!("{m:<10}"));
            for j in 0..self.methods.len() {
                out.push_str(&format!(" {:>9}", format_sig(self.robust_ratios[i][j], 4)));
            }
            out.push('\n');
        }
        if let Some(holds) = self.robust_ordering_holds {
            out.push_str(&format!(
                "\nrobust ordering inject > nominal > maxmin: {}\n",
                if holds { "HOLDS" } else { "VIOLATED" }
            ));
        }
        if let Some(holds) = self.nominal_ordering_holds {
            out.push_str(&format!(
                "nominal ordering maxmin > nominal >= inject: {}\n",
                if holds { "HOLDS" } else { "VIOLATED" }
            ));
        }
        out
    }
}

/// Compute pairwise ratios and check the reference orderings.
pub fn compare_methods(report: &EvalReport) -> Result<CompareSummary> {
    if report.methods.len() < 2 {
        return Err(Error::Usage("comparison needs at least two methods".into()));
    }
    let methods: Vec<String> = report.methods.iter().map(|m| m.method.clone()).collect();
    let robust: Vec<f64> = report.methods.iter().map(|m| m.mean_robust_bps).collect();
    let nominal: Vec<f64> = report.methods.iter().map(|m| m.mean_nominal_bps).collect();
    let n = methods.len();
    let ratio_table = |v: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| v[i] / v[j]).collect())
            .collect()
    };

    let get = |name: &str, v: &[f64]| -> Option<f64> {
        methods.iter().position(|m| m == name).map(|i| v[i])
    };
    let robust_ordering_holds = match (
        get("inject", &robust),
        get("nominal", &robust),
        get("maxmin", &robust),
    ) {
        (Some(i), Some(nom), Some(mm)) => Some(i > nom && nom > mm),
        _ => None,
    };
    let nominal_ordering_holds = match (
        get("inject", &nominal),
        get("nominal", &nominal),
        get("maxmin", &nominal),
    ) {
        (Some(i), Some(nom), Some(mm)) => Some(mm > nom && nom >= i),
        _ => None,
    };

    Ok(CompareSummary {
        methods,
        robust_ratios: ratio_table(&robust),
        nominal_ratios: ratio_table(&nominal),
        mean_robust_bps: robust,
        mean_nominal_bps: nominal,
        robust_ordering_holds,
        nominal_ordering_holds,
    })
}
