use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::PlanePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub trial: usize,
    pub camera: usize,
    pub point: usize,
    pub truth: PlanePoint,
    /// Meters.
    pub abs_error: f64,
    /// `abs_error` over the true range from the (first) camera.
    pub rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    /// `None` for empty input.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile(&v, 0.5),
            p95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub trials: usize,
    pub records: Vec<ErrorRecord>,
    /// Observations dropped because the point was not visible.
    pub omitted: usize,
    /// Visible observations the estimator rejected.
    pub failures: usize,
    pub abs: Option<Summary>,
    pub rel: Option<Summary>,
}

impl ErrorReport {
    pub fn new(trials: usize, records: Vec<ErrorRecord>, omitted: usize, failures: usize) -> Self {
        let abs: Vec<f64> = records.iter().map(|r| r.abs_error).collect();
        let rel: Vec<f64> = records.iter().map(|r| r.rel_error).collect();
        Self {
            trials,
            abs: Summary::of(&abs),
            rel: Summary::of(&rel),
            records,
            omitted,
            failures,
        }
    }

    pub fn median_abs(&self) -> f64 {
        self.abs.map_or(f64::NAN, |s| s.median)
    }

    pub fn median_rel(&self) -> f64 {
        self.rel.map_or(f64::NAN, |s| s.median)
    }

    /// Per-point CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,camera,point,X,Y,abs_error_m,rel_error\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.trial, r.camera, r.point, r.truth.x, r.truth.y, r.abs_error, r.rel_error
            );
        }
        out
    }

    /// Summary without the per-point records.
    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "trials": self.trials,
            "count": self.records.len(),
            "omitted": self.omitted,
            "failures": self.failures,
            "abs_error_m": self.abs,
            "rel_error": self.rel,
        });
        serde_json::to_string_pretty(&v).expect("plain data serializes")
    }
}
