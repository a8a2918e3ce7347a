//! Exponent fits, weighted-decay and off-diagonal experiments, report assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

pub mod davies;
pub mod decay;

pub use davies::{davies_ratio_reference, davies_ratio_twisted};
pub use decay::{l1_linf_decay_check, mixed_offdiag_check, weighted_decay_check, weighted_norm, PowerIteration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub slope: f64,
    pub ci: f64,
    pub points: usize,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    /// acceptance criterion this check belongs to
    pub criterion: String,
    pub pass: bool,
    pub detail: String,
}

/// Append-only record of one experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tag: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fits: Vec<NamedFit>,
    pub envelopes: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub provenance: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(tag: &str, columns: &[&str]) -> Self {
        ExperimentReport { tag: tag.into(), columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn add_fit(&mut self, name: &str, fit: &PowerFit, window: (f64, f64)) {
        self.fits.push(NamedFit { name: name.into(), slope: fit.slope, ci: fit.ci, points: fit.points, window });
    }

    pub fn fit(&self, name: &str) -> Option<&NamedFit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn set_envelope(&mut self, name: &str, value: f64) {
        self.envelopes.insert(name.into(), value);
    }

    pub fn envelope(&self, name: &str) -> Option<f64> {
        self.envelopes.get(name).copied()
    }

    pub fn check(&mut self, criterion: &str, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push(CheckResult { criterion: criterion.into(), pass, detail: detail.into() });
        pass
    }

    /// Slope check `|slope − target| ≤ tol` on a named fit; fails if the fit is missing.
    pub fn check_slope(&mut self, criterion: &str, fit: &str, target: f64, tol: f64) -> bool {
        match self.fit(fit).cloned() {
            Some(f) => {
                let pass = (f.slope - target).abs() <= tol;
                self.check(criterion, pass, format!("{fit}: slope {:.4} (target {target} ± {tol})", f.slope))
            }
            None => self.check(criterion, false, format!("{fit}: no fit available")),
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.provenance.insert(key.into(), value.to_string());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// max(max r, max 1/r) over positive finite ratios; infinity if any ratio is not positive.
pub fn two_sided_envelope(ratios: impl IntoIterator<Item = f64>) -> f64 {
    let mut c = 0.0f64;
    for r in ratios {
        if !(r > 0.0) || !r.is_finite() {
            return f64::INFINITY;
        }
        c = c.max(r).max(1.0 / r);
    }
    c
}

/// Least-squares slope of log v against log t with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci: f64,
    pub points: usize,
}

/// Fit v ≈ C t^slope on the samples with t inside `window`.
///
/// Requires at least five points whose t-range spans a factor of eight.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|&(t, _)| t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12)).collect();
    if pts.len() < 5 {
        return Err(LabError::Fit(format!("need at least 5 points, got {}", pts.len())));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(t, v)| !(v > 0.0) || !(t > 0.0)) {
        return Err(LabError::Fit(format!("nonpositive sample v({t}) = {v}")));
    }
    let tmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    if tmax / tmin < 8.0 * (1.0 - 1e-9) {
        return Err(LabError::Fit(format!("window [{tmin}, {tmax}] spans less than a factor 8")));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(PowerFit { slope, intercept, ci: 1.96 * se, points: pts.len() })
}

/// Geometric time grid t₀, t₀·ratio, … ≤ t_max.
pub fn geometric_times(t0: f64, t_max: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = t0;
    while t <= t_max * (1.0 + 1e-12) {
        out.push(t);
        t *= ratio;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = geometric_times(1.0, 64.0, 2f64.sqrt()).into_iter().map(|t| (t, t.powf(-1.5))).collect();
        let f = fit_power_law(&s, (1.0, 64.0)).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && f.ci < 1e-10);
    }

    #[test]
    fn perturbed_power_law() {
        let s: Vec<_> = geometric_times(1.0, 100.0, 1.2)
            .into_iter()
            .map(|t| (t, 3.0 * t.powf(-0.5) * (1.0 + 0.01 * t.ln().sin())))
            .collect();
        let f = fit_power_law(&s, (1.0, 100.0)).unwrap();
        assert!((f.slope + 0.5).abs() < 0.02);
    }

    #[test]
    fn too_few_points_and_nonpositive() {
        let s = vec![(1.0, 1.0), (2.0, 0.5), (4.0, 0.25), (8.0, 0.125)];
        assert!(fit_power_law(&s, (1.0, 8.0)).is_err());
        let s = vec![(1.0, 1.0), (2.0, 0.5), (4.0, 0.0), (8.0, 0.125), (16.0, 0.1)];
        assert!(fit_power_law(&s, (1.0, 16.0)).is_err());
    }
}
