//! Checks recorded error curves against the convergence envelopes.

use serde::{Deserialize, Serialize};

use super::rates::{BoundKind, RateReport};
use crate::error::{Result, TspError};
use crate::solver::RunRecord;

/// Ensemble size required by the expectation bounds.
pub const MIN_ENSEMBLE: usize = 30;
/// Default relative slack for Monte-Carlo noise in ensemble means.
pub const DEFAULT_SLACK: f64 = 0.10;
/// Envelope values below this fraction of the initial error sit at roundoff level and are not checked.
pub const FLOOR: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub t: usize,
    pub observed: f64,
    pub envelope: f64,
    /// observed / envelope; a pass needs this ≤ 1 + slack.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub rate: f64,
    pub slack: f64,
    pub passed: bool,
    pub worst: Option<MarginRow>,
    pub checked: usize,
    pub rows: Vec<MarginRow>,
}

/// Squared Q-error curve of a run recorded at every step.
///
/// Uses the logged Q-errors when present; otherwise (traces read from CSV)
/// falls back to (ε·‖X★‖_F)², which is the Q-error only for Q = I.
pub fn error_curve(record: &RunRecord, truth_norm: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(record.rows.len());
    for (t, row) in record.rows.iter().enumerate() {
        if row.t != t {
            return Err(TspError::InvalidConfig(format!("bound checks need every step recorded; row {t} has t={}", row.t)));
        }
        out.push(row.q_error.unwrap_or_else(|| (row.epsilon * truth_norm).powi(2)));
    }
    Ok(out)
}

fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64).collect()
}

fn judge(kind: BoundKind, rate: f64, slack: f64, rows: Vec<MarginRow>) -> BoundCheck {
    let worst = rows.iter().cloned().max_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let passed = worst.as_ref().is_none_or(|w| w.ratio <= 1.0 + slack);
    BoundCheck { kind, rate, slack, passed, worst, checked: rows.len(), rows }
}

fn envelope_rows(observed: &[f64], start: usize, base: f64, rate: f64) -> Vec<MarginRow> {
    let mut rows = Vec::new();
    let mut envelope = base;
    for (t, &obs) in observed.iter().enumerate().skip(start + 1) {
        envelope *= rate;
        if envelope < FLOOR * base || base <= 0.0 {
            break;
        }
        rows.push(MarginRow { t, observed: obs, envelope, ratio: obs / envelope });
    }
    rows
}

/// Compares an ensemble of squared Q-error curves (index = iteration) with the bound.
///
/// Expectation bounds compare the ensemble mean at each t with rate^t times the
/// mean initial error; the proportional-rule bound starts from t = 1. The
/// max-distance bound is deterministic and is checked step by step on every run,
/// with `slack` replaced by a 1e-9 rounding allowance.
pub fn verify_bounds(curves: &[Vec<f64>], rates: &RateReport, kind: BoundKind, slack: f64) -> Result<BoundCheck> {
    let rate = rates.rate(kind);
    if kind == BoundKind::MaxDistance {
        if curves.is_empty() {
            return Err(TspError::InsufficientEnsemble { needed: 1, got: 0 });
        }
        let tol = 1e-9;
        let mut rows = Vec::new();
        for c in curves {
            let base = c.first().copied().unwrap_or(0.0);
            for t in 1..c.len() {
                let envelope = rate * c[t - 1];
                if envelope < FLOOR * base {
                    break;
                }
                rows.push(MarginRow { t, observed: c[t], envelope, ratio: c[t] / envelope });
            }
        }
        return Ok(judge(kind, rate, tol, rows));
    }
    if curves.len() < MIN_ENSEMBLE {
        return Err(TspError::InsufficientEnsemble { needed: MIN_ENSEMBLE, got: curves.len() });
    }
    let mean = mean_curve(curves);
    let start = usize::from(kind == BoundKind::Proportional);
    let Some(&base) = mean.get(start) else {
        return Ok(judge(kind, rate, slack, Vec::new()));
    };
    Ok(judge(kind, rate, slack, envelope_rows(&mean, start, base, rate)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::rates::DeltaInfEstimate;

    fn report(delta: f64) -> RateReport {
        let d = DeltaInfEstimate { estimate: delta, lower_bound: delta, directions: 1 };
        RateReport::new(delta, delta, &d, delta, 4, 0.5, None)
    }

    #[test]
    fn exact_geometric_curves_pass_and_faster_rates_fail() {
        let curves: Vec<Vec<f64>> = (0..30).map(|_| (0..50).map(|t| 0.75f64.powi(t)).collect()).collect();
        let check = verify_bounds(&curves, &report(0.25), BoundKind::Nonadaptive, 0.1).unwrap();
        assert!(check.passed);
        assert_eq!(check.checked, 49);
        let check = verify_bounds(&curves, &report(0.5), BoundKind::Nonadaptive, 0.1).unwrap();
        assert!(!check.passed);
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let curves = vec![vec![1.0, 0.5]; 5];
        assert!(matches!(
            verify_bounds(&curves, &report(0.25), BoundKind::Nonadaptive, 0.1),
            Err(TspError::InsufficientEnsemble { needed: 30, got: 5 })
        ));
        assert!(verify_bounds(&curves, &report(0.25), BoundKind::MaxDistance, 0.1).unwrap().passed);
    }

    #[test]
    fn capped_endpoints() {
        let mut r = report(0.2);
        r.delta_inf_sq_lower = 0.3;
        r.theta = 1.0;
        assert_eq!(r.rate(BoundKind::Capped), r.rate(BoundKind::MaxDistance));
        r.theta = 0.0;
        assert_eq!(r.rate(BoundKind::Capped), r.rate(BoundKind::Nonadaptive));
    }
}
