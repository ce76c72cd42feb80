use std::time::Instant;

use log::{debug, warn};

use super::record::{Chosen, RunRecord, StopReason, TraceRow};
use super::{Problem, Solution, SolverConfig};
use crate::algebra::dense::{fro_norm_sq, CMat};
use crate::algebra::fourier::{idft3, idft3_parts};
use crate::algebra::FourierSlices;
use crate::error::{Result, TspError};

/// Errors beyond this multiple of the initial error abort the run.
pub(crate) const DIVERGENCE_FACTOR: f64 = 1e3;

pub(crate) struct StepInfo {
    pub chosen: Chosen,
    pub loss_max: Option<f64>,
    pub loss_sum: Option<f64>,
    pub step_loss: Option<f64>,
}

pub(crate) enum StepResult {
    Stepped(StepInfo),
    /// Every sketched loss vanished; nothing left to project.
    Converged,
}

pub(crate) trait Engine {
    fn step(&mut self) -> Result<StepResult>;
    fn x_hat(&self) -> &FourierSlices;
    /// Max deviation of cached residuals from direct recomputation, if cached.
    fn audit(&self) -> Option<f64> {
        None
    }
}

/// Output conventions of an engine's Fourier iterate.
#[derive(Clone, Copy)]
pub(crate) struct IterateKind {
    /// The iterate may leave the conjugate-symmetric subspace; outputs take the real part.
    pub complex: bool,
    /// Log the imaginary residue of the inverse transform.
    pub track_imag: bool,
}

struct Metrics {
    epsilon: f64,
    q_error: Option<f64>,
}

/// Fourier slices of Re(ifft(x)) when the iterate is complex.
fn realified<'a>(x: &'a FourierSlices, kind: IterateKind, buf: &'a mut Option<FourierSlices>) -> &'a FourierSlices {
    if kind.complex {
        *buf = Some(x.real_part());
        buf.as_ref().expect("just set")
    } else {
        x
    }
}

fn metrics(problem: &Problem, x: &FourierSlices, kind: IterateKind) -> Metrics {
    let l = problem.l as f64;
    let mut buf = None;
    let xr = realified(x, kind, &mut buf);
    match &problem.truth_hat {
        Some(truth) => {
            let mut err_sq = 0.0;
            let mut q_err = 0.0;
            for k in 0..problem.l {
                let d_real: CMat = xr.slice(k) - truth.slice(k);
                err_sq += fro_norm_sq(&d_real);
                let d: CMat = x.slice(k) - truth.slice(k);
                q_err += if problem.weight.is_identity() {
                    fro_norm_sq(&d)
                } else {
                    (d.adjoint() * problem.weight.fourier(k) * &d).trace().re
                };
            }
            Metrics { epsilon: (err_sq / l).sqrt() / problem.truth_norm, q_error: Some(q_err / l) }
        }
        None => {
            let res_sq: f64 = (0..problem.l)
                .map(|k| fro_norm_sq(&(problem.a_hat.slice(k) * xr.slice(k) - problem.b_hat.slice(k))))
                .sum();
            let denom = if problem.b_norm > 0.0 { problem.b_norm } else { 1.0 };
            Metrics { epsilon: (res_sq / l).sqrt() / denom, q_error: None }
        }
    }
}

fn imag_residue(x: &FourierSlices) -> f64 {
    let re = x.real_part().spatial_norm_sq().sqrt();
    let im = x.imag_part().spatial_norm_sq().sqrt();
    if re > 0.0 { im / re } else { im }
}

pub(crate) fn drive<E: Engine>(
    problem: &Problem,
    engine: &mut E,
    kind: IterateKind,
    config: &SolverConfig,
    precompute_seconds: f64,
) -> Result<Solution> {
    let row = |t: usize, x: &FourierSlices, info: Option<&StepInfo>, seconds: f64| {
        let m = metrics(problem, x, kind);
        TraceRow {
            t,
            epsilon: m.epsilon,
            chosen: info.map_or(Chosen::None, |i| i.chosen.clone()),
            loss_max: info.and_then(|i| i.loss_max),
            loss_sum: info.and_then(|i| i.loss_sum),
            step_loss: info.and_then(|i| i.step_loss),
            seconds,
            q_error: m.q_error,
            imag_residue: kind.track_imag.then(|| imag_residue(x)),
        }
    };

    let first = row(0, engine.x_hat(), None, 0.0);
    let initial = first.epsilon;
    let mut rows = vec![first];
    let mut stop = StopReason::MaxIterations;
    let mut elapsed = 0.0;
    let mut max_audit: Option<f64> = None;
    let mut t = 0;

    if initial < config.tol_rel_err {
        stop = StopReason::Tolerance;
    } else {
        while t < config.max_iters {
            let started = Instant::now();
            let outcome = engine.step()?;
            elapsed += started.elapsed().as_secs_f64();
            let info = match outcome {
                StepResult::Stepped(info) => info,
                StepResult::Converged => {
                    stop = StopReason::ZeroLoss;
                    break;
                }
            };
            t += 1;
            let current = row(t, engine.x_hat(), Some(&info), elapsed);
            if let Some(every) = config.audit_every {
                if t % every == 0 {
                    if let Some(dev) = engine.audit() {
                        if dev > 1e-8 {
                            warn!("{}: cached residuals drifted by {dev:.3e} at t={t}", config.method);
                        }
                        max_audit = Some(max_audit.map_or(dev, |m: f64| m.max(dev)));
                    }
                }
            }
            let eps = current.epsilon;
            if !eps.is_finite() || (initial > 0.0 && eps > DIVERGENCE_FACTOR * initial) {
                return Err(TspError::Diverged { iteration: t, factor: eps / initial });
            }
            let done = eps < config.tol_rel_err;
            if done || t % config.record_every == 0 || t == config.max_iters {
                rows.push(current);
            }
            if done {
                stop = StopReason::Tolerance;
                break;
            }
        }
        if rows.last().is_some_and(|r| r.t != t) {
            rows.push(row(t, engine.x_hat(), None, elapsed));
        }
    }
    debug!("{} stopped after {t} steps ({stop:?})", config.method);

    let x_hat = engine.x_hat();
    let x = if kind.complex { idft3_parts(x_hat).0 } else { idft3(x_hat)? };
    Ok(Solution {
        x,
        record: RunRecord {
            method: config.method.name().to_string(),
            seed: config.seed,
            rows,
            iterations: t,
            stop,
            precompute_seconds,
            max_audit_deviation: max_audit,
        },
    })
}
