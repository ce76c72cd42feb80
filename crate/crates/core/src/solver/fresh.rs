//! Methods that form their sketch anew at every step, without caching.

use rand_chacha::ChaCha8Rng;

use super::driver::{drive, Engine, IterateKind, StepInfo, StepResult};
use super::record::Chosen;
use super::{resolve_probs, Method, Problem, ResolvedProbs, SliceStreams, Solution, SolverConfig};
use crate::algebra::dense::{herm_pinv, to_complex, CMat};
use crate::algebra::{dft3, tpinv, tprod_oracle, ttranspose, FourierSlices, TubalMatrix};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};
use crate::sketch::{gaussian_first_slice, sample_index, ProbVector};

/// Projects one Fourier slice of the iterate onto {X : Sᴴ Â X = Sᴴ B̂} in the Q̂ geometry.
/// Returns the sketched loss ‖(SᴴÂQ̂⁻¹ÂᴴS)^{†/2} Sᴴ(ÂX̂ − B̂)‖².
fn project_slice(problem: &Problem, k: usize, s: &CMat, x: &mut CMat) -> f64 {
    let sa = s.adjoint() * problem.a_hat.slice(k);
    let r = &sa * &*x - s.adjoint() * problem.b_hat.slice(k);
    let w = problem.apply_q_inverse(k, sa.adjoint());
    let g = herm_pinv(&(&sa * &w));
    let gr = g * &r;
    *x -= w * &gr;
    (r.adjoint() * gr).trace().re
}

enum Draw {
    Fresh { tau: usize, rng: ChaCha8Rng },
    Family { p: ProbVector, rng: ChaCha8Rng },
}

struct FourierTsp<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    draw: Draw,
    x_hat: FourierSlices,
}

impl Engine for FourierTsp<'_> {
    fn step(&mut self) -> Result<StepResult> {
        let l = self.problem.l;
        let (chosen, s_hat) = match &mut self.draw {
            Draw::Fresh { tau, rng } => {
                // only the first frontal slice is nonzero, so every Fourier slice equals it
                let s = gaussian_first_slice(self.problem.m, *tau, l, rng);
                (Chosen::None, vec![to_complex(&s.slice(0)); l])
            }
            Draw::Family { p, rng } => {
                let i = sample_index(p, rng);
                let set = &self.config.sketch;
                (Chosen::Single(i), (0..l).map(|k| set.fourier_member(k, i).clone()).collect())
            }
        };
        let loss: f64 = (0..l)
            .map(|k| project_slice(self.problem, k, &s_hat[k], self.x_hat.slice_mut(k)))
            .sum();
        Ok(StepResult::Stepped(StepInfo { chosen, loss_max: None, loss_sum: None, step_loss: Some(loss / l as f64) }))
    }

    fn x_hat(&self) -> &FourierSlices {
        &self.x_hat
    }
}

fn spatial_draw(a: &TubalMatrix, problem: &Problem, config: &SolverConfig) -> Result<Draw> {
    Ok(match config.fresh_tau {
        Some(tau) => Draw::Fresh { tau, rng: stream(config.seed, Purpose::FreshSketch, 0) },
        None => match resolve_probs(a, &problem.weight, config)? {
            ResolvedProbs::Spatial(p) => Draw::Family { p, rng: stream(config.seed, Purpose::Index, 0) },
            ResolvedProbs::PerSlice(_) => unreachable!("validated as a spatial family"),
        },
    })
}

/// TSP in the Fourier domain: one sketch, projected slice by slice.
pub(crate) fn solve_fourier_tsp(
    a: &TubalMatrix,
    b: &TubalMatrix,
    truth: Option<&TubalMatrix>,
    config: &SolverConfig,
) -> Result<Solution> {
    let problem = Problem::new(a, b, truth, config.weight.as_ref())?;
    let draw = spatial_draw(a, &problem, config)?;
    let mut engine = FourierTsp { problem: &problem, config, draw, x_hat: FourierSlices::zeros(problem.n, problem.p, problem.l) };
    drive(&problem, &mut engine, IterateKind { complex: false, track_imag: false }, config, 0.0)
}

struct SpatialTsp<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    a: &'a TubalMatrix,
    b: &'a TubalMatrix,
    q_inv: Option<TubalMatrix>,
    draw: Draw,
    x: TubalMatrix,
    x_hat: FourierSlices,
}

impl Engine for SpatialTsp<'_> {
    fn step(&mut self) -> Result<StepResult> {
        let (chosen, s) = match &mut self.draw {
            Draw::Fresh { tau, rng } => (Chosen::None, gaussian_first_slice(self.problem.m, *tau, self.problem.l, rng)),
            Draw::Family { p, rng } => {
                let i = sample_index(p, rng);
                (Chosen::Single(i), self.config.sketch.member(i).expect("spatial family").clone())
            }
        };
        let st = ttranspose(&s);
        let sa = tprod_oracle(&st, self.a)?;
        let sat = ttranspose(&sa);
        let w = match &self.q_inv {
            Some(q_inv) => tprod_oracle(q_inv, &sat)?,
            None => sat,
        };
        let g_pinv = tpinv(&tprod_oracle(&sa, &w)?);
        let r = tprod_oracle(&sa, &self.x)?.sub(&tprod_oracle(&st, self.b)?)?;
        let gr = tprod_oracle(&g_pinv, &r)?;
        self.x = self.x.sub(&tprod_oracle(&w, &gr)?)?;
        self.x_hat = dft3(&self.x);
        let loss = r.as_slice().iter().zip(gr.as_slice()).map(|(u, v)| u * v).sum::<f64>();
        Ok(StepResult::Stepped(StepInfo { chosen, loss_max: None, loss_sum: None, step_loss: Some(loss) }))
    }

    fn x_hat(&self) -> &FourierSlices {
        &self.x_hat
    }
}

/// Reference TSP carried out entirely with spatial t-products (block-circulant
/// oracle, spatial pseudoinverses). Slow; meant for cross-checking the Fourier paths.
pub fn solve_tsp_spatial(
    a: &TubalMatrix,
    b: &TubalMatrix,
    truth: Option<&TubalMatrix>,
    config: &SolverConfig,
) -> Result<Solution> {
    if config.method != Method::Tsp {
        return Err(TspError::InvalidConfig(format!("spatial reference solver runs TSP, not {}", config.method)));
    }
    super::validate(a, config)?;
    let problem = Problem::new(a, b, truth, config.weight.as_ref())?;
    let draw = spatial_draw(a, &problem, config)?;
    let q_inv = (!problem.weight.is_identity()).then(|| tpinv(problem.weight.base()));
    let mut engine = SpatialTsp {
        problem: &problem,
        config,
        a,
        b,
        q_inv,
        draw,
        x: TubalMatrix::zeros(problem.n, problem.p, problem.l),
        x_hat: FourierSlices::zeros(problem.n, problem.p, problem.l),
    };
    drive(&problem, &mut engine, IterateKind { complex: false, track_imag: false }, config, 0.0)
}

enum SliceDraw {
    Fresh { tau: usize, rngs: Vec<ChaCha8Rng> },
    Family { p: Vec<ProbVector>, rngs: Vec<ChaCha8Rng> },
}

struct FreshII<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    draw: SliceDraw,
    x_hat: FourierSlices,
}

impl Engine for FreshII<'_> {
    fn step(&mut self) -> Result<StepResult> {
        let (l, m) = (self.problem.l, self.problem.m);
        let mut chosen = Vec::new();
        let mut loss = 0.0;
        for k in 0..l {
            let s = match &mut self.draw {
                SliceDraw::Fresh { tau, rngs } => to_complex(&gaussian_first_slice(m, *tau, 1, &mut rngs[k]).slice(0)),
                SliceDraw::Family { p, rngs } => {
                    let i = sample_index(&p[k], &mut rngs[k]);
                    chosen.push(i);
                    self.config.sketch.fourier_member(k, i).clone()
                }
            };
            loss += project_slice(self.problem, k, &s, self.x_hat.slice_mut(k));
        }
        let chosen = if chosen.is_empty() { Chosen::None } else { Chosen::PerSlice(chosen) };
        Ok(StepResult::Stepped(StepInfo { chosen, loss_max: None, loss_sum: None, step_loss: Some(loss / l as f64) }))
    }

    fn x_hat(&self) -> &FourierSlices {
        &self.x_hat
    }
}

/// TSP-II: an independent sketch in every Fourier slice, output Re(ifft(X̂)).
pub(crate) fn solve_fresh_ii(
    a: &TubalMatrix,
    b: &TubalMatrix,
    truth: Option<&TubalMatrix>,
    config: &SolverConfig,
) -> Result<Solution> {
    let problem = Problem::new(a, b, truth, config.weight.as_ref())?;
    let rngs = |purpose| -> Vec<ChaCha8Rng> {
        (0..problem.l)
            .map(|k| {
                let sub = match config.slice_streams {
                    SliceStreams::Independent => k as u64,
                    SliceStreams::Shared => 0,
                };
                stream(config.seed, purpose, sub)
            })
            .collect()
    };
    let draw = match config.fresh_tau {
        Some(tau) => SliceDraw::Fresh { tau, rngs: rngs(Purpose::FreshSketch) },
        None => match resolve_probs(a, &problem.weight, config)? {
            ResolvedProbs::PerSlice(p) => SliceDraw::Family { p, rngs: rngs(Purpose::Index) },
            ResolvedProbs::Spatial(_) => unreachable!("validated as a per-slice family"),
        },
    };
    let mut engine = FreshII { problem: &problem, config, draw, x_hat: FourierSlices::zeros(problem.n, problem.p, problem.l) };
    drive(&problem, &mut engine, IterateKind { complex: true, track_imag: true }, config, 0.0)
}
