//! TSP-I: per-slice sketches turned into a real sketched system.
//!
//! With Ǎ_k = Ŝ_kᴴ Â_k, the spatial sketched system ifft(Ǎ) ∗ X = ifft(B̌) is
//! complex. Stacking its real and imaginary parts gives a real 2τ-row system
//! whose Fourier slices are
//!
//! ```text
//! [ (Ǎ_k + conj Ǎ_{l−k}) / 2 ; (Ǎ_k − conj Ǎ_{l−k}) / 2i ]
//! ```
//!
//! so the projection keeps the iterate real.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use super::driver::{drive, Engine, IterateKind, StepInfo, StepResult};
use super::record::Chosen;
use super::{resolve_probs, Problem, ResolvedProbs, SliceStreams, Solution, SolverConfig};
use crate::algebra::dense::{herm_pinv, to_complex, CMat};
use crate::algebra::{FourierSlices, TubalMatrix};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};
use crate::sketch::{gaussian_first_slice, sample_index, ProbVector};

/// Fourier slices of the Re/Im stacking of ifft(`sketched`).
pub(crate) fn stack_real_imag(sketched: &[CMat]) -> Vec<CMat> {
    let l = sketched.len();
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    (0..l)
        .map(|k| {
            let own = &sketched[k];
            let mirror = sketched[(l - k) % l].conjugate();
            let (tau, n) = own.shape();
            let mut out = CMat::zeros(2 * tau, n);
            out.rows_mut(0, tau).copy_from(&((own + &mirror) * half));
            out.rows_mut(tau, tau).copy_from(&((own - &mirror) * minus_half_i));
            out
        })
        .collect()
}

enum StackDraw {
    Fresh { tau: usize, rngs: Vec<ChaCha8Rng> },
    Family { p: Vec<ProbVector>, rngs: Vec<ChaCha8Rng> },
}

struct Stacked<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    draw: StackDraw,
    x_hat: FourierSlices,
}

impl Engine for Stacked<'_> {
    fn step(&mut self) -> Result<StepResult> {
        let (l, m) = (self.problem.l, self.problem.m);
        let mut chosen = Vec::new();
        let sketches: Vec<CMat> = (0..l)
            .map(|k| match &mut self.draw {
                StackDraw::Fresh { tau, rngs } => to_complex(&gaussian_first_slice(m, *tau, 1, &mut rngs[k]).slice(0)),
                StackDraw::Family { p, rngs } => {
                    let i = sample_index(&p[k], &mut rngs[k]);
                    chosen.push(i);
                    self.config.sketch.fourier_member(k, i).clone()
                }
            })
            .collect();
        let sa: Vec<CMat> = (0..l).map(|k| sketches[k].adjoint() * self.problem.a_hat.slice(k)).collect();
        let sb: Vec<CMat> = (0..l).map(|k| sketches[k].adjoint() * self.problem.b_hat.slice(k)).collect();
        let (sa, sb) = (stack_real_imag(&sa), stack_real_imag(&sb));
        let mut loss = 0.0;
        for k in 0..l {
            let x = self.x_hat.slice_mut(k);
            let r = &sa[k] * &*x - &sb[k];
            let w = self.problem.apply_q_inverse(k, sa[k].adjoint());
            let gr = herm_pinv(&(&sa[k] * &w)) * &r;
            *x -= w * &gr;
            loss += (r.adjoint() * gr).trace().re;
        }
        let chosen = if chosen.is_empty() { Chosen::None } else { Chosen::PerSlice(chosen) };
        Ok(StepResult::Stepped(StepInfo { chosen, loss_max: None, loss_sum: None, step_loss: Some(loss / l as f64) }))
    }

    fn x_hat(&self) -> &FourierSlices {
        &self.x_hat
    }
}

pub(crate) fn solve_stacked_i(
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
        Some(tau) => StackDraw::Fresh { tau, rngs: rngs(Purpose::FreshSketch) },
        None => match resolve_probs(a, &problem.weight, config)? {
            ResolvedProbs::PerSlice(p) => StackDraw::Family { p, rngs: rngs(Purpose::Index) },
            ResolvedProbs::Spatial(_) => {
                return Err(TspError::InvalidConfig("TSP-I needs a per-slice family".into()));
            }
        },
    };
    let mut engine = Stacked { problem: &problem, config, draw, x_hat: FourierSlices::zeros(problem.n, problem.p, problem.l) };
    drive(&problem, &mut engine, IterateKind { complex: false, track_imag: true }, config, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::fourier::{dft3_complex, idft3_complex};
    use rand::{Rng, SeedableRng};

    fn random_cmat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn stacking_matches_literal_inverse_transform_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in [1, 2, 5, 6] {
            let sketched: Vec<CMat> = (0..l).map(|_| random_cmat(2, 3, &mut rng)).collect();
            let spatial = idft3_complex(&FourierSlices::from_slices(sketched.clone()).unwrap());
            let stacked_spatial: Vec<CMat> = spatial
                .iter()
                .map(|y| {
                    let mut s = CMat::zeros(4, 3);
                    s.rows_mut(0, 2).copy_from(&y.map(|z| Complex64::new(z.re, 0.0)));
                    s.rows_mut(2, 2).copy_from(&y.map(|z| Complex64::new(z.im, 0.0)));
                    s
                })
                .collect();
            let literal = dft3_complex(&stacked_spatial).unwrap();
            let fast = stack_real_imag(&sketched);
            for k in 0..l {
                assert!((literal.slice(k) - &fast[k]).norm() < 1e-12, "l={l} k={k}");
            }
        }
    }
}
