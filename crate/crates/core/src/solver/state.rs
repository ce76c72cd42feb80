//! Cached fast path shared by the finite-family methods.
//!
//! For every Fourier slice k and member i the engine keeps
//!
//! * the factor C with C Cᴴ = (Ŝᴴ Â Q̂⁻¹ Âᴴ Ŝ)^†,
//! * the step map Q̂⁻¹ Âᴴ Ŝ C and the sketched rows Cᴴ Ŝᴴ Â, Cᴴ Ŝᴴ B̂,
//! * the cross maps Cᵢᴴ Ŝᵢᴴ Â Q̂⁻¹ Âᴴ Ŝⱼ Cⱼ and the scaled residuals Cᴴ Ŝᴴ (Â X̂ − B̂),
//!
//! so that a step is two small products per slice. Spatial families share one
//! index across all slices; per-slice families pick an index in every slice.

use rand_chacha::ChaCha8Rng;
use num_complex::Complex64;

use super::driver::{drive, Engine, IterateKind, StepInfo, StepResult};
use super::record::Chosen;
use super::select::{select_index, SelectionRule};
use super::{resolve_probs, rule_for, Method, Problem, ResidualMode, ResolvedProbs, SliceStreams, Solution, SolverConfig};
use crate::algebra::dense::{fro_norm_sq, pinv_factor, CMat};
use crate::algebra::fourier::{idft3, idft3_parts};
use crate::algebra::{FourierSlices, TubalMatrix};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const MINUS_ONE: Complex64 = Complex64 { re: -1.0, im: 0.0 };

struct SliceCache {
    step_maps: Vec<CMat>,
    sketched_a: Vec<CMat>,
    sketched_b: Vec<CMat>,
    cross: Vec<Vec<CMat>>,
    residuals: Vec<CMat>,
}

pub struct SolverState {
    method: Method,
    per_slice: bool,
    recursion: bool,
    q: usize,
    l: usize,
    x_hat: FourierSlices,
    caches: Vec<SliceCache>,
    rules: Vec<SelectionRule>,
    rngs: Vec<ChaCha8Rng>,
    t: usize,
}

impl SolverState {
    /// Precomputes every cached quantity for a finite-family method, starting at X⁰ = O.
    pub fn new(a: &TubalMatrix, b: &TubalMatrix, config: &SolverConfig) -> Result<Self> {
        super::validate(a, config)?;
        let problem = Problem::new(a, b, None, config.weight.as_ref())?;
        Self::build(a, &problem, config)
    }

    pub(crate) fn build(a: &TubalMatrix, problem: &Problem, config: &SolverConfig) -> Result<Self> {
        let method = config.method;
        if matches!(method, Method::Tsp | Method::TspI | Method::TspII) {
            return Err(TspError::InvalidConfig(format!("{method} draws fresh sketches and has no cached state")));
        }
        let set = &config.sketch;
        let (q, l, n, p) = (set.q(), problem.l, problem.n, problem.p);
        let theta = config.theta_or_default();
        let (per_slice, rules) = match resolve_probs(a, &problem.weight, config)? {
            ResolvedProbs::Spatial(pv) => (false, vec![rule_for(method, theta, pv)]),
            ResolvedProbs::PerSlice(pvs) => (true, pvs.into_iter().map(|pv| rule_for(method, theta, pv)).collect()),
        };
        let recursion = match config.residual_mode {
            ResidualMode::Recursion => true,
            ResidualMode::Direct => false,
            ResidualMode::Auto => method.is_adaptive() || set.max_tau() * q <= n,
        };

        let caches = (0..l)
            .map(|k| {
                let a_k = problem.a_hat.slice(k);
                let b_k = problem.b_hat.slice(k);
                let mut step_maps = Vec::with_capacity(q);
                let mut sketched_a = Vec::with_capacity(q);
                let mut sketched_b = Vec::with_capacity(q);
                for i in 0..q {
                    let s = set.fourier_member(k, i);
                    let sa0 = s.adjoint() * a_k;
                    let w = problem.apply_q_inverse(k, sa0.adjoint());
                    let gram = &sa0 * &w;
                    let c = pinv_factor(&gram);
                    let c_h = c.adjoint();
                    step_maps.push(w * &c);
                    sketched_b.push(&c_h * (s.adjoint() * b_k));
                    sketched_a.push(c_h * sa0);
                }
                let cross = if recursion {
                    (0..q).map(|i| (0..q).map(|j| &sketched_a[i] * &step_maps[j]).collect()).collect()
                } else {
                    Vec::new()
                };
                let residuals = if recursion { sketched_b.iter().map(|sb| -sb).collect() } else { Vec::new() };
                SliceCache { step_maps, sketched_a, sketched_b, cross, residuals }
            })
            .collect();

        let rngs = if per_slice {
            (0..l)
                .map(|k| {
                    let sub = match config.slice_streams {
                        SliceStreams::Independent => k as u64,
                        SliceStreams::Shared => 0,
                    };
                    stream(config.seed, Purpose::Index, sub)
                })
                .collect()
        } else {
            vec![stream(config.seed, Purpose::Index, 0)]
        };

        Ok(Self {
            method,
            per_slice,
            recursion,
            q,
            l,
            x_hat: FourierSlices::zeros(n, p, l),
            caches,
            rules,
            rngs,
            t: 0,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn uses_recursion(&self) -> bool {
        self.recursion
    }

    pub fn is_per_slice(&self) -> bool {
        self.per_slice
    }

    pub fn iterate_fourier(&self) -> &FourierSlices {
        &self.x_hat
    }

    /// The real iterate: the inverse transform for spatial families, its real part otherwise.
    pub fn iterate(&self) -> Result<TubalMatrix> {
        if self.per_slice { Ok(idft3_parts(&self.x_hat).0) } else { idft3(&self.x_hat) }
    }

    fn direct_residual(&self, i: usize, k: usize) -> CMat {
        let c = &self.caches[k];
        &c.sketched_a[i] * self.x_hat.slice(k) - &c.sketched_b[i]
    }

    /// Cᴴ Ŝᴴ (Â X̂ − B̂) for member i in slice k.
    pub fn residual(&self, i: usize, k: usize) -> CMat {
        if self.recursion { self.caches[k].residuals[i].clone() } else { self.direct_residual(i, k) }
    }

    fn residual_norm_sq(&self, i: usize, k: usize) -> f64 {
        if self.recursion { fro_norm_sq(&self.caches[k].residuals[i]) } else { fro_norm_sq(&self.direct_residual(i, k)) }
    }

    /// Mutable access to a cached residual, for fault-injection tests of the audit.
    pub fn residual_mut(&mut self, i: usize, k: usize) -> Option<&mut CMat> {
        if self.recursion { self.caches.get_mut(k)?.residuals.get_mut(i) } else { None }
    }

    /// f_i(X^t) = (1/l) Σ_k ‖R̂_i,(k)‖²_F.
    pub fn sketched_loss(&self, i: usize) -> f64 {
        (0..self.l).map(|k| self.residual_norm_sq(i, k)).sum::<f64>() / self.l as f64
    }

    pub fn losses(&self) -> Vec<f64> {
        (0..self.q).map(|i| self.sketched_loss(i)).collect()
    }

    /// Slice-wise losses f_i(X̂_(k)) = ‖R_{k_i}‖²_F.
    pub fn slice_losses(&self, k: usize) -> Vec<f64> {
        (0..self.q).map(|i| self.residual_norm_sq(i, k)).collect()
    }

    fn step_slice(&mut self, k: usize, sel: usize) {
        let r_sel = self.residual(sel, k);
        let recursion = self.recursion;
        let cache = &mut self.caches[k];
        self.x_hat.slice_mut(k).gemm(MINUS_ONE, &cache.step_maps[sel], &r_sel, ONE);
        if recursion {
            for (res, cross_row) in cache.residuals.iter_mut().zip(&cache.cross) {
                res.gemm(MINUS_ONE, &cross_row[sel], &r_sel, ONE);
            }
        }
    }

    /// One projection step with member `i` in every slice.
    pub fn sp_step(&mut self, i: usize) {
        for k in 0..self.l {
            self.step_slice(k, i);
        }
        self.t += 1;
    }

    /// One projection step with member `sel[k]` in slice k; `None` leaves the slice untouched.
    pub fn sp_step_per_slice(&mut self, sel: &[Option<usize>]) {
        for (k, s) in sel.iter().enumerate() {
            if let Some(i) = *s {
                self.step_slice(k, i);
            }
        }
        self.t += 1;
    }

    /// Largest Frobenius deviation of the recursed residuals from direct recomputation.
    pub fn audit_residuals(&self) -> f64 {
        if !self.recursion {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for k in 0..self.l {
            for i in 0..self.q {
                let d = &self.caches[k].residuals[i] - self.direct_residual(i, k);
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    fn step_spatial(&mut self) -> StepResult {
        let rule = &self.rules[0];
        let losses = (rule.is_adaptive() || self.recursion).then(|| self.losses());
        let idx = select_index(rule, losses.as_deref().unwrap_or(&[]), &mut self.rngs[0]);
        let Some(idx) = idx else {
            return StepResult::Converged;
        };
        let step_loss = losses.as_ref().map_or_else(|| self.sketched_loss(idx), |f| f[idx]);
        let (loss_max, loss_sum) = match &losses {
            Some(f) => (Some(f.iter().copied().fold(0.0, f64::max)), Some(f.iter().sum())),
            None => (None, None),
        };
        self.sp_step(idx);
        StepResult::Stepped(StepInfo { chosen: Chosen::Single(idx), loss_max, loss_sum, step_loss: Some(step_loss) })
    }

    fn step_per_slice(&mut self) -> StepResult {
        let l = self.l as f64;
        let mut sel = Vec::with_capacity(self.l);
        let (mut step_loss, mut loss_max, mut loss_sum) = (0.0, 0.0, 0.0);
        let mut have_all = true;
        for k in 0..self.l {
            let rule = &self.rules[k];
            let losses = (rule.is_adaptive() || self.recursion).then(|| self.slice_losses(k));
            let idx = select_index(rule, losses.as_deref().unwrap_or(&[]), &mut self.rngs[k]);
            match (&losses, idx) {
                (Some(f), _) => {
                    loss_max += f.iter().copied().fold(0.0, f64::max);
                    loss_sum += f.iter().sum::<f64>();
                    if let Some(i) = idx {
                        step_loss += f[i];
                    }
                }
                (None, Some(i)) => {
                    have_all = false;
                    step_loss += self.residual_norm_sq(i, k);
                }
                (None, None) => have_all = false,
            }
            sel.push(idx);
        }
        if sel.iter().all(Option::is_none) {
            return StepResult::Converged;
        }
        self.sp_step_per_slice(&sel);
        StepResult::Stepped(StepInfo {
            chosen: Chosen::PerSlice(sel.iter().map(|s| s.unwrap_or(usize::MAX)).collect()),
            loss_max: have_all.then_some(loss_max / l),
            loss_sum: have_all.then_some(loss_sum / l),
            step_loss: Some(step_loss / l),
        })
    }
}

impl Engine for SolverState {
    fn step(&mut self) -> Result<StepResult> {
        Ok(if self.per_slice { self.step_per_slice() } else { self.step_spatial() })
    }

    fn x_hat(&self) -> &FourierSlices {
        &self.x_hat
    }

    fn audit(&self) -> Option<f64> {
        self.recursion.then(|| self.audit_residuals())
    }
}

pub(crate) fn solve_cached(
    a: &TubalMatrix,
    b: &TubalMatrix,
    truth: Option<&TubalMatrix>,
    config: &SolverConfig,
) -> Result<Solution> {
    let started = std::time::Instant::now();
    let problem = Problem::new(a, b, truth, config.weight.as_ref())?;
    let mut state = SolverState::build(a, &problem, config)?;
    let pre = started.elapsed().as_secs_f64();
    let kind = IterateKind { complex: state.per_slice, track_imag: state.per_slice };
    drive(&problem, &mut state, kind, config, pre)
}
