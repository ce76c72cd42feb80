//! Spectral rate constants of a sketch family.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::dense::{fro_norm_sq, herm_lambda_min, pinv_factor, CMat};
use crate::algebra::{dft3, t_sqrt, tpinv, tprod_oracle, ttranspose, FourierSlices, TubalMatrix, WeightQ};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};
use crate::sketch::{prob_uniform, ProbVector, SketchSet};

/// Largest nl for which the block-circulant matrices are assembled explicitly.
pub const MAX_ASSEMBLED_DIM: usize = 400;

#[derive(Clone, Debug)]
pub struct ExpectedProjector {
    /// Σ_i p_i bcirc(Z_i), nl×nl.
    pub matrix: DMatrix<f64>,
    pub lambda_min: f64,
}

fn check_spatial(set: &SketchSet, what: &str) -> Result<()> {
    if set.is_per_slice() {
        return Err(TspError::InvalidConfig(format!("{what} needs a spatial sketch family")));
    }
    Ok(())
}

fn check_dims(a: &TubalMatrix, q: &WeightQ, set: &SketchSet) -> Result<()> {
    if q.n() != a.cols() || q.depth() != a.depth() || set.m() != a.rows() || set.depth() != a.depth() {
        return Err(TspError::DimensionMismatch(format!(
            "A is {}x{}x{}, weight is {}x{}x{}, sketches are for m={}, l={}",
            a.rows(),
            a.cols(),
            a.depth(),
            q.n(),
            q.n(),
            q.depth(),
            set.m(),
            set.depth()
        )));
    }
    Ok(())
}

fn check_probs(p: &ProbVector, q: usize) -> Result<()> {
    if p.len() != q {
        return Err(TspError::InvalidProbability(format!("{} probabilities for {q} sketches", p.len())));
    }
    Ok(())
}

/// The projectors Z_i = Q^{-1/2}∗Aᵀ∗S_i∗(S_iᵀ∗A∗Q⁻¹∗Aᵀ∗S_i)^†∗S_iᵀ∗A∗Q^{-1/2},
/// assembled with spatial t-products.
pub fn projector_members(a: &TubalMatrix, q: &WeightQ, set: &SketchSet) -> Result<Vec<TubalMatrix>> {
    check_spatial(set, "projector assembly")?;
    check_dims(a, q, set)?;
    let (q_inv, q_inv_sqrt) = if q.is_identity() {
        (None, None)
    } else {
        (Some(tpinv(q.base())), Some(tpinv(&t_sqrt(q.base())?)))
    };
    set.members()
        .iter()
        .map(|s| {
            let sa = tprod_oracle(&ttranspose(s), a)?;
            let sat = ttranspose(&sa);
            let w = match &q_inv {
                Some(qi) => tprod_oracle(qi, &sat)?,
                None => sat.clone(),
            };
            let g = tpinv(&tprod_oracle(&sa, &w)?);
            let proj = tprod_oracle(&tprod_oracle(&sat, &g)?, &sa)?;
            match &q_inv_sqrt {
                Some(h) => tprod_oracle(&tprod_oracle(h, &proj)?, h),
                None => Ok(proj),
            }
        })
        .collect()
}

fn symmetric_lambda_min(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// E_{i∼p}[bcirc(Z_i)] and its smallest eigenvalue δ²_p.
pub fn expected_projector(a: &TubalMatrix, q: &WeightQ, set: &SketchSet, p: &ProbVector) -> Result<ExpectedProjector> {
    check_spatial(set, "expected_projector")?;
    check_probs(p, set.q())?;
    let dim = a.cols() * a.depth();
    if dim > MAX_ASSEMBLED_DIM {
        return Err(TspError::InvalidConfig(format!("nl = {dim} exceeds the assembly cap {MAX_ASSEMBLED_DIM}")));
    }
    let members = projector_members(a, q, set)?;
    let mut matrix = DMatrix::zeros(dim, dim);
    for (z, &pi) in members.iter().zip(p.as_slice()) {
        matrix += z.bcirc() * pi;
    }
    let lambda_min = symmetric_lambda_min(&matrix);
    Ok(ExpectedProjector { matrix, lambda_min })
}

/// Fourier-domain factor K̂ with Ẑ = K̂ᴴK̂ for member i in slice k.
fn projector_factor(a_hat: &FourierSlices, q: &WeightQ, set: &SketchSet, k: usize, i: usize) -> CMat {
    let mut m = set.fourier_member(k, i).adjoint() * a_hat.slice(k);
    if !q.is_identity() {
        m *= q.fourier_inv_sqrt(k);
    }
    let c = pinv_factor(&(&m * m.adjoint()));
    c.adjoint() * m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRates {
    /// λ_min(E[Ẑ_(k)]) for every Fourier slice k.
    pub per_slice: Vec<f64>,
    pub min: f64,
}

/// Per-slice λ_min(E[Ẑ_(k)]).
///
/// `probs` holds either one distribution shared by all slices or one per slice.
pub fn per_slice_rates(a: &TubalMatrix, q: &WeightQ, set: &SketchSet, probs: &[ProbVector]) -> Result<SliceRates> {
    check_dims(a, q, set)?;
    let l = a.depth();
    if probs.len() != 1 && probs.len() != l {
        return Err(TspError::InvalidProbability(format!("need 1 or {l} distributions, got {}", probs.len())));
    }
    for p in probs {
        check_probs(p, set.q())?;
    }
    let a_hat = dft3(a);
    let n = a.cols();
    let per_slice: Vec<f64> = (0..l)
        .map(|k| {
            let p = &probs[if probs.len() == 1 { 0 } else { k }];
            let mut e = CMat::zeros(n, n);
            for (i, &pi) in p.as_slice().iter().enumerate() {
                if pi > 0.0 {
                    let kf = projector_factor(&a_hat, q, set, k, i);
                    e += (kf.adjoint() * kf).scale(pi);
                }
            }
            herm_lambda_min(&e)
        })
        .collect();
    let min = per_slice.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SliceRates { per_slice, min })
}

/// Closed-form lower bounds on the per-slice rate for the two standard distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRates {
    /// Rate for p_i ∝ ‖Q^{-1/2}∗Aᵀ∗S_i‖²_F (slice-wise for per-slice families).
    pub convenient: f64,
    /// Rate for uniform p.
    pub uniform: f64,
    /// Whether the slice-wise (stacked real/imaginary) variant of the bounds was evaluated.
    pub slice_wise: bool,
}

/// Evaluates the lower-bound rates of a complete discrete sampling family.
///
/// With M_k = Q̂_k^{-1/2} Â_kᴴ [Ŝ_1 … Ŝ_q]_(k), the numerator is min_k λ_min(M_k M_kᴴ).
/// For spatial families the convenient denominator is ‖Q^{-1/2}∗Aᵀ∗𝓢‖²_F and the
/// uniform one q·max_i ‖Q̂_k^{-1/2}Â_kᴴŜ_i,(k)‖²_F; per-slice families use the
/// slice-wise norms in both.
///
/// The spatial convenient rate is only a lower bound on δ²_p when no Fourier
/// slice carries more sketch energy than the slice average; in general only
/// `convenient / l` is guaranteed. The uniform and slice-wise rates always hold.
pub fn closed_form_rates(a: &TubalMatrix, q: &WeightQ, set: &SketchSet) -> Result<ClosedFormRates> {
    check_dims(a, q, set)?;
    let a_hat = dft3(a);
    let (l, n, nq) = (a.depth(), a.cols(), set.q());
    let mut convenient = f64::INFINITY;
    let mut uniform = f64::INFINITY;
    let mut slices = Vec::with_capacity(l);
    for k in 0..l {
        let mut gram = CMat::zeros(n, n);
        let mut norms = Vec::with_capacity(nq);
        for i in 0..nq {
            let mut w = a_hat.slice(k).adjoint() * set.fourier_member(k, i);
            if !q.is_identity() {
                w = q.fourier_inv_sqrt(k) * w;
            }
            norms.push(fro_norm_sq(&w));
            gram += &w * w.adjoint();
        }
        slices.push((herm_lambda_min(&gram), norms));
    }
    let spatial_total: f64 = slices.iter().flat_map(|(_, norms)| norms.iter()).sum::<f64>() / l as f64;
    for (lam, norms) in &slices {
        let total: f64 = if set.is_per_slice() { norms.iter().sum() } else { spatial_total };
        let largest = norms.iter().copied().fold(0.0, f64::max);
        convenient = convenient.min(lam / total);
        uniform = uniform.min(lam / (nq as f64 * largest));
    }
    Ok(ClosedFormRates { convenient, uniform, slice_wise: set.is_per_slice() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaInfEstimate {
    /// min over sampled directions of max_i of the projected energy fraction.
    /// Never below the true δ²_∞.
    pub estimate: f64,
    /// δ²_p, which never exceeds δ²_∞.
    pub lower_bound: f64,
    pub directions: usize,
}

/// Samples `samples` directions u = Q^{-1/2}∗Aᵀ∗g (g Gaussian) in the range space,
/// plus the lateral slices of Q^{1/2}∗E for every error tensor in `errors`, and
/// returns the smallest max_i ‖Z_i u‖²/‖u‖² seen.
pub fn estimate_delta_inf(
    a: &TubalMatrix,
    q: &WeightQ,
    set: &SketchSet,
    p: &ProbVector,
    samples: usize,
    seed: u64,
    errors: &[TubalMatrix],
) -> Result<DeltaInfEstimate> {
    check_spatial(set, "estimate_delta_inf")?;
    check_dims(a, q, set)?;
    check_probs(p, set.q())?;
    let (m, n, l) = a.dims();
    let a_hat = dft3(a);
    let factors: Vec<Vec<CMat>> =
        (0..l).map(|k| (0..set.q()).map(|i| projector_factor(&a_hat, q, set, k, i)).collect()).collect();

    let energy = |u: &FourierSlices| -> Option<f64> {
        let norm: f64 = u.slices().iter().map(fro_norm_sq).sum();
        if norm <= 1e-300 {
            return None;
        }
        let best = (0..set.q())
            .map(|i| (0..l).map(|k| fro_norm_sq(&(&factors[k][i] * u.slice(k)))).sum::<f64>())
            .fold(0.0, f64::max);
        Some(best / norm)
    };

    let mut rng = stream(seed, Purpose::SketchSet, u64::from(u32::MAX));
    let mut estimate = f64::INFINITY;
    let mut directions = 0;
    for _ in 0..samples {
        let g = TubalMatrix::from_fn(m, 1, l, |_, _, _| rng.sample(rand_distr::StandardNormal));
        let g_hat = dft3(&g);
        let slices = (0..l)
            .map(|k| {
                let v = a_hat.slice(k).adjoint() * g_hat.slice(k);
                if q.is_identity() { v } else { q.fourier_inv_sqrt(k) * v }
            })
            .collect();
        if let Some(e) = energy(&FourierSlices::from_slices(slices)?) {
            estimate = estimate.min(e);
            directions += 1;
        }
    }
    for err in errors {
        if err.rows() != n || err.depth() != l {
            return Err(TspError::DimensionMismatch("error tensors must be n×p×l".into()));
        }
        let e_hat = dft3(err);
        for j in 0..err.cols() {
            let slices = (0..l)
                .map(|k| {
                    let col = CMat::from_column_slice(n, 1, e_hat.slice(k).column(j).as_slice());
                    if q.is_identity() { col } else { q.fourier_sqrt(k) * col }
                })
                .collect();
            if let Some(e) = energy(&FourierSlices::from_slices(slices)?) {
                estimate = estimate.min(e);
                directions += 1;
            }
        }
    }
    let lower_bound = per_slice_rates(a, q, set, std::slice::from_ref(p))?.min;
    Ok(DeltaInfEstimate { estimate: estimate.min(1.0), lower_bound, directions })
}

/// Which convergence statement a bound curve belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Fresh or finite sketches, expectation over the sketch: 1 − min_k λ_min(E[Ẑ_(k)]).
    Expected,
    /// NTSP: 1 − δ²_p.
    Nonadaptive,
    /// ATSP-MD, deterministic per step: 1 − δ²_∞.
    MaxDistance,
    /// ATSP-PR from t = 1 on: 1 − (1 + 1/q) δ²_u.
    Proportional,
    /// ATSP-CS: 1 − θ δ²_∞ − (1 − θ) δ²_p.
    Capped,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] =
        [BoundKind::Expected, BoundKind::Nonadaptive, BoundKind::MaxDistance, BoundKind::Proportional, BoundKind::Capped];

    pub fn tag(self) -> &'static str {
        match self {
            BoundKind::Expected => "TSP",
            BoundKind::Nonadaptive => "NTSP",
            BoundKind::MaxDistance => "ATSP-MD",
            BoundKind::Proportional => "ATSP-PR",
            BoundKind::Capped => "ATSP-CS",
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = TspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tsp" | "expected" => Ok(BoundKind::Expected),
            "ntsp" | "nonadaptive" => Ok(BoundKind::Nonadaptive),
            "atsp-md" | "md" => Ok(BoundKind::MaxDistance),
            "atsp-pr" | "pr" => Ok(BoundKind::Proportional),
            "atsp-cs" | "cs" => Ok(BoundKind::Capped),
            other => Err(TspError::InvalidConfig(format!("unknown bound `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// λ_min(E_{i∼p}[bcirc(Z_i)]).
    pub delta_p_sq: f64,
    /// The same constant for uniform p, used by the proportional-rule bound.
    pub delta_u_sq: f64,
    /// Certified lower bound on δ²_∞ (= δ²_p).
    pub delta_inf_sq_lower: f64,
    /// Sampled estimate of δ²_∞ (an upper estimate of the true min-max).
    pub delta_inf_sq_estimate: f64,
    /// min_k λ_min(E[Ẑ_(k)]).
    pub per_slice_min_rate: f64,
    pub q: usize,
    pub theta: f64,
    pub closed_form: Option<ClosedFormRates>,
    /// Contraction factor of each certified bound curve, keyed by method tag.
    pub contraction: BTreeMap<String, f64>,
}

impl RateReport {
    pub fn new(
        delta_p_sq: f64,
        delta_u_sq: f64,
        delta_inf: &DeltaInfEstimate,
        per_slice_min_rate: f64,
        q: usize,
        theta: f64,
        closed_form: Option<ClosedFormRates>,
    ) -> Self {
        let mut report = Self {
            delta_p_sq,
            delta_u_sq,
            delta_inf_sq_lower: delta_p_sq,
            delta_inf_sq_estimate: delta_inf.estimate,
            per_slice_min_rate,
            q,
            theta,
            closed_form,
            contraction: BTreeMap::new(),
        };
        for kind in BoundKind::ALL {
            report.contraction.insert(kind.tag().to_string(), report.rate(kind));
        }
        report
    }

    /// Certified contraction factor of the bound; δ²_∞ enters through its lower bound.
    pub fn rate(&self, kind: BoundKind) -> f64 {
        let r = match kind {
            BoundKind::Expected => 1.0 - self.per_slice_min_rate,
            BoundKind::Nonadaptive => 1.0 - self.delta_p_sq,
            BoundKind::MaxDistance => 1.0 - self.delta_inf_sq_lower,
            BoundKind::Proportional => 1.0 - (1.0 + 1.0 / self.q as f64) * self.delta_u_sq,
            BoundKind::Capped => 1.0 - self.theta * self.delta_inf_sq_lower - (1.0 - self.theta) * self.delta_p_sq,
        };
        r.clamp(0.0, 1.0)
    }

    /// (rate)^t for t = 0..=t_max.
    pub fn bound_curve(&self, kind: BoundKind, t_max: usize) -> Vec<f64> {
        let r = self.rate(kind);
        (0..=t_max).scan(1.0, |acc, _| {
            let v = *acc;
            *acc *= r;
            Some(v)
        }).collect()
    }
}

/// Computes every rate constant of a spatial family for the distribution `p`.
pub fn rate_report(
    a: &TubalMatrix,
    q: &WeightQ,
    set: &SketchSet,
    p: &ProbVector,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<RateReport> {
    check_spatial(set, "rate_report")?;
    let dim = a.cols() * a.depth();
    let delta = |p: &ProbVector| -> Result<f64> {
        if dim <= MAX_ASSEMBLED_DIM {
            Ok(expected_projector(a, q, set, p)?.lambda_min)
        } else {
            // unitarily similar to the assembled matrix
            Ok(per_slice_rates(a, q, set, std::slice::from_ref(p))?.min)
        }
    };
    let delta_p_sq = delta(p)?;
    let delta_u_sq = delta(&prob_uniform(set.q()))?;
    let per_slice = per_slice_rates(a, q, set, std::slice::from_ref(p))?;
    let delta_inf = estimate_delta_inf(a, q, set, p, samples, seed, &[])?;
    let closed_form = closed_form_rates(a, q, set).ok();
    Ok(RateReport::new(delta_p_sq, delta_u_sq, &delta_inf, per_slice.min, set.q(), theta, closed_form))
}

/// Σ_i p_i rank(bcirc(S_iᵀ∗A)), the expected projector trace.
pub fn expected_rank(a: &TubalMatrix, set: &SketchSet, p: &ProbVector) -> Result<f64> {
    check_spatial(set, "expected_rank")?;
    check_probs(p, set.q())?;
    let mut total = 0.0;
    for (s, &pi) in set.members().iter().zip(p.as_slice()) {
        let m = tprod_oracle(&ttranspose(s), a)?.bcirc();
        let sv = m.singular_values();
        let top = sv.iter().copied().fold(0.0, f64::max);
        let cut = m.nrows().max(m.ncols()) as f64 * top * crate::algebra::dense::RANK_RTOL;
        total += pi * sv.iter().filter(|&&s| s > cut && s > 0.0).count() as f64;
    }
    Ok(total)
}
