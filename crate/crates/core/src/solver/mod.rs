//! Sketch-and-project iterations for A∗X = B.
//!
//! Every method works on the Fourier slices. Finite-family methods use the
//! cached fast path in [`state`]; methods that draw a new sketch each step live
//! in [`fresh`], and the Re/Im stacking variant in [`stacked`].

mod driver;
pub mod fresh;
pub mod record;
pub mod select;
pub mod stacked;
pub mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::dense::{self, CMat};
use crate::algebra::{dft3, FourierSlices, TubalMatrix, WeightQ};
use crate::error::{Result, TspError};
use crate::sketch::{
    prob_sketch_norm, prob_sketch_norm_per_slice, prob_slice_norm, prob_uniform,
    warn_if_incomplete, ProbVector, SketchKind, SketchSet,
};

pub use record::{Chosen, RunRecord, StopReason, TraceRow};
pub use select::{capped_set, select_index, selection_probabilities, SelectionRule};
pub use state::SolverState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum Method {
    Tsp,
    Ntsp,
    AtspMd,
    AtspPr,
    AtspCs,
    TspI,
    TspII,
    NtspII,
    AtspMdII,
    AtspPrII,
    AtspCsII,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Tsp,
        Method::Ntsp,
        Method::AtspMd,
        Method::AtspPr,
        Method::AtspCs,
        Method::TspI,
        Method::TspII,
        Method::NtspII,
        Method::AtspMdII,
        Method::AtspPrII,
        Method::AtspCsII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tsp => "TSP",
            Method::Ntsp => "NTSP",
            Method::AtspMd => "ATSP-MD",
            Method::AtspPr => "ATSP-PR",
            Method::AtspCs => "ATSP-CS",
            Method::TspI => "TSP-I",
            Method::TspII => "TSP-II",
            Method::NtspII => "NTSP-II",
            Method::AtspMdII => "ATSP-MD-II",
            Method::AtspPrII => "ATSP-PR-II",
            Method::AtspCsII => "ATSP-CS-II",
        }
    }

    /// Methods that need per-Fourier-slice sketch families.
    pub fn needs_per_slice(self) -> bool {
        matches!(
            self,
            Method::TspI | Method::TspII | Method::NtspII | Method::AtspMdII | Method::AtspPrII | Method::AtspCsII
        )
    }

    pub fn is_capped(self) -> bool {
        matches!(self, Method::AtspCs | Method::AtspCsII)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            Method::AtspMd | Method::AtspPr | Method::AtspCs | Method::AtspMdII | Method::AtspPrII | Method::AtspCsII
        )
    }

    /// The iterate lives in the complex field and the output is its real part.
    pub fn takes_real_part(self) -> bool {
        matches!(self, Method::TspII | Method::NtspII | Method::AtspMdII | Method::AtspPrII | Method::AtspCsII)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TspError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| TspError::UnknownMethod(s.to_string()))
    }
}

impl From<Method> for &'static str {
    fn from(m: Method) -> Self {
        m.name()
    }
}

impl TryFrom<String> for Method {
    type Error = TspError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How the fixed (nonadaptive) distribution p is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbRule {
    Uniform,
    /// Squared norms of the sketched rows, ‖Sᵀ∗A‖²_F (horizontal-slice norms for slice sketches).
    SliceNorm,
    /// ‖Q^{-1/2}∗Aᵀ∗S_i‖²_F, slice-wise for per-slice families.
    SketchNorm,
    /// Row norms of each Fourier slice Â_(k) (per-slice families only).
    FourierRowNorm,
    Explicit(Vec<f64>),
}

impl FromStr for ProbRule {
    type Err = TspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "uniform" => Ok(ProbRule::Uniform),
            "slice-norm" => Ok(ProbRule::SliceNorm),
            "sketch-norm" => Ok(ProbRule::SketchNorm),
            "fourier-row-norm" | "row-norm" => Ok(ProbRule::FourierRowNorm),
            other => Err(TspError::InvalidConfig(format!("unknown probability rule `{other}`"))),
        }
    }
}

/// Per-slice random streams for the slice-wise methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceStreams {
    /// Slice k draws from its own stream.
    Independent,
    /// Every slice replays the same stream, so all slices make identical draws.
    Shared,
}

/// Residual bookkeeping for the nonadaptive cached path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualMode {
    /// Recursion when τq ≤ n, direct recomputation of the chosen residual otherwise.
    Auto,
    Recursion,
    Direct,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub method: Method,
    /// T-SPD weight; `None` means the identity.
    pub weight: Option<WeightQ>,
    pub sketch: SketchSet,
    pub prob: ProbRule,
    /// Capped-rule threshold; defaults to 0.5 for capped methods.
    pub theta: Option<f64>,
    /// For TSP, TSP-I and TSP-II: draw a fresh Gaussian sketch of this size every
    /// step instead of sampling a member of the family.
    pub fresh_tau: Option<usize>,
    pub max_iters: usize,
    pub tol_rel_err: f64,
    pub seed: u64,
    pub record_every: usize,
    pub slice_streams: SliceStreams,
    /// Recompute cached residuals from scratch every this many steps.
    pub audit_every: Option<usize>,
    pub residual_mode: ResidualMode,
}

impl SolverConfig {
    pub fn new(method: Method, sketch: SketchSet) -> Self {
        Self {
            method,
            weight: None,
            sketch,
            prob: ProbRule::Uniform,
            theta: None,
            fresh_tau: None,
            max_iters: 10_000,
            tol_rel_err: 1e-6,
            seed: 0,
            record_every: 1,
            slice_streams: SliceStreams::Independent,
            audit_every: if cfg!(debug_assertions) { Some(100) } else { None },
            residual_mode: ResidualMode::Auto,
        }
    }

    pub fn theta_or_default(&self) -> f64 {
        self.theta.unwrap_or(0.5)
    }
}

/// Output of a solve: the real iterate and its trace.
#[derive(Clone, Debug)]
pub struct Solution {
    pub x: TubalMatrix,
    pub record: RunRecord,
}

/// Problem data shared by every engine, all in the Fourier domain.
pub(crate) struct Problem {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub a_hat: FourierSlices,
    pub b_hat: FourierSlices,
    pub weight: WeightQ,
    pub truth_hat: Option<FourierSlices>,
    pub truth_norm: f64,
    pub b_norm: f64,
}

impl Problem {
    pub fn new(a: &TubalMatrix, b: &TubalMatrix, truth: Option<&TubalMatrix>, weight: Option<&WeightQ>) -> Result<Self> {
        let (m, n, l) = a.dims();
        if b.rows() != m || b.depth() != l {
            return Err(TspError::DimensionMismatch(format!(
                "A is {m}x{n}x{l} but B is {}x{}x{}",
                b.rows(),
                b.cols(),
                b.depth()
            )));
        }
        let p = b.cols();
        if let Some(x) = truth {
            if x.dims() != (n, p, l) {
                return Err(TspError::DimensionMismatch(format!("reference solution must be {n}x{p}x{l}")));
            }
            if x.fro_norm() == 0.0 {
                return Err(TspError::ZeroReference);
            }
        }
        let weight = match weight {
            Some(w) if w.n() != n || w.depth() != l => {
                return Err(TspError::DimensionMismatch(format!("weight must be {n}x{n}x{l}")));
            }
            Some(w) => w.clone(),
            None => WeightQ::identity(n, l),
        };
        Ok(Self {
            m,
            n,
            p,
            l,
            a_hat: dft3(a),
            b_hat: dft3(b),
            weight,
            truth_hat: truth.map(dft3),
            truth_norm: truth.map_or(0.0, TubalMatrix::fro_norm),
            b_norm: b.fro_norm(),
        })
    }

    /// Q̂_k^{-1} M, skipping the product for the identity weight.
    pub fn apply_q_inverse(&self, k: usize, m: CMat) -> CMat {
        if self.weight.is_identity() { m } else { self.weight.fourier_inverse(k) * m }
    }
}

pub(crate) enum ResolvedProbs {
    Spatial(ProbVector),
    PerSlice(Vec<ProbVector>),
}

fn sketched_row_energy(a: &TubalMatrix, set: &SketchSet) -> Result<ProbVector> {
    let a_hat = dft3(a);
    let l = a.depth();
    let w: Vec<f64> = (0..set.q())
        .map(|i| {
            (0..l).map(|k| dense::fro_norm_sq(&(set.fourier_member(k, i).adjoint() * a_hat.slice(k)))).sum::<f64>()
                / l as f64
        })
        .collect();
    ProbVector::from_weights(&w)
}

pub(crate) fn resolve_probs(a: &TubalMatrix, weight: &WeightQ, config: &SolverConfig) -> Result<ResolvedProbs> {
    let set = &config.sketch;
    let q = set.q();
    let explicit = |v: &[f64]| -> Result<ProbVector> {
        if v.len() != q {
            return Err(TspError::InvalidProbability(format!("{} weights for {q} sketches", v.len())));
        }
        ProbVector::new(v.to_vec())
    };
    if set.is_per_slice() {
        let l = a.depth();
        let per = match &config.prob {
            ProbRule::Uniform => vec![prob_uniform(q); l],
            ProbRule::SketchNorm => prob_sketch_norm_per_slice(a, weight, set)?,
            // for coordinate sketches these are exactly the row norms of Â_(k)
            ProbRule::FourierRowNorm => {
                let a_hat = dft3(a);
                (0..l)
                    .map(|k| {
                        let w: Vec<f64> = (0..q)
                            .map(|i| dense::fro_norm_sq(&(set.fourier_member(k, i).adjoint() * a_hat.slice(k))))
                            .collect();
                        ProbVector::from_weights(&w)
                    })
                    .collect::<Result<_>>()?
            }
            ProbRule::SliceNorm => {
                return Err(TspError::InvalidConfig(
                    "slice-norm probabilities apply to spatial families; use fourier-row-norm".into(),
                ))
            }
            ProbRule::Explicit(v) => vec![explicit(v)?; l],
        };
        Ok(ResolvedProbs::PerSlice(per))
    } else {
        let p = match &config.prob {
            ProbRule::Uniform => prob_uniform(q),
            ProbRule::SliceNorm if set.kind() == SketchKind::SpatialSlice && q == a.rows() => prob_slice_norm(a)?,
            ProbRule::SliceNorm => sketched_row_energy(a, set)?,
            ProbRule::SketchNorm => prob_sketch_norm(a, weight, set)?,
            ProbRule::FourierRowNorm => {
                return Err(TspError::InvalidConfig("fourier-row-norm needs a per-slice family".into()))
            }
            ProbRule::Explicit(v) => explicit(v)?,
        };
        Ok(ResolvedProbs::Spatial(p))
    }
}

/// The fixed distribution over a spatial family that `rule` resolves to.
pub fn spatial_probabilities(a: &TubalMatrix, weight: Option<&WeightQ>, set: &SketchSet, rule: &ProbRule) -> Result<ProbVector> {
    let identity;
    let weight = match weight {
        Some(w) => w,
        None => {
            identity = WeightQ::identity(a.cols(), a.depth());
            &identity
        }
    };
    let mut config = SolverConfig::new(Method::Ntsp, set.clone());
    config.prob = rule.clone();
    match resolve_probs(a, weight, &config)? {
        ResolvedProbs::Spatial(p) => Ok(p),
        ResolvedProbs::PerSlice(_) => Err(TspError::InvalidConfig("expected a spatial sketch family".into())),
    }
}

pub(crate) fn rule_for(method: Method, theta: f64, p: ProbVector) -> SelectionRule {
    match method {
        Method::AtspMd | Method::AtspMdII => SelectionRule::MaxDistance,
        Method::AtspPr | Method::AtspPrII => SelectionRule::Proportional,
        Method::AtspCs | Method::AtspCsII => SelectionRule::Capped { theta, p },
        _ => SelectionRule::Fixed(p),
    }
}

fn validate(a: &TubalMatrix, config: &SolverConfig) -> Result<()> {
    let method = config.method;
    let set = &config.sketch;
    if method.needs_per_slice() != set.is_per_slice() {
        return Err(TspError::InvalidConfig(format!(
            "{method} needs {} sketches, got {:?}",
            if method.needs_per_slice() { "per-slice" } else { "spatial" },
            set.kind()
        )));
    }
    if set.m() != a.rows() || set.depth() != a.depth() {
        return Err(TspError::DimensionMismatch(format!(
            "sketches are for m={}, l={} but A is {}x{}x{}",
            set.m(),
            set.depth(),
            a.rows(),
            a.cols(),
            a.depth()
        )));
    }
    if let Some(theta) = config.theta {
        if !method.is_capped() {
            return Err(TspError::InvalidConfig(format!("theta only applies to capped methods, not {method}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(TspError::InvalidConfig(format!("theta must lie in [0,1], got {theta}")));
        }
    }
    if config.fresh_tau.is_some() && !matches!(method, Method::Tsp | Method::TspI | Method::TspII) {
        return Err(TspError::InvalidConfig(format!("fresh sketches only apply to TSP, TSP-I and TSP-II, not {method}")));
    }
    if let Some(tau) = config.fresh_tau {
        if tau == 0 || tau > a.rows() {
            return Err(TspError::InvalidConfig(format!("fresh sketch size must be in 1..={}", a.rows())));
        }
    }
    if config.record_every == 0 {
        return Err(TspError::InvalidConfig("record_every must be positive".into()));
    }
    if !(config.tol_rel_err >= 0.0) {
        return Err(TspError::InvalidConfig("tolerance must be nonnegative".into()));
    }
    Ok(())
}

/// Runs the configured method from X⁰ = O.
///
/// With `truth` the stopping rule is ‖X^t−X★‖_F/‖X★‖_F < tol, otherwise
/// ‖A∗X^t−B‖_F/‖B‖_F < tol.
pub fn solve(a: &TubalMatrix, b: &TubalMatrix, truth: Option<&TubalMatrix>, config: &SolverConfig) -> Result<Solution> {
    validate(a, config)?;
    match config.method {
        Method::Tsp => fresh::solve_fourier_tsp(a, b, truth, config),
        Method::TspI => stacked::solve_stacked_i(a, b, truth, config),
        Method::TspII => fresh::solve_fresh_ii(a, b, truth, config),
        _ => {
            if config.fresh_tau.is_none() {
                warn_if_incomplete(a, &config.sketch);
            }
            state::solve_cached(a, b, truth, config)
        }
    }
}

/// TSP-I entry point; the method must be TSP-I.
pub fn solve_stacked_i(a: &TubalMatrix, b: &TubalMatrix, truth: Option<&TubalMatrix>, config: &SolverConfig) -> Result<Solution> {
    if config.method != Method::TspI {
        return Err(TspError::InvalidConfig(format!("TSP-I solver called with {}", config.method)));
    }
    solve(a, b, truth, config)
}

/// Entry point for the slice-wise real-part methods (TSP-II and the *-II family).
pub fn solve_fourier_ii(a: &TubalMatrix, b: &TubalMatrix, truth: Option<&TubalMatrix>, config: &SolverConfig) -> Result<Solution> {
    if !config.method.takes_real_part() {
        return Err(TspError::InvalidConfig(format!("{} does not take the real part", config.method)));
    }
    solve(a, b, truth, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("atsp_pr_ii".parse::<Method>().unwrap(), Method::AtspPrII);
        assert!(matches!("RK".parse::<Method>(), Err(TspError::UnknownMethod(_))));
    }

    #[test]
    fn probability_rule_names() {
        assert_eq!("slice-norm".parse::<ProbRule>().unwrap(), ProbRule::SliceNorm);
        assert!("bogus".parse::<ProbRule>().is_err());
    }
}
