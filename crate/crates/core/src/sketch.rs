//! Sketch families and sampling probabilities.

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::dense::{self, CMat};
use crate::algebra::{dft3, FourierSlices, TubalMatrix, WeightQ};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SketchKind {
    SpatialSlice,
    SpatialBlock,
    SpatialGaussian,
    FourierPerSlice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FourierSketchKind {
    Row,
    Gaussian,
}

/// A finite family of sketches.
///
/// Spatial kinds hold q tubal matrices S_i of shape m×τ_i×l. The per-slice kind
/// holds, for every Fourier slice k, its own family of q complex m×τ matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SketchSet {
    kind: SketchKind,
    m: usize,
    depth: usize,
    spatial: Vec<TubalMatrix>,
    per_slice: Vec<Vec<CMat>>,
    #[serde(skip)]
    spatial_fourier: Vec<FourierSlices>,
}

impl SketchSet {
    fn spatial(kind: SketchKind, m: usize, depth: usize, members: Vec<TubalMatrix>) -> Self {
        let spatial_fourier = members.iter().map(dft3).collect();
        Self { kind, m, depth, spatial: members, per_slice: Vec::new(), spatial_fourier }
    }

    /// Wraps explicit spatial members (each m×τ_i×l).
    pub fn from_spatial(kind: SketchKind, members: Vec<TubalMatrix>) -> Result<Self> {
        if kind == SketchKind::FourierPerSlice {
            return Err(TspError::InvalidPartition("spatial members need a spatial kind".into()));
        }
        let first = members
            .first()
            .ok_or_else(|| TspError::InvalidPartition("empty sketch family".into()))?;
        let (m, l) = (first.rows(), first.depth());
        if members.iter().any(|s| s.rows() != m || s.depth() != l) {
            return Err(TspError::DimensionMismatch("sketch members disagree in m or l".into()));
        }
        Ok(Self::spatial(kind, m, l, members))
    }

    /// Wraps explicit per-slice families: `families[k][i]` is an m×τ complex matrix.
    pub fn from_per_slice(families: Vec<Vec<CMat>>) -> Result<Self> {
        let l = families.len();
        let q = families.first().map_or(0, Vec::len);
        if l == 0 || q == 0 || families.iter().any(|f| f.len() != q) {
            return Err(TspError::InvalidPartition("per-slice families must share a nonzero size".into()));
        }
        let m = families[0][0].nrows();
        if families.iter().flatten().any(|s| s.nrows() != m || s.ncols() == 0) {
            return Err(TspError::DimensionMismatch("per-slice sketches disagree in m".into()));
        }
        Ok(Self {
            kind: SketchKind::FourierPerSlice,
            m,
            depth: l,
            spatial: Vec::new(),
            per_slice: families,
            spatial_fourier: Vec::new(),
        })
    }

    /// Restores the cached transforms after deserialization.
    pub fn rebuild_cache(&mut self) {
        self.spatial_fourier = self.spatial.iter().map(dft3).collect();
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn is_per_slice(&self) -> bool {
        self.kind == SketchKind::FourierPerSlice
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn q(&self) -> usize {
        if self.is_per_slice() { self.per_slice[0].len() } else { self.spatial.len() }
    }

    /// Sketch size of member i (for per-slice families, of member i in slice 0).
    pub fn tau(&self, i: usize) -> usize {
        if self.is_per_slice() { self.per_slice[0][i].ncols() } else { self.spatial[i].cols() }
    }

    pub fn max_tau(&self) -> usize {
        (0..self.q()).map(|i| self.tau(i)).max().unwrap_or(0)
    }

    pub fn member(&self, i: usize) -> Option<&TubalMatrix> {
        self.spatial.get(i)
    }

    pub fn members(&self) -> &[TubalMatrix] {
        &self.spatial
    }

    /// Fourier slice k of member i, Ŝ_i,(k), for either representation.
    pub fn fourier_member(&self, k: usize, i: usize) -> &CMat {
        if self.is_per_slice() {
            &self.per_slice[k][i]
        } else {
            self.spatial_fourier[i].slice(k)
        }
    }
}

/// Lateral slices of the identity tubal matrix: S_i = I(:, i, :).
pub fn make_slice_sketches(m: usize, l: usize) -> SketchSet {
    let members = (0..m)
        .map(|i| {
            let mut s = TubalMatrix::zeros(m, 1, l);
            s.set(i, 0, 0, 1.0);
            s
        })
        .collect();
    SketchSet::spatial(SketchKind::SpatialSlice, m, l, members)
}

/// One member per block of a disjoint partition of the (0-based) rows.
pub fn make_block_sketches(m: usize, l: usize, partition: &[Vec<usize>]) -> Result<SketchSet> {
    if partition.is_empty() {
        return Err(TspError::InvalidPartition("no blocks".into()));
    }
    let mut seen = vec![false; m];
    for block in partition {
        if block.is_empty() {
            return Err(TspError::InvalidPartition("empty block".into()));
        }
        for &r in block {
            if r >= m {
                return Err(TspError::InvalidPartition(format!("row {r} out of range for m={m}")));
            }
            if seen[r] {
                return Err(TspError::InvalidPartition(format!("row {r} appears twice")));
            }
            seen[r] = true;
        }
    }
    if let Some(r) = seen.iter().position(|s| !s) {
        return Err(TspError::InvalidPartition(format!("row {r} is not covered")));
    }
    let members = partition
        .iter()
        .map(|block| {
            let mut s = TubalMatrix::zeros(m, block.len(), l);
            for (c, &r) in block.iter().enumerate() {
                s.set(r, c, 0, 1.0);
            }
            s
        })
        .collect();
    Ok(SketchSet::spatial(SketchKind::SpatialBlock, m, l, members))
}

/// Contiguous partition of 0..m into blocks of size τ (the last one may be shorter).
pub fn contiguous_partition(m: usize, tau: usize) -> Vec<Vec<usize>> {
    (0..m).collect::<Vec<_>>().chunks(tau.max(1)).map(<[usize]>::to_vec).collect()
}

/// q members whose first frontal slice is an i.i.d. N(0,1) m×τ matrix.
pub fn make_gaussian_sketches<R: Rng + ?Sized>(
    m: usize,
    tau: usize,
    q: usize,
    l: usize,
    rng: &mut R,
) -> Result<SketchSet> {
    if tau == 0 || tau > m || q == 0 {
        return Err(TspError::InvalidConfig(format!("gaussian sketches need 1 <= tau <= m and q >= 1 (tau={tau}, m={m}, q={q})")));
    }
    let members = (0..q).map(|_| gaussian_first_slice(m, tau, l, rng)).collect();
    Ok(SketchSet::spatial(SketchKind::SpatialGaussian, m, l, members))
}

pub(crate) fn gaussian_first_slice<R: Rng + ?Sized>(m: usize, tau: usize, l: usize, rng: &mut R) -> TubalMatrix {
    let mut s = TubalMatrix::zeros(m, tau, l);
    for c in 0..tau {
        for r in 0..m {
            s.set(r, c, 0, rng.sample(StandardNormal));
        }
    }
    s
}

/// Independent per-slice families, slice k drawn from its own stream of `seed`.
///
/// `Row` members are groups of τ coordinate columns. When qτ = m the family is
/// the full identity split in order; otherwise each slice picks a random subset
/// of qτ distinct rows. `Gaussian` members are real N(0,1) m×τ matrices.
pub fn make_fourier_sketches(
    m: usize,
    tau: usize,
    q: usize,
    l: usize,
    kind: FourierSketchKind,
    seed: u64,
) -> Result<SketchSet> {
    if tau == 0 || tau > m || q == 0 {
        return Err(TspError::InvalidConfig(format!("per-slice sketches need 1 <= tau <= m and q >= 1 (tau={tau}, m={m}, q={q})")));
    }
    if kind == FourierSketchKind::Row && q * tau > m {
        return Err(TspError::InvalidConfig(format!("row sketches need q*tau <= m, got {q}*{tau} > {m}")));
    }
    let families = (0..l)
        .map(|k| {
            let mut rng = stream(seed, Purpose::SketchSet, k as u64);
            match kind {
                FourierSketchKind::Row => {
                    let rows: Vec<usize> = if q * tau == m {
                        (0..m).collect()
                    } else {
                        rand::seq::index::sample(&mut rng, m, q * tau).into_vec()
                    };
                    rows.chunks(tau)
                        .map(|block| {
                            let mut s = CMat::zeros(m, tau);
                            for (c, &r) in block.iter().enumerate() {
                                s[(r, c)] = Complex64::new(1.0, 0.0);
                            }
                            s
                        })
                        .collect()
                }
                FourierSketchKind::Gaussian => (0..q)
                    .map(|_| CMat::from_fn(m, tau, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0)))
                    .collect(),
            }
        })
        .collect();
    SketchSet::from_per_slice(families)
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates an already normalized vector.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(TspError::InvalidProbability(format!("{p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(TspError::InvalidProbability(format!("sums to {s}")));
        }
        Ok(Self(p))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(TspError::InvalidProbability(format!("bad weights {w:?}")));
        }
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return Err(TspError::ZeroWeights);
        }
        Ok(Self(w.iter().map(|v| v / s).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// E_{i∼p}[v_i]
    pub fn expectation(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

pub fn prob_uniform(q: usize) -> ProbVector {
    ProbVector(vec![1.0 / q as f64; q])
}

/// p_i ∝ ‖A(i,:,:)‖²_F over the horizontal slices.
pub fn prob_slice_norm(a: &TubalMatrix) -> Result<ProbVector> {
    let (m, n, l) = a.dims();
    let w: Vec<f64> = (0..m)
        .map(|i| (0..n).flat_map(|j| (0..l).map(move |k| (j, k))).map(|(j, k)| a.get(i, j, k).powi(2)).sum())
        .collect();
    ProbVector::from_weights(&w)
}

/// Per-slice energy ‖Q̂_k^{-1/2} Â_kᴴ Ŝ_{k,i}‖²_F of every member.
fn sketch_energy(a_hat: &FourierSlices, q: Option<&WeightQ>, set: &SketchSet, k: usize, i: usize) -> f64 {
    let w = a_hat.slice(k).adjoint() * set.fourier_member(k, i);
    match q {
        Some(q) if !q.is_identity() => dense::fro_norm_sq(&(q.fourier_inv_sqrt(k) * w)),
        _ => dense::fro_norm_sq(&w),
    }
}

/// p_i ∝ ‖Q^{-1/2}∗Aᵀ∗S_i‖²_F, the convenient probabilities for a spatial family.
pub fn prob_sketch_norm(a: &TubalMatrix, q: &WeightQ, set: &SketchSet) -> Result<ProbVector> {
    if set.is_per_slice() {
        return Err(TspError::InvalidConfig("use prob_sketch_norm_per_slice for per-slice families".into()));
    }
    let a_hat = dft3(a);
    let w: Vec<f64> = (0..set.q())
        .map(|i| (0..a.depth()).map(|k| sketch_energy(&a_hat, Some(q), set, k, i)).sum::<f64>() / a.depth() as f64)
        .collect();
    ProbVector::from_weights(&w)
}

/// Slice-wise p_{k,i} ∝ ‖Q̂_k^{-1/2} Â_kᴴ Ŝ_{k,i}‖²_F.
pub fn prob_sketch_norm_per_slice(a: &TubalMatrix, q: &WeightQ, set: &SketchSet) -> Result<Vec<ProbVector>> {
    let a_hat = dft3(a);
    (0..a.depth())
        .map(|k| {
            let w: Vec<f64> = (0..set.q()).map(|i| sketch_energy(&a_hat, Some(q), set, k, i)).collect();
            ProbVector::from_weights(&w)
        })
        .collect()
}

/// Row probabilities of one Fourier slice: p_i ∝ ‖Â_k(i, :)‖².
pub fn prob_fourier_row_norm(a_hat_k: &CMat) -> Result<ProbVector> {
    let w: Vec<f64> = a_hat_k.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
    ProbVector::from_weights(&w)
}

/// Row probabilities of every Fourier slice of `a`.
pub fn prob_fourier_row_norms(a: &TubalMatrix) -> Result<Vec<ProbVector>> {
    dft3(a).slices().iter().map(prob_fourier_row_norm).collect()
}

/// Inverse-CDF draw from `p`.
pub fn sample_index<R: Rng + ?Sized>(p: &ProbVector, rng: &mut R) -> usize {
    sample_weighted(p.as_slice(), rng)
}

/// Inverse-CDF draw proportional to nonnegative weights (not necessarily normalized).
pub(crate) fn sample_weighted<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &v) in w.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn numerical_rank(m: &CMat) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    let cut = m.nrows().max(m.ncols()) as f64 * top * dense::RANK_RTOL;
    sv.iter().filter(|&&s| s > cut && s > 0.0).count()
}

/// Complete-discrete-sampling predicate: in every Fourier slice, each Ŝᴴ_{k,i}Â_k
/// has full row rank and the stacked family reaches full column rank n.
pub fn is_complete_sampling(a: &TubalMatrix, set: &SketchSet) -> bool {
    let a_hat = dft3(a);
    let n = a.cols();
    (0..a.depth()).all(|k| {
        let members: Vec<CMat> = (0..set.q()).map(|i| set.fourier_member(k, i).adjoint() * a_hat.slice(k)).collect();
        let rows_ok = members.iter().all(|s| numerical_rank(s) == s.nrows());
        let total_rows: usize = members.iter().map(CMat::nrows).sum();
        let mut stacked = CMat::zeros(total_rows, n);
        let mut r0 = 0;
        for s in &members {
            stacked.rows_mut(r0, s.nrows()).copy_from(s);
            r0 += s.nrows();
        }
        rows_ok && numerical_rank(&stacked) == n
    })
}

pub(crate) fn warn_if_incomplete(a: &TubalMatrix, set: &SketchSet) {
    if !is_complete_sampling(a, set) {
        warn!("sketch family is not a complete discrete sampling for this operator; rate bounds may not apply");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{tprod, ttranspose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn slice_sketch_members() {
        let s = make_slice_sketches(3, 2);
        assert_eq!(s.q(), 3);
        let m = s.member(1).unwrap();
        assert_eq!(m.dims(), (3, 1, 2));
        assert_eq!(m.get(1, 0, 0), 1.0);
        assert_eq!(m.fro_norm(), 1.0);
        let u = m.unfold();
        assert_eq!(u.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn slice_sketch_extracts_horizontal_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = TubalMatrix::random_normal(4, 3, 5, &mut rng);
        let s = make_slice_sketches(4, 5);
        for i in 0..4 {
            let got = tprod(&ttranspose(s.member(i).unwrap()), &a).unwrap();
            assert!(got.max_abs_diff(&a.select_rows(&[i])) < 1e-12);
        }
    }

    #[test]
    fn block_sketches() {
        let s = make_block_sketches(3, 2, &[vec![0, 1], vec![2]]).unwrap();
        assert_eq!((s.q(), s.tau(0), s.tau(1)), (2, 2, 1));
        assert!(make_block_sketches(3, 2, &[vec![0, 1], vec![1, 2]]).is_err());
        assert!(make_block_sketches(3, 2, &[vec![0, 1], vec![]]).is_err());
        assert!(make_block_sketches(3, 2, &[vec![0, 1]]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = TubalMatrix::random_normal(3, 2, 2, &mut rng);
        let got = tprod(&ttranspose(s.member(0).unwrap()), &a).unwrap();
        assert!(got.max_abs_diff(&a.select_rows(&[0, 1])) < 1e-12);
    }

    #[test]
    fn gaussian_sketches_are_reproducible_with_equal_fourier_slices() {
        let a = make_gaussian_sketches(5, 2, 3, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = make_gaussian_sketches(5, 2, 3, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.members(), b.members());
        for i in 0..3 {
            for k in 1..4 {
                assert!((a.fourier_member(k, i) - a.fourier_member(0, i)).norm() < 1e-14);
            }
            assert!(a.member(i).unwrap().slice(1).norm() == 0.0);
        }
    }

    #[test]
    fn gaussian_entries_have_zero_mean() {
        let s = make_gaussian_sketches(100, 10, 100, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let (sum, count) = s.members().iter().fold((0.0, 0usize), |(acc, c), m| {
            (acc + m.as_slice().iter().sum::<f64>(), c + m.as_slice().len())
        });
        assert_eq!(count, 100_000);
        assert!((sum / count as f64).abs() < 0.02);
    }

    #[test]
    fn fourier_row_families() {
        let s = make_fourier_sketches(3, 1, 3, 2, FourierSketchKind::Row, 0).unwrap();
        for k in 0..2 {
            let mut sum = CMat::zeros(3, 3);
            for i in 0..3 {
                let e = s.fourier_member(k, i);
                sum += e * e.adjoint();
            }
            assert!((sum - CMat::identity(3, 3)).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = TubalMatrix::random_normal(3, 2, 2, &mut rng);
        let ah = dft3(&a);
        let row = s.fourier_member(1, 2).adjoint() * ah.slice(1);
        assert!((row - ah.slice(1).row(2)).norm() < 1e-15);
    }

    #[test]
    fn fourier_families_use_independent_streams() {
        let s = make_fourier_sketches(6, 2, 2, 3, FourierSketchKind::Gaussian, 9).unwrap();
        assert!((s.fourier_member(0, 0) - s.fourier_member(1, 0)).norm() > 1e-3);
        let t = make_fourier_sketches(6, 2, 2, 3, FourierSketchKind::Gaussian, 9).unwrap();
        assert_eq!(s.fourier_member(2, 1), t.fourier_member(2, 1));
        let r = make_fourier_sketches(6, 1, 3, 4, FourierSketchKind::Row, 9).unwrap();
        let picks: Vec<Vec<usize>> = (0..4)
            .map(|k| (0..3).map(|i| r.fourier_member(k, i).column(0).iter().position(|z| z.re == 1.0).unwrap()).collect())
            .collect();
        assert!(picks.iter().any(|p| p != &picks[0]));
    }

    #[test]
    fn probability_rules() {
        assert_eq!(prob_uniform(4).as_slice(), &[0.25; 4]);
        let a = TubalMatrix::from_fn(2, 1, 1, |i, _, _| if i == 0 { 1.0 } else { 2.0 });
        let p = prob_slice_norm(&a).unwrap();
        assert!((p.as_slice()[0] - 0.2).abs() < 1e-15 && (p.as_slice()[1] - 0.8).abs() < 1e-15);
        assert!(matches!(prob_slice_norm(&TubalMatrix::zeros(2, 2, 2)), Err(TspError::ZeroWeights)));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = TubalMatrix::random_normal(5, 3, 4, &mut rng);
        let ps = prob_sketch_norm(&a, &WeightQ::identity(3, 4), &make_slice_sketches(5, 4)).unwrap();
        let pn = prob_slice_norm(&a).unwrap();
        for (x, y) in ps.as_slice().iter().zip(pn.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let pr = prob_fourier_row_norm(&dft3(&a).slice(1).clone()).unwrap();
        assert!((pr.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ProbVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!((0..1000).all(|_| sample_index(&p, &mut rng) == 0));
        let p = ProbVector::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert!((0..10_000).all(|_| sample_index(&p, &mut rng) != 1));
        let p = ProbVector::new(vec![0.5, 0.5]).unwrap();
        let hits = (0..100_000).filter(|_| sample_index(&p, &mut rng) == 0).count();
        assert!((hits as f64 / 1e5 - 0.5).abs() < 0.01);
        let draws = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_index(&p, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draws(3), draws(3));
    }

    #[test]
    fn complete_sampling_predicate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = TubalMatrix::random_normal(6, 3, 3, &mut rng);
        assert!(is_complete_sampling(&a, &make_slice_sketches(6, 3)));
        let b = make_block_sketches(6, 3, &[vec![0, 1], vec![2, 3, 4, 5]]).unwrap();
        // four rows of a rank-3 slice cannot have full row rank
        assert!(!is_complete_sampling(&a, &b));
    }
}
