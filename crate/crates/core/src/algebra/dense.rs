//! Small dense complex-matrix kernels used slice by slice in the Fourier domain.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Relative cutoff below which singular values (or Gram eigenvalues) count as zero.
pub const RANK_RTOL: f64 = 1e-12;

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`; eigenvalues are returned unsorted.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn herm_lambda_min(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    herm_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn herm_lambda_max(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    herm_eigen(m).0.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn rank_cutoff(dim: usize, top: f64) -> f64 {
    dim.max(1) as f64 * top * RANK_RTOL
}

/// Moore-Penrose inverse of an arbitrary complex matrix.
///
/// Works from the Hermitian eigenpairs of [[0, M], [Mᴴ, 0]], whose positive
/// eigenvalues are the singular values σ with eigenvectors (u; v)/√2. nalgebra's
/// SVD can return inconsistent singular vectors for rank-deficient inputs, and
/// this route keeps the accuracy of an SVD without squaring the condition number.
pub fn pinv(m: &CMat) -> CMat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return CMat::zeros(c, r);
    }
    let mut aug = CMat::zeros(r + c, r + c);
    aug.view_mut((0, r), (r, c)).copy_from(m);
    aug.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let (vals, vecs) = herm_eigen(&aug);
    let smax = vals.iter().copied().fold(0.0, f64::max);
    let cut = rank_cutoff(r.max(c), smax);
    let mut out = CMat::zeros(c, r);
    for (idx, &s) in vals.iter().enumerate() {
        if s > cut && s > 0.0 {
            let w = vecs.column(idx);
            let (u, v) = (w.rows(0, r), w.rows(r, c));
            out += (v * u.adjoint()).scale(2.0 / s);
        }
    }
    out
}

/// Applies `f` to the eigenvalues of a Hermitian matrix, reconstructing V f(Λ) Vᴴ.
pub fn herm_apply<F: Fn(f64) -> f64>(m: &CMat, f: F) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(c).scale_mut(s);
    }
    scaled * vecs.adjoint()
}

/// Pseudo-inverse of a Hermitian positive semidefinite matrix using the shared rank cutoff.
pub fn herm_pinv(m: &CMat) -> CMat {
    let (vals, _) = herm_eigen(m);
    let top = vals.iter().copied().fold(0.0, |a: f64, b| a.max(b.abs()));
    let cut = rank_cutoff(m.nrows(), top);
    herm_apply(m, |lam| if lam > cut && lam > 0.0 { 1.0 / lam } else { 0.0 })
}

pub fn herm_sqrt(m: &CMat) -> CMat {
    herm_apply(m, |lam| lam.max(0.0).sqrt())
}

/// Factor `C` with `C Cᴴ = gram^†` for a Hermitian PSD Gram matrix.
///
/// Full-rank Grams get the lower Cholesky factor of the inverse. Rank-deficient
/// ones fall back to `V Λ^{-1/2}` on the retained eigenpairs, which satisfies the
/// same identity; a zero Gram yields a zero factor.
pub fn pinv_factor(gram: &CMat) -> CMat {
    let dim = gram.nrows();
    if dim == 1 {
        let g = gram[(0, 0)].re;
        let cut = rank_cutoff(1, g.abs());
        let v = if g > cut && g > 0.0 { 1.0 / g.sqrt() } else { 0.0 };
        return CMat::from_element(1, 1, Complex64::new(v, 0.0));
    }
    let (vals, vecs) = herm_eigen(gram);
    let top = vals.iter().copied().fold(0.0, |a: f64, b| a.max(b.abs()));
    let cut = rank_cutoff(dim, top);
    let full_rank = top > 0.0 && vals.iter().all(|&v| v > cut);
    if full_rank {
        let inv = herm_apply(gram, |lam| 1.0 / lam);
        if let Some(ch) = hermitian_part(&inv).cholesky() {
            return ch.l();
        }
    }
    let mut c = vecs;
    for (col, &lam) in vals.iter().enumerate() {
        let s = if lam > cut && lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 };
        c.column_mut(col).scale_mut(s);
    }
    c
}
