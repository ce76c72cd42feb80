use nalgebra::DMatrix;

use super::dense::{self, CMat};
use super::fourier::{dft3, idft3_scaled, FourierSlices};
use super::tubal::TubalMatrix;
use super::weight::WeightQ;
use crate::error::{Result, TspError};

fn check_product(x: (usize, usize, usize), y: (usize, usize, usize)) -> Result<()> {
    if x.1 != y.0 || x.2 != y.2 {
        return Err(TspError::DimensionMismatch(format!(
            "cannot t-multiply {}x{}x{} by {}x{}x{}",
            x.0, x.1, x.2, y.0, y.1, y.2
        )));
    }
    Ok(())
}

/// Slice-wise product of two Fourier representations.
pub fn fprod(x: &FourierSlices, y: &FourierSlices) -> Result<FourierSlices> {
    check_product((x.rows(), x.cols(), x.depth()), (y.rows(), y.cols(), y.depth()))?;
    let slices = x.slices().iter().zip(y.slices()).map(|(a, b)| a * b).collect();
    FourierSlices::from_slices(slices)
}

/// t-product computed by per-slice products in the Fourier domain.
pub fn tprod(x: &TubalMatrix, y: &TubalMatrix) -> Result<TubalMatrix> {
    check_product(x.dims(), y.dims())?;
    let f = fprod(&dft3(x), &dft3(y))?;
    idft3_scaled(&f, x.depth() as f64 * x.fro_norm() * y.fro_norm())
}

/// t-product computed literally as fold(bcirc(X)·unfold(Y)).
pub fn tprod_oracle(x: &TubalMatrix, y: &TubalMatrix) -> Result<TubalMatrix> {
    check_product(x.dims(), y.dims())?;
    TubalMatrix::fold(&(x.bcirc() * y.unfold()), x.depth())
}

/// Tensor transpose: each slice transposed, slices 2..l in reverse order.
pub fn ttranspose(x: &TubalMatrix) -> TubalMatrix {
    let l = x.depth();
    TubalMatrix::from_fn(x.cols(), x.rows(), l, |i, j, k| x.get(j, i, (l - k) % l))
}

/// Applies a per-slice map to the Fourier slices of a real tensor and transforms back.
///
/// Only slices 0..=l/2 are evaluated; the rest are filled with the conjugates,
/// so the map's output is exactly conjugate symmetric and the result real.
pub fn map_fourier_real<F>(x: &TubalMatrix, mut f: F) -> Result<TubalMatrix>
where
    F: FnMut(&CMat) -> Result<CMat>,
{
    let fx = dft3(x);
    let l = x.depth();
    let mut out: Vec<Option<CMat>> = vec![None; l];
    for k in 0..=l / 2 {
        let v = f(fx.slice(k))?;
        let partner = (l - k) % l;
        if partner != k {
            out[partner] = Some(v.conjugate());
        }
        out[k] = Some(v);
    }
    let slices: Vec<CMat> = out.into_iter().map(|s| s.expect("slice filled")).collect();
    let fo = FourierSlices::from_slices(slices)?;
    idft3_scaled(&fo, fo.spatial_norm_sq().sqrt())
}

/// Moore-Penrose inverse via per-slice matrix pseudoinverses.
pub fn tpinv(x: &TubalMatrix) -> TubalMatrix {
    map_fourier_real(x, |s| Ok(dense::pinv(s))).expect("conjugate-symmetric by construction")
}

fn herm_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// True iff every Fourier slice is Hermitian (defect ≤ tol·max(1, ‖slice‖)) with λ_min > tol.
pub fn is_t_spd(x: &TubalMatrix, tol: f64) -> Result<bool> {
    if x.rows() != x.cols() {
        return Err(TspError::DimensionMismatch(format!(
            "T-SPD test needs square slices, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let f = dft3(x);
    Ok(f.slices().iter().all(|s| {
        herm_defect(s) <= tol * s.norm().max(1.0) && dense::herm_lambda_min(s) > tol
    }))
}

pub(crate) fn require_t_spd(x: &TubalMatrix) -> Result<()> {
    if x.rows() != x.cols() {
        return Err(TspError::NotTSpd(format!("slices are {}x{}", x.rows(), x.cols())));
    }
    let f = dft3(x);
    for (k, s) in f.slices().iter().enumerate() {
        let scale = s.norm().max(f64::MIN_POSITIVE);
        if herm_defect(s) > 1e-10 * scale {
            return Err(TspError::NotTSpd(format!("Fourier slice {k} is not Hermitian")));
        }
        let lmin = dense::herm_lambda_min(s);
        if lmin <= 0.0 {
            return Err(TspError::NotTSpd(format!("Fourier slice {k} has eigenvalue {lmin:.3e}")));
        }
    }
    Ok(())
}

/// Square root of a T-SPD tensor via per-slice Hermitian eigen square roots.
pub fn t_sqrt(x: &TubalMatrix) -> Result<TubalMatrix> {
    require_t_spd(x)?;
    map_fourier_real(x, |s| Ok(dense::herm_sqrt(s)))
}

/// ‖Q^{1/2}∗M‖_F evaluated as sqrt((1/l)·Σ_k tr(M̂ᴴ Q̂ M̂)).
pub fn weighted_fnorm(m: &TubalMatrix, q: &WeightQ) -> Result<f64> {
    Ok(weighted_fnorm_sq_fourier(&dft3(m), q)?.sqrt())
}

/// Squared weighted norm of a tensor given by its Fourier slices.
pub fn weighted_fnorm_sq_fourier(m: &FourierSlices, q: &WeightQ) -> Result<f64> {
    if m.rows() != q.n() || m.depth() != q.depth() {
        return Err(TspError::DimensionMismatch(format!(
            "weight is {}x{}x{}, tensor has {} rows and depth {}",
            q.n(),
            q.n(),
            q.depth(),
            m.rows(),
            m.depth()
        )));
    }
    let l = m.depth() as f64;
    if q.is_identity() {
        return Ok(m.spatial_norm_sq());
    }
    let total: f64 = m
        .slices()
        .iter()
        .enumerate()
        .map(|(k, s)| (s.adjoint() * q.fourier(k) * s).trace().re)
        .sum();
    Ok((total / l).max(0.0))
}

/// Spectral weighted norm ‖M‖_{2(Q)} = ‖bcirc(Q^{1/2}∗M)‖₂ = max_k σ_max(Q̂_k^{1/2} M̂_k).
pub fn weighted_2norm(m: &TubalMatrix, q: &WeightQ) -> Result<f64> {
    let f = dft3(m);
    if m.rows() != q.n() || m.depth() != q.depth() {
        return Err(TspError::DimensionMismatch("weight and tensor disagree".into()));
    }
    Ok(f.slices()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let w = q.fourier_sqrt(k) * s;
            w.singular_values().iter().copied().fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

/// Gram tensor Aᵀ∗A, convenient for building T-SPD weights.
pub fn t_gram(a: &TubalMatrix) -> Result<TubalMatrix> {
    tprod(&ttranspose(a), a)
}

/// Dense symmetric square root of a symmetric PSD real matrix (oracle helper).
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (c, &lam) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(c).scale_mut(lam.max(0.0).sqrt());
    }
    v * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_is_neutral() {
        let x = TubalMatrix::random_normal(3, 4, 5, &mut rng(1));
        assert!(tprod(&TubalMatrix::identity(3, 5), &x).unwrap().rel_diff(&x) < 1e-14);
    }

    #[test]
    fn depth_one_is_matrix_product() {
        let mut r = rng(2);
        let x = TubalMatrix::random_normal(3, 2, 1, &mut r);
        let y = TubalMatrix::random_normal(2, 4, 1, &mut r);
        let p = tprod(&x, &y).unwrap();
        assert!((p.slice(0) - x.slice(0) * y.slice(0)).norm() < 1e-13);
    }

    #[test]
    fn fourier_product_matches_bcirc_oracle() {
        let mut r = rng(3);
        let x = TubalMatrix::random_normal(3, 2, 5, &mut r);
        let y = TubalMatrix::random_normal(2, 4, 5, &mut r);
        let fast = tprod(&x, &y).unwrap();
        let slow = tprod_oracle(&x, &y).unwrap();
        assert!(fast.rel_diff(&slow) < 1e-10);
        assert!(slow.rel_diff(&fast) < 1e-10);
        assert!(tprod(&x, &x).is_err());
    }

    #[test]
    fn zero_times_anything_is_zero() {
        let y = TubalMatrix::random_normal(2, 3, 4, &mut rng(4));
        let z = tprod_oracle(&TubalMatrix::zeros(5, 2, 4), &y).unwrap();
        assert_eq!(z.fro_norm(), 0.0);
        assert_eq!(tprod(&TubalMatrix::zeros(5, 2, 4), &y).unwrap().fro_norm(), 0.0);
    }

    #[test]
    fn tubes_multiply_by_circular_convolution() {
        let mut r = rng(5);
        let l = 6;
        let a = TubalMatrix::random_normal(1, 1, l, &mut r);
        let b = TubalMatrix::random_normal(1, 1, l, &mut r);
        let c = tprod(&a, &b).unwrap();
        for k in 0..l {
            let direct: f64 = (0..l).map(|j| a.get(0, 0, j) * b.get(0, 0, (k + l - j) % l)).sum();
            assert!((c.get(0, 0, k) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_cases() {
        let x = TubalMatrix::random_normal(2, 3, 1, &mut rng(6));
        assert_eq!(ttranspose(&x).slice(0), x.slice(0).transpose());
        assert_eq!(ttranspose(&TubalMatrix::identity(3, 4)), TubalMatrix::identity(3, 4));
        let y = TubalMatrix::random_normal(2, 3, 4, &mut rng(7));
        assert_eq!(ttranspose(&y).bcirc(), y.bcirc().transpose());
        assert_eq!(ttranspose(&ttranspose(&y)), y);
    }

    #[test]
    fn pinv_of_identity_and_invertible() {
        let i = TubalMatrix::identity(3, 4);
        assert!(tpinv(&i).rel_diff(&i) < 1e-12);
        let x = TubalMatrix::random_normal(4, 4, 3, &mut rng(8)).add(&TubalMatrix::identity(4, 3).scale(4.0)).unwrap();
        let p = tprod(&x, &tpinv(&x)).unwrap();
        assert!(p.rel_diff(&TubalMatrix::identity(4, 3)) < 1e-8);
    }

    #[test]
    fn pinv_axioms_with_zero_fourier_slice() {
        // constant tubes: only the first Fourier slice is nonzero
        let mut r = rng(9);
        let base = TubalMatrix::random_normal(3, 2, 1, &mut r);
        let x = TubalMatrix::from_fn(3, 2, 4, |i, j, _| base.get(i, j, 0));
        let y = tpinv(&x);
        let xyx = tprod(&tprod(&x, &y).unwrap(), &x).unwrap();
        let yxy = tprod(&tprod(&y, &x).unwrap(), &y).unwrap();
        let xy = tprod(&x, &y).unwrap();
        let yx = tprod(&y, &x).unwrap();
        assert!(xyx.rel_diff(&x) < 1e-8);
        assert!(yxy.rel_diff(&y) < 1e-8);
        assert!(ttranspose(&xy).rel_diff(&xy) < 1e-8);
        assert!(ttranspose(&yx).rel_diff(&yx) < 1e-8);
    }

    #[test]
    fn spd_predicate() {
        assert!(is_t_spd(&TubalMatrix::identity(3, 4), 1e-12).unwrap());
        let a = TubalMatrix::random_normal(5, 3, 4, &mut rng(10));
        let g = t_gram(&a).unwrap().add(&TubalMatrix::identity(3, 4).scale(1e-6)).unwrap();
        assert!(is_t_spd(&g, 1e-9).unwrap());
        let neg = TubalMatrix::identity(3, 4).scale(-1.0);
        assert!(!is_t_spd(&neg, 1e-12).unwrap());
        assert!(is_t_spd(&TubalMatrix::zeros(2, 3, 2), 1e-12).is_err());
    }

    #[test]
    fn square_roots() {
        let i = TubalMatrix::identity(3, 2);
        assert!(t_sqrt(&i).unwrap().rel_diff(&i) < 1e-12);
        let mut d = TubalMatrix::zeros(2, 2, 3);
        d.set(0, 0, 0, 4.0);
        d.set(1, 1, 0, 9.0);
        let r = t_sqrt(&d).unwrap();
        assert!((r.get(0, 0, 0) - 2.0).abs() < 1e-12);
        assert!((r.get(1, 1, 0) - 3.0).abs() < 1e-12);
        assert!(r.get(0, 0, 1).abs() < 1e-12);
        let a = TubalMatrix::random_normal(6, 4, 5, &mut rng(11));
        let g = t_gram(&a).unwrap();
        let s = t_sqrt(&g).unwrap();
        assert!(tprod(&s, &s).unwrap().rel_diff(&g) < 1e-8);
        assert!(t_sqrt(&TubalMatrix::identity(2, 2).scale(-1.0)).is_err());
    }

    #[test]
    fn weighted_norm_cases() {
        let mut r = rng(12);
        let m = TubalMatrix::random_normal(3, 2, 4, &mut r);
        let id = WeightQ::identity(3, 4);
        assert!((weighted_fnorm(&m, &id).unwrap() - m.fro_norm()).abs() < 1e-12);
        assert_eq!(weighted_fnorm(&TubalMatrix::zeros(3, 2, 4), &id).unwrap(), 0.0);

        let a = TubalMatrix::random_normal(5, 3, 4, &mut r);
        let qt = t_gram(&a).unwrap().add(&TubalMatrix::identity(3, 4).scale(1e-6)).unwrap();
        let q = WeightQ::new(qt.clone()).unwrap();
        let oracle = (sym_sqrt(&qt.bcirc()) * m.unfold()).norm();
        assert!((weighted_fnorm(&m, &q).unwrap() - oracle).abs() < 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn weighted_2norm_with_identity_is_bcirc_spectral_norm() {
        let m = TubalMatrix::random_normal(3, 3, 4, &mut rng(13));
        let direct = m.bcirc().singular_values().iter().copied().fold(0.0, f64::max);
        let v = weighted_2norm(&m, &WeightQ::identity(3, 4)).unwrap();
        assert!((v - direct).abs() < 1e-10 * direct);
    }
}
