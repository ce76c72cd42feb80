//! Transform along the third mode.
//!
//! Convention: the forward DFT is unnormalized, `X̂_(k) = Σ_j X_(j) ω^{jk}` with
//! `ω = e^{-2πi/l}`, and the inverse carries the `1/l` factor. Consequently
//! `‖X‖²_F = (1/l) Σ_k ‖X̂_(k)‖²_F`, and every Fourier-domain norm in this crate
//! carries that explicit `1/l`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::dense::{fro_norm_sq, CMat};
use super::tubal::TubalMatrix;
use crate::error::{Result, TspError};

/// Imaginary parts smaller than this fraction of the real part are rounding.
pub const REAL_RTOL: f64 = 1e-9;

/// Complex frontal slices of `fft(X, [], 3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSlices {
    rows: usize,
    cols: usize,
    slices: Vec<CMat>,
}

impl FourierSlices {
    pub fn zeros(rows: usize, cols: usize, depth: usize) -> Self {
        Self { rows, cols, slices: vec![CMat::zeros(rows, cols); depth] }
    }

    pub fn from_slices(slices: Vec<CMat>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| TspError::DimensionMismatch("no Fourier slices".into()))?;
        let (rows, cols) = first.shape();
        if slices.iter().any(|s| s.shape() != (rows, cols)) {
            return Err(TspError::DimensionMismatch("Fourier slices differ in shape".into()));
        }
        Ok(Self { rows, cols, slices })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn depth(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, k: usize) -> &CMat {
        &self.slices[k]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut CMat {
        &mut self.slices[k]
    }

    pub fn slices(&self) -> &[CMat] {
        &self.slices
    }

    pub fn slices_mut(&mut self) -> &mut [CMat] {
        &mut self.slices
    }

    pub fn into_slices(self) -> Vec<CMat> {
        self.slices
    }

    /// Index of the slice holding the conjugate partner of slice k for real data.
    pub fn conj_index(&self, k: usize) -> usize {
        let l = self.depth();
        (l - k) % l
    }

    /// `(1/l) Σ_k ‖slice_k‖²_F`, which is the squared Frobenius norm of the spatial tensor.
    pub fn spatial_norm_sq(&self) -> f64 {
        self.slices.iter().map(fro_norm_sq).sum::<f64>() / self.depth() as f64
    }

    /// Fourier slices of Re(ifft(self)): `(Y_k + conj Y_{l−k}) / 2`.
    pub fn real_part(&self) -> Self {
        let slices = (0..self.depth())
            .map(|k| (&self.slices[k] + self.slices[self.conj_index(k)].conjugate()).scale(0.5))
            .collect();
        Self { rows: self.rows, cols: self.cols, slices }
    }

    /// Fourier slices of Im(ifft(self)): `(Y_k − conj Y_{l−k}) / (2i)`.
    pub fn imag_part(&self) -> Self {
        let half_over_i = Complex64::new(0.0, -0.5);
        let slices = (0..self.depth())
            .map(|k| (&self.slices[k] - self.slices[self.conj_index(k)].conjugate()) * half_over_i)
            .collect();
        Self { rows: self.rows, cols: self.cols, slices }
    }

    /// Largest deviation from the conjugate symmetry that real tensors satisfy.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        (0..self.depth())
            .map(|k| (&self.slices[k] - self.slices[self.conj_index(k)].conjugate()).norm())
            .fold(0.0, f64::max)
    }
}

fn transform_tubes(slices: &mut [CMat], inverse: bool) {
    let l = slices.len();
    if l <= 1 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(l) } else { planner.plan_fft_forward(l) };
    let (rows, cols) = slices[0].shape();
    let tubes = rows * cols;
    let mut buf = vec![Complex64::new(0.0, 0.0); tubes * l];
    for t in 0..tubes {
        for k in 0..l {
            buf[t * l + k] = slices[k].as_slice()[t];
        }
    }
    fft.process(&mut buf);
    let s = if inverse { 1.0 / l as f64 } else { 1.0 };
    for t in 0..tubes {
        for k in 0..l {
            slices[k].as_mut_slice()[t] = buf[t * l + k] * s;
        }
    }
}

/// Forward transform along the third mode of a real tensor.
pub fn dft3(x: &TubalMatrix) -> FourierSlices {
    let mut slices: Vec<CMat> = (0..x.depth()).map(|k| super::dense::to_complex(&x.slice(k))).collect();
    transform_tubes(&mut slices, false);
    FourierSlices { rows: x.rows(), cols: x.cols(), slices }
}

/// Forward transform of a complex spatial slice stack.
pub fn dft3_complex(slices: &[CMat]) -> Result<FourierSlices> {
    let mut out = FourierSlices::from_slices(slices.to_vec())?;
    transform_tubes(&mut out.slices, false);
    Ok(out)
}

/// Inverse transform returning the complex spatial slices unchanged.
pub fn idft3_complex(f: &FourierSlices) -> Vec<CMat> {
    let mut slices = f.slices.clone();
    transform_tubes(&mut slices, true);
    slices
}

/// Inverse transform into real and imaginary spatial parts, without any check.
pub fn idft3_parts(f: &FourierSlices) -> (TubalMatrix, TubalMatrix) {
    let slices = idft3_complex(f);
    let (m, n, l) = (f.rows, f.cols, f.depth());
    let re = TubalMatrix::from_fn(m, n, l, |i, j, k| slices[k][(i, j)].re);
    let im = TubalMatrix::from_fn(m, n, l, |i, j, k| slices[k][(i, j)].im);
    (re, im)
}

/// Inverse transform of data that should be real.
///
/// Fails when the imaginary part exceeds `REAL_RTOL·‖Re‖ + 1e-12·scale`; `scale`
/// bounds the magnitude of the quantities the slices were computed from, so that
/// near-zero results of cancelling products are not misreported.
pub fn idft3_scaled(f: &FourierSlices, scale: f64) -> Result<TubalMatrix> {
    let (re, im) = idft3_parts(f);
    let (rn, inorm) = (re.fro_norm(), im.fro_norm());
    if inorm > REAL_RTOL * rn + 1e-12 * scale {
        return Err(TspError::ImaginaryResidue { ratio: if rn > 0.0 { inorm / rn } else { f64::INFINITY } });
    }
    Ok(re)
}

pub fn idft3(f: &FourierSlices) -> Result<TubalMatrix> {
    idft3_scaled(f, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn depth_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = TubalMatrix::random_normal(3, 2, 1, &mut rng);
        let f = dft3(&x);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(f.slice(0)[(i, j)], Complex64::new(x.get(i, j, 0), 0.0));
            }
        }
    }

    #[test]
    fn constant_tube_concentrates_in_first_slice() {
        let x = TubalMatrix::from_fn(1, 1, 4, |_, _, _| 2.5);
        let f = dft3(&x);
        assert!((f.slice(0)[(0, 0)] - Complex64::new(10.0, 0.0)).norm() < 1e-14);
        for k in 1..4 {
            assert!(f.slice(k)[(0, 0)].norm() < 1e-14);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = TubalMatrix::random_normal(3, 2, 4, &mut rng);
        let f = dft3(&x);
        let l = 4;
        for i in 0..3 {
            for j in 0..2 {
                for k in 0..l {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in 0..l {
                        let ang = -2.0 * PI * (k * t) as f64 / l as f64;
                        acc += Complex64::from_polar(1.0, ang) * x.get(i, j, t);
                    }
                    assert!((acc - f.slice(k)[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn round_trip_and_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = TubalMatrix::random_normal(4, 3, 7, &mut rng);
        let f = dft3(&x);
        assert!(f.conjugate_symmetry_defect() < 1e-12);
        assert!(idft3(&f).unwrap().rel_diff(&x) < 1e-12);
        assert!((f.spatial_norm_sq() - x.fro_norm().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn real_and_imag_parts_split_complex_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = TubalMatrix::random_normal(2, 2, 5, &mut rng);
        let b = TubalMatrix::random_normal(2, 2, 5, &mut rng);
        let (fa, fb) = (dft3(&a), dft3(&b));
        let slices: Vec<CMat> =
            (0..5).map(|k| fa.slice(k) + fb.slice(k) * Complex64::new(0.0, 1.0)).collect();
        let z = FourierSlices::from_slices(slices).unwrap();
        assert!(idft3(&z.real_part()).unwrap().rel_diff(&a) < 1e-12);
        assert!(idft3(&z.imag_part()).unwrap().rel_diff(&b) < 1e-12);
        assert!(idft3(&z).is_err());
    }
}
