//! Deblurring operator built from a Gaussian point-spread function.
//!
//! Images and kernel are zero-padded to N = s + size − 1. Frontal slice k of A
//! is the circulant matrix whose first column is column k of the padded kernel
//! H, and image j is stored as X(i, j, k) = X_j(k, i). With this layout the
//! t-product A∗X applies the 2-D circular convolution with Hᵀ to every image
//! (with H itself for symmetric kernels).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::problem::{GeneratedProblem, KernelSpec, ProblemSpec};
use crate::algebra::{tprod, TubalMatrix};
use crate::error::{Result, TspError};

/// size×size Gaussian kernel with standard deviation σ, normalized to unit sum.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<DMatrix<f64>> {
    if size == 0 || !(sigma > 0.0) {
        return Err(TspError::InvalidConfig(format!("kernel needs size >= 1 and sigma > 0, got {size}, {sigma}")));
    }
    let c = (size as f64 - 1.0) / 2.0;
    let k = DMatrix::from_fn(size, size, |i, j| {
        let (di, dj) = (i as f64 - c, j as f64 - c);
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let s = k.sum();
    Ok(k / s)
}

/// Places `small` in the top-left corner of an n×n zero matrix.
pub fn zero_pad(small: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if small.nrows() > n || small.ncols() > n {
        return Err(TspError::InvalidConfig(format!(
            "{}x{} block does not fit in {n}x{n}",
            small.nrows(),
            small.ncols()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), small.shape()).copy_from(small);
    Ok(out)
}

/// A with A_(k) = circ(H(:, k)) for a square padded kernel H.
pub fn blur_operator(h: &DMatrix<f64>) -> Result<TubalMatrix> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(TspError::DimensionMismatch("padded kernel must be square".into()));
    }
    Ok(TubalMatrix::from_fn(n, n, n, |i, j, k| h[((i + n - j) % n, k)]))
}

/// Stacks square images as X(i, j, k) = X_j(k, i).
pub fn images_to_tensor(images: &[DMatrix<f64>]) -> Result<TubalMatrix> {
    let n = images.first().map_or(0, DMatrix::nrows);
    if n == 0 || images.iter().any(|im| im.shape() != (n, n)) {
        return Err(TspError::DimensionMismatch("images must be nonempty and share a square shape".into()));
    }
    Ok(TubalMatrix::from_fn(n, images.len(), n, |i, j, k| images[j][(k, i)]))
}

/// Inverse of [`images_to_tensor`].
pub fn tensor_to_images(x: &TubalMatrix) -> Vec<DMatrix<f64>> {
    let n = x.rows();
    (0..x.cols()).map(|j| DMatrix::from_fn(n, n, |r, c| x.get(c, j, r))).collect()
}

/// Direct 2-D circular convolution (the oracle for the operator).
pub fn circular_convolve(image: &DMatrix<f64>, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = image.shape();
    DMatrix::from_fn(r, c, |i, j| {
        let mut acc = 0.0;
        for a in 0..kernel.nrows() {
            for b in 0..kernel.ncols() {
                acc += kernel[(a, b)] * image[((i + r - a % r) % r, (j + c - b % c) % c)];
            }
        }
        acc
    })
}

/// Smooth random image: circularly low-pass filtered white noise scaled to [0, 1].
pub fn smooth_image<R: Rng + ?Sized>(side: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let noise = DMatrix::from_fn(side, side, |_, _| rng.sample::<f64, _>(StandardNormal));
    let radius = (side / 8).max(1);
    let filter = gaussian_kernel(2 * radius + 1, radius as f64)?;
    let smooth = circular_convolve(&noise, &filter);
    let (lo, hi) = (smooth.min(), smooth.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(smooth.map(|v| (v - lo) / span))
}

/// Blurred synthetic images: A from the Gaussian kernel, X★ from `spec.p` smooth images, B = A∗X★.
pub fn gen_deblur<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Result<GeneratedProblem> {
    let kernel = spec.kernel.clone().unwrap_or_default();
    gen_deblur_with(spec.m, spec.p, &gaussian_kernel(kernel.size, kernel.sigma)?, rng)
}

/// As [`gen_deblur`] with an explicit (unpadded) kernel.
pub fn gen_deblur_with<R: Rng + ?Sized>(
    side: usize,
    images: usize,
    kernel: &DMatrix<f64>,
    rng: &mut R,
) -> Result<GeneratedProblem> {
    if side == 0 || images == 0 {
        return Err(TspError::InvalidConfig("deblur needs a positive image side and image count".into()));
    }
    if kernel.nrows() != kernel.ncols() {
        return Err(TspError::InvalidConfig("kernel must be square".into()));
    }
    let n = side + kernel.nrows() - 1;
    if kernel.nrows() > n {
        return Err(TspError::InvalidConfig(format!("kernel of size {} exceeds padded image {n}", kernel.nrows())));
    }
    let a = blur_operator(&zero_pad(kernel, n)?)?;
    let ims = (0..images).map(|_| zero_pad(&smooth_image(side, rng)?, n)).collect::<Result<Vec<_>>>()?;
    let x = images_to_tensor(&ims)?;
    let b = tprod(&a, &x)?;
    Ok(GeneratedProblem { a, x, b })
}

impl KernelSpec {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        gaussian_kernel(self.size, self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(5, 2.0).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-15);
        assert!((&k - k.transpose()).norm() < 1e-15);
        assert!(k[(2, 2)] > k[(0, 0)]);
    }

    #[test]
    fn delta_kernel_shifts_images() {
        let mut delta = DMatrix::zeros(3, 3);
        delta[(1, 1)] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gen_deblur_with(6, 2, &delta, &mut rng).unwrap();
        let ims = tensor_to_images(&g.x);
        let blurred = tensor_to_images(&g.b);
        let n = ims[0].nrows();
        for (x, b) in ims.iter().zip(&blurred) {
            for i in 0..n {
                for j in 0..n {
                    assert!((b[((i + 1) % n, (j + 1) % n)] - x[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn layout_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ims: Vec<_> = (0..3).map(|_| smooth_image(5, &mut rng).unwrap()).collect();
        assert_eq!(tensor_to_images(&images_to_tensor(&ims).unwrap()), ims);
        assert!(ims.iter().all(|im| im.min() >= 0.0 && im.max() <= 1.0));
    }
}
