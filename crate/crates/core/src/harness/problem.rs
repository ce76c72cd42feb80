use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{tprod, TubalMatrix};
use crate::error::{Result, TspError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Gaussian,
    Deblur,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub size: usize,
    pub sigma: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { size: 5, sigma: 2.0 }
    }
}

/// Problem description. For `deblur`, `m` is the image side, `p` the number of
/// images, and the padded side m + size − 1 becomes every dimension of A.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub m: usize,
    #[serde(default)]
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub l: usize,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn gaussian(m: usize, n: usize, p: usize, l: usize) -> Self {
        Self { kind: ProblemKind::Gaussian, m, n, p, l, kernel: None, seed: 0 }
    }

    pub fn deblur(image: usize, images: usize, kernel: KernelSpec) -> Self {
        Self { kind: ProblemKind::Deblur, m: image, n: 0, p: images, l: 0, kernel: Some(kernel), seed: 0 }
    }
}

/// A consistent system B = A∗X★.
#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub a: TubalMatrix,
    pub x: TubalMatrix,
    pub b: TubalMatrix,
}

/// A and X★ with i.i.d. standard normal entries, B = A∗X★.
pub fn gen_gaussian<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Result<GeneratedProblem> {
    let (m, n, p, l) = (spec.m, spec.n, spec.p, spec.l);
    if [m, n, p, l].contains(&0) {
        return Err(TspError::InvalidConfig(format!("gaussian problem needs positive sizes, got {m}x{n}x{p}x{l}")));
    }
    let a = TubalMatrix::random_normal(m, n, l, rng);
    let x = TubalMatrix::random_normal(n, p, l, rng);
    let b = tprod(&a, &x)?;
    Ok(GeneratedProblem { a, x, b })
}

pub fn generate<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Result<GeneratedProblem> {
    match spec.kind {
        ProblemKind::Gaussian => gen_gaussian(spec, rng),
        ProblemKind::Deblur => super::deblur::gen_deblur(spec, rng),
    }
}

/// ‖X − X★‖_F / ‖X★‖_F.
pub fn relative_error(x: &TubalMatrix, x_star: &TubalMatrix) -> Result<f64> {
    if x.dims() != x_star.dims() {
        return Err(TspError::DimensionMismatch("iterate and reference differ in shape".into()));
    }
    let denom = x_star.fro_norm();
    if denom == 0.0 {
        return Err(TspError::ZeroReference);
    }
    Ok(x.sub(x_star)?.fro_norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relative_error_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = TubalMatrix::random_normal(3, 2, 2, &mut rng);
        assert_eq!(relative_error(&x, &x).unwrap(), 0.0);
        assert!((relative_error(&TubalMatrix::zeros(3, 2, 2), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_error(&x.scale(2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_error(&x, &TubalMatrix::zeros(3, 2, 2)), Err(TspError::ZeroReference)));
    }

    #[test]
    fn gaussian_problems_are_consistent_and_reproducible() {
        let spec = ProblemSpec::gaussian(6, 4, 2, 3);
        let g1 = gen_gaussian(&spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let g2 = gen_gaussian(&spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(g1.a, g2.a);
        assert_eq!(g1.b, g2.b);
        let r = tprod(&g1.a, &g1.x).unwrap().sub(&g1.b).unwrap().fro_norm() / g1.b.fro_norm();
        assert!(r < 1e-12);
    }
}
