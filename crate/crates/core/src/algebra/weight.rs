use super::dense::{self, CMat};
use super::fourier::dft3;
use super::ops::require_t_spd;
use super::tubal::TubalMatrix;
use crate::error::Result;

/// T-SPD weight tensor Q with its per-slice Fourier factors cached.
#[derive(Clone, Debug)]
pub struct WeightQ {
    base: TubalMatrix,
    identity: bool,
    fourier: Vec<CMat>,
    fourier_inverse: Vec<CMat>,
    fourier_inv_sqrt: Vec<CMat>,
    fourier_sqrt: Vec<CMat>,
}

impl WeightQ {
    pub fn new(base: TubalMatrix) -> Result<Self> {
        require_t_spd(&base)?;
        let f = dft3(&base);
        let fourier: Vec<CMat> = f.slices().iter().map(dense::hermitian_part).collect();
        let fourier_inverse = fourier.iter().map(|s| dense::herm_apply(s, |x| 1.0 / x)).collect();
        let fourier_inv_sqrt = fourier.iter().map(|s| dense::herm_apply(s, |x| 1.0 / x.sqrt())).collect();
        let fourier_sqrt = fourier.iter().map(dense::herm_sqrt).collect();
        let identity = base == TubalMatrix::identity(base.rows(), base.depth());
        Ok(Self { base, identity, fourier, fourier_inverse, fourier_inv_sqrt, fourier_sqrt })
    }

    pub fn identity(n: usize, depth: usize) -> Self {
        Self::new(TubalMatrix::identity(n, depth)).expect("identity is T-SPD")
    }

    pub fn base(&self) -> &TubalMatrix {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.rows()
    }

    pub fn depth(&self) -> usize {
        self.base.depth()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Q̂_(k)
    pub fn fourier(&self, k: usize) -> &CMat {
        &self.fourier[k]
    }

    /// Q̂_(k)^{-1}
    pub fn fourier_inverse(&self, k: usize) -> &CMat {
        &self.fourier_inverse[k]
    }

    /// Q̂_(k)^{-1/2}
    pub fn fourier_inv_sqrt(&self, k: usize) -> &CMat {
        &self.fourier_inv_sqrt[k]
    }

    /// Q̂_(k)^{1/2}
    pub fn fourier_sqrt(&self, k: usize) -> &CMat {
        &self.fourier_sqrt[k]
    }
}
