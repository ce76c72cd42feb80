//! Real tubal tensors and the t-product algebra.

pub mod dense;
pub mod fourier;
pub mod ops;
pub mod tubal;
pub mod weight;

pub use fourier::{dft3, idft3, FourierSlices};
pub use ops::{
    is_t_spd, t_gram, t_sqrt, tpinv, tprod, tprod_oracle, ttranspose, weighted_2norm, weighted_fnorm,
};
pub use tubal::TubalMatrix;
pub use weight::WeightQ;
