//! Rate constants, bound verification and flop counts.

pub mod bounds;
pub mod flops;
pub mod rates;

pub use bounds::{error_curve, verify_bounds, BoundCheck, MarginRow, DEFAULT_SLACK, FLOOR, MIN_ENSEMBLE};
pub use flops::flops_per_iteration;
pub use rates::{
    closed_form_rates, estimate_delta_inf, expected_projector, expected_rank, per_slice_rates, projector_members,
    rate_report, BoundKind, ClosedFormRates, DeltaInfEstimate, ExpectedProjector, RateReport, SliceRates,
};

/// Spectral weighted norm, re-exported here since only the analysis side uses it.
pub use crate::algebra::weighted_2norm;
