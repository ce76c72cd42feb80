//! Per-iteration flop counts of the cached implementations.

use crate::error::{Result, TspError};
use crate::solver::Method;

/// Flops per iteration for sketch size τ, q sketches, A of width n and depth l, B of width p.
///
/// Entries given only as an order of growth evaluate their argument
/// (τpln for NTSP-II, max(q,n)pl for ATSP-MD-II with τ = 1).
pub fn flops_per_iteration(method: Method, tau: u64, q: u64, n: u64, p: u64, l: u64) -> Result<u64> {
    if [tau, q, n, p, l].contains(&0) {
        return Err(TspError::InvalidConfig("flop counts need positive sizes".into()));
    }
    let one = tau == 1;
    let flat = l == 1;
    let t2 = tau * tau;
    Ok(match method {
        Method::Ntsp => 2 * tau * p * l * n.min(tau * q) + 2 * tau * n * p * l,
        Method::AtspMd => match (one, flat) {
            (false, false) => (2 * t2 * p * l + 2 * tau * p * l + 1) * q + 2 * tau * n * p * l,
            (false, true) => (2 * t2 * p + 2 * tau * p) * q + 2 * tau * n * p,
            (true, false) => 4 * p * l * q + 2 * n * p * l,
            (true, true) => (4 * p - 1) * q + 2 * n * p,
        },
        Method::AtspPr => match (one, flat) {
            (false, false) => (2 * t2 * p * l + 2 * tau * p * l + 2) * q + 2 * tau * n * p * l,
            (false, true) => (2 * t2 * p + 2 * tau * p + 1) * q + 2 * tau * n * p,
            (true, false) => (4 * p * l + 2) * q + 2 * n * p * l,
            (true, true) => (4 * p + 1) * q + 2 * n * p,
        },
        Method::AtspCs => match (one, flat) {
            (false, false) => (2 * t2 * p * l + 2 * tau * p * l + 6) * q + 2 * tau * n * p * l,
            (false, true) => (2 * t2 * p + 2 * tau * p + 5) * q + 2 * tau * n * p,
            (true, false) => (4 * p * l + 6) * q + 2 * n * p * l,
            (true, true) => (4 * p + 5) * q + 2 * n * p,
        },
        Method::NtspII => tau * p * l * n,
        Method::AtspMdII if one => q.max(n) * p * l,
        Method::AtspMdII => (2 * t2 * p + 2 * tau * p) * q * l + 2 * tau * n * p * l,
        Method::AtspPrII if one => (4 * p + 1) * q * l + 2 * n * p * l,
        Method::AtspPrII => (2 * t2 * p + 2 * tau * p + 1) * q * l + 2 * tau * n * p * l,
        Method::AtspCsII if one => (4 * p + 5) * q * l + 2 * n * p * l,
        Method::AtspCsII => (2 * t2 * p + 2 * tau * p + 5) * q * l + 2 * tau * n * p * l,
        Method::Tsp | Method::TspI | Method::TspII => {
            return Err(TspError::UnknownMethod(format!("no tabulated flop count for {method}")));
        }
    })
}
