//! Weighted sum-utility maximization.
//!
//! Every solver returns a [`SolverTrace`](crate::SolverTrace) whose objective
//! history is the weighted sum rate `sum_k mu_k R_k` in bits (for CCA, the
//! configured utility), starting at the initial point.
//!
//! - [`mdp_solve`]: multichannel distributed pricing on the parallel channel;
//!   users update one at a time against linearized interference prices.
//! - [`scale_solve`]: successive log lower bounds, each maximized in log-power
//!   variables by projected gradient ascent.
//! - [`WmmseParallel`] / [`WmmseMimo`]: block coordinate descent on the
//!   weighted MSE reformulation, for the parallel and MIMO channels.
//! - [`cca_miso`]: cyclic gradient projection for smooth utilities on MISO.

mod cca;
mod mdp;
mod scale;
mod wmmse;

pub use cca::{cca_gradient, cca_miso, miso_mrt, Armijo, CcaOptions};
pub use mdp::{interference_prices, mdp_solve, priced_best_response};
pub use scale::{scale_bound, scale_solve, ScaleOptions};
pub use wmmse::{wmmse_mimo, wmmse_parallel, MimoInit, WmmseMimo, WmmseParallel};

use serde::{Deserialize, Serialize};

use crate::utilities::{UtilityKind, UtilitySpec};
use crate::{Error, Result};

/// Stopping rule shared by the sum-rate solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// MDP and SCALE stop once an iteration improves the objective by no more
    /// than `epsilon`; WMMSE once `|sum log det W - sum log det W'| <= epsilon`.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { epsilon: 0.01, max_iter: 500 }
    }
}

/// Whether the weighted-MSE reformulation applies: only (weighted) sum rate
/// is supported.
pub fn utility_admissible(spec: &UtilitySpec) -> bool {
    match spec.kind {
        UtilityKind::SumRate => true,
        UtilityKind::AlphaFair { alpha } => alpha == 0.0,
        _ => false,
    }
}

pub(crate) fn check_weights(weights: &[f64], users: usize) -> Result<()> {
    if weights.len() != users {
        return Err(Error::Dimension(format!("{} weights for {users} users", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Parameter("weights must be finite and > 0".into()));
    }
    Ok(())
}

/// Smallest `x >= 0` in a decreasing function's domain with `f(x) <= target`,
/// by bisection on `[0, hi]` where `f(hi) <= target` must already hold.
/// Returns the feasible end of the final bracket.
pub(crate) fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}
