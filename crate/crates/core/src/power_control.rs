//! Power control on the scalar interference channel.
//!
//! Two gain-ratio matrices drive everything here. The normalized gain matrix
//! `Z` has `Z[k][l] = |H_lk|^2 / |H_kk|^2` (unit diagonal) and gives the
//! max-min SINR value `1 / (rho(Z) - 1)`. The target-scaled matrix `A` has
//! `A[k][l] = gamma_k |H_lk|^2 / |H_kk|^2` off the diagonal and zeros on it;
//! SINR targets `gamma` are jointly feasible exactly when `rho(A) < 1`, and
//! the minimal powers meeting them solve `(I - A) p = b`, `b_k = gamma_k / |H_kk|^2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channels::{scalar_interference, sinr_scalar, ScalarChannel};
use crate::linalg::spectral_radius;
use crate::utilities::QosTargets;
use crate::{Error, Result, SolverTrace, Termination};

/// Iterates whose infinity norm exceeds this are reported as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

fn direct_gains(ch: &ScalarChannel) -> Result<Vec<f64>> {
    (0..ch.users())
        .map(|k| {
            let g = ch.power_gain(k, k);
            if g > 0.0 {
                Ok(g)
            } else {
                Err(Error::Degenerate(format!("direct gain of user {k} is zero")))
            }
        })
        .collect()
}

fn sinr_targets<'a>(ch: &ScalarChannel, targets: &'a QosTargets) -> Result<&'a [f64]> {
    let gamma = targets.sinr_targets()?;
    if gamma.len() != ch.users() {
        return Err(Error::Dimension(format!("{} SINR targets for {} users", gamma.len(), ch.users())));
    }
    Ok(gamma)
}

pub fn z_matrix(ch: &ScalarChannel) -> Result<DMatrix<f64>> {
    let direct = direct_gains(ch)?;
    Ok(DMatrix::from_fn(ch.users(), ch.users(), |k, l| ch.power_gain(l, k) / direct[k]))
}

pub fn a_matrix(ch: &ScalarChannel, targets: &QosTargets) -> Result<DMatrix<f64>> {
    let gamma = sinr_targets(ch, targets)?;
    let direct = direct_gains(ch)?;
    Ok(DMatrix::from_fn(ch.users(), ch.users(), |k, l| {
        if k == l {
            0.0
        } else {
            gamma[k] * ch.power_gain(l, k) / direct[k]
        }
    }))
}

/// Largest common SINR achievable without a power cap: `1 / (rho(Z) - 1)`.
///
/// This is a supremum. It is approached as powers grow without bound, where
/// noise becomes negligible, but never attained.
pub fn maxmin_sinr_optimum(ch: &ScalarChannel) -> Result<f64> {
    if ch.users() < 2 {
        return Err(Error::Dimension("max-min SINR needs at least two users".into()));
    }
    let rho = spectral_radius(&z_matrix(ch)?);
    if rho <= 1.0 + 1e-12 {
        return Err(Error::Degenerate(format!(
            "rho(Z) = {rho} leaves the common SINR unbounded (no coupling between users)"
        )));
    }
    Ok(1.0 / (rho - 1.0))
}

/// One step of autonomous power control: each user moves its SINR a fraction
/// `beta` of the way to `gamma_star`, holding the current interference fixed.
pub fn apc_step(ch: &ScalarChannel, p: &[f64], gamma_star: f64, beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("step size beta must be >= 0, got {beta}")));
    }
    let direct = direct_gains(ch)?;
    let sinr = sinr_scalar(ch, p)?;
    Ok((0..ch.users())
        .map(|k| {
            let den = scalar_interference(ch, p, k);
            (p[k] - beta * (sinr[k] - gamma_star) * den / direct[k]).max(0.0)
        })
        .collect())
}

/// Runs `steps` APC iterations from `p0`. The objective is the minimum SINR;
/// the residual is `max_k |SINR_k - gamma*|`.
pub fn apc_run(ch: &ScalarChannel, p0: &[f64], beta: f64, steps: usize) -> Result<SolverTrace<Vec<f64>>> {
    if beta <= 0.0 {
        return Err(Error::Parameter(format!("step size beta must be > 0, got {beta}")));
    }
    let gamma_star = maxmin_sinr_optimum(ch)?;
    let summary = |p: &[f64]| -> Result<(f64, f64)> {
        let s = sinr_scalar(ch, p)?;
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let err = s.iter().map(|v| (v - gamma_star).abs()).fold(0.0, f64::max);
        Ok((min, err))
    };
    let (obj, err) = summary(p0)?;
    let mut trace = SolverTrace::new(obj, p0.to_vec());
    trace.residual_history.push(err);
    let mut p = p0.to_vec();
    for _ in 0..steps {
        p = apc_step(ch, &p, gamma_star, beta)?;
        let (obj, err) = summary(&p)?;
        trace.push(obj);
        trace.residual_history.push(err);
    }
    Ok(trace.finish(p, Termination::MaxIterations))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub rho: f64,
}

pub fn minpower_feasible(ch: &ScalarChannel, targets: &QosTargets) -> Result<Feasibility> {
    let rho = spectral_radius(&a_matrix(ch, targets)?);
    Ok(Feasibility { feasible: rho < 1.0, rho })
}

fn target_offsets(ch: &ScalarChannel, targets: &QosTargets) -> Result<DVector<f64>> {
    let gamma = sinr_targets(ch, targets)?;
    let direct = direct_gains(ch)?;
    Ok(DVector::from_fn(ch.users(), |k, _| gamma[k] / direct[k]))
}

/// Minimal powers meeting the SINR targets with equality, from the linear
/// system `(I - A) p = b`.
pub fn minpower_closed_form(ch: &ScalarChannel, targets: &QosTargets) -> Result<Vec<f64>> {
    let a = a_matrix(ch, targets)?;
    let rho = spectral_radius(&a);
    if rho >= 1.0 {
        return Err(Error::Infeasible { rho });
    }
    let b = target_offsets(ch, targets)?;
    let k = ch.users();
    let system = DMatrix::<f64>::identity(k, k) - a;
    let p = system
        .lu()
        .solve(&b)
        .ok_or(Error::Infeasible { rho })?;
    // (I - A)^-1 is entrywise nonnegative when rho(A) < 1; clip roundoff.
    Ok(p.iter().map(|v| v.max(0.0)).collect())
}

/// Standard interference-function iteration
/// `p_k <- gamma_k (1 + sum_{l != k} |H_lk|^2 p_l) / |H_kk|^2`.
///
/// The objective history holds the total power. When the targets are
/// feasible the residual history holds the infinity-norm distance of every
/// iterate to the closed-form limit; otherwise it holds the step length.
/// Converges once a step moves no coordinate by more than `tol`.
pub fn yates_fixed_point(
    ch: &ScalarChannel,
    targets: &QosTargets,
    p0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolverTrace<Vec<f64>>> {
    if p0.len() != ch.users() {
        return Err(Error::Dimension(format!("{} initial powers for {} users", p0.len(), ch.users())));
    }
    let a = a_matrix(ch, targets)?;
    let b = target_offsets(ch, targets)?;
    let limit = minpower_closed_form(ch, targets).ok().map(DVector::from_vec);
    let distance = |p: &DVector<f64>, step: f64| match &limit {
        Some(l) => (p - l).amax(),
        None => step,
    };

    let mut p = DVector::from_column_slice(p0);
    let mut trace = SolverTrace::new(p.sum(), p0.to_vec());
    trace.residual_history.push(distance(&p, f64::NAN));
    for _ in 0..max_iter {
        let next = &a * &p + &b;
        let step = (&next - &p).amax();
        p = next;
        trace.push(p.sum());
        trace.residual_history.push(distance(&p, step));
        if !p.iter().all(|v| v.is_finite()) || p.amax() > DIVERGENCE_THRESHOLD {
            return Ok(trace.finish(p.as_slice().to_vec(), Termination::Diverged));
        }
        if step <= tol {
            return Ok(trace.finish(p.as_slice().to_vec(), Termination::Converged));
        }
    }
    Ok(trace.finish(p.as_slice().to_vec(), Termination::MaxIterations))
}

/// Asymptotic linear rate `lim e_{t+1} / e_t` read off a sequence of
/// distances to the limit. Ratios are taken only while the distance is well
/// above roundoff (`1e-9` of the first distance); returns the last such ratio.
pub fn contraction_rate(distances: &[f64]) -> Option<f64> {
    let first = *distances.first()?;
    if !(first > 0.0) {
        return None;
    }
    distances
        .windows(2)
        .take_while(|w| w[1] > 1e-9 * first)
        .map(|w| w[1] / w[0])
        .last()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn targets(g: &[f64]) -> QosTargets {
        QosTargets::sinr(g.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_optimum() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        assert_relative_eq!(maxmin_sinr_optimum(&ch).unwrap(), 2.0, max_relative = 1e-10);
        let ch = ScalarChannel::symmetric(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(maxmin_sinr_optimum(&ch).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn uncoupled_optimum_is_degenerate() {
        let ch = ScalarChannel::symmetric(2, 0.0, 1.0).unwrap();
        assert!(matches!(maxmin_sinr_optimum(&ch), Err(Error::Degenerate(_))));
        let ch = ScalarChannel::symmetric(1, 0.0, 1.0).unwrap();
        assert!(maxmin_sinr_optimum(&ch).is_err());
    }

    #[test]
    fn apc_fixed_points() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        let p = [0.7, 1.9];
        assert_eq!(apc_step(&ch, &p, 2.0, 0.0).unwrap(), p.to_vec());
        // SINR equal to the target on both users leaves p unchanged.
        let sinr = sinr_scalar(&ch, &[1.0, 1.0]).unwrap();
        let next = apc_step(&ch, &[1.0, 1.0], sinr[0], 0.3).unwrap();
        assert_relative_eq!(next[0], 1.0, epsilon = 1e-15);
        assert!(apc_step(&ch, &p, 2.0, -0.1).is_err());
    }

    #[test]
    fn apc_error_decreases() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        let trace = apc_run(&ch, &[1.0, 1.0], 0.1, 500).unwrap();
        for w in trace.residual_history.windows(2) {
            assert!(w[1] < w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn closed_form_examples() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        let p = minpower_closed_form(&ch, &targets(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(p[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 2.0, epsilon = 1e-12);
        for s in sinr_scalar(&ch, &p).unwrap() {
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
        assert_eq!(minpower_closed_form(&ch, &targets(&[0.0, 0.0])).unwrap(), vec![0.0, 0.0]);

        let free = ScalarChannel::from_power_gains(&[vec![4.0, 0.0], vec![0.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let p = minpower_closed_form(&free, &targets(&[2.0, 3.0])).unwrap();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn infeasible_targets_carry_rho() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        let t = targets(&[2.4, 2.4]);
        let f = minpower_feasible(&ch, &t).unwrap();
        assert!(!f.feasible);
        assert_relative_eq!(f.rho, 1.2, max_relative = 1e-10);
        match minpower_closed_form(&ch, &t) {
            Err(Error::Infeasible { rho }) => assert_relative_eq!(rho, 1.2, max_relative = 1e-10),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let trace = yates_fixed_point(&ch, &t, &[0.0, 0.0], 1e-12, 10_000).unwrap();
        assert_eq!(trace.termination, Termination::Diverged);
    }

    #[test]
    fn yates_examples() {
        let ch = ScalarChannel::symmetric(2, 0.5, 1.0).unwrap();
        let t = targets(&[1.0, 1.0]);
        let trace = yates_fixed_point(&ch, &t, &[0.0, 0.0], 1e-12, 10_000).unwrap();
        assert!(trace.converged);
        assert!((trace.final_state[0] - 2.0).abs() < 1e-8);
        let c = contraction_rate(&trace.residual_history).unwrap();
        assert_relative_eq!(c, 0.5, epsilon = 1e-6);

        let p = minpower_closed_form(&ch, &t).unwrap();
        let trace = yates_fixed_point(&ch, &t, &p, 1e-12, 10_000).unwrap();
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
    }

    #[test]
    fn grid_maxmin_matches_optimum() {
        // Without noise the common SIR is scale invariant; search p = (cos t, sin t).
        for seed in 0..10 {
            let ch = ScalarChannel::random(2, seed).unwrap();
            let g = |l: usize, k: usize| ch.power_gain(l, k);
            let best = (1..100_000)
                .map(|i| {
                    let t = i as f64 / 100_000.0 * std::f64::consts::FRAC_PI_2;
                    let (p1, p2) = (t.cos(), t.sin());
                    (g(0, 0) * p1 / (g(1, 0) * p2)).min(g(1, 1) * p2 / (g(0, 1) * p1))
                })
                .fold(0.0, f64::max);
            let star = maxmin_sinr_optimum(&ch).unwrap();
            assert!((best - star).abs() <= 1e-3 * star, "{best} vs {star}");
            assert!(best <= star * (1.0 + 1e-12));
        }
    }
}
