use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{check_weights, Armijo, StopRule};
use crate::channels::{sinr_parallel, weighted_sum_rate_parallel, ParallelChannel, PowerMatrix};
use crate::{Error, Result, SolverTrace, Termination};

/// SINRs below this are lifted before the bound is formed, so that dead
/// tones get a flat (near zero slope) bound instead of `alpha = 0, beta = -inf`.
const SINR_FLOOR: f64 = 1e-12;
/// Log-power floor relative to the budget: `x >= log2(budget) - LOG_POWER_SPAN`.
const LOG_POWER_SPAN: f64 = 50.0;

/// Coefficients `(alpha, beta)` of the lower bound
/// `alpha log2 z + beta <= log2(1 + z)`, tight at `z = z0`.
pub fn scale_bound(z0: f64) -> (f64, f64) {
    let z = z0.max(SINR_FLOOR);
    let alpha = z / (1.0 + z);
    (alpha, z.ln_1p() / LN_2 - alpha * z.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    pub stop: StopRule,
    /// Projected-gradient steps per bound maximization.
    pub grad_steps: usize,
    /// First trial step of the backtracking search; later steps start from
    /// twice the last accepted one.
    pub step_size: f64,
    pub armijo: Armijo,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self { stop: StopRule::default(), grad_steps: 50, step_size: 1.0, armijo: Armijo::default() }
    }
}

/// Log-power surrogate for fixed `alpha`:
/// `sum_k mu_k sum_n alpha_kn (x_kn - log2(1 + sum_{l != k} g^n_lk 2^x_ln))`,
/// which differs from the bound only by constants and is concave in `x`.
struct Surrogate<'a> {
    ch: &'a ParallelChannel,
    /// `mu_k * alpha_kn`, user-major.
    coeff: Vec<f64>,
}

impl Surrogate<'_> {
    fn interference(&self, x: &[f64], n: usize, k: usize) -> f64 {
        let (kk, nn) = (self.ch.users(), self.ch.tones());
        let mut acc = 1.0;
        for l in (0..kk).filter(|&l| l != k) {
            acc += self.ch.power_gain(n, l, k) * x[l * nn + n].exp2();
        }
        acc
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (kk, nn) = (self.ch.users(), self.ch.tones());
        let mut total = 0.0;
        for k in 0..kk {
            for n in 0..nn {
                let c = self.coeff[k * nn + n];
                total += c * (x[k * nn + n] - self.interference(x, n, k).log2());
            }
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (kk, nn) = (self.ch.users(), self.ch.tones());
        let mut grad = self.coeff.clone();
        let mut share = vec![0.0; kk];
        for n in 0..nn {
            for (k, s) in share.iter_mut().enumerate() {
                *s = self.coeff[k * nn + n] / self.interference(x, n, k);
            }
            for j in 0..kk {
                let pj = x[j * nn + n].exp2();
                let mut loss = 0.0;
                for k in (0..kk).filter(|&k| k != j) {
                    loss += share[k] * self.ch.power_gain(n, j, k);
                }
                grad[j * nn + n] -= loss * pj;
            }
        }
        grad
    }
}

/// Euclidean projection of `y` onto `{x >= floor, sum_n 2^x_n <= budget}`.
///
/// Active coordinates satisfy `x + nu ln2 2^x = y`, i.e.
/// `x = y - W(nu (ln 2)^2 2^y) / ln 2` with `W` the principal Lambert function.
/// The multiplier is found by safeguarded Newton steps on `ln nu`; the
/// returned point is always feasible.
fn project_log_budget(y: &[f64], floor: f64, budget: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> {
        y.iter()
            .map(|&v| {
                let z = nu * LN_2 * LN_2 * v.exp2();
                (v - lambert_w::lambert_w0(z) / LN_2).max(floor)
            })
            .collect()
    };
    let total = |x: &[f64]| x.iter().map(|v| v.exp2()).sum::<f64>();
    let clamped: Vec<f64> = y.iter().map(|&v| v.max(floor)).collect();
    if total(&clamped) <= budget {
        return clamped;
    }
    // phi(t) = ln(total(e^t)) - ln(budget) is decreasing in t = ln nu.
    let phi = |t: f64| -> (f64, f64, Vec<f64>) {
        let nu = t.exp();
        let x = at(nu);
        let sum = total(&x);
        let mut slope = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            if *xi > floor {
                let w = lambert_w::lambert_w0(nu * LN_2 * LN_2 * yi.exp2());
                slope -= xi.exp2() * w / (1.0 + w);
            }
        }
        (sum.ln() - budget.ln(), slope / sum, x)
    };
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut feasible: Option<Vec<f64>> = None;
    let mut t = 0.0;
    for _ in 0..200 {
        let (f, df, x) = phi(t);
        if f <= 0.0 {
            hi = t;
            let done = f > -1e-13;
            feasible = Some(x);
            if done {
                break;
            }
        } else {
            lo = t;
        }
        let mut next = if df < 0.0 { t - f / df } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 2.0 * (1.0 + lo.abs()),
                (false, true) => hi - 2.0 * (1.0 + hi.abs()),
                (false, false) => unreachable!("t is always recorded on one side"),
            };
        }
        if lo.is_finite() && hi.is_finite() && hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
        t = next;
    }
    feasible.unwrap_or_else(|| at(hi.exp()))
}

/// Successive convex approximation with log lower bounds.
///
/// Each outer iteration fixes `(alpha, beta)` from the current per-tone SINRs
/// (the bound is tight there), then ascends the concave log-power surrogate
/// with backtracking projected-gradient steps. Since the bound is tight at
/// the start of the inner loop and below the true rate everywhere, the
/// weighted sum rate never decreases. Stops when an outer iteration gains no
/// more than `stop.epsilon`. Starts from equal power `budget / N`.
pub fn scale_solve(ch: &ParallelChannel, weights: &[f64], opts: &ScaleOptions) -> Result<SolverTrace<PowerMatrix>> {
    check_weights(weights, ch.users())?;
    if !(opts.step_size > 0.0) {
        return Err(Error::Parameter("step size must be > 0".into()));
    }
    let (kk, nn) = (ch.users(), ch.tones());
    let floors: Vec<f64> = ch.budgets().iter().map(|b| b.log2() - LOG_POWER_SPAN).collect();
    let mut x: Vec<f64> = (0..kk)
        .flat_map(|k| std::iter::repeat_n((ch.budgets()[k] / nn as f64).log2(), nn))
        .collect();
    let powers = |x: &[f64]| {
        PowerMatrix::from_rows((0..kk).map(|k| x[k * nn..(k + 1) * nn].iter().map(|v| v.exp2()).collect()).collect())
    };

    let mut p = powers(&x)?;
    let mut objective = weighted_sum_rate_parallel(ch, &p, weights)?;
    let mut trace = SolverTrace::new(objective, p.clone());
    let mut step = opts.step_size;
    for _ in 0..opts.stop.max_iter {
        let sinr = sinr_parallel(ch, &p)?;
        let coeff: Vec<f64> = (0..kk)
            .flat_map(|k| sinr[k].iter().map(move |&z| weights[k] * scale_bound(z).0).collect::<Vec<_>>())
            .collect();
        let surrogate = Surrogate { ch, coeff };

        let mut value = surrogate.value(&x);
        for _ in 0..opts.grad_steps {
            let grad = surrogate.gradient(&x);
            let mut accepted = None;
            let mut s = step;
            while s > 1e-20 {
                let mut cand = Vec::with_capacity(x.len());
                for k in 0..kk {
                    let y: Vec<f64> = (0..nn).map(|n| x[k * nn + n] + s * grad[k * nn + n]).collect();
                    cand.extend(project_log_budget(&y, floors[k], ch.budgets()[k]));
                }
                let ascent: f64 = cand.iter().zip(&x).zip(&grad).map(|((c, xi), g)| g * (c - xi)).sum();
                let cand_value = surrogate.value(&cand);
                if cand_value >= value + opts.armijo.c * ascent {
                    accepted = Some((cand, cand_value));
                    break;
                }
                s *= opts.armijo.shrink;
            }
            let Some((cand, cand_value)) = accepted else { break };
            let moved = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = cand;
            value = cand_value;
            step = (2.0 * s).min(1e6);
            if moved < 1e-10 {
                break;
            }
        }

        let candidate = powers(&x)?;
        let next = weighted_sum_rate_parallel(ch, &candidate, weights)?;
        if next < objective {
            // Only roundoff can make the bound argument fail; keep the old point.
            trace.push(objective);
            trace.residual_history.push(0.0);
            return Ok(trace.finish(p, Termination::Converged));
        }
        trace.residual_history.push(candidate.max_abs_diff(&p));
        p = candidate;
        trace.push(next);
        let gain = next - objective;
        objective = next;
        if gain <= opts.stop.epsilon {
            return Ok(trace.finish(p, Termination::Converged));
        }
    }
    Ok(trace.finish(p, Termination::MaxIterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utilities::numeric_gradient;
    use approx::assert_relative_eq;

    #[test]
    fn bound_is_tight_at_anchor() {
        let (a, b) = scale_bound(1.0);
        assert_relative_eq!(a, 0.5);
        assert_relative_eq!(b, 1.0);
        for &z0 in &[0.1, 1.0, 10.0, 1e-6, 1e4] {
            let (a, b) = scale_bound(z0);
            assert_relative_eq!(a * z0.log2() + b, (1.0 + z0).log2(), max_relative = 1e-12);
        }
    }

    #[test]
    fn bound_is_below_log() {
        for &z0 in &[0.1, 1.0, 10.0] {
            let (a, b) = scale_bound(z0);
            for i in 0..=600 {
                let z = 10f64.powf(-3.0 + i as f64 * 0.01);
                assert!(a * z.log2() + b <= (1.0 + z).log2() + 1e-12, "z0 {z0} z {z}");
            }
        }
    }

    #[test]
    fn surrogate_gradient_matches_differences() {
        let ch = ParallelChannel::random(3, 4, 2).unwrap();
        let coeff: Vec<f64> = (0..12).map(|i| 0.1 + 0.07 * i as f64).collect();
        let s = Surrogate { ch: &ch, coeff };
        let x: Vec<f64> = (0..12).map(|i| -1.0 + 0.3 * i as f64).collect();
        let num = numeric_gradient(|v| s.value(v), &x, None);
        for (a, n) in s.gradient(&x).iter().zip(&num) {
            assert!((a - n).abs() < 1e-7 * a.abs().max(1.0), "{a} vs {n}");
        }
    }

    #[test]
    fn projection_is_feasible_and_optimal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..6.0)).collect();
            let budget = rng.random_range(0.5..50.0);
            let floor = f64::log2(budget) - 50.0;
            let x = project_log_budget(&y, floor, budget);
            let total: f64 = x.iter().map(|v| v.exp2()).sum();
            assert!(total <= budget * (1.0 + 1e-12));
            // Nearby feasible points are no closer to y.
            let d0: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            for _ in 0..50 {
                let mut z: Vec<f64> = x.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
                let t: f64 = z.iter().map(|v| v.exp2()).sum();
                if t > budget {
                    let shift = (budget / t).log2();
                    z.iter_mut().for_each(|v| *v += shift);
                }
                let d: f64 = z.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                assert!(d >= d0 - 1e-9);
            }
        }
    }

    #[test]
    fn weighted_sum_rate_never_drops() {
        for seed in 0..30 {
            let ch = ParallelChannel::random(3, 4, seed).unwrap().with_uniform_budget(10.0).unwrap();
            let opts = ScaleOptions { stop: StopRule { epsilon: 1e-6, max_iter: 100 }, ..Default::default() };
            let t = scale_solve(&ch, &[1.0, 2.0, 0.5], &opts).unwrap();
            assert!(t.max_objective_drop() <= 1e-9);
            for k in 0..3 {
                assert!(t.final_state.user_total(k) <= 10.0 * (1.0 + 1e-8));
            }
        }
    }
}
