use std::f64::consts::LN_2;

use super::{bisect_decreasing, check_weights, StopRule};
use crate::channels::{parallel_interference, weighted_sum_rate_parallel, ParallelChannel, PowerMatrix};
use crate::{Result, SolverTrace, Termination};

/// Interference prices `T[k][n]`: the marginal loss in the other users'
/// weighted rates (bits) per unit of power user `k` puts on tone `n`,
///
/// `T^n_k = sum_{l != k} mu_l (g_kl / (1 + sum_{j != l} g_jl p_j) - g_kl / (1 + sum_j g_jl p_j)) / ln 2`.
pub fn interference_prices(ch: &ParallelChannel, p: &PowerMatrix, weights: &[f64]) -> Vec<Vec<f64>> {
    (0..ch.users()).map(|k| prices_of(ch, p, weights, k)).collect()
}

fn prices_of(ch: &ParallelChannel, p: &PowerMatrix, weights: &[f64], k: usize) -> Vec<f64> {
    (0..ch.tones())
        .map(|n| {
            let mut price = 0.0;
            for l in (0..ch.users()).filter(|&l| l != k) {
                let g = ch.power_gain(n, k, l);
                if g == 0.0 {
                    continue;
                }
                let without = parallel_interference(ch, p, l, n);
                let with = without + ch.power_gain(n, l, l) * p.get(l, n);
                price += weights[l] * (g / without - g / with);
            }
            price / LN_2
        })
        .collect()
}

/// User `k`'s exact maximizer of `mu_k R_k - sum_n T_n p_n` under its budget.
///
/// Per tone the stationarity condition `mu_k g_n / ((npi_n + g_n p_n) ln 2) = lambda + T_n`
/// gives `p_n = [mu_k / ((lambda + T_n) ln 2) - npi_n / g_n]^+`; `lambda = 0` is
/// kept when the budget is slack, otherwise it is found by bisection.
pub fn priced_best_response(
    ch: &ParallelChannel,
    p: &PowerMatrix,
    k: usize,
    weight: f64,
    prices: &[f64],
) -> Vec<f64> {
    let floors: Vec<f64> = (0..ch.tones())
        .map(|n| {
            let g = ch.power_gain(n, k, k);
            if g > 0.0 {
                parallel_interference(ch, p, k, n) / g
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let alloc = |lambda: f64| -> Vec<f64> {
        floors
            .iter()
            .zip(prices)
            .map(|(&f, &t)| (weight / ((lambda + t) * LN_2) - f).max(0.0))
            .collect()
    };
    let total = |lambda: f64| -> f64 { alloc(lambda).iter().sum() };
    let budget = ch.budgets()[k];
    if prices.iter().all(|&t| t > 0.0) && total(0.0) <= budget {
        return alloc(0.0);
    }
    let hi = ch.tones() as f64 * weight / (budget * LN_2);
    alloc(bisect_decreasing(total, budget, hi))
}

/// Multichannel distributed pricing with sequential users.
///
/// One iteration is a sweep in which each user, in index order, refreshes
/// its prices against the current powers and plays its priced best
/// response. Each such update maximizes a lower bound of the weighted sum
/// rate that is tight at the current point, so the objective never
/// decreases. Starts from equal power `budget / N` unless `init` is given.
pub fn mdp_solve(
    ch: &ParallelChannel,
    weights: &[f64],
    stop: &StopRule,
    init: Option<&PowerMatrix>,
) -> Result<SolverTrace<PowerMatrix>> {
    check_weights(weights, ch.users())?;
    let mut p = init.cloned().unwrap_or_else(|| PowerMatrix::uniform(ch.budgets(), ch.tones()));
    let mut objective = weighted_sum_rate_parallel(ch, &p, weights)?;
    let mut trace = SolverTrace::new(objective, p.clone());
    for _ in 0..stop.max_iter {
        let before = p.clone();
        for k in 0..ch.users() {
            let prices = prices_of(ch, &p, weights, k);
            let br = priced_best_response(ch, &p, k, weights[k], &prices);
            p.user_mut(k).copy_from_slice(&br);
        }
        let next = weighted_sum_rate_parallel(ch, &p, weights)?;
        trace.push(next);
        trace.residual_history.push(p.max_abs_diff(&before));
        let gain = next - objective;
        objective = next;
        if gain <= stop.epsilon {
            return Ok(trace.finish(p, Termination::Converged));
        }
    }
    Ok(trace.finish(p, Termination::MaxIterations))
}
