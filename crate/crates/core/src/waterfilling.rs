//! Water-filling best responses and the iterative water-filling games on the
//! parallel interference channel.
//!
//! A user facing per-tone noise-plus-interference `npi_n` with direct power
//! gain `g_n` sees the floor `npi_n / g_n` on tone `n`. Both the rate-adaptive
//! (power budget) and the fixed-margin (rate target) best responses pour
//! power up to a common water level over those floors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channels::{parallel_interference, rate_parallel, ParallelChannel, PowerMatrix};
use crate::linalg::spectral_radius;
use crate::power_control::{Feasibility, DIVERGENCE_THRESHOLD};
use crate::{Error, Result, SolverTrace, Termination};

/// Highest water level a fixed-margin best response may use before the
/// target is declared unreachable.
pub const WATER_LEVEL_CAP: f64 = 1e12;

fn floors(gains: &[f64], npi: &[f64]) -> Result<Vec<f64>> {
    if gains.len() != npi.len() {
        return Err(Error::Dimension(format!("{} gains but {} noise levels", gains.len(), npi.len())));
    }
    gains
        .iter()
        .zip(npi)
        .map(|(&g, &i)| {
            if !(g >= 0.0 && g.is_finite()) || !(i > 0.0 && i.is_finite()) {
                return Err(Error::Domain("gains must be >= 0 and noise levels > 0".into()));
            }
            Ok(if g > 0.0 { i / g } else { f64::INFINITY })
        })
        .collect()
}

fn sorted_indices(f: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..f.len()).collect();
    idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    idx
}

/// Water level `L` with `sum_n [L - floor_n]^+ = budget`.
///
/// The left side is piecewise linear in `L`, so the level is found exactly by
/// walking the sorted floors: with the `m` lowest floors active,
/// `L = (budget + sum_{i<m} floor_i) / m`.
pub fn water_level(floors: &[f64], budget: f64) -> f64 {
    let idx = sorted_indices(floors);
    let mut partial = 0.0;
    let mut level = f64::INFINITY;
    for (m, &i) in idx.iter().enumerate() {
        let f = floors[i];
        if !f.is_finite() {
            break;
        }
        partial += f;
        let candidate = (budget + partial) / (m + 1) as f64;
        level = candidate;
        match idx.get(m + 1).map(|&j| floors[j]) {
            Some(next) if candidate > next => continue,
            _ => break,
        }
    }
    level
}

/// Rate-adaptive best response: `p_n = [L - npi_n / g_n]^+` with the level
/// chosen so that the whole budget is used.
pub fn waterfill(gains: &[f64], npi: &[f64], budget: f64) -> Result<Vec<f64>> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::Parameter(format!("budget must be finite and >= 0, got {budget}")));
    }
    let f = floors(gains, npi)?;
    if budget == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    if f.iter().all(|v| v.is_infinite()) {
        return Err(Error::Degenerate("every tone has zero direct gain".into()));
    }
    let level = water_level(&f, budget);
    Ok(f.iter().map(|&fl| (level - fl).max(0.0)).collect())
}

/// Fixed-margin best response: the least total power reaching `target`
/// bits, `p_n = [L - npi_n / g_n]^+` with `sum_{active} log2(L / floor_n) = target`.
///
/// With the `m` lowest floors active the level is `2^((target + sum log2 floor_i) / m)`.
pub fn fm_waterfill(gains: &[f64], npi: &[f64], target: f64) -> Result<Vec<f64>> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::Parameter(format!("rate target must be finite and >= 0, got {target}")));
    }
    let f = floors(gains, npi)?;
    if target == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    let idx = sorted_indices(&f);
    let mut log_sum = 0.0;
    let mut level = f64::INFINITY;
    for (m, &i) in idx.iter().enumerate() {
        if !f[i].is_finite() {
            break;
        }
        log_sum += f[i].log2();
        let candidate = ((target + log_sum) / (m + 1) as f64).exp2();
        level = candidate;
        match idx.get(m + 1).map(|&j| f[j]) {
            Some(next) if candidate > next => continue,
            _ => break,
        }
    }
    if !(level <= WATER_LEVEL_CAP) {
        return Err(Error::Parameter(format!(
            "water level {level:.3e} exceeds the cap {WATER_LEVEL_CAP:.0e}; target is unreachable"
        )));
    }
    Ok(f.iter().map(|&fl| (level - fl).max(0.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Users update one after another, each seeing the latest powers.
    #[default]
    Sequential,
    /// All users respond to the same previous iterate.
    Simultaneous,
}

impl std::str::FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" | "seq" => Ok(Schedule::Sequential),
            "simultaneous" | "sim" => Ok(Schedule::Simultaneous),
            _ => Err(Error::Parameter(format!("unknown schedule `{s}` (expected sequential or simultaneous)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwfaOptions {
    pub schedule: Schedule,
    /// Weight on the previous iterate: `new = damping * old + (1 - damping) * BR`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IwfaOptions {
    fn default() -> Self {
        Self { schedule: Schedule::Sequential, damping: 0.0, tol: 1e-9, max_iter: 10_000 }
    }
}

fn direct_gains_on(ch: &ParallelChannel, k: usize) -> Vec<f64> {
    (0..ch.tones()).map(|n| ch.power_gain(n, k, k)).collect()
}

fn npi_of(ch: &ParallelChannel, p: &PowerMatrix, k: usize) -> Vec<f64> {
    (0..ch.tones()).map(|n| parallel_interference(ch, p, k, n)).collect()
}

/// Water-filling best response of user `k` to the others' powers in `p`.
pub fn best_response(ch: &ParallelChannel, p: &PowerMatrix, k: usize) -> Result<Vec<f64>> {
    waterfill(&direct_gains_on(ch, k), &npi_of(ch, p, k), ch.budgets()[k])
}

/// `max_k ||p_k - BR_k(p_-k)||_inf`; zero exactly at a Nash equilibrium.
pub fn ne_residual(ch: &ParallelChannel, p: &PowerMatrix) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..ch.users() {
        let br = best_response(ch, p, k)?;
        let d = br.iter().zip(p.user(k)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok(worst)
}

fn sweep(
    ch: &ParallelChannel,
    p: &mut PowerMatrix,
    schedule: Schedule,
    damping: f64,
    respond: impl Fn(&PowerMatrix, usize) -> Result<Vec<f64>>,
) -> Result<()> {
    let mix = |old: &mut [f64], br: &[f64]| {
        for (o, b) in old.iter_mut().zip(br) {
            *o = damping * *o + (1.0 - damping) * b;
        }
    };
    match schedule {
        Schedule::Sequential => {
            for k in 0..ch.users() {
                let br = respond(p, k)?;
                mix(p.user_mut(k), &br);
            }
        }
        Schedule::Simultaneous => {
            let frozen = p.clone();
            for k in 0..ch.users() {
                let br = respond(&frozen, k)?;
                mix(p.user_mut(k), &br);
            }
        }
    }
    Ok(())
}

fn check_damping(damping: f64) -> Result<()> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::Parameter(format!("damping must lie in [0, 1), got {damping}")));
    }
    Ok(())
}

/// Rate-adaptive iterative water-filling from zero power (or `init`).
///
/// One iteration is a full sweep over the users. The residual recorded after
/// every sweep is [`ne_residual`] of the new state and the run converges once
/// it drops below `tol`. The objective is the sum rate. Runs that do not
/// settle return their full trace with `converged = false`.
pub fn iwfa(ch: &ParallelChannel, opts: &IwfaOptions, init: Option<&PowerMatrix>) -> Result<SolverTrace<PowerMatrix>> {
    check_damping(opts.damping)?;
    let mut p = init.cloned().unwrap_or_else(|| PowerMatrix::zeros(ch.users(), ch.tones()));
    let rates = rate_parallel(ch, &p)?;
    let mut trace = SolverTrace::new(rates.iter().sum(), p.clone());
    trace.residual_history.push(ne_residual(ch, &p)?);
    trace.rate_history.push(rates);
    for _ in 0..opts.max_iter {
        sweep(ch, &mut p, opts.schedule, opts.damping, |q, k| best_response(ch, q, k))?;
        let rates = rate_parallel(ch, &p)?;
        let residual = ne_residual(ch, &p)?;
        trace.push(rates.iter().sum());
        trace.rate_history.push(rates);
        trace.residual_history.push(residual);
        if residual < opts.tol {
            return Ok(trace.finish(p, Termination::Converged));
        }
    }
    Ok(trace.finish(p, Termination::MaxIterations))
}

/// `Upsilon[q][r] = max_n |H^n_rq|^2 / |H^n_qq|^2` for `r != q`, zero diagonal.
pub fn upsilon(ch: &ParallelChannel) -> Result<DMatrix<f64>> {
    let k = ch.users();
    let mut m = DMatrix::zeros(k, k);
    for q in 0..k {
        for r in (0..k).filter(|&r| r != q) {
            let mut worst = 0.0f64;
            for n in 0..ch.tones() {
                let direct = ch.power_gain(n, q, q);
                if direct == 0.0 {
                    return Err(Error::Degenerate(format!("user {q} has zero direct gain on tone {n}")));
                }
                worst = worst.max(ch.power_gain(n, r, q) / direct);
            }
            m[(q, r)] = worst;
        }
    }
    Ok(m)
}

/// `rho(Upsilon) < 1`: the simultaneous game has a unique equilibrium and
/// the simultaneous iteration converges to it.
pub fn cert_simultaneous(ch: &ParallelChannel) -> Result<Feasibility> {
    let rho = spectral_radius(&upsilon(ch)?);
    Ok(Feasibility { feasible: rho < 1.0, rho })
}

/// `rho((I - Upsilon_low)^-1 Upsilon_upp) < 1`: sequential updates converge.
pub fn cert_sequential(ch: &ParallelChannel) -> Result<Feasibility> {
    let u = upsilon(ch)?;
    let k = ch.users();
    let low = DMatrix::from_fn(k, k, |i, j| if i > j { u[(i, j)] } else { 0.0 });
    let upp = DMatrix::from_fn(k, k, |i, j| if i < j { u[(i, j)] } else { 0.0 });
    let lhs = DMatrix::<f64>::identity(k, k) - low;
    let s = lhs
        .solve_lower_triangular(&upp)
        .expect("unit lower triangular matrices are invertible");
    // The exact product is nonnegative; clear roundoff before the power iteration.
    let rho = spectral_radius(&s.map(|v| v.max(0.0)));
    Ok(Feasibility { feasible: rho < 1.0, rho })
}

/// Whether `|H^n_rq|^2 / |H^n_qq|^2 == |H^n_qr|^2 / |H^n_rr|^2` for every pair
/// and tone, within relative tolerance `tol`.
pub fn cert_symmetric_crosstalk(ch: &ParallelChannel, tol: f64) -> bool {
    let k = ch.users();
    (0..ch.tones()).all(|n| {
        (0..k).all(|q| {
            (q + 1..k).all(|r| {
                let a = ch.power_gain(n, r, q) / ch.power_gain(n, q, q);
                let b = ch.power_gain(n, q, r) / ch.power_gain(n, r, r);
                (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
            })
        })
    })
}

/// Sufficient condition for rate targets `zeta` (in bits, as everywhere else)
/// to be reachable with bounded power, evaluated as printed with the natural
/// exponential: `sum_{l != k} |H^n_kl|^2 / |H^n_kk|^2 < 1 / (exp(zeta_k) - 1)`
/// for every tone and user.
pub fn fm_feasibility_check(ch: &ParallelChannel, zeta: &[f64]) -> Result<bool> {
    if zeta.len() != ch.users() {
        return Err(Error::Dimension(format!("{} rate targets for {} users", zeta.len(), ch.users())));
    }
    let k = ch.users();
    for n in 0..ch.tones() {
        for u in 0..k {
            if zeta[u] == 0.0 {
                continue;
            }
            let leak: f64 = (0..k).filter(|&l| l != u).map(|l| ch.power_gain(n, u, l)).sum::<f64>()
                / ch.power_gain(n, u, u);
            if !(leak < 1.0 / zeta[u].exp_m1()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Fixed-margin iterative water-filling: every user reaches its rate target
/// `zeta_k` with least power against the measured interference.
///
/// Starts from zero power. The objective is the total transmit power and the
/// residual is the largest change of any power in a sweep. When a target
/// cannot be met under [`WATER_LEVEL_CAP`] the run stops with
/// `Termination::Infeasible` naming the user; when powers blow past the
/// divergence threshold it stops with `Termination::Diverged`.
pub fn fm_iwfa(
    ch: &ParallelChannel,
    zeta: &[f64],
    schedule: Schedule,
    tol: f64,
    max_iter: usize,
) -> Result<SolverTrace<PowerMatrix>> {
    if zeta.len() != ch.users() {
        return Err(Error::Dimension(format!("{} rate targets for {} users", zeta.len(), ch.users())));
    }
    if zeta.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::Parameter("rate targets must be finite and >= 0".into()));
    }
    let mut p = PowerMatrix::zeros(ch.users(), ch.tones());
    let mut trace = SolverTrace::new(0.0, p.clone());
    trace.rate_history.push(rate_parallel(ch, &p)?);
    for _ in 0..max_iter {
        let before = p.clone();
        let failed = std::cell::Cell::new(None);
        let outcome = sweep(ch, &mut p, schedule, 0.0, |q, k| {
            fm_waterfill(&direct_gains_on(ch, k), &npi_of(ch, q, k), zeta[k]).inspect_err(|_| failed.set(Some(k)))
        });
        if let Some(user) = failed.get() {
            return Ok(trace.finish(before, Termination::Infeasible { user }));
        }
        outcome?;
        let total: f64 = (0..ch.users()).map(|k| p.user_total(k)).sum();
        let change = p.max_abs_diff(&before);
        trace.push(total);
        trace.residual_history.push(change);
        trace.rate_history.push(rate_parallel(ch, &p)?);
        if !total.is_finite() || p.as_slice().iter().any(|&v| v > DIVERGENCE_THRESHOLD) {
            return Ok(trace.finish(p, Termination::Diverged));
        }
        if change < tol {
            return Ok(trace.finish(p, Termination::Converged));
        }
    }
    Ok(trace.finish(p, Termination::MaxIterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn log_rate(g: &[f64], npi: &[f64], p: &[f64]) -> f64 {
        g.iter().zip(npi).zip(p).map(|((g, i), p)| (1.0 + g * p / i).log2()).sum()
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill(&[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap(), vec![1.0, 1.0]);
        let p = waterfill(&[1.0, 3.0], &[1.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 5.0 / 6.0, epsilon = 1e-15);
        assert_eq!(waterfill(&[1.0, 2.0], &[1.0, 1.0], 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(waterfill(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn waterfill_kkt_and_budget() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
            let npi: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..4.0)).collect();
            let budget = rng.random_range(0.0..20.0);
            let p = waterfill(&g, &npi, budget).unwrap();
            assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-10 * budget.max(1.0));
            let active: Vec<f64> = (0..n).filter(|&i| p[i] > 0.0).map(|i| p[i] + npi[i] / g[i]).collect();
            let level = active.iter().copied().fold(f64::NAN, f64::max);
            for a in &active {
                assert!((a - level).abs() < 1e-8);
            }
            for i in (0..n).filter(|&i| p[i] == 0.0) {
                assert!(level <= npi[i] / g[i] + 1e-8 || active.is_empty());
            }
        }
    }

    #[test]
    fn waterfill_beats_random_allocations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let g = [0.3, 1.7, 0.9, 2.5];
        let npi = [1.0, 2.0, 1.5, 3.0];
        let p = waterfill(&g, &npi, 3.0).unwrap();
        let best = log_rate(&g, &npi, &p);
        for _ in 0..10_000 {
            let mut q: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|x| *x *= 3.0 / s);
            assert!(log_rate(&g, &npi, &q) <= best + 1e-12);
        }
    }

    #[test]
    fn fm_waterfill_examples() {
        let p = fm_waterfill(&[1.0], &[1.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_eq!(fm_waterfill(&[1.0, 2.0], &[1.0, 1.0], 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(fm_waterfill(&[1e-30], &[1.0], 100.0).is_err());
    }

    #[test]
    fn fm_waterfill_minimal_power() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = [0.3, 1.7, 0.9, 2.5];
        let npi = [1.0, 2.0, 1.5, 3.0];
        let target = 3.0;
        let p = fm_waterfill(&g, &npi, target).unwrap();
        assert!((log_rate(&g, &npi, &p) - target).abs() < 1e-8);
        let power: f64 = p.iter().sum();
        for _ in 0..10_000 {
            let dir: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            // Scale the random direction until it reaches the target.
            let (mut lo, mut hi) = (0.0, 1e6);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let q: Vec<f64> = dir.iter().map(|d| d * mid).collect();
                if log_rate(&g, &npi, &q) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let q_power: f64 = dir.iter().map(|d| d * hi).sum();
            assert!(power <= q_power + 1e-9);
        }
    }

    fn uncoupled(k: usize, n: usize, seed: u64) -> ParallelChannel {
        ParallelChannel::random(k, n, seed).unwrap().scale_crosstalk(0.0).with_uniform_budget(5.0).unwrap()
    }

    #[test]
    fn uncoupled_game_settles_in_one_sweep() {
        let ch = uncoupled(3, 8, 1);
        for schedule in [Schedule::Sequential, Schedule::Simultaneous] {
            let t = iwfa(&ch, &IwfaOptions { schedule, ..Default::default() }, None).unwrap();
            assert!(t.converged);
            assert_eq!(t.iterations, 1);
        }
    }

    #[test]
    fn strong_interference_equilibrium_is_full_power() {
        let pg = vec![vec![vec![1.0, 2.0], vec![2.0, 1.0]]];
        let ch = ParallelChannel::from_power_gains(&pg, vec![1.0, 1.0]).unwrap();
        let t = iwfa(&ch, &IwfaOptions::default(), None).unwrap();
        assert!(t.converged);
        assert!(t.final_state.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        for r in rate_parallel(&ch, &t.final_state).unwrap() {
            assert_relative_eq!(r, (4.0f64 / 3.0).log2(), epsilon = 1e-11);
        }
    }

    #[test]
    fn certified_instances_converge_geometrically() {
        let mut seen = 0;
        for seed in 0..400 {
            let ch = ParallelChannel::random(3, 4, seed).unwrap().scale_crosstalk(0.3).with_uniform_budget(10.0).unwrap();
            if !cert_simultaneous(&ch).unwrap().feasible {
                continue;
            }
            seen += 1;
            let opts = IwfaOptions { schedule: Schedule::Simultaneous, tol: 1e-12, max_iter: 2000, ..Default::default() };
            let t = iwfa(&ch, &opts, None).unwrap();
            assert!(t.converged, "seed {seed}");
            let r = &t.residual_history;
            for i in 1..r.len().saturating_sub(10) {
                if r[i] > 1e-11 {
                    assert!(r[i + 10] < r[i], "seed {seed}: {} -> {}", r[i], r[i + 10]);
                }
            }
            if seen == 50 {
                break;
            }
        }
        assert_eq!(seen, 50);
    }

    #[test]
    fn sequential_update_is_exact_best_response() {
        let ch = ParallelChannel::random(3, 6, 2).unwrap().scale_crosstalk(0.5).with_uniform_budget(4.0).unwrap();
        let mut p = PowerMatrix::uniform(ch.budgets(), 6);
        for k in 0..3 {
            let br = best_response(&ch, &p, k).unwrap();
            p.user_mut(k).copy_from_slice(&br);
            let again = best_response(&ch, &p, k).unwrap();
            assert!(again.iter().zip(p.user(k)).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn upsilon_and_certificates() {
        let pg = vec![vec![vec![1.0, 0.2], vec![0.4, 2.0]], vec![vec![2.0, 0.1], vec![0.8, 1.0]]];
        let ch = ParallelChannel::from_power_gains(&pg, vec![1.0, 1.0]).unwrap();
        let u = upsilon(&ch).unwrap();
        // Upsilon[0][1] = max_n |H^n_10|^2 / |H^n_00|^2 = max(0.4, 0.4).
        assert_relative_eq!(u[(0, 1)], 0.4);
        // Upsilon[1][0] = max(0.2 / 2, 0.1 / 1).
        assert_relative_eq!(u[(1, 0)], 0.1);
        assert_eq!(u[(0, 0)], 0.0);
        let sim = cert_simultaneous(&ch).unwrap();
        assert_relative_eq!(sim.rho, (0.4f64 * 0.1).sqrt(), max_relative = 1e-10);
        // Two users: (I - L)^-1 U has the single nonzero eigenvalue u01 * u10.
        let seq = cert_sequential(&ch).unwrap();
        assert_relative_eq!(seq.rho, 0.04, max_relative = 1e-10);
        assert!(!cert_symmetric_crosstalk(&ch, 1e-12));
    }

    #[test]
    fn fm_feasibility_examples() {
        let ch = ParallelChannel::random(3, 4, 7).unwrap();
        assert!(fm_feasibility_check(&ch, &[0.0; 3]).unwrap());
        assert!(fm_feasibility_check(&ch.scale_crosstalk(0.0), &[5.0; 3]).unwrap());
        for &r in &[0.1, 0.5, 1.0, 2.0] {
            let pg = vec![vec![vec![1.0, r], vec![r, 1.0]]];
            let ch = ParallelChannel::from_power_gains(&pg, vec![1.0, 1.0]).unwrap();
            for &z in &[0.1, 0.5, 1.0, 2.0] {
                assert_eq!(fm_feasibility_check(&ch, &[z, z]).unwrap(), r < 1.0 / (z.exp() - 1.0));
            }
        }
    }

    #[test]
    fn fm_iwfa_meets_targets() {
        let ch = ParallelChannel::random(3, 8, 11).unwrap().scale_crosstalk(0.2);
        let zeta = [2.0, 1.5, 1.0];
        let t = fm_iwfa(&ch, &zeta, Schedule::Sequential, 1e-12, 5000).unwrap();
        assert!(t.converged, "{:?}", t.termination);
        let rates = rate_parallel(&ch, &t.final_state).unwrap();
        for (r, z) in rates.iter().zip(&zeta) {
            assert!((r - z).abs() < 1e-6);
        }
        // Each user's powers sit on a common water level over its active tones.
        for k in 0..3 {
            let npi = npi_of(&ch, &t.final_state, k);
            let g = direct_gains_on(&ch, k);
            let levels: Vec<f64> =
                (0..8).filter(|&n| t.final_state.get(k, n) > 0.0).map(|n| t.final_state.get(k, n) + npi[n] / g[n]).collect();
            for l in &levels {
                assert!((l - levels[0]).abs() < 1e-8 * levels[0]);
            }
        }
    }

    #[test]
    fn fm_iwfa_reports_unreachable_target() {
        let pg = vec![vec![vec![1.0, 4.0], vec![4.0, 1.0]]];
        let ch = ParallelChannel::from_power_gains(&pg, vec![1.0, 1.0]).unwrap();
        let t = fm_iwfa(&ch, &[3.0, 3.0], Schedule::Sequential, 1e-12, 5000).unwrap();
        assert!(matches!(t.termination, Termination::Infeasible { .. } | Termination::Diverged));
        assert!(!t.converged);
    }
}
