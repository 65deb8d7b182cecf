//! Linear interference alignment without channel extensions.
//!
//! Receiver `k` sees transmitter `j` through `H_jk` (`N_k x M_j`). A set of
//! orthonormal beamformers aligns interference when `U_kᴴ H_jk V_j = 0` for
//! every `j != k` and `U_kᴴ H_kk V_k` has full rank `d_k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{cn01, Antennas, MimoChannel};
use crate::linalg::{hermitian_eigh, orthonormal_columns, singular_values};
use crate::{CMatrix, Error, Result};

/// Stream counts with the antenna configuration they are meant for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofProfile {
    pub d: Vec<usize>,
    pub antennas: Vec<Antennas>,
}

impl DofProfile {
    pub fn new(d: Vec<usize>, antennas: Vec<Antennas>) -> Result<Self> {
        if d.len() != antennas.len() || d.is_empty() {
            return Err(Error::Dimension(format!("{} stream counts for {} antenna pairs", d.len(), antennas.len())));
        }
        if antennas.iter().any(|a| a.tx == 0 || a.rx == 0) {
            return Err(Error::Dimension("antenna counts must be at least 1".into()));
        }
        Ok(Self { d, antennas })
    }

    /// `users` identical users with `m` transmit and `n` receive antennas.
    pub fn symmetric(users: usize, m: usize, n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; users], vec![Antennas::new(m, n); users])
    }

    pub fn users(&self) -> usize {
        self.d.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryReport {
    /// `min(M_k, N_k) >= d_k` for all `k`.
    pub per_user: bool,
    /// `max(M_k, N_j) >= d_k + d_j` for all `k != j`.
    pub pairwise: bool,
    /// The variable-counting inequality over every subset of interfering pairs.
    pub counting: bool,
    /// First violating subset of `(transmitter, receiver)` pairs, in the
    /// order of increasing bitmask over the pairs listed lexicographically.
    pub violating_subset: Option<Vec<(usize, usize)>>,
}

impl NecessaryReport {
    pub fn all_hold(&self) -> bool {
        self.per_user && self.pairwise && self.counting
    }
}

/// Largest `K (K - 1)` for which all subsets are enumerated.
pub const MAX_ENUMERATED_PAIRS: usize = 20;

/// Necessary conditions for linear alignment on generic channels.
///
/// For each subset `I` of interfering pairs `(k, j)` (transmitter `k`,
/// receiver `j`), the variables of the transmitters and receivers involved
/// must cover the equations:
/// `sum_{k in tx(I)} (M_k - d_k) d_k + sum_{j in rx(I)} (N_j - d_j) d_j >= sum_{(k,j) in I} d_k d_j`.
pub fn feasibility_necessary(profile: &DofProfile) -> Result<NecessaryReport> {
    let kk = profile.users();
    let pairs: Vec<(usize, usize)> = (0..kk).flat_map(|k| (0..kk).filter(move |&j| j != k).map(move |j| (k, j))).collect();
    if pairs.len() > MAX_ENUMERATED_PAIRS {
        return Err(Error::Capability(format!(
            "{kk} users give {} interfering pairs; subset enumeration is limited to {MAX_ENUMERATED_PAIRS}",
            pairs.len()
        )));
    }
    let (d, a) = (&profile.d, &profile.antennas);
    let per_user = (0..kk).all(|k| a[k].tx.min(a[k].rx) >= d[k]);
    let pairwise = pairs.iter().all(|&(k, j)| a[k].tx.max(a[j].rx) >= d[k] + d[j]);

    let tx_vars: Vec<i64> = (0..kk).map(|k| (a[k].tx as i64 - d[k] as i64) * d[k] as i64).collect();
    let rx_vars: Vec<i64> = (0..kk).map(|k| (a[k].rx as i64 - d[k] as i64) * d[k] as i64).collect();
    let mut violating = None;
    for mask in 1u32..(1u32 << pairs.len()) {
        let (mut tx_used, mut rx_used) = (0u32, 0u32);
        let mut equations = 0i64;
        for (i, &(k, j)) in pairs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                tx_used |= 1 << k;
                rx_used |= 1 << j;
                equations += (d[k] * d[j]) as i64;
            }
        }
        let variables: i64 = (0..kk)
            .map(|k| if tx_used >> k & 1 == 1 { tx_vars[k] } else { 0 } + if rx_used >> k & 1 == 1 { rx_vars[k] } else { 0 })
            .sum();
        if variables < equations {
            violating = Some(pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect());
            break;
        }
    }
    Ok(NecessaryReport { per_user, pairwise, counting: violating.is_none(), violating_subset: violating })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DofBounds {
    /// Largest common stream count allowed: `sum_k (M_k + N_k) / (K (K + 1))`.
    pub equal_d_bound: f64,
    /// `M + N` when every user has the same antenna total; the total stream
    /// count must stay strictly below it.
    pub sum_bound: Option<f64>,
    /// `(sum d)^2 + sum d^2 <= (M + N) sum d`, when the antenna totals agree.
    pub sum_condition_holds: Option<bool>,
}

pub fn dof_bounds(profile: &DofProfile) -> DofBounds {
    let kk = profile.users() as f64;
    let totals: Vec<usize> = profile.antennas.iter().map(|a| a.tx + a.rx).collect();
    let equal_d_bound = totals.iter().sum::<usize>() as f64 / (kk * (kk + 1.0));
    let common = totals.iter().all(|&t| t == totals[0]).then_some(totals[0] as f64);
    let sum: f64 = profile.d.iter().sum::<usize>() as f64;
    let squares: f64 = profile.d.iter().map(|&x| (x * x) as f64).sum();
    DofBounds {
        equal_d_bound,
        sum_bound: common,
        sum_condition_holds: common.map(|mn| sum * sum + squares <= mn * sum),
    }
}

/// The symmetric rule `2M >= d (K + 1)` for `K` users with `M` antennas at
/// both ends and `d` streams each.
pub fn symmetric_feasible(m: usize, d: usize, users: usize) -> bool {
    2 * m >= d * (users + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IaResidual {
    /// Largest entry magnitude of `U_kᴴ H_jk V_j` over `j != k`.
    pub max_crossterm: f64,
    /// Numerical rank of `U_kᴴ H_kk V_k` (singular values above `1e-8` times the largest).
    pub ranks: Vec<usize>,
    pub rank_ok: bool,
}

pub fn ia_residual(ch: &MimoChannel, u: &[CMatrix], v: &[CMatrix], d: &[usize]) -> Result<IaResidual> {
    let kk = ch.users();
    if u.len() != kk || v.len() != kk || d.len() != kk {
        return Err(Error::Dimension(format!("expected {kk} receive and transmit beamformers")));
    }
    let mut max_crossterm: f64 = 0.0;
    let mut ranks = Vec::with_capacity(kk);
    for k in 0..kk {
        for j in (0..kk).filter(|&j| j != k) {
            let c = u[k].adjoint() * ch.gain(j, k) * &v[j];
            max_crossterm = c.iter().map(|z| z.norm()).fold(max_crossterm, f64::max);
        }
        let s = singular_values(&(u[k].adjoint() * ch.gain(k, k) * &v[k]));
        let top = s.first().copied().unwrap_or(0.0);
        ranks.push(if top == 0.0 { 0 } else { s.iter().filter(|&&x| x > 1e-8 * top).count() });
    }
    let rank_ok = ranks.iter().zip(d).all(|(r, d)| r == d);
    Ok(IaResidual { max_crossterm, ranks, rank_ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaOptions {
    pub max_iter: usize,
    /// Stop once the total leakage falls below this.
    pub tol: f64,
    /// Transmit powers `p_j`; stream `s` of user `j` carries `p_j / d_j`.
    /// Ones when unset.
    pub powers: Option<Vec<f64>>,
    /// Random orthonormal starting beams from this seed; the first `d_k`
    /// standard basis vectors when unset.
    pub seed: Option<u64>,
}

impl Default for IaOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tol: 1e-10, powers: None, seed: None }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// `N_k x d_k` receive beamformers with orthonormal columns.
    pub u: Vec<CMatrix>,
    /// `M_k x d_k` transmit beamformers with orthonormal columns.
    pub v: Vec<CMatrix>,
    /// Total leakage after the initial receiver update and after every
    /// half-step that follows.
    pub leakage_history: Vec<f64>,
    pub residual: IaResidual,
    pub rank_ok: bool,
    pub converged: bool,
    pub iterations: usize,
}

struct Leakage<'a> {
    ch: &'a MimoChannel,
    d: &'a [usize],
    stream_power: Vec<f64>,
}

impl Leakage<'_> {
    /// Interference covariance at receiver `k`:
    /// `sum_{j != k} (p_j / d_j) H_jk V_j V_jᴴ H_jkᴴ`.
    fn at_receiver(&self, v: &[CMatrix], k: usize) -> CMatrix {
        let n = self.ch.antennas()[k].rx;
        let mut q = CMatrix::zeros(n, n);
        for j in (0..self.ch.users()).filter(|&j| j != k && self.d[j] > 0) {
            let hv = self.ch.gain(j, k) * &v[j];
            q += (&hv * hv.adjoint()).scale(self.stream_power[j]);
        }
        q
    }

    /// The same total leakage seen from transmitter `j`:
    /// `(p_j / d_j) sum_{k != j} H_jkᴴ U_k U_kᴴ H_jk`.
    fn at_transmitter(&self, u: &[CMatrix], j: usize) -> CMatrix {
        let m = self.ch.antennas()[j].tx;
        let mut q = CMatrix::zeros(m, m);
        for k in (0..self.ch.users()).filter(|&k| k != j && self.d[k] > 0) {
            let hu = self.ch.gain(j, k).adjoint() * &u[k];
            q += &hu * hu.adjoint();
        }
        q.scale(self.stream_power[j])
    }

    fn total(&self, u: &[CMatrix], v: &[CMatrix]) -> f64 {
        (0..self.ch.users())
            .map(|k| (u[k].adjoint() * self.at_receiver(v, k) * &u[k]).trace().re)
            .sum::<f64>()
            .max(0.0)
    }
}

fn smallest(q: &CMatrix, d: usize) -> CMatrix {
    let (_, vecs) = hermitian_eigh(q);
    vecs.columns(0, d).into_owned()
}

/// Alternating minimization of the total leakage `sum_k Tr(U_kᴴ Q_k U_k)`.
///
/// Each half-step replaces one side by the eigenvectors of its leakage
/// matrix with the `d_k` smallest eigenvalues, the exact minimizer over
/// orthonormal beams with the other side fixed, so the leakage never
/// increases. The transmit side uses the same weighted objective seen from
/// the transmitters (conjugated channels).
pub fn ia_altmin(ch: &MimoChannel, d: &[usize], opts: &IaOptions) -> Result<AlignmentResult> {
    let kk = ch.users();
    if d.len() != kk {
        return Err(Error::Dimension(format!("{} stream counts for {kk} users", d.len())));
    }
    for (k, a) in ch.antennas().iter().enumerate() {
        if d[k] > a.tx.min(a.rx) {
            return Err(Error::Dimension(format!("user {k}: {} streams with {}x{} antennas", d[k], a.tx, a.rx)));
        }
    }
    let powers = opts.powers.clone().unwrap_or_else(|| vec![1.0; kk]);
    if powers.len() != kk || powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Parameter("one finite nonnegative power per user is required".into()));
    }
    let stream_power = (0..kk).map(|j| if d[j] == 0 { 0.0 } else { powers[j] / d[j] as f64 }).collect();
    let leak = Leakage { ch, d, stream_power };

    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
    let mut v: Vec<CMatrix> = (0..kk)
        .map(|k| {
            let m = ch.antennas()[k].tx;
            match rng.as_mut() {
                Some(r) if d[k] > 0 => orthonormal_columns(&CMatrix::from_fn(m, d[k], |_, _| cn01(r))),
                _ => CMatrix::identity(m, d[k]),
            }
        })
        .collect();
    let receivers = |v: &[CMatrix]| -> Vec<CMatrix> { (0..kk).map(|k| smallest(&leak.at_receiver(v, k), d[k])).collect() };
    let mut u = receivers(&v);
    let mut history = vec![leak.total(&u, &v)];
    let mut iterations = 0;
    while history.last().copied().unwrap_or(0.0) >= opts.tol && iterations < opts.max_iter {
        v = (0..kk).map(|j| smallest(&leak.at_transmitter(&u, j), d[j])).collect();
        history.push(leak.total(&u, &v));
        u = receivers(&v);
        history.push(leak.total(&u, &v));
        iterations += 1;
    }
    let converged = *history.last().expect("nonempty") < opts.tol;
    let residual = ia_residual(ch, &u, &v, d)?;
    Ok(AlignmentResult { rank_ok: residual.rank_ok, u, v, leakage_history: history, residual, converged, iterations })
}
