//! Interference channel instances and their SINR / rate evaluators.
//!
//! Gains are indexed transmitter first: `H_lk` is the gain from transmitter
//! `l` to receiver `k`. Noise at every receiver has unit power, so a power
//! budget `p` corresponds to an SNR of `10 log10(p)` dB.
//!
//! Random instances draw every complex entry from CN(0, 1): real and imaginary
//! parts are independent zero-mean Gaussians of variance 1/2, produced by a
//! ChaCha8 stream seeded with [`rand_chacha::ChaCha8Rng::seed_from_u64`].
//! Entries are drawn in storage order, real part first, so a seed reproduces
//! the same instance on every platform.

mod eval;
mod json;

pub use eval::*;
pub use json::{Channel, ChannelDocument, ChannelKind};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result};

fn check_budgets(budgets: &[f64], k: usize) -> Result<()> {
    if budgets.len() != k {
        return Err(Error::Dimension(format!("expected {k} budgets, got {}", budgets.len())));
    }
    if let Some((i, b)) = budgets.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::Parameter(format!("budget of user {i} must be finite and > 0, got {b}")));
    }
    Ok(())
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a Complex64>) -> Result<()> {
    if values.into_iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("channel gains must be finite".into()))
    }
}

/// Single-antenna, single-carrier interference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarChannel {
    users: usize,
    gains: Vec<Complex64>,
    budgets: Vec<f64>,
}

impl ScalarChannel {
    /// `gains` is row-major `K x K` with `gains[l * K + k] = H_lk`.
    pub fn new(users: usize, gains: Vec<Complex64>, budgets: Vec<f64>) -> Result<Self> {
        if users == 0 {
            return Err(Error::Dimension("need at least one user".into()));
        }
        if gains.len() != users * users {
            return Err(Error::Dimension(format!(
                "expected {} gains, got {}",
                users * users,
                gains.len()
            )));
        }
        check_finite(&gains)?;
        check_budgets(&budgets, users)?;
        Ok(Self { users, gains, budgets })
    }

    /// Channel from real power gains `|H_lk|^2` (phases are irrelevant for
    /// scalar SINRs). `power_gains[l][k]` is transmitter `l` to receiver `k`.
    pub fn from_power_gains(power_gains: &[Vec<f64>], budgets: Vec<f64>) -> Result<Self> {
        let k = power_gains.len();
        let mut gains = Vec::with_capacity(k * k);
        for row in power_gains {
            if row.len() != k {
                return Err(Error::Dimension("power gain matrix must be square".into()));
            }
            for &g in row {
                if g < 0.0 {
                    return Err(Error::Domain("power gains must be nonnegative".into()));
                }
                gains.push(Complex64::new(g.sqrt(), 0.0));
            }
        }
        Self::new(k, gains, budgets)
    }

    /// Symmetric channel with unit direct gains and cross power gain `alpha`.
    pub fn symmetric(users: usize, alpha: f64, budget: f64) -> Result<Self> {
        let pg: Vec<Vec<f64>> = (0..users)
            .map(|l| (0..users).map(|k| if l == k { 1.0 } else { alpha }).collect())
            .collect();
        Self::from_power_gains(&pg, vec![budget; users])
    }

    pub fn random(users: usize, seed: u64) -> Result<Self> {
        if users == 0 {
            return Err(Error::Dimension("need at least one user".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = (0..users * users).map(|_| cn01(&mut rng)).collect();
        Self::new(users, gains, vec![1.0; users])
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn gain(&self, from: usize, to: usize) -> Complex64 {
        self.gains[from * self.users + to]
    }
    pub fn power_gain(&self, from: usize, to: usize) -> f64 {
        self.gain(from, to).norm_sqr()
    }
    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        check_budgets(&budgets, self.users)?;
        self.budgets = budgets;
        Ok(self)
    }
    pub fn with_uniform_budget(self, budget: f64) -> Result<Self> {
        let k = self.users;
        self.with_budgets(vec![budget; k])
    }
}

/// Multicarrier interference channel with `N` non-overlapping tones.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelChannel {
    users: usize,
    tones: usize,
    gains: Vec<Complex64>,
    power_gains: Vec<f64>,
    budgets: Vec<f64>,
}

impl ParallelChannel {
    /// `gains[(n * K + l) * K + k] = H^n_lk`.
    pub fn new(users: usize, tones: usize, gains: Vec<Complex64>, budgets: Vec<f64>) -> Result<Self> {
        if users == 0 || tones == 0 {
            return Err(Error::Dimension("need K >= 1 and N >= 1".into()));
        }
        if gains.len() != users * users * tones {
            return Err(Error::Dimension(format!(
                "expected {} gains, got {}",
                users * users * tones,
                gains.len()
            )));
        }
        check_finite(&gains)?;
        check_budgets(&budgets, users)?;
        let power_gains = gains.iter().map(|z| z.norm_sqr()).collect();
        Ok(Self { users, tones, gains, power_gains, budgets })
    }

    /// From power gains indexed `[tone][from][to]`.
    pub fn from_power_gains(power_gains: &[Vec<Vec<f64>>], budgets: Vec<f64>) -> Result<Self> {
        let tones = power_gains.len();
        let users = power_gains.first().map_or(0, |t| t.len());
        let mut gains = Vec::with_capacity(tones * users * users);
        for tone in power_gains {
            if tone.len() != users || tone.iter().any(|r| r.len() != users) {
                return Err(Error::Dimension("ragged power gain tensor".into()));
            }
            for row in tone {
                for &g in row {
                    if g < 0.0 {
                        return Err(Error::Domain("power gains must be nonnegative".into()));
                    }
                    gains.push(Complex64::new(g.sqrt(), 0.0));
                }
            }
        }
        Self::new(users, tones, gains, budgets)
    }

    pub fn random(users: usize, tones: usize, seed: u64) -> Result<Self> {
        if users == 0 || tones == 0 {
            return Err(Error::Dimension("need K >= 1 and N >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = (0..users * users * tones).map(|_| cn01(&mut rng)).collect();
        Self::new(users, tones, gains, vec![1.0; users])
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn tones(&self) -> usize {
        self.tones
    }
    pub fn gain(&self, tone: usize, from: usize, to: usize) -> Complex64 {
        self.gains[(tone * self.users + from) * self.users + to]
    }
    #[inline]
    pub fn power_gain(&self, tone: usize, from: usize, to: usize) -> f64 {
        self.power_gains[(tone * self.users + from) * self.users + to]
    }
    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        check_budgets(&budgets, self.users)?;
        self.budgets = budgets;
        Ok(self)
    }
    pub fn with_uniform_budget(self, budget: f64) -> Result<Self> {
        let k = self.users;
        self.with_budgets(vec![budget; k])
    }

    /// Copy of the channel with every cross gain scaled by `factor`.
    pub fn scale_crosstalk(&self, factor: f64) -> Self {
        let mut gains = self.gains.clone();
        for n in 0..self.tones {
            for l in 0..self.users {
                for k in 0..self.users {
                    if l != k {
                        gains[(n * self.users + l) * self.users + k] *= factor;
                    }
                }
            }
        }
        Self::new(self.users, self.tones, gains, self.budgets.clone()).expect("valid by construction")
    }

    /// The single-tone scalar channel seen on `tone`.
    pub fn tone(&self, tone: usize) -> ScalarChannel {
        let k = self.users;
        let start = tone * k * k;
        ScalarChannel::new(k, self.gains[start..start + k * k].to_vec(), self.budgets.clone())
            .expect("valid by construction")
    }
}

/// Multiple-antenna transmitters, single-antenna receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoChannel {
    users: usize,
    antennas: usize,
    /// `gains[l * K + k]` holds the entries of the row vector `h_lk`.
    gains: Vec<CVector>,
    budgets: Vec<f64>,
}

impl MisoChannel {
    pub fn new(users: usize, antennas: usize, gains: Vec<CVector>, budgets: Vec<f64>) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::Dimension("need K >= 1 and Nt >= 1".into()));
        }
        if gains.len() != users * users {
            return Err(Error::Dimension(format!("expected {} channel vectors", users * users)));
        }
        if gains.iter().any(|h| h.len() != antennas) {
            return Err(Error::Dimension(format!("all channel vectors must have length {antennas}")));
        }
        check_finite(gains.iter().flat_map(|h| h.iter()))?;
        check_budgets(&budgets, users)?;
        Ok(Self { users, antennas, gains, budgets })
    }

    pub fn random(users: usize, antennas: usize, seed: u64) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::Dimension("need K >= 1 and Nt >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = (0..users * users)
            .map(|_| DVector::from_fn(antennas, |_, _| cn01(&mut rng)))
            .collect();
        Self::new(users, antennas, gains, vec![1.0; users])
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn antennas(&self) -> usize {
        self.antennas
    }
    /// Row vector `h_lk` stored as a column of its entries.
    pub fn gain(&self, from: usize, to: usize) -> &CVector {
        &self.gains[from * self.users + to]
    }
    pub fn gains(&self) -> &[CVector] {
        &self.gains
    }
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        check_budgets(&budgets, self.users)?;
        self.budgets = budgets;
        Ok(self)
    }
    pub fn with_uniform_budget(self, budget: f64) -> Result<Self> {
        let k = self.users;
        self.with_budgets(vec![budget; k])
    }
}

/// Per-user antenna counts: `tx` transmit antennas (`M_k`), `rx` receive
/// antennas (`N_k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antennas {
    pub tx: usize,
    pub rx: usize,
}

impl Antennas {
    pub fn new(tx: usize, rx: usize) -> Self {
        Self { tx, rx }
    }
}

/// MIMO interference channel with heterogeneous antenna counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    antennas: Vec<Antennas>,
    /// `gains[l * K + k] = H_lk`, shape `rx_k x tx_l`.
    gains: Vec<CMatrix>,
    budgets: Vec<f64>,
}

impl MimoChannel {
    pub fn new(antennas: Vec<Antennas>, gains: Vec<CMatrix>, budgets: Vec<f64>) -> Result<Self> {
        let k = antennas.len();
        if k == 0 {
            return Err(Error::Dimension("need at least one user".into()));
        }
        if antennas.iter().any(|a| a.tx == 0 || a.rx == 0) {
            return Err(Error::Dimension("antenna counts must be >= 1".into()));
        }
        if gains.len() != k * k {
            return Err(Error::Dimension(format!("expected {} channel matrices", k * k)));
        }
        for l in 0..k {
            for r in 0..k {
                let h = &gains[l * k + r];
                if h.shape() != (antennas[r].rx, antennas[l].tx) {
                    return Err(Error::Dimension(format!(
                        "H_{l}{r} has shape {:?}, expected ({}, {})",
                        h.shape(),
                        antennas[r].rx,
                        antennas[l].tx
                    )));
                }
            }
        }
        check_finite(gains.iter().flat_map(|h| h.iter()))?;
        check_budgets(&budgets, k)?;
        Ok(Self { antennas, gains, budgets })
    }

    pub fn random(antennas: Vec<Antennas>, seed: u64) -> Result<Self> {
        let k = antennas.len();
        if k == 0 || antennas.iter().any(|a| a.tx == 0 || a.rx == 0) {
            return Err(Error::Dimension("need K >= 1 and antenna counts >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gains = Vec::with_capacity(k * k);
        for l in 0..k {
            for r in 0..k {
                let (rows, cols) = (antennas[r].rx, antennas[l].tx);
                let mut h = CMatrix::zeros(rows, cols);
                for i in 0..rows {
                    for j in 0..cols {
                        h[(i, j)] = cn01(&mut rng);
                    }
                }
                gains.push(h);
            }
        }
        Self::new(antennas, gains, vec![1.0; k])
    }

    /// `K` users with `m` transmit and `n` receive antennas each.
    pub fn random_uniform(users: usize, m: usize, n: usize, seed: u64) -> Result<Self> {
        Self::random(vec![Antennas::new(m, n); users], seed)
    }

    pub fn users(&self) -> usize {
        self.antennas.len()
    }
    pub fn antennas(&self) -> &[Antennas] {
        &self.antennas
    }
    pub fn gain(&self, from: usize, to: usize) -> &CMatrix {
        &self.gains[from * self.users() + to]
    }
    pub fn gains(&self) -> &[CMatrix] {
        &self.gains
    }
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        check_budgets(&budgets, self.users())?;
        self.budgets = budgets;
        Ok(self)
    }
    pub fn with_uniform_budget(self, budget: f64) -> Result<Self> {
        let k = self.users();
        self.with_budgets(vec![budget; k])
    }
}

/// Power allocation of `K` users over `N` tones, stored user-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMatrix {
    users: usize,
    tones: usize,
    data: Vec<f64>,
}

impl PowerMatrix {
    pub fn zeros(users: usize, tones: usize) -> Self {
        Self { users, tones, data: vec![0.0; users * tones] }
    }

    /// Each user spreads its budget evenly over all tones.
    pub fn uniform(budgets: &[f64], tones: usize) -> Self {
        let data = budgets.iter().flat_map(|&b| std::iter::repeat_n(b / tones as f64, tones)).collect();
        Self { users: budgets.len(), tones, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let users = rows.len();
        let tones = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != tones) {
            return Err(Error::Dimension("ragged power matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("powers must be finite and nonnegative".into()));
        }
        Ok(Self { users, tones, data })
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn tones(&self) -> usize {
        self.tones
    }
    #[inline]
    pub fn get(&self, user: usize, tone: usize) -> f64 {
        self.data[user * self.tones + tone]
    }
    #[inline]
    pub fn set(&mut self, user: usize, tone: usize, value: f64) {
        self.data[user * self.tones + tone] = value;
    }
    pub fn user(&self, user: usize) -> &[f64] {
        &self.data[user * self.tones..(user + 1) * self.tones]
    }
    pub fn user_mut(&mut self, user: usize) -> &mut [f64] {
        &mut self.data[user * self.tones..(user + 1) * self.tones]
    }
    pub fn user_total(&self, user: usize) -> f64 {
        self.user(user).iter().sum()
    }
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.users).map(|k| self.user(k).to_vec()).collect()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest relative budget violation `max_k (sum_n p_k^n - budget_k) / budget_k`
    /// (negative when all users have slack).
    pub fn budget_violation(&self, budgets: &[f64]) -> f64 {
        (0..self.users)
            .map(|k| (self.user_total(k) - budgets[k]) / budgets[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entrywise infinity-norm distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Transmit / receive beamformers and optional MSE weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// `M_k x d_k` transmit beamformers.
    pub v: Vec<CMatrix>,
    /// `N_k x d_k` receive beamformers.
    pub u: Vec<CMatrix>,
    /// `d_k x d_k` Hermitian positive-definite weights.
    pub w: Option<Vec<CMatrix>>,
}

impl BeamformerSet {
    pub fn streams(&self) -> Vec<usize> {
        self.v.iter().map(|v| v.ncols()).collect()
    }

    /// Transmit covariances `V_k V_kᴴ`.
    pub fn covariances(&self) -> Vec<CMatrix> {
        self.v.iter().map(|v| v * v.adjoint()).collect()
    }

    pub fn transmit_powers(&self) -> Vec<f64> {
        self.v.iter().map(crate::linalg::power_of).collect()
    }
}

/// Shape of a random instance to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelDims {
    Scalar { users: usize },
    Parallel { users: usize, tones: usize },
    Miso { users: usize, antennas: usize },
    Mimo { antennas: Vec<Antennas> },
}

/// Seeded random CN(0, 1) instance with unit budgets.
pub fn gen_channel(dims: &ChannelDims, seed: u64) -> Result<Channel> {
    Ok(match dims {
        ChannelDims::Scalar { users } => Channel::Scalar(ScalarChannel::random(*users, seed)?),
        ChannelDims::Parallel { users, tones } => Channel::Parallel(ParallelChannel::random(*users, *tones, seed)?),
        ChannelDims::Miso { users, antennas } => Channel::Miso(MisoChannel::random(*users, *antennas, seed)?),
        ChannelDims::Mimo { antennas } => Channel::Mimo(MimoChannel::random(antennas.clone(), seed)?),
    })
}

/// One CN(0, 1) draw.
pub(crate) fn cn01(rng: &mut ChaCha8Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Budget for a given SNR in dB under unit noise.
pub fn snr_db_to_budget(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = ScalarChannel::random(2, 7).unwrap();
        let b = ScalarChannel::random(2, 7).unwrap();
        let bits = |c: &ScalarChannel| c.gains().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&ScalarChannel::random(2, 8).unwrap()));
    }

    #[test]
    fn unit_complex_variance() {
        let ch = ParallelChannel::random(10, 32, 1).unwrap();
        let n = ch.gains().len() as f64;
        let mean = ch.gains().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((mean - 1.0).abs() < 0.1, "mean |H|^2 = {mean}");
        let re_var = ch.gains().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        assert!((re_var - 0.5).abs() < 0.1);
    }

    #[test]
    fn mimo_shapes() {
        let ch = MimoChannel::random_uniform(3, 3, 3, 3).unwrap();
        assert_eq!(ch.gains().len(), 9);
        assert!(ch.gains().iter().all(|h| h.shape() == (3, 3)));

        let het = MimoChannel::random(vec![Antennas::new(2, 3), Antennas::new(4, 1)], 5).unwrap();
        assert_eq!(het.gain(0, 1).shape(), (1, 2));
        assert_eq!(het.gain(1, 0).shape(), (3, 4));
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(matches!(ScalarChannel::random(0, 1), Err(Error::Dimension(_))));
        assert!(matches!(ParallelChannel::random(2, 0, 1), Err(Error::Dimension(_))));
        assert!(matches!(MisoChannel::random(2, 0, 1), Err(Error::Dimension(_))));
        assert!(matches!(
            gen_channel(&ChannelDims::Mimo { antennas: vec![Antennas::new(0, 1)] }, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn budgets_must_be_positive() {
        let ch = ScalarChannel::random(2, 1).unwrap();
        assert!(ch.clone().with_budgets(vec![1.0, 0.0]).is_err());
        assert!(ch.clone().with_budgets(vec![1.0, f64::NAN]).is_err());
        assert!(ch.with_budgets(vec![1.0]).is_err());
    }

    #[test]
    fn snr_mapping() {
        assert!((snr_db_to_budget(10.0) - 10.0).abs() < 1e-12);
        assert!((snr_db_to_budget(0.0) - 1.0).abs() < 1e-15);
    }
}
