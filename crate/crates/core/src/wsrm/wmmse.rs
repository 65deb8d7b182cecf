use super::{bisect_decreasing, check_weights, StopRule};
use crate::channels::{rate_from_beamformers, weighted_sum_rate_parallel, BeamformerSet, MimoChannel, ParallelChannel, PowerMatrix};
use crate::linalg::{hermitian_eigh, hermitian_part, log2_det_hpd, solve_hpd};
use crate::{CMatrix, Complex64, Error, Result, SolverTrace, Termination};

/// Added to `I - Uᴴ H V` when it is numerically singular (a stream whose
/// MMSE is ~0) before inverting it.
const MSE_GUARD: f64 = 1e-12;

/// Weighted-MSE block descent on the parallel channel with one complex
/// stream per tone.
///
/// Each [`step`](Self::step) updates `v` from the current `u, w`, then
/// refreshes `u` (MMSE receiver) and `w = 1 / e` for the new `v`. The
/// returned value is `|sum log w - sum log w'|` between the two refreshes.
#[derive(Debug, Clone)]
pub struct WmmseParallel<'a> {
    ch: &'a ParallelChannel,
    weights: Vec<f64>,
    v: Vec<Complex64>,
    u: Vec<Complex64>,
    w: Vec<f64>,
    log_w: f64,
}

impl<'a> WmmseParallel<'a> {
    /// Starts from `init` powers (real, nonnegative amplitudes), or equal
    /// power `budget / N` per tone.
    pub fn new(ch: &'a ParallelChannel, weights: &[f64], init: Option<&PowerMatrix>) -> Result<Self> {
        check_weights(weights, ch.users())?;
        let p = init.cloned().unwrap_or_else(|| PowerMatrix::uniform(ch.budgets(), ch.tones()));
        if p.users() != ch.users() || p.tones() != ch.tones() {
            return Err(Error::Dimension("initial powers do not match the channel".into()));
        }
        let v = p.as_slice().iter().map(|&x| Complex64::new(x.max(0.0).sqrt(), 0.0)).collect();
        let mut s = Self { ch, weights: weights.to_vec(), v, u: Vec::new(), w: Vec::new(), log_w: 0.0 };
        s.refresh_receivers();
        Ok(s)
    }

    fn idx(&self, k: usize, n: usize) -> usize {
        k * self.ch.tones() + n
    }

    fn received_power(&self, k: usize, n: usize) -> f64 {
        1.0 + (0..self.ch.users()).map(|l| self.ch.power_gain(n, l, k) * self.v[self.idx(l, n)].norm_sqr()).sum::<f64>()
    }

    fn refresh_receivers(&mut self) {
        let (kk, nn) = (self.ch.users(), self.ch.tones());
        let mut u = vec![Complex64::default(); kk * nn];
        let mut w = vec![0.0; kk * nn];
        for k in 0..kk {
            for n in 0..nn {
                let i = self.idx(k, n);
                let hv = self.ch.gain(n, k, k) * self.v[i];
                u[i] = hv / self.received_power(k, n);
                // 1 - conj(u) h v is the MMSE, real and in (0, 1].
                let mse = 1.0 - (u[i].conj() * hv).re;
                w[i] = 1.0 / mse.max(MSE_GUARD);
            }
        }
        self.log_w = w.iter().map(|x| x.ln()).sum();
        self.u = u;
        self.w = w;
    }

    fn update_transmitters(&mut self) {
        let (kk, nn) = (self.ch.users(), self.ch.tones());
        let mut v = vec![Complex64::default(); kk * nn];
        for k in 0..kk {
            let mut num = Vec::with_capacity(nn);
            let mut den = Vec::with_capacity(nn);
            for n in 0..nn {
                let i = self.idx(k, n);
                num.push(self.weights[k] * self.ch.gain(n, k, k).conj() * self.u[i] * self.w[i]);
                den.push(
                    (0..kk)
                        .map(|l| {
                            let j = self.idx(l, n);
                            self.weights[l] * self.ch.power_gain(n, k, l) * self.u[j].norm_sqr() * self.w[j]
                        })
                        .sum::<f64>(),
                );
            }
            let power = |lambda: f64| -> f64 {
                num.iter().zip(&den).map(|(a, d)| if a.norm_sqr() == 0.0 { 0.0 } else { a.norm_sqr() / (d + lambda).powi(2) }).sum()
            };
            let budget = self.ch.budgets()[k];
            let lambda = if power(0.0) <= budget {
                0.0
            } else {
                let hi = (num.iter().map(|a| a.norm_sqr()).sum::<f64>() / budget).sqrt();
                bisect_decreasing(power, budget, hi)
            };
            for n in 0..nn {
                let a = num[n];
                v[self.idx(k, n)] = if a.norm_sqr() == 0.0 { Complex64::default() } else { a / (den[n] + lambda) };
            }
        }
        self.v = v;
    }

    pub fn step(&mut self) -> f64 {
        let before = self.log_w;
        self.update_transmitters();
        self.refresh_receivers();
        (self.log_w - before).abs()
    }

    pub fn powers(&self) -> PowerMatrix {
        let nn = self.ch.tones();
        PowerMatrix::from_rows(
            (0..self.ch.users()).map(|k| self.v[k * nn..(k + 1) * nn].iter().map(|z| z.norm_sqr()).collect()).collect(),
        )
        .expect("rows have equal length")
    }

    pub fn weighted_sum_rate(&self) -> Result<f64> {
        weighted_sum_rate_parallel(self.ch, &self.powers(), &self.weights)
    }

    /// `sum_{k,n} ln w^n_k` at the current receivers.
    pub fn log_weight_sum(&self) -> f64 {
        self.log_w
    }

    /// Transmit coefficients `v^n_k`, user-major.
    pub fn transmit(&self) -> &[Complex64] {
        &self.v
    }

    /// Receive coefficients `u^n_k`, user-major.
    pub fn receive(&self) -> &[Complex64] {
        &self.u
    }

    /// MSE weights `w^n_k`, user-major.
    pub fn mse_weights(&self) -> &[f64] {
        &self.w
    }
}

/// Runs [`WmmseParallel`] from equal power until the log-weight change is at
/// most `stop.epsilon`. The objective history is the weighted sum rate.
pub fn wmmse_parallel(ch: &ParallelChannel, weights: &[f64], stop: &StopRule) -> Result<SolverTrace<PowerMatrix>> {
    run(WmmseParallel::new(ch, weights, None)?, stop, |s| s.weighted_sum_rate(), |s| s.powers(), WmmseParallel::step)
}

fn run<S, T>(
    mut state: S,
    stop: &StopRule,
    objective: impl Fn(&S) -> Result<f64>,
    snapshot: impl Fn(&S) -> T,
    step: impl Fn(&mut S) -> f64,
) -> Result<SolverTrace<T>> {
    let mut trace = SolverTrace::new(objective(&state)?, snapshot(&state));
    for _ in 0..stop.max_iter {
        let change = step(&mut state);
        trace.push(objective(&state)?);
        trace.residual_history.push(change);
        if change <= stop.epsilon {
            return Ok(trace.finish(snapshot(&state), Termination::Converged));
        }
    }
    Ok(trace.finish(snapshot(&state), Termination::MaxIterations))
}

/// Starting transmit beamformers for [`WmmseMimo`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MimoInit {
    /// Leading right singular vectors of the direct channel with equal power
    /// `budget / d` per stream.
    #[default]
    Svd,
    /// The first `d` standard basis vectors with equal power `budget / d`.
    Identity,
    Given(Vec<CMatrix>),
}

/// Weighted-MSE block descent on the MIMO channel with `d_k` streams per
/// user. Same step structure as [`WmmseParallel`], with
/// `U_k = (sum_l H_lk V_l V_lᴴ H_lkᴴ + I)^-1 H_kk V_k`, `W_k = (I - U_kᴴ H_kk V_k)^-1`
/// and `V_k = mu_k (A_k + lambda I)^-1 H_kkᴴ U_k W_k`, where
/// `A_k = sum_l mu_l H_klᴴ U_l W_l U_lᴴ H_kl`.
#[derive(Debug, Clone)]
pub struct WmmseMimo<'a> {
    ch: &'a MimoChannel,
    weights: Vec<f64>,
    v: Vec<CMatrix>,
    u: Vec<CMatrix>,
    w: Vec<CMatrix>,
    log_det_w: f64,
}

impl<'a> WmmseMimo<'a> {
    pub fn new(ch: &'a MimoChannel, weights: &[f64], streams: &[usize], init: &MimoInit) -> Result<Self> {
        check_weights(weights, ch.users())?;
        if streams.len() != ch.users() {
            return Err(Error::Dimension(format!("{} stream counts for {} users", streams.len(), ch.users())));
        }
        for (k, (&d, a)) in streams.iter().zip(ch.antennas()).enumerate() {
            if d == 0 || d > a.tx.min(a.rx) {
                return Err(Error::Dimension(format!(
                    "user {k}: {d} streams with {} transmit and {} receive antennas",
                    a.tx, a.rx
                )));
            }
        }
        let v: Vec<CMatrix> = match init {
            MimoInit::Svd => (0..ch.users()).map(|k| svd_init(ch.gain(k, k), streams[k], ch.budgets()[k])).collect(),
            MimoInit::Identity => (0..ch.users())
                .map(|k| {
                    let m = ch.antennas()[k].tx;
                    let scale = (ch.budgets()[k] / streams[k] as f64).sqrt();
                    CMatrix::identity(m, streams[k]).scale(scale)
                })
                .collect(),
            MimoInit::Given(v) => {
                for (k, vk) in v.iter().enumerate() {
                    if vk.nrows() != ch.antennas()[k].tx || vk.ncols() != streams[k] {
                        return Err(Error::Dimension(format!("initial beamformer of user {k} has the wrong shape")));
                    }
                }
                if v.len() != ch.users() {
                    return Err(Error::Dimension("one initial beamformer per user is required".into()));
                }
                v.clone()
            }
        };
        let mut s = Self { ch, weights: weights.to_vec(), v, u: Vec::new(), w: Vec::new(), log_det_w: 0.0 };
        s.refresh_receivers()?;
        Ok(s)
    }

    fn refresh_receivers(&mut self) -> Result<()> {
        let kk = self.ch.users();
        let mut u = Vec::with_capacity(kk);
        let mut w = Vec::with_capacity(kk);
        let mut log_det = 0.0;
        for k in 0..kk {
            let rx = self.ch.antennas()[k].rx;
            let mut cov = CMatrix::identity(rx, rx);
            for l in 0..kk {
                let hv = self.ch.gain(l, k) * &self.v[l];
                cov += &hv * hv.adjoint();
            }
            let hv = self.ch.gain(k, k) * &self.v[k];
            let uk = solve_hpd(&cov, &hv)?;
            let d = self.v[k].ncols();
            let mut mse = hermitian_part(&(CMatrix::identity(d, d) - uk.adjoint() * &hv));
            let ld = match log2_det_hpd(&mse) {
                Ok(x) => x,
                Err(_) => {
                    mse += CMatrix::identity(d, d).scale(MSE_GUARD);
                    log2_det_hpd(&mse)?
                }
            };
            log_det -= ld * std::f64::consts::LN_2;
            w.push(hermitian_part(&solve_hpd(&mse, &CMatrix::identity(d, d))?));
            u.push(uk);
        }
        self.u = u;
        self.w = w;
        self.log_det_w = log_det;
        Ok(())
    }

    fn update_transmitters(&mut self) {
        let kk = self.ch.users();
        let uwu: Vec<CMatrix> = (0..kk).map(|l| &self.u[l] * &self.w[l] * self.u[l].adjoint()).collect();
        let v = (0..kk)
            .map(|k| {
                let m = self.ch.antennas()[k].tx;
                let mut a = CMatrix::zeros(m, m);
                for l in 0..kk {
                    let h = self.ch.gain(k, l);
                    a += (h.adjoint() * &uwu[l] * h).scale(self.weights[l]);
                }
                let b = (self.ch.gain(k, k).adjoint() * &self.u[k] * &self.w[k]).scale(self.weights[k]);
                let (vals, q) = hermitian_eigh(&a);
                let c = q.adjoint() * &b;
                let rows: Vec<f64> = (0..m).map(|i| c.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
                let vals: Vec<f64> = vals.into_iter().map(|x| x.max(0.0)).collect();
                let power = |lambda: f64| -> f64 {
                    rows.iter().zip(&vals).map(|(r, e)| if *r == 0.0 { 0.0 } else { r / (e + lambda).powi(2) }).sum()
                };
                let budget = self.ch.budgets()[k];
                let lambda = if power(0.0) <= budget {
                    0.0
                } else {
                    bisect_decreasing(power, budget, (rows.iter().sum::<f64>() / budget).sqrt())
                };
                let mut scaled = c;
                for i in 0..m {
                    let f = if rows[i] == 0.0 { 0.0 } else { 1.0 / (vals[i] + lambda) };
                    scaled.row_mut(i).scale_mut(f);
                }
                q * scaled
            })
            .collect();
        self.v = v;
    }

    pub fn step(&mut self) -> Result<f64> {
        let before = self.log_det_w;
        self.update_transmitters();
        self.refresh_receivers()?;
        Ok((self.log_det_w - before).abs())
    }

    /// `sum_k ln det W_k` at the current receivers.
    pub fn log_det_weight_sum(&self) -> f64 {
        self.log_det_w
    }

    pub fn weighted_sum_rate(&self) -> Result<f64> {
        let rates = rate_from_beamformers(self.ch, &self.v)?;
        Ok(rates.iter().zip(&self.weights).map(|(r, w)| r * w).sum())
    }

    pub fn beamformers(&self) -> BeamformerSet {
        BeamformerSet { v: self.v.clone(), u: self.u.clone(), w: Some(self.w.clone()) }
    }
}

fn svd_init(h: &CMatrix, d: usize, budget: f64) -> CMatrix {
    let (_, vecs) = hermitian_eigh(&(h.adjoint() * h));
    let m = vecs.ncols();
    let mut v = CMatrix::zeros(m, d);
    for j in 0..d {
        v.set_column(j, &vecs.column(m - 1 - j));
    }
    v.scale((budget / d as f64).sqrt())
}

/// Runs [`WmmseMimo`] until `|sum ln det W - sum ln det W'| <= stop.epsilon`.
pub fn wmmse_mimo(
    ch: &MimoChannel,
    weights: &[f64],
    streams: &[usize],
    init: &MimoInit,
    stop: &StopRule,
) -> Result<SolverTrace<BeamformerSet>> {
    let mut state = WmmseMimo::new(ch, weights, streams, init)?;
    let mut trace = SolverTrace::new(state.weighted_sum_rate()?, state.beamformers());
    for _ in 0..stop.max_iter {
        let change = state.step()?;
        trace.push(state.weighted_sum_rate()?);
        trace.residual_history.push(change);
        if change <= stop.epsilon {
            return Ok(trace.finish(state.beamformers(), Termination::Converged));
        }
    }
    Ok(trace.finish(state.beamformers(), Termination::MaxIterations))
}
