use num_complex::Complex64;

use super::{Antennas, BeamformerSet, MimoChannel, MisoChannel, ParallelChannel, PowerMatrix, ScalarChannel};
use crate::linalg::{check_psd, log2_det_hpd};
use crate::{CMatrix, CVector, Error, Result};

fn check_powers(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::Dimension(format!("expected {k} powers, got {}", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("powers must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Interference plus noise seen by receiver `k`: `1 + sum_{l != k} |H_lk|^2 p_l`.
pub fn scalar_interference(ch: &ScalarChannel, p: &[f64], k: usize) -> f64 {
    1.0 + (0..ch.users()).filter(|&l| l != k).map(|l| ch.power_gain(l, k) * p[l]).sum::<f64>()
}

pub fn sinr_scalar(ch: &ScalarChannel, p: &[f64]) -> Result<Vec<f64>> {
    check_powers(p, ch.users())?;
    Ok((0..ch.users())
        .map(|k| ch.power_gain(k, k) * p[k] / scalar_interference(ch, p, k))
        .collect())
}

pub fn rate_scalar(ch: &ScalarChannel, p: &[f64]) -> Result<Vec<f64>> {
    Ok(sinr_scalar(ch, p)?.into_iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect())
}

fn check_power_matrix(ch: &ParallelChannel, p: &PowerMatrix) -> Result<()> {
    if p.users() != ch.users() || p.tones() != ch.tones() {
        return Err(Error::Dimension(format!(
            "power matrix is {}x{}, channel is {}x{}",
            p.users(),
            p.tones(),
            ch.users(),
            ch.tones()
        )));
    }
    Ok(())
}

/// `1 + sum_{l != k} |H^n_lk|^2 p^n_l` on one tone.
#[inline]
pub fn parallel_interference(ch: &ParallelChannel, p: &PowerMatrix, k: usize, n: usize) -> f64 {
    let mut acc = 1.0;
    for l in 0..ch.users() {
        if l != k {
            acc += ch.power_gain(n, l, k) * p.get(l, n);
        }
    }
    acc
}

/// Per-user, per-tone SINRs indexed `[user][tone]`.
pub fn sinr_parallel(ch: &ParallelChannel, p: &PowerMatrix) -> Result<Vec<Vec<f64>>> {
    check_power_matrix(ch, p)?;
    Ok((0..ch.users())
        .map(|k| {
            (0..ch.tones())
                .map(|n| ch.power_gain(n, k, k) * p.get(k, n) / parallel_interference(ch, p, k, n))
                .collect()
        })
        .collect())
}

pub fn rate_parallel(ch: &ParallelChannel, p: &PowerMatrix) -> Result<Vec<f64>> {
    Ok(sinr_parallel(ch, p)?
        .into_iter()
        .map(|tones| tones.iter().map(|s| s.ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
        .collect())
}

/// `sum_k weights_k R_k` on a parallel channel.
pub fn weighted_sum_rate_parallel(ch: &ParallelChannel, p: &PowerMatrix, weights: &[f64]) -> Result<f64> {
    Ok(rate_parallel(ch, p)?.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// `h v` for a row vector `h` stored as its entries.
#[inline]
pub(crate) fn row_times(h: &CVector, v: &CVector) -> Complex64 {
    h.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

fn check_miso_beams(ch: &MisoChannel, v: &[CVector]) -> Result<()> {
    if v.len() != ch.users() {
        return Err(Error::Dimension(format!("expected {} beamformers", ch.users())));
    }
    if v.iter().any(|x| x.len() != ch.antennas()) {
        return Err(Error::Dimension(format!("beamformers must have length {}", ch.antennas())));
    }
    Ok(())
}

pub fn sinr_miso(ch: &MisoChannel, v: &[CVector]) -> Result<Vec<f64>> {
    check_miso_beams(ch, v)?;
    let k = ch.users();
    Ok((0..k)
        .map(|r| {
            let signal = row_times(ch.gain(r, r), &v[r]).norm_sqr();
            let interference: f64 =
                (0..k).filter(|&l| l != r).map(|l| row_times(ch.gain(l, r), &v[l]).norm_sqr()).sum();
            signal / (1.0 + interference)
        })
        .collect())
}

pub fn rate_miso(ch: &MisoChannel, v: &[CVector]) -> Result<Vec<f64>> {
    Ok(sinr_miso(ch, v)?.into_iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect())
}

fn check_covariances(ch: &MimoChannel, q: &[CMatrix]) -> Result<()> {
    if q.len() != ch.users() {
        return Err(Error::Dimension(format!("expected {} covariances", ch.users())));
    }
    for (k, (qk, a)) in q.iter().zip(ch.antennas()).enumerate() {
        if qk.shape() != (a.tx, a.tx) {
            return Err(Error::Dimension(format!("Q_{k} must be {}x{}", a.tx, a.tx)));
        }
        check_psd(qk)?;
    }
    Ok(())
}

/// Received covariance at `k` from the users selected by `include`, plus
/// identity noise.
fn received_covariance(ch: &MimoChannel, q: &[CMatrix], k: usize, include: impl Fn(usize) -> bool) -> CMatrix {
    let nk = ch.antennas()[k].rx;
    let mut acc = CMatrix::identity(nk, nk);
    for l in (0..ch.users()).filter(|&l| include(l)) {
        let h = ch.gain(l, k);
        acc += h * &q[l] * h.adjoint();
    }
    acc
}

/// `R_k = log2 det(I + H_kk Q_k H_kkᴴ (I + sum_{l != k} H_lk Q_l H_lkᴴ)^-1)`,
/// computed as the difference of two Cholesky log-determinants so that the
/// interference covariance is never inverted explicitly.
pub fn rate_mimo(ch: &MimoChannel, q: &[CMatrix]) -> Result<Vec<f64>> {
    check_covariances(ch, q)?;
    (0..ch.users())
        .map(|k| {
            let noise = received_covariance(ch, q, k, |l| l != k);
            let total = received_covariance(ch, q, k, |_| true);
            Ok((log2_det_hpd(&total)? - log2_det_hpd(&noise)?).max(0.0))
        })
        .collect()
}

/// Rates achieved by transmit beamformers `V_k` (covariances `V_k V_kᴴ`).
pub fn rate_from_beamformers(ch: &MimoChannel, v: &[CMatrix]) -> Result<Vec<f64>> {
    let q: Vec<CMatrix> = v.iter().map(|vk| vk * vk.adjoint()).collect();
    rate_mimo(ch, &q)
}

/// Per-stream SINR with linear receivers `U_k`. Stream `s` of user `k` treats
/// every other stream, including the user's own, as interference:
/// `|u_ksᴴ H_kk v_ks|^2 / (||u_ks||^2 + sum_{(l,j) != (k,s)} |u_ksᴴ H_lk v_lj|^2)`.
pub fn sinr_mimo_stream(ch: &MimoChannel, bf: &BeamformerSet) -> Result<Vec<Vec<f64>>> {
    let kk = ch.users();
    if bf.u.len() != kk || bf.v.len() != kk {
        return Err(Error::Dimension(format!("expected {kk} transmit and receive beamformers")));
    }
    for (k, a) in ch.antennas().iter().enumerate() {
        let (u, v) = (&bf.u[k], &bf.v[k]);
        if u.nrows() != a.rx || v.nrows() != a.tx || u.ncols() != v.ncols() {
            return Err(Error::Dimension(format!("beamformer shapes of user {k} do not match")));
        }
    }
    Ok((0..kk)
        .map(|k| {
            // cross[l] = U_kᴴ H_lk V_l, a d_k x d_l matrix.
            let cross: Vec<CMatrix> = (0..kk).map(|l| bf.u[k].adjoint() * ch.gain(l, k) * &bf.v[l]).collect();
            (0..bf.u[k].ncols())
                .map(|s| {
                    let noise = bf.u[k].column(s).norm_squared();
                    let mut interference = 0.0;
                    for (l, c) in cross.iter().enumerate() {
                        for j in 0..c.ncols() {
                            if (l, j) != (k, s) {
                                interference += c[(s, j)].norm_sqr();
                            }
                        }
                    }
                    cross[k][(s, s)].norm_sqr() / (noise + interference)
                })
                .collect()
        })
        .collect())
}

/// Diagonal MIMO channel whose `n`-th antenna carries tone `n` of `ch`.
pub fn embed_parallel_as_mimo(ch: &ParallelChannel) -> MimoChannel {
    let (k, n) = (ch.users(), ch.tones());
    let mut gains = Vec::with_capacity(k * k);
    for l in 0..k {
        for r in 0..k {
            let mut h = CMatrix::zeros(n, n);
            for t in 0..n {
                h[(t, t)] = ch.gain(t, l, r);
            }
            gains.push(h);
        }
    }
    MimoChannel::new(vec![Antennas::new(n, n); k], gains, ch.budgets().to_vec()).expect("valid by construction")
}

/// Diagonal covariances `diag(p_k^1, ..., p_k^N)`.
pub fn diagonal_covariances(p: &PowerMatrix) -> Vec<CMatrix> {
    (0..p.users())
        .map(|k| {
            let d = nalgebra::DVector::from_iterator(p.tones(), p.user(k).iter().map(|&x| Complex64::new(x, 0.0)));
            CMatrix::from_diagonal(&d)
        })
        .collect()
}

impl BeamformerSet {
    /// Evaluates the achieved rates on `ch`.
    pub fn rates(&self, ch: &MimoChannel) -> Result<Vec<f64>> {
        rate_from_beamformers(ch, &self.v)
    }
}
