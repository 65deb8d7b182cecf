use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channels::{rate_miso, row_times, MisoChannel};
use crate::utilities::UtilitySpec;
use crate::{CVector, Complex64, Error, Result, SolverTrace, Termination};

/// Backtracking parameters: accept step `a` once the gain is at least
/// `c * a * <grad, d>`, otherwise shrink `a` by `shrink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Armijo {
    pub c: f64,
    pub shrink: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Self { c: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcaOptions {
    pub armijo: Armijo,
    /// Stop once every user's projected-gradient direction is shorter than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CcaOptions {
    fn default() -> Self {
        Self { armijo: Armijo::default(), tol: 1e-6, max_iter: 1000 }
    }
}

/// Maximum-ratio beams `sqrt(budget) h_kkᴴ / ||h_kk||` at full power.
pub fn miso_mrt(ch: &MisoChannel) -> Vec<CVector> {
    (0..ch.users())
        .map(|k| {
            let h = ch.gain(k, k);
            let norm = h.norm();
            let amp = ch.budgets()[k].sqrt();
            if norm == 0.0 {
                let mut v = CVector::zeros(ch.antennas());
                v[0] = Complex64::new(amp, 0.0);
                v
            } else {
                h.map(|z| z.conj()).scale(amp / norm)
            }
        })
        .collect()
}

/// Gradient of the utility with respect to each beam, with the real and
/// imaginary parts of `v_j` as independent coordinates (returned packed as
/// a complex vector, real part first).
///
/// With `S_k`, `I_k` the received signal and interference powers,
/// `dR_k/dv_j = 2 h_jkᴴ h_jk v_j / ln2 * (1 / (1 + S_k + I_k) - [j != k] / (1 + I_k))`.
pub fn cca_gradient(ch: &MisoChannel, spec: &UtilitySpec, v: &[CVector]) -> Result<Vec<CVector>> {
    let rates = rate_miso(ch, v)?;
    let marg = spec.marginals(&rates)?;
    let kk = ch.users();
    // received[j][k] = h_jk v_j
    let received: Vec<Vec<Complex64>> =
        (0..kk).map(|j| (0..kk).map(|k| row_times(ch.gain(j, k), &v[j])).collect()).collect();
    let (total, interference): (Vec<f64>, Vec<f64>) = (0..kk)
        .map(|k| {
            let i: f64 = (0..kk).filter(|&j| j != k).map(|j| received[j][k].norm_sqr()).sum();
            (1.0 + i + received[k][k].norm_sqr(), 1.0 + i)
        })
        .unzip();
    Ok((0..kk)
        .map(|j| {
            let mut g = CVector::zeros(ch.antennas());
            for k in 0..kk {
                let mut coeff = 1.0 / total[k];
                if j != k {
                    coeff -= 1.0 / interference[k];
                }
                let s = 2.0 * marg[k] * coeff / LN_2;
                // h_jkᴴ (h_jk v_j)
                let hv = received[j][k];
                g.iter_mut().zip(ch.gain(j, k).iter()).for_each(|(gi, h)| *gi += h.conj() * hv * s);
            }
            g
        })
        .collect())
}

fn project_ball(x: &CVector, budget: f64) -> CVector {
    let n2 = x.norm_squared();
    if n2 <= budget {
        x.clone()
    } else {
        x.scale((budget / n2).sqrt())
    }
}

fn real_dot(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Projection directions `Π(v_k + ∇_k U) - v_k` for every user at `v`.
fn directions(ch: &MisoChannel, spec: &UtilitySpec, v: &[CVector]) -> Result<Vec<CVector>> {
    let g = cca_gradient(ch, spec, v)?;
    Ok((0..ch.users()).map(|k| project_ball(&(&v[k] + &g[k]), ch.budgets()[k]) - &v[k]).collect())
}

/// Cyclic coordinate ascent with gradient projection on the MISO channel.
///
/// One iteration is a sweep over users in index order. User `k` moves along
/// `d_k = Π(v_k + ∇_k U) - v_k` (projection onto its power ball) with a
/// backtracking step, so the utility never decreases. Starts from
/// [`miso_mrt`]. Stops when the largest `||d_k||` evaluated at the end of a
/// sweep drops below `tol`; that value is the residual history.
pub fn cca_miso(ch: &MisoChannel, spec: &UtilitySpec, opts: &CcaOptions) -> Result<SolverTrace<Vec<CVector>>> {
    if !spec.is_smooth() {
        return Err(Error::NonSmooth(spec.name()));
    }
    spec.weights_for(ch.users())?;
    let Armijo { c, shrink } = opts.armijo;
    if !(c > 0.0 && c < 1.0 && shrink > 0.0 && shrink < 1.0) {
        return Err(Error::Parameter("Armijo parameters must lie in (0, 1)".into()));
    }
    let utility = |v: &[CVector]| -> Result<f64> { spec.evaluate(&rate_miso(ch, v)?) };

    let mut v = miso_mrt(ch);
    let mut value = utility(&v)?;
    let mut trace = SolverTrace::new(value, v.clone());
    for _ in 0..opts.max_iter {
        for k in 0..ch.users() {
            let g = cca_gradient(ch, spec, &v)?;
            let d = project_ball(&(&v[k] + &g[k]), ch.budgets()[k]) - &v[k];
            let slope = real_dot(&g[k], &d);
            if slope <= 0.0 {
                continue;
            }
            let mut step = 1.0;
            while step > 1e-20 {
                let mut cand = v.clone();
                cand[k] = &v[k] + d.scale(step);
                // Zero rates leave some utilities undefined; treat as a failed step.
                let cand_value = utility(&cand).unwrap_or(f64::NEG_INFINITY);
                if cand_value >= value + c * step * slope {
                    v = cand;
                    value = cand_value;
                    break;
                }
                step *= shrink;
            }
        }
        trace.push(value);
        let residual = directions(ch, spec, &v)?.iter().map(|d| d.norm()).fold(0.0, f64::max);
        trace.residual_history.push(residual);
        trace.rate_history.push(rate_miso(ch, &v)?);
        if residual < opts.tol {
            return Ok(trace.finish(v, Termination::Converged));
        }
    }
    Ok(trace.finish(v, Termination::MaxIterations))
}
