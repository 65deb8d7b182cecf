//! System utilities of the per-user rates, QoS targets, and a
//! finite-difference gradient used to validate analytic gradients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityKind {
    /// `sum_k mu_k R_k^(1 - alpha) / (1 - alpha)`, `sum_k mu_k ln R_k` at `alpha = 1`.
    AlphaFair { alpha: f64 },
    SumRate,
    ProportionalFair,
    /// `(sum_k 1 / R_k)^-1`.
    Harmonic,
    MinRate,
}

/// A utility family member together with optional per-user weights. Weights
/// scale the separable kinds (sum rate, proportional fair, alpha-fair); the
/// harmonic and min-rate utilities are unweighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl UtilitySpec {
    pub fn new(kind: UtilityKind) -> Result<Self> {
        if let UtilityKind::AlphaFair { alpha } = kind {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(Error::Parameter(format!("alpha must be finite and >= 0, got {alpha}")));
            }
        }
        Ok(Self { kind, weights: None })
    }

    pub fn sum_rate() -> Self {
        Self { kind: UtilityKind::SumRate, weights: None }
    }

    pub fn weighted_sum_rate(weights: Vec<f64>) -> Result<Self> {
        Self::sum_rate().with_weights(weights)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[k])
    }

    /// Weights expanded to `users` entries (ones when unset).
    pub fn weights_for(&self, users: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0; users]),
            Some(w) if w.len() == users => Ok(w.clone()),
            Some(w) => Err(Error::Dimension(format!("{} weights for {users} users", w.len()))),
        }
    }

    /// Differentiable wherever all rates are positive.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, UtilityKind::MinRate)
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn evaluate(&self, rates: &[f64]) -> Result<f64> {
        self.check(rates)?;
        let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
            rates.iter().enumerate().map(|(k, &r)| self.weight(k) * f(r)).sum()
        };
        Ok(match self.kind {
            UtilityKind::SumRate => weighted(&|r| r),
            UtilityKind::ProportionalFair => {
                require_positive(rates)?;
                weighted(&f64::ln)
            }
            UtilityKind::AlphaFair { alpha: 1.0 } => {
                require_positive(rates)?;
                weighted(&f64::ln)
            }
            UtilityKind::AlphaFair { alpha } => {
                if alpha > 1.0 {
                    require_positive(rates)?;
                }
                weighted(&|r| r.powf(1.0 - alpha) / (1.0 - alpha))
            }
            UtilityKind::Harmonic => {
                require_positive(rates)?;
                1.0 / rates.iter().map(|r| 1.0 / r).sum::<f64>()
            }
            UtilityKind::MinRate => rates.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }

    /// `dU/dR_k` for every user.
    pub fn marginals(&self, rates: &[f64]) -> Result<Vec<f64>> {
        self.check(rates)?;
        let per_user = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            rates.iter().enumerate().map(|(k, &r)| self.weight(k) * f(r)).collect()
        };
        Ok(match self.kind {
            UtilityKind::SumRate => per_user(&|_| 1.0),
            UtilityKind::ProportionalFair => {
                require_positive(rates)?;
                per_user(&|r| 1.0 / r)
            }
            UtilityKind::AlphaFair { alpha } => {
                if alpha > 0.0 {
                    require_positive(rates)?;
                }
                per_user(&|r| r.powf(-alpha))
            }
            UtilityKind::Harmonic => {
                require_positive(rates)?;
                let h = 1.0 / rates.iter().map(|r| 1.0 / r).sum::<f64>();
                rates.iter().map(|r| (h / r).powi(2)).collect()
            }
            UtilityKind::MinRate => return Err(Error::NonSmooth(self.name())),
        })
    }

    /// The common rate `c` with `U(c, ..., c) = U(rates)` for unit weights:
    /// arithmetic, geometric and harmonic means for sum rate, proportional
    /// fair and harmonic, the minimum for min rate.
    pub fn equivalent_rate(&self, rates: &[f64]) -> Result<f64> {
        let k = rates.len() as f64;
        let plain = Self { kind: self.kind, weights: None };
        let u = plain.evaluate(rates)?;
        Ok(match self.kind {
            UtilityKind::SumRate => u / k,
            UtilityKind::ProportionalFair => (u / k).exp(),
            UtilityKind::AlphaFair { alpha: 1.0 } => (u / k).exp(),
            UtilityKind::AlphaFair { alpha } => (u * (1.0 - alpha) / k).powf(1.0 / (1.0 - alpha)),
            UtilityKind::Harmonic => u * k,
            UtilityKind::MinRate => u,
        })
    }

    fn check(&self, rates: &[f64]) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != rates.len() {
                return Err(Error::Dimension(format!("{} weights for {} rates", w.len(), rates.len())));
            }
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Domain("rates must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Parameter("weights must be finite and > 0".into()));
    }
    Ok(())
}

fn require_positive(rates: &[f64]) -> Result<()> {
    match rates.iter().position(|&r| r <= 0.0) {
        Some(user) => Err(Error::ZeroRate { user }),
        None => Ok(()),
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityKind::AlphaFair { alpha } => write!(f, "alpha:{alpha}"),
            UtilityKind::SumRate => f.write_str("sum"),
            UtilityKind::ProportionalFair => f.write_str("propfair"),
            UtilityKind::Harmonic => f.write_str("harmonic"),
            UtilityKind::MinRate => f.write_str("minrate"),
        }
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;

    /// Accepts `sum`, `propfair`, `harmonic`, `minrate` and `alpha:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim() {
            "sum" => UtilityKind::SumRate,
            "propfair" => UtilityKind::ProportionalFair,
            "harmonic" => UtilityKind::Harmonic,
            "minrate" => UtilityKind::MinRate,
            other => {
                let value = other.strip_prefix("alpha:").ok_or_else(|| {
                    Error::Parameter(format!(
                        "unknown utility `{other}` (expected sum, propfair, harmonic, minrate or alpha:<value>)"
                    ))
                })?;
                let alpha = value
                    .parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("invalid alpha `{value}`")))?;
                UtilityKind::AlphaFair { alpha }
            }
        };
        Self::new(kind)
    }
}

/// Per-user SINR targets `gamma_k` and/or rate targets `zeta_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QosTargets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<Vec<f64>>,
}

impl QosTargets {
    pub fn sinr(targets: Vec<f64>) -> Result<Self> {
        check_targets(&targets)?;
        Ok(Self { sinr: Some(targets), rate: None })
    }

    pub fn rate(targets: Vec<f64>) -> Result<Self> {
        check_targets(&targets)?;
        Ok(Self { sinr: None, rate: Some(targets) })
    }

    pub fn sinr_targets(&self) -> Result<&[f64]> {
        self.sinr.as_deref().ok_or_else(|| Error::Parameter("no SINR targets given".into()))
    }

    pub fn rate_targets(&self) -> Result<&[f64]> {
        self.rate.as_deref().ok_or_else(|| Error::Parameter("no rate targets given".into()))
    }
}

fn check_targets(t: &[f64]) -> Result<()> {
    if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Parameter("targets must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Central-difference gradient. With `h = None` each coordinate uses
/// `1e-5 * max(1, |x_i|)`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: Option<f64>) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h.unwrap_or(1e-5 * x[i].abs().max(1.0));
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(s: &str) -> UtilitySpec {
        s.parse().unwrap()
    }

    #[test]
    fn sum_of_unit_rates() {
        assert_eq!(spec("sum").evaluate(&[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn alpha_one_limit_brackets_log() {
        let rates = [2.0, 3.0];
        let pf = spec("propfair").evaluate(&rates).unwrap();
        // The alpha-fair family differs from sum ln R by the constant
        // K / (1 - alpha); remove it before comparing.
        let shifted = |a: f64| spec(&format!("alpha:{a}")).evaluate(&rates).unwrap() - 2.0 / (1.0 - a);
        let (lo, hi) = (shifted(1.0 + 1e-6), shifted(1.0 - 1e-6));
        assert!(lo.min(hi) <= pf + 1e-9 && pf <= lo.max(hi) + 1e-9, "{lo} {pf} {hi}");
        assert_relative_eq!(lo, pf, epsilon = 1e-5);
        assert_relative_eq!(spec("alpha:1").evaluate(&rates).unwrap(), pf);
    }

    #[test]
    fn zero_rate_reports_user() {
        assert!(matches!(spec("propfair").evaluate(&[1.0, 0.0]), Err(Error::ZeroRate { user: 1 })));
        assert!(matches!(spec("harmonic").evaluate(&[0.0, 1.0]), Err(Error::ZeroRate { user: 0 })));
        assert!(matches!(spec("alpha:2").evaluate(&[0.0]), Err(Error::ZeroRate { user: 0 })));
    }

    #[test]
    fn parse_errors() {
        assert!("max".parse::<UtilitySpec>().is_err());
        assert!("alpha:x".parse::<UtilitySpec>().is_err());
        assert!("alpha:-1".parse::<UtilitySpec>().is_err());
        assert_eq!(spec("alpha:2.5").kind, UtilityKind::AlphaFair { alpha: 2.5 });
        for s in ["sum", "propfair", "harmonic", "minrate", "alpha:2"] {
            assert_eq!(spec(s).name(), s);
        }
    }

    #[test]
    fn min_rate_marginals_rejected() {
        assert!(matches!(spec("minrate").marginals(&[1.0, 2.0]), Err(Error::NonSmooth(_))));
        assert!(!spec("minrate").is_smooth());
    }

    #[test]
    fn ordering_of_equivalent_rates() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let specs = ["sum", "propfair", "harmonic", "minrate"].map(spec);
        for _ in 0..100 {
            let k = rng.random_range(1..8);
            let rates: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..10.0)).collect();
            let eq: Vec<f64> = specs.iter().map(|s| s.equivalent_rate(&rates).unwrap()).collect();
            for w in eq.windows(2) {
                assert!(w[0] >= w[1] - 1e-12, "{eq:?}");
            }
        }
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + x[1] * x[1] + 4.0;
        let g = numeric_gradient(f, &[1.5, -2.0], None);
        assert_relative_eq!(g[0], 6.0 * 1.5 + 4.0, epsilon = 1e-9);
        assert_relative_eq!(g[1], -3.0 - 4.0, epsilon = 1e-9);
        assert_eq!(numeric_gradient(|_| 7.0, &[1.0, 2.0, 3.0], None), vec![0.0; 3]);
    }

    #[test]
    fn sum_rate_power_gradient() {
        use crate::channels::{rate_scalar, ScalarChannel};
        for seed in 0..10 {
            let ch = ScalarChannel::random(3, seed).unwrap();
            let p = [0.7, 1.3, 0.4];
            let f = |x: &[f64]| rate_scalar(&ch, x).unwrap().iter().sum::<f64>();
            let num = numeric_gradient(f, &p, None);
            for (j, n) in num.iter().enumerate() {
                // d/dp_j of sum_k log2(1 + g_kk p_k / I_k).
                let mut analytic = 0.0;
                for k in 0..3 {
                    let interference: f64 = 1.0 + (0..3).filter(|&l| l != k).map(|l| ch.power_gain(l, k) * p[l]).sum::<f64>();
                    let total = interference + ch.power_gain(k, k) * p[k];
                    let d_total = ch.power_gain(j, k);
                    let d_interference = if j == k { 0.0 } else { ch.power_gain(j, k) };
                    analytic += (d_total / total - d_interference / interference) / std::f64::consts::LN_2;
                }
                assert!((n - analytic).abs() <= 1e-5 * analytic.abs().max(1e-3), "{n} vs {analytic}");
            }
        }
    }

    proptest! {
        #[test]
        fn alpha_zero_is_sum(rates in prop::collection::vec(0.0f64..100.0, 1..10)) {
            let a = spec("alpha:0").evaluate(&rates).unwrap();
            let b = spec("sum").evaluate(&rates).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn monotone_in_each_rate(
            rates in prop::collection::vec(0.01f64..50.0, 1..8),
            idx in 0usize..8,
            bump in 0.0f64..5.0,
            which in 0usize..6,
        ) {
            let s = ["sum", "propfair", "harmonic", "minrate", "alpha:0.5", "alpha:3"][which];
            let s = spec(s);
            let mut up = rates.clone();
            let i = idx % rates.len();
            up[i] += bump;
            prop_assert!(s.evaluate(&up).unwrap() >= s.evaluate(&rates).unwrap() - 1e-12);
        }

        #[test]
        fn marginals_match_differences(
            rates in prop::collection::vec(0.1f64..20.0, 1..6),
            which in 0usize..5,
        ) {
            let s = spec(["sum", "propfair", "harmonic", "alpha:0.5", "alpha:2"][which]);
            let analytic = s.marginals(&rates).unwrap();
            let num = numeric_gradient(|r| s.evaluate(r).unwrap(), &rates, None);
            for (a, n) in analytic.iter().zip(&num) {
                prop_assert!((a - n).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }
}
