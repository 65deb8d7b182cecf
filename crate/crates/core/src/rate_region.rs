//! Two-user rate regions.
//!
//! The boundary of the directly achievable region of a 2-user scalar channel
//! is traced by two edges: user 1 at full power while user 2 sweeps its power,
//! and the reverse. Along each edge `R_2` is an explicit function of `R_1`:
//!
//! - user 1 at full power: `R_2 = log2(1 + g22/g21 (g11 P1 - (2^R1 - 1)) / ((2^R1 - 1)(1 + g12 P1)))`
//! - user 2 at full power: `R_2 = log2(1 + g22 P2 / (1 + g12/g11 (1 + g21 P2)(2^R1 - 1)))`
//!
//! where `g_lk` is the power gain from transmitter `l` to receiver `k`.

use serde::Serialize;

use crate::channels::{rate_miso, rate_scalar, MisoChannel, ParallelChannel, ScalarChannel};
use crate::{CVector, Error, Result};

pub type RatePair = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    /// User 1 at full power, user 2 sweeping.
    User1Full,
    /// User 2 at full power, user 1 sweeping.
    User2Full,
    /// A beamformer pair on the MISO Pareto boundary.
    Beamformer,
}

impl std::fmt::Display for PointLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::User1Full => "user1_full",
            Self::User2Full => "user2_full",
            Self::Beamformer => "beamformer",
        })
    }
}

/// Sampled rate pairs with their origin and the time-sharing hull.
#[derive(Debug, Clone, Serialize)]
pub struct RegionSample {
    pub points: Vec<RatePair>,
    pub labels: Vec<PointLabel>,
    /// Counter-clockwise convex hull of the points, the origin and the two
    /// axis intercepts.
    pub hull: Vec<RatePair>,
}

impl RegionSample {
    fn new(points: Vec<RatePair>, labels: Vec<PointLabel>) -> Self {
        let hull = timeshare_hull(&points);
        Self { points, labels, hull }
    }
}

fn require_two_users(users: usize) -> Result<()> {
    if users != 2 {
        return Err(Error::Dimension(format!("two users required, got {users}")));
    }
    Ok(())
}

fn pair(ch: &ScalarChannel, p1: f64, p2: f64) -> RatePair {
    let r = rate_scalar(ch, &[p1, p2]).expect("two nonnegative powers");
    (r[0], r[1])
}

fn linspace(hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i + 1 == n { hi } else { hi * i as f64 / (n - 1) as f64 })
}

/// Both boundary edges, `grid_size` points each, evaluated directly from the
/// rate formula.
pub fn frontier_2user(ch: &ScalarChannel, grid_size: usize) -> Result<RegionSample> {
    require_two_users(ch.users())?;
    if grid_size < 2 {
        return Err(Error::Parameter("grid size must be at least 2".into()));
    }
    let (b1, b2) = (ch.budgets()[0], ch.budgets()[1]);
    let mut points = Vec::with_capacity(2 * grid_size);
    let mut labels = Vec::with_capacity(2 * grid_size);
    for p2 in linspace(b2, grid_size) {
        points.push(pair(ch, b1, p2));
        labels.push(PointLabel::User1Full);
    }
    for p1 in linspace(b1, grid_size) {
        points.push(pair(ch, p1, b2));
        labels.push(PointLabel::User2Full);
    }
    Ok(RegionSample::new(points, labels))
}

/// `R_2` on the user-1-full-power edge as a function of `R_1`. `None` where
/// the expression is undefined (no cross gain from user 2, `R_1 = 0`, or
/// `R_1` outside the edge).
pub fn edge1_closed_form(ch: &ScalarChannel, r1: f64) -> Option<f64> {
    let (g11, g12, g21, g22) = gains(ch);
    let p1 = ch.budgets()[0];
    let s = r1.exp2() - 1.0;
    if g21 == 0.0 || s <= 0.0 {
        return None;
    }
    let inner = g22 / g21 * (g11 * p1 - s) / (s * (1.0 + g12 * p1));
    (inner >= -1e-12).then(|| inner.max(0.0).ln_1p() / std::f64::consts::LN_2)
}

/// `R_2` on the user-2-full-power edge as a function of `R_1`. `None` when
/// user 1 has no direct gain.
pub fn edge2_closed_form(ch: &ScalarChannel, r1: f64) -> Option<f64> {
    let (g11, g12, g21, g22) = gains(ch);
    let p2 = ch.budgets()[1];
    if g11 == 0.0 {
        return None;
    }
    let s = r1.exp2() - 1.0;
    Some((g22 * p2 / (1.0 + g12 / g11 * (1.0 + g21 * p2) * s)).ln_1p() / std::f64::consts::LN_2)
}

fn gains(ch: &ScalarChannel) -> (f64, f64, f64, f64) {
    (ch.power_gain(0, 0), ch.power_gain(0, 1), ch.power_gain(1, 0), ch.power_gain(1, 1))
}

/// Largest gap between the directly swept edges and the closed-form curves,
/// over sample points where the closed form is defined.
pub fn frontier_cross_check(ch: &ScalarChannel, sample: &RegionSample) -> f64 {
    sample
        .points
        .iter()
        .zip(&sample.labels)
        .filter_map(|(&(r1, r2), label)| {
            let closed = match label {
                PointLabel::User1Full => edge1_closed_form(ch, r1),
                PointLabel::User2Full => edge2_closed_form(ch, r1),
                PointLabel::Beamformer => None,
            }?;
            Some((closed - r2).abs())
        })
        .fold(0.0, f64::max)
}

/// Rates over a `grid x grid` lattice of powers in `[0, P1] x [0, P2]`.
pub fn brute_force_region(ch: &ScalarChannel, grid: usize) -> Result<Vec<RatePair>> {
    require_two_users(ch.users())?;
    if grid < 2 {
        return Err(Error::Parameter("grid size must be at least 2".into()));
    }
    let (b1, b2) = (ch.budgets()[0], ch.budgets()[1]);
    Ok(linspace(b1, grid).flat_map(|p1| linspace(b2, grid).map(move |p2| pair(ch, p1, p2))).collect())
}

/// Points not strictly dominated by any other point, sorted by `R_1`.
pub fn pareto_front(points: &[RatePair]) -> Vec<RatePair> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut front = Vec::new();
    let mut best_r2 = f64::NEG_INFINITY;
    for p in sorted {
        if p.1 > best_r2 {
            front.push(p);
            best_r2 = p.1;
        }
    }
    front.reverse();
    front
}

fn cross(o: RatePair, a: RatePair, b: RatePair) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, monotone chain) of the points together
/// with the origin and the axis intercepts `(max R_1, 0)`, `(0, max R_2)`:
/// the rates reachable by time sharing.
pub fn timeshare_hull(points: &[RatePair]) -> Vec<RatePair> {
    let r1 = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let r2 = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut all: Vec<RatePair> = points.to_vec();
    all.extend([(0.0, 0.0), (r1, 0.0), (0.0, r2)]);
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    all.dedup();
    if all.len() < 3 {
        return all;
    }
    let mut hull: Vec<RatePair> = Vec::with_capacity(2 * all.len());
    for pass in [all.clone(), all.iter().rev().copied().collect()] {
        let start = hull.len();
        for p in pass {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Whether `p` lies inside a counter-clockwise hull, up to `tol` outside any edge.
pub fn hull_contains(hull: &[RatePair], p: RatePair, tol: f64) -> bool {
    let n = hull.len();
    (0..n).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        len == 0.0 || cross(a, b, p) / len >= -tol
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// Every curvature estimate along both edges is below `1e-8`.
    pub convex: bool,
    /// Largest `d^2 R_2 / d R_1^2` found on either edge.
    pub max_curvature: f64,
    /// The printed necessary inequality, with `|H22|` unsquared in the last factor.
    pub necessary_holds: bool,
    /// The same inequality with `|H22|^2` in the last factor.
    pub necessary_holds_squared: bool,
}

/// Left side of the necessary convexity inequality
/// `g22 g12 P1 (1 + g21 P2) - g11 (1 + |H22| P2) < 0`; with `squared` the
/// last factor uses `g22 = |H22|^2` instead of `|H22|`.
pub fn convexity_necessary_lhs(ch: &ScalarChannel, squared: bool) -> f64 {
    let (g11, g12, g21, g22) = gains(ch);
    let (p1, p2) = (ch.budgets()[0], ch.budgets()[1]);
    let h22 = if squared { g22 } else { g22.sqrt() };
    g22 * g12 * p1 * (1.0 + g21 * p2) - g11 * (1.0 + h22 * p2)
}

/// Checks concavity of both boundary edges as functions `R_2(R_1)` with a
/// three-point second difference at `samples` interior points per edge. The
/// step is `1e-3` of the edge's `R_1` range, refined by Richardson
/// extrapolation against half the step.
pub fn convexity_2user(ch: &ScalarChannel, samples: usize) -> Result<ConvexityReport> {
    require_two_users(ch.users())?;
    if samples == 0 {
        return Err(Error::Parameter("at least one sample per edge is required".into()));
    }
    let (b1, b2) = (ch.budgets()[0], ch.budgets()[1]);
    let corner = pair(ch, b1, b2).0;
    let edge1_end = pair(ch, b1, 0.0).0;
    let mut max_curvature = f64::NEG_INFINITY;
    let edges: [(f64, f64, &dyn Fn(f64) -> Option<f64>); 2] = [
        (corner, edge1_end, &|r| edge1_closed_form(ch, r)),
        (0.0, corner, &|r| edge2_closed_form(ch, r)),
    ];
    for (lo, hi, curve) in edges {
        let range = hi - lo;
        if !(range > 1e-12) {
            continue;
        }
        let h = 1e-3 * range;
        let second = |r: f64, h: f64| -> Option<f64> { Some((curve(r + h)? - 2.0 * curve(r)? + curve(r - h)?) / (h * h)) };
        for i in 0..samples {
            let r = lo + h + (range - 2.0 * h) * (i as f64 + 0.5) / samples as f64;
            if let (Some(coarse), Some(fine)) = (second(r, h), second(r, 0.5 * h)) {
                max_curvature = max_curvature.max((4.0 * fine - coarse) / 3.0);
            }
        }
    }
    if max_curvature == f64::NEG_INFINITY {
        max_curvature = 0.0;
    }
    Ok(ConvexityReport {
        convex: max_curvature < 1e-8,
        max_curvature,
        necessary_holds: convexity_necessary_lhs(ch, false) < 0.0,
        necessary_holds_squared: convexity_necessary_lhs(ch, true) < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeEfficiency {
    /// Rates with both users at full power, the unique equilibrium of the
    /// one-shot rate game.
    pub ne_rates: RatePair,
    pub ne_sum: f64,
    /// Best sum rate reachable by time sharing over the sampled boundary.
    pub best_timeshare_sum: f64,
    pub gap: f64,
}

/// Compares the full-power equilibrium with the best time-sharing sum rate,
/// using `grid_size` points per boundary edge.
pub fn ne_efficiency_2user(ch: &ScalarChannel, grid_size: usize) -> Result<NeEfficiency> {
    let sample = frontier_2user(ch, grid_size)?;
    let ne_rates = pair(ch, ch.budgets()[0], ch.budgets()[1]);
    let ne_sum = ne_rates.0 + ne_rates.1;
    // A linear function peaks at a hull vertex.
    let best = sample.hull.iter().map(|p| p.0 + p.1).fold(ne_sum, f64::max);
    Ok(NeEfficiency { ne_rates, ne_sum, best_timeshare_sum: best, gap: best - ne_sum })
}

/// The MISO boundary sweep with the beamformer parameters of each kept point.
#[derive(Debug, Clone, Serialize)]
pub struct MisoPareto {
    pub sample: RegionSample,
    /// `(lambda_1, lambda_2)` for each boundary point.
    pub lambdas: Vec<RatePair>,
}

/// Full-power maximum-ratio and zero-forcing beams `(mrt, zf)` of user `k`
/// against the other user's receiver.
pub fn mrt_zf_beams(ch: &MisoChannel, k: usize) -> Result<(CVector, CVector)> {
    require_two_users(ch.users())?;
    let other = 1 - k;
    let direct: CVector = ch.gain(k, k).map(|z| z.conj());
    let leak: CVector = ch.gain(k, other).map(|z| z.conj());
    let norm = direct.norm();
    if norm == 0.0 {
        return Err(Error::Degenerate(format!("user {k} has no direct channel")));
    }
    let zf = if leak.norm() == 0.0 {
        direct.clone()
    } else {
        let coeff = leak.dotc(&direct) / leak.norm_squared();
        &direct - leak.map(|z| z * coeff)
    };
    if zf.norm() <= 1e-12 * norm {
        return Err(Error::Degenerate(format!("direct and cross channels of user {k} are parallel")));
    }
    let amp = ch.budgets()[k].sqrt();
    Ok((direct.unscale(norm).scale(amp), zf.unscale(zf.norm()).scale(amp)))
}

/// Beam `sqrt(P) (l zf + (1 - l) mrt) / ||l zf + (1 - l) mrt||`.
pub fn miso_combination(mrt: &CVector, zf: &CVector, lambda: f64, budget: f64) -> CVector {
    let mix = zf.scale(lambda) + mrt.scale(1.0 - lambda);
    mix.unscale(mix.norm()).scale(budget.sqrt())
}

/// Sweeps `(lambda_1, lambda_2)` over a `grid x grid` lattice of `[0, 1]^2`
/// and keeps the Pareto boundary of the resulting rate pairs. Beams have
/// power exactly `P_k`.
pub fn miso_pareto_2user(ch: &MisoChannel, grid: usize) -> Result<MisoPareto> {
    require_two_users(ch.users())?;
    if ch.antennas() < 2 {
        return Err(Error::Dimension("at least two transmit antennas are required".into()));
    }
    if grid < 2 {
        return Err(Error::Parameter("grid size must be at least 2".into()));
    }
    let beams = [mrt_zf_beams(ch, 0)?, mrt_zf_beams(ch, 1)?];
    let mut all = Vec::with_capacity(grid * grid);
    for l1 in linspace(1.0, grid) {
        let v1 = miso_combination(&beams[0].0, &beams[0].1, l1, ch.budgets()[0]);
        for l2 in linspace(1.0, grid) {
            let v2 = miso_combination(&beams[1].0, &beams[1].1, l2, ch.budgets()[1]);
            let r = rate_miso(ch, &[v1.clone(), v2])?;
            all.push(((r[0], r[1]), (l1, l2)));
        }
    }
    let front = pareto_front(&all.iter().map(|x| x.0).collect::<Vec<_>>());
    let lambdas = front
        .iter()
        .map(|p| all.iter().find(|x| x.0 == *p).map(|x| x.1).expect("front points come from the sweep"))
        .collect();
    let labels = vec![PointLabel::Beamformer; front.len()];
    Ok(MisoPareto { sample: RegionSample::new(front, labels), lambdas })
}

/// Sufficient condition for FDMA to be sum-rate optimal on every tone.
///
/// With two users: `(g12/g22)(g21/g11) > (1 + 1/(C-1))^2 / 4` on every tone.
/// With more users, for every tone and every ordered pair `l != k`:
/// `g_lk/g_kk > 1/2` and `(g_lk/g_kk)(g_kl/g_ll) > (1 + 1/(C-1))^2 / 4`.
/// `min_tones` is `C`, the least number of tones used by any user.
pub fn fdma_optimality_check(ch: &ParallelChannel, min_tones: usize) -> Result<bool> {
    if min_tones < 2 {
        return Err(Error::Parameter("the tone count C must be at least 2".into()));
    }
    let threshold = (1.0 + 1.0 / (min_tones as f64 - 1.0)).powi(2) / 4.0;
    let kk = ch.users();
    if kk < 2 {
        return Err(Error::Dimension("at least two users are required".into()));
    }
    let ratio = |n: usize, l: usize, k: usize| ch.power_gain(n, l, k) / ch.power_gain(n, k, k);
    Ok((0..ch.tones()).all(|n| {
        if kk == 2 {
            ratio(n, 0, 1) * ratio(n, 1, 0) > threshold
        } else {
            (0..kk).all(|l| {
                (0..kk).filter(|&k| k != l).all(|k| ratio(n, l, k) > 0.5 && ratio(n, l, k) * ratio(n, k, l) > threshold)
            })
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;
    use approx::assert_relative_eq;

    fn fig_channel(alpha: f64) -> ScalarChannel {
        ScalarChannel::symmetric(2, alpha, 1.0).unwrap()
    }

    #[test]
    fn uncoupled_frontier_is_a_rectangle() {
        let ch = ScalarChannel::from_power_gains(&[vec![2.0, 0.0], vec![0.0, 3.0]], vec![1.0, 2.0]).unwrap();
        let s = frontier_2user(&ch, 16).unwrap();
        let corner = (3f64.log2(), 7f64.log2());
        for (&(r1, r2), label) in s.points.iter().zip(&s.labels) {
            match label {
                PointLabel::User1Full => assert_relative_eq!(r1, corner.0),
                _ => assert_relative_eq!(r2, corner.1),
            }
        }
        assert!(s.hull.iter().any(|p| (p.0 - corner.0).abs() < 1e-12 && (p.1 - corner.1).abs() < 1e-12));
        assert_eq!(s.hull.len(), 4);
        assert!(convexity_2user(&ch, 50).unwrap().convex);
    }

    #[test]
    fn closed_forms_match_the_sweep() {
        for alpha in [0.1, 0.5, 1.0, 2.0] {
            let ch = fig_channel(alpha);
            let s = frontier_2user(&ch, 64).unwrap();
            assert!(frontier_cross_check(&ch, &s) < 1e-10, "alpha {alpha}");
        }
        let ch = ScalarChannel::random(2, 3).unwrap().with_budgets(vec![2.0, 5.0]).unwrap();
        let s = frontier_2user(&ch, 64).unwrap();
        assert!(frontier_cross_check(&ch, &s) < 1e-10);
    }

    #[test]
    fn weak_interference_is_convex_strong_is_not() {
        let weak = convexity_2user(&fig_channel(0.1), 100).unwrap();
        assert!(weak.convex && weak.necessary_holds && weak.necessary_holds_squared);
        let strong = convexity_2user(&fig_channel(2.0), 100).unwrap();
        assert!(!strong.convex && !strong.necessary_holds);
    }

    #[test]
    fn weak_interference_hull_hugs_the_frontier() {
        let s = frontier_2user(&fig_channel(0.1), 256).unwrap();
        // All frontier points are hull vertices or within roundoff of an edge.
        for &p in &s.points {
            let on_edge = (0..s.hull.len()).any(|i| {
                let (a, b) = (s.hull[i], s.hull[(i + 1) % s.hull.len()]);
                let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                (cross(a, b, p) / len).abs() < 1e-4
            });
            assert!(on_edge, "{p:?}");
        }
        let strong = frontier_2user(&fig_channel(2.0), 256).unwrap();
        let mid = pair(&fig_channel(2.0), 1.0, 1.0);
        let edge = ((1.0, 0.0), (0.0, 1.0));
        // The full-power point lies strictly below the time-sharing line.
        assert!(cross(edge.0, edge.1, mid) > 0.1);
        assert!(hull_contains(&strong.hull, mid, 1e-9));
    }

    #[test]
    fn hull_contains_every_point() {
        let ch = ScalarChannel::random(2, 11).unwrap();
        let s = frontier_2user(&ch, 64).unwrap();
        let cloud = brute_force_region(&ch, 40).unwrap();
        let hull = timeshare_hull(&cloud);
        for p in &s.points {
            assert!(hull_contains(&s.hull, *p, 1e-9));
        }
        for p in &cloud {
            assert!(hull_contains(&hull, *p, 1e-9));
        }
    }

    #[test]
    fn frontier_points_are_undominated() {
        let ch = ScalarChannel::random(2, 4).unwrap();
        let s = frontier_2user(&ch, 200).unwrap();
        let front = pareto_front(&s.points);
        let cloud = brute_force_region(&ch, 200).unwrap();
        for f in &front {
            assert!(!cloud.iter().any(|p| p.0 > f.0 + 1e-12 && p.1 > f.1 + 1e-12), "{f:?}");
        }
        // Every cloud point is dominated by the frontier up to one grid cell.
        for p in &cloud {
            assert!(front.iter().any(|f| f.0 >= p.0 - 1e-2 && f.1 >= p.1 - 1e-2), "{p:?}");
        }
    }

    #[test]
    fn equilibrium_gap() {
        let weak = ne_efficiency_2user(&fig_channel(0.5), 512).unwrap();
        assert_eq!(weak.gap, 0.0);
        let strong = ne_efficiency_2user(&fig_channel(2.0), 512).unwrap();
        assert_relative_eq!(strong.ne_sum, 2.0 * (4.0f64 / 3.0).log2(), max_relative = 1e-12);
        assert_relative_eq!(strong.best_timeshare_sum, 1.0, max_relative = 1e-12);
        assert!(strong.gap > 0.16);
        assert_eq!(ne_efficiency_2user(&fig_channel(0.0), 64).unwrap().gap, 0.0);
    }

    #[test]
    fn fdma_conditions() {
        let strong = ParallelChannel::from_power_gains(
            &[vec![vec![1.0, 10.0], vec![10.0, 1.0]], vec![vec![1.0, 10.0], vec![10.0, 1.0]]],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!(fdma_optimality_check(&strong, 2).unwrap());
        assert!(!fdma_optimality_check(&strong.scale_crosstalk(0.0), 2).unwrap());
        let boundary =
            ParallelChannel::from_power_gains(&[vec![vec![1.0, 0.75], vec![0.75, 1.0]]], vec![1.0, 1.0]).unwrap();
        assert!(!fdma_optimality_check(&boundary, 3).unwrap());
        assert!(matches!(fdma_optimality_check(&strong, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn miso_sweep_properties() {
        let ch = MisoChannel::random(2, 3, 5).unwrap().with_budgets(vec![2.0, 3.0]).unwrap();
        for k in 0..2 {
            let (mrt, zf) = mrt_zf_beams(&ch, k).unwrap();
            assert_relative_eq!(mrt.norm_squared(), ch.budgets()[k], max_relative = 1e-12);
            // Zero forcing leaks nothing to the other receiver.
            assert!(ch.gain(k, 1 - k).iter().zip(zf.iter()).map(|(h, v)| h * v).sum::<Complex64>().norm() < 1e-12);
            for l in [0.0, 0.3, 1.0] {
                let v = miso_combination(&mrt, &zf, l, ch.budgets()[k]);
                assert!((v.norm_squared() - ch.budgets()[k]).abs() < 1e-10);
            }
        }
        let sweep = miso_pareto_2user(&ch, 21).unwrap();
        let mrt = crate::wsrm::miso_mrt(&ch);
        let r = rate_miso(&ch, &mrt).unwrap();
        // The both-MRT pair is not beaten in both coordinates by the boundary
        // only if it is itself on it; either way it is dominated-or-equal.
        assert!(sweep.sample.points.iter().any(|p| p.0 >= r[0] - 1e-12 && p.1 >= r[1] - 1e-12));
    }

    #[test]
    fn orthogonal_cross_channel_makes_zf_equal_mrt() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let gains = vec![
            CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 2.0)]),
            CVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.0)]),
            CVector::from_vec(vec![c(0.3, 0.1), c(0.7, 0.0)]),
        ];
        let ch = MisoChannel::new(2, 2, gains, vec![1.0, 1.0]).unwrap();
        let (mrt, zf) = mrt_zf_beams(&ch, 0).unwrap();
        assert!((mrt - zf).norm() < 1e-12);
    }

    #[test]
    fn parallel_cross_channel_is_degenerate() {
        let c = |re: f64| Complex64::new(re, 0.0);
        let gains = vec![
            CVector::from_vec(vec![c(1.0), c(1.0)]),
            CVector::from_vec(vec![c(2.0), c(2.0)]),
            CVector::from_vec(vec![c(0.5), c(0.1)]),
            CVector::from_vec(vec![c(1.0), c(0.0)]),
        ];
        let ch = MisoChannel::new(2, 2, gains, vec![1.0, 1.0]).unwrap();
        assert!(matches!(miso_pareto_2user(&ch, 5), Err(Error::Degenerate(_))));
    }
}
