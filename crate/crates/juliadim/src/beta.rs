//! Jones beta-numbers of planar point clouds at dyadic scales.
//!
//! beta(x, r) measures how far the cloud inside the ball B(x, r) deviates
//! from a straight line, normalized so that beta is scale invariant and
//! always lies in [0, 1]. The optimal line is the mid-line of the thinnest
//! slab containing the points, so beta(x, r) = (minimal slab width) / (2r).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dyadic ball needs this many sample points for its beta to count.
/// Protects against sampling-starved deep scales.
pub const ADMISSIBILITY_FLOOR: usize = 50;

/// beta of a single ball, plus the evidence behind it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BetaSample {
    pub beta: f64,
    pub count: usize,
    /// no cloud point fell in the ball; beta is reported as 0
    pub empty: bool,
}

/// beta at dyadic scales r_n = 2^{-n} * diam around a base point.
/// Scales where the ball holds fewer than [`ADMISSIBILITY_FLOOR`] points
/// are truncated, never reported as 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaProfile {
    pub base: (f64, f64),
    pub diameter: f64,
    pub scales: Vec<f64>,
    pub betas: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Thresholds with the fraction of scales (upper density) on which the
/// cloud is flatter than each threshold. Thresholds increase and end at 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatnessFamily {
    thresholds: Vec<f64>,
    densities: Vec<f64>,
}

impl FlatnessFamily {
    pub fn new(thresholds: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() || thresholds.len() != densities.len() {
            return Err(Error::Precondition(
                "flatness family needs matching nonempty threshold/density lists".into(),
            ));
        }
        for w in thresholds.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Precondition("thresholds must strictly increase".into()));
            }
        }
        let last = *thresholds.last().unwrap();
        if !(thresholds[0] > 0.0) || (last - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition("thresholds must lie in (0, 1] and end at 1".into()));
        }
        if densities.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::Precondition("densities must lie in [0, 1]".into()));
        }
        Ok(Self { thresholds, densities })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull, counterclockwise, strict turns only (collinear points dropped).
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let chain = |iter: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut lower = chain(&mut pts.iter().copied());
    let upper = chain(&mut pts.iter().rev().copied());
    lower.extend(upper);
    lower
}

fn dist_to_line(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    cross(a, b, p).abs() / len
}

/// Width of the thinnest slab containing the points. Rotating calipers over
/// the convex hull: the optimal slab is supported by a hull edge, and the
/// farthest vertex advances monotonically as the edge does.
pub fn min_slab_width(points: &[(f64, f64)]) -> f64 {
    let hull = convex_hull(points);
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let area = |i: usize, j: usize| cross(hull[i], hull[(i + 1) % n], hull[j % n]).abs();
    // farthest vertex from edge 0, found by full scan so plateaus cannot
    // mislead the pointer start
    let mut j = (0..n).max_by(|&a, &b| area(0, a).partial_cmp(&area(0, b)).unwrap()).unwrap();
    let mut best = f64::INFINITY;
    let mut budget = 4 * n;
    for i in 0..n {
        while budget > 0 && area(i, j + 1) > area(i, j) {
            j = (j + 1) % n;
            budget -= 1;
        }
        best = best.min(dist_to_line(hull[i], hull[(i + 1) % n], hull[j]));
    }
    best
}

/// Largest pairwise distance, via antipodal pairs on the hull.
pub fn cloud_diameter(points: &[(f64, f64)]) -> f64 {
    let hull = convex_hull(points);
    let n = hull.len();
    if n == 0 {
        return 0.0;
    }
    if n <= 2 {
        let d = if n == 2 { dist(hull[0], hull[1]) } else { 0.0 };
        return d;
    }
    let area = |i: usize, j: usize| cross(hull[i], hull[(i + 1) % n], hull[j % n]).abs();
    let mut j = (0..n).max_by(|&a, &b| area(0, a).partial_cmp(&area(0, b)).unwrap()).unwrap();
    let mut best: f64 = 0.0;
    let mut budget = 4 * n;
    for i in 0..n {
        while budget > 0 && area(i, j + 1) > area(i, j) {
            j = (j + 1) % n;
            budget -= 1;
        }
        best = best.max(dist(hull[i], hull[j])).max(dist(hull[(i + 1) % n], hull[j]));
    }
    best
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Reference slab width by direct minimization over line directions:
/// `n_dirs` uniformly spread directions, plus every direction determined by
/// a pair of cloud points when the cloud is small enough that this is cheap.
/// The optimal slab is parallel to some hull edge, so the pairwise set
/// contains an exact optimum.
pub fn min_width_direction_grid(points: &[(f64, f64)], n_dirs: usize) -> f64 {
    let extent = |ux: f64, uy: f64| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, y) in points {
            let t = x * ux + y * uy;
            lo = lo.min(t);
            hi = hi.max(t);
        }
        hi - lo
    };
    let mut best = f64::INFINITY;
    for k in 0..n_dirs.max(1) {
        let th = std::f64::consts::PI * (k as f64) / (n_dirs.max(1) as f64);
        best = best.min(extent(th.cos(), th.sin()));
    }
    if points.len() <= 512 {
        for i in 0..points.len() {
            for k in (i + 1)..points.len() {
                let (dx, dy) = (points[k].0 - points[i].0, points[k].1 - points[i].1);
                let len = (dx * dx + dy * dy).sqrt();
                if len > 0.0 {
                    // slab parallel to the segment: measure along its normal
                    best = best.min(extent(-dy / len, dx / len));
                }
            }
        }
    }
    best
}

/// beta(x, r) of the cloud: thinnest-slab width of the points inside
/// B(x, r), over 2r. Fewer than 3 points, or collinear points, give 0.
/// An empty ball gives 0 with the `empty` flag set.
pub fn beta_at(points: &[(f64, f64)], x: (f64, f64), r: f64) -> Result<BetaSample> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Precondition("beta radius must be positive".into()));
    }
    let r2 = r * r;
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|p| (p.0 - x.0).powi(2) + (p.1 - x.1).powi(2) <= r2)
        .collect();
    if inside.is_empty() {
        return Ok(BetaSample { beta: 0.0, count: 0, empty: true });
    }
    let count = inside.len();
    if count <= 2 {
        return Ok(BetaSample { beta: 0.0, count, empty: false });
    }
    let beta = (min_slab_width(&inside) / (2.0 * r)).min(1.0);
    Ok(BetaSample { beta, count, empty: false })
}

/// beta at dyadic scales r_n = 2^{-n} diam, n = 0..=depth, truncated at the
/// first scale whose ball holds fewer than [`ADMISSIBILITY_FLOOR`] points.
pub fn beta_profile(points: &[(f64, f64)], x: (f64, f64), depth: usize) -> Result<BetaProfile> {
    if depth < 1 {
        return Err(Error::Precondition("profile depth must be at least 1".into()));
    }
    if depth > 60 {
        return Err(Error::Budget("profile depth beyond dyadic f64 resolution".into()));
    }
    let diameter = cloud_diameter(points);
    if !(diameter > 0.0) {
        return Err(Error::Precondition("cloud has no extent".into()));
    }
    let mut scales = Vec::new();
    let mut betas = Vec::new();
    let mut counts = Vec::new();
    // balls are nested, so each scale filters the previous scale's survivors
    let mut working: Vec<(f64, f64)> = points.to_vec();
    for n in 0..=depth {
        let r = diameter * (0.5f64).powi(n as i32);
        let r2 = r * r;
        working.retain(|p| (p.0 - x.0).powi(2) + (p.1 - x.1).powi(2) <= r2);
        if working.len() < ADMISSIBILITY_FLOOR {
            break;
        }
        let beta = if working.len() <= 2 { 0.0 } else { (min_slab_width(&working) / (2.0 * r)).min(1.0) };
        scales.push(r);
        betas.push(beta);
        counts.push(working.len());
    }
    Ok(BetaProfile { base: x, diameter, scales, betas, counts })
}

/// Normalized dyadic sum (log 2) * sum of beta^2 over scales in [r, diam],
/// divided by log(1/r).
pub fn mean_wiggliness(profile: &BetaProfile, r: f64) -> Result<f64> {
    if !(r > 0.0) || r >= 1.0 {
        return Err(Error::Precondition("wiggliness cutoff must lie in (0, 1)".into()));
    }
    let floor = r * (1.0 - 1e-12);
    match profile.scales.last() {
        None => return Err(Error::Precondition("profile has no admissible scales".into())),
        Some(&smallest) if smallest > r * (1.0 + 1e-12) => {
            return Err(Error::Precondition("profile does not resolve the requested cutoff".into()))
        }
        _ => {}
    }
    let sum: f64 = profile
        .scales
        .iter()
        .zip(&profile.betas)
        .filter(|(s, _)| **s >= floor)
        .map(|(_, b)| b * b)
        .sum();
    Ok(std::f64::consts::LN_2 * sum / (1.0 / r).ln())
}

/// Fraction of admissible scales with beta at or below the threshold.
pub fn good_scale_density(profile: &BetaProfile, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Precondition("threshold must lie in (0, 1]".into()));
    }
    if profile.betas.is_empty() {
        return Ok(0.0);
    }
    let good = profile.betas.iter().filter(|b| **b <= threshold).count();
    Ok(good as f64 / profile.betas.len() as f64)
}

/// Dimension upper bound 1 + C' * sum of d_i beta_i^2 over the family.
pub fn almost_flat_bound(family: &FlatnessFamily, c_prime: f64) -> Result<f64> {
    if !(c_prime >= 0.0) || !c_prime.is_finite() {
        return Err(Error::Precondition("bound constant must be finite and nonnegative".into()));
    }
    let sum: f64 = family
        .thresholds
        .iter()
        .zip(&family.densities)
        .map(|(b, d)| d * b * b)
        .sum();
    Ok(1.0 + c_prime * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_loglog;
    use crate::quadratic::Parameter;
    use crate::sampler::sample_inverse;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle_cloud(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                (th.cos(), th.sin())
            })
            .collect()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn collinear_points_are_flat() {
        let pts: Vec<(f64, f64)> = (0..100).map(|k| (k as f64 * 0.01, 2.0 + k as f64 * 0.03)).collect();
        for r in [0.1, 1.0, 10.0] {
            let s = beta_at(&pts, pts[50], r).unwrap();
            assert_eq!(s.beta, 0.0);
            assert!(!s.empty || s.count == 0);
        }
    }

    #[test]
    fn empty_and_tiny_balls() {
        let pts = vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.5)];
        let far = beta_at(&pts, (100.0, 100.0), 0.5).unwrap();
        assert!(far.empty && far.beta == 0.0 && far.count == 0);
        let two = beta_at(&pts, (0.5, -0.01), 0.52).unwrap();
        assert_eq!(two.count, 2);
        assert!(!two.empty && two.beta == 0.0);
        assert!(beta_at(&pts, (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn circle_arc_matches_the_sagitta_formula() {
        let pts = circle_cloud(100_000);
        let r = 0.2;
        let s = beta_at(&pts, (1.0, 0.0), r).unwrap();
        // arc of half-angle ~r has thinnest slab equal to its sagitta,
        // h ~ r^2/2, so beta ~ r/4 on the unit circle
        let expect = r / 4.0;
        assert!(
            (s.beta - expect).abs() < 0.1 * expect,
            "beta {} vs sagitta value {}",
            s.beta,
            expect
        );
    }

    #[test]
    fn two_parallel_segments_give_exact_beta() {
        let mut pts = Vec::new();
        for k in 0..200 {
            let x = -0.4 + 0.8 * (k as f64) / 199.0;
            pts.push((x, 0.05));
            pts.push((x, -0.05));
        }
        let s = beta_at(&pts, (0.0, 0.0), 0.5).unwrap();
        assert!((s.beta - 0.1).abs() < 1e-12, "beta {}", s.beta);
    }

    #[test]
    fn rectangle_width_is_the_short_side() {
        // includes edge midpoints so collinear hull points get exercised
        let pts = vec![
            (0.0, 0.0),
            (3.0, 0.0),
            (3.0, 1.0),
            (0.0, 1.0),
            (1.5, 0.0),
            (1.5, 1.0),
            (0.0, 0.5),
            (3.0, 0.5),
        ];
        assert!((min_slab_width(&pts) - 1.0).abs() < 1e-12);
        assert!((cloud_diameter(&pts) - 10.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn calipers_agree_with_direction_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let pts = random_cloud(&mut rng, 100);
            let fast = min_slab_width(&pts);
            let slow = min_width_direction_grid(&pts, 10_000);
            assert!((fast - slow).abs() < 1e-6, "fast {fast} slow {slow}");
        }
    }

    #[test]
    fn diameter_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let pts = random_cloud(&mut rng, 300);
            let fast = cloud_diameter(&pts);
            let mut slow: f64 = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    slow = slow.max(super::dist(pts[i], pts[j]));
                }
            }
            assert!((fast - slow).abs() < 1e-12);
        }
        assert!((cloud_diameter(&circle_cloud(10_000)) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn subset_beta_never_exceeds_superset_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = random_cloud(&mut rng, 400);
        let sub: Vec<(f64, f64)> = pts.iter().copied().step_by(3).collect();
        for r in [0.3, 0.7, 1.5] {
            let big = beta_at(&pts, (0.0, 0.0), r).unwrap().beta;
            let small = beta_at(&sub, (0.0, 0.0), r).unwrap().beta;
            assert!(small <= big + 1e-12, "r {r}: subset {small} superset {big}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn beta_is_similarity_invariant(seed in 0u64..1_000_000, th in 0.0f64..6.28, s in 0.1f64..10.0, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_cloud(&mut rng, 60);
            let x = (0.1, -0.2);
            let r = 0.9;
            let map = |p: (f64, f64)| {
                let (c, sn) = (th.cos(), th.sin());
                (s * (c * p.0 - sn * p.1) + tx, s * (sn * p.0 + c * p.1) + ty)
            };
            let moved: Vec<(f64,f64)> = pts.iter().map(|&p| map(p)).collect();
            let a = beta_at(&pts, x, r).unwrap();
            let b = beta_at(&moved, map(x), s * r).unwrap();
            prop_assert_eq!(a.count, b.count);
            prop_assert!((a.beta - b.beta).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a.beta));
        }
    }

    #[test]
    fn real_segment_cloud_is_flat_at_every_scale() {
        let param = Parameter::new(-2.0);
        let cloud = sample_inverse(&param, 20_000, 11, 100).unwrap();
        let profile = beta_profile(&cloud.points, (0.3, 0.0), 20).unwrap();
        assert!(!profile.betas.is_empty());
        assert!(profile.betas.iter().all(|b| *b <= 1e-6), "betas {:?}", profile.betas);
        assert!((good_scale_density(&profile, 0.01).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_profile_halves_per_scale() {
        let pts = circle_cloud(100_000);
        let profile = beta_profile(&pts, (1.0, 0.0), 20).unwrap();
        // truncation: every reported count clears the floor, and the next
        // dyadic ball would not
        assert!(profile.counts.iter().all(|c| *c >= ADMISSIBILITY_FLOOR));
        let next_r = profile.scales.last().unwrap() / 2.0;
        let next = beta_at(&pts, (1.0, 0.0), next_r).unwrap();
        assert!(next.count < ADMISSIBILITY_FLOOR);
        // beta ~ r/4 once the arc is genuinely curved but far from the
        // whole circle
        for n in 4..profile.scales.len() {
            let expect = profile.scales[n] / 4.0;
            assert!(
                (profile.betas[n] - expect).abs() < 0.15 * expect,
                "scale {}: beta {} vs {}",
                n,
                profile.betas[n],
                expect
            );
        }
        let fit = fit_loglog(&profile.scales[3..], &profile.betas[3..]).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn tip_cloud_top_scale_beta_is_comparable_to_sqrt_epsilon() {
        let param = Parameter::new(-1.99);
        let cloud = sample_inverse(&param, 30_000, 13, 100).unwrap();
        let base = cloud.points[17];
        let profile = beta_profile(&cloud.points, base, 8).unwrap();
        let eps = param.epsilon.sqrt();
        let top = profile.betas[0];
        assert!(
            top >= eps / 4.0 && top <= eps * 4.0,
            "top-scale beta {} vs sqrt(eps) {}",
            top,
            eps
        );
    }

    #[test]
    fn scaling_inequality_on_adjacent_scales() {
        // beta(x, r) <= (r'/r) beta(x, r') for r < r', with sampling slack:
        // dropping to a half-radius ball can at most double beta
        let pts = circle_cloud(100_000);
        let param = Parameter::new(-1.99);
        let cloud = sample_inverse(&param, 30_000, 13, 100).unwrap();
        for (points, x) in [(&pts, (1.0, 0.0)), (&cloud.points, cloud.points[17])] {
            let profile = beta_profile(points, x, 12).unwrap();
            for n in 0..profile.betas.len().saturating_sub(1) {
                assert!(
                    profile.betas[n + 1] <= 1.05 * 2.0 * profile.betas[n] + 1e-12,
                    "scale {}: {} then {}",
                    n,
                    profile.betas[n],
                    profile.betas[n + 1]
                );
            }
        }
    }

    #[test]
    fn wiggliness_of_constant_profile() {
        let n = 30usize;
        let profile = BetaProfile {
            base: (0.0, 0.0),
            diameter: 1.0,
            scales: (0..=n).map(|k| (0.5f64).powi(k as i32)).collect(),
            betas: vec![0.3; n + 1],
            counts: vec![1000; n + 1],
        };
        let r = (0.5f64).powi(n as i32);
        let mw = mean_wiggliness(&profile, r).unwrap();
        let expect = std::f64::consts::LN_2 * (n as f64 + 1.0) * 0.09 / ((n as f64) * std::f64::consts::LN_2);
        assert!((mw - expect).abs() < 1e-12);
        assert!((mw - 0.09).abs() < 0.05 * 0.09);
        let flat = BetaProfile { betas: vec![0.0; n + 1], ..profile };
        assert_eq!(mean_wiggliness(&flat, r).unwrap(), 0.0);
    }

    #[test]
    fn wiggliness_of_the_ideal_circle_ladder() {
        // scales 2 * 2^{-n} with beta = r_n / 4: geometric series, O(1/20)
        // at cutoff 2^{-20}
        let n = 21usize;
        let scales: Vec<f64> = (0..=n).map(|k| 2.0 * (0.5f64).powi(k as i32)).collect();
        let betas: Vec<f64> = scales.iter().map(|r| r / 4.0).collect();
        let profile = BetaProfile {
            base: (1.0, 0.0),
            diameter: 2.0,
            scales,
            betas,
            counts: vec![1000; n + 1],
        };
        let r = (0.5f64).powi(20);
        let mw = mean_wiggliness(&profile, r).unwrap();
        let series: f64 = (0..=n).map(|k| (2.0 * (0.5f64).powi(k as i32) / 4.0).powi(2)).sum();
        let expect = std::f64::consts::LN_2 * series / (20.0 * std::f64::consts::LN_2);
        assert!((mw - expect).abs() < 1e-12);
        assert!(mw < 2.0 / 20.0, "mw {mw}");
    }

    #[test]
    fn wiggliness_rejects_unresolved_cutoffs() {
        let profile = BetaProfile {
            base: (0.0, 0.0),
            diameter: 1.0,
            scales: vec![1.0, 0.5, 0.25],
            betas: vec![0.1; 3],
            counts: vec![100; 3],
        };
        assert!(mean_wiggliness(&profile, 0.01).is_err());
        assert!(mean_wiggliness(&profile, 1.5).is_err());
        assert!(mean_wiggliness(&profile, 0.3).is_ok());
    }

    #[test]
    fn good_scales_on_the_circle() {
        let pts = circle_cloud(100_000);
        let profile = beta_profile(&pts, (1.0, 0.0), 20).unwrap();
        let density = good_scale_density(&profile, 0.01).unwrap();
        let direct = profile.betas.iter().filter(|b| **b <= 0.01).count() as f64
            / profile.betas.len() as f64;
        assert_eq!(density, direct);
        // beta ~ r_n/4 crosses 0.01 near r = 0.04, i.e. n = 5.6 of the
        // roughly 11 admissible scales
        assert!(density > 0.3 && density < 0.6, "density {density}");
        assert!(good_scale_density(&profile, 0.0).is_err());
        assert!(good_scale_density(&profile, 1.1).is_err());
    }

    #[test]
    fn flat_bound_edge_cases() {
        let family = FlatnessFamily::new(vec![0.5, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(almost_flat_bound(&family, 10.0).unwrap(), 1.0);
        let single = FlatnessFamily::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(almost_flat_bound(&single, 1.0).unwrap(), 2.0);
        assert!(FlatnessFamily::new(vec![0.5, 0.4], vec![0.1, 0.1]).is_err());
        assert!(FlatnessFamily::new(vec![0.5, 0.9], vec![0.1, 0.1]).is_err());
        assert!(FlatnessFamily::new(vec![0.5, 1.0], vec![0.1, 1.2]).is_err());
    }

    #[test]
    fn flat_bound_ladder_scales_like_sqrt_eps_log_cubed() {
        // thresholds 2^{j-1} sqrt(eps) with densities 2^{-j} |log eps|^{3/2}
        // capped at 1; the excess over 1 should track sqrt(eps)|log eps|^{3/2}
        let mut ratios = Vec::new();
        for eps in [1e-3f64, 1e-4, 1e-5] {
            let logf = (-(eps as f64).ln()).powf(1.5);
            let mut thresholds = Vec::new();
            let mut densities = Vec::new();
            let mut j = 1;
            loop {
                let beta = (2.0f64).powi(j - 1) * eps.sqrt();
                if beta >= 1.0 {
                    thresholds.push(1.0);
                    densities.push(((0.5f64).powi(j) * logf).min(1.0));
                    break;
                }
                thresholds.push(beta);
                densities.push(((0.5f64).powi(j) * logf).min(1.0));
                j += 1;
            }
            let family = FlatnessFamily::new(thresholds, densities).unwrap();
            let bound = almost_flat_bound(&family, 1.0).unwrap();
            ratios.push((bound - 1.0) / (eps.sqrt() * logf));
        }
        for r in &ratios {
            assert!(*r > 0.2 && *r < 5.0, "ratio {r}");
        }
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
            / ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 2.5, "ratios {:?}", ratios);
    }
}
