//! Point samples of Julia sets by backward iteration, and the exact real
//! interval components of f^-n([-p, p]) for parameters left of the tip.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadratic::{fixed_points, Parameter};

pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    InverseIteration,
}

/// A finite sample of a Julia set with its generation metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<(f64, f64)>,
    pub param: Parameter,
    pub seed: u64,
    pub method: SampleMethod,
    pub burn_in: usize,
}

impl PointCloud {
    pub fn complex(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.points.iter().map(|&(re, im)| Complex64::new(re, im))
    }

    /// Largest |Im z| over the cloud; for real c near -2 the Julia set lives
    /// in a strip of height on the order of sqrt(c + 2).
    pub fn strip_extent(&self) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::Precondition("empty cloud".into()));
        }
        Ok(self.points.iter().map(|p| p.1.abs()).fold(0.0, f64::max))
    }

    /// Max over sampled z of |z - c| + |z + c|; on [-2, 1/4] the Julia set
    /// is contained in the ellipse where this is at most 4.
    pub fn ellipse_extent(&self) -> f64 {
        let c = Complex64::new(self.param.c, 0.0);
        self.complex()
            .map(|z| (z - c).norm() + (z + c).norm())
            .fold(0.0, f64::max)
    }
}

/// Backward-orbit sample: iterate z ← ±√(z - c) with one unbiased sign bit
/// per step, starting from the repelling fixed point. Deterministic in
/// (seed, count, burn_in).
pub fn sample_inverse(
    param: &Parameter,
    count: usize,
    seed: u64,
    burn_in: usize,
) -> Result<PointCloud> {
    if burn_in < 50 {
        return Err(Error::Precondition("burn_in must be at least 50".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Complex64::new(param.c, 0.0);
    // start on the Julia set when the repelling fixed point is real,
    // otherwise at its complex counterpart
    let mut z = match fixed_points(param) {
        Ok(fp) => Complex64::new(fp.p, 0.0),
        Err(_) => crate::quadratic::fixed_points_complex(c).0,
    };
    let mut points = Vec::with_capacity(count);
    for k in 0..burn_in + count {
        let root = (z - c).sqrt();
        z = if rng.gen::<bool>() { root } else { -root };
        if k >= burn_in {
            points.push((z.re, z.im));
        }
    }
    Ok(PointCloud {
        points,
        param: *param,
        seed,
        method: SampleMethod::InverseIteration,
        burn_in,
    })
}

/// Worst forward-invariance residual: for each sampled z, the distance from
/// z² + c to the nearest sampled point. Quadratic scan, meant for tests and
/// spot checks on moderate clouds.
pub fn invariance_residual(cloud: &PointCloud) -> f64 {
    let pts: Vec<Complex64> = cloud.complex().collect();
    let mut worst = 0.0f64;
    for &z in &pts {
        let w = cloud.param.map_c(z);
        let mut best = f64::INFINITY;
        for &u in &pts {
            let d = (w - u).norm_sqr();
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best.sqrt());
    }
    worst
}

/// The 2^n components of f^-n([-p, p]) for c < -2, by monotone pull-back of
/// endpoints through ±√(x - c). Endpoints are exact square-root compositions,
/// so no root-finder tolerances accumulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalCover {
    pub depth: usize,
    /// sorted, pairwise disjoint closed intervals
    pub components: Vec<(f64, f64)>,
    pub total_length: f64,
}

pub fn interval_cover(param: &Parameter, n: usize) -> Result<IntervalCover> {
    if param.c >= -2.0 {
        return Err(Error::Regime(
            "interval cover needs c < -2; at and right of the tip the inverse branches meet"
                .into(),
        ));
    }
    if n > 40 {
        return Err(Error::Budget(format!("2^{n} components requested")));
    }
    let fp = fixed_points(param)?;
    let mut comps = vec![(-fp.p, fp.p)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(comps.len() * 2);
        // negative branch first keeps the list sorted: -√ reverses order
        for &(lo, hi) in comps.iter().rev() {
            next.push((-(hi - param.c).sqrt(), -(lo - param.c).sqrt()));
        }
        for &(lo, hi) in &comps {
            next.push(((lo - param.c).sqrt(), (hi - param.c).sqrt()));
        }
        comps = next;
    }
    let total = comps.iter().map(|(lo, hi)| hi - lo).sum();
    Ok(IntervalCover { depth: n, components: comps, total_length: total })
}
