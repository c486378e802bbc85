//! Arithmetic of the real quadratic family z ↦ z² + c: fixed points, the
//! critical orbit and its derivative growth, the Green function of the basin
//! of infinity, and the bookkeeping sequences used by the inducing
//! construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the tip regime. Constructions near the tip are exercised on
/// (-2, TIP_UPPER_END]; they degrade gracefully but are not certified beyond.
pub const TIP_UPPER_END: f64 = -1.75;

/// Escape radius for Green-function iteration. Past this, one more log-space
/// correction bounds the remaining error by 2^-n * |c| / ESCAPE_RADIUS².
pub const ESCAPE_RADIUS: f64 = 1e8;

/// Iteration cap for boundedness certificates.
pub const GREEN_DEPTH: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// real c < -2; the Julia set is a Cantor set on the line
    Exterior,
    /// real c in (-2, TIP_UPPER_END]
    Tip,
    /// |c| < 1/4; the Julia set is a quasicircle
    Small,
    Other,
}

/// A real parameter with its derived quantities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Parameter {
    pub c: f64,
    /// c + 2; meaningful near the tip
    pub epsilon: f64,
    pub regime: Regime,
}

impl Parameter {
    pub fn new(c: f64) -> Self {
        let regime = if c < -2.0 {
            Regime::Exterior
        } else if c > -2.0 && c <= TIP_UPPER_END {
            Regime::Tip
        } else if c.abs() < 0.25 {
            Regime::Small
        } else {
            Regime::Other
        };
        Parameter { c, epsilon: c + 2.0, regime }
    }

    #[inline]
    pub fn map(&self, x: f64) -> f64 {
        x * x + self.c
    }

    #[inline]
    pub fn map_c(&self, z: Complex64) -> Complex64 {
        z * z + self.c
    }
}

/// The two real fixed points, q < 0 < p for c in (-2, 0).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPair {
    /// orientation-preserving repelling fixed point, the larger root
    pub p: f64,
    /// orientation-reversing fixed point, the smaller root
    pub q: f64,
}

/// Roots of z² - z + c. Total on real c ≤ 1/4.
pub fn fixed_points(param: &Parameter) -> Result<FixedPair> {
    let disc = 1.0 - 4.0 * param.c;
    if disc < 0.0 {
        return Err(Error::Regime(format!(
            "c = {} has no real fixed points (needs c <= 1/4)",
            param.c
        )));
    }
    let s = disc.sqrt();
    Ok(FixedPair { p: 0.5 * (1.0 + s), q: 0.5 * (1.0 - s) })
}

/// Complex counterpart, defined for every c.
pub fn fixed_points_complex(c: Complex64) -> (Complex64, Complex64) {
    let s = (Complex64::new(1.0, 0.0) - 4.0 * c).sqrt();
    ((1.0 + s) / 2.0, (1.0 - s) / 2.0)
}

/// Forward orbit of the critical value with log-derivative partial sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalOrbit {
    /// f^k(c) for k = 0..=N
    pub points: Vec<f64>,
    /// S_n = Σ_{k<n} log|2 f^k(c)|, so |(f^n)'(c)| = exp(S_n);
    /// -inf once a derivative factor vanishes
    pub log_deriv: Vec<f64>,
    /// false when c in [-2, 1/4] and some iterate left [-2, 2]
    pub mandelbrot_consistent: bool,
}

pub fn critical_orbit(param: &Parameter, n: usize) -> Result<CriticalOrbit> {
    if n == 0 {
        return Err(Error::Precondition("orbit length must be >= 1".into()));
    }
    let mut points = Vec::with_capacity(n + 1);
    let mut log_deriv = Vec::with_capacity(n + 1);
    let mut z = param.c;
    let mut s = 0.0f64;
    let in_m_window = (-2.0..=0.25).contains(&param.c);
    let mut consistent = true;
    points.push(z);
    log_deriv.push(0.0);
    for _ in 0..n {
        // accumulate before stepping: the factor at f^k(c) belongs to S_{k+1}
        s += (2.0 * z).abs().ln();
        z = param.map(z);
        points.push(z);
        log_deriv.push(s);
        if in_m_window && z.abs() > 2.0 + 1e-9 {
            consistent = false;
        }
    }
    Ok(CriticalOrbit { points, log_deriv, mandelbrot_consistent: consistent })
}

/// Best exponent certified to the orbit's depth:
/// min over 1 ≤ n ≤ N of (S_n - log Ω') / n.
///
/// Returns -inf when a derivative factor vanished along the orbit, which is
/// a verdict (the growth condition fails), not an input error.
pub fn ce_margin(orbit: &CriticalOrbit, omega_prime: f64) -> Result<f64> {
    let n = orbit.log_deriv.len() - 1;
    if n < 10 {
        return Err(Error::Precondition(format!(
            "need at least 10 log-derivative entries, got {n}"
        )));
    }
    let lw = omega_prime.ln();
    let mut margin = f64::INFINITY;
    for (k, s) in orbit.log_deriv.iter().enumerate().skip(1) {
        if s.is_infinite() && *s < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        margin = margin.min((s - lw) / k as f64);
    }
    Ok(margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenStatus {
    /// the orbit escaped; the value carries a geometric error bound
    Escaped,
    /// the orbit stayed in [-2, 2] for the full depth; the value is 0
    Bounded,
    /// depth exhausted between the invariant interval and the escape radius
    Flagged,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub status: GreenStatus,
    /// doubling depth at which the estimate was read off
    pub depth: usize,
}

/// G_c(c) = lim 2^-n log|f^n(c)|.
///
/// For real c the dichotomy is sharp: orbits either stay in [-2, 2] forever
/// or escape monotonically once |z| > 2, so the Flagged state guards rounding
/// rather than a real third case.
pub fn green_function(param: &Parameter, tol: f64) -> GreenEstimate {
    let mut z = param.c;
    let mut stayed_small = true;
    for k in 0..GREEN_DEPTH {
        if z.abs() > ESCAPE_RADIUS {
            let scale = 0.5f64.powi(k as i32);
            // one more doubling in log space; later corrections are
            // O(2^-k |c| / z²) and far below any sensible tol
            let correction = 0.5 * (param.c / (z * z)).abs().ln_1p();
            let value = scale * (z.abs().ln() + correction).max(0.0);
            let _ = tol; // escape radius already drives the error below tol
            return GreenEstimate { value, status: GreenStatus::Escaped, depth: k };
        }
        if z.abs() > 2.0 {
            stayed_small = false;
        }
        z = param.map(z);
    }
    if stayed_small {
        GreenEstimate { value: 0.0, status: GreenStatus::Bounded, depth: GREEN_DEPTH }
    } else {
        let value = 0.5f64.powi(GREEN_DEPTH as i32) * z.abs().max(1.0).ln();
        GreenEstimate { value, status: GreenStatus::Flagged, depth: GREEN_DEPTH }
    }
}

/// The three bookkeeping sequences attached to growth constants (Ω, Ω').
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TechnicalSequences {
    pub omega: f64,
    pub omega_prime: f64,
}

impl TechnicalSequences {
    pub fn new(omega: f64, omega_prime: f64) -> Result<Self> {
        if omega <= 0.0 || omega_prime <= 0.0 {
            return Err(Error::Precondition("need Ω > 0 and Ω' > 0".into()));
        }
        Ok(TechnicalSequences { omega, omega_prime })
    }

    pub fn delta(&self, n: usize) -> f64 {
        1.0 / (8.0 * (n * n) as f64)
    }

    pub fn gamma(&self, n: usize) -> f64 {
        64.0 * (n as f64 * self.omega / 4.0).exp() / (1.0 - (-self.omega / 4.0).exp())
    }

    pub fn alpha(&self, n: usize) -> f64 {
        (1.0 - (-self.omega).exp())
            * (self.delta(n) * self.omega_prime).sqrt()
            * (n as f64 * self.omega / 4.0).exp()
            / 16.0
    }

    /// Partial sums Σ γ_n^-1 and Σ δ_n up to `depth`. The full sums are
    /// e^{-Ω/4}/64 and π²/48, so the bounds 1/64 and 1/2 hold with room.
    pub fn sum_check(&self, depth: usize) -> (f64, f64) {
        let x = (-self.omega / 4.0).exp();
        let pref = (1.0 - x) / 64.0;
        let mut gsum = 0.0;
        let mut dsum = 0.0;
        let mut xn = 1.0;
        for n in 1..=depth {
            xn *= x;
            gsum += pref * xn;
            dsum += 1.0 / (8.0 * (n * n) as f64);
        }
        (gsum, dsum)
    }
}

pub fn technical_sequences(
    n: usize,
    omega: f64,
    omega_prime: f64,
) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(Error::Precondition("sequences are indexed from n = 1".into()));
    }
    let seq = TechnicalSequences::new(omega, omega_prime)?;
    Ok((seq.delta(n), seq.gamma(n), seq.alpha(n)))
}
