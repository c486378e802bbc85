//! Induced expanding maps for real quadratic parameters just above -2.
//!
//! The pipeline starts from the first return map to the fundamental
//! interval U = (q, -q), refines it so the critical value no longer sits
//! inside any full-height branch, transports the refined structure back to
//! the middle interval V, and finally assembles a complex Cantor repeller
//! whose branches are uniformly expanding inverse iterates of z^2 + c,
//! plus one branch on a disk W off the real line.
//!
//! Every branch is an iterate f^n restricted to an interval on which the
//! iterate is monotone. Its inverse is a composition of the two square
//! root branches, recorded as a sign word (the itinerary), so domains,
//! derivatives, and extensions are all computed by exact endpoint
//! pullback rather than grid search.

mod assemble;
mod first_return;
mod refine;

pub use assemble::{assemble_repeller, branch_tail_histogram, build_repeller, RepellerChecks, TailHistogram};
pub use first_return::{first_return_map, make_V};
pub use refine::{first_entry_map, postcritical_filling, pullback_star, FirstEntry};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pieces the derivative bracket splits a branch domain into.
pub const DERIV_PIECES: usize = 16;

/// Postcritical filling stops once the refined domain is this short.
pub const RESOLUTION_FLOOR: f64 = 1e-12;

/// Hard cap on filling iterations; lengths contract by 3 per step, so the
/// floor is reached far earlier.
pub const FILLING_CAP: usize = 200;

/// What a branch maps its domain onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    U,
    V,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    /// maps onto the full box (U before pull-back, V after)
    Long,
    /// maps onto Z only
    Short,
}

/// A monotone branch of an induced map: f^iterate restricted to `domain`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub domain: (f64, f64),
    pub iterate: usize,
    /// sign of f^j on the domain for j = 0..iterate; the inverse branch is
    /// the matching composition of signed square roots
    pub itinerary: Vec<i8>,
    /// +1 increasing, -1 decreasing; equals the product of the itinerary
    pub orientation: i8,
    pub kind: BranchKind,
    pub target: Target,
    /// certified bracket for log|deriv of f^iterate| over the domain
    pub log_inf: f64,
    pub log_sup: f64,
    /// domain of the extension mapping onto U, when the branch extends
    pub extension: Option<(f64, f64)>,
}

impl Branch {
    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }
}

/// The folding branch: f^iterate on a symmetric interval about 0, even,
/// monotone on each half.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralBranch {
    pub domain: (f64, f64),
    pub iterate: usize,
    /// image of 0, the top of the folded image interval
    pub tip: f64,
    /// image of the domain boundary, the bottom of the image interval
    pub base: f64,
    /// signs of f^j on the right half for j = 1..iterate (j = 0 folds)
    pub tail: Vec<i8>,
}

/// Interval map whose branches are proper onto a nest of boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxMapping {
    pub c: f64,
    pub epsilon: f64,
    /// fundamental interval (q, -q)
    pub u: (f64, f64),
    /// middle interval, set by make_V and carried through refinement
    pub v: Option<(f64, f64)>,
    /// neighborhood of the folding branch: hull of its two neighbors
    pub z: (f64, f64),
    pub branches: Vec<Branch>,
    pub central: Option<CentralBranch>,
    /// escalator of preimages of -q climbing to p
    pub escalator: Vec<f64>,
    /// boundary points v_k between consecutive return-time annuli
    pub fold_scales: Vec<f64>,
    /// index K with f(c) between escalator[K-1] and escalator[K]
    pub levels: usize,
    /// image of the critical point under the folding branch
    pub postcritical: f64,
    /// measure dropped by truncation at any stage
    pub untracked: f64,
    pub filling_steps: usize,
    pub filling_flagged: bool,
}

/// One complex branch domain off the real line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexBranch {
    pub center: Complex64,
    pub diam: f64,
    /// horizontal reach; stays below the fold scale so the domain clears
    /// every real branch disk
    pub re_extent: f64,
    pub im_range: (f64, f64),
    pub iterate: usize,
    /// signs for the monotone real part of the word; the first step maps
    /// into the upper half plane
    pub tail: Vec<i8>,
    pub log_deriv_center: f64,
}

/// Finitely many uniformly expanding inverse branches on disjoint disks,
/// each mapping onto the disk over V, plus one domain off the real line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorRepeller {
    pub c: f64,
    pub epsilon: f64,
    pub v: (f64, f64),
    pub disk_center: f64,
    pub disk_radius: f64,
    pub branches: Vec<Branch>,
    pub complex: ComplexBranch,
    /// total length of retained real domains
    pub coverage: f64,
    /// |V| minus coverage: truncation plus dropped folds and residue
    pub deficit: f64,
    /// composition power applied to the pulled-back map
    pub power: usize,
    /// first entry time of the critical orbit into the closure of U
    pub entry_time: usize,
}

/// sqrt branch: the inverse of f on the half line of the given sign.
#[inline]
pub(crate) fn pull_step(c: f64, sign: i8, u: f64) -> Result<f64> {
    let s = u - c;
    if s < 0.0 {
        return Err(Error::Structure(format!(
            "pullback left the slit plane: value {u} below c {c}"
        )));
    }
    Ok(f64::from(sign) * s.sqrt())
}

/// Inverse of f^n along the itinerary: y is pulled through the signed
/// square roots from the last letter to the first.
pub(crate) fn pull_point(c: f64, itinerary: &[i8], y: f64) -> Result<f64> {
    let mut u = y;
    for &s in itinerary.iter().rev() {
        u = pull_step(c, s, u)?;
    }
    Ok(u)
}

/// Same pullback accumulating log|(f^n)'| at the resulting point.
pub(crate) fn pull_point_logd(c: f64, itinerary: &[i8], y: f64) -> Result<(f64, f64)> {
    let mut u = y;
    let mut logd = 0.0;
    for &s in itinerary.iter().rev() {
        u = pull_step(c, s, u)?;
        logd += (2.0 * u.abs()).ln();
    }
    Ok((u, logd))
}

pub(crate) fn pull_interval(c: f64, itinerary: &[i8], y: (f64, f64)) -> Result<(f64, f64)> {
    let a = pull_point(c, itinerary, y.0)?;
    let b = pull_point(c, itinerary, y.1)?;
    Ok(if a <= b { (a, b) } else { (b, a) })
}

/// Complex pullback with derivative accumulation, for branch words whose
/// intermediate values stay inside disks over intervals right of c.
pub(crate) fn pull_complex_logd(c: f64, itinerary: &[i8], y: Complex64) -> (Complex64, f64) {
    let mut u = y;
    let mut logd = 0.0;
    for &s in itinerary.iter().rev() {
        u = (u - c).sqrt() * f64::from(s);
        logd += (2.0 * u.norm()).ln();
    }
    (u, logd)
}

/// Certified bracket for log|(f^n)'| over a domain on which f^n is
/// monotone with the given sign word. The domain splits into `pieces`
/// subintervals; on each, every intermediate image is the exact interval
/// between the endpoint iterates, so the chain-rule product over interval
/// moduli brackets the derivative.
pub(crate) fn deriv_bracket(
    c: f64,
    itinerary: &[i8],
    domain: (f64, f64),
    pieces: usize,
) -> Result<(f64, f64)> {
    let n = itinerary.len();
    let (lo, hi) = domain;
    if !(hi > lo) {
        return Err(Error::Precondition("empty branch domain".into()));
    }
    let mut log_inf = f64::INFINITY;
    let mut log_sup = f64::NEG_INFINITY;
    for i in 0..pieces {
        let a = lo + (hi - lo) * (i as f64) / (pieces as f64);
        let b = lo + (hi - lo) * ((i + 1) as f64) / (pieces as f64);
        let (mut xa, mut xb) = (a, b);
        let mut piece_lo = 0.0;
        let mut piece_hi = 0.0;
        for (j, &s) in itinerary.iter().enumerate() {
            let (ma, mb) = (xa.abs().min(xb.abs()), xa.abs().max(xb.abs()));
            if xa.signum() != xb.signum() || f64::from(s) * xa <= 0.0 {
                return Err(Error::Structure(format!(
                    "itinerary sign broken at step {j} of {n} on [{a}, {b}]"
                )));
            }
            piece_lo += (2.0 * ma).ln();
            piece_hi += (2.0 * mb).ln();
            xa = xa * xa + c;
            xb = xb * xb + c;
        }
        log_inf = log_inf.min(piece_lo);
        log_sup = log_sup.max(piece_hi);
    }
    Ok((log_inf, log_sup))
}

/// Forward check that the itinerary matches the actual orbit signs of x.
pub(crate) fn signs_hold(c: f64, itinerary: &[i8], x: f64) -> bool {
    let mut u = x;
    for &s in itinerary {
        if f64::from(s) * u <= 0.0 {
            return false;
        }
        u = u * u + c;
    }
    true
}

pub(crate) fn iterate(c: f64, x: f64, n: usize) -> f64 {
    let mut u = x;
    for _ in 0..n {
        u = u * u + c;
    }
    u
}

/// Build a branch from its word and domain, computing orientation and the
/// certified derivative bracket.
pub(crate) fn mk_branch(
    c: f64,
    domain: (f64, f64),
    itinerary: Vec<i8>,
    kind: BranchKind,
    target: Target,
) -> Result<Branch> {
    let (log_inf, log_sup) = deriv_bracket(c, &itinerary, domain, DERIV_PIECES)?;
    let orientation = itinerary.iter().map(|s| i32::from(*s)).product::<i32>().signum() as i8;
    Ok(Branch {
        domain,
        iterate: itinerary.len(),
        itinerary,
        orientation,
        kind,
        target,
        log_inf,
        log_sup,
        extension: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pullback_inverts_forward_iteration() {
        let c = -1.99;
        // x in (0,1) with f(x) < 0 < f^2(x): word [+,-]
        let x = 0.7;
        let y = iterate(c, x, 2);
        let word = [1i8, -1];
        assert!(signs_hold(c, &word, x));
        let back = pull_point(c, &word, y).unwrap();
        assert!((back - x).abs() < 1e-12);
        let (back2, logd) = pull_point_logd(c, &word, y).unwrap();
        assert_eq!(back, back2);
        let direct = (2.0 * x.abs()).ln() + (2.0 * iterate(c, x, 1).abs()).ln();
        assert!((logd - direct).abs() < 1e-12);
    }

    #[test]
    fn pullback_rejects_slit_crossings() {
        // pulling a value below c through a square root must fail loudly
        assert!(pull_point(-1.99, &[1], -1.995).is_err());
    }

    #[test]
    fn bracket_contains_midpoint_derivative() {
        let c = -1.99;
        let word = vec![1i8, -1];
        let domain = (0.55, 0.95);
        let (lo, hi) = deriv_bracket(c, &word, domain, DERIV_PIECES).unwrap();
        let mid = 0.5 * (domain.0 + domain.1);
        let (_, logd) = pull_point_logd(c, &word, iterate(c, mid, 2)).unwrap();
        assert!(lo <= logd && logd <= hi, "{lo} {logd} {hi}");
        assert!(lo < hi);
    }

    #[test]
    fn finer_pieces_tighten_the_bracket() {
        let c = -1.99;
        let word = vec![1i8, -1];
        let domain = (0.55, 0.95);
        let (lo4, hi4) = deriv_bracket(c, &word, domain, 4).unwrap();
        let (lo32, hi32) = deriv_bracket(c, &word, domain, 32).unwrap();
        assert!(lo32 >= lo4 && hi32 <= hi4);
        assert!((hi32 - lo32) <= 0.6 * (hi4 - lo4), "no tightening: {} vs {}", hi32 - lo32, hi4 - lo4);
    }

    #[test]
    fn bracket_rejects_sign_violations() {
        // domain straddles 0, so no monotone word fits
        assert!(deriv_bracket(-1.99, &[1, -1], (-0.1, 0.1), 4).is_err());
    }

    #[test]
    fn complex_pullback_matches_real_on_the_axis() {
        let c = -1.99;
        let word = vec![1i8, -1];
        let x = 0.7;
        let y = iterate(c, x, 2);
        let (w, logd_c) = pull_complex_logd(c, &word, Complex64::new(y, 0.0));
        let (xr, logd_r) = pull_point_logd(c, &word, y).unwrap();
        assert!((w.re - xr).abs() < 1e-12 && w.im.abs() < 1e-12);
        assert!((logd_c - logd_r).abs() < 1e-12);
    }
}
