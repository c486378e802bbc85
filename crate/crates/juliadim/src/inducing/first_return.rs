//! First return map to the fundamental interval U = (q, -q).
//!
//! For c = -2 + eps the critical value f(0) = c lies just right of -p, and
//! the return structure of U is governed by the escalator of preimages of
//! -q climbing toward the fixed point p: a_1 = -q, f(a_{k+1}) = a_k. The
//! level K with a_K < f(c) <= a_{K+1} sets the return time of the folding
//! branch and the number of monotone annuli around it.

use super::*;
use crate::quadratic::{fixed_points, Parameter};

/// Escalator a_1 = -q, a_{k+1} = sqrt(a_k - c), increasing to p. Returns
/// (levels K, escalator up to a_{K+2}) with f(c) in (a_K, a_{K+1}].
pub(crate) fn escalator(c: f64) -> Result<(usize, Vec<f64>)> {
    let fp = fixed_points(&Parameter::new(c))?;
    let fc = c * c + c;
    if fc >= fp.p {
        return Err(Error::Regime(format!("critical value {fc} beyond p {}", fp.p)));
    }
    let mut a = vec![-fp.q];
    while *a.last().unwrap() < fc {
        let next = (a.last().unwrap() - c).sqrt();
        a.push(next);
        if a.len() > 64 {
            return Err(Error::Regime("escalator failed to pass the critical value".into()));
        }
    }
    // a[k-1] holds a_k; the loop stops with a_{K+1} >= f(c) last
    let levels = a.len() - 1;
    if levels < 2 {
        return Err(Error::Regime(format!(
            "critical value below a_2: parameter too far from -2 (levels {levels})"
        )));
    }
    a.push((a.last().unwrap() - c).sqrt());
    Ok((levels, a))
}

/// Builds the first return map of f(x) = x^2 + c to U. Branches with
/// return time beyond `max_time` are dropped into the untracked ledger.
pub fn first_return_map(param: &Parameter, max_time: usize) -> Result<BoxMapping> {
    let c = param.c;
    let fp = fixed_points(&Parameter::new(c))?;
    let (levels, a) = escalator(c)?;
    let u = (fp.q, -fp.q);

    // v_k = sqrt(-a_{k+1} - c) marks where the return time steps from
    // 2 + k to 2 + k + 1; v_0 = -q closes the outer annulus.
    let mut v = Vec::with_capacity(levels);
    for k in 1..=levels {
        let s = -a[k] - c;
        if s <= 0.0 {
            return Err(Error::Structure(format!("fold scale {k} collapsed: {s}")));
        }
        v.push(s.sqrt());
    }
    let k_top = levels;
    let z = (-v[k_top - 2], v[k_top - 2]);
    let b = (-v[k_top - 1], v[k_top - 1]);

    let mut branches = Vec::new();
    let mut untracked = 0.0;
    let mut push = |dom: (f64, f64), word: Vec<i8>, branches: &mut Vec<Branch>, untracked: &mut f64| -> Result<()> {
        if word.len() > max_time {
            *untracked += dom.1 - dom.0;
            return Ok(());
        }
        let br = mk_branch(c, dom, word, BranchKind::Long, Target::U)?;
        verify_endpoints(c, &br, u)?;
        branches.push(br);
        Ok(())
    };

    push((fp.q, -v[0]), vec![-1, -1], &mut branches, &mut untracked)?;
    push((v[0], -fp.q), vec![1, -1], &mut branches, &mut untracked)?;
    for k in 1..k_top {
        let mut word = vec![1, -1];
        word.extend(std::iter::repeat(1).take(k));
        push((v[k], v[k - 1]), word.clone(), &mut branches, &mut untracked)?;
        word[0] = -1;
        push((-v[k - 1], -v[k]), word, &mut branches, &mut untracked)?;
    }

    let central_iterate = 2 + k_top;
    let (central, postcritical) = if central_iterate <= max_time {
        let tip = iterate(c, 0.0, central_iterate);
        let base = iterate(c, v[k_top - 1], central_iterate);
        if (base - fp.q).abs() > end_tol(central_iterate) {
            return Err(Error::Structure(format!(
                "folding branch boundary misses q: residual {}",
                (base - fp.q).abs()
            )));
        }
        if !(tip > fp.q && tip < -fp.q) {
            return Err(Error::Structure(format!("postcritical point {tip} escaped U")));
        }
        let mut tail = vec![-1i8];
        tail.extend(std::iter::repeat(1).take(k_top));
        (
            Some(CentralBranch { domain: b, iterate: central_iterate, tip, base: fp.q, tail }),
            tip,
        )
    } else {
        untracked += b.1 - b.0;
        (None, f64::NAN)
    };

    branches.sort_by(|x, y| x.domain.0.total_cmp(&y.domain.0));
    Ok(BoxMapping {
        c,
        epsilon: param.epsilon,
        u,
        v: None,
        z,
        branches,
        central,
        escalator: a,
        fold_scales: v,
        levels: k_top,
        postcritical,
        untracked,
        filling_steps: 0,
        filling_flagged: false,
    })
}

/// Endpoint iterates accumulate roundoff at the local expansion rate, so
/// the acceptance tolerance grows with the word length.
fn end_tol(n: usize) -> f64 {
    1e-12 + 4.0_f64.powi(n as i32) * 1e-15
}

fn verify_endpoints(c: f64, br: &Branch, u: (f64, f64)) -> Result<()> {
    let tol = end_tol(br.iterate);
    for e in [br.domain.0, br.domain.1] {
        let y = iterate(c, e, br.iterate);
        let hit = (y - u.0).abs().min((y - u.1).abs());
        if hit > tol {
            return Err(Error::Structure(format!(
                "branch endpoint {e} lands {hit:.3e} away from the box boundary"
            )));
        }
    }
    Ok(())
}

/// Middle interval V: U minus the closures of the two outermost branch
/// domains. Its boundary orbit v_1 -> -a_2 -> -q -> q is eventually fixed
/// at the repelling point q, so it never re-enters V; the finite prefix is
/// verified numerically and the fixed tail algebraically.
#[allow(non_snake_case)]
pub fn make_V(bx: &BoxMapping) -> Result<(f64, f64)> {
    let v1 = bx.fold_scales[0];
    let (q, mq) = bx.u;
    if !(v1 > 0.0 && v1 < mq) {
        return Err(Error::Structure(format!("middle interval degenerate: v1 {v1} vs q {q}")));
    }
    let c = bx.c;
    let a2 = bx.escalator[1];
    // orbit chain residuals: each step is an algebraic identity
    let r1 = (iterate(c, v1, 1) + a2).abs();
    let r2 = (iterate(c, -a2, 1) + q).abs();
    let r3 = (iterate(c, -q, 1) - q).abs();
    let r4 = (iterate(c, q, 1) - q).abs();
    let tol = 1e-10;
    if r1.max(r2).max(r3).max(r4) > tol {
        return Err(Error::Structure(format!(
            "boundary orbit residuals too large: {r1:.2e} {r2:.2e} {r3:.2e} {r4:.2e}"
        )));
    }
    // every orbit point sits outside (-v1, v1)
    for y in [-a2, -q, q] {
        if y.abs() < v1 {
            return Err(Error::Structure(format!("boundary orbit point {y} fell into V")));
        }
    }
    Ok((-v1, v1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tip(eps: f64) -> Parameter {
        Parameter::new(-2.0 + eps)
    }

    #[test]
    fn inventory_tiles_the_fundamental_interval() {
        let bx = first_return_map(&tip(1e-2), 10_000).unwrap();
        let mut cuts: Vec<(f64, f64)> = bx.branches.iter().map(|b| b.domain).collect();
        cuts.push(bx.central.as_ref().unwrap().domain);
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((cuts[0].0 - bx.u.0).abs() < 1e-12);
        assert!((cuts.last().unwrap().1 - bx.u.1).abs() < 1e-12);
        for w in cuts.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-12, "gap between {:?} and {:?}", w[0], w[1]);
        }
        assert_eq!(bx.untracked, 0.0);
        // 2K+1 domains: two outer, two per inner annulus, one fold
        assert_eq!(cuts.len(), 2 * bx.levels + 1);
    }

    #[test]
    fn branches_return_exactly_at_their_time() {
        let bx = first_return_map(&tip(3e-3), 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let inside = |y: f64| y > bx.u.0 && y < bx.u.1;
        for br in &bx.branches {
            for _ in 0..200 {
                let x = rng.gen_range(br.domain.0..br.domain.1);
                let mut y = x;
                for j in 1..br.iterate {
                    y = y * y + bx.c;
                    assert!(!inside(y), "early return at step {j} from branch {:?}", br.domain);
                }
                y = y * y + bx.c;
                assert!(inside(y), "no return from branch {:?}", br.domain);
                assert!(signs_hold(bx.c, &br.itinerary, x));
            }
        }
        let cb = bx.central.as_ref().unwrap();
        for _ in 0..200 {
            let x = rng.gen_range(cb.domain.0..cb.domain.1);
            let mut y = x;
            for _ in 1..cb.iterate {
                y = y * y + bx.c;
                assert!(!inside(y));
            }
            y = y * y + bx.c;
            assert!(inside(y));
        }
    }

    #[test]
    fn fold_image_spans_base_to_tip() {
        let bx = first_return_map(&tip(1e-3), 10_000).unwrap();
        let cb = bx.central.as_ref().unwrap();
        assert!((iterate(bx.c, 0.0, cb.iterate) - cb.tip).abs() < 1e-12);
        // evenness and monotonicity on the right half
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = rng.gen_range(0.0..cb.domain.1);
            let l = iterate(bx.c, -x, cb.iterate);
            let r = iterate(bx.c, x, cb.iterate);
            assert!((l - r).abs() < 1e-9 * (1.0 + l.abs()));
            assert!(r <= cb.tip + 1e-12 && r >= cb.base - 1e-9);
        }
    }

    #[test]
    fn parameters_right_of_the_tip_regime_are_rejected() {
        let p = Parameter::new(-1.75);
        match first_return_map(&p, 10_000) {
            Err(Error::Regime(_)) => {}
            other => panic!("expected regime error, got {other:?}"),
        }
        // just inside: two levels suffice
        let bx = first_return_map(&Parameter::new(-1.9), 10_000).unwrap();
        assert_eq!(bx.levels, 2);
    }

    #[test]
    fn level_count_grows_logarithmically() {
        for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
            let bx = first_return_map(&tip(eps), 10_000).unwrap();
            let predicted = (3.0 / (8.0 * eps)).ln() / 4.0_f64.ln() + 1.0;
            assert!(
                (bx.levels as f64 - predicted).abs() <= 2.0,
                "levels {} vs predicted {predicted:.2} at eps {eps}",
                bx.levels
            );
        }
    }

    #[test]
    fn fold_neighborhood_scales_like_sqrt_eps() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let bx = first_return_map(&tip(eps), 10_000).unwrap();
            let zlen = bx.z.1 - bx.z.0;
            let s = eps.sqrt();
            assert!(zlen <= 10.0 * s, "|Z| {zlen} too large at eps {eps}");
            assert!(zlen >= 2.0 * s, "|Z| {zlen} too small at eps {eps}");
        }
    }

    #[test]
    fn expansion_off_the_fold_neighborhood() {
        for eps in [1e-2, 1e-4] {
            let bx = first_return_map(&tip(eps), 10_000).unwrap();
            for br in &bx.branches {
                if br.domain.1 <= bx.z.0 || br.domain.0 >= bx.z.1 {
                    assert!(
                        br.log_inf >= 3.0_f64.ln() - 1e-9,
                        "derivative {} below 3 off Z at eps {eps}",
                        br.log_inf.exp()
                    );
                }
            }
        }
    }

    #[test]
    fn middle_interval_has_the_limiting_length() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let bx = first_return_map(&tip(eps), 10_000).unwrap();
            let v = make_V(&bx).unwrap();
            assert!((v.0 + v.1).abs() < 1e-15);
            let len = v.1 - v.0;
            // the length tends to 2 sqrt(2 - sqrt 3) ~ 1.035, well short of |U| -> 2
            assert!(len > 1.0 && len < 1.07, "|V| = {len} at eps {eps}");
            let gap_left = v.0 - bx.u.0;
            let gap_right = bx.u.1 - v.1;
            assert!(gap_left > 0.4 && gap_right > 0.4);
        }
    }

    #[test]
    fn short_time_budget_drops_deep_branches() {
        let p = tip(1e-3);
        let full = first_return_map(&p, 10_000).unwrap();
        let cut = first_return_map(&p, 3).unwrap();
        assert!(cut.branches.len() < full.branches.len());
        assert!(cut.central.is_none());
        assert!(cut.untracked > 0.0);
        let dropped: f64 = full
            .branches
            .iter()
            .filter(|b| b.iterate > 3)
            .map(Branch::length)
            .sum::<f64>()
            + full.central.as_ref().map(|cb| cb.domain.1 - cb.domain.0).unwrap();
        assert!((cut.untracked - dropped).abs() < 1e-12);
    }

    #[test]
    fn derivative_brackets_hold_at_random_points() {
        let bx = first_return_map(&tip(1e-3), 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for br in &bx.branches {
            for _ in 0..20 {
                let x = rng.gen_range(br.domain.0..br.domain.1);
                let y = iterate(bx.c, x, br.iterate);
                let (back, logd) = pull_point_logd(bx.c, &br.itinerary, y).unwrap();
                assert!((back - x).abs() < 1e-7 * (1.0 + x.abs()));
                assert!(br.log_inf - 1e-9 <= logd && logd <= br.log_sup + 1e-9);
            }
        }
    }
}
