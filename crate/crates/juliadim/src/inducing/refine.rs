//! Refinement of the first return map: postcritical filling on U, the
//! first entry map to V, and the pull-back of the refined structure to V.
//!
//! Filling repeatedly composes the return map over the one branch whose
//! domain still contains the postcritical point, so that afterwards the
//! point sits inside a short branch mapping onto Z. The pull-back then
//! conjugates everything to branches proper over V: full-height branches
//! land on V after composing with the first entry map, short branches
//! keep their Z images, and the fold around the critical point survives
//! as a single small central branch which later stages may drop or
//! resolve further.

use super::*;
use crate::quadratic::Parameter;

/// Overall truncation allowance, as a multiple of eps^{3/4} |V|. The
/// allowance tracks the intrinsic mass of the short and folding branches,
/// which shrinks like eps^{3/4}, while the off-axis branch contributes a
/// weight of order sqrt(eps); the gap between the two exponents keeps
/// truncation from masking the dimension gain at small eps.
pub(crate) const TAIL_COEFF: f64 = 0.5;

/// Share of the allowance granted to the first entry enumeration.
pub(crate) const ENTRY_SHARE: f64 = 0.2;

/// Share available to the pull-back stage itself; the rest is kept for
/// the final assembly's rescue residue.
pub(crate) const STAR_SHARE: f64 = 0.3;

pub(crate) fn tail_budget(epsilon: f64, v: (f64, f64)) -> f64 {
    TAIL_COEFF * epsilon.powf(0.75) * (v.1 - v.0)
}

/// Refines the return map until the postcritical point lies in a short
/// branch. Output branches are long (onto U) or short (onto Z); the box Z
/// itself is untouched and acts as the identity region.
pub fn postcritical_filling(bx: &BoxMapping) -> Result<BoxMapping> {
    let c = bx.c;
    let z = bx.z;
    let psi0 = bx.postcritical;
    if bx.central.is_none() {
        return Err(Error::Precondition("return map lacks its folding branch".into()));
    }
    let base: Vec<Branch> = bx
        .branches
        .iter()
        .filter(|b| b.domain.1 <= z.0 || b.domain.0 >= z.1)
        .cloned()
        .collect();

    let mut longs = base.clone();
    let mut shorts: Vec<Branch> = Vec::new();
    let mut untracked = bx.untracked;
    let mut steps = 0usize;
    let mut flagged = false;

    let contains = |dom: (f64, f64)| psi0 > dom.0 && psi0 < dom.1;

    if !contains(z) {
        let seed = longs
            .iter()
            .position(|b| contains(b.domain))
            .ok_or_else(|| Error::Structure("postcritical point on a partition boundary".into()))?;
        let mut word = longs.remove(seed).itinerary;
        loop {
            steps += 1;
            if steps > FILLING_CAP {
                flagged = true;
                let dom = pull_interval(c, &word, bx.u)?;
                longs.push(mk_branch(c, dom, word, BranchKind::Long, Target::U)?);
                break;
            }
            let zp = pull_interval(c, &word, z)?;
            let terminal = contains(zp);
            // the short keeps the chain word: it maps its piece onto Z
            shorts.push(mk_branch(c, zp, word.clone(), BranchKind::Short, Target::Z)?);
            let mut next: Option<Vec<i8>> = None;
            for b0 in &base {
                let sub = pull_interval(c, &word, b0.domain)?;
                let mut w2 = word.clone();
                w2.extend_from_slice(&b0.itinerary);
                if !terminal && contains(sub) {
                    next = Some(w2);
                } else if sub.1 - sub.0 < RESOLUTION_FLOOR {
                    untracked += sub.1 - sub.0;
                } else {
                    longs.push(mk_branch(c, sub, w2, BranchKind::Long, Target::U)?);
                }
            }
            if terminal {
                break;
            }
            match next {
                Some(w2) => {
                    let dom = pull_interval(c, &w2, bx.u)?;
                    if dom.1 - dom.0 < RESOLUTION_FLOOR {
                        untracked += dom.1 - dom.0;
                        break;
                    }
                    word = w2;
                }
                None => {
                    return Err(Error::Structure(
                        "postcritical point fell between refinement pieces".into(),
                    ))
                }
            }
        }
    }

    let mut branches = longs;
    branches.append(&mut shorts);
    branches.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));
    Ok(BoxMapping {
        branches,
        central: None,
        untracked,
        filling_steps: steps,
        filling_flagged: flagged,
        ..bx.clone()
    })
}

/// First entry map to V on U minus V: compositions of the two outermost
/// return branches, restricted to where they first land in V.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstEntry {
    pub v: (f64, f64),
    pub branches: Vec<Branch>,
    /// measure of U minus V not covered by the enumerated branches
    pub untracked: f64,
    /// domain length below which chains were truncated
    pub cutoff: f64,
}

pub fn first_entry_map(bx: &BoxMapping, v: (f64, f64), budget: f64) -> Result<FirstEntry> {
    if !(budget > 0.0) {
        return Err(Error::Precondition("entry budget must be positive".into()));
    }
    let c = bx.c;
    let (q, mq) = bx.u;
    let gaps: [((f64, f64), [i8; 2]); 2] = [((q, v.0), [-1, -1]), ((v.1, mq), [1, -1])];

    let enumerate = |theta: f64| -> Result<(Vec<((f64, f64), Vec<i8>)>, f64)> {
        let mut raw = Vec::new();
        let mut dropped = 0.0;
        let mut queue: std::collections::VecDeque<((f64, f64), Vec<i8>)> =
            gaps.iter().map(|(d, w)| (*d, w.to_vec())).collect();
        while let Some((dom, word)) = queue.pop_front() {
            let entry = pull_interval(c, &word, v)?;
            if entry.1 - entry.0 >= theta {
                raw.push((entry, word.clone()));
            } else {
                dropped += entry.1 - entry.0;
            }
            for (gdom, gword) in &gaps {
                let sub = pull_interval(c, &word, *gdom)?;
                if sub.1 - sub.0 < theta {
                    dropped += sub.1 - sub.0;
                } else {
                    let mut w2 = word.clone();
                    w2.extend_from_slice(gword);
                    queue.push_back((sub, w2));
                }
            }
            if raw.len() > 500_000 {
                return Err(Error::Budget("first entry enumeration exceeded 5e5 branches".into()));
            }
            let _ = dom;
        }
        Ok((raw, dropped))
    };

    let mut theta = (0.15 * budget.powf(2.2)).clamp(1e-15, 1e-2);
    let mut best = None;
    for _ in 0..8 {
        let (raw, dropped) = enumerate(theta)?;
        if dropped <= budget {
            best = Some((raw, dropped, theta));
            if dropped >= 0.25 * budget {
                break;
            }
            // under budget by a wide margin: coarsen to save branches
            theta = (theta * (0.5 * budget / dropped.max(1e-300)).powf(2.2)).min(1e-2);
        } else {
            theta *= (0.5 * budget / dropped).powf(2.2);
            theta = theta.max(1e-15);
        }
    }
    let (raw, dropped, theta) = best.ok_or_else(|| {
        Error::Budget("first entry truncation could not meet its budget".into())
    })?;

    let mut branches = Vec::with_capacity(raw.len());
    for (dom, word) in raw {
        branches.push(mk_branch(c, dom, word, BranchKind::Long, Target::V)?);
    }
    branches.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));
    Ok(FirstEntry { v, branches, untracked: dropped, cutoff: theta })
}

/// Extension of a branch word over the full interval U: the same inverse
/// word applied to the endpoints of U, when it stays on one side of every
/// square root. Failure means the extension would cross the fold.
pub(crate) fn extension_over_u(c: f64, word: &[i8], u: (f64, f64)) -> Option<(f64, f64)> {
    let (mut a, mut b) = u;
    for &s in word.iter().rev() {
        let (sa, sb) = (a - c, b - c);
        if sa < 0.0 || sb < 0.0 {
            return None;
        }
        a = f64::from(s) * sa.sqrt();
        b = f64::from(s) * sb.sqrt();
    }
    Some(if a <= b { (a, b) } else { (b, a) })
}

/// One full-height piece awaiting composition with the entry map.
struct UItem {
    dom: (f64, f64),
    word: Vec<i8>,
    /// certified sup of the inverse branch derivative, for ledger bounds
    inv_sup: f64,
}

/// Partition of U induced by the filled map: long and short branches plus
/// the identity region Z, sorted left to right.
struct Piece {
    dom: (f64, f64),
    word: Vec<i8>,
    long: bool,
}

fn infty_pieces(infty: &BoxMapping) -> Vec<Piece> {
    let mut pieces: Vec<Piece> = infty
        .branches
        .iter()
        .map(|b| Piece { dom: b.domain, word: b.itinerary.clone(), long: b.kind == BranchKind::Long })
        .collect();
    pieces.push(Piece { dom: infty.z, word: Vec::new(), long: false });
    pieces.sort_by(|a, b| a.dom.0.total_cmp(&b.dom.0));
    pieces
}

/// Pulls the filled structure back to V. Long branches become proper over
/// V after entry composition, short branches keep Z as image, and the
/// piece of the fold covering the postcritical point becomes the central
/// branch of the result.
pub fn pullback_star(bx: &BoxMapping, infty: &BoxMapping, hv: &FirstEntry) -> Result<BoxMapping> {
    let c = bx.c;
    let v = infty.v.or(bx.v).ok_or_else(|| {
        Error::Precondition("pull-back requires the middle interval; run make_V first".into())
    })?;
    let z = bx.z;
    let psi0 = bx.postcritical;
    let cb = bx
        .central
        .as_ref()
        .ok_or_else(|| Error::Precondition("return map lacks its folding branch".into()))?;

    let pieces = infty_pieces(infty);
    let mut u_items: Vec<UItem> = Vec::new();
    let mut shorts: Vec<Branch> = Vec::new();
    let mut central: Option<CentralBranch> = None;
    let mut fixed_untracked = bx.untracked + infty.untracked;

    let light_inv_sup = |word: &[i8], dom: (f64, f64)| -> Result<f64> {
        let (lo, _) = deriv_bracket(c, word, dom, 2)?;
        Ok((-lo).exp())
    };

    // branches of the return map over V minus Z need no composition yet
    for br in &bx.branches {
        let inside_v = br.domain.0 >= v.0 - 1e-15 && br.domain.1 <= v.1 + 1e-15;
        let off_z = br.domain.1 <= z.0 + 1e-15 || br.domain.0 >= z.1 - 1e-15;
        if inside_v && off_z {
            u_items.push(UItem {
                dom: br.domain,
                word: br.itinerary.clone(),
                inv_sup: (-br.log_inf).exp(),
            });
        }
    }

    // neighbors of the fold: compose with the filled structure
    for br in &bx.branches {
        if !(br.domain.0 >= z.0 - 1e-15 && br.domain.1 <= z.1 + 1e-15) {
            continue;
        }
        let mut cursor = bx.u.0;
        for piece in &pieces {
            if piece.dom.0 > cursor + 1e-14 {
                let gap = pull_interval(c, &br.itinerary, (cursor, piece.dom.0))?;
                fixed_untracked += gap.1 - gap.0;
            }
            cursor = cursor.max(piece.dom.1);
            let sub = pull_interval(c, &br.itinerary, piece.dom)?;
            let mut w2 = br.itinerary.clone();
            w2.extend_from_slice(&piece.word);
            if piece.long {
                let inv_sup = light_inv_sup(&w2, sub)?;
                u_items.push(UItem { dom: sub, word: w2, inv_sup });
            } else {
                shorts.push(mk_branch(c, sub, w2, BranchKind::Short, Target::Z)?);
            }
        }
        if bx.u.1 > cursor + 1e-14 {
            let gap = pull_interval(c, &br.itinerary, (cursor, bx.u.1))?;
            fixed_untracked += gap.1 - gap.0;
        }
    }

    // the fold: pull every piece left of the postcritical point through
    // both monotone halves; the piece covering it folds into the central
    let k_top = bx.levels;
    let mut wr: Vec<i8> = vec![1, -1];
    wr.extend(std::iter::repeat(1).take(k_top));
    let mut wl = wr.clone();
    wl[0] = -1;
    debug_assert_eq!(wr.len(), cb.iterate);
    let mut cursor = bx.u.0;
    for piece in &pieces {
        if piece.dom.0 >= psi0 - 1e-13 {
            break;
        }
        if piece.dom.0 > cursor + 1e-14 {
            for half in [&wr, &wl] {
                let gap = pull_interval(c, half, (cursor, piece.dom.0))?;
                fixed_untracked += gap.1 - gap.0;
            }
        }
        cursor = cursor.max(piece.dom.1);
        if piece.dom.1 <= psi0 + 1e-13 {
            for half in [&wr, &wl] {
                let sub = pull_interval(c, half, piece.dom)?;
                let mut w2 = half.clone();
                w2.extend_from_slice(&piece.word);
                if piece.long {
                    let inv_sup = light_inv_sup(&w2, sub)?;
                    u_items.push(UItem { dom: sub, word: w2, inv_sup });
                } else {
                    shorts.push(mk_branch(c, sub, w2, BranchKind::Short, Target::Z)?);
                }
            }
        } else {
            // straddles the postcritical point: both halves join across 0
            let t = pull_point(c, &wr, piece.dom.0)?;
            let it = cb.iterate + piece.word.len();
            let tip = iterate(c, 0.0, it);
            let base = iterate(c, piece.dom.0, piece.word.len());
            let mut tail: Vec<i8> = wr[1..].to_vec();
            tail.extend_from_slice(&piece.word);
            central = Some(CentralBranch { domain: (-t, t), iterate: it, tip, base, tail });
        }
    }

    // compose full-height items with the entry map, largest pieces first
    let mut order: Vec<usize> = (0..hv.branches.len()).collect();
    order.sort_by(|&i, &j| hv.branches[j].length().total_cmp(&hv.branches[i].length()));
    let mut suffix = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix[k] = suffix[k + 1] + hv.branches[order[k]].length();
    }

    let budget_total = tail_budget(bx.epsilon, v);
    let hv_ledger: f64 = u_items.iter().map(|it| hv.untracked * it.inv_sup).sum();
    let cut_target = (STAR_SHARE * budget_total - hv_ledger).max(0.1 * STAR_SHARE * budget_total);

    let expand = |theta: f64| -> Result<(Vec<((f64, f64), Vec<i8>)>, f64)> {
        let mut raw = Vec::new();
        let mut dropped = 0.0;
        for item in &u_items {
            let dv = pull_interval(c, &item.word, v)?;
            if dv.1 - dv.0 >= theta {
                raw.push((dv, item.word.clone()));
            } else {
                dropped += dv.1 - dv.0;
            }
            for (k, &bi) in order.iter().enumerate() {
                let hb = &hv.branches[bi];
                if hb.length() * item.inv_sup < theta {
                    dropped += item.inv_sup * suffix[k];
                    break;
                }
                let sub = pull_interval(c, &item.word, hb.domain)?;
                if sub.1 - sub.0 < theta {
                    dropped += sub.1 - sub.0;
                    continue;
                }
                let mut w2 = item.word.clone();
                w2.extend_from_slice(&hb.itinerary);
                raw.push((sub, w2));
            }
            if raw.len() > 600_000 {
                return Err(Error::Budget("pull-back enumeration exceeded 6e5 branches".into()));
            }
        }
        Ok((raw, dropped))
    };

    let mut theta = (0.1 * cut_target.powf(2.2)).clamp(1e-15, 1e-3);
    let mut chosen = None;
    for _ in 0..8 {
        let (raw, dropped) = expand(theta)?;
        if dropped <= cut_target {
            chosen = Some((raw, dropped));
            if dropped >= 0.2 * cut_target {
                break;
            }
            theta = (theta * (0.5 * cut_target / dropped.max(1e-300)).powf(2.2)).min(1e-3);
        } else {
            theta = (theta * (0.5 * cut_target / dropped).powf(2.2)).max(1e-15);
        }
    }
    let (raw, cut_dropped) =
        chosen.ok_or_else(|| Error::Budget("pull-back truncation could not meet its budget".into()))?;

    let mut branches = Vec::with_capacity(raw.len() + shorts.len());
    for (dom, word) in raw {
        let mut br = mk_branch(c, dom, word, BranchKind::Long, Target::V)?;
        br.extension = extension_over_u(c, &br.itinerary, bx.u);
        branches.push(br);
    }
    branches.append(&mut shorts);
    branches.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));

    Ok(BoxMapping {
        c,
        epsilon: bx.epsilon,
        u: bx.u,
        v: Some(v),
        z,
        branches,
        central,
        escalator: bx.escalator.clone(),
        fold_scales: bx.fold_scales.clone(),
        levels: bx.levels,
        postcritical: psi0,
        untracked: fixed_untracked + hv_ledger + cut_dropped,
        filling_steps: infty.filling_steps,
        filling_flagged: infty.filling_flagged,
    })
}
