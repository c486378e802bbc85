//! Assembly of the Cantor repeller: rescues the short and folding pieces
//! of the pulled-back map by composing them with the map itself until
//! every retained branch is proper over V, adjoins one complex branch off
//! the real line, and certifies the geometry.
//!
//! Rescue works against a frozen copy of the pulled-back partition. A
//! short piece maps onto Z, so its domain splits along the partition
//! restricted to Z; a folding piece maps two-to-one onto an interval
//! reaching its tip at the image of the fold point, so every partition
//! piece strictly below the tip lifts twice, while the piece covering the
//! tip folds again and recurses. Compositions contract by the uniform
//! expansion factor, so the queue drains geometrically.

use num_complex::Complex64;

use super::first_return::{escalator, first_return_map, make_V};
use super::refine::{
    extension_over_u, first_entry_map, postcritical_filling, pullback_star, tail_budget,
    ENTRY_SHARE,
};
use super::*;
use crate::quadratic::Parameter;

/// Share of the truncation allowance granted to the rescue residue.
pub(crate) const RESCUE_SHARE: f64 = 0.5;

/// Compositions per rescued branch before the piece is surrendered.
const COMPOSE_CAP: usize = 24;

/// Boundary alignment tolerance between frozen pieces and job images.
const ALIGN: f64 = 1e-12;

enum Frozen<'a> {
    Piece(&'a Branch),
    Fold(&'a CentralBranch),
}

impl Frozen<'_> {
    fn dom(&self) -> (f64, f64) {
        match self {
            Frozen::Piece(b) => b.domain,
            Frozen::Fold(cb) => cb.domain,
        }
    }
}

enum Job {
    /// composite word mapping its implicit domain onto Z
    Short { word: Vec<i8>, depth: usize },
    /// monotone prefix into the folding branch `fold`
    Fold { prefix: Vec<i8>, fold: CentralBranch, depth: usize },
}

fn fold_right_word(fold: &CentralBranch) -> Vec<i8> {
    let mut w = Vec::with_capacity(fold.iterate);
    w.push(1);
    w.extend_from_slice(&fold.tail);
    w
}

fn stem_word(prefix: &[i8], sign: i8, fold: &CentralBranch) -> Vec<i8> {
    let mut w = Vec::with_capacity(prefix.len() + fold.iterate);
    w.extend_from_slice(prefix);
    w.push(sign);
    w.extend_from_slice(&fold.tail);
    w
}

struct Rescue {
    finals: Vec<((f64, f64), Vec<i8>)>,
    residue: f64,
}

fn rescue(star: &BoxMapping, frozen: &[Frozen], theta: f64) -> Result<Rescue> {
    let c = star.c;
    let z = star.z;
    let mut finals = Vec::new();
    let mut residue = 0.0;
    let mut cat: std::collections::BTreeMap<&str, f64> = Default::default();
    let mut queue: std::collections::VecDeque<Job> = std::collections::VecDeque::new();

    for br in &star.branches {
        if br.kind == BranchKind::Short {
            queue.push_back(Job::Short { word: br.itinerary.clone(), depth: 0 });
        }
    }
    if let Some(cb) = &star.central {
        queue.push_back(Job::Fold { prefix: Vec::new(), fold: cb.clone(), depth: 0 });
        eprintln!(
            "[dbg] central dom=({:.6},{:.6}) iterate={} tip={:.6} base={:.6} v={:?} z={:?} short_measure={:.3e}",
            cb.domain.0, cb.domain.1, cb.iterate, cb.tip, cb.base, star.v, star.z,
            star.branches.iter().filter(|b| b.kind == BranchKind::Short).map(Branch::length).sum::<f64>()
        );
    }

    let in_range = |interval: (f64, f64)| {
        let start = frozen.partition_point(|f| f.dom().1 <= interval.0 + ALIGN);
        let end = frozen.partition_point(|f| f.dom().0 < interval.1 - ALIGN);
        start..end
    };

    // static partition of Z: cell boundaries and, per cell, the index of the
    // frozen piece filling it (None marks gaps and boundary-straddling
    // pieces, both surrendered to the residue)
    let (zxs, zcells) = {
        let mut xs = vec![z.0];
        let mut cells: Vec<Option<usize>> = Vec::new();
        let range = in_range(z);
        for idx in range {
            let dom = frozen[idx].dom();
            let cursor = *xs.last().unwrap();
            if dom.0 > cursor + ALIGN {
                xs.push(dom.0);
                cells.push(None);
            }
            let hi = dom.1.min(z.1);
            if hi > *xs.last().unwrap() + ALIGN {
                let straddles = dom.0 < z.0 - ALIGN || dom.1 > z.1 + ALIGN;
                xs.push(hi);
                cells.push(if straddles { None } else { Some(idx) });
            }
        }
        if z.1 > *xs.last().unwrap() + ALIGN {
            xs.push(z.1);
            cells.push(None);
        }
        (xs, cells)
    };
    {
        let mut long_m = 0.0;
        let mut short_m = 0.0;
        let mut fold_m = 0.0;
        let mut gap_m = 0.0;
        for (i, cell) in zcells.iter().enumerate() {
            let w = zxs[i + 1] - zxs[i];
            match cell.map(|idx| &frozen[idx]) {
                None => gap_m += w,
                Some(Frozen::Piece(b)) if b.kind == BranchKind::Long => long_m += w,
                Some(Frozen::Piece(_)) => short_m += w,
                Some(Frozen::Fold(_)) => fold_m += w,
            }
        }
        eprintln!(
            "[dbg] zparts cells={} long={long_m:.4e} short={short_m:.4e} fold={fold_m:.4e} gap={gap_m:.4e} of |Z|={:.4e}",
            zcells.len(),
            z.1 - z.0
        );
    }

    let mut spent = 0usize;
    while let Some(job) = queue.pop_front() {
        spent += 1;
        if spent > 250_000 {
            return Err(Error::Budget("rescue queue exceeded 2.5e5 jobs".into()));
        }
        match job {
            Job::Short { word, depth } => {
                // binary descent over the Z partition: a cell range whose
                // pulled measure is below the cutoff is surrendered in one
                // piece, so the cost scales with what is kept, not with the
                // fineness of the partition
                let p_lo = pull_point(c, &word, z.0)?;
                let p_hi = pull_point(c, &word, z.1)?;
                let mut stack: Vec<(usize, usize, f64, f64)> =
                    vec![(0, zcells.len(), p_lo, p_hi)];
                while let Some((i, j, plo, phi)) = stack.pop() {
                    let span = (phi - plo).abs();
                    if span < theta {
                        { let _d = span; residue += _d; *cat.entry("s_prune").or_insert(0.0) += _d; }
                        continue;
                    }
                    if j - i > 1 {
                        let mid = (i + j) / 2;
                        let pm = pull_point(c, &word, zxs[mid])?;
                        stack.push((i, mid, plo, pm));
                        stack.push((mid, j, pm, phi));
                        continue;
                    }
                    let sub = (plo.min(phi), plo.max(phi));
                    match zcells[i].map(|idx| &frozen[idx]) {
                        None => {
                            { let _d = span; residue += _d; *cat.entry("s_gap").or_insert(0.0) += _d; }
                        }
                        Some(Frozen::Piece(b)) if b.kind == BranchKind::Long => {
                            if sub.0.abs() < 1e-11 || sub.1.abs() < 1e-11 {
                                // sliver degenerating onto the critical
                                // point: no expansion left to certify
                                { let _d = span; residue += _d; *cat.entry("s_cap0").or_insert(0.0) += _d; }
                            } else {
                                let mut w2 = word.clone();
                                w2.extend_from_slice(&b.itinerary);
                                finals.push((sub, w2));
                            }
                        }
                        Some(Frozen::Piece(b)) => {
                            if depth >= COMPOSE_CAP {
                                { let _d = span; residue += _d; *cat.entry("s_depth").or_insert(0.0) += _d; }
                            } else {
                                let mut w2 = word.clone();
                                w2.extend_from_slice(&b.itinerary);
                                queue.push_back(Job::Short { word: w2, depth: depth + 1 });
                            }
                        }
                        Some(Frozen::Fold(cb)) => {
                            if depth >= COMPOSE_CAP {
                                { let _d = span; residue += _d; *cat.entry("s_depth").or_insert(0.0) += _d; }
                            } else {
                                queue.push_back(Job::Fold {
                                    prefix: word.clone(),
                                    fold: (*cb).clone(),
                                    depth: depth + 1,
                                });
                            }
                        }
                    }
                }
            }
            Job::Fold { prefix, fold, depth } => {
                let tip_at_hi = fold.tip >= fold.base;
                let (jlo, jhi) = if tip_at_hi { (fold.base, fold.tip) } else { (fold.tip, fold.base) };
                if jhi - jlo < ALIGN {
                    continue;
                }
                let own = pull_interval(c, &prefix, fold.domain)?;
                if own.1 - own.0 < theta {
                    { let _d = own.1 - own.0; residue += _d; *cat.entry("s07").or_insert(0.0) += _d; }
                    continue;
                }
                let right = fold_right_word(&fold);
                let stems = [stem_word(&prefix, 1, &fold), stem_word(&prefix, -1, &fold)];
                let x_measure = |y_edge: f64| -> Result<f64> {
                    let t = pull_point(c, &right, y_edge)?;
                    let span = pull_interval(c, &prefix, (-t, t))?;
                    Ok(span.1 - span.0)
                };
                let mut cursor = jlo;
                for fz in &frozen[in_range((jlo, jhi))] {
                    let dom = fz.dom();
                    if dom.0 > cursor + ALIGN {
                        let gap_hi = dom.0.min(jhi);
                        if !tip_at_hi && cursor <= jlo + ALIGN {
                            // gap at a low tip is the unresolved cap
                            // around the fold point
                            { let _d = x_measure(gap_hi)?; residue += _d; *cat.entry("s08").or_insert(0.0) += _d; }
                        } else {
                            for stem in &stems {
                                let gap = pull_interval(c, stem, (cursor, gap_hi))?;
                                { let _d = gap.1 - gap.0; residue += _d; *cat.entry("s09").or_insert(0.0) += _d; }
                            }
                        }
                    }
                    cursor = cursor.max(dom.1.min(jhi));
                    // the piece holding the tip end folds again: its pull
                    // joins across the critical preimage
                    let holds_tip =
                        if tip_at_hi { dom.1 >= jhi - ALIGN } else { dom.0 <= jlo + ALIGN };
                    if holds_tip {
                        let y_edge = if tip_at_hi { dom.0.max(jlo) } else { dom.1.min(jhi) };
                        match fz {
                            Frozen::Fold(_) => {
                                // a fold image ending inside another fold
                                // would need a two-critical-point branch
                                { let _d = x_measure(y_edge)?; residue += _d; *cat.entry("s10").or_insert(0.0) += _d; }
                            }
                            Frozen::Piece(b) => {
                                let measure = x_measure(y_edge)?;
                                if measure < theta || depth >= COMPOSE_CAP {
                                    { let _d = measure; residue += _d; *cat.entry("s11").or_insert(0.0) += _d; }
                                } else {
                                    let n2 = b.itinerary.len();
                                    let mut tail2 = fold.tail.clone();
                                    tail2.extend_from_slice(&b.itinerary);
                                    queue.push_back(Job::Fold {
                                        prefix: prefix.clone(),
                                        fold: CentralBranch {
                                            domain: {
                                                let t = pull_point(c, &right, y_edge)?;
                                                (-t, t)
                                            },
                                            iterate: fold.iterate + n2,
                                            tip: iterate(c, fold.tip, n2),
                                            base: iterate(c, y_edge, n2),
                                            tail: tail2,
                                        },
                                        depth: depth + 1,
                                    });
                                }
                            }
                        }
                        continue;
                    }
                    let inside = dom.0 >= jlo - ALIGN && dom.1 <= jhi + ALIGN;
                    let (lo, hi) = (dom.0.max(jlo), dom.1.min(jhi));
                    if hi - lo < ALIGN {
                        continue;
                    }
                    if !inside {
                        // misaligned overlap: surrender it rather than
                        // build a branch that is not proper
                        for stem in &stems {
                            let sub = pull_interval(c, stem, (lo, hi))?;
                            { let _d = sub.1 - sub.0; residue += _d; *cat.entry("s12").or_insert(0.0) += _d; }
                        }
                        continue;
                    }
                    for stem in &stems {
                        let sub = pull_interval(c, stem, (lo, hi))?;
                        let slen = sub.1 - sub.0;
                        match fz {
                            Frozen::Piece(b) if b.kind == BranchKind::Long => {
                                if slen < theta || sub.0.abs() < 1e-11 || sub.1.abs() < 1e-11 {
                                    { let _d = slen; residue += _d; *cat.entry("s13").or_insert(0.0) += _d; }
                                } else {
                                    let mut w2 = stem.clone();
                                    w2.extend_from_slice(&b.itinerary);
                                    finals.push((sub, w2));
                                }
                            }
                            Frozen::Piece(b) => {
                                if slen < theta || depth >= COMPOSE_CAP {
                                    { let _d = slen; residue += _d; *cat.entry("s14").or_insert(0.0) += _d; }
                                } else {
                                    let mut w2 = stem.clone();
                                    w2.extend_from_slice(&b.itinerary);
                                    queue.push_back(Job::Short { word: w2, depth: depth + 1 });
                                }
                            }
                            Frozen::Fold(cb) => {
                                if slen < theta || depth >= COMPOSE_CAP {
                                    { let _d = slen; residue += _d; *cat.entry("s15").or_insert(0.0) += _d; }
                                } else {
                                    queue.push_back(Job::Fold {
                                        prefix: stem.clone(),
                                        fold: (*cb).clone(),
                                        depth: depth + 1,
                                    });
                                }
                            }
                        }
                    }
                }
                if jhi > cursor + ALIGN {
                    if tip_at_hi {
                        // nothing frozen reaches the tip: surrender the
                        // cap around the fold point
                        { let _d = x_measure(cursor)?; residue += _d; *cat.entry("s16").or_insert(0.0) += _d; }
                    } else if cursor <= jlo + ALIGN {
                        { let _d = x_measure(jhi)?; residue += _d; *cat.entry("s17").or_insert(0.0) += _d; }
                    } else {
                        for stem in &stems {
                            let gap = pull_interval(c, stem, (cursor, jhi))?;
                            { let _d = gap.1 - gap.0; residue += _d; *cat.entry("s18").or_insert(0.0) += _d; }
                        }
                    }
                }
            }
        }
    }
    eprintln!("[dbg] residue cats {cat:?}");
    Ok(Rescue { finals, residue })
}

/// Retains the long branches of the pulled-back map, rescues everything
/// else by composition, optionally raises the map to a power, and adjoins
/// the complex branch.
pub fn assemble_repeller(star: &BoxMapping, k_power: usize, param: &Parameter) -> Result<CantorRepeller> {
    if (star.c - param.c).abs() > 1e-15 {
        return Err(Error::Precondition("parameter does not match the pulled-back map".into()));
    }
    if k_power == 0 {
        return Err(Error::Precondition("composition power must be at least 1".into()));
    }
    let c = star.c;
    let v = star
        .v
        .ok_or_else(|| Error::Precondition("pulled-back map carries no middle interval".into()))?;

    let mut frozen: Vec<Frozen> = star.branches.iter().map(Frozen::Piece).collect();
    if let Some(cb) = &star.central {
        frozen.push(Frozen::Fold(cb));
    }
    frozen.sort_by(|a, b| a.dom().0.total_cmp(&b.dom().0));

    let budget = RESCUE_SHARE * tail_budget(star.epsilon, v);
    let mut theta = 5e-4 * budget;
    let mut outcome = None;
    for _ in 0..5 {
        let t0 = std::time::Instant::now();
        let r = rescue(star, &frozen, theta)?;
        eprintln!(
            "[dbg] rescue eps={:.1e} theta={theta:.3e} residue={:.3e} budget={budget:.3e} finals={} took={:?} frozen={}",
            star.epsilon,
            r.residue,
            r.finals.len(),
            t0.elapsed(),
            frozen.len()
        );
        if r.residue <= budget {
            outcome = Some(r);
            break;
        }
        theta *= 0.15;
    }
    let rescued = outcome.ok_or_else(|| {
        Error::Budget("rescue residue stayed above its allowance at the finest cutoff".into())
    })?;

    let mut branches: Vec<Branch> = star
        .branches
        .iter()
        .filter(|b| b.kind == BranchKind::Long)
        .cloned()
        .collect();
    for (dom, word) in rescued.finals {
        let mut br = mk_branch(c, dom, word, BranchKind::Long, Target::V)?;
        br.extension = extension_over_u(c, &br.itinerary, star.u);
        branches.push(br);
    }
    branches.retain(|b| b.log_inf > std::f64::consts::LN_2);
    branches.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));

    let branches = if k_power > 1 {
        compose_power(c, &branches, k_power, star.u)?
    } else {
        branches
    };

    let coverage: f64 = branches.iter().map(Branch::length).sum();
    let deficit = (v.1 - v.0) - coverage;
    let complex = off_axis_branch(c, star.levels, v)?;
    let entry_time = critical_entry_time(c, star.u, 10 * star.levels + 40)?;
    eprintln!(
        "[dbg] W diam={:.3e} diam/sqrt(eps)={:.3} w_weight={:.3e} deficit={:.3e} deficit/eps34={:.3} branches={}",
        complex.diam,
        complex.diam / star.epsilon.sqrt(),
        (-complex.log_deriv_center).exp(),
        deficit,
        deficit / (star.epsilon.powf(0.75) * (v.1 - v.0)),
        branches.len()
    );

    Ok(CantorRepeller {
        c,
        epsilon: star.epsilon,
        v,
        disk_center: 0.5 * (v.0 + v.1),
        disk_radius: 0.5 * (v.1 - v.0),
        branches,
        complex,
        coverage,
        deficit,
        power: k_power,
        entry_time,
    })
}

/// Steps until the critical orbit first enters the closure of U.
fn critical_entry_time(c: f64, u: (f64, f64), cap: usize) -> Result<usize> {
    let mut x = 0.0;
    for j in 1..=cap {
        x = x * x + c;
        if x >= u.0 - 1e-12 && x <= u.1 + 1e-12 {
            return Ok(j);
        }
    }
    Err(Error::Structure("critical orbit failed to reach U".into()))
}

/// The branch off the real line: K+1 climbs of the increasing square root
/// from V, one decreasing step into (-p, c], then the root across the
/// slit into the upper half plane.
fn off_axis_branch(c: f64, k_top: usize, v: (f64, f64)) -> Result<ComplexBranch> {
    let cc = Complex64::new(c, 0.0);
    let zeta = |y: Complex64| -> Complex64 {
        let mut u = y;
        for _ in 0..=k_top {
            u = (u - cc).sqrt();
        }
        u = -((u - cc).sqrt());
        Complex64::i() * (cc - u).sqrt()
    };
    let w0 = zeta(Complex64::new(0.0, 0.0));
    let iterate_n = k_top + 3;
    let mut logd = 0.0;
    let mut zz = w0;
    for _ in 0..iterate_n {
        logd += (2.0 * zz.norm()).ln();
        zz = zz * zz + cc;
    }
    if zz.norm() > 1e-6 {
        return Err(Error::Structure(format!(
            "off-axis branch fails to return to the critical point: residual {}",
            zz.norm()
        )));
    }

    let center = 0.5 * (v.0 + v.1);
    let radius = 0.5 * (v.1 - v.0);
    let samples: Vec<Complex64> = (0..64)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64) / 64.0;
            zeta(Complex64::new(center + radius * th.cos(), radius * th.sin()))
        })
        .collect();
    let mut diam = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            diam = diam.max((samples[i] - samples[j]).norm());
        }
    }
    let re_extent = samples.iter().map(|w| w.re.abs()).fold(0.0f64, f64::max);
    let im_lo = samples.iter().map(|w| w.im).fold(f64::INFINITY, f64::min);
    let im_hi = samples.iter().map(|w| w.im).fold(f64::NEG_INFINITY, f64::max);

    let mut tail = vec![-1i8];
    tail.extend(std::iter::repeat(1).take(k_top + 1));
    Ok(ComplexBranch {
        center: w0,
        diam,
        re_extent,
        im_range: (im_lo, im_hi),
        iterate: iterate_n,
        tail,
        log_deriv_center: logd,
    })
}

fn compose_power(c: f64, base: &[Branch], k: usize, u: (f64, f64)) -> Result<Vec<Branch>> {
    let mut acc: Vec<Branch> = base.to_vec();
    for _ in 1..k {
        if base.len().saturating_mul(acc.len()) > 1_200_000 {
            return Err(Error::Budget(format!(
                "composition power would exceed 1.2e6 branches ({} x {})",
                base.len(),
                acc.len()
            )));
        }
        let mut next = Vec::with_capacity(base.len() * acc.len());
        for b1 in base {
            for b2 in &acc {
                let dom = pull_interval(c, &b1.itinerary, b2.domain)?;
                let mut word = b1.itinerary.clone();
                word.extend_from_slice(&b2.itinerary);
                let mut br = mk_branch(c, dom, word, BranchKind::Long, Target::V)?;
                br.extension = extension_over_u(c, &br.itinerary, u);
                next.push(br);
            }
        }
        acc = next;
    }
    acc.sort_by(|a, b| a.domain.0.total_cmp(&b.domain.0));
    Ok(acc)
}

/// Certified geometry report. Disjointness of the branch disks follows
/// from three separations: real domains have gaps, domains outside the
/// fold stay right of the off-axis branch's real extent, and domains
/// inside the fold have f-images right of c while the off-axis branch's
/// f-image lies left of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepellerChecks {
    pub min_log_expansion: f64,
    pub max_distortion: f64,
    pub real_gaps_ok: bool,
    /// fold scale minus the off-axis branch's real extent
    pub re_separation: f64,
    /// min over fold-interior domains of (c + x_min^2) - sup of the
    /// off-axis branch's f-image
    pub fold_image_gap: f64,
    /// distance from the off-axis branch's last pullback interval to the
    /// square root slit at c
    pub slit_gap: f64,
    pub w_above_axis: f64,
    pub w_inside_disk: f64,
    pub entry_time_match: bool,
    pub w_residual: f64,
    pub extensions_ok: bool,
    pub all_pass: bool,
}

impl CantorRepeller {
    pub fn checks(&self) -> Result<RepellerChecks> {
        let c = self.c;
        let (k_top, a) = escalator(c)?;
        let v_fold = (-a[k_top] - c).sqrt();
        let a_hi = -a[k_top + 1];

        let mut min_log_expansion = f64::INFINITY;
        let mut max_distortion = 0.0f64;
        let mut real_gaps_ok = true;
        let mut fold_image_gap = f64::INFINITY;
        let mut extensions_ok = true;
        let mut prev_hi = f64::NEG_INFINITY;
        for br in &self.branches {
            min_log_expansion = min_log_expansion.min(br.log_inf);
            max_distortion = max_distortion.max(br.log_sup - br.log_inf);
            if br.domain.0 < prev_hi - 1e-15 {
                real_gaps_ok = false;
            }
            prev_hi = br.domain.1;
            match br.extension {
                Some(ext) => {
                    if ext.0 > br.domain.0 + 1e-12 || ext.1 < br.domain.1 - 1e-12 {
                        extensions_ok = false;
                    }
                }
                None => extensions_ok = false,
            }
            let (d0, d1) = (br.domain.0.abs(), br.domain.1.abs());
            if d0.max(d1) <= v_fold + 1e-12 {
                let x_min = d0.min(d1);
                fold_image_gap = fold_image_gap.min(c + x_min * x_min - a_hi);
            }
        }

        let re_separation = v_fold - self.complex.re_extent;
        let slit_gap = c - a_hi;
        let w_above_axis = self.complex.im_range.0;
        let w_center_off = (self.complex.center
            - Complex64::new(self.disk_center, 0.0))
        .norm();
        let w_inside_disk = self.disk_radius - (w_center_off + self.complex.diam);

        let direct_entry = critical_entry_time(c, (a[0] * -1.0, a[0]), 10 * k_top + 40)?;
        let entry_time_match =
            direct_entry == self.entry_time && self.entry_time + 1 == self.complex.iterate;

        let cc = Complex64::new(c, 0.0);
        let mut zz = self.complex.center;
        for _ in 0..self.complex.iterate {
            zz = zz * zz + cc;
        }
        let w_residual = zz.norm();

        let all_pass = min_log_expansion > std::f64::consts::LN_2
            && real_gaps_ok
            && re_separation > 0.0
            && fold_image_gap > 0.0
            && slit_gap > 0.0
            && w_above_axis > 0.0
            && w_inside_disk > 0.0
            && entry_time_match
            && w_residual < 1e-9
            && extensions_ok;

        Ok(RepellerChecks {
            min_log_expansion,
            max_distortion,
            real_gaps_ok,
            re_separation,
            fold_image_gap,
            slit_gap,
            w_above_axis,
            w_inside_disk,
            entry_time_match,
            w_residual,
            extensions_ok,
            all_pass,
        })
    }
}

/// Branch counts binned by floor(log inf |f^n'|). Counts growing slower
/// than the derivative (fitted slope below 1) keep the inverse-derivative
/// sum finite, which the coverage of V already implies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailHistogram {
    pub bins: Vec<(i64, usize)>,
    pub slope: f64,
}

pub fn branch_tail_histogram(rep: &CantorRepeller) -> TailHistogram {
    let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    for br in &rep.branches {
        *counts.entry(br.log_inf.floor() as i64).or_insert(0) += 1;
    }
    let bins: Vec<(i64, usize)> = counts.into_iter().collect();
    let slope = if bins.len() >= 2 {
        let xs: Vec<f64> = bins.iter().map(|(k, _)| (*k as f64).exp()).collect();
        let ys: Vec<f64> = bins.iter().map(|(_, n)| *n as f64).collect();
        crate::fit::fit_loglog(&xs, &ys).map(|f| f.slope).unwrap_or(0.0)
    } else {
        0.0
    };
    TailHistogram { bins, slope }
}

/// Full pipeline from a parameter to the assembled repeller at power 1.
pub fn build_repeller(c: f64) -> Result<CantorRepeller> {
    let param = Parameter::new(c);
    let t0 = std::time::Instant::now();
    let mut bx = first_return_map(&param, 10_000)?;
    let v = make_V(&bx)?;
    bx.v = Some(v);
    let t1 = std::time::Instant::now();
    let filled = postcritical_filling(&bx)?;
    let t2 = std::time::Instant::now();
    let hv = first_entry_map(&bx, v, ENTRY_SHARE * tail_budget(bx.epsilon, v))?;
    let t3 = std::time::Instant::now();
    let star = pullback_star(&bx, &filled, &hv)?;
    let t4 = std::time::Instant::now();
    eprintln!(
        "[dbg] build c={c} fr={:?} fill={:?} (branches {}) entry={:?} (branches {}) star={:?} (branches {} shorts {})",
        t1 - t0,
        t2 - t1,
        filled.branches.len(),
        t3 - t2,
        hv.branches.len(),
        t4 - t3,
        star.branches.len(),
        star.branches.iter().filter(|b| b.kind == BranchKind::Short).count()
    );
    assemble_repeller(&star, 1, &param)
}
