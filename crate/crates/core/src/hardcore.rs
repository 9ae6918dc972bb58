//! The constrained first-layer measure on a ball.
//!
//! Conditioning the Bernoulli field on the removal transform producing the
//! all-zero image on B_R, with fully occupied exterior, forces the occupied
//! set to be an independent set that avoids the outermost layer: a vertex at
//! depth R would be kept by its occupied exterior neighbours, and a pair of
//! adjacent occupied vertices keeps itself. The support characterization is
//! certified against the raw transform by enumeration in the test suite
//! before anything here relies on it.
//!
//! Probabilities are computed three ways: a bottom-up/top-down message pass
//! for marginals, a clamped message pass for pattern probabilities, and a
//! brute-force enumeration oracle used to certify both.

use num_rational::BigRational;

use crate::cutsets::{self, BoundOutcome, Cutset};
use crate::error::{Error, Result};
use crate::field::{ground_state, Configuration, Phase};
use crate::prob::{Density, LogProb, Mode, Prob, Weight};
use crate::tree::{validate_degree_bounds, Region, RootedTree, Vertex};
use std::sync::Arc;

/// True iff the configuration (domain exactly B_radius) is in the support
/// of the constrained measure: occupied set independent and contained in
/// B_{radius-1}.
pub fn nu_support_check(
    tree: &Arc<RootedTree>,
    radius: u32,
    config: &Configuration,
) -> Result<bool> {
    let nball = tree.ball_size(radius)? as usize;
    if config.domain().as_ball() != Some(radius) {
        return Err(Error::RegionEscapes(format!(
            "domain must be the ball of radius {radius}"
        )));
    }
    let bits = config.bits();
    for v in 0..nball as Vertex {
        if bits[v as usize] == 0 {
            continue;
        }
        if tree.depth_of(v) == radius {
            return Ok(false);
        }
        if let Some(parent) = tree.parent_of(v) {
            if bits[parent as usize] == 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Per-vertex clamp for the message pass: None is free, Some(s) pins spin s.
type Clamp = Option<u8>;

/// Bottom-up messages over the ball. `up1[v]`/`up0[v]` sum the weights of
/// all admissible configurations of v's subtree within the ball given the
/// spin of v (v's own weight included). Vertices at the outermost layer are
/// clamped unoccupied by the support condition.
fn upward_messages<W: Weight>(
    tree: &RootedTree,
    radius: u32,
    p: &Density,
    clamp: &[Clamp],
) -> (Vec<W>, Vec<W>) {
    let nball = clamp.len();
    let w1 = W::occupied(p);
    let w0 = W::empty(p);
    let mut up0 = vec![W::nil(); nball];
    let mut up1 = vec![W::nil(); nball];
    for v in (0..nball as Vertex).rev() {
        let vi = v as usize;
        let allow0 = clamp[vi] != Some(1);
        let allow1 = clamp[vi] != Some(0) && tree.depth_of(v) < radius;
        if allow1 {
            let mut m = w1.clone();
            for c in tree.children(v) {
                if (c as usize) >= nball {
                    break;
                }
                m = m.times(&up0[c as usize]);
            }
            up1[vi] = m;
        }
        if allow0 {
            let mut m = w0.clone();
            for c in tree.children(v) {
                if (c as usize) >= nball {
                    break;
                }
                m = m.times(&up0[c as usize].plus(&up1[c as usize]));
            }
            up0[vi] = m;
        }
    }
    (up0, up1)
}

/// All single-site marginals (P(0), P(1)) on the ball via one bottom-up and
/// one top-down pass. Linear in the ball size.
fn marginals_generic<W: Weight>(tree: &RootedTree, radius: u32, p: &Density) -> Vec<(W, W)> {
    let nball = tree.ball_size(radius).expect("checked by caller") as usize;
    let clamp = vec![None; nball];
    let (up0, up1) = upward_messages::<W>(tree, radius, p, &clamp);
    let w1 = W::occupied(p);
    let w0 = W::empty(p);
    // down[v](s): weight sum over the ball outside v's subtree, given spin s
    // at v (v's own weight excluded). Root sees nothing outside.
    let mut down0 = vec![W::unit(); nball];
    let mut down1 = vec![W::unit(); nball];
    for v in 0..nball as Vertex {
        let kids: Vec<usize> = tree
            .children(v)
            .take_while(|&c| (c as usize) < nball)
            .map(|c| c as usize)
            .collect();
        if kids.is_empty() {
            continue;
        }
        let vi = v as usize;
        // prefix/suffix products of (up0+up1) and up0 over the children.
        let m = kids.len();
        let mut pre_a = vec![W::unit(); m + 1];
        let mut pre_z = vec![W::unit(); m + 1];
        for i in 0..m {
            let a = up0[kids[i]].plus(&up1[kids[i]]);
            pre_a[i + 1] = pre_a[i].times(&a);
            pre_z[i + 1] = pre_z[i].times(&up0[kids[i]]);
        }
        let mut suf_a = vec![W::unit(); m + 1];
        let mut suf_z = vec![W::unit(); m + 1];
        for i in (0..m).rev() {
            let a = up0[kids[i]].plus(&up1[kids[i]]);
            suf_a[i] = suf_a[i + 1].times(&a);
            suf_z[i] = suf_z[i + 1].times(&up0[kids[i]]);
        }
        let v_unocc = down0[vi].times(&w0);
        let v_occ = down1[vi].times(&w1);
        for (i, &c) in kids.iter().enumerate() {
            let others_a = pre_a[i].times(&suf_a[i + 1]);
            let others_z = pre_z[i].times(&suf_z[i + 1]);
            // An occupied child requires an unoccupied parent; an unoccupied
            // child is compatible with both parent states.
            down1[c] = v_unocc.times(&others_a);
            down0[c] = v_unocc.times(&others_a).plus(&v_occ.times(&others_z));
        }
    }
    let z = up0[0].plus(&up1[0]);
    (0..nball)
        .map(|v| {
            let m0 = up0[v].times(&down0[v]).over(&z);
            let m1 = up1[v].times(&down1[v]).over(&z);
            (m0, m1)
        })
        .collect()
}

/// All single-site marginals on B_radius, as (P(spin=0), P(spin=1)) pairs.
pub fn nu_marginals(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    mode: Mode,
) -> Result<Vec<(Prob, Prob)>> {
    tree.ball_size(radius)?;
    Ok(match mode {
        Mode::Exact => marginals_generic::<BigRational>(tree, radius, p)
            .into_iter()
            .map(|(a, b)| (a.into_prob(), b.into_prob()))
            .collect(),
        Mode::Log => marginals_generic::<LogProb>(tree, radius, p)
            .into_iter()
            .map(|(a, b)| (a.into_prob(), b.into_prob()))
            .collect(),
    })
}

/// Marginal probability that the spin at `vertex` equals `value` under the
/// constrained measure on B_radius.
pub fn nu_marginal_dp(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    vertex: Vertex,
    value: u8,
    mode: Mode,
) -> Result<Prob> {
    let nball = tree.ball_size(radius)?;
    if vertex >= nball {
        return Err(Error::RegionEscapes(format!(
            "vertex {vertex} outside B_{radius}"
        )));
    }
    let pair = nu_marginals(tree, radius, p, mode)?.swap_remove(vertex as usize);
    Ok(if value == 0 { pair.0 } else { pair.1 })
}

fn pattern_clamps(tree: &RootedTree, radius: u32, pattern: &Configuration) -> Result<Vec<Clamp>> {
    let nball = tree.ball_size(radius)? as usize;
    let mut clamp: Vec<Clamp> = vec![None; nball];
    for (i, v) in pattern.domain().iter().enumerate() {
        if v as usize >= nball {
            return Err(Error::RegionEscapes(format!(
                "pattern vertex {v} outside B_{radius}"
            )));
        }
        clamp[v as usize] = Some(pattern.bits()[i]);
    }
    Ok(clamp)
}

fn pattern_generic<W: Weight>(tree: &RootedTree, radius: u32, p: &Density, clamp: &[Clamp]) -> W {
    let (cup0, cup1) = upward_messages::<W>(tree, radius, p, clamp);
    let free = vec![None; clamp.len()];
    let (up0, up1) = upward_messages::<W>(tree, radius, p, &free);
    let num = cup0[0].plus(&cup1[0]);
    let den = up0[0].plus(&up1[0]);
    num.over(&den)
}

/// Probability that the spins on the pattern's domain equal the pattern,
/// under the constrained measure on B_radius. Patterns that violate the
/// support (adjacent ones, or a one at depth radius) get probability zero.
pub fn nu_pattern_dp(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    pattern: &Configuration,
    mode: Mode,
) -> Result<Prob> {
    let clamp = pattern_clamps(tree, radius, pattern)?;
    Ok(match mode {
        Mode::Exact => pattern_generic::<BigRational>(tree, radius, p, &clamp).into_prob(),
        Mode::Log => pattern_generic::<LogProb>(tree, radius, p, &clamp).into_prob(),
    })
}

/// Brute-force oracle: the exact rational probability of `predicate` under
/// the constrained measure, by enumerating occupied subsets of B_{radius-1}
/// (the support characterization confines ones there) and filtering to
/// independent sets. The predicate sees one 0/1 slice per ball vertex.
pub fn nu_event_bruteforce<F: FnMut(&[u8]) -> bool>(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    mut predicate: F,
) -> Result<Prob> {
    let nball = tree.ball_size(radius)? as usize;
    let nfree = if radius == 0 {
        0
    } else {
        tree.ball_size(radius - 1)? as usize
    };
    if nfree > 24 {
        return Err(Error::BudgetExceeded(format!(
            "brute force over 2^{nfree} configurations (limit 2^24)"
        )));
    }
    let mut support_count = vec![0u64; nfree + 1];
    let mut event_count = vec![0u64; nfree + 1];
    let mut bits = vec![0u8; nball];
    'mask: for mask in 0u64..(1u64 << nfree) {
        for (v, bit) in bits.iter_mut().enumerate().take(nfree) {
            *bit = ((mask >> v) & 1) as u8;
        }
        for v in 1..nfree as Vertex {
            if bits[v as usize] == 1 && bits[tree.parent_of(v).unwrap() as usize] == 1 {
                continue 'mask;
            }
        }
        let k = mask.count_ones() as usize;
        support_count[k] += 1;
        if predicate(&bits) {
            event_count[k] += 1;
        }
    }
    let pr = p.ratio();
    let qr = p.complement();
    let mut p_pow = vec![BigRational::one()];
    for k in 1..=nfree {
        p_pow.push(&p_pow[k - 1] * &pr);
    }
    let mut q_pow = vec![BigRational::one()];
    for k in 1..=nball {
        q_pow.push(&q_pow[k - 1] * &qr);
    }
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for k in 0..=nfree {
        if support_count[k] == 0 {
            continue;
        }
        let w = &p_pow[k] * &q_pow[nball - k];
        num += &w * BigRational::from_integer(event_count[k].into());
        den += &w * BigRational::from_integer(support_count[k].into());
    }
    Ok(Prob::Exact(num / den))
}

/// Both sides of the adapted-configuration identity: the probability that
/// the spins match the cutset's ground state on its interior and vanish on
/// its boundary, computed (a) by the clamped message pass and (b) through
/// the weight decomposition
/// `W(ground on interior) * (1-p)^{|boundary|} * Z_outside / Z_ball`.
/// The two agree exactly in rational mode.
#[derive(Clone, Debug)]
pub struct AdaptedProbability {
    pub clamped: Prob,
    pub decomposition: Prob,
}

pub fn adapted_probability(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    cutset: &Cutset,
    mode: Mode,
) -> Result<AdaptedProbability> {
    let nball = tree.ball_size(radius)?;
    let boundary = cutset.boundary();
    if let Some(&max) = cutset.interior().iter().chain(boundary.iter()).max() {
        if max >= nball {
            return Err(Error::RegionEscapes(format!(
                "cutset closure reaches vertex {max}, outside B_{radius}"
            )));
        }
    }
    let interior_region = Region::new(Arc::clone(tree), cutset.interior().to_vec())?;
    let adapted = adapted_pattern(tree, cutset)?;
    let clamped = nu_pattern_dp(tree, radius, p, &adapted, mode)?;

    let ones = interior_region
        .iter()
        .filter(|&v| cutset.kind().value_at_depth(tree.depth_of(v)) == 1)
        .count() as u32;
    let zeros = interior_region.len() as u32 - ones;
    let decomposition = match mode {
        Mode::Exact => {
            decomposition_generic::<BigRational>(tree, radius, p, &boundary, ones, zeros)
                .into_prob()
        }
        Mode::Log => {
            decomposition_generic::<LogProb>(tree, radius, p, &boundary, ones, zeros).into_prob()
        }
    };
    Ok(AdaptedProbability {
        clamped,
        decomposition,
    })
}

/// The configuration every adapted spin assignment shows on the closure:
/// the cutset's ground state on the interior, zeros on the boundary.
pub fn adapted_pattern(tree: &Arc<RootedTree>, cutset: &Cutset) -> Result<Configuration> {
    let interior = Region::new(Arc::clone(tree), cutset.interior().to_vec())?;
    let boundary = Region::new(Arc::clone(tree), cutset.boundary())?;
    let ground = ground_state(&interior, cutset.kind());
    let closure = interior.union(&boundary);
    let bits = closure
        .iter()
        .map(|v| ground.try_get(v).unwrap_or(0))
        .collect();
    Configuration::new(closure, bits)
}

fn decomposition_generic<W: Weight>(
    tree: &RootedTree,
    radius: u32,
    p: &Density,
    boundary: &[Vertex],
    interior_ones: u32,
    interior_zeros: u32,
) -> W {
    let nball = tree.ball_size(radius).expect("checked") as usize;
    let clamp = vec![None; nball];
    let (up0, up1) = upward_messages::<W>(tree, radius, p, &clamp);
    let w_interior = W::occupied(p)
        .power(interior_ones)
        .times(&W::empty(p).power(interior_zeros));
    let w_boundary = W::empty(p).power(boundary.len() as u32);
    let mut z_outside = W::unit();
    for &y in boundary {
        for c in tree.children(y) {
            if (c as usize) >= nball {
                break;
            }
            z_outside = z_outside.times(&up0[c as usize].plus(&up1[c as usize]));
        }
    }
    let z = up0[0].plus(&up1[0]);
    w_interior.times(&w_boundary).times(&z_outside).over(&z)
}

/// One row of the parity-selection sweep: the probability that a vertex of
/// B_2 disagrees with the ground state preferred by the ball's radius
/// parity, next to the Peierls bound for the tree's degree range.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub tree_id: String,
    pub p: Density,
    pub radius: u32,
    pub vertex: Vertex,
    pub prob_wrong: Prob,
    /// None when the bound series diverges at this density.
    pub peierls_bound: Option<Prob>,
    /// None when no bound is available.
    pub pass: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub d_min: u32,
    pub d_max: u32,
}

/// For each radius r in `radii`, computes the probability that each vertex
/// of B_2 (clipped to B_r) takes the value opposite to the alternating
/// ground state of the radius parity. Odd balls prefer the phase occupied
/// at the root, even balls the phase unoccupied at the root.
pub fn parity_sweep(
    tree: &Arc<RootedTree>,
    p: &Density,
    radii: &[u32],
    mode: Mode,
) -> Result<SweepResult> {
    let degrees = validate_degree_bounds(tree);
    let (d_min, d_max) = (degrees.d_min_children, degrees.d_max_children);
    let bound = match cutsets::peierls_bound(p, d_min, d_max, mode) {
        BoundOutcome::Convergent(value) => Some(value),
        BoundOutcome::Divergent => None,
    };
    let mut rows = Vec::new();
    for &radius in radii {
        let marg = nu_marginals(tree, radius, p, mode)?;
        let preferred = Phase::from_index((radius % 2) as u8)?;
        let window = tree.ball_size(radius.min(2))? as usize;
        for v in 0..window as Vertex {
            let wrong = 1 - preferred.value_at_depth(tree.depth_of(v));
            let pair = &marg[v as usize];
            let prob_wrong = if wrong == 0 {
                pair.0.clone()
            } else {
                pair.1.clone()
            };
            let pass = bound.as_ref().map(|b| prob_wrong.le(b));
            rows.push(SweepRow {
                tree_id: tree.id().to_string(),
                p: *p,
                radius,
                vertex: v,
                prob_wrong,
                peierls_bound: bound.clone(),
                pass,
            });
        }
    }
    Ok(SweepResult { rows, d_min, d_max })
}

use num_traits::{One, Zero};
