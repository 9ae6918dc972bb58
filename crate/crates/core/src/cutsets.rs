//! Type-changing cutsets and the pushout calculus.
//!
//! A type-changing cutset of type s is the set of directed edges leaving a
//! rooted interior subtree that carries the alternating ground state of
//! phase s: its leaves sit at depths where the ground state is unoccupied,
//! and every interior vertex at an occupied depth keeps all of its children
//! inside (an occupied interior vertex with a missing child would sit next
//! to the boundary zeros and stop being isolated-model-compatible as a
//! component boundary). This is exactly the family generated from the
//! minimal cutset by pushout operations, which is what the enumeration and
//! the merging-reduction below rely on.
//!
//! The Peierls machinery at the end turns cutset counts and replacement
//! counts into the explicit entropy/energy series bounding the probability
//! of the wrong root value.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Phase;
use crate::prob::{rational_to_f64, Density, LogProb, Mode, Prob, Weight};
use crate::tree::{RootedTree, Vertex};

/// A type-changing cutset: the oriented edges leaving a rooted interior
/// subtree whose leaves sit at unoccupied depths of the phase's ground
/// state. `pushouts` counts the pushout operations separating the cutset
/// from the initial one of its type.
#[derive(Clone, Debug)]
pub struct Cutset {
    tree: Arc<RootedTree>,
    kind: Phase,
    interior: Vec<Vertex>,
    edges: Vec<(Vertex, Vertex)>,
    pushouts: u32,
}

impl PartialEq for Cutset {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.interior == other.interior
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutsetRecord {
    pub r#type: u8,
    pub n: u32,
    pub interior: Vec<Vertex>,
    pub n_repl: i64,
}

impl Cutset {
    /// The minimal cutset of the given type: interior {root} for type 0,
    /// the full first ball for type 1.
    pub fn initial(tree: &Arc<RootedTree>, kind: Phase) -> Result<Cutset> {
        if tree.max_depth() < 2 {
            return Err(Error::TreeTooShallow {
                need: 2,
                have: tree.max_depth(),
            });
        }
        let interior: Vec<Vertex> = match kind {
            Phase::Zero => vec![0],
            Phase::One => std::iter::once(0).chain(tree.children(0)).collect(),
        };
        let mut cutset = Cutset {
            tree: Arc::clone(tree),
            kind,
            interior,
            edges: Vec::new(),
            pushouts: 0,
        };
        cutset.edges = cutset.edges_of_interior();
        Ok(cutset)
    }

    /// Builds a cutset from an interior vertex set, validating the class
    /// conditions and deriving the pushout count.
    pub fn from_interior(
        tree: &Arc<RootedTree>,
        kind: Phase,
        interior: Vec<Vertex>,
    ) -> Result<Cutset> {
        let mut interior = interior;
        interior.sort_unstable();
        interior.dedup();
        let inv = |msg: String| Err(Error::InvalidCutset(msg));
        if interior.first() != Some(&0) {
            return inv("interior must contain the root".into());
        }
        let inside = |v: Vertex| interior.binary_search(&v).is_ok();
        let mut occupied_count: u32 = 0;
        for &v in &interior {
            if v != 0 && !inside(tree.parent_of(v).unwrap()) {
                return inv(format!(
                    "interior is not connected: vertex {v} lacks its parent"
                ));
            }
            if tree.depth_of(v) >= tree.max_depth() {
                return inv(format!("interior vertex {v} sits at the stored depth"));
            }
            let ground = kind.value_at_depth(tree.depth_of(v));
            if ground == 1 {
                // Occupied-depth vertices keep all their children, so every
                // leaf of the interior sits at an unoccupied depth.
                occupied_count += 1;
                let kids_inside = tree.children(v).filter(|&c| inside(c)).count() as u32;
                if kids_inside != tree.num_children(v) {
                    return inv(format!("occupied-depth vertex {v} is missing children"));
                }
            }
        }
        let pushouts = match kind {
            Phase::Zero => occupied_count,
            Phase::One => {
                if occupied_count == 0 {
                    return inv("type-1 interior must contain the root ball".into());
                }
                occupied_count - 1
            }
        };
        let mut cutset = Cutset {
            tree: Arc::clone(tree),
            kind,
            interior,
            edges: Vec::new(),
            pushouts,
        };
        cutset.edges = cutset.edges_of_interior();
        Ok(cutset)
    }

    fn edges_of_interior(&self) -> Vec<(Vertex, Vertex)> {
        let inside = |v: Vertex| self.interior.binary_search(&v).is_ok();
        let mut edges = Vec::new();
        for &v in &self.interior {
            for c in self.tree.children(v) {
                if !inside(c) {
                    edges.push((v, c));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    pub fn kind(&self) -> Phase {
        self.kind
    }

    pub fn tree(&self) -> &Arc<RootedTree> {
        &self.tree
    }

    pub fn interior(&self) -> &[Vertex] {
        &self.interior
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    /// End points of the cutset edges, sorted.
    pub fn boundary(&self) -> Vec<Vertex> {
        let mut b: Vec<Vertex> = self.edges.iter().map(|&(_, y)| y).collect();
        b.sort_unstable();
        b
    }

    /// Interior together with its boundary, sorted.
    pub fn closure(&self) -> Vec<Vertex> {
        let mut c = self.interior.clone();
        c.extend(self.boundary());
        c.sort_unstable();
        c
    }

    pub fn pushout_count(&self) -> u32 {
        self.pushouts
    }

    /// Net replacements: unoccupied minus occupied ground-state sites over
    /// the interior: the number of extra particles gained by flipping the
    /// interior to the opposite ground state.
    pub fn net_replacements(&self) -> i64 {
        let mut zeros = 0i64;
        let mut ones = 0i64;
        for &v in &self.interior {
            if self.kind.value_at_depth(self.tree.depth_of(v)) == 1 {
                ones += 1;
            } else {
                zeros += 1;
            }
        }
        zeros - ones
    }

    /// Applies the pushout operation to a cutset edge: the edge is removed,
    /// its end point and that vertex's children join the interior, and the
    /// edges to all grandchildren are added. Applied to a non-edge the
    /// cutset is returned unchanged.
    pub fn pushout(&self, edge: (Vertex, Vertex)) -> Result<Cutset> {
        if self.edges.binary_search(&edge).is_err() {
            return Ok(self.clone());
        }
        let y = edge.1;
        if self.tree.depth_of(y) + 2 > self.tree.max_depth() {
            return Err(Error::DepthBudget(y));
        }
        let mut interior = self.interior.clone();
        interior.push(y);
        interior.extend(self.tree.children(y));
        interior.sort_unstable();
        let mut next = Cutset {
            tree: Arc::clone(&self.tree),
            kind: self.kind,
            interior,
            edges: Vec::new(),
            pushouts: self.pushouts + 1,
        };
        next.edges = next.edges_of_interior();
        Ok(next)
    }

    /// Inverse of the pushout: removes `y` and its children from the
    /// interior and restores the edge from y's parent. Requires every child
    /// of y to be inside with all of its own children outside.
    pub fn merge_at(&self, y: Vertex) -> Result<Cutset> {
        let inside = |v: Vertex| self.interior.binary_search(&v).is_ok();
        if y == 0 || !inside(y) || self.tree.depth_of(y) == 0 {
            return Err(Error::MergePrecondition(y));
        }
        if self.tree.num_children(y) == 0 {
            return Err(Error::MergePrecondition(y));
        }
        for z in self.tree.children(y) {
            if !inside(z) {
                return Err(Error::MergePrecondition(y));
            }
            if self.tree.num_children(z) == 0 {
                return Err(Error::MergePrecondition(y));
            }
            for v in self.tree.children(z) {
                if inside(v) {
                    return Err(Error::MergePrecondition(y));
                }
            }
        }
        let drop: BTreeSet<Vertex> = std::iter::once(y).chain(self.tree.children(y)).collect();
        let interior: Vec<Vertex> = self
            .interior
            .iter()
            .copied()
            .filter(|v| !drop.contains(v))
            .collect();
        let mut prev = Cutset {
            tree: Arc::clone(&self.tree),
            kind: self.kind,
            interior,
            edges: Vec::new(),
            pushouts: self.pushouts.saturating_sub(1),
        };
        prev.edges = prev.edges_of_interior();
        Ok(prev)
    }

    /// Reduces to the initial cutset by repeatedly merging at the
    /// grandparent of a deepest boundary vertex; returns the merge vertices
    /// in order. The sequence length equals the pushout count.
    pub fn reduce_to_initial(&self) -> Result<Vec<Vertex>> {
        let initial = Cutset::initial(&self.tree, self.kind)?;
        let mut current = self.clone();
        let mut merges = Vec::new();
        while current.interior != initial.interior {
            let boundary = current.boundary();
            let deepest = boundary
                .iter()
                .copied()
                .max_by_key(|&v| (self.tree.depth_of(v), std::cmp::Reverse(v)))
                .ok_or_else(|| Error::InvalidCutset("cutset has no boundary".into()))?;
            if self.tree.depth_of(deepest) < 2 {
                return Err(Error::InvalidCutset(format!(
                    "cannot reduce past boundary vertex {deepest}"
                )));
            }
            let y = self
                .tree
                .parent_of(self.tree.parent_of(deepest).unwrap())
                .unwrap();
            current = current.merge_at(y)?;
            merges.push(y);
        }
        Ok(merges)
    }

    /// The two inequalities tying interior size and net replacements to the
    /// pushout count for the degree range [d_min, d_max]; type-1 cutsets
    /// use the count shifted by one.
    pub fn check_bounds(&self, d_min: u32, d_max: u32) -> bool {
        let m = match self.kind {
            Phase::Zero => self.pushouts as u64,
            Phase::One => self.pushouts as u64 + 1,
        };
        let size_ok = self.interior.len() as u64 <= 1 + m * (d_max as u64 + 1);
        let repl_ok = self.net_replacements() >= (1 + m * (d_min as u64 - 1)) as i64;
        size_ok && repl_ok
    }

    pub fn record(&self) -> CutsetRecord {
        CutsetRecord {
            r#type: self.kind.index(),
            n: self.pushouts,
            interior: self.interior.clone(),
            n_repl: self.net_replacements(),
        }
    }
}

/// Result of a pushout enumeration: cutsets grouped by pushout count, plus
/// the number of branches that could not be pushed because the stored tree
/// ends (those cutsets stay in the result; only deeper ones are missing).
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub by_n: Vec<Vec<Cutset>>,
    pub depth_capped: usize,
}

impl Enumeration {
    pub fn all(&self) -> impl Iterator<Item = &Cutset> {
        self.by_n.iter().flatten()
    }

    pub fn total(&self) -> usize {
        self.by_n.iter().map(|layer| layer.len()).sum()
    }
}

/// Breadth-first closure of the initial cutset under pushout, deduplicated
/// by interior vertex set (pushout sequences reaching the same cutset
/// differ only by reordering). `max_n` caps the pushout count;
/// `max_interior_depth` prunes interiors reaching deeper (used to confine
/// enumeration to a ball); `cap` bounds the total count.
fn pushout_closure(
    tree: &Arc<RootedTree>,
    kind: Phase,
    max_n: Option<u32>,
    max_interior_depth: Option<u32>,
    cap: usize,
) -> Result<Enumeration> {
    let initial = Cutset::initial(tree, kind)?;
    if let Some(d) = max_interior_depth {
        let deepest = initial
            .interior
            .iter()
            .map(|&v| tree.depth_of(v))
            .max()
            .unwrap();
        if deepest > d {
            return Ok(Enumeration {
                by_n: Vec::new(),
                depth_capped: 0,
            });
        }
    }
    let mut seen: BTreeSet<Vec<Vertex>> = BTreeSet::new();
    seen.insert(initial.interior.clone());
    let mut by_n = vec![vec![initial]];
    let mut depth_capped = 0usize;
    let mut total = 1usize;
    loop {
        if let Some(mn) = max_n {
            if by_n.len() as u32 > mn {
                break;
            }
        }
        let mut next: Vec<Cutset> = Vec::new();
        for cutset in by_n.last().unwrap() {
            for &edge in &cutset.edges {
                if let Some(d) = max_interior_depth {
                    // The pushout adds edge.1 and its children.
                    if tree.depth_of(edge.1) + 1 > d {
                        continue;
                    }
                }
                match cutset.pushout(edge) {
                    Ok(bigger) => {
                        if seen.insert(bigger.interior.clone()) {
                            total += 1;
                            if total > cap {
                                return Err(Error::BudgetExceeded(format!(
                                    "pushout enumeration exceeds {cap} cutsets"
                                )));
                            }
                            next.push(bigger);
                        }
                    }
                    Err(Error::DepthBudget(_)) => depth_capped += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| a.interior.cmp(&b.interior));
        by_n.push(next);
    }
    Ok(Enumeration { by_n, depth_capped })
}

/// All cutsets of the given type with pushout count at most `max_n`,
/// grouped by count.
pub fn enumerate_pushout(tree: &Arc<RootedTree>, kind: Phase, max_n: u32) -> Result<Enumeration> {
    pushout_closure(tree, kind, Some(max_n), None, 1_000_000)
}

/// Independent enumeration oracle: builds every admissible interior
/// directly, by walking the tree and choosing, for each unoccupied-depth
/// interior vertex, which children to expand (an expanded child joins with
/// all of its own children). Returns cutsets with interior size at most
/// `max_interior`, sorted by (size, interior).
pub fn enumerate_bruteforce(
    tree: &Arc<RootedTree>,
    kind: Phase,
    max_interior: usize,
) -> Result<Vec<Cutset>> {
    if max_interior > 24 {
        return Err(Error::BudgetExceeded(format!(
            "brute-force interior budget {max_interior} exceeds 24"
        )));
    }
    if tree.max_depth() < 2 {
        return Err(Error::TreeTooShallow {
            need: 2,
            have: tree.max_depth(),
        });
    }
    let mut interiors: Vec<Vec<Vertex>> = Vec::new();
    let mut interior: Vec<Vertex> = Vec::new();
    let mut queue: Vec<Vertex> = Vec::new();
    match kind {
        Phase::Zero => {
            interior.push(0);
            queue.push(0);
        }
        Phase::One => {
            interior.push(0);
            for c in tree.children(0) {
                interior.push(c);
                queue.push(c);
            }
        }
    }

    fn grow(
        tree: &RootedTree,
        max_interior: usize,
        queue: &mut Vec<Vertex>,
        qi: usize,
        interior: &mut Vec<Vertex>,
        out: &mut Vec<Vec<Vertex>>,
    ) {
        if qi == queue.len() {
            out.push(interior.clone());
            return;
        }
        let u = queue[qi];
        // Children of u that can be expanded without leaving the stored
        // tree: an expanded child needs its grandchildren as edge targets.
        let expandable: Vec<Vertex> = tree
            .children(u)
            .filter(|&c| tree.depth_of(c) + 2 <= tree.max_depth())
            .collect();
        let subsets = 1u32 << expandable.len();
        for mask in 0..subsets {
            let mut added = 0usize;
            for (i, &c) in expandable.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    added += 1 + tree.num_children(c) as usize;
                }
            }
            if interior.len() + added > max_interior {
                continue;
            }
            let int_len = interior.len();
            let q_len = queue.len();
            for (i, &c) in expandable.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    interior.push(c);
                    for g in tree.children(c) {
                        interior.push(g);
                        queue.push(g);
                    }
                }
            }
            grow(tree, max_interior, queue, qi + 1, interior, out);
            interior.truncate(int_len);
            queue.truncate(q_len);
        }
    }

    if interior.len() <= max_interior {
        grow(
            tree,
            max_interior,
            &mut queue,
            0,
            &mut interior,
            &mut interiors,
        );
    }
    let mut cutsets: Vec<Cutset> = interiors
        .into_iter()
        .map(|int| Cutset::from_interior(tree, kind, int))
        .collect::<Result<_>>()?;
    cutsets.sort_by(|a, b| (a.interior.len(), &a.interior).cmp(&(b.interior.len(), &b.interior)));
    Ok(cutsets)
}

/// Exact count of connected subgraphs of the stored tree with `k_edges`
/// edges containing the root. On a tree these are the rooted subtrees with
/// k_edges + 1 vertices.
pub fn count_connected_subgraphs(tree: &Arc<RootedTree>, k_edges: u32) -> Result<u64> {
    if k_edges > 12 {
        return Err(Error::BudgetExceeded(format!(
            "subgraph budget: k = {k_edges} > 12"
        )));
    }
    let target = k_edges as usize + 1;
    fn rec(
        tree: &RootedTree,
        cands: &mut Vec<Vertex>,
        qi: usize,
        size: usize,
        target: usize,
        count: &mut u64,
    ) {
        if size == target {
            // The unique completion excludes every remaining candidate.
            *count += 1;
            return;
        }
        if qi == cands.len() {
            return;
        }
        let c = cands[qi];
        rec(tree, cands, qi + 1, size, target, count);
        let saved = cands.len();
        cands.extend(tree.children(c));
        rec(tree, cands, qi + 1, size + 1, target, count);
        cands.truncate(saved);
    }
    let mut count = 0u64;
    let mut cands: Vec<Vertex> = tree.children(0).collect();
    rec(tree, &mut cands, 0, 1, target, &mut count);
    assert!(
        BigInt::from(count) <= subgraph_count_bound(tree, k_edges),
        "entropy bound violated at k = {k_edges}"
    );
    Ok(count)
}

/// Entropy bound for the count above: (max_degree)^(2k).
pub fn subgraph_count_bound(tree: &Arc<RootedTree>, k_edges: u32) -> BigInt {
    num_traits::pow::pow(BigInt::from(tree.max_degree()), 2 * k_edges as usize)
}

/// Outcome of the Peierls series evaluation.
#[derive(Clone, Debug)]
pub enum BoundOutcome {
    Convergent(Prob),
    Divergent,
}

impl BoundOutcome {
    pub fn value(&self) -> Option<&Prob> {
        match self {
            BoundOutcome::Convergent(v) => Some(v),
            BoundOutcome::Divergent => None,
        }
    }
}

fn series_ratio(p: &Density, d_min: u32, d_max: u32) -> BigRational {
    // (d_max+1)^{2(d_max+1)} * ((1-p)/p)^{d_min-1}
    let entropy = BigRational::from_integer(num_traits::pow::pow(
        BigInt::from(d_max + 1),
        2 * (d_max as usize + 1),
    ));
    let q = p.odds_against();
    entropy * num_traits::pow::pow(q, (d_min - 1) as usize)
}

/// The closed form of the entropy/energy series
/// `sum_n (d_max+1)^{2n(d_max+1)} ((1-p)/p)^{1+n(d_min-1)}`:
/// a geometric series with value q/(1-r) where q = (1-p)/p and r is the
/// constant term ratio. Divergence (r >= 1) is reported, never truncated
/// silently.
pub fn peierls_bound(p: &Density, d_min: u32, d_max: u32, mode: Mode) -> BoundOutcome {
    if d_min == 0 || d_max < d_min {
        return BoundOutcome::Divergent;
    }
    let r = series_ratio(p, d_min, d_max);
    if r >= BigRational::one() {
        return BoundOutcome::Divergent;
    }
    let q = p.odds_against();
    let value = &q / (BigRational::one() - &r);
    BoundOutcome::Convergent(match mode {
        Mode::Exact => Prob::Exact(value),
        Mode::Log => Prob::Log(LogProb::from_ln(rational_to_f64(&value).ln())),
    })
}

/// Exact convergence predicate for the series at density p.
pub fn peierls_convergent(p: &Density, d_min: u32, d_max: u32) -> bool {
    d_min >= 1 && d_max >= d_min && series_ratio(p, d_min, d_max) < BigRational::one()
}

/// Density above which the series converges: 1/(1 + A^{-1/(d_min-1)}) with
/// A the entropy factor. Equals 1 when d_min <= 1 (never convergent).
pub fn convergence_threshold_f64(d_min: u32, d_max: u32) -> f64 {
    if d_min <= 1 {
        return 1.0;
    }
    let ln_a = 2.0 * (d_max as f64 + 1.0) * (d_max as f64 + 1.0).ln();
    let q_star = (-ln_a / (d_min as f64 - 1.0)).exp();
    1.0 / (1.0 + q_star)
}

/// Truncation of the series after `terms` terms together with the exact
/// geometric tail; partial + tail equals the closed form.
#[derive(Clone, Debug)]
pub struct TruncatedBound {
    pub partial: Prob,
    pub tail: Prob,
}

pub fn peierls_bound_truncated(
    p: &Density,
    d_min: u32,
    d_max: u32,
    terms: u32,
) -> Option<TruncatedBound> {
    if !peierls_convergent(p, d_min, d_max) {
        return None;
    }
    let r = series_ratio(p, d_min, d_max);
    let q = p.odds_against();
    let r_k = num_traits::pow::pow(r.clone(), terms as usize);
    let denom = BigRational::one() - &r;
    let partial = &q * (BigRational::one() - &r_k) / &denom;
    let tail = &q * &r_k / &denom;
    Some(TruncatedBound {
        partial: Prob::Exact(partial),
        tail: Prob::Exact(tail),
    })
}

/// The exact finite Peierls sum: over every cutset of the given type whose
/// closure fits inside B_radius, the energy weight ((1-p)/p)^{N_repl}.
/// Dominates the constrained-measure probability of the wrong root value
/// on the same ball and is dominated by the series bound.
pub fn peierls_sum_exact(
    tree: &Arc<RootedTree>,
    radius: u32,
    p: &Density,
    kind: Phase,
    mode: Mode,
) -> Result<Prob> {
    if radius > tree.max_depth() {
        return Err(Error::RadiusExceedsDepth {
            radius,
            depth: tree.max_depth(),
        });
    }
    if radius < 1 {
        return Err(Error::TreeTooShallow {
            need: 1,
            have: radius,
        });
    }
    // Interiors confined to B_{radius-1} keep their boundaries inside B_radius.
    let enumeration = pushout_closure(tree, kind, None, Some(radius - 1), 500_000)?;
    Ok(match mode {
        Mode::Exact => sum_energy::<BigRational>(&enumeration, p).into_prob(),
        Mode::Log => sum_energy::<LogProb>(&enumeration, p).into_prob(),
    })
}

fn sum_energy<W: Weight>(enumeration: &Enumeration, p: &Density) -> W {
    let q = W::empty(p).over(&W::occupied(p));
    let mut total = W::nil();
    for cutset in enumeration.all() {
        let n = cutset.net_replacements();
        let term = if n >= 0 {
            q.power(n as u32)
        } else {
            W::unit().over(&q.power((-n) as u32))
        };
        total = total.plus(&term);
    }
    total
}
