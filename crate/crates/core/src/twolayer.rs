//! Second-layer (image-measure) probabilities on finite regions.
//!
//! The image of the Bernoulli field under the removal transform is observed
//! through events {image = pattern on a region}. An image value 1 at x
//! means x is occupied with at least one occupied neighbour; an image value
//! 0 means x is unoccupied or isolated. Such an event is determined by the
//! first-layer spins on the region plus its boundary (the transform has
//! range one), which is the event's dependency region.
//!
//! The exact probability comes from a tree pass whose per-vertex messages
//! split by the vertex's spin and by what the vertex still requires of its
//! parent: nothing, an occupied parent (an occupied vertex that must be
//! kept but has no occupied child), or an unoccupied parent (an occupied
//! vertex that must be removed and whose children are all unoccupied). A
//! brute-force enumeration over the dependency region serves as the oracle.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::field::{ground_state, Configuration, Phase};
use crate::hardcore;
use crate::prob::{Density, LogProb, Mode, Prob, Weight};
use crate::tree::{Region, RootedTree, Vertex};

/// A partial second-layer pattern: 0/1 target values on a region.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondLayerEvent {
    region: Region,
    pattern: Vec<u8>,
}

impl SecondLayerEvent {
    /// Requires every pattern vertex to keep its full neighbourhood inside
    /// the stored tree, so the event is measurable there.
    pub fn new(region: Region, pattern: Vec<u8>) -> Result<Self> {
        if pattern.len() != region.len() {
            return Err(Error::InvalidSpec(format!(
                "{} pattern values for {} vertices",
                pattern.len(),
                region.len()
            )));
        }
        if pattern.iter().any(|&b| b > 1) {
            return Err(Error::InvalidSpec("pattern values must be 0 or 1".into()));
        }
        let tree = region.tree();
        if let Some(v) = region
            .iter()
            .find(|&v| tree.depth_of(v) >= tree.max_depth())
        {
            return Err(Error::RegionEscapes(format!(
                "vertex {v} sits at the stored depth; its unstored children make the event \
                 undetermined"
            )));
        }
        Ok(SecondLayerEvent { region, pattern })
    }

    pub fn from_config(config: &Configuration) -> Result<Self> {
        SecondLayerEvent::new(config.domain().clone(), config.bits().to_vec())
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    pub fn target_of(&self, v: Vertex) -> Option<u8> {
        self.region.position_of(v).map(|i| self.pattern[i])
    }

    /// Region plus boundary: the first-layer spins determining the event.
    pub fn dependency_region(&self) -> Region {
        self.region.closure()
    }

    /// Merges two events into their joint event; overlapping vertices must
    /// agree.
    pub fn join(&self, other: &SecondLayerEvent) -> Result<SecondLayerEvent> {
        let mut pairs: Vec<(Vertex, u8)> = self
            .region
            .iter()
            .zip(self.pattern.iter().copied())
            .chain(other.region.iter().zip(other.pattern.iter().copied()))
            .collect();
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                return Err(Error::InvalidSpec(format!(
                    "conflicting targets at vertex {}",
                    w[0].0
                )));
            }
        }
        pairs.dedup();
        let region = Region::new(
            Arc::clone(self.region.tree()),
            pairs.iter().map(|&(v, _)| v).collect(),
        )?;
        let pattern = pairs.iter().map(|&(_, b)| b).collect();
        SecondLayerEvent::new(region, pattern)
    }
}

/// Message indices: what the subtree requires of the parent's spin.
const REQ_ANY: usize = 0;
const REQ_OCCUPIED: usize = 1;
const REQ_EMPTY: usize = 2;

#[derive(Clone, Debug)]
struct Msg<W> {
    /// m[spin][requirement]
    m: [[W; 3]; 2],
}

impl<W: Weight> Msg<W> {
    fn nil() -> Msg<W> {
        Msg {
            m: [
                [W::nil(), W::nil(), W::nil()],
                [W::nil(), W::nil(), W::nil()],
            ],
        }
    }

    /// Sum over both spins of messages compatible with the parent spin.
    fn compatible_total(&self, parent_spin: u8) -> W {
        self.spin_total(0, parent_spin)
            .plus(&self.spin_total(1, parent_spin))
    }

    /// Sum over requirement states of one spin, compatible with the parent.
    fn spin_total(&self, spin: u8, parent_spin: u8) -> W {
        let row = &self.m[spin as usize];
        let req = if parent_spin == 1 {
            REQ_OCCUPIED
        } else {
            REQ_EMPTY
        };
        row[REQ_ANY].plus(&row[req])
    }
}

fn image_event_generic<W: Weight + PlusNeg>(event: &SecondLayerEvent, p: &Density) -> W {
    let tree = event.region().tree();
    let n = tree.n() as usize;
    // Vertices whose subtree meets the constrained region; everything else
    // integrates to weight one and is never visited.
    let mut relevant = vec![false; n];
    for v in event.region().iter() {
        let mut cursor = v;
        loop {
            if relevant[cursor as usize] {
                break;
            }
            relevant[cursor as usize] = true;
            match tree.parent_of(cursor) {
                Some(parent) => cursor = parent,
                None => break,
            }
        }
    }
    if !relevant[0] {
        return W::unit();
    }
    let mut msgs: Vec<Option<Msg<W>>> = vec![None; n];
    for v in (0..n as Vertex).rev() {
        if !relevant[v as usize] {
            continue;
        }
        let target = event.target_of(v);
        let mut msg = Msg::nil();
        for spin in 0..2u8 {
            if target == Some(1) && spin == 0 {
                // An image 1 needs an occupied first-layer spin.
                continue;
            }
            // `any`: product over children of all compatible assignments;
            // `none_occ`: the slice of `any` with every child unoccupied.
            // Both include this vertex's own weight.
            let own = if spin == 0 {
                W::empty(p)
            } else {
                W::occupied(p)
            };
            let mut any = own.clone();
            let mut none_occ = own;
            for c in tree.children(v) {
                match &msgs[c as usize] {
                    Some(cm) => {
                        any = any.times(&cm.compatible_total(spin));
                        none_occ = none_occ.times(&cm.spin_total(0, spin));
                    }
                    None => {
                        // Unconstrained subtree: its spins sum to weight
                        // one; the child-unoccupied slice carries 1-p.
                        none_occ = none_occ.times(&W::empty(p));
                    }
                }
            }
            match target {
                None => {
                    msg.m[spin as usize][REQ_ANY] = any;
                }
                Some(0) => {
                    if spin == 0 {
                        // Unoccupied vertices always map to image 0.
                        msg.m[0][REQ_ANY] = any;
                    } else {
                        // Occupied but removed: every neighbour unoccupied.
                        msg.m[1][REQ_EMPTY] = none_occ;
                    }
                }
                Some(_) => {
                    // Occupied and kept: some child occupied, or else the
                    // parent must be occupied.
                    msg.m[1][REQ_ANY] = any.minus(&none_occ);
                    msg.m[1][REQ_OCCUPIED] = none_occ;
                }
            }
        }
        msgs[v as usize] = Some(msg);
    }
    // The root has no parent: a missing neighbour counts as unoccupied, so
    // parent-empty requirements are vacuously satisfied and parent-occupied
    // requirements fail.
    let root = msgs[0].take().expect("root is relevant");
    let mut total = W::nil();
    for spin in 0..2 {
        total = total
            .plus(&root.m[spin][REQ_ANY])
            .plus(&root.m[spin][REQ_EMPTY]);
    }
    total
}

/// Exact probability that the image of the Bernoulli field matches the
/// event's pattern on its region.
pub fn image_event_prob_dp(event: &SecondLayerEvent, p: &Density, mode: Mode) -> Result<Prob> {
    Ok(match mode {
        Mode::Exact => image_event_generic::<BigRational>(event, p).into_prob(),
        Mode::Log => image_event_generic::<LogProb>(event, p).into_prob(),
    })
}

/// Brute-force oracle: enumerates first-layer spins on the dependency
/// region (everything else integrates to one) and checks the transform
/// definition vertex by vertex. Exact rationals.
pub fn image_event_prob_bruteforce(event: &SecondLayerEvent, p: &Density) -> Result<Prob> {
    let dep = event.dependency_region();
    let m = dep.len();
    if m > 24 {
        return Err(Error::BudgetExceeded(format!(
            "brute force over 2^{m} spin assignments (limit 2^24)"
        )));
    }
    let tree = event.region().tree();
    // Neighbour bit masks over dependency positions; every neighbour of a
    // constrained vertex lies in the dependency region by construction.
    let constrained: Vec<(usize, u8, u64)> = event
        .region()
        .iter()
        .zip(event.pattern().iter())
        .map(|(v, &target)| {
            let pos = dep.position_of(v).expect("region inside dependency");
            let mut mask = 0u64;
            for u in tree.neighbors(v) {
                mask |= 1 << dep.position_of(u).expect("neighbour inside dependency");
            }
            (pos, target, mask)
        })
        .collect();
    let mut match_count = vec![0u64; m + 1];
    for assignment in 0u64..(1u64 << m) {
        let ok = constrained.iter().all(|&(pos, target, mask)| {
            let spin = (assignment >> pos) & 1;
            let kept = spin == 1 && (assignment & mask) != 0;
            kept as u8 == target
        });
        if ok {
            match_count[assignment.count_ones() as usize] += 1;
        }
    }
    let pr = p.ratio();
    let qr = p.complement();
    let mut p_pow = vec![BigRational::one()];
    let mut q_pow = vec![BigRational::one()];
    for k in 1..=m {
        p_pow.push(&p_pow[k - 1] * &pr);
        q_pow.push(&q_pow[k - 1] * &qr);
    }
    let mut total = BigRational::zero();
    for k in 0..=m {
        if match_count[k] > 0 {
            total += &p_pow[k] * &q_pow[m - k] * BigRational::from_integer(match_count[k].into());
        }
    }
    Ok(Prob::Exact(total))
}

/// The distinguished second-layer observation: image fully occupied on B_1
/// and empty on the rest of B_2.
pub fn omega_star_event(tree: &Arc<RootedTree>) -> Result<SecondLayerEvent> {
    let b2 = Region::ball(tree, 2)?;
    let b1_size = tree.ball_size(1)?;
    let pattern = b2.iter().map(|v| (v < b1_size) as u8).collect();
    SecondLayerEvent::new(b2, pattern)
}

fn constant_event(region: Region, value: u8) -> Result<SecondLayerEvent> {
    let pattern = vec![value; region.len()];
    SecondLayerEvent::new(region, pattern)
}

/// Both sides of the first/second-layer relation at a given radius: the
/// ratio of the conditional image probabilities of the distinguished
/// pattern and of the all-zero pattern on B_2: conditioned on image zeros
/// on B_{R+1}\B_2 and image ones on B_{R+2}\B_{R+1}: against p/(1-p)
/// times the constrained-measure probability of the phase-zero ground
/// state on B_2 inside B_{R+1}.
#[derive(Clone, Debug)]
pub struct RelationCheck {
    pub big_r: u32,
    pub p: Density,
    pub lhs: Prob,
    pub rhs: Prob,
    pub rel_err: f64,
    /// Set in exact mode: whether the two rationals are identical.
    pub exact_equal: Option<bool>,
}

pub fn verify_relation(
    tree: &Arc<RootedTree>,
    big_r: u32,
    p: &Density,
    mode: Mode,
) -> Result<RelationCheck> {
    if tree.max_depth() < big_r + 3 {
        return Err(Error::TreeTooShallow {
            need: big_r + 3,
            have: tree.max_depth(),
        });
    }
    let zeros_annulus = constant_event(Region::annulus(tree, 2, big_r + 1)?, 0)?;
    let ones_annulus = constant_event(Region::annulus(tree, big_r + 1, big_r + 2)?, 1)?;
    let conditioning = zeros_annulus.join(&ones_annulus)?;

    let star = omega_star_event(tree)?.join(&conditioning)?;
    let zero = constant_event(Region::ball(tree, 2)?, 0)?.join(&conditioning)?;

    let num = image_event_prob_dp(&star, p, mode)?;
    let den = image_event_prob_dp(&zero, p, mode)?;
    if den.is_zero() {
        return Err(Error::ZeroConditioning);
    }
    let lhs = divide(num, den)?;

    let b2 = Region::ball(tree, 2)?;
    let pattern = ground_state(&b2, Phase::Zero);
    let nu = hardcore::nu_pattern_dp(tree, big_r + 1, p, &pattern, mode)?;
    let rhs = scale_by_odds(nu, p);

    let rel_err = lhs.rel_err(&rhs);
    let exact_equal = match (&lhs, &rhs) {
        (Prob::Exact(a), Prob::Exact(b)) => Some(a == b),
        _ => None,
    };
    Ok(RelationCheck {
        big_r,
        p: *p,
        lhs,
        rhs,
        rel_err,
        exact_equal,
    })
}

fn divide(a: Prob, b: Prob) -> Result<Prob> {
    match (a, b) {
        (Prob::Exact(a), Prob::Exact(b)) => Ok(Prob::Exact(a / b)),
        (Prob::Log(a), Prob::Log(b)) => Ok(Prob::Log(a.over(&b))),
        _ => Err(Error::InvalidSpec("mixed probability modes".into())),
    }
}

/// Multiplies by p/(1-p), preserving the mode.
fn scale_by_odds(value: Prob, p: &Density) -> Prob {
    match value {
        Prob::Exact(v) => Prob::Exact(v * (p.ratio() / p.complement())),
        Prob::Log(v) => Prob::Log(v.times(&LogProb::from_ln(p.ln() - p.ln_complement()))),
    }
}

/// One row of the odd/even ratio experiment.
#[derive(Clone, Debug)]
pub struct RatioRow {
    pub tree_id: String,
    pub p: Density,
    pub big_r: u32,
    /// Probability of the phase-zero ground state on B_2 under the
    /// constrained measure on the odd ball B_{2R+1} (disfavoured there).
    pub nu_odd_pattern: Prob,
    /// The same probability on the even ball B_{2R} (favoured there).
    pub nu_even_pattern: Prob,
    pub ratio: Prob,
    /// eps/(1 - |B_2| eps) in the convergent regime.
    pub bound: Option<Prob>,
    pub regime: &'static str,
    pub pass: Option<bool>,
}

/// For each R, compares the probability of the phase-zero ground state on
/// B_2 under odd-ball versus even-ball conditioning. In the convergent
/// regime the ratio stays below eps/(1 - |B_2| eps) uniformly in R: the
/// finite-volume discontinuity signature.
pub fn ratio_experiment(
    tree: &Arc<RootedTree>,
    p: &Density,
    big_rs: &[u32],
    mode: Mode,
) -> Result<Vec<RatioRow>> {
    let degrees = crate::tree::validate_degree_bounds(tree);
    let b2 = Region::ball(tree, 2)?;
    let pattern = ground_state(&b2, Phase::Zero);
    let bound = ratio_bound(
        p,
        degrees.d_min_children,
        degrees.d_max_children,
        b2.len() as u32,
        mode,
    );
    let mut rows = Vec::new();
    for &big_r in big_rs {
        let odd = hardcore::nu_pattern_dp(tree, 2 * big_r + 1, p, &pattern, mode)?;
        let even = hardcore::nu_pattern_dp(tree, 2 * big_r, p, &pattern, mode)?;
        if even.is_zero() {
            return Err(Error::ZeroConditioning);
        }
        let ratio = divide(odd.clone(), even.clone())?;
        let pass = bound.as_ref().map(|b| ratio.le(b));
        rows.push(RatioRow {
            tree_id: tree.id().to_string(),
            p: *p,
            big_r,
            nu_odd_pattern: odd,
            nu_even_pattern: even,
            ratio,
            bound: bound.clone(),
            regime: if bound.is_some() {
                "convergent"
            } else {
                "divergent"
            },
            pass,
        });
    }
    Ok(rows)
}

/// eps/(1 - |B_2| eps) when the Peierls series converges and the
/// denominator stays positive.
fn ratio_bound(p: &Density, d_min: u32, d_max: u32, b2_size: u32, mode: Mode) -> Option<Prob> {
    match crate::cutsets::peierls_bound(p, d_min, d_max, Mode::Exact) {
        crate::cutsets::BoundOutcome::Convergent(eps) => {
            let eps = eps.exact().expect("exact mode requested").clone();
            let denom = BigRational::one() - BigRational::from_integer(b2_size.into()) * &eps;
            if denom <= BigRational::zero() {
                return None;
            }
            let value = eps / denom;
            Some(match mode {
                Mode::Exact => Prob::Exact(value),
                Mode::Log => Prob::Log(LogProb::from_ln(crate::prob::rational_to_f64(&value).ln())),
            })
        }
        crate::cutsets::BoundOutcome::Divergent => None,
    }
}

/// Which B_2 observation the conditional-probability lower bound targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenomCase {
    /// The distinguished pattern: image occupied on B_1, empty on the rest.
    OmegaStar,
    /// The all-zero image pattern.
    AllZero,
}

#[derive(Clone, Debug)]
pub struct DenomCheck {
    pub big_r: u32,
    pub p: Density,
    pub case: DenomCase,
    /// Conditional probability of the B_2 pattern given image zeros on
    /// B_{2R}\B_2 and image ones on B_{2R+2}\B_{2R}.
    pub proxy: Prob,
    /// 1/(1 + 1/W(hat)) with W(hat) the Bernoulli weight of the unique
    /// first-layer configuration on B_2 producing the pattern with an empty
    /// second shell.
    pub c_p: Prob,
    pub pass: bool,
}

/// Checks that the conditional probability of the B_2 observation given the
/// two-annulus conditioning stays above the radius-independent constant
/// c(p) = 1/(1 + 1/W(hat)).
pub fn denominator_bound_check(
    tree: &Arc<RootedTree>,
    big_r: u32,
    p: &Density,
    case: DenomCase,
    mode: Mode,
) -> Result<DenomCheck> {
    if tree.max_depth() < 2 * big_r + 3 {
        return Err(Error::TreeTooShallow {
            need: 2 * big_r + 3,
            have: tree.max_depth(),
        });
    }
    let zeros = constant_event(Region::annulus(tree, 2, 2 * big_r)?, 0)?;
    let ones = constant_event(Region::annulus(tree, 2 * big_r, 2 * big_r + 2)?, 1)?;
    let conditioning = zeros.join(&ones)?;
    let b2_event = match case {
        DenomCase::OmegaStar => omega_star_event(tree)?,
        DenomCase::AllZero => constant_event(Region::ball(tree, 2)?, 0)?,
    };
    let joint = b2_event.join(&conditioning)?;
    let num = image_event_prob_dp(&joint, p, mode)?;
    let den = image_event_prob_dp(&conditioning, p, mode)?;
    if den.is_zero() {
        return Err(Error::ZeroConditioning);
    }
    let proxy = divide(num, den)?;

    // The pre-image configuration on B_2: the pattern itself on B_1 with an
    // empty second shell for the distinguished case, all-empty otherwise.
    let b1_size = tree.ball_size(1)?;
    let b2_size = tree.ball_size(2)?;
    let hat_ones = match case {
        DenomCase::OmegaStar => b1_size,
        DenomCase::AllZero => 0,
    };
    let c_p = match mode {
        Mode::Exact => {
            let w_hat = num_traits::pow::pow(p.ratio(), hat_ones as usize)
                * num_traits::pow::pow(p.complement(), (b2_size - hat_ones) as usize);
            Prob::Exact(BigRational::one() / (BigRational::one() + BigRational::one() / w_hat))
        }
        Mode::Log => {
            let ln_w = hat_ones as f64 * p.ln() + (b2_size - hat_ones) as f64 * p.ln_complement();
            // ln of 1/(1 + 1/W) = -logsumexp(0, -ln W).
            let ln_c = -LogProb::from_ln(0.0)
                .plus(&LogProb::from_ln(-ln_w))
                .ln_value();
            Prob::Log(LogProb::from_ln(ln_c))
        }
    };
    let pass = c_p.le(&proxy);
    Ok(DenomCheck {
        big_r,
        p: *p,
        case,
        proxy,
        c_p,
        pass,
    })
}

/// Subtraction for semiring values where the result is known nonnegative
/// (the all-children-any product dominates its all-children-unoccupied
/// slice).
pub(crate) trait PlusNeg {
    fn minus(&self, other: &Self) -> Self;
}

impl PlusNeg for BigRational {
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
}

impl PlusNeg for LogProb {
    fn minus(&self, other: &Self) -> Self {
        let (a, b) = (self.ln_value(), other.ln_value());
        if b == f64::NEG_INFINITY {
            return *self;
        }
        debug_assert!(b <= a + 1e-9, "negative log-domain difference: {b} > {a}");
        if b >= a {
            return LogProb::from_ln(f64::NEG_INFINITY);
        }
        // log(1 - e^x) for x < 0, split at -ln 2 for accuracy on both ends.
        let x = b - a;
        let log1mexp = if x > -std::f64::consts::LN_2 {
            (-x.exp_m1()).ln()
        } else {
            (-x.exp()).ln_1p()
        };
        LogProb::from_ln(a + log1mexp)
    }
}
