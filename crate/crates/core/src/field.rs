//! Spin configurations and the isolated-site removal transform.
//!
//! A configuration assigns 0/1 to every vertex of a domain region; queries
//! outside the domain are errors, not defaults. The transform keeps every
//! occupied vertex that has at least one occupied neighbour and removes the
//! isolated ones. Neighbourhoods that reach past the domain (or past the
//! stored truncation) are resolved by an explicit exterior rule.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Density, Mode, Prob, Weight};
use crate::rng::SplitMix64;
use crate::tree::{Region, RootedTree, Vertex};

/// The two alternating phases. `Zero` is the ground state with unoccupied
/// even depths (value 0 at the root); `One` is its flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Zero,
    One,
}

impl Phase {
    pub fn root_value(self) -> u8 {
        match self {
            Phase::Zero => 0,
            Phase::One => 1,
        }
    }

    /// Ground-state value at a vertex of the given depth.
    pub fn value_at_depth(self, depth: u32) -> u8 {
        (self.root_value() as u32 ^ (depth & 1)) as u8
    }

    pub fn flip(self) -> Phase {
        match self {
            Phase::Zero => Phase::One,
            Phase::One => Phase::Zero,
        }
    }

    pub fn from_index(i: u8) -> Result<Phase> {
        match i {
            0 => Ok(Phase::Zero),
            1 => Ok(Phase::One),
            _ => Err(Error::InvalidSpec(format!("phase must be 0 or 1, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        self.root_value()
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Phase::from_index(v).map_err(serde::de::Error::custom)
    }
}

/// How spins outside a configuration's domain (including unstored children
/// of truncation-depth vertices) are treated by the transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExteriorRule {
    /// Evaluate only where the full neighbourhood is inside the domain; the
    /// output domain shrinks accordingly.
    Mask,
    /// Exterior spins fixed to 0.
    AllZero,
    /// Exterior spins fixed to 1 (the fully occupied boundary condition).
    AllOne,
}

/// A 0/1 assignment on a domain region.
#[derive(Clone, Debug)]
pub struct Configuration {
    domain: Region,
    bits: Vec<u8>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.bits == other.bits
    }
}

impl Configuration {
    pub fn new(domain: Region, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != domain.len() {
            return Err(Error::InvalidSpec(format!(
                "{} bits for a domain of {} vertices",
                bits.len(),
                domain.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidSpec("bits must be 0 or 1".into()));
        }
        Ok(Configuration { domain, bits })
    }

    pub fn constant(domain: Region, value: u8) -> Self {
        let bits = vec![value; domain.len()];
        Configuration { domain, bits }
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn tree(&self) -> &Arc<RootedTree> {
        self.domain.tree()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, v: Vertex) -> Result<u8> {
        self.try_get(v).ok_or(Error::OutsideDomain(v))
    }

    pub fn try_get(&self, v: Vertex) -> Option<u8> {
        self.domain.position_of(v).map(|i| self.bits[i])
    }

    pub fn occupied(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.domain
            .iter()
            .zip(self.bits.iter())
            .filter(|&(_, &b)| b == 1)
            .map(|(v, _)| v)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_all_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Export as `{"domain":[...],"bits":"0101..."}`.
    pub fn to_json(&self) -> serde_json::Value {
        let bits: String = self
            .bits
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect();
        serde_json::json!({ "domain": self.domain.verts(), "bits": bits })
    }

    pub fn from_json(tree: &Arc<RootedTree>, value: &serde_json::Value) -> Result<Self> {
        let domain: Vec<Vertex> = serde_json::from_value(value["domain"].clone())?;
        let bits_str = value["bits"]
            .as_str()
            .ok_or_else(|| Error::InvalidSpec("bits must be a 01-string".into()))?;
        let bits: Vec<u8> = bits_str
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidSpec(format!("bad bit char {c:?}"))),
            })
            .collect::<Result<_>>()?;
        Configuration::new(Region::new(Arc::clone(tree), domain)?, bits)
    }
}

/// Independent Bernoulli(p) spins on a region, drawn from a splitmix64
/// stream over the region's vertices in ascending order. Deterministic in
/// (tree, region, p, seed).
pub fn sample_bernoulli(region: &Region, p: &Density, seed: u64) -> Configuration {
    let mut rng = SplitMix64::new(seed);
    let threshold = p.f64();
    let bits = region
        .iter()
        .map(|_| rng.next_bernoulli(threshold) as u8)
        .collect();
    Configuration {
        domain: region.clone(),
        bits,
    }
}

/// The removal transform: an occupied vertex stays occupied iff it has at
/// least one occupied neighbour; unoccupied vertices stay unoccupied.
///
/// The domain must be a ball (or the full stored tree). Under `Mask` the
/// output domain is the next smaller ball, the largest set on which every
/// neighbourhood is determined by the input alone. Under `AllZero`/`AllOne`
/// spins outside the domain, including the unstored children of vertices at
/// the truncation depth, are fixed to 0/1 and the domain is preserved.
pub fn thin(config: &Configuration, rule: ExteriorRule) -> Result<Configuration> {
    let radius = config.domain().as_ball().ok_or(Error::NotABall)?;
    let tree = config.tree();
    let out_domain = match rule {
        ExteriorRule::Mask => {
            if radius == 0 {
                Region::empty(tree)
            } else {
                Region::ball(tree, radius - 1)?
            }
        }
        ExteriorRule::AllZero | ExteriorRule::AllOne => config.domain().clone(),
    };
    let exterior: u8 = match rule {
        ExteriorRule::AllOne => 1,
        _ => 0,
    };
    let n_in = config.domain().len() as Vertex;
    let bits = out_domain
        .iter()
        .map(|v| {
            if config.bits[v as usize] == 0 {
                return 0;
            }
            let mut witness = false;
            for u in tree.neighbors(v) {
                let spin = if u < n_in {
                    config.bits[u as usize]
                } else {
                    exterior
                };
                if spin == 1 {
                    witness = true;
                    break;
                }
            }
            // A vertex at the truncation depth has unstored children, all
            // fixed to the exterior value.
            if !witness && tree.depth_of(v) == tree.max_depth() {
                witness = exterior == 1;
            }
            witness as u8
        })
        .collect();
    Ok(Configuration {
        domain: out_domain,
        bits,
    })
}

/// The alternating ground state of the given phase restricted to a region.
pub fn ground_state(region: &Region, phase: Phase) -> Configuration {
    let tree = region.tree();
    let bits = region
        .iter()
        .map(|v| phase.value_at_depth(tree.depth_of(v)))
        .collect();
    Configuration {
        domain: region.clone(),
        bits,
    }
}

/// Flips the spins on `region`, which must lie inside the domain.
pub fn flip_region(config: &Configuration, region: &Region) -> Result<Configuration> {
    let mut out = config.clone();
    for v in region.iter() {
        let i = config
            .domain
            .position_of(v)
            .ok_or(Error::OutsideDomain(v))?;
        out.bits[i] ^= 1;
    }
    Ok(out)
}

fn weight_of<W: Weight>(p: &Density, ones: u32, zeros: u32) -> W {
    W::occupied(p).power(ones).times(&W::empty(p).power(zeros))
}

/// The Bernoulli weight of the configuration restricted to `region`:
/// the product over the region of p for occupied and 1-p for unoccupied.
pub fn bernoulli_weight(
    config: &Configuration,
    region: &Region,
    p: &Density,
    mode: Mode,
) -> Result<Prob> {
    let mut ones: u32 = 0;
    for v in region.iter() {
        ones += config.get(v)? as u32;
    }
    let zeros = region.len() as u32 - ones;
    Ok(match mode {
        Mode::Exact => weight_of::<num_rational::BigRational>(p, ones, zeros).into_prob(),
        Mode::Log => weight_of::<crate::prob::LogProb>(p, ones, zeros).into_prob(),
    })
}

/// Maximal connected sets of occupied vertices within the domain, each
/// sorted, ordered by their smallest vertex.
pub fn clusters(config: &Configuration) -> Vec<Vec<Vertex>> {
    let domain = config.domain();
    let tree = config.tree();
    let n = domain.len();
    let mut dsu: Vec<usize> = (0..n).collect();
    fn find(dsu: &mut [usize], mut i: usize) -> usize {
        while dsu[i] != i {
            dsu[i] = dsu[dsu[i]];
            i = dsu[i];
        }
        i
    }
    for (i, &v) in domain.verts().iter().enumerate() {
        if config.bits[i] == 0 {
            continue;
        }
        if let Some(parent) = tree.parent_of(v) {
            if let Some(j) = domain.position_of(parent) {
                if config.bits[j] == 1 {
                    let (a, b) = (find(&mut dsu, i), find(&mut dsu, j));
                    if a != b {
                        dsu[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<Vertex>> = Default::default();
    for (i, &v) in domain.verts().iter().enumerate() {
        if config.bits[i] == 1 {
            let r = find(&mut dsu, i);
            by_root.entry(r).or_default().push(v);
        }
    }
    by_root.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeSpec;
    use proptest::prelude::*;

    fn binary(depth: u32) -> Arc<RootedTree> {
        TreeSpec::binary(depth).build().unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let t = binary(9);
        let region = Region::full(&t);
        let p = Density::new(1, 2).unwrap();
        let a = sample_bernoulli(&region, &p, 11);
        let b = sample_bernoulli(&region, &p, 11);
        let c = sample_bernoulli(&region, &p, 12);
        assert_eq!(a, b);
        assert!(region.len() >= 1000);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_mean_matches_density() {
        // Law of large numbers over ~1e5 vertices; 0.01 is over 3 sigma.
        let t = binary(15);
        let region = Region::full(&t);
        assert!(region.len() >= 90_000);
        let p = Density::new(7, 10).unwrap();
        let cfg = sample_bernoulli(&region, &p, 2024);
        let mean = cfg.count_ones() as f64 / region.len() as f64;
        assert!((mean - 0.7).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn thin_keeps_all_zero() {
        let t = binary(3);
        let cfg = Configuration::constant(Region::full(&t), 0);
        for rule in [
            ExteriorRule::Mask,
            ExteriorRule::AllZero,
            ExteriorRule::AllOne,
        ] {
            assert!(thin(&cfg, rule).unwrap().is_all_zero());
        }
    }

    #[test]
    fn thin_removes_isolated_root() {
        let t = binary(3);
        let mut bits = vec![0u8; t.n() as usize];
        bits[0] = 1;
        let cfg = Configuration::new(Region::full(&t), bits).unwrap();
        let out = thin(&cfg, ExteriorRule::AllZero).unwrap();
        assert!(out.is_all_zero());
    }

    #[test]
    fn thin_keeps_adjacent_pair() {
        let t = binary(3);
        let mut bits = vec![0u8; t.n() as usize];
        bits[0] = 1;
        bits[1] = 1;
        let cfg = Configuration::new(Region::full(&t), bits).unwrap();
        let out = thin(&cfg, ExteriorRule::AllZero).unwrap();
        assert_eq!(out, cfg);
    }

    #[test]
    fn thin_mask_shrinks_domain() {
        let t = binary(4);
        let cfg = Configuration::constant(Region::ball(&t, 3).unwrap(), 1);
        let out = thin(&cfg, ExteriorRule::Mask).unwrap();
        assert_eq!(out.domain().as_ball(), Some(2));
        // Fully occupied stays fully occupied where evaluable.
        assert!(out.bits().iter().all(|&b| b == 1));
    }

    #[test]
    fn thin_all_one_keeps_truncation_layer() {
        // A lone occupied vertex at the truncation depth has occupied
        // unstored children under AllOne, so it survives.
        let t = binary(2);
        let mut bits = vec![0u8; t.n() as usize];
        bits[4] = 1;
        let cfg = Configuration::new(Region::full(&t), bits).unwrap();
        let kept = thin(&cfg, ExteriorRule::AllOne).unwrap();
        assert_eq!(kept.get(4).unwrap(), 1);
        let dropped = thin(&cfg, ExteriorRule::AllZero).unwrap();
        assert_eq!(dropped.get(4).unwrap(), 0);
    }

    #[test]
    fn thin_requires_ball_domain() {
        let t = binary(3);
        let region = Region::new(Arc::clone(&t), vec![0, 1, 4]).unwrap();
        let cfg = Configuration::constant(region, 1);
        assert!(matches!(
            thin(&cfg, ExteriorRule::AllZero),
            Err(Error::NotABall)
        ));
    }

    #[test]
    fn ground_states() {
        let t = binary(2);
        let region = Region::full(&t);
        let w0 = ground_state(&region, Phase::Zero);
        let w1 = ground_state(&region, Phase::One);
        assert_eq!(w0.get(0).unwrap(), 0);
        assert_eq!(w1.get(0).unwrap(), 1);
        assert_eq!(w0.get(1).unwrap(), 1);
        assert_eq!(flip_region(&w0, &region).unwrap(), w1);
    }

    #[test]
    fn flip_examples() {
        let t = binary(2);
        let full = Region::full(&t);
        let sub = Region::new(Arc::clone(&t), vec![0, 4, 5]).unwrap();
        let zero = Configuration::constant(full.clone(), 0);
        let flipped = flip_region(&zero, &sub).unwrap();
        assert_eq!(flipped.count_ones(), 3);
        assert_eq!(flip_region(&flipped, &sub).unwrap(), zero);
        // Flipping a ground state on a region lands on the other one there.
        let w0 = ground_state(&full, Phase::Zero);
        let w1 = ground_state(&full, Phase::One);
        let f = flip_region(&w0, &sub).unwrap();
        for v in sub.iter() {
            assert_eq!(f.get(v).unwrap(), w1.get(v).unwrap());
        }
        // A region escaping the domain is an error.
        let small = Configuration::constant(Region::ball(&t, 1).unwrap(), 0);
        assert!(flip_region(&small, &sub).is_err());
    }

    #[test]
    fn weight_examples() {
        let t = binary(2);
        let p = Density::new(1, 2).unwrap();
        let region3 = Region::new(Arc::clone(&t), vec![0, 1, 2]).unwrap();
        let ones = Configuration::constant(Region::full(&t), 1);
        let w = bernoulli_weight(&ones, &region3, &p, Mode::Exact).unwrap();
        assert_eq!(w.render(), "1/8");

        // Ground state of phase Zero on B_1: one zero (root), three ones.
        let p = Density::new(3, 10).unwrap();
        let b1 = Region::ball(&t, 1).unwrap();
        let w0 = ground_state(&b1, Phase::Zero);
        let w = bernoulli_weight(&w0, &b1, &p, Mode::Exact).unwrap();
        let expect = p.complement() * p.ratio() * p.ratio() * p.ratio();
        assert_eq!(w.exact().unwrap(), &expect);

        // Empty region gives the empty product.
        let empty = Region::empty(&t);
        let w = bernoulli_weight(&ones, &empty, &p, Mode::Exact).unwrap();
        assert_eq!(w.render(), "1/1");
    }

    #[test]
    fn cluster_examples() {
        let t = binary(2);
        let full = Region::full(&t);
        assert!(clusters(&Configuration::constant(full.clone(), 0)).is_empty());

        let mut bits = vec![0u8; t.n() as usize];
        bits[0] = 1;
        bits[2] = 1;
        let pair = Configuration::new(full.clone(), bits).unwrap();
        assert_eq!(clusters(&pair), vec![vec![0, 2]]);

        // Phase-One ground state on B_2: root and the six depth-2 vertices
        // occupied, none adjacent: seven singletons.
        let b2 = Region::ball(&t, 2).unwrap();
        let w1 = ground_state(&b2, Phase::One);
        let cl = clusters(&w1);
        assert_eq!(cl.len(), 7);
        assert!(cl.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn config_json_round_trip() {
        let t = binary(2);
        let cfg = ground_state(&Region::ball(&t, 1).unwrap(), Phase::One);
        let doc = cfg.to_json();
        assert_eq!(doc["bits"], "1000");
        let back = Configuration::from_json(&t, &doc).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn get_outside_domain_is_error() {
        let t = binary(2);
        let cfg = Configuration::constant(Region::ball(&t, 1).unwrap(), 1);
        assert!(matches!(cfg.get(9), Err(Error::OutsideDomain(9))));
    }

    proptest! {
        #[test]
        fn thin_invariants(seed in 0u64..5000, num in 1u64..20) {
            let t = binary(4);
            let p = Density::new(num, 20).unwrap();
            let cfg = sample_bernoulli(&Region::full(&t), &p, seed);
            for rule in [ExteriorRule::AllZero, ExteriorRule::AllOne] {
                let once = thin(&cfg, rule).unwrap();
                let twice = thin(&once, rule).unwrap();
                // Idempotent: removing isolates creates no new isolates.
                prop_assert_eq!(&once, &twice);
                // Pointwise decreasing.
                for (a, b) in once.bits().iter().zip(cfg.bits().iter()) {
                    prop_assert!(a <= b);
                }
            }
            // Cluster preservation under the all-zero exterior: clusters of
            // size >= 2 survive exactly, singletons vanish.
            let out = thin(&cfg, ExteriorRule::AllZero).unwrap();
            let before: Vec<_> = clusters(&cfg).into_iter().filter(|c| c.len() >= 2).collect();
            let after = clusters(&out);
            prop_assert_eq!(before, after);
        }

        #[test]
        fn weight_is_multiplicative_over_disjoint_regions(seed in 0u64..1000) {
            let t = binary(3);
            let p = Density::new(2, 5).unwrap();
            let cfg = sample_bernoulli(&Region::full(&t), &p, seed);
            let a = Region::ball(&t, 1).unwrap();
            let b = Region::annulus(&t, 1, 3).unwrap();
            let u = a.union(&b);
            let wa = bernoulli_weight(&cfg, &a, &p, Mode::Exact).unwrap();
            let wb = bernoulli_weight(&cfg, &b, &p, Mode::Exact).unwrap();
            let wu = bernoulli_weight(&cfg, &u, &p, Mode::Exact).unwrap();
            prop_assert_eq!(wa.exact().unwrap() * wb.exact().unwrap(), wu.exact().unwrap().clone());
        }
    }
}
