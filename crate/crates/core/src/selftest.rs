//! Invariant self-test suites runnable at desk scale.
//!
//! Each check exercises one cross-cutting invariant with its own inputs and
//! reports pass/fail plus a one-line detail; the CLI's `selftest`
//! subcommand maps the aggregate onto its exit code.

use std::sync::Arc;

use crate::cutsets;
use crate::error::Result;
use crate::field::{self, ExteriorRule, Phase};
use crate::hardcore;
use crate::prob::{Density, Mode};
use crate::tree::{Region, RootedTree, TreeSpec};
use crate::twolayer::{self, DenomCase, SecondLayerEvent};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Small,
    Full,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match body() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn trees_for_oracles(budget: Budget) -> Result<Vec<Arc<RootedTree>>> {
    let mut specs = vec![
        TreeSpec::binary(3),
        TreeSpec::ByLevel {
            children_per_level: vec![3, 2, 3],
            depth: 3,
        },
    ];
    let seeds: &[u64] = match budget {
        Budget::Small => &[1, 2],
        Budget::Full => &[1, 2, 3, 4, 5, 6],
    };
    for &seed in seeds {
        specs.push(TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 2,
            seed,
        });
    }
    specs.iter().map(|s| s.build()).collect()
}

/// Transform invariants: idempotence, pointwise decrease and exact
/// preservation of multi-vertex clusters over seeded samples.
fn transform_invariants(budget: Budget) -> Check {
    check("transform-invariants", || {
        let samples = match budget {
            Budget::Small => 100,
            Budget::Full => 1000,
        };
        let tree = TreeSpec::binary(6).build()?;
        let region = Region::full(&tree);
        let p = Density::new(1, 2)?;
        for seed in 0..samples {
            let cfg = field::sample_bernoulli(&region, &p, seed);
            for rule in [ExteriorRule::AllZero, ExteriorRule::AllOne] {
                let once = field::thin(&cfg, rule)?;
                let twice = field::thin(&once, rule)?;
                if once != twice {
                    return Ok((false, format!("not idempotent at seed {seed}")));
                }
                if once.bits().iter().zip(cfg.bits()).any(|(a, b)| a > b) {
                    return Ok((false, format!("not decreasing at seed {seed}")));
                }
            }
            let out = field::thin(&cfg, ExteriorRule::AllZero)?;
            let before: Vec<_> = field::clusters(&cfg)
                .into_iter()
                .filter(|c| c.len() >= 2)
                .collect();
            if before != field::clusters(&out) {
                return Ok((false, format!("cluster mismatch at seed {seed}")));
            }
        }
        Ok((true, format!("{samples} seeded configurations")))
    })
}

/// First-layer oracle equivalence across tree shapes and densities.
fn first_layer_oracle(budget: Budget) -> Check {
    check("first-layer-oracle", || {
        let trees = trees_for_oracles(budget)?;
        let densities = [
            Density::new(1, 5)?,
            Density::new(1, 2)?,
            Density::new(9, 10)?,
        ];
        let mut cases = 0;
        for tree in &trees {
            let radius = tree.max_depth().min(2);
            for p in &densities {
                let marg = hardcore::nu_marginals(tree, radius, p, Mode::Exact)?;
                let log = hardcore::nu_marginals(tree, radius, p, Mode::Log)?;
                for v in 0..tree.ball_size(radius)? {
                    let oracle = hardcore::nu_event_bruteforce(tree, radius, p, |bits| {
                        bits[v as usize] == 1
                    })?;
                    if marg[v as usize].1.exact() != oracle.exact() {
                        return Ok((false, format!("{} vertex {v}: dp != oracle", tree.id())));
                    }
                    if oracle.rel_err(&log[v as usize].1) > 1e-12 {
                        return Ok((false, format!("{} vertex {v}: log drift", tree.id())));
                    }
                    cases += 1;
                }
            }
        }
        Ok((true, format!("{cases} marginals, {} trees", trees.len())))
    })
}

/// Second-layer oracle equivalence on deterministic pseudo-random events.
fn second_layer_oracle(budget: Budget) -> Check {
    check("second-layer-oracle", || {
        let tree = TreeSpec::binary(4).build()?;
        let p = Density::new(7, 10)?;
        let goal = match budget {
            Budget::Small => 25,
            Budget::Full => 100,
        };
        let mut rng = crate::rng::SplitMix64::new(99);
        let mut tested = 0;
        while tested < goal {
            let b2 = tree.ball_size(2)?;
            let verts: Vec<u32> = (0..b2).filter(|_| rng.next_u64() % 3 == 0).collect();
            if verts.is_empty() {
                continue;
            }
            let pattern: Vec<u8> = verts.iter().map(|_| (rng.next_u64() & 1) as u8).collect();
            let region = Region::new(Arc::clone(&tree), verts)?;
            if region.closure().len() > 20 {
                continue;
            }
            let event = SecondLayerEvent::new(region, pattern)?;
            let dp = twolayer::image_event_prob_dp(&event, &p, Mode::Exact)?;
            let oracle = twolayer::image_event_prob_bruteforce(&event, &p)?;
            if dp.exact() != oracle.exact() {
                return Ok((false, format!("event #{tested}: dp != oracle")));
            }
            tested += 1;
        }
        Ok((true, format!("{goal} randomized events")))
    })
}

/// Cutset calculus: pushout closure equals direct enumeration, bookkeeping
/// and size/replacement bounds hold.
fn cutset_calculus(budget: Budget) -> Check {
    check("cutset-calculus", || {
        let (depth, max_interior, max_n) = match budget {
            Budget::Small => (7, 10, 3),
            Budget::Full => (9, 13, 4),
        };
        let trees = [TreeSpec::binary(depth).build()?, {
            let levels = (0..depth).map(|d| if d % 2 == 0 { 3 } else { 2 }).collect();
            TreeSpec::ByLevel {
                children_per_level: levels,
                depth,
            }
            .build()?
        }];
        for tree in &trees {
            let degrees = crate::tree::validate_degree_bounds(tree);
            for kind in [Phase::Zero, Phase::One] {
                let brute = cutsets::enumerate_bruteforce(tree, kind, max_interior)?;
                let pushed = cutsets::enumerate_pushout(tree, kind, max_n)?;
                let mut a: Vec<Vec<u32>> = brute.iter().map(|c| c.interior().to_vec()).collect();
                let mut b: Vec<Vec<u32>> = pushed
                    .all()
                    .filter(|c| c.interior().len() <= max_interior)
                    .map(|c| c.interior().to_vec())
                    .collect();
                a.sort();
                b.sort();
                if a != b {
                    return Ok((
                        false,
                        format!("{} type {kind:?}: {} vs {}", tree.id(), a.len(), b.len()),
                    ));
                }
                for cutset in pushed.all() {
                    if !cutset.check_bounds(degrees.d_min_children, degrees.d_max_children) {
                        return Ok((false, format!("bounds fail: {:?}", cutset.record())));
                    }
                    if cutset.reduce_to_initial()?.len() as u32 != cutset.pushout_count() {
                        return Ok((false, "reduction length mismatch".to_string()));
                    }
                }
            }
        }
        Ok((
            true,
            format!("{} trees, interiors to {max_interior}", trees.len()),
        ))
    })
}

/// Subgraph counts against the entropy bound.
fn entropy_bound(budget: Budget) -> Check {
    check("entropy-bound", || {
        let k_max = match budget {
            Budget::Small => 5,
            Budget::Full => 8,
        };
        let trees = [
            TreeSpec::binary(8).build()?,
            TreeSpec::SeededRandom {
                root_children: 3,
                d_min_children: 2,
                d_max_children: 3,
                depth: 8,
                seed: 17,
            }
            .build()?,
        ];
        for tree in &trees {
            for k in 0..=k_max {
                let count = cutsets::count_connected_subgraphs(tree, k)?;
                let bound = cutsets::subgraph_count_bound(tree, k);
                if num_bigint::BigInt::from(count) > bound {
                    return Ok((false, format!("{} k={k}: {count} > {bound}", tree.id())));
                }
            }
        }
        Ok((true, format!("k up to {k_max} on {} trees", trees.len())))
    })
}

/// The Peierls sandwich at radius 3 and the convergence threshold.
fn peierls_sandwich(_budget: Budget) -> Check {
    check("peierls-sandwich", || {
        let tree = TreeSpec::binary(4).build()?;
        let p = Density::new(999, 1000)?;
        let nu = hardcore::nu_marginal_dp(&tree, 3, &p, 0, 0, Mode::Exact)?;
        let sum = cutsets::peierls_sum_exact(&tree, 3, &p, Phase::Zero, Mode::Exact)?;
        let bound = match cutsets::peierls_bound(&p, 2, 2, Mode::Exact) {
            cutsets::BoundOutcome::Convergent(b) => b,
            cutsets::BoundOutcome::Divergent => return Ok((false, "diverged at 0.999".into())),
        };
        let ok = nu.le(&sum) && sum.le(&bound);
        let threshold_ok = !cutsets::peierls_convergent(&Density::new(729, 730)?, 2, 2)
            && cutsets::peierls_convergent(&Density::new(7291, 7300)?, 2, 2);
        Ok((
            ok && threshold_ok,
            format!(
                "nu={} sum={} bound={}",
                nu.render(),
                sum.render(),
                bound.render()
            ),
        ))
    })
}

/// The first/second-layer relation identity at small radii.
fn relation_identity(_budget: Budget) -> Check {
    check("relation-identity", || {
        let tree = TreeSpec::binary(5).build()?;
        for p in [Density::new(3, 10)?, Density::new(7, 10)?] {
            for big_r in [1u32, 2] {
                let r = twolayer::verify_relation(&tree, big_r, &p, Mode::Exact)?;
                if r.exact_equal != Some(true) {
                    return Ok((false, format!("R={big_r} p={p}: rel_err {}", r.rel_err)));
                }
            }
        }
        Ok((true, "exact at R in {1,2}".into()))
    })
}

/// The conditional-probability lower bound.
fn denominator_bound(_budget: Budget) -> Check {
    check("denominator-bound", || {
        let tree = TreeSpec::binary(7).build()?;
        for p in [Density::new(3, 10)?, Density::new(7, 10)?] {
            for case in [DenomCase::OmegaStar, DenomCase::AllZero] {
                let c = twolayer::denominator_bound_check(&tree, 2, &p, case, Mode::Exact)?;
                if !c.pass {
                    return Ok((false, format!("p={p} case={case:?}")));
                }
            }
        }
        Ok((true, "R=2 at p in {0.3, 0.7}".into()))
    })
}

/// Runs every suite at the given budget.
pub fn run(budget: Budget) -> Vec<Check> {
    vec![
        transform_invariants(budget),
        first_layer_oracle(budget),
        second_layer_oracle(budget),
        cutset_calculus(budget),
        entropy_bound(budget),
        peierls_sandwich(budget),
        relation_identity(budget),
        denominator_bound(budget),
    ]
}
