//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;

use thinfield::cutsets::{self, BoundOutcome};
use thinfield::field::{self, ground_state, ExteriorRule, Phase};
use thinfield::hardcore;
use thinfield::prob::{Density, Mode};
use thinfield::rng::SplitMix64;
use thinfield::tree::{Region, TreeSpec, Vertex};
use thinfield::twolayer::{self, DenomCase, SecondLayerEvent};

fn conclude(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}): {detail}");
}

fn densities(list: &[(u64, u64)]) -> Vec<Density> {
    list.iter()
        .map(|&(n, d)| Density::new(n, d).unwrap())
        .collect()
}

/// Pattern-match predicate over ball slices for the brute-force oracle.
fn matches(pattern: &field::Configuration) -> impl Fn(&[u8]) -> bool + '_ {
    move |bits: &[u8]| {
        pattern
            .domain()
            .iter()
            .zip(pattern.bits().iter())
            .all(|(v, &b)| bits[v as usize] == b)
    }
}

#[test]
fn criterion_1_first_layer_oracle_equivalence() {
    let mut specs = vec![
        TreeSpec::binary(2),
        TreeSpec::binary(3),
        TreeSpec::binary(4),
        TreeSpec::ByLevel {
            children_per_level: vec![3, 2],
            depth: 2,
        },
        TreeSpec::ByLevel {
            children_per_level: vec![3, 2, 2],
            depth: 3,
        },
        TreeSpec::ByLevel {
            children_per_level: vec![4, 2, 3],
            depth: 3,
        },
    ];
    for seed in 1..=14 {
        specs.push(TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 2,
            seed,
        });
    }
    assert!(specs.len() >= 20);
    let ps = densities(&[(1, 5), (1, 2), (9, 10)]);
    let mut marginal_cases = 0;
    let mut pattern_cases = 0;
    for spec in &specs {
        let tree = spec.build().unwrap();
        let radius = tree.max_depth().min(2);
        let nball = tree.ball_size(radius).unwrap();
        assert!(nball <= 20, "{}: |B_{radius}| = {nball}", tree.id());
        for p in &ps {
            let exact = hardcore::nu_marginals(&tree, radius, p, Mode::Exact).unwrap();
            let log = hardcore::nu_marginals(&tree, radius, p, Mode::Log).unwrap();
            for v in 0..nball {
                let oracle =
                    hardcore::nu_event_bruteforce(&tree, radius, p, |bits| bits[v as usize] == 1)
                        .unwrap();
                assert_eq!(
                    exact[v as usize].1.exact(),
                    oracle.exact(),
                    "{} v={v} p={p}",
                    tree.id()
                );
                assert!(oracle.rel_err(&log[v as usize].1) <= 1e-12);
                marginal_cases += 1;
            }
            // Pattern probabilities: both ground states on the window plus
            // the all-zero pattern.
            let window = Region::ball(&tree, radius.min(2)).unwrap();
            for pattern in [
                ground_state(&window, Phase::Zero),
                ground_state(&window, Phase::One),
                field::Configuration::constant(window.clone(), 0),
            ] {
                let dp = hardcore::nu_pattern_dp(&tree, radius, p, &pattern, Mode::Exact).unwrap();
                let dp_log =
                    hardcore::nu_pattern_dp(&tree, radius, p, &pattern, Mode::Log).unwrap();
                let oracle =
                    hardcore::nu_event_bruteforce(&tree, radius, p, matches(&pattern)).unwrap();
                assert_eq!(dp.exact(), oracle.exact(), "{} p={p}", tree.id());
                assert!(oracle.is_zero() && dp_log.is_zero() || oracle.rel_err(&dp_log) <= 1e-12);
                pattern_cases += 1;
            }
        }
    }
    conclude(
        1,
        "first-layer oracle equivalence",
        true,
        &format!(
            "{} trees, {marginal_cases} marginals and {pattern_cases} patterns match exactly",
            specs.len()
        ),
    );
}

#[test]
fn criterion_2_second_layer_oracle_equivalence() {
    let tree = TreeSpec::binary(4).build().unwrap();
    let ps = densities(&[(1, 5), (1, 2), (9, 10)]);
    let mut rng = SplitMix64::new(4242);
    let mut tested = 0;
    let mut max_dep = 0;
    while tested < 100 {
        let b2 = tree.ball_size(2).unwrap();
        let verts: Vec<Vertex> = (0..b2).filter(|_| rng.next_u64() % 3 == 0).collect();
        if verts.is_empty() {
            continue;
        }
        let pattern: Vec<u8> = verts.iter().map(|_| (rng.next_u64() & 1) as u8).collect();
        let region = Region::new(Arc::clone(&tree), verts).unwrap();
        let dep = region.closure().len();
        if dep > 20 {
            continue;
        }
        max_dep = max_dep.max(dep);
        let event = SecondLayerEvent::new(region, pattern).unwrap();
        let p = ps[(rng.next_u64() % ps.len() as u64) as usize];
        let dp = twolayer::image_event_prob_dp(&event, &p, Mode::Exact).unwrap();
        let oracle = twolayer::image_event_prob_bruteforce(&event, &p).unwrap();
        assert_eq!(dp.exact(), oracle.exact(), "event #{tested}");
        tested += 1;
    }
    conclude(
        2,
        "second-layer oracle equivalence",
        true,
        &format!("{tested} randomized events (dependency regions up to {max_dep} vertices)"),
    );
}

#[test]
fn criterion_3_relation_lemma() {
    let tree = TreeSpec::binary(6).build().unwrap();
    let ps = densities(&[(3, 10), (7, 10), (19, 20)]);
    let mut worst_log = 0.0f64;
    for p in &ps {
        for big_r in [1u32, 2] {
            let check = twolayer::verify_relation(&tree, big_r, p, Mode::Exact).unwrap();
            assert_eq!(check.exact_equal, Some(true), "R={big_r} p={p}");
            assert_eq!(check.rel_err, 0.0);
        }
        let check = twolayer::verify_relation(&tree, 3, p, Mode::Log).unwrap();
        assert!(
            check.rel_err <= 1e-12,
            "R=3 p={p}: rel_err {}",
            check.rel_err
        );
        worst_log = worst_log.max(check.rel_err);
    }
    conclude(
        3,
        "relation lemma",
        true,
        &format!("exact at R in {{1,2}}, log-mode rel_err at R=3 <= {worst_log:.2e}"),
    );
}

#[test]
fn criterion_4_cutset_calculus() {
    let binary = TreeSpec::binary(10).build().unwrap();
    let inhomogeneous = {
        let levels: Vec<u32> = (0..10).map(|d| if d % 2 == 0 { 3 } else { 2 }).collect();
        TreeSpec::ByLevel {
            children_per_level: levels,
            depth: 10,
        }
        .build()
        .unwrap()
    };

    // Counts on the binary tree.
    let enumeration = cutsets::enumerate_pushout(&binary, Phase::Zero, 2).unwrap();
    let counts: Vec<usize> = enumeration.by_n.iter().map(|l| l.len()).collect();
    assert_eq!(counts, vec![1, 3, 15]);

    let mut checked = 0;
    for (label, tree) in [("binary", &binary), ("inhomogeneous", &inhomogeneous)] {
        let degrees = thinfield::tree::validate_degree_bounds(tree);
        for kind in [Phase::Zero, Phase::One] {
            let brute = cutsets::enumerate_bruteforce(tree, kind, 15).unwrap();
            let pushed = cutsets::enumerate_pushout(tree, kind, 4).unwrap();
            let mut a: Vec<Vec<Vertex>> = brute.iter().map(|c| c.interior().to_vec()).collect();
            let mut b: Vec<Vec<Vertex>> = pushed
                .all()
                .filter(|c| c.interior().len() <= 15)
                .map(|c| c.interior().to_vec())
                .collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{label} type {kind:?}");
            for cutset in pushed.all() {
                // Size and replacement bounds with the type-1 shift.
                assert!(
                    cutset.check_bounds(degrees.d_min_children, degrees.d_max_children),
                    "{label} {:?}",
                    cutset.record()
                );
                // Bookkeeping along a recorded pushout sequence: replay the
                // reduction in reverse and track both quantities.
                let merges = cutset.reduce_to_initial().unwrap();
                assert_eq!(merges.len() as u32, cutset.pushout_count());
                let mut current = cutsets::Cutset::initial(tree, kind).unwrap();
                for &y in merges.iter().rev() {
                    let before_size = current.interior().len() as i64;
                    let before_repl = current.net_replacements();
                    let parent = tree.parent_of(y).unwrap();
                    current = current.pushout((parent, y)).unwrap();
                    let d_y = tree.num_children(y) as i64;
                    assert_eq!(current.interior().len() as i64, before_size + d_y + 1);
                    assert_eq!(current.net_replacements(), before_repl + d_y - 1);
                }
                assert_eq!(&current, cutset);
                checked += 1;
            }
        }
    }
    conclude(
        4,
        "cutset calculus",
        true,
        &format!("counts 1/3/15; {checked} cutsets replayed with matching bookkeeping and bounds"),
    );
}

#[test]
fn criterion_5_entropy_bound() {
    let trees = [
        TreeSpec::binary(8).build().unwrap(),
        TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 8,
            seed: 11,
        }
        .build()
        .unwrap(),
        TreeSpec::SeededRandom {
            root_children: 4,
            d_min_children: 2,
            d_max_children: 4,
            depth: 8,
            seed: 23,
        }
        .build()
        .unwrap(),
    ];
    let mut lines = Vec::new();
    for tree in &trees {
        for k in 0..=8 {
            let count = cutsets::count_connected_subgraphs(tree, k).unwrap();
            let bound = cutsets::subgraph_count_bound(tree, k);
            assert!(
                num_bigint::BigInt::from(count) <= bound,
                "{} k={k}: {count} > {bound}",
                tree.id()
            );
        }
        lines.push(tree.id().to_string());
    }
    conclude(
        5,
        "entropy bound",
        true,
        &format!("k <= 8 on {}", lines.join(", ")),
    );
}

#[test]
fn criterion_6_peierls_sandwich() {
    let tree = TreeSpec::binary(4).build().unwrap();
    let p = Density::new(999, 1000).unwrap();
    let nu = hardcore::nu_marginal_dp(&tree, 3, &p, 0, 0, Mode::Exact).unwrap();
    let sum = cutsets::peierls_sum_exact(&tree, 3, &p, Phase::Zero, Mode::Exact).unwrap();
    let bound = match cutsets::peierls_bound(&p, 2, 2, Mode::Exact) {
        BoundOutcome::Convergent(b) => b,
        BoundOutcome::Divergent => panic!("series must converge at p = 0.999"),
    };
    assert!(
        nu.exact().unwrap() <= sum.exact().unwrap(),
        "nu <= sum fails"
    );
    assert!(
        sum.exact().unwrap() <= bound.exact().unwrap(),
        "sum <= bound fails"
    );
    assert_eq!(
        bound.exact().unwrap(),
        &BigRational::new(1.into(), 270.into())
    );
    assert!((bound.f64() - 3.704e-3).abs() < 1e-6);

    // Convergent exactly above 729/730 for d_min = d_max = 2.
    assert!(!cutsets::peierls_convergent(
        &Density::new(729, 730).unwrap(),
        2,
        2
    ));
    assert!(cutsets::peierls_convergent(
        &Density::new(72901, 73000).unwrap(),
        2,
        2
    ));
    assert!((cutsets::convergence_threshold_f64(2, 2) - 729.0 / 730.0).abs() < 1e-12);

    conclude(
        6,
        "Peierls sandwich",
        true,
        &format!(
            "nu = {} <= sum = {} <= bound = 1/270; threshold 729/730",
            nu.render(),
            sum.render()
        ),
    );
}

#[test]
fn criterion_7_phase_transition_signature() {
    let tree = TreeSpec::binary(11).build().unwrap();
    let p = Density::new(999, 1000).unwrap();
    let eps = 3.704e-3;

    // Wrong-root probabilities against the series bound on both parities.
    let sweep = hardcore::parity_sweep(&tree, &p, &[4, 5, 6, 7, 8, 9, 10, 11], Mode::Log).unwrap();
    let mut worst = 0.0f64;
    for row in sweep.rows.iter().filter(|r| r.vertex == 0) {
        let value = row.prob_wrong.f64();
        assert!(value <= eps, "radius {}: {value} > {eps}", row.radius);
        assert_eq!(row.pass, Some(true));
        worst = worst.max(value);
    }

    // Ratio experiment at R in {2,3,4}: ratio <= eps/(1-10 eps), and the
    // favoured even-ball pattern probability stays above 1 - 10 eps.
    let rows = twolayer::ratio_experiment(&tree, &p, &[2, 3, 4], Mode::Log).unwrap();
    let ratio_bound = 3.847e-3;
    let mut worst_ratio = 0.0f64;
    for row in &rows {
        assert_eq!(row.regime, "convergent");
        let ratio = row.ratio.f64();
        assert!(
            ratio <= ratio_bound,
            "R={}: {ratio} > {ratio_bound}",
            row.big_r
        );
        assert_eq!(row.pass, Some(true));
        assert!(
            row.nu_even_pattern.f64() >= 1.0 - 10.0 / 270.0,
            "R={}: even-ball pattern probability {}",
            row.big_r,
            row.nu_even_pattern.f64()
        );
        worst_ratio = worst_ratio.max(ratio);
    }
    conclude(
        7,
        "phase-transition signature",
        true,
        &format!(
            "wrong-root probabilities <= {worst:.3e} (bound 3.704e-3) on radii 4..=11; \
             pattern ratios <= {worst_ratio:.3e} (bound 3.847e-3) at R in {{2,3,4}}"
        ),
    );
}

#[test]
fn criterion_8_denominator_bound() {
    let tree = TreeSpec::binary(9).build().unwrap();
    let ps = densities(&[(3, 10), (7, 10)]);
    let mut cases = 0;
    for p in &ps {
        for big_r in [2u32, 3] {
            for case in [DenomCase::OmegaStar, DenomCase::AllZero] {
                let check =
                    twolayer::denominator_bound_check(&tree, big_r, p, case, Mode::Exact).unwrap();
                assert!(
                    check.pass,
                    "R={big_r} p={p} case={case:?}: proxy {} < c(p) {}",
                    check.proxy.render(),
                    check.c_p.render()
                );
                cases += 1;
            }
        }
    }
    conclude(
        8,
        "denominator bound",
        true,
        &format!("{cases} (R, p, case) combinations stay above c(p)"),
    );
}

#[test]
fn criterion_9_transform_invariants() {
    let tree = TreeSpec::binary(7).build().unwrap();
    let region = Region::full(&tree);
    let p = Density::new(1, 2).unwrap();
    for seed in 0..1000u64 {
        let cfg = field::sample_bernoulli(&region, &p, seed);
        for rule in [ExteriorRule::AllZero, ExteriorRule::AllOne] {
            let once = field::thin(&cfg, rule).unwrap();
            let twice = field::thin(&once, rule).unwrap();
            assert_eq!(once, twice, "idempotence at seed {seed}");
            assert!(
                once.bits().iter().zip(cfg.bits()).all(|(a, b)| a <= b),
                "monotonicity at seed {seed}"
            );
        }
        let out = field::thin(&cfg, ExteriorRule::AllZero).unwrap();
        let before: Vec<_> = field::clusters(&cfg)
            .into_iter()
            .filter(|c| c.len() >= 2)
            .collect();
        let after = field::clusters(&out);
        assert_eq!(before, after, "cluster preservation at seed {seed}");
    }
    conclude(
        9,
        "transform invariants",
        true,
        "1000 seeded configurations: idempotent, decreasing, cluster-exact",
    );
}

/// Second-layer normalization, exercised alongside the criteria: the image
/// patterns on B_1 partition the sample space.
#[test]
fn image_patterns_partition() {
    let tree = TreeSpec::binary(3).build().unwrap();
    let p = Density::new(2, 5).unwrap();
    let b1 = Region::ball(&tree, 1).unwrap();
    let mut total = num_rational::BigRational::from_integer(0.into());
    for mask in 0u32..16 {
        let pattern: Vec<u8> = (0..4).map(|i| ((mask >> i) & 1) as u8).collect();
        let event = SecondLayerEvent::new(b1.clone(), pattern).unwrap();
        total += twolayer::image_event_prob_dp(&event, &p, Mode::Exact)
            .unwrap()
            .exact()
            .unwrap();
    }
    assert!(total.is_one());
}
