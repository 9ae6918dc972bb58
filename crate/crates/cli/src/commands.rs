//! Subcommand implementations.

use anyhow::{bail, Result};
use serde_json::json;

use thinfield::cutsets::{self, Cutset};
use thinfield::field::{self, ExteriorRule, Phase};
use thinfield::hardcore;
use thinfield::prob::Prob;
use thinfield::report::{fmt_prob, Report};
use thinfield::selftest::{self, Budget};
use thinfield::tree::{validate_degree_bounds, Region};
use thinfield::twolayer::{self, DenomCase};

use crate::options::{run_grid, Common, Format};

fn render_report(common: &Common, report: &Report) -> Result<String> {
    Ok(match common.format()? {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    })
}

fn opt_prob(p: &Option<Prob>) -> String {
    p.as_ref().map(fmt_prob).unwrap_or_default()
}

fn opt_pass(p: &Option<bool>) -> String {
    p.map(|b| b.to_string()).unwrap_or_default()
}

pub fn gen_tree(common: Common) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mut body = serde_json::to_string_pretty(&tree.to_adjacency_json())?;
    body.push('\n');
    common.emit(&body)?;
    Ok(0)
}

pub fn thin(common: Common, exterior: String) -> Result<i32> {
    let common = common.resolve()?;
    let rule = match exterior.as_str() {
        "mask" => ExteriorRule::Mask,
        "all_zero" => ExteriorRule::AllZero,
        "all_one" => ExteriorRule::AllOne,
        other => bail!("unknown exterior rule {other:?}"),
    };
    let tree = common.build_tree()?;
    let p = common.density()?;
    let before = field::sample_bernoulli(&Region::full(&tree), &p, common.seed());
    let after = field::thin(&before, rule)?;
    let histogram = |cfg: &field::Configuration| {
        let mut by_size = std::collections::BTreeMap::<usize, usize>::new();
        for cluster in field::clusters(cfg) {
            *by_size.entry(cluster.len()).or_default() += 1;
        }
        json!({
            "occupied": cfg.count_ones(),
            "clusters_by_size": by_size,
        })
    };
    let removed = before.count_ones() - after.count_ones();
    let doc = json!({
        "config": common.describe("thin", Some(tree.id())),
        "exterior": exterior,
        "before": before.to_json(),
        "after": after.to_json(),
        "stats_before": histogram(&before),
        "stats_after": histogram(&after),
        "removed_isolated": removed,
    });
    let mut body = serde_json::to_string_pretty(&doc)?;
    body.push('\n');
    common.emit(&body)?;
    Ok(0)
}

pub fn nu(
    common: Common,
    vertex: Option<u32>,
    ground: Option<u8>,
    pattern_radius: Option<u32>,
) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mode = common.mode()?;
    let grid: Vec<(thinfield::prob::Density, u32)> = {
        let ps = common.density_grid()?;
        let radii = common.radii()?;
        ps.into_iter()
            .flat_map(|p| radii.iter().map(move |&r| (p, r)))
            .collect()
    };
    let jobs = common.jobs.unwrap_or(1);
    let report = if let Some(g) = ground {
        let phase = Phase::from_index(g)?;
        let pr = pattern_radius.unwrap_or(2);
        let rows = run_grid(grid, jobs, |(p, radius)| {
            let window = Region::ball(&tree, pr.min(*radius))?;
            let pattern = field::ground_state(&window, phase);
            let prob = hardcore::nu_pattern_dp(&tree, *radius, p, &pattern, mode)?;
            Ok(vec![
                tree.id().to_string(),
                p.to_string(),
                radius.to_string(),
                g.to_string(),
                pr.min(*radius).to_string(),
                fmt_prob(&prob),
            ])
        })?;
        Report::new(
            common.describe("nu", Some(tree.id())),
            &["tree_id", "p", "radius", "ground", "pattern_radius", "prob"],
            rows,
        )
    } else {
        let v = vertex.unwrap_or(0);
        let rows = run_grid(grid, jobs, |(p, radius)| {
            let zero = hardcore::nu_marginal_dp(&tree, *radius, p, v, 0, mode)?;
            let one = hardcore::nu_marginal_dp(&tree, *radius, p, v, 1, mode)?;
            Ok(vec![
                tree.id().to_string(),
                p.to_string(),
                radius.to_string(),
                v.to_string(),
                fmt_prob(&zero),
                fmt_prob(&one),
            ])
        })?;
        Report::new(
            common.describe("nu", Some(tree.id())),
            &["tree_id", "p", "radius", "vertex", "prob_zero", "prob_one"],
            rows,
        )
    };
    common.emit(&render_report(&common, &report)?)?;
    Ok(0)
}

pub fn sweep(common: Common) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mode = common.mode()?;
    let radii = common.radii()?;
    let jobs = common.jobs.unwrap_or(1);
    let per_density = run_grid(common.density_grid()?, jobs, |p| {
        Ok(hardcore::parity_sweep(&tree, p, &radii, mode)?)
    })?;
    let mut rows = Vec::new();
    let mut asserted_failure = false;
    for sweep in &per_density {
        for row in &sweep.rows {
            // Rows at radius >= 4 carry the assertion; smaller radii are
            // reported only (the bound quantifies over large balls).
            if row.radius >= 4 && row.pass == Some(false) {
                asserted_failure = true;
            }
            rows.push(vec![
                row.tree_id.clone(),
                row.p.to_string(),
                row.radius.to_string(),
                row.vertex.to_string(),
                fmt_prob(&row.prob_wrong),
                opt_prob(&row.peierls_bound),
                opt_pass(&row.pass),
            ]);
        }
    }
    let report = Report::new(
        common.describe("sweep", Some(tree.id())),
        &[
            "tree_id",
            "p",
            "radius",
            "vertex",
            "prob_wrong",
            "peierls_bound",
            "pass",
        ],
        rows,
    );
    common.emit(&render_report(&common, &report)?)?;
    Ok(if asserted_failure { 1 } else { 0 })
}

pub fn cutsets_enumerate(common: Common, kind: u8) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let kind = Phase::from_index(kind)?;
    let max_n = common.max_n.unwrap_or(2);
    let enumeration = cutsets::enumerate_pushout(&tree, kind, max_n)?;
    let mut body = String::new();
    for cutset in enumeration.all() {
        body.push_str(&serde_json::to_string(&cutset.record())?);
        body.push('\n');
    }
    common.emit(&body)?;
    Ok(0)
}

pub fn cutsets_verify(common: Common) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let max_interior = common.max_interior.unwrap_or(12) as usize;
    let max_n = common.max_n.unwrap_or(4);
    let degrees = validate_degree_bounds(&tree);
    let mut total = 0usize;
    for kind in [Phase::Zero, Phase::One] {
        let brute = cutsets::enumerate_bruteforce(&tree, kind, max_interior)?;
        let pushed = cutsets::enumerate_pushout(&tree, kind, max_n)?;
        let mut a: Vec<Vec<u32>> = brute.iter().map(|c| c.interior().to_vec()).collect();
        let mut b: Vec<Vec<u32>> = pushed
            .all()
            .filter(|c| c.interior().len() <= max_interior)
            .map(|c| c.interior().to_vec())
            .collect();
        a.sort();
        b.sort();
        if a != b {
            eprintln!(
                "cutsets verify: type {kind:?} enumeration mismatch ({} direct vs {} pushout)",
                a.len(),
                b.len()
            );
            return Ok(1);
        }
        for cutset in pushed.all() {
            if !cutset.check_bounds(degrees.d_min_children, degrees.d_max_children) {
                eprintln!("cutsets verify: bounds fail for {:?}", cutset.record());
                return Ok(1);
            }
            let merges = cutset.reduce_to_initial()?;
            if merges.len() as u32 != cutset.pushout_count() {
                eprintln!(
                    "cutsets verify: reduction length mismatch for {:?}",
                    cutset.record()
                );
                return Ok(1);
            }
            let mut replayed = Cutset::initial(&tree, kind)?;
            for &y in merges.iter().rev() {
                let parent = tree
                    .parent_of(y)
                    .expect("merge vertices are below the root");
                replayed = replayed.pushout((parent, y))?;
            }
            if &replayed != cutset {
                eprintln!("cutsets verify: replay mismatch for {:?}", cutset.record());
                return Ok(1);
            }
            total += 1;
        }
    }
    println!(
        "cutsets verify: ok, {total} cutsets on {} (interiors <= {max_interior}, pushouts <= {max_n})",
        tree.id()
    );
    Ok(0)
}

pub fn peierls(
    common: Common,
    d_min: Option<u32>,
    d_max: Option<u32>,
    exact: bool,
    kind: u8,
) -> Result<i32> {
    let common = common.resolve()?;
    let mode = common.mode()?;
    let tree = common.build_tree()?;
    let degrees = validate_degree_bounds(&tree);
    let d_min = d_min.unwrap_or(degrees.d_min_children);
    let d_max = d_max.unwrap_or(degrees.d_max_children);
    let jobs = common.jobs.unwrap_or(1);
    let report = if exact {
        let kind = Phase::from_index(kind)?;
        let grid: Vec<(thinfield::prob::Density, u32)> = {
            let ps = common.density_grid()?;
            let radii = common.radii()?;
            ps.into_iter()
                .flat_map(|p| radii.iter().map(move |&r| (p, r)))
                .collect()
        };
        let rows = run_grid(grid, jobs, |(p, radius)| {
            let sum = cutsets::peierls_sum_exact(&tree, *radius, p, kind, mode)?;
            let outcome = cutsets::peierls_bound(p, d_min, d_max, mode);
            Ok(vec![
                tree.id().to_string(),
                p.to_string(),
                kind.index().to_string(),
                radius.to_string(),
                fmt_prob(&sum),
                opt_prob(&outcome.value().cloned().map(Some).unwrap_or(None)),
                outcome.value().is_some().to_string(),
            ])
        })?;
        Report::new(
            common.describe("peierls", Some(tree.id())),
            &[
                "tree_id",
                "p",
                "type",
                "radius",
                "exact_sum",
                "bound",
                "convergent",
            ],
            rows,
        )
    } else {
        let rows = run_grid(common.density_grid()?, jobs, |p| {
            let outcome = cutsets::peierls_bound(p, d_min, d_max, mode);
            Ok(vec![
                p.to_string(),
                d_min.to_string(),
                d_max.to_string(),
                outcome.value().map(fmt_prob).unwrap_or_default(),
                outcome.value().is_some().to_string(),
            ])
        })?;
        Report::new(
            common.describe("peierls", None),
            &["p", "d_min", "d_max", "bound", "convergent"],
            rows,
        )
    };
    common.emit(&render_report(&common, &report)?)?;
    Ok(0)
}

pub fn relation(common: Common) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mode = common.mode()?;
    let jobs = common.jobs.unwrap_or(1);
    let grid: Vec<(thinfield::prob::Density, u32)> = {
        let ps = common.density_grid()?;
        let radii = common.radii()?;
        ps.into_iter()
            .flat_map(|p| radii.iter().map(move |&r| (p, r)))
            .collect()
    };
    let checks = run_grid(grid, jobs, |(p, big_r)| {
        Ok(twolayer::verify_relation(&tree, *big_r, p, mode)?)
    })?;
    let mut failed = false;
    for check in &checks {
        let ok = match check.exact_equal {
            Some(equal) => equal,
            None => check.rel_err <= 1e-9,
        };
        failed |= !ok;
    }
    // The natural shape for this check is JSON; CSV stays available.
    let format = if common.format.is_none() {
        Format::Json
    } else {
        common.format()?
    };
    let body = match format {
        Format::Json => {
            let items: Vec<serde_json::Value> = checks
                .iter()
                .map(|c| {
                    json!({
                        "R": c.big_r,
                        "p": c.p.to_string(),
                        "lhs": fmt_prob(&c.lhs),
                        "rhs": fmt_prob(&c.rhs),
                        "rel_err": c.rel_err,
                    })
                })
                .collect();
            let doc = json!({
                "config": common.describe("relation", Some(tree.id())),
                "checks": items,
            });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let rows = checks
                .iter()
                .map(|c| {
                    vec![
                        c.big_r.to_string(),
                        c.p.to_string(),
                        fmt_prob(&c.lhs),
                        fmt_prob(&c.rhs),
                        format!("{:e}", c.rel_err),
                    ]
                })
                .collect();
            Report::new(
                common.describe("relation", Some(tree.id())),
                &["R", "p", "lhs", "rhs", "rel_err"],
                rows,
            )
            .to_csv()
        }
    };
    common.emit(&body)?;
    Ok(if failed { 1 } else { 0 })
}

pub fn ratio(common: Common) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mode = common.mode()?;
    let radii = common.radii()?;
    let jobs = common.jobs.unwrap_or(1);
    let per_density = run_grid(common.density_grid()?, jobs, |p| {
        Ok(twolayer::ratio_experiment(&tree, p, &radii, mode)?)
    })?;
    let mut rows = Vec::new();
    let mut failed = false;
    for batch in &per_density {
        for row in batch {
            failed |= row.pass == Some(false);
            rows.push(vec![
                row.tree_id.clone(),
                row.p.to_string(),
                row.big_r.to_string(),
                fmt_prob(&row.nu_odd_pattern),
                fmt_prob(&row.nu_even_pattern),
                fmt_prob(&row.ratio),
                opt_prob(&row.bound),
                row.regime.to_string(),
                opt_pass(&row.pass),
            ]);
        }
    }
    let report = Report::new(
        common.describe("ratio", Some(tree.id())),
        &[
            "tree_id",
            "p",
            "R",
            "nu_odd_pattern",
            "nu_even_pattern",
            "ratio",
            "bound",
            "regime",
            "pass",
        ],
        rows,
    );
    common.emit(&render_report(&common, &report)?)?;
    Ok(if failed { 1 } else { 0 })
}

pub fn denom(common: Common, which: String) -> Result<i32> {
    let common = common.resolve()?;
    let tree = common.build_tree()?;
    let mode = common.mode()?;
    let cases: Vec<DenomCase> = match which.as_str() {
        "star" => vec![DenomCase::OmegaStar],
        "zero" => vec![DenomCase::AllZero],
        "both" => vec![DenomCase::OmegaStar, DenomCase::AllZero],
        other => bail!("unknown case {other:?} (expected star, zero or both)"),
    };
    let grid: Vec<(thinfield::prob::Density, u32, DenomCase)> = {
        let ps = common.density_grid()?;
        let radii = common.radii()?;
        ps.into_iter()
            .flat_map(|p| {
                let cases = cases.clone();
                radii
                    .iter()
                    .flat_map(move |&r| cases.clone().into_iter().map(move |c| (p, r, c)))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let jobs = common.jobs.unwrap_or(1);
    let checks = run_grid(grid, jobs, |(p, big_r, case)| {
        Ok(twolayer::denominator_bound_check(
            &tree, *big_r, p, *case, mode,
        )?)
    })?;
    let mut failed = false;
    let rows = checks
        .iter()
        .map(|c| {
            failed |= !c.pass;
            vec![
                tree.id().to_string(),
                c.p.to_string(),
                c.big_r.to_string(),
                match c.case {
                    DenomCase::OmegaStar => "star".to_string(),
                    DenomCase::AllZero => "zero".to_string(),
                },
                fmt_prob(&c.proxy),
                fmt_prob(&c.c_p),
                c.pass.to_string(),
            ]
        })
        .collect();
    let report = Report::new(
        common.describe("denom", Some(tree.id())),
        &["tree_id", "p", "R", "case", "proxy", "c_p", "pass"],
        rows,
    );
    common.emit(&render_report(&common, &report)?)?;
    Ok(if failed { 1 } else { 0 })
}

pub fn selftest(common: Common, budget: String) -> Result<i32> {
    let common = common.resolve()?;
    let budget = match budget.as_str() {
        "small" => Budget::Small,
        "full" => Budget::Full,
        other => bail!("unknown budget {other:?} (expected small or full)"),
    };
    let _ = &common;
    let checks = selftest::run(budget);
    let mut failed = false;
    for check in &checks {
        println!(
            "{}: {} ({})",
            check.name,
            if check.pass { "PASS" } else { "FAIL" },
            check.detail
        );
        failed |= !check.pass;
    }
    Ok(if failed { 1 } else { 0 })
}
