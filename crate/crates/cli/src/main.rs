//! Command-line driver.
//!
//! Exit codes: 0 when every asserted check passes, 1 when an invariant or
//! acceptance assertion fails, 2 on invalid input or exhausted budgets.
//! Diagnostics go to stderr, data to stdout or `--out`.

mod commands;
mod options;

use clap::{Parser, Subcommand};

use options::Common;

#[derive(Parser, Debug)]
#[command(
    name = "thinfield",
    about = "Exact solvers and experiments for the Bernoulli field on rooted trees under \
             isolated-site removal",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a tree from a spec and print its adjacency document.
    GenTree {
        #[command(flatten)]
        common: Common,
    },
    /// Sample a configuration, apply the removal transform, report both
    /// sides with cluster statistics.
    Thin {
        #[command(flatten)]
        common: Common,
        /// Exterior rule: mask, all_zero or all_one.
        #[arg(long, default_value = "all_zero")]
        exterior: String,
    },
    /// Marginal and pattern queries under the isolation-constrained measure.
    Nu {
        #[command(flatten)]
        common: Common,
        /// Query the marginal at this vertex.
        #[arg(long)]
        vertex: Option<u32>,
        /// Query the probability of the ground state of this phase...
        #[arg(long)]
        ground: Option<u8>,
        /// ...restricted to the ball of this radius.
        #[arg(long)]
        pattern_radius: Option<u32>,
    },
    /// Parity-selection sweep over radii: wrong-value probabilities on B_2.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Cutset enumeration and cross-verification.
    Cutsets {
        #[command(subcommand)]
        action: CutsetAction,
    },
    /// Peierls series bounds, convergence thresholds and exact finite sums.
    Peierls {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d_min: Option<u32>,
        #[arg(long)]
        d_max: Option<u32>,
        /// Also compute exact cutset sums on the balls given by --radius.
        #[arg(long)]
        exact: bool,
        /// Cutset type for the exact sums.
        #[arg(long, default_value = "0")]
        r#type: u8,
    },
    /// Verify the first/second-layer relation identity.
    Relation {
        #[command(flatten)]
        common: Common,
    },
    /// Odd/even-ball pattern-probability ratios against the series bound.
    Ratio {
        #[command(flatten)]
        common: Common,
    },
    /// Conditional-probability lower bound for the two B_2 observations.
    Denom {
        #[command(flatten)]
        common: Common,
        /// Which observation: star, zero or both.
        #[arg(long, default_value = "both")]
        which: String,
    },
    /// Run the invariant suites.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "small")]
        budget: String,
    },
}

#[derive(Subcommand, Debug)]
enum CutsetAction {
    /// Emit every cutset with pushout count up to --max-n, one JSON object
    /// per line.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0")]
        r#type: u8,
    },
    /// Cross-check the pushout closure against direct enumeration,
    /// bookkeeping replay and the size/replacement bounds.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenTree { common } => commands::gen_tree(common),
        Command::Thin { common, exterior } => commands::thin(common, exterior),
        Command::Nu {
            common,
            vertex,
            ground,
            pattern_radius,
        } => commands::nu(common, vertex, ground, pattern_radius),
        Command::Sweep { common } => commands::sweep(common),
        Command::Cutsets { action } => match action {
            CutsetAction::Enumerate { common, r#type } => {
                commands::cutsets_enumerate(common, r#type)
            }
            CutsetAction::Verify { common } => commands::cutsets_verify(common),
        },
        Command::Peierls {
            common,
            d_min,
            d_max,
            exact,
            r#type,
        } => commands::peierls(common, d_min, d_max, exact, r#type),
        Command::Relation { common } => commands::relation(common),
        Command::Ratio { common } => commands::ratio(common),
        Command::Denom { common, which } => commands::denom(common, which),
        Command::Selftest { common, budget } => commands::selftest(common, budget),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
