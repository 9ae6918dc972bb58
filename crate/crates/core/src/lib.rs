//! Exact computation and simulation for the Bernoulli field on bounded-degree
//! rooted trees under the transform that removes isolated occupied sites.
//!
//! The crate is organised around the two layers of the model:
//!
//! * [`tree`] builds finite truncations of rooted trees (regular, by-level or
//!   seeded-random child counts) with BFS indexing, balls and boundaries.
//! * [`field`] holds 0/1 spin configurations, Bernoulli sampling, the
//!   isolated-site removal transform, alternating ground states, Bernoulli
//!   weights and cluster decompositions.
//! * [`hardcore`] computes the first-layer measure conditioned on isolation
//!   inside a ball with fully occupied exterior (a hardcore model), exactly,
//!   by tree message passing or by brute-force enumeration.
//! * [`cutsets`] implements the type-changing-cutset calculus: initial
//!   cutsets, pushout and merging, enumeration, replacement counting and the
//!   Peierls entropy/energy bound.
//! * [`twolayer`] computes image-measure (second-layer) event probabilities,
//!   the first/second-layer relation identity, the odd/even-ball ratio
//!   experiment and the conditional-probability lower bound.
//!
//! Probabilities are carried either as exact arbitrary-precision rationals or
//! as log-domain floats, selected per call via [`prob::Mode`].

pub mod cutsets;
pub mod error;
pub mod field;
pub mod hardcore;
pub mod prob;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod tree;
pub mod twolayer;

pub use error::{Error, Result};
pub use field::{Configuration, ExteriorRule, Phase};
pub use prob::{Density, Mode, Prob};
pub use tree::{Region, RootedTree, TreeSpec};
