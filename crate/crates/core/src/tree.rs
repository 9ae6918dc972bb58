//! Finite truncations of bounded-degree rooted trees.
//!
//! Trees are stored in breadth-first order with the root at index 0, so
//! depth is non-decreasing in the index, a ball around the root is a prefix
//! of the index range, and the children of a vertex form a contiguous index
//! range. All values are immutable after construction and safe to share.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub type Vertex = u32;

/// Sentinel parent index of the root.
pub const NO_PARENT: Vertex = Vertex::MAX;

/// Declarative description of a tree truncation. Identical specs build
/// identical trees, vertex by vertex; the seeded kind draws child counts
/// from a splitmix64 stream over the breadth-first vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeSpec {
    /// Fixed child count for the root and another for every other vertex.
    Regular {
        root_children: u32,
        children: u32,
        depth: u32,
    },
    /// One child count per depth level; entry `d` applies to every vertex at
    /// depth `d`, so the root count is `children_per_level[0]`. The list
    /// length must equal `depth`.
    ByLevel {
        children_per_level: Vec<u32>,
        depth: u32,
    },
    /// Explicit root count; every other vertex draws its child count
    /// uniformly from `[d_min_children, d_max_children]`.
    SeededRandom {
        root_children: u32,
        d_min_children: u32,
        d_max_children: u32,
        depth: u32,
        seed: u64,
    },
}

impl TreeSpec {
    pub fn regular(root_children: u32, children: u32, depth: u32) -> Self {
        TreeSpec::Regular {
            root_children,
            children,
            depth,
        }
    }

    /// The root-3, children-2 tree used throughout the experiments.
    pub fn binary(depth: u32) -> Self {
        TreeSpec::regular(3, 2, depth)
    }

    pub fn depth(&self) -> u32 {
        match self {
            TreeSpec::Regular { depth, .. }
            | TreeSpec::ByLevel { depth, .. }
            | TreeSpec::SeededRandom { depth, .. } => *depth,
        }
    }

    /// Short deterministic identifier used in report rows.
    pub fn id(&self) -> String {
        match self {
            TreeSpec::Regular {
                root_children,
                children,
                depth,
            } => {
                format!("regular-{root_children}x{children}-d{depth}")
            }
            TreeSpec::ByLevel {
                children_per_level,
                depth,
            } => {
                let levels: Vec<String> =
                    children_per_level.iter().map(|c| c.to_string()).collect();
                format!("bylevel-{}-d{depth}", levels.join("."))
            }
            TreeSpec::SeededRandom {
                root_children,
                d_min_children,
                d_max_children,
                depth,
                seed,
            } => {
                format!("rand-{root_children}r{d_min_children}to{d_max_children}-d{depth}-s{seed}")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            TreeSpec::Regular {
                root_children,
                children,
                depth,
            } => {
                if *root_children == 0 {
                    return fail("root_children must be positive".into());
                }
                if *children == 0 && *depth > 1 {
                    return fail("children must be positive".into());
                }
            }
            TreeSpec::ByLevel {
                children_per_level,
                depth,
            } => {
                if children_per_level.len() != *depth as usize {
                    return fail(format!(
                        "children_per_level has {} entries, expected depth {}",
                        children_per_level.len(),
                        depth
                    ));
                }
                if children_per_level.contains(&0) {
                    return fail("children_per_level entries must be positive".into());
                }
            }
            TreeSpec::SeededRandom {
                root_children,
                d_min_children,
                d_max_children,
                depth,
                ..
            } => {
                if *root_children == 0 {
                    return fail("root_children must be positive".into());
                }
                if *d_min_children == 0 {
                    return fail("d_min_children must be positive".into());
                }
                if d_min_children > d_max_children {
                    return fail(format!(
                        "d_min_children {} exceeds d_max_children {}",
                        d_min_children, d_max_children
                    ));
                }
                let _ = depth;
            }
        }
        Ok(())
    }

    /// Builds the truncation described by this spec. Deterministic.
    pub fn build(&self) -> Result<Arc<RootedTree>> {
        self.validate()?;
        let depth = self.depth();
        let mut rng = match self {
            TreeSpec::SeededRandom { seed, .. } => Some(SplitMix64::new(*seed)),
            _ => None,
        };
        let child_count = |v: Vertex, d: u32, rng: &mut Option<SplitMix64>| -> u32 {
            match self {
                TreeSpec::Regular {
                    root_children,
                    children,
                    ..
                } => {
                    if v == 0 {
                        *root_children
                    } else {
                        *children
                    }
                }
                TreeSpec::ByLevel {
                    children_per_level, ..
                } => children_per_level[d as usize],
                TreeSpec::SeededRandom {
                    root_children,
                    d_min_children,
                    d_max_children,
                    ..
                } => {
                    if v == 0 {
                        *root_children
                    } else {
                        rng.as_mut()
                            .unwrap()
                            .next_in_range(*d_min_children, *d_max_children)
                    }
                }
            }
        };

        let mut parent: Vec<Vertex> = vec![NO_PARENT];
        let mut depth_of: Vec<u32> = vec![0];
        let mut child_start: Vec<Vertex> = vec![1];
        let mut layer_start: Vec<Vertex> = vec![0];
        let mut v: usize = 0;
        // Vertices are visited in index order, which is breadth-first order;
        // children are appended to the end, so child indices stay contiguous.
        while v < parent.len() {
            let d = depth_of[v];
            if d < depth {
                let c = child_count(v as Vertex, d, &mut rng);
                for _ in 0..c {
                    parent.push(v as Vertex);
                    depth_of.push(d + 1);
                }
            }
            child_start.push(parent.len() as Vertex);
            if v + 1 < parent.len() && depth_of[v + 1] > d {
                layer_start.push((v + 1) as Vertex);
            }
            v += 1;
        }
        layer_start.push(parent.len() as Vertex);
        debug_assert_eq!(layer_start.len(), depth as usize + 2);

        Ok(Arc::new(RootedTree {
            id: self.id(),
            parent,
            depth: depth_of,
            child_start,
            layer_start,
            max_depth: depth,
        }))
    }
}

/// A finite truncation of a rooted tree in BFS order.
#[derive(Debug)]
pub struct RootedTree {
    id: String,
    parent: Vec<Vertex>,
    depth: Vec<u32>,
    /// children of v occupy indices child_start[v]..child_start[v+1].
    child_start: Vec<Vertex>,
    /// vertices at depth d occupy indices layer_start[d]..layer_start[d+1].
    layer_start: Vec<Vertex>,
    max_depth: u32,
}

impl PartialEq for RootedTree {
    fn eq(&self, other: &Self) -> bool {
        self.parent == other.parent && self.depth == other.depth
    }
}

impl RootedTree {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> u32 {
        self.parent.len() as u32
    }

    /// Stored truncation depth.
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn depth_of(&self, v: Vertex) -> u32 {
        self.depth[v as usize]
    }

    pub fn parent_of(&self, v: Vertex) -> Option<Vertex> {
        if v == 0 {
            None
        } else {
            Some(self.parent[v as usize])
        }
    }

    /// Children as a contiguous index range.
    pub fn children(&self, v: Vertex) -> std::ops::Range<Vertex> {
        self.child_start[v as usize]..self.child_start[v as usize + 1]
    }

    pub fn num_children(&self, v: Vertex) -> u32 {
        self.child_start[v as usize + 1] - self.child_start[v as usize]
    }

    /// Parent (if any) followed by the stored children.
    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.parent_of(v).into_iter().chain(self.children(v))
    }

    /// Number of vertices with depth <= r.
    pub fn ball_size(&self, r: u32) -> Result<u32> {
        if r > self.max_depth {
            return Err(Error::RadiusExceedsDepth {
                radius: r,
                depth: self.max_depth,
            });
        }
        Ok(self.layer_start[r as usize + 1])
    }

    /// Vertices at exactly depth d.
    pub fn layer(&self, d: u32) -> Result<std::ops::Range<Vertex>> {
        if d > self.max_depth {
            return Err(Error::RadiusExceedsDepth {
                radius: d,
                depth: self.max_depth,
            });
        }
        Ok(self.layer_start[d as usize]..self.layer_start[d as usize + 1])
    }

    /// Largest stored degree: the root's child count or 1 + the largest
    /// child count among internal non-root vertices, whichever is bigger.
    /// Equals d_max + 1 on trees conforming to the bounded-degree regime.
    pub fn max_degree(&self) -> u32 {
        let report = validate_degree_bounds(self);
        let non_root = if report.has_internal_non_root() {
            report.d_max_children + 1
        } else {
            1
        };
        report.root_children.max(non_root)
    }

    /// Export as an adjacency document: `{"n":...,"parent":[...],"depth":[...]}`
    /// with `null` as the root's parent.
    pub fn to_adjacency_json(&self) -> serde_json::Value {
        let parent: Vec<Option<Vertex>> = (0..self.n()).map(|v| self.parent_of(v)).collect();
        serde_json::json!({
            "n": self.n(),
            "parent": parent,
            "depth": self.depth,
        })
    }

    fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v >= self.n() {
            return Err(Error::OutsideTree {
                vertex: v,
                size: self.n(),
            });
        }
        Ok(())
    }
}

/// A sorted set of vertices of one tree.
#[derive(Clone, Debug)]
pub struct Region {
    tree: Arc<RootedTree>,
    verts: Vec<Vertex>,
}

impl PartialEq for Region {
    /// Vertex-set equality; callers compare regions of structurally equal trees.
    fn eq(&self, other: &Self) -> bool {
        self.verts == other.verts
    }
}

impl Region {
    pub fn new(tree: Arc<RootedTree>, mut verts: Vec<Vertex>) -> Result<Self> {
        verts.sort_unstable();
        verts.dedup();
        if let Some(&last) = verts.last() {
            tree.check_vertex(last)?;
        }
        Ok(Region { tree, verts })
    }

    /// The ball B_r: all vertices with depth <= r.
    pub fn ball(tree: &Arc<RootedTree>, r: u32) -> Result<Self> {
        let size = tree.ball_size(r)?;
        Ok(Region {
            tree: Arc::clone(tree),
            verts: (0..size).collect(),
        })
    }

    /// The annulus B_outer \ B_inner.
    pub fn annulus(tree: &Arc<RootedTree>, inner: u32, outer: u32) -> Result<Self> {
        let lo = tree.ball_size(inner)?;
        let hi = tree.ball_size(outer)?;
        Ok(Region {
            tree: Arc::clone(tree),
            verts: (lo..hi).collect(),
        })
    }

    pub fn full(tree: &Arc<RootedTree>) -> Self {
        Region {
            tree: Arc::clone(tree),
            verts: (0..tree.n()).collect(),
        }
    }

    pub fn empty(tree: &Arc<RootedTree>) -> Self {
        Region {
            tree: Arc::clone(tree),
            verts: Vec::new(),
        }
    }

    pub fn tree(&self) -> &Arc<RootedTree> {
        &self.tree
    }

    pub fn verts(&self) -> &[Vertex] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.verts.binary_search(&v).is_ok()
    }

    pub fn position_of(&self, v: Vertex) -> Option<usize> {
        self.verts.binary_search(&v).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.verts.iter().copied()
    }

    /// Radius r if this region is exactly the ball B_r.
    pub fn as_ball(&self) -> Option<u32> {
        let n = self.verts.len() as Vertex;
        if self
            .verts
            .iter()
            .enumerate()
            .any(|(i, &v)| v != i as Vertex)
        {
            return None;
        }
        (0..=self.tree.max_depth()).find(|&r| self.tree.layer_start[r as usize + 1] == n)
    }

    /// Exterior vertices of the stored tree adjacent to the region.
    pub fn boundary(&self) -> Region {
        let mut out: Vec<Vertex> = Vec::new();
        for &v in &self.verts {
            for u in self.tree.neighbors(v) {
                if !self.contains(u) {
                    out.push(u);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Region {
            tree: Arc::clone(&self.tree),
            verts: out,
        }
    }

    /// Region together with its boundary.
    pub fn closure(&self) -> Region {
        let mut verts = self.verts.clone();
        verts.extend(self.boundary().verts);
        verts.sort_unstable();
        Region {
            tree: Arc::clone(&self.tree),
            verts,
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut verts = self.verts.clone();
        verts.extend_from_slice(&other.verts);
        verts.sort_unstable();
        verts.dedup();
        Region {
            tree: Arc::clone(&self.tree),
            verts,
        }
    }

    pub fn minus(&self, other: &Region) -> Region {
        let verts = self
            .verts
            .iter()
            .copied()
            .filter(|&v| !other.contains(v))
            .collect();
        Region {
            tree: Arc::clone(&self.tree),
            verts,
        }
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.verts.iter().all(|&v| other.contains(v))
    }
}

/// Result of scanning the stored child counts against the bounded-degree
/// regime (root with at least 3 children, every other internal vertex with
/// at least 2). Vertices at the truncation depth are excluded: their child
/// counts are not stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeReport {
    pub root_children: u32,
    /// Minimum child count over internal non-root vertices; 0 if none exist.
    pub d_min_children: u32,
    /// Maximum child count over internal non-root vertices; 0 if none exist.
    pub d_max_children: u32,
    pub conforms: bool,
}

impl DegreeReport {
    pub fn has_internal_non_root(&self) -> bool {
        self.d_max_children > 0
    }
}

/// Scans internal vertices (depth < stored depth) and reports the observed
/// non-root child-count range plus whether the bounded-degree regime holds
/// on the stored part of the tree.
pub fn validate_degree_bounds(tree: &RootedTree) -> DegreeReport {
    let root_children = tree.num_children(0);
    let mut d_min = u32::MAX;
    let mut d_max = 0;
    for v in 1..tree.n() {
        if tree.depth_of(v) < tree.max_depth() {
            let c = tree.num_children(v);
            d_min = d_min.min(c);
            d_max = d_max.max(c);
        }
    }
    if d_max == 0 {
        d_min = 0;
    }
    let conforms = tree.max_depth() >= 1 && root_children >= 3 && (d_max == 0 || d_min >= 2);
    DegreeReport {
        root_children,
        d_min_children: d_min,
        d_max_children: d_max,
        conforms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_counts() {
        let t = TreeSpec::binary(2).build().unwrap();
        assert_eq!(t.n(), 10);
        assert_eq!(t.max_depth(), 2);
        assert_eq!(t.num_children(0), 3);
        assert_eq!(t.num_children(1), 2);
        // |V| = |E| + 1 by counting parent links.
        let edges = (1..t.n()).filter(|&v| t.parent_of(v).is_some()).count();
        assert_eq!(t.n() as usize, edges + 1);
    }

    #[test]
    fn single_vertex_tree() {
        let t = TreeSpec::binary(0).build().unwrap();
        assert_eq!(t.n(), 1);
        assert_eq!(t.max_depth(), 0);
        assert_eq!(t.num_children(0), 0);
        assert_eq!(Region::ball(&t, 0).unwrap().len(), 1);
    }

    #[test]
    fn seeded_random_is_deterministic() {
        let spec = TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 3,
            seed: 7,
        };
        let a = spec.build().unwrap();
        let b = spec.build().unwrap();
        assert_eq!(*a, *b);
        let other = TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 3,
            seed: 8,
        };
        // Different seed produces a different tree with overwhelming probability.
        assert_ne!(*a, *other.build().unwrap());
    }

    #[test]
    fn seeded_random_respects_range() {
        let spec = TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 4,
            depth: 4,
            seed: 99,
        };
        let t = spec.build().unwrap();
        let report = validate_degree_bounds(&t);
        assert!(report.d_min_children >= 2);
        assert!(report.d_max_children <= 4);
        assert!(report.conforms);
    }

    #[test]
    fn ball_sizes_on_binary() {
        let t = TreeSpec::binary(5).build().unwrap();
        assert_eq!(Region::ball(&t, 0).unwrap().len(), 1);
        assert_eq!(Region::ball(&t, 2).unwrap().len(), 10);
        // 1+3+6+12+24+48
        assert_eq!(Region::ball(&t, 5).unwrap().len(), 94);
        assert!(Region::ball(&t, 6).is_err());
    }

    #[test]
    fn boundary_of_balls() {
        let t = TreeSpec::binary(3).build().unwrap();
        let b0 = Region::ball(&t, 0).unwrap();
        assert_eq!(b0.boundary().verts(), &[1, 2, 3]);
        let b1 = Region::ball(&t, 1).unwrap();
        assert_eq!(b1.boundary().len(), 6);
        let full = Region::full(&t);
        assert!(full.boundary().is_empty());
    }

    #[test]
    fn boundary_is_next_shell() {
        let t = TreeSpec::binary(4).build().unwrap();
        for r in 0..4 {
            let inner = Region::ball(&t, r).unwrap();
            let outer = Region::ball(&t, r + 1).unwrap();
            assert_eq!(inner.boundary(), outer.minus(&inner));
            assert!(inner.is_subset_of(&outer));
        }
    }

    #[test]
    fn bfs_index_monotone_in_depth() {
        let spec = TreeSpec::SeededRandom {
            root_children: 4,
            d_min_children: 2,
            d_max_children: 3,
            depth: 4,
            seed: 5,
        };
        let t = spec.build().unwrap();
        for v in 1..t.n() {
            assert!(t.depth_of(v) >= t.depth_of(v - 1));
            assert_eq!(t.depth_of(v), t.depth_of(t.parent_of(v).unwrap()) + 1);
        }
        for v in 0..t.n() {
            for c in t.children(v) {
                assert!(c > v);
            }
        }
    }

    #[test]
    fn degree_report_examples() {
        let binary = TreeSpec::binary(4).build().unwrap();
        let r = validate_degree_bounds(&binary);
        assert_eq!(
            (r.d_min_children, r.d_max_children, r.conforms),
            (2, 2, true)
        );

        let path = TreeSpec::regular(1, 1, 4).build().unwrap();
        let r = validate_degree_bounds(&path);
        assert_eq!(
            (r.d_min_children, r.d_max_children, r.conforms),
            (1, 1, false)
        );
    }

    #[test]
    fn by_level_tree() {
        let spec = TreeSpec::ByLevel {
            children_per_level: vec![3, 2, 3],
            depth: 3,
        };
        let t = spec.build().unwrap();
        assert_eq!(t.n(), 1 + 3 + 6 + 18);
        assert_eq!(t.num_children(0), 3);
        assert_eq!(t.num_children(1), 2);
        assert_eq!(t.num_children(4), 3);
    }

    #[test]
    fn invalid_specs() {
        assert!(TreeSpec::ByLevel {
            children_per_level: vec![3, 2],
            depth: 3
        }
        .build()
        .is_err());
        assert!(TreeSpec::ByLevel {
            children_per_level: vec![3, 0],
            depth: 2
        }
        .build()
        .is_err());
        assert!(TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 3,
            d_max_children: 2,
            depth: 2,
            seed: 0
        }
        .build()
        .is_err());
        assert!(TreeSpec::Regular {
            root_children: 0,
            children: 2,
            depth: 2
        }
        .build()
        .is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = TreeSpec::SeededRandom {
            root_children: 3,
            d_min_children: 2,
            d_max_children: 3,
            depth: 3,
            seed: 7,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"seeded_random\""));
        assert!(text.contains("\"d_min_children\":2"));
        let back: TreeSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn adjacency_export_shape() {
        let t = TreeSpec::binary(1).build().unwrap();
        let doc = t.to_adjacency_json();
        assert_eq!(doc["n"], 4);
        assert_eq!(doc["parent"][0], serde_json::Value::Null);
        assert_eq!(doc["parent"][1], 0);
        assert_eq!(doc["depth"][3], 1);
    }

    #[test]
    fn region_as_ball_detection() {
        let t = TreeSpec::binary(3).build().unwrap();
        assert_eq!(Region::ball(&t, 2).unwrap().as_ball(), Some(2));
        let not_ball = Region::new(Arc::clone(&t), vec![0, 2]).unwrap();
        assert_eq!(not_ball.as_ball(), None);
        // A prefix that stops mid-layer is not a ball either.
        let partial = Region::new(Arc::clone(&t), vec![0, 1, 2]).unwrap();
        assert_eq!(partial.as_ball(), None);
    }
}
