//! Weighted trees over Euclidean pointclouds: validation, the path metric,
//! generators and force-directed layout.

mod generate;
mod layout;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TreeError};

pub use generate::{gen_binary, gen_complete, gen_kary, gen_random, gen_ternary, path, prufer_decode, spider, star};
pub use layout::{spring_layout, LayoutParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: i64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: i64,
    pub v: i64,
    pub w: f64,
}

/// Unvalidated tree description; this is also the on-disk JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeData {
    pub n_dim: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Checks that `t` describes a tree with positive weights.
pub fn validate_tree(t: &TreeData) -> std::result::Result<(), TreeError> {
    if t.nodes.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut index = HashMap::with_capacity(t.nodes.len());
    for (i, node) in t.nodes.iter().enumerate() {
        if index.insert(node.id, i).is_some() {
            return Err(TreeError::DuplicateId(node.id));
        }
        if node.coords.len() != t.n_dim {
            return Err(TreeError::CoordinateDim {
                id: node.id,
                expected: t.n_dim,
                found: node.coords.len(),
            });
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(t.edges.len());
    for e in &t.edges {
        for id in [e.u, e.v] {
            if !index.contains_key(&id) {
                return Err(TreeError::UnknownNode(id));
            }
        }
        if e.u == e.v {
            return Err(TreeError::SelfLoop(e.u));
        }
        if !(e.w.is_finite() && e.w > 0.0) {
            return Err(TreeError::NonPositiveWeight { u: e.u, v: e.v, w: e.w });
        }
        if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
            return Err(TreeError::DuplicateEdge(e.u, e.v));
        }
    }

    // Union-find: a cycle shows up as an edge joining an already-connected pair.
    let n = t.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut components = n;
    for e in &t.edges {
        let (a, b) = (find(&mut parent, index[&e.u]), find(&mut parent, index[&e.v]));
        if a == b {
            return Err(TreeError::Cycle {
                nodes: n,
                edges: t.edges.len(),
            });
        }
        parent[a] = b;
        components -= 1;
    }
    if components != 1 {
        return Err(TreeError::Disconnected { components });
    }
    Ok(())
}

/// A validated weighted tree. Nodes are addressed by their position in
/// [`WeightedTree::nodes`]; ids are kept for I/O and reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTree {
    data: TreeData,
    index: HashMap<i64, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<TreeData> for WeightedTree {
    type Error = Error;

    fn try_from(data: TreeData) -> Result<Self> {
        validate_tree(&data)?;
        let index: HashMap<i64, usize> =
            data.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adjacency = vec![Vec::new(); data.nodes.len()];
        for e in &data.edges {
            let (a, b) = (index[&e.u], index[&e.v]);
            adjacency[a].push((b, e.w));
            adjacency[b].push((a, e.w));
        }
        Ok(Self {
            data,
            index,
            adjacency,
        })
    }
}

impl WeightedTree {
    /// Builds a tree on nodes `0..n` from index pairs, without coordinates.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let data = TreeData {
            n_dim: 0,
            nodes: (0..n as i64)
                .map(|id| Node {
                    id,
                    coords: Vec::new(),
                })
                .collect(),
            edges: edges
                .iter()
                .map(|&(u, v, w)| Edge {
                    u: u as i64,
                    v: v as i64,
                    w,
                })
                .collect(),
        };
        Self::try_from(data)
    }

    pub fn len(&self) -> usize {
        self.data.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nodes.is_empty()
    }

    pub fn n_dim(&self) -> usize {
        self.data.n_dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.data.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.data.edges
    }

    pub fn ids(&self) -> Vec<i64> {
        self.data.nodes.iter().map(|n| n.id).collect()
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn node_degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.data.nodes[i].coords
    }

    pub fn has_layout(&self) -> bool {
        self.data.n_dim > 0
    }

    /// Replaces every node's coordinates; `coords[i]` belongs to node `i`.
    pub fn set_coords(&mut self, coords: Vec<Vec<f64>>) -> Result<()> {
        if coords.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coords.len(),
            });
        }
        let dim = coords.first().map_or(0, Vec::len);
        for c in &coords {
            crate::error::check_len(dim, c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("node coordinates".into()));
            }
        }
        for (node, c) in self.data.nodes.iter_mut().zip(coords) {
            node.coords = c;
        }
        self.data.n_dim = dim;
        Ok(())
    }

    pub fn data(&self) -> &TreeData {
        &self.data
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.data)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let data: TreeData = serde_json::from_str(s)?;
        Self::try_from(data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    /// A node minimizing the size of its largest remaining component when
    /// removed (ties broken by the smallest index).
    pub fn centroid(&self) -> usize {
        let n = self.len();
        let (order, parent) = self.dfs_order(0);
        let mut size = vec![1usize; n];
        for &v in order.iter().rev() {
            if let Some(p) = parent[v] {
                size[p] += size[v];
            }
        }
        let mut best = (usize::MAX, 0);
        for v in 0..n {
            let mut worst = n - size[v];
            for &(c, _) in &self.adjacency[v] {
                if parent[c] == Some(v) {
                    worst = worst.max(size[c]);
                }
            }
            if worst < best.0 {
                best = (worst, v);
            }
        }
        best.1
    }

    /// Preorder from `root` and the parent of every node in that rooting.
    pub fn dfs_order(&self, root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
        let n = self.len();
        let mut parent = vec![None; n];
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        visited[root] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(c, _) in self.adjacency[v].iter().rev() {
                if !visited[c] {
                    visited[c] = true;
                    parent[c] = Some(v);
                    stack.push(c);
                }
            }
        }
        (order, parent)
    }
}

/// All-pairs path lengths of a tree, indexed by node position.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMetric {
    n: usize,
    dist: Vec<f64>,
}

impl TreeMetric {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn from_matrix(n: usize, dist: Vec<f64>) -> Result<Self> {
        crate::error::check_len(n * n, dist.len())?;
        Ok(Self { n, dist })
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }
}

/// Path-length metric, one depth-first traversal per source.
pub fn tree_metric(t: &WeightedTree) -> TreeMetric {
    let n = t.len();
    let mut dist = vec![0.0; n * n];
    let mut stack = Vec::with_capacity(n);
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        stack.clear();
        stack.push((src, usize::MAX));
        while let Some((v, from)) = stack.pop() {
            for &(c, w) in t.neighbors(v) {
                if c != from {
                    row[c] = row[v] + w;
                    stack.push((c, v));
                }
            }
        }
    }
    TreeMetric { n, dist }
}

/// Ids of the degree-one nodes, in node order.
pub fn leaves(t: &WeightedTree) -> Vec<i64> {
    (0..t.len())
        .filter(|&i| t.node_degree(i) == 1)
        .map(|i| t.nodes()[i].id)
        .collect()
}

/// Maximum node degree.
pub fn degree(t: &WeightedTree) -> usize {
    (0..t.len()).map(|i| t.node_degree(i)).max().unwrap_or(0)
}

/// Largest over smallest pairwise Euclidean distance.
pub fn aspect_ratio(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "aspect ratio needs at least two points".into(),
        ));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            crate::error::check_len(points[i].len(), points[j].len())?;
            let d = euclidean(&points[i], &points[j]);
            if d == 0.0 {
                return Err(Error::DuplicatePoints(i, j));
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(hi / lo)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, edges: &[(i64, i64, f64)]) -> TreeData {
        TreeData {
            n_dim: 0,
            nodes: (0..n as i64).map(|id| Node { id, coords: vec![] }).collect(),
            edges: edges.iter().map(|&(u, v, w)| Edge { u, v, w }).collect(),
        }
    }

    #[test]
    fn validation_examples() {
        assert!(validate_tree(&data(3, &[(0, 1, 1.0), (1, 2, 1.0)])).is_ok());
        let tri = validate_tree(&data(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]));
        assert_eq!(tri.unwrap_err().code(), "cycle");
        let split = validate_tree(&data(4, &[(0, 1, 1.0), (2, 3, 1.0)]));
        assert_eq!(split.unwrap_err().code(), "disconnected");
        let neg = validate_tree(&data(2, &[(0, 1, 0.0)]));
        assert_eq!(neg.unwrap_err().code(), "non_positive_weight");
        let dup = validate_tree(&data(3, &[(0, 1, 1.0), (1, 0, 1.0)]));
        assert_eq!(dup.unwrap_err().code(), "duplicate_edge");
        let looped = validate_tree(&data(2, &[(0, 0, 1.0)]));
        assert_eq!(looped.unwrap_err().code(), "self_loop");
        let unknown = validate_tree(&data(2, &[(0, 5, 1.0)]));
        assert_eq!(unknown.unwrap_err().code(), "unknown_node");
        assert_eq!(validate_tree(&data(0, &[])).unwrap_err().code(), "empty");
    }

    #[test]
    fn cycle_with_right_edge_count_is_still_rejected() {
        // 4 nodes, 3 edges, but a triangle plus an isolated node.
        let d = data(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        assert_eq!(validate_tree(&d).unwrap_err().code(), "cycle");
    }

    #[test]
    fn metric_examples() {
        let p = WeightedTree::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let m = tree_metric(&p);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(2, 0), 2.0);
        let e = WeightedTree::from_edges(2, &[(0, 1, 2.5)]).unwrap();
        assert_eq!(tree_metric(&e).get(0, 1), 2.5);
    }

    #[test]
    fn leaves_and_degree_examples() {
        let p = WeightedTree::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(leaves(&p), vec![0, 2]);
        assert_eq!(degree(&p), 2);
        let s = star(4);
        assert_eq!(leaves(&s).len(), 4);
        assert_eq!(degree(&s), 4);
        assert_eq!(leaves(&gen_binary(3)).len(), 8);
    }

    #[test]
    fn aspect_ratio_examples() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(aspect_ratio(&pts).unwrap(), 3.0);
        assert_eq!(aspect_ratio(&[vec![0.0, 0.0], vec![2.0, 5.0]]).unwrap(), 1.0);
        assert!(aspect_ratio(&[vec![1.0]]).is_err());
        assert!(aspect_ratio(&[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn centroid_of_path_is_middle() {
        let p = path(7);
        assert_eq!(p.centroid(), 3);
        assert_eq!(gen_binary(4).centroid(), 0);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut t = gen_random(20, 3);
        spring_layout(&mut t, &LayoutParams::default(), 5).unwrap();
        let s = t.to_json().unwrap();
        let back = WeightedTree::from_json(&s).unwrap();
        assert_eq!(back.data(), t.data());
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn set_coords_rejects_ragged_input() {
        let mut t = path(2);
        assert!(t.set_coords(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(t.set_coords(vec![vec![0.0]]).is_err());
    }
}
