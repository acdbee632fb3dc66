use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::WeightedTree;
use crate::seed;

fn build(n: usize, edges: Vec<(usize, usize, f64)>) -> WeightedTree {
    WeightedTree::from_edges(n, &edges).expect("generator produced an invalid tree")
}

/// Complete `b`-ary tree of the given depth with unit weights, numbered in
/// breadth-first order (children of `i` are `b*i + 1 ..= b*i + b`).
pub fn gen_kary(branching: usize, depth: u32) -> WeightedTree {
    assert!(branching >= 1, "branching factor must be positive");
    let mut n = 1usize;
    let mut level = 1usize;
    for _ in 0..depth {
        level *= branching;
        n += level;
    }
    let edges = (1..n).map(|c| ((c - 1) / branching, c, 1.0)).collect();
    build(n, edges)
}

/// First `n` nodes of the infinite `b`-ary tree in breadth-first order: a
/// complete tree whose last level may be partly filled.
pub fn gen_complete(branching: usize, n: usize) -> WeightedTree {
    assert!(branching >= 1 && n >= 1, "branching factor and size must be positive");
    let edges = (1..n).map(|c| ((c - 1) / branching, c, 1.0)).collect();
    build(n, edges)
}

pub fn gen_binary(depth: u32) -> WeightedTree {
    gen_kary(2, depth)
}

pub fn gen_ternary(depth: u32) -> WeightedTree {
    gen_kary(3, depth)
}

/// Decodes a Prüfer sequence over `0..seq.len()+2` into its labelled tree.
pub fn prufer_decode(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let Reverse(leaf) = heap.pop().expect("Prüfer decoding ran out of leaves");
        edges.push((leaf, s));
        degree[s] -= 1;
        if degree[s] == 1 {
            heap.push(Reverse(s));
        }
    }
    let Reverse(a) = heap.pop().unwrap();
    let Reverse(b) = heap.pop().unwrap();
    edges.push((a, b));
    edges
}

/// Uniformly random labelled tree on `n` nodes (unit weights) via a random
/// Prüfer sequence drawn from the `tree` stream of `seed`.
pub fn gen_random(n: usize, seed: u64) -> WeightedTree {
    assert!(n >= 1, "a tree needs at least one node");
    if n == 1 {
        return build(1, Vec::new());
    }
    let mut rng = seed::stream_rng(seed, seed::TREE);
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let edges = prufer_decode(&seq).into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    build(n, edges)
}

/// Path `0 - 1 - .. - (n-1)` with unit weights.
pub fn path(n: usize) -> WeightedTree {
    build(n, (1..n).map(|i| (i - 1, i, 1.0)).collect())
}

/// Star `K_{1,k}` with the hub at node 0.
pub fn star(k: usize) -> WeightedTree {
    build(k + 1, (1..=k).map(|i| (0, i, 1.0)).collect())
}

/// Hub (node 0) with `legs` unit-weight paths of `leg_len` edges each.
pub fn spider(legs: usize, leg_len: usize) -> WeightedTree {
    let mut edges = Vec::with_capacity(legs * leg_len);
    let mut next = 1;
    for _ in 0..legs {
        let mut prev = 0;
        for _ in 0..leg_len {
            edges.push((prev, next, 1.0));
            prev = next;
            next += 1;
        }
    }
    build(next, edges)
}
