//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use pprlab::exact::{exact_ppr, PprVector, DEFAULT_TOL};
use pprlab::graph::{GraphBuilder, LabeledMultigraph, NodeId};
use pprlab::util::trial_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random directed multigraph on `2..=max_nodes` nodes. Self-loops and
/// parallel edges allowed. When `ensure_dangling` is set, at least one node
/// has no out-edges (edge sources are drawn from a strict subset).
pub fn random_digraph(
    rng: &mut ChaCha8Rng,
    max_nodes: u32,
    ensure_dangling: bool,
) -> LabeledMultigraph {
    let n = rng.random_range(2..=max_nodes);
    let source_pool = if ensure_dangling {
        rng.random_range(1..n)
    } else {
        rng.random_range(1..=n)
    };
    let m = rng.random_range(0..=3 * n);
    let mut b = GraphBuilder::new(n);
    for _ in 0..m {
        let src = NodeId(rng.random_range(1..=source_pool));
        // The graph model is loop-free; redraw targets that collide.
        let dst = loop {
            let d = NodeId(rng.random_range(1..=n));
            if d != src {
                break d;
            }
        };
        b.push_edge(src, dst).expect("labels in range");
    }
    b.freeze().expect("builder-produced graphs are consistent")
}

/// The same corpus the push/normalization checks sweep: one graph per seed.
pub fn corpus_graph(master_seed: u64, index: u64, max_nodes: u32) -> LabeledMultigraph {
    let mut rng = trial_rng(master_seed, index);
    random_digraph(&mut rng, max_nodes, true)
}

/// Exact PPR vectors from every source node.
pub fn exact_matrix(g: &LabeledMultigraph, alpha: f64) -> Vec<PprVector> {
    g.nodes()
        .map(|s| exact_ppr(g, s, alpha, DEFAULT_TOL).expect("solver converges"))
        .collect()
}
