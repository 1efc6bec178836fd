//! An empirical laboratory for single-source personalized PageRank (PPR) under
//! an *arc-centric* query model.
//!
//! The crate provides, bottom to top:
//!
//! - [`graph`] — immutable labeled multigraphs with mutually consistent ordered
//!   port tables on both endpoints of every edge, plus a bit-exact text format.
//! - [`oracle`] — the arc-centric query oracle: `JUMP`, degree, and adjacency
//!   queries with per-query budget accounting, coverage tracking, replayable
//!   transcripts, and uniform sampling of uncovered ports.
//! - [`instance`] — a parametric family of hard instances built from an
//!   explicit random seed structure (a split, per-node port permutations, and
//!   slot-matching bijections), padding, parameter-choice routines, and the
//!   multiplicity tail bound.
//! - [`exact`] — the exact PPR solver (absorbing dangling-node semantics) and
//!   closed-form per-class values on the hard family.
//! - [`estimators`] — Monte Carlo, forward push, backward push, and their
//!   combination, all touching the graph only through the oracle, plus
//!   threshold-based split recovery.
//! - [`lift`] — the multigraph-to-simple-graph lift, the decay-parameter
//!   transform identity check, and a lazy oracle adapter that serves lift
//!   queries with at most one inner multigraph query each.
//! - [`experiments`] — conditional response probabilities, exact split
//!   posteriors, empirical-vs-formula frequency reports, and budgeted
//!   split-recovery success curves.
//!
//! # Conventions
//!
//! Nodes are labeled `1..=N` ([`graph::NodeId`]); ports are labeled `1..=deg`
//! on each side. The walk model is the α-decay walk with *absorbing* dangling
//! nodes: at each node stop with probability α, otherwise move along a
//! uniformly random out-port; a node with no out-ports terminates the walk
//! with certainty. All randomness flows through explicitly seeded ChaCha
//! generators; every operation is deterministic given its seed, and parallel
//! drivers restore trial order before aggregating so results are byte-stable
//! at any thread count.

#![forbid(unsafe_code)]

pub mod estimators;
pub mod exact;
pub mod experiments;
pub mod graph;
pub mod instance;
pub mod lift;
pub mod oracle;
pub mod util;
