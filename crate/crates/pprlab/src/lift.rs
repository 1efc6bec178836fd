//! Multigraph → simple-graph lift of order `L`, with an eager builder and a
//! lazy oracle adapter.
//!
//! Every original node `v` keeps its label and gains `L` *out-copies*
//! `v?out_1..L` (only if it has out-ports) and `L` *in-copies* `v?in_1..L`
//! (only if it has in-ports). Edges:
//!
//! - spokes `v → v_out_i` (v's out-port `i`, copy in-port 1) and
//!   `v_in_j → v` (copy out-port 1, v's in-port `j`);
//! - each original edge `e: w → v` (out-port `k`, in-port `k′`) is threaded
//!   `L` times: `w_out_i → v_in_{((i+ρ(e)−2) mod L)+1}` carrying the original
//!   ports `k`/`k′`, where the *offset* `ρ(e) ∈ {1..L}` is injective among the
//!   parallel edges of each ordered pair. Injectivity is exactly what makes
//!   the lift simple; a pair with more than `L` parallel edges admits no
//!   offsets ([`LiftError::MultiplicityExceeded`]).
//!
//! As `i` sweeps `1..L`, the landing copy `j` sweeps all of `1..L`, so every
//! in-copy of `v` receives *one* copy of *each* original in-edge, at its
//! original in-port: copy degrees are inherited (`deg(v_out_i) = d_out(v)`
//! out / 1 in; `deg(v_in_j) = 1` out / `d_in(v)` in) while originals get
//! degree `L` on each previously nonzero side. Node labels: originals first
//! (`1..N`), then per original in label order its out-copy block and in-copy
//! block of `L` labels each, blocks for zero-degree sides omitted.
//!
//! One original transition becomes three lift hops through intermediate
//! nodes that exist only when the walk can continue, so a walk on the lift at
//! decay `α` reaches an *absorbing* original node with the probability a walk
//! on the original reaches it at decay `1 − (1−α)³`. [`lift_ppr_transform_check`]
//! verifies that identity with the exact solver; it holds for absorbing
//! targets only, because stopping mid-hop at copies redistributes the mass of
//! non-absorbing nodes.
//!
//! [`LazyLiftOracle`] presents the lift through the standard query interface
//! without building it: degree answers and spoke adjacencies come from the
//! public degree profile at zero inner cost, and each threaded port costs at
//! most one inner query on the backing multigraph, drawing the offset `ρ(e)`
//! lazily (uniform among the pair's unused values) the first time an edge is
//! seen from either side. A jump costs one inner jump and lands uniformly on
//! the jumped original's copy group. The revealed partial offset assignment
//! can be completed ([`complete_spec`]) and the transcript replayed against
//! the eagerly built lift.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact::{exact_ppr, DEFAULT_TOL};
use crate::graph::{GraphBuilder, GraphError, LabeledMultigraph, NodeId};
use crate::oracle::{
    ArcOracle, Budget, Event, InitialCoverage, OracleError, Query, QueryOracle, Response,
    Transcript,
};
use crate::util::trial_rng;

/// Lift failures.
#[derive(Debug, Error, PartialEq)]
pub enum LiftError {
    /// The lift order must be at least 1.
    #[error("lift order must be >= 1")]
    InvalidOrder,
    /// A parallel-edge class is larger than the lift order.
    #[error("{multiplicity} parallel edges from {src} to {dst} exceed lift order {order}")]
    MultiplicityExceeded {
        /// Source of the oversized class.
        src: NodeId,
        /// Target of the oversized class.
        dst: NodeId,
        /// Its size.
        multiplicity: u32,
        /// The order it would have to fit into.
        order: u32,
    },
    /// An offset assignment that does not match the graph.
    #[error("offset assignment inconsistent with the graph: {0}")]
    InconsistentSpec(String),
    /// The lift would not fit into the u32 label space.
    #[error("lift would have {0} nodes, exceeding the u32 label space")]
    TooLarge(u64),
    /// The lazy adapter's initial coverage names an original the inner oracle
    /// has not covered, which would later force unanswerable inner queries.
    #[error("lift coverage of node {node} requires inner coverage of its original")]
    InnerCoverage {
        /// The original node missing inner coverage.
        node: NodeId,
    },
    /// Invalid decay or a solver failure inside the transform check.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Defective lift construction.
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What a lift label denotes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LiftNode {
    /// An original node, same label as in the base graph.
    Original(NodeId),
    /// `i`-th out-copy of an original (1-based).
    OutCopy {
        /// The original it copies.
        of: NodeId,
        /// Copy index in `1..=L`.
        i: u32,
    },
    /// `j`-th in-copy of an original (1-based).
    InCopy {
        /// The original it copies.
        of: NodeId,
        /// Copy index in `1..=L`.
        j: u32,
    },
}

/// Label arithmetic of a lift: derived from the lift order and the base
/// graph's degree profile alone, so oracle adapters can run it without graph
/// access. Tuples are `(in-degree, out-degree)` per original, in label order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LiftLayout {
    l: u32,
    degrees: Vec<(u32, u32)>,
    out_start: Vec<u32>,
    in_start: Vec<u32>,
    node_count: u32,
    /// `(first label, original, is_out_block)`, ascending by label.
    blocks: Vec<(u32, NodeId, bool)>,
}

impl LiftLayout {
    /// Layout for lift order `l` over originals with the given
    /// `(in-degree, out-degree)` profile.
    pub fn new(profile: &[(u32, u32)], l: u32) -> Result<Self, LiftError> {
        if l < 1 {
            return Err(LiftError::InvalidOrder);
        }
        let n = profile.len() as u64;
        let out_pos = profile.iter().filter(|d| d.1 > 0).count() as u64;
        let in_pos = profile.iter().filter(|d| d.0 > 0).count() as u64;
        let total = n + u64::from(l) * (out_pos + in_pos);
        if total > u64::from(u32::MAX) {
            return Err(LiftError::TooLarge(total));
        }
        let mut out_start = vec![0u32; profile.len()];
        let mut in_start = vec![0u32; profile.len()];
        let mut blocks = Vec::with_capacity((out_pos + in_pos) as usize);
        let mut next = profile.len() as u32 + 1;
        for (idx, &(din, dout)) in profile.iter().enumerate() {
            if dout > 0 {
                out_start[idx] = next;
                blocks.push((next, NodeId(idx as u32 + 1), true));
                next += l;
            }
            if din > 0 {
                in_start[idx] = next;
                blocks.push((next, NodeId(idx as u32 + 1), false));
                next += l;
            }
        }
        Ok(Self {
            l,
            degrees: profile.to_vec(),
            out_start,
            in_start,
            node_count: next - 1,
            blocks,
        })
    }

    /// Layout for lift order `l` over a concrete base graph.
    pub fn from_graph(g: &LabeledMultigraph, l: u32) -> Result<Self, LiftError> {
        Self::new(&graph_degree_profile(g), l)
    }

    /// Lift order `L`.
    #[must_use]
    pub fn order(&self) -> u32 {
        self.l
    }

    /// Number of originals.
    #[must_use]
    pub fn original_count(&self) -> u32 {
        self.degrees.len() as u32
    }

    /// Number of lift nodes.
    #[must_use]
    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    /// `(in-degree, out-degree)` of an original, or `None` out of range.
    #[must_use]
    pub fn original_degrees(&self, v: NodeId) -> Option<(u32, u32)> {
        if v.0 >= 1 && v.0 <= self.original_count() {
            Some(self.degrees[v.idx()])
        } else {
            None
        }
    }

    /// Label of `v_out_i`, or `None` if `v` has no out-block or `i ∉ 1..=L`.
    #[must_use]
    pub fn out_copy(&self, v: NodeId, i: u32) -> Option<NodeId> {
        self.original_degrees(v)?;
        let start = self.out_start[v.idx()];
        if start == 0 || i < 1 || i > self.l {
            return None;
        }
        Some(NodeId(start + i - 1))
    }

    /// Label of `v_in_j`, or `None` if `v` has no in-block or `j ∉ 1..=L`.
    #[must_use]
    pub fn in_copy(&self, v: NodeId, j: u32) -> Option<NodeId> {
        self.original_degrees(v)?;
        let start = self.in_start[v.idx()];
        if start == 0 || j < 1 || j > self.l {
            return None;
        }
        Some(NodeId(start + j - 1))
    }

    /// What lift label `x` denotes, or `None` out of range.
    #[must_use]
    pub fn classify(&self, x: NodeId) -> Option<LiftNode> {
        if x.0 < 1 || x.0 > self.node_count {
            return None;
        }
        if x.0 <= self.original_count() {
            return Some(LiftNode::Original(x));
        }
        let pos = self.blocks.partition_point(|b| b.0 <= x.0);
        let (start, of, is_out) = self.blocks[pos - 1];
        let idx = x.0 - start + 1; // blocks are contiguous, so idx ∈ 1..=L
        Some(if is_out {
            LiftNode::OutCopy { of, i: idx }
        } else {
            LiftNode::InCopy { of, j: idx }
        })
    }

    /// `(in-degree, out-degree)` of lift label `x`, derived from the profile.
    #[must_use]
    pub fn lift_degrees(&self, x: NodeId) -> Option<(u32, u32)> {
        let (din, dout) = match self.classify(x)? {
            LiftNode::Original(v) => {
                let (din, dout) = self.degrees[v.idx()];
                (
                    if din > 0 { self.l } else { 0 },
                    if dout > 0 { self.l } else { 0 },
                )
            }
            LiftNode::OutCopy { of, .. } => (1, self.degrees[of.idx()].1),
            LiftNode::InCopy { of, .. } => (self.degrees[of.idx()].0, 1),
        };
        Some((din, dout))
    }
}

/// `(in-degree, out-degree)` per node of a concrete graph, in label order.
#[must_use]
pub fn graph_degree_profile(g: &LabeledMultigraph) -> Vec<(u32, u32)> {
    g.nodes().map(|v| (g.in_deg(v), g.out_deg(v))).collect()
}

/// A full offset assignment: lift order plus `ρ(e) ∈ {1..L}` for every edge,
/// keyed by `(source, source out-port)`, injective within each ordered pair.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LiftSpec {
    l: u32,
    rho: BTreeMap<(NodeId, u32), u32>,
}

impl LiftSpec {
    /// Wraps an explicit assignment. Values are range-checked here; coverage
    /// and per-pair injectivity are checked against the graph in
    /// [`LiftSpec::validate`] / [`build_lift`].
    pub fn new(l: u32, rho: BTreeMap<(NodeId, u32), u32>) -> Result<Self, LiftError> {
        if l < 1 {
            return Err(LiftError::InvalidOrder);
        }
        for (&(v, k), &r) in &rho {
            if r < 1 || r > l {
                return Err(LiftError::InconsistentSpec(format!(
                    "offset {r} of edge ({v}, port {k}) outside 1..={l}"
                )));
            }
        }
        Ok(Self { l, rho })
    }

    /// Draws a uniformly random assignment for `g`: independently per ordered
    /// pair, a uniform injection of its parallel edges into `{1..L}`.
    pub fn sample(
        g: &LabeledMultigraph,
        l: u32,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, LiftError> {
        complete_spec(g, l, &BTreeMap::new(), rng)
    }

    /// Lift order `L`.
    #[must_use]
    pub fn order(&self) -> u32 {
        self.l
    }

    /// Offset of the edge at `src`'s out-port `k`, if assigned.
    #[must_use]
    pub fn offset(&self, src: NodeId, k: u32) -> Option<u32> {
        self.rho.get(&(src, k)).copied()
    }

    /// Checks the assignment against `g`: exactly one offset per edge, none
    /// for non-edges, injective within each ordered pair.
    pub fn validate(&self, g: &LabeledMultigraph) -> Result<(), LiftError> {
        let mut seen = 0usize;
        let mut by_pair: HashMap<(NodeId, NodeId), HashSet<u32>> = HashMap::new();
        for e in g.edges() {
            let Some(&r) = self.rho.get(&(e.src, e.src_port)) else {
                return Err(LiftError::InconsistentSpec(format!(
                    "edge ({}, port {}) has no offset",
                    e.src, e.src_port
                )));
            };
            seen += 1;
            if !by_pair.entry((e.src, e.dst)).or_default().insert(r) {
                return Err(LiftError::InconsistentSpec(format!(
                    "offset {r} used twice between {} and {}",
                    e.src, e.dst
                )));
            }
        }
        if seen != self.rho.len() {
            return Err(LiftError::InconsistentSpec(format!(
                "{} offsets assigned but the graph has {seen} edges",
                self.rho.len()
            )));
        }
        Ok(())
    }
}

/// Extends a partial offset assignment (e.g. the revealed part of a lazy run)
/// to a full [`LiftSpec`] for `g`, drawing every unassigned offset uniformly
/// among its pair's unused values. Fails if the partial part names non-edges,
/// repeats a value within a pair, or a pair has more than `l` parallel edges.
pub fn complete_spec(
    g: &LabeledMultigraph,
    l: u32,
    partial: &BTreeMap<(NodeId, u32), u32>,
    rng: &mut ChaCha8Rng,
) -> Result<LiftSpec, LiftError> {
    if l < 1 {
        return Err(LiftError::InvalidOrder);
    }
    // Group edges by ordered pair, keeping (pair → source ports) sorted for
    // deterministic draw order.
    let mut pairs: BTreeMap<(NodeId, NodeId), Vec<u32>> = BTreeMap::new();
    let mut edge_keys: HashSet<(NodeId, u32)> = HashSet::new();
    for e in g.edges() {
        pairs.entry((e.src, e.dst)).or_default().push(e.src_port);
        edge_keys.insert((e.src, e.src_port));
    }
    for &(v, k) in partial.keys() {
        if !edge_keys.contains(&(v, k)) {
            return Err(LiftError::InconsistentSpec(format!(
                "partial assignment names non-edge ({v}, port {k})"
            )));
        }
    }
    let mut rho = BTreeMap::new();
    for ((src, dst), mut ports) in pairs {
        ports.sort_unstable();
        let mu = ports.len() as u32;
        if mu > l {
            return Err(LiftError::MultiplicityExceeded {
                src,
                dst,
                multiplicity: mu,
                order: l,
            });
        }
        let mut used: HashSet<u32> = HashSet::new();
        let mut todo: Vec<u32> = Vec::new();
        for &k in &ports {
            match partial.get(&(src, k)) {
                Some(&r) => {
                    if r < 1 || r > l {
                        return Err(LiftError::InconsistentSpec(format!(
                            "offset {r} of edge ({src}, port {k}) outside 1..={l}"
                        )));
                    }
                    if !used.insert(r) {
                        return Err(LiftError::InconsistentSpec(format!(
                            "offset {r} used twice between {src} and {dst}"
                        )));
                    }
                    rho.insert((src, k), r);
                }
                None => todo.push(k),
            }
        }
        let free: Vec<u32> = (1..=l).filter(|r| !used.contains(r)).collect();
        let picks = sample_indices(rng, free.len(), todo.len());
        for (k, pick) in todo.into_iter().zip(picks.iter()) {
            rho.insert((src, k), free[pick]);
        }
    }
    Ok(LiftSpec { l, rho })
}

/// Builds the order-`L` lift of `g` under `spec`. The result is always
/// simple: one spoke per (original, copy) incident pair, and threaded edges
/// separated by the injective offsets.
pub fn build_lift(g: &LabeledMultigraph, spec: &LiftSpec) -> Result<LabeledMultigraph, LiftError> {
    spec.validate(g)?;
    let layout = LiftLayout::from_graph(g, spec.l)?;
    let l = spec.l;
    let mut b = GraphBuilder::new(layout.node_count());
    for v in g.nodes() {
        if g.out_deg(v) > 0 {
            for i in 1..=l {
                b.add_edge(crate::graph::EdgeRef {
                    src: v,
                    src_port: i,
                    dst: layout.out_copy(v, i).expect("out block exists"),
                    dst_port: 1,
                })?;
            }
        }
        if g.in_deg(v) > 0 {
            for j in 1..=l {
                b.add_edge(crate::graph::EdgeRef {
                    src: layout.in_copy(v, j).expect("in block exists"),
                    src_port: 1,
                    dst: v,
                    dst_port: j,
                })?;
            }
        }
    }
    for e in g.edges() {
        let rho = spec.offset(e.src, e.src_port).expect("validated above");
        for i in 1..=l {
            let j = (i + rho - 2) % l + 1;
            b.add_edge(crate::graph::EdgeRef {
                src: layout.out_copy(e.src, i).expect("source has out-ports"),
                src_port: e.src_port,
                dst: layout.in_copy(e.dst, j).expect("target has in-ports"),
                dst_port: e.dst_port,
            })?;
        }
    }
    let lifted = b.freeze()?;
    debug_assert!(lifted.multiplicity() <= 1, "lift must be simple");
    Ok(lifted)
}

/// Largest deviation `|π_lift(v, x; α) − π_base(v, x; 1−(1−α)³)|` over all
/// original sources `v` and all *absorbing* original targets `x`.
pub fn lift_transform_deviation(
    g: &LabeledMultigraph,
    spec: &LiftSpec,
    alpha: f64,
) -> Result<f64, LiftError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LiftError::Numeric(format!(
            "alpha = {alpha} must lie strictly inside (0, 1)"
        )));
    }
    let lifted = build_lift(g, spec)?;
    let alpha_base = 1.0 - (1.0 - alpha).powi(3);
    let targets: Vec<NodeId> = g.nodes().filter(|&v| g.out_deg(v) == 0).collect();
    let mut worst = 0.0f64;
    for v in g.nodes() {
        let on_lift = exact_ppr(&lifted, v, alpha, DEFAULT_TOL)
            .map_err(|e| LiftError::Numeric(e.to_string()))?;
        let on_base = exact_ppr(g, v, alpha_base, DEFAULT_TOL)
            .map_err(|e| LiftError::Numeric(e.to_string()))?;
        for &x in &targets {
            worst = worst.max((on_lift.get(x) - on_base.get(x)).abs());
        }
    }
    Ok(worst)
}

/// Whether the three-hop decay transform `α ↦ 1−(1−α)³` maps lift PPR onto
/// base PPR within `tol` on every (source, absorbing target) pair.
pub fn lift_ppr_transform_check(
    g: &LabeledMultigraph,
    spec: &LiftSpec,
    alpha: f64,
    tol: f64,
) -> Result<bool, LiftError> {
    Ok(lift_transform_deviation(g, spec, alpha)? <= tol)
}

// ---------------------------------------------------------------------------
// Lazy oracle adapter
// ---------------------------------------------------------------------------

/// Answers lift queries on top of a multigraph oracle, building nothing.
///
/// Costs per charged lift query: degree queries, spoke adjacencies and
/// already-revealed threaded ports are free on the inner oracle; a jump costs
/// one inner jump; an unrevealed threaded port costs one inner adjacency
/// query — never more than one inner query in total. The jump response is
/// uniform over the jumped original's copy group (itself plus its existing
/// copies).
///
/// The adapter enforces the standard oracle semantics on lift labels (budget
/// first, coverage for degree/adjacency, port 0 refused, out-of-range ports
/// answered `Absent` at unit cost) and keeps its own transcript, replayable
/// against [`build_lift`] under any completion of [`Self::revealed_offsets`].
pub struct LazyLiftOracle<'g> {
    inner: ArcOracle<'g>,
    layout: LiftLayout,
    budget: Budget,
    count: u64,
    covered: Vec<bool>,
    rng: ChaCha8Rng,
    /// Revealed offsets, keyed by (source, source out-port).
    rho: BTreeMap<(NodeId, u32), u32>,
    /// Revealed edge by source side: (src, src out-port) → (dst, dst in-port).
    fwd: HashMap<(NodeId, u32), (NodeId, u32)>,
    /// Revealed edge by target side: (dst, dst in-port) → (src, src out-port).
    rev: HashMap<(NodeId, u32), (NodeId, u32)>,
    pair_used: HashMap<(NodeId, NodeId), HashSet<u32>>,
    transcript: Transcript,
    max_inner_per_query: u64,
}

impl<'g> LazyLiftOracle<'g> {
    /// Wraps `inner` as an oracle for the order-`l` lift of its graph, whose
    /// degree profile (`(in, out)` per original, public knowledge for the
    /// hard instances) is `profile`. `coverage` is in lift labels; every
    /// covered label's original must already be covered on `inner`, which is
    /// what makes later inner queries answerable.
    pub fn new(
        inner: ArcOracle<'g>,
        profile: &[(u32, u32)],
        l: u32,
        budget: Budget,
        coverage: InitialCoverage,
        seed: u64,
    ) -> Result<Self, LiftError> {
        let layout = LiftLayout::new(profile, l)?;
        let n = layout.node_count() as usize;
        let covered = match coverage {
            InitialCoverage::None => vec![false; n],
            InitialCoverage::All => vec![true; n],
            InitialCoverage::Nodes(ref nodes) => {
                let mut c = vec![false; n];
                for &v in nodes {
                    assert!(
                        v.0 >= 1 && v.0 <= layout.node_count(),
                        "initial coverage names node {v} outside the lift"
                    );
                    c[v.idx()] = true;
                }
                c
            }
        };
        for (idx, &is_covered) in covered.iter().enumerate() {
            if !is_covered {
                continue;
            }
            let of = match layout.classify(NodeId(idx as u32 + 1)).expect("in range") {
                LiftNode::Original(v) => v,
                LiftNode::OutCopy { of, .. } | LiftNode::InCopy { of, .. } => of,
            };
            if !inner.is_covered(of) {
                return Err(LiftError::InnerCoverage { node: of });
            }
        }
        Ok(Self {
            inner,
            layout,
            budget,
            count: 0,
            covered,
            rng: trial_rng(seed, 0),
            rho: BTreeMap::new(),
            fwd: HashMap::new(),
            rev: HashMap::new(),
            pair_used: HashMap::new(),
            transcript: Transcript(Vec::new()),
            max_inner_per_query: 0,
        })
    }

    /// The layout the adapter answers from.
    #[must_use]
    pub fn layout(&self) -> &LiftLayout {
        &self.layout
    }

    /// Lift-level budget.
    #[must_use]
    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// Whether lift label `x` is covered.
    #[must_use]
    pub fn is_covered(&self, x: NodeId) -> bool {
        x.0 >= 1 && x.0 <= self.layout.node_count() && self.covered[x.idx()]
    }

    /// Queries charged on the backing oracle so far.
    #[must_use]
    pub fn inner_query_count(&self) -> u64 {
        self.inner.query_count()
    }

    /// Largest number of inner queries any single lift query has cost — the
    /// reduction's soundness is the invariant that this never exceeds 1.
    #[must_use]
    pub fn max_inner_per_query(&self) -> u64 {
        self.max_inner_per_query
    }

    /// The offsets revealed so far, extendable by [`complete_spec`].
    #[must_use]
    pub fn revealed_offsets(&self) -> &BTreeMap<(NodeId, u32), u32> {
        &self.rho
    }

    /// Lift-level transcript of charged queries.
    #[must_use]
    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Consumes the adapter, returning the lift transcript, the revealed
    /// offsets, and the backing oracle.
    #[must_use]
    pub fn into_parts(self) -> (Transcript, BTreeMap<(NodeId, u32), u32>, ArcOracle<'g>) {
        (self.transcript, self.rho, self.inner)
    }

    fn cover(&mut self, x: NodeId) {
        self.covered[x.idx()] = true;
    }

    fn charge(&mut self, q: Query, r: Response) -> Response {
        self.count += 1;
        self.transcript.0.push(Event { q, r });
        r
    }

    fn require_covered(&self, x: NodeId) -> Result<LiftNode, OracleError> {
        if !self.is_covered(x) {
            return Err(OracleError::UncoveredNode(x));
        }
        Ok(self.layout.classify(x).expect("covered labels are in range"))
    }

    /// Draws the offset for a freshly revealed edge, uniform among the values
    /// its ordered pair has not used yet.
    fn draw_offset(&mut self, src: NodeId, dst: NodeId) -> Result<u32, OracleError> {
        let used = self.pair_used.entry((src, dst)).or_default();
        let free: Vec<u32> = (1..=self.layout.order())
            .filter(|r| !used.contains(r))
            .collect();
        if free.is_empty() {
            return Err(OracleError::MultiplicityExceeded { src, dst });
        }
        let pick = free[self.rng.random_range(0..free.len())];
        used.insert(pick);
        Ok(pick)
    }

    /// Reveals the original edge behind `src`'s out-port `k`, spending one
    /// inner query unless already known. Returns `(dst, dst_port, offset)`.
    fn reveal_out(&mut self, src: NodeId, k: u32) -> Result<(NodeId, u32, u32), OracleError> {
        if let Some(&(dst, dst_port)) = self.fwd.get(&(src, k)) {
            return Ok((dst, dst_port, self.rho[&(src, k)]));
        }
        let r = self.inner.issue(Query::AdjOut { v: src, k })?;
        let Response::Port { v: dst, k: dst_port } = r else {
            unreachable!("port {k} of {src} is in range by the public degree profile")
        };
        let rho = self.draw_offset(src, dst)?;
        self.rho.insert((src, k), rho);
        self.fwd.insert((src, k), (dst, dst_port));
        self.rev.insert((dst, dst_port), (src, k));
        Ok((dst, dst_port, rho))
    }

    /// Reveals the original edge behind `dst`'s in-port `k`, spending one
    /// inner query unless already known. Returns `(src, src_port, offset)`.
    fn reveal_in(&mut self, dst: NodeId, k: u32) -> Result<(NodeId, u32, u32), OracleError> {
        if let Some(&(src, src_port)) = self.rev.get(&(dst, k)) {
            return Ok((src, src_port, self.rho[&(src, src_port)]));
        }
        let r = self.inner.issue(Query::AdjIn { v: dst, k })?;
        let Response::Port { v: src, k: src_port } = r else {
            unreachable!("port {k} of {dst} is in range by the public degree profile")
        };
        let rho = self.draw_offset(src, dst)?;
        self.rho.insert((src, src_port), rho);
        self.fwd.insert((src, src_port), (dst, k));
        self.rev.insert((dst, k), (src, src_port));
        Ok((src, src_port, rho))
    }

    fn dispatch(&mut self, q: Query) -> Result<Response, OracleError> {
        let l = self.layout.order();
        match q {
            Query::Jump => {
                let r = self.inner.issue(Query::Jump)?;
                let Response::Node { v } = r else {
                    unreachable!("jump always answers a node")
                };
                let (din, dout) = self.layout.original_degrees(v).expect("inner label");
                let mut group = vec![v];
                if dout > 0 {
                    group.extend((1..=l).map(|i| self.layout.out_copy(v, i).unwrap()));
                }
                if din > 0 {
                    group.extend((1..=l).map(|j| self.layout.in_copy(v, j).unwrap()));
                }
                let pick = group[self.rng.random_range(0..group.len())];
                self.cover(pick);
                Ok(self.charge(q, Response::Node { v: pick }))
            }
            Query::OutDeg { v } => {
                let (_, dout) = self
                    .layout
                    .lift_degrees(v)
                    .filter(|_| self.is_covered(v))
                    .ok_or(OracleError::UncoveredNode(v))?;
                Ok(self.charge(q, Response::Degree { d: dout }))
            }
            Query::InDeg { v } => {
                let (din, _) = self
                    .layout
                    .lift_degrees(v)
                    .filter(|_| self.is_covered(v))
                    .ok_or(OracleError::UncoveredNode(v))?;
                Ok(self.charge(q, Response::Degree { d: din }))
            }
            Query::AdjOut { v, k } => {
                let node = self.require_covered(v)?;
                if k == 0 {
                    return Err(OracleError::PortOutOfRange { node: v, port: k });
                }
                let (_, dout) = self.layout.lift_degrees(v).expect("covered");
                if k > dout {
                    return Ok(self.charge(q, Response::Absent));
                }
                let r = match node {
                    LiftNode::Original(orig) => {
                        // Spoke to the k-th out-copy.
                        let w = self.layout.out_copy(orig, k).expect("k <= L and block exists");
                        self.cover(w);
                        Response::Port { v: w, k: 1 }
                    }
                    LiftNode::InCopy { of, j } => {
                        // The single spoke back into the original.
                        self.cover(of);
                        Response::Port { v: of, k: j }
                    }
                    LiftNode::OutCopy { of, i } => {
                        let (dst, dst_port, rho) = self.reveal_out(of, k)?;
                        let j = (i + rho - 2) % l + 1;
                        let w = self.layout.in_copy(dst, j).expect("dst has in-ports");
                        self.cover(w);
                        Response::Port { v: w, k: dst_port }
                    }
                };
                Ok(self.charge(q, r))
            }
            Query::AdjIn { v, k } => {
                let node = self.require_covered(v)?;
                if k == 0 {
                    return Err(OracleError::PortOutOfRange { node: v, port: k });
                }
                let (din, _) = self.layout.lift_degrees(v).expect("covered");
                if k > din {
                    return Ok(self.charge(q, Response::Absent));
                }
                let r = match node {
                    LiftNode::Original(orig) => {
                        let w = self.layout.in_copy(orig, k).expect("k <= L and block exists");
                        self.cover(w);
                        Response::Port { v: w, k: 1 }
                    }
                    LiftNode::OutCopy { of, i } => {
                        // The single spoke from the original's out-port i.
                        self.cover(of);
                        Response::Port { v: of, k: i }
                    }
                    LiftNode::InCopy { of, j } => {
                        let (src, src_port, rho) = self.reveal_in(of, k)?;
                        let i = (j as i64 - rho as i64).rem_euclid(l as i64) as u32 + 1;
                        let w = self.layout.out_copy(src, i).expect("src has out-ports");
                        self.cover(w);
                        Response::Port { v: w, k: src_port }
                    }
                };
                Ok(self.charge(q, r))
            }
        }
    }
}

impl QueryOracle for LazyLiftOracle<'_> {
    fn issue(&mut self, q: Query) -> Result<Response, OracleError> {
        if self.count >= self.budget.limit {
            return Err(OracleError::BudgetExhausted);
        }
        let inner_before = self.inner.query_count();
        let out = self.dispatch(q);
        let spent = self.inner.query_count() - inner_before;
        debug_assert!(spent <= 1, "a lift query must cost at most one inner query");
        self.max_inner_per_query = self.max_inner_per_query.max(spent);
        out
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}
