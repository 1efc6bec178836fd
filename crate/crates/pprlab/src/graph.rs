//! Immutable labeled multigraphs with ordered port tables on both sides.
//!
//! Every edge of a [`LabeledMultigraph`] occupies exactly one *out-port* of its
//! source and one *in-port* of its target. Ports on each side of each node are
//! labeled contiguously `1..=deg`, and the two tables are mutually consistent:
//! if out-port `k` of `v` leads to `(w, k')`, then in-port `k'` of `w` leads
//! back to `(v, k)`. Parallel edges are allowed (they occupy distinct ports);
//! self-loops are rejected. Graphs are frozen at construction — after
//! [`GraphBuilder::freeze`] succeeds the structure is immutable and can be
//! shared freely across threads.
//!
//! The text serialization is bit-exact and canonical: a header line `N M`
//! followed by one line `u k_out v k_in` per edge (all labels 1-based), edges
//! ordered by `(u, k_out)`, every line LF-terminated. Deserializing a
//! serialized graph reproduces it exactly, and re-serializing reproduces the
//! bytes.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 1-based node label. Labels of an `N`-node graph are exactly `1..=N`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// The index of this label into a dense per-node array (`label - 1`).
    #[must_use]
    pub fn idx(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Which side of a node a port belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Outgoing ports (edges leaving the node).
    Out,
    /// Incoming ports (edges entering the node).
    In,
}

/// One edge with both endpoint ports spelled out.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct EdgeRef {
    /// Source node.
    pub src: NodeId,
    /// Out-port at the source (1-based).
    pub src_port: u32,
    /// Target node.
    pub dst: NodeId,
    /// In-port at the target (1-based).
    pub dst_port: u32,
}

/// Construction and parsing failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    /// An edge endpoint lies outside `1..=N`.
    #[error("node label {label} outside 1..={node_count}")]
    NodeOutOfRange {
        /// Offending label.
        label: u32,
        /// Number of nodes in the graph under construction.
        node_count: u32,
    },
    /// An edge with equal endpoints was supplied.
    #[error("self-loop at node {0} (self-loops are not representable)")]
    SelfLoop(NodeId),
    /// Two edges claimed the same port of the same node side.
    #[error("{dir:?}-port {port} of node {node} assigned twice")]
    PortClash {
        /// Node whose port table is inconsistent.
        node: NodeId,
        /// Side of the clash.
        dir: Direction,
        /// The doubly-assigned port label.
        port: u32,
    },
    /// Port labels on one side of a node are not exactly `1..=deg`.
    #[error("{dir:?}-ports of node {node} not contiguous: {assigned} assigned but highest label is {highest}")]
    PortGap {
        /// Node whose port table has a hole.
        node: NodeId,
        /// Side with the hole.
        dir: Direction,
        /// Number of ports assigned on that side.
        assigned: u32,
        /// Largest port label seen.
        highest: u32,
    },
    /// Text-format violation while deserializing.
    #[error("parse error on line {line}: {reason}")]
    Parse {
        /// 1-based line number in the input.
        line: usize,
        /// Human-readable cause.
        reason: String,
    },
}

/// An immutable directed multigraph with labeled, mutually consistent port
/// tables. See the module docs for the invariants.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabeledMultigraph {
    /// `out[v.idx()][k-1] = (w, k')`: out-port `k` of `v` reaches in-port `k'` of `w`.
    out: Vec<Vec<(NodeId, u32)>>,
    /// `in_[v.idx()][k-1] = (w, k')`: in-port `k` of `v` comes from out-port `k'` of `w`.
    in_: Vec<Vec<(NodeId, u32)>>,
    edge_count: u64,
}

impl LabeledMultigraph {
    /// Number of nodes `N`.
    #[must_use]
    pub fn node_count(&self) -> u32 {
        self.out.len() as u32
    }

    /// Number of edges `M` (parallel edges counted separately).
    #[must_use]
    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    /// True when `v` is a label of this graph.
    #[must_use]
    pub fn contains(&self, v: NodeId) -> bool {
        v.0 >= 1 && v.0 <= self.node_count()
    }

    /// Out-degree of `v`. Panics if `v` is out of range.
    #[must_use]
    pub fn out_deg(&self, v: NodeId) -> u32 {
        self.out[v.idx()].len() as u32
    }

    /// In-degree of `v`. Panics if `v` is out of range.
    #[must_use]
    pub fn in_deg(&self, v: NodeId) -> u32 {
        self.in_[v.idx()].len() as u32
    }

    /// The `(target, target-in-port)` behind out-port `k` of `v`, or `None`
    /// when `k` is outside `1..=out_deg(v)`.
    #[must_use]
    pub fn adj_out(&self, v: NodeId, k: u32) -> Option<(NodeId, u32)> {
        self.out[v.idx()].get((k as usize).wrapping_sub(1)).copied()
    }

    /// The `(source, source-out-port)` behind in-port `k` of `v`, or `None`
    /// when `k` is outside `1..=in_deg(v)`.
    #[must_use]
    pub fn adj_in(&self, v: NodeId, k: u32) -> Option<(NodeId, u32)> {
        self.in_[v.idx()].get((k as usize).wrapping_sub(1)).copied()
    }

    /// All out-entries of `v` in port order: slice index `k-1` is port `k`.
    #[must_use]
    pub fn out_entries(&self, v: NodeId) -> &[(NodeId, u32)] {
        &self.out[v.idx()]
    }

    /// All in-entries of `v` in port order.
    #[must_use]
    pub fn in_entries(&self, v: NodeId) -> &[(NodeId, u32)] {
        &self.in_[v.idx()]
    }

    /// All node labels, `1..=N`.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.node_count()).map(NodeId)
    }

    /// Every edge in canonical `(src, src_port)` order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        self.nodes().flat_map(move |v| {
            self.out[v.idx()]
                .iter()
                .enumerate()
                .map(move |(i, &(w, kp))| EdgeRef {
                    src: v,
                    src_port: i as u32 + 1,
                    dst: w,
                    dst_port: kp,
                })
        })
    }

    /// Maximum number of parallel edges over ordered node pairs; `0` for an
    /// edgeless graph.
    #[must_use]
    pub fn multiplicity(&self) -> u32 {
        let mut counts: HashMap<(NodeId, NodeId), u32> = HashMap::new();
        for v in self.nodes() {
            for &(w, _) in &self.out[v.idx()] {
                *counts.entry((v, w)).or_insert(0) += 1;
            }
        }
        counts.values().copied().max().unwrap_or(0)
    }

    /// Canonical text form: `N M` header, then one `u k_out v k_in` line per
    /// edge in `(u, k_out)` order, each line LF-terminated.
    #[must_use]
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{} {}\n", self.node_count(), self.edge_count));
        for e in self.edges() {
            s.push_str(&format!("{} {} {} {}\n", e.src, e.src_port, e.dst, e.dst_port));
        }
        s
    }

    /// Parses the text form produced by [`serialize`](Self::serialize).
    ///
    /// The parser is strict about structure (exactly `M` edge lines, four
    /// fields per line, no trailing garbage) but tolerant of repeated blanks
    /// between fields; edge lines may appear in any order. All port-table
    /// invariants are re-validated, so a corrupted file — a port used twice, a
    /// hole in a port range, a self-loop — is rejected with the line-level
    /// context where applicable.
    pub fn deserialize(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            reason: "empty input".into(),
        })?;
        let mut it = header.split_whitespace();
        let parse_u32 = |tok: Option<&str>, line: usize, what: &str| -> Result<u32, GraphError> {
            tok.ok_or_else(|| GraphError::Parse {
                line,
                reason: format!("missing {what}"),
            })?
            .parse::<u32>()
            .map_err(|e| GraphError::Parse {
                line,
                reason: format!("bad {what}: {e}"),
            })
        };
        let n = parse_u32(it.next(), 1, "node count")?;
        let m = parse_u32(it.next(), 1, "edge count")?;
        if it.next().is_some() {
            return Err(GraphError::Parse {
                line: 1,
                reason: "trailing fields after header".into(),
            });
        }
        if n == 0 {
            return Err(GraphError::Parse {
                line: 1,
                reason: "graphs need at least one node".into(),
            });
        }

        let mut builder = GraphBuilder::new(n);
        let mut seen = 0u32;
        for (i, raw) in lines {
            let line = i + 1;
            if raw.trim().is_empty() {
                if seen == m {
                    continue; // tolerate trailing blank lines only
                }
                return Err(GraphError::Parse {
                    line,
                    reason: "blank line inside edge list".into(),
                });
            }
            if seen == m {
                return Err(GraphError::Parse {
                    line,
                    reason: "more edge lines than the header announced".into(),
                });
            }
            let mut f = raw.split_whitespace();
            let e = EdgeRef {
                src: NodeId(parse_u32(f.next(), line, "source")?),
                src_port: parse_u32(f.next(), line, "source port")?,
                dst: NodeId(parse_u32(f.next(), line, "target")?),
                dst_port: parse_u32(f.next(), line, "target port")?,
            };
            if f.next().is_some() {
                return Err(GraphError::Parse {
                    line,
                    reason: "trailing fields after edge".into(),
                });
            }
            builder.add_edge(e)?;
            seen += 1;
        }
        if seen != m {
            return Err(GraphError::Parse {
                line: text.lines().count(),
                reason: format!("header announced {m} edges but {seen} were given"),
            });
        }
        builder.freeze()
    }
}

/// Accumulates edges and validates all port-table invariants at freeze time.
pub struct GraphBuilder {
    node_count: u32,
    edges: Vec<EdgeRef>,
    // Next free port per node for the auto-port convenience API.
    next_out: Vec<u32>,
    next_in: Vec<u32>,
}

impl GraphBuilder {
    /// A builder for a graph on nodes `1..=node_count`.
    #[must_use]
    pub fn new(node_count: u32) -> Self {
        GraphBuilder {
            node_count,
            edges: Vec::new(),
            next_out: vec![0; node_count as usize],
            next_in: vec![0; node_count as usize],
        }
    }

    fn check_node(&self, label: u32) -> Result<(), GraphError> {
        if label == 0 || label > self.node_count {
            return Err(GraphError::NodeOutOfRange {
                label,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    /// Adds an edge with explicit ports on both sides. Endpoint range and
    /// self-loops are checked immediately; port clashes and holes at freeze.
    pub fn add_edge(&mut self, e: EdgeRef) -> Result<(), GraphError> {
        self.check_node(e.src.0)?;
        self.check_node(e.dst.0)?;
        if e.src == e.dst {
            return Err(GraphError::SelfLoop(e.src));
        }
        if e.src_port == 0 || e.dst_port == 0 {
            return Err(GraphError::Parse {
                line: 0,
                reason: "port labels are 1-based".into(),
            });
        }
        self.next_out[e.src.idx()] = self.next_out[e.src.idx()].max(e.src_port);
        self.next_in[e.dst.idx()] = self.next_in[e.dst.idx()].max(e.dst_port);
        self.edges.push(e);
        Ok(())
    }

    /// Adds an edge on the next free port of each endpoint — handy when only
    /// the topology matters (random test graphs, small fixtures).
    pub fn push_edge(&mut self, src: NodeId, dst: NodeId) -> Result<(), GraphError> {
        self.check_node(src.0)?;
        self.check_node(dst.0)?;
        let e = EdgeRef {
            src,
            src_port: self.next_out[src.idx()] + 1,
            dst,
            dst_port: self.next_in[dst.idx()] + 1,
        };
        self.add_edge(e)
    }

    /// Validates port contiguity and uniqueness on every node side and
    /// produces the immutable graph.
    pub fn freeze(self) -> Result<LabeledMultigraph, GraphError> {
        let n = self.node_count as usize;
        let mut out: Vec<Vec<Option<(NodeId, u32)>>> = vec![Vec::new(); n];
        let mut in_: Vec<Vec<Option<(NodeId, u32)>>> = vec![Vec::new(); n];

        let place = |table: &mut Vec<Option<(NodeId, u32)>>,
                     node: NodeId,
                     dir: Direction,
                     port: u32,
                     entry: (NodeId, u32)|
         -> Result<(), GraphError> {
            let i = port as usize - 1;
            if table.len() <= i {
                table.resize(i + 1, None);
            }
            if table[i].is_some() {
                return Err(GraphError::PortClash { node, dir, port });
            }
            table[i] = Some(entry);
            Ok(())
        };

        for e in &self.edges {
            place(&mut out[e.src.idx()], e.src, Direction::Out, e.src_port, (e.dst, e.dst_port))?;
            place(&mut in_[e.dst.idx()], e.dst, Direction::In, e.dst_port, (e.src, e.src_port))?;
        }

        let compact = |tables: Vec<Vec<Option<(NodeId, u32)>>>,
                       dir: Direction|
         -> Result<Vec<Vec<(NodeId, u32)>>, GraphError> {
            tables
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let highest = t.len() as u32;
                    let assigned = t.iter().flatten().count() as u32;
                    t.into_iter()
                        .collect::<Option<Vec<_>>>()
                        .ok_or(GraphError::PortGap {
                            node: NodeId(i as u32 + 1),
                            dir,
                            assigned,
                            highest,
                        })
                })
                .collect()
        };

        Ok(LabeledMultigraph {
            out: compact(out, Direction::Out)?,
            in_: compact(in_, Direction::In)?,
            edge_count: self.edges.len() as u64,
        })
    }
}

/// Builds the two-node, one-edge graph `1 → 2` — the smallest interesting
/// fixture, used across the crate's tests.
#[must_use]
pub fn single_edge() -> LabeledMultigraph {
    let mut b = GraphBuilder::new(2);
    b.push_edge(NodeId(1), NodeId(2)).expect("valid edge");
    b.freeze().expect("valid graph")
}
