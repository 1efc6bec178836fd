//! The arc-centric query oracle: budgeted, coverage-gated access to a graph.
//!
//! An algorithm holding an [`ArcOracle`] never sees the graph; it issues
//! [`Query`] values and pays one unit of budget per *successful* response.
//! The model:
//!
//! - `JUMP` returns a uniformly random node and marks it covered.
//! - Degree queries (`IN_DEG`, `OUT_DEG`) require the node to be covered.
//! - Adjacency queries (`ADJ_IN`, `ADJ_OUT`) require the node to be covered,
//!   and their responses are *enhanced*: they name both the neighbor and the
//!   port label the edge occupies on the neighbor's side. The revealed
//!   neighbor becomes covered, so walks can keep moving.
//! - An adjacency query on a port label beyond the node's degree answers
//!   [`Response::Absent`] (that costs budget like any successful query); a
//!   port label of `0` is malformed and is rejected without charge.
//! - Failed queries — budget exhausted, uncovered node, malformed port —
//!   leave the counter and the transcript unchanged.
//!
//! Every successful query/response pair is recorded in a [`Transcript`].
//! Since `JUMP` is the only source of randomness, a transcript is replayable:
//! every non-`JUMP` response is a pure function of the graph, so independent
//! verification only needs the recorded `JUMP` outcomes
//! (see [`verify_replay`]).

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, LabeledMultigraph, NodeId};

/// A single oracle query.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Query {
    /// Uniformly random node; covers the result.
    Jump,
    /// In-degree of a covered node.
    InDeg {
        /// Queried node.
        v: NodeId,
    },
    /// Out-degree of a covered node.
    OutDeg {
        /// Queried node.
        v: NodeId,
    },
    /// The source behind in-port `k` of covered node `v`.
    AdjIn {
        /// Queried node.
        v: NodeId,
        /// 1-based in-port label.
        k: u32,
    },
    /// The target behind out-port `k` of covered node `v`.
    AdjOut {
        /// Queried node.
        v: NodeId,
        /// 1-based out-port label.
        k: u32,
    },
}

impl Query {
    /// The adjacency query for `(v, k)` in direction `dir`.
    #[must_use]
    pub fn adj(dir: Direction, v: NodeId, k: u32) -> Self {
        match dir {
            Direction::Out => Query::AdjOut { v, k },
            Direction::In => Query::AdjIn { v, k },
        }
    }
}

/// A successful oracle answer.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    /// A node (only from `JUMP`).
    Node {
        /// The jumped-to node.
        v: NodeId,
    },
    /// A degree (only from `IN_DEG` / `OUT_DEG`).
    Degree {
        /// The degree value.
        d: u32,
    },
    /// An enhanced adjacency answer: the neighbor and the port label the edge
    /// occupies on the *neighbor's* side.
    Port {
        /// Neighbor node.
        v: NodeId,
        /// Port label at the neighbor.
        k: u32,
    },
    /// The queried port label exceeds the node's degree.
    Absent,
}

/// Why a query was refused. Refusals never consume budget.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    /// The per-run query budget is used up.
    #[error("query budget exhausted")]
    BudgetExhausted,
    /// Degree/adjacency query on a node not yet covered (or not in the graph).
    #[error("node {0} is not covered")]
    UncoveredNode(NodeId),
    /// Port label `0` (ports are 1-based).
    #[error("port label {port} of node {node} is malformed; ports are 1-based")]
    PortOutOfRange {
        /// Queried node.
        node: NodeId,
        /// Offending label.
        port: u32,
    },
    /// `random_uncovered_adj` found every port already revealed.
    #[error("every {dir:?}-port of node {node} is already revealed")]
    NoUncoveredPort {
        /// Queried node.
        node: NodeId,
        /// Queried side.
        dir: Direction,
    },
    /// Raised only by lift adapters: a parallel-edge class of the backing
    /// multigraph is larger than the lift order, so no consistent simple
    /// graph exists. Plain oracles never emit this.
    #[error("more than the lift order of parallel edges from {src} to {dst}")]
    MultiplicityExceeded {
        /// Source of the oversized parallel class.
        src: NodeId,
        /// Target of the oversized parallel class.
        dst: NodeId,
    },
}

/// A query allowance. `limit` is the number of successful queries permitted;
/// `gamma` records the normalized budget the limit was derived from, if any.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of charged queries.
    pub limit: u64,
    /// The normalized budget γ this limit came from (`limit = ⌊γ·n·D⌋`), when
    /// derived via [`Budget::from_gamma`].
    pub gamma: Option<f64>,
}

impl Budget {
    /// An explicit query limit.
    #[must_use]
    pub fn queries(limit: u64) -> Self {
        Budget { limit, gamma: None }
    }

    /// Effectively unlimited queries.
    #[must_use]
    pub fn unlimited() -> Self {
        Budget {
            limit: u64::MAX,
            gamma: None,
        }
    }

    /// The normalized budget `⌊γ · n · heavy_deg⌋` used by the hard-instance
    /// experiments, where `n` is the instance group size and `heavy_deg` its
    /// heavy in-degree.
    #[must_use]
    pub fn from_gamma(gamma: f64, n: u64, heavy_deg: u64) -> Self {
        assert!(gamma >= 0.0 && gamma.is_finite(), "gamma must be finite and >= 0");
        Budget {
            limit: (gamma * n as f64 * heavy_deg as f64).floor() as u64,
            gamma: Some(gamma),
        }
    }
}

/// One successful query/response pair.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Event {
    /// The query as issued.
    pub q: Query,
    /// The oracle's answer.
    pub r: Response,
}

/// The ordered log of successful queries. Its length always equals the
/// oracle's query counter.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct Transcript(pub Vec<Event>);

impl Transcript {
    /// Number of recorded (successful) queries.
    #[must_use]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when no query has succeeded yet.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The events in issue order.
    #[must_use]
    pub fn events(&self) -> &[Event] {
        &self.0
    }

    /// JSON-lines form: one `{"t":i,"q":{...},"r":{...}}` object per line,
    /// `t` counting from 1, each line LF-terminated.
    #[must_use]
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for (i, ev) in self.0.iter().enumerate() {
            let q = serde_json::to_string(&ev.q).expect("query serializes");
            let r = serde_json::to_string(&ev.r).expect("response serializes");
            s.push_str(&format!("{{\"t\":{},\"q\":{},\"r\":{}}}\n", i + 1, q, r));
        }
        s
    }
}

/// Checks that a transcript is consistent with a graph: every non-`JUMP`
/// response must equal the value the graph itself dictates, and every `JUMP`
/// response must name a node of the graph. This is the replay property —
/// given the recorded `JUMP` randomness, the rest of the transcript is
/// forced.
#[must_use]
pub fn verify_replay(g: &LabeledMultigraph, t: &Transcript) -> bool {
    t.events().iter().all(|ev| match ev.q {
        Query::Jump => matches!(ev.r, Response::Node { v } if g.contains(v)),
        Query::InDeg { v } => g.contains(v) && ev.r == Response::Degree { d: g.in_deg(v) },
        Query::OutDeg { v } => g.contains(v) && ev.r == Response::Degree { d: g.out_deg(v) },
        Query::AdjOut { v, k } => {
            g.contains(v)
                && k >= 1
                && ev.r
                    == g.adj_out(v, k)
                        .map_or(Response::Absent, |(w, kp)| Response::Port { v: w, k: kp })
        }
        Query::AdjIn { v, k } => {
            g.contains(v)
                && k >= 1
                && ev.r
                    == g.adj_in(v, k)
                        .map_or(Response::Absent, |(w, kp)| Response::Port { v: w, k: kp })
        }
    })
}

/// How much of the graph an oracle starts out knowing.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum InitialCoverage {
    /// Nothing covered; the first access must be a `JUMP`.
    None,
    /// Every node covered — the setting for hard-instance experiments, where
    /// the node labeling is public and only the arc structure is hidden.
    All,
    /// Exactly these nodes covered (e.g. just a walk's source).
    Nodes(Vec<NodeId>),
}

/// Anything that answers arc-centric queries — the plain [`ArcOracle`] and
/// the lazy lift adapter both do. Estimators are generic over this trait so
/// they provably touch graphs only through queries.
pub trait QueryOracle {
    /// Issues one query; on success the implementation charges one unit of
    /// its budget.
    fn issue(&mut self, q: Query) -> Result<Response, OracleError>;

    /// Successful queries so far.
    fn query_count(&self) -> u64;
}

/// The budgeted oracle over a concrete graph.
pub struct ArcOracle<'g> {
    g: &'g LabeledMultigraph,
    budget: Budget,
    count: u64,
    covered: Vec<bool>,
    revealed_out: Vec<HashSet<u32>>,
    revealed_in: Vec<HashSet<u32>>,
    rng: ChaCha8Rng,
    transcript: Transcript,
}

impl fmt::Debug for ArcOracle<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArcOracle")
            .field("count", &self.count)
            .field("budget", &self.budget)
            .finish_non_exhaustive()
    }
}

impl<'g> ArcOracle<'g> {
    /// A fresh oracle. `seed` drives `JUMP` responses (and nothing else), so
    /// two oracles with the same seed answer identical query sequences
    /// identically.
    #[must_use]
    pub fn new(
        g: &'g LabeledMultigraph,
        budget: Budget,
        coverage: InitialCoverage,
        seed: u64,
    ) -> Self {
        assert!(g.node_count() >= 1, "oracles need a nonempty graph");
        let n = g.node_count() as usize;
        let mut covered = vec![false; n];
        match coverage {
            InitialCoverage::None => {}
            InitialCoverage::All => covered.fill(true),
            InitialCoverage::Nodes(vs) => {
                for v in vs {
                    assert!(g.contains(v), "initial coverage names node {v} outside the graph");
                    covered[v.idx()] = true;
                }
            }
        }
        ArcOracle {
            g,
            budget,
            count: 0,
            covered,
            revealed_out: vec![HashSet::new(); n],
            revealed_in: vec![HashSet::new(); n],
            rng: ChaCha8Rng::seed_from_u64(seed),
            transcript: Transcript::default(),
        }
    }

    /// The budget this oracle enforces.
    #[must_use]
    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// Queries still permitted.
    #[must_use]
    pub fn remaining(&self) -> u64 {
        self.budget.limit - self.count
    }

    /// Whether `v` is covered (queryable by degree/adjacency).
    #[must_use]
    pub fn is_covered(&self, v: NodeId) -> bool {
        self.g.contains(v) && self.covered[v.idx()]
    }

    /// The log of successful queries so far.
    #[must_use]
    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Consumes the oracle, keeping only its transcript.
    #[must_use]
    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    fn require_covered(&self, v: NodeId) -> Result<(), OracleError> {
        if self.is_covered(v) {
            Ok(())
        } else {
            Err(OracleError::UncoveredNode(v))
        }
    }

    fn charge(&mut self, q: Query, r: Response) -> Response {
        self.count += 1;
        self.transcript.0.push(Event { q, r });
        r
    }

    /// Issues one query. See the module docs for semantics; in short: charged
    /// on success only, `JUMP`/adjacency responses extend coverage, adjacency
    /// responses reveal the port on both endpoints.
    pub fn issue(&mut self, q: Query) -> Result<Response, OracleError> {
        if self.count >= self.budget.limit {
            return Err(OracleError::BudgetExhausted);
        }
        match q {
            Query::Jump => {
                let v = NodeId(self.rng.random_range(1..=self.g.node_count()));
                self.covered[v.idx()] = true;
                Ok(self.charge(q, Response::Node { v }))
            }
            Query::InDeg { v } => {
                self.require_covered(v)?;
                let d = self.g.in_deg(v);
                Ok(self.charge(q, Response::Degree { d }))
            }
            Query::OutDeg { v } => {
                self.require_covered(v)?;
                let d = self.g.out_deg(v);
                Ok(self.charge(q, Response::Degree { d }))
            }
            Query::AdjOut { v, k } | Query::AdjIn { v, k } => {
                self.require_covered(v)?;
                if k == 0 {
                    return Err(OracleError::PortOutOfRange { node: v, port: k });
                }
                let dir = if matches!(q, Query::AdjOut { .. }) {
                    Direction::Out
                } else {
                    Direction::In
                };
                let looked_up = match dir {
                    Direction::Out => self.g.adj_out(v, k),
                    Direction::In => self.g.adj_in(v, k),
                };
                let r = match looked_up {
                    None => Response::Absent,
                    Some((w, kp)) => {
                        // The enhanced response labels the arc on both sides:
                        // mark the port revealed at both endpoints and cover
                        // the neighbor.
                        self.covered[w.idx()] = true;
                        match dir {
                            Direction::Out => {
                                self.revealed_out[v.idx()].insert(k);
                                self.revealed_in[w.idx()].insert(kp);
                            }
                            Direction::In => {
                                self.revealed_in[v.idx()].insert(k);
                                self.revealed_out[w.idx()].insert(kp);
                            }
                        }
                        Response::Port { v: w, k: kp }
                    }
                };
                Ok(self.charge(q, r))
            }
        }
    }

    /// Picks a uniformly random not-yet-revealed port of `v` on side `dir`
    /// (ports learned from *either* endpoint of an earlier response count as
    /// revealed) and issues the adjacency query for it. Returns the chosen
    /// port together with the response.
    ///
    /// The selection itself is free — only the issued query is charged.
    pub fn random_uncovered_adj(
        &mut self,
        v: NodeId,
        dir: Direction,
        rng: &mut impl Rng,
    ) -> Result<(u32, Response), OracleError> {
        if self.count >= self.budget.limit {
            return Err(OracleError::BudgetExhausted);
        }
        self.require_covered(v)?;
        let deg = match dir {
            Direction::Out => self.g.out_deg(v),
            Direction::In => self.g.in_deg(v),
        };
        let revealed = match dir {
            Direction::Out => &self.revealed_out[v.idx()],
            Direction::In => &self.revealed_in[v.idx()],
        };
        let open = deg as usize - revealed.len();
        if open == 0 {
            return Err(OracleError::NoUncoveredPort { node: v, dir });
        }
        // Uniform over unrevealed ports: walk to the `open`-th free label.
        // (Degrees here are small; linearity is fine and order-deterministic.)
        let target = rng.random_range(0..open);
        let mut skipped = 0usize;
        let mut chosen = 0u32;
        for k in 1..=deg {
            if revealed.contains(&k) {
                continue;
            }
            if skipped == target {
                chosen = k;
                break;
            }
            skipped += 1;
        }
        debug_assert!(chosen >= 1);
        let r = self.issue(Query::adj(dir, v, chosen))?;
        Ok((chosen, r))
    }
}

impl QueryOracle for ArcOracle<'_> {
    fn issue(&mut self, q: Query) -> Result<Response, OracleError> {
        ArcOracle::issue(self, q)
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}
