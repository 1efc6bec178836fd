//! PPR estimators that touch the graph only through the query oracle.
//!
//! Four estimators share the oracle-access discipline (every adjacency/degree
//! lookup is an issued query, memoized so re-traversals are free):
//!
//! - [`mc_estimate`] — α-decay walks from the source; the empirical endpoint
//!   distribution is an unbiased estimate of the PPR vector.
//! - [`forward_push`] — local push from the source with per-node threshold
//!   `r(u) ≥ r_max/deg_out(u)`; terminal residues bound `‖π̂ − π‖₁` by
//!   `m·r_max`. A node without out-ports converts its whole residue into
//!   estimate (the walk must stop there).
//! - [`backward_push`] — reverse push from a *target* `t`, estimating
//!   `π_v(t)` for every `v` with per-entry error below `r_max`. The push rule
//!   follows the reverse recurrence of the absorbing walk: at a node with
//!   out-ports, settle `α·r` and spread `(1−α)·r/deg_out(w)` to each
//!   in-neighbor `w`; at a node *without* out-ports — only `t` itself can
//!   ever be one, and only on its first push — settle the full residue and
//!   spread `(1−α)·r/(α·deg_out(w))`, because absorption happens with
//!   probability 1 rather than α.
//! - [`fora`] — forward push, then `⌈r(u)·W⌉` walks from every node still
//!   holding residue; the combination keeps MC's lack of bias with push's
//!   variance reduction. With `r_max` so large that nothing pushes, it
//!   degenerates to plain MC from the source.
//!
//! [`split_by_threshold`] turns a hard-instance estimate into a split guess:
//! pool nodes above the midpoint value `(1−α)²(D−d/2)/((2D−d+r)n)` form the
//! candidate class, coerced to exactly `n` members by ranking (estimate
//! descending, label ascending) when the threshold over- or under-selects.
//! The ranking tie-break makes the zero-information guess deterministic.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::graph::NodeId;
use crate::instance::InstanceParams;
use crate::oracle::{OracleError, Query, QueryOracle, Response};
use crate::util::trial_rng;

/// Estimator failures.
#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    /// Bad α, walk count, or push tolerance.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// An oracle refusal other than planned budget exhaustion.
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Monte Carlo configuration.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct McConfig {
    /// Number of walks (≥ 1).
    pub walks: u64,
    /// Seed of the walk randomness.
    pub seed: u64,
}

/// Monte Carlo outcome. `estimate` averages over *completed* walks; when the
/// budget ran out mid-walk, `complete` is false and the estimate is partial
/// (kept for harvesting, but not unbiased).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct McResult {
    /// Empirical endpoint distribution over completed walks.
    pub estimate: BTreeMap<NodeId, f64>,
    /// Walks that ran to termination.
    pub walks: u64,
    /// Oracle queries charged during this call.
    pub queries: u64,
    /// Walk transitions taken (memoized or not) — the quantity with the
    /// geometric `(1−α)/α` mean on dangling-free graphs.
    pub steps: u64,
    /// False when the budget ended a walk early.
    pub complete: bool,
}

/// Push estimator state: sparse estimates and residues plus the tolerance
/// they were produced under.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PushState {
    /// Settled probability mass per node.
    pub estimates: BTreeMap<NodeId, f64>,
    /// Unsettled residue per node (only nonzero entries).
    pub residues: BTreeMap<NodeId, f64>,
    /// The threshold the run used.
    pub r_max: f64,
}

/// FORA outcome.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ForaResult {
    /// Combined estimate.
    pub estimate: BTreeMap<NodeId, f64>,
    /// Total walks launched across residue nodes.
    pub walks: u64,
    /// Oracle queries charged during this call.
    pub queries: u64,
    /// False when the budget ended the walk phase early.
    pub complete: bool,
}

// ---------------------------------------------------------------------------
// Shared oracle access with memoization
// ---------------------------------------------------------------------------

/// Memo of degree/port responses: repeat lookups cost nothing, matching the
/// accounting convention that only *issued* queries are charged.
#[derive(Default)]
struct NeighborCache {
    out_deg: HashMap<NodeId, u32>,
    in_deg: HashMap<NodeId, u32>,
    out_port: HashMap<(NodeId, u32), NodeId>,
    in_port: HashMap<(NodeId, u32), (NodeId, u32)>,
}

impl NeighborCache {
    fn out_deg<O: QueryOracle>(&mut self, o: &mut O, v: NodeId) -> Result<u32, OracleError> {
        if let Some(&d) = self.out_deg.get(&v) {
            return Ok(d);
        }
        match o.issue(Query::OutDeg { v })? {
            Response::Degree { d } => {
                self.out_deg.insert(v, d);
                Ok(d)
            }
            other => unreachable!("degree query answered {other:?}"),
        }
    }

    fn in_deg<O: QueryOracle>(&mut self, o: &mut O, v: NodeId) -> Result<u32, OracleError> {
        if let Some(&d) = self.in_deg.get(&v) {
            return Ok(d);
        }
        match o.issue(Query::InDeg { v })? {
            Response::Degree { d } => {
                self.in_deg.insert(v, d);
                Ok(d)
            }
            other => unreachable!("degree query answered {other:?}"),
        }
    }

    fn adj_out<O: QueryOracle>(
        &mut self,
        o: &mut O,
        v: NodeId,
        k: u32,
    ) -> Result<NodeId, OracleError> {
        if let Some(&w) = self.out_port.get(&(v, k)) {
            return Ok(w);
        }
        match o.issue(Query::AdjOut { v, k })? {
            Response::Port { v: w, .. } => {
                self.out_port.insert((v, k), w);
                Ok(w)
            }
            other => unreachable!("in-range adjacency query answered {other:?}"),
        }
    }

    /// In-neighbor behind in-port `k` of `v`, with the out-port it uses.
    fn adj_in<O: QueryOracle>(
        &mut self,
        o: &mut O,
        v: NodeId,
        k: u32,
    ) -> Result<(NodeId, u32), OracleError> {
        if let Some(&e) = self.in_port.get(&(v, k)) {
            return Ok(e);
        }
        match o.issue(Query::AdjIn { v, k })? {
            Response::Port { v: w, k: kp } => {
                self.in_port.insert((v, k), (w, kp));
                Ok((w, kp))
            }
            other => unreachable!("in-range adjacency query answered {other:?}"),
        }
    }
}

/// One α-decay walk. Returns the endpoint and the number of transitions.
fn walk_once<O: QueryOracle>(
    o: &mut O,
    cache: &mut NeighborCache,
    from: NodeId,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<(NodeId, u64), OracleError> {
    let mut at = from;
    let mut steps = 0u64;
    loop {
        if rng.random::<f64>() < alpha {
            return Ok((at, steps));
        }
        let deg = cache.out_deg(o, at)?;
        if deg == 0 {
            return Ok((at, steps)); // absorbing
        }
        let k = rng.random_range(1..=deg);
        at = cache.adj_out(o, at, k)?;
        steps += 1;
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Runs `cfg.walks` α-decay walks from `source` and returns the empirical
/// endpoint distribution. Budget exhaustion mid-run is not an error: the
/// result is returned with `complete = false` and averages only the walks
/// that finished. The source must be covered.
pub fn mc_estimate<O: QueryOracle>(
    o: &mut O,
    source: NodeId,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McResult, EstimatorError> {
    if cfg.walks < 1 {
        return Err(EstimatorError::InvalidConfig("walk count must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "alpha = {alpha} must lie in (0, 1]"
        )));
    }
    let start_queries = o.query_count();
    let mut cache = NeighborCache::default();
    let mut rng = trial_rng(cfg.seed, 0);
    let mut counts: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut steps = 0u64;
    let mut done = 0u64;
    let mut complete = true;
    for _ in 0..cfg.walks {
        match walk_once(o, &mut cache, source, alpha, &mut rng) {
            Ok((end, st)) => {
                *counts.entry(end).or_insert(0) += 1;
                steps += st;
                done += 1;
            }
            Err(OracleError::BudgetExhausted) => {
                complete = false;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let estimate = if done == 0 {
        BTreeMap::new()
    } else {
        counts
            .into_iter()
            .map(|(v, c)| (v, c as f64 / done as f64))
            .collect()
    };
    Ok(McResult {
        estimate,
        walks: done,
        queries: o.query_count() - start_queries,
        steps,
        complete,
    })
}

// ---------------------------------------------------------------------------
// Forward push
// ---------------------------------------------------------------------------

fn forward_push_core<O: QueryOracle>(
    o: &mut O,
    source: NodeId,
    alpha: f64,
    r_max: f64,
    mut on_push: impl FnMut(&BTreeMap<NodeId, f64>, &BTreeMap<NodeId, f64>),
) -> Result<PushState, EstimatorError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "alpha = {alpha} must lie strictly inside (0, 1)"
        )));
    }
    if r_max.is_nan() || r_max <= 0.0 {
        return Err(EstimatorError::InvalidConfig(format!(
            "r_max = {r_max} must be positive"
        )));
    }
    let mut cache = NeighborCache::default();
    let mut estimates: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut residues: BTreeMap<NodeId, f64> = BTreeMap::new();
    residues.insert(source, 1.0);
    let mut queue: VecDeque<NodeId> = VecDeque::from([source]);
    let mut queued: HashSet<NodeId> = HashSet::from([source]);

    while let Some(u) = queue.pop_front() {
        queued.remove(&u);
        let Some(&r) = residues.get(&u) else { continue };
        let deg = cache.out_deg(o, u)?;
        if deg == 0 {
            // Absorbing node: its residue is exactly terminal probability.
            residues.remove(&u);
            *estimates.entry(u).or_insert(0.0) += r;
            on_push(&estimates, &residues);
            continue;
        }
        if r < r_max / deg as f64 {
            continue; // below threshold; stays as terminal residue
        }
        residues.remove(&u);
        *estimates.entry(u).or_insert(0.0) += alpha * r;
        let share = (1.0 - alpha) * r / deg as f64;
        for k in 1..=deg {
            let w = cache.adj_out(o, u, k)?;
            *residues.entry(w).or_insert(0.0) += share;
            if queued.insert(w) {
                queue.push_back(w);
            }
        }
        on_push(&estimates, &residues);
    }
    Ok(PushState {
        estimates,
        residues,
        r_max,
    })
}

/// Forward push from `source` with threshold `r_max`. Terminal state:
/// `r(u) < r_max/deg_out(u)` on every node with out-ports and `r(u) = 0` on
/// every node without, giving `‖π̂ + Σ_u r(u)·π_u − π‖ = 0` exactly and
/// `‖π̂ − π‖₁ ≤ m·r_max`. The source must be covered.
pub fn forward_push<O: QueryOracle>(
    o: &mut O,
    source: NodeId,
    alpha: f64,
    r_max: f64,
) -> Result<PushState, EstimatorError> {
    forward_push_core(o, source, alpha, r_max, |_, _| {})
}

/// [`forward_push`] with a snapshot callback after every push — the hook the
/// per-push loop-invariant checks use. Snapshots clone the maps; meant for
/// small graphs.
pub fn forward_push_traced<O: QueryOracle>(
    o: &mut O,
    source: NodeId,
    alpha: f64,
    r_max: f64,
    mut on_push: impl FnMut(&BTreeMap<NodeId, f64>, &BTreeMap<NodeId, f64>),
) -> Result<PushState, EstimatorError> {
    forward_push_core(o, source, alpha, r_max, &mut on_push)
}

// ---------------------------------------------------------------------------
// Backward push
// ---------------------------------------------------------------------------

fn backward_push_core<O: QueryOracle>(
    o: &mut O,
    target: NodeId,
    alpha: f64,
    r_max: f64,
    mut on_push: impl FnMut(&BTreeMap<NodeId, f64>, &BTreeMap<NodeId, f64>),
) -> Result<PushState, EstimatorError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "alpha = {alpha} must lie strictly inside (0, 1)"
        )));
    }
    if r_max.is_nan() || r_max <= 0.0 {
        return Err(EstimatorError::InvalidConfig(format!(
            "r_max = {r_max} must be positive"
        )));
    }
    let mut cache = NeighborCache::default();
    let mut estimates: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut residues: BTreeMap<NodeId, f64> = BTreeMap::new();
    residues.insert(target, 1.0);
    let mut queue: VecDeque<NodeId> = VecDeque::from([target]);
    let mut queued: HashSet<NodeId> = HashSet::from([target]);

    while let Some(u) = queue.pop_front() {
        queued.remove(&u);
        let Some(&r) = residues.get(&u) else { continue };
        if r < r_max {
            continue;
        }
        residues.remove(&u);
        // Only the target itself can lack out-ports among residue holders:
        // everyone else received residue as the in-neighbor of a pushed node.
        let dangling = cache.out_deg(o, u)? == 0;
        let (settle, spread_scale) = if dangling {
            (r, (1.0 - alpha) / alpha)
        } else {
            (alpha * r, 1.0 - alpha)
        };
        *estimates.entry(u).or_insert(0.0) += settle;
        let din = cache.in_deg(o, u)?;
        for k in 1..=din {
            let (w, _) = cache.adj_in(o, u, k)?;
            let w_out = cache.out_deg(o, w)?; // in-neighbors always have out-ports
            *residues.entry(w).or_insert(0.0) += spread_scale * r / w_out as f64;
            if queued.insert(w) {
                queue.push_back(w);
            }
        }
        on_push(&estimates, &residues);
    }
    Ok(PushState {
        estimates,
        residues,
        r_max,
    })
}

/// Backward push toward `target` with uniform threshold `r_max`: the result's
/// `estimates[v]` approximates `π_v(target)` with per-entry error below
/// `r_max`. The target must be covered. See the module docs for the absorbing
/// special case at the target.
pub fn backward_push<O: QueryOracle>(
    o: &mut O,
    target: NodeId,
    alpha: f64,
    r_max: f64,
) -> Result<PushState, EstimatorError> {
    backward_push_core(o, target, alpha, r_max, |_, _| {})
}

/// [`backward_push`] with a snapshot callback after every push.
pub fn backward_push_traced<O: QueryOracle>(
    o: &mut O,
    target: NodeId,
    alpha: f64,
    r_max: f64,
    mut on_push: impl FnMut(&BTreeMap<NodeId, f64>, &BTreeMap<NodeId, f64>),
) -> Result<PushState, EstimatorError> {
    backward_push_core(o, target, alpha, r_max, &mut on_push)
}

// ---------------------------------------------------------------------------
// FORA
// ---------------------------------------------------------------------------

/// Forward push at `r_max`, then `⌈r(u)·walks⌉` compensating walks from every
/// node still holding residue: `π̂'(v) = π̂(v) + Σ_u r(u)·hits_u(v)/W_u`.
/// Budget exhaustion during the walk phase yields `complete = false` with the
/// mass gathered so far (the push phase propagates refusals as errors).
pub fn fora<O: QueryOracle>(
    o: &mut O,
    source: NodeId,
    alpha: f64,
    r_max: f64,
    walks: u64,
    seed: u64,
) -> Result<ForaResult, EstimatorError> {
    if walks < 1 {
        return Err(EstimatorError::InvalidConfig("walk count must be >= 1".into()));
    }
    let start_queries = o.query_count();
    let push = forward_push_core(o, source, alpha, r_max, |_, _| {})?;
    let mut cache = NeighborCache::default();
    let mut estimate = push.estimates.clone();
    let mut total_walks = 0u64;
    let mut complete = true;

    'residues: for (&u, &r) in &push.residues {
        debug_assert!(r > 0.0);
        let w_u = (r * walks as f64).ceil().max(1.0) as u64;
        let mut counts: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut done = 0u64;
        let mut rng = trial_rng(seed, u.0 as u64);
        for _ in 0..w_u {
            match walk_once(o, &mut cache, u, alpha, &mut rng) {
                Ok((end, _)) => {
                    *counts.entry(end).or_insert(0) += 1;
                    done += 1;
                }
                Err(OracleError::BudgetExhausted) => {
                    complete = false;
                }
                Err(e) => return Err(e.into()),
            }
            if !complete {
                break;
            }
        }
        total_walks += done;
        if done > 0 {
            for (v, c) in counts {
                *estimate.entry(v).or_insert(0.0) += r * c as f64 / done as f64;
            }
        }
        if !complete {
            break 'residues;
        }
    }
    Ok(ForaResult {
        estimate,
        walks: total_walks,
        queries: o.query_count() - start_queries,
        complete,
    })
}

// ---------------------------------------------------------------------------
// Threshold split recovery
// ---------------------------------------------------------------------------

/// Selects the candidate pool from `(index, score)` pairs given in ascending
/// index order: indices scoring strictly above `threshold` when they number
/// exactly `n`, otherwise the `n` best by (score descending, index
/// ascending) — a deterministic tie-break, so a zero-information scoring
/// always yields the `n` smallest indices. Returns sorted indices.
#[must_use]
pub fn pick_top_n(scored: &[(u32, f64)], n: usize, threshold: f64) -> Vec<u32> {
    let above: Vec<u32> = scored
        .iter()
        .filter(|&&(_, v)| v > threshold)
        .map(|&(i, _)| i)
        .collect();
    if above.len() == n {
        return above; // input order is ascending index, so already sorted
    }
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut picked: Vec<u32> = ranked[..n].iter().map(|&(i, _)| i).collect();
    picked.sort_unstable();
    picked
}

/// Guesses the hidden split from per-node estimates: pool nodes whose
/// estimate exceeds the midpoint `(1−α)²(D−d/2)/((2D−d+r)n)` form the guess;
/// when the threshold picks any number other than `n`, the guess is coerced
/// to the `n` best by (estimate descending, label ascending). Missing
/// estimates count as zero. Returns sorted pool indices in `1..=2n`.
#[must_use]
pub fn split_by_threshold(
    estimates: &BTreeMap<NodeId, f64>,
    p: &InstanceParams,
) -> Vec<u32> {
    let span = (p.port_span() + p.pad) as f64;
    let threshold = (1.0 - p.alpha).powi(2) * (p.heavy as f64 - p.gap as f64 / 2.0)
        / (span * p.n as f64);
    let scored: Vec<(u32, f64)> = (1..=2 * p.n)
        .map(|i| {
            let v = estimates.get(&p.x_label(i)).copied().unwrap_or(0.0);
            (i, v)
        })
        .collect();
    pick_top_n(&scored, p.n as usize, threshold)
}
