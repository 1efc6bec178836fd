//! Information experiments on the hard instances: what the transcript of an
//! oracle interaction says about the hidden split, and how recovery success
//! scales with the query budget.
//!
//! The conditional-probability formula ([`cond_prob`]) gives, for the
//! uniform instance distribution, the chance that a fresh adjacency reveal
//! pairs a *specific* unrevealed out-slot of a class-`a` heavy-side node with
//! a *specific* unrevealed pool in-port of `x`, given `x`'s hypothesized
//! class `b` and the edges revealed so far:
//!
//! ```text
//!            D − (1 − [a = b])·d − E(Y_a→x)
//!   ─────────────────────────────────────────────────
//!   (2D−d − E(Y→x)) · (n(2D−d) − E(Y_a→X))
//! ```
//!
//! where the `E(·)` are the **revealed-edge counters** ([`EdgeCounters`]):
//! how many of the pair ports in question earlier queries have already pinned
//! down. The counters are computable from public information alone (labels
//! and ports; never the hidden split), so the denominator is
//! hypothesis-independent — the heart of the posterior computation: the
//! posterior over splits is proportional to the product of numerators alone.
//! Summing the formula over all possible responses of one query gives
//! exactly 1 (the numerators over both classes telescope against the first
//! denominator factor), which [`cond_prob`]'s tests and the frequency
//! experiment pin numerically.
//!
//! - [`posterior_splits`] replays a transcript against every one of the
//!   `C(2n, n)` splits (feasible for `2n ≤ 16`) in log-space.
//! - [`frequency_vs_formula`] runs a fixed query script over freshly sampled
//!   instances and compares empirical bin frequencies — binned by (response
//!   sequence, first-touch class pattern) — against the formula's joint
//!   probabilities.
//! - [`swap_ratio_bound`] is the per-step likelihood-ratio bound between two
//!   splits differing by one swapped pair while at most `τ·D` ports of the
//!   touched nodes are revealed.
//! - [`success_curve`] measures exact-recovery frequency against the budget
//!   scale `γ` (budget `⌊γ·n·D⌋`) for two strategies: Monte Carlo walks with
//!   threshold recovery, and direct in-port class counting.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    mc_estimate, pick_top_n, split_by_threshold, EstimatorError, McConfig,
};
use crate::graph::{Direction, NodeId};
use crate::instance::{build_instance, sample_sigma, InstanceError, InstanceParams, LabelKind};
use crate::oracle::{
    ArcOracle, Budget, Event, InitialCoverage, OracleError, Query, QueryOracle, Response,
    Transcript,
};
use crate::util::{binomial, child_seed, trial_rng};

/// Experiment failures.
#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    /// A denominator factor of the conditional-probability formula is not
    /// positive. The factors depend only on revealed-edge counts, never on
    /// the hypothesis, so this always means corrupt counters (more reveals
    /// recorded than ports exist), not a wrong hypothesis.
    #[error("conditional-probability denominator not positive at pool index {x_index}: corrupt revealed-edge counters")]
    NonPositiveDenominator {
        /// Pool index whose counters overflowed.
        x_index: u32,
    },
    /// Posterior enumeration is capped at `2n = 16` pool nodes.
    #[error("cannot enumerate C({m}, {n}) splits; enumeration is supported up to 2n = 16")]
    EnumerationTooLarge {
        /// Pool size `2n`.
        m: u32,
        /// Class size `n`.
        n: u32,
    },
    /// Bad arguments.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Instance construction failed.
    #[error(transparent)]
    Instance(#[from] InstanceError),
    /// An estimator failed.
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    /// An oracle refusal that the experiment could not absorb.
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

// ---------------------------------------------------------------------------
// Revealed-edge counters
// ---------------------------------------------------------------------------

/// One newly revealed heavy-side → pool edge.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Reveal {
    /// The heavy-side node.
    pub y: NodeId,
    /// Its public class (1 or 2).
    pub y_class: u8,
    /// Its out-port carrying the edge.
    pub y_port: u32,
    /// Pool index of the target in `1..=2n`.
    pub x_index: u32,
    /// The target's in-port carrying the edge.
    pub x_port: u32,
}

/// Counts of revealed heavy-side → pool edges, the `E(·)` quantities of the
/// conditional-probability formula. Built from public transcript information
/// only — labels, ports, and the fixed degree template — never the hidden
/// split. Repeat reveals of the same edge (same port queried again, or the
/// same edge seen from the other endpoint) are deduplicated.
#[derive(Clone, PartialEq, Debug)]
pub struct EdgeCounters {
    n: u32,
    span: u32,
    /// `[E(Y₁→x), E(Y₂→x)]` per pool index (entry `x−1`).
    per_x: Vec<[u64; 2]>,
    /// `[E(Y₁→X), E(Y₂→X)]`.
    totals: [u64; 2],
    /// Deduplication by `(x_index, x in-port)`.
    seen: HashSet<(u32, u32)>,
}

impl EdgeCounters {
    /// Fresh counters for instances with parameters `p`.
    #[must_use]
    pub fn new(p: &InstanceParams) -> Self {
        Self {
            n: p.n,
            span: p.port_span(),
            per_x: vec![[0, 0]; 2 * p.n as usize],
            totals: [0, 0],
            seen: HashSet::new(),
        }
    }

    /// The heavy-side → pool edge `ev` reveals, if it reveals a *new* one.
    /// Degree queries, jumps, repeats, `Absent` answers, and edges touching
    /// the padding layers all return `None`. Does not change the counters.
    #[must_use]
    pub fn reveal_of(&self, p: &InstanceParams, ev: &Event) -> Option<Reveal> {
        let r = match (ev.q, ev.r) {
            (Query::AdjIn { v: x, k }, Response::Port { v: y, k: y_port }) => {
                // In-ports 1..=2D−d of a pool node are heavy-sourced by the
                // template; later ports belong to the padding layer.
                let x_index = p.x_index(x)?;
                if k > self.span {
                    return None;
                }
                let (y_class, _) = p.y_index(y)?;
                Reveal { y, y_class, y_port, x_index, x_port: k }
            }
            (Query::AdjOut { v: y, k }, Response::Port { v: x, k: x_port }) => {
                let (y_class, _) = p.y_index(y)?;
                if k > self.span {
                    return None; // padding port
                }
                let x_index = p.x_index(x)?;
                Reveal { y, y_class, y_port: k, x_index, x_port }
            }
            _ => return None,
        };
        if self.seen.contains(&(r.x_index, r.x_port)) {
            None
        } else {
            Some(r)
        }
    }

    /// Records a reveal obtained from [`Self::reveal_of`].
    pub fn commit(&mut self, r: &Reveal) {
        if self.seen.insert((r.x_index, r.x_port)) {
            let a = (r.y_class - 1) as usize;
            self.per_x[r.x_index as usize - 1][a] += 1;
            self.totals[a] += 1;
        }
    }

    /// Detects and records in one step; returns the reveal if it was new.
    pub fn absorb_event(&mut self, p: &InstanceParams, ev: &Event) -> Option<Reveal> {
        let r = self.reveal_of(p, ev)?;
        self.commit(&r);
        Some(r)
    }

    /// Absorbs a whole transcript; returns the number of new edges revealed.
    pub fn absorb_transcript(&mut self, p: &InstanceParams, t: &Transcript) -> usize {
        t.events()
            .iter()
            .filter(|ev| self.absorb_event(p, ev).is_some())
            .count()
    }

    /// `E(Y_a → x)` — revealed edges from class `a` into pool index `x`.
    #[must_use]
    pub fn to_x(&self, a: u8, x_index: u32) -> u64 {
        self.per_x[x_index as usize - 1][(a - 1) as usize]
    }

    /// `E(Y → x)` — revealed edges into pool index `x` from either class.
    #[must_use]
    pub fn at_x(&self, x_index: u32) -> u64 {
        let [e1, e2] = self.per_x[x_index as usize - 1];
        e1 + e2
    }

    /// `E(Y_a → X)` — all revealed edges out of class `a`.
    #[must_use]
    pub fn from_class(&self, a: u8) -> u64 {
        self.totals[(a - 1) as usize]
    }

    /// Total revealed edges.
    #[must_use]
    pub fn revealed(&self) -> u64 {
        self.totals[0] + self.totals[1]
    }
}

/// The conditional-probability formula (module docs): the chance that the
/// next reveal pairs a specific unrevealed out-slot of a class-`a` node with
/// a specific unrevealed in-port of pool index `x`, under the hypothesis
/// that `x` belongs to class `b`. A non-positive numerator means the
/// hypothesis cannot explain another such edge and gives probability `0`; a
/// non-positive denominator is a contract violation of the (hypothesis-free)
/// counters and errors out.
pub fn cond_prob(
    c: &EdgeCounters,
    a: u8,
    b: u8,
    x_index: u32,
    p: &InstanceParams,
) -> Result<f64, ExperimentError> {
    if !(1..=2).contains(&a) || !(1..=2).contains(&b) {
        return Err(ExperimentError::InvalidConfig(format!(
            "classes are 1 or 2, got a = {a}, b = {b}"
        )));
    }
    if x_index < 1 || x_index > 2 * p.n {
        return Err(ExperimentError::InvalidConfig(format!(
            "pool index {x_index} outside 1..={}",
            2 * p.n
        )));
    }
    let span = u64::from(p.port_span());
    let ports_left = span as i128 - c.at_x(x_index) as i128;
    let slots_left = (u64::from(p.n) * span) as i128 - c.from_class(a) as i128;
    if ports_left <= 0 || slots_left <= 0 {
        return Err(ExperimentError::NonPositiveDenominator { x_index });
    }
    let mismatch = if a == b { 0 } else { i128::from(p.gap) };
    let numerator = i128::from(p.heavy) - mismatch - c.to_x(a, x_index) as i128;
    if numerator <= 0 {
        return Ok(0.0);
    }
    Ok(numerator as f64 / (ports_left as f64 * slots_left as f64))
}

/// Per-step likelihood-ratio bound between two splits differing by one
/// swapped pair, valid while every touched pool node has at most `τ·D`
/// revealed in-ports: `1 + d/(D(1 − d/D − τ))`. Requires `d/D + τ < 1`.
pub fn swap_ratio_bound(p: &InstanceParams, tau: f64) -> Result<f64, ExperimentError> {
    let heavy = f64::from(p.heavy);
    let gap = f64::from(p.gap);
    if !(0.0..1.0).contains(&tau) || gap / heavy + tau >= 1.0 {
        return Err(ExperimentError::InvalidConfig(format!(
            "need d/D + tau < 1, got {} + {tau}",
            gap / heavy
        )));
    }
    Ok(1.0 + gap / (heavy * (1.0 - gap / heavy - tau)))
}

// ---------------------------------------------------------------------------
// Posterior over splits
// ---------------------------------------------------------------------------

/// Posterior distribution over the `C(2n, n)` candidate splits, in
/// lexicographic split order.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct SplitPosterior {
    /// All splits (sorted index vectors), lexicographically ordered.
    pub splits: Vec<Vec<u32>>,
    /// Posterior probability of each, summing to 1.
    pub probs: Vec<f64>,
}

impl SplitPosterior {
    /// Posterior probability of a specific split.
    #[must_use]
    pub fn prob_of(&self, sp: &[u32]) -> Option<f64> {
        let i = self.splits.binary_search_by(|s| s.as_slice().cmp(sp)).ok()?;
        Some(self.probs[i])
    }
}

/// All `k`-subsets of `{1..m}` in lexicographic order.
fn subsets(m: u32, k: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (1..=k).collect();
    if k == 0 || k > m {
        return vec![cur];
    }
    loop {
        out.push(cur.clone());
        // Advance: find the rightmost slot that can still move up.
        let mut i = k as usize;
        while i > 0 && cur[i - 1] == m - (k - i as u32) {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k as usize {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Exact posterior over splits given a transcript, under the uniform prior
/// the instance sampler implements. Works in log-space; the formula's
/// denominators are hypothesis-independent and cancel, so only numerators
/// enter. Supported for `2n ≤ 16` ([`ExperimentError::EnumerationTooLarge`]
/// otherwise).
pub fn posterior_splits(
    p: &InstanceParams,
    t: &Transcript,
) -> Result<SplitPosterior, ExperimentError> {
    if 2 * p.n > 16 {
        return Err(ExperimentError::EnumerationTooLarge { m: 2 * p.n, n: p.n });
    }
    let splits = subsets(2 * p.n, p.n);
    // Membership masks make the per-event loop branch-free.
    let masks: Vec<u32> = splits
        .iter()
        .map(|s| s.iter().fold(0u32, |m, &i| m | (1 << (i - 1))))
        .collect();
    let mut logw = vec![0.0f64; splits.len()];
    let mut counters = EdgeCounters::new(p);
    for ev in t.events() {
        let Some(r) = counters.reveal_of(p, ev) else { continue };
        let already = counters.to_x(r.y_class, r.x_index) as i128;
        // Numerator under each hypothesis for x's class.
        let num_same = i128::from(p.heavy) - already;
        let num_diff = i128::from(p.heavy) - i128::from(p.gap) - already;
        let ln_of = |v: i128| {
            if v <= 0 {
                f64::NEG_INFINITY
            } else {
                (v as f64).ln()
            }
        };
        let (ln_same, ln_diff) = (ln_of(num_same), ln_of(num_diff));
        let bit = 1u32 << (r.x_index - 1);
        for (w, &mask) in logw.iter_mut().zip(&masks) {
            let x_in_one = mask & bit != 0;
            let same = (r.y_class == 1) == x_in_one;
            *w += if same { ln_same } else { ln_diff };
        }
        counters.commit(&r);
    }
    let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(ExperimentError::InvalidConfig(
            "transcript is impossible under every split".into(),
        ));
    }
    let weights: Vec<f64> = logw.iter().map(|&w| (w - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| w / total).collect();
    Ok(SplitPosterior { splits, probs })
}

// ---------------------------------------------------------------------------
// Frequency vs formula
// ---------------------------------------------------------------------------

/// One outcome bin of the frequency experiment: a full response sequence
/// together with the class pattern of the pool nodes it touched (in
/// first-touch order).
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct FrequencyBin {
    /// The responses, in script order.
    pub responses: Vec<Response>,
    /// True classes of the touched pool nodes, first-touch order.
    pub pattern: Vec<u8>,
    /// Trials that produced this bin.
    pub observed: u64,
    /// Formula joint probability: pattern prior × reveal factors.
    pub expected_joint: f64,
    /// Product of the reveal factors alone (the probability of the response
    /// sequence *given* the pattern, up to hypothesis-free constants).
    pub conditional: f64,
    /// Binomial z-score of `observed` against `expected_joint`.
    pub z: f64,
}

/// Result of [`frequency_vs_formula`].
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct FrequencyReport {
    /// Trials run.
    pub trials: u64,
    /// All observed bins, sorted by key.
    pub bins: Vec<FrequencyBin>,
    /// Largest |z| over the bins.
    pub max_abs_z: f64,
}

impl FrequencyReport {
    /// The bin with exactly these responses and pattern, if observed.
    #[must_use]
    pub fn bin(&self, responses: &[Response], pattern: &[u8]) -> Option<&FrequencyBin> {
        self.bins
            .iter()
            .find(|b| b.responses == responses && b.pattern == pattern)
    }
}

/// Per-chunk tally of trial outcomes: bin key → (responses, pattern, count).
type BinTally = BTreeMap<String, (Vec<Response>, Vec<u8>, u64)>;

/// Runs `script` against `trials` freshly sampled instances of `p` and bins
/// the outcomes by (response sequence, first-touch class pattern), comparing
/// each bin's frequency with the conditional-probability formula's joint
/// prediction. Scripts should stick to adjacency/degree queries (jumps would
/// explode the bin space); every node is covered, and the budget unlimited.
pub fn frequency_vs_formula(
    p: &InstanceParams,
    script: &[Query],
    trials: u64,
    seed: u64,
) -> Result<FrequencyReport, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidConfig("trials must be >= 1".into()));
    }
    // Count outcomes in parallel chunks, merging sorted maps.
    let chunk = 4096u64;
    let starts: Vec<u64> = (0..trials).step_by(chunk as usize).collect();
    let counted: Result<Vec<BinTally>, ExperimentError> =
        starts
            .par_iter()
            .map(|&start| {
                let mut local: BinTally = BTreeMap::new();
                for i in start..(start + chunk).min(trials) {
                    let sigma = sample_sigma(p, &mut trial_rng(seed, 2 * i));
                    let g = build_instance(p, &sigma)?;
                    let mut o = ArcOracle::new(
                        &g,
                        Budget::unlimited(),
                        InitialCoverage::All,
                        child_seed(seed, 2 * i + 1),
                    );
                    let mut responses = Vec::with_capacity(script.len());
                    let mut counters = EdgeCounters::new(p);
                    let mut pattern = Vec::new();
                    let mut touched: HashSet<u32> = HashSet::new();
                    for &q in script {
                        let r = o.issue(q)?;
                        responses.push(r);
                        if let Some(rv) = counters.absorb_event(p, &Event { q, r }) {
                            if touched.insert(rv.x_index) {
                                let in_one = sigma.sp.binary_search(&rv.x_index).is_ok();
                                pattern.push(if in_one { 1 } else { 2 });
                            }
                        }
                    }
                    let key = format!(
                        "{}|{}",
                        serde_json::to_string(&responses).expect("serializable"),
                        serde_json::to_string(&pattern).expect("serializable"),
                    );
                    let entry = local.entry(key).or_insert((responses, pattern, 0));
                    entry.2 += 1;
                }
                Ok(local)
            })
            .collect();
    let mut merged: BTreeMap<String, (Vec<Response>, Vec<u8>, u64)> = BTreeMap::new();
    for local in counted? {
        for (k, (resp, pat, c)) in local {
            merged.entry(k).or_insert((resp, pat, 0)).2 += c;
        }
    }

    let mut bins = Vec::with_capacity(merged.len());
    let mut max_abs_z = 0.0f64;
    for (_, (responses, pattern, observed)) in merged {
        let (joint, conditional) = bin_probability(p, script, &responses, &pattern)?;
        let z = if joint > 0.0 && joint < 1.0 {
            let mean = trials as f64 * joint;
            (observed as f64 - mean) / (mean * (1.0 - joint)).sqrt()
        } else if joint == 0.0 {
            f64::INFINITY // an impossible bin was observed
        } else {
            0.0
        };
        max_abs_z = max_abs_z.max(z.abs());
        bins.push(FrequencyBin {
            responses,
            pattern,
            observed,
            expected_joint: joint,
            conditional,
            z,
        });
    }
    Ok(FrequencyReport { trials, bins, max_abs_z })
}

/// Joint and conditional formula probabilities of one (responses, pattern)
/// outcome of `script`.
fn bin_probability(
    p: &InstanceParams,
    script: &[Query],
    responses: &[Response],
    pattern: &[u8],
) -> Result<(f64, f64), ExperimentError> {
    if script.len() != responses.len() {
        return Err(ExperimentError::InvalidConfig(
            "responses do not match the script".into(),
        ));
    }
    // Prior of the first-touch class pattern: sequentially, a fresh pool
    // node is class 1 with probability (n − ones so far)/(2n − touched).
    let mut prior = 1.0f64;
    let (mut ones, mut touched) = (0u32, 0u32);
    for &b in pattern {
        let left = match b {
            1 => u64::from(p.n - ones),
            2 => u64::from(p.n - (touched - ones)),
            _ => {
                return Err(ExperimentError::InvalidConfig(format!(
                    "pattern classes are 1 or 2, got {b}"
                )))
            }
        };
        prior *= left as f64 / f64::from(2 * p.n - touched);
        ones += u32::from(b == 1);
        touched += 1;
    }
    // Reveal factors under the pattern's class assignment.
    let mut counters = EdgeCounters::new(p);
    let mut class_of: HashMap<u32, u8> = HashMap::new();
    let mut next = 0usize;
    let mut conditional = 1.0f64;
    for (&q, &r) in script.iter().zip(responses) {
        let Some(rv) = counters.reveal_of(p, &Event { q, r }) else { continue };
        let b = *class_of.entry(rv.x_index).or_insert_with(|| {
            let b = pattern.get(next).copied().unwrap_or(0);
            next += 1;
            b
        });
        if b == 0 {
            return Err(ExperimentError::InvalidConfig(
                "pattern shorter than the touched pool nodes".into(),
            ));
        }
        conditional *= cond_prob(&counters, rv.y_class, b, rv.x_index, p)?;
        counters.commit(&rv);
    }
    if next != pattern.len() {
        return Err(ExperimentError::InvalidConfig(
            "pattern longer than the touched pool nodes".into(),
        ));
    }
    Ok((prior * conditional, conditional))
}

// ---------------------------------------------------------------------------
// Success curve
// ---------------------------------------------------------------------------

/// Split-recovery strategy of the success experiment.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Walks from the source, then threshold recovery on the endpoint
    /// frequencies (partial estimates are used when the budget runs dry).
    Mc,
    /// Splits the budget evenly over the pool nodes, samples unrevealed
    /// in-ports of each, and classifies by the class-1 fraction against the
    /// midpoint `(D − d/2)/(2D − d + r)`.
    PortCount,
}

/// Configuration of [`success_curve`].
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SuccessCurveConfig {
    /// Instance family.
    pub params: InstanceParams,
    /// Budget scales to sweep; the budget at `γ` is `⌊γ·n·D⌋` queries.
    pub gammas: Vec<f64>,
    /// Independent instances per grid point.
    pub trials: u64,
    /// The recovery strategy.
    pub strategy: Strategy,
    /// Walk cap for [`Strategy::Mc`] (the budget usually binds first).
    pub walk_cap: u64,
    /// Master seed; every (grid point, trial) derives its own streams.
    pub seed: u64,
}

impl SuccessCurveConfig {
    /// Default walk cap for the Monte Carlo strategy.
    pub const DEFAULT_WALK_CAP: u64 = 50_000;

    /// Convenience constructor with the default walk cap.
    #[must_use]
    pub fn new(
        params: InstanceParams,
        gammas: Vec<f64>,
        trials: u64,
        strategy: Strategy,
        seed: u64,
    ) -> Self {
        Self {
            params,
            gammas,
            trials,
            strategy,
            walk_cap: Self::DEFAULT_WALK_CAP,
            seed,
        }
    }
}

/// One grid point of the curve.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct SuccessPoint {
    /// Budget scale.
    pub gamma: f64,
    /// Trials run.
    pub trials: u64,
    /// Trials whose recovered split was exactly right.
    pub successes: u64,
    /// Mean charged queries per trial.
    pub mean_queries: f64,
}

fn run_success_trial(
    cfg: &SuccessCurveConfig,
    gamma: f64,
    idx: u64,
) -> Result<(bool, u64), ExperimentError> {
    let p = &cfg.params;
    let sigma = sample_sigma(p, &mut trial_rng(cfg.seed, 4 * idx));
    let g = build_instance(p, &sigma)?;
    let budget = Budget::from_gamma(gamma, u64::from(p.n), u64::from(p.heavy));
    match cfg.strategy {
        Strategy::Mc => {
            let mut o = ArcOracle::new(
                &g,
                budget,
                InitialCoverage::Nodes(vec![p.s_label()]),
                child_seed(cfg.seed, 4 * idx + 1),
            );
            let r = mc_estimate(
                &mut o,
                p.s_label(),
                p.alpha,
                &McConfig { walks: cfg.walk_cap, seed: child_seed(cfg.seed, 4 * idx + 2) },
            )?;
            let guess = split_by_threshold(&r.estimate, p);
            Ok((guess == sigma.sp, o.query_count()))
        }
        Strategy::PortCount => {
            let mut o = ArcOracle::new(
                &g,
                budget,
                InitialCoverage::All,
                child_seed(cfg.seed, 4 * idx + 1),
            );
            let mut rng = trial_rng(cfg.seed, 4 * idx + 3);
            let share = budget.limit / u64::from(2 * p.n);
            let mut scored = Vec::with_capacity(2 * p.n as usize);
            'pool: for i in 1..=2 * p.n {
                let x = p.x_label(i);
                let (mut hits, mut draws) = (0u64, 0u64);
                for _ in 0..share {
                    match o.random_uncovered_adj(x, Direction::In, &mut rng) {
                        Ok((_, Response::Port { v: y, .. })) => {
                            draws += 1;
                            if p.kind_of(y) == Some(LabelKind::Y1) {
                                hits += 1;
                            }
                        }
                        Ok(_) => unreachable!("open in-ports answer with a port"),
                        Err(OracleError::NoUncoveredPort { .. }) => break,
                        Err(OracleError::BudgetExhausted) => {
                            scored.push((i, fraction(hits, draws)));
                            break 'pool;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                scored.push((i, fraction(hits, draws)));
            }
            for i in scored.len() as u32 + 1..=2 * p.n {
                scored.push((i, 0.0));
            }
            let threshold = (f64::from(p.heavy) - f64::from(p.gap) / 2.0)
                / f64::from(p.port_span() + p.pad);
            let guess = pick_top_n(&scored, p.n as usize, threshold);
            Ok((guess == sigma.sp, o.query_count()))
        }
    }
}

fn fraction(hits: u64, draws: u64) -> f64 {
    if draws == 0 {
        0.0
    } else {
        hits as f64 / draws as f64
    }
}

/// Sweeps the γ grid, running `trials` independent instances per point (in
/// parallel; results are independent of the thread count) and counting exact
/// split recoveries.
pub fn success_curve(cfg: &SuccessCurveConfig) -> Result<Vec<SuccessPoint>, ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::InvalidConfig("trials must be >= 1".into()));
    }
    let mut points = Vec::with_capacity(cfg.gammas.len());
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(ExperimentError::InvalidConfig(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        let outcomes: Result<Vec<(bool, u64)>, ExperimentError> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_success_trial(cfg, gamma, gi as u64 * cfg.trials + t))
            .collect();
        let outcomes = outcomes?;
        let successes = outcomes.iter().filter(|&&(ok, _)| ok).count() as u64;
        let mean_queries =
            outcomes.iter().map(|&(_, q)| q as f64).sum::<f64>() / cfg.trials as f64;
        points.push(SuccessPoint { gamma, trials: cfg.trials, successes, mean_queries });
    }
    Ok(points)
}

/// Renders a curve as CSV: a `# {config json}` comment line, a header, one
/// row per grid point. Byte-stable for fixed config.
#[must_use]
pub fn success_curve_csv(cfg: &SuccessCurveConfig, points: &[SuccessPoint]) -> String {
    let mut s = format!(
        "# {}\n",
        serde_json::to_string(cfg).expect("config serializes")
    );
    s.push_str("gamma,trials,successes,mean_queries\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.gamma, p.trials, p.successes, p.mean_queries
        ));
    }
    s
}

/// Chance of guessing the split blind: `1/C(2n, n)`.
#[must_use]
pub fn blind_guess_probability(p: &InstanceParams) -> f64 {
    1.0 / binomial(u64::from(2 * p.n), u64::from(p.n))
}
