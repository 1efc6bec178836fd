//! Exact single-source PPR and the hard family's closed-form values.
//!
//! The walk model: starting at the source, at each node stop with probability
//! α, otherwise move through a uniformly random out-port; a node without
//! out-ports absorbs the walk. `π_s(t)` is the probability the walk from `s`
//! terminates at `t`, so `π_s` is a probability distribution over nodes.
//!
//! The solver propagates *in-flight mass*: iteration `k` holds the
//! probability of being at each node after `k` surviving steps, settles
//! `α · mass` (all of it at a dangling node), and forwards the rest in equal
//! port shares. Total in-flight mass strictly decreases — by a factor at
//! least `1−α` per sweep — so the loop ends once it drops below `tol`, with
//! `‖π̂ − π‖₁ ≤ tol`.
//!
//! On instances of the hard family the values have closed forms (writing
//! `S = 2D−d+r` with `r` the padding size):
//!
//! | class | value                  |
//! |-------|------------------------|
//! | `s`   | `α`                    |
//! | `Y₁`  | `α(1−α)/n`             |
//! | `Y₂`  | `0`                    |
//! | `X₁`  | `(1−α)²·D/(S·n)`       |
//! | `X₂`  | `(1−α)²·(D−d)/(S·n)`   |
//! | `Z_X` | `0`                    |
//! | `Z_Y` | `(1−α)²/S`             |
//!
//! In particular `π(x₂)/π(x₁) = (D−d)/D` identically — the detection gap the
//! experiments revolve around.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{LabeledMultigraph, NodeId};
use crate::instance::{InstanceParams, NodeClass};

/// Default stopping tolerance of [`exact_ppr`].
pub const DEFAULT_TOL: f64 = 1e-12;

/// Hard cap on solver sweeps; hitting it is reported as divergence.
pub const ITERATION_CAP: u64 = 1_000_000;

/// A dense PPR vector indexed by node label.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PprVector {
    /// `values[v.idx()]` is the mass of node `v`.
    pub values: Vec<f64>,
}

impl PprVector {
    /// All-zero vector over `n` nodes.
    #[must_use]
    pub fn zeros(n: u32) -> Self {
        PprVector {
            values: vec![0.0; n as usize],
        }
    }

    /// Mass at node `v`.
    #[must_use]
    pub fn get(&self, v: NodeId) -> f64 {
        self.values[v.idx()]
    }

    /// Number of nodes.
    #[must_use]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the vector covers no nodes.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total mass.
    #[must_use]
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `‖self − other‖₁`. Panics on length mismatch.
    #[must_use]
    pub fn l1_distance(&self, other: &PprVector) -> f64 {
        assert_eq!(self.len(), other.len(), "vector lengths differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// `max_v |self(v) − other(v)|`. Panics on length mismatch.
    #[must_use]
    pub fn linf_distance(&self, other: &PprVector) -> f64 {
        assert_eq!(self.len(), other.len(), "vector lengths differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV form with a `node,value` header and one line per node, in label
    /// order. Float formatting is Rust's shortest round-trip form, so the
    /// bytes are deterministic.
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,value\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, v));
        }
        s
    }
}

/// Solver failures.
#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    /// Bad source node, α, or tolerance.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The sweep cap was reached before the in-flight mass dropped under
    /// `tol` (practically unreachable for sane α and tolerances).
    #[error("no convergence after {iterations} sweeps; in-flight mass still {inflight:.3e}")]
    Diverged {
        /// Sweeps performed.
        iterations: u64,
        /// Remaining in-flight mass.
        inflight: f64,
    },
}

fn exact_ppr_core(
    g: &LabeledMultigraph,
    s: NodeId,
    alpha: f64,
    tol: f64,
    mut on_sweep: impl FnMut(f64),
) -> Result<PprVector, ExactError> {
    if !g.contains(s) {
        return Err(ExactError::InvalidInput(format!(
            "source {s} outside 1..={}",
            g.node_count()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ExactError::InvalidInput(format!(
            "alpha = {alpha} must lie strictly inside (0, 1)"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(ExactError::InvalidInput(format!("tol = {tol} must be positive")));
    }

    let n = g.node_count() as usize;
    let mut settled = vec![0.0f64; n];
    let mut inflight = vec![0.0f64; n];
    inflight[s.idx()] = 1.0;
    let mut total = 1.0f64;
    let mut iterations = 0u64;

    while total > tol {
        iterations += 1;
        if iterations > ITERATION_CAP {
            return Err(ExactError::Diverged {
                iterations: ITERATION_CAP,
                inflight: total,
            });
        }
        let mut next = vec![0.0f64; n];
        for v in 0..n {
            let m = inflight[v];
            if m == 0.0 {
                continue;
            }
            let entries = g.out_entries(NodeId(v as u32 + 1));
            if entries.is_empty() {
                settled[v] += m; // absorbing: the walk must stop here
            } else {
                settled[v] += alpha * m;
                let share = (1.0 - alpha) * m / entries.len() as f64;
                for &(w, _) in entries {
                    next[w.idx()] += share;
                }
            }
        }
        inflight = next;
        total = inflight.iter().sum();
        on_sweep(total);
    }
    Ok(PprVector { values: settled })
}

/// Exact PPR from `s` at decay α, to within `‖π̂ − π‖₁ ≤ tol`.
pub fn exact_ppr(
    g: &LabeledMultigraph,
    s: NodeId,
    alpha: f64,
    tol: f64,
) -> Result<PprVector, ExactError> {
    exact_ppr_core(g, s, alpha, tol, |_| {})
}

/// Like [`exact_ppr`] but also returns the total in-flight mass after each
/// sweep — the sequence whose strict decrease is the solver's invariant.
pub fn exact_ppr_with_trace(
    g: &LabeledMultigraph,
    s: NodeId,
    alpha: f64,
    tol: f64,
) -> Result<(PprVector, Vec<f64>), ExactError> {
    let mut trace = Vec::new();
    let v = exact_ppr_core(g, s, alpha, tol, |t| trace.push(t))?;
    Ok((v, trace))
}

/// The closed-form per-class PPR value at these parameters. With
/// `padded = false` the padding term is dropped from the denominator (the
/// value on the unpadded instance of the same `(n, D, d)`); `Z` classes only
/// exist padded and have fixed values `0` / `(1−α)²/(2D−d+r)`.
#[must_use]
pub fn closed_form_ppr(p: &InstanceParams, class: NodeClass, padded: bool) -> f64 {
    let a = p.alpha;
    let r = if padded { p.pad } else { 0 };
    let span = (p.port_span() + r) as f64;
    let n = p.n as f64;
    match class {
        NodeClass::S => a,
        NodeClass::Y1 => a * (1.0 - a) / n,
        NodeClass::Y2 | NodeClass::ZX => 0.0,
        NodeClass::X1 => (1.0 - a).powi(2) * p.heavy as f64 / (span * n),
        NodeClass::X2 => (1.0 - a).powi(2) * (p.heavy - p.gap) as f64 / (span * n),
        NodeClass::ZY => {
            if padded && p.pad > 0 {
                (1.0 - a).powi(2) / span
            } else {
                0.0
            }
        }
    }
}

/// The full expected PPR vector of an instance with split `sp` (honoring
/// `params.pad`): every node gets its class's closed-form value.
#[must_use]
pub fn closed_form_vector(p: &InstanceParams, sp: &[u32]) -> PprVector {
    let padded = p.pad > 0;
    let values = (1..=p.node_count())
        .map(|l| {
            let class = p
                .class_of(sp, NodeId(l))
                .expect("label inside the instance range");
            closed_form_ppr(p, class, padded)
        })
        .collect();
    PprVector { values }
}
