//! The parametric hard-instance family and its random seed structure.
//!
//! An instance `U(n, D, d)` has `4n + 1` nodes: a source `s`, two hidden
//! groups `X₁, X₂` of size `n` inside a visible pool `X` of size `2n`, and two
//! visible groups `Y₁, Y₂` of size `n`. Labels are fixed:
//!
//! | class | labels            |
//! |-------|-------------------|
//! | `s`   | `1`               |
//! | `X`   | `2 ..= 2n+1`      |
//! | `Y₁`  | `2n+2 ..= 3n+1`   |
//! | `Y₂`  | `3n+2 ..= 4n+1`   |
//!
//! `s` points at every `Y₁` node (its `i`-th out-port reaches the `i`-th `Y₁`
//! node's in-port 1). Each `X` node has `2D−d` in-edges: `D` from `Y₁` and
//! `D−d` from `Y₂` if it lies in `X₁`, reversed if in `X₂`. Each `Y` node has
//! exactly `2D−d` out-edges, all into `X`. `Y₂` has no in-edges at all. The
//! hidden object is the split of `X` into `X₁/X₂`; everything else about a
//! node is determined by its label.
//!
//! The randomness is an explicit [`SigmaSample`]: the split `SP`, one in-port
//! permutation per `X` node, one out-slot permutation per `Y` class, and four
//! matching bijections that stitch out-slots to in-slots class-by-class. All
//! components are uniform and independent, so instance distribution questions
//! reduce to counting over σ.
//!
//! The *r-padded* variant `U(r)` appends `r` nodes `Z_X` (labels
//! `4n+2 ..= 4n+r+1`, each pointing at every `X` node) and `r` nodes `Z_Y`
//! (labels `4n+r+2 ..= 4n+2r+1`, each receiving from every `Y` node), raising
//! every `X` in-degree and `Y` out-degree to `2D−d+r` without touching the
//! hidden split. Padding dilutes the per-node PPR values — the knob the
//! relative-error parameter choice turns.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeRef, GraphBuilder, GraphError, LabeledMultigraph, NodeId};

/// Sizing/shape parameters of one instance.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct InstanceParams {
    /// Group size: `|X₁| = |X₂| = |Y₁| = |Y₂| = n`.
    pub n: u32,
    /// Heavy in-degree `D`: same-class in-edges per `X` node.
    pub heavy: u32,
    /// Degree gap `d`: an `X` node has `D` in-edges from its own class's `Y`
    /// side and `D−d` from the other.
    pub gap: u32,
    /// Padding size `r` (`0` = unpadded).
    pub pad: u32,
    /// Decay parameter α of the walk, in `(0, 1)`.
    pub alpha: f64,
}

/// Error-budget parameters used by the parameter-choice routines and echoed
/// into experiment configs.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ErrorParams {
    /// Additive estimation error target ε₀.
    pub eps: f64,
    /// Relative-regime detection threshold δ₀.
    pub delta: f64,
    /// Budget-exponent constant `c ∈ (0, ½]` of the relative regime.
    pub c: f64,
    /// Allowed failure probability of an estimator.
    pub p_f: f64,
    /// Degree exponent β ∈ (0, 1) of the additive regime.
    pub beta: f64,
    /// Scale constant `C` of the additive regime; `None` means the default
    /// `(1−α)²/16` at the point of use.
    pub c_scale: Option<f64>,
}

/// The explicit randomness behind one instance.
///
/// Components (all uniform, all independent):
///
/// - `sp`: the hidden split — a sorted `n`-subset of `{1..2n}`; `X` index `i`
///   belongs to `X₁` iff `i ∈ sp`.
/// - `p_x[i]`: a permutation of `{1..2D−d}` per `X` node; in-port `k` of an
///   `X₁` node is `Y₁`-sourced iff `p_x[i][k] ≤ D` (reversed for `X₂`).
/// - `p_y1`, `p_y2`: permutations of `{1..n(2D−d)}` over each `Y` class's
///   out-slots (slot `(i,k)` has flat index `(2D−d)(i−1)+k`); a slot targets
///   the same-side `X` class iff its value is `≤ nD`.
/// - `s11`, `s12`, `s21`, `s22`: bijections matching the naturally-ordered
///   out-slots of `Y_a` aimed at `X_b` to the naturally-ordered in-slots of
///   `X_b` sourced from `Y_a` (sizes `nD` when `a = b`, `n(D−d)` otherwise);
///   out-slot `j` connects to in-slot `s_ab[j]`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SigmaSample {
    /// Hidden split: sorted `X` indices belonging to `X₁`.
    pub sp: Vec<u32>,
    /// Per-`X`-node in-port rank permutations.
    pub p_x: Vec<Vec<u32>>,
    /// `Y₁` out-slot rank permutation.
    pub p_y1: Vec<u32>,
    /// `Y₂` out-slot rank permutation.
    pub p_y2: Vec<u32>,
    /// Matching `Y₁ → X₁` (size `nD`).
    pub s11: Vec<u32>,
    /// Matching `Y₁ → X₂` (size `n(D−d)`).
    pub s12: Vec<u32>,
    /// Matching `Y₂ → X₁` (size `n(D−d)`).
    pub s21: Vec<u32>,
    /// Matching `Y₂ → X₂` (size `nD`).
    pub s22: Vec<u32>,
}

/// What a label is, independent of the hidden split.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// The source node.
    S,
    /// A pool node (class within the pool is hidden).
    X,
    /// A `Y₁` node.
    Y1,
    /// A `Y₂` node.
    Y2,
    /// A padding node pointing into `X`.
    ZX,
    /// A padding node receiving from `Y`.
    ZY,
}

/// Full node classification once a split is fixed.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    /// The source node.
    S,
    /// Pool node on the `Y₁`-heavy side.
    X1,
    /// Pool node on the `Y₂`-heavy side.
    X2,
    /// A `Y₁` node.
    Y1,
    /// A `Y₂` node.
    Y2,
    /// Padding into `X`.
    ZX,
    /// Padding out of `Y`.
    ZY,
}

/// Failures of validation, construction, or parameter choice.
#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    /// Shape parameters violate the type invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// No valid instance exists for the requested error budget.
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    /// A σ component has the wrong length or is not a permutation.
    #[error("malformed sigma sample: {0}")]
    MalformedSigma(String),
    /// Internal graph construction failed (indicates a builder bug).
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
}

impl InstanceParams {
    /// Validated constructor: `n ≥ 2`, `D ≥ ⌈3d/2⌉`, `D ≥ 1`, `α ∈ (0,1)`.
    pub fn new(n: u32, heavy: u32, gap: u32, pad: u32, alpha: f64) -> Result<Self, InstanceError> {
        if n < 2 {
            return Err(InstanceError::InvalidParams(format!(
                "group size n = {n} must be at least 2"
            )));
        }
        Self::for_diagnostics(n, heavy, gap, pad, alpha)
    }

    /// Like [`new`](Self::new) but allows `n = 1`, used by exhaustive
    /// enumeration checks where the full σ space must stay countable. The
    /// construction is well-defined at `n = 1`; the `n ≥ 2` bound belongs to
    /// the detection problem, not the builder.
    pub fn for_diagnostics(
        n: u32,
        heavy: u32,
        gap: u32,
        pad: u32,
        alpha: f64,
    ) -> Result<Self, InstanceError> {
        if n < 1 {
            return Err(InstanceError::InvalidParams("group size n must be positive".into()));
        }
        if heavy < 1 {
            return Err(InstanceError::InvalidParams("heavy degree D must be positive".into()));
        }
        if heavy < (3 * gap).div_ceil(2) {
            return Err(InstanceError::InvalidParams(format!(
                "heavy degree D = {heavy} must be at least ⌈3d/2⌉ = {} for gap d = {gap}",
                (3 * gap).div_ceil(2)
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(InstanceError::InvalidParams(format!(
                "alpha = {alpha} must lie strictly inside (0, 1)"
            )));
        }
        Ok(InstanceParams { n, heavy, gap, pad, alpha })
    }

    /// `2D − d`: in-edges per `X` node and out-edges per `Y` node before
    /// padding.
    #[must_use]
    pub fn port_span(&self) -> u32 {
        2 * self.heavy - self.gap
    }

    /// Total nodes including padding: `4n + 2r + 1`.
    #[must_use]
    pub fn node_count(&self) -> u32 {
        4 * self.n + 2 * self.pad + 1
    }

    /// Total edges including padding: `2n(2D − d + 2r) + n`.
    #[must_use]
    pub fn edge_count(&self) -> u64 {
        2 * self.n as u64 * (self.port_span() as u64 + 2 * self.pad as u64) + self.n as u64
    }

    /// The source node label.
    #[must_use]
    pub fn s_label(&self) -> NodeId {
        NodeId(1)
    }

    /// Label of the `i`-th pool node, `i ∈ 1..=2n`.
    #[must_use]
    pub fn x_label(&self, i: u32) -> NodeId {
        debug_assert!(i >= 1 && i <= 2 * self.n);
        NodeId(1 + i)
    }

    /// Label of the `i`-th node of `Y_a`, `a ∈ {1,2}`, `i ∈ 1..=n`.
    #[must_use]
    pub fn y_label(&self, a: u8, i: u32) -> NodeId {
        debug_assert!(a == 1 || a == 2);
        debug_assert!(i >= 1 && i <= self.n);
        NodeId(2 * self.n + 1 + (a as u32 - 1) * self.n + i)
    }

    /// Label of the `j`-th `Z_X` padding node, `j ∈ 1..=r`.
    #[must_use]
    pub fn z_x_label(&self, j: u32) -> NodeId {
        debug_assert!(j >= 1 && j <= self.pad);
        NodeId(4 * self.n + 1 + j)
    }

    /// Label of the `j`-th `Z_Y` padding node, `j ∈ 1..=r`.
    #[must_use]
    pub fn z_y_label(&self, j: u32) -> NodeId {
        debug_assert!(j >= 1 && j <= self.pad);
        NodeId(4 * self.n + self.pad + 1 + j)
    }

    /// Pool index of a label (inverse of [`x_label`](Self::x_label)).
    #[must_use]
    pub fn x_index(&self, v: NodeId) -> Option<u32> {
        (v.0 >= 2 && v.0 <= 2 * self.n + 1).then(|| v.0 - 1)
    }

    /// `(class, index)` of a `Y` label.
    #[must_use]
    pub fn y_index(&self, v: NodeId) -> Option<(u8, u32)> {
        let n = self.n;
        if v.0 >= 2 * n + 2 && v.0 <= 3 * n + 1 {
            Some((1, v.0 - 2 * n - 1))
        } else if v.0 >= 3 * n + 2 && v.0 <= 4 * n + 1 {
            Some((2, v.0 - 3 * n - 1))
        } else {
            None
        }
    }

    /// Split-independent classification of a label.
    #[must_use]
    pub fn kind_of(&self, v: NodeId) -> Option<LabelKind> {
        let (n, r) = (self.n, self.pad);
        match v.0 {
            1 => Some(LabelKind::S),
            l if l >= 2 && l <= 2 * n + 1 => Some(LabelKind::X),
            l if l >= 2 * n + 2 && l <= 3 * n + 1 => Some(LabelKind::Y1),
            l if l >= 3 * n + 2 && l <= 4 * n + 1 => Some(LabelKind::Y2),
            l if l >= 4 * n + 2 && l <= 4 * n + r + 1 => Some(LabelKind::ZX),
            l if l >= 4 * n + r + 2 && l <= 4 * n + 2 * r + 1 => Some(LabelKind::ZY),
            _ => None,
        }
    }

    /// Classification of a label under a concrete split (`sp` = sorted `X₁`
    /// indices).
    #[must_use]
    pub fn class_of(&self, sp: &[u32], v: NodeId) -> Option<NodeClass> {
        Some(match self.kind_of(v)? {
            LabelKind::S => NodeClass::S,
            LabelKind::X => {
                let i = self.x_index(v)?;
                if sp.binary_search(&i).is_ok() {
                    NodeClass::X1
                } else {
                    NodeClass::X2
                }
            }
            LabelKind::Y1 => NodeClass::Y1,
            LabelKind::Y2 => NodeClass::Y2,
            LabelKind::ZX => NodeClass::ZX,
            LabelKind::ZY => NodeClass::ZY,
        })
    }

    /// The label-determined `(in-degree, out-degree)` table of the instance,
    /// indexed by `label − 1`. Public structural knowledge: every instance of
    /// the family with these parameters has exactly these degrees, whatever
    /// the hidden split — which is what lets oracle adapters answer degree
    /// queries at zero cost.
    #[must_use]
    pub fn degree_profile(&self) -> Vec<(u32, u32)> {
        let (n, r) = (self.n, self.pad);
        let span = self.port_span();
        let mut profile = Vec::with_capacity(self.node_count() as usize);
        profile.push((0, n)); // s
        for _ in 0..2 * n {
            profile.push((span + r, 0)); // X
        }
        for _ in 0..n {
            profile.push((1, span + r)); // Y₁
        }
        for _ in 0..n {
            profile.push((0, span + r)); // Y₂
        }
        for _ in 0..r {
            profile.push((0, 2 * n)); // Z_X
        }
        for _ in 0..r {
            profile.push((2 * n, 0)); // Z_Y
        }
        profile
    }
}

impl ErrorParams {
    /// Validated constructor. Ranges: `ε, δ, p_f ∈ (0,1)`, `c ∈ (0, ½]`,
    /// `β ∈ (0,1)`, `C > 0` when given.
    pub fn new(
        eps: f64,
        delta: f64,
        c: f64,
        p_f: f64,
        beta: f64,
        c_scale: Option<f64>,
    ) -> Result<Self, InstanceError> {
        let open01 = |x: f64, name: &str| -> Result<(), InstanceError> {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(InstanceError::InvalidParams(format!(
                    "{name} = {x} must lie strictly inside (0, 1)"
                )))
            }
        };
        open01(eps, "eps")?;
        open01(delta, "delta")?;
        open01(p_f, "p_f")?;
        open01(beta, "beta")?;
        if !(c > 0.0 && c <= 0.5) {
            return Err(InstanceError::InvalidParams(format!(
                "c = {c} must lie in (0, 1/2]"
            )));
        }
        if let Some(cs) = c_scale {
            if !(cs > 0.0 && cs.is_finite()) {
                return Err(InstanceError::InvalidParams(format!(
                    "C = {cs} must be positive and finite"
                )));
            }
        }
        Ok(ErrorParams { eps, delta, c, p_f, beta, c_scale })
    }
}

// ---------------------------------------------------------------------------
// σ sampling and validation
// ---------------------------------------------------------------------------

fn random_permutation(rng: &mut impl Rng, len: u32) -> Vec<u32> {
    let mut v: Vec<u32> = (1..=len).collect();
    v.shuffle(rng);
    v
}

/// Draws one uniform σ for the given parameters. Deterministic given the
/// generator state; experiments derive one generator per trial.
#[must_use]
pub fn sample_sigma(p: &InstanceParams, rng: &mut impl Rng) -> SigmaSample {
    let n = p.n;
    let span = p.port_span();
    let mut pool: Vec<u32> = (1..=2 * n).collect();
    pool.shuffle(rng);
    let mut sp: Vec<u32> = pool[..n as usize].to_vec();
    sp.sort_unstable();

    let p_x = (0..2 * n).map(|_| random_permutation(rng, span)).collect();
    let p_y1 = random_permutation(rng, n * span);
    let p_y2 = random_permutation(rng, n * span);
    let same = n * p.heavy;
    let cross = n * (p.heavy - p.gap);
    SigmaSample {
        sp,
        p_x,
        p_y1,
        p_y2,
        s11: random_permutation(rng, same),
        s12: random_permutation(rng, cross),
        s21: random_permutation(rng, cross),
        s22: random_permutation(rng, same),
    }
}

fn check_permutation(v: &[u32], len: u32, name: &str) -> Result<(), InstanceError> {
    if v.len() != len as usize {
        return Err(InstanceError::MalformedSigma(format!(
            "{name} has length {} but needs {len}",
            v.len()
        )));
    }
    let mut seen = vec![false; len as usize];
    for &x in v {
        if x < 1 || x > len || seen[(x - 1) as usize] {
            return Err(InstanceError::MalformedSigma(format!(
                "{name} is not a permutation of 1..={len}"
            )));
        }
        seen[(x - 1) as usize] = true;
    }
    Ok(())
}

/// Checks every σ component for shape and permutation validity.
pub fn validate_sigma(p: &InstanceParams, s: &SigmaSample) -> Result<(), InstanceError> {
    let n = p.n;
    let span = p.port_span();
    if s.sp.len() != n as usize {
        return Err(InstanceError::MalformedSigma(format!(
            "sp has {} entries but needs n = {n}",
            s.sp.len()
        )));
    }
    let mut prev = 0u32;
    for &i in &s.sp {
        if i < 1 || i > 2 * n || i <= prev {
            return Err(InstanceError::MalformedSigma(
                "sp must be strictly increasing inside 1..=2n".into(),
            ));
        }
        prev = i;
    }
    if s.p_x.len() != 2 * n as usize {
        return Err(InstanceError::MalformedSigma(format!(
            "p_x has {} rows but needs 2n = {}",
            s.p_x.len(),
            2 * n
        )));
    }
    for (i, row) in s.p_x.iter().enumerate() {
        check_permutation(row, span, &format!("p_x[{i}]"))?;
    }
    check_permutation(&s.p_y1, n * span, "p_y1")?;
    check_permutation(&s.p_y2, n * span, "p_y2")?;
    check_permutation(&s.s11, n * p.heavy, "s11")?;
    check_permutation(&s.s12, n * (p.heavy - p.gap), "s12")?;
    check_permutation(&s.s21, n * (p.heavy - p.gap), "s21")?;
    check_permutation(&s.s22, n * p.heavy, "s22")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Instance construction
// ---------------------------------------------------------------------------

fn add_padding(b: &mut GraphBuilder, p: &InstanceParams) -> Result<(), GraphError> {
    let (n, r) = (p.n, p.pad);
    let span = p.port_span();
    for j in 1..=r {
        let zx = p.z_x_label(j);
        for t in 1..=2 * n {
            b.add_edge(EdgeRef {
                src: zx,
                src_port: t,
                dst: p.x_label(t),
                dst_port: span + j,
            })?;
        }
    }
    for j in 1..=r {
        let zy = p.z_y_label(j);
        for u in 1..=2 * n {
            let y = if u <= n {
                p.y_label(1, u)
            } else {
                p.y_label(2, u - n)
            };
            b.add_edge(EdgeRef {
                src: y,
                src_port: span + j,
                dst: zy,
                dst_port: u,
            })?;
        }
    }
    Ok(())
}

/// Builds the instance described by `(params, σ)`, including padding when
/// `params.pad > 0`.
pub fn build_instance(
    p: &InstanceParams,
    sigma: &SigmaSample,
) -> Result<LabeledMultigraph, InstanceError> {
    validate_sigma(p, sigma)?;
    let n = p.n;
    let span = p.port_span();
    let heavy = p.heavy;
    let mut b = GraphBuilder::new(p.node_count());

    // Source edges: out-port i of s reaches the i-th Y₁ node's in-port 1.
    for i in 1..=n {
        b.add_edge(EdgeRef {
            src: p.s_label(),
            src_port: i,
            dst: p.y_label(1, i),
            dst_port: 1,
        })?;
    }

    let in_x1: HashSet<u32> = sigma.sp.iter().copied().collect();

    // In-slots of X_b sourced from Y_a, naturally ordered by (x index, port).
    // in_slots[a-1][b-1] holds (x index, in-port).
    let mut in_slots: [[Vec<(u32, u32)>; 2]; 2] = Default::default();
    for j in 1..=2 * n {
        let b_class: usize = if in_x1.contains(&j) { 1 } else { 2 };
        let row = &sigma.p_x[(j - 1) as usize];
        for k in 1..=span {
            let rank = row[(k - 1) as usize];
            let from_y1 = if b_class == 1 { rank <= heavy } else { rank > heavy };
            let a_class: usize = if from_y1 { 1 } else { 2 };
            in_slots[a_class - 1][b_class - 1].push((j, k));
        }
    }

    // Out-slots of Y_a aimed at X_b, naturally ordered by flat slot index.
    let mut out_slots: [[Vec<(u32, u32)>; 2]; 2] = Default::default();
    let same_cut = n * heavy;
    for (a_class, ranks) in [(1usize, &sigma.p_y1), (2usize, &sigma.p_y2)] {
        for i in 1..=n {
            for k in 1..=span {
                let flat = (span * (i - 1) + k - 1) as usize;
                let same_side = ranks[flat] <= same_cut;
                let b_class = if same_side { a_class } else { 3 - a_class };
                out_slots[a_class - 1][b_class - 1].push((i, k));
            }
        }
    }

    // Stitch each (a, b) group through its bijection.
    for a in 1..=2usize {
        for b_class in 1..=2usize {
            let matching = match (a, b_class) {
                (1, 1) => &sigma.s11,
                (1, 2) => &sigma.s12,
                (2, 1) => &sigma.s21,
                _ => &sigma.s22,
            };
            let outs = &out_slots[a - 1][b_class - 1];
            let ins = &in_slots[a - 1][b_class - 1];
            debug_assert_eq!(outs.len(), ins.len(), "slot counts disagree for ({a},{b_class})");
            debug_assert_eq!(outs.len(), matching.len());
            for (j, &(yi, yk)) in outs.iter().enumerate() {
                let (xj, xk) = ins[(matching[j] - 1) as usize];
                b.add_edge(EdgeRef {
                    src: p.y_label(a as u8, yi),
                    src_port: yk,
                    dst: p.x_label(xj),
                    dst_port: xk,
                })?;
            }
        }
    }

    if p.pad > 0 {
        add_padding(&mut b, p)?;
    }
    Ok(b.freeze()?)
}

/// Appends the padding structure to an unpadded instance of the same
/// `(n, D, d)`. `params.pad` gives the padding size; the input graph must be
/// the `r = 0` instance.
pub fn pad_instance(
    unpadded: &LabeledMultigraph,
    p: &InstanceParams,
) -> Result<LabeledMultigraph, InstanceError> {
    let base = InstanceParams { pad: 0, ..*p };
    if unpadded.node_count() != base.node_count() || unpadded.edge_count() != base.edge_count() {
        return Err(InstanceError::InvalidParams(format!(
            "input graph has {} nodes / {} edges; the unpadded instance needs {} / {}",
            unpadded.node_count(),
            unpadded.edge_count(),
            base.node_count(),
            base.edge_count()
        )));
    }
    let mut b = GraphBuilder::new(p.node_count());
    for e in unpadded.edges() {
        b.add_edge(e)?;
    }
    add_padding(&mut b, p)?;
    Ok(b.freeze()?)
}

/// Recovers the hidden split from a built instance by counting `Y₁`-sourced
/// in-edges per pool node (`= D` exactly on `X₁`). Returns `None` when
/// `d = 0` (the classes are then structurally identical) or when any count is
/// off-template (not an instance of this family).
#[must_use]
pub fn recover_split(g: &LabeledMultigraph, p: &InstanceParams) -> Option<Vec<u32>> {
    if p.gap == 0 {
        return None;
    }
    let mut sp = Vec::with_capacity(p.n as usize);
    for j in 1..=2 * p.n {
        let x = p.x_label(j);
        let from_y1 = g
            .in_entries(x)
            .iter()
            .filter(|(w, _)| matches!(p.kind_of(*w), Some(LabelKind::Y1)))
            .count() as u32;
        if from_y1 == p.heavy {
            sp.push(j);
        } else if from_y1 != p.heavy - p.gap {
            return None;
        }
    }
    (sp.len() == p.n as usize).then_some(sp)
}

/// Upper bound on `Pr[multiplicity ≥ L]` over σ: `4n²(4D/n)^L`, valid for
/// `1 ≤ L ≤ D`. The bound is a raw union bound and may exceed 1 for small
/// `n`.
pub fn multiplicity_tail(n: u32, heavy: u32, l: u32) -> Result<f64, InstanceError> {
    if l < 1 || l > heavy {
        return Err(InstanceError::InvalidParams(format!(
            "multiplicity threshold L = {l} must lie in 1..=D = {heavy}"
        )));
    }
    let n = n as f64;
    let ratio = 4.0 * heavy as f64 / n;
    Ok(4.0 * n * n * ratio.powi(l as i32))
}

// ---------------------------------------------------------------------------
// Parameter choice
// ---------------------------------------------------------------------------

/// Result of the additive-regime parameter choice.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ChoiceA {
    /// The chosen instance shape (unpadded).
    pub params: InstanceParams,
    /// The achieved PPR gap `(1−α)²·d / ((2D−d)·n)` between the classes.
    pub gap: f64,
}

/// Result of the relative-regime parameter choice.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ChoiceR {
    /// The chosen instance shape (padded when case 1 applies).
    pub params: InstanceParams,
    /// The solved detection threshold δ (`≥ δ₀` when the budget cap binds).
    pub delta: f64,
    /// The achieved class ratio `D/(D−d)`.
    pub ratio: f64,
}

/// The closed-form PPR value of an `X₂` node at these parameters (padding
/// included): `(1−α)²(D−d) / ((2D−d+r)·n)`.
#[must_use]
pub fn x2_value(p: &InstanceParams) -> f64 {
    let span = p.port_span() as f64 + p.pad as f64;
    (1.0 - p.alpha).powi(2) * (p.heavy - p.gap) as f64 / (span * p.n as f64)
}

/// Additive-regime parameter choice: picks `(n, D, d)` so that distinguishing
/// the split at additive accuracy ε₀ stays hard under the budget implied by
/// `(n₀, m₀, ε₀, β)`.
///
/// `base = C·β²·min(n₀^{2−β}, m₀, ln(1/ε₀)/ε₀)`, then `n = ⌊base^{1/(2−β)}⌋`,
/// `D = ⌊base^{(1−β)/(2−β)}⌋`, `d = ⌈ln n⌉`, unpadded. Fails with
/// `InfeasibleParams` when the resulting shape misses `D ≥ 2d` (the regime's
/// own validity requirement, stronger than the type bound `D ≥ ⌈3d/2⌉`).
/// `c_scale = None` uses the default `C = (1−α)²/16`.
pub fn choose_params_a(
    n0: f64,
    m0: f64,
    eps0: f64,
    beta: f64,
    alpha: f64,
    c_scale: Option<f64>,
) -> Result<ChoiceA, InstanceError> {
    if !(n0 >= 2.0 && m0 >= 1.0) {
        return Err(InstanceError::InvalidParams(
            "n0 must be >= 2 and m0 >= 1".into(),
        ));
    }
    if !(eps0 > 0.0 && eps0 < 1.0) || !(beta > 0.0 && beta < 1.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(InstanceError::InvalidParams(
            "need eps0, beta, alpha strictly inside (0, 1)".into(),
        ));
    }
    let c = c_scale.unwrap_or((1.0 - alpha).powi(2) / 16.0);
    let base = c
        * beta
        * beta
        * (n0.powf(2.0 - beta))
            .min(m0)
            .min((1.0 / eps0).ln() / eps0);
    let n = base.powf(1.0 / (2.0 - beta)).floor();
    if n.is_nan() || n < 2.0 {
        return Err(InstanceError::InfeasibleParams(format!(
            "budget base {base:.3} yields group size n = {n} < 2"
        )));
    }
    let n = n as u32;
    let d = (n as f64).ln().ceil() as u32;
    let heavy = base.powf((1.0 - beta) / (2.0 - beta)).floor() as u32;
    if heavy < 2 * d {
        return Err(InstanceError::InfeasibleParams(format!(
            "heavy degree D = {heavy} is below 2d = {} at n = {n}; \
             the additive regime needs a larger budget base",
            2 * d
        )));
    }
    let params = InstanceParams::new(n, heavy, d, 0, alpha)?;
    let gap = (1.0 - alpha).powi(2) * d as f64 / (params.port_span() as f64 * n as f64);
    Ok(ChoiceA { params, gap })
}

/// Solves `ln(1/δ)/δ = target` for `δ ∈ (0, 1)` by bisection. The left side
/// decreases strictly on `(0, 1)`, from `+∞` to `0`.
fn solve_delta(target: f64) -> f64 {
    debug_assert!(target > 0.0);
    let f = |d: f64| (1.0 / d).ln() / d;
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Relative-regime parameter choice: picks `(n, D, d, r)` so that every `X`
/// node's PPR value stays at or above the solved detection threshold δ while
/// the class ratio `D/(D−d)` stays separated from 1.
///
/// δ solves `ln(1/δ)/δ = min(c·m₀, ln(1/δ₀)/δ₀)`. When
/// `n₀ ≤ (1−α)²/(32δ)` the instance keeps `n = n₀` and pads with
/// `r ≈ (1−α)²·d/(16·c·n₀·δ)`; otherwise the group size is capped at
/// `⌊(1−α)²/(32δ)⌋` with no padding. In both cases `d = ⌈ln n⌉` and
/// `D = ⌈(1 + 1/(4c))·d⌉`, bumping `d` once if integer rounding leaves the
/// ratio below `(1+c)/(1−c)` (possible only near `c = ½` at small odd `d`).
/// The construction is validated numerically: `D ≥ ⌈3d/2⌉`, ratio at least
/// `(1+c)/(1−c)`, and `x₂`-value at least δ.
pub fn choose_params_r(
    n0: u32,
    m0: f64,
    delta0: f64,
    c: f64,
    alpha: f64,
) -> Result<ChoiceR, InstanceError> {
    if n0 < 2 || m0.is_nan() || m0 < 1.0 {
        return Err(InstanceError::InvalidParams(
            "n0 must be >= 2 and m0 >= 1".into(),
        ));
    }
    if !(delta0 > 0.0 && delta0 < 1.0) || !(c > 0.0 && c <= 0.5) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(InstanceError::InvalidParams(
            "need delta0 in (0,1), c in (0,1/2], alpha in (0,1)".into(),
        ));
    }
    let target = (c * m0).min((1.0 / delta0).ln() / delta0);
    if target.is_nan() || target <= 0.0 {
        return Err(InstanceError::InfeasibleParams(
            "query budget cap is non-positive".into(),
        ));
    }
    let delta = solve_delta(target);
    let one_minus_a_sq = (1.0 - alpha).powi(2);
    let n_cap = one_minus_a_sq / (32.0 * delta);
    let min_ratio = (1.0 + c) / (1.0 - c);

    let shape = |n: u32, padded: bool| -> Result<InstanceParams, InstanceError> {
        // Rounding of D can starve the ratio; a few larger gaps restore it.
        let d0 = (n as f64).ln().ceil().max(1.0) as u32;
        for d in d0..d0 + 4 {
            let heavy = ((1.0 + 1.0 / (4.0 * c)) * d as f64).ceil() as u32;
            let ratio = heavy as f64 / (heavy - d) as f64;
            if ratio + 1e-12 >= min_ratio {
                let r = if padded {
                    (one_minus_a_sq * d as f64 / (16.0 * c * n as f64 * delta)).round() as u32
                } else {
                    0
                };
                return InstanceParams::new(n, heavy, d, r, alpha);
            }
        }
        Err(InstanceError::InfeasibleParams(format!(
            "no (D, d) pair reaches ratio {min_ratio:.4} at n = {n}, c = {c}"
        )))
    };

    let params = if (n0 as f64) <= n_cap {
        shape(n0, true)?
    } else {
        let n = n_cap.floor() as u32;
        if n < 2 {
            return Err(InstanceError::InfeasibleParams(format!(
                "capped group size {n} < 2: threshold delta = {delta:.3e} is too large \
                 for this alpha"
            )));
        }
        shape(n, false)?
    };

    let ratio = params.heavy as f64 / (params.heavy - params.gap) as f64;
    let x2 = x2_value(&params);
    if x2 < delta * (1.0 - 1e-9) {
        return Err(InstanceError::InfeasibleParams(format!(
            "x2 value {x2:.3e} fell below the solved threshold {delta:.3e}"
        )));
    }
    Ok(ChoiceR { params, delta, ratio })
}
