//! Preimage structures: inverse triangles, their affine node coordinates,
//! and chain-trees.
//!
//! A value `a` has the even preimage `2a` always, and an odd preimage
//! exactly when the odd rule can be inverted integrally ([`preimages`]).
//! Iterating preimages below a root of the form `3^k·h − 1` yields a
//! leveled tree — the *inverse triangle* — whose every node decomposes as
//! `2^l·3^{k−l}·h·α + β` with `(α, β)` independent of `h`
//! ([`build_inverse_triangle`]).  That decomposition powers three checks:
//!
//! * [`check_triangle_conjecture`] — does every deepest-level node other
//!   than the leftmost `2^k·h − 1` fall below itself within `k` steps?
//! * [`verify_h_invariance`] — transplanting a node to another multiplier
//!   `h₁` preserves its parity vector and lands above the new root.
//! * [`verify_ratio_domination`] — step ratios along the `h = 1` branch
//!   dominate those of the `h > 1` branch, exactly, with even steps tied
//!   at `1/2`.
//!
//! [`build_chain_tree`] extends a value both forward (by the map) and
//! backward (by a preimage rule), with truncated level sets `B_z`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::map::{Domain, MapError, MapSpec, Variant};
use crate::triangle::failure_budget;
use num_bigint::BigUint;

/// Default ceiling on enumerated nodes for triangles and level sets.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("node budget {budget} exhausted at level {level} ({nodes} nodes built)")]
    BudgetExhausted { budget: usize, level: usize, nodes: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// All preimages of `a` under the map, even preimage first.
///
/// The even preimage `2a` always exists.  An odd preimage exists exactly
/// when the odd rule inverts integrally: `(2a − 1)/3` for the classic
/// variant (requires `a ≡ 2 mod 3`), `(2a + 1)/3` for the minus variant
/// (requires `a ≡ 1 mod 3`).  In the naturals domain, candidates below 1
/// are discarded.
pub fn preimages(spec: &MapSpec, a: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(2);
    let even = a * 2;
    let in_domain = |x: &BigInt| match spec.domain {
        Domain::Naturals => x.is_positive(),
        Domain::Integers => true,
    };
    if in_domain(&even) {
        out.push(even);
    }
    let numerator: BigInt = match spec.variant {
        Variant::Classic => a * 2 - 1,
        Variant::Minus => a * 2 + 1,
    };
    let three = BigInt::from(3);
    let (q, r) = numerator.div_mod_floor(&three);
    if r.is_zero() && in_domain(&q) {
        out.push(q);
    }
    out
}

/// One node of an [`InverseTriangle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleNode {
    pub value: BigInt,
    pub level: usize,
    /// Index of the parent node (its image under the map); `None` at the root.
    pub parent: Option<usize>,
    /// Affine coordinate: `value = 2^level · 3^(k−level) · h · alpha + beta`.
    pub alpha: BigInt,
    pub beta: BigInt,
}

/// The leveled preimage tree below the root `3^k·h − 1`.
///
/// Level `l` holds exactly the values that reach the root in `l` steps,
/// each annotated with its `(α, β)` coordinates.  Values never collide
/// across branches (even children are even, odd children odd), which is
/// asserted during construction.
#[derive(Debug, Clone)]
pub struct InverseTriangle {
    pub k: usize,
    pub h: u64,
    pub root: BigInt,
    /// True when `3 | h`: the root is then also expressible as
    /// `3^(k+1)·(h/3) − 1`, so `k` is not the canonical depth for it.
    pub h_multiple_of_three: bool,
    nodes: Vec<TriangleNode>,
    levels: Vec<Vec<usize>>,
}

impl InverseTriangle {
    pub fn node(&self, index: usize) -> &TriangleNode {
        &self.nodes[index]
    }

    pub fn nodes(&self) -> &[TriangleNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node indices of level `l` in construction order (children of earlier
    /// parents first, even child before odd child).
    pub fn level(&self, l: usize) -> &[usize] {
        &self.levels[l]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_values(&self, l: usize) -> Vec<BigInt> {
        self.levels[l].iter().map(|&i| self.nodes[i].value.clone()).collect()
    }

    /// Parity vector bits (length = node level) read along the branch:
    /// bit `i` is the parity of the `i−1`-fold image of the node.
    pub fn parity_path(&self, index: usize) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.nodes[index].level);
        let mut cursor = index;
        while let Some(parent) = self.nodes[cursor].parent {
            bits.push(self.nodes[cursor].value.is_odd());
            cursor = parent;
        }
        bits
    }

    /// DOT rendering: edges point from each node to its image.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph inverse_triangle {\n  rankdir=BT;\n");
        for node in &self.nodes {
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\\na={} b={}\"];",
                node.value, node.value, node.alpha, node.beta
            );
        }
        for node in &self.nodes {
            if let Some(parent) = node.parent {
                let kind = if node.value.is_odd() { "odd" } else { "even" };
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\"];",
                    node.value, self.nodes[parent].value, kind
                );
            }
        }
        out.push_str("}\n");
        out
    }

    /// JSON rendering: one array per level with per-node value, coordinates,
    /// and parity path (earliest bit first).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct NodeView {
            value: String,
            alpha: String,
            beta: String,
            parity: String,
        }
        let levels: Vec<Vec<NodeView>> = self
            .levels
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|&i| {
                        let node = &self.nodes[i];
                        let parity: String = self
                            .parity_path(i)
                            .into_iter()
                            .map(|b| if b { '1' } else { '0' })
                            .collect();
                        NodeView {
                            value: node.value.to_string(),
                            alpha: node.alpha.to_string(),
                            beta: node.beta.to_string(),
                            parity,
                        }
                    })
                    .collect()
            })
            .collect();
        #[derive(Serialize)]
        struct TriangleView {
            k: usize,
            h: u64,
            root: String,
            levels: Vec<Vec<NodeView>>,
        }
        serde_json::to_string_pretty(&TriangleView {
            k: self.k,
            h: self.h,
            root: self.root.to_string(),
            levels,
        })
        .expect("triangle view serializes")
    }
}

/// Builds the full inverse triangle of `3^k·h − 1` down to level `k`.
///
/// Coordinates follow the inductive rule: the root carries `(1, −1)`; an
/// even child of `(α, β)` carries `(3α, 2β)`; an odd child carries
/// `(α, (2β − 1)/3)` (classic) or `(α, (2β + 1)/3)` (minus).  The identity
/// `value = 2^l·3^(k−l)·h·α + β` is asserted for every node.
pub fn build_inverse_triangle(
    spec: &MapSpec,
    k: usize,
    h: u64,
    budget: usize,
) -> Result<InverseTriangle, InverseError> {
    let three = BigInt::from(3);
    let two = BigInt::from(2);
    let root: BigInt = three.pow(k as u32) * h - 1;
    let mut nodes = vec![TriangleNode {
        value: root.clone(),
        level: 0,
        parent: None,
        alpha: BigInt::one(),
        beta: -BigInt::one(),
    }];
    let mut levels = vec![vec![0usize]];
    for l in 0..k {
        let mut next = Vec::new();
        let mut seen = BTreeSet::new();
        for &parent_idx in &levels[l] {
            let parent = nodes[parent_idx].clone();
            for value in preimages(spec, &parent.value) {
                let (alpha, beta) = if value.is_even() {
                    (&parent.alpha * &three, &parent.beta * &two)
                } else {
                    let numerator: BigInt = match spec.variant {
                        Variant::Classic => &parent.beta * 2 - 1,
                        Variant::Minus => &parent.beta * 2 + 1,
                    };
                    let (q, r) = numerator.div_mod_floor(&three);
                    assert!(
                        r.is_zero(),
                        "odd-branch beta update must stay integral (beta = {})",
                        parent.beta
                    );
                    (parent.alpha.clone(), q)
                };
                let level = l + 1;
                let expected =
                    two.pow(level as u32) * three.pow((k - level) as u32) * h * &alpha + &beta;
                assert_eq!(
                    expected, value,
                    "affine decomposition must reproduce the node value at level {level}"
                );
                assert!(
                    seen.insert(value.clone()),
                    "branch values must not collide within a level (value {value})"
                );
                if nodes.len() >= budget {
                    return Err(InverseError::BudgetExhausted {
                        budget,
                        level,
                        nodes: nodes.len(),
                    });
                }
                next.push(nodes.len());
                nodes.push(TriangleNode { value, level, parent: Some(parent_idx), alpha, beta });
            }
        }
        levels.push(next);
    }
    Ok(InverseTriangle { k, h, root, h_multiple_of_three: h % 3 == 0, nodes, levels })
}

/// Which inequality a deepest-level node must *fail* to count as a violator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjectureMode {
    /// Violator when every iterate stays strictly above the start:
    /// `T^m(a) > a` for all `m ∈ [1, k]`.
    Strict,
    /// Violator when every iterate stays weakly above the start:
    /// `T^m(a) ≥ a` for all `m ∈ [1, k]`.
    Weak,
}

#[derive(Debug, Clone)]
pub struct ConjectureReport {
    pub k: usize,
    pub h: u64,
    pub mode: ConjectureMode,
    /// The excluded leftmost leaf `2^k·h − 1` (it never drops within `k`
    /// steps by construction, so it is not a candidate).
    pub leftmost_leaf: BigInt,
    pub nodes_checked: usize,
    pub violators: Vec<BigInt>,
    pub budget: BigUint,
}

impl ConjectureReport {
    pub fn within_budget(&self) -> bool {
        BigUint::from(self.violators.len()) <= self.budget
    }

    pub fn is_empty(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Scans level `k` of the inverse triangle of `3^k·h − 1` for values that
/// never fall back to or below themselves within `k` steps.  The leftmost
/// leaf `2^k·h − 1` is excluded.  The violator count is reported against
/// the analytic failure budget.
pub fn check_triangle_conjecture(
    spec: &MapSpec,
    k: usize,
    h: u64,
    mode: ConjectureMode,
    budget: usize,
) -> Result<ConjectureReport, InverseError> {
    let triangle = build_inverse_triangle(spec, k, h, budget)?;
    let leftmost = BigInt::from(2).pow(k as u32) * h - 1;
    let mut violators = Vec::new();
    let mut nodes_checked = 0;
    for &idx in triangle.level(k) {
        let value = &triangle.node(idx).value;
        if *value == leftmost {
            continue;
        }
        nodes_checked += 1;
        let drop = match mode {
            ConjectureMode::Strict => spec.first_weak_drop(value, k)?,
            ConjectureMode::Weak => spec.first_strict_drop(value, k)?,
        };
        if drop.is_none() {
            violators.push(value.clone());
        }
    }
    Ok(ConjectureReport {
        k,
        h,
        mode,
        leftmost_leaf: leftmost,
        nodes_checked,
        violators,
        budget: failure_budget(k as u64),
    })
}

#[derive(Debug, Clone)]
pub struct HInvarianceFailure {
    pub node_value: BigInt,
    pub h1: u64,
    pub reconstructed: BigInt,
    pub parity_mismatch: bool,
    pub endpoint_mismatch: bool,
}

#[derive(Debug, Clone)]
pub struct HInvarianceReport {
    pub k: usize,
    pub l: usize,
    pub h_values: Vec<u64>,
    pub pairs_checked: usize,
    pub failures: Vec<HInvarianceFailure>,
}

impl HInvarianceReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For every node `a` at level `l` of the triangle built with
/// `h = h_values[0]`, reconstructs the counterpart
/// `a₁ = 2^l·3^(k−l)·h₁·α + β` for each other multiplier and checks that
/// the first `l` parity bits agree and that `l` forward steps from `a₁`
/// reach `3^k·h₁ − 1`.
pub fn verify_h_invariance(
    spec: &MapSpec,
    k: usize,
    l: usize,
    h_values: &[u64],
) -> Result<HInvarianceReport, InverseError> {
    assert!(!h_values.is_empty(), "need a base multiplier");
    assert!(l <= k, "level must not exceed depth");
    let base = h_values[0];
    let triangle = build_inverse_triangle(spec, k, base, DEFAULT_NODE_BUDGET)?;
    let two = BigInt::from(2);
    let three = BigInt::from(3);
    let scale = two.pow(l as u32) * three.pow((k - l) as u32);
    let mut pairs_checked = 0;
    let mut failures = Vec::new();
    for &idx in triangle.level(l) {
        let node = triangle.node(idx);
        let reference_bits = spec.parity_vector(&node.value, l)?;
        for &h1 in &h_values[1..] {
            let reconstructed = &scale * h1 * &node.alpha + &node.beta;
            let target_root = three.pow(k as u32) * h1 - 1;
            let bits = spec.parity_vector(&reconstructed, l)?;
            let endpoint = spec.trajectory(&reconstructed, l)?.iterate(l).clone();
            let parity_mismatch = bits.bits() != reference_bits.bits();
            let endpoint_mismatch = endpoint != target_root;
            pairs_checked += 1;
            if parity_mismatch || endpoint_mismatch {
                failures.push(HInvarianceFailure {
                    node_value: node.value.clone(),
                    h1,
                    reconstructed,
                    parity_mismatch,
                    endpoint_mismatch,
                });
            }
        }
    }
    Ok(HInvarianceReport { k, l, h_values: h_values.to_vec(), pairs_checked, failures })
}

#[derive(Debug, Clone)]
pub struct RatioFailure {
    pub leaf: BigInt,
    pub step: usize,
    pub base_ratio: BigRational,
    pub other_ratio: BigRational,
}

#[derive(Debug, Clone)]
pub struct RatioDominationReport {
    pub k: usize,
    pub h: u64,
    pub leaves_checked: usize,
    pub steps_checked: usize,
    pub even_steps: usize,
    pub odd_steps: usize,
    /// Smallest odd-step ratio seen on either branch, if any odd step occurred.
    pub min_odd_ratio: Option<BigRational>,
    pub failures: Vec<RatioFailure>,
}

impl RatioDominationReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    /// Every odd-step ratio stays at or above `5/4`.
    pub fn envelope_holds(&self) -> bool {
        let floor = BigRational::new(BigInt::from(5), BigInt::from(4));
        self.min_odd_ratio.as_ref().map_or(true, |r| *r >= floor)
    }
}

/// Compares step ratios `T^l(a)/T^(l−1)(a)` between each level-`k` leaf of
/// the `h` triangle and its `h = 1` counterpart (same branch path), for
/// `1 ≤ l ≤ m`.  In exact rationals: the `h = 1` ratio dominates, even
/// steps are exactly `1/2` on both branches, and odd steps stay above the
/// `5/4` envelope.
pub fn verify_ratio_domination(
    spec: &MapSpec,
    k: usize,
    h: u64,
    m: usize,
) -> Result<RatioDominationReport, InverseError> {
    let tri_h = build_inverse_triangle(spec, k, h, DEFAULT_NODE_BUDGET)?;
    let tri_1 = build_inverse_triangle(spec, k, 1, DEFAULT_NODE_BUDGET)?;
    for l in 0..=k {
        assert_eq!(
            tri_h.level(l).len(),
            tri_1.level(l).len(),
            "triangle shape is independent of h (level {l})"
        );
    }
    let m = m.min(k);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut steps_checked = 0;
    let mut even_steps = 0;
    let mut odd_steps = 0;
    let mut min_odd_ratio: Option<BigRational> = None;
    let mut failures = Vec::new();
    let mut leaves_checked = 0;
    for (&leaf_h, &leaf_1) in tri_h.level(k).iter().zip(tri_1.level(k)) {
        leaves_checked += 1;
        // Walk both parent chains in lockstep; entry l is T^l of the leaf.
        let mut chain_h = vec![leaf_h];
        let mut chain_1 = vec![leaf_1];
        while let Some(p) = tri_h.node(*chain_h.last().unwrap()).parent {
            chain_h.push(p);
        }
        while let Some(p) = tri_1.node(*chain_1.last().unwrap()).parent {
            chain_1.push(p);
        }
        for l in 1..=m {
            let num_h = tri_h.node(chain_h[l]).value.clone();
            let den_h = tri_h.node(chain_h[l - 1]).value.clone();
            let num_1 = tri_1.node(chain_1[l]).value.clone();
            let den_1 = tri_1.node(chain_1[l - 1]).value.clone();
            let odd = den_h.is_odd();
            assert_eq!(den_1.is_odd(), odd, "branch parities agree across h");
            let ratio_h = BigRational::new(num_h, den_h);
            let ratio_1 = BigRational::new(num_1, den_1);
            steps_checked += 1;
            if odd {
                odd_steps += 1;
                let smaller = ratio_h.clone().min(ratio_1.clone());
                min_odd_ratio = Some(match min_odd_ratio.take() {
                    Some(current) => current.min(smaller),
                    None => smaller,
                });
            } else {
                even_steps += 1;
                assert_eq!(ratio_h, half, "even steps halve exactly");
                assert_eq!(ratio_1, half, "even steps halve exactly");
            }
            if ratio_1 < ratio_h {
                failures.push(RatioFailure {
                    leaf: tri_h.node(leaf_h).value.clone(),
                    step: l,
                    base_ratio: ratio_1,
                    other_ratio: ratio_h,
                });
            }
        }
    }
    Ok(RatioDominationReport {
        k,
        h,
        leaves_checked,
        steps_checked,
        even_steps,
        odd_steps,
        min_odd_ratio,
        failures,
    })
}

/// How the backward chain of a [`ChainTree`] picks among preimages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardRule {
    /// Take the odd preimage whenever it exists (the leftmost branch).
    PreferOdd,
    /// Always take the even preimage `2a`.
    EvenAlways,
}

/// A two-sided orbit segment `a_z` (`z ∈ [−depth_back, depth_fwd]`,
/// `a_0` = anchor) with on-demand truncated level sets.
#[derive(Debug, Clone)]
pub struct ChainTree {
    pub anchor: BigInt,
    pub depth_back: usize,
    pub depth_fwd: usize,
    pub rule: BackwardRule,
    chain: Vec<BigInt>,
}

impl ChainTree {
    /// The chain value `a_z`, or `None` outside the stored range.
    pub fn chain_value(&self, z: i64) -> Option<&BigInt> {
        let index = z + self.depth_back as i64;
        if index < 0 {
            return None;
        }
        self.chain.get(index as usize)
    }

    /// All stored `(z, a_z)` pairs in increasing `z`.
    pub fn chain(&self) -> impl Iterator<Item = (i64, &BigInt)> {
        let back = self.depth_back as i64;
        self.chain.iter().enumerate().map(move |(i, v)| (i as i64 - back, v))
    }

    /// The truncated level set `B_z = ∪_{i=0..=depth} T^{-i}(T^i(a_z))`.
    ///
    /// `z` must be stored; the forward images `T^i(a_z)` are recomputed, so
    /// `depth` may exceed `depth_fwd`.
    pub fn level_set(
        &self,
        spec: &MapSpec,
        z: i64,
        depth: usize,
    ) -> Result<BTreeSet<BigInt>, InverseError> {
        let start = self
            .chain_value(z)
            .unwrap_or_else(|| panic!("level set requested outside the stored chain (z = {z})"));
        let forward = spec.trajectory(start, depth)?.values().to_vec();
        let mut out = BTreeSet::new();
        for (i, target) in forward.into_iter().enumerate() {
            let mut layer = BTreeSet::from([target]);
            for _ in 0..i {
                let mut next = BTreeSet::new();
                for value in &layer {
                    next.extend(preimages(spec, value));
                }
                layer = next;
                if out.len() + layer.len() > DEFAULT_NODE_BUDGET {
                    return Err(InverseError::BudgetExhausted {
                        budget: DEFAULT_NODE_BUDGET,
                        level: i,
                        nodes: out.len() + layer.len(),
                    });
                }
            }
            out.extend(layer);
        }
        Ok(out)
    }

    /// DOT rendering of the level sets at the given truncation depth: every
    /// included node points to its image.
    pub fn to_dot(&self, spec: &MapSpec, depth: usize) -> Result<String, InverseError> {
        let mut members = BTreeSet::new();
        let back = self.depth_back as i64;
        for z in -back..=self.depth_fwd as i64 {
            members.extend(self.level_set(spec, z, depth)?);
        }
        let mut out = String::from("digraph chain_tree {\n  rankdir=LR;\n");
        for (z, value) in self.chain() {
            let _ = writeln!(out, "  \"{value}\" [shape=box, label=\"{value}\\nz={z}\"];");
        }
        for value in &members {
            let image = spec.step(value)?;
            if members.contains(&image) {
                let _ = writeln!(out, "  \"{value}\" -> \"{image}\";");
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// Builds a chain-tree around `a`: `depth_fwd` forward steps and
/// `depth_back` backward steps along the rule's preimage choice.  Backward
/// extension is total — `2a` is always a preimage.
pub fn build_chain_tree(
    spec: &MapSpec,
    a: &BigInt,
    depth_fwd: usize,
    depth_back: usize,
    rule: BackwardRule,
) -> Result<ChainTree, InverseError> {
    let mut backward = Vec::with_capacity(depth_back);
    let mut cursor = a.clone();
    for _ in 0..depth_back {
        let candidates = preimages(spec, &cursor);
        let chosen = match rule {
            BackwardRule::EvenAlways => candidates
                .iter()
                .find(|v| v.is_even())
                .expect("the even preimage 2a always exists")
                .clone(),
            BackwardRule::PreferOdd => candidates
                .iter()
                .find(|v| v.is_odd())
                .or_else(|| candidates.first())
                .expect("preimage sets are never empty")
                .clone(),
        };
        backward.push(chosen.clone());
        cursor = chosen;
    }
    backward.reverse();
    let mut chain = backward;
    chain.extend(spec.trajectory(a, depth_fwd)?.values().iter().cloned());
    Ok(ChainTree {
        anchor: a.clone(),
        depth_back,
        depth_fwd,
        rule,
        chain,
    })
}
