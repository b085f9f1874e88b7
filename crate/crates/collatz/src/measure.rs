//! Exact-rational measures on countable state spaces, the cycle-anchored
//! measure construction, Cesàro preimage averages, and an asymptotic
//! mean-stationarity check.
//!
//! [`build_cycle_measure`] assigns mass `1/(2^(i+2)·n_i)` to each node of
//! the `i`-th cycle (1-based, `n_i` nodes) and hangs geometrically decaying
//! mass below the cycle: the branch level `m` — the set of values exactly
//! `m + 1` steps from entering the cycle — carries total mass
//! `2^(−m−1)·μ(C_i)`, split equally among its nodes.  Summed over all
//! levels the branch carries another `μ(C_i)`, so the full construction
//! totals `2·μ(C_i)` per cycle.  With this split, the Cesàro averages
//! `(1/N)·Σ μ(T^(−j)(A))` converge to `j_l/(2^(i+1)·n_i)` for any subset
//! of cycle `i` meeting it in `j_l` nodes, and to `0` for finite subsets
//! of the branch.
//!
//! [`cesaro_averages`] evaluates those averages exactly by *forward*
//! orbits: `μ(T^(−j)(A)) = Σ_x μ(x)·[T^j(x) ∈ A]` over the finite support,
//! so no preimage truncation can bias the sequence.  [`preimage_set`] is
//! still provided for explicit preimage experiments inside a declared
//! universe.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::inverse::preimages;
use crate::map::{MapError, MapSpec};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("mass for a measure must be nonnegative (got {mass})")]
    NegativeMass { mass: BigRational },
    #[error("cycle {index} is empty")]
    EmptyCycle { index: usize },
    #[error("cycle {index} is not closed: the map sends {from} to {found}, expected {expected}")]
    BrokenCycle { index: usize, from: BigInt, found: BigInt, expected: BigInt },
    #[error("cycles overlap at value {value}")]
    OverlappingCycles { value: BigInt },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A finitely supported measure with exact nonnegative rational masses.
/// Zero masses are not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteMeasure<K: Ord + Clone> {
    masses: BTreeMap<K, BigRational>,
}

impl<K: Ord + Clone> Default for DiscreteMeasure<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Ord + Clone> DiscreteMeasure<K> {
    pub fn new() -> Self {
        DiscreteMeasure { masses: BTreeMap::new() }
    }

    pub fn from_masses<I>(masses: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (K, BigRational)>,
    {
        let mut out = Self::new();
        for (key, mass) in masses {
            out.add_mass(key, mass)?;
        }
        Ok(out)
    }

    /// Adds `mass` at `key` (masses accumulate; zero contributions vanish).
    pub fn add_mass(&mut self, key: K, mass: BigRational) -> Result<(), MeasureError> {
        if mass.is_negative() {
            return Err(MeasureError::NegativeMass { mass });
        }
        if mass.is_zero() {
            return Ok(());
        }
        *self.masses.entry(key).or_insert_with(BigRational::zero) += mass;
        Ok(())
    }

    /// The mass at one point (zero off the support).
    pub fn mass(&self, key: &K) -> BigRational {
        self.masses.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    /// The measure of a finite set.
    pub fn measure_of<'a, I>(&self, set: I) -> BigRational
    where
        K: 'a,
        I: IntoIterator<Item = &'a K>,
    {
        set.into_iter().map(|k| self.mass(k)).sum()
    }

    pub fn total(&self) -> BigRational {
        self.masses.values().cloned().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = (&K, &BigRational)> {
        self.masses.iter()
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// The same measure scaled to total mass 1, or `None` when empty.
    pub fn normalized(&self) -> Option<Self> {
        let total = self.total();
        if total.is_zero() {
            return None;
        }
        let masses =
            self.masses.iter().map(|(k, m)| (k.clone(), m / &total)).collect::<BTreeMap<_, _>>();
        Some(DiscreteMeasure { masses })
    }
}

/// An ordered list of disjoint cycles; cycle `i` (1-based) lists its nodes
/// in orbit order, `map(c_j) = c_{j+1}` cyclically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleInventory {
    cycles: Vec<Vec<BigInt>>,
}

impl CycleInventory {
    pub fn new(cycles: Vec<Vec<BigInt>>) -> Self {
        CycleInventory { cycles }
    }

    /// The classic map's small cycle `{1, 2}`.
    pub fn classic_trivial() -> Self {
        Self::new(vec![vec![BigInt::from(1), BigInt::from(2)]])
    }

    /// The minus variant's fixed point `{1}` and three-cycle `{5, 7, 10}`.
    pub fn minus_two_cycles() -> Self {
        Self::new(vec![
            vec![BigInt::from(1)],
            vec![BigInt::from(5), BigInt::from(7), BigInt::from(10)],
        ])
    }

    pub fn cycles(&self) -> &[Vec<BigInt>] {
        &self.cycles
    }

    /// Verifies closure of every cycle by forward iteration and pairwise
    /// disjointness across cycles.
    pub fn verify(&self, spec: &MapSpec) -> Result<(), MeasureError> {
        let mut seen: BTreeSet<BigInt> = BTreeSet::new();
        for (index, cycle) in self.cycles.iter().enumerate() {
            let index = index + 1;
            if cycle.is_empty() {
                return Err(MeasureError::EmptyCycle { index });
            }
            for (j, value) in cycle.iter().enumerate() {
                let expected = &cycle[(j + 1) % cycle.len()];
                let found = spec.step(value)?;
                if found != *expected {
                    return Err(MeasureError::BrokenCycle {
                        index,
                        from: value.clone(),
                        found,
                        expected: expected.clone(),
                    });
                }
                if !seen.insert(value.clone()) {
                    return Err(MeasureError::OverlappingCycles { value: value.clone() });
                }
            }
        }
        Ok(())
    }
}

/// Construction summary for [`build_cycle_measure`].
#[derive(Debug, Clone)]
pub struct CycleMeasureReport {
    pub depth: usize,
    /// Branch level sizes per cycle (level `m` = values `m + 1` steps from
    /// the cycle).
    pub branch_level_sizes: Vec<Vec<usize>>,
    /// Set when a preimage fell outside the declared universe and was
    /// dropped (the level mass is then shared by the surviving nodes, or
    /// lost entirely if a whole level escapes).
    pub truncated: bool,
    /// `Σ_i (2 − 2^(−depth))·μ(C_i)`: what the truncation-free total at
    /// this depth must equal when nothing escaped the universe.
    pub expected_total: BigRational,
}

/// Builds the cycle-anchored measure for a verified inventory.
///
/// `depth` bounds the branch construction (levels `0..depth`);
/// `universe_bound` truncates preimage enumeration, flagging any loss.
pub fn build_cycle_measure(
    spec: &MapSpec,
    inventory: &CycleInventory,
    depth: usize,
    universe_bound: &BigInt,
) -> Result<(DiscreteMeasure<BigInt>, CycleMeasureReport), MeasureError> {
    inventory.verify(spec)?;
    let mut measure = DiscreteMeasure::new();
    let mut branch_level_sizes = Vec::new();
    let mut truncated = false;
    let mut expected_total = BigRational::zero();
    let two = BigRational::new(BigInt::from(2), BigInt::one());
    for (index, cycle) in inventory.cycles().iter().enumerate() {
        let i = index + 1;
        let n_i = cycle.len();
        // Per-node cycle mass 1/(2^(i+2)·n_i).
        let denom: BigInt = BigInt::from(2).pow(i as u32 + 2) * BigInt::from(n_i as u64);
        let node_mass = BigRational::new(BigInt::one(), denom);
        let cycle_mass = &node_mass * BigInt::from(n_i as u64);
        for value in cycle {
            measure.add_mass(value.clone(), node_mass.clone())?;
        }
        expected_total += &cycle_mass
            * (&two - BigRational::new(BigInt::one(), BigInt::from(2).pow(depth as u32)));

        // Branch level 0: preimages of the cycle, minus the cycle itself.
        let cycle_set: BTreeSet<&BigInt> = cycle.iter().collect();
        let mut level: BTreeSet<BigInt> = BTreeSet::new();
        for value in cycle {
            for p in preimages(spec, value) {
                if cycle_set.contains(&p) {
                    continue;
                }
                if p > *universe_bound {
                    truncated = true;
                    continue;
                }
                level.insert(p);
            }
        }
        let mut sizes = Vec::with_capacity(depth);
        let mut level_mass = &cycle_mass / BigInt::from(2);
        for _ in 0..depth {
            sizes.push(level.len());
            if level.is_empty() {
                break;
            }
            let share = &level_mass / BigInt::from(level.len() as u64);
            for value in &level {
                measure.add_mass(value.clone(), share.clone())?;
            }
            let mut next = BTreeSet::new();
            for value in &level {
                for p in preimages(spec, value) {
                    if p > *universe_bound {
                        truncated = true;
                        continue;
                    }
                    next.insert(p);
                }
            }
            level = next;
            level_mass /= BigInt::from(2);
        }
        branch_level_sizes.push(sizes);
    }
    Ok((
        measure,
        CycleMeasureReport { depth, branch_level_sizes, truncated, expected_total },
    ))
}

/// Result of [`preimage_set`]: the depth-`i` preimage inside the universe,
/// plus a flag recording whether any preimage escaped it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreimageSetResult {
    pub set: BTreeSet<BigInt>,
    pub escaped: bool,
}

/// The exact `i`-fold preimage of a finite set, intersected with the
/// universe `[1, universe_bound]` at every step.
pub fn preimage_set(
    spec: &MapSpec,
    set: &BTreeSet<BigInt>,
    depth: usize,
    universe_bound: &BigInt,
) -> PreimageSetResult {
    let mut current = set.clone();
    let mut escaped = false;
    for _ in 0..depth {
        let mut next = BTreeSet::new();
        for value in &current {
            for p in preimages(spec, value) {
                if p > *universe_bound {
                    escaped = true;
                } else {
                    next.insert(p);
                }
            }
        }
        current = next;
    }
    PreimageSetResult { set: current, escaped }
}

/// Exact Cesàro sequence of preimage measures for one set.
#[derive(Debug, Clone)]
pub struct CesaroReport {
    pub label: String,
    pub horizon: usize,
    /// `ν_j = μ(T^(−j)(A))` for `j = 1..=horizon`.
    pub preimage_masses: Vec<BigRational>,
    /// `(1/m)·Σ_{j≤m} ν_j` for `m = 1..=horizon`.
    pub averages: Vec<BigRational>,
    pub claimed_limit: Option<BigRational>,
    /// Whether any forward orbit left the declared universe.  The averages
    /// themselves are exact either way; the flag only mirrors what a
    /// preimage-based evaluation would have truncated.
    pub truncation_bias: bool,
}

impl CesaroReport {
    pub fn final_average(&self) -> &BigRational {
        self.averages.last().expect("horizon is at least 1")
    }

    /// Spread (max − min) of the averages over the last quarter of the
    /// horizon.
    pub fn last_quarter_oscillation(&self) -> BigRational {
        let start = (self.horizon.saturating_mul(3)) / 4;
        let start = start.max(1) - 1;
        let window = &self.averages[start..];
        let mut lo = window[0].clone();
        let mut hi = window[0].clone();
        for value in &window[1..] {
            if *value < lo {
                lo = value.clone();
            }
            if *value > hi {
                hi = value.clone();
            }
        }
        hi - lo
    }

    /// `|final average − claimed limit|`, when a limit was declared.
    pub fn limit_error(&self) -> Option<BigRational> {
        self.claimed_limit.as_ref().map(|limit| {
            let diff = self.final_average() - limit;
            if diff.is_negative() {
                -diff
            } else {
                diff
            }
        })
    }

    /// CSV rows `index,preimage_mass,average` with exact rationals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# cesaro-v1\nindex,preimage_mass,average\n");
        for (i, (mass, avg)) in
            self.preimage_masses.iter().zip(&self.averages).enumerate()
        {
            out.push_str(&format!("{},{},{}\n", i + 1, mass, avg));
        }
        out
    }
}

/// Computes `ν_j = μ(T^(−j)(A))` for `j ≤ horizon` by pushing every
/// support point forward `horizon` steps, then the running Cesàro
/// averages.  Exact in `BigRational`; `universe` (when given) only feeds
/// the informational truncation flag.
pub fn cesaro_averages<K, F>(
    measure: &DiscreteMeasure<K>,
    step: F,
    set: &BTreeSet<K>,
    horizon: usize,
    label: &str,
    claimed_limit: Option<BigRational>,
    universe: Option<&K>,
) -> CesaroReport
where
    K: Ord + Clone,
    F: Fn(&K) -> K,
{
    assert!(horizon >= 1, "horizon must be positive");
    let mut preimage_masses = vec![BigRational::zero(); horizon];
    let mut truncation_bias = false;
    for (start, mass) in measure.support() {
        let mut current = start.clone();
        for entry in preimage_masses.iter_mut() {
            current = step(&current);
            if let Some(bound) = universe {
                if current > *bound {
                    truncation_bias = true;
                }
            }
            if set.contains(&current) {
                *entry += mass;
            }
        }
    }
    let mut averages = Vec::with_capacity(horizon);
    let mut running = BigRational::zero();
    for (j, mass) in preimage_masses.iter().enumerate() {
        running += mass;
        averages.push(&running / BigInt::from(j as u64 + 1));
    }
    CesaroReport {
        label: label.to_string(),
        horizon,
        preimage_masses,
        averages,
        claimed_limit,
        truncation_bias,
    }
}

/// One set to feed into [`ams_check`].
#[derive(Debug, Clone)]
pub struct AmsSet<K: Ord + Clone> {
    pub label: String,
    pub members: BTreeSet<K>,
    pub claimed_limit: Option<BigRational>,
}

/// Per-set outcome of [`ams_check`].
#[derive(Debug, Clone)]
pub struct AmsOutcome {
    pub label: String,
    pub final_average: BigRational,
    pub oscillation: BigRational,
    pub limit_error: Option<BigRational>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct AmsReport {
    pub horizon: usize,
    pub tolerance: BigRational,
    pub outcomes: Vec<AmsOutcome>,
}

impl AmsReport {
    pub fn pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

/// Numerical mean-stationarity check: for each set, the last-quarter
/// oscillation of the Cesàro averages must stay below `tolerance`, and the
/// final average must sit within `tolerance` of the claimed limit when one
/// is declared.
pub fn ams_check<K, F>(
    measure: &DiscreteMeasure<K>,
    step: F,
    sets: &[AmsSet<K>],
    horizon: usize,
    tolerance: &BigRational,
) -> AmsReport
where
    K: Ord + Clone,
    F: Fn(&K) -> K,
{
    let mut outcomes = Vec::with_capacity(sets.len());
    for set in sets {
        let report = cesaro_averages(
            measure,
            &step,
            &set.members,
            horizon,
            &set.label,
            set.claimed_limit.clone(),
            None,
        );
        let oscillation = report.last_quarter_oscillation();
        let limit_error = report.limit_error();
        let pass = oscillation < *tolerance
            && limit_error.as_ref().map_or(true, |err| err < tolerance);
        outcomes.push(AmsOutcome {
            label: set.label.clone(),
            final_average: report.final_average().clone(),
            oscillation,
            limit_error,
            pass,
        });
    }
    AmsReport { horizon, tolerance: tolerance.clone(), outcomes }
}
