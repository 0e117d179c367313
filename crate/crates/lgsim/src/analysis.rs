//! Temporal-correlation analysis: assembling two-time correlators into the
//! four-term combination
//!
//! ```text
//! L = E(t1, t2) + E(t2, t3) + E(t3, t4) - E(t1, t4)
//! ```
//!
//! scanning it over measurement schedules `(t, 2t, 3t, 4t)`, checking the
//! macrorealist bound `|L| <= 2` for arbitrary stochastic assignments of
//! dichotomic values, and classifying how invasive the bead-model
//! interventions are at the ontic versus the observable level.

use crate::beads::{OnticEnsemble, Region};
use crate::mc::{estimate_correlator, SeededSampler};
use crate::quantum::{self, QubitState, RabiFrequency, TimeGrid, ANALYTIC_TOL};
use crate::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

/// Slack above the sharp bound `|L| = 2` before an analytic value counts as
/// a violation; guards against rounding at the boundary.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Threshold on the ontic distance below which an intervention counts as
/// leaving the hidden configuration untouched.
pub const ONTIC_TOL: f64 = 1e-12;

/// Threshold on the observable probe distance below which an intervention
/// counts as undetectable downstream.
pub const PROBE_TOL: f64 = 1e-12;

const CORRELATOR_NAMES: [&str; 4] = ["e12", "e23", "e34", "e14"];

/// The four two-time correlators entering `L`, optionally with standard
/// errors when they come from Monte Carlo estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorSet {
    values: [f64; 4],
    std_errors: Option<[f64; 4]>,
}

impl CorrelatorSet {
    /// Builds an exact (error-free) set. Each value must lie within the
    /// physical range `[-1, 1]` up to rounding slack.
    pub fn analytic(e12: f64, e23: f64, e34: f64, e14: f64) -> Result<Self> {
        let values = [e12, e23, e34, e14];
        for (value, name) in values.iter().zip(CORRELATOR_NAMES) {
            if !value.is_finite() || value.abs() > 1.0 + ANALYTIC_TOL {
                return Err(Error::CorrelatorOutOfRange {
                    name,
                    value: *value,
                    slack: ANALYTIC_TOL,
                });
            }
        }
        Ok(Self {
            values,
            std_errors: None,
        })
    }

    /// Builds a set of estimates with standard errors. Values may exceed the
    /// physical range only by statistical slack (four standard errors).
    pub fn with_std_errors(values: [f64; 4], std_errors: [f64; 4]) -> Result<Self> {
        for (error, name) in std_errors.iter().zip(CORRELATOR_NAMES) {
            if !error.is_finite() || *error < 0.0 {
                return Err(Error::InvalidStdError {
                    name,
                    value: *error,
                });
            }
        }
        for ((value, error), name) in values.iter().zip(std_errors).zip(CORRELATOR_NAMES) {
            let slack = ANALYTIC_TOL + 4.0 * error;
            if !value.is_finite() || value.abs() > 1.0 + slack {
                return Err(Error::CorrelatorOutOfRange {
                    name,
                    value: *value,
                    slack,
                });
            }
        }
        Ok(Self {
            values,
            std_errors: Some(std_errors),
        })
    }

    /// `E(t1, t2)`.
    pub fn e12(&self) -> f64 {
        self.values[0]
    }

    /// `E(t2, t3)`.
    pub fn e23(&self) -> f64 {
        self.values[1]
    }

    /// `E(t3, t4)`.
    pub fn e34(&self) -> f64 {
        self.values[2]
    }

    /// `E(t1, t4)`.
    pub fn e14(&self) -> f64 {
        self.values[3]
    }

    /// The four correlators in order `[e12, e23, e34, e14]`.
    pub fn values(&self) -> [f64; 4] {
        self.values
    }

    /// Standard errors in the same order, when the set is statistical.
    pub fn std_errors(&self) -> Option<[f64; 4]> {
        self.std_errors
    }
}

/// The four-term combination evaluated on one correlator set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgResult {
    /// `e12 + e23 + e34 - e14`.
    pub l_value: f64,
    /// Whether `|L|` exceeds 2 beyond the applicable tolerance
    /// (rounding slack for exact sets, four combined standard errors for
    /// statistical ones).
    pub violated: bool,
    /// How far `|L|` sits above the sharp bound 2 (zero when inside).
    pub margin: f64,
}

/// Evaluates `L` and the bound check for a correlator set.
///
/// Exact sets flag a violation when `|L| > 2 + 1e-9`. Statistical sets
/// combine the four standard errors in quadrature and require `|L|` to clear
/// the bound by four combined standard errors, so a flagged violation is
/// statistically significant rather than noise.
pub fn lg_quantity(set: &CorrelatorSet) -> LgResult {
    let l_value = set.e12() + set.e23() + set.e34() - set.e14();
    let tolerance = match set.std_errors() {
        None => VIOLATION_TOL,
        Some(errors) => {
            let combined = errors.iter().map(|se| se * se).sum::<f64>().sqrt();
            4.0 * combined
        }
    };
    LgResult {
        l_value,
        violated: l_value.abs() > 2.0 + tolerance,
        margin: (l_value.abs() - 2.0).max(0.0),
    }
}

/// Which prediction machinery a scan draws its correlators from.
#[derive(Debug, Clone)]
pub enum ScanSource {
    /// Exact quantum statistics from sequential projective measurements.
    Quantum,
    /// Exact bead-model statistics, with or without the readout at the first
    /// time of each pair.
    HvAnalytic {
        /// Whether each pair's first time carries a measurement.
        with_measurement: bool,
    },
    /// Monte Carlo bead-model estimation over sampled ensembles.
    HvMc {
        /// Whether each pair's first time carries a measurement.
        with_measurement: bool,
        /// Beads per correlator estimate.
        n_beads: usize,
        /// Base stream; each (grid point, pair) estimate draws from its own
        /// substream so the four estimates per point are independent.
        sampler: SeededSampler,
    },
}

/// One row of a scan: the schedule parameter `t` (measurements at
/// `t, 2t, 3t, 4t`), the four correlators, and the bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Base time of the schedule.
    pub t: f64,
    /// The four two-time correlators at this schedule.
    pub correlators: CorrelatorSet,
    /// `L` and its bound check.
    pub lg: LgResult,
}

/// Scans `L` over the equally spaced schedules `(t, 2t, 3t, 4t)` for every
/// `t` in the grid (all strictly positive).
///
/// Monte Carlo scans assign substream `4 * point_index + pair_index` to each
/// estimate, which pins the output bit-for-bit to `(seed, grid, n_beads)`
/// regardless of threading.
pub fn lg_scan(
    omega: RabiFrequency,
    grid: &TimeGrid,
    source: &ScanSource,
) -> Result<Vec<ScanPoint>> {
    let initial = QubitState::state1();
    // The exact bead route only reads sector waterlines, so a minimal fresh
    // ensemble serves every grid point.
    let reference = OnticEnsemble::stratified(2, omega)?;
    let mut points = Vec::with_capacity(grid.len());
    for (point_index, t) in grid.iter().enumerate() {
        if t <= 0.0 {
            return Err(Error::NonPositiveScanTime(t));
        }
        let pairs = [
            (t, 2.0 * t),
            (2.0 * t, 3.0 * t),
            (3.0 * t, 4.0 * t),
            (t, 4.0 * t),
        ];
        let correlators = match source {
            ScanSource::Quantum => {
                let mut values = [0.0; 4];
                for (value, &(t1, t2)) in values.iter_mut().zip(&pairs) {
                    *value = quantum::correlator(&initial, omega, t1, t2)?;
                }
                CorrelatorSet::analytic(values[0], values[1], values[2], values[3])?
            }
            ScanSource::HvAnalytic { with_measurement } => {
                let mut values = [0.0; 4];
                for (value, &(t1, t2)) in values.iter_mut().zip(&pairs) {
                    *value = reference.correlator(t1, t2, *with_measurement)?;
                }
                CorrelatorSet::analytic(values[0], values[1], values[2], values[3])?
            }
            ScanSource::HvMc {
                with_measurement,
                n_beads,
                sampler,
            } => {
                let mut values = [0.0; 4];
                let mut errors = [0.0; 4];
                for (pair_index, &(t1, t2)) in pairs.iter().enumerate() {
                    let stream = sampler.substream((4 * point_index + pair_index) as u64);
                    let estimate = estimate_correlator(
                        &stream,
                        *n_beads,
                        omega,
                        t1,
                        t2,
                        *with_measurement,
                    )?;
                    values[pair_index] = estimate.mean;
                    errors[pair_index] = estimate.std_error;
                }
                CorrelatorSet::with_std_errors(values, errors)?
            }
        };
        let lg = lg_quantity(&correlators);
        points.push(ScanPoint {
            t,
            correlators,
            lg,
        });
    }
    Ok(points)
}

/// A stochastic macrorealist model over four measurement times: a mixture of
/// deterministic assignments of `+-1` to each time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericRealistEnsemble {
    weights: Vec<f64>,
    tables: Vec<[f64; 4]>,
}

impl GenericRealistEnsemble {
    /// Builds a mixture from `(weight, values-at-the-four-times)` members.
    /// Weights must be non-negative and sum to one; values must be exactly
    /// `+1` or `-1`.
    pub fn new(members: Vec<(f64, [f64; 4])>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyGenericEnsemble);
        }
        for (index, (weight, table)) in members.iter().enumerate() {
            if !weight.is_finite() || *weight < 0.0 {
                return Err(Error::NegativeWeight {
                    index,
                    weight: *weight,
                });
            }
            for (slot, &value) in table.iter().enumerate() {
                if value != 1.0 && value != -1.0 {
                    return Err(Error::NonDichotomicValue {
                        member: index,
                        slot,
                        value,
                    });
                }
            }
        }
        let sum: f64 = members.iter().map(|(weight, _)| weight).sum();
        if (sum - 1.0).abs() > ANALYTIC_TOL {
            return Err(Error::WeightsNotNormalized {
                sum,
                limit: ANALYTIC_TOL,
            });
        }
        let (weights, tables) = members.into_iter().unzip();
        Ok(Self { weights, tables })
    }

    /// A single deterministic assignment with unit weight.
    pub fn deterministic(table: [f64; 4]) -> Result<Self> {
        Self::new(vec![(1.0, table)])
    }

    /// Number of mixture members.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the mixture has no members (unreachable for constructed
    /// ensembles).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `E(t_i, t_j) = sum_m w_m q_m(t_i) q_m(t_j)` for slots `i, j < 4`.
    pub fn two_time_product(&self, i: usize, j: usize) -> f64 {
        assert!(i < 4 && j < 4, "time slots run from 0 to 3");
        self.weights
            .iter()
            .zip(&self.tables)
            .map(|(w, q)| w * q[i] * q[j])
            .sum()
    }

    /// The four correlators `E(t1,t2), E(t2,t3), E(t3,t4), E(t1,t4)`.
    pub fn correlators(&self) -> Result<CorrelatorSet> {
        CorrelatorSet::analytic(
            self.two_time_product(0, 1),
            self.two_time_product(1, 2),
            self.two_time_product(2, 3),
            self.two_time_product(0, 3),
        )
    }

    /// Evaluates `L` and the bound check for this mixture. Every such model
    /// satisfies `|L| <= 2`, so `violated` is always false here; the check
    /// exists to demonstrate that, not to find violations.
    pub fn lg_result(&self) -> Result<LgResult> {
        Ok(lg_quantity(&self.correlators()?))
    }
}

/// Intervention applied to a bead ensemble at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intervention {
    /// Leave the ensemble untouched (control case).
    None,
    /// The readout of `Q` with its region swap.
    MeasureQ,
    /// The label reversal that leaves all region populations untouched.
    PhantomPermutation,
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Intervention::None => "none",
            Intervention::MeasureQ => "measure-q",
            Intervention::PhantomPermutation => "phantom-permutation",
        };
        f.write_str(name)
    }
}

/// How an intervention ranks against the two distance measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Neither the hidden configuration nor any downstream observable moved.
    NonInvasive,
    /// The hidden configuration moved but no downstream observable can tell.
    InvasiveUndetectable,
    /// Downstream observables moved.
    InvasiveDetectable,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Classification::NonInvasive => "non-invasive",
            Classification::InvasiveUndetectable => "invasive-undetectable",
            Classification::InvasiveDetectable => "invasive-detectable",
        };
        f.write_str(name)
    }
}

/// Outcome of comparing an intervened ensemble against the free one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvasivenessReport {
    /// The intervention that was applied.
    pub intervention: Intervention,
    /// When it was applied.
    pub t0: f64,
    /// Ensemble size used for the comparison.
    pub n_beads: usize,
    /// Number of downstream probe times.
    pub n_probes: usize,
    /// Fraction of labels whose hidden configuration at `t0` differs from
    /// the free ensemble's.
    pub ontic_distance: f64,
    /// Largest deviation any downstream probe statistic shows.
    pub observable_distance: f64,
    /// The verdict combining the two distances.
    pub classification: Classification,
}

/// Minimum over `[0, t0]` of the fresh ensemble's waterline: the depth the
/// upper-region boundary has reached by `t0`.
fn waterline_minimum(omega: RabiFrequency, t0: f64) -> f64 {
    let phase = omega.value() * t0;
    if phase >= PI {
        0.0
    } else {
        0.5 * (1.0 + phase.cos())
    }
}

/// Fraction of labels whose hidden configuration differs between the free
/// and the intervened ensemble at `t0`.
///
/// A label's configuration is its sector, its region, and its trajectory
/// history up to `t0`. The rank coordinate itself is bookkeeping: two ranks
/// describe the same history exactly when the waterline never separated them,
/// i.e. when both stay below the waterline's minimum. Labels swapped across
/// sectors (measurement) always differ; labels moved within a region
/// (phantom permutation) differ only when the waterline has passed between
/// their old and new positions.
fn ontic_distance(
    base: &OnticEnsemble,
    conditioned: &OnticEnsemble,
    intervention: Intervention,
    t0: f64,
) -> f64 {
    let n = base.len() as f64;
    match intervention {
        Intervention::None => 0.0,
        Intervention::MeasureQ => {
            // The readout swaps the upper regions wholesale: every label that
            // was in region a or c changed sector. Labels on the lower sides
            // keep their sector, their region, and their entire history (only
            // their bookkeeping coordinate is rescaled).
            let moved = base
                .beads()
                .iter()
                .filter(|bead| {
                    matches!(base.bead_region(bead, t0), Region::A | Region::C)
                })
                .count();
            moved as f64 / n
        }
        Intervention::PhantomPermutation => {
            let minimum = waterline_minimum(base.omega(), t0);
            let base_rank_of_label: HashMap<u64, f64> = base
                .beads()
                .iter()
                .map(|bead| (bead.label.to_bits(), bead.rank))
                .collect();
            let moved = conditioned
                .beads()
                .iter()
                .filter(|bead| {
                    let old = *base_rank_of_label
                        .get(&bead.label.to_bits())
                        .expect("permuted ensembles carry the same labels");
                    let new = bead.rank;
                    // Identical histories iff the waterline never crossed
                    // between the two rank positions.
                    old != new && old.max(new) >= minimum
                })
                .count();
            moved as f64 / n
        }
    }
}

/// Largest deviation between the two ensembles over the probe statistics:
/// single-time level-1 occupation at every probe, and the free two-time
/// correlator over every ordered probe pair.
fn observable_distance(
    base: &OnticEnsemble,
    conditioned: &OnticEnsemble,
    probes: &[f64],
) -> Result<f64> {
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("probe times are finite"));
    let mut distance = 0.0f64;
    for &s in &sorted {
        let free = base.occupation(s)?.p_state1();
        let intervened = conditioned.occupation(s)?.p_state1();
        distance = distance.max((free - intervened).abs());
    }
    for (i, &s1) in sorted.iter().enumerate() {
        for &s2 in &sorted[i..] {
            let free = base.free_correlator(s1, s2)?;
            let intervened = conditioned.free_correlator(s1, s2)?;
            distance = distance.max((free - intervened).abs());
        }
    }
    Ok(distance)
}

/// Applies `intervention` at `t0` to a stratified `n_beads` ensemble and
/// reports how far the result sits from the free ensemble, both at the
/// hidden-configuration level and over the downstream probe statistics.
///
/// Probe times must lie strictly after `t0`.
pub fn invasiveness_report(
    intervention: Intervention,
    omega: RabiFrequency,
    t0: f64,
    probes: &[f64],
    n_beads: usize,
) -> Result<InvasivenessReport> {
    if !t0.is_finite() || t0 < 0.0 {
        return Err(Error::NegativeTime(t0));
    }
    if probes.is_empty() {
        return Err(Error::EmptyProbeSet);
    }
    for &probe in probes {
        if !probe.is_finite() || probe <= t0 {
            return Err(Error::ProbeNotAfterIntervention { probe, t0 });
        }
    }
    let base = OnticEnsemble::stratified(n_beads, omega)?;
    let conditioned = match intervention {
        Intervention::None => base.clone(),
        Intervention::MeasureQ => base.measure(t0)?.1,
        Intervention::PhantomPermutation => base.phantom_permutation(t0),
    };
    let ontic = ontic_distance(&base, &conditioned, intervention, t0);
    let observable = observable_distance(&base, &conditioned, probes)?;
    let classification = match (ontic > ONTIC_TOL, observable > PROBE_TOL) {
        (_, true) => Classification::InvasiveDetectable,
        (true, false) => Classification::InvasiveUndetectable,
        (false, false) => Classification::NonInvasive,
    };
    Ok(InvasivenessReport {
        intervention,
        t0,
        n_beads,
        n_probes: probes.len(),
        ontic_distance: ontic,
        observable_distance: observable,
        classification,
    })
}
