//! Deterministic hidden-variable model underlying the quantum statistics:
//! labels riding on ordered, non-crossing trajectories ("beads") spread over
//! four ontic regions.
//!
//! The regions come in two sectors of two regions each: sector `AB` holds the
//! upper region `a` and lower region `b`, sector `CD` holds the upper region
//! `c` and lower region `d`. Regions `a` and `c` correspond to the observable
//! value `Q = +1` (level 1), regions `b` and `d` to `Q = -1` (level 2).
//!
//! Between interventions each sector evolves freely: the population split
//! between its upper and lower region obeys a second-order oscillator
//! equation whose solution, starting at rest at the last reset epoch `t0`
//! with upper fraction `g0`, is
//!
//! ```text
//! g(t) = (1 + (2 g0 - 1) cos(omega (t - t0))) / 2.
//! ```
//!
//! Beads never cross within a sector: a bead sits in the upper region exactly
//! when its rank lies below the waterline `g(t)`. All single-time statistics
//! therefore follow from the sector occupations alone, while individual
//! trajectories remain fully deterministic.
//!
//! Measurement reads out the ensemble expectation of `Q` and simultaneously
//! swaps the beads of region `a` with those of region `c`. The swap relocates
//! real trajectories, so a measurement is invasive at the ontic level by
//! construction; whether that invasion is *observable* downstream is a
//! separate question handled in [`crate::analysis`].
//!
//! The model supports at most one intermediate measurement per ensemble;
//! a second measurement is rejected.

use crate::quantum::RabiFrequency;
use crate::{Error, Result};

/// The two dynamical sectors. Each sector carries its own waterline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// Sector holding regions `a` (upper) and `b` (lower).
    Ab,
    /// Sector holding regions `c` (upper) and `d` (lower).
    Cd,
}

/// Side of a sector: upper regions map to `Q = +1`, lower regions to `Q = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// The `a`/`c` side of a sector.
    Upper,
    /// The `b`/`d` side of a sector.
    Lower,
}

impl Side {
    /// Dichotomic value carried by beads on this side.
    pub fn q_value(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

/// One of the four ontic regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Upper region of sector `AB` (`Q = +1`).
    A,
    /// Lower region of sector `AB` (`Q = -1`).
    B,
    /// Upper region of sector `CD` (`Q = +1`).
    C,
    /// Lower region of sector `CD` (`Q = -1`).
    D,
}

impl Region {
    /// The sector this region belongs to.
    pub fn sector(self) -> Sector {
        match self {
            Region::A | Region::B => Sector::Ab,
            Region::C | Region::D => Sector::Cd,
        }
    }

    /// The side of the sector this region sits on.
    pub fn side(self) -> Side {
        match self {
            Region::A | Region::C => Side::Upper,
            Region::B | Region::D => Side::Lower,
        }
    }

    /// Dichotomic value of beads currently in this region.
    pub fn q_value(self) -> f64 {
        self.side().q_value()
    }
}

/// A single hidden variable: a label attached to a deterministic trajectory.
///
/// `label` is the immutable identity drawn from `[0, 1)`. `rank` is the
/// bead's order coordinate within its sector (also in `[0, 1)`): the bead is
/// on the upper side exactly when `rank` lies below the sector waterline.
/// `epoch` records the time of the last dynamical reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnticBead {
    /// Immutable identity in `[0, 1)`.
    pub label: f64,
    /// Sector the bead currently lives in.
    pub sector: Sector,
    /// Order coordinate within the sector, in `[0, 1)`.
    pub rank: f64,
    /// Time of the last dynamical reset affecting this bead.
    pub epoch: f64,
}

/// Kind of intervention recorded in an ensemble's history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionKind {
    /// Readout of `Q` with the accompanying `a`/`c` region swap.
    Measurement,
    /// Label permutation that leaves every occupation untouched.
    PhantomPermutation,
}

/// A single history entry: what was done and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionRecord {
    /// Which intervention was applied.
    pub kind: InterventionKind,
    /// Time at which it was applied.
    pub time: f64,
}

/// Populations of the four regions at a fixed time. Entries are ensemble
/// fractions and always sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationVector {
    /// Fraction in region `a`.
    pub psi_a: f64,
    /// Fraction in region `b`.
    pub psi_b: f64,
    /// Fraction in region `c`.
    pub psi_c: f64,
    /// Fraction in region `d`.
    pub psi_d: f64,
}

impl OccupationVector {
    /// Sum of the four fractions (one up to rounding).
    pub fn total(&self) -> f64 {
        self.psi_a + self.psi_b + self.psi_c + self.psi_d
    }

    /// Probability of observing level 1, i.e. the `Q = +1` regions.
    pub fn p_state1(&self) -> f64 {
        self.psi_a + self.psi_c
    }

    /// Ensemble expectation of `Q`.
    pub fn q_expectation(&self) -> f64 {
        (self.psi_a + self.psi_c) - (self.psi_b + self.psi_d)
    }
}

/// Free-evolution state of one sector: total mass, upper-side fraction at the
/// last reset epoch, and that epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SectorState {
    mass: f64,
    upper_at_epoch: f64,
    epoch: f64,
}

impl SectorState {
    /// Waterline position at time `t`: the fraction of this sector's beads on
    /// its upper side, from the at-rest oscillator solution anchored at the
    /// epoch.
    fn upper_fraction(&self, omega: f64, t: f64) -> f64 {
        0.5 * (1.0 + (2.0 * self.upper_at_epoch - 1.0) * (omega * (t - self.epoch)).cos())
    }
}

/// An ensemble of beads together with the sector dynamics and the record of
/// interventions performed on it. All operations are value-semantic: they
/// never mutate `self`, and interventions hand back a new ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct OnticEnsemble {
    omega: RabiFrequency,
    beads: Vec<OnticBead>,
    ab: SectorState,
    cd: SectorState,
    history: Vec<InterventionRecord>,
}

impl OnticEnsemble {
    /// Builds the canonical initial ensemble: `n` beads with stratified labels
    /// `(k + 1/2) / n`, all in region `a`, ranks equal to labels, epoch zero.
    ///
    /// This mirrors preparing the system in the definite level-1 state.
    pub fn stratified(n: usize, omega: RabiFrequency) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyEnsemble(0));
        }
        let labels = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        Self::from_labels(labels, omega)
    }

    /// Builds an ensemble from explicit labels in `[0, 1)`; ranks start equal
    /// to the labels and everything sits in region `a` at epoch zero.
    ///
    /// Labels are expected to be distinct; ties are harmless for statistics
    /// but make individual trajectories indistinguishable.
    pub fn from_labels(labels: Vec<f64>, omega: RabiFrequency) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyEnsemble(0));
        }
        for &u in &labels {
            if !u.is_finite() || !(0.0..1.0).contains(&u) {
                return Err(Error::LabelOutOfRange(u));
            }
        }
        let beads = labels
            .into_iter()
            .map(|u| OnticBead {
                label: u,
                sector: Sector::Ab,
                rank: u,
                epoch: 0.0,
            })
            .collect();
        Ok(Self {
            omega,
            beads,
            ab: SectorState {
                mass: 1.0,
                upper_at_epoch: 1.0,
                epoch: 0.0,
            },
            cd: SectorState {
                mass: 0.0,
                upper_at_epoch: 1.0,
                epoch: 0.0,
            },
            history: Vec::new(),
        })
    }

    /// The drive frequency shared by both sectors.
    pub fn omega(&self) -> RabiFrequency {
        self.omega
    }

    /// The beads, in construction order (labels never move between indices
    /// except under a phantom permutation).
    pub fn beads(&self) -> &[OnticBead] {
        &self.beads
    }

    /// Number of beads.
    pub fn len(&self) -> usize {
        self.beads.len()
    }

    /// True when the ensemble holds no beads (unreachable for constructed
    /// ensembles).
    pub fn is_empty(&self) -> bool {
        self.beads.is_empty()
    }

    /// Total mass currently assigned to `sector`.
    pub fn sector_mass(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Ab => self.ab.mass,
            Sector::Cd => self.cd.mass,
        }
    }

    /// All interventions applied so far, in order.
    pub fn history(&self) -> &[InterventionRecord] {
        &self.history
    }

    /// Time of the most recent intervention, if any.
    pub fn last_intervention_time(&self) -> Option<f64> {
        self.history.last().map(|r| r.time)
    }

    fn sector_state(&self, sector: Sector) -> &SectorState {
        match sector {
            Sector::Ab => &self.ab,
            Sector::Cd => &self.cd,
        }
    }

    /// Waterline positions of both sectors at time `t`, as
    /// `(upper fraction of AB, upper fraction of CD)`.
    ///
    /// Bulk fast path: evaluating this once and comparing ranks against it is
    /// exactly [`Self::bead_region`] without the per-bead trigonometry.
    pub(crate) fn waterlines(&self, t: f64) -> (f64, f64) {
        let w = self.omega.value();
        (
            self.ab.upper_fraction(w, t),
            self.cd.upper_fraction(w, t),
        )
    }

    fn check_query_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if let Some(last) = self.last_intervention_time() {
            if t < last {
                return Err(Error::TimeBeforeIntervention { t, last });
            }
        }
        Ok(())
    }

    /// Region populations at time `t >=` the last intervention time.
    pub fn occupation(&self, t: f64) -> Result<OccupationVector> {
        self.check_query_time(t)?;
        let w = self.omega.value();
        let g_ab = self.ab.upper_fraction(w, t);
        let g_cd = self.cd.upper_fraction(w, t);
        Ok(OccupationVector {
            psi_a: self.ab.mass * g_ab,
            psi_b: self.ab.mass * (1.0 - g_ab),
            psi_c: self.cd.mass * g_cd,
            psi_d: self.cd.mass * (1.0 - g_cd),
        })
    }

    /// The region a given bead occupies at time `t`.
    ///
    /// Deterministic consequence of the no-crossing rule: the bead is on its
    /// sector's upper side exactly when its rank lies below the waterline.
    pub fn bead_region(&self, bead: &OnticBead, t: f64) -> Region {
        let g = self
            .sector_state(bead.sector)
            .upper_fraction(self.omega.value(), t);
        match (bead.sector, bead.rank < g) {
            (Sector::Ab, true) => Region::A,
            (Sector::Ab, false) => Region::B,
            (Sector::Cd, true) => Region::C,
            (Sector::Cd, false) => Region::D,
        }
    }

    /// Measures `Q` at time `t`: returns the readout value
    /// `(psi_a + psi_c) - (psi_b + psi_d)` together with the post-measurement
    /// ensemble in which the beads of region `a` and region `c` have swapped
    /// sectors.
    ///
    /// Each post-swap sub-ensemble restarts at rest at epoch `t`: sector
    /// masses and waterlines are re-anchored, and bead ranks are rescaled
    /// order-preservingly onto the new configuration. At most one measurement
    /// per ensemble is supported.
    pub fn measure(&self, t: f64) -> Result<(f64, OnticEnsemble)> {
        if let Some(first) = self
            .history
            .iter()
            .find(|r| r.kind == InterventionKind::Measurement)
        {
            return Err(Error::SecondMeasurement {
                first: first.time,
                requested: t,
            });
        }
        let occ = self.occupation(t)?;
        let readout = occ.q_expectation();

        let w = self.omega.value();
        let g_ab = self.ab.upper_fraction(w, t);
        let g_cd = self.cd.upper_fraction(w, t);

        // The a-beads join the former d-beads in sector CD; the c-beads join
        // the former b-beads in sector AB.
        let new_mass_ab = occ.psi_c + occ.psi_b;
        let new_mass_cd = occ.psi_a + occ.psi_d;
        let new_upper_ab = if new_mass_ab > 0.0 {
            occ.psi_c / new_mass_ab
        } else {
            1.0
        };
        let new_upper_cd = if new_mass_cd > 0.0 {
            occ.psi_a / new_mass_cd
        } else {
            1.0
        };

        let beads = self
            .beads
            .iter()
            .map(|bead| {
                // Same classification as `bead_region`, against the waterlines
                // computed once above.
                let region = match (bead.sector, bead.rank) {
                    (Sector::Ab, r) if r < g_ab => Region::A,
                    (Sector::Ab, _) => Region::B,
                    (Sector::Cd, r) if r < g_cd => Region::C,
                    (Sector::Cd, _) => Region::D,
                };
                let (sector, rank) = match region {
                    // Swapped into the upper part of CD, order preserved.
                    Region::A => (Sector::Cd, bead.rank / g_ab * new_upper_cd),
                    // Stays on the lower side of AB, compressed above the new
                    // waterline.
                    Region::B => (
                        Sector::Ab,
                        new_upper_ab + (bead.rank - g_ab) / (1.0 - g_ab) * (1.0 - new_upper_ab),
                    ),
                    // Swapped into the upper part of AB.
                    Region::C => (Sector::Ab, bead.rank / g_cd * new_upper_ab),
                    // Stays on the lower side of CD.
                    Region::D => (
                        Sector::Cd,
                        new_upper_cd + (bead.rank - g_cd) / (1.0 - g_cd) * (1.0 - new_upper_cd),
                    ),
                };
                OnticBead {
                    label: bead.label,
                    sector,
                    rank,
                    epoch: t,
                }
            })
            .collect();

        let mut history = self.history.clone();
        history.push(InterventionRecord {
            kind: InterventionKind::Measurement,
            time: t,
        });

        Ok((
            readout,
            OnticEnsemble {
                omega: self.omega,
                beads,
                ab: SectorState {
                    mass: new_mass_ab,
                    upper_at_epoch: new_upper_ab,
                    epoch: t,
                },
                cd: SectorState {
                    mass: new_mass_cd,
                    upper_at_epoch: new_upper_cd,
                    epoch: t,
                },
                history,
            },
        ))
    }

    /// Joint probability that a bead sits on side `s1` at `t1` and side `s2`
    /// at `t2` under free evolution (no intervention between the two times).
    ///
    /// Requires a single occupied sector. Because trajectories never cross,
    /// the joint statistics depend only on the waterline positions at the two
    /// endpoint times:
    ///
    /// * upper/upper: `min(g1, g2)`
    /// * upper/lower: `max(g1 - g2, 0)`
    /// * lower/upper: `max(g2 - g1, 0)`
    /// * lower/lower: `min(1 - g1, 1 - g2)`
    pub fn two_time_prob_free(&self, t1: f64, t2: f64, s1: Side, s2: Side) -> Result<f64> {
        self.check_query_time(t1)?;
        if !t2.is_finite() || t2 < t1 {
            return Err(Error::TimeOrdering { t1, t2 });
        }
        let state = if self.cd.mass <= crate::quantum::ANALYTIC_TOL {
            &self.ab
        } else if self.ab.mass <= crate::quantum::ANALYTIC_TOL {
            &self.cd
        } else {
            return Err(Error::MixedSectors {
                ab: self.ab.mass,
                cd: self.cd.mass,
            });
        };
        let w = self.omega.value();
        let g1 = state.upper_fraction(w, t1);
        let g2 = state.upper_fraction(w, t2);
        Ok(match (s1, s2) {
            (Side::Upper, Side::Upper) => g1.min(g2),
            (Side::Upper, Side::Lower) => (g1 - g2).max(0.0),
            (Side::Lower, Side::Upper) => (g2 - g1).max(0.0),
            (Side::Lower, Side::Lower) => (1.0 - g1).min(1.0 - g2),
        })
    }

    /// Free two-time correlator of `Q` for an arbitrary ensemble state
    /// (any sector split), with no intervention between the two times.
    ///
    /// Within each sector the endpoint waterlines fix the joint statistics,
    /// giving `sum_sectors mass * (1 - 2 |g(t1) - g(t2)|)`.
    pub fn free_correlator(&self, t1: f64, t2: f64) -> Result<f64> {
        self.check_query_time(t1)?;
        if !t2.is_finite() || t2 < t1 {
            return Err(Error::TimeOrdering { t1, t2 });
        }
        let w = self.omega.value();
        let mut e = 0.0;
        for state in [&self.ab, &self.cd] {
            if state.mass > 0.0 {
                let g1 = state.upper_fraction(w, t1);
                let g2 = state.upper_fraction(w, t2);
                e += state.mass * (1.0 - 2.0 * (g1 - g2).abs());
            }
        }
        Ok(e)
    }

    /// Two-time correlator of `Q` for a fresh ensemble.
    ///
    /// With `with_measurement = false` the value is assembled from the free
    /// two-time statistics. With `with_measurement = true` a measurement is
    /// performed at `t1` (including its region swap) and the correlator is the
    /// ensemble average of the product of the value read at `t1` and the value
    /// carried at `t2`; the result equals `cos(omega (t2 - t1))`, reproducing
    /// the quantum prediction exactly.
    pub fn correlator(&self, t1: f64, t2: f64, with_measurement: bool) -> Result<f64> {
        if !self.history.is_empty() {
            return Err(Error::NotFresh(self.history.len()));
        }
        self.check_query_time(t1)?;
        if !t2.is_finite() || t2 < t1 {
            return Err(Error::TimeOrdering { t1, t2 });
        }
        if !with_measurement {
            let mut e = 0.0;
            for s1 in [Side::Upper, Side::Lower] {
                for s2 in [Side::Upper, Side::Lower] {
                    e += s1.q_value()
                        * s2.q_value()
                        * self.two_time_prob_free(t1, t2, s1, s2)?;
                }
            }
            return Ok(e);
        }

        // Measured path: group beads by the region they occupied at t1. Each
        // cohort lands in a contiguous rank band of its post-measurement
        // sector, so its conditional mean of Q at t2 follows from the overlap
        // of that band with the new waterline.
        let occ = self.occupation(t1)?;
        let (_, measured) = self.measure(t1)?;
        let w = self.omega.value();

        let band_mean_q = |state: &SectorState, lo: f64, hi: f64| -> f64 {
            // Mean of Q at t2 over the beads whose post-measurement ranks fill
            // [lo, hi) uniformly within `state`'s sector.
            let g = state.upper_fraction(w, t2);
            let upper_fraction_in_band = (g.min(hi) - g.min(lo)) / (hi - lo);
            2.0 * upper_fraction_in_band - 1.0
        };

        let k_ab = measured.ab.upper_at_epoch;
        let k_cd = measured.cd.upper_at_epoch;
        let mut e = 0.0;
        if occ.psi_a > 0.0 {
            // Former a-beads: read +1, now fill [0, k_cd) of sector CD.
            e += occ.psi_a * band_mean_q(&measured.cd, 0.0, k_cd);
        }
        if occ.psi_b > 0.0 {
            // Former b-beads: read -1, now fill [k_ab, 1) of sector AB.
            e -= occ.psi_b * band_mean_q(&measured.ab, k_ab, 1.0);
        }
        if occ.psi_c > 0.0 {
            // Former c-beads: read +1, now fill [0, k_ab) of sector AB.
            e += occ.psi_c * band_mean_q(&measured.ab, 0.0, k_ab);
        }
        if occ.psi_d > 0.0 {
            // Former d-beads: read -1, now fill [k_cd, 1) of sector CD.
            e -= occ.psi_d * band_mean_q(&measured.cd, k_cd, 1.0);
        }
        Ok(e)
    }

    /// Applies a phantom permutation at time `t`: within every region the
    /// bead labels are reversed (trajectories keep their sector, rank, and
    /// epoch; only the identity riding each trajectory moves).
    ///
    /// Occupations, sector states, and every downstream observable statistic
    /// are identical to the unpermuted ensemble; only the label-to-trajectory
    /// assignment changes. The intervention is recorded in the history.
    pub fn phantom_permutation(&self, t: f64) -> OnticEnsemble {
        let mut groups: [Vec<usize>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for (index, bead) in self.beads.iter().enumerate() {
            let slot = match self.bead_region(bead, t) {
                Region::A => 0,
                Region::B => 1,
                Region::C => 2,
                Region::D => 3,
            };
            groups[slot].push(index);
        }
        let mut beads = self.beads.clone();
        for group in &mut groups {
            // Deterministic reversal along the rank ordering of the region.
            group.sort_by(|&i, &j| {
                self.beads[i]
                    .rank
                    .partial_cmp(&self.beads[j].rank)
                    .expect("ranks are finite")
            });
            let labels: Vec<f64> = group.iter().map(|&i| self.beads[i].label).collect();
            for (slot, &i) in group.iter().enumerate() {
                beads[i].label = labels[labels.len() - 1 - slot];
            }
        }
        let mut history = self.history.clone();
        history.push(InterventionRecord {
            kind: InterventionKind::PhantomPermutation,
            time: t,
        });
        OnticEnsemble {
            omega: self.omega,
            beads,
            ab: self.ab,
            cd: self.cd,
            history,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{self, MeasurementOutcome, QubitState};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn omega1() -> RabiFrequency {
        RabiFrequency::new(1.0).expect("unit frequency is valid")
    }

    #[test]
    fn stratified_rejects_empty_and_builds_centered_labels() {
        assert!(matches!(
            OnticEnsemble::stratified(0, omega1()),
            Err(Error::EmptyEnsemble(0))
        ));
        let ens = OnticEnsemble::stratified(1, omega1()).unwrap();
        assert_eq!(ens.beads()[0].label, 0.5);
        assert_eq!(ens.beads()[0].rank, 0.5);
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        let labels: Vec<f64> = ens.beads().iter().map(|b| b.label).collect();
        assert_eq!(labels, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(ens.beads().iter().all(|b| b.sector == Sector::Ab));
        assert_eq!(ens.sector_mass(Sector::Ab), 1.0);
        assert_eq!(ens.sector_mass(Sector::Cd), 0.0);
    }

    #[test]
    fn occupation_follows_the_population_curve() {
        let ens = OnticEnsemble::stratified(8, omega1()).unwrap();
        let at0 = ens.occupation(0.0).unwrap();
        assert_eq!(at0.psi_a, 1.0);
        assert_eq!(at0.psi_b, 0.0);
        assert_eq!(at0.psi_c, 0.0);
        assert_eq!(at0.psi_d, 0.0);

        let quarter = ens.occupation(FRAC_PI_2).unwrap();
        assert!((quarter.psi_a - 0.5).abs() < 1e-12);
        assert!((quarter.psi_b - 0.5).abs() < 1e-12);
        assert!((quarter.total() - 1.0).abs() < 1e-12);

        let half = ens.occupation(PI).unwrap();
        assert!(half.psi_a.abs() < 1e-12);
        assert!((half.psi_b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupation_rejects_invalid_times() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        assert!(matches!(
            ens.occupation(-0.5),
            Err(Error::NegativeTime(_))
        ));
        let (_, measured) = ens.measure(1.0).unwrap();
        assert!(matches!(
            measured.occupation(0.5),
            Err(Error::TimeBeforeIntervention { .. })
        ));
        assert!(measured.occupation(1.0).is_ok());
    }

    #[test]
    fn bead_regions_track_the_waterline() {
        let n = 1000;
        let ens = OnticEnsemble::stratified(n, omega1()).unwrap();
        for &t in &[0.0, 0.4, FRAC_PI_2, 2.0, PI] {
            let expected = 0.5 * (1.0 + t.cos());
            let in_a = ens
                .beads()
                .iter()
                .filter(|b| ens.bead_region(b, t) == Region::A)
                .count() as f64
                / n as f64;
            assert!(
                (in_a - expected).abs() <= 1.0 / n as f64,
                "upper fraction {in_a} should track waterline {expected} at t = {t}"
            );
        }
        // At t = 0 every bead is in region a; at t = pi every bead is in b.
        assert!(ens
            .beads()
            .iter()
            .all(|b| ens.bead_region(b, 0.0) == Region::A));
        assert!(ens
            .beads()
            .iter()
            .all(|b| ens.bead_region(b, PI) == Region::B));
    }

    #[test]
    fn measurement_at_time_zero_reads_plus_one_and_relocates_everything() {
        let ens = OnticEnsemble::stratified(16, omega1()).unwrap();
        let (value, measured) = ens.measure(0.0).unwrap();
        assert!((value - 1.0).abs() < 1e-15);
        assert!(measured
            .beads()
            .iter()
            .all(|b| b.sector == Sector::Cd && b.epoch == 0.0));
        assert!((measured.sector_mass(Sector::Cd) - 1.0).abs() < 1e-15);
        // Everything sits in region c immediately after the swap.
        assert!(measured
            .beads()
            .iter()
            .all(|b| measured.bead_region(b, 0.0) == Region::C));
    }

    #[test]
    fn measurement_at_quarter_period_splits_the_ensemble() {
        let n = 10_000;
        let ens = OnticEnsemble::stratified(n, omega1()).unwrap();
        let (value, measured) = ens.measure(FRAC_PI_2).unwrap();
        assert!(value.abs() < 1e-12, "balanced populations read 0, got {value}");
        assert!((measured.sector_mass(Sector::Cd) - 0.5).abs() < 1e-12);
        assert!((measured.sector_mass(Sector::Ab) - 0.5).abs() < 1e-12);
        // Beads below the waterline moved to sector CD; the rest stayed.
        for (bead, original) in measured.beads().iter().zip(ens.beads()) {
            assert_eq!(bead.label, original.label, "labels stay in place");
            assert_eq!(bead.epoch, FRAC_PI_2);
            if original.rank < 0.5 {
                assert_eq!(bead.sector, Sector::Cd);
            } else {
                assert_eq!(bead.sector, Sector::Ab);
            }
        }
        // Occupations remain normalized afterwards.
        let occ = measured.occupation(2.0).unwrap();
        assert!((occ.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_measurement_is_rejected() {
        let ens = OnticEnsemble::stratified(8, omega1()).unwrap();
        let (_, measured) = ens.measure(1.0).unwrap();
        assert!(matches!(
            measured.measure(2.0),
            Err(Error::SecondMeasurement { .. })
        ));
    }

    #[test]
    fn post_measurement_cohorts_oscillate_in_antiphase() {
        // The beads that read +1 carry mean Q = cos(omega dt) afterwards; the
        // beads that read -1 carry mean Q = -cos(omega dt).
        let n = 100_000;
        let t1 = FRAC_PI_2;
        let ens = OnticEnsemble::stratified(n, omega1()).unwrap();
        let (_, measured) = ens.measure(t1).unwrap();
        for &dt in &[0.3, FRAC_PI_4, 1.2, 2.9] {
            let t2 = t1 + dt;
            let (mut sum_plus, mut n_plus, mut sum_minus, mut n_minus) = (0.0, 0usize, 0.0, 0usize);
            for (bead, original) in measured.beads().iter().zip(ens.beads()) {
                let q2 = measured.bead_region(bead, t2).q_value();
                if ens.bead_region(original, t1) == Region::A {
                    sum_plus += q2;
                    n_plus += 1;
                } else {
                    sum_minus += q2;
                    n_minus += 1;
                }
            }
            let mean_plus = sum_plus / n_plus as f64;
            let mean_minus = sum_minus / n_minus as f64;
            let tol = 4.0 / n as f64 * n as f64 / n_plus.min(n_minus) as f64;
            assert!(
                (mean_plus - dt.cos()).abs() <= tol,
                "+1 cohort mean {mean_plus} vs cos({dt}) = {}",
                dt.cos()
            );
            assert!(
                (mean_minus + dt.cos()).abs() <= tol,
                "-1 cohort mean {mean_minus} vs -cos({dt}) = {}",
                -dt.cos()
            );
        }
    }

    #[test]
    fn free_two_time_statistics_use_endpoint_waterlines() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        let p = ens
            .two_time_prob_free(PI / 3.0, 2.0 * PI / 3.0, Side::Upper, Side::Upper)
            .unwrap();
        assert!((p - 0.25).abs() < 1e-12, "expected min(3/4, 1/4) = 1/4, got {p}");

        let p = ens
            .two_time_prob_free(1.3, 1.3, Side::Upper, Side::Lower)
            .unwrap();
        assert_eq!(p, 0.0, "equal times leave no room for a side change");

        let mut total = 0.0;
        for s1 in [Side::Upper, Side::Lower] {
            for s2 in [Side::Upper, Side::Lower] {
                total += ens.two_time_prob_free(0.7, 2.6, s1, s2).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-12, "joint side statistics sum to {total}");
    }

    #[test]
    fn free_two_time_statistics_reject_mixed_sectors_and_bad_times() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        assert!(matches!(
            ens.two_time_prob_free(2.0, 1.0, Side::Upper, Side::Upper),
            Err(Error::TimeOrdering { .. })
        ));
        let (_, measured) = ens.measure(FRAC_PI_2).unwrap();
        assert!(matches!(
            measured.two_time_prob_free(2.0, 2.5, Side::Upper, Side::Upper),
            Err(Error::MixedSectors { .. })
        ));
    }

    #[test]
    fn free_correlator_matches_endpoint_overlap_value() {
        // Frozen value for omega t1 = pi/4, omega t2 = pi/2:
        // E = 1 - |cos(pi/4) - cos(pi/2)| = 1 - sqrt(2)/2.
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        let e = ens.correlator(FRAC_PI_4, FRAC_PI_2, false).unwrap();
        let expected = 1.0 - SQRT_2 / 2.0;
        assert!(
            (e - expected).abs() < 1e-12,
            "free correlator {e} vs frozen value {expected}"
        );
        let via_helper = ens.free_correlator(FRAC_PI_4, FRAC_PI_2).unwrap();
        assert!((e - via_helper).abs() < 1e-15, "assembled and general routes agree");
    }

    #[test]
    fn measured_correlator_reproduces_the_quantum_value_exactly() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        let s = QubitState::state1();
        for &(t1, t2) in &[
            (0.2, 0.2 + FRAC_PI_4),
            (FRAC_PI_2, FRAC_PI_2 + 1.1),
            (1.0, 3.5),
            (2.4, 2.4),
        ] {
            let hv = ens.correlator(t1, t2, true).unwrap();
            let qm = quantum::correlator(&s, omega1(), t1, t2).unwrap();
            assert!(
                (hv - qm).abs() < 1e-12,
                "measured bead correlator {hv} vs quantum {qm} at ({t1}, {t2})"
            );
            assert!(
                (hv - (t2 - t1).cos()).abs() < 1e-12,
                "measured bead correlator {hv} vs cos {}",
                (t2 - t1).cos()
            );
        }
    }

    #[test]
    fn correlator_rejects_reversed_times_and_prior_history() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        assert!(matches!(
            ens.correlator(2.0, 1.0, true),
            Err(Error::TimeOrdering { .. })
        ));
        let (_, measured) = ens.measure(0.5).unwrap();
        assert!(matches!(
            measured.correlator(1.0, 2.0, false),
            Err(Error::NotFresh(1))
        ));
        let permuted = ens.phantom_permutation(0.5);
        assert!(matches!(
            permuted.correlator(1.0, 2.0, false),
            Err(Error::NotFresh(1))
        ));
    }

    #[test]
    fn single_time_statistics_match_the_quantum_prediction() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        let s = QubitState::state1();
        for k in 0..=50 {
            let t = 2.0 * PI * k as f64 / 50.0;
            let hv = ens.occupation(t).unwrap().p_state1();
            let qm = quantum::prob_single(&s, omega1(), t, MeasurementOutcome::State1).unwrap();
            assert!(
                (hv - qm).abs() < 1e-12,
                "p(level 1) mismatch at t = {t}: beads {hv} vs quantum {qm}"
            );
        }
    }

    #[test]
    fn phantom_permutation_preserves_all_observable_statistics() {
        let ens = OnticEnsemble::stratified(10, omega1()).unwrap();
        let permuted = ens.phantom_permutation(FRAC_PI_2);

        // Occupations and correlators are bit-identical because the sector
        // states are untouched.
        for &t in &[FRAC_PI_2, 2.0, PI] {
            assert_eq!(
                ens.occupation(t).unwrap(),
                permuted.occupation(t).unwrap(),
                "occupations must be unchanged at t = {t}"
            );
            assert_eq!(
                ens.free_correlator(FRAC_PI_2, t).unwrap(),
                permuted.free_correlator(FRAC_PI_2, t).unwrap()
            );
        }

        // The label multiset is preserved while some labels moved trajectory.
        let mut before: Vec<f64> = ens.beads().iter().map(|b| b.label).collect();
        let mut after: Vec<f64> = permuted.beads().iter().map(|b| b.label).collect();
        let moved = before
            .iter()
            .zip(&after)
            .filter(|(x, y)| x != y)
            .count();
        assert!(moved > 0, "the reversal must move at least one label");
        before.sort_by(|a, b| a.partial_cmp(b).unwrap());
        after.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(before, after, "labels are permuted, never created or lost");

        // Ranks, sectors and epochs are untouched.
        for (b, p) in ens.beads().iter().zip(permuted.beads()) {
            assert_eq!(b.rank, p.rank);
            assert_eq!(b.sector, p.sector);
            assert_eq!(b.epoch, p.epoch);
        }

        assert_eq!(permuted.history().len(), 1);
        assert_eq!(
            permuted.history()[0].kind,
            InterventionKind::PhantomPermutation
        );
    }

    #[test]
    fn measurement_readout_matches_the_occupation_expectation() {
        let ens = OnticEnsemble::stratified(4, omega1()).unwrap();
        for &t in &[0.0, 0.7, FRAC_PI_2, 2.9] {
            let (value, _) = ens.measure(t).unwrap();
            let expected = ens.occupation(t).unwrap().q_expectation();
            assert_eq!(value, expected, "readout at t = {t}");
        }
    }
}
