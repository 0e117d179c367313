use thiserror::Error;

/// Errors reported by the simulator and analysis layers.
///
/// Every variant names the offending quantity so callers can surface precise
/// diagnostics; none of them are ever produced on the documented happy paths.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Rabi frequency must be a finite, strictly positive real.
    #[error("rabi frequency must be finite and > 0, got {0}")]
    InvalidRabiFrequency(f64),

    /// State amplitudes must form a unit vector.
    #[error("state norm^2 deviates from 1 by {deviation:e} (limit {limit:e})")]
    StateNotNormalized { deviation: f64, limit: f64 },

    /// Two-time quantities require `t1 <= t2`.
    #[error("time ordering violated: t1 = {t1} > t2 = {t2}")]
    TimeOrdering { t1: f64, t2: f64 },

    /// Times must be finite and non-negative.
    #[error("time must be finite and >= 0, got {0}")]
    NegativeTime(f64),

    /// A time grid needs at least two entries.
    #[error("time grid needs at least 2 points, got {0}")]
    GridTooShort(usize),

    /// Time grids must be strictly increasing.
    #[error("time grid is not strictly increasing at index {index}: {prev} >= {next}")]
    GridNotIncreasing { index: usize, prev: f64, next: f64 },

    /// Leggett-Garg scans place measurements at t, 2t, 3t, 4t and need t > 0.
    #[error("scan times must be > 0, got {0}")]
    NonPositiveScanTime(f64),

    /// Bead ensembles must contain at least one bead.
    #[error("ensemble needs at least 1 bead, got {0}")]
    EmptyEnsemble(usize),

    /// A bead label fell outside the half-open unit interval.
    #[error("bead labels must be finite and lie in [0, 1), got {0}")]
    LabelOutOfRange(f64),

    /// Ensemble queries cannot predate the latest intervention.
    #[error("query time {t} is earlier than the last intervention at {last}")]
    TimeBeforeIntervention { t: f64, last: f64 },

    /// The bead model supports a single intermediate measurement.
    #[error("a measurement was already performed at t = {first}; a second one at t = {requested} is outside the model's domain")]
    SecondMeasurement { first: f64, requested: f64 },

    /// Correlator evaluation starts from an ensemble with no prior interventions.
    #[error("correlator evaluation requires a fresh ensemble, but the history already holds {0} intervention(s)")]
    NotFresh(usize),

    /// Free two-time statistics are defined for a single occupied sector.
    #[error("free two-time statistics need a single occupied sector; sector masses are {ab} and {cd}")]
    MixedSectors { ab: f64, cd: f64 },

    /// A correlator value escaped its admissible interval.
    #[error("correlator {name} = {value} lies outside [-1-{slack:e}, 1+{slack:e}]")]
    CorrelatorOutOfRange {
        name: &'static str,
        value: f64,
        slack: f64,
    },

    /// Standard errors accompany estimates and must be finite and >= 0.
    #[error("standard error for {name} must be finite and >= 0, got {value}")]
    InvalidStdError { name: &'static str, value: f64 },

    /// A generic realist ensemble needs at least one member.
    #[error("generic realist ensemble needs at least 1 member")]
    EmptyGenericEnsemble,

    /// Member weights form a probability distribution.
    #[error("member weight at index {index} is negative: {weight}")]
    NegativeWeight { index: usize, weight: f64 },

    /// Member weights must sum to one.
    #[error("member weights sum to {sum}, expected 1 within {limit:e}")]
    WeightsNotNormalized { sum: f64, limit: f64 },

    /// Dichotomic values are exactly +1 or -1.
    #[error("member {member} carries a non-dichotomic value {value} at time slot {slot}")]
    NonDichotomicValue { member: usize, slot: usize, value: f64 },

    /// Invasiveness reports need at least one probe time.
    #[error("probe set is empty")]
    EmptyProbeSet,

    /// Probe times must lie strictly after the intervention.
    #[error("probe time {probe} does not lie strictly after the intervention at {t0}")]
    ProbeNotAfterIntervention { probe: f64, t0: f64 },

    /// Monte Carlo runs need a minimum ensemble size to report meaningful errors.
    #[error("monte carlo estimation needs at least {min} beads, got {got}")]
    TooFewBeads { min: usize, got: usize },
}
