//! Exact quantum predictions for a two-level system driven by the constant
//! off-diagonal Hamiltonian `H = (omega/2) * [[0, 1], [1, 0]]`.
//!
//! The propagator has the closed form
//! `U(t) = cos(omega t / 2) * I - i sin(omega t / 2) * [[0, 1], [1, 0]]`,
//! so every probability in this module is evaluated without numerical
//! integration. Sequential measurement statistics follow the projective rule:
//! apply the projector for the first outcome, propagate the (unnormalized)
//! vector, apply the second projector, and read off the squared norm.

use num_complex::Complex64;

use crate::{Error, Result};

/// Tolerance for exact analytic identities (normalization, closed forms).
pub const ANALYTIC_TOL: f64 = 1e-12;

/// Strictly positive drive frequency; sets the oscillation rate between the
/// two levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiFrequency(f64);

impl RabiFrequency {
    /// Validates that the frequency is finite and strictly positive.
    pub fn new(omega: f64) -> Result<Self> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidRabiFrequency(omega));
        }
        Ok(Self(omega))
    }

    /// The frequency as a plain real.
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Normalized state of the two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    amplitude_1: Complex64,
    amplitude_2: Complex64,
}

impl QubitState {
    /// Builds a state from its two amplitudes, rejecting vectors whose norm
    /// deviates from one by more than `ANALYTIC_TOL`.
    pub fn new(amplitude_1: Complex64, amplitude_2: Complex64) -> Result<Self> {
        let norm_sq = amplitude_1.norm_sqr() + amplitude_2.norm_sqr();
        let deviation = (norm_sq - 1.0).abs();
        if !deviation.is_finite() || deviation > ANALYTIC_TOL {
            return Err(Error::StateNotNormalized {
                deviation,
                limit: ANALYTIC_TOL,
            });
        }
        Ok(Self {
            amplitude_1,
            amplitude_2,
        })
    }

    /// The basis state with definite value 1 (amplitudes (1, 0)).
    pub fn state1() -> Self {
        Self {
            amplitude_1: Complex64::new(1.0, 0.0),
            amplitude_2: Complex64::new(0.0, 0.0),
        }
    }

    /// The basis state with definite value 2 (amplitudes (0, 1)).
    pub fn state2() -> Self {
        Self {
            amplitude_1: Complex64::new(0.0, 0.0),
            amplitude_2: Complex64::new(1.0, 0.0),
        }
    }

    /// Amplitude on the first basis state.
    pub fn amplitude_1(&self) -> Complex64 {
        self.amplitude_1
    }

    /// Amplitude on the second basis state.
    pub fn amplitude_2(&self) -> Complex64 {
        self.amplitude_2
    }
}

/// Outcome of a projective measurement of the dichotomic variable `Q`.
///
/// `State1` carries `Q = +1` and `State2` carries `Q = -1`; the two encodings
/// (level index and dichotomic value) always agree by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementOutcome {
    /// The system was found in level 1 (`Q = +1`).
    State1,
    /// The system was found in level 2 (`Q = -1`).
    State2,
}

impl MeasurementOutcome {
    /// Both outcomes, in level order.
    pub const ALL: [Self; 2] = [Self::State1, Self::State2];

    /// The dichotomic value carried by this outcome.
    pub fn q_value(self) -> f64 {
        match self {
            Self::State1 => 1.0,
            Self::State2 => -1.0,
        }
    }

    /// The level index (1 or 2) of this outcome.
    pub fn level(self) -> u8 {
        match self {
            Self::State1 => 1,
            Self::State2 => 2,
        }
    }
}

/// Strictly increasing grid of non-negative times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    /// Validates a raw sequence: at least two entries, all finite and
    /// non-negative, strictly increasing.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::GridTooShort(times.len()));
        }
        for (index, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::NegativeTime(t));
            }
            if index > 0 && times[index - 1] >= t {
                return Err(Error::GridNotIncreasing {
                    index,
                    prev: times[index - 1],
                    next: t,
                });
            }
        }
        Ok(Self(times))
    }

    /// Evenly spaced grid of `n` points from `t_min` to `t_max` inclusive.
    pub fn linspace(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooShort(n));
        }
        let step = (t_max - t_min) / (n - 1) as f64;
        Self::new((0..n).map(|k| t_min + step * k as f64).collect())
    }

    /// The grid as a slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Iterator over the grid times.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when the grid holds no points (unreachable for validated grids).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Applies the closed-form propagator for duration `t` (may be negative,
/// which inverts the evolution).
pub fn evolve(state: &QubitState, omega: RabiFrequency, t: f64) -> QubitState {
    let half = 0.5 * omega.value() * t;
    let c = Complex64::new(half.cos(), 0.0);
    let mis = Complex64::new(0.0, -half.sin());
    QubitState {
        amplitude_1: c * state.amplitude_1 + mis * state.amplitude_2,
        amplitude_2: mis * state.amplitude_1 + c * state.amplitude_2,
    }
}

fn project(state: &QubitState, outcome: MeasurementOutcome) -> QubitState {
    // Intentionally unnormalized: sequential probabilities read off the final
    // squared norm, so no intermediate renormalization is needed and global
    // phase never influences any reported number.
    match outcome {
        MeasurementOutcome::State1 => QubitState {
            amplitude_1: state.amplitude_1,
            amplitude_2: Complex64::new(0.0, 0.0),
        },
        MeasurementOutcome::State2 => QubitState {
            amplitude_1: Complex64::new(0.0, 0.0),
            amplitude_2: state.amplitude_2,
        },
    }
}

fn norm_sqr(state: &QubitState) -> f64 {
    state.amplitude_1.norm_sqr() + state.amplitude_2.norm_sqr()
}

/// Probability of finding `outcome` when measuring at time `t >= 0` after
/// preparing `initial` at time zero.
pub fn prob_single(
    initial: &QubitState,
    omega: RabiFrequency,
    t: f64,
    outcome: MeasurementOutcome,
) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let evolved = evolve(initial, omega, t);
    Ok(norm_sqr(&project(&evolved, outcome)))
}

/// Joint probability of obtaining `o1` at `t1` and then `o2` at `t2 >= t1`
/// under projective (collapsing) measurements.
pub fn prob_two_time(
    initial: &QubitState,
    omega: RabiFrequency,
    t1: f64,
    o1: MeasurementOutcome,
    t2: f64,
    o2: MeasurementOutcome,
) -> Result<f64> {
    if !t1.is_finite() || t1 < 0.0 {
        return Err(Error::NegativeTime(t1));
    }
    if !t2.is_finite() || t2 < t1 {
        return Err(Error::TimeOrdering { t1, t2 });
    }
    let at_t1 = evolve(initial, omega, t1);
    let collapsed = project(&at_t1, o1);
    let at_t2 = evolve(&collapsed, omega, t2 - t1);
    Ok(norm_sqr(&project(&at_t2, o2)))
}

/// Two-time correlator `E(t1, t2) = sum_{o1,o2} q(o1) q(o2) p(o1, t1; o2, t2)`
/// for sequential projective measurements.
pub fn correlator(initial: &QubitState, omega: RabiFrequency, t1: f64, t2: f64) -> Result<f64> {
    let mut e = 0.0;
    for o1 in MeasurementOutcome::ALL {
        for o2 in MeasurementOutcome::ALL {
            e += o1.q_value() * o2.q_value() * prob_two_time(initial, omega, t1, o1, t2, o2)?;
        }
    }
    Ok(e)
}

/// Leggett-Garg combination for the equally spaced four-time protocol
/// `t, 2t, 3t, 4t` starting from the definite level-1 state:
/// `L(t) = 3 cos(omega t) - cos(3 omega t)`.
///
/// The maximum value `2 sqrt(2)` is reached at `omega t = pi / 4`.
pub fn lg_quantity_quantum(omega: RabiFrequency, t: f64) -> f64 {
    let x = omega.value() * t;
    3.0 * x.cos() - (3.0 * x).cos()
}
