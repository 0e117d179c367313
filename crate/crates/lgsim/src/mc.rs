//! Monte Carlo estimation of bead-model correlators, plus a deterministic
//! stratified enumeration that serves as an independent cross-check.
//!
//! Randomness is counter-based: every variate is a pure function of
//! `(seed, index)`, so results are reproducible bit for bit across runs,
//! thread counts, and work partitions. Per-bead correlator products are
//! `±1` and are accumulated as integers, which makes the parallel and serial
//! accumulation orders exactly equivalent.

use crate::beads::{OnticBead, OnticEnsemble, Sector};
use crate::quantum::RabiFrequency;
use crate::{Error, Result};
use rayon::prelude::*;

/// Standard 64-bit finalizer: a bijective avalanche mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Golden-ratio increment used to spread consecutive counters across the
/// 64-bit state space.
const COUNTER_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;

/// Deterministic counter-based uniform sampler.
///
/// The `index`-th variate depends only on `(seed, index)`, never on how many
/// variates were drawn before or on which thread draws it. Derived
/// substreams decorrelate independent estimation tasks that share one
/// user-facing seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededSampler {
    seed: u64,
}

impl SeededSampler {
    /// Creates a sampler for the given seed.
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The seed this sampler draws from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `index`-th uniform variate in `[0, 1)` of this stream.
    pub fn label(&self, index: u64) -> f64 {
        let z = mix64(self.seed.wrapping_add(index.wrapping_mul(COUNTER_STRIDE)));
        // Keep the top 53 bits: every value is an exactly representable
        // multiple of 2^-53.
        (z >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// A decorrelated child stream for task number `stream`.
    pub fn substream(&self, stream: u64) -> SeededSampler {
        // stream + 1 keeps substream(0) distinct from the parent stream.
        SeededSampler {
            seed: mix64(self.seed ^ stream.wrapping_add(1).wrapping_mul(COUNTER_STRIDE)),
        }
    }
}

/// Outcome of a Monte Carlo estimate: sample mean, its standard error, and
/// the sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    /// Sample mean of the per-bead products.
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Number of beads averaged over.
    pub n_samples: usize,
}

/// Draws an `n`-bead ensemble with labels taken from the sampler's stream
/// (bead `k` gets variate `k`), everything starting in region `a`.
pub fn sample_ensemble(
    sampler: &SeededSampler,
    n: usize,
    omega: RabiFrequency,
) -> Result<OnticEnsemble> {
    let labels = (0..n).map(|k| sampler.label(k as u64)).collect();
    OnticEnsemble::from_labels(labels, omega)
}

/// The two endpoint configurations a correlator evaluation walks beads
/// through: the ensemble at `t1` and (if measuring) the post-measurement
/// ensemble at `t2`, with both waterline pairs precomputed.
struct EndpointPair {
    first: OnticEnsemble,
    second: Option<OnticEnsemble>,
    waterlines_t1: (f64, f64),
    waterlines_t2: (f64, f64),
}

impl EndpointPair {
    fn prepare(ensemble: OnticEnsemble, t1: f64, t2: f64, with_measurement: bool) -> Result<Self> {
        if !t1.is_finite() || t1 < 0.0 {
            return Err(Error::NegativeTime(t1));
        }
        if !t2.is_finite() || t2 < t1 {
            return Err(Error::TimeOrdering { t1, t2 });
        }
        let waterlines_t1 = ensemble.waterlines(t1);
        if with_measurement {
            let (_, post) = ensemble.measure(t1)?;
            let waterlines_t2 = post.waterlines(t2);
            Ok(Self {
                first: ensemble,
                second: Some(post),
                waterlines_t1,
                waterlines_t2,
            })
        } else {
            let waterlines_t2 = ensemble.waterlines(t2);
            Ok(Self {
                first: ensemble,
                second: None,
                waterlines_t1,
                waterlines_t2,
            })
        }
    }

    fn beads_t2(&self) -> &[OnticBead] {
        self.second.as_ref().unwrap_or(&self.first).beads()
    }
}

#[inline]
fn is_upper(bead: &OnticBead, waterlines: (f64, f64)) -> bool {
    let g = match bead.sector {
        Sector::Ab => waterlines.0,
        Sector::Cd => waterlines.1,
    };
    bead.rank < g
}

/// `q(t1) * q(t2)` for one trajectory, exactly `+1` or `-1`.
#[inline]
fn trajectory_product(
    bead_t1: &OnticBead,
    waterlines_t1: (f64, f64),
    bead_t2: &OnticBead,
    waterlines_t2: (f64, f64),
) -> i64 {
    if is_upper(bead_t1, waterlines_t1) == is_upper(bead_t2, waterlines_t2) {
        1
    } else {
        -1
    }
}

fn summarize(sum: i64, n: usize) -> EstimatorResult {
    let mean = sum as f64 / n as f64;
    let std_error = ((1.0 - mean * mean) / (n - 1) as f64).max(0.0).sqrt();
    EstimatorResult {
        mean,
        std_error,
        n_samples: n,
    }
}

fn check_sample_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewBeads { min: 2, got: n });
    }
    Ok(())
}

/// Monte Carlo estimate of the two-time correlator over `n` sampled beads,
/// evaluated in parallel.
///
/// With `with_measurement` the readout at `t1` includes the region swap; the
/// per-bead product multiplies the value held at `t1` with the value the same
/// label carries at `t2`. The result is bit-identical to
/// [`estimate_correlator_serial`] because products are integers and integer
/// addition is associative.
pub fn estimate_correlator(
    sampler: &SeededSampler,
    n: usize,
    omega: RabiFrequency,
    t1: f64,
    t2: f64,
    with_measurement: bool,
) -> Result<EstimatorResult> {
    check_sample_count(n)?;
    let endpoints =
        EndpointPair::prepare(sample_ensemble(sampler, n, omega)?, t1, t2, with_measurement)?;
    let sum: i64 = endpoints
        .first
        .beads()
        .par_iter()
        .zip(endpoints.beads_t2().par_iter())
        .map(|(b1, b2)| {
            trajectory_product(b1, endpoints.waterlines_t1, b2, endpoints.waterlines_t2)
        })
        .sum();
    Ok(summarize(sum, n))
}

/// Single-threaded reference implementation of [`estimate_correlator`].
pub fn estimate_correlator_serial(
    sampler: &SeededSampler,
    n: usize,
    omega: RabiFrequency,
    t1: f64,
    t2: f64,
    with_measurement: bool,
) -> Result<EstimatorResult> {
    check_sample_count(n)?;
    let endpoints =
        EndpointPair::prepare(sample_ensemble(sampler, n, omega)?, t1, t2, with_measurement)?;
    let sum: i64 = endpoints
        .first
        .beads()
        .iter()
        .zip(endpoints.beads_t2())
        .map(|(b1, b2)| {
            trajectory_product(b1, endpoints.waterlines_t1, b2, endpoints.waterlines_t2)
        })
        .sum();
    Ok(summarize(sum, n))
}

/// Deterministic enumeration of the correlator over the stratified `n`-bead
/// ensemble — no randomness involved.
///
/// Walks every trajectory through exactly the same machinery as the Monte
/// Carlo estimate, so it provides an independent O(1/n) route to the
/// analytic correlators.
pub fn enumerate_oracle(
    n: usize,
    omega: RabiFrequency,
    t1: f64,
    t2: f64,
    with_measurement: bool,
) -> Result<f64> {
    let endpoints = EndpointPair::prepare(
        OnticEnsemble::stratified(n, omega)?,
        t1,
        t2,
        with_measurement,
    )?;
    let sum: i64 = endpoints
        .first
        .beads()
        .par_iter()
        .zip(endpoints.beads_t2().par_iter())
        .map(|(b1, b2)| {
            trajectory_product(b1, endpoints.waterlines_t1, b2, endpoints.waterlines_t2)
        })
        .sum();
    Ok(sum as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn omega1() -> RabiFrequency {
        RabiFrequency::new(1.0).expect("unit frequency is valid")
    }

    #[test]
    fn labels_are_pure_functions_of_seed_and_index() {
        let s = SeededSampler::new(42);
        for index in [0u64, 1, 17, 1_000_000] {
            assert_eq!(
                s.label(index).to_bits(),
                SeededSampler::new(42).label(index).to_bits(),
                "variate {index} must be reproducible"
            );
        }
        assert_ne!(
            SeededSampler::new(1).label(0).to_bits(),
            SeededSampler::new(2).label(0).to_bits(),
            "different seeds should give different streams"
        );
    }

    #[test]
    fn labels_are_uniform_on_the_unit_interval() {
        let s = SeededSampler::new(7);
        let n = 10_000u64;
        let mut sum = 0.0;
        for index in 0..n {
            let u = s.label(index);
            assert!((0.0..1.0).contains(&u), "label {u} escaped [0, 1)");
            sum += u;
        }
        let mean = sum / n as f64;
        // Uniform mean has standard error (1/sqrt(12)) / sqrt(n).
        let four_se = 4.0 / (12.0f64 * n as f64).sqrt();
        assert!(
            (mean - 0.5).abs() < four_se,
            "sample mean {mean} deviates from 1/2 by more than {four_se}"
        );
    }

    #[test]
    fn substreams_are_decorrelated() {
        let s = SeededSampler::new(42);
        let a = s.substream(0);
        let b = s.substream(1);
        assert_ne!(a.seed(), b.seed());
        assert_ne!(a.seed(), s.seed());
        assert_ne!(a.label(0).to_bits(), b.label(0).to_bits());
    }

    #[test]
    fn sampled_ensembles_are_reproducible() {
        let s = SeededSampler::new(42);
        let e1 = sample_ensemble(&s, 100, omega1()).unwrap();
        let e2 = sample_ensemble(&s, 100, omega1()).unwrap();
        for (a, b) in e1.beads().iter().zip(e2.beads()) {
            assert_eq!(a.label.to_bits(), b.label.to_bits());
        }
        assert!(e1.history().is_empty());
    }

    #[test]
    fn equal_times_give_unit_correlation_with_zero_error() {
        let s = SeededSampler::new(3);
        for with_measurement in [false, true] {
            let r = estimate_correlator(&s, 1000, omega1(), 0.9, 0.9, with_measurement).unwrap();
            assert_eq!(r.mean, 1.0);
            assert_eq!(r.std_error, 0.0);
            assert_eq!(r.n_samples, 1000);
        }
    }

    #[test]
    fn free_estimate_matches_the_endpoint_overlap_value() {
        let s = SeededSampler::new(42);
        let r = estimate_correlator(&s, 100_000, omega1(), FRAC_PI_4, FRAC_PI_2, false).unwrap();
        let exact = 1.0 - SQRT_2 / 2.0;
        assert!(
            (r.mean - exact).abs() <= 4.0 * r.std_error,
            "estimate {} +- {} vs exact {exact}",
            r.mean,
            r.std_error
        );
    }

    #[test]
    fn measured_estimate_matches_the_cosine_of_the_separation() {
        let s = SeededSampler::new(42);
        let t1 = std::f64::consts::PI / 3.0;
        let r = estimate_correlator(&s, 100_000, omega1(), t1, t1 + FRAC_PI_4, true).unwrap();
        let exact = FRAC_PI_4.cos();
        assert!(
            (r.mean - exact).abs() <= 4.0 * r.std_error,
            "estimate {} +- {} vs exact {exact}",
            r.mean,
            r.std_error
        );
    }

    #[test]
    fn parallel_and_serial_estimates_are_bit_identical() {
        let s = SeededSampler::new(7);
        for with_measurement in [false, true] {
            let par =
                estimate_correlator(&s, 10_001, omega1(), 0.4, 1.9, with_measurement).unwrap();
            let ser = estimate_correlator_serial(&s, 10_001, omega1(), 0.4, 1.9, with_measurement)
                .unwrap();
            assert_eq!(par.mean.to_bits(), ser.mean.to_bits());
            assert_eq!(par.std_error.to_bits(), ser.std_error.to_bits());
            assert_eq!(par.n_samples, ser.n_samples);
        }
    }

    #[test]
    fn estimation_needs_at_least_two_beads() {
        let s = SeededSampler::new(1);
        for n in [0usize, 1] {
            assert!(matches!(
                estimate_correlator(&s, n, omega1(), 0.1, 0.2, false),
                Err(Error::TooFewBeads { min: 2, got }) if got == n
            ));
        }
    }

    #[test]
    fn estimation_rejects_bad_times() {
        let s = SeededSampler::new(1);
        assert!(matches!(
            estimate_correlator(&s, 10, omega1(), -0.1, 0.2, false),
            Err(Error::NegativeTime(_))
        ));
        assert!(matches!(
            estimate_correlator(&s, 10, omega1(), 0.5, 0.2, true),
            Err(Error::TimeOrdering { .. })
        ));
    }

    #[test]
    fn single_bead_enumeration_is_dichotomic() {
        let v = enumerate_oracle(1, omega1(), 0.3, 2.0, false).unwrap();
        assert!(v == 1.0 || v == -1.0, "one trajectory gives q1 q2 = +-1, got {v}");
    }

    #[test]
    fn enumeration_converges_to_both_closed_forms() {
        let t1 = FRAC_PI_4;
        let t2 = FRAC_PI_2;
        for n in [1_000usize, 2_000, 10_000] {
            let free = enumerate_oracle(n, omega1(), t1, t2, false).unwrap();
            let free_exact = 1.0 - SQRT_2 / 2.0;
            assert!(
                (free - free_exact).abs() <= 10.0 / n as f64,
                "free enumeration at n = {n}: {free} vs {free_exact}"
            );
            let measured = enumerate_oracle(n, omega1(), t1, t2, true).unwrap();
            let measured_exact = (t2 - t1).cos();
            assert!(
                (measured - measured_exact).abs() <= 10.0 / n as f64,
                "measured enumeration at n = {n}: {measured} vs {measured_exact}"
            );
        }
    }

    #[test]
    fn enumeration_rejects_an_empty_ensemble() {
        assert!(matches!(
            enumerate_oracle(0, omega1(), 0.1, 0.2, false),
            Err(Error::EmptyEnsemble(0))
        ));
    }
}
