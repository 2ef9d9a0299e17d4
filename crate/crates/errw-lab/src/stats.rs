//! Statistical post-processing for simulation output: empirical CDF
//! distances, Beta fits by the method of moments, limit-theorem residuals,
//! quadratic-variation sums and the fixed 49-bin histograms used for the
//! density plots.

use crate::segment::{rational_to_f64, RationalDistribution};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample value {value} outside [0, 1]")]
    ValueOutOfBounds { value: f64 },
    #[error("sample is degenerate: mean {mean}, variance {variance}")]
    DegenerateSample { mean: f64, variance: f64 },
    #[error("reference CDF is not non-decreasing on the sample")]
    NonMonotoneCdf,
    #[error("checkpoint {n} outside the trajectory (length {len}, minimum 2)")]
    BadCheckpoint { n: usize, len: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMetadata {
    pub n_steps: u64,
    pub replicas: u64,
    pub seed: u64,
    pub experiment: String,
}

/// Limit-fraction samples in `[0, 1]` with their provenance.
#[derive(Debug, Clone)]
pub struct SampleSet {
    values: Vec<f64>,
    pub metadata: SampleMetadata,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, metadata: SampleMetadata) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if let Some(&value) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(StatsError::ValueOutOfBounds { value });
        }
        Ok(Self { values, metadata })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `values` and a reference CDF: the empirical step function is compared
/// just below and at every sample point.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    let mut previous_cdf = f64::NEG_INFINITY;
    for (i, &x) in sorted.iter().enumerate() {
        let reference = cdf(x);
        if reference < previous_cdf - 1e-12 {
            return Err(StatsError::NonMonotoneCdf);
        }
        previous_cdf = reference;
        let below = i as f64 / n;
        let at = (i as f64 + 1.0) / n;
        sup = sup.max((below - reference).abs()).max((at - reference).abs());
    }
    Ok(sup)
}

/// Kolmogorov-Smirnov distance between an exact atomic law and a continuous
/// reference CDF, evaluated just below and at every atom.
pub fn ks_distance_exact(dist: &RationalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sup: f64 = 0.0;
    let mut cumulative = 0.0f64;
    for (value, mass) in dist.support() {
        let x = rational_to_f64(value);
        let reference = cdf(x);
        sup = sup.max((cumulative - reference).abs());
        cumulative += rational_to_f64(mass);
        sup = sup.max((cumulative - reference).abs());
    }
    sup
}

/// Kolmogorov-Smirnov distance between the empirical CDF of a sample and an
/// atomic reference law. Both functions are steps, so the supremum is
/// attained at the union of their jump points; a sample listing exactly the
/// reference atoms with the right multiplicities scores zero.
pub fn ks_distance_atomic(values: &[f64], reference: &RationalDistribution) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let atoms: Vec<(f64, f64)> = reference
        .support()
        .iter()
        .map(|(v, m)| (rational_to_f64(v), rational_to_f64(m)))
        .collect();
    let mut sup: f64 = 0.0;
    let mut sample_cum = 0.0f64;
    let mut reference_cum = 0.0f64;
    let mut i = 0usize;
    let mut j = 0usize;
    while i < sorted.len() || j < atoms.len() {
        let x = match (sorted.get(i), atoms.get(j)) {
            (Some(&s), Some(&(a, _))) => s.min(a),
            (Some(&s), None) => s,
            (None, Some(&(a, _))) => a,
            (None, None) => break,
        };
        while i < sorted.len() && sorted[i] <= x {
            sample_cum += 1.0 / n;
            i += 1;
        }
        while j < atoms.len() && atoms[j].0 <= x {
            reference_cum += atoms[j].1;
            j += 1;
        }
        sup = sup.max((sample_cum - reference_cum).abs());
    }
    Ok(sup)
}

/// Method-of-moments Beta fit: with sample mean `m` and variance `v`,
/// `alpha = m (m(1-m)/v - 1)` and `beta = (1-m) (m(1-m)/v - 1)`.
pub fn beta_fit_mom(values: &[f64]) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if variance <= 0.0 || mean <= 0.0 || mean >= 1.0 {
        return Err(StatsError::DegenerateSample { mean, variance });
    }
    let scale = mean * (1.0 - mean) / variance - 1.0;
    Ok((mean * scale, (1.0 - mean) * scale))
}

/// Standardized fluctuation of the cycle-time fraction at checkpoint `n`,
/// using the trajectory endpoint as the limit proxy:
/// `sqrt(n) (M_n - M_N) / sqrt(M_N (1 - M_N) / 2)`.
///
/// Returns `None` when the variance proxy vanishes (`M_N` exactly 0 or 1);
/// callers count those exclusions rather than dropping them silently.
pub fn clt_residual(trajectory: &[f64], n: usize) -> Result<Option<f64>, StatsError> {
    if n < 1 || n >= trajectory.len() {
        return Err(StatsError::BadCheckpoint {
            n,
            len: trajectory.len(),
        });
    }
    let m_n = trajectory[n - 1];
    let m_end = *trajectory.last().unwrap();
    let variance_proxy = 0.5 * m_end * (1.0 - m_end);
    if variance_proxy == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        (n as f64).sqrt() * (m_n - m_end) / variance_proxy.sqrt(),
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadraticVariation {
    /// `n * sum_{j=n..N} (M_{j-1} - M_j)^2`
    pub value: f64,
    /// Bound on the part of the tail past the trajectory horizon, from the
    /// deterministic increment bound `|M_{j-1} - M_j| <= 2/(2j - 1)`.
    pub truncation_bound: f64,
}

/// Scaled tail sum of squared increments of a cycle-time fraction
/// trajectory `[M_1, ..., M_N]`, from checkpoint `n` to the horizon.
pub fn quadratic_variation_check(
    trajectory: &[f64],
    n: usize,
) -> Result<QuadraticVariation, StatsError> {
    let len = trajectory.len();
    if n < 2 || n > len {
        return Err(StatsError::BadCheckpoint { n, len });
    }
    let mut sum = 0.0f64;
    for j in n..=len {
        let diff = trajectory[j - 2] - trajectory[j - 1];
        sum += diff * diff;
    }
    let big_n = len as f64;
    Ok(QuadraticVariation {
        value: n as f64 * sum,
        truncation_bound: n as f64 * 2.0 / (2.0 * big_n - 1.0),
    })
}

/// Fixed-width histogram over `[0, 1]` with 49 bins, the binning used for
/// all density plots.
pub const HISTOGRAM_BINS: usize = 49;

#[derive(Debug, Clone, Serialize)]
pub struct Histogram49 {
    pub counts: Vec<u64>,
    pub sample_size: u64,
}

impl Histogram49 {
    pub fn centers() -> Vec<f64> {
        (0..HISTOGRAM_BINS)
            .map(|k| (2 * k + 1) as f64 / (2 * HISTOGRAM_BINS) as f64)
            .collect()
    }

    /// Counts normalized to density scale: `count / (n * width)`.
    pub fn densities(&self) -> Vec<f64> {
        let scale = HISTOGRAM_BINS as f64 / self.sample_size as f64;
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }
}

pub fn histogram_49(values: &[f64]) -> Result<Histogram49, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &value in values {
        if !(0.0..=1.0).contains(&value) {
            return Err(StatsError::ValueOutOfBounds { value });
        }
        let bin = ((value * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    Ok(Histogram49 {
        counts,
        sample_size: values.len() as u64,
    })
}

/// Bins an exact atomic law into the same 49-bin density scale.
pub fn histogram_49_exact(dist: &RationalDistribution) -> Histogram49Density {
    let mut mass = vec![0.0f64; HISTOGRAM_BINS];
    for (value, m) in dist.support() {
        let x = rational_to_f64(value);
        let bin = ((x * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        mass[bin] += rational_to_f64(m);
    }
    Histogram49Density {
        densities: mass.iter().map(|&m| m * HISTOGRAM_BINS as f64).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram49Density {
    pub densities: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Reference distributions
// ---------------------------------------------------------------------------

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 rational erf
/// approximation (absolute error below 1.5e-7).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A1: f64 = 0.254_829_592;
    const A2: f64 = -0.284_496_736;
    const A3: f64 = 1.421_413_741;
    const A4: f64 = -1.453_152_027;
    const A5: f64 = 1.061_405_429;
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = ((((A5 * t + A4) * t + A3) * t + A2) * t + A1) * t;
    sign * (1.0 - poly * (-x * x).exp())
}

/// CDF of the arcsine law Beta(1/2, 1/2): `(2/pi) asin(sqrt(x))`.
pub fn beta_half_half_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        (2.0 / PI) * x.sqrt().asin()
    }
}

/// Log-gamma via the Lanczos approximation (g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFICIENTS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFICIENTS[0];
    for (i, &c) in COEFFICIENTS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Beta density, used for the fitted reference curves in the figure data.
pub fn beta_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
    ((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_b).exp()
}
