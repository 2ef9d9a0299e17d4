//! Sequence-type reinforcement: increment generators, the reciprocal-weight
//! series that decides recurrence versus finite range, and the trapping
//! probability bound.
//!
//! For increments `a_1, a_2, ...` the running weight of an edge after `k`
//! crossings is `alpha_k = 1 + a_1 + ... + a_k`. The walkers are recurrent
//! exactly when `sum_k 1/alpha_k` diverges, and get stuck on finitely many
//! edges when it converges. Convergence of a series is not decidable from
//! finitely many terms, so [`classify`] only ever decides when handed a
//! growth hypothesis that it can check against the computed prefix; it
//! answers `Inconclusive` otherwise.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("increment a_{k} is negative")]
    NegativeIncrement { k: u64 },
    #[error("sequence `{label}` is not classified convergent; trapping bound undefined")]
    NotConvergent { label: String },
    #[error("truncation {truncation} is too small, need at least {min}")]
    TruncationTooSmall { truncation: u64, min: u64 },
}

/// Increment generator for sequence-type reinforcement. `a_k` is the weight
/// increment on the k-th crossing of an edge, `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Constant(BigRational),
    /// `a_k = coefficient * k^degree`
    Polynomial { degree: u32, coefficient: BigRational },
    /// `a_k = ratio^k`
    Geometric { ratio: BigRational },
    /// Listed increments; `a_k = 0` past the end of the list.
    Explicit(Vec<BigRational>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub generator: Generator,
    pub label: String,
}

impl SequenceSpec {
    pub fn new(generator: Generator, label: impl Into<String>) -> Result<Self, SequenceError> {
        let spec = Self {
            generator,
            label: label.into(),
        };
        spec.check_nonnegative()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self::new(Generator::Constant(BigRational::from_integer(1.into())), "linear").unwrap()
    }

    fn check_nonnegative(&self) -> Result<(), SequenceError> {
        match &self.generator {
            Generator::Constant(c) => {
                if c.is_negative() {
                    return Err(SequenceError::NegativeIncrement { k: 1 });
                }
            }
            Generator::Polynomial { coefficient, .. } => {
                if coefficient.is_negative() {
                    return Err(SequenceError::NegativeIncrement { k: 1 });
                }
            }
            Generator::Geometric { ratio } => {
                if ratio.is_negative() {
                    return Err(SequenceError::NegativeIncrement { k: 1 });
                }
            }
            Generator::Explicit(list) => {
                if let Some(idx) = list.iter().position(|a| a.is_negative()) {
                    return Err(SequenceError::NegativeIncrement { k: idx as u64 + 1 });
                }
            }
        }
        Ok(())
    }

    /// Exact increment `a_k`, `k >= 1`.
    pub fn increment(&self, k: u64) -> BigRational {
        debug_assert!(k >= 1);
        match &self.generator {
            Generator::Constant(c) => c.clone(),
            Generator::Polynomial { degree, coefficient } => {
                let k = BigRational::from_integer(k.into());
                let mut pow = BigRational::from_integer(1.into());
                for _ in 0..*degree {
                    pow *= &k;
                }
                coefficient * pow
            }
            Generator::Geometric { ratio } => {
                let mut pow = BigRational::from_integer(1.into());
                for _ in 0..k {
                    pow *= ratio;
                }
                pow
            }
            Generator::Explicit(list) => list
                .get((k - 1) as usize)
                .cloned()
                .unwrap_or_else(BigRational::zero),
        }
    }

    /// `a_k` in floating point; saturates to infinity for fast-growing
    /// generators instead of producing NaN.
    pub fn increment_f64(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match &self.generator {
            Generator::Constant(c) => c.to_f64().unwrap_or(f64::INFINITY),
            Generator::Polynomial { degree, coefficient } => {
                let c = coefficient.to_f64().unwrap_or(f64::INFINITY);
                c * (k as f64).powi(*degree as i32)
            }
            Generator::Geometric { ratio } => {
                let r = ratio.to_f64().unwrap_or(f64::INFINITY);
                r.powi(k.min(i32::MAX as u64) as i32)
            }
            Generator::Explicit(list) => list
                .get((k - 1) as usize)
                .map(|a| a.to_f64().unwrap_or(f64::INFINITY))
                .unwrap_or(0.0),
        }
    }

    /// Exact `alpha_k = 1 + sum_{l<=k} a_l`. `alpha_0 = 1`.
    pub fn alpha(&self, k: u64) -> BigRational {
        let mut acc = BigRational::from_integer(1.into());
        for l in 1..=k {
            acc += self.increment(l);
        }
        acc
    }
}

/// `alpha_1..alpha_k_max` and the prefix sums of their reciprocals.
#[derive(Debug, Clone)]
pub struct PhiPartialSums {
    /// `alpha[i]` is `alpha_{i+1}`.
    pub alpha: Vec<f64>,
    /// `partials[i] = sum_{k <= i+1} 1/alpha_k`.
    pub partials: Vec<f64>,
}

pub fn phi_partial_sums(spec: &SequenceSpec, k_max: u64) -> Result<PhiPartialSums, SequenceError> {
    assert!(k_max >= 1);
    spec.check_nonnegative()?;
    let mut alpha = Vec::with_capacity(k_max as usize);
    let mut partials = Vec::with_capacity(k_max as usize);
    let mut current = 1.0f64;
    let mut partial = 0.0f64;
    for k in 1..=k_max {
        current += spec.increment_f64(k);
        alpha.push(current);
        partial += if current.is_finite() { 1.0 / current } else { 0.0 };
        partials.push(partial);
    }
    Ok(PhiPartialSums { alpha, partials })
}

/// Growth hypothesis supplied by the caller. Each variant is checked against
/// the computed `alpha` prefix before it is used; a hypothesis the prefix
/// already violates yields `Inconclusive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthTest {
    None,
    /// `alpha_{k+1} >= ratio * alpha_k` for all k, with ratio > 1.
    RatioAtLeast { ratio: f64 },
    /// `alpha_k >= coefficient * k^exponent` for all k, with exponent > 1.
    PowerAtLeast { exponent: f64, coefficient: f64 },
    /// `alpha_k <= factor * k` for all k >= 1.
    LinearAtMost { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    DivergesToInfinity,
    Converges,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub classification: Classification,
    /// Upper bound for the series tail past `k_max`; present only for
    /// `Converges`.
    pub tail_bound: Option<f64>,
    pub partial_at_k_max: f64,
}

/// Decides the divergence of `sum 1/alpha_k` under the supplied growth
/// hypothesis. `k_max >= 16` terms are computed and the hypothesis is checked
/// on all of them.
pub fn classify_outcome(
    spec: &SequenceSpec,
    k_max: u64,
    growth: GrowthTest,
) -> Result<ClassifyOutcome, SequenceError> {
    assert!(k_max >= 16, "need at least 16 terms");
    let sums = phi_partial_sums(spec, k_max)?;
    let partial = *sums.partials.last().unwrap();
    let inconclusive = ClassifyOutcome {
        classification: Classification::Inconclusive,
        tail_bound: None,
        partial_at_k_max: partial,
    };
    let outcome = match growth {
        GrowthTest::None => inconclusive,
        GrowthTest::RatioAtLeast { ratio } => {
            let holds = ratio > 1.0
                && sums
                    .alpha
                    .windows(2)
                    .all(|w| w[1] >= ratio * w[0] * (1.0 - 1e-12) || !w[1].is_finite());
            if holds {
                let last = *sums.alpha.last().unwrap();
                let tail = if last.is_finite() {
                    1.0 / (last * (ratio - 1.0))
                } else {
                    0.0
                };
                ClassifyOutcome {
                    classification: Classification::Converges,
                    tail_bound: Some(tail),
                    partial_at_k_max: partial,
                }
            } else {
                inconclusive
            }
        }
        GrowthTest::PowerAtLeast { exponent, coefficient } => {
            let holds = exponent > 1.0
                && coefficient > 0.0
                && sums
                    .alpha
                    .iter()
                    .enumerate()
                    .all(|(i, &a)| a >= coefficient * ((i + 1) as f64).powf(exponent) * (1.0 - 1e-12));
            if holds {
                let tail =
                    (k_max as f64).powf(1.0 - exponent) / (coefficient * (exponent - 1.0));
                ClassifyOutcome {
                    classification: Classification::Converges,
                    tail_bound: Some(tail),
                    partial_at_k_max: partial,
                }
            } else {
                inconclusive
            }
        }
        GrowthTest::LinearAtMost { factor } => {
            let holds = factor > 0.0
                && sums
                    .alpha
                    .iter()
                    .enumerate()
                    .all(|(i, &a)| a <= factor * ((i + 1) as f64) * (1.0 + 1e-12));
            if holds {
                // comparison with the harmonic series: the tail is infinite
                ClassifyOutcome {
                    classification: Classification::DivergesToInfinity,
                    tail_bound: None,
                    partial_at_k_max: partial,
                }
            } else {
                inconclusive
            }
        }
    };
    Ok(outcome)
}

pub fn classify(
    spec: &SequenceSpec,
    k_max: u64,
    growth: GrowthTest,
) -> Result<Classification, SequenceError> {
    Ok(classify_outcome(spec, k_max, growth)?.classification)
}

#[derive(Debug, Clone, Copy)]
pub struct TrappingBound {
    /// Lower bound on the probability that walkers arriving at a fresh edge
    /// cross that edge forever after.
    pub lower_bound: f64,
    /// `alpha_K`, the largest weight an inner neighboring edge can have.
    pub alpha_k_walkers: f64,
    /// Upper bound on `sum_{k >= 0} 1/alpha_k` (partial sum plus tail bound).
    pub series_upper_bound: f64,
    pub tail_bound: f64,
}

/// Evaluates `exp(-alpha_K) ^ S` with `S = sum_{k >= 0} 1/alpha_k`, a lower
/// bound on the trapping probability for `k_walkers` walkers. Requires the
/// series to be classified convergent under `growth`; the tail past
/// `truncation` enters through its rigorous upper bound, which only makes the
/// returned lower bound smaller.
pub fn trapping_bound(
    k_walkers: u32,
    spec: &SequenceSpec,
    truncation: u64,
    growth: GrowthTest,
) -> Result<TrappingBound, SequenceError> {
    let min = 16.max(k_walkers as u64);
    if truncation < min {
        return Err(SequenceError::TruncationTooSmall { truncation, min });
    }
    let outcome = classify_outcome(spec, truncation, growth)?;
    let tail = match (outcome.classification, outcome.tail_bound) {
        (Classification::Converges, Some(tail)) => tail,
        _ => {
            return Err(SequenceError::NotConvergent {
                label: spec.label.clone(),
            })
        }
    };
    let sums = phi_partial_sums(spec, truncation)?;
    // the k = 0 term of the series is 1/alpha_0 = 1
    let series_upper = 1.0 + outcome.partial_at_k_max + tail;
    let alpha_k = sums.alpha[(k_walkers - 1) as usize];
    Ok(TrappingBound {
        lower_bound: (-alpha_k * series_upper).exp(),
        alpha_k_walkers: alpha_k,
        series_upper_bound: series_upper,
        tail_bound: tail,
    })
}

/// CSV rows `k,a_k,alpha_k,partial_phi`.
pub fn write_phi_csv<W: Write>(
    spec: &SequenceSpec,
    k_max: u64,
    mut out: W,
) -> Result<(), std::io::Error> {
    let sums = phi_partial_sums(spec, k_max).map_err(std::io::Error::other)?;
    writeln!(out, "k,a_k,alpha_k,partial_phi")?;
    for k in 1..=k_max {
        let i = (k - 1) as usize;
        writeln!(
            out,
            "{},{},{},{}",
            k,
            spec.increment_f64(k),
            sums.alpha[i],
            sums.partials[i]
        )?;
    }
    Ok(())
}
