//! Exact rational arithmetic for two linearly reinforced walkers on the
//! three-node segment.
//!
//! Everything in this module works on the pair of edge weights `(a, b)` =
//! (left edge, right edge). With alternating walkers both walkers are back at
//! the center every four steps, and one four-step cycle moves `(a, b)` to one
//! of three outcomes. Iterating that kernel yields the exact law of the
//! left-edge weight fraction at cycle boundaries, which is what the
//! distribution, second-moment and atom-bound routines below compute.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("edge weights must be positive, got ({a}, {b})")]
    NonPositiveWeight { a: u64, b: u64 },
    #[error("(a + b + 2) = {sum} is not divisible by 4, so (a, b) = ({a}, {b}) is not a cycle state")]
    NotACycleState { a: u64, b: u64, sum: u64 },
    #[error("meeting-time index must be at least 1")]
    MeetingIndexZero,
    #[error("distribution masses sum to {got}, expected 1")]
    MassNotOne { got: BigRational },
    #[error("distribution contains a non-positive mass")]
    NonPositiveMass,
    #[error("empty distribution")]
    EmptyDistribution,
}

fn bi(n: u64) -> BigInt {
    BigInt::from(n)
}

fn br(n: u64) -> BigRational {
    BigRational::from_integer(bi(n))
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(bi(num), bi(den))
}

// ---------------------------------------------------------------------------
// Four-step kernel
// ---------------------------------------------------------------------------

/// One outcome of a four-step cycle of the alternating walkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBranch {
    pub new_a: u64,
    pub new_b: u64,
    pub probability: BigRational,
}

/// The exact transition kernel for one four-step cycle starting from edge
/// weights `(a, b)` with both walkers at the center.
///
/// The three outcomes: both walkers bounce off the left edge (`(a+4, b)`),
/// both bounce off the right edge (`(a, b+4)`), or they split to opposite
/// sides (`(a+2, b+2)`, two crossings per edge). The split case combines the
/// two walker orders.
pub fn four_step_kernel(a: u64, b: u64) -> Result<Vec<KernelBranch>, SegmentError> {
    if a == 0 || b == 0 {
        return Err(SegmentError::NonPositiveWeight { a, b });
    }
    let den = (a + b) * (a + b + 1);
    Ok(vec![
        KernelBranch {
            new_a: a + 4,
            new_b: b,
            probability: ratio(a * (a + 1), den),
        },
        KernelBranch {
            new_a: a + 2,
            new_b: b + 2,
            probability: ratio(2 * a * b, den),
        },
        KernelBranch {
            new_a: a,
            new_b: b + 4,
            probability: ratio(b * (b + 1), den),
        },
    ])
}

/// Expected left-edge weight fraction after one cycle, conditioned on the
/// cycle starting at `(a, b)`. Equals `a / (a + b)` exactly: the cycle-time
/// fraction is a martingale.
pub fn conditional_mean_after_cycle(a: u64, b: u64) -> Result<BigRational, SegmentError> {
    let mut mean = BigRational::zero();
    for branch in four_step_kernel(a, b)? {
        mean += branch.probability * ratio(branch.new_a, branch.new_a + branch.new_b);
    }
    Ok(mean)
}

// ---------------------------------------------------------------------------
// Exact finite distributions
// ---------------------------------------------------------------------------

/// A finite probability distribution with exact rational atoms.
///
/// Support values are strictly increasing, masses are positive and sum to
/// exactly one. Masses are not necessarily stored in lowest terms (the DP
/// routines share one big common denominator); `Ratio` comparisons are
/// value-based so this is invisible to callers.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalDistribution {
    support: Vec<(BigRational, BigRational)>,
}

impl RationalDistribution {
    /// Builds a distribution from `(value, mass)` pairs. Pairs are sorted,
    /// equal values merged, zero masses dropped; the mass sum is checked
    /// exactly.
    pub fn new(pairs: Vec<(BigRational, BigRational)>) -> Result<Self, SegmentError> {
        let mut pairs: Vec<_> = pairs
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .collect();
        if pairs.iter().any(|(_, m)| !m.is_positive()) {
            return Err(SegmentError::NonPositiveMass);
        }
        pairs.sort_by(|x, y| x.0.cmp(&y.0));
        let mut merged: Vec<(BigRational, BigRational)> = Vec::with_capacity(pairs.len());
        for (v, m) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => merged.push((v, m)),
            }
        }
        if merged.is_empty() {
            return Err(SegmentError::EmptyDistribution);
        }
        let total: BigRational = merged.iter().map(|(_, m)| m.clone()).sum();
        if !total.is_one() {
            return Err(SegmentError::MassNotOne { got: total });
        }
        Ok(Self { support: merged })
    }

    /// Builds a distribution whose masses are `numerators[i] / denominator`
    /// and whose values are `value_numerators[i] / value_denominator`.
    /// The numerators must sum to the denominator exactly.
    fn from_common_denominator(
        value_numerators: &[u64],
        value_denominator: u64,
        mass_numerators: Vec<BigInt>,
        mass_denominator: BigInt,
    ) -> Result<Self, SegmentError> {
        let total: BigInt = mass_numerators.iter().sum();
        if total != mass_denominator {
            return Err(SegmentError::MassNotOne {
                got: BigRational::new(total, mass_denominator),
            });
        }
        let support = value_numerators
            .iter()
            .zip(mass_numerators)
            .filter(|(_, m)| !m.is_zero())
            .map(|(&v, m)| {
                (
                    ratio(v, value_denominator),
                    BigRational::new_raw(m, mass_denominator.clone()),
                )
            })
            .collect();
        Ok(Self { support })
    }

    pub fn support(&self) -> &[(BigRational, BigRational)] {
        &self.support
    }

    pub fn mean(&self) -> BigRational {
        self.support
            .iter()
            .map(|(v, m)| v * m)
            .fold(BigRational::zero(), |acc, x| acc + x)
    }

    /// Exact probability of the event `value <= threshold`.
    pub fn cdf_at(&self, threshold: &BigRational) -> BigRational {
        self.support
            .iter()
            .take_while(|(v, _)| v <= threshold)
            .map(|(_, m)| m.clone())
            .fold(BigRational::zero(), |acc, m| acc + m)
    }

    /// Atoms as `(value, mass)` in f64, in increasing value order.
    pub fn atoms_f64(&self) -> Vec<(f64, f64)> {
        self.support
            .iter()
            .map(|(v, m)| (rational_to_f64(v), rational_to_f64(m)))
            .collect()
    }

    /// CSV rows `value_numerator,value_denominator,mass_numerator,mass_denominator`,
    /// fractions reduced.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "value_numerator,value_denominator,mass_numerator,mass_denominator"
        )?;
        for (v, m) in &self.support {
            let m = m.reduced();
            writeln!(out, "{},{},{},{}", v.numer(), v.denom(), m.numer(), m.denom())?;
        }
        Ok(())
    }
}

pub(crate) fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact law of the left-edge weight fraction `w(4n, -1) / (4n + 2)` for the
/// alternating pair started from unit weights, computed by iterating the
/// four-step kernel.
///
/// The DP keeps all masses over the common denominator
/// `prod_{k<n} (4k+2)(4k+3)` so the hot loop is pure big-integer arithmetic.
pub fn exact_alt_distribution(n: u64) -> RationalDistribution {
    let n_usize = n as usize;
    // state j <-> left edge weight a = 1 + 2j; after k cycles j ranges over 0..=2k
    let mut numerators: Vec<BigInt> = vec![BigInt::one()];
    let mut denominator = BigInt::one();
    for k in 0..n_usize {
        let total = 4 * (k as u64) + 2;
        let mut next = vec![BigInt::zero(); numerators.len() + 2];
        for (j, num) in numerators.iter().enumerate() {
            if num.is_zero() {
                continue;
            }
            let a = 1 + 2 * j as u64;
            let b = total - a;
            next[j + 2] += num * bi(a * (a + 1));
            next[j + 1] += num * bi(2 * a * b);
            next[j] += num * bi(b * (b + 1));
        }
        numerators = next;
        denominator *= bi(total * (total + 1));
    }
    let total = 4 * n + 2;
    let values: Vec<u64> = (0..numerators.len()).map(|j| 1 + 2 * j as u64).collect();
    RationalDistribution::from_common_denominator(&values, total, numerators, denominator)
        .expect("kernel masses sum to one")
}

/// Exact law of the left-edge weight fraction for a single walker observed
/// after `n` excursions (time `2n`): a two-color urn that adds two balls of
/// the drawn color per draw, started from one ball of each color.
pub fn exact_single_distribution(n: u64) -> RationalDistribution {
    let n_usize = n as usize;
    let mut numerators: Vec<BigInt> = vec![BigInt::one()];
    let mut denominator = BigInt::one();
    for k in 0..n_usize {
        let total = 2 * (k as u64) + 2;
        let mut next = vec![BigInt::zero(); numerators.len() + 1];
        for (j, num) in numerators.iter().enumerate() {
            if num.is_zero() {
                continue;
            }
            let a = 1 + 2 * j as u64;
            let b = total - a;
            next[j + 1] += num * bi(a);
            next[j] += num * bi(b);
        }
        numerators = next;
        denominator *= bi(total);
    }
    let total = 2 * n + 2;
    let values: Vec<u64> = (0..numerators.len()).map(|j| 1 + 2 * j as u64).collect();
    RationalDistribution::from_common_denominator(&values, total, numerators, denominator)
        .expect("urn masses sum to one")
}

// ---------------------------------------------------------------------------
// Second-moment defect
// ---------------------------------------------------------------------------

/// Defect of the cycle-time fraction's second moment against the leading
/// `1 - 1/(2n^2)` / `1/(2n^2)` decomposition, where `n = (a + b + 2) / 4` is
/// the cycle index reaching state `(a, b)`.
///
/// Returns `(delta, n^2 * delta)`, both exact, evaluated directly from the
/// four-step kernel.
pub fn second_moment_delta(a: u64, b: u64) -> Result<(BigRational, BigRational), SegmentError> {
    let n = cycle_index(a, b)?;
    let mut second = BigRational::zero();
    for branch in four_step_kernel(a, b)? {
        let f = ratio(branch.new_a, branch.new_a + branch.new_b);
        second += branch.probability * (&f * &f);
    }
    let m = ratio(a, a + b);
    let n_sq = br(n * n);
    let half_inv_nsq = BigRational::new(BigInt::one(), bi(2 * n * n));
    let delta = second - (BigRational::one() - &half_inv_nsq) * (&m * &m) - half_inv_nsq * &m;
    let n_sq_delta = &n_sq * &delta;
    Ok((delta, n_sq_delta))
}

/// The closed form of the same defect:
/// `n^2 delta = -1/2 * M (1 - M) * (3a^2 + 6ab + 12a + 3b^2 + 12b + 8)
///  / ((a + b + 1)(a + b + 4)^2)`.
pub fn second_moment_delta_closed_form(
    a: u64,
    b: u64,
) -> Result<(BigRational, BigRational), SegmentError> {
    let n = cycle_index(a, b)?;
    let m = ratio(a, a + b);
    let poly = br(3 * a * a + 6 * a * b + 12 * a + 3 * b * b + 12 * b + 8);
    let den = br((a + b + 1) * (a + b + 4) * (a + b + 4));
    let n_sq_delta = -ratio(1, 2) * &m * (BigRational::one() - &m) * poly / den;
    let delta = &n_sq_delta / br(n * n);
    Ok((delta, n_sq_delta))
}

fn cycle_index(a: u64, b: u64) -> Result<u64, SegmentError> {
    if a == 0 || b == 0 {
        return Err(SegmentError::NonPositiveWeight { a, b });
    }
    let sum = a + b + 2;
    if sum % 4 != 0 {
        return Err(SegmentError::NotACycleState { a, b, sum });
    }
    Ok(sum / 4)
}

// ---------------------------------------------------------------------------
// Meeting times under random walker selection
// ---------------------------------------------------------------------------

/// Probability that the two walkers, once together at the center, need
/// exactly `2l` further steps to be both at the center again (random walker
/// selection).
///
/// Computed as a first-passage probability on the occupancy chain with states
/// {both-center, one-center, none-center}: both-center -> one-center with
/// probability 1, one-center -> both-center and one-center -> none-center
/// with probability 1/2 each, none-center -> one-center with probability 1.
/// The result is `2^{-l}` regardless of the edge weights.
pub fn meeting_time_pmf(l: u64) -> Result<BigRational, SegmentError> {
    if l == 0 {
        return Err(SegmentError::MeetingIndexZero);
    }
    let half = ratio(1, 2);
    // After the first step the chain sits in one-center with probability 1.
    // Track the not-yet-absorbed mass in (one_center, none_center).
    let mut one_center = BigRational::one();
    let mut none_center = BigRational::zero();
    for t in 2..=2 * l {
        let absorbed = &one_center * &half;
        let to_none = &one_center * &half;
        let to_one = none_center; // none-center returns deterministically
        if t == 2 * l {
            return Ok(absorbed);
        }
        one_center = to_one;
        none_center = to_none;
    }
    unreachable!("loop always returns at t = 2l")
}

// ---------------------------------------------------------------------------
// Atom probability bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomBoundMode {
    /// Sum of per-crossing-count bounds, evaluated in log space.
    Combinatorial,
    /// The envelope `3 n^{-1/4} + 9 sqrt(eps)`.
    Closed,
}

#[derive(Debug, Clone, Copy)]
pub struct AtomBound {
    pub value: f64,
    /// The closed-form envelope assumes `eps / sqrt(n) <= 1/2`; false when the
    /// requested parameters fall outside that regime.
    pub regime_ok: bool,
}

/// Upper bound for `P(M_n <= eps / sqrt(n))`, the probability that the
/// cycle-time fraction is still tiny after `n` cycles.
///
/// `Combinatorial` evaluates, for every admissible number `j` of outward left
/// crossings, the count of move orderings times the largest possible product
/// of traversal odds, all in log space (the exact products overflow fixed
/// precision almost immediately). `Closed` evaluates the explicit envelope.
pub fn atom_probability_bound(n: u64, epsilon: f64, mode: AtomBoundMode) -> AtomBound {
    assert!(n >= 1, "need at least one cycle");
    assert!(epsilon > 0.0, "epsilon must be positive");
    let regime_ok = epsilon / (n as f64).sqrt() <= 0.5;
    let value = match mode {
        AtomBoundMode::Closed => 3.0 * (n as f64).powf(-0.25) + 9.0 * epsilon.sqrt(),
        AtomBoundMode::Combinatorial => {
            let j_max = (2.0 * epsilon * (n as f64).sqrt()).floor() as u64;
            // log of the j = 0 term: all 2n outward moves take the right edge
            let mut log_term: f64 = 0.0;
            for i in 1..=2 * n {
                log_term += ((2 * i - 1) as f64).ln();
            }
            for k in 0..n {
                log_term -= ((4 * k + 2) as f64).ln() + ((4 * k + 3) as f64).ln();
            }
            let mut logs = Vec::with_capacity(j_max as usize + 1);
            logs.push(log_term);
            for j in 0..j_max {
                // moving one outward crossing from the right product to the left
                log_term += ((2 * n - j) as f64).ln() - ((j + 1) as f64).ln()
                    + ((2 * j + 1) as f64).ln()
                    - ((2 * (2 * n - j) - 1) as f64).ln();
                logs.push(log_term);
            }
            log_sum_exp(&logs).exp()
        }
    };
    AtomBound { value, regime_ok }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// Cycle-level Monte Carlo sampler
// ---------------------------------------------------------------------------

/// Samples the cycle-time fraction trajectory `M_1, ..., M_n` of the
/// alternating pair by drawing one kernel branch per cycle. This is the exact
/// cycle-boundary law of the step-level simulation at a fraction of the cost;
/// the agreement is checked against [`exact_alt_distribution`] in the tests.
pub fn sample_alt_cycle_fractions<R: Rng>(n_cycles: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_cycles);
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 0..n_cycles {
        let total = (a + b) as f64;
        let den = total * (total + 1.0);
        let p_left = (a as f64) * (a as f64 + 1.0) / den;
        let p_mixed = 2.0 * (a as f64) * (b as f64) / den;
        let u: f64 = rng.gen();
        if u < p_left {
            a += 4;
        } else if u < p_left + p_mixed {
            a += 2;
            b += 2;
        } else {
            b += 4;
        }
        out.push(a as f64 / (a + b) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn kernel_from_unit_weights_is_uniform_over_three_branches() {
        let branches = four_step_kernel(1, 1).unwrap();
        assert_eq!(branches.len(), 3);
        for branch in &branches {
            assert_eq!(branch.probability, r(1, 3));
            assert_eq!(branch.new_a + branch.new_b, 6);
        }
        let outcomes: Vec<(u64, u64)> = branches.iter().map(|b| (b.new_a, b.new_b)).collect();
        assert_eq!(outcomes, vec![(5, 1), (3, 3), (1, 5)]);
    }

    #[test]
    fn kernel_branch_probability_matches_direct_product() {
        // (2,3) -> (6,3): both walkers bounce left, probability 2/5 * 3/6
        let branches = four_step_kernel(2, 3).unwrap();
        let left = branches.iter().find(|b| b.new_a == 6).unwrap();
        assert_eq!(left.probability, r(1, 5));
    }

    #[test]
    fn kernel_masses_sum_to_one() {
        for (a, b) in [(1, 1), (2, 3), (7, 1), (40, 13)] {
            let total: BigRational = four_step_kernel(a, b)
                .unwrap()
                .into_iter()
                .map(|br| br.probability)
                .sum();
            assert!(total.is_one());
        }
    }

    #[test]
    fn kernel_rejects_zero_weight() {
        assert!(four_step_kernel(0, 3).is_err());
        assert!(four_step_kernel(3, 0).is_err());
    }

    #[test]
    fn cycle_mean_is_current_fraction() {
        assert_eq!(conditional_mean_after_cycle(1, 1).unwrap(), r(1, 2));
        assert_eq!(conditional_mean_after_cycle(2, 3).unwrap(), r(2, 5));
        assert_eq!(conditional_mean_after_cycle(7, 1).unwrap(), r(7, 8));
    }

    #[test]
    fn alt_distribution_start_and_one_cycle() {
        let d0 = exact_alt_distribution(0);
        assert_eq!(d0.support(), &[(r(1, 2), r(1, 1))]);

        let d1 = exact_alt_distribution(1);
        let expected = [(r(1, 6), r(1, 3)), (r(1, 2), r(1, 3)), (r(5, 6), r(1, 3))];
        assert_eq!(d1.support().len(), 3);
        for ((v, m), (ev, em)) in d1.support().iter().zip(expected.iter()) {
            assert_eq!(v, ev);
            assert_eq!(m, em);
        }
    }

    #[test]
    fn alt_distribution_mean_is_exactly_half() {
        for n in [1, 2, 3, 7, 20] {
            let dist = exact_alt_distribution(n);
            assert!(
                (dist.mean() - r(1, 2)).is_zero(),
                "mean off at n = {n}"
            );
        }
    }

    #[test]
    fn alt_distribution_support_lattice() {
        let n = 6;
        let dist = exact_alt_distribution(n);
        for (v, _) in dist.support() {
            let scaled = v * br(4 * n + 2);
            assert!(scaled.is_integer());
            let num = scaled.to_integer();
            assert_eq!((&num % 2i32), BigInt::one(), "weights stay odd");
        }
    }

    #[test]
    fn alt_distribution_increments_obey_deterministic_bound() {
        // between cycles n-1 and n the fraction moves by at most 4/(4(n-1)+2)
        for n in 1..=8u64 {
            let prev_total = 4 * (n - 1) + 2;
            let bound = r(4, prev_total as i64);
            let prev = exact_alt_distribution(n - 1);
            for (v, _) in prev.support() {
                let a = (v * br(prev_total)).to_integer().to_u64().unwrap();
                let b = prev_total - a;
                for branch in four_step_kernel(a, b).unwrap() {
                    let next = ratio(branch.new_a, branch.new_a + branch.new_b);
                    assert!((next - v).abs() <= bound);
                }
            }
        }
    }

    #[test]
    fn single_distribution_first_draw_and_mean() {
        let d1 = exact_single_distribution(1);
        assert_eq!(
            d1.support(),
            &[(r(1, 4), r(1, 2)), (r(3, 4), r(1, 2))]
        );
        for n in [1, 2, 3, 10, 40] {
            assert!((exact_single_distribution(n).mean() - r(1, 2)).is_zero());
        }
    }

    #[test]
    fn second_moment_delta_matches_closed_form_at_small_states() {
        // frozen value at (1,1): direct kernel computation gives
        // E[M^2] = 35/108, so n^2 delta = 35/108 - 1/8 - 1/4 = -11/216
        let (_, n_sq_delta) = second_moment_delta(1, 1).unwrap();
        assert_eq!(n_sq_delta, r(-11, 216));
        let (_, closed) = second_moment_delta_closed_form(1, 1).unwrap();
        assert_eq!(closed, r(-11, 216));

        for (a, b) in [(1, 5), (5, 1), (3, 3), (2, 4), (9, 9), (13, 5)] {
            let (d, nd) = second_moment_delta(a, b).unwrap();
            let (dc, ndc) = second_moment_delta_closed_form(a, b).unwrap();
            assert_eq!(d, dc, "delta mismatch at ({a},{b})");
            assert_eq!(nd, ndc, "n^2 delta mismatch at ({a},{b})");
        }
    }

    #[test]
    fn second_moment_delta_symmetric_states() {
        // a = b: the one-cycle mean stays 1/2 and the defect is negative
        for a in [1u64, 3, 5, 9] {
            assert_eq!(conditional_mean_after_cycle(a, a).unwrap(), r(1, 2));
            let (delta, _) = second_moment_delta(a, a).unwrap();
            assert!(delta.is_negative());
        }
    }

    #[test]
    fn second_moment_delta_rejects_non_cycle_states() {
        assert!(matches!(
            second_moment_delta(1, 2),
            Err(SegmentError::NotACycleState { .. })
        ));
    }

    #[test]
    fn meeting_time_law_is_dyadic() {
        assert_eq!(meeting_time_pmf(1).unwrap(), r(1, 2));
        assert_eq!(meeting_time_pmf(3).unwrap(), r(1, 8));
        for l in 1..=30u64 {
            let expected = BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l as u32));
            assert_eq!(meeting_time_pmf(l).unwrap(), expected);
        }
        assert!(meeting_time_pmf(0).is_err());
    }

    #[test]
    fn meeting_time_mean_tends_to_four() {
        let mut mean = BigRational::zero();
        for l in 1..=40u64 {
            mean += meeting_time_pmf(l).unwrap() * br(2 * l);
        }
        let err = (mean - br(4)).abs();
        assert!(err < r(1, 1_000_000_000));
    }

    #[test]
    fn closed_atom_bound_arithmetic() {
        let bound = atom_probability_bound(10_000, 0.01, AtomBoundMode::Closed);
        assert!((bound.value - 1.2).abs() < 1e-12);
        assert!(bound.regime_ok);
    }

    #[test]
    fn closed_atom_bound_limit_is_nine_sqrt_eps() {
        let eps = 0.04;
        let mut last = f64::INFINITY;
        for exp in 1..=8 {
            let n = 10u64.pow(exp);
            let v = atom_probability_bound(n, eps, AtomBoundMode::Closed).value;
            assert!(v < last);
            last = v;
        }
        assert!((last - 9.0 * eps.sqrt()).abs() < 0.06);
    }

    #[test]
    fn combinatorial_bound_dominates_exact_probability() {
        for n in [4u64, 9, 16] {
            let dist = exact_alt_distribution(n);
            for eps in [0.1f64, 0.25] {
                let threshold = eps / (n as f64).sqrt();
                // exact P(M_n <= eps/sqrt(n)) via the DP law
                let exact: f64 = dist
                    .atoms_f64()
                    .iter()
                    .filter(|(v, _)| *v <= threshold)
                    .map(|(_, m)| m)
                    .sum();
                let comb = atom_probability_bound(n, eps, AtomBoundMode::Combinatorial);
                let closed = atom_probability_bound(n, eps, AtomBoundMode::Closed);
                assert!(
                    exact <= comb.value + 1e-12,
                    "exact {exact} > combinatorial {} at n={n}, eps={eps}",
                    comb.value
                );
                assert!(comb.value <= closed.value + 1e-12);
            }
        }
    }

    #[test]
    fn cycle_sampler_matches_exact_law_at_small_horizon() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xA5A5_0001);
        let n = 2u64;
        let replicas = 40_000usize;
        let exact = exact_alt_distribution(n);
        let atoms = exact.atoms_f64();
        let mut counts = vec![0usize; atoms.len()];
        for _ in 0..replicas {
            let m = *sample_alt_cycle_fractions(n as usize, &mut rng)
                .last()
                .unwrap();
            let idx = atoms
                .iter()
                .position(|(v, _)| (v - m).abs() < 1e-12)
                .expect("sampled fraction must be a support atom");
            counts[idx] += 1;
        }
        for (idx, (_, mass)) in atoms.iter().enumerate() {
            let expected = mass * replicas as f64;
            let se = (replicas as f64 * mass * (1.0 - mass)).sqrt();
            let diff = (counts[idx] as f64 - expected).abs();
            assert!(diff <= 4.0 * se, "atom {idx} off by {diff} (se {se})");
        }
    }
}
