//! Exhaustive enumeration and recursion for the excursions of two walkers
//! between joint visits to the center node, under random walker selection.
//!
//! A path is a sequence of move symbols (which walker, which direction)
//! starting and ending with both walkers at the center, with no joint center
//! visit strictly inside. Enumeration filters all `4^(2l)` candidate symbol
//! strings and evaluates the survivors exactly; the recursion and the closed
//! form reproduce the same expectations without enumeration and are verified
//! against it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::io::Write;
use thiserror::Error;

/// Enumeration cap: `4^(2l)` candidates stay below ~17M up to here.
pub const MAX_ENUMERATION_LEVEL: u64 = 6;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("excursion half-length {l} exceeds the enumeration cap {max}")]
    LevelTooLarge { l: u64, max: u64 },
    #[error("extension choice must be 1..=4, got {k}")]
    InvalidExtensionChoice { k: u8 },
    #[error("edge weights must be positive")]
    NonPositiveWeight,
    #[error(
        "closed form violated at (a={a}, b={b}, l={l}): E = {e}, q = {q}, expected {expected}"
    )]
    ClosedFormMismatch {
        a: u64,
        b: u64,
        l: u64,
        e: BigRational,
        q: BigRational,
        expected: BigRational,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Left,
    Right,
}

/// One move: `walker` (0 or 1) steps in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveSymbol {
    pub walker: usize,
    pub direction: Direction,
}

impl MoveSymbol {
    fn from_code(code: u64) -> Self {
        MoveSymbol {
            walker: (code >> 1) as usize & 1,
            direction: if code & 1 == 0 {
                Direction::Left
            } else {
                Direction::Right
            },
        }
    }
}

/// A valid excursion with its exact probability and derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub moves: Vec<MoveSymbol>,
    /// Probability of the walkers executing exactly these moves, starting
    /// from edge weights `(a, b)`.
    pub probability: BigRational,
    /// Crossings of the left edge along the path, by either walker in either
    /// direction.
    pub d: u64,
    /// Whether the walker away from the center sits on the left at the
    /// next-to-last step.
    pub left_flag: bool,
    /// Final left-edge weight fraction `(a + d) / (a + b + 2l)`.
    pub f: BigRational,
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Checks the segment dynamics and the first-joint-return condition without
/// touching any arithmetic; probability evaluation happens only for
/// survivors.
fn is_valid_excursion(moves: &[MoveSymbol]) -> bool {
    let steps = moves.len();
    let mut pos = [0i64; 2];
    for (t, symbol) in moves.iter().enumerate() {
        let p = &mut pos[symbol.walker];
        match (symbol.direction, *p) {
            (Direction::Left, -1) | (Direction::Right, 1) => return false,
            (Direction::Left, _) => *p -= 1,
            (Direction::Right, _) => *p += 1,
        }
        if pos == [0, 0] && t + 1 < steps {
            return false;
        }
    }
    pos == [0, 0]
}

/// Evaluates a valid excursion exactly, given start weights `(a, b)`.
fn evaluate(moves: &[MoveSymbol], a: u64, b: u64) -> PathRecord {
    let two_l = moves.len() as u64;
    let mut pos = [0i64; 2];
    let mut left_crossings = 0u64;
    let mut right_crossings = 0u64;
    let mut probability = BigRational::one();
    let half = ratio(1, 2);
    let mut left_flag = false;
    for (t, symbol) in moves.iter().enumerate() {
        probability *= &half; // walker selection
        let from = pos[symbol.walker];
        if from == 0 {
            let w_left = a + left_crossings;
            let w_right = b + right_crossings;
            let chosen = match symbol.direction {
                Direction::Left => w_left,
                Direction::Right => w_right,
            };
            probability *= ratio(chosen, w_left + w_right);
        }
        // moves from the outer nodes are forced, probability factor 1
        match symbol.direction {
            Direction::Left => pos[symbol.walker] -= 1,
            Direction::Right => pos[symbol.walker] += 1,
        }
        let to = pos[symbol.walker];
        if from.min(to) == -1 {
            left_crossings += 1;
        } else {
            right_crossings += 1;
        }
        if t as u64 + 1 == two_l - 1 {
            let outer = if pos[0] == 0 { pos[1] } else { pos[0] };
            left_flag = outer == -1;
        }
    }
    PathRecord {
        moves: moves.to_vec(),
        probability,
        d: left_crossings,
        left_flag,
        f: ratio(a + left_crossings, a + b + two_l),
    }
}

/// All excursions of length `2l` with exact probabilities for start weights
/// `(a, b)`, by filtering every candidate symbol string.
pub fn enumerate_paths(l: u64, a: u64, b: u64) -> Result<Vec<PathRecord>, PathError> {
    if l == 0 || l > MAX_ENUMERATION_LEVEL {
        return Err(PathError::LevelTooLarge {
            l,
            max: MAX_ENUMERATION_LEVEL,
        });
    }
    if a == 0 || b == 0 {
        return Err(PathError::NonPositiveWeight);
    }
    let steps = 2 * l as u32;
    let mut symbols = vec![
        MoveSymbol {
            walker: 0,
            direction: Direction::Left
        };
        steps as usize
    ];
    let mut records = Vec::new();
    for candidate in 0u64..1 << (2 * steps) {
        for (i, slot) in symbols.iter_mut().enumerate() {
            *slot = MoveSymbol::from_code(candidate >> (2 * i));
        }
        if is_valid_excursion(&symbols) {
            records.push(evaluate(&symbols, a, b));
        }
    }
    Ok(records)
}

/// The four canonical extensions of an excursion to length `2(l+1)`: drop the
/// final return, send the center walker out (left for k = 1, 2; right for
/// k = 3, 4), then bring both walkers back (center walker first for odd k).
///
/// Probability and outcome are updated by closed-form factors, not by
/// re-evaluating the move sequence; the tests check both agree.
pub fn extend_path(
    record: &PathRecord,
    k: u8,
    a: u64,
    b: u64,
    l: u64,
) -> Result<PathRecord, PathError> {
    if !(1..=4).contains(&k) {
        return Err(PathError::InvalidExtensionChoice { k });
    }
    let d = record.d;
    let last = *record.moves.last().expect("excursions are nonempty");
    let outer_walker = last.walker;
    let center_walker = 1 - outer_walker;
    let outer_return = last.direction;
    let goes_left = k <= 2;
    let (out_dir, back_dir) = if goes_left {
        (Direction::Left, Direction::Right)
    } else {
        (Direction::Right, Direction::Left)
    };
    let center_out = MoveSymbol {
        walker: center_walker,
        direction: out_dir,
    };
    let center_back = MoveSymbol {
        walker: center_walker,
        direction: back_dir,
    };
    let outer_back = MoveSymbol {
        walker: outer_walker,
        direction: outer_return,
    };
    let mut moves = record.moves[..record.moves.len() - 1].to_vec();
    moves.push(center_out);
    if k % 2 == 1 {
        moves.push(center_back);
        moves.push(outer_back);
    } else {
        moves.push(outer_back);
        moves.push(center_back);
    }

    // weights seen by the center walker at step 2l: the outer walker's
    // pending return crossing is not on the edges yet
    let denominator = a + b + 2 * l - 1;
    let numerator = match (record.left_flag, goes_left) {
        (true, true) => a + d - 1,
        (true, false) => b + 2 * l - d,
        (false, true) => a + d,
        (false, false) => b + 2 * l - d - 1,
    };
    let factor = ratio(1, 4) * ratio(numerator, denominator);
    let new_d = if goes_left { d + 2 } else { d };
    let new_left_flag = match k {
        1 | 3 => record.left_flag, // the original outer walker is still out
        2 => true,                 // center walker parked on the left
        _ => false,                // center walker parked on the right
    };
    let f_numerator = if goes_left { a + d + 2 } else { a + d };
    Ok(PathRecord {
        moves,
        probability: &record.probability * factor,
        d: new_d,
        left_flag: new_left_flag,
        f: ratio(f_numerator, a + b + 2 * l + 2),
    })
}

/// Expectation/probability pair for excursions of half-length `l`:
/// `e` is the expected final left-edge fraction restricted to that excursion
/// length, `q` the probability that the excursion has that length and its
/// last returner comes from the left.
#[derive(Debug, Clone, PartialEq)]
pub struct EqPair {
    pub e: BigRational,
    pub q: BigRational,
}

impl EqPair {
    /// Values for the shortest excursions (`l = 1`): one walker steps out and
    /// straight back, so both quantities are `(1/2) a/(a+b)`.
    pub fn base(a: u64, b: u64) -> Self {
        let value = ratio(1, 2) * ratio(a, a + b);
        EqPair {
            e: value.clone(),
            q: value,
        }
    }

    /// Aggregates an enumerated path set into its `(e, q)` pair.
    pub fn from_paths(paths: &[PathRecord]) -> Self {
        let mut e = BigRational::zero();
        let mut q = BigRational::zero();
        for path in paths {
            e += &path.probability * &path.f;
            if path.left_flag {
                q += &path.probability;
            }
        }
        EqPair { e, q }
    }
}

/// One step of the excursion-length recursion, mapping the pair at `l` to the
/// pair at `l + 1`.
pub fn recursion_step(pair: &EqPair, a: u64, b: u64, l: u64) -> EqPair {
    let s = a + b + 2 * l;
    let diff = &pair.e - &pair.q;
    let e = ratio(1, 2) * &pair.e + BigRational::new(BigInt::one(), BigInt::from((s - 1) * (s + 2))) * &diff;
    let q = ratio(1, 2) * &pair.q + ratio(1, 4) * ratio(s, s - 1) * &diff;
    EqPair { e, q }
}

/// Closed form `2^-l * a / (a + b)` for both members of the pair.
pub fn closed_form(a: u64, b: u64, l: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(a + b) * BigInt::from(2u64).pow(l as u32))
}

#[derive(Debug, Clone)]
pub struct ClosedFormReport {
    pub recursion_levels: u64,
    pub enumerated_levels: u64,
}

/// Checks that recursion, closed form and (up to `enumerate_up_to`) brute
/// force enumeration all agree exactly for `l = 1..=max_l`. Any mismatch is a
/// hard error naming the offending `(a, b, l)`.
pub fn verify_closed_form(
    a: u64,
    b: u64,
    max_l: u64,
    enumerate_up_to: u64,
) -> Result<ClosedFormReport, PathError> {
    let mut pair = EqPair::base(a, b);
    let mut enumerated = 0;
    for l in 1..=max_l {
        let expected = closed_form(a, b, l);
        if pair.e != expected || pair.q != expected {
            return Err(PathError::ClosedFormMismatch {
                a,
                b,
                l,
                e: pair.e,
                q: pair.q,
                expected,
            });
        }
        if l <= enumerate_up_to {
            let paths = enumerate_paths(l, a, b)?;
            let mass: BigRational = paths.iter().map(|p| p.probability.clone()).sum();
            let from_enum = EqPair::from_paths(&paths);
            let expected_mass =
                BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l as u32));
            if mass != expected_mass || from_enum.e != expected || from_enum.q != expected {
                return Err(PathError::ClosedFormMismatch {
                    a,
                    b,
                    l,
                    e: from_enum.e,
                    q: from_enum.q,
                    expected,
                });
            }
            enumerated = l;
        }
        pair = recursion_step(&pair, a, b, l);
    }
    Ok(ClosedFormReport {
        recursion_levels: max_l,
        enumerated_levels: enumerated,
    })
}

/// CSV rows `l,e_numerator,e_denominator,q_numerator,q_denominator` from the
/// recursion.
pub fn write_eq_table<W: Write>(
    a: u64,
    b: u64,
    max_l: u64,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "l,e_numerator,e_denominator,q_numerator,q_denominator")?;
    let mut pair = EqPair::base(a, b);
    for l in 1..=max_l {
        let e = pair.e.reduced();
        let q = pair.q.reduced();
        writeln!(
            out,
            "{},{},{},{},{}",
            l,
            e.numer(),
            e.denom(),
            q.numer(),
            q.denom()
        )?;
        pair = recursion_step(&pair, a, b, l);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn r(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn shortest_excursions_are_the_four_out_and_back_moves() {
        let paths = enumerate_paths(1, 1, 1).unwrap();
        assert_eq!(paths.len(), 4);
        for path in &paths {
            assert_eq!(path.probability, r(1, 8));
            let first = path.moves[0];
            let second = path.moves[1];
            assert_eq!(first.walker, second.walker);
            assert_ne!(first.direction, second.direction);
            assert_eq!(path.left_flag, first.direction == Direction::Left);
            assert_eq!(path.d, if path.left_flag { 2 } else { 0 });
        }
        let mass: BigRational = paths.iter().map(|p| p.probability.clone()).sum();
        assert_eq!(mass, r(1, 2));
    }

    #[test]
    fn path_counts_quadruple_per_level() {
        let mut expected = 4usize;
        for l in 1..=4u64 {
            let count = enumerate_paths(l, 1, 1).unwrap().len();
            assert_eq!(count, expected, "at l = {l}");
            expected *= 4;
        }
    }

    #[test]
    fn excursion_mass_is_dyadic_for_any_weights() {
        for (a, b) in [(1u64, 1u64), (2, 3), (5, 1), (7, 11)] {
            for l in 1..=3u64 {
                let mass: BigRational = enumerate_paths(l, a, b)
                    .unwrap()
                    .iter()
                    .map(|p| p.probability.clone())
                    .sum();
                assert_eq!(
                    mass,
                    BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l as u32)),
                    "mass off at (a={a}, b={b}, l={l})"
                );
            }
        }
    }

    #[test]
    fn extension_example_probability_and_outcome() {
        // walker 0 goes left and returns; extend with the center walker
        // going left and returning first
        let base = enumerate_paths(1, 1, 1)
            .unwrap()
            .into_iter()
            .find(|p| p.moves[0].walker == 0 && p.moves[0].direction == Direction::Left)
            .unwrap();
        let p1 = extend_path(&base, 1, 1, 1, 1).unwrap();
        assert_eq!(p1.probability, r(1, 48));
        assert_eq!(p1.f, r(5, 6));
        assert_eq!(p1.d, 4);
        assert!(p1.left_flag);

        let p3 = extend_path(&base, 3, 1, 1, 1).unwrap();
        assert_eq!(p3.probability, &base.probability * r(1, 12));
        assert_eq!(p3.f, r(1, 2));
        assert_eq!(p3.d, 2);

        assert!(matches!(
            extend_path(&base, 5, 1, 1, 1),
            Err(PathError::InvalidExtensionChoice { k: 5 })
        ));
    }

    #[test]
    fn extensions_reconstruct_the_next_level_exactly() {
        for (a, b) in [(1u64, 1u64), (3, 2)] {
            for l in 1..=2u64 {
                let current = enumerate_paths(l, a, b).unwrap();
                let mut extended: BTreeMap<Vec<MoveSymbol>, PathRecord> = BTreeMap::new();
                for path in &current {
                    for k in 1..=4u8 {
                        let next = extend_path(path, k, a, b, l).unwrap();
                        let clash = extended.insert(next.moves.clone(), next);
                        assert!(clash.is_none(), "extensions must be pairwise distinct");
                    }
                }
                let direct = enumerate_paths(l + 1, a, b).unwrap();
                assert_eq!(direct.len(), extended.len());
                for path in direct {
                    let from_extension = extended
                        .get(&path.moves)
                        .expect("every next-level path arises as an extension");
                    assert_eq!(from_extension.probability, path.probability);
                    assert_eq!(from_extension.d, path.d);
                    assert_eq!(from_extension.left_flag, path.left_flag);
                    assert_eq!(from_extension.f, path.f);
                }
            }
        }
    }

    #[test]
    fn recursion_base_and_first_step() {
        let base = EqPair::base(1, 1);
        assert_eq!(base.e, r(1, 4));
        assert_eq!(base.q, r(1, 4));
        let next = recursion_step(&base, 1, 1, 1);
        assert_eq!(next.e, r(1, 8));
        assert_eq!(next.q, r(1, 8));

        let base = EqPair::base(3, 2);
        let next = recursion_step(&base, 3, 2, 1);
        assert_eq!(next.e, r(3, 20));
        assert_eq!(next.q, r(3, 20));
    }

    #[test]
    fn pair_values_stay_within_the_dyadic_envelope() {
        let (a, b) = (5u64, 3);
        let mut pair = EqPair::base(a, b);
        for l in 1..=12u64 {
            let cap = BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l as u32));
            assert!(pair.e <= cap && pair.e >= BigRational::zero());
            assert!(pair.q <= cap && pair.q >= BigRational::zero());
            pair = recursion_step(&pair, a, b, l);
        }
    }

    #[test]
    fn closed_form_verification_runs_clean() {
        let report = verify_closed_form(1, 1, 12, 3).unwrap();
        assert_eq!(report.recursion_levels, 12);
        assert_eq!(report.enumerated_levels, 3);
        verify_closed_form(5, 3, 12, 3).unwrap();
        verify_closed_form(2, 2, 8, 3).unwrap();
    }

    #[test]
    fn excursion_expectations_sum_to_the_martingale_value() {
        // sum over excursion lengths of e telescopes to a/(a+b); the tail
        // past L is exactly 2^-L * a/(a+b)
        for (a, b) in [(1u64, 1u64), (5, 3), (2, 7)] {
            let mut pair = EqPair::base(a, b);
            let mut partial = BigRational::zero();
            for l in 1..=30u64 {
                partial += &pair.e;
                pair = recursion_step(&pair, a, b, l);
            }
            let tail = closed_form(a, b, 30);
            assert_eq!(partial + tail, r(a as i64, (a + b) as i64));
        }
    }

    #[test]
    fn enumeration_rejects_out_of_range_levels() {
        assert!(matches!(
            enumerate_paths(0, 1, 1),
            Err(PathError::LevelTooLarge { .. })
        ));
        assert!(matches!(
            enumerate_paths(MAX_ENUMERATION_LEVEL + 1, 1, 1),
            Err(PathError::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn eq_table_csv_shape() {
        let mut buffer = Vec::new();
        write_eq_table(1, 1, 4, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "l,e_numerator,e_denominator,q_numerator,q_denominator"
        );
        assert_eq!(lines.next().unwrap(), "1,1,4,1,4");
        assert_eq!(lines.next().unwrap(), "2,1,8,1,8");
    }
}
