//! Shared process state and one-step dynamics for any number of walkers,
//! any reinforcement scheme, and either walker-selection rule.
//!
//! The Monte Carlo engine stores integer crossing counts and recomputes
//! floating-point weights from them on demand, so float error never
//! accumulates into the state. The same counts also yield exact rational
//! weights for the verification routines.

use crate::segment::rational_to_f64;
use crate::sequence::SequenceSpec;
use crate::zline::ZExtras;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("position {position} is not a node of the three-node segment")]
    PositionOutsideSegment { position: i64 },
    #[error("need at least one walker")]
    NoWalkers,
    #[error("alternating selection is defined for exactly two walkers, got {walkers}")]
    AlternatingNeedsTwoWalkers { walkers: usize },
    #[error("weight table must be non-decreasing and strictly positive")]
    InvalidWeightTable,
    #[error("initial weight for edge {edge} must be positive")]
    NonPositiveInitialWeight { edge: i64 },
    #[error("observer failed at time {time}: {message}")]
    Observer { time: u64, message: String },
}

/// Identifies the undirected edge `{z, z+1}` by its left endpoint.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EdgeIndex(pub i64);

impl std::fmt::Display for EdgeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Explicit per-edge weight function: `weights[k]` is the edge weight after
/// `k` crossings, constant past the end of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    weights: Vec<BigRational>,
    weights_f64: Vec<f64>,
}

impl WeightTable {
    pub fn new(weights: Vec<BigRational>) -> Result<Self, ModelError> {
        if weights.is_empty() || !weights[0].is_positive() {
            return Err(ModelError::InvalidWeightTable);
        }
        if weights.windows(2).any(|w| w[1] < w[0]) {
            return Err(ModelError::InvalidWeightTable);
        }
        let weights_f64 = weights.iter().map(rational_to_f64).collect();
        Ok(Self { weights, weights_f64 })
    }

    fn value(&self, crossings: u64) -> BigRational {
        let idx = (crossings as usize).min(self.weights.len() - 1);
        self.weights[idx].clone()
    }

    fn value_f64(&self, crossings: u64) -> f64 {
        let idx = (crossings as usize).min(self.weights_f64.len() - 1);
        self.weights_f64[idx]
    }
}

/// How crossing an edge changes its weight.
#[derive(Debug, Clone, PartialEq)]
pub enum ReinforcementScheme {
    /// Weight grows by one per crossing.
    Linear,
    /// Weight grows by `a_k` on the k-th crossing, independent of the edge.
    SequenceType(SequenceSpec),
    /// Edges listed here follow their explicit table; all others reinforce
    /// linearly on top of their initial weight.
    PerEdge(BTreeMap<EdgeIndex, WeightTable>),
}

/// Sparse crossing counts plus initial weights. Weights are derived values:
/// `weight(z) = W_z(count(z))` where the reinforcement scheme and the initial
/// weights determine `W_z`.
#[derive(Debug, Clone)]
pub struct WeightState {
    scheme: ReinforcementScheme,
    counts: BTreeMap<EdgeIndex, u64>,
    default_weight: BigRational,
    default_weight_f64: f64,
    overrides: BTreeMap<EdgeIndex, BigRational>,
    overrides_f64: BTreeMap<EdgeIndex, f64>,
    /// For sequence-type schemes: `cache[k]` = total increment after k
    /// crossings, extended on demand.
    increment_cache: RefCell<Vec<f64>>,
    total_crossings: u64,
}

impl WeightState {
    pub fn new(
        scheme: ReinforcementScheme,
        default_weight: BigRational,
        overrides: BTreeMap<EdgeIndex, BigRational>,
    ) -> Result<Self, ModelError> {
        if !default_weight.is_positive() {
            return Err(ModelError::NonPositiveInitialWeight { edge: 0 });
        }
        for (edge, w) in &overrides {
            if !w.is_positive() {
                return Err(ModelError::NonPositiveInitialWeight { edge: edge.0 });
            }
        }
        let default_weight_f64 = rational_to_f64(&default_weight);
        let overrides_f64 = overrides
            .iter()
            .map(|(e, w)| (*e, rational_to_f64(w)))
            .collect();
        Ok(Self {
            scheme,
            counts: BTreeMap::new(),
            default_weight,
            default_weight_f64,
            overrides,
            overrides_f64,
            increment_cache: RefCell::new(vec![0.0]),
            total_crossings: 0,
        })
    }

    pub fn unit(scheme: ReinforcementScheme) -> Self {
        Self::new(scheme, BigRational::one(), BTreeMap::new()).expect("unit weights are valid")
    }

    pub fn scheme(&self) -> &ReinforcementScheme {
        &self.scheme
    }

    pub fn count(&self, edge: EdgeIndex) -> u64 {
        self.counts.get(&edge).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<EdgeIndex, u64> {
        &self.counts
    }

    pub fn total_crossings(&self) -> u64 {
        self.total_crossings
    }

    pub fn record_crossing(&mut self, edge: EdgeIndex) {
        *self.counts.entry(edge).or_insert(0) += 1;
        self.total_crossings += 1;
    }

    pub fn initial_weight(&self, edge: EdgeIndex) -> BigRational {
        self.overrides
            .get(&edge)
            .cloned()
            .unwrap_or_else(|| self.default_weight.clone())
    }

    fn initial_weight_f64(&self, edge: EdgeIndex) -> f64 {
        self.overrides_f64
            .get(&edge)
            .copied()
            .unwrap_or(self.default_weight_f64)
    }

    /// Exact current weight of `edge`.
    pub fn weight(&self, edge: EdgeIndex) -> BigRational {
        self.weight_at(edge, self.count(edge))
    }

    /// Exact weight `edge` would have after `count` crossings.
    pub fn weight_at(&self, edge: EdgeIndex, count: u64) -> BigRational {
        match &self.scheme {
            ReinforcementScheme::Linear => {
                self.initial_weight(edge) + BigRational::from_integer(count.into())
            }
            ReinforcementScheme::SequenceType(spec) => {
                self.initial_weight(edge) + (spec.alpha(count) - BigRational::one())
            }
            ReinforcementScheme::PerEdge(tables) => match tables.get(&edge) {
                Some(table) => table.value(count),
                None => self.initial_weight(edge) + BigRational::from_integer(count.into()),
            },
        }
    }

    /// Current weight of `edge` in floating point, recomputed from the
    /// crossing count. May be infinite for explosive schemes; never NaN.
    pub fn weight_f64(&self, edge: EdgeIndex) -> f64 {
        self.weight_f64_at(edge, self.count(edge))
    }

    /// Floating-point weight `edge` would have after `count` crossings.
    pub fn weight_f64_at(&self, edge: EdgeIndex, count: u64) -> f64 {
        match &self.scheme {
            ReinforcementScheme::Linear => self.initial_weight_f64(edge) + count as f64,
            ReinforcementScheme::SequenceType(spec) => {
                let mut cache = self.increment_cache.borrow_mut();
                while cache.len() <= count as usize {
                    let k = cache.len() as u64;
                    let next = cache[cache.len() - 1] + spec.increment_f64(k);
                    cache.push(next);
                }
                self.initial_weight_f64(edge) + cache[count as usize]
            }
            ReinforcementScheme::PerEdge(tables) => match tables.get(&edge) {
                Some(table) => table.value_f64(count),
                None => self.initial_weight_f64(edge) + count as f64,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Segment3,
    IntegerLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduler {
    /// Walker 0 moves at odd times, walker 1 at even times. Two walkers only.
    Alternating,
    /// The moving walker is chosen uniformly at random each step.
    UniformRandom,
}

/// Exact one-step transition probabilities `(p_left, p_right)` for a walker
/// sitting at `position`.
pub fn transition_probabilities(
    weights: &WeightState,
    position: i64,
    domain: Domain,
) -> Result<(BigRational, BigRational), ModelError> {
    if domain == Domain::Segment3 {
        match position {
            1 => return Ok((BigRational::one(), BigRational::zero())),
            -1 => return Ok((BigRational::zero(), BigRational::one())),
            0 => {}
            _ => return Err(ModelError::PositionOutsideSegment { position }),
        }
    }
    let left = weights.weight(EdgeIndex(position - 1));
    let right = weights.weight(EdgeIndex(position));
    let total = &left + &right;
    Ok((left / &total, right / &total))
}

/// Probability of moving right, in floating point. Saturated weights are
/// handled so the result is always a probability, never NaN.
fn right_move_probability(weights: &WeightState, position: i64, domain: Domain) -> f64 {
    if domain == Domain::Segment3 {
        match position {
            1 => return 0.0,
            -1 => return 1.0,
            _ => {}
        }
    }
    let left = weights.weight_f64(EdgeIndex(position - 1));
    let right = weights.weight_f64(EdgeIndex(position));
    match (left.is_infinite(), right.is_infinite()) {
        (true, true) => 0.5,
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => right / (left + right),
    }
}

/// Exact left-edge weight fraction `w(-1) / (w(-1) + w(0))`.
pub fn left_edge_fraction(weights: &WeightState) -> BigRational {
    let left = weights.weight(EdgeIndex(-1));
    let right = weights.weight(EdgeIndex(0));
    let total = &left + &right;
    left / total
}

/// Same fraction in floating point.
pub fn left_edge_fraction_f64(weights: &WeightState) -> f64 {
    let left = weights.weight_f64(EdgeIndex(-1));
    let right = weights.weight_f64(EdgeIndex(0));
    left / (left + right)
}

/// One executed move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    /// Time at which the new position holds; the first step has time 1.
    pub time: u64,
    pub walker_id: usize,
    pub from_node: i64,
    pub to_node: i64,
    pub edge_crossed: EdgeIndex,
}

/// Mixes a base seed with a replica index into an independent stream seed.
/// This is the only seed derivation used anywhere, so recorded
/// `(base_seed, replica)` pairs pin every stream.
pub fn replica_seed(base_seed: u64, replica: u64) -> u64 {
    // splitmix64 on base ^ (replica * odd golden-ratio constant)
    let mut z = base_seed ^ replica.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The full mutable state of one replica: walker positions, time, weights
/// and the RNG stream.
#[derive(Debug, Clone)]
pub struct WalkerSystem {
    positions: Vec<i64>,
    time: u64,
    scheduler: Scheduler,
    domain: Domain,
    weights: WeightState,
    rng: ChaCha8Rng,
}

impl WalkerSystem {
    pub fn new(
        domain: Domain,
        scheduler: Scheduler,
        weights: WeightState,
        initial_positions: Vec<i64>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if initial_positions.is_empty() {
            return Err(ModelError::NoWalkers);
        }
        if scheduler == Scheduler::Alternating && initial_positions.len() != 2 {
            return Err(ModelError::AlternatingNeedsTwoWalkers {
                walkers: initial_positions.len(),
            });
        }
        if domain == Domain::Segment3 {
            if let Some(&p) = initial_positions.iter().find(|p| p.abs() > 1) {
                return Err(ModelError::PositionOutsideSegment { position: p });
            }
        }
        Ok(Self {
            positions: initial_positions,
            time: 0,
            scheduler,
            domain,
            weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn walker_count(&self) -> usize {
        self.positions.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn scheduler(&self) -> Scheduler {
        self.scheduler
    }

    pub fn weights(&self) -> &WeightState {
        &self.weights
    }

    /// Advances the system by one step: select a walker, sample its move from
    /// the current weights, reinforce the crossed edge.
    pub fn step(&mut self) -> StepRecord {
        let time = self.time + 1;
        let walker_id = match self.scheduler {
            Scheduler::Alternating => {
                if time % 2 == 1 {
                    0
                } else {
                    1
                }
            }
            Scheduler::UniformRandom => self.rng.gen_range(0..self.positions.len()),
        };
        let from_node = self.positions[walker_id];
        let go_right = match (self.domain, from_node) {
            (Domain::Segment3, 1) => false,
            (Domain::Segment3, -1) => true,
            _ => {
                let p_right = right_move_probability(&self.weights, from_node, self.domain);
                self.rng.gen::<f64>() < p_right
            }
        };
        let to_node = from_node + if go_right { 1 } else { -1 };
        let edge_crossed = EdgeIndex(from_node.min(to_node));
        self.weights.record_crossing(edge_crossed);
        self.positions[walker_id] = to_node;
        self.time = time;
        StepRecord {
            time,
            walker_id,
            from_node,
            to_node,
            edge_crossed,
        }
    }

    pub fn all_walkers_at_center(&self) -> bool {
        self.positions.iter().all(|&p| p == 0)
    }
}

/// Per-step callback. A failing observer aborts the trajectory.
pub trait Observer {
    fn after_step(&mut self, system: &WalkerSystem, record: &StepRecord) -> Result<(), String>;
}

/// Records the left-edge weight fraction after every step.
#[derive(Debug, Default)]
pub struct FractionSampler {
    pub samples: Vec<f64>,
}

impl Observer for FractionSampler {
    fn after_step(&mut self, system: &WalkerSystem, _record: &StepRecord) -> Result<(), String> {
        self.samples.push(left_edge_fraction_f64(system.weights()));
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkerStats {
    pub min_position: i64,
    pub max_position: i64,
    pub returns_to_zero: u64,
    pub final_position: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSnapshot {
    pub edge: i64,
    pub crossings: u64,
    pub weight: f64,
}

/// Per-replica result row.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub steps: u64,
    pub final_time: u64,
    pub walkers: Vec<WalkerStats>,
    /// Times at which all walkers sat at node 0 simultaneously.
    #[serde(skip_serializing)]
    pub meeting_times: Vec<u64>,
    pub meeting_count: u64,
    pub final_left_fraction: f64,
    pub total_crossings: u64,
    pub touched_edges: Vec<EdgeSnapshot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<ZExtras>,
}

/// Runs `n_steps` steps, maintaining the summary and invoking the observers
/// after every step.
pub fn run_trajectory(
    system: &mut WalkerSystem,
    n_steps: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectorySummary, ModelError> {
    let mut walkers: Vec<WalkerStats> = system
        .positions()
        .iter()
        .map(|&p| WalkerStats {
            min_position: p,
            max_position: p,
            returns_to_zero: 0,
            final_position: p,
        })
        .collect();
    let mut meeting_times = Vec::new();
    for _ in 0..n_steps {
        let record = system.step();
        let stats = &mut walkers[record.walker_id];
        stats.min_position = stats.min_position.min(record.to_node);
        stats.max_position = stats.max_position.max(record.to_node);
        if record.to_node == 0 {
            stats.returns_to_zero += 1;
        }
        if system.all_walkers_at_center() {
            meeting_times.push(record.time);
        }
        for observer in observers.iter_mut() {
            observer
                .after_step(system, &record)
                .map_err(|message| ModelError::Observer {
                    time: record.time,
                    message,
                })?;
        }
    }
    for (stats, &p) in walkers.iter_mut().zip(system.positions()) {
        stats.final_position = p;
    }
    let touched_edges = system
        .weights()
        .counts()
        .iter()
        .map(|(&edge, &crossings)| EdgeSnapshot {
            edge: edge.0,
            crossings,
            weight: system.weights().weight_f64(edge),
        })
        .collect();
    Ok(TrajectorySummary {
        steps: n_steps,
        final_time: system.time(),
        walkers,
        meeting_count: meeting_times.len() as u64,
        meeting_times,
        final_left_fraction: left_edge_fraction_f64(system.weights()),
        total_crossings: system.weights().total_crossings(),
        touched_edges,
        z: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn unit_linear() -> WeightState {
        WeightState::unit(ReinforcementScheme::Linear)
    }

    fn segment_pair(scheduler: Scheduler, seed: u64) -> WalkerSystem {
        WalkerSystem::new(
            Domain::Segment3,
            scheduler,
            unit_linear(),
            vec![0, 0],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn transition_probabilities_examples() {
        let weights = unit_linear();
        let (l, r) = transition_probabilities(&weights, 0, Domain::Segment3).unwrap();
        assert_eq!(l, rat(1, 2));
        assert_eq!(r, rat(1, 2));

        let mut overrides = BTreeMap::new();
        overrides.insert(EdgeIndex(-1), rat(3, 1));
        let weights =
            WeightState::new(ReinforcementScheme::Linear, BigRational::one(), overrides).unwrap();
        let (l, r) = transition_probabilities(&weights, 0, Domain::Segment3).unwrap();
        assert_eq!(l, rat(3, 4));
        assert_eq!(r, rat(1, 4));

        let weights = unit_linear();
        let (l, r) = transition_probabilities(&weights, 1, Domain::Segment3).unwrap();
        assert_eq!((l, r), (rat(1, 1), rat(0, 1)));

        assert!(matches!(
            transition_probabilities(&unit_linear(), 2, Domain::Segment3),
            Err(ModelError::PositionOutsideSegment { position: 2 })
        ));
    }

    #[test]
    fn transition_probabilities_sum_to_one_on_the_line() {
        let mut weights = unit_linear();
        weights.record_crossing(EdgeIndex(4));
        weights.record_crossing(EdgeIndex(4));
        let (l, r) = transition_probabilities(&weights, 5, Domain::IntegerLine).unwrap();
        assert_eq!(&l + &r, BigRational::one());
        assert_eq!(l, rat(3, 4)); // w(4) = 3 vs w(5) = 1
    }

    #[test]
    fn alternating_walker_order() {
        let mut system = segment_pair(Scheduler::Alternating, 7);
        let first = system.step();
        assert_eq!(first.walker_id, 0);
        assert_eq!(first.time, 1);
        let second = system.step();
        assert_eq!(second.walker_id, 1);
    }

    #[test]
    fn fixed_seed_replays_identically() {
        for scheduler in [Scheduler::Alternating, Scheduler::UniformRandom] {
            let mut a = segment_pair(scheduler, 42);
            let mut b = segment_pair(scheduler, 42);
            for _ in 0..300 {
                assert_eq!(a.step(), b.step());
            }
        }
    }

    #[test]
    fn alternating_meetings_are_multiples_of_four() {
        for seed in [1u64, 2, 3] {
            let mut system = segment_pair(Scheduler::Alternating, seed);
            let summary = run_trajectory(&mut system, 400, &mut []).unwrap();
            assert_eq!(summary.meeting_count, 100);
            assert!(summary.meeting_times.iter().all(|t| t % 4 == 0));
        }
    }

    #[test]
    fn linear_reinforcement_conserves_total_weight_growth() {
        let mut system = WalkerSystem::new(
            Domain::IntegerLine,
            Scheduler::UniformRandom,
            unit_linear(),
            vec![0, 0, 0],
            11,
        )
        .unwrap();
        let steps = 5_000;
        let summary = run_trajectory(&mut system, steps, &mut []).unwrap();
        assert_eq!(summary.total_crossings, steps);
        let growth: BigRational = system
            .weights()
            .counts()
            .keys()
            .map(|&e| system.weights().weight(e) - system.weights().initial_weight(e))
            .sum();
        assert_eq!(growth, BigRational::from_integer(steps.into()));
    }

    #[test]
    fn single_walker_total_weight_after_n_steps() {
        let mut system = WalkerSystem::new(
            Domain::Segment3,
            Scheduler::UniformRandom,
            unit_linear(),
            vec![0],
            5,
        )
        .unwrap();
        run_trajectory(&mut system, 4000, &mut []).unwrap();
        let total = system.weights().weight(EdgeIndex(-1)) + system.weights().weight(EdgeIndex(0));
        assert_eq!(total, rat(4002, 1));
    }

    #[test]
    fn alternating_cycle_denominator() {
        let mut system = segment_pair(Scheduler::Alternating, 3);
        for n in 1..=25u64 {
            for _ in 0..4 {
                system.step();
            }
            let total =
                system.weights().weight(EdgeIndex(-1)) + system.weights().weight(EdgeIndex(0));
            assert_eq!(total, rat((4 * n + 2) as i64, 1));
        }
    }

    #[test]
    fn left_fraction_examples() {
        let weights = unit_linear();
        assert_eq!(left_edge_fraction(&weights), rat(1, 2));

        let mut overrides = BTreeMap::new();
        overrides.insert(EdgeIndex(-1), rat(5, 1));
        let weights =
            WeightState::new(ReinforcementScheme::Linear, BigRational::one(), overrides).unwrap();
        assert_eq!(left_edge_fraction(&weights), rat(5, 6));
    }

    #[test]
    fn fraction_increment_bound_along_trajectory() {
        let mut system = segment_pair(Scheduler::UniformRandom, 23);
        let mut previous = 0.5f64;
        for n in 1..=2_000u64 {
            system.step();
            let fraction = left_edge_fraction_f64(system.weights());
            let bound = 1.0 / (n as f64 + 1.0) + 1e-12;
            assert!(
                (fraction - previous).abs() <= bound,
                "step {n}: jump {} exceeds {bound}",
                (fraction - previous).abs()
            );
            previous = fraction;
        }
    }

    #[test]
    fn zero_steps_summary_is_initial_state() {
        let mut system = segment_pair(Scheduler::UniformRandom, 9);
        let summary = run_trajectory(&mut system, 0, &mut []).unwrap();
        assert_eq!(summary.final_time, 0);
        assert_eq!(summary.total_crossings, 0);
        assert_eq!(summary.final_left_fraction, 0.5);
        assert!(summary.touched_edges.is_empty());
        assert!(summary.walkers.iter().all(|w| w.final_position == 0));
    }

    #[test]
    fn observer_failure_aborts_with_time() {
        struct FailAt(u64);
        impl Observer for FailAt {
            fn after_step(
                &mut self,
                _system: &WalkerSystem,
                record: &StepRecord,
            ) -> Result<(), String> {
                if record.time >= self.0 {
                    Err("boom".into())
                } else {
                    Ok(())
                }
            }
        }
        let mut system = segment_pair(Scheduler::UniformRandom, 1);
        let mut failing = FailAt(5);
        let mut observers: Vec<&mut dyn Observer> = vec![&mut failing];
        let err = run_trajectory(&mut system, 100, &mut observers).unwrap_err();
        match err {
            ModelError::Observer { time, message } => {
                assert_eq!(time, 5);
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sequence_weights_match_exact_alpha() {
        use crate::sequence::{Generator, SequenceSpec};
        let spec = SequenceSpec::new(
            Generator::Geometric { ratio: rat(2, 1) },
            "geometric-2",
        )
        .unwrap();
        let mut weights = WeightState::unit(ReinforcementScheme::SequenceType(spec.clone()));
        let edge = EdgeIndex(0);
        for k in 1..=12u64 {
            weights.record_crossing(edge);
            let expected = spec.alpha(k);
            assert_eq!(weights.weight(edge), expected);
            assert!((weights.weight_f64(edge) - rational_to_f64(&expected)).abs() < 1e-9);
        }
    }

    #[test]
    fn saturated_weights_yield_valid_probabilities() {
        use crate::sequence::{Generator, SequenceSpec};
        let spec = SequenceSpec::new(
            Generator::Geometric { ratio: rat(4, 1) },
            "geometric-4",
        )
        .unwrap();
        let mut weights = WeightState::unit(ReinforcementScheme::SequenceType(spec));
        let edge = EdgeIndex(0);
        for _ in 0..2_000 {
            weights.record_crossing(edge);
        }
        assert!(weights.weight_f64(edge).is_infinite());
        let p = right_move_probability(&weights, 0, Domain::IntegerLine);
        assert_eq!(p, 1.0);
        let p = right_move_probability(&weights, 1, Domain::IntegerLine);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn per_edge_tables_apply_to_listed_edges_only() {
        let mut tables = BTreeMap::new();
        tables.insert(
            EdgeIndex(0),
            WeightTable::new(vec![rat(1, 1), rat(10, 1), rat(10, 1)]).unwrap(),
        );
        let mut weights = WeightState::unit(ReinforcementScheme::PerEdge(tables));
        weights.record_crossing(EdgeIndex(0));
        weights.record_crossing(EdgeIndex(1));
        assert_eq!(weights.weight(EdgeIndex(0)), rat(10, 1));
        assert_eq!(weights.weight(EdgeIndex(1)), rat(2, 1));
        // past the end of the table the weight stays put
        weights.record_crossing(EdgeIndex(0));
        weights.record_crossing(EdgeIndex(0));
        assert_eq!(weights.weight(EdgeIndex(0)), rat(10, 1));
    }

    #[test]
    fn weight_table_validation() {
        assert!(WeightTable::new(vec![]).is_err());
        assert!(WeightTable::new(vec![rat(0, 1)]).is_err());
        assert!(WeightTable::new(vec![rat(2, 1), rat(1, 1)]).is_err());
    }

    #[test]
    fn replica_seeds_are_spread_out() {
        let mut seen = std::collections::BTreeSet::new();
        for r in 0..1000u64 {
            seen.insert(replica_seed(99, r));
        }
        assert_eq!(seen.len(), 1000);
    }
}
