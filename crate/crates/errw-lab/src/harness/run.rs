//! Dispatch from a validated configuration to the engines, with all file
//! output funneled through one artifact writer that embeds the config header
//! and never leaves partial files behind.

use super::config::{ArtifactHeader, ConfigError, ExactLaw, ExperimentConfig, Mode};
use crate::model::{
    left_edge_fraction_f64, replica_seed, run_trajectory, Domain, TrajectorySummary, WalkerSystem,
    WeightState,
};
use crate::segment::{
    conditional_mean_after_cycle, exact_alt_distribution, exact_single_distribution,
    meeting_time_pmf, second_moment_delta, second_moment_delta_closed_form, RationalDistribution,
};
use crate::sequence::{classify_outcome, trapping_bound, write_phi_csv, Classification};
use crate::stats::{beta_fit_mom, beta_pdf, histogram_49, histogram_49_exact, Histogram49};
use crate::zline::{
    all_trapped_on_one_edge, conditional_increment_table, enumerate_joint_law,
    recurrence_report, relabeled_joint_law, run_z, Verdict, ZRunConfig,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("identity check failed: {0}")]
    Identity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Engine(String),
}

impl RunError {
    /// Process exit code: 1 config, 2 identity failure, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Engine(_) => 1,
            RunError::Identity(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

fn engine<E: std::fmt::Display>(error: E) -> RunError {
    RunError::Engine(error.to_string())
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl RunReport {
    fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Runs the experiment described by `config`. Outputs land in
/// `config.out_dir`; the report lists the files written plus human-readable
/// summary lines.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    match config.mode {
        Mode::SimulateSegment => simulate_segment(config),
        Mode::ExactSegment => exact_segment(config),
        Mode::SimulateZ => simulate_z(config),
        Mode::Classify => classify_mode(config),
        Mode::ReproduceFigures => reproduce_figures(config),
        Mode::VerifyIdentities => verify_identities_mode(config),
    }
}

// ---------------------------------------------------------------------------
// Artifact writing
// ---------------------------------------------------------------------------

struct ArtifactWriter {
    out_dir: PathBuf,
    header: ArtifactHeader,
}

impl ArtifactWriter {
    fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        fs::create_dir_all(&config.out_dir)?;
        Ok(Self {
            out_dir: config.out_dir.clone(),
            header: ArtifactHeader::for_config(config),
        })
    }

    /// Writes one artifact through a temp file, prepending the header line;
    /// rename on success, unlink on failure.
    fn write(
        &self,
        name: &str,
        header_line: String,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), RunError>,
    ) -> Result<PathBuf, RunError> {
        let path = self.out_dir.join(name);
        let tmp = self.out_dir.join(format!("{name}.tmp"));
        let result = (|| -> Result<(), RunError> {
            let mut writer = BufWriter::new(fs::File::create(&tmp)?);
            writeln!(writer, "{header_line}")?;
            body(&mut writer)?;
            writer.flush()?;
            Ok(())
        })();
        match result {
            Ok(()) => {
                fs::rename(&tmp, &path)?;
                Ok(path)
            }
            Err(error) => {
                let _ = fs::remove_file(&tmp);
                Err(error)
            }
        }
    }

    fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), RunError>,
    ) -> Result<PathBuf, RunError> {
        self.write(name, self.header.csv_line(), body)
    }

    /// CSV artifact whose header line carries extra `key=value` annotations.
    fn write_csv_annotated(
        &self,
        name: &str,
        annotations: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), RunError>,
    ) -> Result<PathBuf, RunError> {
        let line = format!("{} {}", self.header.csv_line(), annotations);
        self.write(name, line, body)
    }

    fn write_jsonl<T: Serialize>(
        &self,
        name: &str,
        rows: impl Iterator<Item = T>,
    ) -> Result<PathBuf, RunError> {
        self.write(name, self.header.jsonl_line(), |writer| {
            for row in rows {
                serde_json::to_writer(&mut *writer, &row).map_err(|e| RunError::Engine(e.to_string()))?;
                writeln!(writer)?;
            }
            Ok(())
        })
    }
}

// ---------------------------------------------------------------------------
// Replica-level parallelism
// ---------------------------------------------------------------------------

/// Runs `count` replica jobs across `threads` workers. Replica indices are
/// striped over the workers and the results re-ordered, so the output is
/// identical for every thread count.
fn parallel_replicas<T: Send>(
    count: u64,
    threads: usize,
    job: impl Fn(u64) -> T + Sync,
) -> Vec<T> {
    let threads = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    };
    let threads = threads.min(count.max(1) as usize).max(1);
    if threads == 1 {
        return (0..count).map(job).collect();
    }
    let mut indexed: Vec<(u64, T)> = std::thread::scope(|scope| {
        let job = &job;
        let handles: Vec<_> = (0..threads)
            .map(|worker| {
                scope.spawn(move || {
                    let mut results = Vec::new();
                    let mut replica = worker as u64;
                    while replica < count {
                        results.push((replica, job(replica)));
                        replica += threads as u64;
                    }
                    results
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("replica worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(replica, _)| *replica);
    indexed.into_iter().map(|(_, value)| value).collect()
}

#[derive(Serialize)]
struct ReplicaRow<'a> {
    replica: u64,
    seed: u64,
    #[serde(flatten)]
    summary: &'a TrajectorySummary,
}

// ---------------------------------------------------------------------------
// simulate-segment
// ---------------------------------------------------------------------------

fn simulate_segment(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let scheme = config.reinforcement_scheme()?;
    let positions = config.initial_positions();
    let overrides = config.override_map();
    let summaries: Vec<(u64, TrajectorySummary)> =
        parallel_replicas(config.replicas, config.threads, |replica| {
            let seed = replica_seed(config.base_seed, replica);
            let weights = WeightState::new(scheme.clone(), BigRational::one(), overrides.clone())
                .expect("validated weights");
            let mut system = WalkerSystem::new(
                Domain::Segment3,
                config.scheduler,
                weights,
                positions.clone(),
                seed,
            )
            .expect("validated system");
            let summary = run_trajectory(&mut system, config.steps, &mut [])
                .expect("segment runs have no observers to fail");
            (seed, summary)
        })
        .into_iter()
        .enumerate()
        .map(|(replica, (seed, summary))| {
            let _ = seed;
            (replica as u64, summary)
        })
        .collect();

    let fractions: Vec<f64> = summaries.iter().map(|(_, s)| s.final_left_fraction).collect();
    let mut report = RunReport::default();

    let jsonl = writer.write_jsonl(
        "segment_replicas.jsonl",
        summaries.iter().map(|(replica, summary)| ReplicaRow {
            replica: *replica,
            seed: replica_seed(config.base_seed, *replica),
            summary,
        }),
    )?;
    report.files.push(jsonl);

    let histogram = histogram_49(&fractions).map_err(engine)?;
    report
        .files
        .push(writer.write_csv("segment_histogram.csv", |w| {
            write_histogram_csv(w, &histogram)
        })?);

    let n = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let variance = fractions.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let fit = beta_fit_mom(&fractions).ok();
    report
        .files
        .push(writer.write_csv("segment_summary.csv", |w| {
            writeln!(w, "replicas,steps,mean,variance,beta_alpha,beta_beta")?;
            let (alpha, beta) = fit.map_or((f64::NAN, f64::NAN), |f| f);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                config.replicas, config.steps, mean, variance, alpha, beta
            )?;
            Ok(())
        })?);

    report.note(format!(
        "simulate-segment: {} replicas x {} steps, mean fraction {:.6}, variance {:.6}",
        config.replicas, config.steps, mean, variance
    ));
    if let Some((alpha, beta)) = fit {
        report.note(format!("beta fit by moments: ({alpha:.4}, {beta:.4})"));
    }
    Ok(report)
}

fn write_histogram_csv(
    writer: &mut BufWriter<fs::File>,
    histogram: &Histogram49,
) -> Result<(), RunError> {
    writeln!(writer, "bin_center,density")?;
    for (center, density) in Histogram49::centers().iter().zip(histogram.densities()) {
        writeln!(writer, "{center},{density}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact-segment
// ---------------------------------------------------------------------------

fn exact_segment(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let distribution = match config.exact_law {
        ExactLaw::Alternating => exact_alt_distribution(config.exact_cycles),
        ExactLaw::SingleWalker => exact_single_distribution(config.exact_cycles),
    };
    let mut report = RunReport::default();
    report
        .files
        .push(writer.write_csv("exact_distribution.csv", |w| {
            distribution.write_csv(w).map_err(RunError::from)
        })?);
    let binned = histogram_49_exact(&distribution);
    report
        .files
        .push(writer.write_csv("exact_histogram.csv", |w| {
            writeln!(w, "bin_center,density")?;
            for (center, density) in Histogram49::centers().iter().zip(&binned.densities) {
                writeln!(w, "{center},{density}")?;
            }
            Ok(())
        })?);
    report.note(format!(
        "exact-segment: law {:?} at horizon {}, {} atoms",
        config.exact_law,
        config.exact_cycles,
        distribution.support().len()
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// simulate-z
// ---------------------------------------------------------------------------

fn simulate_z(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let scheme = config.reinforcement_scheme()?;
    let positions = config.initial_positions();
    let overrides = config.override_map();
    let summaries: Vec<TrajectorySummary> =
        parallel_replicas(config.replicas, config.threads, |replica| {
            let mut z_config = ZRunConfig::new(
                config.walkers,
                scheme.clone(),
                config.steps,
                replica_seed(config.base_seed, replica),
            );
            z_config.initial_positions = positions.clone();
            z_config.overrides = overrides.clone();
            z_config.stall_window = config.stall_window;
            z_config.diagnostics_walker = Some(0);
            run_z(&z_config).expect("validated line-walk config")
        });
    let verdicts = recurrence_report(&summaries, config.stall_window, config.return_threshold)
        .map_err(engine)?;

    // trapping bound, when the increment series is classified convergent
    let bound_annotation = match config.sequence_spec() {
        Ok(spec) => {
            let truncation = config.k_max.max(16);
            match trapping_bound(
                config.walkers as u32,
                &spec,
                truncation,
                config.growth_test.into(),
            ) {
                Ok(bound) => Some(format!("trapping_bound={:e}", bound.lower_bound)),
                Err(_) => None,
            }
        }
        Err(_) => None,
    };

    let mut report = RunReport::default();
    report.files.push(writer.write_jsonl(
        "z_replicas.jsonl",
        summaries.iter().enumerate().map(|(replica, summary)| ReplicaRow {
            replica: replica as u64,
            seed: replica_seed(config.base_seed, replica as u64),
            summary,
        }),
    )?);

    report.files.push(writer.write_csv("z_verdicts.csv", |w| {
        writeln!(
            w,
            "replica,verdict,stalled,returning,confined_to_one_edge,anomaly,visited_nodes,min_returns_final_half,max_walker_range"
        )?;
        for (replica, (summary, verdict)) in summaries.iter().zip(&verdicts).enumerate() {
            let z = summary.z.as_ref().expect("line runs carry extras");
            let min_returns = z.returns_final_half.iter().min().copied().unwrap_or(0);
            let max_range = summary
                .walkers
                .iter()
                .map(|w| w.max_position - w.min_position)
                .max()
                .unwrap_or(0);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                replica,
                verdict_name(verdict.verdict),
                verdict.stalled,
                verdict.returning,
                verdict.confined_to_one_edge,
                verdict.anomaly,
                z.visited_node_count,
                min_returns,
                max_range
            )?;
        }
        Ok(())
    })?);

    let recurrent = count_verdicts(&verdicts, Verdict::RecurrentEvidence);
    let finite = count_verdicts(&verdicts, Verdict::FiniteRangeEvidence);
    let undecided = count_verdicts(&verdicts, Verdict::Undecided);
    let anomalies = verdicts.iter().filter(|v| v.anomaly).count();
    let trapped = summaries
        .iter()
        .filter(|s| all_trapped_on_one_edge(s).unwrap_or(false))
        .count();
    let mut ranges: Vec<i64> = summaries
        .iter()
        .map(|s| {
            s.walkers
                .iter()
                .map(|w| w.max_position - w.min_position)
                .max()
                .unwrap_or(0)
        })
        .collect();
    ranges.sort_unstable();
    let mut returns: Vec<u64> = summaries
        .iter()
        .map(|s| {
            s.z.as_ref()
                .map(|z| z.returns_final_half.iter().min().copied().unwrap_or(0))
                .unwrap_or(0)
        })
        .collect();
    returns.sort_unstable();

    let annotations = bound_annotation.clone().unwrap_or_default();
    report.files.push(writer.write_csv_annotated(
        "z_report.csv",
        annotations.trim(),
        |w| {
            writeln!(
                w,
                "replicas,steps,recurrent_evidence,finite_range_evidence,undecided,anomalies,all_trapped,range_q10,range_q50,range_q90,returns_q10,returns_q50,returns_q90"
            )?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                summaries.len(),
                config.steps,
                recurrent,
                finite,
                undecided,
                anomalies,
                trapped,
                quantile_i64(&ranges, 0.1),
                quantile_i64(&ranges, 0.5),
                quantile_i64(&ranges, 0.9),
                quantile_u64(&returns, 0.1),
                quantile_u64(&returns, 0.5),
                quantile_u64(&returns, 0.9)
            )?;
            Ok(())
        },
    )?);

    report.note(format!(
        "simulate-z: {} replicas, verdicts recurrent {} / finite-range {} / undecided {} (anomalies {})",
        summaries.len(),
        recurrent,
        finite,
        undecided,
        anomalies
    ));
    if let Some(annotation) = bound_annotation {
        report.note(format!(
            "{annotation} all_trapped_frequency={:.4}",
            trapped as f64 / summaries.len() as f64
        ));
    }
    Ok(report)
}

fn verdict_name(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::RecurrentEvidence => "recurrent-evidence",
        Verdict::FiniteRangeEvidence => "finite-range-evidence",
        Verdict::Undecided => "undecided",
    }
}

fn count_verdicts(verdicts: &[crate::zline::ReplicaVerdict], which: Verdict) -> usize {
    verdicts.iter().filter(|v| v.verdict == which).count()
}

fn quantile_i64(sorted: &[i64], q: f64) -> i64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn quantile_u64(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn classify_mode(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let spec = config.sequence_spec()?;
    let outcome =
        classify_outcome(&spec, config.k_max, config.growth_test.into()).map_err(engine)?;
    let verdict = match outcome.classification {
        Classification::DivergesToInfinity => "diverges-to-infinity",
        Classification::Converges => "converges",
        Classification::Inconclusive => "inconclusive",
    };
    let bound = if outcome.classification == Classification::Converges {
        trapping_bound(
            config.walkers as u32,
            &spec,
            config.k_max,
            config.growth_test.into(),
        )
        .ok()
    } else {
        None
    };

    let mut annotations = format!("classification={verdict}");
    if let Some(bound) = &bound {
        annotations.push_str(&format!(" trapping_bound={:e}", bound.lower_bound));
    }
    let mut report = RunReport::default();
    report
        .files
        .push(writer.write_csv_annotated("phi.csv", &annotations, |w| {
            write_phi_csv(&spec, config.k_max, w).map_err(RunError::from)
        })?);
    report.note(format!(
        "classify `{}`: {} (partial sum at k={} is {:.6})",
        spec.label, verdict, config.k_max, outcome.partial_at_k_max
    ));
    if let Some(bound) = bound {
        report.note(format!(
            "trapping bound for {} walkers: {:e} (series upper bound {:.6})",
            config.walkers, bound.lower_bound, bound.series_upper_bound
        ));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// reproduce-figures
// ---------------------------------------------------------------------------

fn reproduce_figures(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let mut report = RunReport::default();
    let centers = Histogram49::centers();

    // one walker: simulated density against the arcsine-law density
    let single = sample_segment_fractions(config, 1, crate::model::Scheduler::UniformRandom, 0x01);
    let single_hist = histogram_49(&single).map_err(engine)?;
    report
        .files
        .push(writer.write_csv("figure_one_walker.csv", |w| {
            writeln!(w, "bin_center,simulated_density,reference_density")?;
            for (center, density) in centers.iter().zip(single_hist.densities()) {
                writeln!(w, "{},{},{}", center, density, beta_pdf(*center, 0.5, 0.5))?;
            }
            Ok(())
        })?);

    // alternating pair: simulation, exact law, fitted Beta density
    let alternating =
        sample_segment_fractions(config, 2, crate::model::Scheduler::Alternating, 0x02);
    let alternating_hist = histogram_49(&alternating).map_err(engine)?;
    let exact = exact_alt_distribution(config.exact_cycles);
    let exact_hist = histogram_49_exact(&exact);
    let (alt_alpha, alt_beta) = beta_fit_mom(&alternating).map_err(engine)?;
    report.files.push(writer.write_csv_annotated(
        "figure_alternating.csv",
        &format!("beta_fit=({alt_alpha:.6},{alt_beta:.6}) exact_cycles={}", config.exact_cycles),
        |w| {
            writeln!(
                w,
                "bin_center,simulated_density,exact_density,fitted_beta_density"
            )?;
            for ((center, simulated), exact_density) in centers
                .iter()
                .zip(alternating_hist.densities())
                .zip(&exact_hist.densities)
            {
                writeln!(
                    w,
                    "{},{},{},{}",
                    center,
                    simulated,
                    exact_density,
                    beta_pdf(*center, alt_alpha, alt_beta)
                )?;
            }
            Ok(())
        },
    )?);

    // random selection pair: simulation and fitted Beta density
    let random = sample_segment_fractions(config, 2, crate::model::Scheduler::UniformRandom, 0x03);
    let random_hist = histogram_49(&random).map_err(engine)?;
    let (rand_alpha, rand_beta) = beta_fit_mom(&random).map_err(engine)?;
    report.files.push(writer.write_csv_annotated(
        "figure_random_selection.csv",
        &format!("beta_fit=({rand_alpha:.6},{rand_beta:.6})"),
        |w| {
            writeln!(w, "bin_center,simulated_density,fitted_beta_density")?;
            for (center, simulated) in centers.iter().zip(random_hist.densities()) {
                writeln!(
                    w,
                    "{},{},{}",
                    center,
                    simulated,
                    beta_pdf(*center, rand_alpha, rand_beta)
                )?;
            }
            Ok(())
        },
    )?);

    report.note(format!(
        "reproduce-figures: {} replicas x {} steps per panel, exact horizon {} cycles",
        config.replicas, config.steps, config.exact_cycles
    ));
    report.note(format!(
        "beta fits: alternating ({alt_alpha:.4}, {alt_beta:.4}), random selection ({rand_alpha:.4}, {rand_beta:.4})"
    ));
    Ok(report)
}

/// Final left-edge fractions over all replicas for one segment experiment.
/// `stream` decorrelates the three figure panels.
fn sample_segment_fractions(
    config: &ExperimentConfig,
    walkers: usize,
    scheduler: crate::model::Scheduler,
    stream: u64,
) -> Vec<f64> {
    parallel_replicas(config.replicas, config.threads, |replica| {
        let seed = replica_seed(config.base_seed ^ (stream << 56), replica);
        let weights = WeightState::unit(crate::model::ReinforcementScheme::Linear);
        let mut system = WalkerSystem::new(
            Domain::Segment3,
            scheduler,
            weights,
            vec![0; walkers],
            seed,
        )
        .expect("segment system");
        for _ in 0..config.steps {
            system.step();
        }
        left_edge_fraction_f64(system.weights())
    })
}

// ---------------------------------------------------------------------------
// verify-identities
// ---------------------------------------------------------------------------

type IdentityResult = (String, Result<(), String>);

/// The exact identity suite behind `errw-lab verify-identities`. Every check
/// is an equality in rational arithmetic; tolerances do not appear.
pub fn verify_identities() -> Vec<IdentityResult> {
    let mut results = Vec::new();
    let mut check = |name: &str, outcome: Result<(), String>| {
        results.push((name.to_string(), outcome));
    };

    check("cycle-kernel martingale (a,b <= 60)", {
        (1..=60u64)
            .flat_map(|a| (1..=60u64).map(move |b| (a, b)))
            .try_for_each(|(a, b)| {
                let mean = conditional_mean_after_cycle(a, b).map_err(|e| e.to_string())?;
                let expected = BigRational::new(BigInt::from(a), BigInt::from(a + b));
                if mean == expected {
                    Ok(())
                } else {
                    Err(format!("mean at ({a},{b}) is {mean}, expected {expected}"))
                }
            })
    });

    check("second-moment defect closed form (a+b+2 <= 200)", {
        (4..=200u64)
            .step_by(4)
            .flat_map(|total| (1..total - 2).map(move |a| (a, total - 2 - a)))
            .try_for_each(|(a, b)| {
                let kernel = second_moment_delta(a, b).map_err(|e| e.to_string())?;
                let closed =
                    second_moment_delta_closed_form(a, b).map_err(|e| e.to_string())?;
                if kernel == closed {
                    Ok(())
                } else {
                    Err(format!("defect mismatch at ({a},{b})"))
                }
            })
    });

    check("meeting-time law 2^-l (l <= 30)", {
        (1..=30u64).try_for_each(|l| {
            let pmf = meeting_time_pmf(l).map_err(|e| e.to_string())?;
            let expected = BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l as u32));
            if pmf == expected {
                Ok(())
            } else {
                Err(format!("pmf({l}) = {pmf}"))
            }
        })
    });

    check("excursion recursion = closed form = enumeration", {
        [(1u64, 1u64), (2, 3), (5, 3), (2, 2)]
            .into_iter()
            .try_for_each(|(a, b)| {
                crate::paths::verify_closed_form(a, b, 12, 3)
                    .map(|_| ())
                    .map_err(|e| e.to_string())
            })
    });

    check("exact cycle law has mean 1/2 (n <= 16)", {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        (0..=16u64).try_for_each(|n| {
            let law = exact_alt_distribution(n);
            if law.mean() == half {
                Ok(())
            } else {
                Err(format!("mean at horizon {n} is {}", law.mean()))
            }
        })
    });

    check("label-exchange invariance at horizon 4", {
        label_exchange_invariance_check()
    });

    check("potential increments centered (spot states)", {
        increment_centering_check()
    });

    results
}

fn label_exchange_invariance_check() -> Result<(), String> {
    let segment = enumerate_joint_law(
        Domain::Segment3,
        WeightState::unit(crate::model::ReinforcementScheme::Linear),
        [0, 0],
        4,
    );
    if relabeled_joint_law(&segment) != segment {
        return Err("segment joint law changed under relabeling".into());
    }
    let line = enumerate_joint_law(
        Domain::IntegerLine,
        WeightState::unit(crate::model::ReinforcementScheme::Linear),
        [0, 0],
        4,
    );
    if relabeled_joint_law(&line) != line {
        return Err("line joint law changed under relabeling".into());
    }
    Ok(())
}

fn increment_centering_check() -> Result<(), String> {
    for trial in 0..24u64 {
        let walkers = 1 + (trial % 4) as usize;
        let weights = WeightState::unit(crate::model::ReinforcementScheme::Linear);
        let mut system = WalkerSystem::new(
            Domain::IntegerLine,
            crate::model::Scheduler::UniformRandom,
            weights,
            (0..walkers).map(|i| 1 + ((trial + i as u64) % 4) as i64).collect(),
            replica_seed(0xC0FFEE, trial),
        )
        .map_err(|e| e.to_string())?;
        for _ in 0..(trial % 20) {
            system.step();
        }
        let table = conditional_increment_table(&system, (trial % walkers as u64) as usize);
        let d_mean: BigRational = table.iter().map(|r| &r.probability * &r.d_increment).sum();
        let m_mean: BigRational = table.iter().map(|r| &r.probability * &r.m_increment).sum();
        if !d_mean.is_zero() {
            return Err(format!("trial {trial}: martingale increment mean {d_mean}"));
        }
        if m_mean.is_positive() {
            return Err(format!("trial {trial}: supermartingale increment mean {m_mean}"));
        }
    }
    Ok(())
}

fn verify_identities_mode(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let writer = ArtifactWriter::new(config)?;
    let results = verify_identities();
    let mut report = RunReport::default();
    report.files.push(writer.write_csv("identities.csv", |w| {
        writeln!(w, "identity,status,detail")?;
        for (name, outcome) in &results {
            match outcome {
                Ok(()) => writeln!(w, "{name},ok,")?,
                Err(detail) => writeln!(w, "{name},failed,{detail}")?,
            }
        }
        Ok(())
    })?);
    let mut failed = Vec::new();
    for (name, outcome) in &results {
        match outcome {
            Ok(()) => report.note(format!("identity {name}: ok")),
            Err(detail) => {
                report.note(format!("identity {name}: FAILED ({detail})"));
                failed.push(name.clone());
            }
        }
    }
    if failed.is_empty() {
        Ok(report)
    } else {
        // still report what we wrote, via the error message
        Err(RunError::Identity(failed.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// Exact distribution re-export used by tests and the CLI
// ---------------------------------------------------------------------------

/// Exact law selected by the config, for callers that want the distribution
/// rather than the files.
pub fn exact_law_for(config: &ExperimentConfig) -> RationalDistribution {
    match config.exact_law {
        ExactLaw::Alternating => exact_alt_distribution(config.exact_cycles),
        ExactLaw::SingleWalker => exact_single_distribution(config.exact_cycles),
    }
}

/// Convenience wrapper for re-running a config parsed back out of an
/// artifact header; used to check byte-identical replay.
pub fn rerun_into(
    header_config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunReport, RunError> {
    let mut config = header_config.clone();
    config.out_dir = out_dir.to_path_buf();
    run(&config)
}
