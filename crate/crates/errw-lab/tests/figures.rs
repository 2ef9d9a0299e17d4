//! The density-figure pipeline at desk scale, checked against the values the
//! corresponding plots are known to show: method-of-moments Beta fits near
//! (0.579, 0.579) for the alternating pair and (0.553, 0.554) for random
//! selection at horizon 4003, and the arcsine reference density at the edge
//! bins.

use errw_lab::harness::{run, ExperimentConfig, Mode};
use std::fs;
use std::path::Path;

fn fit_from_header(path: &Path) -> (f64, f64) {
    let text = fs::read_to_string(path).unwrap();
    let header = text.lines().next().unwrap();
    let start = header.find("beta_fit=(").expect("fit annotation") + "beta_fit=(".len();
    let end = header[start..].find(')').unwrap() + start;
    let mut parts = header[start..end].split(',');
    let alpha: f64 = parts.next().unwrap().parse().unwrap();
    let beta: f64 = parts.next().unwrap().parse().unwrap();
    (alpha, beta)
}

fn column(path: &Path, index: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2) // artifact header + column header
        .map(|line| line.split(',').nth(index).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn figure_pipeline_reproduces_known_fits_and_densities() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default_for(Mode::ReproduceFigures);
    config.base_seed = 424_242;
    config.out_dir = dir.path().to_path_buf();
    let report = run(&config).unwrap();
    assert_eq!(report.files.len(), 3);

    // single walker: simulated edge bins near the binned arcsine density,
    // reference column equal to the arcsine density at the bin centers
    let one_walker = dir.path().join("figure_one_walker.csv");
    let simulated = column(&one_walker, 1);
    let reference = column(&one_walker, 2);
    assert_eq!(simulated.len(), 49);
    assert!((reference[0] - 3.1673).abs() < 2e-3);
    assert!((reference[24] - 0.6366).abs() < 2e-3);
    assert!((simulated[0] - 4.48).abs() < 0.5);
    assert!((simulated[48] - 4.48).abs() < 0.5);

    // alternating pair: fit near (0.579, 0.579); the exact-law column at the
    // edge and center bins near the precise-calculation values
    let alternating = dir.path().join("figure_alternating.csv");
    let (alpha, beta) = fit_from_header(&alternating);
    assert!((alpha - 0.579).abs() < 0.03, "alternating alpha {alpha}");
    assert!((beta - 0.579).abs() < 0.03, "alternating beta {beta}");
    let exact = column(&alternating, 2);
    assert!((exact[0] - 3.83).abs() < 0.15, "exact edge density {}", exact[0]);
    assert!((exact[24] - 0.73).abs() < 0.03, "exact center density {}", exact[24]);

    // random selection: fit near (0.553, 0.554)
    let random = dir.path().join("figure_random_selection.csv");
    let (alpha, beta) = fit_from_header(&random);
    assert!((alpha - 0.553).abs() < 0.03, "random-selection alpha {alpha}");
    assert!((beta - 0.554).abs() < 0.03, "random-selection beta {beta}");
}
