#![no_main]

use errw_lab::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

// The experiment config is the one piece of untrusted input the CLI takes.
// Parsing and validation must never panic, and the canonical form must be a
// fixed point: parse -> serialize -> parse -> serialize is stable.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        let _ = config.validate();
        let _ = config.hash();
        let canonical = config.canonical_json();
        let reparsed =
            ExperimentConfig::from_json(&canonical).expect("canonical config must re-parse");
        assert_eq!(canonical, reparsed.canonical_json());
    }
});
