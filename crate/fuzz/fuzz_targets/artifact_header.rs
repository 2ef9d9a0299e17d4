#![no_main]

use errw_lab::harness::parse_artifact_header;
use libfuzzer_sys::fuzz_target;

// Replay reads a header back out of emitted artifacts, so the header parser
// sees file contents it does not control. It must never panic, and any
// header it accepts must round-trip through both emitted forms.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let first_line = text.lines().next().unwrap_or("");
    if let Ok(header) = parse_artifact_header(first_line) {
        let from_csv =
            parse_artifact_header(&header.csv_line()).expect("emitted csv header re-parses");
        assert_eq!(from_csv.config_hash, header.config_hash);
        assert_eq!(from_csv.base_seed, header.base_seed);
        let from_jsonl =
            parse_artifact_header(&header.jsonl_line()).expect("emitted jsonl header re-parses");
        assert_eq!(from_jsonl.base_seed, header.base_seed);
    }
});
