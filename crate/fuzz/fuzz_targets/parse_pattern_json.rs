#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_enrich::patternspec::{parse_json, pipeline_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_json(text) {
        let _ = parse_json(&pipeline_to_json(&p)).expect("serialized pipelines parse");
    }
});
