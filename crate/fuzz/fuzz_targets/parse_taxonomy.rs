#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_enrich::ingest::{parse_taxonomy, taxonomy_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_taxonomy(text) {
        let json = taxonomy_to_json(&t);
        parse_taxonomy(&json).expect("serialized taxonomies parse");
    }
});
