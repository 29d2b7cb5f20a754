#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_enrich::ingest::parse_fact_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(f) = parse_fact_line(line) {
        let back = parse_fact_line(&f.to_json_line()).expect("rendered facts parse");
        assert_eq!(back.to_json_line(), f.to_json_line());
    }
});
