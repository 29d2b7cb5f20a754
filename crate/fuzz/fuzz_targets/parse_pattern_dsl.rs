#![no_main]

use libfuzzer_sys::fuzz_target;
use trace_enrich::patternspec::{parse_dsl, print_pipeline};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_dsl(text) {
        Ok(p) => {
            let printed = print_pipeline(&p);
            let again = parse_dsl(&printed).expect("printed pipelines parse");
            assert_eq!(print_pipeline(&again), printed);
        }
        Err(e) => assert!(e.line >= 1 && e.column >= 1),
    }
});
