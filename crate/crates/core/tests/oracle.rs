use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trace_enrich::ingest::{load_store_from_texts, write_records};
use trace_enrich::model::Taxonomy;
use trace_enrich::oracle::random::{random_instance, random_store};
use trace_enrich::oracle::{diff, generate_dataset, oracle_eval, GeneratorConfig, DEFAULT_PATTERNS};
use trace_enrich::patterns::{run_instance, run_pipeline};
use trace_enrich::patternspec::{parse_pattern_file, resolve_pipeline, PatternKind};

fn jsonl(cfg: &GeneratorConfig) -> String {
    let mut out = Vec::new();
    write_records(&generate_dataset(cfg).unwrap(), &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn engines_match_oracle_on_random_stores() {
    let mut fired = std::collections::BTreeMap::new();
    for seed in 0..150u64 {
        let store = random_store(seed, 120);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for kind in PatternKind::ALL {
            let inst = random_instance(&mut rng, kind, "i");
            let engine = run_instance(&store, &inst);
            let oracle = oracle_eval(&inst, &store);
            if let Some(d) = diff(&engine.facts, &oracle.facts) {
                panic!("seed {seed}, {inst:?}\n{d}");
            }
            *fired.entry(kind).or_insert(0usize) += engine.facts.len();
        }
    }
    // the comparison is only meaningful if every pattern produces facts
    assert_eq!(fired.len(), 10);
    assert!(fired.values().all(|&n| n >= 20), "{fired:?}");
}

#[test]
fn generated_log_loads_strictly_without_warnings() {
    let text = jsonl(&GeneratorConfig::default());
    let loaded = load_store_from_texts(&[(PathBuf::from("gen.jsonl"), &text)], Arc::new(Taxonomy::default()), true)
        .unwrap();
    assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
    assert!(loaded.store.events().len() > 100);
}

#[test]
fn every_default_instance_fires_on_generated_log() {
    let text = jsonl(&GeneratorConfig::default());
    let tax = Arc::new(Taxonomy::default());
    let store = load_store_from_texts(&[(PathBuf::from("gen.jsonl"), &text)], tax.clone(), true).unwrap().store;
    let pipeline = resolve_pipeline(&parse_pattern_file(DEFAULT_PATTERNS).unwrap(), &tax).unwrap();
    let out = run_pipeline(store, &pipeline, 2);
    for r in &out.reports {
        assert!(r.facts > 0, "{} produced no facts", r.name);
    }
    let kinds: std::collections::BTreeSet<_> = out.reports.iter().map(|r| r.pattern).collect();
    assert_eq!(kinds.len(), 10);
}

#[test]
fn engine_matches_oracle_on_generated_log() {
    let cfg = GeneratorConfig { lots: 4, ..GeneratorConfig::default() };
    let text = jsonl(&cfg);
    let tax = Arc::new(Taxonomy::default());
    let store = load_store_from_texts(&[(PathBuf::from("gen.jsonl"), &text)], tax.clone(), true).unwrap().store;
    let pipeline = resolve_pipeline(&parse_pattern_file(DEFAULT_PATTERNS).unwrap(), &tax).unwrap();
    for inst in pipeline.instances() {
        let engine = run_instance(&store, inst);
        let oracle = oracle_eval(inst, &store);
        assert_eq!(diff(&engine.facts, &oracle.facts), None, "{}", inst.name);
    }
}
