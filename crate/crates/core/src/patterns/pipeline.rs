use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{run_instance, Counters, PatternResult};
use crate::ingest::{contains_fact, dedup_facts, materialize_into, DerivedFact};
use crate::model::Store;
use crate::patternspec::{PatternKind, ResolvedInstance, ResolvedPipeline};

#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub name: String,
    pub pattern: PatternKind,
    pub stage: u32,
    /// Distinct facts emitted.
    pub facts: usize,
    /// Facts not already present in the store the stage ran against.
    pub novel: usize,
    pub warnings: usize,
    pub counters: Counters,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct PipelineOutput {
    /// Union over all instances, deduplicated and sorted.
    pub facts: Vec<DerivedFact>,
    /// Input store with every stage's facts materialized.
    pub store: Store,
    /// Engine warnings (prefixed with the instance name) and materialization
    /// warnings, in stage and instance order.
    pub warnings: Vec<String>,
    pub reports: Vec<InstanceReport>,
}

impl PipelineOutput {
    /// Facts that were not yet present in the store they were derived from.
    pub fn novel(&self) -> usize {
        self.reports.iter().map(|r| r.novel).sum()
    }
}

/// Runs the stages in ascending order. Instances of one stage all see the
/// same store; their facts are then deduplicated and materialized before the
/// next stage. `jobs` bounds how many instances of a stage run at once; the
/// output does not depend on it. The store is consumed because stages
/// materialize into it in place.
pub fn run_pipeline(store: Store, pipeline: &ResolvedPipeline, jobs: usize) -> PipelineOutput {
    let pool = (jobs > 1).then(|| {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool")
    });
    let mut current = store;
    let mut all_facts = Vec::new();
    let mut warnings = Vec::new();
    let mut reports = Vec::new();

    for stage in &pipeline.stages {
        let snapshot = &current;
        let run = |inst: &ResolvedInstance| -> (PatternResult, Duration, usize) {
            let started = Instant::now();
            let result = run_instance(snapshot, inst);
            let novel = result.facts.iter().filter(|f| !contains_fact(snapshot, f)).count();
            (result, started.elapsed(), novel)
        };
        let results: Vec<(PatternResult, Duration, usize)> = match &pool {
            Some(pool) => pool.install(|| stage.par_iter().map(run).collect()),
            None => stage.iter().map(run).collect(),
        };

        let first_chunk = all_facts.len();
        let mut materialized_names = Vec::new();
        for (inst, (result, elapsed, novel)) in stage.iter().zip(results) {
            log::info!(
                "{}: {} facts ({} new) in {:.1?}",
                inst.name,
                result.facts.len(),
                novel,
                elapsed
            );
            reports.push(InstanceReport {
                name: inst.name.clone(),
                pattern: inst.kind(),
                stage: inst.stage,
                facts: result.facts.len(),
                novel,
                warnings: result.warnings.len(),
                counters: result.counters,
                elapsed,
            });
            warnings.extend(result.warnings.into_iter().map(|w| format!("{}: {w}", inst.name)));
            if inst.materialize {
                materialized_names.push(inst.name.as_str());
            }
            all_facts.push(result.facts);
        }
        let started = Instant::now();
        // folded in instance-name order, which is the order of their identities
        let mut chunks: Vec<&Vec<DerivedFact>> = all_facts[first_chunk..]
            .iter()
            .filter(|c| c.first().is_some_and(|f| materialized_names.contains(&f.instance.as_str())))
            .collect();
        chunks.sort_by_key(|c| &c[0].instance);
        let m = materialize_into(current, chunks.into_iter().flatten());
        log::debug!("stage materialized: {} facts changed the store in {:.1?}", m.added, started.elapsed());
        warnings.extend(m.warnings);
        current = m.store;
    }

    let started = Instant::now();
    // each chunk is one instance's sorted facts and identities start with the
    // instance name, so ordering the chunks by name usually leaves nothing to sort
    all_facts.sort_by(|a, b| a.first().map(|f| &f.instance).cmp(&b.first().map(|f| &f.instance)));
    let mut flat = Vec::with_capacity(all_facts.iter().map(Vec::len).sum());
    for chunk in all_facts {
        flat.extend(chunk);
    }
    let facts = dedup_facts(flat);
    log::debug!("{} facts deduplicated in {:.1?}", facts.len(), started.elapsed());
    PipelineOutput { facts, store: current, warnings, reports }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::ingest::{facts_to_jsonl, FactBody};
    use crate::model::Taxonomy;
    use crate::patternspec::{parse_pattern_file, resolve_pipeline};
    use crate::testkit::Fx;

    fn resolve(text: &str) -> ResolvedPipeline {
        resolve_pipeline(&parse_pattern_file(text).unwrap(), &Taxonomy::default()).unwrap()
    }

    fn downtime_store() -> Store {
        let mut fx = Fx::new().entity("m1", "Machine").entity("m2", "Machine");
        for (id, m, t, state) in [
            ("a", "m1", 10, "Failed"),
            ("b", "m1", 14, "Working"),
            ("c", "m1", 20, "Failed"),
            ("d", "m1", 30, "Working"),
            ("e", "m2", 5, "Failed"),
            ("f", "m2", 6, "Working"),
        ] {
            fx = fx.event_with(id, "SwitchState", t, &[m], json!({ "state": state }));
        }
        fx.build()
    }

    const DOWNTIME: &str = r#"
        pattern elapsed_succeeding_same_type as dt { eventType = SwitchState filterAttribute = state filterValue = Failed }
        pattern interval_aggregate as avgdt { eventType = SwitchState attribute = "dt.elapsed" agg = avg window = "all-per-resource" stage = 1 }
    "#;

    #[test]
    fn average_downtime_composition() {
        let out = run_pipeline(downtime_store(), &resolve(DOWNTIME), 1);
        let avg: Vec<(String, f64)> = out
            .facts
            .iter()
            .filter(|f| f.instance == "avgdt")
            .map(|f| match &f.body {
                FactBody::Measurement { subject, value, .. } => (subject.to_string(), *value),
                FactBody::Relation { .. } => unreachable!(),
            })
            .collect();
        assert_eq!(avg, [("m1".to_string(), 7.0), ("m2".to_string(), 1.0)]);
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    }

    #[test]
    fn empty_pipeline_changes_nothing() {
        let s = downtime_store();
        let out = run_pipeline(s.clone(), &ResolvedPipeline::default(), 4);
        assert!(out.facts.is_empty());
        assert_eq!(out.store.events(), s.events());
    }

    #[test]
    fn rerun_adds_nothing_new() {
        let p = resolve(DOWNTIME);
        let first = run_pipeline(downtime_store(), &p, 1);
        assert!(first.novel() > 0);
        let second = run_pipeline(first.store.clone(), &p, 1);
        assert_eq!(second.novel(), 0);
        assert_eq!(facts_to_jsonl(&first.facts), facts_to_jsonl(&second.facts));
    }

    #[test]
    fn job_count_does_not_change_output() {
        let p = resolve(DOWNTIME);
        let a = run_pipeline(downtime_store(), &p, 1);
        let b = run_pipeline(downtime_store(), &p, 4);
        assert_eq!(facts_to_jsonl(&a.facts), facts_to_jsonl(&b.facts));
    }

    #[test]
    fn instances_of_one_stage_share_a_snapshot() {
        // `b` would see `a`'s correlation only if it ran after materialization
        let s = Fx::new()
            .entity("L", "ProductionLot")
            .entity("p", "Product")
            .entity("q", "Product")
            .event("e", "TrackIn", 1, &["L"])
            .part_of("p", "L")
            .part_of("q", "p")
            .build();
        let text = "pattern relate_partof as a { direction = whole_to_part }\npattern relate_partof as b { direction = whole_to_part }";
        let out = run_pipeline(s.clone(), &resolve(text), 1);
        let objects = |out: &PipelineOutput| -> Vec<String> {
            out.facts
                .iter()
                .filter(|f| f.instance == "b")
                .map(|f| match &f.body {
                    FactBody::Relation { object, .. } => object.to_string(),
                    FactBody::Measurement { .. } => unreachable!(),
                })
                .collect()
        };
        assert_eq!(objects(&out), ["p"]);
        let staged = "pattern relate_partof as a { direction = whole_to_part }\npattern relate_partof as b { direction = whole_to_part stage = 1 }";
        let out = run_pipeline(s.clone(), &resolve(staged), 1);
        // `p` is already correlated by then; the derived edge leads on to `q`
        assert_eq!(objects(&out), ["q"]);
    }
}
