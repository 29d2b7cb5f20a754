//! The pattern engines and the pipeline runner.
//!
//! Engines are pure functions over a frozen [`Store`]. Every fact they emit
//! carries the instance name and the pattern name as provenance.

mod agg;
mod elapsed;
mod interval;
mod pipeline;
mod relate;

use serde::Serialize;

pub use agg::AggFn;
pub use pipeline::{run_pipeline, InstanceReport, PipelineOutput};

use crate::ingest::{dedup_facts, DerivedFact};
use crate::model::{ClassId, EntityIdx, EventIdx, Store};
use crate::patternspec::{PatternConfig, ResolvedInstance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Counters {
    /// Intervals built (interval patterns only).
    pub intervals: usize,
    /// Pattern matches that produced at least one fact candidate.
    pub matches: usize,
    /// Attribute values ignored because they were not numbers.
    pub skipped_non_numeric: usize,
    /// Interval starts or ends left unpaired.
    pub unmatched: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PatternResult {
    /// Deduplicated and sorted by fact identity.
    pub facts: Vec<DerivedFact>,
    pub warnings: Vec<String>,
    pub counters: Counters,
}

impl PatternResult {
    fn finish(mut self) -> PatternResult {
        self.facts = dedup_facts(self.facts);
        self
    }
}

/// Runs one configured pattern against `store` under the instance name `name`.
pub fn evaluate(store: &Store, name: &str, config: &PatternConfig) -> PatternResult {
    let result = match config {
        PatternConfig::IntervalCount {
            start,
            end,
            counted,
            pair_on_production_entity,
            counted_shares_production_entity,
        } => interval::interval_count(
            store,
            name,
            *start,
            *end,
            *counted,
            *pair_on_production_entity,
            *counted_shares_production_entity,
        ),
        PatternConfig::IntervalAggregate { bounds, event_type, attribute, agg, window: _, pair_on_production_entity } => {
            match bounds {
                Some((start, end)) => interval::interval_aggregate(
                    store,
                    name,
                    (*start, *end),
                    *event_type,
                    attribute,
                    *agg,
                    *pair_on_production_entity,
                ),
                None => interval::aggregate_per_resource(store, name, *event_type, attribute, *agg),
            }
        }
        PatternConfig::ElapsedPreceding { event_type, preceding, match_on } => {
            elapsed::elapsed_preceding(store, name, *event_type, *preceding, match_on)
        }
        PatternConfig::ElapsedSucceedingSameType { event_type, filter, match_on } => {
            elapsed::elapsed_succeeding_same_type(store, name, *event_type, filter.as_ref(), match_on)
        }
        PatternConfig::ElapsedMaximum { start, end, entity_type } => {
            elapsed::elapsed_maximum(store, name, *start, *end, *entity_type)
        }
        PatternConfig::RelatePreceding { event_type, preceding, target, match_on } => {
            relate::relate_preceding(store, name, *event_type, *preceding, *target, match_on)
        }
        PatternConfig::RelatePartOf { direction, event_entity, other_entity } => {
            relate::relate_partof(store, name, *direction, *event_entity, *other_entity)
        }
        PatternConfig::RelatePrecedingAggregation(cfg) => relate::relate_aggregation(store, name, cfg, true),
        PatternConfig::RelateSucceedingAggregation(cfg) => relate::relate_aggregation(store, name, cfg, false),
        PatternConfig::DerivePartOf { start, end, part, whole } => {
            interval::derive_partof(store, name, *start, *end, *part, *whole)
        }
    };
    result.finish()
}

/// Runs a resolved instance, hiding derived correlations and part-of edges
/// from the engine when the instance has `useDerived = false`.
pub fn run_instance(store: &Store, instance: &ResolvedInstance) -> PatternResult {
    if instance.use_derived || !store.has_derived() {
        evaluate(store, &instance.name, &instance.config)
    } else {
        evaluate(&store.without_derived(), &instance.name, &instance.config)
    }
}

fn event_ids<'a>(store: &'a Store, events: impl IntoIterator<Item = EventIdx>) -> Vec<&'a str> {
    events.into_iter().map(|e| store.event(e).id.as_str()).collect()
}

/// True when `a` and `b` share at least one correlated entity of every class
/// in `match_on`.
fn shares_all(store: &Store, a: EventIdx, b: EventIdx, match_on: &[ClassId]) -> bool {
    let (ea, eb) = (store.event(a), store.event(b));
    match_on.iter().all(|&class| {
        ea.correlations
            .iter()
            .any(|c| eb.correlates_to(c.entity) && store.entity_is(c.entity, class))
    })
}

/// Per-entity lists of the events whose class is subsumed by `class`, in
/// total order, plus the global list of such events.
struct TypedIndex {
    by_entity: Vec<Vec<EventIdx>>,
    all: Vec<EventIdx>,
}

impl TypedIndex {
    fn new(store: &Store, class: ClassId) -> TypedIndex {
        let mut by_entity = vec![Vec::new(); store.entities().len()];
        let mut all = Vec::new();
        for ev in store.event_indices() {
            if !store.event_is(ev, class) {
                continue;
            }
            all.push(ev);
            let mut last = None;
            for c in &store.event(ev).correlations {
                if last != Some(c.entity) {
                    by_entity[c.entity.index()].push(ev);
                    last = Some(c.entity);
                }
            }
        }
        TypedIndex { by_entity, all }
    }

    /// Closest event strictly before (`forward == false`) or strictly after
    /// `anchor` that shares every `match_on` class with it.
    fn closest(&self, store: &Store, anchor: EventIdx, match_on: &[ClassId], forward: bool) -> Option<EventIdx> {
        let scan = |list: &[EventIdx]| -> Option<EventIdx> {
            if forward {
                let pos = list.partition_point(|&e| e <= anchor);
                list[pos..].iter().copied().find(|&e| shares_all(store, anchor, e, match_on))
            } else {
                let pos = list.partition_point(|&e| e < anchor);
                list[..pos].iter().rev().copied().find(|&e| shares_all(store, anchor, e, match_on))
            }
        };
        if match_on.is_empty() {
            return scan(&self.all);
        }
        // the match shares an entity of every class, so it lies in the list of
        // one of the anchor's entities of that class; scan the class whose
        // lists are shortest
        let mut best: Option<(usize, Vec<EntityIdx>)> = None;
        for &class in match_on {
            let xs = store.correlated_entities(anchor, class, None);
            let total: usize = xs.iter().map(|x| self.by_entity[x.index()].len()).sum();
            if best.as_ref().is_none_or(|(t, _)| total < *t) {
                best = Some((total, xs));
            }
        }
        let (_, xs) = best?;
        let candidates = xs.into_iter().filter_map(|x| scan(&self.by_entity[x.index()]));
        if forward {
            candidates.min()
        } else {
            candidates.max()
        }
    }
}
