use super::{event_ids, PatternResult, TypedIndex};
use crate::ingest::DerivedFact;
use crate::model::{ClassId, EventIdx, Scalar, Store};

fn elapsed_fact(store: &Store, name: &str, pattern: &str, subject: EventIdx, a: EventIdx, b: EventIdx) -> DerivedFact {
    let (ea, eb) = (store.event(a), store.event(b));
    let value = eb.timestamp.since(ea.timestamp) as f64;
    DerivedFact::measurement(name, pattern, store.event(subject).id.as_str(), "elapsed", value, "ms")
        .with_inputs(event_ids(store, [a, b]))
}

pub(super) fn elapsed_preceding(
    store: &Store,
    name: &str,
    event_type: ClassId,
    preceding: ClassId,
    match_on: &[ClassId],
) -> PatternResult {
    let index = TypedIndex::new(store, preceding);
    let mut out = PatternResult::default();
    for e1 in store.event_indices().filter(|&e| store.event_is(e, event_type)) {
        if let Some(e2) = index.closest(store, e1, match_on, false) {
            out.counters.matches += 1;
            out.facts.push(elapsed_fact(store, name, "elapsed_preceding", e1, e2, e1));
        }
    }
    out
}

pub(super) fn elapsed_succeeding_same_type(
    store: &Store,
    name: &str,
    event_type: ClassId,
    filter: Option<&(String, Scalar)>,
    match_on: &[ClassId],
) -> PatternResult {
    let index = TypedIndex::new(store, event_type);
    let mut out = PatternResult::default();
    for &e1 in &index.all {
        if let Some((key, value)) = filter {
            if store.event(e1).attributes.get(key) != Some(value) {
                continue;
            }
        }
        if let Some(e2) = index.closest(store, e1, match_on, true) {
            out.counters.matches += 1;
            out.facts.push(elapsed_fact(store, name, "elapsed_succeeding_same_type", e1, e1, e2));
        }
    }
    out
}

pub(super) fn elapsed_maximum(
    store: &Store,
    name: &str,
    start: ClassId,
    end: ClassId,
    entity_type: ClassId,
) -> PatternResult {
    let mut out = PatternResult::default();
    for x in store.entity_indices().filter(|&x| store.entity_is(x, entity_type)) {
        let evs = store.events_of(x);
        // total order puts the earliest timestamp first and the latest last
        let first = evs.iter().copied().find(|&e| store.event_is(e, start));
        let last = evs.iter().rev().copied().find(|&e| store.event_is(e, end));
        let (Some(s), Some(e)) = (first, last) else {
            continue;
        };
        out.counters.matches += 1;
        let id = &store.entity(x).id;
        let value = store.event(e).timestamp.since(store.event(s).timestamp);
        if value < 0 {
            out.warnings.push(format!(
                "'{id}': last end '{}' precedes first start '{}'; no value emitted",
                store.event(e).id,
                store.event(s).id
            ));
            continue;
        }
        out.facts.push(
            DerivedFact::measurement(name, "elapsed_maximum", id.as_str(), "elapsed_max", value as f64, "ms")
                .with_inputs(event_ids(store, [s, e])),
        );
    }
    out
}
