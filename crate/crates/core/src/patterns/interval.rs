use super::{event_ids, AggFn, Counters, PatternResult};
use crate::ingest::{DerivedFact, Predicate};
use crate::model::{build_intervals, ClassId, EntityIdx, EventIdx, Interval, Store, RESOURCE};

const COUNT: &str = "interval_count";
const AGGREGATE: &str = "interval_aggregate";
const DERIVE: &str = "derive_partof";

/// Events of the interval's resource lying inside it, in total order.
fn inside<'a>(store: &'a Store, iv: &Interval) -> &'a [EventIdx] {
    let evs = store.events_of(iv.resource);
    let lo = evs.partition_point(|&e| e < iv.start);
    let hi = evs.partition_point(|&e| e <= iv.end);
    &evs[lo..hi]
}

fn interval_fact(store: &Store, fact: DerivedFact, iv: &Interval, members: &[EventIdx]) -> DerivedFact {
    let (s, e) = (&store.event(iv.start).id, &store.event(iv.end).id);
    fact.with_inputs(event_ids(store, members.iter().copied().chain([iv.start, iv.end])))
        .with_interval(s.as_str(), e.as_str())
}

pub(super) fn interval_count(
    store: &Store,
    name: &str,
    start: ClassId,
    end: ClassId,
    counted: ClassId,
    pair_on_production_entity: bool,
    counted_shares_production_entity: bool,
) -> PatternResult {
    let set = build_intervals(store, start, end, pair_on_production_entity);
    let mut out = PatternResult {
        facts: Vec::with_capacity(set.intervals.len()),
        warnings: set.warnings,
        counters: Counters { intervals: set.intervals.len(), unmatched: set.unmatched, ..Counters::default() },
        ..PatternResult::default()
    };
    for iv in &set.intervals {
        let members: Vec<EventIdx> = inside(store, iv)
            .iter()
            .copied()
            .filter(|&c| store.event_is(c, counted))
            .filter(|&c| {
                !counted_shares_production_entity
                    || iv.production_entity.is_none_or(|p| store.event(c).correlates_to(p))
            })
            .collect();
        out.counters.matches += members.len();
        let end_id = &store.event(iv.end).id;
        let fact = DerivedFact::measurement(name, COUNT, end_id.as_str(), "count", members.len() as f64, "count");
        out.facts.push(interval_fact(store, fact, iv, &members));
    }
    out
}

/// Values of `attribute` over `events`, skipping non-numeric ones.
fn numeric_values(store: &Store, events: &[EventIdx], attribute: &str, counters: &mut Counters) -> Vec<f64> {
    let mut values = Vec::with_capacity(events.len());
    for &e in events {
        match store.event(e).attributes.get(attribute) {
            Some(v) => match v.as_f64() {
                Some(x) => values.push(x),
                None => counters.skipped_non_numeric += 1,
            },
            None => {}
        }
    }
    values
}

pub(super) fn interval_aggregate(
    store: &Store,
    name: &str,
    (start, end): (ClassId, ClassId),
    event_type: ClassId,
    attribute: &str,
    agg: AggFn,
    pair_on_production_entity: bool,
) -> PatternResult {
    let set = build_intervals(store, start, end, pair_on_production_entity);
    let mut out = PatternResult {
        facts: Vec::with_capacity(set.intervals.len()),
        warnings: set.warnings,
        counters: Counters { intervals: set.intervals.len(), unmatched: set.unmatched, ..Counters::default() },
        ..PatternResult::default()
    };
    for iv in &set.intervals {
        let members: Vec<EventIdx> =
            inside(store, iv).iter().copied().filter(|&c| store.event_is(c, event_type)).collect();
        let values = numeric_values(store, &members, attribute, &mut out.counters);
        out.counters.matches += members.len();
        if let Some(value) = agg.apply(&values, members.len()) {
            let end_id = &store.event(iv.end).id;
            let fact = DerivedFact::measurement(name, AGGREGATE, end_id.as_str(), agg.name(), value, agg.unit());
            out.facts.push(interval_fact(store, fact, iv, &members));
        }
    }
    out
}

/// Aggregates over all events of `event_type` per resource, ignoring intervals.
pub(super) fn aggregate_per_resource(
    store: &Store,
    name: &str,
    event_type: ClassId,
    attribute: &str,
    agg: AggFn,
) -> PatternResult {
    let resource = store.taxonomy().builtin(RESOURCE);
    let mut out = PatternResult::default();
    for r in store.entity_indices() {
        if !store.entity_is(r, resource) {
            continue;
        }
        let members: Vec<EventIdx> =
            store.events_of(r).iter().copied().filter(|&c| store.event_is(c, event_type)).collect();
        let values = numeric_values(store, &members, attribute, &mut out.counters);
        out.counters.matches += members.len();
        if let Some(value) = agg.apply(&values, members.len()) {
            let fact = DerivedFact::measurement(name, AGGREGATE, store.entity(r).id.as_str(), agg.name(), value, agg.unit())
                .with_inputs(event_ids(store, members));
            out.facts.push(fact);
        }
    }
    out
}

pub(super) fn derive_partof(
    store: &Store,
    name: &str,
    start: ClassId,
    end: ClassId,
    part: ClassId,
    whole: ClassId,
) -> PatternResult {
    let set = build_intervals(store, start, end, true);
    let mut out = PatternResult {
        warnings: set.warnings,
        counters: Counters { intervals: set.intervals.len(), unmatched: set.unmatched, ..Counters::default() },
        ..PatternResult::default()
    };
    for iv in &set.intervals {
        let Some(w) = iv.production_entity.filter(|&w| store.entity_is(w, whole)) else {
            continue;
        };
        for &c in inside(store, iv) {
            let parts: Vec<EntityIdx> = store
                .correlated_entities(c, part, None)
                .into_iter()
                .filter(|&p| p != w)
                .collect();
            if !parts.is_empty() {
                out.counters.matches += 1;
            }
            for p in parts {
                let fact = DerivedFact::relation(
                    name,
                    DERIVE,
                    store.entity(p).id.as_str(),
                    Predicate::IsPartOf,
                    store.entity(w).id.as_str(),
                );
                out.facts.push(interval_fact(store, fact, iv, &[c]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::ingest::FactBody;
    use crate::testkit::Fx;

    fn class(s: &Store, name: &str) -> ClassId {
        s.taxonomy().lookup(name).unwrap()
    }

    fn values(r: &PatternResult) -> Vec<(String, f64)> {
        r.facts
            .iter()
            .map(|f| match &f.body {
                FactBody::Measurement { subject, value, .. } => (subject.to_string(), *value),
                FactBody::Relation { .. } => panic!("relation"),
            })
            .collect()
    }

    fn relations(r: &PatternResult) -> Vec<(String, String)> {
        r.facts
            .iter()
            .map(|f| match &f.body {
                FactBody::Relation { subject, object, .. } => (subject.to_string(), object.to_string()),
                FactBody::Measurement { .. } => panic!("measurement"),
            })
            .collect()
    }

    fn alarms(extra: impl FnOnce(Fx) -> Fx) -> Store {
        let fx = Fx::new()
            .entity("m1", "Machine")
            .entity("j1", "Job")
            .event("e10", "TrackIn", 10, &["m1", "j1"])
            .event("e14", "TrackOut", 14, &["m1", "j1"]);
        extra(fx).build()
    }

    fn count(s: &Store) -> PatternResult {
        interval_count(s, "alarms", class(s, "TrackIn"), class(s, "TrackOut"), class(s, "Alarm"), true, false)
    }

    #[test]
    fn two_alarms_in_interval() {
        let s = alarms(|f| f.event("a11", "Alarm", 11, &["m1"]).event("a12", "Alarm", 12, &["m1"]));
        let r = count(&s);
        assert_eq!(values(&r), [("e14".to_string(), 2.0)]);
        let p = &r.facts[0].provenance;
        assert_eq!(p.pattern, "interval_count");
        assert_eq!(p.inputs, ["a11", "a12", "e10", "e14"]);
        assert_eq!(p.interval.as_ref().unwrap().start, "e10");
    }

    #[test]
    fn empty_interval_counts_zero() {
        let s = alarms(|f| f);
        assert_eq!(values(&count(&s)), [("e14".to_string(), 0.0)]);
    }

    #[test]
    fn boundary_tie_after_end_is_excluded() {
        // same timestamp as the end, but its id sorts after "e14"
        let s = alarms(|f| f.event("z14", "Alarm", 14, &["m1"]).event("a14", "Alarm", 14, &["m1"]));
        assert_eq!(values(&count(&s)), [("e14".to_string(), 1.0)]);
    }

    #[test]
    fn counted_must_share_production_entity_when_asked() {
        let s = alarms(|f| f.entity("j2", "Job").event("a11", "Alarm", 11, &["m1", "j1"]).event("a12", "Alarm", 12, &["m1", "j2"]));
        let r = interval_count(&s, "a", class(&s, "TrackIn"), class(&s, "TrackOut"), class(&s, "Alarm"), true, true);
        assert_eq!(values(&r), [("e14".to_string(), 1.0)]);
    }

    fn observations() -> Store {
        alarms(|f| {
            f.entity("s1", "Sensor")
                .event_with("o11", "Observation", 11, &["m1", "s1"], json!({"value": 10}))
                .event_with("o12", "Observation", 12, &["m1", "s1"], json!({"value": 12}))
                .event_with("o13", "Observation", 13, &["m1", "s1"], json!({"value": "n/a"}))
        })
    }

    fn aggregate(s: &Store, agg: AggFn) -> PatternResult {
        let bounds = (class(s, "TrackIn"), class(s, "TrackOut"));
        interval_aggregate(s, "obs", bounds, class(s, "Observation"), "value", agg, true)
    }

    #[test]
    fn average_of_observations() {
        let s = observations();
        let r = aggregate(&s, AggFn::Avg);
        assert_eq!(values(&r), [("e14".to_string(), 11.0)]);
        assert_eq!(r.counters.skipped_non_numeric, 1);
        assert_eq!(r.counters.intervals, 1);
    }

    #[test]
    fn threshold_count() {
        let s = observations();
        assert_eq!(values(&aggregate(&s, AggFn::CountAbove(11.0))), [("e14".to_string(), 1.0)]);
    }

    #[test]
    fn empty_aggregation_window() {
        let s = alarms(|f| f);
        assert!(aggregate(&s, AggFn::Avg).facts.is_empty());
        assert_eq!(values(&aggregate(&s, AggFn::Count)), [("e14".to_string(), 0.0)]);
    }

    #[test]
    fn count_aggregate_matches_interval_count() {
        let s = observations();
        let a = values(&aggregate(&s, AggFn::Count));
        let c = values(&interval_count(&s, "c", class(&s, "TrackIn"), class(&s, "TrackOut"), class(&s, "Observation"), true, false));
        assert_eq!(a, c);
    }

    #[test]
    fn per_resource_window_uses_resource_subject() {
        let s = observations();
        let r = aggregate_per_resource(&s, "obs", class(&s, "Observation"), "value", AggFn::Max);
        assert_eq!(values(&r), [("m1".to_string(), 12.0)]);
    }

    #[test]
    fn product_inside_lot_interval() {
        let s = Fx::new()
            .entity("ws1", "Workstation")
            .entity("L", "ProductionLot")
            .entity("p1", "Product")
            .entity("p2", "Product")
            .event("t1", "TrackIn", 1, &["ws1", "L"])
            .event("o5", "Observation", 5, &["ws1", "p1"])
            .event("t9", "TrackOut", 9, &["ws1", "L"])
            .event("o12", "Observation", 12, &["ws1", "p2"])
            .build();
        let r = derive_partof(&s, "lot", class(&s, "TrackIn"), class(&s, "TrackOut"), class(&s, "Product"), class(&s, "ProductionEntity"));
        assert_eq!(relations(&r), [("p1".to_string(), "L".to_string())]);
    }

    #[test]
    fn consumed_component_is_part_of_product() {
        let s = Fx::new()
            .entity("ws1", "Workstation")
            .entity("prod1", "Product")
            .entity("comp2", "Component")
            .event("t1", "TrackIn", 1, &["ws1", "prod1"])
            .event("c5", "Consume", 5, &["ws1", "comp2:input", "prod1:output"])
            .event("t9", "TrackOut", 9, &["ws1", "prod1"])
            .build();
        let r = derive_partof(&s, "bom", class(&s, "TrackIn"), class(&s, "TrackOut"), class(&s, "Component"), class(&s, "ProductionEntity"));
        assert_eq!(relations(&r), [("comp2".to_string(), "prod1".to_string())]);
    }
}
