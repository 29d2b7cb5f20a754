use std::collections::{BTreeSet, HashSet};

use super::{event_ids, PatternResult, TypedIndex};
use crate::ingest::{DerivedFact, Predicate};
use crate::model::{ClassId, EntityIdx, EventIdx, Role, Store};
use crate::patternspec::{AggregationConfig, Direction};

fn correlation(store: &Store, name: &str, pattern: &str, e: EventIdx, x: EntityIdx) -> DerivedFact {
    DerivedFact::relation(
        name,
        pattern,
        store.event(e).id.as_str(),
        Predicate::CorrelatesTo,
        store.entity(x).id.as_str(),
    )
}

pub(super) fn relate_preceding(
    store: &Store,
    name: &str,
    event_type: ClassId,
    preceding: ClassId,
    target: ClassId,
    match_on: &[ClassId],
) -> PatternResult {
    let index = TypedIndex::new(store, preceding);
    let mut out = PatternResult::default();
    for e1 in store.event_indices().filter(|&e| store.event_is(e, event_type)) {
        let Some(e2) = index.closest(store, e1, match_on, false) else {
            continue;
        };
        out.counters.matches += 1;
        for x in store.correlated_entities(e2, target, None) {
            out.facts.push(
                correlation(store, name, "relate_preceding", e1, x).with_inputs(event_ids(store, [e1, e2])),
            );
        }
    }
    out
}

pub(super) fn relate_partof(
    store: &Store,
    name: &str,
    direction: Direction,
    event_entity: Option<ClassId>,
    other_entity: Option<ClassId>,
) -> PatternResult {
    let matches = |x: EntityIdx, filter: Option<ClassId>| filter.is_none_or(|c| store.entity_is(x, c));
    let mut out = PatternResult::default();
    for x in store.entity_indices() {
        if !matches(x, event_entity) {
            continue;
        }
        let others = match direction {
            Direction::WholeToPart => store.parts_of(x),
            Direction::PartToWhole => store.wholes_of(x),
        };
        let others: Vec<EntityIdx> = others.iter().copied().filter(|&y| matches(y, other_entity)).collect();
        if others.is_empty() {
            continue;
        }
        for &e in store.events_of(x) {
            for &y in &others {
                if store.event(e).correlates_to(y) {
                    continue;
                }
                out.counters.matches += 1;
                out.facts.push(correlation(store, name, "relate_partof", e, y).with_inputs(event_ids(store, [e])));
            }
        }
    }
    out
}

/// Shared body of the preceding/succeeding aggregation patterns.
///
/// `preceding == true` carries events before an aggregation event from its
/// inputs to its outputs; `false` carries events after it from its outputs
/// to its inputs. With `recursive`, facts found so far count as correlations
/// and the scan repeats until nothing new appears.
pub(super) fn relate_aggregation(store: &Store, name: &str, cfg: &AggregationConfig, preceding: bool) -> PatternResult {
    let pattern = if preceding { "relate_preceding_aggregation" } else { "relate_succeeding_aggregation" };
    let mut out = PatternResult::default();
    let mut aggs: Vec<(EventIdx, Vec<EntityIdx>, Vec<EntityIdx>)> = Vec::new();
    for a in store.event_indices().filter(|&a| store.event_is(a, cfg.agg_type)) {
        if store.event(a).correlations.iter().all(|c| c.role.is_none()) {
            out.warnings.push(format!(
                "aggregation event '{}' has no input/output roles; skipped",
                store.event(a).id
            ));
            continue;
        }
        let inputs = store.correlated_entities(a, cfg.entity_type, Some(Role::Input));
        let outputs = store.correlated_entities(a, cfg.entity_type, Some(Role::Output));
        let (from, to) = if preceding { (inputs, outputs) } else { (outputs, inputs) };
        if !from.is_empty() && !to.is_empty() {
            aggs.push((a, from, to));
        }
    }
    out.counters.matches = aggs.len();
    if !preceding {
        // later aggregation events feed earlier ones when walking forward in time
        aggs.reverse();
    }

    // events correlated to an entity through facts derived in this run
    let mut extra: Vec<BTreeSet<EventIdx>> = vec![BTreeSet::new(); if cfg.recursive { store.entities().len() } else { 0 }];
    let mut seen: HashSet<(EventIdx, EntityIdx, EventIdx)> = HashSet::new();
    loop {
        let mut changed = false;
        for (a, from, to) in &aggs {
            let a = *a;
            let on_side = |e: EventIdx| if preceding { e < a } else { e > a };
            let mut carried: BTreeSet<EventIdx> = BTreeSet::new();
            for &x in from {
                carried.extend(store.events_of(x).iter().copied().filter(|&e| on_side(e)));
                if cfg.recursive {
                    carried.extend(extra[x.index()].iter().copied().filter(|&e| on_side(e)));
                }
            }
            for &e in &carried {
                for &y in to {
                    if cfg.recursive {
                        if !seen.insert((e, y, a)) {
                            continue;
                        }
                        if !store.event(e).correlates_to(y) && extra[y.index()].insert(e) {
                            changed = true;
                        }
                    }
                    out.facts.push(correlation(store, name, pattern, e, y).with_inputs(event_ids(store, [e, a])));
                }
            }
        }
        if !changed {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{materialize, FactBody};
    use crate::testkit::Fx;

    fn class(s: &Store, name: &str) -> ClassId {
        s.taxonomy().lookup(name).unwrap()
    }

    fn pairs(r: &PatternResult) -> Vec<(String, String)> {
        r.facts
            .iter()
            .map(|f| match &f.body {
                FactBody::Relation { subject, object, .. } => (subject.to_string(), object.to_string()),
                FactBody::Measurement { .. } => panic!("measurement"),
            })
            .collect()
    }

    fn p(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    fn aggregation(s: &Store, recursive: bool, preceding: bool) -> PatternResult {
        let cfg = AggregationConfig {
            agg_type: class(s, "Aggregate"),
            entity_type: class(s, "ProductionEntity"),
            recursive,
        };
        relate_aggregation(s, "agg", &cfg, preceding).finish()
    }

    #[test]
    fn tool_of_preceding_switch() {
        let s = Fx::new()
            .entity("m1", "Machine")
            .entity("j1", "Job")
            .entity("tool7", "Tool")
            .entity("tool8", "Tool")
            .event("sw", "SwitchTool", 5, &["m1", "tool7"])
            .event("ti", "TrackIn", 6, &["m1", "j1"])
            .build();
        let r = relate_preceding(&s, "tool", class(&s, "TrackIn"), class(&s, "SwitchTool"), class(&s, "Tool"), &[class(&s, "Resource")]);
        assert_eq!(pairs(&r), [p("ti", "tool7")]);

        let two = Fx::new()
            .entity("m1", "Machine")
            .entity("tool7", "Tool")
            .entity("tool8", "Tool")
            .event("sw", "SwitchTool", 5, &["m1", "tool7", "tool8"])
            .event("ti", "TrackIn", 6, &["m1"])
            .build();
        let r = relate_preceding(&two, "tool", class(&two, "TrackIn"), class(&two, "SwitchTool"), class(&two, "Tool"), &[class(&two, "Resource")]);
        assert_eq!(pairs(&r.finish()), [p("ti", "tool7"), p("ti", "tool8")]);
    }

    #[test]
    fn lot_event_reaches_products() {
        let s = Fx::new()
            .entity("L", "ProductionLot")
            .entity("p1", "Product")
            .entity("p2", "Product")
            .event("e", "TrackIn", 1, &["L", "p2"])
            .part_of("p1", "L")
            .part_of("p2", "L")
            .build();
        let r = relate_partof(&s, "lot", Direction::WholeToPart, None, None).finish();
        assert_eq!(pairs(&r), [p("e", "p1")]);
    }

    #[test]
    fn observation_reaches_machine() {
        let s = Fx::new()
            .entity("m", "Machine")
            .entity("s", "Sensor")
            .event("obs", "Observation", 1, &["s"])
            .part_of("s", "m")
            .build();
        let r = relate_partof(&s, "sens", Direction::PartToWhole, Some(class(&s, "Sensor")), Some(class(&s, "Resource")));
        assert_eq!(pairs(&r), [p("obs", "m")]);
        let none = Fx::new().entity("s", "Sensor").event("obs", "Observation", 1, &["s"]).build();
        assert!(relate_partof(&none, "sens", Direction::PartToWhole, None, None).facts.is_empty());
    }

    fn split() -> Fx {
        Fx::new()
            .entity("L0", "ProductionLot")
            .entity("L1", "ProductionLot")
            .entity("L2", "ProductionLot")
            .event("e5", "TrackIn", 5, &["L0"])
            .event("a10", "Split", 10, &["L0:input", "L1:output", "L2:output"])
    }

    #[test]
    fn split_carries_history_forward() {
        let s = split().build();
        assert_eq!(pairs(&aggregation(&s, false, true)), [p("e5", "L1"), p("e5", "L2")]);
    }

    #[test]
    fn consume_carries_component_history() {
        let s = Fx::new()
            .entity("comp3", "Component")
            .entity("prod9", "Product")
            .entity("ws", "Workstation")
            .event("e7", "Observation", 7, &["comp3"])
            .event("c10", "Consume", 10, &["ws", "comp3:input", "prod9:output"])
            .build();
        assert_eq!(pairs(&aggregation(&s, false, true)), [p("e7", "prod9")]);
    }

    #[test]
    fn split_children_reach_parent() {
        let s = split().event("e12", "TrackIn", 12, &["L1"]).event("e13", "TrackIn", 13, &["L2"]).build();
        assert_eq!(pairs(&aggregation(&s, false, false)), [p("e12", "L0"), p("e13", "L0")]);
    }

    #[test]
    fn merged_lot_reaches_sources() {
        let s = Fx::new()
            .entity("La", "ProductionLot")
            .entity("Lb", "ProductionLot")
            .entity("Lm", "ProductionLot")
            .event("m10", "Merge", 10, &["La:input", "Lb:input", "Lm:output"])
            .event("e12", "TrackIn", 12, &["Lm"])
            .build();
        assert_eq!(pairs(&aggregation(&s, false, false)), [p("e12", "La"), p("e12", "Lb")]);
        let quiet = split().build();
        assert!(aggregation(&quiet, false, false).facts.is_empty());
    }

    #[test]
    fn missing_roles_warn() {
        let s = Fx::new()
            .entity("L0", "ProductionLot")
            .event("a", "Split", 10, &["L0"])
            .build();
        let r = aggregation(&s, false, true);
        assert_eq!(r.warnings.len(), 1);
    }

    fn chain() -> Store {
        Fx::new()
            .entity("L0", "ProductionLot")
            .entity("L1", "ProductionLot")
            .entity("L5", "ProductionLot")
            .entity("L9", "ProductionLot")
            .event("e1", "TrackIn", 1, &["L0"])
            .event("s10", "Split", 10, &["L0:input", "L1:output"])
            .event("m20", "Merge", 20, &["L1:input", "L5:input", "L9:output"])
            .build()
    }

    #[test]
    fn recursive_follows_chains() {
        let s = chain();
        let flat = pairs(&aggregation(&s, false, true));
        assert_eq!(flat, [p("e1", "L1"), p("s10", "L9")]);
        let deep = pairs(&aggregation(&s, true, true));
        assert_eq!(deep, [p("e1", "L1"), p("e1", "L9"), p("s10", "L9")]);
    }

    #[test]
    fn recursive_equals_iterated_materialization() {
        // the later aggregation feeds the earlier one, so a single ordered pass is not enough
        let s = Fx::new()
            .entity("L0", "ProductionLot")
            .entity("L1", "ProductionLot")
            .entity("L2", "ProductionLot")
            .event("e5", "TrackIn", 5, &["L0"])
            .event("a10", "Split", 10, &["L1:input", "L2:output"])
            .event("a20", "Split", 20, &["L0:input", "L1:output"])
            .build();
        for preceding in [true, false] {
            let deep = pairs(&aggregation(&s, true, preceding));
            let mut store = s.clone();
            let mut all = Vec::new();
            loop {
                let r = aggregation(&store, false, preceding);
                let m = materialize(&store, &r.facts);
                all.extend(pairs(&r));
                store = m.store;
                if m.added == 0 {
                    break;
                }
            }
            all.sort();
            all.dedup();
            assert_eq!(deep, all, "preceding={preceding}");
        }
        assert!(pairs(&aggregation(&s, true, true)).contains(&p("e5", "L2")));
    }
}
