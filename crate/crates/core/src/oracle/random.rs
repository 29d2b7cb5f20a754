//! Small random stores and instances for engine/oracle equivalence runs.
//!
//! Stores are deliberately awkward: timestamps collide, entities carry more
//! than one type, aggregation events mix tagged and untagged roles, and some
//! correlations and part-of edges are already derived.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{materialize, DerivedFact, Predicate};
use crate::model::{Attributes, ClassId, EntityRef, Role, Scalar, Store, StoreBuilder, Taxonomy, Timestamp};
use crate::patterns::AggFn;
use crate::patternspec::{AggregationConfig, Direction, PatternConfig, PatternKind, ResolvedInstance, Window};

const ENTITY_TYPES: &[&str] = &["Machine", "Tool", "Buffer", "Job", "Product", "ProductionLot", "Component", "Sensor"];
const EVENT_TYPES: &[&str] = &[
    "TrackIn", "TrackOut", "Alarm", "Repair", "Maintenance", "Observation", "SwitchState", "SwitchTool", "Split",
    "Merge", "Consume",
];
/// Classes that instances may name, including abstract ones.
const EVENT_PARAMS: &[&str] = &[
    "TrackIn", "TrackOut", "Alarm", "Observation", "SwitchState", "Split", "Merge", "Aggregate", "Event",
];
const ENTITY_PARAMS: &[&str] =
    &["Machine", "Tool", "Job", "Product", "ProductionLot", "Sensor", "Resource", "ProductionEntity", "Entity"];

/// A store with at most `max_events` events built from `seed`.
pub fn random_store(seed: u64, max_events: usize) -> Store {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taxonomy = Arc::new(Taxonomy::default());
    let mut b = StoreBuilder::new(taxonomy.clone());

    let n_entities = rng.random_range(1..=12);
    let ids: Vec<String> = (0..n_entities).map(|i| format!("x{i}")).collect();
    for id in &ids {
        let mut types = vec![class(&taxonomy, ENTITY_TYPES.choose(&mut rng).unwrap())];
        if rng.random_bool(0.2) {
            types.push(class(&taxonomy, ENTITY_TYPES.choose(&mut rng).unwrap()));
        }
        b.add_entity(id.clone(), types, Attributes::new());
    }
    // edges only point to higher indices, which keeps them acyclic
    for part in 0..n_entities {
        for whole in part + 1..n_entities {
            if rng.random_bool(0.15) {
                b.add_part_of(ids[part].clone(), ids[whole].clone());
            }
        }
    }

    let n_events = rng.random_range(0..=max_events);
    let horizon = rng.random_range(1..=50);
    for i in 0..n_events {
        let name = *EVENT_TYPES.choose(&mut rng).unwrap();
        let class = class(&taxonomy, name);
        let aggregation = matches!(name, "Split" | "Merge" | "Consume");
        let k = rng.random_range(0..=n_entities.min(4));
        let refs = rand::seq::index::sample(&mut rng, n_entities, k)
            .into_iter()
            .map(|x| {
                let role = if aggregation && rng.random_bool(0.8) {
                    Some(if rng.random_bool(0.5) { Role::Input } else { Role::Output })
                } else {
                    None
                };
                EntityRef { id: ids[x].clone(), role }
            })
            .collect();
        b.add_event(format!("e{i}"), class, Timestamp(rng.random_range(0..horizon)), refs, attributes(&mut rng));
    }
    let (store, _) = b.build(true).expect("random store is valid");

    // some derived structure, so useDerived = false has something to hide
    let mut facts = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        if store.events().is_empty() {
            break;
        }
        let e = &store.events()[rng.random_range(0..store.events().len())];
        let x = &ids[rng.random_range(0..n_entities)];
        facts.push(DerivedFact::relation("seed", "seed", e.id.as_str(), Predicate::CorrelatesTo, x.as_str()));
    }
    if n_entities > 1 && rng.random_bool(0.3) {
        let a = rng.random_range(1..n_entities);
        facts.push(DerivedFact::relation("seed", "seed", ids[a].as_str(), Predicate::IsPartOf, ids[0].as_str()));
    }
    materialize(&store, &facts).store
}

fn class(taxonomy: &Taxonomy, name: &str) -> ClassId {
    taxonomy.lookup(name).expect("default class")
}

fn attributes(rng: &mut ChaCha8Rng) -> Attributes {
    let mut attrs = Attributes::new();
    match rng.random_range(0..6) {
        0 => {}
        1 => {
            attrs.insert("value".into(), Scalar::Str("n/a".into()));
        }
        _ => {
            attrs.insert("value".into(), Scalar::Num(rng.random_range(0..20) as f64 / 2.0));
        }
    }
    if rng.random_bool(0.5) {
        let state = if rng.random_bool(0.5) { "Failed" } else { "Working" };
        attrs.insert("state".into(), Scalar::Str(state.into()));
    }
    attrs
}

/// A random, valid instance of `kind` against the default taxonomy.
pub fn random_instance(rng: &mut impl Rng, kind: PatternKind, name: &str) -> ResolvedInstance {
    let tax = Taxonomy::default();
    let ev = |rng: &mut dyn rand::RngCore| class(&tax, EVENT_PARAMS.choose(rng).unwrap());
    let en = |rng: &mut dyn rand::RngCore| class(&tax, ENTITY_PARAMS.choose(rng).unwrap());
    let match_on = |rng: &mut dyn rand::RngCore| -> Vec<ClassId> {
        let n = rng.random_range(0..=2);
        let mut v: Vec<ClassId> = (0..n).map(|_| class(&tax, ENTITY_PARAMS.choose(rng).unwrap())).collect();
        v.sort();
        v.dedup();
        v
    };
    let rng: &mut dyn rand::RngCore = rng;
    let config = match kind {
        PatternKind::IntervalCount => PatternConfig::IntervalCount {
            start: ev(rng),
            end: ev(rng),
            counted: ev(rng),
            pair_on_production_entity: rng.random_bool(0.5),
            counted_shares_production_entity: rng.random_bool(0.5),
        },
        PatternKind::IntervalAggregate => {
            let per_resource = rng.random_bool(0.25);
            let agg = match rng.random_range(0..9) {
                0 => AggFn::Sum,
                1 => AggFn::Avg,
                2 => AggFn::Min,
                3 => AggFn::Max,
                4 => AggFn::Count,
                5 => AggFn::Var,
                6 => AggFn::Stddev,
                7 => AggFn::CountAbove(rng.random_range(0..10) as f64),
                _ => AggFn::CountBelow(rng.random_range(0..10) as f64),
            };
            PatternConfig::IntervalAggregate {
                bounds: (!per_resource).then(|| (ev(rng), ev(rng))),
                event_type: ev(rng),
                attribute: "value".into(),
                agg,
                window: if per_resource { Window::AllPerResource } else { Window::Interval },
                pair_on_production_entity: rng.random_bool(0.5),
            }
        }
        PatternKind::ElapsedPreceding => {
            PatternConfig::ElapsedPreceding { event_type: ev(rng), preceding: ev(rng), match_on: match_on(rng) }
        }
        PatternKind::ElapsedSucceedingSameType => PatternConfig::ElapsedSucceedingSameType {
            event_type: ev(rng),
            filter: rng.random_bool(0.5).then(|| ("state".to_string(), Scalar::Str("Failed".into()))),
            match_on: match_on(rng),
        },
        PatternKind::ElapsedMaximum => {
            PatternConfig::ElapsedMaximum { start: ev(rng), end: ev(rng), entity_type: en(rng) }
        }
        PatternKind::RelatePreceding => PatternConfig::RelatePreceding {
            event_type: ev(rng),
            preceding: ev(rng),
            target: en(rng),
            match_on: match_on(rng),
        },
        PatternKind::RelatePartOf => PatternConfig::RelatePartOf {
            direction: if rng.random_bool(0.5) { Direction::WholeToPart } else { Direction::PartToWhole },
            event_entity: rng.random_bool(0.6).then(|| en(rng)),
            other_entity: rng.random_bool(0.6).then(|| en(rng)),
        },
        PatternKind::RelatePrecedingAggregation | PatternKind::RelateSucceedingAggregation => {
            let cfg = AggregationConfig {
                agg_type: class(&tax, ["Aggregate", "Split", "Merge", "Consume"].choose(rng).unwrap()),
                entity_type: en(rng),
                recursive: rng.random_bool(0.5),
            };
            if kind == PatternKind::RelatePrecedingAggregation {
                PatternConfig::RelatePrecedingAggregation(cfg)
            } else {
                PatternConfig::RelateSucceedingAggregation(cfg)
            }
        }
        PatternKind::DerivePartOf => {
            PatternConfig::DerivePartOf { start: ev(rng), end: ev(rng), part: en(rng), whole: en(rng) }
        }
    };
    ResolvedInstance { name: name.to_string(), config, stage: 0, use_derived: rng.random_bool(0.7), materialize: true }
}
