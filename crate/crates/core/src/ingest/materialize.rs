use super::facts::{DerivedFact, FactBody};
use super::records::Predicate;
use crate::model::{Scalar, Store, StoreError};

#[derive(Debug)]
pub struct Materialized {
    pub store: Store,
    pub warnings: Vec<String>,
    /// Facts that changed the store.
    pub added: usize,
}

/// Folds facts into a copy of `store`.
///
/// Relations become derived correlations or derived part-of edges. A
/// measurement becomes the attribute `<instance>.<key>` on its subject event
/// or entity. Nothing is ever removed: a part-of fact that would close a
/// cycle and a measurement that conflicts with an existing attribute value
/// are rejected with a warning.
pub fn materialize(store: &Store, facts: &[DerivedFact]) -> Materialized {
    materialize_into(store.clone(), facts)
}

/// [`materialize`] without the copy.
pub fn materialize_into<'a>(mut next: Store, facts: impl IntoIterator<Item = &'a DerivedFact>) -> Materialized {
    let mut warnings = Vec::new();
    let mut added = 0;
    for fact in facts {
        match apply(&mut next, fact) {
            Ok(true) => added += 1,
            Ok(false) => {}
            Err(msg) => warnings.push(format!("{}: {msg}; fact rejected", fact.instance)),
        }
    }
    next.rebuild_index();
    Materialized { store: next, warnings, added }
}

fn apply(store: &mut Store, fact: &DerivedFact) -> Result<bool, String> {
    match &fact.body {
        FactBody::Relation { subject, predicate: Predicate::CorrelatesTo, object } => {
            let ev = store.event_idx(subject).ok_or_else(|| format!("unknown event '{subject}'"))?;
            let en = store.entity_idx(object).ok_or_else(|| format!("unknown entity '{object}'"))?;
            Ok(store.insert_correlation(ev, en, true))
        }
        FactBody::Relation { subject, predicate: Predicate::IsPartOf, object } => {
            let part = store.entity_idx(subject).ok_or_else(|| format!("unknown entity '{subject}'"))?;
            let whole = store.entity_idx(object).ok_or_else(|| format!("unknown entity '{object}'"))?;
            store.insert_part_of(part, whole, true).map_err(|e: StoreError| e.to_string())
        }
        FactBody::Measurement { subject, key, value, .. } => {
            let name = format!("{}.{}", fact.instance, key);
            let attrs = if let Some(ev) = store.event_idx(subject) {
                &mut store.event_mut(ev).attributes
            } else if let Some(en) = store.entity_idx(subject) {
                &mut store.entity_mut(en).attributes
            } else {
                return Err(format!("unknown subject '{subject}'"));
            };
            match attrs.get(&name) {
                Some(Scalar::Num(v)) if v == value => Ok(false),
                Some(existing) => Err(format!(
                    "'{subject}' already has {name} = {existing}, not {value}"
                )),
                None => {
                    attrs.insert(name.into(), Scalar::Num(*value));
                    Ok(true)
                }
            }
        }
    }
}

/// True when materializing `fact` into `store` would change nothing.
pub fn contains_fact(store: &Store, fact: &DerivedFact) -> bool {
    match &fact.body {
        FactBody::Relation { subject, predicate: Predicate::CorrelatesTo, object } => {
            match (store.event_idx(subject), store.entity_idx(object)) {
                (Some(ev), Some(en)) => store.event(ev).correlates_to(en),
                _ => false,
            }
        }
        FactBody::Relation { subject, predicate: Predicate::IsPartOf, object } => {
            match (store.entity_idx(subject), store.entity_idx(object)) {
                (Some(p), Some(w)) => store.has_part_of(p, w),
                _ => false,
            }
        }
        FactBody::Measurement { subject, key, value, .. } => {
            let name = format!("{}.{}", fact.instance, key);
            let attrs = if let Some(ev) = store.event_idx(subject) {
                &store.event(ev).attributes
            } else if let Some(en) = store.entity_idx(subject) {
                &store.entity(en).attributes
            } else {
                return false;
            };
            matches!(attrs.get(&name), Some(Scalar::Num(v)) if v == value)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;
    use std::sync::Arc;

    use super::*;
    use crate::ingest::load_store_from_texts;
    use crate::model::Taxonomy;

    fn store() -> Store {
        let text = r#"{"kind":"entity","id":"m1","types":["Machine"]}
{"kind":"entity","id":"p12","types":["Product"]}
{"kind":"entity","id":"L1","types":["ProductionLot"]}
{"kind":"event","id":"e4","type":"TrackIn","timestamp":4,"entities":[{"id":"m1"}]}
{"kind":"event","id":"e7","type":"SwitchState","timestamp":7,"entities":[{"id":"m1"}]}
{"kind":"relation","subject":"p12","predicate":"isPartOf","object":"L1"}"#;
        load_store_from_texts(&[(PathBuf::from("t"), text)], Arc::new(Taxonomy::default()), true)
            .unwrap()
            .store
    }

    #[test]
    fn correlation_fact_becomes_edge() {
        let s = store();
        let f = DerivedFact::relation("x", "relate_preceding", "e4", Predicate::CorrelatesTo, "p12");
        assert!(!contains_fact(&s, &f));
        let m = materialize(&s, &[f.clone()]);
        assert_eq!(m.added, 1);
        assert_eq!(m.store.correlated_entity_ids("e4", "Product", None).unwrap(), ["p12"]);
        assert!(contains_fact(&m.store, &f));
        // the input store is a separate value
        assert!(s.correlated_entity_ids("e4", "Product", None).unwrap().is_empty());
        let p12 = m.store.entity_idx("p12").unwrap();
        assert_eq!(m.store.events_of(p12).len(), 1);
        assert!(m.store.event(m.store.event_idx("e4").unwrap()).correlations.iter().any(|c| c.derived));
    }

    #[test]
    fn event_measurement_becomes_prefixed_attribute() {
        let s = store();
        let f = DerivedFact::measurement("dt", "elapsed_succeeding_same_type", "e7", "downtime", 4.0, "ms");
        let m = materialize(&s, &[f]);
        let e7 = m.store.event(m.store.event_idx("e7").unwrap());
        assert_eq!(e7.attributes.get("dt.downtime"), Some(&Scalar::Num(4.0)));
    }

    #[test]
    fn conflicting_measurement_is_rejected() {
        let s = store();
        let a = DerivedFact::measurement("dt", "p", "e7", "elapsed", 4.0, "ms");
        let b = DerivedFact::measurement("dt", "p", "e7", "elapsed", 5.0, "ms");
        let m = materialize(&s, &[a, b]);
        assert_eq!(m.added, 1);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn cyclic_part_of_is_rejected() {
        let s = store();
        let f = DerivedFact::relation("x", "derive_partof", "L1", Predicate::IsPartOf, "p12");
        let m = materialize(&s, &[f]);
        assert_eq!(m.added, 0);
        assert_eq!(m.warnings.len(), 1);
        assert!(m.warnings[0].contains("cycle"));
    }

    #[test]
    fn materialization_only_adds() {
        let s = store();
        let facts = vec![
            DerivedFact::relation("x", "p", "e7", Predicate::CorrelatesTo, "L1"),
            DerivedFact::relation("x", "p", "e7", Predicate::CorrelatesTo, "m1"),
            DerivedFact::measurement("y", "p", "L1", "elapsed_max", 3.0, "ms"),
        ];
        let m = materialize(&s, &facts);
        assert_eq!(m.added, 2);
        for (a, b) in s.events().iter().zip(m.store.events()) {
            for c in &a.correlations {
                assert!(b.correlations.contains(c));
            }
            for (k, v) in a.attributes.iter() {
                assert_eq!(b.attributes.get(k), Some(v));
            }
        }
        assert!(s.part_of_edges().iter().all(|e| m.store.part_of_edges().contains(e)));
    }
}
