//! Reading taxonomy and event-log files, writing derived facts, and folding
//! derived facts back into a store.

mod facts;
mod materialize;
mod records;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

pub use facts::{
    dedup_facts, facts_to_jsonl, parse_fact_line, read_facts, write_facts, DerivedFact, FactBody,
    FactIdentity, FactKind, IntervalRef, Provenance, Target,
};
pub use materialize::{contains_fact, materialize, materialize_into, Materialized};
pub use records::{
    parse_record_line, EntityRecord, EntityRefRecord, EventRecord, ParsedRecord, Predicate, Record,
    RecordError, RelationRecord, TimestampFormat,
};

use crate::model::{
    EntityRef, Store, StoreBuilder, StoreError, Taxonomy, TaxonomyError, AGGREGATE,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Taxonomy { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl IngestError {
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    #[serde(default)]
    subclass_of: BTreeMap<String, Vec<String>>,
}

/// Parses taxonomy JSON text; blank text yields the default taxonomy.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, String> {
    if text.trim().is_empty() {
        return Ok(Taxonomy::default());
    }
    let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Taxonomy::from_declarations(&file.subclass_of).map_err(|e: TaxonomyError| e.to_string())
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_taxonomy(&text).map_err(|message| IngestError::Taxonomy {
        path: path.to_path_buf(),
        message,
    })
}

pub fn taxonomy_to_json(taxonomy: &Taxonomy) -> String {
    let decl = taxonomy.declarations();
    serde_json::to_string_pretty(&serde_json::json!({ "subclass_of": decl })).unwrap() + "\n"
}

#[derive(Debug)]
pub struct Loaded {
    pub store: Store,
    pub warnings: Vec<String>,
}

/// Loads and merges every file into one store.
///
/// Malformed lines and duplicate ids are always errors. With `strict`,
/// unknown fields, unknown classes, dangling references and part-of cycles
/// are errors too; otherwise the offending record is skipped with a warning.
pub fn load_store(paths: &[PathBuf], taxonomy: Arc<Taxonomy>, strict: bool) -> Result<Loaded, IngestError> {
    let mut sources = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.clone(),
            source,
        })?;
        sources.push((path.clone(), text));
    }
    let borrowed: Vec<(PathBuf, &str)> = sources.iter().map(|(p, t)| (p.clone(), t.as_str())).collect();
    load_store_from_texts(&borrowed, taxonomy, strict)
}

/// [`load_store`] over in-memory texts; each text is labelled with a path
/// for diagnostics.
pub fn load_store_from_texts(
    sources: &[(PathBuf, &str)],
    taxonomy: Arc<Taxonomy>,
    strict: bool,
) -> Result<Loaded, IngestError> {
    let mut builder = StoreBuilder::new(taxonomy.clone());
    let mut warnings = Vec::new();
    let mut unknown: BTreeMap<(&'static str, String), usize> = BTreeMap::new();
    let mut formats = BTreeSet::new();
    let aggregate = taxonomy.builtin(AGGREGATE);

    for (path, text) in sources {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let parsed: Vec<(usize, Result<ParsedRecord, RecordError>)> = lines
            .par_iter()
            .map(|(i, l)| (i + 1, parse_record_line(l)))
            .collect();

        for (line, result) in parsed {
            let located = |message: String| IngestError::Record { path: path.clone(), line, message };
            let parsed = result.map_err(|e| located(e.0))?;
            let kind = match &parsed.record {
                Record::Entity(_) => "entity",
                Record::Event(_) => "event",
                Record::Relation(_) => "relation",
            };
            for field in parsed.unknown_fields {
                if strict {
                    return Err(located(format!("unknown field '{field}' on {kind} record")));
                }
                *unknown.entry((kind, field)).or_default() += 1;
            }
            // non-strict problems are skipped with a warning
            let mut reject = |message: String| -> Result<(), IngestError> {
                if strict {
                    Err(located(message))
                } else {
                    warnings.push(format!("{}:{line}: {message}; record skipped", path.display()));
                    Ok(())
                }
            };
            match parsed.record {
                Record::Entity(r) => {
                    let mut types = Vec::with_capacity(r.types.len());
                    let mut bad = None;
                    for t in &r.types {
                        match taxonomy.lookup(t) {
                            Some(c) if taxonomy.is_entity_class(c) => types.push(c),
                            Some(_) => bad = Some(format!("'{t}' is not an entity class")),
                            None => bad = Some(format!("unknown class '{t}'")),
                        }
                    }
                    match bad {
                        Some(msg) => reject(format!("entity '{}': {msg}", r.id))?,
                        None => builder.add_entity(r.id, types, r.attributes),
                    }
                }
                Record::Event(r) => {
                    let class = match taxonomy.lookup(&r.event_type) {
                        Some(c) if taxonomy.is_event_class(c) => c,
                        Some(_) => {
                            reject(format!("event '{}': '{}' is not an event class", r.id, r.event_type))?;
                            continue;
                        }
                        None => {
                            reject(format!("event '{}': unknown class '{}'", r.id, r.event_type))?;
                            continue;
                        }
                    };
                    formats.insert(r.timestamp_format as u8);
                    if taxonomy.is_subclass(class, aggregate) && r.entities.iter().all(|e| e.role.is_none()) {
                        warnings.push(format!(
                            "{}:{line}: aggregation event '{}' has no input/output roles",
                            path.display(),
                            r.id
                        ));
                    }
                    let refs = r
                        .entities
                        .into_iter()
                        .map(|e| EntityRef { id: e.id, role: e.role })
                        .collect();
                    builder.add_event(r.id, class, r.timestamp, refs, r.attributes);
                }
                Record::Relation(r) => match r.predicate {
                    Predicate::IsPartOf => builder.add_part_of(r.subject, r.object),
                    Predicate::CorrelatesTo => builder.add_correlation(r.subject, r.object),
                },
            }
        }
    }

    for ((kind, field), count) in unknown {
        warnings.push(format!("unknown field '{field}' on {count} {kind} record(s)"));
    }
    if formats.len() > 1 {
        warnings.push("dataset mixes ISO-8601 and integer timestamps".to_string());
    }
    let (store, build_warnings) = builder.build(strict)?;
    warnings.extend(build_warnings);
    Ok(Loaded { store, warnings })
}

/// Records that reproduce `store` when loaded again. Derived correlations
/// and part-of edges are written as if they were base data.
pub fn store_to_records(store: &Store) -> Vec<Record> {
    let tax = store.taxonomy();
    let mut out = Vec::with_capacity(store.entities().len() + store.events().len());
    for e in store.entities() {
        out.push(Record::Entity(EntityRecord {
            id: e.id.to_string(),
            types: e.types.iter().map(|c| tax.name(*c).to_string()).collect(),
            attributes: e.attributes.clone(),
        }));
    }
    for ev in store.events() {
        out.push(Record::Event(EventRecord {
            id: ev.id.to_string(),
            event_type: tax.name(ev.class).to_string(),
            timestamp: ev.timestamp,
            timestamp_format: TimestampFormat::Integer,
            entities: ev
                .correlations
                .iter()
                .map(|c| EntityRefRecord { id: store.entity(c.entity).id.to_string(), role: c.role })
                .collect(),
            attributes: ev.attributes.clone(),
        }));
    }
    for edge in store.part_of_edges() {
        out.push(Record::Relation(RelationRecord {
            subject: store.entity(edge.part).id.to_string(),
            predicate: Predicate::IsPartOf,
            object: store.entity(edge.whole).id.to_string(),
        }));
    }
    out
}

pub fn write_records<W: Write>(records: &[Record], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    for r in records {
        out.write_all(r.to_json_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, strict: bool) -> Result<Loaded, IngestError> {
        load_store_from_texts(
            &[(PathBuf::from("log.jsonl"), text)],
            Arc::new(Taxonomy::default()),
            strict,
        )
    }

    #[test]
    fn taxonomy_file_forms() {
        let t = parse_taxonomy(r#"{"subclass_of": {"Oven": ["Machine"]}}"#).unwrap();
        assert!(t.is_subclass_named("Oven", "Resource").unwrap());
        let err = parse_taxonomy(r#"{"subclass_of": {"A": ["B"], "B": ["A"]}}"#).unwrap_err();
        assert!(err.contains("cycle"), "{err}");
        assert_eq!(parse_taxonomy("").unwrap(), Taxonomy::default());
        assert_eq!(parse_taxonomy("{}").unwrap(), Taxonomy::default());
        assert!(parse_taxonomy(r#"{"subclass_of": {"Oven": ["Kiln"]}}"#).unwrap_err().contains("Kiln"));
        assert!(parse_taxonomy(r#"{"classes": []}"#).is_err());
    }

    #[test]
    fn taxonomy_json_round_trips() {
        let t = parse_taxonomy(r#"{"subclass_of": {"Oven": ["Machine"], "Tool": ["ProductionEntity"]}}"#).unwrap();
        assert_eq!(parse_taxonomy(&taxonomy_to_json(&t)).unwrap(), t);
    }

    #[test]
    fn minimal_log_loads_clean() {
        let text = r#"{"kind":"entity","id":"m1","types":["Machine"]}
{"kind":"event","id":"e1","type":"Alarm","timestamp":10,"entities":[{"id":"m1"}]}
"#;
        let loaded = load(text, true).unwrap();
        assert_eq!(loaded.store.events().len(), 1);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn dangling_reference_dropped_when_lenient() {
        let text = r#"{"kind":"entity","id":"m1","types":["Machine"]}
{"kind":"event","id":"e1","type":"Alarm","timestamp":10,"entities":[{"id":"mX"}]}"#;
        let loaded = load(text, false).unwrap();
        assert_eq!(loaded.store.events().len(), 0);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(matches!(load(text, true), Err(IngestError::Store(StoreError::DanglingCorrelation { .. }))));
    }

    #[test]
    fn duplicate_event_id_is_named() {
        let text = r#"{"kind":"event","id":"e1","type":"Alarm","timestamp":10}
{"kind":"event","id":"e1","type":"Alarm","timestamp":11}"#;
        let err = load(text, false).unwrap_err();
        assert!(err.to_string().contains("e1"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"kind\":\"entity\",\"id\":\"m1\",\"types\":[\"Machine\"]}\n\n{oops\n";
        match load(text, false).unwrap_err() {
            IngestError::Record { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_depend_on_strictness() {
        let text = r#"{"kind":"entity","id":"m1","types":["Machine"],"colour":"red"}"#;
        assert!(load(text, true).is_err());
        let loaded = load(text, false).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("colour"));
    }

    #[test]
    fn unknown_classes_depend_on_strictness() {
        let text = r#"{"kind":"entity","id":"m1","types":["Oven"]}
{"kind":"event","id":"e1","type":"Machine","timestamp":1}"#;
        assert!(load(text, true).is_err());
        let loaded = load(text, false).unwrap();
        assert_eq!(loaded.warnings.len(), 2);
        assert!(loaded.store.entities().is_empty());
    }

    #[test]
    fn aggregation_without_roles_warns() {
        let text = r#"{"kind":"entity","id":"L0","types":["ProductionLot"]}
{"kind":"event","id":"s","type":"Split","timestamp":1,"entities":[{"id":"L0"}]}"#;
        let loaded = load(text, true).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("roles"));
    }

    #[test]
    fn mixed_timestamp_formats_warn() {
        let text = r#"{"kind":"event","id":"a","type":"Alarm","timestamp":10}
{"kind":"event","id":"b","type":"Alarm","timestamp":"2024-01-01T00:00:00Z"}"#;
        let loaded = load(text, false).unwrap();
        assert!(loaded.warnings.iter().any(|w| w.contains("mixes")));
    }

    #[test]
    fn relations_become_edges() {
        let text = r#"{"kind":"entity","id":"p1","types":["Product"]}
{"kind":"entity","id":"L1","types":["ProductionLot"]}
{"kind":"event","id":"e","type":"Observation","timestamp":3}
{"kind":"relation","subject":"p1","predicate":"isPartOf","object":"L1"}
{"kind":"relation","subject":"e","predicate":"correlatesTo","object":"p1"}"#;
        let s = load(text, true).unwrap().store;
        let p1 = s.entity_idx("p1").unwrap();
        assert!(s.has_part_of(p1, s.entity_idx("L1").unwrap()));
        assert_eq!(s.events_of(p1).len(), 1);
    }

    #[test]
    fn written_records_reload_identically() {
        let text = r#"{"kind":"entity","id":"m1","types":["Machine"],"attributes":{"site":"A"}}
{"kind":"entity","id":"L1","types":["ProductionLot"]}
{"kind":"entity","id":"p1","types":["Product"]}
{"kind":"event","id":"e2","type":"Split","timestamp":"1970-01-01T00:00:00.020Z","entities":[{"id":"L1","role":"input"},{"id":"p1","role":"output"}]}
{"kind":"event","id":"e1","type":"Observation","timestamp":"1970-01-01T00:00:00.010Z","entities":[{"id":"m1"}],"attributes":{"value":10.5,"ok":true}}
{"kind":"relation","subject":"p1","predicate":"isPartOf","object":"L1"}"#;
        let first = load(text, true).unwrap().store;
        let mut buf = Vec::new();
        write_records(&store_to_records(&first), &mut buf).unwrap();
        let second = load(std::str::from_utf8(&buf).unwrap(), true).unwrap().store;
        assert_eq!(first.events(), second.events());
        assert_eq!(first.entities(), second.entities());
        assert_eq!(first.part_of_edges(), second.part_of_edges());
        assert_eq!(second.events()[0].timestamp.0, 10);
    }
}
