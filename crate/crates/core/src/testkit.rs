//! Small builder for hand-written fixture stores in unit tests.

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::ingest::load_store_from_texts;
use crate::model::{Store, Taxonomy};

#[derive(Default)]
pub(crate) struct Fx {
    lines: Vec<String>,
}

impl Fx {
    pub fn new() -> Fx {
        Fx::default()
    }

    pub fn entity(mut self, id: &str, class: &str) -> Fx {
        self.lines.push(json!({"kind": "entity", "id": id, "types": [class]}).to_string());
        self
    }

    /// `entities` entries are `id`, `id:input` or `id:output`.
    pub fn event(self, id: &str, class: &str, t: i64, entities: &[&str]) -> Fx {
        self.event_with(id, class, t, entities, json!({}))
    }

    pub fn event_with(mut self, id: &str, class: &str, t: i64, entities: &[&str], attributes: Value) -> Fx {
        let refs: Vec<Value> = entities
            .iter()
            .map(|e| match e.split_once(':') {
                Some((id, role)) => json!({"id": id, "role": role}),
                None => json!({"id": e}),
            })
            .collect();
        self.lines.push(
            json!({"kind": "event", "id": id, "type": class, "timestamp": t, "entities": refs, "attributes": attributes})
                .to_string(),
        );
        self
    }

    pub fn part_of(mut self, part: &str, whole: &str) -> Fx {
        self.lines
            .push(json!({"kind": "relation", "subject": part, "predicate": "isPartOf", "object": whole}).to_string());
        self
    }

    pub fn build(self) -> Store {
        let text = self.lines.join("\n");
        let loaded = load_store_from_texts(&[(PathBuf::from("fixture"), &text)], Arc::new(Taxonomy::default()), true)
            .expect("fixture loads");
        loaded.store
    }
}
