//! One-object-per-line event log records.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Attributes, Role, Scalar, Timestamp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct RecordError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, RecordError> {
    Err(RecordError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Predicate {
    #[serde(rename = "correlatesTo")]
    CorrelatesTo,
    #[serde(rename = "isPartOf")]
    IsPartOf,
}

impl Predicate {
    pub fn parse(text: &str) -> Option<Predicate> {
        match text {
            "correlatesTo" => Some(Predicate::CorrelatesTo),
            "isPartOf" => Some(Predicate::IsPartOf),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::CorrelatesTo => "correlatesTo",
            Predicate::IsPartOf => "isPartOf",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntityRecord {
    pub id: String,
    pub types: Vec<String>,
    #[serde(skip_serializing_if = "Attributes::is_empty")]
    pub attributes: Attributes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EntityRefRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimestampFormat {
    Integer,
    Iso,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub event_type: String,
    pub timestamp: Timestamp,
    #[serde(skip)]
    pub timestamp_format: TimestampFormat,
    pub entities: Vec<EntityRefRecord>,
    #[serde(skip_serializing_if = "Attributes::is_empty")]
    pub attributes: Attributes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationRecord {
    pub subject: String,
    pub predicate: Predicate,
    pub object: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Entity(EntityRecord),
    Event(EventRecord),
    Relation(RelationRecord),
}

impl Record {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// A record plus any fields the schema does not know about.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRecord {
    pub record: Record,
    pub unknown_fields: Vec<String>,
}

/// Parses one JSONL line. Blank lines are the caller's business.
pub fn parse_record_line(line: &str) -> Result<ParsedRecord, RecordError> {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return err(format!("malformed JSON: {e}")),
    };
    let Value::Object(mut obj) = value else {
        return err("record must be a JSON object");
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return err("field 'kind' must be a string"),
        None => return err("missing field 'kind'"),
    };
    let record = match kind.as_str() {
        "entity" => Record::Entity(EntityRecord {
            id: take_id(&mut obj, "id")?,
            types: take_types(&mut obj)?,
            attributes: take_attributes(&mut obj)?,
        }),
        "event" => {
            let id = take_id(&mut obj, "id")?;
            let event_type = take_id(&mut obj, "type")?;
            let (timestamp, timestamp_format) = take_timestamp(&mut obj)?;
            Record::Event(EventRecord {
                id,
                event_type,
                timestamp,
                timestamp_format,
                entities: take_entity_refs(&mut obj)?,
                attributes: take_attributes(&mut obj)?,
            })
        }
        "relation" => {
            let subject = take_id(&mut obj, "subject")?;
            let predicate = take_id(&mut obj, "predicate")?;
            let Some(predicate) = Predicate::parse(&predicate) else {
                return err(format!("unknown predicate '{predicate}'"));
            };
            let object = take_id(&mut obj, "object")?;
            Record::Relation(RelationRecord { subject, predicate, object })
        }
        other => return err(format!("unknown record kind '{other}'")),
    };
    let unknown_fields = obj.keys().cloned().collect();
    Ok(ParsedRecord { record, unknown_fields })
}

fn take_id(obj: &mut Map<String, Value>, field: &str) -> Result<String, RecordError> {
    match obj.remove(field) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s),
        Some(Value::String(_)) => err(format!("field '{field}' must not be empty")),
        Some(_) => err(format!("field '{field}' must be a string")),
        None => err(format!("missing field '{field}'")),
    }
}

fn take_types(obj: &mut Map<String, Value>) -> Result<Vec<String>, RecordError> {
    let Some(Value::Array(items)) = obj.remove("types") else {
        return err("field 'types' must be a non-empty array of strings");
    };
    if items.is_empty() {
        return err("field 'types' must be a non-empty array of strings");
    }
    items
        .into_iter()
        .map(|v| match v {
            Value::String(s) if !s.is_empty() => Ok(s),
            _ => err("field 'types' must be a non-empty array of strings"),
        })
        .collect()
}

fn take_timestamp(obj: &mut Map<String, Value>) -> Result<(Timestamp, TimestampFormat), RecordError> {
    match obj.remove("timestamp") {
        Some(Value::Number(n)) => match n.as_i64() {
            Some(ms) => Ok((Timestamp(ms), TimestampFormat::Integer)),
            None => err(format!("timestamp {n} is not an integer")),
        },
        Some(Value::String(s)) => match Timestamp::parse_iso(&s) {
            Some(t) => Ok((t, TimestampFormat::Iso)),
            None => err(format!("timestamp '{s}' is not ISO-8601")),
        },
        Some(_) => err("timestamp must be an integer or an ISO-8601 string"),
        None => err("missing field 'timestamp'"),
    }
}

fn take_entity_refs(obj: &mut Map<String, Value>) -> Result<Vec<EntityRefRecord>, RecordError> {
    let items = match obj.remove("entities") {
        None => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => return err("field 'entities' must be an array"),
    };
    items
        .into_iter()
        .map(|item| {
            let Value::Object(mut r) = item else {
                return err("entity reference must be an object");
            };
            let id = take_id(&mut r, "id")?;
            let role = match r.remove("role") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => match Role::parse(&s) {
                    Some(role) => Some(role),
                    None => return err(format!("unknown role '{s}'")),
                },
                Some(_) => return err("role must be a string"),
            };
            if let Some(extra) = r.keys().next() {
                return err(format!("unknown field '{extra}' in entity reference"));
            }
            Ok(EntityRefRecord { id, role })
        })
        .collect()
}

fn take_attributes(obj: &mut Map<String, Value>) -> Result<Attributes, RecordError> {
    let map = match obj.remove("attributes") {
        None => return Ok(Attributes::new()),
        Some(Value::Object(m)) => m,
        Some(_) => return err("field 'attributes' must be an object"),
    };
    let mut out = Attributes::new();
    for (k, v) in map {
        match Scalar::from_json(&v) {
            Some(s) => {
                out.insert(k.into(), s);
            }
            None => return err(format!("attribute '{k}' must be a string, number or boolean")),
        }
    }
    Ok(out)
}
