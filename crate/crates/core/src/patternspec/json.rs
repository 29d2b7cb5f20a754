use std::collections::{BTreeMap, HashSet};

use serde_json::{json, Map, Value};

use super::parse::type_accepts;
use super::print::is_bare_ident;
use super::{DslError, DslErrorKind, ParamValue, PatternInstance, PatternKind, Pipeline};

fn fail<T>(kind: DslErrorKind) -> Result<T, DslError> {
    Err(DslError { kind, line: 0, column: 0 })
}

fn syntax<T>(msg: impl Into<String>) -> Result<T, DslError> {
    fail(DslErrorKind::Syntax(msg.into()))
}

fn to_param(value: &Value) -> Option<ParamValue> {
    Some(match value {
        Value::String(s) => ParamValue::Str(s.clone()),
        Value::Number(n) => ParamValue::Num(n.as_f64().filter(|v| v.is_finite())?),
        Value::Bool(b) => ParamValue::Bool(*b),
        Value::Array(items) => ParamValue::List(items.iter().map(to_param).collect::<Option<_>>()?),
        Value::Null | Value::Object(_) => return None,
    })
}

fn from_param(value: &ParamValue) -> Value {
    match value {
        ParamValue::Ident(s) | ParamValue::Str(s) => Value::String(s.clone()),
        ParamValue::Num(v) => json!(v),
        ParamValue::Bool(b) => Value::Bool(*b),
        ParamValue::List(items) => Value::Array(items.iter().map(from_param).collect()),
    }
}

/// Parses the JSON form `{"instances":[{"pattern":..,"name":..,"params":{..}}]}`.
/// Strings become [`ParamValue::Str`]; the resolver treats them like identifiers.
pub fn parse_json(text: &str) -> Result<Pipeline, DslError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DslError {
        kind: DslErrorKind::Syntax(format!("invalid JSON: {e}")),
        line: e.line(),
        column: e.column(),
    })?;
    let Some(obj) = root.as_object() else {
        return syntax("pattern JSON must be an object");
    };
    if let Some(extra) = obj.keys().find(|k| *k != "instances") {
        return syntax(format!("unexpected top-level field '{extra}'"));
    }
    let Some(list) = obj.get("instances").and_then(Value::as_array) else {
        return syntax("field 'instances' must be an array");
    };
    let mut names = HashSet::new();
    let mut instances = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let Some(item) = item.as_object() else {
            return syntax(format!("instance #{i} must be an object"));
        };
        if let Some(extra) = item.keys().find(|k| !matches!(k.as_str(), "pattern" | "name" | "params")) {
            return syntax(format!("instance #{i}: unexpected field '{extra}'"));
        }
        let Some(pattern_name) = item.get("pattern").and_then(Value::as_str) else {
            return syntax(format!("instance #{i}: 'pattern' must be a string"));
        };
        let Some(pattern) = PatternKind::parse(pattern_name) else {
            return fail(DslErrorKind::UnknownPattern(pattern_name.to_string()));
        };
        let Some(name) = item.get("name").and_then(Value::as_str) else {
            return syntax(format!("instance #{i}: 'name' must be a string"));
        };
        if !is_bare_ident(name) {
            return syntax(format!("instance #{i}: name '{name}' is not an identifier"));
        }
        if !names.insert(name.to_string()) {
            return fail(DslErrorKind::DuplicateInstance(name.to_string()));
        }
        let empty = Map::new();
        let raw = match item.get("params") {
            None => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return syntax(format!("instance '{name}': 'params' must be an object")),
        };
        let mut params = BTreeMap::new();
        let mut stage = 0;
        for (key, raw_value) in raw {
            let Some(spec) = pattern.param(key) else {
                return fail(DslErrorKind::UnknownParam { pattern, key: key.clone() });
            };
            let value = to_param(raw_value);
            if key == "stage" {
                match value {
                    Some(ParamValue::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                        stage = v as u32
                    }
                    _ => {
                        return fail(DslErrorKind::BadValue {
                            key: key.clone(),
                            expected: "a non-negative integer",
                        })
                    }
                }
                continue;
            }
            match value {
                Some(v) if type_accepts(spec.ty, &v) => {
                    params.insert(key.clone(), v);
                }
                _ => return fail(DslErrorKind::BadValue { key: key.clone(), expected: spec.ty.describe() }),
            }
        }
        instances.push(PatternInstance { pattern, name: name.to_string(), params, stage });
    }
    Ok(Pipeline::from_instances(instances))
}

/// Serializes a pipeline in the JSON form, pretty-printed.
pub fn pipeline_to_json(pipeline: &Pipeline) -> String {
    let instances: Vec<Value> = pipeline
        .instances()
        .map(|inst| {
            let mut params: Map<String, Value> =
                inst.params.iter().map(|(k, v)| (k.clone(), from_param(v))).collect();
            if inst.stage != 0 {
                params.insert("stage".into(), json!(inst.stage));
            }
            json!({"pattern": inst.pattern.name(), "name": inst.name, "params": params})
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({ "instances": instances })).expect("plain JSON values");
    text.push('\n');
    text
}
