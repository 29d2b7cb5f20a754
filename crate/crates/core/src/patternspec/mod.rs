//! The pattern-instantiation DSL: parsing, printing and validation.

mod json;
mod parse;
mod print;
mod resolve;
mod signature;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use json::{parse_json, pipeline_to_json};
pub use parse::parse_dsl;
pub use print::print_pipeline;
pub use resolve::{
    resolve_pipeline, validate_pipeline, AggregationConfig, Diagnostic, Direction, PatternConfig,
    ResolvedInstance, ResolvedPipeline, Window,
};
pub use signature::{ParamSpec, ParamType, PatternKind, COMMON_PARAMS};

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Ident(String),
    Str(String),
    Num(f64),
    Bool(bool),
    List(Vec<ParamValue>),
}

impl ParamValue {
    /// Identifiers and strings both read as words.
    pub fn as_word(&self) -> Option<&str> {
        match self {
            ParamValue::Ident(s) | ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatternInstance {
    pub pattern: PatternKind,
    pub name: String,
    /// Parameters other than `stage`.
    pub params: BTreeMap<String, ParamValue>,
    pub stage: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub index: u32,
    pub instances: Vec<PatternInstance>,
}

/// Instances grouped by stage, stages in ascending order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pipeline {
    pub stages: Vec<Stage>,
}

impl Pipeline {
    /// Groups instances by their `stage`, keeping file order inside a stage.
    pub fn from_instances(instances: Vec<PatternInstance>) -> Pipeline {
        let mut by_stage: BTreeMap<u32, Vec<PatternInstance>> = BTreeMap::new();
        for inst in instances {
            by_stage.entry(inst.stage).or_default().push(inst);
        }
        Pipeline {
            stages: by_stage.into_iter().map(|(index, instances)| Stage { index, instances }).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.stages.iter().all(|s| s.instances.is_empty())
    }

    pub fn len(&self) -> usize {
        self.stages.iter().map(|s| s.instances.len()).sum()
    }

    pub fn instances(&self) -> impl Iterator<Item = &PatternInstance> {
        self.stages.iter().flat_map(|s| &s.instances)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DslErrorKind {
    Syntax(String),
    UnknownPattern(String),
    UnknownParam { pattern: PatternKind, key: String },
    DuplicateParam(String),
    DuplicateInstance(String),
    BadValue { key: String, expected: &'static str },
}

impl fmt::Display for DslErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslErrorKind::Syntax(msg) => f.write_str(msg),
            DslErrorKind::UnknownPattern(name) => write!(f, "unknown pattern '{name}'"),
            DslErrorKind::UnknownParam { pattern, key } => {
                write!(f, "unknown parameter '{key}' for pattern {pattern}")
            }
            DslErrorKind::DuplicateParam(key) => write!(f, "duplicate parameter '{key}'"),
            DslErrorKind::DuplicateInstance(name) => write!(f, "duplicate instance name '{name}'"),
            DslErrorKind::BadValue { key, expected } => write!(f, "parameter '{key}' expects {expected}"),
        }
    }
}

/// A parse failure. Line and column are 1-based; both are 0 when the JSON
/// form is structurally valid but semantically wrong and no position exists.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct DslError {
    pub kind: DslErrorKind,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "{}:{}: {}", self.line, self.column, self.kind)
        }
    }
}

/// Parses a pattern file. Text whose first non-blank character is `{` is read
/// as the JSON form, anything else as the DSL.
pub fn parse_pattern_file(text: &str) -> Result<Pipeline, DslError> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_dsl(text)
    }
}
