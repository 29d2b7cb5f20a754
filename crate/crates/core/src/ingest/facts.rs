//! Derived facts and their JSONL form.

use std::cmp::Ordering;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use compact_str::CompactString;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use super::records::{Predicate, RecordError};
use crate::model::serialize_number;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRef {
    pub start: CompactString,
    pub end: CompactString,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub pattern: CompactString,
    /// Contributing event ids, sorted and unique.
    pub inputs: Vec<CompactString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FactBody {
    Measurement {
        subject: CompactString,
        key: CompactString,
        value: f64,
        unit: CompactString,
    },
    Relation {
        subject: CompactString,
        predicate: Predicate,
        object: CompactString,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivedFact {
    pub instance: CompactString,
    pub body: FactBody,
    pub provenance: Provenance,
}

/// Everything that decides whether two facts are the same fact; provenance is
/// not part of it. Ordering is the output ordering of [`write_facts`].
#[derive(Clone, Debug)]
pub struct FactIdentity<'a> {
    pub instance: &'a str,
    pub kind: FactKind,
    pub subject: &'a str,
    pub label: &'a str,
    pub target: Target<'a>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactKind {
    Measurement,
    Relation,
}

impl FactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactKind::Measurement => "measurement",
            FactKind::Relation => "relation",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Value(f64),
    Object(&'a str),
}

impl Ord for Target<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Target::Value(a), Target::Value(b)) => a.total_cmp(b),
            (Target::Object(a), Target::Object(b)) => a.cmp(b),
            (Target::Value(_), Target::Object(_)) => Ordering::Less,
            (Target::Object(_), Target::Value(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Target<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Target<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Target<'_> {}

impl Ord for FactIdentity<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.instance, self.kind, self.subject, self.label, self.target).cmp(&(
            other.instance,
            other.kind,
            other.subject,
            other.label,
            other.target,
        ))
    }
}

impl PartialOrd for FactIdentity<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for FactIdentity<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FactIdentity<'_> {}

impl DerivedFact {
    pub fn measurement(
        instance: &str,
        pattern: &str,
        subject: impl Into<CompactString>,
        key: &str,
        value: f64,
        unit: &str,
    ) -> DerivedFact {
        DerivedFact {
            instance: instance.into(),
            body: FactBody::Measurement {
                subject: subject.into(),
                key: key.into(),
                value,
                unit: unit.into(),
            },
            provenance: Provenance { pattern: pattern.into(), inputs: Vec::new(), interval: None },
        }
    }

    pub fn relation(
        instance: &str,
        pattern: &str,
        subject: impl Into<CompactString>,
        predicate: Predicate,
        object: impl Into<CompactString>,
    ) -> DerivedFact {
        DerivedFact {
            instance: instance.into(),
            body: FactBody::Relation {
                subject: subject.into(),
                predicate,
                object: object.into(),
            },
            provenance: Provenance { pattern: pattern.into(), inputs: Vec::new(), interval: None },
        }
    }

    pub fn with_inputs<I, S>(mut self, inputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<CompactString>,
    {
        self.provenance.inputs = inputs.into_iter().map(Into::into).collect();
        self.provenance.inputs.sort();
        self.provenance.inputs.dedup();
        self
    }

    pub fn with_interval(mut self, start: impl Into<CompactString>, end: impl Into<CompactString>) -> Self {
        self.provenance.interval = Some(IntervalRef { start: start.into(), end: end.into() });
        self
    }

    pub fn kind(&self) -> FactKind {
        match self.body {
            FactBody::Measurement { .. } => FactKind::Measurement,
            FactBody::Relation { .. } => FactKind::Relation,
        }
    }

    pub fn subject(&self) -> &str {
        match &self.body {
            FactBody::Measurement { subject, .. } | FactBody::Relation { subject, .. } => subject,
        }
    }

    pub fn identity(&self) -> FactIdentity<'_> {
        let (subject, label, target) = match &self.body {
            FactBody::Measurement { subject, key, value, .. } => {
                (subject.as_str(), key.as_str(), Target::Value(*value))
            }
            FactBody::Relation { subject, predicate, object } => {
                (subject.as_str(), predicate.as_str(), Target::Object(object.as_str()))
            }
        };
        FactIdentity { instance: &self.instance, kind: self.kind(), subject, label, target }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&FactLine::from(self)).expect("facts serialize")
    }
}

/// Sorts by identity and merges duplicates; provenance inputs of merged
/// facts are unioned and the smallest interval is kept.
pub fn dedup_facts(mut facts: Vec<DerivedFact>) -> Vec<DerivedFact> {
    if is_canonical(&facts) {
        return facts;
    }
    // duplicates are merged symmetrically, so their relative order is irrelevant
    facts.par_sort_unstable_by(|a, b| a.identity().cmp(&b.identity()));
    facts.dedup_by(|next, kept| {
        if next.identity() != kept.identity() {
            return false;
        }
        let p = &mut kept.provenance;
        p.inputs.append(&mut next.provenance.inputs);
        p.inputs.sort();
        p.inputs.dedup();
        p.interval = match (p.interval.take(), next.provenance.interval.take()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        true
    });
    facts
}

/// True when `facts` are strictly increasing by identity, i.e. sorted and
/// free of duplicates.
fn is_canonical(facts: &[DerivedFact]) -> bool {
    facts.windows(2).all(|w| w[0].identity() < w[1].identity())
}

fn write_jsonl<W: Write>(facts: &[DerivedFact], out: &mut W) -> io::Result<()> {
    let deduped;
    let facts = if is_canonical(facts) {
        facts
    } else {
        deduped = dedup_facts(facts.to_vec());
        &deduped
    };
    for f in facts {
        serde_json::to_writer(&mut *out, &FactLine::from(f))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Renders facts as JSONL: deduplicated, sorted, one object per line.
pub fn facts_to_jsonl(facts: &[DerivedFact]) -> String {
    let mut out = Vec::new();
    write_jsonl(facts, &mut out).expect("writing to memory");
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn write_facts(facts: &[DerivedFact], path: &Path) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_jsonl(facts, &mut file)?;
    file.flush()
}

pub fn parse_fact_line(line: &str) -> Result<DerivedFact, RecordError> {
    let raw: FactLine = serde_json::from_str(line).map_err(|e| RecordError(e.to_string()))?;
    DerivedFact::try_from(raw)
}

/// Reads a facts file written by [`write_facts`]. Errors carry 1-based line numbers.
pub fn read_facts(text: &str) -> Result<Vec<DerivedFact>, (usize, RecordError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_fact_line(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactLine {
    kind: CompactString,
    instance: CompactString,
    subject: CompactString,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key: Option<CompactString>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "opt_number")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<CompactString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicate: Option<CompactString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object: Option<CompactString>,
    provenance: Provenance,
}

fn opt_number<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => serialize_number(*v, s),
        None => s.serialize_none(),
    }
}

impl From<&DerivedFact> for FactLine {
    fn from(f: &DerivedFact) -> Self {
        let mut line = FactLine {
            kind: f.kind().as_str().into(),
            instance: f.instance.clone(),
            subject: f.subject().into(),
            key: None,
            value: None,
            unit: None,
            predicate: None,
            object: None,
            provenance: f.provenance.clone(),
        };
        match &f.body {
            FactBody::Measurement { key, value, unit, .. } => {
                line.key = Some(key.clone());
                line.value = Some(*value);
                line.unit = Some(unit.clone());
            }
            FactBody::Relation { predicate, object, .. } => {
                line.predicate = Some(predicate.as_str().into());
                line.object = Some(object.clone());
            }
        }
        line
    }
}

impl TryFrom<FactLine> for DerivedFact {
    type Error = RecordError;

    fn try_from(l: FactLine) -> Result<Self, Self::Error> {
        let missing = |f: &str| RecordError(format!("missing field '{f}'"));
        let body = match l.kind.as_str() {
            "measurement" => {
                if l.predicate.is_some() || l.object.is_some() {
                    return Err(RecordError("measurement carries relation fields".into()));
                }
                let value = l.value.ok_or_else(|| missing("value"))?;
                if !value.is_finite() {
                    return Err(RecordError("measurement value must be finite".into()));
                }
                FactBody::Measurement {
                    subject: l.subject,
                    key: l.key.ok_or_else(|| missing("key"))?,
                    value,
                    unit: l.unit.ok_or_else(|| missing("unit"))?,
                }
            }
            "relation" => {
                if l.key.is_some() || l.value.is_some() || l.unit.is_some() {
                    return Err(RecordError("relation carries measurement fields".into()));
                }
                let p = l.predicate.ok_or_else(|| missing("predicate"))?;
                FactBody::Relation {
                    subject: l.subject,
                    predicate: Predicate::parse(&p)
                        .ok_or_else(|| RecordError(format!("unknown predicate '{p}'")))?,
                    object: l.object.ok_or_else(|| missing("object"))?,
                }
            }
            other => return Err(RecordError(format!("unknown fact kind '{other}'"))),
        };
        Ok(DerivedFact { instance: l.instance, body, provenance: l.provenance })
    }
}
