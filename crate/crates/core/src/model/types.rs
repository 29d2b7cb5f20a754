use std::cmp::Ordering;
use std::fmt;

use compact_str::CompactString;
use serde::{Deserialize, Serialize, Serializer};

use super::taxonomy::ClassId;

/// Milliseconds on the dataset's shared timeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Signed distance `self - earlier` in milliseconds.
    pub fn since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    /// Parses an RFC 3339 / ISO-8601 UTC string into epoch milliseconds.
    pub fn parse_iso(text: &str) -> Option<Timestamp> {
        chrono::DateTime::parse_from_rfc3339(text)
            .ok()
            .map(|dt| Timestamp(dt.timestamp_millis()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Attribute value attached to events and entities.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl Scalar {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Option<Scalar> {
        match value {
            serde_json::Value::String(s) => Some(Scalar::Str(s.clone())),
            serde_json::Value::Bool(b) => Some(Scalar::Bool(*b)),
            serde_json::Value::Number(n) => n.as_f64().filter(|v| v.is_finite()).map(Scalar::Num),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Str(s) => write!(f, "{s}"),
            Scalar::Num(v) => write!(f, "{v}"),
            Scalar::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Str(s) => serializer.serialize_str(s),
            Scalar::Bool(b) => serializer.serialize_bool(*b),
            Scalar::Num(v) => serialize_number(*v, serializer),
        }
    }
}

/// Writes integral values without a fractional part so that `10` stays `10`
/// after a load/write cycle.
pub(crate) fn serialize_number<S: Serializer>(v: f64, serializer: S) -> Result<S::Ok, S::Error> {
    const EXACT: f64 = 9_007_199_254_740_992.0; // 2^53
    if v.fract() == 0.0 && v.abs() < EXACT {
        serializer.serialize_i64(v as i64)
    } else {
        serializer.serialize_f64(v)
    }
}

/// Attribute map. Most events carry one or two attributes, so entries live
/// in a vector sorted by key rather than a tree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Attributes(Vec<(CompactString, Scalar)>);

impl Attributes {
    pub fn new() -> Attributes {
        Attributes(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn position(&self, key: &str) -> Result<usize, usize> {
        self.0.binary_search_by(|(k, _)| k.as_str().cmp(key))
    }

    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.position(key).ok().map(|i| &self.0[i].1)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.position(key).is_ok()
    }

    /// Sets `key`, returning the value it replaced.
    pub fn insert(&mut self, key: CompactString, value: Scalar) -> Option<Scalar> {
        match self.position(&key) {
            Ok(i) => Some(std::mem::replace(&mut self.0[i].1, value)),
            Err(i) => {
                self.0.insert(i, (key, value));
                None
            }
        }
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &Scalar)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn keys(&self) -> impl ExactSizeIterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }
}

impl<K: Into<CompactString>> FromIterator<(K, Scalar)> for Attributes {
    fn from_iter<I: IntoIterator<Item = (K, Scalar)>>(iter: I) -> Attributes {
        let mut attrs = Attributes::new();
        for (k, v) in iter {
            attrs.insert(k.into(), v);
        }
        attrs
    }
}

impl Serialize for Attributes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.iter())
    }
}

/// Direction of an entity's participation in an aggregation event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
}

impl Role {
    pub fn parse(text: &str) -> Option<Role> {
        match text {
            "input" => Some(Role::Input),
            "output" => Some(Role::Output),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Input => "input",
            Role::Output => "output",
        }
    }
}

/// Dense index of an entity in a [`Store`](super::Store). Entities are kept
/// sorted by id, so index order equals id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityIdx(pub u32);

/// Dense index of an event in a [`Store`](super::Store). Events are kept
/// sorted by [`TotalOrderKey`], so index order equals event order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventIdx(pub u32);

impl EntityIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EventIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    pub id: CompactString,
    pub types: Vec<ClassId>,
    pub attributes: Attributes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Correlation {
    pub entity: EntityIdx,
    pub role: Option<Role>,
    /// Added by materializing a derived fact rather than read from input.
    pub derived: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub id: CompactString,
    pub class: ClassId,
    pub timestamp: Timestamp,
    pub attributes: Attributes,
    /// Sorted by entity index, then role.
    pub correlations: Vec<Correlation>,
}

impl Event {
    pub fn key(&self) -> TotalOrderKey<'_> {
        TotalOrderKey {
            timestamp: self.timestamp,
            id: &self.id,
        }
    }

    pub fn correlates_to(&self, entity: EntityIdx) -> bool {
        self.correlations.iter().any(|c| c.entity == entity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartOfEdge {
    pub part: EntityIdx,
    pub whole: EntityIdx,
    pub derived: bool,
}

/// Strict total order over events: timestamp first, then id bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TotalOrderKey<'a> {
    pub timestamp: Timestamp,
    pub id: &'a str,
}

impl Ord for TotalOrderKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.timestamp
            .cmp(&other.timestamp)
            .then_with(|| self.id.as_bytes().cmp(other.id.as_bytes()))
    }
}

impl PartialOrd for TotalOrderKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders two events by their [`TotalOrderKey`].
pub fn compare_events(a: &Event, b: &Event) -> Ordering {
    a.key().cmp(&b.key())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, t: i64) -> Event {
        Event {
            id: id.into(),
            class: ClassId(0),
            timestamp: Timestamp(t),
            attributes: Attributes::new(),
            correlations: Vec::new(),
        }
    }

    #[test]
    fn timestamp_dominates_id() {
        assert_eq!(compare_events(&ev("e1", 10), &ev("e0", 12)), Ordering::Less);
    }

    #[test]
    fn id_breaks_ties() {
        assert_eq!(compare_events(&ev("a", 10), &ev("b", 10)), Ordering::Less);
        assert_eq!(compare_events(&ev("b", 10), &ev("a", 10)), Ordering::Greater);
    }

    #[test]
    fn identical_event_is_equal() {
        let e = ev("e", 3);
        assert_eq!(compare_events(&e, &e), Ordering::Equal);
    }

    #[test]
    fn iso_timestamps_become_epoch_millis() {
        assert_eq!(Timestamp::parse_iso("1970-01-01T00:00:01.5Z"), Some(Timestamp(1500)));
        assert_eq!(
            Timestamp::parse_iso("2024-01-01T00:00:00Z"),
            Some(Timestamp(1_704_067_200_000))
        );
        assert_eq!(Timestamp::parse_iso("yesterday"), None);
    }

    #[test]
    fn integral_numbers_serialize_without_fraction() {
        assert_eq!(serde_json::to_string(&Scalar::Num(10.0)).unwrap(), "10");
        assert_eq!(serde_json::to_string(&Scalar::Num(10.5)).unwrap(), "10.5");
        assert_eq!(serde_json::to_string(&Scalar::Num(-0.25)).unwrap(), "-0.25");
    }
}
