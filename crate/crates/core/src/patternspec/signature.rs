//! Pattern names and their parameter tables.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternKind {
    IntervalCount,
    IntervalAggregate,
    ElapsedPreceding,
    ElapsedSucceedingSameType,
    ElapsedMaximum,
    RelatePreceding,
    RelatePartOf,
    RelatePrecedingAggregation,
    RelateSucceedingAggregation,
    DerivePartOf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    /// Class subsumed by `Event`.
    EventClass,
    /// Class subsumed by `Entity`.
    EntityClass,
    /// Class subsumed by `Aggregate`.
    AggregateClass,
    /// List of entity classes.
    EntityClassList,
    Bool,
    Number,
    /// Free word or string, interpreted by the pattern (agg, window, ...).
    Text,
    /// Any scalar: string, identifier, number or boolean.
    Scalar,
}

impl ParamType {
    pub fn describe(self) -> &'static str {
        match self {
            ParamType::EventClass => "an event class",
            ParamType::EntityClass => "an entity class",
            ParamType::AggregateClass => "an aggregation event class",
            ParamType::EntityClassList => "a list of entity classes",
            ParamType::Bool => "a boolean",
            ParamType::Number => "a number",
            ParamType::Text => "a word or string",
            ParamType::Scalar => "a scalar value",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub ty: ParamType,
    pub required: bool,
}

const fn req(key: &'static str, ty: ParamType) -> ParamSpec {
    ParamSpec { key, ty, required: true }
}

const fn opt(key: &'static str, ty: ParamType) -> ParamSpec {
    ParamSpec { key, ty, required: false }
}

use ParamType::*;

/// Accepted by every pattern. `stage` is lifted out of the parameter map.
pub const COMMON_PARAMS: &[ParamSpec] = &[
    opt("stage", Number),
    opt("useDerived", Bool),
    opt("materialize", Bool),
];

const INTERVAL_COUNT: &[ParamSpec] = &[
    req("start", EventClass),
    req("end", EventClass),
    req("counted", EventClass),
    opt("pairOnProductionEntity", Bool),
    opt("countedSharesProductionEntity", Bool),
];

const INTERVAL_AGGREGATE: &[ParamSpec] = &[
    opt("start", EventClass),
    opt("end", EventClass),
    req("eventType", EventClass),
    req("attribute", Text),
    req("agg", Text),
    opt("threshold", Number),
    opt("window", Text),
    opt("pairOnProductionEntity", Bool),
];

const ELAPSED_PRECEDING: &[ParamSpec] = &[
    req("eventType", EventClass),
    req("preceding", EventClass),
    opt("matchOn", EntityClassList),
];

const ELAPSED_SUCCEEDING: &[ParamSpec] = &[
    req("eventType", EventClass),
    opt("filterAttribute", Text),
    opt("filterValue", Scalar),
    opt("matchOn", EntityClassList),
];

const ELAPSED_MAXIMUM: &[ParamSpec] = &[
    req("start", EventClass),
    req("end", EventClass),
    req("entityType", EntityClass),
];

const RELATE_PRECEDING: &[ParamSpec] = &[
    req("eventType", EventClass),
    req("preceding", EventClass),
    req("target", EntityClass),
    opt("matchOn", EntityClassList),
];

const RELATE_PARTOF: &[ParamSpec] = &[
    req("direction", Text),
    opt("eventEntity", EntityClass),
    opt("otherEntity", EntityClass),
];

const RELATE_AGGREGATION: &[ParamSpec] = &[
    opt("aggType", AggregateClass),
    opt("entityType", EntityClass),
    opt("recursive", Bool),
];

const DERIVE_PARTOF: &[ParamSpec] = &[
    req("start", EventClass),
    req("end", EventClass),
    req("part", EntityClass),
    opt("whole", EntityClass),
];

impl PatternKind {
    pub const ALL: [PatternKind; 10] = [
        PatternKind::IntervalCount,
        PatternKind::IntervalAggregate,
        PatternKind::ElapsedPreceding,
        PatternKind::ElapsedSucceedingSameType,
        PatternKind::ElapsedMaximum,
        PatternKind::RelatePreceding,
        PatternKind::RelatePartOf,
        PatternKind::RelatePrecedingAggregation,
        PatternKind::RelateSucceedingAggregation,
        PatternKind::DerivePartOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::IntervalCount => "interval_count",
            PatternKind::IntervalAggregate => "interval_aggregate",
            PatternKind::ElapsedPreceding => "elapsed_preceding",
            PatternKind::ElapsedSucceedingSameType => "elapsed_succeeding_same_type",
            PatternKind::ElapsedMaximum => "elapsed_maximum",
            PatternKind::RelatePreceding => "relate_preceding",
            PatternKind::RelatePartOf => "relate_partof",
            PatternKind::RelatePrecedingAggregation => "relate_preceding_aggregation",
            PatternKind::RelateSucceedingAggregation => "relate_succeeding_aggregation",
            PatternKind::DerivePartOf => "derive_partof",
        }
    }

    pub fn parse(name: &str) -> Option<PatternKind> {
        PatternKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Pattern-specific parameters (common ones excluded).
    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            PatternKind::IntervalCount => INTERVAL_COUNT,
            PatternKind::IntervalAggregate => INTERVAL_AGGREGATE,
            PatternKind::ElapsedPreceding => ELAPSED_PRECEDING,
            PatternKind::ElapsedSucceedingSameType => ELAPSED_SUCCEEDING,
            PatternKind::ElapsedMaximum => ELAPSED_MAXIMUM,
            PatternKind::RelatePreceding => RELATE_PRECEDING,
            PatternKind::RelatePartOf => RELATE_PARTOF,
            PatternKind::RelatePrecedingAggregation | PatternKind::RelateSucceedingAggregation => {
                RELATE_AGGREGATION
            }
            PatternKind::DerivePartOf => DERIVE_PARTOF,
        }
    }

    pub fn param(self, key: &str) -> Option<&'static ParamSpec> {
        self.params().iter().chain(COMMON_PARAMS).find(|p| p.key == key)
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PatternKind::ALL {
            assert_eq!(PatternKind::parse(k.name()), Some(k));
        }
        assert_eq!(PatternKind::parse("bogus"), None);
    }

    #[test]
    fn keys_are_unique_per_pattern() {
        for k in PatternKind::ALL {
            let mut keys: Vec<&str> = k.params().iter().chain(COMMON_PARAMS).map(|p| p.key).collect();
            let n = keys.len();
            keys.sort();
            keys.dedup();
            assert_eq!(keys.len(), n, "{k}");
        }
    }
}
