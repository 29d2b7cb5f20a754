use std::fmt;

use super::{ParamType, ParamValue, PatternInstance, PatternKind, Pipeline};
use crate::model::{ClassId, Scalar, Taxonomy, AGGREGATE, PRODUCTION_ENTITY, RESOURCE};
use crate::patterns::AggFn;

/// A validation finding tied to an instance and, usually, one of its keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub instance: String,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(key) => write!(f, "{}: {}: {}", self.instance, key, self.message),
            None => write!(f, "{}: {}", self.instance, self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Interval,
    AllPerResource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    WholeToPart,
    PartToWhole,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationConfig {
    pub agg_type: ClassId,
    pub entity_type: ClassId,
    pub recursive: bool,
}

/// Instance parameters resolved against a taxonomy, defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub enum PatternConfig {
    IntervalCount {
        start: ClassId,
        end: ClassId,
        counted: ClassId,
        pair_on_production_entity: bool,
        counted_shares_production_entity: bool,
    },
    IntervalAggregate {
        /// `None` only for `Window::AllPerResource`.
        bounds: Option<(ClassId, ClassId)>,
        event_type: ClassId,
        attribute: String,
        agg: AggFn,
        window: Window,
        pair_on_production_entity: bool,
    },
    ElapsedPreceding {
        event_type: ClassId,
        preceding: ClassId,
        match_on: Vec<ClassId>,
    },
    ElapsedSucceedingSameType {
        event_type: ClassId,
        filter: Option<(String, Scalar)>,
        match_on: Vec<ClassId>,
    },
    ElapsedMaximum {
        start: ClassId,
        end: ClassId,
        entity_type: ClassId,
    },
    RelatePreceding {
        event_type: ClassId,
        preceding: ClassId,
        target: ClassId,
        match_on: Vec<ClassId>,
    },
    RelatePartOf {
        direction: Direction,
        event_entity: Option<ClassId>,
        other_entity: Option<ClassId>,
    },
    RelatePrecedingAggregation(AggregationConfig),
    RelateSucceedingAggregation(AggregationConfig),
    DerivePartOf {
        start: ClassId,
        end: ClassId,
        part: ClassId,
        whole: ClassId,
    },
}

impl PatternConfig {
    pub fn kind(&self) -> PatternKind {
        match self {
            PatternConfig::IntervalCount { .. } => PatternKind::IntervalCount,
            PatternConfig::IntervalAggregate { .. } => PatternKind::IntervalAggregate,
            PatternConfig::ElapsedPreceding { .. } => PatternKind::ElapsedPreceding,
            PatternConfig::ElapsedSucceedingSameType { .. } => PatternKind::ElapsedSucceedingSameType,
            PatternConfig::ElapsedMaximum { .. } => PatternKind::ElapsedMaximum,
            PatternConfig::RelatePreceding { .. } => PatternKind::RelatePreceding,
            PatternConfig::RelatePartOf { .. } => PatternKind::RelatePartOf,
            PatternConfig::RelatePrecedingAggregation(_) => PatternKind::RelatePrecedingAggregation,
            PatternConfig::RelateSucceedingAggregation(_) => PatternKind::RelateSucceedingAggregation,
            PatternConfig::DerivePartOf { .. } => PatternKind::DerivePartOf,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedInstance {
    pub name: String,
    pub config: PatternConfig,
    pub stage: u32,
    /// Whether the engine sees derived correlations, edges and attributes.
    pub use_derived: bool,
    /// Whether this instance's facts are folded into the store for later stages.
    pub materialize: bool,
}

impl ResolvedInstance {
    pub fn kind(&self) -> PatternKind {
        self.config.kind()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResolvedPipeline {
    /// Stages in ascending order; empty stages are dropped.
    pub stages: Vec<Vec<ResolvedInstance>>,
}

impl ResolvedPipeline {
    pub fn instances(&self) -> impl Iterator<Item = &ResolvedInstance> {
        self.stages.iter().flatten()
    }
}

struct Ctx<'a> {
    inst: &'a PatternInstance,
    taxonomy: &'a Taxonomy,
    diags: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn diag(&mut self, key: Option<&str>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            instance: self.inst.name.clone(),
            key: key.map(str::to_string),
            message: message.into(),
        });
    }

    fn get(&self, key: &str) -> Option<&ParamValue> {
        self.inst.params.get(key)
    }

    fn check_class(&mut self, key: &str, name: &str, ty: ParamType) -> Option<ClassId> {
        let Some(class) = self.taxonomy.lookup(name) else {
            self.diag(Some(key), format!("undeclared class '{name}'"));
            return None;
        };
        let ok = match ty {
            ParamType::EventClass => self.taxonomy.is_event_class(class),
            ParamType::AggregateClass => {
                self.taxonomy.is_subclass(class, self.taxonomy.builtin(AGGREGATE))
            }
            _ => self.taxonomy.is_entity_class(class),
        };
        if !ok {
            self.diag(Some(key), format!("class '{name}' is not {}", ty.describe()));
            return None;
        }
        Some(class)
    }

    /// A class-valued parameter, or `default` (a builtin name) when absent.
    fn class(&mut self, key: &str, default: Option<&str>) -> Option<ClassId> {
        let ty = self.inst.pattern.param(key).expect("key from signature").ty;
        match self.get(key).and_then(ParamValue::as_word).map(str::to_string) {
            Some(name) => self.check_class(key, &name, ty),
            None => match default {
                Some(builtin) => Some(self.taxonomy.builtin(builtin)),
                None => {
                    self.missing(key);
                    None
                }
            },
        }
    }

    fn opt_class(&mut self, key: &str) -> Option<Option<ClassId>> {
        if self.get(key).is_none() {
            return Some(None);
        }
        self.class(key, None).map(Some)
    }

    fn missing(&mut self, key: &str) {
        self.diag(Some(key), "missing required parameter");
    }

    fn flag(&self, key: &str, default: bool) -> bool {
        self.get(key).and_then(ParamValue::as_bool).unwrap_or(default)
    }

    fn word(&mut self, key: &str) -> Option<String> {
        let w = self.get(key).and_then(ParamValue::as_word).map(str::to_string);
        if w.is_none() {
            self.missing(key);
        }
        w
    }

    fn match_on(&mut self) -> Option<Vec<ClassId>> {
        let Some(ParamValue::List(items)) = self.get("matchOn").cloned() else {
            return Some(vec![self.taxonomy.builtin(RESOURCE)]);
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for item in &items {
            let name = item.as_word().expect("type-checked list");
            match self.check_class("matchOn", name, ParamType::EntityClass) {
                Some(c) => out.push(c),
                None => ok = false,
            }
        }
        out.sort();
        out.dedup();
        ok.then_some(out)
    }
}

fn resolve_instance(inst: &PatternInstance, taxonomy: &Taxonomy) -> Result<ResolvedInstance, Vec<Diagnostic>> {
    let mut cx = Ctx { inst, taxonomy, diags: Vec::new() };
    let config = match inst.pattern {
        PatternKind::IntervalCount => {
            let start = cx.class("start", None);
            let end = cx.class("end", None);
            let counted = cx.class("counted", None);
            let pair = cx.flag("pairOnProductionEntity", true);
            let shares = cx.flag("countedSharesProductionEntity", false);
            match (start, end, counted) {
                (Some(start), Some(end), Some(counted)) => Some(PatternConfig::IntervalCount {
                    start,
                    end,
                    counted,
                    pair_on_production_entity: pair,
                    counted_shares_production_entity: shares,
                }),
                _ => None,
            }
        }
        PatternKind::IntervalAggregate => {
            let window = match cx.get("window").and_then(ParamValue::as_word) {
                None | Some("interval") => Some(Window::Interval),
                Some("all-per-resource" | "all_per_resource") => Some(Window::AllPerResource),
                Some(other) => {
                    let msg = format!("unknown window '{other}' (expected interval or all-per-resource)");
                    cx.diag(Some("window"), msg);
                    None
                }
            };
            let bounds = match window {
                Some(Window::AllPerResource) => {
                    let s = cx.opt_class("start");
                    let e = cx.opt_class("end");
                    (s.is_some() && e.is_some()).then_some(None)
                }
                _ => {
                    let s = cx.class("start", None);
                    let e = cx.class("end", None);
                    s.zip(e).map(Some)
                }
            };
            let event_type = cx.class("eventType", None);
            let attribute = cx.word("attribute");
            if attribute.as_deref() == Some("") {
                cx.diag(Some("attribute"), "attribute name must not be empty");
            }
            let threshold = cx.get("threshold").and_then(ParamValue::as_num);
            let agg = match cx.word("agg") {
                Some(name) => match AggFn::parse(&name, threshold) {
                    Ok(agg) => Some(agg),
                    Err(msg) => {
                        let key = if msg.contains("threshold") { "threshold" } else { "agg" };
                        cx.diag(Some(key), msg);
                        None
                    }
                },
                None => None,
            };
            let pair = cx.flag("pairOnProductionEntity", true);
            match (window, bounds, event_type, attribute, agg) {
                (Some(window), Some(bounds), Some(event_type), Some(attribute), Some(agg))
                    if !attribute.is_empty() =>
                {
                    Some(PatternConfig::IntervalAggregate {
                        bounds,
                        event_type,
                        attribute,
                        agg,
                        window,
                        pair_on_production_entity: pair,
                    })
                }
                _ => None,
            }
        }
        PatternKind::ElapsedPreceding => {
            let event_type = cx.class("eventType", None);
            let preceding = cx.class("preceding", None);
            let match_on = cx.match_on();
            match (event_type, preceding, match_on) {
                (Some(event_type), Some(preceding), Some(match_on)) => {
                    Some(PatternConfig::ElapsedPreceding { event_type, preceding, match_on })
                }
                _ => None,
            }
        }
        PatternKind::ElapsedSucceedingSameType => {
            let event_type = cx.class("eventType", None);
            let attr = cx.get("filterAttribute").and_then(ParamValue::as_word).map(str::to_string);
            let value = cx.get("filterValue").and_then(|v| match v {
                ParamValue::Ident(s) | ParamValue::Str(s) => Some(Scalar::Str(s.clone())),
                ParamValue::Num(n) => Some(Scalar::Num(*n)),
                ParamValue::Bool(b) => Some(Scalar::Bool(*b)),
                ParamValue::List(_) => None,
            });
            let filter = match (attr, value) {
                (Some(a), Some(v)) => Some(Some((a, v))),
                (None, None) => Some(None),
                (Some(_), None) => {
                    cx.diag(Some("filterValue"), "filterAttribute requires filterValue");
                    None
                }
                (None, Some(_)) => {
                    cx.diag(Some("filterAttribute"), "filterValue requires filterAttribute");
                    None
                }
            };
            let match_on = cx.match_on();
            match (event_type, filter, match_on) {
                (Some(event_type), Some(filter), Some(match_on)) => {
                    Some(PatternConfig::ElapsedSucceedingSameType { event_type, filter, match_on })
                }
                _ => None,
            }
        }
        PatternKind::ElapsedMaximum => {
            let start = cx.class("start", None);
            let end = cx.class("end", None);
            let entity_type = cx.class("entityType", None);
            match (start, end, entity_type) {
                (Some(start), Some(end), Some(entity_type)) => {
                    Some(PatternConfig::ElapsedMaximum { start, end, entity_type })
                }
                _ => None,
            }
        }
        PatternKind::RelatePreceding => {
            let event_type = cx.class("eventType", None);
            let preceding = cx.class("preceding", None);
            let target = cx.class("target", None);
            let match_on = cx.match_on();
            match (event_type, preceding, target, match_on) {
                (Some(event_type), Some(preceding), Some(target), Some(match_on)) => {
                    Some(PatternConfig::RelatePreceding { event_type, preceding, target, match_on })
                }
                _ => None,
            }
        }
        PatternKind::RelatePartOf => {
            let direction = match cx.get("direction").and_then(ParamValue::as_word) {
                Some("whole-to-part" | "whole_to_part") => Some(Direction::WholeToPart),
                Some("part-to-whole" | "part_to_whole") => Some(Direction::PartToWhole),
                Some(other) => {
                    let msg = format!("unknown direction '{other}' (expected whole-to-part or part-to-whole)");
                    cx.diag(Some("direction"), msg);
                    None
                }
                None => {
                    cx.missing("direction");
                    None
                }
            };
            let event_entity = cx.opt_class("eventEntity");
            let other_entity = cx.opt_class("otherEntity");
            match (direction, event_entity, other_entity) {
                (Some(direction), Some(event_entity), Some(other_entity)) => {
                    Some(PatternConfig::RelatePartOf { direction, event_entity, other_entity })
                }
                _ => None,
            }
        }
        PatternKind::RelatePrecedingAggregation | PatternKind::RelateSucceedingAggregation => {
            let agg_type = cx.class("aggType", Some(AGGREGATE));
            let entity_type = cx.class("entityType", Some(PRODUCTION_ENTITY));
            let recursive = cx.flag("recursive", false);
            agg_type.zip(entity_type).map(|(agg_type, entity_type)| {
                let cfg = AggregationConfig { agg_type, entity_type, recursive };
                if inst.pattern == PatternKind::RelatePrecedingAggregation {
                    PatternConfig::RelatePrecedingAggregation(cfg)
                } else {
                    PatternConfig::RelateSucceedingAggregation(cfg)
                }
            })
        }
        PatternKind::DerivePartOf => {
            let start = cx.class("start", None);
            let end = cx.class("end", None);
            let part = cx.class("part", None);
            let whole = cx.class("whole", Some(PRODUCTION_ENTITY));
            match (start, end, part, whole) {
                (Some(start), Some(end), Some(part), Some(whole)) => {
                    Some(PatternConfig::DerivePartOf { start, end, part, whole })
                }
                _ => None,
            }
        }
    };
    match config {
        Some(config) if cx.diags.is_empty() => Ok(ResolvedInstance {
            name: inst.name.clone(),
            config,
            stage: inst.stage,
            use_derived: cx.flag("useDerived", true),
            materialize: cx.flag("materialize", true),
        }),
        _ => {
            debug_assert!(!cx.diags.is_empty());
            Err(cx.diags)
        }
    }
}

/// Resolves every instance; on failure returns all diagnostics found.
pub fn resolve_pipeline(pipeline: &Pipeline, taxonomy: &Taxonomy) -> Result<ResolvedPipeline, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut stages = Vec::new();
    for stage in &pipeline.stages {
        let mut resolved = Vec::new();
        for inst in &stage.instances {
            match resolve_instance(inst, taxonomy) {
                Ok(r) => resolved.push(r),
                Err(mut d) => diags.append(&mut d),
            }
        }
        if !resolved.is_empty() {
            stages.push(resolved);
        }
    }
    if diags.is_empty() {
        Ok(ResolvedPipeline { stages })
    } else {
        Err(diags)
    }
}

/// Checks class names, class roots, required keys and value domains.
/// An empty result means [`resolve_pipeline`] succeeds.
pub fn validate_pipeline(pipeline: &Pipeline, taxonomy: &Taxonomy) -> Vec<Diagnostic> {
    resolve_pipeline(pipeline, taxonomy).err().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patternspec::parse_dsl;

    fn diags(text: &str) -> Vec<Diagnostic> {
        validate_pipeline(&parse_dsl(text).unwrap(), &Taxonomy::default())
    }

    #[test]
    fn undeclared_counted_class() {
        let d = diags("pattern interval_count as a { start = TrackIn end = TrackOut counted = UndeclaredClass }");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].instance, "a");
        assert_eq!(d[0].key.as_deref(), Some("counted"));
    }

    #[test]
    fn alarm_count_instance_is_valid() {
        assert!(diags("pattern interval_count as alarms { start = TrackIn end = TrackOut counted = Alarm }").is_empty());
    }

    #[test]
    fn missing_preceding() {
        let d = diags("pattern elapsed_preceding as m { eventType = TrackIn }");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key.as_deref(), Some("preceding"));
        assert_eq!(d[0].message, "missing required parameter");
    }

    #[test]
    fn class_roots_are_checked() {
        let d = diags("pattern elapsed_maximum as m { start = Machine end = TrackOut entityType = Alarm }");
        let keys: Vec<_> = d.iter().map(|d| d.key.clone().unwrap()).collect();
        assert_eq!(keys, ["start", "entityType"]);
        let d = diags("pattern relate_preceding_aggregation as r { aggType = TrackIn }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("aggregation event class"));
    }

    #[test]
    fn aggregate_options() {
        let base = "eventType = Observation attribute = value";
        assert!(diags(&format!("pattern interval_aggregate as a {{ {base} agg = avg start = TrackIn end = TrackOut }}")).is_empty());
        assert!(diags(&format!("pattern interval_aggregate as a {{ {base} agg = avg window = \"all-per-resource\" }}")).is_empty());
        let d = diags(&format!("pattern interval_aggregate as a {{ {base} agg = avg }}"));
        assert_eq!(d.len(), 2, "{d:?}");
        let d = diags(&format!("pattern interval_aggregate as a {{ {base} agg = count_above start = TrackIn end = TrackOut }}"));
        assert_eq!(d[0].key.as_deref(), Some("threshold"));
        let d = diags(&format!("pattern interval_aggregate as a {{ {base} agg = median window = all_per_resource }}"));
        assert_eq!(d[0].key.as_deref(), Some("agg"));
        let d = diags(&format!("pattern interval_aggregate as a {{ {base} agg = avg window = daily }}"));
        assert_eq!(d[0].key.as_deref(), Some("window"));
    }

    #[test]
    fn defaults_are_filled_in() {
        let p = parse_dsl(
            "pattern relate_succeeding_aggregation as s {}\npattern derive_partof as d { start = TrackIn end = TrackOut part = Product materialize = false }\npattern elapsed_preceding as e { eventType = TrackIn preceding = Maintenance useDerived = false }",
        )
        .unwrap();
        let t = Taxonomy::default();
        let r = resolve_pipeline(&p, &t).unwrap();
        let all: Vec<_> = r.instances().collect();
        assert_eq!(
            all[0].config,
            PatternConfig::RelateSucceedingAggregation(AggregationConfig {
                agg_type: t.builtin(AGGREGATE),
                entity_type: t.builtin(PRODUCTION_ENTITY),
                recursive: false
            })
        );
        assert!(matches!(all[1].config, PatternConfig::DerivePartOf { whole, .. } if whole == t.builtin(PRODUCTION_ENTITY)));
        assert!(!all[1].materialize && all[1].use_derived);
        assert!(matches!(&all[2].config, PatternConfig::ElapsedPreceding { match_on, .. } if *match_on == [t.builtin(RESOURCE)]));
        assert!(!all[2].use_derived);
    }

    #[test]
    fn filter_needs_both_halves() {
        let d = diags("pattern elapsed_succeeding_same_type as dt { eventType = SwitchState filterAttribute = state }");
        assert_eq!(d.len(), 1);
        assert!(diags("pattern elapsed_succeeding_same_type as dt { eventType = SwitchState filterAttribute = state filterValue = Failed }").is_empty());
    }

    #[test]
    fn direction_is_required_and_checked() {
        assert_eq!(diags("pattern relate_partof as p {}")[0].message, "missing required parameter");
        assert!(diags("pattern relate_partof as p { direction = sideways }")[0].message.contains("unknown direction"));
        assert!(diags("pattern relate_partof as p { direction = \"part-to-whole\" eventEntity = Sensor }").is_empty());
    }
}
