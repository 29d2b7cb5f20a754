//! Reference semantics by exhaustive scans.
//!
//! Nothing here uses the interval builder, the per-entity event lists or
//! the part-of adjacency of the store: every question is answered by
//! walking the full event, entity or edge list and comparing total-order keys.

use std::collections::{BTreeMap, BTreeSet};

use crate::ingest::{dedup_facts, DerivedFact, Predicate};
use crate::model::{ClassId, EntityIdx, Event, Role, Scalar, Store, PRODUCTION_ENTITY, RESOURCE};
use crate::patterns::{AggFn, PatternResult};
use crate::patternspec::{AggregationConfig, Direction, PatternConfig, ResolvedInstance, Window};

/// Evaluates one resolved instance by brute force, honouring `useDerived`.
pub fn oracle_eval(instance: &ResolvedInstance, store: &Store) -> PatternResult {
    if instance.use_derived {
        oracle_eval_config(store, &instance.name, &instance.config)
    } else {
        oracle_eval_config(&store.without_derived(), &instance.name, &instance.config)
    }
}

pub fn oracle_eval_config(store: &Store, name: &str, config: &PatternConfig) -> PatternResult {
    let o = Oracle { store, name };
    let facts = match config {
        PatternConfig::IntervalCount {
            start,
            end,
            counted,
            pair_on_production_entity,
            counted_shares_production_entity,
        } => o.interval_count(*start, *end, *counted, *pair_on_production_entity, *counted_shares_production_entity),
        PatternConfig::IntervalAggregate { bounds, event_type, attribute, agg, window, pair_on_production_entity } => {
            match (window, bounds) {
                (Window::Interval, Some(b)) => {
                    o.interval_aggregate(*b, *event_type, attribute, *agg, *pair_on_production_entity)
                }
                _ => o.per_resource(*event_type, attribute, *agg),
            }
        }
        PatternConfig::ElapsedPreceding { event_type, preceding, match_on } => {
            o.elapsed_preceding(*event_type, *preceding, match_on)
        }
        PatternConfig::ElapsedSucceedingSameType { event_type, filter, match_on } => {
            o.elapsed_succeeding(*event_type, filter.as_ref(), match_on)
        }
        PatternConfig::ElapsedMaximum { start, end, entity_type } => o.elapsed_maximum(*start, *end, *entity_type),
        PatternConfig::RelatePreceding { event_type, preceding, target, match_on } => {
            o.relate_preceding(*event_type, *preceding, *target, match_on)
        }
        PatternConfig::RelatePartOf { direction, event_entity, other_entity } => {
            o.relate_partof(*direction, *event_entity, *other_entity)
        }
        PatternConfig::RelatePrecedingAggregation(cfg) => o.aggregation(cfg, true),
        PatternConfig::RelateSucceedingAggregation(cfg) => o.aggregation(cfg, false),
        PatternConfig::DerivePartOf { start, end, part, whole } => o.derive_partof(*start, *end, *part, *whole),
    };
    PatternResult { facts: dedup_facts(facts), ..PatternResult::default() }
}

struct Oracle<'a> {
    store: &'a Store,
    name: &'a str,
}

/// One paired interval, by position in `store.events()`.
struct Span {
    resource: usize,
    pe: Option<usize>,
    start: usize,
    end: usize,
}

impl Oracle<'_> {
    fn events(&self) -> &[Event] {
        self.store.events()
    }

    fn is_event(&self, i: usize, class: ClassId) -> bool {
        self.store.taxonomy().is_subclass(self.events()[i].class, class)
    }

    fn is_entity(&self, x: usize, class: ClassId) -> bool {
        self.store.entities()[x].types.iter().any(|&t| self.store.taxonomy().is_subclass(t, class))
    }

    fn corr(&self, i: usize, x: usize) -> bool {
        self.events()[i].correlations.iter().any(|c| c.entity.index() == x)
    }

    fn before(&self, a: usize, b: usize) -> bool {
        self.events()[a].key() < self.events()[b].key()
    }

    fn within(&self, c: usize, span: &Span) -> bool {
        let (k, s, e) = (self.events()[c].key(), self.events()[span.start].key(), self.events()[span.end].key());
        s <= k && k <= e
    }

    /// Event positions sorted by total order, independent of storage order.
    fn ordered(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.events().len()).collect();
        v.sort_by(|&a, &b| self.events()[a].key().cmp(&self.events()[b].key()));
        v
    }

    fn eid(&self, i: usize) -> &str {
        &self.events()[i].id
    }

    fn xid(&self, x: usize) -> &str {
        &self.store.entities()[x].id
    }

    fn spans(&self, start: ClassId, end: ClassId, pair: bool) -> Vec<Span> {
        let tax = self.store.taxonomy();
        let n_entities = self.store.entities().len();
        let order = self.ordered();
        let mut out = Vec::new();
        for r in (0..n_entities).filter(|&r| self.is_entity(r, tax.builtin(RESOURCE))) {
            let groups: Vec<Option<usize>> = if pair {
                (0..n_entities)
                    .filter(|&p| p != r && self.is_entity(p, tax.builtin(PRODUCTION_ENTITY)))
                    .map(Some)
                    .collect()
            } else {
                vec![None]
            };
            for pe in groups {
                let mut open: Vec<usize> = Vec::new();
                for &i in &order {
                    if !self.corr(i, r) || pe.is_some_and(|p| !self.corr(i, p)) {
                        continue;
                    }
                    if self.is_event(i, end) && !open.is_empty() {
                        let s = open.remove(0);
                        out.push(Span { resource: r, pe, start: s, end: i });
                    } else if self.is_event(i, start) {
                        open.push(i);
                    }
                }
            }
        }
        out
    }

    fn span_fact(&self, fact: DerivedFact, span: &Span, members: &[usize]) -> DerivedFact {
        let ids: Vec<&str> = members.iter().chain([&span.start, &span.end]).map(|&i| self.eid(i)).collect();
        fact.with_inputs(ids).with_interval(self.eid(span.start), self.eid(span.end))
    }

    fn interval_count(&self, start: ClassId, end: ClassId, counted: ClassId, pair: bool, shares: bool) -> Vec<DerivedFact> {
        let mut facts = Vec::new();
        for span in self.spans(start, end, pair) {
            let members: Vec<usize> = (0..self.events().len())
                .filter(|&c| self.within(c, &span) && self.is_event(c, counted) && self.corr(c, span.resource))
                .filter(|&c| !shares || span.pe.is_none_or(|p| self.corr(c, p)))
                .collect();
            let f = DerivedFact::measurement(self.name, "interval_count", self.eid(span.end), "count", members.len() as f64, "count");
            facts.push(self.span_fact(f, &span, &members));
        }
        facts
    }

    /// Numeric values in total order, plus the number of matching events.
    fn values(&self, members: &[usize], attribute: &str) -> Vec<f64> {
        let mut members = members.to_vec();
        members.sort_by(|&a, &b| self.events()[a].key().cmp(&self.events()[b].key()));
        members
            .iter()
            .filter_map(|&i| match self.events()[i].attributes.get(attribute) {
                Some(Scalar::Num(v)) => Some(*v),
                _ => None,
            })
            .collect()
    }

    fn interval_aggregate(&self, (start, end): (ClassId, ClassId), event_type: ClassId, attribute: &str, agg: AggFn, pair: bool) -> Vec<DerivedFact> {
        let mut facts = Vec::new();
        for span in self.spans(start, end, pair) {
            let members: Vec<usize> = (0..self.events().len())
                .filter(|&c| self.within(c, &span) && self.is_event(c, event_type) && self.corr(c, span.resource))
                .collect();
            if let Some(v) = agg.apply(&self.values(&members, attribute), members.len()) {
                let f = DerivedFact::measurement(self.name, "interval_aggregate", self.eid(span.end), agg.name(), v, agg.unit());
                facts.push(self.span_fact(f, &span, &members));
            }
        }
        facts
    }

    fn per_resource(&self, event_type: ClassId, attribute: &str, agg: AggFn) -> Vec<DerivedFact> {
        let resource = self.store.taxonomy().builtin(RESOURCE);
        let mut facts = Vec::new();
        for r in (0..self.store.entities().len()).filter(|&r| self.is_entity(r, resource)) {
            let members: Vec<usize> =
                (0..self.events().len()).filter(|&c| self.is_event(c, event_type) && self.corr(c, r)).collect();
            if let Some(v) = agg.apply(&self.values(&members, attribute), members.len()) {
                let ids: Vec<&str> = members.iter().map(|&i| self.eid(i)).collect();
                facts.push(
                    DerivedFact::measurement(self.name, "interval_aggregate", self.xid(r), agg.name(), v, agg.unit())
                        .with_inputs(ids),
                );
            }
        }
        facts
    }

    fn shares(&self, a: usize, b: usize, match_on: &[ClassId]) -> bool {
        match_on.iter().all(|&class| {
            (0..self.store.entities().len()).any(|x| self.corr(a, x) && self.corr(b, x) && self.is_entity(x, class))
        })
    }

    /// The closest qualifying event strictly before or after `anchor`.
    fn closest(&self, anchor: usize, class: ClassId, match_on: &[ClassId], forward: bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..self.events().len() {
            let side = if forward { self.before(anchor, j) } else { self.before(j, anchor) };
            if !side || !self.is_event(j, class) || !self.shares(anchor, j, match_on) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) if forward => self.before(j, b),
                Some(b) => self.before(b, j),
            };
            if better {
                best = Some(j);
            }
        }
        best
    }

    fn elapsed(&self, pattern: &str, subject: usize, from: usize, to: usize) -> DerivedFact {
        let v = self.events()[to].timestamp.0 - self.events()[from].timestamp.0;
        DerivedFact::measurement(self.name, pattern, self.eid(subject), "elapsed", v as f64, "ms")
            .with_inputs([self.eid(from), self.eid(to)])
    }

    fn elapsed_preceding(&self, event_type: ClassId, preceding: ClassId, match_on: &[ClassId]) -> Vec<DerivedFact> {
        (0..self.events().len())
            .filter(|&i| self.is_event(i, event_type))
            .filter_map(|i| self.closest(i, preceding, match_on, false).map(|j| self.elapsed("elapsed_preceding", i, j, i)))
            .collect()
    }

    fn elapsed_succeeding(&self, event_type: ClassId, filter: Option<&(String, Scalar)>, match_on: &[ClassId]) -> Vec<DerivedFact> {
        (0..self.events().len())
            .filter(|&i| self.is_event(i, event_type))
            .filter(|&i| filter.is_none_or(|(k, v)| self.events()[i].attributes.get(k) == Some(v)))
            .filter_map(|i| {
                self.closest(i, event_type, match_on, true)
                    .map(|j| self.elapsed("elapsed_succeeding_same_type", i, i, j))
            })
            .collect()
    }

    fn elapsed_maximum(&self, start: ClassId, end: ClassId, entity_type: ClassId) -> Vec<DerivedFact> {
        let mut facts = Vec::new();
        for x in (0..self.store.entities().len()).filter(|&x| self.is_entity(x, entity_type)) {
            let mut first: Option<usize> = None;
            let mut last: Option<usize> = None;
            for i in (0..self.events().len()).filter(|&i| self.corr(i, x)) {
                if self.is_event(i, start) && first.is_none_or(|f| self.before(i, f)) {
                    first = Some(i);
                }
                if self.is_event(i, end) && last.is_none_or(|l| self.before(l, i)) {
                    last = Some(i);
                }
            }
            if let (Some(s), Some(e)) = (first, last) {
                let v = self.events()[e].timestamp.0 - self.events()[s].timestamp.0;
                if v >= 0 {
                    facts.push(
                        DerivedFact::measurement(self.name, "elapsed_maximum", self.xid(x), "elapsed_max", v as f64, "ms")
                            .with_inputs([self.eid(s), self.eid(e)]),
                    );
                }
            }
        }
        facts
    }

    fn relation(&self, pattern: &str, e: usize, x: usize) -> DerivedFact {
        DerivedFact::relation(self.name, pattern, self.eid(e), Predicate::CorrelatesTo, self.xid(x))
    }

    fn relate_preceding(&self, event_type: ClassId, preceding: ClassId, target: ClassId, match_on: &[ClassId]) -> Vec<DerivedFact> {
        let mut facts = Vec::new();
        for i in (0..self.events().len()).filter(|&i| self.is_event(i, event_type)) {
            if let Some(j) = self.closest(i, preceding, match_on, false) {
                for x in (0..self.store.entities().len()).filter(|&x| self.corr(j, x) && self.is_entity(x, target)) {
                    facts.push(self.relation("relate_preceding", i, x).with_inputs([self.eid(i), self.eid(j)]));
                }
            }
        }
        facts
    }

    fn relate_partof(&self, direction: Direction, event_entity: Option<ClassId>, other_entity: Option<ClassId>) -> Vec<DerivedFact> {
        let ok = |x: usize, f: Option<ClassId>| f.is_none_or(|c| self.is_entity(x, c));
        let mut facts = Vec::new();
        for edge in self.store.part_of_edges() {
            let (from, to) = match direction {
                Direction::WholeToPart => (edge.whole.index(), edge.part.index()),
                Direction::PartToWhole => (edge.part.index(), edge.whole.index()),
            };
            if !ok(from, event_entity) || !ok(to, other_entity) {
                continue;
            }
            for i in (0..self.events().len()).filter(|&i| self.corr(i, from) && !self.corr(i, to)) {
                facts.push(self.relation("relate_partof", i, to).with_inputs([self.eid(i)]));
            }
        }
        facts
    }

    fn aggregation(&self, cfg: &AggregationConfig, preceding: bool) -> Vec<DerivedFact> {
        let pattern = if preceding { "relate_preceding_aggregation" } else { "relate_succeeding_aggregation" };
        let n_entities = self.store.entities().len();
        let tagged = |a: usize, role: Role| -> Vec<usize> {
            (0..n_entities)
                .filter(|&x| {
                    self.events()[a].correlations.iter().any(|c| c.entity == EntityIdx(x as u32) && c.role == Some(role))
                })
                .filter(|&x| self.is_entity(x, cfg.entity_type))
                .collect()
        };
        let aggs: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..self.events().len())
            .filter(|&a| self.is_event(a, cfg.agg_type))
            .filter(|&a| self.events()[a].correlations.iter().any(|c| c.role.is_some()))
            .map(|a| {
                let (i, o) = (tagged(a, Role::Input), tagged(a, Role::Output));
                if preceding { (a, i, o) } else { (a, o, i) }
            })
            .collect();

        // (event, entity) pairs known to be correlated; grows when recursive
        let mut known: BTreeSet<(usize, usize)> = BTreeSet::new();
        for i in 0..self.events().len() {
            for x in 0..n_entities {
                if self.corr(i, x) {
                    known.insert((i, x));
                }
            }
        }
        let mut found: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        loop {
            let mut new_pairs = Vec::new();
            for (a, from, to) in &aggs {
                for &(e, x) in &known {
                    let side = if preceding { self.before(e, *a) } else { self.before(*a, e) };
                    if !side || !from.contains(&x) {
                        continue;
                    }
                    for &y in to {
                        found.entry((e, y)).or_default().insert(*a);
                        if !known.contains(&(e, y)) {
                            new_pairs.push((e, y));
                        }
                    }
                }
            }
            if !cfg.recursive || new_pairs.is_empty() {
                break;
            }
            known.extend(new_pairs);
        }
        found
            .into_iter()
            .flat_map(|((e, y), via)| {
                via.into_iter().map(move |a| self.relation(pattern, e, y).with_inputs([self.eid(e), self.eid(a)]))
            })
            .collect()
    }

    fn derive_partof(&self, start: ClassId, end: ClassId, part: ClassId, whole: ClassId) -> Vec<DerivedFact> {
        let mut facts = Vec::new();
        for span in self.spans(start, end, true) {
            let Some(w) = span.pe.filter(|&w| self.is_entity(w, whole)) else {
                continue;
            };
            for c in (0..self.events().len()).filter(|&c| self.within(c, &span) && self.corr(c, span.resource)) {
                for p in (0..self.store.entities().len()).filter(|&p| p != w && self.corr(c, p) && self.is_entity(p, part)) {
                    let f = DerivedFact::relation(self.name, "derive_partof", self.xid(p), Predicate::IsPartOf, self.xid(w));
                    facts.push(self.span_fact(f, &span, &[c]));
                }
            }
        }
        facts
    }
}
