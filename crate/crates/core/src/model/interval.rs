use std::collections::{BTreeMap, VecDeque};

use super::store::Store;
use super::taxonomy::{ClassId, PRODUCTION_ENTITY, RESOURCE};
use super::types::{EntityIdx, EventIdx};

/// A paired (start, end) occurrence for one resource, optionally narrowed to
/// one production entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub resource: EntityIdx,
    pub production_entity: Option<EntityIdx>,
    pub start: EventIdx,
    pub end: EventIdx,
}

impl Interval {
    /// Closed membership by total order.
    pub fn contains(&self, event: EventIdx) -> bool {
        self.start <= event && event <= self.end
    }
}

#[derive(Clone, Debug, Default)]
pub struct IntervalSet {
    /// Sorted by (resource, production entity, start).
    pub intervals: Vec<Interval>,
    pub warnings: Vec<String>,
    /// Starts never closed plus ends with nothing open.
    pub unmatched: usize,
}

/// Pairs start/end events per group with FIFO matching.
///
/// Groups are `(resource)` or `(resource, production entity)`. Within a group
/// events are scanned in total order; an event of the end type closes the
/// earliest open start if there is one, otherwise an event of the start type
/// opens a new interval. Unmatched starts and ends, and starts opened while
/// another is still open, are reported as warnings: one per kind of problem,
/// naming the first occurrence and how many more there were.
pub fn build_intervals(
    store: &Store,
    start: ClassId,
    end: ClassId,
    pair_on_production_entity: bool,
) -> IntervalSet {
    let tax = store.taxonomy();
    let resource_class = tax.builtin(RESOURCE);
    let pe_class = tax.builtin(PRODUCTION_ENTITY);
    let mut out = IntervalSet::default();
    let (mut overlaps, mut orphans, mut unclosed) = (Tally::default(), Tally::default(), Tally::default());

    for resource in store.entity_indices() {
        if !store.entity_is(resource, resource_class) {
            continue;
        }
        let mut groups: BTreeMap<Option<EntityIdx>, VecDeque<EventIdx>> = BTreeMap::new();
        let mut found: Vec<Interval> = Vec::new();
        for &ev in store.events_of(resource) {
            let is_start = store.event_is(ev, start);
            let is_end = store.event_is(ev, end);
            if !is_start && !is_end {
                continue;
            }
            let keys: Vec<Option<EntityIdx>> = if pair_on_production_entity {
                store
                    .event(ev)
                    .correlations
                    .iter()
                    .map(|c| c.entity)
                    .filter(|e| *e != resource && store.entity_is(*e, pe_class))
                    .map(Some)
                    .collect()
            } else {
                vec![None]
            };
            let mut last = None;
            for key in keys {
                if last == Some(key) {
                    continue;
                }
                last = Some(key);
                let open = groups.entry(key).or_default();
                if is_end && !open.is_empty() {
                    let s = open.pop_front().unwrap();
                    found.push(Interval {
                        resource,
                        production_entity: key,
                        start: s,
                        end: ev,
                    });
                } else if is_start {
                    if let Some(&prev) = open.back() {
                        overlaps.note(|| {
                            format!(
                                "overlapping intervals on {}: '{}' opens while '{}' is still open",
                                group_name(store, resource, key),
                                store.event(ev).id,
                                store.event(prev).id
                            )
                        });
                    }
                    open.push_back(ev);
                } else {
                    orphans.note(|| {
                        format!("end event '{}' on {} has no open start", store.event(ev).id, group_name(store, resource, key))
                    });
                }
            }
        }
        for (key, open) in groups {
            for s in open {
                unclosed.note(|| {
                    format!("start event '{}' on {} is never closed", store.event(s).id, group_name(store, resource, key))
                });
            }
        }
        found.sort();
        out.intervals.extend(found);
    }
    out.unmatched = orphans.count + unclosed.count;
    for tally in [overlaps, orphans, unclosed] {
        out.warnings.extend(tally.finish());
    }
    out
}

/// Counts one kind of problem, keeping only the first message so large logs
/// do not produce one warning per event.
#[derive(Default)]
struct Tally {
    count: usize,
    first: Option<String>,
}

impl Tally {
    fn note(&mut self, message: impl FnOnce() -> String) {
        self.count += 1;
        if self.first.is_none() {
            self.first = Some(message());
        }
    }

    fn finish(self) -> Option<String> {
        let first = self.first?;
        Some(match self.count {
            1 => first,
            n => format!("{first} ({} more like this)", n - 1),
        })
    }
}

fn group_name(store: &Store, resource: EntityIdx, pe: Option<EntityIdx>) -> String {
    match pe {
        Some(pe) => format!("({}, {})", store.entity(resource).id, store.entity(pe).id),
        None => format!("({})", store.entity(resource).id),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{Attributes, EntityRef, StoreBuilder, Taxonomy, Timestamp};

    fn store(events: &[(&str, &str, i64, &[&str])]) -> Store {
        let tax = Arc::new(Taxonomy::default());
        let mut b = StoreBuilder::new(tax.clone());
        b.add_entity("m1".into(), vec![tax.resolve("Machine").unwrap()], Attributes::new());
        b.add_entity("j1".into(), vec![tax.resolve("Job").unwrap()], Attributes::new());
        b.add_entity("j2".into(), vec![tax.resolve("Job").unwrap()], Attributes::new());
        for (id, ty, t, ents) in events {
            b.add_event(
                id.to_string(),
                tax.resolve(ty).unwrap(),
                Timestamp(*t),
                ents.iter().map(|e| EntityRef { id: e.to_string(), role: None }).collect(),
                Attributes::new(),
            );
        }
        b.build(true).unwrap().0
    }

    fn spans(s: &Store, set: &IntervalSet) -> Vec<(i64, i64)> {
        set.intervals
            .iter()
            .map(|i| (s.event(i.start).timestamp.0, s.event(i.end).timestamp.0))
            .collect()
    }

    fn classes(s: &Store) -> (ClassId, ClassId) {
        let t = s.taxonomy();
        (t.resolve("TrackIn").unwrap(), t.resolve("TrackOut").unwrap())
    }

    #[test]
    fn single_pair_forms_one_interval() {
        let s = store(&[("a", "TrackIn", 10, &["m1", "j1"]), ("b", "TrackOut", 14, &["m1", "j1"])]);
        let (i, o) = classes(&s);
        let set = build_intervals(&s, i, o, true);
        assert_eq!(spans(&s, &set), [(10, 14)]);
        assert_eq!(set.intervals[0].resource, s.entity_idx("m1").unwrap());
        assert_eq!(set.intervals[0].production_entity, s.entity_idx("j1"));
        assert!(set.warnings.is_empty());
    }

    #[test]
    fn unmatched_open_is_warned() {
        let s = store(&[("a", "TrackIn", 10, &["m1", "j1"])]);
        let (i, o) = classes(&s);
        let set = build_intervals(&s, i, o, true);
        assert!(set.intervals.is_empty());
        assert_eq!(set.warnings.len(), 1);
        assert_eq!(set.unmatched, 1);
    }

    #[test]
    fn overlapping_starts_pair_fifo() {
        let s = store(&[
            ("a", "TrackIn", 1, &["m1", "j1"]),
            ("b", "TrackIn", 2, &["m1", "j1"]),
            ("c", "TrackOut", 3, &["m1", "j1"]),
            ("d", "TrackOut", 4, &["m1", "j1"]),
        ]);
        let (i, o) = classes(&s);
        let set = build_intervals(&s, i, o, true);
        assert_eq!(spans(&s, &set), [(1, 3), (2, 4)]);
        assert_eq!(set.warnings.len(), 1);
        assert!(set.warnings[0].contains("overlapping"));
        assert_eq!(set.unmatched, 0);
    }

    #[test]
    fn grouping_on_resource_only_ignores_jobs() {
        let s = store(&[
            ("a", "TrackIn", 1, &["m1", "j1"]),
            ("b", "TrackOut", 2, &["m1", "j2"]),
        ]);
        let (i, o) = classes(&s);
        assert!(build_intervals(&s, i, o, true).intervals.is_empty());
        assert_eq!(spans(&s, &build_intervals(&s, i, o, false)), [(1, 2)]);
    }

    #[test]
    fn orphan_end_is_warned() {
        let s = store(&[("b", "TrackOut", 2, &["m1", "j1"])]);
        let (i, o) = classes(&s);
        let set = build_intervals(&s, i, o, true);
        assert_eq!(set.unmatched, 1);
        assert!(set.warnings[0].contains("no open start"));
    }

    #[test]
    fn repeated_problems_share_one_warning() {
        let s = store(&[("a", "TrackOut", 1, &["m1", "j1"]), ("b", "TrackOut", 2, &["m1", "j1"])]);
        let (i, o) = classes(&s);
        let set = build_intervals(&s, i, o, true);
        assert_eq!(set.unmatched, 2);
        assert_eq!(set.warnings, ["end event 'a' on (m1, j1) has no open start (1 more like this)"]);
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        proptest! {
            #[test]
            fn every_event_is_paired_once_or_unmatched(
                raw in proptest::collection::vec((any::<bool>(), 0i64..20, any::<bool>()), 0..40),
                by_job in any::<bool>(),
            ) {
                let ids: Vec<String> = (0..raw.len()).map(|i| format!("e{i}")).collect();
                let events: Vec<(&str, &str, i64, &[&str])> = raw
                    .iter()
                    .zip(&ids)
                    .map(|((open, t, first), id)| {
                        let ents: &[&str] = if *first { &["m1", "j1"] } else { &["m1", "j2"] };
                        (id.as_str(), if *open { "TrackIn" } else { "TrackOut" }, *t, ents)
                    })
                    .collect();
                let s = store(&events);
                let (i, o) = classes(&s);
                let set = build_intervals(&s, i, o, by_job);

                let mut used = std::collections::HashSet::new();
                for iv in &set.intervals {
                    prop_assert!(iv.start < iv.end);
                    prop_assert!(s.event_is(iv.start, i) && s.event_is(iv.end, o));
                    prop_assert!(used.insert(iv.start) && used.insert(iv.end));
                    prop_assert_eq!(iv.production_entity.is_some(), by_job);
                }
                prop_assert_eq!(2 * set.intervals.len() + set.unmatched, raw.len());
                prop_assert!(set.intervals.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
