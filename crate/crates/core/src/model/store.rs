use std::collections::HashMap;
use std::sync::Arc;

use compact_str::CompactString;
use thiserror::Error;

use super::taxonomy::{ClassId, Taxonomy};
use super::types::{
    Attributes, Correlation, Entity, EntityIdx, Event, EventIdx, PartOfEdge, Role, Timestamp,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("duplicate entity id '{0}'")]
    DuplicateEntity(String),
    #[error("duplicate event id '{0}'")]
    DuplicateEvent(String),
    #[error("entity '{id}' has no type")]
    Untyped { id: String },
    #[error("event '{event}' references unknown entity '{entity}'")]
    DanglingCorrelation { event: String, entity: String },
    #[error("relation references unknown {what} '{id}'")]
    DanglingRelation { what: &'static str, id: String },
    #[error("'{0}' cannot be part of itself")]
    SelfPartOf(String),
    #[error("isPartOf '{part}' -> '{whole}' closes a cycle")]
    PartOfCycle { part: String, whole: String },
}

#[derive(Clone, Debug)]
pub struct EntityRef {
    pub id: String,
    pub role: Option<Role>,
}

#[derive(Clone, Debug)]
struct PendingEvent {
    id: String,
    class: ClassId,
    timestamp: Timestamp,
    attributes: Attributes,
    entities: Vec<EntityRef>,
}

/// Collects raw records; [`StoreBuilder::build`] resolves references and
/// freezes everything into a [`Store`].
#[derive(Debug)]
pub struct StoreBuilder {
    taxonomy: Arc<Taxonomy>,
    entities: Vec<Entity>,
    events: Vec<PendingEvent>,
    part_of: Vec<(String, String)>,
    extra_correlations: Vec<(String, String)>,
}

impl StoreBuilder {
    pub fn new(taxonomy: Arc<Taxonomy>) -> Self {
        StoreBuilder {
            taxonomy,
            entities: Vec::new(),
            events: Vec::new(),
            part_of: Vec::new(),
            extra_correlations: Vec::new(),
        }
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn add_entity(&mut self, id: String, mut types: Vec<ClassId>, attributes: Attributes) {
        types.sort();
        types.dedup();
        self.entities.push(Entity { id: id.into(), types, attributes });
    }

    pub fn add_event(
        &mut self,
        id: String,
        class: ClassId,
        timestamp: Timestamp,
        entities: Vec<EntityRef>,
        attributes: Attributes,
    ) {
        self.events.push(PendingEvent { id, class, timestamp, attributes, entities });
    }

    pub fn add_part_of(&mut self, part: String, whole: String) {
        self.part_of.push((part, whole));
    }

    /// Base correlation stated as a separate relation record.
    pub fn add_correlation(&mut self, event: String, entity: String) {
        self.extra_correlations.push((event, entity));
    }

    /// With `strict`, every dangling reference or part-of cycle is an error.
    /// Otherwise offending events/relations are dropped and reported in the
    /// returned warnings.
    pub fn build(self, strict: bool) -> Result<(Store, Vec<String>), StoreError> {
        let mut warnings = Vec::new();

        let mut entities = self.entities;
        entities.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in entities.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(StoreError::DuplicateEntity(pair[0].id.to_string()));
            }
        }
        if let Some(e) = entities.iter().find(|e| e.types.is_empty()) {
            return Err(StoreError::Untyped { id: e.id.to_string() });
        }
        let entity_by_id: HashMap<CompactString, EntityIdx> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), EntityIdx(i as u32)))
            .collect();

        let mut pending = self.events;
        pending.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.id.as_bytes().cmp(b.id.as_bytes()))
        });
        for pair in pending.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(StoreError::DuplicateEvent(pair[0].id.clone()));
            }
        }
        // same id at two timestamps is not adjacent after sorting
        {
            let mut seen: HashMap<&str, ()> = HashMap::with_capacity(pending.len());
            for p in &pending {
                if seen.insert(p.id.as_str(), ()).is_some() {
                    return Err(StoreError::DuplicateEvent(p.id.clone()));
                }
            }
        }

        let mut events = Vec::with_capacity(pending.len());
        'events: for p in pending {
            let mut correlations = Vec::with_capacity(p.entities.len());
            for r in &p.entities {
                match entity_by_id.get(r.id.as_str()) {
                    Some(&entity) => correlations.push(Correlation { entity, role: r.role, derived: false }),
                    None => {
                        let err = StoreError::DanglingCorrelation {
                            event: p.id.clone(),
                            entity: r.id.clone(),
                        };
                        if strict {
                            return Err(err);
                        }
                        warnings.push(format!("{err}; event dropped"));
                        continue 'events;
                    }
                }
            }
            correlations.sort();
            correlations.dedup();
            events.push(Event {
                id: p.id.into(),
                class: p.class,
                timestamp: p.timestamp,
                attributes: p.attributes,
                correlations,
            });
        }
        let event_by_id: HashMap<CompactString, EventIdx> = events
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), EventIdx(i as u32)))
            .collect();

        let mut store = Store {
            taxonomy: self.taxonomy,
            by_entity: Vec::new(),
            parts_of: vec![Vec::new(); entities.len()],
            wholes_of: vec![Vec::new(); entities.len()],
            entities,
            events,
            entity_by_id,
            event_by_id,
            part_of: Vec::new(),
        };

        for (event, entity) in self.extra_correlations {
            let ev = store.event_idx(&event);
            let en = store.entity_idx(&entity);
            match (ev, en) {
                (Some(ev), Some(en)) => {
                    store.insert_correlation(ev, en, false);
                }
                (ev, _) => {
                    let err = if ev.is_none() {
                        StoreError::DanglingRelation { what: "event", id: event }
                    } else {
                        StoreError::DanglingRelation { what: "entity", id: entity }
                    };
                    if strict {
                        return Err(err);
                    }
                    warnings.push(format!("{err}; relation dropped"));
                }
            }
        }

        for (part, whole) in self.part_of {
            let (Some(p), Some(w)) = (store.entity_idx(&part), store.entity_idx(&whole)) else {
                let missing = if store.entity_idx(&part).is_none() { part } else { whole };
                let err = StoreError::DanglingRelation { what: "entity", id: missing };
                if strict {
                    return Err(err);
                }
                warnings.push(format!("{err}; relation dropped"));
                continue;
            };
            match store.insert_part_of(p, w, false) {
                Ok(_) => {}
                Err(err) if strict => return Err(err),
                Err(err) => warnings.push(format!("{err}; relation dropped")),
            }
        }

        store.rebuild_index();
        Ok((store, warnings))
    }
}

/// Frozen event knowledge graph. Events are stored in total order and
/// per-entity event lists are sorted the same way.
#[derive(Clone, Debug)]
pub struct Store {
    taxonomy: Arc<Taxonomy>,
    entities: Vec<Entity>,
    events: Vec<Event>,
    entity_by_id: HashMap<CompactString, EntityIdx>,
    event_by_id: HashMap<CompactString, EventIdx>,
    part_of: Vec<PartOfEdge>,
    by_entity: Vec<Vec<EventIdx>>,
    parts_of: Vec<Vec<EntityIdx>>,
    wholes_of: Vec<Vec<EntityIdx>>,
}

impl Store {
    pub fn empty(taxonomy: Arc<Taxonomy>) -> Store {
        StoreBuilder::new(taxonomy).build(true).expect("empty store").0
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn taxonomy_arc(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn event(&self, idx: EventIdx) -> &Event {
        &self.events[idx.index()]
    }

    pub fn entity(&self, idx: EntityIdx) -> &Entity {
        &self.entities[idx.index()]
    }

    pub fn event_idx(&self, id: &str) -> Option<EventIdx> {
        self.event_by_id.get(id).copied()
    }

    pub fn entity_idx(&self, id: &str) -> Option<EntityIdx> {
        self.entity_by_id.get(id).copied()
    }

    pub fn event_indices(&self) -> impl DoubleEndedIterator<Item = EventIdx> + ExactSizeIterator {
        (0..self.events.len() as u32).map(EventIdx)
    }

    pub fn entity_indices(&self) -> impl DoubleEndedIterator<Item = EntityIdx> + ExactSizeIterator {
        (0..self.entities.len() as u32).map(EntityIdx)
    }

    /// Events correlated to `entity`, in total order.
    pub fn events_of(&self, entity: EntityIdx) -> &[EventIdx] {
        &self.by_entity[entity.index()]
    }

    pub fn part_of_edges(&self) -> &[PartOfEdge] {
        &self.part_of
    }

    /// Direct parts of `whole`, sorted.
    pub fn parts_of(&self, whole: EntityIdx) -> &[EntityIdx] {
        &self.parts_of[whole.index()]
    }

    /// Direct wholes containing `part`, sorted.
    pub fn wholes_of(&self, part: EntityIdx) -> &[EntityIdx] {
        &self.wholes_of[part.index()]
    }

    pub fn has_part_of(&self, part: EntityIdx, whole: EntityIdx) -> bool {
        self.wholes_of[part.index()].binary_search(&whole).is_ok()
    }

    pub fn event_is(&self, event: EventIdx, class: ClassId) -> bool {
        self.taxonomy.is_subclass(self.events[event.index()].class, class)
    }

    pub fn entity_is(&self, entity: EntityIdx, class: ClassId) -> bool {
        self.taxonomy.any_subclass(&self.entities[entity.index()].types, class)
    }

    /// Entities correlated to `event` whose type is subsumed by `filter`,
    /// restricted to `role` when given. Sorted by id, without duplicates.
    pub fn correlated_entities(
        &self,
        event: EventIdx,
        filter: ClassId,
        role: Option<Role>,
    ) -> Vec<EntityIdx> {
        let mut out: Vec<EntityIdx> = self.events[event.index()]
            .correlations
            .iter()
            .filter(|c| role.is_none() || c.role == role)
            .filter(|c| self.entity_is(c.entity, filter))
            .map(|c| c.entity)
            .collect();
        out.dedup();
        out
    }

    /// Id-based form of [`Store::correlated_entities`].
    pub fn correlated_entity_ids(
        &self,
        event: &str,
        filter: &str,
        role: Option<Role>,
    ) -> Result<Vec<&str>, super::TaxonomyError> {
        let filter = self.taxonomy.resolve(filter)?;
        let Some(ev) = self.event_idx(event) else {
            return Ok(Vec::new());
        };
        Ok(self
            .correlated_entities(ev, filter, role)
            .into_iter()
            .map(|e| self.entities[e.index()].id.as_str())
            .collect())
    }

    pub fn time_range(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.events.first()?.timestamp, self.events.last()?.timestamp))
    }

    pub fn has_derived(&self) -> bool {
        self.part_of.iter().any(|e| e.derived)
            || self.events.iter().any(|e| e.correlations.iter().any(|c| c.derived))
    }

    /// Copy with every derived correlation and part-of edge removed.
    /// Derived attributes are kept.
    pub fn without_derived(&self) -> Store {
        let mut out = self.clone();
        for e in &mut out.events {
            e.correlations.retain(|c| !c.derived);
        }
        out.part_of.retain(|e| !e.derived);
        for v in out.parts_of.iter_mut().chain(out.wholes_of.iter_mut()) {
            v.clear();
        }
        for edge in out.part_of.clone() {
            insert_sorted(&mut out.parts_of[edge.whole.index()], edge.part);
            insert_sorted(&mut out.wholes_of[edge.part.index()], edge.whole);
        }
        out.rebuild_index();
        out
    }

    // ---- mutation used while building and materializing ----

    /// Adds a correlation unless one to the same entity already exists.
    /// Call [`Store::rebuild_index`] afterwards.
    pub(crate) fn insert_correlation(
        &mut self,
        event: EventIdx,
        entity: EntityIdx,
        derived: bool,
    ) -> bool {
        let ev = &mut self.events[event.index()];
        if ev.correlates_to(entity) {
            return false;
        }
        let c = Correlation { entity, role: None, derived };
        let pos = ev.correlations.partition_point(|x| *x < c);
        ev.correlations.insert(pos, c);
        true
    }

    /// Adds `part isPartOf whole`; returns `Ok(false)` when the edge exists.
    pub(crate) fn insert_part_of(
        &mut self,
        part: EntityIdx,
        whole: EntityIdx,
        derived: bool,
    ) -> Result<bool, StoreError> {
        if part == whole {
            return Err(StoreError::SelfPartOf(self.entities[part.index()].id.to_string()));
        }
        if self.has_part_of(part, whole) {
            return Ok(false);
        }
        if self.reaches_whole(whole, part) {
            return Err(StoreError::PartOfCycle {
                part: self.entities[part.index()].id.to_string(),
                whole: self.entities[whole.index()].id.to_string(),
            });
        }
        let edge = PartOfEdge { part, whole, derived };
        let pos = self.part_of.partition_point(|e| (e.part, e.whole) < (part, whole));
        self.part_of.insert(pos, edge);
        insert_sorted(&mut self.parts_of[whole.index()], part);
        insert_sorted(&mut self.wholes_of[part.index()], whole);
        Ok(true)
    }

    /// True if following isPartOf edges upward from `from` reaches `target`.
    fn reaches_whole(&self, from: EntityIdx, target: EntityIdx) -> bool {
        let mut stack = vec![from];
        let mut seen = std::collections::HashSet::new();
        while let Some(x) = stack.pop() {
            if x == target {
                return true;
            }
            if seen.insert(x) {
                stack.extend_from_slice(&self.wholes_of[x.index()]);
            }
        }
        false
    }

    pub(crate) fn event_mut(&mut self, idx: EventIdx) -> &mut Event {
        &mut self.events[idx.index()]
    }

    pub(crate) fn entity_mut(&mut self, idx: EntityIdx) -> &mut Entity {
        &mut self.entities[idx.index()]
    }

    pub(crate) fn rebuild_index(&mut self) {
        let mut by_entity: Vec<Vec<EventIdx>> = vec![Vec::new(); self.entities.len()];
        for (i, ev) in self.events.iter().enumerate() {
            let mut last = None;
            for c in &ev.correlations {
                if last != Some(c.entity) {
                    by_entity[c.entity.index()].push(EventIdx(i as u32));
                    last = Some(c.entity);
                }
            }
        }
        self.by_entity = by_entity;
    }
}

fn insert_sorted(v: &mut Vec<EntityIdx>, x: EntityIdx) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}
