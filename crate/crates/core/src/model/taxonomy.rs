//! Class hierarchy for events and entities.
//!
//! Two roots, `Event` and `Entity`, with `Resource`, `ProductionEntity` and
//! `Sensor` fixed directly under `Entity`. Everything else comes from the
//! default manufacturing vocabulary or from user declarations, which may add
//! classes or re-parent non-fixed default classes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

pub const EVENT: &str = "Event";
pub const ENTITY: &str = "Entity";
pub const RESOURCE: &str = "Resource";
pub const PRODUCTION_ENTITY: &str = "ProductionEntity";
pub const SENSOR: &str = "Sensor";
pub const AGGREGATE: &str = "Aggregate";

const FIXED: &[(&str, &[&str])] = &[
    (EVENT, &[]),
    (ENTITY, &[]),
    (RESOURCE, &[ENTITY]),
    (PRODUCTION_ENTITY, &[ENTITY]),
    (SENSOR, &[ENTITY]),
];

const DEFAULTS: &[(&str, &str)] = &[
    ("Machine", RESOURCE),
    ("Workstation", RESOURCE),
    ("Buffer", RESOURCE),
    ("AGV", RESOURCE),
    ("Operator", RESOURCE),
    ("Tool", RESOURCE),
    ("Job", PRODUCTION_ENTITY),
    ("Product", PRODUCTION_ENTITY),
    ("Component", PRODUCTION_ENTITY),
    ("ProductionLot", PRODUCTION_ENTITY),
    ("Batch", PRODUCTION_ENTITY),
    ("Order", PRODUCTION_ENTITY),
    ("TrackIn", EVENT),
    ("TrackOut", EVENT),
    ("Alarm", EVENT),
    ("Repair", EVENT),
    ("Maintenance", EVENT),
    ("Observation", EVENT),
    ("SwitchState", EVENT),
    ("SwitchTool", EVENT),
    (AGGREGATE, EVENT),
    ("Split", AGGREGATE),
    ("Merge", AGGREGATE),
    ("Consume", AGGREGATE),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("unknown class '{0}'")]
    UnknownClass(String),
    #[error("class '{class}' declares unknown parent '{parent}'")]
    UnknownParent { class: String, parent: String },
    #[error("subclass cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("class '{0}' does not reach Event or Entity")]
    Unrooted(String),
    #[error("class '{0}' is declared under both Event and Entity")]
    AmbiguousRoot(String),
    #[error("built-in class '{0}' cannot be redeclared")]
    FixedClass(String),
    #[error("invalid class name '{0}'")]
    InvalidName(String),
}

/// Immutable class hierarchy with precomputed reflexive-transitive closure.
#[derive(Clone, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<String>,
    by_name: HashMap<String, ClassId>,
    parents: Vec<Vec<ClassId>>,
    /// Bitset per class over all ancestors, the class itself included.
    ancestors: Vec<Vec<u64>>,
}

impl fmt::Debug for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taxonomy").field("classes", &self.names.len()).finish()
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Taxonomy::from_declarations(&BTreeMap::new()).expect("default taxonomy is acyclic")
    }
}

impl Taxonomy {
    /// Default vocabulary extended (or partially overridden) by `declarations`,
    /// a map from class name to its direct parents.
    pub fn from_declarations(
        declarations: &BTreeMap<String, Vec<String>>,
    ) -> Result<Taxonomy, TaxonomyError> {
        let mut decl: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (name, parents) in FIXED {
            decl.insert(name.to_string(), parents.iter().map(|p| p.to_string()).collect());
        }
        for (name, parent) in DEFAULTS {
            decl.insert(name.to_string(), vec![parent.to_string()]);
        }
        for (name, parents) in declarations {
            if !is_valid_name(name) {
                return Err(TaxonomyError::InvalidName(name.clone()));
            }
            if FIXED.iter().any(|(fixed, _)| fixed == name) {
                let current = &decl[name];
                if current != parents {
                    return Err(TaxonomyError::FixedClass(name.clone()));
                }
                continue;
            }
            let mut parents = parents.clone();
            parents.sort();
            parents.dedup();
            decl.insert(name.clone(), parents);
        }

        let names: Vec<String> = decl.keys().cloned().collect();
        let by_name: HashMap<String, ClassId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ClassId(i as u32)))
            .collect();
        let mut parents = Vec::with_capacity(names.len());
        for (name, ps) in &decl {
            let mut ids = Vec::with_capacity(ps.len());
            for p in ps {
                let id = by_name.get(p).ok_or_else(|| TaxonomyError::UnknownParent {
                    class: name.clone(),
                    parent: p.clone(),
                })?;
                ids.push(*id);
            }
            parents.push(ids);
        }

        if let Some(cycle) = find_cycle(&parents) {
            return Err(TaxonomyError::Cycle(
                cycle.into_iter().map(|c| names[c.index()].clone()).collect(),
            ));
        }

        let words = names.len().div_ceil(64);
        let mut ancestors: Vec<Option<Vec<u64>>> = vec![None; names.len()];
        for i in 0..names.len() {
            closure(ClassId(i as u32), &parents, &mut ancestors, words);
        }
        let ancestors: Vec<Vec<u64>> = ancestors.into_iter().map(Option::unwrap).collect();

        let taxonomy = Taxonomy {
            names,
            by_name,
            parents,
            ancestors,
        };
        let event = taxonomy.by_name[EVENT];
        let entity = taxonomy.by_name[ENTITY];
        for i in 0..taxonomy.names.len() {
            let c = ClassId(i as u32);
            let under_event = taxonomy.is_subclass(c, event);
            let under_entity = taxonomy.is_subclass(c, entity);
            match (under_event, under_entity) {
                (false, false) => return Err(TaxonomyError::Unrooted(taxonomy.names[i].clone())),
                (true, true) => {
                    return Err(TaxonomyError::AmbiguousRoot(taxonomy.names[i].clone()))
                }
                _ => {}
            }
        }
        Ok(taxonomy)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }

    pub fn resolve(&self, name: &str) -> Result<ClassId, TaxonomyError> {
        self.lookup(name)
            .ok_or_else(|| TaxonomyError::UnknownClass(name.to_string()))
    }

    pub fn name(&self, class: ClassId) -> &str {
        &self.names[class.index()]
    }

    pub fn parents(&self, class: ClassId) -> &[ClassId] {
        &self.parents[class.index()]
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len() as u32).map(ClassId)
    }

    /// Reflexive-transitive subsumption `sub ⊑ sup`.
    pub fn is_subclass(&self, sub: ClassId, sup: ClassId) -> bool {
        let bits = &self.ancestors[sub.index()];
        let i = sup.index();
        bits[i / 64] & (1u64 << (i % 64)) != 0
    }

    /// Name-based form of [`Taxonomy::is_subclass`]; unknown names are errors.
    pub fn is_subclass_named(&self, sub: &str, sup: &str) -> Result<bool, TaxonomyError> {
        Ok(self.is_subclass(self.resolve(sub)?, self.resolve(sup)?))
    }

    pub fn event_root(&self) -> ClassId {
        self.by_name[EVENT]
    }

    pub fn entity_root(&self) -> ClassId {
        self.by_name[ENTITY]
    }

    pub fn builtin(&self, name: &str) -> ClassId {
        self.by_name[name]
    }

    pub fn is_event_class(&self, class: ClassId) -> bool {
        self.is_subclass(class, self.event_root())
    }

    pub fn is_entity_class(&self, class: ClassId) -> bool {
        self.is_subclass(class, self.entity_root())
    }

    /// True when any class in `types` is subsumed by `sup`.
    pub fn any_subclass(&self, types: &[ClassId], sup: ClassId) -> bool {
        types.iter().any(|t| self.is_subclass(*t, sup))
    }

    /// Declarations that differ from the defaults, suitable for writing back
    /// to a taxonomy file.
    pub fn declarations(&self) -> BTreeMap<String, Vec<String>> {
        let baseline = Taxonomy::default();
        let mut out = BTreeMap::new();
        for c in self.classes() {
            let name = self.name(c);
            let parents: Vec<String> =
                self.parents(c).iter().map(|p| self.name(*p).to_string()).collect();
            let same = baseline
                .lookup(name)
                .map(|b| {
                    baseline
                        .parents(b)
                        .iter()
                        .map(|p| baseline.name(*p).to_string())
                        .collect::<Vec<_>>()
                        == parents
                })
                .unwrap_or(false);
            if !same {
                out.insert(name.to_string(), parents);
            }
        }
        out
    }
}

fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || c.is_control())
}

fn closure(
    class: ClassId,
    parents: &[Vec<ClassId>],
    memo: &mut Vec<Option<Vec<u64>>>,
    words: usize,
) {
    if memo[class.index()].is_some() {
        return;
    }
    let mut bits = vec![0u64; words];
    bits[class.index() / 64] |= 1 << (class.index() % 64);
    for &p in &parents[class.index()] {
        closure(p, parents, memo, words);
        let pb = memo[p.index()].as_ref().unwrap();
        for (w, pw) in bits.iter_mut().zip(pb) {
            *w |= pw;
        }
    }
    memo[class.index()] = Some(bits);
}

/// Returns one cycle (first node repeated at the end) if the parent graph has any.
fn find_cycle(parents: &[Vec<ClassId>]) -> Option<Vec<ClassId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; parents.len()];
    let mut path: Vec<ClassId> = Vec::new();

    fn visit(
        c: ClassId,
        parents: &[Vec<ClassId>],
        mark: &mut [Mark],
        path: &mut Vec<ClassId>,
    ) -> Option<Vec<ClassId>> {
        mark[c.index()] = Mark::Active;
        path.push(c);
        for &p in &parents[c.index()] {
            match mark[p.index()] {
                Mark::Active => {
                    let start = path.iter().position(|x| *x == p).unwrap();
                    let mut cycle = path[start..].to_vec();
                    cycle.push(p);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(cycle) = visit(p, parents, mark, path) {
                        return Some(cycle);
                    }
                }
                Mark::Done => {}
            }
        }
        path.pop();
        mark[c.index()] = Mark::Done;
        None
    }

    for i in 0..parents.len() {
        if mark[i] == Mark::New {
            if let Some(cycle) = visit(ClassId(i as u32), parents, &mut mark, &mut path) {
                return Some(cycle);
            }
        }
    }
    None
}
