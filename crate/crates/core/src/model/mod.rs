//! Event knowledge graph data model.

mod interval;
mod store;
mod taxonomy;
mod types;

pub use interval::{build_intervals, Interval, IntervalSet};
pub use store::{EntityRef, Store, StoreBuilder, StoreError};
pub use taxonomy::{
    ClassId, Taxonomy, TaxonomyError, AGGREGATE, ENTITY, EVENT, PRODUCTION_ENTITY, RESOURCE,
    SENSOR,
};
pub use types::{
    compare_events, Attributes, Correlation, Entity, EntityIdx, Event, EventIdx, PartOfEdge, Role,
    Scalar, Timestamp, TotalOrderKey,
};

pub(crate) use types::serialize_number;
