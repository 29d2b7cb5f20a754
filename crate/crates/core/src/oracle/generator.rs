//! Seeded flow-shop log generator.
//!
//! Each lot's products are transported by an AGV and wait in a buffer. The
//! lot is then inspected at a lot workstation and processed on the machines
//! in turn. It may be split and merged, its products are batched, and one
//! product may be assembled from a component. Machines carry sensors and
//! tools, raise alarms and occasionally fail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{
    EntityRecord, EntityRefRecord, EventRecord, Predicate, Record, RelationRecord, TimestampFormat,
};
use crate::model::{Attributes, Role, Scalar, Timestamp};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub machines: usize,
    /// Machine steps per lot.
    pub jobs: usize,
    pub lots: usize,
    pub products_per_lot: usize,
    /// Expected sensor observations per machine step.
    pub sensor_rate: f64,
    /// Probability of an alarm per machine step; failures happen at half
    /// this rate.
    pub alarm_rate: f64,
    pub split_probability: f64,
    pub merge_probability: f64,
    pub consume_probability: f64,
    /// Lot `n` is released no earlier than `n * horizon / lots` ms.
    pub horizon: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            machines: 3,
            jobs: 3,
            lots: 8,
            products_per_lot: 3,
            sensor_rate: 2.0,
            alarm_rate: 0.3,
            split_probability: 0.3,
            merge_probability: 0.3,
            consume_probability: 0.5,
            horizon: 10_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} must be a finite number >= 0, got {value}")]
    Rate { name: &'static str, value: f64 },
    #[error("machine steps need at least one machine")]
    NoMachines,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        for (name, value) in [
            ("alarmRate", self.alarm_rate),
            ("splitProbability", self.split_probability),
            ("mergeProbability", self.merge_probability),
            ("consumeProbability", self.consume_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(GeneratorError::Probability { name, value });
            }
        }
        if !self.sensor_rate.is_finite() || self.sensor_rate < 0.0 {
            return Err(GeneratorError::Rate { name: "sensorRate", value: self.sensor_rate });
        }
        if self.machines == 0 && self.jobs > 0 {
            return Err(GeneratorError::NoMachines);
        }
        Ok(())
    }
}

/// Generates the whole log in emission order.
pub fn generate_dataset(config: &GeneratorConfig) -> Result<Vec<Record>, GeneratorError> {
    let mut out = Vec::new();
    generate_into(config, |r| out.push(r))?;
    Ok(out)
}

/// Streams the log to `sink`. The config is validated before anything is
/// emitted.
pub fn generate_into(config: &GeneratorConfig, sink: impl FnMut(Record)) -> Result<(), GeneratorError> {
    config.validate()?;
    let mut g = Gen { cfg: config, rng: ChaCha8Rng::seed_from_u64(config.seed), clock: 0, next_event: 0, sink };
    g.run();
    Ok(())
}

const WS_LOT: &str = "ws-lot";
const WS_BATCH: &str = "ws-batch";
const WS_ASM: &str = "ws-asm";
const BUFFER: &str = "buf";
const COMPONENT_BUFFER: &str = "cbuf";
const AGV: &str = "agv";

struct Gen<'a, F> {
    cfg: &'a GeneratorConfig,
    rng: ChaCha8Rng,
    clock: i64,
    next_event: u64,
    sink: F,
}

fn refs(ids: &[&str]) -> Vec<EntityRefRecord> {
    ids.iter().map(|id| EntityRefRecord { id: id.to_string(), role: None }).collect()
}

fn machine_id(k: usize) -> String {
    format!("m{k:02}")
}

impl<F: FnMut(Record)> Gen<'_, F> {
    fn entity(&mut self, id: &str, class: &str) {
        (self.sink)(Record::Entity(EntityRecord {
            id: id.to_string(),
            types: vec![class.to_string()],
            attributes: Attributes::new(),
        }));
    }

    fn part_of(&mut self, part: &str, whole: &str) {
        (self.sink)(Record::Relation(RelationRecord {
            subject: part.to_string(),
            predicate: Predicate::IsPartOf,
            object: whole.to_string(),
        }));
    }

    fn tick(&mut self, max_step: i64) -> Timestamp {
        self.clock += self.rng.random_range(1..=max_step);
        Timestamp(self.clock)
    }

    fn event_full(&mut self, class: &str, step: i64, entities: Vec<EntityRefRecord>, attributes: Attributes) {
        let timestamp = self.tick(step);
        let id = format!("e{:07}", self.next_event);
        self.next_event += 1;
        (self.sink)(Record::Event(EventRecord {
            id,
            event_type: class.to_string(),
            timestamp,
            timestamp_format: TimestampFormat::Integer,
            entities,
            attributes,
        }));
    }

    fn event(&mut self, class: &str, step: i64, entities: &[&str]) {
        self.event_full(class, step, refs(entities), Attributes::new());
    }

    fn event_attr(&mut self, class: &str, step: i64, entities: &[&str], key: &str, value: Scalar) {
        self.event_full(class, step, refs(entities), [(key, value)].into_iter().collect());
    }

    /// Forces every enabled feature on the first two lots so small logs still
    /// cover every pattern.
    fn chance(&mut self, lot: usize, p: f64) -> bool {
        p > 0.0 && (lot < 2 || self.rng.random_bool(p))
    }

    fn visit(&mut self, resource: &str, entity: &str, dwell: i64) {
        self.event("TrackIn", 3, &[resource, entity]);
        self.event("TrackOut", dwell, &[resource, entity]);
    }

    fn run(&mut self) {
        let cfg = self.cfg;
        for k in 0..cfg.machines {
            let m = machine_id(k);
            self.entity(&m, "Machine");
            let sensor = format!("s{k:02}");
            self.entity(&sensor, "Sensor");
            self.part_of(&sensor, &m);
            for t in ["a", "b"] {
                self.entity(&format!("{m}-tool-{t}"), "Tool");
            }
        }
        for (id, class) in [
            (WS_LOT, "Workstation"),
            (WS_BATCH, "Workstation"),
            (WS_ASM, "Workstation"),
            (BUFFER, "Buffer"),
            (COMPONENT_BUFFER, "Buffer"),
            (AGV, "AGV"),
        ] {
            self.entity(id, class);
        }

        // the lot currently eligible to be merged with the next one
        let mut live: Option<String> = None;
        for n in 0..cfg.lots {
            let release = (n as u64).saturating_mul(cfg.horizon) / cfg.lots as u64;
            self.clock = self.clock.max(release as i64);
            live = Some(self.lot(n, live));
        }
    }

    fn lot(&mut self, n: usize, previous: Option<String>) -> String {
        let cfg = self.cfg;
        let lot = format!("L{n:05}");
        self.entity(&lot, "ProductionLot");
        let products: Vec<String> = (0..cfg.products_per_lot).map(|i| format!("P{n:05}-{i}")).collect();
        for p in &products {
            self.entity(p, "Product");
            self.part_of(p, &lot);
        }

        for p in &products {
            self.visit(AGV, p, 20);
            self.visit(BUFFER, p, 40);
        }

        self.event("TrackIn", 5, &[WS_LOT, &lot]);
        for p in &products {
            let result = if self.rng.random_bool(0.9) { "ok" } else { "defect" };
            self.event_attr("Observation", 5, &[WS_LOT, p], "result", Scalar::Str(result.into()));
        }
        let rejected = self.rng.random_range(0..=2);
        self.event_attr("TrackOut", 5, &[WS_LOT, &lot], "quantityRejected", Scalar::Num(rejected as f64));

        for k in 0..cfg.jobs {
            self.machine_step(n, k, &lot);
        }

        let mut current = lot;
        if self.chance(n, cfg.split_probability) {
            let children = [format!("{current}a"), format!("{current}b")];
            for c in &children {
                self.entity(c, "ProductionLot");
            }
            let entities = vec![
                EntityRefRecord { id: WS_LOT.to_string(), role: None },
                EntityRefRecord { id: current.clone(), role: Some(Role::Input) },
                EntityRefRecord { id: children[0].clone(), role: Some(Role::Output) },
                EntityRefRecord { id: children[1].clone(), role: Some(Role::Output) },
            ];
            self.event_full("Split", 5, entities, Attributes::new());
            for c in &children {
                self.visit(WS_LOT, c, 10);
            }
            current = children[0].clone();
        }
        if let Some(prev) = previous.filter(|_| cfg.merge_probability > 0.0) {
            if n < 2 || self.rng.random_bool(cfg.merge_probability) {
                let merged = format!("M{n:05}");
                self.entity(&merged, "ProductionLot");
                let entities = vec![
                    EntityRefRecord { id: WS_LOT.to_string(), role: None },
                    EntityRefRecord { id: prev, role: Some(Role::Input) },
                    EntityRefRecord { id: current.clone(), role: Some(Role::Input) },
                    EntityRefRecord { id: merged.clone(), role: Some(Role::Output) },
                ];
                self.event_full("Merge", 5, entities, Attributes::new());
                self.visit(WS_LOT, &merged, 10);
                current = merged;
            }
        }

        if !products.is_empty() {
            let batch = format!("B{n:05}");
            self.entity(&batch, "Batch");
            self.event("TrackIn", 5, &[WS_BATCH, &batch]);
            for p in &products {
                let v = self.rng.random_range(20.0..30.0_f64);
                self.event_attr("Observation", 3, &[WS_BATCH, p], "value", Scalar::Num(round2(v)));
            }
            self.event("TrackOut", 5, &[WS_BATCH, &batch]);
        }

        if let Some(product) = products.first() {
            if self.chance(n, cfg.consume_probability) {
                let component = format!("C{n:05}");
                self.entity(&component, "Component");
                self.visit(COMPONENT_BUFFER, &component, 30);
                self.event("TrackIn", 5, &[WS_ASM, product]);
                let entities = vec![
                    EntityRefRecord { id: WS_ASM.to_string(), role: None },
                    EntityRefRecord { id: component.clone(), role: Some(Role::Input) },
                    EntityRefRecord { id: product.clone(), role: Some(Role::Output) },
                ];
                self.event_full("Consume", 5, entities, Attributes::new());
                self.event("TrackOut", 5, &[WS_ASM, product]);
            }
        }
        current
    }

    fn machine_step(&mut self, n: usize, k: usize, lot: &str) {
        let cfg = self.cfg;
        let idx = k % cfg.machines;
        let m = machine_id(idx);
        let job = format!("J{n:05}-{k}");
        self.entity(&job, "Job");

        if self.chance(n, 0.25) {
            self.event("Maintenance", 10, &[&m]);
        }
        if self.chance(n, 0.3) {
            let tool = format!("{m}-tool-{}", if self.rng.random_bool(0.5) { "a" } else { "b" });
            self.event("SwitchTool", 5, &[&m, &tool]);
        }
        self.event("TrackIn", 10, &[&m, lot, &job]);
        let whole = cfg.sensor_rate.floor();
        let observations = whole as usize + usize::from(self.rng.random_bool(cfg.sensor_rate - whole));
        let sensor = format!("s{idx:02}");
        for _ in 0..observations {
            let v = self.rng.random_range(40.0..60.0_f64);
            self.event_attr("Observation", 4, &[&sensor], "value", Scalar::Num(round2(v)));
        }
        if self.chance(n, cfg.alarm_rate) {
            self.event("Alarm", 4, &[&m]);
        }
        if self.chance(n, cfg.alarm_rate / 2.0) {
            self.event_attr("SwitchState", 3, &[&m], "state", Scalar::Str("Failed".into()));
            self.event("Repair", 15, &[&m]);
            self.event_attr("SwitchState", 10, &[&m], "state", Scalar::Str("Working".into()));
        }
        self.event("TrackOut", 10, &[&m, lot, &job]);
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_records;

    fn bytes(cfg: &GeneratorConfig) -> Vec<u8> {
        let mut out = Vec::new();
        write_records(&generate_dataset(cfg).unwrap(), &mut out).unwrap();
        out
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GeneratorConfig::default();
        assert_eq!(bytes(&cfg), bytes(&cfg));
        assert_ne!(bytes(&cfg), bytes(&GeneratorConfig { seed: 7, ..cfg }));
    }

    #[test]
    fn no_split_or_merge_means_no_aggregation_events() {
        let cfg = GeneratorConfig { split_probability: 0.0, merge_probability: 0.0, ..Default::default() };
        let records = generate_dataset(&cfg).unwrap();
        assert!(!records.iter().any(|r| matches!(r, Record::Event(e) if e.event_type == "Split" || e.event_type == "Merge")));
    }

    #[test]
    fn rejects_bad_config_before_emitting() {
        let cfg = GeneratorConfig { split_probability: 1.5, ..Default::default() };
        let mut emitted = 0;
        let err = generate_into(&cfg, |_| emitted += 1).unwrap_err();
        assert!(matches!(err, GeneratorError::Probability { name: "splitProbability", .. }));
        assert_eq!(emitted, 0);
        let nan = GeneratorConfig { sensor_rate: f64::NAN, ..Default::default() };
        assert!(nan.validate().is_err());
        let none = GeneratorConfig { machines: 0, ..Default::default() };
        assert_eq!(none.validate(), Err(GeneratorError::NoMachines));
    }

    #[test]
    fn timestamps_strictly_increase() {
        let records = generate_dataset(&GeneratorConfig::default()).unwrap();
        let times: Vec<i64> = records
            .iter()
            .filter_map(|r| match r {
                Record::Event(e) => Some(e.timestamp.0),
                _ => None,
            })
            .collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }
}
