//! Reference semantics and test data.
//!
//! [`oracle_eval`] recomputes any pattern by exhaustive scans, sharing no
//! interval or index code with the engines. [`generate_dataset`] produces a
//! seeded manufacturing log that exercises every pattern, and the `random`
//! module builds small adversarial stores and instances for equivalence runs.

mod generator;
mod naive;
pub mod random;

pub use generator::{generate_dataset, generate_into, GeneratorConfig, GeneratorError};
pub use naive::{oracle_eval, oracle_eval_config};

use crate::ingest::DerivedFact;

/// The default pattern file written next to generated data. It expresses
/// every use case of the ten patterns against the generator's vocabulary.
pub const DEFAULT_PATTERNS: &str = include_str!("../../assets/default.patterns");

/// One line per fact: instance, pattern and identity. Provenance inputs and
/// intervals are left out, so two fact sets compare equal exactly when they
/// state the same facts under the same instances.
pub fn normalize(facts: &[DerivedFact]) -> Vec<String> {
    let mut out: Vec<String> = facts
        .iter()
        .map(|f| {
            let id = f.identity();
            format!(
                "{} {} {} {} {} {:?}",
                f.instance,
                f.provenance.pattern,
                id.kind.as_str(),
                id.subject,
                id.label,
                id.target
            )
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Describes how two normalized fact sets differ, or `None` when they agree.
pub fn diff(engine: &[DerivedFact], oracle: &[DerivedFact]) -> Option<String> {
    let (a, b) = (normalize(engine), normalize(oracle));
    if a == b {
        return None;
    }
    let only_engine: Vec<&String> = a.iter().filter(|x| b.binary_search(x).is_err()).collect();
    let only_oracle: Vec<&String> = b.iter().filter(|x| a.binary_search(x).is_err()).collect();
    Some(format!("engine only: {only_engine:?}\noracle only: {only_oracle:?}"))
}
