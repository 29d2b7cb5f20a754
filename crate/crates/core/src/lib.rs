pub mod ingest;
pub mod model;
pub mod oracle;
pub mod patterns;
pub mod patternspec;

#[cfg(test)]
mod testkit;
