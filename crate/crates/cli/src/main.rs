use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use trace_enrich::ingest::{
    load_store, load_taxonomy, taxonomy_to_json, write_facts, write_records, IngestError, Loaded,
};
use trace_enrich::model::{Store, Taxonomy};
use trace_enrich::oracle::{self, GeneratorConfig, DEFAULT_PATTERNS};
use trace_enrich::patterns::{run_instance, run_pipeline, Counters};
use trace_enrich::patternspec::{parse_pattern_file, resolve_pipeline, ResolvedPipeline};

/// Derive facts from manufacturing event logs with production-trace patterns.
#[derive(Parser)]
#[command(name = "trace-enrich", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pattern file over event data and write the derived facts.
    Enrich(EnrichArgs),
    /// Load event data and report problems.
    Validate(DataArgs),
    /// Write a synthetic log and the matching default pattern file.
    Generate(GenerateArgs),
    /// Print event and entity counts.
    Stats(DataArgs),
    /// Check every pattern engine against the brute-force reference.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Event log files (JSONL); may be repeated.
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Taxonomy file (JSON); the built-in taxonomy when omitted.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Treat every data warning as an error.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct EnrichArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Pattern file, DSL or JSON form.
    #[arg(long)]
    patterns: PathBuf,
    /// Output file for derived facts (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Instances of one stage that may run at the same time.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Write counters, warnings and timings as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Pattern file, DSL or JSON form.
    #[arg(long)]
    patterns: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator seed; equal seeds give identical files.
    #[arg(long)]
    seed: u64,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Number of machines (default 3).
    #[arg(long)]
    machines: Option<usize>,
    /// Machine steps per lot.
    #[arg(long)]
    jobs: Option<usize>,
    /// Number of lots (default 8).
    #[arg(long)]
    lots: Option<usize>,
    /// Products per lot (default 3).
    #[arg(long)]
    products_per_lot: Option<usize>,
    /// Expected sensor observations per machine step (default 2).
    #[arg(long)]
    sensor_rate: Option<f64>,
    /// Alarm probability per machine step (default 0.3).
    #[arg(long)]
    alarm_rate: Option<f64>,
    /// Probability that a lot splits in two (default 0.3).
    #[arg(long)]
    split_probability: Option<f64>,
    /// Probability that a lot merges with the previous one (default 0.3).
    #[arg(long)]
    merge_probability: Option<f64>,
    /// Probability that a component is assembled into a product (default 0.5).
    #[arg(long)]
    consume_probability: Option<f64>,
    /// Lot release horizon in ms.
    #[arg(long)]
    horizon: Option<u64>,
}

impl GenerateArgs {
    fn config(&self) -> GeneratorConfig {
        let d = GeneratorConfig::default();
        GeneratorConfig {
            seed: self.seed,
            machines: self.machines.unwrap_or(d.machines),
            jobs: self.jobs.unwrap_or(d.jobs),
            lots: self.lots.unwrap_or(d.lots),
            products_per_lot: self.products_per_lot.unwrap_or(d.products_per_lot),
            sensor_rate: self.sensor_rate.unwrap_or(d.sensor_rate),
            alarm_rate: self.alarm_rate.unwrap_or(d.alarm_rate),
            split_probability: self.split_probability.unwrap_or(d.split_probability),
            merge_probability: self.merge_probability.unwrap_or(d.merge_probability),
            consume_probability: self.consume_probability.unwrap_or(d.consume_probability),
            horizon: self.horizon.unwrap_or(d.horizon),
        }
    }
}

/// A failed command: the exit status plus what to tell the user.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

const DATA: u8 = 1;
const PATTERNS: u8 = 2;
const IO: u8 = 3;

impl Failure {
    fn new(code: u8, message: impl fmt::Display) -> Failure {
        Failure { code, message: message.to_string() }
    }

    fn io(path: &Path, err: io::Error) -> Failure {
        Failure::new(IO, format!("{}: {err}", path.display()))
    }
}

impl From<IngestError> for Failure {
    fn from(err: IngestError) -> Failure {
        let code = if err.is_io() { IO } else { DATA };
        Failure::new(code, err)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TRACE_ENRICH_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enrich(args) => enrich(args),
        Command::Validate(args) => validate(args),
        Command::Generate(args) => generate(args),
        Command::Stats(args) => stats(args),
        Command::Oracle(args) => check_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn taxonomy(args: &DataArgs) -> Result<Arc<Taxonomy>, Failure> {
    match &args.taxonomy {
        Some(path) => Ok(Arc::new(load_taxonomy(path)?)),
        None => Ok(Arc::new(Taxonomy::default())),
    }
}

fn load(args: &DataArgs, taxonomy: Arc<Taxonomy>) -> Result<Loaded, Failure> {
    let loaded = load_store(&args.data, taxonomy, args.strict)?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    Ok(loaded)
}

fn pipeline(path: &Path, taxonomy: &Taxonomy) -> Result<ResolvedPipeline, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let parsed = parse_pattern_file(&text).map_err(|e| Failure::new(PATTERNS, format!("{}:{e}", path.display())))?;
    resolve_pipeline(&parsed, taxonomy).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}: {d}", path.display())).collect();
        Failure::new(PATTERNS, lines.join("\n"))
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Report<'a> {
    events: usize,
    entities: usize,
    facts: usize,
    novel_facts: usize,
    jobs: u16,
    load_warnings: &'a [String],
    warnings: &'a [String],
    instances: Vec<InstanceEntry<'a>>,
    elapsed_ms: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct InstanceEntry<'a> {
    name: &'a str,
    pattern: &'static str,
    stage: u32,
    facts: usize,
    novel: usize,
    warnings: usize,
    counters: Counters,
    elapsed_ms: f64,
}

fn enrich(args: EnrichArgs) -> CmdResult {
    let started = Instant::now();
    let tax = taxonomy(&args.input)?;
    // the pattern file is checked first so a typo fails before a long load
    let resolved = pipeline(&args.patterns, &tax)?;
    let loaded = load(&args.input, tax)?;
    let (events, entities) = (loaded.store.events().len(), loaded.store.entities().len());
    let out = run_pipeline(loaded.store, &resolved, args.jobs as usize);
    for w in &out.warnings {
        log::warn!("{w}");
    }
    write_facts(&out.facts, &args.out).map_err(|e| Failure::io(&args.out, e))?;
    log::info!("{} facts written to {}", out.facts.len(), args.out.display());

    if let Some(path) = &args.report {
        let report = Report {
            events,
            entities,
            facts: out.facts.len(),
            novel_facts: out.novel(),
            jobs: args.jobs,
            load_warnings: &loaded.warnings,
            warnings: &out.warnings,
            instances: out
                .reports
                .iter()
                .map(|r| InstanceEntry {
                    name: &r.name,
                    pattern: r.pattern.name(),
                    stage: r.stage,
                    facts: r.facts,
                    novel: r.novel,
                    warnings: r.warnings,
                    counters: r.counters,
                    elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
                })
                .collect(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        fs::write(path, json).map_err(|e| Failure::io(path, e))?;
    }
    Ok(())
}

fn validate(args: DataArgs) -> CmdResult {
    let loaded = load(&args, taxonomy(&args)?)?;
    let s = &loaded.store;
    println!(
        "{} events, {} entities, {} part-of edges, {} warnings",
        s.events().len(),
        s.entities().len(),
        s.part_of_edges().len(),
        loaded.warnings.len()
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> CmdResult {
    let config = args.config();
    config.validate().map_err(|e| Failure::new(PATTERNS, e))?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;

    let log_path = args.out.join("log.jsonl");
    let file = fs::File::create(&log_path).map_err(|e| Failure::io(&log_path, e))?;
    let records = oracle::generate_dataset(&config).map_err(|e| Failure::new(PATTERNS, e))?;
    write_records(&records, file).map_err(|e| Failure::io(&log_path, e))?;

    let tax_path = args.out.join("taxonomy.json");
    fs::write(&tax_path, taxonomy_to_json(&Taxonomy::default())).map_err(|e| Failure::io(&tax_path, e))?;
    let patterns_path = args.out.join("default.patterns");
    fs::write(&patterns_path, DEFAULT_PATTERNS).map_err(|e| Failure::io(&patterns_path, e))?;
    log::info!("{} records written to {}", records.len(), log_path.display());
    Ok(())
}

fn stats(args: DataArgs) -> CmdResult {
    let loaded = load(&args, taxonomy(&args)?)?;
    print!("{}", stats_table(&loaded.store));
    Ok(())
}

fn stats_table(store: &Store) -> String {
    let tax = store.taxonomy();
    let mut events: BTreeMap<&str, usize> = BTreeMap::new();
    for e in store.events() {
        *events.entry(tax.name(e.class)).or_default() += 1;
    }
    let mut entities: BTreeMap<&str, usize> = BTreeMap::new();
    for x in store.entities() {
        for &t in &x.types {
            *entities.entry(tax.name(t)).or_default() += 1;
        }
    }
    let mut degrees: BTreeMap<usize, usize> = BTreeMap::new();
    for e in store.events() {
        let mut ids: Vec<_> = e.correlations.iter().map(|c| c.entity).collect();
        ids.dedup();
        *degrees.entry(ids.len()).or_default() += 1;
    }

    let mut out = String::new();
    out += &format!("events\t{}\n", store.events().len());
    out += &format!("entities\t{}\n", store.entities().len());
    out += &format!("part-of edges\t{}\n", store.part_of_edges().len());
    match store.time_range() {
        Some((a, b)) => out += &format!("time range\t{}..{}\n", a.0, b.0),
        None => out += "time range\t-\n",
    }
    for (class, n) in &events {
        out += &format!("event {class}\t{n}\n");
    }
    for (class, n) in &entities {
        out += &format!("entity {class}\t{n}\n");
    }
    for (degree, n) in &degrees {
        out += &format!("degree {degree}\t{n}\n");
    }
    out
}

fn check_oracle(args: OracleArgs) -> CmdResult {
    let tax = taxonomy(&args.input)?;
    let resolved = pipeline(&args.patterns, &tax)?;
    let store = load(&args.input, tax)?.store;
    let mut failed = 0;
    for inst in resolved.instances() {
        let engine = run_instance(&store, inst);
        let reference = oracle::oracle_eval(inst, &store);
        match oracle::diff(&engine.facts, &reference.facts) {
            None => println!("ok\t{}\t{} facts", inst.name, engine.facts.len()),
            Some(d) => {
                failed += 1;
                println!("MISMATCH\t{}\n{d}", inst.name);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::new(DATA, format!("{failed} instances disagree with the reference")));
    }
    Ok(())
}
