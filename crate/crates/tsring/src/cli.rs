use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use tsring_core::expr::{evaluate, parse};
use tsring_core::peer::{Metrics, SimConfig, Simulation};
use tsring_core::segment::SegmentSpec;
use tsring_core::{Granularity, TimeSeries};

use crate::bench::{run_bench, BenchArgs};
use crate::config::Defaults;
use crate::io::{parse_timestamp, read_series, write_series, Format};
use crate::workload::{parse_script, run_script};
use crate::{metrics_document, trace_document};

#[derive(Debug, Parser)]
#[command(
    name = "tsring",
    version,
    about = "Time-series expressions over a simulated peer-to-peer cache"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one expression, centrally or on a simulated network.
    Run(RunArgs),
    /// Execute a workload script on a simulated network.
    Sim(SimArgs),
    /// Synthetic cold/warm benchmark over several network sizes.
    Bench(BenchCli),
}

#[derive(Debug, Args)]
pub struct Tuning {
    /// Segment core length.
    #[arg(long)]
    pub core: Option<usize>,
    /// Segment halo length.
    #[arg(long)]
    pub halo: Option<usize>,
    /// Per-peer cache capacity in segments.
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Seed for ring ids and tie breaks.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Tuning {
    fn config(&self, peers: Option<usize>) -> anyhow::Result<SimConfig> {
        let d = Defaults::load()?;
        let mut c = d.sim_config()?;
        c.spec = SegmentSpec::new(self.core.unwrap_or(d.core), self.halo.unwrap_or(d.halo))?;
        c.cache_capacity = self.capacity.unwrap_or(d.capacity);
        c.seed = self.seed.unwrap_or(d.seed);
        c.peers = peers.unwrap_or(d.peers);
        Ok(c)
    }
}

fn granularity(s: &str) -> Result<Granularity, String> {
    s.parse().map_err(|e: tsring_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Expression to evaluate, e.g. "MACD(LVMH,12,26,9)".
    #[arg(long)]
    pub expr: String,
    /// Input series as [NAME=]FILE; the name defaults to the file stem.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<String>,
    /// Simulate this many peers.
    #[arg(long, conflicts_with = "central")]
    pub peers: Option<usize>,
    /// Evaluate in-process without a network (the default).
    #[arg(long)]
    pub central: bool,
    /// First timestamp of the result (inclusive).
    #[arg(long)]
    pub from: Option<String>,
    /// Last timestamp of the result (inclusive).
    #[arg(long)]
    pub to: Option<String>,
    /// Result file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metrics document file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Message trace file (distributed runs).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output format; defaults to the format of the first input.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Calendar unit instead of the inferred one.
    #[arg(long, value_parser = granularity)]
    pub granularity: Option<Granularity>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Workload script; relative paths in it resolve against its directory.
    #[arg(long)]
    pub script: PathBuf,
    /// Number of simulated peers.
    #[arg(long)]
    pub peers: Option<usize>,
    /// Metrics document file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Message trace file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Calendar unit instead of the inferred one.
    #[arg(long, value_parser = granularity)]
    pub granularity: Option<Granularity>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct BenchCli {
    /// Length of the synthetic series.
    #[arg(long)]
    pub values: usize,
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,128")]
    pub peers: Vec<usize>,
    /// Moving-average window.
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    /// Warm runs after each cold run.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Seed for the synthetic series and the network.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Metrics document file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub core: Option<usize>,
    #[arg(long)]
    pub halo: Option<usize>,
    #[arg(long)]
    pub capacity: Option<usize>,
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn timestamp(flag: &str, text: Option<&String>) -> anyhow::Result<Option<tsring_core::Timestamp>> {
    text.map(|t| parse_timestamp(t).ok_or_else(|| anyhow!("{flag}: {t:?} is not an ISO date")))
        .transpose()
}

fn load_data(
    specs: &[String],
    gran: Option<Granularity>,
) -> anyhow::Result<(Vec<(String, TimeSeries)>, Format)> {
    let mut out = Vec::new();
    let mut first_format = None;
    for spec in specs {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let stem = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| anyhow!("cannot name series from {spec:?}"))?
                    .to_string();
                (stem, p)
            }
        };
        let (series, format) =
            read_series(&path, gran).with_context(|| format!("{}", path.display()))?;
        first_format.get_or_insert(format);
        out.push((name, series));
    }
    Ok((out, first_format.unwrap_or(Format::Xml)))
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let expr = parse(&args.expr).with_context(|| format!("--expr {:?}", args.expr))?;
    let (data, input_format) = load_data(&args.data, args.granularity)?;
    let from = timestamp("--from", args.from.as_ref())?;
    let to = timestamp("--to", args.to.as_ref())?;
    let format = args.format.unwrap_or(input_format);

    let (result, doc, trace) = match args.peers {
        None => {
            let store: BTreeMap<String, TimeSeries> = data.into_iter().collect();
            let full = evaluate(&expr, &store)?;
            let cal = full.calendar();
            let first = from.map(|t| cal.index(t)).transpose()?.unwrap_or(0);
            let last = to
                .map(|t| cal.index(t))
                .transpose()?
                .unwrap_or(full.len().saturating_sub(1));
            anyhow::ensure!(first <= last, "--from is after --to");
            let doc = format!("mode: central\n{}", Metrics::default());
            (full.slice(first, last + 1), doc, None)
        }
        Some(peers) => {
            let mut config = args.tuning.config(Some(peers))?;
            config.record_trace = args.trace.is_some();
            let mut sim = Simulation::new(config)?;
            for (name, series) in &data {
                sim.load_series(name, series)
                    .with_context(|| format!("loading {name}"))?;
            }
            let out = sim.query(&expr, from, to)?;
            sim.check_coherence()?;
            let head = format!("mode: distributed\npeers: {peers}\n");
            let doc = head + &metrics_document(&sim.metrics(), &sim.trace_digest());
            (out.series, doc, sim.trace_lines().map(<[String]>::to_vec))
        }
    };
    if let Some(path) = &args.metrics {
        write_or_print(Some(path), &doc)?;
    }
    if let (Some(path), Some(lines)) = (&args.trace, trace) {
        write_or_print(Some(path), &trace_document(&lines))?;
    }
    write_or_print(args.out.as_deref(), &write_series(&result, format))
}

pub fn sim(args: &SimArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.script)
        .with_context(|| format!("reading {}", args.script.display()))?;
    let script = parse_script(&text)?;
    let mut config = args.tuning.config(args.peers)?;
    config.record_trace = args.trace.is_some();
    let base = args.script.parent().unwrap_or(Path::new("."));
    let report = run_script(&script, base, config, args.granularity)?;
    print!("{}", report.log);
    let doc = metrics_document(&report.metrics, &report.trace_digest);
    match &args.metrics {
        Some(p) => write_or_print(Some(p), &doc)?,
        None => print!("{doc}"),
    }
    if let (Some(path), Some(lines)) = (&args.trace, &report.trace) {
        write_or_print(Some(path), &trace_document(lines))?;
    }
    Ok(())
}

pub fn bench(args: &BenchCli) -> anyhow::Result<()> {
    let tuning = Tuning {
        core: args.core,
        halo: args.halo,
        capacity: args.capacity,
        seed: Some(args.seed),
    };
    let report = run_bench(&BenchArgs {
        values: args.values,
        peers: args.peers.clone(),
        window: args.window,
        repeat: args.repeat,
        seed: args.seed,
        base: tuning.config(None)?,
    })?;
    print!("{}", report.table());
    for (step, elapsed) in &report.timings {
        eprintln!("elapsed {step}: {:.3} ms", elapsed.as_secs_f64() * 1e3);
    }
    if let Some(path) = &args.metrics {
        write_or_print(Some(path), &report.document())?;
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run(a) => run(a),
        Command::Sim(a) => sim(a),
        Command::Bench(a) => bench(a),
    }
}
