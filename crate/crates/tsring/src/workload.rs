//! Workload scripts, one command per line:
//!
//! ```text
//! # comments and blank lines are ignored
//! load CAC40 data/cac40.xml --core 1024 --halo 128
//! query "MAVG(CAC40,10)" --from 2000-01-03 --to 2000-06-30
//! stats
//! ```
//!
//! Relative file paths resolve against the script's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use tsring_core::expr::parse;
use tsring_core::peer::{Metrics, QueryOutcome, SimConfig, Simulation};
use tsring_core::segment::SegmentSpec;
use tsring_core::{Expr, Granularity, Timestamp};

use crate::io::{parse_timestamp, read_series};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Load {
        name: String,
        path: PathBuf,
        core: Option<usize>,
        halo: Option<usize>,
    },
    Query {
        expr: Expr,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    },
    Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub step: Step,
}

/// Splits on whitespace; double quotes group words.
fn tokenize(line: &str) -> anyhow::Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut started = false;
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                started = true;
            }
            c if c.is_whitespace() && !quoted => {
                if started {
                    out.push(std::mem::take(&mut cur));
                    started = false;
                }
            }
            c => {
                cur.push(c);
                started = true;
            }
        }
    }
    if quoted {
        bail!("unterminated quote");
    }
    if started {
        out.push(cur);
    }
    Ok(out)
}

fn flags<'a>(rest: &'a [String], allowed: &[&str]) -> anyhow::Result<Vec<(&'a str, &'a str)>> {
    let mut out = Vec::new();
    let mut it = rest.iter();
    while let Some(flag) = it.next() {
        if !allowed.contains(&flag.as_str()) {
            bail!("unexpected argument {flag:?}");
        }
        let value = it.next().ok_or_else(|| anyhow!("{flag} needs a value"))?;
        out.push((flag.as_str(), value.as_str()));
    }
    Ok(out)
}

fn timestamp(text: &str) -> anyhow::Result<Timestamp> {
    parse_timestamp(text).ok_or_else(|| anyhow!("{text:?} is not an ISO date"))
}

fn parse_line(words: &[String]) -> anyhow::Result<Step> {
    match words[0].as_str() {
        "load" => {
            let [_, name, path, rest @ ..] = words else {
                bail!("usage: load <name> <file> [--core N --halo N]");
            };
            let (mut core, mut halo) = (None, None);
            for (flag, value) in flags(rest, &["--core", "--halo"])? {
                let n: usize = value.parse().with_context(|| format!("{flag} {value:?}"))?;
                match flag {
                    "--core" => core = Some(n),
                    _ => halo = Some(n),
                }
            }
            Ok(Step::Load {
                name: name.clone(),
                path: path.into(),
                core,
                halo,
            })
        }
        "query" => {
            let [_, expr, rest @ ..] = words else {
                bail!("usage: query \"<expr>\" [--from ISO --to ISO]");
            };
            let expr = parse(expr).with_context(|| format!("in expression {expr:?}"))?;
            let (mut from, mut to) = (None, None);
            for (flag, value) in flags(rest, &["--from", "--to"])? {
                match flag {
                    "--from" => from = Some(timestamp(value)?),
                    _ => to = Some(timestamp(value)?),
                }
            }
            Ok(Step::Query { expr, from, to })
        }
        "stats" if words.len() == 1 => Ok(Step::Stats),
        "stats" => bail!("stats takes no arguments"),
        other => bail!("unknown command {other:?}"),
    }
}

pub fn parse_script(text: &str) -> anyhow::Result<Vec<ScriptLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let step = tokenize(trimmed)
            .and_then(|words| parse_line(&words))
            .with_context(|| format!("script line {line}"))?;
        out.push(ScriptLine { line, step });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ScriptReport {
    pub metrics: Metrics,
    pub trace_digest: String,
    pub outcomes: Vec<QueryOutcome>,
    /// Human-readable progress, one line per command.
    pub log: String,
    pub trace: Option<Vec<String>>,
}

pub fn run_script(
    script: &[ScriptLine],
    base_dir: &Path,
    config: SimConfig,
    granularity: Option<Granularity>,
) -> anyhow::Result<ScriptReport> {
    let default_spec = config.spec;
    let mut sim = Simulation::new(config)?;
    let mut outcomes = Vec::new();
    let mut log = String::new();
    for ScriptLine { line, step } in script {
        let ctx = || format!("script line {line}");
        match step {
            Step::Load {
                name,
                path,
                core,
                halo,
            } => {
                let path = base_dir.join(path);
                let (series, _) = read_series(&path, granularity)
                    .with_context(|| format!("{}", path.display()))
                    .with_context(ctx)?;
                let spec = SegmentSpec::new(
                    core.unwrap_or(default_spec.core_len),
                    halo.unwrap_or(default_spec.halo),
                )
                .with_context(ctx)?;
                sim.load_series_with(name, &series, spec)
                    .with_context(ctx)?;
                let _ = writeln!(
                    log,
                    "load {name}: {} values, {} segments",
                    series.len(),
                    spec.segment_count(series.len())
                );
            }
            Step::Query { expr, from, to } => {
                let out = sim.query(expr, *from, *to).with_context(ctx)?;
                let _ = writeln!(
                    log,
                    "query {}: {} values, computed {}, cache hits {}, messages {}",
                    out.name,
                    out.series.len(),
                    out.metrics.segments_computed,
                    out.metrics.cache_hits,
                    out.metrics.messages
                );
                outcomes.push(out);
            }
            Step::Stats => {
                log.push_str("stats\n");
                for l in sim.metrics().to_string().lines() {
                    let _ = writeln!(log, "  {l}");
                }
            }
        }
        sim.check_coherence().with_context(ctx)?;
    }
    Ok(ScriptReport {
        metrics: sim.metrics(),
        trace_digest: sim.trace_digest(),
        outcomes,
        log,
        trace: sim.trace_lines().map(<[String]>::to_vec),
    })
}
