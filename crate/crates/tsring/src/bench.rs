//! Synthetic benchmark: a random walk loaded on networks of several sizes,
//! queried with a moving average and MACD, cold then warm.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsring_core::expr::{evaluate, parse};
use tsring_core::peer::{Metrics, SimConfig, Simulation};
use tsring_core::{Calendar, Error, Granularity, TimeSeries, TsValue};

pub const SERIES: &str = "S";

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub values: usize,
    pub peers: Vec<usize>,
    pub window: usize,
    pub repeat: usize,
    pub seed: u64,
    pub base: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: String,
    pub query: &'static str,
    pub phase: &'static str,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub args: BenchArgs,
    pub rows: Vec<BenchRow>,
    pub digests: Vec<(String, String)>,
    /// Real elapsed time per step, for humans only.
    pub timings: Vec<(String, Duration)>,
}

/// Random walk of `n` steps in `[-0.5, 0.5)` starting at 100, one value per
/// second.
pub fn random_walk(n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 100.0;
    let values = (0..n)
        .map(|_| {
            level += rng.random::<f64>() - 0.5;
            TsValue::Real(level)
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(2000, 1, 3)
        .and_then(|d| d.and_hms_opt(9, 0, 0))
        .expect("valid start");
    TimeSeries::new(Calendar::new(start, Granularity::Second, n), values).expect("lengths agree")
}

fn same(a: &TimeSeries, b: &TimeSeries) -> bool {
    a.calendar() == b.calendar()
        && a.values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| match (x, y) {
                (TsValue::Real(x), TsValue::Real(y)) => {
                    (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
                }
                _ => x == y,
            })
}

pub fn run_bench(args: &BenchArgs) -> anyhow::Result<BenchReport> {
    if args.values == 0 {
        return Err(Error::Config("--values must be at least 1".into()).into());
    }
    if args.peers.is_empty() || args.peers.contains(&0) {
        return Err(Error::Config("--peers needs positive peer counts".into()).into());
    }
    ensure!(
        args.repeat >= 1,
        Error::Config("--repeat must be at least 1".into())
    );
    let queries = [
        ("mavg", parse(&format!("MAVG({SERIES},{})", args.window))?),
        ("macd", parse(&format!("MACD({SERIES},12,26,9)"))?),
    ];
    let mut timings = Vec::new();
    let series = random_walk(args.values, args.seed);
    let store: BTreeMap<String, TimeSeries> = [(SERIES.to_string(), series.clone())].into();

    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    for (label, q) in &queries {
        let t = Instant::now();
        oracle.push(evaluate(q, &store)?);
        timings.push((format!("central {label}"), t.elapsed()));
        rows.push(BenchRow {
            config: "central".into(),
            query: label,
            phase: "cold",
            metrics: Metrics::default(),
        });
    }

    let mut digests = Vec::new();
    for &peers in &args.peers {
        let config = format!("peers{peers}");
        let mut sim = Simulation::new(SimConfig {
            peers,
            seed: args.seed,
            ..args.base.clone()
        })?;
        let t = Instant::now();
        sim.load_series(SERIES, &series)?;
        timings.push((format!("{config} load"), t.elapsed()));
        rows.push(BenchRow {
            config: config.clone(),
            query: "load",
            phase: "cold",
            metrics: sim.metrics(),
        });
        for ((label, q), expected) in queries.iter().zip(&oracle) {
            for run in 0..=args.repeat {
                let t = Instant::now();
                let out = sim.query(q, None, None)?;
                let phase = if run == 0 { "cold" } else { "warm" };
                timings.push((format!("{config} {label} {phase}"), t.elapsed()));
                if !same(&out.series, expected) {
                    bail!("{config}: distributed {label} differs from the centralized result");
                }
                if run == 0 || run == args.repeat {
                    rows.push(BenchRow {
                        config: config.clone(),
                        query: label,
                        phase,
                        metrics: out.metrics,
                    });
                }
            }
        }
        sim.check_coherence()?;
        digests.push((config, sim.trace_digest()));
    }
    Ok(BenchReport {
        args: args.clone(),
        rows,
        digests,
        timings,
    })
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<5} {:<5} {:>9} {:>8} {:>8} {:>9} {:>8} {:>8} {:>12} {:>12}",
            "config",
            "query",
            "phase",
            "messages",
            "hops",
            "lookups",
            "computed",
            "fetched",
            "hits",
            "bytes",
            "virtual_ms"
        );
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<10} {:<5} {:<5} {:>9} {:>8} {:>8} {:>9} {:>8} {:>8} {:>12} {:>12.3}",
                r.config,
                r.query,
                r.phase,
                m.messages,
                m.routing_hops,
                m.lookups,
                m.segments_computed,
                m.segments_fetched,
                m.cache_hits,
                m.bytes_sent,
                m.wall_time_ns as f64 / 1e6
            );
        }
        out
    }

    /// `key: value` lines for every counter of every row, then the trace
    /// digest of each network.
    pub fn document(&self) -> String {
        let a = &self.args;
        let mut out = format!(
            "values: {}\nwindow: {}\nrepeat: {}\nseed: {}\n",
            a.values, a.window, a.repeat, a.seed
        );
        for r in &self.rows {
            for key in Metrics::KEYS {
                let v = r.metrics.get(key).unwrap_or(0);
                let _ = writeln!(out, "{}.{}.{}.{key}: {v}", r.config, r.query, r.phase);
            }
        }
        for (config, digest) in &self.digests {
            let _ = writeln!(out, "{config}.trace_digest: {digest}");
        }
        out
    }
}
