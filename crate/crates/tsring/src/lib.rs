//! File formats, workload scripts, benchmarks and the `tsring` command line
//! on top of [`tsring_core`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod io;
pub mod workload;

use tsring_core::peer::Metrics;

pub use tsring_core;

/// Header line of trace files.
pub const TRACE_HEADER: &str = "time_ns\tmsg_id\tsrc\tdst\tkind\tbytes\tpayload";

/// Counters as `key: value` lines followed by the trace digest.
pub fn metrics_document(metrics: &Metrics, trace_digest: &str) -> String {
    format!("{metrics}trace_digest: {trace_digest}\n")
}

pub fn trace_document(lines: &[String]) -> String {
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum::<usize>() + 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}
