//! Simulation defaults, optionally read from the TOML file named by
//! `TSRING_CONFIG`.
//!
//! ```toml
//! peers = 128
//! seed = 7
//! core = 1024
//! halo = 128
//! capacity = 256
//! ring_bits = 32
//! latency_ns = 50000
//! ns_per_byte = 8
//! ns_per_value = 5
//! ```

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;
use tsring_core::peer::{CostModel, SimConfig};
use tsring_core::segment::SegmentSpec;

pub const CONFIG_ENV: &str = "TSRING_CONFIG";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub peers: usize,
    pub seed: u64,
    pub core: usize,
    pub halo: usize,
    pub capacity: usize,
    pub ring_bits: u32,
    pub latency_ns: u64,
    pub ns_per_byte: u64,
    pub ns_per_value: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        let sim = SimConfig::default();
        Defaults {
            peers: sim.peers,
            seed: sim.seed,
            core: sim.spec.core_len,
            halo: sim.spec.halo,
            capacity: sim.cache_capacity,
            ring_bits: sim.ring_bits,
            latency_ns: sim.cost.latency_ns,
            ns_per_byte: sim.cost.ns_per_byte,
            ns_per_value: sim.cost.ns_per_value,
        }
    }
}

impl Defaults {
    pub fn from_file(path: &Path) -> anyhow::Result<Defaults> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Built-in defaults, overridden by the file in `TSRING_CONFIG` if set.
    pub fn load() -> anyhow::Result<Defaults> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => Defaults::from_file(Path::new(&path)),
            _ => Ok(Defaults::default()),
        }
    }

    pub fn sim_config(&self) -> anyhow::Result<SimConfig> {
        Ok(SimConfig {
            peers: self.peers,
            ring_bits: self.ring_bits,
            spec: SegmentSpec::new(self.core, self.halo)?,
            cache_capacity: self.capacity,
            seed: self.seed,
            cost: CostModel {
                latency_ns: self.latency_ns,
                ns_per_byte: self.ns_per_byte,
                ns_per_value: self.ns_per_value,
            },
            ..SimConfig::default()
        })
    }
}
