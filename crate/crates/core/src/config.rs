//! Run parameters shared by every scheme.

use crate::error::Error;
use crate::model::DataSpec;

pub const KB: u64 = 1024;
pub const MB: u64 = 1024 * KB;
pub const GB: u64 = 1024 * MB;

/// 1 Gbps expressed in bytes per second.
pub const GIGABIT_BYTES_PER_SEC: f64 = 125_000_000.0;

/// One-way latency of the backhaul link, calibrated so that a 512 KB block
/// makes the cloud round trip in about 241 ms.
pub const DEFAULT_CLOUD_DELAY_MS: f64 = 118.4;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Number of edge servers.
    pub n: usize,
    /// Edges per node in the edge topology.
    pub nd: f64,
    /// Per-transmission drop probability for block-bearing messages.
    pub failure_rate: f64,
    pub data_size: u64,
    pub block_size: u64,
    /// Edge-to-edge one-way delay range in ms.
    pub delay_lo_ms: f64,
    pub delay_hi_ms: f64,
    /// Price of one backhaul block relative to one edge block.
    pub cost_ratio: f64,
    pub coordinator_timeout_ms: f64,
    pub heartbeat_ms: f64,
    pub distribution_timeout_ms: f64,
    pub transmission_timeout_ms: f64,
    /// Fraction of edge servers used as entries.
    pub entry_fraction: f64,
    /// Edge bandwidth multipliers, drawn uniformly per node.
    pub bw_range: (f64, f64),
    pub edge_bandwidth: f64,
    pub cloud_bandwidth: f64,
    pub cloud_delay_ms: f64,
    /// Hop bound used when partitioning the dissemination tree.
    pub tree_depth: usize,
    /// Simulation time after which an unfinished run counts as stalled.
    pub horizon_ms: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 32,
            nd: 1.4,
            failure_rate: 0.0,
            data_size: GB,
            block_size: 512 * KB,
            delay_lo_ms: 5.0,
            delay_hi_ms: 15.0,
            cost_ratio: 20.0,
            coordinator_timeout_ms: 250.0,
            heartbeat_ms: 50.0,
            distribution_timeout_ms: 300.0,
            transmission_timeout_ms: 100.0,
            entry_fraction: 0.25,
            bw_range: (1.0, 1.0),
            edge_bandwidth: GIGABIT_BYTES_PER_SEC,
            cloud_bandwidth: GIGABIT_BYTES_PER_SEC,
            cloud_delay_ms: DEFAULT_CLOUD_DELAY_MS,
            tree_depth: 3,
            horizon_ms: 3_600_000.0,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if !(self.nd >= 1.0) {
            return bad(format!("nd must be at least 1.0 (got {})", self.nd));
        }
        if self.n > 1 && self.nd > (self.n - 1) as f64 {
            return bad(format!("nd must be at most n-1 = {} (got {})", self.n - 1, self.nd));
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return bad(format!("r must be in [0, 1] (got {})", self.failure_rate));
        }
        if self.data_size == 0 || self.block_size == 0 {
            return bad("ds and bs must be positive".into());
        }
        if !(self.delay_lo_ms >= 0.0 && self.delay_lo_ms <= self.delay_hi_ms) {
            return bad(format!(
                "delay range must satisfy 0 <= lo <= hi (got {}..{})",
                self.delay_lo_ms, self.delay_hi_ms
            ));
        }
        if !(self.cost_ratio >= 1.0) {
            return bad(format!("cr must be at least 1 (got {})", self.cost_ratio));
        }
        for (name, v) in [
            ("t", self.coordinator_timeout_ms),
            ("heartbeat interval", self.heartbeat_ms),
            ("distribution timeout", self.distribution_timeout_ms),
            ("transmission timeout", self.transmission_timeout_ms),
            ("horizon", self.horizon_ms),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive (got {v})"));
            }
        }
        if !(self.entry_fraction > 0.0 && self.entry_fraction <= 1.0) {
            return bad(format!(
                "entry fraction must be in (0, 1] (got {})",
                self.entry_fraction
            ));
        }
        let (lo, hi) = self.bw_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("bandwidth range must satisfy 0 < lo <= hi (got {lo}..{hi})"));
        }
        if !(self.edge_bandwidth > 0.0 && self.cloud_bandwidth > 0.0) {
            return bad("bandwidths must be positive".into());
        }
        if self.tree_depth == 0 {
            return bad("tree depth must be at least 1".into());
        }
        Ok(())
    }

    pub fn data_spec(&self) -> Result<DataSpec, Error> {
        DataSpec::new(self.data_size, self.block_size)
    }

    /// Slowest possible edge outbound rate, in bytes per ms.
    pub fn min_edge_rate(&self) -> f64 {
        self.edge_bandwidth * self.bw_range.0 / 1000.0
    }

    /// Upper bound on the time one edge server needs to push one block.
    pub fn block_tx_max_ms(&self) -> f64 {
        (self.block_size + crate::model::HEADER_BYTES) as f64 / self.min_edge_rate()
    }
}

/// Parses sizes such as `512KB`, `1GB`, `64MB` or a plain byte count.
pub fn parse_size(text: &str) -> Result<u64, Error> {
    let t = text.trim();
    let upper = t.to_ascii_uppercase();
    let (digits, unit) = match upper.find(|c: char| c.is_ascii_alphabetic()) {
        Some(pos) => upper.split_at(pos),
        None => (upper.as_str(), ""),
    };
    let unit = match unit.trim() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => KB,
        "M" | "MB" | "MIB" => MB,
        "G" | "GB" | "GIB" => GB,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown size unit '{other}' in '{text}'"
            )))
        }
    };
    let value: f64 = digits
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse size '{text}'")))?;
    if !(value > 0.0) {
        return Err(Error::InvalidParameter(format!("size must be positive: '{text}'")));
    }
    Ok((value * unit as f64).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.data_spec().unwrap().block_count, 2048);
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("512KB").unwrap(), 524_288);
        assert_eq!(parse_size("1GB").unwrap(), 1 << 30);
        assert_eq!(parse_size("64mb").unwrap(), 64 << 20);
        assert_eq!(parse_size("4096").unwrap(), 4096);
        assert!(parse_size("12XB").is_err());
        assert!(parse_size("-3KB").is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut cfg = RunConfig::default();
        cfg.failure_rate = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.nd = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.cost_ratio = 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cloud_round_trip_is_calibrated() {
        let cfg = RunConfig::default();
        let block = (cfg.block_size + 12) as f64 / (cfg.cloud_bandwidth / 1000.0);
        let ack = 12.0 / (cfg.edge_bandwidth / 1000.0);
        let rtt = block + 2.0 * cfg.cloud_delay_ms + ack;
        assert!((rtt - 240.95).abs() / 240.95 < 0.05, "rtt {rtt}");
    }
}
