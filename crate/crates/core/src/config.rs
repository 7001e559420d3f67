//! Scenario configuration.
//!
//! The on-disk format is line-oriented `key = value` text. Keys before any
//! section header configure the scenario; each `[cluster]` header opens one
//! cluster entry whose keys apply to that cluster. `#` starts a comment,
//! blank lines are ignored, and keys outside the grammar are errors (with
//! the offending line reported). When no `[cluster]` sections appear, the
//! scenario uses the built-in eight-cluster roster with prices derived from
//! the pricing anchor.

use std::num::NonZeroUsize;
use std::path::PathBuf;

use thiserror::Error;

use crate::economy::{quote_price, ClusterId, ClusterSpec, Money, PricingAnchor};
use crate::federation::SchedulingMode;
use crate::workload::SynthParams;

/// Default two-day experiment window in seconds.
pub const DEFAULT_HORIZON_S: f64 = 172_800.0;

/// One cluster as configured: capability plus its workload source.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub id: ClusterId,
    pub name: String,
    pub procs: u32,
    pub speed_mips: f64,
    pub bandwidth_gbps: f64,
    /// Advertised price; derived from the anchor when absent.
    pub price: Option<f64>,
    /// SWF trace path; the synthetic generator feeds this cluster when absent.
    pub trace: Option<PathBuf>,
}

/// Everything one experiment run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: SchedulingMode,
    pub clusters: Vec<ClusterConfig>,
    pub horizon_seconds: f64,
    pub comm_fraction: f64,
    pub budget_factor: f64,
    pub deadline_factor: f64,
    pub access_price: f64,
    pub fastest_speed: f64,
    /// Percentage of the user population optimizing for time (economy mode).
    pub oft_percent: u8,
    /// Cycles the roster to `replication_factor` times its size.
    pub replication_factor: u32,
    pub message_latency: f64,
    pub seed: u64,
    pub synth_arrival_rate: f64,
    pub synth_runtime_log_mean: f64,
    pub synth_runtime_log_sigma: f64,
    pub synth_max_proc_power: u32,
    pub synth_jobs_per_cluster: usize,
    pub utilization_span: Option<(f64, f64)>,
}

impl Default for ScenarioConfig {
    /// The bundled desk-scale scenario: the eight-cluster roster under a
    /// deterministic synthetic workload of roughly five hundred jobs.
    fn default() -> Self {
        ScenarioConfig {
            mode: SchedulingMode::Economy,
            clusters: default_roster_configs(),
            horizon_seconds: DEFAULT_HORIZON_S,
            comm_fraction: 0.10,
            budget_factor: 2.0,
            deadline_factor: 2.0,
            access_price: 5.3,
            fastest_speed: 930.0,
            oft_percent: 30,
            replication_factor: 1,
            message_latency: 0.0,
            seed: 42,
            synth_arrival_rate: 3.8e-4,
            synth_runtime_log_mean: 9.0,
            synth_runtime_log_sigma: 1.3,
            synth_max_proc_power: 6,
            synth_jobs_per_cluster: 65,
            utilization_span: None,
        }
    }
}

impl ScenarioConfig {
    pub fn anchor(&self) -> PricingAnchor {
        PricingAnchor::new(Money::new(self.access_price), self.fastest_speed)
    }

    /// Concrete cluster specs, with anchor-derived prices where none were
    /// configured, cycled to the requested replication factor.
    pub fn cluster_specs(&self) -> Vec<ClusterSpec> {
        let base: Vec<ClusterSpec> = self
            .clusters
            .iter()
            .map(|c| self.spec_for(c, c.id, &c.name))
            .collect();
        replicate_roster(&base, self.replication_factor as usize * base.len())
    }

    fn spec_for(&self, c: &ClusterConfig, id: ClusterId, name: &str) -> ClusterSpec {
        let price = c
            .price
            .map(Money::new)
            .unwrap_or_else(|| quote_price(c.speed_mips, &self.anchor()));
        ClusterSpec::new(id, name, c.procs, c.speed_mips, c.bandwidth_gbps, price)
    }

    /// Synthetic generator parameters for one cluster, seeded per cluster.
    pub fn synth_params(&self, cluster: ClusterId) -> SynthParams {
        SynthParams {
            arrival_rate: self.synth_arrival_rate,
            runtime_log_mean: self.synth_runtime_log_mean,
            runtime_log_sigma: self.synth_runtime_log_sigma,
            max_proc_power: self.synth_max_proc_power,
            job_count: NonZeroUsize::new(self.synth_jobs_per_cluster.max(1))
                .expect("max(1) is non-zero"),
            seed: derive_seed(self.seed, u64::from(cluster)),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.clusters.is_empty() {
            return Err(ConfigError::Invalid {
                field: "cluster",
                message: "at least one cluster is required".into(),
            });
        }
        let mut ids: Vec<ClusterId> = self.clusters.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.clusters.len() {
            return Err(ConfigError::Invalid {
                field: "cluster.id",
                message: "cluster ids must be unique".into(),
            });
        }
        for c in &self.clusters {
            if c.name.contains(',') {
                return Err(ConfigError::Invalid {
                    field: "cluster.name",
                    message: format!("name {:?} must not contain commas", c.name),
                });
            }
            if c.procs == 0 {
                return Err(ConfigError::Invalid {
                    field: "cluster.procs",
                    message: format!("cluster {} needs at least one processor", c.id),
                });
            }
            for (field, value) in [
                ("cluster.speed", c.speed_mips),
                ("cluster.bandwidth", c.bandwidth_gbps),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(ConfigError::Invalid {
                        field,
                        message: format!("cluster {} has non-positive value {value}", c.id),
                    });
                }
            }
        }
        for (field, value, lo) in [
            ("horizon_seconds", self.horizon_seconds, f64::MIN_POSITIVE),
            ("budget_factor", self.budget_factor, f64::MIN_POSITIVE),
            ("deadline_factor", self.deadline_factor, f64::MIN_POSITIVE),
            ("access_price", self.access_price, f64::MIN_POSITIVE),
            ("fastest_speed", self.fastest_speed, f64::MIN_POSITIVE),
            ("message_latency", self.message_latency, 0.0),
            ("synth_arrival_rate", self.synth_arrival_rate, f64::MIN_POSITIVE),
        ] {
            if !(value >= lo && value.is_finite()) {
                return Err(ConfigError::Invalid {
                    field,
                    message: format!("value {value} out of range"),
                });
            }
        }
        if !(0.0..1.0).contains(&self.comm_fraction) {
            return Err(ConfigError::Invalid {
                field: "comm_fraction",
                message: format!("{} is outside [0, 1)", self.comm_fraction),
            });
        }
        if self.oft_percent > 100 {
            return Err(ConfigError::Invalid {
                field: "oft_percent",
                message: format!("{} is outside 0..=100", self.oft_percent),
            });
        }
        if self.replication_factor == 0 {
            return Err(ConfigError::Invalid {
                field: "replication_factor",
                message: "must be at least 1".into(),
            });
        }
        if let Some((a, b)) = self.utilization_span {
            if b <= a {
                return Err(ConfigError::Invalid {
                    field: "utilization_span",
                    message: format!("span [{a}, {b}] is empty"),
                });
            }
        }
        Ok(())
    }
}

/// Cycles a base roster up to `target` clusters; replicas copy the base
/// entries in order under fresh ids and numbered names.
pub fn replicate_roster(base: &[ClusterSpec], target: usize) -> Vec<ClusterSpec> {
    assert!(!base.is_empty());
    let mut next_id = base.iter().map(|s| s.id).max().expect("non-empty") + 1;
    let mut out = Vec::with_capacity(target);
    for i in 0..target.max(base.len()) {
        let template = &base[i % base.len()];
        if i < base.len() {
            out.push(template.clone());
        } else {
            let copy = i / base.len() + 1;
            out.push(ClusterSpec::new(
                next_id,
                format!("{} ({copy})", template.name),
                template.procs,
                template.speed_mips,
                template.bandwidth_gbps,
                template.price,
            ));
            next_id += 1;
        }
    }
    out
}

/// Splitmix-style seed derivation so sub-streams never overlap.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The default eight-cluster roster (processors, speed, bandwidth); prices
/// come from the pricing anchor unless overridden.
pub fn default_roster_configs() -> Vec<ClusterConfig> {
    let table: [(&str, u32, f64, f64); 8] = [
        ("CTC SP2", 512, 850.0, 2.0),
        ("KTH SP2", 100, 900.0, 1.6),
        ("LANL CM5", 1024, 700.0, 1.0),
        ("LANL Origin", 2048, 630.0, 1.6),
        ("NASA iPSC", 128, 930.0, 4.0),
        ("SDSC Par96", 416, 710.0, 1.0),
        ("SDSC Blue", 1152, 730.0, 2.0),
        ("SDSC SP2", 128, 920.0, 4.0),
    ];
    table
        .iter()
        .enumerate()
        .map(|(i, &(name, procs, speed, bw))| ClusterConfig {
            id: i as ClusterId + 1,
            name: name.to_string(),
            procs,
            speed_mips: speed,
            bandwidth_gbps: bw,
            price: None,
            trace: None,
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

enum Section {
    Top,
    Cluster(ClusterConfig),
}

/// Parses the `key = value` grammar described in the module docs.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig {
        clusters: Vec::new(),
        ..ScenarioConfig::default()
    };
    let mut section = Section::Top;
    let mut next_cluster_id: ClusterId = 1;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line == "[cluster]" {
            if let Section::Cluster(done) = std::mem::replace(&mut section, Section::Top) {
                config.clusters.push(done);
            }
            section = Section::Cluster(ClusterConfig {
                id: next_cluster_id,
                name: format!("cluster-{next_cluster_id}"),
                procs: 1,
                speed_mips: 1.0,
                bandwidth_gbps: 1.0,
                price: None,
                trace: None,
            });
            next_cluster_id += 1;
            continue;
        }
        if line.starts_with('[') {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("unknown section {line:?}; only [cluster] is recognized"),
            });
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match &mut section {
            Section::Top => apply_top_key(&mut config, key, value, lineno)?,
            Section::Cluster(cluster) => {
                apply_cluster_key(cluster, &mut next_cluster_id, key, value, lineno)?
            }
        }
    }
    if let Section::Cluster(done) = section {
        config.clusters.push(done);
    }
    if config.clusters.is_empty() {
        config.clusters = default_roster_configs();
    }
    config.validate()?;
    Ok(config)
}

fn parse_value<T: std::str::FromStr>(
    value: &str,
    key: &str,
    lineno: usize,
) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::Parse {
        line: lineno,
        message: format!("could not parse value {value:?} for key {key}"),
    })
}

fn apply_top_key(
    config: &mut ScenarioConfig,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    match key {
        "mode" => {
            config.mode = match value {
                "independent" => SchedulingMode::Independent,
                "fastest_first" => SchedulingMode::FastestFirst,
                "economy" => SchedulingMode::Economy,
                other => {
                    return Err(ConfigError::Parse {
                        line: lineno,
                        message: format!(
                            "unknown mode {other:?}; expected independent, fastest_first or economy"
                        ),
                    })
                }
            }
        }
        "horizon_seconds" => config.horizon_seconds = parse_value(value, key, lineno)?,
        "comm_fraction" => config.comm_fraction = parse_value(value, key, lineno)?,
        "budget_factor" => config.budget_factor = parse_value(value, key, lineno)?,
        "deadline_factor" => config.deadline_factor = parse_value(value, key, lineno)?,
        "access_price" => config.access_price = parse_value(value, key, lineno)?,
        "fastest_speed" => config.fastest_speed = parse_value(value, key, lineno)?,
        "oft_percent" => config.oft_percent = parse_value(value, key, lineno)?,
        "replication_factor" => config.replication_factor = parse_value(value, key, lineno)?,
        "message_latency" => config.message_latency = parse_value(value, key, lineno)?,
        "seed" => config.seed = parse_value(value, key, lineno)?,
        "synth_arrival_rate" => config.synth_arrival_rate = parse_value(value, key, lineno)?,
        "synth_runtime_log_mean" => {
            config.synth_runtime_log_mean = parse_value(value, key, lineno)?
        }
        "synth_runtime_log_sigma" => {
            config.synth_runtime_log_sigma = parse_value(value, key, lineno)?
        }
        "synth_max_proc_power" => config.synth_max_proc_power = parse_value(value, key, lineno)?,
        "synth_jobs_per_cluster" => {
            config.synth_jobs_per_cluster = parse_value(value, key, lineno)?
        }
        "utilization_span_start" => {
            let start: f64 = parse_value(value, key, lineno)?;
            let end = config.utilization_span.map(|(_, b)| b).unwrap_or(f64::MAX);
            config.utilization_span = Some((start, end));
        }
        "utilization_span_end" => {
            let end: f64 = parse_value(value, key, lineno)?;
            let start = config.utilization_span.map(|(a, _)| a).unwrap_or(0.0);
            config.utilization_span = Some((start, end));
        }
        other => {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("unknown key {other:?}"),
            })
        }
    }
    Ok(())
}

fn apply_cluster_key(
    cluster: &mut ClusterConfig,
    next_cluster_id: &mut ClusterId,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<(), ConfigError> {
    match key {
        "id" => {
            cluster.id = parse_value(value, key, lineno)?;
            *next_cluster_id = (*next_cluster_id).max(cluster.id + 1);
        }
        "name" => cluster.name = value.to_string(),
        "procs" => cluster.procs = parse_value(value, key, lineno)?,
        "speed" => cluster.speed_mips = parse_value(value, key, lineno)?,
        "bandwidth" => cluster.bandwidth_gbps = parse_value(value, key, lineno)?,
        "price" => cluster.price = Some(parse_value(value, key, lineno)?),
        "trace" => cluster.trace = Some(PathBuf::from(value)),
        other => {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("unknown cluster key {other:?}"),
            })
        }
    }
    Ok(())
}
