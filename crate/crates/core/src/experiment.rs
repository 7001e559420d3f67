//! Experiment orchestration: single runs, user-population sweeps, system-size
//! scaling and trace linting.
//!
//! Sweep and scale points are independent simulation instances and run in
//! parallel; all files are written by the collecting thread afterwards, so
//! identical configurations produce byte-identical outputs.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{derive_seed, replicate_roster, ConfigError, ScenarioConfig};
use crate::economy::ClusterSpec;
use crate::federation::{FederationSim, SchedulingMode};
use crate::metrics::{self, MetricsReport};
use crate::sim::SimTime;
use crate::workload::{
    self, assign_preferences, clip_horizon, generate_synthetic, parse_swf, synthesize_jobs,
    JobSpec, TraceRecord, WorkloadError,
};

const PREFERENCE_STREAM: u64 = 0x2000_0000_0000_0000;
const JITTER_STREAM_BASE: u64 = 0x4000_0000_0000_0000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path, source: io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A drained simulation plus its report.
pub struct RunResult {
    pub sim: FederationSim,
    pub report: MetricsReport,
    /// Trace records dropped at ingestion because no origin could hold them.
    pub oversized_drops: u64,
}

/// Optional per-run file emissions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunSinks {
    pub event_log: bool,
    pub protocol_trace: bool,
}

/// Loads (or generates) each base cluster's trace records, clipped to the
/// horizon.
fn base_records(
    config: &ScenarioConfig,
) -> Result<Vec<Vec<TraceRecord>>, ExperimentError> {
    let mut per_cluster = Vec::with_capacity(config.clusters.len());
    for cluster in &config.clusters {
        let records = match &cluster.trace {
            Some(path) => {
                let mut text = String::new();
                File::open(path)
                    .and_then(|mut f| f.read_to_string(&mut text))
                    .map_err(|e| io_err(path, e))?;
                let parsed = parse_swf(io::Cursor::new(text)).map_err(|e| io_err(path, e))?;
                if !parsed.malformed.is_empty() || !parsed.dropped.is_empty() {
                    log::warn!(
                        "{}: {} malformed lines, {} dropped records",
                        path.display(),
                        parsed.malformed.len(),
                        parsed.dropped.len()
                    );
                }
                parsed.records
            }
            None => generate_synthetic(&config.synth_params(cluster.id))?,
        };
        per_cluster.push(clip_horizon(records, config.horizon_seconds));
    }
    Ok(per_cluster)
}

/// Clones a record set for a replica cluster, jittering arrivals so replicas
/// are not event-synchronized with their template. The jitter window is the
/// template's mean inter-arrival gap.
fn jittered_clone(records: &[TraceRecord], seed: u64, horizon: f64) -> Vec<TraceRecord> {
    if records.is_empty() {
        return Vec::new();
    }
    let span = records
        .iter()
        .map(|r| r.submit_s)
        .fold(f64::MIN, f64::max)
        - records.iter().map(|r| r.submit_s).fold(f64::MAX, f64::min);
    let window = (span / records.len() as f64).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloned: Vec<TraceRecord> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.submit_s += rng.random_range(0.0..window);
            r
        })
        .collect();
    cloned.sort_by(|a, b| {
        a.submit_s
            .total_cmp(&b.submit_s)
            .then(a.job_id.cmp(&b.job_id))
    });
    clip_horizon(cloned, horizon)
}

/// Synthesizes the full federation workload for a roster that may extend the
/// configured clusters with replicas.
pub fn build_jobs(
    config: &ScenarioConfig,
    specs: &[ClusterSpec],
) -> Result<(Vec<JobSpec>, u64), ExperimentError> {
    let base = base_records(config)?;
    let base_len = config.clusters.len();
    let mut jobs = Vec::new();
    let mut oversized = 0u64;
    for (i, spec) in specs.iter().enumerate() {
        let records = if i < base_len {
            base[i].clone()
        } else {
            jittered_clone(
                &base[i % base_len],
                derive_seed(config.seed, JITTER_STREAM_BASE + i as u64),
                config.horizon_seconds,
            )
        };
        let synthesized = synthesize_jobs(
            &records,
            spec,
            config.comm_fraction,
            config.budget_factor,
            config.deadline_factor,
        );
        if !synthesized.oversized.is_empty() {
            log::warn!(
                "cluster {}: dropped {} records larger than the cluster",
                spec.id,
                synthesized.oversized.len()
            );
            oversized += synthesized.oversized.len() as u64;
        }
        jobs.extend(synthesized.jobs);
    }
    assign_preferences(
        &mut jobs,
        config.oft_percent,
        derive_seed(config.seed, PREFERENCE_STREAM),
    );
    Ok((jobs, oversized))
}

fn span_override(config: &ScenarioConfig) -> Option<(SimTime, SimTime)> {
    config
        .utilization_span
        .map(|(a, b)| (SimTime::new(a), SimTime::new(b)))
}

/// Builds, runs and reports one scenario over an explicit roster.
pub fn run_with_specs(
    config: &ScenarioConfig,
    specs: Vec<ClusterSpec>,
    event_log: Option<Box<dyn Write + Send>>,
    protocol_trace: Option<Box<dyn Write + Send>>,
) -> Result<RunResult, ExperimentError> {
    let (jobs, oversized_drops) = build_jobs(config, &specs)?;
    let mut sim = FederationSim::new(specs, config.mode, config.message_latency);
    if let Some(sink) = event_log {
        sim.set_event_log(sink);
    }
    if let Some(sink) = protocol_trace {
        sim.set_protocol_trace(sink);
    }
    sim.submit(jobs);
    sim.run();
    let report = metrics::finalize(&sim, span_override(config));
    Ok(RunResult {
        sim,
        report,
        oversized_drops,
    })
}

/// Builds, runs and reports one scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    run_with_specs(config, config.cluster_specs(), None, None)
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ))
}

/// Runs one scenario and writes `run.csv` (plus optional logs) into
/// `out_dir`.
pub fn run_to_files(
    config: &ScenarioConfig,
    out_dir: &Path,
    sinks: RunSinks,
) -> Result<MetricsReport, ExperimentError> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let event_log: Option<Box<dyn Write + Send>> = if sinks.event_log {
        Some(Box::new(create(&out_dir.join("events.log"))?))
    } else {
        None
    };
    let protocol_trace: Option<Box<dyn Write + Send>> = if sinks.protocol_trace {
        Some(Box::new(create(&out_dir.join("protocol.log"))?))
    } else {
        None
    };
    let result = run_with_specs(config, config.cluster_specs(), event_log, protocol_trace)?;
    let csv_path = out_dir.join("run.csv");
    let mut out = create(&csv_path)?;
    metrics::emit_csv(&result.report, &mut out).map_err(|e| io_err(&csv_path, e))?;
    out.flush().map_err(|e| io_err(&csv_path, e))?;
    Ok(result.report)
}

/// The eleven user-population profiles of a sweep.
pub const SWEEP_PROFILES: [u8; 11] = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

/// Pulls the value one `.dat` series plots from a report.
pub type SeriesExtractor = fn(&MetricsReport) -> f64;

pub const SWEEP_DAT_FILES: [(&str, SeriesExtractor); 7] = [
    ("total_incentive.dat", |r| r.global.incentive_total.value()),
    ("total_messages.dat", |r| r.global.total_messages as f64),
    ("acceptance_pct.dat", |r| r.global.accepted_pct),
    ("avg_response_excl.dat", |r| r.global.avg_response_excl_s),
    ("avg_budget_excl.dat", |r| r.global.avg_budget_excl),
    ("avg_response_incl.dat", |r| r.global.avg_response_incl_s),
    ("avg_budget_incl.dat", |r| r.global.avg_budget_incl),
];

/// Runs the economy scenario once per population profile (0..=100 percent
/// time-optimizers in steps of ten) with identical seed and workload, and
/// writes `sweep.csv`, plot-ready `.dat` series and one `run_oft_NNN.csv`
/// per profile.
pub fn sweep(config: &ScenarioConfig, out_dir: &Path) -> Result<Vec<MetricsReport>, ExperimentError> {
    config.validate()?;
    if config.mode != SchedulingMode::Economy {
        return Err(ExperimentError::Invalid(
            "sweep requires mode = economy".into(),
        ));
    }
    let reports: Vec<MetricsReport> = SWEEP_PROFILES
        .par_iter()
        .map(|&oft| {
            let point = ScenarioConfig {
                oft_percent: oft,
                ..config.clone()
            };
            run_scenario(&point).map(|r| r.report)
        })
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let sweep_path = out_dir.join("sweep.csv");
    let mut out = create(&sweep_path)?;
    (|| -> io::Result<()> {
        write!(
            out,
            "oft_percent,jobs_total,accepted_pct,total_messages,total_incentive_gd,\
avg_response_excl_s,avg_budget_excl_gd,avg_response_incl_s,avg_budget_incl_gd,\
directory_queries,directory_query_messages"
        )?;
        for c in &reports[0].clusters {
            write!(
                out,
                ",util_{0},incentive_{0},local_msgs_{0},remote_msgs_{0}",
                c.id
            )?;
        }
        writeln!(out)?;
        for (oft, report) in SWEEP_PROFILES.iter().zip(&reports) {
            let g = &report.global;
            write!(
                out,
                "{},{},{:.2},{},{:.2},{:.3},{:.2},{:.3},{:.2},{},{}",
                oft,
                g.jobs_total,
                g.accepted_pct,
                g.total_messages,
                g.incentive_total.value(),
                g.avg_response_excl_s,
                g.avg_budget_excl,
                g.avg_response_incl_s,
                g.avg_budget_incl,
                g.directory_queries,
                g.directory_query_messages,
            )?;
            for c in &report.clusters {
                write!(
                    out,
                    ",{:.6},{:.2},{},{}",
                    c.utilization,
                    c.incentive.value(),
                    c.local_messages,
                    c.remote_messages
                )?;
            }
            writeln!(out)?;
        }
        Ok(())
    })()
    .map_err(|e| io_err(&sweep_path, e))?;
    out.flush().map_err(|e| io_err(&sweep_path, e))?;

    for (name, extract) in SWEEP_DAT_FILES {
        let path = out_dir.join(name);
        let mut dat = create(&path)?;
        for (oft, report) in SWEEP_PROFILES.iter().zip(&reports) {
            writeln!(dat, "{oft} {}", extract(report)).map_err(|e| io_err(&path, e))?;
        }
        dat.flush().map_err(|e| io_err(&path, e))?;
    }

    for (oft, report) in SWEEP_PROFILES.iter().zip(&reports) {
        let path = out_dir.join(format!("run_oft_{oft:03}.csv"));
        let mut csv = create(&path)?;
        metrics::emit_csv(report, &mut csv).map_err(|e| io_err(&path, e))?;
        csv.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(reports)
}

/// System sizes exercised by `scale --max-n`.
pub fn scale_sizes(max_n: usize) -> Vec<usize> {
    (1..=max_n / 10).map(|k| k * 10).collect()
}

/// Grows the federation by cycling the configured roster to n clusters for
/// n in {10, 20, ..., max_n}, cloning each template's workload onto its
/// replicas with jittered arrivals. Writes `scale.csv` and per-job / per-GFA
/// average message `.dat` series.
pub fn scale(
    config: &ScenarioConfig,
    max_n: usize,
    out_dir: &Path,
) -> Result<Vec<(usize, MetricsReport)>, ExperimentError> {
    config.validate()?;
    if max_n < 10 {
        return Err(ExperimentError::Invalid(format!(
            "scale needs max-n of at least 10, got {max_n}"
        )));
    }
    let base = config.cluster_specs();
    let points: Vec<(usize, MetricsReport)> = scale_sizes(max_n)
        .into_par_iter()
        .map(|n| {
            let roster = replicate_roster(&base, n);
            run_with_specs(config, roster, None, None).map(|r| (n, r.report))
        })
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let scale_path = out_dir.join("scale.csv");
    let mut out = create(&scale_path)?;
    (|| -> io::Result<()> {
        writeln!(
            out,
            "n,jobs_total,accepted_pct,total_messages,job_msg_min,job_msg_avg,job_msg_max,\
gfa_msg_min,gfa_msg_avg,gfa_msg_max,directory_query_messages"
        )?;
        for (n, report) in &points {
            let g = &report.global;
            writeln!(
                out,
                "{},{},{:.2},{},{},{:.3},{},{},{:.3},{},{}",
                n,
                g.jobs_total,
                g.accepted_pct,
                g.total_messages,
                g.job_msg_min,
                g.job_msg_avg,
                g.job_msg_max,
                g.gfa_msg_min,
                g.gfa_msg_avg,
                g.gfa_msg_max,
                g.directory_query_messages,
            )?;
        }
        Ok(())
    })()
    .map_err(|e| io_err(&scale_path, e))?;
    out.flush().map_err(|e| io_err(&scale_path, e))?;

    for (name, extract) in [
        (
            "per_job_avg_messages.dat",
            (|r: &MetricsReport| r.global.job_msg_avg) as fn(&MetricsReport) -> f64,
        ),
        ("per_gfa_avg_messages.dat", |r: &MetricsReport| {
            r.global.gfa_msg_avg
        }),
    ] {
        let path = out_dir.join(name);
        let mut dat = create(&path)?;
        for (n, report) in &points {
            writeln!(dat, "{n} {}", extract(report)).map_err(|e| io_err(&path, e))?;
        }
        dat.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(points)
}

/// Lint summary for one trace file.
#[derive(Debug)]
pub struct TraceLint {
    pub path: PathBuf,
    pub records: usize,
    pub dropped: Vec<workload::DroppedRecord>,
    pub malformed: Vec<workload::MalformedLine>,
    pub submit_range: Option<(f64, f64)>,
    pub run_time_range: Option<(f64, f64)>,
    pub procs_range: Option<(u32, u32)>,
    pub distinct_users: usize,
}

impl TraceLint {
    pub fn warnings(&self) -> usize {
        self.dropped.len() + self.malformed.len()
    }
}

impl std::fmt::Display for TraceLint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}:", self.path.display())?;
        writeln!(f, "  records:        {}", self.records)?;
        writeln!(f, "  dropped:        {}", self.dropped.len())?;
        for d in &self.dropped {
            writeln!(f, "    line {}: job {}: {}", d.line, d.job_id, d.reason)?;
        }
        writeln!(f, "  malformed:      {}", self.malformed.len())?;
        for m in &self.malformed {
            writeln!(f, "    line {}: {}", m.line, m.reason)?;
        }
        if let Some((lo, hi)) = self.submit_range {
            writeln!(f, "  submit range:   {lo} .. {hi} s")?;
        }
        if let Some((lo, hi)) = self.run_time_range {
            writeln!(f, "  run time range: {lo} .. {hi} s")?;
        }
        if let Some((lo, hi)) = self.procs_range {
            writeln!(f, "  procs range:    {lo} .. {hi}")?;
        }
        writeln!(f, "  distinct users: {}", self.distinct_users)
    }
}

/// Parses and summarizes a trace file without running anything.
pub fn validate_trace(path: &Path) -> Result<TraceLint, ExperimentError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let parsed = parse_swf(io::BufReader::new(file)).map_err(|e| io_err(path, e))?;
    let mut users: Vec<i64> = parsed
        .records
        .iter()
        .map(|r| r.user_id)
        .filter(|&u| u >= 0)
        .collect();
    users.sort_unstable();
    users.dedup();
    let range = |f: fn(&TraceRecord) -> f64| -> Option<(f64, f64)> {
        if parsed.records.is_empty() {
            None
        } else {
            Some((
                parsed.records.iter().map(f).fold(f64::MAX, f64::min),
                parsed.records.iter().map(f).fold(f64::MIN, f64::max),
            ))
        }
    };
    Ok(TraceLint {
        path: path.to_path_buf(),
        records: parsed.records.len(),
        submit_range: range(|r| r.submit_s),
        run_time_range: range(|r| r.run_time_s),
        procs_range: if parsed.records.is_empty() {
            None
        } else {
            Some((
                parsed.records.iter().map(|r| r.procs).min().unwrap(),
                parsed.records.iter().map(|r| r.procs).max().unwrap(),
            ))
        },
        distinct_users: users.len(),
        dropped: parsed.dropped,
        malformed: parsed.malformed,
    })
}
