//! Workload ingestion and job synthesis.
//!
//! Traces arrive either as Standard Workload Format (SWF) files from the
//! archives or from the synthetic generator, which emits the same record
//! shape so both paths share one ingestion route. A trace record carries
//! only arrival, run time and processor count; the full job (instruction
//! length, communication overhead, budget, deadline, preference) is
//! fabricated here relative to the job's origin cluster so that executing
//! at the origin reproduces the trace run time exactly.

use std::io::{self, BufRead, Write};
use std::num::NonZeroUsize;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use thiserror::Error;

use crate::economy::{self, ClusterId, ClusterSpec, Money};
use crate::sim::SimTime;

/// One job as read from a trace: the subset of SWF fields the simulator uses.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub job_id: i64,
    /// Seconds relative to trace start.
    pub submit_s: f64,
    pub run_time_s: f64,
    pub procs: u32,
    /// -1 when the trace does not identify the submitting user.
    pub user_id: i64,
}

/// Identity of a job: origin cluster plus the trace-local job number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId {
    pub origin: ClusterId,
    pub local: i64,
}

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.origin, self.local)
    }
}

/// Per-job optimization preference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    /// OFC: minimum cost within the deadline.
    OptimizeCost,
    /// OFT: minimum response time within the budget.
    OptimizeTime,
}

/// A fully synthesized parallel job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub id: JobId,
    pub user_id: i64,
    pub submit: SimTime,
    /// Total work in million instructions.
    pub length_mi: f64,
    pub procs: u32,
    /// Communication overhead in seconds when run at the origin.
    pub comm_overhead_s: f64,
    pub budget: Money,
    /// Allowed delay in seconds past `submit`.
    pub deadline_s: f64,
    pub preference: Preference,
}

impl JobSpec {
    pub fn origin(&self) -> ClusterId {
        self.id.origin
    }

    /// Absolute latest acceptable completion time.
    pub fn deadline_at(&self) -> SimTime {
        self.submit.offset(self.deadline_s)
    }
}

/// Parameters for the synthetic trace generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Poisson arrival rate in jobs per second.
    pub arrival_rate: f64,
    pub runtime_log_mean: f64,
    pub runtime_log_sigma: f64,
    /// Processor counts are drawn as 2^U{0..max_proc_power}.
    pub max_proc_power: u32,
    pub job_count: NonZeroUsize,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (name, value) in [
            ("arrival_rate", self.arrival_rate),
            ("runtime_log_mean", self.runtime_log_mean),
            ("runtime_log_sigma", self.runtime_log_sigma),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(WorkloadError::InvalidSynthParam {
                    field: name,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("synthetic parameter {field} must be positive and finite, got {value}")]
    InvalidSynthParam { field: &'static str, value: f64 },
}

/// A line whose required fields could not be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// A syntactically valid record dropped for a semantic reason.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRecord {
    pub line: usize,
    pub job_id: i64,
    pub reason: String,
}

/// Outcome of parsing one SWF stream.
#[derive(Debug, Default)]
pub struct ParsedTrace {
    pub records: Vec<TraceRecord>,
    pub dropped: Vec<DroppedRecord>,
    pub malformed: Vec<MalformedLine>,
}

fn field<T: std::str::FromStr>(fields: &[&str], idx: usize, name: &str) -> Result<T, String> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| format!("missing column {} ({name})", idx + 1))?;
    raw.parse::<T>()
        .map_err(|_| format!("column {} ({name}) is not numeric: {raw:?}", idx + 1))
}

/// Parses whitespace-separated SWF text. Comment lines start with `;`.
/// Columns used: 1 job id, 2 submit time, 4 run time, 5 allocated processors
/// (falling back to column 8, requested processors, when column 5 is -1),
/// 12 user id when present. Records with non-positive run time or processor
/// count are dropped and counted; lines with non-numeric required fields are
/// reported as malformed.
pub fn parse_swf<R: BufRead>(input: R) -> io::Result<ParsedTrace> {
    let mut out = ParsedTrace::default();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parsed = (|| -> Result<(i64, f64, f64, i64), String> {
            let job_id = field::<i64>(&fields, 0, "job id")?;
            let submit = field::<f64>(&fields, 1, "submit time")?;
            let run_time = field::<f64>(&fields, 3, "run time")?;
            let mut procs = field::<i64>(&fields, 4, "allocated processors")?;
            if procs == -1 && fields.len() > 7 {
                procs = field::<i64>(&fields, 7, "requested processors")?;
            }
            Ok((job_id, submit, run_time, procs))
        })();
        let (job_id, submit, run_time, procs) = match parsed {
            Ok(v) => v,
            Err(reason) => {
                out.malformed.push(MalformedLine {
                    line: lineno,
                    reason,
                });
                continue;
            }
        };
        if run_time <= 0.0 {
            out.dropped.push(DroppedRecord {
                line: lineno,
                job_id,
                reason: format!("non-positive run time {run_time}"),
            });
            continue;
        }
        if procs <= 0 {
            out.dropped.push(DroppedRecord {
                line: lineno,
                job_id,
                reason: format!("non-positive processor count {procs}"),
            });
            continue;
        }
        if submit < 0.0 {
            out.dropped.push(DroppedRecord {
                line: lineno,
                job_id,
                reason: format!("negative submit time {submit}"),
            });
            continue;
        }
        let user_id = fields
            .get(11)
            .and_then(|raw| raw.parse::<i64>().ok())
            .unwrap_or(-1);
        out.records.push(TraceRecord {
            job_id,
            submit_s: submit,
            run_time_s: run_time,
            procs: procs as u32,
            user_id,
        });
    }
    Ok(out)
}

/// Writes records back out in the SWF column layout `parse_swf` reads
/// (18 columns, unused ones -1).
pub fn write_swf<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "; synthetic trace, {} records", records.len())?;
    for r in records {
        let mut cols = vec![String::from("-1"); 18];
        cols[0] = r.job_id.to_string();
        cols[1] = format!("{}", r.submit_s);
        cols[2] = "0".into();
        cols[3] = format!("{}", r.run_time_s);
        cols[4] = r.procs.to_string();
        cols[7] = r.procs.to_string();
        cols[11] = r.user_id.to_string();
        writeln!(out, "{}", cols.join(" "))?;
    }
    Ok(())
}

/// Normalizes submit times so the earliest is zero, then keeps records whose
/// submit falls within `horizon_seconds`.
pub fn clip_horizon(records: Vec<TraceRecord>, horizon_seconds: f64) -> Vec<TraceRecord> {
    assert!(horizon_seconds > 0.0, "horizon must be positive");
    let Some(base) = records
        .iter()
        .map(|r| r.submit_s)
        .min_by(f64::total_cmp)
    else {
        return records;
    };
    records
        .into_iter()
        .filter_map(|mut r| {
            r.submit_s -= base;
            (r.submit_s <= horizon_seconds).then_some(r)
        })
        .collect()
}

/// Result of turning trace records into jobs for one origin cluster.
#[derive(Debug, Default)]
pub struct Synthesized {
    pub jobs: Vec<JobSpec>,
    /// Records whose processor demand exceeds the origin cluster.
    pub oversized: Vec<DroppedRecord>,
}

/// Fabricates full jobs from trace records relative to their origin cluster.
///
/// For a record with run time `r`: the compute share `(1 - comm_fraction) * r`
/// becomes the instruction length at origin speed, the rest becomes
/// origin-side communication overhead, so the origin execution time equals
/// `r`. Budget and deadline scale the origin cost and origin time by the
/// given factors.
pub fn synthesize_jobs(
    records: &[TraceRecord],
    origin: &ClusterSpec,
    comm_fraction: f64,
    budget_factor: f64,
    deadline_factor: f64,
) -> Synthesized {
    assert!(
        (0.0..1.0).contains(&comm_fraction),
        "comm_fraction must lie in [0, 1)"
    );
    assert!(budget_factor > 0.0 && deadline_factor > 0.0, "factors must be positive");
    let mut out = Synthesized::default();
    for record in records {
        if record.procs > origin.procs {
            out.oversized.push(DroppedRecord {
                line: 0,
                job_id: record.job_id,
                reason: format!(
                    "needs {} processors, origin cluster {} owns {}",
                    record.procs, origin.id, origin.procs
                ),
            });
            continue;
        }
        let compute_s = (1.0 - comm_fraction) * record.run_time_s;
        let mut job = JobSpec {
            id: JobId {
                origin: origin.id,
                local: record.job_id,
            },
            user_id: record.user_id,
            submit: SimTime::new(record.submit_s),
            length_mi: compute_s * origin.speed_mips * f64::from(record.procs),
            procs: record.procs,
            comm_overhead_s: comm_fraction * record.run_time_s,
            budget: Money::ZERO,
            deadline_s: 0.0,
            preference: Preference::OptimizeCost,
        };
        let origin_cost = economy::exec_cost(&job, origin).expect("procs fit checked");
        let origin_time = economy::exec_time(&job, origin, origin).expect("procs fit checked");
        job.budget = origin_cost.scaled(budget_factor);
        job.deadline_s = deadline_factor * origin_time;
        out.jobs.push(job);
    }
    out
}

/// Unit of preference assignment: a known user, or a single job when the
/// trace does not identify users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum PreferenceKey {
    User(ClusterId, i64),
    Job(JobId),
}

fn preference_key(job: &JobSpec) -> PreferenceKey {
    if job.user_id >= 0 {
        PreferenceKey::User(job.origin(), job.user_id)
    } else {
        PreferenceKey::Job(job.id)
    }
}

/// Marks `round(oft_percent / 100 * population)` of the user population as
/// time-optimizing via a seeded shuffle; all jobs of one user share the
/// preference. Jobs without a user id count as single-job users.
pub fn assign_preferences(jobs: &mut [JobSpec], oft_percent: u8, seed: u64) {
    assert!(oft_percent <= 100, "oft_percent must lie in 0..=100");
    let mut keys: Vec<PreferenceKey> = jobs.iter().map(preference_key).collect();
    keys.sort();
    keys.dedup();
    let oft_count =
        (f64::from(oft_percent) / 100.0 * keys.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    keys.shuffle(&mut rng);
    let oft: std::collections::BTreeSet<PreferenceKey> =
        keys.into_iter().take(oft_count).collect();
    for job in jobs.iter_mut() {
        job.preference = if oft.contains(&preference_key(job)) {
            Preference::OptimizeTime
        } else {
            Preference::OptimizeCost
        };
    }
}

/// Generates a deterministic synthetic trace: Poisson arrivals, lognormal
/// run times, power-of-two processor counts. User ids are left unknown.
pub fn generate_synthetic(params: &SynthParams) -> Result<Vec<TraceRecord>, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let interarrival = Exp::new(params.arrival_rate).expect("validated rate");
    let runtime = LogNormal::new(params.runtime_log_mean, params.runtime_log_sigma)
        .expect("validated lognormal parameters");
    let mut t = 0.0f64;
    let mut records = Vec::with_capacity(params.job_count.get());
    for i in 0..params.job_count.get() {
        t += interarrival.sample(&mut rng);
        let run_time = runtime.sample(&mut rng).max(1.0);
        let power = rng.random_range(0..=params.max_proc_power);
        records.push(TraceRecord {
            job_id: i as i64 + 1,
            submit_s: t,
            run_time_s: run_time,
            procs: 2u32.pow(power),
            user_id: -1,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn lanl_cm5() -> ClusterSpec {
        ClusterSpec::new(3, "LANL CM5", 1024, 700.0, 1.0, Money::new(3.98))
    }

    #[test]
    fn parses_basic_record_and_skips_comments() {
        let text = "; header comment\n1 0 0 100 4 -1 -1 4 -1 -1 1 7\n";
        let parsed = parse_swf(Cursor::new(text)).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.job_id, 1);
        assert_eq!(r.submit_s, 0.0);
        assert_eq!(r.run_time_s, 100.0);
        assert_eq!(r.procs, 4);
        assert_eq!(r.user_id, 7);
        assert!(parsed.dropped.is_empty());
        assert!(parsed.malformed.is_empty());
    }

    #[test]
    fn falls_back_to_requested_procs() {
        let text = "5 10 0 60 -1 -1 -1 8\n";
        let parsed = parse_swf(Cursor::new(text)).unwrap();
        assert_eq!(parsed.records[0].procs, 8);
    }

    #[test]
    fn sentinel_run_time_is_dropped_with_warning() {
        let text = "1 0 0 -1 4\n2 5 0 50 2\n";
        let parsed = parse_swf(Cursor::new(text)).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.dropped.len(), 1);
        assert_eq!(parsed.dropped[0].line, 1);
    }

    #[test]
    fn malformed_lines_are_listed_with_line_numbers() {
        let mut text = String::from("; fixture\n");
        for i in 1..=8 {
            text.push_str(&format!("{i} {} 0 100 2\n", i * 10));
        }
        text.push_str("9 oops 0 100 2\n");
        text.push_str("10 5\n");
        let parsed = parse_swf(Cursor::new(text)).unwrap();
        assert_eq!(parsed.records.len(), 8);
        assert_eq!(parsed.malformed.len(), 2);
        assert_eq!(parsed.malformed[0].line, 10);
        assert_eq!(parsed.malformed[1].line, 11);
    }

    #[test]
    fn swf_round_trip_preserves_records() {
        let records = vec![
            TraceRecord {
                job_id: 1,
                submit_s: 0.0,
                run_time_s: 120.5,
                procs: 4,
                user_id: 3,
            },
            TraceRecord {
                job_id: 2,
                submit_s: 33.25,
                run_time_s: 7.0,
                procs: 16,
                user_id: -1,
            },
        ];
        let mut buf = Vec::new();
        write_swf(&records, &mut buf).unwrap();
        let parsed = parse_swf(Cursor::new(buf)).unwrap();
        assert_eq!(parsed.records, records);
    }

    #[test]
    fn clip_keeps_two_day_window() {
        let recs = [0.0, 100.0, 200_000.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| TraceRecord {
                job_id: i as i64,
                submit_s: s,
                run_time_s: 1.0,
                procs: 1,
                user_id: -1,
            })
            .collect::<Vec<_>>();
        let kept = clip_horizon(recs, 172_800.0);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn clip_normalizes_offsets_and_can_empty_out() {
        let mk = |s: f64| TraceRecord {
            job_id: 1,
            submit_s: s,
            run_time_s: 1.0,
            procs: 1,
            user_id: -1,
        };
        let shifted = clip_horizon(vec![mk(50.0), mk(60.0)], 100.0);
        assert_eq!(shifted[0].submit_s, 0.0);
        assert_eq!(shifted[1].submit_s, 10.0);
        // All submits beyond the horizon once normalized: nothing survives.
        let none = clip_horizon(vec![mk(0.0), mk(5000.0)], 100.0);
        assert_eq!(none.len(), 1, "the normalized zero stays, the far one goes");
        assert!(clip_horizon(Vec::new(), 100.0).is_empty());
    }

    #[test]
    fn synthesis_reproduces_hand_computed_job() {
        let record = TraceRecord {
            job_id: 9,
            submit_s: 0.0,
            run_time_s: 1000.0,
            procs: 4,
            user_id: 2,
        };
        let out = synthesize_jobs(&[record], &lanl_cm5(), 0.10, 2.0, 2.0);
        let job = &out.jobs[0];
        assert!((job.length_mi - 2_520_000.0).abs() < 1e-6);
        assert!((job.comm_overhead_s - 100.0).abs() < 1e-12);
        assert!((job.deadline_s - 2000.0).abs() < 1e-9);
        assert!((job.budget.value() - 7164.0).abs() < 1e-9);
        let origin = lanl_cm5();
        let d = economy::exec_time(job, &origin, &origin).unwrap();
        let b = economy::exec_cost(job, &origin).unwrap().value();
        assert!((d - 1000.0).abs() < 1e-9 * 1000.0);
        assert!((b - 3582.0).abs() < 1e-9 * 3582.0);
    }

    #[test]
    fn zero_comm_fraction_puts_all_work_in_compute() {
        let record = TraceRecord {
            job_id: 1,
            submit_s: 0.0,
            run_time_s: 500.0,
            procs: 2,
            user_id: 1,
        };
        let origin = lanl_cm5();
        let out = synthesize_jobs(&[record], &origin, 0.0, 2.0, 2.0);
        let job = &out.jobs[0];
        assert_eq!(job.comm_overhead_s, 0.0);
        assert_eq!(job.length_mi, 500.0 * 700.0 * 2.0);
        let d = economy::exec_time(job, &origin, &origin).unwrap();
        assert!((d - 500.0).abs() < 1e-9 * 500.0);
    }

    #[test]
    fn unit_factors_reproduce_origin_cost_and_time() {
        let record = TraceRecord {
            job_id: 1,
            submit_s: 0.0,
            run_time_s: 800.0,
            procs: 8,
            user_id: 1,
        };
        let origin = lanl_cm5();
        let out = synthesize_jobs(&[record], &origin, 0.10, 1.0, 1.0);
        let job = &out.jobs[0];
        assert_eq!(
            job.budget,
            economy::exec_cost(job, &origin).unwrap()
        );
        assert_eq!(
            job.deadline_s,
            economy::exec_time(job, &origin, &origin).unwrap()
        );
    }

    #[test]
    fn oversized_records_are_dropped() {
        let record = TraceRecord {
            job_id: 1,
            submit_s: 0.0,
            run_time_s: 10.0,
            procs: 4096,
            user_id: 1,
        };
        let out = synthesize_jobs(&[record], &lanl_cm5(), 0.10, 2.0, 2.0);
        assert!(out.jobs.is_empty());
        assert_eq!(out.oversized.len(), 1);
    }

    fn jobs_for_users(users: &[i64]) -> Vec<JobSpec> {
        users
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let record = TraceRecord {
                    job_id: i as i64,
                    submit_s: i as f64,
                    run_time_s: 10.0,
                    procs: 1,
                    user_id: u,
                };
                synthesize_jobs(&[record], &lanl_cm5(), 0.1, 2.0, 2.0)
                    .jobs
                    .remove(0)
            })
            .collect()
    }

    #[test]
    fn preference_extremes_cover_everyone() {
        let mut jobs = jobs_for_users(&[1, 2, 3, 1]);
        assign_preferences(&mut jobs, 0, 7);
        assert!(jobs.iter().all(|j| j.preference == Preference::OptimizeCost));
        assign_preferences(&mut jobs, 100, 7);
        assert!(jobs.iter().all(|j| j.preference == Preference::OptimizeTime));
    }

    #[test]
    fn preference_split_is_exact_and_per_user() {
        // Two jobs per user, ten users.
        let users: Vec<i64> = (0..10).flat_map(|u| [u, u]).collect();
        let mut jobs = jobs_for_users(&users);
        assign_preferences(&mut jobs, 30, 99);
        let mut oft_users = std::collections::BTreeSet::new();
        for job in &jobs {
            let peer = jobs
                .iter()
                .find(|j| j.user_id == job.user_id && j.id != job.id)
                .unwrap();
            assert_eq!(job.preference, peer.preference, "users split across preferences");
            if job.preference == Preference::OptimizeTime {
                oft_users.insert(job.user_id);
            }
        }
        assert_eq!(oft_users.len(), 3);
        // Idempotent under the same seed and percentage.
        let snapshot = jobs.clone();
        assign_preferences(&mut jobs, 30, 99);
        assert_eq!(jobs, snapshot);
    }

    #[test]
    fn unknown_users_fall_back_to_per_job_assignment() {
        let mut jobs = jobs_for_users(&[-1; 10]);
        assign_preferences(&mut jobs, 50, 3);
        let oft = jobs
            .iter()
            .filter(|j| j.preference == Preference::OptimizeTime)
            .count();
        assert_eq!(oft, 5);
    }

    fn synth(seed: u64, count: usize) -> Vec<TraceRecord> {
        generate_synthetic(&SynthParams {
            arrival_rate: 0.01,
            runtime_log_mean: 6.0,
            runtime_log_sigma: 1.0,
            max_proc_power: 4,
            job_count: NonZeroUsize::new(count).unwrap(),
            seed,
        })
        .unwrap()
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        assert_eq!(synth(11, 50), synth(11, 50));
        assert_ne!(synth(11, 50), synth(12, 50));
        assert_eq!(synth(1, 1).len(), 1);
    }

    #[test]
    fn synthetic_mean_interarrival_matches_rate() {
        let records = synth(5, 500);
        let mean = records.last().unwrap().submit_s / records.len() as f64;
        assert!(
            (mean - 100.0).abs() < 20.0,
            "mean inter-arrival {mean} strays more than 20% from 100"
        );
    }

    #[test]
    fn synthetic_procs_are_powers_of_two() {
        for r in synth(2, 200) {
            assert!(r.procs.is_power_of_two() && r.procs <= 16);
            assert!(r.run_time_s > 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn origin_time_equals_trace_run_time(
            run in 1.0f64..1e5,
            procs in 1u32..1024,
            comm in 0.0f64..0.9,
        ) {
            let record = TraceRecord {
                job_id: 1,
                submit_s: 0.0,
                run_time_s: run,
                procs,
                user_id: 1,
            };
            let origin = lanl_cm5();
            let out = synthesize_jobs(&[record], &origin, comm, 2.0, 2.0);
            let job = &out.jobs[0];
            let d = economy::exec_time(job, &origin, &origin).unwrap();
            proptest::prop_assert!((d - run).abs() <= 1e-9 * run);
            // The fabrication factors scale origin cost/time exactly.
            let b = economy::exec_cost(job, &origin).unwrap();
            proptest::prop_assert_eq!(job.budget.value(), 2.0 * b.value());
            proptest::prop_assert_eq!(job.deadline_s, 2.0 * d);
        }
    }
}
