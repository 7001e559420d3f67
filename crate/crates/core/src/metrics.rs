//! Per-run aggregates and machine-readable reports.
//!
//! Inclusive-of-rejected averages substitute what a rejected job would have
//! cost and taken on its originating cluster, so rejection does not silently
//! improve the user-perceived numbers.

use std::io::{self, Write};

use crate::economy::{ClusterId, Money};
use crate::federation::{FederationSim, JobStatus};
use crate::sim::SimTime;

/// Aggregates for one cluster (rows keyed by origin population except where
/// noted).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub id: ClusterId,
    pub name: String,
    /// Busy processor-seconds over capacity within the report span.
    pub utilization: f64,
    pub jobs_total: u64,
    pub jobs_accepted: u64,
    pub jobs_rejected: u64,
    pub accepted_pct: f64,
    pub rejected_pct: f64,
    /// Accepted jobs from here that ran here.
    pub processed_locally: u64,
    /// Accepted jobs from here that ran elsewhere.
    pub migrated_out: u64,
    /// Jobs from elsewhere that ran here.
    pub remote_processed: u64,
    pub incentive: Money,
    pub local_messages: u64,
    pub remote_messages: u64,
    pub avg_response_excl_s: f64,
    pub avg_budget_excl: f64,
    pub avg_response_incl_s: f64,
    pub avg_budget_incl: f64,
    pub job_msg_min: u64,
    pub job_msg_avg: f64,
    pub job_msg_max: u64,
    /// Sent plus received protocol messages at this agent.
    pub gfa_messages: u64,
}

/// Federation-wide aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalReport {
    pub utilization: f64,
    pub jobs_total: u64,
    pub jobs_accepted: u64,
    pub jobs_rejected: u64,
    pub accepted_pct: f64,
    pub rejected_pct: f64,
    pub processed_locally: u64,
    pub migrated_out: u64,
    pub remote_processed: u64,
    pub incentive_total: Money,
    /// Every protocol message exactly once.
    pub total_messages: u64,
    pub local_messages: u64,
    pub remote_messages: u64,
    pub avg_response_excl_s: f64,
    pub avg_budget_excl: f64,
    pub avg_response_incl_s: f64,
    pub avg_budget_incl: f64,
    pub job_msg_min: u64,
    pub job_msg_avg: f64,
    pub job_msg_max: u64,
    pub gfa_msg_min: u64,
    pub gfa_msg_avg: f64,
    pub gfa_msg_max: u64,
    pub directory_queries: u64,
    pub directory_query_messages: u64,
    pub span_start: SimTime,
    pub span_end: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub clusters: Vec<ClusterReport>,
    pub global: GlobalReport,
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64 * 100.0
    }
}

fn mean(sum: f64, count: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Response time and budget sums over one job population, excluding and
/// including rejected jobs (the latter priced at origin expectations).
#[derive(Default)]
struct QosSums {
    accepted: u64,
    total: u64,
    response_excl: f64,
    budget_excl: f64,
    response_incl: f64,
    budget_incl: f64,
    msg_min: u64,
    msg_max: u64,
    msg_sum: u64,
}

impl QosSums {
    fn add(&mut self, outcome: &crate::federation::JobOutcome) {
        self.total += 1;
        if self.total == 1 {
            self.msg_min = outcome.messages;
        } else {
            self.msg_min = self.msg_min.min(outcome.messages);
        }
        self.msg_max = self.msg_max.max(outcome.messages);
        self.msg_sum += outcome.messages;
        match outcome.status {
            JobStatus::Accepted { finish, cost_paid, .. } => {
                self.accepted += 1;
                let response = finish.seconds() - outcome.submit.seconds();
                self.response_excl += response;
                self.budget_excl += cost_paid.value();
                self.response_incl += response;
                self.budget_incl += cost_paid.value();
            }
            JobStatus::Rejected => {
                self.response_incl += outcome.origin_expected_time_s;
                self.budget_incl += outcome.origin_expected_cost.value();
            }
        }
    }
}

/// Computes the full report from a drained simulation. The utilization span
/// defaults to earliest submission through latest completion across the
/// federation (shared by all clusters so their numbers are comparable) and
/// can be overridden.
pub fn finalize(sim: &FederationSim, span_override: Option<(SimTime, SimTime)>) -> MetricsReport {
    let outcomes = sim.outcomes();
    let span = span_override.or_else(|| {
        let start = outcomes.iter().map(|o| o.submit).min()?;
        let end = outcomes
            .iter()
            .filter_map(|o| match o.status {
                JobStatus::Accepted { finish, .. } => Some(finish),
                JobStatus::Rejected => None,
            })
            .max()
            .unwrap_or(start);
        Some((start, end))
    });
    let (span_start, span_end) = span.unwrap_or((SimTime::ZERO, SimTime::ZERO));

    let mut clusters = Vec::with_capacity(sim.nodes().len());
    for node in sim.nodes() {
        let spec = node.spec();
        let mut sums = QosSums::default();
        let mut processed_locally = 0u64;
        let mut migrated_out = 0u64;
        let mut remote_processed = 0u64;
        for outcome in outcomes {
            if let JobStatus::Accepted { host, .. } = outcome.status {
                if host == spec.id {
                    if outcome.job.origin == spec.id {
                        processed_locally += 1;
                    } else {
                        remote_processed += 1;
                    }
                } else if outcome.job.origin == spec.id {
                    migrated_out += 1;
                }
            }
            if outcome.job.origin == spec.id {
                sums.add(outcome);
            }
        }
        let utilization = if span_end > span_start {
            node.lrms.utilization(span_start, span_end)
        } else {
            0.0
        };
        assert!(
            utilization <= 1.0 + 1e-9,
            "cluster {} utilization {utilization} exceeds capacity",
            spec.id
        );
        clusters.push(ClusterReport {
            id: spec.id,
            name: spec.name.clone(),
            utilization,
            jobs_total: sums.total,
            jobs_accepted: sums.accepted,
            jobs_rejected: sums.total - sums.accepted,
            accepted_pct: pct(sums.accepted, sums.total),
            rejected_pct: pct(sums.total - sums.accepted, sums.total),
            processed_locally,
            migrated_out,
            remote_processed,
            incentive: node.incentive,
            local_messages: node.local.total(),
            remote_messages: node.remote.total(),
            avg_response_excl_s: mean(sums.response_excl, sums.accepted),
            avg_budget_excl: mean(sums.budget_excl, sums.accepted),
            avg_response_incl_s: mean(sums.response_incl, sums.total),
            avg_budget_incl: mean(sums.budget_incl, sums.total),
            job_msg_min: sums.msg_min,
            job_msg_avg: mean(sums.msg_sum as f64, sums.total),
            job_msg_max: sums.msg_max,
            gfa_messages: node.message_total(),
        });
    }

    let mut global_sums = QosSums::default();
    for outcome in outcomes {
        global_sums.add(outcome);
    }
    let jobs_accepted = global_sums.accepted;
    let jobs_total = global_sums.total;

    // Conservation and reconciliation checks. Every accepted job ran
    // somewhere; every message was counted once as local at its origin.
    let migrated: u64 = clusters.iter().map(|c| c.migrated_out).sum();
    let remote: u64 = clusters.iter().map(|c| c.remote_processed).sum();
    assert_eq!(migrated, remote, "migration bookkeeping out of balance");
    let local_messages: u64 = clusters.iter().map(|c| c.local_messages).sum();
    let remote_messages: u64 = clusters.iter().map(|c| c.remote_messages).sum();
    let per_job_messages: u64 = outcomes.iter().map(|o| o.messages).sum();
    assert_eq!(
        local_messages, per_job_messages,
        "per-agent and per-job message totals disagree"
    );
    let self_messages: u64 = sim.nodes().iter().map(|n| n.self_messages).sum();
    assert_eq!(
        local_messages,
        remote_messages + self_messages,
        "local/remote/self message reconciliation failed"
    );
    let incentive_total: Money = sim.nodes().iter().map(|n| n.incentive).sum();
    let paid_total: f64 = outcomes
        .iter()
        .filter_map(|o| match o.status {
            JobStatus::Accepted { cost_paid, .. } => Some(cost_paid.value()),
            JobStatus::Rejected => None,
        })
        .sum();
    assert!(
        (incentive_total.value() - paid_total).abs() <= 1e-6 * paid_total.max(1.0),
        "incentives {incentive_total} do not match payments {paid_total}"
    );

    let busy: f64 = sim.nodes().iter().map(|n| n.lrms.busy_proc_seconds()).sum();
    let capacity: f64 = sim
        .specs()
        .iter()
        .map(|s| f64::from(s.procs))
        .sum::<f64>()
        * (span_end.seconds() - span_start.seconds());
    let gfa_totals: Vec<u64> = sim.nodes().iter().map(|n| n.message_total()).collect();
    let stats = sim.directory_stats();
    let global = GlobalReport {
        utilization: if capacity > 0.0 { busy / capacity } else { 0.0 },
        jobs_total,
        jobs_accepted,
        jobs_rejected: jobs_total - jobs_accepted,
        accepted_pct: pct(jobs_accepted, jobs_total),
        rejected_pct: pct(jobs_total - jobs_accepted, jobs_total),
        processed_locally: clusters.iter().map(|c| c.processed_locally).sum(),
        migrated_out: migrated,
        remote_processed: remote,
        incentive_total,
        total_messages: local_messages,
        local_messages,
        remote_messages,
        avg_response_excl_s: mean(global_sums.response_excl, jobs_accepted),
        avg_budget_excl: mean(global_sums.budget_excl, jobs_accepted),
        avg_response_incl_s: mean(global_sums.response_incl, jobs_total),
        avg_budget_incl: mean(global_sums.budget_incl, jobs_total),
        job_msg_min: global_sums.msg_min,
        job_msg_avg: mean(global_sums.msg_sum as f64, jobs_total),
        job_msg_max: global_sums.msg_max,
        gfa_msg_min: gfa_totals.iter().copied().min().unwrap_or(0),
        gfa_msg_avg: mean(gfa_totals.iter().sum::<u64>() as f64, gfa_totals.len() as u64),
        gfa_msg_max: gfa_totals.iter().copied().max().unwrap_or(0),
        directory_queries: stats.query_count,
        directory_query_messages: stats.modeled_query_messages,
        span_start,
        span_end,
    };
    MetricsReport { clusters, global }
}

/// Fixed CSV header, one row per cluster plus a `GLOBAL` row. Decimal point
/// `.`, comma separator, LF line endings; cluster rows leave the
/// directory columns empty and report their own message total in all three
/// `gfa_msg_*` columns.
pub const CSV_HEADER: &str = "cluster_id,name,utilization,jobs_total,accepted_pct,rejected_pct,\
processed_locally,migrated_out,remote_processed,incentive_gd,local_messages,remote_messages,\
avg_response_excl_s,avg_budget_excl_gd,avg_response_incl_s,avg_budget_incl_gd,\
job_msg_min,job_msg_avg,job_msg_max,gfa_msg_min,gfa_msg_avg,gfa_msg_max,\
directory_queries,directory_query_messages";

/// Writes the report as CSV. Re-emitting the same report yields an
/// identical byte stream.
pub fn emit_csv<W: Write>(report: &MetricsReport, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in &report.clusters {
        writeln!(
            out,
            "{},{},{:.6},{},{:.2},{:.2},{},{},{},{:.2},{},{},{:.3},{:.2},{:.3},{:.2},{},{:.3},{},{},{},{},,",
            c.id,
            c.name,
            c.utilization,
            c.jobs_total,
            c.accepted_pct,
            c.rejected_pct,
            c.processed_locally,
            c.migrated_out,
            c.remote_processed,
            c.incentive.value(),
            c.local_messages,
            c.remote_messages,
            c.avg_response_excl_s,
            c.avg_budget_excl,
            c.avg_response_incl_s,
            c.avg_budget_incl,
            c.job_msg_min,
            c.job_msg_avg,
            c.job_msg_max,
            c.gfa_messages,
            c.gfa_messages,
            c.gfa_messages,
        )?;
    }
    let g = &report.global;
    writeln!(
        out,
        "GLOBAL,,{:.6},{},{:.2},{:.2},{},{},{},{:.2},{},{},{:.3},{:.2},{:.3},{:.2},{},{:.3},{},{},{:.3},{},{},{}",
        g.utilization,
        g.jobs_total,
        g.accepted_pct,
        g.rejected_pct,
        g.processed_locally,
        g.migrated_out,
        g.remote_processed,
        g.incentive_total.value(),
        g.local_messages,
        g.remote_messages,
        g.avg_response_excl_s,
        g.avg_budget_excl,
        g.avg_response_incl_s,
        g.avg_budget_incl,
        g.job_msg_min,
        g.job_msg_avg,
        g.job_msg_max,
        g.gfa_msg_min,
        g.gfa_msg_avg,
        g.gfa_msg_max,
        g.directory_queries,
        g.directory_query_messages,
    )?;
    Ok(())
}
