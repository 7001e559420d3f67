//! Shared test support: an exhaustive placement evaluator kept independent
//! of the production scheduling path, plus a random small-instance
//! generator.
//!
//! The evaluator re-derives every decision from first principles: it walks
//! jobs in arrival order, computes each cluster's completion estimate with
//! its own FCFS projection (interval-usage counting, not the simulator's
//! release-heap), applies the feasibility predicate directly, and picks the
//! minimum-price (cost-optimizing) or maximum-speed (time-optimizing)
//! feasible cluster with ties broken by cluster id.

use gridfed_core::economy::{ClusterId, ClusterSpec, Money};
use gridfed_core::sim::SimTime;
use gridfed_core::workload::{JobId, JobSpec, Preference};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
struct Committed {
    start: f64,
    finish: f64,
    procs: u32,
}

/// Earliest start for `procs` processors requested at `at` on a cluster
/// whose committed jobs (admission order) are given. No job may start before
/// a job admitted earlier, and nothing is preempted.
fn fcfs_start(committed: &[Committed], capacity: u32, at: f64, procs: u32) -> f64 {
    assert!(procs <= capacity);
    let last_start = committed.last().map(|c| c.start).unwrap_or(0.0);
    let floor = at.max(last_start);
    let mut candidates: Vec<f64> = committed
        .iter()
        .map(|c| c.finish)
        .filter(|&f| f > floor)
        .collect();
    candidates.push(floor);
    candidates.sort_by(f64::total_cmp);
    for tau in candidates {
        let usage: u32 = committed
            .iter()
            .filter(|c| c.start <= tau && tau < c.finish)
            .map(|c| c.procs)
            .sum();
        if usage + procs <= capacity {
            return tau;
        }
    }
    unreachable!("capacity frees up after the last committed finish");
}

/// Places every job by exhaustive evaluation. Returns the chosen host per
/// job (None = rejected), in the order the jobs were given.
pub fn place_all(clusters: &[ClusterSpec], jobs: &[JobSpec]) -> Vec<Option<ClusterId>> {
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| jobs[a].submit.seconds().total_cmp(&jobs[b].submit.seconds()));
    let mut committed: Vec<Vec<Committed>> = vec![Vec::new(); clusters.len()];
    let mut hosts: Vec<Option<ClusterId>> = vec![None; jobs.len()];
    for &ji in &order {
        let job = &jobs[ji];
        let origin = clusters
            .iter()
            .find(|c| c.id == job.origin())
            .expect("origin in roster");
        let now = job.submit.seconds();
        let mut best: Option<usize> = None;
        for (ci, cluster) in clusters.iter().enumerate() {
            if cluster.procs < job.procs {
                continue;
            }
            let compute = job.length_mi / (cluster.speed_mips * f64::from(job.procs));
            let duration =
                compute + job.comm_overhead_s * origin.bandwidth_gbps / cluster.bandwidth_gbps;
            let cost = cluster.price.value() * compute;
            if cost > job.budget.value() {
                continue;
            }
            let start = fcfs_start(&committed[ci], cluster.procs, now, job.procs);
            if start + duration > now + job.deadline_s {
                continue;
            }
            let beats = |incumbent: usize| -> bool {
                let other = &clusters[incumbent];
                match job.preference {
                    Preference::OptimizeCost => {
                        match cluster.price.value().total_cmp(&other.price.value()) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Greater => false,
                            std::cmp::Ordering::Equal => cluster.id < other.id,
                        }
                    }
                    Preference::OptimizeTime => {
                        match cluster.speed_mips.total_cmp(&other.speed_mips) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => cluster.id < other.id,
                        }
                    }
                }
            };
            if best.is_none() || beats(best.unwrap()) {
                best = Some(ci);
            }
        }
        if let Some(ci) = best {
            let job_ref = &jobs[ji];
            let cluster = &clusters[ci];
            let compute = job_ref.length_mi / (cluster.speed_mips * f64::from(job_ref.procs));
            let duration = compute
                + job_ref.comm_overhead_s * origin.bandwidth_gbps / cluster.bandwidth_gbps;
            let start = fcfs_start(&committed[ci], cluster.procs, now, job_ref.procs);
            committed[ci].push(Committed {
                start,
                finish: start + duration,
                procs: job_ref.procs,
            });
            hosts[ji] = Some(cluster.id);
        }
    }
    hosts
}

/// A random small federation: up to four clusters with palette-drawn prices
/// and speeds (collisions force tie-breaking) and up to twenty jobs with
/// loose-to-tight budgets and deadlines.
pub fn random_instance(seed: u64) -> (Vec<ClusterSpec>, Vec<JobSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speeds = [300.0, 500.0, 500.0, 700.0, 900.0];
    let prices = [1.0, 2.0, 2.0, 3.5, 5.0];
    let bandwidths = [1.0, 2.0, 4.0];
    let cluster_count = rng.random_range(1..=4);
    let clusters: Vec<ClusterSpec> = (0..cluster_count)
        .map(|i| {
            ClusterSpec::new(
                i as ClusterId + 1,
                format!("oracle-{i}"),
                *[2u32, 4, 8, 16].choose(&mut rng).unwrap(),
                *speeds.choose(&mut rng).unwrap(),
                *bandwidths.choose(&mut rng).unwrap(),
                Money::new(*prices.choose(&mut rng).unwrap()),
            )
        })
        .collect();
    let job_count = rng.random_range(1..=20);
    let jobs: Vec<JobSpec> = (0..job_count)
        .map(|i| {
            let origin = clusters.choose(&mut rng).unwrap();
            let max_power = origin.procs.ilog2();
            let procs = 2u32.pow(rng.random_range(0..=max_power));
            let run_s = rng.random_range(10.0..500.0);
            let comm_s = run_s * rng.random_range(0.0..0.3);
            let mut job = JobSpec {
                id: JobId {
                    origin: origin.id,
                    local: i as i64,
                },
                user_id: i as i64,
                submit: SimTime::new(rng.random_range(0..400) as f64),
                length_mi: (run_s - comm_s) * origin.speed_mips * f64::from(procs),
                procs,
                comm_overhead_s: comm_s,
                budget: Money::ZERO,
                deadline_s: run_s * rng.random_range(0.7..3.0),
                preference: if rng.random_bool(0.5) {
                    Preference::OptimizeTime
                } else {
                    Preference::OptimizeCost
                },
            };
            let origin_cost =
                origin.price.value() * job.length_mi / (origin.speed_mips * f64::from(procs));
            job.budget = Money::new(origin_cost * rng.random_range(0.5..3.0));
            job
        })
        .collect();
    (clusters, jobs)
}
