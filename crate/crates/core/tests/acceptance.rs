//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (visible under `cargo test -- --nocapture`).
//!
//! The suite runs against the bundled deterministic workload: the
//! eight-cluster roster under the default synthetic trace (~500 jobs, fixed
//! seed).

mod common;

use std::panic::AssertUnwindSafe;
use std::time::Instant;

use gridfed_core::config::{replicate_roster, ScenarioConfig};
use gridfed_core::economy::{self, quote_price, ClusterSpec, Money, PricingAnchor};
use gridfed_core::experiment::{build_jobs, run_scenario, scale, sweep};
use gridfed_core::federation::{FederationSim, JobStatus};
use gridfed_core::sim::SimTime;
use gridfed_core::workload::{clip_horizon, generate_synthetic, JobId, JobSpec, Preference};
use gridfed_core::SchedulingMode;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn criterion<F: FnOnce()>(number: u8, name: &str, body: F) {
    let started = Instant::now();
    let result = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = started.elapsed();
    match &result {
        Ok(()) => println!("criterion {number:02} ({name}): PASS [{elapsed:.2?}]"),
        Err(_) => println!("criterion {number:02} ({name}): FAIL [{elapsed:.2?}]"),
    }
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
}

fn bundled() -> ScenarioConfig {
    ScenarioConfig::default()
}

#[test]
fn criterion_01_quote_pricing_reproduces_advertised_roster() {
    criterion(1, "quote pricing", || {
        let anchor = PricingAnchor::new(Money::new(5.3), 930.0);
        let advertised = [4.84, 5.12, 3.98, 3.59, 5.3, 4.04, 4.16, 5.24];
        let specs = bundled().cluster_specs();
        assert_eq!(specs.len(), 8);
        for (spec, expected) in specs.iter().zip(advertised) {
            let quoted = quote_price(spec.speed_mips, &anchor);
            assert!(
                (quoted.value() - expected).abs() <= 0.01,
                "{}: quoted {} vs advertised {expected}",
                spec.name,
                quoted
            );
            assert!((spec.price.value() - expected).abs() <= 0.01);
        }
    });
}

#[test]
fn criterion_02_origin_identity_over_bundled_workload() {
    criterion(2, "origin identity", || {
        let config = bundled();
        let specs = config.cluster_specs();
        let (jobs, dropped) = build_jobs(&config, &specs).unwrap();
        assert_eq!(dropped, 0);
        assert!(jobs.len() >= 400, "bundled workload holds ~500 jobs");
        // Reconstruct the underlying trace run times per origin.
        let mut run_time = std::collections::BTreeMap::new();
        for spec in &specs {
            let records = clip_horizon(
                generate_synthetic(&config.synth_params(spec.id)).unwrap(),
                config.horizon_seconds,
            );
            for r in records {
                run_time.insert(
                    JobId {
                        origin: spec.id,
                        local: r.job_id,
                    },
                    r.run_time_s,
                );
            }
        }
        for job in &jobs {
            let origin = specs.iter().find(|s| s.id == job.origin()).unwrap();
            let r = run_time[&job.id];
            let d = economy::exec_time(job, origin, origin).unwrap();
            assert!(
                (d - r).abs() <= 1e-9 * r,
                "job {}: origin time {d} vs trace run {r}",
                job.id
            );
            let b = economy::exec_cost(job, origin).unwrap();
            assert_eq!(job.budget.value(), 2.0 * b.value(), "budget is exactly 2x");
            assert_eq!(job.deadline_s, 2.0 * d, "deadline is exactly 2x");
        }
    });
}

#[test]
fn criterion_03_cost_invariance_under_default_pricing() {
    criterion(3, "cost invariance", || {
        let anchor = PricingAnchor::new(Money::new(5.3), 930.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0xC057);
        for case in 0..1000 {
            let speeds: Vec<f64> = (0..4).map(|_| rng.random_range(100.0..2000.0)).collect();
            let hosts: Vec<ClusterSpec> = speeds
                .iter()
                .enumerate()
                .map(|(i, &speed)| {
                    ClusterSpec::new(
                        i as u32 + 1,
                        format!("h{i}"),
                        64,
                        speed,
                        rng.random_range(0.5..4.0),
                        quote_price(speed, &anchor),
                    )
                })
                .collect();
            let job = JobSpec {
                id: JobId { origin: 1, local: case },
                user_id: case,
                submit: SimTime::ZERO,
                length_mi: rng.random_range(1.0..1e9),
                procs: 1 << rng.random_range(0..6),
                comm_overhead_s: rng.random_range(0.0..100.0),
                budget: Money::new(1e12),
                deadline_s: 1e12,
                preference: Preference::OptimizeCost,
            };
            let costs: Vec<f64> = hosts
                .iter()
                .map(|h| economy::exec_cost(&job, h).unwrap().value())
                .collect();
            for pair in costs.windows(2) {
                assert!(
                    (pair[0] - pair[1]).abs() <= 1e-9 * pair[0].max(pair[1]),
                    "case {case}: costs {costs:?} differ across hosts"
                );
            }
        }
    });
}

#[test]
fn criterion_04_deadline_and_budget_soundness_everywhere() {
    criterion(4, "deadline/budget soundness", || {
        let mut checked = 0u64;
        for seed in [42u64, 7] {
            for (mode, profiles) in [
                (SchedulingMode::Independent, vec![30u8]),
                (SchedulingMode::FastestFirst, vec![30]),
                (SchedulingMode::Economy, vec![0, 30, 50, 100]),
            ] {
                for oft in profiles {
                    let config = ScenarioConfig {
                        mode,
                        oft_percent: oft,
                        seed,
                        ..bundled()
                    };
                    let result = run_scenario(&config).unwrap();
                    for outcome in result.sim.outcomes() {
                        if let JobStatus::Accepted { finish, cost_paid, .. } = outcome.status {
                            assert!(
                                finish.seconds()
                                    <= outcome.deadline_at.seconds()
                                        + 1e-9 * outcome.deadline_at.seconds(),
                                "job {} finished past its deadline",
                                outcome.job
                            );
                            assert!(
                                cost_paid.value()
                                    <= outcome.budget.value() * (1.0 + 1e-9),
                                "job {} paid {} over budget {}",
                                outcome.job,
                                cost_paid,
                                outcome.budget
                            );
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 1000, "soundness must cover many accepted jobs");
    });
}

#[test]
fn criterion_05_oracle_equivalence_on_small_instances() {
    criterion(5, "oracle equivalence", || {
        for instance in 0..100u64 {
            let (clusters, jobs) = common::random_instance(1000 + instance);
            let expected = common::place_all(&clusters, &jobs);
            let mut sim = FederationSim::new(clusters, SchedulingMode::Economy, 0.0);
            sim.submit(jobs.clone());
            sim.run();
            for (job, want) in jobs.iter().zip(&expected) {
                let outcome = sim
                    .outcomes()
                    .iter()
                    .find(|o| o.job == job.id)
                    .expect("every job decided");
                assert_eq!(
                    outcome.host(),
                    *want,
                    "instance {instance}, job {}: loop chose {:?}, evaluator chose {want:?}",
                    job.id,
                    outcome.host()
                );
            }
        }
    });
}

#[test]
fn criterion_06_message_arithmetic() {
    criterion(6, "message arithmetic", || {
        let anchor = PricingAnchor::new(Money::new(5.3), 930.0);
        let priced = |id: u32, procs: u32, speed: f64| {
            ClusterSpec::new(id, format!("c{id}"), procs, speed, 1.0, quote_price(speed, &anchor))
        };
        let make_job = |origin: &ClusterSpec, local: i64, submit: f64, run: f64| {
            let mut job = JobSpec {
                id: JobId { origin: origin.id, local },
                user_id: local,
                submit: SimTime::new(submit),
                length_mi: run * origin.speed_mips * 4.0,
                procs: 4,
                comm_overhead_s: 0.0,
                budget: Money::ZERO,
                deadline_s: 2.0 * run,
                preference: Preference::OptimizeTime,
            };
            job.budget = economy::exec_cost(&job, origin).unwrap().scaled(2.0);
            job
        };
        let entries = |messages: u64| if messages > 2 { (messages - 2) / 2 } else { messages / 2 };

        // Local acceptance: two messages, one directory entry.
        let solo = priced(1, 8, 700.0);
        let job = make_job(&solo, 1, 0.0, 100.0);
        let id = job.id;
        let mut sim = FederationSim::new(vec![solo], SchedulingMode::Economy, 0.0);
        sim.submit(vec![job]);
        sim.run();
        let o = sim.outcomes().iter().find(|o| o.job == id).unwrap();
        assert_eq!(o.messages, 2);
        assert_eq!(entries(o.messages), 1);
        assert_eq!(o.attempts, 1);

        // Remote acceptance at attempts r = 1, 2, 3: 2r + 2 messages and r
        // directory entries. Saturate the r-1 fastest clusters first.
        for r in 1u64..=3 {
            let mut clusters = vec![
                priced(1, 4, 930.0),
                priced(2, 4, 920.0),
                priced(3, 4, 910.0),
            ];
            clusters.truncate(r as usize);
            let slow = priced(9, 4, 700.0);
            clusters.push(slow.clone());
            let mut jobs = Vec::new();
            // Blockers hold every faster cluster busy past the target's
            // deadline. The second blocker's own deadline must be tight
            // enough that it refuses to queue behind the first and lands on
            // its home cluster instead.
            let blocker_runs = [50_000.0, 1000.0];
            for (i, fast) in clusters.iter().enumerate().take(r as usize - 1) {
                jobs.push(make_job(fast, i as i64 + 1, 0.0, blocker_runs[i]));
            }
            let target = make_job(&slow, 100, 1.0, 400.0);
            let target_id = target.id;
            jobs.push(target);
            let mut sim = FederationSim::new(clusters, SchedulingMode::Economy, 0.0);
            sim.submit(jobs);
            sim.run();
            let outcome = sim.outcomes().iter().find(|o| o.job == target_id).unwrap();
            assert_eq!(outcome.attempts, r as u32, "acceptance at attempt {r}");
            assert_ne!(outcome.host(), Some(9), "acceptance must be remote");
            assert_eq!(outcome.messages, 2 * r + 2, "messages at attempt {r}");
            assert_eq!(entries(outcome.messages), r, "entries at attempt {r}");
        }
    });
}

#[test]
fn criterion_07_federation_uplift() {
    criterion(7, "federation uplift", || {
        let acceptance = |mode: SchedulingMode| {
            let config = ScenarioConfig { mode, ..bundled() };
            run_scenario(&config).unwrap().report.global.accepted_pct
        };
        let independent = acceptance(SchedulingMode::Independent);
        let fastest = acceptance(SchedulingMode::FastestFirst);
        let economy = acceptance(SchedulingMode::Economy);
        assert!(fastest >= independent);
        assert!(economy >= independent);
        if independent < 100.0 {
            assert!(
                fastest > independent,
                "fastest-first must strictly improve ({fastest} vs {independent})"
            );
            assert!(
                economy > independent,
                "economy must strictly improve ({economy} vs {independent})"
            );
        }
        // The bundled workload is tuned to make the comparison meaningful.
        assert!(independent < 100.0, "bundled workload leaves local rejections");
    });
}

#[test]
fn criterion_08_message_volume_direction() {
    criterion(8, "message-volume direction", || {
        let messages = |oft: u8| {
            let config = ScenarioConfig {
                oft_percent: oft,
                ..bundled()
            };
            run_scenario(&config).unwrap().report.global.total_messages
        };
        let all_cost = messages(0);
        let all_time = messages(100);
        assert!(
            all_time > all_cost,
            "all-time-optimizing traffic ({all_time}) must exceed all-cost ({all_cost})"
        );
    });
}

#[test]
fn criterion_09_sweep_determinism() {
    criterion(9, "sweep determinism", || {
        let config = bundled();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        sweep(&config, dir_a.path()).unwrap();
        sweep(&config, dir_b.path()).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.contains(&"sweep.csv".to_string()));
        assert!(names.len() > 12, "sweep csv, dat series and per-profile runs");
        for name in names {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical sweeps");
        }
    });
}

#[test]
fn criterion_10_scale_harness() {
    criterion(10, "scalability harness", || {
        let config = ScenarioConfig {
            oft_percent: 100,
            ..bundled()
        };
        let dir = tempfile::tempdir().unwrap();
        let points = scale(&config, 50, dir.path()).unwrap();
        assert_eq!(
            points.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
            vec![10, 20, 30, 40, 50]
        );
        for ((n_a, a), (n_b, b)) in points.iter().zip(points.iter().skip(1)) {
            assert!(
                b.global.job_msg_avg >= a.global.job_msg_avg,
                "per-job average messages fell from {} (n={n_a}) to {} (n={n_b})",
                a.global.job_msg_avg,
                b.global.job_msg_avg
            );
        }
        // Roster growth follows the cycling rule.
        let ten = replicate_roster(&config.cluster_specs(), 10);
        assert_eq!(ten.len(), 10);
        assert_eq!(ten[8].speed_mips, ten[0].speed_mips);
        assert_eq!(ten[9].speed_mips, ten[1].speed_mips);
        assert!(std::fs::read_to_string(dir.path().join("scale.csv"))
            .unwrap()
            .lines()
            .count()
            == 6);
    });
}
