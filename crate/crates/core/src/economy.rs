//! Closed-form cluster economics: quote pricing, transfer volume, execution
//! time, execution cost and the QoS feasibility predicate used by admission
//! control.
//!
//! A job's execution time on a host splits into a compute term
//! `length / (speed * procs)` and a communication term that rescales the
//! origin-side overhead by the bandwidth ratio `origin_bw / host_bw`. The
//! execution cost charges the compute term only, at the host's advertised
//! price per compute-second.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::sim::SimTime;
use crate::workload::JobSpec;

/// Integer identity of a cluster; also the deterministic tie-breaker
/// everywhere orderings can collide.
pub type ClusterId = u32;

/// Grid Dollars. Non-negative, double precision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Money(f64);

impl Money {
    pub const ZERO: Money = Money(0.0);

    pub fn new(value: f64) -> Money {
        assert!(
            value.is_finite() && value >= 0.0,
            "money must be finite and non-negative, got {value}"
        );
        Money(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn scaled(self, factor: f64) -> Money {
        Money::new(self.0 * factor)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

/// Static description of one cluster: processor count, per-processor speed,
/// interconnect bandwidth and the advertised access price.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub id: ClusterId,
    pub name: String,
    pub procs: u32,
    /// MIPS per processor.
    pub speed_mips: f64,
    /// Interconnect bandwidth in Gb/s.
    pub bandwidth_gbps: f64,
    /// Grid Dollars per compute-second.
    pub price: Money,
}

impl ClusterSpec {
    pub fn new(
        id: ClusterId,
        name: impl Into<String>,
        procs: u32,
        speed_mips: f64,
        bandwidth_gbps: f64,
        price: Money,
    ) -> ClusterSpec {
        assert!(procs >= 1, "cluster {id} must own at least one processor");
        assert!(speed_mips > 0.0, "cluster {id} speed must be positive");
        assert!(
            bandwidth_gbps > 0.0,
            "cluster {id} bandwidth must be positive"
        );
        ClusterSpec {
            id,
            name: name.into(),
            procs,
            speed_mips,
            bandwidth_gbps,
            price,
        }
    }
}

/// Reference point for static quote pricing: the access price of the fastest
/// cluster in the federation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingAnchor {
    pub access_price: Money,
    pub fastest_speed_mips: f64,
}

impl PricingAnchor {
    pub fn new(access_price: Money, fastest_speed_mips: f64) -> PricingAnchor {
        assert!(access_price.value() > 0.0, "access price must be positive");
        assert!(fastest_speed_mips > 0.0, "anchor speed must be positive");
        PricingAnchor {
            access_price,
            fastest_speed_mips,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EconomyError {
    #[error("host cluster {host} offers {available} processors, job needs {needed}")]
    InsufficientProcessors {
        host: ClusterId,
        available: u32,
        needed: u32,
    },
}

/// Verdict of the admission feasibility screen, in check order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Ok,
    /// Host owns fewer processors than the job requires.
    TooSmall,
    /// Execution cost on the host exceeds the job's budget.
    BudgetViolated,
    /// Estimated completion lands after the job's absolute deadline.
    DeadlineViolated,
}

impl Feasibility {
    pub fn is_ok(self) -> bool {
        self == Feasibility::Ok
    }
}

/// Advertised price for a cluster of the given speed: the anchor access
/// price scaled linearly by speed relative to the fastest cluster.
pub fn quote_price(speed_mips: f64, anchor: &PricingAnchor) -> Money {
    assert!(speed_mips > 0.0, "speed must be positive");
    Money::new(anchor.access_price.value() / anchor.fastest_speed_mips * speed_mips)
}

/// Total data moved during a parallel job's execution, in gigabits. Depends
/// only on the origin cluster (overhead seconds at origin bandwidth).
pub fn transfer_volume_gb(job: &JobSpec, origin: &ClusterSpec) -> f64 {
    debug_assert_eq!(job.origin(), origin.id);
    job.comm_overhead_s * origin.bandwidth_gbps
}

/// Seconds for the job to execute on `host`: compute time plus the origin
/// communication overhead rescaled by the bandwidth ratio.
pub fn exec_time(job: &JobSpec, origin: &ClusterSpec, host: &ClusterSpec) -> Result<f64, EconomyError> {
    if host.procs < job.procs {
        return Err(EconomyError::InsufficientProcessors {
            host: host.id,
            available: host.procs,
            needed: job.procs,
        });
    }
    let compute = job.length_mi / (host.speed_mips * f64::from(job.procs));
    let comm = transfer_volume_gb(job, origin) / host.bandwidth_gbps;
    Ok(compute + comm)
}

/// Grid Dollars charged for running the job on `host`: price times compute
/// time. Communication is not billed.
pub fn exec_cost(job: &JobSpec, host: &ClusterSpec) -> Result<Money, EconomyError> {
    if host.procs < job.procs {
        return Err(EconomyError::InsufficientProcessors {
            host: host.id,
            available: host.procs,
            needed: job.procs,
        });
    }
    let compute = job.length_mi / (host.speed_mips * f64::from(job.procs));
    Ok(host.price.scaled(compute))
}

/// Full QoS screen: processor fit, then budget, then deadline (inclusive
/// boundary: completing exactly at `submit + deadline` is acceptable).
pub fn feasibility(
    job: &JobSpec,
    origin: &ClusterSpec,
    host: &ClusterSpec,
    est_completion: SimTime,
) -> Feasibility {
    debug_assert_eq!(job.origin(), origin.id);
    if host.procs < job.procs {
        return Feasibility::TooSmall;
    }
    let cost = exec_cost(job, host).expect("processor fit checked above");
    if cost.value() > job.budget.value() {
        return Feasibility::BudgetViolated;
    }
    if est_completion > job.deadline_at() {
        return Feasibility::DeadlineViolated;
    }
    Feasibility::Ok
}

/// Deadline-only variant used by the non-economy sharing modes, which admit
/// purely on completion-time guarantees.
pub fn feasibility_deadline_only(job: &JobSpec, host: &ClusterSpec, est_completion: SimTime) -> Feasibility {
    if host.procs < job.procs {
        return Feasibility::TooSmall;
    }
    if est_completion > job.deadline_at() {
        return Feasibility::DeadlineViolated;
    }
    Feasibility::Ok
}
