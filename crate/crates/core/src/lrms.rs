//! Space-shared FCFS local resource manager.
//!
//! Jobs run on dedicated processors for a deterministic duration, without
//! preemption or backfilling: a queued job starts only once every job ahead
//! of it has started and enough processors are free. Because run times are
//! known, the completion time projected at admission is exact, which is what
//! makes admission-control guarantees sound — a later admission can never
//! delay an earlier one.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::economy::ClusterSpec;
use crate::sim::SimTime;
use crate::workload::JobId;

/// Admission request: everything the manager needs to schedule one job.
#[derive(Debug, Clone, Copy)]
pub struct AdmittedJob {
    pub id: JobId,
    pub procs: u32,
    pub exec_seconds: f64,
    /// Absolute deadline, kept for the guarantee-soundness assertion.
    pub deadline_at: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct QueuedEntry {
    job: AdmittedJob,
    guaranteed_finish: SimTime,
    start_scheduled: bool,
}

#[derive(Debug, Clone, Copy)]
struct RunningJob {
    job: AdmittedJob,
    start: SimTime,
    finish: SimTime,
    guaranteed_finish: SimTime,
}

/// A completed occupancy interval, kept for utilization accounting.
#[derive(Debug, Clone, Copy)]
pub struct BusyInterval {
    pub start: SimTime,
    pub finish: SimTime,
    pub procs: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum LrmsError {
    #[error("job needs {needed} processors but cluster {cluster} owns only {available}")]
    TooLarge {
        cluster: u32,
        available: u32,
        needed: u32,
    },
    #[error("job {job} is not running on cluster {cluster}")]
    UnknownJob { cluster: u32, job: JobId },
}

/// FCFS space-shared scheduler state for one cluster.
#[derive(Debug)]
pub struct Lrms {
    cluster: ClusterSpec,
    free_procs: u32,
    pending_start_procs: u32,
    running: Vec<RunningJob>,
    queue: VecDeque<QueuedEntry>,
    completed: Vec<BusyInterval>,
    busy_proc_seconds: f64,
}

impl Lrms {
    pub fn new(cluster: ClusterSpec) -> Lrms {
        let free_procs = cluster.procs;
        Lrms {
            cluster,
            free_procs,
            pending_start_procs: 0,
            running: Vec::new(),
            queue: VecDeque::new(),
            completed: Vec::new(),
            busy_proc_seconds: 0.0,
        }
    }

    pub fn cluster(&self) -> &ClusterSpec {
        &self.cluster
    }

    pub fn free_procs(&self) -> u32 {
        self.free_procs
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn running_len(&self) -> usize {
        self.running.len()
    }

    pub fn busy_proc_seconds(&self) -> f64 {
        self.busy_proc_seconds
    }

    /// Exact completion time the job would have if admitted now at the back
    /// of the queue. Does not mutate state.
    pub fn estimate_completion(
        &self,
        procs: u32,
        exec_seconds: f64,
        at: SimTime,
    ) -> Result<SimTime, LrmsError> {
        if procs > self.cluster.procs {
            return Err(LrmsError::TooLarge {
                cluster: self.cluster.id,
                available: self.cluster.procs,
                needed: procs,
            });
        }
        Ok(self.project(procs, exec_seconds, at))
    }

    /// Projects the FCFS schedule forward: replays processor releases from
    /// the running set, starts queued entries in order (never skipping), and
    /// returns the completion time of one extra job appended at the back.
    fn project(&self, extra_procs: u32, extra_seconds: f64, at: SimTime) -> SimTime {
        let mut releases: BinaryHeap<Reverse<(SimTime, u32)>> = self
            .running
            .iter()
            .map(|r| Reverse((r.finish, r.job.procs)))
            .collect();
        let mut free = self.free_procs;
        let mut t = at;
        let mut start_of = |procs: u32, seconds: f64| -> SimTime {
            while free < procs {
                let Reverse((release_at, released)) = releases
                    .pop()
                    .expect("queued demand exceeds cluster capacity");
                if release_at > t {
                    t = release_at;
                }
                free += released;
            }
            free -= procs;
            releases.push(Reverse((t.offset(seconds), procs)));
            t
        };
        for entry in &self.queue {
            start_of(entry.job.procs, entry.job.exec_seconds);
        }
        start_of(extra_procs, extra_seconds).offset(extra_seconds)
    }

    /// Appends the job to the queue and returns its guaranteed finish, the
    /// projection at this instant. The caller is responsible for having
    /// checked feasibility first.
    pub fn admit(&mut self, job: AdmittedJob, at: SimTime) -> SimTime {
        assert!(
            job.procs <= self.cluster.procs,
            "admission of an oversized job must be screened by the caller"
        );
        let guaranteed_finish = self.project(job.procs, job.exec_seconds, at);
        self.queue.push_back(QueuedEntry {
            job,
            guaranteed_finish,
            start_scheduled: false,
        });
        guaranteed_finish
    }

    /// Marks every queued job that can start right now (in FCFS order, no
    /// skipping) and returns them; the caller schedules their start events.
    pub fn take_ready(&mut self, _at: SimTime) -> Vec<JobId> {
        let mut available = self.free_procs - self.pending_start_procs;
        let mut ready = Vec::new();
        for entry in self.queue.iter_mut() {
            if entry.start_scheduled {
                continue;
            }
            if entry.job.procs > available {
                break;
            }
            available -= entry.job.procs;
            self.pending_start_procs += entry.job.procs;
            entry.start_scheduled = true;
            ready.push(entry.job.id);
        }
        ready
    }

    /// Moves the queue head onto processors. Returns the job's finish time so
    /// the caller can schedule its completion event.
    pub fn on_start(&mut self, id: JobId, at: SimTime) -> SimTime {
        let entry = self
            .queue
            .pop_front()
            .expect("start event for an empty queue");
        assert_eq!(entry.job.id, id, "starts must fire in FCFS order");
        assert!(entry.start_scheduled, "start event without a ready mark");
        self.pending_start_procs -= entry.job.procs;
        self.free_procs -= entry.job.procs;
        let finish = at.offset(entry.job.exec_seconds);
        self.running.push(RunningJob {
            job: entry.job,
            start: at,
            finish,
            guaranteed_finish: entry.guaranteed_finish,
        });
        self.assert_conservation();
        finish
    }

    /// Releases the job's processors and accumulates its busy time. Returns
    /// the released processor count.
    pub fn on_completion(&mut self, id: JobId, at: SimTime) -> Result<u32, LrmsError> {
        let idx = self
            .running
            .iter()
            .position(|r| r.job.id == id)
            .ok_or(LrmsError::UnknownJob {
                cluster: self.cluster.id,
                job: id,
            })?;
        let done = self.running.swap_remove(idx);
        assert!(
            at.seconds() <= done.guaranteed_finish.seconds() + 1e-9,
            "job {id} finished at {at}, past its guarantee {}",
            done.guaranteed_finish
        );
        assert!(
            at.seconds() <= done.job.deadline_at.seconds() + 1e-9,
            "job {id} finished at {at}, past its deadline {}",
            done.job.deadline_at
        );
        self.free_procs += done.job.procs;
        self.busy_proc_seconds +=
            f64::from(done.job.procs) * (at.seconds() - done.start.seconds());
        self.completed.push(BusyInterval {
            start: done.start,
            finish: at,
            procs: done.job.procs,
        });
        self.assert_conservation();
        Ok(done.job.procs)
    }

    /// Fraction of processor capacity doing real work within the span.
    pub fn utilization(&self, span_start: SimTime, span_end: SimTime) -> f64 {
        assert!(span_end > span_start, "utilization span must be non-empty");
        let busy: f64 = self
            .completed
            .iter()
            .copied()
            // Still-running jobs should not survive a drained run, but their
            // known finish lets them be clipped correctly regardless.
            .chain(self.running.iter().map(static_interval))
            .map(|iv| {
                let lo = iv.start.seconds().max(span_start.seconds());
                let hi = iv.finish.seconds().min(span_end.seconds());
                f64::from(iv.procs) * (hi - lo).max(0.0)
            })
            // An explicit positive seed: summing an empty iterator of f64
            // yields -0.0, which would print as "-0.000000".
            .fold(0.0, |acc, x| acc + x);
        busy / (f64::from(self.cluster.procs) * (span_end.seconds() - span_start.seconds()))
    }

    fn assert_conservation(&self) {
        debug_assert_eq!(
            self.free_procs + self.running.iter().map(|r| r.job.procs).sum::<u32>(),
            self.cluster.procs,
            "processor conservation violated on cluster {}",
            self.cluster.id
        );
    }
}

fn static_interval(r: &RunningJob) -> BusyInterval {
    // Running jobs contribute up to their known finish.
    BusyInterval {
        start: r.start,
        finish: r.finish,
        procs: r.job.procs,
    }
}
