//! Federation agents and the superscheduling protocol.
//!
//! Each cluster is fronted by one agent that owns the local resource manager
//! and negotiates placements for jobs submitted by its local user population.
//! On a job arrival the agent walks the shared directory in preference order
//! (cheapest-first for cost-optimizing jobs, fastest-first for
//! time-optimizing jobs), sends a negotiate message to each candidate in
//! turn, and ships the job to the first agent that guarantees completion
//! within the deadline. Exhausting the directory rejects the job.
//!
//! Message accounting: every protocol message is counted once as a *local*
//! message at the agent whose job it concerns and once as a *remote* message
//! at the non-origin endpoint; messages an agent sends to itself count local
//! only. Candidates that fail the static screen (too few processors, or a
//! statically knowable budget violation for time-optimizing jobs) are
//! skipped without messaging. Directory lookups are charged separately, see
//! [`crate::directory`].

use std::collections::BTreeMap;
use std::io::Write;

use crate::directory::{Directory, DirectoryStats, Quote};
use crate::economy::{self, ClusterId, ClusterSpec, Feasibility, Money};
use crate::lrms::{AdmittedJob, Lrms};
use crate::sim::{Event, EventPayload, EventQueue, SimTime};
use crate::workload::{JobId, JobSpec, Preference};

/// How placement decisions are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulingMode {
    /// Every cluster keeps its own workload; admission is deadline-only.
    Independent,
    /// Local first, then remote clusters in decreasing speed order;
    /// admission is deadline-only.
    FastestFirst,
    /// The full economy loop: cheapest- or fastest-order probing per job
    /// preference, budget and deadline both enforced.
    Economy,
}

/// Protocol message kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Negotiate,
    Reply,
    JobSubmission,
    JobCompletion,
}

impl MessageKind {
    fn label(self) -> &'static str {
        match self {
            MessageKind::Negotiate => "negotiate",
            MessageKind::Reply => "reply",
            MessageKind::JobSubmission => "job-submission",
            MessageKind::JobCompletion => "job-completion",
        }
    }
}

/// Message totals broken down by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCounts {
    pub negotiate: u64,
    pub reply: u64,
    pub job_submission: u64,
    pub job_completion: u64,
}

impl KindCounts {
    fn bump(&mut self, kind: MessageKind) {
        match kind {
            MessageKind::Negotiate => self.negotiate += 1,
            MessageKind::Reply => self.reply += 1,
            MessageKind::JobSubmission => self.job_submission += 1,
            MessageKind::JobCompletion => self.job_completion += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.negotiate + self.reply + self.job_submission + self.job_completion
    }
}

/// One cluster's agent state: its resource manager, message counters and
/// earned incentive.
#[derive(Debug)]
pub struct ClusterNode {
    pub lrms: Lrms,
    /// Messages concerning jobs that originated here.
    pub local: KindCounts,
    /// Messages received here concerning other agents' jobs.
    pub remote: KindCounts,
    /// Local messages that never crossed the network (self-negotiation).
    pub self_messages: u64,
    /// Grid Dollars earned by executing jobs, local or remote.
    pub incentive: Money,
}

impl ClusterNode {
    pub fn spec(&self) -> &ClusterSpec {
        self.lrms.cluster()
    }

    /// Sent plus received messages at this agent.
    pub fn message_total(&self) -> u64 {
        self.local.total() + self.remote.total()
    }
}

/// Final disposition of one job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobStatus {
    Accepted {
        host: ClusterId,
        start: SimTime,
        finish: SimTime,
        cost_paid: Money,
    },
    Rejected,
}

/// Per-job record emitted once the job's fate is known.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub job: JobId,
    pub user_id: i64,
    pub preference: Preference,
    pub submit: SimTime,
    pub budget: Money,
    pub deadline_at: SimTime,
    pub status: JobStatus,
    /// Directory entries inspected before the job was placed or dropped.
    pub attempts: u32,
    /// Protocol messages attributable to this job.
    pub messages: u64,
    /// Cost the job would have paid on its origin cluster.
    pub origin_expected_cost: Money,
    /// Unloaded execution time on the origin cluster, in seconds.
    pub origin_expected_time_s: f64,
}

impl JobOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self.status, JobStatus::Accepted { .. })
    }

    pub fn host(&self) -> Option<ClusterId> {
        match self.status {
            JobStatus::Accepted { host, .. } => Some(host),
            JobStatus::Rejected => None,
        }
    }

    /// Submission-to-completion time for accepted jobs.
    pub fn response_time_s(&self) -> Option<f64> {
        match self.status {
            JobStatus::Accepted { finish, .. } => {
                Some(finish.seconds() - self.submit.seconds())
            }
            JobStatus::Rejected => None,
        }
    }
}

/// Events driving one simulation instance.
#[derive(Debug, Clone)]
pub enum EventKind {
    JobArrival(JobId),
    /// Resume the probe loop for a job at the given attempt (latency mode).
    DirectoryQuery { job: JobId, attempt: u32 },
    NegotiateRequest { job: JobId, host: ClusterId, attempt: u32 },
    NegotiateReply { job: JobId, host: ClusterId, attempt: u32, accept: bool },
    JobDispatch { job: JobId, host: ClusterId, attempt: u32 },
    JobStart { job: JobId, cluster: ClusterId },
    JobCompletion { job: JobId, cluster: ClusterId },
}

impl EventPayload for EventKind {
    fn kind(&self) -> &'static str {
        match self {
            EventKind::JobArrival(_) => "JobArrival",
            EventKind::DirectoryQuery { .. } => "DirectoryQuery",
            EventKind::NegotiateRequest { .. } => "NegotiateRequest",
            EventKind::NegotiateReply { .. } => "NegotiateReply",
            EventKind::JobDispatch { .. } => "JobDispatch",
            EventKind::JobStart { .. } => "JobStart",
            EventKind::JobCompletion { .. } => "JobCompletion",
        }
    }

    fn summary(&self) -> String {
        match self {
            EventKind::JobArrival(job) => format!("job={job}"),
            EventKind::DirectoryQuery { job, attempt } => format!("job={job} r={attempt}"),
            EventKind::NegotiateRequest { job, host, attempt } => {
                format!("job={job} host={host} r={attempt}")
            }
            EventKind::NegotiateReply { job, host, accept, .. } => {
                format!("job={job} host={host} accept={accept}")
            }
            EventKind::JobDispatch { job, host, .. } => format!("job={job} host={host}"),
            EventKind::JobStart { job, cluster } => format!("job={job} cluster={cluster}"),
            EventKind::JobCompletion { job, cluster } => format!("job={job} cluster={cluster}"),
        }
    }
}

#[derive(Debug)]
struct JobRecord {
    spec: JobSpec,
    attempts: u32,
    messages: u64,
    /// Next directory rank to inspect in fastest-first mode.
    fastest_rank: usize,
    host: Option<usize>,
    start: Option<SimTime>,
    done: bool,
}

struct World {
    mode: SchedulingMode,
    latency_s: f64,
    specs: Vec<ClusterSpec>,
    nodes: Vec<ClusterNode>,
    index_of: BTreeMap<ClusterId, usize>,
    directory: Directory,
    jobs: BTreeMap<JobId, JobRecord>,
    outcomes: Vec<JobOutcome>,
    protocol_trace: Option<Box<dyn Write + Send>>,
}

/// One complete simulation instance: the event queue plus all agent state.
pub struct FederationSim {
    queue: EventQueue<EventKind>,
    world: World,
}

impl FederationSim {
    /// Builds a federation over the given clusters and subscribes every
    /// agent's quote to the directory. `latency_s` is the fixed one-way
    /// transit time of inter-agent messages; zero resolves negotiations at
    /// the arrival instant.
    pub fn new(clusters: Vec<ClusterSpec>, mode: SchedulingMode, latency_s: f64) -> FederationSim {
        assert!(!clusters.is_empty(), "a federation needs at least one cluster");
        assert!(latency_s >= 0.0, "message latency cannot be negative");
        let mut directory = Directory::new();
        let mut index_of = BTreeMap::new();
        let mut nodes = Vec::with_capacity(clusters.len());
        for (idx, spec) in clusters.iter().enumerate() {
            directory
                .subscribe(Quote::from_cluster(spec))
                .unwrap_or_else(|e| panic!("cluster roster is inconsistent: {e}"));
            let previous = index_of.insert(spec.id, idx);
            assert!(previous.is_none(), "duplicate cluster id {}", spec.id);
            nodes.push(ClusterNode {
                lrms: Lrms::new(spec.clone()),
                local: KindCounts::default(),
                remote: KindCounts::default(),
                self_messages: 0,
                incentive: Money::ZERO,
            });
        }
        FederationSim {
            queue: EventQueue::new(),
            world: World {
                mode,
                latency_s,
                specs: clusters,
                nodes,
                index_of,
                directory,
                jobs: BTreeMap::new(),
                outcomes: Vec::new(),
                protocol_trace: None,
            },
        }
    }

    /// Emit the event log (`time<TAB>seq<TAB>kind<TAB>summary`) to `sink`.
    pub fn set_event_log(&mut self, sink: Box<dyn Write + Send>) {
        self.queue.set_log(sink);
    }

    /// Emit protocol messages (`time<TAB>kind<TAB>from<TAB>to<TAB>job<TAB>detail`).
    pub fn set_protocol_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.world.protocol_trace = Some(sink);
    }

    /// Registers jobs and schedules their arrivals. Arrival ties at one
    /// instant resolve in submission order.
    pub fn submit(&mut self, jobs: Vec<JobSpec>) {
        for job in jobs {
            assert!(
                self.world.index_of.contains_key(&job.origin()),
                "job {} originates at unknown cluster {}",
                job.id,
                job.origin()
            );
            let id = job.id;
            let submit = job.submit;
            let previous = self.world.jobs.insert(
                id,
                JobRecord {
                    spec: job,
                    attempts: 0,
                    messages: 0,
                    fastest_rank: 1,
                    host: None,
                    start: None,
                    done: false,
                },
            );
            assert!(previous.is_none(), "duplicate job id {id}");
            self.queue
                .schedule(submit, EventKind::JobArrival(id))
                .expect("arrivals precede the run");
        }
    }

    /// Runs the simulation to completion; returns the processed event count.
    pub fn run(&mut self) -> usize {
        let world = &mut self.world;
        let count = self
            .queue
            .run_to_completion(|queue, event| world.handle(queue, event));
        debug_assert!(
            world.jobs.values().all(|j| j.done),
            "run drained with undecided jobs"
        );
        count
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn outcomes(&self) -> &[JobOutcome] {
        &self.world.outcomes
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.world.nodes
    }

    pub fn specs(&self) -> &[ClusterSpec] {
        &self.world.specs
    }

    pub fn directory_stats(&self) -> DirectoryStats {
        self.world.directory.stats()
    }

    pub fn mode(&self) -> SchedulingMode {
        self.world.mode
    }
}

impl World {
    fn handle(&mut self, queue: &mut EventQueue<EventKind>, event: Event<EventKind>) {
        match event.payload {
            EventKind::JobArrival(job) => self.on_arrival(queue, job),
            EventKind::DirectoryQuery { job, attempt } => self.probe(queue, job, attempt),
            EventKind::NegotiateRequest { job, host, attempt } => {
                self.on_negotiate(queue, job, host, attempt)
            }
            EventKind::NegotiateReply { job, host, attempt, accept } => {
                self.on_reply(queue, job, host, attempt, accept)
            }
            EventKind::JobDispatch { job, host, attempt } => {
                self.on_dispatch(queue, job, host, attempt)
            }
            EventKind::JobStart { job, cluster } => self.on_start(queue, job, cluster),
            EventKind::JobCompletion { job, cluster } => self.on_completion(queue, job, cluster),
        }
    }

    fn on_arrival(&mut self, queue: &mut EventQueue<EventKind>, job: JobId) {
        if self.latency_s == 0.0 {
            self.resolve_immediately(queue, job);
        } else {
            queue
                .schedule(queue.now(), EventKind::DirectoryQuery { job, attempt: 1 })
                .expect("now is never in the past");
        }
    }

    /// Zero-latency resolution: the whole query-negotiate loop completes at
    /// the arrival instant, so an accepting reply is immediately followed by
    /// the submission and the guarantee cannot slip.
    fn resolve_immediately(&mut self, queue: &mut EventQueue<EventKind>, job: JobId) {
        let spec = self.jobs[&job].spec.clone();
        let origin_idx = self.index_of[&spec.origin()];
        let now = queue.now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let Some(candidate) = self.next_candidate(&spec, attempt) else {
                self.record_attempts(job, attempt - 1);
                self.finalize_rejected(job);
                return;
            };
            self.record_attempts(job, attempt);
            if self.screened_out(&spec, &candidate) {
                continue;
            }
            let host_idx = self.index_of[&candidate.cluster_id];
            let (est, verdict) = self.evaluate(&spec, host_idx, now);
            self.send(now, MessageKind::Negotiate, job, origin_idx, host_idx, format!("r={attempt}"));
            let detail = if verdict.is_ok() {
                format!("accept guarantee={est}")
            } else {
                format!("reject {verdict:?}")
            };
            self.send(now, MessageKind::Reply, job, host_idx, origin_idx, detail);
            if verdict.is_ok() {
                if host_idx != origin_idx {
                    self.send(now, MessageKind::JobSubmission, job, origin_idx, host_idx, String::new());
                }
                self.admit(queue, job, host_idx, now);
                return;
            }
        }
    }

    /// Latency-mode probe loop: advances over screened-out candidates
    /// synchronously, then either negotiates with a remote agent (one
    /// message in flight at a time) or self-negotiates instantly.
    fn probe(&mut self, queue: &mut EventQueue<EventKind>, job: JobId, start_attempt: u32) {
        let spec = self.jobs[&job].spec.clone();
        let origin_idx = self.index_of[&spec.origin()];
        let now = queue.now();
        let mut attempt = start_attempt;
        loop {
            let Some(candidate) = self.next_candidate(&spec, attempt) else {
                self.record_attempts(job, attempt - 1);
                self.finalize_rejected(job);
                return;
            };
            self.record_attempts(job, attempt);
            if self.screened_out(&spec, &candidate) {
                attempt += 1;
                continue;
            }
            let host_idx = self.index_of[&candidate.cluster_id];
            if host_idx == origin_idx {
                // Self-negotiation does not transit the network.
                let (est, verdict) = self.evaluate(&spec, host_idx, now);
                self.send(now, MessageKind::Negotiate, job, origin_idx, host_idx, format!("r={attempt}"));
                let detail = if verdict.is_ok() {
                    format!("accept guarantee={est}")
                } else {
                    format!("reject {verdict:?}")
                };
                self.send(now, MessageKind::Reply, job, host_idx, origin_idx, detail);
                if verdict.is_ok() {
                    self.admit(queue, job, host_idx, now);
                    return;
                }
                attempt += 1;
                continue;
            }
            self.send(now, MessageKind::Negotiate, job, origin_idx, host_idx, format!("r={attempt}"));
            queue
                .schedule(
                    now.offset(self.latency_s),
                    EventKind::NegotiateRequest {
                        job,
                        host: candidate.cluster_id,
                        attempt,
                    },
                )
                .expect("future event");
            return;
        }
    }

    fn on_negotiate(
        &mut self,
        queue: &mut EventQueue<EventKind>,
        job: JobId,
        host: ClusterId,
        attempt: u32,
    ) {
        let spec = self.jobs[&job].spec.clone();
        let origin_idx = self.index_of[&spec.origin()];
        let host_idx = self.index_of[&host];
        let now = queue.now();
        let (est, verdict) = self.evaluate(&spec, host_idx, now);
        let accept = verdict.is_ok();
        let detail = if accept {
            format!("accept guarantee={est}")
        } else {
            format!("reject {verdict:?}")
        };
        self.send(now, MessageKind::Reply, job, host_idx, origin_idx, detail);
        queue
            .schedule(
                now.offset(self.latency_s),
                EventKind::NegotiateReply { job, host, attempt, accept },
            )
            .expect("future event");
    }

    fn on_reply(
        &mut self,
        queue: &mut EventQueue<EventKind>,
        job: JobId,
        host: ClusterId,
        attempt: u32,
        accept: bool,
    ) {
        if !accept {
            self.probe(queue, job, attempt + 1);
            return;
        }
        let origin_idx = self.index_of[&self.jobs[&job].spec.origin()];
        let host_idx = self.index_of[&host];
        let now = queue.now();
        self.send(now, MessageKind::JobSubmission, job, origin_idx, host_idx, String::new());
        queue
            .schedule(
                now.offset(self.latency_s),
                EventKind::JobDispatch { job, host, attempt },
            )
            .expect("future event");
    }

    /// The job arrives at an accepting host. The guarantee is re-validated:
    /// load admitted since the reply may have pushed the estimate past the
    /// deadline, in which case the job bounces back to the origin's loop at
    /// the next rank.
    fn on_dispatch(
        &mut self,
        queue: &mut EventQueue<EventKind>,
        job: JobId,
        host: ClusterId,
        attempt: u32,
    ) {
        let spec = self.jobs[&job].spec.clone();
        let origin_idx = self.index_of[&spec.origin()];
        let host_idx = self.index_of[&host];
        let now = queue.now();
        let (_, verdict) = self.evaluate(&spec, host_idx, now);
        if verdict.is_ok() {
            self.admit(queue, job, host_idx, now);
            return;
        }
        self.send(
            now,
            MessageKind::Reply,
            job,
            host_idx,
            origin_idx,
            format!("bounce {verdict:?}"),
        );
        queue
            .schedule(
                now.offset(self.latency_s),
                EventKind::DirectoryQuery { job, attempt: attempt + 1 },
            )
            .expect("future event");
    }

    fn on_start(&mut self, queue: &mut EventQueue<EventKind>, job: JobId, cluster: ClusterId) {
        let host_idx = self.index_of[&cluster];
        let now = queue.now();
        let finish = self.nodes[host_idx].lrms.on_start(job, now);
        self.jobs.get_mut(&job).expect("known job").start = Some(now);
        queue
            .schedule(finish, EventKind::JobCompletion { job, cluster })
            .expect("finish is in the future");
    }

    fn on_completion(&mut self, queue: &mut EventQueue<EventKind>, job: JobId, cluster: ClusterId) {
        let host_idx = self.index_of[&cluster];
        let now = queue.now();
        self.nodes[host_idx]
            .lrms
            .on_completion(job, now)
            .expect("completion events reference running jobs");
        let spec = self.jobs[&job].spec.clone();
        let origin_idx = self.index_of[&spec.origin()];
        let cost = economy::exec_cost(&spec, &self.specs[host_idx]).expect("admitted job fits");
        self.nodes[host_idx].incentive += cost;
        if host_idx != origin_idx {
            self.send(
                now,
                MessageKind::JobCompletion,
                job,
                host_idx,
                origin_idx,
                format!("cost={cost}"),
            );
        }
        self.finalize_accepted(job, host_idx, now, cost);
        // Freed processors may start queued jobs.
        self.schedule_ready(queue, host_idx);
    }

    /// Directory walk for one attempt. Independent mode only ever considers
    /// the origin; fastest-first tries the origin before walking the
    /// directory in speed order (skipping the origin's own entry); economy
    /// mode walks purely by the job's preference.
    fn next_candidate(&mut self, spec: &JobSpec, attempt: u32) -> Option<Quote> {
        let origin = spec.origin();
        match self.mode {
            SchedulingMode::Independent => (attempt == 1)
                .then(|| Quote::from_cluster(&self.specs[self.index_of[&origin]])),
            SchedulingMode::FastestFirst => {
                if attempt == 1 {
                    return Some(Quote::from_cluster(&self.specs[self.index_of[&origin]]));
                }
                let rank = &mut self
                    .jobs
                    .get_mut(&spec.id)
                    .expect("known job")
                    .fastest_rank;
                loop {
                    let quote = self.directory.kth_fastest(*rank)?;
                    *rank += 1;
                    if quote.cluster_id != origin {
                        return Some(quote);
                    }
                }
            }
            SchedulingMode::Economy => match spec.preference {
                Preference::OptimizeTime => self.directory.kth_fastest(attempt as usize),
                Preference::OptimizeCost => self.directory.kth_cheapest(attempt as usize),
            },
        }
    }

    /// True when the origin agent can rule the candidate out without
    /// messaging: not enough processors, or (for time-optimizing jobs) an
    /// execution cost above budget, which static quotes fully determine.
    fn screened_out(&self, spec: &JobSpec, candidate: &Quote) -> bool {
        if candidate.procs < spec.procs {
            return true;
        }
        if self.mode == SchedulingMode::Economy
            && spec.preference == Preference::OptimizeTime
        {
            let host = &self.specs[self.index_of[&candidate.cluster_id]];
            let cost = economy::exec_cost(spec, host).expect("procs checked");
            if cost.value() > spec.budget.value() {
                return true;
            }
        }
        false
    }

    /// Host-side admission check: completion estimate against the job's
    /// constraints. Economy mode enforces budget and deadline; the
    /// non-economy modes admit on the deadline alone.
    fn evaluate(&self, spec: &JobSpec, host_idx: usize, now: SimTime) -> (SimTime, Feasibility) {
        let origin = &self.specs[self.index_of[&spec.origin()]];
        let host = &self.specs[host_idx];
        if host.procs < spec.procs {
            return (now, Feasibility::TooSmall);
        }
        let duration = economy::exec_time(spec, origin, host).expect("procs checked");
        let est = self.nodes[host_idx]
            .lrms
            .estimate_completion(spec.procs, duration, now)
            .expect("procs checked");
        let verdict = match self.mode {
            SchedulingMode::Economy => economy::feasibility(spec, origin, host, est),
            _ => economy::feasibility_deadline_only(spec, host, est),
        };
        (est, verdict)
    }

    fn admit(&mut self, queue: &mut EventQueue<EventKind>, job: JobId, host_idx: usize, now: SimTime) {
        let spec = self.jobs[&job].spec.clone();
        let origin = &self.specs[self.index_of[&spec.origin()]];
        let duration = economy::exec_time(&spec, origin, &self.specs[host_idx])
            .expect("admitted job fits");
        self.nodes[host_idx].lrms.admit(
            AdmittedJob {
                id: job,
                procs: spec.procs,
                exec_seconds: duration,
                deadline_at: spec.deadline_at(),
            },
            now,
        );
        let record = self.jobs.get_mut(&job).expect("known job");
        record.host = Some(host_idx);
        self.schedule_ready(queue, host_idx);
    }

    fn schedule_ready(&mut self, queue: &mut EventQueue<EventKind>, host_idx: usize) {
        let now = queue.now();
        let cluster = self.specs[host_idx].id;
        for job in self.nodes[host_idx].lrms.take_ready(now) {
            queue
                .schedule(now, EventKind::JobStart { job, cluster })
                .expect("now is never in the past");
        }
    }

    fn record_attempts(&mut self, job: JobId, attempts: u32) {
        self.jobs.get_mut(&job).expect("known job").attempts = attempts;
    }

    /// Counts one message: local at the agent owning the job, remote at the
    /// other endpoint when the message crossed the network.
    fn send(
        &mut self,
        now: SimTime,
        kind: MessageKind,
        job: JobId,
        from_idx: usize,
        to_idx: usize,
        detail: String,
    ) {
        let origin_idx = self.index_of[&job.origin];
        self.nodes[origin_idx].local.bump(kind);
        let other = if from_idx == origin_idx { to_idx } else { from_idx };
        if other == origin_idx {
            self.nodes[origin_idx].self_messages += 1;
        } else {
            self.nodes[other].remote.bump(kind);
        }
        self.jobs.get_mut(&job).expect("known job").messages += 1;
        if let Some(sink) = self.protocol_trace.as_mut() {
            let _ = writeln!(
                sink,
                "{now}\t{}\t{}\t{}\t{job}\t{detail}",
                kind.label(),
                self.specs[from_idx].id,
                self.specs[to_idx].id,
            );
        }
    }

    fn finalize_accepted(&mut self, job: JobId, host_idx: usize, finish: SimTime, cost: Money) {
        let record = self.jobs.get_mut(&job).expect("known job");
        assert!(!record.done, "job {job} finalized twice");
        record.done = true;
        let spec = &record.spec;
        let start = record.start.expect("accepted job started");
        let status = JobStatus::Accepted {
            host: self.specs[host_idx].id,
            start,
            finish,
            cost_paid: cost,
        };
        assert!(
            finish.seconds() <= spec.deadline_at().seconds() + 1e-9,
            "admission control let job {job} finish at {finish}, past its deadline {}",
            spec.deadline_at()
        );
        let outcome = JobOutcome {
            job,
            user_id: spec.user_id,
            preference: spec.preference,
            submit: spec.submit,
            budget: spec.budget,
            deadline_at: spec.deadline_at(),
            status,
            attempts: record.attempts,
            messages: record.messages,
            origin_expected_cost: origin_cost(spec, &self.specs, &self.index_of),
            origin_expected_time_s: origin_time(spec, &self.specs, &self.index_of),
        };
        self.outcomes.push(outcome);
    }

    fn finalize_rejected(&mut self, job: JobId) {
        let record = self.jobs.get_mut(&job).expect("known job");
        assert!(!record.done, "job {job} finalized twice");
        record.done = true;
        let spec = &record.spec;
        let outcome = JobOutcome {
            job,
            user_id: spec.user_id,
            preference: spec.preference,
            submit: spec.submit,
            budget: spec.budget,
            deadline_at: spec.deadline_at(),
            status: JobStatus::Rejected,
            attempts: record.attempts.max(1),
            messages: record.messages,
            origin_expected_cost: origin_cost(spec, &self.specs, &self.index_of),
            origin_expected_time_s: origin_time(spec, &self.specs, &self.index_of),
        };
        self.outcomes.push(outcome);
    }
}

fn origin_cost(
    spec: &JobSpec,
    specs: &[ClusterSpec],
    index_of: &BTreeMap<ClusterId, usize>,
) -> Money {
    let origin = &specs[index_of[&spec.origin()]];
    economy::exec_cost(spec, origin).unwrap_or(Money::ZERO)
}

fn origin_time(
    spec: &JobSpec,
    specs: &[ClusterSpec],
    index_of: &BTreeMap<ClusterId, usize>,
) -> f64 {
    let origin = &specs[index_of[&spec.origin()]];
    economy::exec_time(spec, origin, origin).unwrap_or(f64::INFINITY)
}
