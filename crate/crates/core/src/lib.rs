//! Deterministic discrete-event simulator of economy-driven superscheduling
//! across federated clusters.
//!
//! Each cluster runs a space-shared FCFS resource manager behind a
//! federation agent. Agents advertise static price quotes into a shared
//! directory and place arriving jobs by walking the directory in preference
//! order (cheapest-first or fastest-first), negotiating a completion-time
//! guarantee with each candidate before shipping the job. The crate also
//! ships the workload tooling (trace ingestion, synthetic generation,
//! budget/deadline fabrication), metrics aggregation and the experiment
//! drivers behind the `gridfed` command line.

pub mod config;
pub mod directory;
pub mod economy;
pub mod experiment;
pub mod federation;
pub mod lrms;
pub mod metrics;
pub mod sim;
pub mod workload;

pub use config::{parse_config, ScenarioConfig};
pub use economy::{ClusterId, ClusterSpec, Money, PricingAnchor};
pub use federation::{FederationSim, JobOutcome, JobStatus, SchedulingMode};
pub use metrics::MetricsReport;
pub use sim::SimTime;
pub use workload::{JobId, JobSpec, Preference};
