//! Plan hinting toolkit for LLM-driven query optimization.
//!
//! The crate covers the offline data pipeline and the online selection
//! loop around a hint-driven optimizer:
//!
//! * [`plan_model`] and [`hint_codec`] turn planner output into simplified
//!   plans and `pg_hint_plan` hint sets, and back.
//! * [`plan_space`] counts and enumerates plan spaces.
//! * [`catalog_stats`] renders per-query statistics for prompts.
//! * [`dbms_client`] talks to PostgreSQL (through `psql`) or replays
//!   recorded fixtures; [`sim`] is a self-contained simulated database.
//! * [`candidate_search`], [`label_harness`], [`dataset_builder`] and
//!   [`selector`] implement candidate generation, latency labeling, training
//!   data emission and plan selection.
//!
//! Latency-carrying types are generic over a [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod backend;
pub mod candidate_search;
pub mod catalog_stats;
pub mod dataset_builder;
pub mod dbms_client;
pub mod hint_codec;
pub mod label_harness;
pub mod plan_model;
pub mod plan_space;
pub mod prompts;
pub mod scalar;
pub mod schema;
pub mod selector;
pub mod sim;
pub mod sql;

pub use backend::{BackendError, GenerationBackend, GenerationRequest};
pub use candidate_search::{all_bao_arms, default_arm_subset, BaoArm, CandidateEntry, CandidateSet, Provenance};
pub use catalog_stats::{obtain_statistics, render_stats, CatalogSnapshot, QueryStats, StatValue};
pub use dbms_client::{DbmsClient, DbmsError, ExecutionResult, FixtureClient, KnobVector, PsqlClient};
pub use hint_codec::{hints_to_plan, parse_hints, render_hints, transform_plan, HintError, HintSet};
pub use label_harness::{collect_labels, LabelPolicy, LabeledQuery};
pub use plan_model::{simplify, JoinType, PlanNode, PlanTree, ScanType, SimpleNode, SimplifiedPlan};
pub use scalar::{Count, Scalar};
pub use selector::{SelectionOutcome, Strategy};
pub use sim::ToyDb;

pub type ExecutionResultF32 = ExecutionResult<f32>;
pub type ExecutionResultF64 = ExecutionResult<f64>;
pub type LabeledQueryF32 = LabeledQuery<f32>;
pub type LabeledQueryF64 = LabeledQuery<f64>;
pub type LabelPolicyF64 = LabelPolicy<f64>;
pub type FixtureClientF64 = FixtureClient<f64>;
pub type ToyDbF32 = ToyDb<f32>;
pub type ToyDbF64 = ToyDb<f64>;
