//! Freshness-driven crawl scheduling with unknown change rates.
//!
//! Pages change as Poisson processes with unknown rates and are requested at
//! known rates. The crate simulates crawls, estimates change rates from the
//! bits a crawler observes, allocates a refresh bandwidth across pages, and
//! runs explore-then-commit style controllers and experiments on top.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom pin the precision.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod policies;
pub mod process_sim;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PageEnsembleF64 = process_sim::PageEnsemble<f64>;
pub type PolicyF64 = process_sim::Policy<f64>;
pub type HorizonF64 = process_sim::Horizon<f64>;
pub type SimulationTraceF64 = process_sim::SimulationTrace<f64>;
pub type ObservationLogF64 = estimation::ObservationLog<f64>;
pub type RateEstimateF64 = estimation::RateEstimate<f64>;
pub type AllocationResultF64 = allocation::AllocationResult<f64>;
pub type EtcConfigF64 = policies::EtcConfig<f64>;
pub type RegretRecordF64 = policies::RegretRecord<f64>;

pub type PageEnsembleF32 = process_sim::PageEnsemble<f32>;
pub type ObservationLogF32 = estimation::ObservationLog<f32>;
pub type AllocationResultF32 = allocation::AllocationResult<f32>;
