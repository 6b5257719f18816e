//! Dual averaging for decentralized optimization over open, time-varying
//! multi-agent networks, with a least-absolute-deviation regression
//! benchmark, DGD baselines, and regret accounting.

pub mod config;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod lad;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod runners;
pub mod vecs;

pub use error::{Error, Result};
