//! Bound-constrained quasi-Newton minimization and the ID-vs-FAID campaign runner.

mod campaign;
mod lbfgs;

pub use campaign::{
    fingerprint, run_campaign, run_single, trace_csv, CampaignResult, CrossEval, IterationRecord, RunMode, RunTrace,
};
pub use lbfgs::{minimize, OptConfig, OptResult, OptStep, Termination};
