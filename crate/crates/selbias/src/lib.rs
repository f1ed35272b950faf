//! Quantify selection bias when K models are evaluated on shared data.
//!
//! The library simulates coupled centered random walks (one per candidate
//! model), estimates the per-step selection premium and its decay, checks
//! nonasymptotic envelopes, extends the accounting to stopping times, and
//! audits real score matrices for winner's-curse optimism.
//!
//! Start with the runnable programs in `examples/`; the `selbias` binary
//! exposes the same reports as CSV/JSON emitting subcommands.

mod error;
pub mod ensemble;
pub mod hetero;
pub mod increments;
pub mod isotonic;
pub mod premium;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod scores;
pub mod sequential;

pub use ensemble::{
    bias_concentration, crude_upper_bound, decay_time, envelope_sweep, expected_max,
    nested_premium, premium_profile, normalized_profile, simulate_ensemble, subgaussian_envelope,
    BoundCell, BoundReport, ConcentrationRatio, EnsembleConfig, NormalizedProfile, PathSummary,
    ProfileReport, PsiSource,
};
pub use error::{Error, Result};
pub use hetero::{
    hetero_bounds_check, per_observation_premium_curve, winners_curse, CurseReport, CurvePoint,
    HeteroBounds, MeanVector,
};
pub use increments::{
    cholesky_factor, sample_increments, standardize, Correlation, DrawBatch, Family,
    IncrementModel, Standardization,
};
pub use premium::{
    g_gaussian_mc, g_normal, premium_enumerate_rademacher, premium_exact_2, premium_mc, Estimator,
    PremiumEstimate,
};
pub use report::{Format, Record, Report, RunMeta, CSV_HEADER};
pub use rng::{CounterRng, SeedSpec};
pub use scores::{audit, AuditReport, ScoreMatrix};
pub use sequential::{
    exact_stopped_rademacher, simulate_stopped, stopped_paths, wald_check, ExactStopped,
    StoppedSummary, StoppingRule, WaldCheck,
};
