//! Fluorescence state readout of a single atom in an optical tweezer.
//!
//! * [`physics`]: species constants, trap/probe/detector configuration and
//!   the closed-form scattering, recoil and count-rate formulas.
//! * [`sim`]: seeded, schedule-independent Monte Carlo of complete readout
//!   sequences including preparation errors and loss channels.
//! * [`discrimination`]: threshold classification, fidelity, the analytic
//!   Poisson model and the error budget.
//! * [`sweep`]: trap-depth sweeps and the constrained probe optimizer.
//! * [`presets`]: the reference experiment settings.

mod error;

pub mod discrimination;
pub mod physics;
pub mod presets;
pub mod sim;
pub mod sweep;

pub use discrimination::{
    classification_errors, error_budget, fidelity, fit_poisson, model_fidelity_curve,
    threshold_scan, BudgetRow, BudgetSource, ClassificationErrors, CountDistribution,
    CountHistogram, DepthSetting, DiscriminationReport, ErrorBudget, ModelPoint, PoissonCounts,
    ReadoutModel, ThresholdScan,
};
pub use error::{AnalysisError, ConfigError, SweepError};
pub use physics::{
    expected_counts, expected_scattered, recoil_budget, recoil_energy, scattering_rate,
    DetectorConfig, PhysicalConstants, PreparedState, ProbeConfig, TrapConfig,
};
pub use sim::{
    run_experiment, run_pair, simulate_trial, simulate_trials, ExperimentConfig,
    ExperimentResult, LossCause, LossSummary, NoiseConfig, PairedRun, TrialOutcome,
};
pub use sweep::{
    optimize_probe, sweep_depths, LinearSchedule, OptimizationConstraints, ProbeOptimum,
    ProbeSchedule, SweepPoint, SweepRow, SweepSpec,
};
