//! Reference configurations of the rubidium tweezer experiment.

use crate::discrimination::DepthSetting;
use crate::physics::{DetectorConfig, ProbeConfig, TrapConfig};
use crate::sim::{ExperimentConfig, NoiseConfig};

/// Hand-tuned (depth mK, duration ms, saturation) settings of the experiment.
pub const HAND_TUNED_TABLE: [(f64, f64, f64); 5] = [
    (0.24, 0.7, 1.1e-2),
    (0.36, 0.75, 1.9e-2),
    (0.7, 1.0, 3.7e-2),
    (1.1, 1.25, 4.9e-2),
    (1.4, 1.5, 6.1e-2),
];

/// Sequences per prepared state in the reference histograms.
pub const REFERENCE_TRIALS: u64 = 9700;

/// Collection efficiency that reproduces the measured bright mean of 9.2
/// counts at the baseline setting, given the calibrated preparation loss.
pub const CALIBRATED_COLLECTION_EFFICIENCY: f64 = 0.0056;

/// Zeeman pumping fidelity fitted so the full-noise simulation reproduces
/// the measured 1.2 % minimum readout error at the baseline setting.
/// Moving the excess into the bright-prepared atoms leaves both measured
/// histogram means intact.
pub const CALIBRATED_ZEEMAN_PREP_FIDELITY: f64 = 0.983;

/// Depumping probability per scatter of a non-stretched atom used together
/// with [`CALIBRATED_ZEEMAN_PREP_FIDELITY`].
pub const CALIBRATED_DEPUMP_PROBABILITY: f64 = 0.02;

pub fn hand_tuned_settings() -> [DepthSetting; 5] {
    HAND_TUNED_TABLE.map(|(u, dt, s)| DepthSetting {
        depth: u * 1e-3,
        probe: ProbeConfig::new(s, dt * 1e-3),
    })
}

/// 1.4 mK trap, s = 0.061, Δt = 1.5 ms, 130 counts/s background.
pub fn baseline() -> ExperimentConfig {
    ExperimentConfig {
        trap: TrapConfig::with_depth(1.4e-3),
        probe: ProbeConfig::new(0.061, 1.5e-3),
        detector: DetectorConfig::default(),
        noise: NoiseConfig::default(),
        trials: REFERENCE_TRIALS,
        ..ExperimentConfig::default()
    }
}

/// Baseline with the calibrated collection efficiency and preparation loss.
pub fn calibrated() -> ExperimentConfig {
    let base = baseline();
    ExperimentConfig {
        detector: DetectorConfig {
            collection_efficiency: CALIBRATED_COLLECTION_EFFICIENCY,
            ..base.detector
        },
        noise: NoiseConfig {
            zeeman_prep_fidelity: CALIBRATED_ZEEMAN_PREP_FIDELITY,
            depump_probability_per_scatter: CALIBRATED_DEPUMP_PROBABILITY,
            ..base.noise
        },
        ..base
    }
}
