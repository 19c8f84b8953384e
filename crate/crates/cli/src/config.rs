//! Sectioned TOML configuration with unit-suffixed keys.
//!
//! Every section and key is optional; missing values come from
//! [`presets::calibrated`]. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tweezer_core::presets;
use tweezer_core::{
    ConfigError, ExperimentConfig, OptimizationConstraints, ProbeConfig, ProbeSchedule, SweepPoint,
    SweepSpec,
};

use crate::CliError;

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ConstantsSection {
    #[serde(rename = "linewidth_MHz")]
    pub linewidth_mhz: Option<f64>,
    pub saturation_intensity_W_per_m2: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub mass_amu: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct TrapSection {
    pub depth_mK: Option<f64>,
    pub atom_temperature_uK: Option<f64>,
    pub loading_depth_mK: Option<f64>,
    pub heating_per_scatter: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub saturation: Option<f64>,
    pub duration_ms: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub collection_efficiency: Option<f64>,
    pub dark_count_rate_per_s: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub hyperfine_prep_fidelity: Option<f64>,
    pub zeeman_prep_fidelity: Option<f64>,
    pub raman_flip_probability: Option<f64>,
    pub presence_test_error: Option<f64>,
    pub vacuum_lifetime_s: Option<f64>,
    pub sequence_wall_time_ms: Option<f64>,
    pub depump_probability_per_scatter: Option<f64>,
}

/// Depth sweep: either fixed probes per depth or `optimize = true`.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SweepSection {
    pub depths_mK: Vec<f64>,
    #[serde(default)]
    pub durations_ms: Vec<f64>,
    #[serde(default)]
    pub saturations: Vec<f64>,
    #[serde(default)]
    pub optimize: bool,
    pub max_probe_loss: Option<f64>,
    pub max_saturation: Option<f64>,
    pub min_saturation: Option<f64>,
    pub min_duration_ms: Option<f64>,
    pub max_duration_ms: Option<f64>,
    pub grid_steps: Option<usize>,
    pub loss_trials: Option<u64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub sweep: Option<SweepSection>,
}

/// Core parameter name, file key, and the factor converting SI to file units.
const KEYS: &[(&str, &str, f64)] = &[
    ("trials", "experiment.trials", 1.0),
    ("constants.gamma", "constants.linewidth_MHz", 1e-6 / (2.0 * PI)),
    ("constants.i_sat", "constants.saturation_intensity_W_per_m2", 1.0),
    ("constants.lambda", "constants.wavelength_nm", 1e9),
    ("constants.mass", "constants.mass_amu", 1.0 / 1.660_539_066_60e-27),
    ("trap.depth", "trap.depth_mK", 1e3),
    ("trap.atom_temperature", "trap.atom_temperature_uK", 1e6),
    ("trap.loading_depth", "trap.loading_depth_mK", 1e3),
    ("probe.duration", "probe.duration_ms", 1e3),
    ("detector.dark_count_rate", "detector.dark_count_rate_per_s", 1.0),
    ("noise.vacuum_lifetime", "noise.vacuum_lifetime_s", 1.0),
    ("noise.sequence_wall_time", "noise.sequence_wall_time_ms", 1e3),
];

/// Rephrases a core validation error in terms of the config file keys.
pub fn describe(err: &ConfigError) -> String {
    let (key, factor) = KEYS
        .iter()
        .find(|(name, _, _)| *name == err.name)
        .map_or((err.name, 1.0), |(_, key, f)| (*key, *f));
    format!("invalid value {} for `{key}`: {}", err.value * factor, err.reason)
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

pub fn parse(src: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(src).map_err(|e| {
        let msg = e.message().trim_end().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(src, span.start);
                CliError::Input(format!("config parse error at line {line}, column {col}: {msg}"))
            }
            None => CliError::Input(format!("config parse error: {msg}")),
        }
    })
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let src = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
            parse(&src)
        }
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_scaled(slot: &mut f64, value: Option<f64>, to_si: f64) {
    if let Some(v) = value {
        *slot = v * to_si;
    }
}

impl ConfigFile {
    /// Experiment configuration with file values laid over the calibrated preset.
    pub fn experiment(&self) -> ExperimentConfig {
        let mut cfg = presets::calibrated();
        set(&mut cfg.trials, self.experiment.trials);
        set(&mut cfg.seed, self.experiment.seed);

        let c = &self.constants;
        set(&mut cfg.constants.gamma, c.linewidth_mhz.map(|v| 2.0 * PI * (v * 1e6)));
        set(&mut cfg.constants.i_sat, c.saturation_intensity_W_per_m2);
        set_scaled(&mut cfg.constants.lambda, c.wavelength_nm, 1e-9);
        set_scaled(&mut cfg.constants.mass, c.mass_amu, 1.660_539_066_60e-27);

        let t = &self.trap;
        set_scaled(&mut cfg.trap.depth, t.depth_mK, 1e-3);
        set_scaled(&mut cfg.trap.atom_temperature, t.atom_temperature_uK, 1e-6);
        set_scaled(&mut cfg.trap.loading_depth, t.loading_depth_mK, 1e-3);
        set(&mut cfg.trap.heating_per_scatter, t.heating_per_scatter);

        set(&mut cfg.probe.saturation, self.probe.saturation);
        set_scaled(&mut cfg.probe.duration, self.probe.duration_ms, 1e-3);

        let d = &self.detector;
        set(&mut cfg.detector.collection_efficiency, d.collection_efficiency);
        set(&mut cfg.detector.dark_count_rate, d.dark_count_rate_per_s);

        let n = &self.noise;
        set(&mut cfg.noise.hyperfine_prep_fidelity, n.hyperfine_prep_fidelity);
        set(&mut cfg.noise.zeeman_prep_fidelity, n.zeeman_prep_fidelity);
        set(&mut cfg.noise.raman_flip_probability, n.raman_flip_probability);
        set(&mut cfg.noise.presence_test_error, n.presence_test_error);
        set(&mut cfg.noise.vacuum_lifetime, n.vacuum_lifetime_s);
        set_scaled(&mut cfg.noise.sequence_wall_time, n.sequence_wall_time_ms, 1e-3);
        set(
            &mut cfg.noise.depump_probability_per_scatter,
            n.depump_probability_per_scatter,
        );
        cfg
    }

    /// Sweep specification; `trials` and `seed` come from the experiment.
    pub fn sweep_spec(&self, cfg: &ExperimentConfig) -> Result<SweepSpec, CliError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Input("config has no [sweep] section".into()))?;
        let mut constraints = OptimizationConstraints::default();
        set(&mut constraints.max_probe_loss, s.max_probe_loss);
        set(&mut constraints.max_saturation, s.max_saturation);
        set(&mut constraints.min_saturation, s.min_saturation);
        set_scaled(&mut constraints.duration_bounds.0, s.min_duration_ms, 1e-3);
        set_scaled(&mut constraints.duration_bounds.1, s.max_duration_ms, 1e-3);
        if let Some(n) = s.grid_steps {
            constraints.duration_steps = n;
            constraints.saturation_steps = n;
        }
        set(&mut constraints.loss_trials, s.loss_trials);

        let n = s.depths_mK.len();
        let points = if s.optimize {
            if !s.durations_ms.is_empty() || !s.saturations.is_empty() {
                return Err(CliError::Input(
                    "sweep: give either optimize = true or durations_ms/saturations, not both".into(),
                ));
            }
            s.depths_mK
                .iter()
                .map(|&u| SweepPoint {
                    depth: u * 1e-3,
                    schedule: ProbeSchedule::Optimize,
                })
                .collect()
        } else {
            if s.durations_ms.len() != n || s.saturations.len() != n {
                return Err(CliError::Input(format!(
                    "sweep: depths_mK has {n} entries but durations_ms has {} and saturations {}",
                    s.durations_ms.len(),
                    s.saturations.len()
                )));
            }
            (0..n)
                .map(|i| SweepPoint {
                    depth: s.depths_mK[i] * 1e-3,
                    schedule: ProbeSchedule::Fixed(ProbeConfig::new(
                        s.saturations[i],
                        s.durations_ms[i] * 1e-3,
                    )),
                })
                .collect()
        };
        Ok(SweepSpec {
            points,
            trials: cfg.trials,
            seed: cfg.seed,
            constraints,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_calibrated_preset() {
        assert_eq!(parse("").unwrap().experiment(), presets::calibrated());
    }

    #[test]
    fn units_are_converted() {
        let f = parse("[trap]\ndepth_mK = 0.7\n[probe]\nduration_ms = 1.0\n").unwrap();
        let cfg = f.experiment();
        assert!((cfg.trap.depth - 0.7e-3).abs() < 1e-18);
        assert!((cfg.probe.duration - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = parse("[trap]\ndepth_mK = 1.0\ndepth = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn core_names_map_to_keys() {
        let e = ConfigError::new("probe.duration", 2e-3, "must be > 0");
        assert_eq!(describe(&e), "invalid value 2 for `probe.duration_ms`: must be > 0");
        let e = ConfigError::new("trials", 0.0, "must be >= 1");
        assert!(describe(&e).contains("`experiment.trials`"));
    }

    fn shipped(name: &str) -> ConfigFile {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        parse(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn shipped_configs_match_presets() {
        assert_eq!(shipped("calibrated.toml").experiment(), presets::calibrated());
        assert_eq!(shipped("nominal.toml").experiment(), presets::baseline());
        let sweep = shipped("hand_tuned_sweep.toml");
        let cfg = sweep.experiment();
        assert_eq!(cfg, presets::baseline());
        let spec = sweep.sweep_spec(&cfg).unwrap();
        let expected = SweepSpec::from_settings(&presets::hand_tuned_settings(), cfg.trials, cfg.seed);
        assert_eq!(spec, expected);
    }

    #[test]
    fn mismatched_sweep_lengths_are_rejected() {
        let f = parse("[sweep]\ndepths_mK = [1.0, 2.0]\ndurations_ms = [1.0]\nsaturations = [0.1, 0.1]\n").unwrap();
        assert!(f.sweep_spec(&f.experiment()).is_err());
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
