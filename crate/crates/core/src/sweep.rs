//! Trap-depth sweeps and constrained choice of the probe pulse.

use serde::{Deserialize, Serialize};

use crate::discrimination::{DepthSetting, DiscriminationReport, ReadoutModel};
use crate::error::{ConfigError, SweepError};
use crate::physics::{ProbeConfig, TrapConfig};
use crate::sim::{predict_probe_loss, run_pair, ExperimentConfig};

/// Random-stream domains at or above this value are reserved for loss
/// prediction of optimizer candidates.
const LOSS_DOMAIN: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSchedule {
    Fixed(ProbeConfig),
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Trap depth (K).
    pub depth: f64,
    pub schedule: ProbeSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub points: Vec<SweepPoint>,
    pub trials: u64,
    pub seed: u64,
    pub constraints: OptimizationConstraints,
}

impl SweepSpec {
    pub fn from_settings(settings: &[DepthSetting], trials: u64, seed: u64) -> Self {
        SweepSpec {
            points: settings
                .iter()
                .map(|s| SweepPoint {
                    depth: s.depth,
                    schedule: ProbeSchedule::Fixed(s.probe),
                })
                .collect(),
            trials,
            seed,
            constraints: OptimizationConstraints::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.points.is_empty() {
            return Err(SweepError::InvalidSpec("no depths given".into()));
        }
        if self.trials == 0 {
            return Err(SweepError::InvalidSpec("trials must be >= 1".into()));
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if !(w[1].depth > w[0].depth) {
                return Err(SweepError::InvalidSpec(format!(
                    "depths must be strictly increasing (entries {} and {})",
                    i,
                    i + 1
                )));
            }
        }
        for (index, p) in self.points.iter().enumerate() {
            let checked = TrapConfig::with_depth(p.depth).validate().and_then(|_| match p.schedule {
                ProbeSchedule::Fixed(probe) => probe.validate(),
                ProbeSchedule::Optimize => Ok(()),
            });
            checked.map_err(|e| SweepError::Point {
                index,
                source: Box::new(e.into()),
            })?;
        }
        Ok(())
    }
}

/// One row of a depth sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: f64,
    pub probe: ProbeConfig,
    pub mean_bright: f64,
    pub mean_dark: f64,
    pub threshold: u32,
    pub fidelity: f64,
    /// Fraction of bright-prepared trials lost to probe heating.
    pub probe_loss: f64,
}

fn run_point(
    template: &ExperimentConfig,
    depth: f64,
    probe: ProbeConfig,
    trials: u64,
    seed: u64,
) -> Result<SweepRow, SweepError> {
    let config = ExperimentConfig {
        trap: TrapConfig {
            depth,
            ..template.trap
        },
        probe,
        trials,
        seed,
        ..*template
    };
    let run = run_pair(&config)?;
    let report = DiscriminationReport::from_histograms(&run.dark.histogram, &run.bright.histogram)?;
    Ok(SweepRow {
        depth,
        probe,
        mean_bright: report.mean_bright,
        mean_dark: report.mean_dark,
        threshold: report.threshold,
        fidelity: report.fidelity,
        probe_loss: run.bright.losses.probe_heating_fraction(),
    })
}

/// Runs the Monte Carlo at every depth of `spec`. Rows follow the input order.
pub fn sweep_depths(
    spec: &SweepSpec,
    template: &ExperimentConfig,
) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    spec.points
        .iter()
        .enumerate()
        .map(|(index, point)| {
            let probe = match point.schedule {
                ProbeSchedule::Fixed(p) => Ok(p),
                ProbeSchedule::Optimize => {
                    optimize_probe(point.depth, &spec.constraints, template, &[]).map(|o| o.probe)
                }
            };
            probe
                .and_then(|p| run_point(template, point.depth, p, spec.trials, spec.seed))
                .map_err(|e| SweepError::Point {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Feasible region and search grid of [`optimize_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConstraints {
    /// Largest tolerated probe-heating loss probability.
    pub max_probe_loss: f64,
    pub max_saturation: f64,
    /// Lower end of the log-spaced saturation grid; s = 0 is always a candidate.
    pub min_saturation: f64,
    /// (min, max) probe duration (s).
    pub duration_bounds: (f64, f64),
    pub duration_steps: usize,
    pub saturation_steps: usize,
    /// Monte Carlo trials per candidate for the loss prediction.
    pub loss_trials: u64,
}

impl Default for OptimizationConstraints {
    fn default() -> Self {
        OptimizationConstraints {
            max_probe_loss: 0.02,
            max_saturation: 0.1,
            min_saturation: 1e-3,
            duration_bounds: (0.1e-3, 10e-3),
            duration_steps: 40,
            saturation_steps: 40,
            loss_trials: 10_000,
        }
    }
}

impl OptimizationConstraints {
    pub fn validate(&self) -> Result<(), SweepError> {
        let infeasible = |msg: &str| Err(SweepError::Infeasible(msg.to_string()));
        if !(0.0..1.0).contains(&self.max_probe_loss) {
            return infeasible("max_probe_loss must lie in [0, 1)");
        }
        let (lo, hi) = self.duration_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return infeasible("duration bounds must satisfy 0 < min <= max");
        }
        if !(self.min_saturation > 0.0 && self.min_saturation <= self.max_saturation)
            || !self.max_saturation.is_finite()
        {
            return infeasible("saturation bounds must satisfy 0 < min <= max");
        }
        if self.duration_steps == 0 || self.saturation_steps == 0 || self.loss_trials == 0 {
            return infeasible("grid sizes and loss_trials must be >= 1");
        }
        Ok(())
    }
    pub fn admits(&self, probe: &ProbeConfig) -> bool {
        let (lo, hi) = self.duration_bounds;
        probe.saturation >= 0.0
            && probe.saturation <= self.max_saturation
            && probe.duration >= lo
            && probe.duration <= hi
    }
}

fn log_space(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 || lo == hi {
        return vec![hi];
    }
    let ratio = (hi / lo).ln() / (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            if i == steps - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptimum {
    pub probe: ProbeConfig,
    /// Analytic-model fidelity at the optimal threshold.
    pub fidelity: f64,
    pub threshold: u32,
    pub predicted_loss: f64,
}

/// Chooses the probe that maximizes the analytic readout fidelity at trap
/// depth `depth` subject to the loss ceiling and the saturation cap.
///
/// The search runs over the log-spaced (Δt, s) grid plus any admissible
/// `extra` candidates, plus s = 0 which is always feasible. Ties go to the
/// smaller saturation, then the shorter pulse. Each candidate's loss
/// prediction uses its own random stream, so tightening or relaxing the
/// ceiling never changes the prediction for a given candidate.
pub fn optimize_probe(
    depth: f64,
    constraints: &OptimizationConstraints,
    template: &ExperimentConfig,
    extra: &[ProbeConfig],
) -> Result<ProbeOptimum, SweepError> {
    constraints.validate()?;
    let trap = TrapConfig {
        depth,
        ..template.trap
    };
    trap.validate()?;
    template.constants.validate()?;
    template.detector.validate()?;

    let durations = log_space(
        constraints.duration_bounds.0,
        constraints.duration_bounds.1,
        constraints.duration_steps,
    );
    let saturations = log_space(
        constraints.min_saturation,
        constraints.max_saturation,
        constraints.saturation_steps,
    );
    let mut candidates: Vec<ProbeConfig> = durations
        .iter()
        .flat_map(|&d| saturations.iter().map(move |&s| ProbeConfig::new(s, d)))
        .collect();
    candidates.extend(extra.iter().copied().filter(|p| constraints.admits(p)));
    candidates.push(ProbeConfig::new(0.0, constraints.duration_bounds.0));

    let mut scored: Vec<(usize, ProbeConfig, f64, u32)> = candidates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let best = ReadoutModel::from_configs(&template.constants, p, &template.detector).optimal();
            (i, *p, best.fidelity(), best.threshold)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(a.1.saturation.total_cmp(&b.1.saturation))
            .then(a.1.duration.total_cmp(&b.1.duration))
    });

    for (index, probe, fidelity, threshold) in scored {
        let predicted_loss = predict_probe_loss(
            &template.constants,
            &trap,
            &probe,
            constraints.loss_trials,
            template.seed,
            LOSS_DOMAIN + index as u64,
        );
        if predicted_loss <= constraints.max_probe_loss {
            return Ok(ProbeOptimum {
                probe,
                fidelity,
                threshold,
                predicted_loss,
            });
        }
    }
    unreachable!("the s = 0 candidate has zero predicted loss")
}

/// Probe schedule linear in trap depth, fitted by least squares.
///
/// Gives a smooth interpolation between tabulated hand-tuned settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub duration_intercept: f64,
    pub duration_slope: f64,
    pub saturation_intercept: f64,
    pub saturation_slope: f64,
}

impl LinearSchedule {
    pub fn fit(settings: &[DepthSetting]) -> Result<Self, ConfigError> {
        let n = settings.len() as f64;
        let mean_u = settings.iter().map(|s| s.depth).sum::<f64>() / n;
        let sxx: f64 = settings.iter().map(|s| (s.depth - mean_u).powi(2)).sum();
        if settings.len() < 2 || !(sxx > 0.0) {
            return Err(ConfigError::new("depths", n, "need two distinct depths"));
        }
        let line = |y: &dyn Fn(&DepthSetting) -> f64| {
            let mean_y = settings.iter().map(y).sum::<f64>() / n;
            let sxy: f64 = settings
                .iter()
                .map(|s| (s.depth - mean_u) * (y(s) - mean_y))
                .sum();
            let slope = sxy / sxx;
            (mean_y - slope * mean_u, slope)
        };
        let (duration_intercept, duration_slope) = line(&|s| s.probe.duration);
        let (saturation_intercept, saturation_slope) = line(&|s| s.probe.saturation);
        Ok(LinearSchedule {
            duration_intercept,
            duration_slope,
            saturation_intercept,
            saturation_slope,
        })
    }

    pub fn at(&self, depth: f64) -> DepthSetting {
        DepthSetting {
            depth,
            probe: ProbeConfig::new(
                (self.saturation_intercept + self.saturation_slope * depth).max(0.0),
                (self.duration_intercept + self.duration_slope * depth).max(0.0),
            ),
        }
    }
}
