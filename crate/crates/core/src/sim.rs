//! Trial-by-trial Monte Carlo of the readout sequence:
//! preparation, probe pulse with recoil heating, photon detection, and the
//! presence test that post-selects the kept trials.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `(seed, prepared state)` and indexed by the trial number, so results do
//! not depend on how trials are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrimination::CountHistogram;
use crate::error::ConfigError;
use crate::physics::{
    ensure_non_negative, ensure_probability, expected_scattered, recoil_energy,
    DetectorConfig, PhysicalConstants, PreparedState, ProbeConfig, TrapConfig,
};

/// Imperfections of preparation and of the sequence around the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability a bright-prepared atom ends up in the bright hyperfine manifold.
    pub hyperfine_prep_fidelity: f64,
    /// Probability a bright-manifold atom is in the stretched Zeeman state.
    pub zeeman_prep_fidelity: f64,
    /// Per-sequence probability a dark-prepared atom is transferred to the bright manifold.
    pub raman_flip_probability: f64,
    /// Per-sequence probability that the presence test wrongly reports the atom absent.
    pub presence_test_error: f64,
    /// Vacuum-limited trap lifetime (s).
    pub vacuum_lifetime: f64,
    /// Total sequence duration exposed to vacuum loss (s).
    pub sequence_wall_time: f64,
    /// Per-scatter probability that a non-stretched bright atom decays to the dark manifold.
    pub depump_probability_per_scatter: f64,
}

impl NoiseConfig {
    /// Ideal sequence: perfect preparation and no losses besides probe heating.
    pub fn noiseless() -> Self {
        NoiseConfig {
            hyperfine_prep_fidelity: 1.0,
            zeeman_prep_fidelity: 1.0,
            raman_flip_probability: 0.0,
            presence_test_error: 0.0,
            vacuum_lifetime: f64::INFINITY,
            sequence_wall_time: 0.0,
            depump_probability_per_scatter: 0.0,
        }
    }

    pub fn vacuum_loss_probability(&self) -> f64 {
        -(-self.sequence_wall_time / self.vacuum_lifetime).exp_m1()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure_probability("noise.hyperfine_prep_fidelity", self.hyperfine_prep_fidelity)?;
        ensure_probability("noise.zeeman_prep_fidelity", self.zeeman_prep_fidelity)?;
        ensure_probability("noise.raman_flip_probability", self.raman_flip_probability)?;
        ensure_probability("noise.presence_test_error", self.presence_test_error)?;
        ensure_probability(
            "noise.depump_probability_per_scatter",
            self.depump_probability_per_scatter,
        )?;
        // an infinite lifetime means no vacuum loss
        if !(self.vacuum_lifetime > 0.0) {
            return Err(ConfigError::new(
                "noise.vacuum_lifetime",
                self.vacuum_lifetime,
                "must be > 0",
            ));
        }
        ensure_non_negative("noise.sequence_wall_time", self.sequence_wall_time)
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            hyperfine_prep_fidelity: 0.9997,
            zeeman_prep_fidelity: 0.996,
            raman_flip_probability: 0.001,
            presence_test_error: 0.006,
            vacuum_lifetime: 23.0,
            sequence_wall_time: 0.092,
            depump_probability_per_scatter: 1e-3,
        }
    }
}

/// Everything needed to simulate one batch of readout sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub constants: PhysicalConstants,
    pub trap: TrapConfig,
    pub probe: ProbeConfig,
    pub detector: DetectorConfig,
    pub noise: NoiseConfig,
    pub prepared_state: PreparedState,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.constants.validate()?;
        self.trap.validate()?;
        self.probe.validate()?;
        self.detector.validate()?;
        self.noise.validate()?;
        if self.trials == 0 {
            return Err(ConfigError::new("trials", 0.0, "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_state(mut self, state: PreparedState) -> Self {
        self.prepared_state = state;
        self
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            constants: PhysicalConstants::default(),
            trap: TrapConfig::default(),
            probe: ProbeConfig::default(),
            detector: DetectorConfig::default(),
            noise: NoiseConfig::default(),
            prepared_state: PreparedState::Bright,
            trials: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCause {
    None,
    ProbeHeating,
    Vacuum,
    PresenceTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub prepared_state: PreparedState,
    pub effective_state_at_probe: PreparedState,
    /// Set when a dark-prepared atom was transferred to the bright manifold.
    pub raman_flipped: bool,
    pub scattered: u64,
    pub detected: u32,
    pub lost: bool,
    pub loss_cause: LossCause,
    pub post_selected: bool,
}

/// Deterministic random stream for one trial.
///
/// `domain` separates unrelated uses of the same user seed (the two prepared
/// states, loss prediction for optimizer candidates, ...).
pub fn trial_rng(seed: u64, domain: u64, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}

fn state_domain(state: PreparedState) -> u64 {
    match state {
        PreparedState::Dark => 0,
        PreparedState::Bright => 1,
    }
}

fn poisson_or_zero(mean: f64) -> Option<Poisson<f64>> {
    if mean > 0.0 {
        Poisson::new(mean).ok()
    } else {
        None
    }
}

fn draw_poisson<R: Rng>(dist: &Option<Poisson<f64>>, rng: &mut R) -> u64 {
    dist.as_ref().map_or(0, |d| d.sample(rng) as u64)
}

/// Recoil heating of an atom during the probe. Shared between the full
/// simulator and the optimizer's loss prediction.
#[derive(Debug, Clone)]
pub(crate) struct HeatingModel {
    /// k_B·U (J).
    depth_energy: f64,
    /// Energy deposited per scattering event (J).
    heating_per_event: f64,
    /// k_B·T at the start of the probe (J).
    thermal_energy: f64,
    /// Initial energy of a 3D harmonic Boltzmann gas: Gamma(3, k_B·T).
    initial_energy: Option<Gamma<f64>>,
}

impl HeatingModel {
    pub(crate) fn new(constants: &PhysicalConstants, trap: &TrapConfig) -> Self {
        let kt = constants.k_boltzmann * trap.probe_temperature();
        HeatingModel {
            depth_energy: constants.k_boltzmann * trap.depth,
            heating_per_event: trap.heating_per_scatter * recoil_energy(constants),
            thermal_energy: kt,
            initial_energy: if kt > 0.0 { Gamma::new(3.0, kt).ok() } else { None },
        }
    }

    /// Index (1-based) of the scattering event at which the atom leaves the trap.
    pub(crate) fn loss_event<R: Rng>(&self, rng: &mut R) -> u64 {
        let e0 = self.initial_energy.as_ref().map_or(0.0, |g| g.sample(rng));
        let headroom = self.depth_energy - e0;
        if headroom < 0.0 {
            return 1;
        }
        if self.heating_per_event <= 0.0 {
            return u64::MAX;
        }
        let events = (headroom / self.heating_per_event).floor();
        if events >= (u64::MAX - 1) as f64 {
            u64::MAX
        } else {
            events as u64 + 1
        }
    }

    /// Probability that the very first scattering event already ejects the
    /// atom: P(E0 > k_B·U − δE) for E0 ~ Gamma(3, k_B·T).
    pub(crate) fn first_event_loss_probability(&self) -> f64 {
        let headroom = self.depth_energy - self.heating_per_event;
        if headroom <= 0.0 {
            return 1.0;
        }
        if self.initial_energy.is_none() {
            return 0.0;
        }
        let x = headroom / self.thermal_energy;
        (-x).exp() * (1.0 + x + 0.5 * x * x)
    }
}

/// Per-experiment distributions, built once and shared by all trials.
#[derive(Debug, Clone)]
struct TrialSampler {
    config: ExperimentConfig,
    heating: HeatingModel,
    scatter_mean: f64,
    scatter: Option<Poisson<f64>>,
    background: Option<Poisson<f64>>,
    depump: Option<Geometric>,
    vacuum_loss: f64,
}

impl TrialSampler {
    fn new(config: &ExperimentConfig) -> Self {
        let scatter_mean = expected_scattered(&config.constants, &config.probe);
        let p = config.noise.depump_probability_per_scatter;
        TrialSampler {
            config: *config,
            heating: HeatingModel::new(&config.constants, &config.trap),
            scatter_mean,
            scatter: poisson_or_zero(scatter_mean),
            background: poisson_or_zero(config.detector.dark_mean(config.probe.duration)),
            depump: if p > 0.0 { Geometric::new(p).ok() } else { None },
            vacuum_loss: config.noise.vacuum_loss_probability(),
        }
    }

    fn run(&self, trial_index: u64) -> TrialOutcome {
        let cfg = &self.config;
        let noise = &cfg.noise;
        let mut rng = trial_rng(cfg.seed, state_domain(cfg.prepared_state), trial_index);

        // preparation
        let mut raman_flipped = false;
        let mut stretched = true;
        let mut exposure = 1.0;
        let effective = match cfg.prepared_state {
            PreparedState::Bright => {
                if rng.random::<f64>() >= noise.hyperfine_prep_fidelity {
                    PreparedState::Dark
                } else {
                    stretched = rng.random::<f64>() < noise.zeeman_prep_fidelity;
                    PreparedState::Bright
                }
            }
            PreparedState::Dark => {
                if rng.random::<f64>() < noise.raman_flip_probability {
                    raman_flipped = true;
                    exposure = rng.random::<f64>();
                    PreparedState::Bright
                } else {
                    PreparedState::Dark
                }
            }
        };

        // probe
        let mut scattered = 0;
        let mut heated_out = false;
        if effective == PreparedState::Bright {
            let candidates = if exposure < 1.0 {
                draw_poisson(&poisson_or_zero(self.scatter_mean * exposure), &mut rng)
            } else {
                draw_poisson(&self.scatter, &mut rng)
            };
            let loss_at = self.heating.loss_event(&mut rng);
            let depumped_at = match (&self.depump, stretched) {
                (Some(g), false) => g.sample(&mut rng).saturating_add(1),
                _ => u64::MAX,
            };
            let until_dark = candidates.min(depumped_at);
            heated_out = loss_at <= until_dark;
            scattered = until_dark.min(loss_at);
        }

        // detection
        let signal = if scattered > 0 && cfg.detector.collection_efficiency > 0.0 {
            Binomial::new(scattered, cfg.detector.collection_efficiency)
                .map(|b| b.sample(&mut rng))
                .unwrap_or(0)
        } else {
            0
        };
        let detected = signal + draw_poisson(&self.background, &mut rng);

        // sequence losses
        let vacuum = rng.random::<f64>() < self.vacuum_loss;
        let presence = rng.random::<f64>() < noise.presence_test_error;
        let loss_cause = if heated_out {
            LossCause::ProbeHeating
        } else if vacuum {
            LossCause::Vacuum
        } else if presence {
            LossCause::PresenceTest
        } else {
            LossCause::None
        };
        let lost = loss_cause != LossCause::None;

        TrialOutcome {
            prepared_state: cfg.prepared_state,
            effective_state_at_probe: effective,
            raman_flipped,
            scattered,
            detected: u32::try_from(detected).unwrap_or(u32::MAX),
            lost,
            loss_cause,
            post_selected: !lost,
        }
    }
}

/// Simulates trial `trial_index` of the experiment.
pub fn simulate_trial(config: &ExperimentConfig, trial_index: u64) -> TrialOutcome {
    TrialSampler::new(config).run(trial_index)
}

/// All outcomes of an experiment, in trial order.
pub fn simulate_trials(config: &ExperimentConfig) -> Vec<TrialOutcome> {
    let sampler = TrialSampler::new(config);
    (0..config.trials)
        .into_par_iter()
        .map(|i| sampler.run(i))
        .collect()
}

/// Trial bookkeeping by loss cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSummary {
    pub trials: u64,
    pub kept: u64,
    pub probe_heating: u64,
    pub vacuum: u64,
    pub presence_test: u64,
}

impl LossSummary {
    fn record(&mut self, outcome: &TrialOutcome) {
        self.trials += 1;
        match outcome.loss_cause {
            LossCause::None => self.kept += 1,
            LossCause::ProbeHeating => self.probe_heating += 1,
            LossCause::Vacuum => self.vacuum += 1,
            LossCause::PresenceTest => self.presence_test += 1,
        }
    }

    fn merge(self, other: LossSummary) -> LossSummary {
        LossSummary {
            trials: self.trials + other.trials,
            kept: self.kept + other.kept,
            probe_heating: self.probe_heating + other.probe_heating,
            vacuum: self.vacuum + other.vacuum,
            presence_test: self.presence_test + other.presence_test,
        }
    }

    pub fn lost(&self) -> u64 {
        self.probe_heating + self.vacuum + self.presence_test
    }

    fn fraction(&self, n: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            n as f64 / self.trials as f64
        }
    }

    pub fn probe_heating_fraction(&self) -> f64 {
        self.fraction(self.probe_heating)
    }

    pub fn vacuum_fraction(&self) -> f64 {
        self.fraction(self.vacuum)
    }

    pub fn presence_test_fraction(&self) -> f64 {
        self.fraction(self.presence_test)
    }

    pub fn lost_fraction(&self) -> f64 {
        self.fraction(self.lost())
    }
}

/// Aggregated result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub histogram: CountHistogram,
    pub losses: LossSummary,
}

impl ExperimentResult {
    /// True when every trial was lost; such a histogram carries no data.
    pub fn is_empty(&self) -> bool {
        self.histogram.is_empty()
    }
}

/// Runs `config.trials` sequences and aggregates the post-selected ones.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ConfigError> {
    config.validate()?;
    let sampler = TrialSampler::new(config);
    let state = config.prepared_state;
    let empty = || (CountHistogram::new(state), LossSummary::default());
    let (histogram, losses) = (0..config.trials)
        .into_par_iter()
        .fold(empty, |(mut hist, mut losses), i| {
            let outcome = sampler.run(i);
            losses.record(&outcome);
            if outcome.post_selected {
                hist.record(outcome.detected);
            }
            (hist, losses)
        })
        .reduce(empty, |(ha, la), (hb, lb)| (ha.merge(&hb), la.merge(lb)));
    Ok(ExperimentResult { histogram, losses })
}

/// Dark- and bright-prepared runs of the same configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub dark: ExperimentResult,
    pub bright: ExperimentResult,
}

pub fn run_pair(config: &ExperimentConfig) -> Result<PairedRun, ConfigError> {
    Ok(PairedRun {
        dark: run_experiment(&config.with_state(PreparedState::Dark))?,
        bright: run_experiment(&config.with_state(PreparedState::Bright))?,
    })
}

/// Monte Carlo estimate of the probe-heating loss probability of a
/// stretched bright atom, floored by the exactly known probability of losing
/// the atom on its first scattering event (which a finite sample cannot
/// resolve when it is tiny).
pub fn predict_probe_loss(
    constants: &PhysicalConstants,
    trap: &TrapConfig,
    probe: &ProbeConfig,
    trials: u64,
    seed: u64,
    domain: u64,
) -> f64 {
    let mean = expected_scattered(constants, probe);
    let Some(scatter) = poisson_or_zero(mean) else {
        return 0.0;
    };
    let heating = HeatingModel::new(constants, trap);
    let lost = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = trial_rng(seed, domain, i);
            let n = scatter.sample(&mut rng) as u64;
            n >= heating.loss_event(&mut rng)
        })
        .count();
    let floor = heating.first_event_loss_probability() * -(-mean).exp_m1();
    (lost as f64 / trials.max(1) as f64).max(floor)
}
