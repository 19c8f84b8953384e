//! Atomic constants and the closed-form rate formulas shared by the
//! simulator, the analytic readout model and the optimizer.
//!
//! Everything is SI internally: temperatures in kelvin, durations in
//! seconds, rates in 1/s. Unit conversion happens at the config boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Reduced Planck constant (J·s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K), exact SI value.
pub const K_BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass unit (kg), CODATA 2018.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁸⁷Rb in atomic mass units.
pub const RB87_MASS_AMU: f64 = 86.909_180_527;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(name, value, "must be finite and > 0"))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(name, value, "must be finite and >= 0"))
    }
}

pub(crate) fn ensure_probability(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::new(name, value, "must lie in [0, 1]"))
    }
}

/// Internal state the atom is prepared in (or found in at probe time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparedState {
    Dark,
    Bright,
}

impl PreparedState {
    pub fn as_str(self) -> &'static str {
        match self {
            PreparedState::Dark => "dark",
            PreparedState::Bright => "bright",
        }
    }
}

/// Species data for the probed cycling transition.
///
/// Defaults are the ⁸⁷Rb D2 line; any other species is a legal input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Angular natural linewidth Γ (rad/s).
    pub gamma: f64,
    /// Saturation intensity (W/m²).
    pub i_sat: f64,
    /// Probe wavelength (m).
    pub lambda: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    pub hbar: f64,
    pub k_boltzmann: f64,
}

impl PhysicalConstants {
    pub fn rubidium87_d2() -> Self {
        PhysicalConstants {
            gamma: 2.0 * PI * 6.0e6,
            i_sat: 16.7,
            lambda: 780.0e-9,
            mass: RB87_MASS_AMU * ATOMIC_MASS_UNIT,
            hbar: HBAR,
            k_boltzmann: K_BOLTZMANN,
        }
    }

    /// Probe wave number k = 2π/λ.
    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure_positive("constants.gamma", self.gamma)?;
        ensure_positive("constants.i_sat", self.i_sat)?;
        ensure_positive("constants.lambda", self.lambda)?;
        ensure_positive("constants.mass", self.mass)?;
        ensure_positive("constants.hbar", self.hbar)?;
        ensure_positive("constants.k_boltzmann", self.k_boltzmann)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::rubidium87_d2()
    }
}

/// Dipole trap seen by the atom during the probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Trap depth U expressed as a temperature (K).
    pub depth: f64,
    /// Atom temperature measured in the loading trap (K).
    pub atom_temperature: f64,
    /// Depth of the trap in which `atom_temperature` was measured (K).
    ///
    /// The depth is ramped adiabatically between loading and probing, so the
    /// temperature at probe time scales as `sqrt(depth / loading_depth)`.
    pub loading_depth: f64,
    /// Heating per scattering event, in recoil energies.
    pub heating_per_scatter: f64,
}

impl TrapConfig {
    pub fn with_depth(depth: f64) -> Self {
        TrapConfig {
            depth,
            ..Self::default()
        }
    }

    /// Atom temperature at the start of the probe pulse (K).
    pub fn probe_temperature(&self) -> f64 {
        self.atom_temperature * (self.depth / self.loading_depth).sqrt()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure_positive("trap.depth", self.depth)?;
        ensure_non_negative("trap.atom_temperature", self.atom_temperature)?;
        ensure_positive("trap.loading_depth", self.loading_depth)?;
        ensure_non_negative("trap.heating_per_scatter", self.heating_per_scatter)
    }
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig {
            depth: 1.4e-3,
            atom_temperature: 35.0e-6,
            loading_depth: 2.2e-3,
            heating_per_scatter: 2.0,
        }
    }
}

/// Probe pulse: saturation parameter s = I/I_sat and duration Δt (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub saturation: f64,
    pub duration: f64,
}

impl ProbeConfig {
    pub fn new(saturation: f64, duration: f64) -> Self {
        ProbeConfig {
            saturation,
            duration,
        }
    }

    /// Builds a probe from an intensity (W/m²) instead of a saturation parameter.
    pub fn from_intensity(constants: &PhysicalConstants, intensity: f64, duration: f64) -> Self {
        ProbeConfig::new(intensity / constants.i_sat, duration)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure_non_negative("probe.saturation", self.saturation)?;
        ensure_non_negative("probe.duration", self.duration)
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig::new(0.061, 1.5e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// End-to-end probability η that a scattered photon produces a click.
    pub collection_efficiency: f64,
    /// Background click rate (1/s).
    pub dark_count_rate: f64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure_probability("detector.collection_efficiency", self.collection_efficiency)?;
        ensure_non_negative("detector.dark_count_rate", self.dark_count_rate)
    }

    /// Mean number of background clicks in a window of `duration` seconds.
    pub fn dark_mean(&self, duration: f64) -> f64 {
        self.dark_count_rate * duration
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            collection_efficiency: 0.006,
            dark_count_rate: 130.0,
        }
    }
}

/// Photon scattering rate (Γ/2)·s/(1+s) of a two-level atom on resonance.
pub fn scattering_rate(constants: &PhysicalConstants, probe: &ProbeConfig) -> f64 {
    let s = probe.saturation;
    0.5 * constants.gamma * s / (1.0 + s)
}

/// Mean number of photons scattered during the whole probe pulse.
pub fn expected_scattered(constants: &PhysicalConstants, probe: &ProbeConfig) -> f64 {
    scattering_rate(constants, probe) * probe.duration
}

/// Recoil energy ħ²k²/(2m) in joules.
pub fn recoil_energy(constants: &PhysicalConstants) -> f64 {
    let hk = constants.hbar * constants.wave_number();
    hk * hk / (2.0 * constants.mass)
}

/// Number of scattering events needed to heat an atom from the trap bottom
/// to the trap depth: k_B·U / (heating_per_scatter · E_r).
pub fn recoil_budget(constants: &PhysicalConstants, trap: &TrapConfig) -> f64 {
    constants.k_boltzmann * trap.depth / (trap.heating_per_scatter * recoil_energy(constants))
}

/// Mean detected counts for an atom in `state`, background included.
pub fn expected_counts(
    constants: &PhysicalConstants,
    probe: &ProbeConfig,
    detector: &DetectorConfig,
    state: PreparedState,
) -> f64 {
    let background = detector.dark_mean(probe.duration);
    match state {
        PreparedState::Dark => background,
        PreparedState::Bright => {
            detector.collection_efficiency * expected_scattered(constants, probe) + background
        }
    }
}
