//! Attribution of the readout error to its sources.
//!
//! Rows are misread probabilities for the affected prepared state, so a
//! channel that always misreads a fraction p of the sequences contributes p.

use serde::{Deserialize, Serialize};

use super::{PoissonCounts, ReadoutModel};
use crate::sim::NoiseConfig;

pub const ATTRIBUTION_METHOD: &str = "detector_dark_counts: increase of eps_B+eps_D when the \
background rate goes from zero to its actual value, threshold re-optimized at both ends; \
detection_inefficiency: eps_B at zero background with optimized threshold; \
raman_transitions: flip probability (each flip counted as a misread); \
imperfect_preparation: (1 - hyperfine fidelity) plus the extra misread probability of \
non-stretched Zeeman states at the operating threshold";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSource {
    DetectorDarkCounts,
    DetectionInefficiency,
    RamanTransitions,
    ImperfectPreparation,
}

impl BudgetSource {
    pub fn name(self) -> &'static str {
        match self {
            BudgetSource::DetectorDarkCounts => "detector_dark_counts",
            BudgetSource::DetectionInefficiency => "detection_inefficiency",
            BudgetSource::RamanTransitions => "raman_transitions",
            BudgetSource::ImperfectPreparation => "imperfect_preparation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub source: BudgetSource,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub rows: Vec<BudgetRow>,
    pub total: f64,
}

impl ErrorBudget {
    pub fn row(&self, source: BudgetSource) -> f64 {
        self.rows
            .iter()
            .find(|r| r.source == source)
            .map_or(0.0, |r| r.contribution)
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Probability that a bright atom which can depump to the dark manifold is
/// read as dark at `threshold`.
///
/// Scattering stops after min(N, K) events with N ~ Poisson(scatter mean)
/// and K ~ Geometric(depump) on {1, 2, ...}; each scattered photon is
/// detected with probability η and background adds Poisson(dark mean).
/// `depump = 0` recovers the plain Poisson model.
pub fn nonstretched_misread(model: &ReadoutModel, depump: f64, threshold: u32) -> f64 {
    let eta = model.collection_efficiency;
    let background = PoissonCounts::new(model.dark_mean);
    let bg_cdf: Vec<f64> = (0..=threshold).map(|m| background.cdf(m)).collect();
    let scatter = PoissonCounts::new(model.scatter_mean);
    let last = scatter.support_bound() as u64;
    let keep = 1.0 - depump;

    let ln_mean = model.scatter_mean.ln();
    let mut ln_pn = -model.scatter_mean;
    let mut total = 0.0;
    let mut tail = 1.0; // P(N > j - 1)
    let mut survive = 1.0; // (1 - p)^(j - 1)
    for j in 0..=last {
        if j > 0 {
            ln_pn += ln_mean - (j as f64).ln();
        }
        let pn = if model.scatter_mean > 0.0 {
            ln_pn.exp()
        } else {
            scatter.pmf(j as u32)
        };
        tail -= pn;
        let ps = if j == 0 {
            pn
        } else {
            let s = survive * (pn + depump * tail.max(0.0));
            survive *= keep;
            s
        };
        if ps == 0.0 {
            continue;
        }
        let read_dark: f64 = (0..=u64::from(threshold).min(j))
            .map(|m| binomial_pmf(j, m, eta) * bg_cdf[(u64::from(threshold) - m) as usize])
            .sum();
        total += ps * read_dark;
    }
    total.clamp(0.0, 1.0)
}

/// Error budget of the analytic model at the operating `threshold`.
pub fn error_budget(model: &ReadoutModel, noise: &NoiseConfig, threshold: u32) -> ErrorBudget {
    let quiet = model.with_dark_mean(0.0).optimal();
    let actual = model.optimal();
    let dark_counts = ((actual.epsilon_bright + actual.epsilon_dark)
        - (quiet.epsilon_bright + quiet.epsilon_dark))
        .max(0.0);
    let inefficiency = quiet.epsilon_bright;
    let raman = noise.raman_flip_probability;

    let zeeman_excess = if noise.zeeman_prep_fidelity < 1.0 {
        let excess = nonstretched_misread(model, noise.depump_probability_per_scatter, threshold)
            - nonstretched_misread(model, 0.0, threshold);
        noise.hyperfine_prep_fidelity * (1.0 - noise.zeeman_prep_fidelity) * excess.max(0.0)
    } else {
        0.0
    };
    let preparation = (1.0 - noise.hyperfine_prep_fidelity) + zeeman_excess;

    let rows = vec![
        BudgetRow {
            source: BudgetSource::DetectorDarkCounts,
            contribution: dark_counts,
        },
        BudgetRow {
            source: BudgetSource::DetectionInefficiency,
            contribution: inefficiency,
        },
        BudgetRow {
            source: BudgetSource::RamanTransitions,
            contribution: raman,
        },
        BudgetRow {
            source: BudgetSource::ImperfectPreparation,
            contribution: preparation,
        },
    ];
    let total = rows.iter().map(|r| r.contribution).sum();
    ErrorBudget { rows, total }
}
