//! Readout statistics from photon-count distributions.
//!
//! A trial with more than `n_c` detected photons is classified bright, one
//! with at most `n_c` is classified dark. Then
//!
//! ```text
//! ε_B = P_B(n ≤ n_c)      ε_D = P_D(n > n_c)      F = 1 − (ε_B + ε_D)/2
//! ```
//!
//! The same functions accept measured histograms and analytic Poisson
//! distributions through [`CountDistribution`].

mod budget;
mod histogram;
mod poisson;

use serde::{Deserialize, Serialize};

pub use budget::{error_budget, ATTRIBUTION_METHOD, nonstretched_misread, BudgetRow, BudgetSource, ErrorBudget};
pub use histogram::CountHistogram;
pub use poisson::PoissonCounts;

use crate::error::AnalysisError;
use crate::physics::{
    expected_scattered, DetectorConfig, PhysicalConstants, PreparedState, ProbeConfig,
};

/// A photon-count distribution that thresholds can be applied to.
pub trait CountDistribution {
    /// P(n ≤ threshold).
    fn at_most(&self, threshold: u32) -> f64;
    /// P(n > threshold).
    fn above(&self, threshold: u32) -> f64;
    /// Largest count carrying probability mass.
    fn max_count(&self) -> u32;
    fn has_data(&self) -> bool;
}

impl CountDistribution for CountHistogram {
    fn at_most(&self, threshold: u32) -> f64 {
        self.trials_at_most(threshold) as f64 / self.kept_trials() as f64
    }

    fn above(&self, threshold: u32) -> f64 {
        self.trials_above(threshold) as f64 / self.kept_trials() as f64
    }

    fn max_count(&self) -> u32 {
        CountHistogram::max_count(self).unwrap_or(0)
    }

    fn has_data(&self) -> bool {
        !self.is_empty()
    }
}

impl CountDistribution for PoissonCounts {
    fn at_most(&self, threshold: u32) -> f64 {
        self.cdf(threshold)
    }

    fn above(&self, threshold: u32) -> f64 {
        self.sf(threshold)
    }

    fn max_count(&self) -> u32 {
        self.support_bound()
    }

    fn has_data(&self) -> bool {
        true
    }
}

fn require<D: CountDistribution + ?Sized>(d: &D, label: &'static str) -> Result<(), AnalysisError> {
    if d.has_data() {
        Ok(())
    } else {
        Err(AnalysisError::NoData(label))
    }
}

/// Maximum-likelihood Poisson mean of a histogram (its sample mean).
pub fn fit_poisson(hist: &CountHistogram) -> Result<f64, AnalysisError> {
    hist.sample_mean()
        .ok_or(AnalysisError::NoData(hist.prepared_state().as_str()))
}

pub fn fidelity(epsilon_bright: f64, epsilon_dark: f64) -> f64 {
    1.0 - 0.5 * (epsilon_bright + epsilon_dark)
}

/// Misclassification rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationErrors {
    pub threshold: u32,
    pub epsilon_bright: f64,
    pub epsilon_dark: f64,
}

impl ClassificationErrors {
    /// Readout error ε = (ε_B + ε_D)/2 = 1 − F.
    pub fn epsilon(&self) -> f64 {
        0.5 * (self.epsilon_bright + self.epsilon_dark)
    }

    pub fn fidelity(&self) -> f64 {
        fidelity(self.epsilon_bright, self.epsilon_dark)
    }
}

pub fn classification_errors<D, B>(
    dark: &D,
    bright: &B,
    threshold: u32,
) -> Result<ClassificationErrors, AnalysisError>
where
    D: CountDistribution + ?Sized,
    B: CountDistribution + ?Sized,
{
    require(dark, "dark")?;
    require(bright, "bright")?;
    Ok(ClassificationErrors {
        threshold,
        epsilon_bright: bright.at_most(threshold),
        epsilon_dark: dark.above(threshold),
    })
}

/// Readout error for every threshold from 0 to one past the largest count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub points: Vec<ClassificationErrors>,
    optimal_index: usize,
}

impl ThresholdScan {
    pub fn optimal(&self) -> &ClassificationErrors {
        &self.points[self.optimal_index]
    }

    pub fn optimal_threshold(&self) -> u32 {
        self.optimal().threshold
    }
}

/// Scans all thresholds; ties go to the smallest threshold.
pub fn threshold_scan<D, B>(dark: &D, bright: &B) -> Result<ThresholdScan, AnalysisError>
where
    D: CountDistribution + ?Sized,
    B: CountDistribution + ?Sized,
{
    require(dark, "dark")?;
    require(bright, "bright")?;
    let last = dark.max_count().max(bright.max_count()) + 1;
    let points = (0..=last)
        .map(|n| classification_errors(dark, bright, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut optimal_index = 0;
    for (i, p) in points.iter().enumerate() {
        if p.epsilon() < points[optimal_index].epsilon() {
            optimal_index = i;
        }
    }
    Ok(ThresholdScan {
        points,
        optimal_index,
    })
}

/// Summary of a readout experiment at its optimal threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    pub epsilon_bright: f64,
    pub epsilon_dark: f64,
    pub fidelity: f64,
    pub threshold: u32,
    pub mean_dark: f64,
    pub mean_bright: f64,
    /// 1σ statistical uncertainty on the fidelity.
    pub confidence: f64,
    pub kept_dark: u64,
    pub kept_bright: u64,
    pub budget: Vec<BudgetRow>,
    /// How the budget rows were attributed; empty when no budget is attached.
    pub budget_method: String,
}

impl DiscriminationReport {
    pub fn from_histograms(
        dark: &CountHistogram,
        bright: &CountHistogram,
    ) -> Result<Self, AnalysisError> {
        let scan = threshold_scan(dark, bright)?;
        let best = *scan.optimal();
        // binomial standard errors on ε_B and ε_D, in quadrature
        let var = |eps: f64, n: u64| eps * (1.0 - eps) / n as f64;
        let confidence = 0.5
            * (var(best.epsilon_bright, bright.kept_trials())
                + var(best.epsilon_dark, dark.kept_trials()))
            .sqrt();
        Ok(DiscriminationReport {
            epsilon_bright: best.epsilon_bright,
            epsilon_dark: best.epsilon_dark,
            fidelity: best.fidelity(),
            threshold: best.threshold,
            mean_dark: fit_poisson(dark)?,
            mean_bright: fit_poisson(bright)?,
            confidence,
            kept_dark: dark.kept_trials(),
            kept_bright: bright.kept_trials(),
            budget: Vec::new(),
            budget_method: String::new(),
        })
    }

    pub fn with_budget(mut self, budget: &ErrorBudget) -> Self {
        self.budget = budget.rows.clone();
        self.budget_method = budget::ATTRIBUTION_METHOD.to_string();
        self
    }
}

/// Analytic readout model: Poisson background plus thinned Poisson fluorescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Mean number of scattered photons for a bright atom.
    pub scatter_mean: f64,
    pub collection_efficiency: f64,
    /// Mean background counts in the probe window.
    pub dark_mean: f64,
}

impl ReadoutModel {
    pub fn from_configs(
        constants: &PhysicalConstants,
        probe: &ProbeConfig,
        detector: &DetectorConfig,
    ) -> Self {
        ReadoutModel {
            scatter_mean: expected_scattered(constants, probe),
            collection_efficiency: detector.collection_efficiency,
            dark_mean: detector.dark_mean(probe.duration),
        }
    }

    /// Model with the given background and fluorescence means.
    pub fn from_means(dark_mean: f64, signal_mean: f64) -> Self {
        ReadoutModel {
            scatter_mean: signal_mean,
            collection_efficiency: 1.0,
            dark_mean,
        }
    }

    pub fn signal_mean(&self) -> f64 {
        self.collection_efficiency * self.scatter_mean
    }

    pub fn mean(&self, state: PreparedState) -> f64 {
        match state {
            PreparedState::Dark => self.dark_mean,
            PreparedState::Bright => self.signal_mean() + self.dark_mean,
        }
    }

    pub fn with_dark_mean(self, dark_mean: f64) -> Self {
        ReadoutModel { dark_mean, ..self }
    }

    pub fn distributions(&self) -> (PoissonCounts, PoissonCounts) {
        (
            PoissonCounts::new(self.mean(PreparedState::Dark)),
            PoissonCounts::new(self.mean(PreparedState::Bright)),
        )
    }

    pub fn scan(&self) -> ThresholdScan {
        let (dark, bright) = self.distributions();
        threshold_scan(&dark, &bright).expect("analytic distributions always carry data")
    }

    pub fn optimal(&self) -> ClassificationErrors {
        *self.scan().optimal()
    }

    pub fn errors_at(&self, threshold: u32) -> ClassificationErrors {
        let (dark, bright) = self.distributions();
        classification_errors(&dark, &bright, threshold)
            .expect("analytic distributions always carry data")
    }
}

/// Trap depth (K) together with the probe used at that depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSetting {
    pub depth: f64,
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub depth: f64,
    pub fidelity: f64,
    pub threshold: u32,
    pub mean_dark: f64,
    pub mean_bright: f64,
}

/// Optimal-threshold fidelity of the analytic Poisson model at each depth.
///
/// F(U) is continuous when the schedule is; its slope jumps wherever the
/// optimal threshold moves by one.
pub fn model_fidelity_curve(
    settings: &[DepthSetting],
    constants: &PhysicalConstants,
    detector: &DetectorConfig,
) -> Vec<ModelPoint> {
    settings
        .iter()
        .map(|s| {
            let model = ReadoutModel::from_configs(constants, &s.probe, detector);
            let best = model.optimal();
            ModelPoint {
                depth: s.depth,
                fidelity: best.fidelity(),
                threshold: best.threshold,
                mean_dark: model.mean(PreparedState::Dark),
                mean_bright: model.mean(PreparedState::Bright),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(dark: &[u32], bright: &[u32]) -> (CountHistogram, CountHistogram) {
        (
            CountHistogram::from_samples(PreparedState::Dark, dark.iter().copied()),
            CountHistogram::from_samples(PreparedState::Bright, bright.iter().copied()),
        )
    }

    #[test]
    fn fit_trivial_and_empty() {
        let h = CountHistogram::from_pairs(PreparedState::Dark, [(0, 1)]);
        assert_eq!(fit_poisson(&h).unwrap(), 0.0);
        let e = CountHistogram::new(PreparedState::Bright);
        assert_eq!(fit_poisson(&e), Err(AnalysisError::NoData("bright")));
    }

    #[test]
    fn fit_poisson_fixture() {
        let h = CountHistogram::from_pairs(
            PreparedState::Dark,
            [(0, 8187), (1, 1637), (2, 164), (3, 12)],
        );
        let m = fit_poisson(&h).unwrap();
        assert!((m - 0.2).abs() < 0.005, "{m}");
    }

    #[test]
    fn analytic_errors_at_two() {
        // tail sums of the Poisson pmf, computed term by term
        let e = classification_errors(&PoissonCounts::new(0.2), &PoissonCounts::new(9.2), 2).unwrap();
        let ed = 1.0 - (-0.2f64).exp() * (1.0 + 0.2 + 0.02);
        let eb = (-9.2f64).exp() * (1.0 + 9.2 + 9.2 * 9.2 / 2.0);
        assert!((e.epsilon_dark - ed).abs() < 1e-15);
        assert!((e.epsilon_bright - eb).abs() < 1e-15);
        assert!((e.epsilon_dark - 1.148e-3).abs() < 1e-6);
        assert!((e.epsilon_bright - 5.307e-3).abs() < 1e-6);
        assert!((e.fidelity() - 0.99677).abs() < 1e-5);
    }

    #[test]
    fn extreme_thresholds() {
        let (d, b) = (PoissonCounts::new(0.2), PoissonCounts::new(9.2));
        let e = classification_errors(&d, &b, 200).unwrap();
        assert!(e.epsilon_bright > 1.0 - 1e-12);
        assert!(e.epsilon_dark < 1e-300);
        let (hd, hb) = pair(&[0, 1, 3], &[4, 9, 12]);
        let e = classification_errors(&hd, &hb, 13).unwrap();
        assert_eq!(e.epsilon_dark, 0.0);
        assert_eq!(e.epsilon_bright, 1.0);
    }

    #[test]
    fn empty_histograms_rejected() {
        let (hd, _) = pair(&[0, 1], &[]);
        let hb = CountHistogram::new(PreparedState::Bright);
        assert!(classification_errors(&hd, &hb, 1).is_err());
        assert!(threshold_scan(&hd, &hb).is_err());
        assert!(DiscriminationReport::from_histograms(&hd, &hb).is_err());
    }

    #[test]
    fn analytic_scan_argmin() {
        let scan = threshold_scan(&PoissonCounts::new(0.2), &PoissonCounts::new(9.2)).unwrap();
        assert_eq!(scan.optimal_threshold(), 2);
    }

    #[test]
    fn indistinguishable_states() {
        let (hd, hb) = pair(&[0, 1, 1, 2, 5], &[0, 1, 1, 2, 5]);
        let scan = threshold_scan(&hd, &hb).unwrap();
        assert_eq!(scan.points.len(), 7);
        assert!(scan.points.iter().all(|p| (p.epsilon() - 0.5).abs() < 1e-15));
        assert_eq!(scan.optimal_threshold(), 0);
        assert_eq!(scan.optimal().fidelity(), 0.5);
    }

    #[test]
    fn scan_ends_past_largest_count() {
        let (hd, hb) = pair(&[0, 0, 4], &[3, 7]);
        let scan = threshold_scan(&hd, &hb).unwrap();
        let last = scan.points.last().unwrap();
        assert_eq!(last.threshold, 8);
        assert_eq!(last.epsilon_dark, 0.0);
    }

    #[test]
    fn fidelity_values() {
        assert_eq!(fidelity(0.0, 0.0), 1.0);
        assert!((fidelity(5.31e-3, 1.15e-3) - 0.99677).abs() < 1e-12);
        // every trial misread
        assert_eq!(fidelity(1.0, 1.0), 0.0);
        assert_eq!(fidelity(0.5, 0.5), 0.5);
    }

    #[test]
    fn report_fields_consistent() {
        let (hd, hb) = pair(&[0, 0, 0, 1, 3], &[2, 8, 9, 10, 11, 0]);
        let r = DiscriminationReport::from_histograms(&hd, &hb).unwrap();
        assert_eq!(r.fidelity, 1.0 - (r.epsilon_bright + r.epsilon_dark) / 2.0);
        assert_eq!(r.kept_dark, 5);
        assert_eq!(r.kept_bright, 6);
        assert!(r.confidence > 0.0);
    }

    #[test]
    fn model_curve_without_background() {
        let c = PhysicalConstants::default();
        let det = DetectorConfig {
            dark_count_rate: 0.0,
            ..DetectorConfig::default()
        };
        let settings: Vec<_> = crate::presets::hand_tuned_settings().to_vec();
        for p in model_fidelity_curve(&settings, &c, &det) {
            assert_eq!(p.threshold, 0);
            assert_eq!(p.mean_dark, 0.0);
        }
    }

    #[test]
    fn model_depends_only_on_means() {
        let c = PhysicalConstants::default();
        let det = DetectorConfig::default();
        let base = DepthSetting {
            depth: 1.4e-3,
            probe: ProbeConfig::new(0.061, 1.5e-3),
        };
        // double Δt, halve s/(1+s) and the background rate
        let s = 0.061 / (2.0 + 0.061);
        let doubled = DepthSetting {
            depth: 1.4e-3,
            probe: ProbeConfig::new(s, 3.0e-3),
        };
        let half_rate = DetectorConfig {
            dark_count_rate: 65.0,
            ..det
        };
        let a = model_fidelity_curve(&[base], &c, &det)[0];
        let b = model_fidelity_curve(&[doubled], &c, &half_rate)[0];
        assert!((a.mean_bright - b.mean_bright).abs() < 1e-12);
        assert!((a.fidelity - b.fidelity).abs() < 1e-14);
        assert_eq!(a.threshold, b.threshold);
    }

    proptest! {
        // brute-force classification of the raw trial lists
        #[test]
        fn errors_match_trial_list(
            dark in proptest::collection::vec(0u32..12, 1..300),
            bright in proptest::collection::vec(0u32..25, 1..300),
            nc in 0u32..30,
        ) {
            let (hd, hb) = pair(&dark, &bright);
            let e = classification_errors(&hd, &hb, nc).unwrap();
            let eb = bright.iter().filter(|&&n| n <= nc).count() as f64 / bright.len() as f64;
            let ed = dark.iter().filter(|&&n| n > nc).count() as f64 / dark.len() as f64;
            prop_assert_eq!(e.epsilon_bright, eb);
            prop_assert_eq!(e.epsilon_dark, ed);
        }

        #[test]
        fn scan_monotone_and_argmin(
            dark in proptest::collection::vec(0u32..12, 1..300),
            bright in proptest::collection::vec(0u32..25, 1..300),
        ) {
            let (hd, hb) = pair(&dark, &bright);
            let scan = threshold_scan(&hd, &hb).unwrap();
            for w in scan.points.windows(2) {
                prop_assert!(w[1].epsilon_bright >= w[0].epsilon_bright);
                prop_assert!(w[1].epsilon_dark <= w[0].epsilon_dark);
            }
            let best = scan.optimal().epsilon();
            prop_assert!(scan.points.iter().all(|p| best <= p.epsilon()));
            let first = scan.points.iter().position(|p| p.epsilon() == best).unwrap();
            prop_assert_eq!(scan.points[first].threshold, scan.optimal_threshold());
        }

        // Relabel bright as dark and flip the classifier: counts map to
        // k − n, and "≤ n_c" becomes "> k − n_c − 1".
        #[test]
        fn relabeling_symmetry(
            dark in proptest::collection::vec(0u32..12, 1..200),
            bright in proptest::collection::vec(0u32..12, 1..200),
            nc in 0u32..12,
        ) {
            let k = 12;
            let (hd, hb) = pair(&dark, &bright);
            let f = classification_errors(&hd, &hb, nc).unwrap().fidelity();
            let md: Vec<u32> = bright.iter().map(|n| k - n).collect();
            let mb: Vec<u32> = dark.iter().map(|n| k - n).collect();
            let (hd2, hb2) = pair(&md, &mb);
            let f2 = classification_errors(&hd2, &hb2, k - nc - 1).unwrap().fidelity();
            prop_assert!((f - f2).abs() < 1e-15);
        }
    }
}
