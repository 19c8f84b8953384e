use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::physics::PreparedState;

/// Photon-number histogram of the post-selected trials for one prepared state.
///
/// Empty bins are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountHistogram {
    counts: BTreeMap<u32, u64>,
    kept_trials: u64,
    prepared_state: PreparedState,
}

impl CountHistogram {
    pub fn new(prepared_state: PreparedState) -> Self {
        CountHistogram {
            counts: BTreeMap::new(),
            kept_trials: 0,
            prepared_state,
        }
    }

    /// Builds a histogram from `(photon number, frequency)` pairs.
    /// Repeated photon numbers accumulate.
    pub fn from_pairs<I>(prepared_state: PreparedState, pairs: I) -> Self
    where
        I: IntoIterator<Item = (u32, u64)>,
    {
        let mut hist = CountHistogram::new(prepared_state);
        for (n, freq) in pairs {
            hist.add(n, freq);
        }
        hist
    }

    pub fn from_samples<I>(prepared_state: PreparedState, samples: I) -> Self
    where
        I: IntoIterator<Item = u32>,
    {
        let mut hist = CountHistogram::new(prepared_state);
        for n in samples {
            hist.record(n);
        }
        hist
    }

    pub fn record(&mut self, n: u32) {
        self.add(n, 1);
    }

    pub fn add(&mut self, n: u32, freq: u64) {
        if freq == 0 {
            return;
        }
        *self.counts.entry(n).or_insert(0) += freq;
        self.kept_trials += freq;
    }

    /// Associative, commutative merge of two histograms of the same state.
    pub fn merge(mut self, other: &CountHistogram) -> Self {
        debug_assert_eq!(self.prepared_state, other.prepared_state);
        for (&n, &freq) in &other.counts {
            self.add(n, freq);
        }
        self
    }

    pub fn prepared_state(&self) -> PreparedState {
        self.prepared_state
    }

    pub fn kept_trials(&self) -> u64 {
        self.kept_trials
    }

    pub fn is_empty(&self) -> bool {
        self.kept_trials == 0
    }

    pub fn frequency(&self, n: u32) -> u64 {
        self.counts.get(&n).copied().unwrap_or(0)
    }

    /// Non-empty bins in increasing photon number.
    pub fn bins(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&n, &f)| (n, f))
    }

    pub fn max_count(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    /// Number of trials with at most `n` detected photons.
    pub fn trials_at_most(&self, n: u32) -> u64 {
        self.counts.range(..=n).map(|(_, &f)| f).sum()
    }

    /// Number of trials with more than `n` detected photons.
    pub fn trials_above(&self, n: u32) -> u64 {
        self.kept_trials - self.trials_at_most(n)
    }

    pub fn sample_mean(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let total: f64 = self.bins().map(|(n, f)| n as f64 * f as f64).sum();
        Some(total / self.kept_trials as f64)
    }
}
