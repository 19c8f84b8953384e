use serde::{Deserialize, Serialize};

/// Analytic Poisson count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonCounts {
    mean: f64,
}

impl PoissonCounts {
    /// `mean` must be finite and non-negative.
    pub fn new(mean: f64) -> Self {
        assert!(mean.is_finite() && mean >= 0.0, "invalid Poisson mean {mean}");
        PoissonCounts { mean }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn pmf(&self, n: u32) -> f64 {
        if self.mean == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let ln_mean = self.mean.ln();
        let mut ln_p = -self.mean;
        for k in 1..=n {
            ln_p += ln_mean - (k as f64).ln();
        }
        ln_p.exp()
    }

    /// P(N ≤ n).
    pub fn cdf(&self, n: u32) -> f64 {
        if n as f64 >= self.mean {
            return 1.0 - self.sf(n);
        }
        self.pmf_iter().take(n as usize + 1).sum::<f64>().min(1.0)
    }

    /// P(N > n), summed directly so small tails keep full precision.
    pub fn sf(&self, n: u32) -> f64 {
        if (n as f64) < self.mean {
            return 1.0 - self.cdf(n);
        }
        let mut term = self.pmf(n + 1);
        let mut total = 0.0;
        let mut k = n + 1;
        while term > 0.0 {
            total += term;
            if term < total * 1e-18 {
                break;
            }
            k += 1;
            term *= self.mean / k as f64;
        }
        total.min(1.0)
    }

    /// Smallest n beyond which the remaining mass is negligible in double precision.
    pub fn support_bound(&self) -> u32 {
        let mut n = (self.mean + 10.0 * self.mean.sqrt() + 10.0).ceil() as u32;
        while self.sf(n) > 1e-17 {
            n += 1 + n / 8;
        }
        n
    }

    fn pmf_iter(&self) -> impl Iterator<Item = f64> + '_ {
        // log space: e^-mean underflows long before the bulk of the mass does
        let ln_mean = self.mean.ln();
        let mut k = 0u32;
        let mut ln_p = -self.mean;
        std::iter::from_fn(move || {
            if k > 0 {
                ln_p += ln_mean - (k as f64).ln();
            }
            k += 1;
            Some(ln_p.exp())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

    #[test]
    fn matches_reference_implementation() {
        for &mean in &[0.05, 0.195, 1.0, 9.2, 31.7, 120.0] {
            let ours = PoissonCounts::new(mean);
            let theirs = Poisson::new(mean).unwrap();
            for n in 0..(mean as u64 * 3 + 10) {
                let n32 = n as u32;
                let rel = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.abs().max(1e-300);
                assert!(rel(ours.pmf(n32), theirs.pmf(n)), "pmf {mean} {n}");
                assert!(rel(ours.cdf(n32), theirs.cdf(n)), "cdf {mean} {n}");
                assert!(rel(ours.sf(n32), theirs.sf(n)), "sf {mean} {n}");
            }
        }
    }

    #[test]
    fn degenerate_zero_mean() {
        let p = PoissonCounts::new(0.0);
        assert_eq!(p.pmf(0), 1.0);
        assert_eq!(p.cdf(0), 1.0);
        assert_eq!(p.sf(0), 0.0);
    }

    #[test]
    fn support_bound_covers_mass() {
        for &mean in &[0.0, 0.2, 9.2, 500.0] {
            let p = PoissonCounts::new(mean);
            assert!(p.sf(p.support_bound()) <= 1e-17);
        }
    }
}
