//! Monte Carlo estimate records and pooled accumulation.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// Point estimate.
    pub value: f64,
    /// Standard error, sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    /// Number of samples.
    pub n_samples: u64,
    /// Master seed.
    pub seed: u64,
    /// Wall-clock seconds spent.
    pub wall_time: f64,
}

impl EstimateRecord {
    /// Half-width `k * stderr` interval test: true when `|value - x| ≤ k σ`.
    pub fn agrees_with(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.stderr
    }
}

/// Running sums for a mean with standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    /// Number of values.
    pub n: u64,
    /// Sum of values.
    pub sum: f64,
    /// Sum of squared values.
    pub sum_sq: f64,
}

impl Accumulator {
    /// Adds a value.
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Pools another accumulator.
    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Sample mean, 0 when empty.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        let var = ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    /// Estimate record with the given seed and wall time.
    pub fn record(&self, seed: u64, wall_time: f64) -> EstimateRecord {
        EstimateRecord { value: self.mean(), stderr: self.stderr(), n_samples: self.n, seed, wall_time }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_stderr() {
        let mut a = Accumulator::default();
        for i in 0..1000 {
            a.push(if i % 4 == 0 { 1.0 } else { 0.0 });
        }
        assert!((a.mean() - 0.25).abs() < 1e-12);
        let expect = (0.25f64 * 0.75 * 1000.0 / 999.0 / 1000.0).sqrt();
        assert!((a.stderr() - expect).abs() < 1e-12);
        let mut b = Accumulator::default();
        b.merge(&a);
        assert_eq!(a, b);
        assert!(a.record(1, 0.0).agrees_with(0.25, 0.1));
    }
}
