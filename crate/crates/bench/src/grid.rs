//! Logarithmic learning-rate grid.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub per_decade: u32,
}

impl Default for GridSpec {
    /// `0.01` to `10` with consecutive candidates `10^{1/20}` apart.
    fn default() -> Self {
        GridSpec {
            lo: 0.01,
            hi: 10.0,
            per_decade: 20,
        }
    }
}

impl GridSpec {
    /// Candidates in increasing order. Each is computed from its exponent so
    /// that the endpoints are exact up to one rounding.
    pub fn candidates(&self) -> Vec<f64> {
        let lo = self.lo.log10();
        let steps = ((self.hi.log10() - lo) * self.per_decade as f64).round() as u32;
        (0..=steps)
            .map(|i| 10f64.powf(lo + i as f64 / self.per_decade as f64))
            .collect()
    }
}
