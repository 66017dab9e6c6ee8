use std::ops::{Deref, DerefMut};

use nalgebra::DVector;

/// Dense parameter vector `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector(DVector::zeros(n))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(DVector::from_vec(values))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        ParamVector(DVector::from_column_slice(values))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    /// `self += alpha * x`
    pub fn add_scaled(&mut self, alpha: f64, x: &ParamVector) {
        for (a, b) in self.0.iter_mut().zip(x.0.iter()) {
            *a += alpha * b;
        }
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl From<DVector<f64>> for ParamVector {
    fn from(v: DVector<f64>) -> Self {
        ParamVector(v)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector::from_vec(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_scaled_and_distance() {
        let mut w = ParamVector::from_vec(vec![1.0, 2.0]);
        let g = ParamVector::from_vec(vec![2.0, -2.0]);
        w.add_scaled(-0.5, &g);
        assert_eq!(w.as_slice(), &[0.0, 3.0]);
        assert_eq!(w.distance(&ParamVector::from_vec(vec![3.0, 7.0])), 5.0);
    }
}
