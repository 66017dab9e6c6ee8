//! Convergence detection on periodic full training-loss evaluations.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Converged once the mean of the last `window` evaluations is below
/// `threshold`. Evaluations happen every `eval_every` inner steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub threshold: f64,
    pub window: usize,
    pub eval_every: usize,
}

impl StoppingRule {
    pub fn new(threshold: f64) -> Self {
        StoppingRule {
            threshold,
            window: 10,
            eval_every: 10,
        }
    }

    /// Index of the evaluation at which a loss sequence first converges.
    pub fn first_crossing(&self, losses: &[f64]) -> Option<usize> {
        let mut tracker = WindowTracker::new(self.window);
        losses
            .iter()
            .position(|&l| tracker.push(l).is_some_and(|m| m < self.threshold))
    }
}

/// Running mean of the most recent `window` values.
#[derive(Clone, Debug)]
pub struct WindowTracker {
    window: usize,
    values: VecDeque<f64>,
    sum: f64,
}

impl WindowTracker {
    pub fn new(window: usize) -> Self {
        WindowTracker {
            window: window.max(1),
            values: VecDeque::with_capacity(window),
            sum: 0.0,
        }
    }

    /// Adds a value; returns the window mean once the window is full.
    pub fn push(&mut self, value: f64) -> Option<f64> {
        self.values.push_back(value);
        self.sum += value;
        if self.values.len() > self.window {
            self.sum -= self.values.pop_front().unwrap();
        }
        // recompute exactly to avoid drift in the running sum
        if self.values.len() == self.window {
            self.sum = self.values.iter().sum();
            Some(self.sum / self.window as f64)
        } else {
            None
        }
    }
}
