//! RMSProp with the mean-square accumulator started at one.

use serde::{Deserialize, Serialize};

use super::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp<T> {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    #[serde(skip)]
    mean_square: Vec<T>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(lr: f64, len: usize) -> Self {
        Self {
            lr,
            decay: 0.9,
            eps: 1e-10,
            mean_square: vec![T::one(); len],
        }
    }

    pub fn with_state(mut self, mean_square: Vec<T>) -> Self {
        self.mean_square = mean_square;
        self
    }

    pub fn state(&self) -> &[T] {
        &self.mean_square
    }

    /// `p -= lr · g / sqrt(ms + eps)` after folding `g²` into `ms`.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.mean_square.len());
        let decay = T::lit(self.decay);
        let keep = T::one() - decay;
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        for ((p, &g), ms) in params.iter_mut().zip(grad).zip(&mut self.mean_square) {
            *ms = decay * *ms + keep * g * g;
            *p = *p - lr * g / (*ms + eps).sqrt();
        }
    }
}
