use serde::{Deserialize, Serialize};

use super::{harmonic_mean, AbrPolicy};
use crate::qoe::BitrateLadder;
use crate::simulator::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbParams {
    pub window: usize,
}

impl Default for RbParams {
    fn default() -> Self {
        Self { window: 5 }
    }
}

/// Highest rung whose bitrate fits under the harmonic mean of the last
/// `window` positive throughput samples. No history means rung 0.
pub fn rb_decide(past_throughputs_kbps: &[f64], params: RbParams, ladder: &BitrateLadder) -> usize {
    let positive: Vec<f64> = past_throughputs_kbps.iter().copied().filter(|&v| v > 0.0).collect();
    let recent = &positive[positive.len().saturating_sub(params.window)..];
    match harmonic_mean(recent) {
        // relative slack so an exact match survives rounding in the mean
        Some(pred) => ladder.highest_at_most(pred * (1.0 + 1e-12)),
        None => 0,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RateBased {
    params: RbParams,
}

impl RateBased {
    pub fn new(params: RbParams) -> Self {
        Self { params }
    }
}

impl AbrPolicy for RateBased {
    fn name(&self) -> &str {
        "rb"
    }

    fn decide(&mut self, obs: &Observation, ladder: &BitrateLadder) -> usize {
        rb_decide(&obs.past_throughputs_kbps, self.params, ladder)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rung_is_inclusive() {
        let l = BitrateLadder::uhd();
        assert_eq!(rb_decide(&[4_000.0; 8], RbParams::default(), &l), 5);
    }

    #[test]
    fn cold_start() {
        let l = BitrateLadder::uhd();
        assert_eq!(rb_decide(&[0.0; 8], RbParams::default(), &l), 0);
        assert_eq!(rb_decide(&[], RbParams::default(), &l), 0);
    }

    #[test]
    fn harmonic_history() {
        let l = BitrateLadder::uhd();
        let h = [0.0, 0.0, 0.0, 10_000.0, 20_000.0, 40_000.0, 40_000.0, 40_000.0];
        assert!((harmonic_mean(&h[3..]).unwrap() - 22_222.222_222).abs() < 1e-3);
        assert_eq!(rb_decide(&h, RbParams::default(), &l), 7);
    }

    #[test]
    fn window_uses_newest() {
        let l = BitrateLadder::uhd();
        // the old 100 kbps sample falls out of a 5-wide window
        let h = [100.0, 8_000.0, 8_000.0, 8_000.0, 8_000.0, 8_000.0];
        assert_eq!(rb_decide(&h, RbParams::default(), &l), 6);
    }
}
