use serde::{Deserialize, Serialize};

use super::AbrPolicy;
use crate::qoe::BitrateLadder;
use crate::simulator::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BbParams {
    pub reservoir_s: f64,
    pub cushion_s: f64,
}

impl Default for BbParams {
    fn default() -> Self {
        // sized for a 24 s buffer: reservoir ≈ 1/6, cushion ≈ 2/3
        Self {
            reservoir_s: 4.0,
            cushion_s: 16.0,
        }
    }
}

/// Buffer-based rate map: lowest rung inside the reservoir, top rung past
/// the cushion, linear in between.
pub fn bb_decide(buffer_s: f64, params: BbParams, ladder: &BitrateLadder) -> usize {
    let top = ladder.top();
    if buffer_s < params.reservoir_s {
        return 0;
    }
    if buffer_s >= params.reservoir_s + params.cushion_s {
        return top;
    }
    let frac = (buffer_s - params.reservoir_s) / params.cushion_s;
    ((top as f64 * frac).floor() as usize).min(top)
}

#[derive(Debug, Clone, Default)]
pub struct BufferBased {
    params: BbParams,
}

impl BufferBased {
    pub fn new(params: BbParams) -> Self {
        Self { params }
    }
}

impl AbrPolicy for BufferBased {
    fn name(&self) -> &str {
        "bb"
    }

    fn decide(&mut self, obs: &Observation, ladder: &BitrateLadder) -> usize {
        bb_decide(obs.buffer_s, self.params, ladder)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_and_midpoint() {
        let l = BitrateLadder::uhd();
        let p = BbParams::default();
        assert_eq!(bb_decide(0.0, p, &l), 0);
        assert_eq!(bb_decide(2.0, p, &l), 0);
        assert_eq!(bb_decide(24.0, p, &l), 9);
        assert_eq!(bb_decide(12.0, p, &l), 4);
    }

    #[test]
    fn monotone_in_buffer() {
        let l = BitrateLadder::uhd();
        let p = BbParams::default();
        let mut prev = 0;
        for i in 0..=24_000 {
            let r = bb_decide(i as f64 * 0.001, p, &l);
            assert!(r >= prev);
            prev = r;
        }
    }
}
