//! Synthetic stand-ins for the measured drive-test scenarios.
//!
//! Each preset is a band-switching chain whose levels and dwell times follow
//! the regime each environment shows in practice: mid-band bursts while
//! driving, low-band plateaus on trains, fringe coverage with outages in the
//! countryside, a heavily loaded cell at a concert and dual-connectivity
//! mmWave bursts while walking. `Lte` is the legacy mix-in used for
//! training only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traces::{synthesize, Band, BandState, SyntheticSpec, ThroughputTrace};

/// Length of a generated scenario trace; evaluation windows are cut from it.
pub const SCENARIO_DURATION_S: f64 = 1800.0;
pub const SCENARIO_INTERVAL_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Driving,
    Streetcar,
    SuburbanTrain,
    RuralTrain,
    Concert,
    NrDcWalking,
    Lte,
}

impl Scenario {
    /// The six evaluation scenarios, standalone first.
    pub const EVALUATION: [Scenario; 6] = [
        Scenario::Driving,
        Scenario::Streetcar,
        Scenario::SuburbanTrain,
        Scenario::RuralTrain,
        Scenario::Concert,
        Scenario::NrDcWalking,
    ];

    /// Standalone-network scenarios used for training.
    pub const STANDALONE: [Scenario; 5] = [
        Scenario::Driving,
        Scenario::Streetcar,
        Scenario::SuburbanTrain,
        Scenario::RuralTrain,
        Scenario::Concert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Driving => "driving",
            Scenario::Streetcar => "streetcar",
            Scenario::SuburbanTrain => "suburban_train",
            Scenario::RuralTrain => "rural_train",
            Scenario::Concert => "concert",
            Scenario::NrDcWalking => "nr_dc_walking",
            Scenario::Lte => "lte",
        }
    }

    pub fn spec(self, seed: u64) -> SyntheticSpec {
        let st = |band, mean_kbps, stddev_kbps, mean_dwell_s| BandState {
            band,
            mean_kbps,
            stddev_kbps,
            mean_dwell_s,
        };
        use Band::*;
        let (states, transitions) = match self {
            Scenario::Driving => (
                vec![
                    st(MidBandTdd, 120_000.0, 50_000.0, 25.0),
                    st(LowBandFdd, 35_000.0, 15_000.0, 20.0),
                    st(Lte, 18_000.0, 8_000.0, 10.0),
                ],
                vec![
                    vec![0.0, 0.75, 0.25],
                    vec![0.7, 0.0, 0.3],
                    vec![0.5, 0.5, 0.0],
                ],
            ),
            Scenario::Streetcar => (
                vec![
                    st(MidBandTdd, 180_000.0, 70_000.0, 40.0),
                    st(LowBandFdd, 45_000.0, 20_000.0, 15.0),
                ],
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ),
            Scenario::SuburbanTrain => (
                vec![
                    st(LowBandFdd, 40_000.0, 18_000.0, 20.0),
                    st(LowBandFdd, 12_000.0, 6_000.0, 10.0),
                    st(MidBandTdd, 90_000.0, 40_000.0, 10.0),
                ],
                vec![
                    vec![0.0, 0.6, 0.4],
                    vec![0.8, 0.0, 0.2],
                    vec![0.7, 0.3, 0.0],
                ],
            ),
            Scenario::RuralTrain => (
                vec![
                    st(LowBandFdd, 15_000.0, 7_000.0, 25.0),
                    st(LowBandFdd, 4_000.0, 2_500.0, 10.0),
                    st(Outage, 0.0, 0.0, 5.0),
                    st(Lte, 10_000.0, 5_000.0, 15.0),
                ],
                vec![
                    vec![0.0, 0.5, 0.2, 0.3],
                    vec![0.5, 0.0, 0.3, 0.2],
                    vec![0.3, 0.5, 0.0, 0.2],
                    vec![0.6, 0.3, 0.1, 0.0],
                ],
            ),
            Scenario::Concert => (
                vec![
                    st(MidBandTdd, 25_000.0, 15_000.0, 15.0),
                    st(MidBandTdd, 8_000.0, 5_000.0, 10.0),
                    st(MidBandTdd, 60_000.0, 25_000.0, 8.0),
                ],
                vec![
                    vec![0.0, 0.6, 0.4],
                    vec![0.8, 0.0, 0.2],
                    vec![0.7, 0.3, 0.0],
                ],
            ),
            Scenario::NrDcWalking => (
                vec![
                    st(NrDcHigh, 600_000.0, 250_000.0, 30.0),
                    st(MidBandTdd, 200_000.0, 80_000.0, 20.0),
                ],
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ),
            Scenario::Lte => (
                vec![
                    st(Lte, 20_000.0, 10_000.0, 15.0),
                    st(Lte, 6_000.0, 3_000.0, 10.0),
                ],
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ),
        };
        SyntheticSpec {
            name: self.as_str().to_string(),
            states,
            transitions,
            sample_interval_ms: SCENARIO_INTERVAL_MS,
            duration_s: SCENARIO_DURATION_S,
            seed,
            initial_state: 0,
        }
    }

    pub fn synthesize(self, seed: u64) -> Result<ThroughputTrace> {
        synthesize(&self.spec(seed))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::EVALUATION
            .iter()
            .chain(std::iter::once(&Scenario::Lte))
            .copied()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_distinct() {
        for sc in Scenario::EVALUATION.iter().chain([Scenario::Lte].iter()) {
            let t = sc.synthesize(1).unwrap();
            assert_eq!(t.duration_ms(), 1_800_000);
            assert_eq!(sc.as_str().parse::<Scenario>().unwrap(), *sc);
        }
        let nrdc = Scenario::NrDcWalking.synthesize(1).unwrap().mean_kbps();
        let rural = Scenario::RuralTrain.synthesize(1).unwrap().mean_kbps();
        assert!(nrdc > 10.0 * rural);
    }

    #[test]
    fn rural_has_outages() {
        let t = Scenario::RuralTrain.synthesize(3).unwrap();
        assert!(t.samples().iter().any(|s| s.throughput_kbps == 0.0));
    }
}
