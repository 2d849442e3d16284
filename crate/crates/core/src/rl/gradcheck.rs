//! Central finite-difference check of the analytic gradients.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{softmax, ActorCritic, Cache, Network};
use crate::error::{Error, Result};

/// Step for the central difference.
const STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// `log π(a|s)` for the chosen action.
    Actor,
    /// `V(s)`.
    Critic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coordinate {
    pub head: Head,
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    /// Coordinates compared, per head.
    pub per_head: usize,
    pub coordinates: Vec<Coordinate>,
    /// Coordinates rejected because a ReLU switched inside `θ ± h`.
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance && self.coordinates.len() >= 2 * self.per_head
    }

    pub fn worst(&self) -> Option<&Coordinate> {
        self.coordinates.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

fn objective(net: &Network<f64>, head: Head, input: &[f64], action: usize) -> (f64, Cache<f64>) {
    let cache = net.forward(input, 1);
    let v = match head {
        Head::Actor => softmax(&cache.out)[action].ln(),
        Head::Critic => cache.out[0],
    };
    (v, cache)
}

fn same_mask(a: &Cache<f64>, b: &Cache<f64>) -> bool {
    let on = |x: &f64| *x > 0.0;
    a.merged.iter().map(on).eq(b.merged.iter().map(on)) && a.hidden.iter().map(on).eq(b.hidden.iter().map(on))
}

/// Analytic gradient of the head objective at the current parameters.
fn analytic(net: &Network<f64>, head: Head, input: &[f64], action: usize) -> Vec<f64> {
    let cache = net.forward(input, 1);
    let d_out = match head {
        Head::Actor => softmax(&cache.out)
            .iter()
            .enumerate()
            .map(|(j, p)| if j == action { 1.0 - p } else { -p })
            .collect(),
        Head::Critic => vec![1.0],
    };
    let mut grad = vec![0.0; net.len()];
    net.backward(input, &cache, &d_out, &mut grad);
    grad
}

/// Compares analytic and central-difference gradients of `log π(action|s)`
/// and `V(s)` on `coords` coordinates per head, drawn round-robin over the
/// parameter tensors.
pub fn gradient_check(
    net: &ActorCritic<f64>,
    input: &[f64],
    action: usize,
    coords: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    gradient_check_with(net, input, action, coords, tolerance, seed, &|_, _| {})
}

/// As [`gradient_check`], with `corrupt` applied to each analytic gradient
/// before comparison.
pub fn gradient_check_with(
    net: &ActorCritic<f64>,
    input: &[f64],
    action: usize,
    coords: usize,
    tolerance: f64,
    seed: u64,
    corrupt: &dyn Fn(Head, &mut [f64]),
) -> Result<GradCheckReport> {
    let arch = net.architecture();
    if input.len() != arch.input_dim() {
        return Err(Error::Config(format!(
            "input has {} features, network expects {}",
            input.len(),
            arch.input_dim()
        )));
    }
    if action >= arch.actions {
        return Err(Error::Config(format!("action {action} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coordinates = Vec::with_capacity(2 * coords);
    let mut skipped = 0;
    for (head, network) in [(Head::Actor, &net.actor), (Head::Critic, &net.critic)] {
        let mut grad = analytic(network, head, input, action);
        corrupt(head, &mut grad);
        let (_, base) = objective(network, head, input, action);
        let tensors = network.tensors();
        let mut seen = HashSet::new();
        let mut probe = network.clone();
        let mut accepted = 0;
        let mut attempts = 0;
        let mut t = 0;
        while accepted < coords && attempts < 50 * coords {
            attempts += 1;
            let (name, range) = &tensors[t % tensors.len()];
            t += 1;
            let i = rng.random_range(range.clone());
            if !seen.insert(i) {
                continue;
            }
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + STEP;
            let (plus, c_plus) = objective(&probe, head, input, action);
            probe.params_mut()[i] = orig - STEP;
            let (minus, c_minus) = objective(&probe, head, input, action);
            probe.params_mut()[i] = orig;
            if !(same_mask(&base, &c_plus) && same_mask(&base, &c_minus)) {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            coordinates.push(Coordinate {
                head,
                tensor: name,
                index: i,
                analytic: grad[i],
                numeric,
                rel_error: rel_error(grad[i], numeric),
            });
            accepted += 1;
        }
    }
    let max_rel_error = coordinates.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        tolerance,
        per_head: coords,
        coordinates,
        skipped,
        max_rel_error,
    })
}
