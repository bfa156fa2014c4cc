use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PlantState;
use crate::{Error, Result, LINES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// m³/s
    pub flows: [f64; LINES],
    /// s
    pub timestamp: f64,
}

/// Flow meters: lagged line flows plus zero-mean Gaussian noise.
///
/// Exactly three normal draws are consumed per reading regardless of the
/// noise level, so two sensors with the same seed see the same noise
/// sequence whatever the closed loop does.
#[derive(Debug, Clone)]
pub struct Sensor {
    noise_std: f64,
    rng: ChaCha8Rng,
}

impl Sensor {
    pub fn new(noise_std: f64, seed: u64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Config(format!("noise standard deviation must be >= 0, got {noise_std}")));
        }
        Ok(Self {
            noise_std,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn measure(&mut self, state: &PlantState, timestamp: f64) -> Measurement {
        self.measure_flows(state.measured_flows(), timestamp)
    }

    /// Adds noise to flows supplied directly (for plants without meter lag).
    pub fn measure_flows(&mut self, flows: [f64; LINES], timestamp: f64) -> Measurement {
        let flows = std::array::from_fn(|i| {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            flows[i] + self.noise_std * z
        });
        Measurement { flows, timestamp }
    }
}

/// One-shot reading with a freshly seeded sensor.
pub fn measure(state: &PlantState, noise_std: f64, seed: u64) -> Result<Measurement> {
    Ok(Sensor::new(noise_std, seed)?.measure(state, 0.0))
}
