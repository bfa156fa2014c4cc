//! Independent PI loops per line with a clamped integral (anti-windup).

use crate::{Error, Result, LINES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiConfig {
    /// Proportional gain, Pa/(m³/s).
    pub kp: f64,
    /// Integral gain, Pa/m³.
    pub ki: f64,
    pub u_min: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PiState {
    /// Accumulated error ∫e dt, m³.
    pub integral: f64,
    pub u: f64,
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kp.is_finite() && self.ki.is_finite()) {
            return Err(Error::Config(format!("PI gains must be non-negative, got kp={} ki={}", self.kp, self.ki)));
        }
        if !(self.u_min <= self.u_max && self.u_min.is_finite() && self.u_max.is_finite()) {
            return Err(Error::Config(format!("PI output bounds [{}, {}] are invalid", self.u_min, self.u_max)));
        }
        Ok(())
    }

    pub fn scaled(self, gain_scale: f64) -> Self {
        Self {
            kp: self.kp * gain_scale,
            ki: self.ki * gain_scale,
            ..self
        }
    }
}

/// Gains of the comparison controller; lines 1 and 3 share a tuning.
pub fn default_pi_gains() -> [PiConfig; LINES] {
    let outer = PiConfig {
        kp: 5e11,
        ki: 2.5e12,
        u_min: 0.0,
        u_max: 150_000.0,
    };
    let middle = PiConfig {
        kp: 8.5e10,
        ki: 1.5e12,
        ..outer
    };
    [outer, middle, outer]
}

/// `u = clamp(kp·e + ki·∫e)` with the integral of past errors, then the
/// integral advances by `e·T` and is clamped so `ki·∫e` stays in bounds.
pub fn pi_step(state: PiState, error: f64, sample_period: f64, cfg: &PiConfig) -> (f64, PiState) {
    let u = (cfg.kp * error + cfg.ki * state.integral).clamp(cfg.u_min, cfg.u_max);
    let mut integral = state.integral + error * sample_period;
    if cfg.ki > 0.0 {
        integral = integral.clamp(cfg.u_min / cfg.ki, cfg.u_max / cfg.ki);
    }
    (u, PiState { integral, u })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    configs: [PiConfig; LINES],
    states: [PiState; LINES],
    sample_period: f64,
}

impl PiController {
    pub fn new(configs: [PiConfig; LINES], sample_period: f64) -> Result<Self> {
        for c in &configs {
            c.validate()?;
        }
        if !(sample_period > 0.0) {
            return Err(Error::Config(format!("sample period must be positive, got {sample_period}")));
        }
        Ok(Self {
            configs,
            states: [PiState::default(); LINES],
            sample_period,
        })
    }

    pub fn configs(&self) -> &[PiConfig; LINES] {
        &self.configs
    }

    pub fn states(&self) -> &[PiState; LINES] {
        &self.states
    }

    /// Errors are reference minus measurement, in m³/s.
    pub fn step(&mut self, errors: &[f64; LINES]) -> [f64; LINES] {
        std::array::from_fn(|i| {
            let (u, s) = pi_step(self.states[i], errors[i], self.sample_period, &self.configs[i]);
            self.states[i] = s;
            u
        })
    }
}
