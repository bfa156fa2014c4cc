//! Scenario description as read from JSON. Flows are in µl/s and pressures
//! in Pa at this boundary.

use crate::plant::{Perturbations, RegulatorPreset};
use crate::units::ul_s_to_si;
use crate::{Error, Result, LINES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Mpc,
    Pi,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Pi => "pi",
        }
    }
}

/// What plays the role of the real system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// Full nonlinear model with flow-meter lag.
    #[default]
    Full,
    /// The controller's own discrete linear model (matched-model studies).
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProcessNoisePreset {
    /// Block-diagonal process noise scaled by `beta`.
    #[default]
    Default,
    /// Hand-tuned laboratory values; `beta` is ignored.
    Lab,
}

/// Piecewise reference for one line.
///
/// * `step`: holds `levels[i]` from `breakpoints[i]` on.
/// * `ramp`: linear interpolation between the `(breakpoint, level)` pairs.
/// * `triangle`: three breakpoints `[start, peak, end]` and two levels
///   `[low, high]`.
///
/// Before the first breakpoint every profile sits at its first level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceProfile {
    Step { breakpoints_s: Vec<f64>, levels_ul_s: Vec<f64> },
    Ramp { breakpoints_s: Vec<f64>, levels_ul_s: Vec<f64> },
    Triangle { breakpoints_s: Vec<f64>, levels_ul_s: Vec<f64> },
}

impl ReferenceProfile {
    pub fn constant(level_ul_s: f64) -> Self {
        ReferenceProfile::Step {
            breakpoints_s: vec![0.0],
            levels_ul_s: vec![level_ul_s],
        }
    }

    pub fn step(breakpoints_s: &[f64], levels_ul_s: &[f64]) -> Self {
        ReferenceProfile::Step {
            breakpoints_s: breakpoints_s.to_vec(),
            levels_ul_s: levels_ul_s.to_vec(),
        }
    }

    pub fn ramp(breakpoints_s: &[f64], levels_ul_s: &[f64]) -> Self {
        ReferenceProfile::Ramp {
            breakpoints_s: breakpoints_s.to_vec(),
            levels_ul_s: levels_ul_s.to_vec(),
        }
    }

    pub fn triangle(start: f64, peak: f64, end: f64, low: f64, high: f64) -> Self {
        ReferenceProfile::Triangle {
            breakpoints_s: vec![start, peak, end],
            levels_ul_s: vec![low, high],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (b, l) = match self {
            ReferenceProfile::Step { breakpoints_s, levels_ul_s } | ReferenceProfile::Ramp { breakpoints_s, levels_ul_s } => {
                if breakpoints_s.len() != levels_ul_s.len() || breakpoints_s.is_empty() {
                    return Err(Error::Config("reference needs one level per breakpoint and at least one breakpoint".into()));
                }
                (breakpoints_s, levels_ul_s)
            }
            ReferenceProfile::Triangle { breakpoints_s, levels_ul_s } => {
                if breakpoints_s.len() != 3 || levels_ul_s.len() != 2 {
                    return Err(Error::Config("triangle reference needs breakpoints [start, peak, end] and levels [low, high]".into()));
                }
                (breakpoints_s, levels_ul_s)
            }
        };
        if b.iter().chain(l).any(|v| !v.is_finite()) {
            return Err(Error::Config("reference breakpoints and levels must be finite".into()));
        }
        if b.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!("reference breakpoints must be non-decreasing: {b:?}")));
        }
        Ok(())
    }

    /// Value at time `t` in µl/s.
    pub fn value_ul_s(&self, t: f64) -> f64 {
        match self {
            ReferenceProfile::Step { breakpoints_s, levels_ul_s } => {
                let k = breakpoints_s.partition_point(|b| *b <= t);
                levels_ul_s[k.saturating_sub(1)]
            }
            ReferenceProfile::Ramp { breakpoints_s, levels_ul_s } => interpolate(breakpoints_s, levels_ul_s, t),
            ReferenceProfile::Triangle { breakpoints_s, levels_ul_s } => {
                let (lo, hi) = (levels_ul_s[0], levels_ul_s[1]);
                interpolate(breakpoints_s, &[lo, hi, lo], t)
            }
        }
    }

    /// Value at time `t` in m³/s.
    pub fn value(&self, t: f64) -> f64 {
        ul_s_to_si(self.value_ul_s(t))
    }
}

fn interpolate(b: &[f64], l: &[f64], t: f64) -> f64 {
    let k = b.partition_point(|x| *x <= t);
    if k == 0 {
        return l[0];
    }
    if k == b.len() {
        return l[b.len() - 1];
    }
    let (t0, t1) = (b[k - 1], b[k]);
    let w = (t - t0) / (t1 - t0);
    l[k - 1] + w * (l[k] - l[k - 1])
}

/// Replacements for the default actuator and flow limits. Absent fields
/// keep the defaults; `null` output bounds mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintOverrides {
    pub u_min_pa: Option<[f64; LINES]>,
    pub u_max_pa: Option<[f64; LINES]>,
    pub du_rate_pa_s: Option<[f64; LINES]>,
    pub y_min_ul_s: Option<[Option<f64>; LINES]>,
    pub y_max_ul_s: Option<[Option<f64>; LINES]>,
}

pub const DEFAULT_U_MIN: f64 = 0.0;
pub const DEFAULT_U_MAX: f64 = 150_000.0;
pub const DEFAULT_DU_RATE: f64 = 100_000.0;

/// Resolved limits in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub u_min: [f64; LINES],
    pub u_max: [f64; LINES],
    pub du_rate: [f64; LINES],
    pub y_min: [f64; LINES],
    pub y_max: [f64; LINES],
}

impl ConstraintOverrides {
    pub fn resolve(&self) -> Limits {
        let bound = |v: Option<[Option<f64>; LINES]>, default: f64, missing: f64| match v {
            None => [default; LINES],
            Some(a) => a.map(|x| x.map(ul_s_to_si).unwrap_or(missing)),
        };
        Limits {
            u_min: self.u_min_pa.unwrap_or([DEFAULT_U_MIN; LINES]),
            u_max: self.u_max_pa.unwrap_or([DEFAULT_U_MAX; LINES]),
            du_rate: self.du_rate_pa_s.unwrap_or([DEFAULT_DU_RATE; LINES]),
            y_min: bound(self.y_min_ul_s, 0.0, f64::NEG_INFINITY),
            y_max: bound(self.y_max_ul_s, f64::INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tuning {
    pub horizon: usize,
    pub alpha: f64,
    pub beta: f64,
    pub pi_gain_scale: f64,
    /// Feed future references over the horizon instead of holding the
    /// current one.
    pub reference_preview: bool,
    pub soft_output_constraints: bool,
    pub process_noise: ProcessNoisePreset,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            horizon: 10,
            alpha: 1e-7,
            beta: 1e-4,
            pi_gain_scale: 1.0,
            reference_preview: true,
            soft_output_constraints: false,
            process_noise: ProcessNoisePreset::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_period")]
    pub sample_period_s: f64,
    #[serde(default)]
    pub controller: ControllerKind,
    pub references: [ReferenceProfile; LINES],
    #[serde(default)]
    pub constraints: ConstraintOverrides,
    #[serde(default)]
    pub noise_std_ul_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub perturbations: Perturbations,
    #[serde(default)]
    pub regulator_preset: RegulatorPreset,
    #[serde(default)]
    pub plant: PlantKind,
    #[serde(default)]
    pub tuning: Tuning,
}

fn default_period() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.sample_period_s > 0.0 && self.sample_period_s.is_finite()) {
            return bad(format!("sample period must be positive, got {}", self.sample_period_s));
        }
        if self.duration_s < self.sample_period_s {
            return bad("duration is shorter than one sample period".into());
        }
        if !(self.noise_std_ul_s >= 0.0 && self.noise_std_ul_s.is_finite()) {
            return bad(format!("noise std must be non-negative, got {}", self.noise_std_ul_s));
        }
        for r in &self.references {
            r.validate()?;
        }
        self.perturbations.validate()?;
        let t = &self.tuning;
        if t.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if !(t.alpha > 0.0 && t.beta > 0.0 && t.pi_gain_scale > 0.0) || ![t.alpha, t.beta, t.pi_gain_scale].iter().all(|v| v.is_finite()) {
            return bad("alpha, beta and pi_gain_scale must be positive".into());
        }
        let l = self.constraints.resolve();
        for i in 0..LINES {
            if !(l.u_min[i] <= l.u_max[i] && l.u_min[i].is_finite() && l.u_max[i].is_finite()) {
                return bad(format!("line {}: invalid pressure bounds", i + 1));
            }
            if !(l.du_rate[i] > 0.0) {
                return bad(format!("line {}: rate bound must be positive", i + 1));
            }
            if l.y_min[i] > l.y_max[i] || l.y_min[i].is_nan() || l.y_max[i].is_nan() {
                return bad(format!("line {}: invalid flow bounds", i + 1));
            }
        }
        Ok(())
    }

    /// Number of control periods in the run.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.sample_period_s + 1e-9).floor() as usize
    }

    /// Reference vector at time `t` in m³/s.
    pub fn reference(&self, t: f64) -> [f64; LINES] {
        std::array::from_fn(|i| self.references[i].value(t))
    }

    pub fn noise_std(&self) -> f64 {
        ul_s_to_si(self.noise_std_ul_s)
    }
}
