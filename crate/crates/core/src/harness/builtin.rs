//! Named scenarios shipped with the tool.

use super::scenario::{ConstraintOverrides, ControllerKind, PlantKind, ReferenceProfile, Scenario, Tuning};
use crate::plant::{Perturbations, RegulatorPreset};
use crate::{Error, Result};

pub const BUILTIN_NAMES: [&str; 7] = [
    "steps-distinct",
    "steps-equal",
    "triangle-capped",
    "pressure-cap-9500",
    "rate-cap-2000",
    "flow-bounds",
    "mismatch-20pct",
];

/// Measurement noise of the flow meters in µl/s (variance 1e-20 m⁶/s²).
pub const METER_NOISE_UL_S: f64 = 0.1;

fn base(name: &str, duration_s: f64, references: [ReferenceProfile; 3]) -> Scenario {
    Scenario {
        name: name.to_string(),
        duration_s,
        sample_period_s: 0.1,
        controller: ControllerKind::Mpc,
        references,
        constraints: ConstraintOverrides::default(),
        noise_std_ul_s: 0.0,
        rng_seed: 1,
        perturbations: Perturbations::default(),
        regulator_preset: RegulatorPreset::Nominal,
        plant: PlantKind::Full,
        tuning: Tuning::default(),
    }
}

const STEP_TIMES: [f64; 4] = [0.0, 1.0, 21.0, 41.0];

fn steps(levels: [[f64; 3]; 3]) -> [ReferenceProfile; 3] {
    std::array::from_fn(|i| ReferenceProfile::step(&STEP_TIMES, &[0.0, levels[0][i], levels[1][i], levels[2][i]]))
}

/// Three step changes, each line at a different level, levels rotating
/// between lines.
pub fn steps_distinct() -> Scenario {
    base("steps-distinct", 60.0, steps([[1.0, 2.0, 3.0], [3.0, 1.0, 2.0], [2.0, 3.0, 1.0]]))
}

/// Same steps applied to all three lines.
pub fn steps_equal() -> Scenario {
    base("steps-equal", 60.0, steps([[1.5; 3], [3.0; 3], [1.0; 3]]))
}

/// Rising and falling ramp on all lines with the pressure capped at 60 kPa,
/// high enough in flow that the cap is reached near the peak.
pub fn triangle_capped() -> Scenario {
    let mut s = base("triangle-capped", 45.0, std::array::from_fn(|_| ReferenceProfile::triangle(1.0, 21.0, 41.0, 0.0, 6.0)));
    s.constraints.u_max_pa = Some([60_000.0; 3]);
    s
}

/// Pressure capped at 9.5 kPa: a level reachable under the cap, one that
/// is not, then a return below it.
pub fn pressure_cap_9500() -> Scenario {
    let mut s = base(
        "pressure-cap-9500",
        30.0,
        std::array::from_fn(|_| ReferenceProfile::step(&[0.0, 1.0, 11.0, 21.0], &[0.0, 0.5, 0.8, 0.3])),
    );
    s.constraints.u_max_pa = Some([9_500.0; 3]);
    s
}

/// Pressure increments limited to 2 kPa/s (200 Pa per period): steps on
/// lines 1 and 3, a ramp slow enough to stay under the limit on line 2.
pub fn rate_cap_2000() -> Scenario {
    let refs = [
        ReferenceProfile::step(&[0.0, 1.0, 21.0], &[0.0, 1.0, 2.0]),
        ReferenceProfile::ramp(&[1.0, 21.0], &[0.0, 2.0]),
        ReferenceProfile::step(&[0.0, 1.0, 21.0], &[0.0, 2.0, 1.0]),
    ];
    let mut s = base("rate-cap-2000", 40.0, refs);
    s.constraints.du_rate_pa_s = Some([2_000.0; 3]);
    s
}

/// Common reference above the flow bounds of lines 1 and 2.
pub fn flow_bounds() -> Scenario {
    let mut s = base("flow-bounds", 15.0, std::array::from_fn(|_| ReferenceProfile::step(&[0.0, 1.0], &[0.0, 2.0])));
    s.constraints.y_max_ul_s = Some([Some(1.0), Some(1.5), None]);
    s
}

/// `steps-distinct` against a plant whose resistances are 20% off the
/// controller's model.
pub fn mismatch_20pct() -> Scenario {
    let mut s = steps_distinct();
    s.name = "mismatch-20pct".into();
    s.perturbations = Perturbations {
        line_resistance: [1.2, 0.8, 1.2],
        chip_resistance: [0.8, 1.2, 1.2],
        outlet_resistance: 0.8,
    };
    s
}

pub fn builtin(name: &str) -> Result<Scenario> {
    Ok(match name {
        "steps-distinct" => steps_distinct(),
        "steps-equal" => steps_equal(),
        "triangle-capped" => triangle_capped(),
        "pressure-cap-9500" => pressure_cap_9500(),
        "rate-cap-2000" => rate_cap_2000(),
        "flow-bounds" => flow_bounds(),
        "mismatch-20pct" => mismatch_20pct(),
        other => {
            return Err(Error::Config(format!(
                "unknown scenario '{other}'; built-ins are {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    })
}

/// Built-in name or path to a JSON scenario file.
pub fn load(name_or_path: &str) -> Result<Scenario> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin(name_or_path);
    }
    let path = std::path::Path::new(name_or_path);
    if !path.exists() {
        return builtin(name_or_path);
    }
    Scenario::from_json(&std::fs::read_to_string(path)?)
}
