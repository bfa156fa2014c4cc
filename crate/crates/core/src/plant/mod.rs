//! Full nonlinear plant: chip, fluid lines with flow meters, reservoirs fed
//! through compressible air ducts, and the pressure regulators.
//!
//! Pressures are relative to atmosphere except inside the air-duct flow law,
//! which works on absolute pressures (`ambient_pressure` is added).

mod params;
mod sensor;

pub use params::{
    ChipChannel, FluidLine, Flowmeter, Lumped, Perturbations, PhysParams, RegulatorCoeffs, RegulatorPreset,
    REGULATOR_ORDERS,
};
pub use sensor::{measure, Measurement, Sensor};

use serde::{Deserialize, Serialize};

use crate::ode::Rk4;
use crate::physchem::isentropic_mass_flow;
use crate::{Error, Result, LINES};

/// Number of physical state variables.
pub const PHYSICAL_DIM: usize = 22;
/// Physical states plus the three flow-meter lag states.
pub const STATE_DIM: usize = PHYSICAL_DIM + LINES;

/// Index layout of the flat state vector.
pub mod idx {
    pub const Q_CHIP: usize = 0;
    pub const Q_OUT: usize = 3;
    pub const P_M: usize = 4;
    pub const Q_LINE: usize = 5;
    pub const P_CHIP: usize = 8;
    pub const P_RES: usize = 11;
    /// First state (the pressure itself) of each regulator chain.
    pub const REG: [usize; 3] = [14, 17, 19];
    pub const Q_MEAS: usize = 22;
}

/// Upper bound on the integration substep. The chip junction node (tiny
/// liquid volume between channel inertances) rings at ≈6e4 rad/s, which
/// bounds the RK4 step for stability.
pub const DEFAULT_MAX_SUBSTEP: f64 = 2.5e-5;

/// Plant state: chip flows, outlet flow, junction pressure, line flows,
/// chip-inlet pressures, reservoir pressures, regulator chains, then the
/// sensor lag states. See [`idx`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState(pub [f64; STATE_DIM]);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantStateRepr {
    q_chip: [f64; 3],
    q_out: f64,
    p_m: f64,
    q_line: [f64; 3],
    p_chip: [f64; 3],
    p_res: [f64; 3],
    reg1: [f64; 3],
    reg2: [f64; 2],
    reg3: [f64; 3],
    q_meas: [f64; 3],
}

impl Serialize for PlantState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = &self.0;
        let a3 = |i: usize| [x[i], x[i + 1], x[i + 2]];
        PlantStateRepr {
            q_chip: a3(idx::Q_CHIP),
            q_out: x[idx::Q_OUT],
            p_m: x[idx::P_M],
            q_line: a3(idx::Q_LINE),
            p_chip: a3(idx::P_CHIP),
            p_res: a3(idx::P_RES),
            reg1: a3(idx::REG[0]),
            reg2: [x[idx::REG[1]], x[idx::REG[1] + 1]],
            reg3: a3(idx::REG[2]),
            q_meas: a3(idx::Q_MEAS),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlantState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PlantStateRepr::deserialize(d)?;
        let mut x = [0.0; STATE_DIM];
        let mut put = |at: usize, v: &[f64]| x[at..at + v.len()].copy_from_slice(v);
        put(idx::Q_CHIP, &r.q_chip);
        put(idx::Q_OUT, &[r.q_out, r.p_m]);
        put(idx::Q_LINE, &r.q_line);
        put(idx::P_CHIP, &r.p_chip);
        put(idx::P_RES, &r.p_res);
        put(idx::REG[0], &r.reg1);
        put(idx::REG[1], &r.reg2);
        put(idx::REG[2], &r.reg3);
        put(idx::Q_MEAS, &r.q_meas);
        Ok(PlantState(x))
    }
}

impl Default for PlantState {
    fn default() -> Self {
        Self::rest()
    }
}

impl PlantState {
    /// Everything at zero relative pressure and zero flow.
    pub fn rest() -> Self {
        Self([0.0; STATE_DIM])
    }

    pub fn chip_flows(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.0[idx::Q_CHIP + i])
    }

    pub fn line_flows(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.0[idx::Q_LINE + i])
    }

    pub fn measured_flows(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.0[idx::Q_MEAS + i])
    }

    pub fn regulator_pressures(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.0[idx::REG[i]])
    }

    pub fn reservoir_pressures(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.0[idx::P_RES + i])
    }

    pub fn junction_pressure(&self) -> f64 {
        self.0[idx::P_M]
    }

    pub fn outlet_flow(&self) -> f64 {
        self.0[idx::Q_OUT]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Equilibrium for constant regulator setpoints.
    pub fn steady(params: &Lumped, setpoints: [f64; LINES]) -> Self {
        let ss = SteadyState::solve(params, setpoints);
        let mut x = [0.0; STATE_DIM];
        x[idx::Q_OUT] = ss.outlet_flow;
        x[idx::P_M] = ss.junction_pressure;
        for i in 0..LINES {
            x[idx::Q_CHIP + i] = ss.flows[i];
            x[idx::Q_LINE + i] = ss.flows[i];
            x[idx::Q_MEAS + i] = ss.flows[i];
            x[idx::P_CHIP + i] = ss.junction_pressure + params.chip_resistance[i] * ss.flows[i];
            x[idx::P_RES + i] = setpoints[i];
            x[idx::REG[i]] = setpoints[i];
        }
        Self(x)
    }
}

/// DC solution of the resistor network seen at steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub flows: [f64; LINES],
    pub outlet_flow: f64,
    pub junction_pressure: f64,
}

impl SteadyState {
    /// Q_i = (P_i − P_M)/R_i, Q_out = (P_M − P_atm)/R_out, ΣQ_i = Q_out.
    pub fn solve(params: &Lumped, setpoints: [f64; LINES]) -> Self {
        let r = params.total_resistance();
        let p_atm = params.atmospheric_pressure;
        let num: f64 = (0..LINES).map(|i| setpoints[i] / r[i]).sum::<f64>() + p_atm / params.outlet_resistance;
        let den: f64 = r.iter().map(|ri| 1.0 / ri).sum::<f64>() + 1.0 / params.outlet_resistance;
        let p_m = num / den;
        let flows = std::array::from_fn(|i| (setpoints[i] - p_m) / r[i]);
        Self {
            flows,
            outlet_flow: (p_m - p_atm) / params.outlet_resistance,
            junction_pressure: p_m,
        }
    }
}

/// Right-hand side of the plant ODE, written into `dx`.
pub fn derivatives_into(x: &[f64], inputs: &[f64; LINES], p: &Lumped, dx: &mut [f64]) -> Result<()> {
    let p_m = x[idx::P_M];
    let mut inflow = 0.0;
    for i in 0..LINES {
        let q_chip = x[idx::Q_CHIP + i];
        let q_line = x[idx::Q_LINE + i];
        let p_chip = x[idx::P_CHIP + i];
        let p_res = x[idx::P_RES + i];
        inflow += q_chip;

        dx[idx::Q_CHIP + i] = (p_chip - p_m - p.chip_resistance[i] * q_chip) / p.chip_inertia[i];
        dx[idx::Q_LINE + i] = (p_res - p_chip - p.line_resistance[i] * q_line) / p.line_inertia[i];
        dx[idx::P_CHIP + i] = (q_line - q_chip) / p.line_compressibility[i];

        let reg = idx::REG[i];
        let p_reg = x[reg];
        let m_dot = isentropic_mass_flow(&p.air, p_reg + p.ambient_pressure, p_res + p.ambient_pressure)?;
        dx[idx::P_RES + i] = m_dot * p.air.gas_constant * p.air.temperature / p.air.reservoir_gas_volume;

        // u = P + c1 P' + ... + cn P^(n), as a chain of integrators
        let c = p.regulators.line(i);
        let n = REGULATOR_ORDERS[i];
        for k in 0..n - 1 {
            dx[reg + k] = x[reg + k + 1];
        }
        let mut acc = inputs[i] - p_reg;
        for k in 0..n - 1 {
            acc -= c[k] * x[reg + k + 1];
        }
        dx[reg + n - 1] = acc / c[n - 1];

        let lag = p.sensor_lag[i];
        let q_meas = x[idx::Q_MEAS + i];
        dx[idx::Q_MEAS + i] = if lag > 0.0 { (q_line - q_meas) / lag } else { 0.0 };
    }
    let q_out = x[idx::Q_OUT];
    dx[idx::Q_OUT] = (p_m - p.atmospheric_pressure - p.outlet_resistance * q_out) / p.outlet_inertia;
    dx[idx::P_M] = (inflow - q_out) / p.chip_compressibility;
    Ok(())
}

/// Time derivative of the plant state for the given regulator setpoints.
pub fn derivatives(state: &PlantState, inputs: &[f64; LINES], params: &Lumped) -> Result<[f64; STATE_DIM]> {
    let mut dx = [0.0; STATE_DIM];
    derivatives_into(&state.0, inputs, params, &mut dx).map_err(|e| fault(0.0, &state.0, e.to_string()))?;
    if let Some(k) = dx.iter().position(|v| !v.is_finite()) {
        return Err(fault(0.0, &state.0, format!("non-finite derivative in component {k}")));
    }
    Ok(dx)
}

fn fault(time: f64, x: &[f64], reason: String) -> Error {
    Error::IntegrationFault {
        time,
        reason,
        snapshot: x.to_vec(),
    }
}

/// One RK4 step of length `dt` from `state`.
pub fn step(state: &PlantState, inputs: &[f64; LINES], dt: f64, params: &Lumped) -> Result<PlantState> {
    let mut rk = Rk4::new(STATE_DIM);
    let mut x = state.0;
    rk_step(&mut rk, params, inputs, 0.0, &mut x, dt)?;
    Ok(PlantState(x))
}

fn rk_step(rk: &mut Rk4, params: &Lumped, inputs: &[f64; LINES], t: f64, x: &mut [f64; STATE_DIM], h: f64) -> Result<()> {
    let start = *x;
    rk.step(|_t, s, d| derivatives_into(s, inputs, params, d), t, x, h)
        .map_err(|e| fault(t, &start, e.to_string()))?;
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(fault(t, &start, format!("state component {k} became non-finite")));
    }
    Ok(())
}

/// Continuous-time plant integrated with fixed RK4 substeps.
#[derive(Debug, Clone)]
pub struct Plant {
    params: Lumped,
    state: PlantState,
    time: f64,
    max_substep: f64,
    rk: Rk4,
}

impl Plant {
    pub fn new(params: Lumped, state: PlantState) -> Self {
        Self {
            params,
            state,
            time: 0.0,
            max_substep: DEFAULT_MAX_SUBSTEP,
            rk: Rk4::new(STATE_DIM),
        }
    }

    pub fn with_max_substep(mut self, h: f64) -> Self {
        assert!(h > 0.0, "substep must be positive");
        self.max_substep = h;
        self
    }

    pub fn params(&self) -> &Lumped {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Hold `inputs` for `dt` seconds. On a fault the state is left at the
    /// start of the failing substep.
    pub fn advance(&mut self, inputs: &[f64; LINES], dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("step length must be positive, got {dt}")));
        }
        if inputs.iter().any(|u| !u.is_finite()) {
            return Err(fault(self.time, &self.state.0, format!("non-finite setpoints {inputs:?}")));
        }
        let n = (dt / self.max_substep).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        let t0 = self.time;
        for k in 0..n {
            let t = t0 + k as f64 * h;
            rk_step(&mut self.rk, &self.params, inputs, t, &mut self.state.0, h)?;
        }
        self.time = t0 + dt;
        Ok(())
    }
}
