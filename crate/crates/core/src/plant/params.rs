//! Physical parameter set of the rig and the lumped coefficients derived
//! from it.

use serde::{Deserialize, Serialize};

use crate::physchem::{
    circular_resistance, compressibility, line_inertia, rectangular_resistance, AirPath, CircChannel, Fluid,
    RectChannel,
};
use crate::units::STANDARD_ATMOSPHERE_PA;
use crate::{Error, Result, LINES};

/// Settling-time factor t_s/τ (2 % band) of a double real pole.
const DOUBLE_POLE_SETTLING: f64 = 5.833_921_701_917_49;
/// Settling-time factor t_s/τ (2 % band) of a triple real pole.
const TRIPLE_POLE_SETTLING: f64 = 7.516_603_875_609_483;

/// Regulator model order per line.
pub const REGULATOR_ORDERS: [usize; LINES] = [3, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipChannel {
    pub channel: RectChannel,
    /// m³
    pub volume: f64,
}

impl ChipChannel {
    pub fn from_geometry(channel: RectChannel) -> Self {
        Self {
            volume: channel.volume(),
            channel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidLine {
    pub tube: CircChannel,
    /// m³
    pub volume: f64,
}

impl FluidLine {
    pub fn from_geometry(tube: CircChannel) -> Self {
        Self {
            volume: tube.volume(),
            tube,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flowmeter {
    /// Pa·s/m³
    pub resistance: f64,
    /// Pa·s²/m³
    pub inertia: f64,
    /// m³
    pub volume: f64,
    /// First-order lag of the reading, s. Zero means an ideal sensor.
    pub lag_time_constant: f64,
}

/// Regulator dynamics `u = P + c1·P' + c2·P'' (+ c3·P''')`: third order on
/// lines 1 and 3, second order on line 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegulatorPreset {
    #[default]
    Nominal,
    /// Line 1 gets a lightly damped complex pole pair.
    OscillatoryLine1,
}

impl RegulatorCoeffs {
    /// Line 2 critically damped with 0.3 s settling; lines 1 and 3 a triple
    /// real pole with 0.5 s settling.
    pub fn nominal() -> Self {
        let (a1, a2, a3) = triple_pole(0.5 / TRIPLE_POLE_SETTLING);
        let tau2 = 0.3 / DOUBLE_POLE_SETTLING;
        Self {
            a1,
            a2,
            a3,
            b1: 2.0 * tau2,
            b2: tau2 * tau2,
            c1: a1,
            c2: a2,
            c3: a3,
        }
    }

    /// Nominal lines 2 and 3; line 1 is a 40 ms real pole times a 3 Hz pair
    /// with damping ratio 0.15.
    pub fn oscillatory_line1() -> Self {
        let tau = 0.04;
        let wn = 2.0 * std::f64::consts::PI * 3.0;
        let zeta = 0.15;
        let (q1, q2) = (2.0 * zeta / wn, 1.0 / (wn * wn));
        Self {
            a1: tau + q1,
            a2: tau * q1 + q2,
            a3: tau * q2,
            ..Self::nominal()
        }
    }

    pub fn preset(p: RegulatorPreset) -> Self {
        match p {
            RegulatorPreset::Nominal => Self::nominal(),
            RegulatorPreset::OscillatoryLine1 => Self::oscillatory_line1(),
        }
    }

    /// Order of the regulator on line `i` (0-based).
    pub fn order(i: usize) -> usize {
        REGULATOR_ORDERS[i]
    }

    /// Coefficients `[c1, c2, c3]` of line `i`; unused entries are zero.
    pub fn line(&self, i: usize) -> [f64; 3] {
        match i {
            0 => [self.a1, self.a2, self.a3],
            1 => [self.b1, self.b2, 0.0],
            2 => [self.c1, self.c2, self.c3],
            _ => panic!("line index {i} out of range"),
        }
    }

    /// Routh–Hurwitz test on every regulator's characteristic polynomial.
    pub fn is_hurwitz(&self) -> bool {
        let cubic = |c1: f64, c2: f64, c3: f64| c1 > 0.0 && c2 > 0.0 && c3 > 0.0 && c2 * c1 > c3;
        cubic(self.a1, self.a2, self.a3) && self.b1 > 0.0 && self.b2 > 0.0 && cubic(self.c1, self.c2, self.c3)
    }
}

fn triple_pole(tau: f64) -> (f64, f64, f64) {
    (3.0 * tau, 3.0 * tau * tau, tau * tau * tau)
}

impl Default for RegulatorCoeffs {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Geometry, fluid, air-path and regulator parameters of the whole rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub fluid: Fluid,
    pub chip_inlets: [ChipChannel; LINES],
    pub chip_outlet: ChipChannel,
    pub lines: [FluidLine; LINES],
    pub flowmeters: [Flowmeter; LINES],
    pub air: AirPath,
    pub regulators: RegulatorCoeffs,
    /// Outlet reservoir pressure, relative (Pa).
    pub atmospheric_pressure: f64,
    /// Absolute ambient pressure added to relative pressures in the air path (Pa).
    pub ambient_pressure: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl PhysParams {
    /// Reference geometry: 20 mm × 100 µm × 100 µm inlet channels, a 30 mm ×
    /// 200 µm × 200 µm outlet, 0.5 m lines of 0.25 mm radius and flow meters
    /// equivalent to 50 mm of 0.2 mm-radius tube with 5 µl of volume.
    pub fn desk_scale() -> Self {
        let fluid = Fluid::water_glycerin_74_26();
        let inlet = ChipChannel::from_geometry(RectChannel::new(20e-3, 100e-6, 100e-6).expect("valid"));
        let outlet = ChipChannel::from_geometry(RectChannel::new(30e-3, 200e-6, 200e-6).expect("valid"));
        let line = FluidLine::from_geometry(CircChannel::new(0.5, 0.25e-3).expect("valid"));
        let fm_tube = CircChannel::new(50e-3, 0.2e-3).expect("valid");
        let fm = Flowmeter {
            resistance: circular_resistance(fluid.dynamic_viscosity, &fm_tube).expect("valid"),
            inertia: line_inertia(fluid.density, fm_tube.length(), fm_tube.cross_area()).expect("valid"),
            volume: 5e-9,
            lag_time_constant: 0.05,
        };
        Self {
            fluid,
            chip_inlets: [inlet; LINES],
            chip_outlet: outlet,
            lines: [line; LINES],
            flowmeters: [fm; LINES],
            air: AirPath::default(),
            regulators: RegulatorCoeffs::nominal(),
            atmospheric_pressure: 0.0,
            ambient_pressure: STANDARD_ATMOSPHERE_PA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        self.air.validate()?;
        let positive = self.chip_inlets.iter().all(|c| c.volume > 0.0)
            && self.chip_outlet.volume > 0.0
            && self.lines.iter().all(|l| l.volume > 0.0)
            && self
                .flowmeters
                .iter()
                .all(|f| f.resistance >= 0.0 && f.inertia >= 0.0 && f.volume >= 0.0 && f.lag_time_constant >= 0.0);
        if !positive {
            return Err(Error::Config("volumes must be positive and flow-meter fields non-negative".into()));
        }
        if !self.regulators.is_hurwitz() {
            return Err(Error::Config(format!("regulator polynomials are not Hurwitz: {:?}", self.regulators)));
        }
        if !(self.ambient_pressure > 0.0) {
            return Err(Error::Config("ambient pressure must be positive".into()));
        }
        Ok(())
    }

    /// Lumped R/I/C coefficients.
    pub fn lumped(&self) -> Result<Lumped> {
        self.validate()?;
        let f = &self.fluid;
        let mu = f.dynamic_viscosity;
        let mut chip_resistance = [0.0; LINES];
        let mut chip_inertia = [0.0; LINES];
        let mut line_resistance = [0.0; LINES];
        let mut line_inertia_ = [0.0; LINES];
        let mut line_compressibility = [0.0; LINES];
        let mut sensor_lag = [0.0; LINES];
        for i in 0..LINES {
            let ch = &self.chip_inlets[i].channel;
            chip_resistance[i] = rectangular_resistance(mu, ch)?;
            chip_inertia[i] = line_inertia(f.density, ch.length(), ch.cross_area())?;
            let tube = &self.lines[i].tube;
            let fm = &self.flowmeters[i];
            line_resistance[i] = circular_resistance(mu, tube)? + fm.resistance;
            line_inertia_[i] = line_inertia(f.density, tube.length(), tube.cross_area())? + fm.inertia;
            // chip-channel volume is neglected next to line + flow meter
            line_compressibility[i] = compressibility(self.lines[i].volume + fm.volume, f.bulk_modulus)?;
            sensor_lag[i] = fm.lag_time_constant;
        }
        let out = &self.chip_outlet.channel;
        let chip_volume: f64 = self.chip_inlets.iter().map(|c| c.volume).sum::<f64>() + self.chip_outlet.volume;
        Ok(Lumped {
            chip_resistance,
            chip_inertia,
            outlet_resistance: rectangular_resistance(mu, out)?,
            outlet_inertia: line_inertia(f.density, out.length(), out.cross_area())?,
            chip_compressibility: compressibility(chip_volume, f.bulk_modulus)?,
            line_resistance,
            line_inertia: line_inertia_,
            line_compressibility,
            sensor_lag,
            air: self.air,
            regulators: self.regulators,
            atmospheric_pressure: self.atmospheric_pressure,
            ambient_pressure: self.ambient_pressure,
        })
    }
}

/// Lumped element values of the rig. Line values include the flow meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lumped {
    pub chip_resistance: [f64; LINES],
    pub chip_inertia: [f64; LINES],
    pub outlet_resistance: f64,
    pub outlet_inertia: f64,
    pub chip_compressibility: f64,
    pub line_resistance: [f64; LINES],
    pub line_inertia: [f64; LINES],
    pub line_compressibility: [f64; LINES],
    pub sensor_lag: [f64; LINES],
    pub air: AirPath,
    pub regulators: RegulatorCoeffs,
    pub atmospheric_pressure: f64,
    pub ambient_pressure: f64,
}

/// Multiplicative perturbations of the plant's lumped resistances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbations {
    pub line_resistance: [f64; LINES],
    pub chip_resistance: [f64; LINES],
    pub outlet_resistance: f64,
}

impl Default for Perturbations {
    fn default() -> Self {
        Self {
            line_resistance: [1.0; LINES],
            chip_resistance: [1.0; LINES],
            outlet_resistance: 1.0,
        }
    }
}

impl Perturbations {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .line_resistance
            .iter()
            .chain(&self.chip_resistance)
            .chain(std::iter::once(&self.outlet_resistance));
        for &m in all {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("perturbation multipliers must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

impl Lumped {
    pub fn perturbed(&self, p: &Perturbations) -> Self {
        let mut out = self.clone();
        for i in 0..LINES {
            out.line_resistance[i] *= p.line_resistance[i];
            out.chip_resistance[i] *= p.chip_resistance[i];
        }
        out.outlet_resistance *= p.outlet_resistance;
        out
    }

    /// Series resistance of line + chip channel for each inlet.
    pub fn total_resistance(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.line_resistance[i] + self.chip_resistance[i])
    }

    pub fn total_inertia(&self) -> [f64; LINES] {
        std::array::from_fn(|i| self.line_inertia[i] + self.chip_inertia[i])
    }
}
