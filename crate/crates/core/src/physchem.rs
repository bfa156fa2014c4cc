//! Lumped hydraulic and pneumatic element formulas.
//!
//! Hydraulic quantities follow the electrical analogy: resistance in
//! Pa·s/m³, inertia (inertance) in Pa·s²/m³ and compressibility
//! (capacitance) in m³/Pa.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Σ_{n odd} 1/n⁵ = (31/32)·ζ(5).
const ODD_ZETA5: f64 = 1.004_523_762_795_139_6;

/// Relative change below which the rectangular-duct series is considered converged.
const SERIES_REL_TOL: f64 = 1e-14;

/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fluid {
    /// kg/m³
    pub density: f64,
    /// Pa·s
    pub dynamic_viscosity: f64,
    /// Pa
    pub bulk_modulus: f64,
}

impl Fluid {
    /// 74/26 (by volume) water–glycerin mixture at room temperature.
    pub fn water_glycerin_74_26() -> Self {
        Self {
            density: 1062.0,
            dynamic_viscosity: 2.1e-3,
            bulk_modulus: 2.6e9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.dynamic_viscosity > 0.0 && self.bulk_modulus > 0.0) {
            return Err(Error::Domain(format!(
                "fluid properties must be strictly positive: {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for Fluid {
    fn default() -> Self {
        Self::water_glycerin_74_26()
    }
}

/// Straight channel with rectangular cross-section. `height <= width` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectChannelRepr", into = "RectChannelRepr")]
pub struct RectChannel {
    length: f64,
    height: f64,
    width: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RectChannelRepr {
    length: f64,
    height: f64,
    width: f64,
}

impl TryFrom<RectChannelRepr> for RectChannel {
    type Error = Error;
    fn try_from(r: RectChannelRepr) -> Result<Self> {
        RectChannel::new(r.length, r.height, r.width)
    }
}

impl From<RectChannel> for RectChannelRepr {
    fn from(c: RectChannel) -> Self {
        Self {
            length: c.length,
            height: c.height,
            width: c.width,
        }
    }
}

impl RectChannel {
    /// Dimensions are swapped if needed so that the stored height is the
    /// smaller side.
    pub fn new(length: f64, height: f64, width: f64) -> Result<Self> {
        if !(length > 0.0 && height > 0.0 && width > 0.0) || !(length * height * width).is_finite() {
            return Err(Error::Domain(format!(
                "rectangular channel needs positive finite dimensions, got l={length}, h={height}, w={width}"
            )));
        }
        let (height, width) = if height <= width { (height, width) } else { (width, height) };
        Ok(Self { length, height, width })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn cross_area(&self) -> f64 {
        self.height * self.width
    }
    pub fn volume(&self) -> f64 {
        self.length * self.cross_area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircChannelRepr", into = "CircChannelRepr")]
pub struct CircChannel {
    length: f64,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircChannelRepr {
    length: f64,
    radius: f64,
}

impl TryFrom<CircChannelRepr> for CircChannel {
    type Error = Error;
    fn try_from(r: CircChannelRepr) -> Result<Self> {
        CircChannel::new(r.length, r.radius)
    }
}

impl From<CircChannel> for CircChannelRepr {
    fn from(c: CircChannel) -> Self {
        Self {
            length: c.length,
            radius: c.radius,
        }
    }
}

impl CircChannel {
    pub fn new(length: f64, radius: f64) -> Result<Self> {
        if !(length > 0.0 && radius > 0.0) || !(length * radius).is_finite() {
            return Err(Error::Domain(format!(
                "circular channel needs positive finite dimensions, got l={length}, r={radius}"
            )));
        }
        Ok(Self { length, radius })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn cross_area(&self) -> f64 {
        PI * self.radius * self.radius
    }
    pub fn volume(&self) -> f64 {
        self.length * self.cross_area()
    }
}

/// Compressed-air supply path from a pressure regulator into a reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirPath {
    /// m²
    pub duct_area: f64,
    /// Gas volume above the liquid in the reservoir, m³ (held constant).
    pub reservoir_gas_volume: f64,
    /// J/(kg·K)
    pub gas_constant: f64,
    /// K
    pub temperature: f64,
    pub adiabatic_index: f64,
}

impl Default for AirPath {
    fn default() -> Self {
        Self {
            duct_area: 1e-6,
            reservoir_gas_volume: 10e-6,
            gas_constant: 287.14,
            temperature: 293.15,
            adiabatic_index: 1.4,
        }
    }
}

impl AirPath {
    pub fn validate(&self) -> Result<()> {
        let ok = self.duct_area > 0.0
            && self.reservoir_gas_volume > 0.0
            && self.gas_constant > 0.0
            && self.temperature > 0.0
            && self.adiabatic_index > 1.0;
        if !ok {
            return Err(Error::Domain(format!("invalid air path: {self:?}")));
        }
        Ok(())
    }

    /// Downstream/upstream pressure ratio at which the flow chokes.
    pub fn critical_ratio(&self) -> f64 {
        let g = self.adiabatic_index;
        (2.0 / (g + 1.0)).powf(g / (g - 1.0))
    }
}

/// Fluid inertia of a line, ρ·l/A.
pub fn line_inertia(fluid_density: f64, length: f64, cross_area: f64) -> Result<f64> {
    if !(cross_area > 0.0) {
        return Err(Error::Domain(format!("cross-sectional area must be positive, got {cross_area}")));
    }
    if !(length >= 0.0 && fluid_density >= 0.0) {
        return Err(Error::Domain(format!(
            "length and density must be non-negative, got l={length}, rho={fluid_density}"
        )));
    }
    Ok(fluid_density * length / cross_area)
}

/// Poiseuille resistance of a circular tube, 8μl/(πr⁴).
pub fn circular_resistance(viscosity: f64, channel: &CircChannel) -> Result<f64> {
    if !(viscosity >= 0.0) {
        return Err(Error::Domain(format!("viscosity must be non-negative, got {viscosity}")));
    }
    let r4 = channel.radius.powi(4);
    if r4 == 0.0 {
        return Err(Error::Domain("radius underflows to a singular resistance".into()));
    }
    Ok(viscosity * 8.0 * channel.length / (PI * r4))
}

/// Σ_{n odd} tanh(nπw/2h)/n⁵, summed as (31/32)ζ(5) minus a geometrically
/// convergent correction, truncated after at most `max_terms` corrections.
fn rect_series(aspect: f64, max_terms: usize) -> f64 {
    let mut correction = 0.0;
    for j in 0..max_terms {
        let n = (2 * j + 1) as f64;
        // 1 - tanh(x) = 2e^{-2x} / (1 + e^{-2x})
        let e = (-n * PI * aspect).exp();
        let term = 2.0 * e / (1.0 + e) / n.powi(5);
        correction += term;
        if term <= SERIES_REL_TOL * (ODD_ZETA5 - correction) {
            break;
        }
    }
    ODD_ZETA5 - correction
}

/// Hydraulic resistance of a rectangular channel using the classical
/// Fourier-series solution for laminar duct flow.
pub fn rectangular_resistance(viscosity: f64, channel: &RectChannel) -> Result<f64> {
    rectangular_resistance_truncated(viscosity, channel, SERIES_MAX_TERMS)
}

/// Same as [`rectangular_resistance`] with an explicit cap on the number of
/// series terms.
pub fn rectangular_resistance_truncated(
    viscosity: f64,
    channel: &RectChannel,
    max_terms: usize,
) -> Result<f64> {
    if !(viscosity >= 0.0) {
        return Err(Error::Domain(format!("viscosity must be non-negative, got {viscosity}")));
    }
    let (l, h, w) = (channel.length, channel.height, channel.width);
    let ratio = h / w;
    let series = rect_series(w / h, max_terms.max(1));
    let correction = 1.0 - 192.0 * ratio / PI.powi(5) * series;
    Ok(12.0 * viscosity * l / (h.powi(3) * w) / correction)
}

/// Compressibility of a fluid chamber, V/E.
pub fn compressibility(total_volume: f64, bulk_modulus: f64) -> Result<f64> {
    if !(bulk_modulus > 0.0) || !(total_volume >= 0.0) {
        return Err(Error::Domain(format!(
            "compressibility needs V >= 0 and E > 0, got V={total_volume}, E={bulk_modulus}"
        )));
    }
    Ok(total_volume / bulk_modulus)
}

/// Isentropic mass flow of air through the duct (kg/s), positive from
/// `upstream_p` to `downstream_p`. Pressures are absolute.
///
/// Below the critical pressure ratio the flow is held at its choked value;
/// when `downstream_p > upstream_p` the flow reverses with the same law.
pub fn isentropic_mass_flow(path: &AirPath, upstream_p: f64, downstream_p: f64) -> Result<f64> {
    if !(upstream_p > 0.0 && downstream_p > 0.0) {
        return Err(Error::Domain(format!(
            "absolute pressures must be positive, got up={upstream_p}, down={downstream_p}"
        )));
    }
    if downstream_p > upstream_p {
        return Ok(-forward_mass_flow(path, downstream_p, upstream_p));
    }
    Ok(forward_mass_flow(path, upstream_p, downstream_p))
}

fn forward_mass_flow(path: &AirPath, p_up: f64, p_down: f64) -> f64 {
    let g = path.adiabatic_index;
    let ratio = (p_down / p_up).max(path.critical_ratio());
    let bracket = 2.0 * g / (g - 1.0) * ratio.powf(2.0 / g) * (1.0 - ratio.powf((g - 1.0) / g));
    path.duct_area * p_up / (path.gas_constant * path.temperature).sqrt() * bracket.max(0.0).sqrt()
}
