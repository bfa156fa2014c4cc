//! Unit conversions between the SI internals and the µl/s used at the
//! configuration and reporting boundary.

/// One microlitre per second in m³/s.
pub const UL_PER_S: f64 = 1e-9;

/// Ambient pressure used to convert relative pressures to absolute ones.
pub const STANDARD_ATMOSPHERE_PA: f64 = 101_325.0;

#[inline]
pub fn ul_s_to_si(q: f64) -> f64 {
    q * UL_PER_S
}

#[inline]
pub fn si_to_ul_s(q: f64) -> f64 {
    q / UL_PER_S
}
