//! Conversions between laboratory units and the internal Γ-normalized units.
//!
//! Frequencies quoted in MHz are ordinary frequencies: a value `x` MHz stands
//! for the angular rate 2π·x MHz, the way linewidths and Rabi frequencies are
//! usually quoted ("2π×1.60 MHz").

use std::f64::consts::PI;

/// Natural linewidth of the ⁸⁵Rb D1 line, Γ/2π in MHz.
pub const RB85_D1_LINEWIDTH_MHZ: f64 = 5.75;

/// Γ in rad/s for a linewidth given as Γ/2π in MHz.
pub fn gamma_rad_per_s(linewidth_mhz: f64) -> f64 {
    2.0 * PI * linewidth_mhz * 1e6
}

/// Converts Γ/2π-style megahertz into units of Γ.
pub fn mhz_to_gamma(freq_mhz: f64, linewidth_mhz: f64) -> f64 {
    freq_mhz / linewidth_mhz
}

pub fn gamma_to_mhz(rate: f64, linewidth_mhz: f64) -> f64 {
    rate * linewidth_mhz
}

/// Converts nanoseconds into units of 1/Γ.
pub fn ns_to_gamma_time(t_ns: f64, linewidth_mhz: f64) -> f64 {
    t_ns * 1e-9 * gamma_rad_per_s(linewidth_mhz)
}

pub fn gamma_time_to_ns(t: f64, linewidth_mhz: f64) -> f64 {
    t / gamma_rad_per_s(linewidth_mhz) * 1e9
}
