//! Physical constants and unit conversions.
//!
//! Everything inside the crate is SI, with energies and detunings carried as
//! angular frequencies (rad/s). Spectroscopic inputs (cm⁻¹, MHz, Debye) are
//! converted once at the boundary using the helpers below.

use std::f64::consts::PI;

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass unit, kg (CODATA 2018).
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// One Debye in C·m.
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;

/// Wavenumber (cm⁻¹) to angular frequency (rad/s).
#[inline]
pub fn wavenumber_to_angular(cm_inv: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * 100.0 * cm_inv
}

/// Angular frequency (rad/s) to wavenumber (cm⁻¹).
#[inline]
pub fn angular_to_wavenumber(omega: f64) -> f64 {
    omega / (2.0 * PI * SPEED_OF_LIGHT * 100.0)
}

/// Cyclic frequency in MHz to angular frequency (rad/s).
#[inline]
pub fn mhz_to_angular(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

/// Angular frequency (rad/s) to cyclic frequency in MHz.
#[inline]
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// Wavenumber (cm⁻¹) to cyclic frequency in MHz.
#[inline]
pub fn wavenumber_to_mhz(cm_inv: f64) -> f64 {
    angular_to_mhz(wavenumber_to_angular(cm_inv))
}

/// Angular frequency (rad/s) to energy in joules.
#[inline]
pub fn angular_to_joule(omega: f64) -> f64 {
    HBAR * omega
}

/// Optical angular frequency for a vacuum wavelength in metres.
#[inline]
pub fn wavelength_to_angular(lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_round_trip() {
        let w = wavenumber_to_angular(300.0);
        assert!((angular_to_wavenumber(w) - 300.0).abs() < 1e-12);
    }

    #[test]
    fn three_thousandths_wavenumber_is_ninety_mhz() {
        let mhz = wavenumber_to_mhz(0.003);
        assert!((mhz - 89.937_737_4).abs() < 1e-6, "{mhz}");
    }

    #[test]
    fn debye_value() {
        assert!((DEBYE - 3.335_640_95e-30).abs() < 1e-38);
    }
}
