//! Laser beams and the beamline geometry that maps them onto a moving molecule.
//!
//! Spatial convention: the field *amplitude* falls off as `exp(−(X−X_c)²/w₀²)`,
//! so the intensity goes as `exp(−2(X−X_c)²/w₀²)`. Temporal envelopes are
//! `exp(−(t−t_c)²/(2σ_t²))` in amplitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{EPSILON_0, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Probe,
    Control,
}

/// One laser beam as seen in the molecule frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub role: FieldRole,
    /// W
    pub power: f64,
    /// 1/e amplitude radius w₀, m
    pub waist: f64,
    /// m
    pub wavelength: f64,
    /// transverse focus offset, m
    pub center_x: f64,
    /// time at which the molecule crosses the beam centre, s
    pub center_t: f64,
    /// temporal half-width (amplitude standard deviation), s
    pub sigma_t: f64,
    /// one-photon detuning, rad/s
    pub detuning: f64,
}

impl FieldProfile {
    pub fn validate(&self) -> Result<()> {
        let name = match self.role {
            FieldRole::Probe => "probe",
            FieldRole::Control => "control",
        };
        if !(self.power >= 0.0) {
            return Err(Error::Config(format!("[{name}] power must be >= 0")));
        }
        if !(self.waist > 0.0) {
            return Err(Error::Config(format!("[{name}] waist must be > 0")));
        }
        if !(self.sigma_t > 0.0) {
            return Err(Error::Config(format!("[{name}] sigma_t must be > 0")));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Config(format!("[{name}] wavelength must be > 0")));
        }
        Ok(())
    }

    /// ∂(envelope)/∂X divided by the envelope.
    pub fn log_envelope_slope(&self, x: f64) -> f64 {
        -2.0 * (x - self.center_x) / (self.waist * self.waist)
    }
}

/// Molecular-beam / laser crossing geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// angle between laser and molecular beam, rad
    pub crossing_angle: f64,
    /// m/s
    pub longitudinal_velocity: f64,
    /// focusing lens focal length, m
    pub focal_length: f64,
    /// clear aperture diameter of the focusing optic, m
    pub aperture_diameter: f64,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        BeamGeometry {
            crossing_angle: 1f64.to_radians(),
            longitudinal_velocity: 500.0,
            focal_length: 0.10,
            aperture_diameter: 6.3e-3,
        }
    }
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.crossing_angle > 0.0 && self.crossing_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(
                "[geometry] angle must lie in (0, 90) degrees".into(),
            ));
        }
        if !(self.longitudinal_velocity > 0.0) {
            return Err(Error::Config(
                "[geometry] longitudinal velocity must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Temporal half-width σ_t of a beam of the given waist as seen by a
    /// molecule moving at the longitudinal velocity.
    pub fn crossing_sigma_t(&self, waist: f64) -> Result<f64> {
        Ok(interaction_length(self, waist)?
            / (std::f64::consts::SQRT_2 * self.longitudinal_velocity))
    }
}

/// Electric-field amplitude at the focus, V/m.
///
/// `I₀ = 2P/(πw₀²)` and `ε = √(2I₀/(cε₀))`.
pub fn peak_amplitude(field: &FieldProfile) -> f64 {
    let i0 = peak_intensity(field.power, field.waist);
    (2.0 * i0 / (SPEED_OF_LIGHT * EPSILON_0)).sqrt()
}

/// Peak intensity of a Gaussian beam, W/m².
pub fn peak_intensity(power: f64, waist: f64) -> f64 {
    2.0 * power / (std::f64::consts::PI * waist * waist)
}

/// Dimensionless space-time envelope, in `[0, 1]`.
pub fn envelope(field: &FieldProfile, x: f64, t: f64) -> f64 {
    let dx = (x - field.center_x) / field.waist;
    let dt = (t - field.center_t) / field.sigma_t;
    (-dx * dx - 0.5 * dt * dt).exp()
}

/// Length of molecular-beam path over which the laser profile is seen, m.
pub fn interaction_length(geometry: &BeamGeometry, waist: f64) -> Result<f64> {
    let a = geometry.crossing_angle;
    if !(a > 0.0) {
        return Err(Error::Domain(
            "crossing angle must be > 0 (length would be infinite)".into(),
        ));
    }
    Ok(waist / a.tan())
}

/// Rayleigh length `πw₀²/λ`, m.
pub fn rayleigh_length(waist: f64, wavelength: f64) -> f64 {
    std::f64::consts::PI * waist * waist / wavelength
}

/// How the focused spot size is derived from the focusing optic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpotConvention {
    /// Spot *diameter* `4λf/(πD)` used as the waist parameter.
    #[default]
    SpotDiameter,
    /// True 1/e² radius `2λf/(πD)` for an input beam filling the aperture.
    Radius,
}

/// Diffraction-limited focused waist for a lens of focal length `f` and
/// aperture `d`, m.
pub fn focused_waist(
    focal_length: f64,
    aperture: f64,
    wavelength: f64,
    convention: SpotConvention,
) -> f64 {
    let radius = 2.0 * wavelength * focal_length / (std::f64::consts::PI * aperture);
    match convention {
        SpotConvention::SpotDiameter => 2.0 * radius,
        SpotConvention::Radius => radius,
    }
}

/// Rayleigh length of the focus produced by a lens of focal length `f` and
/// aperture `d`.
pub fn rayleigh_length_focused(
    focal_length: f64,
    aperture: f64,
    wavelength: f64,
    convention: SpotConvention,
) -> f64 {
    rayleigh_length(
        focused_waist(focal_length, aperture, wavelength, convention),
        wavelength,
    )
}

/// The counter-intuitive ordering: the control pulse is crossed first.
pub fn counter_intuitive(probe: &FieldProfile, control: &FieldProfile) -> bool {
    control.center_t < probe.center_t
}

/// Field amplitudes `(ε_p, ε_c)` in V/m experienced by a molecule at
/// transverse position `x` and molecule-frame time `t`.
///
/// With `stirap_mode` set, a pulse pair not in counter-intuitive order is
/// rejected.
pub fn molecule_frame_fields(
    probe: &FieldProfile,
    control: &FieldProfile,
    x: f64,
    t: f64,
    stirap_mode: bool,
) -> Result<(f64, f64)> {
    if stirap_mode && !counter_intuitive(probe, control) {
        return Err(Error::Config(format!(
            "counter-intuitive ordering violated: control centre {} s is not before probe centre {} s",
            control.center_t, probe.center_t
        )));
    }
    Ok((
        peak_amplitude(probe) * envelope(probe, x, t),
        peak_amplitude(control) * envelope(control, x, t),
    ))
}
