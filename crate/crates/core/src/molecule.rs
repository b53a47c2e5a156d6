//! Spectroscopic constants, bare-state energies and thermal populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, BOLTZMANN, PLANCK, SPEED_OF_LIGHT};

/// Electronic manifold of a rovibrational level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    /// Ground electronic state (X¹Σ).
    X,
    /// Excited electronic state used as the intermediate |e⟩.
    B,
}

/// One rovibrational level `|manifold, ν, J⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoLevel {
    pub manifold: Manifold,
    pub nu: u32,
    pub j: u32,
}

impl RoLevel {
    pub const fn ground(nu: u32, j: u32) -> Self {
        RoLevel {
            manifold: Manifold::X,
            nu,
            j,
        }
    }

    pub const fn excited(nu: u32, j: u32) -> Self {
        RoLevel {
            manifold: Manifold::B,
            nu,
            j,
        }
    }
}

impl std::fmt::Display for RoLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}(v={},J={})", self.manifold, self.nu, self.j)
    }
}

/// Constants of one molecular species.
///
/// Rotational constants follow `B_ν = B_e − α_e·ν`, so the ν = 0 level uses
/// `B_e` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSpec {
    pub name: String,
    /// Mass in atomic mass units.
    pub mass_amu: f64,
    /// Ground-state rotational constant, cm⁻¹.
    pub b_e_cm: f64,
    /// Vibration-rotation coupling of the ground state, cm⁻¹.
    #[serde(default)]
    pub alpha_e_cm: f64,
    /// Ground-state ν = 0 → 1 spacing, cm⁻¹.
    pub vibrational_spacing_cm: f64,
    /// Energy of the excited-manifold origin above X(ν=0, J=0), cm⁻¹.
    pub excited_state_origin_cm: f64,
    /// Excited-manifold rotational constant, cm⁻¹.
    pub excited_b_cm: f64,
    /// Excited-manifold vibrational spacing, cm⁻¹.
    pub excited_vibrational_spacing_cm: f64,
    /// Transition dipole μ_{e,g}, Debye.
    pub dipole_ge_debye: f64,
    /// Transition dipole μ_{s,e}, Debye.
    pub dipole_se_debye: f64,
    /// True when the dipoles are placeholders rather than measured values.
    #[serde(default)]
    pub dipoles_assumed: bool,
}

impl Default for MoleculeSpec {
    fn default() -> Self {
        Self::lirb()
    }
}

impl MoleculeSpec {
    /// ⁷Li⁸⁷Rb with the ground-state rotational constant 0.2158 cm⁻¹.
    ///
    /// `alpha_e_cm` is set so that the J = 0 / J = 1 two-photon offset is
    /// 0.003 cm⁻¹. The excited-state constants and both dipoles (4.0 D) are
    /// placeholders and are flagged as assumed.
    pub fn lirb() -> Self {
        MoleculeSpec {
            name: "LiRb".to_string(),
            mass_amu: 7.016_003 + 86.909_180,
            b_e_cm: 0.2158,
            alpha_e_cm: 0.0015,
            vibrational_spacing_cm: 195.0,
            // Puts a 586 nm probe 300 cm⁻¹ to the red of the excited origin.
            excited_state_origin_cm: 1e7 / 586.0 + 300.0,
            excited_b_cm: 0.19,
            excited_vibrational_spacing_cm: 130.0,
            dipole_ge_debye: 4.0,
            dipole_se_debye: 4.0,
            dipoles_assumed: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("[molecule] {msg}")));
        if !(self.mass_amu > 0.0) {
            return bad("mass_amu must be > 0");
        }
        if !(self.b_e_cm > 0.0) {
            return bad("b_e_cm must be > 0");
        }
        if !(self.dipole_ge_debye >= 0.0 && self.dipole_se_debye >= 0.0) {
            return bad("dipoles must be >= 0");
        }
        if !(self.vibrational_spacing_cm > 10.0 * self.b_e_cm) {
            return bad("vibrational_spacing_cm must exceed 10 * b_e_cm");
        }
        if self.alpha_e_cm.abs() >= self.b_e_cm {
            return bad("|alpha_e_cm| must be smaller than b_e_cm");
        }
        if !(self.excited_b_cm > 0.0 && self.excited_vibrational_spacing_cm > 0.0) {
            return bad("excited-state constants must be > 0");
        }
        Ok(())
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * units::AMU
    }

    pub fn dipole_ge(&self) -> f64 {
        self.dipole_ge_debye * units::DEBYE
    }

    pub fn dipole_se(&self) -> f64 {
        self.dipole_se_debye * units::DEBYE
    }

    /// Rotational constant of a vibrational level, cm⁻¹.
    pub fn rotational_constant(&self, manifold: Manifold, nu: u32) -> f64 {
        match manifold {
            Manifold::X => self.b_e_cm - self.alpha_e_cm * nu as f64,
            Manifold::B => self.excited_b_cm,
        }
    }
}

/// Bare energy of a level relative to X(ν=0, J=0), in cm⁻¹.
pub fn rotational_energy(spec: &MoleculeSpec, level: RoLevel) -> f64 {
    let jj = (level.j as u64 * (level.j as u64 + 1)) as f64;
    let rot = spec.rotational_constant(level.manifold, level.nu) * jj;
    match level.manifold {
        Manifold::X => rot + spec.vibrational_spacing_cm * level.nu as f64,
        Manifold::B => {
            spec.excited_state_origin_cm
                + spec.excited_vibrational_spacing_cm * level.nu as f64
                + rot
        }
    }
}

/// Normalized Boltzmann weights of the ν = 0 rotational ladder J = 0..=j_max.
///
/// `p_J ∝ (2J+1)·exp(−hc·B_e·J(J+1)/k_B·T)`.
pub fn thermal_populations(spec: &MoleculeSpec, temperature: f64, j_max: u32) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be > 0 K, got {temperature}"
        )));
    }
    // hc/k_B in cm·K
    let c2 = PLANCK * SPEED_OF_LIGHT * 100.0 / BOLTZMANN;
    let log_w: Vec<f64> = (0..=j_max)
        .map(|j| {
            let e = rotational_energy(spec, RoLevel::ground(0, j));
            ((2 * j + 1) as f64).ln() - c2 * e / temperature
        })
        .collect();
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / sum).collect())
}

/// How each `|g⟩ = |X, ν=0, J⟩` picks its Raman partner `|s⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RamanPartner {
    /// `|s⟩ = |X, ν=1, J⟩`.
    #[default]
    SameJ,
    /// `|s⟩ = |X, ν=1, J + ΔJ⟩`.
    DeltaJ(i32),
}

impl RamanPartner {
    pub fn partner(self, g: RoLevel) -> Result<RoLevel> {
        let j = match self {
            RamanPartner::SameJ => g.j as i64,
            RamanPartner::DeltaJ(d) => g.j as i64 + d as i64,
        };
        if j < 0 {
            return Err(Error::Domain(format!(
                "no Raman partner for {g}: J would be {j}"
            )));
        }
        Ok(RoLevel {
            manifold: Manifold::X,
            nu: g.nu + 1,
            j: j as u32,
        })
    }
}

/// Two-photon detuning felt by `other` when the lasers are tuned to the
/// `target` Raman resonance, in cm⁻¹.
///
/// Convention: the |s⟩ level of `other` sits at `δ_two` above its |g⟩ in
/// the rotating frame, i.e. `δ_two = (E_s − E_g)_other − (E_s − E_g)_target`.
pub fn two_photon_offset_cm(
    spec: &MoleculeSpec,
    target: RoLevel,
    other: RoLevel,
    rule: RamanPartner,
) -> Result<f64> {
    if target.manifold != Manifold::X || other.manifold != Manifold::X {
        return Err(Error::Domain(format!(
            "two-photon offsets are defined within the X manifold ({target} vs {other})"
        )));
    }
    let raman = |g: RoLevel| -> Result<f64> {
        let s = rule.partner(g)?;
        Ok(rotational_energy(spec, s) - rotational_energy(spec, g))
    };
    Ok(raman(other)? - raman(target)?)
}

/// Two-photon offset in MHz (cyclic).
pub fn two_photon_offset(
    spec: &MoleculeSpec,
    target: RoLevel,
    other: RoLevel,
    rule: RamanPartner,
) -> Result<f64> {
    two_photon_offset_cm(spec, target, other, rule).map(units::wavenumber_to_mhz)
}
