//! Field-dressed Hamiltonians in the rotating frame.
//!
//! The three-level Λ system is written as
//!
//! ```text
//! H = Ω_p(|g⟩⟨e| + |e⟩⟨g|) + Ω_c(|s⟩⟨e| + |e⟩⟨s|) + δ_p|e⟩⟨e| + δ_two|s⟩⟨s|
//! ```
//!
//! with `Ω = μ·ε/2ħ`, optionally minus `iΓ/2` on every excited-manifold level.
//! `LevelSystem::coupling_scale` multiplies every off-diagonal coupling and
//! can be set to 2 to use the alternative normalisation of the couplings.
//!
//! Extended ladders (7, 9 and 11 levels) add further excited intermediates,
//! the two pulse-mixing sidebands (the control photon acting on |g⟩ and the
//! probe photon acting on |s⟩) and the next ground vibrational level.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldRole;
use crate::molecule::{rotational_energy, MoleculeSpec, RamanPartner, RoLevel};
use crate::units::{wavenumber_to_angular, HBAR};

pub type CMatrix = DMatrix<Complex64>;

/// Rabi frequency `μ·ε/2ħ` in rad/s.
#[inline]
pub fn rabi_frequency(dipole: f64, amplitude: f64) -> f64 {
    dipole * amplitude / (2.0 * HBAR)
}

/// Number of levels in a model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ModelSize {
    #[default]
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "7")]
    Seven,
    #[serde(rename = "9")]
    Nine,
    #[serde(rename = "11")]
    Eleven,
}

impl ModelSize {
    pub fn dim(self) -> usize {
        match self {
            ModelSize::Three => 3,
            ModelSize::Seven => 7,
            ModelSize::Nine => 9,
            ModelSize::Eleven => 11,
        }
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        match dim {
            3 => Ok(ModelSize::Three),
            7 => Ok(ModelSize::Seven),
            9 => Ok(ModelSize::Nine),
            11 => Ok(ModelSize::Eleven),
            d => Err(Error::Config(format!(
                "unsupported model size {d} (expected 3, 7, 9 or 11)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    /// One of |g⟩, |e⟩, |s⟩.
    Core,
    /// Additional excited intermediate or ground vibrational level.
    Intermediate,
    /// Floquet copy of |e⟩ reached through a pulse-mixing path.
    Sideband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub state: Option<RoLevel>,
    /// Rotating-frame energy, rad/s.
    pub detuning: f64,
    /// Excited-manifold level (subject to decay, upper partner of its couplings).
    pub upper: bool,
    pub kind: LevelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Primary,
    /// Only active when pulse mixing is requested.
    Mixing,
}

/// Dipole coupling between levels `i` and `j` driven by one field.
///
/// Stored once per unordered pair; the builder writes both `(i,j)` and
/// `(j,i)` with the same magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    /// C·m; `None` means the ladder requested it but no dipole is known.
    pub dipole: Option<f64>,
    pub field: FieldRole,
    pub kind: CouplingKind,
}

/// N bare states with their couplings and rotating-frame detunings.
///
/// Index 0 is |g⟩, 1 is |e⟩ and 2 is |s⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSystem {
    pub levels: Vec<Level>,
    pub couplings: Vec<Coupling>,
    /// Excited-state amplitude decay rate Γ, rad/s.
    pub decay_rate: f64,
    /// Multiplier applied to every coupling (1 or 2).
    pub coupling_scale: f64,
    /// Optical carrier of the probe, rad/s (0 if unknown).
    pub probe_carrier: f64,
    /// Optical carrier of the control, rad/s (0 if unknown).
    pub control_carrier: f64,
}

/// Switches for the extended builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtendedOptions {
    /// Bloch–Siegert shifts from the counter-rotating terms.
    pub counter_rotating: bool,
    /// Probe acting on the control transition and vice versa.
    pub pulse_mixing: bool,
    /// Explicit `e^{2iωt}` counter-rotating couplings (time-dependent
    /// propagation only; replaces the shifts).
    pub explicit_counter_rotating: bool,
}

/// Field amplitudes seen by the molecule, V/m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldAmplitudes {
    pub probe: f64,
    pub control: f64,
}

impl FieldAmplitudes {
    pub fn get(&self, role: FieldRole) -> f64 {
        match role {
            FieldRole::Probe => self.probe,
            FieldRole::Control => self.control,
        }
    }
}

/// A built Hamiltonian matrix, rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: CMatrix,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermitian_part(&self) -> CMatrix {
        (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0)
    }

    pub fn anti_hermitian_part(&self) -> CMatrix {
        (&self.matrix - self.matrix.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Largest absolute entry.
    pub fn scale(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let s = self.scale();
        let d = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        d <= rel_tol * s
    }
}

impl LevelSystem {
    /// Bare Λ system with the given one- and two-photon detunings (rad/s)
    /// and dipoles (C·m).
    pub fn lambda(delta_p: f64, delta_two: f64, dipole_ge: f64, dipole_se: f64) -> Self {
        LevelSystem {
            levels: vec![
                Level {
                    name: "g".into(),
                    state: None,
                    detuning: 0.0,
                    upper: false,
                    kind: LevelKind::Core,
                },
                Level {
                    name: "e".into(),
                    state: None,
                    detuning: delta_p,
                    upper: true,
                    kind: LevelKind::Core,
                },
                Level {
                    name: "s".into(),
                    state: None,
                    detuning: delta_two,
                    upper: false,
                    kind: LevelKind::Core,
                },
            ],
            couplings: vec![
                Coupling {
                    i: 0,
                    j: 1,
                    dipole: Some(dipole_ge),
                    field: FieldRole::Probe,
                    kind: CouplingKind::Primary,
                },
                Coupling {
                    i: 2,
                    j: 1,
                    dipole: Some(dipole_se),
                    field: FieldRole::Control,
                    kind: CouplingKind::Primary,
                },
            ],
            decay_rate: 0.0,
            coupling_scale: 1.0,
            probe_carrier: 0.0,
            control_carrier: 0.0,
        }
    }

    pub fn with_decay(mut self, gamma: f64) -> Self {
        self.decay_rate = gamma;
        self
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn delta_p(&self) -> f64 {
        self.levels[1].detuning
    }

    pub fn delta_two(&self) -> f64 {
        self.levels[2].detuning
    }

    /// Control one-photon detuning, `δ_c = δ_p − δ_two`.
    pub fn delta_c(&self) -> f64 {
        self.delta_p() - self.delta_two()
    }

    /// Raman difference frequency ω_p − ω_c, rad/s.
    pub fn raman_frequency(&self) -> f64 {
        self.probe_carrier - self.control_carrier
    }

    fn carrier(&self, role: FieldRole) -> f64 {
        match role {
            FieldRole::Probe => self.probe_carrier,
            FieldRole::Control => self.control_carrier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(Error::Config(
                "level system needs at least |g>, |e>, |s>".into(),
            ));
        }
        ModelSize::from_dim(self.dim())?;
        for c in &self.couplings {
            if c.i >= self.dim() || c.j >= self.dim() || c.i == c.j {
                return Err(Error::Config(format!(
                    "bad coupling indices ({}, {})",
                    c.i, c.j
                )));
            }
        }
        if !(self.decay_rate >= 0.0) {
            return Err(Error::Config("decay rate must be >= 0".into()));
        }
        Ok(())
    }

    /// Default ladder for the molecule in ground level `g`, with the lasers
    /// tuned to the Raman resonance of `target` at one-photon detuning
    /// `delta_p` (rad/s) from the target's intermediate level.
    ///
    /// The intermediate of `|X, 0, J⟩` is `|B, 0, J−1⟩` (or `J+1` for J = 0).
    pub fn ladder(
        model: ModelSize,
        spec: &MoleculeSpec,
        target: RoLevel,
        g: RoLevel,
        delta_p: f64,
        rule: RamanPartner,
    ) -> Result<Self> {
        let intermediate =
            |lvl: RoLevel| RoLevel::excited(0, if lvl.j >= 1 { lvl.j - 1 } else { lvl.j + 1 });
        let s = rule.partner(g)?;
        let e = intermediate(g);
        let t_s = rule.partner(target)?;
        let t_e = intermediate(target);

        // Energies relative to this molecule's |g⟩ in cm⁻¹.
        let rel = |lvl: RoLevel| rotational_energy(spec, lvl) - rotational_energy(spec, g);
        let raman_t = rotational_energy(spec, t_s) - rotational_energy(spec, target);
        let optical_t = rotational_energy(spec, t_e) - rotational_energy(spec, target);
        let dp_cm = crate::units::angular_to_wavenumber(delta_p);
        // Probe photon energy relative to the tuned transition, cm⁻¹.
        let probe_cm = optical_t - dp_cm;
        // Frame energy of a level reached with n_p probe photons absorbed and
        // n_c control photons emitted.
        let frame = |lvl: RoLevel, n_p: i32, n_c: i32| -> f64 {
            wavenumber_to_angular(rel(lvl) - (n_p - n_c) as f64 * probe_cm - n_c as f64 * raman_t)
        };

        let probe_carrier = wavenumber_to_angular(probe_cm);
        let control_carrier = wavenumber_to_angular(probe_cm - raman_t);

        let mu_ge = spec.dipole_ge();
        let mu_se = spec.dipole_se();
        let mut sys = LevelSystem {
            levels: vec![
                Level {
                    name: "g".into(),
                    state: Some(g),
                    detuning: 0.0,
                    upper: false,
                    kind: LevelKind::Core,
                },
                Level {
                    name: "e".into(),
                    state: Some(e),
                    detuning: frame(e, 1, 0),
                    upper: true,
                    kind: LevelKind::Core,
                },
                Level {
                    name: "s".into(),
                    state: Some(s),
                    detuning: frame(s, 1, 1),
                    upper: false,
                    kind: LevelKind::Core,
                },
            ],
            couplings: vec![
                Coupling {
                    i: 0,
                    j: 1,
                    dipole: Some(mu_ge),
                    field: FieldRole::Probe,
                    kind: CouplingKind::Primary,
                },
                Coupling {
                    i: 2,
                    j: 1,
                    dipole: Some(mu_se),
                    field: FieldRole::Control,
                    kind: CouplingKind::Primary,
                },
            ],
            decay_rate: 0.0,
            coupling_scale: 1.0,
            probe_carrier,
            control_carrier,
        };
        // Exact zeros for the tuned molecule.
        if g == target {
            sys.levels[1].detuning = delta_p;
            sys.levels[2].detuning = 0.0;
        }

        let dim = model.dim();
        if dim == 3 {
            return Ok(sys);
        }

        let push_level =
            |sys: &mut LevelSystem, name: &str, state: RoLevel, det: f64, upper: bool, kind| {
                sys.levels.push(Level {
                    name: name.into(),
                    state: Some(state),
                    detuning: det,
                    upper,
                    kind,
                });
                sys.levels.len() - 1
            };
        let couple = |sys: &mut LevelSystem, i: usize, j: usize, dipole: f64, field, kind| {
            sys.couplings.push(Coupling {
                i,
                j,
                dipole: Some(dipole),
                field,
                kind,
            });
        };

        // 7: other rotational branch of the intermediate, both mixing
        // sidebands, and the ν+2 ground level.
        let e_alt = if g.j >= 1 {
            RoLevel::excited(0, g.j + 1)
        } else {
            RoLevel::excited(1, 1)
        };
        let k = push_level(
            &mut sys,
            "e_alt",
            e_alt,
            frame(e_alt, 1, 0),
            true,
            LevelKind::Intermediate,
        );
        couple(
            &mut sys,
            0,
            k,
            mu_ge,
            FieldRole::Probe,
            CouplingKind::Primary,
        );
        couple(
            &mut sys,
            2,
            k,
            mu_se,
            FieldRole::Control,
            CouplingKind::Primary,
        );

        let k_c = push_level(
            &mut sys,
            "e_mix_c",
            e,
            frame(e, 0, -1),
            true,
            LevelKind::Sideband,
        );
        couple(
            &mut sys,
            0,
            k_c,
            mu_ge,
            FieldRole::Control,
            CouplingKind::Mixing,
        );
        let k_p = push_level(
            &mut sys,
            "e_mix_p",
            e,
            frame(e, 2, 1),
            true,
            LevelKind::Sideband,
        );
        couple(
            &mut sys,
            2,
            k_p,
            mu_se,
            FieldRole::Probe,
            CouplingKind::Mixing,
        );

        let v2 = RoLevel::ground(s.nu + 1, s.j);
        let k_v2 = push_level(
            &mut sys,
            "v2",
            v2,
            frame(v2, 2, 2),
            false,
            LevelKind::Intermediate,
        );
        couple(
            &mut sys,
            k_p,
            k_v2,
            mu_se,
            FieldRole::Control,
            CouplingKind::Mixing,
        );

        if dim >= 9 {
            // next excited vibrational level, both rotational branches
            for (name, lvl) in [
                ("e_v1", RoLevel::excited(1, e.j)),
                ("e_v1_alt", RoLevel::excited(1, e_alt.j)),
            ] {
                let k = push_level(
                    &mut sys,
                    name,
                    lvl,
                    frame(lvl, 1, 0),
                    true,
                    LevelKind::Intermediate,
                );
                couple(
                    &mut sys,
                    0,
                    k,
                    mu_ge,
                    FieldRole::Probe,
                    CouplingKind::Primary,
                );
                couple(
                    &mut sys,
                    2,
                    k,
                    mu_se,
                    FieldRole::Control,
                    CouplingKind::Primary,
                );
            }
        }
        if dim >= 11 {
            for (name, lvl) in [
                ("e_v2", RoLevel::excited(2, e.j)),
                ("e_v2_alt", RoLevel::excited(2, e_alt.j)),
            ] {
                let k = push_level(
                    &mut sys,
                    name,
                    lvl,
                    frame(lvl, 1, 0),
                    true,
                    LevelKind::Intermediate,
                );
                couple(
                    &mut sys,
                    0,
                    k,
                    mu_ge,
                    FieldRole::Probe,
                    CouplingKind::Primary,
                );
                couple(
                    &mut sys,
                    2,
                    k,
                    mu_se,
                    FieldRole::Control,
                    CouplingKind::Primary,
                );
            }
        }
        debug_assert_eq!(sys.dim(), dim);
        Ok(sys)
    }
}

/// The three-level Λ Hamiltonian for given Rabi frequencies (rad/s).
pub fn build_lambda(system: &LevelSystem, omega_p: f64, omega_c: f64) -> Result<HamiltonianMatrix> {
    if system.dim() != 3 {
        return Err(Error::WrongBuilder(format!(
            "build_lambda needs a 3-level system, got {} levels",
            system.dim()
        )));
    }
    let z = Complex64::new(0.0, 0.0);
    let mut h = CMatrix::from_element(3, 3, z);
    let k = system.coupling_scale;
    h[(0, 1)] = Complex64::new(k * omega_p, 0.0);
    h[(1, 0)] = h[(0, 1)];
    h[(2, 1)] = Complex64::new(k * omega_c, 0.0);
    h[(1, 2)] = h[(2, 1)];
    h[(1, 1)] = Complex64::new(system.delta_p(), -0.5 * system.decay_rate);
    h[(2, 2)] = Complex64::new(system.delta_two(), 0.0);
    Ok(HamiltonianMatrix { matrix: h })
}

/// Λ Hamiltonian from field amplitudes, using the system's two core dipoles.
pub fn lambda_rabi(system: &LevelSystem, fields: FieldAmplitudes) -> Result<(f64, f64)> {
    let dip = |i: usize| {
        system
            .couplings
            .iter()
            .find(|c| (c.i == i && c.j == 1) || (c.j == i && c.i == 1))
            .and_then(|c| c.dipole)
            .ok_or_else(|| Error::Config(format!("missing dipole for core coupling {i}-1")))
    };
    Ok((
        rabi_frequency(dip(0)?, fields.probe),
        rabi_frequency(dip(2)?, fields.control),
    ))
}

/// General builder for any supported ladder.
///
/// With all options off and three levels this reproduces [`build_lambda`]
/// exactly. `time` is only used by explicit counter-rotating couplings.
pub fn build_extended(
    system: &LevelSystem,
    fields: FieldAmplitudes,
    options: ExtendedOptions,
    time: f64,
) -> Result<HamiltonianMatrix> {
    let n = system.dim();
    ModelSize::from_dim(n)?;
    if (options.counter_rotating || options.explicit_counter_rotating)
        && (system.probe_carrier <= 0.0 || system.control_carrier <= 0.0)
    {
        return Err(Error::Config(
            "counter-rotating terms need both optical carriers".into(),
        ));
    }
    let z = Complex64::new(0.0, 0.0);
    let mut h = CMatrix::from_element(n, n, z);
    let mut shift = vec![0.0f64; n];
    let k = system.coupling_scale;

    for c in &system.couplings {
        if c.kind == CouplingKind::Mixing && !options.pulse_mixing {
            continue;
        }
        let mu = c.dipole.ok_or_else(|| {
            Error::Config(format!(
                "missing dipole for coupling {}-{}",
                system.levels[c.i].name, system.levels[c.j].name
            ))
        })?;
        let omega = k * rabi_frequency(mu, fields.get(c.field));
        let (lo, hi) = if system.levels[c.j].upper {
            (c.i, c.j)
        } else {
            (c.j, c.i)
        };
        let mut val = Complex64::new(omega, 0.0);
        if options.explicit_counter_rotating {
            let w = system.carrier(c.field);
            val += Complex64::from_polar(omega, 2.0 * w * time);
        } else if options.counter_rotating {
            let w = system.carrier(c.field);
            let denom = system.levels[hi].detuning - system.levels[lo].detuning + 2.0 * w;
            let bs = omega * omega / denom;
            shift[lo] -= bs;
            shift[hi] += bs;
        }
        h[(lo, hi)] += val;
        h[(hi, lo)] += val.conj();
    }

    // Without explicit sideband levels, pulse mixing enters the Λ model as
    // the light shifts of the two off-resonant paths.
    if options.pulse_mixing && n == 3 {
        // Rabi frequencies per unit field of the two core transitions
        let (per_ge, per_se) = lambda_rabi(
            system,
            FieldAmplitudes {
                probe: 1.0,
                control: 1.0,
            },
        )?;
        let om_gc = k * per_ge * fields.control;
        let om_sp = k * per_se * fields.probe;
        let dw = system.raman_frequency();
        let dp = system.delta_p();
        if om_gc != 0.0 {
            shift[0] -= om_gc * om_gc / (dp + dw);
        }
        if om_sp != 0.0 {
            shift[2] -= om_sp * om_sp / (dp - dw - system.delta_two());
        }
    }

    for (i, lvl) in system.levels.iter().enumerate() {
        let decay = if lvl.upper {
            -0.5 * system.decay_rate
        } else {
            0.0
        };
        h[(i, i)] = Complex64::new(lvl.detuning + shift[i], decay);
    }
    Ok(HamiltonianMatrix { matrix: h })
}

/// `∂H/∂X` of the Hermitian part for fields whose amplitudes vary as
/// `ε_k(X) ∝ exp(−(X−X_k)²/w_k²)`; `slopes` are the logarithmic derivatives
/// `∂ ln ε_k/∂X` of probe and control.
pub fn d_hamiltonian_dx(
    system: &LevelSystem,
    fields: FieldAmplitudes,
    slopes: FieldAmplitudes,
    options: ExtendedOptions,
) -> Result<CMatrix> {
    let n = system.dim();
    let mut d = CMatrix::zeros(n, n);
    let k = system.coupling_scale;
    for c in &system.couplings {
        if c.kind == CouplingKind::Mixing && !options.pulse_mixing {
            continue;
        }
        let mu = c
            .dipole
            .ok_or_else(|| Error::Config("missing dipole".into()))?;
        let dom = k * rabi_frequency(mu, fields.get(c.field)) * slopes.get(c.field);
        d[(c.i, c.j)] += Complex64::new(dom, 0.0);
        d[(c.j, c.i)] += Complex64::new(dom, 0.0);
    }
    if options.counter_rotating || (options.pulse_mixing && n == 3) {
        return Err(Error::Config(
            "analytic gradient only covers the plain coupling model".into(),
        ));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::DEBYE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_fields_zero_detuning_is_zero() {
        let sys = LevelSystem::lambda(0.0, 0.0, 1.0, 1.0);
        let h = build_lambda(&sys, 0.0, 0.0).unwrap();
        assert!(h.matrix.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn two_level_block() {
        let sys = LevelSystem::lambda(0.0, 0.0, 1.0, 1.0);
        let h = build_lambda(&sys, 1.0, 0.0).unwrap();
        let ev = h.hermitian_part().symmetric_eigenvalues();
        let mut v: Vec<f64> = ev.iter().cloned().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((v[0] + 1.0).abs() < 1e-14 && v[1].abs() < 1e-14 && (v[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_over_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let sys =
                LevelSystem::lambda(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3), 1.0, 1.0);
            let h = build_lambda(&sys, rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)).unwrap();
            assert!(h.is_hermitian(1e-14));
        }
    }

    #[test]
    fn decay_is_anti_hermitian_on_e_only() {
        let sys = LevelSystem::lambda(3.0, 0.5, 1.0, 1.0).with_decay(0.2);
        let h = build_lambda(&sys, 1.0, 2.0).unwrap();
        let a = h.anti_hermitian_part();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == 1 && j == 1 {
                    Complex64::new(0.0, -0.1)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((a[(i, j)] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn wrong_builder() {
        let spec = MoleculeSpec::lirb();
        let g = RoLevel::ground(0, 0);
        let sys =
            LevelSystem::ladder(ModelSize::Seven, &spec, g, g, 1e13, RamanPartner::SameJ).unwrap();
        assert!(matches!(
            build_lambda(&sys, 1.0, 1.0),
            Err(Error::WrongBuilder(_))
        ));
    }

    #[test]
    fn extended_reduces_to_lambda_bitwise() {
        let sys = LevelSystem::lambda(5.0e13, 3.0e8, 4.0 * DEBYE, 3.0 * DEBYE).with_decay(1e7);
        let f = FieldAmplitudes {
            probe: 1.3e6,
            control: 0.7e6,
        };
        let (op, oc) = lambda_rabi(&sys, f).unwrap();
        let a = build_lambda(&sys, op, oc).unwrap();
        let b = build_extended(&sys, f, ExtendedOptions::default(), 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_symmetric_under_field_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let sys = LevelSystem::lambda(rng.gen_range(-5.0..5.0), 0.0, 1.0, 1.0);
            let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let mut e1: Vec<f64> = build_lambda(&sys, a, b)
                .unwrap()
                .hermitian_part()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .collect();
            let mut e2: Vec<f64> = build_lambda(&sys, b, a)
                .unwrap()
                .hermitian_part()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .collect();
            e1.sort_by(|x, y| x.partial_cmp(y).unwrap());
            e2.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in e1.iter().zip(&e2) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pulse_mixing_symmetric_for_degenerate_fields() {
        let mut sys = LevelSystem::lambda(2.0e13, 0.0, 4.0 * DEBYE, 4.0 * DEBYE);
        sys.probe_carrier = 3.2e15;
        sys.control_carrier = 3.2e15;
        let f = FieldAmplitudes {
            probe: 1e6,
            control: 1e6,
        };
        let opts = ExtendedOptions {
            pulse_mixing: true,
            ..Default::default()
        };
        let h = build_extended(&sys, f, opts, 0.0).unwrap().matrix;
        // relabel g <-> s
        let p = [2usize, 1, 0];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - h[(p[i], p[j])]).norm() <= 1e-12 * h[(1, 1)].norm());
            }
        }
        assert!(h[(0, 0)].re < 0.0);
    }

    #[test]
    fn ladder_dimensions_and_tuning() {
        let spec = MoleculeSpec::lirb();
        let t = RoLevel::ground(0, 0);
        let dp = wavenumber_to_angular(300.0);
        for m in [
            ModelSize::Three,
            ModelSize::Seven,
            ModelSize::Nine,
            ModelSize::Eleven,
        ] {
            let sys = LevelSystem::ladder(m, &spec, t, t, dp, RamanPartner::SameJ).unwrap();
            assert_eq!(sys.dim(), m.dim());
            sys.validate().unwrap();
            assert_eq!(sys.delta_p(), dp);
            assert_eq!(sys.delta_two(), 0.0);
            let h = build_extended(
                &sys,
                FieldAmplitudes {
                    probe: 1e6,
                    control: 1e6,
                },
                ExtendedOptions {
                    pulse_mixing: true,
                    counter_rotating: true,
                    ..Default::default()
                },
                0.0,
            )
            .unwrap();
            assert!(h.is_hermitian(1e-14));
        }
        // non-target molecule picks up the two-photon offset
        let o = RoLevel::ground(0, 1);
        let sys =
            LevelSystem::ladder(ModelSize::Three, &spec, t, o, dp, RamanPartner::SameJ).unwrap();
        let want = wavenumber_to_angular(
            crate::molecule::two_photon_offset_cm(&spec, t, o, RamanPartner::SameJ).unwrap(),
        );
        assert!(
            (sys.delta_two() - want).abs() < 1e-6 * want.abs(),
            "{} vs {want}",
            sys.delta_two()
        );
        // probe carrier sits at the 586 nm design wavelength
        let lambda = 2.0 * std::f64::consts::PI * crate::units::SPEED_OF_LIGHT / sys.probe_carrier;
        assert!((lambda - 586e-9).abs() < 0.05e-9, "{lambda}");
    }

    #[test]
    fn missing_dipole_is_config_error() {
        let mut sys = LevelSystem::lambda(1.0, 0.0, 1.0, 1.0);
        sys.couplings[1].dipole = None;
        let r = build_extended(
            &sys,
            FieldAmplitudes {
                probe: 1.0,
                control: 1.0,
            },
            ExtendedOptions::default(),
            0.0,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn rabi_frequency_scaling() {
        assert_eq!(rabi_frequency(4.0 * DEBYE, 0.0), 0.0);
        let a = rabi_frequency(2.0 * DEBYE, 1e6);
        let b = rabi_frequency(4.0 * DEBYE, 1e6);
        assert!((b - 2.0 * a).abs() <= 1e-15 * b);
        assert!((rabi_frequency(DEBYE, 2e6) - 2.0 * rabi_frequency(DEBYE, 1e6)).abs() <= 1e-15 * a);
    }

    #[test]
    fn rabi_frequency_paper_scale_regression() {
        // 4 D, 0.8 W, 10 μm: ε ≈ 1.95896e6 V/m, Ω = μ ε / 2ħ
        let eps = (2.0 * (2.0 * 0.8 / (std::f64::consts::PI * 1e-10))
            / (299_792_458.0 * 8.854_187_812_8e-12))
            .sqrt();
        let hand = 4.0 * 3.335_640_952e-30 * eps / (2.0 * 1.054_571_817e-34);
        let om = rabi_frequency(4.0 * DEBYE, eps);
        assert!((om - hand).abs() / hand < 1e-8);
        assert!((om - 1.2392e11).abs() / om < 1e-3, "{om}");
    }
}
