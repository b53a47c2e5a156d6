//! TOML run configuration with unit-suffixed keys.
//!
//! Every section is optional and falls back to the LiRb defaults. Keys carry
//! their unit in the name (`power_W`, `waist_um`, `dt_ns`, ...); values are
//! converted to SI when the physics objects are built.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamline::{
    DressingLasers, EnsembleParams, LaserBeam, PurificationSetup, SlitGeometry, SurfaceGrid,
};
use crate::error::{Error, Result};
use crate::field::BeamGeometry;
use crate::hamiltonian::{ExtendedOptions, LevelSystem, ModelSize};
use crate::molecule::{MoleculeSpec, RamanPartner, RoLevel};
use crate::tdse::{Method, PropagationConfig, PulseSchedule, ScheduleMode, StepControl};
use crate::units::{mhz_to_angular, wavenumber_to_angular};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Eigen,
    Follow,
    Stirap,
    #[default]
    Beamline,
    Sweep,
    Li6demo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: String,
    /// Write a generation timestamp into SVG files.
    pub svg_timestamp: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: Mode::Beamline,
            seed: 1,
            output_dir: "out".into(),
            svg_timestamp: true,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub power_W: f64,
    pub waist_um: f64,
    pub wavelength_nm: f64,
}

impl BeamSection {
    fn probe() -> Self {
        BeamSection {
            power_W: 0.8,
            waist_um: 10.0,
            wavelength_nm: 586.0,
        }
    }

    fn control() -> Self {
        BeamSection {
            power_W: 0.8,
            waist_um: 10.0,
            wavelength_nm: 592.8,
        }
    }

    fn beam(&self) -> LaserBeam {
        LaserBeam {
            power: self.power_W,
            waist: self.waist_um / 1e6,
            wavelength: self.wavelength_nm / 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub angle_deg: f64,
    pub longitudinal_velocity_m_s: f64,
    pub focal_length_mm: f64,
    pub aperture_mm: f64,
    /// Offset of the laser centres from the molecular-beam axis.
    pub center_x_um: f64,
    /// Control-to-probe delay in units of the crossing time σ_t.
    pub delay_sigmas: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            angle_deg: 1.0,
            longitudinal_velocity_m_s: 500.0,
            focal_length_mm: 100.0,
            aperture_mm: 6.3,
            center_x_um: 5.0,
            delay_sigmas: 1.5,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsSection {
    /// 3, 7, 9 or 11.
    pub model: usize,
    pub target_j: u32,
    /// `|s⟩ = |ν=1, J + partner_delta_j⟩`.
    pub partner_delta_j: i32,
    /// One-photon detuning of the target from its intermediate level.
    pub delta_p_cm: f64,
    /// Excited-state decay Γ/2π.
    pub decay_MHz: f64,
    pub coupling_scale: f64,
    /// Ground rotational levels analysed by `eigen` and `follow`; empty
    /// means the target and its J + 1 neighbour.
    pub states_j: Vec<u32>,
    /// Synthetic Λ systems with these two-photon offsets (δ_two/2π) replace
    /// `states_j` when non-empty.
    pub delta_two_MHz: Vec<f64>,
    pub counter_rotating: bool,
    pub pulse_mixing: bool,
}

impl Default for LevelsSection {
    fn default() -> Self {
        LevelsSection {
            model: 3,
            target_j: 0,
            partner_delta_j: 0,
            delta_p_cm: 300.0,
            decay_MHz: 0.0,
            coupling_scale: 1.0,
            states_j: Vec::new(),
            delta_two_MHz: Vec::new(),
            counter_rotating: false,
            pulse_mixing: false,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// STIRAP sequence shape.
    pub mode: ScheduleMode,
    pub ramp_us: f64,
    pub plateau_us: f64,
    /// Peak Rabi frequencies Ω/2π of the STIRAP pulses.
    pub rabi_p_MHz: f64,
    pub rabi_c_MHz: f64,
    /// One-photon detuning Δ/2π used by the STIRAP run.
    pub detuning_MHz: f64,
    pub method: Method,
    /// Fixed step for `rk4`/`dormand_prince54`, ns; ignored by the adaptive Magnus run.
    pub dt_ns: f64,
    pub rtol: f64,
    /// Output samples per run.
    pub samples: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            mode: ScheduleMode::CompleteTransferBack,
            ramp_us: 0.5,
            plateau_us: 1.0,
            rabi_p_MHz: 30.0,
            rabi_c_MHz: 30.0,
            detuning_MHz: 0.0,
            method: Method::Magnus4,
            dt_ns: 0.05,
            rtol: 1e-9,
            samples: 600,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamlineSection {
    pub temperature_K: f64,
    pub molecules: usize,
    pub j_max: u32,
    pub velocity_spread_fraction: f64,
    pub slit_positions_m: [f64; 3],
    pub slit_widths_um: [f64; 3],
    pub slit_centers_um: [f64; 3],
    pub station_m: f64,
    pub dt_ns: f64,
    pub record_every: usize,
    pub x_min_um: f64,
    pub x_max_um: f64,
    pub grid_nx: usize,
    pub grid_nt: usize,
    /// Interpolation table size `[nx, nt]`; `[0, 0]` evaluates surfaces directly.
    pub table: [usize; 2],
    pub lasers_on: bool,
    /// Trajectories written to CSV per internal state.
    pub csv_per_state: usize,
}

impl Default for BeamlineSection {
    fn default() -> Self {
        BeamlineSection {
            temperature_K: 5.0,
            molecules: 10_000,
            j_max: 20,
            velocity_spread_fraction: 0.1,
            slit_positions_m: [0.0, 0.5, 0.8],
            slit_widths_um: [5.0; 3],
            slit_centers_um: [0.0; 3],
            station_m: 0.52,
            dt_ns: 20.0,
            record_every: 10,
            x_min_um: -15.0,
            x_max_um: 15.0,
            grid_nx: 61,
            grid_nt: 241,
            table: [241, 481],
            lasers_on: true,
            csv_per_state: 25,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Li6Section {
    pub split_MHz: f64,
    pub target_fraction: f64,
}

impl Default for Li6Section {
    fn default() -> Self {
        Li6Section {
            split_MHz: 75.0,
            target_fraction: 0.5,
        }
    }
}

/// Grid axes; an empty list keeps the base value.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub power_W: Vec<f64>,
    pub waist_um: Vec<f64>,
    pub delta_p_cm: Vec<f64>,
    pub temperature_K: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub molecule: MoleculeSpec,
    #[serde(default = "BeamSection::probe")]
    pub probe: BeamSection,
    #[serde(default = "BeamSection::control")]
    pub control: BeamSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub levels: LevelsSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub beamline: BeamlineSection,
    #[serde(default)]
    pub li6: Li6Section,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run: RunSection::default(),
            molecule: MoleculeSpec::lirb(),
            probe: BeamSection::probe(),
            control: BeamSection::control(),
            geometry: GeometrySection::default(),
            levels: LevelsSection::default(),
            schedule: ScheduleSection::default(),
            beamline: BeamlineSection::default(),
            li6: Li6Section::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// 1-based line of `key` inside `[section]`, if it appears in `src`.
pub fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// A configuration together with the text it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: String,
    pub origin: String,
}

impl LoadedConfig {
    pub fn from_str(source: &str, origin: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(source)
            .map_err(|e| Error::Config(format!("{origin}: {}", e.to_string().trim_end())))?;
        let loaded = LoadedConfig {
            config,
            source: source.to_string(),
            origin: origin.to_string(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text, &path.display().to_string())
    }

    /// Defaults only, as if from an empty file.
    pub fn defaults() -> Self {
        LoadedConfig {
            config: RunConfig::default(),
            source: String::new(),
            origin: "<defaults>".into(),
        }
    }

    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        match locate(&self.source, section, key).or_else(|| locate(&self.source, section, "")) {
            Some(line) => {
                Error::Config(format!("{}:{line}: [{section}] {key}: {msg}", self.origin))
            }
            None => Error::Config(format!("{}: [{section}] {key}: {msg}", self.origin)),
        }
    }

    /// Cross-field checks; runs before any computation.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.molecule
            .validate()
            .map_err(|e| self.err("molecule", "", e))?;
        for (name, b) in [("probe", &c.probe), ("control", &c.control)] {
            if !(b.power_W >= 0.0) {
                return Err(self.err(name, "power_W", "must be >= 0"));
            }
            if !(b.waist_um > 0.0) {
                return Err(self.err(name, "waist_um", "must be > 0"));
            }
            if !(b.wavelength_nm > 0.0) {
                return Err(self.err(name, "wavelength_nm", "must be > 0"));
            }
        }
        let g = &c.geometry;
        if !(g.angle_deg > 0.0 && g.angle_deg < 90.0) {
            return Err(self.err("geometry", "angle_deg", "must lie in (0, 90)"));
        }
        if !(g.longitudinal_velocity_m_s > 0.0) {
            return Err(self.err("geometry", "longitudinal_velocity_m_s", "must be > 0"));
        }
        if !(g.delay_sigmas > 0.0) {
            return Err(self.err(
                "geometry",
                "delay_sigmas",
                "counter-intuitive ordering needs the control before the probe (delay > 0)",
            ));
        }
        let l = &c.levels;
        ModelSize::from_dim(l.model).map_err(|e| self.err("levels", "model", e))?;
        if l.delta_p_cm == 0.0 {
            return Err(self.err(
                "levels",
                "delta_p_cm",
                "the dispersive scheme needs a non-zero one-photon detuning",
            ));
        }
        if !(l.decay_MHz >= 0.0) {
            return Err(self.err("levels", "decay_MHz", "must be >= 0"));
        }
        if !(l.coupling_scale > 0.0) {
            return Err(self.err("levels", "coupling_scale", "must be > 0"));
        }
        if (l.target_j as i64 + l.partner_delta_j as i64) < 0 {
            return Err(self.err(
                "levels",
                "partner_delta_j",
                "target has no Raman partner with this offset",
            ));
        }
        if !l.delta_two_MHz.is_empty() && l.model != 3 {
            return Err(self.err(
                "levels",
                "delta_two_MHz",
                "synthetic offsets are only defined for model 3",
            ));
        }

        let s = &c.schedule;
        if s.samples < 2 {
            return Err(self.err("schedule", "samples", "need at least 2"));
        }
        if !(s.rtol > 0.0) {
            return Err(self.err("schedule", "rtol", "must be > 0"));
        }
        self.stirap_schedule()
            .validate()
            .map_err(|e| self.err("schedule", "mode", e))?;
        if s.method != Method::Magnus4 {
            let omega =
                2.0 * std::f64::consts::PI * 1e6 * s.rabi_p_MHz.abs().max(s.rabi_c_MHz.abs());
            let scale = omega.max(2.0 * std::f64::consts::PI * 1e6 * s.detuning_MHz.abs());
            if !(s.dt_ns / 1e9 < 0.05 / scale) {
                return Err(self.err(
                    "schedule",
                    "dt_ns",
                    format!(
                        "explicit integrators need dt < 0.05/max(|Δ|, Ω) = {:.3e} ns",
                        0.05 / scale * 1e9
                    ),
                ));
            }
        }

        let b = &c.beamline;
        if !(b.temperature_K > 0.0) {
            return Err(self.err("beamline", "temperature_K", "must be > 0"));
        }
        if b.molecules == 0 {
            return Err(self.err("beamline", "molecules", "must be > 0"));
        }
        if !(b.velocity_spread_fraction >= 0.0) {
            return Err(self.err("beamline", "velocity_spread_fraction", "must be >= 0"));
        }
        let p = b.slit_positions_m;
        if !(p[0] < p[1] && p[1] < p[2]) {
            return Err(self.err("beamline", "slit_positions_m", "must increase strictly"));
        }
        if b.slit_widths_um.iter().any(|&w| !(w > 0.0)) {
            return Err(self.err("beamline", "slit_widths_um", "must be > 0"));
        }
        if !(b.station_m > p[1] && b.station_m < p[2]) {
            return Err(self.err(
                "beamline",
                "station_m",
                "the laser crossing must sit between slits 2 and 3",
            ));
        }
        let sigma = self
            .lasers()
            .sigma_t()
            .map_err(|e| self.err("geometry", "angle_deg", e))?;
        if !(b.dt_ns > 0.0 && b.dt_ns / 1e9 <= sigma / 10.0) {
            return Err(self.err(
                "beamline",
                "dt_ns",
                format!(
                    "must resolve the crossing time: need 0 < dt <= sigma_t/10 = {:.1} ns",
                    sigma / 10.0 * 1e9
                ),
            ));
        }
        if b.grid_nx < 3 || b.grid_nt < 3 {
            return Err(self.err(
                "beamline",
                "grid_nx",
                "surface grids need at least 3 points per axis",
            ));
        }
        if b.table != [0, 0] && (b.table[0] < 4 || b.table[1] < 4) {
            return Err(self.err(
                "beamline",
                "table",
                "needs at least 4 nodes per axis, or [0, 0] to disable",
            ));
        }
        // the surface must cover the beam at the station and the laser centre
        let reach = self.beam_half_width_at(b.station_m);
        let lo = b.slit_centers_um[1] / 1e6 - reach;
        let hi = b.slit_centers_um[1] / 1e6 + reach;
        let cx = g.center_x_um / 1e6;
        if !(b.x_min_um / 1e6 <= lo.min(cx) && b.x_max_um / 1e6 >= hi.max(cx)) {
            return Err(self.err(
                "beamline",
                "x_min_um",
                format!(
                    "surface range [{}, {}] um does not cover the beam ({:.1}..{:.1} um) and the laser centre",
                    b.x_min_um,
                    b.x_max_um,
                    lo.min(cx) * 1e6,
                    hi.max(cx) * 1e6
                ),
            ));
        }
        if !(c.li6.split_MHz >= 0.0) {
            return Err(self.err("li6", "split_MHz", "must be >= 0"));
        }
        if !(c.li6.target_fraction > 0.0 && c.li6.target_fraction < 1.0) {
            return Err(self.err("li6", "target_fraction", "must lie in (0, 1)"));
        }
        let sw = &c.sweep;
        for (key, v) in [
            ("power_W", &sw.power_W),
            ("waist_um", &sw.waist_um),
            ("temperature_K", &sw.temperature_K),
        ] {
            if v.iter().any(|&x| !(x > 0.0)) {
                return Err(self.err("sweep", key, "values must be > 0"));
            }
        }
        if sw.delta_p_cm.iter().any(|&x| x == 0.0 || !x.is_finite()) {
            return Err(self.err("sweep", "delta_p_cm", "values must be finite and non-zero"));
        }
        Ok(())
    }

    /// Largest transverse offset a straight line through slits 1 and 2 can
    /// have at longitudinal position `z`, m.
    fn beam_half_width_at(&self, z: f64) -> f64 {
        let b = &self.config.beamline;
        let (a1, a2) = (
            0.5 * b.slit_widths_um[0] / 1e6,
            0.5 * b.slit_widths_um[1] / 1e6,
        );
        let l12 = b.slit_positions_m[1] - b.slit_positions_m[0];
        let c = (b.slit_centers_um[0] - b.slit_centers_um[1]).abs() / 1e6;
        let slope = (a1 + a2 + c) / l12;
        a2 + slope * (z - b.slit_positions_m[1]).abs()
    }

    pub fn model(&self) -> ModelSize {
        ModelSize::from_dim(self.config.levels.model).expect("validated")
    }

    pub fn target(&self) -> RoLevel {
        RoLevel::ground(0, self.config.levels.target_j)
    }

    pub fn partner(&self) -> RamanPartner {
        match self.config.levels.partner_delta_j {
            0 => RamanPartner::SameJ,
            d => RamanPartner::DeltaJ(d),
        }
    }

    pub fn delta_p(&self) -> f64 {
        wavenumber_to_angular(self.config.levels.delta_p_cm)
    }

    pub fn options(&self) -> ExtendedOptions {
        ExtendedOptions {
            counter_rotating: self.config.levels.counter_rotating,
            pulse_mixing: self.config.levels.pulse_mixing,
            explicit_counter_rotating: false,
        }
    }

    pub fn crossing(&self) -> BeamGeometry {
        let g = &self.config.geometry;
        BeamGeometry {
            crossing_angle: g.angle_deg.to_radians(),
            longitudinal_velocity: g.longitudinal_velocity_m_s,
            focal_length: g.focal_length_mm / 1e3,
            aperture_diameter: g.aperture_mm / 1e3,
        }
    }

    pub fn lasers(&self) -> DressingLasers {
        DressingLasers {
            probe: self.config.probe.beam(),
            control: self.config.control.beam(),
            delta_p: self.delta_p(),
            delay_sigmas: self.config.geometry.delay_sigmas,
            center_x: self.config.geometry.center_x_um / 1e6,
            crossing: self.crossing(),
        }
    }

    /// Systems analysed by `eigen` and `follow`, labelled.
    pub fn systems(&self) -> Result<Vec<(String, LevelSystem)>> {
        let l = &self.config.levels;
        let gamma = 2.0 * std::f64::consts::PI * 1e6 * l.decay_MHz;
        let finish = |mut s: LevelSystem| {
            s.coupling_scale = l.coupling_scale;
            s.with_decay(gamma)
        };
        if !l.delta_two_MHz.is_empty() {
            return Ok(l
                .delta_two_MHz
                .iter()
                .map(|&d| {
                    let s = LevelSystem::lambda(
                        self.delta_p(),
                        mhz_to_angular(d),
                        self.config.molecule.dipole_ge(),
                        self.config.molecule.dipole_se(),
                    );
                    (format!("delta_two={d}MHz"), finish(s))
                })
                .collect());
        }
        let js = if l.states_j.is_empty() {
            vec![l.target_j, l.target_j + 1]
        } else {
            l.states_j.clone()
        };
        js.iter()
            .map(|&j| {
                let s = LevelSystem::ladder(
                    self.model(),
                    &self.config.molecule,
                    self.target(),
                    RoLevel::ground(0, j),
                    self.delta_p(),
                    self.partner(),
                )?;
                Ok((format!("J={j}"), finish(s)))
            })
            .collect()
    }

    pub fn stirap_schedule(&self) -> PulseSchedule {
        let s = &self.config.schedule;
        PulseSchedule::symmetric(0.0, s.ramp_us / 1e6, s.plateau_us / 1e6, s.mode)
    }

    /// Time span of the STIRAP run.
    pub fn stirap_span(&self) -> (f64, f64) {
        let s = &self.config.schedule;
        let ramp = s.ramp_us / 1e6;
        let end = match s.mode {
            ScheduleMode::HoldSuperposition => 2.0 * ramp + s.plateau_us / 1e6,
            ScheduleMode::CompleteTransferBack => 4.0 * ramp + s.plateau_us / 1e6,
        };
        (0.0, end)
    }

    pub fn propagation(&self, t0: f64, t1: f64) -> PropagationConfig {
        let s = &self.config.schedule;
        let sample = (t1 - t0) / s.samples as f64;
        let mut cfg = PropagationConfig::adaptive(t0, t1, sample);
        if s.method == Method::Magnus4 {
            if let StepControl::Adaptive {
                atol,
                dt_initial,
                dt_min,
                dt_max,
                ..
            } = cfg.step
            {
                cfg.step = StepControl::Adaptive {
                    rtol: s.rtol,
                    atol,
                    dt_initial,
                    dt_min,
                    dt_max,
                };
            }
        } else {
            cfg.method = s.method;
            cfg.step = StepControl::Fixed { dt: s.dt_ns / 1e9 };
        }
        cfg.options = self.options();
        cfg
    }

    pub fn purification_setup(&self) -> PurificationSetup {
        let b = &self.config.beamline;
        let mut ensemble = EnsembleParams::new(
            b.temperature_K,
            b.molecules,
            self.config.run.seed,
            self.config.levels.target_j,
        );
        ensemble.j_max = b.j_max;
        ensemble.partner = self.partner();
        ensemble.v_long_mean = self.config.geometry.longitudinal_velocity_m_s;
        ensemble.v_long_spread = b.velocity_spread_fraction;
        PurificationSetup {
            spec: self.config.molecule.clone(),
            lasers: self.lasers(),
            geometry: SlitGeometry {
                slit_positions: b.slit_positions_m,
                slit_widths: b.slit_widths_um.map(|w| w / 1e6),
                slit_centers: b.slit_centers_um.map(|w| w / 1e6),
                interaction_station: b.station_m,
            },
            ensemble,
            model: self.model(),
            grid: SurfaceGrid {
                x_min: b.x_min_um / 1e6,
                x_max: b.x_max_um / 1e6,
                nx: b.grid_nx,
                nt: b.grid_nt,
            },
            dt: b.dt_ns / 1e9,
            record_every: b.record_every,
            tabulate: if b.table == [0, 0] {
                None
            } else {
                Some((b.table[0], b.table[1]))
            },
            lasers_on: b.lasers_on,
        }
    }

    /// Canonical JSON of the resolved configuration.
    ///
    /// `run.svg_timestamp` only affects SVG presentation and is left out, so
    /// toggling it does not change the hash or the CSV/JSON headers.
    pub fn resolved_json(&self) -> String {
        let mut v = serde_json::to_value(&self.config).expect("config serializes");
        if let Some(run) = v.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("svg_timestamp");
        }
        serde_json::to_string(&v).expect("config serializes")
    }

    /// SHA-256 of [`Self::resolved_json`], hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = LoadedConfig::from_str("", "t.toml").unwrap();
        assert_eq!(c.config, RunConfig::default());
        assert_eq!(c.hash(), LoadedConfig::defaults().hash());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let src = "[run]\nseed = 3\n\n[probe]\npower_W = \"lots\"\n";
        let e = LoadedConfig::from_str(src, "t.toml")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 5"), "{e}");
        let src = "[beamline]\nmolecules = 10\nbogus_key = 1\n";
        let e = LoadedConfig::from_str(src, "t.toml")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3") && e.contains("bogus_key"), "{e}");
    }

    #[test]
    fn cross_field_errors_point_at_the_key() {
        let src = "[run]\nmode = \"beamline\"\n\n[beamline]\nmolecules = 100\ndt_ns = 900\n";
        let e = LoadedConfig::from_str(src, "t.toml").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("t.toml:6:"), "{e}");

        let src = "[geometry]\ndelay_sigmas = -1.0\n";
        let e = LoadedConfig::from_str(src, "t.toml")
            .unwrap_err()
            .to_string();
        assert!(
            e.contains("t.toml:2:") && e.contains("counter-intuitive"),
            "{e}"
        );

        let src = "[beamline]\nx_min_um = -1.0\n";
        assert!(LoadedConfig::from_str(src, "t.toml").is_err());

        let src = "[schedule]\nmethod = \"rk4\"\ndt_ns = 10.0\n";
        let e = LoadedConfig::from_str(src, "t.toml")
            .unwrap_err()
            .to_string();
        assert!(e.contains("t.toml:3:"), "{e}");
    }

    #[test]
    fn hashes_follow_content_not_formatting() {
        let a = LoadedConfig::from_str("[run]\nseed = 4\n", "a").unwrap();
        let b = LoadedConfig::from_str("# comment\n[run]\nseed    =   4\n", "b").unwrap();
        let c = LoadedConfig::from_str("[run]\nseed = 5\n", "c").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn synthetic_and_ladder_systems() {
        let c = LoadedConfig::from_str("[levels]\ndelta_two_MHz = [0.0, -90.0]\n", "t").unwrap();
        let s = c.systems().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].1.delta_two(), 0.0);
        assert!((s[1].1.delta_two() + mhz_to_angular(90.0)).abs() < 1e-3);
        let c = LoadedConfig::defaults();
        let s = c.systems().unwrap();
        assert_eq!(s[0].0, "J=0");
        assert_eq!(s[1].0, "J=1");
        assert!(s[1].1.delta_two() < 0.0);
    }

    #[test]
    fn setup_matches_library_defaults() {
        let setup = LoadedConfig::defaults().purification_setup();
        let lib = PurificationSetup::lirb(0, 10_000, 1);
        assert_eq!(setup.geometry, lib.geometry);
        assert_eq!(setup.grid, lib.grid);
        assert_eq!(setup.lasers, lib.lasers);
        assert_eq!(setup.dt, lib.dt);
    }
}
