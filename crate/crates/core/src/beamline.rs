//! Classical transverse motion of a thermal molecular beam through three
//! collimating slits and the dressing lasers, and purification statistics.
//!
//! Longitudinal coordinate `z`, transverse coordinate `X`. Each internal
//! state moves on the dressed potential surface of the branch connected to
//! its bare ground level. A surface is parametrised by the time `τ` of a
//! molecule at nominal speed; a molecule at longitudinal position `z` sees
//! the fields at `τ = (z − z_laser)/v_nominal`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{force, potential_surface, DressingContext, Landscape, PotentialSurface};
use crate::error::{Error, Result};
use crate::field::{peak_amplitude, BeamGeometry, FieldProfile, FieldRole};
use crate::hamiltonian::{rabi_frequency, ExtendedOptions, LevelSystem, ModelSize};
use crate::molecule::{
    thermal_populations, two_photon_offset, MoleculeSpec, RamanPartner, RoLevel,
};
use crate::tdse::{following_curve, CrossingDrive, PropagationConfig};
use crate::units::{mhz_to_angular, wavenumber_to_angular, BOLTZMANN, HBAR, SPEED_OF_LIGHT};

/// Returned instead of infinity when the transverse velocity is zero.
pub const RATIO_SENTINEL: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitGeometry {
    /// Longitudinal positions of the three slits, m.
    pub slit_positions: [f64; 3],
    /// Full widths, m.
    pub slit_widths: [f64; 3],
    /// Transverse centres, m.
    pub slit_centers: [f64; 3],
    /// Longitudinal position of the laser crossing, m.
    pub interaction_station: f64,
}

impl Default for SlitGeometry {
    fn default() -> Self {
        SlitGeometry {
            slit_positions: [0.0, 0.5, 0.8],
            slit_widths: [5e-6, 5e-6, 5e-6],
            slit_centers: [0.0; 3],
            interaction_station: 0.52,
        }
    }
}

impl SlitGeometry {
    pub fn validate(&self) -> Result<()> {
        let p = self.slit_positions;
        if !(p[0] < p[1] && p[1] < p[2]) {
            return Err(Error::Config(format!(
                "slit positions must increase strictly, got {p:?}"
            )));
        }
        if self.slit_widths.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("slit widths must be positive".into()));
        }
        if !(self.interaction_station > p[1] && self.interaction_station < p[2]) {
            return Err(Error::Config(
                "the laser station must sit between slits 2 and 3".into(),
            ));
        }
        Ok(())
    }

    fn passes(&self, k: usize, x: f64) -> bool {
        (x - self.slit_centers[k]).abs() <= 0.5 * self.slit_widths[k]
    }

    /// Transverse velocity spread left by slits 1 and 2 for a given
    /// longitudinal speed (half the angular acceptance, as a 1σ width).
    pub fn collimated_spread(&self, v_long: f64) -> f64 {
        let l12 = self.slit_positions[1] - self.slit_positions[0];
        v_long * 0.5 * (self.slit_widths[0] + self.slit_widths[1]) / (2.0 * l12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub temperature: f64,
    pub count: usize,
    pub seed: u64,
    pub j_max: u32,
    pub target: RoLevel,
    pub partner: RamanPartner,
    pub v_long_mean: f64,
    /// Relative 1σ spread of the longitudinal velocity.
    pub v_long_spread: f64,
}

impl EnsembleParams {
    pub fn new(temperature: f64, count: usize, seed: u64, target_j: u32) -> Self {
        EnsembleParams {
            temperature,
            count,
            seed,
            j_max: 20,
            target: RoLevel::ground(0, target_j),
            partner: RamanPartner::SameJ,
            v_long_mean: 500.0,
            v_long_spread: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSample {
    pub index: usize,
    pub internal_state: RoLevel,
    /// Two-photon offset under the current tuning, rad/s.
    pub delta_two: f64,
    pub transverse_position: f64,
    pub transverse_velocity: f64,
    pub longitudinal_velocity: f64,
    pub weight: f64,
}

fn molecule_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draw `count` molecules. Only `ν = 0` is populated; positions are uniform
/// across slit 1, transverse velocities Gaussian with the smaller of the
/// thermal and the collimated spread.
pub fn sample_ensemble(
    spec: &MoleculeSpec,
    geometry: &SlitGeometry,
    params: &EnsembleParams,
) -> Result<Vec<MoleculeSample>> {
    let pops = thermal_populations(spec, params.temperature, params.j_max)?;
    let mut levels = Vec::with_capacity(pops.len());
    for (j, p) in pops.into_iter().enumerate() {
        let g = RoLevel::ground(0, j as u32);
        levels.push((
            g,
            mhz_to_angular(two_photon_offset(spec, params.target, g, params.partner)?),
            p,
        ));
    }
    sample_levels(spec, geometry, params, &levels)
}

/// Like [`sample_ensemble`] with explicit `(level, δ_two, population)`
/// entries instead of the thermal rotational ladder. The temperature still
/// sets the transverse velocity spread.
pub fn sample_levels(
    spec: &MoleculeSpec,
    geometry: &SlitGeometry,
    params: &EnsembleParams,
    levels: &[(RoLevel, f64, f64)],
) -> Result<Vec<MoleculeSample>> {
    if params.count == 0 {
        return Err(Error::Config("ensemble size must be positive".into()));
    }
    if !(params.temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be > 0 K, got {}",
            params.temperature
        )));
    }
    geometry.validate()?;
    let chooser = WeightedIndex::new(levels.iter().map(|l| l.2))
        .map_err(|e| Error::Config(format!("state populations: {e}")))?;
    let mass = spec.mass_kg();
    let thermal_v = (BOLTZMANN * params.temperature / mass).sqrt();
    let v_dist = Normal::new(
        params.v_long_mean,
        params.v_long_spread * params.v_long_mean,
    )
    .map_err(|e| Error::Config(format!("longitudinal velocity distribution: {e}")))?;
    let w = 1.0 / params.count as f64;
    let half = 0.5 * geometry.slit_widths[0];
    let samples = (0..params.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = molecule_rng(params.seed, i);
            let (level, delta_two, _) = levels[chooser.sample(&mut rng)];
            let mut vz = v_dist.sample(&mut rng);
            while vz <= 0.0 {
                vz = v_dist.sample(&mut rng);
            }
            let sigma_t = thermal_v.min(geometry.collimated_spread(vz));
            let x = geometry.slit_centers[0] + rng.gen_range(-half..=half);
            let vt = if sigma_t > 0.0 {
                sigma_t * rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                0.0
            };
            MoleculeSample {
                index: i,
                internal_state: level,
                delta_two,
                transverse_position: x,
                transverse_velocity: vt,
                longitudinal_velocity: vz,
                weight: w,
            }
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Transmitted,
    /// Blocked at slit `k` (0-based).
    BlockedSlit(usize),
    /// Left the transverse domain of the potential surface.
    DeflectedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoleculeTrajectory {
    /// `(t, X, v)` samples; `t = 0` at slit 1.
    pub samples: Vec<(f64, f64, f64)>,
    pub outcome: Outcome,
    /// Transverse position reached at slit 3 (or where the molecule stopped).
    pub final_position: f64,
    /// `X` at slit 3 minus the field-free straight-line prediction.
    pub deflection: f64,
    pub peak_force: f64,
}

/// Everything a trajectory needs besides the molecule.
#[derive(Clone)]
pub struct Beamline {
    pub geometry: SlitGeometry,
    pub mass: f64,
    pub v_nominal: f64,
    /// Lab-frame time step inside the laser region, s.
    pub dt: f64,
    /// Store every n-th integration step in the trajectory.
    pub record_every: usize,
    /// Potential per ground rotational level; missing levels feel no force.
    pub surfaces: BTreeMap<u32, Arc<dyn Landscape + Send + Sync>>,
    /// Surface time window `[τ₀, τ₁]` over which forces act.
    pub window: (f64, f64),
}

impl std::fmt::Debug for Beamline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Beamline")
            .field("geometry", &self.geometry)
            .field("mass", &self.mass)
            .field("v_nominal", &self.v_nominal)
            .field("dt", &self.dt)
            .field("states", &self.surfaces.keys().collect::<Vec<_>>())
            .field("window", &self.window)
            .finish()
    }
}

impl Beamline {
    fn surface_time(&self, z: f64) -> f64 {
        (z - self.geometry.interaction_station) / self.v_nominal
    }
}

/// Integrate one molecule from slit 1 to slit 3.
///
/// Outside the laser window the motion is ballistic and solved exactly;
/// inside, velocity Verlet with step `dt`.
pub fn propagate_trajectory(
    sample: &MoleculeSample,
    line: &Beamline,
) -> Result<MoleculeTrajectory> {
    let g = &line.geometry;
    let vz = sample.longitudinal_velocity;
    let z0 = g.slit_positions[0];
    let t_at = |z: f64| (z - z0) / vz;
    let land = line.surfaces.get(&sample.internal_state.j).cloned();
    let (x_lo, x_hi) = land
        .as_ref()
        .map(|l| l.x_range())
        .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let m = line.mass;

    let mut t = 0.0;
    let mut x = sample.transverse_position;
    let mut v = sample.transverse_velocity;
    let mut samples = vec![(t, x, v)];
    let mut peak_force = 0.0f64;
    let straight = |t: f64| sample.transverse_position + sample.transverse_velocity * t;

    let finish =
        |samples: Vec<(f64, f64, f64)>, outcome, x: f64, t: f64, peak_force| MoleculeTrajectory {
            samples,
            outcome,
            final_position: x,
            deflection: x - straight(t),
            peak_force,
        };

    if !g.passes(0, x) {
        return Ok(finish(samples, Outcome::BlockedSlit(0), x, t, 0.0));
    }
    // field window in lab time
    let z_in = g.interaction_station + line.v_nominal * line.window.0;
    let z_out = g.interaction_station + line.v_nominal * line.window.1;
    let (t_in, t_out) = (t_at(z_in.max(z0)), t_at(z_out.min(g.slit_positions[2])));

    for (k, &zk) in g.slit_positions.iter().enumerate().skip(1) {
        let tk = t_at(zk);
        // laser region between the previous position and this slit
        if let Some(l) = land.as_ref() {
            if t < t_out && tk > t_in {
                let t_start = t.max(t_in);
                // ballistic up to the window
                x += v * (t_start - t);
                t = t_start;
                samples.push((t, x, v));
                let t_stop = tk.min(t_out);
                let n = ((t_stop - t) / line.dt).ceil().max(1.0) as usize;
                let h = (t_stop - t) / n as f64;
                let accel = |x: f64, t: f64| -> Result<f64> {
                    let tau = line.surface_time(z0 + vz * t);
                    Ok(force(l.as_ref(), x, tau)? / m)
                };
                let mut a = accel(x, t)?;
                for step in 0..n {
                    let v_half = v + 0.5 * h * a;
                    x += h * v_half;
                    t += h;
                    if x < x_lo || x > x_hi {
                        samples.push((t, x, v_half));
                        return Ok(finish(samples, Outcome::DeflectedOut, x, t, peak_force));
                    }
                    a = accel(x, t)?;
                    v = v_half + 0.5 * h * a;
                    peak_force = peak_force.max((a * m).abs());
                    if line.record_every > 0 && (step + 1) % line.record_every == 0 {
                        samples.push((t, x, v));
                    }
                }
            }
        }
        x += v * (tk - t);
        t = tk;
        samples.push((t, x, v));
        if !g.passes(k, x) {
            return Ok(finish(samples, Outcome::BlockedSlit(k), x, t, peak_force));
        }
    }
    Ok(finish(samples, Outcome::Transmitted, x, t, peak_force))
}

/// `(ħΩ²_max/δ) / (5·m·v_t²/2)`; satisfied when above one.
pub fn separation_criterion(
    omega_max: f64,
    delta: f64,
    mass: f64,
    v_t: f64,
) -> Result<(bool, f64)> {
    if delta == 0.0 {
        return Err(Error::Domain(
            "separation criterion needs a non-zero detuning".into(),
        ));
    }
    let kinetic = 2.5 * mass * v_t * v_t;
    if kinetic == 0.0 {
        return Ok((true, RATIO_SENTINEL));
    }
    let ratio = HBAR * omega_max * omega_max / delta.abs() / kinetic;
    Ok((ratio > 1.0, ratio))
}

/// Relative Doppler spread `v/c`.
pub fn doppler_spread(v_spread: f64) -> f64 {
    v_spread / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRow {
    pub j: u32,
    pub delta_two_mhz: f64,
    pub launched: f64,
    pub transmitted: f64,
    pub transmission: f64,
    pub mean_deflection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurificationReport {
    /// Fraction of transmitted weight in the target state; `None` when
    /// nothing is transmitted.
    pub purity: Option<f64>,
    pub yield_fraction: f64,
    pub target_j: u32,
    pub input_target_fraction: f64,
    pub transmitted_weight: f64,
    pub table: Vec<StateRow>,
}

/// Weighted statistics. Sums run in molecule-index order so the result does
/// not depend on how trajectories were scheduled.
pub fn purification_report(
    ensemble: &[MoleculeSample],
    trajectories: &[MoleculeTrajectory],
    target: RoLevel,
) -> Result<PurificationReport> {
    if ensemble.len() != trajectories.len() {
        return Err(Error::Config(
            "ensemble and trajectory counts differ".into(),
        ));
    }
    let mut rows: BTreeMap<u32, (f64, f64, f64, f64, f64)> = BTreeMap::new();
    let (mut tot, mut tot_t, mut tgt, mut tgt_t) = (0.0, 0.0, 0.0, 0.0);
    for (s, tr) in ensemble.iter().zip(trajectories) {
        let j = s.internal_state.j;
        let pass = tr.outcome == Outcome::Transmitted;
        let e = rows.entry(j).or_insert((s.delta_two, 0.0, 0.0, 0.0, 0.0));
        e.1 += s.weight;
        tot += s.weight;
        if pass {
            e.2 += s.weight;
            e.3 += s.weight * tr.deflection;
            tot_t += s.weight;
        }
        e.4 += s.weight * tr.deflection;
        if s.internal_state == target {
            tgt += s.weight;
            if pass {
                tgt_t += s.weight;
            }
        }
    }
    let table = rows
        .into_iter()
        .map(|(j, (d2, l, t, _, defl))| StateRow {
            j,
            delta_two_mhz: crate::units::angular_to_mhz(d2),
            launched: l,
            transmitted: t,
            transmission: if l > 0.0 { t / l } else { 0.0 },
            mean_deflection: if l > 0.0 { defl / l } else { 0.0 },
        })
        .collect();
    Ok(PurificationReport {
        purity: if tot_t > 0.0 {
            Some(tgt_t / tot_t)
        } else {
            None
        },
        yield_fraction: if tgt > 0.0 { tgt_t / tgt } else { 0.0 },
        target_j: target.j,
        input_target_fraction: if tot > 0.0 { tgt / tot } else { 0.0 },
        transmitted_weight: tot_t,
        table,
    })
}

/// Propagate a whole ensemble in parallel (results in input order).
pub fn propagate_ensemble(
    ensemble: &[MoleculeSample],
    line: &Beamline,
) -> Result<Vec<MoleculeTrajectory>> {
    ensemble
        .par_iter()
        .map(|s| propagate_trajectory(s, line))
        .collect()
}

/// One laser beam of the crossing pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserBeam {
    /// W
    pub power: f64,
    /// 1/e² intensity radius, m
    pub waist: f64,
    /// m
    pub wavelength: f64,
}

/// The crossing laser pair as used in the beamline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressingLasers {
    pub probe: LaserBeam,
    pub control: LaserBeam,
    /// One-photon detuning of the target molecule, rad/s.
    pub delta_p: f64,
    /// Control-to-probe delay in units of σ_t.
    pub delay_sigmas: f64,
    /// Transverse offset of the beam centres from the molecular-beam axis, m.
    pub center_x: f64,
    pub crossing: BeamGeometry,
}

impl Default for DressingLasers {
    fn default() -> Self {
        DressingLasers {
            probe: LaserBeam {
                power: 0.8,
                waist: 10e-6,
                wavelength: 586e-9,
            },
            control: LaserBeam {
                power: 0.8,
                waist: 10e-6,
                wavelength: 592.8e-9,
            },
            delta_p: wavenumber_to_angular(300.0),
            delay_sigmas: 1.5,
            center_x: 5e-6,
            crossing: BeamGeometry::default(),
        }
    }
}

impl DressingLasers {
    /// The longer of the two crossing times; delays and windows are
    /// measured in this unit.
    pub fn sigma_t(&self) -> Result<f64> {
        Ok(self
            .crossing
            .crossing_sigma_t(self.probe.waist)?
            .max(self.crossing.crossing_sigma_t(self.control.waist)?))
    }

    /// Surface-time window over which the fields are resolved.
    pub fn window(&self) -> Result<(f64, f64)> {
        let s = self.sigma_t()?;
        let half = (0.5 * self.delay_sigmas + 5.0) * s;
        Ok((-half, half))
    }

    /// Probe and control profiles.
    pub fn profiles(&self) -> Result<(FieldProfile, FieldProfile)> {
        if !(self.delay_sigmas > 0.0) {
            return Err(Error::Config(format!(
                "counter-intuitive ordering needs a positive control-to-probe delay, got {} sigma",
                self.delay_sigmas
            )));
        }
        let s = self.sigma_t()?;
        let d = 0.5 * self.delay_sigmas * s;
        let beam = |role, b: &LaserBeam, ct| -> Result<FieldProfile> {
            Ok(FieldProfile {
                role,
                power: b.power,
                waist: b.waist,
                wavelength: b.wavelength,
                center_x: self.center_x,
                center_t: ct,
                sigma_t: self.crossing.crossing_sigma_t(b.waist)?,
                detuning: self.delta_p,
            })
        };
        let probe = beam(FieldRole::Probe, &self.probe, d)?;
        let control = beam(FieldRole::Control, &self.control, -d)?;
        probe.validate()?;
        control.validate()?;
        Ok((probe, control))
    }

    /// Peak one-photon Rabi frequency of the probe on the target, rad/s.
    pub fn peak_rabi(&self, spec: &MoleculeSpec) -> Result<f64> {
        let (p, _) = self.profiles()?;
        Ok(rabi_frequency(spec.dipole_ge(), peak_amplitude(&p)))
    }
}

/// Resolution of the precomputed surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        SurfaceGrid {
            x_min: -15e-6,
            x_max: 15e-6,
            nx: 61,
            nt: 241,
        }
    }
}

impl SurfaceGrid {
    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Dressing context seen by a molecule in ground level `g`.
pub fn dressing_context(
    spec: &MoleculeSpec,
    lasers: &DressingLasers,
    model: ModelSize,
    target: RoLevel,
    g: RoLevel,
    partner: RamanPartner,
) -> Result<DressingContext> {
    let system = LevelSystem::ladder(model, spec, target, g, lasers.delta_p, partner)?;
    let (probe, control) = lasers.profiles()?;
    Ok(DressingContext {
        system,
        probe,
        control,
        options: ExtendedOptions::default(),
    })
}

/// Potential surfaces of the branch connected to `|X, 0, J⟩` for each `J`.
pub fn build_surfaces(
    spec: &MoleculeSpec,
    lasers: &DressingLasers,
    model: ModelSize,
    target: RoLevel,
    partner: RamanPartner,
    js: &[u32],
    grid: &SurfaceGrid,
) -> Result<BTreeMap<u32, Arc<PotentialSurface>>> {
    if grid.nx < 3 || grid.nt < 3 || !(grid.x_max > grid.x_min) {
        return Err(Error::Config(
            "surface grid needs x_max > x_min and at least 3 points per axis".into(),
        ));
    }
    let (t0, t1) = lasers.window()?;
    let xs = SurfaceGrid::axis(grid.x_min, grid.x_max, grid.nx);
    let ts = SurfaceGrid::axis(t0, t1, grid.nt);
    let mut out = BTreeMap::new();
    for &j in js {
        let ctx = dressing_context(spec, lasers, model, target, RoLevel::ground(0, j), partner)?;
        out.insert(j, Arc::new(potential_surface(&ctx, 0, &xs, &ts)?));
    }
    Ok(out)
}

/// A surface sampled on a fine grid and interpolated with bicubic
/// Catmull-Rom patches. The interpolant is C¹, so forces taken from it are
/// the exact gradient of the energy a trajectory conserves.
#[derive(Debug, Clone)]
pub struct TabulatedLandscape {
    x0: f64,
    dx: f64,
    t0: f64,
    dt: f64,
    nx: usize,
    nt: usize,
    /// `values[ix * nt + it]`, rad/s.
    values: Vec<f64>,
    outside: f64,
    step: f64,
}

impl TabulatedLandscape {
    /// Sample `land` on `nx × nt` nodes spanning its X range and `[t0, t1]`.
    /// Outside `[t0, t1]` the energy is the value `outside`.
    pub fn sample<L: Landscape + ?Sized>(
        land: &L,
        nx: usize,
        t0: f64,
        t1: f64,
        nt: usize,
        outside: f64,
    ) -> Result<Self> {
        if nx < 4 || nt < 4 || !(t1 > t0) {
            return Err(Error::Config(
                "tabulated surface needs at least 4 nodes per axis".into(),
            ));
        }
        let (xa, xb) = land.x_range();
        let dx = (xb - xa) / (nx - 1) as f64;
        let dt = (t1 - t0) / (nt - 1) as f64;
        let rows: Vec<Result<Vec<f64>>> = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let x = xa + dx * ix as f64;
                (0..nt)
                    .map(|it| land.energy(x, t0 + dt * it as f64))
                    .collect()
            })
            .collect();
        let mut values = Vec::with_capacity(nx * nt);
        for r in rows {
            values.extend(r?);
        }
        Ok(TabulatedLandscape {
            x0: xa,
            dx,
            t0,
            dt,
            nx,
            nt,
            values,
            outside,
            step: dx / 8.0,
        })
    }

    fn node(&self, ix: isize, it: isize) -> f64 {
        let ix = ix.clamp(0, self.nx as isize - 1) as usize;
        let it = it.clamp(0, self.nt as isize - 1) as usize;
        self.values[ix * self.nt + it]
    }
}

fn catmull_rom(p: [f64; 4], u: f64) -> f64 {
    let [a, b, c, d] = p;
    b + 0.5 * u * (c - a + u * (2.0 * a - 5.0 * b + 4.0 * c - d + u * (3.0 * (b - c) + d - a)))
}

impl Landscape for TabulatedLandscape {
    fn energy(&self, x: f64, t: f64) -> Result<f64> {
        let tn = (t - self.t0) / self.dt;
        if !(tn >= 0.0 && tn <= (self.nt - 1) as f64) {
            return Ok(self.outside);
        }
        let xn = ((x - self.x0) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let (ix, it) = (
            xn.floor().min((self.nx - 2) as f64),
            tn.floor().min((self.nt - 2) as f64),
        );
        let (u, w) = (xn - ix, tn - it);
        let (ix, it) = (ix as isize, it as isize);
        let mut col = [0.0; 4];
        for (k, c) in col.iter_mut().enumerate() {
            let i = ix - 1 + k as isize;
            *c = catmull_rom(
                [
                    self.node(i, it - 1),
                    self.node(i, it),
                    self.node(i, it + 1),
                    self.node(i, it + 2),
                ],
                w,
            );
        }
        Ok(catmull_rom(col, u))
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn x_range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.dx * (self.nx - 1) as f64)
    }
}

/// A complete purification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationSetup {
    pub spec: MoleculeSpec,
    pub lasers: DressingLasers,
    pub geometry: SlitGeometry,
    pub ensemble: EnsembleParams,
    pub model: ModelSize,
    pub grid: SurfaceGrid,
    /// Verlet step inside the laser region, s.
    pub dt: f64,
    pub record_every: usize,
    /// Refine each surface onto an `(nx, nt)` interpolation table before
    /// propagating; `None` evaluates the dressed surface directly.
    pub tabulate: Option<(usize, usize)>,
    pub lasers_on: bool,
}

impl PurificationSetup {
    pub fn lirb(target_j: u32, count: usize, seed: u64) -> Self {
        PurificationSetup {
            spec: MoleculeSpec::lirb(),
            lasers: DressingLasers::default(),
            geometry: SlitGeometry::default(),
            ensemble: EnsembleParams::new(5.0, count, seed, target_j),
            model: ModelSize::Three,
            grid: SurfaceGrid::default(),
            dt: 2e-8,
            record_every: 10,
            tabulate: Some((241, 481)),
            lasers_on: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PurificationRun {
    pub ensemble: Vec<MoleculeSample>,
    pub trajectories: Vec<MoleculeTrajectory>,
    pub report: PurificationReport,
    pub beamline: Beamline,
}

/// Build the beamline (surfaces for every populated `J`) for a setup.
pub fn build_beamline(setup: &PurificationSetup, states: &[u32]) -> Result<Beamline> {
    let mut contexts = BTreeMap::new();
    if setup.lasers_on {
        for &j in states {
            let g = RoLevel::ground(0, j);
            contexts.insert(
                j,
                dressing_context(
                    &setup.spec,
                    &setup.lasers,
                    setup.model,
                    setup.ensemble.target,
                    g,
                    setup.ensemble.partner,
                )?,
            );
        }
    }
    beamline_from_contexts(setup, &contexts)
}

/// Beamline whose state `J` rides the ground branch of `contexts[J]`.
pub fn beamline_from_contexts(
    setup: &PurificationSetup,
    contexts: &BTreeMap<u32, DressingContext>,
) -> Result<Beamline> {
    setup.geometry.validate()?;
    if !(setup.dt > 0.0) {
        return Err(Error::Config("beamline time step must be positive".into()));
    }
    let grid = &setup.grid;
    if grid.nx < 3 || grid.nt < 3 || !(grid.x_max > grid.x_min) {
        return Err(Error::Config(
            "surface grid needs x_max > x_min and at least 3 points per axis".into(),
        ));
    }
    let window = setup.lasers.window()?;
    let xs = SurfaceGrid::axis(grid.x_min, grid.x_max, grid.nx);
    let ts = SurfaceGrid::axis(window.0, window.1, grid.nt);
    let mut surfaces: BTreeMap<u32, Arc<dyn Landscape + Send + Sync>> = BTreeMap::new();
    for (&j, ctx) in contexts {
        let surf = Arc::new(potential_surface(ctx, 0, &xs, &ts)?);
        let land: Arc<dyn Landscape + Send + Sync> = match setup.tabulate {
            Some((nx, nt)) => {
                let outside = surf.energy(0.0, window.1 + 1.0)?;
                Arc::new(TabulatedLandscape::sample(
                    surf.as_ref(),
                    nx,
                    window.0,
                    window.1,
                    nt,
                    outside,
                )?)
            }
            None => surf,
        };
        surfaces.insert(j, land);
    }
    Ok(Beamline {
        geometry: setup.geometry,
        mass: setup.spec.mass_kg(),
        v_nominal: setup.ensemble.v_long_mean,
        dt: setup.dt,
        record_every: setup.record_every,
        surfaces,
        window,
    })
}

fn populated(ensemble: &[MoleculeSample]) -> Vec<u32> {
    let set: std::collections::BTreeSet<u32> =
        ensemble.iter().map(|m| m.internal_state.j).collect();
    set.into_iter().collect()
}

/// Two synthetic ground states split by `split` (rad/s) in equal or given
/// proportion: label `J = 0` sits on Raman resonance, `J = 1` at
/// `δ_two = −split`. Fields, geometry and molecule come from `setup`.
pub fn resolution_demo(
    setup: &PurificationSetup,
    split: f64,
    target_fraction: f64,
) -> Result<PurificationRun> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::Config("target fraction must lie in (0, 1)".into()));
    }
    let (a, b) = (RoLevel::ground(0, 0), RoLevel::ground(0, 1));
    let levels = [
        (a, 0.0, target_fraction),
        (b, -split, 1.0 - target_fraction),
    ];
    let ensemble = sample_levels(&setup.spec, &setup.geometry, &setup.ensemble, &levels)?;
    let mut contexts = BTreeMap::new();
    if setup.lasers_on {
        let (probe, control) = setup.lasers.profiles()?;
        for (lvl, d2, _) in levels {
            let system = LevelSystem::lambda(
                setup.lasers.delta_p,
                d2,
                setup.spec.dipole_ge(),
                setup.spec.dipole_se(),
            );
            contexts.insert(
                lvl.j,
                DressingContext {
                    system,
                    probe: probe.clone(),
                    control: control.clone(),
                    options: ExtendedOptions::default(),
                },
            );
        }
    }
    let beamline = beamline_from_contexts(setup, &contexts)?;
    let trajectories = propagate_ensemble(&ensemble, &beamline)?;
    let report = purification_report(&ensemble, &trajectories, a)?;
    Ok(PurificationRun {
        ensemble,
        trajectories,
        report,
        beamline,
    })
}

/// Sample, propagate and score.
pub fn run_purification(setup: &PurificationSetup) -> Result<PurificationRun> {
    let ensemble = sample_ensemble(&setup.spec, &setup.geometry, &setup.ensemble)?;
    let beamline = build_beamline(setup, &populated(&ensemble))?;
    let trajectories = propagate_ensemble(&ensemble, &beamline)?;
    let report = purification_report(&ensemble, &trajectories, setup.ensemble.target)?;
    Ok(PurificationRun {
        ensemble,
        trajectories,
        report,
        beamline,
    })
}

/// Largest force magnitude on the interior nodes of a surface, N.
pub fn peak_force(surface: &PotentialSurface) -> Result<f64> {
    Ok(surface
        .grid_forces()?
        .iter()
        .flatten()
        .fold(0.0f64, |m, &f| m.max(f.abs())))
}

/// Surface of the ground-connected branch of `ctx` on the setup's grid.
pub fn ground_surface(
    setup: &PurificationSetup,
    ctx: &DressingContext,
) -> Result<PotentialSurface> {
    let (t0, t1) = setup.lasers.window()?;
    let g = &setup.grid;
    potential_surface(
        ctx,
        0,
        &SurfaceGrid::axis(g.x_min, g.x_max, g.nx),
        &SurfaceGrid::axis(t0, t1, g.nt),
    )
}

/// Adiabaticity check behind the classical picture: for each `J`, the
/// minimum projection of a TDSE run at transverse position `x` onto the
/// dressed branch whose surface the molecule is assumed to ride.
pub fn following_check(setup: &PurificationSetup, js: &[u32], x: f64) -> Result<Vec<(u32, f64)>> {
    let (t0, t1) = setup.lasers.window()?;
    let cfg = PropagationConfig::adaptive(t0, t1, (t1 - t0) / 400.0);
    let (probe, control) = setup.lasers.profiles()?;
    let drive = CrossingDrive { probe, control, x };
    js.par_iter()
        .map(|&j| {
            let ctx = dressing_context(
                &setup.spec,
                &setup.lasers,
                setup.model,
                setup.ensemble.target,
                RoLevel::ground(0, j),
                setup.ensemble.partner,
            )?;
            let curve = following_curve(&format!("J={j}"), &ctx.system, &drive, 0, &cfg)?;
            Ok((j, curve.min_followed()))
        })
        .collect()
}


#[cfg(test)]
mod lirb {
    use super::*;

    fn setup(target: u32) -> PurificationSetup {
        PurificationSetup::lirb(target, 2000, 5)
    }

    #[test]
    fn target_flies_straight_and_others_bend_towards_the_beam_centre() {
        let mut s = setup(0);
        s.tabulate = None;
        let line = build_beamline(&s, &[0, 1]).unwrap();
        let mol = |j: u32| MoleculeSample {
            index: 0,
            internal_state: RoLevel::ground(0, j),
            delta_two: 0.0,
            transverse_position: 0.0,
            transverse_velocity: 0.0,
            longitudinal_velocity: 500.0,
            weight: 1.0,
        };
        let dark = propagate_trajectory(&mol(0), &line).unwrap();
        assert_eq!(dark.outcome, Outcome::Transmitted);
        assert!(dark.samples.iter().all(|&(_, x, _)| x.abs() < 1e-9));
        let bent = propagate_trajectory(&mol(1), &line).unwrap();
        // the laser centre sits at +w0/2
        assert!(bent.deflection > 1e-6, "{}", bent.deflection);
        assert_ne!(bent.outcome, Outcome::Transmitted);
    }

    #[test]
    fn tabulated_surface_reproduces_direct_forces() {
        let s = setup(0);
        let surf = build_surfaces(
            &s.spec,
            &s.lasers,
            s.model,
            s.ensemble.target,
            s.ensemble.partner,
            &[1],
            &s.grid,
        )
        .unwrap()
        .remove(&1)
        .unwrap();
        let (t0, t1) = s.lasers.window().unwrap();
        let tab = TabulatedLandscape::sample(surf.as_ref(), 241, t0, t1, 481, 0.0).unwrap();
        let mut worst = 0.0f64;
        let mut peak = 0.0f64;
        for ix in 0..9 {
            for it in 0..9 {
                let x = -4e-6 + 1e-6 * ix as f64;
                let t = -1.6e-6 + 0.4e-6 * it as f64;
                let a = force(surf.as_ref(), x, t).unwrap();
                worst = worst.max((a - force(&tab, x, t).unwrap()).abs());
                peak = peak.max(a.abs());
            }
        }
        assert!(worst < 1e-3 * peak, "{worst:e} vs {peak:e}");
    }

    #[test]
    fn peak_force_grows_with_two_photon_offset() {
        let s = setup(0);
        let grid = SurfaceGrid {
            nx: 31,
            nt: 121,
            ..SurfaceGrid::default()
        };
        let js: Vec<u32> = (1..=7).collect();
        let surfaces = build_surfaces(
            &s.spec,
            &s.lasers,
            s.model,
            s.ensemble.target,
            s.ensemble.partner,
            &js,
            &grid,
        )
        .unwrap();
        let mut last = 0.0;
        for j in js {
            let f = peak_force(&surfaces[&j]).unwrap();
            assert!(f >= last, "J={j}: {f:e} < {last:e}");
            last = f;
        }
    }

    #[test]
    fn null_field_keeps_thermal_mix() {
        let mut s = setup(0);
        s.lasers_on = false;
        let run = run_purification(&s).unwrap();
        assert!(run.trajectories.iter().all(|t| t.deflection.abs() < 1e-15));
        let n = run
            .trajectories
            .iter()
            .filter(|t| t.outcome == Outcome::Transmitted)
            .count() as f64;
        let p = run.report.input_target_fraction;
        let purity = run.report.purity.unwrap();
        assert!(
            (purity - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt(),
            "{purity} vs {p}"
        );
    }

    #[test]
    fn molecules_follow_their_surfaces() {
        let s = setup(0);
        for (j, p) in following_check(&s, &[0, 1, 2], 0.0).unwrap() {
            assert!(p > 0.95, "J={j}: {p}");
        }
    }

    #[test]
    fn resolution_demo_separates_75_mhz() {
        let s = PurificationSetup::lirb(0, 2000, 4);
        let split = mhz_to_angular(75.0);
        let run = resolution_demo(&s, split, 0.5).unwrap();
        assert!(run.report.purity.unwrap() > 0.99);
        let same = resolution_demo(&s, 0.0, 0.5).unwrap();
        let n = same
            .trajectories
            .iter()
            .filter(|t| t.outcome == Outcome::Transmitted)
            .count() as f64;
        let p = same.report.input_target_fraction;
        assert!((same.report.purity.unwrap() - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt());
    }

    #[test]
    fn purification_is_deterministic() {
        let s = PurificationSetup::lirb(3, 300, 9);
        let a = run_purification(&s).unwrap();
        let b = run_purification(&s).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.trajectories, b.trajectories);
    }

    #[test]
    fn separation_criterion_at_lirb_parameters() {
        let s = setup(0);
        let omega = s.lasers.peak_rabi(&s.spec).unwrap();
        let m = s.spec.mass_kg();
        let v_coll = s.geometry.collimated_spread(500.0);
        let (ok, ratio) = separation_criterion(omega, s.lasers.delta_p, m, v_coll).unwrap();
        assert!(ok && ratio > 100.0, "{ratio}");
        let v_thermal = (BOLTZMANN * 5.0 / m).sqrt();
        let (ok, _) = separation_criterion(omega, s.lasers.delta_p, m, v_thermal).unwrap();
        assert!(!ok);
    }
}
