//! Experiment drivers behind the command-line subcommands. Each writes its
//! CSV/JSON/SVG files through an [`output::Writer`] and returns a JSON
//! summary.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::beamline::{
    doppler_spread, following_check, ground_surface, peak_force, resolution_demo, run_purification,
    separation_criterion, MoleculeTrajectory, Outcome, PurificationRun, PurificationSetup,
};
use crate::config::{LoadedConfig, Mode};
use crate::dressed::{eigensystem, DressingContext};
use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianMatrix, LevelSystem, ModelSize};
use crate::output::{num, Figure, Panel, Provenance, Series, Writer};
use crate::tdse::{
    adiabatic_following_report, stirap_sequence, unit_rabi, CrossingDrive, ScheduledDrive,
};
use crate::units::{angular_to_mhz, mhz_to_angular, BOLTZMANN, HBAR};

/// Files written and the headline numbers of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Run `mode` with the given configuration, writing into `out`.
pub fn run(mode: Mode, config: &LoadedConfig, out: &Path) -> Result<RunSummary> {
    let mut w = Writer::new(out, Provenance::new(config))?;
    let summary = match mode {
        Mode::Eigen => run_eigen(config, &mut w)?,
        Mode::Follow => run_follow(config, &mut w)?,
        Mode::Stirap => run_stirap(config, &mut w)?,
        Mode::Beamline => run_beamline(config, &mut w)?,
        Mode::Li6demo => run_li6demo(config, &mut w)?,
        Mode::Sweep => run_sweep(config, &mut w)?,
    };
    Ok(RunSummary {
        mode,
        files: w.written.iter().map(|p| p.display().to_string()).collect(),
        summary,
    })
}

fn contexts(config: &LoadedConfig) -> Result<Vec<(String, DressingContext)>> {
    let (probe, control) = config.lasers().profiles()?;
    Ok(config
        .systems()?
        .into_iter()
        .map(|(label, system)| {
            (
                label,
                DressingContext {
                    system,
                    probe: probe.clone(),
                    control: control.clone(),
                    options: config.options(),
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRow {
    pub label: String,
    pub delta_two_mhz: f64,
    pub dark_state_present: bool,
    /// Eigenvalues at the laser centre when both pulses are on, rad/s.
    pub eigenvalues: Vec<f64>,
    /// Deepest excursion of the ground-connected branch, rad/s and J.
    pub well_depth: f64,
    pub well_depth_joule: f64,
    pub well_depth_microkelvin: f64,
    pub peak_force: f64,
}

/// Dressed spectrum and ground-branch surface for each configured system.
pub fn run_eigen(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    let setup = config.purification_setup();
    let mut rows = Vec::new();
    let mut csv = Vec::new();
    let mut panels = Vec::new();
    for (label, ctx) in contexts(config)? {
        let sol = eigensystem(&HamiltonianMatrix {
            matrix: ctx.hamiltonian(ctx.probe.center_x, 0.0)?.matrix,
        })?;
        let surf = ground_surface(&setup, &ctx)?;
        let depth = surf.extremum_shift();
        rows.push(EigenRow {
            label: label.clone(),
            delta_two_mhz: angular_to_mhz(ctx.system.delta_two()),
            dark_state_present: sol.dark_index.is_some(),
            eigenvalues: sol.eigenvalues.clone(),
            well_depth: depth,
            well_depth_joule: HBAR * depth,
            well_depth_microkelvin: HBAR * depth / BOLTZMANN * 1e6,
            peak_force: peak_force(&surf)?,
        });
        for (x, t, e, idx) in surf.samples() {
            csv.push(vec![label.clone(), num(x), num(t), num(e), idx.to_string()]);
        }
        panels.push(Panel::Heatmap {
            title: format!("{label}: ground-branch energy (rad/s)"),
            x_label: "X (m)".into(),
            y_label: "t (s)".into(),
            x: surf.x_grid.clone(),
            y: surf.t_grid.clone(),
            values: surf.energies.clone(),
        });
    }
    w.csv(
        "surfaces.csv",
        &["system", "X_m", "t_s", "energy_J", "state_index"],
        &csv,
    )?;
    w.json("eigen_report.json", &rows)?;
    w.svg(
        "surfaces.svg",
        &Figure {
            title: "Dressed potential surfaces".into(),
            panels,
        },
    )?;
    Ok(serde_json::to_value(&rows).expect("serializable"))
}

/// TDSE through the crossing at the laser centre for each system, with the
/// projection onto the followed dressed branch.
pub fn run_follow(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    let lasers = config.lasers();
    let (probe, control) = lasers.profiles()?;
    let (t0, t1) = lasers.window()?;
    let drive = CrossingDrive {
        probe,
        control,
        x: lasers.center_x,
    };
    let cfg = config.propagation(t0, t1);
    let curves = adiabatic_following_report(&config.systems()?, &drive, &cfg)?;

    let mut header = vec!["t_s".to_string()];
    for c in &curves {
        header.push(format!("{}_followed", c.label));
        header.push(format!("{}_total", c.label));
        for k in 0..c.populations.first().map_or(0, |p| p.len()) {
            header.push(format!("{}_pop{k}", c.label));
        }
    }
    header.push("omega_p_rad_s".into());
    header.push("omega_c_rad_s".into());
    let sys0 = &config.systems()?[0].1;
    let (pp, pc) = unit_rabi(sys0);
    let n = curves.iter().map(|c| c.times.len()).min().unwrap_or(0);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let t = curves[0].times[i];
        let mut r = vec![num(t)];
        for c in &curves {
            r.push(num(c.followed_projection[i]));
            r.push(num(c.total_projection[i]));
            r.extend(c.populations[i].iter().map(|&p| num(p)));
        }
        let a = crate::tdse::Drive::amplitudes(&drive, t);
        r.push(num(pp * a.probe));
        r.push(num(pc * a.control));
        rows.push(r);
    }
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    w.csv("follow.csv", &hdr, &rows)?;

    let summary: Vec<Value> = curves
        .iter()
        .map(|c| {
            json!({
                "label": c.label,
                "delta_two_mhz": angular_to_mhz(c.delta_two),
                "min_followed_projection": c.min_followed(),
                "final_total_projection": c.total_projection.last().copied().unwrap_or(1.0),
                "total_non_increasing": c.total_non_increasing(1e-8),
            })
        })
        .collect();
    w.json("follow_report.json", &summary)?;
    let series = |f: &dyn Fn(&crate::tdse::FollowingCurve) -> &Vec<f64>| -> Vec<Series> {
        curves
            .iter()
            .map(|c| Series {
                label: c.label.clone(),
                points: c.times.iter().cloned().zip(f(c).iter().cloned()).collect(),
            })
            .collect()
    };
    let fields = vec![
        Series {
            label: "Omega_p".into(),
            points: rows
                .iter()
                .map(|r| (r[0].parse().unwrap(), r[r.len() - 2].parse().unwrap()))
                .collect(),
        },
        Series {
            label: "Omega_c".into(),
            points: rows
                .iter()
                .map(|r| (r[0].parse().unwrap(), r[r.len() - 1].parse().unwrap()))
                .collect(),
        },
    ];
    let fig = Figure {
        title: "Adiabatic following".into(),
        panels: vec![
            Panel::Lines {
                title: "Rabi frequencies".into(),
                x_label: "t (s)".into(),
                y_label: "rad/s".into(),
                series: fields,
            },
            Panel::Lines {
                title: "Projection on the followed dressed state".into(),
                x_label: "t (s)".into(),
                y_label: "projection".into(),
                series: series(&|c| &c.followed_projection),
            },
            Panel::Lines {
                title: "Total dressed projection".into(),
                x_label: "t (s)".into(),
                y_label: "norm".into(),
                series: series(&|c| &c.total_projection),
            },
        ],
    };
    w.svg("follow.svg", &fig)?;
    Ok(Value::Array(summary))
}

/// Trapezoidal STIRAP sequence on the three-level system.
pub fn run_stirap(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    if config.model() != ModelSize::Three {
        return Err(Error::WrongBuilder(
            "stirap runs on the 3-level model; use --model 3".into(),
        ));
    }
    let s = &config.config.schedule;
    let m = &config.config.molecule;
    let l = &config.config.levels;
    let mut system = LevelSystem::lambda(
        mhz_to_angular(s.detuning_MHz),
        0.0,
        m.dipole_ge(),
        m.dipole_se(),
    )
    .with_decay(2.0 * std::f64::consts::PI * 1e6 * l.decay_MHz);
    system.coupling_scale = l.coupling_scale;
    let (pp, pc) = unit_rabi(&system);
    let drive = ScheduledDrive {
        probe_peak: mhz_to_angular(s.rabi_p_MHz) / pp,
        control_peak: mhz_to_angular(s.rabi_c_MHz) / pc,
        schedule: config.stirap_schedule(),
    };
    let (t0, t1) = config.stirap_span();
    let rep = stirap_sequence(&system, &drive, &config.propagation(t0, t1))?;
    let rows: Vec<Vec<String>> = (0..rep.times.len())
        .map(|i| {
            vec![
                num(rep.times[i]),
                num(rep.population_g[i]),
                num(rep.population_e[i]),
                num(rep.population_s[i]),
                num(rep.omega_p[i]),
                num(rep.omega_c[i]),
            ]
        })
        .collect();
    w.csv(
        "stirap.csv",
        &[
            "t_s",
            "pop_g",
            "pop_e",
            "pop_s",
            "omega_p_rad_s",
            "omega_c_rad_s",
        ],
        &rows,
    )?;
    let summary = json!({
        "mode": s.mode,
        "final_population_g": rep.final_purity,
        "final_population_s": rep.population_s.last(),
        "plateau_ratio": rep.plateau_ratio,
        "expected_ratio": rep.expected_ratio,
        "min_dark_projection": rep.min_dark_projection,
    });
    w.json("stirap_report.json", &summary)?;
    let zip = |v: &Vec<f64>| {
        rep.times
            .iter()
            .cloned()
            .zip(v.iter().cloned())
            .collect::<Vec<_>>()
    };
    let fig = Figure {
        title: "STIRAP sequence".into(),
        panels: vec![
            Panel::Lines {
                title: "Rabi frequencies".into(),
                x_label: "t (s)".into(),
                y_label: "rad/s".into(),
                series: vec![
                    Series {
                        label: "Omega_p".into(),
                        points: zip(&rep.omega_p),
                    },
                    Series {
                        label: "Omega_c".into(),
                        points: zip(&rep.omega_c),
                    },
                ],
            },
            Panel::Lines {
                title: "Bare populations".into(),
                x_label: "t (s)".into(),
                y_label: "population".into(),
                series: vec![
                    Series {
                        label: "|g|^2".into(),
                        points: zip(&rep.population_g),
                    },
                    Series {
                        label: "|e|^2".into(),
                        points: zip(&rep.population_e),
                    },
                    Series {
                        label: "|s|^2".into(),
                        points: zip(&rep.population_s),
                    },
                ],
            },
        ],
    };
    w.svg("stirap.svg", &fig)?;
    Ok(summary)
}

fn outcome_name(o: Outcome) -> String {
    match o {
        Outcome::Transmitted => "transmitted".into(),
        Outcome::BlockedSlit(k) => format!("blocked_slit_{}", k + 1),
        Outcome::DeflectedOut => "deflected_out".into(),
    }
}

/// Trajectory rows for the first `per_state` molecules of each state.
fn trajectory_rows(
    run: &PurificationRun,
    per_state: usize,
) -> (Vec<Vec<String>>, BTreeMap<u32, Vec<usize>>) {
    let mut chosen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for m in &run.ensemble {
        let v = chosen.entry(m.internal_state.j).or_default();
        if v.len() < per_state {
            v.push(m.index);
        }
    }
    let mut idx: Vec<usize> = chosen.values().flatten().cloned().collect();
    idx.sort_unstable();
    let mut rows = Vec::new();
    for i in idx {
        let (m, tr): (_, &MoleculeTrajectory) = (&run.ensemble[i], &run.trajectories[i]);
        for &(t, x, v) in &tr.samples {
            rows.push(vec![
                i.to_string(),
                m.internal_state.j.to_string(),
                num(t),
                num(x),
                num(v),
                outcome_name(tr.outcome),
            ]);
        }
    }
    (rows, chosen)
}

fn trajectory_figure(
    title: &str,
    run: &PurificationRun,
    chosen: &BTreeMap<u32, Vec<usize>>,
    label: &dyn Fn(u32) -> String,
) -> Figure {
    let panels = chosen
        .iter()
        .take(8)
        .map(|(&j, idx)| Panel::Lines {
            title: label(j),
            x_label: "t (s)".into(),
            y_label: "X (m)".into(),
            series: idx
                .iter()
                .take(12)
                .map(|&i| Series {
                    label: format!("#{i} {}", outcome_name(run.trajectories[i].outcome)),
                    points: run.trajectories[i]
                        .samples
                        .iter()
                        .map(|&(t, x, _)| (t, x))
                        .collect(),
                })
                .collect(),
        })
        .collect();
    Figure {
        title: title.into(),
        panels,
    }
}

fn beamline_summary(setup: &PurificationSetup, run: &PurificationRun) -> Result<Value> {
    let omega = setup.lasers.peak_rabi(&setup.spec)?;
    let m = setup.spec.mass_kg();
    let v_coll = setup.geometry.collimated_spread(setup.ensemble.v_long_mean);
    let v_th = (BOLTZMANN * setup.ensemble.temperature / m).sqrt();
    let (ok_c, ratio_c) = separation_criterion(omega, setup.lasers.delta_p, m, v_coll)?;
    let (ok_t, ratio_t) = separation_criterion(omega, setup.lasers.delta_p, m, v_th)?;
    let straight = run
        .ensemble
        .iter()
        .zip(&run.trajectories)
        .filter(|(s, _)| s.internal_state == setup.ensemble.target)
        .map(|(_, t)| t.deflection.abs())
        .fold(0.0f64, f64::max);
    Ok(json!({
        "report": run.report,
        "target_max_abs_deflection_m": straight,
        "separation_criterion": {
            "collimated_v_t": v_coll, "collimated_ratio": ratio_c, "collimated_satisfied": ok_c,
            "thermal_v_t": v_th, "thermal_ratio": ratio_t, "thermal_satisfied": ok_t,
        },
        "doppler_spread": doppler_spread(setup.ensemble.v_long_spread * setup.ensemble.v_long_mean),
    }))
}

/// Full ensemble through the three slits.
pub fn run_beamline(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    let setup = config.purification_setup();
    let run = run_purification(&setup)?;
    let (rows, chosen) = trajectory_rows(&run, config.config.beamline.csv_per_state);
    w.csv(
        "trajectories.csv",
        &["molecule_id", "state", "t_s", "X_m", "v_m_s", "outcome"],
        &rows,
    )?;
    let summary = beamline_summary(&setup, &run)?;
    w.json("beamline_report.json", &summary)?;
    let target = setup.ensemble.target.j;
    let fig = trajectory_figure("Transverse trajectories", &run, &chosen, &|j| {
        if j == target {
            format!("J={j} (target)")
        } else {
            format!("J={j}")
        }
    });
    w.svg("trajectories.svg", &fig)?;
    Ok(summary)
}

/// Two synthetic states split by the configured frequency.
pub fn run_li6demo(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    let setup = config.purification_setup();
    let li6 = &config.config.li6;
    let split = mhz_to_angular(li6.split_MHz);
    let run = resolution_demo(&setup, split, li6.target_fraction)?;
    let force_at = |d2: f64| -> Result<f64> {
        let (probe, control) = setup.lasers.profiles()?;
        let system = LevelSystem::lambda(
            setup.lasers.delta_p,
            d2,
            setup.spec.dipole_ge(),
            setup.spec.dipole_se(),
        );
        let ctx = DressingContext {
            system,
            probe,
            control,
            options: config.options(),
        };
        peak_force(&ground_surface(&setup, &ctx)?)
    };
    let (f1, f10) = (force_at(-split)?, force_at(-10.0 * split)?);
    let (rows, chosen) = trajectory_rows(&run, config.config.beamline.csv_per_state);
    w.csv(
        "li6_trajectories.csv",
        &["molecule_id", "state", "t_s", "X_m", "v_m_s", "outcome"],
        &rows,
    )?;
    let summary = json!({
        "split_mhz": li6.split_MHz,
        "report": run.report,
        "peak_force_split_n": f1,
        "peak_force_10x_split_n": f10,
    });
    w.json("li6_report.json", &summary)?;
    let fig = trajectory_figure(
        "Two states split by the configured frequency",
        &run,
        &chosen,
        &|j| {
            if j == 0 {
                "resonant state".into()
            } else {
                format!("state offset by -{} MHz", li6.split_MHz)
            }
        },
    );
    w.svg("li6.svg", &fig)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub power_w: f64,
    pub waist_um: f64,
    pub delta_p_cm: f64,
    pub temperature_k: f64,
    pub purity: Option<f64>,
    pub yield_fraction: f64,
    pub transmitted_weight: f64,
}

/// Points of the sweep grid in row-major order (power, waist, δ_p, T).
pub fn sweep_points(config: &LoadedConfig) -> Vec<(f64, f64, f64, f64)> {
    let c = &config.config;
    let axis = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let mut out = Vec::new();
    for &p in &axis(&c.sweep.power_W, c.probe.power_W) {
        for &wst in &axis(&c.sweep.waist_um, c.probe.waist_um) {
            for &d in &axis(&c.sweep.delta_p_cm, c.levels.delta_p_cm) {
                for &t in &axis(&c.sweep.temperature_K, c.beamline.temperature_K) {
                    out.push((p, wst, d, t));
                }
            }
        }
    }
    out
}

/// One beamline run per grid point. Power and waist are applied to both
/// beams.
pub fn run_sweep(config: &LoadedConfig, w: &mut Writer) -> Result<Value> {
    let mut rows = Vec::new();
    for (p, wst, d, t) in sweep_points(config) {
        let mut c = config.clone();
        c.config.probe.power_W = p;
        c.config.control.power_W = p;
        c.config.probe.waist_um = wst;
        c.config.control.waist_um = wst;
        c.config.levels.delta_p_cm = d;
        c.config.beamline.temperature_K = t;
        c.validate()?;
        let run = run_purification(&c.purification_setup())?;
        rows.push(SweepRow {
            power_w: p,
            waist_um: wst,
            delta_p_cm: d,
            temperature_k: t,
            purity: run.report.purity,
            yield_fraction: run.report.yield_fraction,
            transmitted_weight: run.report.transmitted_weight,
        });
    }
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.power_w),
                num(r.waist_um),
                num(r.delta_p_cm),
                num(r.temperature_k),
                r.purity.map(num).unwrap_or_else(|| "nan".into()),
                num(r.yield_fraction),
                num(r.transmitted_weight),
            ]
        })
        .collect();
    w.csv(
        "sweep.csv",
        &[
            "power_W",
            "waist_um",
            "delta_p_cm",
            "temperature_K",
            "purity",
            "yield",
            "transmitted_weight",
        ],
        &csv,
    )?;
    w.json("sweep_report.json", &rows)?;
    Ok(serde_json::to_value(&rows).expect("serializable"))
}

/// Check a configuration without running anything.
pub fn validate_config(config: &LoadedConfig) -> Value {
    let lasers = config.lasers();
    json!({
        "origin": config.origin,
        "config_sha256": config.hash(),
        "mode": config.config.run.mode,
        "sigma_t_s": lasers.sigma_t().ok(),
        "peak_rabi_rad_s": lasers.peak_rabi(&config.config.molecule).ok(),
        "systems": config.systems().map(|s| s.into_iter().map(|(l, _)| l).collect::<Vec<_>>()).unwrap_or_default(),
    })
}

/// Adiabaticity cross-check of the beamline picture for the given states.
pub fn following_validation(config: &LoadedConfig, js: &[u32]) -> Result<Vec<(u32, f64)>> {
    following_check(&config.purification_setup(), js, config.lasers().center_x)
}
