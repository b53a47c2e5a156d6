use proptest::prelude::*;

use eidsim::beamline::{
    build_beamline, propagate_ensemble, purification_report, sample_ensemble, EnsembleParams,
    Outcome, PurificationSetup,
};
use eidsim::config::LoadedConfig;
use eidsim::dressed::{eigensystem, track_adiabatic};
use eidsim::field::{counter_intuitive, envelope, FieldProfile, FieldRole};
use eidsim::hamiltonian::{
    build_extended, build_lambda, ExtendedOptions, FieldAmplitudes, HamiltonianMatrix, LevelSystem,
};
use eidsim::molecule::{
    rotational_energy, thermal_populations, two_photon_offset_cm, MoleculeSpec, RamanPartner,
    RoLevel,
};
use eidsim::units::DEBYE;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn beam(role: FieldRole, center_x: f64, center_t: f64) -> FieldProfile {
    FieldProfile {
        role,
        power: 0.8,
        waist: 10e-6,
        wavelength: 586e-9,
        center_x,
        center_t,
        sigma_t: 8e-7,
        detuning: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduced_thermal_weights_fall_with_energy(t in 0.05f64..300.0) {
        let p = thermal_populations(&MoleculeSpec::lirb(), t, 30).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let reduced: Vec<f64> = p.iter().enumerate().map(|(j, x)| x / (2 * j + 1) as f64).collect();
        for w in reduced.windows(2) {
            prop_assert!(w[1] < w[0] || w[0] == 0.0);
        }
    }

    #[test]
    fn adjacent_rotational_gap_is_2bj(j in 1u32..60, b in 0.01f64..5.0) {
        let spec = MoleculeSpec { b_e_cm: b, ..MoleculeSpec::lirb() };
        let gap = rotational_energy(&spec, RoLevel::ground(0, j)) - rotational_energy(&spec, RoLevel::ground(0, j - 1));
        prop_assert!((gap - 2.0 * b * j as f64).abs() <= 1e-12 * gap);
    }

    #[test]
    fn two_photon_offset_is_antisymmetric(a in 0u32..20, b in 0u32..20) {
        let spec = MoleculeSpec::lirb();
        let (x, y) = (RoLevel::ground(0, a), RoLevel::ground(0, b));
        let ab = two_photon_offset_cm(&spec, x, y, RamanPartner::SameJ).unwrap();
        let ba = two_photon_offset_cm(&spec, y, x, RamanPartner::SameJ).unwrap();
        prop_assert_eq!(ab, -ba);
    }

    #[test]
    fn envelope_stays_in_unit_interval(x in -1e-3f64..1e-3, t in -1e-4f64..1e-4, cx in -1e-5f64..1e-5) {
        let e = envelope(&beam(FieldRole::Probe, cx, 0.0), x, t);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn ordering_check_compares_centre_times(tp in -1e-5f64..1e-5, tc in -1e-5f64..1e-5) {
        let ok = counter_intuitive(&beam(FieldRole::Probe, 0.0, tp), &beam(FieldRole::Control, 0.0, tc));
        prop_assert_eq!(ok, tc < tp);
    }

    #[test]
    fn lossless_hamiltonian_is_hermitian(
        dp in -1e14f64..1e14, d2 in -1e10f64..1e10, op in -1e12f64..1e12, oc in -1e12f64..1e12,
    ) {
        let h = build_lambda(&LevelSystem::lambda(dp, d2, DEBYE, DEBYE), op, oc).unwrap();
        let diff = (&h.matrix - h.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-14 * h.matrix.norm());
    }

    #[test]
    fn spectrum_invariant_under_rabi_swap(dp in -10.0f64..10.0, op in -5.0f64..5.0, oc in -5.0f64..5.0) {
        let sys = LevelSystem::lambda(dp, 0.0, 1.0, 1.0);
        let a = sorted(eigensystem(&build_lambda(&sys, op, oc).unwrap()).unwrap().eigenvalues);
        let b = sorted(eigensystem(&build_lambda(&sys, oc, op).unwrap()).unwrap().eigenvalues);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + dp.abs() + op.abs() + oc.abs()));
        }
    }

    #[test]
    fn extended_builder_without_extras_matches_lambda(
        dp in -1e14f64..1e14, d2 in -1e10f64..1e10, ep in 0.0f64..1e8, ec in 0.0f64..1e8, gamma in 0.0f64..1e8,
    ) {
        let sys = LevelSystem::lambda(dp, d2, 4.0 * DEBYE, 3.0 * DEBYE).with_decay(gamma);
        let f = FieldAmplitudes { probe: ep, control: ec };
        let (op, oc) = eidsim::hamiltonian::lambda_rabi(&sys, f).unwrap();
        prop_assert_eq!(build_lambda(&sys, op, oc).unwrap(), build_extended(&sys, f, ExtendedOptions::default(), 0.0).unwrap());
    }

    #[test]
    fn tracking_keeps_eigenvalue_multiset(
        dp in -10.0f64..10.0, d2 in -1.0f64..1.0, op in -5.0f64..5.0, oc in -5.0f64..5.0,
        dop in -0.5f64..0.5, doc in -0.5f64..0.5,
    ) {
        let sys = LevelSystem::lambda(dp, d2, 1.0, 1.0);
        let prev = eigensystem(&build_lambda(&sys, op, oc).unwrap()).unwrap();
        let cur = eigensystem(&build_lambda(&sys, op + dop, oc + doc).unwrap()).unwrap();
        if let Ok(t) = track_adiabatic(&prev, &cur) {
            let (a, b) = (sorted(t.eigenvalues.clone()), sorted(cur.eigenvalues.clone()));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * cur.scale.max(1.0));
            }
            let h = HamiltonianMatrix { matrix: build_lambda(&sys, op + dop, oc + doc).unwrap().matrix };
            prop_assert!(t.max_residual(&h) <= 1e-10 * cur.scale.max(1.0));
        }
    }

    #[test]
    fn identical_configs_hash_identically(seed in 0u64..i64::MAX as u64, molecules in 1usize..100_000) {
        let text = format!("[run]\nseed = {seed}\n\n[beamline]\nmolecules = {molecules}\n");
        let a = LoadedConfig::from_str(&text, "a.toml").unwrap();
        let b = LoadedConfig::from_str(&format!("# comment\n{text}"), "b.toml").unwrap();
        prop_assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.config.run.seed = seed.wrapping_add(1);
        prop_assert_ne!(a.hash(), c.hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ensemble_is_a_function_of_the_seed(seed in any::<u64>(), t in 0.5f64..20.0) {
        let setup = PurificationSetup::lirb(0, 200, seed);
        let params = EnsembleParams::new(t, 200, seed, 0);
        let a = sample_ensemble(&setup.spec, &setup.geometry, &params).unwrap();
        let b = sample_ensemble(&setup.spec, &setup.geometry, &params).unwrap();
        prop_assert_eq!(&a, &b);
    }

    #[test]
    fn null_field_outcomes_are_pure_geometry(seed in any::<u64>()) {
        let mut setup = PurificationSetup::lirb(0, 300, seed);
        setup.lasers_on = false;
        let ens = sample_ensemble(&setup.spec, &setup.geometry, &setup.ensemble).unwrap();
        let line = build_beamline(&setup, &[]).unwrap();
        let tr = propagate_ensemble(&ens, &line).unwrap();
        let g = &setup.geometry;
        for (m, t) in ens.iter().zip(&tr) {
            let at = |z: f64| m.transverse_position + m.transverse_velocity * (z - g.slit_positions[0]) / m.longitudinal_velocity;
            let open = |k: usize| (at(g.slit_positions[k]) - g.slit_centers[k]).abs() <= 0.5 * g.slit_widths[k];
            let first_block = (0..3).find(|&k| !open(k));
            let want = first_block.map_or(Outcome::Transmitted, Outcome::BlockedSlit);
            prop_assert_eq!(t.outcome, want);
            prop_assert!(t.deflection.abs() < 1e-15);
        }
        let rep = purification_report(&ens, &tr, setup.ensemble.target).unwrap();
        prop_assert!(rep.table.iter().all(|r| r.transmission >= 0.0 && r.transmission <= 1.0));
    }
}
