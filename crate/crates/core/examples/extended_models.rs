//! Light shift of the target and of J = 1 in the 3, 7, 9 and 11 level
//! ladders, with and without counter-rotating shifts and pulse mixing.

use eidsim::beamline::DressingLasers;
use eidsim::dressed::eigensystem;
use eidsim::field::peak_amplitude;
use eidsim::hamiltonian::{
    build_extended, ExtendedOptions, FieldAmplitudes, LevelSystem, ModelSize,
};
use eidsim::molecule::{MoleculeSpec, RamanPartner, RoLevel};

fn main() -> eidsim::Result<()> {
    let spec = MoleculeSpec::lirb();
    let lasers = DressingLasers::default();
    let (probe, control) = lasers.profiles()?;
    let f = FieldAmplitudes {
        probe: peak_amplitude(&probe),
        control: peak_amplitude(&control),
    };
    let target = RoLevel::ground(0, 0);
    for opts in [
        ExtendedOptions::default(),
        ExtendedOptions {
            counter_rotating: true,
            pulse_mixing: true,
            ..Default::default()
        },
    ] {
        println!(
            "counter_rotating {}, pulse_mixing {}",
            opts.counter_rotating, opts.pulse_mixing
        );
        for model in [
            ModelSize::Three,
            ModelSize::Seven,
            ModelSize::Nine,
            ModelSize::Eleven,
        ] {
            let shift = |j: u32| -> eidsim::Result<f64> {
                let sys = LevelSystem::ladder(
                    model,
                    &spec,
                    target,
                    RoLevel::ground(0, j),
                    lasers.delta_p,
                    RamanPartner::SameJ,
                )?;
                let on = eigensystem(&build_extended(&sys, f, opts, 0.0)?)?;
                let off = eigensystem(&build_extended(
                    &sys,
                    FieldAmplitudes::default(),
                    opts,
                    0.0,
                )?)?;
                // the g-connected branch is the one with the most |g> weight
                let k = (0..sys.dim())
                    .max_by(|&a, &b| on.vector(a)[0].norm().total_cmp(&on.vector(b)[0].norm()))
                    .unwrap();
                Ok(on.eigenvalues[k]
                    - off.eigenvalues.iter().cloned().fold(f64::NAN, |m, e| {
                        if e.abs() < m.abs() || m.is_nan() {
                            e
                        } else {
                            m
                        }
                    }))
            };
            println!(
                "  {:>2} levels: J=0 shift {:+.3e} rad/s, J=1 shift {:+.3e} rad/s",
                model.dim(),
                shift(0)?,
                shift(1)?
            );
        }
    }
    Ok(())
}
