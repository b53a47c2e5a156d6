//! TDSE through the laser crossing: projection on the followed dressed
//! branch, with and without excited-state decay.

use eidsim::beamline::DressingLasers;
use eidsim::hamiltonian::LevelSystem;
use eidsim::molecule::MoleculeSpec;
use eidsim::tdse::{following_curve, CrossingDrive, PropagationConfig};
use eidsim::units::mhz_to_angular;

fn main() -> eidsim::Result<()> {
    let spec = MoleculeSpec::lirb();
    let lasers = DressingLasers::default();
    let (probe, control) = lasers.profiles()?;
    let (t0, t1) = lasers.window()?;
    let drive = CrossingDrive {
        probe,
        control,
        x: lasers.center_x,
    };
    let cfg = PropagationConfig::adaptive(t0, t1, (t1 - t0) / 600.0);
    let gamma = 2.0 * std::f64::consts::PI * 10e6;

    for (label, d2, g) in [
        ("dark", 0.0, 0.0),
        ("90 MHz", -90.0, 0.0),
        ("90 MHz, decay", -90.0, gamma),
    ] {
        let sys = LevelSystem::lambda(
            lasers.delta_p,
            mhz_to_angular(d2),
            spec.dipole_ge(),
            spec.dipole_se(),
        )
        .with_decay(g);
        let c = following_curve(label, &sys, &drive, 0, &cfg)?;
        println!(
            "{label:>14}: min followed {:.6}, final norm {:.6}, peak |e|^2 {:.2e}",
            c.min_followed(),
            c.total_projection.last().unwrap(),
            c.populations.iter().map(|p| p[1]).fold(0.0, f64::max)
        );
    }
    Ok(())
}
