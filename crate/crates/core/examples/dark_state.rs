//! Dressed spectrum of the LiRb Λ system at the peak of both beams, on and
//! off two-photon resonance.

use eidsim::beamline::DressingLasers;
use eidsim::dressed::{dark_state, eigensystem};
use eidsim::hamiltonian::{build_lambda, LevelSystem};
use eidsim::molecule::MoleculeSpec;
use eidsim::tdse::unit_rabi;
use eidsim::units::{angular_to_mhz, mhz_to_angular};

fn main() -> eidsim::Result<()> {
    let spec = MoleculeSpec::lirb();
    let lasers = DressingLasers::default();
    let omega = lasers.peak_rabi(&spec)?;
    println!(
        "peak Rabi frequency {omega:.3e} rad/s, delta_p {:.3e} rad/s",
        lasers.delta_p
    );

    for d2_mhz in [0.0, -90.0, -540.0] {
        let sys = LevelSystem::lambda(
            lasers.delta_p,
            mhz_to_angular(d2_mhz),
            spec.dipole_ge(),
            spec.dipole_se(),
        );
        let (pp, pc) = unit_rabi(&sys);
        let (probe, control) = lasers.profiles()?;
        let (op, oc) = (
            pp * eidsim::field::peak_amplitude(&probe),
            pc * eidsim::field::peak_amplitude(&control),
        );
        let sol = eigensystem(&build_lambda(&sys, op, oc)?)?;
        println!("\ndelta_two = {d2_mhz} MHz");
        for (k, e) in sol.eigenvalues.iter().enumerate() {
            let v = sol.vector(k);
            let tag = if sol.dark_index == Some(k) {
                "  <- dark"
            } else {
                ""
            };
            println!(
                "  E = {:>+14.6e} rad/s ({:>+12.4} MHz)  |g|^2 {:.4} |e|^2 {:.2e} |s|^2 {:.4}{tag}",
                e,
                angular_to_mhz(*e),
                v[0].norm_sqr(),
                v[1].norm_sqr(),
                v[2].norm_sqr()
            );
        }
        if d2_mhz == 0.0 {
            let d = dark_state(op, oc)?;
            println!(
                "  closed form (g, e, s) = ({:.6}, {}, {:.6})",
                d[0], d[1], d[2]
            );
        }
    }
    Ok(())
}
