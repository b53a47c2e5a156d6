//! Ground-branch potential surfaces for the target (J = 0) and the nearest
//! non-target (J = 1), with well depth and peak force.

use eidsim::beamline::{dressing_context, ground_surface, peak_force, PurificationSetup};
use eidsim::molecule::{RamanPartner, RoLevel};
use eidsim::units::{BOLTZMANN, HBAR};

fn main() -> eidsim::Result<()> {
    let setup = PurificationSetup::lirb(0, 1, 1);
    let target = RoLevel::ground(0, 0);
    for j in [0, 1, 2] {
        let ctx = dressing_context(
            &setup.spec,
            &setup.lasers,
            setup.model,
            target,
            RoLevel::ground(0, j),
            RamanPartner::SameJ,
        )?;
        let surf = ground_surface(&setup, &ctx)?;
        let depth = surf.extremum_shift();
        println!(
            "J={j}: depth {depth:+.3e} rad/s = {:+.1} uK, peak force {:.3e} N, min neighbour overlap {:.6}",
            HBAR * depth / BOLTZMANN * 1e6,
            peak_force(&surf)?,
            surf.min_neighbour_overlap()
        );
        // cut through the laser centre at the moment of peak intensity
        let it = surf.t_grid.len() / 2;
        let row: Vec<String> = surf
            .x_grid
            .iter()
            .zip(&surf.energies)
            .step_by(10)
            .map(|(x, e)| format!("{:+.0}um:{:+.2e}", x * 1e6, e[it]))
            .collect();
        println!("    {}", row.join("  "));
    }
    Ok(())
}
