//! Rotational populations of a 5 K LiRb beam and the two-photon detuning
//! each level sees when the lasers are tuned to J = 0.

use eidsim::molecule::{
    thermal_populations, two_photon_offset, two_photon_offset_cm, MoleculeSpec, RamanPartner,
    RoLevel,
};

fn main() -> eidsim::Result<()> {
    let spec = MoleculeSpec::lirb();
    let p = thermal_populations(&spec, 5.0, 12)?;
    let target = RoLevel::ground(0, 0);
    println!(
        "{:>3} {:>10} {:>14} {:>12}",
        "J", "population", "dtwo (cm^-1)", "dtwo (MHz)"
    );
    for (j, pj) in p.iter().enumerate() {
        let g = RoLevel::ground(0, j as u32);
        println!(
            "{j:>3} {pj:>10.4} {:>14.5} {:>12.2}",
            two_photon_offset_cm(&spec, target, g, RamanPartner::SameJ)?,
            two_photon_offset(&spec, target, g, RamanPartner::SameJ)?
        );
    }
    Ok(())
}
