//! Two states separated by a small two-photon splitting, the situation of
//! neighbouring hyperfine levels. Prints purity against the splitting.

use eidsim::beamline::{resolution_demo, PurificationSetup};
use eidsim::units::mhz_to_angular;

fn main() -> eidsim::Result<()> {
    let setup = PurificationSetup::lirb(0, 4_000, 3);
    for split in [5.0, 20.0, 40.0, 75.0, 150.0] {
        let run = resolution_demo(&setup, mhz_to_angular(split), 0.5)?;
        let off = run
            .report
            .table
            .iter()
            .find(|r| r.j == 1)
            .map_or(0.0, |r| r.mean_deflection);
        println!(
            "{split:>6} MHz: purity {:.4}, yield {:.3}, offset-state mean deflection {off:.2e} m",
            run.report.purity.unwrap_or(f64::NAN),
            run.report.yield_fraction
        );
    }
    Ok(())
}
