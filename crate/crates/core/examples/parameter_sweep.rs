//! Purity and yield over laser power and beam temperature.

use eidsim::beamline::{run_purification, EnsembleParams, PurificationSetup};

fn main() -> eidsim::Result<()> {
    println!(
        "{:>8} {:>6} {:>8} {:>7}",
        "P (W)", "T (K)", "purity", "yield"
    );
    for power in [0.05, 0.2, 0.8] {
        for temperature in [1.0, 5.0, 20.0] {
            let mut setup = PurificationSetup::lirb(0, 2_000, 5);
            setup.lasers.probe.power = power;
            setup.lasers.control.power = power;
            setup.ensemble = EnsembleParams {
                temperature,
                ..setup.ensemble
            };
            let r = run_purification(&setup)?.report;
            println!(
                "{power:>8.2} {temperature:>6.1} {:>8.4} {:>7.3}",
                r.purity.unwrap_or(f64::NAN),
                r.yield_fraction
            );
        }
    }
    Ok(())
}
