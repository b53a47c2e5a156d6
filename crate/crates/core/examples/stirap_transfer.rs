//! Trapezoidal counter-intuitive sequences on a resonant Λ system: full
//! return to |g> and a held superposition.

use eidsim::hamiltonian::LevelSystem;
use eidsim::tdse::{
    stirap_sequence, unit_rabi, PropagationConfig, PulseSchedule, ScheduleMode, ScheduledDrive,
};
use eidsim::units::{mhz_to_angular, DEBYE};

fn main() -> eidsim::Result<()> {
    let sys = LevelSystem::lambda(0.0, 0.0, 4.0 * DEBYE, 4.0 * DEBYE);
    let (pp, pc) = unit_rabi(&sys);
    let (ramp, plateau) = (0.5e-6, 1.0e-6);
    for (mode, op, oc) in [
        (ScheduleMode::CompleteTransferBack, 30.0, 30.0),
        (ScheduleMode::HoldSuperposition, 20.0, 30.0),
    ] {
        let drive = ScheduledDrive {
            probe_peak: mhz_to_angular(op) / pp,
            control_peak: mhz_to_angular(oc) / pc,
            schedule: PulseSchedule::symmetric(0.0, ramp, plateau, mode),
        };
        let end = match mode {
            ScheduleMode::HoldSuperposition => 2.0 * ramp + plateau,
            ScheduleMode::CompleteTransferBack => 4.0 * ramp + plateau,
        };
        let r = stirap_sequence(
            &sys,
            &drive,
            &PropagationConfig::adaptive(0.0, end, end / 400.0),
        )?;
        println!(
            "{mode:?}: final |g|^2 {:.8}, |s|^2 {:.2e}, min dark projection {:.6}",
            r.final_purity,
            r.population_s.last().unwrap(),
            r.min_dark_projection
        );
        if let (Some(got), Some(want)) = (r.plateau_ratio, r.expected_ratio) {
            println!("    plateau |g|^2/|s|^2 = {got:.5}, (Oc/Op)^2 = {want:.5}");
        }
    }
    Ok(())
}
