//! Koopman MPC against a seizing single column: identify the input gain,
//! switch the controller on at the configured onset and compare the
//! controlled EEG with the free-running plant.

use koopman_mpc::eval::suppression_stats;
use koopman_mpc::experiment::{Case, ExperimentConfig};
use koopman_mpc::koopman::train;
use koopman_mpc::mpc::{closed_loop, uncontrolled};
use koopman_mpc::neural_mass::generate_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case: Case = std::env::args().nth(1).as_deref().unwrap_or("single").parse()?;
    let cfg = ExperimentConfig::for_case(case);

    let trace = generate_trace(&cfg.simulation(cfg.data_duration())?, None)?;
    let model = train(&trace.slice(0, cfg.split_samples().0), cfg.koopman)?;

    let sim = cfg.simulation(cfg.control_duration)?;
    let run = closed_loop(&sim, &model, &cfg.mpc)?;
    let free = uncontrolled(&sim)?;

    let summary = run.log.summary(&cfg.mpc);
    println!("{summary:#?}");
    let stats = suppression_stats(&free, &run.controlled, cfg.evaluation.suppression_window)?;
    for (c, ch) in stats.channels.iter().enumerate() {
        println!("channel {c}: RMS {:.3} -> {:.3} mV (ratio {:.3})", ch.rms_uncontrolled, ch.rms_controlled, ch.ratio);
    }
    Ok(())
}
