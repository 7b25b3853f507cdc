//! Train the deep Koopman autoencoder on a seizure-like single-column trace,
//! forecast the held-out segment with receding refits, and list the
//! dominant modes of the learned operator.

use koopman_mpc::checkpoint::Checkpoint;
use koopman_mpc::eval::mse_r2_traces;
use koopman_mpc::experiment::{Case, ExperimentConfig};
use koopman_mpc::koopman::{predict_receding, spectral_decomposition, train};
use koopman_mpc::neural_mass::generate_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::for_case(Case::Single);
    cfg.koopman.epochs = std::env::args().nth(1).map_or(Ok(cfg.koopman.epochs), |s| s.parse())?;

    let trace = generate_trace(&cfg.simulation(cfg.data_duration())?, None)?;
    let (n_train, n_test) = cfg.split_samples();
    let model = train(&trace.slice(0, n_train), cfg.koopman)?;

    let start = n_train + cfg.koopman.window;
    let k = &cfg.koopman;
    let pred = predict_receding(&model, &trace, start, n_train + n_test - start, k.refit_period, k.refit_history)?;
    let fit = mse_r2_traces(&trace.slice(start, n_train + n_test), &pred)?.total;
    println!("held-out MSE {:.4}  R2 {:.4}", fit.mse, fit.r2()?);

    for mode in spectral_decomposition(&model.operator, trace.sample_rate).iter().take(6) {
        println!("|lambda| {:.4}  {:>6.2} Hz  growth {:+.3}/s", mode.eigenvalue.norm(), mode.frequency_hz, mode.growth_rate);
    }

    let path = std::env::temp_dir().join("koopman_single.json");
    Checkpoint::koopman(&model).save(&path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
