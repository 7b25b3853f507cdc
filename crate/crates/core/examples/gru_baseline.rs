//! Fit the GRU sequence model used as the nonlinear baseline and score its
//! multi-step forecasts on held-out data.

use koopman_mpc::baselines::train_gru;
use koopman_mpc::eval::mse_r2_traces;
use koopman_mpc::experiment::{Case, ExperimentConfig};
use koopman_mpc::neural_mass::generate_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::for_case(Case::Single);
    cfg.gru.epochs = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;

    let trace = generate_trace(&cfg.simulation(cfg.data_duration())?, None)?;
    let (n_train, n_test) = cfg.split_samples();
    let (model, losses) = train_gru(&trace.slice(0, n_train), cfg.gru)?;
    for (epoch, loss) in losses.iter().enumerate() {
        println!("epoch {epoch:>3}  loss {loss:.5}");
    }

    let start = n_train + cfg.gru.lookback();
    let pred = model.predict_segments(&trace, start, n_train + n_test - start)?;
    let fit = mse_r2_traces(&trace.slice(start, n_train + n_test), &pred)?.total;
    println!("held-out MSE {:.4}  R2 {:.4}", fit.mse, fit.r2()?);
    Ok(())
}
