//! Loss-term ablation on a short trace: each variant is retrained with a
//! few seeds and summarised as mean ± sd of the held-out MSE and R².

use koopman_mpc::baselines::{train_ablation, AblationSpec};
use koopman_mpc::eval::{comparison_table, mse_r2_traces, RunRecord};
use koopman_mpc::experiment::{Case, ExperimentConfig};
use koopman_mpc::koopman::predict_receding;
use koopman_mpc::neural_mass::generate_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::for_case(Case::Single);
    cfg.data.train_seconds = 20.0;
    cfg.koopman.epochs = 15;

    let trace = generate_trace(&cfg.simulation(cfg.data_duration())?, None)?;
    let (n_train, n_test) = cfg.split_samples();
    let train = trace.slice(0, n_train);
    let start = n_train + cfg.koopman.window;
    let truth = trace.slice(start, n_train + n_test);

    let mut runs = Vec::new();
    for spec in AblationSpec::ALL {
        for seed in 0..3 {
            let (model, _) = train_ablation(&train, cfg.koopman_for_seed(seed), spec)?;
            let k = &cfg.koopman;
            let pred = predict_receding(&model, &trace, start, truth.len(), k.refit_period, k.refit_history)?;
            let fit = mse_r2_traces(&truth, &pred)?.total;
            runs.push(RunRecord { case: "single".into(), model: spec.label().into(), seed, mse: fit.mse, r2: fit.r2()? });
        }
    }
    print!("{}", comparison_table(&runs)?.to_text());
    Ok(())
}
