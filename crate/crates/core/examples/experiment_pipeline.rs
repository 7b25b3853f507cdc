//! Run the staged experiment pipeline into a scratch directory, then run it
//! again to show that completed stages are reused.

use koopman_mpc::experiment::{run_control, run_evaluate, run_predict, run_simulate, run_train, Case, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::for_case(Case::Single);
    cfg.out = std::env::temp_dir().join("koopman-mpc-pipeline");
    cfg.data.train_seconds = 20.0;
    cfg.koopman.epochs = 10;
    cfg.gru.epochs = 2;
    cfg.validate()?;

    for pass in 0..2 {
        println!("pass {pass}");
        for stage in [run_simulate, run_train, run_predict, run_control, run_evaluate] {
            let out = stage(&cfg)?;
            println!("  {:<9} {} ({})", out.stage, out.dir.display(), if out.reused { "reused" } else { "written" });
        }
    }
    Ok(())
}
