//! Sweep the excitatory gain of a single Jansen-Rit column and report where
//! the rest state gives way to large-amplitude spike-wave oscillations.

use koopman_mpc::eval::welch;
use koopman_mpc::neural_mass::{generate_trace, peak_to_peak, ColumnModel, JansenRitParams, SimulationConfig};

fn main() -> koopman_mpc::error::Result<()> {
    println!("{:>6}  {:>12}  {:>12}", "A (mV)", "p-p (mV)", "peak (Hz)");
    for step in 0..=10 {
        let gain = 7.0 + 0.1 * step as f64;
        let model = ColumnModel::Single(JansenRitParams::default().with_gain(gain));
        let trace = generate_trace(&SimulationConfig::new(model, 20.0), None)?;
        let psd = welch(&trace.channels[0], trace.sample_rate, 256, 0.5)?;
        let freq = psd.frequencies[psd.peak()];
        println!("{gain:>6.2}  {:>12.3}  {freq:>12.2}", peak_to_peak(&trace)[0]);
    }
    Ok(())
}
