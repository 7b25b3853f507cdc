//! Welch spectra of a seizure-like trace and of one-step AR(2) forecasts
//! of it, with the relative band error between the two.

use koopman_mpc::eval::{band_error, welch};
use koopman_mpc::neural_mass::{generate_trace, ColumnModel, JansenRitParams, SimulationConfig};

fn main() -> koopman_mpc::error::Result<()> {
    let model = ColumnModel::Single(JansenRitParams::default());
    let trace = generate_trace(&SimulationConfig::new(model, 40.0), None)?;
    let x = &trace.channels[0];

    // AR(2) coefficients by least squares; each forecast uses the true past.
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in x.windows(3) {
        s11 += w[1] * w[1];
        s12 += w[1] * w[0];
        s22 += w[0] * w[0];
        r1 += w[2] * w[1];
        r2 += w[2] * w[0];
    }
    let det = s11 * s22 - s12 * s12;
    let (a1, a2) = ((r1 * s22 - r2 * s12) / det, (r2 * s11 - r1 * s12) / det);
    let mut ar = x[..2].to_vec();
    for i in 2..x.len() {
        ar.push(a1 * x[i - 1] + a2 * x[i - 2]);
    }

    let truth = welch(x, trace.sample_rate, 256, 0.5)?;
    let fitted = welch(&ar, trace.sample_rate, 256, 0.5)?;
    println!("resolution {:.3} Hz, power {:.3} mV^2", truth.resolution(), truth.integral());
    println!("{:>8}  {:>12}  {:>12}", "Hz", "EEG", "AR(2)");
    for i in (0..truth.frequencies.len()).step_by(8) {
        println!("{:>8.2}  {:>12.4e}  {:>12.4e}", truth.frequencies[i], truth.density[i], fitted.density[i]);
    }
    println!("1-20 Hz relative error {:.3}", band_error(&truth, &fitted, 1.0, 20.0)?);
    Ok(())
}
