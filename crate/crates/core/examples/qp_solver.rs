//! The box-constrained QP solver on a small problem whose unconstrained
//! minimiser lies outside the box.

use koopman_mpc::mpc::solve_box_qp;
use nalgebra::{dmatrix, dvector};

fn main() -> koopman_mpc::error::Result<()> {
    let h = dmatrix![4.0, 1.0; 1.0, 2.0];
    let f = dvector![-8.0, 3.0];
    let sol = solve_box_qp(&h, &f, &dvector![-1.0, -1.0], &dvector![1.0, 1.0])?;
    let free = -h.clone().lu().solve(&f).expect("positive definite");
    println!("unconstrained minimiser {:?}", free.as_slice());
    println!("boxed minimiser         {:?}", sol.x);
    println!("objective {:.6} after {} iterations, residual {:.1e}", sol.objective, sol.iterations, sol.residual);
    Ok(())
}
