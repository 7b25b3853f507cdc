//! Linear MPC over the lifted Koopman model: condensing, a box/affine QP
//! solver and the closed loop against the simulated plant.

mod closed_loop;
mod config;
mod qp;

pub use closed_loop::{
    closed_loop, excitation_signal, identify_input_gain, uncontrolled, ClosedLoopRun, ControlLog, ControlSummary,
};
pub use config::{Excitation, MpcConfig, Reference};
pub use qp::{condense, solve_box_qp, solve_qp, QpProblem, QpSolution};
