//! Analytic gradients against central finite differences.

mod common;

use common::{gru_error, koopman_error, TOLERANCE};
use koopman_mpc::koopman::ActiveTerms;

#[test]
fn koopman_loss_gradient_all_terms() {
    for seed in 0..3 {
        let err = koopman_error(ActiveTerms::ALL, 1, seed);
        eprintln!("koopman seed {seed}: {err:e}");
        assert!(err < TOLERANCE, "seed {seed}: relative error {err:e}");
    }
    let err = koopman_error(ActiveTerms::ALL, 2, 5);
    assert!(err < TOLERANCE, "two channels: relative error {err:e}");
}

#[test]
fn koopman_loss_gradient_each_ablation() {
    let all = ActiveTerms::ALL;
    for terms in [
        ActiveTerms { recon: false, ..all },
        ActiveTerms { y_pred: false, ..all },
        ActiveTerms { z_pred: false, ..all },
        ActiveTerms { lin: false, ..all },
    ] {
        let err = koopman_error(terms, 1, 11);
        assert!(err < TOLERANCE, "{terms:?}: relative error {err:e}");
    }
}

#[test]
fn gru_bptt_gradient() {
    for seed in 0..3 {
        let err = gru_error(seed);
        eprintln!("gru seed {seed}: {err:e}");
        assert!(err < TOLERANCE, "seed {seed}: relative error {err:e}");
    }
}
