use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::koopman::{train_with_terms, ActiveTerms, KoopmanModel, LiftingConfig, TrainingHistory};
use crate::neural_mass::SimTrace;

/// Which single loss term, if any, is removed from the Koopman objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationSpec {
    Full,
    NoRecon,
    NoYPred,
    NoZPred,
    NoLin,
}

impl AblationSpec {
    pub const ALL: [AblationSpec; 5] =
        [AblationSpec::Full, AblationSpec::NoRecon, AblationSpec::NoYPred, AblationSpec::NoZPred, AblationSpec::NoLin];

    pub fn terms(self) -> ActiveTerms {
        let all = ActiveTerms::ALL;
        match self {
            AblationSpec::Full => all,
            AblationSpec::NoRecon => ActiveTerms { recon: false, ..all },
            AblationSpec::NoYPred => ActiveTerms { y_pred: false, ..all },
            AblationSpec::NoZPred => ActiveTerms { z_pred: false, ..all },
            AblationSpec::NoLin => ActiveTerms { lin: false, ..all },
        }
    }

    /// Row label used in comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            AblationSpec::Full => "koopman",
            AblationSpec::NoRecon => "model 2",
            AblationSpec::NoYPred => "model 3",
            AblationSpec::NoZPred => "model 4",
            AblationSpec::NoLin => "model 5",
        }
    }
}

/// Same architecture and recipe as the primary trainer with one term removed.
pub fn train_ablation(trace: &SimTrace, config: LiftingConfig, spec: AblationSpec) -> Result<(KoopmanModel, TrainingHistory)> {
    train_with_terms(trace, config, spec.terms())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_variant_drops_exactly_one_term() {
        for spec in AblationSpec::ALL {
            let t = spec.terms();
            let off = [t.recon, t.y_pred, t.z_pred, t.lin].iter().filter(|on| !**on).count();
            assert_eq!(off, usize::from(spec != AblationSpec::Full));
        }
    }

    #[test]
    fn full_matches_primary_trainer() {
        let s: Vec<f64> = (0..60).map(|i| (f64::from(i) * 0.4).sin()).collect();
        let trace = SimTrace::new(50.0, 0.0, vec![s], None).unwrap();
        let cfg = LiftingConfig {
            window: 3,
            latent_dim: 4,
            hidden_encoder: 5,
            hidden_decoder: 5,
            pred_horizon: 2,
            batch_len: 20,
            epochs: 5,
            ..Default::default()
        };
        let (a, _) = train_ablation(&trace, cfg, AblationSpec::Full).unwrap();
        let b = crate::koopman::train(&trace, cfg).unwrap();
        assert_eq!(a, b);
    }
}
