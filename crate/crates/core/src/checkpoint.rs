//! JSON checkpoints shared by every trainable model. Matrices are stored
//! row-major with explicit shapes; floats round-trip bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{GruDoc, GruModel};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::koopman::{KoopmanDoc, KoopmanModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelDoc {
    Koopman(KoopmanDoc),
    Gru(GruDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    #[serde(flatten)]
    pub body: ModelDoc,
}

impl Checkpoint {
    pub fn koopman(model: &KoopmanModel) -> Self {
        Self { format_version: FORMAT_VERSION, body: ModelDoc::Koopman(model.to_doc()) }
    }

    pub fn gru(model: &GruModel) -> Self {
        Self { format_version: FORMAT_VERSION, body: ModelDoc::Gru(model.to_doc()) }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            ModelDoc::Koopman(_) => "koopman",
            ModelDoc::Gru(_) => "gru",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", ck.format_version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn into_koopman(self) -> Result<KoopmanModel> {
        match self.body {
            ModelDoc::Koopman(doc) => KoopmanModel::from_doc(&doc),
            ModelDoc::Gru(_) => Err(Error::Format("checkpoint holds a gru model, expected koopman".into())),
        }
    }

    pub fn into_gru(self) -> Result<GruModel> {
        match self.body {
            ModelDoc::Gru(doc) => GruModel::from_doc(&doc),
            ModelDoc::Koopman(_) => Err(Error::Format("checkpoint holds a koopman model, expected gru".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::GruConfig;
    use crate::koopman::LiftingConfig;
    use nalgebra::DMatrix;

    fn small_koopman() -> KoopmanModel {
        let cfg = LiftingConfig { window: 4, latent_dim: 5, hidden_encoder: 6, hidden_decoder: 6, ..Default::default() };
        let mut m = KoopmanModel::init(cfg).unwrap();
        m.operator = DMatrix::from_fn(5, 5, |i, j| 0.1 / (1.0 + i as f64 + 3.0 * j as f64));
        m.input_gain = DMatrix::from_fn(5, 1, |i, _| (i as f64 * 0.7).sin());
        m
    }

    #[test]
    fn koopman_round_trip_is_bit_exact() {
        let m = small_koopman();
        let text = Checkpoint::koopman(&m).to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back.kind(), "koopman");
        assert_eq!(back.into_koopman().unwrap(), m);
    }

    #[test]
    fn gru_round_trip_and_kind_checks() {
        let cfg = GruConfig { past_inputs: 2, past_outputs: 2, units: 3, init_hidden: 4, output_hidden: 4, ..Default::default() };
        let g = GruModel::init(cfg).unwrap();
        let text = Checkpoint::gru(&g).to_json().unwrap();
        assert!(text.contains("\"kind\": \"gru\""));
        assert_eq!(Checkpoint::from_json(&text).unwrap().into_gru().unwrap(), g);
        assert!(Checkpoint::from_json(&text).unwrap().into_koopman().is_err());
    }

    #[test]
    fn save_load_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        assert!(matches!(Checkpoint::load(&path), Err(Error::MissingArtifact(_))));
        let m = small_koopman();
        Checkpoint::koopman(&m).save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap().into_koopman().unwrap(), m);
    }

    #[test]
    fn rejects_future_version() {
        let mut ck = Checkpoint::koopman(&small_koopman());
        ck.format_version = 99;
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
    }
}
