use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::LiftingConfig;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, MatrixDoc};
use crate::nn::{DenseNet, LayerDoc};

/// Encoder `g`, decoder `g⁻¹`, lifted operator `K` and input gain `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub config: LiftingConfig,
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    /// `k x k`
    pub operator: DMatrix<f64>,
    /// `k x m`; zero until identified.
    pub input_gain: DMatrix<f64>,
}

impl KoopmanModel {
    /// Freshly initialised network (seeded Glorot weights, identity operator).
    pub fn init(config: LiftingConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.input_dim();
        let k = config.latent_dim;
        let encoder = DenseNet::new(&[d, config.hidden_encoder, k], &mut rng);
        let decoder = DenseNet::new(&[k, config.hidden_decoder, d], &mut rng);
        Ok(Self {
            config,
            encoder,
            decoder,
            operator: DMatrix::identity(k, k),
            input_gain: DMatrix::zeros(k, 1),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.operator.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.inputs()
    }

    pub fn encode(&self, windows: &DMatrix<f64>) -> DMatrix<f64> {
        self.encoder.forward(windows)
    }

    pub fn decode(&self, latents: &DMatrix<f64>) -> DMatrix<f64> {
        self.decoder.forward(latents)
    }

    pub fn encode_vec(&self, window: &DVector<f64>) -> DVector<f64> {
        self.encoder.forward(&DMatrix::from_column_slice(window.len(), 1, window.as_slice())).column(0).into_owned()
    }

    pub fn decode_vec(&self, latent: &DVector<f64>) -> DVector<f64> {
        self.decoder.forward(&DMatrix::from_column_slice(latent.len(), 1, latent.as_slice())).column(0).into_owned()
    }

    /// One forced latent step `K z + B u`.
    pub fn step_latent(&self, z: &DVector<f64>, u: Option<&[f64]>) -> DVector<f64> {
        let mut next = &self.operator * z;
        if let Some(u) = u {
            next += &self.input_gain * DVector::from_column_slice(u);
        }
        next
    }

    pub fn weight_norm_sq(&self) -> f64 {
        self.encoder.weight_norm_sq() + self.decoder.weight_norm_sq()
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let k = self.encoder.outputs();
        if self.operator.shape() != (k, k) {
            return Err(Error::Dimension { context: "operator side", expected: k, actual: self.operator.nrows() });
        }
        if self.decoder.inputs() != k {
            return Err(Error::Dimension { context: "decoder input", expected: k, actual: self.decoder.inputs() });
        }
        if self.decoder.outputs() != self.encoder.inputs() {
            return Err(Error::Dimension {
                context: "decoder output",
                expected: self.encoder.inputs(),
                actual: self.decoder.outputs(),
            });
        }
        if self.input_gain.nrows() != k {
            return Err(Error::Dimension { context: "input gain rows", expected: k, actual: self.input_gain.nrows() });
        }
        if !all_finite(&self.operator) || !all_finite(&self.input_gain) {
            return Err(Error::Format("non-finite operator or input gain".into()));
        }
        Ok(())
    }

    pub fn to_doc(&self) -> KoopmanDoc {
        KoopmanDoc {
            config: self.config,
            encoder: self.encoder.to_doc(),
            decoder: self.decoder.to_doc(),
            operator: MatrixDoc::from(&self.operator),
            input_gain: MatrixDoc::from(&self.input_gain),
        }
    }

    pub fn from_doc(doc: &KoopmanDoc) -> Result<Self> {
        let model = Self {
            config: doc.config,
            encoder: DenseNet::from_doc(&doc.encoder)?,
            decoder: DenseNet::from_doc(&doc.decoder)?,
            operator: doc.operator.to_matrix()?,
            input_gain: doc.input_gain.to_matrix()?,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Serialised form of a [`KoopmanModel`]; all matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoopmanDoc {
    pub config: LiftingConfig,
    pub encoder: Vec<LayerDoc>,
    pub decoder: Vec<LayerDoc>,
    pub operator: MatrixDoc,
    pub input_gain: MatrixDoc,
}
