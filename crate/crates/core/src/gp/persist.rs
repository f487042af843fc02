//! JSON model files. The factorization and weights are rebuilt on load and
//! checked against the stored log marginal likelihood.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelHyperparams;
use crate::scalar::Real;
use crate::types::RegressionData;

use super::GpModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const LML_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub shape: [usize; 2],
    /// Row-major.
    pub data: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_matrix<T: Real>(m: &DMatrix<T>) -> Self {
        let data = m
            .row_iter()
            .flat_map(|r| r.iter().map(|v| v.f64()).collect::<Vec<_>>())
            .collect();
        Self {
            shape: [m.nrows(), m.ncols()],
            data,
        }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<DMatrix<T>> {
        let [r, c] = self.shape;
        if self.data.len() != r * c {
            return Err(Error::Usage(format!(
                "matrix of shape {r}x{c} needs {} values, found {}",
                r * c,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_iterator(
            r,
            c,
            self.data.iter().map(|&v| T::c(v)),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperDoc {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub sigma_n_sq: f64,
}

impl<T: Real> From<&KernelHyperparams<T>> for HyperDoc {
    fn from(h: &KernelHyperparams<T>) -> Self {
        Self {
            sigma_f: h.sigma_f.f64(),
            length_scale: h.length_scale.f64(),
            sigma_n_sq: h.sigma_n_sq.f64(),
        }
    }
}

impl HyperDoc {
    pub fn to_hyper<T: Real>(&self) -> Result<KernelHyperparams<T>> {
        KernelHyperparams::new(
            T::c(self.sigma_f),
            T::c(self.length_scale),
            T::c(self.sigma_n_sq),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub x_train: MatrixDoc,
    pub y_train: MatrixDoc,
    pub hyper: HyperDoc,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    /// Free-form record of how the model was produced.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

impl<T: Real> GpModel<T> {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            x_train: MatrixDoc::from_matrix(&self.x_train),
            y_train: MatrixDoc::from_matrix(&self.y_train),
            hyper: HyperDoc::from(self.hyper()),
            jitter: self.jitter.f64(),
            log_marginal_likelihood: self.log_marginal_likelihood().f64(),
            provenance: serde_json::Value::Null,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: doc.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let reg = RegressionData::<T>::new(doc.x_train.to_matrix()?, doc.y_train.to_matrix()?)?;
        let model = GpModel::fit(&reg, doc.hyper.to_hyper()?)?;
        let recomputed = model.log_marginal_likelihood().f64();
        let stored = doc.log_marginal_likelihood;
        let tol = LML_REL_TOL.max(100.0 * T::default_epsilon().f64());
        if !((recomputed - stored).abs() <= tol * stored.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::ModelChecksum { stored, recomputed });
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}
