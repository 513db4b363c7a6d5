//! Versioned JSON document for fitted models.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::baseline::{Covariance, CovarianceKind, CthmmDiagnostics, CthmmModel};
use crate::cohort::Direction;
use crate::error::{Error, Result};
use crate::inference::{FitDiagnostics, FittedModel};
use crate::markov::TransitionModel;
use crate::mixture::{GaussianParams, MixturePair};
use crate::scalar::Scalar;
use crate::sequence::EventSequence;
use crate::synth::{GroundTruth, LabelRule};

pub const FORMAT_VERSION: u32 = 1;

/// What produced an artifact, for exact reruns.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelDocument<T> {
    pub format_version: u32,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: ModelBody<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase", bound = "T: Scalar")]
pub enum ModelBody<T> {
    Ebhmm(EbhmmDocument<T>),
    Cthmm(CthmmDocument<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MixtureEntry<T> {
    pub feature: String,
    pub patient: GaussianParams<T>,
    pub control: GaussianParams<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EbhmmDocument<T> {
    pub feature_names: Vec<String>,
    /// Event order as feature names, earliest first.
    pub sequence: Vec<String>,
    pub base_interval_months: T,
    pub band_width: usize,
    pub pi: Vec<T>,
    pub trans: Vec<Vec<T>>,
    pub mixtures: Vec<MixtureEntry<T>>,
    pub diagnostics: FitDiagnostics<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CthmmDocument<T> {
    pub feature_names: Vec<String>,
    pub base_interval_months: T,
    pub band_width: usize,
    pub pi: Vec<T>,
    pub trans: Vec<Vec<T>>,
    pub means: Vec<Vec<T>>,
    pub covariance_kind: CovarianceKind,
    /// Full `I × I` matrix when shared, `states × I` variances when diagonal.
    pub covariance: Vec<Vec<T>>,
    pub diagnostics: CthmmDiagnostics<T>,
}

fn to_rows<T: Scalar>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows<T: Scalar>(rows: &[Vec<T>], what: &str) -> Result<Array2<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Schema(format!("'{what}' rows have unequal lengths")));
    }
    Array2::from_shape_vec((n, m), rows.iter().flatten().copied().collect())
        .map_err(|e| Error::Schema(format!("'{what}': {e}")))
}

impl<T: Scalar> From<&FittedModel<T>> for EbhmmDocument<T> {
    fn from(m: &FittedModel<T>) -> Self {
        EbhmmDocument {
            feature_names: m.feature_names.clone(),
            sequence: m.sequence.order().iter().map(|&f| m.feature_names[f].clone()).collect(),
            base_interval_months: m.transition.base_interval_months,
            band_width: m.band_width,
            pi: m.transition.pi.to_vec(),
            trans: to_rows(&m.transition.trans),
            mixtures: m
                .mixtures
                .iter()
                .map(|p| MixtureEntry {
                    feature: m.feature_names[p.feature_index].clone(),
                    patient: p.patient,
                    control: p.control,
                })
                .collect(),
            diagnostics: m.diagnostics.clone(),
        }
    }
}

impl<T: Scalar> EbhmmDocument<T> {
    pub fn to_model(&self) -> Result<FittedModel<T>> {
        let index = |name: &str| {
            self.feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema(format!("unknown feature '{name}' in model document")))
        };
        let order = self.sequence.iter().map(|n| index(n)).collect::<Result<Vec<_>>>()?;
        let sequence = EventSequence::new(order)?;
        let mixtures = self
            .mixtures
            .iter()
            .map(|e| MixturePair::new(e.patient, e.control, index(&e.feature)?))
            .collect::<Result<Vec<_>>>()?;
        let transition = TransitionModel::new(
            Array1::from(self.pi.clone()),
            from_rows(&self.trans, "trans")?,
            self.base_interval_months,
        )?;
        if transition.n_stages() != sequence.len() + 1 || mixtures.len() != sequence.len() {
            return Err(Error::Schema("model document dimensions disagree".into()));
        }
        let mut mixtures = mixtures;
        mixtures.sort_by_key(|p| p.feature_index);
        Ok(FittedModel {
            feature_names: self.feature_names.clone(),
            sequence,
            transition,
            band_width: self.band_width,
            mixtures,
            diagnostics: self.diagnostics.clone(),
        })
    }
}

impl<T: Scalar> From<&CthmmModel<T>> for CthmmDocument<T> {
    fn from(m: &CthmmModel<T>) -> Self {
        let (covariance_kind, covariance) = match &m.covariance {
            Covariance::Shared { matrix } => (CovarianceKind::Shared, to_rows(matrix)),
            Covariance::DiagonalPerState { variances } => (CovarianceKind::DiagonalPerState, to_rows(variances)),
        };
        CthmmDocument {
            feature_names: m.feature_names.clone(),
            base_interval_months: m.transition.base_interval_months,
            band_width: m.band_width,
            pi: m.transition.pi.to_vec(),
            trans: to_rows(&m.transition.trans),
            means: to_rows(&m.means),
            covariance_kind,
            covariance,
            diagnostics: m.diagnostics.clone(),
        }
    }
}

impl<T: Scalar> CthmmDocument<T> {
    pub fn to_model(&self) -> Result<CthmmModel<T>> {
        let transition = TransitionModel::new(
            Array1::from(self.pi.clone()),
            from_rows(&self.trans, "trans")?,
            self.base_interval_months,
        )?;
        let means = from_rows(&self.means, "means")?;
        let cov = from_rows(&self.covariance, "covariance")?;
        let covariance = match self.covariance_kind {
            CovarianceKind::Shared => Covariance::Shared { matrix: cov },
            CovarianceKind::DiagonalPerState => Covariance::DiagonalPerState { variances: cov },
        };
        Ok(CthmmModel {
            feature_names: self.feature_names.clone(),
            transition,
            band_width: self.band_width,
            means,
            covariance,
            diagnostics: self.diagnostics.clone(),
        })
    }
}

impl<T: Scalar> ModelDocument<T> {
    pub fn new(provenance: Provenance, body: ModelBody<T>) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            provenance,
            body,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument<T> = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format_version {} is not supported (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Ground truth of a synthetic cohort, in the same row layout as models.
/// `format_version` and `provenance` are optional so hand-written truth
/// files stay short; `latent_stages` is filled in by the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct TruthDocument<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub feature_names: Vec<String>,
    pub feature_directions: Vec<Direction>,
    /// Event order as feature names, earliest first.
    pub sequence: Vec<String>,
    pub base_interval_months: T,
    pub pi: Vec<T>,
    pub trans: Vec<Vec<T>>,
    pub mixtures: Vec<MixtureEntry<T>>,
    pub label_rule: LabelRule,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub latent_stages: BTreeMap<String, Vec<usize>>,
}

impl<T: Scalar> From<&GroundTruth<T>> for TruthDocument<T> {
    fn from(t: &GroundTruth<T>) -> Self {
        TruthDocument {
            format_version: Some(FORMAT_VERSION),
            provenance: None,
            feature_names: t.feature_names.clone(),
            feature_directions: t.feature_directions.clone(),
            sequence: t.sequence.order().iter().map(|&f| t.feature_names[f].clone()).collect(),
            base_interval_months: t.transition.base_interval_months,
            pi: t.transition.pi.to_vec(),
            trans: to_rows(&t.transition.trans),
            mixtures: t
                .mixtures
                .iter()
                .map(|p| MixtureEntry {
                    feature: t.feature_names[p.feature_index].clone(),
                    patient: p.patient,
                    control: p.control,
                })
                .collect(),
            label_rule: t.label_rule.clone(),
            latent_stages: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> TruthDocument<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TruthDocument<T> = serde_json::from_str(text)?;
        if let Some(v) = doc.format_version {
            if v != FORMAT_VERSION {
                return Err(Error::Schema(format!(
                    "truth format_version {v} is not supported (expected {FORMAT_VERSION})"
                )));
            }
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_truth(&self) -> Result<GroundTruth<T>> {
        let index = |name: &str| {
            self.feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema(format!("unknown feature '{name}' in truth document")))
        };
        let sequence = EventSequence::new(self.sequence.iter().map(|n| index(n)).collect::<Result<Vec<_>>>()?)?;
        let mut mixtures = self
            .mixtures
            .iter()
            .map(|e| MixturePair::new(e.patient, e.control, index(&e.feature)?))
            .collect::<Result<Vec<_>>>()?;
        mixtures.sort_by_key(|p| p.feature_index);
        let truth = GroundTruth {
            feature_names: self.feature_names.clone(),
            feature_directions: self.feature_directions.clone(),
            sequence,
            transition: TransitionModel::new(
                Array1::from(self.pi.clone()),
                from_rows(&self.trans, "trans")?,
                self.base_interval_months,
            )?,
            mixtures,
            label_rule: self.label_rule.clone(),
        };
        truth.validate()?;
        Ok(truth)
    }
}
