//! Run configuration: a TOML file whose keys mirror the flags, which win.

use std::path::{Path, PathBuf};

use ebhmm_core::baseline::{CovarianceKind, CthmmConfig};
use ebhmm_core::eval::{DataMode, EvalConfig, ModelKind};
use ebhmm_core::inference::FitConfig;
use ebhmm_core::mixture::MixtureConfig;
use ebhmm_core::Diagnosis;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub base_interval_months: f64,
    pub band_width: usize,
    pub max_outer_iter: usize,
    pub random_restarts: usize,
    pub init_self_transition: f64,
    pub patient_label: Diagnosis,
    pub control_label: Diagnosis,
    /// Features whose low values are pathological.
    pub decreasing_features: Vec<String>,
    pub model_kind: ModelKind,
    /// Horizon used by `predict` and by the prediction column of `stage`.
    pub prediction_horizon_months: f64,
    pub mixture: MixtureConfig,
    pub cthmm: CthmmSection,
    pub eval: EvalSection,
    pub simulate: SimulateSection,
    /// Default file locations; excluded from the config hash.
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            base_interval_months: 12.0,
            band_width: 2,
            max_outer_iter: 100,
            random_restarts: 1,
            init_self_transition: 0.9,
            patient_label: Diagnosis::AD,
            control_label: Diagnosis::CN,
            decreasing_features: Vec::new(),
            model_kind: ModelKind::Ebhmm,
            prediction_horizon_months: 12.0,
            mixture: MixtureConfig::default(),
            cthmm: CthmmSection::default(),
            eval: EvalSection::default(),
            simulate: SimulateSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CthmmSection {
    /// Defaults to the number of features plus one.
    pub n_states: Option<usize>,
    pub covariance: CovarianceKind,
    pub tolerance: f64,
    pub max_iter: usize,
    pub ridge: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_reseeds: usize,
}

impl Default for CthmmSection {
    fn default() -> Self {
        let d = CthmmConfig::default();
        CthmmSection {
            n_states: d.n_states,
            covariance: d.covariance,
            tolerance: d.tolerance,
            max_iter: d.max_iter,
            ridge: d.ridge,
            kmeans_max_iter: d.kmeans_max_iter,
            kmeans_reseeds: d.kmeans_reseeds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub horizon_months: f64,
    pub folds: usize,
    pub stratify: bool,
    /// Data mode of `ablate`; `evaluate` always reports both.
    pub mode: DataMode,
    pub ablate_test: bool,
    pub fractions: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            horizon_months: 24.0,
            folds: 5,
            stratify: false,
            mode: DataMode::Full,
            ablate_test: false,
            fractions: vec![0.0, 0.25, 0.5, 0.75],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_events: usize,
    pub separation: f64,
    pub self_transition: f64,
    pub n_individuals: usize,
    pub visits: Vec<f64>,
    pub missing_fraction: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            n_events: 6,
            separation: 4.0,
            self_transition: 0.7,
            n_individuals: 300,
            visits: vec![0.0, 12.0, 24.0],
            missing_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub cohort: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(message()))
    }
}

fn unit_open(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(self.base_interval_months > 0.0, || {
            "base_interval_months must be > 0".into()
        })?;
        check(self.band_width >= 1, || "band_width must be >= 1".into())?;
        check(self.max_outer_iter >= 1, || "max_outer_iter must be >= 1".into())?;
        check(self.random_restarts >= 1, || "random_restarts must be >= 1".into())?;
        check(unit_open(self.init_self_transition), || {
            "init_self_transition must lie in (0, 1)".into()
        })?;
        check(self.patient_label != self.control_label, || {
            "patient_label and control_label must differ".into()
        })?;
        check(self.prediction_horizon_months > 0.0, || {
            "prediction_horizon_months must be > 0".into()
        })?;

        let m = &self.mixture;
        check(m.min_group_size >= 2, || "mixture.min_group_size must be >= 2".into())?;
        check(m.max_iter >= 1, || "mixture.max_iter must be >= 1".into())?;
        check(m.tolerance > 0.0, || "mixture.tolerance must be > 0".into())?;
        check(m.max_mean_shift_sd >= 0.0, || {
            "mixture.max_mean_shift_sd must be >= 0".into()
        })?;
        check(unit_open(m.sigma_floor_fraction), || {
            "mixture.sigma_floor_fraction must lie in (0, 1)".into()
        })?;

        let c = &self.cthmm;
        check(c.n_states.is_none_or(|n| n >= 2), || {
            "cthmm.n_states must be >= 2".into()
        })?;
        check(c.tolerance > 0.0, || "cthmm.tolerance must be > 0".into())?;
        check(c.max_iter >= 1, || "cthmm.max_iter must be >= 1".into())?;
        check(c.ridge >= 0.0, || "cthmm.ridge must be >= 0".into())?;
        check(c.kmeans_max_iter >= 1, || "cthmm.kmeans_max_iter must be >= 1".into())?;

        let e = &self.eval;
        check(e.horizon_months > 0.0, || "eval.horizon_months must be > 0".into())?;
        check(e.folds >= 2, || "eval.folds must be >= 2".into())?;
        check(!e.fractions.is_empty(), || "eval.fractions must not be empty".into())?;
        check(e.fractions.iter().all(|f| (0.0..1.0).contains(f)), || {
            "eval.fractions must lie in [0, 1)".into()
        })?;

        let s = &self.simulate;
        check(s.n_events >= 2, || "simulate.n_events must be >= 2".into())?;
        check(s.separation > 0.0, || "simulate.separation must be > 0".into())?;
        check(unit_open(s.self_transition), || {
            "simulate.self_transition must lie in (0, 1)".into()
        })?;
        check(s.n_individuals >= 1, || "simulate.n_individuals must be >= 1".into())?;
        check(!s.visits.is_empty(), || "simulate.visits must not be empty".into())?;
        check(s.visits[0] >= 0.0 && s.visits.windows(2).all(|w| w[1] > w[0]), || {
            "simulate.visits must be nonnegative and strictly ascending".into()
        })?;
        check((0.0..1.0).contains(&s.missing_fraction), || {
            "simulate.missing_fraction must lie in [0, 1)".into()
        })?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, paths left out.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.paths = PathsSection::default();
        let json = serde_json::to_string(&hashed).expect("config serialises");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            base_interval_months: self.base_interval_months,
            band_width: self.band_width,
            max_outer_iter: self.max_outer_iter,
            random_restarts: self.random_restarts,
            seed: self.seed,
            init_self_transition: self.init_self_transition,
            patient_label: self.patient_label,
        }
    }

    pub fn cthmm_config(&self) -> CthmmConfig {
        let c = &self.cthmm;
        CthmmConfig {
            n_states: c.n_states,
            band_width: self.band_width,
            base_interval_months: self.base_interval_months,
            covariance: c.covariance,
            tolerance: c.tolerance,
            max_iter: c.max_iter,
            seed: self.seed,
            init_self_transition: self.init_self_transition,
            ridge: c.ridge,
            kmeans_max_iter: c.kmeans_max_iter,
            kmeans_reseeds: c.kmeans_reseeds,
            patient_label: self.patient_label,
            control_label: self.control_label,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            horizon_months: self.eval.horizon_months,
            stratify: self.eval.stratify,
            mode: self.eval.mode,
            ablate_test: self.eval.ablate_test,
            patient_label: self.patient_label,
            control_label: self.control_label,
            mixture: self.mixture.clone(),
            fit: self.fit_config(),
            cthmm: self.cthmm_config(),
        }
    }
}
