//! Conversion prediction from baseline stage: labels, stage-threshold ROC,
//! cross-validation and the missing-data sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::{fit_cthmm, stage_cthmm, CthmmConfig};
use crate::cohort::{ablate_features, split_folds, Cohort, Diagnosis, Individual};
use crate::error::{Error, Result};
use crate::inference::{fit, FitConfig};
use crate::mixture::{fit_mixtures, MixtureConfig};
use crate::scalar::Scalar;
use crate::sequence::EventSequence;
use crate::staging::viterbi_stage;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionLabel {
    pub subject_id: String,
    pub converted: bool,
    pub baseline_group: Diagnosis,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub na_baseline: usize,
    pub ad_baseline: usize,
    pub no_follow_up: usize,
}

fn severity(d: Diagnosis) -> Option<u8> {
    match d {
        Diagnosis::CN => Some(0),
        Diagnosis::MCI => Some(1),
        Diagnosis::AD => Some(2),
        Diagnosis::NA => None,
    }
}

/// Labels individuals whose baseline is CN or MCI as converters when any
/// labelled visit within `horizon_months` of baseline carries a more
/// advanced diagnosis.
pub fn conversion_labels(cohort: &Cohort, horizon_months: f64) -> Result<(Vec<ConversionLabel>, ExclusionReport)> {
    let mut labels = Vec::new();
    let mut excluded = ExclusionReport::default();
    for ind in cohort.individuals() {
        let base = ind.baseline_label();
        match base {
            Diagnosis::NA => {
                excluded.na_baseline += 1;
                continue;
            }
            Diagnosis::AD => {
                excluded.ad_baseline += 1;
                continue;
            }
            _ => {}
        }
        let t0 = ind.observations[0].visit_time;
        let follow_ups: Vec<u8> = ind
            .observations
            .iter()
            .zip(&ind.diagnosis_labels)
            .skip(1)
            .filter(|(o, _)| o.visit_time - t0 <= horizon_months + 1e-9)
            .filter_map(|(_, l)| severity(*l))
            .collect();
        if follow_ups.is_empty() {
            excluded.no_follow_up += 1;
            continue;
        }
        let base_sev = severity(base).expect("labelled baseline");
        labels.push(ConversionLabel {
            subject_id: ind.id.clone(),
            converted: follow_ups.iter().any(|&s| s > base_sev),
            baseline_group: base,
        });
    }
    if labels.is_empty() {
        return Err(Error::Evaluation(format!(
            "no individual is eligible for conversion labelling ({excluded:?})"
        )));
    }
    Ok((labels, excluded))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Subjects with `stage > threshold` are predicted converters.
    pub threshold: i64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    /// Ordered from the strictest threshold (`max_stage`) to the loosest (`-1`).
    pub thresholds: Vec<RocPoint>,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// ROC of the rule "stage greater than threshold" swept over every
/// threshold from `max_stage` down to `-1`; AUC by the trapezoidal rule.
pub fn stage_threshold_auroc(
    stages: &BTreeMap<String, usize>,
    labels: &[ConversionLabel],
    max_stage: usize,
) -> Result<RocResult> {
    let mut scored = Vec::with_capacity(labels.len());
    for l in labels {
        let s = *stages
            .get(&l.subject_id)
            .ok_or_else(|| Error::Evaluation(format!("no stage for subject '{}'", l.subject_id)))?;
        scored.push((s, l.converted));
    }
    let n_pos = scored.iter().filter(|(_, c)| *c).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation(format!(
            "AUC undefined with {n_pos} converters and {n_neg} non-converters"
        )));
    }
    let top = max_stage.max(scored.iter().map(|(s, _)| *s).max().unwrap_or(0));
    let mut thresholds = Vec::with_capacity(top + 2);
    for threshold in (-1..=top as i64).rev() {
        let (mut tp, mut fp) = (0usize, 0usize);
        for &(s, c) in &scored {
            if s as i64 > threshold {
                if c {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        thresholds.push(RocPoint {
            threshold,
            tpr: tp as f64 / n_pos as f64,
            fpr: fp as f64 / n_neg as f64,
        });
    }
    let auc = thresholds
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum();
    Ok(RocResult {
        auc,
        thresholds,
        n_pos,
        n_neg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ebhmm,
    Cthmm,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ebhmm => "EB-HMM",
            ModelKind::Cthmm => "CT-HMM",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ebhmm" | "eb-hmm" => Ok(ModelKind::Ebhmm),
            "cthmm" | "ct-hmm" => Ok(ModelKind::Cthmm),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// Which individuals enter an evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    /// Everyone, including individuals with missing cells.
    #[default]
    Full,
    /// Only individuals without any missing cell.
    Subset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub horizon_months: f64,
    pub stratify: bool,
    pub mode: DataMode,
    /// Ablation in the missing-data sweep also hides cells of the held-out
    /// individuals; by default only the training folds lose data.
    pub ablate_test: bool,
    pub patient_label: Diagnosis,
    pub control_label: Diagnosis,
    pub mixture: MixtureConfig,
    pub fit: FitConfig,
    pub cthmm: CthmmConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            horizon_months: 24.0,
            stratify: false,
            mode: DataMode::Full,
            ablate_test: false,
            patient_label: Diagnosis::AD,
            control_label: Diagnosis::CN,
            mixture: MixtureConfig::default(),
            fit: FitConfig::default(),
            cthmm: CthmmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub auc: Option<f64>,
    pub n_test: usize,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: ModelKind,
    pub mean: f64,
    /// Sample standard deviation across evaluated folds.
    pub sd: f64,
    pub folds: Vec<FoldOutcome>,
}

/// Baseline stage of every test individual, staged from its first visit only.
pub fn baseline_stages<T: Scalar>(
    train: &Cohort,
    test: &Cohort,
    kind: ModelKind,
    config: &EvalConfig,
) -> Result<(BTreeMap<String, usize>, usize)> {
    let mut stages = BTreeMap::new();
    match kind {
        ModelKind::Ebhmm => {
            let mixtures = fit_mixtures::<T>(train, config.patient_label, config.control_label, &config.mixture)?;
            let model = fit(train, &mixtures.pairs, &config.fit)?;
            for ind in test.individuals() {
                let path = viterbi_stage(&ind.baseline_only(), &model)?;
                stages.insert(ind.id.clone(), path.stages[0]);
            }
            Ok((stages, model.n_events()))
        }
        ModelKind::Cthmm => {
            let model = fit_cthmm::<T>(train, &config.cthmm)?;
            for ind in test.individuals() {
                let path = stage_cthmm(&ind.baseline_only(), &model)?;
                stages.insert(ind.id.clone(), path.stages[0]);
            }
            Ok((stages, model.n_states() - 1))
        }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// K-fold cross-validated conversion AU-ROC. Mixtures and models are refit
/// inside each training fold; a fold whose test labels are all one class
/// is skipped and reported.
pub fn cross_validated_auroc<T: Scalar>(
    cohort: &Cohort,
    kind: ModelKind,
    k: usize,
    seed: u64,
    config: &EvalConfig,
) -> Result<CvResult> {
    let data = match config.mode {
        DataMode::Full => cohort.clone(),
        DataMode::Subset => cohort.complete_subset(),
    };
    run_folds::<T>(&data, None, kind, k, seed, config)
}

/// Cross-validation over `data`. When `train_source` is given, training
/// folds take each individual's record from it instead of from `data`.
fn run_folds<T: Scalar>(
    data: &Cohort,
    train_source: Option<&Cohort>,
    kind: ModelKind,
    k: usize,
    seed: u64,
    config: &EvalConfig,
) -> Result<CvResult> {
    let mut folds = split_folds(data, k, seed, config.stratify)?;
    if let Some(source) = train_source {
        let by_id: BTreeMap<&str, &Individual> = source.individuals().iter().map(|i| (i.id.as_str(), i)).collect();
        for fold in &mut folds {
            let swapped = fold
                .train
                .individuals()
                .iter()
                .map(|i| by_id.get(i.id.as_str()).map_or_else(|| i.clone(), |s| (*s).clone()))
                .collect();
            fold.train = fold.train.with_individuals(swapped);
        }
    }
    let mut outcomes = Vec::with_capacity(k);
    let mut aucs = Vec::new();
    for (i, fold) in folds.iter().enumerate() {
        let labels = match conversion_labels(&fold.test, config.horizon_months) {
            Ok((labels, _)) => labels,
            Err(e) => {
                log::warn!("fold {i} skipped: {e}");
                outcomes.push(FoldOutcome {
                    fold: i,
                    auc: None,
                    n_test: fold.test.len(),
                    skipped: Some(e.to_string()),
                });
                continue;
            }
        };
        let (stages, max_stage) = baseline_stages::<T>(&fold.train, &fold.test, kind, config)?;
        match stage_threshold_auroc(&stages, &labels, max_stage) {
            Ok(roc) => {
                aucs.push(roc.auc);
                outcomes.push(FoldOutcome {
                    fold: i,
                    auc: Some(roc.auc),
                    n_test: fold.test.len(),
                    skipped: None,
                });
            }
            Err(e) => {
                log::warn!("fold {i} skipped: {e}");
                outcomes.push(FoldOutcome {
                    fold: i,
                    auc: None,
                    n_test: fold.test.len(),
                    skipped: Some(e.to_string()),
                });
            }
        }
    }
    if aucs.is_empty() {
        return Err(Error::Evaluation("every fold had an undefined AUC".into()));
    }
    let (mean, sd) = mean_sd(&aucs);
    Ok(CvResult {
        model: kind,
        mean,
        sd,
        folds: outcomes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub missing_cells: usize,
    pub result: CvResult,
}

/// Re-runs cross-validation after hiding each fraction of observed cells.
/// The same seed drives ablation and fold assignment, so rows differ only
/// in which cells are hidden. Models are retrained on the ablated training
/// folds; held-out individuals keep their recorded data unless
/// `config.ablate_test` is set.
pub fn missing_data_sweep<T: Scalar>(
    cohort: &Cohort,
    fractions: &[f64],
    k: usize,
    seed: u64,
    config: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    let base = match config.mode {
        DataMode::Full => cohort.clone(),
        DataMode::Subset => cohort.complete_subset(),
    };
    let mut cfg = config.clone();
    cfg.mode = DataMode::Full;
    fractions
        .iter()
        .map(|&fraction| {
            let ablated = ablate_features(&base, fraction, seed)?;
            let result = if cfg.ablate_test {
                run_folds::<T>(&ablated, None, ModelKind::Ebhmm, k, seed, &cfg)?
            } else {
                run_folds::<T>(&base, Some(&ablated), ModelKind::Ebhmm, k, seed, &cfg)?
            };
            Ok(SweepRow {
                fraction,
                missing_cells: ablated.n_missing_cells(),
                result,
            })
        })
        .collect()
}

/// Kendall rank correlation between two event orders.
pub fn kendall_tau(a: &EventSequence, b: &EventSequence) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument("sequences differ in length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let pa = a.positions();
    let pb = b.positions();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let sa = (pa[i] as i64 - pa[j] as i64).signum();
            let sb = (pb[i] as i64 - pb[j] as i64).signum();
            score += sa * sb;
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}
