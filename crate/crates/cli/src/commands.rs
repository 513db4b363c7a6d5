use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ebhmm_core::baseline::{fit_cthmm, stage_cthmm, CthmmModel};
use ebhmm_core::cohort::{load_cohort, save_cohort, DataFormat};
use ebhmm_core::document::{
    CthmmDocument, EbhmmDocument, ModelBody, ModelDocument, Provenance, TruthDocument, FORMAT_VERSION,
};
use ebhmm_core::eval::{
    conversion_labels, cross_validated_auroc, kendall_tau, missing_data_sweep, CvResult, DataMode, ExclusionReport,
    ModelKind, SweepRow,
};
use ebhmm_core::inference::{fit, FittedModel};
use ebhmm_core::markov::TransitionModel;
use ebhmm_core::mixture::fit_mixtures;
use ebhmm_core::staging::{predict_next_stage, propagate, viterbi_stage, StagePath};
use ebhmm_core::synth::{sample_cohort, GroundTruth};
use ebhmm_core::{Cohort, Error, EventSequence, Individual};
use ndarray::Array1;
use serde::Serialize;

use crate::args::{AblateArgs, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, StageArgs, TimelineArgs};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{csv_text, emit, emit_csv, num, provenance, read_text, with_path, write_sidecar, write_text};

/// Effective configuration shared by every command.
pub struct Context {
    pub config: RunConfig,
    pub hash: String,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        config.validate()?;
        let hash = config.hash();
        Ok(Context { config, hash })
    }

    fn provenance(&self) -> Provenance {
        provenance(&self.hash, self.config.seed)
    }

    fn load_cohort(&self, path: &Path) -> Result<Cohort, CliError> {
        let fmt = DataFormat::from_path(path);
        with_path(path, load_cohort(path, fmt, &self.config.decreasing_features))
    }
}

fn required(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set paths.{name} in the config)")))
}

fn optional(flag: &Option<PathBuf>, fallback: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| fallback.clone())
}

enum Model {
    Ebhmm(FittedModel<f64>),
    Cthmm(CthmmModel<f64>),
}

impl Model {
    fn load(path: &Path) -> Result<Self, CliError> {
        let doc = ModelDocument::<f64>::from_json(&read_text(path)?)?;
        Ok(match doc.body {
            ModelBody::Ebhmm(b) => Model::Ebhmm(b.to_model()?),
            ModelBody::Cthmm(b) => Model::Cthmm(b.to_model()?),
        })
    }

    fn feature_names(&self) -> &[String] {
        match self {
            Model::Ebhmm(m) => &m.feature_names,
            Model::Cthmm(m) => &m.feature_names,
        }
    }

    fn transition(&self) -> &TransitionModel<f64> {
        match self {
            Model::Ebhmm(m) => &m.transition,
            Model::Cthmm(m) => &m.transition,
        }
    }

    fn stage(&self, ind: &Individual) -> Result<StagePath<f64>, CliError> {
        Ok(match self {
            Model::Ebhmm(m) => viterbi_stage(ind, m)?,
            Model::Cthmm(m) => stage_cthmm(ind, m)?,
        })
    }

    fn predict(&self, ind: &Individual, horizon: f64) -> Result<(usize, Array1<f64>), CliError> {
        Ok(match self {
            Model::Ebhmm(m) => predict_next_stage(ind, m, horizon)?,
            Model::Cthmm(m) => m.predict_next_stage(ind, horizon)?,
        })
    }

    /// Features are matched by name and position.
    fn check_cohort(&self, cohort: &Cohort) -> Result<(), CliError> {
        if cohort.feature_names() != self.feature_names() {
            return Err(Error::Schema(format!(
                "cohort features [{}] do not match model features [{}]",
                cohort.feature_names().join(", "),
                self.feature_names().join(", ")
            ))
            .into());
        }
        Ok(())
    }
}

pub fn fit_cmd(ctx: &Context, args: &FitArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let cohort = ctx.load_cohort(&required(&args.cohort, &cfg.paths.cohort, "cohort")?)?;
    let truth_path = optional(&args.truth, &cfg.paths.truth);
    let out = optional(&args.out, &cfg.paths.out);

    let mut summary = Vec::new();
    let body = match cfg.model_kind {
        ModelKind::Ebhmm => {
            let mixtures = fit_mixtures::<f64>(&cohort, cfg.patient_label, cfg.control_label, &cfg.mixture)?;
            let model = fit(&cohort, &mixtures.pairs, &cfg.fit_config())?;
            let names: Vec<&str> = model
                .sequence
                .order()
                .iter()
                .map(|&f| model.feature_names[f].as_str())
                .collect();
            summary.push("model_type: ebhmm".to_string());
            summary.push(format!("sequence: {}", names.join(" ")));
            summary.push(format!(
                "log_likelihood: {}",
                num(*model.diagnostics.log_likelihood_trace.last().unwrap_or(&f64::NAN))
            ));
            summary.push(format!("iterations: {}", model.diagnostics.iterations));
            summary.push(format!("converged: {}", model.diagnostics.converged));
            for note in &model.diagnostics.notes {
                summary.push(format!("note: {note}"));
            }
            if let Some(path) = &truth_path {
                let truth = TruthDocument::<f64>::from_json(&read_text(path)?)?.to_truth()?;
                let tau = kendall_tau(&model.sequence, &truth_sequence_in(&truth, &model.feature_names)?)?;
                summary.push(format!("kendall_tau: {}", num(tau)));
            }
            ModelBody::Ebhmm(EbhmmDocument::from(&model))
        }
        ModelKind::Cthmm => {
            if truth_path.is_some() {
                return Err(
                    Error::Argument("--truth needs an EB-HMM fit: the CT-HMM has no event sequence".into()).into(),
                );
            }
            let model = fit_cthmm::<f64>(&cohort, &cfg.cthmm_config())?;
            summary.push("model_type: cthmm".to_string());
            summary.push(format!("states: {}", model.n_states()));
            summary.push(format!(
                "log_likelihood: {}",
                num(*model.diagnostics.log_likelihood_trace.last().unwrap_or(&f64::NAN))
            ));
            summary.push(format!("iterations: {}", model.diagnostics.iterations));
            summary.push(format!("converged: {}", model.diagnostics.converged));
            ModelBody::Cthmm(CthmmDocument::from(&model))
        }
    };
    let json = ModelDocument::new(ctx.provenance(), body).to_json()? + "\n";
    let summary = summary.join("\n") + "\n";
    match &out {
        Some(p) => {
            write_text(p, &json)?;
            stdout.write_all(summary.as_bytes())?;
        }
        None => {
            stdout.write_all(json.as_bytes())?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

/// The truth's event order expressed in `feature_names` indices.
fn truth_sequence_in(truth: &GroundTruth<f64>, feature_names: &[String]) -> Result<EventSequence, CliError> {
    let order = truth
        .sequence
        .order()
        .iter()
        .map(|&f| {
            let name = &truth.feature_names[f];
            feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema(format!("truth feature '{name}' is not in the model")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if order.len() != feature_names.len() {
        return Err(Error::Schema("truth and model have different feature sets".into()).into());
    }
    Ok(EventSequence::new(order)?)
}

pub fn stage_cmd(ctx: &Context, args: &StageArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = Model::load(&required(&args.model, &cfg.paths.model, "model")?)?;
    let cohort = ctx.load_cohort(&required(&args.cohort, &cfg.paths.cohort, "cohort")?)?;
    model.check_cohort(&cohort)?;
    let horizon = cfg.prediction_horizon_months;
    let header = [
        "subject_id",
        "visit_time",
        "stage",
        "max_posterior",
        "predicted_stage",
        "horizon_months",
    ];
    let mut rows = Vec::new();
    for ind in cohort.individuals() {
        let path = model.stage(ind)?;
        for (v, obs) in ind.observations.iter().enumerate() {
            let posterior = path.posterior_by_visit.row(v).to_owned();
            let (predicted, _) = propagate(&posterior, model.transition(), horizon)?;
            rows.push(vec![
                ind.id.clone(),
                num(obs.visit_time),
                path.stages[v].to_string(),
                num(path.max_posterior(v)),
                predicted.to_string(),
                num(horizon),
            ]);
        }
    }
    let text = csv_text(&header.map(String::from), &rows)?;
    emit_csv(
        optional(&args.out, &cfg.paths.out).as_deref(),
        &text,
        "stage",
        &ctx.provenance(),
        stdout,
    )
}

pub fn predict_cmd(ctx: &Context, args: &PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = Model::load(&required(&args.model, &cfg.paths.model, "model")?)?;
    let cohort = ctx.load_cohort(&required(&args.cohort, &cfg.paths.cohort, "cohort")?)?;
    model.check_cohort(&cohort)?;
    let horizon = cfg.prediction_horizon_months;
    let n_stages = model.transition().n_stages();
    let mut header: Vec<String> = ["subject_id", "last_visit_time", "horizon_months", "predicted_stage"]
        .map(String::from)
        .to_vec();
    header.extend((0..n_stages).map(|k| format!("p_stage_{k}")));
    let mut rows = Vec::new();
    for ind in cohort.individuals() {
        let (stage, dist) = model.predict(ind, horizon)?;
        let last = ind.observations.last().expect("individuals have visits").visit_time;
        let mut row = vec![ind.id.clone(), num(last), num(horizon), stage.to_string()];
        row.extend(dist.iter().map(|p| num(*p)));
        rows.push(row);
    }
    let text = csv_text(&header, &rows)?;
    emit_csv(
        optional(&args.out, &cfg.paths.out).as_deref(),
        &text,
        "predict",
        &ctx.provenance(),
        stdout,
    )
}

#[derive(Serialize)]
struct TimelineEvent {
    position: usize,
    event: String,
    sojourn_months: f64,
    event_time_months: f64,
    event_time_years: f64,
}

#[derive(Serialize)]
struct TimelineReport {
    format_version: u32,
    provenance: Provenance,
    base_interval_months: f64,
    events: Vec<TimelineEvent>,
    total_span_months: f64,
    total_span_years: f64,
}

pub fn timeline_cmd(ctx: &Context, args: &TimelineArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let Model::Ebhmm(model) = Model::load(&required(&args.model, &cfg.paths.model, "model")?)? else {
        return Err(Error::Argument("timeline needs an EB-HMM model: CT-HMM states are not events".into()).into());
    };
    let timeline = model.transition.event_timeline(&model.sequence)?;
    let events: Vec<TimelineEvent> = timeline
        .order
        .iter()
        .enumerate()
        .map(|(n, &f)| TimelineEvent {
            position: n + 1,
            event: model.feature_names[f].clone(),
            sojourn_months: timeline.sojourns[n],
            event_time_months: timeline.event_times[n],
            event_time_years: timeline.event_times[n] / 12.0,
        })
        .collect();
    let out = optional(&args.out, &cfg.paths.out);
    if out.as_deref().map(DataFormat::from_path) == Some(DataFormat::Json) {
        let total = timeline.total_span_months();
        let report = TimelineReport {
            format_version: FORMAT_VERSION,
            provenance: ctx.provenance(),
            base_interval_months: model.base_interval_months(),
            events,
            total_span_months: total,
            total_span_years: total / 12.0,
        };
        return emit(out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"), stdout);
    }
    let header = [
        "position",
        "event",
        "sojourn_months",
        "event_time_months",
        "event_time_years",
    ];
    let rows: Vec<Vec<String>> = events
        .iter()
        .map(|e| {
            vec![
                e.position.to_string(),
                e.event.clone(),
                num(e.sojourn_months),
                num(e.event_time_months),
                num(e.event_time_years),
            ]
        })
        .collect();
    let text = csv_text(&header.map(String::from), &rows)?;
    emit_csv(out.as_deref(), &text, "timeline", &ctx.provenance(), stdout)
}

/// `<dir>/<stem>.truth.json` next to the cohort file.
pub fn truth_path_for(cohort: &Path) -> PathBuf {
    let stem = cohort.file_stem().unwrap_or_default().to_string_lossy();
    cohort.with_file_name(format!("{stem}.truth.json"))
}

pub fn simulate_cmd(ctx: &Context, args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let sim = &cfg.simulate;
    let out = required(&args.out, &cfg.paths.out, "out")?;
    let truth = match optional(&args.truth, &cfg.paths.truth) {
        Some(p) => TruthDocument::<f64>::from_json(&read_text(&p)?)?.to_truth()?,
        None => GroundTruth::standard(
            sim.n_events,
            sim.separation,
            sim.self_transition,
            cfg.base_interval_months,
        )?,
    };
    let n = sim.n_individuals;
    let sampled = sample_cohort(&truth, n, &sim.visits, sim.missing_fraction, cfg.seed)?;
    with_path(&out, save_cohort(&sampled.cohort, &out, DataFormat::from_path(&out)))?;
    write_sidecar(&out, "simulate", &ctx.provenance())?;

    let mut doc = TruthDocument::from(&truth);
    doc.provenance = Some(ctx.provenance());
    doc.latent_stages = sampled
        .cohort
        .individuals()
        .iter()
        .zip(sampled.stages)
        .map(|(ind, stages)| (ind.id.clone(), stages))
        .collect::<BTreeMap<_, _>>();
    let truth_out = truth_path_for(&out);
    write_text(&truth_out, &(doc.to_json()? + "\n"))?;
    writeln!(
        stdout,
        "simulated {n} individuals x {} visits, {} missing cells\ncohort: {}\ntruth: {}",
        sim.visits.len(),
        sampled.cohort.n_missing_cells(),
        out.display(),
        truth_out.display()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LabelSummary {
    n_converted: usize,
    n_stable: usize,
    exclusions: ExclusionReport,
}

fn label_summary(cohort: &Cohort, horizon: f64) -> Result<LabelSummary, CliError> {
    let (labels, exclusions) = conversion_labels(cohort, horizon)?;
    let n_converted = labels.iter().filter(|l| l.converted).count();
    Ok(LabelSummary {
        n_converted,
        n_stable: labels.len() - n_converted,
        exclusions,
    })
}

#[derive(Serialize)]
struct EvaluateCell {
    model: ModelKind,
    mode: DataMode,
    n_individuals: usize,
    result: Option<CvResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct EvaluateReport {
    format_version: u32,
    provenance: Provenance,
    horizon_months: f64,
    folds: usize,
    labels: LabelSummary,
    cells: Vec<EvaluateCell>,
}

fn auc_cell(result: &Option<CvResult>) -> String {
    match result {
        Some(r) if r.mean.is_finite() => format!("{:.3} ± {:.3}", r.mean, r.sd),
        _ => "n/a".into(),
    }
}

pub fn evaluate_cmd(ctx: &Context, args: &EvaluateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let cohort = ctx.load_cohort(&required(&args.cohort, &cfg.paths.cohort, "cohort")?)?;
    let folds = cfg.eval.folds;
    let labels = label_summary(&cohort, cfg.eval.horizon_months)?;
    let subset_len = cohort.complete_subset().len();
    let mut cells = Vec::new();
    for model in [ModelKind::Ebhmm, ModelKind::Cthmm] {
        for mode in [DataMode::Full, DataMode::Subset] {
            let mut eval = cfg.eval_config();
            eval.mode = mode;
            let (result, error) = match cross_validated_auroc::<f64>(&cohort, model, folds, cfg.seed, &eval) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(format!("{}: {e}", e.kind()))),
            };
            cells.push(EvaluateCell {
                model,
                mode,
                n_individuals: if mode == DataMode::Full {
                    cohort.len()
                } else {
                    subset_len
                },
                result,
                error,
            });
        }
    }

    let mut text = format!(
        "Conversion AU-ROC ({} months, {folds}-fold CV, seed {})\n",
        num(cfg.eval.horizon_months),
        cfg.seed
    );
    text += &format!(
        "labels: {} converted, {} stable; excluded: {} NA baseline, {} AD baseline, {} without follow-up\n",
        labels.n_converted,
        labels.n_stable,
        labels.exclusions.na_baseline,
        labels.exclusions.ad_baseline,
        labels.exclusions.no_follow_up
    );
    text += &format!(
        "{:<8}{:<18}{}\n",
        "model",
        format!("full (n={})", cohort.len()),
        format!("subset (n={subset_len})")
    );
    for pair in cells.chunks(2) {
        text += &format!(
            "{:<8}{:<18}{}\n",
            pair[0].model.label(),
            auc_cell(&pair[0].result),
            auc_cell(&pair[1].result)
        );
    }
    for c in cells.iter().filter(|c| c.error.is_some()) {
        text += &format!(
            "{} {:?}: {}\n",
            c.model.label(),
            c.mode,
            c.error.as_deref().unwrap_or_default()
        );
    }
    stdout.write_all(text.as_bytes())?;

    if let Some(out) = optional(&args.out, &cfg.paths.out) {
        let report = EvaluateReport {
            format_version: FORMAT_VERSION,
            provenance: ctx.provenance(),
            horizon_months: cfg.eval.horizon_months,
            folds,
            labels,
            cells,
        };
        write_text(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AblateReport {
    format_version: u32,
    provenance: Provenance,
    horizon_months: f64,
    folds: usize,
    mode: DataMode,
    ablate_test: bool,
    rows: Vec<SweepRow>,
}

pub fn ablate_cmd(ctx: &Context, args: &AblateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let cohort = ctx.load_cohort(&required(&args.cohort, &cfg.paths.cohort, "cohort")?)?;
    let folds = cfg.eval.folds;
    let rows = missing_data_sweep::<f64>(&cohort, &cfg.eval.fractions, folds, cfg.seed, &cfg.eval_config())?;

    let mut text = format!(
        "EB-HMM AU-ROC with hidden cells ({} months, {folds}-fold CV, seed {})\n",
        num(cfg.eval.horizon_months),
        cfg.seed
    );
    text += &format!("{:<10}{:<15}{}\n", "fraction", "missing_cells", "AU-ROC");
    for r in &rows {
        text += &format!(
            "{:<10}{:<15}{}\n",
            format!("{:.2}", r.fraction),
            r.missing_cells,
            auc_cell(&Some(r.result.clone()))
        );
    }
    stdout.write_all(text.as_bytes())?;

    if let Some(out) = optional(&args.out, &cfg.paths.out) {
        let report = AblateReport {
            format_version: FORMAT_VERSION,
            provenance: ctx.provenance(),
            horizon_months: cfg.eval.horizon_months,
            folds,
            mode: cfg.eval.mode,
            ablate_test: cfg.eval.ablate_test,
            rows,
        };
        write_text(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(())
}
