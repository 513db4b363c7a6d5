//! Per-feature two-component Gaussian event distributions.
//!
//! Each feature has a control component (normal values) and a patient
//! component (abnormal values). A feature whose event has occurred at a
//! given stage is scored under the patient density, otherwise under the
//! control density. Missing values score 1 under both, so they never
//! influence the stage posterior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Diagnosis, Direction, Observation};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::sequence::EventSequence;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaussianParams<T> {
    pub mu: T,
    pub sigma: T,
    pub weight: T,
}

impl<T: Scalar> GaussianParams<T> {
    pub fn new(mu: T, sigma: T, weight: T) -> Result<Self> {
        if !(sigma > T::zero()) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::Argument(format!(
                "gaussian needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        if !(weight >= T::zero() && weight <= T::one()) {
            return Err(Error::Argument(format!("weight {weight} outside [0, 1]")));
        }
        Ok(GaussianParams { mu, sigma, weight })
    }

    pub fn ln_pdf(&self, x: T) -> T {
        let z = (x - self.mu) / self.sigma;
        -T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() - self.sigma.ln() - T::lit(0.5) * z * z
    }

    pub fn pdf(&self, x: T) -> T {
        self.ln_pdf(x).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MixturePair<T> {
    pub patient: GaussianParams<T>,
    pub control: GaussianParams<T>,
    pub feature_index: usize,
}

impl<T: Scalar> MixturePair<T> {
    pub fn new(patient: GaussianParams<T>, control: GaussianParams<T>, feature_index: usize) -> Result<Self> {
        let pair = MixturePair {
            patient,
            control,
            feature_index,
        };
        let total = patient.weight + control.weight;
        if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(8.0)) {
            return Err(Error::Argument(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(pair)
    }

    /// Log densities `(ln p_event, ln p_no_event)`; `(0, 0)` when missing.
    pub fn log_likelihoods(&self, x: Option<T>) -> (T, T) {
        match x {
            Some(v) => (self.patient.ln_pdf(v), self.control.ln_pdf(v)),
            None => (T::zero(), T::zero()),
        }
    }

    /// Whether the patient mean sits on the abnormal side of the control mean.
    pub fn is_ordered(&self, direction: Direction) -> bool {
        match direction {
            Direction::Increasing => self.patient.mu >= self.control.mu,
            Direction::Decreasing => self.patient.mu <= self.control.mu,
        }
    }
}

/// Event / no-event densities for one value. A missing value yields `(1, 1)`.
pub fn event_likelihood_pair<T: Scalar>(x: Option<T>, pair: &MixturePair<T>) -> Result<(T, T)> {
    if let Some(v) = x {
        if !v.is_finite() {
            return Err(Error::Argument(format!("observed value {v} is not finite")));
        }
    }
    let (lp, lc) = pair.log_likelihoods(x);
    Ok((lp.exp(), lc.exp()))
}

/// Log emission for every stage `0..=I` of one observation.
///
/// Stage `k` scores the events at sequence positions `0..k` under their
/// patient densities and the rest under control densities.
pub fn log_stage_emissions<T: Scalar>(obs: &Observation, sequence: &EventSequence, pairs: &[MixturePair<T>]) -> Vec<T> {
    let per_feature: Vec<(T, T)> = pairs
        .iter()
        .map(|p| p.log_likelihoods(obs.get(p.feature_index).map(T::lit)))
        .collect();
    log_stage_emissions_from(&per_feature, sequence)
}

/// As [`log_stage_emissions`] from precomputed `(ln p_event, ln p_no_event)`
/// per feature index.
pub fn log_stage_emissions_from<T: Scalar>(per_feature: &[(T, T)], sequence: &EventSequence) -> Vec<T> {
    let mut out = Vec::with_capacity(sequence.len() + 1);
    let mut acc: T = per_feature.iter().map(|(_, c)| *c).sum();
    out.push(acc);
    for &f in sequence.order() {
        let (p, c) = per_feature[f];
        acc = acc + p - c;
        out.push(acc);
    }
    out
}

/// Emission density of `obs` at `stage` (linear domain).
pub fn stage_emission<T: Scalar>(
    obs: &Observation,
    stage: usize,
    sequence: &EventSequence,
    pairs: &[MixturePair<T>],
) -> Result<T> {
    let n = sequence.len();
    if stage > n {
        return Err(Error::Argument(format!("stage {stage} outside 0..={n}")));
    }
    if pairs.len() != n || obs.n_features() != n {
        return Err(Error::Argument(format!(
            "{} mixtures and {} observed features for a sequence of {n} events",
            pairs.len(),
            obs.n_features()
        )));
    }
    let positions = sequence.positions();
    let mut log_e = T::zero();
    for pair in pairs {
        let (lp, lc) = pair.log_likelihoods(obs.get(pair.feature_index).map(T::lit));
        log_e += if positions[pair.feature_index] < stage { lp } else { lc };
    }
    Ok(log_e.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    /// Minimum number of individuals per labelled group with an observed value.
    pub min_group_size: usize,
    pub max_iter: usize,
    /// Relative change in mean log-likelihood that stops EM.
    pub tolerance: f64,
    /// Component means stay within this many labelled-group sds of their start.
    pub max_mean_shift_sd: f64,
    /// Sigma floor as a fraction of the labelled-group sd.
    pub sigma_floor_fraction: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            min_group_size: 5,
            max_iter: 500,
            tolerance: 1e-10,
            max_mean_shift_sd: 1.0,
            sigma_floor_fraction: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MixtureFit<T> {
    pub pairs: Vec<MixturePair<T>>,
    /// Per feature; `false` means EM hit `max_iter` and the best iterate was kept.
    pub converged: Vec<bool>,
}

struct GroupStats {
    mean: f64,
    sd: f64,
    n_values: usize,
}

fn group_stats(values: &[f64]) -> GroupStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    GroupStats {
        mean,
        sd: var.sqrt(),
        n_values: values.len(),
    }
}

/// Fits one mixture pair per feature.
///
/// Components start at the moments of the `patient_label` and
/// `control_label` visits; EM then runs over every non-`NA` value with the
/// means boxed around their start and the patient mean kept on the
/// abnormal side.
pub fn fit_mixtures<T: Scalar>(
    cohort: &Cohort,
    patient_label: Diagnosis,
    control_label: Diagnosis,
    config: &MixtureConfig,
) -> Result<MixtureFit<T>> {
    if patient_label == control_label {
        return Err(Error::Argument("patient and control labels must differ".into()));
    }
    let results: Vec<Result<(MixturePair<T>, bool)>> = (0..cohort.n_features())
        .into_par_iter()
        .map(|f| fit_feature(cohort, f, patient_label, control_label, config))
        .collect();
    let mut pairs = Vec::with_capacity(results.len());
    let mut converged = Vec::with_capacity(results.len());
    for r in results {
        let (p, c) = r?;
        pairs.push(p);
        converged.push(c);
    }
    Ok(MixtureFit { pairs, converged })
}

fn collect_feature(cohort: &Cohort, feature: usize, label: Diagnosis) -> (Vec<f64>, usize) {
    let mut values = Vec::new();
    let mut individuals = 0;
    for ind in cohort.individuals() {
        let before = values.len();
        for (obs, l) in ind.observations.iter().zip(&ind.diagnosis_labels) {
            if *l == label {
                if let Some(v) = obs.get(feature) {
                    values.push(v);
                }
            }
        }
        if values.len() > before {
            individuals += 1;
        }
    }
    (values, individuals)
}

fn fit_feature<T: Scalar>(
    cohort: &Cohort,
    feature: usize,
    patient_label: Diagnosis,
    control_label: Diagnosis,
    config: &MixtureConfig,
) -> Result<(MixturePair<T>, bool)> {
    let name = &cohort.feature_names()[feature];
    let direction = cohort.feature_directions()[feature];
    let (patient_vals, n_pat) = collect_feature(cohort, feature, patient_label);
    let (control_vals, n_ctl) = collect_feature(cohort, feature, control_label);
    for (label, n) in [(patient_label, n_pat), (control_label, n_ctl)] {
        if n < config.min_group_size {
            return Err(Error::MixtureFit {
                feature: name.clone(),
                message: format!(
                    "{n} {label} individuals with an observed value, need {}",
                    config.min_group_size
                ),
            });
        }
    }
    let pat = group_stats(&patient_vals);
    let ctl = group_stats(&control_vals);
    let scale_fallback = pat
        .sd
        .max(ctl.sd)
        .max(1e-12 * (1.0 + pat.mean.abs().max(ctl.mean.abs())));
    let pat_sd0 = if pat.sd > 0.0 { pat.sd } else { scale_fallback };
    let ctl_sd0 = if ctl.sd > 0.0 { ctl.sd } else { scale_fallback };

    let all: Vec<T> = cohort
        .individuals()
        .iter()
        .flat_map(|ind| ind.observations.iter().zip(&ind.diagnosis_labels))
        .filter(|(_, l)| **l != Diagnosis::NA)
        .filter_map(|(o, _)| o.get(feature))
        .map(T::lit)
        .collect();

    let shift = T::lit(config.max_mean_shift_sd);
    let bounds_p = (
        T::lit(pat.mean) - shift * T::lit(pat_sd0),
        T::lit(pat.mean) + shift * T::lit(pat_sd0),
    );
    let bounds_c = (
        T::lit(ctl.mean) - shift * T::lit(ctl_sd0),
        T::lit(ctl.mean) + shift * T::lit(ctl_sd0),
    );
    let floor_p = T::lit(config.sigma_floor_fraction * pat_sd0);
    let floor_c = T::lit(config.sigma_floor_fraction * ctl_sd0);

    let w0 = pat.n_values as f64 / (pat.n_values + ctl.n_values) as f64;
    let mut state = EmState {
        mu_p: T::lit(pat.mean),
        sd_p: T::lit(pat_sd0),
        mu_c: T::lit(ctl.mean),
        sd_c: T::lit(ctl_sd0),
        w_p: T::lit(w0),
    };
    state.enforce_order(direction);

    let mut best = state;
    let mut best_ll = state.log_likelihood(&all);
    let mut prev_ll = best_ll;
    let mut converged = false;
    let tol = T::lit(config.tolerance);
    let n = T::from_usize_lossy(all.len().max(1));
    for _ in 0..config.max_iter {
        let mut next = state.step(&all);
        next.mu_p = clamp(next.mu_p, bounds_p);
        next.mu_c = clamp(next.mu_c, bounds_c);
        next.sd_p = next.sd_p.max(floor_p);
        next.sd_c = next.sd_c.max(floor_c);
        next.enforce_order(direction);
        let ll = next.log_likelihood(&all);
        state = next;
        if ll > best_ll {
            best_ll = ll;
            best = state;
        }
        if ((ll - prev_ll) / n).abs() <= tol * (T::one() + (ll / n).abs()) {
            converged = true;
            break;
        }
        prev_ll = ll;
    }
    if !converged {
        log::warn!("mixture EM for feature '{name}' did not converge; keeping best iterate");
    }
    let pair = MixturePair::new(
        GaussianParams::new(best.mu_p, best.sd_p, best.w_p)?,
        GaussianParams::new(best.mu_c, best.sd_c, T::one() - best.w_p)?,
        feature,
    )?;
    Ok((pair, converged))
}

fn clamp<T: Scalar>(v: T, (lo, hi): (T, T)) -> T {
    v.max(lo).min(hi)
}

#[derive(Clone, Copy, Debug)]
struct EmState<T> {
    mu_p: T,
    sd_p: T,
    mu_c: T,
    sd_c: T,
    w_p: T,
}

impl<T: Scalar> EmState<T> {
    fn components(&self) -> (GaussianParams<T>, GaussianParams<T>) {
        (
            GaussianParams {
                mu: self.mu_p,
                sigma: self.sd_p,
                weight: self.w_p,
            },
            GaussianParams {
                mu: self.mu_c,
                sigma: self.sd_c,
                weight: T::one() - self.w_p,
            },
        )
    }

    fn enforce_order(&mut self, direction: Direction) {
        let wrong_side = match direction {
            Direction::Increasing => self.mu_p < self.mu_c,
            Direction::Decreasing => self.mu_p > self.mu_c,
        };
        if wrong_side {
            let mid = (self.mu_p + self.mu_c) * T::lit(0.5);
            self.mu_p = mid;
            self.mu_c = mid;
        }
    }

    fn log_likelihood(&self, xs: &[T]) -> T {
        let (p, c) = self.components();
        let (lwp, lwc) = (p.weight.ln(), c.weight.ln());
        xs.iter()
            .map(|&x| log_sum_exp([lwp + p.ln_pdf(x), lwc + c.ln_pdf(x)]))
            .sum()
    }

    fn step(&self, xs: &[T]) -> EmState<T> {
        let (p, c) = self.components();
        let (lwp, lwc) = (p.weight.ln(), c.weight.ln());
        let resp: Vec<T> = xs
            .iter()
            .map(|&x| {
                let a = lwp + p.ln_pdf(x);
                let b = lwc + c.ln_pdf(x);
                (a - log_sum_exp([a, b])).exp()
            })
            .collect();
        let np: T = resp.iter().copied().sum();
        let nc = T::from_usize_lossy(xs.len()) - np;
        let tiny = T::min_positive_value();
        let mu_p = if np > tiny {
            xs.iter().zip(&resp).map(|(&x, &r)| r * x).sum::<T>() / np
        } else {
            self.mu_p
        };
        let mu_c = if nc > tiny {
            xs.iter().zip(&resp).map(|(&x, &r)| (T::one() - r) * x).sum::<T>() / nc
        } else {
            self.mu_c
        };
        let sd_p = if np > tiny {
            (xs.iter().zip(&resp).map(|(&x, &r)| r * (x - mu_p).powi(2)).sum::<T>() / np).sqrt()
        } else {
            self.sd_p
        };
        let sd_c = if nc > tiny {
            (xs.iter()
                .zip(&resp)
                .map(|(&x, &r)| (T::one() - r) * (x - mu_c).powi(2))
                .sum::<T>()
                / nc)
                .sqrt()
        } else {
            self.sd_c
        };
        let eps = T::lit(1e-12);
        let w_p = (np / T::from_usize_lossy(xs.len().max(1))).max(eps).min(T::one() - eps);
        EmState {
            mu_p,
            sd_p,
            mu_c,
            sd_c,
            w_p,
        }
    }
}
