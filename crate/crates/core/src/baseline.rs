//! Continuous-time HMM baseline with multivariate Gaussian emissions.
//!
//! States are unstructured (no event semantics): each has its own mean
//! vector, and the covariance is either shared across states or diagonal
//! per state. Missing features are marginalised out of the emission
//! density and imputed by their conditional expectation in the M-step.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Diagnosis, Direction, Individual, Observation};
use crate::error::{Error, Result};
use crate::inference::{grid_slots, repeated, smooth, PosteriorTables, TransitionCounts};
use crate::linalg;
use crate::markov::{banded_transition, uniform_pi, TransitionModel};
use crate::scalar::Scalar;
use crate::staging::{propagate, select_rows, viterbi_path, StagePath};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    #[default]
    Shared,
    DiagonalPerState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Covariance<T> {
    /// One full `I × I` covariance for all states.
    Shared { matrix: Array2<T> },
    /// `variances[[state, feature]]`.
    DiagonalPerState { variances: Array2<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CthmmConfig {
    /// Defaults to the number of features plus one.
    pub n_states: Option<usize>,
    pub band_width: usize,
    pub base_interval_months: f64,
    pub covariance: CovarianceKind,
    /// EM stops once successive total log-likelihoods differ by less than this.
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init_self_transition: f64,
    /// Diagonal loading relative to the mean feature variance.
    pub ridge: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_reseeds: usize,
    pub patient_label: Diagnosis,
    pub control_label: Diagnosis,
}

impl Default for CthmmConfig {
    fn default() -> Self {
        CthmmConfig {
            n_states: None,
            band_width: 2,
            base_interval_months: 12.0,
            covariance: CovarianceKind::Shared,
            tolerance: 1e-2,
            max_iter: 500,
            seed: 0,
            init_self_transition: 0.9,
            ridge: 1e-6,
            kmeans_max_iter: 100,
            kmeans_reseeds: 10,
            patient_label: Diagnosis::AD,
            control_label: Diagnosis::CN,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CthmmDiagnostics<T> {
    pub log_likelihood_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the EM trace never decreased (beyond rounding).
    pub trace_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CthmmModel<T> {
    pub feature_names: Vec<String>,
    pub transition: TransitionModel<T>,
    pub band_width: usize,
    /// `means[[state, feature]]`, states ordered by severity.
    pub means: Array2<T>,
    pub covariance: Covariance<T>,
    pub diagnostics: CthmmDiagnostics<T>,
}

/// Cholesky factor of the observed block of the shared covariance.
struct PatternFactor<T> {
    observed: Vec<usize>,
    missing: Vec<usize>,
    chol: Array2<T>,
    log_det: T,
}

impl<T: Scalar> PatternFactor<T> {
    fn new(cov: &Array2<T>, mask: &[bool]) -> Result<Self> {
        let observed: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        let missing: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let sub = Array2::from_shape_fn((observed.len(), observed.len()), |(a, b)| {
            cov[[observed[a], observed[b]]]
        });
        let chol = linalg::cholesky(&sub)
            .ok_or_else(|| Error::Baseline("covariance block is not positive definite".into()))?;
        let log_det = T::lit(2.0) * chol.diag().iter().map(|v| v.ln()).sum::<T>();
        Ok(PatternFactor {
            observed,
            missing,
            chol,
            log_det,
        })
    }

    fn whiten(&self, obs: &Observation, mean: ndarray::ArrayView1<T>) -> Array1<T> {
        let diff = Array1::from_iter(self.observed.iter().map(|&i| T::lit(obs.values[i]) - mean[i]));
        linalg::forward_substitute(&self.chol, &diff)
    }

    fn log_density(&self, obs: &Observation, mean: ndarray::ArrayView1<T>) -> T {
        if self.observed.is_empty() {
            return T::zero();
        }
        let z = self.whiten(obs, mean);
        let d = T::from_usize_lossy(self.observed.len());
        -T::lit(0.5) * (d * (T::lit(2.0) * T::PI()).ln() + self.log_det + z.dot(&z))
    }
}

type FactorCache<T> = BTreeMap<Vec<bool>, PatternFactor<T>>;

impl<T: Scalar> CthmmModel<T> {
    pub fn n_states(&self) -> usize {
        self.transition.n_stages()
    }

    pub fn n_features(&self) -> usize {
        self.means.ncols()
    }

    fn factors<'a>(&self, observations: impl Iterator<Item = &'a Observation>) -> Result<FactorCache<T>> {
        let mut cache = FactorCache::new();
        if let Covariance::Shared { matrix } = &self.covariance {
            for obs in observations {
                if !cache.contains_key(&obs.missing_mask) {
                    cache.insert(obs.missing_mask.clone(), PatternFactor::new(matrix, &obs.missing_mask)?);
                }
            }
        }
        Ok(cache)
    }

    fn log_emission(&self, obs: &Observation, state: usize, factors: &FactorCache<T>) -> T {
        let mean = self.means.row(state);
        match &self.covariance {
            Covariance::Shared { .. } => factors[&obs.missing_mask].log_density(obs, mean),
            Covariance::DiagonalPerState { variances } => (0..obs.n_features())
                .filter_map(|d| obs.get(d).map(|x| (d, x)))
                .map(|(d, x)| {
                    let var = variances[[state, d]];
                    let z = T::lit(x) - mean[d];
                    -T::lit(0.5) * ((T::lit(2.0) * T::PI() * var).ln() + z * z / var)
                })
                .sum(),
        }
    }

    /// Log emissions on the base-interval grid plus the grid slot of each visit.
    fn grid_emissions(&self, individual: &Individual, factors: &FactorCache<T>) -> (Array2<T>, Vec<usize>) {
        let slots = grid_slots(&individual.visit_times(), self.transition.base_interval_months.as_f64());
        let n_slots = slots.last().map_or(1, |s| s + 1);
        let mut out = Array2::zeros((n_slots, self.n_states()));
        for (obs, &slot) in individual.observations.iter().zip(&slots) {
            for k in 0..self.n_states() {
                out[[slot, k]] += self.log_emission(obs, k, factors);
            }
        }
        (out, slots)
    }

    fn posteriors(
        &self,
        individual: &Individual,
        factors: &FactorCache<T>,
    ) -> Result<(PosteriorTables<T>, Vec<usize>)> {
        let (log_em, slots) = self.grid_emissions(individual, factors);
        let post = smooth(
            &log_em,
            &repeated(&self.transition.trans, log_em.nrows()),
            &self.transition.pi,
        )?;
        Ok((post, slots))
    }

    /// Total log-likelihood of a cohort under this model.
    pub fn log_likelihood(&self, cohort: &Cohort) -> Result<T> {
        let factors = self.factors(cohort.individuals().iter().flat_map(|i| &i.observations))?;
        let lls: Vec<T> = cohort
            .individuals()
            .par_iter()
            .map(|ind| self.posteriors(ind, &factors).map(|(p, _)| p.log_likelihood))
            .collect::<Result<_>>()?;
        Ok(lls.into_iter().sum())
    }

    /// Stage distribution `horizon_months` after the individual's last visit.
    pub fn predict_next_stage(&self, individual: &Individual, horizon_months: T) -> Result<(usize, Array1<T>)> {
        let factors = self.factors(individual.observations.iter())?;
        let (post, _) = self.posteriors(individual, &factors)?;
        let last = post.gamma.row(post.gamma.nrows() - 1).to_owned();
        propagate(&last, &self.transition, horizon_months)
    }
}

/// Most probable state path for one individual under the baseline.
pub fn stage_cthmm<T: Scalar>(individual: &Individual, model: &CthmmModel<T>) -> Result<StagePath<T>> {
    if individual.observations[0].n_features() != model.n_features() {
        return Err(Error::Schema(format!(
            "individual '{}' has {} features, model expects {}",
            individual.id,
            individual.observations[0].n_features(),
            model.n_features()
        )));
    }
    let factors = model.factors(individual.observations.iter())?;
    let (log_em, slots) = model.grid_emissions(individual, &factors);
    let (path, log_prob) = viterbi_path(
        &log_em,
        &repeated(&model.transition.trans, log_em.nrows()),
        &model.transition.pi,
    )?;
    let post = smooth(
        &log_em,
        &repeated(&model.transition.trans, log_em.nrows()),
        &model.transition.pi,
    )?;
    Ok(StagePath {
        stages: slots.iter().map(|&s| path[s]).collect(),
        log_prob,
        posterior_by_visit: select_rows(&post.gamma, &slots),
    })
}

/// Fits the baseline by k-means initialisation followed by EM to convergence.
pub fn fit_cthmm<T: Scalar>(cohort: &Cohort, config: &CthmmConfig) -> Result<CthmmModel<T>> {
    let n_features = cohort.n_features();
    let n_states = config.n_states.unwrap_or(n_features + 1);
    if n_states < 2 {
        return Err(Error::Argument(format!("need at least 2 states, got {n_states}")));
    }
    if config.band_width < 1 {
        return Err(Error::Argument("band_width must be >= 1".into()));
    }
    let mut model = initialise(cohort, n_states, config)?;
    // fixed for the whole run so every M-step maximises over the same set
    let floor = variance_floor(&model, config.ridge);
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let tol = T::lit(config.tolerance);
    loop {
        let (ll, stats) = e_step(&model, cohort)?;
        trace.push(ll);
        if trace.len() >= 2 && (ll - trace[trace.len() - 2]).abs() < tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        m_step(&mut model, cohort, &stats, config, floor)?;
        iterations += 1;
    }
    let trace_monotone = trace
        .windows(2)
        .all(|w| w[1] >= w[0] - T::lit(1e-8) * (T::one() + w[0].abs()));
    if !trace_monotone {
        log::warn!("CT-HMM EM log-likelihood decreased during fitting");
    }
    model.diagnostics = CthmmDiagnostics {
        log_likelihood_trace: trace,
        iterations,
        converged,
        trace_monotone,
    };
    Ok(model)
}

struct EStats<T> {
    counts: TransitionCounts<T>,
    /// Per individual: stage posterior at each original visit.
    visit_gamma: Vec<Array2<T>>,
}

fn e_step<T: Scalar>(model: &CthmmModel<T>, cohort: &Cohort) -> Result<(T, EStats<T>)> {
    let factors = model.factors(cohort.individuals().iter().flat_map(|i| &i.observations))?;
    let results: Vec<(PosteriorTables<T>, Vec<usize>)> = cohort
        .individuals()
        .par_iter()
        .map(|ind| model.posteriors(ind, &factors))
        .collect::<Result<_>>()?;
    let mut counts = TransitionCounts::zeros(model.n_states());
    let mut ll = T::zero();
    let mut visit_gamma = Vec::with_capacity(results.len());
    for (post, slots) in &results {
        counts.merge(&TransitionCounts::from_posteriors(post));
        ll += post.log_likelihood;
        visit_gamma.push(select_rows(&post.gamma, slots));
    }
    Ok((ll, EStats { counts, visit_gamma }))
}

fn m_step<T: Scalar>(
    model: &mut CthmmModel<T>,
    cohort: &Cohort,
    stats: &EStats<T>,
    config: &CthmmConfig,
    floor: T,
) -> Result<()> {
    let update = stats.counts.finish(&model.transition.trans, config.band_width, false)?;
    let n_states = model.n_states();
    let n_features = model.n_features();
    let visits: Vec<(&Observation, ndarray::ArrayView1<T>)> = cohort
        .individuals()
        .iter()
        .zip(&stats.visit_gamma)
        .flat_map(|(ind, g)| ind.observations.iter().zip(g.rows()))
        .filter(|(o, _)| o.n_observed() > 0)
        .collect();
    let n_visits = T::from_usize_lossy(visits.len().max(1));

    let mut weight = Array1::<T>::zeros(n_states);
    let mut sum_x = Array2::<T>::zeros((n_states, n_features));
    match &model.covariance {
        Covariance::Shared { matrix } => {
            let factors = model.factors(visits.iter().map(|(o, _)| *o))?;
            let mut second = vec![Array2::<T>::zeros((n_features, n_features)); n_states];
            let mut conditional = Array2::<T>::zeros((n_features, n_features));
            for (obs, gamma) in &visits {
                let f = &factors[&obs.missing_mask];
                // regression of missing on observed dims: K = S_mo S_oo^-1
                let s_mo = Array2::from_shape_fn((f.missing.len(), f.observed.len()), |(a, b)| {
                    matrix[[f.missing[a], f.observed[b]]]
                });
                let s_oo_inv = linalg::cholesky_inverse(&f.chol);
                let gain = s_mo.dot(&s_oo_inv);
                if !f.missing.is_empty() {
                    let s_mm = Array2::from_shape_fn((f.missing.len(), f.missing.len()), |(a, b)| {
                        matrix[[f.missing[a], f.missing[b]]]
                    });
                    let c = s_mm - gain.dot(&s_mo.t());
                    for (a, &ma) in f.missing.iter().enumerate() {
                        for (b, &mb) in f.missing.iter().enumerate() {
                            conditional[[ma, mb]] += c[[a, b]];
                        }
                    }
                }
                for k in 0..n_states {
                    let g = gamma[k];
                    if g == T::zero() {
                        continue;
                    }
                    let xhat = complete(obs, model.means.row(k), f, &gain);
                    weight[k] += g;
                    sum_x.row_mut(k).scaled_add(g, &xhat);
                    let outer = outer(&xhat);
                    second[k].scaled_add(g, &outer);
                }
            }
            let mut cov = conditional;
            for k in 0..n_states {
                if weight[k] > T::epsilon() {
                    let mu = sum_x.row(k).mapv(|v| v / weight[k]);
                    model.means.row_mut(k).assign(&mu);
                    cov = cov + &second[k] - &(outer(&mu) * weight[k]);
                } else {
                    let mu = model.means.row(k).to_owned();
                    cov = cov + &second[k] - &(outer(&mu) * weight[k]);
                }
            }
            let mut cov = cov / n_visits;
            symmetrise(&mut cov);
            let cov = linalg::clip_eigenvalues(&cov, floor);
            model.covariance = Covariance::Shared { matrix: cov };
        }
        Covariance::DiagonalPerState { variances } => {
            let old_means = model.means.clone();
            let mut sum_sq = Array2::<T>::zeros((n_states, n_features));
            for (obs, gamma) in &visits {
                for k in 0..n_states {
                    let g = gamma[k];
                    if g == T::zero() {
                        continue;
                    }
                    weight[k] += g;
                    for d in 0..n_features {
                        let (x, extra) = match obs.get(d) {
                            Some(v) => (T::lit(v), T::zero()),
                            None => (old_means[[k, d]], variances[[k, d]]),
                        };
                        sum_x[[k, d]] += g * x;
                        sum_sq[[k, d]] += g * (x * x + extra);
                    }
                }
            }
            let mut new_var = variances.clone();
            for k in 0..n_states {
                if weight[k] > T::epsilon() {
                    for d in 0..n_features {
                        let mu = sum_x[[k, d]] / weight[k];
                        model.means[[k, d]] = mu;
                        new_var[[k, d]] = (sum_sq[[k, d]] / weight[k] - mu * mu).max(floor);
                    }
                }
            }
            model.covariance = Covariance::DiagonalPerState { variances: new_var };
        }
    }
    model.transition = TransitionModel {
        pi: update.pi,
        trans: update.trans,
        base_interval_months: model.transition.base_interval_months,
    };
    Ok(())
}

fn complete<T: Scalar>(
    obs: &Observation,
    mean: ndarray::ArrayView1<T>,
    f: &PatternFactor<T>,
    gain: &Array2<T>,
) -> Array1<T> {
    let mut x = Array1::from_iter((0..obs.n_features()).map(|d| obs.get(d).map(T::lit).unwrap_or(mean[d])));
    if !f.missing.is_empty() {
        let diff = Array1::from_iter(f.observed.iter().map(|&i| x[i] - mean[i]));
        let shift = gain.dot(&diff);
        for (a, &m) in f.missing.iter().enumerate() {
            x[m] = mean[m] + shift[a];
        }
    }
    x
}

fn outer<T: Scalar>(v: &Array1<T>) -> Array2<T> {
    let n = v.len();
    Array2::from_shape_fn((n, n), |(a, b)| v[a] * v[b])
}

fn symmetrise<T: Scalar>(cov: &mut Array2<T>) {
    let sym = (&*cov + &cov.t()) * T::lit(0.5);
    *cov = sym;
}

fn symmetrise_and_load<T: Scalar>(cov: &mut Array2<T>, ridge: T) {
    let n = cov.nrows();
    symmetrise(cov);
    let mean_var = cov.diag().sum() / T::from_usize_lossy(n);
    let load = ridge * mean_var.max(T::min_positive_value());
    for i in 0..n {
        cov[[i, i]] += load;
    }
}

fn variance_floor<T: Scalar>(model: &CthmmModel<T>, ridge: f64) -> T {
    let mean = match &model.covariance {
        Covariance::Shared { matrix } => matrix.diag().mean(),
        Covariance::DiagonalPerState { variances } => variances.mean(),
    };
    T::lit(ridge) * mean.unwrap_or_else(T::one).max(T::min_positive_value())
}

fn initialise<T: Scalar>(cohort: &Cohort, n_states: usize, config: &CthmmConfig) -> Result<CthmmModel<T>> {
    let n_features = cohort.n_features();
    let observations: Vec<(&Observation, Diagnosis)> = cohort
        .individuals()
        .iter()
        .flat_map(|i| i.observations.iter().zip(i.diagnosis_labels.iter().copied()))
        .filter(|(o, _)| o.n_observed() > 0)
        .collect();
    if observations.len() < n_states {
        return Err(Error::Baseline(format!(
            "{} visits with data cannot initialise {n_states} states",
            observations.len()
        )));
    }
    let mut feature_mean = vec![0.0f64; n_features];
    for (d, m) in feature_mean.iter_mut().enumerate() {
        let vals: Vec<f64> = observations.iter().filter_map(|(o, _)| o.get(d)).collect();
        if vals.is_empty() {
            return Err(Error::Baseline(format!(
                "feature '{}' is never observed",
                cohort.feature_names()[d]
            )));
        }
        *m = vals.iter().sum::<f64>() / vals.len() as f64;
    }
    let data = Array2::from_shape_fn((observations.len(), n_features), |(r, d)| {
        observations[r].0.get(d).unwrap_or(feature_mean[d])
    });
    let mean = data.mean_axis(Axis(0)).expect("nonempty");
    let centred = &data - &mean;
    let cov = centred.t().dot(&centred) / observations.len() as f64;
    let sd: Array1<f64> = cov.diag().mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let z = &centred / &sd;

    let assignment = kmeans(&z, n_states, config)?;
    let mut centroids = Array2::<f64>::zeros((n_states, n_features));
    let mut sizes = vec![0usize; n_states];
    for (r, &c) in assignment.iter().enumerate() {
        centroids.row_mut(c).scaled_add(1.0, &data.row(r));
        sizes[c] += 1;
    }
    for c in 0..n_states {
        let s = sizes[c] as f64;
        centroids.row_mut(c).mapv_inplace(|v| v / s);
    }

    let group_mean = |label: Diagnosis| -> Option<Array1<f64>> {
        let rows: Vec<usize> = (0..observations.len())
            .filter(|&r| observations[r].1 == label)
            .collect();
        if rows.is_empty() {
            return None;
        }
        let mut acc = Array1::<f64>::zeros(n_features);
        for &r in &rows {
            acc += &data.row(r);
        }
        Some(acc / rows.len() as f64)
    };
    let mut axis = match (group_mean(config.patient_label), group_mean(config.control_label)) {
        (Some(p), Some(c)) => (p - c) / &sd,
        _ => Array1::zeros(n_features),
    };
    if axis.iter().all(|v| v.abs() < 1e-12) {
        axis = Array1::from_iter(cohort.feature_directions().iter().map(|d| match d {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }));
    }
    let severity: Vec<f64> = (0..n_states)
        .map(|c| ((&centroids.row(c) - &mean) / &sd).dot(&axis))
        .collect();
    let mut order: Vec<usize> = (0..n_states).collect();
    order.sort_by(|&a, &b| {
        severity[a]
            .partial_cmp(&severity[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let means = Array2::from_shape_fn((n_states, n_features), |(k, d)| T::lit(centroids[[order[k], d]]));
    let mut cov_t = cov.mapv(T::lit);
    symmetrise_and_load(&mut cov_t, T::lit(config.ridge.max(1e-9)));
    let covariance = match config.covariance {
        CovarianceKind::Shared => Covariance::Shared { matrix: cov_t },
        CovarianceKind::DiagonalPerState => Covariance::DiagonalPerState {
            variances: Array2::from_shape_fn((n_states, n_features), |(_, d)| cov_t[[d, d]]),
        },
    };
    Ok(CthmmModel {
        feature_names: cohort.feature_names().to_vec(),
        transition: TransitionModel::new(
            uniform_pi(n_states),
            banded_transition(n_states, config.band_width, T::lit(config.init_self_transition), false),
            T::lit(config.base_interval_months),
        )?,
        band_width: config.band_width,
        means,
        covariance,
        diagnostics: CthmmDiagnostics::default(),
    })
}

/// Lloyd's algorithm with k-means++ seeding. An empty cluster triggers a
/// fresh seeding, up to `kmeans_reseeds` times.
fn kmeans(data: &Array2<f64>, k: usize, config: &CthmmConfig) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = data.nrows();
    let dist2 = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
    };
    'attempt: for _ in 0..=config.kmeans_reseeds {
        let mut centres = Array2::<f64>::zeros((k, data.ncols()));
        centres.row_mut(0).assign(&data.row(rng.random_range(0..n)));
        let mut nearest = vec![f64::INFINITY; n];
        for c in 1..k {
            for r in 0..n {
                nearest[r] = nearest[r].min(dist2(data.row(r), centres.row(c - 1)));
            }
            let total: f64 = nearest.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = n - 1;
                for (r, d) in nearest.iter().enumerate() {
                    if u < *d {
                        chosen = r;
                        break;
                    }
                    u -= d;
                }
                chosen
            } else {
                rng.random_range(0..n)
            };
            centres.row_mut(c).assign(&data.row(pick));
        }
        let mut assignment = vec![usize::MAX; n];
        for _ in 0..config.kmeans_max_iter.max(1) {
            let mut changed = false;
            for r in 0..n {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let d = dist2(data.row(r), centres.row(c));
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                if assignment[r] != best {
                    assignment[r] = best;
                    changed = true;
                }
            }
            let mut sums = Array2::<f64>::zeros(centres.raw_dim());
            let mut sizes = vec![0usize; k];
            for (r, &c) in assignment.iter().enumerate() {
                sums.row_mut(c).scaled_add(1.0, &data.row(r));
                sizes[c] += 1;
            }
            if sizes.contains(&0) {
                continue 'attempt;
            }
            for c in 0..k {
                centres.row_mut(c).assign(&sums.row(c).mapv(|v| v / sizes[c] as f64));
            }
            if !changed {
                break;
            }
        }
        return Ok(assignment);
    }
    Err(Error::Baseline(format!(
        "k-means produced an empty cluster after {} reseeds",
        config.kmeans_reseeds
    )))
}
