//! Nested expectation-maximisation for the event sequence and the stage
//! dynamics.
//!
//! The outer loop is coordinate ascent over the event sequence: every event
//! is tried at every position with the others kept in relative order. Each
//! candidate is scored by re-initialising `(pi, trans)`, running a single
//! forward-backward pass over the cohort, applying one M-step, and taking
//! the log-likelihood under the updated parameters.
//!
//! Visits are placed on a grid of base intervals measured from each
//! individual's first visit. Grid slots without a visit carry emission 1
//! for every stage, which makes every modelled transition a single base
//! step and keeps the M-step exact for whole-interval visit gaps.

use ndarray::{s, Array1, Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Diagnosis, Individual};
use crate::error::{Error, Result};
use crate::markov::{apply_structure_prior, banded_transition, uniform_pi, TransitionModel};
use crate::mixture::{log_stage_emissions_from, MixturePair};
use crate::scalar::Scalar;
pub use crate::sequence::EventSequence;

/// Smoothed posteriors for one individual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PosteriorTables<T> {
    /// `gamma[[t, a]] = P(k_t = a | Y)`.
    pub gamma: Array2<T>,
    /// `xi[[t, a, b]] = P(k_t = a, k_{t+1} = b | Y)`.
    pub xi: Array3<T>,
    pub log_likelihood: T,
}

/// Exact smoothed posteriors and log marginal likelihood of one individual.
///
/// `log_emissions` has one row per visit and one column per stage;
/// `intervals_months[t]` is the gap between visits `t` and `t + 1`.
pub fn forward_backward<T: Scalar>(
    log_emissions: &Array2<T>,
    intervals_months: &[T],
    model: &TransitionModel<T>,
) -> Result<PosteriorTables<T>> {
    let n_visits = log_emissions.nrows();
    if n_visits == 0 || intervals_months.len() + 1 != n_visits {
        return Err(Error::Argument(format!(
            "{n_visits} visits need {} intervals, got {}",
            n_visits.saturating_sub(1),
            intervals_months.len()
        )));
    }
    if log_emissions.ncols() != model.n_stages() {
        return Err(Error::Argument(format!(
            "emissions have {} stages, model has {}",
            log_emissions.ncols(),
            model.n_stages()
        )));
    }
    let mut cache: Vec<(T, Array2<T>)> = Vec::new();
    for &gap in intervals_months {
        if !cache.iter().any(|(g, _)| *g == gap) {
            cache.push((gap, model.transition_over_interval(gap)?));
        }
    }
    let transitions: Vec<&Array2<T>> = intervals_months
        .iter()
        .map(|gap| &cache.iter().find(|(g, _)| g == gap).expect("cached").1)
        .collect();
    smooth(log_emissions, &transitions, &model.pi)
}

/// Rescales each emission row by its maximum; errors on an all-zero row.
fn scaled_emissions<T: Scalar>(log_emissions: &Array2<T>) -> Result<(Array2<T>, Vec<T>)> {
    let mut scaled = Array2::zeros(log_emissions.raw_dim());
    let mut offsets = Vec::with_capacity(log_emissions.nrows());
    for (t, row) in log_emissions.rows().into_iter().enumerate() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::Degenerate {
                visit: t,
                message: "emission is zero (or non-finite) for every stage".into(),
            });
        }
        scaled.row_mut(t).assign(&row.mapv(|v| (v - max).exp()));
        offsets.push(max);
    }
    Ok((scaled, offsets))
}

/// Normalised forward pass. Returns `(alpha, scales, log_likelihood)`.
fn forward<T: Scalar>(
    emissions: &Array2<T>,
    offsets: &[T],
    transitions: &[&Array2<T>],
    pi: &Array1<T>,
) -> Result<(Array2<T>, Vec<T>, T)> {
    let (n_visits, n_stages) = emissions.dim();
    let mut alpha = Array2::zeros((n_visits, n_stages));
    let mut scales = Vec::with_capacity(n_visits);
    let mut log_lik = T::zero();
    for t in 0..n_visits {
        let predicted = if t == 0 {
            pi.clone()
        } else {
            alpha.row(t - 1).dot(transitions[t - 1])
        };
        let row = &predicted * &emissions.row(t);
        let c = row.sum();
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::Degenerate {
                visit: t,
                message: "no stage with positive prior mass has positive emission".into(),
            });
        }
        alpha.row_mut(t).assign(&(row / c));
        scales.push(c);
        log_lik += c.ln() + offsets[t];
    }
    Ok((alpha, scales, log_lik))
}

pub(crate) fn smooth<T: Scalar>(
    log_emissions: &Array2<T>,
    transitions: &[&Array2<T>],
    pi: &Array1<T>,
) -> Result<PosteriorTables<T>> {
    let (emissions, offsets) = scaled_emissions(log_emissions)?;
    let (alpha, scales, log_likelihood) = forward(&emissions, &offsets, transitions, pi)?;
    let (n_visits, n_stages) = emissions.dim();
    let mut beta = Array2::<T>::zeros((n_visits, n_stages));
    beta.row_mut(n_visits - 1).fill(T::one());
    for t in (0..n_visits - 1).rev() {
        let weighted = &emissions.row(t + 1) * &beta.row(t + 1);
        let b = transitions[t].dot(&weighted) / scales[t + 1];
        beta.row_mut(t).assign(&b);
    }
    let mut gamma = &alpha * &beta;
    for mut row in gamma.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    let mut xi = Array3::<T>::zeros((n_visits.saturating_sub(1), n_stages, n_stages));
    for t in 0..n_visits.saturating_sub(1) {
        let weighted = &emissions.row(t + 1) * &beta.row(t + 1);
        let mut slice = xi.slice_mut(s![t, .., ..]);
        for a in 0..n_stages {
            let al = alpha[[t, a]];
            if al == T::zero() {
                continue;
            }
            for b in 0..n_stages {
                slice[[a, b]] = al * transitions[t][[a, b]] * weighted[b];
            }
        }
        let total = slice.sum();
        slice.mapv_inplace(|v| v / total);
    }
    Ok(PosteriorTables {
        gamma,
        xi,
        log_likelihood,
    })
}

pub(crate) fn forward_log_likelihood<T: Scalar>(
    log_emissions: &Array2<T>,
    transitions: &[&Array2<T>],
    pi: &Array1<T>,
) -> Result<T> {
    let (emissions, offsets) = scaled_emissions(log_emissions)?;
    forward(&emissions, &offsets, transitions, pi).map(|(_, _, ll)| ll)
}

/// Expected initial-stage and transition counts accumulated over individuals.
#[derive(Clone, Debug)]
pub struct TransitionCounts<T> {
    pub initial: Array1<T>,
    pub pairs: Array2<T>,
    pub n_individuals: usize,
    pub n_transitions: usize,
}

impl<T: Scalar> TransitionCounts<T> {
    pub fn zeros(n_stages: usize) -> Self {
        TransitionCounts {
            initial: Array1::zeros(n_stages),
            pairs: Array2::zeros((n_stages, n_stages)),
            n_individuals: 0,
            n_transitions: 0,
        }
    }

    pub fn from_posteriors(p: &PosteriorTables<T>) -> Self {
        let n = p.gamma.ncols();
        let mut c = TransitionCounts::zeros(n);
        c.initial.assign(&p.gamma.row(0));
        for t in 0..p.xi.shape()[0] {
            c.pairs += &p.xi.slice(s![t, .., ..]);
        }
        c.n_individuals = 1;
        c.n_transitions = p.xi.shape()[0];
        c
    }

    pub fn merge(&mut self, other: &TransitionCounts<T>) {
        self.initial += &other.initial;
        self.pairs += &other.pairs;
        self.n_individuals += other.n_individuals;
        self.n_transitions += other.n_transitions;
    }

    /// Closes the M-step: `pi` is the mean initial posterior, `trans` the
    /// count ratio passed through the structure prior. Without any
    /// observed transition `init_trans` is returned unchanged.
    pub fn finish(&self, init_trans: &Array2<T>, band_width: usize, monotone: bool) -> Result<TransitionUpdate<T>> {
        if self.n_individuals == 0 {
            return Err(Error::Argument("no posteriors to update from".into()));
        }
        let pi = &self.initial / T::from_usize_lossy(self.n_individuals);
        let mut notes = Vec::new();
        let trans = if self.n_transitions == 0 {
            init_trans.clone()
        } else {
            let mut ratio = self.pairs.clone();
            for (a, mut row) in ratio.rows_mut().into_iter().enumerate() {
                let denom = row.sum();
                if denom > T::zero() {
                    row.mapv_inplace(|v| v / denom);
                } else {
                    row.fill(T::zero());
                    row[a] = T::one();
                    notes.push(format!(
                        "stage {a} never visited before a transition; row set to self-transition"
                    ));
                }
            }
            apply_structure_prior(&ratio, band_width, monotone)?
        };
        Ok(TransitionUpdate { pi, trans, notes })
    }
}

#[derive(Clone, Debug)]
pub struct TransitionUpdate<T> {
    pub pi: Array1<T>,
    pub trans: Array2<T>,
    pub notes: Vec<String>,
}

/// Single M-step for `(pi, trans)` from per-individual posteriors.
pub fn update_transition<T: Scalar>(
    posteriors: &[PosteriorTables<T>],
    init_trans: &Array2<T>,
    band_width: usize,
    monotone: bool,
) -> Result<TransitionUpdate<T>> {
    let n = init_trans.nrows();
    let mut counts = TransitionCounts::zeros(n);
    for p in posteriors {
        if p.gamma.ncols() != n {
            return Err(Error::Argument("posterior stage count mismatch".into()));
        }
        counts.merge(&TransitionCounts::from_posteriors(p));
    }
    counts.finish(init_trans, band_width, monotone)
}

/// An individual's visits on the base-interval grid, with per-feature
/// `(ln p_event, ln p_no_event)` for every slot.
#[derive(Clone, Debug)]
pub(crate) struct GridIndividual<T> {
    pub slots: Vec<Vec<(T, T)>>,
    /// Grid slot of each original visit.
    pub visit_slots: Vec<usize>,
}

pub(crate) fn grid_slots(visit_times: &[f64], base_interval_months: f64) -> Vec<usize> {
    let t0 = visit_times[0];
    visit_times
        .iter()
        .map(|t| ((t - t0) / base_interval_months).round().max(0.0) as usize)
        .collect()
}

impl<T: Scalar> GridIndividual<T> {
    pub fn new(individual: &Individual, pairs: &[MixturePair<T>], base_interval_months: f64) -> Self {
        let visit_slots = grid_slots(&individual.visit_times(), base_interval_months);
        let n_slots = visit_slots.last().map_or(1, |s| s + 1);
        let n_features = pairs.len();
        let mut slots = vec![vec![(T::zero(), T::zero()); n_features]; n_slots];
        for (obs, &slot) in individual.observations.iter().zip(&visit_slots) {
            for pair in pairs {
                let (lp, lc) = pair.log_likelihoods(obs.get(pair.feature_index).map(T::lit));
                let cell = &mut slots[slot][pair.feature_index];
                cell.0 += lp;
                cell.1 += lc;
            }
        }
        GridIndividual { slots, visit_slots }
    }

    pub fn log_emissions(&self, sequence: &EventSequence) -> Array2<T> {
        let n_stages = sequence.len() + 1;
        let mut out = Array2::zeros((self.slots.len(), n_stages));
        for (t, per_feature) in self.slots.iter().enumerate() {
            let row = log_stage_emissions_from(per_feature, sequence);
            out.row_mut(t).assign(&Array1::from(row));
        }
        out
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }
}

pub(crate) fn repeated<T>(trans: &Array2<T>, n_slots: usize) -> Vec<&Array2<T>> {
    vec![trans; n_slots.saturating_sub(1)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub base_interval_months: f64,
    pub band_width: usize,
    pub max_outer_iter: usize,
    /// Number of starting sequences; the first is label-informed, the rest random.
    pub random_restarts: usize,
    pub seed: u64,
    /// Self-transition probability of the per-candidate starting matrix.
    pub init_self_transition: f64,
    /// Label whose visits drive the starting sequence.
    pub patient_label: Diagnosis,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            base_interval_months: 12.0,
            band_width: 2,
            max_outer_iter: 100,
            random_restarts: 1,
            seed: 0,
            init_self_transition: 0.9,
            patient_label: Diagnosis::AD,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_interval_months > 0.0) {
            return Err(Error::Argument("base_interval_months must be > 0".into()));
        }
        if self.band_width < 1 {
            return Err(Error::Argument("band_width must be >= 1".into()));
        }
        if self.random_restarts < 1 {
            return Err(Error::Argument("random_restarts must be >= 1".into()));
        }
        if !(self.init_self_transition > 0.0 && self.init_self_transition < 1.0) {
            return Err(Error::Argument("init_self_transition must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitDiagnostics<T> {
    /// Accepted log-likelihood at the start and after every sweep of the best restart.
    pub log_likelihood_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedModel<T> {
    pub feature_names: Vec<String>,
    pub sequence: EventSequence,
    pub transition: TransitionModel<T>,
    pub band_width: usize,
    pub mixtures: Vec<MixturePair<T>>,
    pub diagnostics: FitDiagnostics<T>,
}

impl<T: Scalar> FittedModel<T> {
    pub fn n_events(&self) -> usize {
        self.sequence.len()
    }

    pub fn base_interval_months(&self) -> f64 {
        self.transition.base_interval_months.as_f64()
    }

    pub(crate) fn grid(&self, individual: &Individual) -> GridIndividual<T> {
        GridIndividual::new(individual, &self.mixtures, self.base_interval_months())
    }

    pub(crate) fn check_features(&self, cohort: &Cohort) -> Result<()> {
        if cohort.feature_names() != self.feature_names.as_slice() {
            return Err(Error::Schema(format!(
                "cohort features {:?} do not match model features {:?}",
                cohort.feature_names(),
                self.feature_names
            )));
        }
        Ok(())
    }
}

fn sorted_mixtures<T: Scalar>(mixtures: &[MixturePair<T>], n_features: usize) -> Result<Vec<MixturePair<T>>> {
    if mixtures.len() != n_features {
        return Err(Error::Argument(format!(
            "{} mixture pairs for {n_features} features",
            mixtures.len()
        )));
    }
    let mut sorted = mixtures.to_vec();
    sorted.sort_by_key(|p| p.feature_index);
    if sorted.iter().enumerate().any(|(i, p)| p.feature_index != i) {
        return Err(Error::Argument(
            "mixture feature indices must cover 0..I exactly once".into(),
        ));
    }
    Ok(sorted)
}

/// Orders events by the share of patient-labelled values that look more
/// patient- than control-like, most abnormal first.
pub fn initial_sequence<T: Scalar>(
    cohort: &Cohort,
    mixtures: &[MixturePair<T>],
    patient_label: Diagnosis,
) -> EventSequence {
    let n = cohort.n_features();
    let mut fraction = vec![0.0f64; n];
    for (f, frac) in fraction.iter_mut().enumerate() {
        let pair = &mixtures[f];
        let (mut hits, mut total) = (0usize, 0usize);
        for ind in cohort.individuals() {
            for (obs, label) in ind.observations.iter().zip(&ind.diagnosis_labels) {
                if *label != patient_label {
                    continue;
                }
                if let Some(v) = obs.get(f) {
                    let (lp, lc) = pair.log_likelihoods(Some(T::lit(v)));
                    total += 1;
                    if lp > lc {
                        hits += 1;
                    }
                }
            }
        }
        *frac = if total > 0 { hits as f64 / total as f64 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        fraction[b]
            .partial_cmp(&fraction[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    EventSequence::new(order).expect("sorted indices form a permutation")
}

struct Scorer<'a, T> {
    grids: &'a [GridIndividual<T>],
    pi0: Array1<T>,
    trans0: Array2<T>,
    base: T,
    band_width: usize,
}

struct Scored<T> {
    log_likelihood: T,
    transition: TransitionModel<T>,
    notes: Vec<String>,
}

impl<T: Scalar> Scorer<'_, T> {
    fn score(&self, sequence: &EventSequence) -> Result<Scored<T>> {
        let counts: Vec<TransitionCounts<T>> = self
            .grids
            .par_iter()
            .map(|g| {
                let post = smooth(
                    &g.log_emissions(sequence),
                    &repeated(&self.trans0, g.n_slots()),
                    &self.pi0,
                )?;
                Ok(TransitionCounts::from_posteriors(&post))
            })
            .collect::<Result<_>>()?;
        let mut total = TransitionCounts::zeros(self.pi0.len());
        for c in &counts {
            total.merge(c);
        }
        let update = total.finish(&self.trans0, self.band_width, true)?;
        let transition = TransitionModel {
            pi: update.pi,
            trans: update.trans,
            base_interval_months: self.base,
        };
        let lls: Vec<T> = self
            .grids
            .par_iter()
            .map(|g| {
                forward_log_likelihood(
                    &g.log_emissions(sequence),
                    &repeated(&transition.trans, g.n_slots()),
                    &transition.pi,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Scored {
            log_likelihood: lls.into_iter().sum(),
            transition,
            notes: update.notes,
        })
    }
}

struct RestartOutcome<T> {
    sequence: EventSequence,
    scored: Scored<T>,
    trace: Vec<T>,
    iterations: usize,
    converged: bool,
    degenerate: bool,
}

fn coordinate_ascent<T: Scalar>(
    scorer: &Scorer<'_, T>,
    start: EventSequence,
    max_outer_iter: usize,
) -> Result<RestartOutcome<T>> {
    let n = start.len();
    let mut sequence = start;
    let mut current = scorer.score(&sequence)?;
    let mut trace = vec![current.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;
    let mut any_difference = false;
    let tol = T::lit(1e-9);
    while iterations < max_outer_iter {
        iterations += 1;
        let mut changed = false;
        for event in 0..n {
            let incumbent = sequence.position_of(event);
            let mut best: Option<(usize, Scored<T>)> = None;
            for position in 0..n {
                if position == incumbent {
                    continue;
                }
                let candidate = sequence.with_event_moved(event, position);
                let scored = scorer.score(&candidate)?;
                let margin = tol * (T::one() + current.log_likelihood.abs());
                if (scored.log_likelihood - current.log_likelihood).abs() > margin {
                    any_difference = true;
                }
                let beats_incumbent = scored.log_likelihood > current.log_likelihood + margin;
                let beats_best = best
                    .as_ref()
                    .map_or(true, |(_, b)| scored.log_likelihood > b.log_likelihood);
                if beats_incumbent && beats_best {
                    best = Some((position, scored));
                }
            }
            if let Some((position, scored)) = best {
                sequence = sequence.with_event_moved(event, position);
                current = scored;
                changed = true;
            }
        }
        trace.push(current.log_likelihood);
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(RestartOutcome {
        sequence,
        scored: current,
        trace,
        iterations,
        converged,
        degenerate: !any_difference,
    })
}

/// Fits the event sequence and stage dynamics to `cohort` given per-feature
/// mixtures.
pub fn fit<T: Scalar>(cohort: &Cohort, mixtures: &[MixturePair<T>], config: &FitConfig) -> Result<FittedModel<T>> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(Error::Argument("cannot fit an empty cohort".into()));
    }
    let n = cohort.n_features();
    let mixtures = sorted_mixtures(mixtures, n)?;
    let grids: Vec<GridIndividual<T>> = cohort
        .individuals()
        .par_iter()
        .map(|ind| GridIndividual::new(ind, &mixtures, config.base_interval_months))
        .collect();
    let scorer = Scorer {
        grids: &grids,
        pi0: uniform_pi(n + 1),
        trans0: banded_transition(n + 1, config.band_width, T::lit(config.init_self_transition), true),
        base: T::lit(config.base_interval_months),
        band_width: config.band_width,
    };

    let mut best: Option<RestartOutcome<T>> = None;
    for restart in 0..config.random_restarts {
        let start = if restart == 0 {
            initial_sequence(cohort, &mixtures, config.patient_label)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(restart as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            EventSequence::new(order)?
        };
        let outcome = coordinate_ascent(&scorer, start, config.max_outer_iter)?;
        let better = best
            .as_ref()
            .map_or(true, |b| outcome.scored.log_likelihood > b.scored.log_likelihood);
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart");
    let mut notes = best.scored.notes.clone();
    if best.degenerate {
        notes.push(
            "every candidate sequence scored the same; the event order is not identifiable from this cohort".into(),
        );
    }
    if !best.converged {
        notes.push(format!("sequence still changing after {} sweeps", best.iterations));
    }
    Ok(FittedModel {
        feature_names: cohort.feature_names().to_vec(),
        sequence: best.sequence,
        transition: best.scored.transition,
        band_width: config.band_width,
        mixtures,
        diagnostics: FitDiagnostics {
            log_likelihood_trace: best.trace,
            iterations: best.iterations,
            converged: best.converged,
            restarts: config.random_restarts,
            notes,
        },
    })
}

/// Log-likelihood of one individual under a fitted model.
pub fn individual_log_likelihood<T: Scalar>(individual: &Individual, model: &FittedModel<T>) -> Result<T> {
    let grid = model.grid(individual);
    forward_log_likelihood(
        &grid.log_emissions(&model.sequence),
        &repeated(&model.transition.trans, grid.n_slots()),
        &model.transition.pi,
    )
}

/// Smoothed posteriors of one individual on the base-interval grid.
pub fn individual_posteriors<T: Scalar>(individual: &Individual, model: &FittedModel<T>) -> Result<PosteriorTables<T>> {
    let grid = model.grid(individual);
    smooth(
        &grid.log_emissions(&model.sequence),
        &repeated(&model.transition.trans, grid.n_slots()),
        &model.transition.pi,
    )
}

/// Total data log-likelihood: the sum of per-individual log marginals.
pub fn total_log_likelihood<T: Scalar>(cohort: &Cohort, model: &FittedModel<T>) -> Result<T> {
    model.check_features(cohort)?;
    let lls: Vec<T> = cohort
        .individuals()
        .par_iter()
        .map(|ind| individual_log_likelihood(ind, model))
        .collect::<Result<_>>()?;
    Ok(lls.into_iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use ndarray::array;

    fn model3() -> TransitionModel<f64> {
        TransitionModel::new(
            array![0.5, 0.3, 0.2],
            array![[0.6, 0.3, 0.1], [0.0, 0.7, 0.3], [0.0, 0.0, 1.0]],
            12.0,
        )
        .unwrap()
    }

    #[test]
    fn single_visit_reduces_to_weighted_emission() {
        let m = model3();
        let e = array![[0.2f64, 1.5, 0.7]];
        let post = forward_backward(&e.mapv(f64::ln), &[], &m).unwrap();
        let weights: Vec<f64> = (0..3).map(|a| m.pi[a] * e[[0, a]]).collect();
        let total: f64 = weights.iter().sum();
        assert!((post.log_likelihood - total.ln()).abs() < 1e-14);
        for a in 0..3 {
            assert!((post.gamma[[0, a]] - weights[a] / total).abs() < 1e-14);
        }
        assert_eq!(post.xi.shape()[0], 0);
    }

    #[test]
    fn uninformative_emissions_give_uniform_posteriors() {
        let m = TransitionModel::new(uniform_pi(3), identity(3), 12.0).unwrap();
        let e = Array2::<f64>::zeros((3, 3));
        let post = forward_backward(&e, &[12.0, 12.0], &m).unwrap();
        for v in post.gamma.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_emission_row_is_degenerate() {
        let m = model3();
        let mut e = Array2::<f64>::zeros((2, 3));
        e.row_mut(1).fill(f64::NEG_INFINITY);
        match forward_backward(&e, &[12.0], &m) {
            Err(Error::Degenerate { visit, .. }) => assert_eq!(visit, 1),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn delta_posteriors_give_path_counts() {
        let mut gamma = Array2::zeros((3, 3));
        let mut xi = Array3::zeros((2, 3, 3));
        for t in 0..3 {
            gamma[[t, t]] = 1.0;
        }
        xi[[0, 0, 1]] = 1.0;
        xi[[1, 1, 2]] = 1.0;
        let post = PosteriorTables {
            gamma,
            xi,
            log_likelihood: 0.0,
        };
        let init: Array2<f64> = banded_transition(3, 2, 0.9, true);
        let up = update_transition(&[post.clone()], &init, 2, true).unwrap();
        assert_eq!(up.trans[[0, 1]], 1.0);
        assert_eq!(up.trans[[1, 2]], 1.0);
        assert_eq!(up.trans[[2, 2]], 1.0);
        assert_eq!(up.pi.to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(up.notes.len(), 1);
        let twice = update_transition(&[post.clone(), post], &init, 2, true).unwrap();
        assert_eq!(twice.trans, up.trans);
        assert_eq!(twice.pi, up.pi);
    }

    #[test]
    fn single_visits_leave_transitions_unchanged() {
        let init: Array2<f64> = banded_transition(3, 2, 0.9, true);
        let post = PosteriorTables {
            gamma: array![[0.2, 0.3, 0.5]],
            xi: Array3::zeros((0, 3, 3)),
            log_likelihood: 0.0,
        };
        let up = update_transition(&[post], &init, 2, true).unwrap();
        assert_eq!(up.trans, init);
        assert_eq!(up.pi.to_vec(), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn grid_fills_gaps_with_neutral_slots() {
        assert_eq!(grid_slots(&[0.0, 12.0, 24.0], 12.0), vec![0, 1, 2]);
        assert_eq!(grid_slots(&[3.0, 27.0, 38.0], 12.0), vec![0, 2, 3]);
    }
}
