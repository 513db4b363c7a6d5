//! Individual staging: most probable stage path and next-stage prediction.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::cohort::Individual;
use crate::error::{Error, Result};
use crate::inference::{individual_posteriors, repeated, FittedModel};
use crate::markov::TransitionModel;
use crate::scalar::{argmax_low, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StagePath<T> {
    /// One stage per original visit.
    pub stages: Vec<usize>,
    /// Joint log-probability of the decoded grid path and the data.
    pub log_prob: T,
    /// Smoothed stage posterior at each original visit.
    pub posterior_by_visit: Array2<T>,
}

impl<T: Scalar> StagePath<T> {
    pub fn max_posterior(&self, visit: usize) -> T {
        self.posterior_by_visit
            .row(visit)
            .iter()
            .copied()
            .fold(T::zero(), T::max)
    }
}

/// Viterbi decoding over per-step log emissions. Ties go to the lower stage,
/// both for the predecessor at each step and for the final stage.
pub fn viterbi_path<T: Scalar>(
    log_emissions: &Array2<T>,
    transitions: &[&Array2<T>],
    pi: &Array1<T>,
) -> Result<(Vec<usize>, T)> {
    let (n_steps, n_stages) = log_emissions.dim();
    if n_steps == 0 || transitions.len() + 1 != n_steps {
        return Err(Error::Argument("viterbi needs one transition per step gap".into()));
    }
    let mut delta = Array2::<T>::from_elem((n_steps, n_stages), T::neg_infinity());
    let mut back = Array2::<usize>::zeros((n_steps, n_stages));
    for a in 0..n_stages {
        delta[[0, a]] = pi[a].ln() + log_emissions[[0, a]];
    }
    for t in 1..n_steps {
        let log_trans = transitions[t - 1].mapv(|v| v.ln());
        for b in 0..n_stages {
            let from = argmax_low((0..n_stages).map(|a| delta[[t - 1, a]] + log_trans[[a, b]]));
            delta[[t, b]] = delta[[t - 1, from]] + log_trans[[from, b]] + log_emissions[[t, b]];
            back[[t, b]] = from;
        }
    }
    let last = argmax_low(delta.row(n_steps - 1).iter().copied());
    let log_prob = delta[[n_steps - 1, last]];
    if !log_prob.is_finite() {
        return Err(Error::Degenerate {
            visit: (0..n_steps)
                .find(|&t| delta.row(t).iter().all(|v| !v.is_finite()))
                .unwrap_or(n_steps - 1),
            message: "every stage path has zero probability".into(),
        });
    }
    let mut path = vec![0; n_steps];
    path[n_steps - 1] = last;
    for t in (1..n_steps).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    Ok((path, log_prob))
}

/// Most probable stage trajectory for one individual.
pub fn viterbi_stage<T: Scalar>(individual: &Individual, model: &FittedModel<T>) -> Result<StagePath<T>> {
    if individual.observations[0].n_features() != model.n_events() {
        return Err(Error::Schema(format!(
            "individual '{}' has {} features, model expects {}",
            individual.id,
            individual.observations[0].n_features(),
            model.n_events()
        )));
    }
    let grid = model.grid(individual);
    let log_em = grid.log_emissions(&model.sequence);
    let transitions = repeated(&model.transition.trans, grid.n_slots());
    let (path, log_prob) = viterbi_path(&log_em, &transitions, &model.transition.pi)?;
    let posteriors = individual_posteriors(individual, model)?;
    Ok(StagePath {
        stages: grid.visit_slots.iter().map(|&s| path[s]).collect(),
        log_prob,
        posterior_by_visit: select_rows(&posteriors.gamma, &grid.visit_slots),
    })
}

pub(crate) fn select_rows<T: Scalar>(m: &Array2<T>, rows: &[usize]) -> Array2<T> {
    let mut out = Array2::zeros((rows.len(), m.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&m.row(r));
    }
    out
}

/// Propagates a stage distribution `horizon_months` ahead; the predicted
/// stage is its argmax (lower stage on ties).
pub fn propagate<T: Scalar>(
    posterior: &Array1<T>,
    transition: &TransitionModel<T>,
    horizon_months: T,
) -> Result<(usize, Array1<T>)> {
    if !(horizon_months > T::zero()) {
        return Err(Error::Argument(format!(
            "horizon must be positive, got {horizon_months}"
        )));
    }
    let step = transition.transition_over_interval(horizon_months)?;
    let dist = posterior.dot(&step);
    let stage = argmax_low(dist.iter().copied());
    Ok((stage, dist))
}

/// Stage distribution `horizon_months` after the individual's last visit.
pub fn predict_next_stage<T: Scalar>(
    individual: &Individual,
    model: &FittedModel<T>,
    horizon_months: T,
) -> Result<(usize, Array1<T>)> {
    let posteriors = individual_posteriors(individual, model)?;
    let last = posteriors.gamma.row(posteriors.gamma.nrows() - 1).to_owned();
    propagate(&last, &model.transition, horizon_months)
}
