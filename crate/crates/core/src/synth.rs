//! Synthetic cohorts sampled from known model parameters.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Diagnosis, Direction, Individual, Observation};
use crate::error::{Error, Result};
use crate::markov::TransitionModel;
use crate::mixture::{GaussianParams, MixturePair};
use crate::scalar::Scalar;
use crate::sequence::EventSequence;

/// Maps stage ranges to diagnosis labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    /// Inclusive `(first_stage, last_stage, label)` bands covering `0..=N`.
    pub bands: Vec<(usize, usize, Diagnosis)>,
}

impl LabelRule {
    /// CN / MCI / AD split at the same relative positions as
    /// 0..=2 / 3..=8 / 9..=12 on a twelve-event model.
    pub fn default_for(n_events: usize) -> LabelRule {
        let n_stages = n_events + 1;
        let cut = |num: usize| (num * n_stages).div_ceil(13).clamp(1, n_stages);
        let mci_start = cut(3);
        let ad_start = cut(9).max(mci_start + 1).min(n_stages);
        let mut bands = vec![(0, mci_start - 1, Diagnosis::CN)];
        if ad_start > mci_start {
            bands.push((mci_start, ad_start - 1, Diagnosis::MCI));
        }
        if ad_start < n_stages {
            bands.push((ad_start, n_events, Diagnosis::AD));
        }
        LabelRule { bands }
    }

    pub fn label(&self, stage: usize) -> Diagnosis {
        self.bands
            .iter()
            .find(|(lo, hi, _)| (*lo..=*hi).contains(&stage))
            .map(|(_, _, l)| *l)
            .unwrap_or(Diagnosis::NA)
    }

    fn covers(&self, n_events: usize) -> bool {
        (0..=n_events).all(|k| self.bands.iter().any(|(lo, hi, _)| (*lo..=*hi).contains(&k)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroundTruth<T> {
    pub feature_names: Vec<String>,
    pub feature_directions: Vec<Direction>,
    pub sequence: EventSequence,
    pub transition: TransitionModel<T>,
    pub mixtures: Vec<MixturePair<T>>,
    pub label_rule: LabelRule,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.sequence.len();
        if self.feature_names.len() != n || self.feature_directions.len() != n || self.mixtures.len() != n {
            return Err(Error::Argument(format!(
                "ground truth sizes disagree: {} names, {} directions, {} mixtures, {n} events",
                self.feature_names.len(),
                self.feature_directions.len(),
                self.mixtures.len()
            )));
        }
        self.transition.validate()?;
        if self.transition.n_stages() != n + 1 {
            return Err(Error::Argument("transition model must have N + 1 stages".into()));
        }
        for (i, m) in self.mixtures.iter().enumerate() {
            if m.feature_index != i {
                return Err(Error::Argument("mixtures must be listed in feature order".into()));
            }
        }
        if !self.label_rule.covers(n) {
            return Err(Error::Argument("label rule must cover every stage".into()));
        }
        Ok(())
    }

    /// Reference truth: `n_events` features named `F0..`, control N(0, 1),
    /// patient N(separation, 1), identity event order, initial stages spread
    /// uniformly, and a monotone band-2 matrix with `self_prob` on the
    /// diagonal and the remainder split 3:1 between one and two steps ahead.
    pub fn standard(n_events: usize, separation: f64, self_prob: f64, base_interval_months: f64) -> Result<Self> {
        let n_stages = n_events + 1;
        let mut trans = Array2::<T>::zeros((n_stages, n_stages));
        for a in 0..n_stages {
            let rest = 1.0 - self_prob;
            match n_stages - 1 - a {
                0 => trans[[a, a]] = T::one(),
                1 => {
                    trans[[a, a]] = T::lit(self_prob);
                    trans[[a, a + 1]] = T::lit(rest);
                }
                _ => {
                    trans[[a, a]] = T::lit(self_prob);
                    trans[[a, a + 1]] = T::lit(rest * 0.75);
                    trans[[a, a + 2]] = T::lit(rest * 0.25);
                }
            }
        }
        let pi = Array1::from_elem(n_stages, T::one() / T::from_usize_lossy(n_stages));
        let mixtures = (0..n_events)
            .map(|i| {
                MixturePair::new(
                    GaussianParams::new(T::lit(separation), T::one(), T::lit(0.5))?,
                    GaussianParams::new(T::zero(), T::one(), T::lit(0.5))?,
                    i,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let truth = GroundTruth {
            feature_names: (0..n_events).map(|i| format!("F{i}")).collect(),
            feature_directions: vec![Direction::Increasing; n_events],
            sequence: EventSequence::identity(n_events),
            transition: TransitionModel::new(pi, trans, T::lit(base_interval_months))?,
            mixtures,
            label_rule: LabelRule::default_for(n_events),
        };
        truth.validate()?;
        Ok(truth)
    }
}

fn draw_categorical<T: Scalar, R: Rng>(probs: impl Iterator<Item = T>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// A synthetic cohort plus the latent stage of every visit.
#[derive(Clone, Debug)]
pub struct SampledCohort {
    pub cohort: Cohort,
    pub stages: Vec<Vec<usize>>,
}

/// Samples `n_individuals` trajectories on `visit_schedule` (months).
/// Each individual draws from its own random stream, so results do not
/// depend on how many individuals are requested after it.
pub fn sample_cohort<T: Scalar>(
    truth: &GroundTruth<T>,
    n_individuals: usize,
    visit_schedule: &[f64],
    missing_fraction: f64,
    seed: u64,
) -> Result<SampledCohort> {
    truth.validate()?;
    if visit_schedule.is_empty() {
        return Err(Error::Argument("visit schedule must not be empty".into()));
    }
    if visit_schedule[0] < 0.0 || visit_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument(
            "visit schedule must be nonnegative and strictly ascending".into(),
        ));
    }
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(Error::Argument(format!(
            "missing fraction must lie in [0, 1), got {missing_fraction}"
        )));
    }
    let mut steps = Vec::new();
    for w in visit_schedule.windows(2) {
        steps.push(truth.transition.transition_over_interval(T::lit(w[1] - w[0]))?);
    }
    let positions = truth.sequence.positions();
    let n_features = truth.sequence.len();
    let normals: Vec<(Normal<f64>, Normal<f64>)> = truth
        .mixtures
        .iter()
        .map(|m| {
            (
                Normal::new(m.patient.mu.as_f64(), m.patient.sigma.as_f64()).expect("valid patient gaussian"),
                Normal::new(m.control.mu.as_f64(), m.control.sigma.as_f64()).expect("valid control gaussian"),
            )
        })
        .collect();

    let mut individuals = Vec::with_capacity(n_individuals);
    let mut stage_paths = Vec::with_capacity(n_individuals);
    let width = n_individuals.to_string().len().max(4);
    for j in 0..n_individuals {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let mut stage = draw_categorical(truth.transition.pi.iter().copied(), &mut rng);
        let mut path = Vec::with_capacity(visit_schedule.len());
        let mut observations = Vec::with_capacity(visit_schedule.len());
        for (t, &time) in visit_schedule.iter().enumerate() {
            if t > 0 {
                stage = draw_categorical(steps[t - 1].row(stage).iter().copied(), &mut rng);
            }
            path.push(stage);
            let values: Vec<Option<f64>> = (0..n_features)
                .map(|f| {
                    let (patient, control) = &normals[f];
                    let v = if positions[f] < stage {
                        patient.sample(&mut rng)
                    } else {
                        control.sample(&mut rng)
                    };
                    let hide = rng.random::<f64>() < missing_fraction;
                    (!hide).then_some(v)
                })
                .collect();
            observations.push(Observation::new(&values, time));
        }
        individuals.push(Individual {
            id: format!("SYN{j:0width$}"),
            diagnosis_labels: path.iter().map(|&k| truth.label_rule.label(k)).collect(),
            observations,
        });
        stage_paths.push(path);
    }
    let cohort = Cohort::new(
        truth.feature_names.clone(),
        truth.feature_directions.clone(),
        individuals,
    )?;
    Ok(SampledCohort {
        cohort,
        stages: stage_paths,
    })
}
