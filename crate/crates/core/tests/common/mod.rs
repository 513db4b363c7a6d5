#![allow(dead_code)]

use ebhmm_core::cohort::{Cohort, Diagnosis, Direction, Individual, Observation};
use ebhmm_core::markov::{apply_structure_prior, TransitionModel};
use ebhmm_core::mixture::{GaussianParams, MixturePair};
use ndarray::{Array1, Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Everything an exhaustive enumeration over stage paths yields.
pub struct Enumerated {
    pub log_likelihood: f64,
    pub gamma: Array2<f64>,
    pub xi: Array3<f64>,
    pub best_path: Vec<usize>,
    pub best_log_prob: f64,
}

/// Visits every path in `0..n_stages` ^ `n_steps` in lexicographic order.
pub fn for_each_path(n_stages: usize, n_steps: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; n_steps];
    loop {
        f(&path);
        let mut i = n_steps;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < n_stages {
                break;
            }
            path[i] = 0;
        }
    }
}

pub fn path_weight(path: &[usize], emissions: &Array2<f64>, transitions: &[Array2<f64>], pi: &Array1<f64>) -> f64 {
    let mut w = pi[path[0]] * emissions[[0, path[0]]];
    for t in 1..path.len() {
        w *= transitions[t - 1][[path[t - 1], path[t]]] * emissions[[t, path[t]]];
    }
    w
}

/// Sums and maximises over all paths in the linear domain.
pub fn enumerate(emissions: &Array2<f64>, transitions: &[Array2<f64>], pi: &Array1<f64>) -> Enumerated {
    let (n_steps, n_stages) = emissions.dim();
    let mut total = 0.0;
    let mut gamma = Array2::zeros((n_steps, n_stages));
    let mut xi = Array3::zeros((n_steps.saturating_sub(1), n_stages, n_stages));
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_path(n_stages, n_steps, |path| {
        let w = path_weight(path, emissions, transitions, pi);
        total += w;
        for (t, &k) in path.iter().enumerate() {
            gamma[[t, k]] += w;
        }
        for t in 1..n_steps {
            xi[[t - 1, path[t - 1], path[t]]] += w;
        }
        // strict comparison keeps the lexicographically smallest optimum
        if w > best.0 {
            best = (w, path.to_vec());
        }
    });
    gamma /= total;
    xi /= total;
    Enumerated {
        log_likelihood: total.ln(),
        gamma,
        xi,
        best_path: best.1,
        best_log_prob: best.0.ln(),
    }
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// A strictly positive stochastic vector.
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Array1<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    Array1::from_iter(v.into_iter().map(|x| x / s))
}

/// Random row-stochastic matrix that satisfies the band (and optionally the
/// monotone) structure, with every allowed entry strictly positive.
pub fn random_banded(rng: &mut impl Rng, n: usize, band: usize, monotone: bool) -> Array2<f64> {
    let raw = Array2::from_shape_fn((n, n), |_| rng.random_range(0.05..1.0));
    apply_structure_prior(&raw, band, monotone).unwrap()
}

/// Random dense row-stochastic matrix.
pub fn random_dense(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((n, n), |_| rng.random_range(0.05..1.0));
    for mut row in m.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(pi: Array1<f64>, trans: Array2<f64>) -> TransitionModel<f64> {
    TransitionModel::new(pi, trans, 12.0).unwrap()
}

/// `n` features with control N(0, 1) and patient N(sep, 1).
pub fn pairs(n: usize, sep: f64) -> Vec<MixturePair<f64>> {
    (0..n)
        .map(|f| {
            MixturePair::new(
                GaussianParams::new(sep, 1.0, 0.5).unwrap(),
                GaussianParams::new(0.0, 1.0, 0.5).unwrap(),
                f,
            )
            .unwrap()
        })
        .collect()
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("F{i}")).collect()
}

/// Random cohort of `j` individuals with visits at 0, 12, 24, ... months.
/// Cells go missing with probability `p_missing`.
pub fn random_cohort(rng: &mut impl Rng, n_features: usize, j: usize, visits: usize, p_missing: f64) -> Cohort {
    let labels = [Diagnosis::CN, Diagnosis::MCI, Diagnosis::AD];
    let individuals = (0..j)
        .map(|s| {
            let observations = (0..visits)
                .map(|t| {
                    let values: Vec<Option<f64>> = (0..n_features)
                        .map(|_| (rng.random::<f64>() >= p_missing).then(|| rng.random_range(-2.0..5.0)))
                        .collect();
                    Observation::new(&values, 12.0 * t as f64)
                })
                .collect();
            Individual {
                id: format!("S{s:03}"),
                observations,
                diagnosis_labels: (0..visits).map(|_| labels[rng.random_range(0..3)]).collect(),
            }
        })
        .collect();
    Cohort::new(names(n_features), vec![Direction::Increasing; n_features], individuals).unwrap()
}

/// Proptest seed strategy for instance generators driven by ChaCha.
pub fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}
