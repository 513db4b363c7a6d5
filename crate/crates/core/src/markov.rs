//! Stage-transition dynamics.
//!
//! The fitted object is a row-stochastic matrix over one base interval
//! (12 months by default). Transitions over other intervals are matrix
//! powers for whole multiples of the base interval and `exp(r · log P)`
//! otherwise.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::sequence::EventSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionModel<T> {
    pub pi: Array1<T>,
    pub trans: Array2<T>,
    pub base_interval_months: T,
}

impl<T: Scalar> TransitionModel<T> {
    pub fn new(pi: Array1<T>, trans: Array2<T>, base_interval_months: T) -> Result<Self> {
        let m = TransitionModel {
            pi,
            trans,
            base_interval_months,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pi.len();
        if n < 2 || self.trans.dim() != (n, n) {
            return Err(Error::Argument(format!(
                "pi has {n} entries but trans is {:?}",
                self.trans.dim()
            )));
        }
        if !(self.base_interval_months > T::zero()) {
            return Err(Error::Argument("base interval must be positive".into()));
        }
        let tol = T::stochastic_tol();
        check_probability_vector(self.pi.iter().copied(), tol).map_err(|m| Error::Argument(format!("pi {m}")))?;
        for (a, row) in self.trans.rows().into_iter().enumerate() {
            check_probability_vector(row.iter().copied(), tol)
                .map_err(|m| Error::Argument(format!("trans row {a} {m}")))?;
        }
        Ok(())
    }

    pub fn n_stages(&self) -> usize {
        self.pi.len()
    }

    /// No mass below the diagonal.
    pub fn is_monotone(&self) -> bool {
        self.trans.indexed_iter().all(|((a, b), &v)| b >= a || v == T::zero())
    }

    /// Whether all mass lies inside `[a - band, a + band]` (or `[a, a + band]` when monotone).
    pub fn respects_band(&self, band_width: usize, monotone: bool) -> bool {
        self.trans
            .indexed_iter()
            .all(|((a, b), &v)| v == T::zero() || in_band(a, b, band_width, monotone))
    }

    /// Transition matrix for an interval of `delta_months`.
    pub fn transition_over_interval(&self, delta_months: T) -> Result<Array2<T>> {
        if !(delta_months > T::zero()) || !delta_months.is_finite() {
            return Err(Error::Argument(format!(
                "interval must be positive, got {delta_months}"
            )));
        }
        let ratio = delta_months / self.base_interval_months;
        let whole = ratio.round();
        if whole >= T::one() && (ratio - whole).abs() <= T::lit(1e-9) * ratio.max(T::one()) {
            let k = whole.to_u64().unwrap_or(1);
            return Ok(if k == 1 {
                self.trans.clone()
            } else {
                linalg::matrix_power(&self.trans, k)
            });
        }
        let generator = self.log_transition()?;
        let mut out = linalg::expm(&(generator * ratio));
        for mut row in out.rows_mut() {
            row.mapv_inplace(|v| v.max(T::zero()).min(T::one()));
            let s: T = row.sum();
            if s > T::zero() {
                row.mapv_inplace(|v| v / s);
            }
        }
        Ok(out)
    }

    /// Principal logarithm of the per-interval matrix (the generator scaled
    /// by the base interval).
    pub fn log_transition(&self) -> Result<Array2<T>> {
        let embed_err = |message: String| Error::Embedding {
            matrix: "trans".into(),
            message,
        };
        let log = linalg::logm(&self.trans)
            .ok_or_else(|| embed_err("square-root iteration failed (singular or negative real eigenvalue)".into()))?;
        let back = linalg::expm(&log);
        let err = linalg::max_abs_diff(&back, &self.trans);
        if !(err <= T::lit(1e-8).max(T::epsilon() * T::lit(1e4))) {
            return Err(embed_err(format!(
                "logarithm does not reproduce the matrix (error {err})"
            )));
        }
        Ok(log)
    }

    /// Continuous-time generator in units of 1/month.
    pub fn generator(&self) -> Result<Array2<T>> {
        Ok(self.log_transition()? / self.base_interval_months)
    }

    /// Expected dwell per stage in months; absorbing stages give `+inf`.
    pub fn sojourn_times(&self) -> Vec<T> {
        (0..self.n_stages())
            .map(|k| {
                let q = self.trans[[k, k]];
                if q >= T::one() {
                    T::infinity()
                } else {
                    self.base_interval_months / (T::one() - q)
                }
            })
            .collect()
    }

    /// Cumulative expected event times along `sequence`.
    pub fn event_timeline(&self, sequence: &EventSequence) -> Result<Timeline<T>> {
        let n = sequence.len();
        if self.n_stages() != n + 1 {
            return Err(Error::Timeline(format!(
                "model has {} stages but the sequence has {n} events",
                self.n_stages()
            )));
        }
        let sojourns = self.sojourn_times();
        let mut event_times = Vec::with_capacity(n);
        let mut acc = T::zero();
        for (k, s) in sojourns.iter().take(n).enumerate() {
            if !s.is_finite() {
                return Err(Error::Timeline(format!(
                    "stage {k} is absorbing before the final stage; its sojourn is infinite"
                )));
            }
            acc += *s;
            event_times.push(acc);
        }
        Ok(Timeline {
            order: sequence.order().to_vec(),
            sojourns,
            event_times,
        })
    }
}

fn check_probability_vector<T: Scalar>(values: impl Iterator<Item = T>, tol: T) -> std::result::Result<(), String> {
    let mut sum = T::zero();
    for v in values {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(format!("has invalid entry {v}"));
        }
        sum += v;
    }
    if (sum - T::one()).abs() > tol {
        return Err(format!("sums to {sum}, expected 1"));
    }
    Ok(())
}

fn in_band(a: usize, b: usize, band_width: usize, monotone: bool) -> bool {
    if monotone {
        b >= a && b - a <= band_width
    } else {
        a.abs_diff(b) <= band_width
    }
}

/// Expected event times derived from sojourns. `event_times[n]` is the time
/// at which the event at sequence position `n` occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Timeline<T> {
    pub order: Vec<usize>,
    pub sojourns: Vec<T>,
    pub event_times: Vec<T>,
}

impl<T: Scalar> Timeline<T> {
    pub fn total_span_months(&self) -> T {
        self.event_times.last().copied().unwrap_or_else(T::zero)
    }
}

/// Masks entries outside the structural band and renormalises rows.
/// A row left without mass becomes a self-transition.
pub fn apply_structure_prior<T: Scalar>(raw: &Array2<T>, band_width: usize, monotone: bool) -> Result<Array2<T>> {
    if band_width < 1 {
        return Err(Error::Argument("band width must be >= 1".into()));
    }
    let (n, m) = raw.dim();
    if n != m {
        return Err(Error::Argument(format!(
            "transition matrix must be square, got {n}x{m}"
        )));
    }
    if raw.iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::Argument("transition counts must be nonnegative".into()));
    }
    let mut out = raw.clone();
    for ((a, b), v) in out.indexed_iter_mut() {
        if !in_band(a, b, band_width, monotone) {
            *v = T::zero();
        }
    }
    for (a, mut row) in out.rows_mut().into_iter().enumerate() {
        let s: T = row.sum();
        if s > T::zero() {
            row.mapv_inplace(|v| v / s);
        } else {
            row[a] = T::one();
        }
    }
    Ok(out)
}

/// Banded starting matrix: `self_prob` on the diagonal, the rest split
/// evenly over the other in-band entries. Rows with no in-band neighbour
/// are absorbing.
pub fn banded_transition<T: Scalar>(n: usize, band_width: usize, self_prob: T, monotone: bool) -> Array2<T> {
    let mut out = Array2::zeros((n, n));
    for a in 0..n {
        let others: Vec<usize> = (0..n)
            .filter(|&b| b != a && in_band(a, b, band_width, monotone))
            .collect();
        if others.is_empty() {
            out[[a, a]] = T::one();
            continue;
        }
        out[[a, a]] = self_prob;
        let share = (T::one() - self_prob) / T::from_usize_lossy(others.len());
        for b in others {
            out[[a, b]] = share;
        }
    }
    out
}

pub fn uniform_pi<T: Scalar>(n: usize) -> Array1<T> {
    Array1::from_elem(n, T::one() / T::from_usize_lossy(n))
}
