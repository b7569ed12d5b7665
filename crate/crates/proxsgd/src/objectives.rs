//! Smooth loss components and their gradients for the benchmark problems.
//!
//! Two objectives are supported. NN-PCA minimizes the mean of
//! `f_i(x) = -(x . z_i)^2 / 2` over the nonnegative unit ball, and
//! l1-regularized logistic regression minimizes the mean logistic loss plus
//! `lambda ||x||_1`. In both cases the sample gradient is a scalar multiple
//! of the feature vector, which the run loops exploit for sparse
//! accumulation.

use crate::core::{sparse_dot, axpy_sparse, DenseVec, Error, Result};
use crate::data::{Dataset, Sample};
use crate::prox::RegularizerSpec;
use crate::rng::{stream, CounterRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    NnPca,
    LogisticL1,
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectiveKind::NnPca => write!(f, "nnpca"),
            ObjectiveKind::LogisticL1 => write!(f, "logreg"),
        }
    }
}

/// An objective paired with its regularizer and a gradient Lipschitz
/// constant. NN-PCA on unit-norm samples has `L = 1`; the logistic loss gets
/// the standard `max_i ||z_i||^2 / 4` bound at load time.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub regularizer: RegularizerSpec,
    pub lipschitz: f64,
}

impl ObjectiveSpec {
    pub fn resolve(kind: ObjectiveKind, lambda: f64, data: &Dataset) -> Result<Self> {
        let max_norm_sq = data.max_feature_norm_sq();
        if max_norm_sq == 0.0 {
            return Err(Error::InvalidInput(
                "all-zero dataset has no usable Lipschitz constant".into(),
            ));
        }
        let (regularizer, lipschitz) = match kind {
            ObjectiveKind::NnPca => (RegularizerSpec::BallNonneg, max_norm_sq),
            ObjectiveKind::LogisticL1 => (RegularizerSpec::l1(lambda)?, max_norm_sq / 4.0),
        };
        Ok(ObjectiveSpec {
            kind,
            regularizer,
            lipschitz,
        })
    }
}

/// Scalar `c` such that the sample gradient is `c * z`.
pub fn grad_coefficient(obj: &ObjectiveSpec, x: &DenseVec, sample: &Sample) -> Result<f64> {
    let dot = sparse_dot(&sample.features, x)?;
    match obj.kind {
        ObjectiveKind::NnPca => Ok(-dot),
        ObjectiveKind::LogisticL1 => {
            let y = binary_label(sample)?;
            Ok(-y * sigmoid(-y * dot))
        }
    }
}

fn binary_label(sample: &Sample) -> Result<f64> {
    match sample.label {
        Some(y) if y == 1.0 || y == -1.0 => Ok(y),
        Some(y) => Err(Error::InvalidInput(format!(
            "logistic objective needs labels in {{-1, +1}}, got {y}"
        ))),
        None => Err(Error::InvalidInput(
            "logistic objective needs labeled samples".into(),
        )),
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(-t))`, overflow-safe.
fn softplus_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// Single-sample stochastic gradient `G(x; xi)`.
pub fn stoch_grad(obj: &ObjectiveSpec, x: &DenseVec, sample: &Sample) -> Result<DenseVec> {
    let mut g = DenseVec::zeros(x.len());
    accumulate_stoch_grad(obj, x, sample, &mut g)?;
    Ok(g)
}

/// `acc += G(x; xi)` without allocating; the hot path of every run loop.
pub fn accumulate_stoch_grad(
    obj: &ObjectiveSpec,
    x: &DenseVec,
    sample: &Sample,
    acc: &mut DenseVec,
) -> Result<()> {
    let c = grad_coefficient(obj, x, sample)?;
    axpy_sparse(c, &sample.features, acc)
}

/// Per-sample loss `F(x; xi)` (smooth part only).
pub fn sample_value(obj: &ObjectiveSpec, x: &DenseVec, sample: &Sample) -> Result<f64> {
    let dot = sparse_dot(&sample.features, x)?;
    match obj.kind {
        ObjectiveKind::NnPca => Ok(-dot * dot / 2.0),
        ObjectiveKind::LogisticL1 => {
            let y = binary_label(sample)?;
            Ok(softplus_neg(y * dot))
        }
    }
}

/// Full composite objective `(1/n) sum_i f_i(x) + h(x)`. An infeasible point
/// under an indicator regularizer is an error, never a silent number.
pub fn full_value(obj: &ObjectiveSpec, x: &DenseVec, data: &Dataset) -> Result<f64> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let h = obj.regularizer.value(x);
    if !h.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut sum = 0.0;
    for s in data.samples() {
        sum += sample_value(obj, x, s)?;
    }
    Ok(sum / data.n() as f64 + h)
}

/// True gradient `(1/n) sum_i grad f_i(x)` of the smooth part.
pub fn full_grad(obj: &ObjectiveSpec, x: &DenseVec, data: &Dataset) -> Result<DenseVec> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut g = DenseVec::zeros(x.len());
    for s in data.samples() {
        accumulate_stoch_grad(obj, x, s, &mut g)?;
    }
    g.scale(1.0 / data.n() as f64);
    Ok(g)
}

/// Deterministic starting point `x^1`. NN-PCA starts from a random
/// nonnegative unit vector (feasible for the indicator); the logistic
/// objective starts at the origin.
pub fn initial_model(kind: ObjectiveKind, d: usize, seed: u64) -> DenseVec {
    match kind {
        ObjectiveKind::LogisticL1 => DenseVec::zeros(d),
        ObjectiveKind::NnPca => {
            let rng = CounterRng::new(seed, stream::INIT);
            let mut v: Vec<f64> = (0..d as u64).map(|i| rng.f64_at(i) + 1e-3).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for a in &mut v {
                *a /= norm;
            }
            DenseVec::from_vec(v).expect("finite by construction")
        }
    }
}

/// Empirical `sigma^2 = E ||G(x; xi) - grad f(x)||^2` from `draws` uniform
/// single-sample gradients at `x`.
pub fn estimate_sigma_sq(
    obj: &ObjectiveSpec,
    data: &Dataset,
    x: &DenseVec,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidInput("sigma^2 needs at least one draw".into()));
    }
    let g = full_grad(obj, x, data)?;
    let rng = CounterRng::new(seed, stream::TEST);
    let mut acc = 0.0;
    for i in 0..draws as u64 {
        let idx = rng.index_at(i, data.n());
        let s = data.sample(idx);
        // ||c z - g||^2 = c^2 ||z||^2 - 2 c (z . g) + ||g||^2
        let c = grad_coefficient(obj, x, s)?;
        let zg = sparse_dot(&s.features, &g)?;
        acc += c * c * s.features.norm_sq() - 2.0 * c * zg + g.norm_sq();
    }
    Ok(acc / draws as f64)
}

/// Build the metrics row for the model after `k` completed updates: full
/// objective (errors on an infeasible iterate rather than logging a silent
/// number) and the exact gradient-mapping norm at the upcoming step size.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_record(
    obj: &ObjectiveSpec,
    data: &Dataset,
    x: &DenseVec,
    k: u64,
    samples_seen: u64,
    eta_next: f64,
    max_staleness: u64,
    clock: f64,
) -> Result<crate::core::RunRecord> {
    let objective = full_value(obj, x, data)?;
    let g = full_grad(obj, x, data)?;
    let p = crate::prox::gradient_mapping(x, &g, eta_next, &obj.regularizer)?;
    Ok(crate::core::RunRecord {
        k,
        samples_seen,
        objective,
        grad_map_norm_sq: p.norm_sq(),
        max_staleness,
        clock,
    })
}

/// A small helper the schedule resolution uses: sample variance proxy drawn
/// from a fresh stream so it never aliases batch draws.
pub fn mean_sample_grad_norm_sq_bound(
    obj: &ObjectiveSpec,
    data: &Dataset,
    x: &DenseVec,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in data.samples() {
        let c = grad_coefficient(obj, x, s)?;
        worst = worst.max(c * c * s.features.norm_sq());
    }
    Ok(worst)
}
