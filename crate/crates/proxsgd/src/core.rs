//! Shared numeric primitives, run configuration and metric rows.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    InvalidInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point is infeasible under the indicator regularizer")]
    Infeasible,
    #[error("sample {0} has zero norm and cannot be normalized")]
    ZeroNormSample(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("update {k}: delay {tau} exceeds the available model history")]
    DelayBound { k: u64, tau: u64 },
    #[error("target suboptimality {0} was never reached")]
    TargetNotReached(f64),
    #[error("reference fingerprint {expected:#018x} does not match dataset fingerprint {got:#018x}")]
    FingerprintMismatch { expected: u64, got: u64 },
    #[error("an observed objective undercuts the reference value; the reference is stale")]
    StaleReference,
    #[error("objective increased for {0} consecutive steps with a safe step size")]
    Diverged(usize),
    #[error("worker {0} lost its connection to the server")]
    ServerDisconnected(usize),
    #[error("model snapshot failed its checksum")]
    SnapshotCorrupt,
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense 64-bit float vector; holds the model `x`, gradients and gradient
/// mappings. Entries are finite after every public operation: constructors
/// reject NaN/Inf and the mutating ops keep finiteness when their inputs are
/// finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVec(Vec<f64>);

impl DenseVec {
    pub fn zeros(d: usize) -> Self {
        DenseVec(vec![0.0; d])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseVec::from_vec"));
        }
        Ok(DenseVec(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Mutable access for the exclusive owner. Callers must keep entries
    /// finite; debug builds assert it on the next consuming operation.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &DenseVec) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn min_coord(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, alpha: f64) {
        debug_assert!(alpha.is_finite());
        for v in &mut self.0 {
            *v *= alpha;
        }
    }

    /// `self += alpha * other`.
    pub fn saxpy(&mut self, alpha: f64, other: &DenseVec) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        debug_assert!(alpha.is_finite());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Component-wise `self - other` as a new vector.
    pub fn sub(&self, other: &DenseVec) -> Result<DenseVec> {
        if self.len() != other.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(DenseVec(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn max_abs_diff(&self, other: &DenseVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for DenseVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Sparse feature vector with strictly increasing 0-based indices and finite
/// nonzero values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVec {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "index/value length mismatch: {} vs {}",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(format!(
                    "indices must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: last + 1,
                });
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(Error::NonFinite("SparseVec values (finite, nonzero)"));
        }
        Ok(SparseVec {
            indices,
            values,
            dim,
        })
    }

    pub fn empty(dim: usize) -> Self {
        SparseVec {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().cloned().zip(self.values.iter().cloned())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub(crate) fn scale_in_place(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// Widen the stored dimension (used when a dataset pins `d` above the
    /// largest observed index).
    pub(crate) fn with_dim(mut self, dim: usize) -> Result<Self> {
        if let Some(&last) = self.indices.last() {
            if last >= dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: last + 1,
                });
            }
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn densify(&self) -> DenseVec {
        let mut out = DenseVec::zeros(self.dim);
        for (i, v) in self.iter() {
            out.0[i] = v;
        }
        out
    }
}

/// `z . x` over the sparse support.
pub fn sparse_dot(z: &SparseVec, x: &DenseVec) -> Result<f64> {
    if z.dim() != x.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: z.dim(),
        });
    }
    Ok(z.iter().map(|(i, v)| v * x.0[i]).sum())
}

/// `x += alpha * z` over the sparse support.
pub fn axpy_sparse(alpha: f64, z: &SparseVec, x: &mut DenseVec) -> Result<()> {
    if z.dim() != x.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: z.dim(),
        });
    }
    debug_assert!(alpha.is_finite());
    for (i, v) in z.iter() {
        x.0[i] += alpha * v;
    }
    Ok(())
}

/// Execution mode selecting which run loop drives the updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Threads plus a message-passing parameter server.
    Async,
    /// Single-threaded executor with explicit delay schedules.
    Simulated,
    /// Plain sequential mini-batch ProxSGD.
    Sequential,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Async => write!(f, "async"),
            Mode::Simulated => write!(f, "simulated"),
            Mode::Sequential => write!(f, "sequential"),
        }
    }
}

/// Run parameters shared by every execution mode.
///
/// `batch_n` is the mini-batch size `N` consumed per model update, split as
/// `N/m` sample gradients per worker; `max_delay` is the staleness bound `T`
/// enforced by the simulator and merely observed by the real engine.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub batch_n: usize,
    pub workers_m: usize,
    pub max_delay: u64,
    pub updates_k: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Metrics are evaluated every `metric_stride` updates (and always at the
    /// final update).
    pub metric_stride: u64,
}

impl RunConfig {
    pub fn new(batch_n: usize, workers_m: usize, updates_k: u64, seed: u64, mode: Mode) -> Self {
        RunConfig {
            data_path: None,
            batch_n,
            workers_m,
            max_delay: 0,
            updates_k,
            seed,
            mode,
            metric_stride: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_n == 0 {
            return Err(Error::InvalidInput("batch size N must be positive".into()));
        }
        if self.workers_m == 0 {
            return Err(Error::InvalidInput("worker count m must be >= 1".into()));
        }
        if self.batch_n % self.workers_m != 0 {
            return Err(Error::InvalidInput(format!(
                "N must be divisible by m (got N={}, m={})",
                self.batch_n, self.workers_m
            )));
        }
        if self.updates_k == 0 {
            return Err(Error::InvalidInput("update count K must be >= 1".into()));
        }
        if self.metric_stride == 0 {
            return Err(Error::InvalidInput("metric stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Sample gradients computed per worker push.
    pub fn per_worker(&self) -> usize {
        self.batch_n / self.workers_m
    }
}

/// Everything a run loop hands back to the harness: the metric rows, the
/// final model, the best objective seen at any logged record (with the model
/// that achieved it), the largest staleness realized anywhere in the run,
/// and optionally the post-update iterate sequence plus the per-sample
/// staleness histogram (simulated mode only).
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub final_x: DenseVec,
    pub best_objective: f64,
    pub best_x: DenseVec,
    pub max_staleness: u64,
    pub iterates: Option<Vec<DenseVec>>,
    pub staleness_hist: Option<std::collections::BTreeMap<u64, u64>>,
}

/// One metrics row. Row `k` describes the model after `k` completed updates:
/// its objective, the squared gradient-mapping norm at the step size of the
/// upcoming update, the largest staleness realized since the previous row and
/// the clock (simulated units in deterministic modes, wall seconds in async
/// mode).
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub k: u64,
    pub samples_seen: u64,
    pub objective: f64,
    pub grad_map_norm_sq: f64,
    pub max_staleness: u64,
    pub clock: f64,
}
