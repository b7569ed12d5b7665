//! Deterministic global-view executor with explicit, bounded, replayable
//! gradient delays.
//!
//! Each update `k` draws a batch of `N` sample indices and evaluates sample
//! `i`'s gradient on the historical model `x^{k - tau(k, i)}`, where the
//! delays come from a counter-based schedule and never exceed
//! `min(T, k - 1)`. A ring buffer keeps the last `T + 1` models. With the
//! zero schedule the loop degenerates to plain sequential ProxSGD, which
//! makes this module the reproducibility oracle for the threaded engine.

use std::collections::BTreeMap;

use crate::core::{DenseVec, Error, Mode, Result, RunConfig, RunOutput};
use crate::data::{BatchSampler, Dataset};
use crate::objectives::{accumulate_stoch_grad, evaluate_record, initial_model, ObjectiveSpec};
use crate::prox::prox;
use crate::rng::{stream, CounterRng};
use crate::schedule::StepSchedule;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DelayKind {
    Zero,
    ConstantTau(u64),
    UniformRandom,
    /// Geometric number of missed rounds with success probability `p`,
    /// capped at the bound.
    GeometricCapped {
        p: f64,
    },
}

/// Delay schedule tau(k, i) with hard bound `T`. Draws are pure functions of
/// `(seed, k, i)`; with `per_worker_groups = Some(m)` all samples inside one
/// group of `N/m` consecutive batch positions share a draw, mimicking the
/// per-push staleness of the parameter server.
#[derive(Clone, Copy, Debug)]
pub struct DelaySchedule {
    kind: DelayKind,
    bound: u64,
    rng: CounterRng,
    per_worker_groups: Option<usize>,
}

impl DelaySchedule {
    pub fn new(kind: DelayKind, bound: u64, seed: u64) -> Result<Self> {
        match kind {
            DelayKind::ConstantTau(tau) if tau > bound => {
                return Err(Error::InvalidInput(format!(
                    "constant delay {tau} exceeds the bound T={bound}"
                )));
            }
            DelayKind::GeometricCapped { p } if !(p > 0.0 && p <= 1.0) => {
                return Err(Error::InvalidInput(format!(
                    "geometric delay needs 0 < p <= 1, got {p}"
                )));
            }
            _ => {}
        }
        Ok(DelaySchedule {
            kind,
            bound,
            rng: CounterRng::new(seed, stream::DELAY),
            per_worker_groups: None,
        })
    }

    pub fn zero() -> Self {
        DelaySchedule::new(DelayKind::Zero, 0, 0).expect("zero schedule is valid")
    }

    /// Tie delays per pseudo-worker group of `N/m` consecutive samples.
    pub fn with_worker_groups(mut self, m: usize) -> Self {
        self.per_worker_groups = if m > 1 { Some(m) } else { None };
        self
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn kind(&self) -> DelayKind {
        self.kind
    }

    /// Realized delay for sample `i` of update `k`, warm-up clamped so the
    /// referenced model `x^{k-tau}` exists: `tau <= min(T, k-1)`.
    pub fn tau(&self, k: u64, i: u64, batch_n: usize) -> u64 {
        let unit = match self.per_worker_groups {
            Some(m) => i / (batch_n / m).max(1) as u64,
            None => i,
        };
        let raw = match self.kind {
            DelayKind::Zero => 0,
            DelayKind::ConstantTau(tau) => tau,
            DelayKind::UniformRandom => self.rng.u64_at2(k, unit) % (self.bound + 1),
            DelayKind::GeometricCapped { p } => {
                if p >= 1.0 {
                    0
                } else {
                    let u = self.rng.f64_at2(k, unit);
                    ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
                }
            }
        };
        raw.min(self.bound).min(k.saturating_sub(1))
    }
}

/// Ring buffer holding the last `capacity` models, indexed by their iterate
/// number `k` (the stored value is `x^k`).
#[derive(Clone, Debug)]
pub struct ModelHistory {
    slots: Vec<Option<(u64, DenseVec)>>,
}

impl ModelHistory {
    pub fn new(capacity: usize) -> Self {
        ModelHistory {
            slots: vec![None; capacity.max(1)],
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn push(&mut self, k: u64, x: DenseVec) {
        let cap = self.slots.len() as u64;
        self.slots[(k % cap) as usize] = Some((k, x));
    }

    pub fn get(&self, k: u64) -> Result<&DenseVec> {
        let cap = self.slots.len() as u64;
        match &self.slots[(k % cap) as usize] {
            Some((stored, x)) if *stored == k => Ok(x),
            _ => Err(Error::DelayBound { k, tau: 0 }),
        }
    }
}

/// The delayed averaged gradient
/// `(1/N) sum_i grad F(x^{k - tau(k,i)}; xi_{k,i})`; also returns the
/// realized per-sample delays.
pub fn delayed_avg_gradient(
    history: &ModelHistory,
    delays: &DelaySchedule,
    k: u64,
    batch: &[usize],
    obj: &ObjectiveSpec,
    data: &Dataset,
) -> Result<(DenseVec, Vec<u64>)> {
    let d = data.dim();
    let mut acc = DenseVec::zeros(d);
    let mut taus = Vec::with_capacity(batch.len());
    for (pos, &idx) in batch.iter().enumerate() {
        let tau = delays.tau(k, pos as u64, batch.len());
        if tau >= k {
            return Err(Error::DelayBound { k, tau });
        }
        let x_old = history.get(k - tau)?;
        accumulate_stoch_grad(obj, x_old, data.sample(idx), &mut acc)?;
        taus.push(tau);
    }
    let n = batch.len() as f64;
    for v in acc.as_mut_slice() {
        *v /= n;
    }
    Ok((acc, taus))
}

/// Per-step trace handed to observers: the state before update `k` is
/// applied, the batch, the realized delays and the averaged gradient.
pub struct StepTrace<'a> {
    pub k: u64,
    pub batch: &'a [usize],
    pub taus: &'a [u64],
    pub x_k: &'a DenseVec,
    pub g_avg: &'a DenseVec,
    pub eta: f64,
}

pub fn run_sim(
    cfg: &RunConfig,
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    delays: &DelaySchedule,
    capture_iterates: bool,
) -> Result<RunOutput> {
    run_sim_with(cfg, data, obj, steps, delays, capture_iterates, |_| {})
}

/// Simulator main loop; `observe` sees every step before it is applied.
pub fn run_sim_with<F: FnMut(&StepTrace)>(
    cfg: &RunConfig,
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    delays: &DelaySchedule,
    capture_iterates: bool,
    mut observe: F,
) -> Result<RunOutput> {
    let mut x = initial_model(obj.kind, data.dim(), cfg.seed);
    if cfg.updates_k == 0 {
        return Ok(empty_output(x));
    }
    cfg.validate()?;
    if cfg.mode != Mode::Simulated {
        return Err(Error::InvalidInput(format!(
            "run_sim called with mode {}",
            cfg.mode
        )));
    }
    if delays.bound() > cfg.max_delay {
        return Err(Error::InvalidInput(format!(
            "delay schedule bound {} exceeds configured max delay {}",
            delays.bound(),
            cfg.max_delay
        )));
    }
    let sampler = BatchSampler::new(cfg.seed, data.n())?;
    let n = cfg.batch_n;
    let per_worker = cfg.per_worker() as f64;

    let mut history = ModelHistory::new(cfg.max_delay as usize + 1);
    history.push(1, x.clone());

    let mut records = Vec::new();
    let mut iterates = capture_iterates.then(Vec::new);
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let mut clock = 0.0f64;
    let mut run_max_tau = 0u64;
    let mut stride_max_tau = 0u64;
    let mut best = (f64::INFINITY, x.clone());

    for k in 1..=cfg.updates_k {
        let batch = sampler.draw(k - 1, n)?;
        let (g_avg, taus) = delayed_avg_gradient(&history, delays, k, &batch, obj, data)?;
        let eta = steps.eta_at(k);
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("schedule produced eta {eta} at k={k}")));
        }
        observe(&StepTrace {
            k,
            batch: &batch,
            taus: &taus,
            x_k: &x,
            g_avg: &g_avg,
            eta,
        });

        let mut tau_sum = 0u64;
        for &t in &taus {
            *hist.entry(t).or_insert(0) += 1;
            tau_sum += t;
            stride_max_tau = stride_max_tau.max(t);
            run_max_tau = run_max_tau.max(t);
        }
        debug_assert!(run_max_tau <= cfg.max_delay);
        clock += 1.0 + per_worker + tau_sum as f64 / n as f64;

        let mut v = x.clone();
        v.saxpy(-eta, &g_avg)?;
        x = prox(&obj.regularizer, &v, eta)?;
        history.push(k + 1, x.clone());
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }

        if k % cfg.metric_stride == 0 || k == cfg.updates_k {
            let rec = evaluate_record(
                obj,
                data,
                &x,
                k,
                k * n as u64,
                steps.eta_at(k + 1),
                stride_max_tau,
                clock,
            )?;
            if rec.objective < best.0 {
                best = (rec.objective, x.clone());
            }
            records.push(rec);
            stride_max_tau = 0;
        }
    }

    Ok(RunOutput {
        records,
        final_x: x,
        best_objective: best.0,
        best_x: best.1,
        max_staleness: run_max_tau,
        iterates,
        staleness_hist: Some(hist),
    })
}

pub(crate) fn empty_output(x: DenseVec) -> RunOutput {
    RunOutput {
        records: Vec::new(),
        best_objective: f64::INFINITY,
        best_x: x.clone(),
        final_x: x,
        max_staleness: 0,
        iterates: None,
        staleness_hist: Some(BTreeMap::new()),
    }
}

/// Total per-sample delay counts across a run; the sum equals `K * N`.
pub fn staleness_histogram(out: &RunOutput) -> &BTreeMap<u64, u64> {
    out.staleness_hist
        .as_ref()
        .expect("staleness histogram is recorded in simulated mode")
}
