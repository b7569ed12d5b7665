//! The asynchronous parameter-server core.
//!
//! One server thread owns the model. Workers pull consistent snapshots,
//! compute the sum of `N/m` sample gradients on whatever model they hold,
//! and push the sum back. The server folds every push as `G += G_j / N` and
//! on each m-th push applies one proximal step, no matter which workers the
//! pushes came from. Metric evaluation runs on its own thread over model
//! snapshots so measurement never serializes the update path.
//!
//! Staleness is observed and recorded here, never enforced; the bounded
//! delay assumption is a property of the deployment, and its controlled
//! counterpart lives in the simulator.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;
use std::time::Instant;

use crate::core::{DenseVec, Error, Mode, Result, RunConfig, RunOutput, RunRecord};
use crate::data::{BatchSampler, Dataset, Fnv1a};
use crate::objectives::{
    accumulate_stoch_grad, evaluate_record, initial_model, ObjectiveSpec,
};
use crate::prox::{prox, RegularizerSpec};
use crate::schedule::StepSchedule;

/// Gradient sum over one worker batch, tagged with the model version the
/// worker pulled (diagnostic; the server never needs it for correctness).
#[derive(Clone, Debug)]
pub struct PushMsg {
    pub worker: usize,
    pub grad_sum: DenseVec,
    pub model_version: u64,
}

/// Consistent model snapshot: the version counts completed updates and the
/// checksum covers the exact bits of `x` and the version.
#[derive(Clone, Debug)]
pub struct PullReply {
    pub x: DenseVec,
    pub version: u64,
    pub checksum: u64,
}

impl PullReply {
    pub fn verify(&self) -> Result<()> {
        if snapshot_checksum(&self.x, self.version) != self.checksum {
            return Err(Error::SnapshotCorrupt);
        }
        Ok(())
    }
}

fn snapshot_checksum(x: &DenseVec, version: u64) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(version);
    for v in x.as_slice() {
        h.write_u64(v.to_bits());
    }
    h.finish()
}

/// Emitted by the server when an m-th push completes an update.
#[derive(Clone, Debug)]
pub struct UpdateEvent {
    pub k: u64,
    pub x: DenseVec,
    pub eta_next: f64,
    pub max_staleness: u64,
}

/// Model, accumulator and counters of the server block of the protocol.
#[derive(Debug)]
pub struct ServerState {
    x: DenseVec,
    accum: DenseVec,
    s: usize,
    k: u64,
    schedule: StepSchedule,
    regularizer: RegularizerSpec,
    pending_max_staleness: u64,
    run_max_staleness: u64,
    consumed_pushes: u64,
}

impl ServerState {
    pub fn new(x0: DenseVec, schedule: StepSchedule, regularizer: RegularizerSpec) -> Self {
        let d = x0.len();
        ServerState {
            x: x0,
            accum: DenseVec::zeros(d),
            s: 0,
            k: 0,
            schedule,
            regularizer,
            pending_max_staleness: 0,
            run_max_staleness: 0,
            consumed_pushes: 0,
        }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn accum(&self) -> &DenseVec {
        &self.accum
    }

    pub fn consumed_pushes(&self) -> u64 {
        self.consumed_pushes
    }

    pub fn run_max_staleness(&self) -> u64 {
        self.run_max_staleness
    }

    /// Atomic snapshot of `(x, k)`; the state is untouched.
    pub fn handle_pull(&self) -> PullReply {
        PullReply {
            x: self.x.clone(),
            version: self.k,
            checksum: snapshot_checksum(&self.x, self.k),
        }
    }

    /// Fold one push: `s += 1`, `G += G_j / N`; on `s == m` apply
    /// `x <- prox(h, x - eta_k G, eta_k)` with `eta_k` taken at the server's
    /// update counter, then reset `s` and `G`.
    pub fn handle_push(&mut self, msg: PushMsg, batch_n: usize, m: usize) -> Result<Option<UpdateEvent>> {
        if msg.grad_sum.len() != self.x.len() {
            return Err(Error::DimMismatch {
                expected: self.x.len(),
                got: msg.grad_sum.len(),
            });
        }
        if !msg.grad_sum.is_finite() {
            return Err(Error::NonFinite("pushed gradient"));
        }
        let staleness = self.k.saturating_sub(msg.model_version);
        self.pending_max_staleness = self.pending_max_staleness.max(staleness);
        self.s += 1;
        self.consumed_pushes += 1;
        let n = batch_n as f64;
        for (a, b) in self
            .accum
            .as_mut_slice()
            .iter_mut()
            .zip(msg.grad_sum.as_slice())
        {
            *a += b / n;
        }
        if self.s < m {
            return Ok(None);
        }
        let eta = self.schedule.eta_at(self.k + 1);
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "schedule produced eta {eta} at k={}",
                self.k + 1
            )));
        }
        let mut v = self.x.clone();
        v.saxpy(-eta, &self.accum)?;
        self.x = prox(&self.regularizer, &v, eta)?;
        self.k += 1;
        self.s = 0;
        self.accum = DenseVec::zeros(self.x.len());
        let max_staleness = self.pending_max_staleness;
        self.run_max_staleness = self.run_max_staleness.max(max_staleness);
        self.pending_max_staleness = 0;
        Ok(Some(UpdateEvent {
            k: self.k,
            x: self.x.clone(),
            eta_next: self.schedule.eta_at(self.k + 1),
            max_staleness,
        }))
    }
}

pub enum ServerMsg {
    Pull {
        worker: usize,
        reply: Sender<PullResponse>,
    },
    Push(PushMsg),
    /// A worker hit an unrecoverable error and will not pull again.
    Abort {
        worker: usize,
        error: Error,
    },
}

pub enum PullResponse {
    Model(PullReply),
    Stop,
}

/// Everything a worker needs; the server is reachable only through the
/// message channel.
pub struct WorkerCtx {
    pub server: Sender<ServerMsg>,
    pub sampler: BatchSampler,
    pub per_worker: usize,
    pub workers_m: usize,
}

/// Worker block of the protocol: pull once to initialize, then repeatedly
/// draw `N/m` sample indices (each draw globally unique across workers),
/// push the gradient sum computed on the held model, and pull the next one.
/// Returns the number of pushes sent once the server signals stop.
pub fn worker_loop(
    worker: usize,
    ctx: &WorkerCtx,
    data: &Dataset,
    obj: &ObjectiveSpec,
) -> Result<u64> {
    let pull = |reply_tx: &Sender<PullResponse>, reply_rx: &Receiver<PullResponse>| -> Result<Option<PullReply>> {
        ctx.server
            .send(ServerMsg::Pull {
                worker,
                reply: reply_tx.clone(),
            })
            .map_err(|_| Error::ServerDisconnected(worker))?;
        match reply_rx.recv() {
            Ok(PullResponse::Model(reply)) => {
                reply.verify()?;
                Ok(Some(reply))
            }
            Ok(PullResponse::Stop) => Ok(None),
            Err(_) => Err(Error::ServerDisconnected(worker)),
        }
    };

    let (reply_tx, reply_rx) = channel();
    let mut pushes = 0u64;
    let mut current = match pull(&reply_tx, &reply_rx)? {
        Some(r) => r,
        None => return Ok(0),
    };
    for t in 0.. {
        let draw_index = t * ctx.workers_m as u64 + worker as u64;
        let batch = ctx.sampler.draw(draw_index, ctx.per_worker)?;
        let mut grad_sum = DenseVec::zeros(current.x.len());
        for &idx in &batch {
            accumulate_stoch_grad(obj, &current.x, data.sample(idx), &mut grad_sum)?;
        }
        ctx.server
            .send(ServerMsg::Push(PushMsg {
                worker,
                grad_sum,
                model_version: current.version,
            }))
            .map_err(|_| Error::ServerDisconnected(worker))?;
        pushes += 1;
        current = match pull(&reply_tx, &reply_rx)? {
            Some(r) => r,
            None => break,
        };
    }
    Ok(pushes)
}

/// Knobs outside the run contract: iterate capture for equivalence tests and
/// an optional periodic checkpoint written by the metrics thread.
#[derive(Clone, Debug, Default)]
pub struct EngineOptions {
    pub capture_iterates: bool,
    pub checkpoint: Option<CheckpointSpec>,
}

#[derive(Clone, Debug)]
pub struct CheckpointSpec {
    pub path: PathBuf,
    pub stride: u64,
}

struct MetricJob {
    k: u64,
    x: DenseVec,
    eta_next: f64,
    max_staleness: u64,
    clock: f64,
    samples_seen: u64,
}

/// Run Algorithm 1 with `m` worker threads until `K` updates complete.
pub fn run_async(
    cfg: &RunConfig,
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    opts: &EngineOptions,
) -> Result<RunOutput> {
    let x1 = initial_model(obj.kind, data.dim(), cfg.seed);
    if cfg.updates_k == 0 {
        return Ok(crate::sim::empty_output(x1));
    }
    cfg.validate()?;
    if cfg.mode != Mode::Async {
        return Err(Error::InvalidInput(format!(
            "run_async called with mode {}",
            cfg.mode
        )));
    }
    let sampler = BatchSampler::new(cfg.seed, data.n())?;
    let m = cfg.workers_m;
    let start = Instant::now();

    let (srv_tx, srv_rx) = channel::<ServerMsg>();
    let (met_tx, met_rx) = channel::<MetricJob>();

    let mut state = ServerState::new(x1, steps.clone(), obj.regularizer.clone());
    let batch_n = cfg.batch_n;
    let updates_k = cfg.updates_k;
    let stride = cfg.metric_stride;
    let capture = opts.capture_iterates;
    let checkpoint = opts.checkpoint.clone();

    thread::scope(|scope| -> Result<RunOutput> {
        let metrics = scope.spawn(move || -> Result<(Vec<RunRecord>, f64, Option<DenseVec>)> {
            let mut records = Vec::new();
            let mut best_objective = f64::INFINITY;
            let mut best_x = None;
            for job in met_rx {
                let rec = evaluate_record(
                    obj,
                    data,
                    &job.x,
                    job.k,
                    job.samples_seen,
                    job.eta_next,
                    job.max_staleness,
                    job.clock,
                )?;
                if rec.objective < best_objective {
                    best_objective = rec.objective;
                    best_x = Some(job.x.clone());
                }
                records.push(rec);
                if let Some(cp) = &checkpoint {
                    if job.k % cp.stride == 0 {
                        save_checkpoint(&cp.path, &job.x)?;
                    }
                }
            }
            Ok((records, best_objective, best_x))
        });

        let server = scope.spawn(move || -> Result<(ServerState, Option<Vec<DenseVec>>)> {
            let met_tx = met_tx;
            let mut iterates = capture.then(Vec::new);
            let mut stride_max_staleness = 0u64;
            let mut stopped = 0usize;
            let mut abort: Option<Error> = None;
            while stopped < m {
                let msg = match srv_rx.recv() {
                    Ok(msg) => msg,
                    Err(_) => break, // all workers gone
                };
                match msg {
                    ServerMsg::Pull { worker: _, reply } => {
                        if state.k >= updates_k || abort.is_some() {
                            // worker exits after a stop reply
                            let _ = reply.send(PullResponse::Stop);
                            stopped += 1;
                        } else {
                            let _ = reply.send(PullResponse::Model(state.handle_pull()));
                        }
                    }
                    ServerMsg::Push(push) => {
                        if state.k >= updates_k || abort.is_some() {
                            continue; // run is over; surplus pushes are dropped
                        }
                        match state.handle_push(push, batch_n, m) {
                            Ok(None) => {}
                            Ok(Some(event)) => {
                                stride_max_staleness =
                                    stride_max_staleness.max(event.max_staleness);
                                if let Some(it) = iterates.as_mut() {
                                    it.push(event.x.clone());
                                }
                                if event.k % stride == 0 || event.k == updates_k {
                                    let job = MetricJob {
                                        k: event.k,
                                        x: event.x,
                                        eta_next: event.eta_next,
                                        max_staleness: stride_max_staleness,
                                        clock: start.elapsed().as_secs_f64(),
                                        samples_seen: event.k * batch_n as u64,
                                    };
                                    stride_max_staleness = 0;
                                    if met_tx.send(job).is_err() {
                                        abort = Some(Error::InvalidInput(
                                            "metrics thread terminated early".into(),
                                        ));
                                    }
                                }
                            }
                            Err(e) => abort = Some(e),
                        }
                    }
                    ServerMsg::Abort { worker: _, error } => {
                        stopped += 1;
                        if abort.is_none() {
                            abort = Some(error);
                        }
                    }
                }
            }
            match abort {
                Some(e) => Err(e),
                None => Ok((state, iterates)),
            }
        });

        let mut worker_handles = Vec::with_capacity(m);
        for j in 0..m {
            let ctx = WorkerCtx {
                server: srv_tx.clone(),
                sampler,
                per_worker: cfg.per_worker(),
                workers_m: m,
            };
            worker_handles.push(scope.spawn(move || -> Result<u64> {
                match worker_loop(j, &ctx, data, obj) {
                    Ok(pushes) => Ok(pushes),
                    Err(e) => {
                        // tell the server this worker will never pull again
                        let msg = format!("{e}");
                        let _ = ctx.server.send(ServerMsg::Abort {
                            worker: j,
                            error: e,
                        });
                        Err(Error::InvalidInput(format!("worker {j} aborted: {msg}")))
                    }
                }
            }));
        }
        drop(srv_tx);

        let mut worker_err = None;
        for h in worker_handles {
            match h.join() {
                Ok(Ok(_)) => {}
                Ok(Err(e)) => worker_err = worker_err.or(Some(e)),
                Err(_) => worker_err = worker_err.or(Some(Error::InvalidInput(
                    "worker thread panicked".into(),
                ))),
            }
        }
        let server_res = server
            .join()
            .map_err(|_| Error::InvalidInput("server thread panicked".into()))?;
        let metrics_res = metrics
            .join()
            .map_err(|_| Error::InvalidInput("metrics thread panicked".into()))?;
        // a metric failure (e.g. an infeasible logged iterate) is the root
        // cause when the server only saw the channel close under it
        let (records, best_objective, best_x) = metrics_res?;
        let (state, iterates) = server_res?;
        if let Some(e) = worker_err {
            return Err(e);
        }
        let best_x = best_x.unwrap_or_else(|| state.x.clone());
        Ok(RunOutput {
            records,
            best_objective,
            best_x,
            max_staleness: state.run_max_staleness,
            final_x: state.x,
            iterates,
            staleness_hist: None,
        })
    })
}

/// Flat little-endian checkpoint: `d` as u64 then `d` f64 model entries.
pub fn save_checkpoint(path: &Path, x: &DenseVec) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<DenseVec> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    let mut values = Vec::with_capacity(d);
    for _ in 0..d {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    DenseVec::from_vec(values).map_err(|_| Error::Format("checkpoint holds non-finite values".into()))
}
