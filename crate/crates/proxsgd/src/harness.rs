//! Baselines, reference solutions, suboptimality and speedup measurement.
//!
//! The deterministic ProxGD baseline doubles as the reference-solution
//! engine: the best endpoint over several restarted long runs is persisted,
//! keyed by a fingerprint of the dataset bytes, and every later comparison
//! checks that no run ever undercuts it (if one does the reference is
//! refreshed from the better point and the comparison rerun).
//!
//! Clock conventions: deterministic modes charge one unit per sample
//! gradient plus one unit of server work per update, with worker compute
//! spread over `m` parallel workers and the realized delays added as
//! latency, so `clock = sum_k (1 + N/m + mean tau_k)`. The baseline charges
//! `1 + n` per full-gradient update. Async runs report wall seconds. Time
//! speedups are therefore simulated-clock ratios everywhere except the real
//! engine, and the two are never mixed in one table.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::core::{DenseVec, Error, Mode, Result, RunConfig, RunOutput, RunRecord};
use crate::data::{BatchSampler, Dataset};
use crate::objectives::{
    accumulate_stoch_grad, estimate_sigma_sq, evaluate_record, full_grad, full_value,
    initial_model, ObjectiveSpec,
};
use crate::prox::{prox, RegularizerSpec};
use crate::schedule::StepSchedule;
use crate::sim::{run_sim, DelayKind, DelaySchedule};

/// Best-known solution for one dataset/objective pair.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub x_hat: DenseVec,
    pub value: f64,
    /// Restarts used to produce it; 0 when loaded from disk (not persisted).
    pub restarts: u32,
    /// ProxGD iterations per restart; 0 when loaded from disk.
    pub iters_per_restart: u64,
    pub fingerprint: u64,
}

/// Generic proximal gradient descent core. `on_step` sees `(k, x_{k+1},
/// psi(x_{k+1}))` after every update. With a known Lipschitz constant and
/// `eta <= 1/L` the composite objective must descend; ten consecutive
/// increases abort the run since they indicate a wrong gradient.
#[allow(clippy::too_many_arguments)]
pub fn proxgd_iterate<V, G, F>(
    value: V,
    grad: G,
    h: &RegularizerSpec,
    x1: DenseVec,
    steps: &StepSchedule,
    iters: u64,
    lipschitz: Option<f64>,
    mut on_step: F,
) -> Result<(DenseVec, f64)>
where
    V: Fn(&DenseVec) -> Result<f64>,
    G: Fn(&DenseVec) -> Result<DenseVec>,
    F: FnMut(u64, &DenseVec, f64) -> Result<()>,
{
    let mut x = x1;
    let mut prev = value(&x)?;
    let mut bad_steps = 0u32;
    for k in 1..=iters {
        let eta = steps.eta_at(k);
        let g = grad(&x)?;
        let mut v = x.clone();
        v.saxpy(-eta, &g)?;
        x = prox(h, &v, eta)?;
        let cur = value(&x)?;
        if let Some(l) = lipschitz {
            if eta <= 1.0 / l {
                if cur > prev {
                    bad_steps += 1;
                    if bad_steps >= 10 {
                        return Err(Error::Diverged(10));
                    }
                } else {
                    bad_steps = 0;
                }
            }
        }
        prev = cur;
        on_step(k, &x, cur)?;
    }
    Ok((x, prev))
}

/// Deterministic full-gradient ProxGD baseline over a dataset objective.
pub fn run_proxgd(
    cfg: &RunConfig,
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    capture_iterates: bool,
) -> Result<RunOutput> {
    let x1 = initial_model(obj.kind, data.dim(), cfg.seed);
    if cfg.updates_k == 0 {
        return Ok(crate::sim::empty_output(x1));
    }
    if cfg.mode != Mode::Sequential {
        return Err(Error::InvalidInput(format!(
            "run_proxgd called with mode {}",
            cfg.mode
        )));
    }
    let n = data.n() as u64;
    let mut records = Vec::new();
    let mut iterates = capture_iterates.then(Vec::new);
    let mut best = (f64::INFINITY, x1.clone());
    let (final_x, _) = proxgd_iterate(
        |x| full_value(obj, x, data),
        |x| full_grad(obj, x, data),
        &obj.regularizer,
        x1,
        steps,
        cfg.updates_k,
        Some(obj.lipschitz),
        |k, x, psi| {
            if let Some(it) = iterates.as_mut() {
                it.push(x.clone());
            }
            if k % cfg.metric_stride == 0 || k == cfg.updates_k {
                let g = full_grad(obj, x, data)?;
                let p = crate::prox::gradient_mapping(x, &g, steps.eta_at(k + 1), &obj.regularizer)?;
                let rec = RunRecord {
                    k,
                    samples_seen: k * n,
                    objective: psi,
                    grad_map_norm_sq: p.norm_sq(),
                    max_staleness: 0,
                    clock: k as f64 * (1.0 + n as f64),
                };
                if psi < best.0 {
                    best = (psi, x.clone());
                }
                records.push(rec);
            }
            Ok(())
        },
    )?;
    Ok(RunOutput {
        records,
        best_objective: best.0,
        best_x: best.1,
        max_staleness: 0,
        final_x,
        iterates,
        staleness_hist: None,
    })
}

/// Plain sequential mini-batch ProxSGD: draw N indices, average the sample
/// gradients at the current model, take one prox step. Written as its own
/// loop (no history ring, no channels) so it can serve as an independent
/// comparator for the simulator and the engine.
pub fn run_seq_proxsgd(
    cfg: &RunConfig,
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    capture_iterates: bool,
) -> Result<RunOutput> {
    let mut x = initial_model(obj.kind, data.dim(), cfg.seed);
    if cfg.updates_k == 0 {
        return Ok(crate::sim::empty_output(x));
    }
    cfg.validate()?;
    if cfg.mode != Mode::Sequential {
        return Err(Error::InvalidInput(format!(
            "run_seq_proxsgd called with mode {}",
            cfg.mode
        )));
    }
    let sampler = BatchSampler::new(cfg.seed, data.n())?;
    let n = cfg.batch_n;
    let mut records = Vec::new();
    let mut iterates = capture_iterates.then(Vec::new);
    let mut best = (f64::INFINITY, x.clone());
    let mut clock = 0.0;
    for k in 1..=cfg.updates_k {
        let batch = sampler.draw(k - 1, n)?;
        let mut g = DenseVec::zeros(data.dim());
        for &idx in &batch {
            accumulate_stoch_grad(obj, &x, data.sample(idx), &mut g)?;
        }
        for v in g.as_mut_slice() {
            *v /= n as f64;
        }
        let eta = steps.eta_at(k);
        let mut v = x.clone();
        v.saxpy(-eta, &g)?;
        x = prox(&obj.regularizer, &v, eta)?;
        clock += 1.0 + cfg.per_worker() as f64;
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
                0,
                clock,
            )?;
            if rec.objective < best.0 {
                best = (rec.objective, x.clone());
            }
            records.push(rec);
        }
    }
    Ok(RunOutput {
        records,
        best_objective: best.0,
        best_x: best.1,
        max_staleness: 0,
        final_x: x,
        iterates,
        staleness_hist: None,
    })
}

/// Best endpoint of `restarts` ProxGD runs at `eta = 1/L` from distinct
/// random feasible starts. Bitwise deterministic for a fixed seed.
pub fn compute_reference(
    data: &Dataset,
    obj: &ObjectiveSpec,
    iters: u64,
    restarts: u32,
    seed: u64,
    fingerprint: u64,
) -> Result<ReferenceSolution> {
    if restarts == 0 {
        return Err(Error::InvalidInput("reference needs restarts >= 1".into()));
    }
    let steps = StepSchedule::constant(1.0 / obj.lipschitz)?;
    let mut best: Option<(f64, DenseVec)> = None;
    for r in 0..restarts {
        let x1 = initial_model(obj.kind, data.dim(), seed.wrapping_add(r as u64));
        let (x, value) = proxgd_iterate(
            |x| full_value(obj, x, data),
            |x| full_grad(obj, x, data),
            &obj.regularizer,
            x1,
            &steps,
            iters,
            Some(obj.lipschitz),
            |_, _, _| Ok(()),
        )?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    let (value, x_hat) = best.expect("restarts >= 1");
    Ok(ReferenceSolution {
        x_hat,
        value,
        restarts,
        iters_per_restart: iters,
        fingerprint,
    })
}

/// Polish a reference that was undercut by an observed iterate: restart
/// ProxGD from the better point and keep the minimum.
pub fn refresh_reference(
    reference: &ReferenceSolution,
    better_x: &DenseVec,
    data: &Dataset,
    obj: &ObjectiveSpec,
    polish_iters: u64,
) -> Result<ReferenceSolution> {
    let steps = StepSchedule::constant(1.0 / obj.lipschitz)?;
    let (x, value) = proxgd_iterate(
        |x| full_value(obj, x, data),
        |x| full_grad(obj, x, data),
        &obj.regularizer,
        better_x.clone(),
        &steps,
        polish_iters,
        Some(obj.lipschitz),
        |_, _, _| Ok(()),
    )?;
    if value < reference.value {
        Ok(ReferenceSolution {
            x_hat: x,
            value,
            restarts: reference.restarts + 1,
            iters_per_restart: reference.iters_per_restart.max(polish_iters),
            fingerprint: reference.fingerprint,
        })
    } else {
        Ok(reference.clone())
    }
}

const REF_MAGIC: &[u8; 4] = b"PXRF";
const REF_VERSION: u32 = 1;

fn reference_file_name(fingerprint: u64) -> String {
    format!("pxrf-{fingerprint:016x}.bin")
}

/// Persist as `PXRF | version u32 | d u64 | model f64*d | value f64`, little
/// endian, in a file keyed by the dataset fingerprint.
pub fn save_reference(reference: &ReferenceSolution, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(reference_file_name(reference.fingerprint));
    let mut w = BufWriter::new(File::create(&path)?);
    w.write_all(REF_MAGIC)?;
    w.write_all(&REF_VERSION.to_le_bytes())?;
    w.write_all(&(reference.x_hat.len() as u64).to_le_bytes())?;
    for v in reference.x_hat.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&reference.value.to_le_bytes())?;
    w.flush()?;
    Ok(path)
}

/// Load the reference keyed by `fingerprint`; `Ok(None)` when absent.
pub fn load_reference(dir: &Path, fingerprint: u64) -> Result<Option<ReferenceSolution>> {
    let path = dir.join(reference_file_name(fingerprint));
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != REF_MAGIC {
        return Err(Error::Format("bad reference magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != REF_VERSION {
        return Err(Error::Format("unsupported reference version".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    let mut values = Vec::with_capacity(d);
    for _ in 0..d {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    r.read_exact(&mut b8)?;
    let value = f64::from_le_bytes(b8);
    Ok(Some(ReferenceSolution {
        x_hat: DenseVec::from_vec(values)
            .map_err(|_| Error::Format("reference model holds non-finite values".into()))?,
        value,
        restarts: 0,
        iters_per_restart: 0,
        fingerprint,
    }))
}

/// `(samples_seen / n, psi - psi_hat)` per record; with the engine's
/// `(1/n)`-scaled objective the y value is exactly the published plotting
/// unit (the unnormalized-sum gap divided by n). Errors when the reference
/// belongs to another dataset or has gone stale.
pub fn suboptimality_series(
    records: &[RunRecord],
    reference: &ReferenceSolution,
    n: usize,
    data_fingerprint: u64,
) -> Result<Vec<(f64, f64)>> {
    if reference.fingerprint != data_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: reference.fingerprint,
            got: data_fingerprint,
        });
    }
    let mut out = Vec::with_capacity(records.len());
    let mut prev_x = f64::NEG_INFINITY;
    for rec in records {
        let x = rec.samples_seen as f64 / n as f64;
        let y = rec.objective - reference.value;
        if y < -1e-12 {
            return Err(Error::StaleReference);
        }
        debug_assert!(x >= prev_x);
        prev_x = x;
        out.push((x, y));
    }
    Ok(out)
}

fn first_crossing<'a>(
    records: &'a [RunRecord],
    reference: &ReferenceSolution,
    target: f64,
) -> Option<&'a RunRecord> {
    records
        .iter()
        .find(|r| r.objective - reference.value <= target)
}

/// `p * T_1 / T_p` where `T` is the server-side sample count at the first
/// record at or below the target suboptimality (no interpolation).
pub fn iteration_speedup(
    records_1: &[RunRecord],
    records_p: &[RunRecord],
    p: usize,
    target: f64,
    reference: &ReferenceSolution,
) -> Result<f64> {
    let t1 = first_crossing(records_1, reference, target)
        .ok_or(Error::TargetNotReached(target))?
        .samples_seen;
    let tp = first_crossing(records_p, reference, target)
        .ok_or(Error::TargetNotReached(target))?
        .samples_seen;
    Ok(p as f64 * t1 as f64 / tp as f64)
}

#[derive(Clone, Debug)]
pub struct SpeedupRow {
    pub p: usize,
    pub iteration_speedup: f64,
    pub sim_time_speedup: f64,
}

#[derive(Clone, Debug)]
pub struct SpeedupTable {
    pub target: f64,
    pub rows: Vec<SpeedupRow>,
}

/// Run the simulated speedup sweep: one zero-delay single-worker anchor run,
/// then for each `p > 1` a run with `p` pseudo-worker groups under uniform
/// delays bounded by `p - 1`. All runs share the seed, batch size and
/// schedule; crossing times are compared at `target`.
pub fn speedup_sweep(
    data: &Dataset,
    obj: &ObjectiveSpec,
    steps: &StepSchedule,
    reference: &ReferenceSolution,
    base: &RunConfig,
    ps: &[usize],
    target: f64,
) -> Result<(SpeedupTable, Vec<RunOutput>)> {
    let mut outputs = Vec::with_capacity(ps.len());
    let mut rows = Vec::with_capacity(ps.len());
    let mut anchor: Option<usize> = None;
    for &p in ps {
        let mut cfg = base.clone();
        cfg.mode = Mode::Simulated;
        cfg.workers_m = p;
        cfg.max_delay = (p as u64).saturating_sub(1);
        let delays = if p == 1 {
            DelaySchedule::zero()
        } else {
            DelaySchedule::new(DelayKind::UniformRandom, p as u64 - 1, cfg.seed)?
                .with_worker_groups(p)
        };
        let out = run_sim(&cfg, data, obj, steps, &delays, false)?;
        if p == 1 {
            anchor = Some(outputs.len());
        }
        outputs.push(out);
    }
    let anchor = anchor.ok_or_else(|| {
        Error::InvalidInput("speedup sweep needs p = 1 as the anchor".into())
    })?;
    let rec1 = &outputs[anchor].records;
    let clock_at = |records: &[RunRecord]| -> Result<f64> {
        Ok(first_crossing(records, reference, target)
            .ok_or(Error::TargetNotReached(target))?
            .clock)
    };
    let c1 = clock_at(rec1)?;
    for (i, &p) in ps.iter().enumerate() {
        let iter_speedup = iteration_speedup(rec1, &outputs[i].records, p, target, reference)?;
        let cp = clock_at(&outputs[i].records)?;
        rows.push(SpeedupRow {
            p,
            iteration_speedup: iter_speedup,
            sim_time_speedup: c1 / cp,
        });
    }
    Ok((SpeedupTable { target, rows }, outputs))
}

fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV schema: `k,samples_seen,objective,grad_map_norm_sq,max_staleness,clock`;
/// floats carry 17 significant digits so parsing reproduces them exactly.
pub fn emit_records_csv<W: Write>(records: &[RunRecord], w: &mut W) -> Result<()> {
    writeln!(w, "k,samples_seen,objective,grad_map_norm_sq,max_staleness,clock")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.k,
            r.samples_seen,
            fmt_sig17(r.objective),
            fmt_sig17(r.grad_map_norm_sq),
            r.max_staleness,
            fmt_sig17(r.clock)
        )?;
    }
    Ok(())
}

pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    emit_records_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn parse_records_csv<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty csv".into()))??;
    if header != "k,samples_seen,objective,grad_map_norm_sq,max_staleness,clock" {
        return Err(Error::Format(format!("unexpected csv header '{header}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| Error::Parse {
            line: i + 2,
            msg: format!("bad {what}"),
        };
        out.push(RunRecord {
            k: fields[0].parse().map_err(|_| parse_err("k"))?,
            samples_seen: fields[1].parse().map_err(|_| parse_err("samples_seen"))?,
            objective: fields[2].parse().map_err(|_| parse_err("objective"))?,
            grad_map_norm_sq: fields[3]
                .parse()
                .map_err(|_| parse_err("grad_map_norm_sq"))?,
            max_staleness: fields[4].parse().map_err(|_| parse_err("max_staleness"))?,
            clock: fields[5].parse().map_err(|_| parse_err("clock"))?,
        });
    }
    Ok(out)
}

pub fn emit_speedup_csv<W: Write>(table: &SpeedupTable, w: &mut W) -> Result<()> {
    writeln!(w, "p,iteration_speedup,sim_time_speedup")?;
    for row in &table.rows {
        writeln!(
            w,
            "{},{},{}",
            row.p,
            fmt_sig17(row.iteration_speedup),
            fmt_sig17(row.sim_time_speedup)
        )?;
    }
    Ok(())
}

pub fn write_speedup_csv(table: &SpeedupTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    emit_speedup_csv(table, &mut w)?;
    w.flush()?;
    Ok(())
}

/// How the constant-step parameters were sourced, for run metadata.
#[derive(Clone, Debug)]
pub struct CorollaryMeta {
    pub psi_gap: f64,
    pub psi_gap_source: String,
    pub sigma_sq: f64,
    pub lipschitz: f64,
    pub eta: f64,
}

/// Resolve the constant-step schedule from run inputs: `psi_gap` comes from
/// the reference when one is supplied (else from a fresh short reference
/// computed here) and `sigma^2` is estimated at `x^1` from 10^4 sample
/// gradients.
pub fn resolve_corollary_schedule(
    data: &Dataset,
    obj: &ObjectiveSpec,
    cfg: &RunConfig,
    reference: Option<&ReferenceSolution>,
) -> Result<(StepSchedule, CorollaryMeta)> {
    let x1 = initial_model(obj.kind, data.dim(), cfg.seed);
    let psi1 = full_value(obj, &x1, data)?;
    let (ref_value, source) = match reference {
        Some(r) => (r.value, format!("reference file {:016x}", r.fingerprint)),
        None => {
            let quick = compute_reference(
                data,
                obj,
                500,
                3,
                cfg.seed ^ 0x5eed,
                data.content_fingerprint(),
            )?;
            (quick.value, "fresh 3-restart ProxGD estimate".into())
        }
    };
    let psi_gap = (psi1 - ref_value).max(1e-12);
    let sigma_sq = estimate_sigma_sq(obj, data, &x1, 10_000, cfg.seed ^ 0x51fca)?;
    let sched = StepSchedule::corollary(
        psi_gap,
        cfg.batch_n,
        cfg.updates_k,
        obj.lipschitz,
        sigma_sq.max(1e-12),
        cfg.max_delay,
    )?;
    let eta = sched.eta_at(1);
    Ok((
        sched,
        CorollaryMeta {
            psi_gap,
            psi_gap_source: source,
            sigma_sq,
            lipschitz: obj.lipschitz,
            eta,
        },
    ))
}
