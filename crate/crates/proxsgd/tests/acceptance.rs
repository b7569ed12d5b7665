//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them all):
//!
//! ```text
//! cargo test --release -p proxsgd --test acceptance -- --nocapture --test-threads=1
//! ```
//!
//! The benchmark criteria run against the real `a9a`/`mnist.scale` LIBSVM
//! files when they are present under `$PROXSGD_DATA_DIR` (or `./data`, also
//! resolved against the workspace root). Without them, the statistical and
//! convergence criteria run on deterministic synthetic stand-ins with the
//! published shapes, and the dataset-fidelity criterion reports SKIP rather
//! than claiming a pass it cannot verify.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use proxsgd::core::{DenseVec, Mode, RunConfig, RunOutput};
use proxsgd::data::{synthetic, Dataset, SyntheticProfile};
use proxsgd::engine::{run_async, EngineOptions};
use proxsgd::harness::{
    compute_reference, run_seq_proxsgd, speedup_sweep, suboptimality_series, ReferenceSolution,
};
use proxsgd::objectives::{
    full_grad, full_value, initial_model, sample_value, stoch_grad, ObjectiveKind, ObjectiveSpec,
};
use proxsgd::prox::FEAS_TOL;
use proxsgd::rng::{stream, CounterRng, SeqRng};
use proxsgd::schedule::{
    check_theorem_conditions, corollary_k_bound, materialize, StepSchedule,
};
use proxsgd::selftest::run_lemma_suites;
use proxsgd::sim::{run_sim, staleness_histogram, DelayKind, DelaySchedule};

// ---------------------------------------------------------------------------
// fixtures

fn data_dirs() -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(d) = std::env::var_os("PROXSGD_DATA_DIR") {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(PathBuf::from("data"));
    dirs.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    dirs
}

fn find_real(names: &[&str]) -> Option<PathBuf> {
    for dir in data_dirs() {
        for name in names {
            let p = dir.join(name);
            if p.is_file() {
                return Some(p);
            }
        }
    }
    None
}

struct Benchmark {
    data: Dataset,
    obj: ObjectiveSpec,
    reference: ReferenceSolution,
    fingerprint: u64,
    label: &'static str,
}

static A9A: OnceLock<Benchmark> = OnceLock::new();

/// Real a9a when available, otherwise the deterministic stand-in with the
/// published shape (n = 32,561, d = 123).
fn a9a() -> &'static Benchmark {
    A9A.get_or_init(|| {
        let (data, label) = match find_real(&["a9a"]) {
            Some(path) => (
                Dataset::load(&path, None).expect("a9a parses"),
                "real a9a",
            ),
            None => (
                synthetic(SyntheticProfile::A9aLike, 271_828),
                "synthetic a9a-shaped stand-in",
            ),
        };
        let data = data.normalize().expect("normalizable");
        let obj = ObjectiveSpec::resolve(ObjectiveKind::NnPca, 0.0, &data).expect("resolves");
        let fingerprint = data.content_fingerprint();
        let reference =
            compute_reference(&data, &obj, 1500, 5, 999, fingerprint).expect("reference");
        Benchmark {
            data,
            obj,
            reference,
            fingerprint,
            label,
        }
    })
}

static PLANTED: OnceLock<Benchmark> = OnceLock::new();

fn planted() -> &'static Benchmark {
    PLANTED.get_or_init(|| {
        let data = synthetic(SyntheticProfile::Planted { n: 500, d: 50 }, 31_415)
            .normalize()
            .expect("normalizable");
        let obj = ObjectiveSpec::resolve(ObjectiveKind::NnPca, 0.0, &data).expect("resolves");
        let fingerprint = data.content_fingerprint();
        let reference =
            compute_reference(&data, &obj, 600, 3, 999, fingerprint).expect("reference");
        Benchmark {
            data,
            obj,
            reference,
            fingerprint,
            label: "synthetic planted nn-pca (d=50, n=500)",
        }
    })
}

fn assert_feasible_iterates(label: &str, iterates: &[DenseVec]) {
    for (i, x) in iterates.iter().enumerate() {
        assert!(
            x.min_coord() >= 0.0,
            "{label}: iterate {i} has negative coordinate {}",
            x.min_coord()
        );
        assert!(
            x.norm() <= 1.0 + FEAS_TOL,
            "{label}: iterate {i} leaves the ball, norm {}",
            x.norm()
        );
    }
}

fn assert_staleness_bounded(label: &str, out: &RunOutput, bound: u64) {
    assert!(
        out.max_staleness <= bound,
        "{label}: observed staleness {} above bound {bound}",
        out.max_staleness
    );
    for rec in &out.records {
        assert!(rec.max_staleness <= bound, "{label}: record above bound");
    }
    if let Some(hist) = &out.staleness_hist {
        assert!(hist.keys().all(|&t| t <= bound), "{label}: histogram above bound");
    }
}

// ---------------------------------------------------------------------------
// criteria

/// Criterion 1: the four lemma property suites, 10^4 trials each over
/// d <= 20, all regularizer kinds, eta in [1e-3, 1]; zero violations beyond
/// the stated slacks; under 30 s.
#[test]
fn criterion_01_lemma_property_suites() {
    let t0 = Instant::now();
    let reports = run_lemma_suites(10_000, 42).expect("suites run");
    for r in &reports {
        assert!(r.passed(), "lemma suite failed: {r}");
        assert_eq!(r.trials, 10_000);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "lemma suites took {elapsed:.1}s (limit 30s)");
    println!(
        "[criterion 1] PASS ({elapsed:.1}s) - lemmas 1-4, 4 x 10^4 trials, zero violations"
    );
}

/// Criterion 2: zero-delay simulated, single-worker async and sequential
/// sampling ProxSGD walk identical iterate sequences (<= 1e-12 per
/// coordinate over 500 updates); under 1 min.
#[test]
fn criterion_02_t0_oracle_equivalence() {
    let t0 = Instant::now();
    let data = synthetic(
        SyntheticProfile::SparseBinary {
            n: 200,
            d: 30,
            per_row: 6,
        },
        5,
    )
    .normalize()
    .unwrap();
    let obj = ObjectiveSpec::resolve(ObjectiveKind::NnPca, 0.0, &data).unwrap();
    let steps = StepSchedule::t_inverse(0.5, 1.0, 100.0).unwrap();

    let mut cfg = RunConfig::new(64, 1, 500, 42, Mode::Simulated);
    cfg.metric_stride = 100;
    let sim_out = run_sim(&cfg, &data, &obj, &steps, &DelaySchedule::zero(), true).unwrap();

    let mut seq_cfg = cfg.clone();
    seq_cfg.mode = Mode::Sequential;
    let seq_out = run_seq_proxsgd(&seq_cfg, &data, &obj, &steps, true).unwrap();

    let mut asy_cfg = cfg.clone();
    asy_cfg.mode = Mode::Async;
    let asy_out = run_async(
        &asy_cfg,
        &data,
        &obj,
        &steps,
        &EngineOptions {
            capture_iterates: true,
            checkpoint: None,
        },
    )
    .unwrap();

    let a = sim_out.iterates.as_ref().unwrap();
    let b = seq_out.iterates.as_ref().unwrap();
    let c = asy_out.iterates.as_ref().unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (500, 500, 500));
    let mut worst = 0.0f64;
    for i in 0..500 {
        worst = worst.max(a[i].max_abs_diff(&b[i]));
        worst = worst.max(a[i].max_abs_diff(&c[i]));
    }
    assert!(worst <= 1e-12, "iterate sequences diverged by {worst:e}");

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "equivalence took {elapsed:.1}s (limit 60s)");
    println!(
        "[criterion 2] PASS ({elapsed:.1}s) - sim/seq/async iterates agree to {worst:.1e} over 500 updates"
    );
}

/// Criterion 3: stochastic and full gradients match central finite
/// differences (step 1e-5) within 1e-6 relative error on 100 random points
/// per objective; under 10 s.
#[test]
fn criterion_03_gradient_correctness() {
    let t0 = Instant::now();
    let data = synthetic(
        SyntheticProfile::SparseBinary {
            n: 40,
            d: 10,
            per_row: 4,
        },
        17,
    )
    .normalize()
    .unwrap();
    let fd_step = 1e-5;
    let mut rng = SeqRng::new(23, stream::TEST);
    for kind in [ObjectiveKind::NnPca, ObjectiveKind::LogisticL1] {
        let obj = ObjectiveSpec::resolve(kind, 0.0, &data).unwrap();
        let mut worst = 0.0f64;
        for trial in 0..100 {
            let x = DenseVec::from_vec((0..10).map(|_| rng.range(-0.8, 0.8)).collect()).unwrap();

            // full gradient against central differences of the mean loss
            let g = full_grad(&obj, &x, &data).unwrap();
            let mut fd = vec![0.0; 10];
            for j in 0..10 {
                let mut xp = x.clone();
                xp.as_mut_slice()[j] += fd_step;
                let mut xm = x.clone();
                xm.as_mut_slice()[j] -= fd_step;
                let mean = |p: &DenseVec| {
                    data.samples()
                        .iter()
                        .map(|s| sample_value(&obj, p, s).unwrap())
                        .sum::<f64>()
                        / data.n() as f64
                };
                fd[j] = (mean(&xp) - mean(&xm)) / (2.0 * fd_step);
            }
            let fd = DenseVec::from_vec(fd).unwrap();
            // the floor keeps the ratio well-posed where a sampled gradient
            // nearly vanishes; finite differences carry ~1e-11 absolute noise
            let rel = g.sub(&fd).unwrap().norm() / fd.norm().max(1e-3);
            worst = worst.max(rel);

            // one stochastic gradient per point against its own differences
            let s = data.sample(trial % data.n());
            let gs = stoch_grad(&obj, &x, s).unwrap();
            let mut fds = vec![0.0; 10];
            for j in 0..10 {
                let mut xp = x.clone();
                xp.as_mut_slice()[j] += fd_step;
                let mut xm = x.clone();
                xm.as_mut_slice()[j] -= fd_step;
                fds[j] = (sample_value(&obj, &xp, s).unwrap()
                    - sample_value(&obj, &xm, s).unwrap())
                    / (2.0 * fd_step);
            }
            let fds = DenseVec::from_vec(fds).unwrap();
            let rel_s = gs.sub(&fds).unwrap().norm() / fds.norm().max(1e-3);
            worst = worst.max(rel_s);
            assert!(
                rel <= 1e-6 && rel_s <= 1e-6,
                "{kind}: finite-difference mismatch, rel {rel:.2e} / {rel_s:.2e}"
            );
        }
        println!("  {kind}: worst relative error {worst:.2e}");
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "gradient check took {elapsed:.1}s (limit 10s)");
    println!("[criterion 3] PASS ({elapsed:.1}s) - 100 points x 2 objectives vs central differences");
}

/// Criterion 4: every NN-PCA iterate in every mode stays in the nonnegative
/// unit ball (min coordinate >= 0, norm <= 1 + 1e-12), and the final async
/// run on the benchmark reaches 1e-3 normalized suboptimality.
#[test]
fn criterion_04_feasibility_every_iterate() {
    let t0 = Instant::now();
    let data = synthetic(SyntheticProfile::Planted { n: 120, d: 12 }, 77)
        .normalize()
        .unwrap();
    let obj = ObjectiveSpec::resolve(ObjectiveKind::NnPca, 0.0, &data).unwrap();
    let steps = StepSchedule::t_inverse(1.0, 1.0, 100.0).unwrap();

    let mut cfg = RunConfig::new(16, 4, 200, 11, Mode::Simulated);
    cfg.max_delay = 3;
    cfg.metric_stride = 20;
    let delays = DelaySchedule::new(DelayKind::UniformRandom, 3, 11)
        .unwrap()
        .with_worker_groups(4);
    let sim_out = run_sim(&cfg, &data, &obj, &steps, &delays, true).unwrap();
    assert_feasible_iterates("simulated", sim_out.iterates.as_ref().unwrap());

    let mut seq_cfg = cfg.clone();
    seq_cfg.mode = Mode::Sequential;
    seq_cfg.workers_m = 1;
    let seq_out = run_seq_proxsgd(&seq_cfg, &data, &obj, &steps, true).unwrap();
    assert_feasible_iterates("sequential", seq_out.iterates.as_ref().unwrap());

    let mut asy_cfg = cfg.clone();
    asy_cfg.mode = Mode::Async;
    let asy_out = run_async(
        &asy_cfg,
        &data,
        &obj,
        &steps,
        &EngineOptions {
            capture_iterates: true,
            checkpoint: None,
        },
    )
    .unwrap();
    assert_feasible_iterates("async", asy_out.iterates.as_ref().unwrap());

    // the benchmark itself through the real engine: 8 workers, published
    // batch size, suboptimality through the 1e-3 level; every logged record
    // carries a finite objective, which the evaluator only produces for
    // feasible iterates
    let bench = a9a();
    let mut big = RunConfig::new(8192, 8, 40, 4242, Mode::Async);
    big.metric_stride = 1;
    let big_steps = StepSchedule::t_inverse(2.0, 1.0, 120.0).unwrap();
    let big_out = run_async(
        &big,
        &bench.data,
        &bench.obj,
        &big_steps,
        &EngineOptions {
            capture_iterates: true,
            checkpoint: None,
        },
    )
    .unwrap();
    assert_feasible_iterates("async benchmark", big_out.iterates.as_ref().unwrap());
    assert!(big_out.records.iter().all(|r| r.objective.is_finite()));
    let final_gap = big_out.records.last().unwrap().objective - bench.reference.value;
    assert!(
        final_gap <= 1e-3,
        "async run on {} stalled at gap {final_gap:.2e}",
        bench.label
    );

    let elapsed = t0.elapsed().as_secs_f64();
    println!(
        "[criterion 4] PASS ({elapsed:.1}s) - all iterates feasible in all modes; async {} reached {final_gap:.1e}",
        bench.label
    );
}

/// Criterion 5: dataset fidelity against the published table: a9a loads as
/// n = 32,561, d = 123 and mnist as n = 60,000, d = 780, and normalization
/// leaves every row within 1e-12 of unit norm. Verifiable only with the real
/// files; reported as SKIP otherwise (the loader machinery is still
/// exercised on shape-identical synthetic files).
#[test]
fn criterion_05_dataset_fidelity() {
    let t0 = Instant::now();
    let real_a9a = find_real(&["a9a"]);
    let real_mnist = find_real(&["mnist.scale", "mnist"]);

    let check = |data: &Dataset, n: usize, d: usize, label: &str| {
        assert_eq!(data.n(), n, "{label}: wrong sample count");
        assert_eq!(data.dim(), d, "{label}: wrong dimension");
        let normalized = data.clone().normalize().unwrap();
        for (i, s) in normalized.samples().iter().enumerate() {
            let norm = s.features.norm();
            assert!(
                (norm - 1.0).abs() <= 1e-12,
                "{label}: sample {i} norm {norm} after normalization"
            );
        }
    };

    match (&real_a9a, &real_mnist) {
        (Some(pa), Some(pm)) => {
            check(&Dataset::load(pa, None).unwrap(), 32_561, 123, "a9a");
            check(&Dataset::load(pm, None).unwrap(), 60_000, 780, "mnist");
            let elapsed = t0.elapsed().as_secs_f64();
            println!("[criterion 5] PASS ({elapsed:.1}s) - real a9a and mnist match the published table");
        }
        _ => {
            // exercise the exact same loading path on synthetic files with
            // the published shapes, including the file-name dimension pin
            let dir = tempfile::tempdir().unwrap();
            let a_path = dir.path().join("a9a");
            proxsgd::data::write_libsvm_file(&synthetic(SyntheticProfile::A9aLike, 7), &a_path)
                .unwrap();
            check(&Dataset::load(&a_path, None).unwrap(), 32_561, 123, "a9a stand-in");
            let m_path = dir.path().join("mnist.scale");
            proxsgd::data::write_libsvm_file(
                &synthetic(SyntheticProfile::MnistLike, 7),
                &m_path,
            )
            .unwrap();
            check(
                &Dataset::load(&m_path, None).unwrap(),
                60_000,
                780,
                "mnist stand-in",
            );
            let elapsed = t0.elapsed().as_secs_f64();
            println!(
                "[criterion 5] SKIP ({elapsed:.1}s) - real a9a/mnist not present (set PROXSGD_DATA_DIR); \
                 loader verified on shape-identical synthetic files only"
            );
        }
    }
}

/// Criterion 6: NN-PCA at batch 8192 with the t-inverse schedule in
/// simulated mode under uniform random delays bounded by 8 reaches 1e-3
/// normalized suboptimality within 30 epochs for at least 9 of 10 seeds;
/// under 5 min.
#[test]
fn criterion_06_convergence_reproduction() {
    let t0 = Instant::now();
    let bench = a9a();
    let n = bench.data.n();
    let steps = StepSchedule::t_inverse(2.0, 1.0, 120.0).unwrap();
    let mut reached = 0;
    let mut epochs = Vec::new();
    for seed in 0..10u64 {
        let mut cfg = RunConfig::new(8192, 1, 130, 1000 + seed, Mode::Simulated);
        cfg.max_delay = 8;
        cfg.metric_stride = 1;
        let delays = DelaySchedule::new(DelayKind::UniformRandom, 8, cfg.seed).unwrap();
        let out = run_sim(&cfg, &bench.data, &bench.obj, &steps, &delays, false).unwrap();
        assert_staleness_bounded("criterion 6", &out, 8);
        let series =
            suboptimality_series(&out.records, &bench.reference, n, bench.fingerprint).unwrap();
        if let Some((x, _)) = series.iter().find(|(x, y)| *y <= 1e-3 && *x <= 30.0) {
            reached += 1;
            epochs.push(*x);
        }
    }
    assert!(
        reached >= 9,
        "only {reached}/10 seeds reached 1e-3 within 30 epochs"
    );
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "convergence runs took {elapsed:.1}s (limit 300s)");
    let mean_epoch = epochs.iter().sum::<f64>() / epochs.len().max(1) as f64;
    println!(
        "[criterion 6] PASS ({elapsed:.1}s) - {reached}/10 seeds on {} hit 1e-3, mean crossing {mean_epoch:.1} epochs",
        bench.label
    );
}

/// Criterion 7: per-pseudo-worker delays at p in {2, 4, 8}: iteration
/// speedup within [0.6 p, 1.1 p] at the 1e-3 level (exact table matching is
/// not required); under 15 min.
#[test]
fn criterion_07_iteration_speedup_bands() {
    let t0 = Instant::now();
    let bench = a9a();
    let steps = StepSchedule::t_inverse(2.0, 1.0, 120.0).unwrap();
    let mut cfg = RunConfig::new(8192, 1, 130, 42, Mode::Simulated);
    cfg.metric_stride = 1;
    let (table, outputs) = speedup_sweep(
        &bench.data,
        &bench.obj,
        &steps,
        &bench.reference,
        &cfg,
        &[1, 2, 4, 8],
        1e-3,
    )
    .unwrap();
    for (out, row) in outputs.iter().zip(&table.rows) {
        assert_staleness_bounded("criterion 7", out, (row.p as u64).saturating_sub(1));
    }
    assert_eq!(table.rows[0].iteration_speedup, 1.0);
    let mut summary = String::new();
    for row in table.rows.iter().filter(|r| r.p > 1) {
        let (lo, hi) = (0.6 * row.p as f64, 1.1 * row.p as f64);
        assert!(
            row.iteration_speedup >= lo && row.iteration_speedup <= hi,
            "p={}: speedup {:.3} outside [{lo:.1}, {hi:.1}]",
            row.p,
            row.iteration_speedup
        );
        summary.push_str(&format!("p{}={:.2} ", row.p, row.iteration_speedup));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "speedup sweep took {elapsed:.1}s (limit 900s)");
    println!(
        "[criterion 7] PASS ({elapsed:.1}s) - {} on {} within [0.6p, 1.1p]",
        summary.trim(),
        bench.label
    );
}

/// Criterion 8: on the planted synthetic instance with a theorem-compliant
/// constant step, the running minimum of the squared gradient-mapping norm
/// over 10^4 updates (10 seeds) falls on a log-log slope in [-0.8, -0.3];
/// under 2 min.
#[test]
fn criterion_08_ergodic_rate_trend() {
    let t0 = Instant::now();
    let bench = planted();
    let k_total = 10_000u64;
    let batch_n = 8usize;

    // constant step from the delay-aware bound with estimated quantities
    let x1 = initial_model(bench.obj.kind, bench.data.dim(), 7777);
    let psi1 = full_value(&bench.obj, &x1, &bench.data).unwrap();
    let gap = (psi1 - bench.reference.value).max(1e-12);
    let sigma_sq =
        proxsgd::objectives::estimate_sigma_sq(&bench.obj, &bench.data, &x1, 10_000, 5).unwrap();
    let steps =
        StepSchedule::corollary(gap, batch_n, k_total, bench.obj.lipschitz, sigma_sq, 0).unwrap();
    let etas = materialize(&steps, k_total);
    assert!(check_theorem_conditions(&etas, bench.obj.lipschitz, 0).all_ok());

    let seeds = 10u64;
    let mut grid: Vec<u64> = Vec::new();
    let mut sum_log: Vec<f64> = Vec::new();
    for seed in 0..seeds {
        let mut cfg = RunConfig::new(batch_n, 1, k_total, 9000 + seed, Mode::Simulated);
        cfg.metric_stride = 1;
        let out = run_sim(
            &cfg,
            &bench.data,
            &bench.obj,
            &steps,
            &DelaySchedule::zero(),
            false,
        )
        .unwrap();
        let mut runmin = f64::INFINITY;
        for (i, rec) in out.records.iter().enumerate() {
            runmin = runmin.min(rec.grad_map_norm_sq);
            if grid.len() <= i {
                grid.push(rec.k);
                sum_log.push(0.0);
            }
            sum_log[i] += runmin.ln();
        }
    }
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sum_log)
        .map(|(&k, &s)| ((k as f64).ln(), s / seeds as f64))
        .collect();
    let n_pts = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n_pts;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n_pts;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    assert!(
        (-0.8..=-0.3).contains(&slope),
        "running-min log-log slope {slope:.3} outside [-0.8, -0.3]"
    );
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "rate trend took {elapsed:.1}s (limit 120s)");
    println!(
        "[criterion 8] PASS ({elapsed:.1}s) - slope {slope:.3} over K=10^4, eta={:.3e}",
        steps.eta_at(1)
    );
}

/// Criterion 9: in simulated mode the realized staleness never exceeds the
/// bound, exactly, for every schedule kind; histogram mass totals K*N.
#[test]
fn criterion_09_staleness_bound() {
    let t0 = Instant::now();
    let data = synthetic(SyntheticProfile::Planted { n: 80, d: 8 }, 3)
        .normalize()
        .unwrap();
    let obj = ObjectiveSpec::resolve(ObjectiveKind::NnPca, 0.0, &data).unwrap();
    let steps = StepSchedule::constant(0.05).unwrap();
    for (kind, bound) in [
        (DelayKind::Zero, 0u64),
        (DelayKind::ConstantTau(5), 5),
        (DelayKind::UniformRandom, 7),
        (DelayKind::GeometricCapped { p: 0.4 }, 6),
    ] {
        for seed in [1u64, 2, 3] {
            let mut cfg = RunConfig::new(12, 4, 150, seed, Mode::Simulated);
            cfg.max_delay = bound;
            cfg.metric_stride = 25;
            let delays = DelaySchedule::new(kind, bound, seed)
                .unwrap()
                .with_worker_groups(if seed % 2 == 0 { 4 } else { 1 });
            let out = run_sim(&cfg, &data, &obj, &steps, &delays, false).unwrap();
            assert_staleness_bounded("criterion 9", &out, bound);
            let hist = staleness_histogram(&out);
            assert_eq!(
                hist.values().sum::<u64>(),
                150 * 12,
                "histogram must count every sample draw"
            );
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    println!("[criterion 9] PASS ({elapsed:.1}s) - max tau <= T exact for all schedule kinds");
}

/// Criterion 10: the mini-batch gradient estimator is unbiased on the
/// benchmark: the mean of 10^5 single-sample gradients at a fixed point
/// stays within 4 standard errors of the full gradient, per coordinate;
/// under 30 s.
#[test]
fn criterion_10_unbiasedness() {
    let t0 = Instant::now();
    let bench = a9a();
    let d = bench.data.dim();
    let x = initial_model(ObjectiveKind::NnPca, d, 4242);
    let g = full_grad(&bench.obj, &x, &bench.data).unwrap();

    let draws = 100_000u64;
    let rng = CounterRng::new(97, stream::TEST);
    let mut mean = vec![0.0f64; d];
    let mut m2 = vec![0.0f64; d];
    let mut gi = DenseVec::zeros(d);
    for i in 0..draws {
        let s = bench.data.sample(rng.index_at(i, bench.data.n()));
        for v in gi.as_mut_slice() {
            *v = 0.0;
        }
        proxsgd::objectives::accumulate_stoch_grad(&bench.obj, &x, s, &mut gi).unwrap();
        let count = (i + 1) as f64;
        for j in 0..d {
            let delta = gi[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (gi[j] - mean[j]);
        }
    }
    let mut worst_z = 0.0f64;
    for j in 0..d {
        let var = m2[j] / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        let diff = (mean[j] - g[j]).abs();
        assert!(
            diff <= 4.0 * se + 1e-12,
            "coordinate {j}: |mean - full| = {diff:.3e} exceeds 4 se = {:.3e}",
            4.0 * se
        );
        if se > 0.0 {
            worst_z = worst_z.max(diff / se);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "unbiasedness took {elapsed:.1}s (limit 30s)");
    println!(
        "[criterion 10] PASS ({elapsed:.1}s) - worst |z|-score {worst_z:.2} over {d} coordinates on {}",
        bench.label
    );
}

/// Criterion 11: every constant-step schedule built from the delay-aware
/// bound passes the condition checker for its (L, T), and the minimum-K
/// bound evaluates to 128 at unit parameters.
#[test]
fn criterion_11_schedule_compliance() {
    let t0 = Instant::now();
    assert_eq!(corollary_k_bound(1.0, 1, 1.0, 1.0, 0), 128);
    let mut rng = SeqRng::new(5150, stream::TEST);
    for _ in 0..200 {
        let gap = rng.range(1e-3, 10.0);
        let n = 1 + rng.index(8192);
        let k = 1 + rng.index(100_000) as u64;
        let l = rng.range(0.1, 8.0);
        let s2 = rng.range(1e-6, 4.0);
        let t = rng.index(16) as u64;
        let sched = StepSchedule::corollary(gap, n, k, l, s2, t).unwrap();
        let etas = materialize(&sched, k.min(2000));
        let report = check_theorem_conditions(&etas, l, t);
        assert!(
            report.all_ok(),
            "corollary schedule violated the conditions at gap={gap} n={n} k={k} l={l} s2={s2} t={t}"
        );
    }
    let elapsed = t0.elapsed().as_secs_f64();
    println!("[criterion 11] PASS ({elapsed:.1}s) - 200 random corollary schedules pass both conditions; K bound = 128");
}
