//! Randomized property suites for the four proximal-operator inequalities
//! the convergence analysis rests on. Each trial draws a dimension up to 20,
//! one of the three regularizers, a step size in [1e-3, 1] and random
//! points, then checks the inequality with the stated slack: 1e-9 for value
//! inequalities and 1e-12 for norm inequalities.

use crate::core::{DenseVec, Result};
use crate::prox::{gradient_mapping, prox, RegularizerSpec};
use crate::rng::{stream, SeqRng};

#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub name: &'static str,
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which the left side exceeded the right side
    /// (negative when every trial held with margin).
    pub worst_excess: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl std::fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} trials, {} violations, worst excess {:.3e} -> {}",
            self.name,
            self.trials,
            self.violations,
            self.worst_excess,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

struct TrialGen {
    rng: SeqRng,
}

impl TrialGen {
    fn new(seed: u64) -> Self {
        TrialGen {
            rng: SeqRng::new(seed, stream::TEST),
        }
    }

    fn dim(&mut self) -> usize {
        1 + self.rng.index(20)
    }

    fn eta(&mut self) -> f64 {
        self.rng.range(1e-3, 1.0)
    }

    fn regularizer(&mut self, which: usize) -> RegularizerSpec {
        match which % 3 {
            0 => RegularizerSpec::None,
            1 => RegularizerSpec::l1(self.rng.range(0.0, 2.0)).expect("lambda >= 0"),
            _ => RegularizerSpec::BallNonneg,
        }
    }

    fn vector(&mut self, d: usize, scale: f64) -> DenseVec {
        DenseVec::from_vec((0..d).map(|_| self.rng.range(-scale, scale)).collect())
            .expect("finite")
    }

    /// A point with finite h: anything for none/l1, a projected point for
    /// the indicator.
    fn feasible(&mut self, d: usize, h: &RegularizerSpec) -> DenseVec {
        let v = self.vector(d, 1.5);
        match h {
            RegularizerSpec::BallNonneg => prox(h, &v, 1.0).expect("projection is total"),
            _ => v,
        }
    }
}

/// For `y = prox(h, x - eta g, eta)`:
/// `<g, y - x> + h(y) - h(x) <= -||y - x||^2 / eta`.
pub fn lemma1_prox_descent(trials: usize, seed: u64) -> Result<LemmaReport> {
    let mut gen = TrialGen::new(seed ^ 0x11);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let d = gen.dim();
        let h = gen.regularizer(t);
        let eta = gen.eta();
        let x = gen.feasible(d, &h);
        let g = gen.vector(d, 2.0);
        let mut step = x.clone();
        step.saxpy(-eta, &g)?;
        let y = prox(&h, &step, eta)?;
        let diff = y.sub(&x)?;
        let lhs = g.dot(&diff)? + h.value(&y) - h.value(&x);
        let rhs = -diff.norm_sq() / eta;
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
    }
    Ok(LemmaReport {
        name: "lemma 1 (prox descent)",
        trials,
        violations,
        worst_excess: worst,
    })
}

/// `||prox(h, x - eta G) - prox(h, x - eta g)|| <= eta ||G - g||`.
pub fn lemma2_prox_nonexpansive(trials: usize, seed: u64) -> Result<LemmaReport> {
    let mut gen = TrialGen::new(seed ^ 0x22);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let d = gen.dim();
        let h = gen.regularizer(t);
        let eta = gen.eta();
        let x = gen.vector(d, 2.0);
        let g_a = gen.vector(d, 2.0);
        let g_b = gen.vector(d, 2.0);
        let mut va = x.clone();
        va.saxpy(-eta, &g_a)?;
        let mut vb = x.clone();
        vb.saxpy(-eta, &g_b)?;
        let ya = prox(&h, &va, eta)?;
        let yb = prox(&h, &vb, eta)?;
        let lhs = ya.sub(&yb)?.norm();
        let rhs = eta * g_a.sub(&g_b)?.norm();
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    Ok(LemmaReport {
        name: "lemma 2 (prox nonexpansive)",
        trials,
        violations,
        worst_excess: worst,
    })
}

/// `||P(x, g1, eta) - P(x, g2, eta)|| <= ||g1 - g2||`.
pub fn lemma3_mapping_nonexpansive(trials: usize, seed: u64) -> Result<LemmaReport> {
    let mut gen = TrialGen::new(seed ^ 0x33);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let d = gen.dim();
        let h = gen.regularizer(t);
        let eta = gen.eta();
        let x = gen.vector(d, 2.0);
        let g1 = gen.vector(d, 2.0);
        let g2 = gen.vector(d, 2.0);
        let p1 = gradient_mapping(&x, &g1, eta, &h)?;
        let p2 = gradient_mapping(&x, &g2, eta, &h)?;
        let lhs = p1.sub(&p2)?.norm();
        let rhs = g1.sub(&g2)?.norm();
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    Ok(LemmaReport {
        name: "lemma 3 (gradient mapping nonexpansive)",
        trials,
        violations,
        worst_excess: worst,
    })
}

/// The composite descent inequality for `y = prox(h, x - eta g)` against a
/// feasible competitor `z`, instantiated with the quadratic
/// `f(w) = (L/2) ||w - a||^2` whose gradient Lipschitz constant is exactly L:
/// `Psi(y) <= Psi(z) + <y - z, grad f(x) - g>
///           + (L/2 - 1/2eta) ||y - x||^2 + (L/2 + 1/2eta) ||z - x||^2
///           - 1/2eta ||y - z||^2`.
pub fn lemma4_composite_descent(trials: usize, seed: u64) -> Result<LemmaReport> {
    let mut gen = TrialGen::new(seed ^ 0x44);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let d = gen.dim();
        let h = gen.regularizer(t);
        let eta = gen.eta();
        let lips = gen.rng.range(0.5, 4.0);
        let a = gen.vector(d, 1.0);
        let f = |w: &DenseVec| -> f64 { 0.5 * lips * w.sub(&a).unwrap().norm_sq() };
        let grad_f = |w: &DenseVec| -> DenseVec {
            let mut g = w.sub(&a).unwrap();
            g.scale(lips);
            g
        };
        let x = gen.feasible(d, &h);
        let g = gen.vector(d, 2.0);
        let z = gen.feasible(d, &h);
        let mut step = x.clone();
        step.saxpy(-eta, &g)?;
        let y = prox(&h, &step, eta)?;

        let psi = |w: &DenseVec| f(w) + h.value(w);
        let y_minus_z = y.sub(&z)?;
        let y_minus_x = y.sub(&x)?;
        let z_minus_x = z.sub(&x)?;
        let lhs = psi(&y);
        let rhs = psi(&z)
            + y_minus_z.dot(&grad_f(&x).sub(&g)?)?
            + (lips / 2.0 - 1.0 / (2.0 * eta)) * y_minus_x.norm_sq()
            + (lips / 2.0 + 1.0 / (2.0 * eta)) * z_minus_x.norm_sq()
            - y_minus_z.norm_sq() / (2.0 * eta);
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
    }
    Ok(LemmaReport {
        name: "lemma 4 (composite descent)",
        trials,
        violations,
        worst_excess: worst,
    })
}

/// All four suites at the given trial count.
pub fn run_lemma_suites(trials: usize, seed: u64) -> Result<Vec<LemmaReport>> {
    Ok(vec![
        lemma1_prox_descent(trials, seed)?,
        lemma2_prox_nonexpansive(trials, seed)?,
        lemma3_mapping_nonexpansive(trials, seed)?,
        lemma4_composite_descent(trials, seed)?,
    ])
}
