//! Proximal operators and the gradient-mapping primitive.
//!
//! `prox(h, v, eta)` solves `argmin_y h(y) + (1/2 eta) ||y - v||^2` for the
//! three supported regularizers, and `gradient_mapping` is the stationarity
//! measure `P(x, g, eta) = (x - prox(h, x - eta g, eta)) / eta` whose norm
//! every convergence metric reports.

use crate::core::{DenseVec, Error, Result};

/// The nonsmooth term `h`: nothing, an l1 penalty, or the indicator of
/// `C = { x : ||x|| <= 1, x >= 0 }`.
#[derive(Clone, Debug, PartialEq)]
pub enum RegularizerSpec {
    None,
    L1 { lambda: f64 },
    BallNonneg,
}

/// Feasibility slack on the ball norm; projection outputs land within
/// rounding of the unit sphere.
pub const FEAS_TOL: f64 = 1e-12;

impl RegularizerSpec {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidInput(format!(
                "l1 weight must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(RegularizerSpec::L1 { lambda })
    }

    /// True when `h(x)` is finite. Only the indicator constrains the domain.
    pub fn is_feasible(&self, x: &DenseVec) -> bool {
        match self {
            RegularizerSpec::None | RegularizerSpec::L1 { .. } => true,
            RegularizerSpec::BallNonneg => {
                x.min_coord() >= 0.0 && x.norm() <= 1.0 + FEAS_TOL
            }
        }
    }

    /// `h(x)`; `+inf` for an infeasible point under the indicator.
    pub fn value(&self, x: &DenseVec) -> f64 {
        match self {
            RegularizerSpec::None => 0.0,
            RegularizerSpec::L1 { lambda } => {
                lambda * x.as_slice().iter().map(|v| v.abs()).sum::<f64>()
            }
            RegularizerSpec::BallNonneg => {
                if self.is_feasible(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "prox step eta must be finite and > 0, got {eta}"
        )));
    }
    Ok(())
}

/// `argmin_y h(y) + (1/2 eta) ||y - v||^2`.
///
/// None is the identity; L1 soft-thresholds each coordinate at `eta*lambda`
/// (ties map to exactly 0); the ball-and-orthant indicator clips negatives
/// and rescales onto the unit sphere when the clipped point is outside.
pub fn prox(h: &RegularizerSpec, v: &DenseVec, eta: f64) -> Result<DenseVec> {
    check_eta(eta)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("prox input"));
    }
    let out = match h {
        RegularizerSpec::None => v.clone(),
        RegularizerSpec::L1 { lambda } => {
            let t = eta * lambda;
            DenseVec::from_vec(
                v.as_slice()
                    .iter()
                    .map(|&x| x.signum() * (x.abs() - t).max(0.0))
                    .collect(),
            )?
        }
        RegularizerSpec::BallNonneg => {
            let mut y: Vec<f64> = v.as_slice().iter().map(|&x| x.max(0.0)).collect();
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            // points within rounding error of the sphere stay put, so
            // reprojecting a projection is exactly the identity
            if norm > 1.0 + 1e-14 {
                for a in &mut y {
                    *a /= norm;
                }
            }
            DenseVec::from_vec(y)?
        }
    };
    Ok(out)
}

/// `P(x, g, eta) = (x - prox(h, x - eta g, eta)) / eta`.
pub fn gradient_mapping(
    x: &DenseVec,
    g: &DenseVec,
    eta: f64,
    h: &RegularizerSpec,
) -> Result<DenseVec> {
    check_eta(eta)?;
    let mut step = x.clone();
    step.saxpy(-eta, g)?;
    let y = prox(h, &step, eta)?;
    let mut p = x.sub(&y)?;
    p.scale(1.0 / eta);
    Ok(p)
}
