//! A posteriori certification that a metric is simple: strictly convex
//! boundary, no conjugate points along a fan of boundary geodesics, and no
//! trapped rays.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{trace, TraceOptions};
use super::{boundary_frame, lift_inward, BoundaryVector, TraceStart, MAX_FAN_MU};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::MetricModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplicityOptions {
    /// The fan has `n_dirs` boundary angles times `n_dirs` tangential components.
    pub n_dirs: usize,
    /// Boundary curvature below this margin (but positive) is inconclusive.
    pub convexity_margin: f64,
    pub step: f64,
    pub max_length: f64,
}

impl Default for SimplicityOptions {
    fn default() -> Self {
        SimplicityOptions {
            n_dirs: 24,
            convexity_margin: 1e-3,
            step: super::integrate::DEFAULT_STEP,
            max_length: super::integrate::DEFAULT_MAX_LENGTH,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Simple,
    NotSimple,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub boundary_strictly_convex: bool,
    pub min_boundary_curvature: f64,
    pub conjugate_point_found: bool,
    /// The first fan vector found with a conjugate point, and its arclength.
    pub conjugate_example: Option<(BoundaryVector, f64)>,
    pub trapped_found: bool,
    pub max_exit_time: f64,
    pub rays_traced: usize,
    pub verdict: Verdict,
}

/// Geodesic curvature of the unit circle at angle `θ`, with respect to the
/// inward normal: `⟨c″ + Γ(c′, c′), ν⟩_g / |c′|²_g`.
pub fn boundary_curvature(model: &MetricModel, theta: f64) -> Result<f64> {
    let (p, _, nu) = boundary_frame(model, theta);
    let c1 = [-p[1], p[0]];
    let c2 = [-p[0], -p[1]];
    let gamma = model.christoffel_at(p)?;
    let acc = linalg::add(c2, gamma.contract(c1, c1));
    let g = model.metric_at(p);
    Ok(linalg::bilinear(&g, acc, nu) / linalg::bilinear(&g, c1, c1))
}

enum RayOutcome {
    Exit { length: f64, conjugate: Option<f64> },
    Trapped,
    Failed,
}

pub fn simplicity_report(
    model: &MetricModel,
    opts: &SimplicityOptions,
) -> Result<SimplicityReport> {
    let n = opts.n_dirs;
    if n < 16 {
        return Err(Error::Config(format!(
            "simplicity fan needs n_dirs >= 16, got {n}"
        )));
    }
    let mut min_kappa = f64::INFINITY;
    for i in 0..8 * n {
        min_kappa = min_kappa.min(boundary_curvature(model, TAU * i as f64 / (8 * n) as f64)?);
    }
    let topts = TraceOptions {
        step: opts.step,
        max_length: opts.max_length,
        record_every: usize::MAX,
        jacobi: true,
        stop_at: None,
    };
    let dirs: Vec<BoundaryVector> = (0..n)
        .flat_map(|i| {
            (0..n).map(move |k| BoundaryVector {
                theta: TAU * i as f64 / n as f64,
                mu: -MAX_FAN_MU + 2.0 * MAX_FAN_MU * k as f64 / (n - 1) as f64,
            })
        })
        .collect();
    let outcomes: Vec<(BoundaryVector, RayOutcome)> = dirs
        .par_iter()
        .map(|&bv| {
            let outcome = match lift_inward(model, bv)
                .and_then(|p| trace(model, p, TraceStart::Boundary(bv), &topts))
            {
                Ok(tr) => RayOutcome::Exit {
                    length: tr.length,
                    conjugate: tr.jacobi.and_then(|j| j.first_zero),
                },
                Err(Error::TrappedGeodesic { .. }) => RayOutcome::Trapped,
                Err(_) => RayOutcome::Failed,
            };
            (bv, outcome)
        })
        .collect();

    let mut max_exit: f64 = 0.0;
    let mut trapped = false;
    let mut failed = false;
    let mut conjugate = None;
    for (bv, o) in &outcomes {
        match o {
            RayOutcome::Exit {
                length,
                conjugate: c,
            } => {
                max_exit = max_exit.max(*length);
                if let (None, Some(t)) = (conjugate, c) {
                    conjugate = Some((*bv, *t));
                }
            }
            RayOutcome::Trapped => trapped = true,
            RayOutcome::Failed => failed = true,
        }
    }
    let convex = min_kappa > 0.0;
    let verdict = if !convex || trapped || conjugate.is_some() {
        Verdict::NotSimple
    } else if failed || min_kappa < opts.convexity_margin {
        Verdict::Inconclusive
    } else {
        Verdict::Simple
    };
    Ok(SimplicityReport {
        boundary_strictly_convex: convex,
        min_boundary_curvature: min_kappa,
        conjugate_point_found: conjugate.is_some(),
        conjugate_example: conjugate,
        trapped_found: trapped,
        max_exit_time: if trapped { f64::INFINITY } else { max_exit },
        rays_traced: outcomes.len(),
        verdict,
    })
}
