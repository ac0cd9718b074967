//! Two-point geodesic problems by Newton shooting.
//!
//! The unknowns are the initial direction angle `α` in a `g`-orthonormal
//! frame at the start point and the arclength `L`. The endpoint map
//! `(α, L) ↦ γ_α(L)` has Jacobian columns `j(L) N(L)` and `γ̇(L)`, where `j`
//! is the perpendicular Jacobi field integrated alongside the geodesic.

use serde::{Deserialize, Serialize};

use super::integrate::{trace, TraceOptions};
use super::{g_rotate, orthonormal_frame, GeodesicTrace, PhasePoint, TraceStart};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{check_in_disc, MetricModel, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConnectOptions {
    pub trace: TraceOptions,
    pub max_iterations: usize,
    /// Euclidean endpoint mismatch accepted at convergence.
    pub tolerance: f64,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions {
            trace: TraceOptions::default(),
            max_iterations: 30,
            tolerance: 1e-8,
        }
    }
}

/// The connecting geodesic cut at the target, and its length `d(x, y)`.
#[derive(Clone, Debug)]
pub struct Connection {
    pub trace: GeodesicTrace,
    pub distance: f64,
    pub iterations: usize,
    pub mismatch: f64,
}

struct Shot {
    trace: GeodesicTrace,
    residual: [f64; 2],
    mismatch: f64,
}

fn shoot(
    model: &MetricModel,
    x: Point,
    y: Point,
    alpha: f64,
    length: f64,
    opts: &TraceOptions,
) -> Result<Shot> {
    let (e1, e2) = orthonormal_frame(model, x);
    let (s, c) = alpha.sin_cos();
    let start = PhasePoint {
        x,
        v: [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1]],
    };
    let tr = trace(
        model,
        start,
        TraceStart::Interior(start),
        &TraceOptions {
            jacobi: true,
            stop_at: Some(length),
            ..opts.clone()
        },
    )?;
    // A trial that leaves the disc before `length` is continued along its
    // exit tangent, which keeps the residual continuous in (α, L).
    let end = tr.end();
    let reach = linalg::add(end.x, linalg::scale(end.v, length - tr.length));
    let residual = linalg::sub(reach, y);
    Ok(Shot {
        mismatch: linalg::norm(residual),
        residual,
        trace: tr,
    })
}

/// Solves the two-point problem from `x` to `y`.
pub fn connect(
    model: &MetricModel,
    x: Point,
    y: Point,
    opts: &ConnectOptions,
) -> Result<Connection> {
    check_in_disc(x)?;
    check_in_disc(y)?;
    let chord = linalg::sub(y, x);
    if linalg::norm(chord) == 0.0 {
        return Err(Error::Domain("connect needs two distinct points".into()));
    }
    let g = model.metric_at(x);
    let (e1, e2) = orthonormal_frame(model, x);
    let mut alpha = linalg::bilinear(&g, chord, e2).atan2(linalg::bilinear(&g, chord, e1));
    let mut length = model.segment_length(x, y, 16);
    let mut shot = shoot(model, x, y, alpha, length, &opts.trace)?;
    let mut iterations = 0;
    while shot.mismatch > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::ShootingFailure {
                iterations,
                mismatch: shot.mismatch,
            });
        }
        iterations += 1;
        let end = *shot.trace.end();
        let j = shot
            .trace
            .jacobi
            .expect("shooting integrates the Jacobi field")
            .value;
        let n = g_rotate(&model.metric_at(end.x), end.v);
        let jac = [[j * n[0], end.v[0]], [j * n[1], end.v[1]]];
        let delta = linalg::solve(&jac, shot.residual).ok_or(Error::ShootingFailure {
            iterations,
            mismatch: shot.mismatch,
        })?;
        let mut damping = 1.0;
        loop {
            let a = alpha - damping * delta[0];
            let l = (length - damping * delta[1]).max(0.5 * length);
            let can_halve = damping >= 1.0 / 64.0;
            match shoot(model, x, y, a, l, &opts.trace) {
                Ok(next) if next.mismatch < shot.mismatch || !can_halve => {
                    alpha = a;
                    length = l;
                    shot = next;
                    break;
                }
                Ok(_) | Err(Error::Numeric(_)) if can_halve => damping *= 0.5,
                Ok(_) | Err(Error::Numeric(_)) => {
                    return Err(Error::ShootingFailure {
                        iterations,
                        mismatch: shot.mismatch,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Connection {
        distance: length,
        mismatch: shot.mismatch,
        trace: shot.trace,
        iterations,
    })
}

/// `d(x, y)`, zero when the points coincide.
pub fn distance(model: &MetricModel, x: Point, y: Point, opts: &ConnectOptions) -> Result<f64> {
    if x == y {
        check_in_disc(x)?;
        return Ok(0.0);
    }
    let mut o = opts.clone();
    o.trace.record_every = usize::MAX;
    connect(model, x, y, &o).map(|c| c.distance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_connection_is_the_straight_segment() {
        let m = MetricModel::euclidean();
        let c = connect(&m, [0.0, 0.0], [0.5, 0.0], &ConnectOptions::default()).unwrap();
        assert!((c.distance - 0.5).abs() < 1e-12);
        for s in &c.trace.samples {
            assert!(s.x[1].abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_to_boundary_connection() {
        let m = MetricModel::conformal_bump([0.1, -0.2], 0.4, 0.35).unwrap();
        let c = connect(&m, [1.0, 0.0], [0.0, -1.0], &ConnectOptions::default()).unwrap();
        assert!(c.mismatch <= 1e-8);
        assert!(c.distance > 2f64.sqrt());
    }

    #[test]
    fn coincident_points_are_rejected() {
        let m = MetricModel::euclidean();
        assert!(matches!(
            connect(&m, [0.2, 0.2], [0.2, 0.2], &ConnectOptions::default()),
            Err(Error::Domain(_))
        ));
        assert_eq!(
            distance(&m, [0.2, 0.2], [0.2, 0.2], &ConnectOptions::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn iteration_cap_reports_shooting_failure() {
        let m = MetricModel::conformal_bump([0.0, 0.0], 0.8, 0.3).unwrap();
        let opts = ConnectOptions {
            max_iterations: 0,
            ..ConnectOptions::default()
        };
        assert!(matches!(
            connect(&m, [-0.6, 0.05], [0.6, 0.0], &opts),
            Err(Error::ShootingFailure { .. })
        ));
    }
}
