//! Unit-speed geodesics of a disc metric: tracing, boundary exit, two-point
//! shooting, pairwise intersections, boundary travel-time fans and
//! simplicity certification.

mod connect;
mod fan;
mod integrate;
mod intersect;
mod simplicity;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};
use crate::metric::{MetricModel, Point};

pub use connect::{connect, distance, ConnectOptions, Connection};
pub use fan::{boundary_fan, BoundaryFan, FanOptions};
pub use integrate::{
    integrate_geodesic, trace, JacobiRecord, TraceOptions, DEFAULT_MAX_LENGTH, DEFAULT_STEP,
};
pub use intersect::{
    intersect_all, trace_intersection, Intersection, PairHit, DEFAULT_INTERSECTION_TOL,
};
pub use simplicity::{simplicity_report, SimplicityOptions, SimplicityReport, Verdict};

/// Largest tangential component admitted in direction fans.
pub const MAX_FAN_MU: f64 = 0.99;

/// A point of the unit sphere bundle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Point,
    pub v: Vec2,
}

/// An element of the open boundary ball bundle in `(θ, μ)` coordinates:
/// boundary angle `θ ∈ [0, 2π)` and tangential component `μ ∈ (−1, 1)`
/// along the counter-clockwise unit tangent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVector {
    pub theta: f64,
    pub mu: f64,
}

impl BoundaryVector {
    pub fn new(theta: f64, mu: f64) -> Result<Self> {
        if !(mu.abs() < 1.0) || !theta.is_finite() {
            return Err(Error::Domain(format!(
                "boundary vector needs finite angle and |mu| < 1, got ({theta}, {mu})"
            )));
        }
        Ok(BoundaryVector {
            theta: linalg::wrap_angle(theta),
            mu,
        })
    }

    pub fn point(&self) -> Point {
        boundary_point(self.theta)
    }
}

/// Where a trace begins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceStart {
    Boundary(BoundaryVector),
    Interior(PhasePoint),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: Point,
    pub v: Vec2,
}

/// A sampled unit-speed geodesic on `[0, length]`.
///
/// `exit` holds the reversed outgoing vector when the trace ends on the
/// boundary; traces cut at a prescribed length inside the disc carry `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicTrace {
    pub samples: Vec<TraceSample>,
    pub length: f64,
    pub entry: TraceStart,
    pub exit: Option<BoundaryVector>,
    pub jacobi: Option<JacobiRecord>,
    /// Largest `| |v|_g − 1 |` seen at the recorded samples.
    pub max_speed_drift: f64,
}

impl GeodesicTrace {
    /// The exit time, when the trace runs to the boundary.
    pub fn exit_time(&self) -> Option<f64> {
        self.exit.map(|_| self.length)
    }

    pub fn start(&self) -> &TraceSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &TraceSample {
        self.samples.last().expect("trace has samples")
    }

    /// Position and velocity at arclength `t`, by cubic Hermite interpolation
    /// between the bracketing samples. `t` is clamped to `[0, length]`.
    pub fn state_at(&self, t: f64) -> (Point, Vec2) {
        let t = t.clamp(0.0, self.length);
        let k = self.samples.partition_point(|s| s.t <= t);
        let i = k
            .saturating_sub(1)
            .min(self.samples.len().saturating_sub(2));
        if self.samples.len() < 2 {
            let s = &self.samples[0];
            return (s.x, s.v);
        }
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let dt = b.t - a.t;
        let u = if dt > 0.0 { (t - a.t) / dt } else { 0.0 };
        hermite(a.x, a.v, b.x, b.v, dt, u)
    }

    pub fn position_at(&self, t: f64) -> Point {
        self.state_at(t).0
    }

    /// Writes whitespace-separated columns `t x1 x2 v1 v2`, one sample per
    /// line, after a `#` header line.
    pub fn write_columns<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# t x1 x2 v1 v2")?;
        for s in &self.samples {
            writeln!(w, "{} {} {} {} {}", s.t, s.x[0], s.x[1], s.v[0], s.v[1])?;
        }
        Ok(())
    }

    pub fn to_columns(&self) -> String {
        let mut buf = Vec::new();
        self.write_columns(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Cubic Hermite interpolation on one sample interval of width `dt`,
/// `u ∈ [0, 1]`. Returns position and velocity.
#[inline]
pub(crate) fn hermite(p0: Vec2, v0: Vec2, p1: Vec2, v1: Vec2, dt: f64, u: f64) -> (Vec2, Vec2) {
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let d00 = 6.0 * u2 - 6.0 * u;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = -6.0 * u2 + 6.0 * u;
    let d11 = 3.0 * u2 - 2.0 * u;
    let mut p = [0.0; 2];
    let mut v = [0.0; 2];
    for k in 0..2 {
        p[k] = h00 * p0[k] + h10 * dt * v0[k] + h01 * p1[k] + h11 * dt * v1[k];
        v[k] = if dt > 0.0 {
            (d00 * p0[k] + d10 * dt * v0[k] + d01 * p1[k] + d11 * dt * v1[k]) / dt
        } else {
            v0[k]
        };
    }
    (p, v)
}

pub fn boundary_point(theta: f64) -> Point {
    [theta.cos(), theta.sin()]
}

/// Rotates `v` by +90° in the inner product `g`. The result has the same
/// `g`-length as `v` and is `g`-orthogonal to it.
#[inline]
pub fn g_rotate(g: &Mat2, v: Vec2) -> Vec2 {
    let s = 1.0 / linalg::det(g).sqrt();
    [
        s * (-g[0][1] * v[0] - g[1][1] * v[1]),
        s * (g[0][0] * v[0] + g[0][1] * v[1]),
    ]
}

/// The `g`-unit counter-clockwise tangent and `g`-unit inward normal at
/// boundary angle `θ`.
pub fn boundary_frame(model: &MetricModel, theta: f64) -> (Point, Vec2, Vec2) {
    let p = boundary_point(theta);
    let g = model.metric_at(p);
    let t = [-p[1], p[0]];
    let tg = linalg::scale(t, 1.0 / linalg::bilinear(&g, t, t).sqrt());
    (p, tg, g_rotate(&g, tg))
}

/// The inward unit vector at boundary angle `θ` with tangential component `μ`.
pub fn lift_inward(model: &MetricModel, bv: BoundaryVector) -> Result<PhasePoint> {
    if !(bv.mu.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "tangential component must satisfy |mu| < 1, got {}",
            bv.mu
        )));
    }
    let (p, tg, nu) = boundary_frame(model, bv.theta);
    let c = (1.0 - bv.mu * bv.mu).sqrt();
    Ok(PhasePoint {
        x: p,
        v: [bv.mu * tg[0] + c * nu[0], bv.mu * tg[1] + c * nu[1]],
    })
}

/// `(θ, μ)` of the reversed outgoing vector `−v` at a boundary point `x`.
pub fn reversed_exit_vector(model: &MetricModel, x: Point, v: Vec2) -> BoundaryVector {
    let theta = linalg::wrap_angle(x[1].atan2(x[0]));
    let (_, tg, _) = boundary_frame(model, theta);
    let g = model.metric_at(boundary_point(theta));
    let mu = -linalg::bilinear(&g, v, tg);
    BoundaryVector {
        theta,
        mu: mu.clamp(-1.0 + 1e-15, 1.0 - 1e-15),
    }
}

/// Rescales `v` to `g`-unit length at `x`.
pub fn normalize(model: &MetricModel, x: Point, v: Vec2) -> Result<Vec2> {
    let n = model.norm(x, v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain(
            "cannot normalize a zero tangent vector".into(),
        ));
    }
    Ok(linalg::scale(v, 1.0 / n))
}

/// A `g`-orthonormal frame `(e₁, e₂)` at `x`, positively oriented, with
/// `e₁` along the first coordinate axis.
pub fn orthonormal_frame(model: &MetricModel, x: Point) -> (Vec2, Vec2) {
    let g = model.metric_at(x);
    let e1 = [1.0 / g[0][0].sqrt(), 0.0];
    (e1, g_rotate(&g, e1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_normal_lift_points_inward() {
        let m = MetricModel::euclidean();
        let p = lift_inward(
            &m,
            BoundaryVector {
                theta: 0.0,
                mu: 0.0,
            },
        )
        .unwrap();
        assert!((p.x[0] - 1.0).abs() < 1e-15 && p.x[1].abs() < 1e-15);
        assert!((p.v[0] + 1.0).abs() < 1e-15 && p.v[1].abs() < 1e-15);
    }

    #[test]
    fn euclidean_lift_splits_tangential_and_normal_parts() {
        let m = MetricModel::euclidean();
        let p = lift_inward(
            &m,
            BoundaryVector {
                theta: 0.0,
                mu: 0.6,
            },
        )
        .unwrap();
        assert!((p.v[1] - 0.6).abs() < 1e-15);
        assert!((p.v[0] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn curved_lift_has_unit_metric_length() {
        let m = MetricModel::constant_curvature(0.5).unwrap();
        let p = lift_inward(
            &m,
            BoundaryVector {
                theta: 0.0,
                mu: 0.0,
            },
        )
        .unwrap();
        assert!((p.v[0] + 0.75).abs() < 1e-15 && p.v[1].abs() < 1e-15);
        assert!((m.norm(p.x, p.v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grazing_lift_is_rejected() {
        let m = MetricModel::euclidean();
        assert!(matches!(
            lift_inward(
                &m,
                BoundaryVector {
                    theta: 0.0,
                    mu: 1.0
                }
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn g_rotation_is_orthogonal_and_isometric() {
        let g = [[2.0, 0.3], [0.3, 0.7]];
        let v = [0.4, -1.1];
        let n = g_rotate(&g, v);
        assert!(linalg::bilinear(&g, v, n).abs() < 1e-14);
        assert!((linalg::bilinear(&g, n, n) - linalg::bilinear(&g, v, v)).abs() < 1e-14);
        assert!(linalg::cross(v, n) > 0.0);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| [t * t * t - t, 2.0 * t * t];
        let df = |t: f64| [3.0 * t * t - 1.0, 4.0 * t];
        let (a, b) = (0.3, 0.8);
        let (p, v) = hermite(f(a), df(a), f(b), df(b), b - a, 0.4);
        let t = a + 0.4 * (b - a);
        for k in 0..2 {
            assert!((p[k] - f(t)[k]).abs() < 1e-14);
            assert!((v[k] - df(t)[k]).abs() < 1e-13);
        }
    }
}
