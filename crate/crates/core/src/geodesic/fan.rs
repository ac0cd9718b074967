//! Boundary travel times from one point by an adaptive fan of geodesics.
//!
//! Every ray of the fan carries its perpendicular Jacobi field, which gives
//! the derivatives of the exit angle `β` and exit time `τ` with respect to
//! the launch angle `α`. Both are interpolated as cubic Hermite functions of
//! `α`; a receiver at angle `θ` is served by inverting `β(α) = θ`. On a
//! simple metric the exit map is monotone, so `τ(β)` is the distance from
//! the source to the boundary point at angle `β`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use super::integrate::{trace, TraceOptions};
use super::{boundary_frame, g_rotate, orthonormal_frame, PhasePoint, TraceStart};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};
use crate::metric::{check_in_disc, MetricModel, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanOptions {
    pub step: f64,
    pub initial_rays: usize,
    /// Intervals whose exit angles differ by more than this are split.
    pub max_dbeta: f64,
    /// Intervals are also split when the secant of `β` or `τ` departs from
    /// the mean of the endpoint derivatives by more than this, a proxy for
    /// the cubic interpolation error.
    pub max_secant_defect: f64,
    pub max_rays: usize,
}

impl Default for FanOptions {
    fn default() -> Self {
        FanOptions {
            step: super::integrate::DEFAULT_STEP,
            initial_rays: 64,
            max_dbeta: TAU / 128.0,
            max_secant_defect: 1e-5,
            max_rays: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ray {
    alpha: f64,
    beta: f64,
    dbeta: f64,
    tau: f64,
    dtau: f64,
}

/// Exit angles and times of a fan from one source, ready for interpolation.
#[derive(Clone, Debug)]
pub struct BoundaryFan {
    pub source: Point,
    /// Boundary angle of the source when it lies on the unit circle.
    pub boundary_angle: Option<f64>,
    /// Rays ordered so that the unwrapped exit angle increases.
    rays: Vec<Ray>,
}

const BOUNDARY_TOL: f64 = 1e-12;
/// Launch angles closer than this to the boundary tangent are not traced.
const GRAZING_MARGIN: f64 = 1e-3;

struct Launcher<'a> {
    model: &'a MetricModel,
    source: Point,
    e1: Vec2,
    e2: Vec2,
    opts: TraceOptions,
}

impl Launcher<'_> {
    fn fire(&self, alpha: f64) -> Result<(f64, Ray)> {
        let (s, c) = alpha.sin_cos();
        let start = PhasePoint {
            x: self.source,
            v: [
                c * self.e1[0] + s * self.e2[0],
                c * self.e1[1] + s * self.e2[1],
            ],
        };
        let tr = trace(self.model, start, TraceStart::Interior(start), &self.opts)?;
        let end = tr.end();
        let (x, v) = (end.x, end.v);
        let j = tr
            .jacobi
            .expect("fan rays integrate the Jacobi field")
            .value;
        let n = g_rotate(&self.model.metric_at(x), v);
        let xv = linalg::dot(x, v);
        if !(xv > 0.0) {
            return Err(Error::Numeric(
                "fan ray leaves the disc tangentially".into(),
            ));
        }
        let dtau = -j * linalg::dot(x, n) / xv;
        let dx = [j * n[0] + v[0] * dtau, j * n[1] + v[1] * dtau];
        let dbeta = linalg::cross(x, dx) / linalg::dot(x, x);
        let raw = x[1].atan2(x[0]);
        Ok((
            raw,
            Ray {
                alpha,
                beta: raw,
                dbeta,
                tau: tr.length,
                dtau,
            },
        ))
    }
}

/// Nearest representative of `raw + 2πk` to `target`.
fn unwrap_near(raw: f64, target: f64) -> f64 {
    raw + TAU * ((target - raw) / TAU).round()
}

/// Traces an adaptive fan from `source` (interior or boundary point).
pub fn boundary_fan(model: &MetricModel, source: Point, opts: &FanOptions) -> Result<BoundaryFan> {
    check_in_disc(source)?;
    let r2 = linalg::dot(source, source);
    let on_boundary = (r2 - 1.0).abs() < BOUNDARY_TOL;
    let theta_z = source[1].atan2(source[0]);
    let (e1, e2, a0, a1) = if on_boundary {
        // α is measured from the inward normal in the positively oriented
        // frame (ν, −T), so μ = −sin α.
        let (_, tg, nu) = boundary_frame(model, theta_z);
        (
            nu,
            linalg::scale(tg, -1.0),
            -FRAC_PI_2 + GRAZING_MARGIN,
            FRAC_PI_2 - GRAZING_MARGIN,
        )
    } else {
        let (e1, e2) = orthonormal_frame(model, source);
        (e1, e2, 0.0, TAU)
    };
    let launcher = Launcher {
        model,
        source,
        e1,
        e2,
        opts: TraceOptions {
            step: opts.step,
            record_every: usize::MAX,
            jacobi: true,
            ..TraceOptions::default()
        },
    };
    let n0 = opts.initial_rays.max(8);
    let alphas: Vec<f64> = if on_boundary {
        (0..n0)
            .map(|i| a0 + (a1 - a0) * i as f64 / (n0 - 1) as f64)
            .collect()
    } else {
        (0..n0).map(|i| TAU * i as f64 / n0 as f64).collect()
    };
    let mut fired: Vec<(f64, Ray)> = alphas
        .iter()
        .map(|&a| launcher.fire(a))
        .collect::<Result<_>>()?;

    loop {
        unwrap_rays(&mut fired);
        let len = fired.len();
        let mut inserts = Vec::new();
        let pairs = if on_boundary { len - 1 } else { len };
        for i in 0..pairs {
            let a = &fired[i].1;
            let b = if i + 1 < len {
                fired[i + 1].1
            } else {
                Ray {
                    alpha: fired[0].1.alpha + TAU,
                    beta: fired[0].1.beta + TAU,
                    ..fired[0].1
                }
            };
            let da = b.alpha - a.alpha;
            let defect =
                |y0: f64, m0: f64, y1: f64, m1: f64| (y1 - y0 - 0.5 * (m0 + m1) * da).abs();
            let split = (b.beta - a.beta).abs() > opts.max_dbeta
                || defect(a.beta, a.dbeta, b.beta, b.dbeta) > opts.max_secant_defect
                || defect(a.tau, a.dtau, b.tau, b.dtau) > opts.max_secant_defect;
            if split && da > 1e-9 {
                inserts.push(0.5 * (a.alpha + b.alpha));
            }
        }
        if inserts.is_empty() {
            break;
        }
        if len + inserts.len() > opts.max_rays {
            return Err(Error::Numeric(format!(
                "fan refinement exceeded {} rays",
                opts.max_rays
            )));
        }
        for a in inserts {
            let a = if on_boundary {
                a
            } else {
                linalg::wrap_angle(a)
            };
            fired.push(launcher.fire(a)?);
        }
        fired.sort_by(|x, y| x.1.alpha.total_cmp(&y.1.alpha));
    }

    let mut rays: Vec<Ray> = fired.into_iter().map(|(_, r)| r).collect();
    let increasing = rays.last().unwrap().beta > rays[0].beta;
    if !increasing {
        rays.reverse();
        for r in &mut rays {
            r.alpha = -r.alpha;
            r.dbeta = -r.dbeta;
            r.dtau = -r.dtau;
        }
    }
    if rays.iter().any(|r| !(r.dbeta > 0.0)) || rays.windows(2).any(|w| !(w[1].beta > w[0].beta)) {
        return Err(Error::Numeric(
            "exit map of the fan is not monotone; the metric is not simple near this source".into(),
        ));
    }
    if !on_boundary && !(rays[0].beta + TAU > rays.last().unwrap().beta) {
        return Err(Error::Numeric(
            "fan exit angles wind more than once around the boundary".into(),
        ));
    }
    if on_boundary {
        // Place the exit angles inside (θ_z, θ_z + 2π).
        let shift = theta_z + linalg::wrap_angle(rays[0].beta - theta_z) - rays[0].beta;
        for r in &mut rays {
            r.beta += shift;
        }
    }
    Ok(BoundaryFan {
        source,
        boundary_angle: on_boundary.then_some(theta_z),
        rays,
    })
}

/// Unwraps exit angles along the α order, predicting each from its
/// neighbour's derivative.
fn unwrap_rays(fired: &mut [(f64, Ray)]) {
    fired[0].1.beta = fired[0].0;
    for i in 1..fired.len() {
        let prev = fired[i - 1].1;
        let cur = fired[i].1;
        let da = cur.alpha - prev.alpha;
        let pred = prev.beta + 0.5 * (prev.dbeta + cur.dbeta) * da;
        fired[i].1.beta = unwrap_near(fired[i].0, pred);
    }
}

impl BoundaryFan {
    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }

    /// Distance from the source to the boundary point at angle `θ`.
    pub fn travel_time(&self, theta: f64) -> f64 {
        let rays = &self.rays;
        let first = rays[0];
        let last = *rays.last().unwrap();
        if let Some(tz) = self.boundary_angle {
            let t = tz + linalg::wrap_angle(theta - tz);
            if t <= first.beta {
                return if t == tz {
                    0.0
                } else {
                    first.tau * (t - tz) / (first.beta - tz)
                };
            }
            if t >= last.beta {
                return last.tau * (tz + TAU - t) / (tz + TAU - last.beta);
            }
            let i = rays.partition_point(|r| r.beta <= t) - 1;
            return interpolate(&rays[i], &rays[i + 1], t);
        }
        let t = first.beta + linalg::wrap_angle(theta - first.beta);
        if t >= last.beta {
            let wrapped = Ray {
                alpha: first.alpha + TAU,
                beta: first.beta + TAU,
                ..first
            };
            return interpolate(&last, &wrapped, t);
        }
        let i = rays.partition_point(|r| r.beta <= t) - 1;
        interpolate(&rays[i], &rays[i + 1], t)
    }

    pub fn travel_times(&self, angles: &[f64]) -> Vec<f64> {
        angles.iter().map(|&t| self.travel_time(t)).collect()
    }
}

fn hermite_scalar(y0: f64, m0: f64, y1: f64, m1: f64, s: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1,
        (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1,
    )
}

/// Solves `β(s) = target` on one interval and returns `τ(s)`.
fn interpolate(a: &Ray, b: &Ray, target: f64) -> f64 {
    let da = b.alpha - a.alpha;
    let (mb0, mb1) = (a.dbeta * da, b.dbeta * da);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut s = ((target - a.beta) / (b.beta - a.beta)).clamp(0.0, 1.0);
    for _ in 0..60 {
        let (f, df) = hermite_scalar(a.beta, mb0, b.beta, mb1, s);
        let r = f - target;
        if r > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        if r.abs() < 1e-15 {
            break;
        }
        let next = s - r / df;
        s = if df > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            break;
        }
    }
    hermite_scalar(a.tau, a.dtau * da, b.tau, b.dtau * da, s).0
}
