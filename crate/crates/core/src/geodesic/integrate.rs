//! Fixed-step RK4 integration of the geodesic equation, optionally coupled to
//! the scalar perpendicular Jacobi equation `j″ + K(γ) j = 0`.

use serde::{Deserialize, Serialize};

use super::{reversed_exit_vector, GeodesicTrace, PhasePoint, TraceSample, TraceStart};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};
use crate::metric::MetricModel;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_MAX_LENGTH: f64 = 100.0;
const EXIT_TOL: f64 = 1e-10;
/// Traces that wander this far outside the unit circle are abandoned.
const ESCAPE_RADIUS: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    pub step: f64,
    /// Arclength cap; exceeding it without exiting is a trapped geodesic.
    pub max_length: f64,
    /// Record every n-th step (the start and the end are always recorded).
    pub record_every: usize,
    /// Integrate the perpendicular Jacobi field with `j(0) = 0, j′(0) = 1`.
    pub jacobi: bool,
    /// Stop at this arclength, or at the boundary if it comes first.
    pub stop_at: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: DEFAULT_STEP,
            max_length: DEFAULT_MAX_LENGTH,
            record_every: 1,
            jacobi: false,
            stop_at: None,
        }
    }
}

/// Jacobi field summary along a trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiRecord {
    pub value: f64,
    pub derivative: f64,
    /// First positive arclength where `j` vanishes, if any.
    pub first_zero: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct State {
    x: Vec2,
    v: Vec2,
    j: f64,
    jp: f64,
}

#[inline]
fn deriv(model: &MetricModel, s: &State, jacobi: bool) -> State {
    let a = model.acceleration(s.x, s.v);
    let jpp = if jacobi {
        -model.gaussian_curvature_at(s.x) * s.j
    } else {
        0.0
    };
    State {
        x: s.v,
        v: a,
        j: s.jp,
        jp: jpp,
    }
}

#[inline]
fn axpy(s: &State, d: &State, h: f64) -> State {
    State {
        x: [s.x[0] + h * d.x[0], s.x[1] + h * d.x[1]],
        v: [s.v[0] + h * d.v[0], s.v[1] + h * d.v[1]],
        j: s.j + h * d.j,
        jp: s.jp + h * d.jp,
    }
}

#[inline]
fn rk4_step(model: &MetricModel, s: &State, h: f64, jacobi: bool) -> State {
    let k1 = deriv(model, s, jacobi);
    let k2 = deriv(model, &axpy(s, &k1, 0.5 * h), jacobi);
    let k3 = deriv(model, &axpy(s, &k2, 0.5 * h), jacobi);
    let k4 = deriv(model, &axpy(s, &k3, h), jacobi);
    let c = h / 6.0;
    State {
        x: [
            s.x[0] + c * (k1.x[0] + 2.0 * k2.x[0] + 2.0 * k3.x[0] + k4.x[0]),
            s.x[1] + c * (k1.x[1] + 2.0 * k2.x[1] + 2.0 * k3.x[1] + k4.x[1]),
        ],
        v: [
            s.v[0] + c * (k1.v[0] + 2.0 * k2.v[0] + 2.0 * k3.v[0] + k4.v[0]),
            s.v[1] + c * (k1.v[1] + 2.0 * k2.v[1] + 2.0 * k3.v[1] + k4.v[1]),
        ],
        j: s.j + c * (k1.j + 2.0 * k2.j + 2.0 * k3.j + k4.j),
        jp: s.jp + c * (k1.jp + 2.0 * k2.jp + 2.0 * k3.jp + k4.jp),
    }
}

#[inline]
fn level(x: Vec2) -> f64 {
    x[0] * x[0] + x[1] * x[1] - 1.0
}

/// Traces from a boundary or interior start with the default step and
/// every step recorded.
pub fn integrate_geodesic(
    model: &MetricModel,
    start: PhasePoint,
    step: f64,
) -> Result<GeodesicTrace> {
    let entry = if level(start.x).abs() < 1e-12 {
        TraceStart::Boundary(reversed_exit_vector(
            model,
            start.x,
            linalg::scale(start.v, -1.0),
        ))
    } else {
        TraceStart::Interior(start)
    };
    trace(
        model,
        start,
        entry,
        &TraceOptions {
            step,
            ..TraceOptions::default()
        },
    )
}

/// Integrates from `start` until the boundary exit, or until `opts.stop_at`
/// if that arclength comes first.
///
/// The exit is bracketed by a sign change of `|x|² − 1` across one step and
/// located by bisection on the length of a partial RK4 step.
pub fn trace(
    model: &MetricModel,
    start: PhasePoint,
    entry: TraceStart,
    opts: &TraceOptions,
) -> Result<GeodesicTrace> {
    let h = opts.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!(
            "integrator step must be positive, got {h}"
        )));
    }
    let speed = model.norm(start.x, start.v);
    if (speed - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "initial vector has metric length {speed}, expected 1"
        )));
    }
    let jacobi = opts.jacobi;
    let stride = opts.record_every.max(1);
    let mut s = State {
        x: start.x,
        v: start.v,
        j: 0.0,
        jp: 1.0,
    };
    let mut t = 0.0;
    let mut samples = vec![TraceSample { t, x: s.x, v: s.v }];
    let mut drift: f64 = 0.0;
    let mut first_zero = None;
    let mut steps = 0usize;
    let (end_state, end_t, exited) = loop {
        let dt = match opts.stop_at {
            Some(stop) => (stop - t).min(h),
            None if t > opts.max_length => {
                return Err(Error::TrappedGeodesic {
                    length: opts.max_length,
                })
            }
            None => h,
        };
        let last = matches!(opts.stop_at, Some(stop) if t + h >= stop);
        let s1 = if dt > 0.0 {
            rk4_step(model, &s, dt, jacobi)
        } else {
            s
        };
        if !(s1.x[0].is_finite() && s1.x[1].is_finite()) || linalg::norm(s1.x) > ESCAPE_RADIUS {
            return Err(Error::Numeric(format!(
                "geodesic left the disc neighbourhood at t = {t:.6}"
            )));
        }
        if level(s1.x) > 0.0 && dt > 0.0 {
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > EXIT_TOL {
                let mid = 0.5 * (lo + hi);
                if level(rk4_step(model, &s, mid, jacobi).x) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let de = 0.5 * (lo + hi);
            let se = rk4_step(model, &s, de, jacobi);
            note_zero(&mut first_zero, &s, &se, t, de);
            break (se, t + de, true);
        }
        note_zero(&mut first_zero, &s, &s1, t, dt);
        if last {
            break (s1, t + dt, false);
        }
        s = s1;
        t += h;
        steps += 1;
        if steps % stride == 0 {
            drift = drift.max((model.norm(s.x, s.v) - 1.0).abs());
            samples.push(TraceSample { t, x: s.x, v: s.v });
        }
    };
    drift = drift.max((model.norm(end_state.x, end_state.v) - 1.0).abs());
    if end_t > samples.last().map_or(0.0, |p| p.t) {
        samples.push(TraceSample {
            t: end_t,
            x: end_state.x,
            v: end_state.v,
        });
    }
    let exit = exited.then(|| reversed_exit_vector(model, end_state.x, end_state.v));
    Ok(GeodesicTrace {
        samples,
        length: end_t,
        entry,
        exit,
        jacobi: jacobi.then_some(JacobiRecord {
            value: end_state.j,
            derivative: end_state.jp,
            first_zero,
        }),
        max_speed_drift: drift,
    })
}

#[inline]
fn note_zero(first_zero: &mut Option<f64>, a: &State, b: &State, t: f64, h: f64) {
    if first_zero.is_none() && a.j > 0.0 && b.j <= 0.0 {
        *first_zero = Some(t + h * a.j / (a.j - b.j));
    }
}
