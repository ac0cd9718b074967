//! Simple Riemannian metrics on the closed unit disc.
//!
//! The model zoo is conformal to the Euclidean metric (`g = e^{2φ} δ`), plus
//! pullbacks of any model under a disc diffeomorphism. Conformal kinds carry
//! analytic derivatives of `φ`; pullbacks differentiate the pulled-back
//! metric by central finite differences with step `fd_step`.

mod diffeo;

use serde::{Deserialize, Serialize};

pub use diffeo::DiscDiffeo;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};

/// Points of the disc use plain Cartesian coordinates.
pub type Point = Vec2;

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Slack allowed when checking `|x| ≤ 1` for points placed on the boundary.
pub(crate) const DISC_SLACK: f64 = 1e-12;

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    /// `g = 4 (1 + K|x|²)⁻² δ`, constant Gaussian curvature `K`.
    ConstantCurvature {
        curvature: f64,
    },
    /// `g = n(x)² δ` with `n(x) = 1 + A exp(−|x − c|² / w²)`.
    ConformalBump {
        center: Point,
        amplitude: f64,
        width: f64,
    },
    /// `g = DΦᵀ g_base(Φ) DΦ`.
    Pullback {
        base: Box<MetricModel>,
        diffeo: DiscDiffeo,
    },
}

/// A Riemannian metric on the closed unit disc. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    #[serde(flatten)]
    pub kind: MetricKind,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

/// `φ`, `∇φ` and `Δφ` of a conformal factor `e^{2φ}`.
#[derive(Clone, Copy, Debug)]
pub struct ConformalJet {
    pub phi: f64,
    pub grad: Vec2,
    pub laplacian: f64,
}

/// Christoffel symbols of the second kind, indexed `[k][i][j]` for `Γᵏᵢⱼ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel(pub [[[f64; 2]; 2]; 2]);

impl Christoffel {
    /// `Γᵏᵢⱼ uⁱ wʲ`.
    #[inline]
    pub fn contract(&self, u: Vec2, w: Vec2) -> Vec2 {
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let g = &self.0[k];
            *o = g[0][0] * u[0] * w[0]
                + g[0][1] * u[0] * w[1]
                + g[1][0] * u[1] * w[0]
                + g[1][1] * u[1] * w[1];
        }
        out
    }

    pub fn from_metric_derivatives(g: &Mat2, dg: &[Mat2; 2]) -> Result<Self> {
        let ginv =
            linalg::inverse(g).ok_or_else(|| Error::Numeric("singular metric matrix".into()))?;
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for i in 0..2 {
                for j in i..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    gk[i][j] = 0.5 * s;
                    gk[j][i] = 0.5 * s;
                }
            }
        }
        Ok(Christoffel(gamma))
    }
}

impl MetricModel {
    pub fn euclidean() -> Self {
        MetricModel {
            kind: MetricKind::Euclidean,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn constant_curvature(curvature: f64) -> Result<Self> {
        let m = MetricModel {
            kind: MetricKind::ConstantCurvature { curvature },
            fd_step: DEFAULT_FD_STEP,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn conformal_bump(center: Point, amplitude: f64, width: f64) -> Result<Self> {
        let m = MetricModel {
            kind: MetricKind::ConformalBump {
                center,
                amplitude,
                width,
            },
            fd_step: DEFAULT_FD_STEP,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        self.fd_step = fd_step;
        self
    }

    /// Checks parameter ranges and positive definiteness on a sample grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::Config(format!(
                "fd_step must be positive, got {}",
                self.fd_step
            )));
        }
        match &self.kind {
            MetricKind::Euclidean => {}
            MetricKind::ConstantCurvature { curvature } => {
                if !(*curvature > -1.0 && *curvature < 1.0) {
                    return Err(Error::Config(format!(
                        "constant curvature must lie in (-1, 1), got {curvature}"
                    )));
                }
            }
            MetricKind::ConformalBump {
                center,
                amplitude,
                width,
            } => {
                if !(*amplitude > -1.0 && amplitude.is_finite()) {
                    return Err(Error::Config(format!(
                        "bump amplitude must exceed -1, got {amplitude}"
                    )));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::Config(format!(
                        "bump width must be positive, got {width}"
                    )));
                }
                if !(center[0].is_finite() && center[1].is_finite()) {
                    return Err(Error::Config("bump center must be finite".into()));
                }
            }
            MetricKind::Pullback { base, diffeo } => {
                base.validate()?;
                diffeo.validate()?;
            }
        }
        for i in 0..=10 {
            let r = i as f64 / 10.0;
            for k in 0..24 {
                let t = std::f64::consts::TAU * k as f64 / 24.0;
                let g = self.metric_at([r * t.cos(), r * t.sin()]);
                let (lo, _) = linalg::sym_eigenvalues(&g);
                if !(lo > 0.0 && lo.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "metric not positive definite at radius {r:.2}, angle {t:.2}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_conformal(&self) -> bool {
        !matches!(self.kind, MetricKind::Pullback { .. })
    }

    /// The conformal exponent at `x`, for the conformal kinds.
    pub fn conformal_jet(&self, x: Point) -> Option<ConformalJet> {
        match &self.kind {
            MetricKind::Euclidean => Some(ConformalJet {
                phi: 0.0,
                grad: [0.0, 0.0],
                laplacian: 0.0,
            }),
            MetricKind::ConstantCurvature { curvature } => {
                let k = *curvature;
                let q = 1.0 + k * (x[0] * x[0] + x[1] * x[1]);
                Some(ConformalJet {
                    phi: std::f64::consts::LN_2 - q.ln(),
                    grad: [-2.0 * k * x[0] / q, -2.0 * k * x[1] / q],
                    laplacian: -4.0 * k / (q * q),
                })
            }
            MetricKind::ConformalBump {
                center,
                amplitude,
                width,
            } => {
                let d = linalg::sub(x, *center);
                let w2 = width * width;
                let r2 = linalg::dot(d, d);
                let e = amplitude * (-r2 / w2).exp();
                let n = 1.0 + e;
                let gn = [-2.0 * e * d[0] / w2, -2.0 * e * d[1] / w2];
                let lap_n = e * (4.0 * r2 / (w2 * w2) - 4.0 / w2);
                Some(ConformalJet {
                    phi: n.ln(),
                    grad: [gn[0] / n, gn[1] / n],
                    laplacian: lap_n / n - linalg::dot(gn, gn) / (n * n),
                })
            }
            MetricKind::Pullback { .. } => None,
        }
    }

    /// `∇φ` alone, the only part of the jet the geodesic equation needs.
    #[inline]
    pub fn conformal_grad(&self, x: Point) -> Option<Vec2> {
        match &self.kind {
            MetricKind::Euclidean => Some([0.0, 0.0]),
            MetricKind::ConstantCurvature { curvature } => {
                let k = *curvature;
                let q = 1.0 + k * (x[0] * x[0] + x[1] * x[1]);
                Some([-2.0 * k * x[0] / q, -2.0 * k * x[1] / q])
            }
            MetricKind::ConformalBump {
                center,
                amplitude,
                width,
            } => {
                let d = linalg::sub(x, *center);
                let w2 = width * width;
                let e = amplitude * (-linalg::dot(d, d) / w2).exp();
                let f = -2.0 * e / (w2 * (1.0 + e));
                Some([f * d[0], f * d[1]])
            }
            MetricKind::Pullback { .. } => None,
        }
    }

    /// `g(x)` without the closed-disc check. Every model extends smoothly a
    /// little past the unit circle, which the integrator and the finite
    /// differences rely on.
    pub fn metric_at(&self, x: Point) -> Mat2 {
        match &self.kind {
            MetricKind::Pullback { base, diffeo } => {
                let (y, j) = diffeo.apply_with_jacobian(x);
                let gb = base.metric_at(y);
                let m = linalg::mat_mul(&linalg::transpose(&j), &linalg::mat_mul(&gb, &j));
                let off = 0.5 * (m[0][1] + m[1][0]);
                [[m[0][0], off], [off, m[1][1]]]
            }
            _ => {
                let jet = self.conformal_jet(x).expect("conformal kind");
                let f = (2.0 * jet.phi).exp();
                [[f, 0.0], [0.0, f]]
            }
        }
    }

    /// `g(x)` for `|x| ≤ 1`.
    pub fn eval_metric(&self, x: Point) -> Result<Mat2> {
        check_in_disc(x)?;
        Ok(self.metric_at(x))
    }

    /// `∂ₖ gᵢⱼ`, indexed `[k][i][j]`.
    pub fn metric_derivatives_at(&self, x: Point) -> [Mat2; 2] {
        if let Some(jet) = self.conformal_jet(x) {
            let f = (2.0 * jet.phi).exp();
            let mut dg = [[[0.0; 2]; 2]; 2];
            for (k, dk) in dg.iter_mut().enumerate() {
                let v = 2.0 * f * jet.grad[k];
                dk[0][0] = v;
                dk[1][1] = v;
            }
            return dg;
        }
        self.metric_derivatives_fd(x)
    }

    /// Fourth-order central finite differences of `g` with step `fd_step`.
    /// The second-order stencil leaves an `O(h²)` error in the Christoffels
    /// that shows up as unit-speed drift near 1e−8 over a full chord.
    pub fn metric_derivatives_fd(&self, x: Point) -> [Mat2; 2] {
        let h = self.fd_step;
        let mut dg = [[[0.0; 2]; 2]; 2];
        for (k, dk) in dg.iter_mut().enumerate() {
            let at = |s: f64| {
                let mut y = x;
                y[k] += s * h;
                self.metric_at(y)
            };
            let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
            for i in 0..2 {
                for j in 0..2 {
                    dk[i][j] = (m2[i][j] - p2[i][j] + 8.0 * (p1[i][j] - m1[i][j])) / (12.0 * h);
                }
            }
        }
        dg
    }

    /// Christoffel symbols without the closed-disc check.
    pub fn christoffel_at(&self, x: Point) -> Result<Christoffel> {
        if let Some(jet) = self.conformal_jet(x) {
            return Ok(conformal_christoffel(jet.grad));
        }
        let g = self.metric_at(x);
        let dg = self.metric_derivatives_fd(x);
        Christoffel::from_metric_derivatives(&g, &dg)
    }

    pub fn christoffel(&self, x: Point) -> Result<Christoffel> {
        check_in_disc(x)?;
        self.christoffel_at(x)
    }

    /// Geodesic acceleration `−Γᵏᵢⱼ vⁱ vʲ`.
    #[inline]
    pub fn acceleration(&self, x: Point, v: Vec2) -> Vec2 {
        if let Some(grad) = self.conformal_grad(x) {
            // Γ(v, v) = 2 (∇φ·v) v − |v|² ∇φ for conformal metrics.
            let gv = linalg::dot(grad, v);
            let vv = linalg::dot(v, v);
            return [
                vv * grad[0] - 2.0 * gv * v[0],
                vv * grad[1] - 2.0 * gv * v[1],
            ];
        }
        match self.christoffel_at(x) {
            Ok(c) => linalg::scale(c.contract(v, v), -1.0),
            Err(_) => [f64::NAN, f64::NAN],
        }
    }

    /// Gaussian curvature. Conformal kinds use `K = −e^{−2φ} Δφ`; a pullback
    /// carries the base curvature at the image point.
    pub fn gaussian_curvature_at(&self, x: Point) -> f64 {
        match &self.kind {
            MetricKind::Pullback { base, diffeo } => base.gaussian_curvature_at(diffeo.apply(x)),
            _ => {
                let jet = self.conformal_jet(x).expect("conformal kind");
                -(-2.0 * jet.phi).exp() * jet.laplacian
            }
        }
    }

    /// `⟨a, b⟩_g` at `x`.
    #[inline]
    pub fn inner(&self, x: Point, a: Vec2, b: Vec2) -> f64 {
        linalg::bilinear(&self.metric_at(x), a, b)
    }

    #[inline]
    pub fn norm(&self, x: Point, a: Vec2) -> f64 {
        self.inner(x, a, a).max(0.0).sqrt()
    }

    /// The Riemannian length of the straight segment `a → b`, by Simpson's rule.
    pub fn segment_length(&self, a: Point, b: Point, panels: usize) -> f64 {
        let panels = panels.max(1) * 2;
        let d = linalg::sub(b, a);
        let h = 1.0 / panels as f64;
        let mut s = 0.0;
        for i in 0..=panels {
            let x = linalg::add(a, linalg::scale(d, i as f64 * h));
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * self.norm(x, d);
        }
        s * h / 3.0
    }

    /// Pulls this metric back through `diffeo`.
    pub fn pullback(&self, diffeo: DiscDiffeo) -> Result<Self> {
        pullback_metric(self, diffeo)
    }
}

/// `Φ*g`. Rejects maps that fail the Jacobian-positivity check.
pub fn pullback_metric(base: &MetricModel, diffeo: DiscDiffeo) -> Result<MetricModel> {
    diffeo.validate()?;
    Ok(MetricModel {
        kind: MetricKind::Pullback {
            base: Box::new(base.clone()),
            diffeo,
        },
        fd_step: base.fd_step,
    })
}

/// `Γᵏᵢⱼ = δᵢₖ ∂ⱼφ + δⱼₖ ∂ᵢφ − δᵢⱼ ∂ₖφ`.
pub fn conformal_christoffel(grad: Vec2) -> Christoffel {
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                if i == k {
                    v += grad[j];
                }
                if j == k {
                    v += grad[i];
                }
                if i == j {
                    v -= grad[k];
                }
                gk[i][j] = v;
            }
        }
    }
    Christoffel(gamma)
}

pub(crate) fn check_in_disc(x: Point) -> Result<()> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if !r2.is_finite() || r2 > 1.0 + DISC_SLACK {
        return Err(Error::Domain(format!(
            "point ({}, {}) lies outside the closed unit disc",
            x[0], x[1]
        )));
    }
    Ok(())
}
