//! Self-maps of the closed unit disc used as gauge transformations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};

/// A diffeomorphism of the closed unit disc with an analytic Jacobian.
///
/// `Compose { outer, inner }` is `outer ∘ inner`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscDiffeo {
    Identity,
    Rotation {
        angle: f64,
    },
    /// `Φ(x) = x (1 + ε (1 − |x|²))`, the identity on the boundary circle.
    RadialBump {
        epsilon: f64,
    },
    /// A rotation applied after a radial bump; moves boundary points.
    BoundaryFree {
        angle: f64,
        epsilon: f64,
    },
    Compose {
        outer: Box<DiscDiffeo>,
        inner: Box<DiscDiffeo>,
    },
}

fn rotate(angle: f64, x: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

fn rotation_matrix(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

fn radial_bump(epsilon: f64, x: Vec2) -> (Vec2, Mat2) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = 1.0 + epsilon * (1.0 - r2);
    let y = [x[0] * s, x[1] * s];
    let j = [
        [
            s - 2.0 * epsilon * x[0] * x[0],
            -2.0 * epsilon * x[0] * x[1],
        ],
        [
            -2.0 * epsilon * x[1] * x[0],
            s - 2.0 * epsilon * x[1] * x[1],
        ],
    ];
    (y, j)
}

impl DiscDiffeo {
    pub fn compose(outer: DiscDiffeo, inner: DiscDiffeo) -> Self {
        DiscDiffeo::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.apply_with_jacobian(x).0
    }

    /// `DΦ(x)` with `J[i][j] = ∂Φᵢ/∂xⱼ`.
    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        self.apply_with_jacobian(x).1
    }

    pub fn apply_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        match self {
            DiscDiffeo::Identity => (x, [[1.0, 0.0], [0.0, 1.0]]),
            DiscDiffeo::Rotation { angle } => (rotate(*angle, x), rotation_matrix(*angle)),
            DiscDiffeo::RadialBump { epsilon } => radial_bump(*epsilon, x),
            DiscDiffeo::BoundaryFree { angle, epsilon } => {
                let (y, j) = radial_bump(*epsilon, x);
                (
                    rotate(*angle, y),
                    linalg::mat_mul(&rotation_matrix(*angle), &j),
                )
            }
            DiscDiffeo::Compose { outer, inner } => {
                let (y, ji) = inner.apply_with_jacobian(x);
                let (z, jo) = outer.apply_with_jacobian(y);
                (z, linalg::mat_mul(&jo, &ji))
            }
        }
    }

    /// Solves `Φ(x) = y` by Newton iteration seeded at `y`.
    pub fn inverse_apply(&self, y: Vec2) -> Result<Vec2> {
        match self {
            DiscDiffeo::Identity => return Ok(y),
            DiscDiffeo::Rotation { angle } => return Ok(rotate(-angle, y)),
            _ => {}
        }
        let mut x = y;
        for _ in 0..60 {
            let (fx, j) = self.apply_with_jacobian(x);
            let r = linalg::sub(fx, y);
            if linalg::norm(r) < 1e-15 {
                return Ok(x);
            }
            let dx = linalg::solve(&j, r).ok_or_else(|| {
                Error::Numeric("singular Jacobian while inverting diffeomorphism".into())
            })?;
            x = linalg::sub(x, dx);
        }
        let r = linalg::norm(linalg::sub(self.apply(x), y));
        if r < 1e-12 {
            Ok(x)
        } else {
            Err(Error::Numeric(format!(
                "diffeomorphism inversion did not converge (residual {r:.3e})"
            )))
        }
    }

    /// True when the map restricts to the identity on the unit circle.
    pub fn fixes_boundary(&self) -> bool {
        match self {
            DiscDiffeo::Identity | DiscDiffeo::RadialBump { .. } => true,
            DiscDiffeo::Rotation { angle } | DiscDiffeo::BoundaryFree { angle, .. } => {
                linalg::angle_diff(*angle, 0.0).abs() < 1e-15
            }
            DiscDiffeo::Compose { outer, inner } => (0..64).all(|k| {
                let t = std::f64::consts::TAU * k as f64 / 64.0;
                let p = [t.cos(), t.sin()];
                linalg::norm(linalg::sub(outer.apply(inner.apply(p)), p)) < 1e-12
            }),
        }
    }

    /// Parameter constraints plus a positive Jacobian determinant on a
    /// polar verification grid covering the closed disc.
    pub fn validate(&self) -> Result<()> {
        match self {
            DiscDiffeo::RadialBump { epsilon } | DiscDiffeo::BoundaryFree { epsilon, .. } => {
                if !epsilon.is_finite() || epsilon.abs() >= 0.5 {
                    return Err(Error::InvalidDiffeo(format!(
                        "radial bump requires |epsilon| < 1/2, got {epsilon}"
                    )));
                }
            }
            DiscDiffeo::Rotation { angle } if !angle.is_finite() => {
                return Err(Error::InvalidDiffeo("rotation angle must be finite".into()));
            }
            DiscDiffeo::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
            }
            _ => {}
        }
        for i in 0..=40 {
            let r = i as f64 / 40.0;
            for k in 0..72 {
                let t = std::f64::consts::TAU * k as f64 / 72.0;
                let x = [r * t.cos(), r * t.sin()];
                let d = linalg::det(&self.jacobian(x));
                if !(d > 0.0) {
                    return Err(Error::InvalidDiffeo(format!(
                        "Jacobian determinant {d:.3e} not positive at ({:.3}, {:.3})",
                        x[0], x[1]
                    )));
                }
            }
        }
        Ok(())
    }
}
