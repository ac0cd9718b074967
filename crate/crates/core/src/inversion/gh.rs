//! Exact Gromov–Hausdorff distance of very small metric spaces.
//!
//! Every correspondence contains the union of the graphs of some pair of
//! maps `f: X → Y`, `g: Y → X`, and distortion grows with the relation, so
//! `d_GH = ½ min_{f,g} max(dis f, dis g, codis(f, g))` with
//! `codis(f, g) = max_{x,y} |d_X(x, g(y)) − d_Y(f(x), y)|`. The minimum is
//! found by depth-first enumeration of both maps, pruned by the best value
//! so far.

use super::FiniteMetricSpace;
use crate::error::{Error, Result};

/// Largest space handled by the exhaustive search.
pub const MAX_EXACT_POINTS: usize = 7;

struct Search<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    f: Vec<usize>,
    g: Vec<usize>,
    best: f64,
}

impl Search<'_> {
    fn assign_f(&mut self, i: usize, dis: f64) {
        if i == self.x.len() {
            self.assign_g(0, dis);
            return;
        }
        for fy in 0..self.y.len() {
            let mut d = dis;
            for k in 0..i {
                d = d.max((self.x.get(i, k) - self.y.get(fy, self.f[k])).abs());
                if d >= self.best {
                    break;
                }
            }
            if d < self.best {
                self.f[i] = fy;
                self.assign_f(i + 1, d);
            }
        }
    }

    fn assign_g(&mut self, j: usize, dis: f64) {
        if j == self.y.len() {
            self.best = dis;
            return;
        }
        for gx in 0..self.x.len() {
            let mut d = dis;
            for l in 0..j {
                d = d.max((self.y.get(j, l) - self.x.get(gx, self.g[l])).abs());
            }
            for xi in 0..self.x.len() {
                d = d.max((self.x.get(xi, gx) - self.y.get(self.f[xi], j)).abs());
            }
            if d < self.best {
                self.g[j] = gx;
                self.assign_g(j + 1, d);
            }
        }
    }
}

/// Exact `d_GH(X, Y)` for spaces of at most [`MAX_EXACT_POINTS`] points.
pub fn exact_gromov_hausdorff(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain(
            "Gromov–Hausdorff distance needs nonempty spaces".into(),
        ));
    }
    if x.len() > MAX_EXACT_POINTS || y.len() > MAX_EXACT_POINTS {
        return Err(Error::Config(format!(
            "exact Gromov–Hausdorff search is limited to {MAX_EXACT_POINTS} points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    // Any correspondence has distortion at most the larger diameter; the
    // margin lets the search reach a leaf even when that bound is attained.
    let bound = x.diameter().max(y.diameter());
    let mut s = Search {
        x,
        y,
        f: vec![0; x.len()],
        g: vec![0; y.len()],
        best: bound * (1.0 + 1e-12) + 1e-300,
    };
    s.assign_f(0, 0.0);
    Ok(0.5 * s.best.min(bound))
}
