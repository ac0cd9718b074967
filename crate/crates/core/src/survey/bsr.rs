//! Broken scattering relations on a product grid of inward boundary vectors.
//!
//! Two inward vectors `v, w` are related with total time `T = t_v + t_w`
//! when their geodesics cross at `γ_v(t_v) = γ_w(t_w)`. The table also
//! stores `T(v, v) = 2 τ_exit(v)`, the supremum of the family for a vector
//! paired with itself, and `T(v, σ(v)) = τ_exit(v)` for reversal pairs.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{
    intersect_all, lift_inward, trace, BoundaryVector, GeodesicTrace, Intersection, TraceOptions,
    TraceStart, DEFAULT_INTERSECTION_TOL, MAX_FAN_MU,
};
use crate::metric::MetricModel;

/// Product grid `θ_a = 2πa/m_θ`, `μ_b = −μ_max + 2μ_max b/(m_μ − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    pub m_theta: usize,
    pub m_mu: usize,
    pub mu_max: f64,
}

impl DirectionGrid {
    pub fn new(m_theta: usize, m_mu: usize, mu_max: f64) -> Result<Self> {
        let g = DirectionGrid {
            m_theta,
            m_mu,
            mu_max,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_theta < 4 || self.m_mu < 3 {
            return Err(Error::Config(format!(
                "direction grid needs m_theta >= 4 and m_mu >= 3, got {} x {}",
                self.m_theta, self.m_mu
            )));
        }
        if !(self.mu_max > 0.0 && self.mu_max <= MAX_FAN_MU) {
            return Err(Error::Config(format!(
                "direction grid needs 0 < mu_max <= {MAX_FAN_MU}, got {}",
                self.mu_max
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m_theta * self.m_mu
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, a: usize) -> f64 {
        TAU * a as f64 / self.m_theta as f64
    }

    pub fn mu(&self, b: usize) -> f64 {
        -self.mu_max + 2.0 * self.mu_max * b as f64 / (self.m_mu - 1) as f64
    }

    pub fn theta_spacing(&self) -> f64 {
        TAU / self.m_theta as f64
    }

    pub fn mu_spacing(&self) -> f64 {
        2.0 * self.mu_max / (self.m_mu - 1) as f64
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.m_mu + b
    }

    /// `(a, b)` of a product-grid index.
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.m_mu, index % self.m_mu)
    }

    pub fn vector(&self, index: usize) -> BoundaryVector {
        let (a, b) = self.cell(index);
        BoundaryVector {
            theta: self.theta(a),
            mu: self.mu(b),
        }
    }

    /// Column of the normal direction `μ = 0`, present when `m_μ` is odd.
    pub fn normal_column(&self) -> Option<usize> {
        (self.m_mu % 2 == 1).then_some(self.m_mu / 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BsrOptions {
    pub step: f64,
    /// Trace samples kept for intersection search, every n-th step.
    pub record_every: usize,
    /// Endpoint tolerance for recognising reversal pairs.
    pub tol: f64,
    /// Also trace the reversed exit vector of every grid direction, so that
    /// each grid geodesic meets its own reversal inside the table.
    pub reversal_images: bool,
}

impl Default for BsrOptions {
    fn default() -> Self {
        BsrOptions {
            step: crate::geodesic::DEFAULT_STEP,
            record_every: 20,
            tol: DEFAULT_INTERSECTION_TOL,
            reversal_images: true,
        }
    }
}

/// One stored relation `T(i, j)` with `i ≤ j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub i: u32,
    pub j: u32,
    pub t: f64,
}

/// Symmetric sparse table of broken scattering total times over a list of
/// directions whose first `grid.len()` members are the product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenScatteringTable {
    pub grid: DirectionGrid,
    pub directions: Vec<BoundaryVector>,
    pub tol: f64,
    pub metric: Option<MetricModel>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl BrokenScatteringTable {
    /// Builds the table from upper-triangle entries, checking indices,
    /// positivity and uniqueness.
    pub fn from_entries(
        grid: DirectionGrid,
        directions: Vec<BoundaryVector>,
        entries: &[Entry],
        tol: f64,
        metric: Option<MetricModel>,
    ) -> Result<Self> {
        grid.validate()?;
        let n = directions.len();
        if n < grid.len() {
            return Err(Error::Shape(format!(
                "table lists {n} directions but the grid has {}",
                grid.len()
            )));
        }
        let mut counts = vec![0usize; n + 1];
        for e in entries {
            let (i, j) = (e.i as usize, e.j as usize);
            if i > j || j >= n {
                return Err(Error::Shape(format!(
                    "entry ({i}, {j}) outside the upper triangle of {n} directions"
                )));
            }
            if !(e.t > 0.0 && e.t.is_finite()) {
                return Err(Error::Domain(format!(
                    "entry ({i}, {j}) has non-positive total time {}",
                    e.t
                )));
            }
            counts[i + 1] += 1;
            if i != j {
                counts[j + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0u32; row_ptr[n]];
        let mut values = vec![0.0; row_ptr[n]];
        for e in entries {
            let (i, j) = (e.i as usize, e.j as usize);
            cols[fill[i]] = e.j;
            values[fill[i]] = e.t;
            fill[i] += 1;
            if i != j {
                cols[fill[j]] = e.i;
                values[fill[j]] = e.t;
                fill[j] += 1;
            }
        }
        for r in 0..n {
            let span = row_ptr[r]..row_ptr[r + 1];
            let mut row: Vec<(u32, f64)> = cols[span.clone()]
                .iter()
                .copied()
                .zip(values[span.clone()].iter().copied())
                .collect();
            row.sort_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Shape(format!("duplicate entry in row {r}")));
            }
            for (k, (c, v)) in span.zip(row) {
                cols[k] = c;
                values[k] = v;
            }
        }
        Ok(BrokenScatteringTable {
            grid,
            directions,
            tol,
            metric,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `T(i, j)` if the pair is related.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self, i: usize) -> Option<f64> {
        self.get(i, i)
    }

    /// Sorted column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.values[span])
    }

    /// Stored entries with `i ≤ j`, ordered by `(i, j)`.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let (cols, vals) = self.row(i);
            for (&j, &t) in cols.iter().zip(vals) {
                if j as usize >= i {
                    out.push(Entry { i: i as u32, j, t });
                }
            }
        }
        out
    }

    pub fn entry_count(&self) -> usize {
        (self.cols.len() + self.diagonal_count()) / 2
    }

    fn diagonal_count(&self) -> usize {
        (0..self.len())
            .filter(|&i| self.diagonal(i).is_some())
            .count()
    }
}

fn trace_direction(
    model: &MetricModel,
    bv: BoundaryVector,
    opts: &TraceOptions,
) -> Result<GeodesicTrace> {
    let p = lift_inward(model, bv)?;
    trace(model, p, TraceStart::Boundary(bv), opts)
}

/// Traces every grid direction (and, optionally, its reversed exit vector),
/// intersects all pairs and tabulates the total times.
pub fn make_broken_scattering_data(
    model: &MetricModel,
    grid: &DirectionGrid,
    opts: &BsrOptions,
) -> Result<BrokenScatteringTable> {
    grid.validate()?;
    let topts = TraceOptions {
        step: opts.step,
        record_every: opts.record_every.max(1),
        ..TraceOptions::default()
    };
    let mut directions: Vec<BoundaryVector> = (0..grid.len()).map(|k| grid.vector(k)).collect();
    let mut traces: Vec<GeodesicTrace> = directions
        .par_iter()
        .map(|&bv| trace_direction(model, bv, &topts))
        .collect::<Result<_>>()?;

    if opts.reversal_images {
        let close = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]) <= opts.tol;
        let images: Vec<BoundaryVector> = traces
            .iter()
            .filter_map(|tr| {
                let exit = tr.exit.expect("boundary traces end at an exit");
                // The reversal is already on the grid when a nearby grid
                // direction retraces this geodesic.
                let a = (exit.theta.rem_euclid(TAU) / grid.theta_spacing()).round() as usize
                    % grid.m_theta;
                let b = ((exit.mu + grid.mu_max) / grid.mu_spacing()).round();
                let on_grid = b >= 0.0 && (b as usize) < grid.m_mu && {
                    let c = &traces[grid.index(a, b as usize)];
                    close(c.start().x, tr.end().x) && close(c.end().x, tr.start().x)
                };
                (!on_grid).then_some(exit)
            })
            .collect();
        let extra: Vec<GeodesicTrace> = images
            .par_iter()
            .map(|&bv| trace_direction(model, bv, &topts))
            .collect::<Result<_>>()?;
        directions.extend(images);
        traces.extend(extra);
    }

    let mut entries: Vec<Entry> = traces
        .iter()
        .enumerate()
        .map(|(i, tr)| Entry {
            i: i as u32,
            j: i as u32,
            t: 2.0 * tr.length,
        })
        .collect();
    for hit in intersect_all(&traces, opts.tol) {
        let t = match hit.hit {
            Intersection::Point { t_a, t_b, .. } => t_a + t_b,
            Intersection::ReversalPair => {
                0.5 * (traces[hit.a as usize].length + traces[hit.b as usize].length)
            }
            Intersection::Identical => {
                return Err(Error::Numeric(format!(
                    "directions {} and {} trace the same geodesic",
                    hit.a, hit.b
                )))
            }
            Intersection::None => continue,
        };
        entries.push(Entry {
            i: hit.a,
            j: hit.b,
            t,
        });
    }
    BrokenScatteringTable::from_entries(*grid, directions, &entries, opts.tol, Some(model.clone()))
}
