//! Reconstruction from unlabeled boundary data: sup-norm geometry of data
//! sets, Hausdorff and Gromov–Hausdorff comparisons, the reduction from
//! broken scattering relations to travel time data, and the distance of data
//! sets modulo boundary diffeomorphisms.

mod bsr;
mod diffeo;
mod gh;

pub use bsr::{
    bsr_exit_time, bsr_scattering_relation, bsr_to_travel_time_data, bsr_travel_times,
    label_points, recover_lens, AngularFill, Coverage, ELabel, LensOptions, Reconstruction,
    ReconstructionOptions, RecoveredLensData,
};
pub use diffeo::{diffeo_invariant_distance, CircleDiffeo, DiffeoFit, DiffeoSearchOptions};
pub use gh::exact_gromov_hausdorff;

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{BoundaryGrid, Dataset, TravelTimeData, TravelTimeDifferenceData};

/// Triangle-inequality defects above this mark a data set as inconsistent.
pub const INCONSISTENCY_THRESHOLD: f64 = 1e-4;

/// Which data map produced the sampled functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Travel time functions `r_p`, compared in the sup norm over the grid.
    Ttd,
    /// Difference potentials `u_p`, compared in the sup norm of
    /// `u_p(θ_i) − u_p(θ_j)` over the grid square.
    Ttdd,
}

/// A data set as a cloud of sampled boundary functions.
#[derive(Clone, Debug, PartialEq)]
pub struct DataCloud {
    pub mode: Mode,
    pub grid: BoundaryGrid,
    pub rows: Vec<Vec<f64>>,
}

impl DataCloud {
    pub fn from_travel_time_data(d: &TravelTimeData) -> Self {
        DataCloud {
            mode: Mode::Ttd,
            grid: d.grid,
            rows: d.functions.iter().map(|f| f.values.clone()).collect(),
        }
    }

    pub fn from_difference_data(d: &TravelTimeDifferenceData) -> Self {
        DataCloud {
            mode: Mode::Ttdd,
            grid: d.grid,
            rows: d.functions.iter().map(|f| f.values.clone()).collect(),
        }
    }

    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        match d {
            Dataset::TravelTime(t) => Ok(Self::from_travel_time_data(t)),
            Dataset::TravelTimeDifference(t) => Ok(Self::from_difference_data(t)),
            Dataset::BrokenScattering(_) => Err(Error::Config(
                "a broken scattering table is not a cloud of boundary functions".into(),
            )),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check_compatible(&self, other: &DataCloud) -> Result<()> {
        if self.mode != other.mode || self.grid != other.grid {
            return Err(Error::Shape(format!(
                "cannot compare {:?} data on {} angles with {:?} data on {} angles",
                self.mode, self.grid.m, other.mode, other.grid.m
            )));
        }
        Ok(())
    }

    /// Distance between row `i` of `self` and row `j` of `other`, exact
    /// when below `cutoff` and otherwise some value `≥ cutoff`.
    fn bounded(&self, i: usize, other: &DataCloud, j: usize, cutoff: f64) -> f64 {
        match self.mode {
            Mode::Ttd => bounded_sup(&self.rows[i], &other.rows[j], cutoff),
            Mode::Ttdd => bounded_oscillation(&self.rows[i], &other.rows[j], cutoff),
        }
    }

    fn distance(&self, i: usize, other: &DataCloud, j: usize) -> f64 {
        self.bounded(i, other, j, f64::INFINITY)
    }
}

fn bounded_sup(f: &[f64], g: &[f64], cutoff: f64) -> f64 {
    let mut m: f64 = 0.0;
    for (chunk_f, chunk_g) in f.chunks(32).zip(g.chunks(32)) {
        for (a, b) in chunk_f.iter().zip(chunk_g) {
            m = m.max((a - b).abs());
        }
        if m >= cutoff {
            return m;
        }
    }
    m
}

/// `max_{i,j} |δ_i − δ_j| = max δ − min δ` for `δ = u − w`.
fn bounded_oscillation(u: &[f64], w: &[f64], cutoff: f64) -> f64 {
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (chunk_u, chunk_w) in u.chunks(32).zip(w.chunks(32)) {
        for (a, b) in chunk_u.iter().zip(chunk_w) {
            let d = a - b;
            hi = hi.max(d);
            lo = lo.min(d);
        }
        if hi - lo >= cutoff {
            return hi - lo;
        }
    }
    hi - lo
}

fn same_length(f: &[f64], g: &[f64]) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!(
            "functions sampled on {} and {} angles",
            f.len(),
            g.len()
        )));
    }
    Ok(())
}

/// `max_j |f(θ_j) − g(θ_j)|`.
pub fn sup_norm_distance(f: &[f64], g: &[f64]) -> Result<f64> {
    same_length(f, g)?;
    Ok(bounded_sup(f, g, f64::INFINITY))
}

/// Sup norm over the grid square of the difference of two difference
/// functions given by their potentials.
pub fn difference_sup_norm_distance(u: &[f64], w: &[f64]) -> Result<f64> {
    same_length(u, w)?;
    Ok(bounded_oscillation(u, w, f64::INFINITY))
}

/// `sup_{a∈A} inf_{b∈B} ‖a − b‖` together with the nearest row of `B`
/// found for each row of `A`. Rows whose nearest distance cannot raise the
/// running maximum stop searching early, so their reported neighbour is
/// only a good one, not necessarily the best. `hints` seeds each search.
pub(crate) fn directed_hausdorff(
    a: &DataCloud,
    b: &DataCloud,
    hints: Option<&[usize]>,
) -> (f64, Vec<usize>) {
    // Non-negative floats order like their bit patterns.
    let h = AtomicU64::new(0f64.to_bits());
    let near = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let first = hints.map_or(0, |hs| hs[i]);
            let mut best = a.distance(i, b, first);
            let mut arg = first;
            if best > f64::from_bits(h.load(Ordering::Relaxed)) {
                for j in (0..b.len()).filter(|&j| j != first) {
                    let d = a.bounded(i, b, j, best);
                    if d < best {
                        best = d;
                        arg = j;
                        if best <= f64::from_bits(h.load(Ordering::Relaxed)) {
                            break;
                        }
                    }
                }
            }
            h.fetch_max(best.to_bits(), Ordering::Relaxed);
            arg
        })
        .collect();
    (f64::from_bits(h.into_inner()), near)
}

/// Hausdorff distance between two data sets in the sampled sup norm.
pub fn hausdorff_distance(a: &DataCloud, b: &DataCloud) -> Result<f64> {
    a.check_compatible(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(
            "Hausdorff distance needs two nonempty data sets".into(),
        ));
    }
    Ok(directed_hausdorff(a, b, None)
        .0
        .max(directed_hausdorff(b, a, None).0))
}

/// Finitely many points with a symmetric distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    k: usize,
    d: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Checks exact symmetry, a zero diagonal and non-negative entries.
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let k = matrix.len();
        let mut d = Vec::with_capacity(k * k);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            d.extend_from_slice(row);
        }
        let s = FiniteMetricSpace { k, d };
        for i in 0..k {
            if s.get(i, i) != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if s.get(i, j) != s.get(j, i) || !(s.get(i, j) >= 0.0) {
                    return Err(Error::Domain(format!(
                        "entries ({i}, {j}) are not a symmetric distance"
                    )));
                }
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.k + j]
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.d.chunks(self.k.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Largest `d(i, k) − d(i, j) − d(j, k)` over all triples.
    pub fn triangle_defect(&self) -> f64 {
        let k = self.k;
        (0..k)
            .into_par_iter()
            .map(|i| {
                let mut worst: f64 = 0.0;
                for j in 0..k {
                    let dij = self.get(i, j);
                    for l in 0..k {
                        worst = worst.max(self.get(i, l) - dij - self.get(j, l));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// A warning when the triangle inequality fails beyond
    /// [`INCONSISTENCY_THRESHOLD`], which points at an insufficient grid or
    /// a non-simple metric.
    pub fn inconsistency_warning(&self) -> Option<String> {
        let t = self.triangle_defect();
        (t > INCONSISTENCY_THRESHOLD)
            .then(|| format!("inconsistent data: triangle inequality violated by {t:.3e}"))
    }

    /// The subspace on the listed points.
    pub fn subspace(&self, idx: &[usize]) -> FiniteMetricSpace {
        let k = idx.len();
        let mut d = Vec::with_capacity(k * k);
        for &i in idx {
            d.extend(idx.iter().map(|&j| self.get(i, j)));
        }
        FiniteMetricSpace { k, d }
    }
}

/// Pairwise sup-norm distances of the functions: the interior geometry
/// reconstructed from unlabeled data.
pub fn embed_as_metric_space(cloud: &DataCloud) -> Result<FiniteMetricSpace> {
    if cloud.is_empty() {
        return Err(Error::Domain("cannot embed an empty data set".into()));
    }
    let k = cloud.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (0..k)
                .map(|j| {
                    if j < i {
                        0.0
                    } else {
                        cloud.distance(i, cloud, j)
                    }
                })
                .collect()
        })
        .collect();
    let mut d = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            d[i * k + j] = rows[i][j];
            d[j * k + i] = rows[i][j];
        }
    }
    Ok(FiniteMetricSpace { k, d })
}

/// Outcome of the boundary-fixing check: a function vanishing at some
/// angle comes from a boundary source, and must be matched to a function
/// vanishing at the same angle up to one grid cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub boundary_functions: usize,
    /// Rows of `A` whose match does not vanish near the same angle.
    pub failures: Vec<usize>,
}

impl BoundaryCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Pairs `(i, j)` matching every point of `A` to a point of `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
    pub distortion: f64,
    pub boundary_check: BoundaryCheck,
    /// Set when the distortion exceeds the configured flag level or the
    /// boundary-fixing check fails.
    pub flagged: bool,
}

impl Correspondence {
    /// A correspondence with its distortion measured on `a` and `b`.
    pub fn new(
        pairs: Vec<(usize, usize)>,
        a: &FiniteMetricSpace,
        b: &FiniteMetricSpace,
    ) -> Result<Self> {
        let distortion = distortion(&pairs, a, b)?;
        Ok(Correspondence {
            pairs,
            distortion,
            boundary_check: BoundaryCheck::default(),
            flagged: false,
        })
    }
}

fn distortion(
    pairs: &[(usize, usize)],
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
) -> Result<f64> {
    let mut covered = vec![false; a.len()];
    for &(i, j) in pairs {
        if i >= a.len() || j >= b.len() {
            return Err(Error::Shape(format!(
                "pair ({i}, {j}) outside {} x {} points",
                a.len(),
                b.len()
            )));
        }
        covered[i] = true;
    }
    if let Some(i) = covered.iter().position(|c| !c) {
        return Err(Error::Shape(format!(
            "correspondence misses point {i} of the first space"
        )));
    }
    Ok(pairs
        .par_iter()
        .map(|&(i, j)| {
            pairs
                .iter()
                .map(|&(k, l)| (a.get(i, k) - b.get(j, l)).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    /// Travel times at or below this value mark a boundary source.
    pub boundary_tol: f64,
    /// Distortions above this value flag the match.
    pub distortion_flag: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            boundary_tol: 1e-6,
            distortion_flag: 2e-2,
        }
    }
}

/// Matches each function of `A` to its sup-norm nearest function of `B`
/// (lowest index on ties) and measures the distortion of the induced map
/// between the reconstructed metric spaces.
pub fn nearest_neighbor_match(
    a: &DataCloud,
    b: &DataCloud,
    opts: &MatchOptions,
) -> Result<Correspondence> {
    a.check_compatible(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(
            "matching needs two nonempty data sets".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for j in 0..b.len() {
                let d = a.bounded(i, b, j, best);
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            (i, arg)
        })
        .collect();
    let space_a = embed_as_metric_space(a)?;
    let space_b = embed_as_metric_space(b)?;
    let distortion = distortion(&pairs, &space_a, &space_b)?;
    let boundary_check = match a.mode {
        Mode::Ttd => boundary_check(a, b, &pairs, opts.boundary_tol),
        Mode::Ttdd => BoundaryCheck::default(),
    };
    Ok(Correspondence {
        flagged: distortion > opts.distortion_flag || !boundary_check.passed(),
        pairs,
        distortion,
        boundary_check,
    })
}

fn boundary_check(
    a: &DataCloud,
    b: &DataCloud,
    pairs: &[(usize, usize)],
    tol: f64,
) -> BoundaryCheck {
    let m = a.grid.m;
    let mut check = BoundaryCheck::default();
    for &(i, j) in pairs {
        let zeros: Vec<usize> = (0..m).filter(|&k| a.rows[i][k] <= tol).collect();
        if zeros.is_empty() {
            continue;
        }
        check.boundary_functions += 1;
        let ok = zeros
            .iter()
            .any(|&k| [m - 1, 0, 1].iter().any(|&s| b.rows[j][(k + s) % m] <= tol));
        if !ok {
            check.failures.push(i);
        }
    }
    check
}

/// Half the distortion of `c`: an upper bound for the Gromov–Hausdorff
/// distance between `a` and `b`.
pub fn gh_upper_bound(
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    c: &Correspondence,
) -> Result<f64> {
    Ok(0.5 * distortion(&c.pairs, a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillation_is_the_sup_over_the_square() {
        let u: [f64; 4] = [0.0, 0.3, -0.2, 0.1];
        let w: [f64; 4] = [0.0, -0.1, 0.2, 0.0];
        let mut brute: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                brute = brute.max(((u[i] - u[j]) - (w[i] - w[j])).abs());
            }
        }
        assert_eq!(difference_sup_norm_distance(&u, &w).unwrap(), brute);
    }

    #[test]
    fn mismatched_lengths_are_shape_errors() {
        assert!(matches!(
            sup_norm_distance(&[0.0], &[0.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn metric_space_rejects_asymmetry() {
        assert!(FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![1.5, 0.0]]).is_err());
        assert!(FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
    }
}
