//! Forward simulation of the three boundary data sets of a metric: travel
//! time data, travel time difference data and broken scattering relations.
//!
//! Generated data sets are unlabeled: the function order is shuffled by the
//! generation seed, and the source of each function is returned separately
//! in a [`SealedSources`] sidecar that only tests and reports consult.

mod bsr;
mod io;

pub use bsr::{
    make_broken_scattering_data, BrokenScatteringTable, BsrOptions, DirectionGrid, Entry,
};
pub use io::{
    load_dataset, load_sealed, read_dataset, save_dataset, save_sealed, write_dataset, Dataset,
    DatasetKind, Encoding, FORMAT_VERSION,
};

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{boundary_fan, BoundaryFan, FanOptions};
use crate::metric::{MetricModel, Point};

/// Smallest admissible number of boundary angles.
pub const MIN_BOUNDARY_ANGLES: usize = 16;

/// Uniform grid of boundary angles `θ_j = 2πj/m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub m: usize,
}

impl BoundaryGrid {
    pub fn new(m: usize) -> Result<Self> {
        let g = BoundaryGrid { m };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < MIN_BOUNDARY_ANGLES {
            return Err(Error::Config(format!(
                "boundary grid needs m >= {MIN_BOUNDARY_ANGLES}, got {}",
                self.m
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.m as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.m as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.angle(j)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceOptions {
    /// Interior sources satisfy `|x| ≤ 1 − margin`.
    pub margin: f64,
    /// Number of extra sources placed on the boundary circle.
    pub boundary: usize,
}

impl Default for SourceOptions {
    fn default() -> Self {
        SourceOptions {
            margin: 0.02,
            boundary: 0,
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// `k` interior sources with the default margin and no boundary sources.
pub fn sample_interior_sources(seed: u64, k: usize) -> Vec<Point> {
    sample_sources(seed, k, &SourceOptions::default())
}

/// Quasi-random sources: the Halton sequence in bases 2 and 3 with a
/// seeded Cranley–Patterson shift, mapped area-preservingly onto the disc of
/// radius `1 − margin`, followed by `opts.boundary` boundary points at the
/// angles `2πj / opts.boundary`. With `opts.boundary` dividing the grid size
/// these sit on grid angles, where their functions vanish.
pub fn sample_sources(seed: u64, k: usize, opts: &SourceOptions) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    let radius = 1.0 - opts.margin;
    let mut out: Vec<Point> = (1..=k as u64)
        .map(|i| {
            let u = (radical_inverse(i, 2) + shift[0]).fract();
            let v = (radical_inverse(i, 3) + shift[1]).fract();
            let (r, t) = (radius * u.sqrt(), TAU * v);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    out.extend((0..opts.boundary).map(|j| {
        let t = TAU * j as f64 / opts.boundary as f64;
        [t.cos(), t.sin()]
    }));
    out
}

/// Values `r(θ_j) = d(p, θ_j)` of one travel time function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeFunction {
    pub values: Vec<f64>,
}

/// One travel time difference function `½ D_p` stored through its
/// potential `u(θ_i) = ½ D_p(θ_i, θ_0)`, from which
/// `½ D_p(θ_i, θ_j) = u(θ_i) − u(θ_j)`. The potential carries exactly the
/// information of `D_p` and no absolute travel time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferencePotential {
    pub values: Vec<f64>,
}

impl DifferencePotential {
    pub fn from_travel_times(r: &TravelTimeFunction) -> Self {
        let r0 = r.values[0];
        DifferencePotential {
            values: r.values.iter().map(|&v| 0.5 * (v - r0)).collect(),
        }
    }

    /// `½ D_p(θ_i, θ_j)`, antisymmetric in `(i, j)` with a zero diagonal.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i] - self.values[j]
    }

    /// The full `m × m` table of `½ D_p`, row-major.
    pub fn to_matrix(&self) -> Vec<f64> {
        let m = self.values.len();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            out.extend((0..m).map(|j| self.value(i, j)));
        }
        out
    }
}

/// Unordered set of travel time functions on a boundary grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeData {
    pub grid: BoundaryGrid,
    pub functions: Vec<TravelTimeFunction>,
    pub seed: u64,
    pub metric: Option<MetricModel>,
}

/// Unordered set of travel time difference functions on a boundary grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeDifferenceData {
    pub grid: BoundaryGrid,
    pub functions: Vec<DifferencePotential>,
    pub seed: u64,
    pub metric: Option<MetricModel>,
}

impl TravelTimeDifferenceData {
    pub fn from_travel_time_data(data: &TravelTimeData) -> Self {
        TravelTimeDifferenceData {
            grid: data.grid,
            functions: data
                .functions
                .iter()
                .map(DifferencePotential::from_travel_times)
                .collect(),
            seed: data.seed,
            metric: data.metric.clone(),
        }
    }
}

/// Generation-time source of every function, in data order. Kept apart
/// from the data so that reconstruction never sees it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SealedSources {
    pub sources: Vec<Point>,
}

/// A generated data set and its sealed labels.
#[derive(Clone, Debug)]
pub struct Generated<D> {
    pub data: D,
    pub sealed: SealedSources,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurveyOptions {
    pub seed: u64,
    pub fan: FanOptions,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        SurveyOptions {
            seed: 1,
            fan: FanOptions::default(),
        }
    }
}

/// The boundary fan of every source, in source order. A fan answers travel
/// time queries at any boundary angle, so one set of fans serves every grid.
pub fn boundary_fans(
    model: &MetricModel,
    sources: &[Point],
    fan: &FanOptions,
) -> Result<Vec<BoundaryFan>> {
    sources
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            boundary_fan(model, p, fan).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("source {i} at {p:?}: {msg}")),
                other => other,
            })
        })
        .collect()
}

/// Travel times of every source at every grid angle, in source order.
pub fn travel_time_rows(
    model: &MetricModel,
    sources: &[Point],
    grid: &BoundaryGrid,
    fan: &FanOptions,
) -> Result<Vec<Vec<f64>>> {
    grid.validate()?;
    let angles = grid.angles();
    Ok(boundary_fans(model, sources, fan)?
        .par_iter()
        .map(|f| f.travel_times(&angles))
        .collect())
}

fn shuffled(k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Unlabeled travel time data from rows in source order: the rows are
/// shuffled by `seed` and the sources move to the sealed sidecar.
pub fn assemble_travel_time_data(
    rows: Vec<Vec<f64>>,
    sources: &[Point],
    grid: &BoundaryGrid,
    seed: u64,
    metric: Option<MetricModel>,
) -> Result<Generated<TravelTimeData>> {
    grid.validate()?;
    if rows.len() != sources.len() || rows.iter().any(|r| r.len() != grid.m) {
        return Err(Error::Shape(format!(
            "{} rows for {} sources on {} angles",
            rows.len(),
            sources.len(),
            grid.m
        )));
    }
    let mut rows: Vec<Option<Vec<f64>>> = rows.into_iter().map(Some).collect();
    let order = shuffled(sources.len(), seed);
    let functions = order
        .iter()
        .map(|&i| TravelTimeFunction {
            values: rows[i].take().expect("each row is used once"),
        })
        .collect();
    Ok(Generated {
        data: TravelTimeData {
            grid: *grid,
            functions,
            seed,
            metric,
        },
        sealed: SealedSources {
            sources: order.iter().map(|&i| sources[i]).collect(),
        },
    })
}

/// Travel time data `{r_p : p ∈ sources}` in seed-shuffled order.
pub fn make_travel_time_data(
    model: &MetricModel,
    sources: &[Point],
    grid: &BoundaryGrid,
    opts: &SurveyOptions,
) -> Result<Generated<TravelTimeData>> {
    let rows = travel_time_rows(model, sources, grid, &opts.fan)?;
    assemble_travel_time_data(rows, sources, grid, opts.seed, Some(model.clone()))
}

/// Travel time difference data `{½ D_p : p ∈ sources}` in seed-shuffled
/// order.
pub fn make_travel_time_difference_data(
    model: &MetricModel,
    sources: &[Point],
    grid: &BoundaryGrid,
    opts: &SurveyOptions,
) -> Result<Generated<TravelTimeDifferenceData>> {
    let g = make_travel_time_data(model, sources, grid, opts)?;
    Ok(Generated {
        data: TravelTimeDifferenceData::from_travel_time_data(&g.data),
        sealed: g.sealed,
    })
}
