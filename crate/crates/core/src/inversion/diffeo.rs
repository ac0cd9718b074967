//! Distances between data sets modulo boundary diffeomorphisms.
//!
//! Data of isometric metrics agree once the boundary angles of one set are
//! reparametrised by the boundary restriction of the isometry. The search
//! runs over a finite family of monotone circle maps, so the value it
//! returns is an upper bound for the infimum over all diffeomorphisms.

use std::f64::consts::TAU;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{directed_hausdorff, DataCloud};
use crate::error::{Error, Result};

/// `ψ(θ) = θ + c + Σ_k (a_k sin kθ + b_k cos kθ)`, a circle diffeomorphism
/// whenever `Σ_k k (|a_k| + |b_k|) < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleDiffeo {
    pub c: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CircleDiffeo {
    pub fn identity(harmonics: usize) -> Self {
        Self::rotation(0.0, harmonics)
    }

    pub fn rotation(c: f64, harmonics: usize) -> Self {
        CircleDiffeo {
            c,
            a: vec![0.0; harmonics],
            b: vec![0.0; harmonics],
        }
    }

    pub fn harmonics(&self) -> usize {
        self.a.len()
    }

    /// Parameters in the order `c, a_1, b_1, a_2, b_2, …`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = vec![self.c];
        for (a, b) in self.a.iter().zip(&self.b) {
            p.extend([*a, *b]);
        }
        p
    }

    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.len() % 2 != 1 {
            return Err(Error::Shape(format!(
                "{} circle map parameters, expected an odd count",
                p.len()
            )));
        }
        let rest = &p[1..];
        Ok(CircleDiffeo {
            c: p[0],
            a: rest.iter().step_by(2).copied().collect(),
            b: rest.iter().skip(1).step_by(2).copied().collect(),
        })
    }

    /// `Σ_k k (|a_k| + |b_k|)`, which bounds `|ψ′ − 1|`.
    pub fn oscillation(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(k, (a, b))| (k + 1) as f64 * (a.abs() + b.abs()))
            .sum()
    }

    pub fn is_monotone(&self) -> bool {
        self.oscillation() < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::Shape(
                "sine and cosine coefficient counts differ".into(),
            ));
        }
        if !self.is_monotone() {
            return Err(Error::InvalidDiffeo(format!(
                "circle map is not monotone: sum of k(|a_k| + |b_k|) is {:.4}",
                self.oscillation()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, theta: f64) -> f64 {
        let mut out = theta + self.c;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let (s, c) = ((k + 1) as f64 * theta).sin_cos();
            out += a * s + b * c;
        }
        out
    }

    /// Largest `|ψ(θ) − χ(θ)|` over the angles, measured on the circle.
    pub fn max_deviation(&self, other: &CircleDiffeo, angles: &[f64]) -> f64 {
        angles
            .iter()
            .map(|&t| crate::linalg::angle_diff(self.apply(t), other.apply(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Samples of a periodic function on `m` equispaced angles, evaluated at
/// `angle` by linear interpolation. Angles within rounding of a node read
/// the node value, so the identity map reproduces the samples exactly.
fn periodic_lerp(values: &[f64], angle: f64) -> f64 {
    let m = values.len();
    let mut x = angle.rem_euclid(TAU) / TAU * m as f64;
    if (x - x.round()).abs() < 1e-9 {
        x = x.round() % m as f64;
    }
    let i = (x.floor() as usize).min(m - 1);
    let w = x - i as f64;
    values[i] * (1.0 - w) + values[(i + 1) % m] * w
}

/// The cloud `B ∘ ψ`: every function re-sampled at `ψ(θ_j)`.
pub(crate) fn compose(cloud: &DataCloud, psi: &CircleDiffeo) -> DataCloud {
    let at: Vec<f64> = cloud.grid.angles().iter().map(|&t| psi.apply(t)).collect();
    DataCloud {
        mode: cloud.mode,
        grid: cloud.grid,
        rows: cloud
            .rows
            .iter()
            .map(|r| at.iter().map(|&t| periodic_lerp(r, t)).collect())
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffeoSearchOptions {
    pub harmonics: usize,
    /// Rotations `2πk / rotation_seeds` scored before the local search; 0
    /// scores every rotation by a whole number of grid steps. The basin of
    /// the true rotation is about one source spacing wide, so with dense
    /// sources a coarse seed set can miss it entirely.
    pub rotation_seeds: usize,
    /// Number of best-scoring rotations refined by the local search.
    pub starts: usize,
    pub max_iters: u64,
    /// Initial simplex step for the rotation parameter.
    pub rotation_step: f64,
    /// Initial simplex step for the harmonic coefficients.
    pub harmonic_step: f64,
}

impl Default for DiffeoSearchOptions {
    fn default() -> Self {
        DiffeoSearchOptions {
            harmonics: 3,
            rotation_seeds: 0,
            starts: 3,
            max_iters: 400,
            rotation_step: 0.1,
            harmonic_step: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffeoFit {
    /// `min_ψ d_H(A, B ∘ ψ)` over the family, as far as the search found.
    pub value: f64,
    pub psi: CircleDiffeo,
    /// The best seed rotation and its value before refinement.
    pub seed_rotation: f64,
    pub seed_value: f64,
}

struct Objective<'a> {
    a: &'a DataCloud,
    b: &'a DataCloud,
}

impl Objective<'_> {
    fn value(&self, psi: &CircleDiffeo) -> f64 {
        let excess = psi.oscillation() - 1.0;
        if excess >= 0.0 {
            // Non-monotone maps are rejected with a cost above any data
            // distance, growing with the violation so the simplex moves back.
            return 1e3 + excess;
        }
        let bpsi = compose(self.b, psi);
        directed_hausdorff(self.a, &bpsi, None)
            .0
            .max(directed_hausdorff(&bpsi, self.a, None).0)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(&CircleDiffeo::from_params(p)?))
    }
}

fn refine(obj: &Objective, start: Vec<f64>, opts: &DiffeoSearchOptions) -> Result<(f64, Vec<f64>)> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += if i == 0 {
            opts.rotation_step
        } else {
            opts.harmonic_step
        };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let res = Executor::new(Objective { a: obj.a, b: obj.b }, solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let state = res.state();
    let best = state
        .best_param
        .clone()
        .ok_or_else(|| Error::Numeric("local search returned no parameters".into()))?;
    Ok((state.best_cost, best))
}

/// `min_ψ d_H(A, B ∘ ψ)` over monotone circle maps with `harmonics` Fourier
/// modes: the rotation seeds are scored, the best `starts` of them are
/// refined in parallel by Nelder–Mead, and the best result is returned.
pub fn diffeo_invariant_distance(
    a: &DataCloud,
    b: &DataCloud,
    opts: &DiffeoSearchOptions,
) -> Result<DiffeoFit> {
    a.check_compatible(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(
            "diffeomorphism search needs two nonempty data sets".into(),
        ));
    }
    if opts.starts == 0 {
        return Err(Error::Config(
            "diffeomorphism search needs at least one start".into(),
        ));
    }
    let obj = Objective { a, b };
    let count = match opts.rotation_seeds {
        0 => a.grid.m,
        n => n,
    };
    let mut seeds: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let c = TAU * k as f64 / count as f64;
            let c = if c > std::f64::consts::PI { c - TAU } else { c };
            (obj.value(&CircleDiffeo::rotation(c, opts.harmonics)), c)
        })
        .collect();
    seeds.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let (seed_value, seed_rotation) = seeds[0];
    let refined: Vec<(f64, Vec<f64>)> = seeds
        .iter()
        .take(opts.starts)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|&(_, c)| {
            refine(
                &obj,
                CircleDiffeo::rotation(c, opts.harmonics).params(),
                opts,
            )
        })
        .collect::<Result<_>>()?;
    let (value, params) = refined
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("at least one start");
    let (value, psi) = if value <= seed_value {
        (value, CircleDiffeo::from_params(&params)?)
    } else {
        (
            seed_value,
            CircleDiffeo::rotation(seed_rotation, opts.harmonics),
        )
    };
    Ok(DiffeoFit {
        value,
        psi,
        seed_rotation,
        seed_value,
    })
}
