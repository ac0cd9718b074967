//! Measurements behind the acceptance criteria, shared by the command line
//! and the acceptance suite.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{
    distance, lift_inward, trace, trace_intersection, BoundaryFan, ConnectOptions, FanOptions,
    GeodesicTrace, Intersection, TraceOptions, TraceStart, DEFAULT_INTERSECTION_TOL,
};
use crate::inversion::{
    bsr_to_travel_time_data, bsr_travel_times, difference_sup_norm_distance, embed_as_metric_space,
    exact_gromov_hausdorff, gh_upper_bound, hausdorff_distance, label_points,
    nearest_neighbor_match, sup_norm_distance, Correspondence, DataCloud, MatchOptions, Mode,
    Reconstruction, ReconstructionOptions, RecoveredLensData,
};
use crate::linalg::angle_diff;
use crate::metric::{DiscDiffeo, MetricKind, MetricModel, Point};
use crate::report::Criterion;
use crate::survey::{
    travel_time_rows, BoundaryGrid, BrokenScatteringTable, DifferencePotential, TravelTimeFunction,
};

/// `n` distinct index pairs `(i, j)`, `i ≠ j`, drawn from `0..k`.
pub fn random_pairs(k: usize, n: usize, seed: u64) -> Vec<(usize, usize)> {
    if k < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let i = rng.gen_range(0..k);
            let j = (i + rng.gen_range(1..k)) % k;
            (i, j)
        })
        .collect()
}

/// Largest distance misfit of the sup-norm embeddings on each grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub grids: Vec<usize>,
    /// `max |‖r_p − r_q‖_∞ − d(p, q)|` per grid.
    pub ttd_error: Vec<f64>,
    /// `max |‖u_p − u_q‖_osc − d(p, q)|` per grid, with `u_p = ½ D_p`.
    pub ttdd_error: Vec<f64>,
    pub pairs: usize,
}

/// Forward distances of the pairs against the sup-norm distances of their
/// travel time functions and difference potentials on every grid. `fans`
/// holds the boundary fan of every source, so one set serves all grids.
pub fn isometry_sweep(
    model: &MetricModel,
    sources: &[Point],
    fans: &[BoundaryFan],
    pairs: &[(usize, usize)],
    grids: &[usize],
    connect: &ConnectOptions,
) -> Result<SweepOutcome> {
    if fans.len() != sources.len() {
        return Err(Error::Shape(format!(
            "{} fans for {} sources",
            fans.len(),
            sources.len()
        )));
    }
    let forward: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| distance(model, sources[i], sources[j], connect))
        .collect::<Result<_>>()?;
    let mut out = SweepOutcome {
        grids: grids.to_vec(),
        ttd_error: Vec::new(),
        ttdd_error: Vec::new(),
        pairs: pairs.len(),
    };
    for &m in grids {
        let grid = BoundaryGrid::new(m)?;
        let angles = grid.angles();
        let rows: Vec<Vec<f64>> = fans.par_iter().map(|f| f.travel_times(&angles)).collect();
        let potentials: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                DifferencePotential::from_travel_times(&TravelTimeFunction { values: r.clone() })
                    .values
            })
            .collect();
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        for (&(i, j), d) in pairs.iter().zip(&forward) {
            e1 = e1.max((sup_norm_distance(&rows[i], &rows[j])? - d).abs());
            e2 = e2.max((difference_sup_norm_distance(&potentials[i], &potentials[j])? - d).abs());
        }
        out.ttd_error.push(e1);
        out.ttdd_error.push(e2);
    }
    Ok(out)
}

/// True when the errors never grow along the grid sequence, up to rounding.
pub fn is_nonincreasing(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

/// The isometry criteria of one sweep: the error at grid `m` and the
/// monotone decrease under refinement, for both data maps.
pub fn isometry_criteria(subject: &str, s: &SweepOutcome, m: usize, tol: f64) -> Vec<Criterion> {
    let at = |e: &[f64]| {
        s.grids
            .iter()
            .position(|&g| g == m)
            .map_or(f64::NAN, |k| e[k])
    };
    vec![
        Criterion::at_most(
            "C1",
            &format!("travel time isometry at m={m}"),
            subject,
            at(&s.ttd_error),
            tol,
        ),
        Criterion::holds(
            "C1",
            "travel time error decreases",
            subject,
            is_nonincreasing(&s.ttd_error),
        ),
        Criterion::at_most(
            "C2",
            &format!("difference isometry at m={m}"),
            subject,
            at(&s.ttdd_error),
            tol,
        ),
        Criterion::holds(
            "C2",
            "difference error decreases",
            subject,
            is_nonincreasing(&s.ttdd_error),
        ),
    ]
}

/// The diffeomorphism `Φ` when `second` is the pullback `Φ*first`.
pub fn pullback_relation(first: &MetricModel, second: &MetricModel) -> Option<DiscDiffeo> {
    match &second.kind {
        MetricKind::Pullback { base, diffeo } if **base == *first => Some(diffeo.clone()),
        _ => None,
    }
}

/// Sources of a survey of `Φ*g` that sit at the same manifold points as
/// `sources` in `g`: `Φ⁻¹(p)`.
pub fn transport_sources(diffeo: &DiscDiffeo, sources: &[Point]) -> Result<Vec<Point>> {
    sources.iter().map(|&p| diffeo.inverse_apply(p)).collect()
}

/// Hausdorff distances between the data of `g` and of `Φ*g` over the same
/// manifold points, for travel times and for difference potentials.
/// `rows_g` holds the travel times of `g` at `sources` on `grid`.
pub fn gauge_distances(
    model: &MetricModel,
    diffeo: &DiscDiffeo,
    sources: &[Point],
    rows_g: &[Vec<f64>],
    grid: &BoundaryGrid,
    fan_pullback: &FanOptions,
) -> Result<(f64, f64)> {
    let pulled = model.pullback(diffeo.clone())?;
    let b = travel_time_rows(
        &pulled,
        &transport_sources(diffeo, sources)?,
        grid,
        fan_pullback,
    )?;
    let a = rows_g.to_vec();
    let ttd = hausdorff_distance(
        &cloud(*grid, Mode::Ttd, a.clone()),
        &cloud(*grid, Mode::Ttd, b.clone()),
    )?;
    let ttdd = hausdorff_distance(
        &cloud(*grid, Mode::Ttdd, potentials(a)),
        &cloud(*grid, Mode::Ttdd, potentials(b)),
    )?;
    Ok((ttd, ttdd))
}

/// The gauge criteria of one metric under the boundary-fixing radial bump
/// with `ε = 0.2`.
pub fn gauge_criteria(
    subject: &str,
    model: &MetricModel,
    sources: &[Point],
    rows_g: &[Vec<f64>],
    grid: &BoundaryGrid,
    pullback_fan: &FanOptions,
    tol: f64,
) -> Result<Vec<Criterion>> {
    let phi = DiscDiffeo::RadialBump { epsilon: 0.2 };
    let (ttd, ttdd) = gauge_distances(model, &phi, sources, rows_g, grid, pullback_fan)?;
    Ok(vec![
        Criterion::at_most("C3", "gauge invariance, travel times", subject, ttd, tol),
        Criterion::at_most("C3", "gauge invariance, differences", subject, ttdd, tol),
    ])
}

fn potentials(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|values| DifferencePotential::from_travel_times(&TravelTimeFunction { values }).values)
        .collect()
}

/// A cloud of rows already in the sampled form of `mode`.
pub fn cloud(grid: BoundaryGrid, mode: Mode, rows: Vec<Vec<f64>>) -> DataCloud {
    DataCloud { mode, grid, rows }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub hausdorff: f64,
    pub correspondence: Correspondence,
    /// Half the distortion of the nearest-neighbour correspondence.
    pub gh_bound: f64,
    pub subsamples: usize,
    /// `max (d_GH − d_H)` over the subsample pairs, both computed exactly.
    pub subsample_excess: f64,
    pub inconsistency: Vec<String>,
}

/// The stability surrogate `d_GH ≤ d_H` in both of its forms: through the
/// nearest-neighbour correspondence on the full data, and exactly on
/// random subsamples of `size` matched pairs.
pub fn stability(
    a: &DataCloud,
    b: &DataCloud,
    opts: &MatchOptions,
    subsamples: usize,
    size: usize,
    seed: u64,
) -> Result<StabilityOutcome> {
    let hausdorff = hausdorff_distance(a, b)?;
    let (sa, sb) = (embed_as_metric_space(a)?, embed_as_metric_space(b)?);
    let correspondence = nearest_neighbor_match(a, b, opts)?;
    let gh_bound = gh_upper_bound(&sa, &sb, &correspondence)?;
    let inconsistency = [sa.inconsistency_warning(), sb.inconsistency_warning()]
        .into_iter()
        .flatten()
        .collect();
    let size = size.min(a.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<usize>> = (0..subsamples)
        .map(|_| sample(&mut rng, a.len(), size).into_vec())
        .collect();
    let excess = picks
        .par_iter()
        .map(|idx| {
            let ia: Vec<usize> = idx.iter().map(|&k| correspondence.pairs[k].0).collect();
            let mut ib: Vec<usize> = idx.iter().map(|&k| correspondence.pairs[k].1).collect();
            ib.sort_unstable();
            ib.dedup();
            let sub = |c: &DataCloud, rows: &[usize]| {
                cloud(
                    c.grid,
                    c.mode,
                    rows.iter().map(|&r| c.rows[r].clone()).collect(),
                )
            };
            let h = hausdorff_distance(&sub(a, &ia), &sub(b, &ib))?;
            let gh = exact_gromov_hausdorff(&sa.subspace(&ia), &sb.subspace(&ib))?;
            Ok(gh - h)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityOutcome {
        hausdorff,
        correspondence,
        gh_bound,
        subsamples,
        subsample_excess: excess,
        inconsistency,
    })
}

pub fn stability_criteria(subject: &str, s: &StabilityOutcome, slack: f64) -> Vec<Criterion> {
    let mut out = vec![Criterion::at_most(
        "C4",
        "half distortion minus Hausdorff",
        subject,
        s.gh_bound - s.hausdorff,
        slack,
    )];
    if s.subsamples > 0 {
        out.push(Criterion::at_most(
            "C4",
            "exact GH minus Hausdorff",
            subject,
            s.subsample_excess,
            1e-6,
        ));
    }
    out
}

/// Exit-time and scattering-relation measurements of a lens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LensOutcome {
    pub directions: usize,
    /// `max |τ − τ_traced|` over the grid, infinite when a τ is missing.
    pub exit_time_error: f64,
    /// `max |τ − 2√(1 − μ²)|`, for the Euclidean metric only.
    pub closed_form_error: Option<f64>,
    pub resolved_fraction: f64,
    pub involution_failures: Vec<usize>,
    /// Resolved vectors whose partner lies more than one grid cell from the
    /// traced reversal.
    pub reversal_failures: Vec<usize>,
}

/// Traces every grid vector of the table and holds the recovered lens data
/// against it.
pub fn lens_checks(
    model: &MetricModel,
    table: &BrokenScatteringTable,
    lens: &RecoveredLensData,
) -> Result<LensOutcome> {
    let g = table.grid;
    let n = g.len();
    let opts = TraceOptions {
        record_every: usize::MAX,
        ..TraceOptions::default()
    };
    let traces: Vec<GeodesicTrace> = (0..n)
        .into_par_iter()
        .map(|v| {
            let bv = table.directions[v];
            trace(
                model,
                lift_inward(model, bv)?,
                TraceStart::Boundary(bv),
                &opts,
            )
        })
        .collect::<Result<_>>()?;
    let tau_error =
        |v: usize, reference: f64| lens.tau[v].map_or(f64::INFINITY, |t| (t - reference).abs());
    let exit_time_error = (0..n)
        .map(|v| tau_error(v, traces[v].length))
        .fold(0.0, f64::max);
    let closed_form_error = matches!(model.kind, MetricKind::Euclidean).then(|| {
        (0..n)
            .map(|v| tau_error(v, 2.0 * (1.0 - table.directions[v].mu.powi(2)).sqrt()))
            .fold(0.0, f64::max)
    });
    let mut involution_failures = Vec::new();
    let mut reversal_failures = Vec::new();
    for v in 0..n {
        let Some(w) = lens.sigma[v] else { continue };
        if lens.sigma.get(w).copied().flatten() != Some(v) {
            involution_failures.push(v);
        }
        let reversal = traces[v]
            .exit
            .ok_or_else(|| Error::Numeric(format!("grid direction {v} has no exit")))?;
        let d = table.directions[w];
        let cell_theta = angle_diff(d.theta, reversal.theta).abs() / g.theta_spacing();
        let cell_mu = (d.mu - reversal.mu).abs() / g.mu_spacing();
        if cell_theta > 1.0 || cell_mu > 1.0 {
            reversal_failures.push(v);
        }
    }
    Ok(LensOutcome {
        directions: n,
        exit_time_error,
        closed_form_error,
        resolved_fraction: lens.resolved_fraction(n),
        involution_failures,
        reversal_failures,
    })
}

pub fn lens_criteria(
    subject: &str,
    l: &LensOutcome,
    exit_tol: f64,
    resolved: f64,
) -> Vec<Criterion> {
    let mut out = vec![Criterion::at_most(
        "C5",
        "exit times against the tracer",
        subject,
        l.exit_time_error,
        exit_tol,
    )];
    if let Some(e) = l.closed_form_error {
        out.push(Criterion::at_most(
            "C5",
            "exit times against 2 sqrt(1 - mu^2)",
            subject,
            e,
            1e-6,
        ));
    }
    out.push(Criterion::at_least(
        "C6",
        "resolved fraction",
        subject,
        l.resolved_fraction,
        resolved,
    ));
    out.push(Criterion::holds(
        "C6",
        "involution",
        subject,
        l.involution_failures.is_empty(),
    ));
    out.push(Criterion::holds(
        "C6",
        "partner within one cell of reversal",
        subject,
        l.reversal_failures.is_empty(),
    ));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub pairs: usize,
    /// `max(|t₁ − t_a|, |t₂ − t_b|)` against the traced crossing.
    pub max_error: f64,
    /// Pairs where `t₁ + t₂ ≠ T` in floating point.
    pub sum_mismatches: usize,
}

/// Splits of `count` random crossing pairs against traced intersections.
pub fn split_checks(
    model: &MetricModel,
    table: &BrokenScatteringTable,
    lens: &RecoveredLensData,
    count: usize,
    seed: u64,
) -> Result<SplitOutcome> {
    let n = table.grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    let mut attempts = 0;
    while chosen.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let (v1, v2) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if v1 == v2 || lens.sigma[v1] == Some(v2) {
            continue;
        }
        let Some(total) = table.get(v1, v2) else {
            continue;
        };
        let Ok(split) = bsr_travel_times(table, lens, v1, v2) else {
            continue;
        };
        chosen.push((v1, v2, total, split));
    }
    let errors: Vec<(f64, bool)> = chosen
        .par_iter()
        .map(|&(v1, v2, total, (t1, t2))| {
            let full = |v: usize| {
                let bv = table.directions[v];
                trace(
                    model,
                    lift_inward(model, bv)?,
                    TraceStart::Boundary(bv),
                    &TraceOptions::default(),
                )
            };
            let (a, b) = (full(v1)?, full(v2)?);
            let err = match trace_intersection(&a, &b, DEFAULT_INTERSECTION_TOL) {
                Intersection::Point { t_a, t_b, .. } => (t1 - t_a).abs().max((t2 - t_b).abs()),
                _ => f64::INFINITY,
            };
            Ok((err, t1 + t2 == total))
        })
        .collect::<Result<_>>()?;
    Ok(SplitOutcome {
        pairs: chosen.len(),
        max_error: errors.iter().map(|e| e.0).fold(0.0, f64::max),
        sum_mismatches: errors.iter().filter(|e| !e.1).count(),
    })
}

pub fn split_criteria(subject: &str, s: &SplitOutcome, tol: f64, wanted: usize) -> Vec<Criterion> {
    vec![
        Criterion::at_least(
            "C7",
            "resolvable pairs checked",
            subject,
            s.pairs as f64,
            wanted as f64,
        ),
        Criterion::at_most(
            "C7",
            "split against traced crossing",
            subject,
            s.max_error,
            tol,
        ),
        Criterion::holds("C7", "t1 + t2 = T exactly", subject, s.sum_mismatches == 0),
    ]
}

/// A reconstruction together with the forward data of its labelled points.
#[derive(Clone, Debug)]
pub struct ReconstructionOutcome {
    pub reconstruction: Reconstruction,
    pub points: Vec<Point>,
    pub forward: DataCloud,
    pub hausdorff: f64,
}

/// Travel time data recovered from the table, held against travel times
/// generated directly at the points the labels name in `model`.
pub fn reconstruction_check(
    model: &MetricModel,
    table: &BrokenScatteringTable,
    lens: &RecoveredLensData,
    grid: &BoundaryGrid,
    opts: &ReconstructionOptions,
    fan: &FanOptions,
) -> Result<ReconstructionOutcome> {
    let reconstruction = bsr_to_travel_time_data(table, lens, grid, opts)?;
    let points = label_points(model, &reconstruction.labels)?;
    let forward = cloud(
        *grid,
        Mode::Ttd,
        travel_time_rows(model, &points, grid, fan)?,
    );
    let hausdorff = hausdorff_distance(
        &DataCloud::from_travel_time_data(&reconstruction.data),
        &forward,
    )?;
    Ok(ReconstructionOutcome {
        reconstruction,
        points,
        forward,
        hausdorff,
    })
}

pub fn reconstruction_criteria(
    subject: &str,
    r: &ReconstructionOutcome,
    tol: f64,
    gap: f64,
) -> Vec<Criterion> {
    vec![
        Criterion::at_most(
            "C8",
            "reconstruction against forward data",
            subject,
            r.hausdorff,
            tol,
        ),
        Criterion::at_most(
            "C8",
            "receivers in coverage gaps",
            subject,
            r.reconstruction.coverage.gap_fraction(),
            gap,
        ),
    ]
}
