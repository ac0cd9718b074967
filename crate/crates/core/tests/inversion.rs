mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ttlab::geodesic::{
    distance, integrate_geodesic, lift_inward, trace, trace_intersection, BoundaryVector,
    ConnectOptions, GeodesicTrace, Intersection, TraceOptions, TraceStart,
};
use ttlab::inversion::{
    bsr_exit_time, bsr_scattering_relation, bsr_to_travel_time_data, bsr_travel_times,
    diffeo_invariant_distance, difference_sup_norm_distance, embed_as_metric_space,
    exact_gromov_hausdorff, gh_upper_bound, hausdorff_distance, label_points,
    nearest_neighbor_match, recover_lens, sup_norm_distance, AngularFill, CircleDiffeo,
    Correspondence, DataCloud, DiffeoSearchOptions, FiniteMetricSpace, LensOptions, MatchOptions,
    Mode, Reconstruction, ReconstructionOptions, RecoveredLensData,
};
use ttlab::metric::{DiscDiffeo, MetricModel};
use ttlab::survey::{
    make_broken_scattering_data, make_travel_time_data, make_travel_time_difference_data,
    sample_interior_sources, sample_sources, BoundaryGrid, BrokenScatteringTable, BsrOptions,
    DirectionGrid, Generated, SourceOptions, SurveyOptions, TravelTimeData,
    TravelTimeDifferenceData, TravelTimeFunction,
};
use ttlab::Error;

fn ttd(
    model: &MetricModel,
    sources: &[[f64; 2]],
    m: usize,
    seed: u64,
) -> Generated<TravelTimeData> {
    let opts = SurveyOptions {
        seed,
        ..SurveyOptions::default()
    };
    make_travel_time_data(model, sources, &BoundaryGrid::new(m).unwrap(), &opts).unwrap()
}

/// Surveys of pullback metrics with a coarser integrator step. Their
/// Christoffels come from finite differences of the pulled-back metric, which
/// makes each step an order of magnitude dearer, and the finite-difference
/// error near 2e−8 already dominates the integration error at this step.
fn ttd_pullback(
    model: &MetricModel,
    sources: &[[f64; 2]],
    m: usize,
    seed: u64,
) -> Generated<TravelTimeData> {
    let mut opts = SurveyOptions {
        seed,
        ..SurveyOptions::default()
    };
    opts.fan.step = 5e-3;
    make_travel_time_data(model, sources, &BoundaryGrid::new(m).unwrap(), &opts).unwrap()
}

/// Row of the generated data that belongs to `p`.
fn row_of(g: &Generated<TravelTimeData>, p: [f64; 2]) -> &[f64] {
    let k = g.sealed.sources.iter().position(|q| *q == p).unwrap();
    &g.data.functions[k].values
}

fn euclidean_r(p: [f64; 2], grid: &BoundaryGrid) -> Vec<f64> {
    grid.angles()
        .iter()
        .map(|t| common::dist(p, [t.cos(), t.sin()]))
        .collect()
}

fn cloud(rows: Vec<Vec<f64>>, mode: Mode) -> DataCloud {
    DataCloud {
        mode,
        grid: BoundaryGrid::new(rows[0].len()).unwrap(),
        rows,
    }
}

fn random_rows(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn potential_matrix(u: &[f64]) -> Vec<f64> {
    u.iter()
        .flat_map(|a| u.iter().map(move |b| a - b))
        .collect()
}

fn space(points: &[[f64; 2]]) -> FiniteMetricSpace {
    FiniteMetricSpace::new(
        points
            .iter()
            .map(|p| points.iter().map(|q| common::dist(*p, *q)).collect())
            .collect(),
    )
    .unwrap()
}

// Sup norms and Hausdorff distances.

#[test]
fn sup_norm_between_centre_and_offset_source() {
    let g = ttd(&MetricModel::euclidean(), &[[0.0, 0.0], [0.3, 0.0]], 256, 1);
    let (a, b) = (row_of(&g, [0.0, 0.0]), row_of(&g, [0.3, 0.0]));
    assert!((sup_norm_distance(a, b).unwrap() - 0.3).abs() < 5e-3);
    assert_eq!(sup_norm_distance(a, a).unwrap(), 0.0);
}

#[test]
fn difference_sup_norm_between_centre_and_offset_source() {
    let g = ttd(&MetricModel::euclidean(), &[[0.0, 0.0], [0.3, 0.0]], 256, 1);
    let d = TravelTimeDifferenceData::from_travel_time_data(&g.data);
    let k0 = g
        .sealed
        .sources
        .iter()
        .position(|q| *q == [0.0, 0.0])
        .unwrap();
    let (u, w) = (&d.functions[k0].values, &d.functions[1 - k0].values);
    assert!((difference_sup_norm_distance(u, w).unwrap() - 0.3).abs() < 5e-3);
    assert_eq!(difference_sup_norm_distance(u, u).unwrap(), 0.0);
}

#[test]
fn grid_mismatch_is_a_shape_error() {
    assert!(matches!(
        sup_norm_distance(&[0.0; 16], &[0.0; 32]),
        Err(Error::Shape(_))
    ));
    let a = cloud(vec![vec![0.0; 16]], Mode::Ttd);
    let b = cloud(vec![vec![0.0; 32]], Mode::Ttd);
    assert!(matches!(hausdorff_distance(&a, &b), Err(Error::Shape(_))));
    let c = cloud(vec![vec![0.0; 16]], Mode::Ttdd);
    assert!(matches!(hausdorff_distance(&a, &c), Err(Error::Shape(_))));
}

#[test]
fn hausdorff_of_a_set_with_itself_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = cloud(random_rows(&mut rng, 9, 16), Mode::Ttd);
    assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
}

#[test]
fn hausdorff_of_shifted_singletons_is_the_shift() {
    let f: Vec<f64> = (0..16).map(|j| (j as f64 * 0.4).sin()).collect();
    let c = 0.37;
    let a = cloud(vec![f.clone()], Mode::Ttd);
    let b = cloud(vec![f.iter().map(|v| v + c).collect()], Mode::Ttd);
    assert!((hausdorff_distance(&a, &b).unwrap() - c).abs() < 1e-15);
}

#[test]
fn hausdorff_of_an_empty_set_is_a_domain_error() {
    let a = cloud(vec![vec![0.0; 16]], Mode::Ttd);
    let empty = DataCloud {
        rows: Vec::new(),
        ..a.clone()
    };
    assert!(matches!(
        hausdorff_distance(&a, &empty),
        Err(Error::Domain(_))
    ));
}

#[test]
fn hausdorff_equals_the_brute_force_oracle_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a = random_rows(&mut rng, 5, 16);
        let b = random_rows(&mut rng, 7, 16);
        let fast =
            hausdorff_distance(&cloud(a.clone(), Mode::Ttd), &cloud(b.clone(), Mode::Ttd)).unwrap();
        assert_eq!(fast, common::hausdorff_brute(&a, &b));
    }
}

#[test]
fn difference_hausdorff_equals_the_brute_force_oracle_on_the_grid_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let a = random_rows(&mut rng, 5, 16);
        let b = random_rows(&mut rng, 7, 16);
        let fast = hausdorff_distance(&cloud(a.clone(), Mode::Ttdd), &cloud(b.clone(), Mode::Ttdd))
            .unwrap();
        let sq = |rows: &[Vec<f64>]| rows.iter().map(|u| potential_matrix(u)).collect::<Vec<_>>();
        let brute = common::hausdorff_brute(&sq(&a), &sq(&b));
        assert!((fast - brute).abs() < 1e-15, "{fast} vs {brute}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_is_a_pseudometric(seed in 0u64..1_000_000, ka in 1usize..6, kb in 1usize..6, kc in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = cloud(random_rows(&mut rng, ka, 16), Mode::Ttd);
        let b = cloud(random_rows(&mut rng, kb, 16), Mode::Ttd);
        let c = cloud(random_rows(&mut rng, kc, 16), Mode::Ttd);
        let ab = hausdorff_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff_distance(&b, &a).unwrap());
        let ac = hausdorff_distance(&a, &c).unwrap();
        let cb = hausdorff_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
        prop_assert!(ab >= 0.0);
    }
}

// Reconstructed metric spaces.

#[test]
fn embedding_two_euclidean_sources() {
    let g = ttd(&MetricModel::euclidean(), &[[0.0, 0.0], [0.3, 0.0]], 256, 1);
    let ttd_space = embed_as_metric_space(&DataCloud::from_travel_time_data(&g.data)).unwrap();
    let diff = TravelTimeDifferenceData::from_travel_time_data(&g.data);
    let ttdd_space = embed_as_metric_space(&DataCloud::from_difference_data(&diff)).unwrap();
    for s in [&ttd_space, &ttdd_space] {
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(0, 0), 0.0);
        assert!((s.get(0, 1) - 0.3).abs() < 5e-3);
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }
}

#[test]
fn embedding_of_bump_data_matches_shooting_distances() {
    let model = MetricModel::conformal_bump([0.2, -0.1], 0.3, 0.4).unwrap();
    let sources = sample_interior_sources(5, 50);
    let g = ttd(&model, &sources, 256, 1);
    let s = embed_as_metric_space(&DataCloud::from_travel_time_data(&g.data)).unwrap();
    assert!(s.inconsistency_warning().is_none());
    let pairs: Vec<(usize, usize)> = (0..50)
        .flat_map(|i| (i + 1..50).map(move |j| (i, j)))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = distance(
                &model,
                g.sealed.sources[i],
                g.sealed.sources[j],
                &ConnectOptions::default(),
            )
            .unwrap();
            (s.get(i, j) - d).abs()
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst <= 1e-2, "worst deviation {worst}");
}

#[test]
fn inconsistent_spaces_are_reported() {
    let s = FiniteMetricSpace::new(vec![
        vec![0.0, 1.0, 3.0],
        vec![1.0, 0.0, 1.0],
        vec![3.0, 1.0, 0.0],
    ])
    .unwrap();
    assert!((s.triangle_defect() - 1.0).abs() < 1e-15);
    assert!(s.inconsistency_warning().is_some());
}

// Matching and Gromov–Hausdorff bounds.

#[test]
fn matching_a_shuffled_copy_recovers_the_permutation() {
    let model = MetricModel::constant_curvature(0.5).unwrap();
    let sources = sample_interior_sources(2, 40);
    let a = ttd(&model, &sources, 64, 1);
    let b = ttd(&model, &sources, 64, 2);
    assert_ne!(a.sealed.sources, b.sealed.sources);
    let c = nearest_neighbor_match(
        &DataCloud::from_travel_time_data(&a.data),
        &DataCloud::from_travel_time_data(&b.data),
        &MatchOptions::default(),
    )
    .unwrap();
    for &(i, j) in &c.pairs {
        assert_eq!(a.sealed.sources[i], b.sealed.sources[j]);
    }
    assert_eq!(c.distortion, 0.0);
    assert!(!c.flagged);
}

#[test]
fn matching_data_of_a_boundary_fixing_pullback() {
    let base = MetricModel::conformal_bump([0.2, -0.1], 0.3, 0.4).unwrap();
    let phi = DiscDiffeo::RadialBump { epsilon: 0.2 };
    let pulled = base.pullback(phi.clone()).unwrap();
    let opts = SourceOptions {
        boundary: 8,
        ..SourceOptions::default()
    };
    let sources = sample_sources(3, 60, &opts);
    let moved: Vec<[f64; 2]> = sources
        .iter()
        .map(|p| phi.inverse_apply(*p).unwrap())
        .collect();
    let a = ttd(&base, &sources, 128, 1);
    let b = ttd_pullback(&pulled, &moved, 128, 2);
    let c = nearest_neighbor_match(
        &DataCloud::from_travel_time_data(&a.data),
        &DataCloud::from_travel_time_data(&b.data),
        &MatchOptions::default(),
    )
    .unwrap();
    assert!(c.distortion <= 2e-2, "distortion {}", c.distortion);
    assert_eq!(c.boundary_check.boundary_functions, 8);
    assert!(c.boundary_check.passed());
    assert!(!c.flagged);
    for &(i, j) in &c.pairs {
        let k = sources
            .iter()
            .position(|p| *p == a.sealed.sources[i])
            .unwrap();
        assert_eq!(b.sealed.sources[j], moved[k]);
    }
}

#[test]
fn matching_scaled_data_is_flagged() {
    let model = MetricModel::euclidean();
    let sources = sample_interior_sources(6, 40);
    let a = ttd(&model, &sources, 64, 1);
    let scaled = TravelTimeData {
        functions: a
            .data
            .functions
            .iter()
            .map(|f| TravelTimeFunction {
                values: f.values.iter().map(|v| 1.1 * v).collect(),
            })
            .collect(),
        ..a.data.clone()
    };
    let ca = DataCloud::from_travel_time_data(&a.data);
    let c = nearest_neighbor_match(
        &ca,
        &DataCloud::from_travel_time_data(&scaled),
        &MatchOptions::default(),
    )
    .unwrap();
    let diam = embed_as_metric_space(&ca).unwrap().diameter();
    assert!(c.flagged);
    assert!(
        (c.distortion - 0.1 * diam).abs() <= 0.02 * diam,
        "{} vs {}",
        c.distortion,
        0.1 * diam
    );
}

#[test]
fn moved_boundary_sources_fail_the_boundary_check() {
    let model = MetricModel::euclidean();
    let opts = SourceOptions {
        boundary: 4,
        ..SourceOptions::default()
    };
    let sources = sample_sources(3, 10, &opts);
    let a = ttd(&model, &sources, 64, 1);
    let rotated: Vec<[f64; 2]> = sources
        .iter()
        .map(|p| DiscDiffeo::Rotation { angle: 0.5 }.apply(*p))
        .collect();
    let b = ttd(&model, &rotated, 64, 1);
    let c = nearest_neighbor_match(
        &DataCloud::from_travel_time_data(&a.data),
        &DataCloud::from_travel_time_data(&b.data),
        &MatchOptions::default(),
    )
    .unwrap();
    assert_eq!(c.boundary_check.boundary_functions, 4);
    assert!(!c.boundary_check.passed());
    assert!(c.flagged);
}

#[test]
fn gh_bound_of_the_identity_correspondence_is_zero() {
    let s = space(&common::random_points(1, 6, 1.0));
    let c = Correspondence::new((0..6).map(|i| (i, i)).collect(), &s, &s).unwrap();
    assert_eq!(gh_upper_bound(&s, &s, &c).unwrap(), 0.0);
}

#[test]
fn gh_bound_of_two_point_spaces() {
    let a = FiniteMetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let b = FiniteMetricSpace::new(vec![vec![0.0, 1.2], vec![1.2, 0.0]]).unwrap();
    let c = Correspondence::new(vec![(0, 0), (1, 1)], &a, &b).unwrap();
    assert!((gh_upper_bound(&a, &b, &c).unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn correspondences_must_cover_the_first_space() {
    let s = space(&common::random_points(1, 3, 1.0));
    assert!(matches!(
        Correspondence::new(vec![(0, 0), (1, 1)], &s, &s),
        Err(Error::Shape(_))
    ));
}

/// Exact GH from the definition: every relation `R ⊆ X × Y` whose
/// projections are onto, for spaces small enough to list all subsets.
fn gh_by_relations(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let (n, m) = (x.len(), y.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << cells.len()) {
        let r: Vec<(usize, usize)> = (0..cells.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| cells[b])
            .collect();
        if (0..n).any(|i| !r.iter().any(|p| p.0 == i))
            || (0..m).any(|j| !r.iter().any(|p| p.1 == j))
        {
            continue;
        }
        let dis = r
            .iter()
            .flat_map(|a| r.iter().map(move |b| (a, b)))
            .map(|(a, b)| (x.get(a.0, b.0) - y.get(a.1, b.1)).abs())
            .fold(0.0, f64::max);
        best = best.min(dis);
    }
    0.5 * best
}

#[test]
fn exact_gh_agrees_with_the_relation_oracle_on_tiny_spaces() {
    for seed in 0..12u64 {
        let x = space(&common::random_points(seed, 3, 1.0));
        let y = space(&common::random_points(
            seed + 100,
            1 + seed as usize % 4,
            1.0,
        ));
        let exact = exact_gromov_hausdorff(&x, &y).unwrap();
        assert!(
            (exact - gh_by_relations(&x, &y)).abs() < 1e-15,
            "seed {seed}"
        );
    }
}

#[test]
fn exact_gh_agrees_with_the_map_pair_oracle() {
    for seed in 0..10u64 {
        let x = space(&common::random_points(seed, 5, 1.0));
        let y = space(&common::random_points(
            seed + 50,
            4 + seed as usize % 2,
            1.0,
        ));
        let exact = exact_gromov_hausdorff(&x, &y).unwrap();
        assert!(
            (exact - common::gh_brute(&x.matrix(), &y.matrix())).abs() < 1e-15,
            "seed {seed}"
        );
    }
}

#[test]
fn exact_gh_refuses_large_spaces() {
    let x = space(&common::random_points(1, 8, 1.0));
    assert!(matches!(
        exact_gromov_hausdorff(&x, &x),
        Err(Error::Config(_))
    ));
}

#[test]
fn gh_bound_dominates_exact_gh_on_six_point_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..10u64 {
        let x = space(&common::random_points(seed, 6, 1.0));
        let y = space(&common::random_points(seed + 300, 6, 1.0));
        let exact = exact_gromov_hausdorff(&x, &y).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let c = Correspondence::new((0..6).map(|i| (i, perm[i])).collect(), &x, &y).unwrap();
        assert!(gh_upper_bound(&x, &y, &c).unwrap() >= exact);
    }
}

// Broken scattering relations.

fn euclidean_table() -> &'static (BrokenScatteringTable, RecoveredLensData) {
    static T: OnceLock<(BrokenScatteringTable, RecoveredLensData)> = OnceLock::new();
    T.get_or_init(|| {
        let grid = DirectionGrid::new(64, 31, 0.99).unwrap();
        let t =
            make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
                .unwrap();
        let lens = recover_lens(&t, &LensOptions::default());
        (t, lens)
    })
}

fn k05_table() -> &'static (BrokenScatteringTable, RecoveredLensData) {
    static T: OnceLock<(BrokenScatteringTable, RecoveredLensData)> = OnceLock::new();
    T.get_or_init(|| {
        let grid = DirectionGrid::new(32, 15, 0.95).unwrap();
        let t = make_broken_scattering_data(
            &MetricModel::constant_curvature(0.5).unwrap(),
            &grid,
            &BsrOptions::default(),
        )
        .unwrap();
        let lens = recover_lens(&t, &LensOptions::default());
        (t, lens)
    })
}

fn full_trace(model: &MetricModel, bv: BoundaryVector) -> GeodesicTrace {
    trace(
        model,
        lift_inward(model, bv).unwrap(),
        TraceStart::Boundary(bv),
        &TraceOptions::default(),
    )
    .unwrap()
}

#[test]
fn exit_time_of_the_euclidean_diameter() {
    let (t, _) = euclidean_table();
    let v = t.grid.index(0, t.grid.normal_column().unwrap());
    assert!((bsr_exit_time(t, v).unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn exit_time_of_a_euclidean_chord() {
    let grid = DirectionGrid::new(32, 11, 0.75).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let v = grid.index(0, 9);
    assert!((grid.vector(v).mu - 0.6).abs() < 1e-12);
    assert!((bsr_exit_time(&t, v).unwrap() - 1.6).abs() < 1e-8);
}

#[test]
fn exit_times_match_the_tracer_for_positive_curvature() {
    let model = MetricModel::constant_curvature(0.5).unwrap();
    let (t, _) = k05_table();
    for v in (0..t.grid.len()).step_by(7) {
        let bv = t.directions[v];
        let traced = integrate_geodesic(&model, lift_inward(&model, bv).unwrap(), 1e-3).unwrap();
        assert!((bsr_exit_time(t, v).unwrap() - traced.length).abs() < 1e-5);
    }
}

#[test]
fn missing_diagonal_is_an_incomplete_table() {
    let grid = DirectionGrid::new(4, 3, 0.5).unwrap();
    let t = BrokenScatteringTable::from_entries(
        grid,
        (0..12).map(|i| grid.vector(i)).collect(),
        &[],
        1e-4,
        None,
    )
    .unwrap();
    assert!(matches!(
        bsr_exit_time(&t, 3),
        Err(Error::IncompleteTable(3, 3))
    ));
}

#[test]
fn scattering_partner_of_the_diameter_is_its_reversal() {
    let (t, _) = euclidean_table();
    let b0 = t.grid.normal_column().unwrap();
    let (j, w) = bsr_scattering_relation(t, t.grid.index(0, b0), &LensOptions::default()).unwrap();
    assert!((w.theta - PI).abs() < 1e-12);
    assert_eq!(w.mu, 0.0);
    assert_eq!(j, t.grid.index(t.grid.m_theta / 2, b0));
}

#[test]
fn euclidean_partners_are_the_analytic_reversals() {
    let (t, lens) = euclidean_table();
    assert_eq!(lens.resolved_fraction(t.grid.len()), 1.0);
    for v in 0..t.grid.len() {
        let bv = t.directions[v];
        let (_, exit) = common::euclidean_exit(bv.theta, bv.mu);
        let w = t.directions[lens.sigma[v].unwrap()];
        assert!(common::angle_gap(w.theta, exit) < 1e-6, "direction {v}");
        assert!((w.mu + bv.mu).abs() < 1e-6, "direction {v}");
    }
}

#[test]
fn close_runner_ups_are_grid_neighbours_of_the_pair() {
    // A grid vector next to v or σ(v) carries almost the same geodesic, so
    // its V-set differs from V(v) in few elements.
    let (t, lens) = euclidean_table();
    let g = t.grid;
    let threshold = LensOptions::default().threshold;
    let mut close = 0;
    for v in 0..g.len() {
        if lens.runner_up[v] > 2.0 * threshold {
            continue;
        }
        close += 1;
        let ends = [t.directions[v], t.directions[lens.sigma[v].unwrap()]];
        let near = (0..t.len())
            .filter(|&w| w != v && Some(w) != lens.sigma[v])
            .any(|w| {
                let d = t.directions[w];
                ends.iter().any(|e| {
                    common::angle_gap(d.theta, e.theta) <= g.theta_spacing() + 1e-12
                        && (d.mu - e.mu).abs() <= g.mu_spacing() + 1e-12
                })
            });
        assert!(near, "direction {v}");
        assert!(lens.best[v] < lens.runner_up[v]);
    }
    assert!(close > 0);
}

#[test]
fn scattering_relation_is_an_involution_preserving_exit_time() {
    for (t, lens) in [euclidean_table(), k05_table()] {
        let mut resolved = 0;
        for v in 0..t.len() {
            if let Some(s) = lens.sigma[v] {
                resolved += 1;
                assert_eq!(lens.sigma[s], Some(v));
                assert!((lens.tau[s].unwrap() - lens.tau[v].unwrap()).abs() < 1e-5);
            }
        }
        assert!(resolved >= t.grid.len());
    }
}

#[test]
fn chord_partner_is_the_nearest_direction_to_the_analytic_exit() {
    let grid = DirectionGrid::new(32, 11, 0.75).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let v = grid.index(0, 9);
    let (_, exit) = common::euclidean_exit(0.0, 0.6);
    let gap = |d: &BoundaryVector| common::angle_gap(d.theta, exit) + (d.mu + 0.6).abs();
    let nearest = (0..t.len())
        .filter(|&w| w != v)
        .min_by(|&a, &b| gap(&t.directions[a]).total_cmp(&gap(&t.directions[b])));
    let (j, _) = bsr_scattering_relation(&t, v, &LensOptions::default()).unwrap();
    assert_eq!(Some(j), nearest);
}

#[test]
fn ambiguous_partners_are_reported() {
    let grid = DirectionGrid::new(8, 3, 0.5).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let strict = LensOptions { threshold: -1.0 };
    assert!(matches!(
        bsr_scattering_relation(&t, 0, &strict),
        Err(Error::AmbiguousScattering { index: 0, .. })
    ));
}

fn chord_grid_lens(t: &BrokenScatteringTable) -> RecoveredLensData {
    // Partners set by hand from line geometry: the diameters pair with the
    // antipodal normals, and the chord (0, 1) → (0.6, −0.8) is left out.
    let n = t.len();
    let mut sigma = vec![None; n];
    let g = t.grid;
    for a in 0..4 {
        sigma[g.index(a, 1)] = Some(g.index((a + 2) % 4, 1));
    }
    RecoveredLensData {
        tau: (0..n).map(|v| bsr_exit_time(t, v).ok()).collect(),
        sigma,
        best: vec![0.0; n],
        runner_up: vec![1.0; n],
    }
}

#[test]
fn split_times_of_crossing_diameters() {
    let grid = DirectionGrid::new(4, 3, 0.6 / 3.6f64.sqrt()).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let lens = chord_grid_lens(&t);
    let (x, y) = (grid.index(0, 1), grid.index(1, 1));
    let (t1, t2) = bsr_travel_times(&t, &lens, x, y).unwrap();
    assert!((t1 - 1.0).abs() < 1e-8 && (t2 - 1.0).abs() < 1e-8);
    assert_eq!(t1 + t2, t.get(x, y).unwrap());
}

#[test]
fn split_times_of_a_diameter_and_an_oblique_chord() {
    let grid = DirectionGrid::new(4, 3, 0.6 / 3.6f64.sqrt()).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let lens = chord_grid_lens(&t);
    let (x, oblique) = (grid.index(0, 1), grid.index(1, 0));
    // The reversal of the chord is not in the lens, so the split goes through
    // the reversal of the diameter.
    let (t1, t2) = bsr_travel_times(&t, &lens, x, oblique).unwrap();
    assert!((t1 - 2.0 / 3.0).abs() < 1e-8);
    assert!((t2 - 1.054093).abs() < 1e-6);
    let (s2, s1) = bsr_travel_times(&t, &lens, oblique, x).unwrap();
    assert!((s1 - t1).abs() < 1e-8 && (s2 - t2).abs() < 1e-8);
}

#[test]
fn split_without_partners_is_an_error() {
    let grid = DirectionGrid::new(4, 3, 0.6 / 3.6f64.sqrt()).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let mut lens = chord_grid_lens(&t);
    lens.sigma = vec![None; t.len()];
    assert!(matches!(
        bsr_travel_times(&t, &lens, grid.index(0, 1), grid.index(1, 1)),
        Err(Error::AmbiguousScattering { .. })
    ));
}

#[test]
fn split_times_match_traced_intersections() {
    let model = MetricModel::constant_curvature(0.5).unwrap();
    let (t, lens) = k05_table();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = t.grid.len();
    let mut checked = 0;
    while checked < 200 {
        let (v1, v2) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if v1 == v2 || lens.sigma[v1] == Some(v2) {
            continue;
        }
        let Some(total) = t.get(v1, v2) else { continue };
        let Ok((t1, t2)) = bsr_travel_times(t, lens, v1, v2) else {
            continue;
        };
        assert_eq!(t1 + t2, total);
        let a = full_trace(&model, t.directions[v1]);
        let b = full_trace(&model, t.directions[v2]);
        let Intersection::Point { t_a, t_b, .. } = trace_intersection(&a, &b, 1e-4) else {
            panic!("pair ({v1}, {v2}) has a total time but no crossing");
        };
        assert!(
            (t1 - t_a).abs() < 1e-5 && (t2 - t_b).abs() < 1e-5,
            "({v1}, {v2})"
        );
        checked += 1;
    }
}

// Travel time data from broken scattering relations.

fn reconstruction() -> &'static Reconstruction {
    static R: OnceLock<Reconstruction> = OnceLock::new();
    R.get_or_init(|| {
        let (t, lens) = euclidean_table();
        bsr_to_travel_time_data(
            t,
            lens,
            &BoundaryGrid::new(256).unwrap(),
            &ReconstructionOptions::default(),
        )
        .unwrap()
    })
}

fn level_function(r: &Reconstruction, theta: f64, s: f64) -> &[f64] {
    let k = r
        .labels
        .iter()
        .position(|l| l.theta == theta && (l.s - s).abs() < 1e-9)
        .unwrap();
    &r.data.functions[k].values
}

#[test]
fn normal_points_are_traced_along_the_inward_normal() {
    let labels = [ttlab::inversion::ELabel {
        theta: FRAC_PI_2,
        s: 0.25,
    }];
    let p = label_points(&MetricModel::euclidean(), &labels).unwrap();
    assert!(p[0][0].abs() < 1e-12 && (p[0][1] - 0.75).abs() < 1e-9);
}

#[test]
fn function_at_half_the_diameter_is_constant() {
    let r = reconstruction();
    let f = level_function(r, 0.0, 1.0);
    let worst = f.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 2e-2, "max deviation {worst}");
}

#[test]
fn function_at_a_quarter_of_the_diameter_is_the_offset_source() {
    let r = reconstruction();
    let f = level_function(r, 0.0, 0.5);
    let oracle = euclidean_r([0.5, 0.0], &r.data.grid);
    assert!(
        common::sup(f, &oracle) <= 2e-2,
        "max deviation {}",
        common::sup(f, &oracle)
    );
}

#[test]
fn reconstruction_is_close_to_forward_data_of_the_labelled_points() {
    let r = reconstruction();
    assert_eq!(r.data.functions.len(), 64 * 31);
    assert_eq!(r.coverage.functions, r.data.functions.len());
    assert_eq!(r.coverage.skipped_pairs, 0);
    let points = label_points(&MetricModel::euclidean(), &r.labels).unwrap();
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| euclidean_r(*p, &r.data.grid))
        .collect();
    let forward = cloud(rows, Mode::Ttd);
    let h = hausdorff_distance(&DataCloud::from_travel_time_data(&r.data), &forward).unwrap();
    assert!(h <= 3e-2, "Hausdorff distance {h}");
}

#[test]
fn both_fill_rules_reproduce_the_centre() {
    // Every footpoint is at distance 1 from the centre, so neither rule has
    // anything to interpolate.
    let (t, lens) = euclidean_table();
    let grid = BoundaryGrid::new(64).unwrap();
    for fill in [AngularFill::Nearest, AngularFill::Linear] {
        let opts = ReconstructionOptions {
            fill,
            ..ReconstructionOptions::default()
        };
        let r = bsr_to_travel_time_data(t, lens, &grid, &opts).unwrap();
        let worst = level_function(&r, 0.0, 1.0)
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{fill:?}: {worst}");
    }
}

#[test]
fn nearest_fill_leaves_wider_errors_near_the_boundary() {
    // Points close to the boundary see footpoints whose crossings do not
    // bracket their level, and the nearest rule copies a distant value.
    let r = reconstruction();
    let (t, lens) = euclidean_table();
    let opts = ReconstructionOptions {
        fill: AngularFill::Nearest,
        ..ReconstructionOptions::default()
    };
    let near = bsr_to_travel_time_data(t, lens, &r.data.grid, &opts).unwrap();
    let error = |rec: &Reconstruction| {
        let points = label_points(&MetricModel::euclidean(), &rec.labels).unwrap();
        rec.data
            .functions
            .iter()
            .zip(&points)
            .map(|(f, p)| common::sup(&f.values, &euclidean_r(*p, &rec.data.grid)))
            .fold(0.0, f64::max)
    };
    assert!(error(&near) > error(r));
    assert_eq!(near.coverage, r.coverage);
}

#[test]
fn even_direction_grids_have_no_normal_column() {
    let grid = DirectionGrid::new(8, 4, 0.5).unwrap();
    let t = make_broken_scattering_data(&MetricModel::euclidean(), &grid, &BsrOptions::default())
        .unwrap();
    let lens = recover_lens(&t, &LensOptions::default());
    let r = bsr_to_travel_time_data(
        &t,
        &lens,
        &BoundaryGrid::new(16).unwrap(),
        &ReconstructionOptions::default(),
    );
    assert!(matches!(r, Err(Error::Config(_))));
}

// Distances modulo boundary diffeomorphisms.

#[test]
fn invariant_distance_of_a_set_with_itself() {
    let g = ttd(
        &MetricModel::constant_curvature(0.5).unwrap(),
        &sample_interior_sources(1, 40),
        64,
        1,
    );
    let a = DataCloud::from_travel_time_data(&g.data);
    let fit = diffeo_invariant_distance(&a, &a, &DiffeoSearchOptions::default()).unwrap();
    assert!(fit.value <= 1e-3, "value {}", fit.value);
    let id = CircleDiffeo::identity(3);
    assert!(fit.psi.max_deviation(&id, &a.grid.angles()) <= 1e-2);
}

#[test]
fn invariant_distance_recovers_a_rotation() {
    let angle = PI / 5.0;
    let phi = DiscDiffeo::Rotation { angle };
    let sources = sample_interior_sources(2, 40);
    let moved: Vec<[f64; 2]> = sources
        .iter()
        .map(|p| phi.inverse_apply(*p).unwrap())
        .collect();
    let pulled = MetricModel::euclidean().pullback(phi).unwrap();
    let a = ttd(&MetricModel::euclidean(), &sources, 128, 1);
    let b = ttd_pullback(&pulled, &moved, 128, 2);
    let ca = DataCloud::from_travel_time_data(&a.data);
    let fit = diffeo_invariant_distance(
        &ca,
        &DataCloud::from_travel_time_data(&b.data),
        &DiffeoSearchOptions::default(),
    )
    .unwrap();
    assert!(fit.value <= 2e-2, "value {}", fit.value);
    let truth = CircleDiffeo::rotation(-angle, 3);
    let dev = fit.psi.max_deviation(&truth, &ca.grid.angles());
    assert!(dev <= 1e-2, "deviation {dev}");
}

#[test]
fn invariant_distance_separates_non_isometric_metrics() {
    let sources = sample_interior_sources(3, 40);
    let a = ttd(&MetricModel::euclidean(), &sources, 64, 1);
    let b = ttd(
        &MetricModel::constant_curvature(0.5).unwrap(),
        &sources,
        64,
        1,
    );
    let (ca, cb) = (
        DataCloud::from_travel_time_data(&a.data),
        DataCloud::from_travel_time_data(&b.data),
    );
    let fit = diffeo_invariant_distance(&ca, &cb, &DiffeoSearchOptions::default()).unwrap();
    assert!(fit.value >= 0.05, "value {}", fit.value);
    let c = nearest_neighbor_match(&ca, &cb, &MatchOptions::default()).unwrap();
    let bound = gh_upper_bound(
        &embed_as_metric_space(&ca).unwrap(),
        &embed_as_metric_space(&cb).unwrap(),
        &c,
    )
    .unwrap();
    assert!(
        fit.value >= bound,
        "invariant distance {} below the GH surrogate {bound}",
        fit.value
    );
}

#[test]
fn non_monotone_circle_maps_are_rejected() {
    let psi = CircleDiffeo {
        c: 0.0,
        a: vec![0.0, 0.3],
        b: vec![0.0, 0.3],
    };
    assert!(matches!(psi.validate(), Err(Error::InvalidDiffeo(_))));
}

#[test]
fn difference_data_match_like_travel_time_data() {
    let model = MetricModel::constant_curvature(-0.5).unwrap();
    let sources = sample_interior_sources(8, 30);
    let opts = SurveyOptions::default();
    let grid = BoundaryGrid::new(64).unwrap();
    let a = make_travel_time_difference_data(&model, &sources, &grid, &opts).unwrap();
    let b = make_travel_time_difference_data(
        &model,
        &sources,
        &grid,
        &SurveyOptions { seed: 5, ..opts },
    )
    .unwrap();
    let c = nearest_neighbor_match(
        &DataCloud::from_difference_data(&a.data),
        &DataCloud::from_difference_data(&b.data),
        &MatchOptions::default(),
    )
    .unwrap();
    assert_eq!(c.distortion, 0.0);
    for &(i, j) in &c.pairs {
        assert_eq!(a.sealed.sources[i], b.sealed.sources[j]);
    }
}
