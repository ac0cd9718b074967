//! Interior intersections between pairs of traced geodesics.
//!
//! Each sample interval of a trace is a cubic Hermite arc. Candidate interval
//! pairs are filtered by the bounding boxes of their Bézier control polygons
//! and refined by Newton iteration on `A(s) − B(u) = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hermite, GeodesicTrace};
use crate::linalg::{self, Vec2};

pub const DEFAULT_INTERSECTION_TOL: f64 = 1e-4;
/// Intersections closer than this to either end of a trace are boundary
/// contacts, not interior crossings.
const END_MARGIN: f64 = 1e-6;
const PARAM_SLACK: f64 = 1e-6;
const HASH_CELLS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intersection {
    None,
    Point {
        t_a: f64,
        t_b: f64,
        point: Vec2,
    },
    /// The two traces are one geodesic run in opposite directions.
    ReversalPair,
    /// The two traces are one geodesic run in the same direction.
    Identical,
}

/// A non-empty result of [`intersect_all`] for traces `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairHit {
    pub a: u32,
    pub b: u32,
    pub hit: Intersection,
}

#[derive(Clone, Copy)]
struct Arc {
    t0: f64,
    dt: f64,
    p0: Vec2,
    v0: Vec2,
    p1: Vec2,
    v1: Vec2,
    lo: Vec2,
    hi: Vec2,
}

fn arcs(tr: &GeodesicTrace, pad: f64) -> Vec<Arc> {
    tr.samples
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            let c1 = linalg::add(a.x, linalg::scale(a.v, dt / 3.0));
            let c2 = linalg::sub(b.x, linalg::scale(b.v, dt / 3.0));
            let mut lo = a.x;
            let mut hi = a.x;
            for p in [c1, c2, b.x] {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            Arc {
                t0: a.t,
                dt,
                p0: a.x,
                v0: a.v,
                p1: b.x,
                v1: b.v,
                lo: [lo[0] - pad, lo[1] - pad],
                hi: [hi[0] + pad, hi[1] + pad],
            }
        })
        .collect()
}

#[inline]
fn boxes_overlap(a: &Arc, b: &Arc) -> bool {
    a.lo[0] <= b.hi[0] && b.lo[0] <= a.hi[0] && a.lo[1] <= b.hi[1] && b.lo[1] <= a.hi[1]
}

/// Newton refinement of a crossing between two arcs, in local parameters.
fn refine(a: &Arc, b: &Arc, tol: f64) -> Option<(f64, f64, Vec2)> {
    let da = linalg::sub(a.p1, a.p0);
    let db = linalg::sub(b.p1, b.p0);
    let den = linalg::cross(da, db);
    let w = linalg::sub(b.p0, a.p0);
    let (mut s, mut u) = if den.abs() > 1e-300 {
        (
            (linalg::cross(w, db) / den).clamp(0.0, 1.0),
            (linalg::cross(w, da) / den).clamp(0.0, 1.0),
        )
    } else {
        (0.5, 0.5)
    };
    let mut f = [f64::INFINITY; 2];
    let mut pa = a.p0;
    for _ in 0..25 {
        let (p, va) = hermite(a.p0, a.v0, a.p1, a.v1, a.dt, s);
        let (q, vb) = hermite(b.p0, b.v0, b.p1, b.v1, b.dt, u);
        pa = p;
        f = linalg::sub(p, q);
        let j = [[a.dt * va[0], -b.dt * vb[0]], [a.dt * va[1], -b.dt * vb[1]]];
        let step = linalg::solve(&j, f)?;
        s -= step[0];
        u -= step[1];
        if !(s.is_finite() && u.is_finite()) || s < -1.0 || s > 2.0 || u < -1.0 || u > 2.0 {
            return None;
        }
        if step[0].abs() < 1e-15 && step[1].abs() < 1e-15 {
            break;
        }
    }
    let inside = |x: f64| (-PARAM_SLACK..=1.0 + PARAM_SLACK).contains(&x);
    (linalg::norm(f) <= tol && inside(s) && inside(u)).then_some((s, u, pa))
}

fn endpoint_relation(a: &GeodesicTrace, b: &GeodesicTrace, tol: f64) -> Intersection {
    let close = |p: Vec2, q: Vec2| linalg::norm(linalg::sub(p, q)) <= tol;
    let (sa, ea, sb, eb) = (a.start().x, a.end().x, b.start().x, b.end().x);
    if close(sa, eb) && close(ea, sb) {
        Intersection::ReversalPair
    } else if close(sa, sb) && close(ea, eb) {
        Intersection::Identical
    } else {
        Intersection::None
    }
}

fn interior(a: &Arc, b: &Arc, la: f64, lb: f64, s: f64, u: f64, p: Vec2) -> Option<Intersection> {
    let t_a = a.t0 + s * a.dt;
    let t_b = b.t0 + u * b.dt;
    (t_a > END_MARGIN && t_a < la - END_MARGIN && t_b > END_MARGIN && t_b < lb - END_MARGIN)
        .then_some(Intersection::Point { t_a, t_b, point: p })
}

/// The interior intersection of two traces of the same metric, if their
/// arcs pass within `tol` of each other.
pub fn trace_intersection(a: &GeodesicTrace, b: &GeodesicTrace, tol: f64) -> Intersection {
    let rel = endpoint_relation(a, b, tol);
    if rel != Intersection::None {
        return rel;
    }
    let aa = arcs(a, tol);
    let bb = arcs(b, tol);
    for x in &aa {
        for y in &bb {
            if !boxes_overlap(x, y) {
                continue;
            }
            if let Some((s, u, p)) = refine(x, y, tol) {
                if let Some(hit) = interior(x, y, a.length, b.length, s, u, p) {
                    return hit;
                }
            }
        }
    }
    Intersection::None
}

/// All pairwise relations among `traces`, found through a uniform spatial
/// hash of arc bounding boxes. Pairs with no relation are omitted; the
/// output is ordered by `(a, b)`.
pub fn intersect_all(traces: &[GeodesicTrace], tol: f64) -> Vec<PairHit> {
    let all: Vec<Vec<Arc>> = traces.par_iter().map(|t| arcs(t, 0.5 * tol)).collect();
    let lo = -1.05;
    let cell = 2.1 / HASH_CELLS as f64;
    let cell_of = |x: f64| (((x - lo) / cell).floor().max(0.0) as usize).min(HASH_CELLS - 1);
    let span = |arc: &Arc| {
        (
            cell_of(arc.lo[0]),
            cell_of(arc.hi[0]),
            cell_of(arc.lo[1]),
            cell_of(arc.hi[1]),
        )
    };

    let mut counts = vec![0u32; HASH_CELLS * HASH_CELLS + 1];
    for arcs in &all {
        for arc in arcs {
            let (x0, x1, y0, y1) = span(arc);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    counts[cy * HASH_CELLS + cx + 1] += 1;
                }
            }
        }
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let mut fill = counts.clone();
    let mut entries = vec![(0u32, 0u32); *counts.last().unwrap() as usize];
    for (ti, arcs) in all.iter().enumerate() {
        for (ai, arc) in arcs.iter().enumerate() {
            let (x0, x1, y0, y1) = span(arc);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let c = cy * HASH_CELLS + cx;
                    entries[fill[c] as usize] = (ti as u32, ai as u32);
                    fill[c] += 1;
                }
            }
        }
    }

    (0..traces.len())
        .into_par_iter()
        .map(|ia| {
            // 0 = untouched, 1 = endpoints checked, 2 = settled.
            let mut state = vec![0u8; traces.len()];
            let mut hits = Vec::new();
            let ta = &traces[ia];
            for arc in &all[ia] {
                let (x0, x1, y0, y1) = span(arc);
                for cy in y0..=y1 {
                    for cx in x0..=x1 {
                        let c = cy * HASH_CELLS + cx;
                        for &(ib, bi) in &entries[counts[c] as usize..counts[c + 1] as usize] {
                            let ib = ib as usize;
                            if ib <= ia || state[ib] == 2 {
                                continue;
                            }
                            let tb = &traces[ib];
                            if state[ib] == 0 {
                                let rel = endpoint_relation(ta, tb, tol);
                                if rel != Intersection::None {
                                    hits.push(PairHit {
                                        a: ia as u32,
                                        b: ib as u32,
                                        hit: rel,
                                    });
                                    state[ib] = 2;
                                    continue;
                                }
                                state[ib] = 1;
                            }
                            let brc = &all[ib][bi as usize];
                            if !boxes_overlap(arc, brc) {
                                continue;
                            }
                            if let Some((s, u, p)) = refine(arc, brc, tol) {
                                if let Some(hit) = interior(arc, brc, ta.length, tb.length, s, u, p)
                                {
                                    hits.push(PairHit {
                                        a: ia as u32,
                                        b: ib as u32,
                                        hit,
                                    });
                                    state[ib] = 2;
                                }
                            }
                        }
                    }
                }
            }
            hits.sort_by_key(|h| h.b);
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_geodesic, PhasePoint};
    use crate::metric::MetricModel;

    fn chord(from: Vec2, to: Vec2) -> GeodesicTrace {
        let d = linalg::sub(to, from);
        let v = linalg::scale(d, 1.0 / linalg::norm(d));
        integrate_geodesic(&MetricModel::euclidean(), PhasePoint { x: from, v }, 1e-3).unwrap()
    }

    #[test]
    fn perpendicular_diameters_meet_at_the_centre() {
        let a = chord([1.0, 0.0], [-1.0, 0.0]);
        let b = chord([0.0, 1.0], [0.0, -1.0]);
        match trace_intersection(&a, &b, DEFAULT_INTERSECTION_TOL) {
            Intersection::Point { t_a, t_b, point } => {
                assert!((t_a - 1.0).abs() < 1e-12 && (t_b - 1.0).abs() < 1e-12);
                assert!(linalg::norm(point) < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_traces_are_flagged() {
        let a = chord([1.0, 0.0], [-1.0, 0.0]);
        let b = chord([-1.0, 0.0], [1.0, 0.0]);
        assert_eq!(
            trace_intersection(&a, &b, DEFAULT_INTERSECTION_TOL),
            Intersection::ReversalPair
        );
        assert_eq!(
            trace_intersection(&a, &a, DEFAULT_INTERSECTION_TOL),
            Intersection::Identical
        );
    }

    #[test]
    fn chords_sharing_a_footpoint_do_not_intersect_inside() {
        let a = chord([1.0, 0.0], [-1.0, 0.0]);
        let b = chord([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(
            trace_intersection(&a, &b, DEFAULT_INTERSECTION_TOL),
            Intersection::None
        );
    }

    #[test]
    fn batch_agrees_with_pairwise_search() {
        let m = MetricModel::constant_curvature(0.4).unwrap();
        let traces: Vec<_> = (0..12)
            .map(|i| {
                let bv = crate::geodesic::BoundaryVector {
                    theta: 0.53 * i as f64,
                    mu: -0.8 + 0.13 * i as f64,
                };
                let p = crate::geodesic::lift_inward(&m, bv).unwrap();
                let opts = crate::geodesic::TraceOptions {
                    record_every: 10,
                    ..Default::default()
                };
                crate::geodesic::trace(&m, p, crate::geodesic::TraceStart::Boundary(bv), &opts)
                    .unwrap()
            })
            .collect();
        let batch = intersect_all(&traces, DEFAULT_INTERSECTION_TOL);
        let mut expected = Vec::new();
        for a in 0..traces.len() {
            for b in a + 1..traces.len() {
                let hit = trace_intersection(&traces[a], &traces[b], DEFAULT_INTERSECTION_TOL);
                if hit != Intersection::None {
                    expected.push((a as u32, b as u32));
                }
            }
        }
        let got: Vec<_> = batch.iter().map(|h| (h.a, h.b)).collect();
        assert_eq!(got, expected);
        assert!(!got.is_empty());
    }
}
