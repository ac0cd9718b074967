//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the solvers under test: the closed forms come from
//! spherical and hyperbolic trigonometry via stereographic projection, and the
//! numerical oracles (grid Dijkstra, brute-force Hausdorff and GH) are
//! written from their definitions.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type P = [f64; 2];

pub fn norm(a: P) -> f64 {
    (a[0] * a[0] + a[1] * a[1]).sqrt()
}

pub fn dist(a: P, b: P) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

/// Distance for `g = 4 (1 + K|x|²)⁻² δ`.
///
/// With `y = √|K| x` the metric is `R²` times the round sphere (`K > 0`) or
/// the Poincaré disc (`K < 0`) in stereographic coordinates, `R = 1/√|K|`.
pub fn constant_curvature_distance(k: f64, a: P, b: P) -> f64 {
    if k == 0.0 {
        return 2.0 * dist(a, b);
    }
    let s = k.abs().sqrt();
    let ya = [a[0] * s, a[1] * s];
    let yb = [b[0] * s, b[1] * s];
    let na = ya[0] * ya[0] + ya[1] * ya[1];
    let nb = yb[0] * yb[0] + yb[1] * yb[1];
    let chord = dist(ya, yb);
    if k > 0.0 {
        2.0 / s * (chord / ((1.0 + na) * (1.0 + nb)).sqrt()).asin()
    } else {
        2.0 / s * (chord / ((1.0 - na) * (1.0 - nb)).sqrt()).asinh()
    }
}

/// Exit time and exit angle of the geodesic entering at boundary angle `θ`
/// with tangential component `μ`, for the constant curvature model.
///
/// The disc is a geodesic ball of radius `ρR` about the pole. For an entry
/// angle `β = asin μ` from the inward normal, Napier's rules in the right
/// triangle formed by the pole, the entry point and the chord midpoint give
/// the half chord `c` from `tan(c/R) = tan ρ cos β` (hyperbolic: `tanh`), and
/// the half central angle `P` from `cos P = tan(PC)/tan ρ` with
/// `sin(PC) = sin ρ sin β`.
pub fn constant_curvature_exit(k: f64, theta: f64, mu: f64) -> (f64, f64) {
    let beta = mu.asin();
    if k == 0.0 {
        return (4.0 * beta.cos(), theta + PI - 2.0 * beta);
    }
    let s = k.abs().sqrt();
    let r = 1.0 / s;
    if k > 0.0 {
        let rho = 2.0 * s.atan();
        let half = r * (rho.tan() * beta.cos()).atan();
        let pc = (rho.sin() * beta.sin()).asin();
        let p = (pc.tan() / rho.tan()).acos();
        (2.0 * half, theta + 2.0 * p)
    } else {
        let rho = 2.0 * s.atanh();
        let half = r * (rho.tanh() * beta.cos()).atanh();
        let pc = (rho.sinh() * beta.sin()).asinh();
        let p = (pc.tanh() / rho.tanh()).acos();
        (2.0 * half, theta + 2.0 * p)
    }
}

/// Exit of a Euclidean chord: time `2√(1−μ²)`, angle `θ + π − 2 asin μ`.
pub fn euclidean_exit(theta: f64, mu: f64) -> (f64, f64) {
    (2.0 * (1.0 - mu * mu).sqrt(), theta + PI - 2.0 * mu.asin())
}

/// Parameters where the ray `p + t d` (`|d| = 1`) meets the unit circle.
pub fn line_circle(p: P, d: P) -> (f64, f64) {
    let b = p[0] * d[0] + p[1] * d[1];
    let c = p[0] * p[0] + p[1] * p[1] - 1.0;
    let disc = (b * b - c).sqrt();
    (-b - disc, -b + disc)
}

/// Intersection of segments `a0→a1` and `b0→b1` as arclength parameters.
pub fn segment_crossing(a0: P, a1: P, b0: P, b1: P) -> Option<(f64, f64, P)> {
    let da = [a1[0] - a0[0], a1[1] - a0[1]];
    let db = [b1[0] - b0[0], b1[1] - b0[1]];
    let den = da[0] * db[1] - da[1] * db[0];
    if den.abs() < 1e-15 {
        return None;
    }
    let w = [b0[0] - a0[0], b0[1] - a0[1]];
    let s = (w[0] * db[1] - w[1] * db[0]) / den;
    let u = (w[0] * da[1] - w[1] * da[0]) / den;
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&u) {
        return None;
    }
    Some((
        s * norm(da),
        u * norm(db),
        [a0[0] + s * da[0], a0[1] + s * da[1]],
    ))
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Shortest paths on a uniform `n × n` grid over `[−1, 1]²` restricted to the
/// closed disc. Edges join nodes whose offsets are primitive lattice vectors
/// of length at most `radius` cells; edge weights integrate the metric along
/// the straight segment with Simpson's rule.
pub struct GridOracle {
    pub n: usize,
    pub h: f64,
    inside: Vec<bool>,
    offsets: Vec<(i64, i64)>,
}

impl GridOracle {
    pub fn new(n: usize, radius: i64) -> Self {
        let h = 2.0 / (n - 1) as f64;
        let mut inside = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                inside[j * n + i] = norm(Self::coords(h, i, j)) <= 1.0;
            }
        }
        let mut offsets = Vec::new();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 && dx * dx + dy * dy <= radius * radius {
                    offsets.push((dx, dy));
                }
            }
        }
        GridOracle {
            n,
            h,
            inside,
            offsets,
        }
    }

    fn coords(h: f64, i: usize, j: usize) -> P {
        [-1.0 + h * i as f64, -1.0 + h * j as f64]
    }

    pub fn node_point(&self, node: usize) -> P {
        Self::coords(self.h, node % self.n, node / self.n)
    }

    pub fn is_inside(&self, node: usize) -> bool {
        self.inside[node]
    }

    /// Distances from `source` to every node, for a metric given by its
    /// length element `len(x, d) = |d|_{g(x)}`.
    pub fn distances(&self, source: usize, len: &dyn Fn(P, P) -> f64) -> Vec<f64> {
        let n = self.n as i64;
        let mut d = vec![f64::INFINITY; self.n * self.n];
        let mut heap = BinaryHeap::new();
        d[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(du, u)) = heap.pop() {
            if du > d[u] {
                continue;
            }
            let (ui, uj) = ((u % self.n) as i64, (u / self.n) as i64);
            let pu = self.node_point(u);
            for &(dx, dy) in &self.offsets {
                let (vi, vj) = (ui + dx, uj + dy);
                if vi < 0 || vj < 0 || vi >= n || vj >= n {
                    continue;
                }
                let v = (vj * n + vi) as usize;
                if !self.inside[v] {
                    continue;
                }
                let pv = self.node_point(v);
                let seg = [pv[0] - pu[0], pv[1] - pu[1]];
                let mid = [0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1])];
                let w = (len(pu, seg) + 4.0 * len(mid, seg) + len(pv, seg)) / 6.0;
                let nd = du + w;
                if nd < d[v] {
                    d[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        d
    }
}

/// Sup-norm distance of two sampled functions.
pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Hausdorff distance from the definition, over all pairs.
pub fn hausdorff_brute(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|f| y.iter().map(|g| sup(f, g)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Exact Gromov–Hausdorff distance of two small finite metric spaces:
/// half the minimum distortion over all correspondences. Minimal
/// correspondences may be taken of the form `graph(f) ∪ graph(g)ᵀ`, so all
/// pairs of maps `f: X → Y`, `g: Y → X` are enumerated.
pub fn gh_brute(dx: &[Vec<f64>], dy: &[Vec<f64>]) -> f64 {
    let (n, m) = (dx.len(), dy.len());
    let maps = |from: usize, to: usize| -> Vec<Vec<usize>> {
        let total = to.pow(from as u32);
        (0..total)
            .map(|mut c| {
                (0..from)
                    .map(|_| {
                        let v = c % to;
                        c /= to;
                        v
                    })
                    .collect()
            })
            .collect()
    };
    let fs = maps(n, m);
    let gs = maps(m, n);
    let mut best = f64::INFINITY;
    for f in &fs {
        for g in &gs {
            let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, f[i])).collect();
            pairs.extend((0..m).map(|j| (g[j], j)));
            let mut dis: f64 = 0.0;
            'outer: for &(a, b) in &pairs {
                for &(c, e) in &pairs {
                    dis = dis.max((dx[a][c] - dy[b][e]).abs());
                    if dis >= best {
                        break 'outer;
                    }
                }
            }
            best = best.min(dis);
        }
    }
    0.5 * best
}

/// Central-difference Christoffel symbols of a metric field, assembled from
/// `Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢg_jl + ∂ⱼg_il − ∂ₗg_ij)`, indexed `[k][i][j]`.
pub fn fd_christoffel(g: &dyn Fn(P) -> [[f64; 2]; 2], x: P, h: f64) -> [[[f64; 2]; 2]; 2] {
    let mut dg = [[[0.0; 2]; 2]; 2];
    for l in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[l] += h;
        xm[l] -= h;
        let (gp, gm) = (g(xp), g(xm));
        for i in 0..2 {
            for j in 0..2 {
                dg[l][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
    }
    let m = g(x);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    let mut out = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += inv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                out[k][i][j] = 0.5 * s;
            }
        }
    }
    out
}

/// Seeded uniform points in the disc of radius `r`.
pub fn random_points(seed: u64, k: usize, r: f64) -> Vec<P> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if norm(p) <= r {
            out.push(p);
        }
    }
    out
}

pub fn wrap(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(2.0 * PI - d)
}
