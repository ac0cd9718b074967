//! From broken scattering relations to travel time data.
//!
//! The diagonal of the table gives exit times. The set `V(v)` of vectors
//! related to `v` is shared exactly by `v` and its reversed exit vector
//! `σ(v)`, which identifies the scattering relation. With `σ` known, the
//! total time of a crossing pair splits into the two arclengths, and
//! crossings of the inward normal geodesic from `z₀` at arclength `s₀` give
//! the travel time function of the point `exp_{z₀}(s₀ ν)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{lift_inward, trace, BoundaryVector, TraceOptions, TraceStart};
use crate::metric::{MetricModel, Point};
use crate::survey::{BoundaryGrid, BrokenScatteringTable, TravelTimeData, TravelTimeFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LensOptions {
    /// Largest Jaccard distance accepted between `V(v)` and `V(σ(v))`.
    pub threshold: f64,
}

impl Default for LensOptions {
    fn default() -> Self {
        LensOptions { threshold: 0.05 }
    }
}

/// Exit times and scattering partners recovered for every direction of a
/// table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredLensData {
    pub tau: Vec<Option<f64>>,
    /// Table index of `σ(v)`, when resolved.
    pub sigma: Vec<Option<usize>>,
    /// Smallest Jaccard distance to another direction.
    pub best: Vec<f64>,
    /// Second smallest Jaccard distance, a margin diagnostic.
    pub runner_up: Vec<f64>,
}

impl RecoveredLensData {
    /// Fraction of the first `n` directions whose partner was resolved.
    pub fn resolved_fraction(&self, n: usize) -> f64 {
        self.sigma[..n].iter().filter(|s| s.is_some()).count() as f64 / n as f64
    }
}

/// `τ(v) = ½ T(v, v)`.
pub fn bsr_exit_time(table: &BrokenScatteringTable, v: usize) -> Result<f64> {
    table
        .diagonal(v)
        .map(|t| 0.5 * t)
        .ok_or(Error::IncompleteTable(v, v))
}

struct Bitsets {
    words: usize,
    bits: Vec<u64>,
    counts: Vec<u32>,
}

impl Bitsets {
    fn new(table: &BrokenScatteringTable) -> Self {
        let n = table.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        let mut counts = vec![0u32; n];
        for i in 0..n {
            let (cols, _) = table.row(i);
            counts[i] = cols.len() as u32;
            for &c in cols {
                bits[i * words + c as usize / 64] |= 1 << (c % 64);
            }
        }
        Bitsets {
            words,
            bits,
            counts,
        }
    }

    fn jaccard_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (
            &self.bits[i * self.words..][..self.words],
            &self.bits[j * self.words..][..self.words],
        );
        let inter: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
        let union = self.counts[i] + self.counts[j] - inter;
        if union == 0 {
            return 1.0;
        }
        1.0 - inter as f64 / union as f64
    }

    /// Best and second-best partner of `i` with their distances.
    fn partners(&self, i: usize) -> (Option<usize>, f64, f64, bool) {
        let (mut best, mut second) = (f64::INFINITY, f64::INFINITY);
        let mut arg = None;
        let mut tie = false;
        for j in (0..self.counts.len()).filter(|&j| j != i) {
            let d = self.jaccard_distance(i, j);
            if d < best {
                second = best;
                best = d;
                arg = Some(j);
                tie = false;
            } else if d == best {
                tie = true;
                second = d;
            } else if d < second {
                second = d;
            }
        }
        (arg, best, second, tie)
    }
}

fn resolve(bits: &Bitsets, v: usize, threshold: f64) -> (Result<usize>, f64, f64) {
    let (arg, best, second, tie) = bits.partners(v);
    let outcome = match arg {
        Some(j) if best <= threshold && !tie => Ok(j),
        _ => Err(Error::AmbiguousScattering { index: v, best }),
    };
    (outcome, best, second)
}

/// `σ(v)`: the direction other than `v` whose related set is closest to
/// `V(v)` in Jaccard distance, accepted only within the threshold and when
/// the minimiser is unique.
pub fn bsr_scattering_relation(
    table: &BrokenScatteringTable,
    v: usize,
    opts: &LensOptions,
) -> Result<(usize, BoundaryVector)> {
    let bits = Bitsets::new(table);
    let j = resolve(&bits, v, opts.threshold).0?;
    Ok((j, table.directions[j]))
}

/// Exit times and scattering partners of every direction in the table.
pub fn recover_lens(table: &BrokenScatteringTable, opts: &LensOptions) -> RecoveredLensData {
    let bits = Bitsets::new(table);
    let rows: Vec<(Option<f64>, Option<usize>, f64, f64)> = (0..table.len())
        .into_par_iter()
        .map(|v| {
            let (s, best, second) = resolve(&bits, v, opts.threshold);
            (bsr_exit_time(table, v).ok(), s.ok(), best, second)
        })
        .collect();
    RecoveredLensData {
        tau: rows.iter().map(|r| r.0).collect(),
        sigma: rows.iter().map(|r| r.1).collect(),
        best: rows.iter().map(|r| r.2).collect(),
        runner_up: rows.iter().map(|r| r.3).collect(),
    }
}

fn entry(table: &BrokenScatteringTable, i: usize, j: usize) -> Result<f64> {
    table.get(i, j).ok_or(Error::IncompleteTable(i, j))
}

fn partner(lens: &RecoveredLensData, v: usize) -> Result<usize> {
    lens.sigma
        .get(v)
        .copied()
        .flatten()
        .ok_or(Error::AmbiguousScattering {
            index: v,
            best: lens.best.get(v).copied().unwrap_or(f64::INFINITY),
        })
}

/// `(t₁, T − t₁)` adjusted within one rounding so that `t₁ + t₂ == T` holds
/// in floating point: the part at least `T/2` is formed by a subtraction
/// that Sterbenz's lemma makes exact.
fn exact_split(t: f64, t1: f64) -> (f64, f64) {
    let (t1, t2) = if t1 >= 0.5 * t {
        (t1, t - t1)
    } else {
        let t2 = t - t1;
        (t - t2, t2)
    };
    debug_assert_eq!(t1 + t2, t);
    (t1, t2)
}

/// Splits `T(v₁, v₂) = t₁ + t₂` using the reversal `η₂ = σ(v₂)`:
/// `t₁ = ½ (T(v₁, v₂) − T(v₂, η₂) + T(v₁, η₂))`. When `T(v₁, η₂)` is
/// missing the symmetric formula through `η₁ = σ(v₁)` is used instead. The
/// returned times sum to `T(v₁, v₂)` exactly.
pub fn bsr_travel_times(
    table: &BrokenScatteringTable,
    lens: &RecoveredLensData,
    v1: usize,
    v2: usize,
) -> Result<(f64, f64)> {
    let t = entry(table, v1, v2)?;
    let via_eta2 = partner(lens, v2).and_then(|e2| {
        let t1 = 0.5 * (t - entry(table, v2, e2)? + entry(table, v1, e2)?);
        Ok(exact_split(t, t1))
    });
    match via_eta2 {
        Ok(r) => Ok(r),
        Err(first) => {
            let e1 = partner(lens, v1).map_err(|_| first)?;
            let t2 = 0.5 * (t - entry(table, v1, e1)? + entry(table, e1, v2)?);
            let (t2, t1) = exact_split(t, t2);
            Ok((t1, t2))
        }
    }
}

/// How a receiver angle is served from the footpoints that carry a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularFill {
    /// The value of the nearest footpoint.
    Nearest,
    /// Linear interpolation between the two footpoints around the receiver.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionOptions {
    /// Levels `s₀ = k τ(ν(z₀)) / s_divisions` for `0 < k < s_divisions`.
    pub s_divisions: usize,
    pub fill: AngularFill,
    /// A receiver farther than this many footpoint-grid cells from usable
    /// data counts as a coverage gap.
    pub gap_cells: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        ReconstructionOptions {
            s_divisions: 32,
            fill: AngularFill::Linear,
            gap_cells: 1.0,
        }
    }
}

/// The point `exp_{z₀}(s₀ ν(z₀))` a reconstructed function belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ELabel {
    pub theta: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub functions: usize,
    pub receivers: usize,
    pub gap_receivers: usize,
    /// Crossing pairs whose split could not be recovered.
    pub skipped_pairs: usize,
}

impl Coverage {
    pub fn gap_fraction(&self) -> f64 {
        if self.receivers == 0 {
            0.0
        } else {
            self.gap_receivers as f64 / self.receivers as f64
        }
    }

    pub fn warning(&self) -> Option<String> {
        (self.gap_receivers > 0).then(|| {
            format!(
                "coverage gaps at {} of {} receivers ({:.2}%)",
                self.gap_receivers,
                self.receivers,
                100.0 * self.gap_fraction()
            )
        })
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub data: TravelTimeData,
    /// Label of each function, in data order.
    pub labels: Vec<ELabel>,
    pub coverage: Coverage,
}

/// Per footpoint angle, the samples `(s, t)` sorted by `s`.
type Footpoints = BTreeMap<u64, (f64, Vec<(f64, f64)>)>;

fn footpoint_key(theta: f64) -> u64 {
    theta.rem_euclid(std::f64::consts::TAU).to_bits()
}

/// Value at `s₀` of each footpoint whose samples bracket it.
fn level_values(groups: &Footpoints, s0: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (theta, samples) in groups.values() {
        let k = samples.partition_point(|p| p.0 < s0);
        if k < samples.len() && samples[k].0 == s0 {
            out.push((*theta, samples[k].1));
        } else if k > 0 && k < samples.len() {
            let (a, b) = (samples[k - 1], samples[k]);
            out.push((*theta, a.1 + (b.1 - a.1) * (s0 - a.0) / (b.0 - a.0)));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Serves each receiver angle from the footpoint values. A receiver whose
/// nearest valued footpoint lies more than `gap_cells` cells away counts as
/// a gap under either fill rule.
fn fill(
    values: &[(f64, f64)],
    angles: &[f64],
    opts: &ReconstructionOptions,
    cell: f64,
) -> (Vec<f64>, usize) {
    let tau = std::f64::consts::TAU;
    let n = values.len();
    let mut gaps = 0;
    let out = angles
        .iter()
        .map(|&th| {
            let k = values.partition_point(|v| v.0 <= th);
            let (lo, hi) = (values[(k + n - 1) % n], values[k % n]);
            let d_lo = (th - lo.0).rem_euclid(tau);
            let d_hi = (hi.0 - th).rem_euclid(tau);
            if d_lo.min(d_hi) > opts.gap_cells * cell {
                gaps += 1;
            }
            match opts.fill {
                AngularFill::Nearest if d_lo <= d_hi => lo.1,
                AngularFill::Nearest => hi.1,
                AngularFill::Linear => {
                    let span = d_lo + d_hi;
                    if span > 0.0 {
                        lo.1 + (hi.1 - lo.1) * d_lo / span
                    } else {
                        lo.1
                    }
                }
            }
        })
        .collect();
    (out, gaps)
}

/// Travel time data of the points `exp_{z₀}(s₀ ν(z₀))` recovered from the
/// table: one function per normal grid direction `(z₀, 0)` and level `s₀`.
///
/// Each vector `w` crossing the normal geodesic contributes the pair
/// `(s, t) = bsr_travel_times((z₀, 0), w)`, the distance from `z₀` to the
/// crossing along the normal and from the footpoint of `w` to it. The
/// footpoint `z₀` itself contributes `(s, s)` and the exit of the normal
/// contributes `(s, τ − s)`. Values at `s₀` are interpolated linearly in
/// `s` per footpoint and then spread over the receiver angles.
pub fn bsr_to_travel_time_data(
    table: &BrokenScatteringTable,
    lens: &RecoveredLensData,
    grid: &BoundaryGrid,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction> {
    grid.validate()?;
    if opts.s_divisions < 2 {
        return Err(Error::Config("s_divisions must be at least 2".into()));
    }
    let g = table.grid;
    let col = g.normal_column().ok_or_else(|| {
        Error::Config("the direction grid has no normal column (m_mu must be odd)".into())
    })?;
    let angles = grid.angles();
    let cell = g.theta_spacing();
    struct PerNormal {
        rows: Vec<(ELabel, Vec<f64>)>,
        gaps: usize,
        skipped: usize,
    }
    let per: Vec<PerNormal> = (0..g.m_theta)
        .into_par_iter()
        .map(|a| -> Result<PerNormal> {
            let v1 = g.index(a, col);
            let tau = bsr_exit_time(table, v1)?;
            let eta = partner(lens, v1)?;
            let z0 = table.directions[v1].theta;
            let exit = table.directions[eta].theta;
            let mut groups: Footpoints = BTreeMap::new();
            let mut skipped = 0;
            let (cols, _) = table.row(v1);
            for &w in cols {
                let w = w as usize;
                if w == v1 || w == eta {
                    continue;
                }
                match bsr_travel_times(table, lens, v1, w) {
                    Ok((s, t)) => {
                        let th = table.directions[w].theta;
                        groups
                            .entry(footpoint_key(th))
                            .or_insert_with(|| (th.rem_euclid(std::f64::consts::TAU), Vec::new()))
                            .1
                            .push((s, t));
                    }
                    Err(_) => skipped += 1,
                }
            }
            for (_, samples) in groups.values_mut() {
                samples.sort_by(|p, q| p.0.total_cmp(&q.0));
            }
            let mut rows = Vec::new();
            let mut gaps = 0;
            for k in 1..opts.s_divisions {
                let s0 = tau * k as f64 / opts.s_divisions as f64;
                // The exact samples at z₀ and at the exit go first so that
                // they win over interpolated footpoint values at the same angle.
                let mut values = vec![
                    (z0.rem_euclid(std::f64::consts::TAU), s0),
                    (exit.rem_euclid(std::f64::consts::TAU), tau - s0),
                ];
                values.extend(level_values(&groups, s0));
                values.sort_by(|p, q| p.0.total_cmp(&q.0));
                values.dedup_by(|p, q| p.0 == q.0);
                let (row, gap) = fill(&values, &angles, opts, cell);
                gaps += gap;
                rows.push((ELabel { theta: z0, s: s0 }, row));
            }
            Ok(PerNormal {
                rows,
                gaps,
                skipped,
            })
        })
        .collect::<Result<_>>()?;

    let mut coverage = Coverage::default();
    let mut labels = Vec::new();
    let mut functions = Vec::new();
    for p in per {
        coverage.gap_receivers += p.gaps;
        coverage.skipped_pairs += p.skipped;
        for (label, values) in p.rows {
            labels.push(label);
            functions.push(TravelTimeFunction {
                values: values.into_iter().map(|v| v.max(0.0)).collect(),
            });
        }
    }
    coverage.functions = functions.len();
    coverage.receivers = functions.len() * grid.m;
    Ok(Reconstruction {
        data: TravelTimeData {
            grid: *grid,
            functions,
            seed: 0,
            metric: table.metric.clone(),
        },
        labels,
        coverage,
    })
}

/// The points `exp_{z₀}(s ν(z₀))` named by the labels, traced along the
/// inward normal geodesics of `model`.
pub fn label_points(model: &MetricModel, labels: &[ELabel]) -> Result<Vec<Point>> {
    labels
        .par_iter()
        .map(|l| {
            let bv = BoundaryVector::new(l.theta, 0.0)?;
            let opts = TraceOptions {
                record_every: usize::MAX,
                stop_at: Some(l.s),
                ..TraceOptions::default()
            };
            let tr = trace(
                model,
                lift_inward(model, bv)?,
                TraceStart::Boundary(bv),
                &opts,
            )?;
            Ok(tr.end().x)
        })
        .collect()
}
