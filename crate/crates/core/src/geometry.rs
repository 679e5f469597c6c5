//! Geometry of farthest-point decoding regions.
//!
//! For a code on a sphere the farthest-point region of `c_k` is
//! `{y : <y, c_k> <= <y, c_j> for all j}`, a cone with apex at the origin.
//! In the plane these cones are wedges and everything can be done exactly.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{cone_angle_for_tail, q_tail};
use crate::error::{invalid, Result};
use crate::rng;
use crate::sim::{
    awgn_sample_into, dist2, estimate_hop_matrix, mu_hat, mu_hat_stderr, norm2, DecoderKind,
    SphereCode,
};

const SCALE_TAG: u64 = 0x5ca1e;
const PYRAMID_TAG: u64 = 0x9a2;
const DIRECTION_TAG: u64 = 0xd12;

/// Scalings applied to each observation in [`scaling_invariance_check`].
pub const SCALINGS: [f64; 4] = [0.0, 0.5, 2.0, 10.0];

/// Uniform directions used to estimate cell solid angles in three dimensions.
pub const OMEGA_DIRECTIONS: u64 = 1_000_000;

/// Farthest-point decision, or `None` when the two largest distances are
/// within `1e-9 (|c|^2 + |y|^2)` of each other.
pub fn farthest_point_strict(code: &SphereCode, y: &[f64]) -> Option<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (i, c) in code.codewords().iter().enumerate() {
        let d = dist2(y, c);
        if d > best.1 {
            second = best.1;
            best = (i, d);
        } else if d > second {
            second = d;
        }
    }
    let tol = 1e-9 * (code.radius().powi(2) + norm2(y));
    (best.1 - second > tol).then_some(best.0)
}

fn require_on_sphere(code: &SphereCode) -> Result<()> {
    if !code.on_sphere() {
        return invalid("code must lie on the power sphere");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub trials: u64,
    /// Scaled observations compared against the unscaled decision.
    pub comparisons: u64,
    pub violations: u64,
    /// Draws skipped because the scaled or unscaled observation was a tie.
    pub skipped: u64,
}

impl ScalingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check that the farthest-point decision of `alpha y` equals that of `y` for
/// every `alpha` in [`SCALINGS`]. Exact comparison; ties are skipped.
pub fn scaling_invariance_check(
    code: &SphereCode,
    trials: u64,
    seed: u64,
) -> Result<ScalingReport> {
    require_on_sphere(code)?;
    let n = code.dim();
    let radius = code.radius();
    let parts: Vec<[u64; 3]> = rng::batches(trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = rng::stream(seed, &[SCALE_TAG, b]);
            let mut tally = [0u64; 3];
            let mut y = vec![0.0; n];
            let mut ys = vec![0.0; n];
            for _ in 0..len {
                for v in y.iter_mut() {
                    *v = radius * rng.sample::<f64, _>(StandardNormal);
                }
                let base = farthest_point_strict(code, &y);
                for alpha in SCALINGS {
                    ys.iter_mut().zip(&y).for_each(|(s, v)| *s = alpha * v);
                    match (base, farthest_point_strict(code, &ys)) {
                        (Some(a), Some(b)) => {
                            tally[0] += 1;
                            tally[1] += u64::from(a != b);
                        }
                        _ => tally[2] += 1,
                    }
                }
            }
            tally
        })
        .collect();
    let mut report = ScalingReport {
        trials,
        comparisons: 0,
        violations: 0,
        skipped: 0,
    };
    for t in parts {
        report.comparisons += t[0];
        report.violations += t[1];
        report.skipped += t[2];
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    /// Counter-clockwise start angle in `[0, 2 pi)`.
    pub start: f64,
    pub width: f64,
}

impl Wedge {
    pub fn contains(&self, phi: f64) -> bool {
        (phi - self.start).rem_euclid(TAU) < self.width
    }

    pub fn center(&self) -> f64 {
        (self.start + 0.5 * self.width).rem_euclid(TAU)
    }
}

/// Farthest-point cells of a planar code as angular intervals, one per codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeCells2D {
    pub wedges: Vec<Wedge>,
}

impl WedgeCells2D {
    pub fn widths(&self) -> Vec<f64> {
        self.wedges.iter().map(|w| w.width).collect()
    }

    pub fn total_width(&self) -> f64 {
        self.wedges.iter().map(|w| w.width).sum()
    }

    /// Index of the wedge containing direction `phi`.
    pub fn locate(&self, phi: f64) -> Option<usize> {
        self.wedges.iter().position(|w| w.contains(phi))
    }
}

fn angle_of(c: &[f64]) -> f64 {
    c[1].atan2(c[0]).rem_euclid(TAU)
}

/// Angular distance between directions, in `[0, pi]`.
fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Exact farthest-point wedges of a code on the circle.
///
/// Direction `u` lies in cell `k` iff `-u` is angularly nearest to `c_k`, so
/// cell `k` spans half of each gap to its neighbours, rotated by `pi`.
pub fn cell_solid_angles_2d(code: &SphereCode) -> Result<WedgeCells2D> {
    if code.dim() != 2 {
        return invalid(format!("planar cells need N = 2, got {}", code.dim()));
    }
    require_on_sphere(code)?;
    let m = code.len();
    let angles: Vec<f64> = code.codewords().iter().map(|c| angle_of(c)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let gap = |s: usize| -> f64 {
        // Counter-clockwise gap from sorted position s to s + 1.
        let a = angles[order[s]];
        let b = angles[order[(s + 1) % m]];
        let g = (b - a).rem_euclid(TAU);
        if m == 1 {
            TAU
        } else {
            g
        }
    };
    for s in 0..m {
        if gap(s) < 1e-12 {
            return invalid(format!(
                "duplicate codewords {} and {}",
                order[s],
                order[(s + 1) % m]
            ));
        }
    }
    let mut wedges = vec![
        Wedge {
            start: 0.0,
            width: 0.0
        };
        m
    ];
    for s in 0..m {
        let prev = gap((s + m - 1) % m);
        let next = gap(s);
        let k = order[s];
        wedges[k] = Wedge {
            start: (angles[k] - 0.5 * prev + PI).rem_euclid(TAU),
            width: 0.5 * (prev + next),
        };
    }
    Ok(WedgeCells2D { wedges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCheck {
    pub widths: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `max_k |freq_k - width_k / 2pi| / stderr_k`.
    pub max_z: f64,
    pub samples: u64,
}

/// Compare wedge widths with the farthest-point decision frequencies of uniform directions.
pub fn wedge_frequency_check(code: &SphereCode, samples: u64, seed: u64) -> Result<FrequencyCheck> {
    let cells = cell_solid_angles_2d(code)?;
    let counts = direction_counts(code, samples, seed)?;
    let widths = cells.widths();
    let mut max_z: f64 = 0.0;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    for (f, w) in frequencies.iter().zip(&widths) {
        let p = w / TAU;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let z = (f - p).abs();
        max_z = max_z.max(if se > 0.0 {
            z / se
        } else if z == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(FrequencyCheck {
        widths,
        frequencies,
        max_z,
        samples,
    })
}

/// Farthest-point decisions of `samples` uniform directions, counted per codeword.
fn direction_counts(code: &SphereCode, samples: u64, seed: u64) -> Result<Vec<u64>> {
    require_on_sphere(code)?;
    let m = code.len();
    let n = code.dim();
    let parts: Vec<Vec<u64>> = rng::batches(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = rng::stream(seed, &[DIRECTION_TAG, b]);
            let mut counts = vec![0u64; m];
            let mut u = vec![0.0; n];
            for _ in 0..len {
                for v in u.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                // Minimizing <u, c_k> is the farthest-point rule for a sphere code.
                let k = code
                    .codewords()
                    .iter()
                    .map(|c| c.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>())
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
                    )
                    .0;
                counts[k] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; m];
    for p in parts {
        counts.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDominance {
    pub cell: usize,
    /// Solid angle of the cell as a fraction of the whole sphere.
    pub omega_fraction: f64,
    /// Standard error of `omega_fraction` (zero when exact).
    pub omega_stderr: f64,
    /// `Pr[c_k + Z in farthest-point cell k]`.
    pub p_pyramid: f64,
    /// `Pr[c_k + Z in cone about -c_k with the same solid angle]`.
    pub p_cone: f64,
    /// Mean of the paired difference, pyramid minus cone.
    pub diff: f64,
    pub stderr: f64,
    /// Paired difference against the cone shrunk by `4 * omega_stderr`; equals `diff` when exact.
    pub diff_shrunk: f64,
    pub stderr_shrunk: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidReport {
    pub dim: usize,
    pub sigma: f64,
    pub samples: u64,
    pub cells: Vec<CellDominance>,
}

impl PyramidReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }
}

/// Compare, for each codeword, the probability that noise lands it in its
/// farthest-point cell with the probability for a cone of equal solid angle
/// centred on `-c_k`. Passes when the cell is not less likely than the cone
/// by more than four paired standard errors.
pub fn pyramid_vs_cone_check(
    code: &SphereCode,
    sigma: f64,
    samples: u64,
    seed: u64,
    dim: usize,
) -> Result<PyramidReport> {
    require_on_sphere(code)?;
    if dim != code.dim() || !(dim == 2 || dim == 3) {
        return invalid(format!(
            "pyramid check needs dim in {{2, 3}} matching the code, got {dim} for N = {}",
            code.dim()
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || samples == 0 {
        return invalid("need positive sigma and samples");
    }
    let m = code.len();
    // (fraction, stderr) per cell.
    let omegas: Vec<(f64, f64)> = if dim == 2 {
        cell_solid_angles_2d(code)?
            .widths()
            .into_iter()
            .map(|w| (w / TAU, 0.0))
            .collect()
    } else {
        let counts = direction_counts(
            code,
            OMEGA_DIRECTIONS,
            rng::stream_key(&[seed, DIRECTION_TAG]),
        )?;
        counts
            .iter()
            .map(|&c| {
                let f = c as f64 / OMEGA_DIRECTIONS as f64;
                (f, (f * (1.0 - f) / OMEGA_DIRECTIONS as f64).sqrt())
            })
            .collect()
    };
    let half_angle = |f: f64| -> Result<f64> {
        if f <= 0.0 {
            Ok(0.0)
        } else if f >= 1.0 {
            Ok(PI)
        } else if dim == 2 {
            Ok(f * PI)
        } else {
            cone_angle_for_tail(1.0 - f, dim)
        }
    };

    let mut cells = Vec::with_capacity(m);
    for (k, &(f, se_f)) in omegas.iter().enumerate() {
        let theta = half_angle(f)?;
        let theta_shrunk = half_angle((f - 4.0 * se_f).max(0.0))?;
        let (cos_t, cos_s) = (theta.cos(), theta_shrunk.cos());
        let c = code.codeword(k);
        let c_norm = norm2(c).sqrt();
        // Counts: pyramid, cone, shrunk cone, and the paired squared differences.
        let parts: Vec<[u64; 5]> = rng::batches(samples)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(b, len)| {
                let mut rng = rng::stream(seed, &[PYRAMID_TAG, k as u64, b]);
                let mut y = vec![0.0; dim];
                let mut t = [0u64; 5];
                for _ in 0..len {
                    awgn_sample_into(c, sigma, &mut rng, &mut y);
                    let e1 = crate::sim::decode(DecoderKind::FarthestPoint, code, &y) == k;
                    let yn = norm2(&y).sqrt();
                    let cos = if yn > 0.0 {
                        -c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / (c_norm * yn)
                    } else {
                        1.0
                    };
                    let in_cone = |ct: f64, th: f64| th >= PI || cos >= ct;
                    let e2 = in_cone(cos_t, theta);
                    let e2s = in_cone(cos_s, theta_shrunk);
                    t[0] += u64::from(e1);
                    t[1] += u64::from(e2);
                    t[2] += u64::from(e2s);
                    t[3] += u64::from(e1 != e2);
                    t[4] += u64::from(e1 != e2s);
                }
                t
            })
            .collect();
        let mut t = [0u64; 5];
        for p in parts {
            for i in 0..5 {
                t[i] += p[i];
            }
        }
        let n = samples as f64;
        let paired = |a: u64, b: u64, disagree: u64| -> (f64, f64) {
            let mean = (a as f64 - b as f64) / n;
            let second = disagree as f64 / n;
            let var = (second - mean * mean).max(0.0) / n;
            (mean, var.sqrt())
        };
        let (diff, stderr) = paired(t[0], t[1], t[3]);
        let (diff_shrunk, stderr_shrunk) = paired(t[0], t[2], t[4]);
        cells.push(CellDominance {
            cell: k,
            omega_fraction: f,
            omega_stderr: se_f,
            p_pyramid: t[0] as f64 / n,
            p_cone: t[1] as f64 / n,
            diff,
            stderr,
            diff_shrunk,
            stderr_shrunk,
            pass: diff_shrunk >= -4.0 * stderr_shrunk,
        });
    }
    Ok(PyramidReport {
        dim,
        sigma,
        samples,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeBoundCheck {
    pub mu_hat: f64,
    pub stderr: f64,
    /// `M * Q(((M - 1) / M) Omega0, N, P0 / sigma^2)`.
    pub cone_bound: f64,
    pub pass: bool,
}

/// Estimated `mu` of the farthest-point rule against the cone lower bound.
pub fn cone_bound_check(
    code: &SphereCode,
    sigma: f64,
    shots: u64,
    seed: u64,
) -> Result<ConeBoundCheck> {
    require_on_sphere(code)?;
    let m = code.len();
    let p = estimate_hop_matrix(code, DecoderKind::FarthestPoint, sigma, shots, seed)?;
    let mu = mu_hat(&p);
    let stderr = mu_hat_stderr(&p, shots);
    let gamma = code.power() / (sigma * sigma);
    let cone_bound = m as f64 * q_tail(1.0 / m as f64, code.dim(), gamma, 1e-12)?;
    Ok(ConeBoundCheck {
        mu_hat: mu,
        stderr,
        cone_bound,
        pass: mu >= cone_bound - 4.0 * stderr,
    })
}

type Point = [f64; 2];

/// Clip a convex polygon to the half-plane `<a, y> >= b`.
fn clip(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    let side = |p: &Point| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Farthest-point cell of codeword `k` for an arbitrary planar code,
/// intersected with a box large enough to contain the relevant geometry.
/// Returns an empty vector when the cell has no interior.
pub fn farthest_cell_polygon(code: &SphereCode, k: usize) -> Result<Vec<Point>> {
    if code.dim() != 2 {
        return invalid("planar cells need N = 2");
    }
    let l = 1e6 * (code.radius() + 1.0);
    let mut poly = vec![[-l, -l], [l, -l], [l, l], [-l, l]];
    let ck = code.codeword(k);
    for (j, cj) in code.codewords().iter().enumerate() {
        if j == k {
            continue;
        }
        // |y - c_k|^2 >= |y - c_j|^2  <=>  2 <y, c_j - c_k> >= |c_j|^2 - |c_k|^2
        let a = [2.0 * (cj[0] - ck[0]), 2.0 * (cj[1] - ck[1])];
        poly = clip(&poly, a, norm2(cj) - norm2(ck));
        if poly.len() < 3 {
            return Ok(Vec::new());
        }
    }
    let area: f64 = (0..poly.len())
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
        * 0.5;
    if area <= 1e-300 {
        return Ok(Vec::new());
    }
    Ok(poly)
}

/// Nearest point of a convex polygon to `x`.
fn nearest_on_polygon(poly: &[Point], x: Point) -> Point {
    let inside = (0..poly.len()).all(|i| {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]) >= 0.0
    });
    if inside {
        return x;
    }
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let t = if len2 > 0.0 {
            (((x[0] - p[0]) * e[0] + (x[1] - p[1]) * e[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let z = [p[0] + t * e[0], p[1] + t * e[1]];
        let d = (z[0] - x[0]).powi(2) + (z[1] - x[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = z;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftStep {
    pub codeword: usize,
    /// Nearest point of the codeword's cell, absent when the cell is empty.
    pub nearest: Option<Point>,
    pub from: Point,
    pub to: Point,
}

/// Move every interior codeword of a planar code onto the circle, one at a
/// time in index order, along the ray from the nearest point of its current
/// farthest-point cell through the codeword (radially when that is undefined).
pub fn lift_codewords_2d(code: &SphereCode) -> Result<(SphereCode, Vec<LiftStep>)> {
    if code.dim() != 2 {
        return invalid("lifting is implemented for N = 2 only");
    }
    let radius = code.radius();
    let mut words: Vec<Vec<f64>> = code.codewords().to_vec();
    let mut steps = Vec::new();
    for k in 0..words.len() {
        let c = [words[k][0], words[k][1]];
        if norm2(&words[k]) >= radius * radius * (1.0 - 1e-9) {
            continue;
        }
        let current = SphereCode::new(words.clone(), code.power())?;
        let poly = farthest_cell_polygon(&current, k)?;
        let nearest = (!poly.is_empty()).then(|| nearest_on_polygon(&poly, c));
        let mut dir = match nearest {
            Some(z) => [c[0] - z[0], c[1] - z[1]],
            None => c,
        };
        let mut len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if len == 0.0 {
            dir = c;
            len = (c[0] * c[0] + c[1] * c[1]).sqrt();
        }
        if len == 0.0 {
            dir = [1.0, 0.0];
            len = 1.0;
        }
        let d = [dir[0] / len, dir[1] / len];
        let cd = c[0] * d[0] + c[1] * d[1];
        let t = -cd + (cd * cd - (norm2(&c) - radius * radius)).sqrt();
        let mut to = [c[0] + t * d[0], c[1] + t * d[1]];
        let scale = radius / (to[0] * to[0] + to[1] * to[1]).sqrt();
        to = [to[0] * scale, to[1] * scale];
        words[k] = to.to_vec();
        steps.push(LiftStep {
            codeword: k,
            nearest,
            from: c,
            to,
        });
    }
    Ok((SphereCode::new(words, code.power())?, steps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub lifted: SphereCode,
    pub steps: Vec<LiftStep>,
    pub mu_before: f64,
    pub stderr_before: f64,
    pub mu_after: f64,
    pub stderr_after: f64,
    /// `mu_after <= mu_before + 4 sqrt(se_before^2 + se_after^2)`.
    pub pass: bool,
}

/// Lift a planar code to the circle and compare farthest-point `mu` before and after.
pub fn lift_code_to_sphere_2d(
    code: &SphereCode,
    sigma: f64,
    shots: u64,
    seed: u64,
) -> Result<LiftReport> {
    let (lifted, steps) = lift_codewords_2d(code)?;
    let before = estimate_hop_matrix(code, DecoderKind::FarthestPoint, sigma, shots, seed)?;
    let after = estimate_hop_matrix(&lifted, DecoderKind::FarthestPoint, sigma, shots, seed)?;
    let (mu_before, stderr_before) = (mu_hat(&before), mu_hat_stderr(&before, shots));
    let (mu_after, stderr_after) = (mu_hat(&after), mu_hat_stderr(&after, shots));
    let margin = 4.0 * (stderr_before.powi(2) + stderr_after.powi(2)).sqrt();
    Ok(LiftReport {
        lifted,
        steps,
        mu_before,
        stderr_before,
        mu_after,
        stderr_after,
        pass: mu_after <= mu_before + margin,
    })
}

/// Code with codewords at the given angles on the circle of radius `sqrt(2 P0)`.
pub fn circle_code(angles: &[f64], power: f64) -> Result<SphereCode> {
    let r = (2.0 * power).sqrt();
    SphereCode::new(
        angles
            .iter()
            .map(|a| vec![r * a.cos(), r * a.sin()])
            .collect(),
        power,
    )
}

/// Random circle code with `m` uniform angles, redrawn until no two are closer than `min_gap`.
pub fn random_circle_code<R: Rng + ?Sized>(
    m: usize,
    power: f64,
    min_gap: f64,
    rng: &mut R,
) -> Result<SphereCode> {
    loop {
        let angles: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * TAU).collect();
        let ok = (0..m).all(|i| (0..i).all(|j| angular_gap(angles[i], angles[j]) >= min_gap));
        if ok {
            return circle_code(&angles, power);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_code, CodeKind};
    use proptest::prelude::*;

    fn equilateral() -> SphereCode {
        circle_code(&[0.0, TAU / 3.0, 2.0 * TAU / 3.0], 1.0).unwrap()
    }

    #[test]
    fn wedges_of_symmetric_codes() {
        let a = make_code(CodeKind::Antipodal, 2, 2, 1.0, 0).unwrap();
        let cells = cell_solid_angles_2d(&a).unwrap();
        assert!(cells.widths().iter().all(|w| (w - PI).abs() < 1e-12));
        // Cell 0 (codeword at angle 0) is the left half-plane.
        assert_eq!(cells.locate(PI), Some(0));
        assert_eq!(cells.locate(0.1), Some(1));

        let e = cell_solid_angles_2d(&equilateral()).unwrap();
        for (k, w) in e.wedges.iter().enumerate() {
            assert!((w.width - TAU / 3.0).abs() < 1e-12);
            let axis = (k as f64 * TAU / 3.0 + PI).rem_euclid(TAU);
            assert!(angular_gap(w.center(), axis) < 1e-12);
        }
    }

    #[test]
    fn wedges_agree_with_decoder() {
        let code = circle_code(&[0.3, 1.1, 2.0, 4.5], 1.3).unwrap();
        let cells = cell_solid_angles_2d(&code).unwrap();
        assert!((cells.total_width() - TAU).abs() < 1e-9);
        for i in 0..720 {
            let phi = (i as f64 + 0.37) * TAU / 720.0;
            let y = [phi.cos(), phi.sin()];
            assert_eq!(
                cells.locate(phi),
                Some(crate::sim::decode(DecoderKind::FarthestPoint, &code, &y))
            );
        }
        let check = wedge_frequency_check(&code, 200_000, 3).unwrap();
        assert!(check.max_z < 4.0, "{check:?}");
    }

    #[test]
    fn duplicate_codewords_rejected() {
        assert!(cell_solid_angles_2d(&circle_code(&[0.5, 0.5, 2.0], 1.0).unwrap()).is_err());
        let interior = SphereCode::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 1.0).unwrap();
        assert!(cell_solid_angles_2d(&interior).is_err());
    }

    #[test]
    fn scaling_invariance_random_codes() {
        for n in [2, 3, 5] {
            let code = make_code(CodeKind::RandomSphere, 8, n, 1.0, n as u64).unwrap();
            let r = scaling_invariance_check(&code, 2_000, 1).unwrap();
            assert!(r.passed(), "{r:?}");
            // alpha = 0 is always a tie.
            assert!(r.skipped >= r.trials);
            assert_eq!(r.comparisons + r.skipped, 4 * r.trials);
        }
    }

    #[test]
    fn pyramid_equality_and_dominance() {
        let eq = pyramid_vs_cone_check(&equilateral(), 1.0, 100_000, 2, 2).unwrap();
        for c in &eq.cells {
            assert!(c.diff.abs() <= 4.0 * c.stderr, "{c:?}");
        }
        let skew = circle_code(&[0.0, 0.4, 2.5], 1.0).unwrap();
        let r = pyramid_vs_cone_check(&skew, 1.0, 100_000, 2, 2).unwrap();
        assert!(r.passed());
        assert!(r.cells.iter().any(|c| c.diff > 4.0 * c.stderr), "{r:?}");
        let a3 = make_code(CodeKind::Antipodal, 2, 3, 1.0, 0).unwrap();
        let r = pyramid_vs_cone_check(&a3, 1.0, 100_000, 2, 3).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn cone_bound_antipodal_is_tight() {
        let a = make_code(CodeKind::Antipodal, 2, 2, 1.0, 0).unwrap();
        let c = cone_bound_check(&a, 1.0, 200_000, 8).unwrap();
        assert!(c.pass);
        assert!((c.mu_hat - c.cone_bound).abs() < 4.0 * c.stderr, "{c:?}");
    }

    #[test]
    fn cell_polygon_of_sphere_code_is_wedge() {
        let code = equilateral();
        let poly = farthest_cell_polygon(&code, 0).unwrap();
        assert!(!poly.is_empty());
        // Apex at the origin is the nearest point to any codeword of a symmetric code.
        let z = nearest_on_polygon(&poly, [code.codeword(0)[0], code.codeword(0)[1]]);
        assert!(z[0].hypot(z[1]) < 1e-9, "{z:?}");
    }

    #[test]
    fn lift_examples() {
        let on = equilateral();
        let (same, steps) = lift_codewords_2d(&on).unwrap();
        assert!(steps.is_empty());
        assert_eq!(same, on);

        let r = 2f64.sqrt();
        let half = SphereCode::new(vec![vec![r, 0.0], vec![-0.5 * r, 0.0]], 1.0).unwrap();
        let report = lift_code_to_sphere_2d(&half, 1.0, 100_000, 4).unwrap();
        assert!(report.lifted.on_sphere());
        assert_eq!(report.steps.len(), 1);
        assert!(report.pass, "{report:?}");
        let (again, steps) = lift_codewords_2d(&report.lifted).unwrap();
        assert!(steps.is_empty());
        assert_eq!(again, report.lifted);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn wedge_widths_partition_circle(angles in proptest::collection::vec(0.0..TAU, 2..8)) {
            let ok = (0..angles.len()).all(|i| (0..i).all(|j| angular_gap(angles[i], angles[j]) > 1e-6));
            prop_assume!(ok);
            let cells = cell_solid_angles_2d(&circle_code(&angles, 1.0).unwrap()).unwrap();
            prop_assert!((cells.total_width() - TAU).abs() < 1e-9);
            prop_assert!(cells.widths().iter().all(|&w| w > 0.0));
        }

        #[test]
        fn lifting_lands_on_circle(angles in proptest::collection::vec(0.0..TAU, 3..5), shrink in 0.05f64..0.95) {
            let ok = (0..angles.len()).all(|i| (0..i).all(|j| angular_gap(angles[i], angles[j]) > 1e-3));
            prop_assume!(ok);
            let mut words: Vec<Vec<f64>> = circle_code(&angles, 1.0).unwrap().codewords().to_vec();
            words[0].iter_mut().for_each(|v| *v *= shrink);
            let (lifted, steps) = lift_codewords_2d(&SphereCode::new(words, 1.0).unwrap()).unwrap();
            prop_assert!(lifted.on_sphere());
            prop_assert_eq!(steps.len(), 1);
        }
    }
}
