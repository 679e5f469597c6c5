//! Solid-angle geometry of right circular cones and the cone probability
//! `Q(x, N, gamma)`: the chance that Gaussian noise pushes a point on the
//! power sphere outside the cone of solid angle `x` around its own direction.
//!
//! With `a = sqrt(N * gamma)`, `z1` standard normal and `r` chi-distributed
//! with `N - 1` degrees of freedom, the displacement angle is
//! `Phi = atan2(r, a + z1)` and `Q = Pr[Phi >= theta_x]` where `g(theta_x) = x`.
//! Because `Phi >= theta` iff `z1 <= r cot(theta) - a`, the probability
//! reduces to a one-dimensional integral over the chi density.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::special::{bisect_increasing, integrate, ln_gamma, ln_norm_cdf, ln_sqrt_pi, norm_cdf};

const ANGLE_TOL: f64 = 1e-12;
const CAP_REL_TOL: f64 = 1e-13;
const MC_TAG: u64 = 0xc0e;

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return invalid(format!("block length must be >= 2, got {n}"));
    }
    Ok(())
}

/// `ln Omega0(N)`, the log surface area of the unit sphere in `R^N`.
pub fn ln_total_solid_angle(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    LN_2 + half * PI.ln() - ln_gamma(half)
}

/// Total solid angle `Omega0(N) = 2 pi^{N/2} / Gamma(N/2)`.
pub fn total_solid_angle(n: usize) -> Result<f64> {
    check_dim(n)?;
    Ok(ln_total_solid_angle(n).exp())
}

/// `ln` of the cone-area prefactor `(N-1) pi^{(N-1)/2} / Gamma((N+1)/2)`.
fn ln_cone_prefactor(n: usize) -> f64 {
    let nf = n as f64;
    (nf - 1.0).ln() + 0.5 * (nf - 1.0) * PI.ln() - ln_gamma(0.5 * (nf + 1.0))
}

/// `ln int_0^pi sin^{N-2}`, the Beta function `B(1/2, (N-1)/2)`.
fn ln_full_sin_integral(n: usize) -> f64 {
    let nf = n as f64;
    ln_sqrt_pi() + ln_gamma(0.5 * (nf - 1.0)) - ln_gamma(0.5 * nf)
}

/// `int_0^v sin^{N-2}(t) dt` for `v` in `[0, pi/2]`, to relative accuracy.
fn sin_integral_small(v: f64, n: usize) -> f64 {
    match n {
        2 => v,
        3 => 2.0 * (0.5 * v).sin().powi(2),
        _ => {
            let p = (n - 2) as i32;
            let r = integrate(|t: f64| t.sin().powi(p), 0.0, v, 0.0, CAP_REL_TOL);
            // sin^p is smooth and positive; the rule cannot fail to converge here.
            r.map(|i| i.value).unwrap_or(f64::NAN)
        }
    }
}

/// Fraction of the sphere within angle `v` (`<= pi/2`) of an axis.
fn small_cap_fraction(v: f64, n: usize) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let s = sin_integral_small(v, n);
    if s <= 0.0 {
        return 0.0;
    }
    (s.ln() - ln_full_sin_integral(n)).exp()
}

/// Fraction of the sphere's solid angle inside a cone of half-angle `theta`.
pub fn cap_fraction(theta: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    check_angle(theta)?;
    Ok(if theta <= FRAC_PI_2 {
        small_cap_fraction(theta, n)
    } else {
        1.0 - small_cap_fraction(PI - theta, n)
    })
}

fn check_angle(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return invalid(format!("cone angle {theta} outside [0, pi]"));
    }
    Ok(())
}

/// Solid angle `g(theta)` of a right circular cone with half-angle `theta`.
pub fn cone_solid_angle(theta: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    check_angle(theta)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let ln_pre = ln_cone_prefactor(n);
    let integral = if theta <= FRAC_PI_2 {
        sin_integral_small(theta, n)
    } else {
        ln_full_sin_integral(n).exp() - sin_integral_small(PI - theta, n)
    };
    Ok((ln_pre + integral.ln()).exp())
}

/// Half-angle of the cone whose solid angle is `x`.
pub fn inverse_cone_angle(x: f64, n: usize) -> Result<f64> {
    let total = total_solid_angle(n)?;
    if !(x >= 0.0 && x <= total * (1.0 + 1e-12)) {
        return invalid(format!("solid angle {x} outside [0, {total}]"));
    }
    let frac = (x / total).min(1.0);
    if frac > 0.5 {
        cone_angle_for_tail(1.0 - frac, n)
    } else {
        angle_for_fraction(frac, n)
    }
}

fn angle_for_fraction(frac: f64, n: usize) -> Result<f64> {
    if frac <= 0.0 {
        return Ok(0.0);
    }
    Ok(bisect_increasing(
        |v| small_cap_fraction(v, n),
        frac,
        0.0,
        FRAC_PI_2,
        ANGLE_TOL,
    ))
}

/// Half-angle `theta` of the cone whose complement has solid angle
/// `tail * Omega0`. Keeps full relative precision for tiny tails.
pub fn cone_angle_for_tail(tail: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    if !(0.0..=1.0).contains(&tail) {
        return invalid(format!("tail fraction {tail} outside [0, 1]"));
    }
    if tail > 0.5 {
        return angle_for_fraction(1.0 - tail, n);
    }
    if tail == 0.0 {
        return Ok(PI);
    }
    let v = bisect_increasing(
        |v| small_cap_fraction(v, n),
        tail,
        0.0,
        FRAC_PI_2,
        ANGLE_TOL,
    );
    Ok(PI - v)
}

/// Closed form at the hemisphere: `Q(Omega0/2, N, gamma) = Phi(-sqrt(N gamma))`.
pub fn q_halfspace(n: usize, gamma: f64) -> Result<f64> {
    check_dim(n)?;
    check_gamma(gamma)?;
    Ok(norm_cdf(-(n as f64 * gamma).sqrt()))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("snr must be finite and >= 0, got {gamma}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeQuery {
    pub x: f64,
    pub block_length: usize,
    pub gamma: f64,
}

impl ConeQuery {
    pub fn new(x: f64, block_length: usize, gamma: f64) -> Result<Self> {
        let total = total_solid_angle(block_length)?;
        check_gamma(gamma)?;
        if !(x >= 0.0 && x <= total * (1.0 + 1e-12)) {
            return invalid(format!("solid angle {x} outside [0, {total}]"));
        }
        Ok(Self {
            x: x.min(total),
            block_length,
            gamma,
        })
    }

    /// Query at a fraction of the total solid angle.
    pub fn at_fraction(frac: f64, block_length: usize, gamma: f64) -> Result<Self> {
        let total = total_solid_angle(block_length)?;
        Self::new(frac * total, block_length, gamma)
    }

    pub fn angle(&self) -> Result<f64> {
        inverse_cone_angle(self.x, self.block_length)
    }
}

/// `ln Q` at cone half-angle `theta`, with the given relative tolerance.
///
/// The integrand is log-concave in `r`, so it is located by its mode and
/// integrated after rescaling by the peak. This keeps relative accuracy when
/// `Q` itself is far below the smallest normal double.
pub fn ln_q_at_angle(theta: f64, n: usize, gamma: f64, rel_tol: f64) -> Result<f64> {
    check_dim(n)?;
    check_angle(theta)?;
    check_gamma(gamma)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    if theta >= PI {
        return Ok(f64::NEG_INFINITY);
    }
    let (ln_scale, integral) = scaled_integral(theta, n, gamma, 0.0, rel_tol)?;
    Ok(ln_scale + integral.value.ln())
}

/// `Q` at cone half-angle `theta` to absolute accuracy `tol`.
pub fn q_at_angle(theta: f64, n: usize, gamma: f64, tol: f64) -> Result<f64> {
    check_dim(n)?;
    check_angle(theta)?;
    check_gamma(gamma)?;
    if !(tol > 0.0) {
        return invalid("quadrature tolerance must be positive");
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    if theta >= PI {
        return Ok(0.0);
    }
    let rel = tol.clamp(1e-15, 1e-12);
    let (ln_scale, integral) = scaled_integral(theta, n, gamma, tol, rel)?;
    let scale = ln_scale.exp();
    let value = scale * integral.value;
    let error = scale * integral.error;
    if error > tol {
        return Err(Error::Quadrature {
            estimate: value,
            error,
            requested: tol,
        });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Integral of `exp(L - peak)` with `L` the log-integrand of `Q`; returns `(peak, integral)`.
/// `q_abs_tol` is an absolute tolerance on `Q` itself (0 for none).
fn scaled_integral(
    theta: f64,
    n: usize,
    gamma: f64,
    q_abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, crate::special::Integral)> {
    let dof = (n - 1) as f64;
    let a = (n as f64 * gamma).sqrt();
    let cot = theta.cos() / theta.sin();
    let ln_norm = -(0.5 * dof - 1.0) * LN_2 - ln_gamma(0.5 * dof);
    let log_integrand = move |r: f64| -> f64 {
        let radial = if n == 2 {
            0.0
        } else if r <= 0.0 {
            return f64::NEG_INFINITY;
        } else {
            (dof - 1.0) * r.ln()
        };
        radial - 0.5 * r * r + ln_norm + ln_norm_cdf(r * cot - a)
    };

    // Golden-section search for the mode of the concave log-integrand.
    let mut lo = 0.0;
    let mut hi = dof.sqrt() + a + 60.0;
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = log_integrand(x1);
    let mut f2 = log_integrand(x2);
    for _ in 0..200 {
        if hi - lo < 1e-10 * (1.0 + hi) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = log_integrand(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = log_integrand(x1);
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = log_integrand(mode);

    // Truncate where the integrand has dropped by e^-80 relative to the peak.
    const DROP: f64 = 80.0;
    let left = if log_integrand(0.0) >= peak - DROP {
        0.0
    } else {
        bisect_increasing(log_integrand, peak - DROP, 0.0, mode, 1e-12)
    };
    let mut right_edge = mode + 1.0;
    while log_integrand(right_edge) > peak - DROP {
        right_edge = mode + 2.0 * (right_edge - mode);
    }
    let right = bisect_increasing(|r| -log_integrand(r), DROP - peak, mode, right_edge, 1e-12);

    // Rounding in L is about |peak| ulps, which bounds the attainable relative accuracy.
    let rel_tol = rel_tol.max(64.0 * f64::EPSILON * (1.0 + peak.abs()));
    let abs_tol = 0.5 * q_abs_tol * (-peak).exp();
    let f = |r: f64| (log_integrand(r) - peak).exp();
    let a_part = integrate(f, left, mode, abs_tol, rel_tol)?;
    let b_part = integrate(f, mode, right, abs_tol, rel_tol)?;
    let integral = crate::special::Integral {
        value: a_part.value + b_part.value,
        error: a_part.error + b_part.error,
        evaluations: a_part.evaluations + b_part.evaluations,
    };
    Ok((peak, integral))
}

/// `Q(x, N, gamma)` by one-dimensional quadrature, absolute error `<= tol`.
pub fn q_quadrature(query: &ConeQuery, tol: f64) -> Result<f64> {
    let theta = query.angle()?;
    q_at_angle(theta, query.block_length, query.gamma, tol)
}

/// `Q` at the solid angle `(1 - tail) * Omega0`, given by its tail fraction.
pub fn q_tail(tail: f64, n: usize, gamma: f64, tol: f64) -> Result<f64> {
    q_at_angle(cone_angle_for_tail(tail, n)?, n, gamma, tol)
}

/// `ln Q` at the solid angle `(1 - tail) * Omega0`.
pub fn ln_q_tail(tail: f64, n: usize, gamma: f64, rel_tol: f64) -> Result<f64> {
    ln_q_at_angle(cone_angle_for_tail(tail, n)?, n, gamma, rel_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_count(hits: u64, samples: u64, seed: u64) -> Self {
        let value = hits as f64 / samples as f64;
        let stderr = (value * (1.0 - value) / samples as f64).sqrt();
        Self {
            value,
            stderr,
            samples,
            seed,
        }
    }
}

/// Draw the displacement angle `Phi` for a given SNR offset `a = sqrt(N gamma)`.
pub fn displacement_angle<R: Rng + ?Sized>(rng: &mut R, chi2: &ChiSquared<f64>, a: f64) -> f64 {
    let z1: f64 = rng.sample(StandardNormal);
    let r2 = chi2.sample(rng);
    if r2 > 0.0 {
        r2.sqrt().atan2(a + z1)
    } else {
        0.0
    }
}

/// Monte Carlo estimate of `Q(x, N, gamma)`.
///
/// The random inputs `(z1, r)` do not depend on `gamma`, so two calls with the
/// same seed share them sample for sample.
pub fn q_monte_carlo(query: &ConeQuery, samples: u64, seed: u64) -> Result<McEstimate> {
    let theta = query.angle()?;
    q_monte_carlo_at_angle(theta, query.block_length, query.gamma, samples, seed)
}

/// Monte Carlo estimate of `Pr[Phi >= theta]`.
pub fn q_monte_carlo_at_angle(
    theta: f64,
    n: usize,
    gamma: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_dim(n)?;
    check_angle(theta)?;
    check_gamma(gamma)?;
    if samples == 0 {
        return invalid("Monte Carlo needs at least one sample");
    }
    let a = (n as f64 * gamma).sqrt();
    let chi2 =
        ChiSquared::new((n - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let hits: u64 = rng::batches(samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = rng::stream(seed, &[MC_TAG, b]);
            let mut hits = 0u64;
            for _ in 0..len {
                if displacement_angle(&mut rng, &chi2, a) >= theta {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(McEstimate::from_count(hits, samples, seed))
}
