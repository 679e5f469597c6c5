//! Invariant suites behind `cascade verify`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bound::{asymptotic_exponent_forms, DEFAULT_RATES};
use crate::cone::{
    cone_angle_for_tail, q_at_angle, q_halfspace, q_monte_carlo_at_angle, total_solid_angle,
};
use crate::error::{Error, Result};
use crate::geometry::{
    cell_solid_angles_2d, circle_code, cone_bound_check, lift_code_to_sphere_2d,
    pyramid_vs_cone_check, random_circle_code, scaling_invariance_check, wedge_frequency_check,
};
use crate::matrix::{
    beta_product_bound, optimal_convex_split, random_stochastic, verify_beta_floor, MessageDist,
};
use crate::rng;
use crate::sim::{make_code, CodeKind, SphereCode};
use crate::special::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Qfunc,
    Matrix,
    Geometry,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qfunc" => Ok(Self::Qfunc),
            "matrix" => Ok(Self::Matrix),
            "geometry" => Ok(Self::Geometry),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite '{other}' (expected qfunc, matrix, geometry or all)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qfunc => "qfunc",
            Self::Matrix => "matrix",
            Self::Geometry => "geometry",
            Self::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub statistic: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(suite: Suite, name: &str, statistic: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            statistic,
            relation: Relation::AtMost,
            threshold,
            pass: statistic <= threshold,
        }
    }

    fn at_least(suite: Suite, name: &str, statistic: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            statistic,
            relation: Relation::AtLeast,
            threshold,
            pass: statistic >= threshold,
        }
    }
}

/// Sample sizes for the Monte Carlo checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    pub mc_samples: u64,
    pub trials: usize,
}

impl Default for Effort {
    fn default() -> Self {
        Self {
            mc_samples: 200_000,
            trials: 200,
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, effort: Effort) -> Result<Vec<CheckResult>> {
    match suite {
        Suite::Qfunc => qfunc_suite(seed, effort),
        Suite::Matrix => matrix_suite(seed, effort),
        Suite::Geometry => geometry_suite(seed, effort),
        Suite::All => {
            let mut out = qfunc_suite(seed, effort)?;
            out.extend(matrix_suite(seed, effort)?);
            out.extend(geometry_suite(seed, effort)?);
            Ok(out)
        }
    }
}

fn qfunc_suite(seed: u64, effort: Effort) -> Result<Vec<CheckResult>> {
    let s = Suite::Qfunc;
    let fractions: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();

    let mut quad_err: f64 = 0.0;
    let mut mc_z: f64 = 0.0;
    for n in [2, 3, 8] {
        for &frac in &fractions {
            let theta = cone_angle_for_tail(1.0 - frac, n)?;
            let exact = 1.0 - frac;
            quad_err = quad_err.max((q_at_angle(theta, n, 0.0, 1e-10)? - exact).abs());
            let mc = q_monte_carlo_at_angle(theta, n, 0.0, effort.mc_samples, seed)?;
            mc_z = mc_z.max((mc.value - exact).abs() / mc.stderr.max(f64::MIN_POSITIVE));
        }
    }

    let gammas: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
    let mut increases = 0u32;
    for n in [2, 3, 8] {
        let theta = cone_angle_for_tail(0.5, n)?;
        let values: Vec<f64> = gammas
            .iter()
            .map(|&g| q_monte_carlo_at_angle(theta, n, g, effort.mc_samples, seed).map(|e| e.value))
            .collect::<Result<_>>()?;
        increases += values.windows(2).filter(|w| w[1] > w[0]).count() as u32;
    }

    let mut half_err: f64 = 0.0;
    for n in 2..=16 {
        let theta = cone_angle_for_tail(0.5, n)?;
        for g in [0.0, 0.5, 1.0, 4.0] {
            half_err = half_err.max((q_at_angle(theta, n, g, 1e-10)? - q_halfspace(n, g)?).abs());
        }
    }

    let mut dual: f64 = 0.0;
    for &r in &DEFAULT_RATES {
        for db in (-10..=30).step_by(5) {
            let d = asymptotic_exponent_forms(r, db_to_linear(db as f64))?;
            dual = dual.max((d.closed_form - d.cone_form).abs());
        }
    }

    let mut total_err: f64 = 0.0;
    for n in 2..=64 {
        let omega = total_solid_angle(n)?;
        total_err = total_err
            .max((crate::cone::cone_solid_angle(std::f64::consts::PI, n)? - omega).abs() / omega);
    }

    Ok(vec![
        CheckResult::at_most(s, "zero_snr_quadrature_max_abs_err", quad_err, 1e-8),
        CheckResult::at_most(s, "zero_snr_mc_max_z", mc_z, 4.0),
        CheckResult::at_most(s, "monotone_in_gamma_increases", increases as f64, 0.0),
        CheckResult::at_most(s, "halfspace_max_abs_err", half_err, 1e-8),
        CheckResult::at_most(s, "exponent_dual_form_max_diff", dual, 1e-9),
        CheckResult::at_most(s, "full_cone_rel_err", total_err, 1e-9),
    ])
}

fn matrix_suite(seed: u64, effort: Effort) -> Result<Vec<CheckResult>> {
    let s = Suite::Matrix;
    let mut rng = rng::stream(seed, &[0x3a7]);
    let mut violations = 0usize;
    let mut recon: f64 = 0.0;
    for i in 0..effort.trials {
        let m = 3 + i % 2;
        let p = random_stochastic(m, &mut rng);
        violations += verify_beta_floor(&p, 100, rng.random())?.violations;
        recon = recon.max(optimal_convex_split(&p).reconstruction_error(&p));
    }
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..effort.trials {
        let m = rng.random_range(2..=4);
        let len = rng.random_range(1..=6);
        let hops: Vec<_> = (0..len).map(|_| random_stochastic(m, &mut rng)).collect();
        let b = beta_product_bound(&hops, &MessageDist::uniform(m))?;
        excess = excess.max(b.mi_bits - b.bound_bits);
    }
    Ok(vec![
        CheckResult::at_most(s, "beta_floor_violations", violations as f64, 0.0),
        CheckResult::at_most(s, "optimal_split_reconstruction_err", recon, 1e-12),
        CheckResult::at_most(s, "contraction_max_excess_bits", excess, 1e-9),
    ])
}

fn geometry_suite(seed: u64, effort: Effort) -> Result<Vec<CheckResult>> {
    let s = Suite::Geometry;
    let trials = effort.mc_samples / 20;
    let mut codes: Vec<SphereCode> = vec![
        make_code(CodeKind::Antipodal, 2, 2, 1.0, seed)?,
        make_code(CodeKind::Simplex, 3, 2, 1.0, seed)?,
    ];
    for n in [2, 3, 5] {
        codes.push(make_code(
            CodeKind::RandomSphere,
            8,
            n,
            1.0,
            rng::stream_key(&[seed, n as u64]),
        )?);
    }
    let mut violations = 0u64;
    for code in &codes {
        violations += scaling_invariance_check(code, trials, seed)?.violations;
    }

    let mut rng = rng::stream(seed, &[0x6e0]);
    let mut width_err: f64 = 0.0;
    let mut freq_z: f64 = 0.0;
    let mut min_z = f64::INFINITY;
    let mut lift_z = f64::INFINITY;
    let mut cone_z = f64::INFINITY;
    for i in 0..5u64 {
        let m = 3 + (i as usize) % 2;
        let code = random_circle_code(m, 1.0, 0.05, &mut rng)?;
        width_err = width_err.max((cell_solid_angles_2d(&code)?.total_width() - TAU).abs());
        freq_z = freq_z.max(wedge_frequency_check(&code, effort.mc_samples, seed ^ i)?.max_z);
        for c in pyramid_vs_cone_check(&code, 1.0, effort.mc_samples / 4, seed ^ i, 2)?.cells {
            min_z = min_z.min(c.diff_shrunk / c.stderr_shrunk.max(f64::MIN_POSITIVE));
        }
        let c = cone_bound_check(&code, 1.0, effort.mc_samples / 4, seed ^ i)?;
        cone_z = cone_z.min((c.mu_hat - c.cone_bound) / c.stderr.max(f64::MIN_POSITIVE));

        let mut words = code.codewords().to_vec();
        let shrink = rng.random_range(0.2..0.9);
        words[0].iter_mut().for_each(|v| *v *= shrink);
        let r = lift_code_to_sphere_2d(
            &SphereCode::new(words, 1.0)?,
            1.0,
            effort.mc_samples / 4,
            seed ^ i,
        )?;
        let se = (r.stderr_before.powi(2) + r.stderr_after.powi(2))
            .sqrt()
            .max(f64::MIN_POSITIVE);
        lift_z = lift_z.min((r.mu_before - r.mu_after) / se);
    }
    let tetra = make_code(CodeKind::Simplex, 4, 3, 1.0, seed)?;
    for c in pyramid_vs_cone_check(&tetra, 1.0, effort.mc_samples / 4, seed, 3)?.cells {
        min_z = min_z.min(c.diff_shrunk / c.stderr_shrunk.max(f64::MIN_POSITIVE));
    }
    let eq = pyramid_vs_cone_check(
        &circle_code(&[0.0, TAU / 3.0, 2.0 * TAU / 3.0], 1.0)?,
        0.5,
        effort.mc_samples / 4,
        seed,
        2,
    )?;
    let eq_dev = eq
        .cells
        .iter()
        .map(|c| c.diff.abs() / c.stderr.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);

    Ok(vec![
        CheckResult::at_most(s, "scaling_invariance_violations", violations as f64, 0.0),
        CheckResult::at_most(s, "wedge_width_sum_err", width_err, 1e-9),
        CheckResult::at_most(s, "wedge_frequency_max_z", freq_z, 4.0),
        CheckResult::at_least(s, "pyramid_minus_cone_min_z", min_z, -4.0),
        CheckResult::at_most(s, "equilateral_equality_max_z", eq_dev, 4.0),
        CheckResult::at_least(s, "mu_minus_cone_bound_min_z", cone_z, -4.0),
        CheckResult::at_least(s, "lift_mu_decrease_min_z", lift_z, -4.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in [Suite::Qfunc, Suite::Matrix, Suite::Geometry, Suite::All] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn quick_suites_pass() {
        let effort = Effort {
            mc_samples: 20_000,
            trials: 20,
        };
        let results = run_suite(Suite::All, 11, effort).unwrap();
        assert_eq!(results.len(), 16);
        for r in &results {
            assert!(r.pass, "{r:?}");
        }
        let line = serde_json::to_string(&results[0]).unwrap();
        assert!(line.contains("\"relation\":\"<=\""));
    }
}
