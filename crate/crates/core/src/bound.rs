//! The cascade bound `N R [1 - M Q((M-1)/M Omega0, N, S)]^n`, the older
//! exponential bound it is compared against, and the large-`N` exponents.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone;
use crate::error::{invalid, Error, Result};
use crate::special::{db_to_linear, ln_pow2};

/// Tolerance on `M Q <= 1` before an out-of-range factor is an error.
pub const FACTOR_TOL: f64 = 1e-9;

/// Tolerance of the closed-form vs cone-angle exponent identity.
pub const DUAL_FORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    /// Number of hops `n`.
    pub hops: u32,
    /// Block length `N`.
    pub block_length: usize,
    /// Rate `R` in bits per channel use.
    pub rate: f64,
    /// Worst-hop SNR `S = P0 / sigma0^2`.
    pub snr: f64,
}

impl BoundQuery {
    pub fn new(hops: u32, block_length: usize, rate: f64, snr: f64) -> Result<Self> {
        let q = Self {
            hops,
            block_length,
            rate,
            snr,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_length < 2 {
            return invalid(format!(
                "block length must be >= 2, got {}",
                self.block_length
            ));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return invalid(format!("snr must be positive and finite, got {}", self.snr));
        }
        message_bits(self.block_length, self.rate).map(|_| ())
    }

    /// `N R`, the number of message bits.
    pub fn message_bits(&self) -> u32 {
        message_bits(self.block_length, self.rate).expect("validated query")
    }
}

/// `N R` as an integer; `2^{NR}` must be an integer alphabet size `>= 2`.
pub fn message_bits(block_length: usize, rate: f64) -> Result<u32> {
    if !(rate > 0.0 && rate.is_finite()) {
        return invalid(format!("rate must be positive, got {rate}"));
    }
    let bits = block_length as f64 * rate;
    let rounded = bits.round();
    if (bits - rounded).abs() > 1e-9 || rounded < 1.0 {
        return invalid(format!(
            "N*R = {bits} must be a positive integer so that 2^(NR) is integral"
        ));
    }
    if rounded > 1000.0 {
        return invalid(format!("N*R = {bits} is too large"));
    }
    Ok(rounded as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FactorMethod {
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorEstimate {
    /// `1 - M Q`, clamped to `[0, 1]`.
    pub value: f64,
    /// `M Q` before clamping.
    pub m_q: f64,
    /// Monte Carlo standard error of `value`; zero for quadrature.
    pub stderr: f64,
    /// Set when `M Q` exceeded 1 within tolerance and was clamped.
    pub clamped: bool,
}

/// Per-hop contraction factor `1 - M Q((M-1)/M Omega0, N, snr)`.
pub fn per_hop_factor(
    block_length: usize,
    rate: f64,
    snr: f64,
    method: FactorMethod,
) -> Result<FactorEstimate> {
    let bits = message_bits(block_length, rate)?;
    if !(snr >= 0.0 && snr.is_finite()) {
        return invalid(format!("snr must be finite and >= 0, got {snr}"));
    }
    let tail = (-(bits as f64) * LN_2).exp();
    let (m_q, stderr) = match method {
        FactorMethod::Quadrature => {
            let ln_q = cone::ln_q_tail(tail, block_length, snr, 1e-12)?;
            ((ln_pow2(bits as f64) + ln_q).exp(), 0.0)
        }
        FactorMethod::MonteCarlo { samples, seed } => {
            let theta = cone::cone_angle_for_tail(tail, block_length)?;
            let est = cone::q_monte_carlo_at_angle(theta, block_length, snr, samples, seed)?;
            let m = 2f64.powi(bits as i32);
            (m * est.value, m * est.stderr)
        }
    };
    if m_q > 1.0 + FACTOR_TOL && matches!(method, FactorMethod::Quadrature) {
        return Err(Error::FactorOutOfRange { value: m_q });
    }
    let clamped = m_q > 1.0;
    Ok(FactorEstimate {
        value: (1.0 - m_q).clamp(0.0, 1.0),
        m_q,
        stderr,
        clamped,
    })
}

/// Mutual-information bound in bits, `N R * factor^n`.
pub fn theorem1_bound(q: &BoundQuery, method: FactorMethod) -> Result<f64> {
    q.validate()?;
    let factor = per_hop_factor(q.block_length, q.rate, q.snr, method)?;
    Ok(q.message_bits() as f64 * factor.value.powi(q.hops as i32))
}

/// Exponent `E(S)` of the earlier bound, in nats.
pub fn legacy_exponent(snr: f64) -> Result<f64> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return invalid(format!("snr must be finite and >= 0, got {snr}"));
    }
    let s2 = snr + 2.0;
    let a = s2 + (s2 * s2 - 4.0).max(0.0).sqrt();
    Ok(a / 4.0 + 0.5 * a.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyBound {
    pub value: f64,
    pub ln_value: f64,
    /// The slack exponent in `n (1 - epsilon)`; always 0 here.
    pub epsilon: f64,
}

/// `2^{NR} (1 - e^{-N E(S)})^n`, evaluated as `NR ln 2 + n log1p(-e^{-NE})`.
pub fn legacy_bound(q: &BoundQuery) -> Result<LegacyBound> {
    q.validate()?;
    let e = legacy_exponent(q.snr)?;
    let decay = (-(q.block_length as f64) * e).exp();
    let ln_value = ln_pow2(q.message_bits() as f64) + q.hops as f64 * (-decay).ln_1p();
    Ok(LegacyBound {
        value: ln_value.exp(),
        ln_value,
        epsilon: 0.0,
    })
}

fn cone_g(theta: f64, snr: f64) -> f64 {
    let c = theta.cos();
    0.5 * (snr.sqrt() * c + (4.0 + snr * c * c).sqrt())
}

/// Cone-angle exponent `E_L(theta)` in nats.
pub fn shannon_exponent(theta: f64, snr: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return invalid(format!("cone angle must lie in (0, pi), got {theta}"));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return invalid(format!("snr must be positive, got {snr}"));
    }
    let g = cone_g(theta, snr);
    let gs = g * theta.sin();
    if !(gs > 0.0) {
        return invalid(format!("G sin(theta) = {gs} is not positive"));
    }
    Ok(snr / 2.0 - 0.5 * snr.sqrt() * g * theta.cos() - gs.ln())
}

/// Closed form of the large-`N` exponent of `M Q((M-1)/M Omega0, N, S)`.
fn asymptotic_exponent_closed(rate: f64, snr: f64) -> f64 {
    let f = 2f64.powf(2.0 * rate);
    let root = (1.0 + 4.0 * f / ((f - 1.0) * snr)).sqrt();
    snr / (4.0 * f) * ((f + 1.0) + (f - 1.0) * root)
        + 0.5 * (f + snr / 2.0 * (f - 1.0) * (root + 1.0)).ln()
        - rate * LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualExponent {
    pub closed_form: f64,
    pub cone_form: f64,
}

/// Both evaluations of `E_as(R, S)`: the closed form and
/// `E_L(pi - asin 2^-R) - R ln 2`.
pub fn asymptotic_exponent_forms(rate: f64, snr: f64) -> Result<DualExponent> {
    if !(rate > 0.0 && rate.is_finite()) {
        return invalid(format!("rate must be positive, got {rate}"));
    }
    let theta = PI - 2f64.powf(-rate).asin();
    let cone_form = shannon_exponent(theta, snr)? - rate * LN_2;
    Ok(DualExponent {
        closed_form: asymptotic_exponent_closed(rate, snr),
        cone_form,
    })
}

/// `E_as(R, S)` in nats, with the two forms cross-checked.
pub fn asymptotic_exponent(rate: f64, snr: f64) -> Result<f64> {
    let d = asymptotic_exponent_forms(rate, snr)?;
    let diff = (d.closed_form - d.cone_form).abs();
    if !(diff < DUAL_FORM_TOL) {
        return Err(Error::DualFormMismatch {
            closed: d.closed_form,
            cone: d.cone_form,
            diff,
        });
    }
    Ok(d.closed_form)
}

/// `-(1/N) ln(M Q((M-1)/M Omega0, N, S))` at finite `N`, by quadrature.
pub fn finite_n_exponent(block_length: usize, rate: f64, snr: f64) -> Result<f64> {
    let bits = message_bits(block_length, rate)?;
    let tail = (-(bits as f64) * LN_2).exp();
    let ln_q = cone::ln_q_tail(tail, block_length, snr, 1e-12)?;
    Ok(-(ln_pow2(bits as f64) + ln_q) / block_length as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub query: BoundQuery,
    pub method: FactorMethod,
    pub per_hop_factor: f64,
    pub per_hop_factor_stderr: f64,
    pub theorem1_bits: f64,
    pub legacy_bits: f64,
    pub legacy_ln: f64,
    pub epsilon: f64,
    pub e_legacy: f64,
    pub e_as: f64,
    pub ratio: f64,
}

pub fn evaluate(q: &BoundQuery, method: FactorMethod) -> Result<BoundReport> {
    q.validate()?;
    let factor = per_hop_factor(q.block_length, q.rate, q.snr, method)?;
    let theorem1_bits = q.message_bits() as f64 * factor.value.powi(q.hops as i32);
    let legacy = legacy_bound(q)?;
    let e_legacy = legacy_exponent(q.snr)?;
    let e_as = asymptotic_exponent(q.rate, q.snr)?;
    Ok(BoundReport {
        query: *q,
        method,
        per_hop_factor: factor.value,
        per_hop_factor_stderr: factor.stderr,
        theorem1_bits,
        legacy_bits: legacy.value,
        legacy_ln: legacy.ln_value,
        epsilon: legacy.epsilon,
        e_legacy,
        e_as,
        ratio: e_as / e_legacy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    #[serde(rename = "R")]
    pub rate: f64,
    #[serde(rename = "S_dB")]
    pub snr_db: f64,
    #[serde(rename = "E_as_nats")]
    pub e_as: f64,
    #[serde(rename = "E_nats")]
    pub e_legacy: f64,
    pub ratio: f64,
}

pub const DEFAULT_RATES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

pub fn default_snr_db_grid() -> Vec<f64> {
    (-10..=30).map(f64::from).collect()
}

/// Rows in input order: rates outer, SNRs inner.
pub fn exponent_ratio_table(rates: &[f64], snr_db: &[f64]) -> Result<Vec<ExponentRow>> {
    if rates.is_empty() || snr_db.is_empty() {
        return invalid("rate and SNR lists must be non-empty");
    }
    let cells: Vec<(f64, f64)> = rates
        .iter()
        .flat_map(|&r| snr_db.iter().map(move |&s| (r, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(rate, db)| {
            let snr = db_to_linear(db);
            let e_as = asymptotic_exponent(rate, snr)?;
            let e_legacy = legacy_exponent(snr)?;
            Ok(ExponentRow {
                rate,
                snr_db: db,
                e_as,
                e_legacy,
                ratio: e_as / e_legacy,
            })
        })
        .collect()
}

pub fn write_exponent_csv<W: Write>(rows: &[ExponentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
