//! Monte Carlo simulation of a decode-and-forward line network over AWGN hops.
//!
//! Each node re-encodes the message it decoded, so the end-to-end law is the
//! product of independently estimated per-hop transition matrices. A direct
//! simulation of the whole cascade is run alongside as a cross-check.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{message_bits, per_hop_factor, FactorMethod};
use crate::error::{invalid, Error, Result};
use crate::matrix::{
    chain_compose, mutual_information, optimal_beta, MessageDist, TransitionMatrix,
};
use crate::rng;

const HOP_TAG: u64 = 0x409;
const DIRECT_TAG: u64 = 0xd1e;
const CODE_TAG: u64 = 0xc0de;

/// Upper limit on simulated channel uses per run.
pub const MAX_BUDGET: u64 = 200_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Antipodal,
    Simplex,
    RandomSphere,
    RandomBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Nearest codeword.
    MaxLikelihood,
    /// Farthest codeword.
    FarthestPoint,
}

/// `M` codewords in `R^N` with `|c|^2 <= N P0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereCode {
    codewords: Vec<Vec<f64>>,
    power: f64,
    on_sphere: bool,
}

impl SphereCode {
    pub fn new(codewords: Vec<Vec<f64>>, power: f64) -> Result<Self> {
        if codewords.len() < 2 {
            return invalid("a code needs at least two codewords");
        }
        let n = codewords[0].len();
        if n < 2 {
            return invalid("block length must be >= 2");
        }
        if let Some(c) = codewords.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
        if !(power > 0.0 && power.is_finite()) {
            return invalid(format!("power must be positive, got {power}"));
        }
        let cap = n as f64 * power;
        let mut on_sphere = true;
        for (i, c) in codewords.iter().enumerate() {
            let e = norm2(c);
            if !e.is_finite() || e > cap * (1.0 + 1e-9) {
                return invalid(format!("codeword {i} has energy {e} above N*P0 = {cap}"));
            }
            if (e - cap).abs() > 1e-9 * cap {
                on_sphere = false;
            }
        }
        Ok(Self {
            codewords,
            power,
            on_sphere,
        })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Power-sphere radius `sqrt(N P0)`.
    pub fn radius(&self) -> f64 {
        (self.dim() as f64 * self.power).sqrt()
    }

    pub fn on_sphere(&self) -> bool {
        self.on_sphere
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.codewords[i]
    }

    pub fn codewords(&self) -> &[Vec<f64>] {
        &self.codewords
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Build a code of the given kind. Random kinds depend on `seed` only.
pub fn make_code(kind: CodeKind, m: usize, n: usize, power: f64, seed: u64) -> Result<SphereCode> {
    if m < 2 || n < 2 {
        return invalid(format!("need M >= 2 and N >= 2, got M={m}, N={n}"));
    }
    let radius = (n as f64 * power).sqrt();
    let codewords = match kind {
        CodeKind::Antipodal => {
            if m != 2 {
                return invalid(format!("antipodal code needs M = 2, got {m}"));
            }
            let mut a = vec![0.0; n];
            a[0] = radius;
            let b = a.iter().map(|v| -v).collect();
            vec![a, b]
        }
        CodeKind::Simplex => {
            if m > n + 1 {
                return invalid(format!("simplex code needs M <= N + 1, got M={m}, N={n}"));
            }
            // Vertex i in the Helmert basis of the sum-zero subspace of R^M.
            let scale = radius / ((m as f64 - 1.0) / m as f64).sqrt();
            (0..m)
                .map(|i| {
                    let mut c = vec![0.0; n];
                    for k in 1..m {
                        let norm = ((k * (k + 1)) as f64).sqrt();
                        let h = match i.cmp(&k) {
                            std::cmp::Ordering::Less => 1.0,
                            std::cmp::Ordering::Equal => -(k as f64),
                            std::cmp::Ordering::Greater => 0.0,
                        };
                        c[k - 1] = scale * h / norm;
                    }
                    c
                })
                .collect()
        }
        CodeKind::RandomSphere | CodeKind::RandomBall => {
            let mut rng = rng::stream(seed, &[CODE_TAG, m as u64, n as u64]);
            (0..m)
                .map(|_| {
                    let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    let mut scale = radius / norm2(&c).sqrt();
                    if kind == CodeKind::RandomBall {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        scale *= u.powf(1.0 / n as f64);
                    }
                    c.iter_mut().for_each(|v| *v *= scale);
                    c
                })
                .collect()
        }
    };
    SphereCode::new(codewords, power)
}

/// `x + sigma Z` with `Z` standard normal per coordinate, written into `out`.
pub fn awgn_sample_into<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R, out: &mut [f64]) {
    for (o, xi) in out.iter_mut().zip(x) {
        let z: f64 = rng.sample(StandardNormal);
        *o = xi + sigma * z;
    }
}

pub fn awgn_sample<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be positive, got {sigma}"));
    }
    let mut out = vec![0.0; x.len()];
    awgn_sample_into(x, sigma, rng, &mut out);
    Ok(out)
}

/// Decision for observation `y`; ties go to the lowest index.
pub fn decode(kind: DecoderKind, code: &SphereCode, y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = dist2(y, code.codeword(0));
    for (i, c) in code.codewords().iter().enumerate().skip(1) {
        let d = dist2(y, c);
        let better = match kind {
            DecoderKind::MaxLikelihood => d < best_d,
            DecoderKind::FarthestPoint => d > best_d,
        };
        if better {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopEstimate {
    pub matrix: TransitionMatrix,
    /// Row-major decision counts, `shots` per row.
    pub counts: Vec<u64>,
    pub shots: u64,
}

/// Estimate one hop's transition matrix with `shots` transmissions per message.
pub fn estimate_hop_matrix(
    code: &SphereCode,
    decoder: DecoderKind,
    sigma: f64,
    shots: u64,
    seed: u64,
) -> Result<TransitionMatrix> {
    Ok(estimate_hop(code, decoder, sigma, shots, seed, 0)?.matrix)
}

/// As [`estimate_hop_matrix`], with noise streams keyed by `hop` as well.
pub fn estimate_hop(
    code: &SphereCode,
    decoder: DecoderKind,
    sigma: f64,
    shots: u64,
    seed: u64,
    hop: u64,
) -> Result<HopEstimate> {
    if shots == 0 {
        return invalid("need at least one shot per message");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be positive, got {sigma}"));
    }
    let m = code.len();
    let n = code.dim();
    let cells: Vec<(usize, u64, u64)> = (0..m)
        .flat_map(|w| rng::batches(shots).map(move |(b, len)| (w, b, len)))
        .collect();
    let partial: Vec<(usize, Vec<u64>)> = cells
        .into_par_iter()
        .map(|(w, b, len)| {
            let mut rng = rng::stream(seed, &[HOP_TAG, hop, w as u64, b]);
            let mut y = vec![0.0; n];
            let mut counts = vec![0u64; m];
            for _ in 0..len {
                awgn_sample_into(code.codeword(w), sigma, &mut rng, &mut y);
                counts[decode(decoder, code, &y)] += 1;
            }
            (w, counts)
        })
        .collect();
    let mut counts = vec![0u64; m * m];
    for (w, row) in partial {
        for (k, c) in row.into_iter().enumerate() {
            counts[w * m + k] += c;
        }
    }
    let matrix = TransitionMatrix::from_counts(m, &counts)?;
    Ok(HopEstimate {
        matrix,
        counts,
        shots,
    })
}

/// `mu = sum_k min_j P[j, k] = 1 - beta`.
pub fn mu_hat(p: &TransitionMatrix) -> f64 {
    p.column_minima().iter().sum::<f64>().clamp(0.0, 1.0)
}

/// Standard error of [`mu_hat`] for rows estimated from `shots` draws each.
///
/// The column minimizers are held fixed; the entries selected from one row
/// sum to a binomial proportion and distinct rows are independent.
pub fn mu_hat_stderr(p: &TransitionMatrix, shots: u64) -> f64 {
    let m = p.dim();
    let mut selected = vec![0.0; m];
    for k in 0..m {
        let (j, v) = (0..m)
            .map(|j| (j, p.get(j, k)))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
        selected[j] += v;
    }
    let var: f64 = selected.iter().map(|s| s * (1.0 - s)).sum::<f64>() / shots as f64;
    var.max(0.0).sqrt()
}

fn raw_product(m: usize, mats: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = mats[0].clone();
    for b in &mats[1..] {
        let mut out = vec![0.0; m * m];
        for j in 0..m {
            for l in 0..m {
                let a = acc[j * m + l];
                for k in 0..m {
                    out[j * m + k] += a * b[l * m + k];
                }
            }
        }
        acc = out;
    }
    acc
}

fn raw_mi_uniform(m: usize, p: &[f64]) -> f64 {
    let w = 1.0 / m as f64;
    let out: Vec<f64> = (0..m)
        .map(|k| (0..m).map(|j| w * p[j * m + k]).sum())
        .collect();
    let mut info = 0.0;
    for j in 0..m {
        for k in 0..m {
            let v = p[j * m + k];
            if v > 0.0 && out[k] > 0.0 {
                info += w * v * (v / out[k]).log2();
            }
        }
    }
    info
}

/// Delta-method standard error of `I(W; W_n)` (uniform prior) when every row
/// of every hop matrix is a multinomial proportion from `shots` draws.
pub fn mi_stderr(hops: &[TransitionMatrix], shots: u64) -> f64 {
    if hops.is_empty() || shots == 0 {
        return 0.0;
    }
    let m = hops[0].dim();
    let mut mats: Vec<Vec<f64>> = hops.iter().map(|h| h.entries().to_vec()).collect();
    let f = |mats: &[Vec<f64>]| raw_mi_uniform(m, &raw_product(m, mats));
    let base = f(&mats);
    let h = 1e-6;
    let mut var = 0.0;
    for i in 0..mats.len() {
        for j in 0..m {
            let row: Vec<f64> = mats[i][j * m..(j + 1) * m].to_vec();
            let mut grad = vec![0.0; m];
            for k in 0..m {
                let p = row[k];
                if p == 0.0 {
                    continue;
                }
                let idx = j * m + k;
                mats[i][idx] = p + h;
                let up = f(&mats);
                grad[k] = if p > h {
                    mats[i][idx] = p - h;
                    let down = f(&mats);
                    (up - down) / (2.0 * h)
                } else {
                    (up - base) / h
                };
                mats[i][idx] = p;
            }
            let mean: f64 = row.iter().zip(&grad).map(|(p, g)| p * g).sum();
            let second: f64 = row.iter().zip(&grad).map(|(p, g)| p * g * g).sum();
            var += (second - mean * mean).max(0.0) / shots as f64;
        }
    }
    var.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub hops: u32,
    pub block_length: usize,
    pub rate: f64,
    pub power: f64,
    /// Per-hop noise standard deviations; a single entry applies to all hops.
    pub sigmas: Vec<f64>,
    /// Noise floor `sigma0`; defaults to the smallest hop sigma.
    #[serde(default)]
    pub sigma_floor: Option<f64>,
    pub code_kind: CodeKind,
    pub decoder: DecoderKind,
    pub shots_per_message: u64,
    #[serde(default)]
    pub seed: u64,
}

impl CascadeConfig {
    pub fn message_count(&self) -> Result<usize> {
        let bits = message_bits(self.block_length, self.rate)?;
        if bits > 20 {
            return invalid(format!("M = 2^{bits} is too large to simulate"));
        }
        Ok(1usize << bits)
    }

    /// Noise level of each hop after broadcasting a single entry.
    pub fn hop_sigmas(&self) -> Result<Vec<f64>> {
        match self.sigmas.len() {
            1 => Ok(vec![self.sigmas[0]; self.hops as usize]),
            l if l == self.hops as usize => Ok(self.sigmas.clone()),
            l => invalid(format!("expected 1 or {} sigmas, got {l}", self.hops)),
        }
    }

    pub fn floor(&self) -> Result<f64> {
        let sigmas = self.hop_sigmas()?;
        let min = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = self.sigma_floor.unwrap_or(min);
        if !(floor > 0.0 && floor.is_finite()) {
            return invalid(format!("noise floor must be positive, got {floor}"));
        }
        if min < floor {
            return invalid(format!("hop sigma {min} is below the floor {floor}"));
        }
        Ok(floor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 {
            return invalid("cascade needs at least one hop");
        }
        if self.shots_per_message == 0 {
            return invalid("Monte Carlo budget of zero shots");
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return invalid(format!("power must be positive, got {}", self.power));
        }
        let m = self.message_count()? as u64;
        self.floor()?;
        let budget = (self.hops as u64)
            .checked_mul(m)
            .and_then(|v| v.checked_mul(self.shots_per_message))
            .and_then(|v| v.checked_mul(2));
        match budget {
            Some(b) if b <= MAX_BUDGET => Ok(()),
            _ => invalid(format!(
                "simulation budget exceeds {MAX_BUDGET} channel uses"
            )),
        }
    }

    /// Code used by the transmitter of hop `hop` (node `hop`).
    pub fn node_code(&self, hop: u32) -> Result<SphereCode> {
        let m = self.message_count()?;
        make_code(
            self.code_kind,
            m,
            self.block_length,
            self.power,
            rng::stream_key(&[self.seed, hop as u64]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub config: CascadeConfig,
    pub message_count: usize,
    pub hop_matrices: Vec<TransitionMatrix>,
    pub beta_hats: Vec<f64>,
    pub mu_hats: Vec<f64>,
    pub mu_stderrs: Vec<f64>,
    pub mi_matrix_bits: f64,
    pub mi_matrix_stderr: f64,
    pub mi_direct_bits: f64,
    pub mi_direct_stderr: f64,
    /// `log2(M) * prod (1 - mu_hat)`, the contraction bound on the estimated matrices.
    pub contraction_bits: f64,
    pub per_hop_factor: f64,
    pub theorem1_bits: f64,
    pub slack: f64,
    /// `mi_matrix_bits <= theorem1_bits + 3 * mi_matrix_stderr`.
    pub bound_holds: bool,
}

pub fn simulate_cascade(config: &CascadeConfig) -> Result<CascadeReport> {
    config.validate()?;
    let m = config.message_count()?;
    let sigmas = config.hop_sigmas()?;
    let floor = config.floor()?;
    let shots = config.shots_per_message;
    let codes: Vec<SphereCode> = (0..config.hops)
        .map(|i| config.node_code(i))
        .collect::<Result<_>>()?;

    let estimates: Vec<HopEstimate> = codes
        .iter()
        .zip(&sigmas)
        .enumerate()
        .map(|(i, (code, &sigma))| {
            estimate_hop(code, config.decoder, sigma, shots, config.seed, i as u64)
        })
        .collect::<Result<_>>()?;
    let hop_matrices: Vec<TransitionMatrix> = estimates.into_iter().map(|e| e.matrix).collect();

    let uniform = MessageDist::uniform(m);
    let mi_matrix_bits = mutual_information(&chain_compose(&hop_matrices)?, &uniform)?;
    let mi_matrix_stderr = mi_stderr(&hop_matrices, shots);
    let mu_hats: Vec<f64> = hop_matrices.iter().map(mu_hat).collect();
    let mu_stderrs = hop_matrices
        .iter()
        .map(|p| mu_hat_stderr(p, shots))
        .collect();
    let beta_hats: Vec<f64> = hop_matrices.iter().map(optimal_beta).collect();
    let contraction_bits = (m as f64).log2() * beta_hats.iter().product::<f64>();

    let direct = simulate_direct(config, &codes, &sigmas)?;
    let mi_direct_bits = mutual_information(&direct, &uniform)?;
    let mi_direct_stderr = mi_stderr(std::slice::from_ref(&direct), shots);

    let snr = config.power / (floor * floor);
    let factor = per_hop_factor(
        config.block_length,
        config.rate,
        snr,
        FactorMethod::Quadrature,
    )?;
    let theorem1_bits = (m as f64).log2() * factor.value.powi(config.hops as i32);
    let slack = theorem1_bits - mi_matrix_bits;

    Ok(CascadeReport {
        config: config.clone(),
        message_count: m,
        hop_matrices,
        beta_hats,
        mu_hats,
        mu_stderrs,
        mi_matrix_bits,
        mi_matrix_stderr,
        mi_direct_bits,
        mi_direct_stderr,
        contraction_bits,
        per_hop_factor: factor.value,
        theorem1_bits,
        slack,
        bound_holds: mi_matrix_bits <= theorem1_bits + 3.0 * mi_matrix_stderr,
    })
}

/// End-to-end transition matrix from pushing every shot through all hops.
fn simulate_direct(
    config: &CascadeConfig,
    codes: &[SphereCode],
    sigmas: &[f64],
) -> Result<TransitionMatrix> {
    let m = codes[0].len();
    let n = config.block_length;
    let shots = config.shots_per_message;
    let cells: Vec<(usize, u64, u64)> = (0..m)
        .flat_map(|w| rng::batches(shots).map(move |(b, len)| (w, b, len)))
        .collect();
    let partial: Vec<(usize, Vec<u64>)> = cells
        .into_par_iter()
        .map(|(w, b, len)| {
            let mut rng = rng::stream(config.seed, &[DIRECT_TAG, w as u64, b]);
            let mut y = vec![0.0; n];
            let mut counts = vec![0u64; m];
            for _ in 0..len {
                let mut msg = w;
                for (code, &sigma) in codes.iter().zip(sigmas) {
                    awgn_sample_into(code.codeword(msg), sigma, &mut rng, &mut y);
                    msg = decode(config.decoder, code, &y);
                }
                counts[msg] += 1;
            }
            (w, counts)
        })
        .collect();
    let mut counts = vec![0u64; m * m];
    for (w, row) in partial {
        for (k, c) in row.into_iter().enumerate() {
            counts[w * m + k] += c;
        }
    }
    TransitionMatrix::from_counts(m, &counts)
}
