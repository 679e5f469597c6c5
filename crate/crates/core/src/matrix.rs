//! Row-stochastic transition matrices between message alphabets, mutual
//! information, and the steady-state convex split that yields the per-hop
//! contraction factor.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Row sums further than this from 1 are rejected rather than renormalized.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Square row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct TransitionMatrix {
    m: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    m: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for TransitionMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        let m = TransitionMatrix::from_rows(repr.rows)?;
        if m.m != repr.m {
            return Err(Error::DimensionMismatch {
                expected: repr.m,
                got: m.m,
            });
        }
        Ok(m)
    }
}

impl From<TransitionMatrix> for MatrixRepr {
    fn from(t: TransitionMatrix) -> Self {
        MatrixRepr {
            m: t.m,
            rows: t.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TransitionMatrix {
    /// Validates and, if rows are within [`ROW_SUM_TOL`] of 1, renormalizes.
    pub fn new(m: usize, mut entries: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return invalid("matrix dimension must be positive");
        }
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: entries.len(),
            });
        }
        for (j, row) in entries.chunks_mut(m).enumerate() {
            if let Some(bad) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::NotStochastic(format!("row {j} has entry {bad}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic(format!("row {j} sums to {sum}")));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self { m, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.len(),
            });
        }
        Self::new(m, rows.into_iter().flatten().collect())
    }

    pub fn identity(m: usize) -> Self {
        let mut entries = vec![0.0; m * m];
        for j in 0..m {
            entries[j * m + j] = 1.0;
        }
        Self { m, entries }
    }

    /// Every row equal to `row`.
    pub fn steady_state(row: &[f64]) -> Result<Self> {
        let m = row.len();
        Self::new(m, row.iter().copied().cycle().take(m * m).collect())
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            m,
            entries: vec![1.0 / m as f64; m * m],
        }
    }

    /// Binary symmetric channel with flip probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::from_rows(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Rows are per-message counts; each row is divided by its own total.
    pub fn from_counts(m: usize, counts: &[u64]) -> Result<Self> {
        if counts.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: counts.len(),
            });
        }
        let mut entries = Vec::with_capacity(m * m);
        for (j, row) in counts.chunks(m).enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(Error::NotStochastic(format!("row {j} has no samples")));
            }
            entries.extend(row.iter().map(|&c| c as f64 / total as f64));
        }
        Self::new(m, entries)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.m + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.m..(j + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.m)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn column_minima(&self) -> Vec<f64> {
        (0..self.m)
            .map(|k| {
                (0..self.m)
                    .map(|j| self.get(j, k))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn has_identical_rows(&self, tol: f64) -> bool {
        let first = self.row(0);
        self.rows()
            .all(|r| r.iter().zip(first).all(|(a, b)| (a - b).abs() <= tol))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.m != rhs.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: rhs.m,
            });
        }
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for j in 0..m {
            for l in 0..m {
                let a = self.get(j, l);
                if a == 0.0 {
                    continue;
                }
                for k in 0..m {
                    out[j * m + k] += a * rhs.get(l, k);
                }
            }
        }
        Self::new(m, out)
    }

    /// Entrywise `max |self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV form: a header line holding `M`, then `M` comma-separated rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record([self.m.to_string()])?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty matrix CSV".into()))??;
        let m: usize = header
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidArgument("matrix CSV header must be M".into()))?;
        let mut rows = Vec::with_capacity(m);
        for rec in records {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("bad entry {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: rows.len(),
            });
        }
        Self::from_rows(rows)
    }
}

/// Probability distribution over the message alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageDist {
    probs: Vec<f64>,
}

impl MessageDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return invalid("distribution must be non-empty");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return invalid("distribution entries must be finite and non-negative");
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return invalid(format!("distribution sums to {sum}"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }
}

/// `I(W; W~)` in bits for `W ~ prior` and `W~ | W = j ~ P[j, .]`.
pub fn mutual_information(p: &TransitionMatrix, prior: &MessageDist) -> Result<f64> {
    let m = p.dim();
    if prior.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: prior.len(),
        });
    }
    let w = prior.probs();
    let output: Vec<f64> = (0..m)
        .map(|k| (0..m).map(|j| w[j] * p.get(j, k)).sum())
        .collect();
    let mut info = 0.0;
    for j in 0..m {
        if w[j] == 0.0 {
            continue;
        }
        for k in 0..m {
            let pjk = p.get(j, k);
            if pjk > 0.0 {
                info += w[j] * pjk * (pjk / output[k]).log2();
            }
        }
    }
    Ok(info.clamp(0.0, (m as f64).log2()))
}

/// Decomposition `P = beta * p_beta + (1 - beta) * p_bar` with `p_bar`
/// having identical rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSplit {
    pub beta: f64,
    pub p_beta: TransitionMatrix,
    pub p_bar: TransitionMatrix,
}

impl ConvexSplit {
    pub fn reconstruct(&self) -> Vec<f64> {
        let b = self.beta;
        self.p_beta
            .entries()
            .iter()
            .zip(self.p_bar.entries())
            .map(|(x, y)| b * x + (1.0 - b) * y)
            .collect()
    }

    /// `max |beta p_beta + (1-beta) p_bar - P|` against the source matrix.
    pub fn reconstruction_error(&self, source: &TransitionMatrix) -> f64 {
        self.reconstruct()
            .iter()
            .zip(source.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Smallest contraction factor: `1 - sum_k min_j P[j, k]`.
pub fn optimal_beta(p: &TransitionMatrix) -> f64 {
    (1.0 - p.column_minima().iter().sum::<f64>()).clamp(0.0, 1.0)
}

/// The steady-state split with the smallest possible `beta`.
///
/// `p_bar` rows are the column minima normalized by `1 - beta`. When
/// `beta == 1` the column minima vanish and `p_bar` is taken uniform; when
/// `beta` is negligible the input is already steady-state and `p_beta` is
/// the input itself.
pub fn optimal_convex_split(p: &TransitionMatrix) -> ConvexSplit {
    let m = p.dim();
    let minima = p.column_minima();
    let mass: f64 = minima.iter().sum();
    let beta = (1.0 - mass).clamp(0.0, 1.0);

    let p_bar = if mass <= 0.0 {
        TransitionMatrix::uniform(m)
    } else {
        let row: Vec<f64> = minima.iter().map(|v| v / mass).collect();
        TransitionMatrix {
            m,
            entries: row.iter().copied().cycle().take(m * m).collect(),
        }
    };

    let p_beta = if beta <= 1e-13 {
        p.clone()
    } else {
        let mut entries = Vec::with_capacity(m * m);
        for row in p.rows() {
            let residual: Vec<f64> = row
                .iter()
                .zip(&minima)
                .map(|(x, mn)| (x - mn).max(0.0))
                .collect();
            let sum: f64 = residual.iter().sum();
            entries.extend(residual.iter().map(|v| v / sum));
        }
        TransitionMatrix { m, entries }
    };
    ConvexSplit {
        beta,
        p_beta,
        p_bar,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFloorReport {
    pub trials: usize,
    pub floor: f64,
    pub min_beta: f64,
    pub violations: usize,
    /// Sampled splits that failed to be valid stochastic decompositions.
    pub invalid: usize,
}

impl BetaFloorReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random valid split of `p`, generated from the definition of a valid split
/// alone: draw a steady-state row `q`, then the largest admissible weight
/// `t_max = min_{j,k} P[j,k] / q_k` keeps `P - t q` non-negative, and a
/// weight `t` in `(0, t_max]` is drawn.
fn random_split<R: Rng>(p: &TransitionMatrix, rng: &mut R) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let m = p.dim();
    let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let mut t_max = 1.0f64;
    for j in 0..m {
        for k in 0..m {
            if q[k] > 0.0 {
                t_max = t_max.min(p.get(j, k) / q[k]);
            }
        }
    }
    // Hit the admissible boundary exactly a quarter of the time.
    let u = if rng.random_bool(0.25) {
        1.0
    } else {
        1.0 - rng.random::<f64>()
    };
    let t = u * t_max;
    let beta = 1.0 - t;
    if beta <= 0.0 {
        return Some((0.0, p.entries().to_vec(), q));
    }
    let q1: Vec<f64> = (0..m * m)
        .map(|i| (p.entries()[i] - t * q[i % m]) / beta)
        .collect();
    let valid = q1.iter().all(|v| *v >= -1e-12)
        && q1
            .chunks(m)
            .all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    valid.then_some((beta, q1, q))
}

/// Brute-force check that no sampled valid split beats [`optimal_beta`].
pub fn verify_beta_floor(
    p: &TransitionMatrix,
    trials: usize,
    seed: u64,
) -> Result<BetaFloorReport> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let floor = optimal_beta(p);
    let mut rng = rng::stream(seed, &[0xbe7a, p.dim() as u64]);
    let mut min_beta = f64::INFINITY;
    let mut violations = 0;
    let mut invalid_count = 0;
    for _ in 0..trials {
        match random_split(p, &mut rng) {
            Some((beta, _, _)) => {
                min_beta = min_beta.min(beta);
                if beta < floor - 1e-12 {
                    violations += 1;
                }
            }
            None => invalid_count += 1,
        }
    }
    Ok(BetaFloorReport {
        trials,
        floor,
        min_beta,
        violations,
        invalid: invalid_count,
    })
}

/// Left-to-right product of the hop matrices.
pub fn chain_compose(hops: &[TransitionMatrix]) -> Result<TransitionMatrix> {
    let (first, rest) = hops
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty hop list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, h| acc.matmul(h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionBound {
    /// `H(W) * prod beta_i`.
    pub bound_bits: f64,
    /// `I(W; W_n)` through the composed chain.
    pub mi_bits: f64,
}

pub fn beta_product_bound(
    hops: &[TransitionMatrix],
    prior: &MessageDist,
) -> Result<ContractionBound> {
    let composed = chain_compose(hops)?;
    let mi_bits = mutual_information(&composed, prior)?;
    let bound_bits = prior.entropy_bits() * hops.iter().map(optimal_beta).product::<f64>();
    debug_assert!(
        mi_bits <= bound_bits + 1e-9,
        "contraction violated: {mi_bits} > {bound_bits}"
    );
    Ok(ContractionBound {
        bound_bits,
        mi_bits,
    })
}

/// Random row-stochastic matrix with rows drawn uniformly from the simplex.
pub fn random_stochastic<R: Rng>(m: usize, rng: &mut R) -> TransitionMatrix {
    let mut entries = Vec::with_capacity(m * m);
    for _ in 0..m {
        let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = raw.iter().sum();
        entries.extend(raw.iter().map(|v| v / s));
    }
    TransitionMatrix { m, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::h2;
    use proptest::prelude::*;

    fn m2(a: [[f64; 2]; 2]) -> TransitionMatrix {
        TransitionMatrix::from_rows(a.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(TransitionMatrix::new(2, vec![0.5, 0.5, 0.5]).is_err());
        assert!(TransitionMatrix::new(2, vec![0.5, 0.6, 0.5, 0.5]).is_err());
        assert!(TransitionMatrix::new(2, vec![-0.1, 1.1, 0.5, 0.5]).is_err());
        let t = TransitionMatrix::new(2, vec![0.5, 0.5 + 5e-10, 0.5, 0.5]).unwrap();
        assert!((t.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        let u2 = MessageDist::uniform(2);
        assert!(
            (mutual_information(&TransitionMatrix::identity(2), &u2).unwrap() - 1.0).abs() < 1e-15
        );
        let s = TransitionMatrix::steady_state(&[0.2, 0.3, 0.5]).unwrap();
        assert!(mutual_information(&s, &MessageDist::uniform(3)).unwrap() < 1e-15);
        let bsc = m2([[0.9, 0.1], [0.1, 0.9]]);
        let mi = mutual_information(&bsc, &u2).unwrap();
        assert!((mi - (1.0 - h2(0.1))).abs() < 1e-14);
        assert!((mi - 0.531_004_406_410_719_3).abs() < 1e-12);
        assert!(mutual_information(&bsc, &MessageDist::uniform(3)).is_err());
    }

    #[test]
    fn split_examples() {
        let s = optimal_convex_split(&m2([[0.9, 0.1], [0.2, 0.8]]));
        assert!((s.beta - 0.7).abs() < 1e-15);
        assert!((s.p_bar.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.p_bar.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);

        let s = optimal_convex_split(&TransitionMatrix::identity(3));
        assert_eq!(s.beta, 1.0);
        assert_eq!(s.p_bar, TransitionMatrix::uniform(3));

        let ss = TransitionMatrix::steady_state(&[0.1, 0.6, 0.3]).unwrap();
        let s = optimal_convex_split(&ss);
        assert!(s.beta.abs() < 1e-15);
        assert!(s.p_bar.max_abs_diff(&ss) < 1e-15);
    }

    #[test]
    fn beta_floor_examples() {
        let r = verify_beta_floor(&TransitionMatrix::identity(3), 200, 1).unwrap();
        assert!(r.passed());
        assert_eq!(r.floor, 1.0);
        assert_eq!(r.min_beta, 1.0);

        let r = verify_beta_floor(&m2([[0.9, 0.1], [0.2, 0.8]]), 1000, 2).unwrap();
        assert!(r.passed());
        assert_eq!(r.invalid, 0);
        assert!(r.min_beta >= 0.7 - 1e-12);
        // Boundary draws come arbitrarily close to the floor.
        assert!(r.min_beta < 0.7 + 0.05);

        let ss = TransitionMatrix::steady_state(&[0.25, 0.75]).unwrap();
        let r = verify_beta_floor(&ss, 100, 3).unwrap();
        assert_eq!(r.floor, 0.0);
        assert!(r.passed());
        assert!(verify_beta_floor(&ss, 0, 3).is_err());
    }

    #[test]
    fn compose_examples() {
        let p = m2([[0.7, 0.3], [0.4, 0.6]]);
        let c = chain_compose(&[TransitionMatrix::identity(2), p.clone()]).unwrap();
        assert!(c.max_abs_diff(&p) < 1e-15);

        let s = TransitionMatrix::steady_state(&[0.3, 0.7]).unwrap();
        assert!(chain_compose(&[s, p]).unwrap().has_identical_rows(1e-15));

        let (a, b) = (0.1, 0.25);
        let c = chain_compose(&[
            TransitionMatrix::bsc(a).unwrap(),
            TransitionMatrix::bsc(b).unwrap(),
        ])
        .unwrap();
        assert!(c.max_abs_diff(&TransitionMatrix::bsc(a + b - 2.0 * a * b).unwrap()) < 1e-15);

        assert!(chain_compose(&[]).is_err());
        assert!(
            chain_compose(&[TransitionMatrix::identity(2), TransitionMatrix::identity(3)]).is_err()
        );
    }

    #[test]
    fn beta_product_examples() {
        let u4 = MessageDist::uniform(4);
        let r = beta_product_bound(&[TransitionMatrix::identity(4)], &u4).unwrap();
        assert!((r.bound_bits - 2.0).abs() < 1e-15 && (r.mi_bits - 2.0).abs() < 1e-15);

        let s = TransitionMatrix::steady_state(&[0.5, 0.5]).unwrap();
        let hops = [
            TransitionMatrix::bsc(0.1).unwrap(),
            s,
            TransitionMatrix::identity(2),
        ];
        let r = beta_product_bound(&hops, &MessageDist::uniform(2)).unwrap();
        assert!(r.mi_bits < 1e-15);

        // Five BSC hops at the N=2, SNR=1 antipodal flip probability.
        let p = 0.078_649_603_525_142_6;
        let hops = vec![TransitionMatrix::bsc(p).unwrap(); 5];
        let r = beta_product_bound(&hops, &MessageDist::uniform(2)).unwrap();
        let rho: f64 = 1.0 - 2.0 * p;
        assert!((r.bound_bits - rho.powi(5)).abs() < 1e-13);
        assert!((r.bound_bits - 0.4249).abs() < 1e-4);
        let oracle = 1.0 - h2((1.0 - rho.powi(5)) / 2.0);
        assert!((r.mi_bits - oracle).abs() < 1e-13);
        assert!(r.mi_bits < r.bound_bits);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let p = m2([[0.9, 0.1], [0.2, 0.8]]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("2\n"));
        assert_eq!(TransitionMatrix::read_csv(&buf[..]).unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<TransitionMatrix>(&json).unwrap(), p);
        assert!(serde_json::from_str::<TransitionMatrix>(
            r#"{"m":2,"rows":[[0.5,0.6],[0.5,0.5]]}"#
        )
        .is_err());
        assert!(TransitionMatrix::read_csv("3\n1,0,0\n0,1,0\n".as_bytes()).is_err());
    }

    fn arb_matrix(m: usize) -> impl Strategy<Value = TransitionMatrix> {
        proptest::collection::vec(0.0f64..1.0, m * m).prop_map(move |raw| {
            let mut entries = Vec::with_capacity(m * m);
            for row in raw.chunks(m) {
                let r: Vec<f64> = row.iter().map(|v| v + 1e-3).collect();
                let s: f64 = r.iter().sum();
                entries.extend(r.iter().map(|v| v / s));
            }
            TransitionMatrix::new(m, entries).unwrap()
        })
    }

    fn arb_sparse_matrix(m: usize) -> impl Strategy<Value = TransitionMatrix> {
        // Zeros on many entries so beta hits its extremes.
        proptest::collection::vec((0.0f64..1.0, proptest::bool::weighted(0.4)), m * m).prop_map(
            move |raw| {
                let mut entries = Vec::with_capacity(m * m);
                for (j, row) in raw.chunks(m).enumerate() {
                    let mut r: Vec<f64> =
                        row.iter().map(|(v, z)| if *z { 0.0 } else { *v }).collect();
                    r[j] += 1e-2;
                    let s: f64 = r.iter().sum();
                    entries.extend(r.iter().map(|v| v / s));
                }
                TransitionMatrix::new(m, entries).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn split_reconstructs(p in (2usize..6).prop_flat_map(arb_matrix)) {
            let s = optimal_convex_split(&p);
            prop_assert!(s.reconstruction_error(&p) < 1e-12);
            prop_assert!(s.p_bar.has_identical_rows(0.0));
            prop_assert!((0.0..=1.0).contains(&s.beta));
        }

        #[test]
        fn split_reconstructs_sparse(p in (2usize..6).prop_flat_map(arb_sparse_matrix)) {
            let s = optimal_convex_split(&p);
            prop_assert!(s.reconstruction_error(&p) < 1e-12);
        }

        #[test]
        fn contraction_holds(hops in (2usize..5).prop_flat_map(|m| proptest::collection::vec(arb_sparse_matrix(m), 1..6))) {
            let m = hops[0].dim();
            let r = beta_product_bound(&hops, &MessageDist::uniform(m)).unwrap();
            prop_assert!(r.mi_bits <= r.bound_bits + 1e-9);
        }

        #[test]
        fn data_processing(a in proptest::collection::vec(arb_matrix(3), 1..4), b in proptest::collection::vec(arb_matrix(3), 1..4)) {
            let u = MessageDist::uniform(3);
            let head = mutual_information(&chain_compose(&a).unwrap(), &u).unwrap();
            let all: Vec<_> = a.iter().chain(&b).cloned().collect();
            let full = mutual_information(&chain_compose(&all).unwrap(), &u).unwrap();
            prop_assert!(full <= head + 1e-12);
        }

        #[test]
        fn permutation_invariance(p in arb_matrix(4), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
            let u = MessageDist::uniform(4);
            let rows: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|k| p.get(perm[j], perm[k])).collect()).collect();
            let q = TransitionMatrix::from_rows(rows).unwrap();
            let a = mutual_information(&p, &u).unwrap();
            let b = mutual_information(&q, &u).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
