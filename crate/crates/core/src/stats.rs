//! Exact oracles and estimators: the big-integer binomial law for sums of
//! ±1 outcomes, total-variation and chi-square comparisons, the plug-in
//! mutual-information estimate, power-law fits, and sample variance.
//!
//! The binomial oracle is kept in exact rational arithmetic so every
//! Monte Carlo path in the crate can be checked against ground truth that
//! never went through the simulation code.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest count the exact oracle accepts.
pub const ORACLE_MAX_COUNT: usize = 10_000;

/// Exact distribution of Σ = sum of `n` iid ±1 outcomes with p = 1/2.
///
/// P(Σ = s) = C(n, (n+s)/2) / 2ⁿ for s ≡ n (mod 2), zero otherwise.
#[derive(Debug, Clone)]
pub struct SumDistribution {
    n: usize,
    /// probs[k] = P(#plus = k), exact.
    probs: Vec<BigRational>,
}

/// Builds the exact distribution of Σ for `n` in 1..=[`ORACLE_MAX_COUNT`].
pub fn binomial_exact(n: usize) -> Result<SumDistribution> {
    if n == 0 || n > ORACLE_MAX_COUNT {
        return Err(Error::OutsideOracleRange(n));
    }
    let denom = BigInt::one() << n;
    let mut coeff = BigInt::one();
    let mut probs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        probs.push(BigRational::new(coeff.clone(), denom.clone()));
        if k < n {
            coeff = coeff * BigInt::from(n - k) / BigInt::from(k + 1);
        }
    }
    Ok(SumDistribution { n, probs })
}

impl SumDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Σ values with non-zero probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        let n = self.n as i64;
        (0..=self.n).map(move |k| 2 * k as i64 - n)
    }

    /// Exact P(Σ = s); zero off the parity lattice or out of range.
    pub fn prob_sigma(&self, s: i64) -> BigRational {
        let n = self.n as i64;
        if s.abs() > n || (s + n) % 2 != 0 {
            return BigRational::zero();
        }
        self.probs[((s + n) / 2) as usize].clone()
    }

    pub fn prob_sigma_f64(&self, s: i64) -> f64 {
        self.prob_sigma(s).to_f64().unwrap_or(0.0)
    }

    /// P(Σ = 0), the per-copy escape probability of the all-zero decision
    /// rule. Zero for odd `n`.
    pub fn sigma_zero_probability(&self) -> f64 {
        self.prob_sigma_f64(0)
    }

    /// Exact E|Σ|.
    pub fn expected_abs_sigma(&self) -> BigRational {
        let n = self.n as i64;
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| BigRational::from(BigInt::from((2 * k as i64 - n).abs())) * p)
            .sum()
    }

    /// Exact E[Σ²] (equals n for fair ±1 outcomes).
    pub fn expected_sigma_sqr(&self) -> BigRational {
        let n = self.n as i64;
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let s = 2 * k as i64 - n;
                BigRational::from(BigInt::from(s * s)) * p
            })
            .sum()
    }

    /// Exact Σ P — equals one; kept callable so tests can assert it.
    pub fn total_probability(&self) -> BigRational {
        self.probs.iter().cloned().sum()
    }
}

/// Exact P(Σ = 0) = C(n, n/2)/2ⁿ for even n, zero for odd n, computed
/// without building the full distribution.
pub fn sigma_zero_probability(n: usize) -> Result<f64> {
    if n == 0 || n > ORACLE_MAX_COUNT {
        return Err(Error::OutsideOracleRange(n));
    }
    if !n.is_multiple_of(2) {
        return Ok(0.0);
    }
    let mut central = BigInt::one();
    for i in 0..n / 2 {
        central = central * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    let p = BigRational::new(central, BigInt::one() << n);
    Ok(p.to_f64().unwrap_or(0.0))
}

/// Exact E|N_δ| for an even count `n`, where N_δ = Σ/2 is the excess of
/// plus outcomes over n/2.
pub fn expected_abs_imbalance(n: usize) -> Result<f64> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddCount(n));
    }
    let dist = binomial_exact(n)?;
    let e_abs = dist.expected_abs_sigma() / BigRational::from(BigInt::from(2));
    Ok(e_abs.to_f64().unwrap_or(f64::NAN))
}

/// Integer-valued sample histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    bins: BTreeMap<i64, u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: &[i64]) -> Self {
        let mut h = Self::new();
        for &s in samples {
            h.record(s);
        }
        h
    }

    pub fn record(&mut self, value: i64) {
        *self.bins.entry(value).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, value: i64) -> u64 {
        self.bins.get(&value).copied().unwrap_or(0)
    }

    pub fn frequency(&self, value: i64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(value) as f64 / self.total as f64
        }
    }

    pub fn bins(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.bins.iter().map(|(&v, &c)| (v, c))
    }
}

/// Total-variation distance between two empirical histograms,
/// (1/2) Σ |a(s)/a.total − b(s)/b.total| over the union of supports.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.total == 0 || b.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut values: Vec<i64> = a.bins.keys().copied().collect();
    values.extend(b.bins.keys().copied());
    values.sort_unstable();
    values.dedup();
    let sum: f64 = values
        .iter()
        .map(|&v| (a.frequency(v) - b.frequency(v)).abs())
        .sum();
    // rounding in count/total can push the sum a few ulp past 2
    Ok((sum / 2.0).min(1.0))
}

/// Total-variation distance between an empirical histogram and the exact
/// binomial law.
pub fn tv_distance_to_exact(h: &Histogram, dist: &SumDistribution) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut values: Vec<i64> = dist.support().collect();
    values.extend(h.bins.keys().copied());
    values.sort_unstable();
    values.dedup();
    let sum: f64 = values
        .iter()
        .map(|&v| (h.frequency(v) - dist.prob_sigma_f64(v)).abs())
        .sum();
    Ok((sum / 2.0).min(1.0))
}

/// 2×K contingency table: Bob's bit against Alice's discretized statistic.
#[derive(Debug, Clone)]
pub struct JointCounts {
    counts: [Vec<u64>; 2],
}

impl JointCounts {
    pub fn new(categories: usize) -> Self {
        Self {
            counts: [vec![0; categories], vec![0; categories]],
        }
    }

    pub fn from_rows(row0: Vec<u64>, row1: Vec<u64>) -> Result<Self> {
        if row0.len() != row1.len() {
            return Err(Error::Misaligned {
                record: row0.len(),
                ensemble: row1.len(),
            });
        }
        Ok(Self {
            counts: [row0, row1],
        })
    }

    pub fn record(&mut self, bob_bit: bool, category: usize) {
        self.counts[bob_bit as usize][category] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn count(&self, bit: usize, category: usize) -> u64 {
        self.counts[bit][category]
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }
}

/// Plug-in mutual information in bits: Σ p(x,y) log₂[p(x,y)/(p(x)p(y))],
/// with zero-count cells contributing nothing.
pub fn mutual_information_bits(joint: &JointCounts) -> Result<f64> {
    let total = joint.total();
    if total == 0 {
        return Err(Error::EmptyJointCounts);
    }
    let k = joint.categories();
    let row_sums: Vec<u64> = (0..2)
        .map(|b| (0..k).map(|c| joint.count(b, c)).sum())
        .collect();
    let col_sums: Vec<u64> = (0..k)
        .map(|c| (0..2).map(|b| joint.count(b, c)).sum())
        .collect();
    let t = total as f64;
    let mut mi = 0.0;
    for (b, &row_sum) in row_sums.iter().enumerate() {
        for (c, &col_sum) in col_sums.iter().enumerate() {
            let n = joint.count(b, c);
            if n == 0 {
                continue;
            }
            let p_joint = n as f64 / t;
            let ratio = (n as f64 * t) / (row_sum as f64 * col_sum as f64);
            mi += p_joint * ratio.log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Least-squares power-law fit of log(value) against log(n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn scaling_fit(points: &[(usize, f64)]) -> Result<ScalingFitResult> {
    if points.len() < 3 || points.iter().any(|&(n, v)| n == 0 || v <= 0.0) {
        return Err(Error::InsufficientFitPoints);
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientFitPoints);
    }
    let exponent = sxy / sxx;
    let intercept = y_mean - exponent * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = intercept + exponent * x;
            (y - fit).powi(2)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(ScalingFitResult {
        exponent,
        intercept,
        r_squared,
    })
}

/// Unbiased sample variance (divide by count − 1).
pub fn variance_estimate(samples: &[i64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples);
    }
    let m = samples.len() as f64;
    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / m;
    let ss: f64 = samples.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
    Ok(ss / (m - 1.0))
}

/// Chi-square goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareGof {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of an observed histogram against exact model
/// probabilities. Adjacent values are merged until each bin's expected count
/// reaches `min_expected` (Cochran's rule uses 5.0). Fewer than two merged
/// bins degenerates to p = 1.
pub fn chi_square_gof(
    observed: &Histogram,
    expected: &[(i64, f64)],
    min_expected: f64,
) -> Result<ChiSquareGof> {
    if observed.total() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total = observed.total() as f64;
    let mut cells: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for &(v, p) in expected {
        cells.entry(v).or_insert((0.0, 0)).0 += p;
    }
    for (v, c) in observed.bins() {
        cells.entry(v).or_insert((0.0, 0)).1 += c;
    }

    // merge ascending until each bin holds enough expectation
    let mut merged: Vec<(f64, u64)> = Vec::new();
    let mut acc_exp = 0.0;
    let mut acc_obs = 0u64;
    for (_, (p, c)) in cells {
        acc_exp += p * total;
        acc_obs += c;
        if acc_exp >= min_expected {
            merged.push((acc_exp, acc_obs));
            acc_exp = 0.0;
            acc_obs = 0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0 {
        if let Some(last) = merged.last_mut() {
            last.0 += acc_exp;
            last.1 += acc_obs;
        } else {
            merged.push((acc_exp, acc_obs));
        }
    }

    if merged.len() < 2 {
        return Ok(ChiSquareGof {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
        });
    }
    let statistic: f64 = merged
        .iter()
        .map(|&(exp, obs)| {
            let d = obs as f64 - exp;
            d * d / exp
        })
        .sum();
    let df = merged.len() - 1;
    let p_value = reg_gamma_upper(df as f64 / 2.0, statistic / 2.0);
    Ok(ChiSquareGof {
        statistic,
        degrees_of_freedom: df,
        p_value,
    })
}

// --- regularized incomplete gamma, for chi-square p-values ---

const LANCZOS: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_403,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, &c) in LANCZOS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a).
fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut term = sum;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}
