//! Exact moments of random cut-and-choose samples over equal-size blocks.
//!
//! A partition of `n = k·m` values into `k` blocks of size `m` induces the
//! uniform distribution over the `m^k` samples taking one value per block.
//! For such a sample `y`, `μ(y)` is its mean and `σ²(y)` its variance with
//! divisor `k`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gametheory::for_each_combination;
use crate::stats::ExactStat;

/// Guard for the full enumeration of `m^k` samples.
pub const MAX_ROUTE_A_SAMPLES: u128 = 1_000_000;
/// Guard for the number of unlabeled partitions enumerated.
pub const MAX_PARTITIONS: u128 = 1_000_000;

/// Parses `-12`, `3.25`, `1e-3`, `-0.5E2` or `7/3` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::params(format!("not a decimal number: {s:?}"));
    let t = s.trim();
    if let Some((a, b)) = t.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|_| bad())?;
        let den: BigInt = b.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10u8);
    let mut r = if scale >= 0 {
        BigRational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Route (a): exact averages over all `m^k` samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumeratedMoments {
    pub mean: ExactStat,
    pub expected_variance: ExactStat,
    pub samples: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMoments {
    /// `E[μ(y)]`, as the average of the block means.
    pub mean: ExactStat,
    pub population_mean: ExactStat,
    pub mean_is_population_mean: bool,
    /// `E[σ²(y)]` from the block-variance identity (route (b)).
    pub expected_variance: ExactStat,
    /// `Var(μ(y)) = (1/k²)·Σ_blocks within-block variance`.
    pub mean_variance: ExactStat,
    /// Route (a), absent when `m^k` exceeds the guard.
    pub enumerated: Option<EnumeratedMoments>,
    pub route_a_skipped: bool,
    /// `Some(true)` when both routes ran and agree exactly.
    pub routes_agree: Option<bool>,
}

fn mean_of<'a>(xs: impl Iterator<Item = &'a BigRational>, count: usize) -> BigRational {
    let s: BigRational = xs.fold(BigRational::zero(), |a, x| a + x);
    s / BigRational::from_integer(BigInt::from(count))
}

/// Variance with divisor `len`.
fn variance(xs: &[&BigRational]) -> BigRational {
    let mu = mean_of(xs.iter().copied(), xs.len());
    let ss = xs.iter().fold(BigRational::zero(), |a, x| {
        let d = *x - &mu;
        a + &d * &d
    });
    ss / BigRational::from_integer(BigInt::from(xs.len()))
}

/// Checks that `partition` splits `1..=n` into blocks of one common size.
fn check_equal_partition(n: usize, partition: &[Vec<usize>]) -> Result<(usize, usize)> {
    let k = partition.len();
    if k == 0 {
        return Err(Error::params("partition has no blocks"));
    }
    let m = partition[0].len();
    if m == 0 || k * m != n || partition.iter().any(|b| b.len() != m) {
        return Err(Error::params(format!(
            "partition must split {n} values into blocks of one common size"
        )));
    }
    let mut seen = vec![false; n + 1];
    for &p in partition.iter().flatten() {
        if p == 0 || p > n || seen[p] {
            return Err(Error::params(format!("index {p} repeated or out of range")));
        }
        seen[p] = true;
    }
    Ok((k, m))
}

pub fn partition_moments(values: &[BigRational], partition: &[Vec<usize>]) -> Result<PartitionMoments> {
    partition_moments_with_limit(values, partition, MAX_ROUTE_A_SAMPLES)
}

pub fn partition_moments_with_limit(
    values: &[BigRational],
    partition: &[Vec<usize>],
    route_a_limit: u128,
) -> Result<PartitionMoments> {
    let n = values.len();
    let (k, m) = check_equal_partition(n, partition)?;
    let all: Vec<&BigRational> = values.iter().collect();
    let pop_mean = mean_of(values.iter(), n);
    let pop_var = variance(&all);

    let kk = BigRational::from_integer(BigInt::from(k * k));
    let within: BigRational = partition
        .iter()
        .map(|b| variance(&b.iter().map(|&i| &values[i - 1]).collect::<Vec<_>>()))
        .fold(BigRational::zero(), |a, v| a + v);
    let mean_var = within / kk;
    let expected_var = &pop_var - &mean_var;

    let samples = (m as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    let enumerated = (samples <= route_a_limit).then(|| {
        let mut sum_mean = BigRational::zero();
        let mut sum_var = BigRational::zero();
        let mut idx = vec![0usize; k];
        let mut y: Vec<&BigRational> = Vec::with_capacity(k);
        'odometer: loop {
            y.clear();
            y.extend(idx.iter().zip(partition).map(|(&i, b)| &values[b[i] - 1]));
            sum_mean += mean_of(y.iter().copied(), k);
            sum_var += variance(&y);
            for j in (0..k).rev() {
                idx[j] += 1;
                if idx[j] < m {
                    continue 'odometer;
                }
                idx[j] = 0;
            }
            break;
        }
        let count = BigRational::from_integer(BigInt::from(samples));
        EnumeratedMoments {
            mean: ExactStat::from_rational(sum_mean / &count),
            expected_variance: ExactStat::from_rational(sum_var / &count),
            samples,
        }
    });

    // E[μ(y)] is the average of the block means; equal block sizes make it
    // the population mean, which callers check rather than assume.
    let block_means = partition
        .iter()
        .map(|b| mean_of(b.iter().map(|&i| &values[i - 1]), m))
        .fold(BigRational::zero(), |a, v| a + v);
    let mean = ExactStat::from_rational(block_means / BigRational::from_integer(BigInt::from(k)));
    let population_mean = ExactStat::from_rational(pop_mean);
    let expected_variance = ExactStat::from_rational(expected_var);
    let routes_agree = enumerated
        .as_ref()
        .map(|e| e.mean == mean && e.expected_variance == expected_variance);
    Ok(PartitionMoments {
        route_a_skipped: enumerated.is_none(),
        mean_is_population_mean: mean == population_mean,
        population_mean,
        mean,
        expected_variance,
        mean_variance: ExactStat::from_rational(mean_var),
        enumerated,
        routes_agree,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionObjective {
    MinimizeExpectedVariance,
    MaximizeExpectedVariance,
    MinimizeMeanVariance,
}

impl PartitionObjective {
    fn value(self, m: &PartitionMoments) -> &ExactStat {
        match self {
            PartitionObjective::MinimizeExpectedVariance | PartitionObjective::MaximizeExpectedVariance => {
                &m.expected_variance
            }
            PartitionObjective::MinimizeMeanVariance => &m.mean_variance,
        }
    }

    fn better(self, a: &ExactStat, b: &ExactStat) -> bool {
        match self {
            PartitionObjective::MaximizeExpectedVariance => a > b,
            _ => a < b,
        }
    }
}

/// `n! / (m!^k · k!)`.
pub fn count_unlabeled_partitions(k: usize, m: usize) -> u128 {
    let mut left = (k * m) as u128;
    let mut total: u128 = 1;
    // Each block takes the smallest remaining index plus m−1 others.
    for _ in 0..k {
        let c = crate::gametheory::binomial(left - 1, m as u128 - 1);
        total = total.saturating_mul(c);
        left -= m as u128;
    }
    total
}

/// Visits every partition of `1..=k·m` into `k` unlabeled blocks of size `m`
/// in canonical form: each block ascending, blocks ordered by their
/// smallest element.
pub fn for_each_unlabeled_partition(k: usize, m: usize, mut f: impl FnMut(&[Vec<usize>])) {
    fn rec(free: &mut Vec<bool>, m: usize, acc: &mut Vec<Vec<usize>>, f: &mut dyn FnMut(&[Vec<usize>])) {
        let Some(first) = (1..free.len()).find(|&p| free[p]) else {
            f(acc);
            return;
        };
        free[first] = false;
        let rest: Vec<usize> = (first + 1..free.len()).filter(|&p| free[p]).collect();
        for_each_combination(&rest, m - 1, &mut |tail| {
            for &p in tail {
                free[p] = false;
            }
            let mut block = Vec::with_capacity(m);
            block.push(first);
            block.extend_from_slice(tail);
            acc.push(block);
            rec(free, m, acc, f);
            acc.pop();
            for &p in tail {
                free[p] = true;
            }
        });
        free[first] = true;
    }
    let mut free = vec![true; k * m + 1];
    free[0] = false;
    rec(&mut free, m, &mut Vec::new(), &mut f);
}

/// Consecutive blocks of the indices sorted by value (ties by index).
pub fn ordered_partition_by_value(values: &[BigRational], k: usize, m: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || m == 0 || k * m != values.len() {
        return Err(Error::params(format!(
            "{} values cannot be split into {k} blocks of {m}",
            values.len()
        )));
    }
    let mut idx: Vec<usize> = (1..=values.len()).collect();
    idx.sort_by(|&a, &b| values[a - 1].cmp(&values[b - 1]).then(a.cmp(&b)));
    Ok(idx
        .chunks(m)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestPartitionReport {
    pub objective: PartitionObjective,
    pub optimum: ExactStat,
    /// All optimal partitions in canonical form, in enumeration order.
    pub optimal_partitions: Vec<Vec<Vec<usize>>>,
    pub ordered_partition: Vec<Vec<usize>>,
    pub ordered_partition_value: ExactStat,
    pub ordered_partition_is_optimal: bool,
    pub partitions_checked: u128,
}

pub fn best_partition_bruteforce(
    values: &[BigRational],
    k: usize,
    m: usize,
    objective: PartitionObjective,
) -> Result<BestPartitionReport> {
    best_partition_with_limit(values, k, m, objective, MAX_PARTITIONS)
}

pub fn best_partition_with_limit(
    values: &[BigRational],
    k: usize,
    m: usize,
    objective: PartitionObjective,
    limit: u128,
) -> Result<BestPartitionReport> {
    let ordered = ordered_partition_by_value(values, k, m)?;
    let count = count_unlabeled_partitions(k, m);
    if count > limit {
        return Err(Error::TooLarge {
            what: "unlabeled partitions",
            count,
            limit,
        });
    }
    let mut best: Option<ExactStat> = None;
    let mut optimal: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut err = None;
    for_each_unlabeled_partition(k, m, |p| {
        // Route (a) is not needed to rank partitions.
        let mom = match partition_moments_with_limit(values, p, 0) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return;
            }
        };
        let v = objective.value(&mom);
        match &best {
            Some(b) if objective.better(v, b) => {
                best = Some(v.clone());
                optimal = vec![p.to_vec()];
            }
            Some(b) if v == b => optimal.push(p.to_vec()),
            Some(_) => {}
            None => {
                best = Some(v.clone());
                optimal = vec![p.to_vec()];
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let ordered_mom = partition_moments_with_limit(values, &ordered, 0)?;
    let ordered_value = objective.value(&ordered_mom).clone();
    let optimum = best.expect("at least one partition");
    Ok(BestPartitionReport {
        objective,
        ordered_partition_is_optimal: ordered_value == optimum,
        optimum,
        optimal_partitions: optimal,
        ordered_partition: ordered,
        ordered_partition_value: ordered_value,
        partitions_checked: count,
    })
}

/// Integer values as rationals, for tests.
#[cfg(test)]
pub(crate) fn ints(xs: &[i64]) -> Vec<BigRational> {
    xs.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect()
}
