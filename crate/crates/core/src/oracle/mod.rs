//! Brute-force ground truth: exhaustive sample enumeration for the
//! optimality of the quantile sample, exact partition moments, and
//! theorem-level verification reports built on top of them.

mod moments;
mod verify;

pub use moments::{
    best_partition_bruteforce, best_partition_with_limit, count_unlabeled_partitions,
    for_each_unlabeled_partition, ordered_partition_by_value, parse_decimal, partition_moments,
    BestPartitionReport, EnumeratedMoments, PartitionMoments, PartitionObjective,
    MAX_PARTITIONS, MAX_ROUTE_A_SAMPLES,
};
pub use verify::{
    random_rationals, verify_theorem1, verify_theorem2, verify_theorem3, verify_theorem4,
    PrintedVariant, Theorem1Report, Theorem2Case, Theorem2Report, Theorem3Violation,
    Theorem3Report, Theorem4Report,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gametheory::{binomial, for_each_combination};
use crate::mechanisms::quantile_positions;
use crate::par;
use crate::population::{samples_equivalent, Population, Sample};
use crate::stats::{quantile_m, raw_numerator_u128, ExactStat, StatKind};

/// Default guard on the number of `k`-subsets enumerated.
pub const MAX_SUBSETS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub stat: StatKind,
    pub n: usize,
    pub k: usize,
    pub minimum: ExactStat,
    /// Every minimizing sample, in lexicographic order.
    pub minimizers: Vec<Sample>,
    /// Smallest value attained by a sample outside the minimizer set.
    pub runner_up: Option<ExactStat>,
    pub samples_checked: u128,
    /// Present when `n = (2m+1)k`.
    pub quantile_sample: Option<Sample>,
    /// Whether the minimizer set is exactly the quantile sample's
    /// equivalence class; `None` when the quantile sample is undefined.
    pub quantile_sample_is_unique_minimizer_up_to_equivalence: Option<bool>,
}

pub fn optimal_samples_bruteforce(pop: &Population, k: usize, kind: StatKind) -> Result<OptimalityReport> {
    optimal_samples_with_limit(pop, k, kind, MAX_SUBSETS)
}

pub fn optimal_samples_with_limit(
    pop: &Population,
    k: usize,
    kind: StatKind,
    limit: u128,
) -> Result<OptimalityReport> {
    let n = pop.n();
    if k == 0 || k > n {
        return Err(Error::params(format!("k = {k} must lie in 1..={n}")));
    }
    let total = binomial(n as u128, k as u128);
    if total > limit {
        return Err(Error::TooLarge {
            what: "k-subsets",
            count: total,
            limit,
        });
    }

    // Split by first element; each worker keeps (best, its samples, second best).
    struct Part {
        best: u128,
        argmin: Vec<Vec<usize>>,
        second: Option<u128>,
    }
    let firsts: Vec<usize> = (1..=n - k + 1).collect();
    let parts = par::map_collect(firsts, |f| {
        let mut part = Part {
            best: u128::MAX,
            argmin: Vec::new(),
            second: None,
        };
        let rest: Vec<usize> = (f + 1..=n).collect();
        let mut buf = Vec::with_capacity(k);
        for_each_combination(&rest, k - 1, &mut |tail| {
            buf.clear();
            buf.push(f);
            buf.extend_from_slice(tail);
            let v = raw_numerator_u128(kind, pop, &buf).expect("guarded sizes fit in 128 bits");
            record(&mut part.best, &mut part.argmin, &mut part.second, v, &buf);
        });
        part
    });

    let mut best = u128::MAX;
    let mut argmin: Vec<Vec<usize>> = Vec::new();
    let mut second: Option<u128> = None;
    for p in parts {
        if p.argmin.is_empty() {
            continue;
        }
        if let Some(s) = p.second {
            second = Some(second.map_or(s, |t| t.min(s)));
        }
        if p.best < best {
            if best != u128::MAX {
                second = Some(second.map_or(best, |t| t.min(best)));
            }
            best = p.best;
            argmin = p.argmin;
        } else if p.best == best {
            argmin.extend(p.argmin);
        } else {
            second = Some(second.map_or(p.best, |t| t.min(p.best)));
        }
    }

    let denom = kind.denominator(n, k);
    let minimizers: Vec<Sample> = argmin.into_iter().map(Sample::from_sorted_unchecked).collect();
    let quantile_sample = quantile_m(n, k).map(|m| Sample::from_sorted_unchecked(quantile_positions(k, m)));
    let flag = match &quantile_sample {
        None => None,
        Some(q) => {
            let q_is_min = minimizers.iter().any(|s| s == q);
            let all_equiv = minimizers
                .iter()
                .all(|s| samples_equivalent(pop, s, q).unwrap_or(false));
            Some(q_is_min && all_equiv)
        }
    };
    Ok(OptimalityReport {
        stat: kind,
        n,
        k,
        minimum: ExactStat::new(best, denom.clone()),
        minimizers,
        runner_up: second.map(|s| ExactStat::new(s, denom)),
        samples_checked: total,
        quantile_sample,
        quantile_sample_is_unique_minimizer_up_to_equivalence: flag,
    })
}

fn record(best: &mut u128, argmin: &mut Vec<Vec<usize>>, second: &mut Option<u128>, v: u128, s: &[usize]) {
    if v < *best {
        if *best != u128::MAX {
            *second = Some(second.map_or(*best, |t| t.min(*best)));
        }
        *best = v;
        argmin.clear();
        argmin.push(s.to_vec());
    } else if v == *best {
        argmin.push(s.to_vec());
    } else {
        *second = Some(second.map_or(v, |t| t.min(v)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_three_strict() {
        let pop = Population::strict(9).unwrap();
        let expected = [(StatKind::Ks, "1/9"), (StatKind::L1, "2/27"), (StatKind::Cvm, "2/243")];
        for (kind, min) in expected {
            let r = optimal_samples_bruteforce(&pop, 3, kind).unwrap();
            assert_eq!(r.samples_checked, 84);
            assert_eq!(r.minimum.to_string(), min);
            assert_eq!(r.minimizers.len(), 1);
            assert_eq!(r.minimizers[0].positions(), &[2, 5, 8]);
            assert_eq!(r.quantile_sample_is_unique_minimizer_up_to_equivalence, Some(true));
            assert!(r.runner_up.unwrap() > r.minimum);
        }
    }

    #[test]
    fn full_sample_is_exact() {
        let pop = Population::strict(5).unwrap();
        let r = optimal_samples_bruteforce(&pop, 5, StatKind::Cvm).unwrap();
        assert!(r.minimum.is_zero());
        assert_eq!(r.minimizers.len(), 1);
        assert_eq!(r.runner_up, None);
    }

    #[test]
    fn flat_population_everything_minimizes() {
        let pop = Population::from_levels(&[1; 9]).unwrap();
        let r = optimal_samples_bruteforce(&pop, 3, StatKind::Ks).unwrap();
        assert_eq!(r.minimizers.len(), 84);
        assert!(r.minimum.is_zero());
        assert_eq!(r.quantile_sample_is_unique_minimizer_up_to_equivalence, Some(true));
    }

    #[test]
    fn non_quantile_shapes_have_no_flag() {
        let pop = Population::strict(8).unwrap();
        let r = optimal_samples_bruteforce(&pop, 3, StatKind::L1).unwrap();
        assert_eq!(r.quantile_sample_is_unique_minimizer_up_to_equivalence, None);
    }

    #[test]
    fn guard_is_enforced() {
        let pop = Population::strict(40).unwrap();
        assert!(matches!(
            optimal_samples_bruteforce(&pop, 20, StatKind::Ks),
            Err(Error::TooLarge { .. })
        ));
        let pop = Population::strict(9).unwrap();
        assert!(matches!(
            optimal_samples_with_limit(&pop, 3, StatKind::Ks, 83),
            Err(Error::TooLarge { count: 84, .. })
        ));
    }
}
