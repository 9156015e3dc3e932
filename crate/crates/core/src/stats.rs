//! Exact KS, L1 and CvM distances between a population CDF and a sample CDF.
//!
//! All three are evaluated at the `n` support points only. With
//! `d_i = k·#{x_j ≾ x_i} − n·#{y_j ≾ x_i}` the statistics are
//!
//! * KS  = max |d_i| / (n k)
//! * L1  = Σ |d_i| / (n² k)
//! * CvM = Σ d_i² / (n³ k²)
//!
//! so for fixed `(n, k)` each one is an integer numerator over a fixed
//! denominator and comparisons between samples never need division.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::population::{Population, Sample};

/// Exact rational, kept in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactStat(BigRational);

impl ExactStat {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        ExactStat(BigRational::new(numer.into(), denom.into()))
    }

    pub fn zero() -> Self {
        ExactStat(BigRational::zero())
    }

    pub fn from_rational(r: BigRational) -> Self {
        ExactStat(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering rounded half-up to `sig` significant digits,
    /// trailing zeros trimmed.
    pub fn to_decimal(&self, sig: usize) -> String {
        decimal_string(&self.0, sig)
    }
}

impl fmt::Display for ExactStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for ExactStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n
            .parse()
            .map_err(|_| Error::params(format!("bad rational `{s}`")))?;
        let d: BigInt = d
            .parse()
            .map_err(|_| Error::params(format!("bad rational `{s}`")))?;
        if d.is_zero() {
            return Err(Error::params(format!("zero denominator in `{s}`")));
        }
        Ok(ExactStat::new(n, d))
    }
}

#[derive(Serialize, Deserialize)]
struct ExactStatRepr {
    exact: String,
    #[serde(default, skip_deserializing)]
    decimal: String,
}

impl Serialize for ExactStat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExactStatRepr {
            exact: self.to_string(),
            decimal: self.to_decimal(12),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactStat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ExactStatRepr::deserialize(d)?;
        repr.exact.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn decimal_string(r: &BigRational, sig: usize) -> String {
    assert!(sig > 0);
    if r.is_zero() {
        return "0".into();
    }
    let neg = r.is_negative();
    let r = r.abs();
    let ten = BigInt::from(10);
    let (p, q) = (r.numer().clone(), r.denom().clone());

    // e = floor(log10(r))
    let mut e: i64 = p.to_string().len() as i64 - q.to_string().len() as i64;
    let pow = |x: i64| num_traits::pow(ten.clone(), x as usize);
    let ge_pow10 = |e: i64| {
        if e >= 0 {
            p >= &q * pow(e)
        } else {
            &p * pow(-e) >= q
        }
    };
    while !ge_pow10(e) {
        e -= 1;
    }
    while ge_pow10(e + 1) {
        e += 1;
    }

    // digits = round_half_up(r * 10^(sig-1-e))
    let shift = sig as i64 - 1 - e;
    let (num, den) = if shift >= 0 {
        (&p * pow(shift), q.clone())
    } else {
        (p.clone(), &q * pow(-shift))
    };
    let (mut digits, rem) = num.div_rem(&den);
    if rem * 2 >= den {
        digits += 1;
    }
    if digits.to_string().len() > sig {
        digits /= &ten;
        e += 1;
    }
    let shift = sig as i64 - 1 - e;
    let s = digits.to_string();

    let mut out = if shift <= 0 {
        let mut s = s;
        s.extend(std::iter::repeat_n('0', (-shift) as usize));
        s
    } else if (shift as usize) < s.len() {
        let (int, frac) = s.split_at(s.len() - shift as usize);
        format!("{int}.{frac}")
    } else {
        let zeros = shift as usize - s.len();
        format!("0.{}{}", "0".repeat(zeros), s)
    };
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    if neg {
        out.insert(0, '-');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Ks,
    L1,
    Cvm,
}

impl StatKind {
    pub const ALL: [StatKind; 3] = [StatKind::Ks, StatKind::L1, StatKind::Cvm];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Ks => "ks",
            StatKind::L1 => "l1",
            StatKind::Cvm => "cvm",
        }
    }

    /// Fixed denominator for samples of size `k` from a population of `n`.
    pub fn denominator(self, n: usize, k: usize) -> BigInt {
        let (n, k) = (BigInt::from(n), BigInt::from(k));
        match self {
            StatKind::Ks => n * k,
            StatKind::L1 => &n * &n * k,
            StatKind::Cvm => &n * &n * &n * &k * &k,
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(StatKind::Ks),
            "l1" => Ok(StatKind::L1),
            "cvm" => Ok(StatKind::Cvm),
            _ => Err(Error::params(format!("unknown statistic `{s}`"))),
        }
    }
}

/// Integer numerator of `kind` over [`StatKind::denominator`]. Falls back to
/// arbitrary precision when 128-bit accumulation would overflow.
pub fn raw_numerator(kind: StatKind, pop: &Population, positions: &[usize]) -> BigInt {
    match raw_numerator_u128(kind, pop, positions) {
        Some(v) => BigInt::from(v),
        None => raw_numerator_big(kind, pop, positions),
    }
}

/// Signed gaps `d_i`, one per support point.
fn gaps<'a>(pop: &'a Population, positions: &'a [usize]) -> impl Iterator<Item = i128> + 'a {
    let (n, k) = (pop.n() as i128, positions.len() as i128);
    let mut j = 0usize;
    (1..=pop.n()).map(move |i| {
        let upto = pop.count_at_or_below(i);
        while j < positions.len() && positions[j] <= upto {
            j += 1;
        }
        upto as i128 * k - j as i128 * n
    })
}

pub(crate) fn raw_numerator_u128(
    kind: StatKind,
    pop: &Population,
    positions: &[usize],
) -> Option<u128> {
    let mut acc: u128 = 0;
    for d in gaps(pop, positions) {
        let a = d.unsigned_abs();
        acc = match kind {
            StatKind::Ks => acc.max(a),
            StatKind::L1 => acc.checked_add(a)?,
            StatKind::Cvm => acc.checked_add(a.checked_mul(a)?)?,
        };
    }
    Some(acc)
}

fn raw_numerator_big(kind: StatKind, pop: &Population, positions: &[usize]) -> BigInt {
    let mut acc = BigInt::zero();
    for d in gaps(pop, positions) {
        let a = BigInt::from(d.unsigned_abs());
        match kind {
            StatKind::Ks => {
                if a > acc {
                    acc = a
                }
            }
            StatKind::L1 => acc += a,
            StatKind::Cvm => acc += &a * &a,
        }
    }
    acc
}

pub fn statistic(kind: StatKind, pop: &Population, sample: &Sample) -> Result<ExactStat> {
    if sample.positions().last().copied().unwrap_or(0) > pop.n() {
        return Err(Error::InvalidSample(format!(
            "position out of range for n = {}",
            pop.n()
        )));
    }
    let num = raw_numerator(kind, pop, sample.positions());
    Ok(ExactStat::new(num, kind.denominator(pop.n(), sample.k())))
}

pub fn ks_stat(pop: &Population, sample: &Sample) -> Result<ExactStat> {
    statistic(StatKind::Ks, pop, sample)
}

pub fn l1_stat(pop: &Population, sample: &Sample) -> Result<ExactStat> {
    statistic(StatKind::L1, pop, sample)
}

pub fn cvm_stat(pop: &Population, sample: &Sample) -> Result<ExactStat> {
    statistic(StatKind::Cvm, pop, sample)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatTriple {
    pub ks: ExactStat,
    pub l1: ExactStat,
    pub cvm: ExactStat,
}

impl StatTriple {
    pub fn get(&self, kind: StatKind) -> &ExactStat {
        match kind {
            StatKind::Ks => &self.ks,
            StatKind::L1 => &self.l1,
            StatKind::Cvm => &self.cvm,
        }
    }
}

pub fn all_stats(pop: &Population, sample: &Sample) -> Result<StatTriple> {
    Ok(StatTriple {
        ks: ks_stat(pop, sample)?,
        l1: l1_stat(pop, sample)?,
        cvm: cvm_stat(pop, sample)?,
    })
}

/// KS, L1 and CvM of the quantile sample under a strict ranking with
/// `n = (2m+1)k`: `m/n`, `m(m+1)/(n(2m+1))` and `m(m+1)/(3n²)`.
///
/// The CvM value comes from summing the definition directly. Two printed
/// variants circulate, `(1/(2k))(1−1/n)` for KS and `2m(m+1)/n²` for CvM;
/// both disagree with brute force and are exposed only through
/// [`printed_ks_variant`] and [`printed_cvm_variant`] for reporting.
pub fn quantile_closed_forms(n: usize, k: usize, m: usize) -> Result<StatTriple> {
    check_quantile_shape(n, k, m)?;
    let (n, m) = (n as u128, m as u128);
    Ok(StatTriple {
        ks: ExactStat::new(m, n),
        l1: ExactStat::new(m * (m + 1), n * (2 * m + 1)),
        cvm: ExactStat::new(m * (m + 1), 3 * n * n),
    })
}

/// `(1/(2k))(1 − 1/n)`.
pub fn printed_ks_variant(n: usize, k: usize) -> ExactStat {
    ExactStat::new(BigInt::from(n - 1), BigInt::from(2 * k * n))
}

/// `2m(m+1)/n²`.
pub fn printed_cvm_variant(n: usize, m: usize) -> ExactStat {
    let (n, m) = (n as u128, m as u128);
    ExactStat::new(2 * m * (m + 1), n * n)
}

pub(crate) fn check_quantile_shape(n: usize, k: usize, m: usize) -> Result<()> {
    if k == 0 || (2 * m + 1).checked_mul(k) != Some(n) {
        return Err(Error::NotQuantileShaped { n, k, m });
    }
    Ok(())
}

/// `m` with `n = (2m+1)k`, if one exists.
pub fn quantile_m(n: usize, k: usize) -> Option<usize> {
    if k == 0 || !n.is_multiple_of(k) {
        return None;
    }
    let q = n / k;
    (q % 2 == 1).then(|| (q - 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict_sample(n: usize, p: &[usize]) -> (Population, Sample) {
        (
            Population::strict(n).unwrap(),
            Sample::new(p.to_vec(), n).unwrap(),
        )
    }

    /// Independent float evaluation straight from the definitions.
    fn naive(pop: &Population, s: &Sample) -> (f64, f64, f64) {
        let n = pop.n() as f64;
        let k = s.k() as f64;
        let mut ks: f64 = 0.0;
        let mut l1 = 0.0;
        let mut cvm = 0.0;
        for i in 1..=pop.n() {
            let fx = (1..=pop.n())
                .filter(|&j| pop.level_at(j) <= pop.level_at(i))
                .count() as f64
                / n;
            let fy = s
                .positions()
                .iter()
                .filter(|&&j| pop.level_at(j) <= pop.level_at(i))
                .count() as f64
                / k;
            let d = (fx - fy).abs();
            ks = ks.max(d);
            l1 += d / n;
            cvm += d * d / n;
        }
        (ks, l1, cvm)
    }

    #[test]
    fn ks_examples() {
        let (pop, s) = strict_sample(9, &[2, 5, 8]);
        assert_eq!(ks_stat(&pop, &s).unwrap(), ExactStat::new(1, 9));
        let (pop, s) = strict_sample(9, &[1, 5, 8]);
        assert_eq!(ks_stat(&pop, &s).unwrap(), ExactStat::new(2, 9));
        let (pop, s) = strict_sample(4, &[1, 2, 3, 4]);
        assert!(ks_stat(&pop, &s).unwrap().is_zero());
    }

    #[test]
    fn l1_examples() {
        let (pop, s) = strict_sample(9, &[2, 5, 8]);
        assert_eq!(l1_stat(&pop, &s).unwrap(), ExactStat::new(2, 27));
        let (pop, s) = strict_sample(3, &[1]);
        assert_eq!(l1_stat(&pop, &s).unwrap(), ExactStat::new(1, 3));
        let (pop, s) = strict_sample(5, &[1, 2, 3, 4, 5]);
        assert!(l1_stat(&pop, &s).unwrap().is_zero());
    }

    #[test]
    fn cvm_examples() {
        let (pop, s) = strict_sample(9, &[2, 5, 8]);
        assert_eq!(cvm_stat(&pop, &s).unwrap(), ExactStat::new(2, 243));
        let (pop, s) = strict_sample(5, &[3]);
        assert_eq!(cvm_stat(&pop, &s).unwrap(), ExactStat::new(2, 25));
        let (pop, s) = strict_sample(2, &[1, 2]);
        assert!(cvm_stat(&pop, &s).unwrap().is_zero());
    }

    #[test]
    fn exact_matches_naive_float() {
        let pop = Population::from_levels(&[1, 2, 2, 3, 3, 3, 4]).unwrap();
        for s in [vec![1, 4], vec![2, 3, 7], vec![5]] {
            let s = Sample::new(s, 7).unwrap();
            let (ks, l1, cvm) = naive(&pop, &s);
            let t = all_stats(&pop, &s).unwrap();
            assert!((t.ks.to_f64() - ks).abs() < 1e-12);
            assert!((t.l1.to_f64() - l1).abs() < 1e-12);
            assert!((t.cvm.to_f64() - cvm).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_examples() {
        let t = quantile_closed_forms(972, 12, 40).unwrap();
        assert_eq!(t.ks, ExactStat::new(10, 243));
        let t = quantile_closed_forms(9, 3, 1).unwrap();
        assert_eq!(
            (t.ks, t.l1, t.cvm),
            (
                ExactStat::new(1, 9),
                ExactStat::new(2, 27),
                ExactStat::new(2, 243)
            )
        );
        let t = quantile_closed_forms(4, 4, 0).unwrap();
        assert!(t.ks.is_zero() && t.l1.is_zero() && t.cvm.is_zero());
        assert!(matches!(
            quantile_closed_forms(10, 3, 1),
            Err(Error::NotQuantileShaped { .. })
        ));
    }

    #[test]
    fn printed_variants_differ_from_ground_truth() {
        let t = quantile_closed_forms(9, 3, 1).unwrap();
        assert_ne!(printed_cvm_variant(9, 1), t.cvm);
        assert_ne!(printed_ks_variant(9, 3), t.ks);
    }

    #[test]
    fn quantile_m_detection() {
        assert_eq!(quantile_m(972, 12), Some(40));
        assert_eq!(quantile_m(6, 2), Some(1));
        assert_eq!(quantile_m(8, 2), None);
        assert_eq!(quantile_m(7, 2), None);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(ExactStat::new(10, 243).to_decimal(12), "0.0411522633745");
        assert_eq!(ExactStat::new(1, 2).to_decimal(12), "0.5");
        assert_eq!(ExactStat::new(2, 3).to_decimal(3), "0.667");
        assert_eq!(ExactStat::new(9, 8).to_decimal(12), "1.125");
        assert_eq!(ExactStat::new(999_999, 1000).to_decimal(3), "1000");
        assert_eq!(ExactStat::new(123_456, 1).to_decimal(2), "120000");
        assert_eq!(ExactStat::zero().to_decimal(12), "0");
    }

    #[test]
    fn serde_carries_exact_and_decimal() {
        let s = ExactStat::new(10, 243);
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["exact"], "10/243");
        assert_eq!(j["decimal"], "0.0411522633745");
        let back: ExactStat = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn big_fallback_agrees() {
        let pop = Population::strict(50).unwrap();
        let pos: Vec<usize> = (1..=50).step_by(7).collect();
        for kind in StatKind::ALL {
            assert_eq!(
                BigInt::from(raw_numerator_u128(kind, &pop, &pos).unwrap()),
                raw_numerator_big(kind, &pop, &pos)
            );
        }
    }
}
