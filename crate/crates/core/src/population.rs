//! Ranked populations, samples, exact empirical CDFs and the two order
//! relations every mechanism is judged by: first-order dominance between
//! sample CDFs, and componentwise equivalence of samples.

use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub label: String,
    pub value: Option<f64>,
}

/// How raw input is turned into a weak order.
#[derive(Debug, Clone, Copy)]
pub enum PopulationInput<'a> {
    /// Ordinal rank of each value; bitwise-equal values share a level.
    Values(&'a [f64]),
    /// Explicit levels, which must cover 1..L without gaps.
    Levels(&'a [u32]),
}

/// `n` items under a weak-order ranking.
///
/// `rank_level` is indexed by input row. `sorted_order` lists input rows in
/// ascending rank, ties kept in input order, so position `p` (1-based) refers
/// to row `sorted_order[p - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    items: Vec<Item>,
    rank_level: Vec<u32>,
    sorted_order: Vec<usize>,
    pos_level: Vec<u32>,
    // For each 0-based position: 1-based first and last position of its class.
    class_start: Vec<usize>,
    class_end: Vec<usize>,
    levels: u32,
}

impl Population {
    pub fn build(input: PopulationInput<'_>) -> Result<Self> {
        match input {
            PopulationInput::Values(v) => Self::from_values(v),
            PopulationInput::Levels(l) => Self::from_levels(l),
        }
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let items = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Item {
                label: (i + 1).to_string(),
                value: Some(v),
            })
            .collect();
        Self::from_items_by_value(items)
    }

    pub fn from_levels(levels: &[u32]) -> Result<Self> {
        let items = (0..levels.len())
            .map(|i| Item {
                label: (i + 1).to_string(),
                value: None,
            })
            .collect();
        Self::from_items_with_levels(items, levels.to_vec())
    }

    /// Strict ranking over `n` items, positions 1..n.
    pub fn strict(n: usize) -> Result<Self> {
        let levels: Vec<u32> = (1..=n as u32).collect();
        Self::from_levels(&levels)
    }

    /// Ranks items by value; every item must carry a value.
    pub fn from_items_by_value(items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let mut values = Vec::with_capacity(items.len());
        for (i, it) in items.iter().enumerate() {
            let v = it
                .value
                .ok_or_else(|| Error::PopulationFile(format!("row {} has no value", i + 1)))?;
            if v.is_nan() {
                return Err(Error::NanValue(i + 1));
            }
            values.push(v);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut levels = vec![0u32; values.len()];
        let mut level = 0u32;
        for (j, &row) in order.iter().enumerate() {
            if j == 0 || values[order[j - 1]].total_cmp(&values[row]) != Ordering::Equal {
                level += 1;
            }
            levels[row] = level;
        }
        Self::from_items_with_levels(items, levels)
    }

    pub fn from_items_with_levels(items: Vec<Item>, rank_level: Vec<u32>) -> Result<Self> {
        let n = rank_level.len();
        if n == 0 {
            return Err(Error::EmptyPopulation);
        }
        if items.len() != n {
            return Err(Error::params(format!(
                "{} items but {} levels",
                items.len(),
                n
            )));
        }
        let levels = check_contiguous(&rank_level)?;

        let mut sorted_order: Vec<usize> = (0..n).collect();
        sorted_order.sort_by_key(|&row| rank_level[row]);
        let pos_level: Vec<u32> = sorted_order.iter().map(|&r| rank_level[r]).collect();

        let mut class_start = vec![0usize; n];
        let mut class_end = vec![0usize; n];
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end + 1 < n && pos_level[end + 1] == pos_level[start] {
                end += 1;
            }
            for p in start..=end {
                class_start[p] = start + 1;
                class_end[p] = end + 1;
            }
            start = end + 1;
        }

        Ok(Population {
            items,
            rank_level,
            sorted_order,
            pos_level,
            class_start,
            class_end,
            levels,
        })
    }

    /// Reads the `id,value` / `id,level` CSV format. Row order sets tie order.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let by_value = match cols.as_slice() {
            ["id", "value"] => true,
            ["id", "level"] => false,
            _ => {
                return Err(Error::PopulationFile(format!(
                    "expected header `id,value` or `id,level`, found `{}`",
                    cols.join(",")
                )))
            }
        };
        let mut items = Vec::new();
        let mut levels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let label = rec.get(0).unwrap_or_default().to_string();
            let raw = rec.get(1).unwrap_or_default();
            if by_value {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::PopulationFile(format!("row {}: bad value `{raw}`", i + 1))
                })?;
                items.push(Item {
                    label,
                    value: Some(v),
                });
            } else {
                let l: u32 = raw.parse().map_err(|_| {
                    Error::PopulationFile(format!("row {}: bad level `{raw}`", i + 1))
                })?;
                items.push(Item { label, value: None });
                levels.push(l);
            }
        }
        if by_value {
            Self::from_items_by_value(items)
        } else {
            Self::from_items_with_levels(items, levels)
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(f)
    }

    pub fn n(&self) -> usize {
        self.rank_level.len()
    }

    /// Number of equivalence classes `L`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn is_strict(&self) -> bool {
        self.levels as usize == self.n()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Level of each input row.
    pub fn rank_levels(&self) -> &[u32] {
        &self.rank_level
    }

    /// Input rows (1-based) in ascending rank order.
    pub fn sorted_order(&self) -> Vec<usize> {
        self.sorted_order.iter().map(|r| r + 1).collect()
    }

    /// Rank level of each position, ascending.
    pub fn position_levels(&self) -> &[u32] {
        &self.pos_level
    }

    pub fn level_at(&self, pos: usize) -> u32 {
        self.pos_level[pos - 1]
    }

    /// Inclusive 1-based position range of the class containing `pos`.
    pub fn class_range(&self, pos: usize) -> (usize, usize) {
        (self.class_start[pos - 1], self.class_end[pos - 1])
    }

    /// `#{ j : x_j ≾ x_pos }`.
    pub fn count_at_or_below(&self, pos: usize) -> usize {
        self.class_end[pos - 1]
    }

    pub fn item_at(&self, pos: usize) -> &Item {
        &self.items[self.sorted_order[pos - 1]]
    }

    pub fn value_at(&self, pos: usize) -> Option<f64> {
        self.item_at(pos).value
    }

    pub fn all_positions(&self) -> Vec<usize> {
        (1..=self.n()).collect()
    }
}

fn check_contiguous(levels: &[u32]) -> Result<u32> {
    let max = *levels.iter().max().ok_or(Error::EmptyPopulation)?;
    if levels.contains(&0) {
        return Err(Error::params("rank levels start at 1"));
    }
    let mut seen = vec![false; max as usize + 1];
    for &l in levels {
        seen[l as usize] = true;
    }
    if let Some(missing) = (1..=max).find(|&l| !seen[l as usize]) {
        return Err(Error::NonContiguousLevels(missing));
    }
    Ok(max)
}

/// Strictly increasing 1-based positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sample {
    positions: Vec<usize>,
}

impl Sample {
    pub fn new(positions: Vec<usize>, n: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        if positions.len() > n {
            return Err(Error::InvalidSample(format!(
                "k = {} exceeds n = {n}",
                positions.len()
            )));
        }
        for w in positions.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSample(format!(
                    "positions not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if positions[0] == 0 || *positions.last().unwrap() > n {
            return Err(Error::InvalidSample(format!(
                "positions must lie in 1..={n}"
            )));
        }
        Ok(Sample { positions })
    }

    /// Sorts first; duplicates are still an error.
    pub fn from_unsorted(mut positions: Vec<usize>, n: usize) -> Result<Self> {
        positions.sort_unstable();
        Self::new(positions, n)
    }

    pub(crate) fn from_sorted_unchecked(positions: Vec<usize>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        Sample { positions }
    }

    pub fn k(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<usize> {
        self.positions
    }

    fn check_against(&self, pop: &Population) -> Result<()> {
        match self.positions.last() {
            Some(&p) if p <= pop.n() => Ok(()),
            Some(&p) => Err(Error::InvalidSample(format!(
                "position {p} out of range for n = {}",
                pop.n()
            ))),
            None => Err(Error::InvalidSample("empty sample".into())),
        }
    }
}

/// Step-function CDF on the population's `n` support points, as integer
/// counts over `denominator`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cdf {
    pub counts: Vec<u64>,
    pub denominator: u64,
}

impl Cdf {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn fraction(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.denominator as f64
    }
}

pub fn population_cdf(pop: &Population) -> Cdf {
    Cdf {
        counts: pop.class_end.iter().map(|&c| c as u64).collect(),
        denominator: pop.n() as u64,
    }
}

pub fn sample_cdf(pop: &Population, sample: &Sample) -> Result<Cdf> {
    sample.check_against(pop)?;
    Ok(sample_cdf_unchecked(pop, sample.positions()))
}

/// `positions` must be ascending and in range.
pub(crate) fn sample_cdf_unchecked(pop: &Population, positions: &[usize]) -> Cdf {
    let n = pop.n();
    let mut counts = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let upto = pop.class_end[i];
        while j < positions.len() && positions[j] <= upto {
            j += 1;
        }
        counts.push(j as u64);
    }
    Cdf {
        counts,
        denominator: positions.len() as u64,
    }
}

/// True iff `a` is shifted weakly right of `b`: `F_a ≤ F_b` at every point.
pub fn dominates(a: &Cdf, b: &Cdf) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::SupportMismatch(a.len(), b.len()));
    }
    let (da, db) = (a.denominator as u128, b.denominator as u128);
    Ok(a
        .counts
        .iter()
        .zip(&b.counts)
        .all(|(&ca, &cb)| ca as u128 * db <= cb as u128 * da))
}

/// The r-th smallest items of `y` and `y_prime` share a level for every r.
pub fn samples_equivalent(pop: &Population, y: &Sample, y_prime: &Sample) -> Result<bool> {
    if y.k() != y_prime.k() {
        return Err(Error::SizeMismatch(y.k(), y_prime.k()));
    }
    y.check_against(pop)?;
    y_prime.check_against(pop)?;
    Ok(y
        .positions()
        .iter()
        .zip(y_prime.positions())
        .all(|(&a, &b)| pop.level_at(a) == pop.level_at(b)))
}

/// A player's own weak order over population positions; higher level means
/// more preferred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pref_level: Vec<u32>,
}

impl Preference {
    /// `levels[p - 1]` is the level of position `p`.
    pub fn from_levels(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        check_contiguous(&levels)?;
        Ok(Preference { pref_level: levels })
    }

    /// Prefers higher-ranked items (Player I in the antagonistic setting).
    pub fn ranking(pop: &Population) -> Self {
        Preference {
            pref_level: pop.pos_level.clone(),
        }
    }

    /// Order-reversed copy; `(ranking, ranking.reversed())` is the
    /// antagonistic pair.
    pub fn reversed(&self) -> Self {
        let top = self.top_level() + 1;
        Preference {
            pref_level: self.pref_level.iter().map(|&l| top - l).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.pref_level.len()
    }

    pub fn level(&self, pos: usize) -> u32 {
        self.pref_level[pos - 1]
    }

    pub fn levels(&self) -> &[u32] {
        &self.pref_level
    }

    pub fn top_level(&self) -> u32 {
        self.pref_level.iter().copied().max().unwrap_or(0)
    }

    /// Positions from least to most preferred, ties by position.
    pub fn ascending_positions(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (1..=self.n()).collect();
        order.sort_by_key(|&p| self.pref_level[p - 1]);
        order
    }

    /// The population this preference induces on positions `1..n`.
    pub fn as_population(&self) -> Result<Population> {
        Population::from_levels(&self.pref_level)
    }

    /// Sample CDF with support points taken in this preference's ascending
    /// order.
    pub fn sample_cdf(&self, sample: &Sample) -> Result<Cdf> {
        if sample.positions().last().copied().unwrap_or(0) > self.n() {
            return Err(Error::InvalidSample(format!(
                "position out of range for n = {}",
                self.n()
            )));
        }
        let mut sample_levels: Vec<u32> =
            sample.positions().iter().map(|&p| self.level(p)).collect();
        sample_levels.sort_unstable();
        let counts = self
            .ascending_positions()
            .into_iter()
            .map(|p| {
                let l = self.level(p);
                sample_levels.partition_point(|&s| s <= l) as u64
            })
            .collect();
        Ok(Cdf {
            counts,
            denominator: sample.k() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(p: &[usize], n: usize) -> Sample {
        Sample::new(p.to_vec(), n).unwrap()
    }

    #[test]
    fn value_ties_share_a_level() {
        let pop = Population::from_values(&[3.1, 1.0, 3.1]).unwrap();
        assert_eq!(pop.rank_levels(), &[2, 1, 2]);
        assert_eq!(pop.sorted_order(), vec![2, 1, 3]);
        assert_eq!(pop.levels(), 2);
    }

    #[test]
    fn sorted_levels_keep_identity_order() {
        let pop = Population::from_levels(&[1, 2, 3, 4]).unwrap();
        assert_eq!(pop.sorted_order(), vec![1, 2, 3, 4]);
        assert!(pop.is_strict());
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            Population::from_values(&[]),
            Err(Error::EmptyPopulation)
        ));
        assert!(matches!(
            Population::from_levels(&[1, 3]),
            Err(Error::NonContiguousLevels(2))
        ));
        assert!(Population::from_levels(&[0, 1]).is_err());
        assert!(matches!(
            Population::from_values(&[1.0, f64::NAN]),
            Err(Error::NanValue(2))
        ));
    }

    #[test]
    fn population_cdf_examples() {
        let pop = Population::from_levels(&[1, 2, 2, 3]).unwrap();
        assert_eq!(population_cdf(&pop).counts, vec![1, 3, 3, 4]);
        let strict = Population::strict(9).unwrap();
        let c = population_cdf(&strict);
        assert_eq!(c.counts, (1..=9).collect::<Vec<u64>>());
        assert_eq!(c.denominator, 9);
        let flat = Population::from_levels(&[1; 5]).unwrap();
        assert_eq!(population_cdf(&flat).counts, vec![5; 5]);
    }

    #[test]
    fn sample_cdf_examples() {
        let pop = Population::strict(9).unwrap();
        let c = sample_cdf(&pop, &sample(&[2, 5, 8], 9)).unwrap();
        assert_eq!(c.counts, vec![0, 1, 1, 1, 2, 2, 2, 3, 3]);
        assert_eq!(c.denominator, 3);

        let full = sample_cdf(&pop, &sample(&(1..=9).collect::<Vec<_>>(), 9)).unwrap();
        assert_eq!(full, population_cdf(&pop));

        let weak = Population::from_levels(&[1, 2, 2, 3]).unwrap();
        let c = sample_cdf(&weak, &sample(&[2], 4)).unwrap();
        assert_eq!(c.counts, vec![0, 1, 1, 1]);

        let short = Population::strict(3).unwrap();
        assert!(sample_cdf(&short, &sample(&[4], 5)).is_err());
    }

    #[test]
    fn dominance_examples() {
        let pop = Population::strict(6).unwrap();
        let cdf = |p: &[usize]| sample_cdf(&pop, &sample(p, 6)).unwrap();
        let hi = cdf(&[5, 6]);
        let lo = cdf(&[1, 2]);
        assert!(dominates(&hi, &hi).unwrap());
        assert!(dominates(&hi, &lo).unwrap());
        assert!(!dominates(&lo, &hi).unwrap());
        let wide = cdf(&[1, 6]);
        let mid = cdf(&[3, 4]);
        assert!(!dominates(&wide, &mid).unwrap());
        assert!(!dominates(&mid, &wide).unwrap());

        let other = sample_cdf(&Population::strict(5).unwrap(), &sample(&[1], 5)).unwrap();
        assert!(matches!(
            dominates(&hi, &other),
            Err(Error::SupportMismatch(6, 5))
        ));
    }

    #[test]
    fn equivalence_examples() {
        let weak = Population::from_levels(&[1, 1, 2]).unwrap();
        assert!(samples_equivalent(&weak, &sample(&[1], 3), &sample(&[2], 3)).unwrap());
        assert!(!samples_equivalent(&weak, &sample(&[1], 3), &sample(&[3], 3)).unwrap());
        let strict = Population::strict(5).unwrap();
        let y = sample(&[1, 3], 5);
        assert!(samples_equivalent(&strict, &y, &y).unwrap());
        assert!(!samples_equivalent(&strict, &y, &sample(&[1, 4], 5)).unwrap());
        assert!(samples_equivalent(&strict, &y, &sample(&[2], 5)).is_err());
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::new(vec![], 3).is_err());
        assert!(Sample::new(vec![2, 2], 3).is_err());
        assert!(Sample::new(vec![0, 1], 3).is_err());
        assert!(Sample::new(vec![1, 4], 3).is_err());
        assert_eq!(
            Sample::from_unsorted(vec![3, 1], 3).unwrap().positions(),
            &[1, 3]
        );
    }

    #[test]
    fn csv_formats() {
        let pop = Population::from_csv_reader("id,value\na,3.1\nb,1.0\nc,3.1\n".as_bytes()).unwrap();
        assert_eq!(pop.rank_levels(), &[2, 1, 2]);
        assert_eq!(pop.item_at(1).label, "b");
        let pop = Population::from_csv_reader("id,level\nx,2\ny,1\n".as_bytes()).unwrap();
        assert_eq!(pop.sorted_order(), vec![2, 1]);
        assert!(Population::from_csv_reader("name,score\na,1\n".as_bytes()).is_err());
        assert!(Population::from_csv_reader("id,level\na,1\nb,3\n".as_bytes()).is_err());
    }

    #[test]
    fn preference_cdf_follows_own_order() {
        let pref = Preference::from_levels(vec![3, 1, 2]).unwrap();
        assert_eq!(pref.ascending_positions(), vec![2, 3, 1]);
        let c = pref.sample_cdf(&sample(&[1], 3)).unwrap();
        assert_eq!(c.counts, vec![0, 0, 1]);
        assert_eq!(pref.reversed().levels(), &[1, 3, 2]);
    }
}
