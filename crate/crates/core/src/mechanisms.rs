//! Selection mechanisms played at their equilibrium strategies.
//!
//! Deterministic cut-and-choose games use the closed-form equilibrium: the
//! cutter stacks blocks from its favourite end of the ranking and the chooser
//! takes its favourite item from every block. Randomized procedures take an
//! explicit [`DrawSource`] so the same draws always replay the same outcome.
//!
//! Under weak rankings the equilibrium is unique only up to equivalent
//! samples; the representative returned here is the one produced by playing
//! the strategies over positions, and callers should compare outcomes with
//! [`samples_equivalent`](crate::population::samples_equivalent).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, Sample};
use crate::rng::{DrawSource, Scripted};
use crate::stats::{check_quantile_shape, ExactStat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    #[serde(rename = "I")]
    PlayerI,
    #[serde(rename = "II")]
    PlayerII,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::PlayerI => Player::PlayerII,
            Player::PlayerII => Player::PlayerI,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::PlayerI => "I",
            Player::PlayerII => "II",
        })
    }
}

impl FromStr for Player {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(Player::PlayerI),
            "II" | "ii" | "2" => Ok(Player::PlayerII),
            _ => Err(Error::params(format!("unknown player `{s}`, expected I or II"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    PlayerI,
    PlayerII,
    Nature,
}

impl From<Player> for Actor {
    fn from(p: Player) -> Self {
        match p {
            Player::PlayerI => Actor::PlayerI,
            Player::PlayerII => Actor::PlayerII,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrikeStrategy {
    /// Each side strikes its `c` least-liked sample items outright.
    #[default]
    Unconditional,
    /// Strike only items on the wrong side of the population median position.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Quantile,
    CutAndChoose,
    OverlappingCutAndChoose,
    Random,
    StrikeAndReplace,
    MedianSample,
    MedianShortlist,
    RandomCutAndChoose,
}

impl MechanismKind {
    pub fn is_randomized(self) -> bool {
        matches!(
            self,
            MechanismKind::Random
                | MechanismKind::StrikeAndReplace
                | MechanismKind::MedianSample
                | MechanismKind::RandomCutAndChoose
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Quantile => "quantile",
            MechanismKind::CutAndChoose => "cut_and_choose",
            MechanismKind::OverlappingCutAndChoose => "overlapping_cut_and_choose",
            MechanismKind::Random => "random",
            MechanismKind::StrikeAndReplace => "strike_and_replace",
            MechanismKind::MedianSample => "median_sample",
            MechanismKind::MedianShortlist => "median_shortlist",
            MechanismKind::RandomCutAndChoose => "random_cut_and_choose",
        }
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        [
            MechanismKind::Quantile,
            MechanismKind::CutAndChoose,
            MechanismKind::OverlappingCutAndChoose,
            MechanismKind::Random,
            MechanismKind::StrikeAndReplace,
            MechanismKind::MedianSample,
            MechanismKind::MedianShortlist,
            MechanismKind::RandomCutAndChoose,
        ]
        .into_iter()
        .find(|k| k.name() == norm)
        .ok_or_else(|| Error::params(format!("unknown mechanism `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_sizes: Option<Vec<usize>>,
    /// Veto count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutter: Option<Player>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike_strategy: Option<StrikeStrategy>,
    /// Explicit blocks for the random cut-and-choose; defaults to the ordered
    /// partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
}

/// A mechanism plus its parameters, as read from a JSON config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    #[serde(default)]
    pub params: MechanismParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, params: MechanismParams) -> Self {
        MechanismConfig {
            kind,
            params,
            seed: None,
        }
    }

    pub fn quantile(k: usize, m: usize, cutter: Player) -> Self {
        Self::new(
            MechanismKind::Quantile,
            MechanismParams {
                k: Some(k),
                m: Some(m),
                cutter: Some(cutter),
                ..Default::default()
            },
        )
    }

    pub fn random(k: usize) -> Self {
        Self::new(
            MechanismKind::Random,
            MechanismParams {
                k: Some(k),
                ..Default::default()
            },
        )
    }

    pub fn strike_and_replace(k: usize, c: usize, strategy: StrikeStrategy) -> Self {
        Self::new(
            MechanismKind::StrikeAndReplace,
            MechanismParams {
                k: Some(k),
                c: Some(c),
                strike_strategy: Some(strategy),
                ..Default::default()
            },
        )
    }

    pub fn median_sample(k: usize, c: usize) -> Self {
        Self::new(
            MechanismKind::MedianSample,
            MechanismParams {
                k: Some(k),
                c: Some(c),
                ..Default::default()
            },
        )
    }

    pub fn cut_and_choose(block_sizes: Vec<usize>, cutter: Player) -> Self {
        Self::new(
            MechanismKind::CutAndChoose,
            MechanismParams {
                block_sizes: Some(block_sizes),
                cutter: Some(cutter),
                ..Default::default()
            },
        )
    }

    fn need<T: Clone>(&self, v: &Option<T>, name: &str) -> Result<T> {
        v.clone().ok_or_else(|| {
            Error::params(format!("{} requires parameter `{name}`", self.kind.name()))
        })
    }

    /// Sample size this config produces on a population of `n`.
    pub fn sample_size(&self, n: usize) -> Result<usize> {
        let p = &self.params;
        match self.kind {
            MechanismKind::CutAndChoose | MechanismKind::OverlappingCutAndChoose => {
                Ok(self.need(&p.block_sizes, "block_sizes")?.len())
            }
            MechanismKind::MedianShortlist => Ok(1),
            MechanismKind::Quantile => match (p.k, p.m) {
                (Some(k), _) => Ok(k),
                (None, Some(m)) => Ok(n / (2 * m + 1)),
                _ => Err(Error::params("quantile requires `k`")),
            },
            _ => self.need(&p.k, "k"),
        }
    }

    /// Checks the parameters against a population of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let p = &self.params;
        match self.kind {
            MechanismKind::Quantile => {
                let k = self.need(&p.k, "k")?;
                let m = match p.m {
                    Some(m) => m,
                    None => crate::stats::quantile_m(n, k)
                        .ok_or(Error::NotQuantileShaped { n, k, m: 0 })?,
                };
                check_quantile_shape(n, k, m)
            }
            MechanismKind::CutAndChoose => {
                check_block_sizes(&self.need(&p.block_sizes, "block_sizes")?, n).map(|_| ())
            }
            MechanismKind::OverlappingCutAndChoose => {
                check_nested_sizes(&self.need(&p.block_sizes, "block_sizes")?, n)
            }
            MechanismKind::Random => check_k(self.need(&p.k, "k")?, n),
            MechanismKind::StrikeAndReplace => {
                let k = self.need(&p.k, "k")?;
                let c = p.c.unwrap_or(0);
                check_k(k, n)?;
                if k + 2 * c > n {
                    return Err(Error::params(format!("k + 2c = {} exceeds n = {n}", k + 2 * c)));
                }
                Ok(())
            }
            MechanismKind::MedianSample => check_k(self.need(&p.k, "k")?, n),
            MechanismKind::MedianShortlist => Ok(()),
            MechanismKind::RandomCutAndChoose => {
                let k = self.need(&p.k, "k")?;
                match &p.partition {
                    Some(part) => check_partition(part, k, n).map(|_| ()),
                    None => ordered_partition(n, k).map(|_| ()),
                }
            }
        }
    }
}

/// One message in a play transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// Cutter's blocks (possibly overlapping, possibly not covering).
    Cut { blocks: Vec<Vec<usize>> },
    /// Chooser's pick from each block, in block order.
    Choose { chosen: Vec<usize> },
    /// Uniform draw of several positions without replacement.
    Draw { positions: Vec<usize> },
    /// Uniform draw of a single position.
    DrawOne { position: usize },
    /// Candidate samples drawn independently.
    Candidates { samples: Vec<Vec<usize>> },
    /// Items struck from the current sample.
    Strike { positions: Vec<usize> },
    /// Candidate indices vetoed.
    Veto { candidates: Vec<usize> },
    /// Final sample.
    Result { positions: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub actor: Actor,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub sample: Sample,
    pub probability: ExactStat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub sample: Sample,
    pub transcript: Vec<TranscriptEntry>,
    /// Exact outcome distribution, when small enough to list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<WeightedSample>>,
}

impl Outcome {
    fn new(sample: Sample, mut transcript: Vec<TranscriptEntry>) -> Self {
        transcript.push(TranscriptEntry {
            actor: Actor::Nature,
            message: Message::Result {
                positions: sample.positions().to_vec(),
            },
        });
        Outcome {
            sample,
            transcript,
            distribution: None,
        }
    }

    pub fn positions(&self) -> &[usize] {
        self.sample.positions()
    }

    /// One JSON object per transcript entry.
    pub fn transcript_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.transcript {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// The random draws recorded in the transcript, as a replayable source.
    pub fn recorded_draws(&self) -> Scripted {
        let mut subsets = Vec::new();
        let mut singles = Vec::new();
        for e in &self.transcript {
            match &e.message {
                Message::Draw { positions } => subsets.push(positions.clone()),
                Message::Candidates { samples } => subsets.extend(samples.iter().cloned()),
                Message::DrawOne { position } => singles.push(*position),
                _ => {}
            }
        }
        Scripted::new(subsets, singles)
    }
}

fn entry(actor: impl Into<Actor>, message: Message) -> TranscriptEntry {
    TranscriptEntry {
        actor: actor.into(),
        message,
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::params(format!("sample size k = {k} must be in 1..={n}")));
    }
    Ok(())
}

/// Validates disjoint block sizes and returns them sorted ascending.
fn check_block_sizes(sizes: &[usize], n: usize) -> Result<Vec<usize>> {
    if sizes.is_empty() {
        return Err(Error::params("need at least one block"));
    }
    if sizes.contains(&0) {
        return Err(Error::params("block sizes must be positive"));
    }
    let total: usize = sizes.iter().sum();
    if total > n {
        return Err(Error::params(format!("block sizes sum to {total} > n = {n}")));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    Ok(sorted)
}

fn check_nested_sizes(sizes: &[usize], n: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::params("need at least one target"));
    }
    if sizes[0] == 0 || *sizes.last().unwrap() > n {
        return Err(Error::params(format!("targets must lie in 1..={n}")));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::params("targets must be strictly increasing"));
    }
    Ok(())
}

/// Equilibrium of a cut-and-choose game with disjoint blocks.
///
/// Cutter I stacks the top `n_1` positions in the first block, the next
/// `n_2` in the second and so on, and Player II takes each block's minimum:
/// positions `n − Σ_{i≤j} n_i + 1`. With Player II cutting, blocks stack up
/// from the bottom and Player I takes each maximum: positions `Σ_{i≤j} n_i`.
pub fn cut_and_choose_outcome(
    pop: &Population,
    block_sizes: &[usize],
    cutter: Player,
) -> Result<Outcome> {
    let n = pop.n();
    let sizes = check_block_sizes(block_sizes, n)?;
    let mut blocks = Vec::with_capacity(sizes.len());
    let mut used = 0;
    for &s in &sizes {
        let block: Vec<usize> = match cutter {
            Player::PlayerI => (n - used - s + 1..=n - used).collect(),
            Player::PlayerII => (used + 1..=used + s).collect(),
        };
        used += s;
        blocks.push(block);
    }
    let chosen: Vec<usize> = blocks
        .iter()
        .map(|b| match cutter {
            Player::PlayerI => b[0],
            Player::PlayerII => *b.last().unwrap(),
        })
        .collect();
    let mut positions = chosen.clone();
    positions.sort_unstable();
    let transcript = vec![
        entry(cutter, Message::Cut { blocks }),
        entry(cutter.other(), Message::Choose { chosen }),
    ];
    Ok(Outcome::new(Sample::from_sorted_unchecked(positions), transcript))
}

/// Block sizes `(m+1, 2m+1, …, 2m+1)` of the quantile mechanism.
pub fn quantile_block_sizes(k: usize, m: usize) -> Vec<usize> {
    let mut sizes = vec![2 * m + 1; k];
    if let Some(first) = sizes.first_mut() {
        *first = m + 1;
    }
    sizes
}

/// Ascending positions `m+1+(2m+1)j`, `j = 0..k`.
pub fn quantile_positions(k: usize, m: usize) -> Vec<usize> {
    (0..k).map(|j| m + 1 + (2 * m + 1) * j).collect()
}

/// Quantile mechanism at equilibrium; the same sample for either cutter.
pub fn quantile_outcome(pop: &Population, k: usize, m: usize, cutter: Player) -> Result<Outcome> {
    check_quantile_shape(pop.n(), k, m)?;
    cut_and_choose_outcome(pop, &quantile_block_sizes(k, m), cutter)
}

/// Cut-and-choose with nested, overlapping subsets of strictly increasing
/// sizes. A Player II cutter offers the `s_j` lowest items for each `j` and
/// Player I takes every maximum; a Player I cutter mirrors this from the top.
pub fn overlapping_cut_and_choose_outcome(
    pop: &Population,
    sizes: &[usize],
    cutter: Player,
) -> Result<Outcome> {
    let n = pop.n();
    check_nested_sizes(sizes, n)?;
    let blocks: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&s| match cutter {
            Player::PlayerII => (1..=s).collect(),
            Player::PlayerI => (n - s + 1..=n).collect(),
        })
        .collect();
    let chosen: Vec<usize> = blocks
        .iter()
        .map(|b| match cutter {
            Player::PlayerII => *b.last().unwrap(),
            Player::PlayerI => b[0],
        })
        .collect();
    let mut positions = chosen.clone();
    positions.sort_unstable();
    let transcript = vec![
        entry(cutter, Message::Cut { blocks }),
        entry(cutter.other(), Message::Choose { chosen }),
    ];
    Ok(Outcome::new(Sample::from_sorted_unchecked(positions), transcript))
}

/// Builds a mechanism whose equilibrium selects exactly `target_positions`.
pub fn implement_quantiles(
    pop: &Population,
    target_positions: &[usize],
) -> Result<(MechanismConfig, Outcome)> {
    check_nested_sizes(target_positions, pop.n())?;
    let config = MechanismConfig::new(
        MechanismKind::OverlappingCutAndChoose,
        MechanismParams {
            block_sizes: Some(target_positions.to_vec()),
            cutter: Some(Player::PlayerII),
            ..Default::default()
        },
    );
    let outcome = overlapping_cut_and_choose_outcome(pop, target_positions, Player::PlayerII)?;
    Ok((config, outcome))
}

/// Shortlist of `⌈n/2⌉` by Player I, one pick by Player II: position
/// `n − ⌈n/2⌉ + 1`.
pub fn median_shortlist(pop: &Population) -> Result<Outcome> {
    let n = pop.n();
    cut_and_choose_outcome(pop, &[n.div_ceil(2)], Player::PlayerI)
}

pub fn random_sample<D: DrawSource>(pop: &Population, k: usize, src: &mut D) -> Result<Outcome> {
    let n = pop.n();
    check_k(k, n)?;
    let drawn = src.draw_subset(&pop.all_positions(), k);
    let mut positions = drawn.clone();
    positions.sort_unstable();
    let transcript = vec![entry(Actor::Nature, Message::Draw { positions: drawn })];
    Ok(Outcome::new(Sample::from_sorted_unchecked(positions), transcript))
}

/// Random sample with one round of strikes per side, each strike refilled by
/// a fresh draw from items never seen before. Player I strikes first.
pub fn strike_and_replace<D: DrawSource>(
    pop: &Population,
    k: usize,
    c: usize,
    strategy: StrikeStrategy,
    src: &mut D,
) -> Result<Outcome> {
    let n = pop.n();
    check_k(k, n)?;
    if k + 2 * c > n {
        return Err(Error::params(format!("k + 2c = {} exceeds n = {n}", k + 2 * c)));
    }
    let mut seen = vec![false; n + 1];
    let initial = src.draw_subset(&pop.all_positions(), k);
    for &p in &initial {
        seen[p] = true;
    }
    let mut current = initial.clone();
    let mut transcript = vec![entry(Actor::Nature, Message::Draw { positions: initial })];

    let median_level = pop.level_at(n.div_ceil(2));
    for player in [Player::PlayerI, Player::PlayerII] {
        current.sort_unstable();
        // Least-liked first: lowest positions for I, highest for II.
        let ordered: Vec<usize> = match player {
            Player::PlayerI => current.clone(),
            Player::PlayerII => current.iter().rev().copied().collect(),
        };
        let struck: Vec<usize> = ordered
            .into_iter()
            .filter(|&p| match (strategy, player) {
                (StrikeStrategy::Unconditional, _) => true,
                (StrikeStrategy::Threshold, Player::PlayerI) => pop.level_at(p) < median_level,
                (StrikeStrategy::Threshold, Player::PlayerII) => pop.level_at(p) > median_level,
            })
            .take(c)
            .collect();
        if struck.is_empty() {
            continue;
        }
        current.retain(|p| !struck.contains(p));
        transcript.push(entry(
            player,
            Message::Strike {
                positions: struck.clone(),
            },
        ));
        for _ in &struck {
            let unused: Vec<usize> = (1..=n).filter(|&p| !seen[p]).collect();
            let refill = src.draw_one(&unused);
            seen[refill] = true;
            current.push(refill);
            transcript.push(entry(Actor::Nature, Message::DrawOne { position: refill }));
        }
    }
    current.sort_unstable();
    Ok(Outcome::new(Sample::from_sorted_unchecked(current), transcript))
}

/// Ordering key for candidate samples: twice the sample median, then the
/// position sum, then draw order.
fn median_key(positions: &[usize], idx: usize) -> (usize, usize, usize) {
    let k = positions.len();
    let twice_median = positions[(k - 1) / 2] + positions[k / 2];
    (twice_median, positions.iter().sum(), idx)
}

/// `2c+1` independent random samples; Player I vetoes the `c` with the
/// lowest medians, Player II the `c` with the highest, the middle one is
/// returned.
pub fn median_sample<D: DrawSource>(
    pop: &Population,
    k: usize,
    c: usize,
    src: &mut D,
) -> Result<Outcome> {
    let n = pop.n();
    check_k(k, n)?;
    let all = pop.all_positions();
    let candidates: Vec<Vec<usize>> = (0..2 * c + 1)
        .map(|_| {
            let mut s = src.draw_subset(&all, k);
            s.sort_unstable();
            s
        })
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| median_key(&candidates[i], i));

    let survivor = candidates[order[c]].clone();
    let mut transcript = vec![entry(
        Actor::Nature,
        Message::Candidates {
            samples: candidates,
        },
    )];
    if c > 0 {
        transcript.push(entry(
            Player::PlayerI,
            Message::Veto {
                candidates: order[..c].to_vec(),
            },
        ));
        transcript.push(entry(
            Player::PlayerII,
            Message::Veto {
                candidates: order[c + 1..].to_vec(),
            },
        ));
    }
    Ok(Outcome::new(Sample::from_sorted_unchecked(survivor), transcript))
}

/// `k` consecutive blocks of `n/k` positions each.
pub fn ordered_partition(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || !n.is_multiple_of(k) {
        return Err(Error::params(format!("n = {n} is not a multiple of k = {k}")));
    }
    let m = n / k;
    Ok((0..k).map(|b| (b * m + 1..=(b + 1) * m).collect()).collect())
}

/// Validates `k` disjoint equal blocks covering `1..=n`; returns block size.
fn check_partition(partition: &[Vec<usize>], k: usize, n: usize) -> Result<usize> {
    if k == 0 || partition.len() != k || !n.is_multiple_of(k) {
        return Err(Error::params(format!(
            "need k = {k} blocks partitioning n = {n} evenly"
        )));
    }
    let m = n / k;
    let mut seen = vec![false; n + 1];
    for block in partition {
        if block.len() != m {
            return Err(Error::params(format!(
                "every block must have {m} items, found {}",
                block.len()
            )));
        }
        for &p in block {
            if p == 0 || p > n || seen[p] {
                return Err(Error::params(format!(
                    "position {p} is out of range or repeated"
                )));
            }
            seen[p] = true;
        }
    }
    Ok(m)
}

const MAX_LISTED_OUTCOMES: u128 = 4096;

/// Player I's partition into `k` blocks of `m`, one uniform pick per block.
pub fn random_cut_and_choose<D: DrawSource>(
    pop: &Population,
    k: usize,
    partition: &[Vec<usize>],
    src: &mut D,
) -> Result<Outcome> {
    let m = check_partition(partition, k, pop.n())?;
    let mut transcript = vec![entry(
        Player::PlayerI,
        Message::Cut {
            blocks: partition.to_vec(),
        },
    )];
    let mut picked = Vec::with_capacity(k);
    for block in partition {
        let p = src.draw_one(block);
        transcript.push(entry(Actor::Nature, Message::DrawOne { position: p }));
        picked.push(p);
    }
    picked.sort_unstable();
    let mut outcome = Outcome::new(Sample::from_sorted_unchecked(picked), transcript);

    let total = (m as u128).checked_pow(k as u32);
    if let Some(total) = total.filter(|&t| t <= MAX_LISTED_OUTCOMES) {
        let prob = ExactStat::new(1u32, total as u64);
        let mut dist = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; k];
        'odometer: loop {
            let mut s: Vec<usize> = idx.iter().zip(partition).map(|(&i, b)| b[i]).collect();
            s.sort_unstable();
            dist.push(WeightedSample {
                sample: Sample::from_sorted_unchecked(s),
                probability: prob.clone(),
            });
            for j in (0..k).rev() {
                idx[j] += 1;
                if idx[j] < m {
                    continue 'odometer;
                }
                idx[j] = 0;
            }
            break;
        }
        dist.sort_by(|a, b| a.sample.cmp(&b.sample));
        outcome.distribution = Some(dist);
    }
    Ok(outcome)
}

/// Plays `config` on `pop`; randomized kinds consume `src`.
pub fn play<D: DrawSource>(
    pop: &Population,
    config: &MechanismConfig,
    src: &mut D,
) -> Result<Outcome> {
    config.validate(pop.n())?;
    let p = &config.params;
    let cutter = p.cutter.unwrap_or(Player::PlayerI);
    match config.kind {
        MechanismKind::Quantile => {
            let k = config.need(&p.k, "k")?;
            let m = p
                .m
                .or_else(|| crate::stats::quantile_m(pop.n(), k))
                .ok_or(Error::NotQuantileShaped { n: pop.n(), k, m: 0 })?;
            quantile_outcome(pop, k, m, cutter)
        }
        MechanismKind::CutAndChoose => {
            cut_and_choose_outcome(pop, &config.need(&p.block_sizes, "block_sizes")?, cutter)
        }
        MechanismKind::OverlappingCutAndChoose => overlapping_cut_and_choose_outcome(
            pop,
            &config.need(&p.block_sizes, "block_sizes")?,
            p.cutter.unwrap_or(Player::PlayerII),
        ),
        MechanismKind::Random => random_sample(pop, config.need(&p.k, "k")?, src),
        MechanismKind::StrikeAndReplace => strike_and_replace(
            pop,
            config.need(&p.k, "k")?,
            p.c.unwrap_or(0),
            p.strike_strategy.unwrap_or_default(),
            src,
        ),
        MechanismKind::MedianSample => {
            median_sample(pop, config.need(&p.k, "k")?, p.c.unwrap_or(0), src)
        }
        MechanismKind::MedianShortlist => median_shortlist(pop),
        MechanismKind::RandomCutAndChoose => {
            let k = config.need(&p.k, "k")?;
            let part = match &p.partition {
                Some(part) => part.clone(),
                None => ordered_partition(pop.n(), k)?,
            };
            random_cut_and_choose(pop, k, &part, src)
        }
    }
}
