//! Cut-and-choose games as strategic objects: canonical utilities,
//! brute-force best-response checks and the subgame-perfect outcome when the
//! two players' rankings are not exact opposites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{cut_and_choose_outcome, Actor, Message, Outcome, Player, TranscriptEntry};
use crate::population::{Population, Preference, Sample};

/// Default enumeration guard.
pub const MAX_PROFILES: u128 = 10_000_000;

/// Sum of the preference levels of the sampled items. Any FOSD-monotone
/// function is admissible; this one is integer-exact.
pub fn canonical_utility(pref: &Preference, sample: &Sample) -> i64 {
    sample
        .positions()
        .iter()
        .map(|&p| pref.level(p) as i64)
        .sum()
}

/// Disjoint blocks in block order; block `j` has `block_sizes[j]` positions,
/// ascending. Positions not in any block are unassigned.
pub type Partition = Vec<Vec<usize>>;

/// A chooser strategy: the item it takes from any block it is handed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceRule {
    /// Most preferred under the chooser's own preference, ties to the lowest
    /// position. This is the chooser's dominant strategy.
    Favorite,
    /// Least preferred, ties to the lowest position.
    Worst,
}

impl ChoiceRule {
    pub fn pick(&self, pref: &Preference, block: &[usize]) -> usize {
        let mut best = block[0];
        for &p in &block[1..] {
            let better = match self {
                ChoiceRule::Favorite => pref.level(p) > pref.level(best),
                ChoiceRule::Worst => pref.level(p) < pref.level(best),
            };
            if better || (pref.level(p) == pref.level(best) && p < best) {
                best = p;
            }
        }
        best
    }
}

/// A cut-and-choose mechanism game with disjoint blocks.
#[derive(Debug, Clone)]
pub struct MechanismGame {
    pub pop: Population,
    pub pref_i: Preference,
    pub pref_ii: Preference,
    pub block_sizes: Vec<usize>,
    pub cutter: Player,
}

impl MechanismGame {
    pub fn new(
        pop: Population,
        pref_i: Preference,
        pref_ii: Preference,
        block_sizes: Vec<usize>,
        cutter: Player,
    ) -> Result<Self> {
        let n = pop.n();
        if pref_i.n() != n || pref_ii.n() != n {
            return Err(Error::SupportMismatch(pref_i.n().max(pref_ii.n()), n));
        }
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(Error::params("block sizes must be positive and non-empty"));
        }
        if block_sizes.iter().sum::<usize>() > n {
            return Err(Error::params("block sizes exceed the population"));
        }
        Ok(MechanismGame {
            pop,
            pref_i,
            pref_ii,
            block_sizes,
            cutter,
        })
    }

    /// Player I likes high ranks, Player II the reverse.
    pub fn antagonistic(pop: Population, block_sizes: Vec<usize>, cutter: Player) -> Result<Self> {
        let pref_i = Preference::ranking(&pop);
        let pref_ii = pref_i.reversed();
        Self::new(pop, pref_i, pref_ii, block_sizes, cutter)
    }

    pub fn chooser(&self) -> Player {
        self.cutter.other()
    }

    pub fn pref(&self, player: Player) -> &Preference {
        match player {
            Player::PlayerI => &self.pref_i,
            Player::PlayerII => &self.pref_ii,
        }
    }

    pub fn utility(&self, player: Player, sample: &Sample) -> i64 {
        canonical_utility(self.pref(player), sample)
    }

    pub fn outcome(&self, partition: &Partition, rule: &ChoiceRule) -> Sample {
        let pref = self.pref(self.chooser());
        let mut picks: Vec<usize> = partition.iter().map(|b| rule.pick(pref, b)).collect();
        picks.sort_unstable();
        Sample::from_sorted_unchecked(picks)
    }

    /// Number of cutter messages: ordered partitions into the block sizes.
    pub fn partition_count(&self) -> u128 {
        count_ordered_partitions(self.pop.n(), &self.block_sizes)
    }

    pub fn check_partition(&self, partition: &Partition) -> Result<()> {
        let n = self.pop.n();
        if partition.len() != self.block_sizes.len() {
            return Err(Error::params("partition has the wrong number of blocks"));
        }
        let mut seen = vec![false; n + 1];
        for (b, &s) in partition.iter().zip(&self.block_sizes) {
            if b.len() != s {
                return Err(Error::params(format!("block {b:?} should hold {s} items")));
            }
            for &p in b {
                if p == 0 || p > n || seen[p] {
                    return Err(Error::params(format!("position {p} repeated or out of range")));
                }
                seen[p] = true;
            }
        }
        Ok(())
    }
}

/// `n! / (Π n_j! · (n − Σ n_j)!)`.
pub fn count_ordered_partitions(n: usize, sizes: &[usize]) -> u128 {
    let mut left = n as u128;
    let mut total: u128 = 1;
    for &s in sizes {
        let c = binomial(left, s as u128);
        total = total.saturating_mul(c);
        left = left.saturating_sub(s as u128);
    }
    total
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = match r.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    r
}

/// Visits every ordered partition of `1..=n` into blocks of `sizes` in
/// lexicographic order of the block sequence.
pub fn for_each_partition(n: usize, sizes: &[usize], mut f: impl FnMut(&Partition)) {
    fn rec(
        free: &mut Vec<bool>,
        sizes: &[usize],
        acc: &mut Partition,
        f: &mut dyn FnMut(&Partition),
    ) {
        let Some((&s, rest)) = sizes.split_first() else {
            f(acc);
            return;
        };
        let avail: Vec<usize> = (1..free.len()).filter(|&p| free[p]).collect();
        for_each_combination(&avail, s, &mut |block| {
            for &p in block {
                free[p] = false;
            }
            acc.push(block.to_vec());
            rec(free, rest, acc, f);
            acc.pop();
            for &p in block {
                free[p] = true;
            }
        });
    }
    let mut free = vec![true; n + 1];
    free[0] = false;
    rec(&mut free, sizes, &mut Vec::new(), &mut f);
}

/// Lexicographic `k`-combinations of `items`.
pub(crate) fn for_each_combination(items: &[usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
    loop {
        f(&buf);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deviation {
    pub deviator: Player,
    pub deviation: Message,
    pub gain: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSummary {
    pub n: usize,
    pub block_sizes: Vec<usize>,
    pub cutter: Player,
    pub pref_i: Vec<u32>,
    pub pref_ii: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub game: GameSummary,
    pub partition: Partition,
    pub choice_rule: ChoiceRule,
    pub outcome: Sample,
    pub utility_i: i64,
    pub utility_ii: i64,
    pub cutter_messages_checked: u128,
    pub chooser_messages_checked: u128,
    pub deviations: Vec<Deviation>,
}

impl EquilibriumReport {
    pub fn is_equilibrium(&self) -> bool {
        self.deviations.is_empty()
    }
}

/// Lists every profitable unilateral deviation from `(partition, rule)`.
///
/// The cutter's deviations range over all ordered partitions, each answered
/// by `rule`. The chooser's deviations range over every way of picking one
/// item from each block of `partition`: two choice functions that agree on
/// the played blocks give the same outcome, so this covers the chooser's
/// whole message set up to outcome-equivalence.
pub fn verify_equilibrium(
    game: &MechanismGame,
    partition: &Partition,
    rule: &ChoiceRule,
) -> Result<EquilibriumReport> {
    verify_equilibrium_with_limit(game, partition, rule, MAX_PROFILES)
}

pub fn verify_equilibrium_with_limit(
    game: &MechanismGame,
    partition: &Partition,
    rule: &ChoiceRule,
    limit: u128,
) -> Result<EquilibriumReport> {
    game.check_partition(partition)?;
    let cutter_msgs = game.partition_count();
    let chooser_msgs: u128 = game
        .block_sizes
        .iter()
        .fold(1u128, |a, &s| a.saturating_mul(s as u128));
    let profiles = cutter_msgs.saturating_mul(chooser_msgs);
    if profiles > limit {
        return Err(Error::TooLarge {
            what: "message-set product",
            count: profiles,
            limit,
        });
    }

    let cutter = game.cutter;
    let chooser = game.chooser();
    let base = game.outcome(partition, rule);
    let base_cut = game.utility(cutter, &base);
    let base_choose = game.utility(chooser, &base);
    let mut deviations = Vec::new();

    for_each_partition(game.pop.n(), &game.block_sizes, |alt| {
        let y = game.outcome(alt, rule);
        let gain = game.utility(cutter, &y) - base_cut;
        if gain > 0 {
            deviations.push(Deviation {
                deviator: cutter,
                deviation: Message::Cut {
                    blocks: alt.clone(),
                },
                gain,
            });
        }
    });

    let k = partition.len();
    let mut idx = vec![0usize; k];
    'picks: loop {
        let chosen: Vec<usize> = idx.iter().zip(partition).map(|(&i, b)| b[i]).collect();
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        let gain = game.utility(chooser, &Sample::from_sorted_unchecked(sorted)) - base_choose;
        if gain > 0 {
            deviations.push(Deviation {
                deviator: chooser,
                deviation: Message::Choose { chosen },
                gain,
            });
        }
        for j in (0..k).rev() {
            idx[j] += 1;
            if idx[j] < partition[j].len() {
                continue 'picks;
            }
            idx[j] = 0;
        }
        break;
    }

    Ok(EquilibriumReport {
        game: GameSummary {
            n: game.pop.n(),
            block_sizes: game.block_sizes.clone(),
            cutter,
            pref_i: game.pref_i.levels().to_vec(),
            pref_ii: game.pref_ii.levels().to_vec(),
        },
        partition: partition.clone(),
        choice_rule: rule.clone(),
        utility_i: game.utility(Player::PlayerI, &base),
        utility_ii: game.utility(Player::PlayerII, &base),
        outcome: base,
        cutter_messages_checked: cutter_msgs,
        chooser_messages_checked: chooser_msgs,
        deviations,
    })
}

/// The closed-form equilibrium cut of the antagonistic game, in the
/// mechanism module's block order.
pub fn equilibrium_partition(game: &MechanismGame) -> Result<Partition> {
    let out = cut_and_choose_outcome(&game.pop, &game.block_sizes, game.cutter)?;
    match &out.transcript[0].message {
        Message::Cut { blocks } => {
            // Re-align with the game's own block-size order.
            let mut pool = blocks.clone();
            let mut ordered = Vec::with_capacity(pool.len());
            for &s in &game.block_sizes {
                let i = pool.iter().position(|b| b.len() == s).expect("block size present");
                ordered.push(pool.remove(i));
            }
            Ok(ordered)
        }
        _ => unreachable!("cut-and-choose transcript starts with the cut"),
    }
}

/// Subgame-perfect outcome under arbitrary preferences: the chooser takes
/// its favourite item from each block and the cutter picks the partition
/// that maximizes its canonical utility against that, ties to the
/// lexicographically smallest partition.
pub fn spe_cut_and_choose(
    pop: &Population,
    pref_i: &Preference,
    pref_ii: &Preference,
    block_sizes: &[usize],
    cutter: Player,
) -> Result<Outcome> {
    spe_with_limit(pop, pref_i, pref_ii, block_sizes, cutter, MAX_PROFILES)
}

pub fn spe_with_limit(
    pop: &Population,
    pref_i: &Preference,
    pref_ii: &Preference,
    block_sizes: &[usize],
    cutter: Player,
    limit: u128,
) -> Result<Outcome> {
    let game = MechanismGame::new(
        pop.clone(),
        pref_i.clone(),
        pref_ii.clone(),
        block_sizes.to_vec(),
        cutter,
    )?;
    let count = game.partition_count();
    if count > limit {
        return Err(Error::TooLarge {
            what: "ordered partitions",
            count,
            limit,
        });
    }
    let rule = ChoiceRule::Favorite;
    let mut best: Option<(i64, Partition)> = None;
    for_each_partition(pop.n(), block_sizes, |p| {
        let u = game.utility(cutter, &game.outcome(p, &rule));
        if best.as_ref().is_none_or(|(bu, _)| u > *bu) {
            best = Some((u, p.clone()));
        }
    });
    let (_, partition) = best.expect("at least one partition");
    let chooser_pref = game.pref(game.chooser());
    let chosen: Vec<usize> = partition.iter().map(|b| rule.pick(chooser_pref, b)).collect();
    let sample = game.outcome(&partition, &rule);
    Ok(Outcome {
        transcript: vec![
            TranscriptEntry {
                actor: cutter.into(),
                message: Message::Cut { blocks: partition },
            },
            TranscriptEntry {
                actor: game.chooser().into(),
                message: Message::Choose { chosen },
            },
            TranscriptEntry {
                actor: Actor::Nature,
                message: Message::Result {
                    positions: sample.positions().to_vec(),
                },
            },
        ],
        sample,
        distribution: None,
    })
}

/// Outcome when `owner`'s preference is the common ranking and the opponent
/// is exactly opposed to it, with `cutter` cutting.
pub fn antagonistic_benchmark(
    pop: &Population,
    pref: &Preference,
    block_sizes: &[usize],
    cutter: Player,
    owner: Player,
) -> Result<Outcome> {
    if pref.n() != pop.n() {
        return Err(Error::SupportMismatch(pref.n(), pop.n()));
    }
    // Rank positions by `pref`; in that ranking the owner plays Player I.
    let ranked = pref.as_population()?;
    let to_pos = ranked.sorted_order();
    let role = if owner == cutter {
        Player::PlayerI
    } else {
        Player::PlayerII
    };
    let mut out = cut_and_choose_outcome(&ranked, block_sizes, role)?;
    let map = |q: &usize| to_pos[q - 1];
    for e in &mut out.transcript {
        e.actor = match e.actor {
            Actor::PlayerI => owner.into(),
            Actor::PlayerII => owner.other().into(),
            Actor::Nature => Actor::Nature,
        };
        match &mut e.message {
            Message::Cut { blocks } => {
                for b in blocks.iter_mut() {
                    *b = b.iter().map(map).collect();
                    b.sort_unstable();
                }
            }
            Message::Choose { chosen } => *chosen = chosen.iter().map(map).collect(),
            Message::Result { positions } => {
                *positions = positions.iter().map(map).collect();
                positions.sort_unstable();
            }
            _ => {}
        }
    }
    let mut pos: Vec<usize> = out.sample.positions().iter().map(map).collect();
    pos.sort_unstable();
    out.sample = Sample::from_sorted_unchecked(pos);
    Ok(out)
}
