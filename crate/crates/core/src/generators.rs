//! Game families: team pennies, the exponential span family, and seeded
//! random non-absentminded games.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Alphabet, Game, GameBuilder, InfoSet, NodeId, Player};
use crate::rational::{int, rational, Rational};
use crate::seqsets::{Sequence, SequenceSet};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Information structure of the pennies game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PenniesVariant {
    /// Alice and Bob each have a single infoset.
    I,
    /// Alice tells die faces apart up to pairs `{2i, 2i+1}`.
    II,
    /// As `II`, and Bob also sees Alice's coin.
    III,
}

impl fmt::Display for PenniesVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenniesVariant::I => "I",
            PenniesVariant::II => "II",
            PenniesVariant::III => "III",
        })
    }
}

impl FromStr for PenniesVariant {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(PenniesVariant::I),
            "II" | "2" => Ok(PenniesVariant::II),
            "III" | "3" => Ok(PenniesVariant::III),
            _ => Err(GenError::InvalidParameter(format!(
                "unknown pennies variant {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Pennies(PenniesVariant),
    Lowerbound,
    Random,
}

/// Parameters for every family. `n` is used by pennies and lowerbound, the
/// rest only by the random family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyParams {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Maximum number of edges from the root to a leaf, at most 8.
    pub depth: usize,
    /// Maximum arity of a node, 1 to 3.
    pub branching: usize,
    /// Chance that a player node joins an existing compatible infoset.
    pub merge_percent: u32,
    /// Chance that an inner node is a chance node.
    pub chance_percent: u32,
    /// Chance that a non-root node above the depth cap is a leaf.
    pub leaf_percent: u32,
    pub two_player: bool,
}

impl FamilyParams {
    pub fn random(seed: u64) -> Self {
        FamilyParams {
            family: Family::Random,
            n: 1,
            seed,
            depth: 4,
            branching: 2,
            merge_percent: 50,
            chance_percent: 30,
            leaf_percent: 20,
            two_player: false,
        }
    }
}

pub fn generate(params: &FamilyParams) -> Result<Game, GenError> {
    match params.family {
        Family::Pennies(v) => gen_pennies(v, params.n),
        Family::Lowerbound => lowerbound_game(params.n),
        Family::Random => gen_random(params),
    }
}

fn check_n(n: usize) -> Result<(), GenError> {
    if n == 0 {
        return Err(GenError::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// An `n`-sided fair die, then Alice's coin, then Bob's coin; all moves
/// belong to Max as a team. The team wins on an even face when the coins
/// match and on an odd face when they differ.
pub fn gen_pennies(variant: PenniesVariant, n: usize) -> Result<Game, GenError> {
    check_n(n)?;
    let mut g = GameBuilder::new();
    let alice_sets = match variant {
        PenniesVariant::I => 1,
        _ => n.div_ceil(2),
    };
    let alice: Vec<usize> = (0..alice_sets)
        .map(|k| {
            let (h, t) = (format!("H_A{k}"), format!("T_A{k}"));
            g.infoset(&format!("A{k}"), Player::Max, &[&h, &t])
        })
        .collect();
    let bob: Vec<usize> = match variant {
        PenniesVariant::III => ["H", "T"]
            .iter()
            .map(|c| {
                let (h, t) = (format!("H_B{c}"), format!("T_B{c}"));
                g.infoset(&format!("B{c}"), Player::Max, &[&h, &t])
            })
            .collect(),
        _ => vec![g.infoset("B0", Player::Max, &["H_B0", "T_B0"])],
    };
    let mut faces = Vec::with_capacity(n);
    for face in 0..n {
        let mut coins = Vec::with_capacity(2);
        for x in 0..2 {
            let leaves: Vec<NodeId> = (0..2)
                .map(|y| {
                    let win = (face % 2 == 0) == (x == y);
                    g.leaf(int(win as i64))
                })
                .collect();
            let b = if bob.len() == 2 { bob[x] } else { bob[0] };
            coins.push(g.player(b, leaves));
        }
        let a = alice[if alice_sets == 1 { 0 } else { face / 2 }];
        faces.push((rational(1, n as i64), g.player(a, coins)));
    }
    let root = if n == 1 { faces[0].1 } else { g.chance(faces) };
    Ok(g.build(root).expect("pennies games are valid"))
}

fn lowerbound_alphabet(n: usize) -> Arc<Alphabet> {
    Arc::new(Alphabet::new(
        (1..=n)
            .map(|i| {
                let (a, b) = (format!("a{i}"), format!("b{i}"));
                InfoSet::new(format!("I{i}"), Player::Max, &[&a, &b])
            })
            .collect(),
    ))
}

/// All single actions over `n` binary infosets, plus every ordered pair of
/// actions from infosets `i < j`.
pub fn gen_lowerbound(n: usize) -> Result<SequenceSet, GenError> {
    check_n(n)?;
    let alphabet = lowerbound_alphabet(n);
    let mut seqs = Vec::new();
    for i in 0..n {
        for &x in alphabet.actions(i) {
            seqs.push(Sequence::new(vec![x]));
            for j in i + 1..n {
                for &y in alphabet.actions(j) {
                    seqs.push(Sequence::new(vec![x, y]));
                }
            }
        }
    }
    Ok(SequenceSet::new(alphabet, seqs).expect("no infoset repeats"))
}

/// A game whose leaf histories are exactly `gen_lowerbound(n)`. Chance picks
/// the first infoset, and after each action it either stops or picks a later
/// infoset. A leaf pays the number of `a` actions on its path.
pub fn lowerbound_game(n: usize) -> Result<Game, GenError> {
    check_n(n)?;
    let alphabet = lowerbound_alphabet(n);
    let mut g = GameBuilder::with_alphabet(alphabet);
    let pick = |g: &mut GameBuilder, kids: Vec<NodeId>| {
        if kids.len() == 1 {
            kids[0]
        } else {
            g.uniform_chance(kids)
        }
    };
    let mut firsts = Vec::with_capacity(n);
    for i in 0..n {
        let mut branches = Vec::with_capacity(2);
        for x in 0..2 {
            let mut options = vec![g.leaf(int(1 - x as i64))];
            for j in i + 1..n {
                let a = g.leaf(int(2 - x as i64));
                let b = g.leaf(int(1 - x as i64));
                options.push(g.player(j, vec![a, b]));
            }
            branches.push(pick(&mut g, options));
        }
        firsts.push(g.player(i, branches));
    }
    let root = pick(&mut g, firsts);
    Ok(g.build(root).expect("lowerbound games are valid"))
}

enum Shape {
    Leaf(i64),
    Chance(Vec<(i64, Shape)>),
    Player {
        owner: Player,
        infoset: usize,
        children: Vec<Shape>,
    },
}

/// A reproducible random game. Player nodes only share an infoset when they
/// have the same owner, depth and arity, which rules out absentmindedness.
pub fn gen_random(params: &FamilyParams) -> Result<Game, GenError> {
    if params.depth > 8 {
        return Err(GenError::InvalidParameter(format!(
            "depth {} exceeds 8",
            params.depth
        )));
    }
    if !(1..=3).contains(&params.branching) {
        return Err(GenError::InvalidParameter(format!(
            "branching {} is outside 1..=3",
            params.branching
        )));
    }
    for (name, p) in [
        ("merge", params.merge_percent),
        ("chance", params.chance_percent),
        ("leaf", params.leaf_percent),
    ] {
        if p > 100 {
            return Err(GenError::InvalidParameter(format!(
                "{name} percentage {p} exceeds 100"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut shape = grow(&mut rng, params, 0);
    let mut groups: BTreeMap<(Player, usize, usize), Vec<usize>> = BTreeMap::new();
    let mut owners = Vec::new();
    assign(&mut rng, params, &mut shape, 0, &mut groups, &mut owners);

    let mut g = GameBuilder::new();
    for (k, (owner, arity)) in owners.iter().enumerate() {
        let labels: Vec<String> = "abc"
            .chars()
            .take(*arity)
            .map(|c| format!("{c}{k}"))
            .collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        g.infoset(&format!("I{k}"), *owner, &refs);
    }
    let root = emit(&mut g, &shape);
    Ok(g.build(root).expect("random games are valid"))
}

fn arity(rng: &mut ChaCha8Rng, params: &FamilyParams) -> usize {
    rng.gen_range(params.branching.min(2)..=params.branching)
}

fn grow(rng: &mut ChaCha8Rng, params: &FamilyParams, level: usize) -> Shape {
    let stop = level == params.depth
        || (level > 0 && rng.gen_range(0..100) < params.leaf_percent);
    if stop {
        return Shape::Leaf(rng.gen_range(-2..=4));
    }
    let k = arity(rng, params);
    if rng.gen_range(0..100) < params.chance_percent {
        let children = (0..k)
            .map(|_| (rng.gen_range(1..=3), grow(rng, params, level + 1)))
            .collect();
        return Shape::Chance(children);
    }
    let owner = if params.two_player && rng.gen_bool(0.5) {
        Player::Min
    } else {
        Player::Max
    };
    let children = (0..k).map(|_| grow(rng, params, level + 1)).collect();
    Shape::Player {
        owner,
        infoset: usize::MAX,
        children,
    }
}

fn assign(
    rng: &mut ChaCha8Rng,
    params: &FamilyParams,
    shape: &mut Shape,
    level: usize,
    groups: &mut BTreeMap<(Player, usize, usize), Vec<usize>>,
    owners: &mut Vec<(Player, usize)>,
) {
    match shape {
        Shape::Leaf(_) => {}
        Shape::Chance(children) => {
            for (_, c) in children {
                assign(rng, params, c, level + 1, groups, owners);
            }
        }
        Shape::Player {
            owner,
            infoset,
            children,
        } => {
            let group = groups.entry((*owner, level, children.len())).or_default();
            let join = !group.is_empty() && rng.gen_range(0..100) < params.merge_percent;
            *infoset = if join {
                group[rng.gen_range(0..group.len())]
            } else {
                owners.push((*owner, children.len()));
                group.push(owners.len() - 1);
                owners.len() - 1
            };
            for c in children {
                assign(rng, params, c, level + 1, groups, owners);
            }
        }
    }
}

fn emit(g: &mut GameBuilder, shape: &Shape) -> NodeId {
    match shape {
        Shape::Leaf(p) => g.leaf(int(*p)),
        Shape::Chance(children) => {
            let total: i64 = children.iter().map(|(w, _)| w).sum();
            let kids: Vec<(Rational, NodeId)> = children
                .iter()
                .map(|(w, c)| (rational(*w, total), emit(g, c)))
                .collect();
            g.chance(kids)
        }
        Shape::Player {
            infoset, children, ..
        } => {
            let kids = children.iter().map(|c| emit(g, c)).collect();
            g.player(*infoset, kids)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RecallClass;
    use crate::seqsets::extract_histories;
    use crate::solver::solve_bruteforce;
    use proptest::prelude::*;

    #[test]
    fn pennies_classes_at_three() {
        let one = gen_pennies(PenniesVariant::I, 3).unwrap();
        assert_eq!(one.structure().leaves().len(), 12);
        let class = |g: &Game| g.structure().classify_recall(Player::Max).unwrap();
        assert_eq!(class(&one), RecallClass::AlrNotPfr);
        assert_eq!(class(&gen_pennies(PenniesVariant::II, 3).unwrap()), RecallClass::NamNotAlr);
        assert_eq!(class(&gen_pennies(PenniesVariant::III, 3).unwrap()), RecallClass::NamNotAlr);
        let h = extract_histories(one.structure(), None).unwrap();
        assert_eq!(h.len(), 4);
        let h2 = extract_histories(gen_pennies(PenniesVariant::II, 3).unwrap().structure(), None).unwrap();
        assert_eq!(h2.len(), 8);
    }

    #[test]
    fn pennies_value_formula() {
        for v in [PenniesVariant::I, PenniesVariant::II, PenniesVariant::III] {
            for n in 1..=6usize {
                let g = gen_pennies(v, n).unwrap();
                let best = n.div_ceil(2).max(n / 2) as i64;
                assert_eq!(solve_bruteforce(&g).unwrap().value, rational(best, n as i64), "{v} {n}");
            }
        }
    }

    #[test]
    fn lowerbound_sizes_and_shape() {
        assert_eq!(gen_lowerbound(1).unwrap().len(), 2);
        assert_eq!(gen_lowerbound(2).unwrap().len(), 8);
        for n in 2..=5 {
            let s = gen_lowerbound(n).unwrap();
            assert_eq!(s.len(), 2 * n + 2 * n * (n - 1));
            assert!(s.is_connected());
            assert!(s.covering_infosets().is_empty());
            let game = lowerbound_game(n).unwrap();
            assert_eq!(extract_histories(game.structure(), None).unwrap(), s);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let p = FamilyParams::random(42);
        let a = gen_random(&p).unwrap();
        let b = gen_random(&p).unwrap();
        assert_eq!(a.structure(), b.structure());
        assert_eq!(a.utility_map(), b.utility_map());
    }

    #[test]
    fn random_rejects_large_parameters() {
        let mut p = FamilyParams::random(1);
        p.depth = 9;
        assert!(gen_random(&p).is_err());
        p.depth = 3;
        p.branching = 4;
        assert!(gen_random(&p).is_err());
    }

    proptest! {
        #[test]
        fn random_games_are_never_absentminded(seed in any::<u64>(), merge in 0u32..=100, two in any::<bool>()) {
            let mut p = FamilyParams::random(seed);
            p.depth = 5;
            p.branching = 3;
            p.merge_percent = merge;
            p.two_player = two;
            let g = gen_random(&p).unwrap();
            for player in [Player::Max, Player::Min] {
                prop_assert!(g.structure().classify_recall(player).unwrap().is_nam());
            }
        }

        #[test]
        fn no_merging_gives_perfect_recall(seed in any::<u64>()) {
            let mut p = FamilyParams::random(seed);
            p.merge_percent = 0;
            p.two_player = true;
            let g = gen_random(&p).unwrap();
            for player in [Player::Max, Player::Min] {
                prop_assert_eq!(g.structure().classify_recall(player).unwrap(), RecallClass::Pfr);
            }
        }
    }
}
