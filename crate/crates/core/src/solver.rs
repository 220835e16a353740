//! Exact one-player solving: exhaustive pure strategies, backward induction
//! on the perfect-recall refinement of an ALR game, and the span pipeline for
//! everything else that is non-absentminded.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::model::{
    ActionId, Alphabet, Game, GameStructure, InfoSet, ModelError, Node, NodeId, Player,
    RecallClass,
};
use crate::polynomials::{payoff_polynomial, PolyError};
use crate::rational::Rational;
use crate::seqsets::{extract_histories, SeqError, Sequence};
use crate::span::{minimal_span, SpanError};
use crate::transform::{transfer_payoffs, TransformError};

/// Environment variable overriding the pure-strategy limit.
pub const MAX_PURE_ENV: &str = "RECALL_FORGE_MAX_PURE";
pub const DEFAULT_MAX_PURE: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("{count} pure strategies exceed the limit of {limit}")]
    TooManyStrategies { count: String, limit: u128 },
    #[error("expected a one-player game, found moves by {0}")]
    NotOnePlayer(String),
    #[error("{0} is absentminded")]
    Absentminded(Player),
    #[error("{player} has {class} recall, not A-loss recall")]
    NotAlr { player: Player, class: &'static str },
    #[error("strategy chooses {action} at infoset {infoset}, which does not offer it")]
    BadStrategy { infoset: String, action: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// One action per infoset, keyed by infoset index.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct PureStrategy {
    pub choice: BTreeMap<usize, ActionId>,
}

impl PureStrategy {
    /// The first action at every infoset.
    pub fn first_actions(alphabet: &Alphabet) -> Self {
        let choice = (0..alphabet.infoset_count())
            .map(|i| (i, alphabet.actions(i)[0]))
            .collect();
        PureStrategy { choice }
    }

    pub fn chooses(&self, alphabet: &Alphabet, a: ActionId) -> bool {
        self.choice.get(&alphabet.infoset_of(a)) == Some(&a)
    }

    pub fn check(&self, alphabet: &Alphabet) -> Result<(), SolveError> {
        for (&i, &a) in &self.choice {
            if alphabet.infoset_of(a) != i {
                return Err(SolveError::BadStrategy {
                    infoset: alphabet.infoset(i).id.clone(),
                    action: alphabet.label(a).to_string(),
                });
            }
        }
        Ok(())
    }

    /// `infoset: action` lines in file order.
    pub fn lines(&self, alphabet: &Alphabet) -> Vec<String> {
        self.choice
            .iter()
            .map(|(&i, &a)| format!("{}: {}", alphabet.infoset(i).id, alphabet.label(a)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Bruteforce,
    Refinement,
    SpanPipeline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bruteforce => "bruteforce",
            Method::Refinement => "refinement",
            Method::SpanPipeline => "span-pipeline",
        })
    }
}

/// What `solve` should do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Bruteforce,
    Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub value: Rational,
    pub strategy: PureStrategy,
    pub method: Method,
}

/// Expected payoff of a pure strategy, by walking the tree.
pub fn expected_payoff(game: &Game, strategy: &PureStrategy) -> Result<Rational, SolveError> {
    let s = game.structure();
    strategy.check(s.alphabet())?;
    let mut total = Rational::zero();
    let mut stack = vec![(s.root(), Rational::from_integer(1.into()))];
    while let Some((u, p)) = stack.pop() {
        match &s.nodes()[u] {
            Node::Leaf => total += p * game.utility(u).ok_or(ModelError::MissingUtility(u))?,
            Node::Chance { children } => {
                let dist = game.chance(u).expect("validated chance node");
                for (&c, q) in children.iter().zip(dist) {
                    stack.push((c, &p * q));
                }
            }
            Node::Player { infoset, children } => {
                let a = s.alphabet().actions(*infoset);
                let want = strategy.choice.get(infoset).copied().unwrap_or(a[0]);
                let pos = a.iter().position(|&x| x == want).expect("checked");
                stack.push((children[pos].1, p));
            }
        }
    }
    Ok(total)
}

fn single_player(structure: &GameStructure) -> Result<Player, SolveError> {
    let players = structure.active_players();
    if players.len() > 1 {
        return Err(SolveError::NotOnePlayer("both players".into()));
    }
    let player = players.into_iter().next().unwrap_or(Player::Max);
    if structure.is_absentminded(player) {
        return Err(SolveError::Absentminded(player));
    }
    Ok(player)
}

fn better(player: Player, candidate: &Rational, best: &Rational) -> bool {
    match player {
        Player::Max => candidate > best,
        Player::Min => candidate < best,
    }
}

/// The pure-strategy limit, read from the environment.
pub fn max_pure_strategies() -> u128 {
    std::env::var(MAX_PURE_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_PURE)
}

/// Enumerates every pure strategy over the infosets that have nodes. The
/// first infoset in file order is the most significant digit, so the first
/// optimum found is the lexicographically smallest.
pub fn solve_bruteforce(game: &Game) -> Result<SolveResult, SolveError> {
    let s = game.structure();
    let player = single_player(s)?;
    let alphabet = s.alphabet();
    let used: Vec<usize> = s
        .nodes_by_infoset()
        .iter()
        .enumerate()
        .filter(|(_, nodes)| !nodes.is_empty())
        .map(|(i, _)| i)
        .collect();
    let limit = max_pure_strategies();
    let mut count: u128 = 1;
    for &i in &used {
        count = count.saturating_mul(alphabet.actions(i).len() as u128);
    }
    if count > limit {
        let exact = used
            .iter()
            .map(|&i| num_bigint::BigUint::from(alphabet.actions(i).len()))
            .product::<num_bigint::BigUint>();
        return Err(SolveError::TooManyStrategies {
            count: exact.to_string(),
            limit,
        });
    }

    let poly = payoff_polynomial(game)?;
    let terms: Vec<(Vec<ActionId>, &Rational)> = poly
        .terms()
        .iter()
        .map(|(m, c)| (m.vars().to_vec(), c))
        .collect();
    let mut chosen = vec![false; alphabet.action_count()];
    let mut digits = vec![0usize; used.len()];
    for &i in &used {
        chosen[alphabet.actions(i)[0].index()] = true;
    }
    let mut best: Option<(Rational, Vec<usize>)> = None;
    loop {
        let value: Rational = terms
            .iter()
            .filter(|(vars, _)| vars.iter().all(|a| chosen[a.index()]))
            .map(|(_, c)| (*c).clone())
            .sum();
        if best.as_ref().map_or(true, |(b, _)| better(player, &value, b)) {
            best = Some((value, digits.clone()));
        }
        // Odometer step, least significant digit last.
        let mut k = used.len();
        loop {
            if k == 0 {
                let (value, digits) = best.expect("at least one strategy");
                let mut strategy = PureStrategy::first_actions(alphabet);
                for (&i, &d) in used.iter().zip(&digits) {
                    strategy.choice.insert(i, alphabet.actions(i)[d]);
                }
                return Ok(SolveResult {
                    value,
                    strategy,
                    method: Method::Bruteforce,
                });
            }
            k -= 1;
            let acts = alphabet.actions(used[k]);
            chosen[acts[digits[k]].index()] = false;
            digits[k] = (digits[k] + 1) % acts.len();
            chosen[acts[digits[k]].index()] = true;
            if digits[k] != 0 {
                break;
            }
        }
    }
}

/// A perfect-recall refinement together with its maps back to the input.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub structure: GameStructure,
    /// Refined infoset index to original infoset index.
    pub infoset_map: Vec<usize>,
    /// Refined action id (by index) to original action id.
    pub action_map: Vec<ActionId>,
}

/// Splits every infoset by its owner's history. Classes are numbered from 1
/// in pre-order of first appearance; an infoset with a single class keeps its
/// id and labels, otherwise ids and labels get a `/k` suffix.
pub fn refine_alr(structure: &GameStructure) -> Result<Refinement, SolveError> {
    for player in structure.active_players() {
        let class = structure.classify_recall(player)?;
        if class == RecallClass::Absentminded {
            return Err(SolveError::Absentminded(player));
        }
        if !class.is_alr() {
            return Err(SolveError::NotAlr {
                player,
                class: class.name(),
            });
        }
    }
    let alphabet = structure.alphabet();
    let mut classes: Vec<Vec<Sequence>> = vec![Vec::new(); alphabet.infoset_count()];
    let mut class_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for u in structure.preorder() {
        if let Node::Player { infoset, .. } = &structure.nodes()[u] {
            let owner = alphabet.infoset(*infoset).owner;
            let h = structure.history(u, Some(owner))?;
            let list = &mut classes[*infoset];
            let k = match list.iter().position(|x| *x == h) {
                Some(k) => k,
                None => {
                    list.push(h);
                    list.len() - 1
                }
            };
            class_of.insert(u, k);
        }
    }

    let mut infosets = Vec::new();
    let mut infoset_map = Vec::new();
    let mut action_map = Vec::new();
    // first refined index of each original infoset
    let mut base = Vec::with_capacity(alphabet.infoset_count());
    for (i, list) in classes.iter().enumerate() {
        let original = alphabet.infoset(i);
        base.push(infosets.len());
        if list.len() <= 1 {
            infosets.push(original.clone());
            infoset_map.push(i);
            action_map.extend(alphabet.actions(i).iter().copied());
            continue;
        }
        for k in 1..=list.len() {
            let labels: Vec<String> = original.actions.iter().map(|l| format!("{l}/{k}")).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            infosets.push(InfoSet::new(
                format!("{}/{k}", original.id),
                original.owner,
                &refs,
            ));
            infoset_map.push(i);
            action_map.extend(alphabet.actions(i).iter().copied());
        }
    }
    let nodes = structure
        .nodes()
        .iter()
        .enumerate()
        .map(|(u, node)| match node {
            Node::Player { infoset, children } => {
                let refined = base[*infoset] + class_of[&u];
                let labels = &infosets[refined].actions;
                Node::Player {
                    infoset: refined,
                    children: children
                        .iter()
                        .zip(labels)
                        .map(|((_, c), l)| (l.clone(), *c))
                        .collect(),
                }
            }
            other => other.clone(),
        })
        .collect();
    let structure = GameStructure::new(infosets, nodes, structure.root())?;
    Ok(Refinement {
        structure,
        infoset_map,
        action_map,
    })
}

/// Backward induction over the refinement's own-history tree, projected back
/// to the original infosets through the reachable refined classes.
pub fn solve_alr(game: &Game) -> Result<SolveResult, SolveError> {
    let player = single_player(game.structure())?;
    let refinement = refine_alr(game.structure())?;
    let rs = &refinement.structure;
    let refined = Game::new(
        rs.clone(),
        game.chance_map().clone(),
        game.utility_map().clone(),
    )?;

    let mut leaf_weight: BTreeMap<Sequence, Rational> = BTreeMap::new();
    for leaf in rs.leaves() {
        let w = refined.reach_probability(leaf)? * refined.utility(leaf).expect("leaf");
        *leaf_weight
            .entry(rs.history(leaf, Some(player))?)
            .or_insert_with(Rational::zero) += w;
    }
    let mut decisions: BTreeMap<Sequence, Vec<usize>> = BTreeMap::new();
    for (j, nodes) in rs.nodes_by_infoset().iter().enumerate() {
        if let Some(&u) = nodes.first() {
            decisions
                .entry(rs.history(u, Some(player))?)
                .or_default()
                .push(j);
        }
    }

    let mut refined_choice: BTreeMap<usize, ActionId> = BTreeMap::new();
    let value = induct(
        rs.alphabet(),
        player,
        &Sequence::empty(),
        &leaf_weight,
        &decisions,
        &mut refined_choice,
    );

    let ra = rs.alphabet();
    let original = game.structure().alphabet();
    let mut strategy = PureStrategy::first_actions(original);
    let mut fixed = vec![false; original.infoset_count()];
    for (sigma, infosets) in &decisions {
        let live = sigma
            .actions()
            .iter()
            .all(|&a| refined_choice.get(&ra.infoset_of(a)) == Some(&a));
        if !live {
            continue;
        }
        for &j in infosets {
            let i = refinement.infoset_map[j];
            if !fixed[i] {
                fixed[i] = true;
                strategy
                    .choice
                    .insert(i, refinement.action_map[refined_choice[&j].index()]);
            }
        }
    }
    Ok(SolveResult {
        value,
        strategy,
        method: Method::Refinement,
    })
}

fn induct(
    alphabet: &Alphabet,
    player: Player,
    sigma: &Sequence,
    leaf_weight: &BTreeMap<Sequence, Rational>,
    decisions: &BTreeMap<Sequence, Vec<usize>>,
    choice: &mut BTreeMap<usize, ActionId>,
) -> Rational {
    let mut total = leaf_weight.get(sigma).cloned().unwrap_or_else(Rational::zero);
    for &j in decisions.get(sigma).map(Vec::as_slice).unwrap_or(&[]) {
        let mut best: Option<(Rational, ActionId)> = None;
        for &a in alphabet.actions(j) {
            let next = Sequence::new(sigma.actions().iter().copied().chain([a]).collect());
            let v = induct(alphabet, player, &next, leaf_weight, decisions, choice);
            if best.as_ref().map_or(true, |(b, _)| better(player, &v, b)) {
                best = Some((v, a));
            }
        }
        let (v, a) = best.expect("infosets have actions");
        choice.insert(j, a);
        total += v;
    }
    total
}

/// Dispatches on `method`. With `Auto`, ALR games go to backward induction
/// and other non-absentminded games through their minimal span.
pub fn solve(game: &Game, method: SolveMethod) -> Result<SolveResult, SolveError> {
    let player = single_player(game.structure())?;
    match method {
        SolveMethod::Bruteforce => solve_bruteforce(game),
        SolveMethod::Span => solve_via_span(game),
        SolveMethod::Auto => {
            if game.structure().classify_recall(player)?.is_alr() {
                solve_alr(game)
            } else {
                solve_via_span(game)
            }
        }
    }
}

fn solve_via_span(game: &Game) -> Result<SolveResult, SolveError> {
    let histories = extract_histories(game.structure(), None)?;
    let certificate = minimal_span(&histories)?;
    let transformed = transfer_payoffs(game, &certificate)?;
    let inner = solve_alr(&transformed.game)?;
    let s = game.structure();
    let present = transformed.game.structure().nodes_by_infoset();
    let mut strategy = PureStrategy::first_actions(s.alphabet());
    for (i, nodes) in present.iter().enumerate() {
        if !nodes.is_empty() {
            strategy.choice.insert(i, inner.strategy.choice[&i]);
        }
    }
    Ok(SolveResult {
        value: inner.value,
        strategy,
        method: Method::SpanPipeline,
    })
}
