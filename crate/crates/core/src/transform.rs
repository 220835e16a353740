//! Turn span certificates into games: payoff transfer for one player and the
//! product construction for two players.
//!
//! Reconstructed structures use uniform chance. Each target leaf's payoff
//! divides its own chance weight back out, so the payoff polynomial is
//! preserved under strategy constraints whatever distribution is chosen.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::model::{Game, GameBuilder, GameStructure, ModelError, Node, NodeId, Player};
use crate::rational::{one, Rational};
use crate::seqsets::{extract_histories, SeqError, Sequence};
use crate::span::{structure_from_sequences, SpanCertificate, SpanError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("certificate does not match the game: {0}")]
    CertificateMismatch(String),
    #[error("target leaf {0} has zero chance weight")]
    ZeroWeight(NodeId),
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One source leaf's share in a target leaf's payoff.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contribution {
    pub source_leaf: NodeId,
    pub coefficient: Rational,
    pub chance_weight: Rational,
}

#[derive(Clone, Debug)]
pub struct TransformedGame {
    pub game: Game,
    pub provenance: SpanCertificate,
    /// The Min certificate of a two-player composition.
    pub min_provenance: Option<SpanCertificate>,
    pub payoff_trace: BTreeMap<NodeId, Vec<Contribution>>,
}

fn leaf_by_history(
    structure: &GameStructure,
    player: Option<Player>,
) -> Result<BTreeMap<Sequence, NodeId>, ModelError> {
    let mut map = BTreeMap::new();
    for leaf in structure.leaves() {
        map.insert(structure.history(leaf, player)?, leaf);
    }
    Ok(map)
}

/// Builds the span's structure and gives each target leaf
/// `U'(t') = Σ_t Prob(t) · c · U(t) / Prob'(t')`, summed over source leaves
/// whose certificate combination contains `t'`.
pub fn transfer_payoffs(
    source: &Game,
    certificate: &SpanCertificate,
) -> Result<TransformedGame, TransformError> {
    let histories = extract_histories(source.structure(), None)?;
    if histories != certificate.original {
        return Err(TransformError::CertificateMismatch(format!(
            "certificate covers {} but the game's histories are {}",
            certificate.original.display(),
            histories.display()
        )));
    }
    let target = Game::uniform(structure_from_sequences(&certificate.span)?)?;
    let ts = target.structure();
    let by_history = leaf_by_history(ts, None)?;

    let mut trace: BTreeMap<NodeId, Vec<Contribution>> = BTreeMap::new();
    let s = source.structure();
    for leaf in s.leaves() {
        let h = s.history(leaf, None)?;
        let weight = source.reach_probability(leaf)?;
        for word in combination(certificate, &h)? {
            let t = *by_history.get(word).ok_or_else(|| missing_word(certificate, word))?;
            trace.entry(t).or_default().push(Contribution {
                source_leaf: leaf,
                coefficient: one(),
                chance_weight: weight.clone(),
            });
        }
    }
    let game = assign_payoffs(source, target, &trace)?;
    Ok(TransformedGame {
        game,
        provenance: certificate.clone(),
        min_provenance: None,
        payoff_trace: trace,
    })
}

fn combination<'a>(
    cert: &'a SpanCertificate,
    h: &Sequence,
) -> Result<&'a BTreeSet<Sequence>, TransformError> {
    cert.combinations.get(h).ok_or_else(|| {
        TransformError::CertificateMismatch(format!(
            "no combination for {}",
            h.display(cert.original.alphabet())
        ))
    })
}

fn missing_word(cert: &SpanCertificate, word: &Sequence) -> TransformError {
    TransformError::CertificateMismatch(format!(
        "{} is not a leaf of the span",
        word.display(cert.span.alphabet())
    ))
}

fn assign_payoffs(
    source: &Game,
    target: Game,
    trace: &BTreeMap<NodeId, Vec<Contribution>>,
) -> Result<Game, TransformError> {
    let mut utility = target.utility_map().clone();
    for (&t, contributions) in trace {
        let prob = target.reach_probability(t)?;
        if prob.is_zero() {
            return Err(TransformError::ZeroWeight(t));
        }
        let total: Rational = contributions
            .iter()
            .map(|c| {
                &c.chance_weight * &c.coefficient * source.utility(c.source_leaf).expect("leaf")
            })
            .sum();
        utility.insert(t, total / prob);
    }
    Ok(Game::new(
        target.structure().clone(),
        target.chance_map().clone(),
        utility,
    )?)
}

/// Grafts a copy of the Min span's structure onto every leaf of the Max
/// span's structure. Min infosets are shared by all copies, and payoffs come
/// from products of the two certificates' combinations.
pub fn compose_two_player(
    source: &Game,
    span_max: &SpanCertificate,
    span_min: &SpanCertificate,
) -> Result<TransformedGame, TransformError> {
    let s = source.structure();
    for (player, cert) in [(Player::Max, span_max), (Player::Min, span_min)] {
        let projection = extract_histories(s, Some(player))?;
        if projection != cert.original {
            return Err(TransformError::CertificateMismatch(format!(
                "{player} certificate covers {} but the projection is {}",
                cert.original.display(),
                projection.display()
            )));
        }
    }
    let max_tree = structure_from_sequences(&span_max.span)?;
    let min_tree = structure_from_sequences(&span_min.span)?;

    let mut b = GameBuilder::with_alphabet(s.alphabet().clone());
    let root = graft(&mut b, &max_tree, max_tree.root(), &min_tree);
    let target = Game::uniform(b.build_structure(root)?)?;
    let ts = target.structure();

    let mut by_pair: BTreeMap<(Sequence, Sequence), NodeId> = BTreeMap::new();
    for leaf in ts.leaves() {
        by_pair.insert(
            (
                ts.history(leaf, Some(Player::Max))?,
                ts.history(leaf, Some(Player::Min))?,
            ),
            leaf,
        );
    }
    let mut trace: BTreeMap<NodeId, Vec<Contribution>> = BTreeMap::new();
    for leaf in s.leaves() {
        let hmax = s.history(leaf, Some(Player::Max))?;
        let hmin = s.history(leaf, Some(Player::Min))?;
        let weight = source.reach_probability(leaf)?;
        for x in combination(span_max, &hmax)? {
            for y in combination(span_min, &hmin)? {
                let t = *by_pair
                    .get(&(x.clone(), y.clone()))
                    .ok_or_else(|| missing_word(span_max, x))?;
                trace.entry(t).or_default().push(Contribution {
                    source_leaf: leaf,
                    coefficient: one(),
                    chance_weight: weight.clone(),
                });
            }
        }
    }
    let game = assign_payoffs(source, target, &trace)?;
    Ok(TransformedGame {
        game,
        provenance: span_max.clone(),
        min_provenance: Some(span_min.clone()),
        payoff_trace: trace,
    })
}

fn graft(b: &mut GameBuilder, upper: &GameStructure, u: NodeId, lower: &GameStructure) -> NodeId {
    match &upper.nodes()[u] {
        Node::Leaf => copy(b, lower, lower.root()),
        Node::Chance { children } => {
            let kids = children.iter().map(|&c| graft(b, upper, c, lower)).collect();
            b.uniform_chance(kids)
        }
        Node::Player { infoset, children } => {
            let kids = children
                .iter()
                .map(|(l, c)| (l.clone(), graft(b, upper, *c, lower)))
                .collect();
            b.player_labeled(*infoset, kids)
        }
    }
}

fn copy(b: &mut GameBuilder, s: &GameStructure, u: NodeId) -> NodeId {
    match &s.nodes()[u] {
        Node::Leaf => b.leaf(Rational::zero()),
        Node::Chance { children } => {
            let kids = children.iter().map(|&c| copy(b, s, c)).collect();
            b.uniform_chance(kids)
        }
        Node::Player { infoset, children } => {
            let kids = children
                .iter()
                .map(|(l, c)| (l.clone(), copy(b, s, *c)))
                .collect();
            b.player_labeled(*infoset, kids)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::{payoff_polynomial, poly_equal_under_constraints};
    use crate::rational::{int, rational};
    use crate::span::{minimal_span, verify_span};

    /// Chance (1/2, 1/2) to I1 {a,A} and I2 {b,B}; a, b lead to I3 {c,C},
    /// A, B lead to I4 {d,D}. Only the a-c leaf pays 1.
    fn fig4_game() -> Game {
        let mut g = GameBuilder::new();
        let i1 = g.infoset("I1", Player::Max, &["a", "A"]);
        let i2 = g.infoset("I2", Player::Max, &["b", "B"]);
        let i3 = g.infoset("I3", Player::Max, &["c", "C"]);
        let i4 = g.infoset("I4", Player::Max, &["d", "D"]);
        let pair = |g: &mut GameBuilder, info, first: i64| {
            let z1 = g.leaf(int(first));
            let z2 = g.leaf(int(0));
            g.player(info, vec![z1, z2])
        };
        let n1 = pair(&mut g, i3, 1);
        let n2 = pair(&mut g, i4, 0);
        let u1 = g.player(i1, vec![n1, n2]);
        let n3 = pair(&mut g, i3, 0);
        let n4 = pair(&mut g, i4, 0);
        let u2 = g.player(i2, vec![n3, n4]);
        let root = g.chance(vec![(rational(1, 2), u1), (rational(1, 2), u2)]);
        g.build(root).unwrap()
    }

    #[test]
    fn payoff_doubles_on_both_d_branches() {
        let game = fig4_game();
        let alpha = game.structure().alphabet().clone();
        let mut words = Vec::new();
        for x in ["c", "C"] {
            for y in ["d", "D"] {
                for z in ["a", "A", "b", "B"] {
                    words.push(format!("{x} {y} {z}"));
                }
            }
        }
        let refs: Vec<&str> = words.iter().map(|w| w.as_str()).collect();
        let span = crate::seqsets::SequenceSet::parse(alpha.clone(), &refs).unwrap();
        let original = extract_histories(game.structure(), None).unwrap();
        let cert = verify_span(&original, &span).unwrap().unwrap();
        let out = transfer_payoffs(&game, &cert).unwrap();
        let ts = out.game.structure();
        let by_history = leaf_by_history(ts, None).unwrap();
        for w in ["c d a", "c D a"] {
            let leaf = by_history[&Sequence::parse(&alpha, w).unwrap()];
            assert_eq!(out.game.utility(leaf), Some(&int(1)));
        }
        let p = payoff_polynomial(&game).unwrap();
        let q = payoff_polynomial(&out.game).unwrap();
        assert!(poly_equal_under_constraints(&p, &q).unwrap());
    }

    #[test]
    fn identity_certificate_keeps_polynomial() {
        let mut g = GameBuilder::new();
        let i = g.infoset("I", Player::Max, &["a", "b"]);
        let z1 = g.leaf(int(3));
        let z2 = g.leaf(rational(1, 2));
        let u = g.player(i, vec![z1, z2]);
        let z3 = g.leaf(int(-1));
        let root = g.chance(vec![(rational(1, 3), u), (rational(2, 3), z3)]);
        let game = g.build(root).unwrap();
        let h = extract_histories(game.structure(), None).unwrap();
        let cert = minimal_span(&h).unwrap();
        // The bare chance leaf is absorbed into both action leaves.
        assert_eq!(cert.span, h.without_empty());
        let out = transfer_payoffs(&game, &cert).unwrap();
        let p = payoff_polynomial(&game).unwrap();
        let q = payoff_polynomial(&out.game).unwrap();
        assert!(poly_equal_under_constraints(&p, &q).unwrap());
        assert_eq!(out.payoff_trace.len(), 2);
    }

    #[test]
    fn certificate_must_match() {
        let game = fig4_game();
        let mut g = GameBuilder::new();
        let i = g.infoset("I", Player::Max, &["a", "b"]);
        let z1 = g.leaf(int(0));
        let z2 = g.leaf(int(0));
        let root = g.player(i, vec![z1, z2]);
        let other = g.build(root).unwrap();
        let cert = minimal_span(&extract_histories(other.structure(), None).unwrap()).unwrap();
        assert!(matches!(
            transfer_payoffs(&game, &cert),
            Err(TransformError::CertificateMismatch(_))
        ));
    }
}
