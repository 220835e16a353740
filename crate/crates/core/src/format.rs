//! JSON documents for games and span certificates.
//!
//! Rationals are strings, either `"num/den"` or a plain integer. Nodes nest
//! inline, so a document reads top-down like the tree it describes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Alphabet, Game, GameBuilder, InfoSet, ModelError, Node, NodeId, Player};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::seqsets::{SeqError, Sequence, SequenceSet};
use crate::span::SpanCertificate;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Seq(#[from] SeqError),
}

fn field(path: &str, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfosetDoc {
    pub id: String,
    pub owner: String,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceEdge {
    pub prob: String,
    pub node: NodeDoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEdge {
    pub action: String,
    pub node: NodeDoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeDoc {
    Chance { children: Vec<ChanceEdge> },
    Player { infoset: String, children: Vec<ActionEdge> },
    Leaf { payoff: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub version: u32,
    pub players: Vec<String>,
    pub infosets: Vec<InfosetDoc>,
    pub root: NodeDoc,
}

fn infoset_docs(alphabet: &Alphabet) -> Vec<InfosetDoc> {
    alphabet
        .infosets()
        .iter()
        .map(|i| InfosetDoc {
            id: i.id.clone(),
            owner: i.owner.tag().to_string(),
            actions: i.actions.clone(),
        })
        .collect()
}

fn parse_infosets(docs: &[InfosetDoc]) -> Result<Vec<InfoSet>, FormatError> {
    docs.iter()
        .enumerate()
        .map(|(k, d)| {
            let owner = Player::from_tag(&d.owner).ok_or_else(|| {
                field(
                    &format!("infosets[{k}].owner"),
                    format!("unknown player {:?}", d.owner),
                )
            })?;
            let labels: Vec<&str> = d.actions.iter().map(String::as_str).collect();
            Ok(InfoSet::new(d.id.clone(), owner, &labels))
        })
        .collect()
}

impl GameDocument {
    pub fn from_game(game: &Game) -> Self {
        let s = game.structure();
        let mut players: Vec<String> = s
            .infosets()
            .iter()
            .map(|i| i.owner)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|p| p.tag().to_string())
            .collect();
        if players.is_empty() {
            players.push(Player::Max.tag().to_string());
        }
        GameDocument {
            version: FORMAT_VERSION,
            players,
            infosets: infoset_docs(s.alphabet()),
            root: node_doc(game, s.root()),
        }
    }

    pub fn to_game(&self) -> Result<Game, FormatError> {
        if self.version != FORMAT_VERSION {
            return Err(field(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        let mut players = BTreeSet::new();
        for (k, p) in self.players.iter().enumerate() {
            let player = Player::from_tag(p)
                .ok_or_else(|| field(&format!("players[{k}]"), format!("unknown player {p:?}")))?;
            players.insert(player);
        }
        let infosets = parse_infosets(&self.infosets)?;
        for (k, i) in infosets.iter().enumerate() {
            if !players.contains(&i.owner) {
                return Err(field(
                    &format!("infosets[{k}].owner"),
                    format!("{} is not listed in players", i.owner),
                ));
            }
        }
        let mut b = GameBuilder::with_infosets(infosets.clone());
        let by_id: BTreeMap<&str, usize> = infosets
            .iter()
            .enumerate()
            .map(|(k, i)| (i.id.as_str(), k))
            .collect();
        let root = build_node(&mut b, &infosets, &by_id, &self.root, "root")?;
        Ok(b.build(root)?)
    }
}

fn node_doc(game: &Game, u: NodeId) -> NodeDoc {
    let s = game.structure();
    match &s.nodes()[u] {
        Node::Leaf => NodeDoc::Leaf {
            payoff: format_rational(game.utility(u).expect("leaf utility")),
        },
        Node::Chance { children } => NodeDoc::Chance {
            children: children
                .iter()
                .zip(game.chance(u).expect("chance distribution"))
                .map(|(&c, p)| ChanceEdge {
                    prob: format_rational(p),
                    node: node_doc(game, c),
                })
                .collect(),
        },
        Node::Player { infoset, children } => NodeDoc::Player {
            infoset: s.alphabet().infoset(*infoset).id.clone(),
            children: children
                .iter()
                .map(|(l, c)| ActionEdge {
                    action: l.clone(),
                    node: node_doc(game, *c),
                })
                .collect(),
        },
    }
}

fn build_node(
    b: &mut GameBuilder,
    infosets: &[InfoSet],
    by_id: &BTreeMap<&str, usize>,
    doc: &NodeDoc,
    path: &str,
) -> Result<NodeId, FormatError> {
    match doc {
        NodeDoc::Leaf { payoff } => {
            let v = parse_rational(payoff).map_err(|e| field(&format!("{path}.payoff"), e.0))?;
            Ok(b.leaf(v))
        }
        NodeDoc::Chance { children } => {
            if children.is_empty() {
                return Err(field(path, "chance node has no children"));
            }
            let mut kids = Vec::with_capacity(children.len());
            let mut total = Rational::zero();
            for (k, edge) in children.iter().enumerate() {
                let p_path = format!("{path}.children[{k}]");
                let p = parse_rational(&edge.prob)
                    .map_err(|e| field(&format!("{p_path}.prob"), e.0))?;
                if p.is_negative() {
                    return Err(field(
                        &format!("{p_path}.prob"),
                        format!("negative probability {}", format_rational(&p)),
                    ));
                }
                total += &p;
                let c = build_node(b, infosets, by_id, &edge.node, &format!("{p_path}.node"))?;
                kids.push((p, c));
            }
            if !total.is_one() {
                return Err(field(
                    path,
                    format!(
                        "chance probabilities sum to {}, not 1",
                        format_rational(&total)
                    ),
                ));
            }
            Ok(b.chance(kids))
        }
        NodeDoc::Player { infoset, children } => {
            let &idx = by_id
                .get(infoset.as_str())
                .ok_or_else(|| field(&format!("{path}.infoset"), format!("unknown infoset {infoset:?}")))?;
            let expected = &infosets[idx].actions;
            let mut slots: Vec<Option<NodeId>> = vec![None; expected.len()];
            for (k, edge) in children.iter().enumerate() {
                let e_path = format!("{path}.children[{k}]");
                let pos = expected.iter().position(|l| *l == edge.action).ok_or_else(|| {
                    field(
                        &format!("{e_path}.action"),
                        format!("{:?} is not an action of infoset {infoset}", edge.action),
                    )
                })?;
                if slots[pos].is_some() {
                    return Err(field(
                        &format!("{e_path}.action"),
                        format!("action {:?} appears twice", edge.action),
                    ));
                }
                slots[pos] = Some(build_node(b, infosets, by_id, &edge.node, &format!("{e_path}.node"))?);
            }
            let mut kids = Vec::with_capacity(expected.len());
            for (label, slot) in expected.iter().zip(slots) {
                let c = slot.ok_or_else(|| field(path, format!("missing action {label:?}")))?;
                kids.push((label.clone(), c));
            }
            Ok(b.player_labeled(idx, kids))
        }
    }
}

pub fn parse_game(text: &str) -> Result<Game, FormatError> {
    let doc: GameDocument =
        serde_json::from_str(text).map_err(|e| FormatError::Syntax(e.to_string()))?;
    doc.to_game()
}

/// Pretty-printed JSON with a trailing newline.
pub fn serialize_game(game: &Game) -> String {
    let mut out = serde_json::to_string_pretty(&GameDocument::from_game(game))
        .expect("documents always serialize");
    out.push('\n');
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationDoc {
    pub sequence: String,
    pub span: Vec<String>,
}

/// Sequences are space-separated labels; the empty string is the empty
/// sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub version: u32,
    pub infosets: Vec<InfosetDoc>,
    pub original: Vec<String>,
    pub span: Vec<String>,
    pub combinations: Vec<CombinationDoc>,
}

fn words(set: &SequenceSet) -> Vec<String> {
    set.iter().map(|s| word(set.alphabet(), s)).collect()
}

fn word(alphabet: &Alphabet, s: &Sequence) -> String {
    s.labels(alphabet).join(" ")
}

pub fn serialize_certificate(cert: &SpanCertificate) -> String {
    let alphabet = cert.original.alphabet();
    let doc = CertificateDocument {
        version: FORMAT_VERSION,
        infosets: infoset_docs(alphabet),
        original: words(&cert.original),
        span: words(&cert.span),
        combinations: cert
            .combinations
            .iter()
            .map(|(s, c)| CombinationDoc {
                sequence: word(alphabet, s),
                span: c.iter().map(|t| word(alphabet, t)).collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("documents always serialize");
    out.push('\n');
    out
}

/// Parses a certificate over `alphabet`, which must list the same infosets.
/// Only the shape is checked here; replaying it through the span verifier is
/// up to the caller.
pub fn parse_certificate(
    text: &str,
    alphabet: &Arc<Alphabet>,
) -> Result<SpanCertificate, FormatError> {
    let doc: CertificateDocument =
        serde_json::from_str(text).map_err(|e| FormatError::Syntax(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(field(
            "version",
            format!("unsupported version {}", doc.version),
        ));
    }
    if parse_infosets(&doc.infosets)? != alphabet.infosets() {
        return Err(field("infosets", "infosets differ from the game's"));
    }
    let set = |name: &str, list: &[String]| -> Result<SequenceSet, FormatError> {
        let seqs = list
            .iter()
            .enumerate()
            .map(|(k, w)| {
                Sequence::parse(alphabet, w).map_err(|e| field(&format!("{name}[{k}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        SequenceSet::new(alphabet.clone(), seqs).map_err(|e| field(name, e.to_string()))
    };
    let original = set("original", &doc.original)?;
    let span = set("span", &doc.span)?;
    let mut combinations = BTreeMap::new();
    for (k, c) in doc.combinations.iter().enumerate() {
        let path = format!("combinations[{k}]");
        let s = Sequence::parse(alphabet, &c.sequence)
            .map_err(|e| field(&format!("{path}.sequence"), e.to_string()))?;
        if !original.contains(&s) {
            return Err(field(&format!("{path}.sequence"), "not an original sequence"));
        }
        let members = set(&format!("{path}.span"), &c.span)?;
        if let Some(t) = members.iter().find(|t| !span.contains(t)) {
            return Err(field(
                &format!("{path}.span"),
                format!("{} is not in the span", t.display(alphabet)),
            ));
        }
        combinations.insert(s, members.sequences().clone());
    }
    if let Some(s) = original.iter().find(|s| !combinations.contains_key(*s)) {
        return Err(field(
            "combinations",
            format!("no combination for {}", s.display(alphabet)),
        ));
    }
    Ok(SpanCertificate {
        original,
        span,
        combinations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_pennies, PenniesVariant};
    use crate::seqsets::extract_histories;
    use crate::span::minimal_span;

    #[test]
    fn pennies_round_trip() {
        for v in [PenniesVariant::I, PenniesVariant::II, PenniesVariant::III] {
            let game = gen_pennies(v, 3).unwrap();
            let text = serialize_game(&game);
            let back = parse_game(&text).unwrap();
            assert_eq!(back.structure(), game.structure());
            assert_eq!(back.chance_map(), game.chance_map());
            assert_eq!(back.utility_map(), game.utility_map());
            assert_eq!(serialize_game(&back), text);
        }
    }

    const BAD_CHANCE: &str = r#"{
      "version": 1, "players": ["max"], "infosets": [],
      "root": {"kind": "chance", "children": [
        {"prob": "1/2", "node": {"kind": "leaf", "payoff": "0"}},
        {"prob": "1/3", "node": {"kind": "leaf", "payoff": "1"}}
      ]}
    }"#;

    #[test]
    fn chance_sum_names_node() {
        let err = parse_game(BAD_CHANCE).unwrap_err().to_string();
        assert!(err.starts_with("root:"), "{err}");
        assert!(err.contains("5/6"), "{err}");
    }

    #[test]
    fn shared_action_is_reported() {
        let text = r#"{
          "version": 1, "players": ["max"],
          "infosets": [{"id": "I", "owner": "max", "actions": ["a", "b"]},
                       {"id": "J", "owner": "max", "actions": ["a", "c"]}],
          "root": {"kind": "player", "infoset": "I", "children": [
            {"action": "a", "node": {"kind": "leaf", "payoff": "0"}},
            {"action": "b", "node": {"kind": "player", "infoset": "J", "children": [
              {"action": "a", "node": {"kind": "leaf", "payoff": "0"}},
              {"action": "c", "node": {"kind": "leaf", "payoff": "0"}}]}}]}
        }"#;
        let err = parse_game(text).unwrap_err().to_string();
        assert!(err.contains("\"a\"") || err.contains(" a "), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_game("{\"version\": 1,\n \"players\": [max]}").unwrap_err();
        assert!(matches!(&err, FormatError::Syntax(m) if m.contains("line 2")), "{err}");
        let err = parse_game(r#"{"version": 1, "players": ["max"], "infosets": [], "root": {"kind": "leaf", "payoff": "x"}}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("root.payoff"), "{err}");
    }

    #[test]
    fn certificate_round_trip() {
        let game = gen_pennies(PenniesVariant::III, 3).unwrap();
        let h = extract_histories(game.structure(), None).unwrap();
        let cert = minimal_span(&h).unwrap();
        let text = serialize_certificate(&cert);
        let back = parse_certificate(&text, game.structure().alphabet()).unwrap();
        assert_eq!(back, cert);
        let other = gen_pennies(PenniesVariant::I, 3).unwrap();
        assert!(parse_certificate(&text, other.structure().alphabet()).is_err());
    }
}
