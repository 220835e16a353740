//! Game structures, games with exact chance and payoffs, validation and recall
//! classification.
//!
//! Structures are stored as a flat node arena. Anything produced by
//! [`GameBuilder`] is renumbered in pre-order with the root at index 0, so two
//! builds of the same tree compare equal with `==`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rational, Rational};
use crate::seqsets::Sequence;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Max,
    Min,
}

impl Player {
    pub fn tag(self) -> &'static str {
        match self {
            Player::Max => "max",
            Player::Min => "min",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Player> {
        match tag.to_ascii_lowercase().as_str() {
            "max" => Some(Player::Max),
            "min" => Some(Player::Min),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Index of an action label in an [`Alphabet`]. Ids follow file order
/// (infosets in order, then actions within each infoset).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfoSet {
    pub id: String,
    pub owner: Player,
    pub actions: Vec<String>,
}

impl InfoSet {
    pub fn new(id: impl Into<String>, owner: Player, actions: &[&str]) -> Self {
        InfoSet {
            id: id.into(),
            owner,
            actions: actions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

/// The action vocabulary of a game: which labels exist and which infoset owns
/// each of them. Sequence sets and polynomials carry a shared alphabet so they
/// can resolve labels and infosets without the tree.
#[derive(Debug)]
pub struct Alphabet {
    infosets: Vec<InfoSet>,
    labels: Vec<String>,
    infoset_of: Vec<usize>,
    actions_of: Vec<Vec<ActionId>>,
    by_label: HashMap<String, ActionId>,
    by_id: HashMap<String, usize>,
}

impl Alphabet {
    /// Builds the alphabet. Duplicate labels or ids keep their first
    /// occurrence for lookups; [`GameStructure::validate`] reports them.
    pub fn new(infosets: Vec<InfoSet>) -> Self {
        let mut labels = Vec::new();
        let mut infoset_of = Vec::new();
        let mut actions_of = Vec::with_capacity(infosets.len());
        let mut by_label = HashMap::new();
        let mut by_id = HashMap::new();
        for (idx, info) in infosets.iter().enumerate() {
            by_id.entry(info.id.clone()).or_insert(idx);
            let mut ids = Vec::with_capacity(info.actions.len());
            for label in &info.actions {
                let id = ActionId(labels.len() as u32);
                labels.push(label.clone());
                infoset_of.push(idx);
                by_label.entry(label.clone()).or_insert(id);
                ids.push(id);
            }
            actions_of.push(ids);
        }
        Alphabet {
            infosets,
            labels,
            infoset_of,
            actions_of,
            by_label,
            by_id,
        }
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    pub fn infoset(&self, idx: usize) -> &InfoSet {
        &self.infosets[idx]
    }

    pub fn infoset_count(&self) -> usize {
        self.infosets.len()
    }

    pub fn infoset_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn action(&self, label: &str) -> Option<ActionId> {
        self.by_label.get(label).copied()
    }

    pub fn label(&self, action: ActionId) -> &str {
        &self.labels[action.index()]
    }

    pub fn action_count(&self) -> usize {
        self.labels.len()
    }

    pub fn infoset_of(&self, action: ActionId) -> usize {
        self.infoset_of[action.index()]
    }

    pub fn owner_of(&self, action: ActionId) -> Player {
        self.infosets[self.infoset_of(action)].owner
    }

    pub fn actions(&self, infoset: usize) -> &[ActionId] {
        &self.actions_of[infoset]
    }

    /// The variable eliminated by strategy constraints (final in file order).
    pub fn last_action(&self, infoset: usize) -> ActionId {
        *self.actions_of[infoset]
            .last()
            .expect("infosets have at least one action")
    }

    pub fn same_as(&self, other: &Alphabet) -> bool {
        std::ptr::eq(self, other) || self.infosets == other.infosets
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl Eq for Alphabet {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Chance { children: Vec<NodeId> },
    Player { infoset: usize, children: Vec<(String, NodeId)> },
    Leaf,
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Chance { children } => children.clone(),
            Node::Player { children, .. } => children.iter().map(|(_, c)| *c).collect(),
            Node::Leaf => Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf)
    }
}

/// A broken structural invariant, reported by [`GameStructure::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RootOutOfRange { root: NodeId },
    RootHasParent { root: NodeId },
    DanglingChild { parent: NodeId, child: NodeId },
    MultipleParents { node: NodeId },
    Unreachable { node: NodeId },
    UnknownInfoset { node: NodeId, infoset: usize },
    DuplicateInfosetId { infoset: String },
    EmptyActions { infoset: String },
    EmptyLabel { infoset: String },
    DuplicateAction { label: String },
    ActionMismatch { infoset: String, node: NodeId },
    EmptyChance { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootOutOfRange { root } => write!(f, "root {root} is not a node"),
            Violation::RootHasParent { root } => write!(f, "root {root} has a parent"),
            Violation::DanglingChild { parent, child } => {
                write!(f, "node {parent} points to missing child {child}")
            }
            Violation::MultipleParents { node } => write!(f, "node {node} has several parents"),
            Violation::Unreachable { node } => write!(f, "node {node} is unreachable from the root"),
            Violation::UnknownInfoset { node, infoset } => {
                write!(f, "node {node} refers to unknown infoset #{infoset}")
            }
            Violation::DuplicateInfosetId { infoset } => {
                write!(f, "infoset id {infoset:?} is declared twice")
            }
            Violation::EmptyActions { infoset } => write!(f, "infoset {infoset:?} has no actions"),
            Violation::EmptyLabel { infoset } => {
                write!(f, "infoset {infoset:?} has an empty action label")
            }
            Violation::DuplicateAction { label } => {
                write!(f, "action label {label:?} is used more than once")
            }
            Violation::ActionMismatch { infoset, node } => write!(
                f,
                "node {node} in infoset {infoset:?} does not offer exactly the infoset's actions"
            ),
            Violation::EmptyChance { node } => write!(f, "chance node {node} has no children"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid game structure: {}", join_violations(.0))]
    InvalidStructure(Vec<Violation>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("chance node {node}: {reason}")]
    BadDistribution { node: NodeId, reason: String },
    #[error("leaf {0} has no utility")]
    MissingUtility(NodeId),
    #[error("node {0} is not a leaf but has a utility")]
    StrayUtility(NodeId),
    #[error("{0} is absentminded")]
    Absentminded(Player),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecallClass {
    Pfr,
    AlrNotPfr,
    NamNotAlr,
    Absentminded,
}

impl RecallClass {
    pub fn name(self) -> &'static str {
        match self {
            RecallClass::Pfr => "PFR",
            RecallClass::AlrNotPfr => "ALR_not_PFR",
            RecallClass::NamNotAlr => "NAM_not_ALR",
            RecallClass::Absentminded => "ABSENTMINDED",
        }
    }

    pub fn is_alr(self) -> bool {
        matches!(self, RecallClass::Pfr | RecallClass::AlrNotPfr)
    }

    pub fn is_nam(self) -> bool {
        self != RecallClass::Absentminded
    }
}

impl fmt::Display for RecallClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct GameStructure {
    alphabet: Arc<Alphabet>,
    nodes: Vec<Node>,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    edge_action: Vec<Option<ActionId>>,
}

impl PartialEq for GameStructure {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.nodes == other.nodes && *self.alphabet == *other.alphabet
    }
}

impl Eq for GameStructure {}

impl GameStructure {
    /// Assembles a structure without checking it. Use [`Self::validate`] to
    /// list violations, or [`Self::new`] to reject invalid input.
    pub fn from_parts(infosets: Vec<InfoSet>, nodes: Vec<Node>, root: NodeId) -> Self {
        Self::with_alphabet(Arc::new(Alphabet::new(infosets)), nodes, root)
    }

    pub fn with_alphabet(alphabet: Arc<Alphabet>, nodes: Vec<Node>, root: NodeId) -> Self {
        let mut parent = vec![None; nodes.len()];
        let mut edge_action = vec![None; nodes.len()];
        for (idx, node) in nodes.iter().enumerate() {
            match node {
                Node::Chance { children } => {
                    for &c in children {
                        if c < nodes.len() && parent[c].is_none() {
                            parent[c] = Some(idx);
                        }
                    }
                }
                Node::Player { children, .. } => {
                    for (label, c) in children {
                        if *c < nodes.len() && parent[*c].is_none() {
                            parent[*c] = Some(idx);
                            edge_action[*c] = alphabet.action(label);
                        }
                    }
                }
                Node::Leaf => {}
            }
        }
        GameStructure {
            alphabet,
            nodes,
            root,
            parent,
            edge_action,
        }
    }

    pub fn new(infosets: Vec<InfoSet>, nodes: Vec<Node>, root: NodeId) -> Result<Self, ModelError> {
        let s = Self::from_parts(infosets, nodes, root);
        let violations = s.validate();
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(ModelError::InvalidStructure(violations))
        }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn infosets(&self) -> &[InfoSet] {
        self.alphabet.infosets()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, ModelError> {
        self.nodes.get(id).ok_or(ModelError::UnknownNode(id))
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(id).copied().flatten()
    }

    /// Action on the edge into `id`, if that edge leaves a player node.
    pub fn edge_action(&self, id: NodeId) -> Option<ActionId> {
        self.edge_action.get(id).copied().flatten()
    }

    /// Every broken invariant, in a deterministic order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let alphabet = &self.alphabet;

        let mut seen_ids = HashSet::new();
        let mut label_count: BTreeMap<&str, usize> = BTreeMap::new();
        let mut label_order = Vec::new();
        for info in alphabet.infosets() {
            if !seen_ids.insert(info.id.as_str()) {
                out.push(Violation::DuplicateInfosetId {
                    infoset: info.id.clone(),
                });
            }
            if info.actions.is_empty() {
                out.push(Violation::EmptyActions {
                    infoset: info.id.clone(),
                });
            }
            for label in &info.actions {
                if label.is_empty() {
                    out.push(Violation::EmptyLabel {
                        infoset: info.id.clone(),
                    });
                }
                let count = label_count.entry(label.as_str()).or_insert(0);
                if *count == 0 {
                    label_order.push(label.as_str());
                }
                *count += 1;
            }
        }
        for label in label_order {
            if label_count[label] > 1 {
                out.push(Violation::DuplicateAction {
                    label: label.to_string(),
                });
            }
        }

        let n = self.nodes.len();
        if self.root >= n {
            out.push(Violation::RootOutOfRange { root: self.root });
            return out;
        }
        let mut parents = vec![0usize; n];
        for (idx, node) in self.nodes.iter().enumerate() {
            for c in node.children() {
                if c >= n {
                    out.push(Violation::DanglingChild { parent: idx, child: c });
                } else {
                    parents[c] += 1;
                }
            }
            match node {
                Node::Chance { children } if children.is_empty() => {
                    out.push(Violation::EmptyChance { node: idx });
                }
                Node::Player { infoset, children } => match alphabet.infosets().get(*infoset) {
                    None => out.push(Violation::UnknownInfoset {
                        node: idx,
                        infoset: *infoset,
                    }),
                    Some(info) => {
                        let offered: Vec<&str> = children.iter().map(|(l, _)| l.as_str()).collect();
                        let offered_set: BTreeSet<&str> = offered.iter().copied().collect();
                        let declared: BTreeSet<&str> =
                            info.actions.iter().map(|a| a.as_str()).collect();
                        if offered.len() != offered_set.len() || offered_set != declared {
                            out.push(Violation::ActionMismatch {
                                infoset: info.id.clone(),
                                node: idx,
                            });
                        }
                    }
                },
                _ => {}
            }
        }
        if parents[self.root] > 0 {
            out.push(Violation::RootHasParent { root: self.root });
        }
        for (idx, &count) in parents.iter().enumerate() {
            if count > 1 {
                out.push(Violation::MultipleParents { node: idx });
            }
        }
        let mut reached = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            if reached[u] {
                continue;
            }
            reached[u] = true;
            for c in self.nodes[u].children() {
                if c < n && !reached[c] {
                    stack.push(c);
                }
            }
        }
        for (idx, r) in reached.iter().enumerate() {
            if !r {
                out.push(Violation::Unreachable { node: idx });
            }
        }
        out
    }

    fn ensure_valid(&self) -> Result<(), ModelError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidStructure(violations))
        }
    }

    /// Node ids in pre-order (children in stored order).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            out.push(u);
            let children = self.nodes[u].children();
            for &c in children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&u| self.nodes[u].is_leaf())
            .collect()
    }

    /// Actions on the root-to-node path, chance edges skipped, optionally
    /// restricted to one player's actions.
    pub fn history(&self, node: NodeId, player: Option<Player>) -> Result<Sequence, ModelError> {
        if node >= self.nodes.len() {
            return Err(ModelError::UnknownNode(node));
        }
        let mut actions = Vec::new();
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            if let Some(a) = self.edge_action(cur) {
                if player.map_or(true, |pl| self.alphabet.owner_of(a) == pl) {
                    actions.push(a);
                }
            }
            cur = p;
        }
        actions.reverse();
        Ok(Sequence::new(actions))
    }

    /// Player nodes grouped by infoset, each group in pre-order.
    pub fn nodes_by_infoset(&self) -> Vec<Vec<NodeId>> {
        let mut groups = vec![Vec::new(); self.alphabet.infoset_count()];
        for u in self.preorder() {
            if let Node::Player { infoset, .. } = &self.nodes[u] {
                groups[*infoset].push(u);
            }
        }
        groups
    }

    /// Players owning at least one node.
    pub fn active_players(&self) -> BTreeSet<Player> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Player { infoset, .. } => Some(self.alphabet.infoset(*infoset).owner),
                _ => None,
            })
            .collect()
    }

    /// True when some node of `player` has a strict ancestor in the same
    /// infoset.
    pub fn is_absentminded(&self, player: Player) -> bool {
        fn walk(s: &GameStructure, u: NodeId, player: Player, on_path: &mut Vec<usize>) -> bool {
            let mut pushed = false;
            if let Node::Player { infoset, .. } = &s.nodes[u] {
                if s.alphabet.infoset(*infoset).owner == player {
                    if on_path.contains(infoset) {
                        return true;
                    }
                    on_path.push(*infoset);
                    pushed = true;
                }
            }
            let found = s.nodes[u]
                .children()
                .into_iter()
                .any(|c| walk(s, c, player, on_path));
            if pushed {
                on_path.pop();
            }
            found
        }
        walk(self, self.root, player, &mut Vec::new())
    }

    /// Finest recall class of `player` in this structure.
    pub fn classify_recall(&self, player: Player) -> Result<RecallClass, ModelError> {
        self.ensure_valid()?;
        if self.is_absentminded(player) {
            return Ok(RecallClass::Absentminded);
        }
        let mut pfr = true;
        for (idx, group) in self.nodes_by_infoset().into_iter().enumerate() {
            if self.alphabet.infoset(idx).owner != player {
                continue;
            }
            let histories: BTreeSet<Sequence> = group
                .iter()
                .map(|&u| self.history(u, Some(player)))
                .collect::<Result<_, _>>()?;
            if histories.len() <= 1 {
                continue;
            }
            pfr = false;
            let hs: Vec<&Sequence> = histories.iter().collect();
            for i in 0..hs.len() {
                for j in i + 1..hs.len() {
                    if !diverge_at_common_infoset(&self.alphabet, hs[i], hs[j]) {
                        return Ok(RecallClass::NamNotAlr);
                    }
                }
            }
        }
        Ok(if pfr {
            RecallClass::Pfr
        } else {
            RecallClass::AlrNotPfr
        })
    }
}

/// Whether `h1 = s a s1` and `h2 = s b s2` with `a != b` in one infoset.
fn diverge_at_common_infoset(alphabet: &Alphabet, h1: &Sequence, h2: &Sequence) -> bool {
    let (x, y) = (h1.actions(), h2.actions());
    let common = x.iter().zip(y).take_while(|(a, b)| a == b).count();
    match (x.get(common), y.get(common)) {
        (Some(&a), Some(&b)) => alphabet.infoset_of(a) == alphabet.infoset_of(b),
        _ => false,
    }
}

/// A structure with chance distributions and leaf utilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Game {
    structure: GameStructure,
    chance: BTreeMap<NodeId, Vec<Rational>>,
    utility: BTreeMap<NodeId, Rational>,
}

impl Game {
    pub fn new(
        structure: GameStructure,
        chance: BTreeMap<NodeId, Vec<Rational>>,
        utility: BTreeMap<NodeId, Rational>,
    ) -> Result<Self, ModelError> {
        structure.ensure_valid()?;
        for (idx, node) in structure.nodes().iter().enumerate() {
            match node {
                Node::Chance { children } => {
                    let dist = chance.get(&idx).ok_or_else(|| ModelError::BadDistribution {
                        node: idx,
                        reason: "missing distribution".into(),
                    })?;
                    if dist.len() != children.len() {
                        return Err(ModelError::BadDistribution {
                            node: idx,
                            reason: format!(
                                "{} probabilities for {} children",
                                dist.len(),
                                children.len()
                            ),
                        });
                    }
                    if let Some(p) = dist.iter().find(|p| p.is_negative()) {
                        return Err(ModelError::BadDistribution {
                            node: idx,
                            reason: format!("negative probability {}", format_rational(p)),
                        });
                    }
                    let total: Rational = dist.iter().cloned().sum();
                    if !total.is_one() {
                        return Err(ModelError::BadDistribution {
                            node: idx,
                            reason: format!("probabilities sum to {}", format_rational(&total)),
                        });
                    }
                }
                Node::Leaf => {
                    if !utility.contains_key(&idx) {
                        return Err(ModelError::MissingUtility(idx));
                    }
                }
                Node::Player { .. } => {}
            }
        }
        for &node in chance.keys() {
            if !matches!(structure.nodes().get(node), Some(Node::Chance { .. })) {
                return Err(ModelError::BadDistribution {
                    node,
                    reason: "not a chance node".into(),
                });
            }
        }
        for &node in utility.keys() {
            if !matches!(structure.nodes().get(node), Some(Node::Leaf)) {
                return Err(ModelError::StrayUtility(node));
            }
        }
        Ok(Game {
            structure,
            chance,
            utility,
        })
    }

    /// Attaches uniform chance and zero payoffs to a structure.
    pub fn uniform(structure: GameStructure) -> Result<Self, ModelError> {
        let mut chance = BTreeMap::new();
        let mut utility = BTreeMap::new();
        for (idx, node) in structure.nodes().iter().enumerate() {
            match node {
                Node::Chance { children } => {
                    let p = Rational::new(1.into(), (children.len().max(1) as i64).into());
                    chance.insert(idx, vec![p; children.len()]);
                }
                Node::Leaf => {
                    utility.insert(idx, Rational::zero());
                }
                Node::Player { .. } => {}
            }
        }
        Game::new(structure, chance, utility)
    }

    pub fn structure(&self) -> &GameStructure {
        &self.structure
    }

    pub fn chance(&self, node: NodeId) -> Option<&[Rational]> {
        self.chance.get(&node).map(|v| v.as_slice())
    }

    pub fn chance_map(&self) -> &BTreeMap<NodeId, Vec<Rational>> {
        &self.chance
    }

    pub fn utility(&self, leaf: NodeId) -> Option<&Rational> {
        self.utility.get(&leaf)
    }

    pub fn utility_map(&self) -> &BTreeMap<NodeId, Rational> {
        &self.utility
    }

    /// Product of chance probabilities on the root-to-node path.
    pub fn reach_probability(&self, node: NodeId) -> Result<Rational, ModelError> {
        self.structure.node(node)?;
        let mut prob = Rational::one();
        let mut cur = node;
        while let Some(p) = self.structure.parent(cur) {
            if let Node::Chance { children } = &self.structure.nodes()[p] {
                let pos = children.iter().position(|&c| c == cur).expect("child of parent");
                prob *= &self.chance[&p][pos];
            }
            cur = p;
        }
        Ok(prob)
    }

    /// Merges chance nodes whose parent is a chance node into the parent,
    /// multiplying probabilities. Leaf histories and payoffs are unchanged.
    pub fn absorb_chance_chains(&self) -> Game {
        let s = &self.structure;
        let mut b = GameBuilder::with_alphabet(s.alphabet().clone());
        fn copy(g: &Game, u: NodeId, b: &mut GameBuilder) -> NodeId {
            let s = g.structure();
            match &s.nodes()[u] {
                Node::Leaf => b.leaf(g.utility[&u].clone()),
                Node::Player { infoset, children } => {
                    let kids = children
                        .iter()
                        .map(|(l, c)| (l.clone(), copy(g, *c, b)))
                        .collect();
                    b.player_labeled(*infoset, kids)
                }
                Node::Chance { .. } => {
                    let mut flat = Vec::new();
                    flatten(g, u, Rational::one(), &mut flat);
                    let kids = flat
                        .into_iter()
                        .map(|(p, c)| (p, copy(g, c, b)))
                        .collect();
                    b.chance(kids)
                }
            }
        }
        fn flatten(g: &Game, u: NodeId, weight: Rational, out: &mut Vec<(Rational, NodeId)>) {
            let Node::Chance { children } = &g.structure().nodes()[u] else {
                out.push((weight, u));
                return;
            };
            for (i, &c) in children.iter().enumerate() {
                let w = &weight * &g.chance[&u][i];
                if matches!(g.structure().nodes()[c], Node::Chance { .. }) {
                    flatten(g, c, w, out);
                } else {
                    out.push((w, c));
                }
            }
        }
        let root = copy(self, s.root(), &mut b);
        b.build(root).expect("absorbing chance chains preserves validity")
    }
}

/// Incremental bottom-up construction of games and structures. Children must
/// be created before their parents; `build` renumbers in pre-order.
#[derive(Clone, Debug, Default)]
pub struct GameBuilder {
    shared: Option<Arc<Alphabet>>,
    infosets: Vec<InfoSet>,
    nodes: Vec<Node>,
    chance: BTreeMap<NodeId, Vec<Rational>>,
    utility: BTreeMap<NodeId, Rational>,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_infosets(infosets: Vec<InfoSet>) -> Self {
        GameBuilder {
            infosets,
            ..Self::default()
        }
    }

    /// Reuses an existing alphabet so the built structure shares it.
    pub fn with_alphabet(alphabet: Arc<Alphabet>) -> Self {
        GameBuilder {
            infosets: alphabet.infosets().to_vec(),
            shared: Some(alphabet),
            ..Self::default()
        }
    }

    pub fn infoset(&mut self, id: &str, owner: Player, actions: &[&str]) -> usize {
        self.shared = None;
        self.infosets.push(InfoSet::new(id, owner, actions));
        self.infosets.len() - 1
    }

    pub fn leaf(&mut self, payoff: Rational) -> NodeId {
        self.nodes.push(Node::Leaf);
        let id = self.nodes.len() - 1;
        self.utility.insert(id, payoff);
        id
    }

    pub fn chance(&mut self, children: Vec<(Rational, NodeId)>) -> NodeId {
        let (probs, kids): (Vec<_>, Vec<_>) = children.into_iter().unzip();
        self.nodes.push(Node::Chance { children: kids });
        let id = self.nodes.len() - 1;
        self.chance.insert(id, probs);
        id
    }

    pub fn uniform_chance(&mut self, children: Vec<NodeId>) -> NodeId {
        let p = Rational::new(1.into(), (children.len().max(1) as i64).into());
        self.chance(children.into_iter().map(|c| (p.clone(), c)).collect())
    }

    /// Player node whose children follow the infoset's action order.
    pub fn player(&mut self, infoset: usize, children: Vec<NodeId>) -> NodeId {
        let labels = self.infosets[infoset].actions.clone();
        assert_eq!(labels.len(), children.len(), "one child per action");
        self.player_labeled(infoset, labels.into_iter().zip(children).collect())
    }

    pub fn player_labeled(&mut self, infoset: usize, children: Vec<(String, NodeId)>) -> NodeId {
        self.nodes.push(Node::Player { infoset, children });
        self.nodes.len() - 1
    }

    pub fn build(self, root: NodeId) -> Result<Game, ModelError> {
        let alphabet = match self.shared {
            Some(a) => a,
            None => Arc::new(Alphabet::new(self.infosets)),
        };
        let raw = GameStructure::with_alphabet(alphabet, self.nodes, root);
        raw.ensure_valid()?;
        let order = raw.preorder();
        let mut new_id = vec![0usize; raw.nodes().len()];
        for (i, &u) in order.iter().enumerate() {
            new_id[u] = i;
        }
        let nodes = order
            .iter()
            .map(|&u| match &raw.nodes()[u] {
                Node::Leaf => Node::Leaf,
                Node::Chance { children } => Node::Chance {
                    children: children.iter().map(|&c| new_id[c]).collect(),
                },
                Node::Player { infoset, children } => Node::Player {
                    infoset: *infoset,
                    children: children.iter().map(|(l, c)| (l.clone(), new_id[*c])).collect(),
                },
            })
            .collect();
        let structure = GameStructure::with_alphabet(raw.alphabet().clone(), nodes, 0);
        let chance = self.chance.into_iter().map(|(k, v)| (new_id[k], v)).collect();
        let utility = self.utility.into_iter().map(|(k, v)| (new_id[k], v)).collect();
        Game::new(structure, chance, utility)
    }

    pub fn build_structure(self, root: NodeId) -> Result<GameStructure, ModelError> {
        Ok(self.build(root)?.structure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rational};

    /// Root in {a,b}; a leads through chance to two nodes in {c,d}, b through
    /// chance to two nodes in {e,f}.
    fn perfect_recall_example() -> (GameStructure, NodeId) {
        let mut b = GameBuilder::new();
        let i1 = b.infoset("I1", Player::Max, &["a", "b"]);
        let i2 = b.infoset("I2", Player::Max, &["c", "d"]);
        let i3 = b.infoset("I3", Player::Max, &["e", "f"]);
        let chance_kids = |b: &mut GameBuilder, info| {
            let mut kids = Vec::new();
            for _ in 0..2 {
                let l1 = b.leaf(int(0));
                let l2 = b.leaf(int(0));
                kids.push(b.player(info, vec![l1, l2]));
            }
            b.uniform_chance(kids)
        };
        let u1 = chance_kids(&mut b, i2);
        let u2 = chance_kids(&mut b, i3);
        let r = b.player(i1, vec![u1, u2]);
        let s = b.build_structure(r).unwrap();
        // pre-order: r=0, u1=1, first I2 node=2
        (s, 2)
    }

    #[test]
    fn history_skips_chance_and_filters_player() {
        let (s, u3) = perfect_recall_example();
        let h = s.history(u3, Some(Player::Max)).unwrap();
        assert_eq!(h.labels(s.alphabet()), vec!["a"]);
        assert!(s.history(s.root(), None).unwrap().is_empty());
        assert!(s.history(999, None).is_err());
        assert!(s.history(u3, Some(Player::Min)).unwrap().is_empty());
    }

    #[test]
    fn classifies_perfect_recall() {
        let (s, _) = perfect_recall_example();
        assert_eq!(s.classify_recall(Player::Max).unwrap(), RecallClass::Pfr);
        assert_eq!(s.classify_recall(Player::Min).unwrap(), RecallClass::Pfr);
    }

    #[test]
    fn classifies_absentminded() {
        let mut b = GameBuilder::new();
        let i = b.infoset("I1", Player::Max, &["a", "b"]);
        let z1 = b.leaf(int(0));
        let z2 = b.leaf(int(1));
        let u1 = b.player(i, vec![z1, z2]);
        let z3 = b.leaf(int(0));
        let r = b.player(i, vec![u1, z3]);
        let s = b.build_structure(r).unwrap();
        assert_eq!(s.classify_recall(Player::Max).unwrap(), RecallClass::Absentminded);
    }

    #[test]
    fn single_leaf_is_perfect_recall() {
        let mut b = GameBuilder::new();
        let z = b.leaf(int(3));
        let s = b.build_structure(z).unwrap();
        assert_eq!(s.classify_recall(Player::Max).unwrap(), RecallClass::Pfr);
    }

    #[test]
    fn mismatched_action_sets_report_the_infoset() {
        let infosets = vec![InfoSet::new("I", Player::Max, &["a", "b"])];
        let nodes = vec![
            Node::Chance { children: vec![1, 2] },
            Node::Player {
                infoset: 0,
                children: vec![("a".into(), 3), ("b".into(), 4)],
            },
            Node::Player {
                infoset: 0,
                children: vec![("a".into(), 5)],
            },
            Node::Leaf,
            Node::Leaf,
            Node::Leaf,
        ];
        let v = GameStructure::from_parts(infosets, nodes, 0).validate();
        assert_eq!(
            v,
            vec![Violation::ActionMismatch {
                infoset: "I".into(),
                node: 2
            }]
        );
    }

    #[test]
    fn reused_label_is_reported_once() {
        let infosets = vec![
            InfoSet::new("I", Player::Max, &["H", "T"]),
            InfoSet::new("J", Player::Max, &["H", "X"]),
        ];
        let nodes = vec![
            Node::Player {
                infoset: 0,
                children: vec![("H".into(), 1), ("T".into(), 2)],
            },
            Node::Player {
                infoset: 1,
                children: vec![("H".into(), 3), ("X".into(), 4)],
            },
            Node::Leaf,
            Node::Leaf,
            Node::Leaf,
        ];
        let v = GameStructure::from_parts(infosets, nodes, 0).validate();
        assert_eq!(v, vec![Violation::DuplicateAction { label: "H".into() }]);
    }

    #[test]
    fn tree_violations() {
        let infosets = vec![];
        let nodes = vec![
            Node::Chance { children: vec![1, 1, 7] },
            Node::Leaf,
            Node::Leaf,
            Node::Chance { children: vec![] },
        ];
        let v = GameStructure::from_parts(infosets, nodes, 0).validate();
        assert!(v.contains(&Violation::DanglingChild { parent: 0, child: 7 }));
        assert!(v.contains(&Violation::MultipleParents { node: 1 }));
        assert!(v.contains(&Violation::Unreachable { node: 2 }));
        assert!(v.contains(&Violation::EmptyChance { node: 3 }));
    }

    #[test]
    fn distributions_must_sum_to_one() {
        let mut b = GameBuilder::new();
        let z1 = b.leaf(int(0));
        let z2 = b.leaf(int(0));
        let c = b.chance(vec![(rational(1, 2), z1), (rational(1, 3), z2)]);
        assert!(matches!(b.build(c), Err(ModelError::BadDistribution { node: 0, .. })));
    }

    #[test]
    fn chance_chains_are_absorbed() {
        let mut b = GameBuilder::new();
        let i = b.infoset("I", Player::Max, &["a", "b"]);
        let z1 = b.leaf(int(1));
        let z2 = b.leaf(int(2));
        let u = b.player(i, vec![z1, z2]);
        let z3 = b.leaf(int(5));
        let inner = b.chance(vec![(rational(1, 3), u), (rational(2, 3), z3)]);
        let z4 = b.leaf(int(7));
        let root = b.chance(vec![(rational(1, 2), inner), (rational(1, 2), z4)]);
        let g = b.build(root).unwrap();
        let flat = g.absorb_chance_chains();
        assert_eq!(flat.chance(0).unwrap(), &[rational(1, 6), rational(1, 3), rational(1, 2)]);
        let before: Vec<_> = g
            .structure()
            .leaves()
            .iter()
            .map(|&l| (g.reach_probability(l).unwrap(), g.utility(l).cloned()))
            .collect();
        let after: Vec<_> = flat
            .structure()
            .leaves()
            .iter()
            .map(|&l| (flat.reach_probability(l).unwrap(), flat.utility(l).cloned()))
            .collect();
        assert_eq!(before, after);
    }
}
