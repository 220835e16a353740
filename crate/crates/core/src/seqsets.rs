//! Sequence sets: connectivity, the recursive A-loss-recall test, quotients and
//! strongly branching subsets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::model::{ActionId, Alphabet, GameStructure, ModelError, Player};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SeqError {
    #[error("sequence {0} visits infoset {1:?} twice")]
    RepeatedInfoset(String, String),
    #[error("action id {0} is not in the alphabet")]
    UnknownActionId(u32),
    #[error("unknown action label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A word over action ids. Sequences extracted from non-absentminded
/// structures hold at most one action per infoset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<ActionId>);

impl Sequence {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Sequence(actions)
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, a: ActionId) -> bool {
        self.0.contains(&a)
    }

    pub fn first(&self) -> Option<ActionId> {
        self.0.first().copied()
    }

    /// Drops every occurrence of the given actions, keeping order.
    pub fn without(&self, drop: &[ActionId]) -> Sequence {
        Sequence(self.0.iter().copied().filter(|a| !drop.contains(a)).collect())
    }

    pub fn prepend(&self, a: ActionId) -> Sequence {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(a);
        v.extend_from_slice(&self.0);
        Sequence(v)
    }

    pub fn concat(&self, other: &Sequence) -> Sequence {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Sequence(v)
    }

    /// The tail after the first action.
    pub fn tail(&self) -> Sequence {
        Sequence(self.0.get(1..).unwrap_or_default().to_vec())
    }

    pub fn labels<'a>(&self, alphabet: &'a Alphabet) -> Vec<&'a str> {
        self.0.iter().map(|&a| alphabet.label(a)).collect()
    }

    /// Space-separated labels, or `ε` for the empty sequence.
    pub fn display(&self, alphabet: &Alphabet) -> String {
        if self.0.is_empty() {
            "ε".to_string()
        } else {
            self.labels(alphabet).join(" ")
        }
    }

    /// Parses space-separated labels. `ε` or blank text is the empty sequence.
    pub fn parse(alphabet: &Alphabet, text: &str) -> Result<Sequence, SeqError> {
        let mut v = Vec::new();
        for tok in text.split_whitespace() {
            if tok == "ε" {
                continue;
            }
            v.push(
                alphabet
                    .action(tok)
                    .ok_or_else(|| SeqError::UnknownLabel(tok.to_string()))?,
            );
        }
        Ok(Sequence(v))
    }

    fn check(&self, alphabet: &Alphabet) -> Result<(), SeqError> {
        let mut seen = Vec::with_capacity(self.0.len());
        for &a in &self.0 {
            if a.index() >= alphabet.action_count() {
                return Err(SeqError::UnknownActionId(a.0));
            }
            let info = alphabet.infoset_of(a);
            if seen.contains(&info) {
                return Err(SeqError::RepeatedInfoset(
                    self.display(alphabet),
                    alphabet.infoset(info).id.clone(),
                ));
            }
            seen.push(info);
        }
        Ok(())
    }
}

/// A deduplicated set of sequences over a shared alphabet.
#[derive(Clone, Debug)]
pub struct SequenceSet {
    alphabet: Arc<Alphabet>,
    seqs: BTreeSet<Sequence>,
}

impl PartialEq for SequenceSet {
    fn eq(&self, other: &Self) -> bool {
        self.seqs == other.seqs && self.alphabet.same_as(&other.alphabet)
    }
}

impl Eq for SequenceSet {}

impl SequenceSet {
    pub fn new(
        alphabet: Arc<Alphabet>,
        seqs: impl IntoIterator<Item = Sequence>,
    ) -> Result<Self, SeqError> {
        let seqs: BTreeSet<Sequence> = seqs.into_iter().collect();
        for s in &seqs {
            s.check(&alphabet)?;
        }
        Ok(SequenceSet { alphabet, seqs })
    }

    pub fn empty(alphabet: Arc<Alphabet>) -> Self {
        SequenceSet {
            alphabet,
            seqs: BTreeSet::new(),
        }
    }

    /// Parses each entry with [`Sequence::parse`].
    pub fn parse(alphabet: Arc<Alphabet>, words: &[&str]) -> Result<Self, SeqError> {
        let seqs = words
            .iter()
            .map(|w| Sequence::parse(&alphabet, w))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(alphabet, seqs)
    }

    /// Same alphabet, new contents. Callers guarantee the sequence invariant.
    pub(crate) fn derive(&self, seqs: BTreeSet<Sequence>) -> SequenceSet {
        SequenceSet {
            alphabet: self.alphabet.clone(),
            seqs,
        }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn sequences(&self) -> &BTreeSet<Sequence> {
        &self.seqs
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sequence> {
        self.seqs.iter()
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn contains(&self, s: &Sequence) -> bool {
        self.seqs.contains(s)
    }

    pub fn contains_empty(&self) -> bool {
        self.seqs.contains(&Sequence::empty())
    }

    pub fn is_epsilon(&self) -> bool {
        self.seqs.len() == 1 && self.contains_empty()
    }

    pub fn without_empty(&self) -> SequenceSet {
        let mut seqs = self.seqs.clone();
        seqs.remove(&Sequence::empty());
        self.derive(seqs)
    }

    pub fn union(&self, other: &SequenceSet) -> SequenceSet {
        let mut seqs = self.seqs.clone();
        seqs.extend(other.seqs.iter().cloned());
        self.derive(seqs)
    }

    /// Prefixes every sequence with `a`.
    pub fn prefixed(&self, a: ActionId) -> SequenceSet {
        self.derive(self.seqs.iter().map(|s| s.prepend(a)).collect())
    }

    /// Infosets touched by some sequence, in file order.
    pub fn infosets_present(&self) -> BTreeSet<usize> {
        self.seqs
            .iter()
            .flat_map(|s| s.actions().iter().map(|&a| self.alphabet.infoset_of(a)))
            .collect()
    }

    /// Infosets with an action in every sequence, in file order.
    pub fn covering_infosets(&self) -> Vec<usize> {
        if self.seqs.is_empty() {
            return Vec::new();
        }
        let mut count: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &self.seqs {
            for &a in s.actions() {
                *count.entry(self.alphabet.infoset_of(a)).or_default() += 1;
            }
        }
        count
            .into_iter()
            .filter(|&(_, c)| c == self.seqs.len())
            .map(|(i, _)| i)
            .collect()
    }

    /// The infoset whose actions open every sequence, if there is one.
    pub fn leading_infoset(&self) -> Option<usize> {
        let mut lead = None;
        for s in &self.seqs {
            let info = self.alphabet.infoset_of(s.first()?);
            match lead {
                None => lead = Some(info),
                Some(l) if l != info => return None,
                _ => {}
            }
        }
        lead
    }

    pub fn display(&self) -> String {
        let parts: Vec<String> = self.seqs.iter().map(|s| s.display(&self.alphabet)).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Maximal connected components in set order. Two sequences are connected
    /// when they touch a common infoset; the empty sequence stands alone.
    pub fn components(&self) -> Vec<SequenceSet> {
        let n = self.alphabet.infoset_count();
        let mut uf = UnionFind::<usize>::new(n.max(1));
        for s in &self.seqs {
            let mut it = s.actions().iter().map(|&a| self.alphabet.infoset_of(a));
            if let Some(first) = it.next() {
                for other in it {
                    uf.union(first, other);
                }
            }
        }
        let mut groups: Vec<BTreeSet<Sequence>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for s in &self.seqs {
            match s.first() {
                None => groups.push(BTreeSet::from([s.clone()])),
                Some(a) => {
                    let root = uf.find(self.alphabet.infoset_of(a));
                    let idx = *slot.entry(root).or_insert_with(|| {
                        groups.push(BTreeSet::new());
                        groups.len() - 1
                    });
                    groups[idx].insert(s.clone());
                }
            }
        }
        groups.into_iter().map(|g| self.derive(g)).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// The recursive A-loss-recall test on sets. The empty set passes.
    pub fn is_alr_set(&self) -> bool {
        if self.seqs.len() <= 1 {
            return true;
        }
        let comps = self.components();
        if comps.len() > 1 {
            return comps.iter().all(|c| c.is_alr_set());
        }
        let Some(lead) = self.leading_infoset() else {
            return false;
        };
        self.alphabet
            .actions(lead)
            .iter()
            .all(|&a| self.continuations(a).is_alr_set())
    }

    /// `{u | a u ∈ S}`.
    pub fn continuations(&self, a: ActionId) -> SequenceSet {
        self.derive(
            self.seqs
                .iter()
                .filter(|s| s.first() == Some(a))
                .map(|s| s.tail())
                .collect(),
        )
    }

    /// ALR and every player split offers all actions of its infoset, so the
    /// set is exactly the leaf histories of some structure.
    pub fn is_structure_realizable(&self) -> bool {
        if self.seqs.is_empty() {
            return false;
        }
        if self.seqs.len() == 1 && self.contains_empty() {
            return true;
        }
        let comps = self.components();
        if comps.len() > 1 {
            return comps.iter().all(|c| c.is_structure_realizable());
        }
        let Some(lead) = self.leading_infoset() else {
            return false;
        };
        self.alphabet.actions(lead).iter().all(|&a| {
            let cont = self.continuations(a);
            cont.is_structure_realizable()
        })
    }

    /// `S_a`: sequences containing `a`, with `a` removed.
    pub fn quotient_by_action(&self, a: ActionId) -> SequenceSet {
        self.derive(
            self.seqs
                .iter()
                .filter(|s| s.contains(a))
                .map(|s| s.without(&[a]))
                .collect(),
        )
    }

    /// `S_{bar I}`: sequences with no action of the infoset.
    pub fn residual_without_infoset(&self, infoset: usize) -> SequenceSet {
        self.derive(
            self.seqs
                .iter()
                .filter(|s| {
                    s.actions()
                        .iter()
                        .all(|&a| self.alphabet.infoset_of(a) != infoset)
                })
                .cloned()
                .collect(),
        )
    }

    /// Whether the set splits as a disjoint union of `a · S_a` over all actions
    /// of one infoset with every `S_a` strongly branching. Positions of `a`
    /// inside the words do not matter, only the monomials do.
    pub fn is_strongly_branching(&self) -> bool {
        let mut memo = HashMap::new();
        strongly_branching(&self.alphabet, &self.seqs, &mut memo)
    }

    /// A strongly branching subset, searched with the empty sequence first and
    /// then infosets and actions in file order.
    pub fn find_strongly_branching_subset(&self) -> Option<SequenceSet> {
        BranchingSearch::new(self.alphabet.clone())
            .find(&self.seqs)
            .map(|found| self.derive(found))
    }
}

/// Sequences containing `a`, keyed by their quotient. Words that collapse to
/// the same quotient keep the first original.
fn split_by_action(seqs: &BTreeSet<Sequence>, a: ActionId) -> BTreeMap<Sequence, Sequence> {
    let mut out = BTreeMap::new();
    for s in seqs {
        if s.contains(a) {
            out.entry(s.without(&[a])).or_insert_with(|| s.clone());
        }
    }
    out
}

fn strongly_branching(
    alphabet: &Alphabet,
    seqs: &BTreeSet<Sequence>,
    memo: &mut HashMap<BTreeSet<Sequence>, bool>,
) -> bool {
    if seqs.len() == 1 && seqs.contains(&Sequence::empty()) {
        return true;
    }
    if seqs.is_empty() || seqs.contains(&Sequence::empty()) {
        return false;
    }
    if let Some(&known) = memo.get(seqs) {
        return known;
    }
    let mut covering: BTreeMap<usize, usize> = BTreeMap::new();
    for s in seqs {
        for &a in s.actions() {
            *covering.entry(alphabet.infoset_of(a)).or_default() += 1;
        }
    }
    let result = covering
        .into_iter()
        .filter(|&(_, c)| c == seqs.len())
        .any(|(info, _)| {
            let mut total = 0;
            for &a in alphabet.actions(info) {
                let part = split_by_action(seqs, a);
                let matched = seqs.iter().filter(|s| s.contains(a)).count();
                if part.is_empty() || part.len() != matched {
                    return false;
                }
                total += part.len();
                let keys: BTreeSet<Sequence> = part.into_keys().collect();
                if !strongly_branching(alphabet, &keys, memo) {
                    return false;
                }
            }
            total == seqs.len()
        });
    memo.insert(seqs.clone(), result);
    result
}

/// Memoized search for strongly branching subsets. Reusable across calls that
/// share an alphabet, which is what span verification does.
pub struct BranchingSearch {
    alphabet: Arc<Alphabet>,
    memo: HashMap<BTreeSet<Sequence>, Option<BTreeSet<Sequence>>>,
}

impl BranchingSearch {
    pub fn new(alphabet: Arc<Alphabet>) -> Self {
        BranchingSearch {
            alphabet,
            memo: HashMap::new(),
        }
    }

    /// Returns a subset of `seqs` that is strongly branching, if any.
    pub fn find(&mut self, seqs: &BTreeSet<Sequence>) -> Option<BTreeSet<Sequence>> {
        let eps = Sequence::empty();
        if seqs.contains(&eps) {
            return Some(BTreeSet::from([eps]));
        }
        if seqs.is_empty() {
            return None;
        }
        if let Some(known) = self.memo.get(seqs) {
            return known.clone();
        }
        let alphabet = self.alphabet.clone();
        let present: BTreeSet<usize> = seqs
            .iter()
            .flat_map(|s| s.actions().iter().map(|&a| alphabet.infoset_of(a)))
            .collect();
        let mut found = None;
        'infosets: for info in present {
            let mut chosen = BTreeSet::new();
            for &a in alphabet.actions(info) {
                let part = split_by_action(seqs, a);
                if part.is_empty() {
                    continue 'infosets;
                }
                let keys: BTreeSet<Sequence> = part.keys().cloned().collect();
                match self.find(&keys) {
                    None => continue 'infosets,
                    Some(sub) => chosen.extend(sub.iter().map(|k| part[k].clone())),
                }
            }
            found = Some(chosen);
            break;
        }
        self.memo.insert(seqs.clone(), found.clone());
        found
    }
}

/// Leaf histories of a structure, optionally restricted to one player.
/// Absentminded players are rejected since their histories repeat infosets.
pub fn extract_histories(
    structure: &GameStructure,
    player: Option<Player>,
) -> Result<SequenceSet, SeqError> {
    let players: Vec<Player> = match player {
        Some(p) => vec![p],
        None => vec![Player::Max, Player::Min],
    };
    for p in players {
        if structure.is_absentminded(p) {
            return Err(ModelError::Absentminded(p).into());
        }
    }
    let seqs = structure
        .leaves()
        .into_iter()
        .map(|leaf| structure.history(leaf, player))
        .collect::<Result<Vec<Sequence>, ModelError>>()?;
    SequenceSet::new(structure.alphabet().clone(), seqs)
}

impl fmt::Display for SequenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}
