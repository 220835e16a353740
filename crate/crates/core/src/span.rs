//! ALR-spans: the full product span, minimal spans, shuffle depth, span
//! certificates and the set-to-structure reconstruction.
//!
//! Every span produced here is realizable: each player split offers all
//! actions of its infoset. A missing branch becomes a bare leaf.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Alphabet, GameBuilder, GameStructure, ModelError, NodeId};
use crate::rational::zero;
use crate::seqsets::{BranchingSearch, Sequence, SequenceSet};
use crate::shuffle::salr_witness;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("sequence set {0} does not have A-loss recall")]
    NotAlr(String),
    #[error("cannot build a structure from the empty set")]
    Empty,
    #[error("sequence sets are over different alphabets")]
    AlphabetMismatch,
    #[error("computed span fails verification against {0}")]
    Unverified(String),
    #[error("instance too large for the exhaustive oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A span together with, for each original sequence, the span sequences whose
/// coefficient is 1 in its generating combination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanCertificate {
    pub original: SequenceSet,
    pub span: SequenceSet,
    pub combinations: BTreeMap<Sequence, BTreeSet<Sequence>>,
}

/// All words `a_1 … a_n` with `a_j` ranging over the `j`-th listed infoset.
pub fn canonical_full_span(alphabet: &Arc<Alphabet>, infosets: &[usize]) -> SequenceSet {
    let mut words = vec![Sequence::empty()];
    for &info in infosets.iter().rev() {
        words = alphabet
            .actions(info)
            .iter()
            .flat_map(|&a| words.iter().map(move |w| w.prepend(a)))
            .collect();
    }
    SequenceSet::new(alphabet.clone(), words).expect("one action per infoset")
}

/// Memoized minimal-span recursion. Keeps a count of distinct subproblems so
/// callers can check the cost bound for bounded shuffle depth.
#[derive(Default)]
pub struct SpanSolver {
    memo: HashMap<BTreeSet<Sequence>, Arc<BTreeSet<Sequence>>>,
    states: usize,
}

impl SpanSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct sets solved so far.
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn span(&mut self, set: &SequenceSet) -> SequenceSet {
        let seqs = self.solve(set);
        set.derive((*seqs).clone())
    }

    fn solve(&mut self, set: &SequenceSet) -> Arc<BTreeSet<Sequence>> {
        let set = set.without_empty();
        if set.is_empty() {
            return Arc::new(BTreeSet::from([Sequence::empty()]));
        }
        if let Some(hit) = self.memo.get(set.sequences()) {
            return hit.clone();
        }
        self.states += 1;
        let comps = set.components();
        let result: BTreeSet<Sequence> = if comps.len() > 1 {
            comps
                .iter()
                .flat_map(|c| (*self.solve(c)).clone())
                .collect()
        } else {
            // Once missing actions are filled in, neither a covering infoset
            // nor the leading one is always the cheapest first move, so every
            // present infoset is tried. Ties go to the leading infoset, then
            // covering ones, then file order.
            let lead = set.leading_infoset();
            let covering = set.covering_infosets();
            let mut candidates: Vec<usize> = lead.into_iter().collect();
            for i in covering.iter().copied().chain(set.infosets_present()) {
                if !candidates.contains(&i) {
                    candidates.push(i);
                }
            }
            let mut best: Option<BTreeSet<Sequence>> = None;
            for info in candidates {
                let rest = set.residual_without_infoset(info);
                let bound = best.as_ref().map_or(usize::MAX, |b| b.len());
                if let Some(candidate) = self.split(&set, info, &rest, bound) {
                    best = Some(candidate);
                }
            }
            best.expect("a nonempty set touches some infoset")
        };
        let result = Arc::new(result);
        self.memo.insert(set.sequences().clone(), result.clone());
        result
    }

    /// `⋃_a a · span(S_a ∪ rest)`, or `None` once it cannot beat `bound`.
    /// Every branch contributes at least one word.
    fn split(
        &mut self,
        set: &SequenceSet,
        info: usize,
        rest: &SequenceSet,
        bound: usize,
    ) -> Option<BTreeSet<Sequence>> {
        let actions = set.alphabet().actions(info);
        let mut out = BTreeSet::new();
        for (k, &a) in actions.iter().enumerate() {
            let sub = set.quotient_by_action(a).union(rest);
            out.extend(self.solve(&sub).iter().map(|s| s.prepend(a)));
            if out.len() + (actions.len() - k - 1) >= bound {
                return None;
            }
        }
        Some(out)
    }
}

/// The minimal span as a bare set, without building a certificate.
pub fn minimal_span_set(set: &SequenceSet) -> SequenceSet {
    SpanSolver::new().span(set)
}

/// Minimal span with its certificate.
pub fn minimal_span(set: &SequenceSet) -> Result<SpanCertificate, SpanError> {
    let span = minimal_span_set(set);
    verify_span(set, &span)?.ok_or_else(|| SpanError::Unverified(set.display()))
}

/// Zero for sets with shuffled A-loss recall; otherwise one more than the best
/// infoset split's worst branch. Disconnected sets take the worst component.
pub fn shuffle_depth(set: &SequenceSet) -> usize {
    fn sd(set: &SequenceSet, memo: &mut HashMap<BTreeSet<Sequence>, usize>) -> usize {
        let set = set.without_empty();
        if set.is_empty() {
            return 0;
        }
        if let Some(&v) = memo.get(set.sequences()) {
            return v;
        }
        let comps = set.components();
        let value = if comps.len() > 1 {
            comps.iter().map(|c| sd(c, memo)).max().unwrap_or(0)
        } else if salr_witness(&set).has_salr {
            0
        } else {
            set.infosets_present()
                .into_iter()
                .map(|info| {
                    let rest = set.residual_without_infoset(info);
                    set.alphabet()
                        .actions(info)
                        .iter()
                        .map(|&a| sd(&set.quotient_by_action(a).union(&rest), memo))
                        .max()
                        .unwrap_or(0)
                })
                .min()
                .map_or(0, |m| m + 1)
        };
        memo.insert(set.sequences().clone(), value);
        value
    }
    sd(set, &mut HashMap::new())
}

/// Checks that `candidate` spans `original` with {0,1} coefficients: for each
/// original `s`, the candidate words containing all of `s`'s actions, with
/// those actions removed, must contain a strongly branching subset.
pub fn verify_span(
    original: &SequenceSet,
    candidate: &SequenceSet,
) -> Result<Option<SpanCertificate>, SpanError> {
    if !original.alphabet().same_as(candidate.alphabet()) {
        return Err(SpanError::AlphabetMismatch);
    }
    if !candidate.is_alr_set() {
        return Err(SpanError::NotAlr(candidate.display()));
    }
    let mut search = BranchingSearch::new(candidate.alphabet().clone());
    let mut combinations = BTreeMap::new();
    for s in original.iter() {
        let acts = s.actions();
        let mut reduced: BTreeMap<Sequence, Sequence> = BTreeMap::new();
        for c in candidate.iter() {
            if acts.iter().all(|&a| c.contains(a)) {
                reduced.entry(c.without(acts)).or_insert_with(|| c.clone());
            }
        }
        let keys: BTreeSet<Sequence> = reduced.keys().cloned().collect();
        let Some(found) = search.find(&keys) else {
            return Ok(None);
        };
        combinations.insert(
            s.clone(),
            found.iter().map(|k| reduced[k].clone()).collect(),
        );
    }
    Ok(Some(SpanCertificate {
        original: original.clone(),
        span: candidate.clone(),
        combinations,
    }))
}

/// Checks a given certificate without searching: the span has A-loss recall
/// and each combination, with the original sequence's actions removed,
/// leaves distinct words forming a strongly branching set.
pub fn check_certificate(cert: &SpanCertificate) -> Result<bool, SpanError> {
    if !cert.original.alphabet().same_as(cert.span.alphabet()) {
        return Err(SpanError::AlphabetMismatch);
    }
    if !cert.span.is_alr_set() {
        return Err(SpanError::NotAlr(cert.span.display()));
    }
    for s in cert.original.iter() {
        let Some(members) = cert.combinations.get(s) else {
            return Ok(false);
        };
        let acts = s.actions();
        let mut reduced = BTreeSet::new();
        for t in members {
            if !cert.span.contains(t)
                || !acts.iter().all(|&a| t.contains(a))
                || !reduced.insert(t.without(acts))
            {
                return Ok(false);
            }
        }
        if !cert.span.derive(reduced).is_strongly_branching() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Builds a structure whose leaf histories are `set`: a player node for each
/// connected part (over the infoset opening it), a chance node for each
/// disconnected split, a leaf for `ε`. Actions with no continuation get a
/// leaf. The structure keeps the set's alphabet.
pub fn structure_from_sequences(set: &SequenceSet) -> Result<GameStructure, SpanError> {
    if set.is_empty() {
        return Err(SpanError::Empty);
    }
    if !set.is_alr_set() {
        return Err(SpanError::NotAlr(set.display()));
    }
    fn build(b: &mut GameBuilder, set: &SequenceSet) -> NodeId {
        if set.is_empty() || set.is_epsilon() {
            return b.leaf(zero());
        }
        let comps = set.components();
        if comps.len() > 1 {
            let kids = comps.iter().map(|c| build(b, c)).collect();
            return b.uniform_chance(kids);
        }
        let lead = set.leading_infoset().expect("connected ALR sets have a leading infoset");
        let kids = set
            .alphabet()
            .actions(lead)
            .iter()
            .map(|&a| build(b, &set.continuations(a)))
            .collect();
        b.player(lead, kids)
    }
    let mut b = GameBuilder::with_alphabet(set.alphabet().clone());
    let root = build(&mut b, set);
    Ok(b.build_structure(root)?)
}

/// Exhaustive minimal span size for tiny instances: tries every realizable
/// ALR set over the infosets present, smallest first.
pub fn minimality_oracle(set: &SequenceSet) -> Result<usize, SpanError> {
    Ok(smallest_span_by_search(set)?.len())
}

/// The first verified span in the oracle's enumeration order.
pub fn smallest_span_by_search(set: &SequenceSet) -> Result<SequenceSet, SpanError> {
    let alpha = set.alphabet().clone();
    let present: Vec<usize> = set.infosets_present().into_iter().collect();
    if present.len() > 3 || set.len() > 8 {
        return Err(SpanError::TooLarge(format!(
            "{} infosets and {} sequences (limits 3 and 8)",
            present.len(),
            set.len()
        )));
    }
    if let Some(&wide) = present.iter().find(|&&i| alpha.actions(i).len() > 2) {
        return Err(SpanError::TooLarge(format!(
            "infoset {:?} is not binary",
            alpha.infoset(wide).id
        )));
    }
    let needed: BTreeSet<_> = set.iter().flat_map(|s| s.actions().to_vec()).collect();
    let mut enumerator = Enumerator::new(alpha);
    let mut candidates = enumerator.realizable(&present);
    candidates.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    for cand in candidates {
        if !needed.iter().all(|&a| cand.iter().any(|c| c.contains(a))) {
            continue;
        }
        let cand = set.derive(cand);
        if verify_span(set, &cand)?.is_some() {
            return Ok(cand);
        }
    }
    unreachable!("the full product over the present infosets always spans")
}

/// Generates all realizable ALR sets over subsets of a few infosets.
struct Enumerator {
    alpha: Arc<Alphabet>,
    realizable_memo: HashMap<Vec<usize>, Vec<BTreeSet<Sequence>>>,
    rooted_memo: HashMap<Vec<usize>, Vec<BTreeSet<Sequence>>>,
}

impl Enumerator {
    fn new(alpha: Arc<Alphabet>) -> Self {
        Enumerator {
            alpha,
            realizable_memo: HashMap::new(),
            rooted_memo: HashMap::new(),
        }
    }

    fn support(&self, set: &BTreeSet<Sequence>) -> Vec<usize> {
        let s: BTreeSet<usize> = set
            .iter()
            .flat_map(|q| q.actions().iter().map(|&a| self.alpha.infoset_of(a)))
            .collect();
        s.into_iter().collect()
    }

    /// Realizable sets using only infosets in `u` (including `{ε}`).
    fn realizable(&mut self, u: &[usize]) -> Vec<BTreeSet<Sequence>> {
        if let Some(hit) = self.realizable_memo.get(u) {
            return hit.clone();
        }
        let mut out: BTreeSet<BTreeSet<Sequence>> = BTreeSet::new();
        for forest in self.forests(u) {
            if !forest.is_empty() {
                out.insert(forest.clone());
            }
            let mut with_eps = forest;
            with_eps.insert(Sequence::empty());
            out.insert(with_eps);
        }
        let out: Vec<_> = out.into_iter().collect();
        self.realizable_memo.insert(u.to_vec(), out.clone());
        out
    }

    /// Unions of player-rooted sets over pairwise disjoint infoset blocks.
    fn forests(&mut self, u: &[usize]) -> Vec<BTreeSet<Sequence>> {
        let Some((&first, rest)) = u.split_first() else {
            return vec![BTreeSet::new()];
        };
        let mut out = self.forests(rest);
        for mask in 0u32..(1 << rest.len()) {
            let mut block = vec![first];
            let mut remaining = Vec::new();
            for (k, &i) in rest.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    block.push(i);
                } else {
                    remaining.push(i);
                }
            }
            let rooted = self.rooted_exact(&block);
            let others = self.forests(&remaining);
            for r in &rooted {
                for o in &others {
                    let mut f = r.clone();
                    f.extend(o.iter().cloned());
                    out.push(f);
                }
            }
        }
        out
    }

    /// Player-rooted sets whose support is exactly `block`.
    fn rooted_exact(&mut self, block: &[usize]) -> Vec<BTreeSet<Sequence>> {
        if let Some(hit) = self.rooted_memo.get(block) {
            return hit.clone();
        }
        let mut out = BTreeSet::new();
        for (k, &root) in block.iter().enumerate() {
            let mut below = block.to_vec();
            below.remove(k);
            let options = self.realizable(&below);
            let actions = self.alpha.actions(root).to_vec();
            let mut partial: Vec<BTreeSet<Sequence>> = vec![BTreeSet::new()];
            for &a in &actions {
                let mut next = Vec::with_capacity(partial.len() * options.len());
                for p in &partial {
                    for o in &options {
                        let mut q = p.clone();
                        q.extend(o.iter().map(|s| s.prepend(a)));
                        next.push(q);
                    }
                }
                partial = next;
            }
            for p in partial {
                if self.support(&p) == block {
                    out.insert(p);
                }
            }
        }
        let out: Vec<_> = out.into_iter().collect();
        self.rooted_memo.insert(block.to_vec(), out.clone());
        out
    }
}
