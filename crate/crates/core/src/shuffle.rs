//! Shuffled A-loss recall: decide whether per-leaf reordering of histories can
//! reach an ALR set, and build the reordered witness.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use thiserror::Error;

use crate::model::{ActionId, GameStructure};
use crate::seqsets::{extract_histories, SeqError, Sequence, SequenceSet};
use crate::span::{structure_from_sequences, SpanError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ShuffleError {
    #[error("instance too large for the exhaustive oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Span(#[from] SpanError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SalrResult {
    pub has_salr: bool,
    pub witness: Option<SequenceSet>,
    /// Original sequence to its reordering in the witness.
    pub permutation_map: Option<BTreeMap<Sequence, Sequence>>,
    /// A connected subset with no infoset touching all of its sequences, or
    /// two sequences over the same actions, which no bijective reordering
    /// can separate.
    pub failure: Option<SequenceSet>,
}

/// Runs the covering-infoset recursion. When several infosets touch every
/// sequence, one that already opens all of them is preferred, else the first
/// in file order; so an ALR input comes back unchanged.
pub fn salr_witness(set: &SequenceSet) -> SalrResult {
    let origin: BTreeMap<Sequence, Sequence> = set.iter().map(|s| (s.clone(), s.clone())).collect();
    match same_actions(set).map_or_else(|| witness_rec(set, &origin), Err) {
        Ok(map) => {
            let witness = set.derive(map.values().cloned().collect());
            SalrResult {
                has_salr: true,
                witness: Some(witness),
                permutation_map: Some(map),
                failure: None,
            }
        }
        Err(failure) => SalrResult {
            has_salr: false,
            witness: None,
            permutation_map: None,
            failure: Some(failure),
        },
    }
}

/// Two distinct sequences over the same actions first differ at actions of
/// different infosets, so no reordering makes both of them ALR.
fn same_actions(set: &SequenceSet) -> Option<SequenceSet> {
    let mut seen: BTreeMap<Vec<ActionId>, &Sequence> = BTreeMap::new();
    for s in set.iter() {
        let mut key = s.actions().to_vec();
        key.sort();
        if let Some(prev) = seen.insert(key, s) {
            return Some(set.derive(BTreeSet::from([prev.clone(), s.clone()])));
        }
    }
    None
}

/// `origin` maps each sequence of `set` (after quotients) to the original
/// sequence it stands for. Quotients never merge sequences once
/// [`same_actions`] has passed.
fn witness_rec(
    set: &SequenceSet,
    origin: &BTreeMap<Sequence, Sequence>,
) -> Result<BTreeMap<Sequence, Sequence>, SequenceSet> {
    let mut out = BTreeMap::new();
    if set.is_empty() {
        return Ok(out);
    }
    if set.is_epsilon() {
        out.insert(origin[&Sequence::empty()].clone(), Sequence::empty());
        return Ok(out);
    }
    let comps = set.components();
    if comps.len() > 1 {
        for c in comps {
            out.extend(witness_rec(&c, origin)?);
        }
        return Ok(out);
    }
    let chosen = set
        .leading_infoset()
        .or_else(|| set.covering_infosets().first().copied());
    let Some(info) = chosen else {
        return Err(set.clone());
    };
    for &a in set.alphabet().actions(info) {
        let sub_origin: BTreeMap<Sequence, Sequence> = set
            .iter()
            .filter(|s| s.contains(a))
            .map(|s| (s.without(&[a]), origin[s].clone()))
            .collect();
        let sub = set.derive(sub_origin.keys().cloned().collect());
        for (o, w) in witness_rec(&sub, &sub_origin)? {
            out.insert(o, w.prepend(a));
        }
    }
    Ok(out)
}

/// Tries every reordering of every sequence and reports whether some choice
/// yields an ALR set. Pairs are checked as choices are made, which prunes
/// most of the search since ALR is closed under subsets.
pub fn salr_bruteforce_oracle(set: &SequenceSet, max_size: usize) -> Result<bool, ShuffleError> {
    if set.len() > max_size {
        return Err(ShuffleError::TooLarge(format!(
            "{} sequences, limit {max_size}",
            set.len()
        )));
    }
    if let Some(long) = set.iter().find(|s| s.len() > 6) {
        return Err(ShuffleError::TooLarge(format!(
            "sequence {} is longer than 6",
            long.display(set.alphabet())
        )));
    }
    let options: Vec<Vec<Sequence>> = set
        .iter()
        .map(|s| {
            let len = s.len();
            s.actions()
                .iter()
                .copied()
                .permutations(len)
                .map(Sequence::new)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    let mut chosen = Vec::with_capacity(options.len());
    Ok(search(set, &options, &mut chosen))
}

fn search(set: &SequenceSet, options: &[Vec<Sequence>], chosen: &mut Vec<Sequence>) -> bool {
    if chosen.len() == options.len() {
        return set.derive(chosen.iter().cloned().collect()).is_alr_set();
    }
    for candidate in &options[chosen.len()] {
        if chosen.contains(candidate) {
            continue;
        }
        let compatible = chosen.iter().all(|prev| {
            set.derive(BTreeSet::from([prev.clone(), candidate.clone()]))
                .is_alr_set()
        });
        if !compatible {
            continue;
        }
        chosen.push(candidate.clone());
        if search(set, options, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Rebuilds a structure whose leaf histories are the witness of the input's
/// leaf histories, or `None` when no witness exists.
pub fn shuffle_structure(structure: &GameStructure) -> Result<Option<GameStructure>, ShuffleError> {
    let histories = extract_histories(structure, None)?;
    let result = salr_witness(&histories);
    match result.witness {
        Some(w) => Ok(Some(structure_from_sequences(&w)?)),
        None => Ok(None),
    }
}
