//! Randomized cross-checks between the fast algorithms and their exhaustive
//! counterparts.

use std::sync::Arc;

use proptest::prelude::*;
use recall_forge::format::{parse_game, serialize_game};
use recall_forge::generators::{gen_random, FamilyParams};
use recall_forge::model::{Alphabet, ActionId, InfoSet, Player};
use recall_forge::seqsets::{extract_histories, Sequence, SequenceSet};
use recall_forge::shuffle::{salr_bruteforce_oracle, salr_witness};
use recall_forge::solver::{expected_payoff, solve, solve_bruteforce, SolveError, SolveMethod};
use recall_forge::span::{minimal_span, verify_span};

fn alphabet() -> Arc<Alphabet> {
    Arc::new(Alphabet::new(vec![
        InfoSet::new("I1", Player::Max, &["a", "A"]),
        InfoSet::new("I2", Player::Max, &["b", "B"]),
        InfoSet::new("I3", Player::Max, &["c", "C"]),
    ]))
}

/// A sequence is an ordering of distinct infosets with one action each.
fn sequence() -> impl Strategy<Value = Sequence> {
    (Just(vec![0u32, 1, 2]).prop_shuffle(), 1usize..=3, prop::collection::vec(0u32..2, 3))
        .prop_map(|(order, len, picks)| {
            Sequence::new(
                order[..len]
                    .iter()
                    .map(|&i| ActionId(2 * i + picks[i as usize]))
                    .collect(),
            )
        })
}

fn sequence_set() -> impl Strategy<Value = SequenceSet> {
    prop::collection::vec(sequence(), 1..=6)
        .prop_map(|seqs| SequenceSet::new(alphabet(), seqs).unwrap())
}

fn random_params() -> impl Strategy<Value = FamilyParams> {
    (any::<u64>(), 2usize..=4, 2usize..=3, 0u32..=80).prop_map(|(seed, depth, branching, merge)| {
        let mut p = FamilyParams::random(seed);
        p.depth = depth;
        p.branching = branching;
        p.merge_percent = merge;
        p
    })
}

fn is_permutation(a: &Sequence, b: &Sequence) -> bool {
    let mut x = a.actions().to_vec();
    let mut y = b.actions().to_vec();
    x.sort();
    y.sort();
    x == y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn witness_agrees_with_permutation_oracle(set in sequence_set()) {
        let r = salr_witness(&set);
        prop_assert_eq!(r.has_salr, salr_bruteforce_oracle(&set, 8).unwrap());
        if let Some(w) = &r.witness {
            prop_assert!(w.is_alr_set());
            let map = r.permutation_map.as_ref().unwrap();
            prop_assert_eq!(map.len(), set.len());
            for (orig, moved) in map {
                prop_assert!(set.contains(orig));
                prop_assert!(w.contains(moved));
                prop_assert!(is_permutation(orig, moved));
            }
        } else {
            prop_assert!(r.failure.is_some());
        }
    }

    #[test]
    fn minimal_span_verifies(set in sequence_set()) {
        let cert = minimal_span(&set).unwrap();
        prop_assert!(cert.span.is_alr_set());
        prop_assert!(verify_span(&set, &cert.span).unwrap().is_some());
    }

    #[test]
    fn strategy_attains_reported_value(params in random_params()) {
        let game = gen_random(&params).unwrap();
        match solve(&game, SolveMethod::Auto) {
            Ok(r) => {
                prop_assert_eq!(expected_payoff(&game, &r.strategy).unwrap(), r.value.clone());
                match solve_bruteforce(&game) {
                    Ok(b) => prop_assert_eq!(b.value, r.value),
                    Err(SolveError::TooManyStrategies { .. }) => {}
                    Err(e) => prop_assert!(false, "bruteforce: {e}"),
                }
            }
            Err(SolveError::TooManyStrategies { .. }) => {}
            Err(e) => prop_assert!(false, "solve: {e}"),
        }
    }

    #[test]
    fn documents_round_trip(params in random_params(), two in any::<bool>()) {
        let mut params = params;
        params.two_player = two;
        let game = gen_random(&params).unwrap();
        let text = serialize_game(&game);
        let back = parse_game(&text).unwrap();
        prop_assert_eq!(serialize_game(&back), text);
        prop_assert_eq!(
            extract_histories(back.structure(), None).unwrap(),
            extract_histories(game.structure(), None).unwrap()
        );
    }
}
