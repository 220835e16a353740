//! Multilinear polynomials over action variables: leaf monomials, payoff
//! polynomials and a canonical form modulo strategy constraints.
//!
//! The canonical form eliminates, per infoset, the last action variable via
//! `x_last = 1 - Σ others`. Two polynomials agree on the strategy polytope iff
//! their canonical forms are identical.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::{ActionId, Alphabet, Game, GameStructure, ModelError};
use crate::rational::{format_rational, Rational};
use crate::seqsets::{extract_histories, SeqError, Sequence};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("polynomials are over different alphabets")]
    AlphabetMismatch,
    #[error("product repeats infoset {0:?}")]
    NotMultilinear(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A product of distinct action variables; the empty product is `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<ActionId>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn new(mut vars: Vec<ActionId>) -> Self {
        vars.sort();
        vars.dedup();
        Monomial(vars)
    }

    pub fn of(seq: &Sequence) -> Self {
        Monomial::new(seq.actions().to_vec())
    }

    pub fn vars(&self) -> &[ActionId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn display(&self, alphabet: &Alphabet) -> String {
        if self.0.is_empty() {
            return "1".into();
        }
        let mut labels: Vec<&str> = self.0.iter().map(|&a| alphabet.label(a)).collect();
        labels.sort();
        labels
            .iter()
            .map(|l| format!("x_{l}"))
            .collect::<Vec<_>>()
            .join("*")
    }
}

#[derive(Clone, Debug)]
pub struct Polynomial {
    alphabet: Arc<Alphabet>,
    terms: BTreeMap<Monomial, Rational>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.alphabet.same_as(&other.alphabet)
    }
}

impl Eq for Polynomial {}

impl Polynomial {
    pub fn zero(alphabet: Arc<Alphabet>) -> Self {
        Polynomial {
            alphabet,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(alphabet: Arc<Alphabet>, c: Rational) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn monomial(alphabet: Arc<Alphabet>, m: Monomial) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(m, Rational::one());
        p
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Rational> {
        &self.terms
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    fn check_alphabet(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.alphabet.same_as(&other.alphabet) {
            Ok(())
        } else {
            Err(PolyError::AlphabetMismatch)
        }
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_alphabet(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        let mut out = Polynomial::zero(self.alphabet.clone());
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    /// Product of two polynomials. Fails if a product term would contain two
    /// variables of one infoset.
    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_alphabet(other)?;
        let mut out = Polynomial::zero(self.alphabet.clone());
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut infos = BTreeSet::new();
                for &v in m1.vars().iter().chain(m2.vars()) {
                    let info = self.alphabet.infoset_of(v);
                    if !infos.insert(info) {
                        return Err(PolyError::NotMultilinear(
                            self.alphabet.infoset(info).id.clone(),
                        ));
                    }
                }
                let vars = m1.vars().iter().chain(m2.vars()).copied().collect();
                out.add_term(Monomial::new(vars), c1 * c2);
            }
        }
        Ok(out)
    }

    /// Evaluates at an assignment; missing variables count as zero.
    pub fn evaluate(&self, value: impl Fn(ActionId) -> Rational) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for &v in m.vars() {
                if term.is_zero() {
                    break;
                }
                term *= value(v);
            }
            total += term;
        }
        total
    }

    /// Evaluates at a pure choice: a monomial is 1 iff all its variables are
    /// chosen.
    pub fn evaluate_pure(&self, chosen: impl Fn(ActionId) -> bool) -> Rational {
        self.terms
            .iter()
            .filter(|(m, _)| m.vars().iter().all(|&v| chosen(v)))
            .map(|(_, c)| c.clone())
            .sum()
    }

    /// Eliminates each infoset's last variable and expands.
    pub fn canonicalize(&self) -> Polynomial {
        let alpha = &self.alphabet;
        let mut out = Polynomial::zero(alpha.clone());
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut eliminated = Vec::new();
            for &v in m.vars() {
                let info = alpha.infoset_of(v);
                if alpha.last_action(info) == v {
                    eliminated.push(info);
                } else {
                    kept.push(v);
                }
            }
            // Expand Π_j (1 - Σ others_j) term by term.
            let mut partial: Vec<(Vec<ActionId>, Rational)> = vec![(kept, c.clone())];
            for info in eliminated {
                let others = &alpha.actions(info)[..alpha.actions(info).len() - 1];
                let mut next = Vec::with_capacity(partial.len() * (others.len() + 1));
                for (vars, coef) in partial {
                    for &o in others {
                        let mut v = vars.clone();
                        v.push(o);
                        next.push((v, -coef.clone()));
                    }
                    next.push((vars, coef));
                }
                partial = next;
            }
            for (vars, coef) in partial {
                out.add_term(Monomial::new(vars), coef);
            }
        }
        out
    }

    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0/1".into();
        }
        let mut terms: Vec<(String, &Rational)> = self
            .terms
            .iter()
            .map(|(m, c)| (m.display(&self.alphabet), c))
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        terms
            .iter()
            .map(|(m, c)| format!("{}*{}", format_rational(c), m))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

/// Equality as functions on the strategy polytope.
pub fn poly_equal_under_constraints(p: &Polynomial, q: &Polynomial) -> Result<bool, PolyError> {
    p.check_alphabet(q)?;
    Ok(p.canonicalize() == q.canonicalize())
}

/// The set of leaf monomials of a structure.
pub fn leaf_monomials(structure: &GameStructure) -> Result<BTreeSet<Monomial>, PolyError> {
    Ok(extract_histories(structure, None)?
        .iter()
        .map(Monomial::of)
        .collect())
}

/// `Σ_t Prob(t) · U(t) · μ(t)` over all leaves.
pub fn payoff_polynomial(game: &Game) -> Result<Polynomial, PolyError> {
    let s = game.structure();
    extract_histories(s, None)?;
    let mut p = Polynomial::zero(s.alphabet().clone());
    for leaf in s.leaves() {
        let u = game.utility(leaf).expect("validated game has utilities");
        if u.is_zero() {
            continue;
        }
        let prob = game.reach_probability(leaf)?;
        p.add_term(Monomial::of(&s.history(leaf, None)?), prob * u);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InfoSet, Player};
    use crate::rational::{int, rational};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alphabet(spec: &[(&str, &[&str])]) -> Arc<Alphabet> {
        Arc::new(Alphabet::new(
            spec.iter()
                .map(|(id, acts)| InfoSet::new(*id, Player::Max, acts))
                .collect(),
        ))
    }

    fn mono(alpha: &Alphabet, labels: &[&str]) -> Monomial {
        Monomial::new(labels.iter().map(|l| alpha.action(l).unwrap()).collect())
    }

    fn poly(alpha: &Arc<Alphabet>, terms: &[(&[&str], Rational)]) -> Polynomial {
        let mut p = Polynomial::zero(alpha.clone());
        for (labels, c) in terms {
            p.add_term(mono(alpha, labels), c.clone());
        }
        p
    }

    #[test]
    fn reduces_to_single_variable() {
        let alpha = alphabet(&[("I1", &["a", "A"]), ("I3", &["c", "C"]), ("I4", &["d", "D"])]);
        let p = poly(
            &alpha,
            &[
                (&["a", "d", "c"], int(1)),
                (&["a", "d", "C"], int(1)),
                (&["A", "d", "c"], int(1)),
                (&["A", "d", "C"], int(1)),
            ],
        );
        let x_d = poly(&alpha, &[(&["d"], int(1))]);
        assert_eq!(p.canonicalize(), x_d.canonicalize());
        assert!(poly_equal_under_constraints(&p, &x_d).unwrap());
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let alpha = alphabet(&[("I", &["a", "b", "c"]), ("J", &["d", "e"])]);
        let p = poly(&alpha, &[(&["c", "e"], rational(2, 3)), (&["a"], int(1))]);
        let c = p.canonicalize();
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn full_infoset_factor_is_neutral() {
        let alpha = alphabet(&[("I", &["a", "A"]), ("J", &["c", "C"])]);
        let p = poly(&alpha, &[(&["c"], rational(1, 2)), (&[], int(3))]);
        let full = poly(&alpha, &[(&["a"], int(1)), (&["A"], int(1))]);
        assert!(poly_equal_under_constraints(&p, &p.mul(&full).unwrap()).unwrap());
        let shifted = p.add(&poly(&alpha, &[(&["a"], int(1))])).unwrap();
        assert!(!poly_equal_under_constraints(&p, &shifted).unwrap());
    }

    #[test]
    fn mul_rejects_shared_infoset() {
        let alpha = alphabet(&[("I", &["a", "A"])]);
        let x = poly(&alpha, &[(&["a"], int(1))]);
        let y = poly(&alpha, &[(&["A"], int(1))]);
        assert!(matches!(x.mul(&y), Err(PolyError::NotMultilinear(_))));
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let a1 = alphabet(&[("I", &["a", "A"])]);
        let a2 = alphabet(&[("I", &["a", "b"])]);
        let p = Polynomial::constant(a1, int(1));
        let q = Polynomial::constant(a2, int(1));
        assert_eq!(
            poly_equal_under_constraints(&p, &q),
            Err(PolyError::AlphabetMismatch)
        );
    }

    #[test]
    fn stable_text_form() {
        let alpha = alphabet(&[("I", &["b", "a"])]);
        let p = poly(&alpha, &[(&["b"], rational(2, 4)), (&["a"], int(-1)), (&[], int(1))]);
        assert_eq!(p.to_string(), "1/1*1 + -1/1*x_a + 1/2*x_b");
    }

    /// A random interior point of the strategy polytope.
    fn random_point(alpha: &Alphabet, seed: u64) -> Vec<Rational> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![Rational::zero(); alpha.action_count()];
        for info in 0..alpha.infoset_count() {
            let acts = alpha.actions(info);
            let weights: Vec<u32> = acts.iter().map(|_| rng.gen_range(1..50)).collect();
            let total: u32 = weights.iter().sum();
            for (a, w) in acts.iter().zip(weights) {
                values[a.index()] = rational(w as i64, total as i64);
            }
        }
        values
    }

    fn arb_poly(alpha: Arc<Alphabet>) -> impl Strategy<Value = Polynomial> {
        let n_info = alpha.infoset_count();
        prop::collection::vec(
            (prop::collection::vec(0usize..4, n_info), -5i64..6, 1i64..4),
            0..6,
        )
        .prop_map(move |terms| {
            let mut p = Polynomial::zero(alpha.clone());
            for (choice, num, den) in terms {
                let mut vars = Vec::new();
                for (info, &c) in choice.iter().enumerate() {
                    let acts = alpha.actions(info);
                    if c < acts.len() {
                        vars.push(acts[c]);
                    }
                }
                p.add_term(Monomial::new(vars), rational(num, den));
            }
            p
        })
    }

    fn test_alphabet() -> Arc<Alphabet> {
        alphabet(&[("I", &["a", "b", "c"]), ("J", &["d", "e"]), ("K", &["f", "g"])])
    }

    proptest! {
        #[test]
        fn canonical_form_agrees_on_polytope(
            p in arb_poly(test_alphabet()),
            seed in any::<u64>(),
        ) {
            let c = p.canonicalize();
            for k in 0..200 {
                let point = random_point(p.alphabet(), seed.wrapping_add(k));
                prop_assert_eq!(
                    p.evaluate(|v| point[v.index()].clone()),
                    c.evaluate(|v| point[v.index()].clone())
                );
            }
        }

        #[test]
        fn distinct_canonical_forms_are_separated(
            p in arb_poly(test_alphabet()),
            q in arb_poly(test_alphabet()),
        ) {
            prop_assume!(p.canonicalize() != q.canonicalize());
            let mut separated = false;
            for k in 0..200u64 {
                let point = random_point(p.alphabet(), k);
                if p.evaluate(|v| point[v.index()].clone()) != q.evaluate(|v| point[v.index()].clone()) {
                    separated = true;
                    break;
                }
            }
            prop_assert!(separated);
        }
    }
}
