//! Exhaustive local-realistic checks: algebraic identities over deterministic
//! +-1 assignments and classical bounds of the Bell expressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellineq::{BellExpression, InequalitySpec, SignFunction, SIGNS};
use crate::error::{Error, Result};

/// Largest number of binary choices enumerated exhaustively.
pub const MAX_ENUMERATION_BITS: usize = 24;

/// Pre-existing +-1 outcomes: `outcomes[j][k]` for setting `k` of party `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i8>>", into = "Vec<Vec<i8>>")]
pub struct DeterministicAssignment {
    outcomes: Vec<Vec<i8>>,
}

impl TryFrom<Vec<Vec<i8>>> for DeterministicAssignment {
    type Error = Error;

    fn try_from(outcomes: Vec<Vec<i8>>) -> Result<Self> {
        Self::new(outcomes)
    }
}

impl From<DeterministicAssignment> for Vec<Vec<i8>> {
    fn from(a: DeterministicAssignment) -> Self {
        a.outcomes
    }
}

impl DeterministicAssignment {
    pub fn new(outcomes: Vec<Vec<i8>>) -> Result<Self> {
        if outcomes.iter().flatten().any(|v| *v != 1 && *v != -1) {
            return Err(Error::Domain("outcomes must be +-1".into()));
        }
        Ok(Self { outcomes })
    }

    pub fn all_plus(shape: &[usize]) -> Self {
        Self { outcomes: shape.iter().map(|&m| vec![1; m]).collect() }
    }

    /// Assignment encoded by the bits of `code` (bit set = -1), party-major.
    pub fn from_bits(shape: &[usize], code: u64) -> Self {
        let mut bit = 0;
        let outcomes = shape
            .iter()
            .map(|&m| {
                (0..m)
                    .map(|_| {
                        let v = if code >> bit & 1 == 1 { -1 } else { 1 };
                        bit += 1;
                        v
                    })
                    .collect()
            })
            .collect();
        Self { outcomes }
    }

    pub fn outcomes(&self) -> &[Vec<i8>] {
        &self.outcomes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.outcomes.iter().map(Vec::len).collect()
    }

    pub fn flipped(&self, party: usize, setting: usize) -> Self {
        let mut out = self.clone();
        out.outcomes[party][setting] = -out.outcomes[party][setting];
        out
    }
}

/// `sum_{s1,s2} S(s1,s2) (a1 + s1 a2)(b1 + s2 b2)` for one pair of parties.
pub fn pair_block(s: &SignFunction, a: [i8; 2], b: [i8; 2]) -> i32 {
    let mut total = 0;
    for s1 in SIGNS {
        for s2 in SIGNS {
            let x = i32::from(a[0]) + i32::from(s1) * i32::from(a[1]);
            let y = i32::from(b[0]) + i32::from(s2) * i32::from(b[1]);
            total += i32::from(s.value(s1, s2)) * x * y;
        }
    }
    total
}

/// The three-level expression built from two pair blocks and the C outcomes.
pub fn identity_442_value(sp: &SignFunction, spp: &SignFunction, s: &SignFunction, a: [i8; 4], b: [i8; 4], c: [i8; 2]) -> i32 {
    let first = pair_block(sp, [a[0], a[1]], [b[0], b[1]]);
    let second = pair_block(spp, [a[2], a[3]], [b[2], b[3]]);
    let mut total = 0;
    for s1 in SIGNS {
        for s2 in SIGNS {
            let inner = first + i32::from(s1) * second;
            let cc = i32::from(c[0]) + i32::from(s2) * i32::from(c[1]);
            total += i32::from(s.value(s1, s2)) * inner * cc;
        }
    }
    total
}

/// Two-block form `X (c1 + c2) + Y (c1 - c2)` with pair blocks `X`, `Y`.
pub fn two_block_value(sp: &SignFunction, spp: &SignFunction, a: [i8; 4], b: [i8; 4], c: [i8; 2]) -> i32 {
    let first = pair_block(sp, [a[0], a[1]], [b[0], b[1]]);
    let second = pair_block(spp, [a[2], a[3]], [b[2], b[3]]);
    let (c1, c2) = (i32::from(c[0]), i32::from(c[1]));
    first * (c1 + c2) + second * (c1 - c2)
}

fn unpack_442(code: u32) -> ([i8; 4], [i8; 4], [i8; 2]) {
    let bit = |k: u32| if code >> k & 1 == 1 { -1 } else { 1 };
    ([bit(0), bit(1), bit(2), bit(3)], [bit(4), bit(5), bit(6), bit(7)], [bit(8), bit(9)])
}

/// True iff the three-level 4 x 4 x 2 expression equals +-16 on all 2^10
/// deterministic assignments.
pub fn verify_identity_442(sp: &SignFunction, spp: &SignFunction, s: &SignFunction) -> bool {
    (0u32..1 << 10).all(|code| {
        let (a, b, c) = unpack_442(code);
        identity_442_value(sp, spp, s, a, b, c).abs() == 16
    })
}

/// True iff the two-block form equals +-8 on all 2^10 assignments.
pub fn verify_two_block_identity(sp: &SignFunction, spp: &SignFunction) -> bool {
    (0u32..1 << 10).all(|code| {
        let (a, b, c) = unpack_442(code);
        two_block_value(sp, spp, a, b, c).abs() == 8
    })
}

/// Left-hand side of `spec` with every correlation replaced by the product of
/// the assigned outcomes.
pub fn lhv_value_of_product_tensor(assignment: &DeterministicAssignment, spec: &InequalitySpec) -> Result<f64> {
    if assignment.shape() != spec.settings_per_party {
        return Err(Error::Arity(format!(
            "assignment shaped {:?}, expected {:?}",
            assignment.shape(),
            spec.settings_per_party
        )));
    }
    Ok(spec.expression().evaluate_lhv(assignment.outcomes()))
}

/// Incremental evaluator: per-term, per-party combination values.
struct Enumerator<'a> {
    expr: &'a BellExpression,
    /// `(party, setting)` of every bit.
    bits: Vec<(usize, usize)>,
    /// For every bit, the `(term, coefficient)` pairs it feeds.
    feeds: Vec<Vec<(usize, f64)>>,
    combos: Vec<Vec<f64>>,
}

impl<'a> Enumerator<'a> {
    fn new(expr: &'a BellExpression) -> Self {
        let bits: Vec<(usize, usize)> = expr
            .settings_per_party
            .iter()
            .enumerate()
            .flat_map(|(j, &m)| (0..m).map(move |k| (j, k)))
            .collect();
        let feeds = bits
            .iter()
            .map(|&(j, k)| {
                expr.terms
                    .iter()
                    .enumerate()
                    .flat_map(|(t, term)| {
                        term.combos[j].iter().filter(|(kk, _)| *kk == k).map(move |&(_, c)| (t, c))
                    })
                    .collect()
            })
            .collect();
        Self { expr, bits, feeds, combos: vec![] }
    }

    fn load(&mut self, code: u64) {
        let a = DeterministicAssignment::from_bits(&self.expr.settings_per_party, code);
        self.combos = self
            .expr
            .terms
            .iter()
            .map(|term| {
                term.combos
                    .iter()
                    .zip(a.outcomes())
                    .map(|(combo, out)| combo.iter().map(|&(k, c)| c * f64::from(out[k])).sum())
                    .collect()
            })
            .collect();
    }

    /// Flips bit `b`, whose outcome was `old`.
    fn flip(&mut self, b: usize, old: f64) {
        let party = self.bits[b].0;
        for &(t, c) in &self.feeds[b] {
            self.combos[t][party] -= 2.0 * c * old;
        }
    }

    fn value(&self) -> f64 {
        self.expr
            .terms
            .iter()
            .zip(&self.combos)
            .map(|(term, v)| term.weight * v.iter().product::<f64>().abs())
            .sum()
    }
}

/// Exact classical bound: the maximum of the moduli-form left-hand side over
/// all deterministic assignments.
pub fn classical_bound(spec: &InequalitySpec) -> Result<f64> {
    let expr = spec.expression();
    let n_bits = spec.total_settings();
    if n_bits > MAX_ENUMERATION_BITS {
        return Err(Error::TooLarge { bits: n_bits, limit: MAX_ENUMERATION_BITS });
    }
    // the top bits select a chunk; each chunk walks its low bits in Gray order
    let high = n_bits.min(8);
    let low = n_bits - high;
    let best = (0u64..1 << high)
        .into_par_iter()
        .map(|prefix| {
            let mut e = Enumerator::new(&expr);
            let mut code = prefix << low;
            e.load(code);
            let mut best = e.value();
            for i in 1u64..1 << low {
                let b = i.trailing_zeros() as usize;
                let old = if code >> b & 1 == 1 { -1.0 } else { 1.0 };
                code ^= 1 << b;
                e.flip(b, old);
                best = best.max(e.value());
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best.round())
}
