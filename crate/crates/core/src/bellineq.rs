//! Explicit multisetting Bell expressions and their direct maximization.
//!
//! Every family is stored in moduli form: a weighted sum of terms
//! `w * |T o (v_1 x ... x v_N)|`, where each `v_j` is a fixed signed
//! combination of party `j`'s measurement directions. The same expression
//! evaluates quantum correlations (contract with `T`) and local-realistic
//! correlations (products of +-1 outcomes).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrtensor::{CorrelationTensor, UNIT_TOL};
use crate::criteria::{self, Options};
use crate::error::{Error, Result};
use crate::subspace::{pick_best, restart_rng, CriterionFrames};

/// A +-1 valued function of `(s1, s2)` in `{+1, -1}^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignFunction {
    /// Values at `(+,+)`, `(+,-)`, `(-,+)`, `(-,-)`.
    values: [i8; 4],
}

impl SignFunction {
    pub fn new(values: [i8; 4]) -> Result<Self> {
        if values.iter().all(|v| *v == 1 || *v == -1) {
            Ok(Self { values })
        } else {
            Err(Error::Domain(format!("sign function values must be +-1, got {values:?}")))
        }
    }

    /// Bit `k` of `index` set means value -1 at position `k`.
    pub fn from_index(index: u8) -> Self {
        let mut values = [1; 4];
        for (k, v) in values.iter_mut().enumerate() {
            if index >> k & 1 == 1 {
                *v = -1;
            }
        }
        Self { values }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..16).map(Self::from_index)
    }

    /// The eight functions with `S(+,+) = +1`.
    pub fn canonical_all() -> impl Iterator<Item = Self> {
        Self::all().filter(|s| s.values[0] == 1)
    }

    pub fn constant() -> Self {
        Self { values: [1; 4] }
    }

    pub fn value(&self, s1: i8, s2: i8) -> i8 {
        let k = usize::from(s1 < 0) * 2 + usize::from(s2 < 0);
        self.values[k]
    }

    pub fn values(&self) -> [i8; 4] {
        self.values
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.map(|v| -v) }
    }

    /// `S(s1, s2) = S1(s1) S2(s2)` for some single-argument sign functions.
    pub fn is_factorable(&self) -> bool {
        let [pp, pm, mp, mm] = self.values;
        pp * mm == pm * mp
    }

    /// Representative with `S(+,+) = +1`.
    pub fn canonical(&self) -> Self {
        if self.values[0] == 1 {
            *self
        } else {
            self.negated()
        }
    }
}

pub(crate) const SIGNS: [i8; 2] = [1, -1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// 4 x 4 x 2 settings, bound 8.
    #[serde(rename = "f442")]
    F442,
    /// 3 x 3 x 2 settings (A1, A3, A4 / B1, B3, B4 / C1, C2), bound 8.
    #[serde(rename = "f332")]
    F332,
    /// 4 x ... x 4 x 2 settings, bound 2^N.
    #[serde(rename = "fN")]
    FN,
    /// Two settings per party, the full set of correlation inequalities, bound 2^N.
    #[serde(rename = "standard")]
    Standard,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::F442 => "f442",
            Family::F332 => "f332",
            Family::FN => "fN",
            Family::Standard => "standard",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f442" => Ok(Family::F442),
            "f332" => Ok(Family::F332),
            "fN" | "fn" => Ok(Family::FN),
            "standard" => Ok(Family::Standard),
            other => Err(Error::Parse {
                spec: other.to_string(),
                reason: "unknown family (expected f442, f332, fN or standard)".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySpec {
    pub family: Family,
    pub n_parties: usize,
    pub settings_per_party: Vec<usize>,
    pub classical_bound: f64,
}

impl InequalitySpec {
    pub fn f442() -> Self {
        Self { family: Family::F442, n_parties: 3, settings_per_party: vec![4, 4, 2], classical_bound: 8.0 }
    }

    pub fn f332() -> Self {
        Self { family: Family::F332, n_parties: 3, settings_per_party: vec![3, 3, 2], classical_bound: 8.0 }
    }

    pub fn f_n(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Arity(format!("the 4 x ... x 4 x 2 family needs N >= 3, got {n}")));
        }
        let mut settings = vec![4; n - 1];
        settings.push(2);
        Ok(Self { family: Family::FN, n_parties: n, settings_per_party: settings, classical_bound: 2f64.powi(n as i32) })
    }

    pub fn standard(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Arity(format!("the two-setting family needs N >= 2, got {n}")));
        }
        Ok(Self { family: Family::Standard, n_parties: n, settings_per_party: vec![2; n], classical_bound: 2f64.powi(n as i32) })
    }

    /// Builds the inequality for `family`; `n` is ignored for the fixed three-party families.
    pub fn for_family(family: Family, n: usize) -> Result<Self> {
        match family {
            Family::F442 => Ok(Self::f442()),
            Family::F332 => Ok(Self::f332()),
            Family::FN => Self::f_n(n),
            Family::Standard => Self::standard(n),
        }
    }

    pub fn expression(&self) -> BellExpression {
        match self.family {
            Family::F442 => expr_442(),
            Family::F332 => expr_332(),
            Family::FN => expr_n(self.n_parties),
            Family::Standard => expr_standard(self.n_parties),
        }
    }

    pub fn total_settings(&self) -> usize {
        self.settings_per_party.iter().sum()
    }
}

/// `w * |T o (v_1 x ... x v_N)|` with `v_j = sum_k c_jk n_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusTerm {
    pub weight: f64,
    /// `combos[j]` lists `(setting index, coefficient)` pairs for party `j`.
    pub combos: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellExpression {
    pub settings_per_party: Vec<usize>,
    pub terms: Vec<ModulusTerm>,
}

fn pair(i: usize, s: i8) -> Vec<(usize, f64)> {
    vec![(i, 1.0), (i + 1, f64::from(s))]
}

fn expr_442() -> BellExpression {
    let mut terms = Vec::new();
    for s1 in SIGNS {
        for s2 in SIGNS {
            terms.push(ModulusTerm { weight: 1.0, combos: vec![pair(0, s1), pair(0, s2), pair(0, 1)] });
        }
    }
    for s1 in SIGNS {
        for s2 in SIGNS {
            terms.push(ModulusTerm { weight: 1.0, combos: vec![pair(2, s1), pair(2, s2), pair(0, -1)] });
        }
    }
    BellExpression { settings_per_party: vec![4, 4, 2], terms }
}

fn expr_332() -> BellExpression {
    // setting indices: 0 = A1, 1 = A3, 2 = A4 (likewise for B)
    let mut terms = vec![ModulusTerm {
        weight: 4.0,
        combos: vec![vec![(0, 1.0)], vec![(0, 1.0)], pair(0, 1)],
    }];
    for s1 in SIGNS {
        for s2 in SIGNS {
            terms.push(ModulusTerm { weight: 1.0, combos: vec![pair(1, s1), pair(1, s2), pair(0, -1)] });
        }
    }
    BellExpression { settings_per_party: vec![3, 3, 2], terms }
}

fn sign_tuples(len: usize) -> Vec<Vec<i8>> {
    (0..1usize << len)
        .map(|m| (0..len).map(|k| if m >> (len - 1 - k) & 1 == 0 { 1 } else { -1 }).collect())
        .collect()
}

fn expr_n(n: usize) -> BellExpression {
    let mut terms = Vec::new();
    for (first, last) in [(0, -1), (2, 1)] {
        for s in sign_tuples(n - 1) {
            let mut combos: Vec<_> = s.iter().map(|&sj| pair(first, sj)).collect();
            combos.push(pair(0, last));
            terms.push(ModulusTerm { weight: 1.0, combos });
        }
    }
    let mut settings = vec![4; n - 1];
    settings.push(2);
    BellExpression { settings_per_party: settings, terms }
}

fn expr_standard(n: usize) -> BellExpression {
    let terms = sign_tuples(n)
        .into_iter()
        .map(|s| ModulusTerm { weight: 1.0, combos: s.iter().map(|&sj| pair(0, sj)).collect() })
        .collect();
    BellExpression { settings_per_party: vec![2; n], terms }
}

impl BellExpression {
    pub fn n_parties(&self) -> usize {
        self.settings_per_party.len()
    }

    fn combination(combo: &[(usize, f64)], dirs: &[Vector3<f64>]) -> Vector3<f64> {
        combo.iter().map(|&(k, c)| dirs[k] * c).sum()
    }

    fn term_vectors(&self, term: &ModulusTerm, settings: &[Vec<Vector3<f64>>]) -> Vec<Vector3<f64>> {
        term.combos.iter().zip(settings).map(|(c, d)| Self::combination(c, d)).collect()
    }

    /// Signed values `T o (v_1 x ... x v_N)` of every term (weights excluded).
    pub(crate) fn term_values(&self, t: &CorrelationTensor, settings: &[Vec<Vector3<f64>>]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|term| t.contract_unchecked(&self.term_vectors(term, settings)))
            .collect()
    }

    pub(crate) fn evaluate_vectors(&self, t: &CorrelationTensor, settings: &[Vec<Vector3<f64>>]) -> f64 {
        self.term_values(t, settings)
            .iter()
            .zip(&self.terms)
            .map(|(v, term)| term.weight * v.abs())
            .sum()
    }

    /// Left-hand side for quantum correlations.
    pub fn evaluate(&self, t: &CorrelationTensor, settings: &SettingsAssignment) -> Result<f64> {
        self.check_shape(t.n_parties(), settings)?;
        Ok(self.evaluate_vectors(t, &settings.vectors()))
    }

    /// Left-hand side when every correlation is a product of +-1 outcomes.
    pub fn evaluate_lhv(&self, outcomes: &[Vec<i8>]) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let prod: f64 = term
                    .combos
                    .iter()
                    .zip(outcomes)
                    .map(|(combo, out)| combo.iter().map(|&(k, c)| c * f64::from(out[k])).sum::<f64>())
                    .product();
                term.weight * prod.abs()
            })
            .sum()
    }

    fn check_shape(&self, n_parties: usize, settings: &SettingsAssignment) -> Result<()> {
        if n_parties != self.n_parties() {
            return Err(Error::Arity(format!(
                "expression has {} parties, tensor has {n_parties}",
                self.n_parties()
            )));
        }
        let shape: Vec<usize> = settings.parties.iter().map(Vec::len).collect();
        if shape != self.settings_per_party {
            return Err(Error::Arity(format!(
                "settings shaped {shape:?}, expected {:?}",
                self.settings_per_party
            )));
        }
        Ok(())
    }
}

/// Measurement directions: `parties[j][k]` is setting `k` of party `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 3]>>", into = "Vec<Vec<[f64; 3]>>")]
pub struct SettingsAssignment {
    parties: Vec<Vec<[f64; 3]>>,
}

impl TryFrom<Vec<Vec<[f64; 3]>>> for SettingsAssignment {
    type Error = Error;

    fn try_from(parties: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        SettingsAssignment::new(parties)
    }
}

impl From<SettingsAssignment> for Vec<Vec<[f64; 3]>> {
    fn from(s: SettingsAssignment) -> Self {
        s.parties
    }
}

impl SettingsAssignment {
    pub fn new(parties: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        for (j, party) in parties.iter().enumerate() {
            for (k, v) in party.iter().enumerate() {
                let norm = Vector3::from(*v).norm();
                if (norm - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Validation(format!(
                        "setting {k} of party {j} has norm {norm}"
                    )));
                }
            }
        }
        Ok(Self { parties })
    }

    pub fn from_vectors(parties: &[Vec<Vector3<f64>>]) -> Result<Self> {
        Self::new(
            parties
                .iter()
                .map(|p| p.iter().map(|v| [v[0], v[1], v[2]]).collect())
                .collect(),
        )
    }

    /// The same direction `v` for every setting of every party.
    pub fn uniform(shape: &[usize], v: Vector3<f64>) -> Self {
        let v = v.normalize();
        Self { parties: shape.iter().map(|&m| vec![[v[0], v[1], v[2]]; m]).collect() }
    }

    pub fn random<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        Self {
            parties: shape
                .iter()
                .map(|&m| (0..m).map(|_| random_unit(rng)).map(|v| [v[0], v[1], v[2]]).collect())
                .collect(),
        }
    }

    pub fn parties(&self) -> &[Vec<[f64; 3]>] {
        &self.parties
    }

    pub fn shape(&self) -> Vec<usize> {
        self.parties.iter().map(Vec::len).collect()
    }

    pub fn vectors(&self) -> Vec<Vec<Vector3<f64>>> {
        self.parties.iter().map(|p| p.iter().map(|v| Vector3::from(*v)).collect()).collect()
    }

    /// Applies `frames[j]` (rows = new axes) to every direction of party `j`.
    pub fn rotated(&self, frames: &[Matrix3<f64>]) -> Result<Self> {
        let parties: Vec<Vec<Vector3<f64>>> = self
            .vectors()
            .iter()
            .zip(frames)
            .map(|(p, f)| p.iter().map(|v| f * v).collect())
            .collect();
        Self::from_vectors(&parties)
    }
}

pub(crate) fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    use rand_distr::StandardNormal;
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

fn require(t: &CorrelationTensor, spec: &InequalitySpec) -> Result<()> {
    if t.n_parties() != spec.n_parties {
        return Err(Error::Arity(format!(
            "{} inequality needs {} parties, tensor has {}",
            spec.family,
            spec.n_parties,
            t.n_parties()
        )));
    }
    Ok(())
}

/// Sum of the two moduli blocks of the 4 x 4 x 2 inequality.
pub fn lhs_moduli_442(t: &CorrelationTensor, s: &SettingsAssignment) -> Result<f64> {
    let spec = InequalitySpec::f442();
    require(t, &spec)?;
    spec.expression().evaluate(t, s)
}

/// One member of the linear 4 x 4 x 2 family, selected by `sp` and `spp`.
pub fn lhs_linear(
    t: &CorrelationTensor,
    s: &SettingsAssignment,
    sp: &SignFunction,
    spp: &SignFunction,
) -> Result<f64> {
    let spec = InequalitySpec::f442();
    require(t, &spec)?;
    let expr = spec.expression();
    expr.check_shape(t.n_parties(), s)?;
    let values = expr.term_values(t, &s.vectors());
    // terms 0..4 and 4..8 run over (s1, s2) in the order (+,+), (+,-), (-,+), (-,-)
    let mut total = 0.0;
    for (k, (s1, s2)) in SIGNS.iter().flat_map(|&a| SIGNS.iter().map(move |&b| (a, b))).enumerate() {
        total += f64::from(sp.value(s1, s2)) * values[k];
        total += f64::from(spp.value(s1, s2)) * values[4 + k];
    }
    Ok(total.abs())
}

/// Left-hand side of the 3 x 3 x 2 inequality with its leading weight 4.
pub fn lhs_332(t: &CorrelationTensor, s: &SettingsAssignment) -> Result<f64> {
    let spec = InequalitySpec::f332();
    require(t, &spec)?;
    spec.expression().evaluate(t, s)
}

/// Left-hand side of the N-party 4 x ... x 4 x 2 inequality.
pub fn lhs_n(t: &CorrelationTensor, s: &SettingsAssignment) -> Result<f64> {
    let spec = InequalitySpec::f_n(t.n_parties())?;
    spec.expression().evaluate(t, s)
}

/// Left-hand side of the two-setting inequality set (moduli form).
pub fn lhs_standard(t: &CorrelationTensor, s: &SettingsAssignment) -> Result<f64> {
    let spec = InequalitySpec::standard(t.n_parties())?;
    spec.expression().evaluate(t, s)
}

/// Outcome of a direct maximization over measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LhsMaximum {
    pub value: f64,
    /// `value / classical_bound`.
    pub ratio: f64,
    pub settings: SettingsAssignment,
    pub restarts_used: usize,
    pub spread: f64,
    pub converged: bool,
}

pub const SEESAW_MAX_SWEEPS: usize = 2000;
pub const SEESAW_TOL: f64 = 1e-13;

struct SeesawRun {
    value: f64,
    settings: Vec<Vec<Vector3<f64>>>,
    converged: bool,
}

/// Party-wise ascent: for fixed term signs the expression is linear in every
/// setting vector, so each vector jumps to its normalized coefficient.
fn seesaw(expr: &BellExpression, t: &CorrelationTensor, mut settings: Vec<Vec<Vector3<f64>>>) -> SeesawRun {
    let n = expr.n_parties();
    let dense = t.to_dense();
    let mut value = expr.evaluate_vectors(t, &settings);
    let mut converged = false;
    for _ in 0..SEESAW_MAX_SWEEPS {
        let before = value;
        for j in 0..n {
            let mut grads = vec![Vector3::zeros(); expr.settings_per_party[j]];
            for term in &expr.terms {
                let vecs = expr.term_vectors(term, &settings);
                // contract every party but j
                let mut rest = dense.clone();
                for (p, v) in vecs.iter().enumerate().rev() {
                    if p != j {
                        rest = rest.contract_mode(p, v.as_slice());
                    }
                }
                let g = Vector3::new(rest.data[0], rest.data[1], rest.data[2]);
                let sign = if g.dot(&vecs[j]) < 0.0 { -1.0 } else { 1.0 };
                for &(k, c) in &term.combos[j] {
                    grads[k] += g * (term.weight * sign * c);
                }
            }
            for (k, g) in grads.iter().enumerate() {
                let norm = g.norm();
                if norm > 1e-300 {
                    settings[j][k] = g / norm;
                }
            }
        }
        value = expr.evaluate_vectors(t, &settings);
        if value - before <= SEESAW_TOL * value.abs() {
            converged = true;
            break;
        }
    }
    SeesawRun { value, settings, converged }
}

/// Deterministic multi-start see-saw; `warm` starts run first.
pub(crate) fn maximize_expression(
    t: &CorrelationTensor,
    expr: &BellExpression,
    warm: Vec<SettingsAssignment>,
    opts: &Options,
) -> LhsMaximum {
    let total = opts.restarts.max(1).max(warm.len());
    let runs: Vec<SeesawRun> = (0..total)
        .into_par_iter()
        .map(|k| {
            let start = match warm.get(k) {
                Some(w) => w.vectors(),
                None => SettingsAssignment::random(&expr.settings_per_party, &mut restart_rng(opts.seed, k)).vectors(),
            };
            seesaw(expr, t, start)
        })
        .collect();
    let best = pick_best(runs.iter().map(|r| r.value));
    let pool: Vec<f64> = runs.iter().filter(|r| r.converged).map(|r| r.value).collect();
    let spread = if pool.is_empty() {
        0.0
    } else {
        pool.iter().copied().fold(f64::NEG_INFINITY, f64::max) - pool.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let converged = runs.iter().all(|r| r.converged);
    let run = &runs[best];
    LhsMaximum {
        value: run.value,
        ratio: f64::NAN,
        settings: SettingsAssignment::from_vectors(&run.settings).expect("see-saw keeps unit vectors"),
        restarts_used: runs.len(),
        spread,
        converged,
    }
}

/// Which setting indices (for the first N-1 parties) and which last-party
/// combination each criterion term feeds, per family.
struct Block {
    first_setting: usize,
    single: bool,
    last_sign: f64,
}

fn blocks(family: Family) -> [Block; 2] {
    match family {
        Family::F442 => [
            Block { first_setting: 0, single: false, last_sign: 1.0 },
            Block { first_setting: 2, single: false, last_sign: -1.0 },
        ],
        Family::F332 => [
            Block { first_setting: 0, single: true, last_sign: 1.0 },
            Block { first_setting: 1, single: false, last_sign: -1.0 },
        ],
        Family::FN => [
            Block { first_setting: 0, single: false, last_sign: -1.0 },
            Block { first_setting: 2, single: false, last_sign: 1.0 },
        ],
        Family::Standard => unreachable!("the two-setting family has no block structure"),
    }
}

/// Explicit settings realizing a criterion optimum.
///
/// For two-party blocks the plane bases are aligned with the singular vectors
/// of the projected slice; the first party then weighs its two axes by the
/// singular values and the second uses the 45-degree rotated pair, which makes
/// every modulus in the block equal its maximal value. Larger blocks use equal
/// weights. The last party splits its two directions in proportion to the
/// block values.
pub fn settings_from_frames(
    t: &CorrelationTensor,
    family: Family,
    frames: &CriterionFrames,
) -> Result<SettingsAssignment> {
    let n = t.n_parties();
    if family == Family::Standard {
        let sub = frames.subspaces.first().ok_or_else(|| Error::Validation("no subspaces".into()))?;
        let parties: Vec<Vec<Vector3<f64>>> = sub
            .iter()
            .map(|b| {
                let (x, y) = (Vector3::from(b[0]), Vector3::from(b[1]));
                vec![(x + y).normalize(), (x - y).normalize()]
            })
            .collect();
        return SettingsAssignment::from_vectors(&parties);
    }
    let spec = InequalitySpec::for_family(family, n)?;
    require(t, &spec)?;
    if frames.directions.len() != 2 || frames.subspaces.len() != 2 {
        return Err(Error::Validation("criterion frames must have two terms".into()));
    }
    let mut settings: Vec<Vec<Vector3<f64>>> =
        spec.settings_per_party.iter().map(|&m| vec![Vector3::z(); m]).collect();
    let mut block_values = [0.0; 2];
    for (b, block) in blocks(family).iter().enumerate() {
        let c = Vector3::from(frames.directions[b]);
        let bases: Vec<DMatrix<f64>> = frames.subspaces[b]
            .iter()
            .map(|vs| DMatrix::from_fn(3, vs.len(), |r, k| vs[k][r]))
            .collect();
        let slice = t.contract_party(n - 1, &c)?;
        if block.single {
            for (j, basis) in bases.iter().enumerate() {
                settings[j][block.first_setting] = Vector3::new(basis[(0, 0)], basis[(1, 0)], basis[(2, 0)]);
            }
            block_values[b] = slice.contract_unchecked(&[settings[0][0], settings[1][0]]).abs();
            continue;
        }
        let axes: Vec<[Vector3<f64>; 2]> = if n == 3 {
            let m = slice.as_matrix3().expect("three-party slice");
            let (b0, b1) = (&bases[0], &bases[1]);
            let x0 = b0.transpose() * DMatrix::from_fn(3, 3, |r, c| m[(r, c)]) * b1;
            let svd = x0.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let s = &svd.singular_values;
            let a_axes = [b0 * u.column(0), b0 * u.column(1)];
            let b_axes = [b1 * vt.row(0).transpose(), b1 * vt.row(1).transpose()];
            let norm = s[0].hypot(s[1]);
            let (ap, am) = if norm > 0.0 { (s[0] / norm, s[1] / norm) } else { (1.0, 1.0) };
            let v3 = |m: nalgebra::DVector<f64>| Vector3::new(m[0], m[1], m[2]);
            let (a0, a1) = (v3(a_axes[0].clone_owned()), v3(a_axes[1].clone_owned()));
            let (b0v, b1v) = (v3(b_axes[0].clone_owned()), v3(b_axes[1].clone_owned()));
            vec![
                [(a0 * ap + a1 * am).normalize(), (a0 * ap - a1 * am).normalize()],
                [b0v, b1v],
            ]
        } else {
            bases
                .iter()
                .map(|basis| {
                    let x = Vector3::new(basis[(0, 0)], basis[(1, 0)], basis[(2, 0)]);
                    let y = Vector3::new(basis[(0, 1)], basis[(1, 1)], basis[(2, 1)]);
                    [(x + y).normalize(), (x - y).normalize()]
                })
                .collect()
        };
        for (j, pair) in axes.iter().enumerate() {
            settings[j][block.first_setting] = pair[0];
            settings[j][block.first_setting + 1] = pair[1];
        }
    }
    // block values with a unit last-party direction, then the Cauchy split
    let expr = spec.expression();
    let dirs = [Vector3::from(frames.directions[0]), Vector3::from(frames.directions[1])];
    for (b, block) in blocks(family).iter().enumerate() {
        if block.single {
            block_values[b] *= 4.0;
            continue;
        }
        block_values[b] = expr
            .terms
            .iter()
            .filter(|term| term.combos[n - 1][1].1 == block.last_sign)
            .map(|term| {
                let mut vecs = expr.term_vectors(term, &settings);
                vecs[n - 1] = dirs[b];
                term.weight * t.contract_unchecked(&vecs).abs()
            })
            .sum();
    }
    let (plus, minus) = if blocks(family)[0].last_sign > 0.0 {
        ((block_values[0], dirs[0]), (block_values[1], dirs[1]))
    } else {
        ((block_values[1], dirs[1]), (block_values[0], dirs[0]))
    };
    let norm = plus.0.hypot(minus.0);
    let (cp, cm) = if norm > 0.0 { (plus.0 / norm, minus.0 / norm) } else { (1.0, 1.0) };
    settings[n - 1][0] = (plus.1 * cp + minus.1 * cm).normalize();
    settings[n - 1][1] = (plus.1 * cp - minus.1 * cm).normalize();
    SettingsAssignment::from_vectors(&settings)
}

/// Maximizes the left-hand side of `spec` over all measurement settings.
///
/// Warm starts are built from the optimum of the matching tensor criterion;
/// the remaining restarts begin from random settings.
pub fn maximize_lhs(t: &CorrelationTensor, spec: &InequalitySpec, opts: &Options) -> Result<LhsMaximum> {
    require(t, spec)?;
    opts.check()?;
    let expr = spec.expression();
    let frames = match spec.family {
        Family::F442 => criteria::condition_442(t, opts)?.frames,
        Family::F332 => criteria::condition_332(t, opts)?.frames,
        Family::FN => criteria::condition_n(t, opts)?.frames,
        Family::Standard => criteria::standard_plane_sum(t, opts)?.frames,
    };
    let warm = vec![settings_from_frames(t, spec.family, &frames)?];
    let mut best = maximize_expression(t, &expr, warm, opts);
    best.ratio = best.value / spec.classical_bound;
    Ok(best)
}
