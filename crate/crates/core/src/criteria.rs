//! Necessary and sufficient violation conditions on the correlation tensor.
//!
//! Each criterion returns the maximum `M` of a quadratic functional of `T`.
//! The matching Bell inequality is violated iff `M > 1`, and
//! `violation_factor = sqrt(M)` is the best achievable ratio of the
//! left-hand side to the classical bound.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::bellineq::{self, InequalitySpec, SettingsAssignment};
use crate::corrtensor::{compute_tensor, top2_plane_norm, CorrelationTensor};
use crate::error::{Error, Result};
use crate::qstate::QuantumState;
use crate::subspace::{bases_to_vectors, maximize_single, CriterionFrames, MultiStart, Start, TwoTermProblem};

/// See-saw starts per requested restart in [`condition_standard`].
pub const SEESAW_STARTS_PER_RESTART: usize = 16;

/// Excess over 1 below which a maximum is treated as non-violating.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    /// Two settings per party.
    #[serde(rename = "standard")]
    Standard,
    /// 4 x 4 x 2 settings.
    #[serde(rename = "c442")]
    C442,
    /// 3 x 3 x 2 settings.
    #[serde(rename = "c332")]
    C332,
    /// 4 x ... x 4 x 2 settings.
    #[serde(rename = "cN")]
    CN,
}

impl CriterionId {
    pub const ALL: [CriterionId; 4] = [CriterionId::Standard, CriterionId::C442, CriterionId::C332, CriterionId::CN];

    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionId::Standard => "standard",
            CriterionId::C442 => "c442",
            CriterionId::C332 => "c332",
            CriterionId::CN => "cN",
        }
    }

    /// Number of parties the criterion accepts, `None` meaning any `N >= min_parties`.
    pub fn fixed_parties(&self) -> Option<usize> {
        match self {
            CriterionId::C442 | CriterionId::C332 => Some(3),
            _ => None,
        }
    }

    pub fn min_parties(&self) -> usize {
        match self {
            CriterionId::Standard => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(CriterionId::Standard),
            "c442" => Ok(CriterionId::C442),
            "c332" => Ok(CriterionId::C332),
            "cN" | "cn" => Ok(CriterionId::CN),
            other => Err(Error::Parse {
                spec: other.to_string(),
                reason: "unknown criterion (expected standard, c442, c332 or cN)".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Numeric,
}

/// Multi-start controls shared by every numerical maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Self { restarts: 32, seed: 0 }
    }
}

impl Options {
    pub(crate) fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Domain("at least one restart is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub criterion_id: CriterionId,
    pub max_value: f64,
    pub violation_factor: f64,
    /// Critical white-noise visibility `min(1, 1 / violation_factor)`.
    pub threshold: f64,
    pub method: Method,
    pub restarts_used: usize,
    /// Max minus min over converged restarts.
    pub spread: f64,
    pub converged: bool,
    pub frames: CriterionFrames,
    /// Explicit optimal measurement directions, when they are produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settings: Option<SettingsAssignment>,
}

impl CriterionResult {
    fn new(
        criterion_id: CriterionId,
        max_value: f64,
        method: Method,
        restarts_used: usize,
        spread: f64,
        converged: bool,
        frames: CriterionFrames,
    ) -> Self {
        let max_value = max_value.max(0.0);
        let violation_factor = max_value.sqrt();
        Self {
            criterion_id,
            max_value,
            violation_factor,
            threshold: critical_visibility(violation_factor),
            method,
            restarts_used,
            spread,
            converged,
            frames,
            settings: None,
        }
    }

    fn from_multistart(id: CriterionId, ms: MultiStart) -> Self {
        Self::new(
            id,
            ms.best.value,
            Method::Numeric,
            ms.restarts_used,
            ms.spread,
            ms.all_converged,
            ms.best.frames(),
        )
    }

    /// `max_value > 1`, ignoring excesses at the level of rounding noise.
    pub fn violates(&self) -> bool {
        self.max_value > 1.0 + VIOLATION_TOL
    }
}

/// Smallest visibility at which a state with this violation factor violates.
pub fn critical_visibility(violation_factor: f64) -> f64 {
    if violation_factor > 1.0 {
        1.0 / violation_factor
    } else {
        1.0
    }
}

fn require_parties(t: &CorrelationTensor, id: CriterionId) -> Result<()> {
    let n = t.n_parties();
    let ok = match id.fixed_parties() {
        Some(k) => n == k,
        None => n >= id.min_parties(),
    };
    if ok {
        Ok(())
    } else {
        let need = match id.fixed_parties() {
            Some(k) => format!("exactly {k}"),
            None => format!("at least {}", id.min_parties()),
        };
        Err(Error::Arity(format!("criterion {id} needs {need} parties, got {n}")))
    }
}

fn v3(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Closed form from the orthogonal slice decomposition along the third party:
/// the two leading slices each contribute their top-two plane norm.
///
/// This is exact whenever the optimal last-party pair is the leading Schmidt
/// pair (all GHZ-type and W states, for instance). In general it is a lower
/// bound on the numerically maximized value.
pub fn condition_442_analytic(t: &CorrelationTensor) -> Result<CriterionResult> {
    require_parties(t, CriterionId::C442)?;
    let split = t.schmidt_split(2)?;
    let mut value = 0.0;
    let mut subspaces = Vec::new();
    for slice in &split.slices[..2] {
        let p = slice.as_matrix3().expect("three-party slice");
        value += top2_plane_norm(&p);
        let svd = p.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let left = order[..2].iter().map(|&k| v3(&u.column(k).into_owned())).collect();
        let right = order[..2].iter().map(|&k| v3(&vt.row(k).transpose())).collect();
        subspaces.push(vec![left, right]);
    }
    let frames = CriterionFrames {
        directions: split.gammas[..2].iter().map(v3).collect(),
        subspaces,
    };
    Ok(CriterionResult::new(CriterionId::C442, value, Method::Analytic, 0, 0.0, true, frames))
}

fn plane_dims(n: usize) -> [Vec<usize>; 2] {
    [vec![2; n - 1], vec![2; n - 1]]
}

/// Alternating maximization of the 4 x 4 x 2 functional without any
/// analytic hint: axis, HOSVD and random starts only.
pub fn condition_442_numeric(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::C442)?;
    opts.check()?;
    let problem = TwoTermProblem::new(t, plane_dims(3));
    Ok(CriterionResult::from_multistart(CriterionId::C442, problem.solve(opts.restarts, opts.seed, vec![])))
}

fn start_from_frames(frames: &CriterionFrames) -> Start {
    let bases = [0, 1].map(|t| {
        frames.subspaces[t]
            .iter()
            .map(|vs| DMatrix::from_fn(3, vs.len(), |r, k| vs[k][r]))
            .collect()
    });
    Start {
        directions: [Vector3::from(frames.directions[0]), Vector3::from(frames.directions[1])],
        bases,
    }
}

/// The 4 x 4 x 2 criterion: numerical maximization that also starts from the
/// analytic solution, so it is never below the closed form.
pub fn condition_442(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::C442)?;
    opts.check()?;
    let analytic = condition_442_analytic(t)?;
    let problem = TwoTermProblem::new(t, plane_dims(3));
    let ms = problem.solve(opts.restarts, opts.seed, vec![start_from_frames(&analytic.frames)]);
    Ok(CriterionResult::from_multistart(CriterionId::C442, ms))
}

/// The 3 x 3 x 2 criterion: one term restricted to single directions for the
/// first two parties, one term with planes.
pub fn condition_332(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::C332)?;
    opts.check()?;
    let problem = TwoTermProblem::new(t, [vec![1, 1], vec![2, 2]]);
    Ok(CriterionResult::from_multistart(CriterionId::C332, problem.solve(opts.restarts, opts.seed, vec![])))
}

/// The N-party 4 x ... x 4 x 2 criterion.
pub fn condition_n(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::CN)?;
    opts.check()?;
    let extra = if t.n_parties() == 3 {
        vec![start_from_frames(&condition_442_analytic(t)?.frames)]
    } else {
        vec![]
    };
    let problem = TwoTermProblem::new(t, plane_dims(t.n_parties()));
    Ok(CriterionResult::from_multistart(CriterionId::CN, problem.solve(opts.restarts, opts.seed, extra)))
}

/// Largest squared norm of `T` projected onto one plane per party.
///
/// This upper-bounds the squared violation factor of every two-setting
/// correlation inequality; it is reached when the optimal planes admit
/// settings making all moduli equal.
pub fn standard_plane_sum(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::Standard)?;
    opts.check()?;
    let n = t.n_parties();
    let (value, bases, spread) = maximize_single(t, &vec![2; n], opts.restarts, opts.seed);
    let frames = CriterionFrames { directions: vec![], subspaces: vec![bases_to_vectors(&bases)] };
    Ok(CriterionResult::new(
        CriterionId::Standard,
        value,
        Method::Numeric,
        opts.restarts.max(1),
        spread,
        true,
        frames,
    ))
}

/// Best violation of the full set of two-setting correlation inequalities,
/// found by maximizing their left-hand side over measurement settings.
pub fn condition_standard(t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    require_parties(t, CriterionId::Standard)?;
    opts.check()?;
    let n = t.n_parties();
    let spec = InequalitySpec::standard(n)?;
    // the two-setting landscape has many more local maxima than the subspace
    // problems, so every requested restart becomes a batch of see-saw starts
    let seesaw_opts = Options { restarts: opts.restarts * SEESAW_STARTS_PER_RESTART, seed: opts.seed };
    let best = bellineq::maximize_lhs(t, &spec, &seesaw_opts)?;
    let factor = best.value / spec.classical_bound;
    // frames: the plane spanned by each party's two settings
    let planes = best
        .settings
        .vectors()
        .iter()
        .map(|p| {
            let x = p[0];
            let y = p[1] - x * x.dot(&p[1]);
            let y = if y.norm() > 1e-12 { y.normalize() } else { any_perpendicular(&x) };
            vec![v3(&x), v3(&y)]
        })
        .collect();
    let frames = CriterionFrames { directions: vec![], subspaces: vec![planes] };
    let mut result = CriterionResult::new(
        CriterionId::Standard,
        factor * factor,
        Method::Numeric,
        best.restarts_used,
        best.spread / spec.classical_bound,
        best.converged,
        frames,
    );
    result.settings = Some(best.settings);
    Ok(result)
}

fn any_perpendicular(x: &Vector3<f64>) -> Vector3<f64> {
    let e = if x[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (e - x * x.dot(&e)).normalize()
}

/// Dispatches to the criterion named by `id` (numerical variants).
pub fn evaluate(id: CriterionId, t: &CorrelationTensor, opts: &Options) -> Result<CriterionResult> {
    match id {
        CriterionId::Standard => condition_standard(t, opts),
        CriterionId::C442 => condition_442(t, opts),
        CriterionId::C332 => condition_332(t, opts),
        CriterionId::CN => condition_n(t, opts),
    }
}

/// Critical white-noise visibility of `state` for criterion `id`.
pub fn noise_threshold(state: &QuantumState, id: CriterionId, opts: &Options) -> Result<f64> {
    let t = compute_tensor(state)?;
    Ok(evaluate(id, &t, opts)?.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrtensor::LocalFrame;
    use crate::qstate::{make_four_photon, make_ghz, make_w};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn opts() -> Options {
        Options { restarts: 16, seed: 0 }
    }

    fn tensor(s: &QuantumState) -> CorrelationTensor {
        compute_tensor(s).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for id in CriterionId::ALL {
            assert_eq!(id.as_str().parse::<CriterionId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("c443".parse::<CriterionId>().is_err());
    }

    #[test]
    fn w3_values() {
        let t = tensor(&make_w(3).unwrap());
        assert!((condition_442_analytic(&t).unwrap().max_value - 7.0 / 3.0).abs() < 1e-9);
        assert!((condition_442_numeric(&t, &opts()).unwrap().max_value - 7.0 / 3.0).abs() < 1e-9);
        assert!((condition_n(&t, &opts()).unwrap().max_value - 7.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn small_angle_ghz_matches_closed_form() {
        for alpha in [0.05, 0.15, 0.25, 0.3] {
            let t = tensor(&make_ghz(3, alpha).unwrap());
            let expect = 1.0 + (2.0 * alpha).sin().powi(2);
            assert!((condition_442_analytic(&t).unwrap().max_value - expect).abs() < 1e-9);
            assert!((condition_442_numeric(&t, &opts()).unwrap().max_value - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn maximal_ghz_uses_the_equatorial_plane() {
        // the xy correlations alone give 4 sin^2(2 alpha)
        let t = tensor(&make_ghz(3, PI / 4.0).unwrap());
        assert!((condition_442_numeric(&t, &opts()).unwrap().max_value - 4.0).abs() < 1e-9);
        assert!((condition_442_analytic(&t).unwrap().max_value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn product_state_is_classical() {
        let t = tensor(&make_ghz(3, 0.0).unwrap());
        for id in CriterionId::ALL {
            let r = evaluate(id, &t, &opts()).unwrap();
            assert!((r.max_value - 1.0).abs() < 1e-9, "{id}: {}", r.max_value);
            assert!(!r.violates());
            assert!((r.threshold - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_tensor_gives_zero() {
        let t = CorrelationTensor::zeros(3);
        for id in CriterionId::ALL {
            let r = evaluate(id, &t, &opts()).unwrap();
            assert_eq!(r.max_value, 0.0, "{id}");
            assert_eq!(r.threshold, 1.0);
        }
        assert_eq!(condition_442_analytic(&t).unwrap().max_value, 0.0);
    }

    #[test]
    fn arity_is_checked() {
        let t2 = CorrelationTensor::zeros(2);
        let t4 = CorrelationTensor::zeros(4);
        assert!(matches!(condition_442_analytic(&t4), Err(Error::Arity(_))));
        assert!(matches!(condition_332(&t2, &opts()), Err(Error::Arity(_))));
        assert!(matches!(condition_n(&t2, &opts()), Err(Error::Arity(_))));
        assert!(condition_standard(&t2, &opts()).is_ok());
        assert!(matches!(condition_standard(&CorrelationTensor::zeros(1), &opts()), Err(Error::Arity(_))));
        assert!(matches!(condition_n(&t4, &Options { restarts: 0, seed: 0 }), Err(Error::Domain(_))));
    }

    #[test]
    fn invariant_under_local_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = tensor(&make_w(3).unwrap());
        let frames: Vec<LocalFrame> = (0..3).map(|_| LocalFrame::random(&mut rng)).collect();
        let rt = t.rotate(&frames).unwrap();
        for id in CriterionId::ALL {
            let a = evaluate(id, &t, &opts()).unwrap().max_value;
            let b = evaluate(id, &rt, &opts()).unwrap().max_value;
            assert!((a - b).abs() < 1e-8, "{id}: {a} vs {b}");
        }
    }

    #[test]
    fn quadratic_in_the_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = CorrelationTensor::random(3, &mut rng);
        for id in [CriterionId::C442, CriterionId::C332, CriterionId::CN] {
            let a = evaluate(id, &t, &opts()).unwrap().max_value;
            let b = evaluate(id, &t.scaled(0.37), &opts()).unwrap().max_value;
            assert!((b - 0.37f64.powi(2) * a).abs() < 1e-9 * a.max(1.0), "{id}");
        }
    }

    #[test]
    fn analytic_never_exceeds_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let t = CorrelationTensor::random(3, &mut rng);
            let a = condition_442_analytic(&t).unwrap().max_value;
            let n = condition_442(&t, &opts()).unwrap().max_value;
            assert!(a <= n + 1e-9 * n.max(1.0));
        }
    }

    #[test]
    fn analytic_slices_are_not_always_optimal() {
        // slices a I/sqrt(3), b E12, b E21 along the third party
        let (a, b) = (1.0, 0.9);
        let mut t = CorrelationTensor::zeros(3);
        for k in 0..3 {
            t.set(&[k, k, 0], a / 3f64.sqrt());
        }
        t.set(&[0, 1, 1], b);
        t.set(&[1, 0, 2], b);
        let analytic = condition_442_analytic(&t).unwrap().max_value;
        let numeric = condition_442_numeric(&t, &opts()).unwrap().max_value;
        assert!(numeric > analytic + 0.1, "{numeric} vs {analytic}");
    }

    #[test]
    fn ordering_of_criteria() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let states = [make_w(3).unwrap(), make_ghz(3, 0.2).unwrap(), crate::qstate::random_pure(3, &mut rng).unwrap()];
        for s in &states {
            let t = tensor(s);
            let c442 = condition_442(&t, &opts()).unwrap().max_value;
            let c332 = condition_332(&t, &opts()).unwrap().max_value;
            let std = condition_standard(&t, &opts()).unwrap().max_value;
            let plane = standard_plane_sum(&t, &opts()).unwrap().max_value;
            assert!(c442 >= c332 - 1e-9);
            assert!(c442 >= std - 1e-9);
            assert!(plane >= std - 1e-9);
        }
    }

    #[test]
    fn standard_values_for_named_states() {
        let w = condition_standard(&tensor(&make_w(3).unwrap()), &opts()).unwrap();
        assert!((w.violation_factor - 1.5229).abs() < 5e-4, "{}", w.violation_factor);
        let fp = condition_standard(&tensor(&make_four_photon()), &opts()).unwrap();
        assert!((fp.violation_factor - 4.0 * 2f64.sqrt() / 3.0).abs() < 1e-6, "{}", fp.violation_factor);
        let s = w.settings.unwrap();
        assert_eq!(s.shape(), vec![2, 2, 2]);
    }

    #[test]
    fn noise_threshold_is_inverse_factor() {
        let w = make_w(3).unwrap();
        let v = noise_threshold(&w, CriterionId::C442, &opts()).unwrap();
        assert!((v - (3.0f64 / 7.0).sqrt()).abs() < 1e-9);
    }
}
