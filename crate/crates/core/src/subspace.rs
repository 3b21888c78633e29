//! Alternating subspace ascent shared by the tensor criteria.
//!
//! A two-term problem maximizes
//!
//! ```text
//! F = || T x_{j<N} B^a_j^T x_N c_a ||^2 + || T x_{j<N} B^b_j^T x_N c_b ||^2
//! ```
//!
//! over an orthonormal pair `(c_a, c_b)` for the last party and, per term,
//! one orthonormal basis `B_j` (3 x d_j, d_j in {1, 2}) for every other party.
//! Every block update is an exact maximization with the other blocks held
//! fixed, so `F` never decreases.

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrtensor::{CorrelationTensor, LocalFrame};
use crate::dense::Dense;

pub const MAX_ITERATIONS: usize = 500;
/// Relative objective change below which a restart counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-12;
/// Allowed decrease per step before the ascent is flagged as non-monotone.
const MONOTONE_SLACK: f64 = 1e-12;

/// The six axis permutations (rows of the permutation frames).
pub(crate) const AXIS_PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Optimizing directions and subspaces, in the lab frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriterionFrames {
    /// Last-party direction of each term.
    pub directions: Vec<[f64; 3]>,
    /// `subspaces[term][party]`: orthonormal basis vectors spanning that
    /// party's measurement subspace in the term.
    pub subspaces: Vec<Vec<Vec<[f64; 3]>>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Start {
    pub directions: [Vector3<f64>; 2],
    pub bases: [Vec<DMatrix<f64>>; 2],
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub value: f64,
    pub directions: [Vector3<f64>; 2],
    pub bases: [Vec<DMatrix<f64>>; 2],
    pub converged: bool,
    // only inspected by tests
    #[allow(dead_code)]
    pub monotone: bool,
}

impl Solution {
    pub fn frames(&self) -> CriterionFrames {
        CriterionFrames {
            directions: self.directions.iter().map(|c| [c[0], c[1], c[2]]).collect(),
            subspaces: self.bases.iter().map(|b| bases_to_vectors(b)).collect(),
        }
    }
}

pub(crate) fn bases_to_vectors(bases: &[DMatrix<f64>]) -> Vec<Vec<[f64; 3]>> {
    bases
        .iter()
        .map(|b| b.column_iter().map(|c| [c[0], c[1], c[2]]).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct MultiStart {
    pub best: Solution,
    pub spread: f64,
    pub restarts_used: usize,
    pub all_converged: bool,
}

/// Top-`d` eigenvectors of a symmetric matrix as columns, largest first.
pub(crate) fn top_eigvecs(g: &DMatrix<f64>, d: usize) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..g.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let cols: Vec<_> = order[..d].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
    let sum = order[..d].iter().map(|&k| eig.eigenvalues[k]).sum();
    (DMatrix::from_columns(&cols), sum)
}

fn first_columns(frame: &Matrix3<f64>, d: usize) -> DMatrix<f64> {
    // frame rows are axes; use the first d of them as basis columns
    DMatrix::from_fn(3, d, |r, c| frame[(c, r)])
}

/// Projects `slice` on every mode except `skip` onto the given bases.
fn project_except(slice: &Dense, bases: &[DMatrix<f64>], skip: Option<usize>) -> Dense {
    let mut out = slice.clone();
    for (j, b) in bases.iter().enumerate() {
        if Some(j) != skip {
            out = out.mode_mul(j, &b.transpose());
        }
    }
    out
}

/// One sweep of per-party subspace updates; returns the projected norm.
pub(crate) fn hooi_sweep(slice: &Dense, bases: &mut [DMatrix<f64>]) -> f64 {
    for j in 0..bases.len() {
        let d = bases[j].ncols();
        let projected = project_except(slice, bases, Some(j));
        let (b, _) = top_eigvecs(&projected.unfold_gram(j), d);
        bases[j] = b;
    }
    project_except(slice, bases, None).norm_sq()
}

/// Initial bases from the leading left singular vectors of each unfolding.
pub(crate) fn hosvd_bases(slice: &Dense, dims: &[usize]) -> Vec<DMatrix<f64>> {
    dims.iter()
        .enumerate()
        .map(|(j, &d)| top_eigvecs(&slice.unfold_gram(j), d).0)
        .collect()
}

/// Maximizes a single projected norm `||T x_j B_j^T||^2` over all parties.
pub(crate) fn maximize_single(
    tensor: &CorrelationTensor,
    dims: &[usize],
    restarts: usize,
    seed: u64,
) -> (f64, Vec<DMatrix<f64>>, f64) {
    let dense = tensor.to_dense();
    let runs: Vec<(f64, Vec<DMatrix<f64>>)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut bases: Vec<DMatrix<f64>> = if k < AXIS_PERMUTATIONS.len() {
                let f = permutation_frame(k);
                dims.iter().map(|&d| first_columns(&f, d)).collect()
            } else if k == AXIS_PERMUTATIONS.len() {
                hosvd_bases(&dense, dims)
            } else {
                let mut rng = restart_rng(seed, k);
                dims.iter().map(|&d| first_columns(&LocalFrame::random(&mut rng).0, d)).collect()
            };
            let mut value = project_except(&dense, &bases, None).norm_sq();
            for _ in 0..MAX_ITERATIONS {
                let next = hooi_sweep(&dense, &mut bases);
                let done = next - value <= CONVERGENCE_TOL * next.abs();
                value = next;
                if done {
                    break;
                }
            }
            (value, bases)
        })
        .collect();
    let (lo, hi) = runs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.0), hi.max(r.0))
    });
    let best = pick_best(runs.iter().map(|r| r.0));
    let (value, bases) = runs[best].clone();
    (value, bases, hi - lo)
}

/// Index of the maximum; ties go to the lowest index.
pub(crate) fn pick_best(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

pub(crate) fn permutation_frame(k: usize) -> Matrix3<f64> {
    let p = AXIS_PERMUTATIONS[k % AXIS_PERMUTATIONS.len()];
    Matrix3::from_fn(|r, c| if p[r] == c { 1.0 } else { 0.0 })
}

pub(crate) struct TwoTermProblem<'a> {
    tensor: &'a CorrelationTensor,
    dense: Dense,
    dims: [Vec<usize>; 2],
}

impl<'a> TwoTermProblem<'a> {
    /// `dims[t][j]` is the subspace dimension of party `j` (< N-1) in term `t`.
    pub fn new(tensor: &'a CorrelationTensor, dims: [Vec<usize>; 2]) -> Self {
        let n = tensor.n_parties();
        assert!(n >= 2);
        assert!(dims.iter().all(|d| d.len() == n - 1));
        Self { tensor, dense: tensor.to_dense(), dims }
    }

    fn last(&self) -> usize {
        self.tensor.n_parties() - 1
    }

    fn slice(&self, c: &Vector3<f64>) -> Dense {
        self.dense.contract_mode(self.last(), c.as_slice())
    }

    /// Gram matrix of the last mode after projecting the others onto `bases`.
    fn last_gram(&self, bases: &[DMatrix<f64>]) -> Matrix3<f64> {
        let projected = project_except(&self.dense, bases, None);
        let g = projected.unfold_gram(self.last());
        Matrix3::from_fn(|r, c| g[(r, c)])
    }

    fn objective(&self, directions: &[Vector3<f64>; 2], bases: &[Vec<DMatrix<f64>>; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for t in 0..2 {
            let g = self.last_gram(&bases[t]);
            out[t] = (directions[t].transpose() * g * directions[t])[0];
        }
        out
    }

    pub fn axis_start(&self, k: usize) -> Start {
        let f = permutation_frame(k);
        let directions = [f.row(0).transpose(), f.row(1).transpose()];
        let bases = [0, 1].map(|t| self.dims[t].iter().map(|&d| first_columns(&f, d)).collect());
        Start { directions, bases }
    }

    pub fn hosvd_start(&self, k: usize) -> Start {
        let f = permutation_frame(k);
        let directions = [f.row(0).transpose(), f.row(1).transpose()];
        let bases = [0, 1].map(|t| hosvd_bases(&self.slice(&directions[t]), &self.dims[t]));
        Start { directions, bases }
    }

    pub fn random_start(&self, rng: &mut ChaCha8Rng) -> Start {
        let f = LocalFrame::random(rng).0;
        let directions = [f.row(0).transpose(), f.row(1).transpose()];
        let bases = [0, 1].map(|t| {
            self.dims[t]
                .iter()
                .map(|&d| first_columns(&LocalFrame::random(rng).0, d))
                .collect()
        });
        Start { directions, bases }
    }

    /// Runs the block ascent from one start.
    pub fn ascend(&self, start: Start) -> Solution {
        let Start { mut directions, mut bases } = start;
        let mut value: f64 = self.objective(&directions, &bases).iter().sum();
        let mut monotone = true;
        let mut converged = false;
        let mut iterations = 0;
        let slack = |v: f64| MONOTONE_SLACK * v.abs().max(1.0);

        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let before = value;

            for t in 0..2 {
                let slice = self.slice(&directions[t]);
                hooi_sweep(&slice, &mut bases[t]);
            }
            let after_planes: f64 = self.objective(&directions, &bases).iter().sum();
            monotone &= after_planes >= before - slack(before);

            let grams = [self.last_gram(&bases[0]), self.last_gram(&bases[1])];
            directions = update_pair(&grams, directions);
            value = self.objective(&directions, &bases).iter().sum();
            monotone &= value >= after_planes - slack(after_planes);

            if (value - before).abs() <= CONVERGENCE_TOL * value.abs() {
                converged = true;
                break;
            }
        }
        let value = self.objective(&directions, &bases).iter().sum();
        Solution {
            value,
            directions,
            bases,
            converged,
            monotone,
        }
    }

    /// Deterministic multi-start ascent: `extra` starts first, then the six
    /// axis-permutation frames, their HOSVD-initialized variants, and random
    /// frames until `restarts` starts have been run.
    pub fn solve(&self, restarts: usize, seed: u64, extra: Vec<Start>) -> MultiStart {
        let n_perm = AXIS_PERMUTATIONS.len();
        let total = restarts.max(1).max(extra.len());
        let runs: Vec<Solution> = (0..total)
            .into_par_iter()
            .map(|k| {
                let start = if k < extra.len() {
                    extra[k].clone()
                } else {
                    let j = k - extra.len();
                    if j < n_perm {
                        self.axis_start(j)
                    } else if j < 2 * n_perm {
                        self.hosvd_start(j - n_perm)
                    } else {
                        self.random_start(&mut restart_rng(seed, k))
                    }
                };
                self.ascend(start)
            })
            .collect();
        summarize(runs)
    }
}

pub(crate) fn summarize(runs: Vec<Solution>) -> MultiStart {
    let restarts_used = runs.len();
    let all_converged = runs.iter().all(|r| r.converged);
    let pool: Vec<f64> = if runs.iter().any(|r| r.converged) {
        runs.iter().filter(|r| r.converged).map(|r| r.value).collect()
    } else {
        runs.iter().map(|r| r.value).collect()
    };
    let spread = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - pool.iter().copied().fold(f64::INFINITY, f64::min);
    let best = pick_best(runs.iter().map(|r| r.value));
    MultiStart {
        best: runs.into_iter().nth(best).expect("at least one restart"),
        spread,
        restarts_used,
        all_converged,
    }
}

/// Orthonormal basis of the plane perpendicular to the unit vector `c`.
fn complement(c: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let k = (0..3).min_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs())).unwrap();
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u1 = (e - c * c.dot(&e)).normalize();
    let u2 = c.cross(&u1);
    (u1, u2)
}

/// Maximizer of `x^T g x` over unit `x` perpendicular to `c`.
fn best_perpendicular(g: &Matrix3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
    let (u1, u2) = complement(c);
    let h = Matrix2::new(
        (u1.transpose() * g * u1)[0],
        (u1.transpose() * g * u2)[0],
        (u2.transpose() * g * u1)[0],
        (u2.transpose() * g * u2)[0],
    );
    let eig = SymmetricEigen::new(h);
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let v = eig.eigenvectors.column(k);
    (u1 * v[0] + u2 * v[1]).normalize()
}

/// Block updates of the last-party pair for fixed Gram matrices.
fn update_pair(g: &[Matrix3<f64>; 2], [a, b]: [Vector3<f64>; 2]) -> [Vector3<f64>; 2] {
    let quad = |m: &Matrix3<f64>, x: &Vector3<f64>, y: &Vector3<f64>| (x.transpose() * m * y)[0];
    let score = |a: &Vector3<f64>, b: &Vector3<f64>| quad(&g[0], a, a) + quad(&g[1], b, b);
    let mut best = (a, b);
    let mut best_score = score(&a, &b);
    let mut keep = |x: Vector3<f64>, y: Vector3<f64>, best: &mut (Vector3<f64>, Vector3<f64>)| {
        let s = score(&x, &y);
        if s > best_score {
            best_score = s;
            *best = (x, y);
        }
    };

    let a1 = best_perpendicular(&g[0], &best.1);
    keep(a1, best.1, &mut best);
    let b1 = best_perpendicular(&g[1], &best.0);
    keep(best.0, b1, &mut best);

    // joint rotation of the pair inside its own plane, solved in closed form
    let (a, b) = best;
    let cos_coef = 0.5 * (quad(&g[0], &a, &a) - quad(&g[0], &b, &b) - quad(&g[1], &a, &a)
        + quad(&g[1], &b, &b));
    let sin_coef = quad(&g[0], &a, &b) - quad(&g[1], &a, &b);
    let theta = 0.5 * sin_coef.atan2(cos_coef);
    let (s, c) = theta.sin_cos();
    keep((a * c + b * s).normalize(), (b * c - a * s).normalize(), &mut best);
    [best.0, best.1]
}
