//! Full N-party correlation tensors `T_{i1..iN} = Tr(rho sigma_i1 x ... x sigma_iN)`.
//!
//! Index values 0, 1, 2 stand for the Pauli directions x, y, z of the current
//! local frames. Entries are stored densely in row-major order, party 0 first.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::qstate::QuantumState;

pub const UNIT_TOL: f64 = 1e-10;
pub const IMAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct CorrelationTensor {
    n_parties: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    n_parties: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawTensor> for CorrelationTensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        CorrelationTensor::new(raw.n_parties, raw.entries)
    }
}

impl CorrelationTensor {
    pub fn new(n_parties: usize, entries: Vec<f64>) -> Result<Self> {
        if n_parties == 0 {
            return Err(Error::Arity("a correlation tensor needs at least one party".into()));
        }
        let len = 3usize.pow(n_parties as u32);
        if entries.len() != len {
            return Err(Error::Validation(format!(
                "{} entries given, {n_parties} parties need {len}",
                entries.len()
            )));
        }
        Ok(Self { n_parties, entries })
    }

    pub fn zeros(n_parties: usize) -> Self {
        Self { n_parties, entries: vec![0.0; 3usize.pow(n_parties as u32)] }
    }

    /// Tensor with i.i.d. standard normal entries.
    pub fn random<R: Rng + ?Sized>(n_parties: usize, rng: &mut R) -> Self {
        let len = 3usize.pow(n_parties as u32);
        Self { n_parties, entries: (0..len).map(|_| rng.sample(StandardNormal)).collect() }
    }

    /// Outer product of one 3-vector per party.
    pub fn product(vectors: &[Vector3<f64>]) -> Self {
        let mut entries = vec![1.0];
        for v in vectors {
            entries = entries.iter().flat_map(|e| v.iter().map(move |x| e * x)).collect();
        }
        Self { n_parties: vectors.len(), entries }
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.n_parties, "index arity");
        idx.iter().fold(0, |acc, &i| {
            assert!(i < 3, "tensor index out of range");
            acc * 3 + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = self.flat_index(idx);
        self.entries[k] = value;
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_parties: self.n_parties,
            entries: self.entries.iter().map(|x| factor * x).collect(),
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.n_parties, other.n_parties);
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    /// The rank-2 case as a 3x3 matrix (row index = first party).
    pub fn as_matrix3(&self) -> Option<Matrix3<f64>> {
        (self.n_parties == 2).then(|| Matrix3::from_row_slice(&self.entries))
    }

    pub(crate) fn to_dense(&self) -> Dense {
        Dense::new(vec![3; self.n_parties], self.entries.clone())
    }

    pub(crate) fn from_dense(d: Dense) -> Self {
        debug_assert!(d.shape.iter().all(|&s| s == 3));
        Self { n_parties: d.shape.len(), entries: d.data }
    }

    /// Expresses the tensor in new local frames (one per party).
    pub fn rotate(&self, frames: &[LocalFrame]) -> Result<Self> {
        if frames.len() != self.n_parties {
            return Err(Error::Arity(format!(
                "{} frames given for {} parties",
                frames.len(),
                self.n_parties
            )));
        }
        let mut d = self.to_dense();
        for (party, f) in frames.iter().enumerate() {
            f.check()?;
            d = d.mode_mul(party, &DMatrix::from_iterator(3, 3, f.0.iter().copied()));
        }
        Ok(Self::from_dense(d))
    }

    /// Contracts every party with a unit direction: the correlation function
    /// for those measurement settings.
    pub fn contract(&self, dirs: &[Vector3<f64>]) -> Result<f64> {
        if dirs.len() != self.n_parties {
            return Err(Error::Arity(format!(
                "{} directions given for {} parties",
                dirs.len(),
                self.n_parties
            )));
        }
        for (k, d) in dirs.iter().enumerate() {
            if (d.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::Validation(format!(
                    "direction for party {k} has norm {}",
                    d.norm()
                )));
            }
        }
        Ok(self.contract_unchecked(dirs))
    }

    /// Multilinear contraction with arbitrary (not necessarily unit) vectors.
    pub fn contract_unchecked(&self, dirs: &[Vector3<f64>]) -> f64 {
        let mut acc = self.entries.clone();
        // contract the last party first so each step is a contiguous reduction
        for d in dirs.iter().rev() {
            acc = acc.chunks_exact(3).map(|c| c[0] * d[0] + c[1] * d[1] + c[2] * d[2]).collect();
        }
        acc[0]
    }

    /// Contracts a single party, leaving a tensor over the remaining parties.
    pub fn contract_party(&self, party: usize, v: &Vector3<f64>) -> Result<Self> {
        if self.n_parties < 2 {
            return Err(Error::Arity("cannot remove the only party of a tensor".into()));
        }
        if party >= self.n_parties {
            return Err(Error::Arity(format!("party {party} out of range")));
        }
        Ok(Self::from_dense(self.to_dense().contract_mode(party, v.as_slice())))
    }

    /// Orthogonal slice decomposition `T = sum_i P_i (x) gamma_i` along `party`.
    pub fn schmidt_split(&self, party: usize) -> Result<SchmidtSlices> {
        if self.n_parties < 2 {
            return Err(Error::Arity("Schmidt split needs at least two parties".into()));
        }
        if party >= self.n_parties {
            return Err(Error::Arity(format!("party {party} out of range")));
        }
        let d = self.to_dense();
        let unfolding = d.unfold(party);
        let svd = unfolding.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let mut gammas = Vec::with_capacity(3);
        let mut slices = Vec::with_capacity(3);
        let mut norms = Vec::with_capacity(3);
        for &k in &order {
            let mut g = Vector3::new(u[(0, k)], u[(1, k)], u[(2, k)]).normalize();
            let lead = g.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                g = -g;
            }
            let slice = Self::from_dense(d.contract_mode(party, g.as_slice()));
            norms.push(slice.norm());
            gammas.push(g);
            slices.push(slice);
        }
        Ok(SchmidtSlices { party, gammas, slices, norms })
    }
}

/// Orthonormal change of basis for one party; rows are the new axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame(pub Matrix3<f64>);

impl LocalFrame {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let f = Self(m);
        f.check()?;
        Ok(f)
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_rows(rows: [Vector3<f64>; 3]) -> Result<Self> {
        Self::new(Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]))
    }

    /// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for k in 0..3 {
            if r[(k, k)] < 0.0 {
                q.column_mut(k).neg_mut();
            }
        }
        Self(q.transpose())
    }

    pub fn axis(&self, k: usize) -> Vector3<f64> {
        self.0.row(k).transpose()
    }

    fn check(&self) -> Result<()> {
        let dev = (self.0 * self.0.transpose() - Matrix3::identity()).abs().max();
        if dev > UNIT_TOL {
            Err(Error::Validation(format!("frame rows are not orthonormal (deviation {dev:e})")))
        } else {
            Ok(())
        }
    }
}

/// Result of [`CorrelationTensor::schmidt_split`], ordered by decreasing slice norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSlices {
    pub party: usize,
    pub gammas: Vec<Vector3<f64>>,
    pub slices: Vec<CorrelationTensor>,
    pub norms: Vec<f64>,
}

impl SchmidtSlices {
    pub fn reconstruct(&self) -> CorrelationTensor {
        let n = self.slices[0].n_parties() + 1;
        let mut out = CorrelationTensor::zeros(n);
        let inner = 3usize.pow((n - 1 - self.party) as u32);
        for (p, g) in self.slices.iter().zip(&self.gammas) {
            for (k, &pv) in p.entries.iter().enumerate() {
                let (o, i) = (k / inner, k % inner);
                for a in 0..3 {
                    out.entries[(o * 3 + a) * inner + i] += pv * g[a];
                }
            }
        }
        out
    }
}

/// Sum of the two largest squared singular values of a 3x3 slice.
pub fn top2_plane_norm(p: &Matrix3<f64>) -> f64 {
    let mut s: Vec<f64> = p.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] * s[0] + s[1] * s[1]
}

/// Computes the full correlation tensor of a state.
pub fn compute_tensor(state: &QuantumState) -> Result<CorrelationTensor> {
    state.validate()?;
    let n = state.n_qubits();
    let dim = state.dim();
    let rho = state.density_matrix();
    let len = 3usize.pow(n as u32);
    let mut entries = Vec::with_capacity(len);
    let mut digits = vec![0usize; n];
    for flat in 0..len {
        let mut rest = flat;
        for k in (0..n).rev() {
            digits[k] = rest % 3;
            rest /= 3;
        }
        // Pauli string P maps |b> to phase(b) |b ^ flip>
        let flip = digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 2)
            .fold(0usize, |m, (k, _)| m | 1 << (n - 1 - k));
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..dim {
            let mut phase = Complex64::new(1.0, 0.0);
            for (k, &d) in digits.iter().enumerate() {
                let bit = (b >> (n - 1 - k)) & 1;
                let sign = if bit == 1 { -1.0 } else { 1.0 };
                match d {
                    1 => phase *= Complex64::new(0.0, sign),
                    2 => phase *= sign,
                    _ => {}
                }
            }
            acc += rho[(b, b ^ flip)] * phase;
        }
        if acc.im.abs() > IMAG_TOL {
            return Err(Error::Validation(format!(
                "correlation entry {flat} has imaginary part {:e}",
                acc.im
            )));
        }
        entries.push(acc.re);
    }
    CorrelationTensor::new(n, entries)
}
