//! Multiqubit density matrices used as inputs to the correlation-tensor criteria.
//!
//! Qubit 0 is the leftmost tensor factor and computational basis states are
//! ordered big-endian: basis index `b` has qubit `k` in state `(b >> (n-1-k)) & 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// Density matrix of an `n`-qubit system.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    rho: DMatrix<Complex64>,
}

impl QuantumState {
    /// Wraps a density matrix after checking hermiticity, unit trace and positivity.
    pub fn from_density_matrix(n_qubits: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Arity("a state needs at least one qubit".into()));
        }
        let dim = 1usize << n_qubits;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::Validation(format!(
                "density matrix is {}x{}, expected {dim}x{dim} for {n_qubits} qubits",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let state = Self { n_qubits, rho };
        state.validate()?;
        Ok(state)
    }

    /// Pure state `|psi><psi|` from an amplitude vector (normalized here).
    pub fn from_amplitudes(n_qubits: usize, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Validation(format!(
                "{} amplitudes given for {n_qubits} qubits",
                amplitudes.len()
            )));
        }
        let psi = DVector::from_column_slice(amplitudes);
        let norm = psi.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Validation("amplitude vector has zero or non-finite norm".into()));
        }
        let psi = psi.unscale(norm);
        let rho = &psi * psi.adjoint();
        Self::from_density_matrix(n_qubits, rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn density_matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    /// Checks the density-matrix invariants.
    pub fn validate(&self) -> Result<()> {
        let rho = &self.rho;
        let herm = (rho - rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max);
        if herm > HERMITICITY_TOL {
            return Err(Error::Validation(format!("not Hermitian (max deviation {herm:e})")));
        }
        let tr = rho.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Validation(format!("trace is {tr}, expected 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::Validation(format!(
                "not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the (Hermitian part of the) density matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }
}

/// `cos(alpha)|0...0> + sin(alpha)|1...1>`.
pub fn make_ghz(n: usize, alpha: f64) -> Result<QuantumState> {
    if n < 2 {
        return Err(Error::Arity(format!("GHZ state needs n >= 2, got {n}")));
    }
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(alpha.cos(), 0.0);
    amps[(1 << n) - 1] = Complex64::new(alpha.sin(), 0.0);
    QuantumState::from_amplitudes(n, &amps)
}

/// Equal superposition of all single-excitation basis states.
pub fn make_w(n: usize) -> Result<QuantumState> {
    if n < 3 {
        return Err(Error::Arity(format!("W state needs n >= 3, got {n}")));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for k in 0..n {
        amps[1 << k] = Complex64::new(1.0, 0.0);
    }
    QuantumState::from_amplitudes(n, &amps)
}

/// `sqrt(1/3) (|0000> + |1111> + (|1010> + |0101> + |0110> + |1001>)/2)`.
pub fn make_four_photon() -> QuantumState {
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    for (bits, amp) in [
        (0b0000, 1.0),
        (0b1111, 1.0),
        (0b1010, 0.5),
        (0b0101, 0.5),
        (0b0110, 0.5),
        (0b1001, 0.5),
    ] {
        amps[bits] = Complex64::new(amp * (1.0_f64 / 3.0).sqrt(), 0.0);
    }
    QuantumState::from_amplitudes(4, &amps).expect("four-photon amplitudes are normalizable")
}

/// `(1 - v) * 1/2^N + v * rho`.
pub fn mix_white_noise(state: &QuantumState, v: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("visibility must lie in [0, 1], got {v}")));
    }
    let dim = state.dim();
    let noise = Complex64::new((1.0 - v) / dim as f64, 0.0);
    let mut rho = state.rho.scale(v);
    for i in 0..dim {
        rho[(i, i)] += noise;
    }
    QuantumState::from_density_matrix(state.n_qubits, rho)
}

/// Haar-random pure state (normalized complex Gaussian amplitudes).
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<QuantumState> {
    if n == 0 {
        return Err(Error::Arity("a state needs at least one qubit".into()));
    }
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    QuantumState::from_amplitudes(n, &amps)
}

/// Textual state description.
///
/// Grammar (whitespace is not allowed):
///
/// ```text
/// spec       := ghz | w | fourphoton | noise | random
/// ghz        := "ghz:" "n=" INT "," "alpha=" ANGLE      (keys in any order)
/// w          := "w:" "n=" INT
/// fourphoton := "fourphoton"
/// noise      := "noise:" "v=" REAL "," "inner=" spec    (inner consumes the rest)
/// random     := "random:" "n=" INT "," "seed=" INT      (Haar-random pure state)
/// ANGLE      := REAL | "pi" | "pi/" REAL | REAL "*pi"
/// ```
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Ghz { n: usize, alpha: f64 },
    W { n: usize },
    FourPhoton,
    Noise { v: f64, inner: Box<StateSpec> },
    Random { n: usize, seed: u64 },
}

impl StateSpec {
    pub fn build(&self) -> Result<QuantumState> {
        match self {
            StateSpec::Ghz { n, alpha } => make_ghz(*n, *alpha),
            StateSpec::W { n } => make_w(*n),
            StateSpec::FourPhoton => Ok(make_four_photon()),
            StateSpec::Noise { v, inner } => mix_white_noise(&inner.build()?, *v),
            StateSpec::Random { n, seed } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                random_pure(*n, &mut rng)
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            StateSpec::Ghz { n, .. } | StateSpec::W { n } | StateSpec::Random { n, .. } => *n,
            StateSpec::FourPhoton => 4,
            StateSpec::Noise { inner, .. } => inner.n_qubits(),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Ghz { n, alpha } => write!(f, "ghz:n={n},alpha={alpha}"),
            StateSpec::W { n } => write!(f, "w:n={n}"),
            StateSpec::FourPhoton => write!(f, "fourphoton"),
            StateSpec::Noise { v, inner } => write!(f, "noise:v={v},inner={inner}"),
            StateSpec::Random { n, seed } => write!(f, "random:n={n},seed={seed}"),
        }
    }
}

fn parse_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::Parse { spec: spec.to_string(), reason: reason.into() }
}

fn parse_angle(spec: &str, s: &str) -> Result<f64> {
    use std::f64::consts::PI;
    let real = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| parse_err(spec, format!("`{t}` is not a number")))
    };
    if s == "pi" {
        Ok(PI)
    } else if let Some(den) = s.strip_prefix("pi/") {
        Ok(PI / real(den)?)
    } else if let Some(num) = s.strip_suffix("*pi") {
        Ok(real(num)? * PI)
    } else {
        real(s)
    }
}

/// Splits `k1=v1,k2=v2` into pairs; `inner=` swallows the remainder.
fn key_values<'a>(spec: &str, body: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut out = Vec::new();
    let mut rest = body;
    while !rest.is_empty() {
        let (key, after) = rest
            .split_once('=')
            .ok_or_else(|| parse_err(spec, format!("expected key=value in `{rest}`")))?;
        if key == "inner" {
            out.push((key, after));
            break;
        }
        let (value, tail) = after.split_once(',').unwrap_or((after, ""));
        out.push((key, value));
        rest = tail;
    }
    Ok(out)
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
        let pairs = key_values(spec, body)?;
        let lookup = |name: &str| pairs.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
        let require = |name: &str| {
            lookup(name).ok_or_else(|| parse_err(spec, format!("missing `{name}=`")))
        };
        let int = |name: &str| -> Result<u64> {
            let v = require(name)?;
            v.parse::<u64>()
                .map_err(|_| parse_err(spec, format!("`{name}={v}` is not a non-negative integer")))
        };
        let allowed: &[&str] = match kind {
            "ghz" => &["n", "alpha"],
            "w" => &["n"],
            "fourphoton" => &[],
            "noise" => &["v", "inner"],
            "random" => &["n", "seed"],
            other => return Err(parse_err(spec, format!("unknown state kind `{other}`"))),
        };
        if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(parse_err(spec, format!("unexpected key `{k}` for `{kind}`")));
        }
        match kind {
            "ghz" => Ok(StateSpec::Ghz {
                n: int("n")? as usize,
                alpha: parse_angle(spec, require("alpha")?)?,
            }),
            "w" => Ok(StateSpec::W { n: int("n")? as usize }),
            "fourphoton" => Ok(StateSpec::FourPhoton),
            "noise" => {
                let v = require("v")?;
                let v = v
                    .parse::<f64>()
                    .map_err(|_| parse_err(spec, format!("`v={v}` is not a number")))?;
                let inner = require("inner")?.parse::<StateSpec>()?;
                Ok(StateSpec::Noise { v, inner: Box::new(inner) })
            }
            "random" => Ok(StateSpec::Random { n: int("n")? as usize, seed: int("seed")? }),
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrtensor::compute_tensor;
    use std::f64::consts::PI;

    fn single_qubit_reduced(state: &QuantumState, qubit: usize) -> [[Complex64; 2]; 2] {
        let n = state.n_qubits();
        let rho = state.density_matrix();
        let shift = n - 1 - qubit;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..state.dim() {
            for c in 0..state.dim() {
                // all other qubits must agree
                if (r ^ c) & !(1 << shift) == 0 {
                    out[(r >> shift) & 1][(c >> shift) & 1] += rho[(r, c)];
                }
            }
        }
        out
    }

    #[test]
    fn ghz_maximal_is_pure_with_mixed_marginals() {
        let s = make_ghz(3, PI / 4.0).unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-12);
        for q in 0..3 {
            let m = single_qubit_reduced(&s, q);
            assert!((m[0][0].re - 0.5).abs() < 1e-12);
            assert!((m[1][1].re - 0.5).abs() < 1e-12);
            assert!(m[0][1].norm() < 1e-12);
        }
    }

    #[test]
    fn ghz_zero_angle_is_product() {
        let s = make_ghz(3, 0.0).unwrap();
        assert!((s.density_matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(make_ghz(1, 0.3), Err(Error::Arity(_))));
        assert!(matches!(make_w(2), Err(Error::Arity(_))));
        assert!(matches!(make_ghz(3, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn w_and_four_photon_are_normalized() {
        let w = make_w(3).unwrap();
        assert!((w.density_matrix().trace().re - 1.0).abs() < 1e-12);
        let f = make_four_photon();
        assert!((f.purity() - 1.0).abs() < 1e-12);
        assert!((f.density_matrix()[(0, 0)].re - 1.0 / 3.0).abs() < 1e-12);
        assert!((f.density_matrix()[(0b1010, 0b1010)].re - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn noise_limits() {
        let w = make_w(3).unwrap();
        assert_eq!(mix_white_noise(&w, 1.0).unwrap(), w);
        let mm = mix_white_noise(&w, 0.0).unwrap();
        assert!(compute_tensor(&mm).unwrap().entries().iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(mix_white_noise(&w, 1.5), Err(Error::Domain(_))));
        assert!(matches!(mix_white_noise(&w, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_halves_every_component() {
        let w = make_w(3).unwrap();
        let full = compute_tensor(&w).unwrap();
        let half = compute_tensor(&mix_white_noise(&w, 0.5).unwrap()).unwrap();
        for (a, b) in full.entries().iter().zip(half.entries()) {
            assert!((0.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_density_matrices() {
        let mut rho = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        rho[(0, 0)] = Complex64::new(1.5, 0.0);
        rho[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(
            QuantumState::from_density_matrix(1, rho.clone()),
            Err(Error::Validation(_))
        ));
        rho[(0, 0)] = Complex64::new(0.5, 0.0);
        rho[(1, 1)] = Complex64::new(0.5, 0.0);
        rho[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(QuantumState::from_density_matrix(1, rho).is_err());
    }

    #[test]
    fn parses_state_specs() {
        let s: StateSpec = "ghz:n=3,alpha=0.2618".parse().unwrap();
        assert_eq!(s, StateSpec::Ghz { n: 3, alpha: 0.2618 });
        let s: StateSpec = "ghz:alpha=pi/12,n=4".parse().unwrap();
        assert_eq!(s, StateSpec::Ghz { n: 4, alpha: PI / 12.0 });
        assert_eq!("w:n=4".parse::<StateSpec>().unwrap(), StateSpec::W { n: 4 });
        assert_eq!("fourphoton".parse::<StateSpec>().unwrap(), StateSpec::FourPhoton);
        let s: StateSpec = "noise:v=0.8,inner=ghz:n=3,alpha=0.25*pi".parse().unwrap();
        assert_eq!(
            s,
            StateSpec::Noise {
                v: 0.8,
                inner: Box::new(StateSpec::Ghz { n: 3, alpha: 0.25 * PI })
            }
        );
        assert_eq!(s.n_qubits(), 3);
        let round: StateSpec = s.to_string().parse().unwrap();
        assert_eq!(round, s);
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in ["", "ghz", "ghz:n=3", "ghz:n=x,alpha=1", "w:n=4,alpha=1", "bogus:n=1", "noise:v=0.5"] {
            assert!(
                matches!(bad.parse::<StateSpec>(), Err(Error::Parse { .. })),
                "`{bad}` should not parse"
            );
        }
    }

    #[test]
    fn random_states_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let s = random_pure(n, &mut rng).unwrap();
            assert!((s.purity() - 1.0).abs() < 1e-12);
        }
    }
}
