//! Polarization qubits, density matrices and observables.
//!
//! All 2×2 matrices are written in the ordered basis `(|L⟩, |R⟩)` of left
//! and right circular polarization, so `σz = |L⟩⟨L| − |R⟩⟨R|`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{hermitian_eigenvalues_2x2, CMatrix};
use crate::{Error, Result, C64};

const STATE_TOL: f64 = 1e-9;
const MATRIX_TOL: f64 = 1e-12;

/// Pure polarization state `amp_l |L⟩ + amp_r |R⟩`.
///
/// Global phase is not fixed; compare states through [`fidelity`] or
/// their density matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub amp_l: C64,
    pub amp_r: C64,
}

impl PolarizationState {
    pub const L: PolarizationState = PolarizationState {
        amp_l: C64::new(1.0, 0.0),
        amp_r: C64::new(0.0, 0.0),
    };
    pub const R: PolarizationState = PolarizationState {
        amp_l: C64::new(0.0, 0.0),
        amp_r: C64::new(1.0, 0.0),
    };

    /// Builds a state from amplitudes whose norm is already one (within 1e-9);
    /// the result is renormalized exactly.
    pub fn new(amp_l: C64, amp_r: C64) -> Result<Self> {
        let norm = libm::sqrt(amp_l.norm_sqr() + amp_r.norm_sqr());
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self::normalize(amp_l, amp_r))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn from_unnormalized(amp_l: C64, amp_r: C64) -> Result<Self> {
        let norm = libm::sqrt(amp_l.norm_sqr() + amp_r.norm_sqr());
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self::normalize(amp_l, amp_r))
    }

    fn normalize(amp_l: C64, amp_r: C64) -> Self {
        let norm = libm::sqrt(amp_l.norm_sqr() + amp_r.norm_sqr());
        PolarizationState {
            amp_l: amp_l / norm,
            amp_r: amp_r / norm,
        }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amp_l.norm_sqr() + self.amp_r.norm_sqr())
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.amp_l, self.amp_r]
    }

    /// The state orthogonal to `self`.
    pub fn orthogonal(&self) -> Self {
        PolarizationState {
            amp_l: -self.amp_r.conj(),
            amp_r: self.amp_l.conj(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PolarizationState) -> C64 {
        self.amp_l.conj() * other.amp_l + self.amp_r.conj() * other.amp_r
    }
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &PolarizationState, b: &PolarizationState) -> f64 {
    a.inner(b).norm_sqr()
}

/// Qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.rows() != 2 || entries.cols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: entries.rows(),
            });
        }
        if !entries.is_hermitian(MATRIX_TOL) {
            return Err(Error::Configuration("density matrix is not Hermitian"));
        }
        if (entries.trace().re - 1.0).abs() > MATRIX_TOL {
            return Err(Error::Configuration(
                "density matrix trace differs from one",
            ));
        }
        if hermitian_eigenvalues_2x2(&entries)[0] < -MATRIX_TOL {
            return Err(Error::Configuration(
                "density matrix has a negative eigenvalue",
            ));
        }
        Ok(DensityMatrix { entries })
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            entries: CMatrix::identity(2).scale(C64::new(0.5, 0.0)),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        Observable::paulis().map(|o| expectation(&o, self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObservableLabel {
    SigmaX,
    SigmaY,
    SigmaZ,
    Custom,
}

impl ObservableLabel {
    pub fn name(self) -> &'static str {
        match self {
            ObservableLabel::SigmaX => "sigma_x",
            ObservableLabel::SigmaY => "sigma_y",
            ObservableLabel::SigmaZ => "sigma_z",
            ObservableLabel::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigma_x" | "x" | "X" => Some(ObservableLabel::SigmaX),
            "sigma_y" | "y" | "Y" => Some(ObservableLabel::SigmaY),
            "sigma_z" | "z" | "Z" => Some(ObservableLabel::SigmaZ),
            "custom" => Some(ObservableLabel::Custom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PauliLabel {
    X,
    Y,
    Z,
}

fn pauli_matrix(p: PauliLabel) -> CMatrix {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    CMatrix::from_2x2(match p {
        PauliLabel::X => [[o, l], [l, o]],
        PauliLabel::Y => [[o, -i], [i, o]],
        PauliLabel::Z => [[l, o], [o, -l]],
    })
}

/// A Hermitian observable on the polarization qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub label: ObservableLabel,
    matrix: CMatrix,
}

impl Observable {
    pub fn custom(matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != 2 || matrix.cols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: matrix.rows(),
            });
        }
        if !matrix.is_hermitian(MATRIX_TOL) {
            return Err(Error::Configuration("observable is not Hermitian"));
        }
        Ok(Observable {
            label: ObservableLabel::Custom,
            matrix,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `σx, σy, σz` in that order.
    pub fn paulis() -> [Observable; 3] {
        [
            ObservableLabel::SigmaX,
            ObservableLabel::SigmaY,
            ObservableLabel::SigmaZ,
        ]
        .map(|l| pauli(l).expect("Pauli labels have matrices"))
    }
}

pub fn pauli(label: ObservableLabel) -> Result<Observable> {
    let p = match label {
        ObservableLabel::SigmaX => PauliLabel::X,
        ObservableLabel::SigmaY => PauliLabel::Y,
        ObservableLabel::SigmaZ => PauliLabel::Z,
        ObservableLabel::Custom => return Err(Error::UnknownLabel),
    };
    Ok(Observable {
        label,
        matrix: pauli_matrix(p),
    })
}

/// Waveplate angles of the state-preparation stage: a half-wave plate at
/// `zeta1` followed by a quarter-wave plate at `theta1` (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepParams {
    pub zeta1: f64,
    pub theta1: f64,
}

/// Polarization state produced by the preparation waveplates.
pub fn input_state(p: PrepParams) -> PolarizationState {
    let arg = 2.0 * p.zeta1 - p.theta1;
    let (c, s) = (libm::cos(arg), libm::sin(arg));
    let amp_l = C64::from_polar(1.0, p.theta1) * ((c - s) * core::f64::consts::FRAC_1_SQRT_2);
    let amp_r = C64::from_polar(1.0, -p.theta1) * ((c + s) * core::f64::consts::FRAC_1_SQRT_2);
    // |c - s|² + |c + s|² = 2 exactly in real arithmetic; renormalize away rounding
    PolarizationState::normalize(amp_l, amp_r)
}

/// `|ψ⟩⟨ψ|`.
pub fn density(psi: &PolarizationState) -> Result<DensityMatrix> {
    let norm = psi.norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite);
    }
    if (norm - 1.0).abs() > STATE_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let a = psi.amplitudes();
    let mut m = CMatrix::zeros(2, 2);
    for r in 0..2 {
        for c in 0..2 {
            m[(r, c)] = a[r] * a[c].conj();
        }
    }
    // force exact Hermiticity and unit trace
    m[(0, 0)] = C64::new(m[(0, 0)].re, 0.0);
    m[(1, 1)] = C64::new(1.0 - m[(0, 0)].re, 0.0);
    m[(1, 0)] = m[(0, 1)].conj();
    Ok(DensityMatrix { entries: m })
}

/// `tr(O ρ)`; real for Hermitian `O`.
pub fn expectation(obs: &Observable, rho: &DensityMatrix) -> f64 {
    trace_product(obs.matrix(), rho.matrix()).re
}

/// `tr(A B)` for square matrices of equal size.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Haar-uniform pure qubit state from two independent complex Gaussians.
pub fn haar_random_state<R: Rng + ?Sized>(rng: &mut R) -> PolarizationState {
    loop {
        let g: [f64; 4] = core::array::from_fn(|_| rng.sample(StandardNormal));
        let (l, r) = (C64::new(g[0], g[1]), C64::new(g[2], g[3]));
        if let Ok(s) = PolarizationState::from_unnormalized(l, r) {
            return s;
        }
    }
}
