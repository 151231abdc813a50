//! The quantum-walk reservoir and its effective POVM on the input qubit.
//!
//! A photon enters in `|ψ⟩ ⊗ |n=0⟩`, passes through the walk `U`, is
//! post-selected on the polarization `|ψ_pol⟩` and detected in the OAM
//! basis. The map `A = (⟨ψ_pol| ⊗ I) U (I ⊗ |0⟩)` takes the input qubit to
//! the (subnormalized) OAM amplitudes, and `μ̃_b = A†|b⟩⟨b|A` are the
//! effective measurement operators seen by the input.

use alloc::vec::Vec;

use crate::linalg::{hermitian_eigenvalues_2x2, vec_norm, CMatrix, RMatrix, Svd};
use crate::optics::{
    coin_operator, qplate_operator, CoinParams, JointOperator, OamSpace, QPlateParams,
};
use crate::qubit::{trace_product, DensityMatrix, Observable, PolarizationState};
use crate::{Error, Result, C64};

/// Q-plate orientations of the two-step walk hardware, in degrees.
pub const HARDWARE_ALPHA1_DEG: f64 = 105.0;
pub const HARDWARE_ALPHA2_DEG: f64 = 336.0;

const ISOMETRY_TOL: f64 = 1e-9;
const POVM_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for the frame rank.
pub const FRAME_RCOND: f64 = 1e-10;

/// One walk step: an optional coin followed by a q-plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStep {
    pub coin: Option<CoinParams>,
    pub qplate: QPlateParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub steps: Vec<WalkStep>,
    pub projection: PolarizationState,
    pub space: OamSpace,
}

impl WalkConfig {
    /// `cutoff` defaults to the number of q-plates, which is exactly the
    /// reach of a walker starting at `n = 0`.
    pub fn new(
        steps: Vec<WalkStep>,
        projection: PolarizationState,
        cutoff: Option<usize>,
    ) -> Result<Self> {
        let cutoff = cutoff.unwrap_or(steps.len());
        if steps.len() > cutoff {
            return Err(Error::Configuration("more q-plates than the OAM cutoff"));
        }
        PolarizationState::new(projection.amp_l, projection.amp_r)?;
        Ok(WalkConfig {
            steps,
            projection,
            space: OamSpace::new(cutoff),
        })
    }

    /// `U = S(α₂, π) C(ζ, θ, φ) S(α₁, π/2)` with the hardware orientations
    /// α₁ = 105°, α₂ = 336° and an `N = 2` window.
    pub fn two_step(coin: CoinParams, projection: PolarizationState) -> Result<Self> {
        let steps = alloc::vec![
            WalkStep {
                coin: None,
                qplate: QPlateParams {
                    alpha: HARDWARE_ALPHA1_DEG.to_radians(),
                    delta: core::f64::consts::FRAC_PI_2
                },
            },
            WalkStep {
                coin: Some(coin),
                qplate: QPlateParams {
                    alpha: HARDWARE_ALPHA2_DEG.to_radians(),
                    delta: core::f64::consts::PI
                },
            },
        ];
        Self::new(steps, projection, None)
    }

    pub fn qplate_count(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkUnitary {
    pub operator: JointOperator,
    pub config: WalkConfig,
}

/// Multiplies out the walk, rightmost (first) step applied first, and checks
/// that no amplitude starting at `n = 0` is lost to the window edge.
pub fn build_walk(cfg: &WalkConfig) -> Result<WalkUnitary> {
    let space = cfg.space;
    let mut u = JointOperator::identity(space);
    for step in &cfg.steps {
        if let Some(c) = step.coin {
            u = JointOperator::from_coin(&coin_operator(c), space).then_after(&u);
        }
        u = qplate_operator(step.qplate, space).then_after(&u);
    }

    let mut worst: f64 = 0.0;
    for pol in 0..2 {
        let mut input = alloc::vec![C64::new(0.0, 0.0); 2 * space.dim()];
        input[space.joint_index(pol, 0).expect("n = 0 is always inside")] = C64::new(1.0, 0.0);
        let out = u.matrix.mul_vec(&input);
        worst = worst.max((vec_norm(&out) - 1.0).abs());
    }
    if worst > ISOMETRY_TOL {
        return Err(Error::NormLoss { loss: worst });
    }
    Ok(WalkUnitary {
        operator: u,
        config: cfg.clone(),
    })
}

/// `A`, a `dim_OAM × 2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMap {
    pub a: CMatrix,
    pub space: OamSpace,
}

pub fn reservoir_map(u: &WalkUnitary, psi_pol: &PolarizationState) -> Result<ReservoirMap> {
    let psi_pol = PolarizationState::new(psi_pol.amp_l, psi_pol.amp_r)?;
    let space = u.operator.space;
    let dim = space.dim();
    let pol = psi_pol.amplitudes();
    let mut a = CMatrix::zeros(dim, 2);
    for col in 0..2 {
        let src = space.joint_index(col, 0).expect("n = 0 is always inside");
        for row in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for (p, amp) in pol.iter().enumerate() {
                acc += amp.conj() * u.operator.matrix[(p * dim + row, src)];
            }
            a[(row, col)] = acc;
        }
    }
    Ok(ReservoirMap { a, space })
}

impl ReservoirMap {
    /// Walk plus projection from a config in one go.
    pub fn from_config(cfg: &WalkConfig) -> Result<Self> {
        reservoir_map(&build_walk(cfg)?, &cfg.projection)
    }

    pub fn outcomes(&self) -> usize {
        self.a.rows()
    }
}

/// Effective POVM elements, one 2×2 PSD matrix per OAM outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePovm {
    elements: Vec<CMatrix>,
}

impl EffectivePovm {
    /// Checks each element is a Hermitian PSD 2×2 matrix and that the sum
    /// does not exceed the identity.
    pub fn from_elements(elements: Vec<CMatrix>) -> Result<Self> {
        let mut total = CMatrix::zeros(2, 2);
        for e in &elements {
            if e.rows() != 2 || e.cols() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: e.rows(),
                });
            }
            if !e.is_hermitian(POVM_TOL) {
                return Err(Error::Configuration("POVM element is not Hermitian"));
            }
            if hermitian_eigenvalues_2x2(e)[0] < -POVM_TOL {
                return Err(Error::Configuration(
                    "POVM element is not positive semidefinite",
                ));
            }
            total = total.add(e);
        }
        if hermitian_eigenvalues_2x2(&total)[1] > 1.0 + POVM_TOL {
            return Err(Error::Configuration("POVM elements sum above the identity"));
        }
        Ok(EffectivePovm { elements })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn sum(&self) -> CMatrix {
        self.elements
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, e| acc.add(e))
    }
}

pub fn effective_povm(a: &ReservoirMap) -> EffectivePovm {
    let elements = (0..a.a.rows())
        .map(|b| {
            let row = a.a.row(b);
            let mut m = CMatrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] = row[i].conj() * row[j];
                }
            }
            m
        })
        .collect();
    EffectivePovm { elements }
}

/// `p_b = tr(μ̃_b ρ)`, clamped at zero. Subnormalized: the post-selection
/// discards norm and nothing is renormalized here.
pub fn probabilities(povm: &EffectivePovm, rho: &DensityMatrix) -> Vec<f64> {
    povm.elements
        .iter()
        .map(|e| trace_product(e, rho.matrix()).re.max(0.0))
        .collect()
}

/// Pauli-basis coordinates `(tr M, tr Mσx, tr Mσy, tr Mσz)` of a 2×2 matrix.
pub fn pauli_coordinates(m: &CMatrix) -> [f64; 4] {
    let [x, y, z] = Observable::paulis();
    [
        m.trace().re,
        trace_product(m, x.matrix()).re,
        trace_product(m, y.matrix()).re,
        trace_product(m, z.matrix()).re,
    ]
}

/// Frame matrix: row `b` holds the Pauli coordinates of `μ̃_b`.
pub fn frame_matrix(povm: &EffectivePovm) -> RMatrix {
    let rows: Vec<[f64; 4]> = povm.elements.iter().map(pauli_coordinates).collect();
    if rows.is_empty() {
        return RMatrix::zeros(0, 4);
    }
    RMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameInfo {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl FrameInfo {
    pub fn sigma_min(&self) -> f64 {
        if self.rank < 4 {
            return 0.0;
        }
        self.singular_values[3]
    }

    pub fn is_informationally_complete(&self) -> bool {
        self.rank == 4
    }
}

/// Rank 4 means every qubit observable is linearly recoverable.
pub fn frame_rank(povm: &EffectivePovm) -> FrameInfo {
    let m = frame_matrix(povm);
    if m.rows() == 0 {
        return FrameInfo {
            rank: 0,
            singular_values: Vec::new(),
        };
    }
    let svd = Svd::new(&m);
    let rank = svd.rank(FRAME_RCOND).min(m.rows());
    let mut singular_values = svd.sigma;
    singular_values.truncate(m.rows().min(4));
    FrameInfo {
        rank,
        singular_values,
    }
}
