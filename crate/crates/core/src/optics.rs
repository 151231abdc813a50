//! Coin and q-plate operators on polarization ⊗ OAM.
//!
//! Joint-space kets are laid out polarization-major:
//! `|L,−N⟩ … |L,N⟩ |R,−N⟩ … |R,N⟩`.

use crate::linalg::CMatrix;
use crate::C64;

/// Waveplate angles of the coin `QWP(ζ) HWP(θ) QWP(φ)`, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinParams {
    pub zeta: f64,
    pub theta: f64,
    pub phi: f64,
}

impl CoinParams {
    pub const IDENTITY: CoinParams = CoinParams {
        zeta: 0.0,
        theta: 0.0,
        phi: 0.0,
    };

    pub fn eta(&self) -> f64 {
        self.zeta + self.phi - 2.0 * self.theta
    }
}

/// Q-plate optic-axis orientation `alpha` and retardance `delta`, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPlateParams {
    pub alpha: f64,
    pub delta: f64,
}

/// Truncated OAM window `n = −N … N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OamSpace {
    cutoff: usize,
}

impl OamSpace {
    pub fn new(cutoff: usize) -> Self {
        OamSpace { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Position of azimuthal index `n` in the OAM basis, if inside the window.
    pub fn offset(&self, n: i64) -> Option<usize> {
        let shifted = n + self.cutoff as i64;
        (0..self.dim() as i64)
            .contains(&shifted)
            .then_some(shifted as usize)
    }

    pub fn index_of(&self, offset: usize) -> i64 {
        offset as i64 - self.cutoff as i64
    }

    /// Joint-space position of `|pol, n⟩` (`pol` 0 = L, 1 = R).
    pub fn joint_index(&self, pol: usize, n: i64) -> Option<usize> {
        debug_assert!(pol < 2);
        self.offset(n).map(|o| pol * self.dim() + o)
    }
}

/// Operator on polarization ⊗ OAM.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOperator {
    pub matrix: CMatrix,
    pub space: OamSpace,
}

impl JointOperator {
    pub fn identity(space: OamSpace) -> Self {
        JointOperator {
            matrix: CMatrix::identity(2 * space.dim()),
            space,
        }
    }

    /// Lifts a polarization-only operator: `coin ⊗ I_OAM`.
    pub fn from_coin(coin: &CMatrix, space: OamSpace) -> Self {
        JointOperator {
            matrix: coin.kron(&CMatrix::identity(space.dim())),
            space,
        }
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &JointOperator) -> Self {
        assert_eq!(
            self.space, rhs.space,
            "operators act on different OAM windows"
        );
        JointOperator {
            matrix: self.matrix.matmul(&rhs.matrix),
            space: self.space,
        }
    }
}

/// Coin matrix
/// `[[e^{−i(ζ−φ)} cos η, e^{i(ζ+φ)} sin η], [−e^{−i(ζ+φ)} sin η, e^{i(ζ−φ)} cos η]]`
/// with `η = ζ + φ − 2θ`.
pub fn coin_operator(p: CoinParams) -> CMatrix {
    let eta = p.eta();
    let (ce, se) = (libm::cos(eta), libm::sin(eta));
    let diff = p.zeta - p.phi;
    let sum = p.zeta + p.phi;
    CMatrix::from_2x2([
        [C64::from_polar(ce, -diff), C64::from_polar(se, sum)],
        [-C64::from_polar(se, -sum), C64::from_polar(ce, diff)],
    ])
}

/// Q-plate conditional shift. `|L,n⟩ → |R,n+1⟩` and `|R,n⟩ → |L,n−1⟩` with
/// amplitude `i sin(δ/2) e^{∓2iα}`; the rest stays with `cos(δ/2)`.
///
/// Terms that would leave the window are dropped, so the operator is only
/// unitary on kets with `|n| ≤ N − 1`.
pub fn qplate_operator(p: QPlateParams, space: OamSpace) -> JointOperator {
    let dim = 2 * space.dim();
    let mut m = CMatrix::zeros(dim, dim);
    let stay = C64::new(libm::cos(0.5 * p.delta), 0.0);
    let flip = C64::new(0.0, libm::sin(0.5 * p.delta));
    let to_l = flip * C64::from_polar(1.0, 2.0 * p.alpha);
    let to_r = flip * C64::from_polar(1.0, -2.0 * p.alpha);
    let big_n = space.cutoff() as i64;
    for n in -big_n..=big_n {
        let l = space.joint_index(0, n).expect("n inside window");
        let r = space.joint_index(1, n).expect("n inside window");
        m[(l, l)] += stay;
        m[(r, r)] += stay;
        // |L,n⟩⟨R,n+1|
        if let Some(src) = space.joint_index(1, n + 1) {
            m[(l, src)] += to_l;
        }
        // |R,n⟩⟨L,n−1|
        if let Some(src) = space.joint_index(0, n - 1) {
            m[(r, src)] += to_r;
        }
    }
    JointOperator { matrix: m, space }
}
