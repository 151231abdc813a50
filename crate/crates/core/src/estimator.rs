//! Linear readout: least-squares training, prediction and MSE, plus the
//! analytic dual-frame weights used as an oracle.

use alloc::vec::Vec;

use crate::linalg::{CMatrix, RMatrix, Svd};
use crate::qubit::{Observable, ObservableLabel};
use crate::reservoir::{frame_matrix, pauli_coordinates, EffectivePovm};
use crate::sampling::{FeatureMode, FeatureVector};
use crate::{Error, Result, C64};

pub const DEFAULT_RCOND: f64 = 1e-10;
const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    /// `n_train × d`.
    pub features: RMatrix,
    /// `n_train × m`, one column per observable.
    pub targets: RMatrix,
    pub observables: Vec<ObservableLabel>,
    pub mode: FeatureMode,
    pub intercept: bool,
}

impl TrainingSet {
    pub fn new(
        rows: &[FeatureVector],
        targets: RMatrix,
        observables: Vec<ObservableLabel>,
    ) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyTrainingSet)?;
        let (mode, intercept, d) = (first.mode, first.intercept, first.values.len());
        for r in rows {
            if r.mode != mode || r.intercept != intercept {
                return Err(Error::FeatureModeMismatch);
            }
            if r.values.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.values.len(),
                });
            }
        }
        let values: Vec<&[f64]> = rows.iter().map(|r| r.values.as_slice()).collect();
        Self::from_matrices(
            RMatrix::from_rows(&values),
            targets,
            observables,
            mode,
            intercept,
        )
    }

    pub fn from_matrices(
        features: RMatrix,
        targets: RMatrix,
        observables: Vec<ObservableLabel>,
        mode: FeatureMode,
        intercept: bool,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if targets.rows() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: targets.rows(),
            });
        }
        if targets.cols() != observables.len() {
            return Err(Error::DimensionMismatch {
                expected: observables.len(),
                found: targets.cols(),
            });
        }
        if !features.is_finite() || !targets.is_finite() {
            return Err(Error::NonFinite);
        }
        for (j, label) in observables.iter().enumerate() {
            if *label == ObservableLabel::Custom {
                continue;
            }
            if (0..targets.rows()).any(|k| targets[(k, j)].abs() > 1.0 + 1e-12) {
                return Err(Error::Configuration("Pauli target outside [-1, 1]"));
            }
        }
        Ok(TrainingSet {
            features,
            targets,
            observables,
            mode,
            intercept,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorWeights {
    /// `m × d`.
    pub w: RMatrix,
    pub observables: Vec<ObservableLabel>,
    pub mode: FeatureMode,
    pub intercept: bool,
    /// Singular values of the solved system, descending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Singular values at or below `rcond × σ_max` are discarded.
    pub rcond: f64,
    /// Tikhonov parameter; zero gives the plain pseudoinverse.
    pub ridge: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            rcond: DEFAULT_RCOND,
            ridge: 0.0,
        }
    }
}

/// Minimum-norm least squares for `features · Wᵀ ≈ targets`.
pub fn train(ts: &TrainingSet, opts: TrainOptions) -> Result<EstimatorWeights> {
    if ts.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let svd = Svd::new(&ts.features);
    let x = svd.solve(&ts.targets, opts.rcond, opts.ridge);
    Ok(EstimatorWeights {
        w: x.transpose(),
        observables: ts.observables.clone(),
        mode: ts.mode,
        intercept: ts.intercept,
        singular_values: svd.sigma,
    })
}

/// `W · f`. Estimates are not clamped to the physical range.
pub fn predict(w: &EstimatorWeights, f: &FeatureVector) -> Result<Vec<f64>> {
    if f.mode != w.mode || f.intercept != w.intercept {
        return Err(Error::FeatureModeMismatch);
    }
    if f.values.len() != w.w.cols() {
        return Err(Error::DimensionMismatch {
            expected: w.w.cols(),
            found: f.values.len(),
        });
    }
    Ok(w.w.mul_vec(&f.values))
}

/// Per-column mean squared error between two `n × m` matrices.
pub fn mse(pred: &RMatrix, truth: &RMatrix) -> Result<Vec<f64>> {
    if pred.rows() != truth.rows() {
        return Err(Error::DimensionMismatch {
            expected: truth.rows(),
            found: pred.rows(),
        });
    }
    if pred.cols() != truth.cols() {
        return Err(Error::DimensionMismatch {
            expected: truth.cols(),
            found: pred.cols(),
        });
    }
    if pred.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let n = pred.rows() as f64;
    Ok((0..pred.cols())
        .map(|j| {
            (0..pred.rows())
                .map(|k| {
                    let d = pred[(k, j)] - truth[(k, j)];
                    d * d
                })
                .sum::<f64>()
                / n
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealWeights {
    /// Exact-feature weights without intercept.
    pub weights: EstimatorWeights,
    /// `‖Σ_b w_b μ̃_b − O‖_F` per observable.
    pub residuals: Vec<f64>,
    pub in_span: Vec<bool>,
}

/// `Σ_b w_b μ̃_b`.
pub fn resum(povm: &EffectivePovm, w: &[f64]) -> CMatrix {
    povm.elements()
        .iter()
        .zip(w)
        .fold(CMatrix::zeros(2, 2), |acc, (e, &wb)| {
            acc.add(&e.scale(C64::new(wb, 0.0)))
        })
}

/// Dual-frame weights: for each observable, the minimum-norm `w` with
/// `Σ_b w_b μ̃_b` closest to `O` in Pauli coordinates.
pub fn ideal_weights(povm: &EffectivePovm, observables: &[Observable]) -> IdealWeights {
    let frame = frame_matrix(povm);
    let b = povm.len();
    let mut w = RMatrix::zeros(observables.len(), b);
    let mut residuals = Vec::with_capacity(observables.len());
    let mut singular_values = Vec::new();
    if b > 0 {
        let mt = frame.transpose();
        let svd = Svd::new(&mt);
        let mut rhs = RMatrix::zeros(4, observables.len());
        for (j, o) in observables.iter().enumerate() {
            let coords = pauli_coordinates(o.matrix());
            for (k, c) in coords.iter().enumerate() {
                rhs[(k, j)] = *c;
            }
        }
        let x = svd.solve(&rhs, DEFAULT_RCOND, 0.0);
        for j in 0..observables.len() {
            for i in 0..b {
                w[(j, i)] = x[(i, j)];
            }
        }
        singular_values = svd.sigma;
    }
    for (j, o) in observables.iter().enumerate() {
        let row: Vec<f64> = (0..b).map(|i| w[(j, i)]).collect();
        let recon = if b > 0 {
            resum(povm, &row)
        } else {
            CMatrix::zeros(2, 2)
        };
        let diff = recon.add(&o.matrix().scale(C64::new(-1.0, 0.0)));
        residuals.push(diff.frobenius_norm());
    }
    let in_span = residuals.iter().map(|&r| r < SPAN_TOL).collect();
    IdealWeights {
        weights: EstimatorWeights {
            w,
            observables: observables.iter().map(|o| o.label).collect(),
            mode: FeatureMode::Exact,
            intercept: false,
            singular_values,
        },
        residuals,
        in_span,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::CoinParams;
    use crate::qubit::PolarizationState;
    use crate::qubit::{density, expectation, haar_random_state, pauli};
    use crate::reservoir::{effective_povm, frame_rank, probabilities, ReservoirMap, WalkConfig};
    use crate::sampling::{features, Record};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z_measurement() -> EffectivePovm {
        let l = CMatrix::from_2x2([[c(1.0), c(0.0)], [c(0.0), c(0.0)]]);
        let r = CMatrix::from_2x2([[c(0.0), c(0.0)], [c(0.0), c(1.0)]]);
        EffectivePovm::from_elements(alloc::vec![l, r]).unwrap()
    }

    fn hardware_povm() -> EffectivePovm {
        let projection =
            PolarizationState::from_unnormalized(C64::new(0.6, 0.2), C64::new(0.3, -0.7)).unwrap();
        let cfg = WalkConfig::two_step(
            CoinParams {
                zeta: 0.3,
                theta: 0.5,
                phi: 1.1,
            },
            projection,
        )
        .unwrap();
        effective_povm(&ReservoirMap::from_config(&cfg).unwrap())
    }

    fn exact_dataset(
        povm: &EffectivePovm,
        n: usize,
        seed: u64,
        intercept: bool,
    ) -> (Vec<FeatureVector>, RMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paulis = Observable::paulis();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let rho = density(&haar_random_state(&mut rng)).unwrap();
            let p = probabilities(povm, &rho);
            rows.push(features(Record::Probabilities(&p), FeatureMode::Exact, intercept).unwrap());
            targets.push(paulis.clone().map(|o| expectation(&o, &rho)));
        }
        (rows, RMatrix::from_rows(&targets))
    }

    fn labels() -> Vec<ObservableLabel> {
        alloc::vec![
            ObservableLabel::SigmaX,
            ObservableLabel::SigmaY,
            ObservableLabel::SigmaZ
        ]
    }

    fn predict_all(w: &EstimatorWeights, rows: &[FeatureVector]) -> RMatrix {
        let preds: Vec<Vec<f64>> = rows.iter().map(|f| predict(w, f).unwrap()).collect();
        RMatrix::from_rows(&preds)
    }

    #[test]
    fn ideal_weights_for_projective_z() {
        let povm = z_measurement();
        let z = pauli(ObservableLabel::SigmaZ).unwrap();
        let id = Observable::custom(CMatrix::identity(2)).unwrap();
        let iw = ideal_weights(&povm, &[z, id]);
        let w = &iw.weights.w;
        assert!((w[(0, 0)] - 1.0).abs() < 1e-12 && (w[(0, 1)] + 1.0).abs() < 1e-12);
        assert!((w[(1, 0)] - 1.0).abs() < 1e-12 && (w[(1, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(iw.in_span, alloc::vec![true, true]);
    }

    #[test]
    fn out_of_span_observable_is_reported() {
        let iw = ideal_weights(&z_measurement(), &[pauli(ObservableLabel::SigmaX).unwrap()]);
        assert_eq!(iw.in_span, alloc::vec![false]);
        // best approximation of σx from diagonal elements is zero
        assert!(iw.weights.w.as_slice().iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn hardware_povm_reconstructs_paulis() {
        let povm = hardware_povm();
        assert_eq!(frame_rank(&povm).rank, 4);
        let paulis = Observable::paulis();
        let iw = ideal_weights(&povm, &paulis);
        for (j, o) in paulis.iter().enumerate() {
            let row: Vec<f64> = iw.weights.w.row(j).to_vec();
            let diff = resum(&povm, &row).add(&o.matrix().scale(c(-1.0)));
            assert!(diff.frobenius_norm() < 1e-10);
            assert!(iw.residuals[j] < 1e-10);
        }
    }

    #[test]
    fn single_row_is_fit_exactly() {
        let f = FeatureVector {
            values: alloc::vec![0.2, 0.1, 0.4, 1.0],
            mode: FeatureMode::RawRate,
            intercept: true,
        };
        let ts = TrainingSet::new(
            std::slice::from_ref(&f),
            RMatrix::from_rows(&[[0.3, -0.5, 0.9]]),
            labels(),
        )
        .unwrap();
        let w = train(&ts, TrainOptions::default()).unwrap();
        let p = predict(&w, &f).unwrap();
        for (a, b) in p.iter().zip([0.3, -0.5, 0.9]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicated_rows_leave_weights_unchanged() {
        let povm = hardware_povm();
        let (rows, targets) = exact_dataset(&povm, 12, 1, true);
        let ts = TrainingSet::new(&rows, targets.clone(), labels()).unwrap();
        let w1 = train(&ts, TrainOptions::default()).unwrap();
        let doubled_rows: Vec<FeatureVector> = rows.iter().chain(rows.iter()).cloned().collect();
        let t: Vec<&[f64]> = (0..targets.rows())
            .chain(0..targets.rows())
            .map(|k| targets.row(k))
            .collect();
        let ts2 = TrainingSet::new(&doubled_rows, RMatrix::from_rows(&t), labels()).unwrap();
        let w2 = train(&ts2, TrainOptions::default()).unwrap();
        for (a, b) in w1.w.as_slice().iter().zip(w2.w.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_recovery_with_rank_four_frame() {
        let povm = hardware_povm();
        let (rows, targets) = exact_dataset(&povm, 20, 2, false);
        let w = train(
            &TrainingSet::new(&rows, targets.clone(), labels()).unwrap(),
            TrainOptions::default(),
        )
        .unwrap();
        let fit = predict_all(&w, &rows);
        let residual = fit
            .as_slice()
            .iter()
            .zip(targets.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(residual < 1e-10);

        let (test_rows, test_targets) = exact_dataset(&povm, 150, 3, false);
        for e in mse(&predict_all(&w, &test_rows), &test_targets).unwrap() {
            assert!(e < 1e-18, "mse {e}");
        }
    }

    #[test]
    fn trained_predictions_match_dual_frame() {
        let povm = hardware_povm();
        let iw = ideal_weights(&povm, &Observable::paulis());
        for intercept in [false, true] {
            let (rows, targets) = exact_dataset(&povm, 30, 4, intercept);
            let w = train(
                &TrainingSet::new(&rows, targets, labels()).unwrap(),
                TrainOptions::default(),
            )
            .unwrap();
            let (test_rows, _) = exact_dataset(&povm, 100, 5, intercept);
            for f in &test_rows {
                let trained = predict(&w, f).unwrap();
                let plain = FeatureVector {
                    values: f.values[..povm.len()].to_vec(),
                    mode: FeatureMode::Exact,
                    intercept: false,
                };
                let ideal = predict(&iw.weights, &plain).unwrap();
                for (a, b) in trained.iter().zip(&ideal) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn train_is_bitwise_deterministic() {
        let povm = hardware_povm();
        let (rows, targets) = exact_dataset(&povm, 25, 6, true);
        let ts = TrainingSet::new(&rows, targets, labels()).unwrap();
        let a = train(&ts, TrainOptions::default()).unwrap();
        let b = train(&ts, TrainOptions::default()).unwrap();
        assert_eq!(
            a.w.as_slice()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>(),
            b.w.as_slice()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn ridge_shrinks_weights() {
        let povm = hardware_povm();
        let (rows, targets) = exact_dataset(&povm, 25, 7, true);
        let ts = TrainingSet::new(&rows, targets, labels()).unwrap();
        let plain = train(&ts, TrainOptions::default()).unwrap();
        let ridged = train(
            &ts,
            TrainOptions {
                ridge: 0.1,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        let norm = |w: &EstimatorWeights| w.w.as_slice().iter().map(|x| x * x).sum::<f64>();
        assert!(norm(&ridged) < norm(&plain));
    }

    #[test]
    fn predict_examples_and_errors() {
        let f = FeatureVector {
            values: alloc::vec![0.25, 0.5, 0.125],
            mode: FeatureMode::RawRate,
            intercept: false,
        };
        let zero = EstimatorWeights {
            w: RMatrix::zeros(2, 3),
            observables: alloc::vec![ObservableLabel::SigmaX, ObservableLabel::SigmaZ],
            mode: FeatureMode::RawRate,
            intercept: false,
            singular_values: Vec::new(),
        };
        assert_eq!(predict(&zero, &f).unwrap(), alloc::vec![0.0, 0.0]);
        let selector = EstimatorWeights {
            w: RMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            ..zero.clone()
        };
        assert_eq!(predict(&selector, &f).unwrap(), alloc::vec![0.5, 0.125]);

        let wrong_mode = FeatureVector {
            mode: FeatureMode::Conditional,
            ..f.clone()
        };
        assert_eq!(predict(&zero, &wrong_mode), Err(Error::FeatureModeMismatch));
        let wrong_len = FeatureVector {
            values: alloc::vec![1.0],
            ..f
        };
        assert!(matches!(
            predict(&zero, &wrong_len),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mse_examples() {
        let truth = RMatrix::from_rows(&[[0.1, 0.2], [0.3, -0.4], [0.0, 0.5]]);
        assert_eq!(mse(&truth, &truth).unwrap(), alloc::vec![0.0, 0.0]);
        let shifted = RMatrix::from_rows(&[[0.1, 0.45], [0.3, -0.15], [0.0, 0.75]]);
        let e = mse(&shifted, &truth).unwrap();
        assert_eq!(e[0], 0.0);
        assert!((e[1] - 0.0625).abs() < 1e-15);
        assert!(mse(&truth, &RMatrix::zeros(2, 2)).is_err());
        assert!(mse(&RMatrix::zeros(0, 2), &RMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn training_set_validation() {
        let f = FeatureVector {
            values: alloc::vec![0.5],
            mode: FeatureMode::RawRate,
            intercept: false,
        };
        assert_eq!(
            TrainingSet::new(&[], RMatrix::zeros(0, 1), labels()),
            Err(Error::EmptyTrainingSet)
        );
        assert!(TrainingSet::new(
            std::slice::from_ref(&f),
            RMatrix::from_rows(&[[1.5, 0.0, 0.0]]),
            labels()
        )
        .is_err());
        assert!(TrainingSet::new(
            &[f.clone(), f],
            RMatrix::from_rows(&[[0.5, 0.0, 0.0]]),
            labels()
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn mse_is_nonnegative_and_permutation_invariant(
            vals in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..40),
            rot in 0usize..40,
        ) {
            let pred = RMatrix::from_rows(&vals.iter().map(|v| [v.0]).collect::<Vec<_>>());
            let truth = RMatrix::from_rows(&vals.iter().map(|v| [v.1]).collect::<Vec<_>>());
            let e = mse(&pred, &truth).unwrap();
            prop_assert!(e[0] >= 0.0);
            prop_assert_eq!(e[0] == 0.0, vals.iter().all(|v| v.0 == v.1));
            let mut rotated = vals.clone();
            let k = rot % vals.len();
            rotated.rotate_left(k);
            let pred_r = RMatrix::from_rows(&rotated.iter().map(|v| [v.0]).collect::<Vec<_>>());
            let truth_r = RMatrix::from_rows(&rotated.iter().map(|v| [v.1]).collect::<Vec<_>>());
            let e_r = mse(&pred_r, &truth_r).unwrap();
            prop_assert!((e[0] - e_r[0]).abs() <= 1e-12 * (1.0 + e[0]));
        }
    }
}
