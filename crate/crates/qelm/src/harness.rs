//! Training-curve sweeps over a simulated state pool, random reservoir
//! configurations and configuration search.
//!
//! A sweep draws a pool of Haar-random input states once. Every repetition
//! samples measurement records for the pool, then for each training-set
//! size draws a disjoint (train, test) split, fits the readout and records
//! the per-observable test MSE. Repetitions run in parallel; each one only
//! reads from its own seeded substreams, and results are collected in
//! repetition order.

use std::f64::consts::PI;

use log::warn;
use qelm_core::estimator::{mse, predict, train, TrainOptions, TrainingSet};
use qelm_core::linalg::RMatrix;
use qelm_core::optics::CoinParams;
use qelm_core::qubit::{density, expectation, haar_random_state, Observable};
use qelm_core::reservoir::{
    effective_povm, frame_rank, probabilities, FrameInfo, ReservoirMap, WalkConfig,
};
use qelm_core::sampling::{
    features, sample_counts, FeatureMode, FeatureVector, Record, SamplingMode,
};
use qelm_core::stats::{summarize, Summary};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::config_err;
use crate::seed::{substream, Stage};
use crate::Result;

/// Mean detected flux per state, or the infinite-statistics limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shots {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub walk: WalkConfig,
    pub pool_size: usize,
    pub test_size: usize,
    pub n_train_grid: Vec<usize>,
    pub repetitions: usize,
    pub shots: Shots,
    pub sampling: SamplingMode,
    pub features: FeatureMode,
    pub intercept: bool,
    /// Reuse one measurement record per state across repetitions instead of
    /// re-measuring every repetition.
    pub fixed_records: bool,
    pub master_seed: u64,
    pub observables: Vec<Observable>,
    pub train: TrainOptions,
}

impl ExperimentConfig {
    /// Pool of 450, test sets of 150, 500 repetitions, 10⁴ Poisson shots,
    /// raw-rate features with intercept, Pauli targets.
    pub fn with_walk(walk: WalkConfig) -> Self {
        ExperimentConfig {
            walk,
            pool_size: 450,
            test_size: 150,
            n_train_grid: (2..=100).collect(),
            repetitions: 500,
            shots: Shots::Finite(1e4),
            sampling: SamplingMode::Poisson,
            features: FeatureMode::RawRate,
            intercept: true,
            fixed_records: false,
            master_seed: 0,
            observables: Observable::paulis().to_vec(),
            train: TrainOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let max_train = self
            .n_train_grid
            .iter()
            .copied()
            .max()
            .ok_or_else(|| config_err("n_train grid is empty"))?;
        if self.n_train_grid.contains(&0) {
            return Err(config_err("n_train values must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(config_err("test_size must be at least 1"));
        }
        if max_train + self.test_size > self.pool_size {
            return Err(config_err(format!(
                "max n_train ({max_train}) + test_size ({}) exceeds pool_size ({})",
                self.test_size, self.pool_size
            )));
        }
        if self.repetitions == 0 {
            return Err(config_err("repetitions must be at least 1"));
        }
        if self.observables.is_empty() {
            return Err(config_err("no observables"));
        }
        match (self.shots, self.features) {
            (Shots::Infinite, FeatureMode::Exact) => {}
            (Shots::Infinite, _) => {
                return Err(config_err("infinite shots require exact features"))
            }
            (Shots::Finite(_), FeatureMode::Exact) => {
                return Err(config_err("exact features require infinite shots"))
            }
            (Shots::Finite(s), _) if !(s.is_finite() && s > 0.0) => {
                return Err(config_err(format!("shots must be positive, got {s}")))
            }
            _ => {}
        }
        if !(self.train.rcond.is_finite() && self.train.rcond >= 0.0)
            || self.train.ridge.is_nan()
            || self.train.ridge < 0.0
        {
            return Err(config_err("rcond and ridge must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n_train: usize,
    pub observable: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub n_train_grid: Vec<usize>,
    pub observables: Vec<String>,
    /// `table[rep][grid index][observable]`.
    pub table: Vec<Vec<Vec<f64>>>,
    /// Ordered by n_train, then observable.
    pub cells: Vec<CellSummary>,
    /// States dropped for zero counts under conditional features, summed
    /// over repetitions.
    pub dropped_states: usize,
}

impl SweepResults {
    pub fn cell(&self, n_train: usize, observable: &str) -> Option<&Summary> {
        self.cells
            .iter()
            .find(|c| c.n_train == n_train && c.observable == observable)
            .map(|c| &c.summary)
    }

    /// MSE values of one cell across repetitions, in repetition order.
    pub fn column(&self, n_train: usize, observable: usize) -> Vec<f64> {
        let g = self
            .n_train_grid
            .iter()
            .position(|&n| n == n_train)
            .expect("n_train in grid");
        self.table.iter().map(|rep| rep[g][observable]).collect()
    }
}

/// Aggregates a per-repetition table into summary cells.
pub fn aggregate(
    n_train_grid: &[usize],
    observables: &[String],
    table: &[Vec<Vec<f64>>],
) -> Vec<CellSummary> {
    let mut cells = Vec::with_capacity(n_train_grid.len() * observables.len());
    for (g, &n_train) in n_train_grid.iter().enumerate() {
        for (j, name) in observables.iter().enumerate() {
            let values: Vec<f64> = table.iter().map(|rep| rep[g][j]).collect();
            cells.push(CellSummary {
                n_train,
                observable: name.clone(),
                summary: summarize(&values),
            });
        }
    }
    cells
}

struct PoolState {
    probabilities: Vec<f64>,
    targets: Vec<f64>,
}

fn build_pool(cfg: &ExperimentConfig, stage: Stage) -> Result<Vec<PoolState>> {
    let povm = effective_povm(&ReservoirMap::from_config(&cfg.walk)?);
    (0..cfg.pool_size)
        .map(|i| {
            let mut rng = substream(cfg.master_seed, 0, i as u64, stage);
            let rho = density(&haar_random_state(&mut rng))?;
            Ok(PoolState {
                probabilities: probabilities(&povm, &rho),
                targets: cfg
                    .observables
                    .iter()
                    .map(|o| expectation(o, &rho))
                    .collect(),
            })
        })
        .collect()
}

fn record_features(
    cfg: &ExperimentConfig,
    state: &PoolState,
    rep: usize,
    index: usize,
) -> Result<Option<FeatureVector>> {
    let shots = match cfg.shots {
        Shots::Infinite => {
            return Ok(Some(features(
                Record::Probabilities(&state.probabilities),
                FeatureMode::Exact,
                cfg.intercept,
            )?))
        }
        Shots::Finite(s) => s,
    };
    let record_rep = if cfg.fixed_records { 0 } else { rep as u64 };
    let mut rng = substream(cfg.master_seed, record_rep, index as u64, Stage::Counts);
    let counts = sample_counts(&state.probabilities, shots, cfg.sampling, &mut rng)?;
    match features(Record::Counts(&counts), cfg.features, cfg.intercept) {
        Ok(f) => Ok(Some(f)),
        Err(qelm_core::Error::DegenerateSample) => {
            let mut rng = substream(cfg.master_seed, record_rep, index as u64, Stage::Resample);
            let counts = sample_counts(&state.probabilities, shots, cfg.sampling, &mut rng)?;
            match features(Record::Counts(&counts), cfg.features, cfg.intercept) {
                Ok(f) => Ok(Some(f)),
                Err(qelm_core::Error::DegenerateSample) => {
                    warn!("repetition {rep}: state {index} has zero counts twice, dropped");
                    Ok(None)
                }
                Err(e) => Err(e.into()),
            }
        }
        Err(e) => Err(e.into()),
    }
}

struct RepOutcome {
    mse: Vec<Vec<f64>>,
    dropped: usize,
}

fn run_repetition(cfg: &ExperimentConfig, pool: &[PoolState], rep: usize) -> Result<RepOutcome> {
    let mut feats: Vec<Option<FeatureVector>> = Vec::with_capacity(pool.len());
    for (i, state) in pool.iter().enumerate() {
        feats.push(record_features(cfg, state, rep, i)?);
    }
    let usable: Vec<usize> = (0..pool.len()).filter(|&i| feats[i].is_some()).collect();
    let dropped = pool.len() - usable.len();
    let labels: Vec<_> = cfg.observables.iter().map(|o| o.label).collect();

    let mut per_grid = Vec::with_capacity(cfg.n_train_grid.len());
    for (g, &n_train) in cfg.n_train_grid.iter().enumerate() {
        let mut order = usable.clone();
        order.shuffle(&mut substream(
            cfg.master_seed,
            rep as u64,
            g as u64,
            Stage::Split,
        ));
        if order.len() <= n_train {
            return Err(config_err(format!(
                "repetition {rep}: only {} usable states for n_train = {n_train}",
                order.len()
            )));
        }
        let (train_idx, rest) = order.split_at(n_train);
        let test_idx = &rest[..rest.len().min(cfg.test_size)];
        if test_idx.len() < cfg.test_size {
            warn!(
                "repetition {rep}: test set shrunk to {} states",
                test_idx.len()
            );
        }

        let rows: Vec<FeatureVector> = train_idx
            .iter()
            .map(|&i| feats[i].clone().expect("usable"))
            .collect();
        let targets: Vec<&[f64]> = train_idx
            .iter()
            .map(|&i| pool[i].targets.as_slice())
            .collect();
        let ts = TrainingSet::new(&rows, RMatrix::from_rows(&targets), labels.clone())?;
        let weights = train(&ts, cfg.train)?;

        let mut preds = Vec::with_capacity(test_idx.len());
        for &i in test_idx {
            preds.push(predict(&weights, feats[i].as_ref().expect("usable"))?);
        }
        let truth: Vec<&[f64]> = test_idx
            .iter()
            .map(|&i| pool[i].targets.as_slice())
            .collect();
        per_grid.push(mse(
            &RMatrix::from_rows(&preds),
            &RMatrix::from_rows(&truth),
        )?);
    }
    Ok(RepOutcome {
        mse: per_grid,
        dropped,
    })
}

/// Runs the full sweep. `threads` caps the worker count (0 = rayon default)
/// and has no effect on the results.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepResults> {
    cfg.validate()?;
    let pool = build_pool(cfg, Stage::Pool)?;
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RepOutcome>> = workers.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| run_repetition(cfg, &pool, r))
            .collect()
    });

    let mut table = Vec::with_capacity(cfg.repetitions);
    let mut dropped_states = 0;
    for o in outcomes {
        let o = o?;
        dropped_states += o.dropped;
        table.push(o.mse);
    }
    let observables: Vec<String> = cfg.observables.iter().map(observable_name).collect();
    let cells = aggregate(&cfg.n_train_grid, &observables, &table);
    Ok(SweepResults {
        n_train_grid: cfg.n_train_grid.clone(),
        observables,
        table,
        cells,
        dropped_states,
    })
}

/// A standalone data set of `pool_size` Haar-random states: one record per
/// state (features without intercept) and the exact observable values.
/// States are drawn from their own substream, disjoint from sweep pools.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub dropped_states: usize,
}

pub fn simulate_dataset(cfg: &ExperimentConfig) -> Result<Simulated> {
    cfg.validate()?;
    let cfg = ExperimentConfig {
        intercept: false,
        ..cfg.clone()
    };
    let pool = build_pool(&cfg, Stage::Simulate)?;
    let mut out = Simulated {
        features: Vec::new(),
        targets: Vec::new(),
        dropped_states: 0,
    };
    for (i, state) in pool.into_iter().enumerate() {
        match record_features(&cfg, &state, 0, i)? {
            Some(f) => {
                out.features.push(f.values);
                out.targets.push(state.targets);
            }
            None => out.dropped_states += 1,
        }
    }
    Ok(out)
}

pub fn observable_name(o: &Observable) -> String {
    o.label.name().to_string()
}

/// Range for randomly drawn coin angles, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AngleBounds {
    fn default() -> Self {
        AngleBounds {
            lo: 0.0,
            hi: 2.0 * PI,
        }
    }
}

/// Two-step hardware walk with uniformly random coin angles and a
/// Haar-random projection polarization.
pub fn random_config<R: Rng + ?Sized>(rng: &mut R, bounds: AngleBounds) -> WalkConfig {
    let mut angle = || {
        if bounds.hi > bounds.lo {
            rng.random_range(bounds.lo..bounds.hi)
        } else {
            bounds.lo
        }
    };
    let coin = CoinParams {
        zeta: angle(),
        theta: angle(),
        phi: angle(),
    };
    let projection = haar_random_state(rng);
    two_step_walk(coin, projection)
}

/// `S(α₂, π) C S(α₁, π/2)` with the hardware q-plate orientations.
pub fn two_step_walk(
    coin: CoinParams,
    projection: qelm_core::qubit::PolarizationState,
) -> WalkConfig {
    WalkConfig::two_step(coin, projection).expect("projection state is normalized")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Maximize the smallest frame singular value.
    SigmaMin,
    /// Minimize the median validation MSE (averaged over observables).
    ValMse,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::SigmaMin => "sigma_min",
            Criterion::ValMse => "val_mse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sigma_min" | "sigmamin" => Some(Criterion::SigmaMin),
            "val_mse" | "valmse" => Some(Criterion::ValMse),
            _ => None,
        }
    }
}

/// Sweep used to score a candidate under [`Criterion::ValMse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSpec {
    pub pool_size: usize,
    pub test_size: usize,
    pub n_train: usize,
    pub repetitions: usize,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            pool_size: 250,
            test_size: 150,
            n_train: 100,
            repetitions: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub budget: usize,
    pub criterion: Criterion,
    pub seed: u64,
    pub bounds: AngleBounds,
    pub validation: ValidationSpec,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub walk: WalkConfig,
    /// σ_min for `SigmaMin` (higher is better), median MSE for `ValMse`
    /// (lower is better).
    pub score: f64,
    pub candidate: usize,
    pub frame: FrameInfo,
}

pub fn candidate_config(spec: &SearchSpec, k: usize) -> WalkConfig {
    random_config(
        &mut substream(spec.seed, k as u64, 0, Stage::Candidate),
        spec.bounds,
    )
}

/// Median over validation repetitions of the observable-averaged test MSE.
pub fn validation_score(
    walk: &WalkConfig,
    template: &ExperimentConfig,
    spec: ValidationSpec,
    seed: u64,
    threads: usize,
) -> Result<f64> {
    let cfg = ExperimentConfig {
        walk: walk.clone(),
        pool_size: spec.pool_size,
        test_size: spec.test_size,
        n_train_grid: vec![spec.n_train],
        repetitions: spec.repetitions,
        master_seed: seed,
        ..template.clone()
    };
    let res = run_sweep(&cfg, threads)?;
    let per_rep: Vec<f64> = res
        .table
        .iter()
        .map(|rep| rep[0].iter().sum::<f64>() / rep[0].len() as f64)
        .collect();
    Ok(summarize(&per_rep).median)
}

/// Random search over coin angles and projection polarization. `template`
/// supplies sampling, feature and observable settings for `ValMse`.
/// Candidates are scored against a common validation seed; ties keep the
/// earliest candidate.
pub fn optimize_config(
    spec: &SearchSpec,
    template: &ExperimentConfig,
    threads: usize,
) -> Result<Optimized> {
    if spec.budget == 0 {
        return Err(config_err("budget must be at least 1"));
    }
    let validation_seed = substream(spec.seed, 0, 0, Stage::Validation).next_u64();
    let mut best: Option<Optimized> = None;
    for k in 0..spec.budget {
        let walk = candidate_config(spec, k);
        let frame = frame_rank(&effective_povm(&ReservoirMap::from_config(&walk)?));
        let score = match spec.criterion {
            Criterion::SigmaMin => frame.sigma_min(),
            Criterion::ValMse => {
                validation_score(&walk, template, spec.validation, validation_seed, threads)?
            }
        };
        let better = match &best {
            None => true,
            Some(b) => match spec.criterion {
                Criterion::SigmaMin => score > b.score,
                Criterion::ValMse => score < b.score,
            },
        };
        if better {
            best = Some(Optimized {
                walk,
                score,
                candidate: k,
                frame,
            });
        }
    }
    Ok(best.expect("budget >= 1"))
}
