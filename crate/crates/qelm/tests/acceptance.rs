//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every tolerance is pinned below.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qelm::config::RunConfig;
use qelm::harness::{
    optimize_config, random_config, run_sweep, AngleBounds, Criterion, ExperimentConfig,
    SearchSpec, Shots, ValidationSpec,
};
use qelm::seed::{substream, Stage};
use qelm_core::estimator::{ideal_weights, predict, train, TrainOptions, TrainingSet};
use qelm_core::linalg::{hermitian_eigenvalues_2x2, RMatrix};
use qelm_core::optics::coin_operator;
use qelm_core::qubit::{density, expectation, haar_random_state, Observable, PolarizationState};
use qelm_core::reservoir::{effective_povm, frame_rank, probabilities, ReservoirMap, WalkConfig};
use qelm_core::sampling::{features, FeatureMode, Record};

const EXACT_MSE_MAX: f64 = 1e-18;
const EXACT_MIN_NTRAIN: usize = 5;
const EXACT_REPS: usize = 50;
const EXACT_TIME_LIMIT: Duration = Duration::from_secs(10);

const SHOT_LEVELS: [f64; 3] = [1e2, 1e3, 1e4];
const SHOT_REPS: usize = 100;
const SHOT_RATIO_RANGE: (f64, f64) = (30.0, 300.0);
const SHOT_TIME_LIMIT: Duration = Duration::from_secs(300);

const CURVE_SHOTS: f64 = 1e4;
const CURVE_REPS: usize = 500;
const CURVE_MIN_GAIN: f64 = 2.0;

const OPT_BUDGET: usize = 500;
const OPT_REPS: usize = 100;
const OPT_MAX_RATIO: f64 = 10.0;
const GENERIC_POOL: usize = 25;
const CENSUS_REPS: usize = 30;

const POVM_CONFIGS: usize = 1000;
const POVM_INPUTS: usize = 100;
const POVM_TOL: f64 = 1e-12;

const DUAL_STATES: usize = 100;
const DUAL_TRAIN: usize = 60;
const DUAL_TOL: f64 = 1e-9;

const SEED: u64 = 20_241_017;

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 7] = [
        ("1 exact recovery", exact_recovery),
        ("2 shot-noise ordering", shot_noise_ordering),
        ("3 training-curve shape", training_curve_shape),
        ("4 optimized vs random", optimized_vs_random),
        ("5 POVM structure", povm_structure),
        ("6 dual-frame equivalence", dual_frame_equivalence),
        ("7 thread determinism", thread_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {name}: {} ({:.1} s)",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn default_experiment() -> ExperimentConfig {
    let mut cfg = RunConfig::default()
        .experiment()
        .expect("default config is valid");
    cfg.master_seed = SEED;
    cfg
}

/// Median per observable at one grid point.
fn medians_at(res: &qelm::harness::SweepResults, n_train: usize) -> Vec<f64> {
    res.observables
        .iter()
        .map(|o| res.cell(n_train, o).expect("grid point").median)
        .collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        shots: Shots::Infinite,
        features: FeatureMode::Exact,
        n_train_grid: (4..=100).collect(),
        repetitions: EXACT_REPS,
        ..default_experiment()
    };
    let frame = frame_rank(&effective_povm(
        &ReservoirMap::from_config(&cfg.walk).unwrap(),
    ));
    let res = match run_sweep(&cfg, 0) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("sweep failed: {e}"),
            }
        }
    };
    let elapsed = start.elapsed();
    let worst = res
        .table
        .iter()
        .flat_map(|rep| {
            rep.iter()
                .zip(&res.n_train_grid)
                .filter(|(_, &n)| n >= EXACT_MIN_NTRAIN)
                .flat_map(|(r, _)| r)
        })
        .fold(0.0f64, |a, &b| a.max(b));
    Outcome {
        pass: frame.rank == 4 && worst < EXACT_MSE_MAX && elapsed < EXACT_TIME_LIMIT,
        detail: format!(
            "frame rank {}, worst test MSE for n_train >= {EXACT_MIN_NTRAIN} over {EXACT_REPS} reps = {worst:.2e} (< {EXACT_MSE_MAX:e}), {:.2} s (< {} s)",
            frame.rank,
            elapsed.as_secs_f64(),
            EXACT_TIME_LIMIT.as_secs()
        ),
    }
}

fn shot_noise_ordering() -> Outcome {
    let start = Instant::now();
    let mut plateaus = Vec::new();
    for shots in SHOT_LEVELS {
        let cfg = ExperimentConfig {
            shots: Shots::Finite(shots),
            n_train_grid: vec![100],
            repetitions: SHOT_REPS,
            ..default_experiment()
        };
        match run_sweep(&cfg, 0) {
            Ok(res) => plateaus.push(medians_at(&res, 100)),
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: format!("sweep failed: {e}"),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let n_obs = plateaus[0].len();
    let decreasing =
        (0..n_obs).all(|j| plateaus[0][j] > plateaus[1][j] && plateaus[1][j] > plateaus[2][j]);
    let ratios: Vec<f64> = (0..n_obs)
        .map(|j| plateaus[0][j] / plateaus[2][j])
        .collect();
    let in_range = ratios
        .iter()
        .all(|r| (SHOT_RATIO_RANGE.0..=SHOT_RATIO_RANGE.1).contains(r));
    Outcome {
        pass: decreasing && in_range && elapsed < SHOT_TIME_LIMIT,
        detail: format!(
            "plateau medians 1e2 {} 1e3 {} 1e4 {}, strictly decreasing: {decreasing}, 1e2/1e4 ratios {} in [{}, {}], {:.1} s (< {} s)",
            fmt(&plateaus[0]),
            fmt(&plateaus[1]),
            fmt(&plateaus[2]),
            fmt(&ratios),
            SHOT_RATIO_RANGE.0,
            SHOT_RATIO_RANGE.1,
            elapsed.as_secs_f64(),
            SHOT_TIME_LIMIT.as_secs()
        ),
    }
}

fn training_curve_shape() -> Outcome {
    let cfg = ExperimentConfig {
        shots: Shots::Finite(CURVE_SHOTS),
        n_train_grid: vec![2, 5, 100],
        repetitions: CURVE_REPS,
        ..default_experiment()
    };
    let res = match run_sweep(&cfg, 0) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("sweep failed: {e}"),
            }
        }
    };
    let (m2, m5, m100) = (
        medians_at(&res, 2),
        medians_at(&res, 5),
        medians_at(&res, 100),
    );
    let pass = (0..m2.len()).all(|j| m100[j] * CURVE_MIN_GAIN <= m5[j] && m5[j] < m2[j]);
    Outcome {
        pass,
        detail: format!(
            "medians n=2 {} n=5 {} n=100 {} (need n=100 <= n=5 / {CURVE_MIN_GAIN} and n=5 < n=2 per Pauli)",
            fmt(&m2),
            fmt(&m5),
            fmt(&m100)
        ),
    }
}

/// The first `GENERIC_POOL` rank-4 draws of `random_config`, sorted by σ_min.
fn random_rank4_draws(seed: u64) -> Vec<(f64, WalkConfig)> {
    let mut draws: Vec<(f64, WalkConfig)> = (0u64..)
        .map(|k| {
            random_config(
                &mut substream(seed, k, 1, Stage::Candidate),
                AngleBounds::default(),
            )
        })
        .filter_map(|w| {
            let frame = frame_rank(&effective_povm(&ReservoirMap::from_config(&w).unwrap()));
            (frame.rank == 4).then(|| (frame.sigma_min(), w))
        })
        .take(GENERIC_POOL)
        .collect();
    draws.sort_by(|a, b| a.0.total_cmp(&b.0));
    draws
}

/// The representative ("generic") random configuration is the draw with
/// the median σ_min; the census reports how many draws would have passed.
fn optimized_vs_random() -> Outcome {
    let template = ExperimentConfig {
        shots: Shots::Finite(CURVE_SHOTS),
        ..default_experiment()
    };
    let spec = SearchSpec {
        budget: OPT_BUDGET,
        criterion: Criterion::ValMse,
        seed: SEED,
        bounds: AngleBounds::default(),
        validation: ValidationSpec::default(),
    };
    let best = match optimize_config(&spec, &template, 0) {
        Ok(b) => b,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("search failed: {e}"),
            }
        }
    };
    let curve = |walk: WalkConfig, reps: usize| {
        let cfg = ExperimentConfig {
            walk,
            n_train_grid: vec![5, 100],
            repetitions: reps,
            master_seed: SEED + 1,
            ..template.clone()
        };
        run_sweep(&cfg, 0).map(|res| (medians_at(&res, 5), medians_at(&res, 100)))
    };
    let draws = random_rank4_draws(SEED ^ 0x5eed);
    let (random_sigma, random) = draws[GENERIC_POOL / 2].clone();
    let ((o5, o100), (r5, r100)) =
        match (curve(best.walk.clone(), OPT_REPS), curve(random, OPT_REPS)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                return Outcome {
                    pass: false,
                    detail: format!("sweep failed: {e}"),
                }
            }
        };
    let plateaued = (0..o5.len()).all(|j| o100[j] < o5[j] && r100[j] < r5[j]);
    let ratios: Vec<f64> = (0..o100.len())
        .map(|j| (o100[j] / r100[j]).max(r100[j] / o100[j]))
        .collect();
    let close = ratios.iter().all(|&r| r <= OPT_MAX_RATIO);

    let mut within = 0;
    for (_, walk) in &draws {
        if let Ok((_, m)) = curve(walk.clone(), CENSUS_REPS) {
            if (0..m.len()).all(|j| (m[j] / o100[j]).max(o100[j] / m[j]) <= OPT_MAX_RATIO) {
                within += 1;
            }
        }
    }
    Outcome {
        pass: plateaued && close,
        detail: format!(
            "optimized (candidate {}, val score {:.3e}) plateau {} vs median-sigma_min random (sigma_min {random_sigma:.3}) plateau {}, both plateau: {plateaued}, ratios {} (<= {OPT_MAX_RATIO}); census: {within}/{GENERIC_POOL} random rank-4 draws within {OPT_MAX_RATIO}x on every Pauli",
            best.candidate,
            best.score,
            fmt(&o100),
            fmt(&r100),
            fmt(&ratios)
        ),
    }
}

/// Evolves `|ψ⟩ ⊗ |0⟩` step by step on a sparse `(pol, n)` map, straight
/// from the coin and q-plate rules, then projects on the detection
/// polarization and reads off `|amplitude|²` per `n`.
fn brute_force_probabilities(walk: &WalkConfig, psi: &PolarizationState) -> Vec<f64> {
    let big_n = walk.space.cutoff() as i64;
    let mut state: BTreeMap<(usize, i64), Complex64> = BTreeMap::new();
    state.insert((0, 0), psi.amp_l);
    state.insert((1, 0), psi.amp_r);
    for step in &walk.steps {
        if let Some(c) = step.coin {
            let u = coin_operator(c);
            let mut next = BTreeMap::new();
            for n in -big_n..=big_n {
                let l = state.get(&(0, n)).copied().unwrap_or_default();
                let r = state.get(&(1, n)).copied().unwrap_or_default();
                next.insert((0, n), u[(0, 0)] * l + u[(0, 1)] * r);
                next.insert((1, n), u[(1, 0)] * l + u[(1, 1)] * r);
            }
            state = next;
        }
        let (alpha, delta) = (step.qplate.alpha, step.qplate.delta);
        let stay = Complex64::new((delta / 2.0).cos(), 0.0);
        let flip = Complex64::new(0.0, (delta / 2.0).sin());
        let mut next: BTreeMap<(usize, i64), Complex64> = BTreeMap::new();
        for (&(pol, n), &amp) in &state {
            *next.entry((pol, n)).or_default() += stay * amp;
            let (target, phase) = if pol == 0 {
                ((1, n + 1), -2.0 * alpha)
            } else {
                ((0, n - 1), 2.0 * alpha)
            };
            *next.entry(target).or_default() += flip * Complex64::from_polar(1.0, phase) * amp;
        }
        state = next;
    }
    let pol = walk.projection;
    (-big_n..=big_n)
        .map(|n| {
            let l = state.get(&(0, n)).copied().unwrap_or_default();
            let r = state.get(&(1, n)).copied().unwrap_or_default();
            (pol.amp_l.conj() * l + pol.amp_r.conj() * r).norm_sqr()
        })
        .collect()
}

fn povm_structure() -> Outcome {
    let (mut coin_defect, mut min_eig, mut sum_err, mut prob_err) =
        (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for k in 0..POVM_CONFIGS {
        let mut rng = substream(SEED, k as u64, 0, Stage::Candidate);
        let walk = random_config(&mut rng, AngleBounds::default());
        for step in &walk.steps {
            if let Some(c) = step.coin {
                coin_defect = coin_defect.max(coin_operator(c).unitarity_defect());
            }
        }
        let map = ReservoirMap::from_config(&walk).unwrap();
        let povm = effective_povm(&map);
        for e in povm.elements() {
            min_eig = min_eig.min(hermitian_eigenvalues_2x2(e)[0]);
        }
        sum_err = sum_err.max(povm.sum().max_abs_diff(&map.a.adjoint().matmul(&map.a)));
        for i in 0..POVM_INPUTS {
            let mut rng = substream(SEED, k as u64, i as u64, Stage::Pool);
            let psi = haar_random_state(&mut rng);
            let p = probabilities(&povm, &density(&psi).unwrap());
            let oracle = brute_force_probabilities(&walk, &psi);
            let err = p
                .iter()
                .zip(&oracle)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            prob_err = prob_err.max(err);
        }
    }
    let pass =
        coin_defect < POVM_TOL && min_eig >= -POVM_TOL && sum_err < POVM_TOL && prob_err < POVM_TOL;
    Outcome {
        pass,
        detail: format!(
            "{POVM_CONFIGS} configs x {POVM_INPUTS} inputs: coin unitarity defect {coin_defect:.1e}, min POVM eigenvalue {min_eig:.1e}, max |sum mu - A^dag A| {sum_err:.1e}, max |p - oracle| {prob_err:.1e} (tol {POVM_TOL:e})"
        ),
    }
}

fn dual_frame_equivalence() -> Outcome {
    let observables = Observable::paulis().to_vec();
    let labels: Vec<_> = observables.iter().map(|o| o.label).collect();
    let mut worst = 0.0f64;
    let mut configs = 0;
    let mut rng = substream(SEED, 0, 0, Stage::Validation);
    for c in 0..10u64 {
        let walk = random_config(
            &mut substream(SEED, c, 2, Stage::Candidate),
            AngleBounds::default(),
        );
        let povm = effective_povm(&ReservoirMap::from_config(&walk).unwrap());
        if frame_rank(&povm).rank != 4 {
            continue;
        }
        configs += 1;
        let ideal = ideal_weights(&povm, &observables);
        let mut draw = |n: usize| -> Vec<(Vec<f64>, Vec<f64>)> {
            (0..n)
                .map(|_| {
                    let rho = density(&haar_random_state(&mut rng)).unwrap();
                    let t = observables.iter().map(|o| expectation(o, &rho)).collect();
                    (probabilities(&povm, &rho), t)
                })
                .collect()
        };
        let (train_set, test_set) = (draw(DUAL_TRAIN), draw(DUAL_STATES));
        for intercept in [false, true] {
            let rows: Vec<_> = train_set
                .iter()
                .map(|(p, _)| {
                    features(Record::Probabilities(p), FeatureMode::Exact, intercept).unwrap()
                })
                .collect();
            let targets: Vec<&[f64]> = train_set.iter().map(|(_, t)| t.as_slice()).collect();
            let ts = TrainingSet::new(&rows, RMatrix::from_rows(&targets), labels.clone()).unwrap();
            let w = train(&ts, TrainOptions::default()).unwrap();
            for (p, _) in &test_set {
                let f = features(Record::Probabilities(p), FeatureMode::Exact, intercept).unwrap();
                let trained = predict(&w, &f).unwrap();
                let dual = predict(
                    &ideal.weights,
                    &features(Record::Probabilities(p), FeatureMode::Exact, false).unwrap(),
                )
                .unwrap();
                for (a, b) in trained.iter().zip(&dual) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    Outcome {
        pass: configs > 0 && worst < DUAL_TOL,
        detail: format!(
            "{configs} rank-4 configs, {DUAL_STATES} unseen states, with and without intercept: max |trained - dual| = {worst:.1e} (< {DUAL_TOL:e})"
        ),
    }
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qelm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
    }
}

fn thread_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run_cli(&[
        "sweep",
        "--out",
        a.to_str().unwrap(),
        "--seed",
        "11",
        "--reps",
        "40",
        "--ntrain",
        "2,5,20,100",
        "--shots",
        "1e3",
        "--threads",
        "1",
    ]);
    let manifest = a.join("manifest.json");
    let second = first.and_then(|_| {
        run_cli(&[
            "sweep",
            "--config",
            manifest.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "4",
        ])
    });
    if let Err(e) = second {
        return Outcome {
            pass: false,
            detail: format!("cli failed: {e}"),
        };
    }
    let same = |name: &str| {
        std::fs::read(a.join(name)).ok() == std::fs::read(b.join(name)).ok()
            && a.join(name).is_file()
    };
    let (s, r) = (same("summary.csv"), same("repetitions.csv"));
    Outcome {
        pass: s && r,
        detail: format!("--threads 1 vs --threads 4 from the same manifest: summary.csv identical {s}, repetitions.csv identical {r}"),
    }
}
