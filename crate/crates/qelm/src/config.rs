//! Run configuration: a flat key-value text format with sections, and the
//! fully resolved form that is echoed into every manifest.
//!
//! ```text
//! # lines starting with '#' are comments
//! [reservoir]
//! preset = two_step            # S(105deg, 90deg), coin, S(336deg, 180deg)
//! coin = 0.3, 0.5, 1.1         # zeta, theta, phi
//! projection.prep = 0.2, 0.5   # zeta1, theta1 of the HWP/QWP pair
//!
//! [sampling]
//! shots = 1e4                  # or: inf
//! mode = poisson               # poisson | multinomial
//! features = raw               # raw | conditional | exact
//! intercept = on
//!
//! [harness]
//! ntrain = 2..100              # inclusive range, optional ":step", or a comma list
//! repetitions = 500
//! seed = 7
//! ```
//!
//! Angles are radians unless suffixed with `deg`. Explicit walks use
//! `steps = K` with `step1.coin = none | zeta, theta, phi` and
//! `step1.qplate = alpha, delta` for each step; `projection.amplitudes =
//! re_L, im_L, re_R, im_R` replaces `projection.prep`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use qelm_core::estimator::{TrainOptions, DEFAULT_RCOND};
use qelm_core::optics::{CoinParams, QPlateParams};
use qelm_core::qubit::{input_state, pauli, ObservableLabel, PolarizationState, PrepParams};
use qelm_core::reservoir::{WalkConfig, WalkStep, HARDWARE_ALPHA1_DEG, HARDWARE_ALPHA2_DEG};
use qelm_core::sampling::{FeatureMode, SamplingMode};
use serde::{Deserialize, Serialize};

use crate::error::config_err;
use crate::harness::{AngleBounds, Criterion, ExperimentConfig, SearchSpec, Shots, ValidationSpec};
use crate::{QelmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reservoir: ReservoirSection,
    pub sampling: SamplingSection,
    pub harness: HarnessSection,
    pub estimator: EstimatorSection,
    pub optimize: OptimizeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    pub cutoff: usize,
    pub steps: Vec<StepSpec>,
    pub projection: ProjectionSpec,
}

/// Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub coin: Option<[f64; 3]>,
    pub qplate: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSpec {
    Prep { zeta1: f64, theta1: f64 },
    Amplitudes([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfTag {
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsSpec {
    Finite(f64),
    Infinite(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingName {
    Poisson,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Raw,
    Conditional,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionName {
    SigmaMin,
    ValMse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub shots: ShotsSpec,
    pub mode: SamplingName,
    pub features: FeatureName,
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    pub pool_size: usize,
    pub test_size: usize,
    pub n_train: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub fixed_records: bool,
    pub observables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub rcond: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub criterion: CriterionName,
    pub budget: usize,
    pub bounds: [f64; 2],
    pub val_pool_size: usize,
    pub val_test_size: usize,
    pub val_n_train: usize,
    pub val_repetitions: usize,
}

pub const DEFAULT_COIN: [f64; 3] = [0.3, 0.5, 1.1];

pub fn two_step_steps(coin: [f64; 3]) -> Vec<StepSpec> {
    vec![
        StepSpec {
            coin: None,
            qplate: [HARDWARE_ALPHA1_DEG.to_radians(), std::f64::consts::FRAC_PI_2],
        },
        StepSpec {
            coin: Some(coin),
            qplate: [HARDWARE_ALPHA2_DEG.to_radians(), std::f64::consts::PI],
        },
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        let validation = ValidationSpec::default();
        RunConfig {
            reservoir: ReservoirSection {
                cutoff: 2,
                steps: two_step_steps(DEFAULT_COIN),
                projection: ProjectionSpec::Prep {
                    zeta1: 0.2,
                    theta1: 0.5,
                },
            },
            sampling: SamplingSection {
                shots: ShotsSpec::Finite(1e4),
                mode: SamplingName::Poisson,
                features: FeatureName::Raw,
                intercept: true,
            },
            harness: HarnessSection {
                pool_size: 450,
                test_size: 150,
                n_train: (2..=100).collect(),
                repetitions: 500,
                seed: 0,
                fixed_records: false,
                observables: ["sigma_x", "sigma_y", "sigma_z"].map(String::from).to_vec(),
            },
            estimator: EstimatorSection {
                rcond: DEFAULT_RCOND,
                ridge: 0.0,
            },
            optimize: OptimizeSection {
                criterion: CriterionName::SigmaMin,
                budget: 200,
                bounds: [0.0, 2.0 * std::f64::consts::PI],
                val_pool_size: validation.pool_size,
                val_test_size: validation.test_size,
                val_n_train: validation.n_train,
                val_repetitions: validation.repetitions,
            },
        }
    }
}

impl RunConfig {
    /// Loads a key-value config file, or a JSON manifest / resolved config
    /// (recognized by a leading `{`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QelmError::io(path, e))?;
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let inner = value.get("config").cloned().unwrap_or(value);
            let cfg: RunConfig = serde_json::from_value(inner)?;
            cfg.check()?;
            return Ok(cfg);
        }
        parse_kv(&text, &path.display().to_string())
    }

    /// Makes infinite shots imply exact features and rejects the reverse.
    pub fn resolve(&mut self) -> Result<()> {
        if matches!(self.sampling.shots, ShotsSpec::Infinite(_)) {
            self.sampling.features = FeatureName::Exact;
        }
        self.check()
    }

    fn check(&self) -> Result<()> {
        match (self.sampling.shots, self.sampling.features) {
            (ShotsSpec::Finite(_), FeatureName::Exact) => {
                Err(config_err("exact features require shots = inf"))
            }
            (ShotsSpec::Infinite(_), f) if f != FeatureName::Exact => {
                Err(config_err("shots = inf requires exact features"))
            }
            (ShotsSpec::Finite(s), _) if !(s.is_finite() && s > 0.0) => {
                Err(config_err(format!("shots must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }

    pub fn walk_config(&self) -> Result<WalkConfig> {
        let steps = self
            .reservoir
            .steps
            .iter()
            .map(|s| WalkStep {
                coin: s
                    .coin
                    .map(|[zeta, theta, phi]| CoinParams { zeta, theta, phi }),
                qplate: QPlateParams {
                    alpha: s.qplate[0],
                    delta: s.qplate[1],
                },
            })
            .collect();
        let projection = match self.reservoir.projection {
            ProjectionSpec::Prep { zeta1, theta1 } => input_state(PrepParams { zeta1, theta1 }),
            ProjectionSpec::Amplitudes([a, b, c, d]) => {
                PolarizationState::from_unnormalized(Complex64::new(a, b), Complex64::new(c, d))?
            }
        };
        Ok(WalkConfig::new(
            steps,
            projection,
            Some(self.reservoir.cutoff),
        )?)
    }

    pub fn shots(&self) -> Shots {
        match self.sampling.shots {
            ShotsSpec::Finite(s) => Shots::Finite(s),
            ShotsSpec::Infinite(_) => Shots::Infinite,
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let observables = self
            .harness
            .observables
            .iter()
            .map(|name| {
                let label = ObservableLabel::from_name(name)
                    .filter(|l| *l != ObservableLabel::Custom)
                    .ok_or_else(|| config_err(format!("unknown observable '{name}'")))?;
                Ok(pauli(label)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig {
            walk: self.walk_config()?,
            pool_size: self.harness.pool_size,
            test_size: self.harness.test_size,
            n_train_grid: self.harness.n_train.clone(),
            repetitions: self.harness.repetitions,
            shots: self.shots(),
            sampling: match self.sampling.mode {
                SamplingName::Poisson => SamplingMode::Poisson,
                SamplingName::Multinomial => SamplingMode::Multinomial,
            },
            features: self.feature_mode(),
            intercept: self.sampling.intercept,
            fixed_records: self.harness.fixed_records,
            master_seed: self.harness.seed,
            observables,
            train: TrainOptions {
                rcond: self.estimator.rcond,
                ridge: self.estimator.ridge,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn feature_mode(&self) -> FeatureMode {
        match self.sampling.features {
            FeatureName::Raw => FeatureMode::RawRate,
            FeatureName::Conditional => FeatureMode::Conditional,
            FeatureName::Exact => FeatureMode::Exact,
        }
    }

    pub fn search_spec(&self) -> SearchSpec {
        let o = &self.optimize;
        SearchSpec {
            budget: o.budget,
            criterion: match o.criterion {
                CriterionName::SigmaMin => Criterion::SigmaMin,
                CriterionName::ValMse => Criterion::ValMse,
            },
            seed: self.harness.seed,
            bounds: AngleBounds {
                lo: o.bounds[0],
                hi: o.bounds[1],
            },
            validation: ValidationSpec {
                pool_size: o.val_pool_size,
                test_size: o.val_test_size,
                n_train: o.val_n_train,
                repetitions: o.val_repetitions,
            },
        }
    }

    /// Replaces the walk with an explicit step list taken from `walk`.
    pub fn set_walk(&mut self, walk: &WalkConfig) {
        self.reservoir.cutoff = walk.space.cutoff();
        self.reservoir.steps = walk
            .steps
            .iter()
            .map(|s| StepSpec {
                coin: s.coin.map(|c| [c.zeta, c.theta, c.phi]),
                qplate: [s.qplate.alpha, s.qplate.delta],
            })
            .collect();
        let p = walk.projection;
        self.reservoir.projection =
            ProjectionSpec::Amplitudes([p.amp_l.re, p.amp_l.im, p.amp_r.re, p.amp_r.im]);
    }

    /// Key-value text that parses back to exactly this config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let r = &self.reservoir;
        let _ = writeln!(s, "[reservoir]");
        let _ = writeln!(s, "cutoff = {}", r.cutoff);
        let _ = writeln!(s, "steps = {}", r.steps.len());
        for (i, step) in r.steps.iter().enumerate() {
            match step.coin {
                None => {
                    let _ = writeln!(s, "step{}.coin = none", i + 1);
                }
                Some([a, b, c]) => {
                    let _ = writeln!(s, "step{}.coin = {a:?}, {b:?}, {c:?}", i + 1);
                }
            }
            let _ = writeln!(
                s,
                "step{}.qplate = {:?}, {:?}",
                i + 1,
                step.qplate[0],
                step.qplate[1]
            );
        }
        match r.projection {
            ProjectionSpec::Prep { zeta1, theta1 } => {
                let _ = writeln!(s, "projection.prep = {zeta1:?}, {theta1:?}");
            }
            ProjectionSpec::Amplitudes([a, b, c, d]) => {
                let _ = writeln!(s, "projection.amplitudes = {a:?}, {b:?}, {c:?}, {d:?}");
            }
        }
        let sa = &self.sampling;
        let _ = writeln!(s, "\n[sampling]");
        match sa.shots {
            ShotsSpec::Finite(x) => {
                let _ = writeln!(s, "shots = {x:?}");
            }
            ShotsSpec::Infinite(_) => {
                let _ = writeln!(s, "shots = inf");
            }
        }
        let _ = writeln!(s, "mode = {}", enum_name(&sa.mode));
        let _ = writeln!(s, "features = {}", enum_name(&sa.features));
        let _ = writeln!(s, "intercept = {}", on_off(sa.intercept));
        let h = &self.harness;
        let _ = writeln!(s, "\n[harness]");
        let _ = writeln!(s, "pool_size = {}", h.pool_size);
        let _ = writeln!(s, "test_size = {}", h.test_size);
        let _ = writeln!(
            s,
            "ntrain = {}",
            h.n_train
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        let _ = writeln!(s, "repetitions = {}", h.repetitions);
        let _ = writeln!(s, "seed = {}", h.seed);
        let _ = writeln!(s, "fixed_records = {}", on_off(h.fixed_records));
        let _ = writeln!(s, "observables = {}", h.observables.join(", "));
        let e = &self.estimator;
        let _ = writeln!(s, "\n[estimator]");
        let _ = writeln!(s, "rcond = {:?}", e.rcond);
        let _ = writeln!(s, "ridge = {:?}", e.ridge);
        let o = &self.optimize;
        let _ = writeln!(s, "\n[optimize]");
        let _ = writeln!(s, "criterion = {}", enum_name(&o.criterion));
        let _ = writeln!(s, "budget = {}", o.budget);
        let _ = writeln!(s, "bounds = {:?}, {:?}", o.bounds[0], o.bounds[1]);
        let _ = writeln!(s, "val_pool_size = {}", o.val_pool_size);
        let _ = writeln!(s, "val_test_size = {}", o.val_test_size);
        let _ = writeln!(s, "val_ntrain = {}", o.val_n_train);
        let _ = writeln!(s, "val_repetitions = {}", o.val_repetitions);
        s
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, deg) = match t.strip_suffix("deg") {
        Some(rest) => (rest.trim(), true),
        None => (t, false),
    };
    let v: f64 = num.parse().map_err(|_| format!("invalid angle '{t}'"))?;
    if !v.is_finite() {
        return Err(format!("invalid angle '{t}'"));
    }
    Ok(if deg { v.to_radians() } else { v })
}

fn parse_angles<const K: usize>(s: &str) -> std::result::Result<[f64; K], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != K {
        return Err(format!("expected {K} comma-separated angles, got '{s}'"));
    }
    let mut out = [0.0; K];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_angle(p)?;
    }
    Ok(out)
}

fn parse_floats<const K: usize>(s: &str) -> std::result::Result<[f64; K], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != K {
        return Err(format!("expected {K} comma-separated numbers, got '{s}'"));
    }
    let mut out = [0.0; K];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| format!("invalid number '{}'", p.trim()))?;
    }
    Ok(out)
}

pub fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected on/off, got '{other}'")),
    }
}

pub fn parse_shots(s: &str) -> std::result::Result<ShotsSpec, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
        return Ok(ShotsSpec::Infinite(InfTag::Inf));
    }
    let v: f64 = t.parse().map_err(|_| format!("invalid shots '{t}'"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("shots must be positive, got '{t}'"));
    }
    Ok(ShotsSpec::Finite(v))
}

/// `2..100`, `10..100:10`, `2, 5, 10` or any comma-separated mix.
pub fn parse_ntrain(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((lo, rest)) = part.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((h, st)) => (
                    h,
                    st.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("invalid step in '{part}'"))?,
                ),
                None => (rest, 1),
            };
            let lo: usize = lo
                .trim()
                .parse()
                .map_err(|_| format!("invalid range '{part}'"))?;
            let hi: usize = hi
                .trim()
                .parse()
                .map_err(|_| format!("invalid range '{part}'"))?;
            if step == 0 || hi < lo {
                return Err(format!("invalid range '{part}'"));
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(
                part.parse()
                    .map_err(|_| format!("invalid n_train '{part}'"))?,
            );
        }
    }
    if out.is_empty() {
        return Err("empty n_train list".into());
    }
    Ok(out)
}

fn parse_sampling(s: &str) -> std::result::Result<SamplingName, String> {
    match s.trim() {
        "poisson" => Ok(SamplingName::Poisson),
        "multinomial" => Ok(SamplingName::Multinomial),
        other => Err(format!("unknown sampling mode '{other}'")),
    }
}

pub fn parse_features(s: &str) -> std::result::Result<FeatureName, String> {
    match FeatureMode::from_name(s.trim()) {
        Some(FeatureMode::RawRate) => Ok(FeatureName::Raw),
        Some(FeatureMode::Conditional) => Ok(FeatureName::Conditional),
        Some(FeatureMode::Exact) => Ok(FeatureName::Exact),
        None => Err(format!("unknown feature mode '{}'", s.trim())),
    }
}

pub fn parse_criterion(s: &str) -> std::result::Result<CriterionName, String> {
    match Criterion::from_name(s.trim()) {
        Some(Criterion::SigmaMin) => Ok(CriterionName::SigmaMin),
        Some(Criterion::ValMse) => Ok(CriterionName::ValMse),
        None => Err(format!("unknown criterion '{}'", s.trim())),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("invalid number '{}'", s.trim()))
}

#[derive(Default)]
struct WalkDraft {
    preset: Option<String>,
    coin: Option<[f64; 3]>,
    step_count: Option<usize>,
    step_coins: BTreeMap<usize, Option<[f64; 3]>>,
    step_qplates: BTreeMap<usize, [f64; 2]>,
    cutoff: Option<usize>,
}

pub fn parse_kv(text: &str, path: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut walk = WalkDraft::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let err = |message: String| QelmError::Parse {
            path: path.to_string(),
            line: lineno + 1,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if !["reservoir", "sampling", "harness", "estimator", "optimize"]
                .contains(&section.as_str())
            {
                return Err(err(format!("unknown section [{section}]")));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let unknown = || err(format!("unknown key '{key}' in [{section}]"));
        let res: std::result::Result<(), String> = match section.as_str() {
            "reservoir" => match key {
                "preset" => {
                    if value != "two_step" {
                        Err(format!("unknown preset '{value}'"))
                    } else {
                        walk.preset = Some(value.to_string());
                        Ok(())
                    }
                }
                "coin" => parse_angles::<3>(value).map(|c| walk.coin = Some(c)),
                "steps" => parse_num(value).map(|n| walk.step_count = Some(n)),
                "cutoff" => parse_num(value).map(|n| walk.cutoff = Some(n)),
                "projection.prep" => parse_angles::<2>(value).map(|[zeta1, theta1]| {
                    cfg.reservoir.projection = ProjectionSpec::Prep { zeta1, theta1 }
                }),
                "projection.amplitudes" => parse_floats::<4>(value)
                    .map(|a| cfg.reservoir.projection = ProjectionSpec::Amplitudes(a)),
                k => match parse_step_key(k) {
                    Some((i, "coin")) => {
                        if value == "none" {
                            walk.step_coins.insert(i, None);
                            Ok(())
                        } else {
                            parse_angles::<3>(value).map(|c| {
                                walk.step_coins.insert(i, Some(c));
                            })
                        }
                    }
                    Some((i, "qplate")) => parse_angles::<2>(value).map(|q| {
                        walk.step_qplates.insert(i, q);
                    }),
                    _ => return Err(unknown()),
                },
            },
            "sampling" => match key {
                "shots" => parse_shots(value).map(|s| cfg.sampling.shots = s),
                "mode" => parse_sampling(value).map(|m| cfg.sampling.mode = m),
                "features" => parse_features(value).map(|f| cfg.sampling.features = f),
                "intercept" => parse_bool(value).map(|b| cfg.sampling.intercept = b),
                _ => return Err(unknown()),
            },
            "harness" => match key {
                "pool_size" => parse_num(value).map(|n| cfg.harness.pool_size = n),
                "test_size" => parse_num(value).map(|n| cfg.harness.test_size = n),
                "ntrain" => parse_ntrain(value).map(|v| cfg.harness.n_train = v),
                "repetitions" | "reps" => parse_num(value).map(|n| cfg.harness.repetitions = n),
                "seed" => parse_num(value).map(|n| cfg.harness.seed = n),
                "fixed_records" => parse_bool(value).map(|b| cfg.harness.fixed_records = b),
                "observables" => {
                    cfg.harness.observables =
                        value.split(',').map(|s| s.trim().to_string()).collect();
                    Ok(())
                }
                _ => return Err(unknown()),
            },
            "estimator" => match key {
                "rcond" => parse_num(value).map(|x| cfg.estimator.rcond = x),
                "ridge" => parse_num(value).map(|x| cfg.estimator.ridge = x),
                _ => return Err(unknown()),
            },
            "optimize" => match key {
                "criterion" => parse_criterion(value).map(|c| cfg.optimize.criterion = c),
                "budget" => parse_num(value).map(|n| cfg.optimize.budget = n),
                "bounds" => parse_angles::<2>(value).map(|b| cfg.optimize.bounds = b),
                "val_pool_size" => parse_num(value).map(|n| cfg.optimize.val_pool_size = n),
                "val_test_size" => parse_num(value).map(|n| cfg.optimize.val_test_size = n),
                "val_ntrain" => parse_num(value).map(|n| cfg.optimize.val_n_train = n),
                "val_repetitions" => parse_num(value).map(|n| cfg.optimize.val_repetitions = n),
                _ => return Err(unknown()),
            },
            _ => return Err(err("key outside of a section".into())),
        };
        res.map_err(err)?;
    }

    let path_err = |message: String| QelmError::Parse {
        path: path.to_string(),
        line: 0,
        message,
    };
    if let Some(k) = walk.step_count {
        if walk.preset.is_some() || walk.coin.is_some() {
            return Err(path_err(
                "'steps' cannot be combined with 'preset' or 'coin'".into(),
            ));
        }
        let mut steps = Vec::with_capacity(k);
        for i in 1..=k {
            let qplate = *walk
                .step_qplates
                .get(&i)
                .ok_or_else(|| path_err(format!("missing step{i}.qplate")))?;
            let coin = walk.step_coins.get(&i).copied().flatten();
            steps.push(StepSpec { coin, qplate });
        }
        if let Some(extra) = walk
            .step_qplates
            .keys()
            .chain(walk.step_coins.keys())
            .find(|&&i| i == 0 || i > k)
        {
            return Err(path_err(format!("step{extra} is outside steps = {k}")));
        }
        cfg.reservoir.steps = steps;
    } else {
        if !walk.step_qplates.is_empty() || !walk.step_coins.is_empty() {
            return Err(path_err("stepN keys need 'steps = K'".into()));
        }
        cfg.reservoir.steps = two_step_steps(walk.coin.unwrap_or(DEFAULT_COIN));
    }
    cfg.reservoir.cutoff = walk.cutoff.unwrap_or(cfg.reservoir.steps.len());
    cfg.resolve()?;
    Ok(cfg)
}

fn parse_step_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("step")?;
    let (idx, field) = rest.split_once('.')?;
    Some((idx.parse().ok()?, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_accept_degree_suffix() {
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!((parse_angle("180deg").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_angle(" 90 deg ").unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(parse_angle("deg").is_err());
        assert!(parse_angle("nan").is_err());
    }

    #[test]
    fn ntrain_lists_and_ranges() {
        assert_eq!(parse_ntrain("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(
            parse_ntrain("10..30:10, 100").unwrap(),
            vec![10, 20, 30, 100]
        );
        assert_eq!(parse_ntrain("5").unwrap(), vec![5]);
        assert!(parse_ntrain("5..2").is_err());
        assert!(parse_ntrain("").is_err());
    }

    #[test]
    fn shots_parse() {
        assert_eq!(parse_shots("1e4").unwrap(), ShotsSpec::Finite(1e4));
        assert_eq!(
            parse_shots("inf").unwrap(),
            ShotsSpec::Infinite(InfTag::Inf)
        );
        assert!(parse_shots("0").is_err());
        assert!(parse_shots("-3").is_err());
    }

    #[test]
    fn preset_file_resolves_to_the_hardware_walk() {
        let text = "[reservoir]\npreset = two_step\ncoin = 0.3, 0.5, 1.1\nprojection.prep = 10deg, 0.5\n\n[sampling]\nshots = inf\n";
        let cfg = parse_kv(text, "t.cfg").unwrap();
        assert_eq!(cfg.sampling.features, FeatureName::Exact);
        assert_eq!(cfg.reservoir.cutoff, 2);
        assert_eq!(cfg.reservoir.steps[0].qplate[0], 105f64.to_radians());
        assert_eq!(cfg.reservoir.steps[1].qplate[0], 336f64.to_radians());
        assert_eq!(cfg.reservoir.steps[1].coin, Some([0.3, 0.5, 1.1]));
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.shots, Shots::Infinite);
    }

    #[test]
    fn explicit_steps() {
        let text =
            "[reservoir]\nsteps = 1\nstep1.coin = none\nstep1.qplate = 0, 180deg\ncutoff = 3\n";
        let cfg = parse_kv(text, "t.cfg").unwrap();
        assert_eq!(
            cfg.reservoir.steps,
            vec![StepSpec {
                coin: None,
                qplate: [0.0, std::f64::consts::PI]
            }]
        );
        assert_eq!(cfg.reservoir.cutoff, 3);
        assert!(parse_kv("[reservoir]\nsteps = 2\nstep1.qplate = 0, 1\n", "t").is_err());
        assert!(parse_kv(
            "[reservoir]\nsteps = 1\nstep1.qplate = 0, 1\ncoin = 1,2,3\n",
            "t"
        )
        .is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_kv("[sampling]\n\nshots = lots\n", "bad.cfg") {
            Err(QelmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_kv("[nope]\n", "t").is_err());
        assert!(parse_kv("[harness]\ncolour = red\n", "t").is_err());
        assert!(parse_kv("seed = 1\n", "t").is_err());
        assert!(parse_kv("[sampling]\nfeatures = exact\n", "t").is_err());
    }

    #[test]
    fn kv_round_trip_is_exact() {
        let mut cfg = RunConfig::default();
        cfg.harness.seed = 99;
        cfg.harness.n_train = vec![3, 7, 50];
        cfg.sampling.intercept = false;
        cfg.estimator.ridge = 1.0 / 3.0;
        cfg.optimize.criterion = CriterionName::ValMse;
        let walk = crate::harness::random_config(
            &mut crate::seed::substream(1, 2, 3, crate::seed::Stage::Candidate),
            AngleBounds::default(),
        );
        cfg.set_walk(&walk);
        let back = parse_kv(&cfg.to_kv(), "roundtrip").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.walk_config().unwrap(), walk);
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.sampling.shots = ShotsSpec::Infinite(InfTag::Inf);
        cfg.sampling.features = FeatureName::Exact;
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"shots\":\"inf\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
