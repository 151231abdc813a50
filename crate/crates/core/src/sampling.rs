//! Finite-statistics measurement records and the feature vectors built
//! from them.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::{Error, Result};

const NEG_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Independent Poisson counts with mean `shots · p_b`.
    Poisson,
    /// `round(shots)` detection events spread over outcomes by `p_b / Σp`.
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// `counts / shots`: unbiased for `p_b`, linear in ρ.
    RawRate,
    /// `counts / Σ counts`: needs no flux calibration, nonlinear in ρ.
    Conditional,
    /// True probabilities (infinite statistics).
    Exact,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::RawRate => "raw",
            FeatureMode::Conditional => "conditional",
            FeatureMode::Exact => "exact",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "raw" | "rawrate" | "raw_rate" => Some(FeatureMode::RawRate),
            "conditional" => Some(FeatureMode::Conditional),
            "exact" => Some(FeatureMode::Exact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    pub counts: Vec<u64>,
    /// Mean total flux the counts were drawn with.
    pub shots_nominal: f64,
}

impl CountVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub mode: FeatureMode,
    /// Whether `values` ends with a constant 1.
    pub intercept: bool,
}

/// What a feature vector is computed from.
#[derive(Debug, Clone, Copy)]
pub enum Record<'a> {
    Counts(&'a CountVector),
    Probabilities(&'a [f64]),
}

pub fn sample_counts<R: Rng + ?Sized>(
    p: &[f64],
    shots: f64,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<CountVector> {
    if !(shots.is_finite() && shots > 0.0) {
        return Err(Error::InvalidShots(shots));
    }
    let mut probs = Vec::with_capacity(p.len());
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        if value < -NEG_TOL {
            return Err(Error::NegativeProbability { index, value });
        }
        probs.push(value.max(0.0));
    }
    let mass: f64 = probs.iter().sum();
    if mass > 1.0 + MASS_TOL {
        return Err(Error::InvalidProbabilities("probabilities sum above one"));
    }

    let counts = match mode {
        SamplingMode::Poisson => probs
            .iter()
            .map(|&pb| {
                let mean = shots * pb;
                if mean > 0.0 {
                    let dist = Poisson::new(mean).expect("positive finite mean");
                    dist.sample(rng) as u64
                } else {
                    0
                }
            })
            .collect(),
        SamplingMode::Multinomial => {
            if mass <= 0.0 {
                return Err(Error::InvalidProbabilities(
                    "no probability mass to distribute",
                ));
            }
            let mut remaining_events = libm::round(shots) as u64;
            let mut remaining_mass = mass;
            let mut counts = Vec::with_capacity(probs.len());
            for (b, &pb) in probs.iter().enumerate() {
                let k = if b + 1 == probs.len() {
                    remaining_events
                } else if remaining_events == 0 || pb <= 0.0 {
                    0
                } else {
                    let q = (pb / remaining_mass).clamp(0.0, 1.0);
                    Binomial::new(remaining_events, q)
                        .expect("q in [0, 1]")
                        .sample(rng)
                };
                counts.push(k);
                remaining_events -= k;
                remaining_mass -= pb;
            }
            counts
        }
    };
    Ok(CountVector {
        counts,
        shots_nominal: shots,
    })
}

pub fn features(record: Record<'_>, mode: FeatureMode, intercept: bool) -> Result<FeatureVector> {
    let mut values: Vec<f64> = match (record, mode) {
        (Record::Counts(c), FeatureMode::RawRate) => {
            if !(c.shots_nominal.is_finite() && c.shots_nominal > 0.0) {
                return Err(Error::InvalidShots(c.shots_nominal));
            }
            c.counts
                .iter()
                .map(|&k| k as f64 / c.shots_nominal)
                .collect()
        }
        (Record::Counts(c), FeatureMode::Conditional) => {
            let total = c.total();
            if total == 0 {
                return Err(Error::DegenerateSample);
            }
            c.counts.iter().map(|&k| k as f64 / total as f64).collect()
        }
        (Record::Probabilities(p), FeatureMode::Exact) => p.to_vec(),
        // finite counts cannot produce exact features and vice versa
        _ => return Err(Error::FeatureModeMismatch),
    };
    if intercept {
        values.push(1.0);
    }
    Ok(FeatureVector {
        values,
        mode,
        intercept,
    })
}
