//! Output files: summary and per-repetition CSVs, weights and run manifests
//! as JSON, and an all-or-nothing writer for a set of outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a CSV back yields bit-identical values.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qelm_core::estimator::EstimatorWeights;
use qelm_core::linalg::RMatrix;
use qelm_core::qubit::ObservableLabel;
use qelm_core::sampling::FeatureMode;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::config_err;
use crate::harness::{CellSummary, SweepResults};
use crate::{QelmError, Result};

pub const SUMMARY_HEADER: &str = "n_train,observable,median_mse,q1,q3,std";
pub const REPETITIONS_HEADER: &str = "repetition,n_train,observable,mse";
pub const WEIGHTS_FORMAT: &str = "qelm-weights/1";

pub fn summary_csv(cells: &[CellSummary]) -> String {
    let mut s = String::with_capacity(64 * (cells.len() + 1));
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for c in cells {
        let m = &c.summary;
        s.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?}\n",
            c.n_train, c.observable, m.median, m.q1, m.q3, m.std
        ));
    }
    s
}

pub fn repetitions_csv(res: &SweepResults) -> String {
    let mut s = String::from(REPETITIONS_HEADER);
    s.push('\n');
    for (r, rep) in res.table.iter().enumerate() {
        for (g, row) in rep.iter().enumerate() {
            for (o, v) in row.iter().enumerate() {
                s.push_str(&format!(
                    "{r},{},{},{v:?}\n",
                    res.n_train_grid[g], res.observables[o]
                ));
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n_train: usize,
    pub observable: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub std: f64,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = fs::read_to_string(path).map_err(|e| QelmError::io(path, e))?;
    let name = path.display().to_string();
    let err = |line: usize, message: String| QelmError::Parse {
        path: name.clone(),
        line,
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(err(1, format!("expected header '{SUMMARY_HEADER}'")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(i + 2, format!("expected 6 fields, got {}", f.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(i + 2, format!("invalid number '{s}'")))
        };
        rows.push(SummaryRow {
            n_train: f[0]
                .parse()
                .map_err(|_| err(i + 2, format!("invalid n_train '{}'", f[0])))?,
            observable: f[1].to_string(),
            median: num(f[2])?,
            q1: num(f[3])?,
            q3: num(f[4])?,
            std: num(f[5])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub format: String,
    pub observables: Vec<String>,
    pub feature_mode: String,
    pub intercept: bool,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, one row per observable.
    pub weights: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl WeightsFile {
    pub fn from_weights(w: &EstimatorWeights) -> Self {
        WeightsFile {
            format: WEIGHTS_FORMAT.to_string(),
            observables: w.observables.iter().map(|l| l.name().to_string()).collect(),
            feature_mode: w.mode.name().to_string(),
            intercept: w.intercept,
            rows: w.w.rows(),
            cols: w.w.cols(),
            weights: w.w.as_slice().to_vec(),
            singular_values: w.singular_values.clone(),
        }
    }

    pub fn to_weights(&self) -> Result<EstimatorWeights> {
        if self.format != WEIGHTS_FORMAT {
            return Err(config_err(format!(
                "unsupported weights format '{}'",
                self.format
            )));
        }
        if self.weights.len() != self.rows * self.cols || self.observables.len() != self.rows {
            return Err(config_err("weights shape does not match its data"));
        }
        let observables = self
            .observables
            .iter()
            .map(|n| {
                ObservableLabel::from_name(n)
                    .ok_or_else(|| config_err(format!("unknown observable '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mode = FeatureMode::from_name(&self.feature_mode)
            .ok_or_else(|| config_err(format!("unknown feature mode '{}'", self.feature_mode)))?;
        Ok(EstimatorWeights {
            w: RMatrix::from_vec(self.rows, self.cols, self.weights.clone()),
            observables,
            mode,
            intercept: self.intercept,
            singular_values: self.singular_values.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub seed: u64,
    pub threads: usize,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: &RunConfig, threads: usize, started: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            started,
            finished: unix_now(),
            seed: config.harness.seed,
            threads,
            config: config.clone(),
            outputs: Vec::new(),
        }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Training data for `train`: columns `p0..p{m-1}` followed by one target
/// column per observable, named like `sigma_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub probabilities: Vec<Vec<f64>>,
    pub observables: Vec<ObservableLabel>,
    /// One row per sample, one column per observable.
    pub targets: Vec<Vec<f64>>,
}

pub fn read_data_csv(path: &Path) -> Result<DataTable> {
    let file = fs::File::open(path).map_err(|e| QelmError::io(path, e))?;
    let name = path.display().to_string();
    let err = |line: usize, message: String| QelmError::Parse {
        path: name.clone(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| QelmError::io(path, e))?,
        None => return Err(err(1, "empty file".into())),
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_p = cols.iter().take_while(|c| c.starts_with('p')).count();
    for (i, c) in cols[..n_p].iter().enumerate() {
        if *c != format!("p{i}") {
            return Err(err(1, format!("expected column p{i}, found '{c}'")));
        }
    }
    if n_p == 0 || n_p == cols.len() {
        return Err(err(
            1,
            "need p0.. columns followed by observable columns".into(),
        ));
    }
    let observables = cols[n_p..]
        .iter()
        .map(|c| {
            ObservableLabel::from_name(c)
                .filter(|l| *l != ObservableLabel::Custom)
                .ok_or_else(|| err(1, format!("unknown observable column '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = DataTable {
        probabilities: Vec::new(),
        observables,
        targets: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| QelmError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| err(i + 2, format!("invalid number '{}'", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != cols.len() {
            return Err(err(
                i + 2,
                format!("expected {} fields, got {}", cols.len(), vals.len()),
            ));
        }
        table.probabilities.push(vals[..n_p].to_vec());
        table.targets.push(vals[n_p..].to_vec());
    }
    Ok(table)
}

pub fn write_data_csv(table: &DataTable) -> String {
    let m = table.probabilities.first().map_or(0, Vec::len);
    let mut head: Vec<String> = (0..m).map(|i| format!("p{i}")).collect();
    head.extend(table.observables.iter().map(|l| l.name().to_string()));
    let mut s = head.join(",");
    s.push('\n');
    for (p, t) in table.probabilities.iter().zip(&table.targets) {
        let row: Vec<String> = p.iter().chain(t).map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Stages a set of output files and publishes them together. Each file is
/// written to `<name>.tmp` and fsynced; `commit` renames them into place.
/// Dropping an uncommitted writer removes every staged file.
pub struct AtomicOutputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl AtomicOutputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| QelmError::io(dir, e))?;
        Ok(AtomicOutputs {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
            committed: false,
        })
    }

    pub fn stage(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(|e| QelmError::io(&tmp, e))?;
        self.staged.push((tmp.clone(), target));
        f.write_all(contents)
            .and_then(|_| f.sync_all())
            .map_err(|e| QelmError::io(&tmp, e))
    }

    pub fn stage_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.stage(name, text.as_bytes())
    }

    pub fn names(&self) -> Vec<String> {
        self.staged
            .iter()
            .filter_map(|(_, t)| t.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        for (tmp, target) in &self.staged {
            fs::rename(tmp, target).map_err(|e| QelmError::io(target, e))?;
        }
        self.committed = true;
        Ok(self.staged.iter().map(|(_, t)| t.clone()).collect())
    }
}

impl Drop for AtomicOutputs {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _) in &self.staged {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}
