//! Experiment configuration, read from TOML.
//!
//! ```toml
//! input = "adult.csv"          # or a [synthetic] table instead
//! schema = "adult.schema.toml" # omitted: inferred from the data
//! binarize = "bitwise-log"     # optional: "bitwise-log" or "one-hot"
//! mode = "explicit"            # or "factored"
//! algorithm = "mwem"           # or "baseline" (explicit mode, parity workload)
//! repetitions = 5
//! seed = 1
//! out = "results"
//! delta = 1e-6                 # optional; also report the (eps', delta) view
//!
//! [workload]
//! kind = "range"               # range | parity | conjunction | cuboids | file
//! count = 2000
//!
//! [privacy]                    # any MwemConfig field
//! epsilon = 0.1
//! iterations = 10
//! output = "average"
//!
//! [sweep]                      # used by `mwem sweep`
//! epsilon = [0.0125, 0.025, 0.05, 0.1]
//! iterations = [10, 12, 14, 16]
//!
//! [export]
//! format = "weighted"          # or "sampled"
//! ```

use std::path::{Path, PathBuf};

use mwem::encode::BinaryEncoding;
use mwem::MwemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Explicit,
    Factored,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Mwem,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WorkloadSpec {
    /// Random range queries.
    Range { count: usize },
    /// Parities over up to `max_order` binary attributes.
    Parity { max_order: usize },
    /// Conjunctions of up to `max_order` binary attributes.
    Conjunction { max_order: usize },
    /// Every marginal over up to `max_order` attributes, measured cell by cell.
    Cuboids {
        max_order: usize,
        #[serde(default)]
        include_empty: bool,
    },
    /// A workload file.
    File { path: PathBuf },
}

impl WorkloadSpec {
    /// Parses the `--workload` shorthand: `range:2000`, `parity:3`,
    /// `conjunction:2`, `cuboids:2`, or a path to a workload file.
    pub fn parse_flag(s: &str) -> Result<Self> {
        let number = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| CliError::config(format!("workload `{s}`: `{v}` is not a count")))
        };
        match s.split_once(':') {
            Some(("range", v)) => Ok(WorkloadSpec::Range { count: number(v)? }),
            Some(("parity", v)) => Ok(WorkloadSpec::Parity { max_order: number(v)? }),
            Some(("conjunction", v)) => Ok(WorkloadSpec::Conjunction { max_order: number(v)? }),
            Some(("cuboids", v)) => Ok(WorkloadSpec::Cuboids {
                max_order: number(v)?,
                include_empty: false,
            }),
            _ if s.ends_with(".toml") => Ok(WorkloadSpec::File { path: s.into() }),
            _ => Err(CliError::config(format!(
                "workload `{s}`: expected range:N, parity:K, conjunction:K, cuboids:K or a .toml file"
            ))),
        }
    }
}

/// Independent binary attributes, each set with probability `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub attributes: usize,
    pub records: usize,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    /// One row per domain element with its weight.
    #[default]
    Weighted,
    /// `round(n)` records drawn from the synthetic distribution.
    Sampled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSpec {
    #[serde(default)]
    pub format: ExportFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub iterations: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binarize: Option<BinaryEncoding>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub algorithm: Algorithm,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub privacy: MwemConfig,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<ExportSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    "results".into()
}

impl ExperimentConfig {
    /// A config with defaults everywhere except the data and workload.
    pub fn new(workload: WorkloadSpec) -> Self {
        ExperimentConfig {
            input: None,
            synthetic: None,
            schema: None,
            binarize: None,
            mode: Mode::default(),
            algorithm: Algorithm::default(),
            workload,
            privacy: MwemConfig::default(),
            delta: 0.0,
            repetitions: 1,
            seed: 0,
            out: default_out(),
            export: None,
            sweep: None,
        }
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.input.as_mut().map(rebase);
        config.schema.as_mut().map(rebase);
        rebase(&mut config.out);
        if let WorkloadSpec::File { path } = &mut config.workload {
            rebase(path);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input, &self.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(CliError::config(
                    "set exactly one of `input` and `synthetic`",
                ))
            }
        }
        if self.repetitions == 0 {
            return Err(CliError::config("repetitions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(CliError::config(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if let Some(s) = &self.synthetic {
            if !(0.0..=1.0).contains(&s.p) {
                return Err(CliError::config(format!(
                    "synthetic p must lie in [0, 1], got {}",
                    s.p
                )));
            }
        }
        if self.algorithm == Algorithm::Baseline {
            if self.mode != Mode::Explicit {
                return Err(CliError::config("the baseline runs in explicit mode only"));
            }
            if !matches!(self.workload, WorkloadSpec::Parity { .. }) {
                return Err(CliError::config("the baseline measures a parity workload"));
            }
        }
        if self.mode == Mode::Factored && matches!(self.workload, WorkloadSpec::Cuboids { .. }) {
            return Err(CliError::config(
                "cuboid workloads run in explicit mode only",
            ));
        }
        Ok(())
    }
}
