use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0x5EED_0001;

/// Rejected input, reported with exit status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// Options shared by every command. Each one may also be given as a key of
/// the `--config` JSON file; flags take precedence.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Params {
    /// JSON file with default values for any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Command the configuration was written for (config files only)
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,

    /// Tail index of the latent severity
    #[arg(long)]
    pub rho: Option<f64>,
    /// Speed parameter linking t_N to ln N
    #[arg(long)]
    pub lambda: Option<f64>,
    /// gaussian or weibull
    #[arg(long)]
    pub family: Option<String>,
    /// Weibull tail scale c (default 1/rho)
    #[arg(long)]
    pub c: Option<f64>,
    /// asymptotic, exact-lognormal or exact-normalized
    #[arg(long)]
    pub schedule: Option<String>,
    /// Target expected bank loss
    #[arg(long)]
    pub a: Option<f64>,
    /// Target bank-loss variance (exact-lognormal)
    #[arg(long)]
    pub b: Option<f64>,
    /// Correlation constant, rho_N = min(1, c0 / ln N)
    #[arg(long)]
    pub c0: Option<f64>,
    /// Hold t_N fixed at this value
    #[arg(long)]
    pub t_fixed: Option<f64>,
    /// Quantile level of the value at risk
    #[arg(long)]
    pub q: Option<f64>,

    /// Number of cells (simulate)
    #[arg(long)]
    pub n: Option<u64>,
    /// Comma-separated cell counts
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    /// Comma-separated quantile levels reported by simulate
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Monte Carlo replications
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long, env = "OPRISK_WORKERS")]
    #[serde(skip)]
    pub workers: Option<usize>,

    /// Output file (default: standard output)
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    #[serde(skip)]
    pub format: Option<String>,

    /// Use the printed sign of the sub-leading term in the asymptotic ratio
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub eq15_printed_sign: bool,
    /// Use the printed closed forms of curves B, C, D
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub exponent_printed_forms: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field; } )*
    };
}

impl Params {
    /// Fills options not given on the command line from the `--config` file.
    pub fn merge_config_file(mut self, command: &str) -> anyhow::Result<Params> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_config(&path)?;
        if let Some(c) = &file.command {
            if c != command {
                bail!(invalid(format!("{} was written for `{c}`, not `{command}`", path.display())));
            }
        }
        overlay!(self, file; rho_min, rho_max, steps, rho, lambda, family, c, schedule, a, b, c0,
            t_fixed, q, n, n_list, levels, reps, seed);
        self.eq15_printed_sign |= file.eq15_printed_sign;
        self.exponent_printed_forms |= file.exponent_printed_forms;
        Ok(self)
    }
}

/// Accepts either a bare options object or a previous JSON output, whose
/// `config` member is used.
fn read_config(path: &Path) -> anyhow::Result<Params> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if value.get("rows").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    serde_json::from_value(value).map_err(|e| invalid(format!("{}: {e}", path.display())))
}
