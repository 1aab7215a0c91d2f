use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use sbe_core::{BlockSystem, StructureCase, Weights};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityMode {
    On,
    Off,
    Both,
}

impl SparsityMode {
    pub fn dense(self) -> bool {
        self != SparsityMode::On
    }

    pub fn sparse(self) -> bool {
        self != SparsityMode::Off
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionName {
    Term1,
    Term2,
    Seta,
}

/// Every option any command understands. Flags and config-file values both land here;
/// flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub builtin: Option<String>,
    pub manifest: Option<PathBuf>,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub case: Option<StructureCase>,
    pub weights: Option<String>,
    pub sparsity: Option<SparsityMode>,
    pub solver: Option<String>,
    pub solution: Option<PathBuf>,
    pub criterion: Option<CriterionName>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub restart: Option<usize>,
    pub write_perturbation: Option<bool>,
    pub perturbation: Option<PathBuf>,
    pub grid: Option<Vec<usize>>,
    pub sweep: Option<Vec<usize>>,
    pub criteria: Option<bool>,
    pub laplacian: Option<String>,
    pub out: Option<PathBuf>,
}

macro_rules! fill_from {
    ($dst:expr, $src:expr; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fill every unset field from `file`.
    pub fn with_fallback(mut self, file: &Settings) -> Self {
        fill_from!(self, file;
            builtin, manifest, r, k, seed, case, weights, sparsity, solver, solution, criterion, tol,
            max_iter, restart, write_perturbation, perturbation, grid, sweep, criteria, laplacian, out);
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("sbe-out"))
    }

    pub fn weights_for(&self, sys: &BlockSystem) -> anyhow::Result<Weights> {
        parse_weights(self.weights.as_deref().unwrap_or("unit"), sys)
    }
}

pub fn parse_weights(spec: &str, sys: &BlockSystem) -> anyhow::Result<Weights> {
    match spec {
        "unit" => Ok(Weights::unit()),
        "normalized" => Ok(Weights::normalized(sys)),
        _ => {
            let Some(list) = spec.strip_prefix("explicit:") else {
                bail!("unknown weight preset `{spec}` (expected unit, normalized or explicit:t1,...,t10)");
            };
            let vals: Vec<f64> = list
                .split(',')
                .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad weight `{t}`")))
                .collect::<anyhow::Result<_>>()?;
            let theta: [f64; 10] = vals
                .try_into()
                .map_err(|v: Vec<f64>| anyhow::anyhow!("explicit weights need 10 values, got {}", v.len()))?;
            Ok(Weights::new(theta)?)
        }
    }
}
