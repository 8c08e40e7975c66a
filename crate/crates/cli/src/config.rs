//! Experiment parameters: defaults, flat key=value config files, run.json
//! manifests, and CLI-flag overrides.
//!
//! Precedence: built-in defaults < config file < command-line flags. A
//! run.json emitted by a previous run is accepted wherever a config file is,
//! so any run can be reproduced from its own manifest.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

/// Every knob any experiment understands; unset fields fall back to the
/// experiment's defaults.
#[derive(Debug, Clone, Default)]
pub struct RawParams {
    pub n_samples: Option<usize>,
    pub j_min: Option<u32>,
    pub j_max: Option<u32>,
    pub k_list: Option<Vec<usize>>,
    pub alpha_list: Option<Vec<f64>>,
    pub ibp_boundary: Option<bool>,
    pub svd_cutoff: Option<f64>,
    pub fit_j_lo: Option<u32>,
    pub fit_j_hi: Option<u32>,
    pub train_samples: Option<usize>,
    pub eval_samples: Option<usize>,
    pub bound_samples: Option<usize>,
    pub horizon: Option<f64>,
    pub surrogate_j: Option<u32>,
    pub fourier_k: Option<usize>,
    pub contraction: Option<f64>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub t_end: Option<f64>,
    pub beta: Option<f64>,
    pub beta_cutoff: Option<f64>,
    pub modes: Option<usize>,
    pub substeps: Option<usize>,
    pub j_list: Option<Vec<u32>>,
    pub seed: Option<u64>,
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| anyhow!("config key `{key}`: cannot parse `{value}`"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Result<Vec<T>> = value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| anyhow!("config key `{key}`: cannot parse list item `{s}`"))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        bail!("config key `{key}`: empty list");
    }
    Ok(items)
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(anyhow!("config key `{key}`: expected on/off, got `{other}`")),
    }
}

impl RawParams {
    /// Apply one key/value pair; unknown keys are field-level errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_samples" => self.n_samples = Some(parse_scalar(key, value)?),
            "j_min" => self.j_min = Some(parse_scalar(key, value)?),
            "j_max" => self.j_max = Some(parse_scalar(key, value)?),
            "k_list" => self.k_list = Some(parse_list(key, value)?),
            "alpha_list" => self.alpha_list = Some(parse_list(key, value)?),
            "ibp_boundary" => self.ibp_boundary = Some(parse_switch(key, value)?),
            "svd_cutoff" => self.svd_cutoff = Some(parse_scalar(key, value)?),
            "fit_j_lo" => self.fit_j_lo = Some(parse_scalar(key, value)?),
            "fit_j_hi" => self.fit_j_hi = Some(parse_scalar(key, value)?),
            "train_samples" => self.train_samples = Some(parse_scalar(key, value)?),
            "eval_samples" => self.eval_samples = Some(parse_scalar(key, value)?),
            "bound_samples" => self.bound_samples = Some(parse_scalar(key, value)?),
            "horizon" => self.horizon = Some(parse_scalar(key, value)?),
            "surrogate_j" => self.surrogate_j = Some(parse_scalar(key, value)?),
            "fourier_k" => self.fourier_k = Some(parse_scalar(key, value)?),
            "contraction" => self.contraction = Some(parse_scalar(key, value)?),
            "nx" => self.nx = Some(parse_scalar(key, value)?),
            "nt" => self.nt = Some(parse_scalar(key, value)?),
            "t_end" => self.t_end = Some(parse_scalar(key, value)?),
            "beta" => self.beta = Some(parse_scalar(key, value)?),
            "beta_cutoff" => self.beta_cutoff = Some(parse_scalar(key, value)?),
            "modes" => self.modes = Some(parse_scalar(key, value)?),
            "substeps" => self.substeps = Some(parse_scalar(key, value)?),
            "j_list" => self.j_list = Some(parse_list(key, value)?),
            "seed" => self.seed = Some(parse_scalar(key, value)?),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Later settings win; only explicitly set fields of `over` are applied.
    pub fn merge(&mut self, over: RawParams) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if over.$field.is_some() { self.$field = over.$field; })*
            };
        }
        take!(
            n_samples, j_min, j_max, k_list, alpha_list, ibp_boundary, svd_cutoff, fit_j_lo,
            fit_j_hi, train_samples, eval_samples, bound_samples, horizon, surrogate_j,
            fourier_k, contraction, nx, nt, t_end, beta, beta_cutoff, modes, substeps, j_list,
            seed
        );
    }
}

/// Parse a config file: flat `key = value` lines with `#` comments, or a
/// run.json manifest (detected by a leading `{`).
pub fn load_config(path: &Path, experiment: &str) -> Result<RawParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.experiment != experiment {
            bail!(
                "manifest {} describes experiment `{}`, not `{experiment}`",
                path.display(),
                manifest.experiment
            );
        }
        let mut params = RawParams::default();
        for (key, value) in &manifest.params {
            params.set(key, value)?;
        }
        return Ok(params);
    }
    let mut params = RawParams::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
        params.set(key.trim(), value.trim())?;
    }
    Ok(params)
}

/// Manifest written next to every run's outputs; feeding it back as
/// `--config` reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub params: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub metadata: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(experiment: &str) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("wsk-cli".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("wsk-core".into(), env!("CARGO_PKG_VERSION").into());
        let mut metadata = BTreeMap::new();
        metadata.insert(
            "quadrature".into(),
            "composite Simpson on the sampling grid; even point counts close the final \
             interval with a 3-point Newton-Cotes tail"
                .into(),
        );
        Self {
            experiment: experiment.into(),
            params: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            versions,
            metadata,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.params.insert(key.into(), value.to_string());
    }

    pub fn param_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.params.insert(key.into(), joined);
    }

    pub fn tolerance(&mut self, key: &str, value: impl Display) {
        self.tolerances.insert(key.into(), value.to_string());
    }

    pub fn note(&mut self, key: &str, value: impl Display) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
