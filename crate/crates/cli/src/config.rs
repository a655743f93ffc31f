//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use multiecho::lcurve::ParamGrid;
use multiecho::operators::MaskConfig;
use multiecho::phantom::PhantomSpec;
use multiecho::{Method, ReconParams};
use serde::{Deserialize, Serialize};

/// Echoes exported by default (1-based), where the stack has them.
pub const DEFAULT_EXPORT_ECHOES: [usize; 4] = [1, 5, 9, 13];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: String,
    pub seed: u64,
    pub sequential: bool,
    pub noise_sigma: f64,
    pub phantom: PhantomSpec,
    /// Line-sampling pattern. Image dimensions are taken from the phantom.
    pub lines_per_echo: usize,
    pub dense_fraction: f64,
    pub per_echo_distinct: bool,
    /// Reconstruction parameters; the method's defaults when absent.
    pub params: Option<ReconParams>,
    pub grid: ParamGrid,
    /// 1-based echo numbers for `export`.
    pub export_echoes: Option<Vec<usize>>,
    /// Record reconstruction wall-clock time in run records. Off by default
    /// so that reruns are byte-identical.
    pub record_timing: bool,
    /// Inputs that override the files in the output directory.
    pub truth_path: Option<PathBuf>,
    pub mask_path: Option<PathBuf>,
    pub kspace_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mask = MaskConfig::default();
        Self {
            method: Method::DlRowsparse.name().into(),
            seed: 7,
            sequential: false,
            noise_sigma: 0.01,
            phantom: PhantomSpec::default(),
            lines_per_echo: mask.lines_per_echo,
            dense_fraction: mask.dense_fraction,
            per_echo_distinct: mask.per_echo_distinct,
            params: None,
            grid: ParamGrid::default(),
            export_echoes: None,
            record_timing: false,
            truth_path: None,
            mask_path: None,
            kspace_path: None,
        }
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sequential: bool,
    pub method: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if overrides.sequential {
            cfg.sequential = true;
        }
        if let Some(m) = &overrides.method {
            cfg.method = m.clone();
        }
        Ok(cfg)
    }

    /// Every problem with the configuration, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.method.parse::<Method>() {
            out.push(e.to_string());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            out.push(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        if let Err(e) = self.phantom.check() {
            out.push(e.to_string());
        }
        let h = self.phantom.height;
        if self.lines_per_echo == 0 || self.lines_per_echo > h {
            out.push(format!(
                "lines_per_echo must be in [1, {h}], got {}",
                self.lines_per_echo
            ));
        }
        if !(0.0..=1.0).contains(&self.dense_fraction) {
            out.push(format!(
                "dense_fraction must be in [0, 1], got {}",
                self.dense_fraction
            ));
        }
        if let (Some(p), Ok(m)) = (&self.params, self.method.parse::<Method>()) {
            if m != Method::ZeroFilled {
                out.extend(
                    p.validate_for(h, self.phantom.width)
                        .into_iter()
                        .map(|v| v.to_string()),
                );
            }
        }
        if let Some(echoes) = &self.export_echoes {
            if echoes.is_empty() {
                out.push("export_echoes must not be empty".into());
            }
            for &e in echoes {
                if e == 0 || e > self.phantom.echoes {
                    out.push(format!(
                        "export echo {e} outside 1..={}",
                        self.phantom.echoes
                    ));
                }
            }
        }
        for (name, p) in [
            ("truth_path", &self.truth_path),
            ("mask_path", &self.mask_path),
            ("kspace_path", &self.kspace_path),
        ] {
            if let Some(p) = p {
                let probe = match name {
                    "truth_path" | "kspace_path" => p.with_extension("json"),
                    _ => p.clone(),
                };
                if !probe.exists() {
                    out.push(format!("{name}: {} does not exist", probe.display()));
                }
            }
        }
        out
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.violations();
        if !v.is_empty() {
            bail!("invalid configuration: {}", v.join("; "));
        }
        Ok(self)
    }

    pub fn method(&self) -> Method {
        self.method.parse().expect("validated")
    }

    pub fn mask_config(&self) -> MaskConfig {
        MaskConfig {
            height: self.phantom.height,
            width: self.phantom.width,
            echoes: self.phantom.echoes,
            lines_per_echo: self.lines_per_echo,
            dense_fraction: self.dense_fraction,
            per_echo_distinct: self.per_echo_distinct,
            seed: self.seed,
        }
    }

    /// Seed of the acquisition noise, kept apart from the mask seed.
    pub fn noise_seed(&self) -> u64 {
        self.seed.wrapping_add(1_000_003)
    }

    pub fn recon_params(&self, method: Method) -> ReconParams {
        let mut p = self
            .params
            .clone()
            .unwrap_or_else(|| method.default_params());
        p.seed = self.seed;
        p.sequential = self.sequential;
        p
    }

    /// The configured echoes, or 1, 5, 9, 13 where they exist, or all.
    pub fn export_echoes(&self, echoes: usize) -> Vec<usize> {
        if let Some(e) = &self.export_echoes {
            return e.clone();
        }
        let picked: Vec<usize> = DEFAULT_EXPORT_ECHOES
            .into_iter()
            .filter(|&e| e <= echoes)
            .collect();
        if picked.is_empty() {
            (1..=echoes).collect()
        } else {
            picked
        }
    }
}
