use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::{registry, System, SystemSpec};
use crate::realization::RealizationOptions;
use crate::sim::{Disturbance, Hold, ReferenceSpec};
use crate::synthesis::{Certificate, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Synth,
    Simulate,
    Compare,
    Validate,
    Region,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Synth => "synth",
            RunMode::Simulate => "simulate",
            RunMode::Compare => "compare",
            RunMode::Validate => "validate",
            RunMode::Region => "region",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Vccm,
    Gsc1,
    Gsc2,
    Glpv,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Vccm => "vccm",
            ControllerKind::Gsc1 => "gsc1",
            ControllerKind::Gsc2 => "gsc2",
            ControllerKind::Glpv => "glpv",
        }
    }
}

/// Where the certificate comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateSource {
    /// Built-in design of a registry system.
    Reference,
    /// Solve the grid LMIs with the `synthesis` options.
    Synthesize,
    /// Certificate JSON file, relative to the config file.
    File(PathBuf),
    Inline(Box<Certificate>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    /// Defaults to `reference` for registry systems with a built-in design, else `synthesize`.
    pub certificate: Option<CertificateSource>,
    /// Contraction rate; ignored when `alpha` is set.
    pub lambda: f64,
    /// L2-gain level; selects the robust conditions.
    pub alpha: Option<f64>,
    pub w_degree: u32,
    pub y_degree: u32,
    pub grid_points: usize,
    pub dense_multiplier: usize,
    /// Prescribed gain terms K_t (one m×n matrix per Y monomial); requires a constant W.
    pub gains: Option<Vec<Vec<Vec<f64>>>>,
    pub solver: SolveOptions,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            certificate: None,
            lambda: 0.5,
            alpha: None,
            w_degree: 0,
            y_degree: 1,
            grid_points: 41,
            dense_multiplier: 10,
            gains: None,
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub references: Vec<ReferenceSpec>,
    /// Initial states of the undisturbed runs.
    pub x0: Vec<Vec<f64>>,
    /// Each disturbance is applied in a run started on the reference.
    pub disturbances: Vec<Disturbance>,
    /// Appends the standard five-sine plus filtered-step suite.
    pub disturbance_suite: bool,
    pub t_end: f64,
    pub dt: f64,
    pub hold: Hold,
    /// Absolute fit window; defaults to [0.1T, 0.9T].
    pub fit_window: Option<[f64; 2]>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            references: vec![ReferenceSpec::Target],
            x0: Vec::new(),
            disturbances: Vec::new(),
            disturbance_suite: false,
            t_end: 10.0,
            dt: 1e-3,
            hold: Hold::Continuous,
            fit_window: None,
        }
    }
}

impl Scenario {
    pub fn all_disturbances(&self) -> Vec<Disturbance> {
        let mut d = self.disturbances.clone();
        if self.disturbance_suite {
            d.extend(Disturbance::suite());
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis.
    pub points: Vec<usize>,
    #[serde(default = "default_region_controller")]
    pub controller: ControllerKind,
    /// Family parameter values; one map per value.
    pub references: Vec<f64>,
}

fn default_region_controller() -> ControllerKind {
    ControllerKind::Gsc1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry or user-directory system name.
    #[serde(default)]
    pub system: Option<String>,
    /// Inline system description, instead of `system`.
    #[serde(default)]
    pub system_spec: Option<SystemSpec>,
    /// Directory of user system JSON files searched by `system`.
    #[serde(default)]
    pub systems_dir: Option<PathBuf>,
    /// Must agree with the command line mode when present.
    #[serde(default)]
    pub mode: Option<RunMode>,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub realization: RealizationOptions,
    /// Defaults to `vccm` for simulate and to every applicable law for compare.
    #[serde(default)]
    pub controllers: Vec<ControllerKind>,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_embedding_samples")]
    pub embedding_samples: usize,
}

fn default_embedding_samples() -> usize {
    1000
}

impl ExperimentConfig {
    /// Parses JSON, reporting schema errors with the offending path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Schema {
                path,
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = &cfg.systems_dir {
            if dir.is_relative() {
                cfg.systems_dir = Some(base.join(dir));
            }
        }
        if let Some(CertificateSource::File(f)) = &cfg.synthesis.certificate {
            if f.is_relative() {
                cfg.synthesis.certificate = Some(CertificateSource::File(base.join(f)));
            }
        }
        Ok(cfg)
    }

    pub fn resolve_system(&self) -> Result<(SystemSpec, System), CliError> {
        let spec = match (&self.system, &self.system_spec) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either `system` or `system_spec`, not both".into())),
            (None, None) => return Err(CliError::Config("missing `system` or `system_spec`".into())),
            (None, Some(s)) => s.clone(),
            (Some(name), None) => {
                let mut all = registry();
                if let Some(dir) = &self.systems_dir {
                    all.extend(load_user_systems(dir)?);
                }
                all.into_iter()
                    .find(|s| &s.name == name)
                    .ok_or_else(|| CliError::Config(format!("unknown system `{name}`")))?
            }
        };
        let sys = spec.build().map_err(|e| CliError::Config(format!("system `{}`: {e}", spec.name)))?;
        Ok((spec, sys))
    }
}

/// Every `*.json` system in `dir`, sorted by file name.
pub fn load_user_systems(dir: &Path) -> Result<Vec<SystemSpec>, CliError> {
    let read = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(f).map_err(|e| CliError::Io(format!("{}: {e}", f.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
                path: format!("{}:{}", f.display(), e.path()),
                message: e.into_inner().to_string(),
            })
        })
        .collect()
}
