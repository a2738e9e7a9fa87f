//! TOML run configuration, schema version 1.
//!
//! ```toml
//! schema_version = 1
//!
//! [model]
//! dimension = 1
//! length = 20.0
//! resolution = 256
//! alpha = { family = "gaussian", sigma = 1.0 }
//! kappa1 = { family = "gaussian", sigma = 0.5 }
//! kappa2 = { family = "gaussian", sigma = 1.0 }
//!
//! [simulate]
//! initial = { kind = "poisson", density = 0.2 }
//! t_end = 0.2
//! replicas = 256
//! seed = 7
//!
//! [hierarchy]
//! initial = { kind = "poisson", density = 0.2 }
//! t_end = 0.2
//! dt = 1e-3
//!
//! [picard]
//! t = 0.1
//! n_terms = 8
//!
//! [bounds]
//! theta0 = "auto"
//! ```

use std::path::{Path, PathBuf};

use kawasaki_core::hierarchy::{ClosureRule, CorrelationVector};
use kawasaki_core::kernels::{KernelModel, ModelSpec, RadialProfile};
use kawasaki_core::simulator::{InitialCondition, RunOptions};
use kawasaki_core::{Execution, TorusDomain};
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Spanned<u32>,
    pub model: Spanned<ModelSection>,
    pub simulate: Option<Spanned<SimulateSection>>,
    pub hierarchy: Option<Spanned<HierarchySection>>,
    pub picard: Option<Spanned<PicardSection>>,
    pub bounds: Option<Spanned<BoundsSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub dimension: usize,
    pub length: f64,
    pub resolution: usize,
    pub alpha: RadialProfile,
    pub kappa1: RadialProfile,
    pub kappa2: RadialProfile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub initial: InitialCondition,
    pub t_end: f64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    /// Repeat the run on a box of side `2L` and flag disagreeing bins.
    #[serde(default)]
    pub finite_size_check: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HierarchyInitial {
    /// `k⁽ⁿ⁾ ≡ densityⁿ`.
    Poisson { density: f64 },
    /// `k⁽¹⁾ = density`, `k⁽²⁾` given on grid separations.
    Tabulated { density: f64, pair: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySection {
    pub initial: HierarchyInitial,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "two")]
    pub max_order: usize,
    #[serde(default)]
    pub closure: ClosureRule,
    /// Scale parameters at which norms are recorded; `ϑ*` is always added.
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub t: f64,
    pub n_terms: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Ladder width as a fraction of `ϑ* − ϑ₀` for the majorant.
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Theta0 {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl Default for Theta0 {
    fn default() -> Self {
        Theta0::Keyword(AutoKeyword::Auto)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default)]
    pub theta0: Theta0,
    /// Stability constant; taken from the stability check when absent.
    pub omega: Option<f64>,
    /// Override of the model's `⟨b⟩`.
    pub mean_b: Option<f64>,
    /// Override of the model's `b̄`.
    pub sup_b: Option<f64>,
    /// Defaults to `ϑ* = ϑ₀ + 1`.
    pub theta: Option<f64>,
    /// Defaults to `ϑ − 1`.
    pub theta_pp: Option<f64>,
    #[serde(default = "default_ladder_steps")]
    pub ladder_steps: usize,
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
    #[serde(default = "default_majorant_terms")]
    pub majorant_terms: usize,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn default_bins() -> usize {
    25
}
fn default_max_events() -> u64 {
    50_000_000
}
fn default_record_every() -> usize {
    10
}
fn default_substeps() -> usize {
    200
}
fn default_delta_fraction() -> f64 {
    0.1
}
fn default_ladder_steps() -> usize {
    3
}
fn default_majorant_terms() -> usize {
    20
}

/// A parsed configuration together with its source, for diagnostics and
/// manifests.
#[derive(Debug)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub config: RunConfig,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| line_of(&text, s.start));
            CliError::config(path, line, e.message().to_string())
        })?;
        let loaded = Self {
            path: path.to_path_buf(),
            text,
            config,
        };
        let v = &loaded.config.schema_version;
        if *v.get_ref() != SCHEMA_VERSION {
            return Err(loaded.error_at(
                v.span(),
                format!(
                    "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                    v.get_ref()
                ),
            ));
        }
        Ok(loaded)
    }

    pub fn error_at(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> CliError {
        CliError::config(
            &self.path,
            Some(line_of(&self.text, span.start)),
            message.into(),
        )
    }

    fn section<'a, T>(
        &self,
        s: &'a Option<Spanned<T>>,
        name: &str,
    ) -> Result<&'a Spanned<T>, CliError> {
        s.as_ref()
            .ok_or_else(|| CliError::config(&self.path, None, format!("missing [{name}] section")))
    }

    /// Runs `f` and attaches the section's line to any error it returns.
    fn within<T, S>(
        &self,
        s: &Spanned<S>,
        f: impl FnOnce(&S) -> kawasaki_core::Result<T>,
    ) -> Result<T, CliError> {
        f(s.get_ref()).map_err(|e| match e {
            kawasaki_core::Error::BlowUp { .. }
            | kawasaki_core::Error::Divergence { .. }
            | kawasaki_core::Error::PathologicalAcceptance { .. } => CliError::Core(e),
            other => self.error_at(s.span(), other.to_string()),
        })
    }

    pub fn model(&self) -> Result<KernelModel, CliError> {
        let m = &self.config.model;
        self.within(m, |s| {
            let domain = TorusDomain::new(s.dimension, s.length, s.resolution)?;
            KernelModel::new(ModelSpec::factorized(
                domain,
                s.alpha.clone(),
                s.kappa1.clone(),
                s.kappa2.clone(),
            ))
        })
    }

    pub fn simulate(&self) -> Result<&SimulateSection, CliError> {
        let s = self.section(&self.config.simulate, "simulate")?;
        let v = s.get_ref();
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(self.error_at(s.span(), msg.to_string()))
            }
        };
        check(
            v.t_end > 0.0 && v.t_end.is_finite(),
            "simulate.t_end must be > 0",
        )?;
        check(v.replicas >= 1, "simulate.replicas must be >= 1")?;
        check(v.bins >= 1, "simulate.bins must be >= 1")?;
        check(v.max_events >= 1, "simulate.max_events must be >= 1")?;
        check(
            v.sample_times.iter().all(|t| *t >= 0.0 && *t <= v.t_end),
            "simulate.sample_times must lie in [0, t_end]",
        )?;
        Ok(v)
    }

    pub fn run_options(&self, execution: Execution) -> Result<RunOptions, CliError> {
        let s = self.simulate()?;
        let mut o = RunOptions::new(s.initial, s.t_end, s.replicas, s.seed);
        o.sample_times.clone_from(&s.sample_times);
        o.bins = s.bins;
        o.max_events = s.max_events;
        o.execution = execution;
        Ok(o)
    }

    pub fn hierarchy(&self) -> Result<&HierarchySection, CliError> {
        let s = self.section(&self.config.hierarchy, "hierarchy")?;
        let v = s.get_ref();
        if !(v.dt > 0.0 && v.dt.is_finite()) {
            return Err(self.error_at(s.span(), "hierarchy.dt must be > 0"));
        }
        if !(v.t_end >= 0.0 && v.t_end.is_finite()) {
            return Err(self.error_at(s.span(), "hierarchy.t_end must be >= 0"));
        }
        Ok(v)
    }

    pub fn initial_vector(&self, model: &KernelModel) -> Result<CorrelationVector, CliError> {
        let s = self.section(&self.config.hierarchy, "hierarchy")?;
        self.within(s, |h| match &h.initial {
            HierarchyInitial::Poisson { density } => {
                CorrelationVector::poisson(model.domain, *density, h.max_order)
            }
            HierarchyInitial::Tabulated { density, pair } => {
                if h.max_order != 2 {
                    return Err(kawasaki_core::Error::Config(
                        "a tabulated initial condition requires max_order = 2".into(),
                    ));
                }
                CorrelationVector::from_pair(model.domain, *density, pair.clone())
            }
        })
    }

    pub fn picard(&self) -> Result<&PicardSection, CliError> {
        let s = self.section(&self.config.picard, "picard")?;
        let v = s.get_ref();
        if !(v.t >= 0.0 && v.t.is_finite()) || v.substeps == 0 {
            return Err(self.error_at(s.span(), "picard needs t >= 0 and substeps >= 1"));
        }
        if !(v.delta_fraction > 0.0 && v.delta_fraction < 1.0) {
            return Err(self.error_at(s.span(), "picard.delta_fraction must lie in (0, 1)"));
        }
        Ok(v)
    }

    pub fn bounds(&self) -> Option<&BoundsSection> {
        self.config.bounds.as_ref().map(|b| b.get_ref())
    }

    pub fn bounds_error(&self, message: impl Into<String>) -> CliError {
        match &self.config.bounds {
            Some(b) => self.error_at(b.span(), message),
            None => CliError::config(&self.path, None, message.into()),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
