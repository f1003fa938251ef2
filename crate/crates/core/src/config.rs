//! Experiment configuration: one JSON document with a versioned schema.
//! Every science parameter lives here; the CLI only picks the subcommand.

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};

use crate::greens::SourceSpec;
use crate::potential::{LayerProfile, LayerSpec, RadialTable, SparsePotential, THICKNESS};
use crate::propagate::PropagateOptions;
use crate::radial::{EigenSchedule, PruferConstant};
use crate::spectral::{EntropyOptions, DEFAULT_D_CONFIG};

pub const SCHEMA_VERSION: u32 = 1;

/// Parse or validation failure, with the 1-based line it points at when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub k_grid: KGrid,
    /// Degree `L` of the sphere grid.
    #[serde(default = "default_degree")]
    pub grid_degree: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub validate: ValidateParams,
    #[serde(default)]
    pub propagate: PropagateOptions,
    #[serde(default)]
    pub parametrix: ParametrixParams,
    #[serde(default)]
    pub entropy: EntropyParams,
    #[serde(default)]
    pub eigcheck: EigcheckParams,
    #[serde(default)]
    pub seqbounds: SeqboundsParams,
}

fn default_degree() -> usize {
    16
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub layers: Vec<LayerConfig>,
}

/// A unit shell given either by a constant `value` or a full `profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub inner_radius: f64,
    /// Accepted only when equal to 1.
    #[serde(default = "unit", deserialize_with = "unit_thickness")]
    pub thickness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<LayerProfile>,
}

fn unit() -> f64 {
    THICKNESS
}

fn unit_thickness<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let t = f64::deserialize(d)?;
    if t != THICKNESS {
        return Err(serde::de::Error::custom(format!("layer thickness is fixed at 1, got {t}")));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// `(r, value)` pairs supported in the unit ball.
    pub profile: RadialTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<(usize, i64)>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { profile: RadialTable::constant(0.0, 1.0, 1.0), modulation: None }
    }
}

/// `k = τ + iε` over the product of both lists, `τ` outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGrid {
    pub tau: Vec<f64>,
    pub eps: Vec<f64>,
}

impl Default for KGrid {
    fn default() -> Self {
        Self { tau: vec![1.0], eps: vec![0.3] }
    }
}

impl KGrid {
    pub fn points(&self) -> Vec<Complex64> {
        self.tau.iter().flat_map(|&t| self.eps.iter().map(move |&e| Complex64::new(t, e))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateParams {
    pub alpha: f64,
    /// `ln R_n`; the potential's radii are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_radii: Option<Vec<f64>>,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self { alpha: 2.0, log_radii: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixParams {
    pub m_max: usize,
    pub t_values: Vec<f64>,
}

impl Default for ParametrixParams {
    fn default() -> Self {
        Self { m_max: 8, t_values: vec![1e2, 1e3, 1e4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyParams {
    /// Base interval `[a, b]`.
    pub a: f64,
    pub b: f64,
    /// Base angles are `π/γ₁`.
    pub gamma1: f64,
    pub d_config: f64,
    /// Probe height as a fraction of the apex height; searched when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_fraction: Option<f64>,
    pub probe_samples: usize,
    pub n_max: usize,
    #[serde(default)]
    pub options: EntropyOptions,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 2.0,
            gamma1: 10.0,
            d_config: DEFAULT_D_CONFIG,
            probe_fraction: None,
            probe_samples: 16,
            n_max: 3,
            options: EntropyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigcheckParams {
    pub energies: Vec<f64>,
    /// Decay constant of the a priori lower bound; unspecified, default 1.
    pub gammas: Vec<f64>,
    pub schedule: EigenSchedule,
    pub constant: PruferConstant,
}

impl Default for EigcheckParams {
    fn default() -> Self {
        Self {
            energies: vec![0.5, 1.0, 4.0],
            gammas: vec![1.0],
            schedule: EigenSchedule { log_r0: 120.0, beta: 1.4, factor: 2.0, count: 5 },
            constant: PruferConstant::Sharp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqboundsParams {
    pub trials: usize,
    pub seed: u64,
    /// `(j, ε)` pairs for the polynomial–exponential maximum.
    pub poly_exp: Vec<(f64, f64)>,
}

impl Default for SeqboundsParams {
    fn default() -> Self {
        Self { trials: 10_000, seed: 0, poly_exp: vec![(1.0, 1.0)] }
    }
}

/// First line mentioning `"key"`, for pointing validation errors at the text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| ConfigError { line: Some(e.line()), message: e.to_string() })?;
        cfg.check().map_err(|(key, message)| ConfigError { line: line_of(text, key), message })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks serde cannot express; returns the offending key.
    fn check(&self) -> Result<(), (&'static str, String)> {
        fn need(ok: bool, key: &'static str, msg: impl Into<String>) -> Result<(), (&'static str, String)> {
            if ok {
                Ok(())
            } else {
                Err((key, msg.into()))
            }
        }
        need(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
        )?;
        for l in &self.potential.layers {
            need(
                l.value.is_some() != l.profile.is_some(),
                "inner_radius",
                "each layer needs exactly one of `value` and `profile`",
            )?;
        }
        need(!self.k_grid.tau.is_empty() && !self.k_grid.eps.is_empty(), "k_grid", "k_grid lists must be nonempty")?;
        need(self.k_grid.tau.iter().all(|t| t.is_finite()), "tau", "tau values must be finite")?;
        need(self.k_grid.eps.iter().all(|&e| e >= 0.0 && e.is_finite()), "eps", "eps values must be finite and nonnegative")?;
        need((4..=256).contains(&self.grid_degree), "grid_degree", "grid_degree must lie in [4, 256]")?;
        need(self.validate.alpha > 1.0, "alpha", "validate.alpha must exceed 1")?;
        let p = &self.propagate;
        need(p.born_order >= 1, "born_order", "born_order must be at least 1")?;
        need(p.envelope_constant > 0.0, "envelope_constant", "envelope_constant must be positive")?;
        need(p.eta_constant > 0.0, "eta_constant", "eta_constant must be positive")?;
        need(p.eta_power > 0.0, "eta_power", "eta_power must be positive")?;
        let t = &self.parametrix;
        need(t.t_values.iter().all(|&x| x > 0.0), "t_values", "t_values must be positive")?;
        let e = &self.entropy;
        need(e.a < e.b, "b", "entropy base needs a < b")?;
        need(e.gamma1 > e.d_config, "gamma1", "gamma1 must exceed d_config")?;
        need(e.options.spacing > 0.0, "spacing", "spacing must be positive")?;
        need(e.options.per_cell >= 1, "per_cell", "per_cell must be at least 1")?;
        need(e.options.probe_threshold > 0.0, "probe_threshold", "probe_threshold must be positive")?;
        need(e.probe_samples >= 2, "probe_samples", "probe_samples must be at least 2")?;
        need(e.probe_fraction.map_or(true, |f| f > 0.0 && f < 1.0), "probe_fraction", "probe_fraction must lie in (0, 1)")?;
        let g = &self.eigcheck;
        need(!g.energies.is_empty() && g.energies.iter().all(|&x| x > 0.0), "energies", "energies must be positive")?;
        need(!g.gammas.is_empty() && g.gammas.iter().all(|&x| x > 0.0), "gammas", "gammas must be positive")?;
        need(g.schedule.count >= 1, "count", "schedule count must be at least 1")?;
        let s = &self.seqbounds;
        need(s.trials >= 1, "trials", "trials must be at least 1")?;
        need(s.poly_exp.iter().all(|&(j, e)| j > 0.0 && e > 0.0), "poly_exp", "poly_exp pairs must be positive")?;
        Ok(())
    }

    /// Layers in config order; indices follow their position.
    pub fn build_potential(&self) -> crate::error::Result<SparsePotential> {
        let layers = self
            .potential
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| match (&l.value, &l.profile) {
                (Some(v), _) => LayerSpec::constant_shell(i, l.inner_radius, *v),
                (None, Some(p)) => LayerSpec::new(i, l.inner_radius, p.clone()),
                (None, None) => unreachable!("checked at parse time"),
            })
            .collect::<crate::error::Result<Vec<_>>>()?;
        if layers.is_empty() {
            Ok(SparsePotential::empty())
        } else {
            SparsePotential::new(layers)
        }
    }

    pub fn build_source(&self) -> crate::error::Result<SourceSpec> {
        SourceSpec::new(self.source.profile.clone(), self.source.modulation)
    }
}
