//! Run configuration (JSON, versioned schema).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cloudhodge::geometry::GeometryOptions;
use cloudhodge::hodge::{EigenOptions, HodgeOptions};
use cloudhodge::io::{CloudFormat, TensorDumpOptions};
use cloudhodge::kernel::KernelSpec;
use cloudhodge::zoo::ManifoldSpec;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<CloudFormat>,
    /// Required for CSV input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic_dim: Option<usize>,
}

/// Homology cycles: a chain file, or the zoo generators of one degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CycleSource {
    File(PathBuf),
    Oracle { degree: usize, refinement: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    /// Orientation of the zoo manifold the cloud was generated from.
    #[default]
    Oracle,
    /// Propagated across the neighbour graph from sample 0.
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepQuantity {
    /// sup over samples of ‖P̂ − P‖_op.
    Tangent,
    /// mean |R̂(ê1,ê2,ê1,ê2) − K| for surfaces of constant curvature K.
    Curvature,
    /// sup over samples of ‖Ŵ − End_H(B)‖_op for 1-forms.
    Weitzenboeck,
    /// sup over held-out points of the kernel density deviation.
    Density,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ms: Vec<usize>,
    /// Absent: t from the kernel section (scaling rule or fixed t) at each m.
    /// One value per m, or several values with a single m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Vec<f64>>,
    pub quantity: SweepQuantity,
    /// Window for the fitted log-log slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_slope: Option<(f64, f64)>,
}

impl SweepConfig {
    /// (m, t) pairs; `None` means "resolve t from the kernel section".
    pub fn grid(&self) -> Result<Vec<(usize, Option<f64>)>> {
        if self.ms.is_empty() {
            bail!("sweep grid is empty");
        }
        Ok(match &self.ts {
            None => self.ms.iter().map(|&m| (m, None)).collect(),
            Some(ts) if ts.is_empty() => bail!("sweep grid is empty"),
            Some(ts) if self.ms.len() == 1 => ts.iter().map(|&t| (self.ms[0], Some(t))).collect(),
            Some(ts) if ts.len() == self.ms.len() => self.ms.iter().zip(ts).map(|(&m, &t)| (m, Some(t))).collect(),
            Some(ts) => bail!("sweep has {} sample sizes but {} bandwidths", self.ms.len(), ts.len()),
        })
    }
}

fn default_m() -> usize {
    2000
}
fn default_degrees() -> Vec<usize> {
    vec![0]
}
fn default_count() -> usize {
    10
}
fn default_quad() -> usize {
    cloudhodge::cohomology::DEFAULT_QUAD_ORDER
}
fn default_out() -> PathBuf {
    PathBuf::from("cloudhodge-out")
}
fn default_holdout() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    /// Sample count for generated clouds.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub geometry: GeometryOptions,
    #[serde(default)]
    pub hodge: HodgeOptions,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_count")]
    pub eigen_count: usize,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub cycles: Vec<CycleSource>,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    #[serde(default)]
    pub orientation: OrientationMode,
    /// Held-out evaluation points for Nyström and density diagnostics.
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Per-sample tensor dump written by the curvature verb.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensors: Option<TensorDumpOptions>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            manifold: None,
            input: None,
            m: default_m(),
            seed: 0,
            kernel: KernelSpec::default(),
            geometry: GeometryOptions::default(),
            hodge: HodgeOptions::default(),
            degrees: default_degrees(),
            eigen_count: default_count(),
            eigen: EigenOptions::default(),
            cycles: Vec::new(),
            quad_order: default_quad(),
            orientation: OrientationMode::default(),
            holdout: default_holdout(),
            sweep: None,
            tensors: None,
            out: default_out(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn with_manifold(spec: ManifoldSpec, m: usize) -> Self {
        Self {
            manifold: Some(spec),
            m,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("config schema violation")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "config schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        match (&self.manifold, &self.input) {
            (Some(_), Some(_)) => bail!("give either a manifold or an input file, not both"),
            (None, None) => bail!("config needs a manifold or an input file"),
            (Some(spec), None) => {
                spec.validate().context("manifold section")?;
                if self.m == 0 {
                    bail!("m must be positive");
                }
            }
            (None, Some(_)) => {}
        }
        if let Some(sweep) = &self.sweep {
            sweep.grid()?;
        }
        if self.degrees.is_empty() {
            bail!("degrees list is empty");
        }
        if self.eigen_count == 0 {
            bail!("eigen_count must be positive");
        }
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        Ok(())
    }
}
