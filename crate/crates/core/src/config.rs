//! Experiment configuration: one JSON document naming the metrics, grids,
//! seeds, tolerances and output location of a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{FanOptions, SimplicityOptions, MAX_FAN_MU};
use crate::inversion::{DiffeoSearchOptions, LensOptions, MatchOptions, ReconstructionOptions};
use crate::metric::{DiscDiffeo, MetricModel};
use crate::survey::{BsrOptions, DirectionGrid, Encoding, SourceOptions, MIN_BOUNDARY_ANGLES};

/// Version of the configuration and report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 5] = [
    "euclidean",
    "curvature+0.5",
    "curvature-0.5",
    "bump",
    "radial-bump",
];

/// The laboratory's model zoo by name.
pub fn preset(name: &str) -> Result<MetricModel> {
    let bump = || MetricModel::conformal_bump([0.2, -0.1], 0.3, 0.4);
    match name {
        "euclidean" => Ok(MetricModel::euclidean()),
        "curvature+0.5" => MetricModel::constant_curvature(0.5),
        "curvature-0.5" => MetricModel::constant_curvature(-0.5),
        "bump" => bump(),
        "radial-bump" => bump()?.pullback(DiscDiffeo::RadialBump { epsilon: 0.2 }),
        other => Err(Error::Config(format!(
            "unknown metric preset `{other}`; expected one of {}",
            PRESETS.join(", ")
        ))),
    }
}

/// All zoo metrics with their preset names.
pub fn zoo() -> Vec<(&'static str, MetricModel)> {
    PRESETS
        .iter()
        .map(|&n| (n, preset(n).expect("presets are valid")))
        .collect()
}

/// A metric given either by preset name or in full.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Preset(String),
    Model(MetricModel),
}

impl MetricSpec {
    pub fn resolve(&self) -> Result<MetricModel> {
        match self {
            MetricSpec::Preset(name) => preset(name),
            MetricSpec::Model(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

/// Which data the matching pipeline runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Ttd,
    Ttdd,
    Bsr,
}

/// Pass levels of the criteria checked by the reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|sup-norm distance − forward distance|` at the finest sweep grid.
    pub isometry: f64,
    /// Hausdorff distance between data of a metric and of a boundary-fixing
    /// pullback.
    pub gauge: f64,
    /// Slack in `½ distortion ≤ Hausdorff distance + slack`.
    pub stability: f64,
    /// Exit times against the tracer.
    pub exit_time: f64,
    /// Fraction of grid vectors whose scattering partner must resolve.
    pub lens_resolved: f64,
    /// Reconstructed travel time data against forward data.
    pub reconstruction: f64,
    /// Largest fraction of receivers allowed in coverage gaps.
    pub coverage_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            isometry: 1e-2,
            gauge: 2e-4,
            stability: 1e-3,
            exit_time: 1e-5,
            lens_resolved: 0.95,
            reconstruction: 3e-2,
            coverage_gap: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub metric: MetricSpec,
    /// The metric compared against `metric`. When absent the pipelines use
    /// a reshuffled copy of the data of `metric`.
    pub second_metric: Option<MetricSpec>,
    pub pipeline: Pipeline,
    /// Number of boundary angles `m`.
    pub boundary_angles: usize,
    pub sources: usize,
    pub source_options: SourceOptions,
    pub source_seed: u64,
    /// Seed of the shuffle that hides the source order.
    pub shuffle_seed: u64,
    pub direction_grid: DirectionGrid,
    pub fan: FanOptions,
    pub bsr: BsrOptions,
    pub lens: LensOptions,
    pub reconstruction: ReconstructionOptions,
    pub matching: MatchOptions,
    pub diffeo: DiffeoSearchOptions,
    pub simplicity: SimplicityOptions,
    /// Boundary grid sizes visited by `sweep`, coarsest first.
    pub sweep_grids: Vec<usize>,
    /// Random source pairs measured by `sweep`.
    pub sweep_pairs: usize,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub encoding: Encoding,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            metric: MetricSpec::Preset("euclidean".into()),
            second_metric: None,
            pipeline: Pipeline::Ttd,
            boundary_angles: 256,
            sources: 200,
            source_options: SourceOptions::default(),
            source_seed: 1,
            shuffle_seed: 1,
            direction_grid: DirectionGrid {
                m_theta: 64,
                m_mu: 31,
                mu_max: 0.99,
            },
            fan: FanOptions::default(),
            bsr: BsrOptions::default(),
            lens: LensOptions::default(),
            reconstruction: ReconstructionOptions::default(),
            matching: MatchOptions::default(),
            diffeo: DiffeoSearchOptions::default(),
            simplicity: SimplicityOptions::default(),
            sweep_grids: vec![64, 128, 256, 512],
            sweep_pairs: 500,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("ttlab-out"),
            encoding: Encoding::Binary,
        }
    }
}

fn field(name: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {message}"))
}

/// `field` for an error raised while checking a nested value.
fn nested(name: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => field(name, msg),
        other => field(name, other),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field, naming the first one that is out of range.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.metric.resolve().map_err(|e| nested("metric", e))?;
        if let Some(s) = &self.second_metric {
            s.resolve().map_err(|e| nested("second_metric", e))?;
        }
        if self.boundary_angles < MIN_BOUNDARY_ANGLES {
            return Err(field(
                "boundary_angles",
                format!(
                    "must be at least {MIN_BOUNDARY_ANGLES}, got {}",
                    self.boundary_angles
                ),
            ));
        }
        if self.sources + self.source_options.boundary == 0 {
            return Err(field("sources", "at least one source is needed"));
        }
        if !(0.0..1.0).contains(&self.source_options.margin) {
            return Err(field("source_options.margin", "must lie in [0, 1)"));
        }
        self.direction_grid
            .validate()
            .map_err(|e| nested("direction_grid", e))?;
        positive("fan.step", self.fan.step)?;
        positive("fan.max_secant_defect", self.fan.max_secant_defect)?;
        positive("bsr.step", self.bsr.step)?;
        positive("bsr.tol", self.bsr.tol)?;
        if !(self.lens.threshold >= 0.0 && self.lens.threshold < 1.0) {
            return Err(field("lens.threshold", "must lie in [0, 1)"));
        }
        if self.reconstruction.s_divisions < 2 {
            return Err(field("reconstruction.s_divisions", "must be at least 2"));
        }
        positive("reconstruction.gap_cells", self.reconstruction.gap_cells)?;
        positive("matching.boundary_tol", self.matching.boundary_tol)?;
        positive("matching.distortion_flag", self.matching.distortion_flag)?;
        if self.diffeo.starts == 0 {
            return Err(field("diffeo.starts", "must be at least 1"));
        }
        if self.simplicity.n_dirs < 2 {
            return Err(field("simplicity.n_dirs", "must be at least 2"));
        }
        if self.sweep_grids.is_empty() || self.sweep_grids.iter().any(|&m| m < MIN_BOUNDARY_ANGLES)
        {
            return Err(field(
                "sweep_grids",
                format!("needs grid sizes of at least {MIN_BOUNDARY_ANGLES}"),
            ));
        }
        if self.sweep_grids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("sweep_grids", "must increase strictly"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.isometry", t.isometry),
            ("tolerances.gauge", t.gauge),
            ("tolerances.stability", t.stability),
            ("tolerances.exit_time", t.exit_time),
            ("tolerances.lens_resolved", t.lens_resolved),
            ("tolerances.reconstruction", t.reconstruction),
            ("tolerances.coverage_gap", t.coverage_gap),
        ] {
            positive(name, v)?;
        }
        if self.direction_grid.mu_max > MAX_FAN_MU {
            return Err(field(
                "direction_grid.mu_max",
                format!("must not exceed {MAX_FAN_MU}"),
            ));
        }
        Ok(())
    }

    pub fn metric_model(&self) -> Result<MetricModel> {
        self.metric.resolve()
    }

    pub fn second_model(&self) -> Result<Option<MetricModel>> {
        self.second_metric
            .as_ref()
            .map(MetricSpec::resolve)
            .transpose()
    }

    /// Canonical JSON of the configuration, the input of the report hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configurations serialise")
    }
}
