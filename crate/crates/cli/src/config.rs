//! Scenario files: TOML with a `schema_version` key. Lengths are in units of
//! the lens focal length f. Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use cavity_core::{
    AxisRange, CollapseEngine, FresnelOptions, FrictionProfile, FrictionTable, GridSpec, MirrorSchedule,
    ResonatorGeometry, SplittingOrder, Tracking,
};
use num_complex::Complex64;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest accepted n_max.
const MAX_ROUND_TRIPS: usize = 10_000_000;
/// Largest accepted field length.
const MAX_GRID_N: usize = 1 << 22;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub friction: FrictionConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub ray: RayConfig,
    #[serde(default)]
    pub lissajous: LissajousConfig,
    #[serde(default)]
    pub beam: BeamConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub l1_over_f: f64,
    pub l2_over_f: f64,
    #[serde(default = "default_lambda")]
    pub lambda_over_f: f64,
}

fn default_lambda() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrictionConfig {
    Constant {
        gamma: f64,
    },
    /// Two-column CSV with header `n,g`.
    Table {
        table: PathBuf,
    },
}

impl Default for FrictionConfig {
    fn default() -> Self {
        FrictionConfig::Constant { gamma: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineName {
    GaussianQ,
    Fresnel,
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingName {
    Tem00,
    Propagated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_engines")]
    pub engines: Vec<EngineName>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Field window in initial spot sizes; unset gives each engine its default grid.
    pub window_factor: Option<f64>,
    #[serde(default = "default_tracking")]
    pub tracking: TrackingName,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub splitting_order: SplittingOrder,
    /// Sampling step of the schedule table, in round trips.
    #[serde(default = "default_schedule_step")]
    pub schedule_step: f64,
}

fn default_n_max() -> usize {
    3000
}
fn default_engines() -> Vec<EngineName> {
    vec![EngineName::GaussianQ]
}
fn default_grid_n() -> usize {
    4096
}
fn default_tracking() -> TrackingName {
    TrackingName::Tem00
}
fn default_substeps() -> usize {
    cavity_core::wavesim::DEFAULT_SUBSTEPS
}
fn default_schedule_step() -> f64 {
    1.0
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_max: default_n_max(),
            engines: default_engines(),
            grid_n: default_grid_n(),
            window_factor: None,
            tracking: default_tracking(),
            substeps: default_substeps(),
            splitting_order: SplittingOrder::default(),
            schedule_step: default_schedule_step(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_range")]
    pub l1_range: [f64; 2],
    #[serde(default = "default_range")]
    pub l2_range: [f64; 2],
    #[serde(default = "default_cells")]
    pub cells: [usize; 2],
}

fn default_range() -> [f64; 2] {
    [0.0, 4.0]
}
fn default_cells() -> [usize; 2] {
    [400, 400]
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { l1_range: default_range(), l2_range: default_range(), cells: default_cells() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayConfig {
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default)]
    pub xp0: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for RayConfig {
    fn default() -> Self {
        RayConfig { x0: 1.0, xp0: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LissajousConfig {
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default)]
    pub xp0: f64,
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_yp0")]
    pub yp0: f64,
}

fn default_y0() -> f64 {
    0.7
}
fn default_yp0() -> f64 {
    0.5
}

impl Default for LissajousConfig {
    fn default() -> Self {
        LissajousConfig { x0: 1.0, xp0: 0.0, y0: default_y0(), yp0: default_yp0() }
    }
}

/// Initial field: the TEM00 mode of the initial cavity, displaced by
/// `offset_over_w` spot sizes and tilted by `tilt` radians.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    #[serde(default)]
    pub offset_over_w: f64,
    #[serde(default)]
    pub tilt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Field snapshot cadence for the grid engines; requires the binary format.
    pub snapshot_every: Option<usize>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_directory(), formats: default_formats(), snapshot_every: None }
    }
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub geometry: ResonatorGeometry,
    pub friction: FrictionProfile,
    /// Directory the output paths resolve against.
    pub base: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self, CliError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        let g = &config.geometry;
        finite("geometry.l1_over_f", g.l1_over_f)?;
        finite("geometry.l2_over_f", g.l2_over_f)?;
        let lambda = finite("geometry.lambda_over_f", g.lambda_over_f)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("geometry.lambda_over_f must lie in (0, 1), got {lambda}")));
        }
        let geometry = ResonatorGeometry::normalized(g.l1_over_f, g.l2_over_f)?;
        let friction = match &config.friction {
            FrictionConfig::Constant { gamma } => {
                finite("friction.gamma", *gamma)?;
                FrictionProfile::constant(*gamma)?
            }
            FrictionConfig::Table { table } => {
                let p = base.join(table);
                let file = std::fs::File::open(&p)
                    .map_err(|e| invalid(format!("cannot open friction table {}: {e}", p.display())))?;
                FrictionProfile::Tabulated(FrictionTable::from_csv(file)?)
            }
        };

        let run = &config.run;
        if run.n_max > MAX_ROUND_TRIPS {
            return Err(invalid(format!("run.n_max = {} exceeds {MAX_ROUND_TRIPS}", run.n_max)));
        }
        if run.engines.is_empty() {
            return Err(invalid("run.engines must name at least one engine"));
        }
        if run.grid_n < 16 || run.grid_n > MAX_GRID_N || !run.grid_n.is_power_of_two() {
            return Err(invalid(format!(
                "run.grid_n must be a power of two in [16, {MAX_GRID_N}], got {}",
                run.grid_n
            )));
        }
        if let Some(w) = run.window_factor {
            if !(finite("run.window_factor", w)? > 0.0) {
                return Err(invalid(format!("run.window_factor must be positive, got {w}")));
            }
        }
        if run.substeps == 0 {
            return Err(invalid("run.substeps must be at least 1"));
        }
        if !(finite("run.schedule_step", run.schedule_step)? > 0.0) {
            return Err(invalid("run.schedule_step must be positive"));
        }

        let st = &config.stability;
        for (name, r) in [("stability.l1_range", st.l1_range), ("stability.l2_range", st.l2_range)] {
            finite(name, r[0])?;
            finite(name, r[1])?;
        }
        for v in [config.ray.x0, config.ray.xp0] {
            finite("ray initial condition", v)?;
        }
        let l = &config.lissajous;
        for v in [l.x0, l.xp0, l.y0, l.yp0] {
            finite("lissajous initial condition", v)?;
        }
        finite("beam.offset_over_w", config.beam.offset_over_w)?;
        finite("beam.tilt", config.beam.tilt)?;
        if config.outputs.formats.is_empty() {
            return Err(invalid("outputs.formats must not be empty"));
        }
        if let Some(every) = config.outputs.snapshot_every {
            if every == 0 {
                return Err(invalid("outputs.snapshot_every must be at least 1"));
            }
            if !config.outputs.formats.contains(&Format::Binary) {
                return Err(invalid("outputs.snapshot_every needs \"binary\" in outputs.formats"));
            }
        }
        Ok(Scenario { config, geometry, friction, base })
    }

    pub fn wavelength(&self) -> f64 {
        self.config.geometry.lambda_over_f
    }

    pub fn schedule(&self) -> Result<MirrorSchedule, CliError> {
        Ok(MirrorSchedule::new(self.geometry, self.friction.clone())?)
    }

    pub fn axes(&self) -> Result<(AxisRange, AxisRange), CliError> {
        let st = &self.config.stability;
        Ok((
            AxisRange::new(st.l1_range[0], st.l1_range[1], st.cells[0])?,
            AxisRange::new(st.l2_range[0], st.l2_range[1], st.cells[1])?,
        ))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.config.outputs.formats.contains(&format)
    }

    pub fn output_dir(&self, over: Option<&Path>) -> PathBuf {
        match over {
            Some(p) => p.to_path_buf(),
            None => self.base.join(&self.config.outputs.directory),
        }
    }

    /// The configured engine with the initial TEM00 spot size `w`.
    pub fn engine(&self, name: EngineName, q0: Complex64, w: f64) -> CollapseEngine {
        let run = &self.config.run;
        let grid = match run.window_factor {
            Some(f) => GridSpec::with_window(run.grid_n, f, w),
            None => GridSpec::new(run.grid_n),
        };
        match name {
            EngineName::GaussianQ => CollapseEngine::GaussianQ {
                tracking: match run.tracking {
                    TrackingName::Tem00 => Tracking::Tem00,
                    TrackingName::Propagated => Tracking::Propagated { q0 },
                },
            },
            EngineName::Fresnel => CollapseEngine::Fresnel { grid, options: FresnelOptions::default() },
            EngineName::SplitStep => {
                CollapseEngine::SplitStep { grid, substeps: run.substeps, order: run.splitting_order }
            }
        }
    }
}
