//! TOML run configuration.
//!
//! ```toml
//! mesh = "pelvis.stl"          # relative to this file
//! mode = "arc"                 # arc | straight | compare
//!
//! [seeds]
//! entry = [-100.0, 36.0, 0.0]
//! middle = [0.0, 60.0, 0.0]
//! exit = [100.0, 36.0, 0.0]
//!
//! [frame]
//! origin = [0.0, 0.0, 0.0]
//! normal = [1.0, 0.0, 0.0]
//!
//! [lattice.entry]
//! rows = 10
//! cols = 10
//! spacing = 2.0
//!
//! [planner]
//! voxel_pitch = 1.0
//! min_csv = 1
//!
//! [output]
//! report = "report.json"
//! polyline = "channel.ply"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use iafc_core::{AnatomicalFrame, LatticeParams, Mode, PlanConfig, Point3, SeedSpec, Vector3};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Arc,
    Straight,
    Compare,
}

impl RunMode {
    pub fn single(self) -> Option<Mode> {
        match self {
            RunMode::Arc => Some(Mode::Arc),
            RunMode::Straight => Some(Mode::Straight),
            RunMode::Compare => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub entry: [f64; 3],
    pub middle: [f64; 3],
    pub exit: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub origin: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lattices {
    pub entry: LatticeParams,
    pub middle: LatticeParams,
    pub exit: LatticeParams,
}

impl Default for Lattices {
    fn default() -> Self {
        Self {
            entry: LatticeParams::surface_default(),
            middle: LatticeParams::middle_default(),
            exit: LatticeParams::surface_default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub polyline: Option<PathBuf>,
    pub tube: Option<PathBuf>,
    pub tube_radius: Option<f64>,
    pub candidates: Option<PathBuf>,
    pub field_dump: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: PathBuf,
    pub mode: Option<RunMode>,
    pub seeds: Seeds,
    pub frame: Frame,
    #[serde(default)]
    pub lattice: Lattices,
    #[serde(default)]
    pub planner: PlanConfig,
    #[serde(default)]
    pub output: Outputs,
}

fn point(p: [f64; 3]) -> Point3<f64> {
    Point3::new(p[0], p[1], p[2])
}

impl RunConfig {
    /// Parses `path` and resolves every relative path in it against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.mesh);
        let o = &mut config.output;
        for p in [&mut o.report, &mut o.polyline, &mut o.tube, &mut o.candidates, &mut o.field_dump]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(config)
    }

    pub fn seed_spec(&self) -> Result<SeedSpec> {
        let frame = AnatomicalFrame::new(point(self.frame.origin), Vector3::from(self.frame.normal))?;
        let spec = SeedSpec {
            entry_seed: point(self.seeds.entry),
            middle_seed: point(self.seeds.middle),
            exit_seed: point(self.seeds.exit),
            frame,
            entry_lattice: self.lattice.entry,
            middle_lattice: self.lattice.middle,
            exit_lattice: self.lattice.exit,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every numeric setting up front so a bad value fails before the mesh is read.
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.seed_spec()?;
        if let Some(r) = self.output.tube_radius {
            if !(r.is_finite() && r > 0.0) {
                bail!("output.tube_radius must be positive, got {r}");
            }
        }
        Ok(())
    }
}
