//! End-to-end planning: voxelize, erode, seed, enumerate, score and select, in arc or
//! straight mode, plus the arc-versus-straight comparison.

use std::time::Instant;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arc::Channel;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::scoring::{score_channel, ChannelScore, ScoreSummary};
use crate::seeding::{build_lattices, SeedLattices, SeedSpec};
use crate::selection::{
    arc_candidate, enumerate_arcs, enumerate_straights, straight_candidate, CandidateIndex, CandidateRef,
    ScoredCandidate, Selector, StageCounts,
};
use crate::voxel::{build_distance_field, voxelize, Connectivity, VoxelDistanceField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Arc,
    Straight,
}

/// Optional hardware limits on the channel radius (mm). Straight channels have infinite
/// radius and therefore fail any finite maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadiusLimits {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl RadiusLimits {
    pub fn admits(&self, radius: f64) -> bool {
        self.min.is_none_or(|m| radius >= m) && self.max.is_none_or(|m| radius <= m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Voxel edge length, mm.
    pub voxel_pitch: f64,
    /// Arc-length interval between scored samples, mm.
    pub step: f64,
    pub connectivity: Connectivity,
    /// Channels whose CSV is below this are not eligible.
    pub min_csv: i32,
    /// Depth (mm) that projected entry/exit points are pushed into the bone.
    pub surface_inset: f64,
    pub radius_limits: Option<RadiusLimits>,
    /// Worker threads for enumeration and scoring; `None` uses all cores.
    pub workers: Option<usize>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            voxel_pitch: 1.0,
            step: 1.0,
            connectivity: Connectivity::Six,
            min_csv: 1,
            surface_inset: 3.0,
            radius_limits: None,
            workers: None,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("voxel_pitch", self.voxel_pitch)?;
        positive("step", self.step)?;
        if !(self.surface_inset.is_finite() && self.surface_inset >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "surface_inset must be ≥ 0, got {}",
                self.surface_inset
            )));
        }
        if self.min_csv < 0 {
            return Err(Error::InvalidParameter(format!("min_csv must be ≥ 0, got {}", self.min_csv)));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be ≥ 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of every setting that can change a result, together with the seeds.
    fn hash_with(&self, seeds: &SeedSpec) -> String {
        let relevant = serde_json::json!({
            "voxel_pitch": self.voxel_pitch,
            "step": self.step,
            "connectivity": self.connectivity,
            "min_csv": self.min_csv,
            "surface_inset": self.surface_inset,
            "radius_limits": self.radius_limits,
            "seeds": seeds,
        });
        hex::encode(Sha256::digest(relevant.to_string().as_bytes()))
    }
}

/// Lattice and set indices of the points that define a selected channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub entry_index: usize,
    pub middle_index: Option<usize>,
    pub exit_index: usize,
    /// (row, col) in the entry lattice.
    pub entry_lattice: [usize; 2],
    pub middle_lattice: Option<[usize; 2]>,
    pub exit_lattice: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedChannel {
    pub channel: Channel,
    pub seeds: SeedProvenance,
    pub score: ChannelScore,
    /// The scored samples, mm.
    pub polyline: Vec<Point3<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanOutcome {
    Selected(Box<SelectedChannel>),
    Infeasible { reason: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCounts {
    pub entry: usize,
    pub middle: usize,
    pub exit: usize,
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub voxelize_ms: f64,
    pub erode_ms: f64,
    pub seeding_ms: f64,
    pub enumerate_score_ms: f64,
    pub select_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mesh_hash: String,
    pub config_hash: String,
    pub voxel_pitch: f64,
    pub step: f64,
    pub connectivity: Connectivity,
    pub min_csv: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub mode: Mode,
    pub outcome: PlanOutcome,
    pub length_mm: Option<f64>,
    pub curvature_per_mm: Option<f64>,
    pub csv: Option<i32>,
    pub vdva: Option<Vec<i32>>,
    pub stage_counts: StageCounts,
    pub seed_counts: SeedCounts,
    pub timing: Option<Timing>,
    pub provenance: Provenance,
}

impl PlanReport {
    pub fn selected(&self) -> Option<&SelectedChannel> {
        match &self.outcome {
            PlanOutcome::Selected(s) => Some(s),
            PlanOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.selected().is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub arc: PlanReport,
    pub straight: PlanReport,
    /// arc.csv − straight.csv, when both modes found a channel.
    pub csv_delta: Option<i32>,
    pub arc_feasible: bool,
    pub straight_feasible: bool,
}

/// One line of the candidate dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub entry_idx: usize,
    pub mid_idx: Option<usize>,
    pub exit_idx: usize,
    pub length_mm: f64,
    pub curvature_per_mm: f64,
    pub csv: i32,
    pub min_count: Option<usize>,
    pub mean: Option<f64>,
    pub feasible: bool,
}

/// A mesh with its distance field built once, ready to plan any number of seed specs
/// in either mode.
pub struct Planner<'m> {
    mesh: &'m TriangleMesh,
    config: PlanConfig,
    field: VoxelDistanceField,
    pool: rayon::ThreadPool,
    voxelize_ms: f64,
    erode_ms: f64,
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl<'m> Planner<'m> {
    pub fn new(mesh: &'m TriangleMesh, config: PlanConfig) -> Result<Self> {
        config.validate()?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.workers {
            pool = pool.num_threads(n);
        }
        let pool = pool
            .build()
            .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
        let t = Instant::now();
        let grid = pool.install(|| voxelize(mesh, config.voxel_pitch))?;
        let voxelize_ms = elapsed_ms(t);
        let t = Instant::now();
        let field = pool.install(|| build_distance_field(&grid, config.connectivity))?;
        let erode_ms = elapsed_ms(t);
        Ok(Self {
            mesh,
            config,
            field,
            pool,
            voxelize_ms,
            erode_ms,
        })
    }

    pub fn field(&self) -> &VoxelDistanceField {
        &self.field
    }

    pub fn config(&self) -> &PlanConfig {
        &self.config
    }

    pub fn lattices(&self, seeds: &SeedSpec) -> Result<SeedLattices> {
        build_lattices(seeds, self.mesh, self.field.grid(), self.config.surface_inset)
    }

    fn push(&self, selector: &mut Selector, candidate: CandidateRef) {
        if let Some(limits) = &self.config.radius_limits {
            if !limits.admits(candidate.channel.radius()) {
                selector.record_radius_rejection();
                return;
            }
        }
        let summary = ScoreSummary::of_channel(&candidate.channel, &self.field, self.config.step);
        selector.push(ScoredCandidate { candidate, summary });
    }

    /// Scores every candidate of `mode` on the worker pool and returns the merged selector.
    pub fn select(&self, lattices: &SeedLattices, mode: Mode) -> Result<Selector> {
        let min_csv = self.config.min_csv;
        // Only for the empty-set check.
        match mode {
            Mode::Arc => {
                enumerate_arcs(lattices)?;
            }
            Mode::Straight => {
                enumerate_straights(lattices)?;
            }
        }
        let (nm, nx) = (lattices.middle.len(), lattices.exit.len());
        Ok(self.pool.install(|| {
            (0..lattices.entry.len())
                .into_par_iter()
                .map(|e| {
                    let mut sel = Selector::new(min_csv);
                    match mode {
                        Mode::Arc => {
                            for m in 0..nm {
                                for x in 0..nx {
                                    match arc_candidate(lattices, e, m, x) {
                                        Some(c) => self.push(&mut sel, c),
                                        None => sel.record_skipped(1),
                                    }
                                }
                            }
                        }
                        Mode::Straight => {
                            for x in 0..nx {
                                match straight_candidate(lattices, e, x) {
                                    Some(c) => self.push(&mut sel, c),
                                    None => sel.record_skipped(1),
                                }
                            }
                        }
                    }
                    sel
                })
                .reduce(|| Selector::new(min_csv), Selector::merge)
        }))
    }

    pub fn plan(&self, seeds: &SeedSpec, mode: Mode) -> Result<PlanReport> {
        let t = Instant::now();
        let lattices = self.lattices(seeds)?;
        let seeding_ms = elapsed_ms(t);
        self.plan_with_lattices(seeds, &lattices, mode, seeding_ms)
    }

    fn plan_with_lattices(&self, seeds: &SeedSpec, lattices: &SeedLattices, mode: Mode, seeding_ms: f64) -> Result<PlanReport> {
        let t = Instant::now();
        let selector = self.select(lattices, mode)?;
        let enumerate_score_ms = elapsed_ms(t);

        let t = Instant::now();
        let (best, stage_counts) = selector.into_parts();
        let outcome = match best {
            Some(best) => {
                let channel = best.candidate.channel;
                let polyline: Vec<Point3<f64>> = channel.samples(self.config.step).collect();
                let score = score_channel(&channel, &self.field, self.config.step);
                if score.summary() != best.summary {
                    return Err(Error::Internal("rescoring the selected channel changed its score".into()));
                }
                PlanOutcome::Selected(Box::new(SelectedChannel {
                    seeds: provenance_of(lattices, &best.candidate.index),
                    channel,
                    score,
                    polyline,
                }))
            }
            None => PlanOutcome::Infeasible {
                reason: Error::NoViableChannel.to_string(),
            },
        };
        let select_ms = elapsed_ms(t);

        let (length_mm, curvature_per_mm, csv, vdva) = match &outcome {
            PlanOutcome::Selected(s) => (
                Some(s.channel.length()),
                Some(s.channel.curvature()),
                Some(s.score.csv),
                Some(s.score.vdva.clone()),
            ),
            PlanOutcome::Infeasible { .. } => (None, None, None, None),
        };
        Ok(PlanReport {
            mode,
            outcome,
            length_mm,
            curvature_per_mm,
            csv,
            vdva,
            stage_counts,
            seed_counts: SeedCounts {
                entry: lattices.entry.len(),
                middle: lattices.middle.len(),
                exit: lattices.exit.len(),
            },
            timing: Some(Timing {
                voxelize_ms: self.voxelize_ms,
                erode_ms: self.erode_ms,
                seeding_ms,
                enumerate_score_ms,
                select_ms,
            }),
            provenance: Provenance {
                mesh_hash: self.mesh.content_hash(),
                config_hash: self.config.hash_with(seeds),
                voxel_pitch: self.config.voxel_pitch,
                step: self.config.step,
                connectivity: self.config.connectivity,
                min_csv: self.config.min_csv,
            },
        })
    }

    /// Plans both modes over the same field and seed sets.
    pub fn compare(&self, seeds: &SeedSpec) -> Result<ComparisonReport> {
        let t = Instant::now();
        let lattices = self.lattices(seeds)?;
        let seeding_ms = elapsed_ms(t);
        let arc = self.plan_with_lattices(seeds, &lattices, Mode::Arc, seeding_ms)?;
        let straight = self.plan_with_lattices(seeds, &lattices, Mode::Straight, seeding_ms)?;
        let csv_delta = match (arc.csv, straight.csv) {
            (Some(a), Some(s)) => Some(a - s),
            _ => None,
        };
        Ok(ComparisonReport {
            arc_feasible: arc.is_feasible(),
            straight_feasible: straight.is_feasible(),
            arc,
            straight,
            csv_delta,
        })
    }

    /// Every candidate of `mode` with its score, in enumeration order. Intended for small
    /// lattices; the whole table is held in memory.
    pub fn candidate_table(&self, seeds: &SeedSpec, mode: Mode) -> Result<Vec<CandidateRow>> {
        let lattices = self.lattices(seeds)?;
        let candidates: Vec<CandidateRef> = match mode {
            Mode::Arc => enumerate_arcs(&lattices)?.collect(),
            Mode::Straight => enumerate_straights(&lattices)?.collect(),
        };
        Ok(self.pool.install(|| {
            candidates
                .par_iter()
                .map(|c| {
                    let s = ScoreSummary::of_channel(&c.channel, &self.field, self.config.step);
                    CandidateRow {
                        entry_idx: c.index.entry,
                        mid_idx: c.index.middle,
                        exit_idx: c.index.exit,
                        length_mm: c.channel.length(),
                        curvature_per_mm: c.channel.curvature(),
                        csv: s.csv,
                        min_count: s.feasible().then_some(s.min_count),
                        mean: s.mean(),
                        feasible: s.feasible(),
                    }
                })
                .collect()
        }))
    }
}

fn provenance_of(lattices: &SeedLattices, index: &CandidateIndex) -> SeedProvenance {
    let rc = |p: &crate::seeding::SeedPoint| [p.row, p.col];
    SeedProvenance {
        entry_index: index.entry,
        middle_index: index.middle,
        exit_index: index.exit,
        entry_lattice: rc(&lattices.entry[index.entry]),
        middle_lattice: index.middle.map(|m| rc(&lattices.middle[m])),
        exit_lattice: rc(&lattices.exit[index.exit]),
    }
}

/// Builds the field for `mesh` and plans one mode.
pub fn plan(mesh: &TriangleMesh, seeds: &SeedSpec, config: &PlanConfig, mode: Mode) -> Result<PlanReport> {
    Planner::new(mesh, config.clone())?.plan(seeds, mode)
}

/// Builds the field once and plans both modes.
pub fn compare(mesh: &TriangleMesh, seeds: &SeedSpec, config: &PlanConfig) -> Result<ComparisonReport> {
    Planner::new(mesh, config.clone())?.compare(seeds)
}
