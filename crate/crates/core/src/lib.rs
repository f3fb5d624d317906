//! Planning of constant-curvature internal fixation channels through bone.
//!
//! The pipeline voxelizes a closed triangle mesh, assigns every interior voxel its
//! erosion depth (distance to the surface in voxel layers), seeds candidate entry,
//! middle and exit points, builds a circular arc through every triple and keeps the
//! channel whose sampled depths are best under a lexicographic safety key. Straight
//! channels are planned with the same machinery at zero curvature for comparison.

pub mod arc;
pub mod error;
pub mod export;
pub mod mesh;
pub mod phantom;
pub mod planner;
pub mod scoring;
pub mod seeding;
pub mod selection;
pub mod voxel;

pub use arc::{arc_through_points, sample_channel, straight_through_points, ArcChannel, Channel, StraightChannel};
pub use error::{Error, Result};
pub use mesh::{load_mesh, AnatomicalFrame, RayHit, TriangleMesh};
pub use planner::{compare, plan, ComparisonReport, Mode, PlanConfig, PlanOutcome, PlanReport, Planner};
pub use scoring::{score_channel, score_points, ChannelScore};
pub use seeding::{LatticeParams, SeedLattices, SeedPoint, SeedSpec};
pub use selection::{select_best, CandidateRef, Selection, StageCounts};
pub use voxel::{build_distance_field, voxelize, Connectivity, VoxelDistanceField, VoxelGrid, OUTSIDE};

pub use nalgebra::{Point3, Vector3};
