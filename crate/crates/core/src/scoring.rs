//! Channel safety scoring against the erosion-depth field.
//!
//! The voxel distance value array (VDVA) is the depth of the voxel under each sample of
//! the centerline; the channel safety value (CSV) is its minimum.

use std::cmp::Ordering;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::arc::Channel;
use crate::voxel::{VoxelDistanceField, OUTSIDE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub vdva: Vec<i32>,
    /// Minimum of `vdva`, or [`OUTSIDE`] when infeasible.
    pub csv: i32,
    /// Entries equal to `csv`; 0 when infeasible.
    pub min_count: usize,
    /// Mean of `vdva`; absent when infeasible.
    pub mean: Option<f64>,
    pub feasible: bool,
}

impl ChannelScore {
    pub fn from_vdva(vdva: Vec<i32>) -> Self {
        let summary = ScoreSummary::from_values(vdva.iter().copied());
        Self {
            csv: summary.csv,
            min_count: summary.min_count,
            mean: summary.mean(),
            feasible: summary.feasible(),
            vdva,
        }
    }

    pub fn summary(&self) -> ScoreSummary {
        ScoreSummary::from_values(self.vdva.iter().copied())
    }
}

/// Scores `channel` with samples every `step` mm.
pub fn score_channel(channel: &Channel, field: &VoxelDistanceField, step: f64) -> ChannelScore {
    score_points(channel.samples(step), field)
}

/// Scores an arbitrary ordered list of centerline samples.
pub fn score_points(points: impl IntoIterator<Item = Point3<f64>>, field: &VoxelDistanceField) -> ChannelScore {
    ChannelScore::from_vdva(points.into_iter().map(|p| field.query(&p)).collect())
}

/// Allocation-free statistics of a VDVA, with the sum kept exact so that means compare
/// as rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub csv: i32,
    pub min_count: usize,
    pub sum: i64,
    pub samples: usize,
}

impl ScoreSummary {
    pub const INFEASIBLE: ScoreSummary = ScoreSummary {
        csv: OUTSIDE,
        min_count: 0,
        sum: 0,
        samples: 0,
    };

    /// Stops at the first `OUTSIDE` value.
    pub fn from_values(values: impl IntoIterator<Item = i32>) -> Self {
        let mut csv = i32::MAX;
        let mut min_count = 0;
        let mut sum = 0i64;
        let mut samples = 0;
        for v in values {
            if v == OUTSIDE {
                return Self::INFEASIBLE;
            }
            match v.cmp(&csv) {
                Ordering::Less => {
                    csv = v;
                    min_count = 1;
                }
                Ordering::Equal => min_count += 1,
                Ordering::Greater => {}
            }
            sum += v as i64;
            samples += 1;
        }
        if samples == 0 {
            return Self::INFEASIBLE;
        }
        Self {
            csv,
            min_count,
            sum,
            samples,
        }
    }

    pub fn of_channel(channel: &Channel, field: &VoxelDistanceField, step: f64) -> Self {
        Self::from_values(channel.samples(step).map(|p| field.query(&p)))
    }

    pub fn feasible(&self) -> bool {
        self.csv != OUTSIDE
    }

    pub fn mean(&self) -> Option<f64> {
        self.feasible().then(|| self.sum as f64 / self.samples as f64)
    }

    /// Exact comparison of means by cross-multiplication.
    pub fn cmp_mean(&self, other: &Self) -> Ordering {
        let lhs = self.sum as i128 * other.samples as i128;
        let rhs = other.sum as i128 * self.samples as i128;
        lhs.cmp(&rhs)
    }
}
