//! Candidate point lattices around the user's entry, middle and exit seeds.
//!
//! Each lattice is a planar grid parallel to the sagittal plane. Entry and exit lattices
//! are projected along the sagittal normal onto the bone surface and then pushed a
//! small inset into the bone; the middle lattice stays where it is. Points that do not
//! land in occupied voxels are dropped.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{AnatomicalFrame, TriangleMesh};
use crate::voxel::VoxelGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub rows: usize,
    pub cols: usize,
    /// Distance between neighboring lattice points, mm.
    pub spacing: f64,
}

impl LatticeParams {
    pub const fn new(rows: usize, cols: usize, spacing: f64) -> Self {
        Self { rows, cols, spacing }
    }

    /// 10 × 10 at 2 mm, used for entry and exit.
    pub const fn surface_default() -> Self {
        Self::new(10, 10, 2.0)
    }

    /// 10 × 10 at 1 mm; the middle lattice is more compact.
    pub const fn middle_default() -> Self {
        Self::new(10, 10, 1.0)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(format!("{name} lattice needs rows and cols ≥ 1")));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} lattice spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub entry_seed: Point3<f64>,
    pub middle_seed: Point3<f64>,
    pub exit_seed: Point3<f64>,
    pub frame: AnatomicalFrame,
    pub entry_lattice: LatticeParams,
    pub middle_lattice: LatticeParams,
    pub exit_lattice: LatticeParams,
}

impl SeedSpec {
    /// Seeds with the default lattice sizes.
    pub fn new(entry_seed: Point3<f64>, middle_seed: Point3<f64>, exit_seed: Point3<f64>, frame: AnatomicalFrame) -> Self {
        Self {
            entry_seed,
            middle_seed,
            exit_seed,
            frame,
            entry_lattice: LatticeParams::surface_default(),
            middle_lattice: LatticeParams::middle_default(),
            exit_lattice: LatticeParams::surface_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.entry_lattice.validate("entry")?;
        self.middle_lattice.validate("middle")?;
        self.exit_lattice.validate("exit")?;
        let de = self.frame.signed_distance(&self.entry_seed);
        let dx = self.frame.signed_distance(&self.exit_seed);
        if de * dx >= 0.0 || de.is_nan() || dx.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "entry and exit seeds must lie on opposite sides of the sagittal plane \
                 (signed distances {de:.3} and {dx:.3} mm)"
            )));
        }
        Ok(())
    }
}

/// A lattice point with its (row, col) provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub position: Point3<f64>,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLattices {
    pub entry: Vec<SeedPoint>,
    pub middle: Vec<SeedPoint>,
    pub exit: Vec<SeedPoint>,
}

/// Which way along the sagittal normal to project.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Toward {
    Positive,
    Negative,
}

impl Toward {
    pub fn apply(self, normal: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Toward::Positive => *normal,
            Toward::Negative => -normal,
        }
    }
}

/// In-plane lattice axes (row axis, column axis), orthonormal and perpendicular to the
/// sagittal normal: Gram-Schmidt of world +z (or +y when +z is nearly parallel to the
/// normal) against the normal, and their cross product.
pub fn lattice_axes(frame: &AnatomicalFrame) -> (Vector3<f64>, Vector3<f64>) {
    let n = frame.sagittal_normal;
    let up = if n.z.abs() > 0.9 { Vector3::y() } else { Vector3::z() };
    let row_axis = (up - n * up.dot(&n)).normalize();
    (row_axis, n.cross(&row_axis))
}

/// `rows × cols` grid centered on `center` in the plane through it parallel to the
/// sagittal plane. Row-major order.
pub fn make_lattice(center: Point3<f64>, frame: &AnatomicalFrame, params: &LatticeParams) -> Vec<SeedPoint> {
    let (row_axis, col_axis) = lattice_axes(frame);
    let half_r = (params.rows as f64 - 1.0) / 2.0;
    let half_c = (params.cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(params.rows * params.cols);
    for row in 0..params.rows {
        for col in 0..params.cols {
            let offset = row_axis * ((row as f64 - half_r) * params.spacing)
                + col_axis * ((col as f64 - half_c) * params.spacing);
            out.push(SeedPoint {
                position: center + offset,
                row,
                col,
            });
        }
    }
    out
}

/// Moves each point to the first surface hit along ±sagittal normal; misses are dropped.
pub fn project_to_surface(
    points: &[SeedPoint],
    frame: &AnatomicalFrame,
    mesh: &TriangleMesh,
    toward: Toward,
) -> Vec<SeedPoint> {
    let dir = toward.apply(&frame.sagittal_normal);
    points
        .iter()
        .filter_map(|sp| {
            mesh.ray_intersections(&sp.position, &dir)
                .first()
                .map(|hit| SeedPoint {
                    position: hit.point,
                    ..*sp
                })
        })
        .collect()
}

/// Shifts every point by `inset` and keeps those that land in occupied voxels.
pub fn prune_outside(points: &[SeedPoint], grid: &VoxelGrid, inset: Vector3<f64>) -> Vec<SeedPoint> {
    points
        .iter()
        .map(|sp| SeedPoint {
            position: sp.position + inset,
            ..*sp
        })
        .filter(|sp| grid.contains_point(&sp.position))
        .collect()
}

/// Builds all three candidate sets. `surface_inset` is the distance (mm) that projected
/// entry and exit points are pushed into the bone along the projection direction.
pub fn build_lattices(spec: &SeedSpec, mesh: &TriangleMesh, grid: &VoxelGrid, surface_inset: f64) -> Result<SeedLattices> {
    spec.validate()?;
    let frame = &spec.frame;
    let surface_set = |seed: Point3<f64>, params: &LatticeParams, name: &'static str| -> Result<Vec<SeedPoint>> {
        let side = frame.signed_distance(&seed).signum();
        let toward = if side > 0.0 { Toward::Negative } else { Toward::Positive };
        let lattice = make_lattice(seed, frame, params);
        let projected = project_to_surface(&lattice, frame, mesh, toward);
        let inset = toward.apply(&frame.sagittal_normal) * surface_inset;
        let kept: Vec<SeedPoint> = prune_outside(&projected, grid, inset)
            .into_iter()
            // A point that crossed the sagittal plane no longer belongs to its side.
            .filter(|sp| frame.signed_distance(&sp.position) * side > 0.0)
            .collect();
        if kept.is_empty() {
            return Err(Error::NoSeedPoints(name));
        }
        Ok(kept)
    };
    let entry = surface_set(spec.entry_seed, &spec.entry_lattice, "entry")?;
    let exit = surface_set(spec.exit_seed, &spec.exit_lattice, "exit")?;
    let middle = prune_outside(
        &make_lattice(spec.middle_seed, frame, &spec.middle_lattice),
        grid,
        Vector3::zeros(),
    );
    if middle.is_empty() {
        return Err(Error::NoSeedPoints("middle"));
    }
    Ok(SeedLattices { entry, middle, exit })
}
