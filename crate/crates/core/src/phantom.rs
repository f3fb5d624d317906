//! Synthetic closed solids that stand in for patient bone models.
//!
//! Swept phantoms are generated in the xy-plane around the z axis: a closed
//! cross-section (radial offset, height) is swept along a circular arc centered
//! at the origin. With the default orientation the arc is symmetric about +y,
//! so the plane x = 0 plays the role of the sagittal plane.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Axis-aligned box with its minimum corner at `min`.
pub fn cuboid(min: Point3<f64>, size: Vector3<f64>) -> Result<TriangleMesh> {
    if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidParameter(format!("cuboid size {size:?} must be positive")));
    }
    let corner = |i: usize| {
        Point3::new(
            min.x + if i & 1 != 0 { size.x } else { 0.0 },
            min.y + if i & 2 != 0 { size.y } else { 0.0 },
            min.z + if i & 4 != 0 { size.z } else { 0.0 },
        )
    };
    let vertices = (0..8).map(corner).collect();
    // Outward winding, two triangles per face.
    let triangles = vec![
        [0, 2, 1], [1, 2, 3], // z = min
        [4, 5, 6], [5, 7, 6], // z = max
        [0, 1, 4], [1, 5, 4], // y = min
        [2, 6, 3], [3, 6, 7], // y = max
        [0, 4, 2], [2, 4, 6], // x = min
        [1, 3, 5], [3, 7, 5], // x = max
    ];
    TriangleMesh::new(vertices, triangles)
}

/// Rectangular plate bent along a circular arc (a "C" in the xy-plane).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CPlateParams {
    /// Radial thickness, mm.
    pub thickness: f64,
    /// Radius of the plate's mid-surface, mm.
    pub mid_radius: f64,
    /// Extent along z, mm.
    pub width: f64,
    /// Swept angle in degrees, in (0, 360).
    pub sweep_deg: f64,
    /// Number of straight segments approximating the sweep.
    pub segments: usize,
}

impl Default for CPlateParams {
    fn default() -> Self {
        Self {
            thickness: 8.0,
            mid_radius: 60.0,
            width: 24.0,
            sweep_deg: 120.0,
            segments: 120,
        }
    }
}

pub fn c_plate(params: &CPlateParams) -> Result<TriangleMesh> {
    let CPlateParams {
        thickness,
        mid_radius,
        width,
        sweep_deg,
        segments,
    } = *params;
    if !(thickness > 0.0 && width > 0.0 && mid_radius > 0.0) {
        return Err(Error::InvalidParameter(
            "c_plate thickness, width and radius must be positive".into(),
        ));
    }
    if thickness / 2.0 >= mid_radius {
        return Err(Error::InvalidParameter(
            "c_plate thickness must be less than twice the mid radius".into(),
        ));
    }
    let (ri, ro, h) = (mid_radius - thickness / 2.0, mid_radius + thickness / 2.0, width / 2.0);
    let profile = [(ri, -h), (ro, -h), (ro, h), (ri, h)];
    sweep(&profile, sweep_deg, segments)
}

/// Circular tube bent along a circular arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSegmentParams {
    pub tube_radius: f64,
    pub mid_radius: f64,
    pub sweep_deg: f64,
    pub segments: usize,
    /// Polygon sides of the cross-section.
    pub sides: usize,
}

impl Default for TorusSegmentParams {
    fn default() -> Self {
        Self {
            tube_radius: 10.0,
            mid_radius: 60.0,
            sweep_deg: 120.0,
            segments: 120,
            sides: 32,
        }
    }
}

pub fn torus_segment(params: &TorusSegmentParams) -> Result<TriangleMesh> {
    let TorusSegmentParams {
        tube_radius,
        mid_radius,
        sweep_deg,
        segments,
        sides,
    } = *params;
    if !(tube_radius > 0.0 && mid_radius > tube_radius) {
        return Err(Error::InvalidParameter(
            "torus_segment needs 0 < tube radius < mid radius".into(),
        ));
    }
    if sides < 3 {
        return Err(Error::InvalidParameter("torus_segment needs at least 3 sides".into()));
    }
    let profile: Vec<(f64, f64)> = (0..sides)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / sides as f64;
            (mid_radius + tube_radius * phi.cos(), tube_radius * phi.sin())
        })
        .collect();
    sweep(&profile, sweep_deg, segments)
}

/// Sweeps a convex (radius, z) profile around the z axis over `sweep_deg`,
/// symmetric about +y, capping both ends.
fn sweep(profile: &[(f64, f64)], sweep_deg: f64, segments: usize) -> Result<TriangleMesh> {
    if !(sweep_deg > 0.0 && sweep_deg < 360.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep angle {sweep_deg}° must lie strictly between 0 and 360"
        )));
    }
    if segments == 0 {
        return Err(Error::InvalidParameter("sweep needs at least one segment".into()));
    }
    let sweep = sweep_deg.to_radians();
    let start = PI / 2.0 - sweep / 2.0;
    let n = profile.len();
    let mut vertices = Vec::with_capacity((segments + 1) * n);
    for ring in 0..=segments {
        let theta = start + sweep * ring as f64 / segments as f64;
        let (s, c) = theta.sin_cos();
        vertices.extend(profile.iter().map(|&(r, z)| Point3::new(r * c, r * s, z)));
    }
    let at = |ring: usize, k: usize| (ring * n + k % n) as u32;
    let mut triangles = Vec::with_capacity(2 * segments * n + 2 * (n - 2));
    for ring in 0..segments {
        for k in 0..n {
            let (a0, b0, a1, b1) = (at(ring, k), at(ring, k + 1), at(ring + 1, k), at(ring + 1, k + 1));
            triangles.push([a0, b0, b1]);
            triangles.push([a0, b1, a1]);
        }
    }
    for k in 1..n - 1 {
        triangles.push([at(0, 0), at(0, k + 1), at(0, k)]);
        triangles.push([at(segments, 0), at(segments, k), at(segments, k + 1)]);
    }
    let mesh = TriangleMesh::new(vertices.clone(), triangles.clone())?;
    if mesh.signed_volume() > 0.0 {
        return Ok(mesh);
    }
    let flipped = triangles.into_iter().map(|[a, b, c]| [a, c, b]).collect();
    TriangleMesh::new(vertices, flipped)
}
