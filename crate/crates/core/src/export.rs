//! Visualization exports for planned channels.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// ASCII PLY with one vertex per sample and an edge between consecutive samples.
pub fn write_polyline_ply<W: Write>(points: &[Point3<f64>], mut out: W) -> Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "comment channel centerline, mm")?;
    writeln!(out, "element vertex {}", points.len())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    writeln!(out, "element edge {}", points.len().saturating_sub(1))?;
    writeln!(out, "property int vertex1")?;
    writeln!(out, "property int vertex2")?;
    writeln!(out, "end_header")?;
    for p in points {
        writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
    }
    for i in 1..points.len() {
        writeln!(out, "{} {}", i - 1, i)?;
    }
    Ok(())
}

/// Closed tube of `radius` around the polyline, `sides` facets around, with flat caps.
/// Rings are oriented by parallel transport so the tube does not twist.
pub fn tube_mesh(points: &[Point3<f64>], radius: f64, sides: usize) -> Result<TriangleMesh> {
    if !(radius.is_finite() && radius > 0.0) || sides < 3 {
        return Err(Error::InvalidParameter(format!(
            "tube needs radius > 0 and ≥ 3 sides (got {radius}, {sides})"
        )));
    }
    // Drop samples too close to their predecessor (the final sample pair can be very short).
    let min_gap = radius * 1e-3;
    let mut path: Vec<Point3<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if path.last().is_some_and(|q| (p - q).norm() < min_gap) {
            path.pop();
        }
        path.push(*p);
    }
    if path.len() < 2 {
        return Err(Error::InvalidParameter("tube needs at least two distinct points".into()));
    }
    let tangent = |i: usize| -> Vector3<f64> {
        let a = path[i.saturating_sub(1)];
        let b = path[(i + 1).min(path.len() - 1)];
        (b - a).normalize()
    };
    let t0 = tangent(0);
    let seed = if t0.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let mut u = (seed - t0 * seed.dot(&t0)).normalize();
    let mut vertices = Vec::with_capacity(path.len() * sides);
    for (i, p) in path.iter().enumerate() {
        let t = tangent(i);
        u = (u - t * u.dot(&t)).normalize();
        if !u.iter().all(|c| c.is_finite()) {
            return Err(Error::Internal("tube frame degenerated".into()));
        }
        let v = t.cross(&u);
        for k in 0..sides {
            let (s, c) = (TAU * k as f64 / sides as f64).sin_cos();
            vertices.push(p + (u * c + v * s) * radius);
        }
    }
    let at = |ring: usize, k: usize| (ring * sides + k % sides) as u32;
    let mut triangles = Vec::new();
    for ring in 0..path.len() - 1 {
        for k in 0..sides {
            triangles.push([at(ring, k), at(ring, k + 1), at(ring + 1, k + 1)]);
            triangles.push([at(ring, k), at(ring + 1, k + 1), at(ring + 1, k)]);
        }
    }
    let last = path.len() - 1;
    for k in 1..sides - 1 {
        triangles.push([at(0, 0), at(0, k + 1), at(0, k)]);
        triangles.push([at(last, 0), at(last, k), at(last, k + 1)]);
    }
    TriangleMesh::new(vertices, triangles)
}
