//! Triangle meshes of the bone model: STL input/output, validation and ray casting.
//!
//! Coordinates are millimeters. STL carries no unit metadata, so every file
//! handed to [`load_mesh`] is assumed to already be in millimeters.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const STL_HEADER_SIZE: usize = 80;
const STL_FACET_SIZE: usize = 50;

/// Triangles with less area than this (mm²) are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

/// Barycentric distance below which a ray hit counts as landing on a triangle boundary.
const BOUNDARY_TOLERANCE: f64 = 1e-9;
/// Origin nudge used to re-cast rays that graze an edge or vertex.
const RAY_PERTURBATION: f64 = 1e-6;
const MAX_RAY_ATTEMPTS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vector3<f64>>,
}

/// A hit of a ray with the mesh surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// Distance along the ray from the caller's origin, in mm.
    pub t: f64,
    pub point: Point3<f64>,
    pub triangle: usize,
}

impl TriangleMesh {
    /// Builds a validated mesh, computing unit normals from the winding order.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let mut normals = Vec::with_capacity(triangles.len());
        for (i, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&idx| idx as usize >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|idx| vertices[idx as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area <= MIN_TRIANGLE_AREA {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} is degenerate (area {area:e} mm²)"
                )));
            }
            normals.push(cross / (2.0 * area));
        }
        Ok(Self {
            vertices,
            triangles,
            normals,
        })
    }

    /// Builds a mesh from a triangle soup, merging vertices whose coordinates match bit for bit.
    pub fn from_soup(facets: &[[Point3<f64>; 3]]) -> Result<Self> {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(facets.len());
        for facet in facets {
            let tri = facet.map(|p| {
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                *index.entry(key).or_insert_with(|| {
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(tri);
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, index: usize) -> [Point3<f64>; 3] {
        self.triangles[index].map(|i| self.vertices[i as usize])
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::from([f64::INFINITY; 3]);
        let mut hi = Point3::from([f64::NEG_INFINITY; 3]);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Signed enclosed volume (positive for outward-facing winding).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// SHA-256 over vertex coordinate bits and triangle indices, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.vertices {
            for c in v.iter() {
                hasher.update(c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for i in t {
                hasher.update(i.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// All hits of the ray with t > 0, ascending by t.
    ///
    /// Hits that land within tolerance of a triangle edge or vertex trigger a re-cast from
    /// an origin nudged along a world axis, so a ray crossing a shared edge is counted once.
    pub fn ray_intersections(&self, origin: &Point3<f64>, direction: &Vector3<f64>) -> Vec<RayHit> {
        cast_ray(self, 0..self.triangles.len(), origin, direction)
    }

    /// Writes the mesh as binary STL.
    pub fn write_binary_stl<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = [0u8; STL_HEADER_SIZE];
        let tag = b"binary STL written by iafc";
        header[..tag.len()].copy_from_slice(tag);
        out.write_all(&header)?;
        out.write_all(&(self.triangles.len() as u32).to_le_bytes())?;
        for (i, n) in self.normals.iter().enumerate() {
            for c in n.iter() {
                out.write_all(&(*c as f32).to_le_bytes())?;
            }
            for v in self.triangle(i) {
                for c in v.iter() {
                    out.write_all(&(*c as f32).to_le_bytes())?;
                }
            }
            out.write_all(&0u16.to_le_bytes())?;
        }
        Ok(())
    }

    /// Writes the mesh as ASCII STL with full `f64` round-trip precision.
    pub fn write_ascii_stl<W: Write>(&self, mut out: W, name: &str) -> Result<()> {
        writeln!(out, "solid {name}")?;
        for (i, n) in self.normals.iter().enumerate() {
            writeln!(out, "  facet normal {:?} {:?} {:?}", n.x, n.y, n.z)?;
            writeln!(out, "    outer loop")?;
            for v in self.triangle(i) {
                writeln!(out, "      vertex {:?} {:?} {:?}", v.x, v.y, v.z)?;
            }
            writeln!(out, "    endloop")?;
            writeln!(out, "  endfacet")?;
        }
        writeln!(out, "endsolid {name}")?;
        Ok(())
    }
}

/// Ray cast against a subset of triangles, with the edge-grazing retry described on
/// [`TriangleMesh::ray_intersections`].
pub(crate) fn cast_ray(
    mesh: &TriangleMesh,
    candidates: impl Iterator<Item = usize> + Clone,
    origin: &Point3<f64>,
    direction: &Vector3<f64>,
) -> Vec<RayHit> {
    let mut shifted = *origin;
    let mut axis = 0;
    for attempt in 0..MAX_RAY_ATTEMPTS {
        let mut hits = Vec::new();
        let mut grazing = false;
        for tri in candidates.clone() {
            let corners = mesh.triangle(tri);
            if let Some((_, u, v)) = moller_trumbore(&corners, &shifted, direction) {
                if u.min(v).min(1.0 - u - v) < BOUNDARY_TOLERANCE {
                    grazing = true;
                    break;
                }
                let point = barycentric(&corners, u, v);
                let t = (point - origin).dot(direction);
                if t > 0.0 {
                    hits.push(RayHit { t, point, triangle: tri });
                }
            }
        }
        if !grazing {
            hits.sort_by(|a, b| a.t.total_cmp(&b.t));
            return hits;
        }
        // Nudges parallel to the ray cannot move a hit off an edge.
        while direction[axis].abs() > 0.9 {
            axis = (axis + 1) % 3;
        }
        // Growing steps keep cumulative nudges from landing back on a symmetric edge.
        shifted[axis] += RAY_PERTURBATION * (attempt + 1) as f64;
        axis = (axis + 1) % 3;
    }
    // Pathological input (a ray running along an edge); the last pass is still well defined.
    let mut hits: Vec<RayHit> = candidates
        .filter_map(|tri| {
            let corners = mesh.triangle(tri);
            moller_trumbore(&corners, &shifted, direction).map(|(_, u, v)| {
                let point = barycentric(&corners, u, v);
                RayHit {
                    t: (point - origin).dot(direction),
                    point,
                    triangle: tri,
                }
            })
        })
        .filter(|h| h.t > 0.0)
        .collect();
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits
}

/// Interpolating the corners keeps hits on axis-aligned faces exactly on the face plane.
#[inline]
fn barycentric(tri: &[Point3<f64>; 3], u: f64, v: f64) -> Point3<f64> {
    tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v
}

/// Two-sided Möller–Trumbore test. Returns (t, u, v) for hits in the closed triangle
/// (with a small negative slack so that grazing hits are reported and can be re-cast).
fn moller_trumbore(
    tri: &[Point3<f64>; 3],
    origin: &Point3<f64>,
    direction: &Vector3<f64>,
) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(-BOUNDARY_TOLERANCE..=1.0 + BOUNDARY_TOLERANCE).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = direction.dot(&q) * inv_det;
    if v < -BOUNDARY_TOLERANCE || u + v > 1.0 + BOUNDARY_TOLERANCE {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    Some((t, u, v))
}

/// The anatomical reference used for seeding: a point on the sagittal plane and its
/// unit normal (the left-right axis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnatomicalFrame {
    pub sagittal_origin: Point3<f64>,
    pub sagittal_normal: Vector3<f64>,
}

impl AnatomicalFrame {
    /// Normalizes `normal`; fails on a zero or non-finite vector.
    pub fn new(sagittal_origin: Point3<f64>, normal: Vector3<f64>) -> Result<Self> {
        let len = normal.norm();
        if !len.is_finite() || len < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sagittal normal {normal:?} cannot be normalized"
            )));
        }
        Ok(Self {
            sagittal_origin,
            sagittal_normal: normal / len,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if (self.sagittal_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "sagittal normal {:?} is not unit length",
                self.sagittal_normal
            )));
        }
        Ok(())
    }

    /// Signed distance from the sagittal plane, positive on the normal's side.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.sagittal_origin).dot(&self.sagittal_normal)
    }
}

/// Loads an ASCII or binary STL file.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_stl(&bytes)
}

/// Parses STL bytes, detecting ASCII vs binary.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh> {
    let facets = if looks_binary(bytes) {
        parse_binary(bytes)?
    } else {
        parse_ascii(bytes)?
    };
    TriangleMesh::from_soup(&facets)
}

fn looks_binary(bytes: &[u8]) -> bool {
    if !bytes.starts_with(b"solid") {
        return true;
    }
    // Some binary exporters also begin the header with "solid"; trust an exact size match.
    if bytes.len() >= STL_HEADER_SIZE + 4 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        return bytes.len() == STL_HEADER_SIZE + 4 + count * STL_FACET_SIZE;
    }
    false
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>> {
    if bytes.len() < STL_HEADER_SIZE + 4 {
        return Err(Error::TruncatedStl {
            declared: 0,
            found: 0,
        });
    }
    let declared = u32::from_le_bytes(bytes[80..84].try_into().unwrap());
    let body = &bytes[STL_HEADER_SIZE + 4..];
    let found = body.len() / STL_FACET_SIZE;
    if found < declared as usize {
        return Err(Error::TruncatedStl { declared, found });
    }
    let read_f32 = |rec: &[u8], at: usize| f32::from_le_bytes(rec[at..at + 4].try_into().unwrap());
    Ok(body
        .chunks_exact(STL_FACET_SIZE)
        .take(declared as usize)
        .map(|rec| {
            let vertex = |k: usize| {
                let base = 12 + 12 * k;
                Point3::new(
                    read_f32(rec, base) as f64,
                    read_f32(rec, base + 4) as f64,
                    read_f32(rec, base + 8) as f64,
                )
            };
            [vertex(0), vertex(1), vertex(2)]
        })
        .collect())
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::AsciiStl {
        line: 1,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let mut facets = Vec::new();
    let mut current: Vec<Point3<f64>> = Vec::with_capacity(3);
    let mut in_facet = false;
    let mut saw_solid = false;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| Error::AsciiStl { line, message };
        let mut tokens = raw.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "solid" => saw_solid = true,
            "facet" => {
                if in_facet {
                    return Err(err("nested facet".into()));
                }
                in_facet = true;
                current.clear();
            }
            "outer" | "endloop" => {}
            "vertex" => {
                if !in_facet {
                    return Err(err("vertex outside facet".into()));
                }
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err(format!("expected 3 coordinates, got {}", coords.len())));
                }
                if current.len() == 3 {
                    return Err(err("facet has more than 3 vertices".into()));
                }
                current.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "endfacet" => {
                if !in_facet || current.len() != 3 {
                    return Err(err(format!("facet closed with {} vertices", current.len())));
                }
                facets.push([current[0], current[1], current[2]]);
                in_facet = false;
            }
            "endsolid" => break,
            other => return Err(err(format!("unexpected keyword {other:?}"))),
        }
    }
    if !saw_solid {
        return Err(Error::AsciiStl {
            line: 1,
            message: "missing 'solid' header".into(),
        });
    }
    if in_facet {
        return Err(Error::AsciiStl {
            line: text.lines().count(),
            message: "unterminated facet".into(),
        });
    }
    Ok(facets)
}
