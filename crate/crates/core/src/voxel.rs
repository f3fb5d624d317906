//! Voxel occupancy of the bone model and its erosion-depth distance field.
//!
//! The bone is rasterized by testing voxel centers for inclusion (ray parity along
//! +x, one ray per voxel column). Distance to the surface is then measured by
//! repeatedly peeling the outermost layer of occupied voxels: a voxel peeled on
//! pass `k` (counting from zero) gets depth `k`.

use std::io::{BufRead, Write};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{cast_ray, TriangleMesh};

/// Depth value of unoccupied voxels and of points outside the grid. Ordered below every
/// real depth, so a minimum over samples is automatically `OUTSIDE` if any sample leaves
/// the bone.
pub const OUTSIDE: i32 = -1;

/// Neighborhood used by the erosion structuring element.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbors. Depth equals city-block distance to the exterior minus one.
    #[default]
    Six,
    /// Face, edge and corner neighbors. Depth equals chessboard distance minus one.
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[isize; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &ALL_OFFSETS,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        match value {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }
}

const FACE_OFFSETS: [[isize; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

const ALL_OFFSETS: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Regular boolean grid. Voxel `(i, j, k)` is centered at `origin + pitch * (i, j, k)`
/// and spans half a pitch on either side; storage is x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    origin: Point3<f64>,
    pitch: f64,
    dims: [usize; 3],
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    /// An empty grid.
    pub fn new(origin: Point3<f64>, pitch: f64, dims: [usize; 3]) -> Result<Self> {
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidParameter(format!("voxel pitch must be positive, got {pitch}")));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("grid dims {dims:?} must all be ≥ 1")));
        }
        let len = dims[0] * dims[1] * dims[2];
        Ok(Self {
            origin,
            pitch,
            dims,
            occupancy: vec![false; len],
        })
    }

    /// Grid at unit pitch with the given occupancy (x-fastest), for tests and tools.
    pub fn from_occupancy(dims: [usize; 3], occupancy: Vec<bool>) -> Result<Self> {
        let mut grid = Self::new(Point3::origin(), 1.0, dims)?;
        if occupancy.len() != grid.occupancy.len() {
            return Err(Error::InvalidParameter(format!(
                "occupancy has {} entries, dims {dims:?} need {}",
                occupancy.len(),
                grid.occupancy.len()
            )));
        }
        grid.occupancy = occupancy;
        Ok(grid)
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    /// Minimum corner of voxel (0, 0, 0).
    pub fn corner(&self) -> Point3<f64> {
        self.origin - Vector3::repeat(self.pitch / 2.0)
    }

    #[inline]
    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn center(&self, [i, j, k]: [usize; 3]) -> Point3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.pitch
    }

    pub fn is_occupied(&self, ijk: [usize; 3]) -> bool {
        self.occupancy[self.index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], occupied: bool) {
        let idx = self.index(ijk);
        self.occupancy[idx] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Voxel containing `p`: `floor((p - corner) / pitch)` per axis, so points on a shared
    /// face belong to the higher-index voxel. `None` outside the grid.
    #[inline]
    pub fn voxel_of(&self, p: &Point3<f64>) -> Option<[usize; 3]> {
        let corner = self.corner();
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = ((p[axis] - corner[axis]) / self.pitch).floor();
            if !(f >= 0.0 && f < self.dims[axis] as f64) {
                return None;
            }
            out[axis] = f as usize;
        }
        Some(out)
    }

    /// Whether the point lies in an occupied voxel.
    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        self.voxel_of(p).is_some_and(|ijk| self.is_occupied(ijk))
    }

    #[inline]
    fn neighbor(&self, index: usize, offset: [isize; 3]) -> Option<usize> {
        let c = self.coords(index);
        let mut n = [0usize; 3];
        for axis in 0..3 {
            let v = c[axis] as isize + offset[axis];
            if v < 0 || v >= self.dims[axis] as isize {
                return None;
            }
            n[axis] = v as usize;
        }
        Some(self.index(n))
    }

    /// True if some neighbor is unoccupied or lies beyond the grid.
    #[inline]
    fn touches_empty(&self, index: usize, connectivity: Connectivity) -> bool {
        connectivity
            .offsets()
            .iter()
            .any(|&o| self.neighbor(index, o).is_none_or(|n| !self.occupancy[n]))
    }
}

/// Rasterizes the mesh: a voxel is occupied iff its center is inside by ray parity.
///
/// Voxel centers sit at `bbox_min + pitch / 2 + i * pitch` and the grid carries one
/// empty voxel of margin on every side.
pub fn voxelize(mesh: &TriangleMesh, pitch: f64) -> Result<VoxelGrid> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::InvalidParameter(format!("voxel pitch must be positive, got {pitch}")));
    }
    let (lo, hi) = mesh.bounds();
    let extent = hi - lo;
    if extent.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidMesh(format!("bounding box {lo:?}..{hi:?} is degenerate")));
    }
    let dims = [0, 1, 2].map(|a| (extent[a] / pitch).ceil() as usize + 2);
    let origin = lo + Vector3::repeat(pitch / 2.0 - pitch);
    let mut grid = VoxelGrid::new(origin, pitch, dims)?;
    let [nx, ny, nz] = dims;

    // Bucket triangles by the (y, z) columns their bounding boxes cover. The slack covers
    // the origin nudges of grazing re-casts.
    let slack = 1e-4;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); ny * nz];
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangle(t);
        let range = |axis: usize, n: usize| {
            let min = tri.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min) - slack;
            let max = tri.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max) + slack;
            let first = ((min - origin[axis]) / pitch).ceil().max(0.0) as usize;
            let last = ((max - origin[axis]) / pitch).floor();
            let last = if last < 0.0 { None } else { Some((last as usize).min(n - 1)) };
            last.filter(|&l| l >= first).map(|l| first..=l)
        };
        if let (Some(js), Some(ks)) = (range(1, ny), range(2, nz)) {
            for k in ks {
                for j in js.clone() {
                    buckets[j + ny * k].push(t as u32);
                }
            }
        }
    }

    let ray_x = grid.corner().x - pitch;
    let columns: Vec<Vec<bool>> = (0..ny * nz)
        .into_par_iter()
        .map(|col| {
            let (j, k) = (col % ny, col / ny);
            let mut inside = vec![false; nx];
            let bucket = &buckets[col];
            if bucket.is_empty() {
                return inside;
            }
            let start = Point3::new(ray_x, origin.y + j as f64 * pitch, origin.z + k as f64 * pitch);
            let hits = cast_ray(mesh, bucket.iter().map(|&t| t as usize), &start, &Vector3::x());
            let mut crossed = 0;
            for (i, cell) in inside.iter_mut().enumerate() {
                let t_center = origin.x + i as f64 * pitch - ray_x;
                while crossed < hits.len() && hits[crossed].t < t_center {
                    crossed += 1;
                }
                *cell = crossed % 2 == 1;
            }
            inside
        })
        .collect();
    for (col, inside) in columns.into_iter().enumerate() {
        let base = nx * col;
        grid.occupancy[base..base + nx].copy_from_slice(&inside);
    }
    Ok(grid)
}

/// One synchronous erosion pass. Returns the peeled voxel indices (ascending) and the
/// remaining grid.
pub fn erode_once(grid: &VoxelGrid, connectivity: Connectivity) -> (Vec<usize>, VoxelGrid) {
    let peeled: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.occupancy[i] && grid.touches_empty(i, connectivity))
        .collect();
    let mut remaining = grid.clone();
    for &i in &peeled {
        remaining.occupancy[i] = false;
    }
    (peeled, remaining)
}

/// Per-voxel erosion depth over a voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelDistanceField {
    grid: VoxelGrid,
    values: Vec<i32>,
    connectivity: Connectivity,
}

/// Peels the grid layer by layer until it is empty; voxels peeled on pass `k` get depth `k`.
///
/// Only neighbors of the previous layer can join the next one, so each pass after the
/// first inspects the frontier instead of the whole grid.
pub fn build_distance_field(grid: &VoxelGrid, connectivity: Connectivity) -> Result<VoxelDistanceField> {
    let mut values = vec![OUTSIDE; grid.len()];
    let mut remaining = grid.clone();
    let mut left = grid.occupied_count();
    let cap: usize = grid.dims.iter().sum();
    let mut layer: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.occupancy[i] && grid.touches_empty(i, connectivity))
        .collect();
    let mut seen = vec![u32::MAX; grid.len()];
    let mut depth = 0usize;
    while !layer.is_empty() {
        if depth > cap {
            return Err(Error::Internal(format!("erosion exceeded {cap} passes")));
        }
        for &i in &layer {
            values[i] = depth as i32;
            remaining.occupancy[i] = false;
        }
        left -= layer.len();
        let mut next = Vec::new();
        for &i in &layer {
            for &o in connectivity.offsets() {
                if let Some(n) = remaining.neighbor(i, o) {
                    if remaining.occupancy[n] && seen[n] != depth as u32 {
                        seen[n] = depth as u32;
                        if remaining.touches_empty(n, connectivity) {
                            next.push(n);
                        }
                    }
                }
            }
        }
        next.sort_unstable();
        layer = next;
        depth += 1;
    }
    if left != 0 {
        return Err(Error::Internal(format!("{left} voxels never peeled")));
    }
    Ok(VoxelDistanceField {
        grid: grid.clone(),
        values,
        connectivity,
    })
}

/// Depth of the voxel containing `point`, or [`OUTSIDE`].
pub fn query_distance(field: &VoxelDistanceField, point: &Point3<f64>) -> i32 {
    field.query(point)
}

impl VoxelDistanceField {
    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn value(&self, ijk: [usize; 3]) -> i32 {
        self.values[self.grid.index(ijk)]
    }

    #[inline]
    pub fn query(&self, point: &Point3<f64>) -> i32 {
        match self.grid.voxel_of(point) {
            Some(ijk) => self.values[self.grid.index(ijk)],
            None => OUTSIDE,
        }
    }

    pub fn max_depth(&self) -> i32 {
        self.values.iter().copied().max().unwrap_or(OUTSIDE)
    }

    /// Number of voxels at each depth 0..=max_depth.
    pub fn depth_histogram(&self) -> Vec<usize> {
        let max = self.max_depth();
        let mut hist = vec![0usize; (max + 1).max(0) as usize];
        for &v in &self.values {
            if v >= 0 {
                hist[v as usize] += 1;
            }
        }
        hist
    }

    /// Writes the debug dump: one text header line
    /// `dims NX NY NZ origin X Y Z pitch P`, then one little-endian `i16` per voxel,
    /// x-fastest, with -1 for unoccupied voxels.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let [nx, ny, nz] = self.grid.dims;
        let o = self.grid.origin;
        writeln!(
            out,
            "dims {nx} {ny} {nz} origin {:?} {:?} {:?} pitch {:?}",
            o.x, o.y, o.z, self.grid.pitch
        )?;
        let mut body = Vec::with_capacity(2 * self.values.len());
        for &v in &self.values {
            let v = i16::try_from(v)
                .map_err(|_| Error::Internal(format!("depth {v} does not fit the i16 dump format")))?;
            body.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&body)?;
        Ok(())
    }

    /// Reads a dump written by [`write_dump`](Self::write_dump).
    pub fn read_dump<R: BufRead>(mut input: R, connectivity: Connectivity) -> Result<Self> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let bad = |what: &str| Error::InvalidParameter(format!("malformed field dump header: {what}"));
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 10 || tokens[0] != "dims" || tokens[4] != "origin" || tokens[8] != "pitch" {
            return Err(bad(header.trim()));
        }
        let num = |i: usize| tokens[i].parse::<f64>().map_err(|_| bad(tokens[i]));
        let dim = |i: usize| tokens[i].parse::<usize>().map_err(|_| bad(tokens[i]));
        let dims = [dim(1)?, dim(2)?, dim(3)?];
        let origin = Point3::new(num(5)?, num(6)?, num(7)?);
        let mut grid = VoxelGrid::new(origin, num(9)?, dims)?;
        let mut body = vec![0u8; 2 * grid.len()];
        input.read_exact(&mut body)?;
        let values: Vec<i32> = body
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as i32)
            .collect();
        for (occ, &v) in grid.occupancy.iter_mut().zip(&values) {
            *occ = v >= 0;
        }
        Ok(Self {
            grid,
            values,
            connectivity,
        })
    }
}
