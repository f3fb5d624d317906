//! Oracles and phantom scenarios shared by the integration tests.
#![allow(dead_code)]

use iafc_core::phantom::{c_plate, CPlateParams};
use iafc_core::{
    AnatomicalFrame, Connectivity, LatticeParams, Point3, SeedSpec, TriangleMesh, Vector3, VoxelGrid,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Depth of every voxel by direct search: distance to the nearest empty voxel (cells
/// beyond the grid count as empty) minus one. City-block metric for 6-connectivity,
/// chessboard for 26. Unoccupied voxels get -1.
pub fn brute_force_depths(grid: &VoxelGrid, connectivity: Connectivity) -> Vec<i32> {
    let [nx, ny, nz] = grid.dims();
    let dims = [nx as i64, ny as i64, nz as i64];
    let occupied = |p: [i64; 3]| -> bool {
        (0..3).all(|a| p[a] >= 0 && p[a] < dims[a])
            && grid.is_occupied([p[0] as usize, p[1] as usize, p[2] as usize])
    };
    let metric = |d: [i64; 3]| -> i64 {
        match connectivity {
            Connectivity::Six => d[0].abs() + d[1].abs() + d[2].abs(),
            Connectivity::TwentySix => d[0].abs().max(d[1].abs()).max(d[2].abs()),
        }
    };
    let mut out = vec![-1; grid.len()];
    for (index, value) in out.iter_mut().enumerate() {
        let c = grid.coords(index);
        if !grid.is_occupied(c) {
            continue;
        }
        let c = [c[0] as i64, c[1] as i64, c[2] as i64];
        // Nearest outside-the-grid cell is straight along one axis in either metric.
        let mut best = (0..3).map(|a| (c[a] + 1).min(dims[a] - c[a])).min().unwrap();
        // Scan cube shells of growing radius r; in both metrics every cell of shell r is at
        // distance ≥ r, so the search can stop once best ≤ r.
        let mut r = 1;
        while r < best {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let p = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if !occupied(p) {
                            best = best.min(metric([dx, dy, dz]));
                        }
                    }
                }
            }
            r += 1;
        }
        *value = (best - 1) as i32;
    }
    out
}

/// Random occupancy grid with dims in 1..=32: noise, unions of boxes and balls, or both.
pub fn random_grid(rng: &mut impl Rng, max_dim: usize) -> VoxelGrid {
    let dims = [
        rng.gen_range(1..=max_dim),
        rng.gen_range(1..=max_dim),
        rng.gen_range(1..=max_dim),
    ];
    let len = dims[0] * dims[1] * dims[2];
    let kind = rng.gen_range(0..3);
    let mut occ = vec![false; len];
    if kind != 0 {
        for _ in 0..rng.gen_range(1..6) {
            let c: Vec<f64> = dims.iter().map(|&d| rng.gen_range(0.0..d as f64)).collect();
            let r: Vec<f64> = dims.iter().map(|&d| rng.gen_range(0.5..=d as f64 / 1.5 + 0.5)).collect();
            let ball = rng.gen_bool(0.5);
            for (i, o) in occ.iter_mut().enumerate() {
                let p = [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
                let q: Vec<f64> = (0..3).map(|a| (p[a] as f64 - c[a]) / r[a]).collect();
                let inside = if ball {
                    q.iter().map(|v| v * v).sum::<f64>() <= 1.0
                } else {
                    q.iter().all(|v| v.abs() <= 1.0)
                };
                *o |= inside;
            }
        }
    }
    if kind == 0 {
        let density = rng.gen_range(0.5..0.97);
        occ.iter_mut().for_each(|o| *o = rng.gen_bool(density));
    } else if kind == 2 {
        let flip = rng.gen_range(0.01..0.1);
        occ.iter_mut().filter(|_| rng.gen_bool(flip)).for_each(|o| *o = !*o);
    }
    VoxelGrid::from_occupancy(dims, occ).unwrap()
}

pub fn sagittal_x() -> AnatomicalFrame {
    AnatomicalFrame::new(Point3::origin(), Vector3::x()).unwrap()
}

/// Thin C-shaped plate: every chord between its ends leaves the bone.
pub fn thin_plate_case() -> (TriangleMesh, SeedSpec) {
    let mesh = c_plate(&CPlateParams::default()).unwrap();
    let seeds = SeedSpec::new(
        Point3::new(-100.0, 36.0, 0.0),
        Point3::new(0.0, 60.0, 0.0),
        Point3::new(100.0, 36.0, 0.0),
        sagittal_x(),
    );
    (mesh, seeds)
}

pub const THICK_PLATE: CPlateParams = CPlateParams {
    thickness: 24.0,
    mid_radius: 60.0,
    width: 24.0,
    sweep_deg: 60.0,
    segments: 120,
};

/// Thick, shallow plate where both straight and arc channels fit.
pub fn thick_plate_case() -> (TriangleMesh, SeedSpec) {
    let mesh = c_plate(&THICK_PLATE).unwrap();
    let seeds = SeedSpec::new(
        Point3::new(-100.0, 55.0, 0.0),
        Point3::new(0.0, 60.0, 0.0),
        Point3::new(100.0, 55.0, 0.0),
        sagittal_x(),
    );
    (mesh, seeds)
}

/// Large plate whose channels run about 150 mm; full-size 10 × 10 lattices.
pub fn large_plate_case() -> (TriangleMesh, SeedSpec) {
    let mesh = c_plate(&CPlateParams {
        thickness: 30.0,
        mid_radius: 75.0,
        width: 40.0,
        sweep_deg: 120.0,
        segments: 120,
    })
    .unwrap();
    let seeds = SeedSpec::new(
        Point3::new(-150.0, 50.0, 0.0),
        Point3::new(0.0, 75.0, 0.0),
        Point3::new(150.0, 50.0, 0.0),
        sagittal_x(),
    );
    (mesh, seeds)
}

pub fn with_lattices(mut seeds: SeedSpec, surface: LatticeParams, middle: LatticeParams) -> SeedSpec {
    seeds.entry_lattice = surface;
    seeds.exit_lattice = surface;
    seeds.middle_lattice = middle;
    seeds
}

/// Closed UV sphere (or upper hemisphere with a flat base) centered at the origin.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize, hemisphere: bool) -> TriangleMesh {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let polar_end = if hemisphere { FRAC_PI_2 } else { PI };
    let at = |i: usize, j: usize| {
        let theta = polar_end * i as f64 / stacks as f64;
        let phi = TAU * (j % slices) as f64 / slices as f64;
        if i == 0 {
            return Point3::new(0.0, 0.0, radius);
        }
        if !hemisphere && i == stacks {
            return Point3::new(0.0, 0.0, -radius);
        }
        let z = if hemisphere && i == stacks { 0.0 } else { radius * theta.cos() };
        Point3::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), z)
    };
    let mut facets = Vec::new();
    for i in 0..stacks {
        for j in 0..slices {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            if i != 0 {
                facets.push([a, b, d]);
            }
            if hemisphere || i + 1 != stacks {
                facets.push([b, c, d]);
            }
        }
    }
    if hemisphere {
        let center = Point3::origin();
        for j in 0..slices {
            facets.push([center, at(stacks, j + 1), at(stacks, j)]);
        }
    }
    TriangleMesh::from_soup(&facets).unwrap()
}
