//! Acceptance gate: runs every criterion at its pinned tolerance and prints one
//! PASS/FAIL line each. Exits non-zero if any criterion fails.

mod common;

use std::cmp::Ordering;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use iafc_core::scoring::ScoreSummary;
use iafc_core::selection::{arc_candidate, straight_candidate, CandidateIndex, ScoredCandidate};
use iafc_core::{
    arc_through_points, build_distance_field, score_channel, score_points, select_best, straight_through_points,
    Channel, Connectivity, LatticeParams, Mode, PlanConfig, PlanOutcome, PlanReport, Planner, Point3,
    SeedLattices, Vector3, VoxelDistanceField, VoxelGrid, OUTSIDE,
};
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("worked vdva example", worked_vdva_example),
        ("distance field vs brute force", distance_field_oracle),
        ("arc geometry properties", arc_geometry_properties),
        ("straight = zero-curvature arc", straight_as_degenerate_arc),
        ("lexicographic selection", lexicographic_selection),
        ("thin plate: arc only", thin_plate_dichotomy),
        ("thick plate: arc csv >= straight", thick_plate_dominance),
        ("report round trip", report_round_trip),
        ("10^6 candidate scale", scale_target),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {}/9  {name:<34} {secs:7.2}s  {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}/9  {name:<34} {secs:7.2}s  {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("{what} took {took:?}, limit {limit:?}"))
    }
}

/// A 16 × 5 × 5 voxel box: its mid-plane cross-section has shells 0, 1 and 2, and an
/// arc of radius 7.5 mm in that plane crosses them in the order 0,1,1,2,2,2,2,2,1,1,0,0.
/// All twelve samples lie at least 0.049 voxel from any voxel face.
fn worked_vdva_example() -> Outcome {
    let start = Instant::now();
    let (len, dims) = (16usize, [18usize, 7, 7]);
    let mut occ = vec![false; dims.iter().product()];
    for k in 1..=5 {
        for j in 1..=5 {
            for i in 1..=len {
                occ[i + dims[0] * (j + dims[1] * k)] = true;
            }
        }
    }
    let grid = VoxelGrid::from_occupancy(dims, occ).map_err(|e| e.to_string())?;
    let field = build_distance_field(&grid, Connectivity::Six).map_err(|e| e.to_string())?;
    for j in 1..=5usize {
        for i in 1..=len {
            let want = (i - 1).min(len - i).min(j - 1).min(5 - j).min(2) as i32;
            ensure!(field.value([i, j, 3]) == want, "shell at ({i},{j},3) is {} not {want}", field.value([i, j, 3]));
        }
    }

    let (radius, apex_y, start_x, z) = (7.5f64, 3.0, 1.0, 3.0);
    let apex_x = start_x + radius * (5.0 / radius).sin();
    let at = |s: f64| {
        let t = (s - 5.0) / radius;
        Point3::new(apex_x + radius * t.sin(), apex_y - radius * (1.0 - t.cos()), z)
    };
    let channel = arc_through_points(at(0.0), at(5.0), at(11.0)).map_err(|e| e.to_string())?;
    ensure!((channel.radius() - radius).abs() < 1e-9, "radius {}", channel.radius());
    let score = score_channel(&channel, &field, 1.0);
    let expected = vec![0, 1, 1, 2, 2, 2, 2, 2, 1, 1, 0, 0];
    ensure!(score.vdva == expected, "vdva {:?}", score.vdva);
    ensure!(score.csv == 0, "csv {}", score.csv);
    within(Duration::from_secs(1), start, "worked example")?;
    Ok(format!("vdva {:?}, csv {}", score.vdva, score.csv))
}

fn distance_field_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(0x5eed_0002);
    let (mut grids, mut voxels, mut mismatches, mut deepest) = (0, 0usize, 0usize, 0);
    let mut full_size = 0;
    while grids < 60 {
        // Every fourth grid is forced to the full 32³.
        let grid = if grids % 4 == 0 {
            let g = random_grid(&mut rng, 32);
            full_size += 1;
            let occ: Vec<bool> = (0..32 * 32 * 32)
                .map(|i| {
                    let [x, y, z] = [i % 32, (i / 32) % 32, i / 1024];
                    let [nx, ny, nz] = g.dims();
                    g.is_occupied([x % nx, y % ny, z % nz])
                })
                .collect();
            VoxelGrid::from_occupancy([32, 32, 32], occ).unwrap()
        } else {
            random_grid(&mut rng, 32)
        };
        let field = build_distance_field(&grid, Connectivity::Six).map_err(|e| e.to_string())?;
        let oracle = brute_force_depths(&grid, Connectivity::Six);
        voxels += grid.occupied_count();
        mismatches += field.values().iter().zip(&oracle).filter(|(a, b)| a != b).count();
        deepest = deepest.max(field.max_depth());
        grids += 1;
    }
    ensure!(mismatches == 0, "{mismatches} mismatching voxels");
    within(Duration::from_secs(30), start, "60 grids")?;
    Ok(format!(
        "{grids} grids ({full_size} at 32³), {voxels} occupied voxels, max depth {deepest}, 0 mismatches"
    ))
}

fn arc_geometry_properties() -> Outcome {
    let mut rng = rng(0x5eed_0003);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| {
        Point3::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0))
    };
    let (mut arcs, mut samples, mut worst) = (0, 0usize, 0.0f64);
    while arcs < 1000 {
        let (a, b, c) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let Channel::Arc(arc) = arc_through_points(a, b, c).map_err(|e| e.to_string())? else {
            continue;
        };
        let r = arc.radius;
        let radial = |p: &Point3<f64>| ((p - arc.center).norm() - r).abs() / r;
        let planar = |p: &Point3<f64>| (p - arc.center).dot(&arc.normal).abs() / r;
        for p in [a, b, c] {
            worst = worst.max(radial(&p)).max(planar(&p));
        }
        let channel = Channel::Arc(arc.clone());
        for p in channel.samples(channel.length() / 64.0) {
            worst = worst.max(radial(&p)).max(planar(&p));
            samples += 1;
        }
        arcs += 1;
    }
    ensure!(worst <= 1e-9, "worst relative deviation {worst:e}");

    for _ in 0..1000 {
        let (a, c) = (point(&mut rng), point(&mut rng));
        let b = a + (c - a) * rng.gen_range(0.05..0.95);
        let channel = arc_through_points(a, b, c).map_err(|e| e.to_string())?;
        ensure!(channel.is_straight() && channel.curvature() == 0.0, "collinear triple gave {channel:?}");
    }
    Ok(format!("1000 arcs, {samples} samples, worst deviation {worst:.1e}·R; 1000 collinear → straight"))
}

fn straight_as_degenerate_arc() -> Outcome {
    let (mesh, _) = thick_plate_case();
    let planner = Planner::new(&mesh, PlanConfig::default()).map_err(|e| e.to_string())?;
    let field = planner.field();
    let occupied: Vec<Point3<f64>> = (0..field.grid().len())
        .filter(|&i| field.values()[i] != OUTSIDE)
        .map(|i| field.grid().center(field.grid().coords(i)))
        .collect();
    let mut rng = rng(0x5eed_0004);
    let jitter = |rng: &mut rand_chacha::ChaCha8Rng| {
        let p = occupied[rng.gen_range(0..occupied.len())];
        p + Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
    };
    let (mut feasible, mut samples) = (0, 0);
    for _ in 0..100 {
        let (a, b) = (jitter(&mut rng), jitter(&mut rng));
        let straight = straight_through_points(a, b).map_err(|e| e.to_string())?;
        let curve = straight.to_curve();
        ensure!(curve.curvature == 0.0, "straight channel has curvature {}", curve.curvature);
        let direct = score_channel(&straight, field, 1.0);
        let via_curve = score_points(curve.samples(1.0), field);
        ensure!(direct == via_curve, "scores differ for {a:?} → {b:?}");
        feasible += usize::from(direct.feasible);
        samples += direct.vdva.len();
    }
    Ok(format!("100 pairs ({feasible} feasible), {samples} samples, identical vdva"))
}

/// Selection key computed from the full vdva: csv, fewest minima, highest mean, lowest
/// index. `Less` means `a` ranks first.
fn brute_force_rank(a: &(CandidateIndex, Vec<i32>), b: &(CandidateIndex, Vec<i32>)) -> Ordering {
    let stats = |v: &[i32]| {
        let csv = *v.iter().min().unwrap();
        (csv, v.iter().filter(|&&x| x == csv).count(), v.iter().map(|&x| x as i64).sum::<i64>(), v.len() as i64)
    };
    let (ca, na, sa, la) = stats(&a.1);
    let (cb, nb, sb, lb) = stats(&b.1);
    cb.cmp(&ca)
        .then(na.cmp(&nb))
        .then((sb * la).cmp(&(sa * lb)))
        .then(a.0.cmp(&b.0))
}

fn candidates(lattices: &SeedLattices, mode: Mode) -> Vec<iafc_core::CandidateRef> {
    let mut out = Vec::new();
    for e in 0..lattices.entry.len() {
        for x in 0..lattices.exit.len() {
            match mode {
                Mode::Straight => out.extend(straight_candidate(lattices, e, x)),
                Mode::Arc => {
                    for m in 0..lattices.middle.len() {
                        out.extend(arc_candidate(lattices, e, m, x));
                    }
                }
            }
        }
    }
    out
}

fn lexicographic_selection() -> Outcome {
    let mut rng = rng(0x5eed_0005);
    let surface = LatticeParams::new(1, 5, 2.0);
    let middle = LatticeParams::new(1, 5, 1.0);
    let cases = [
        ("thin", thin_plate_case(), 1),
        ("thin", thin_plate_case(), 0),
        ("thick", thick_plate_case(), 1),
        ("thick", thick_plate_case(), 4),
    ];
    let mut checked = 0;
    for (name, (mesh, seeds), min_csv) in cases {
        let seeds = with_lattices(seeds, surface, middle);
        let config = PlanConfig { min_csv, ..Default::default() };
        let planner = Planner::new(&mesh, config).map_err(|e| e.to_string())?;
        let lattices = planner.lattices(&seeds).map_err(|e| e.to_string())?;
        for mode in [Mode::Arc, Mode::Straight] {
            let pool = candidates(&lattices, mode);
            ensure!(pool.len() <= 125, "{} candidates", pool.len());
            let scored: Vec<ScoredCandidate> = pool
                .iter()
                .map(|c| ScoredCandidate {
                    candidate: c.clone(),
                    summary: ScoreSummary::of_channel(&c.channel, planner.field(), 1.0),
                })
                .collect();
            let mut ranked: Vec<(CandidateIndex, Vec<i32>)> = pool
                .iter()
                .map(|c| (c.index, score_channel(&c.channel, planner.field(), 1.0).vdva))
                .filter(|(_, v)| !v.contains(&OUTSIDE) && *v.iter().min().unwrap() >= min_csv)
                .collect();
            ranked.sort_by(brute_force_rank);
            let expected = ranked.first().map(|r| r.0);

            let mut order = scored.clone();
            for trial in 0..25 {
                if trial > 0 {
                    order.shuffle(&mut rng);
                }
                let got = select_best(order.iter().cloned(), min_csv).ok().map(|s| s.best.candidate.index);
                ensure!(
                    got == expected,
                    "{name}/{mode:?}/min_csv {min_csv}: selected {got:?}, brute force {expected:?} (trial {trial})"
                );
                if let Ok(sel) = select_best(order.iter().cloned(), min_csv) {
                    ensure!(sel.counts.eligible == ranked.len(), "eligible {} vs {}", sel.counts.eligible, ranked.len());
                }
            }
            let report = planner.plan(&seeds, mode).map_err(|e| e.to_string())?;
            let planned = report.selected().map(|s| CandidateIndex {
                entry: s.seeds.entry_index,
                middle: s.seeds.middle_index,
                exit: s.seeds.exit_index,
            });
            ensure!(planned == expected, "{name}/{mode:?}: planner chose {planned:?}, brute force {expected:?}");
            checked += 1;
        }
    }
    Ok(format!("{checked} candidate pools × 25 orderings agree with brute-force sort"))
}

/// Lower bound on the distance from `p` to the default plate: the plate lies inside the
/// annular slab 56 ≤ r ≤ 64, |z| ≤ 12.
fn thin_plate_clearance(p: &Point3<f64>) -> f64 {
    let r = p.x.hypot(p.y);
    (56.0 - r).max(r - 64.0).max(p.z.abs() - 12.0)
}

fn thin_plate_dichotomy() -> Outcome {
    let start = Instant::now();
    let (mesh, seeds) = thin_plate_case();
    let planner = Planner::new(&mesh, PlanConfig::default()).map_err(|e| e.to_string())?;
    let lattices = planner.lattices(&seeds).map_err(|e| e.to_string())?;

    // Analytic pre-check: some sample of every straight candidate sits farther outside the
    // plate than a voxel half-diagonal (plus polygonization slack), so its voxel is empty.
    let margin = 3f64.sqrt() / 2.0 + 0.01;
    for e in &lattices.entry {
        for x in &lattices.exit {
            let segment = straight_through_points(e.position, x.position).map_err(|e| e.to_string())?;
            let escapes = segment.samples(1.0).any(|p| thin_plate_clearance(&p) > margin);
            ensure!(escapes, "analytic oracle: segment {:?} → {:?} may stay inside", e.position, x.position);
        }
    }

    let cmp = planner.compare(&seeds).map_err(|e| e.to_string())?;
    let arc_csv = cmp.arc.csv.ok_or("arc mode found no channel")?;
    ensure!(arc_csv >= 1, "arc csv {arc_csv}");
    match &cmp.straight.outcome {
        PlanOutcome::Infeasible { reason } => ensure!(reason.contains("no viable channel"), "reason {reason:?}"),
        PlanOutcome::Selected(s) => return Err(format!("straight mode selected csv {}", s.score.csv)),
    }
    within(Duration::from_secs(60), start, "thin plate")?;
    Ok(format!(
        "arc csv {arc_csv} (length {:.1} mm, curvature {:.4}/mm); straight: no viable channel over {} pairs",
        cmp.arc.length_mm.unwrap_or_default(),
        cmp.arc.curvature_per_mm.unwrap_or_default(),
        lattices.entry.len() * lattices.exit.len()
    ))
}

fn best_csv(pool: &[iafc_core::CandidateRef], field: &VoxelDistanceField) -> Option<i32> {
    pool.iter()
        .map(|c| score_channel(&c.channel, field, 1.0))
        .filter(|s| s.feasible)
        .map(|s| s.csv)
        .max()
}

fn thick_plate_dominance() -> Outcome {
    let (mesh, seeds) = thick_plate_case();
    let planner = Planner::new(&mesh, PlanConfig::default()).map_err(|e| e.to_string())?;
    let cmp = planner.compare(&seeds).map_err(|e| e.to_string())?;
    let (arc, straight) = (cmp.arc.csv.ok_or("no arc")?, cmp.straight.csv.ok_or("no straight")?);
    ensure!(arc >= straight, "full lattices: arc csv {arc} < straight csv {straight}");

    let sparse = with_lattices(seeds, LatticeParams::new(4, 4, 3.0), LatticeParams::new(3, 3, 2.0));
    let lattices = planner.lattices(&sparse).map_err(|e| e.to_string())?;
    let arcs = candidates(&lattices, Mode::Arc);
    let straights = candidates(&lattices, Mode::Straight);
    let best_arc = best_csv(&arcs, planner.field()).ok_or("no feasible arc")?;
    let best_straight = best_csv(&straights, planner.field()).ok_or("no feasible straight")?;
    ensure!(best_arc >= best_straight, "exhaustive: arc {best_arc} < straight {best_straight}");
    let sparse_cmp = planner.compare(&sparse).map_err(|e| e.to_string())?;
    ensure!(
        sparse_cmp.arc.csv == Some(best_arc) && sparse_cmp.straight.csv == Some(best_straight),
        "planner csv {:?}/{:?} vs exhaustive {best_arc}/{best_straight}",
        sparse_cmp.arc.csv,
        sparse_cmp.straight.csv
    );
    Ok(format!(
        "full: arc {arc} ≥ straight {straight}; exhaustive over {} arcs / {} lines: {best_arc} ≥ {best_straight}",
        arcs.len(),
        straights.len()
    ))
}

/// Serializes, parses, and recomputes length, curvature and csv from the parsed geometry.
fn round_trip(report: &PlanReport, field: &VoxelDistanceField, step: f64) -> Result<(), String> {
    let json = serde_json::to_string(report).map_err(|e| e.to_string())?;
    let parsed: PlanReport = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    ensure!(&parsed == report, "parsed report differs");
    let Some(selected) = parsed.selected() else {
        ensure!(parsed.csv.is_none() && parsed.length_mm.is_none(), "infeasible report carries values");
        return Ok(());
    };
    let rebuilt = match &selected.channel {
        Channel::Arc(a) => arc_through_points(a.entry, a.mid, a.exit),
        Channel::Straight(s) => straight_through_points(s.entry, s.exit),
    }
    .map_err(|e| e.to_string())?;
    ensure!(parsed.length_mm == Some(rebuilt.length()), "length {:?} vs {}", parsed.length_mm, rebuilt.length());
    ensure!(
        parsed.curvature_per_mm == Some(rebuilt.curvature()),
        "curvature {:?} vs {}",
        parsed.curvature_per_mm,
        rebuilt.curvature()
    );
    let rescored = score_channel(&rebuilt, field, step);
    ensure!(parsed.csv == Some(rescored.csv), "csv {:?} vs {}", parsed.csv, rescored.csv);
    ensure!(parsed.vdva.as_ref() == Some(&rescored.vdva), "vdva differs");
    let polyline: Vec<_> = rebuilt.samples(step).collect();
    ensure!(selected.polyline == polyline, "polyline differs");
    Ok(())
}

fn report_round_trip() -> Outcome {
    let mut checked = 0;
    let mut feasible = 0;
    let small = (LatticeParams::new(5, 5, 2.0), LatticeParams::new(4, 4, 1.0));
    for (name, (mesh, seeds)) in [("thin plate", thin_plate_case()), ("thick plate", thick_plate_case())] {
        let seeds = with_lattices(seeds, small.0, small.1);
        let planner = Planner::new(&mesh, PlanConfig::default()).map_err(|e| e.to_string())?;
        let cmp = planner.compare(&seeds).map_err(|e| e.to_string())?;
        for report in [&cmp.arc, &cmp.straight] {
            round_trip(report, planner.field(), 1.0).map_err(|e| format!("{name} {:?}: {e}", report.mode))?;
            checked += 1;
            feasible += usize::from(report.is_feasible());
        }
    }
    Ok(format!(
        "{checked} reports ({feasible} with a channel) recompute length/curvature/csv exactly; \
         patient-specific table values need the original CT models and are not reproduced"
    ))
}

fn scale_target() -> Outcome {
    let (mesh, seeds) = large_plate_case();
    let run = |workers: Option<usize>| -> Result<(PlanReport, Duration), String> {
        let config = PlanConfig { workers, ..Default::default() };
        let planner = Planner::new(&mesh, config).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let report = planner.plan(&seeds, Mode::Arc).map_err(|e| e.to_string())?;
        Ok((report, start.elapsed()))
    };
    let (report, took) = run(None)?;
    let counts = report.stage_counts;
    ensure!(counts.enumerated == 1_000_000, "{} candidates enumerated", counts.enumerated);
    ensure!(took < Duration::from_secs(60), "enumerate+score+select took {took:?}");
    let length = report.length_mm.ok_or("no channel selected")?;
    for workers in [1, 3] {
        let (other, _) = run(Some(workers))?;
        ensure!(
            other.outcome == report.outcome && other.stage_counts == counts,
            "{workers} workers selected a different channel"
        );
    }
    Ok(format!(
        "{} candidates in {:.1}s, selected length {length:.1} mm csv {}, same result with 1 and 3 workers",
        counts.enumerated,
        took.as_secs_f64(),
        report.csv.unwrap_or(OUTSIDE)
    ))
}
