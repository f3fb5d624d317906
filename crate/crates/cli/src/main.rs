mod config;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use iafc_core::export::{tube_mesh, write_polyline_ply};
use iafc_core::phantom::{c_plate, cuboid, torus_segment, CPlateParams, TorusSegmentParams};
use iafc_core::{
    build_distance_field, load_mesh, voxelize, Connectivity, Mode, PlanReport, Planner, Point3, TriangleMesh, Vector3,
};
use serde::Serialize;

use config::{RunConfig, RunMode};

const EXIT_NO_CHANNEL: u8 = 2;
const EXIT_ERROR: u8 = 1;
const TUBE_SIDES: usize = 16;

#[derive(Parser)]
#[command(name = "iafc", version, about = "Plan curved fixation channels through bone meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a channel from a TOML run configuration.
    Plan(PlanArgs),
    /// Plan arc and straight channels on the same field and report both.
    Compare(PlanArgs),
    /// Voxelize a mesh and write its depth field.
    Voxelize(VoxelizeArgs),
    /// Print mesh statistics.
    Inspect(InspectArgs),
    /// Write a synthetic test mesh.
    #[command(subcommand)]
    Phantom(PhantomCommand),
}

#[derive(Args)]
struct PlanArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Overrides `mode` in the configuration.
    #[arg(long, value_enum)]
    mode: Option<RunMode>,
    /// Report path; defaults to `output.report` or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Omit wall-clock timings so reports are byte-identical across runs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    polyline: Option<PathBuf>,
    #[arg(long)]
    tube: Option<PathBuf>,
    /// Write every enumerated candidate as CSV.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    dump_field: Option<PathBuf>,
}

#[derive(Args)]
struct VoxelizeArgs {
    mesh: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pitch: f64,
    #[arg(long, default_value_t = 6, value_parser = parse_connectivity)]
    connectivity: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    mesh: PathBuf,
    /// Also voxelize at this pitch and print the depth histogram.
    #[arg(long)]
    pitch: Option<f64>,
}

#[derive(Subcommand)]
enum PhantomCommand {
    Cuboid {
        #[arg(long, num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
        min: Vec<f64>,
        #[arg(long, num_args = 3, default_values_t = [40.0, 20.0, 20.0])]
        size: Vec<f64>,
        #[command(flatten)]
        out: PhantomOut,
    },
    CPlate {
        #[arg(long, default_value_t = CPlateParams::default().thickness)]
        thickness: f64,
        #[arg(long, default_value_t = CPlateParams::default().mid_radius)]
        radius: f64,
        #[arg(long, default_value_t = CPlateParams::default().width)]
        width: f64,
        #[arg(long, default_value_t = CPlateParams::default().sweep_deg)]
        sweep: f64,
        #[arg(long, default_value_t = CPlateParams::default().segments)]
        segments: usize,
        #[command(flatten)]
        out: PhantomOut,
    },
    TorusSegment {
        #[arg(long, default_value_t = TorusSegmentParams::default().tube_radius)]
        tube_radius: f64,
        #[arg(long, default_value_t = TorusSegmentParams::default().mid_radius)]
        radius: f64,
        #[arg(long, default_value_t = TorusSegmentParams::default().sweep_deg)]
        sweep: f64,
        #[arg(long, default_value_t = TorusSegmentParams::default().segments)]
        segments: usize,
        #[arg(long, default_value_t = TorusSegmentParams::default().sides)]
        sides: usize,
        #[command(flatten)]
        out: PhantomOut,
    },
}

#[derive(Args)]
struct PhantomOut {
    #[arg(long)]
    out: PathBuf,
    /// Write ASCII instead of binary STL.
    #[arg(long)]
    ascii: bool,
}

fn parse_connectivity(s: &str) -> Result<u8, String> {
    let v: u8 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    Connectivity::try_from(v).map(|_| v)
}

/// Writes through a temporary file in the target directory so readers never see a
/// partial file.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write {}", path.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

/// `report.json` becomes `report.arc.json`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Arc => "arc",
        Mode::Straight => "straight",
    }
}

struct Outputs {
    report: Option<PathBuf>,
    polyline: Option<PathBuf>,
    tube: Option<PathBuf>,
    tube_radius: f64,
    candidates: Option<PathBuf>,
    field_dump: Option<PathBuf>,
}

impl Outputs {
    fn for_mode(&self, mode: Mode, suffixed: bool) -> Outputs {
        let adjust = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| if suffixed { with_suffix(p, mode_name(mode)) } else { p.clone() })
        };
        Outputs {
            report: adjust(&self.report),
            polyline: adjust(&self.polyline),
            tube: adjust(&self.tube),
            tube_radius: self.tube_radius,
            candidates: adjust(&self.candidates),
            field_dump: None,
        }
    }
}

fn write_channel_files(report: &PlanReport, out: &Outputs) -> Result<()> {
    let Some(selected) = report.selected() else {
        return Ok(());
    };
    if let Some(path) = &out.polyline {
        write_atomic(path, |w| Ok(write_polyline_ply(&selected.polyline, w)?))?;
    }
    if let Some(path) = &out.tube {
        let tube = tube_mesh(&selected.polyline, out.tube_radius, TUBE_SIDES)?;
        write_atomic(path, |w| Ok(tube.write_binary_stl(w)?))?;
    }
    Ok(())
}

fn write_candidates(planner: &Planner, seeds: &iafc_core::SeedSpec, mode: Mode, path: &Path) -> Result<()> {
    let rows = planner.candidate_table(seeds, mode)?;
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in &rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn run_plan(args: PlanArgs, forced: Option<RunMode>) -> Result<u8> {
    let config = RunConfig::load(&args.config)?;
    let mut planner_config = config.planner.clone();
    if args.workers.is_some() {
        planner_config.workers = args.workers;
    }
    config.validate()?;
    planner_config.validate()?;
    let seeds = config.seed_spec()?;
    let mode = forced.or(args.mode).or(config.mode).unwrap_or(RunMode::Arc);
    let out = Outputs {
        report: args.out.or(config.output.report),
        polyline: args.polyline.or(config.output.polyline),
        tube: args.tube.or(config.output.tube),
        tube_radius: config.output.tube_radius.unwrap_or(1.0),
        candidates: args.candidates.or(config.output.candidates),
        field_dump: args.dump_field.or(config.output.field_dump),
    };

    let mesh = load_mesh(&config.mesh)?;
    let planner = Planner::new(&mesh, planner_config)?;
    if let Some(path) = &out.field_dump {
        write_atomic(path, |w| Ok(planner.field().write_dump(w)?))?;
    }

    match mode.single() {
        Some(m) => {
            let mut report = planner.plan(&seeds, m)?;
            if args.deterministic {
                report.timing = None;
            }
            let out = out.for_mode(m, false);
            write_json(out.report.as_deref(), &report)?;
            write_channel_files(&report, &out)?;
            if let Some(path) = &out.candidates {
                write_candidates(&planner, &seeds, m, path)?;
            }
            summarize(&report);
            Ok(if report.is_feasible() { 0 } else { EXIT_NO_CHANNEL })
        }
        None => {
            let mut comparison = planner.compare(&seeds)?;
            if args.deterministic {
                comparison.arc.timing = None;
                comparison.straight.timing = None;
            }
            write_json(out.report.as_deref(), &comparison)?;
            for report in [&comparison.arc, &comparison.straight] {
                let out = out.for_mode(report.mode, true);
                write_channel_files(report, &out)?;
                if let Some(path) = &out.candidates {
                    write_candidates(&planner, &seeds, report.mode, path)?;
                }
                summarize(report);
            }
            if let Some(delta) = comparison.csv_delta {
                eprintln!("csv delta (arc - straight): {delta}");
            }
            let any = comparison.arc_feasible || comparison.straight_feasible;
            Ok(if any { 0 } else { EXIT_NO_CHANNEL })
        }
    }
}

fn summarize(report: &PlanReport) {
    let mode = mode_name(report.mode);
    match (report.csv, report.length_mm, report.curvature_per_mm) {
        (Some(csv), Some(len), Some(k)) => {
            eprintln!("{mode}: csv {csv}, length {len:.2} mm, curvature {k:.5} /mm")
        }
        _ => eprintln!(
            "{mode}: no viable channel ({} candidates, {} feasible)",
            report.stage_counts.enumerated, report.stage_counts.feasible
        ),
    }
}

fn run_voxelize(args: VoxelizeArgs) -> Result<u8> {
    let connectivity = Connectivity::try_from(args.connectivity).map_err(anyhow::Error::msg)?;
    let mesh = load_mesh(&args.mesh)?;
    let field = build_distance_field(&voxelize(&mesh, args.pitch)?, connectivity)?;
    write_atomic(&args.out, |w| Ok(field.write_dump(w)?))?;
    let dims = field.grid().dims();
    eprintln!(
        "{}x{}x{} voxels, {} occupied, max depth {}",
        dims[0],
        dims[1],
        dims[2],
        field.grid().occupied_count(),
        field.max_depth()
    );
    Ok(0)
}

fn run_inspect(args: InspectArgs) -> Result<u8> {
    let mesh = load_mesh(&args.mesh)?;
    let (lo, hi) = mesh.bounds();
    println!("triangles: {}", mesh.triangle_count());
    println!("vertices: {}", mesh.vertices().len());
    println!("bounds: [{}, {}, {}] .. [{}, {}, {}]", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
    println!("volume_mm3: {:.3}", mesh.signed_volume());
    println!("sha256: {}", mesh.content_hash());
    if let Some(pitch) = args.pitch {
        let grid = voxelize(&mesh, pitch)?;
        let field = build_distance_field(&grid, Connectivity::Six)?;
        println!("occupied_voxels: {}", grid.occupied_count());
        println!("max_depth: {}", field.max_depth());
        for (depth, count) in field.depth_histogram().iter().enumerate() {
            println!("depth {depth}: {count}");
        }
    }
    Ok(0)
}

fn write_mesh(mesh: &TriangleMesh, out: &PhantomOut) -> Result<u8> {
    write_atomic(&out.out, |w| {
        if out.ascii {
            Ok(mesh.write_ascii_stl(w, "phantom")?)
        } else {
            Ok(mesh.write_binary_stl(w)?)
        }
    })?;
    eprintln!("{} triangles written to {}", mesh.triangle_count(), out.out.display());
    Ok(0)
}

fn run_phantom(cmd: PhantomCommand) -> Result<u8> {
    match cmd {
        PhantomCommand::Cuboid { min, size, out } => {
            let mesh = cuboid(Point3::new(min[0], min[1], min[2]), Vector3::new(size[0], size[1], size[2]))?;
            write_mesh(&mesh, &out)
        }
        PhantomCommand::CPlate {
            thickness,
            radius,
            width,
            sweep,
            segments,
            out,
        } => {
            let mesh = c_plate(&CPlateParams {
                thickness,
                mid_radius: radius,
                width,
                sweep_deg: sweep,
                segments,
            })?;
            write_mesh(&mesh, &out)
        }
        PhantomCommand::TorusSegment {
            tube_radius,
            radius,
            sweep,
            segments,
            sides,
            out,
        } => {
            let mesh = torus_segment(&TorusSegmentParams {
                tube_radius,
                mid_radius: radius,
                sweep_deg: sweep,
                segments,
                sides,
            })?;
            write_mesh(&mesh, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => run_plan(args, None),
        Command::Compare(args) => run_plan(args, Some(RunMode::Compare)),
        Command::Voxelize(args) => run_voxelize(args),
        Command::Inspect(args) => run_inspect(args),
        Command::Phantom(cmd) => run_phantom(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
