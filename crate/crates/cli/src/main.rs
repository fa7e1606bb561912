//! Batch command line for segment/mesh intersection runs: dataset IO,
//! synthetic scenes, engine and reference runs, BVH inspection.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 BVH integrity
//! failure, 4 engine/reference divergence.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use segmesh::diagnostics::{dump_tree, emit_dot};
use segmesh::io::{load_dataset, save_results, DatasetPaths};
use segmesh::lbvh::build_bvh;
use segmesh::query::{run_pipeline, HitResult, PipelineError, QueryConfig, QueryMode};
use segmesh::scene::{synthesize_scene, SurfaceParams};
use segmesh::{oracle, Mesh, SegmentBatch};

#[derive(Parser)]
#[command(
    name = "segmesh",
    version,
    about = "Batched segment / triangle-mesh intersection tester"
)]
struct Cli {
    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the BVH-accelerated engine and report timings.
    Run(RunArgs),
    /// Build the BVH and print its integrity report.
    Validate(SceneArgs),
    /// Print the decoded contents of every BVH node.
    Dump(SceneArgs),
    /// Write the BVH structure as a DOT graph.
    Graph(GraphArgs),
    /// Run the exhaustive reference engine (slow).
    Oracle(RunArgs),
    /// Run both engines and report any divergence.
    Compare(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Boolean,
    Barycentric,
    #[value(name = "intercept_count")]
    InterceptCount,
}

impl From<ModeArg> for QueryMode {
    fn from(m: ModeArg) -> QueryMode {
        match m {
            ModeArg::Boolean => QueryMode::Boolean,
            ModeArg::Barycentric => QueryMode::Barycentric,
            ModeArg::InterceptCount => QueryMode::InterceptCount,
        }
    }
}

/// Where the mesh and segments come from: four binary files, or the
/// synthetic generator.
#[derive(Args)]
struct SceneArgs {
    /// Vertex file (packed f32 xyz triples, little-endian).
    #[arg(long)]
    vertices: Option<PathBuf>,
    /// Triangle file (packed u32 index triples).
    #[arg(long)]
    triangles: Option<PathBuf>,
    /// Segment start points (packed f32 xyz triples).
    #[arg(long)]
    from: Option<PathBuf>,
    /// Segment end points (packed f32 xyz triples).
    #[arg(long)]
    to: Option<PathBuf>,
    /// Generate a synthetic scene with N segments instead of loading files.
    #[arg(long, value_name = "N")]
    synthesize: Option<usize>,
    /// Seed for the synthetic generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic terrain grid as WxH vertices.
    #[arg(long, value_parser = parse_grid, default_value = "122x122")]
    grid: (u32, u32),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Query mode.
    #[arg(long, value_enum, default_value = "boolean")]
    mode: ModeArg,
    /// Result output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate the intersection predicate in 64-bit floats.
    #[arg(long)]
    double_precision: bool,
    /// Per-segment candidate list capacity.
    #[arg(long, value_name = "C", default_value_t = segmesh::query::DEFAULT_CANDIDATE_CAPACITY)]
    candidate_cap: usize,
    /// Print the decoded BVH nodes after the run.
    #[arg(long)]
    examine_bvh: bool,
    /// Also write the BVH as a DOT graph to this path.
    #[arg(long, value_name = "PATH")]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output .gv path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if w < 2 || h < 2 {
        return Err("grid must be at least 2x2".into());
    }
    Ok((w, h))
}

enum CliError {
    Usage(String),
    Data(String),
    Integrity(String),
    Divergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Integrity(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Integrity(m)
            | CliError::Divergence(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Data(d) => CliError::Data(d.to_string()),
            PipelineError::Integrity { report } => CliError::Integrity(report.to_string()),
        }
    }
}

impl SceneArgs {
    fn resolve(&self) -> Result<(Mesh, SegmentBatch), CliError> {
        if let Some(n_rays) = self.synthesize {
            let params = SurfaceParams {
                grid_w: self.grid.0,
                grid_h: self.grid.1,
                ..Default::default()
            };
            return Ok(synthesize_scene(n_rays, &params, self.seed));
        }
        match (&self.vertices, &self.triangles, &self.from, &self.to) {
            (Some(v), Some(t), Some(f), Some(o)) => {
                let paths = DatasetPaths {
                    vertices: v.clone(),
                    triangles: t.clone(),
                    rays_from: f.clone(),
                    rays_to: o.clone(),
                };
                load_dataset(&paths).map_err(|e| CliError::Data(e.to_string()))
            }
            _ => Err(CliError::Usage(
                "provide --vertices/--triangles/--from/--to, or --synthesize N".into(),
            )),
        }
    }
}

fn intersection_count(result: &HitResult) -> usize {
    match result {
        HitResult::Boolean(bits) => bits.iter().filter(|&&b| b).count(),
        HitResult::Barycentric(hits) => hits.len(),
        HitResult::InterceptCount(counts) => counts.iter().filter(|&&c| c > 0).count(),
    }
}

fn query_config(args: &RunArgs) -> QueryConfig {
    QueryConfig {
        mode: args.mode.into(),
        high_precision: args.double_precision,
        candidate_capacity: args.candidate_cap,
        ..Default::default()
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (mesh, batch) = args.scene.resolve()?;
    let cfg = query_config(args);
    let mut out = run_pipeline(&mesh, &batch, &cfg)?;

    if args.examine_bvh || args.graph.is_some() {
        let bvh = build_bvh(&mesh).map_err(|e| CliError::Data(e.to_string()))?;
        if args.examine_bvh {
            print!("{}", dump_tree(&bvh));
        }
        if let Some(path) = &args.graph {
            std::fs::write(path, emit_dot(&bvh)).map_err(|e| CliError::Data(e.to_string()))?;
            println!("wrote BVH graph to {}", path.display());
        }
    }

    if let Some(path) = &args.out {
        let t0 = Instant::now();
        save_results(&out.result, path).map_err(|e| CliError::Data(e.to_string()))?;
        out.timings.io = t0.elapsed();
    }

    println!(
        "segments: {}, triangles: {}",
        batch.len(),
        mesh.n_triangles()
    );
    println!("intersections: {}", intersection_count(&out.result));
    println!(
        "predicate tests per segment: {:.2} ({} segment(s) fell back to exhaustive scan)",
        out.stats.mt_tests as f64 / batch.len().max(1) as f64,
        out.stats.overflowed_segments
    );
    println!("stage timings:\n{}", out.timings);
    Ok(())
}

fn cmd_oracle(args: &RunArgs) -> Result<(), CliError> {
    let (mesh, batch) = args.scene.resolve()?;
    let cfg = query_config(args);
    let t0 = Instant::now();
    let result = oracle::brute_force(&mesh, &batch, &cfg);
    let elapsed = t0.elapsed();

    if let Some(path) = &args.out {
        save_results(&result, path).map_err(|e| CliError::Data(e.to_string()))?;
    }
    println!(
        "segments: {}, triangles: {}",
        batch.len(),
        mesh.n_triangles()
    );
    println!("intersections: {}", intersection_count(&result));
    println!("exhaustive scan took {:.3} ms", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn relative_err(a: f32, b: f32) -> f32 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-20)
}

fn divergent_segments(fast: &HitResult, slow: &HitResult) -> Vec<u32> {
    match (fast, slow) {
        (HitResult::Boolean(a), HitResult::Boolean(b)) => a
            .iter()
            .zip(b)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i as u32)
            .collect(),
        (HitResult::InterceptCount(a), HitResult::InterceptCount(b)) => a
            .iter()
            .zip(b)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i as u32)
            .collect(),
        (HitResult::Barycentric(a), HitResult::Barycentric(b)) => {
            let mut bad: Vec<u32> = Vec::new();
            if a.segment_ids != b.segment_ids {
                // Ids present on one side only are divergences.
                let in_a: std::collections::HashSet<u32> = a.segment_ids.iter().copied().collect();
                let in_b: std::collections::HashSet<u32> = b.segment_ids.iter().copied().collect();
                bad.extend(in_a.symmetric_difference(&in_b));
                bad.sort_unstable();
                return bad;
            }
            for i in 0..a.len() {
                let p = a.points[i];
                let q = b.points[i];
                if a.triangle_ids[i] != b.triangle_ids[i]
                    || relative_err(a.distances[i], b.distances[i]) > 1e-5
                    || relative_err(p.x, q.x) > 1e-5
                    || relative_err(p.y, q.y) > 1e-5
                    || relative_err(p.z, q.z) > 1e-5
                {
                    bad.push(a.segment_ids[i]);
                }
            }
            bad
        }
        _ => unreachable!("both engines ran in the same mode"),
    }
}

fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let (mesh, batch) = args.scene.resolve()?;
    let cfg = query_config(args);
    let fast = run_pipeline(&mesh, &batch, &cfg)?;
    let slow = oracle::brute_force(&mesh, &batch, &cfg);

    let bad = divergent_segments(&fast.result, &slow);
    if bad.is_empty() {
        println!(
            "identical: engine and exhaustive reference agree on {} segment(s)",
            batch.len()
        );
        Ok(())
    } else {
        let shown: Vec<String> = bad.iter().take(10).map(u32::to_string).collect();
        Err(CliError::Divergence(format!(
            "{} divergent segment(s): {}{}",
            bad.len(),
            shown.join(", "),
            if bad.len() > 10 { ", ..." } else { "" }
        )))
    }
}

fn cmd_validate(scene: &SceneArgs) -> Result<(), CliError> {
    let (mesh, _) = scene.resolve()?;
    let bvh = build_bvh(&mesh).map_err(|e| CliError::Data(e.to_string()))?;
    let report = segmesh::lbvh::bvh_validate(&bvh);
    print!("{report}");
    if report.is_clean() {
        println!(
            " ({} triangles, {} internal nodes + sentinel)",
            mesh.n_triangles(),
            mesh.n_triangles() - 1
        );
        Ok(())
    } else {
        Err(CliError::Integrity("see report above".into()))
    }
}

fn cmd_dump(scene: &SceneArgs) -> Result<(), CliError> {
    let (mesh, _) = scene.resolve()?;
    let bvh = build_bvh(&mesh).map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", dump_tree(&bvh));
    Ok(())
}

fn cmd_graph(args: &GraphArgs) -> Result<(), CliError> {
    let (mesh, _) = args.scene.resolve()?;
    let bvh = build_bvh(&mesh).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(&args.out, emit_dot(&bvh)).map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote BVH graph to {}", args.out.display());
    Ok(())
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(scene) => cmd_validate(scene),
        Command::Dump(scene) => cmd_dump(scene),
        Command::Graph(args) => cmd_graph(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: failed to build worker pool: {e}");
            return ExitCode::from(1);
        }
    };

    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
