use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nhrep::brep::{load_brep, normalize, save_brep, Similarity};
use nhrep::error::{Error, Result};
use nhrep::field::Checkpoint;
use nhrep::fixtures;
use nhrep::geom::Point3;
use nhrep::graph::{build_patch_graph, merge_smooth_patches};
use nhrep::implicit::{ImplicitField, TreeField};
use nhrep::iso::{extract, load_obj, GridSpec, IsoMesh};
use nhrep::metrics::{evaluate, MetricsConfig, CSV_HEADER};
use nhrep::ops::{self, BlendConfig, BlendField, BooleanOp};
use nhrep::pipeline::convert;
use nhrep::train::{write_log_csv, TrainConfig};
use nhrep::tree::{construct_tree, group_patches};

#[derive(Parser)]
#[command(name = "nhrep", version, about = "Neural halfspace representations of labeled boundary meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct GridArgs {
    /// Grid resolution per axis, a power of two.
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// Extracted level.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    iso: f64,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        let spec = GridSpec { isovalue: self.iso, escalation: Some(self.res * 2), ..GridSpec::with_resolution(self.res) };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Cube,
    CubeMinusCylinder,
    LBracket,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoolArg {
    Union,
    Intersection,
    AMinusB,
}

#[derive(Subcommand)]
enum Command {
    /// Train a checkpoint from a labeled mesh.
    Convert {
        mesh: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Training log; defaults to the checkpoint path with a .csv extension.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        preset: Preset,
        /// key = value file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable the correction loss, for noisy inputs.
        #[arg(long)]
        no_correction: bool,
    },
    /// Extract the zero level set (or `--iso`) of a checkpoint as OBJ.
    Extract {
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Score a checkpoint against its ground-truth mesh; prints one CSV row.
    Eval {
        checkpoint: PathBuf,
        truth: PathBuf,
        /// Previously extracted OBJ in the input frame; extracted afresh if absent.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Evaluate `h` at points read as "x y z" lines from a file or stdin.
    Query {
        checkpoint: PathBuf,
        points: Option<PathBuf>,
    },
    /// Extract a Boolean combination of two checkpoints.
    Boolean {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum)]
        op: BoolArg,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Extract the level set `h = --iso`.
    Offset {
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Extract the checkpoint with every crease rounded.
    Blend {
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = ops::DEFAULT_BLEND_RADIUS)]
        rho: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Print the patch graph and tree of a mesh, or the tree of a checkpoint.
    Inspect { input: PathBuf },
    /// Write a built-in test solid as a labeled mesh.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.into(), source: e }
}

/// Maps a training-frame mesh back to the checkpoint's input frame.
fn to_input_frame(mut mesh: IsoMesh, t: &Similarity) -> IsoMesh {
    let inv = t.inverse();
    for v in &mut mesh.vertices {
        *v = inv.apply(v);
    }
    mesh
}

fn extract_to(field: &dyn ImplicitField, spec: &GridSpec, t: &Similarity, output: &Path) -> Result<()> {
    let mesh = to_input_frame(extract(field, spec)?, t);
    mesh.save_obj(output)?;
    println!("{} vertices, {} triangles -> {}", mesh.vertices.len(), mesh.triangles.len(), output.display());
    Ok(())
}

fn parse_points(r: impl BufRead, path: &Path) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let xs: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
        if xs.len() != 3 {
            return Err(Error::Parse { line: n + 1, message: format!("expected 3 coordinates, got {}", xs.len()) });
        }
        out.push(Point3::new(xs[0], xs[1], xs[2]));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert { mesh, output, log, preset, config, iters, seed, no_correction } => {
            let mut cfg = match preset {
                Preset::Full => TrainConfig::default(),
                Preset::Desk => TrainConfig::desk(),
            };
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                cfg.apply_text(&text)?;
            }
            if let Some(n) = iters {
                // Keep the correction phase at the same fraction of the run.
                cfg.correction_start = (cfg.correction_start as u128 * n as u128 / cfg.iterations.max(1) as u128) as usize;
                cfg.iterations = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if no_correction {
                cfg.weights.correction = false;
            }
            let input = load_brep(&mesh)?;
            let conv = convert(&input, &cfg)?;
            conv.checkpoint.save(&output)?;
            let log = log.unwrap_or_else(|| output.with_extension("csv"));
            let mut w = create(&log)?;
            write_log_csv(&conv.training.log, &mut w).and_then(|_| w.flush()).map_err(io_err(&log))?;
            println!("tree {}", conv.checkpoint.tree.serialize());
            println!("checkpoint -> {}", output.display());
            if let Some(e) = conv.training.aborted {
                return Err(e);
            }
        }
        Command::Extract { checkpoint, output, grid } | Command::Offset { checkpoint, output, grid } => {
            let c = Checkpoint::load(&checkpoint)?;
            extract_to(&TreeField::of(&c), &grid.spec()?, &c.transform, &output)?;
        }
        Command::Eval { checkpoint, truth, mesh, name, seed, grid } => {
            let c = Checkpoint::load(&checkpoint)?;
            let truth_mesh = load_brep(&truth)?.transformed(&c.transform).to_trimesh();
            let field = TreeField::of(&c);
            let extracted = match mesh {
                Some(p) => {
                    let mut m = load_obj(&p)?;
                    for v in &mut m.vertices {
                        *v = c.transform.apply(v);
                    }
                    m
                }
                None => extract(&field, &grid.spec()?)?,
            };
            let cfg = MetricsConfig { seed, ..MetricsConfig::default() };
            let report = evaluate(&field, &extracted.to_trimesh(), &truth_mesh, &cfg)?;
            let name = name.unwrap_or_else(|| checkpoint.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
            println!("{CSV_HEADER}");
            println!("{}", report.csv_row(&name));
        }
        Command::Query { checkpoint, points } => {
            let c = Checkpoint::load(&checkpoint)?;
            let pts = match &points {
                Some(p) => parse_points(BufReader::new(File::open(p).map_err(io_err(p))?), p)?,
                None => parse_points(io::stdin().lock(), Path::new("<stdin>"))?,
            };
            let out = io::stdout();
            let mut w = BufWriter::new(out.lock());
            for (p, q) in pts.iter().zip(ops::query(&c, &pts)) {
                writeln!(w, "{} {} {} {} {}", p.x, p.y, p.z, q.value, if q.inside { "inside" } else { "outside" })
                    .map_err(io_err(Path::new("<stdout>")))?;
            }
        }
        Command::Boolean { a, b, op, output, grid } => {
            let (ca, cb) = (Checkpoint::load(&a)?, Checkpoint::load(&b)?);
            let op = match op {
                BoolArg::Union => BooleanOp::Union,
                BoolArg::Intersection => BooleanOp::Intersection,
                BoolArg::AMinusB => BooleanOp::Difference,
            };
            let (field, mismatch) = ops::boolean(&ca, &cb, op);
            if mismatch {
                eprintln!("warning: FrameMismatch: checkpoints were normalized differently");
            }
            extract_to(&field, &grid.spec()?, &ca.transform, &output)?;
        }
        Command::Blend { checkpoint, output, rho, grid } => {
            let c = Checkpoint::load(&checkpoint)?;
            let field = BlendField::of(&c, &BlendConfig { rho })?;
            extract_to(&field, &grid.spec()?, &c.transform, &output)?;
        }
        Command::Inspect { input } => {
            if input.extension().is_some_and(|e| e == "ckpt") {
                let c = Checkpoint::load(&input)?;
                println!("tree {}", c.tree.serialize());
                println!("outputs {}", c.field.output_dim());
                println!("scale {} translation {} {} {}", c.transform.scale, c.transform.translation.x, c.transform.translation.y, c.transform.translation.z);
                print!("{}", c.config);
            } else {
                let mesh = load_brep(&input)?;
                mesh.validate()?;
                let (normalized, _) = normalize(&mesh)?;
                let graph = build_patch_graph(&normalized)?;
                let (graph, merged) = merge_smooth_patches(&graph, &normalized)?;
                print!("{}", graph.dump());
                let construction = construct_tree(&graph, &merged)?;
                let grouping = group_patches(&construction.graph);
                println!("patch tree {}", construction.tree.serialize());
                println!("tree {}", construction.tree.with_slots(&grouping.slot_of).serialize());
            }
        }
        Command::Fixture { name, output } => {
            let f = match name {
                FixtureName::Cube => fixtures::unit_cube_fixture(),
                FixtureName::CubeMinusCylinder => fixtures::cube_minus_cylinder_fixture(),
                FixtureName::LBracket => fixtures::l_bracket_fixture(),
            };
            save_brep(&f.mesh, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("NHREP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
