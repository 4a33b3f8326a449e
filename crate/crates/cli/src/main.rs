use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pilesort::experiment::{block_metrics, parse_gripper, read_log, run, write_curves, write_log, Model};
use pilesort::features::FeatureContext;
use pilesort::feedback::{result, FeedbackConfig, Frame, Roi};
use pilesort::grasp::{apply_openings_with, weighted_sample, ScanSet, DEFAULT_NUM_ANGLES, DEFAULT_SAMPLE_SIZE};
use pilesort::heightmap::capture;
use pilesort::simworld::{generate_pile, synthesize_dropzone};
use pilesort::{ExperimentConfig, FrameStack, GripperGeometry, Heightmap, RgbMap, Scene, UnknownMask, WorldConfig};

#[derive(Parser)]
#[command(name = "pilesort", version, about = "Grasp planning and self-supervised pile sorting in simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grasp candidates for a heightmap.
    #[command(subcommand)]
    Grasp(GraspCommand),
    /// Drop-zone frame processing.
    #[command(subcommand)]
    Feedback(FeedbackCommand),
    /// The self-supervised sorting loop.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Simulated world utilities.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Subcommand)]
enum GraspCommand {
    /// Prints grasp candidates as CSV.
    Plan(PlanArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// HMAP text heightmap.
    #[arg(long)]
    heightmap: PathBuf,
    /// Gripper `key = value` file; built-in geometry when omitted.
    #[arg(long)]
    gripper: Option<PathBuf>,
    /// Binary PPM colour image aligned with the heightmap.
    #[arg(long)]
    rgb: Option<PathBuf>,
    /// Binary PBM unknown mask aligned with the heightmap.
    #[arg(long)]
    unknown: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample: usize,
    #[arg(long, default_value_t = DEFAULT_NUM_ANGLES)]
    angles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes one CSV row per candidate and layout: layout name, then values.
    #[arg(long)]
    dump_features: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FeedbackCommand {
    /// Prints `red,yellow,bluegreen,unknown` pixel counts for a frame stack.
    Process {
        /// Directory of `<n>.hmap` depth frames and `<n>.ppm` colour frames.
        #[arg(long)]
        frames: PathBuf,
        /// Region-of-interest border, pixels.
        #[arg(long, default_value_t = 10)]
        border: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Runs the loop and writes `log.csv`, `curves.csv` and `models/`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recomputes block curves from a log and prints them as CSV.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 25)]
        block_size: usize,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Writes a random pile in the scene text format.
    Pile {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Captures a scene into `heightmap.hmap`, `rgb.ppm` and `unknown.pbm`.
    Capture {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders the drop-zone frames for the objects of a scene file.
    Dropzone {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let outcome = dispatch(Cli::parse());
    // A closed stdout, as with `| head`, ends the output early.
    if let Err(e) = &outcome {
        if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) {
            return Ok(());
        }
    }
    outcome
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Grasp(GraspCommand::Plan(args)) => plan(&args),
        Command::Feedback(FeedbackCommand::Process { frames, border }) => process(&frames, border),
        Command::Experiment(ExperimentCommand::Run { config, seed, out }) => experiment(config.as_deref(), seed, &out),
        Command::Experiment(ExperimentCommand::Replay { log, block_size }) => replay(&log, block_size),
        Command::Sim(cmd) => sim(cmd),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn plan(args: &PlanArgs) -> Result<()> {
    let hm = Heightmap::read_text(open(&args.heightmap)?)?;
    let gripper = match &args.gripper {
        Some(p) => parse_gripper(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => GripperGeometry::default(),
    };
    let rgb = match &args.rgb {
        Some(p) => RgbMap::read_ppm(open(p)?)?,
        None => RgbMap::filled(hm.width(), hm.height(), pilesort::heightmap::BELT_GRAY),
    };
    let um = match &args.unknown {
        Some(p) => UnknownMask::read_pbm(open(p)?)?,
        None => UnknownMask::known(hm.width(), hm.height()),
    };
    if (rgb.width(), rgb.height()) != (hm.width(), hm.height()) || (um.width(), um.height()) != (hm.width(), hm.height()) {
        bail!("rgb and unknown maps must match the heightmap size");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let scans = ScanSet::new(&hm, &gripper, args.angles);
    let closed = scans.closed_grasps(&hm, &gripper);
    let sampled = weighted_sample(&closed, args.sample, &mut rng);
    let grasps = apply_openings_with(&sampled, &hm, &gripper, &scans);

    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "center_x,center_y,angle,inner_span,extra_opening,z,value")?;
    for g in &grasps {
        writeln!(out, "{},{},{},{},{},{},{}", g.center_x, g.center_y, g.angle, g.inner_span, g.extra_opening, g.z, g.value)?;
    }
    out.flush()?;

    if let Some(path) = &args.dump_features {
        let mut ctx = FeatureContext::new(&hm, &rgb, &um, &gripper);
        let mut w = create(path)?;
        for g in &grasps {
            let p = ctx.prepare(g);
            for f in [ctx.success_features(&p), ctx.color_features(&p)] {
                write!(w, "{}", f.layout.name())?;
                for v in &f.values {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn read_frames(dir: &Path, border: usize) -> Result<FrameStack> {
    let mut ids: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "hmap") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let n = stem.parse().with_context(|| format!("frame name {} is not a number", path.display()))?;
            ids.push((n, path));
        }
    }
    ids.sort();
    if ids.is_empty() {
        bail!("no .hmap frames in {}", dir.display());
    }
    let mut frames = Vec::with_capacity(ids.len());
    for (_, path) in ids {
        let depth = Heightmap::read_text(open(&path)?)?;
        let rgb = RgbMap::read_ppm(open(&path.with_extension("ppm"))?)?;
        frames.push(Frame { depth, rgb });
    }
    let (w, h) = (frames[0].depth.width(), frames[0].depth.height());
    Ok(FrameStack::new(frames, Roi::inset(w, h, border))?)
}

fn process(dir: &Path, border: usize) -> Result<()> {
    let stack = read_frames(dir, border)?;
    let c = result(&stack, &FeedbackConfig::default());
    println!("red,yellow,bluegreen,unknown");
    let [r, y, b, u] = c.counts;
    println!("{r},{y},{b},{u}");
    Ok(())
}

fn experiment(config: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => ExperimentConfig::from_text(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ExperimentConfig::default(),
    };
    let output = run(&cfg, seed)?;
    fs::create_dir_all(out.join("models"))?;
    write_log(create(&out.join("log.csv"))?, &output.log)?;
    let curves = block_metrics(&output.log, cfg.block_size);
    write_curves(create(&out.join("curves.csv"))?, &curves)?;
    for (name, model) in [("success", &output.models.success), ("color", &output.models.color)] {
        if let Model::Forest(f) = model {
            fs::write(out.join("models").join(format!("{name}.json")), f.to_json()?)?;
        }
    }
    eprintln!(
        "{} ticks, {} executed picks, model version {}",
        output.log.len(),
        output.executed(),
        output.models.version
    );
    if let Some(last) = curves.last() {
        let purity = last.purity.map_or("-".to_string(), |p| format!("{p:.3}"));
        eprintln!("last block: success rate {:.3}, purity {purity}", last.success_rate);
    }
    Ok(())
}

fn replay(log: &Path, block_size: usize) -> Result<()> {
    if block_size == 0 {
        bail!("block size must be positive");
    }
    let records = read_log(open(log)?)?;
    write_curves(io::stdout().lock(), &block_metrics(&records, block_size))?;
    Ok(())
}

fn read_scene(path: &Path) -> Result<Scene> {
    let w = WorldConfig::default();
    Ok(Scene::read_text(open(path)?, (w.width_px, w.height_px, w.resolution_mm))?)
}

fn sim(cmd: SimCommand) -> Result<()> {
    let world = WorldConfig::default();
    match cmd {
        SimCommand::Pile { seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scene = generate_pile(world.width_px, world.height_px, world.resolution_mm, &world.pile, &mut rng);
            let mut w = create(&out)?;
            scene.write_text(&mut w)?;
            w.flush()?;
        }
        SimCommand::Capture { scene, out } => {
            let scene = read_scene(&scene)?;
            let (hm, rgb, um) = capture(&scene, world.camera_x_mm, &world.capture);
            fs::create_dir_all(&out)?;
            let mut w = create(&out.join("heightmap.hmap"))?;
            hm.write_text(&mut w)?;
            w.flush()?;
            let mut w = create(&out.join("rgb.ppm"))?;
            rgb.write_ppm(&mut w)?;
            w.flush()?;
            let mut w = create(&out.join("unknown.pbm"))?;
            um.write_pbm(&mut w)?;
            w.flush()?;
        }
        SimCommand::Dropzone { scene, seed, out } => {
            let scene = read_scene(&scene)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stack = synthesize_dropzone(&scene.objects, &world.dropzone, &mut rng);
            fs::create_dir_all(&out)?;
            for (i, f) in stack.frames().iter().enumerate() {
                let mut w = create(&out.join(format!("{i:03}.hmap")))?;
                f.depth.write_text(&mut w)?;
                w.flush()?;
                let mut w = create(&out.join(format!("{i:03}.ppm")))?;
                f.rgb.write_ppm(&mut w)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}
