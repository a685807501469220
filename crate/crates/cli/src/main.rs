use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use linemerge::evaluation::{distance_metric, error_metric, map_quality, GridGeometry, LookupTable};
use linemerge::mapper::{filter_by_weight, map_statistics, MapStatistics};
use linemerge::scan_io::{
    export_svg, parse_carmen_log, parse_trajectory, read_correspondences, read_segment_map,
    write_carmen_log, write_correspondences, write_segment_map, write_trajectory, LaserScan,
    SegmentMapFile, Trajectory,
};
use linemerge::synth::{synthesize, SynthParams, World};
use linemerge::{run_pipeline, Config, CorrespondenceStore, MergerKind, PipelineInput, PipelineOptions, Point};

/// Line-segment maps from laser scan logs.
#[derive(Parser, Debug)]
#[command(name = "linemerge", version)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration value, e.g. `--set fusion.d_max_mm=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a map from a CARMEN log and a trajectory.
    Merge(MergeArgs),
    /// Score a map against the scans it was built from.
    Evaluate(EvaluateArgs),
    /// Draw a map as SVG, optionally over the registered scans.
    Render(RenderArgs),
    /// Generate a ray-cast log with exact and drifted trajectories.
    Synth(SynthArgs),
    /// Print segment statistics of a map file.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Merger {
    Cae,
    Oto,
    O2to,
}

impl From<Merger> for MergerKind {
    fn from(m: Merger) -> Self {
        match m {
            Merger::Cae => MergerKind::Cae,
            Merger::Oto => MergerKind::Oto,
            Merger::O2to => MergerKind::O2to,
        }
    }
}

#[derive(Args, Debug)]
struct MergeArgs {
    #[arg(long)]
    log: PathBuf,
    /// Poses used while mapping.
    #[arg(long)]
    trajectory: PathBuf,
    /// Corrected poses, applied at the `--adjust-at` scans or at the end.
    #[arg(long)]
    optimized: Option<PathBuf>,
    /// Scan index at which the corrected poses become available.
    #[arg(long = "adjust-at", value_delimiter = ',')]
    adjust_at: Vec<usize>,
    #[arg(long, value_enum, default_value = "cae")]
    merger: Merger,
    /// Output map file.
    #[arg(long)]
    out: PathBuf,
    /// Correspondence dump; defaults to the map path with a `.corr` extension.
    #[arg(long)]
    correspondences: Option<PathBuf>,
    /// Check mapper invariants after every scan.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    /// Correspondence dump written by `merge`; enables the error metrics.
    #[arg(long)]
    correspondences: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the lookup table as a PGM image.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, requires = "trajectory")]
    log: Option<PathBuf>,
    #[arg(long, requires = "log")]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// World file with `wall` and `waypoint` records.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    world: Option<PathBuf>,
    /// Built-in world: square-room or loop-corridor.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out_log: PathBuf,
    /// Exact poses.
    #[arg(long)]
    out_trajectory: PathBuf,
    /// Odometry poses.
    #[arg(long)]
    out_drifted: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Range noise standard deviation in meters.
    #[arg(long, default_value_t = 0.01)]
    range_noise: f64,
    /// Odometry heading bias in radians per meter.
    #[arg(long, default_value_t = 0.002)]
    heading_bias: f64,
    /// Relative odometry translation noise.
    #[arg(long, default_value_t = 0.01)]
    translation_noise: f64,
    /// Odometry heading noise per meter or radian of motion.
    #[arg(long, default_value_t = 0.002)]
    rotation_noise: f64,
    /// Distance between scans in meters.
    #[arg(long, default_value_t = 0.3)]
    step: f64,
    #[arg(long, default_value_t = 8.0)]
    sensor_range: f64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    map: PathBuf,
    /// Keep segments updated more than this many times; defaults to
    /// `mapper.min_updates`.
    #[arg(long)]
    min_updates: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            Config::parse(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => Config::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o).with_context(|| format!("in --set {o}"))?;
    }
    match cli.command {
        Command::Merge(a) => merge(&config, a),
        Command::Evaluate(a) => evaluate(&config, a),
        Command::Render(a) => render(&config, a),
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(&config, a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_scans(path: &Path, config: &Config) -> Result<Vec<LaserScan>> {
    parse_carmen_log(open(path)?, &config.scan).with_context(|| format!("in log {}", path.display()))
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(open(path)?).with_context(|| format!("in trajectory {}", path.display()))
}

fn load_map(path: &Path) -> Result<SegmentMapFile> {
    read_segment_map(open(path)?).with_context(|| format!("in map {}", path.display()))
}

fn config_header(config: &Config) -> Vec<String> {
    config.to_kv().into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn merge(config: &Config, a: MergeArgs) -> Result<()> {
    let scans = load_scans(&a.log, config)?;
    let trajectory = load_trajectory(&a.trajectory)?;
    let optimized = a.optimized.as_deref().map(load_trajectory).transpose()?;
    let merger: MergerKind = a.merger.into();
    let input = PipelineInput {
        scans: &scans,
        trajectory: &trajectory,
        optimized: optimized.as_ref(),
        adjust_at: &a.adjust_at,
    };
    let options = PipelineOptions {
        merger,
        extraction: config.extraction,
        thresholds: config.fusion,
        keyframe: config.keyframe,
        adjust_workers: config.adjust_workers,
        verify: a.verify,
    };
    let out = run_pipeline(input, &options)?;

    let exported = filter_by_weight(out.mapper.map(), config.min_updates);
    let store = CorrespondenceStore::from_subsets(
        out.mapper
            .store()
            .iter()
            .filter(|(i, _)| exported.get(*i).is_some())
            .map(|(i, s)| (i, s.to_vec()))
            .collect(),
    );
    let mut file = SegmentMapFile::new(exported)
        .with_metadata("merger", merger)
        .with_metadata("scans", scans.len())
        .with_metadata("keyframes", out.keyframes.len())
        .with_metadata("unfiltered_segments", out.mapper.map().len());
    for (k, v) in config.to_kv() {
        file = file.with_metadata(k, v);
    }
    let mut w = create(&a.out)?;
    write_segment_map(&file, &mut w)?;
    w.flush()?;

    let corr_path = a.correspondences.unwrap_or_else(|| a.out.with_extension("corr"));
    let mut header = vec![format!("merger = {merger}")];
    header.extend(config_header(config));
    let mut w = create(&corr_path)?;
    write_correspondences(&store, &header, &mut w)?;
    w.flush()?;

    let st = map_statistics(&file.map);
    let per_frame = out.mean_frame_time().map_or("-".to_string(), |d| format!("{:.4}", ms(d)));
    println!("{}\tper_frame_ms\ttotal_ms\tadjust_ms", MapStatistics::HEADER);
    println!(
        "{st}\t{per_frame}\t{:.3}\t{:.3}",
        ms(out.total_merge_time()),
        ms(out.adjust_time)
    );
    Ok(())
}

fn bbox(points: impl IntoIterator<Item = Point>) -> Option<(Point, Point)> {
    points.into_iter().fold(None, |acc, p| {
        Some(match acc {
            None => (p, p),
            Some((lo, hi)) => (
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            ),
        })
    })
}

fn evaluate(config: &Config, a: EvaluateArgs) -> Result<()> {
    let file = load_map(&a.map)?;
    let scans = load_scans(&a.log, config)?;
    let trajectory = load_trajectory(&a.trajectory)?;
    let eval = config.eval;
    let table = LookupTable::build(&scans, &trajectory, GridGeometry::new(eval.resolution), eval.sigma)?;

    let map_box = bbox(file.map.segments().flat_map(|s| [s.start(), s.end()]));
    if let (Some((mlo, mhi)), Some((tlo, thi))) = (map_box, table.world_bounds()) {
        if mhi.x < tlo.x || thi.x < mlo.x || mhi.y < tlo.y || thi.y < mlo.y {
            eprintln!("warning: map and registered scans do not overlap; are they in the same frame?");
        }
    }
    if let Some(path) = &a.pgm {
        let mut w = create(path)?;
        table.write_pgm(&mut w)?;
        w.flush()?;
    }

    let q = map_quality(&file.map, &table, &config.fusion, &eval)?;
    let mut report = vec![
        ("segments".to_string(), file.map.len().to_string()),
        ("quality_q".into(), format!("{:.6}", q.q)),
        ("quality_percent".into(), format!("{:.4}", q.percent)),
        ("pixels".into(), q.pixels.to_string()),
        ("redundant_pixels".into(), q.redundant_pixels.to_string()),
        ("redundant_pairs".into(), q.redundant_pairs.len().to_string()),
        ("lambda".into(), eval.lambda.to_string()),
    ];
    match &a.correspondences {
        Some(path) => {
            let store = read_correspondences(open(path)?)
                .with_context(|| format!("in correspondences {}", path.display()))?;
            let e = error_metric(&file.map, &store, &trajectory)?;
            let d = distance_metric(&file.map, &store, &trajectory, eval.w_dist, eval.w_ang)?;
            report.push(("originals".into(), e.originals.to_string()));
            report.push(("error_m".into(), format!("{:.9}", e.e)));
            report.push(("distance_metric".into(), format!("{:.9}", d)));
        }
        None => eprintln!("notice: no correspondences given; the error and distance metrics need the dump written by `merge`"),
    }

    let text: String = report.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    print!("{text}");
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        for h in config_header(config) {
            writeln!(w, "# {h}")?;
        }
        w.write_all(text.as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn render(config: &Config, a: RenderArgs) -> Result<()> {
    let file = load_map(&a.map)?;
    let points = match (&a.log, &a.trajectory) {
        (Some(log), Some(traj)) => {
            let scans = load_scans(log, config)?;
            let trajectory = load_trajectory(traj)?;
            let mut pts = Vec::new();
            for s in &scans {
                pts.extend(s.world_points(trajectory.require(s.scan_index)?));
            }
            Some(pts)
        }
        _ => None,
    };
    let mut w = create(&a.out)?;
    export_svg(&file.map, points.as_deref(), &config.svg, &config_header(config), &mut w)?;
    w.flush()?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let world = match (&a.world, &a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read world {}", path.display()))?;
            World::parse(&text).with_context(|| format!("in world {}", path.display()))?
        }
        (None, Some(name)) => match World::preset(name) {
            Some(w) => w,
            None => bail!("unknown preset {name:?}; expected square-room or loop-corridor"),
        },
        (None, None) => unreachable!("clap requires --world or --preset"),
    };
    let mut params = SynthParams {
        seed: a.seed,
        range_noise: a.range_noise,
        step: a.step,
        sensor_range: a.sensor_range,
        ..Default::default()
    };
    params.drift.heading_bias_per_m = a.heading_bias;
    params.drift.translation_noise = a.translation_noise;
    params.drift.rotation_noise = a.rotation_noise;
    let out = synthesize(&world, &params)?;

    let mut header = vec![
        format!("seed = {}", a.seed),
        format!("range_noise = {}", a.range_noise),
        format!("heading_bias = {}", a.heading_bias),
        format!("translation_noise = {}", a.translation_noise),
        format!("rotation_noise = {}", a.rotation_noise),
        format!("step = {}", a.step),
        format!("sensor_range = {}", a.sensor_range),
    ];
    if let Some(lc) = out.loop_closure {
        header.push(format!("loop_closure = {lc}"));
    }
    let mut w = create(&a.out_log)?;
    write_carmen_log(&out.scans, &header, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out_trajectory)?;
    write_trajectory(&out.exact, &header, &mut w)?;
    w.flush()?;
    if let Some(path) = &a.out_drifted {
        let mut w = create(path)?;
        write_trajectory(&out.drifted, &header, &mut w)?;
        w.flush()?;
    }

    let stdout = io::stdout();
    let mut o = stdout.lock();
    writeln!(o, "scans={}", out.scans.len())?;
    match out.loop_closure {
        Some(lc) => writeln!(o, "loop_closure={lc}")?,
        None => writeln!(o, "loop_closure=-")?,
    }
    Ok(())
}

fn stats(config: &Config, a: StatsArgs) -> Result<()> {
    let file = load_map(&a.map)?;
    let min = a.min_updates.unwrap_or(config.min_updates);
    let st = map_statistics(&filter_by_weight(&file.map, min));
    println!("{}", MapStatistics::HEADER);
    println!("{st}");
    Ok(())
}
