use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{error, info};
use msad::colorspace::prepare_input;
use msad::detectors::PcaMode;
use msad::heatmap::export_heatmap;
use msad::metrics::best_threshold;
use msad::scene::write_scene;
use msad::{
    detect, load_scene, synth_scene, ColorSpace, ColorSpaceId, DetectorConfig, EvalConfig, Method, SynthConfig,
};
use msad_bench::report::write_csv;
use msad_bench::{emit_report, group_means, run_matrix, InputKind, ReportFormat, RunPlan, ThermalAxis, TimingProtocol};

#[derive(Parser)]
#[command(name = "bench", version, about = "Color anomaly detection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate methods × color spaces × thermal over one or more scenes.
    Run(RunArgs),
    /// Generate a seeded synthetic occluded scene as PNGs plus a manifest.
    Synth(SynthArgs),
    /// Write score and thresholded heatmaps for one cell.
    Heatmap(HeatmapArgs),
}

#[derive(Args, Clone)]
struct DetectorArgs {
    #[arg(long, default_value_t = 33)]
    guard_win: usize,
    #[arg(long, default_value_t = 55)]
    bg_win: usize,
    /// PCA components kept (default: all channels).
    #[arg(long)]
    pca_components: Option<usize>,
    /// Score PCA residual energy instead of whitened projections.
    #[arg(long)]
    pca_residual: bool,
    #[arg(long, default_value_t = 2)]
    gmm_components: usize,
    #[arg(long, default_value_t = 2)]
    cbad_clusters: usize,
    #[arg(long, default_value_t = 200)]
    lof_neighbors: usize,
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
}

impl DetectorArgs {
    fn config(&self, seed: u64) -> DetectorConfig {
        DetectorConfig {
            guard_win: self.guard_win,
            bg_win: self.bg_win,
            pca_components: self.pca_components,
            pca_mode: if self.pca_residual {
                PcaMode::Residual
            } else {
                PcaMode::Weighted
            },
            gmm_components: self.gmm_components,
            cbad_clusters: self.cbad_clusters,
            lof_neighbors: self.lof_neighbors,
            ridge: self.ridge,
            seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scene manifests (JSON).
    #[arg(long, num_args = 1.., required = true)]
    manifest: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "rxg,rxm,rxl,pca,gmm,cbad,lof")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "rgb,hls,hsv,lab,luv,xyz,yuv")]
    spaces: Vec<ColorSpace>,
    #[arg(long, default_value = "both")]
    thermal: ThermalAxis,
    #[arg(long, value_delimiter = ',', default_value = "integral")]
    input: Vec<InputKind>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Cells evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Also write every precision-recall curve under `<out>/curves`.
    #[arg(long)]
    curves: bool,
    #[command(flatten)]
    detector: DetectorArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    density: f64,
    #[arg(long, default_value_t = 20)]
    views: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    targets: usize,
    #[arg(long, default_value_t = 10)]
    target_size: usize,
    #[arg(long, default_value_t = 24)]
    disparity: usize,
    #[arg(long, default_value_t = 0.6)]
    thermal_contrast: f64,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Output directory for PNGs and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "rxl")]
    method: Method,
    /// Color space token, with `-t` for the thermal variant (e.g. hsv-t).
    #[arg(long, default_value = "hsv-t")]
    space: ColorSpaceId,
    #[arg(long, default_value = "integral")]
    input: InputKind,
    /// Mask threshold; defaults to the F-beta optimum against the labels.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "heatmaps")]
    out: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("BENCH_THREADS") {
        let threads: usize = value.parse().with_context(|| format!("BENCH_THREADS={value:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let scenes = args
        .manifest
        .iter()
        .map(|p| load_scene(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut plan = RunPlan::new(scenes);
    plan.methods = args.methods;
    plan.colorspaces = args.spaces;
    plan.thermal = args.thermal;
    plan.inputs = args.input;
    plan.detector = args.detector.config(args.seed);
    plan.eval = EvalConfig { beta: args.beta };
    plan.timing = TimingProtocol {
        warmup: args.warmup,
        repeats: args.repeats,
    };
    plan.curves_dir = args.curves.then(|| args.out.join("curves"));
    plan.jobs = args.jobs;
    plan.seed = args.seed;

    let result = run_matrix(&plan).map_err(anyhow::Error::msg)?;
    for f in &result.failures {
        error!(
            "cell {} ({} {} {} {}) failed: {}",
            f.cell.index, f.scene_id, f.cell.input, f.cell.method, f.cell.space, f.error
        );
    }
    emit_report(&result.records, ReportFormat::Csv, args.out.join("results.csv"))?;
    emit_report(&result.records, ReportFormat::Json, args.out.join("results.json"))?;
    write_csv(&result.records, std::io::stdout().lock())?;
    info!(
        "{} cells ok, {} failed, {} group means",
        result.records.len(),
        result.failures.len(),
        group_means(&result.records).len()
    );
    Ok(result.failures.is_empty())
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        height: args.height,
        width: args.width,
        n_views: args.views,
        occluder_density: args.density,
        occluder_disparity: args.disparity,
        n_targets: args.targets,
        target_size: args.target_size,
        target_thermal_contrast: args.thermal_contrast,
        background_noise_sigma: args.noise,
        seed: args.seed,
    };
    let scene = synth_scene(&cfg)?;
    let manifest = write_scene(&scene, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn heatmap(args: HeatmapArgs) -> Result<()> {
    let scene = load_scene(&args.manifest).with_context(|| format!("loading {}", args.manifest.display()))?;
    let (rgb, thermal) = match args.input {
        InputKind::Integral => (scene.integral_rgb(), scene.integral_thermal()),
        InputKind::Single => {
            let mid = scene.middle_index();
            (scene.single_views[mid].clone(), scene.thermal_views.get(mid).cloned())
        }
    };
    if args.space.thermal && thermal.is_none() {
        bail!("scene {} has no thermal views", scene.id);
    }
    let image = prepare_input(&rgb, thermal.as_ref(), args.space)?;
    let scores = detect(args.method, &image, &args.detector.config(args.seed))?.scores;
    let threshold = match args.threshold {
        Some(t) => t,
        None => best_threshold(&scores, &scene.label_mask(), &EvalConfig { beta: args.beta })?.0,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let stem = format!(
        "{}_{}_{}_{}",
        scene.id,
        args.input,
        args.method.token(),
        args.space.token()
    );
    let score_path = args.out.join(format!("{stem}_score.png"));
    let mask_path = args.out.join(format!("{stem}_mask.png"));
    export_heatmap(&scores, &score_path, None)?;
    export_heatmap(&scores, &mask_path, Some(threshold))?;
    println!("{}\n{}", score_path.display(), mask_path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args).map(|_| true),
        Command::Heatmap(args) => heatmap(args).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
