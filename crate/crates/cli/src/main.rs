//! `mlgrowth` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical or pipeline failure,
//! 4 external plugin failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mlgrowth::diffusion::{DenoiserSpec, RegressorSpec};
use mlgrowth::mechanistic::{
    bootstrap_fit, fit_params_with, predict_quantiles, AreaSeries, BootstrapConfig,
    BootstrapEnsemble, Bounds, DecayForm, FitOptions, FitResult, Init, NoiseModel, SeriesMeta,
};
use mlgrowth::metrics::{hd95, ssim_region, wilcoxon_signed_rank, MapMode};
use mlgrowth::phantom::{generate_phantom_series, write_phantom_series, PhantomManifest, PhantomSpec};
use mlgrowth::pipeline::{
    generate_batch, grid_search, predict_from_ensemble, run_static_prediction, write_grid_csv,
    LongitudinalPair, Prediction, RunConfig, ScheduleConfig, DEFAULT_S0, DEFAULT_SOFTNESS,
    DEFAULT_TAU,
};
use mlgrowth::{BinaryMask, Error, Image2D, Result};

#[derive(Parser)]
#[command(name = "mlgrowth", version, about = "Mechanistic tumor-growth fitting and guided follow-up image synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the growth model to an area series and bootstrap it.
    Fit(FitArgs),
    /// Bootstrap percentiles of the predicted area at a time point.
    Predict(PredictArgs),
    /// One guided generation toward a tumor fraction.
    Generate(GenerateArgs),
    /// Static or dynamic growth probability map.
    Probmap(ProbmapArgs),
    /// Image and mask metrics.
    Eval {
        #[command(subcommand)]
        metric: EvalCommand,
    },
    /// Region SSIM over an NL × s_ct grid.
    Gridsearch(GridArgs),
    /// Write a synthetic longitudinal series.
    Phantom(PhantomArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Multiplicative,
    Additive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayArg {
    Gated,
    Coupled,
}

impl From<DecayArg> for DecayForm {
    fn from(d: DecayArg) -> Self {
        match d {
            DecayArg::Gated => DecayForm::Gated,
            DecayArg::Coupled => DecayForm::Coupled,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long, default_value_t = 100)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.10)]
    noise: f64,
    #[arg(long, value_enum, default_value = "multiplicative")]
    noise_model: NoiseArg,
    #[arg(long, value_enum, default_value = "gated")]
    decay_form: DecayArg,
    /// JSON file with per-parameter `{lo, hi}` intervals.
    #[arg(long)]
    bounds: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    time: f64,
    #[arg(long, value_delimiter = ',', default_value = "2.5,50,97.5")]
    quantiles: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GuidanceArgs {
    #[arg(long, default_value_t = 200)]
    nl: usize,
    #[arg(long = "s-ct", default_value_t = 50_000.0)]
    s_ct: f64,
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    beta_start: f64,
    #[arg(long, default_value_t = 0.02)]
    beta_end: f64,
    #[arg(long, default_value_t = 1.0)]
    dyn_clamp: f64,
    /// `analytic-gaussian`, `analytic-delta` or `plugin:CMD`.
    #[arg(long, default_value = "analytic-gaussian")]
    denoiser: String,
    /// `soft-area` or `plugin:CMD`.
    #[arg(long, default_value = "soft-area")]
    regressor: String,
    /// Prior standard deviation of the analytic Gaussian denoiser.
    #[arg(long, default_value_t = DEFAULT_S0)]
    s0: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_SOFTNESS)]
    softness: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SamplerArgs {
    fn run_config(&self, nl: usize, s_ct: f64) -> Result<RunConfig> {
        let cfg = RunConfig {
            nl,
            s_ct,
            dyn_clamp: self.dyn_clamp,
            schedule: ScheduleConfig {
                steps: self.steps,
                beta_start: self.beta_start,
                beta_end: self.beta_end,
            },
            seed: self.seed,
            denoiser: DenoiserSpec::parse(&self.denoiser, self.s0)?,
            regressor: RegressorSpec::parse(&self.regressor, self.tau, self.softness)?,
            segmentation_threshold: self.tau,
            workers: self.workers,
            ..RunConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    image: PathBuf,
    /// Brain mask image (nonzero = brain).
    #[arg(long)]
    mask: PathBuf,
    /// Target tumor fraction of the brain area.
    #[arg(long)]
    target: f64,
    #[command(flatten)]
    guidance: GuidanceArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Dynamic,
}

#[derive(Args)]
struct ProbmapArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Fit file from `fit` (dynamic mode).
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Prediction time in days (dynamic mode).
    #[arg(long)]
    time: Option<f64>,
    /// Target tumor fraction (static mode).
    #[arg(long)]
    target: Option<f64>,
    /// Number of generations (static mode).
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 90.0)]
    cap: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[command(flatten)]
    guidance: GuidanceArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Probability map image.
    #[arg(long)]
    out: PathBuf,
    /// Predicted tumor mask (thresholded map joined with the current tumor).
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Mean SSIM over window centres inside a region mask.
    Ssim {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 95th-percentile symmetric boundary Hausdorff distance between masks.
    Hd95 {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Defaults to the pixel spacing stored in `a`.
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired signed-rank test on two files of one number per line.
    Wilcoxon {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,500")]
    nl: Vec<usize>,
    #[arg(long = "s-ct", value_delimiter = ',', default_value = "50000,100000,500000")]
    s_ct: Vec<f64>,
    /// Phantom directory; consecutive frames form the pairs.
    #[arg(long, conflicts_with = "pairs")]
    phantom: Option<PathBuf>,
    /// JSON list of `{reference, follow_up, follow_up_mask, brain_mask}` paths.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Everything `fit` writes; `predict` and `probmap` read it back.
#[derive(Serialize, Deserialize)]
struct FitFile {
    meta: SeriesMeta,
    bounds: Bounds,
    fit: FitResult,
    ensemble: BootstrapEnsemble,
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    Ok(BinaryMask::from_image(&Image2D::load(path)?))
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let series = AreaSeries::load(&a.series, &a.meta)?;
    let bounds = match &a.bounds {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => Bounds::default_for(&series),
    };
    let fit_opts = FitOptions { decay_form: a.decay_form.into(), ..FitOptions::default() };
    let fit = fit_params_with(&series, &bounds, Init::Auto, &fit_opts)?;
    let cfg = BootstrapConfig {
        n: a.bootstrap,
        noise_sigma: a.noise,
        noise_model: match a.noise_model {
            NoiseArg::Multiplicative => NoiseModel::Multiplicative,
            NoiseArg::Additive => NoiseModel::Additive,
        },
        seed: a.seed,
        fit: fit_opts,
    };
    let ensemble = bootstrap_fit(&series, &bounds, &cfg)?;
    write_json(&FitFile { meta: series.meta(), bounds, fit, ensemble }, Some(&a.out))
}

fn load_fit(path: &Path) -> Result<FitFile> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

#[derive(Serialize)]
struct QuantileRow {
    percentile: f64,
    area_mm2: f64,
    fraction: f64,
}

#[derive(Serialize)]
struct PredictOutput {
    time_days: f64,
    n_replicates: usize,
    quantiles: Vec<QuantileRow>,
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let file = load_fit(&a.fit)?;
    let values = predict_quantiles(&file.ensemble, a.time, &a.quantiles)?;
    let quantiles = a
        .quantiles
        .iter()
        .zip(values)
        .map(|(&percentile, area_mm2)| QuantileRow {
            percentile,
            area_mm2,
            fraction: area_mm2 / file.meta.brain_area_mm2,
        })
        .collect();
    let out = PredictOutput { time_days: a.time, n_replicates: file.ensemble.len(), quantiles };
    write_json(&out, a.out.as_deref())
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = a.sampler.run_config(a.guidance.nl, a.guidance.s_ct)?;
    let reference = Image2D::load(&a.image)?;
    let brain = load_mask(&a.mask)?;
    let mut images = generate_batch(&reference, &brain, &[(a.target, cfg.seed)], &cfg)?;
    images.remove(0).save(&a.out)
}

fn run_probmap(a: &ProbmapArgs) -> Result<()> {
    let mut cfg = a.sampler.run_config(a.guidance.nl, a.guidance.s_ct)?;
    cfg.theta = a.theta;
    cfg.target_percentile_cap = a.cap;
    cfg.validate()?;
    let reference = Image2D::load(&a.image)?;
    let brain = load_mask(&a.mask)?;
    let prediction: Prediction = match a.mode {
        ModeArg::Dynamic => {
            cfg.probmap_mode = MapMode::Dynamic;
            let (Some(fit), Some(time)) = (&a.fit, a.time) else {
                return Err(Error::InvalidInput("dynamic mode needs --fit and --time".into()));
            };
            let file = load_fit(fit)?;
            predict_from_ensemble(&file.ensemble, &reference, &brain, time, &cfg)?
        }
        ModeArg::Static => {
            cfg.probmap_mode = MapMode::Static;
            let Some(target) = a.target else {
                return Err(Error::InvalidInput("static mode needs --target".into()));
            };
            run_static_prediction(&reference, &brain, target, a.repeats, &cfg)?
        }
    };
    prediction.map.to_image(reference.pixel_spacing())?.save(&a.out)?;
    if let Some(p) = &a.mask_out {
        prediction.predicted_mask.to_image(reference.pixel_spacing())?.save(p)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Scalar<'a> {
    metric: &'a str,
    value: f64,
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().map_err(|e| Error::InvalidInput(format!("{}: {l:?}: {e}", path.display()))))
        .collect()
}

fn run_eval(cmd: &EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Ssim { a, b, region, out } => {
            let value = ssim_region(&Image2D::load(a)?, &Image2D::load(b)?, &load_mask(region)?)?;
            write_json(&Scalar { metric: "ssim", value }, out.as_deref())
        }
        EvalCommand::Hd95 { a, b, spacing, out } => {
            let first = Image2D::load(a)?;
            let spacing = spacing.unwrap_or(first.pixel_spacing());
            let value = hd95(&BinaryMask::from_image(&first), &load_mask(b)?, spacing)?;
            write_json(&Scalar { metric: "hd95_mm", value }, out.as_deref())
        }
        EvalCommand::Wilcoxon { x, y, out } => {
            let result = wilcoxon_signed_rank(&read_numbers(x)?, &read_numbers(y)?)?;
            write_json(&result, out.as_deref())
        }
    }
}

#[derive(Deserialize)]
struct PairPaths {
    reference: PathBuf,
    follow_up: PathBuf,
    follow_up_mask: PathBuf,
    brain_mask: PathBuf,
}

fn relative(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_pairs(a: &GridArgs) -> Result<Vec<LongitudinalPair>> {
    if let Some(dir) = &a.phantom {
        let manifest: PhantomManifest = serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)?;
        let brain = load_mask(&dir.join(&manifest.brain_mask))?;
        return manifest
            .frames
            .windows(2)
            .map(|w| {
                Ok(LongitudinalPair {
                    reference: Image2D::load(dir.join(&w[0].image))?,
                    follow_up: Image2D::load(dir.join(&w[1].image))?,
                    follow_up_mask: load_mask(&dir.join(&w[1].mask))?,
                    brain_mask: brain.clone(),
                })
            })
            .collect();
    }
    let Some(path) = &a.pairs else {
        return Err(Error::InvalidInput("gridsearch needs --phantom or --pairs".into()));
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let list: Vec<PairPaths> = serde_json::from_slice(&std::fs::read(path)?)?;
    list.iter()
        .map(|p| {
            Ok(LongitudinalPair {
                reference: Image2D::load(relative(base, &p.reference))?,
                follow_up: Image2D::load(relative(base, &p.follow_up))?,
                follow_up_mask: load_mask(&relative(base, &p.follow_up_mask))?,
                brain_mask: load_mask(&relative(base, &p.brain_mask))?,
            })
        })
        .collect()
}

fn run_grid(a: &GridArgs) -> Result<()> {
    let (Some(&nl), Some(&s_ct)) = (a.nl.first(), a.s_ct.first()) else {
        return Err(Error::InvalidInput("--nl and --s-ct need at least one value".into()));
    };
    let cfg = a.sampler.run_config(nl, s_ct)?;
    let pairs = load_pairs(a)?;
    let rows = grid_search(&pairs, &a.nl, &a.s_ct, &cfg)?;
    write_grid_csv(&rows, &a.out)
}

fn run_phantom(a: &PhantomArgs) -> Result<()> {
    let spec: PhantomSpec = serde_json::from_slice(&std::fs::read(&a.spec)?)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let series = generate_phantom_series(&spec, a.seed)?;
    write_phantom_series(&series, spec.growth.t_rt_start, &a.out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => run_fit(&a),
        Command::Predict(a) => run_predict(&a),
        Command::Generate(a) => run_generate(&a),
        Command::Probmap(a) => run_probmap(&a),
        Command::Eval { metric } => run_eval(&metric),
        Command::Gridsearch(a) => run_grid(&a),
        Command::Phantom(a) => run_phantom(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
