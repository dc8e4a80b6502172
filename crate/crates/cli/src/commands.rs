use std::error::Error;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use variety::compensation::{
    compensation_study, fit_scene_kde, write_curves_csv, write_summary_csv, CompensationConfig, CompensationResult,
};
use variety::densities::{bin_samples, power_transform_binned, BinnedDensity, Density, OutOfRange, UniformBox};
use variety::learner::{
    collapse_warning, evaluate_learner, train_mon, write_trace_csv, ToyProblem, TrainSchedule, UpdateRule,
};
use variety::mon::{k_vs_n_scan, minimizing_exponent_search, write_n_scan_csv, write_scan_csv, MonConfig};
use variety::rng::{derive_seed, hash_str};
use variety::sqrt_sampling::{SquaredMode, SquaredSampler, SquaredSamplerConfig, DEFAULT_MAX_ATTEMPTS};
use variety::stats::{arange_inclusive, ks_statistic, median, normal_cdf};
use variety::trajio::{load_scenes, mon_metric, save_scenes, SceneSet, SynthConfig, SynthKind, WalkDynamics};

use crate::manifest::RunManifest;
use crate::svg::{heatmap, line_plot, Series};

pub type CmdResult = Result<(), Box<dyn Error + Send + Sync>>;

pub struct Global {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub svg: bool,
}

impl Global {
    fn start(&self, subcommand: &'static str, config: serde_json::Value, outputs: &[String]) -> CmdResult {
        fs::create_dir_all(&self.out_dir)?;
        RunManifest::new(subcommand, self.seed, config, outputs.to_vec()).write(&self.out_dir)?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn create(&self, name: &str) -> std::io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write_svg(&self, name: &str, text: String) -> std::io::Result<()> {
        fs::write(self.path(name), text)
    }

    /// Seed of the named random stream.
    fn stream(&self, name: &str, extra: &[u64]) -> u64 {
        let mut path = vec![hash_str(name)];
        path.extend_from_slice(extra);
        derive_seed(self.seed, &path)
    }
}

/// A list of numbers: `a,b,c` or an inclusive range `start:stop:step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range must be start:stop:step".into());
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err("range needs step > 0 and stop >= start".into());
        }
        arange_inclusive(a, b, step)
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err("list must hold finite numbers".into());
    }
    Ok(Grid(values))
}

fn check_kind(s: &str) -> Result<String, String> {
    s.parse::<SynthKind>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- mon-scan

#[derive(Debug, Args, Serialize)]
pub struct MonScanArgs {
    /// Candidates per MoN draw (N).
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Ground-truth sample size (M).
    #[arg(long, default_value_t = 20_000)]
    pub gt_samples: usize,
    /// Draws per ground-truth point (R).
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Dimension of the standard normal base density.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Exponents to scan: `a,b,c` or `start:stop:step`.
    #[arg(long, value_parser = parse_grid, default_value = "0.3:1.5:0.05")]
    pub k_grid: Grid,
}

pub fn mon_scan(g: &Global, a: &MonScanArgs) -> CmdResult {
    let mut outputs = vec!["mon_scan.csv".to_string()];
    if g.svg {
        outputs.push("mon_scan.svg".into());
    }
    g.start("mon-scan", json!(a), &outputs)?;
    let base = Density::standard_normal(a.dim)?;
    let gt = base.sample(a.gt_samples, g.stream("ground_truth", &[a.dim as u64]))?;
    let cfg = MonConfig::new(a.n, a.reps, g.stream("mon", &[]))?;
    let scan = minimizing_exponent_search(&base, &gt, &a.k_grid.0, &cfg)?;
    write_scan_csv(g.create("mon_scan.csv")?, &scan)?;
    if g.svg {
        let pts = scan.points.iter().map(|p| (p.k, p.estimate.value)).collect();
        let title = format!("MoN loss vs k (N = {}, dim = {})", a.n, a.dim);
        g.write_svg("mon_scan.svg", line_plot(&title, "k", "MoN loss", &[Series { name: "loss".into(), points: pts }]))?;
    }
    println!("k_star={:?}", scan.k_star);
    Ok(())
}

// ---------------------------------------------------------------- k-vs-n

#[derive(Debug, Args, Serialize)]
pub struct KVsNArgs {
    /// Dimensions of the standard normal base.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub dims: Vec<usize>,
    /// Candidate counts N, ascending.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub gt_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_parser = parse_grid, default_value = "0.3:3.0:0.05")]
    pub k_grid: Grid,
}

pub fn k_vs_n(g: &Global, a: &KVsNArgs) -> CmdResult {
    let mut outputs: Vec<String> = a.dims.iter().map(|d| format!("k_vs_n_d{d}.csv")).collect();
    outputs.push("k_star.csv".into());
    if g.svg {
        outputs.push("k_vs_n.svg".into());
    }
    g.start("k-vs-n", json!(a), &outputs)?;
    let cfg = MonConfig::new(1, a.reps, g.stream("mon", &[]))?;
    let mut summary = csv_writer(g.create("k_star.csv")?);
    summary.write_record(["dims", "N", "k_star"])?;
    let mut series = Vec::new();
    for &dim in &a.dims {
        let base = Density::standard_normal(dim)?;
        let gt = base.sample(a.gt_samples, g.stream("ground_truth", &[dim as u64]))?;
        let scans = k_vs_n_scan(&base, &gt, &a.n_list, &a.k_grid.0, &cfg)?;
        write_n_scan_csv(g.create(&format!("k_vs_n_d{dim}.csv"))?, &scans)?;
        for s in &scans {
            summary.write_record([dim.to_string(), s.n.to_string(), s.scan.k_star.to_string()])?;
            println!("dims={dim} N={} k_star={:?}", s.n, s.scan.k_star);
        }
        series.push(Series {
            name: format!("dim {dim}"),
            points: scans.iter().map(|s| ((s.n as f64).log2(), s.scan.k_star)).collect(),
        });
    }
    summary.flush()?;
    if g.svg {
        g.write_svg("k_vs_n.svg", line_plot("Minimizing exponent vs N", "log2 N", "k_star", &series))?;
    }
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

// ---------------------------------------------------------------- square-sample

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseInput {
    /// N(0, 1); the squared density is N(0, sqrt(0.5)).
    Normal,
    /// U(0, 1), which squaring leaves unchanged.
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Binned,
    Rejection,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct SquareSampleArgs {
    #[arg(long, value_enum, default_value = "normal")]
    pub input: BaseInput,
    /// Cell width (binned) or pair distance threshold (rejection).
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Output samples per mode.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

pub fn square_sample(g: &Global, a: &SquareSampleArgs) -> CmdResult {
    let modes: Vec<(SquaredMode, &str)> = match a.mode {
        ModeArg::Binned => vec![(SquaredMode::Binned, "binned")],
        ModeArg::Rejection => vec![(SquaredMode::Rejection, "rejection")],
        ModeArg::Both => vec![(SquaredMode::Binned, "binned"), (SquaredMode::Rejection, "rejection")],
    };
    let mut outputs: Vec<String> = modes.iter().map(|(_, m)| format!("squared_{m}.csv")).collect();
    outputs.push("square_sample_report.csv".into());
    g.start("square-sample", json!(a), &outputs)?;
    let (base, cdf): (Density, Box<dyn Fn(f64) -> f64>) = match a.input {
        BaseInput::Normal => (Density::standard_normal(1)?, Box::new(|x| normal_cdf(x, 0.0, 0.5f64.sqrt()))),
        BaseInput::Uniform => (Density::Uniform(UniformBox::interval(0.0, 1.0)?), Box::new(|x: f64| x.clamp(0.0, 1.0))),
    };
    let mut report = csv_writer(g.create("square_sample_report.csv")?);
    report.write_record(["mode", "n", "ks", "draws_per_output"])?;
    for (i, (mode, name)) in modes.iter().enumerate() {
        let cfg = SquaredSamplerConfig::new(a.epsilon, *mode)?.with_max_attempts(a.max_attempts);
        let mut sampler = SquaredSampler::new(&base, cfg, g.stream("square_sample", &[i as u64]))?;
        let out = sampler.take(a.n)?;
        out.write_csv(g.create(&format!("squared_{name}.csv"))?)?;
        let ks = ks_statistic(&out.column(0), &cdf);
        let dpo = sampler.draws_per_output();
        report.write_record([name.to_string(), a.n.to_string(), ks.to_string(), dpo.to_string()])?;
        println!("mode={name} n={} KS={ks:.5} draws_per_output={dpo:.2}", a.n);
    }
    report.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- learn-toy

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Proportional,
    UnitStep,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnToyArgs {
    /// Particles per condition (M).
    #[arg(long, default_value_t = 512)]
    pub particles: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub n_start: usize,
    #[arg(long, default_value_t = 128)]
    pub n_final: usize,
    /// Epochs between doublings of N (default: spread evenly).
    #[arg(long)]
    pub n_double_every: Option<usize>,
    /// Training pairs; one epoch is this many steps.
    #[arg(long, default_value_t = 20_000)]
    pub dataset_size: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "proportional")]
    pub rule: RuleArg,
    /// Stddev of the initial particles around each target mean.
    #[arg(long, default_value_t = 0.1)]
    pub init_spread: f64,
    /// Independent training runs; the report gives medians.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
}

pub fn learn_toy(g: &Global, a: &LearnToyArgs) -> CmdResult {
    if a.seeds == 0 {
        return Err("--seeds must be >= 1".into());
    }
    let mut outputs = vec!["js.csv".to_string(), "histograms.csv".to_string()];
    for i in 0..a.seeds {
        outputs.push(format!("model_seed{i}.csv"));
        outputs.push(format!("loss_trace_seed{i}.csv"));
    }
    if g.svg {
        outputs.push("histograms.svg".into());
    }
    g.start("learn-toy", json!(a), &outputs)?;
    let toy = ToyProblem::standard();
    let grid = ToyProblem::grid();
    let schedule = TrainSchedule {
        n_start: a.n_start.min(a.n_final),
        n_final: a.n_final,
        n_double_every: a.n_double_every,
        epochs: a.epochs,
        steps_per_epoch: None,
        learning_rate: a.lr,
        batch_size: a.batch,
        rule: match a.rule {
            RuleArg::Proportional => UpdateRule::Proportional,
            RuleArg::UnitStep => UpdateRule::UnitStep,
        },
        ..TrainSchedule::default()
    };
    let runs = (0..a.seeds)
        .into_par_iter()
        .map(|i| {
            let data = toy.dataset(a.dataset_size, g.stream("toy_data", &[i as u64]));
            let init = toy.init_model(a.particles, a.init_spread, g.stream("toy_init", &[i as u64]))?;
            let s = TrainSchedule { seed: g.stream("toy_train", &[i as u64]), ..schedule };
            let (model, trace) = train_mon(&data, &init, &s)?;
            let js = evaluate_learner(&model, &toy.targets, &grid)?;
            Ok((model, trace, js))
        })
        .collect::<Result<Vec<_>, variety::Error>>()?;

    let mut js_out = csv_writer(g.create("js.csv")?);
    js_out.write_record(["seed", "JS_raw", "JS_squared"])?;
    for (i, (model, trace, (raw, sq))) in runs.iter().enumerate() {
        model.write_csv(g.create(&format!("model_seed{i}.csv"))?)?;
        write_trace_csv(g.create(&format!("loss_trace_seed{i}.csv"))?, trace)?;
        js_out.write_record([i.to_string(), raw.to_string(), sq.to_string()])?;
        println!("seed={i} JS_raw={raw:.5} JS_squared={sq:.5}");
    }
    js_out.flush()?;

    // Binned densities of the first run, per condition.
    let (model, _, _) = &runs[0];
    let mut hist = csv_writer(g.create("histograms.csv")?);
    hist.write_record(["condition", "bin_center", "model", "model_squared", "ground_truth"])?;
    let mut series = Vec::new();
    for (c, name) in model.conditions().iter().enumerate() {
        let mb = bin_samples(model.particles(c), &grid, OutOfRange::Clamp)?;
        let sq = power_transform_binned(&mb, 2.0)?;
        let gt = BinnedDensity::from_mixture(&toy.targets[c], grid.clone())?;
        for b in 0..grid.n_cells() {
            hist.write_record([
                name.clone(),
                grid.center(b)[0].to_string(),
                mb.masses()[b].to_string(),
                sq.masses()[b].to_string(),
                gt.masses()[b].to_string(),
            ])?;
        }
        for (label, d) in [("model", &mb), ("model^2", &sq), ("ground truth", &gt)] {
            series.push(Series {
                name: format!("{name} {label}"),
                points: (0..grid.n_cells()).map(|b| (grid.center(b)[0], d.masses()[b])).collect(),
            });
        }
    }
    hist.flush()?;
    if g.svg {
        g.write_svg("histograms.svg", line_plot("Learned vs squared vs ground truth", "x", "bin mass", &series))?;
    }
    if let Some(w) = collapse_warning(model, &toy.targets) {
        println!("warning: {w}");
    }
    let raw: Vec<f64> = runs.iter().map(|r| r.2 .0).collect();
    let sq: Vec<f64> = runs.iter().map(|r| r.2 .1).collect();
    println!("JS_raw={:.5}, JS_squared={:.5} (median over {} seeds)", median(&raw), median(&sq), a.seeds);
    Ok(())
}

// ---------------------------------------------------------------- compensate / eval

#[derive(Debug, Args, Serialize)]
pub struct KdeArgs {
    /// Sampled futures per scene used for the KDE.
    #[arg(long, default_value_t = 1000)]
    pub n_sample: usize,
    /// Fraction of them fitting the KDE; the rest pick the bandwidth.
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Candidate bandwidths (default: 10 log-spaced values in [0.05, 1]).
    #[arg(long, value_parser = parse_grid)]
    pub bandwidths: Option<Grid>,
}

impl KdeArgs {
    fn config(&self, k_search: Option<&Grid>) -> CompensationConfig {
        let d = CompensationConfig::default();
        CompensationConfig {
            n_sample: self.n_sample,
            alpha_split: self.alpha,
            k_search: k_search.map_or(d.k_search, |g| g.0.clone()),
            resolution: (self.resolution, self.resolution),
            bandwidths: self.bandwidths.as_ref().map_or(d.bandwidths, |g| g.0.clone()),
        }
    }
}

fn timesteps(requested: &Option<Vec<usize>>, scenes: &SceneSet) -> Vec<usize> {
    requested.clone().unwrap_or_else(|| (1..=scenes.horizon()).collect())
}

#[derive(Debug, Args, Serialize)]
pub struct CompensateArgs {
    /// Scene file (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Timesteps, 1-based (default: all).
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<usize>>,
    /// Also fit one exponent jointly over the timesteps.
    #[arg(long)]
    pub joint: bool,
    /// Exponents to search (default: 25 values from 0.001 to 3).
    #[arg(long, value_parser = parse_grid)]
    pub k_search: Option<Grid>,
    #[command(flatten)]
    pub kde: KdeArgs,
}

pub fn compensate(g: &Global, a: &CompensateArgs) -> CmdResult {
    let mut outputs = vec!["compensation_curve.csv".to_string(), "compensation_summary.csv".to_string()];
    if g.svg {
        outputs.extend(["compensation_curve.svg", "heatmap_raw.svg", "heatmap_compensated.svg"].map(String::from));
    }
    g.start("compensate", json!(a), &outputs)?;
    let scenes = load_scenes(&a.input)?;
    let ts = timesteps(&a.t, &scenes);
    let cfg = a.kde.config(a.k_search.as_ref());
    let (per_t, joint) = compensation_study(&scenes, &ts, &cfg)?;
    let mut results: Vec<CompensationResult> = per_t;
    if a.joint && ts.len() > 1 {
        results.push(joint);
    }
    write_curves_csv(g.create("compensation_curve.csv")?, &results)?;
    write_summary_csv(g.create("compensation_summary.csv")?, &results)?;
    for r in &results {
        let b = r.best();
        println!("t={} k_best={:?} avg_loglik={:.5}", r.label(), r.k_best, b.avg_loglik);
    }
    if g.svg {
        let series: Vec<Series> = results
            .iter()
            .map(|r| Series { name: format!("t = {}", r.label()), points: r.curve.iter().map(|p| (p.k_bar, p.avg_loglik)).collect() })
            .collect();
        g.write_svg("compensation_curve.svg", line_plot("Ground-truth log-likelihood vs k_bar", "k_bar", "avg log-likelihood", &series))?;
        // The first scene (by id) at the last requested timestep.
        let scene = &scenes.scenes()[scenes.canonical_order()[0]];
        let t = *ts.last().expect("timesteps are nonempty");
        let k_best = results.iter().find(|r| r.timesteps == [t]).map_or(1.0, |r| r.k_best);
        let fit = fit_scene_kde(scene, t, &cfg)?;
        let spec = fit.grid.spec();
        let extent = [spec.lo[0], spec.hi[0], spec.lo[1], spec.hi[1]];
        for (name, k) in [("heatmap_raw.svg", 1.0), ("heatmap_compensated.svg", k_best)] {
            let grid = fit.grid.compensate(k)?;
            let title = format!("{} t = {t}, k_bar = {k}", scene.scene_id);
            g.write_svg(name, heatmap(&title, spec.bins[0], spec.bins[1], extent, grid.masses(), Some(fit.ground_truth)))?;
        }
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Samples per MoN draw (default: all samples of the smallest scene).
    #[arg(long)]
    pub n: Option<usize>,
    /// MoN repetitions per scene.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Compensation exponents to evaluate.
    #[arg(long, value_parser = parse_grid, default_value = "1,2")]
    pub k_bar: Grid,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<usize>>,
    #[command(flatten)]
    pub kde: KdeArgs,
}

pub fn eval(g: &Global, a: &EvalArgs) -> CmdResult {
    g.start("eval", json!(a), &["eval_mon.csv".to_string(), "eval_loglik.csv".to_string()])?;
    let scenes = load_scenes(&a.input)?;
    let n = a.n.unwrap_or_else(|| scenes.min_samples());
    let mon = mon_metric(&scenes, n, a.reps, g.stream("mon_metric", &[]))?;
    let mut w = csv_writer(g.create("eval_mon.csv")?);
    w.write_record(["N", "reps", "value", "std_error"])?;
    w.write_record([n.to_string(), a.reps.to_string(), mon.value.to_string(), mon.std_error.to_string()])?;
    w.flush()?;
    println!("MoN N={n} value={:.5} std_error={:.5}", mon.value, mon.std_error);

    let ts = timesteps(&a.t, &scenes);
    let cfg = a.kde.config(Some(&a.k_bar));
    let (per_t, _) = compensation_study(&scenes, &ts, &cfg)?;
    let mut w = csv_writer(g.create("eval_loglik.csv")?);
    w.write_record(["t", "k_bar", "avg_loglik"])?;
    for r in &per_t {
        for p in &r.curve {
            w.write_record([r.label(), p.k_bar.to_string(), p.avg_loglik.to_string()])?;
            println!("loglik t={} k_bar={:?} value={:.5}", r.label(), p.k_bar, p.avg_loglik);
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// faithful, sqrt_dilated, or power(k)
    #[arg(long, value_parser = check_kind, default_value = "sqrt_dilated")]
    pub kind: String,
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    /// Sampled futures per scene (K).
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Future timesteps (T).
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    /// Per-step displacement noise stddev.
    #[arg(long, default_value_t = WalkDynamics::default().noise)]
    pub noise: f64,
    #[arg(long, default_value_t = WalkDynamics::default().speed)]
    pub speed: f64,
    #[arg(long, default_value_t = WalkDynamics::default().lateral)]
    pub lateral: f64,
    #[arg(long, default_value_t = WalkDynamics::default().observed_len)]
    pub observed: usize,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "scenes.jsonl")]
    pub output: String,
}

pub fn synth(g: &Global, a: &SynthArgs) -> CmdResult {
    if Path::new(&a.output).components().count() != 1 {
        return Err("--output must be a plain file name".into());
    }
    g.start("synth", json!(a), std::slice::from_ref(&a.output))?;
    let cfg = SynthConfig {
        kind: a.kind.parse()?,
        n_scenes: a.scenes,
        n_samples: a.samples,
        horizon: a.horizon,
        seed: g.stream("synth", &[]),
        dynamics: WalkDynamics { speed: a.speed, lateral: a.lateral, noise: a.noise, observed_len: a.observed },
    };
    let (scenes, _) = variety::trajio::synth_scenes(&cfg)?;
    save_scenes(&scenes, g.path(&a.output))?;
    println!(
        "wrote {} {} scenes (K={}, T={}) to {}",
        scenes.len(),
        cfg.kind,
        a.samples,
        a.horizon,
        g.path(&a.output).display()
    );
    Ok(())
}
