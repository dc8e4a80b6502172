//! A particle model trained by stochastic subgradient descent on the MoN loss.
//!
//! Each condition owns `M` particles; sampling the model picks a particle
//! uniformly. A training step draws a `(condition, target)` pair, draws `N`
//! of that condition's particles with replacement, and moves only the one
//! nearest to the target. `N` starts small and doubles on a fixed schedule.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::densities::{bin_samples, js_divergence, power_transform_binned, GaussianMixture, BinnedDensity, GridSpec, OutOfRange, SampleSet};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream_rng, SimRng};
use crate::stats::mean_std;

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTarget {
    pub condition: usize,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleModel {
    conditions: Vec<String>,
    particles: Vec<SampleSet>,
}

impl ParticleModel {
    pub fn new(conditions: Vec<String>, particles: Vec<SampleSet>) -> Result<Self> {
        if conditions.is_empty() {
            return Err(Error::Empty("model without conditions"));
        }
        check_dim(conditions.len(), particles.len())?;
        let dim = particles[0].dim();
        let m = particles[0].len();
        for p in &particles {
            check_dim(dim, p.dim())?;
            if p.len() != m || m == 0 {
                return Err(Error::InvalidParameter("every condition needs the same nonzero particle count".into()));
            }
            if p.as_flat().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite particle".into()));
            }
        }
        Ok(ParticleModel { conditions, particles })
    }

    /// `m` particles per condition, Gaussian around `centers[c]` with stddev `spread`.
    pub fn init_around(conditions: Vec<String>, centers: &[Vec<f64>], m: usize, spread: f64, seed: u64) -> Result<Self> {
        check_dim(conditions.len(), centers.len())?;
        if m == 0 {
            return Err(Error::InvalidParameter("particle count must be >= 1".into()));
        }
        let particles = centers
            .iter()
            .enumerate()
            .map(|(c, center)| {
                let mut rng = stream_rng(seed, &[c as u64]);
                let flat = (0..m)
                    .flat_map(|_| center.iter().map(|x| x + spread * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())
                    .collect();
                SampleSet::from_flat(center.len(), flat)
            })
            .collect::<Result<_>>()?;
        Self::new(conditions, particles)
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn condition_index(&self, name: &str) -> Result<usize> {
        self.conditions
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownCondition(name.to_string()))
    }

    pub fn particles(&self, condition: usize) -> &SampleSet {
        &self.particles[condition]
    }

    /// Particles per condition (`M`).
    pub fn n_particles(&self) -> usize {
        self.particles[0].len()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    fn check_condition(&self, c: usize) -> Result<()> {
        if c < self.conditions.len() {
            Ok(())
        } else {
            Err(Error::UnknownCondition(c.to_string()))
        }
    }

    /// Writes `condition,particle,x0,...` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["condition".to_string(), "particle".to_string()];
        header.extend((0..self.dim()).map(|d| format!("x{d}")));
        out.write_record(&header)?;
        for (name, ps) in self.conditions.iter().zip(&self.particles) {
            for (i, p) in ps.iter().enumerate() {
                let mut row = vec![name.clone(), i.to_string()];
                row.extend(p.iter().map(|v| v.to_string()));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// How the nearest particle moves toward its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// `lr * (target - particle)`: gradient descent on half the squared distance.
    #[default]
    Proportional,
    /// A step of length `lr` along `target - particle`, never past the target:
    /// the subgradient of the plain distance.
    UnitStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub n_start: usize,
    pub n_final: usize,
    /// Epochs between doublings of `N`; `None` spreads the doublings evenly.
    pub n_double_every: Option<usize>,
    pub epochs: usize,
    /// Steps per epoch; `None` means one step per dataset entry.
    pub steps_per_epoch: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rule: UpdateRule,
    /// Training steps averaged into one loss-trace entry.
    pub trace_window: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            n_start: 2,
            n_final: 128,
            n_double_every: None,
            epochs: 40,
            steps_per_epoch: None,
            learning_rate: 0.05,
            batch_size: 1,
            rule: UpdateRule::default(),
            trace_window: 500,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_start == 0 || self.n_start > self.n_final {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= n_start <= n_final, got {} and {}",
                self.n_start, self.n_final
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.trace_window == 0 || self.n_double_every == Some(0) || self.steps_per_epoch == Some(0) {
            return Err(Error::InvalidParameter("batch size, trace window, doubling interval and epoch length must be positive".into()));
        }
        Ok(())
    }

    /// `epochs / ceil(log2(n_final / n_start))`, at least 1.
    pub fn double_every(&self) -> usize {
        if let Some(e) = self.n_double_every {
            return e;
        }
        let doublings = (self.n_final as f64 / self.n_start as f64).log2().ceil() as usize;
        self.epochs.checked_div(doublings).map_or(usize::MAX, |e| e.max(1))
    }

    /// `N` in effect during `epoch`.
    pub fn n_at(&self, epoch: usize) -> usize {
        let every = self.double_every();
        let doublings = (epoch / every).min(63) as u32;
        self.n_start.saturating_mul(1usize << doublings).min(self.n_final)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Steps completed when the entry was recorded.
    pub step: usize,
    pub epoch: usize,
    pub n: usize,
    /// Mean MoN distance over the preceding window (pre-update).
    pub loss: f64,
}

pub fn write_trace_csv<W: Write>(w: W, trace: &[TraceEntry]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "epoch", "N", "loss"])?;
    for t in trace {
        out.write_record([t.step.to_string(), t.epoch.to_string(), t.n.to_string(), t.loss.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn nearest(particles: &[f64], dim: usize, target: &[f64], n: usize, rng: &mut SimRng) -> (usize, f64) {
    let m = particles.len() / dim;
    let mut best = (0, f64::INFINITY);
    for _ in 0..n {
        let j = rng.random_range(0..m);
        let p = &particles[j * dim..(j + 1) * dim];
        let d2: f64 = p.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    (best.0, best.1.sqrt())
}

fn step_toward(p: &mut [f64], target: &[f64], dist: f64, lr: f64, rule: UpdateRule) {
    let scale = match rule {
        UpdateRule::Proportional => lr,
        UpdateRule::UnitStep if dist <= lr => 1.0,
        UpdateRule::UnitStep => lr / dist,
    };
    for (x, t) in p.iter_mut().zip(target) {
        *x += scale * (t - *x);
    }
}

/// Trains `init` on `dataset` with the MoN loss. Deterministic given the
/// dataset order and `schedule.seed`.
pub fn train_mon(
    dataset: &[LabeledTarget],
    init: &ParticleModel,
    schedule: &TrainSchedule,
) -> Result<(ParticleModel, Vec<TraceEntry>)> {
    schedule.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let dim = init.dim();
    let mut seen = vec![false; init.conditions.len()];
    for ex in dataset {
        init.check_condition(ex.condition)?;
        check_dim(dim, ex.target.len())?;
        seen[ex.condition] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!("condition `{}` has no training examples", init.conditions[c])));
    }

    let mut parts: Vec<Vec<f64>> = init.particles.iter().map(|p| p.as_flat().to_vec()).collect();
    let steps_per_epoch = schedule.steps_per_epoch.unwrap_or(dataset.len());
    let mut rng = stream_rng(schedule.seed, &[]);
    let mut trace = Vec::new();
    let (mut window_sum, mut window_len) = (0.0, 0usize);
    let mut updates: Vec<(usize, usize, f64, usize)> = Vec::with_capacity(schedule.batch_size);
    let mut step = 0;
    for epoch in 0..schedule.epochs {
        let n = schedule.n_at(epoch);
        for _ in 0..steps_per_epoch {
            // Every example in a batch sees the particles as they were before
            // the batch.
            updates.clear();
            for _ in 0..schedule.batch_size {
                let e = rng.random_range(0..dataset.len());
                let c = dataset[e].condition;
                let (j, d) = nearest(&parts[c], dim, &dataset[e].target, n, &mut rng);
                updates.push((c, j, d, e));
            }
            let lr = schedule.learning_rate / schedule.batch_size as f64;
            for &(c, j, d, e) in &updates {
                step_toward(&mut parts[c][j * dim..(j + 1) * dim], &dataset[e].target, d, lr, schedule.rule);
                window_sum += d;
                window_len += 1;
            }
            step += 1;
            if step % schedule.trace_window == 0 {
                trace.push(TraceEntry { step, epoch, n, loss: window_sum / window_len as f64 });
                window_sum = 0.0;
                window_len = 0;
            }
        }
    }
    let particles = parts
        .into_iter()
        .map(|flat| SampleSet::from_flat(dim, flat))
        .collect::<Result<_>>()?;
    let model = ParticleModel::new(init.conditions.clone(), particles)?;
    Ok((model, trace))
}

/// `n` uniform draws of the condition's particles plus isotropic Gaussian
/// jitter with stddev `jitter`.
pub fn model_sample(m: &ParticleModel, condition: &str, n: usize, seed: u64, jitter: f64) -> Result<SampleSet> {
    let c = m.condition_index(condition)?;
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {jitter}")));
    }
    let ps = &m.particles[c];
    let mut rng = stream_rng(seed, &[c as u64]);
    let mut out = Vec::with_capacity(n * ps.dim());
    for _ in 0..n {
        let p = ps.point(rng.random_range(0..ps.len()));
        for &x in p {
            let z: f64 = if jitter > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            out.push(x + jitter * z);
        }
    }
    Ok(SampleSet::from_flat(ps.dim(), out)?.with_seed(seed))
}

/// Binned JS divergences of the model and of its square against the ground
/// truth, averaged over conditions.
///
/// The model is binned from its particles directly, which is its exact
/// sampling distribution; particles outside the grid count in the edge bins.
pub fn evaluate_learner(m: &ParticleModel, ground_truth: &[GaussianMixture], grid: &GridSpec) -> Result<(f64, f64)> {
    check_dim(m.conditions.len(), ground_truth.len())?;
    let mut raw = 0.0;
    let mut squared = 0.0;
    for (ps, gt) in m.particles.iter().zip(ground_truth) {
        let model_bins = bin_samples(ps, grid, OutOfRange::Clamp)?;
        let gt_bins = BinnedDensity::from_mixture(gt, grid.clone())?;
        let (r, s) = js_pair(&model_bins, &gt_bins)?;
        raw += r;
        squared += s;
    }
    let c = m.conditions.len() as f64;
    Ok((raw / c, squared / c))
}

/// `(JS(model, gt), JS(model^2, gt))` for already binned densities.
pub fn js_pair(model: &BinnedDensity, gt: &BinnedDensity) -> Result<(f64, f64)> {
    Ok((js_divergence(model, gt)?, js_divergence(&power_transform_binned(model, 2.0)?, gt)?))
}

/// A warning when a condition's particles have collapsed toward a point
/// (stddev below a quarter of the ground truth's), as MoN with `N = 1` does.
pub fn collapse_warning(m: &ParticleModel, ground_truth: &[GaussianMixture]) -> Option<String> {
    let mut msgs = Vec::new();
    for ((name, ps), gt) in m.conditions.iter().zip(&m.particles).zip(ground_truth) {
        for d in 0..ps.dim() {
            let sd = mean_std(&ps.column(d)).1;
            let gt_sd = gt.marginal_stddev()[d];
            if sd < 0.25 * gt_sd {
                msgs.push(format!(
                    "condition `{name}`: particle stddev {sd:.3} vs ground truth {gt_sd:.3}; the model has collapsed toward the mean"
                ));
            }
        }
    }
    (!msgs.is_empty()).then(|| msgs.join("\n"))
}

/// The two-condition toy problem: inputs near -1.5 or +1.5, targets from an
/// equal mixture of N(-2, 1) and N(-4, 1), or of N(2, 1) and N(4, 1).
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub conditions: Vec<String>,
    pub input_means: Vec<f64>,
    pub input_stddev: f64,
    pub targets: Vec<GaussianMixture>,
}

impl ToyProblem {
    pub fn standard() -> Self {
        let two = |a: f64, b: f64| GaussianMixture::equal_weights(&[(vec![a], 1.0), (vec![b], 1.0)]).expect("valid mixture");
        ToyProblem {
            conditions: vec!["left".into(), "right".into()],
            input_means: vec![-1.5, 1.5],
            input_stddev: 0.1,
            targets: vec![two(-2.0, -4.0), two(2.0, 4.0)],
        }
    }

    /// The condition an input value belongs to (nearest input mean).
    pub fn classify(&self, input: f64) -> usize {
        let mut best = 0;
        for (i, m) in self.input_means.iter().enumerate() {
            if (input - m).abs() < (input - self.input_means[best]).abs() {
                best = i;
            }
        }
        best
    }

    /// `n` examples: a condition uniformly, an input from its input density
    /// (which fixes the label), and a target from its target density.
    pub fn dataset(&self, n: usize, seed: u64) -> Vec<LabeledTarget> {
        let mut rng = stream_rng(seed, &[]);
        let mut target = vec![0.0; 1];
        (0..n)
            .map(|_| {
                let c = rng.random_range(0..self.conditions.len());
                let input = self.input_means[c] + self.input_stddev * rng.sample::<f64, _>(StandardNormal);
                let condition = self.classify(input);
                self.targets[condition].draw_into(&mut rng, &mut target);
                LabeledTarget { condition, target: target.clone() }
            })
            .collect()
    }

    /// Particles around each condition's target mean.
    pub fn init_model(&self, m: usize, spread: f64, seed: u64) -> Result<ParticleModel> {
        let centers: Vec<Vec<f64>> = self.targets.iter().map(GaussianMixture::mean).collect();
        ParticleModel::init_around(self.conditions.clone(), &centers, m, spread, seed)
    }

    /// The evaluation grid: 36 bins on [-9, 9].
    pub fn grid() -> GridSpec {
        GridSpec::line(-9.0, 9.0, 36).expect("valid grid")
    }
}
