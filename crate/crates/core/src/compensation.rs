//! Compensating MoN-induced dilation of sampled trajectories.
//!
//! For one timestep of one scene, the sampled positions are smoothed with an
//! isotropic Gaussian KDE whose bandwidth maximizes held-out likelihood. The
//! KDE is evaluated at the cell centers of a regular 2-D grid, raised to an
//! exponent `k_bar` and renormalized. The ground-truth position is then scored
//! by the log density of the cell it falls in. Scanning `k_bar` and averaging
//! over scenes gives the exponent that best undoes the dilation; a model
//! trained with MoN should come out near 2.

use std::io::Write;

use rayon::prelude::*;

use crate::densities::{BinnedDensity, GridSpec, SampleSet};
use crate::error::{check_dim, Error, Result};
use crate::stats::{linspace, log_sum_exp, logspace, mean_std};
use crate::trajio::{Scene, SceneSet};

/// Smallest bandwidth [`select_bandwidth`] will return.
pub const MIN_BANDWIDTH: f64 = 0.05;
/// Zero-mass floor, relative to the largest cell mass.
pub const MASS_FLOOR: f64 = 1e-12;
/// Grid padding around the samples and ground truth, in bandwidths.
pub const GRID_PAD_BANDWIDTHS: f64 = 3.0;

/// Isotropic Gaussian kernel density estimate.
#[derive(Debug, Clone)]
pub struct KdeModel {
    points: SampleSet,
    bandwidth: f64,
    /// `-ln n - d/2 ln(2 pi h^2)`, shared by every kernel.
    ln_scale: f64,
}

impl KdeModel {
    pub fn points(&self) -> &SampleSet {
        &self.points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.ln_density_unchecked(x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.ln_density(x).map(f64::exp)
    }

    fn ln_density_unchecked(&self, x: &[f64]) -> f64 {
        let inv = -0.5 / (self.bandwidth * self.bandwidth);
        let exps: Vec<f64> = self
            .points
            .iter()
            .map(|p| inv * p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .collect();
        log_sum_exp(&exps) + self.ln_scale
    }
}

pub fn kde_fit(points: &SampleSet, bandwidth: f64) -> Result<KdeModel> {
    if points.is_empty() {
        return Err(Error::Empty("KDE needs at least one support point"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let d = points.dim() as f64;
    let ln_scale = -(points.len() as f64).ln()
        - 0.5 * d * (2.0 * std::f64::consts::PI * bandwidth * bandwidth).ln();
    Ok(KdeModel { points: points.clone(), bandwidth, ln_scale })
}

/// Index of the largest value; the first one wins ties. NaNs never win.
fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Picks the bandwidth maximizing the mean log density of `validation` under
/// a KDE fit on `train`.
///
/// Candidates below [`MIN_BANDWIDTH`] are raised to it; ties go to the
/// smaller bandwidth.
pub fn select_bandwidth(train: &SampleSet, validation: &SampleSet, candidates: &[f64]) -> Result<f64> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty("bandwidth selection needs train and validation points"));
    }
    check_dim(train.dim(), validation.dim())?;
    let mut hs: Vec<f64> = candidates.iter().map(|&h| h.max(MIN_BANDWIDTH)).collect();
    if hs.iter().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter("bandwidth candidates must be finite".into()));
    }
    if hs.is_empty() {
        return Err(Error::Empty("no bandwidth candidates"));
    }
    hs.sort_by(f64::total_cmp);
    hs.dedup();

    // Squared distances are shared by every candidate.
    let d2: Vec<f64> = validation
        .iter()
        .flat_map(|v| {
            train
                .iter()
                .map(move |t| t.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .collect();
    let n_train = train.len();
    let d = train.dim() as f64;
    let scores: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let inv = -0.5 / (h * h);
            let ln_scale = -(n_train as f64).ln() - 0.5 * d * (2.0 * std::f64::consts::PI * h * h).ln();
            let mut buf = vec![0.0; n_train];
            let total: f64 = d2
                .chunks_exact(n_train)
                .map(|row| {
                    for (b, &r) in buf.iter_mut().zip(row) {
                        *b = inv * r;
                    }
                    log_sum_exp(&buf) + ln_scale
                })
                .sum();
            let mean = total / validation.len() as f64;
            if mean.is_finite() {
                mean
            } else {
                f64::NAN
            }
        })
        .collect();
    argmax_first(&scores).map(|i| hs[i]).ok_or(Error::NoFiniteBandwidth)
}

/// Unnormalized log KDE values at the cell centers of a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    spec: GridSpec,
    ln_values: Vec<f64>,
}

impl KdeGrid {
    pub fn evaluate(model: &KdeModel, spec: &GridSpec) -> Result<Self> {
        check_dim(2, spec.dim())?;
        check_dim(2, model.dim())?;
        let ln_values = (0..spec.n_cells())
            .map(|c| model.ln_density_unchecked(&spec.center(c)))
            .collect();
        Ok(KdeGrid { spec: spec.clone(), ln_values })
    }

    /// Builds a grid from precomputed log values (for tests and external KDEs).
    pub fn from_ln_values(spec: GridSpec, ln_values: Vec<f64>) -> Result<Self> {
        check_dim(spec.n_cells(), ln_values.len())?;
        Ok(KdeGrid { spec, ln_values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `L^k / sum L^k` over the cells, computed in log space.
    pub fn compensate(&self, k_bar: f64) -> Result<DensityGrid> {
        if !(k_bar > 0.0 && k_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!("k_bar must be positive, got {k_bar}")));
        }
        let scaled: Vec<f64> = self.ln_values.iter().map(|l| k_bar * l).collect();
        let ln_total = log_sum_exp(&scaled);
        if !ln_total.is_finite() {
            return Err(Error::Degenerate(format!("grid values raised to {k_bar} do not normalize")));
        }
        let ln_masses: Vec<f64> = scaled.iter().map(|s| s - ln_total).collect();
        let masses: Vec<f64> = ln_masses.iter().map(|l| l.exp()).collect();
        let total: f64 = masses.iter().sum();
        let masses = masses.into_iter().map(|m| m / total).collect();
        let ln_max = ln_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(DensityGrid {
            density: BinnedDensity::new(self.spec.clone(), masses)?,
            ln_masses,
            ln_floor: ln_max + MASS_FLOOR.ln(),
        })
    }
}

/// Normalized cell masses of a compensated KDE.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    density: BinnedDensity,
    ln_masses: Vec<f64>,
    ln_floor: f64,
}

impl DensityGrid {
    pub fn spec(&self) -> &GridSpec {
        self.density.grid()
    }

    pub fn masses(&self) -> &[f64] {
        self.density.masses()
    }

    pub fn as_binned(&self) -> &BinnedDensity {
        &self.density
    }

    /// Log density (cell mass over cell area) of the cell containing `point`.
    ///
    /// Masses below `MASS_FLOOR` times the largest mass, and points outside
    /// the grid, use the floor instead.
    pub fn loglik(&self, point: &[f64]) -> f64 {
        let ln_mass = match self.spec().cell_of(point) {
            Some(c) => self.ln_masses[c].max(self.ln_floor),
            None => self.ln_floor,
        };
        ln_mass - self.spec().cell_volume().ln()
    }
}

pub fn eval_on_grid(model: &KdeModel, spec: &GridSpec, k_bar: f64) -> Result<DensityGrid> {
    KdeGrid::evaluate(model, spec)?.compensate(k_bar)
}

pub fn grid_loglik(grid: &DensityGrid, point: &[f64]) -> f64 {
    grid.loglik(point)
}

/// Bounding box of `points` and `extra`, padded by `pad` on every side.
pub fn auto_extent(points: &SampleSet, extra: &[f64], pad: f64, bins: (usize, usize)) -> Result<GridSpec> {
    check_dim(2, points.dim())?;
    check_dim(2, extra.len())?;
    let mut lo = extra.to_vec();
    let mut hi = extra.to_vec();
    for p in points.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    for d in 0..2 {
        lo[d] -= pad;
        hi[d] += pad;
    }
    GridSpec::new(lo, hi, vec![bins.0, bins.1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationConfig {
    /// Sampled futures used per scene (the first `n_sample` of each scene).
    pub n_sample: usize,
    /// Fraction of them used to fit the KDE; the rest choose the bandwidth.
    pub alpha_split: f64,
    pub k_search: Vec<f64>,
    pub resolution: (usize, usize),
    pub bandwidths: Vec<f64>,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        CompensationConfig {
            n_sample: 1000,
            alpha_split: 0.7,
            k_search: linspace(0.001, 3.0, 25),
            resolution: (100, 100),
            bandwidths: logspace(0.05, 1.0, 10),
        }
    }
}

impl CompensationConfig {
    pub fn n_train(&self) -> usize {
        (self.n_sample as f64 * self.alpha_split).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_split > 0.0 && self.alpha_split < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha_split must lie in (0, 1), got {}", self.alpha_split)));
        }
        if self.n_sample as f64 * self.alpha_split < 10.0 {
            return Err(Error::InvalidParameter("n_sample * alpha_split must be >= 10".into()));
        }
        if self.n_train() >= self.n_sample {
            return Err(Error::InvalidParameter("validation split is empty".into()));
        }
        if self.k_search.is_empty() {
            return Err(Error::Empty("k_search"));
        }
        if self.k_search.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("k_search values must be positive".into()));
        }
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::InvalidParameter("grid resolution must be at least 2x2".into()));
        }
        if self.bandwidths.is_empty() {
            return Err(Error::Empty("bandwidth grid"));
        }
        Ok(())
    }
}

/// The fitted KDE of one scene at one timestep.
#[derive(Debug, Clone)]
pub struct SceneKde {
    pub model: KdeModel,
    pub grid: KdeGrid,
    pub ground_truth: [f64; 2],
}

/// Fits the KDE for `scene` at 1-based timestep `t`: bandwidth by held-out
/// likelihood, grid from the auto extent.
pub fn fit_scene_kde(scene: &Scene, t: usize, cfg: &CompensationConfig) -> Result<SceneKde> {
    cfg.validate()?;
    check_scene(scene, t, cfg)?;
    let all = scene.samples_at(t);
    let n_train = cfg.n_train();
    let train = all.select(0..n_train);
    let validation = all.select(n_train..cfg.n_sample);
    let h = select_bandwidth(&train, &validation, &cfg.bandwidths)?;
    let model = kde_fit(&train, h)?;
    let gt = scene.ground_truth_at(t);
    let spec = auto_extent(&train, &gt, GRID_PAD_BANDWIDTHS * h, cfg.resolution)?;
    let grid = KdeGrid::evaluate(&model, &spec)?;
    Ok(SceneKde { model, grid, ground_truth: gt })
}

fn check_scene(scene: &Scene, t: usize, cfg: &CompensationConfig) -> Result<()> {
    if t == 0 || t > scene.horizon() {
        return Err(Error::InvalidParameter(format!("timestep {t} outside 1..={}", scene.horizon())));
    }
    if scene.n_samples() < cfg.n_sample {
        return Err(Error::InvalidScene {
            scene: scene.scene_id.clone(),
            message: format!("{} sampled futures, n_sample is {}", scene.n_samples(), cfg.n_sample),
        });
    }
    Ok(())
}

/// Ground-truth log-likelihood for every `k` in `ks`.
fn scene_curve(scene: &Scene, t: usize, ks: &[f64], cfg: &CompensationConfig) -> Result<Vec<f64>> {
    let fit = fit_scene_kde(scene, t, cfg)?;
    ks.iter()
        .map(|&k| Ok(fit.grid.compensate(k)?.loglik(&fit.ground_truth)))
        .collect()
}

/// `table[scene][timestep][k]`, scenes in canonical (`scene_id`) order.
fn loglik_table(scenes: &SceneSet, ts: &[usize], ks: &[f64], cfg: &CompensationConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    cfg.validate()?;
    if ts.is_empty() {
        return Err(Error::Empty("timesteps"));
    }
    let order = scenes.canonical_order();
    let jobs: Vec<(usize, usize)> = order.iter().flat_map(|&s| ts.iter().map(move |&t| (s, t))).collect();
    let curves: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(s, t)| scene_curve(&scenes.scenes()[s], t, ks, cfg))
        .collect::<Result<_>>()?;
    Ok(curves.chunks(ts.len()).map(|c| c.to_vec()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k_bar: f64,
    /// Ground-truth log-likelihood averaged over scenes (and timesteps).
    pub avg_loglik: f64,
    /// Standard error of that average across scenes.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationResult {
    /// The timesteps pooled into this result: one, or several for a joint fit.
    pub timesteps: Vec<usize>,
    pub k_best: f64,
    pub curve: Vec<CurvePoint>,
    pub n_scenes: usize,
}

impl CompensationResult {
    pub fn is_joint(&self) -> bool {
        self.timesteps.len() > 1
    }

    /// `t` column value: the timestep, or `joint`.
    pub fn label(&self) -> String {
        if self.is_joint() {
            "joint".to_string()
        } else {
            self.timesteps[0].to_string()
        }
    }

    pub fn best(&self) -> &CurvePoint {
        self.curve
            .iter()
            .find(|p| p.k_bar == self.k_best)
            .expect("k_best comes from the curve")
    }
}

/// Reduces per-scene values for the timesteps `tsel` (indices into the
/// table's timestep axis) into a curve, in table order.
fn reduce(table: &[Vec<Vec<f64>>], tsel: &[usize], ts: &[usize], ks: &[f64]) -> CompensationResult {
    let n_scenes = table.len();
    let curve: Vec<CurvePoint> = ks
        .iter()
        .enumerate()
        .map(|(ki, &k_bar)| {
            // Per-scene sums over the selected timesteps.
            let per_scene: Vec<f64> = table
                .iter()
                .map(|rows| tsel.iter().map(|&ti| rows[ti][ki]).sum::<f64>() / tsel.len() as f64)
                .collect();
            let (mean, sd) = mean_std(&per_scene);
            let std_error = if n_scenes >= 2 { sd / (n_scenes as f64).sqrt() } else { 0.0 };
            CurvePoint { k_bar, avg_loglik: mean, std_error }
        })
        .collect();
    // Ties go to the smaller k_bar.
    let mut best = 0;
    for (i, p) in curve.iter().enumerate() {
        let b = &curve[best];
        if p.avg_loglik > b.avg_loglik || (p.avg_loglik == b.avg_loglik && p.k_bar < b.k_bar) {
            best = i;
        }
    }
    CompensationResult {
        timesteps: tsel.iter().map(|&i| ts[i]).collect(),
        k_best: curve[best].k_bar,
        curve,
        n_scenes,
    }
}

/// Scans `cfg.k_search` at 1-based timestep `t` and returns the exponent
/// maximizing the average ground-truth log-likelihood.
pub fn find_best_compensation(scenes: &SceneSet, t: usize, cfg: &CompensationConfig) -> Result<CompensationResult> {
    let table = loglik_table(scenes, &[t], &cfg.k_search, cfg)?;
    Ok(reduce(&table, &[0], &[t], &cfg.k_search))
}

/// One exponent for all of `ts`, maximizing the log-likelihood summed over them.
pub fn find_best_compensation_joint(
    scenes: &SceneSet,
    ts: &[usize],
    cfg: &CompensationConfig,
) -> Result<CompensationResult> {
    let table = loglik_table(scenes, ts, &cfg.k_search, cfg)?;
    let all: Vec<usize> = (0..ts.len()).collect();
    Ok(reduce(&table, &all, ts, &cfg.k_search))
}

/// Per-timestep results for every `t` in `ts` followed by the joint result,
/// sharing one KDE fit per scene and timestep.
pub fn compensation_study(
    scenes: &SceneSet,
    ts: &[usize],
    cfg: &CompensationConfig,
) -> Result<(Vec<CompensationResult>, CompensationResult)> {
    let table = loglik_table(scenes, ts, &cfg.k_search, cfg)?;
    let per_t = (0..ts.len()).map(|i| reduce(&table, &[i], ts, &cfg.k_search)).collect();
    let all: Vec<usize> = (0..ts.len()).collect();
    Ok((per_t, reduce(&table, &all, ts, &cfg.k_search)))
}

/// Average ground-truth log-likelihood at timestep `t` after compensating
/// every scene's KDE with `k_bar`.
pub fn marginalized_loglik(scenes: &SceneSet, t: usize, k_bar: f64, cfg: &CompensationConfig) -> Result<f64> {
    let table = loglik_table(scenes, &[t], &[k_bar], cfg)?;
    Ok(table.iter().map(|rows| rows[0][0]).sum::<f64>() / table.len() as f64)
}

/// Writes `t,k_bar,avg_loglik` rows for every result.
pub fn write_curves_csv<W: Write>(w: W, results: &[CompensationResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "k_bar", "avg_loglik"])?;
    for r in results {
        let label = r.label();
        for p in &r.curve {
            out.write_record([label.clone(), p.k_bar.to_string(), p.avg_loglik.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `t,k_best` rows.
pub fn write_summary_csv<W: Write>(w: W, results: &[CompensationResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "k_best"])?;
    for r in results {
        out.write_record([r.label(), r.k_best.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Density, GaussianMixture};

    fn normal2(n: usize, sd: f64, seed: u64) -> SampleSet {
        Density::from(GaussianMixture::isotropic(vec![0.0, 0.0], sd).unwrap()).sample(n, seed).unwrap()
    }

    #[test]
    fn single_point_is_one_bump() {
        let m = kde_fit(&SampleSet::from_flat(2, vec![1.0, -2.0]).unwrap(), 0.5).unwrap();
        let expect = |x: f64, y: f64| {
            let r2 = (x - 1.0).powi(2) + (y + 2.0).powi(2);
            (-r2 / 0.5).exp() / (2.0 * std::f64::consts::PI * 0.25)
        };
        for (x, y) in [(1.0, -2.0), (0.3, -1.0), (2.0, 0.0)] {
            assert!((m.density(&[x, y]).unwrap() - expect(x, y)).abs() < 1e-14);
        }
        assert!(kde_fit(&SampleSet::empty(2), 0.5).is_err());
        assert!(kde_fit(&SampleSet::from_flat(2, vec![0.0, 0.0]).unwrap(), 0.0).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let pts = normal2(50, 1.0, 2);
        let h = 0.4;
        let m = kde_fit(&pts, h).unwrap();
        let spec = auto_extent(&pts, &[0.0, 0.0], 6.0 * h, (300, 300)).unwrap();
        let total: f64 = (0..spec.n_cells()).map(|c| m.density(&spec.center(c)).unwrap()).sum::<f64>()
            * spec.cell_volume();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn kde_at_origin_matches_convolution() {
        // One fit has ~8% relative spread at the origin, so average 20.
        let h = 0.3;
        let oracle = 1.0 / (2.0 * std::f64::consts::PI * (1.0 + h * h));
        let got = (0..20)
            .map(|s| kde_fit(&normal2(1000, 1.0, 100 + s), h).unwrap().density(&[0.0, 0.0]).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!((got / oracle - 1.0).abs() < 0.15, "{got} vs {oracle}");
    }

    #[test]
    fn bandwidth_brackets_reference_scale() {
        let pts = normal2(1000, 1.0, 4);
        let grid: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
        let h = select_bandwidth(&pts.select(0..700), &pts.select(700..1000), &grid).unwrap();
        assert!((0.1..=0.6).contains(&h), "{h}");
    }

    #[test]
    fn bandwidth_floor_blocks_spikes() {
        let pts = normal2(200, 1.0, 5);
        let h = select_bandwidth(&pts, &pts, &[1e-4, 1e-3, 0.01, 0.2, 0.5]).unwrap();
        assert_eq!(h, MIN_BANDWIDTH);
    }

    #[test]
    fn ties_prefer_first() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax_first(&[f64::NAN, -1.0]), Some(1));
        assert_eq!(argmax_first(&[f64::NAN]), None);
    }

    #[test]
    fn non_finite_bandwidth_errors() {
        let pts = normal2(10, 1.0, 6);
        assert!(matches!(
            select_bandwidth(&pts, &pts, &[f64::INFINITY]),
            Err(Error::InvalidParameter(_))
        ));
        let far = SampleSet::from_flat(2, vec![f64::MAX, f64::MAX]).unwrap();
        assert!(matches!(select_bandwidth(&pts, &far, &[0.1]), Err(Error::NoFiniteBandwidth)));
    }

    #[test]
    fn unit_exponent_is_normalized_kde() {
        let pts = normal2(100, 1.0, 7);
        let m = kde_fit(&pts, 0.3).unwrap();
        let spec = auto_extent(&pts, &[0.0, 0.0], 0.9, (20, 20)).unwrap();
        let g = eval_on_grid(&m, &spec, 1.0).unwrap();
        let raw: Vec<f64> = (0..spec.n_cells()).map(|c| m.density(&spec.center(c)).unwrap()).collect();
        let total: f64 = raw.iter().sum();
        for (a, b) in g.masses().iter().zip(&raw) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn masses_normalized_for_all_exponents() {
        let pts = normal2(100, 1.0, 8);
        let m = kde_fit(&pts, 0.2).unwrap();
        let spec = auto_extent(&pts, &[0.0, 0.0], 0.6, (40, 40)).unwrap();
        let grid = KdeGrid::evaluate(&m, &spec).unwrap();
        for k in linspace(0.001, 3.0, 25) {
            let s: f64 = grid.compensate(k).unwrap().masses().iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "k={k}: {s}");
        }
    }

    #[test]
    fn uniform_values_stay_uniform() {
        let spec = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![100, 100]).unwrap();
        let grid = KdeGrid::from_ln_values(spec, vec![-0.7; 10_000]).unwrap();
        for k in [0.001, 0.5, 1.0, 2.0, 3.0] {
            let g = grid.compensate(k).unwrap();
            assert!(g.masses().iter().all(|&m| (m - 1e-4).abs() < 1e-15));
            assert!(g.loglik(&[0.37, 0.81]).abs() < 1e-9);
        }
        let g = grid.compensate(1.0).unwrap();
        let outside = g.loglik(&[1.5, 0.5]);
        assert!((outside - (1e-4 * MASS_FLOOR / 1e-4).ln()).abs() < 1e-6, "{outside}");
    }

    #[test]
    fn squaring_sqrt_samples_recovers_target() {
        // Samples of sqrt(N(0, I)) are N(0, 2I).
        let pts = normal2(3000, 2f64.sqrt(), 9);
        let h = select_bandwidth(&pts.select(0..2100), &pts.select(2100..3000), &logspace(0.05, 1.0, 10)).unwrap();
        let m = kde_fit(&pts.select(0..2100), h).unwrap();
        let spec = GridSpec::new(vec![-6.0, -6.0], vec![6.0, 6.0], vec![60, 60]).unwrap();
        let target = BinnedDensity::from_mixture(&GaussianMixture::standard(2).unwrap(), spec.clone()).unwrap();
        let grid = KdeGrid::evaluate(&m, &spec).unwrap();
        let l1 = |k| grid.compensate(k).unwrap().as_binned().l1_distance(&target).unwrap();
        assert!(l1(2.0) < l1(1.0), "{} vs {}", l1(2.0), l1(1.0));
    }

    #[test]
    fn loglik_at_origin_matches_convolution() {
        let pts = normal2(1000, 1.0, 10);
        let h = 0.3;
        let m = kde_fit(&pts, h).unwrap();
        let spec = auto_extent(&pts, &[0.0, 0.0], 3.0 * h, (100, 100)).unwrap();
        let g = eval_on_grid(&m, &spec, 1.0).unwrap();
        let oracle = (1.0 / (2.0 * std::f64::consts::PI * (1.0 + h * h))).ln();
        assert!((g.loglik(&[0.0, 0.0]) - oracle).abs() < 0.2);
    }

    #[test]
    fn config_validation() {
        assert!(CompensationConfig::default().validate().is_ok());
        let bad = CompensationConfig { n_sample: 10, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CompensationConfig { k_search: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CompensationConfig { resolution: (1, 100), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
