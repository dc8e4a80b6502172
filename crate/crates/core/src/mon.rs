//! Monte Carlo estimation of the Minimum-over-N loss.
//!
//! One *draw* takes `N` candidates from a model density and returns the
//! Euclidean distance from a target to the closest candidate. EMoN is the
//! expectation of a draw at a fixed target; the MoN loss averages EMoN over a
//! dataset of targets.
//!
//! Draw `r` for target `i` always uses the stream `derive_seed(seed, [i, r])`,
//! independent of the model. Scans over exponents or over `N` therefore reuse
//! the same underlying random numbers for every grid point, which makes the
//! loss curves smooth and their argmin stable.

use std::io::Write;

use rayon::prelude::*;

use crate::densities::{Density, SampleSet, Sampler};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream_rng, SimRng};
use crate::stats::{arange_inclusive, mean_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonConfig {
    /// Candidates per draw (`N`).
    pub n_candidates: usize,
    /// Draws per target (`R`).
    pub repetitions: usize,
    pub seed: u64,
}

impl MonConfig {
    pub fn new(n_candidates: usize, repetitions: usize, seed: u64) -> Result<Self> {
        let cfg = MonConfig { n_candidates, repetitions, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("R must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_candidates(self, n_candidates: usize) -> Self {
        MonConfig { n_candidates, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonEstimate {
    pub value: f64,
    /// Monte Carlo standard error over repetitions: the sample standard
    /// deviation of the `R` per-repetition averages divided by `sqrt(R)`.
    pub std_error: f64,
    pub config: MonConfig,
}

fn min_distance<S: Sampler + ?Sized>(p: &S, x_star: &[f64], n: usize, rng: &mut SimRng, buf: &mut [f64]) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..n {
        p.draw(rng, buf);
        let d2: f64 = buf.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
        // Strict comparison keeps the first index among ties.
        if d2 < best {
            best = d2;
        }
    }
    best.sqrt()
}

/// One MoN draw: the distance from `x_star` to the nearest of `N` samples of `p`.
pub fn mon_draw(p: &Density, x_star: &[f64], cfg: &MonConfig, draw_seed: u64) -> Result<f64> {
    cfg.validate()?;
    check_dim(p.dim(), x_star.len())?;
    let mut rng = stream_rng(draw_seed, &[]);
    let mut buf = vec![0.0; p.dim()];
    Ok(min_distance(p, x_star, cfg.n_candidates, &mut rng, &mut buf))
}

/// All draws, laid out `[point][repetition]`.
fn draw_matrix<S: Sampler + Sync + ?Sized>(p: &S, targets: &SampleSet, cfg: &MonConfig) -> Vec<f64> {
    let r = cfg.repetitions;
    let rows: Vec<Vec<f64>> = (0..targets.len())
        .into_par_iter()
        .map(|i| {
            let x = targets.point(i);
            let mut buf = vec![0.0; p.dim()];
            (0..r)
                .map(|rep| {
                    let mut rng = stream_rng(cfg.seed, &[i as u64, rep as u64]);
                    min_distance(p, x, cfg.n_candidates, &mut rng, &mut buf)
                })
                .collect()
        })
        .collect();
    rows.concat()
}

fn summarize(draws: &[f64], n_points: usize, cfg: MonConfig) -> MonEstimate {
    let r = cfg.repetitions;
    let rep_means: Vec<f64> = (0..r)
        .map(|rep| (0..n_points).map(|i| draws[i * r + rep]).sum::<f64>() / n_points as f64)
        .collect();
    let value = rep_means.iter().sum::<f64>() / r as f64;
    let std_error = if r >= 2 {
        mean_std(&rep_means).1 / (r as f64).sqrt()
    } else {
        // One draw per target: fall back to the spread across targets.
        mean_std(draws).1 / (draws.len() as f64).sqrt()
    };
    MonEstimate { value, std_error, config: cfg }
}

/// Estimates `EMoN_p(x*)` from `R` independent draws.
///
/// The standard error needs `R >= 2`; with `R = 1` it is reported as 0.
pub fn emon_estimate(p: &Density, x_star: &[f64], cfg: &MonConfig) -> Result<MonEstimate> {
    cfg.validate()?;
    check_dim(p.dim(), x_star.len())?;
    let target = SampleSet::from_flat(x_star.len(), x_star.to_vec())?;
    let draws = draw_matrix(p, &target, cfg);
    Ok(summarize(&draws, 1, *cfg))
}

/// Closed-form expected minimum distance from a target at `offset` inside a
/// bin `[-epsilon, epsilon]` to the nearest of `z` uniform samples in the bin:
/// `epsilon / (z + 1) * (1 + (|offset| / epsilon)^(z + 1))`.
pub fn expected_min_in_bin(epsilon: f64, offset: f64, z: u32) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("bin half-width must be positive, got {epsilon}")));
    }
    if z == 0 {
        return Err(Error::InvalidParameter("sample count z must be >= 1".into()));
    }
    if offset.is_nan() || offset.abs() > epsilon {
        return Err(Error::OutsideBin { offset, epsilon });
    }
    let zp1 = z as f64 + 1.0;
    Ok(epsilon / zp1 * (1.0 + (offset.abs() / epsilon).powf(zp1)))
}

/// Dataset-level MoN loss: the average of EMoN estimates over `ground_truth`.
pub fn mon_loss_estimate(p: &Density, ground_truth: &SampleSet, cfg: &MonConfig) -> Result<MonEstimate> {
    cfg.validate()?;
    if ground_truth.is_empty() {
        return Err(Error::Empty("MoN loss needs at least one ground-truth point"));
    }
    check_dim(p.dim(), ground_truth.dim())?;
    let draws = draw_matrix(p, ground_truth, cfg);
    Ok(summarize(&draws, ground_truth.len(), *cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub k: f64,
    pub estimate: MonEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentScan {
    /// Exponent with the smallest estimated loss; ties go to the smaller `k`.
    pub k_star: f64,
    pub points: Vec<ScanPoint>,
}

/// Default exponent grid: 25 values from 0.3 to 1.5.
pub fn default_k_grid() -> Vec<f64> {
    arange_inclusive(0.3, 1.5, 0.05)
}

fn check_sorted(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} must not be empty")));
    }
    if xs.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1]) {
        return Err(Error::InvalidParameter(format!("{what} must be sorted ascending")));
    }
    Ok(())
}

/// Finds the member of the power family `base^k / C_k` with the smallest MoN
/// loss on `ground_truth`.
pub fn minimizing_exponent_search(
    base: &Density,
    ground_truth: &SampleSet,
    k_grid: &[f64],
    cfg: &MonConfig,
) -> Result<ExponentScan> {
    check_sorted(k_grid, "k grid")?;
    let mut points = Vec::with_capacity(k_grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &k in k_grid {
        let p = base.powered(k)?;
        let estimate = mon_loss_estimate(&p, ground_truth, cfg)?;
        if best.is_none_or(|(_, v)| estimate.value < v) {
            best = Some((k, estimate.value));
        }
        points.push(ScanPoint { k, estimate });
    }
    Ok(ExponentScan { k_star: best.map(|b| b.0).unwrap_or(k_grid[0]), points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NScan {
    pub n: usize,
    pub scan: ExponentScan,
}

/// One exponent search per candidate count in `n_list`.
pub fn k_vs_n_scan(
    base: &Density,
    ground_truth: &SampleSet,
    n_list: &[usize],
    k_grid: &[f64],
    cfg: &MonConfig,
) -> Result<Vec<NScan>> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("N list must not be empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("N list must be sorted ascending".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let scan = minimizing_exponent_search(base, ground_truth, k_grid, &cfg.with_candidates(n))?;
            Ok(NScan { n, scan })
        })
        .collect()
}

/// `k,loss,std_error` rows for one scan.
pub fn write_scan_csv<W: Write>(w: W, scan: &ExponentScan) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "loss", "std_error"])?;
    for p in &scan.points {
        wr.write_record([p.k.to_string(), p.estimate.value.to_string(), p.estimate.std_error.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// `N,k,loss,std_error` rows for a scan over `N`.
pub fn write_n_scan_csv<W: Write>(w: W, scans: &[NScan]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["N", "k", "loss", "std_error"])?;
    for s in scans {
        for p in &s.scan.points {
            wr.write_record([
                s.n.to_string(),
                p.k.to_string(),
                p.estimate.value.to_string(),
                p.estimate.std_error.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{GaussianMixture, UniformBox};

    fn uniform(eps: f64) -> Density {
        Density::Uniform(UniformBox::interval(-eps, eps).unwrap())
    }

    #[test]
    fn closed_form_examples() {
        assert!((expected_min_in_bin(1.0, 0.0, 4).unwrap() - 0.2).abs() < 1e-15);
        assert!((expected_min_in_bin(1.0, 0.5, 4).unwrap() - 0.20625).abs() < 1e-15);
        assert!((expected_min_in_bin(1.0, 1.0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((expected_min_in_bin(0.5, 0.25, 3).unwrap() - 0.1328125).abs() < 1e-15);
        assert!((expected_min_in_bin(0.5, -0.25, 3).unwrap() - 0.1328125).abs() < 1e-15);
        assert!(matches!(expected_min_in_bin(1.0, 1.5, 2), Err(Error::OutsideBin { .. })));
        assert!(expected_min_in_bin(0.0, 0.0, 2).is_err());
        assert!(expected_min_in_bin(1.0, 0.0, 0).is_err());
    }

    /// Independent route to the closed form: numerically integrate the
    /// survival function `S(x)^z` of the minimum distance.
    fn survival_quadrature(eps: f64, offset: f64, z: u32) -> f64 {
        let a = offset.abs();
        let s = |x: f64| {
            let right = ((eps - a - x) / (2.0 * eps)).max(0.0);
            let left = ((a - x + eps) / (2.0 * eps)).clamp(0.0, 1.0);
            (right + left).min(1.0)
        };
        let n = 200_000;
        let h = (eps + a) / n as f64;
        (0..n).map(|i| s((i as f64 + 0.5) * h).powi(z as i32) * h).sum()
    }

    #[test]
    fn closed_form_matches_survival_integral() {
        for &eps in &[0.5, 1.0, 2.0] {
            for &frac in &[0.0, 0.3, 0.5, 0.9, 1.0] {
                for &z in &[1u32, 2, 4, 9] {
                    let exact = expected_min_in_bin(eps, frac * eps, z).unwrap();
                    let quad = survival_quadrature(eps, frac * eps, z);
                    assert!((exact - quad).abs() < 1e-8, "eps={eps} frac={frac} z={z}: {exact} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn emon_matches_closed_form_on_uniform_bin() {
        for (offset, expect) in [(0.0, 0.2), (0.5, 0.20625)] {
            let cfg = MonConfig::new(4, 100_000, 3).unwrap();
            let est = emon_estimate(&uniform(1.0), &[offset], &cfg).unwrap();
            assert!((est.value - expect).abs() < 3.0 * est.std_error, "{est:?} vs {expect}");
        }
    }

    #[test]
    fn point_mass_draws_are_zero() {
        let pm = Density::PointMass(vec![0.3, -1.0]);
        let cfg = MonConfig::new(5, 10, 0).unwrap();
        let e = emon_estimate(&pm, &[0.3, -1.0], &cfg).unwrap();
        assert_eq!(e.value, 0.0);
        let tiny = Density::Mixture(GaussianMixture::isotropic(vec![0.7], 1e-12).unwrap());
        let d = mon_draw(&tiny, &[0.7], &MonConfig::new(1, 1, 0).unwrap(), 5).unwrap();
        assert!(d < 1e-10);
    }

    #[test]
    fn half_normal_mean_for_single_candidate() {
        // |x| for x ~ N(0,1) has mean sqrt(2/pi).
        let p = Density::standard_normal(1).unwrap();
        let cfg = MonConfig::new(1, 1_000_000, 8).unwrap();
        let e = emon_estimate(&p, &[0.0], &cfg).unwrap();
        assert!((e.value - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.002, "{e:?}");
    }

    #[test]
    fn dimension_and_empty_errors() {
        let p = Density::standard_normal(2).unwrap();
        let cfg = MonConfig::new(2, 2, 0).unwrap();
        assert!(matches!(mon_draw(&p, &[0.0], &cfg, 1), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(emon_estimate(&p, &[0.0], &cfg), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(mon_loss_estimate(&p, &SampleSet::empty(2), &cfg), Err(Error::Empty(_))));
        assert!(MonConfig::new(0, 1, 0).is_err());
        assert!(MonConfig::new(1, 0, 0).is_err());
    }

    #[test]
    fn std_error_shrinks_with_repetitions() {
        let p = Density::standard_normal(1).unwrap();
        let gt = p.sample(200, 1).unwrap();
        let a = mon_loss_estimate(&p, &gt, &MonConfig::new(8, 400, 2).unwrap()).unwrap();
        let b = mon_loss_estimate(&p, &gt, &MonConfig::new(8, 800, 2).unwrap()).unwrap();
        let ratio = b.std_error / a.std_error;
        // Expected 1/sqrt(2) = 0.707; the ratio of two sample stds at R=400/800
        // has a relative spread of a few percent.
        assert!((ratio - 0.5f64.sqrt()).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn point_mass_scan_ties_to_smallest_k() {
        let pm = Density::PointMass(vec![1.0]);
        let gt = SampleSet::from_flat(1, vec![1.0]).unwrap();
        let scan = minimizing_exponent_search(&pm, &gt, &[0.5, 1.0, 2.0], &MonConfig::new(4, 3, 0).unwrap()).unwrap();
        assert_eq!(scan.k_star, 0.5);
        assert!(scan.points.iter().all(|p| p.estimate.value == 0.0));
    }

    #[test]
    fn single_k_grid_returns_that_k() {
        let p = Density::standard_normal(1).unwrap();
        let gt = p.sample(50, 4).unwrap();
        let scan = minimizing_exponent_search(&p, &gt, &[1.0], &MonConfig::new(4, 2, 0).unwrap()).unwrap();
        assert_eq!(scan.k_star, 1.0);
    }

    #[test]
    fn unsorted_inputs_rejected() {
        let p = Density::standard_normal(1).unwrap();
        let gt = p.sample(5, 4).unwrap();
        let cfg = MonConfig::new(4, 2, 0).unwrap();
        assert!(minimizing_exponent_search(&p, &gt, &[1.0, 0.5], &cfg).is_err());
        assert!(minimizing_exponent_search(&p, &gt, &[], &cfg).is_err());
        assert!(k_vs_n_scan(&p, &gt, &[4, 2], &[1.0], &cfg).is_err());
    }

    #[test]
    fn csv_layouts() {
        let p = Density::standard_normal(1).unwrap();
        let gt = p.sample(5, 4).unwrap();
        let cfg = MonConfig::new(2, 2, 0).unwrap();
        let scans = k_vs_n_scan(&p, &gt, &[1, 2], &[0.5, 1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        write_n_scan_csv(&mut buf, &scans).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,k,loss,std_error");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,0.5,"));
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &scans[0].scan).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,loss,std_error\n0.5,"));
    }
}
