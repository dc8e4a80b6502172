//! Histogram densities on regular grids.

use std::io::Write;

use rand::Rng;

use super::gaussian::GaussianMixture;
use super::SampleSet;
use crate::error::{check_dim, Error, Result};
use crate::rng::SimRng;
use crate::stats::normal_cdf;

const MASS_TOL: f64 = 1e-9;

/// A regular grid: `bins[d]` equal cells spanning `[lo[d], hi[d])` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one dimension".into()));
        }
        check_dim(lo.len(), hi.len())?;
        check_dim(lo.len(), bins.len())?;
        for d in 0..lo.len() {
            if !(lo[d].is_finite() && hi[d].is_finite() && hi[d] > lo[d]) {
                return Err(Error::InvalidParameter(format!(
                    "grid range [{}, {}) in dimension {d} is empty",
                    lo[d], hi[d]
                )));
            }
            if bins[d] == 0 {
                return Err(Error::InvalidParameter("grid needs at least one bin per dimension".into()));
            }
        }
        Ok(GridSpec { lo, hi, bins })
    }

    /// One-dimensional grid.
    pub fn line(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![bins])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn width(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / self.bins[d] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    /// Index of the bin containing `x` along dimension `d`, if inside.
    fn axis_index(&self, d: usize, x: f64) -> Option<usize> {
        if !(x >= self.lo[d] && x < self.hi[d]) {
            return None;
        }
        let i = ((x - self.lo[d]) / self.width(d)).floor() as usize;
        Some(i.min(self.bins[d] - 1))
    }

    fn axis_index_clamped(&self, d: usize, x: f64) -> usize {
        let f = ((x - self.lo[d]) / self.width(d)).floor();
        if f < 0.0 {
            0
        } else {
            (f as usize).min(self.bins[d] - 1)
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.bins).fold(0, |acc, (&i, &b)| acc * b + i)
    }

    /// Flat (row-major, last dimension fastest) index of the cell containing `x`.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let idx: Option<Vec<usize>> = (0..self.dim()).map(|d| self.axis_index(d, x[d])).collect();
        idx.map(|i| self.flat(&i))
    }

    /// Multi-index of a flat cell index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.bins[d];
            flat /= self.bins[d];
        }
        idx
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.lo[d] + (i as f64 + 0.5) * self.width(d))
            .collect()
    }

    fn matches(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        self.bins == other.bins
            && self.lo.iter().zip(&other.lo).all(|(&a, &b)| close(a, b))
            && self.hi.iter().zip(&other.hi).all(|(&a, &b)| close(a, b))
    }
}

/// What [`bin_samples`] does with samples outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRange {
    #[default]
    Error,
    /// Count the sample in the nearest edge bin.
    Clamp,
}

/// Probability masses on a regular grid. Masses are nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDensity {
    grid: GridSpec,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BinnedDensity {
    pub fn new(grid: GridSpec, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} masses for {} cells",
                masses.len(),
                grid.n_cells()
            )));
        }
        if masses.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter("bin masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!("bin masses sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Ok(BinnedDensity { grid, masses, cumulative })
    }

    /// Normalizes nonnegative `weights` into masses.
    pub fn from_weights(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate(format!("bin weights sum to {total}")));
        }
        Self::new(grid, weights.into_iter().map(|w| w / total).collect())
    }

    /// Exact bin masses of a diagonal Gaussian mixture, renormalized to the grid.
    pub fn from_mixture(mixture: &GaussianMixture, grid: GridSpec) -> Result<Self> {
        check_dim(mixture.dim(), grid.dim())?;
        let n = grid.n_cells();
        let mut weights = vec![0.0; n];
        for c in mixture.components() {
            // Per-axis bin probabilities, then their outer product.
            let axis: Vec<Vec<f64>> = (0..grid.dim())
                .map(|d| {
                    let w = grid.width(d);
                    (0..grid.bins[d])
                        .map(|i| {
                            let a = grid.lo[d] + w * i as f64;
                            normal_cdf(a + w, c.mean[d], c.stddev[d]) - normal_cdf(a, c.mean[d], c.stddev[d])
                        })
                        .collect()
                })
                .collect();
            for (flat, wt) in weights.iter_mut().enumerate() {
                let idx = grid.unflatten(flat);
                *wt += c.weight * idx.iter().enumerate().map(|(d, &i)| axis[d][i]).product::<f64>();
            }
        }
        Self::from_weights(grid, weights)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Density value: cell mass over cell volume inside the grid, 0 outside.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(match self.grid.cell_of(x) {
            Some(i) => self.masses[i] / self.grid.cell_volume(),
            None => 0.0,
        })
    }

    /// Picks a cell by mass, then a uniform point inside it (the inverse CDF
    /// is linear within a cell).
    pub(crate) fn draw_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let mut cell = self.cumulative.partition_point(|&c| c <= u).min(self.masses.len() - 1);
        // Never land in an empty cell because of rounding at the boundary.
        while self.masses[cell] == 0.0 && cell > 0 {
            cell -= 1;
        }
        let idx = self.grid.unflatten(cell);
        for (d, o) in out.iter_mut().enumerate() {
            let w = self.grid.width(d);
            *o = self.grid.lo[d] + (idx[d] as f64 + rng.random::<f64>()) * w;
        }
    }

    /// `masses^k / sum(masses^k)`, computed relative to the largest mass so
    /// that large exponents do not underflow. Empty bins stay empty.
    pub fn power_transform(&self, exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "compensation exponent must be finite and >= 0, got {exponent}"
            )));
        }
        let max = self.masses.iter().copied().fold(0.0, f64::max);
        let weights: Vec<f64> = self
            .masses
            .iter()
            .map(|&m| if m > 0.0 { (exponent * (m / max).ln()).exp() } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate(format!("power transform with exponent {exponent} vanishes")));
        }
        Self::from_weights(self.grid.clone(), weights)
    }

    pub fn l1_distance(&self, other: &BinnedDensity) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum())
    }

    fn check_same_grid(&self, other: &BinnedDensity) -> Result<()> {
        if self.grid.matches(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// CSV with header `bin_center_0,...,bin_center_{n-1},mass`, one row per bin.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|d| format!("bin_center_{d}")).collect();
        header.push("mass".into());
        wr.write_record(&header)?;
        for (i, m) in self.masses.iter().enumerate() {
            let mut row: Vec<String> = self.grid.center(i).iter().map(|c| c.to_string()).collect();
            row.push(m.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Histogram estimator: `masses = counts / n`.
pub fn bin_samples(samples: &SampleSet, grid: &GridSpec, mode: OutOfRange) -> Result<BinnedDensity> {
    if samples.is_empty() {
        return Err(Error::Empty("cannot bin an empty sample set"));
    }
    check_dim(grid.dim(), samples.dim())?;
    let mut counts = vec![0u64; grid.n_cells()];
    let mut idx = vec![0usize; grid.dim()];
    for p in samples.iter() {
        for d in 0..grid.dim() {
            idx[d] = match (grid.axis_index(d, p[d]), mode) {
                (Some(i), _) => i,
                (None, OutOfRange::Clamp) => grid.axis_index_clamped(d, p[d]),
                (None, OutOfRange::Error) => {
                    return Err(Error::OutOfGrid { dim: d, value: p[d], lo: grid.lo[d], hi: grid.hi[d] })
                }
            };
        }
        counts[grid.flat(&idx)] += 1;
    }
    let n = samples.len() as f64;
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    // Summing counts/n can miss 1 by a few ulps; renormalize exactly.
    BinnedDensity::from_weights(grid.clone(), masses)
}

/// Compensation transform on a histogram: `masses_i^k / sum_j masses_j^k`.
pub fn power_transform_binned(b: &BinnedDensity, exponent: f64) -> Result<BinnedDensity> {
    b.power_transform(exponent)
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`. `0 ln 0 = 0`.
///
/// Each bin contributes a term that is symmetric in its two masses, so the
/// result is exactly symmetric and exactly zero for identical inputs.
pub fn js_divergence(a: &BinnedDensity, b: &BinnedDensity) -> Result<f64> {
    a.check_same_grid(b)?;
    let term = |p: f64, m: f64| if p > 0.0 { p * (p / m).ln() } else { 0.0 };
    let js: f64 = a
        .masses
        .iter()
        .zip(&b.masses)
        .map(|(&p, &q)| {
            let m = 0.5 * p + 0.5 * q;
            0.5 * (term(p, m) + term(q, m))
        })
        .sum();
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}
