//! Evaluable and sampleable probability densities.

mod binned;
mod gaussian;
mod power;

use std::io::Write;

use rand::Rng;

pub use binned::{bin_samples, js_divergence, power_transform_binned, BinnedDensity, GridSpec, OutOfRange};
pub use gaussian::{Component, GaussianMixture};
pub use power::{PowerDensity, REFERENCE_POINTS, REFERENCE_SIGMAS};

use crate::error::{check_dim, Error, Result};
use crate::rng::{stream_rng, SimRng};

/// Anything that can draw i.i.d. points into a buffer.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut SimRng, out: &mut [f64]);
}

/// Uniform density on an axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UniformBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && b > a)) {
            return Err(Error::InvalidParameter("uniform box needs finite lo < hi".into()));
        }
        Ok(UniformBox { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// A probability density the rest of the crate can evaluate and sample.
#[derive(Debug, Clone)]
pub enum Density {
    Mixture(GaussianMixture),
    Power(PowerDensity),
    Binned(BinnedDensity),
    Uniform(UniformBox),
    /// All mass at one location. Its density is `+inf` there and 0 elsewhere.
    PointMass(Vec<f64>),
}

impl Density {
    pub fn standard_normal(dim: usize) -> Result<Self> {
        GaussianMixture::standard(dim).map(Density::Mixture)
    }

    pub fn dim(&self) -> usize {
        match self {
            Density::Mixture(g) => g.dim(),
            Density::Power(p) => p.dim(),
            Density::Binned(b) => b.dim(),
            Density::Uniform(u) => u.lo.len(),
            Density::PointMass(x) => x.len(),
        }
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        match self {
            Density::Mixture(g) => g.pdf(x),
            Density::Power(p) => p.pdf(x),
            Density::Binned(b) => b.pdf(x),
            Density::Uniform(u) => {
                let inside = x.iter().zip(u.lo.iter().zip(&u.hi)).all(|(v, (a, b))| v >= a && v <= b);
                Ok(if inside { 1.0 / u.volume() } else { 0.0 })
            }
            Density::PointMass(loc) => Ok(if loc.as_slice() == x { f64::INFINITY } else { 0.0 }),
        }
    }

    /// Member `k` of the power family generated by this density.
    ///
    /// Powers compose (`(P^a)^b = P^(ab)`), a histogram is transformed bin-wise,
    /// and uniform and point-mass densities are fixed points.
    pub fn powered(&self, exponent: f64) -> Result<Density> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::Degenerate(format!(
                "power exponent must be positive and finite, got {exponent}"
            )));
        }
        Ok(match self {
            Density::Mixture(g) => Density::Power(PowerDensity::new(g.clone(), exponent)?),
            Density::Power(p) => Density::Power(PowerDensity::new(p.base().clone(), p.exponent() * exponent)?),
            Density::Binned(b) => Density::Binned(b.power_transform(exponent)?),
            Density::Uniform(_) | Density::PointMass(_) => self.clone(),
        })
    }

    /// `n` i.i.d. samples, bit-identical for equal `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        let mut rng = stream_rng(seed, &[]);
        let dim = self.dim();
        let mut data = vec![0.0; n * dim];
        for chunk in data.chunks_exact_mut(dim) {
            self.draw(&mut rng, chunk);
        }
        Ok(SampleSet { dim, data, seed: Some(seed) })
    }
}

impl Sampler for Density {
    fn dim(&self) -> usize {
        Density::dim(self)
    }

    fn draw(&self, rng: &mut SimRng, out: &mut [f64]) {
        match self {
            Density::Mixture(g) => g.draw_into(rng, out),
            Density::Power(p) => p.draw_into(rng, out),
            Density::Binned(b) => b.draw_into(rng, out),
            Density::Uniform(u) => {
                for ((o, a), b) in out.iter_mut().zip(&u.lo).zip(&u.hi) {
                    *o = a + (b - a) * rng.random::<f64>();
                }
            }
            Density::PointMass(loc) => out.copy_from_slice(loc),
        }
    }
}

impl From<GaussianMixture> for Density {
    fn from(g: GaussianMixture) -> Self {
        Density::Mixture(g)
    }
}

impl From<BinnedDensity> for Density {
    fn from(b: BinnedDensity) -> Self {
        Density::Binned(b)
    }
}

/// Density value at `x`; see [`Density::pdf`].
pub fn density_eval(d: &Density, x: &[f64]) -> Result<f64> {
    d.pdf(x)
}

/// `n` seeded i.i.d. samples; see [`Density::sample`].
pub fn density_sample(d: &Density, n: usize, seed: u64) -> Result<SampleSet> {
    d.sample(n, seed)
}

/// Points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    seed: Option<u64>,
}

impl SampleSet {
    pub fn empty(dim: usize) -> Self {
        SampleSet { dim, data: Vec::new(), seed: None }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sample dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() % dim });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("sample coordinates must be finite".into()));
        }
        Ok(SampleSet { dim, data, seed: None })
    }

    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dim(dim, p.len())?;
            data.extend(p);
        }
        Self::from_flat(dim, data)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// All values of coordinate `d`.
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.iter().map(|p| p[d]).collect()
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        check_dim(self.dim, p.len())?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("sample coordinates must be finite".into()));
        }
        self.data.extend_from_slice(p);
        Ok(())
    }

    /// Subset of points by index.
    pub fn select(&self, idx: impl IntoIterator<Item = usize>) -> SampleSet {
        let mut data = Vec::new();
        for i in idx {
            data.extend_from_slice(self.point(i));
        }
        SampleSet { dim: self.dim, data, seed: self.seed }
    }

    /// One row per sample with header `x0,...,x{dim-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record((0..self.dim).map(|d| format!("x{d}")))?;
        for p in self.iter() {
            wr.write_record(p.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}
