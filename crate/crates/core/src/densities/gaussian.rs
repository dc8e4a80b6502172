use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::rng::SimRng;
use crate::stats::{log_sum_exp, normal_ln_pdf};

const WEIGHT_TOL: f64 = 1e-9;

/// One axis-aligned Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl Component {
    pub fn new(weight: f64, mean: Vec<f64>, stddev: Vec<f64>) -> Self {
        Component { weight, mean, stddev }
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.stddev)
            .zip(x)
            .map(|((&m, &s), &xi)| normal_ln_pdf(xi, m, s))
            .sum()
    }
}

/// Mixture of Gaussians with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or(Error::Empty("mixture without components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("mixture dimension must be >= 1".into()));
        }
        let mut total = 0.0;
        for c in &components {
            check_dim(dim, c.mean.len())?;
            check_dim(dim, c.stddev.len())?;
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight {} is not a probability", c.weight)));
            }
            if c.stddev.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                return Err(Error::InvalidParameter("stddev must be positive and finite".into()));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidParameter("mean must be finite".into()));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Ok(GaussianMixture { components, dim, cumulative })
    }

    /// Equal-weight mixture of isotropic components given as `(mean, stddev)`.
    ///
    /// This is how unnormalized sums such as `N(2,1) + N(4,1)` are written.
    pub fn equal_weights(parts: &[(Vec<f64>, f64)]) -> Result<Self> {
        let w = 1.0 / parts.len().max(1) as f64;
        Self::new(
            parts
                .iter()
                .map(|(m, s)| Component::new(w, m.clone(), vec![*s; m.len()]))
                .collect(),
        )
    }

    /// Single isotropic Gaussian.
    pub fn isotropic(mean: Vec<f64>, stddev: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(vec![Component::new(1.0, mean, vec![stddev; d])])
    }

    /// `N(0, I_dim)`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::isotropic(vec![0.0; dim], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].ln_pdf(x);
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.ln_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.ln_pdf(x).exp())
    }

    pub(crate) fn pick_component(&self, rng: &mut SimRng) -> usize {
        if self.components.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1)
    }

    pub(crate) fn draw_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        let c = &self.components[self.pick_component(rng)];
        for ((o, &m), &s) in out.iter_mut().zip(&c.mean).zip(&c.stddev) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + s * z;
        }
    }

    /// Per-dimension interval covering every component's mean +- `sigmas` stddevs.
    pub fn extent(&self, sigmas: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in &self.components {
            for d in 0..self.dim {
                lo[d] = lo[d].min(c.mean[d] - sigmas * c.stddev[d]);
                hi[d] = hi[d].max(c.mean[d] + sigmas * c.stddev[d]);
            }
        }
        (lo, hi)
    }

    /// Overall mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, &x) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * x;
            }
        }
        m
    }

    /// Per-dimension standard deviation of the mixture.
    pub fn marginal_stddev(&self) -> Vec<f64> {
        let mean = self.mean();
        (0..self.dim)
            .map(|d| {
                self.components
                    .iter()
                    .map(|c| c.weight * (c.stddev[d].powi(2) + (c.mean[d] - mean[d]).powi(2)))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}
