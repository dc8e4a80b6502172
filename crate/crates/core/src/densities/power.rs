//! The power family `P_k(x) = P(x)^k / C_k` over a Gaussian mixture base.
//!
//! Three sampling strategies are used depending on the base:
//!
//! - a single diagonal Gaussian stays Gaussian, with every stddev divided by
//!   `sqrt(k)`, so it is sampled and normalized in closed form;
//! - other one-dimensional mixtures are tabulated on a reference grid and
//!   sampled by inverse CDF with linear interpolation between grid points;
//! - multi-dimensional mixtures are sampled exactly by rejection from an
//!   envelope built out of the powered components (see [`Envelope`]).

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use super::gaussian::{Component, GaussianMixture};
use crate::error::{check_dim, Error, Result};
use crate::rng::SimRng;
use crate::stats::log_sum_exp;

/// Reference grid points per dimension for normalization.
pub const REFERENCE_POINTS: usize = 4096;
/// Reference grid half-width in component stddevs.
pub const REFERENCE_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct PowerDensity {
    base: GaussianMixture,
    exponent: f64,
    strategy: Strategy,
    ln_norm: OnceLock<std::result::Result<f64, String>>,
}

#[derive(Debug, Clone)]
enum Strategy {
    /// `base^k / C` is itself this Gaussian.
    Exact(GaussianMixture),
    Grid(GridCdf),
    Envelope(Envelope),
}

impl PowerDensity {
    pub fn new(base: GaussianMixture, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::Degenerate(format!(
                "power exponent must be positive and finite, got {exponent}"
            )));
        }
        let strategy = if base.components().len() == 1 {
            let c = &base.components()[0];
            let scale = exponent.sqrt().recip();
            Strategy::Exact(GaussianMixture::new(vec![Component::new(
                1.0,
                c.mean.clone(),
                c.stddev.iter().map(|s| s * scale).collect(),
            )])?)
        } else if base.dim() == 1 {
            Strategy::Grid(GridCdf::build(&base, exponent)?)
        } else {
            Strategy::Envelope(Envelope::build(&base, exponent))
        };
        let ln_norm = OnceLock::new();
        match &strategy {
            Strategy::Exact(_) => {
                let c = &base.components()[0];
                let two_pi = 2.0 * std::f64::consts::PI;
                let v: f64 = c
                    .stddev
                    .iter()
                    .map(|s| 0.5 * (1.0 - exponent) * (two_pi * s * s).ln() - 0.5 * exponent.ln())
                    .sum();
                let _ = ln_norm.set(Ok(v));
            }
            Strategy::Grid(g) => {
                let _ = ln_norm.set(Ok(g.ln_total));
            }
            Strategy::Envelope(_) => {}
        }
        Ok(PowerDensity { base, exponent, strategy, ln_norm })
    }

    pub fn base(&self) -> &GaussianMixture {
        &self.base
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `ln C_k`, the log of the integral of `base^k` over the reference grid.
    ///
    /// Closed form for a single Gaussian; trapezoidal quadrature with
    /// [`REFERENCE_POINTS`] per dimension otherwise (one and two dimensions).
    pub fn ln_norm_constant(&self) -> Result<f64> {
        self.ln_norm
            .get_or_init(|| trapezoid_ln_norm(&self.base, self.exponent))
            .clone()
            .map_err(Error::Degenerate)
    }

    pub fn norm_constant(&self) -> Result<f64> {
        self.ln_norm_constant().map(f64::exp)
    }

    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        match &self.strategy {
            Strategy::Exact(g) => Ok(g.ln_pdf(x)),
            _ => Ok(self.exponent * self.base.ln_pdf(x) - self.ln_norm_constant()?),
        }
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    pub(crate) fn draw_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        match &self.strategy {
            Strategy::Exact(g) => g.draw_into(rng, out),
            Strategy::Grid(g) => out[0] = g.draw(rng),
            Strategy::Envelope(e) => e.draw_into(&self.base, self.exponent, rng, out),
        }
    }
}

fn trapezoid_weights(n: usize) -> impl Fn(usize) -> f64 {
    move |i| if i == 0 || i + 1 == n { 0.5 } else { 1.0 }
}

fn trapezoid_ln_norm(base: &GaussianMixture, k: f64) -> std::result::Result<f64, String> {
    let (lo, hi) = base.extent(REFERENCE_SIGMAS);
    let n = REFERENCE_POINTS;
    let w = trapezoid_weights(n);
    let step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / (n - 1) as f64).collect();
    let terms: Vec<f64> = match base.dim() {
        1 => (0..n)
            .map(|i| k * base.ln_pdf(&[lo[0] + step[0] * i as f64]) + w(i).ln())
            .collect(),
        2 => {
            let mut t = Vec::with_capacity(n * n);
            let mut x = [0.0; 2];
            for i in 0..n {
                x[0] = lo[0] + step[0] * i as f64;
                for j in 0..n {
                    x[1] = lo[1] + step[1] * j as f64;
                    t.push(k * base.ln_pdf(&x) + (w(i) * w(j)).ln());
                }
            }
            t
        }
        d => {
            return Err(format!(
                "no reference-grid normalization for a {d}-dimensional multi-component mixture"
            ))
        }
    };
    let cell: f64 = step.iter().product();
    let v = log_sum_exp(&terms) + cell.ln();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("integral of base^{k} is not finite and positive"))
    }
}

/// Tabulated CDF of `base^k` on the one-dimensional reference grid.
#[derive(Debug, Clone)]
struct GridCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    ln_total: f64,
}

impl GridCdf {
    fn build(base: &GaussianMixture, k: f64) -> Result<Self> {
        let (lo, hi) = base.extent(REFERENCE_SIGMAS);
        let n = REFERENCE_POINTS;
        let h = (hi[0] - lo[0]) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo[0] + h * i as f64).collect();
        let ln_vals: Vec<f64> = xs.iter().map(|&x| k * base.ln_pdf(&[x])).collect();
        let ln_max = ln_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !ln_max.is_finite() {
            return Err(Error::Degenerate(format!("base^{k} vanishes on the reference grid")));
        }
        let vals: Vec<f64> = ln_vals.iter().map(|l| (l - ln_max).exp()).collect();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in vals.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * h;
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Degenerate(format!("integral of base^{k} is not positive")));
        }
        let ln_total = acc.ln() + ln_max;
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(GridCdf { xs, cdf, ln_total })
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }
}

/// Rejection envelope for `f^k` with `f = sum_i w_i phi_i`.
///
/// For `k <= 1`, `f^k <= sum_i (w_i phi_i)^k`; for `k > 1`, the power-mean
/// inequality gives `f^k <= m^(k-1) sum_i (w_i phi_i)^k` with `m` components.
/// Each `(w_i phi_i)^k` is an unnormalized Gaussian with stddevs scaled by
/// `1/sqrt(k)` and mass `a_i = w_i^k * int phi_i^k`, so the envelope is a
/// Gaussian mixture that can be sampled directly.
#[derive(Debug, Clone)]
struct Envelope {
    scaled: GaussianMixture,
    ln_slack: f64,
}

impl Envelope {
    fn build(base: &GaussianMixture, k: f64) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let ln_a: Vec<f64> = base
            .components()
            .iter()
            .map(|c| {
                let ln_int: f64 = c
                    .stddev
                    .iter()
                    .map(|s| 0.5 * (1.0 - k) * (two_pi * s * s).ln() - 0.5 * k.ln())
                    .sum();
                k * c.weight.ln() + ln_int
            })
            .collect();
        let ln_total = log_sum_exp(&ln_a);
        let scale = k.sqrt().recip();
        let comps = base
            .components()
            .iter()
            .zip(&ln_a)
            .map(|(c, la)| {
                Component::new(
                    (la - ln_total).exp(),
                    c.mean.clone(),
                    c.stddev.iter().map(|s| s * scale).collect(),
                )
            })
            .collect::<Vec<_>>();
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        let comps = comps
            .into_iter()
            .map(|mut c| {
                c.weight /= total;
                c
            })
            .collect();
        let m = base.components().len() as f64;
        let ln_slack = if k > 1.0 { (k - 1.0) * m.ln() } else { 0.0 };
        Envelope {
            scaled: GaussianMixture::new(comps).expect("envelope weights are normalized"),
            ln_slack,
        }
    }

    fn draw_into(&self, base: &GaussianMixture, k: f64, rng: &mut SimRng, out: &mut [f64]) {
        let mut terms = vec![0.0; base.components().len()];
        loop {
            let c = &self.scaled.components()[self.scaled.pick_component(rng)];
            for ((o, &m), &s) in out.iter_mut().zip(&c.mean).zip(&c.stddev) {
                let z: f64 = rng.sample(StandardNormal);
                *o = m + s * z;
            }
            for (t, comp) in terms.iter_mut().zip(base.components()) {
                *t = k * (comp.weight.ln() + comp.ln_pdf(out));
            }
            let ln_env = self.ln_slack + log_sum_exp(&terms);
            let ln_target = k * base.ln_pdf(out);
            let u: f64 = rng.random();
            if u.ln() < ln_target - ln_env {
                return;
            }
        }
    }
}
