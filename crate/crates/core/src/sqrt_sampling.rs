//! Sampling from `P^2 / C` given only a sampler for `P`.
//!
//! Two i.i.d. draws land in the same small cell with probability `P(cell)^2`,
//! so a draw taken from a colliding pair follows the squared density as the
//! cell shrinks. The binned sampler hashes draws into an epsilon-grid until a
//! cell is hit twice; the rejection sampler draws pairs until their distance
//! is below epsilon. Either way one member of the pair is kept by a fair coin.

use std::collections::HashMap;

use rand::Rng;

use crate::densities::{SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng};

/// Default attempt budget per output sample.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquaredMode {
    Binned,
    Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredSamplerConfig {
    /// Cell width for binned mode, distance threshold for rejection mode.
    pub epsilon: f64,
    /// Draws (binned) or pairs (rejection) allowed per output sample.
    pub max_attempts: u64,
    pub mode: SquaredMode,
}

impl SquaredSamplerConfig {
    pub fn new(epsilon: f64, mode: SquaredMode) -> Result<Self> {
        let cfg = SquaredSamplerConfig { epsilon, max_attempts: DEFAULT_MAX_ATTEMPTS, mode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_attempts(self, max_attempts: u64) -> Self {
        SquaredSamplerConfig { max_attempts, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stateful squared sampler over a source density.
pub struct SquaredSampler<'a, S: Sampler + ?Sized> {
    source: &'a S,
    cfg: SquaredSamplerConfig,
    rng: SimRng,
    cells: HashMap<Vec<i64>, Vec<f64>>,
    draws: u64,
    outputs: u64,
}

impl<'a, S: Sampler + ?Sized> SquaredSampler<'a, S> {
    pub fn new(source: &'a S, cfg: SquaredSamplerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(SquaredSampler { source, cfg, rng: stream_rng(seed, &[]), cells: HashMap::new(), draws: 0, outputs: 0 })
    }

    /// Total draws from the source so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn outputs(&self) -> u64 {
        self.outputs
    }

    /// Source draws per emitted sample so far.
    pub fn draws_per_output(&self) -> f64 {
        self.draws as f64 / self.outputs.max(1) as f64
    }

    pub fn next_sample(&mut self) -> Result<Vec<f64>> {
        let out = match self.cfg.mode {
            SquaredMode::Binned => self.next_binned(),
            SquaredMode::Rejection => self.next_rejection(),
        }?;
        self.outputs += 1;
        Ok(out)
    }

    fn draw(&mut self) -> Vec<f64> {
        let mut x = vec![0.0; self.source.dim()];
        self.source.draw(&mut self.rng, &mut x);
        self.draws += 1;
        x
    }

    fn keep_one(&mut self, a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
        if self.rng.random::<bool>() {
            a
        } else {
            b
        }
    }

    fn next_binned(&mut self) -> Result<Vec<f64>> {
        // Each output starts from an empty table.
        self.cells.clear();
        for _ in 0..self.cfg.max_attempts {
            let x = self.draw();
            let key: Vec<i64> = x.iter().map(|v| (v / self.cfg.epsilon).floor() as i64).collect();
            if let Some(prev) = self.cells.remove(&key) {
                self.cells.clear();
                return Ok(self.keep_one(prev, x));
            }
            self.cells.insert(key, x);
        }
        self.cells.clear();
        Err(Error::AttemptsExhausted(self.cfg.max_attempts))
    }

    fn next_rejection(&mut self) -> Result<Vec<f64>> {
        let eps2 = self.cfg.epsilon * self.cfg.epsilon;
        for _ in 0..self.cfg.max_attempts {
            let a = self.draw();
            let b = self.draw();
            let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2 < eps2 {
                return Ok(self.keep_one(a, b));
            }
        }
        Err(Error::AttemptsExhausted(self.cfg.max_attempts))
    }

    pub fn take(&mut self, n_out: usize) -> Result<SampleSet> {
        let mut s = SampleSet::empty(self.source.dim());
        for _ in 0..n_out {
            let x = self.next_sample()?;
            s.push(&x)?;
        }
        Ok(s)
    }
}

fn run<S: Sampler + ?Sized>(
    source: &S,
    cfg: &SquaredSamplerConfig,
    expected: SquaredMode,
    n_out: usize,
    seed: u64,
) -> Result<SampleSet> {
    if cfg.mode != expected {
        return Err(Error::InvalidParameter(format!("sampler configured for {:?} mode", cfg.mode)));
    }
    if n_out == 0 {
        return Err(Error::InvalidParameter("n_out must be >= 1".into()));
    }
    Ok(SquaredSampler::new(source, *cfg, seed)?.take(n_out)?.with_seed(seed))
}

/// Squared sampling by first collision in an epsilon-grid.
pub fn sample_squared_binned<S: Sampler + ?Sized>(
    source: &S,
    cfg: &SquaredSamplerConfig,
    n_out: usize,
    seed: u64,
) -> Result<SampleSet> {
    run(source, cfg, SquaredMode::Binned, n_out, seed)
}

/// Squared sampling by accepting pairs closer than epsilon.
pub fn sample_squared_rejection<S: Sampler + ?Sized>(
    source: &S,
    cfg: &SquaredSamplerConfig,
    n_out: usize,
    seed: u64,
) -> Result<SampleSet> {
    run(source, cfg, SquaredMode::Rejection, n_out, seed)
}

/// Either mode, chosen by `cfg.mode`.
pub fn sample_squared<S: Sampler + ?Sized>(
    source: &S,
    cfg: &SquaredSamplerConfig,
    n_out: usize,
    seed: u64,
) -> Result<SampleSet> {
    run(source, cfg, cfg.mode, n_out, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{Density, UniformBox};

    #[test]
    fn point_mass_collides_immediately() {
        let pm = Density::PointMass(vec![0.25, -3.0]);
        for mode in [SquaredMode::Binned, SquaredMode::Rejection] {
            let cfg = SquaredSamplerConfig::new(0.01, mode).unwrap();
            let mut s = SquaredSampler::new(&pm, cfg, 1).unwrap();
            let out = s.take(10).unwrap();
            assert!(out.iter().all(|p| p == [0.25, -3.0]));
            assert_eq!(s.draws(), 20);
        }
    }

    #[test]
    fn exhausted_attempts_are_reported() {
        let wide = Density::Uniform(UniformBox::new(vec![0.0; 6], vec![1.0; 6]).unwrap());
        for mode in [SquaredMode::Binned, SquaredMode::Rejection] {
            let cfg = SquaredSamplerConfig::new(1e-4, mode).unwrap().with_max_attempts(50);
            let r = sample_squared(&wide, &cfg, 1, 0);
            assert!(matches!(r, Err(Error::AttemptsExhausted(50))), "{mode:?}");
        }
    }

    #[test]
    fn mode_mismatch_and_bad_config() {
        let n = Density::standard_normal(1).unwrap();
        let cfg = SquaredSamplerConfig::new(0.1, SquaredMode::Rejection).unwrap();
        assert!(sample_squared_binned(&n, &cfg, 1, 0).is_err());
        assert!(SquaredSamplerConfig::new(0.0, SquaredMode::Binned).is_err());
        assert!(sample_squared(&n, &cfg, 0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let n = Density::standard_normal(1).unwrap();
        let cfg = SquaredSamplerConfig::new(0.05, SquaredMode::Binned).unwrap();
        assert_eq!(sample_squared(&n, &cfg, 200, 4).unwrap(), sample_squared(&n, &cfg, 200, 4).unwrap());
    }

    struct Alternating(std::cell::Cell<bool>);

    impl Sampler for Alternating {
        fn dim(&self) -> usize {
            1
        }
        fn draw(&self, _rng: &mut SimRng, out: &mut [f64]) {
            let flip = self.0.get();
            self.0.set(!flip);
            out[0] = if flip { 0.5 } else { 0.25 };
        }
    }

    #[test]
    fn coin_picks_either_member_evenly() {
        for mode in [SquaredMode::Binned, SquaredMode::Rejection] {
            let src = Alternating(std::cell::Cell::new(false));
            let cfg = SquaredSamplerConfig::new(1.0, mode).unwrap();
            let out = sample_squared(&src, &cfg, 4000, 9).unwrap();
            let firsts = out.iter().filter(|p| p[0] == 0.25).count();
            assert!((firsts as f64 / 4000.0 - 0.5).abs() < 0.03, "{mode:?}: {firsts}");
        }
    }
}
