//! Trajectory scene files, synthetic scene generation and the MoN metric on
//! whole trajectories.
//!
//! A scene file is JSONL, one scene per line:
//!
//! ```text
//! {"meta": {"T": 3, "units": "meters"}}
//! {"scene_id": "s0001", "observed": [[x, y], ...], "ground_truth": [[x, y], ...], "samples": [[[x, y], ...], ...]}
//! ```
//!
//! The `meta` line is optional. Every ground truth and every sampled future
//! in a file must have the same horizon `T`.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{Component, GaussianMixture, PowerDensity, SampleSet};
use crate::error::{Error, Result};
use crate::mon::{MonConfig, MonEstimate};
use crate::rng::{derive_seed, hash_str, stream_rng};
use crate::stats::mean_std;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    #[serde(default)]
    pub observed: Vec<Point>,
    pub ground_truth: Vec<Point>,
    /// `K` sampled futures, each `T` points long.
    pub samples: Vec<Vec<Point>>,
}

impl Scene {
    pub fn horizon(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::InvalidScene { scene: self.scene_id.clone(), message: message.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(self.invalid("empty scene_id"));
        }
        let t = self.horizon();
        if t == 0 {
            return Err(self.invalid("ground_truth is empty"));
        }
        if self.samples.is_empty() {
            return Err(self.invalid("no sampled futures"));
        }
        if let Some(i) = self.samples.iter().position(|s| s.len() != t) {
            return Err(self.invalid(format!(
                "sample {i} has {} points, ground_truth has {t}",
                self.samples[i].len()
            )));
        }
        let finite = |pts: &[Point]| pts.iter().flatten().all(|v| v.is_finite());
        if !finite(&self.observed) || !finite(&self.ground_truth) || !self.samples.iter().all(|s| finite(s)) {
            return Err(self.invalid("non-finite coordinate"));
        }
        Ok(())
    }

    /// Ground-truth position at 1-based timestep `t`.
    pub fn ground_truth_at(&self, t: usize) -> Point {
        self.ground_truth[t - 1]
    }

    /// All sampled positions at 1-based timestep `t`, as a 2-D sample set.
    pub fn samples_at(&self, t: usize) -> SampleSet {
        let flat = self.samples.iter().flat_map(|s| s[t - 1]).collect();
        SampleSet::from_flat(2, flat).expect("flat layout is 2-D by construction")
    }

    fn flat_ground_truth(&self) -> Vec<f64> {
        self.ground_truth.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: SceneMeta,
}

/// A validated collection of scenes sharing one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSet {
    scenes: Vec<Scene>,
    horizon: usize,
    units: Option<String>,
}

impl SceneSet {
    pub fn new(scenes: Vec<Scene>) -> Result<Self> {
        let first = scenes.first().ok_or(Error::Empty("scene set without scenes"))?;
        let horizon = first.horizon();
        let mut ids = HashSet::new();
        for s in &scenes {
            s.validate()?;
            if s.horizon() != horizon {
                return Err(s.invalid(format!("horizon {} differs from {horizon}", s.horizon())));
            }
            if !ids.insert(s.scene_id.as_str()) {
                return Err(s.invalid("duplicate scene_id"));
            }
        }
        Ok(SceneSet { scenes, horizon, units: None })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    /// The smallest sample count over all scenes.
    pub fn min_samples(&self) -> usize {
        self.scenes.iter().map(Scene::n_samples).min().unwrap_or(0)
    }

    /// Scenes with the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<SceneSet> {
        let scenes = idx.iter().map(|&i| self.scenes[i].clone()).collect();
        Ok(SceneSet { units: self.units.clone(), ..SceneSet::new(scenes)? })
    }

    /// Splits into the first `n_first` scenes and the rest.
    pub fn split_at(&self, n_first: usize) -> Result<(SceneSet, SceneSet)> {
        if n_first == 0 || n_first >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "split point {n_first} must leave both halves nonempty ({} scenes)",
                self.len()
            )));
        }
        let a: Vec<usize> = (0..n_first).collect();
        let b: Vec<usize> = (n_first..self.len()).collect();
        Ok((self.subset(&a)?, self.subset(&b)?))
    }

    /// Indices of the scenes sorted by `scene_id`, the canonical reduction order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scenes[a].scene_id.cmp(&self.scenes[b].scene_id));
        idx
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = MetaLine { meta: SceneMeta { horizon: self.horizon, units: self.units.clone() } };
        serde_json::to_writer(&mut w, &meta)?;
        w.write_all(b"\n")?;
        for s in &self.scenes {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<SceneSet> {
        let mut scenes = Vec::new();
        let mut meta: Option<SceneMeta> = None;
        let mut ids = HashSet::new();
        let mut horizon = None;
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| Error::Parse { line: lineno, message: e.to_string() };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(parse_err)?;
            if value.get("meta").is_some() {
                if !scenes.is_empty() || meta.is_some() {
                    return Err(Error::Parse { line: lineno, message: "meta record must be the first line".into() });
                }
                meta = Some(serde_json::from_value::<MetaLine>(value).map_err(parse_err)?.meta);
                continue;
            }
            let scene: Scene = serde_json::from_value(value).map_err(parse_err)?;
            let at_line = |e: Error| Error::Parse { line: lineno, message: e.to_string() };
            scene.validate().map_err(at_line)?;
            let expected = *horizon.get_or_insert(meta.as_ref().map_or(scene.horizon(), |m| m.horizon));
            if scene.horizon() != expected {
                return Err(at_line(scene.invalid(format!(
                    "horizon {} differs from {expected}",
                    scene.horizon()
                ))));
            }
            if !ids.insert(scene.scene_id.clone()) {
                return Err(at_line(scene.invalid("duplicate scene_id")));
            }
            scenes.push(scene);
        }
        let mut set = SceneSet::new(scenes)?;
        set.units = meta.and_then(|m| m.units);
        Ok(set)
    }
}

pub fn load_scenes(path: impl AsRef<Path>) -> Result<SceneSet> {
    SceneSet::read_jsonl(BufReader::new(File::open(path)?))
}

pub fn save_scenes(scenes: &SceneSet, path: impl AsRef<Path>) -> Result<()> {
    scenes.write_jsonl(BufWriter::new(File::create(path)?))
}

/// How sampled futures relate to the ground-truth distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    /// Samples follow the ground-truth distribution.
    Faithful,
    /// Samples follow its square root, the MoN-trained optimum.
    SqrtDilated,
    /// Samples follow its `k`-th power.
    Power(f64),
}

impl SynthKind {
    pub fn exponent(&self) -> f64 {
        match self {
            SynthKind::Faithful => 1.0,
            SynthKind::SqrtDilated => 0.5,
            SynthKind::Power(k) => *k,
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthKind::Faithful => f.write_str("faithful"),
            SynthKind::SqrtDilated => f.write_str("sqrt_dilated"),
            SynthKind::Power(k) => write!(f, "power({k})"),
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    /// Accepts `faithful`, `sqrt_dilated`, `power(k)` and `power:k`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "faithful" => return Ok(SynthKind::Faithful),
            "sqrt_dilated" | "sqrt" => return Ok(SynthKind::SqrtDilated),
            _ => {}
        }
        let arg = s
            .strip_prefix("power(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("power:"))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scene kind `{s}`")))?;
        let k: f64 = arg
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad exponent in `{s}`")))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent must be positive, got {k}")));
        }
        Ok(SynthKind::Power(k))
    }
}

/// Two-mode random-walk dynamics.
///
/// Each scene gets a random heading. Along it, every step moves `speed`
/// forward and `lateral` to the left or to the right (one choice per
/// trajectory), plus isotropic Gaussian noise with stddev `noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkDynamics {
    pub speed: f64,
    pub lateral: f64,
    pub noise: f64,
    pub observed_len: usize,
}

impl Default for WalkDynamics {
    fn default() -> Self {
        WalkDynamics { speed: 1.0, lateral: 1.0, noise: 0.3, observed_len: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub n_scenes: usize,
    /// Sampled futures per scene (`K`).
    pub n_samples: usize,
    pub horizon: usize,
    pub seed: u64,
    pub dynamics: WalkDynamics,
}

impl SynthConfig {
    pub fn new(kind: SynthKind, n_scenes: usize, n_samples: usize, horizon: usize, seed: u64) -> Self {
        SynthConfig { kind, n_scenes, n_samples, horizon, seed, dynamics: WalkDynamics::default() }
    }
}

/// The generating distributions of one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGenerator {
    pub origin: Point,
    /// Per-step mean displacement of each mode.
    pub step_means: [Point; 2],
    pub noise: f64,
    pub horizon: usize,
    /// Exponent applied to the joint trajectory density for the samples.
    pub sample_exponent: f64,
}

impl SceneGenerator {
    /// Joint density of the `2T` step displacements.
    pub fn displacement_mixture(&self) -> GaussianMixture {
        let comps = self
            .step_means
            .iter()
            .map(|m| {
                let mean = (0..self.horizon).flat_map(|_| *m).collect();
                Component::new(0.5, mean, vec![self.noise; 2 * self.horizon])
            })
            .collect();
        GaussianMixture::new(comps).expect("valid by construction")
    }

    fn marginal(&self, t: usize, exponent: f64) -> Result<GaussianMixture> {
        if t == 0 || t > self.horizon {
            return Err(Error::InvalidParameter(format!("timestep {t} outside 1..={}", self.horizon)));
        }
        let sd = self.noise * (t as f64 / exponent).sqrt();
        let parts: Vec<(Vec<f64>, f64)> = self
            .step_means
            .iter()
            .map(|m| (vec![self.origin[0] + t as f64 * m[0], self.origin[1] + t as f64 * m[1]], sd))
            .collect();
        GaussianMixture::equal_weights(&parts)
    }

    /// Ground-truth position density at 1-based timestep `t`.
    pub fn ground_truth_marginal(&self, t: usize) -> Result<GaussianMixture> {
        self.marginal(t, 1.0)
    }

    /// Position density of the sampled futures at timestep `t`.
    ///
    /// Powering the joint density of two equal-weight, equal-spread modes
    /// scales every displacement stddev by `1/sqrt(k)` and keeps the weights,
    /// so each marginal is again a two-mode mixture.
    pub fn sample_marginal(&self, t: usize) -> Result<GaussianMixture> {
        self.marginal(t, self.sample_exponent)
    }
}

fn cumulative(origin: Point, steps: &[f64]) -> Vec<Point> {
    let mut pos = origin;
    steps
        .chunks_exact(2)
        .map(|d| {
            pos = [pos[0] + d[0], pos[1] + d[1]];
            pos
        })
        .collect()
}

/// Generates synthetic scenes with known ground-truth dilation.
///
/// Ground truth depends only on the seed and the scene index, never on the
/// kind, so runs of different kinds with equal seeds share ground truth.
pub fn synth_scenes(cfg: &SynthConfig) -> Result<(SceneSet, Vec<SceneGenerator>)> {
    let k = cfg.kind.exponent();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {k}")));
    }
    if cfg.n_scenes == 0 || cfg.n_samples == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidParameter("n_scenes, K and T must all be >= 1".into()));
    }
    let dy = &cfg.dynamics;
    if !(dy.noise > 0.0 && dy.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be positive, got {}", dy.noise)));
    }
    let domain = hash_str("synth_scenes");
    let out: Vec<Result<(Scene, SceneGenerator)>> = (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| {
            let mut setup = stream_rng(cfg.seed, &[domain, i as u64, 0]);
            let heading = setup.random::<f64>() * std::f64::consts::TAU;
            let (s, c) = heading.sin_cos();
            let rot = |fwd: f64, left: f64| [c * fwd - s * left, s * fwd + c * left];
            let origin = [setup.random_range(-10.0..10.0), setup.random_range(-10.0..10.0)];
            let step_means = [rot(dy.speed, dy.lateral), rot(dy.speed, -dy.lateral)];
            let back = rot(dy.speed, 0.0);
            let observed = (0..dy.observed_len)
                .map(|j| {
                    let n = (dy.observed_len - 1 - j) as f64;
                    [origin[0] - n * back[0], origin[1] - n * back[1]]
                })
                .collect();
            let gen = SceneGenerator { origin, step_means, noise: dy.noise, horizon: cfg.horizon, sample_exponent: k };
            let joint = gen.displacement_mixture();

            let mut buf = vec![0.0; 2 * cfg.horizon];
            let mut gt_rng = stream_rng(cfg.seed, &[domain, i as u64, 1]);
            joint.draw_into(&mut gt_rng, &mut buf);
            let ground_truth = cumulative(origin, &buf);

            let powered = PowerDensity::new(joint, k)?;
            let mut rng = stream_rng(cfg.seed, &[domain, i as u64, 2]);
            let samples = (0..cfg.n_samples)
                .map(|_| {
                    powered.draw_into(&mut rng, &mut buf);
                    cumulative(origin, &buf)
                })
                .collect();
            let scene = Scene { scene_id: format!("s{:04}", i + 1), observed, ground_truth, samples };
            Ok((scene, gen))
        })
        .collect();
    let (scenes, gens): (Vec<_>, Vec<_>) = out.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((SceneSet::new(scenes)?.with_units("meters"), gens))
}

/// MoN metric on whole trajectories.
///
/// For every scene and repetition, `N` of the `K` sampled futures are chosen
/// without replacement and the smallest Euclidean distance between a chosen
/// future and the ground truth, both flattened to `2T`-vectors, is recorded.
/// The estimate averages over scenes and repetitions; its standard error is
/// the spread of the per-repetition averages over `sqrt(R)`.
///
/// Each scene draws from a stream keyed by its `scene_id`, and its samples are
/// put in a canonical order first, so the result does not depend on the order
/// of scenes in the set or of samples within a scene.
pub fn mon_metric(scenes: &SceneSet, n: usize, repetitions: usize, seed: u64) -> Result<MonEstimate> {
    let cfg = MonConfig::new(n, repetitions, seed)?;
    if let Some(s) = scenes.scenes().iter().find(|s| s.n_samples() < n) {
        return Err(s.invalid(format!("N = {n} exceeds the {} available samples", s.n_samples())));
    }
    let order = scenes.canonical_order();
    let rows: Vec<Vec<f64>> = order
        .par_iter()
        .map(|&si| {
            let scene = &scenes.scenes()[si];
            let gt = scene.flat_ground_truth();
            let mut dists: Vec<(Vec<f64>, f64)> = scene
                .samples
                .iter()
                .map(|s| {
                    let flat: Vec<f64> = s.iter().flatten().copied().collect();
                    let d2 = flat.iter().zip(&gt).map(|(a, b)| (a - b) * (a - b)).sum();
                    (flat, d2)
                })
                .collect();
            dists.sort_by(|a, b| {
                a.0.iter()
                    .zip(&b.0)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let k = dists.len();
            let scene_seed = derive_seed(seed, &[hash_str(&scene.scene_id)]);
            (0..repetitions)
                .map(|r| {
                    let best = if n == k {
                        dists.iter().map(|d| d.1).fold(f64::INFINITY, f64::min)
                    } else {
                        let mut rng = stream_rng(scene_seed, &[r as u64]);
                        index::sample(&mut rng, k, n).iter().map(|j| dists[j].1).fold(f64::INFINITY, f64::min)
                    };
                    best.sqrt()
                })
                .collect()
        })
        .collect();
    let n_scenes = rows.len() as f64;
    let rep_means: Vec<f64> = (0..repetitions)
        .map(|r| rows.iter().map(|row| row[r]).sum::<f64>() / n_scenes)
        .collect();
    let value = rep_means.iter().sum::<f64>() / repetitions as f64;
    let std_error = if repetitions >= 2 {
        mean_std(&rep_means).1 / (repetitions as f64).sqrt()
    } else {
        let all: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if all.len() >= 2 {
            mean_std(&all).1 / n_scenes.sqrt()
        } else {
            0.0
        }
    };
    Ok(MonEstimate { value, std_error, config: cfg })
}
