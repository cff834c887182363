//! Training configuration and its `key=value` text form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{DEFAULT_BETA, DEFAULT_DEPTH, DEFAULT_INIT_RADIUS, DEFAULT_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Sharpness of the off-surface penalty `exp(-α|h|)`.
    pub alpha: f64,
    /// Weight of the correction term.
    pub beta: f64,
    /// Surface samples with `|f - h|` at or above this count as violations.
    pub correction_tolerance: f64,
    pub position: bool,
    pub normal: bool,
    pub eikonal: bool,
    pub off_surface: bool,
    pub consistency: bool,
    pub correction: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 100.0,
            beta: 100.0,
            correction_tolerance: 1e-5,
            position: true,
            normal: true,
            eikonal: true,
            off_surface: true,
            consistency: true,
            correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    pub lr_halving_period: usize,
    pub batch_surface: usize,
    pub local_samples: usize,
    pub global_samples: usize,
    pub global_stdev: f64,
    /// First iteration at which the correction term is active.
    pub correction_start: usize,
    pub seed: u64,
    /// Surface samples drawn from the mesh before training.
    pub total_samples: usize,
    pub width: usize,
    pub depth: usize,
    pub softplus_beta: f64,
    pub init_radius: f64,
    pub log_every: usize,
    /// Rows per work unit when evaluating a batch.
    pub chunk: usize,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 15000,
            lr: 0.005,
            lr_halving_period: 2000,
            batch_surface: 16384,
            local_samples: 16384,
            global_samples: 2048,
            global_stdev: 1.8,
            correction_start: 10000,
            seed: 0,
            total_samples: 50000,
            width: DEFAULT_WIDTH,
            depth: DEFAULT_DEPTH,
            softplus_beta: DEFAULT_BETA,
            init_radius: DEFAULT_INIT_RADIUS,
            log_every: 100,
            chunk: 256,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    /// A reduced schedule that fits a single-core desktop budget: a
    /// narrower network, smaller batches and the full schedule compressed
    /// to 3000 iterations.
    pub fn desk() -> Self {
        Self {
            iterations: 3000,
            lr_halving_period: 600,
            batch_surface: 2048,
            local_samples: 2048,
            global_samples: 512,
            correction_start: 2000,
            width: 64,
            ..Self::default()
        }
    }

    pub fn learning_rate(&self, iter: usize) -> f64 {
        self.lr * 0.5f64.powi((iter / self.lr_halving_period.max(1)) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.lr <= 0.0 || self.global_stdev <= 0.0 || self.softplus_beta <= 0.0 || self.init_radius <= 0.0 {
            return bad("rates, deviations and radii must be positive");
        }
        if self.lr_halving_period == 0 || self.batch_surface == 0 || self.global_samples == 0 || self.width == 0 || self.depth == 0 {
            return bad("counts must be positive");
        }
        if self.chunk == 0 || self.log_every == 0 || self.total_samples == 0 {
            return bad("counts must be positive");
        }
        if self.correction_start > self.iterations {
            return bad("correction_start exceeds iterations");
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => Err(Error::Config(format!("bad value {v:?} for {key}"))),
            }
        }
        let w = &mut self.weights;
        match key {
            "iterations" => self.iterations = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "lr_halving_period" => self.lr_halving_period = num(key, value)?,
            "batch_surface" => self.batch_surface = num(key, value)?,
            "local_samples" => self.local_samples = num(key, value)?,
            "global_samples" => self.global_samples = num(key, value)?,
            "global_stdev" => self.global_stdev = num(key, value)?,
            "correction_start" => self.correction_start = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "total_samples" => self.total_samples = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "depth" => self.depth = num(key, value)?,
            "softplus_beta" => self.softplus_beta = num(key, value)?,
            "init_radius" => self.init_radius = num(key, value)?,
            "log_every" => self.log_every = num(key, value)?,
            "chunk" => self.chunk = num(key, value)?,
            "alpha" => w.alpha = num(key, value)?,
            "beta" => w.beta = num(key, value)?,
            "correction_tolerance" => w.correction_tolerance = num(key, value)?,
            "position_loss" => w.position = flag(key, value)?,
            "normal_loss" => w.normal = flag(key, value)?,
            "eikonal_loss" => w.eikonal = flag(key, value)?,
            "off_surface_loss" => w.off_surface = flag(key, value)?,
            "consistency_loss" => w.consistency = flag(key, value)?,
            "correction_loss" => w.correction = flag(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; a line `preset=desk` resets to [`desk`](Self::desk).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "preset" {
                *self = match v {
                    "desk" => Self::desk(),
                    "full" => Self::default(),
                    _ => return Err(Error::Config(format!("unknown preset {v:?}"))),
                };
            } else {
                self.set(k, v)?;
            }
        }
        self.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Text form accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let w = &self.weights;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
        kv("iterations", self.iterations.to_string());
        kv("lr", self.lr.to_string());
        kv("lr_halving_period", self.lr_halving_period.to_string());
        kv("batch_surface", self.batch_surface.to_string());
        kv("local_samples", self.local_samples.to_string());
        kv("global_samples", self.global_samples.to_string());
        kv("global_stdev", self.global_stdev.to_string());
        kv("correction_start", self.correction_start.to_string());
        kv("seed", self.seed.to_string());
        kv("total_samples", self.total_samples.to_string());
        kv("width", self.width.to_string());
        kv("depth", self.depth.to_string());
        kv("softplus_beta", self.softplus_beta.to_string());
        kv("init_radius", self.init_radius.to_string());
        kv("log_every", self.log_every.to_string());
        kv("chunk", self.chunk.to_string());
        kv("alpha", w.alpha.to_string());
        kv("beta", w.beta.to_string());
        kv("correction_tolerance", w.correction_tolerance.to_string());
        kv("position_loss", w.position.to_string());
        kv("normal_loss", w.normal.to_string());
        kv("eikonal_loss", w.eikonal.to_string());
        kv("off_surface_loss", w.off_surface.to_string());
        kv("consistency_loss", w.consistency.to_string());
        kv("correction_loss", w.correction.to_string());
        s
    }
}
