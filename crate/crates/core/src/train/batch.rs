//! Per-iteration training batches.

use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use super::config::TrainConfig;
use crate::brep::SampleSet;
use crate::geom::{Point3, Vector3};

#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub surface: Vec<Point3>,
    pub normals: Vec<Vector3>,
    /// Network output that models each surface sample's patch.
    pub slots: Vec<u32>,
    /// Surface samples displaced by `N(0, σ)` along a random direction.
    pub local: Vec<Point3>,
    /// Samples spread over `[-1, 1]^3`.
    pub global: Vec<Point3>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.surface.len() + self.local.len() + self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in evaluation order: surface, local, global.
    pub fn points(&self) -> Vec<Point3> {
        self.surface.iter().chain(&self.local).chain(&self.global).copied().collect()
    }
}

/// Draws `batch_surface` surface samples split evenly over the patches
/// (the first `batch_surface mod L` patches take one extra), the local
/// samples around them and the global samples. Global samples follow
/// `N(0, global_stdev)` per axis restricted to `[-1, 1]^3`: a coordinate
/// that falls outside is drawn again.
pub fn make_batch(samples: &SampleSet, slot_of: &[u32], cfg: &TrainConfig, rng: &mut impl Rng) -> Batch {
    let by_patch = samples.by_patch();
    let patches: Vec<&Vec<usize>> = by_patch.iter().filter(|p| !p.is_empty()).collect();
    let l = patches.len().max(1);
    let (base, extra) = (cfg.batch_surface / l, cfg.batch_surface % l);
    let mut chosen = Vec::with_capacity(cfg.batch_surface);
    for (k, ids) in patches.iter().enumerate() {
        let quota = base + usize::from(k < extra);
        for _ in 0..quota {
            chosen.push(ids[rng.random_range(0..ids.len())]);
        }
    }
    let mut b = Batch {
        surface: chosen.iter().map(|&i| samples.points[i]).collect(),
        normals: chosen.iter().map(|&i| samples.normals[i]).collect(),
        slots: chosen.iter().map(|&i| slot_of[samples.patch_of[i] as usize]).collect(),
        local: Vec::with_capacity(cfg.local_samples),
        global: Vec::with_capacity(cfg.global_samples),
    };
    if !chosen.is_empty() {
        for j in 0..cfg.local_samples {
            let i = chosen[j % chosen.len()];
            let dir: [f64; 3] = UnitSphere.sample(rng);
            let sigma = samples.sigma[i];
            let t = if sigma > 0.0 { Normal::new(0.0, sigma).unwrap().sample(rng) } else { 0.0 };
            b.local.push(samples.points[i] + Vector3::from(dir) * t);
        }
    }
    let g = Normal::new(0.0, cfg.global_stdev).unwrap();
    let coord = |rng: &mut dyn rand::RngCore| loop {
        let v: f64 = g.sample(rng);
        if v.abs() <= 1.0 {
            return v;
        }
    };
    for _ in 0..cfg.global_samples {
        b.global.push(Point3::new(coord(rng), coord(rng), coord(rng)));
    }
    b
}
