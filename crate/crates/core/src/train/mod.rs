//! Fitting the network to a sampled surface.

mod adam;
mod batch;
mod config;
mod loss;

pub use adam::Adam;
pub use batch::{make_batch, Batch};
pub use config::{LossWeights, TrainConfig};
pub use loss::{loss_gradients, total_loss, LossBreakdown};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::brep::SampleSet;
use crate::error::{Error, Result};
use crate::field::NeuralField;
use crate::tree::BooleanTree;

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
}

pub const LOG_HEADER: &str = "iter,lr,total,pos,normal,eikonal,off_surface,consistency,correction";

#[derive(Debug)]
pub struct Training {
    /// Final parameters, or the last finite ones if training aborted.
    pub field: NeuralField,
    pub log: Vec<LogRow>,
    /// Set when a non-finite loss stopped training early.
    pub aborted: Option<Error>,
}

/// Runs the schedule of `cfg`. `slot_of` maps patch ids of `samples` to
/// network outputs; `tree` reads those outputs.
pub fn train(samples: &SampleSet, tree: &BooleanTree, slot_of: &[u32], cfg: &TrainConfig) -> Result<Training> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    if let Some(&p) = samples.patch_of.iter().find(|&&p| p as usize >= slot_of.len() || slot_of[p as usize] == u32::MAX) {
        return Err(Error::InvalidArgument(format!("patch {p} has no output slot")));
    }
    let n = tree.slot_count();
    let sizes = NeuralField::layer_sizes(cfg.width, cfg.depth, n);
    let mut field = NeuralField::geometric_init(&sizes, cfg.init_radius, cfg.seed, cfg.softplus_beta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&field.layers);
    let mut log = Vec::new();
    for iter in 0..cfg.iterations {
        let batch = make_batch(samples, slot_of, cfg, &mut rng);
        let lr = cfg.learning_rate(iter);
        let (loss, grad) = match loss_gradients(&field, tree, &batch, &cfg.weights, iter >= cfg.correction_start, cfg.chunk) {
            Ok(r) => r,
            Err(e @ Error::NonFiniteLoss { .. }) => {
                log::error!("training stopped at iteration {iter}: {e}");
                return Ok(Training { field, log, aborted: Some(e) });
            }
            Err(e) => return Err(e),
        };
        if iter % cfg.log_every == 0 || iter + 1 == cfg.iterations {
            log::info!("iter {iter} lr {lr:.2e} loss {:.5} pos {:.5} eik {:.5}", loss.total(), loss.position, loss.eikonal);
            log.push(LogRow { iter, lr, loss });
        }
        let before = field.clone();
        adam.step(&mut field.layers, &grad, lr);
        if field.layers.iter().any(|l| l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite())) {
            let e = Error::NonFiniteLoss { point: [0.0; 3], detail: format!("parameters diverged at iteration {iter}") };
            return Ok(Training { field: before, log, aborted: Some(e) });
        }
    }
    Ok(Training { field, log, aborted: None })
}

pub fn write_log_csv(rows: &[LogRow], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in rows {
        let l = &r.loss;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.lr,
            l.total(),
            l.position,
            l.normal,
            l.eikonal,
            l.off_surface,
            l.consistency,
            l.correction
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::sample_surface;
    use crate::fixtures;
    use crate::graph::build_patch_graph;
    use crate::tree::{construct_tree, group_patches};

    fn small_cfg(iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            lr_halving_period: 200,
            batch_surface: 600,
            local_samples: 600,
            global_samples: 200,
            correction_start: iterations,
            width: 32,
            log_every: 10,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    fn cube_setup() -> (SampleSet, BooleanTree, Vec<u32>) {
        let f = fixtures::unit_cube_fixture();
        let c = construct_tree(&build_patch_graph(&f.mesh).unwrap(), &f.mesh).unwrap();
        let g = group_patches(&c.graph);
        let s = sample_surface(&f.mesh, 6000, 1).unwrap();
        (s, c.tree.with_slots(&g.slot_of), g.slot_of)
    }

    #[test]
    fn zero_iterations_returns_the_initialization() {
        let (s, tree, slot_of) = cube_setup();
        let cfg = small_cfg(0);
        let t = train(&s, &tree, &slot_of, &cfg).unwrap();
        let init = NeuralField::geometric_init(&NeuralField::layer_sizes(32, 3, 3), cfg.init_radius, cfg.seed, cfg.softplus_beta);
        assert_eq!(t.field, init);
        assert!(t.log.is_empty());
    }

    #[test]
    fn position_loss_goes_down_and_runs_repeat() {
        let (s, tree, slot_of) = cube_setup();
        let cfg = small_cfg(300);
        let t = train(&s, &tree, &slot_of, &cfg).unwrap();
        assert!(t.aborted.is_none());
        let first = t.log[0].loss.position;
        let last = t.log.last().unwrap().loss.position;
        assert!(last < 0.25 * first, "{first} -> {last}");
        let again = train(&s, &tree, &slot_of, &cfg).unwrap();
        assert_eq!(again.field, t.field);
        let mut csv = Vec::new();
        write_log_csv(&t.log, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(LOG_HEADER));
        assert_eq!(text.lines().count(), t.log.len() + 1);
    }

    #[test]
    fn missing_slot_is_an_error() {
        let (s, tree, _) = cube_setup();
        assert!(train(&s, &tree, &[0, 0, 1], &small_cfg(1)).is_err());
    }
}
