//! Mesh to checkpoint: normalize, build the patch graph, grow the tree,
//! group patches onto outputs, sample and train.

use crate::brep::{normalize, sample_surface, BRepMesh, SampleSet, Similarity};
use crate::error::Result;
use crate::field::Checkpoint;
use crate::graph::{build_patch_graph, merge_smooth_patches};
use crate::train::{train, TrainConfig, Training};
use crate::tree::{construct_tree_with, group_patches, BooleanTree, Construction, Grouping, SelectionPolicy};

/// Everything computed before training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub transform: Similarity,
    pub construction: Construction,
    pub grouping: Grouping,
    /// Tree over network outputs.
    pub tree: BooleanTree,
    pub samples: SampleSet,
}

#[derive(Debug)]
pub struct Conversion {
    pub prepared: Prepared,
    pub training: Training,
    pub checkpoint: Checkpoint,
}

/// Runs every step up to training. Samples are drawn from the decomposed
/// mesh with `cfg.total_samples` and `cfg.seed`.
pub fn prepare(mesh: &BRepMesh, cfg: &TrainConfig, policy: SelectionPolicy) -> Result<Prepared> {
    mesh.validate()?;
    cfg.validate()?;
    let (normalized, transform) = normalize(mesh)?;
    let graph = build_patch_graph(&normalized)?;
    let (graph, merged) = merge_smooth_patches(&graph, &normalized)?;
    let construction = construct_tree_with(&graph, &merged, policy)?;
    let grouping = group_patches(&construction.graph);
    let tree = construction.tree.with_slots(&grouping.slot_of);
    let samples = sample_surface(&construction.mesh, cfg.total_samples, cfg.seed)?;
    log::info!(
        "{} patches on {} outputs, tree {}",
        construction.mesh.patch_count(),
        grouping.slot_count,
        tree.serialize()
    );
    Ok(Prepared { transform, construction, grouping, tree, samples })
}

/// Trains on `samples` (normally `prepared.samples`, possibly perturbed).
pub fn train_prepared(prepared: &Prepared, samples: &SampleSet, cfg: &TrainConfig) -> Result<(Training, Checkpoint)> {
    let training = train(samples, &prepared.tree, &prepared.grouping.slot_of, cfg)?;
    let checkpoint = Checkpoint {
        field: training.field.clone(),
        tree: prepared.tree.clone(),
        transform: prepared.transform,
        config: cfg.to_text(),
    };
    Ok((training, checkpoint))
}

pub fn convert(mesh: &BRepMesh, cfg: &TrainConfig) -> Result<Conversion> {
    convert_with(mesh, cfg, SelectionPolicy::default())
}

pub fn convert_with(mesh: &BRepMesh, cfg: &TrainConfig, policy: SelectionPolicy) -> Result<Conversion> {
    let prepared = prepare(mesh, cfg, policy)?;
    let (training, checkpoint) = train_prepared(&prepared, &prepared.samples, cfg)?;
    Ok(Conversion { prepared, training, checkpoint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tiny() -> TrainConfig {
        TrainConfig {
            iterations: 20,
            batch_surface: 256,
            local_samples: 256,
            global_samples: 64,
            correction_start: 10,
            total_samples: 3000,
            width: 16,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn cube_conversion_is_reproducible() {
        let f = fixtures::unit_cube_fixture();
        let a = convert(&f.mesh, &tiny()).unwrap();
        assert_eq!(a.checkpoint.tree.serialize(), "max(f0,f0,f1,f1,f2,f2)");
        assert_eq!(a.checkpoint.field.output_dim(), 3);
        assert!((a.checkpoint.transform.scale - 1.8).abs() < 1e-12);
        let b = convert(&f.mesh, &tiny()).unwrap();
        assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
        let other = convert(&f.mesh, &TrainConfig { seed: 8, ..tiny() }).unwrap();
        assert_ne!(a.checkpoint.to_bytes(), other.checkpoint.to_bytes());
    }

    #[test]
    fn checkpoint_records_the_configuration() {
        let f = fixtures::l_bracket_fixture();
        let c = convert(&f.mesh, &TrainConfig { iterations: 2, correction_start: 0, ..tiny() }).unwrap();
        assert_eq!(TrainConfig::parse(&c.checkpoint.config).unwrap().iterations, 2);
        let back = Checkpoint::from_bytes(&c.checkpoint.to_bytes()).unwrap();
        // Leaf patch ids are not stored; only slots survive.
        assert_eq!(back.field, c.checkpoint.field);
        assert_eq!(back.tree.serialize(), c.checkpoint.tree.serialize());
        assert_eq!(back.to_bytes(), c.checkpoint.to_bytes());
    }
}
