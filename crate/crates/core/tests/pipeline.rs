use nhrep::brep::{load_brep, save_brep};
use nhrep::field::Checkpoint;
use nhrep::fixtures;
use nhrep::implicit::{ImplicitField, Shifted, TreeField};
use nhrep::iso::{extract, GridSpec};
use nhrep::metrics::volume_samples;
use nhrep::ops;
use nhrep::pipeline::convert;
use nhrep::train::TrainConfig;

fn tiny() -> TrainConfig {
    TrainConfig {
        iterations: 30,
        total_samples: 3000,
        batch_surface: 256,
        local_samples: 256,
        global_samples: 64,
        width: 16,
        correction_start: 15,
        ..TrainConfig::desk()
    }
}

#[test]
fn mesh_file_to_checkpoint_file_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures::l_bracket_fixture();
    let path = dir.path().join("l.brepmesh");
    save_brep(&fx.mesh, &path).unwrap();
    let mesh = load_brep(&path).unwrap();
    assert_eq!(mesh.triangles, fx.mesh.triangles);

    let conv = convert(&mesh, &tiny()).unwrap();
    assert!(conv.training.aborted.is_none());
    let ckpt_path = dir.path().join("l.ckpt");
    conv.checkpoint.save(&ckpt_path).unwrap();
    let loaded = Checkpoint::load(&ckpt_path).unwrap();
    assert_eq!(loaded.to_bytes(), conv.checkpoint.to_bytes());

    // Queries in the input frame match direct evaluation in the training frame.
    let probes = volume_samples(500, 1);
    let inv = loaded.transform.inverse();
    let input: Vec<_> = probes.iter().map(|p| inv.apply(p)).collect();
    let q = ops::query(&loaded, &input);
    let direct = TreeField::of(&conv.checkpoint).values(&probes);
    for (r, d) in q.iter().zip(&direct) {
        assert!((r.value - d).abs() < 1e-12);
        assert_eq!(r.inside, *d < 0.0);
    }
}

#[test]
fn offsets_equal_shifted_extraction() {
    let conv = convert(&fixtures::unit_cube_fixture().mesh, &tiny()).unwrap();
    let c = &conv.checkpoint;
    let spec = GridSpec { escalation: None, ..GridSpec::with_resolution(32) };
    let plain = extract(&TreeField::of(c), &spec).unwrap();
    assert_eq!(ops::offset(c, 0.0, &spec).unwrap(), plain);
    for t in [-0.1, 0.1, 0.2] {
        let a = ops::offset(c, t, &spec).unwrap();
        let b = extract(&Shifted { inner: TreeField::of(c), shift: t }, &spec).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a.triangles, b.triangles);
        let worst = a.vertices.iter().zip(&b.vertices).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9 * spec.cell_diagonal(), "{worst}");
    }
}
