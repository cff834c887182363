use std::path::Path;
use std::process::{Command, Output};

fn nhrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhrep")).args(args).env("NHREP_THREADS", "1").output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = "preset=desk\ntotal_samples=3000\nbatch_surface=256\nlocal_samples=256\nglobal_samples=64\nwidth=16\nlog_every=10\n";

#[test]
fn inspect_prints_the_cube_tree() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("cube.brepmesh");
    ok(nhrep(&["fixture", "cube", "-o", s(&mesh)]));
    let text = ok(nhrep(&["inspect", s(&mesh)]));
    assert!(text.lines().any(|l| l == "tree max(f0,f0,f1,f1,f2,f2)"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("patch tree max(")), "{text}");
}

#[test]
fn unknown_flag_fails_with_usage() {
    let out = nhrep(&["extract", "--bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn errors_are_machine_readable() {
    let out = nhrep(&["query", "/nonexistent/a.ckpt"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.lines().any(|l| l.starts_with("error: IoError: ")), "{err}");
}

#[test]
fn convert_then_operate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("tiny.cfg"), TINY).unwrap();
    ok(nhrep(&["fixture", "cube", "-o", s(&p("cube.brepmesh"))]));
    let text = ok(nhrep(&[
        "convert",
        s(&p("cube.brepmesh")),
        "-o",
        s(&p("cube.ckpt")),
        "--config",
        s(&p("tiny.cfg")),
        "--iters",
        "40",
        "--seed",
        "7",
    ]));
    assert!(text.contains("tree max(f0,f0,f1,f1,f2,f2)"));
    let log = std::fs::read_to_string(p("cube.csv")).unwrap();
    assert!(log.starts_with("iter,lr,total,"));
    assert_eq!(log.lines().count(), 1 + 5);

    let info = ok(nhrep(&["inspect", s(&p("cube.ckpt"))]));
    assert!(info.contains("iterations=40") && info.contains("seed=7"), "{info}");

    std::fs::write(p("pts.txt"), "0 0 0\n5 5 5\n").unwrap();
    let q = ok(nhrep(&["query", s(&p("cube.ckpt")), s(&p("pts.txt"))]));
    let rows: Vec<&str> = q.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with("inside") && rows[1].ends_with("outside"), "{q}");

    let ckpt = p("cube.ckpt");
    let grid = ["--res", "16"];
    for (cmd, extra) in [("extract", vec![]), ("offset", vec!["--iso", "-0.05"]), ("blend", vec!["--rho", "0.05"])] {
        let out = p(&format!("{cmd}.obj"));
        let mut args = vec![cmd, s(&ckpt), "-o", s(&out)];
        args.extend(grid);
        args.extend(extra);
        ok(nhrep(&args));
        assert!(std::fs::read_to_string(&out).unwrap().contains("\nf "));
    }
    let out = p("union.obj");
    ok(nhrep(&["boolean", s(&p("cube.ckpt")), s(&p("cube.ckpt")), "--op", "union", "-o", s(&out), "--res", "16"]));
    let a = std::fs::read_to_string(p("extract.obj")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), a);

    let row = ok(nhrep(&["eval", s(&p("cube.ckpt")), s(&p("cube.brepmesh")), "--mesh", s(&p("extract.obj")), "--res", "16"]));
    let lines: Vec<&str> = row.lines().collect();
    assert_eq!(lines[0], "model,CD,HD,NAE,FCD,FAE,DE,IoU");
    assert_eq!(lines[1].split(',').count(), 8);
    assert!(lines[1].starts_with("cube,"));

    let bad = nhrep(&["blend", s(&p("cube.ckpt")), "-o", s(&p("b.obj")), "--rho", "0"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error: InvalidArgument: "));
}
