//! The `brep-mesh v1` text format.
//!
//! ```text
//! brep-mesh v1
//! vertices <N>
//! <x> <y> <z>                      (N lines)
//! triangles <M>
//! <i> <j> <k> <patch> [<planar>]   (M lines, planar is 0 or 1, default 1)
//! uv <K>                           (optional block)
//! <vertex> <patch> <u> <v>         (K lines)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Indices are 0-based.
//! [`write_brep`] emits the canonical form: no comments, the planar flag
//! always present, and every float in Rust's shortest round-trip notation,
//! so that writing a loaded canonical file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use super::{BRepMesh, UvRecord};
use crate::error::{Error, Result};
use crate::geom::Point3;

const MAGIC: &str = "brep-mesh v1";

pub fn load_brep(path: impl AsRef<Path>) -> Result<BRepMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_brep(&text)
}

pub fn save_brep(mesh: &BRepMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_brep(mesh)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next().ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn section_count(line: usize, toks: &[&str], name: &str) -> Result<usize> {
    match toks {
        [head, n] if *head == name => num(line, n, "count"),
        _ => Err(Error::parse(line, format!("expected `{name} <count>`"))),
    }
}

/// Parses and validates a mesh.
pub fn parse_brep(text: &str) -> Result<BRepMesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, header) = lines.expect("header")?;
    if header.join(" ") != MAGIC {
        return Err(Error::parse(ln, format!("expected header `{MAGIC}`")));
    }

    let (ln, toks) = lines.expect("vertices section")?;
    let nv = section_count(ln, &toks, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, toks) = lines.expect("vertex")?;
        if toks.len() != 3 {
            return Err(Error::parse(ln, "vertex needs 3 coordinates"));
        }
        let x: f64 = num(ln, toks[0], "coordinate")?;
        let y: f64 = num(ln, toks[1], "coordinate")?;
        let z: f64 = num(ln, toks[2], "coordinate")?;
        vertices.push(Point3::new(x, y, z));
    }

    let (ln, toks) = lines.expect("triangles section")?;
    let nt = section_count(ln, &toks, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut face_patch = Vec::with_capacity(nt);
    let mut planar = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, toks) = lines.expect("triangle")?;
        if toks.len() != 4 && toks.len() != 5 {
            return Err(Error::parse(ln, "triangle needs `i j k patch [planar]`"));
        }
        let tri = [
            num(ln, toks[0], "vertex index")?,
            num(ln, toks[1], "vertex index")?,
            num(ln, toks[2], "vertex index")?,
        ];
        triangles.push(tri);
        face_patch.push(num(ln, toks[3], "patch id")?);
        planar.push(match toks.get(4) {
            None | Some(&"1") => true,
            Some(&"0") => false,
            Some(other) => return Err(Error::parse(ln, format!("planar flag must be 0 or 1, got `{other}`"))),
        });
    }

    let mut uv = Vec::new();
    if let Some((ln, toks)) = lines.next() {
        let k = section_count(ln, &toks, "uv")?;
        for _ in 0..k {
            let (ln, toks) = lines.expect("uv record")?;
            if toks.len() != 4 {
                return Err(Error::parse(ln, "uv record needs `vertex patch u v`"));
            }
            uv.push(UvRecord {
                vertex: num(ln, toks[0], "vertex index")?,
                patch: num(ln, toks[1], "patch id")?,
                u: num(ln, toks[2], "u")?,
                v: num(ln, toks[3], "v")?,
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content after uv block"));
        }
    }

    let mesh = BRepMesh { vertices, triangles, face_patch, planar, uv };
    mesh.validate()?;
    Ok(mesh)
}

/// Canonical text form of a mesh.
pub fn write_brep(mesh: &BRepMesh) -> String {
    let mut s = String::with_capacity(64 + 48 * mesh.vertices.len() + 24 * mesh.triangles.len());
    s.push_str(MAGIC);
    s.push('\n');
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "triangles {}", mesh.triangles.len());
    for ((t, p), flat) in mesh.triangles.iter().zip(&mesh.face_patch).zip(&mesh.planar) {
        let _ = writeln!(s, "{} {} {} {} {}", t[0], t[1], t[2], p, u8::from(*flat));
    }
    if !mesh.uv.is_empty() {
        let _ = writeln!(s, "uv {}", mesh.uv.len());
        for r in &mesh.uv {
            let _ = writeln!(s, "{} {} {} {}", r.vertex, r.patch, r.u, r.v);
        }
    }
    s
}
