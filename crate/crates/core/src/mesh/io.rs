//! OFF and triangulated OBJ readers/writers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::TriangleMesh;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

pub fn parse_off(name: &str, text: &str) -> Result<TriangleMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, head) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let rest = head.strip_prefix("OFF").ok_or_else(|| parse_err(ln, "missing OFF header"))?.trim();
    let (ln, counts) =
        if rest.is_empty() { lines.next().ok_or_else(|| parse_err(ln, "missing counts"))? } else { (ln, rest) };
    let mut it = counts.split_whitespace();
    let nv: usize = num(it.next(), ln, "vertex count")?;
    let nf: usize = num(it.next(), ln, "face count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "truncated vertex list"))?;
        let mut it = l.split_whitespace();
        let x = num(it.next(), ln, "x")?;
        let y = num(it.next(), ln, "y")?;
        let z = num(it.next(), ln, "z")?;
        vertices.push(Vec3::checked(x, y, z).map_err(|_| parse_err(ln, "non-finite vertex"))?);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "truncated face list"))?;
        let mut it = l.split_whitespace();
        let k: usize = num(it.next(), ln, "face size")?;
        if k != 3 {
            return Err(parse_err(ln, format!("face with {k} vertices; only triangles are accepted")));
        }
        let mut t = [0u32; 3];
        for v in &mut t {
            *v = num(it.next(), ln, "vertex index")?;
            if *v as usize >= nv {
                return Err(parse_err(ln, format!("vertex index {v} out of range")));
            }
        }
        triangles.push(t);
    }
    TriangleMesh::new(name, vertices, triangles)
}

pub fn parse_obj(name: &str, text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut it = l.split_whitespace();
        match it.next() {
            Some("v") => {
                let x = num(it.next(), ln, "x")?;
                let y = num(it.next(), ln, "y")?;
                let z = num(it.next(), ln, "z")?;
                vertices.push(Vec3::checked(x, y, z).map_err(|_| parse_err(ln, "non-finite vertex"))?);
            }
            Some("f") => {
                let refs: Vec<&str> = it.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        ln,
                        format!("face with {} vertices; only triangles are accepted", refs.len()),
                    ));
                }
                let mut t = [0u32; 3];
                for (slot, r) in t.iter_mut().zip(refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let k: i64 = num(Some(head), ln, "vertex index")?;
                    let n = vertices.len() as i64;
                    let abs = if k < 0 { n + k } else { k - 1 };
                    if abs < 0 || abs >= n {
                        return Err(parse_err(ln, format!("vertex index {k} out of range")));
                    }
                    *slot = abs as u32;
                }
                triangles.push(t);
            }
            _ => {}
        }
    }
    TriangleMesh::new(name, vertices, triangles)
}

/// Loads by extension (`.off` or `.obj`).
pub fn load(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("surface");
    let ext = path.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase);
    let parsed = match ext.as_deref() {
        Some("off") => parse_off(name, &text),
        Some("obj") => parse_obj(name, &text),
        _ => return Err(Error::Io { path: path.display().to_string(), msg: "unknown mesh extension".into() }),
    };
    parsed.map_err(|e| match e {
        Error::Parse { line, msg } => {
            Error::Io { path: path.display().to_string(), msg: format!("line {line}: {msg}") }
        }
        other => other,
    })
}

pub fn to_off(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn to_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}
