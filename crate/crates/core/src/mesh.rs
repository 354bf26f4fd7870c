//! Triangulated scene geometry and mesh file readers.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Triangle, Vec3};

/// Faces smaller than this are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// One triangular surface element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    pub id: usize,
    pub vertices: [Vec3; 3],
    pub centroid: Vec3,
    /// Outward unit normal, from the vertex winding.
    pub normal: Vec3,
    pub area: f64,
    pub perimeter: f64,
    pub albedo: f64,
    pub emissivity: f64,
    /// Longwave reflectivity, `1 - emissivity` (opaque surfaces).
    pub lw_reflectivity: f64,
    /// Index into the domain material table once bound.
    pub material: Option<usize>,
    pub is_ground: bool,
    /// Centroid height above the ground datum (m).
    pub height: f64,
    /// OBJ group/object name the face was read under, if any.
    pub group: Option<String>,
}

impl Patch {
    /// Builds a patch from three vertices in counter-clockwise order seen
    /// from the outside.
    pub fn from_vertices(id: usize, a: Vec3, b: Vec3, c: Vec3) -> Result<Self> {
        let tri = Triangle::new(a, b, c);
        let cross = tri.cross();
        let area = 0.5 * cross.norm();
        if !(area >= MIN_TRIANGLE_AREA) {
            return Err(Error::DegenerateTriangle { face: id, area });
        }
        let centroid = tri.centroid();
        Ok(Self {
            id,
            vertices: [a, b, c],
            centroid,
            normal: cross / cross.norm(),
            area,
            perimeter: tri.perimeter(),
            albedo: 0.0,
            emissivity: 1.0,
            lw_reflectivity: 0.0,
            material: None,
            is_ground: false,
            height: centroid.z,
            group: None,
        })
    }

    pub fn triangle(&self) -> Triangle {
        Triangle { v: self.vertices }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Stl,
    Csv,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" => Ok(MeshFormat::Stl),
            "csv" => Ok(MeshFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown mesh format '{other}'"))),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Vec<Patch>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Obj => parse_obj(&text, path),
        MeshFormat::Stl => parse_stl(&text, path),
        MeshFormat::Csv => parse_csv(&text, path),
    }
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedMesh {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_floats<'a>(path: &Path, line: usize, it: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    it.map(|tok| {
        tok.trim()
            .parse::<f64>()
            .map_err(|_| malformed(path, line, format!("bad number '{tok}'")))
    })
    .collect()
}

pub(crate) fn parse_obj(text: &str, path: &Path) -> Result<Vec<Patch>> {
    let mut verts: Vec<Vec3> = Vec::new();
    let mut patches = Vec::new();
    let mut group: Option<String> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        match tag {
            "v" => {
                let xs = parse_floats(path, lineno + 1, toks.take(3))?;
                if xs.len() != 3 {
                    return Err(malformed(path, lineno + 1, "vertex needs 3 coordinates"));
                }
                verts.push(Vec3::new(xs[0], xs[1], xs[2]));
            }
            "g" | "o" => {
                let name: Vec<&str> = toks.collect();
                group = (!name.is_empty()).then(|| name.join(" "));
            }
            "f" => {
                let mut idx = Vec::new();
                for tok in toks {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| malformed(path, lineno + 1, format!("bad face index '{tok}'")))?;
                    let resolved = if i > 0 {
                        (i - 1) as usize
                    } else if i < 0 && (-i) as usize <= verts.len() {
                        verts.len() - (-i) as usize
                    } else {
                        return Err(malformed(path, lineno + 1, format!("face index {i} out of range")));
                    };
                    if resolved >= verts.len() {
                        return Err(malformed(path, lineno + 1, format!("face index {i} out of range")));
                    }
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(malformed(path, lineno + 1, "face with fewer than 3 vertices"));
                }
                // fan triangulation
                for k in 1..idx.len() - 1 {
                    let id = patches.len();
                    let mut p = Patch::from_vertices(id, verts[idx[0]], verts[idx[k]], verts[idx[k + 1]])?;
                    p.group = group.clone();
                    patches.push(p);
                }
            }
            _ => {}
        }
    }
    Ok(patches)
}

pub(crate) fn parse_stl(text: &str, path: &Path) -> Result<Vec<Patch>> {
    let mut patches = Vec::new();
    let mut stored_normal: Option<Vec3> = None;
    let mut loop_verts: Vec<Vec3> = Vec::new();
    let mut in_loop = false;

    for (lineno, raw) in text.lines().enumerate() {
        let mut toks = raw.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        match tag {
            "facet" => {
                if toks.next() != Some("normal") {
                    return Err(malformed(path, lineno + 1, "expected 'facet normal'"));
                }
                let n = parse_floats(path, lineno + 1, toks.take(3))?;
                if n.len() != 3 {
                    return Err(malformed(path, lineno + 1, "facet normal needs 3 components"));
                }
                stored_normal = Some(Vec3::new(n[0], n[1], n[2]));
            }
            "outer" => {
                in_loop = true;
                loop_verts.clear();
            }
            "vertex" => {
                if !in_loop {
                    return Err(malformed(path, lineno + 1, "vertex outside loop"));
                }
                let v = parse_floats(path, lineno + 1, toks.take(3))?;
                if v.len() != 3 {
                    return Err(malformed(path, lineno + 1, "vertex needs 3 coordinates"));
                }
                loop_verts.push(Vec3::new(v[0], v[1], v[2]));
            }
            "endloop" => {
                in_loop = false;
                if loop_verts.len() != 3 {
                    return Err(malformed(
                        path,
                        lineno + 1,
                        format!("non-triangle facet with {} vertices", loop_verts.len()),
                    ));
                }
                let id = patches.len();
                let p = Patch::from_vertices(id, loop_verts[0], loop_verts[1], loop_verts[2])?;
                if let Some(n) = stored_normal.take() {
                    if n.norm() > 0.0 && n.dot(&p.normal) < 0.0 {
                        log::warn!("{}: facet {id} stored normal disagrees with winding; using winding", path.display());
                    }
                }
                patches.push(p);
            }
            _ => {}
        }
    }
    if in_loop {
        return Err(malformed(path, text.lines().count(), "unterminated facet loop"));
    }
    Ok(patches)
}

pub(crate) fn parse_csv(text: &str, path: &Path) -> Result<Vec<Patch>> {
    let mut patches = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if lineno == 0 && cells[0].trim().parse::<f64>().is_err() {
            continue; // header
        }
        if cells.len() != 9 {
            return Err(malformed(path, lineno + 1, format!("expected 9 coordinates, got {}", cells.len())));
        }
        let x = parse_floats(path, lineno + 1, cells.into_iter())?;
        let id = patches.len();
        patches.push(Patch::from_vertices(
            id,
            Vec3::new(x[0], x[1], x[2]),
            Vec3::new(x[3], x[4], x[5]),
            Vec3::new(x[6], x[7], x[8]),
        )?);
    }
    Ok(patches)
}
