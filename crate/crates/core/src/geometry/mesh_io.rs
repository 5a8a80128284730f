//! Plain-text mesh (OBJ `v`/`f` subset) and blendshape sidecar files.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::ParametricMesh;
use crate::{Error, Result, Vec3};

pub fn write_obj(vertices: &[Vec3], triangles: &[[usize; 3]]) -> String {
    let mut out = String::new();
    for v in vertices {
        writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

/// Parses `v x y z` and `f a b c` lines (1-based, `a/b/c` forms accepted);
/// other line types are ignored.
pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += line.len();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let xyz: Vec<f64> = fields
                    .take(3)
                    .map(|f| f.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse("obj", line_offset, e.to_string()))?;
                if xyz.len() != 3 {
                    return Err(Error::parse("obj", line_offset, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = fields
                    .map(|f| f.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse("obj", line_offset, e.to_string()))?;
                if idx.len() != 3 || idx.contains(&0) {
                    return Err(Error::parse("obj", line_offset, "only 1-based triangles are supported"));
                }
                triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

/// Header `blendshapes K N`, then `K·N` rows of `dx dy dz`.
pub fn write_blendshapes(shapes: &[Vec<Vec3>]) -> String {
    let n = shapes.first().map_or(0, Vec::len);
    let mut out = format!("blendshapes {} {}\n", shapes.len(), n);
    for shape in shapes {
        for d in shape {
            writeln!(out, "{:?} {:?} {:?}", d.x, d.y, d.z).unwrap();
        }
    }
    out
}

pub fn parse_blendshapes(text: &str) -> Result<Vec<Vec<Vec3>>> {
    let mut lines = text.split_inclusive('\n');
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("blendshapes", 0, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (k, n) = match fields.as_slice() {
        ["blendshapes", k, n] => (
            k.parse::<usize>()
                .map_err(|e| Error::parse("blendshapes", 0, e.to_string()))?,
            n.parse::<usize>()
                .map_err(|e| Error::parse("blendshapes", 0, e.to_string()))?,
        ),
        _ => return Err(Error::parse("blendshapes", 0, "expected header `blendshapes K N`")),
    };
    let mut rows = Vec::with_capacity(k * n);
    let mut offset = header.len();
    for line in lines {
        let line_offset = offset;
        offset += line.len();
        if line.trim().is_empty() {
            continue;
        }
        let xyz: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("blendshapes", line_offset, e.to_string()))?;
        if xyz.len() != 3 {
            return Err(Error::parse("blendshapes", line_offset, "row needs three values"));
        }
        rows.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    if rows.len() != k * n {
        return Err(Error::parse(
            "blendshapes",
            offset,
            format!("expected {} rows, found {}", k * n, rows.len()),
        ));
    }
    Ok(rows.chunks(n.max(1)).take(k).map(<[Vec3]>::to_vec).collect())
}

pub fn load_mesh(obj_path: &Path, blendshape_path: &Path) -> Result<ParametricMesh> {
    let obj = std::fs::read_to_string(obj_path).map_err(|e| Error::io(obj_path, e))?;
    let shapes = std::fs::read_to_string(blendshape_path).map_err(|e| Error::io(blendshape_path, e))?;
    let (vertices, triangles) = parse_obj(&obj)?;
    ParametricMesh::new(vertices, parse_blendshapes(&shapes)?, triangles)
}

pub fn save_mesh(mesh: &ParametricMesh, obj_path: &Path, blendshape_path: &Path) -> Result<()> {
    std::fs::write(obj_path, write_obj(&mesh.base_vertices, &mesh.triangles)).map_err(|e| Error::io(obj_path, e))?;
    std::fs::write(blendshape_path, write_blendshapes(&mesh.blendshapes)).map_err(|e| Error::io(blendshape_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_mesh_survives_text_round_trip() {
        let mesh = ParametricMesh::bundled_head();
        let (v, t) = parse_obj(&write_obj(&mesh.base_vertices, &mesh.triangles)).unwrap();
        let shapes = parse_blendshapes(&write_blendshapes(&mesh.blendshapes)).unwrap();
        assert_eq!(ParametricMesh::new(v, shapes, t).unwrap(), mesh);
    }

    #[test]
    fn obj_face_with_slashes() {
        let (v, t) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1\n").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn bad_rows_report_offset() {
        let err = parse_blendshapes("blendshapes 1 2\n0 0 0\n0 x 0\n").unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 22),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_blendshapes("blendshapes 2 2\n0 0 0\n").is_err());
    }
}
