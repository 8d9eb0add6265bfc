//! ASCII OBJ subset: `v`, `vt`, `vn`, `f` with 1-based indices in the
//! `v`, `v/vt`, `v//vn`, or `v/vt/vn` forms. Polygons are fan-triangulated.
//! Distinct (v, vt, vn) corner combinations become distinct unified
//! vertices, since the mesh stores one UV and normal per vertex.

use crate::error::{Error, Result};
use crate::geom::mesh::TriMesh;
use std::collections::HashMap;
use std::path::Path;

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// Parses OBJ text; `path` is used for error reporting only.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut normals: Vec<[f64; 3]> = Vec::new();
    // corner -> unified vertex index
    let mut corners: HashMap<(u32, Option<u32>, Option<u32>), u32> = HashMap::new();
    let mut mesh = TriMesh::default();
    let mut has_uv: Option<bool> = None;
    let mut has_normal: Option<bool> = None;

    let fail = |line: usize, detail: String| Error::ParseLine {
        path: path.to_path_buf(),
        line,
        detail,
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let tag = parts.next().unwrap();
        match tag {
            "v" => positions.push(parse_floats::<3>(&mut parts, "v", line, path)?),
            "vt" => {
                let t = parse_floats::<2>(&mut parts, "vt", line, path)?;
                uvs.push(t);
            }
            "vn" => normals.push(parse_floats::<3>(&mut parts, "vn", line, path)?),
            "f" => {
                let mut face_corners: Vec<(u32, Option<u32>, Option<u32>)> = Vec::new();
                for corner in parts {
                    face_corners.push(parse_corner(
                        corner,
                        positions.len(),
                        uvs.len(),
                        normals.len(),
                        line,
                        path,
                    )?);
                }
                if face_corners.len() < 3 {
                    return Err(fail(line, format!("face has {} corners", face_corners.len())));
                }
                for (vi, ti, ni) in &face_corners {
                    let uv_present = ti.is_some();
                    let n_present = ni.is_some();
                    match has_uv {
                        None => has_uv = Some(uv_present),
                        Some(expected) if expected != uv_present => {
                            return Err(fail(
                                line,
                                "inconsistent texture-coordinate usage across faces".into(),
                            ))
                        }
                        _ => {}
                    }
                    match has_normal {
                        None => has_normal = Some(n_present),
                        Some(expected) if expected != n_present => {
                            return Err(fail(line, "inconsistent normal usage across faces".into()))
                        }
                        _ => {}
                    }
                    let _ = vi;
                }
                let unified: Vec<u32> = face_corners
                    .iter()
                    .map(|c| {
                        *corners.entry(*c).or_insert_with(|| {
                            mesh.positions.push(positions[c.0 as usize]);
                            if let Some(t) = c.1 {
                                mesh.uvs.push(uvs[t as usize]);
                            }
                            if let Some(n) = c.2 {
                                mesh.normals.push(normals[n as usize]);
                            }
                            (mesh.positions.len() - 1) as u32
                        })
                    })
                    .collect();
                for k in 1..unified.len() - 1 {
                    mesh.faces.push([unified[0], unified[k], unified[k + 1]]);
                }
            }
            // the subset ignores grouping/material statements
            "o" | "g" | "s" | "mtllib" | "usemtl" => {}
            other => {
                return Err(fail(line, format!("unsupported statement '{other}'")));
            }
        }
    }

    mesh.validate()?;
    Ok(mesh)
}

fn parse_floats<const N: usize>(
    parts: &mut std::str::SplitWhitespace,
    tag: &str,
    line: usize,
    path: &Path,
) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for (i, slot) in out.iter_mut().enumerate() {
        let tok = parts.next().ok_or_else(|| Error::ParseLine {
            path: path.to_path_buf(),
            line,
            detail: format!("'{tag}' needs {N} values, found {i}"),
        })?;
        *slot = tok.parse::<f64>().map_err(|_| Error::ParseLine {
            path: path.to_path_buf(),
            line,
            detail: format!("'{tag}' value '{tok}' is not a number"),
        })?;
        if !slot.is_finite() {
            return Err(Error::ParseLine {
                path: path.to_path_buf(),
                line,
                detail: format!("'{tag}' value '{tok}' is not finite"),
            });
        }
    }
    Ok(out)
}

fn parse_corner(
    token: &str,
    nv: usize,
    nt: usize,
    nn: usize,
    line: usize,
    path: &Path,
) -> Result<(u32, Option<u32>, Option<u32>)> {
    let fail = |detail: String| Error::ParseLine {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let fields: Vec<&str> = token.split('/').collect();
    if fields.len() > 3 {
        return Err(fail(format!("corner '{token}' has too many '/' fields")));
    }
    let index = |s: &str, count: usize, what: &str| -> Result<u32> {
        let idx: i64 = s
            .parse()
            .map_err(|_| fail(format!("{what} index '{s}' is not an integer")))?;
        if idx < 1 {
            return Err(fail(format!(
                "{what} index {idx} is invalid (indices are 1-based)"
            )));
        }
        if idx as usize > count {
            return Err(fail(format!("{what} index {idx} out of range (have {count})")));
        }
        Ok((idx - 1) as u32)
    };
    let vi = index(fields[0], nv, "vertex")?;
    let ti = match fields.get(1) {
        Some(&"") | None => None,
        Some(s) => Some(index(s, nt, "texture")?),
    };
    let ni = match fields.get(2) {
        Some(&"") | None => None,
        Some(s) => Some(index(s, nn, "normal")?),
    };
    Ok((vi, ti, ni))
}

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    for p in &mesh.positions {
        writeln!(out, "v {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    for t in &mesh.uvs {
        writeln!(out, "vt {} {}", t[0], t[1]).unwrap();
    }
    for n in &mesh.normals {
        writeln!(out, "vn {} {} {}", n[0], n[1], n[2]).unwrap();
    }
    let (has_uv, has_n) = (mesh.has_uvs(), !mesh.normals.is_empty());
    for f in &mesh.faces {
        let corner = |v: u32| match (has_uv, has_n) {
            (true, true) => format!("{0}/{0}/{0}", v + 1),
            (true, false) => format!("{0}/{0}", v + 1),
            (false, true) => format!("{0}//{0}", v + 1),
            (false, false) => format!("{}", v + 1),
        };
        writeln!(out, "f {} {} {}", corner(f[0]), corner(f[1]), corner(f[2])).unwrap();
    }
    super::write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TriMesh> {
        parse_obj(text, Path::new("test.obj"))
    }

    #[test]
    fn parses_quad_with_uvs_and_normals() {
        let mesh = parse(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n\
             vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n\
             vn 0 0 1\n\
             f 1/1/1 2/2/1 3/3/1 4/4/1\n",
        )
        .unwrap();
        assert_eq!(mesh.positions.len(), 4);
        assert_eq!(mesh.faces.len(), 2); // fan-triangulated
        assert_eq!(mesh.uvs.len(), 4);
        assert_eq!(mesh.normals.len(), 4);
    }

    #[test]
    fn zero_index_is_a_parse_error_with_line() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("test.obj:4"), "{msg}");
        assert!(msg.contains("1-based"), "{msg}");
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n").unwrap_err();
        assert!(err.to_string().contains(":4"), "{err}");
    }

    #[test]
    fn duplicate_corners_unify() {
        let mesh = parse(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n",
        )
        .unwrap();
        assert_eq!(mesh.positions.len(), 4, "shared corners must not duplicate");
        assert_eq!(mesh.faces.len(), 2);
    }

    #[test]
    fn roundtrip_through_writer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        let mesh = crate::synth::uv_sphere(4, 6, 1.0);
        write_obj(&path, &mesh).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(mesh.faces.len(), back.faces.len());
        // unified corner identity differs, but geometry must match face by face
        for (fa, fb) in mesh.faces.iter().zip(&back.faces) {
            for (va, vb) in fa.iter().zip(fb) {
                let pa = mesh.positions[*va as usize];
                let pb = back.positions[*vb as usize];
                for k in 0..3 {
                    assert!((pa[k] - pb[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_degenerate_faces() {
        let err = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n").unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }
}
