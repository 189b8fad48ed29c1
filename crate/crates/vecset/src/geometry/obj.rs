//! ASCII OBJ input and output (v/f records; polygons fan-triangulated).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vec3::{cross, norm, sub};
use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

const DEGENERATE_AREA: f64 = 1e-12;

/// Load a triangle mesh from an ASCII OBJ file. Polygonal faces are
/// fan-triangulated; zero-area triangles are dropped. Closedness is
/// reported by [`TriangleMesh::is_closed`].
pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in coords.iter_mut() {
                    let field = fields
                        .next()
                        .ok_or_else(|| parse_err(lineno, "vertex needs 3 coordinates".into()))?;
                    *c = field.parse::<f64>().map_err(|e| {
                        parse_err(lineno, format!("bad vertex coordinate {field:?}: {e}"))
                    })?;
                }
                vertices.push(coords);
            }
            Some("f") => {
                let mut indices = Vec::new();
                for field in fields {
                    // accept v, v/vt, v//vn, v/vt/vn
                    let head = field.split('/').next().unwrap_or("");
                    let raw = head.parse::<i64>().map_err(|e| {
                        parse_err(lineno, format!("bad face index {field:?}: {e}"))
                    })?;
                    let idx = if raw > 0 {
                        (raw - 1) as usize
                    } else if raw < 0 {
                        let back = (-raw) as usize;
                        if back > vertices.len() {
                            return Err(parse_err(
                                lineno,
                                format!("relative index {raw} before first vertex"),
                            ));
                        }
                        vertices.len() - back
                    } else {
                        return Err(parse_err(lineno, "face index 0 is invalid".into()));
                    };
                    if idx >= vertices.len() {
                        return Err(parse_err(
                            lineno,
                            format!("face references vertex {} of {}", idx + 1, vertices.len()),
                        ));
                    }
                    indices.push(idx);
                }
                if indices.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least 3 vertices".into()));
                }
                for i in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[i], indices[i + 1]]);
                }
            }
            _ => {} // comments, normals, texcoords, groups: ignored
        }
    }

    triangles.retain(|t| {
        let e1 = sub(vertices[t[1]], vertices[t[0]]);
        let e2 = sub(vertices[t[2]], vertices[t[0]]);
        0.5 * norm(cross(e1, e2)) > DEGENERATE_AREA
    });

    if triangles.is_empty() {
        return Err(Error::data(format!(
            "{}: no non-degenerate triangles found",
            path.display()
        )));
    }
    TriangleMesh::new(vertices, triangles)
}

/// Load bare vertex records as a point cloud (no faces required).
/// Used for partial-cloud conditioning input.
pub fn load_points_obj(path: &Path) -> Result<PointCloud> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        if fields.next() == Some("v") {
            let mut coords = [0.0; 3];
            for c in coords.iter_mut() {
                let field = fields.next().ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: "vertex needs 3 coordinates".into(),
                })?;
                *c = field.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("bad vertex coordinate {field:?}: {e}"),
                })?;
            }
            points.push(coords);
        }
    }
    if points.is_empty() {
        return Err(Error::data(format!(
            "{}: no vertex records found",
            path.display()
        )));
    }
    Ok(PointCloud::new(points))
}

/// Write a mesh as ASCII OBJ with fixed 6-decimal formatting
/// (byte-reproducible output).
pub fn save_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in &mesh.vertices {
        writeln!(w, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const CUBE_QUADS: &str = "\
# unit cube as 6 quads
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
";

    #[test]
    fn cube_quads_fan_to_twelve_closed_triangles() {
        let f = write_tmp(CUBE_QUADS);
        let mesh = load_obj(f.path()).unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.triangles.len(), 12);
        assert!(mesh.is_closed());
    }

    #[test]
    fn comments_only_is_empty_geometry_error() {
        let f = write_tmp("# nothing here\n# still nothing\n");
        let err = load_obj(f.path()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn open_quad_sheet_loads_but_is_not_closed() {
        let f = write_tmp("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
        let mesh = load_obj(f.path()).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert!(!mesh.is_closed());
    }

    #[test]
    fn parse_error_reports_line_number() {
        let f = write_tmp("v 0 0 0\nv 1 0 zebra\n");
        let err = load_obj(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn slash_forms_and_negative_indices() {
        let f = write_tmp("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2//2 -1\n");
        let mesh = load_obj(f.path()).unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn save_load_round_trip() {
        let mesh = crate::synth::box_mesh([1.0, 0.5, 0.25]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("box.obj");
        save_obj(&path, &mesh).unwrap();
        let back = load_obj(&path).unwrap();
        assert_eq!(back.triangles.len(), mesh.triangles.len());
        assert!(back.is_closed());
        // byte determinism of the writer
        let path2 = dir.path().join("box2.obj");
        save_obj(&path2, &mesh).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}
