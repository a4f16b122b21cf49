//! Minimal Wavefront OBJ reader/writer: `v` and `f` records only.

use std::io::{BufRead, Write};

use super::{GeometryError, TriangleMesh, Vec3};

/// Parses vertices and faces; polygons are fan-triangulated. Face entries may
/// use `v/vt/vn` syntax, only the position index is kept. Negative indices
/// are relative to the end of the vertex list.
pub fn read_obj<R: BufRead>(reader: R) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|f| f.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad_line(line_no, &e.to_string()))?;
                if coords.len() != 3 {
                    return Err(bad_line(line_no, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for f in fields {
                    let first = f.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| bad_line(line_no, "bad face index"))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(bad_line(line_no, "face index 0 is invalid"));
                    };
                    if resolved < 0 {
                        return Err(bad_line(line_no, "face index out of range"));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(bad_line(line_no, "face needs at least three vertices"));
                }
                for w in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[w], poly[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn load_obj(path: &std::path::Path) -> Result<TriangleMesh, GeometryError> {
    let file = std::fs::File::open(path)?;
    read_obj(std::io::BufReader::new(file))
}

fn bad_line(line_no: usize, msg: &str) -> GeometryError {
    GeometryError::BadFormat(format!("OBJ line {}: {msg}", line_no + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_is_fan_triangulated() {
        let src = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let mesh = read_obj(src.as_bytes()).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn round_trip_cube() {
        let cube = TriangleMesh::cuboid(Vec3::repeat(-1.0), Vec3::repeat(1.0)).unwrap();
        let mut buf = Vec::new();
        write_obj(&cube, &mut buf).unwrap();
        assert_eq!(read_obj(buf.as_slice()).unwrap(), cube);
    }

    #[test]
    fn rejects_zero_index() {
        assert!(read_obj("v 0 0 0\nf 0 1 2\n".as_bytes()).is_err());
    }
}
