//! Plain-text mesh format.
//!
//! ```text
//! vem-mesh 1
//! <n_vertices> <n_cells> <n_boundary_edges>
//! x y                      (one line per vertex, 17 significant digits)
//! k i1 ... ik              (one line per cell, 0-based, CCW)
//! i j marker               (one line per boundary edge, marker in {C,S,F})
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point2;

use super::{BoundaryEdge, BoundaryMarker, PolygonalMesh};
use crate::error::{Result, VemError};

const MAGIC: &str = "vem-mesh 1";

pub fn write_mesh(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_text(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    from_text(&text, path)
}

pub(crate) fn to_text(mesh: &PolygonalMesh) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_cells(),
        mesh.boundary_edges().len()
    )
    .unwrap();
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p.x, p.y).unwrap();
    }
    for cell in mesh.cells() {
        write!(out, "{}", cell.len()).unwrap();
        for v in cell {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    for e in mesh.boundary_edges() {
        writeln!(out, "{} {} {}", e.a, e.b, e.marker.code()).unwrap();
    }
    out
}

pub(crate) fn from_text(text: &str, path: &Path) -> Result<PolygonalMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: String| VemError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, header) = next("header")?;
    if header != MAGIC {
        return Err(err(ln, format!("expected '{MAGIC}', found '{header}'")));
    }
    let (ln, counts) = next("counts")?;
    let counts = parse_usizes(counts).map_err(|m| err(ln, m))?;
    let [nv, nc, nb] = counts[..] else {
        return Err(err(ln, "expected three counts".into()));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| err(ln, format!("bad coordinate '{t}': {e}")))
            })
            .collect::<Result<_>>()?;
        if xy.len() != 2 || !xy.iter().all(|v| v.is_finite()) {
            return Err(err(ln, "expected two finite coordinates".into()));
        }
        vertices.push(Point2::new(xy[0], xy[1]));
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = next("cell")?;
        let ids = parse_usizes(l).map_err(|m| err(ln, m))?;
        let Some((&k, rest)) = ids.split_first() else {
            return Err(err(ln, "empty cell line".into()));
        };
        if rest.len() != k {
            return Err(err(ln, format!("cell declares {k} vertices but lists {}", rest.len())));
        }
        if let Some(&bad) = rest.iter().find(|&&v| v >= nv) {
            return Err(err(ln, format!("vertex index {bad} out of range (n_vertices = {nv})")));
        }
        cells.push(rest.to_vec());
    }

    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next("boundary edge")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let [a, b, m] = toks[..] else {
            return Err(err(ln, "expected 'i j marker'".into()));
        };
        let a: usize = a.parse().map_err(|_| err(ln, format!("bad index '{a}'")))?;
        let b: usize = b.parse().map_err(|_| err(ln, format!("bad index '{b}'")))?;
        if a >= nv || b >= nv {
            return Err(err(ln, format!("boundary vertex out of range (n_vertices = {nv})")));
        }
        let marker = BoundaryMarker::from_code(m).ok_or_else(|| err(ln, format!("unknown marker '{m}'")))?;
        boundary.push(BoundaryEdge { a, b, marker });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content".into()));
    }
    PolygonalMesh::new(vertices, cells, boundary)
}

fn parse_usizes(line: &str) -> std::result::Result<Vec<usize>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad integer '{t}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_distorted_hexagonal, generate_rectangular};

    #[test]
    fn round_trip_is_bit_exact() {
        let m = generate_rectangular(4).unwrap();
        let back = from_text(&to_text(&m), Path::new("mem")).unwrap();
        assert_eq!(m, back);
        let m = generate_distorted_hexagonal(5, 3).unwrap().with_boundary_markers(|p| {
            if p.y < 1e-12 {
                BoundaryMarker::Free
            } else {
                BoundaryMarker::SimplySupported
            }
        });
        let back = from_text(&to_text(&m), Path::new("mem")).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn clockwise_cell_reports_index() {
        let text = "vem-mesh 1\n4 1 4\n0 0\n1 0\n1 1\n0 1\n4 0 3 2 1\n0 1 C\n1 2 C\n2 3 C\n3 0 C\n";
        let e = from_text(text, Path::new("cw")).unwrap_err();
        assert!(matches!(e, VemError::Orientation { cell: 0, .. }), "{e}");
    }

    #[test]
    fn dangling_vertex_is_parse_error() {
        let text = "vem-mesh 1\n4 1 4\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 7\n0 1 C\n1 2 C\n2 3 C\n3 0 C\n";
        match from_text(text, Path::new("bad")).unwrap_err() {
            VemError::Parse { line, message, .. } => {
                assert_eq!(line, 7);
                assert!(message.contains("out of range"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_and_marker_errors() {
        assert!(matches!(
            from_text("mesh 2\n", Path::new("x")).unwrap_err(),
            VemError::Parse { line: 1, .. }
        ));
        let text = "vem-mesh 1\n4 1 4\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n0 1 C\n1 2 Q\n2 3 C\n3 0 C\n";
        assert!(matches!(
            from_text(text, Path::new("x")).unwrap_err(),
            VemError::Parse { line: 9, .. }
        ));
    }
}
