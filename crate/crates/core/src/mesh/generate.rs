//! Generators for the mesh families of the unit square and the L-shaped plate.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{is_strictly_convex, CellGeometry};
use super::quality::cell_quality;
use super::PolygonalMesh;
use crate::error::{Result, VemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 0.75,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::UnitSquare => "unit_square",
            Domain::LShape => "l_shape",
        })
    }
}

impl FromStr for Domain {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unit_square" | "square" => Ok(Domain::UnitSquare),
            "l_shape" | "lshape" => Ok(Domain::LShape),
            other => Err(VemError::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    /// Uniform rectangles.
    Rectangular,
    /// Structured hexagons clipped at the boundary.
    Hexagonal,
    /// Seeded random perturbation of the hexagonal family.
    DistortedHexagonal,
    /// Congruent trapezoids.
    Trapezoidal,
    /// Grid squares split along the lower-left to upper-right diagonal.
    Triangular,
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshFamily::Rectangular => "rect",
            MeshFamily::Hexagonal => "hex",
            MeshFamily::DistortedHexagonal => "hex3",
            MeshFamily::Trapezoidal => "trap",
            MeshFamily::Triangular => "tri",
        })
    }
}

impl FromStr for MeshFamily {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "t1" => Ok(MeshFamily::Rectangular),
            "hex" | "hexagonal" | "t2" => Ok(MeshFamily::Hexagonal),
            "hex3" | "distorted_hexagonal" | "distorted-hexagonal" | "t3" => Ok(MeshFamily::DistortedHexagonal),
            "trap" | "trapezoidal" | "t4" => Ok(MeshFamily::Trapezoidal),
            "tri" | "triangular" => Ok(MeshFamily::Triangular),
            other => Err(VemError::InvalidArgument(format!("unknown mesh family '{other}'"))),
        }
    }
}

/// Dispatches to the family generator; only the triangular family supports the L-shape.
pub fn generate(family: MeshFamily, domain: Domain, n: usize, seed: u64) -> Result<PolygonalMesh> {
    if domain == Domain::LShape && family != MeshFamily::Triangular {
        return Err(VemError::InvalidArgument(format!(
            "family {family} is only available on the unit square"
        )));
    }
    match family {
        MeshFamily::Rectangular => generate_rectangular(n),
        MeshFamily::Hexagonal => generate_hexagonal(n),
        MeshFamily::DistortedHexagonal => generate_distorted_hexagonal(n, seed),
        MeshFamily::Trapezoidal => generate_trapezoidal(n),
        MeshFamily::Triangular => generate_triangular(domain, n),
    }
}

/// Assigns vertex ids to lattice keys in first-use order.
struct VertexTable<K> {
    ids: HashMap<K, usize>,
    points: Vec<Point2<f64>>,
}

impl<K: std::hash::Hash + Eq + Copy> VertexTable<K> {
    fn new() -> Self {
        VertexTable {
            ids: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn id(&mut self, key: K, at: impl FnOnce() -> Point2<f64>) -> usize {
        *self.ids.entry(key).or_insert_with(|| {
            self.points.push(at());
            self.points.len() - 1
        })
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(VemError::InvalidArgument(msg.into()))
    }
}

/// `n x n` uniform squares on (0,1)^2; vertices numbered row by row.
pub fn generate_rectangular(n: usize) -> Result<PolygonalMesh> {
    require(n >= 1, "rectangular mesh needs N >= 1")?;
    let h = 1.0 / n as f64;
    let vertices = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| Point2::new(i as f64 * h, j as f64 * h)))
        .collect();
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let cells = (0..n)
        .flat_map(|j| (0..n).map(move |i| vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]))
        .collect();
    PolygonalMesh::from_cells(vertices, cells)
}

/// `n x n` congruent trapezoids similar to (0,0), (1/2,0), (1/2,2/3), (0,1/3).
///
/// Each column of width `1/n` alternates horizontal and slanted lines; the
/// slant direction flips between neighbouring columns. Requires even `n`.
pub fn generate_trapezoidal(n: usize) -> Result<PolygonalMesh> {
    require(
        n >= 2 && n.is_multiple_of(2),
        format!("trapezoidal mesh needs an even N >= 2, got {n}"),
    )?;
    let h = 1.0 / n as f64;
    let y = |i: usize, j: usize| -> f64 {
        if j.is_multiple_of(2) {
            j as f64 * h
        } else if i.is_multiple_of(2) {
            j as f64 * h - h / 3.0
        } else {
            j as f64 * h + h / 3.0
        }
    };
    let vertices = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| Point2::new(i as f64 * h, y(i, j))))
        .collect();
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let cells = (0..n)
        .flat_map(|j| (0..n).map(move |i| vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]))
        .collect();
    PolygonalMesh::from_cells(vertices, cells)
}

/// Number of cells produced by [`generate_hexagonal`]: `n` rows, where the
/// odd rows carry one extra (half) cell.
pub fn hexagonal_cell_count(n: usize) -> usize {
    n * n + n / 2
}

/// Brick-wall hexagons on (0,1)^2.
///
/// Row `j` holds cells of width `1/n` between the lines `y = j/n` and
/// `y = (j+1)/n`; odd rows are shifted by half a cell, giving half-width quads
/// at `x = 0` and `x = 1`. Lattice points on each interior line sit at
/// `x = m/(2n)` and are lifted by `+-1/(6n)` alternately so that cells become
/// genuine convex hexagons. The lines `y = 0` and `y = 1` stay straight, where
/// the collinear midpoints are dropped (pentagons and quads along the boundary).
pub fn generate_hexagonal(n: usize) -> Result<PolygonalMesh> {
    require(n >= 1, "hexagonal mesh needs N >= 1")?;
    let h = 1.0 / n as f64;
    let delta = h / 6.0;
    let last = 2 * n;
    let lift = |j: usize, m: usize| -> f64 {
        if j == 0 || j == n {
            0.0
        } else if (m + j).is_multiple_of(2) {
            delta
        } else {
            -delta
        }
    };
    let point = |j: usize, m: usize| Point2::new(m as f64 * 0.5 * h, j as f64 * h + lift(j, m));
    // a lattice point on a straight boundary line is dropped if it is the
    // midpoint of the adjacent row's cell
    let dropped = |j: usize, m: usize| -> bool {
        if !(j == 0 || j == n) || m == 0 || m == last {
            return false;
        }
        let row = if j == 0 { 0 } else { n - 1 };
        (m + row) % 2 == 1
    };

    let mut table = VertexTable::new();
    let mut cells = Vec::with_capacity(hexagonal_cell_count(n));
    for row in 0..n {
        let mut starts: Vec<(usize, usize)> = Vec::new();
        let offset = row % 2;
        if offset == 1 {
            starts.push((0, 1));
        }
        let mut m = offset;
        while m + 2 <= last {
            starts.push((m, m + 2));
            m += 2;
        }
        if m < last {
            starts.push((m, last));
        }
        for (m0, m1) in starts {
            let mut keys: Vec<(usize, usize)> = Vec::new();
            for m in m0..=m1 {
                keys.push((row, m));
            }
            for m in (m0..=m1).rev() {
                keys.push((row + 1, m));
            }
            let cell: Vec<usize> = keys
                .into_iter()
                .filter(|&(j, m)| !dropped(j, m))
                .map(|(j, m)| table.id((j, m), || point(j, m)))
                .collect();
            cells.push(cell);
        }
    }
    PolygonalMesh::from_cells(table.points, cells)
}

/// Largest relative perturbation radius (fraction of `1/n`).
const PERTURBATION_AMPLITUDE: f64 = 0.2;
const PERTURBATION_RETRIES: usize = 16;
/// Shape-regularity floor enforced on every cell touched by a perturbation.
const DISTORTED_MIN_QUALITY: f64 = 0.05;

/// Hexagonal mesh with seeded random moves of the interior vertices.
///
/// Vertices are visited in index order; each draws up to
/// `PERTURBATION_RETRIES` offsets uniformly in a disc and keeps the first one
/// under which every incident cell stays strictly convex and shape regular.
/// A vertex whose retries are exhausted stays in place.
pub fn generate_distorted_hexagonal(n: usize, seed: u64) -> Result<PolygonalMesh> {
    require(n >= 2, "distorted hexagonal mesh needs N >= 2")?;
    let mut mesh = generate_hexagonal(n)?;
    let boundary = mesh.boundary_vertex_mask();
    let vertex_cells = mesh.vertex_cells();
    let radius = PERTURBATION_AMPLITUDE / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moved = 0usize;
    for v in 0..mesh.n_vertices() {
        if boundary[v] {
            continue;
        }
        let origin = mesh.vertices()[v];
        for _ in 0..PERTURBATION_RETRIES {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let trial = origin + Vector2::new(r * theta.cos(), r * theta.sin());
            mesh.replace_vertex(v, trial);
            let ok = vertex_cells[v].iter().all(|&c| {
                let pts = mesh.cell_vertices(c);
                is_strictly_convex(&pts)
                    && cell_quality(&CellGeometry::from_vertices(&pts), DISTORTED_MIN_QUALITY).passes
            });
            if ok {
                moved += 1;
                break;
            }
            mesh.replace_vertex(v, origin);
        }
    }
    if moved == 0 {
        return Err(VemError::InvalidArgument(format!(
            "no admissible vertex perturbation found for N={n}"
        )));
    }
    let (vertices, cells) = (mesh.vertices().to_vec(), mesh.cells().to_vec());
    PolygonalMesh::from_cells(vertices, cells)
}

/// Right triangles on the unit square or the L-shape `(0,1)^2 \ [1/2,1)^2`.
pub fn generate_triangular(domain: Domain, n: usize) -> Result<PolygonalMesh> {
    require(n >= 2, format!("triangular mesh needs N >= 2, got {n}"))?;
    if domain == Domain::LShape {
        require(
            n.is_multiple_of(2),
            format!("L-shaped triangular mesh needs an even N, got {n}"),
        )?;
    }
    let h = 1.0 / n as f64;
    let keep = |i: usize, j: usize| domain == Domain::UnitSquare || i < n / 2 || j < n / 2;
    let mut table = VertexTable::new();
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !keep(i, j) {
                continue;
            }
            let mut id = |a: usize, b: usize| table.id((a, b), || Point2::new(a as f64 * h, b as f64 * h));
            let (ll, lr, ur, ul) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push(vec![ll, lr, ur]);
            cells.push(vec![ll, ur, ul]);
        }
    }
    PolygonalMesh::from_cells(table.points, cells)
}
