use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::mesh::{BoundaryMarker, PolygonalMesh};

const LINE_TOL: f64 = 1e-9;

/// One marker per boundary edge, in the order of `mesh.boundary_edges()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySpec {
    markers: Vec<BoundaryMarker>,
}

impl BoundarySpec {
    pub fn new(mesh: &PolygonalMesh, markers: Vec<BoundaryMarker>) -> Result<Self> {
        if markers.len() != mesh.boundary_edges().len() {
            return Err(VemError::InvalidArgument(format!(
                "boundary spec has {} markers for {} boundary edges",
                markers.len(),
                mesh.boundary_edges().len()
            )));
        }
        Ok(BoundarySpec { markers })
    }

    pub fn uniform(mesh: &PolygonalMesh, marker: BoundaryMarker) -> Self {
        BoundarySpec {
            markers: vec![marker; mesh.boundary_edges().len()],
        }
    }

    /// The markers stored on the mesh itself.
    pub fn from_mesh(mesh: &PolygonalMesh) -> Self {
        BoundarySpec {
            markers: mesh.boundary_edges().iter().map(|e| e.marker).collect(),
        }
    }

    pub fn markers(&self) -> &[BoundaryMarker] {
        &self.markers
    }

    pub fn count(&self, marker: BoundaryMarker) -> usize {
        self.markers.iter().filter(|m| **m == marker).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Marks the boundary edges lying on the line `axis = value`, optionally only
/// where the other coordinate lies in `range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRule {
    pub axis: Axis,
    pub value: f64,
    #[serde(default)]
    pub range: Option<(f64, f64)>,
    pub marker: BoundaryMarker,
}

impl EdgeRule {
    fn contains(&self, p: Point2<f64>) -> bool {
        let (on, along) = match self.axis {
            Axis::X => (p.x, p.y),
            Axis::Y => (p.y, p.x),
        };
        (on - self.value).abs() <= LINE_TOL
            && self
                .range
                .is_none_or(|(lo, hi)| along >= lo - LINE_TOL && along <= hi + LINE_TOL)
    }
}

/// Per-edge rules with an optional fallback marker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeRules {
    pub rules: Vec<EdgeRule>,
    #[serde(default)]
    pub default: Option<BoundaryMarker>,
}

impl EdgeRules {
    /// Parses the rule file format:
    ///
    /// ```text
    /// # comment
    /// x = 0 clamped
    /// y = 0.5 free 0.5 1     # only where 0.5 <= x <= 1
    /// default clamped
    /// ```
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut out = EdgeRules::default();
        for (lineno, raw) in text.lines().enumerate() {
            let err = |message: String| VemError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").replace('=', " ");
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                [] => {}
                ["default", m] => {
                    if out.default.is_some() {
                        return Err(err("duplicate default".into()));
                    }
                    out.default = Some(m.parse().map_err(|e: VemError| err(e.to_string()))?);
                }
                [axis, value, marker, rest @ ..] => {
                    let axis = match *axis {
                        "x" | "X" => Axis::X,
                        "y" | "Y" => Axis::Y,
                        other => return Err(err(format!("unknown axis '{other}'"))),
                    };
                    let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
                    let range = match rest {
                        [] => None,
                        [lo, hi] => Some((num(lo)?, num(hi)?)),
                        _ => return Err(err("expected '<axis> = <value> <marker> [lo hi]'".into())),
                    };
                    out.rules.push(EdgeRule {
                        axis,
                        value: num(value)?,
                        range,
                        marker: marker.parse().map_err(|e: VemError| err(e.to_string()))?,
                    });
                }
                _ => {
                    return Err(err(
                        "expected '<axis> = <value> <marker> [lo hi]' or 'default <marker>'".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn apply(&self, mesh: &PolygonalMesh) -> Result<BoundarySpec> {
        let v = mesh.vertices();
        let mut markers = Vec::with_capacity(mesh.boundary_edges().len());
        for e in mesh.boundary_edges() {
            let (a, b) = (v[e.a], v[e.b]);
            let hits: Vec<BoundaryMarker> = self
                .rules
                .iter()
                .filter(|r| r.contains(a) && r.contains(b))
                .map(|r| r.marker)
                .collect();
            let marker = match hits.as_slice() {
                [] => self.default.ok_or_else(|| {
                    VemError::InvalidArgument(format!(
                        "boundary edge ({:.6}, {:.6})-({:.6}, {:.6}) matches no rule and no default is set",
                        a.x, a.y, b.x, b.y
                    ))
                })?,
                [first, rest @ ..] => {
                    if rest.iter().any(|m| m != first) {
                        return Err(VemError::InvalidArgument(format!(
                            "boundary edge ({:.6}, {:.6})-({:.6}, {:.6}) matches rules with different markers",
                            a.x, a.y, b.x, b.y
                        )));
                    }
                    *first
                }
            };
            markers.push(marker);
        }
        Ok(BoundarySpec { markers })
    }
}

/// How boundary markers are chosen for a generated mesh.
///
/// Serialized as a name (`"clamped"`, `"lshape_default"`, ...) or as an
/// inline rule table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AssignmentRepr", into = "AssignmentRepr")]
pub enum BoundaryAssignment {
    Uniform(BoundaryMarker),
    /// Keep the markers stored in the mesh (e.g. from a mesh file).
    FromMesh,
    /// L-shape default: the four outer sides clamped, the two re-entrant sides
    /// `x = 1/2` and `y = 1/2` free.
    LShapeDefault,
    Rules(EdgeRules),
}

impl BoundaryAssignment {
    pub fn lshape_rules() -> EdgeRules {
        EdgeRules {
            rules: vec![
                EdgeRule {
                    axis: Axis::X,
                    value: 0.5,
                    range: Some((0.5, 1.0)),
                    marker: BoundaryMarker::Free,
                },
                EdgeRule {
                    axis: Axis::Y,
                    value: 0.5,
                    range: Some((0.5, 1.0)),
                    marker: BoundaryMarker::Free,
                },
            ],
            default: Some(BoundaryMarker::Clamped),
        }
    }

    pub fn resolve(&self, mesh: &PolygonalMesh) -> Result<BoundarySpec> {
        match self {
            BoundaryAssignment::Uniform(m) => Ok(BoundarySpec::uniform(mesh, *m)),
            BoundaryAssignment::FromMesh => Ok(BoundarySpec::from_mesh(mesh)),
            BoundaryAssignment::LShapeDefault => Self::lshape_rules().apply(mesh),
            BoundaryAssignment::Rules(r) => r.apply(mesh),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AssignmentRepr {
    Named(String),
    Rules(EdgeRules),
}

impl TryFrom<AssignmentRepr> for BoundaryAssignment {
    type Error = String;

    fn try_from(r: AssignmentRepr) -> std::result::Result<Self, String> {
        match r {
            AssignmentRepr::Named(s) => s.parse(),
            AssignmentRepr::Rules(rules) => Ok(BoundaryAssignment::Rules(rules)),
        }
    }
}

impl From<BoundaryAssignment> for AssignmentRepr {
    fn from(a: BoundaryAssignment) -> Self {
        match a {
            BoundaryAssignment::Rules(rules) => AssignmentRepr::Rules(rules),
            other => AssignmentRepr::Named(other.to_string()),
        }
    }
}

impl fmt::Display for BoundaryAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryAssignment::Uniform(m) => write!(f, "{m}"),
            BoundaryAssignment::FromMesh => f.write_str("from_mesh"),
            BoundaryAssignment::LShapeDefault => f.write_str("lshape_default"),
            BoundaryAssignment::Rules(r) => write!(f, "rules({})", r.rules.len()),
        }
    }
}

impl FromStr for BoundaryAssignment {
    type Err = String;

    /// Accepts a marker name, `from_mesh` or `lshape_default`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "from_mesh" | "mesh" => Ok(BoundaryAssignment::FromMesh),
            "lshape_default" | "lshape" => Ok(BoundaryAssignment::LShapeDefault),
            other => other
                .parse()
                .map(BoundaryAssignment::Uniform)
                .map_err(|e: VemError| e.to_string()),
        }
    }
}
