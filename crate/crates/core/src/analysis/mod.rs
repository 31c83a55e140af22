//! Convergence studies: per-level solves, order fits, tables and exports.

mod export;
mod fit;
mod table;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assembly::{assemble_from_locals, local_matrices, BoundaryAssignment, DofMap, EdgeRules, GlobalSystem};
use crate::eigensolve::{
    m_orthonormality_error, residual_report, solve_generalized, EigenSolution, SolverMode, SolverOptions,
};
use crate::element::{LocalElementMatrices, StabilizationOptions};
use crate::error::{Result, VemError};
use crate::mesh::{check_assumptions, generate, BoundaryMarker, Domain, MeshFamily, PolygonalMesh};

pub use export::{export_eigenfunction, sample_field, write_vtk, SampledField};
pub use fit::{fit_order, FitStatus, OrderFit};
pub use table::{emit_table, TableFormat};

/// Refinement levels used when a config does not list any.
pub const DESK_LEVELS: [usize; 3] = [8, 16, 32];
pub const PAPER_LEVELS: [usize; 3] = [32, 64, 128];
/// `C_T` used for the per-level mesh quality summary.
pub const QUALITY_CONSTANT: f64 = 0.05;

fn parse_field<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn display_field<S: Serializer, T: Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn default_levels() -> Vec<usize> {
    DESK_LEVELS.to_vec()
}

fn default_count() -> usize {
    4
}

fn default_boundary() -> BoundaryAssignment {
    BoundaryAssignment::Uniform(BoundaryMarker::Clamped)
}

fn default_domain() -> Domain {
    Domain::UnitSquare
}

/// One convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    #[serde(
        default = "default_domain",
        deserialize_with = "parse_field",
        serialize_with = "display_field"
    )]
    pub domain: Domain,
    #[serde(deserialize_with = "parse_field", serialize_with = "display_field")]
    pub family: MeshFamily,
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryAssignment,
    /// Edge-rule file replacing `boundary`; relative paths are resolved
    /// against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules_file: Option<PathBuf>,
    #[serde(default = "default_count")]
    pub eigenvalues: usize,
    #[serde(default)]
    pub solver: SolverMode,
    /// Seed of the distorted hexagonal family.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stabilization: StabilizationOptions,
    /// Add `ω = √λ` columns to the tables.
    #[serde(default)]
    pub omega: bool,
    /// Reference values shown next to the extrapolated ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<f64>,
    /// Number of eigenfunctions exported at every level.
    #[serde(default)]
    pub export_modes: usize,
}

impl StudyConfig {
    pub fn new(name: impl Into<String>, domain: Domain, family: MeshFamily) -> Self {
        StudyConfig {
            name: name.into(),
            domain,
            family,
            levels: default_levels(),
            boundary: default_boundary(),
            rules_file: None,
            eigenvalues: default_count(),
            solver: SolverMode::Auto,
            seed: 0,
            stabilization: StabilizationOptions::default(),
            omega: false,
            reference: Vec::new(),
            export_modes: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VemError::InvalidArgument(format!("study '{}': {m}", self.name)));
        if self.levels.len() < 3 {
            return bad(format!("needs at least 3 refinement levels, got {:?}", self.levels));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) || self.levels[0] == 0 {
            return bad(format!(
                "levels must be positive and strictly increasing, got {:?}",
                self.levels
            ));
        }
        if self.eigenvalues == 0 {
            return bad("eigenvalue count must be at least 1".into());
        }
        if self.domain == Domain::LShape && self.family != MeshFamily::Triangular {
            return bad(format!("family {} is only available on the unit square", self.family));
        }
        if self.export_modes > self.eigenvalues {
            return bad("cannot export more modes than are computed".into());
        }
        Ok(())
    }

    /// Switches to refinement levels 32, 64, 128.
    pub fn use_paper_scale(&mut self) {
        warn!(
            "study '{}': paper-scale levels {:?} are far beyond desk scale and may take a long time",
            self.name, PAPER_LEVELS
        );
        self.levels = PAPER_LEVELS.to_vec();
    }

    /// Reads `rules_file` (relative to `base`) into `boundary`.
    pub fn resolve_rules(&mut self, base: &Path) -> Result<()> {
        if let Some(file) = self.rules_file.take() {
            let path = if file.is_relative() { base.join(&file) } else { file };
            self.boundary = BoundaryAssignment::Rules(EdgeRules::read(&path)?);
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            mode: self.solver,
            ..Default::default()
        }
    }

    fn has_free_edges(&self) -> bool {
        match &self.boundary {
            BoundaryAssignment::Uniform(m) => *m == BoundaryMarker::Free,
            BoundaryAssignment::LShapeDefault => true,
            BoundaryAssignment::Rules(r) => {
                r.default == Some(BoundaryMarker::Free) || r.rules.iter().any(|e| e.marker == BoundaryMarker::Free)
            }
            BoundaryAssignment::FromMesh => false,
        }
    }
}

/// A file of `[[study]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub study: Vec<StudyConfig>,
}

impl StudyFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: StudyFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            VemError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        if file.study.is_empty() {
            return Err(VemError::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "no [[study]] entries".into(),
            });
        }
        Ok(file)
    }

    /// Reads and validates a study file, resolving rule files next to it.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut file = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut file.study {
            s.resolve_rules(base)?;
            s.validate()?;
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study configs serialize")
    }
}

/// Results of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    /// Nominal mesh size `1/N`, used as the fit abscissa.
    pub h: f64,
    /// Largest cell diameter.
    pub mesh_h: f64,
    pub cells: usize,
    pub vertices: usize,
    pub n_free: usize,
    pub eigenvalues: Vec<f64>,
    /// `‖Kx - λMx‖₂ / (‖K‖₁ ‖x‖₂)`.
    pub residuals: Vec<f64>,
    pub method: SolverMode,
    pub iterations: usize,
    pub max_m_normalization_error: f64,
    pub max_m_orthogonality_error: f64,
    pub symmetric: bool,
    pub min_edge_ratio: f64,
    pub min_ball_ratio: f64,
}

/// Everything computed for one level.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub mesh: PolygonalMesh,
    pub locals: Vec<LocalElementMatrices>,
    pub system: GlobalSystem,
    pub solution: EigenSolution,
    pub result: LevelResult,
}

impl LevelRun {
    pub fn dof_map(&self) -> &DofMap {
        &self.system.dof_map
    }
}

/// Builds, assembles and solves one level.
pub fn solve_level(config: &StudyConfig, n: usize) -> Result<LevelRun> {
    generate(config.family, config.domain, n, config.seed)
        .and_then(|mesh| solve_mesh(config, mesh, n))
        .map_err(|e| e.at_level(n))
}

/// Assembles and solves on a given mesh with the boundary, count, solver and
/// stabilization of `config`. `n` labels the level: `h = 1/n`, or the mesh
/// size when `n` is 0.
pub fn solve_mesh(config: &StudyConfig, mesh: PolygonalMesh, n: usize) -> Result<LevelRun> {
    let spec = config.boundary.resolve(&mesh)?;
    let dof_map = DofMap::build(&mesh, &spec)?;
    let locals = local_matrices(&mesh, &config.stabilization)?;
    let system = assemble_from_locals(&mesh, &locals, dof_map);
    let solution = solve_generalized(&system.k, &system.m, config.eigenvalues, &config.solver_options())?;
    let residuals = residual_report(&system.k, &system.m, &solution);
    let (diag, off) = m_orthonormality_error(&system.m, &solution);
    let quality = check_assumptions(&mesh, QUALITY_CONSTANT);
    let symmetric = system.k.transpose() == system.k && system.m.transpose() == system.m;
    info!(
        "{} N={n}: {} cells, {} free dofs, {} solver, λ = {:?}",
        config.name,
        mesh.n_cells(),
        system.n_free(),
        solution.method,
        solution.eigenvalues
    );
    let result = LevelResult {
        n,
        h: if n > 0 { 1.0 / n as f64 } else { quality.h },
        mesh_h: quality.h,
        cells: mesh.n_cells(),
        vertices: mesh.n_vertices(),
        n_free: system.n_free(),
        eigenvalues: solution.eigenvalues.clone(),
        residuals,
        method: solution.method,
        iterations: solution.iterations,
        max_m_normalization_error: diag,
        max_m_orthogonality_error: off,
        symmetric,
        min_edge_ratio: quality.min_edge_ratio(),
        min_ball_ratio: quality.min_ball_ratio(),
    };
    Ok(LevelRun {
        mesh,
        locals,
        system,
        solution,
        result,
    })
}

/// Per-level results and per-eigenvalue fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub config: StudyConfig,
    pub levels: Vec<LevelResult>,
    pub fits: Vec<OrderFit>,
    pub notes: Vec<String>,
}

impl ConvergenceStudy {
    /// Eigenvalue `index` (0-based) at every level.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.levels.iter().map(|l| l.eigenvalues[index]).collect()
    }

    pub fn hs(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.h).collect()
    }

    pub fn order(&self, index: usize) -> Option<f64> {
        self.fits[index].order
    }

    pub fn extrapolated(&self, index: usize) -> f64 {
        self.fits[index].extrapolated
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study serializes")
    }
}

/// Note attached to L-shape studies with free edges.
pub const PARTITION_NOTE: &str = "The clamped/free split of the L-shaped boundary is not given by the \
reference experiment. This run clamps the four outer sides (x=0, y=0, x=1 for y<=1/2, y=1 for x<=1/2) \
and leaves the two re-entrant sides (x=1/2 and y=1/2 inside the unit square) free; other splits give \
different spectra.";

/// Fits and notes for a set of solved levels (ordered by `N`).
pub fn summarize(config: &StudyConfig, levels: Vec<LevelResult>) -> Result<ConvergenceStudy> {
    let count = levels.iter().map(|l| l.eigenvalues.len()).min().unwrap_or(0);
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let mut fits = Vec::with_capacity(count);
    let mut notes = Vec::new();
    for i in 0..count {
        let column: Vec<f64> = levels.iter().map(|l| l.eigenvalues[i]).collect();
        let fit = fit_order(&h, &column)?;
        match fit.status {
            FitStatus::Ok => {}
            FitStatus::NonMonotone => notes.push(format!(
                "λ{} is not monotone under refinement ({column:?}); no order fitted, the finest value is reported",
                i + 1
            )),
            FitStatus::Stagnant => notes.push(format!("λ{} repeats a value across levels; no order fitted", i + 1)),
            FitStatus::NotConverged => notes.push(format!(
                "λ{}: least-squares refinement did not settle; three-level closed form reported",
                i + 1
            )),
        }
        if fit.extrapolated <= 0.0 {
            notes.push(format!("λ{} extrapolates to a non-positive value", i + 1));
        }
        fits.push(fit);
    }
    if count < config.eigenvalues {
        notes.push(format!("only {count} eigenvalues available on the coarsest level"));
    }
    if config.domain == Domain::LShape && config.has_free_edges() {
        notes.push(PARTITION_NOTE.to_string());
    }
    if let BoundaryAssignment::Uniform(BoundaryMarker::SimplySupported) = config.boundary {
        notes.push("Simply supported edges: value and tangential derivative fixed at every boundary vertex.".into());
    }
    Ok(ConvergenceStudy {
        config: config.clone(),
        levels,
        fits,
        notes,
    })
}

/// Solves every level (in parallel) and fits orders per eigenvalue index.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceStudy> {
    run_study_with(config, |_| Ok(()))
}

/// As [`run_study`], calling `on_level` on every solved level before its
/// matrices are dropped (used for exports).
pub fn run_study_with<F>(config: &StudyConfig, on_level: F) -> Result<ConvergenceStudy>
where
    F: Fn(&LevelRun) -> Result<()> + Sync,
{
    config.validate()?;
    let levels = config
        .levels
        .par_iter()
        .map(|&n| {
            let run = solve_level(config, n)?;
            on_level(&run).map_err(|e| e.at_level(n))?;
            Ok(run.result)
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(config, levels)
}
