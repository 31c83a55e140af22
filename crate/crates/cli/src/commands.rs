//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use plate_vem::analysis::{
    emit_table, export_eigenfunction, run_study_with, solve_mesh, LevelRun, StudyConfig, StudyFile, TableFormat,
    DESK_LEVELS,
};
use plate_vem::assembly::{write_sym_coo, BoundaryAssignment, EdgeRules};
use plate_vem::mesh::{
    check_assumptions, generate, read_mesh, write_mesh, BoundaryMarker, MeshFamily, MeshQualityReport, PolygonalMesh,
};
use serde_json::json;

use crate::output::RunDir;
use crate::{CheckCmd, Failure, GeneratorArgs, MeshCmd, SolveCmd, StudyCmd, EXIT_QUALITY};

pub struct Context {
    pub out_dir: PathBuf,
    pub run_name: Option<String>,
    pub threads: Option<usize>,
}

impl Context {
    fn run_dir(&self, command: &str) -> Result<RunDir, Failure> {
        let dir = RunDir::create(&self.out_dir, command, self.run_name.as_deref())?;
        println!("# output: {}", dir.path().display());
        Ok(dir)
    }
}

/// Prints the resolved configuration and stores it in the run directory.
fn echo_config(dir: &RunDir, config: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(config).expect("config serializes");
    for line in text.lines() {
        println!("# {line}");
    }
    std::fs::write(dir.file("config.json"), text + "\n")?;
    Ok(())
}

fn generated_mesh(gen: &GeneratorArgs) -> Result<(PolygonalMesh, usize), Failure> {
    let family = gen
        .family
        .ok_or_else(|| Failure::usage("--family is required (or give --mesh)"))?;
    let n = gen
        .n
        .ok_or_else(|| Failure::usage("--n is required (or give --mesh)"))?;
    Ok((generate(family, gen.domain, n, gen.seed)?, n))
}

fn quality_text(mesh: &PolygonalMesh, report: &MeshQualityReport) -> String {
    let a1 = report.cells.iter().filter(|c| !c.a1).count();
    let a2 = report.cells.iter().filter(|c| !c.a2).count();
    let mut out = String::new();
    writeln!(
        out,
        "cells {}, vertices {}, boundary edges {}, h {:.6}",
        mesh.n_cells(),
        mesh.n_vertices(),
        mesh.boundary_edges().len(),
        report.h
    )
    .unwrap();
    writeln!(
        out,
        "A1 shortest edge / h_K >= {}: min {:.6}, {} failing cells",
        report.c_t,
        report.min_edge_ratio(),
        a1
    )
    .unwrap();
    writeln!(
        out,
        "A2 star-shaped w.r.t. a ball of radius {} h_K: min ratio {:.6}, {} failing cells",
        report.c_t,
        report.min_ball_ratio(),
        a2
    )
    .unwrap();
    writeln!(out, "quality: {}", if report.passed { "passed" } else { "FAILED" }).unwrap();
    out
}

fn enforce_quality(report: &MeshQualityReport, strict: bool) -> Result<(), Failure> {
    if report.passed {
        return Ok(());
    }
    let failing = report.failing_cells();
    let message = format!(
        "{} cells fail the quality checks (first: {:?})",
        failing.len(),
        &failing[..failing.len().min(5)]
    );
    if strict {
        return Err(Failure {
            code: EXIT_QUALITY,
            message,
        });
    }
    warn!("{message}");
    Ok(())
}

pub fn mesh(ctx: &Context, args: &MeshCmd) -> Result<(), Failure> {
    let (mesh, n) = generated_mesh(&args.gen)?;
    let dir = ctx.run_dir("mesh")?;
    echo_config(
        &dir,
        &json!({
            "command": "mesh",
            "family": args.gen.family.map(|f| f.to_string()),
            "domain": args.gen.domain.to_string(),
            "n": n,
            "seed": args.gen.seed,
            "c_t": args.c_t,
            "strict": args.strict,
            "output": args.output,
        }),
    )?;
    let path = dir.file(&args.output);
    write_mesh(&mesh, &path)?;
    let report = check_assumptions(&mesh, args.c_t);
    std::fs::write(
        dir.file("quality.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    print!("{}", quality_text(&mesh, &report));
    println!("wrote {}", path.display());
    enforce_quality(&report, args.strict)
}

fn boundary_from(
    rules_file: Option<&Path>,
    boundary: Option<&BoundaryAssignment>,
    fallback: BoundaryAssignment,
) -> Result<BoundaryAssignment, Failure> {
    Ok(match (rules_file, boundary) {
        (Some(file), _) => BoundaryAssignment::Rules(EdgeRules::read(file)?),
        (None, Some(b)) => b.clone(),
        (None, None) => fallback,
    })
}

fn export_modes(run: &LevelRun, count: usize, dir: &RunDir, prefix: &str) -> Result<(), Failure> {
    for i in 0..count.min(run.solution.len()) {
        let path = dir.file(&format!("{prefix}mode{}.vtk", i + 1));
        export_eigenfunction(&run.mesh, &run.locals, run.dof_map(), &run.solution, i, &path)?;
    }
    Ok(())
}

pub fn solve(ctx: &Context, args: &SolveCmd) -> Result<(), Failure> {
    if args.eigenvalues == 0 {
        return Err(Failure::usage("-k must be at least 1"));
    }
    let (mesh, n, source) = match &args.mesh {
        Some(path) => (read_mesh(path)?, 0, path.display().to_string()),
        None => {
            let (m, n) = generated_mesh(&args.gen)?;
            (m, n, "generated".to_string())
        }
    };
    let fallback = if args.mesh.is_some() {
        BoundaryAssignment::FromMesh
    } else {
        BoundaryAssignment::Uniform(BoundaryMarker::Clamped)
    };
    let boundary = boundary_from(args.rules_file.as_deref(), args.boundary.as_ref(), fallback)?;
    if args.export_modes > args.eigenvalues {
        return Err(Failure::usage("--export-modes exceeds -k"));
    }

    let mut config = StudyConfig::new(
        "solve",
        args.gen.domain,
        args.gen.family.unwrap_or(MeshFamily::Rectangular),
    );
    config.boundary = boundary;
    config.eigenvalues = args.eigenvalues;
    config.solver = args.solver;
    config.seed = args.gen.seed;
    config.stabilization = args.stabilization.options();

    let dir = ctx.run_dir("solve")?;
    echo_config(
        &dir,
        &json!({
            "command": "solve",
            "mesh": source,
            "family": args.gen.family.map(|f| f.to_string()),
            "domain": args.gen.domain.to_string(),
            "n": args.gen.n,
            "seed": args.gen.seed,
            "boundary": config.boundary,
            "eigenvalues": args.eigenvalues,
            "solver": args.solver.to_string(),
            "stabilization": config.stabilization,
            "threads": ctx.threads,
            "export_modes": args.export_modes,
            "export_coo": args.export_coo,
            "dump_element_matrices": args.dump_element_matrices,
        }),
    )?;

    let report = check_assumptions(&mesh, plate_vem::analysis::QUALITY_CONSTANT);
    enforce_quality(&report, args.strict)?;
    let run = solve_mesh(&config, mesh, n)?;
    let r = &run.result;
    println!(
        "cells {}, vertices {}, free dofs {}, solver {} ({} iterations)",
        r.cells, r.vertices, r.n_free, r.method, r.iterations
    );
    let mut csv = String::from(if args.omega {
        "index,lambda,residual,omega\n"
    } else {
        "index,lambda,residual\n"
    });
    if args.omega {
        println!("{:>5} {:>22} {:>18} {:>12}", "k", "lambda", "omega", "residual");
    } else {
        println!("{:>5} {:>22} {:>12}", "k", "lambda", "residual");
    }
    for (i, (l, res)) in r.eigenvalues.iter().zip(&r.residuals).enumerate() {
        if args.omega {
            println!("{:>5} {:>22.10} {:>18.10} {:>12.3e}", i + 1, l, l.sqrt(), res);
            writeln!(csv, "{},{l},{res},{}", i + 1, l.sqrt()).unwrap();
        } else {
            println!("{:>5} {:>22.10} {:>12.3e}", i + 1, l, res);
            writeln!(csv, "{},{l},{res}", i + 1).unwrap();
        }
    }
    std::fs::write(dir.file("eigenvalues.csv"), csv)?;
    std::fs::write(
        dir.file("result.json"),
        serde_json::to_string_pretty(r).expect("result serializes"),
    )?;

    if args.export_coo {
        write_sym_coo(&run.system.k, dir.file("K.coo"))?;
        write_sym_coo(&run.system.m, dir.file("M.coo"))?;
    }
    if args.dump_element_matrices {
        let mut text = String::new();
        for (c, local) in run.locals.iter().enumerate() {
            text.push_str(&local.debug_text(c));
        }
        std::fs::write(dir.file("element_matrices.txt"), text)?;
    }
    export_modes(&run, args.export_modes, &dir, "")?;
    Ok(())
}

fn flag_study(args: &StudyCmd) -> Result<StudyConfig, Failure> {
    let family = args
        .family
        .ok_or_else(|| Failure::usage("give a study config file or --family"))?;
    let mut c = StudyConfig::new(args.name.clone(), args.domain, family);
    if !args.levels.is_empty() {
        c.levels = args.levels.clone();
    }
    c.boundary = boundary_from(
        args.rules_file.as_deref(),
        args.boundary.as_ref(),
        BoundaryAssignment::Uniform(BoundaryMarker::Clamped),
    )?;
    c.eigenvalues = args.eigenvalues;
    c.solver = args.solver;
    c.seed = args.seed;
    c.reference = args.reference.clone();
    c.export_modes = args.export_modes.unwrap_or(0);
    c.stabilization = crate::stabilization(args.sigma_rule, args.stiffness_scaling);
    Ok(c)
}

pub fn study(ctx: &Context, args: &StudyCmd) -> Result<(), Failure> {
    let mut studies = match &args.config {
        Some(path) => {
            let file = StudyFile::read(path)?;
            if args.only.is_empty() {
                file.study
            } else {
                for name in &args.only {
                    if !file.study.iter().any(|s| &s.name == name) {
                        return Err(Failure::usage(format!("no study named '{name}' in {}", path.display())));
                    }
                }
                file.study.into_iter().filter(|s| args.only.contains(&s.name)).collect()
            }
        }
        None => vec![flag_study(args)?],
    };
    for s in &mut studies {
        if args.paper_scale {
            s.use_paper_scale();
        }
        if args.omega {
            s.omega = true;
        }
        s.validate()?;
    }
    if studies.iter().any(|s| s.levels != DESK_LEVELS) && !args.paper_scale {
        log::info!("non-default refinement levels in use");
    }

    let dir = ctx.run_dir("study")?;
    let resolved = StudyFile { study: studies.clone() }.to_toml();
    for line in resolved.lines() {
        println!("# {line}");
    }
    std::fs::write(dir.file("resolved.toml"), &resolved)?;

    for config in &studies {
        let study = run_study_with(config, |run| {
            let prefix = format!("{}_N{}_", config.name, run.result.n);
            export_modes(run, config.export_modes, &dir, &prefix)
                .map_err(|f| plate_vem::VemError::InvalidArgument(f.message))
        })?;
        emit_table(&study, TableFormat::Text, dir.file(&format!("{}.txt", config.name)))?;
        emit_table(&study, TableFormat::Csv, dir.file(&format!("{}.csv", config.name)))?;
        std::fs::write(dir.file(&format!("{}.json", config.name)), study.summary_json())?;
        println!();
        print!("{}", study.table_text(config.omega));
    }
    Ok(())
}

pub fn check(args: &CheckCmd) -> Result<(), Failure> {
    let mut did = false;
    if let Some(path) = &args.config {
        let file = StudyFile::read(path)?;
        let names: Vec<&str> = file.study.iter().map(|s| s.name.as_str()).collect();
        println!(
            "config {}: {} studies ok ({})",
            path.display(),
            names.len(),
            names.join(", ")
        );
        did = true;
    }
    if let Some(path) = &args.rules_file {
        let rules = EdgeRules::read(path)?;
        println!(
            "rules {}: {} rules, default {}",
            path.display(),
            rules.rules.len(),
            rules.default.map_or("none".to_string(), |m| m.to_string())
        );
        did = true;
    }
    let mesh = match &args.mesh {
        Some(path) => Some(read_mesh(path)?),
        None if args.gen.family.is_some() => Some(generated_mesh(&args.gen)?.0),
        None => None,
    };
    if let Some(mesh) = mesh {
        let report = check_assumptions(&mesh, args.c_t);
        print!("{}", quality_text(&mesh, &report));
        enforce_quality(&report, args.strict)?;
        did = true;
    }
    if !did {
        return Err(Failure::usage(
            "nothing to check: give --config, --rules-file, --mesh or --family/--n",
        ));
    }
    Ok(())
}
