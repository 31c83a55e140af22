//! End-to-end runs through the public API.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use plate_vem::analysis::{solve_level, solve_mesh, StudyConfig};
use plate_vem::assembly::{assemble, local_matrices, read_sym_coo, write_sym_coo, BoundaryAssignment, BoundarySpec};
use plate_vem::eigensolve::{solve_generalized, SolverOptions};
use plate_vem::mesh::{generate, read_mesh, write_mesh, BoundaryMarker, Domain, MeshFamily};
use proptest::prelude::*;

fn family_strategy() -> impl Strategy<Value = MeshFamily> {
    prop_oneof![
        Just(MeshFamily::Rectangular),
        Just(MeshFamily::Hexagonal),
        Just(MeshFamily::DistortedHexagonal),
        Just(MeshFamily::Trapezoidal),
        Just(MeshFamily::Triangular),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projector_identities_hold_on_generated_meshes(family in family_strategy(), half in 1usize..5, seed in 0u64..1000) {
        let mesh = generate(family, Domain::UnitSquare, 2 * half, seed).unwrap();
        for l in local_matrices(&mesh, &Default::default()).unwrap() {
            let g = DMatrix::from_iterator(6, 6, l.g_tilde.iter().copied());
            let bd = &l.b_tilde * &l.d;
            prop_assert!((&g - bd).norm() <= 1e-10 * g.norm());
            let pd = &l.pi_star * &l.d;
            prop_assert!((pd - DMatrix::<f64>::identity(6, 6)).amax() <= 1e-10);
        }
    }

    #[test]
    fn mesh_files_round_trip(family in family_strategy(), half in 1usize..5, seed in 0u64..1000) {
        let mesh = generate(family, Domain::UnitSquare, 2 * half, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        write_mesh(&mesh, &path).unwrap();
        prop_assert_eq!(read_mesh(&path).unwrap(), mesh);
    }
}

#[test]
fn saved_mesh_gives_the_same_spectrum() {
    let mut config = StudyConfig::new("p", Domain::LShape, MeshFamily::Triangular);
    config.eigenvalues = 3;
    config.boundary = BoundaryAssignment::LShapeDefault;
    let direct = solve_level(&config, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.txt");
    write_mesh(&direct.mesh, &path).unwrap();
    let reread = solve_mesh(&config, read_mesh(&path).unwrap(), 8).unwrap();
    assert_eq!(direct.result.eigenvalues, reread.result.eigenvalues);
}

#[test]
fn exported_matrices_reproduce_eigenvalues() {
    let mesh = generate(MeshFamily::Hexagonal, Domain::UnitSquare, 6, 0).unwrap();
    let spec = BoundarySpec::uniform(&mesh, BoundaryMarker::Clamped);
    let sys = assemble(&mesh, &spec, &Default::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_sym_coo(&sys.k, dir.path().join("k")).unwrap();
    write_sym_coo(&sys.m, dir.path().join("m")).unwrap();
    let k = read_sym_coo(dir.path().join("k")).unwrap();
    let m = read_sym_coo(dir.path().join("m")).unwrap();
    let a = solve_generalized(&sys.k, &sys.m, 3, &SolverOptions::default()).unwrap();
    let b = solve_generalized(&k, &m, 3, &SolverOptions::default()).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert_relative_eq!(x, y, max_relative = 1e-13);
    }
}

#[test]
fn clamped_trapezoidal_level_32() {
    let mut config = StudyConfig::new("t4", Domain::UnitSquare, MeshFamily::Trapezoidal);
    config.eigenvalues = 4;
    let run = solve_level(&config, 32).unwrap();
    let l1 = run.result.eigenvalues[0];
    assert!((l1 - 1289.7221).abs() / 1289.7221 < 1e-3, "{l1}");
}

#[test]
fn simply_supported_rectangular_level_32() {
    let mut config = StudyConfig::new("t1", Domain::UnitSquare, MeshFamily::Rectangular);
    config.eigenvalues = 1;
    config.boundary = BoundaryAssignment::Uniform(BoundaryMarker::SimplySupported);
    let l1 = solve_level(&config, 32).unwrap().result.eigenvalues[0];
    // approaches 4π⁴ from below
    let exact = 4.0 * std::f64::consts::PI.powi(4);
    assert!(l1 < exact && (exact - l1) / exact < 1e-3, "{l1}");
}
