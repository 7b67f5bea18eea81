//! Fixtures shared by the criterion benchmarks.

use bidomain_dd::dualprimal::PreconditionerKind;
use bidomain_dd::ionic::{IonicModel, MembraneParams, RmcParams};
use bidomain_dd::linsolve::{build_solver, JacobianSolver, LinearSolverConfig};
use bidomain_dd::scaling::ScalingKind;
use bidomain_dd::topology::PrimalKind;
use bidomain_dd::{ConductivityTensors, HexMesh, MeshConfig};

pub const TAU: f64 = 0.05;

/// Slab with `h = 0.01` cm split into `grid` boxes of `local³` elements.
pub fn slab(grid: [usize; 3], local: usize) -> HexMesh {
    let elements = grid.map(|p| p * local);
    HexMesh::build(&MeshConfig::slab(elements, elements.map(|n| 0.01 * n as f64))).unwrap()
}

pub fn solver_config(
    precond: PreconditionerKind,
    scaling: ScalingKind,
    primal: PrimalKind,
    grid: [usize; 3],
) -> LinearSolverConfig {
    LinearSolverConfig {
        precond,
        scaling,
        primal,
        subdomains: grid,
        ..LinearSolverConfig::default()
    }
}

/// A solver updated with resting-state slopes.
pub fn ready_solver(mesh: &HexMesh, cfg: &LinearSolverConfig) -> Box<dyn JacobianSolver> {
    let mut s = build_solver(
        mesh,
        &ConductivityTensors::default(),
        &MembraneParams::default(),
        TAU,
        cfg,
    )
    .unwrap();
    s.update(&resting_slopes(mesh)).unwrap();
    s
}

pub fn resting_slopes(mesh: &HexMesh) -> Vec<f64> {
    vec![RmcParams::default().di_ion_dv(0.0, 0.0); mesh.num_nodes()]
}

/// Smooth interleaved right-hand side with the joint constant removed.
pub fn rhs(mesh: &HexMesh) -> Vec<f64> {
    let mut b: Vec<f64> = (0..2 * mesh.num_nodes())
        .map(|i| ((i as f64) * 0.37).sin() + if i % 2 == 0 { 0.5 } else { -0.25 })
        .collect();
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    b.iter_mut().for_each(|x| *x -= mean);
    b
}
