//! Solvers for the Newton correction `J s = −F`: static condensation with
//! a BDDC or FETI-DP interface solve, or plain CG on the assembled Jacobian.

use serde::{Deserialize, Serialize};

use crate::conductivity::{ConductivityTensors, Medium};
use crate::dualprimal::{Bddc, FetiDp, PreconditionerKind};
use crate::error::Result;
use crate::fem::{assemble_lumped_mass, assemble_stiffness};
use crate::ionic::MembraneParams;
use crate::krylov::{self, KrylovConfig, SolveReport};
use crate::mesh::HexMesh;
use crate::scaling::{subdomain_sigma_max, Scaling, ScalingKind};
use crate::schur::SchurSystem;
use crate::sparse::{dot, CsrMatrix};
use crate::cholesky::SparseCholesky;
use crate::system::{PrincipalBlock, TwoFieldMatrix};
use crate::topology::{partition_box_marked, PrimalKind, FIELDS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSolverConfig {
    pub precond: PreconditionerKind,
    pub scaling: ScalingKind,
    pub primal: PrimalKind,
    pub subdomains: [usize; 3],
    /// Treat the outer boundary as an extra sharer when classifying the
    /// interface.
    pub mark_boundary: bool,
    pub krylov: KrylovConfig,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self {
            precond: PreconditionerKind::Bddc,
            scaling: ScalingKind::Rho,
            primal: PrimalKind::Vef,
            subdomains: [2, 2, 2],
            mark_boundary: true,
            krylov: KrylovConfig::default(),
        }
    }
}

/// One linear solve: the correction and the Krylov statistics.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

/// Solver for Jacobians `τ diag(A_i, A_e) + nodal m_l (χC_m + τ s_l) blocks`.
pub trait JacobianSolver: Send {
    /// Rebuilds for nodal reaction slopes `s_l = ∂I_ion/∂v`.
    fn update(&mut self, slope: &[f64]) -> Result<()>;
    /// Solves for a right-hand side orthogonal to the joint constant.
    fn solve(&mut self, rhs: &[f64]) -> Result<LinearSolution>;
}

pub fn build_solver(
    mesh: &HexMesh,
    cond: &ConductivityTensors,
    membrane: &MembraneParams,
    tau: f64,
    cfg: &LinearSolverConfig,
) -> Result<Box<dyn JacobianSolver>> {
    cfg.krylov.validate()?;
    Ok(match cfg.precond {
        PreconditionerKind::None => Box::new(MonolithicSolver::new(mesh, cond, membrane, tau, cfg.krylov)?),
        _ if cfg.subdomains == [1, 1, 1] => Box::new(DirectSolver::new(mesh, cond, membrane, tau, cfg.krylov)?),
        _ => Box::new(DualPrimalSolver::new(mesh, cond, membrane, tau, cfg)?),
    })
}

fn project_out(v: &mut [f64], k: &[f64]) {
    let kk = dot(k, k);
    if kk > 0.0 {
        let c = dot(v, k) / kk;
        v.iter_mut().zip(k).for_each(|(a, b)| *a -= c * b);
    }
}

#[derive(Debug)]
enum Method {
    Bddc(Bddc),
    FetiDp(FetiDp),
}

#[derive(Debug)]
pub struct DualPrimalSolver {
    pub sys: SchurSystem,
    sigma: Vec<[f64; FIELDS]>,
    cfg: LinearSolverConfig,
    method: Option<Method>,
    kernel: Vec<f64>,
}

impl DualPrimalSolver {
    pub fn new(
        mesh: &HexMesh,
        cond: &ConductivityTensors,
        membrane: &MembraneParams,
        tau: f64,
        cfg: &LinearSolverConfig,
    ) -> Result<Self> {
        let decomp = partition_box_marked(mesh, cfg.subdomains, cfg.mark_boundary)?;
        let sys = SchurSystem::new(mesh, cond, decomp, cfg.primal, tau, membrane)?;
        let sigma = subdomain_sigma_max(mesh, cond, &sys);
        let kernel = sys.constant_coords();
        Ok(Self {
            sys,
            sigma,
            cfg: *cfg,
            method: None,
            kernel,
        })
    }

    fn rebuild(&mut self) -> Result<()> {
        let scaling = Scaling::build(self.cfg.scaling, &self.sys, &self.sigma)?;
        self.method = Some(match self.cfg.precond {
            PreconditionerKind::Fetidp => Method::FetiDp(FetiDp::new(&self.sys, scaling)?),
            _ => Method::Bddc(Bddc::new(&self.sys, scaling)?),
        });
        Ok(())
    }
}

impl JacobianSolver for DualPrimalSolver {
    fn update(&mut self, slope: &[f64]) -> Result<()> {
        self.sys.update(slope)?;
        self.rebuild()
    }

    fn solve(&mut self, rhs: &[f64]) -> Result<LinearSolution> {
        if self.method.is_none() {
            self.rebuild()?;
        }
        let (mut fhat, f_i) = self.sys.condense_rhs(rhs);
        project_out(&mut fhat, &self.kernel);
        let sys = &self.sys;
        let (u, report) = match self.method.as_ref().expect("built above") {
            Method::Bddc(b) => krylov::solve(|v| sys.apply(v), |r| b.apply(sys, r), &fhat, &self.cfg.krylov)?,
            Method::FetiDp(f) => {
                let sol = f.solve(sys, &fhat, &self.cfg.krylov)?;
                (sol.u, sol.report)
            }
        };
        Ok(LinearSolution {
            x: sys.recover(&u, &f_i),
            report,
        })
    }
}

/// Unpreconditioned CG on the assembled global Jacobian.
#[derive(Debug)]
pub struct MonolithicSolver {
    two: TwoFieldMatrix,
    mass: Vec<f64>,
    chi_cm: f64,
    tau: f64,
    krylov: KrylovConfig,
    matrix: CsrMatrix,
}

impl MonolithicSolver {
    pub fn new(
        mesh: &HexMesh,
        cond: &ConductivityTensors,
        membrane: &MembraneParams,
        tau: f64,
        krylov: KrylovConfig,
    ) -> Result<Self> {
        let a_i = assemble_stiffness(mesh, cond, Medium::Intra, None);
        let a_e = assemble_stiffness(mesh, cond, Medium::Extra, None);
        let two = TwoFieldMatrix::new(&a_i, &a_e, tau)?;
        let mass = assemble_lumped_mass(mesh, None);
        let chi_cm = membrane.chi * membrane.c_m;
        let w: Vec<f64> = mass.iter().map(|m| m * chi_cm).collect();
        let matrix = two.assemble(&w);
        Ok(Self {
            two,
            mass,
            chi_cm,
            tau,
            krylov,
            matrix,
        })
    }
}

impl JacobianSolver for MonolithicSolver {
    fn update(&mut self, slope: &[f64]) -> Result<()> {
        let w: Vec<f64> = self
            .mass
            .iter()
            .zip(slope)
            .map(|(m, s)| m * (self.chi_cm + self.tau * s))
            .collect();
        self.matrix = self.two.assemble(&w);
        Ok(())
    }

    fn solve(&mut self, rhs: &[f64]) -> Result<LinearSolution> {
        let mut b = rhs.to_vec();
        let ones = vec![1.0; b.len()];
        project_out(&mut b, &ones);
        let (x, report) = krylov::solve(|v| self.matrix.mul_vec(v), |r| r.to_vec(), &b, &self.krylov)?;
        Ok(LinearSolution { x, report })
    }
}

/// Sparse Cholesky of the global Jacobian with the last dof pinned.
///
/// Stands in for the dual-primal solvers on a single subdomain, where there
/// is no interface to precondition.
#[derive(Debug)]
pub struct DirectSolver {
    inner: MonolithicSolver,
    chol: SparseCholesky,
}

impl DirectSolver {
    pub fn new(
        mesh: &HexMesh,
        cond: &ConductivityTensors,
        membrane: &MembraneParams,
        tau: f64,
        krylov: KrylovConfig,
    ) -> Result<Self> {
        let inner = MonolithicSolver::new(mesh, cond, membrane, tau, krylov)?;
        let block = PrincipalBlock::new(&inner.matrix, inner.matrix.nrows() - 1);
        let chol = SparseCholesky::new(&block.matrix)?;
        Ok(Self { inner, chol })
    }
}

impl JacobianSolver for DirectSolver {
    fn update(&mut self, slope: &[f64]) -> Result<()> {
        self.inner.update(slope)?;
        let block = PrincipalBlock::new(&self.inner.matrix, self.inner.matrix.nrows() - 1);
        self.chol.factor(&block.matrix)
    }

    fn solve(&mut self, rhs: &[f64]) -> Result<LinearSolution> {
        let n = rhs.len();
        let ones = vec![1.0; n];
        let mut b = rhs.to_vec();
        project_out(&mut b, &ones);
        let mut x = b[..n - 1].to_vec();
        self.chol.solve_in_place(&mut x);
        x.push(0.0);
        project_out(&mut x, &ones);
        let mut r = self.inner.matrix.mul_vec(&x);
        r.iter_mut().zip(&b).for_each(|(r, b)| *r = b - *r);
        let residual = dot(&r, &r).sqrt();
        Ok(LinearSolution {
            x,
            report: SolveReport {
                iterations: 0,
                initial_residual: dot(&b, &b).sqrt(),
                residual,
                converged: true,
                eig_min: None,
                eig_max: None,
                history: vec![residual],
            },
        })
    }
}
