//! Static condensation onto the interface: per-subdomain interior
//! factorizations, local Schur complements and harmonic extensions, and
//! the assembled interface operator in the transformed basis.

use std::ops::Range;

use rayon::prelude::*;

use crate::cholesky::SparseCholesky;
use crate::conductivity::{ConductivityTensors, Medium};
use crate::error::Result;
use crate::fem::{assemble_lumped_mass_on, assemble_stiffness_on};
use crate::ionic::MembraneParams;
use crate::mesh::HexMesh;
use crate::sparse::CsrMatrix;
use crate::system::{PrincipalBlock, TransformedMatrix, TwoFieldMatrix};
use crate::topology::{Decomposition, InterfaceLayout, LocalLayout, PrimalKind, FIELDS};

/// `y = A[rows, :] x`.
pub(crate) fn mul_rows(a: &CsrMatrix, rows: Range<usize>, x: &[f64]) -> Vec<f64> {
    rows.map(|r| {
        let (cols, vals) = a.row(r);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    })
    .collect()
}

/// One subdomain's Jacobian in the local `[I, Δ, Π]` basis with its
/// interior block factorized.
#[derive(Debug)]
pub struct LocalSchur {
    pub layout: LocalLayout,
    /// Global node ids of the local nodes.
    pub nodes: Vec<usize>,
    /// Local lumped mass.
    pub mass: Vec<f64>,
    /// Global dof of each local interior coordinate.
    pub interior_dofs: Vec<usize>,
    transformed: TransformedMatrix,
    /// Current `K̃^(j) = T_jᵀ K^(j) T_j`.
    pub k: CsrMatrix,
    k_ii: PrincipalBlock,
    chol_ii: SparseCholesky,
}

impl LocalSchur {
    pub fn n_i(&self) -> usize {
        self.layout.n_i
    }

    pub fn n_gamma(&self) -> usize {
        self.layout.n_gamma()
    }

    pub fn n_total(&self) -> usize {
        self.layout.n_total()
    }

    pub(crate) fn weights(&self, chi_cm: f64, tau: f64, slope: &[f64]) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.mass)
            .map(|(&n, &m)| m * (chi_cm + tau * slope[n]))
            .collect()
    }

    /// Rebuilds `K̃` for new nodal reaction slopes and refactors `K_II`.
    pub fn update(&mut self, chi_cm: f64, tau: f64, slope: &[f64]) -> Result<()> {
        self.k = self.transformed.assemble(&self.weights(chi_cm, tau, slope));
        self.k_ii.refresh(&self.k);
        self.chol_ii.factor(&self.k_ii.matrix)
    }

    pub fn solve_interior(&self, b: &mut [f64]) {
        self.chol_ii.solve_in_place(b);
    }

    /// `K_II⁻¹` applied to every column of `b`.
    pub fn solve_interior_mat(&self, b: faer::MatMut<'_, f64>) {
        self.chol_ii.solve_mat_in_place(b);
    }

    /// `S_Γ v = K_ΓΓ v − K_ΓI K_II⁻¹ K_IΓ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let full = self.harmonic_extension(v);
        mul_rows(&self.k, self.n_i()..self.n_total(), &full)
    }

    /// `[−K_II⁻¹ K_IΓ v; v]`.
    pub fn harmonic_extension(&self, v: &[f64]) -> Vec<f64> {
        let ni = self.n_i();
        let mut full = vec![0.0; self.n_total()];
        full[ni..].copy_from_slice(v);
        let mut xi = mul_rows(&self.k, 0..ni, &full);
        self.chol_ii.solve_in_place(&mut xi);
        for (d, s) in full[..ni].iter_mut().zip(&xi) {
            *d = -s;
        }
        full
    }

    /// `f_Γ − K_ΓI K_II⁻¹ f_I` for a local right-hand side `[f_I; f_Γ]`.
    pub fn condense(&self, f: &[f64]) -> Vec<f64> {
        let ni = self.n_i();
        let mut y = vec![0.0; self.n_total()];
        y[..ni].copy_from_slice(&f[..ni]);
        self.chol_ii.solve_in_place(&mut y[..ni]);
        let ky = mul_rows(&self.k, ni..self.n_total(), &y);
        f[ni..].iter().zip(&ky).map(|(a, b)| a - b).collect()
    }

    /// `K_II⁻¹ (f_I − K_IΓ u_Γ)`.
    pub fn recover_interior(&self, f_i: &[f64], u_gamma: &[f64]) -> Vec<f64> {
        let ni = self.n_i();
        let mut full = vec![0.0; self.n_total()];
        full[ni..].copy_from_slice(u_gamma);
        let kg = mul_rows(&self.k, 0..ni, &full);
        let mut x: Vec<f64> = f_i.iter().zip(&kg).map(|(a, b)| a - b).collect();
        self.chol_ii.solve_in_place(&mut x);
        x
    }

    /// Local energy `xᵀ K̃ x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let kx = self.k.mul_vec(x);
        kx.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// The interface operator `Ŝ = Σ_j R_jᵀ S_Γ^(j) R_j` in transformed
/// coordinates, with everything needed to condense and recover.
#[derive(Debug)]
pub struct SchurSystem {
    pub decomp: Decomposition,
    pub layout: InterfaceLayout,
    pub subs: Vec<LocalSchur>,
    pub tau: f64,
    pub chi_cm: f64,
}

impl SchurSystem {
    /// Assembles and transforms every subdomain matrix; the reaction slope
    /// starts at zero.
    pub fn new(
        mesh: &HexMesh,
        cond: &ConductivityTensors,
        decomp: Decomposition,
        primal: PrimalKind,
        tau: f64,
        membrane: &MembraneParams,
    ) -> Result<Self> {
        let layout = InterfaceLayout::new(&decomp, primal);
        let chi_cm = membrane.chi * membrane.c_m;
        let subs = decomp
            .subdomains
            .par_iter()
            .map(|sub| -> Result<LocalSchur> {
                let map = &sub.numbering;
                let a_i = assemble_stiffness_on(mesh, cond, Medium::Intra, &sub.elements, map);
                let a_e = assemble_stiffness_on(mesh, cond, Medium::Extra, &sub.elements, map);
                let mass = assemble_lumped_mass_on(mesh, &sub.elements, map);
                let two = TwoFieldMatrix::new(&a_i, &a_e, tau)?;
                let loc = layout.local_transform(&decomp, sub.index);
                let transformed = TransformedMatrix::new(&two, &loc.t);
                let nodes = map.nodes.clone();
                let interior_dofs = sub
                    .interior_nodes
                    .iter()
                    .flat_map(|&l| (0..FIELDS).map(move |f| (l, f)))
                    .map(|(l, f)| FIELDS * nodes[l] + f)
                    .collect();
                let weights: Vec<f64> = mass.iter().map(|m| m * chi_cm).collect();
                let k = transformed.assemble(&weights);
                let k_ii = PrincipalBlock::new(&k, loc.n_i);
                let chol_ii = SparseCholesky::new(&k_ii.matrix)?;
                Ok(LocalSchur {
                    layout: loc,
                    nodes,
                    mass,
                    interior_dofs,
                    transformed,
                    k,
                    k_ii,
                    chol_ii,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            decomp,
            layout,
            subs,
            tau,
            chi_cm,
        })
    }

    pub fn n_interface(&self) -> usize {
        self.layout.n_interface()
    }

    pub fn num_dofs(&self) -> usize {
        FIELDS * self.decomp.num_nodes
    }

    /// Refreshes all subdomain Jacobians for nodal slopes `∂I_ion/∂v`.
    pub fn update(&mut self, slope: &[f64]) -> Result<()> {
        let (chi_cm, tau) = (self.chi_cm, self.tau);
        self.subs
            .par_iter_mut()
            .map(|s| s.update(chi_cm, tau, slope))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    /// Local `[Δ; Π]` values of subdomain `j` from interface coordinates.
    pub fn gather(&self, j: usize, coords: &[f64]) -> Vec<f64> {
        let l = &self.subs[j].layout;
        let nd = self.layout.n_dual;
        l.delta_global
            .iter()
            .map(|&g| coords[g])
            .chain(l.pi_global.iter().map(|&g| coords[nd + g]))
            .collect()
    }

    pub fn scatter_add(&self, j: usize, local: &[f64], coords: &mut [f64]) {
        let l = &self.subs[j].layout;
        let nd = self.layout.n_dual;
        for (k, &g) in l.delta_global.iter().enumerate() {
            coords[g] += local[k];
        }
        for (k, &g) in l.pi_global.iter().enumerate() {
            coords[nd + g] += local[l.n_delta + k];
        }
    }

    /// Sums per-subdomain contributions in subdomain order.
    pub(crate) fn assemble_parts(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interface()];
        for (j, p) in parts.iter().enumerate() {
            self.scatter_add(j, p, &mut out);
        }
        out
    }

    /// `Ŝ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let parts = (0..self.subs.len())
            .into_par_iter()
            .map(|j| self.subs[j].apply(&self.gather(j, v)))
            .collect();
        self.assemble_parts(parts)
    }

    /// Splits a global nodal right-hand side into condensed interface
    /// data `f̂_Γ` and per-subdomain interior loads.
    pub fn condense_rhs(&self, f: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let f_gamma = self.layout.transpose_to_coords(&self.decomp, f);
        let f_i: Vec<Vec<f64>> = self
            .subs
            .iter()
            .map(|s| s.interior_dofs.iter().map(|&d| f[d]).collect())
            .collect();
        let parts = (0..self.subs.len())
            .into_par_iter()
            .map(|j| {
                let s = &self.subs[j];
                let mut local = vec![0.0; s.n_total()];
                local[..s.n_i()].copy_from_slice(&f_i[j]);
                // only the interior load is condensed here; the interface
                // load is added once, globally
                let c = s.condense(&local);
                c.into_iter().map(|v| -v).collect::<Vec<f64>>()
            })
            .collect();
        let correction = self.assemble_parts(parts);
        let fhat = f_gamma.iter().zip(&correction).map(|(a, b)| a - b).collect();
        (fhat, f_i)
    }

    /// Global nodal solution from interface coordinates and interior loads.
    pub fn recover(&self, u_coords: &[f64], f_i: &[Vec<f64>]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_dofs()];
        self.layout.from_coords(&self.decomp, u_coords, &mut u);
        let interiors: Vec<Vec<f64>> = (0..self.subs.len())
            .into_par_iter()
            .map(|j| self.subs[j].recover_interior(&f_i[j], &self.gather(j, u_coords)))
            .collect();
        for (s, ui) in self.subs.iter().zip(&interiors) {
            for (&d, &v) in s.interior_dofs.iter().zip(ui) {
                u[d] = v;
            }
        }
        u
    }

    /// Interface coordinates of the joint constant (all ones).
    pub fn constant_coords(&self) -> Vec<f64> {
        self.layout.to_coords(&self.decomp, &vec![1.0; self.num_dofs()])
    }
}
