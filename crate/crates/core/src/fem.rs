//! Trilinear (Q1) element integrals and assembly of stiffness and lumped
//! mass matrices, globally or over a subset of elements.

use rayon::prelude::*;

use crate::conductivity::{ConductivityTensors, Medium};
use crate::mesh::HexMesh;
use crate::sparse::CsrMatrix;

/// 2x2x2 Gauss-Legendre rule on the reference cube `[0,1]^3`.
pub fn gauss_points() -> [([f64; 3], f64); 8] {
    let g = 0.5 / 3f64.sqrt();
    let p = [0.5 - g, 0.5 + g];
    std::array::from_fn(|a| ([p[a & 1], p[(a >> 1) & 1], p[(a >> 2) & 1]], 0.125))
}

pub fn shape(xi: &[f64; 3]) -> [f64; 8] {
    std::array::from_fn(|a| {
        let mut v = 1.0;
        for d in 0..3 {
            let bit = (a >> d) & 1;
            v *= if bit == 1 { xi[d] } else { 1.0 - xi[d] };
        }
        v
    })
}

/// Reference-cube gradients of the eight shape functions.
pub fn shape_grad_ref(xi: &[f64; 3]) -> [[f64; 3]; 8] {
    std::array::from_fn(|a| {
        let f: [(f64, f64); 3] = std::array::from_fn(|d| {
            if (a >> d) & 1 == 1 {
                (xi[d], 1.0)
            } else {
                (1.0 - xi[d], -1.0)
            }
        });
        [
            f[0].1 * f[1].0 * f[2].0,
            f[0].0 * f[1].1 * f[2].0,
            f[0].0 * f[1].0 * f[2].1,
        ]
    })
}

/// Jacobian `J[p][q] = ∂x_p/∂ξ_q` and its determinant.
pub fn jacobian(x: &[[f64; 3]; 8], xi: &[f64; 3]) -> ([[f64; 3]; 3], f64) {
    let g = shape_grad_ref(xi);
    let mut j = [[0.0; 3]; 3];
    for a in 0..8 {
        for p in 0..3 {
            for q in 0..3 {
                j[p][q] += x[a][p] * g[a][q];
            }
        }
    }
    (j, det3(&j))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Physical gradients at `xi` and the Jacobian determinant.
fn physical_gradients(x: &[[f64; 3]; 8], xi: &[f64; 3]) -> ([[f64; 3]; 8], f64) {
    let (j, det) = jacobian(x, xi);
    // inverse transpose via cofactors
    let mut cof = [[0.0; 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            let (p1, p2) = ((p + 1) % 3, (p + 2) % 3);
            let (q1, q2) = ((q + 1) % 3, (q + 2) % 3);
            cof[p][q] = j[p1][q1] * j[p2][q2] - j[p1][q2] * j[p2][q1];
        }
    }
    // J^{-T} = cof / det
    let gr = shape_grad_ref(xi);
    let grads = std::array::from_fn(|a| {
        let mut g = [0.0; 3];
        for p in 0..3 {
            for q in 0..3 {
                g[p] += cof[p][q] * gr[a][q];
            }
            g[p] /= det;
        }
        g
    });
    (grads, det)
}

/// `∫ ∇φ_aᵀ D ∇φ_b` over one hexahedron with constant `D`.
pub fn element_stiffness(x: &[[f64; 3]; 8], d: &[[f64; 3]; 3]) -> [[f64; 8]; 8] {
    let mut k = [[0.0; 8]; 8];
    for (xi, w) in gauss_points() {
        let (g, det) = physical_gradients(x, &xi);
        let wd = w * det;
        let dg: [[f64; 3]; 8] = std::array::from_fn(|b| {
            std::array::from_fn(|p| d[p][0] * g[b][0] + d[p][1] * g[b][1] + d[p][2] * g[b][2])
        });
        for a in 0..8 {
            for b in 0..8 {
                k[a][b] += wd * (g[a][0] * dg[b][0] + g[a][1] * dg[b][1] + g[a][2] * dg[b][2]);
            }
        }
    }
    k
}

/// Row sums of the consistent element mass matrix, i.e. `∫ φ_a`.
pub fn element_lumped_mass(x: &[[f64; 3]; 8]) -> [f64; 8] {
    let mut m = [0.0; 8];
    for (xi, w) in gauss_points() {
        let (_, det) = jacobian(x, &xi);
        let n = shape(&xi);
        for a in 0..8 {
            m[a] += w * det * n[a];
        }
    }
    m
}

/// Map from global node ids to a contiguous local numbering.
#[derive(Debug, Clone)]
pub struct NodeNumbering {
    /// Local to global, sorted ascending.
    pub nodes: Vec<usize>,
    local_of: Vec<usize>,
}

impl NodeNumbering {
    pub fn identity(n: usize) -> Self {
        Self {
            nodes: (0..n).collect(),
            local_of: (0..n).collect(),
        }
    }

    /// Nodes touched by `elements`, in ascending global order.
    pub fn of_elements(mesh: &HexMesh, elements: &[usize]) -> Self {
        let mut used = vec![false; mesh.num_nodes()];
        for &e in elements {
            for &n in &mesh.elements[e] {
                used[n] = true;
            }
        }
        let nodes: Vec<usize> = (0..used.len()).filter(|&n| used[n]).collect();
        let mut local_of = vec![usize::MAX; used.len()];
        for (l, &g) in nodes.iter().enumerate() {
            local_of[g] = l;
        }
        Self { nodes, local_of }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        match self.local_of.get(global) {
            Some(&l) if l != usize::MAX => Some(l),
            _ => None,
        }
    }
}

fn element_pattern(mesh: &HexMesh, elements: &[usize], map: &NodeNumbering) -> CsrMatrix {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); map.len()];
    for &e in elements {
        let loc: [usize; 8] = std::array::from_fn(|a| map.local(mesh.elements[e][a]).unwrap());
        for &r in &loc {
            rows[r].extend_from_slice(&loc);
        }
    }
    CsrMatrix::from_pattern(map.len(), &rows)
}

const CHUNK: usize = 4096;

/// Stiffness matrix of `medium` over `elements`, numbered by `map`.
pub fn assemble_stiffness_on(
    mesh: &HexMesh,
    cond: &ConductivityTensors,
    medium: Medium,
    elements: &[usize],
    map: &NodeNumbering,
) -> CsrMatrix {
    let mut a = element_pattern(mesh, elements, map);
    // element matrices are computed in parallel chunks and scattered in
    // element order, so the sums do not depend on the thread count
    for chunk in elements.chunks(CHUNK) {
        let local: Vec<[[f64; 8]; 8]> = chunk
            .par_iter()
            .map(|&e| element_stiffness(&mesh.element_coords(e), &cond.tensor_at(mesh, e, medium)))
            .collect();
        for (&e, ke) in chunk.iter().zip(&local) {
            let loc: [usize; 8] = std::array::from_fn(|q| map.local(mesh.elements[e][q]).unwrap());
            for p in 0..8 {
                for q in 0..8 {
                    let pos = a.position(loc[p], loc[q]).unwrap();
                    a.values_mut()[pos] += ke[p][q];
                }
            }
        }
    }
    a
}

/// Lumped mass over `elements`, numbered by `map`.
pub fn assemble_lumped_mass_on(mesh: &HexMesh, elements: &[usize], map: &NodeNumbering) -> Vec<f64> {
    let mut m = vec![0.0; map.len()];
    for &e in elements {
        let me = element_lumped_mass(&mesh.element_coords(e));
        for (a, &n) in mesh.elements[e].iter().enumerate() {
            m[map.local(n).unwrap()] += me[a];
        }
    }
    m
}

/// Stiffness in global node numbering; with a subset, rows of untouched
/// nodes are empty.
pub fn assemble_stiffness(
    mesh: &HexMesh,
    cond: &ConductivityTensors,
    medium: Medium,
    element_subset: Option<&[usize]>,
) -> CsrMatrix {
    let all: Vec<usize>;
    let elements = match element_subset {
        Some(s) => s,
        None => {
            all = (0..mesh.num_elements()).collect();
            &all
        }
    };
    assemble_stiffness_on(mesh, cond, medium, elements, &NodeNumbering::identity(mesh.num_nodes()))
}

pub fn assemble_lumped_mass(mesh: &HexMesh, element_subset: Option<&[usize]>) -> Vec<f64> {
    let all: Vec<usize>;
    let elements = match element_subset {
        Some(s) => s,
        None => {
            all = (0..mesh.num_elements()).collect();
            &all
        }
    };
    assemble_lumped_mass_on(mesh, elements, &NodeNumbering::identity(mesh.num_nodes()))
}
