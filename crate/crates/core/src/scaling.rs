//! ρ- and deluxe scaling of the dual interface coordinates, the averaging
//! projection `E_D` and its complement `P_D`.
//!
//! Partially assembled vectors keep one dual block per subdomain and a
//! single shared primal block ([`TildeVector`]).

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::DenseCholesky;
use crate::conductivity::{ConductivityTensors, Medium};
use crate::error::Result;
use crate::mesh::HexMesh;
use crate::schur::SchurSystem;
use crate::topology::FIELDS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    Rho,
    Deluxe,
}

impl std::str::FromStr for ScalingKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rho" => Ok(ScalingKind::Rho),
            "deluxe" => Ok(ScalingKind::Deluxe),
            _ => Err(format!("unknown scaling '{s}' (expected rho or deluxe)")),
        }
    }
}

/// Element of `W̃_Γ`: per-subdomain dual values plus shared primal values.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeVector {
    pub delta: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl TildeVector {
    pub fn zeros(sys: &SchurSystem) -> Self {
        Self {
            delta: sys.subs.iter().map(|s| vec![0.0; s.layout.n_delta]).collect(),
            pi: vec![0.0; sys.layout.n_primal],
        }
    }

    /// `R̃ u`: restriction of an assembled interface vector.
    pub fn restrict(sys: &SchurSystem, coords: &[f64]) -> Self {
        Self {
            delta: sys
                .subs
                .iter()
                .map(|s| s.layout.delta_global.iter().map(|&g| coords[g]).collect())
                .collect(),
            pi: coords[sys.layout.n_dual..].to_vec(),
        }
    }

    /// `R̃ᵀ w`: sums dual copies, keeps primal values.
    pub fn assemble(&self, sys: &SchurSystem) -> Vec<f64> {
        let mut out = vec![0.0; sys.n_interface()];
        for (s, d) in sys.subs.iter().zip(&self.delta) {
            for (&g, &v) in s.layout.delta_global.iter().zip(d) {
                out[g] += v;
            }
        }
        out[sys.layout.n_dual..].copy_from_slice(&self.pi);
        out
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let d: f64 = self
            .delta
            .iter()
            .zip(&other.delta)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        d + self.pi.iter().zip(&other.pi).map(|(x, y)| x * y).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum Block {
    /// Per-field weights; `d` dual coordinates per field.
    Diagonal { w: [f64; FIELDS], d: usize },
    Dense(Mat<f64>),
}

impl Block {
    fn apply(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        match self {
            Block::Diagonal { w, d } => {
                for (k, (yi, xi)) in y.iter_mut().zip(x).enumerate() {
                    *yi = w[k / d] * xi;
                }
            }
            Block::Dense(m) => {
                let n = x.len();
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += if transpose { m[(j, i)] } else { m[(i, j)] } * x[j];
                    }
                    y[i] = s;
                }
            }
        }
    }
}

/// Class-sum data kept for deluxe averaging.
#[derive(Debug)]
pub struct DeluxeClass {
    /// Minors `S_c^(j)` of the sharers, in sharer order.
    pub minors: Vec<Mat<f64>>,
    pub sum: DenseCholesky,
    /// Whether the Tikhonov shift had to be applied.
    pub shifted: bool,
}

#[derive(Debug)]
pub struct Scaling {
    pub kind: ScalingKind,
    /// Per subdomain, per entry of `Subdomain::classes`.
    blocks: Vec<Vec<Option<Block>>>,
    /// Per class, deluxe only.
    pub deluxe: Vec<Option<DeluxeClass>>,
}

/// Largest coefficient of each subdomain, per field.
pub fn subdomain_sigma_max(mesh: &HexMesh, cond: &ConductivityTensors, sys: &SchurSystem) -> Vec<[f64; FIELDS]> {
    sys.decomp
        .subdomains
        .iter()
        .map(|sub| {
            let mut m = [0.0f64; FIELDS];
            for &e in &sub.elements {
                let ijk = mesh.element_ijk(e);
                for (f, medium) in [Medium::Intra, Medium::Extra].into_iter().enumerate() {
                    m[f] = m[f].max(cond.coefficients_at(ijk, medium).max());
                }
            }
            m
        })
        .collect()
}

/// Dense principal minor of `S_Γ^(j)` on the dual coordinates of the
/// `k`-th class of subdomain `j`.
pub fn class_minor(sys: &SchurSystem, j: usize, k: usize) -> Mat<f64> {
    let s = &sys.subs[j];
    let ni = s.n_i();
    let range = s.layout.class_delta[k].clone();
    let n = range.len();
    let first = ni + range.start;
    let mut b = Mat::<f64>::zeros(ni, n);
    let mut kcc = Mat::<f64>::zeros(n, n);
    for (col, r) in (first..first + n).enumerate() {
        let (cols, vals) = s.k.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c < ni {
                b[(c, col)] = v;
            } else if c >= first && c < first + n {
                kcc[(col, c - first)] = v;
            }
        }
    }
    let mut x = b.clone();
    s.solve_interior_mat(x.as_mut());
    let mut out = kcc - b.transpose() * &x;
    // symmetrize the rounding
    for i in 0..n {
        for jj in 0..i {
            let a = 0.5 * (out[(i, jj)] + out[(jj, i)]);
            out[(i, jj)] = a;
            out[(jj, i)] = a;
        }
    }
    out
}

impl Scaling {
    pub fn rho(sys: &SchurSystem, sigma: &[[f64; FIELDS]]) -> Self {
        let d = &sys.decomp;
        let blocks = d
            .subdomains
            .iter()
            .map(|sub| {
                sub.classes
                    .iter()
                    .map(|&c| {
                        let (nd, _) = sys.layout.class_split(d, c);
                        if nd == 0 {
                            return None;
                        }
                        let sharers = &d.classes[c].sharers;
                        let w = std::array::from_fn(|f| {
                            let total: f64 = sharers.iter().map(|&k| sigma[k][f]).sum();
                            sigma[sub.index][f] / total
                        });
                        Some(Block::Diagonal { w, d: nd })
                    })
                    .collect()
            })
            .collect();
        Self {
            kind: ScalingKind::Rho,
            blocks,
            deluxe: Vec::new(),
        }
    }

    pub fn deluxe(sys: &SchurSystem) -> Result<Self> {
        let d = &sys.decomp;
        let minors: Vec<Vec<Option<Mat<f64>>>> = (0..sys.subs.len())
            .into_par_iter()
            .map(|j| {
                let sub = &d.subdomains[j];
                (0..sub.classes.len())
                    .map(|k| {
                        if sys.subs[j].layout.class_delta[k].is_empty() {
                            None
                        } else {
                            Some(class_minor(sys, j, k))
                        }
                    })
                    .collect()
            })
            .collect();
        let local_index = |j: usize, c: usize| d.subdomains[j].classes.binary_search(&c).unwrap();
        let per_class: Vec<Option<(DeluxeClass, Vec<Mat<f64>>)>> = (0..d.classes.len())
            .into_par_iter()
            .map(|c| -> Result<Option<(DeluxeClass, Vec<Mat<f64>>)>> {
                let sharers = &d.classes[c].sharers;
                let ms: Vec<Mat<f64>> = sharers
                    .iter()
                    .filter_map(|&j| minors[j][local_index(j, c)].clone())
                    .collect();
                if ms.is_empty() {
                    return Ok(None);
                }
                let n = ms[0].nrows();
                let mut sum = Mat::<f64>::zeros(n, n);
                for m in &ms {
                    sum += m;
                }
                let (chol, shifted) = match DenseCholesky::new(&sum) {
                    Ok(ch) => (ch, false),
                    Err(_) => {
                        let tr: f64 = (0..n).map(|i| sum[(i, i)]).sum();
                        for i in 0..n {
                            sum[(i, i)] += 1e-14 * tr.abs().max(f64::MIN_POSITIVE);
                        }
                        (DenseCholesky::new(&sum)?, true)
                    }
                };
                let ds = ms.iter().map(|m| chol.solve_mat(m)).collect();
                Ok(Some((
                    DeluxeClass {
                        minors: ms,
                        sum: chol,
                        shifted,
                    },
                    ds,
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut blocks: Vec<Vec<Option<Block>>> = d
            .subdomains
            .iter()
            .map(|sub| vec![None; sub.classes.len()])
            .collect();
        let mut deluxe = Vec::with_capacity(per_class.len());
        for (c, entry) in per_class.into_iter().enumerate() {
            match entry {
                Some((dc, ds)) => {
                    for (&j, dm) in d.classes[c].sharers.iter().zip(ds) {
                        blocks[j][local_index(j, c)] = Some(Block::Dense(dm));
                    }
                    deluxe.push(Some(dc));
                }
                None => deluxe.push(None),
            }
        }
        Ok(Self {
            kind: ScalingKind::Deluxe,
            blocks,
            deluxe,
        })
    }

    pub fn build(kind: ScalingKind, sys: &SchurSystem, sigma: &[[f64; FIELDS]]) -> Result<Self> {
        match kind {
            ScalingKind::Rho => Ok(Self::rho(sys, sigma)),
            ScalingKind::Deluxe => Self::deluxe(sys),
        }
    }

    fn apply_local(&self, sys: &SchurSystem, j: usize, x: &[f64], transpose: bool) -> Vec<f64> {
        let lay = &sys.subs[j].layout;
        let mut y = vec![0.0; x.len()];
        for (k, r) in lay.class_delta.iter().enumerate() {
            if let Some(b) = &self.blocks[j][k] {
                b.apply(&x[r.clone()], &mut y[r.clone()], transpose);
            }
        }
        y
    }

    /// `D_j x` on the dual block of subdomain `j`.
    pub fn scale(&self, sys: &SchurSystem, j: usize, x: &[f64]) -> Vec<f64> {
        self.apply_local(sys, j, x, false)
    }

    /// `D_jᵀ x`.
    pub fn scale_transpose(&self, sys: &SchurSystem, j: usize, x: &[f64]) -> Vec<f64> {
        self.apply_local(sys, j, x, true)
    }

    /// `E_D w`: scaled average of dual copies, primal part unchanged.
    pub fn average(&self, sys: &SchurSystem, w: &TildeVector) -> Vec<f64> {
        let mut out = vec![0.0; sys.n_interface()];
        for (j, s) in sys.subs.iter().enumerate() {
            let dw = self.scale(sys, j, &w.delta[j]);
            for (&g, &v) in s.layout.delta_global.iter().zip(&dw) {
                out[g] += v;
            }
        }
        out[sys.layout.n_dual..].copy_from_slice(&w.pi);
        out
    }

    /// `R̃_D r`: scaled restriction of an assembled interface vector.
    pub fn scaled_restrict(&self, sys: &SchurSystem, coords: &[f64]) -> TildeVector {
        let mut t = TildeVector::restrict(sys, coords);
        for j in 0..sys.subs.len() {
            t.delta[j] = self.scale_transpose(sys, j, &t.delta[j]);
        }
        t
    }

    /// `P_D w = w − R̃ E_D w`; the primal part of the result is zero.
    pub fn jump(&self, sys: &SchurSystem, w: &TildeVector) -> TildeVector {
        let avg = self.average(sys, w);
        let r = TildeVector::restrict(sys, &avg);
        TildeVector {
            delta: w
                .delta
                .iter()
                .zip(&r.delta)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
            pi: vec![0.0; w.pi.len()],
        }
    }

    /// `P_Dᵀ` on dual blocks: `y − R̃_D R̃ᵀ y`.
    pub fn jump_transpose(&self, sys: &SchurSystem, y: &TildeVector) -> TildeVector {
        let mut dual_only = y.clone();
        dual_only.pi.iter_mut().for_each(|v| *v = 0.0);
        let assembled = dual_only.assemble(sys);
        let back = self.scaled_restrict(sys, &assembled);
        TildeVector {
            delta: y
                .delta
                .iter()
                .zip(&back.delta)
                .map(|(a, b)| a.iter().zip(b).map(|(x, z)| x - z).collect())
                .collect(),
            pi: vec![0.0; y.pi.len()],
        }
    }

    /// Deluxe average of class `c` from one dual block per sharer.
    pub fn deluxe_average(&self, c: usize, values: &[Vec<f64>]) -> Option<Vec<f64>> {
        let dc = self.deluxe.get(c)?.as_ref()?;
        let n = dc.minors[0].nrows();
        let mut rhs = vec![0.0; n];
        for (m, u) in dc.minors.iter().zip(values) {
            for i in 0..n {
                rhs[i] += (0..n).map(|k| m[(i, k)] * u[k]).sum::<f64>();
            }
        }
        dc.sum.solve_in_place(&mut rhs);
        Some(rhs)
    }
}
