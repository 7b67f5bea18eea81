//! BDDC preconditioner and FETI-DP operator built on the partially
//! assembled interface space `W̃_Γ`.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::{DenseCholesky, SparseCholesky};
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovConfig, SolveReport};
use crate::scaling::{Scaling, TildeVector};
use crate::schur::SchurSystem;
use crate::system::PrincipalBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    Bddc,
    Fetidp,
    None,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bddc" => Ok(PreconditionerKind::Bddc),
            "fetidp" | "feti-dp" => Ok(PreconditionerKind::Fetidp),
            "none" => Ok(PreconditionerKind::None),
            _ => Err(format!("unknown preconditioner '{s}' (expected bddc, fetidp or none)")),
        }
    }
}

/// Factorized local `K_rr` blocks (r = I ∪ Δ) and the coarse problem;
/// together they apply `S̃_Γ⁻¹`.
#[derive(Debug)]
pub struct PartialAssembly {
    rr: Vec<PrincipalBlock>,
    chol: Vec<SparseCholesky>,
    /// Δ rows of `X_j = −K_rr⁻¹ K_rΠ`.
    x_delta: Vec<Mat<f64>>,
    /// Assembled coarse matrix before gauge pinning.
    pub coarse_matrix: Mat<f64>,
    coarse: Option<DenseCholesky>,
    /// Primal coordinate fixed to zero to remove the constant kernel.
    pub pin: Option<usize>,
}

impl PartialAssembly {
    pub fn new(sys: &SchurSystem) -> Result<Self> {
        let rr: Vec<PrincipalBlock> = sys
            .subs
            .iter()
            .map(|s| PrincipalBlock::new(&s.k, s.n_i() + s.layout.n_delta))
            .collect();
        let chol = rr
            .iter()
            .map(|b| SparseCholesky::analyze(&b.matrix))
            .collect::<Result<Vec<_>>>()?;
        let mut pa = Self {
            rr,
            chol,
            x_delta: Vec::new(),
            coarse_matrix: Mat::zeros(0, 0),
            coarse: None,
            pin: None,
        };
        pa.update(sys)?;
        Ok(pa)
    }

    /// Refactors everything for the current subdomain matrices.
    pub fn update(&mut self, sys: &SchurSystem) -> Result<()> {
        let locals: Vec<(Mat<f64>, Mat<f64>)> = self
            .rr
            .par_iter_mut()
            .zip(self.chol.par_iter_mut())
            .enumerate()
            .map(|(j, (rr, chol))| -> Result<(Mat<f64>, Mat<f64>)> {
                let s = &sys.subs[j];
                rr.refresh(&s.k);
                chol.factor(&rr.matrix).map_err(|_| {
                    Error::Config(format!(
                        "subdomain {j} is left floating by the primal space (singular K_rr); choose a richer primal space"
                    ))
                })?;
                let nr = rr.matrix.nrows();
                let np = s.layout.n_pi;
                let mut x = Mat::<f64>::zeros(nr, np);
                for r in 0..nr {
                    let (cols, vals) = s.k.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        if c >= nr {
                            x[(r, c - nr)] = -v;
                        }
                    }
                }
                chol.solve_mat_in_place(x.as_mut());
                // K_ΠΠ + K_Πr X
                let mut local = Mat::<f64>::zeros(np, np);
                for p in 0..np {
                    let (cols, vals) = s.k.row(nr + p);
                    for (&c, &v) in cols.iter().zip(vals) {
                        if c >= nr {
                            local[(p, c - nr)] += v;
                        } else {
                            for q in 0..np {
                                local[(p, q)] += v * x[(c, q)];
                            }
                        }
                    }
                }
                let x_delta = x.subrows(s.n_i(), s.layout.n_delta).to_owned();
                Ok((x_delta, local))
            })
            .collect::<Result<Vec<_>>>()?;
        let np = sys.layout.n_primal;
        let mut coarse = Mat::<f64>::zeros(np, np);
        self.x_delta.clear();
        for (j, (xd, local)) in locals.into_iter().enumerate() {
            let pg = &sys.subs[j].layout.pi_global;
            for (a, &ga) in pg.iter().enumerate() {
                for (b, &gb) in pg.iter().enumerate() {
                    coarse[(ga, gb)] += local[(a, b)];
                }
            }
            self.x_delta.push(xd);
        }
        for i in 0..np {
            for k in 0..i {
                let a = 0.5 * (coarse[(i, k)] + coarse[(k, i)]);
                coarse[(i, k)] = a;
                coarse[(k, i)] = a;
            }
        }
        self.coarse_matrix = coarse.clone();
        if np > 0 {
            // the Jacobian always carries the joint-constant kernel
            self.pin = Some(0);
            for k in 0..np {
                coarse[(0, k)] = 0.0;
                coarse[(k, 0)] = 0.0;
            }
            coarse[(0, 0)] = 1.0;
            self.coarse = Some(DenseCholesky::new(&coarse).map_err(|e| {
                Error::Factorization(format!("coarse matrix is singular after gauge fixing: {e}"))
            })?);
        } else {
            self.pin = None;
            self.coarse = None;
        }
        Ok(())
    }

    /// `S̃_Γ⁻¹ g`, with the pinned gauge.
    pub fn solve(&self, sys: &SchurSystem, g: &TildeVector) -> TildeVector {
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..sys.subs.len())
            .into_par_iter()
            .map(|j| {
                let s = &sys.subs[j];
                let ni = s.n_i();
                let mut x = vec![0.0; ni + s.layout.n_delta];
                x[ni..].copy_from_slice(&g.delta[j]);
                self.chol[j].solve_in_place(&mut x);
                let xd = &self.x_delta[j];
                let c: Vec<f64> = (0..xd.ncols())
                    .map(|q| (0..xd.nrows()).map(|p| xd[(p, q)] * g.delta[j][p]).sum())
                    .collect();
                (x[ni..].to_vec(), c)
            })
            .collect();
        let mut h = g.pi.clone();
        for (j, (_, c)) in parts.iter().enumerate() {
            for (&gp, &v) in sys.subs[j].layout.pi_global.iter().zip(c) {
                h[gp] += v;
            }
        }
        if let (Some(p), Some(ch)) = (self.pin, &self.coarse) {
            h[p] = 0.0;
            ch.solve_in_place(&mut h);
        }
        let w_pi = h;
        let delta = parts
            .into_par_iter()
            .enumerate()
            .map(|(j, (mut xd_val, _))| {
                let xd = &self.x_delta[j];
                let pg = &sys.subs[j].layout.pi_global;
                for p in 0..xd.nrows() {
                    let mut s = 0.0;
                    for (q, &gq) in pg.iter().enumerate() {
                        s += xd[(p, q)] * w_pi[gq];
                    }
                    xd_val[p] += s;
                }
                xd_val
            })
            .collect();
        TildeVector { delta, pi: w_pi }
    }

    /// `S̃_Γ w`.
    pub fn apply(&self, sys: &SchurSystem, w: &TildeVector) -> TildeVector {
        let parts: Vec<Vec<f64>> = (0..sys.subs.len())
            .into_par_iter()
            .map(|j| {
                let s = &sys.subs[j];
                let mut v = w.delta[j].clone();
                v.extend(s.layout.pi_global.iter().map(|&g| w.pi[g]));
                s.apply(&v)
            })
            .collect();
        let mut pi = vec![0.0; w.pi.len()];
        let mut delta = Vec::with_capacity(parts.len());
        for (j, y) in parts.into_iter().enumerate() {
            let nd = sys.subs[j].layout.n_delta;
            for (&g, &v) in sys.subs[j].layout.pi_global.iter().zip(&y[nd..]) {
                pi[g] += v;
            }
            delta.push(y[..nd].to_vec());
        }
        TildeVector { delta, pi }
    }
}

/// `M⁻¹ = R̃_Dᵀ S̃_Γ⁻¹ R̃_D`.
#[derive(Debug)]
pub struct Bddc {
    pub partial: PartialAssembly,
    pub scaling: Scaling,
}

impl Bddc {
    pub fn new(sys: &SchurSystem, scaling: Scaling) -> Result<Self> {
        Ok(Self {
            partial: PartialAssembly::new(sys)?,
            scaling,
        })
    }

    pub fn apply(&self, sys: &SchurSystem, r: &[f64]) -> Vec<f64> {
        let g = self.scaling.scaled_restrict(sys, r);
        let w = self.partial.solve(sys, &g);
        self.scaling.average(sys, &w)
    }
}

/// Non-redundant jump operator: for each dual coordinate with copies in
/// subdomains `s_0 < … < s_{m−1}`, rows `w^{s_k} − w^{s_{k+1}}`.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    /// Per global dual coordinate: (subdomain, local Δ index) of each copy.
    copies: Vec<Vec<(usize, usize)>>,
    start: Vec<usize>,
    pub rows: usize,
}

impl JumpOperator {
    pub fn new(sys: &SchurSystem) -> Self {
        let mut copies = vec![Vec::new(); sys.layout.n_dual];
        for (j, s) in sys.subs.iter().enumerate() {
            for (k, &g) in s.layout.delta_global.iter().enumerate() {
                copies[g].push((j, k));
            }
        }
        let mut start = Vec::with_capacity(copies.len());
        let mut rows = 0;
        for c in &copies {
            start.push(rows);
            rows += c.len() - 1;
        }
        Self { copies, start, rows }
    }

    pub fn apply(&self, w: &TildeVector) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (g, c) in self.copies.iter().enumerate() {
            for k in 0..c.len() - 1 {
                let (a, ka) = c[k];
                let (b, kb) = c[k + 1];
                out[self.start[g] + k] = w.delta[a][ka] - w.delta[b][kb];
            }
        }
        out
    }

    /// `Bᵀ λ` with a zero primal part.
    pub fn apply_transpose(&self, sys: &SchurSystem, lambda: &[f64]) -> TildeVector {
        let mut t = TildeVector::zeros(sys);
        for (g, c) in self.copies.iter().enumerate() {
            for k in 0..c.len() - 1 {
                let l = lambda[self.start[g] + k];
                let (a, ka) = c[k];
                let (b, kb) = c[k + 1];
                t.delta[a][ka] += l;
                t.delta[b][kb] -= l;
            }
        }
        t
    }

    /// `(B Bᵀ)⁻¹`: one tridiagonal `[2 −1; −1 2 …]` system per coordinate.
    pub fn solve_bbt(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = mu.to_vec();
        let mut cp = Vec::new();
        for (g, c) in self.copies.iter().enumerate() {
            let n = c.len() - 1;
            let x = &mut out[self.start[g]..self.start[g] + n];
            // Thomas algorithm
            cp.clear();
            cp.resize(n, 0.0);
            let mut denom = 2.0;
            cp[0] = -1.0 / denom;
            x[0] /= denom;
            for i in 1..n {
                denom = 2.0 + cp[i - 1];
                cp[i] = -1.0 / denom;
                x[i] = (x[i] + x[i - 1]) / denom;
            }
            for i in (0..n.saturating_sub(1)).rev() {
                x[i] -= cp[i] * x[i + 1];
            }
        }
        out
    }

    /// Mean of the copies of each dual coordinate.
    pub fn average_copies(&self, w: &TildeVector) -> Vec<f64> {
        self.copies
            .iter()
            .map(|c| c.iter().map(|&(j, k)| w.delta[j][k]).sum::<f64>() / c.len() as f64)
            .collect()
    }
}

#[derive(Debug)]
pub struct FetiDp {
    pub partial: PartialAssembly,
    pub scaling: Scaling,
    pub jumps: JumpOperator,
}

/// Result of a FETI-DP solve.
#[derive(Debug, Clone)]
pub struct FetiDpSolution {
    /// Assembled interface coordinates.
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub report: SolveReport,
    /// `‖B w‖ / ‖w‖` of the recovered iterate.
    pub relative_jump: f64,
}

impl FetiDp {
    pub fn new(sys: &SchurSystem, scaling: Scaling) -> Result<Self> {
        Ok(Self {
            partial: PartialAssembly::new(sys)?,
            scaling,
            jumps: JumpOperator::new(sys),
        })
    }

    /// `F λ = B S̃⁻¹ Bᵀ λ`.
    pub fn apply_f(&self, sys: &SchurSystem, lambda: &[f64]) -> Vec<f64> {
        let bt = self.jumps.apply_transpose(sys, lambda);
        self.jumps.apply(&self.partial.solve(sys, &bt))
    }

    /// `B_D S̃ B_Dᵀ μ` with `B_Dᵀ = P_D Bᵀ (B Bᵀ)⁻¹`.
    pub fn apply_preconditioner(&self, sys: &SchurSystem, mu: &[f64]) -> Vec<f64> {
        let y = self.jumps.solve_bbt(mu);
        let bt = self.jumps.apply_transpose(sys, &y);
        let pd = self.scaling.jump(sys, &bt);
        let s = self.partial.apply(sys, &pd);
        let pdt = self.scaling.jump_transpose(sys, &s);
        self.jumps.solve_bbt(&self.jumps.apply(&pdt))
    }

    /// Only the relative tolerance of `cfg` is used: multipliers carry flux
    /// units, so an absolute floor meant for interface potentials would
    /// stop the iteration early.
    pub fn solve(&self, sys: &SchurSystem, fhat: &[f64], cfg: &KrylovConfig) -> Result<FetiDpSolution> {
        let ft = self.scaling.scaled_restrict(sys, fhat);
        let d = self.jumps.apply(&self.partial.solve(sys, &ft));
        let cfg = KrylovConfig { atol: 0.0, ..*cfg };
        let (lambda, report) = krylov::solve(
            |l: &[f64]| self.apply_f(sys, l),
            |m: &[f64]| self.apply_preconditioner(sys, m),
            &d,
            &cfg,
        )?;
        let bt = self.jumps.apply_transpose(sys, &lambda);
        let mut rhs = ft;
        for (r, b) in rhs.delta.iter_mut().zip(&bt.delta) {
            for (x, y) in r.iter_mut().zip(b) {
                *x -= y;
            }
        }
        let w = self.partial.solve(sys, &rhs);
        let jump = self.jumps.apply(&w);
        let jn = jump.iter().map(|v| v * v).sum::<f64>().sqrt();
        let wn = w.dot(&w).sqrt();
        let mut u = self.jumps.average_copies(&w);
        u.extend_from_slice(&w.pi);
        Ok(FetiDpSolution {
            u,
            lambda,
            report,
            relative_jump: if wn > 0.0 { jn / wn } else { 0.0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schur::mul_rows;
    use crate::conductivity::ConductivityTensors;
    use crate::ionic::MembraneParams;
    use crate::mesh::{build_slab_mesh, MeshConfig};
    use crate::scaling::{subdomain_sigma_max, ScalingKind};
    use crate::topology::{partition_box, PrimalKind};

    fn setup(n: [usize; 3], grid: [usize; 3], primal: PrimalKind) -> (crate::mesh::HexMesh, SchurSystem) {
        let mesh = build_slab_mesh(&MeshConfig::slab(n, [0.4, 0.4, 0.2])).unwrap();
        let d = partition_box(&mesh, grid).unwrap();
        let mut sys = SchurSystem::new(
            &mesh,
            &ConductivityTensors::default(),
            d,
            primal,
            0.05,
            &MembraneParams::default(),
        )
        .unwrap();
        let slope: Vec<f64> = (0..sys.decomp.num_nodes).map(|i| 0.3 + 0.5 * (i as f64).cos()).collect();
        sys.update(&slope).unwrap();
        (mesh, sys)
    }

    fn scaling(kind: ScalingKind, mesh: &crate::mesh::HexMesh, sys: &SchurSystem) -> Scaling {
        let sigma = subdomain_sigma_max(mesh, &ConductivityTensors::default(), sys);
        Scaling::build(kind, sys, &sigma).unwrap()
    }

    fn probe(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Removes the joint-constant component.
    fn project(sys: &SchurSystem, v: &mut [f64]) {
        let k = sys.constant_coords();
        let c = dot(v, &k) / dot(&k, &k);
        for (a, b) in v.iter_mut().zip(&k) {
            *a -= c * b;
        }
    }

    #[test]
    fn floating_subdomain_is_a_setup_error() {
        let (_, sys) = setup([4, 2, 2], [2, 1, 1], PrimalKind::V);
        let err = PartialAssembly::new(&sys).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn partial_solve_inverts_partial_apply() {
        let (_, sys) = setup([4, 4, 2], [2, 2, 1], PrimalKind::Ve);
        let pa = PartialAssembly::new(&sys).unwrap();
        let mut g = TildeVector::restrict(&sys, &probe(sys.n_interface(), 0.4));
        for (d, extra) in g.delta.iter_mut().zip(0..) {
            for (k, v) in d.iter_mut().enumerate() {
                *v += 0.1 * ((k + extra) as f64).cos();
            }
        }
        // make g orthogonal to the partially assembled constant
        let ones = TildeVector::restrict(&sys, &sys.constant_coords());
        let c = g.dot(&ones) / ones.dot(&ones);
        for (d, o) in g.delta.iter_mut().zip(&ones.delta) {
            for (v, w) in d.iter_mut().zip(o) {
                *v -= c * w;
            }
        }
        for (v, w) in g.pi.iter_mut().zip(&ones.pi) {
            *v -= c * w;
        }
        let w = pa.solve(&sys, &g);
        let back = pa.apply(&sys, &w);
        let scale = g.dot(&g).sqrt();
        let diff: f64 = back
            .delta
            .iter()
            .flatten()
            .zip(g.delta.iter().flatten())
            .chain(back.pi.iter().zip(&g.pi))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-8 * scale, "{diff}");
    }

    #[test]
    fn coarse_basis_reproduces_primal_values() {
        // Φ e_p: solve with K_rr and the primal coordinate prescribed
        let (_, sys) = setup([4, 4, 2], [2, 2, 1], PrimalKind::Vef);
        let pa = PartialAssembly::new(&sys).unwrap();
        for j in 0..sys.subs.len() {
            let s = &sys.subs[j];
            let nr = s.n_i() + s.layout.n_delta;
            for q in 0..s.layout.n_pi {
                let mut full = vec![0.0; s.n_total()];
                full[nr + q] = 1.0;
                // rows r of K̃ [X e_q; e_q] vanish by construction
                let xcol: Vec<f64> = {
                    let mut x = vec![0.0; nr];
                    for r in 0..nr {
                        let (cols, vals) = s.k.row(r);
                        x[r] = -cols.iter().zip(vals).filter(|(&c, _)| c == nr + q).map(|(_, &v)| v).sum::<f64>();
                    }
                    pa.chol[j].solve_in_place(&mut x);
                    x
                };
                full[..nr].copy_from_slice(&xcol);
                let kr = mul_rows(&s.k, 0..nr, &full);
                assert!(kr.iter().all(|v| v.abs() < 1e-10));
                // Δ rows agree with the stored X
                for p in 0..s.layout.n_delta {
                    assert!((pa.x_delta[j][(p, q)] - xcol[s.n_i() + p]).abs() < 1e-10);
                }
                // primal coordinate value is exactly the Kronecker delta
                assert_eq!(full[nr + q], 1.0);
            }
        }
    }

    #[test]
    fn bddc_is_symmetric_and_bounded_below() {
        for kind in [ScalingKind::Rho, ScalingKind::Deluxe] {
            let (mesh, sys) = setup([4, 4, 2], [2, 2, 1], PrimalKind::Ve);
            let b = Bddc::new(&sys, scaling(kind, &mesh, &sys)).unwrap();
            let mut x = probe(sys.n_interface(), 0.3);
            let mut y = probe(sys.n_interface(), 0.8);
            project(&sys, &mut x);
            project(&sys, &mut y);
            let mx = b.apply(&sys, &x);
            let my = b.apply(&sys, &y);
            assert!((dot(&mx, &y) - dot(&x, &my)).abs() < 1e-10 * dot(&mx, &x).abs());

            // explicit preconditioned operator on the complement of the kernel
            let n = sys.n_interface();
            let k = {
                let mut k = sys.constant_coords();
                let nk = dot(&k, &k).sqrt();
                k.iter_mut().for_each(|v| *v /= nk);
                k
            };
            let proj = |v: &mut Vec<f64>| {
                let c = dot(v, &k);
                for (a, b) in v.iter_mut().zip(&k) {
                    *a -= c * b;
                }
            };
            let mut s_dense = Mat::<f64>::zeros(n, n);
            let mut m_dense = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                proj(&mut e);
                let se = sys.apply(&e);
                let mut me = b.apply(&sys, &e);
                proj(&mut me);
                for r in 0..n {
                    s_dense[(r, i)] = se[r];
                    m_dense[(r, i)] = me[r];
                }
            }
            // generalized problem S x = μ M⁻¹ x  <=>  eigenvalues of M S
            let ms = &m_dense * &s_dense;
            let eig = ms.eigenvalues().unwrap();
            let mut re: Vec<f64> = eig.iter().map(|z| z.re).filter(|v| v.abs() > 1e-8).collect();
            re.sort_by(f64::total_cmp);
            assert!(re[0] >= 1.0 - 1e-8, "{kind:?}: {}", re[0]);
        }
    }

    #[test]
    fn jump_operator_basics() {
        let (mesh, sys) = setup([4, 4, 4], [2, 2, 2], PrimalKind::Ve);
        let f = FetiDp::new(&sys, scaling(ScalingKind::Rho, &mesh, &sys)).unwrap();
        // row count: Σ over dual coordinates of (copies − 1)
        assert_eq!(f.jumps.rows, sys.layout.num_jump_rows(&sys.decomp));
        let cont = TildeVector::restrict(&sys, &probe(sys.n_interface(), 0.5));
        assert!(f.jumps.apply(&cont).iter().all(|&v| v == 0.0));
        // (B Bᵀ)⁻¹ really inverts B Bᵀ
        let mu = probe(f.jumps.rows, 0.9);
        let y = f.jumps.solve_bbt(&mu);
        let back = f.jumps.apply(&f.jumps.apply_transpose(&sys, &y));
        for (a, b) in back.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-12);
        }
        // F symmetric
        let a = probe(f.jumps.rows, 0.2);
        let b = probe(f.jumps.rows, 0.7);
        let fa = f.apply_f(&sys, &a);
        let fb = f.apply_f(&sys, &b);
        assert!((dot(&fa, &b) - dot(&fb, &a)).abs() < 1e-8 * dot(&fa, &a).abs());
        // zero right-hand side
        let sol = f.solve(&sys, &vec![0.0; sys.n_interface()], &KrylovConfig::default()).unwrap();
        assert!(sol.lambda.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fetidp_matches_bddc_solution() {
        for kind in [ScalingKind::Rho, ScalingKind::Deluxe] {
            let (mesh, sys) = setup([4, 4, 4], [2, 2, 2], PrimalKind::Ve);
            let mut rhs = probe(sys.n_interface(), 0.61);
            project(&sys, &mut rhs);
            let cfg = KrylovConfig {
                rtol: 1e-12,
                atol: 1e-16,
                ..KrylovConfig::default()
            };
            let bddc = Bddc::new(&sys, scaling(kind, &mesh, &sys)).unwrap();
            let (mut x1, r1) = krylov::pcg(|v| sys.apply(v), |v| bddc.apply(&sys, v), &rhs, &cfg).unwrap();
            let feti = FetiDp::new(&sys, scaling(kind, &mesh, &sys)).unwrap();
            let sol = feti.solve(&sys, &rhs, &cfg).unwrap();
            let mut x2 = sol.u.clone();
            project(&sys, &mut x1);
            project(&sys, &mut x2);
            let nx = dot(&x1, &x1).sqrt();
            let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff < 1e-8 * nx, "{kind:?} {diff}");
            assert!(sol.relative_jump < 1e-8);
            let c1 = r1.condition().unwrap();
            let c2 = sol.report.condition().unwrap();
            assert!((c1 - c2).abs() <= 0.1 * c1, "{c1} vs {c2}");
        }
    }
}
