//! Preconditioned conjugate gradients with a Lanczos condition estimate,
//! and restarted GMRES. Both stop on the preconditioned residual norm.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::sparse::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KrylovMethod {
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovConfig {
    pub method: KrylovMethod,
    pub rtol: f64,
    pub atol: f64,
    pub dtol: f64,
    pub max_it: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            method: KrylovMethod::Cg,
            rtol: 1e-8,
            atol: 1e-10,
            dtol: 1e4,
            max_it: 2000,
            restart: 50,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return config("krylov tolerances must be positive");
        }
        if !(self.dtol > 1.0) {
            return config("krylov divergence tolerance must exceed 1");
        }
        if self.max_it == 0 || self.restart == 0 {
            return config("krylov iteration limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub residual: f64,
    pub converged: bool,
    /// Extreme Ritz values of the preconditioned operator (CG only).
    pub eig_min: Option<f64>,
    pub eig_max: Option<f64>,
    pub history: Vec<f64>,
}

impl SolveReport {
    /// `λ_max/λ_min` of the Lanczos tridiagonal; 1 when no iteration ran.
    pub fn condition(&self) -> Option<f64> {
        match (self.eig_min, self.eig_max) {
            (Some(lo), Some(hi)) if lo > 0.0 => Some((hi / lo).max(1.0)),
            _ if self.iterations == 0 => Some(1.0),
            _ => None,
        }
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples rows `i` and `i+1`), by implicit QL.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).take(n).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Lanczos tridiagonal from the CG coefficients.
fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> Option<(f64, f64)> {
    let k = alphas.len();
    if k == 0 {
        return None;
    }
    let mut d = Vec::with_capacity(k);
    let mut e = Vec::with_capacity(k.saturating_sub(1));
    d.push(1.0 / alphas[0]);
    for j in 1..k {
        // betas[j-1] is the β computed after iteration j-1
        let b = betas[j - 1];
        d.push(1.0 / alphas[j] + b / alphas[j - 1]);
        e.push(b.sqrt() / alphas[j - 1]);
    }
    let eig = tridiagonal_eigenvalues(&d, &e);
    Some((eig[0], eig[k - 1]))
}

/// Solves `A x = b` from a zero initial guess. The stopping test is
/// `‖z‖ < max(atol, rtol ‖z₀‖)` with `z = M r`.
pub fn pcg<A, M>(apply_a: A, apply_m: M, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveReport)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_m(&r);
    let z0 = norm2(&z);
    let mut report = SolveReport {
        initial_residual: z0,
        residual: z0,
        history: vec![z0],
        ..SolveReport::default()
    };
    let target = cfg.atol.max(cfg.rtol * z0);
    if z0 < target || z0 == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for it in 0..cfg.max_it {
        let ap = apply_a(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !rz.is_finite() {
            return Err(Error::Breakdown {
                iteration: it,
                reason: format!("operator or preconditioner is not positive definite (pAp = {pap:.3e})"),
            });
        }
        let alpha = rz / pap;
        alphas.push(alpha);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        z = apply_m(&r);
        let zn = norm2(&z);
        report.history.push(zn);
        report.iterations = it + 1;
        report.residual = zn;
        if zn < target {
            report.converged = true;
            break;
        }
        if zn > cfg.dtol * z0 || !zn.is_finite() {
            return Err(Error::Diverged {
                iteration: it + 1,
                residual: zn,
            });
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if let Some((lo, hi)) = lanczos_extremes(&alphas, &betas) {
        report.eig_min = Some(lo);
        report.eig_max = Some(hi);
    }
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.residual,
            history: report.history,
        });
    }
    Ok((x, report))
}

/// Restarted GMRES, left preconditioned, zero initial guess.
pub fn gmres<A, M>(apply_a: A, apply_m: M, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveReport)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let z = apply_m(b);
    let z0 = norm2(&z);
    let mut report = SolveReport {
        initial_residual: z0,
        residual: z0,
        history: vec![z0],
        ..SolveReport::default()
    };
    let target = cfg.atol.max(cfg.rtol * z0);
    if z0 < target || z0 == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }
    let m = cfg.restart;
    let mut total = 0;
    let mut r = z;
    while total < cfg.max_it {
        let beta = norm2(&r);
        let cycle_start = beta;
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        let mut res = beta;
        while k < m && total < cfg.max_it {
            let mut w = apply_m(&apply_a(&v[k]));
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                axpy(-h[i][k], &v[i], &mut w);
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(Error::Breakdown {
                    iteration: total,
                    reason: "zero Arnoldi column".into(),
                });
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            res = g[k + 1].abs();
            total += 1;
            report.history.push(res);
            let hn = norm2(&w);
            k += 1;
            if res < target || hn == 0.0 {
                break;
            }
            if res > cfg.dtol * z0 {
                return Err(Error::Diverged {
                    iteration: total,
                    residual: res,
                });
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &v[i], &mut x);
        }
        let ax = apply_a(&x);
        let raw: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        r = apply_m(&raw);
        let rn = norm2(&r);
        report.iterations = total;
        report.residual = rn;
        if rn < target || res < target {
            report.converged = true;
            return Ok((x, report));
        }
        if rn >= cycle_start * (1.0 - 1e-12) {
            return Err(Error::Breakdown {
                iteration: total,
                reason: "GMRES stagnated over a full restart cycle".into(),
            });
        }
    }
    Err(Error::NotConverged {
        iterations: report.iterations,
        residual: report.residual,
        history: report.history,
    })
}

/// Dispatches on `cfg.method`.
pub fn solve<A, M>(apply_a: A, apply_m: M, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, SolveReport)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    match cfg.method {
        KrylovMethod::Cg => pcg(apply_a, apply_m, b, cfg),
        KrylovMethod::Gmres => gmres(apply_a, apply_m, b, cfg),
    }
}
