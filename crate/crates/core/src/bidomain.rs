//! Decoupled Backward Euler stepping: gating update (step 1), then a
//! Newton solve of `F(u) = G` for `u = (u_i, u_e)` (step 2).
//!
//! Unknowns are interleaved per node, `u[2l] = u_i`, `u[2l+1] = u_e`.

use serde::{Deserialize, Serialize};

use crate::conductivity::{ConductivityTensors, Medium};
use crate::error::{config, Error, Result};
use crate::fem::{assemble_lumped_mass, assemble_stiffness};
use crate::ionic::{gate_update_step1, IonicModel, MembraneParams};
use crate::linsolve::JacobianSolver;
use crate::mesh::{GeometryKind, HexMesh};
use crate::sparse::{dot, norm2, CsrMatrix};
use crate::system::TwoFieldMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StimulusRegion {
    /// Ball of the given radius (cm) around the mesh origin corner.
    CornerSphere { radius: f64 },
    /// Inner (r = 0) surface of the ellipsoid.
    Endocardium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stimulus {
    /// mA/cm³
    pub amplitude: f64,
    /// ms
    pub duration: f64,
    pub region: StimulusRegion,
}

impl Default for Stimulus {
    fn default() -> Self {
        Self {
            amplitude: 100.0,
            duration: 1.0,
            region: StimulusRegion::CornerSphere { radius: 0.1 },
        }
    }
}

impl Stimulus {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    /// Nodes receiving the current.
    pub fn nodes(&self, mesh: &HexMesh) -> Result<Vec<usize>> {
        match self.region {
            StimulusRegion::CornerSphere { radius } => {
                let o = mesh.coords[0];
                Ok((0..mesh.num_nodes())
                    .filter(|&n| {
                        let p = mesh.coords[n];
                        let d2: f64 = (0..3).map(|k| (p[k] - o[k]).powi(2)).sum();
                        d2 <= radius * radius * (1.0 + 1e-12)
                    })
                    .collect())
            }
            StimulusRegion::Endocardium => {
                if mesh.geometry != GeometryKind::Ellipsoid {
                    return config("endocardial stimulus needs the ellipsoid geometry");
                }
                Ok((0..mesh.num_nodes()).filter(|&n| mesh.node_ijk(n)[2] == 0).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub rtol: f64,
    pub atol: f64,
    pub stol: f64,
    pub max_it: usize,
    /// Sufficient-decrease constant of the line search.
    pub alpha: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-4,
            atol: 1e-8,
            stol: 1e-8,
            max_it: 50,
            alpha: 1e-4,
            max_backtracks: 40,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.stol > 0.0) {
            return config("newton tolerances must be positive");
        }
        if self.max_it == 0 {
            return config("newton iteration limit must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// ms
    pub tau: f64,
    pub membrane: MembraneParams,
    pub stimulus: Stimulus,
    /// ms
    pub t_end: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            tau: 0.05,
            membrane: MembraneParams::default(),
            stimulus: Stimulus::default(),
            t_end: 2.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return config("time step must be positive");
        }
        if !(self.stimulus.amplitude >= 0.0 && self.stimulus.duration >= 0.0) {
            return config("stimulus amplitude and duration must be non-negative");
        }
        if let StimulusRegion::CornerSphere { radius } = self.stimulus.region {
            if !(radius > 0.0) {
                return config("stimulus radius must be positive");
            }
        }
        if !(self.t_end >= 0.0) {
            return config("end time must be non-negative");
        }
        self.membrane.validate()
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end / self.tau - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidomainState {
    /// Interleaved `(u_i, u_e)` per node, mV.
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// ms
    pub t: f64,
}

impl BidomainState {
    pub fn resting(num_nodes: usize) -> Self {
        Self {
            u: vec![0.0; 2 * num_nodes],
            w: vec![0.0; num_nodes],
            t: 0.0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.w.len()
    }

    pub fn v(&self) -> Vec<f64> {
        transmembrane(&self.u)
    }

    /// Shifts both potentials so that `u_e` has zero mean.
    pub fn regauge(&mut self) {
        gauge(&mut self.u);
    }
}

pub fn transmembrane(u: &[f64]) -> Vec<f64> {
    u.chunks_exact(2).map(|p| p[0] - p[1]).collect()
}

fn gauge(u: &mut [f64]) {
    let n = u.len() / 2;
    let mean = u.iter().skip(1).step_by(2).sum::<f64>() / n as f64;
    u.iter_mut().for_each(|x| *x -= mean);
}

/// Per-step Newton statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub linear_iterations: Vec<usize>,
    pub conditions: Vec<f64>,
    pub initial_residual: f64,
    pub residual: f64,
    pub backtracks: usize,
}

impl NewtonReport {
    pub fn total_linear(&self) -> usize {
        self.linear_iterations.iter().sum()
    }
}

/// Assembled operators of the fully implicit step.
#[derive(Debug)]
pub struct BidomainProblem<M: IonicModel> {
    pub model: M,
    pub params: SystemParams,
    pub mass: Vec<f64>,
    /// `τ diag(A_i, A_e) + χC_m 𝓜`.
    pub linear: CsrMatrix,
    two: TwoFieldMatrix,
    /// Nodal stimulus load `m_l (I_l − Ī)`, zero-sum by construction.
    pub stimulus_load: Vec<f64>,
}

impl<M: IonicModel> BidomainProblem<M> {
    pub fn new(mesh: &HexMesh, cond: &ConductivityTensors, model: M, params: SystemParams) -> Result<Self> {
        params.validate()?;
        cond.validate()?;
        let a_i = assemble_stiffness(mesh, cond, Medium::Intra, None);
        let a_e = assemble_stiffness(mesh, cond, Medium::Extra, None);
        let two = TwoFieldMatrix::new(&a_i, &a_e, params.tau)?;
        let mass = assemble_lumped_mass(mesh, None);
        let chi_cm = params.membrane.chi * params.membrane.c_m;
        let linear = two.assemble(&mass.iter().map(|m| m * chi_cm).collect::<Vec<_>>());
        let mut current = vec![0.0; mesh.num_nodes()];
        for n in params.stimulus.nodes(mesh)? {
            current[n] = params.stimulus.amplitude;
        }
        let vol: f64 = mass.iter().sum();
        let mean = mass.iter().zip(&current).map(|(m, i)| m * i).sum::<f64>() / vol;
        let stimulus_load = mass.iter().zip(&current).map(|(m, i)| m * (i - mean)).collect();
        Ok(Self {
            model,
            params,
            mass,
            linear,
            two,
            stimulus_load,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn stimulus_active(&self, t: f64) -> bool {
        self.params.stimulus.amplitude > 0.0 && t < self.params.stimulus.duration - 1e-12
    }

    /// `F(u) − G` for gating `w` and previous potentials `u_prev`.
    pub fn residual(&self, u: &[f64], w: &[f64], u_prev: &[f64], stimulate: bool) -> Result<Vec<f64>> {
        let n = self.num_nodes();
        for (len, what) in [(u.len(), 2 * n), (u_prev.len(), 2 * n), (w.len(), n)] {
            if len != what {
                return Err(Error::Dimension {
                    expected: what,
                    actual: len,
                });
            }
        }
        let tau = self.params.tau;
        let chi_cm = self.params.membrane.chi * self.params.membrane.c_m;
        let mut f = self.linear.mul_vec(u);
        for l in 0..n {
            let v = u[2 * l] - u[2 * l + 1];
            let vp = u_prev[2 * l] - u_prev[2 * l + 1];
            let r = self.mass[l] * (tau * self.model.i_ion(v, w[l]) - chi_cm * vp);
            f[2 * l] += r;
            f[2 * l + 1] -= r;
            if stimulate {
                f[2 * l + 1] += tau * self.stimulus_load[l];
            }
        }
        Ok(f)
    }

    /// Nodal `∂I_ion/∂v` at the current iterate.
    pub fn slope(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        u.chunks_exact(2)
            .zip(w)
            .map(|(p, &w)| self.model.di_ion_dv(p[0] - p[1], w))
            .collect()
    }

    fn weights(&self, slope: &[f64]) -> Vec<f64> {
        let tau = self.params.tau;
        let chi_cm = self.params.membrane.chi * self.params.membrane.c_m;
        self.mass.iter().zip(slope).map(|(m, s)| m * (chi_cm + tau * s)).collect()
    }

    pub fn jacobian(&self, u: &[f64], w: &[f64]) -> CsrMatrix {
        self.two.assemble(&self.weights(&self.slope(u, w)))
    }

    /// Matrix-free `J(u) x`.
    pub fn jacobian_apply(&self, u: &[f64], w: &[f64], x: &[f64]) -> Vec<f64> {
        let tau = self.params.tau;
        let mut y = self.linear.mul_vec(x);
        for (l, p) in u.chunks_exact(2).enumerate() {
            let g = self.mass[l] * tau * self.model.di_ion_dv(p[0] - p[1], w[l]);
            let d = g * (x[2 * l] - x[2 * l + 1]);
            y[2 * l] += d;
            y[2 * l + 1] -= d;
        }
        y
    }

    /// Newton with cubic backtracking from the guess `u`.
    pub fn newton(
        &self,
        u: &mut [f64],
        w: &[f64],
        u_prev: &[f64],
        stimulate: bool,
        solver: &mut dyn JacobianSolver,
        cfg: &NewtonConfig,
    ) -> Result<NewtonReport> {
        let mut f = self.residual(u, w, u_prev, stimulate)?;
        let f0 = norm2(&f);
        let mut report = NewtonReport {
            initial_residual: f0,
            residual: f0,
            ..NewtonReport::default()
        };
        let target = cfg.atol.max(cfg.rtol * f0);
        if f0 < cfg.atol {
            return Ok(report);
        }
        let mut fnorm = f0;
        for _ in 0..cfg.max_it {
            solver.update(&self.slope(u, w))?;
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let lin = solver.solve(&rhs)?;
            report.iterations += 1;
            report.linear_iterations.push(lin.report.iterations);
            if let Some(c) = lin.report.condition() {
                report.conditions.push(c);
            }
            let s = lin.x;
            let js = self.jacobian_apply(u, w, &s);
            let (lambda, f_new, backtracks) = self.line_search(u, w, u_prev, stimulate, &f, &s, &js, cfg)?;
            report.backtracks += backtracks;
            for (x, d) in u.iter_mut().zip(&s) {
                *x += lambda * d;
            }
            f = f_new;
            fnorm = norm2(&f);
            report.residual = fnorm;
            if !fnorm.is_finite() {
                return Err(Error::Newton(format!("residual became non-finite at iteration {}", report.iterations)));
            }
            if fnorm < target {
                return Ok(report);
            }
            if lambda * norm2(&s) < cfg.stol * norm2(u) {
                return Ok(report);
            }
        }
        Err(Error::Newton(format!(
            "no convergence in {} iterations (residual {fnorm:.3e}, target {target:.3e})",
            cfg.max_it
        )))
    }

    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &self,
        u: &[f64],
        w: &[f64],
        u_prev: &[f64],
        stimulate: bool,
        f: &[f64],
        s: &[f64],
        js: &[f64],
        cfg: &NewtonConfig,
    ) -> Result<(f64, Vec<f64>, usize)> {
        let phi0 = 0.5 * dot(f, f);
        // φ(λ) = ½‖F(u + λ s)‖², φ'(0) = Fᵀ J s
        let slope = dot(f, js);
        if slope >= 0.0 {
            return Err(Error::Newton("search direction is not a descent direction".into()));
        }
        let trial = |lambda: f64| -> Result<Vec<f64>> {
            let x: Vec<f64> = u.iter().zip(s).map(|(a, b)| a + lambda * b).collect();
            self.residual(&x, w, u_prev, stimulate)
        };
        let mut lambda = 1.0;
        let mut f_new = trial(lambda)?;
        let mut phi = 0.5 * dot(&f_new, &f_new);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=cfg.max_backtracks {
            if phi.is_finite() && phi <= phi0 + cfg.alpha * lambda * slope {
                return Ok((lambda, f_new, k));
            }
            if k == cfg.max_backtracks {
                break;
            }
            let next = match prev {
                None => -slope / (2.0 * (phi - phi0 - slope)),
                Some((l2, phi2)) => {
                    let r1 = phi - phi0 - lambda * slope;
                    let r2 = phi2 - phi0 - l2 * slope;
                    let a = (r1 / (lambda * lambda) - r2 / (l2 * l2)) / (lambda - l2);
                    let b = (-l2 * r1 / (lambda * lambda) + lambda * r2 / (l2 * l2)) / (lambda - l2);
                    if a == 0.0 {
                        -slope / (2.0 * b)
                    } else {
                        let disc = b * b - 3.0 * a * slope;
                        if disc < 0.0 {
                            0.5 * lambda
                        } else if b <= 0.0 {
                            (-b + disc.sqrt()) / (3.0 * a)
                        } else {
                            -slope / (b + disc.sqrt())
                        }
                    }
                }
            };
            let next = if next.is_finite() { next } else { 0.5 * lambda };
            prev = Some((lambda, phi));
            lambda = next.clamp(0.1 * lambda, 0.5 * lambda);
            f_new = trial(lambda)?;
            phi = 0.5 * dot(&f_new, &f_new);
        }
        Err(Error::Newton(format!(
            "line search failed after {} backtracks",
            cfg.max_backtracks
        )))
    }

    /// One decoupled step: gating from `v^n`, then Newton from `u^n`.
    pub fn advance(
        &self,
        state: &mut BidomainState,
        solver: &mut dyn JacobianSolver,
        cfg: &NewtonConfig,
    ) -> Result<NewtonReport> {
        let tau = self.params.tau;
        let w = gate_update_step1(&self.model, &state.v(), &state.w, tau);
        let stimulate = self.stimulus_active(state.t);
        let u_prev = state.u.clone();
        let mut u = state.u.clone();
        let report = self.newton(&mut u, &w, &u_prev, stimulate, solver, cfg)?;
        state.u = u;
        state.w = w;
        state.t += tau;
        state.regauge();
        Ok(report)
    }
}
