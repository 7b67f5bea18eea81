//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero when a criterion cannot be evaluated at all.
//! A measured FAIL is reported but only fails the process when
//! `ACCEPTANCE_STRICT` is set. `ACCEPTANCE_ONLY=3,5` restricts the run.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::time::Instant;

use bidomain_dd::bidomain::{BidomainProblem, SystemParams};
use bidomain_dd::dualprimal::{Bddc, PreconditionerKind};
use bidomain_dd::experiment::{self, ExperimentConfig, Scenario, SummaryRow};
use bidomain_dd::ionic::{MembraneParams, RmcParams};
use bidomain_dd::krylov::KrylovConfig;
use bidomain_dd::linsolve::{build_solver, LinearSolverConfig};
use bidomain_dd::scaling::{subdomain_sigma_max, Scaling, ScalingKind, TildeVector};
use bidomain_dd::schur::{LocalSchur, SchurSystem};
use bidomain_dd::topology::{partition_box_marked, PrimalKind};
use bidomain_dd::{ConductivityTensors, HexMesh, MeshConfig, Result};
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Verdict {
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn project_out(v: &mut [f64], k: &[f64]) {
    let c = dot(v, k) / dot(k, k);
    v.iter_mut().zip(k).for_each(|(a, b)| *a -= c * b);
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

// ---------------------------------------------------------------- sweeps

const H_RATIOS: [usize; 3] = [4, 8, 12];
const VEF_COND: [f64; 3] = [1.7, 2.5, 3.2];
const VEF_LIT: [f64; 3] = [9.0, 12.0, 15.0];
const V_COND: [f64; 3] = [8.4, 24.1, 42.9];

type Key = (usize, PreconditionerKind, ScalingKind, PrimalKind);

/// 4×4×4 subdomains on a fixed 0.16 cm cube, one stimulated time step.
fn optimality_config(preconds: Vec<PreconditionerKind>, scalings: Vec<ScalingKind>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        scenario: Scenario::Optimality,
        ..ExperimentConfig::default()
    };
    cfg.mesh.extent = [0.16; 3];
    cfg.solver.subdomains = [4, 4, 4];
    cfg.system.t_end = cfg.system.tau;
    cfg.optimality.h_ratios = H_RATIOS.to_vec();
    cfg.optimality.primals = vec![PrimalKind::V, PrimalKind::Vef];
    cfg.optimality.preconds = preconds;
    cfg.optimality.scalings = scalings;
    cfg
}

fn sweep() -> Result<BTreeMap<String, SummaryRow>> {
    let mut rows = BTreeMap::new();
    for cfg in [
        optimality_config(vec![PreconditionerKind::Bddc], vec![ScalingKind::Rho, ScalingKind::Deluxe]),
        optimality_config(vec![PreconditionerKind::Fetidp], vec![ScalingKind::Rho]),
    ] {
        for r in experiment::run_experiment(&cfg)?.rows() {
            rows.insert(row_key(&r), r);
        }
    }
    Ok(rows)
}

fn row_key(r: &SummaryRow) -> String {
    format!("{}/{}/{}/{}", r.h_ratio, r.precond, r.scaling, r.primal)
}

fn key_str(k: Key) -> String {
    let (h, p, s, q) = k;
    format!(
        "{h}/{}/{}/{}",
        format!("{p:?}").to_lowercase(),
        format!("{s:?}").to_lowercase(),
        q.label()
    )
}

fn lookup(rows: &BTreeMap<String, SummaryRow>, k: Key) -> &SummaryRow {
    &rows[&key_str(k)]
}

fn criterion_1(rows: &BTreeMap<String, SummaryRow>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &h) in H_RATIOS.iter().enumerate() {
        let vef = lookup(rows, (h, PreconditionerKind::Bddc, ScalingKind::Rho, PrimalKind::Vef));
        let v = lookup(rows, (h, PreconditionerKind::Bddc, ScalingKind::Rho, PrimalKind::V));
        let ok_c = within(vef.cond_avg, VEF_COND[i], 0.25);
        let ok_l = (vef.lit_avg - VEF_LIT[i]).abs() <= 3.0;
        let ok_v = within(v.cond_avg, V_COND[i], 0.25);
        pass &= ok_c && ok_l && ok_v;
        parts.push(format!(
            "H/h={h}: V+E+F cond {:.2} (want {}) lit {:.2} (want {}), V cond {:.2} (want {})",
            vef.cond_avg, VEF_COND[i], vef.lit_avg, VEF_LIT[i], v.cond_avg, V_COND[i]
        ));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn paired(
    rows: &BTreeMap<String, SummaryRow>,
    a: (PreconditionerKind, ScalingKind),
    b: (PreconditionerKind, ScalingKind),
) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for &h in &H_RATIOS {
        for primal in [PrimalKind::V, PrimalKind::Vef] {
            let x = lookup(rows, (h, a.0, a.1, primal)).cond_avg;
            let y = lookup(rows, (h, b.0, b.1, primal)).cond_avg;
            let rel = (x - y).abs() / x;
            worst = worst.max(rel);
            parts.push(format!("H/h={h} {}: {x:.3} vs {y:.3}", primal.label()));
        }
    }
    Verdict {
        pass: worst <= 0.10,
        detail: format!("max relative gap {:.1}% (limit 10%); {}", 100.0 * worst, parts.join(", ")),
    }
}

fn criterion_3() -> Result<Verdict> {
    let mut cfg = ExperimentConfig {
        scenario: Scenario::Optimality,
        ..ExperimentConfig::default()
    };
    cfg.mesh.extent = [0.16; 3];
    cfg.solver.subdomains = [2, 2, 2];
    cfg.system.t_end = cfg.system.tau;
    cfg.optimality.h_ratios = vec![2, 4, 8];
    cfg.optimality.primals = vec![PrimalKind::Ve];
    cfg.optimality.scalings = vec![ScalingKind::Deluxe];
    cfg.optimality.preconds = vec![PreconditionerKind::Bddc];
    let rows = experiment::run_experiment(&cfg)?.rows();
    let ratios: Vec<f64> = rows
        .iter()
        .map(|r| r.cond_avg / (1.0 + (r.h_ratio as f64).ln()).powi(3))
        .collect();
    let pass = ratios.windows(2).all(|w| w[1] <= 1.25 * w[0]);
    let detail = rows
        .iter()
        .zip(&ratios)
        .map(|(r, q)| format!("H/h={}: cond {:.3}, cond/(1+log)^3 {:.4}", r.h_ratio, r.cond_avg, q))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Verdict { pass, detail })
}

// ---------------------------------------------------------- dense oracle

fn oracle_mesh() -> HexMesh {
    HexMesh::build(&MeshConfig::slab([4, 4, 4], [0.4, 0.4, 0.4])).unwrap()
}

/// Nodal states spanning the excitable range.
fn oracle_state(n: usize) -> (Vec<f64>, Vec<f64>) {
    let u = (0..n)
        .flat_map(|l| {
            let t = l as f64;
            let v = 17.5 + 102.5 * (0.37 * t).sin();
            let ue = 5.0 * (0.11 * t).cos();
            [v + ue, ue]
        })
        .collect();
    let w = (0..n).map(|l| 0.5 + 0.5 * (0.23 * l as f64).sin()).collect();
    (u, w)
}

fn criterion_5a() -> Result<(bool, String)> {
    let mesh = oracle_mesh();
    let cond = ConductivityTensors::default();
    let problem = BidomainProblem::new(&mesh, &cond, RmcParams::default(), SystemParams::default())?;
    let (u, w) = oracle_state(mesh.num_nodes());
    let slope = problem.slope(&u, &w);
    let jac = problem.jacobian(&u, &w).to_dense();
    let n = jac.nrows();
    let ones = vec![1.0; n];
    let scale = (0..n).map(|i| jac[(i, i)]).fold(0.0, f64::max);
    let pinned = Mat::from_fn(n, n, |i, j| jac[(i, j)] + scale / n as f64);
    let mut b: Vec<f64> = (0..n).map(|i| (0.71 * i as f64).sin()).collect();
    project_out(&mut b, &ones);
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let dense = pinned.llt(Side::Lower).map_err(|e| bidomain_dd::Error::Factorization(format!("{e:?}")))?;
    let x0 = dense.solve(&rhs);
    let x_ref: Vec<f64> = (0..n).map(|i| x0[(i, 0)]).collect();

    let krylov = KrylovConfig {
        rtol: 1e-13,
        atol: 1e-30,
        ..KrylovConfig::default()
    };
    let mut worst: f64 = 0.0;
    for (precond, scaling) in [
        (PreconditionerKind::Bddc, ScalingKind::Rho),
        (PreconditionerKind::Bddc, ScalingKind::Deluxe),
        (PreconditionerKind::Fetidp, ScalingKind::Rho),
        (PreconditionerKind::Fetidp, ScalingKind::Deluxe),
    ] {
        for primal in [PrimalKind::V, PrimalKind::Ve, PrimalKind::Vef] {
            let cfg = LinearSolverConfig {
                precond,
                scaling,
                primal,
                subdomains: [2, 1, 1],
                mark_boundary: true,
                krylov,
            };
            let mut s = build_solver(&mesh, &cond, &MembraneParams::default(), problem.params.tau, &cfg)?;
            s.update(&slope)?;
            let mut x = s.solve(&b)?.x;
            project_out(&mut x, &ones);
            worst = worst.max(diff_norm(&x, &x_ref) / norm(&x_ref));
        }
    }
    Ok((worst <= 1e-8, format!("(a) max relative error {worst:.2e}")))
}

fn local_schur_dense(s: &LocalSchur) -> Mat<f64> {
    let k = s.k.to_dense();
    let ni = s.n_i();
    let ng = s.n_gamma();
    let kii = Mat::from_fn(ni, ni, |i, j| k[(i, j)]);
    let kig = Mat::from_fn(ni, ng, |i, j| k[(i, ni + j)]);
    let x = kii.llt(Side::Lower).unwrap().solve(&kig);
    Mat::from_fn(ng, ng, |i, j| {
        k[(ni + i, ni + j)] - (0..ni).map(|p| kig[(p, i)] * x[(p, j)]).sum::<f64>()
    })
}

fn tilde_flat(w: &TildeVector) -> Vec<f64> {
    w.delta.iter().flatten().chain(&w.pi).copied().collect()
}

fn sorted_real_eigs(m: &Mat<f64>) -> Vec<f64> {
    let mut re: Vec<f64> = m.eigenvalues().unwrap().iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    re
}

/// Explicit `M Ŝ` from dense local Schur complements and a dense
/// pseudo-inverse of the partially assembled operator, against the
/// matrix-free one; returns (max eigenvalue gap, min off-kernel eigenvalue).
fn bddc_spectra(sys: &SchurSystem, scaling: Scaling) -> Result<(f64, f64)> {
    let n = sys.n_interface();
    let mut k = sys.constant_coords();
    let nk = norm(&k);
    k.iter_mut().for_each(|v| *v /= nk);
    let proj = |v: &mut Vec<f64>| {
        let c = dot(v, &k);
        v.iter_mut().zip(&k).for_each(|(a, b)| *a -= c * b);
    };

    // tilde layout: dual blocks per subdomain, then the shared primal block
    let offsets: Vec<usize> = sys
        .subs
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.layout.n_delta;
            Some(o)
        })
        .collect();
    let n_delta: usize = sys.subs.iter().map(|s| s.layout.n_delta).sum();
    let nt = n_delta + sys.layout.n_primal;
    let mut s_tilde = Mat::<f64>::zeros(nt, nt);
    let mut s_hat = Mat::<f64>::zeros(n, n);
    for (j, s) in sys.subs.iter().enumerate() {
        let sj = local_schur_dense(s);
        let l = &s.layout;
        let tmap: Vec<usize> = (0..l.n_delta)
            .map(|p| offsets[j] + p)
            .chain(l.pi_global.iter().map(|&g| n_delta + g))
            .collect();
        let cmap: Vec<usize> = l
            .delta_global
            .iter()
            .copied()
            .chain(l.pi_global.iter().map(|&g| sys.layout.n_dual + g))
            .collect();
        for a in 0..l.n_gamma() {
            for b in 0..l.n_gamma() {
                s_tilde[(tmap[a], tmap[b])] += sj[(a, b)];
                s_hat[(cmap[a], cmap[b])] += sj[(a, b)];
            }
        }
    }
    // the tilde constant spans the kernel of S̃
    let mut q = tilde_flat(&TildeVector::restrict(sys, &k));
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let alpha = (0..nt).map(|i| s_tilde[(i, i)]).fold(0.0, f64::max);
    let shifted = Mat::from_fn(nt, nt, |i, j| s_tilde[(i, j)] + alpha * q[i] * q[j]);
    let chol = shifted
        .llt(Side::Lower)
        .map_err(|e| bidomain_dd::Error::Factorization(format!("{e:?}")))?;
    let rd = Mat::from_fn(nt, n, |_, _| 0.0);
    let mut rd = rd;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for (r, v) in tilde_flat(&scaling.scaled_restrict(sys, &e)).into_iter().enumerate() {
            rd[(r, i)] = v;
        }
    }
    let m_explicit = rd.transpose() * chol.solve(&rd);
    let p = Mat::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - k[i] * k[j]);
    let explicit = &p * &m_explicit * &p * &s_hat;

    let bddc = Bddc::new(sys, scaling)?;
    let mut free = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        proj(&mut e);
        let mut me = bddc.apply(sys, &sys.apply(&e));
        proj(&mut me);
        for r in 0..n {
            free[(r, i)] = me[r];
        }
    }
    let a = sorted_real_eigs(&explicit);
    let b = sorted_real_eigs(&free);
    let top = a.last().copied().unwrap_or(1.0).abs();
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / top;
    let min_off_kernel = b.iter().copied().filter(|v| v.abs() > 1e-6).fold(f64::INFINITY, f64::min);
    Ok((gap, min_off_kernel))
}

fn oracle_system(primal: PrimalKind) -> Result<(HexMesh, SchurSystem)> {
    let mesh = oracle_mesh();
    let cond = ConductivityTensors::default();
    let decomp = partition_box_marked(&mesh, [2, 1, 1], true)?;
    let mut sys = SchurSystem::new(&mesh, &cond, decomp, primal, 0.05, &MembraneParams::default())?;
    let problem = BidomainProblem::new(&mesh, &cond, RmcParams::default(), SystemParams::default())?;
    let (u, w) = oracle_state(mesh.num_nodes());
    sys.update(&problem.slope(&u, &w))?;
    Ok((mesh, sys))
}

fn criterion_5() -> Result<Verdict> {
    let (ok_a, detail_a) = criterion_5a()?;
    let mut gap: f64 = 0.0;
    let mut lo = f64::INFINITY;
    for primal in [PrimalKind::V, PrimalKind::Ve, PrimalKind::Vef] {
        let (mesh, sys) = oracle_system(primal)?;
        let sigma = subdomain_sigma_max(&mesh, &ConductivityTensors::default(), &sys);
        for kind in [ScalingKind::Rho, ScalingKind::Deluxe] {
            let (g, m) = bddc_spectra(&sys, Scaling::build(kind, &sys, &sigma)?)?;
            gap = gap.max(g);
            lo = lo.min(m);
        }
    }
    let ok_b = gap <= 1e-8;
    let ok_c = lo >= 1.0 - 1e-8;
    Ok(Verdict {
        pass: ok_a && ok_b && ok_c,
        detail: format!("{detail_a}; (b) max eigenvalue gap {gap:.2e}; (c) min off-kernel eigenvalue {lo:.12}"),
    })
}

// ------------------------------------------------------------ remainder

fn criterion_6() -> Verdict {
    let tau = RmcParams::default().critical_tau(&MembraneParams::default(), [-85.0, 120.0], [0.0, 1.0]);
    Verdict {
        pass: (0.33..=0.41).contains(&tau),
        detail: format!("critical tau {tau:.4} ms (band [0.33, 0.41])"),
    }
}

fn criterion_7() -> Result<Verdict> {
    let mut cfg = ExperimentConfig::default();
    cfg.system.tau = 0.05;
    cfg.system.t_end = 2.0;
    let table = experiment::run_experiment(&cfg)?;
    let r = &table.runs[0];
    let steps = r.steps.len();
    let nit = r.summary.nit_avg;
    let peak = r.trace.iter().map(|t| t.v_max).fold(f64::MIN, f64::max);
    Ok(Verdict {
        pass: steps == 40 && nit <= 2.0,
        detail: format!(
            "{steps} steps on {} elements, {} subdomains: nit {nit:.3} (limit 2), lit {:.2}, peak v {peak:.1} mV",
            r.summary.elements, r.summary.subdomains, r.summary.lit_avg
        ),
    })
}

fn criterion_8() -> Result<Verdict> {
    let mut systems = Vec::new();
    for (n, grid) in [([4, 4, 2], [2, 2, 1]), ([4, 4, 4], [2, 2, 2])] {
        let mesh = HexMesh::build(&MeshConfig::slab(n, [0.4, 0.4, 0.2]))?;
        for primal in [PrimalKind::V, PrimalKind::Ve, PrimalKind::Vef] {
            let decomp = partition_box_marked(&mesh, grid, true)?;
            let sys = SchurSystem::new(
                &mesh,
                &ConductivityTensors::default(),
                decomp,
                primal,
                0.05,
                &MembraneParams::default(),
            )?;
            systems.push((mesh.clone(), sys));
        }
    }
    let nsys = systems.len();
    let systems = RefCell::new(systems);
    let worst = RefCell::new([0.0f64; 3]);
    let cases = Cell::new(0);
    let mut failure = None;
    let strategy = (
        0..nsys,
        prop::collection::vec(-2.0f64..3.0, 128),
        prop::collection::vec(-1.0f64..1.0, 512),
    );
    let result = runner(48).run(&strategy, |(idx, slopes, values)| {
        let mut systems = systems.borrow_mut();
        let (mesh, sys) = &mut systems[idx];
        let slope: Vec<f64> = (0..sys.decomp.num_nodes).map(|i| slopes[i % slopes.len()]).collect();
        sys.update(&slope).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let sigma = subdomain_sigma_max(mesh, &ConductivityTensors::default(), sys);
        let mut it = values.iter().cycle();
        let x: Vec<f64> = (0..sys.n_interface()).map(|_| *it.next().unwrap()).collect();
        let mut w = TildeVector::zeros(sys);
        w.delta.iter_mut().flatten().chain(w.pi.iter_mut()).for_each(|v| *v = *it.next().unwrap());
        for kind in [ScalingKind::Rho, ScalingKind::Deluxe] {
            let d = Scaling::build(kind, sys, &sigma).map_err(|e| TestCaseError::fail(e.to_string()))?;
            // E_D E_D w = E_D w
            let e1 = TildeVector::restrict(sys, &d.average(sys, &w));
            let e2 = TildeVector::restrict(sys, &d.average(sys, &e1));
            let f1 = tilde_flat(&e1);
            let idem = diff_norm(&tilde_flat(&e2), &f1) / norm(&f1).max(1e-300);
            // P_D R̃ x = 0
            let jump = norm(&tilde_flat(&d.jump(sys, &TildeVector::restrict(sys, &x)))) / norm(&x);
            // R̃_Dᵀ R̃ x = x
            let unity = diff_norm(&d.average(sys, &TildeVector::restrict(sys, &x)), &x) / norm(&x);
            for (slot, v) in worst.borrow_mut().iter_mut().zip([idem, jump, unity]) {
                *slot = slot.max(v);
            }
            prop_assert!(idem <= 1e-10 && jump <= 1e-10 && unity <= 1e-10, "{kind:?}: {idem:e} {jump:e} {unity:e}");
        }
        cases.set(cases.get() + 1);
        Ok(())
    });
    let (worst, cases) = (worst.into_inner(), cases.get());
    if let Err(e) = result {
        failure = Some(e.to_string());
    }
    Ok(Verdict {
        pass: failure.is_none(),
        detail: format!(
            "{cases} random cases, rho and deluxe: idempotency {:.1e}, jump on continuous {:.1e}, partition of unity {:.1e}{}",
            worst[0],
            worst[1],
            worst[2],
            failure.map(|f| format!("; {f}")).unwrap_or_default()
        ),
    })
}

fn criterion_9() -> Result<Verdict> {
    let mesh = HexMesh::build(&MeshConfig::slab([4, 3, 2], [0.4, 0.3, 0.2]))?;
    let problem = BidomainProblem::new(
        &mesh,
        &ConductivityTensors::default(),
        RmcParams::default(),
        SystemParams::default(),
    )?;
    let n = mesh.num_nodes();
    let worst = Cell::new(0.0f64);
    let cases = Cell::new(0);
    let node = (-85.0f64..120.0, -20.0f64..20.0, 0.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0);
    let strategy = (prop::collection::vec(node, n), any::<bool>());
    let result = runner(50).run(&strategy, |(nodes, stimulate)| {
        let u: Vec<f64> = nodes.iter().flat_map(|&(v, ue, ..)| [v + ue, ue]).collect();
        let w: Vec<f64> = nodes.iter().map(|t| t.2).collect();
        let x: Vec<f64> = nodes.iter().flat_map(|&(.., a, b)| [a, b]).collect();
        let u_prev: Vec<f64> = u.iter().map(|v| 0.9 * v).collect();
        let eps = 1e-3;
        let shifted = |s: f64| -> Vec<f64> { u.iter().zip(&x).map(|(a, b)| a + s * b).collect() };
        let fp = problem.residual(&shifted(eps), &w, &u_prev, stimulate).unwrap();
        let fm = problem.residual(&shifted(-eps), &w, &u_prev, stimulate).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let jx = problem.jacobian_apply(&u, &w, &x);
        let rel = diff_norm(&fd, &jx) / norm(&jx);
        worst.set(worst.get().max(rel));
        cases.set(cases.get() + 1);
        prop_assert!(rel <= 1e-6, "relative mismatch {rel:e}");
        Ok(())
    });
    let (worst, cases) = (worst.get(), cases.get());
    Ok(Verdict {
        pass: result.is_ok() && cases == 50,
        detail: format!(
            "{cases} random states: max relative mismatch {worst:.2e} (limit 1e-6){}",
            result.err().map(|e| format!("; {e}")).unwrap_or_default()
        ),
    })
}

// ------------------------------------------------------------------ main

fn print(id: usize, name: &str, v: &Result<Verdict>, secs: f64) -> Option<bool> {
    match v {
        Ok(v) => {
            let tag = if v.pass { "PASS" } else { "FAIL" };
            println!("[{tag}] {id} {name}: {} ({secs:.1} s)", v.detail);
            Some(v.pass)
        }
        Err(e) => {
            println!("[FAIL] {id} {name}: not evaluated: {e}");
            None
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn wanted(id: usize) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn sweep_outcomes(outcomes: &mut Vec<Option<bool>>) {
    let (rows, secs) = timed(sweep);
    let share = secs / 3.0;
    let rows = match rows {
        Ok(rows) => rows,
        Err(e) => {
            for (id, name) in [(1, "optimality sweep"), (2, "deluxe vs rho"), (4, "FETI-DP vs BDDC")] {
                if wanted(id) {
                    println!("[FAIL] {id} {name}: not evaluated: {e}");
                    outcomes.push(None);
                }
            }
            return;
        }
    };
    if wanted(1) {
        outcomes.push(print(1, "optimality sweep, rho scaling", &Ok(criterion_1(&rows)), share));
    }
    if wanted(2) {
        let v = paired(
            &rows,
            (PreconditionerKind::Bddc, ScalingKind::Rho),
            (PreconditionerKind::Bddc, ScalingKind::Deluxe),
        );
        outcomes.push(print(2, "deluxe vs rho condition", &Ok(v), share));
    }
    if wanted(4) {
        let v = paired(
            &rows,
            (PreconditionerKind::Bddc, ScalingKind::Rho),
            (PreconditionerKind::Fetidp, ScalingKind::Rho),
        );
        outcomes.push(print(4, "FETI-DP vs BDDC condition", &Ok(v), share));
    }
}

fn main() {
    let mut outcomes = Vec::new();
    if [1, 2, 4].into_iter().any(wanted) {
        sweep_outcomes(&mut outcomes);
    }
    let rest: [(usize, &str, fn() -> Result<Verdict>); 6] = [
        (3, "polylogarithmic growth", criterion_3),
        (5, "dense oracle", criterion_5),
        (6, "coercivity time step bound", || Ok(criterion_6())),
        (7, "Newton iterations per step", criterion_7),
        (8, "projection properties", criterion_8),
        (9, "Jacobian vs finite differences", criterion_9),
    ];
    for (id, name, f) in rest {
        if wanted(id) {
            let (v, s) = timed(f);
            outcomes.push(print(id, name, &v, s));
        }
    }

    let passed = outcomes.iter().filter(|o| **o == Some(true)).count();
    let missing = outcomes.iter().filter(|o| o.is_none()).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    if missing > 0 || (strict && passed < outcomes.len()) {
        std::process::exit(1);
    }
}
