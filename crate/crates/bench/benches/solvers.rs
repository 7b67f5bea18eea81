use bidomain_dd::bidomain::{BidomainProblem, BidomainState, NewtonConfig, SystemParams};
use bidomain_dd::dualprimal::PreconditionerKind;
use bidomain_dd::fem::assemble_stiffness;
use bidomain_dd::ionic::RmcParams;
use bidomain_dd::linsolve::build_solver;
use bidomain_dd::scaling::ScalingKind;
use bidomain_dd::topology::PrimalKind;
use bidomain_dd::{ConductivityTensors, Medium};
use bidomain_dd_bench::{ready_solver, resting_slopes, rhs, slab, solver_config, TAU};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const GRID: [usize; 3] = [2, 2, 2];

fn assembly(c: &mut Criterion) {
    let cond = ConductivityTensors::default();
    let mut g = c.benchmark_group("assembly");
    for local in [4, 8] {
        let mesh = slab(GRID, local);
        g.bench_with_input(BenchmarkId::new("stiffness", local), &mesh, |b, m| {
            b.iter(|| assemble_stiffness(m, &cond, Medium::Intra, None))
        });
    }
    g.finish();
}

const METHODS: [(&str, PreconditionerKind, ScalingKind); 3] = [
    ("bddc-rho", PreconditionerKind::Bddc, ScalingKind::Rho),
    ("bddc-deluxe", PreconditionerKind::Bddc, ScalingKind::Deluxe),
    ("fetidp-rho", PreconditionerKind::Fetidp, ScalingKind::Rho),
];

fn setup(c: &mut Criterion) {
    let mesh = slab(GRID, 6);
    let slopes = resting_slopes(&mesh);
    let mut g = c.benchmark_group("setup");
    g.sample_size(10);
    for (name, precond, scaling) in METHODS {
        let cfg = solver_config(precond, scaling, PrimalKind::Vef, GRID);
        let mut s = ready_solver(&mesh, &cfg);
        g.bench_function(name, |b| b.iter(|| s.update(&slopes).unwrap()));
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mesh = slab(GRID, 6);
    let b_vec = rhs(&mesh);
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for (name, precond, scaling) in METHODS {
        for primal in [PrimalKind::V, PrimalKind::Vef] {
            let cfg = solver_config(precond, scaling, primal, GRID);
            let mut s = ready_solver(&mesh, &cfg);
            let id = BenchmarkId::new(name, primal.label());
            g.bench_function(id, |b| b.iter(|| s.solve(&b_vec).unwrap()));
        }
    }
    g.finish();
}

fn time_step(c: &mut Criterion) {
    let mesh = slab(GRID, 4);
    let cond = ConductivityTensors::default();
    let params = SystemParams {
        tau: TAU,
        ..SystemParams::default()
    };
    let problem = BidomainProblem::new(&mesh, &cond, RmcParams::default(), params.clone()).unwrap();
    let cfg = solver_config(PreconditionerKind::Bddc, ScalingKind::Rho, PrimalKind::Vef, GRID);
    let mut solver = build_solver(&mesh, &cond, &params.membrane, TAU, &cfg).unwrap();
    let newton = NewtonConfig::default();
    let mut g = c.benchmark_group("time-step");
    g.sample_size(10);
    g.bench_function("stimulated", |b| {
        b.iter(|| {
            let mut state = BidomainState::resting(mesh.num_nodes());
            problem.advance(&mut state, solver.as_mut(), &newton).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, assembly, setup, solve, time_step);
criterion_main!(benches);
