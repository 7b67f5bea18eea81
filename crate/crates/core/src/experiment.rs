//! Experiment driver: optimality sweeps over H/h, weak and strong scaling,
//! whole-beat runs and single runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bidomain::{BidomainProblem, BidomainState, NewtonConfig, NewtonReport, SystemParams};
use crate::conductivity::ConductivityTensors;
use crate::dualprimal::PreconditionerKind;
use crate::error::{config, Error, Result};
use crate::ionic::RmcParams;
use crate::linsolve::{build_solver, LinearSolverConfig};
use crate::mesh::{GeometryKind, HexMesh, MeshConfig};
use crate::output::{self, StepRow, TraceRow};
use crate::scaling::ScalingKind;
use crate::topology::PrimalKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Optimality,
    Weak,
    Strong,
    Beat,
    SingleRun,
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimality" => Ok(Scenario::Optimality),
            "weak" => Ok(Scenario::Weak),
            "strong" => Ok(Scenario::Strong),
            "beat" => Ok(Scenario::Beat),
            "single-run" | "single" => Ok(Scenario::SingleRun),
            _ => Err(format!(
                "unknown scenario '{s}' (expected optimality, weak, strong, beat or single-run)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimalitySweep {
    pub h_ratios: Vec<usize>,
    pub scalings: Vec<ScalingKind>,
    pub primals: Vec<PrimalKind>,
    pub preconds: Vec<PreconditionerKind>,
    /// Element edge lengths (cm). When set the slab grows with H/h;
    /// otherwise `mesh.extent` stays fixed and h shrinks.
    pub element_size: Option<[f64; 3]>,
}

impl Default for OptimalitySweep {
    fn default() -> Self {
        Self {
            h_ratios: vec![4, 8, 12],
            scalings: vec![ScalingKind::Rho, ScalingKind::Deluxe],
            primals: vec![PrimalKind::V, PrimalKind::Ve, PrimalKind::Vef],
            preconds: vec![PreconditionerKind::Bddc],
            element_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingStudy {
    pub workers: Vec<usize>,
    /// Elements per subdomain for weak scaling; the element size is
    /// taken from `mesh`.
    pub local_elements: [usize; 3],
}

impl Default for ScalingStudy {
    fn default() -> Self {
        Self {
            workers: vec![1, 2, 4, 8],
            local_elements: [8, 8, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write a VTK snapshot every this many steps.
    pub vtk_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub mesh: MeshConfig,
    pub conductivity: ConductivityTensors,
    pub ionic: RmcParams,
    pub system: SystemParams,
    pub solver: LinearSolverConfig,
    pub newton: NewtonConfig,
    /// Worker threads; the host default when absent.
    pub threads: Option<usize>,
    pub optimality: OptimalitySweep,
    pub scaling_study: ScalingStudy,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::SingleRun,
            mesh: MeshConfig::slab([16, 16, 16], [0.16, 0.16, 0.16]),
            conductivity: ConductivityTensors::default(),
            ionic: RmcParams::default(),
            system: SystemParams::default(),
            solver: LinearSolverConfig::default(),
            newton: NewtonConfig::default(),
            threads: None,
            optimality: OptimalitySweep::default(),
            scaling_study: ScalingStudy::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.conductivity.validate()?;
        self.ionic.validate()?;
        self.system.validate()?;
        self.newton.validate()?;
        self.solver.krylov.validate()?;
        if self.threads == Some(0) {
            return config("thread count must be positive");
        }
        if self.output.vtk_every == Some(0) {
            return config("VTK cadence must be positive");
        }
        match self.scenario {
            Scenario::Optimality => {
                let o = &self.optimality;
                if o.h_ratios.is_empty() || o.scalings.is_empty() || o.primals.is_empty() || o.preconds.is_empty() {
                    return config("optimality sweep lists must be non-empty");
                }
                if o.h_ratios.contains(&0) {
                    return config("H/h must be positive");
                }
                if let Some(h) = o.element_size {
                    if h.iter().any(|&x| !(x > 0.0)) {
                        return config("element size must be positive");
                    }
                }
            }
            Scenario::Weak | Scenario::Strong => {
                let s = &self.scaling_study;
                if s.workers.is_empty() || s.workers.contains(&0) {
                    return config("worker counts must be positive");
                }
                if s.local_elements.contains(&0) {
                    return config("local element counts must be positive");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One summary line per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run: usize,
    pub geometry: String,
    pub elements: String,
    pub subdomains: String,
    pub h_ratio: usize,
    pub dofs: usize,
    pub precond: String,
    pub scaling: String,
    pub primal: String,
    pub workers: usize,
    pub steps: usize,
    /// Newton iterations per time step.
    pub nit_avg: f64,
    /// Linear iterations per Newton iteration.
    pub lit_avg: f64,
    pub lit_max: usize,
    /// Mean of the per-step condition estimates.
    pub cond_avg: f64,
    pub cond_max: f64,
    pub wall_s: f64,
    /// `T_ref / T_N` for scaling studies, NaN otherwise.
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: SummaryRow,
    pub steps: Vec<StepRow>,
    pub trace: Vec<TraceRow>,
    pub snapshots: usize,
}

#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub scenario: Scenario,
    pub runs: Vec<RunResult>,
}

impl ResultsTable {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }

    /// Whether every run kept its per-step linear iteration count within
    /// twice the median.
    pub fn lit_bounded(&self) -> bool {
        self.runs.iter().all(|r| {
            let mut lits: Vec<f64> = r.steps.iter().filter(|s| s.nit > 0).map(|s| s.lit_avg).collect();
            if lits.is_empty() {
                return true;
            }
            lits.sort_by(f64::total_cmp);
            let median = lits[lits.len() / 2];
            lits.last().copied().unwrap_or(0.0) <= 2.0 * median
        })
    }
}

/// Summary averages recomputed from per-step rows.
pub fn aggregate(steps: &[StepRow]) -> (f64, f64, f64, f64) {
    let n = steps.len().max(1) as f64;
    let nit: usize = steps.iter().map(|s| s.nit).sum();
    let lit: usize = steps.iter().map(|s| s.lit_total).sum();
    let conds: Vec<f64> = steps.iter().map(|s| s.cond_est).filter(|c| c.is_finite()).collect();
    let cond_avg = if conds.is_empty() {
        f64::NAN
    } else {
        conds.iter().sum::<f64>() / conds.len() as f64
    };
    let cond_max = conds.iter().copied().fold(f64::NAN, f64::max);
    let lit_avg = if nit == 0 { 0.0 } else { lit as f64 / nit as f64 };
    (nit as f64 / n, lit_avg, cond_avg, cond_max)
}

fn step_row(step: usize, t: f64, r: &NewtonReport, wall_ms: f64) -> StepRow {
    let lit = r.total_linear();
    StepRow {
        step,
        t_ms: t,
        nit: r.iterations,
        lit_total: lit,
        lit_avg: if r.iterations == 0 {
            0.0
        } else {
            lit as f64 / r.iterations as f64
        },
        cond_est: if r.conditions.is_empty() {
            f64::NAN
        } else {
            r.conditions.iter().sum::<f64>() / r.conditions.len() as f64
        },
        wall_ms,
    }
}

fn dims(x: [usize; 3]) -> String {
    format!("{}x{}x{}", x[0], x[1], x[2])
}

/// One simulation from rest over `system.t_end`.
pub fn simulate(
    cfg: &ExperimentConfig,
    mesh_cfg: &MeshConfig,
    solver_cfg: &LinearSolverConfig,
    snapshots: Option<(&Path, &str)>,
) -> Result<RunResult> {
    let started = Instant::now();
    let mesh = HexMesh::build(mesh_cfg)?;
    let problem = BidomainProblem::new(&mesh, &cfg.conductivity, cfg.ionic, cfg.system)?;
    let mut solver = build_solver(
        &mesh,
        &cfg.conductivity,
        &cfg.system.membrane,
        cfg.system.tau,
        solver_cfg,
    )?;
    let mut state = BidomainState::resting(mesh.num_nodes());
    let n_steps = cfg.system.num_steps();
    let mut written = 0;
    let mut snapshot = |state: &BidomainState, step: usize| -> Result<()> {
        if let (Some((dir, prefix)), Some(k)) = (snapshots, cfg.output.vtk_every) {
            if step % k == 0 {
                let v = state.v();
                let ui: Vec<f64> = state.u.iter().step_by(2).copied().collect();
                let ue: Vec<f64> = state.u.iter().skip(1).step_by(2).copied().collect();
                output::write_vtk(
                    &output::snapshot_path(dir, prefix, step),
                    &mesh,
                    &[("v", &v), ("u_i", &ui), ("u_e", &ue), ("w", &state.w)],
                )?;
                written += 1;
            }
        }
        Ok(())
    };
    snapshot(&state, 0)?;
    let mut steps = Vec::with_capacity(n_steps);
    let mut trace = Vec::with_capacity(n_steps);
    for k in 1..=n_steps {
        let t0 = Instant::now();
        let report = problem.advance(&mut state, solver.as_mut(), &cfg.newton)?;
        let row = step_row(k, state.t, &report, t0.elapsed().as_secs_f64() * 1e3);
        let v = state.v();
        trace.push(TraceRow {
            t_ms: state.t,
            v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
            v_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            nit: row.nit,
            lit: row.lit_total,
            cond_est: row.cond_est,
        });
        steps.push(row);
        snapshot(&state, k)?;
    }
    let (nit_avg, lit_avg, cond_avg, cond_max) = aggregate(&steps);
    let h_ratio = if solver_cfg.precond == PreconditionerKind::None {
        0
    } else {
        mesh_cfg.elements[0] / solver_cfg.subdomains[0]
    };
    let summary = SummaryRow {
        run: 0,
        geometry: match mesh_cfg.geometry {
            GeometryKind::Slab => "slab".into(),
            GeometryKind::Ellipsoid => "ellipsoid".into(),
        },
        elements: dims(mesh_cfg.elements),
        subdomains: dims(solver_cfg.subdomains),
        h_ratio,
        dofs: 2 * mesh.num_nodes(),
        precond: format!("{:?}", solver_cfg.precond).to_lowercase(),
        scaling: format!("{:?}", solver_cfg.scaling).to_lowercase(),
        primal: solver_cfg.primal.label().to_string(),
        workers: rayon::current_num_threads(),
        steps: steps.len(),
        nit_avg,
        lit_avg,
        lit_max: steps.iter().map(|s| s.lit_total).max().unwrap_or(0),
        cond_avg,
        cond_max,
        wall_s: started.elapsed().as_secs_f64(),
        speedup: f64::NAN,
    };
    Ok(RunResult {
        summary,
        steps,
        trace,
        snapshots: written,
    })
}

/// Most cubic `[px, py, pz]` with `px ≥ py ≥ pz` and product `n`.
pub fn grid_for(n: usize) -> [usize; 3] {
    let mut best = [n, 1, 1];
    for pz in 1..=n {
        if n % pz != 0 {
            continue;
        }
        for py in pz..=n / pz {
            if (n / pz) % py != 0 {
                continue;
            }
            let px = n / pz / py;
            if px < py {
                continue;
            }
            if px - pz < best[0] - best[2] {
                best = [px, py, pz];
            }
        }
    }
    best
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn run_dir(cfg: &ExperimentConfig) -> Result<Option<PathBuf>> {
    match (&cfg.output.dir, cfg.output.vtk_every) {
        (Some(d), Some(_)) => {
            output::ensure_dir(d)?;
            Ok(Some(d.clone()))
        }
        _ => Ok(None),
    }
}

/// Mesh of `grid · H/h` elements; fixed element size or fixed extent.
pub fn optimality_mesh(cfg: &ExperimentConfig, h_ratio: usize) -> MeshConfig {
    let grid = cfg.solver.subdomains;
    let mut m = cfg.mesh.clone();
    m.elements = [grid[0] * h_ratio, grid[1] * h_ratio, grid[2] * h_ratio];
    if let Some(h) = cfg.optimality.element_size {
        m.extent = [
            h[0] * m.elements[0] as f64,
            h[1] * m.elements[1] as f64,
            h[2] * m.elements[2] as f64,
        ];
    }
    m
}

pub fn run_optimality(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let o = &cfg.optimality;
    let snap_dir = run_dir(cfg)?;
    let mut runs = Vec::new();
    for &h in &o.h_ratios {
        let mesh = optimality_mesh(cfg, h);
        for &precond in &o.preconds {
            for &scaling in &o.scalings {
                for &primal in &o.primals {
                    let solver = LinearSolverConfig {
                        precond,
                        scaling,
                        primal,
                        ..cfg.solver
                    };
                    let prefix = format!("run{:02}", runs.len());
                    let mut r = with_threads(cfg.threads, || {
                        simulate(cfg, &mesh, &solver, snap_dir.as_deref().map(|d| (d, prefix.as_str())))
                    })?;
                    r.summary.run = runs.len();
                    runs.push(r);
                }
            }
        }
    }
    Ok(ResultsTable {
        scenario: Scenario::Optimality,
        runs,
    })
}

/// Weak (`fixed local size`) or strong (`fixed global mesh`) scaling over
/// the configured worker counts, one subdomain per worker.
pub fn run_scaling(cfg: &ExperimentConfig, weak: bool) -> Result<ResultsTable> {
    let s = &cfg.scaling_study;
    let snap_dir = run_dir(cfg)?;
    let h = [0, 1, 2].map(|k| cfg.mesh.extent[k] / cfg.mesh.elements[k] as f64);
    let mut runs: Vec<RunResult> = Vec::new();
    for &n in &s.workers {
        let grid = grid_for(n);
        let mut mesh = cfg.mesh.clone();
        if weak {
            mesh.elements = [0, 1, 2].map(|k| grid[k] * s.local_elements[k]);
            if mesh.geometry == GeometryKind::Slab {
                mesh.extent = [0, 1, 2].map(|k| h[k] * mesh.elements[k] as f64);
            }
        }
        let solver = LinearSolverConfig {
            subdomains: grid,
            ..cfg.solver
        };
        let prefix = format!("run{:02}", runs.len());
        let mut r = with_threads(Some(n), || {
            simulate(cfg, &mesh, &solver, snap_dir.as_deref().map(|d| (d, prefix.as_str())))
        })?;
        r.summary.run = runs.len();
        let t_ref = runs.first().map_or(r.summary.wall_s, |f| f.summary.wall_s);
        r.summary.speedup = t_ref / r.summary.wall_s;
        runs.push(r);
    }
    Ok(ResultsTable {
        scenario: if weak { Scenario::Weak } else { Scenario::Strong },
        runs,
    })
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let snap_dir = run_dir(cfg)?;
    let r = with_threads(cfg.threads, || {
        simulate(cfg, &cfg.mesh, &cfg.solver, snap_dir.as_deref().map(|d| (d, "snapshot")))
    })?;
    Ok(ResultsTable {
        scenario: cfg.scenario,
        runs: vec![r],
    })
}

/// Whole-beat run; check [`ResultsTable::lit_bounded`] afterwards.
pub fn run_beat(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    run_single(cfg)
}

/// Runs the configured scenario with sequential dense kernels.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    match cfg.scenario {
        Scenario::Optimality => run_optimality(cfg),
        Scenario::Weak => run_scaling(cfg, true),
        Scenario::Strong => run_scaling(cfg, false),
        Scenario::Beat => run_beat(cfg),
        Scenario::SingleRun => run_single(cfg),
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    version: &'a str,
    git_hash: Option<String>,
    scenario: Scenario,
    runs: usize,
    total_wall_s: f64,
    lit_bounded: bool,
    config: &'a ExperimentConfig,
}

/// Writes `summary.csv`, per-run step and trace CSVs and `metadata.json`.
pub fn emit_outputs(table: &ResultsTable, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    output::ensure_dir(dir)?;
    let mut files = Vec::new();
    let summary = dir.join("summary.csv");
    output::write_csv(&summary, &table.rows())?;
    files.push(summary);
    for (i, r) in table.runs.iter().enumerate() {
        let (steps, trace) = if table.runs.len() == 1 {
            (dir.join("steps.csv"), dir.join("trace.csv"))
        } else {
            (dir.join(format!("run{i:02}_steps.csv")), dir.join(format!("run{i:02}_trace.csv")))
        };
        output::write_csv(&steps, &r.steps)?;
        output::write_csv(&trace, &r.trace)?;
        files.push(steps);
        files.push(trace);
    }
    let meta = dir.join("metadata.json");
    output::write_json(
        &meta,
        &Metadata {
            version: env!("CARGO_PKG_VERSION"),
            git_hash: output::git_hash(),
            scenario: table.scenario,
            runs: table.runs.len(),
            total_wall_s: table.runs.iter().map(|r| r.summary.wall_s).sum(),
            lit_bounded: table.lit_bounded(),
            config: cfg,
        },
    )?;
    files.push(meta);
    Ok(files)
}

/// Plain-text rendering of the summary for terminals.
pub fn format_table(table: &ResultsTable) -> String {
    let mut s = format!(
        "{:>3} {:>9} {:>10} {:>8} {:>4} {:>9} {:>7} {:>6} {:>6} {:>3} {:>6} {:>7} {:>8} {:>8} {:>7}\n",
        "run", "geometry", "elements", "subs", "H/h", "dofs", "precond", "scal", "primal", "thr", "nit", "lit", "cond", "time[s]", "speedup"
    );
    for r in table.rows() {
        s.push_str(&format!(
            "{:>3} {:>9} {:>10} {:>8} {:>4} {:>9} {:>7} {:>6} {:>6} {:>3} {:>6.2} {:>7.2} {:>8.3} {:>8.2} {:>7.2}\n",
            r.run,
            r.geometry,
            r.elements,
            r.subdomains,
            r.h_ratio,
            r.dofs,
            r.precond,
            r.scaling,
            r.primal,
            r.workers,
            r.nit_avg,
            r.lit_avg,
            r.cond_avg,
            r.wall_s,
            r.speedup
        ));
    }
    s
}
