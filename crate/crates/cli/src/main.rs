use std::path::PathBuf;
use std::process::ExitCode;

use bidomain_dd::bidomain::{Stimulus, StimulusRegion};
use bidomain_dd::dualprimal::PreconditionerKind;
use bidomain_dd::experiment::{self, ExperimentConfig, Scenario};
use bidomain_dd::scaling::ScalingKind;
use bidomain_dd::topology::PrimalKind;
use bidomain_dd::{Error, GeometryKind};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Geometry {
    Slab,
    Ellipsoid,
}

/// Bidomain time stepping with BDDC / FETI-DP preconditioned Newton-Krylov.
///
/// Values from --config are overridden by explicit flags.
#[derive(Debug, Parser)]
#[command(name = "bidomain-dd", version)]
struct Args {
    /// optimality | weak | strong | beat | single-run
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Also selects the stimulus: a corner sphere on the slab, the
    /// endocardial surface on the ellipsoid
    #[arg(long, value_enum)]
    geometry: Option<Geometry>,
    /// Global element counts
    #[arg(long, num_args = 3, value_names = ["NX", "NY", "NZ"])]
    mesh: Option<Vec<usize>>,
    /// Slab extent in cm
    #[arg(long, num_args = 3, value_names = ["LX", "LY", "LZ"])]
    extent: Option<Vec<f64>>,
    /// Subdomain grid
    #[arg(long, num_args = 3, value_names = ["PX", "PY", "PZ"])]
    subs: Option<Vec<usize>>,
    /// bddc | fetidp | none
    #[arg(long)]
    precond: Option<PreconditionerKind>,
    /// rho | deluxe
    #[arg(long)]
    scaling: Option<ScalingKind>,
    /// v | ve | vef
    #[arg(long)]
    primal: Option<PrimalKind>,
    /// Time step in ms
    #[arg(long)]
    dt: Option<f64>,
    /// Final time in ms
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// H/h values of the optimality sweep
    #[arg(long = "h-ratios", num_args = 1.., value_delimiter = ',')]
    h_ratios: Option<Vec<usize>>,
    /// Worker counts of the scaling studies
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    /// Output directory for CSV, metadata and snapshots
    #[arg(long)]
    out: Option<PathBuf>,
    /// VTK snapshot cadence in steps
    #[arg(long = "vtk-every")]
    vtk_every: Option<usize>,
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit
    #[arg(long)]
    print_config: bool,
}

fn triple<T: Copy>(v: &[T]) -> [T; 3] {
    [v[0], v[1], v[2]]
}

fn effective_config(args: &Args) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(g) = args.geometry {
        let (kind, region) = match g {
            Geometry::Slab => (GeometryKind::Slab, Stimulus::default().region),
            Geometry::Ellipsoid => (GeometryKind::Ellipsoid, StimulusRegion::Endocardium),
        };
        cfg.mesh.geometry = kind;
        cfg.system.stimulus.region = region;
    }
    if let Some(m) = &args.mesh {
        cfg.mesh.elements = triple(m);
    }
    if let Some(e) = &args.extent {
        cfg.mesh.extent = triple(e);
    }
    if let Some(s) = &args.subs {
        cfg.solver.subdomains = triple(s);
    }
    if let Some(p) = args.precond {
        cfg.solver.precond = p;
        cfg.optimality.preconds = vec![p];
    }
    if let Some(s) = args.scaling {
        cfg.solver.scaling = s;
        cfg.optimality.scalings = vec![s];
    }
    if let Some(p) = args.primal {
        cfg.solver.primal = p;
        cfg.optimality.primals = vec![p];
    }
    if let Some(dt) = args.dt {
        cfg.system.tau = dt;
    }
    if let Some(t) = args.t_end {
        cfg.system.t_end = t;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(h) = &args.h_ratios {
        cfg.optimality.h_ratios = h.clone();
    }
    if let Some(w) = &args.workers {
        cfg.scaling_study.workers = w.clone();
    }
    if args.out.is_some() {
        cfg.output.dir = args.out.clone();
    }
    if args.vtk_every.is_some() {
        cfg.output.vtk_every = args.vtk_every;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match effective_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let table = match experiment::run_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() { 2 } else { 3 });
        }
    };
    print!("{}", experiment::format_table(&table));
    if cfg.scenario == Scenario::Beat && !table.lit_bounded() {
        eprintln!("warning: linear iterations exceeded twice their median during the beat");
    }
    if let Some(dir) = &cfg.output.dir {
        match experiment::emit_outputs(&table, &cfg, dir) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        }
    }
    ExitCode::SUCCESS
}
