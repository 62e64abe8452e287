use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dgsplit::comms::{format_schedule, greedy_schedule, parse_graph};
use dgsplit::error::ExitClass;
use dgsplit::harness::{
    compare_layers, comparison_table, convergence_table, converge, prism_desk, run_experiment, standing_wave,
    ErrorReport, RunConfig, Sweep,
};
use dgsplit::integrators::Method;
use dgsplit::linalg::PreconditionerKind;
use dgsplit::mesh::msh::{read_msh, write_msh};
use dgsplit::mesh::{build_structured_mesh, Rect};

#[derive(Parser)]
#[command(name = "dgsplit", version, about = "DG wave solver with overlapping domain splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its error report.
    Run(RunArgs),
    /// Observed convergence orders over halved steps or meshes.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "tau")]
        sweep: Sweep,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Difference of the splitting method to global Crank-Nicolson.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Overlap widths to compare, e.g. `2,4,8`.
        #[arg(long, value_delimiter = ',')]
        sweep_layers: Vec<usize>,
    },
    /// Print the communication schedule of a graph file.
    Schedule {
        graph: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a structured mesh or inspect an MSH file.
    Mesh(MeshArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    StandingWave,
    PrismDesk,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    subdomains: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    preconditioner: Option<PreconditionerKind>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Artifact directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Append the report row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut c = match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(Preset::PrismDesk)) => prism_desk(),
            (None, Some(Preset::StandingWave)) | (None, None) => standing_wave(8, 2, Method::Cn, 0.0125, 1.0),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field.clone() { c.$field = v; })*};
        }
        set!(method, degree, tau, t_end, subdomains, layers, workers, seed, snapshot_every);
        if let Some(eta) = self.eta {
            c.eta = Some(eta);
        }
        if let Some(tol) = self.tol {
            c.solver.tol = tol;
        }
        if let Some(maxit) = self.maxit {
            c.solver.maxit = maxit;
        }
        if let Some(p) = self.preconditioner {
            c.solver.preconditioner = p;
        }
        if let Some(dir) = &self.output {
            c.output.dir = Some(dir.clone());
            c.output.vtk = true;
            c.output.coefficients = true;
            c.output.diagnostics = true;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct MeshArgs {
    /// Inspect this MSH file instead of generating one.
    #[arg(long, conflicts_with = "output")]
    inspect: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    nx: usize,
    #[arg(long, default_value_t = 8)]
    ny: usize,
    /// `x0,y0,x1,y1`
    #[arg(long, value_delimiter = ',', default_value = "0,0,1,1", allow_hyphen_values = true)]
    extent: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    refine: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<dgsplit::Error>() {
        return match err.exit_class() {
            ExitClass::Config => 2,
            ExitClass::Solver => 3,
            ExitClass::Instability => 4,
            ExitClass::Other => 1,
        };
    }
    if e.downcast_ref::<dgsplit::harness::ConfigError>().is_some() {
        return 2;
    }
    1
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => {
            let config = args.config()?;
            let exp = run_experiment(&config)?;
            println!("{}", ErrorReport::CSV_HEADER);
            println!("{}", exp.report.csv_row());
            for p in &exp.artifacts {
                log::info!("wrote {}", p.display());
            }
            if let Some(path) = &args.csv {
                append_row(path, &exp.report)?;
            }
        }
        Command::Converge { run, sweep, levels } => {
            let config = run.config()?;
            let rows = converge(&config, sweep, levels)?;
            print!("{}", convergence_table(&rows));
        }
        Command::Compare { run, sweep_layers } => {
            let config = run.config()?;
            let layers = if sweep_layers.is_empty() { vec![config.layers] } else { sweep_layers };
            let rows = compare_layers(&config, &layers)?;
            print!("{}", comparison_table(&rows));
        }
        Command::Schedule { graph, output } => {
            let text = std::fs::read_to_string(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let g = parse_graph(&text).map_err(dgsplit::Error::from)?;
            let s = greedy_schedule(&g);
            let out = format_schedule(&s);
            match output {
                Some(path) => std::fs::write(path, out)?,
                None => print!("{out}"),
            }
        }
        Command::Mesh(args) => mesh_command(args)?,
    }
    Ok(())
}

fn append_row(path: &PathBuf, report: &ErrorReport) -> anyhow::Result<()> {
    use std::io::Write;
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{}", ErrorReport::CSV_HEADER)?;
    }
    writeln!(f, "{}", report.csv_row())?;
    Ok(())
}

fn mesh_command(args: MeshArgs) -> anyhow::Result<()> {
    let mut mesh = match &args.inspect {
        Some(path) => read_msh(path).map_err(dgsplit::Error::from)?,
        None => {
            let [x0, y0, x1, y1] = args.extent[..] else {
                anyhow::bail!("--extent takes four values");
            };
            build_structured_mesh(args.nx, args.ny, Rect::new(x0, y0, x1, y1)).map_err(dgsplit::Error::from)?
        }
    };
    for _ in 0..args.refine {
        mesh = mesh.refine_uniform();
    }
    let (kmin, kmax) = mesh.kappa_bounds();
    println!("cells      {}", mesh.n_cells());
    println!("vertices   {}", mesh.n_vertices());
    println!("faces      {}", mesh.n_faces());
    println!("boundary   {}", mesh.boundary_faces().count());
    println!("h_min      {:e}", mesh.h_min());
    println!("h_max      {:e}", mesh.h_max());
    println!("kappa      [{kmin}, {kmax}]");
    if let Some(path) = &args.output {
        write_msh(&mesh, path).map_err(dgsplit::Error::from)?;
    }
    Ok(())
}
