use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use backstep_etc::kernel::{kernel_residual, kgrid::KgridFile};
use backstep_etc::provider::export_kernel;
use backstep_etc::scenario::{parse_scenario, render_design, run_sweep, sweep_csv, Scenario};
use backstep_etc::trigger::{dwell_time_bound, ControlMode, DwellBound};
use backstep_etc::{Error, Result};

#[derive(Parser)]
#[command(name = "backstep-etc", version, about = "Event-triggered backstepping control of reaction-diffusion PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the direct and inverse kernels and write them as .kgrid files.
    SolveKernel(Common),
    /// Run the closed loop and write trace CSVs and a summary.
    Simulate(Simulate),
    /// Print the minimal dwell-time bound.
    DwellBound(Dwell),
    /// Print the design constants and the admissibility of the trigger gains.
    CheckParams {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the scenario over its [sweep] amplitudes.
    Sweep(Sweep),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides the scenario's).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Simulate {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct Dwell {
    #[arg(long, conflicts_with_all = ["coefficients", "eps1"])]
    scenario: Option<PathBuf>,
    /// n1 n2 n3 of the dwell integrand directly.
    #[arg(long, num_args = 3, value_names = ["N1", "N2", "N3"])]
    coefficients: Option<Vec<f64>>,
    #[arg(long, requires_all = ["xi", "lambda_d", "eta"])]
    eps1: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Event,
    Continuous,
    OpenLoop,
}

impl From<Mode> for ControlMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Event => ControlMode::Event,
            Mode::Continuous => ControlMode::Continuous,
            Mode::OpenLoop => ControlMode::OpenLoop,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    parse_scenario(path).map_err(|e| match e {
        Error::Validation { field, reason } => Error::Validation {
            field,
            reason: format!("{reason} (in {})", path.display()),
        },
        other => other,
    })
}

fn out_dir(s: &Scenario, over: &Option<PathBuf>) -> PathBuf {
    match over {
        Some(p) => p.clone(),
        None => s.resolve(&s.output.dir),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::SolveKernel(c) => solve_kernel(c),
        Command::Simulate(c) => simulate(c),
        Command::DwellBound(c) => dwell(c),
        Command::CheckParams { scenario } => {
            let s = load(&scenario)?;
            let prepared = s.prepare()?;
            print!("{}", render_design(&prepared.design));
            let t = &prepared.design.dwell;
            println!("dwell bound     tau = {:.6e}", t.tau);
            Ok(())
        }
        Command::Sweep(c) => sweep(c),
    }
}

fn solve_kernel(c: Common) -> Result<()> {
    let s = load(&c.scenario)?;
    let prepared = s.prepare()?;
    let dir = out_dir(&s, &c.out);
    let eps = s.plant.eps;
    let q = s.plant.q;
    let direct = dir.join(format!("{}_direct.kgrid", s.stem()));
    let inverse = dir.join(format!("{}_inverse.kgrid", s.stem()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    export_kernel(&direct, &prepared.kernels.direct, &prepared.profile, eps, q)?;
    KgridFile::new(&prepared.kernels.inverse, eps, q, prepared.profile.samples().to_vec()).write(&inverse)?;
    let r = kernel_residual(&prepared.kernels.direct, &prepared.profile, eps)?;
    println!("wrote {}", direct.display());
    println!("wrote {}", inverse.display());
    println!("sup |k|         {:.6e}", prepared.kernels.direct.sup_norm());
    println!(
        "residuals       pde {:.3e} at ({:.3}, {:.3}), diagonal {:.3e}, k_y(x,0) {:.3e}",
        r.pde.value, r.pde.x, r.pde.y, r.diagonal.value, r.y0_derivative.value
    );
    let a = &prepared.design.assumption;
    println!(
        "assumption      {} (margin {:.4})",
        if a.pass { "holds" } else { "VIOLATED" },
        a.margin
    );
    Ok(())
}

fn simulate(c: Simulate) -> Result<()> {
    let s = load(&c.common.scenario)?;
    let prepared = s.prepare()?;
    let mode = c.mode.map_or(s.run.mode, ControlMode::from);
    let stride = c.stride.unwrap_or(s.run.stride);
    if stride == 0 {
        return Err(Error::validation("stride", "must be at least 1"));
    }
    let out = prepared.run(s.run.horizon, mode, stride)?;
    let dir = out_dir(&s, &c.common.out);
    let stem = format!("{}_{}", s.stem(), mode.as_str());
    out.trace.write_csv(&dir, &stem)?;
    let json = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    write(&dir.join(format!("{stem}_summary.json")), &json)?;
    print!("{}", out.summary.render());
    println!("wrote {}/{stem}_{{trace,events}}.csv", dir.display());
    Ok(())
}

fn dwell(c: Dwell) -> Result<()> {
    let bound = if let Some(path) = c.scenario {
        let s = load(&path)?;
        s.prepare()?.design.dwell
    } else if let Some(n) = c.coefficients {
        DwellBound::from_coefficients(n[0], n[1], n[2])
    } else if let (Some(e1), Some(xi), Some(ld), Some(eta)) = (c.eps1, c.xi, c.lambda_d, c.eta) {
        dwell_time_bound(e1, xi, ld, eta)
    } else {
        return Err(Error::validation(
            "dwell-bound",
            "give --scenario, --coefficients, or --eps1/--xi/--lambda-d/--eta",
        ));
    };
    println!("n1  {:.10e}", bound.n1);
    println!("n2  {:.10e}", bound.n2);
    println!("n3  {:.10e}", bound.n3);
    println!("tau {:.10e}", bound.tau);
    Ok(())
}

fn sweep(c: Sweep) -> Result<()> {
    let s = load(&c.common.scenario)?;
    let mode = c.mode.map_or(s.run.mode, ControlMode::from);
    let stride = c.stride.unwrap_or(s.run.stride).max(1);
    let rows = run_sweep(&s, mode, stride, c.workers)?;
    let csv = sweep_csv(&rows);
    let path = out_dir(&s, &c.common.out).join(format!("{}_sweep.csv", s.stem()));
    write(&path, &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}
