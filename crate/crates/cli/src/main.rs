use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gexp_core::config::RunConfig;
use gexp_core::lab::{output_dir, run_lab, write_outcome, LabId, LabOptions};
use gexp_core::pde::{solve_g_heat_1d, Payoff};
use gexp_core::scenario::{simulate_bundle, VolControl};
use gexp_core::upper::{default_family, sample_family, Functional, McSetup};
use gexp_core::Error;
use serde_json::json;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_LAB_FAILED: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "gexp",
    version,
    about = "Upper expectations under volatility uncertainty"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    emit_config: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    sigma_lo_sq: Option<f64>,
    #[arg(long, global = true)]
    sigma_hi_sq: Option<f64>,
    /// Spatial PDE intervals.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Output root for lab results.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// PDE value Ê[φ(B_T)] of a catalog payoff.
    Eval {
        #[arg(long)]
        payoff: String,
        /// Also write the retained lattice slices as CSV.
        #[arg(long)]
        slices: Option<PathBuf>,
    },
    /// Simulate a path bundle under one control.
    Simulate {
        /// `const:sigma_hi`, `const:1.2`, `alt:4`, `random:7:0.1`, `piecewise:v@t,...`
        #[arg(long)]
        control: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo upper (or lower) expectation over the default family.
    Estimate {
        /// `qv` for <B>_T, otherwise a payoff of B_T (`x2`, `abs`, ...).
        #[arg(long)]
        functional: String,
        #[arg(long)]
        lower: bool,
        /// Add the PDE feedback policy of the payoff to the family.
        #[arg(long)]
        feedback: bool,
        /// Per-control means as CSV.
        #[arg(long)]
        controls_csv: Option<PathBuf>,
    },
    /// Run one lab or all of them.
    Lab(LabArgs),
}

#[derive(Args, Debug)]
struct LabArgs {
    /// Lab id or `all`.
    id: String,
    /// Block counts or dyadic levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    windows: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

fn effective_config(cli: &Cli) -> gexp_core::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let is_lab = matches!(cli.command, Command::Lab(_));
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    if let Some(v) = cli.sigma_lo_sq {
        cfg.spec.sigma_lo_sq = v;
    }
    if let Some(v) = cli.sigma_hi_sq {
        cfg.spec.sigma_hi_sq = v;
    }
    if let Some(n) = cli.nodes {
        cfg.pde.nodes = n;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if is_lab {
        if cli.paths.is_some() {
            cfg.lab.n_paths = cli.paths;
        }
        if cli.horizon.is_some() {
            cfg.lab.horizon = cli.horizon;
        }
        if cli.steps.is_some() {
            cfg.lab.n_steps = cli.steps;
        }
    } else {
        if let Some(p) = cli.paths {
            cfg.mc.n_paths = p;
        }
        if let Some(t) = cli.horizon {
            cfg.grid.horizon = t;
        }
        if let Some(s) = cli.steps {
            cfg.grid.n_steps = s;
        }
    }
    if let Command::Lab(l) = &cli.command {
        if l.n.is_some() {
            cfg.lab.n = l.n.clone();
        }
        if l.c.is_some() {
            cfg.lab.c = l.c;
        }
        if l.windows.is_some() {
            cfg.lab.windows = l.windows;
        }
    }
    let text = cfg.to_toml();
    // re-parse so file and flag values go through the same validation
    RunConfig::parse(&text)
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(v: &serde_json::Value) -> gexp_core::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn eval(cfg: &RunConfig, name: &str, slices: &Option<PathBuf>) -> gexp_core::Result<()> {
    let spec = cfg.gspec()?;
    let payoff = Payoff::parse(name)?;
    let sol = solve_g_heat_1d(&payoff, cfg.grid.horizon, &spec, &cfg.pde)?;
    if let Some(p) = slices {
        sol.write_csv(BufWriter::new(File::create(p)?))?;
    }
    print_json(&json!({
        "schema_version": gexp_core::upper::SCHEMA_VERSION,
        "payoff": name,
        "T": cfg.grid.horizon,
        "value": sol.value(),
        "grid": {
            "nodes": sol.xs().len(),
            "dx": sol.dx(),
            "dt": sol.dt(),
            "time_steps": sol.time_steps(),
            "half_width": sol.xs().last().copied().unwrap_or(0.0),
        },
        "cfl": sol.cfl_ratio(),
        "boundary_check": {
            "enabled": cfg.pde.boundary_check,
            "influence": sol.boundary_influence(),
            "tolerance": cfg.pde.tolerance,
        },
    }))
}

fn simulate(
    cfg: &RunConfig,
    control: &str,
    format: Format,
    output: &Option<PathBuf>,
) -> gexp_core::Result<()> {
    let spec = cfg.gspec()?;
    let control = VolControl::parse(control, &spec)?;
    let grid = cfg.time_grid()?;
    // a requested control outside the band is a usage error, not a tripped guard
    control
        .validate(&spec, &grid)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let bundle = simulate_bundle(&spec, &control, &grid, cfg.mc.n_paths, cfg.mc.seed)?;
    let mut out = sink(output)?;
    match format {
        Format::Csv => bundle.write_csv(&mut out)?,
        Format::Binary => bundle.write_binary(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn estimate(
    cfg: &RunConfig,
    functional: &str,
    lower: bool,
    feedback: bool,
    controls_csv: &Option<PathBuf>,
) -> gexp_core::Result<()> {
    let spec = cfg.gspec()?;
    let grid = cfg.time_grid()?;
    let (f, payoff) = match functional {
        "qv" => (Functional::terminal_qv(), None),
        "b" => (Functional::terminal_b(), None),
        name => {
            let p = Payoff::parse(name)?;
            (Functional::terminal_payoff(p.clone()), Some(p))
        }
    };
    let lattice = match (feedback, payoff) {
        (true, Some(p)) => {
            let target = if lower {
                Payoff::Scaled(-1.0, Box::new(p))
            } else {
                p
            };
            Some(Arc::new(solve_g_heat_1d(
                &target,
                grid.horizon(),
                &spec,
                &cfg.pde,
            )?))
        }
        (true, None) => {
            return Err(Error::InvalidArgument(
                "--feedback needs a payoff functional".into(),
            ))
        }
        _ => None,
    };
    let family = default_family(&spec, &grid, lattice);
    let setup = McSetup {
        spec,
        grid,
        n_paths: cfg.mc.n_paths,
        seed: cfg.mc.seed,
    };
    let samples = sample_family(&f, &family, &setup)?;
    let est = if lower {
        samples.lower(0)
    } else {
        samples.upper(0)
    };
    if let Some(p) = controls_csv {
        est.write_control_csv(BufWriter::new(File::create(p)?))?;
    }
    est.write_json(io::stdout().lock())
}

fn lab(cfg: &RunConfig, id: &str) -> gexp_core::Result<bool> {
    let ids: Vec<LabId> = if id == "all" {
        LabId::ALL.to_vec()
    } else {
        vec![id.parse()?]
    };
    let opts = LabOptions::from_config(cfg)?;
    let text = cfg.to_toml();
    let mut all_pass = true;
    for id in ids {
        let outcome = run_lab(id, &opts)?;
        let dir = output_dir(&cfg.output.dir, id, cfg.mc.seed);
        write_outcome(&dir, &outcome, &text)?;
        let v = &outcome.verdict;
        eprintln!(
            "{} {} ({:.2}s) -> {}",
            if v.pass { "PASS" } else { "FAIL" },
            id,
            v.runtime_secs,
            dir.display()
        );
        for c in v.failures() {
            eprintln!(
                "  failed: {}: measured {} vs bound {} (tolerance {})",
                c.name,
                c.measured,
                c.bound,
                c.tolerance()
            );
        }
        all_pass &= v.pass;
    }
    Ok(all_pass)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical_guard() {
        EXIT_NUMERICAL
    } else {
        match e {
            Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::OffGrid { .. }
            | Error::EmptyFamily => EXIT_CONFIG,
            _ => 1,
        }
    }
}

fn run(cli: &Cli) -> gexp_core::Result<bool> {
    let cfg = effective_config(cli)?;
    if cli.emit_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::Eval { payoff, slices } => eval(&cfg, payoff, slices).map(|_| true),
        Command::Simulate {
            control,
            format,
            output,
        } => simulate(&cfg, control, *format, output).map(|_| true),
        Command::Estimate {
            functional,
            lower,
            feedback,
            controls_csv,
        } => estimate(&cfg, functional, *lower, *feedback, controls_csv).map(|_| true),
        Command::Lab(args) => lab(&cfg, &args.id),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_LAB_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
