use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pwdg::experiment::{
    render_csv, run_with_progress, BcKind, ExperimentConfig, ExperimentError, MeshChoice, Sweep,
};
use pwdg::selftest::run_selftest;

/// PWDG solver for plane-wave scattering by a sound-soft disc, with a
/// truncated Dirichlet-to-Neumann or impedance condition on the outer
/// circle.
#[derive(Parser, Debug)]
#[command(name = "pwdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One solve with the configured parameters.
    Solve(Common),
    /// Vary the DtN truncation order N.
    SweepN {
        #[command(flatten)]
        common: Common,
        /// Comma-separated N values [default: 2,4,...,40]
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// Vary the mesh.
    SweepH {
        #[command(flatten)]
        common: Common,
        /// Comma-separated meshes, `LAYERSxSECTORS` or a target h
        /// [default: 2x26,3x38,4x51]
        #[arg(long, value_delimiter = ',', value_parser = parse_mesh)]
        meshes: Vec<MeshChoice>,
    },
    /// Vary the number of plane-wave directions p.
    SweepP {
        #[command(flatten)]
        common: Common,
        /// Comma-separated p values [default: 5,7,9,11,13]
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// DtN against impedance on each mesh (the base mesh by default).
    CompareBc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', value_parser = parse_mesh)]
        meshes: Vec<MeshChoice>,
    },
    /// Randomised property checks of the solver components.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Settings shared by every solving subcommand. Flags override the
/// values read from `--config`.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with an experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
    /// Scatterer radius a.
    #[arg(long)]
    inner_radius: Option<f64>,
    /// Artificial boundary radius R.
    #[arg(long)]
    outer_radius: Option<f64>,
    /// Incident direction angle in radians.
    #[arg(long)]
    incident_angle: Option<f64>,
    /// Base mesh, `LAYERSxSECTORS` or a target h.
    #[arg(long, value_parser = parse_mesh)]
    mesh: Option<MeshChoice>,
    /// Plane-wave directions per element.
    #[arg(long)]
    p: Option<usize>,
    /// DtN truncation order.
    #[arg(long)]
    n: Option<usize>,
    /// Boundary condition on the outer circle: dtn or impedance.
    #[arg(long, value_parser = parse_bc)]
    bc: Option<BcKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Gauss–Legendre points per edge.
    #[arg(long)]
    edge_points: Option<usize>,
    /// Gauss–Legendre order of the per-element error quadrature.
    #[arg(long)]
    l2_points: Option<usize>,
    /// Modes kept in the reference solutions.
    #[arg(long)]
    exact_order: Option<usize>,
    /// Write the CSV here as well as to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write an SVG error plot here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Single-threaded run with zero timings, for byte-identical output.
    #[arg(long)]
    deterministic: bool,
    /// Suppress per-point progress on stderr.
    #[arg(long)]
    quiet: bool,
}

fn parse_mesh(s: &str) -> Result<MeshChoice, String> {
    if let Some((l, n)) = s.split_once(['x', 'X']) {
        let layers = l.trim().parse().map_err(|_| format!("bad layer count in {s:?}"))?;
        let sectors = n.trim().parse().map_err(|_| format!("bad sector count in {s:?}"))?;
        return Ok(MeshChoice::Structured { layers, sectors });
    }
    let h: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("expected LAYERSxSECTORS or a target h, got {s:?}"))?;
    Ok(MeshChoice::TargetH(h))
}

fn parse_bc(s: &str) -> Result<BcKind, String> {
    match s {
        "dtn" => Ok(BcKind::Dtn),
        "impedance" => Ok(BcKind::Impedance),
        _ => Err(format!("expected dtn or impedance, got {s:?}")),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut c = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut c.problem.k, common.k);
    set(&mut c.problem.inner_radius, common.inner_radius);
    set(&mut c.problem.outer_radius, common.outer_radius);
    set(&mut c.problem.incident_angle, common.incident_angle);
    set(&mut c.flux.alpha, common.alpha);
    set(&mut c.flux.beta, common.beta);
    set(&mut c.flux.delta, common.delta);
    if let Some(m) = common.mesh {
        c.mesh = m;
    }
    if let Some(p) = common.p {
        c.p = p;
    }
    if let Some(n) = common.n {
        c.n = n;
    }
    if let Some(bc) = common.bc {
        c.bc = bc;
    }
    if let Some(v) = common.edge_points {
        c.quadrature.edge_points = v;
    }
    if let Some(v) = common.l2_points {
        c.quadrature.l2_points = v;
    }
    if let Some(v) = common.exact_order {
        c.quadrature.exact_order = v;
    }
    if common.csv.is_some() {
        c.output.csv = common.csv.clone();
    }
    if common.svg.is_some() {
        c.output.svg = common.svg.clone();
    }
    c.deterministic |= common.deterministic;
    Ok(c)
}

/// Chooses the sweep: explicit flag values first, then a matching sweep
/// from the config file, then the built-in default.
fn with_sweep(mut c: ExperimentConfig, command: &Command) -> ExperimentConfig {
    c.sweep = match command {
        Command::Solve(_) => Sweep::Single,
        Command::SweepN { values, .. } => match (&c.sweep, values.is_empty()) {
            (_, false) => Sweep::N(values.clone()),
            (Sweep::N(v), true) => Sweep::N(v.clone()),
            _ => Sweep::N((1..=20).map(|i| 2 * i).collect()),
        },
        Command::SweepH { meshes, .. } => match (&c.sweep, meshes.is_empty()) {
            (_, false) => Sweep::H(meshes.clone()),
            (Sweep::H(v), true) => Sweep::H(v.clone()),
            _ => Sweep::H(
                [(2, 26), (3, 38), (4, 51)]
                    .into_iter()
                    .map(|(layers, sectors)| MeshChoice::Structured { layers, sectors })
                    .collect(),
            ),
        },
        Command::SweepP { values, .. } => match (&c.sweep, values.is_empty()) {
            (_, false) => Sweep::P(values.clone()),
            (Sweep::P(v), true) => Sweep::P(v.clone()),
            _ => Sweep::P(vec![5, 7, 9, 11, 13]),
        },
        Command::CompareBc { meshes, .. } => match (&c.sweep, meshes.is_empty()) {
            (_, false) => Sweep::CompareBc(meshes.clone()),
            (Sweep::CompareBc(v), true) => Sweep::CompareBc(v.clone()),
            _ => Sweep::CompareBc(Vec::new()),
        },
        Command::Selftest { .. } => Sweep::Single,
    };
    c
}

fn solve(command: &Command, common: &Common) -> Result<(), ExperimentError> {
    let config = with_sweep(load_config(common)?, command);
    let total = config.points().len();
    let quiet = common.quiet;
    let rows = run_with_progress(&config, |i, row| {
        if !quiet {
            eprintln!(
                "[{}/{total}] bc={} p={} N={} Nh={} h={:.4} err={:.3e}",
                i + 1,
                row.bc.label(),
                row.p,
                row.n,
                row.n_dofs,
                row.h,
                row.err_vs_exact
            );
        }
    })?;
    print!("{}", render_csv(&config, &rows));
    Ok(())
}

fn report(e: &ExperimentError) {
    match e {
        ExperimentError::DofCap { n_dofs, cap } => eprintln!(
            "error: the system would have {n_dofs} degrees of freedom, above the dense-solver cap of {cap}; \
             use a coarser mesh or smaller p"
        ),
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve(c) => c,
        Command::SweepN { common, .. }
        | Command::SweepH { common, .. }
        | Command::SweepP { common, .. }
        | Command::CompareBc { common, .. } => common,
        Command::Selftest { seed } => {
            let outcomes = run_selftest(*seed);
            let mut ok = true;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                ok &= o.passed;
            }
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(3) };
        }
    };
    match solve(&cli.command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
