use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fppga_core::control::{self, ClosedLoop, CouplingTarget, HardwareModel};
use fppga_core::mesh::{self, Mesh, Program};
use fppga_core::netsolve::{self, FrequencyGrid};
use fppga_core::presets;
use fppga_core::router::{self, CostWeights, RouterConfig, RouterError, RoutingRequest};
use fppga_core::{CrosstalkMatrix, DriverConfig, MonitorConfig, OptimizerOptions, PresetConfig, Topology};

#[derive(Parser)]
#[command(name = "fppga", version, about = "Programmable photonic waveguide mesh toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an empty mesh document.
    Gen(GenArgs),
    /// Route a light path between two external ports.
    Route(RouteArgs),
    /// Program a named circuit onto a mesh.
    Preset(PresetArgs),
    /// Sweep the scattering matrix over a frequency grid.
    Simulate(SimulateArgs),
    /// Calibrate one unit's split ratio in closed loop.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// square, triangular or hexagonal
    #[arg(long)]
    topology: Topology,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    /// Unit ids to avoid, e.g. `--block 3 --block 5` or `--block 3,5`.
    #[arg(long, value_delimiter = ',')]
    block: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    loss_weight: f64,
    #[arg(long, default_value_t = 0.0)]
    power_weight: f64,
    #[arg(long, default_value_t = 0.0)]
    hop_weight: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Write the updated program here instead of rewriting `--mesh`.
    #[arg(long)]
    program_out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    /// ring, vernier, hybrid24 or transceiver
    #[arg(long)]
    name: String,
    #[arg(long)]
    mesh: PathBuf,
    /// Ring cell as `row,col`.
    #[arg(long, default_value = "0,0", value_parser = parse_cell)]
    cell: (usize, usize),
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Second vernier cell as `row,col`.
    #[arg(long, value_parser = parse_cell)]
    cell_b: Option<(usize, usize)>,
    #[arg(long)]
    kappa_b: Option<f64>,
    #[arg(long, default_value_t = fppga_core::tbu::DEFAULT_INSERTION_LOSS_DB)]
    loss_db: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Program document; defaults to the program stored in `--mesh`.
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long)]
    f_start: f64,
    #[arg(long)]
    f_stop: f64,
    #[arg(long)]
    points: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    program: Option<PathBuf>,
    /// `tbu=0,input=P0,through=P1,coupled=P3,ratio=0.5`
    #[arg(long)]
    target_spec: String,
    /// Phase driver resolution; omit for an ideal driver.
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Nearest-neighbour thermal crosstalk coefficient.
    #[arg(long)]
    crosstalk: Option<f64>,
    /// Monitor noise standard deviation in amperes.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 500)]
    max_evals: usize,
    /// Starting arm-phase difference in radians.
    #[arg(long, default_value_t = 0.0)]
    initial: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Write the calibrated program here.
    #[arg(long)]
    program_out: Option<PathBuf>,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected `row,col`")?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(r)?, num(c)?))
}

enum Failure {
    Usage(String),
    Domain(&'static str, anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain("error", e.into())
    }
}

fn domain<E: Into<anyhow::Error>>(kind: &'static str) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Domain(kind, e.into())
}

fn read_doc(path: &Path) -> Result<(Mesh, Program), Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    mesh::deserialize(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(domain("document"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_program(mesh_path: &Path, program_path: Option<&Path>) -> Result<(Mesh, Program), Failure> {
    let (mesh, program) = read_doc(mesh_path)?;
    let Some(path) = program_path else {
        return Ok((mesh, program));
    };
    let (other, program) = read_doc(path)?;
    if other != mesh {
        return Err(Failure::Domain(
            "document",
            anyhow!("{} was written for a different mesh than {}", path.display(), mesh_path.display()),
        ));
    }
    Ok((mesh, program))
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let mesh = mesh::generate(a.topology, a.m, a.n).map_err(domain("mesh"))?;
    write_file(&a.output, &mesh::serialize(&mesh, &Program::new()))
}

fn route(a: RouteArgs) -> Result<(), Failure> {
    if a.from == a.to {
        return Err(Failure::Usage(format!("--from and --to name the same port `{}`", a.from)));
    }
    let (mesh, program) = read_doc(&a.mesh)?;
    let port = |s: &str| mesh.resolve_port(s).map_err(domain("port"));
    let (from, to) = (port(&a.from)?, port(&a.to)?);
    let mut blocked: BTreeSet<usize> = a.block.iter().copied().collect();
    blocked.extend(program.used_tbus());
    let request = RoutingRequest::new(from, to).blocking(blocked).with_weights(CostWeights {
        loss_per_db: a.loss_weight,
        power_per_actuator: a.power_weight,
        hop: a.hop_weight,
    });
    let config = RouterConfig {
        insertion_loss_db: program.default_loss_db,
        ..RouterConfig::default()
    };
    let found = router::route(&mesh, &request, &config).map_err(|e| match e {
        RouterError::SameEndpoints(p) => Failure::Usage(format!("--from and --to name the same port {p}")),
        RouterError::NoPath { .. } => Failure::Domain("no_path", e.into()),
        e => Failure::Domain("route", e.into()),
    })?;
    let updated = router::apply_route(&program, &found).map_err(domain("route"))?;
    write_file(&a.output, &found.to_json())?;
    let target = a.program_out.as_deref().unwrap_or(&a.mesh);
    write_file(target, &mesh::serialize(&mesh, &updated))
}

fn preset(a: PresetArgs) -> Result<(), Failure> {
    let (mesh, _) = read_doc(&a.mesh)?;
    let cfg = PresetConfig {
        loss_db: a.loss_db,
        ..PresetConfig::default()
    };
    let result = match a.name.as_str() {
        "ring" => presets::ring_filter(&mesh, a.cell, a.kappa, &cfg),
        "vernier" => {
            let cell_b = a
                .cell_b
                .ok_or_else(|| Failure::Usage("vernier needs --cell-b row,col".into()))?;
            presets::vernier_pair(&mesh, a.cell, cell_b, a.kappa, a.kappa_b.unwrap_or(a.kappa), &cfg)
        }
        "hybrid24" => presets::hybrid_2x4(&mesh, None, &cfg),
        "transceiver" => presets::transceiver_demo(&mesh, a.kappa, &cfg),
        other => {
            return Err(Failure::Usage(format!(
                "unknown preset `{other}` (expected one of {})",
                presets::PRESET_NAMES.join(", ")
            )))
        }
    }
    .map_err(domain("preset"))?;
    write_file(&a.output, &mesh::serialize(&mesh, &result.program))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (mesh, program) = load_program(&a.mesh, a.program.as_deref())?;
    let grid = FrequencyGrid::new(a.f_start, a.f_stop, a.points).map_err(domain("grid"))?;
    let params = Default::default();
    let s = netsolve::sweep(&mesh, &program, &params, &grid).map_err(domain("solve"))?;
    let file = fs::File::create(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    netsolve::write_spectrum_csv(&s, &mesh, BufWriter::new(file))?;
    Ok(())
}

fn parse_target(mesh: &Mesh, spec: &str) -> Result<CouplingTarget, Failure> {
    let mut fields = std::collections::BTreeMap::new();
    for part in spec.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("target field `{part}` is not key=value")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Failure::Usage(format!("--target-spec is missing `{k}`")))
    };
    let port = |k: &str| -> Result<_, Failure> { mesh.resolve_port(get(k)?).map_err(domain("port")) };
    let tbu = get("tbu")?;
    let tbu = tbu
        .trim_start_matches('T')
        .parse()
        .map_err(|_| Failure::Usage(format!("invalid unit `{tbu}`")))?;
    let ratio = get("ratio")?;
    let ratio = ratio
        .parse()
        .map_err(|_| Failure::Usage(format!("invalid ratio `{ratio}`")))?;
    Ok(CouplingTarget {
        tbu,
        input: port("input")?,
        through: port("through")?,
        coupled: port("coupled")?,
        ratio,
    })
}

fn optimize(a: OptimizeArgs) -> Result<(), Failure> {
    let (mesh, program) = load_program(&a.mesh, a.program.as_deref())?;
    let target = parse_target(&mesh, &a.target_spec)?;
    let mut hardware = HardwareModel {
        monitor: MonitorConfig {
            noise_sigma_a: a.noise,
            ..MonitorConfig::default()
        },
        ..HardwareModel::default()
    };
    if let Some(bits) = a.bits {
        hardware.driver = Some(DriverConfig::new(bits).map_err(domain("control"))?);
    }
    let mut lp = ClosedLoop {
        mesh: &mesh,
        program,
        target,
        hardware,
        seed: a.seed,
    };
    if let Some(eps) = a.crosstalk {
        // actuator count must include the target unit, which may still be off
        let n = control::actuator_units(&lp.program_for(0.0)).len() * 2;
        lp.hardware.crosstalk = Some(CrosstalkMatrix::uniform_neighbor(n, eps).map_err(domain("control"))?);
    }
    let options = OptimizerOptions {
        max_evaluations: a.max_evals,
        seed: a.seed,
        ..OptimizerOptions::new(vec![(0.0, PI)])
    };
    let result = lp.run(a.initial, options).map_err(domain("control"))?;
    let file = fs::File::create(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    control::write_trace_csv(&result.trace, BufWriter::new(file))?;
    if let Some(path) = &a.program_out {
        write_file(path, &mesh::serialize(&mesh, &lp.program_for(result.best[0])))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "delta": result.best[0],
            "cost": result.best_cost,
            "evaluations": result.evaluations,
            "converged": result.converged,
        })
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Route(a) => route(a),
        Command::Preset(a) => preset(a),
        Command::Simulate(a) => simulate(a),
        Command::Optimize(a) => optimize(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nUsage: fppga <COMMAND> [OPTIONS]; see `fppga --help`");
            ExitCode::from(1)
        }
        Err(Failure::Domain(kind, e)) => {
            let message = format!("{e:#}");
            eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cell("1,2"), Ok((1, 2)));
        assert!(parse_cell("1").is_err());
        assert!(parse_cell("a,2").is_err());
    }

    #[test]
    fn target_spec_parsing() {
        let mesh = mesh::generate(Topology::Hexagonal, 1, 1).unwrap();
        let t = parse_target(&mesh, "tbu=0,input=P0,through=P1,coupled=P3,ratio=0.25").ok().unwrap();
        assert_eq!(t.tbu, 0);
        assert_eq!(t.ratio, 0.25);
        assert_eq!(t.input, mesh.resolve_port("P0").unwrap());
        assert!(matches!(parse_target(&mesh, "tbu=0,ratio=0.5"), Err(Failure::Usage(_))));
        assert!(matches!(parse_target(&mesh, "tbu=0,input=Q9,through=P1,coupled=P3,ratio=0.5"), Err(Failure::Domain(..))));
    }
}
