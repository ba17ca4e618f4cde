//! `mquant`: batch front end for the worked examples, quantisation and
//! discrete (martingale) optimal transport.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use martingale_quant::experiment::{self, ExampleRun, UniformInput};
use martingale_quant::lp::LpError;
use martingale_quant::mot::{self, fmt_real, MotError, MotOutcome};
use martingale_quant::quantise::{self, QuantiseError};
use martingale_quant::{couplings, CostFunction, DiscreteCoupling, DiscreteMeasure, Execution, Partition};

#[derive(Parser, Debug)]
#[command(name = "mquant", version, about = "Martingale quantisation and discrete MOT")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomised steps (Lloyd initialisation in example 2).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Quadrature nodes (per axis in two dimensions) for the examples.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run worked example 1, 2 or 3 and write values.csv and heatmap.csv.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Partition sizes n, comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Input transport for example 1.
        #[arg(long, value_enum, default_value_t = InputKind::Left)]
        input: InputKind,
        /// Cost, `power:RHO` or `power:RHO:percoord`.
        #[arg(long)]
        cost: Option<CostFunction>,
    },
    /// Barycentric quantisation of a coupling along two partitions.
    Quantise {
        #[arg(long)]
        coupling: PathBuf,
        /// JSON object {"pi1": partition, "pi2": partition}.
        #[arg(long)]
        partitions: PathBuf,
    },
    /// Martingale optimal transport between two discrete measures.
    Mot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value = "power:2")]
        cost: CostFunction,
    },
    /// Optimal transport between two discrete measures.
    Ot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value = "power:2")]
        cost: CostFunction,
    },
    /// Exit 0 when mu ≤cx nu (writing a martingale witness), 3 otherwise.
    CheckOrder {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InputKind {
    Left,
    Right,
    Optimal,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: at {pointer}: {message}")]
    Schema { path: PathBuf, pointer: String, message: String },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Order(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Schema { .. } | CliError::Input(_) => 2,
            CliError::Order(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<MotError> for CliError {
    fn from(e: MotError) -> Self {
        match e {
            MotError::Lp(LpError::Numerical(_) | LpError::IterationLimit(_)) | MotError::UnexpectedStatus(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<QuantiseError> for CliError {
    fn from(e: QuantiseError) -> Self {
        MotError::from(e).into()
    }
}

impl From<martingale_quant::MeasureError> for CliError {
    fn from(e: martingale_quant::MeasureError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionsFile {
    pi1: Partition,
    pi2: Partition,
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => write!(s, "/{index}").unwrap(),
            Segment::Map { key } => write!(s, "/{}", key.replace('~', "~0").replace('/', "~1")).unwrap(),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })
}

/// Output files, written together once a command has finished.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: &str, contents: String) -> PathBuf {
        self.files.push((name.to_string(), contents));
        self.dir.join(name)
    }

    fn add_json(&mut self, name: &str, value: &serde_json::Value) -> PathBuf {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable");
        text.push('\n');
        self.add(name, text)
    }

    fn write(self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|source| CliError::Io { path: self.dir.clone(), source })?;
        for (name, contents) in self.files {
            let path = self.dir.join(name);
            fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        }
        Ok(())
    }
}

fn values_csv(run: &ExampleRun) -> String {
    let mut s = String::from("n,P_n,bound_mu,bound_nu,E_pitilde_c\n");
    for r in &run.table.rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.n,
            fmt_real(r.p_n),
            fmt_real(r.bound_mu),
            fmt_real(r.bound_nu),
            fmt_real(r.e_pitilde_c)
        )
        .unwrap();
    }
    s
}

fn cmd_example(
    cli: &Cli,
    which: u8,
    levels: Option<&[usize]>,
    input: InputKind,
    cost: Option<CostFunction>,
) -> Result<(), CliError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let run = match which {
        1 => {
            let input = match input {
                InputKind::Left => UniformInput::LeftCurtain,
                InputKind::Right => UniformInput::RightCurtain,
                InputKind::Optimal => UniformInput::Optimal,
            };
            experiment::example1(
                input,
                cli.grid.unwrap_or(couplings::DEFAULT_NODES_1D),
                levels.unwrap_or(&experiment::EXAMPLE1_LEVELS),
                &cost.unwrap_or_else(experiment::default_cost),
                exec,
            )?
        }
        2 => experiment::example2(
            cli.grid.unwrap_or(couplings::DEFAULT_NODES_1D),
            experiment::EXAMPLE2_Z_NODES,
            levels.unwrap_or(&experiment::EXAMPLE2_LEVELS),
            &cost.unwrap_or_else(experiment::default_cost),
            cli.seed,
            exec,
        )?,
        _ => experiment::example3(
            cli.grid.unwrap_or(couplings::DEFAULT_NODES_2D),
            levels.unwrap_or(&experiment::EXAMPLE3_LEVELS),
            &cost.unwrap_or_else(experiment::default_cost_2d),
            exec,
        )?,
    };
    let optimiser = run.final_optimiser().ok_or_else(|| CliError::Input("no levels given".into()))?;
    let heatmap = if which == 3 {
        experiment::projection_histogram_csv(optimiser, experiment::PROJECTION_BINS)
    } else {
        experiment::heatmap_csv(optimiser)
    };

    let mut out = Outputs::new(&cli.out);
    let values = out.add("values.csv", values_csv(&run));
    out.add("stability.csv", run.table.to_csv());
    out.add("heatmap.csv", heatmap);
    out.add_json("optimiser.json", &json!(optimiser));
    print!("{}", values_csv(&run));
    if !run.table.all_hold() {
        log::warn!("P_n exceeds E[c] at some level");
    }
    out.write()?;
    eprintln!("wrote {}", values.display());
    Ok(())
}

fn cmd_quantise(cli: &Cli, coupling: &Path, partitions: &Path) -> Result<(), CliError> {
    let pi: DiscreteCoupling = read_json(coupling)?;
    let parts: PartitionsFile = read_json(partitions)?;
    let q = quantise::barycentric_quantise(&pi, &parts.pi1, &parts.pi2)?;
    let mut out = Outputs::new(&cli.out);
    let path = out.add_json(
        "quantised.json",
        &json!({
            "mu_n": q.mu_n,
            "nu_n": q.nu_n,
            "coupling_n": q.coupling_n,
            "bound_mu": q.bound_mu,
            "bound_nu": q.bound_nu,
        }),
    );
    out.write()?;
    println!("{} x {} atoms, written to {}", q.mu_n.len(), q.nu_n.len(), path.display());
    Ok(())
}

fn cmd_mot(cli: &Cli, mu: &Path, nu: &Path, cost: &CostFunction) -> Result<(), CliError> {
    let mu: DiscreteMeasure = read_json(mu)?;
    let nu: DiscreteMeasure = read_json(nu)?;
    match mot::solve_discrete_mot(&mu, &nu, cost)? {
        MotOutcome::Solved { value, coupling, .. } => {
            let mut out = Outputs::new(&cli.out);
            out.add_json("mot.json", &json!({ "value": value, "coupling": coupling }));
            out.write()?;
            println!("{}", fmt_real(value));
            Ok(())
        }
        MotOutcome::InfeasibleOrder => Err(CliError::Order("mu is not below nu in convex order".into())),
    }
}

fn cmd_ot(cli: &Cli, mu: &Path, nu: &Path, cost: &CostFunction) -> Result<(), CliError> {
    let mu: DiscreteMeasure = read_json(mu)?;
    let nu: DiscreteMeasure = read_json(nu)?;
    let (value, coupling) = mot::solve_discrete_ot(&mu, &nu, cost)?;
    let mut out = Outputs::new(&cli.out);
    out.add_json("ot.json", &json!({ "value": value, "coupling": coupling }));
    out.write()?;
    println!("{}", fmt_real(value));
    Ok(())
}

fn cmd_check_order(cli: &Cli, mu: &Path, nu: &Path) -> Result<(), CliError> {
    let mu: DiscreteMeasure = read_json(mu)?;
    let nu: DiscreteMeasure = read_json(nu)?;
    match mot::check_convex_order(&mu, &nu)? {
        (true, Some(witness)) => {
            let mut out = Outputs::new(&cli.out);
            let path = out.add_json("witness.json", &json!(witness));
            out.write()?;
            println!("{}", path.display());
            Ok(())
        }
        _ => Err(CliError::Order("mu is not below nu in convex order".into())),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Example { which, levels, input, cost } => cmd_example(cli, *which, levels.as_deref(), *input, *cost),
        Command::Quantise { coupling, partitions } => cmd_quantise(cli, coupling, partitions),
        Command::Mot { mu, nu, cost } => cmd_mot(cli, mu, nu, cost),
        Command::Ot { mu, nu, cost } => cmd_ot(cli, mu, nu, cost),
        Command::CheckOrder { mu, nu } => cmd_check_order(cli, mu, nu),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mquant: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
