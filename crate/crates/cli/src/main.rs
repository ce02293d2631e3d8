mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridflex_core::harness::{
    compare_cases, derive_feeder_heads, generate_synthetic_network, run_case, CaseId, CaseInputs, CaseReport,
    HarnessError,
};
use gridflex_core::timeseries::{load_feeder_heads, load_measurements, write_series};
use gridflex_core::{MeasurementSeries, NetworkError, NetworkModel, RadialNetwork};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gridflex", version, about = "Flexibility market case studies on radial MV networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a network file describes a valid radial network.
    Validate { network: PathBuf },
    /// Generate a synthetic network with one day of measurements.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        feeders: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured cases and scenarios and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Tabulate reports of one scenario against its Case 0 report.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Code {
    Validation = 1,
    Input = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct Failure {
    code: Code,
    message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: Code::Input,
            message: message.into(),
        }
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        let code = match e {
            NetworkError::Io(_) | NetworkError::Parse(_) => Code::Input,
            _ => Code::Validation,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Network(e) => e.into(),
            HarnessError::Step { .. } => Failure {
                code: Code::Numerical,
                message: e.to_string(),
            },
            e => Failure::input(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn load_network(path: &Path) -> Result<RadialNetwork, Failure> {
    Ok(NetworkModel::load(path)?.validate_radial()?)
}

fn open(path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path).map_err(|e| io_failure(path, e))
}

fn series_document(series: &[MeasurementSeries], id_column: &str) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write_series(&mut buf, series, id_column).map_err(|e| Failure::input(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let net = load_network(path)?;
    let feeders = net.feeder_partition();
    println!(
        "ok: {} nodes, {} lines, {} feeders, fingerprint {}",
        net.nodes().len(),
        net.lines().len(),
        feeders.feeders().len(),
        net.fingerprint()
    );
    Ok(())
}

fn cmd_gen(nodes: usize, feeders: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let case = generate_synthetic_network(nodes, feeders, seed)?;
    let radial = case.network.validate_radial()?;
    let heads = derive_feeder_heads(&radial, &case.measurements)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    write(&out.join("network.toml"), &case.network.to_toml())?;
    write(&out.join("measurements.csv"), &series_document(&case.measurements, "node_id")?)?;
    write(&out.join("feeder_heads.csv"), &series_document(&heads, "feeder_id")?)?;
    println!(
        "wrote {} nodes, {} feeders, {} steps to {}",
        nodes,
        feeders,
        case.measurements.first().map_or(0, |s| s.len()),
        out.display()
    );
    Ok(())
}

fn cmd_run(config_path: &Path, out: Option<&Path>, jobs: usize) -> Result<(), Failure> {
    let config = RunConfig::load(config_path)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Failure::input("no output directory: pass --out or set `output_dir`"))?;
    fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;

    let mut choices = Vec::new();
    let (network, truth) = match (&config.network, &config.measurements) {
        (Some(net_path), Some(meas_path)) => {
            let network = load_network(net_path)?;
            let truth = load_measurements(open(meas_path)?).map_err(|e| Failure::input(e.to_string()))?;
            (network, truth)
        }
        _ => {
            let spec = config.synthetic.expect("checked at load");
            let seed = config.seed.expect("checked at load");
            let case = generate_synthetic_network(spec.nodes, spec.feeders, seed)?;
            choices.push(format!(
                "network: synthetic, {} nodes, {} feeders, seed {seed}",
                spec.nodes, spec.feeders
            ));
            write(&out.join("network.toml"), &case.network.to_toml())?;
            write(&out.join("measurements.csv"), &series_document(&case.measurements, "node_id")?)?;
            (case.network.validate_radial()?, case.measurements)
        }
    };
    let heads = match &config.feeder_heads {
        Some(path) => load_feeder_heads(open(path)?).map_err(|e| Failure::input(e.to_string()))?,
        None => {
            choices.push("feeder heads: sending-end flows of a power flow on the true loads".into());
            let heads = derive_feeder_heads(&network, &truth)?;
            write(&out.join("feeder_heads.csv"), &series_document(&heads, "feeder_id")?)?;
            heads
        }
    };
    let inputs = CaseInputs {
        network: &network,
        true_series: &truth,
        head_series: &heads,
        choices: &choices,
    };

    let study = config.study();
    let mut scenarios = config.scenarios.clone();
    scenarios.sort();
    scenarios.dedup();
    let mut cases = config.cases.clone();
    cases.sort();
    cases.dedup();
    for &scenario in &scenarios {
        let mut reports: Vec<CaseReport> = Vec::new();
        for &case in &cases {
            let mut report = run_case(&study.case(case, scenario), &inputs, jobs)?;
            if let Some(reference) = reports.iter().find(|r| r.header.case_id == CaseId::NoMarket) {
                report.set_reference(reference)?;
            }
            let stem = format!("case{}_scenario{}", case as u8, scenario as u8);
            write(&out.join(format!("{stem}.json")), &report.to_json())?;
            write(&out.join(format!("{stem}_timeseries.csv")), &report.time_series_csv())?;
            reports.push(report);
        }
        if cases.contains(&CaseId::NoMarket) {
            let table = compare_cases(&reports)?;
            let stem = format!("comparison_scenario{}", scenario as u8);
            write(&out.join(format!("{stem}.txt")), &table.to_text())?;
            write(&out.join(format!("{stem}.csv")), &table.to_csv())?;
            print!("{}", table.to_text());
        }
    }
    Ok(())
}

fn cmd_compare(paths: &[PathBuf]) -> Result<(), Failure> {
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            CaseReport::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    print!("{}", compare_cases(&reports)?.to_text());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { network } => cmd_validate(network),
        Command::Gen {
            nodes,
            feeders,
            seed,
            out,
        } => cmd_gen(*nodes, *feeders, *seed, out),
        Command::Run { config, out, jobs } => cmd_run(config, out.as_deref(), *jobs),
        Command::Compare { reports } => cmd_compare(reports),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
