//! `ris-uav`: runs simulations and sweeps of the RIS-aided UAV downlink and
//! writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
//! solver error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ris_uav::output::write_campaign;
use ris_uav::pipeline::{simulate, sweep, CampaignResult, SchemeId, SweepParam};
use ris_uav::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ris-uav", version, about = "Hybrid offline-online design of an RIS-aided UAV downlink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected schemes on one scenario.
    Simulate(RunArgs),
    /// Run the selected schemes over a list of parameter values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Swept parameter: beta_db or T_seconds.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. -5,0,5,10.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
    /// Run every scheme once and report rates with wall-clock time.
    Benchmark(RunArgs),
    /// Load and check a configuration without running anything.
    Validate(ConfigArgs),
    /// Print the configuration of a preset (the reference parameter set by default).
    ExportDefaultConfig(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Base parameter set: paper or desk.
    #[arg(long, default_value = "paper")]
    preset: String,
    /// Config file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override of the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated scheme names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "hybrid")]
    schemes: Vec<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::UnknownScheme(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<ScenarioConfig, Failure> {
    let base = ScenarioConfig::preset(&args.preset)?;
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path, base)?,
        None => base,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_schemes(names: &[String]) -> Result<Vec<SchemeId>, Failure> {
    if names.iter().any(|n| n == "all") {
        return Ok(SchemeId::ALL.to_vec());
    }
    let mut out: Vec<SchemeId> = Vec::new();
    for n in names {
        let id: SchemeId = n.trim().parse()?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(Failure::Config("config key `schemes`: no scheme selected".into()));
    }
    Ok(out)
}

fn summary(campaign: &CampaignResult, files: &[PathBuf]) -> String {
    let mut s = String::new();
    let label = campaign.param.map_or("", |p| p.as_str());
    let _ = writeln!(s, "{:<22} {:>10} {:>10} {:>10}", "scheme", label, "mean_rate", "std_err");
    for &scheme in &campaign.schemes {
        for cell in &campaign.cells {
            let value = cell.value.map(|v| v.to_string()).unwrap_or_default();
            match cell.runs.iter().find(|r| r.scheme == scheme) {
                Some(r) => {
                    let _ = writeln!(
                        s,
                        "{:<22} {:>10} {:>10.4} {:>10.4}",
                        scheme.as_str(),
                        value,
                        r.eval.mean_rate,
                        r.eval.std_error
                    );
                }
                None => {
                    let _ = writeln!(s, "{:<22} {:>10} {:>10} {:>10}", scheme.as_str(), value, "-", "-");
                }
            }
        }
    }
    for cell in &campaign.cells {
        if let Some(e) = &cell.error {
            let _ = writeln!(s, "skipped {label} = {}: {e}", cell.value.unwrap_or(f64::NAN));
        }
    }
    if let Some(dir) = files.first().and_then(|f| f.parent()) {
        let _ = writeln!(s, "wrote {} files to {}", files.len(), dir.display());
    }
    s
}

fn emit(dir: &Path, cfg: &ScenarioConfig, campaign: &CampaignResult) -> Result<(), Failure> {
    let files = write_campaign(dir, cfg, campaign)
        .map_err(|e| Failure::Runtime(format!("writing artifacts to {}: {e}", dir.display())))?;
    print!("{}", summary(campaign, &files));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args.config)?;
            let schemes = parse_schemes(&args.schemes)?;
            let campaign = simulate(&cfg, &schemes)?;
            emit(&args.out_dir, &cfg, &campaign)
        }
        Command::Sweep { run, param, values } => {
            let cfg = load_config(&run.config)?;
            let schemes = parse_schemes(&run.schemes)?;
            let param: SweepParam = param.parse()?;
            let campaign = sweep(&cfg, param, &values, &schemes)?;
            emit(&run.out_dir, &cfg, &campaign)
        }
        Command::Benchmark(args) => {
            let cfg = load_config(&args.config)?;
            let mut rows = Vec::new();
            for scheme in SchemeId::ALL {
                let start = Instant::now();
                let c = simulate(&cfg, &[scheme])?;
                rows.push((scheme, c, start.elapsed().as_secs_f64()));
            }
            println!("{:<22} {:>10} {:>10} {:>10}", "scheme", "mean_rate", "std_err", "seconds");
            for (scheme, c, secs) in &rows {
                let e = &c.cells[0].runs[0].eval;
                println!("{:<22} {:>10.4} {:>10.4} {:>10.2}", scheme.as_str(), e.mean_rate, e.std_error, secs);
            }
            let merged = CampaignResult {
                param: None,
                schemes: SchemeId::ALL.to_vec(),
                cells: vec![ris_uav::pipeline::SweepCell {
                    value: None,
                    runs: rows.into_iter().map(|(_, mut c, _)| c.cells[0].runs.remove(0)).collect(),
                    error: None,
                }],
                seed: cfg.seed,
                wall_clock_s: 0.0,
            };
            write_campaign(&args.out_dir, &cfg, &merged)
                .map_err(|e| Failure::Runtime(format!("writing artifacts to {}: {e}", args.out_dir.display())))?;
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = load_config(&args)?;
            println!(
                "ok: K = {}, M = {}, N_t = {}, N = {}, I = {}, T = {} s, step limit {} m",
                cfg.num_users(),
                cfg.num_elements(),
                cfg.n_t,
                cfg.n_slots,
                cfg.batch_size,
                cfg.horizon(),
                cfg.step_max()
            );
            Ok(())
        }
        Command::ExportDefaultConfig(args) => {
            let cfg = load_config(&args)?;
            print!("{}", cfg.to_config_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
