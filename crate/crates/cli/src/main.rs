use std::path::PathBuf;
use std::process::ExitCode;

use bilstab_cli::check::{format_table, run_checks};
use bilstab_cli::run::{default_out, summary_line};
use bilstab_cli::scenarios::CATALOG;
use bilstab_cli::{run_scenario, sweep, CliResult, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bilstab",
    version,
    about = "Feedback stabilization experiments for bilinear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scenario catalog with parameters and defaults.
    List,
    /// Run one scenario and write trajectory.csv and manifest.json.
    Run(RunArgs),
    /// Run a scenario once per value of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One of r, lambda, mu, rho, T_target, x0_scale.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `-1,0,1`.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
    },
    /// Run the lemma oracles and assumption verifiers.
    Check {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (overrides the one in --config).
    #[arg(long)]
    scenario: Option<String>,
    /// TOML file with [scenario], [params] and [sim] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter or sim option override, e.g. `mu=0.3` or `sim.horizon=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $BILSTAB_OUT/<scenario>, else runs/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => ScenarioConfig::new(name),
        (None, None) => {
            return Err(bilstab_cli::CliError::Validation {
                field: "scenario".into(),
                reason: "pass --scenario NAME or --config FILE".into(),
            })
        }
    };
    if let Some(name) = &args.scenario {
        cfg.scenario = name.clone();
    }
    cfg.info()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn parse_values(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse().map_err(|_| bilstab_cli::CliError::Validation {
                field: "values".into(),
                reason: format!("`{v}` is not a number"),
            })
        })
        .collect()
}

fn main_inner(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::List => {
            for s in CATALOG {
                println!("{:<22} {}", s.name, s.summary);
                for p in s.params {
                    println!("    {:<12} = {:<10} {}", p.key, p.default, p.help);
                }
            }
            Ok(true)
        }
        Command::Run(args) => {
            let cfg = load(&args)?;
            let m = run_scenario(&cfg)?;
            println!("{}", summary_line(&m));
            Ok(true)
        }
        Command::Sweep { run, param, values } => {
            let cfg = load(&run)?;
            let values = parse_values(&values)?;
            let out = cfg
                .out
                .clone()
                .unwrap_or_else(|| default_out(cfg.info().map(|i| i.name).unwrap_or("sweep")));
            let rows = sweep(&cfg, &param, &values, &out)?;
            for r in rows {
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
                println!(
                    "{param}={} settling={} rate={} max_zeta={} {}",
                    r.value,
                    fmt(r.settling_time),
                    fmt(r.fitted_rate),
                    fmt(r.max_zeta),
                    if r.all_pass { "PASS" } else { "FAIL" }
                );
            }
            println!("summary: {}", out.join(bilstab_cli::run::SUMMARY_FILE).display());
            Ok(true)
        }
        Command::Check { seed } => {
            let lines = run_checks(seed)?;
            print!("{}", format_table(&lines));
            Ok(lines.iter().all(|l| l.pass))
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
