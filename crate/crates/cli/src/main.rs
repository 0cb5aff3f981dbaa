use std::path::PathBuf;
use std::process::ExitCode;

use canard_ctl::config::{self, Experiment, Overrides, ResolvedConfig};
use canard_ctl::{batch_exit_code, run_batch, verify, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "canard-ctl", version, about = "Run canard-cycle control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more JSON configs (a file may hold an array of configs).
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Worker threads for batch runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Parent directory; each run writes into <out>/<name>.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override a parameter, e.g. --set eps=0.02 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        /// Loop pattern for vdp-mmo runs.
        #[arg(long)]
        pattern: Option<String>,
    },
    /// Run the invariant suite; exits 0 iff every check passes.
    Verify,
    /// Drive the van der Pol oscillator through a loop pattern.
    Mmo {
        /// e.g. "3L:0.75:0.01,4S:1.25:-0.01*2"
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the registered experiments.
    List,
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn execute(configs: Vec<ResolvedConfig>, out: PathBuf, jobs: usize) -> ExitCode {
    let reports = match run_batch(&configs, &out, jobs) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    for r in &reports {
        match &r.result {
            Ok(msg) => println!("ok    {} -> {} ({msg})", r.name, r.dir.display()),
            Err(e) => eprintln!("fail  {} -> {}: {e}", r.name, r.dir.display()),
        }
    }
    ExitCode::from(batch_exit_code(&reports))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { configs, jobs, out, set, t_end, rtol, atol, pattern } => {
            let params = match Overrides::parse_set(&set) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let ov = Overrides { params, t_end, rel_tol: rtol, abs_tol: atol, pattern };
            let mut resolved = Vec::new();
            for path in &configs {
                let raws = match config::load(path) {
                    Ok(r) => r,
                    Err(e) => return fail(e),
                };
                for raw in raws {
                    match ResolvedConfig::resolve(raw, &ov) {
                        Ok(c) => resolved.push(c),
                        Err(e) => return fail(e),
                    }
                }
            }
            execute(resolved, out, jobs)
        }
        Command::Verify => {
            let results = verify::run_all();
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                println!("{} {}: {} [{:.2} s]", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail, r.seconds);
            }
            println!("{} of {} checks passed", results.len() - failed, results.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Mmo { pattern, eps, out, set } => {
            let mut params = match Overrides::parse_set(&set) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            params.push(("eps".into(), eps));
            let ov = Overrides { params, pattern: Some(pattern), ..Default::default() };
            let raw = config::parse(r#"{"experiment": "vdp-mmo", "name": "mmo"}"#).expect("literal config").remove(0);
            match ResolvedConfig::resolve(raw, &ov) {
                Ok(c) => execute(vec![c], out, 1),
                Err(e) => fail(e),
            }
        }
        Command::List => {
            for e in Experiment::ALL {
                println!("{e}");
            }
            ExitCode::SUCCESS
        }
    }
}
