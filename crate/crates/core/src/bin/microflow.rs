use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use microflow::harness::{self, compare, metrics, sweep, validate, Scenario, SweepAxis};
use microflow::plant::PhysParams;
use microflow::{Error, Result};

#[derive(Parser)]
#[command(name = "microflow", version, about = "Closed-loop flow control simulations for a three-inlet microfluidic chip")]
struct Cli {
    /// Override the scenario RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format for tables and traces.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, solver_log.csv and run.json.
    Run {
        /// Built-in scenario name or path to a JSON scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Use the PI baseline instead of the MPC.
        #[arg(long)]
        pi: bool,
    },
    /// Vary one tuning parameter over a base scenario.
    Sweep {
        #[arg(long, default_value = "steps-distinct")]
        scenario: String,
        /// N, alpha or beta.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        /// Directory for per-run traces.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenarios under MPC and PI and tabulate RMSE per line.
    Compare {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = ["steps-distinct".to_string(), "steps-equal".to_string(), "triangle-capped".to_string()])]
        scenarios: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the reduced linear model with the full plant.
    ValidateModel {
        #[arg(long, default_value_t = 0.1)]
        sample_period: f64,
        /// Directory for the report and the F, G, H matrices.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in scenarios.
    List,
    /// Print a scenario as JSON.
    Show { scenario: String },
}

fn load(name: &str, seed: Option<u64>) -> Result<Scenario> {
    let mut s = harness::load(name)?;
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    let Format::Csv = cli.format;
    match cli.command {
        Command::Run { scenario, out, pi } => {
            let mut s = load(&scenario, cli.seed)?;
            if pi {
                s.controller = harness::ControllerKind::Pi;
            }
            let trace = harness::run_scenario(&s)?;
            let m = metrics::compute(&trace);
            trace.write_dir(&out, &m)?;
            println!("line,rmse_ul_s,response_time_s,overshoot_pct");
            for (i, l) in m.lines.iter().enumerate() {
                let rt = l.response_time.map_or("nan".into(), |t| format!("{t:.2}"));
                println!("{},{:.6},{},{:.3}", i + 1, l.rmse, rt, l.overshoot_pct);
            }
            println!("violations,{}", m.violations());
            if let Some(f) = &trace.fault {
                eprintln!("run aborted at t = {} s: {}", f.time, f.message);
                return Err(Error::Solver(f.message.clone()));
            }
            Ok(())
        }
        Command::Sweep { scenario, axis, values, out } => {
            let base = load(&scenario, cli.seed)?;
            let axis: SweepAxis = axis.parse()?;
            let values = if values.is_empty() { axis.default_values() } else { values };
            let points = sweep::sweep(&base, axis, &values)?;
            let table = sweep::sweep_csv(axis, &points);
            print!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("sweep.csv"), &table)?;
                for p in &points {
                    p.trace.write_dir(&dir.join(format!("{}_{}", axis.as_str(), p.value)), &p.metrics)?;
                }
            }
            fail_on_fault(points.iter().map(|p| &p.trace))
        }
        Command::Compare { scenarios, out } => {
            let list = scenarios.iter().map(|n| load(n, cli.seed)).collect::<Result<Vec<_>>>()?;
            let rows = compare::compare(&list)?;
            let table = compare::compare_csv(&rows);
            print!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("compare.csv"), &table)?;
                for r in &rows {
                    r.trace.write_dir(&dir.join(format!("{}_{}", r.scenario, r.controller.as_str())), &r.metrics)?;
                }
            }
            fail_on_fault(rows.iter().map(|r| &r.trace))
        }
        Command::ValidateModel { sample_period, out } => {
            let params = PhysParams::default();
            let report = validate::validate_model(&params, sample_period)?;
            let text = report.to_text();
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("validation.csv"), &text)?;
                std::fs::write(dir.join("validation.json"), serde_json::to_string_pretty(&report)?)?;
                for (name, csv) in validate::model_matrices(&params, sample_period)? {
                    std::fs::write(dir.join(format!("{name}.csv")), csv)?;
                }
            }
            Ok(())
        }
        Command::Show { scenario } => {
            println!("{}", load(&scenario, cli.seed)?.to_json());
            Ok(())
        }
        Command::List => {
            for n in harness::BUILTIN_NAMES {
                let s = harness::builtin(n)?;
                println!("{n}\t{} s", s.duration_s);
            }
            Ok(())
        }
    }
}

fn fail_on_fault<'a>(traces: impl Iterator<Item = &'a harness::Trace>) -> Result<()> {
    for t in traces {
        if let Some(f) = &t.fault {
            return Err(Error::Solver(format!("{}: {}", t.scenario.name, f.message)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
