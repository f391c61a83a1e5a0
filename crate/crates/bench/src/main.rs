use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dyndepth_bench::config::{ExperimentConfig, OutputFormat, Overrides, StrategyKind};
use dyndepth_bench::prompts::load_prompts;
use dyndepth_bench::{parse_grid, run_experiment, sweep, SweepParam, Table};
use dyndepth_core::make_toy_pair;

#[derive(Parser)]
#[command(
    name = "dyndepth",
    version,
    about = "Compare speculative drafting strategies on toy models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy over the prompt set
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Add measured milliseconds per target call (not reproducible)
        #[arg(long)]
        timing: bool,
    },
    /// Vary one parameter over a grid, one row per grid point
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; for schedules, `;`-separated step lists
        /// (`none` and `all` allowed)
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Strategy to sweep (default: eagle2 for width, ddd otherwise)
        #[arg(long)]
        strategy: Option<StrategyKind>,
        #[arg(long)]
        timing: bool,
    },
    /// Draft one cycle for a prompt and print the tree
    DumpTree {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "ddd")]
        strategy: StrategyKind,
        #[arg(long, default_value_t = 0)]
        prompt_index: usize,
        /// Print the outcome as JSON instead of an indented tree
        #[arg(long)]
        json: bool,
    },
}

fn render(table: &Table, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Text => Ok(table.to_text()),
    }
}

fn emit(config: &ExperimentConfig, text: &str) -> Result<()> {
    match &config.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { overrides, timing } => {
            let config = overrides.resolve()?;
            let report = run_experiment(&config)?;
            emit(&config, &render(&report.table(timing), config.format)?)?;
            for f in report.failures() {
                eprintln!(
                    "lossless check failed: strategy {} prompt {}",
                    f.strategy, f.prompt
                );
            }
            Ok(report.all_lossless())
        }
        Command::Sweep {
            overrides,
            param,
            grid,
            strategy,
            timing,
        } => {
            let config = overrides.resolve()?;
            let grid = parse_grid(param, &grid, config.max_steps)?;
            let table = sweep(&config, param, &grid, strategy)?;
            emit(&config, &render(&table.table(timing), config.format)?)?;
            for r in table.rows.iter().filter(|r| !r.row.all_lossless()) {
                eprintln!("lossless check failed at {param} = {}", r.value);
            }
            Ok(table.all_lossless())
        }
        Command::DumpTree {
            overrides,
            strategy,
            prompt_index,
            json,
        } => {
            let config = overrides.resolve()?;
            let prompts = load_prompts(&config)?;
            let prompt = prompts.get(prompt_index).with_context(|| {
                format!(
                    "prompt index {prompt_index} out of range ({} prompts)",
                    prompts.len()
                )
            })?;
            let (_, draft) = make_toy_pair(&config.model_spec())?;
            let outcome = config.strategy(strategy).draft(prompt, &draft)?;
            let text = if json {
                serde_json::to_string_pretty(&outcome)? + "\n"
            } else {
                let mut s = format!(
                    "strategy: {strategy}\nsteps executed: {}\n",
                    outcome.steps_executed
                );
                for c in &outcome.heuristic_checks {
                    s += &format!(
                        "check at step {}: H = {:.6} -> {}\n",
                        c.step,
                        c.value,
                        if c.continued { "continue" } else { "stop" }
                    );
                }
                s + &outcome.tree.to_text()
            };
            emit(&config, &text)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
