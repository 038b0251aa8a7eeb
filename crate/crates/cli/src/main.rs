use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use blender_forge_cli::{parse_override, run, Command, RunConfig};

/// Blender certification for heterodimensional cycles.
#[derive(Parser, Debug)]
#[command(name = "blender-forge", version)]
struct Cli {
    command: Command,
    /// Spec document: {"cycle", "moduli", "params"}.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Artifact path; `.csv` writes the command's table when it has one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a document entry, e.g. `params.search.eps=1e-4`.
    #[arg(long = "set", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = run(&RunConfig {
        command: cli.command,
        spec_path: cli.spec,
        overrides: cli.overrides,
        seed: cli.seed,
        out_path: cli.out,
    });
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(outcome.json.as_bytes());
    std::process::exit(outcome.exit_code);
}
