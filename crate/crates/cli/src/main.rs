use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use cayley_cutoff::experiments::{self, Command, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cutoff", version, about = "Random walks on random Cayley graphs of finite Abelian groups")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalues of sampled instances
    Spectrum(Flags),
    /// Exact TV distance, L2 bound and spectral floor over a time grid
    TvCurve(Flags),
    /// Exact d_Z(t_alpha) across replicates, with summary rows
    CutoffProfile(Flags),
    /// Relaxation times against n^{2/k}
    GapScan(Flags),
    /// Entropic times and their asymptotic forms
    Entropic(Flags),
    /// Run the lemma verification suite; exits nonzero on failure
    Verify(Flags),
    /// Exact conductance against the Cheeger bounds (n <= 24)
    Cheeger(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// Flat key = value file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cyclic moduli, e.g. "4,9,25"
    #[arg(long)]
    group: Option<String>,
    /// Group orders for `entropic`, comma separated
    #[arg(long)]
    n: Option<String>,
    /// Generator count (comma list for gap-scan and entropic)
    #[arg(long)]
    k: Option<String>,
    /// undirected | directed
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated alphas
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// auto[:N] | log:LO:HI:N | lin:LO:HI:N | t1,t2,...
    #[arg(long)]
    t_grid: Option<String>,
    /// Run a single verify check
    #[arg(long)]
    only: Option<String>,
    /// Run even when the budget estimate is exceeded
    #[arg(long)]
    force: bool,
    /// Replace a check's tolerance, CHECK=VALUE (testing hook)
    #[arg(long, hide = true, allow_hyphen_values = true)]
    tolerance: Vec<String>,
}

impl Cmd {
    fn split(self) -> (Command, Flags) {
        match self {
            Cmd::Spectrum(f) => (Command::Spectrum, f),
            Cmd::TvCurve(f) => (Command::TvCurve, f),
            Cmd::CutoffProfile(f) => (Command::CutoffProfile, f),
            Cmd::GapScan(f) => (Command::GapScan, f),
            Cmd::Entropic(f) => (Command::Entropic, f),
            Cmd::Verify(f) => (Command::Verify, f),
            Cmd::Cheeger(f) => (Command::Cheeger, f),
        }
    }
}

fn build_config(command: Command, flags: Flags) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(command);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_file_text(&text).with_context(|| format!("in {}", path.display()))?;
        if config.command != command {
            bail!("{} is a `{}` config, not `{command}`", path.display(), config.command);
        }
    }
    let settings = [
        ("group", flags.group),
        ("n", flags.n),
        ("k", flags.k),
        ("model", flags.model),
        ("alpha", flags.alpha),
        ("replicates", flags.replicates),
        ("samples", flags.samples),
        ("seed", flags.seed),
        ("format", flags.format),
        ("t_grid", flags.t_grid),
        ("only", flags.only),
    ];
    for (key, value) in settings {
        if let Some(value) = value {
            config.set(key, &value).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    if let Some(out) = flags.out {
        config.out = Some(out);
    }
    if flags.force {
        config.force = true;
    }
    for t in &flags.tolerance {
        let (check, value) = t.split_once('=').context("--tolerance expects CHECK=VALUE")?;
        config.set(&format!("tolerance.{check}"), value)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (command, flags) = cli.command.split();
    let config = build_config(command, flags)?;
    let output = experiments::run(&config)?;
    if let Some(text) = output.write()? {
        std::io::stdout().lock().write_all(text.as_bytes())?;
    }
    if !output.success {
        eprintln!("cutoff {command}: one or more checks failed");
    }
    Ok(output.success)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
