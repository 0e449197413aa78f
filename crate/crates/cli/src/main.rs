use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use ura::harness::{reproduce_figure, run, ExperimentConfig, Figure, ResultRecord, Scale};
use ura::ldpc::design_code;
use ura::Error;

/// Unsourced random access over the quasi-static Rayleigh fading MAC.
#[derive(Parser)]
#[command(name = "ura", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Joint-decoder slot error versus Eb/N0.
    SimulateSlot(RunArgs),
    /// T-fold ALOHA frame error versus Eb/N0.
    SimulateFrame(RunArgs),
    /// Projection-decoder achievability bound for one slot.
    BoundFblAch(RunArgs),
    /// Finite-blocklength converse.
    BoundConverse(RunArgs),
    /// Bounds for a user count growing with the block length.
    BoundAsymptotic(RunArgs),
    /// Minimum Eb/N0 of T-fold ALOHA per user count.
    OptimizeAloha(RunArgs),
    /// Crystallized-fading capacity bound.
    BoundShamaiBettesh(RunArgs),
    /// Any experiment, whatever its kind.
    Run(RunArgs),
    /// Regenerate the data files of a figure.
    Figure {
        /// fig1, fig2, figK2, figK3, figK4, fig_asymp1, fig_asymp2 or fig_hard_decision.
        name: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Build a PEG LDPC code and write it as an alist file.
    MakeCode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::Alist { .. } | Error::CodeConstruction(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn report(records: &[ResultRecord]) -> ExitCode {
    for record in records {
        for s in &record.series {
            println!("{}: {} points{}", s.name, s.points.len(), if s.infeasible.is_empty() { String::new() } else { format!(", infeasible at {:?}", s.infeasible) });
        }
    }
    if records.iter().any(ResultRecord::has_infeasible) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn load(args: &RunArgs, kind: Option<&str>) -> ura::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(kind) = kind {
        if cfg.experiment.kind() != kind {
            return Err(Error::Config { key: "kind".into(), message: format!("expected `{kind}`, found `{}`", cfg.experiment.kind()) });
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> ura::Result<ExitCode> {
    let (args, kind) = match command {
        Command::SimulateSlot(a) => (a, Some("simulate-slot")),
        Command::SimulateFrame(a) => (a, Some("simulate-frame")),
        Command::BoundFblAch(a) => (a, Some("bound-fbl-ach")),
        Command::BoundConverse(a) => (a, Some("bound-converse")),
        Command::BoundAsymptotic(a) => (a, Some("bound-asymptotic")),
        Command::OptimizeAloha(a) => (a, Some("optimize-aloha")),
        Command::BoundShamaiBettesh(a) => (a, Some("bound-shamai-bettesh")),
        Command::Run(a) => (a, None),
        Command::Figure { name, scale, seed, out, workers } => {
            let figure: Figure = name.parse()?;
            let scale: Scale = scale.parse()?;
            if scale == Scale::Full {
                eprintln!("note: full scale runs the published trial budgets and takes days of CPU time");
            }
            return Ok(report(&reproduce_figure(figure, scale, seed, &out, workers)?));
        }
        Command::MakeCode { n, k, seed, out } => {
            let h = design_code(n, k, seed)?;
            std::fs::write(&out, h.to_alist())?;
            println!("wrote [{n}, {k}] code to {}", out.display());
            return Ok(ExitCode::SUCCESS);
        }
    };
    let cfg = load(&args, kind)?;
    Ok(report(&[run(&cfg)?]))
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
