use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dwecho_cli::config::THREADS_ENV;
use dwecho_cli::{
    cmd_evaluate, cmd_reconstruct, cmd_simulate, cmd_track, cmd_train, CliError, EvalInput, ExperimentConfig, Method,
    Split,
};

#[derive(Parser)]
#[command(name = "dwecho-cli", version, about = "Diverging-wave echocardiography experiments")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; also read from DWECHO_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory of the command; also read from DWECHO_OUTPUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paired input/reference frames and true motion.
    Simulate,
    /// Train the network on a dataset's train and val splits.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Reconstruct the frames of one split.
    Reconstruct {
        #[arg(long)]
        dataset: PathBuf,
        /// cnn, compound3 or compound_ref.
        #[arg(long)]
        method: Method,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train, val, test or all.
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Track motion between consecutive reconstructed frames.
    Track {
        #[arg(long)]
        recon: PathBuf,
    },
    /// Score reconstructions and tracks.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// name=recon_dir[,track_dir]; repeatable.
        #[arg(long = "method", required = true)]
        methods: Vec<EvalInput>,
        /// Tracks that motion estimates are compared against.
        #[arg(long)]
        reference: Option<EvalInput>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    let threads = cfg.threads.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok());
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Simulate => {
            let m = cmd_simulate(&cfg, &out)?;
            println!("{} sequences written to {}", m.sequences.len(), out.display());
        }
        Command::Train { dataset, resume } => {
            let s = cmd_train(&cfg, &dataset, &out, resume.as_deref())?;
            println!("best epoch {} val loss {:.4e}", s.best_epoch, s.best_val_loss);
        }
        Command::Reconstruct {
            dataset,
            method,
            checkpoint,
            split,
        } => {
            let m = cmd_reconstruct(&cfg, &dataset, method, checkpoint.as_deref(), split, &out)?;
            println!("{} sequences reconstructed into {}", m.sequences.len(), out.display());
        }
        Command::Track { recon } => {
            let m = cmd_track(&cfg, &recon, &out)?;
            println!("{} sequences tracked into {}", m.sequences.len(), out.display());
        }
        Command::Evaluate {
            dataset,
            methods,
            reference,
        } => {
            let s = cmd_evaluate(&cfg, &dataset, &methods, reference.as_ref(), &out)?;
            for m in &s.methods {
                let show = |k: &str| m.mean(k).map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("{}: psnr {} ssim {} mepe {}", m.name, show("psnr_db"), show("ssim"), show("mepe_m"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
