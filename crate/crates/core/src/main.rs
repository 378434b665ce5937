use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dssr::cli::{cmd_degrade, cmd_eval, cmd_repro, cmd_sr, cmd_synth, cmd_train, format_psnr};
use dssr::config::RunConfig;
use dssr::{Error, Result};

/// Double-sparse multi-frame super resolution.
#[derive(Parser)]
#[command(name = "dssr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic LR stack (y1..yN plus .spec sidecars) from an HR image.
    Degrade {
        hr: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Learn an HR dictionary from a directory of images.
    Train {
        corpus: PathBuf,
        dict_out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Super-resolve a target frame using auxiliary frames.
    Sr {
        target: PathBuf,
        #[arg(long = "aux")]
        aux: Vec<PathBuf>,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-patch, per-half-step trace as TSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// PSNR of an estimate against the original.
    Eval { original: PathBuf, estimate: PathBuf },
    /// Repeat degrade, sr and eval over seeded trials for every method.
    Repro {
        hr: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a procedural dead-leaves test image.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 129)]
        height: usize,
        #[arg(long, default_value_t = 129)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Configuration: an optional key=value file, then per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "n_frames")]
    n_frames: Option<String>,
    #[arg(long = "patch_side")]
    patch_side: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    atoms: Option<String>,
    #[arg(long = "blur_side")]
    blur_side: Option<String>,
    #[arg(long = "blur_sigma")]
    blur_sigma: Option<String>,
    #[arg(long = "noise_sigma")]
    noise_sigma: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "search_radius")]
    search_radius: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "shift_range")]
    shift_range: Option<String>,
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    assembly: Option<String>,
    #[arg(long = "train_eta")]
    train_eta: Option<String>,
    #[arg(long = "train_iters")]
    train_iters: Option<String>,
    #[arg(long = "train_patches")]
    train_patches: Option<String>,
    #[arg(long = "lasso_tol")]
    lasso_tol: Option<String>,
    #[arg(long = "lasso_max_iter")]
    lasso_max_iter: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("k", &self.k),
            ("n_frames", &self.n_frames),
            ("patch_side", &self.patch_side),
            ("stride", &self.stride),
            ("eta", &self.eta),
            ("rounds", &self.rounds),
            ("atoms", &self.atoms),
            ("blur_side", &self.blur_side),
            ("blur_sigma", &self.blur_sigma),
            ("noise_sigma", &self.noise_sigma),
            ("seed", &self.seed),
            ("search_radius", &self.search_radius),
            ("method", &self.method),
            ("shift_range", &self.shift_range),
            ("anchor", &self.anchor),
            ("assembly", &self.assembly),
            ("train_eta", &self.train_eta),
            ("train_iters", &self.train_iters),
            ("train_patches", &self.train_patches),
            ("lasso_tol", &self.lasso_tol),
            ("lasso_max_iter", &self.lasso_max_iter),
            ("threads", &self.threads),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn echo_config(cfg: &RunConfig) {
    for line in cfg.to_string().lines() {
        eprintln!("config {line}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Degrade { hr, out_dir, cfg } => {
            let cfg = cfg.resolve()?;
            echo_config(&cfg);
            for p in cmd_degrade(&hr, &out_dir, &cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Train { corpus, dict_out, cfg } => {
            let cfg = cfg.resolve()?;
            echo_config(&cfg);
            let report = cmd_train(&corpus, &dict_out, &cfg)?;
            for (i, f) in report.objective_history.iter().enumerate() {
                eprintln!("iter {i} objective {f:.6}");
            }
            println!(
                "patches={} final_objective={:.6} mutual_coherence={:.4} damped_steps={}",
                report.n_patches,
                report.objective_history.last().copied().unwrap_or(f64::NAN),
                report.mutual_coherence,
                report.damped_steps
            );
        }
        Command::Sr { target, aux, dict, out, trace, cfg } => {
            let cfg = cfg.resolve()?;
            echo_config(&cfg);
            let summary = cmd_sr(&target, &aux, dict.as_deref(), &out, &cfg, trace.as_deref())?;
            println!("{}", summary.report());
        }
        Command::Eval { original, estimate } => {
            let db = cmd_eval(&original, &estimate)?;
            eprintln!("PSNR {db:.2} dB");
            println!("{}", format_psnr(db));
        }
        Command::Repro { hr, dict, trials, cfg } => {
            let cfg = cfg.resolve()?;
            echo_config(&cfg);
            print!("{}", cmd_repro(&hr, &dict, &cfg, trials)?);
        }
        Command::Synth { out, height, width, seed } => cmd_synth(&out, height, width, seed)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error={} {}", e.category(), one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}
