//! `fbeta`: train, audit and inspect surrogate F-beta classifiers.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbeta_core::data::{self, generate};
use fbeta_core::diagnostics::{gradcheck_suite, gradient_condition_residual, jensen_gap};
use fbeta_core::experiment::{
    format_number, read_trajectory, run, scatter_from_trajectory, sweep_beta, write_run,
    write_scatter_csv, SweepTable, CONFIG_FILE, RUN_FILES, SCATTER_FILE, TRAJECTORY_FILE,
};
use fbeta_core::{Dataset, Error, LossSpec, Network, RunConfig, SynthSpec};

use args::{parse_loss, DataArgs, TrainingArgs, DEFAULT_LOSS};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "fbeta",
    version,
    about = "Surrogate F-beta loss training and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write config.json, records.csv, scatter.csv,
    /// summary.json, checkpoint.json and trajectory.json into --out
    Train {
        /// JSON run configuration; replaces every inline training flag
        #[arg(long, value_name = "PATH", conflicts_with_all = [
            "loss", "synth", "csv", "hidden", "epochs", "batch_size", "lr", "momentum",
            "weight_decay", "val_fraction", "seed", "betas",
        ])]
        config: Option<PathBuf>,

        /// Loss in canonical text form, e.g. bce, mae, surrogate(beta=2,p=auto),
        /// generalized(beta=1,p=auto,q=0.7), macrosoft(beta=1); append ",balanced"
        /// for inverse-frequency class weights
        #[arg(long, default_value = DEFAULT_LOSS, value_parser = parse_loss)]
        loss: LossSpec,

        #[command(flatten)]
        training: TrainingArgs,

        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Randomized finite-difference audit of every loss gradient; fails if any
    /// relative error exceeds 1e-4
    Gradcheck {
        /// Random trials per loss configuration (20 configurations)
        #[arg(long, default_value_t = 10)]
        trials: usize,

        /// Seed for networks, batches and priors
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Gradient-condition report and Jensen gap of a saved network on a dataset
    Diagnose {
        /// Network checkpoint (checkpoint.json of a run)
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,

        /// Loss whose gradient condition is checked (bce, mae or surrogate);
        /// always evaluated class-balanced
        #[arg(long, default_value = DEFAULT_LOSS, value_parser = parse_loss)]
        loss: LossSpec,

        #[command(flatten)]
        data: DataArgs,

        /// Print the report as JSON instead of a table
        #[arg(long)]
        json: bool,
    },

    /// Recompute scatter rows of a finished run for other betas
    Scatter {
        /// Run directory holding config.json and trajectory.json
        #[arg(long, value_name = "DIR")]
        run: PathBuf,

        /// Betas to score, comma separated [default: the run's eval betas]
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,

        /// Output file [default: <run>/scatter.csv]
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Write a synthetic Gaussian dataset to CSV
    Synth {
        /// Number of rows
        #[arg(long, default_value_t = 2000)]
        n: usize,

        /// Feature dimension
        #[arg(long, default_value_t = 20)]
        dim: usize,

        /// Fraction of positive rows before label noise
        #[arg(long, default_value_t = 0.1)]
        pos: f64,

        /// Distance between the two class means
        #[arg(long, default_value_t = 4.0)]
        sep: f64,

        /// Independent label-flip probability
        #[arg(long, default_value_t = 0.0)]
        noise: f64,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Output CSV file
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },

    /// Train the surrogate loss for each beta and report median final recall,
    /// precision and F-beta on the held-out set
    SweepBeta {
        /// Base loss; its prior and class balancing are kept, beta is swept
        #[arg(long, default_value = DEFAULT_LOSS, value_parser = parse_loss)]
        loss: LossSpec,

        #[command(flatten)]
        training: TrainingArgs,

        /// Seeds per beta (seed, seed+1, ...)
        #[arg(long, default_value_t = 1)]
        repeats: usize,

        /// Output directory for sweep.csv and sweep.json
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Train {
            config,
            loss,
            training,
            out,
        } => {
            let cfg = match config {
                Some(path) => RunConfig::load(path)?,
                None => validated(training.config(loss))?,
            };
            train(&cfg, &out)
        }
        Command::Gradcheck { trials, seed } => gradcheck(trials, seed),
        Command::Diagnose {
            checkpoint,
            loss,
            data,
            json,
        } => diagnose(&checkpoint, loss, &data, json),
        Command::Scatter { run, betas, out } => scatter(&run, betas, out),
        Command::Synth {
            n,
            dim,
            pos,
            sep,
            noise,
            seed,
            out,
        } => synth(
            &SynthSpec {
                dim,
                n,
                positive_fraction: pos,
                mean_separation: sep,
                noise_rate: noise,
                seed,
            },
            &out,
        ),
        Command::SweepBeta {
            loss,
            training,
            repeats,
            out,
        } => {
            if repeats == 0 {
                return Err(Failure::Usage("--repeats must be at least 1".into()));
            }
            let cfg = validated(training.config(loss))?;
            sweep(&cfg, &training.betas, repeats, &out)
        }
    }
}

fn validated(cfg: RunConfig) -> Result<RunConfig, Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn train(cfg: &RunConfig, out_dir: &Path) -> CmdResult {
    let existed = out_dir.exists();
    let result = run(cfg).and_then(|out| {
        write_run(out_dir, cfg, &out)?;
        Ok(out)
    });
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            remove_partial(out_dir, existed);
            return Err(e.into());
        }
    };
    let mut table = String::new();
    let _ = write!(table, "{:>6} {:>12}", "epoch", "loss");
    for b in &cfg.eval_betas {
        let _ = write!(table, " {:>10}", format!("f{b}_val"));
    }
    let _ = writeln!(table, " {:>10}", "acc_val");
    let step = (out.records.len() / 10).max(1);
    for (i, r) in out.records.iter().enumerate() {
        if i % step != 0 && i + 1 != out.records.len() {
            continue;
        }
        let _ = write!(table, "{:>6} {:>12}", r.epoch, format_number(r.loss));
        for v in &r.f_beta_val {
            let _ = write!(table, " {v:>10.4}");
        }
        let _ = writeln!(table, " {:>10.4}", r.acc_val);
    }
    print!("{table}");
    if out.skipped_batches > 0 {
        println!("skipped {} single-class batches", out.skipped_batches);
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn remove_partial(dir: &Path, existed: bool) {
    if !existed {
        let _ = fs::remove_dir_all(dir);
        return;
    }
    for name in RUN_FILES {
        let _ = fs::remove_file(dir.join(name));
    }
}

fn gradcheck(trials: usize, seed: u64) -> CmdResult {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let summaries = gradcheck_suite(trials, seed)?;
    println!("{:<48} {:>7} {:>12}", "loss", "trials", "max_rel_err");
    let mut worst: f64 = 0.0;
    for s in &summaries {
        println!("{:<48} {:>7} {:>12.3e}", s.loss, s.trials, s.max_rel_err);
        worst = worst.max(s.max_rel_err);
    }
    if worst > GRADCHECK_TOLERANCE || worst.is_nan() {
        return Err(Failure::Runtime(Error::InvalidArgument(format!(
            "gradient check failed: max relative error {worst:.3e} exceeds {GRADCHECK_TOLERANCE:e}"
        ))));
    }
    println!(
        "all {} configurations within {GRADCHECK_TOLERANCE:e}",
        summaries.len()
    );
    Ok(())
}

fn load_data(data: &DataArgs) -> Result<Dataset, Error> {
    match &data.csv {
        Some(path) => data::load_csv(path),
        None => generate(&data.synth.0),
    }
}

fn diagnose(checkpoint: &Path, loss: LossSpec, data: &DataArgs, json: bool) -> CmdResult {
    let net = Network::load(checkpoint)?;
    let ds = load_data(data)?;
    if ds.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: ds.dim(),
        }
        .into());
    }
    let report = gradient_condition_residual(&net, &ds, &loss.balanced())?;
    let gap = jensen_gap(&net, &ds)?;
    if json {
        let value = serde_json::json!({ "gradient_condition": report, "jensen_gap": gap });
        println!(
            "{}",
            serde_json::to_string_pretty(&value).map_err(Error::from)?
        );
        return Ok(());
    }
    let rows: [(&str, f64); 11] = [
        ("residual_norm", report.residual_norm),
        ("cosine", report.cosine),
        ("total_grad_norm", report.total_grad_norm),
        ("lhs_norm", report.lhs.norm()),
        ("rhs_norm", report.rhs.norm()),
        ("q0_tilde", report.q0_tilde),
        ("q1_tilde", report.q1_tilde),
        ("log_fbeta_grad_norm", report.log_fbeta.grad_norm),
        ("jensen_exact", gap.exact),
        ("jensen_approx", gap.approx),
        ("jensen_gap", gap.gap),
    ];
    println!("loss family: {}  (n = {})", report.loss_family, ds.len());
    for (name, v) in rows {
        println!("{name:<20} {}", format_number(v));
    }
    Ok(())
}

fn scatter(run_dir: &Path, betas: Vec<f64>, out: Option<PathBuf>) -> CmdResult {
    let cfg = RunConfig::load(run_dir.join(CONFIG_FILE))?;
    let betas = if betas.is_empty() {
        cfg.eval_betas.clone()
    } else {
        betas
    };
    if betas.iter().any(|b| b.is_nan() || *b <= 0.0) {
        return Err(Failure::Usage("betas must be positive".into()));
    }
    let trajectory = read_trajectory(run_dir.join(TRAJECTORY_FILE))?;
    let rows = scatter_from_trajectory(&cfg, &trajectory, &betas)?;
    let path = out.unwrap_or_else(|| run_dir.join(SCATTER_FILE));
    let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
    write_scatter_csv(&rows, &mut w)?;
    std::io::Write::flush(&mut w)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn synth(spec: &SynthSpec, out: &Path) -> CmdResult {
    let ds = generate(spec)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out)?);
    data::write_csv(&ds, &mut w)?;
    std::io::Write::flush(&mut w)?;
    println!(
        "wrote {} rows ({} positive) to {}",
        ds.len(),
        ds.n_positive(),
        out.display()
    );
    Ok(())
}

fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::from("beta,repeats,recall,precision,f_beta\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.beta,
            r.repeats,
            format_number(r.recall),
            format_number(r.precision),
            format_number(r.f_beta)
        );
    }
    s
}

fn sweep(cfg: &RunConfig, betas: &[f64], repeats: usize, out: &Path) -> CmdResult {
    let table = sweep_beta(cfg, betas, repeats)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), sweep_csv(&table))?;
    let mut json = serde_json::to_string_pretty(&table).map_err(Error::from)?;
    json.push('\n');
    fs::write(out.join("sweep.json"), json)?;
    println!(
        "{:>6} {:>8} {:>10} {:>10} {:>10}",
        "beta", "repeats", "recall", "precision", "f_beta"
    );
    for r in &table.rows {
        println!(
            "{:>6} {:>8} {:>10.4} {:>10.4} {:>10.4}",
            r.beta, r.repeats, r.recall, r.precision, r.f_beta
        );
    }
    let trend = |t: Option<f64>| t.map_or("undefined".to_string(), |v| format!("{v:.3}"));
    println!(
        "spearman(beta, recall) = {}, spearman(beta, precision) = {}",
        trend(table.recall_trend),
        trend(table.precision_trend)
    );
    Ok(())
}
