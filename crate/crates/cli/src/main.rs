use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sortnet::metrics::RankQuality;
use sortnet::workflow::{self, exit_code, Command, RunConfig};
use sortnet::Activation;

#[derive(Parser)]
#[command(
    name = "sortnet",
    version,
    about = "Learning to rank with a neural comparator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a comparator with the incremental pair-selection loop
    Train(Opts),
    /// Rank a dataset with a trained model
    Rank(Opts),
    /// Rank a labeled dataset and report P@n, NDCG@n and MAP
    Eval(Opts),
    /// Five-fold cross-validation over the --train dataset
    Kfold(Opts),
    /// Run the built-in verification suites
    Selftest(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    valid: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = "sortnet-out")]
    out: PathBuf,
    /// Number of hidden unit pairs
    #[arg(long, value_name = "H", default_value_t = 10)]
    hidden: usize,
    #[arg(long, value_name = "N", default_value_t = 20)]
    max_iter: usize,
    /// map, p@K or ndcg@K
    #[arg(long, value_name = "Q", default_value = "map")]
    rank_quality: RankQuality,
    #[arg(long, value_name = "N", default_value_t = 100)]
    epochs: usize,
    #[arg(long, value_name = "F", default_value_t = 0.1)]
    lr: f64,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "K")]
    fold: Option<usize>,
    /// logistic or tanh
    #[arg(long, default_value = "logistic")]
    activation: Activation,
    /// Rank by ground-truth labels instead of a model
    #[arg(long)]
    label_oracle: bool,
    /// Re-rank under this many input shuffles and report the differences
    #[arg(long, value_name = "N", default_value_t = 0)]
    shuffles: usize,
    /// Write the normalized input data to the output directory
    #[arg(long)]
    dump_normalized: bool,
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

impl Opts {
    fn into_config(self, command: Command) -> RunConfig {
        RunConfig {
            command,
            train: self.train,
            valid: self.valid,
            test: self.test,
            model: self.model,
            out: self.out,
            hidden_pairs: self.hidden,
            max_iter: self.max_iter,
            rank_quality: self.rank_quality,
            epochs: self.epochs,
            learning_rate: self.lr,
            seed: self.seed,
            fold: self.fold,
            activation: self.activation,
            label_oracle: self.label_oracle,
            shuffles: self.shuffles,
            dump_normalized: self.dump_normalized,
            corrupt_gradient: self.corrupt_gradient,
        }
    }
}

fn run(cfg: RunConfig) -> Result<u8, sortnet::Error> {
    match cfg.command {
        Command::Train => {
            let summary = workflow::cmd_train(&cfg)?;
            print!("{}", summary.describe(cfg.rank_quality));
        }
        Command::Rank => {
            let summary = workflow::cmd_rank(&cfg)?;
            println!(
                "ranked {} documents in {} queries -> {}",
                summary.documents,
                summary.queries,
                summary.output.display()
            );
            for s in &summary.stability {
                println!(
                    "query {}: positional differences over {} shuffles {:?} (of {}), max Kendall tau {}",
                    s.query_id, s.shuffles, s.positional_differences, s.num_docs, s.max_kendall_tau
                );
            }
        }
        Command::Eval => {
            let summary = workflow::cmd_eval(&cfg)?;
            print!("{}", workflow::format_table(&summary.aggregate));
            if let Some(acc) = summary.pairwise_accuracy {
                println!("pairwise accuracy {acc:.4}");
            }
        }
        Command::Kfold => {
            let summary = workflow::cmd_kfold(&cfg)?;
            for (f, s) in &summary.folds {
                match s.aggregate.map {
                    Some(m) => println!("fold {f}: MAP {m:.4}"),
                    None => println!("fold {f}: MAP n/a"),
                }
            }
            println!("pooled over {} folds:", summary.folds.len());
            print!("{}", workflow::format_table(&summary.pooled));
        }
        Command::Selftest => {
            let report = workflow::cmd_selftest(&cfg);
            print!("{}", report.summary());
            if !report.passed() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match cli.command {
        Cmd::Train(o) => o.into_config(Command::Train),
        Cmd::Rank(o) => o.into_config(Command::Rank),
        Cmd::Eval(o) => o.into_config(Command::Eval),
        Cmd::Kfold(o) => o.into_config(Command::Kfold),
        Cmd::Selftest(o) => o.into_config(Command::Selftest),
    };
    match run(cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
