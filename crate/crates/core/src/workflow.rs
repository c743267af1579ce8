//! End-to-end commands behind the `sortnet` binary.
//!
//! Each command takes a [`RunConfig`], writes its artifacts under the
//! output directory (including the effective configuration as
//! `config.json`) and returns a summary for the caller to print.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comparator::{Activation, WeightSharedComparator};
use crate::data::{
    assemble_folds, normalize_all, read_letor_file, write_letor, FoldSpec, QueryGroup, NUM_FOLDS,
};
use crate::error::{Error, Result};
use crate::metrics::{AggregateReport, QueryReport, RankQuality, REPORT_CUTOFFS};
use crate::selftest::{run_selftest, SelftestOptions, SelftestReport};
use crate::sortnet::{
    rank_groups, run_sortnet, shuffle_stability, write_iteration_csv, write_shuffle_csv, IterationRecord,
    Model, ShuffleStability, SortNetConfig,
};
use crate::training::{build_pairs_all, pairwise_accuracy, write_history_csv, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Train,
    Rank,
    Eval,
    Kfold,
    Selftest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub hidden_pairs: usize,
    pub max_iter: usize,
    pub rank_quality: RankQuality,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub fold: Option<usize>,
    pub activation: Activation,
    /// Rank with the ground-truth labels instead of a model (debugging).
    pub label_oracle: bool,
    /// Extra shuffled re-rankings for the stability report (rank command).
    pub shuffles: usize,
    /// Also write the normalized input data under the output directory.
    pub dump_normalized: bool,
    /// Selftest negative control.
    pub corrupt_gradient: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            train: None,
            valid: None,
            test: None,
            model: None,
            out: PathBuf::from("sortnet-out"),
            hidden_pairs: 10,
            max_iter: 20,
            rank_quality: RankQuality::Map,
            epochs: 100,
            learning_rate: 0.1,
            seed: 0,
            fold: None,
            activation: Activation::Logistic,
            label_oracle: false,
            shuffles: 0,
            dump_normalized: false,
            corrupt_gradient: false,
        }
    }

    pub fn sortnet_config(&self) -> SortNetConfig {
        SortNetConfig {
            rank_quality: self.rank_quality,
            max_iter: self.max_iter,
            hidden_pairs: self.hidden_pairs,
            activation: self.activation,
            init_seed: self.seed,
            train: TrainConfig {
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                seed: self.seed,
                shuffle: true,
                batch_size: 1,
            },
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.txt"))
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::invalid(format!("{flag} is required for this command")))
    }
}

/// Process exit status for an error: 1 usage, 2 data, 3 numeric fault.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 1,
        Error::TrainingFault(_) => 3,
        _ => 2,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(cfg)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn load_normalized(path: &Path, dim: Option<usize>) -> Result<Vec<QueryGroup>> {
    Ok(normalize_all(&read_letor_file(path, dim)?))
}

fn dump(groups: &[QueryGroup], path: &Path) -> Result<()> {
    let f = create_file(path)?;
    write_letor(groups, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub log: Vec<IterationRecord>,
    pub best_iteration: usize,
    pub best_score: f64,
    pub converged: bool,
    pub net: WeightSharedComparator,
}

impl TrainSummary {
    pub fn describe(&self, quality: RankQuality) -> String {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&format!(
                "iter {:>2}  |TP|={:<6} |VP|={:<6} {quality}={:.4}\n",
                r.iteration, r.tp_size, r.vp_size, r.score
            ));
        }
        s.push_str(&format!(
            "best {quality}={:.4} at iteration {}{}\nmodel written to {}\n",
            self.best_score,
            self.best_iteration,
            if self.converged { " (pair sets stable)" } else { "" },
            self.model_path.display()
        ));
        s
    }
}

/// Normalizes, runs the incremental loop and writes the model, iteration
/// log and per-retraining epoch histories.
pub fn train_on(
    cfg: &RunConfig,
    train: &[QueryGroup],
    valid: &[QueryGroup],
    out: &Path,
) -> Result<TrainSummary> {
    create_dir(out)?;
    let outcome = run_sortnet(train, valid, &cfg.sortnet_config())?;
    let net = outcome
        .best()
        .as_net()
        .cloned()
        .expect("random-init loop yields a network");

    let model_path = if out == cfg.out {
        cfg.model_path()
    } else {
        out.join("model.txt")
    };
    net.save(&model_path)?;
    write_iteration_csv(&outcome.log, create_file(&out.join("iterations.csv"))?)?;
    let hist_dir = out.join("history");
    create_dir(&hist_dir)?;
    for (iter, history) in &outcome.histories {
        write_history_csv(
            history,
            create_file(&hist_dir.join(format!("iter_{iter:02}.csv")))?,
        )?;
    }
    Ok(TrainSummary {
        model_path,
        log: outcome.log,
        best_iteration: outcome.best_iteration,
        best_score: outcome.state.best_score,
        converged: outcome.converged,
        net,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let train_path = cfg.require(&cfg.train, "--train")?;
    let all = load_normalized(train_path, None)?;
    let (train, valid) = match (&cfg.valid, cfg.fold) {
        (Some(v), _) => (all, load_normalized(v, None)?),
        (None, Some(f)) => {
            let folds = assemble_folds(&all, &FoldSpec::RoundRobin { seed: Some(cfg.seed) }, f)?;
            (folds.train, folds.validation)
        }
        (None, None) => return Err(Error::invalid("--valid (or --fold to split --train) is required")),
    };
    echo_config(cfg, &cfg.out)?;
    if cfg.dump_normalized {
        dump(&train, &cfg.out.join("train.normalized.txt"))?;
        dump(&valid, &cfg.out.join("valid.normalized.txt"))?;
    }
    train_on(cfg, &train, &valid, &cfg.out)
}

fn load_model(cfg: &RunConfig) -> Result<Model> {
    if cfg.label_oracle {
        return Ok(Model::LabelOracle);
    }
    let path = cfg.require(&cfg.model, "--model")?;
    Ok(Model::Net(WeightSharedComparator::load(path)?))
}

#[derive(Debug, Clone)]
pub struct RankSummary {
    pub output: PathBuf,
    pub queries: usize,
    pub documents: usize,
    pub stability: Vec<ShuffleStability>,
}

/// `query\tposition\tdoc_id`, positions from 1.
pub fn write_ranking<W: std::io::Write>(model: &Model, groups: &[QueryGroup], mut out: W) -> Result<()> {
    let results = rank_groups(model, groups)?;
    writeln!(out, "query\tposition\tdoc_id").map_err(|e| Error::io("<ranking>", e))?;
    for (g, r) in groups.iter().zip(&results) {
        for (pos, id) in r.doc_ids(&g.documents).iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", g.query_id, pos + 1, id).map_err(|e| Error::io("<ranking>", e))?;
        }
    }
    Ok(())
}

pub fn cmd_rank(cfg: &RunConfig) -> Result<RankSummary> {
    let model = load_model(cfg)?;
    let test = load_normalized(cfg.require(&cfg.test, "--test")?, model.as_net().map(|n| n.d()))?;
    echo_config(cfg, &cfg.out)?;
    if cfg.dump_normalized {
        dump(&test, &cfg.out.join("test.normalized.txt"))?;
    }
    let output = cfg.out.join("ranking.tsv");
    write_ranking(&model, &test, std::io::BufWriter::new(create_file(&output)?))?;

    let mut stability = Vec::new();
    if cfg.shuffles > 0 {
        stability = test
            .iter()
            .map(|g| shuffle_stability(&model, g, cfg.shuffles, cfg.seed))
            .collect();
        write_shuffle_csv(&stability, create_file(&cfg.out.join("shuffle_report.csv"))?)?;
    }
    Ok(RankSummary {
        output,
        queries: test.len(),
        documents: test.iter().map(QueryGroup::len).sum(),
        stability,
    })
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub rows: Vec<QueryReport>,
    pub aggregate: AggregateReport,
    /// Pairwise accuracy over every cross-class pair of the test set.
    pub pairwise_accuracy: Option<f64>,
}

/// Ranks every group and computes the per-query metric rows.
pub fn evaluate(model: &Model, groups: &[QueryGroup]) -> Result<EvalSummary> {
    let results = rank_groups(model, groups)?;
    let rows = groups
        .iter()
        .zip(&results)
        .map(|(g, r)| QueryReport::compute(&g.query_id, &r.relevance(&g.documents)))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = AggregateReport::from_rows(&rows);
    let pairwise_accuracy = match model {
        Model::Net(n) => {
            let pairs = build_pairs_all(groups);
            if pairs.is_empty() {
                None
            } else {
                Some(pairwise_accuracy(n, &pairs)?)
            }
        }
        Model::LabelOracle => None,
    };
    Ok(EvalSummary {
        rows,
        aggregate,
        pairwise_accuracy,
    })
}

fn report_header() -> Vec<String> {
    let mut h = vec!["query".to_string()];
    h.extend((1..=REPORT_CUTOFFS).map(|n| format!("P@{n}")));
    h.extend((1..=REPORT_CUTOFFS).map(|n| format!("NDCG@{n}")));
    h.push("MAP".into());
    h
}

fn report_record(label: &str, precision: &[f64], ndcg: &[f64], map: Option<f64>) -> Vec<String> {
    let mut r = vec![label.to_string()];
    r.extend(precision.iter().map(|v| v.to_string()));
    r.extend(ndcg.iter().map(|v| v.to_string()));
    r.push(map.map(|v| v.to_string()).unwrap_or_default());
    r
}

/// Per-query rows plus an `all` row; the MAP column of a query row is its AP.
pub fn write_report_csv<W: std::io::Write>(summary: &EvalSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(report_header())?;
    for r in &summary.rows {
        w.write_record(report_record(
            &r.query_id,
            &r.precision,
            &r.ndcg,
            r.average_precision,
        ))?;
    }
    let a = &summary.aggregate;
    w.write_record(report_record("all", &a.precision, &a.ndcg, a.map))?;
    w.flush().map_err(|e| Error::io("<report csv>", e))?;
    Ok(())
}

pub fn format_table(aggregate: &AggregateReport) -> String {
    let mut s = String::from("        ");
    for n in 1..=REPORT_CUTOFFS {
        s.push_str(&format!("{:>7}", format!("n={n}")));
    }
    s.push('\n');
    for (name, vals) in [("P@n", &aggregate.precision), ("NDCG@n", &aggregate.ndcg)] {
        s.push_str(&format!("{name:<8}"));
        for v in vals.iter() {
            s.push_str(&format!("{v:>7.4}"));
        }
        s.push('\n');
    }
    match aggregate.map {
        Some(m) => s.push_str(&format!("MAP     {m:.4}\n")),
        None => s.push_str("MAP     n/a (no query with relevant documents)\n"),
    }
    s
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalSummary> {
    let model = load_model(cfg)?;
    let test = load_normalized(cfg.require(&cfg.test, "--test")?, model.as_net().map(|n| n.d()))?;
    echo_config(cfg, &cfg.out)?;
    let summary = evaluate(&model, &test)?;
    write_report_csv(&summary, create_file(&cfg.out.join("report.csv"))?)?;
    fs::write(cfg.out.join("report.txt"), format_table(&summary.aggregate))
        .map_err(|e| Error::io(cfg.out.join("report.txt"), e))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct KfoldSummary {
    pub folds: Vec<(usize, EvalSummary)>,
    pub pooled: AggregateReport,
    /// Query ids of each fold's test partition.
    pub test_queries: Vec<Vec<String>>,
}

/// Five-fold cross-validation over the `--train` dataset. `--fold` limits
/// the run to one fold.
pub fn cmd_kfold(cfg: &RunConfig) -> Result<KfoldSummary> {
    let all = load_normalized(cfg.require(&cfg.train, "--train")?, None)?;
    if all.len() < NUM_FOLDS {
        return Err(Error::invalid(format!(
            "k-fold needs at least {NUM_FOLDS} queries, found {}",
            all.len()
        )));
    }
    echo_config(cfg, &cfg.out)?;
    let spec = FoldSpec::RoundRobin { seed: Some(cfg.seed) };
    let folds: Vec<usize> = match cfg.fold {
        Some(f) => vec![f],
        None => (0..NUM_FOLDS).collect(),
    };
    let mut results = Vec::new();
    let mut test_queries = Vec::new();
    for f in folds {
        let parts = assemble_folds(&all, &spec, f)?;
        let dir = cfg.out.join(format!("fold{f}"));
        let trained = train_on(cfg, &parts.train, &parts.validation, &dir)?;
        let summary = evaluate(&Model::Net(trained.net), &parts.test)?;
        write_report_csv(&summary, create_file(&dir.join("report.csv"))?)?;
        test_queries.push(parts.test.iter().map(|g| g.query_id.clone()).collect());
        results.push((f, summary));
    }
    let parts: Vec<AggregateReport> = results.iter().map(|(_, s)| s.aggregate.clone()).collect();
    let pooled = AggregateReport::pooled(&parts);

    let mut w = csv::Writer::from_writer(create_file(&cfg.out.join("kfold_report.csv"))?);
    w.write_record(
        report_header()
            .into_iter()
            .map(|h| if h == "query" { "fold".into() } else { h }),
    )?;
    for (f, s) in &results {
        let a = &s.aggregate;
        w.write_record(report_record(&format!("fold{f}"), &a.precision, &a.ndcg, a.map))?;
    }
    w.write_record(report_record(
        "pooled",
        &pooled.precision,
        &pooled.ndcg,
        pooled.map,
    ))?;
    w.flush()
        .map_err(|e| Error::io(cfg.out.join("kfold_report.csv"), e))?;

    Ok(KfoldSummary {
        folds: results,
        pooled,
        test_queries,
    })
}

pub fn cmd_selftest(cfg: &RunConfig) -> SelftestReport {
    run_selftest(&SelftestOptions {
        corrupt_gradient: cfg.corrupt_gradient,
        seed: cfg.seed,
    })
}
