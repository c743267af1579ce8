//! Ranking with a learned comparator, and the incremental training loop
//! that grows its pair sets from the comparator's own sorting mistakes.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparator::{Activation, Preference, WeightSharedComparator};
use crate::data::{feature_dim, Document, QueryGroup};
use crate::error::{Error, Result};
use crate::metrics::{RankQuality, RelevanceList};
use crate::training::{train_and_validate, EpochRecord, PairExample, PairSet, TrainConfig};

/// Anything that can order two documents.
pub trait PairComparator {
    fn compare_docs(&self, x: &Document, y: &Document) -> Preference;

    /// Rejects documents the comparator cannot read.
    fn check_dim(&self, _d: usize) -> Result<()> {
        Ok(())
    }
}

impl PairComparator for WeightSharedComparator {
    fn compare_docs(&self, x: &Document, y: &Document) -> Preference {
        self.compare_unchecked(&x.features, &y.features)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: d,
            });
        }
        Ok(())
    }
}

/// Debug comparator answering from ground-truth labels (higher label first).
/// The inverted variant answers the opposite way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelOracle {
    pub inverted: bool,
}

impl PairComparator for LabelOracle {
    fn compare_docs(&self, x: &Document, y: &Document) -> Preference {
        let pref = match x.label.cmp(&y.label) {
            std::cmp::Ordering::Greater => Preference::Succ,
            std::cmp::Ordering::Less => Preference::Prec,
            std::cmp::Ordering::Equal => Preference::Tie,
        };
        if self.inverted {
            pref.reversed()
        } else {
            pref
        }
    }
}

/// A comparator the incremental loop can hold as its current or best model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Net(WeightSharedComparator),
    LabelOracle,
}

impl Model {
    pub fn as_net(&self) -> Option<&WeightSharedComparator> {
        match self {
            Model::Net(n) => Some(n),
            Model::LabelOracle => None,
        }
    }
}

impl PairComparator for Model {
    fn compare_docs(&self, x: &Document, y: &Document) -> Preference {
        match self {
            Model::Net(n) => n.compare_docs(x, y),
            Model::LabelOracle => LabelOracle::default().compare_docs(x, y),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Model::Net(n) => n.check_dim(d),
            Model::LabelOracle => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankingResult {
    /// Input indices, best first.
    pub order: Vec<usize>,
    /// Cross-class comparisons that put the non-relevant document first,
    /// stored as (relevant, non-relevant) with target `[1, 0]`.
    pub miscompared: PairSet,
    pub comparisons: usize,
}

impl RankingResult {
    pub fn doc_ids<'a>(&self, docs: &'a [Document]) -> Vec<&'a str> {
        self.order.iter().map(|&i| docs[i].doc_id.as_str()).collect()
    }

    pub fn relevance(&self, docs: &[Document]) -> RelevanceList {
        let labels: Vec<u32> = self.order.iter().map(|&i| docs[i].label).collect();
        RelevanceList::from_labels(&labels)
    }
}

/// Stable top-down merge sort driven by `cmp`, best document first.
///
/// The left element of each merge step goes first on `Succ` or `Tie`. Every
/// comparison between a relevant and a non-relevant document whose outcome
/// places the non-relevant one first is recorded.
pub fn sort_with_comparator<C: PairComparator + ?Sized>(cmp: &C, docs: &[Document]) -> RankingResult {
    let mut sorter = Sorter {
        cmp,
        docs,
        miscompared: PairSet::new(),
        comparisons: 0,
    };
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut buf = order.clone();
    sorter.sort(&mut order, &mut buf);
    RankingResult {
        order,
        miscompared: sorter.miscompared,
        comparisons: sorter.comparisons,
    }
}

struct Sorter<'a, C: ?Sized> {
    cmp: &'a C,
    docs: &'a [Document],
    miscompared: PairSet,
    comparisons: usize,
}

impl<C: PairComparator + ?Sized> Sorter<'_, C> {
    fn sort(&mut self, v: &mut [usize], buf: &mut [usize]) {
        let n = v.len();
        if n < 2 {
            return;
        }
        let mid = n / 2;
        {
            let (vl, vr) = v.split_at_mut(mid);
            let (bl, br) = buf.split_at_mut(mid);
            self.sort(vl, bl);
            self.sort(vr, br);
        }
        buf[..n].copy_from_slice(v);
        let (left, right) = buf[..n].split_at(mid);
        let (mut i, mut j, mut k) = (0, 0, 0);
        while i < left.len() && j < right.len() {
            if self.left_first(left[i], right[j]) {
                v[k] = left[i];
                i += 1;
            } else {
                v[k] = right[j];
                j += 1;
            }
            k += 1;
        }
        v[k..k + left.len() - i].copy_from_slice(&left[i..]);
        k += left.len() - i;
        v[k..].copy_from_slice(&right[j..]);
    }

    fn left_first(&mut self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.docs[a], &self.docs[b]);
        self.comparisons += 1;
        let left_first = self.cmp.compare_docs(x, y) != Preference::Prec;
        let (first, second) = if left_first { (x, y) } else { (y, x) };
        if !first.is_relevant() && second.is_relevant() {
            let pair = PairExample::cross_class(second, first).expect("cross-class pair");
            self.miscompared.insert(pair);
        }
        left_first
    }
}

/// Sorts each query group separately.
pub fn rank_groups<C: PairComparator + ?Sized>(cmp: &C, groups: &[QueryGroup]) -> Result<Vec<RankingResult>> {
    if !groups.is_empty() {
        cmp.check_dim(feature_dim(groups)?)?;
    }
    Ok(groups
        .iter()
        .map(|g| sort_with_comparator(cmp, &g.documents))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortNetConfig {
    pub rank_quality: RankQuality,
    pub max_iter: usize,
    pub hidden_pairs: usize,
    pub activation: Activation,
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for SortNetConfig {
    fn default() -> Self {
        Self {
            rank_quality: RankQuality::Map,
            max_iter: 20,
            hidden_pairs: 10,
            activation: Activation::Logistic,
            init_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Pair-set sizes after this iteration's union.
    pub tp_size: usize,
    pub vp_size: usize,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SortNetState {
    pub tp: PairSet,
    pub vp: PairSet,
    pub best_score: f64,
    pub best: Model,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct SortNetOutcome {
    pub state: SortNetState,
    /// Iteration whose comparator is `state.best`.
    pub best_iteration: usize,
    pub log: Vec<IterationRecord>,
    /// Per-epoch history of each retraining, keyed by the iteration that
    /// triggered it.
    pub histories: Vec<(usize, Vec<EpochRecord>)>,
    /// True when the loop stopped because no new pair was found.
    pub converged: bool,
}

impl SortNetOutcome {
    pub fn best(&self) -> &Model {
        &self.state.best
    }

    pub fn best_score(&self) -> f64 {
        self.state.best_score
    }
}

/// Incremental training from a fresh random comparator.
pub fn run_sortnet(
    train: &[QueryGroup],
    valid: &[QueryGroup],
    cfg: &SortNetConfig,
) -> Result<SortNetOutcome> {
    let d = check_sets(train, valid)?;
    let net = WeightSharedComparator::init_random(d, cfg.hidden_pairs, cfg.activation, cfg.init_seed)?;
    run_sortnet_from(train, valid, cfg, Model::Net(net))
}

/// Incremental training from a given starting comparator:
///
/// each iteration sorts the training and validation groups with the current
/// comparator, scores the validation ranking, keeps the best comparator
/// seen so far (strictly better only), stops if neither sort produced a pair
/// outside the accumulated sets, and otherwise merges the new pairs and
/// retrains from the current comparator.
pub fn run_sortnet_from(
    train: &[QueryGroup],
    valid: &[QueryGroup],
    cfg: &SortNetConfig,
    initial: Model,
) -> Result<SortNetOutcome> {
    let d = check_sets(train, valid)?;
    if cfg.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    initial.check_dim(d)?;

    let mut current = initial;
    let mut state = SortNetState {
        tp: PairSet::new(),
        vp: PairSet::new(),
        best_score: f64::NEG_INFINITY,
        best: current.clone(),
        iteration: 0,
    };
    let mut best_iteration = 0;
    let mut log = Vec::new();
    let mut histories = Vec::new();
    let mut converged = false;

    for i in 0..cfg.max_iter {
        state.iteration = i;
        let tp_i = harvest(&current, train)?;
        let (vp_i, score) = {
            let results = rank_groups(&current, valid)?;
            let mut vp_i = PairSet::new();
            let mut lists = Vec::with_capacity(results.len());
            for (r, g) in results.iter().zip(valid) {
                vp_i.union_with(&r.miscompared);
                lists.push(r.relevance(&g.documents));
            }
            (vp_i, cfg.rank_quality.score(&lists)?)
        };

        if score > state.best_score {
            state.best_score = score;
            state.best = current.clone();
            best_iteration = i;
        }

        if tp_i.is_subset_of(&state.tp) && vp_i.is_subset_of(&state.vp) {
            log.push(IterationRecord {
                iteration: i,
                tp_size: state.tp.len(),
                vp_size: state.vp.len(),
                score,
            });
            converged = true;
            break;
        }

        state.tp.union_with(&tp_i);
        state.vp.union_with(&vp_i);
        log.push(IterationRecord {
            iteration: i,
            tp_size: state.tp.len(),
            vp_size: state.vp.len(),
            score,
        });

        if i + 1 == cfg.max_iter || state.tp.is_empty() {
            continue;
        }
        let start = match &current {
            Model::Net(n) => n.clone(),
            Model::LabelOracle => {
                WeightSharedComparator::init_random(d, cfg.hidden_pairs, cfg.activation, cfg.init_seed)?
            }
        };
        let train_cfg = TrainConfig {
            seed: cfg.train.seed.wrapping_add(i as u64),
            ..cfg.train.clone()
        };
        let outcome = train_and_validate(&start, &state.tp, &state.vp, &train_cfg)?;
        histories.push((i, outcome.history));
        current = Model::Net(outcome.best);
    }

    Ok(SortNetOutcome {
        state,
        best_iteration,
        log,
        histories,
        converged,
    })
}

fn check_sets(train: &[QueryGroup], valid: &[QueryGroup]) -> Result<usize> {
    if train.iter().all(|g| g.is_empty()) {
        return Err(Error::EmptyInput("training set has no documents".into()));
    }
    if valid.iter().all(|g| g.is_empty()) {
        return Err(Error::EmptyInput("validation set has no documents".into()));
    }
    let d = feature_dim(train)?;
    let dv = feature_dim(valid)?;
    if d != dv {
        return Err(Error::DimensionMismatch { expected: d, got: dv });
    }
    Ok(d)
}

fn harvest<C: PairComparator + ?Sized>(cmp: &C, groups: &[QueryGroup]) -> Result<PairSet> {
    let mut pairs = PairSet::new();
    for r in rank_groups(cmp, groups)? {
        pairs.union_with(&r.miscompared);
    }
    Ok(pairs)
}

/// `iter,tp_size,vp_size,vq_score`.
pub fn write_iteration_csv<W: Write>(log: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "tp_size", "vp_size", "vq_score"])?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            r.tp_size.to_string(),
            r.vp_size.to_string(),
            r.score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<iteration csv>", e))?;
    Ok(())
}

/// Number of positions at which two rankings of the same ids disagree.
pub fn positional_differences<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Number of item pairs ordered differently by the two rankings.
pub fn kendall_tau_distance<T: Eq + std::hash::Hash>(a: &[T], b: &[T]) -> usize {
    let pos_b: std::collections::HashMap<&T, usize> = b.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mapped: Vec<usize> = a.iter().map(|id| pos_b[id]).collect();
    let mut discordant = 0;
    for i in 0..mapped.len() {
        for j in i + 1..mapped.len() {
            if mapped[i] > mapped[j] {
                discordant += 1;
            }
        }
    }
    discordant
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShuffleStability {
    pub query_id: String,
    pub num_docs: usize,
    pub shuffles: usize,
    /// Positional differences of each shuffled ranking against the ranking
    /// of the input in file order.
    pub positional_differences: Vec<usize>,
    /// Largest Kendall-tau distance between any two of the rankings.
    pub max_kendall_tau: usize,
}

/// Ranks `group` in file order and under `shuffles` seeded permutations of
/// its documents and reports how much the resulting orders differ.
pub fn shuffle_stability<C: PairComparator + ?Sized>(
    cmp: &C,
    group: &QueryGroup,
    shuffles: usize,
    seed: u64,
) -> ShuffleStability {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = sort_with_comparator(cmp, &group.documents);
    let mut rankings: Vec<Vec<&str>> = vec![base.doc_ids(&group.documents)];
    for _ in 0..shuffles {
        let mut shuffled: Vec<&Document> = group.documents.iter().collect();
        shuffled.shuffle(&mut rng);
        let docs: Vec<Document> = shuffled.iter().map(|d| (*d).clone()).collect();
        let r = sort_with_comparator(cmp, &docs);
        rankings.push(r.order.iter().map(|&i| shuffled[i].doc_id.as_str()).collect());
    }
    let positional = rankings[1..]
        .iter()
        .map(|r| positional_differences(&rankings[0], r))
        .collect();
    let mut max_kendall = 0;
    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            max_kendall = max_kendall.max(kendall_tau_distance(&rankings[i], &rankings[j]));
        }
    }
    ShuffleStability {
        query_id: group.query_id.clone(),
        num_docs: group.len(),
        shuffles,
        positional_differences: positional,
        max_kendall_tau: max_kendall,
    }
}

/// `query,num_docs,shuffle,positional_differences,max_kendall_tau`, one row
/// per shuffle.
pub fn write_shuffle_csv<W: Write>(reports: &[ShuffleStability], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "query",
        "num_docs",
        "shuffle",
        "positional_differences",
        "max_kendall_tau",
    ])?;
    for r in reports {
        for (s, diff) in r.positional_differences.iter().enumerate() {
            w.write_record([
                r.query_id.clone(),
                r.num_docs.to_string(),
                (s + 1).to_string(),
                diff.to_string(),
                r.max_kendall_tau.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<shuffle csv>", e))?;
    Ok(())
}
