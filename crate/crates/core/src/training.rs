//! Pair construction, the epoch loop and validation-based snapshot
//! selection.

use std::collections::HashSet;
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparator::{target_loss, ParameterGradient, Target, WeightSharedComparator};
use crate::data::{Document, QueryGroup};
use crate::error::{Error, Result};

/// Identifies a document across query groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocKey {
    pub query_id: String,
    pub doc_id: String,
}

impl DocKey {
    pub fn of(doc: &Document) -> Self {
        Self {
            query_id: doc.query_id.clone(),
            doc_id: doc.doc_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub x_id: DocKey,
    pub y_id: DocKey,
    pub x: Arc<[f64]>,
    pub y: Arc<[f64]>,
    pub target: Target,
}

impl PairExample {
    /// Pair `(x, y)` with target `[1, 0]` when `x` is relevant and `y` is not,
    /// `[0, 1]` in the opposite case. `None` for same-class documents.
    pub fn cross_class(x: &Document, y: &Document) -> Option<Self> {
        let target = match (x.is_relevant(), y.is_relevant()) {
            (true, false) => Target::Succ,
            (false, true) => Target::Prec,
            _ => return None,
        };
        Some(Self {
            x_id: DocKey::of(x),
            y_id: DocKey::of(y),
            x: x.features.clone(),
            y: y.features.clone(),
            target,
        })
    }

    pub fn key(&self) -> (DocKey, DocKey) {
        (self.x_id.clone(), self.y_id.clone())
    }
}

/// Insertion-ordered set of pairs, deduplicated by `(x_id, y_id)`.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: Vec<PairExample>,
    keys: HashSet<(DocKey, DocKey)>,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if a pair with the same ordered ids is already present.
    pub fn insert(&mut self, pair: PairExample) -> bool {
        if !self.keys.insert(pair.key()) {
            return false;
        }
        self.pairs.push(pair);
        true
    }

    pub fn contains(&self, x_id: &DocKey, y_id: &DocKey) -> bool {
        self.keys.contains(&(x_id.clone(), y_id.clone()))
    }

    pub fn is_subset_of(&self, other: &PairSet) -> bool {
        self.keys.iter().all(|k| other.keys.contains(k))
    }

    /// Adds every pair of `other` not already present; returns how many were new.
    pub fn union_with(&mut self, other: &PairSet) -> usize {
        other.pairs.iter().filter(|p| self.insert((*p).clone())).count()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PairExample> {
        self.pairs.iter()
    }

    pub fn as_slice(&self) -> &[PairExample] {
        &self.pairs
    }
}

impl FromIterator<PairExample> for PairSet {
    fn from_iter<I: IntoIterator<Item = PairExample>>(iter: I) -> Self {
        let mut set = PairSet::new();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl<'a> IntoIterator for &'a PairSet {
    type Item = &'a PairExample;
    type IntoIter = std::slice::Iter<'a, PairExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Every ordered cross-class pair of one query group: `2 |R| |NR|` pairs.
pub fn build_pairs(group: &QueryGroup) -> PairSet {
    let docs = &group.documents;
    docs.iter()
        .flat_map(|x| docs.iter().filter_map(move |y| PairExample::cross_class(x, y)))
        .collect()
}

/// [`build_pairs`] over several groups; pairs never straddle queries.
pub fn build_pairs_all(groups: &[QueryGroup]) -> PairSet {
    let mut set = PairSet::new();
    for g in groups {
        set.union_with(&build_pairs(g));
    }
    set
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Pairs per update; 1 is plain per-pair gradient descent.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            seed: 0,
            shuffle: true,
            batch_size: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub tp_mean_loss: f64,
    /// `None` when the validation pair set is empty.
    pub vp_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: WeightSharedComparator,
    /// 1-based epoch the snapshot was taken after.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_vp_accuracy(&self) -> Option<f64> {
        self.history[self.best_epoch - 1].vp_accuracy
    }
}

/// Fraction of pairs whose comparison agrees with the target; ties count as
/// wrong.
pub fn pairwise_accuracy(net: &WeightSharedComparator, pairs: &PairSet) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pairwise accuracy of an empty pair set".into()));
    }
    check_pair_dims(net, pairs)?;
    let correct = pairs
        .iter()
        .filter(|p| p.target.agrees_with(net.compare_unchecked(&p.x, &p.y)))
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

fn mean_loss(net: &WeightSharedComparator, pairs: &PairSet) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|p| target_loss(&net.forward_unchecked(&p.x, &p.y), p.target))
        .sum();
    total / pairs.len() as f64
}

fn check_pair_dims(net: &WeightSharedComparator, pairs: &PairSet) -> Result<()> {
    let d = net.d();
    if let Some(p) = pairs.iter().find(|p| p.x.len() != d || p.y.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if p.x.len() != d { p.x.len() } else { p.y.len() },
        });
    }
    Ok(())
}

/// Runs `cfg.epochs` epochs of gradient descent on `tp`, starting from
/// `net`, and returns the end-of-epoch snapshot with the best pairwise
/// accuracy on `vp` (earliest epoch wins ties). With an empty `vp` the
/// final snapshot is returned.
pub fn train_and_validate(
    net: &WeightSharedComparator,
    tp: &PairSet,
    vp: &PairSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if tp.is_empty() {
        return Err(Error::EmptyInput("training pair set is empty".into()));
    }
    check_pair_dims(net, tp)?;
    check_pair_dims(net, vp)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..tp.len()).collect();
    let mut current = net.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, WeightSharedComparator)> = None;
    let pairs = tp.as_slice();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = ParameterGradient::zeros(current.layout());
            for &idx in batch {
                let p = &pairs[idx];
                let (g, trace) = current.gradient_with_trace(&p.x, &p.y, p.target);
                let e = target_loss(&trace, p.target);
                if !e.is_finite() {
                    return Err(Error::TrainingFault(format!(
                        "non-finite loss at epoch {epoch} on pair ({}/{}, {}/{})",
                        p.x_id.query_id, p.x_id.doc_id, p.y_id.query_id, p.y_id.doc_id
                    )));
                }
                if batch.len() == 1 {
                    grad = g;
                } else {
                    grad.accumulate(&g)?;
                }
            }
            if batch.len() > 1 {
                grad.scale(1.0 / batch.len() as f64);
            }
            current.apply_update(&grad, cfg.learning_rate)?;
        }

        let tp_mean_loss = mean_loss(&current, tp);
        if !tp_mean_loss.is_finite() {
            return Err(Error::TrainingFault(format!(
                "training loss became non-finite after epoch {epoch}"
            )));
        }
        let vp_accuracy = if vp.is_empty() {
            None
        } else {
            Some(pairwise_accuracy(&current, vp)?)
        };
        history.push(EpochRecord {
            epoch,
            tp_mean_loss,
            vp_accuracy,
        });

        let score = vp_accuracy.unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            Some((s, _, _)) => vp_accuracy.is_none() || score > *s,
        };
        if better {
            best = Some((score, epoch, current.clone()));
        }
    }

    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        best_epoch,
        history,
    })
}

/// `epoch,tp_mean_loss,vp_accuracy`, one row per epoch; the accuracy cell is
/// empty when there was no validation set.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "tp_mean_loss", "vp_accuracy"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.tp_mean_loss.to_string(),
            r.vp_accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<history csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparator::Activation;

    fn doc(q: &str, id: &str, label: u32, f: &[f64]) -> Document {
        Document {
            query_id: q.into(),
            doc_id: id.into(),
            label,
            features: f.into(),
        }
    }

    fn group(labels: &[u32]) -> QueryGroup {
        QueryGroup {
            query_id: "q".into(),
            documents: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| doc("q", &format!("d{i}"), l, &[i as f64]))
                .collect(),
        }
    }

    #[test]
    fn pair_counts() {
        let pairs = build_pairs(&group(&[1, 0, 0]));
        assert_eq!(pairs.len(), 4);
        let succ = pairs.iter().filter(|p| p.target == Target::Succ).count();
        assert_eq!(succ, 2);
        assert!(build_pairs(&group(&[0, 0, 0])).is_empty());

        // 1% relevant of 1000
        let labels: Vec<u32> = (0..1000).map(|i| u32::from(i % 100 == 0)).collect();
        assert_eq!(build_pairs(&group(&labels)).len(), 2 * 10 * 990);
    }

    #[test]
    fn pairs_are_cross_class_only() {
        let g = group(&[2, 0, 1, 0, 0, 1]);
        let pairs = build_pairs(&g);
        let label = |k: &DocKey| g.documents.iter().find(|d| d.doc_id == k.doc_id).unwrap().label;
        let mut expected = 0;
        for x in &g.documents {
            for y in &g.documents {
                if x.is_relevant() != y.is_relevant() {
                    expected += 1;
                    assert!(pairs.contains(&DocKey::of(x), &DocKey::of(y)));
                }
            }
        }
        assert_eq!(pairs.len(), expected);
        for p in &pairs {
            assert_ne!(label(&p.x_id) >= 1, label(&p.y_id) >= 1);
            assert_eq!(p.target == Target::Succ, label(&p.x_id) >= 1);
        }
    }

    #[test]
    fn pair_set_dedups_and_tracks_subsets() {
        let a = build_pairs(&group(&[1, 0]));
        let mut b = PairSet::new();
        assert!(a.is_subset_of(&a));
        assert!(b.is_subset_of(&a));
        assert!(!a.is_subset_of(&b));
        assert_eq!(b.union_with(&a), 2);
        assert_eq!(b.union_with(&a), 0);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn accuracy_edge_cases() {
        let pairs = build_pairs(&group(&[1, 0, 0]));
        let zero = WeightSharedComparator::zeros(1, 2, Activation::Logistic).unwrap();
        assert_eq!(pairwise_accuracy(&zero, &pairs).unwrap(), 0.0);
        assert!(pairwise_accuracy(&zero, &PairSet::new()).is_err());
    }

    #[test]
    fn single_pair_is_fit() {
        let tp: PairSet =
            [
                PairExample::cross_class(&doc("q", "a", 1, &[0.4, -0.2]), &doc("q", "b", 0, &[-0.1, 0.3]))
                    .unwrap(),
            ]
            .into_iter()
            .collect();
        let net = WeightSharedComparator::init_random(2, 3, Activation::Logistic, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let out = train_and_validate(&net, &tp, &PairSet::new(), &cfg).unwrap();
        assert_eq!(out.best_epoch, 200);
        let last = out.history.last().unwrap().tp_mean_loss;
        assert!(last < 0.01, "{last}");

        let small = TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let out = train_and_validate(&net, &tp, &PairSet::new(), &small).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1].tp_mean_loss <= w[0].tp_mean_loss);
        }
    }

    #[test]
    fn selection_matches_history_and_is_reproducible() {
        let g = QueryGroup {
            query_id: "q".into(),
            documents: (0..12)
                .map(|i| {
                    let u = i as f64 / 12.0 - 0.5;
                    doc("q", &format!("d{i}"), u32::from(i >= 9), &[u, -u * 0.5, 0.1])
                })
                .collect(),
        };
        let all = build_pairs(&g);
        let (tp, vp): (Vec<_>, Vec<_>) = all.iter().cloned().enumerate().partition(|(i, _)| i % 3 != 0);
        let tp: PairSet = tp.into_iter().map(|(_, p)| p).collect();
        let vp: PairSet = vp.into_iter().map(|(_, p)| p).collect();
        let net = WeightSharedComparator::init_random(3, 2, Activation::Logistic, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 0.2,
            seed: 3,
            ..TrainConfig::default()
        };
        let a = train_and_validate(&net, &tp, &vp, &cfg).unwrap();
        let b = train_and_validate(&net, &tp, &vp, &cfg).unwrap();
        assert_eq!(a.best, b.best);
        let max = a
            .history
            .iter()
            .filter_map(|r| r.vp_accuracy)
            .fold(f64::MIN, f64::max);
        assert_eq!(a.best_vp_accuracy(), Some(max));
        assert_eq!(pairwise_accuracy(&a.best, &vp).unwrap(), max);
        let first_max = a.history.iter().position(|r| r.vp_accuracy == Some(max)).unwrap();
        assert_eq!(a.best_epoch, first_max + 1);
        assert!(a
            .history
            .iter()
            .all(|r| (0.0..=1.0).contains(&r.vp_accuracy.unwrap())));

        let batched = TrainConfig { batch_size: 4, ..cfg };
        assert!(train_and_validate(&net, &tp, &vp, &batched).is_ok());
    }

    #[test]
    fn training_errors() {
        let net = WeightSharedComparator::init_random(1, 1, Activation::Logistic, 1).unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_and_validate(&net, &PairSet::new(), &PairSet::new(), &cfg),
            Err(Error::EmptyInput(_))
        ));
        let tp = build_pairs(&group(&[1, 0]));
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..cfg.clone()
        };
        assert!(train_and_validate(&net, &tp, &PairSet::new(), &zero_epochs).is_err());

        // opposite infinite output weights make both output sums NaN
        let broken = WeightSharedComparator::from_params(
            1,
            1,
            Activation::Logistic,
            vec![0.0, 0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY, 0.0],
        )
        .unwrap();
        let err = train_and_validate(&broken, &tp, &PairSet::new(), &cfg).unwrap_err();
        assert!(matches!(err, Error::TrainingFault(_)), "{err}");
    }

    #[test]
    fn history_csv_layout() {
        let h = vec![
            EpochRecord {
                epoch: 1,
                tp_mean_loss: 0.25,
                vp_accuracy: Some(0.5),
            },
            EpochRecord {
                epoch: 2,
                tp_mean_loss: 0.125,
                vp_accuracy: None,
            },
        ];
        let mut buf = Vec::new();
        write_history_csv(&h, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,tp_mean_loss,vp_accuracy\n1,0.25,0.5\n2,0.125,\n"
        );
    }
}
