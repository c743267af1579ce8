//! Ranking quality measures: P@n, AP/MAP and NDCG@n.
//!
//! A [`RelevanceList`] holds the ratings of a ranked list, top first. A
//! document counts as relevant for the binary measures when its rating is
//! positive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceList {
    ratings: Vec<f64>,
}

impl RelevanceList {
    pub fn new(ratings: Vec<f64>) -> Result<Self> {
        if let Some(r) = ratings.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::invalid(format!(
                "ratings must be finite and >= 0, got {r}"
            )));
        }
        Ok(Self { ratings })
    }

    pub fn from_labels(labels: &[u32]) -> Self {
        Self {
            ratings: labels.iter().map(|&l| f64::from(l)).collect(),
        }
    }

    /// Binary list: `true` is relevant (rating 1), `false` is not (rating 0).
    pub fn from_binary(rel: &[bool]) -> Self {
        Self {
            ratings: rel.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn ratings(&self) -> &[f64] {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn is_relevant(&self, pos: usize) -> bool {
        self.ratings[pos] > 0.0
    }

    pub fn num_relevant(&self) -> usize {
        self.ratings.iter().filter(|&&r| r > 0.0).count()
    }

    fn check_cutoff(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!("cutoff {n} outside 1..={}", self.len())));
        }
        Ok(())
    }
}

/// Fraction of relevant documents among the first `n`.
pub fn precision_at(list: &RelevanceList, n: usize) -> Result<f64> {
    list.check_cutoff(n)?;
    let hits = (0..n).filter(|&j| list.is_relevant(j)).count();
    Ok(hits as f64 / n as f64)
}

/// Average of P@n over the positions holding relevant documents, divided by
/// the number of relevant documents. `None` when nothing is relevant.
pub fn average_precision(list: &RelevanceList) -> Option<f64> {
    let total = list.num_relevant();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for j in 0..list.len() {
        if list.is_relevant(j) {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// Mean AP over the queries that have at least one relevant document.
pub fn mean_average_precision(lists: &[RelevanceList]) -> Result<f64> {
    let aps: Vec<f64> = lists.iter().filter_map(average_precision).collect();
    if aps.is_empty() {
        return Err(Error::NoScorableQuery);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Discounted cumulative gain of the first `n` positions,
/// `sum (2^r_j - 1) / ln(1 + j)`.
pub fn dcg_at(list: &RelevanceList, n: usize) -> Result<f64> {
    list.check_cutoff(n)?;
    Ok(dcg_prefix(&list.ratings[..n]))
}

fn dcg_prefix(ratings: &[f64]) -> f64 {
    ratings
        .iter()
        .enumerate()
        .map(|(j, r)| (r.exp2() - 1.0) / ((j + 2) as f64).ln())
        .sum()
}

/// DCG@n normalized by the DCG@n of the ratings sorted descending. Zero when
/// that ideal DCG is zero.
pub fn ndcg_at(list: &RelevanceList, n: usize) -> Result<f64> {
    list.check_cutoff(n)?;
    let dcg = dcg_prefix(&list.ratings[..n]);
    let mut ideal = list.ratings.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let ideal_dcg = dcg_prefix(&ideal[..n]);
    if ideal_dcg == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / ideal_dcg)
}

/// Measure used to score the validation ranking in the incremental loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RankQuality {
    Map,
    PrecisionAt(usize),
    NdcgAt(usize),
}

impl RankQuality {
    /// Query-averaged score. Cutoffs larger than a query's list are clipped
    /// to its length; MAP skips queries without relevant documents.
    pub fn score(&self, lists: &[RelevanceList]) -> Result<f64> {
        let per_query = |f: fn(&RelevanceList, usize) -> Result<f64>, k: usize| -> Result<f64> {
            let lists: Vec<&RelevanceList> = lists.iter().filter(|l| !l.is_empty()).collect();
            if lists.is_empty() {
                return Err(Error::NoScorableQuery);
            }
            let mut sum = 0.0;
            for l in &lists {
                sum += f(l, k.min(l.len()))?;
            }
            Ok(sum / lists.len() as f64)
        };
        match *self {
            RankQuality::Map => mean_average_precision(lists),
            RankQuality::PrecisionAt(k) => per_query(precision_at, k),
            RankQuality::NdcgAt(k) => per_query(ndcg_at, k),
        }
    }
}

impl fmt::Display for RankQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankQuality::Map => write!(f, "map"),
            RankQuality::PrecisionAt(k) => write!(f, "p@{k}"),
            RankQuality::NdcgAt(k) => write!(f, "ndcg@{k}"),
        }
    }
}

impl FromStr for RankQuality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "map" {
            return Ok(RankQuality::Map);
        }
        let cutoff = |k: &str| -> Result<usize> {
            match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(Error::invalid(format!("bad cutoff in rank quality '{s}'"))),
            }
        };
        if let Some(k) = lower.strip_prefix("p@") {
            return Ok(RankQuality::PrecisionAt(cutoff(k)?));
        }
        if let Some(k) = lower.strip_prefix("ndcg@") {
            return Ok(RankQuality::NdcgAt(cutoff(k)?));
        }
        Err(Error::invalid(format!(
            "rank quality must be map, p@K or ndcg@K, got '{s}'"
        )))
    }
}

impl From<RankQuality> for String {
    fn from(q: RankQuality) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for RankQuality {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Per-query row of the evaluation report: AP plus P@1..10 and NDCG@1..10.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub query_id: String,
    pub average_precision: Option<f64>,
    pub precision: [f64; REPORT_CUTOFFS],
    pub ndcg: [f64; REPORT_CUTOFFS],
}

pub const REPORT_CUTOFFS: usize = 10;

impl QueryReport {
    /// Cutoffs beyond the list length are clipped to it.
    pub fn compute(query_id: &str, list: &RelevanceList) -> Result<Self> {
        if list.is_empty() {
            return Err(Error::EmptyInput(format!("query {query_id} has no documents")));
        }
        let mut precision = [0.0; REPORT_CUTOFFS];
        let mut ndcg = [0.0; REPORT_CUTOFFS];
        for n in 1..=REPORT_CUTOFFS {
            let k = n.min(list.len());
            precision[n - 1] = precision_at(list, k)?;
            ndcg[n - 1] = ndcg_at(list, k)?;
        }
        Ok(Self {
            query_id: query_id.to_string(),
            average_precision: average_precision(list),
            precision,
            ndcg,
        })
    }
}

/// Macro-averaged aggregate of per-query rows. MAP averages only the queries
/// with a defined AP.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub map: Option<f64>,
    pub precision: [f64; REPORT_CUTOFFS],
    pub ndcg: [f64; REPORT_CUTOFFS],
    pub num_queries: usize,
}

impl AggregateReport {
    pub fn from_rows(rows: &[QueryReport]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut precision = [0.0; REPORT_CUTOFFS];
        let mut ndcg = [0.0; REPORT_CUTOFFS];
        for r in rows {
            for k in 0..REPORT_CUTOFFS {
                precision[k] += r.precision[k];
                ndcg[k] += r.ndcg[k];
            }
        }
        precision.iter_mut().chain(ndcg.iter_mut()).for_each(|v| *v /= n);
        let aps: Vec<f64> = rows.iter().filter_map(|r| r.average_precision).collect();
        let map = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
        Self {
            map,
            precision,
            ndcg,
            num_queries: rows.len(),
        }
    }

    /// Mean of several aggregates, e.g. pooling cross-validation folds.
    pub fn pooled(parts: &[AggregateReport]) -> Self {
        let n = parts.len().max(1) as f64;
        let mut precision = [0.0; REPORT_CUTOFFS];
        let mut ndcg = [0.0; REPORT_CUTOFFS];
        for p in parts {
            for k in 0..REPORT_CUTOFFS {
                precision[k] += p.precision[k];
                ndcg[k] += p.ndcg[k];
            }
        }
        precision.iter_mut().chain(ndcg.iter_mut()).for_each(|v| *v /= n);
        let maps: Vec<f64> = parts.iter().filter_map(|p| p.map).collect();
        let map = (!maps.is_empty()).then(|| maps.iter().sum::<f64>() / maps.len() as f64);
        Self {
            map,
            precision,
            ndcg,
            num_queries: parts.iter().map(|p| p.num_queries).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: bool = true;
    const N: bool = false;

    #[test]
    fn precision_hand_values() {
        let l = RelevanceList::from_binary(&[R, N, R]);
        assert_eq!(precision_at(&l, 2).unwrap(), 0.5);
        assert_eq!(precision_at(&l, 3).unwrap(), 2.0 / 3.0);
        let all = RelevanceList::from_binary(&[R, R, R, R]);
        assert!((1..=4).all(|n| precision_at(&all, n).unwrap() == 1.0));
        assert!(precision_at(&l, 0).is_err());
        assert!(precision_at(&l, 4).is_err());
    }

    #[test]
    fn average_precision_hand_values() {
        let ap = average_precision(&RelevanceList::from_binary(&[R, N, R, N])).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&RelevanceList::from_binary(&[N, R])), Some(0.5));
        assert_eq!(
            average_precision(&RelevanceList::from_binary(&[R, R, N, N])),
            Some(1.0)
        );
        assert_eq!(average_precision(&RelevanceList::from_binary(&[N, N])), None);
    }

    #[test]
    fn map_excludes_unscorable_queries() {
        let lists = [
            RelevanceList::from_binary(&[R, N]),
            RelevanceList::from_binary(&[N, R]),
            RelevanceList::from_binary(&[N, N]),
        ];
        assert_eq!(mean_average_precision(&lists).unwrap(), 0.75);
        assert_eq!(mean_average_precision(&lists[..1]).unwrap(), 1.0);
        assert!(matches!(
            mean_average_precision(&lists[2..]),
            Err(Error::NoScorableQuery)
        ));
    }

    #[test]
    fn ndcg_hand_values() {
        let l = RelevanceList::new(vec![0.0, 1.0]).unwrap();
        let v = ndcg_at(&l, 2).unwrap();
        assert!((v - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!((v - 0.630930).abs() < 1e-6);
        let zeros = RelevanceList::new(vec![0.0; 5]).unwrap();
        assert_eq!(ndcg_at(&zeros, 3).unwrap(), 0.0);
        let ideal = RelevanceList::new(vec![3.0, 2.0, 2.0, 1.0, 0.0]).unwrap();
        assert!((1..=5).all(|n| ndcg_at(&ideal, n).unwrap() == 1.0));
        assert!(RelevanceList::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn ndcg_is_log_base_invariant() {
        let l = RelevanceList::new(vec![1.0, 0.0, 2.0, 0.0, 1.0, 3.0]).unwrap();
        let mut ideal = l.ratings().to_vec();
        ideal.sort_by(|a, b| b.total_cmp(a));
        for n in 1..=l.len() {
            let dcg2 = |r: &[f64]| -> f64 {
                r[..n]
                    .iter()
                    .enumerate()
                    .map(|(j, r)| (r.exp2() - 1.0) / ((j + 2) as f64).log2())
                    .sum()
            };
            let v2 = dcg2(l.ratings()) / dcg2(&ideal);
            assert!((ndcg_at(&l, n).unwrap() - v2).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_quality_parsing_and_scoring() {
        assert_eq!("MAP".parse::<RankQuality>().unwrap(), RankQuality::Map);
        assert_eq!(
            "p@10".parse::<RankQuality>().unwrap(),
            RankQuality::PrecisionAt(10)
        );
        assert_eq!("ndcg@3".parse::<RankQuality>().unwrap(), RankQuality::NdcgAt(3));
        for bad in ["p@0", "p@", "ndcg@x", "mrr"] {
            assert!(bad.parse::<RankQuality>().is_err(), "{bad}");
        }
        assert_eq!(RankQuality::NdcgAt(5).to_string(), "ndcg@5");

        let lists = [
            RelevanceList::from_binary(&[R, N]),
            RelevanceList::from_binary(&[N, R, N]),
        ];
        // P@10 clips to each list length: 1/2 and 1/3
        let p = RankQuality::PrecisionAt(10).score(&lists).unwrap();
        assert!((p - (0.5 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(RankQuality::Map.score(&lists).unwrap(), 0.75);
    }

    #[test]
    fn report_rows_and_aggregate() {
        let l = RelevanceList::from_binary(&[R, N, R]);
        let row = QueryReport::compute("q", &l).unwrap();
        assert_eq!(row.precision[1], 0.5);
        assert_eq!(row.precision[9], 2.0 / 3.0);
        let none = QueryReport::compute("z", &RelevanceList::from_binary(&[N])).unwrap();
        let agg = AggregateReport::from_rows(&[row.clone(), none]);
        assert_eq!(agg.map, row.average_precision);
        assert_eq!(agg.precision[0], 0.5);
        let pooled = AggregateReport::pooled(&[agg.clone(), agg.clone()]);
        assert_eq!(pooled.map, agg.map);
        assert_eq!(pooled.num_queries, 4);
    }
}
