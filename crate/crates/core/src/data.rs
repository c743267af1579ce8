//! LETOR-style query/document data: parsing, per-query normalization and
//! five-way fold assembly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const NUM_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub query_id: String,
    pub doc_id: String,
    /// 0 is not relevant; any positive value is relevant and doubles as the
    /// graded rating for NDCG.
    pub label: u32,
    pub features: Arc<[f64]>,
}

impl Document {
    pub fn is_relevant(&self) -> bool {
        self.label >= 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub documents: Vec<Document>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_relevant(&self) -> usize {
        self.documents.iter().filter(|d| d.is_relevant()).count()
    }
}

/// Feature dimension shared by every document, or an error if they differ.
pub fn feature_dim(groups: &[QueryGroup]) -> Result<usize> {
    let mut dims = groups.iter().flat_map(|g| &g.documents).map(|d| d.features.len());
    let first = dims
        .next()
        .ok_or_else(|| Error::EmptyInput("no documents".into()))?;
    if let Some(other) = dims.find(|&n| n != first) {
        return Err(Error::DimensionMismatch {
            expected: first,
            got: other,
        });
    }
    Ok(first)
}

/// Parses `<label> qid:<id> 1:<v> ... d:<v> [# docid = <id> ...]` lines.
///
/// Every line must list feature indices `1..=d` in order. `d` is taken from
/// `expected_dim` when given, otherwise from the first data line. Groups come
/// out in order of first appearance, documents in file order.
pub fn parse_letor<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Vec<QueryGroup>> {
    let mut groups: Vec<QueryGroup> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut dim = expected_dim;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let (body, comment) = match line.split_once('#') {
            Some((b, c)) => (b, Some(c)),
            None => (line.as_str(), None),
        };
        if body.trim().is_empty() {
            continue;
        }
        let doc = parse_line(body, comment, line_no, &mut dim)?;
        let slot = *index.entry(doc.query_id.clone()).or_insert_with(|| {
            groups.push(QueryGroup {
                query_id: doc.query_id.clone(),
                documents: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].documents.push(doc);
    }

    if groups.is_empty() {
        return Err(Error::EmptyInput("no data lines".into()));
    }
    Ok(groups)
}

fn parse_line(body: &str, comment: Option<&str>, line: usize, dim: &mut Option<usize>) -> Result<Document> {
    let err = |message: String| Error::Parse { line, message };
    let mut tokens = body.split_whitespace();

    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let label: u32 = label_tok
        .parse()
        .map_err(|_| err(format!("label '{label_tok}' is not a non-negative integer")))?;

    let qid_tok = tokens.next().ok_or_else(|| err("missing qid".into()))?;
    let query_id = qid_tok
        .strip_prefix("qid:")
        .filter(|q| !q.is_empty())
        .ok_or_else(|| err(format!("expected qid:<id>, found '{qid_tok}'")))?
        .to_string();

    let mut features = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed feature '{tok}'")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("bad feature index in '{tok}'")))?;
        if idx != features.len() + 1 {
            return Err(err(format!(
                "feature index {idx} out of order, expected {}",
                features.len() + 1
            )));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("bad feature value in '{tok}'")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite feature value in '{tok}'")));
        }
        features.push(val);
    }

    match *dim {
        Some(d) if d != features.len() => {
            return Err(err(format!("expected {d} features, found {}", features.len())));
        }
        None if features.is_empty() => return Err(err("no features".into())),
        None => *dim = Some(features.len()),
        _ => {}
    }

    let doc_id = comment
        .and_then(extract_docid)
        .unwrap_or_else(|| format!("line{line}"));

    Ok(Document {
        query_id,
        doc_id,
        label,
        features: features.into(),
    })
}

/// Pulls `<id>` out of a trailing `docid = <id>` comment.
fn extract_docid(comment: &str) -> Option<String> {
    let rest = &comment[comment.find("docid")? + "docid".len()..];
    let rest = rest.trim_start().strip_prefix('=')?;
    rest.split_whitespace().next().map(str::to_string)
}

pub fn read_letor_file(path: &Path, expected_dim: Option<usize>) -> Result<Vec<QueryGroup>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_letor(std::io::BufReader::new(file), expected_dim)
}

/// Writes groups back in the same line format `parse_letor` reads. Floats use
/// the shortest representation that reparses to the same value.
pub fn write_letor<W: Write>(groups: &[QueryGroup], mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for doc in groups.iter().flat_map(|g| &g.documents) {
        line.clear();
        let _ = write!(line, "{} qid:{}", doc.label, doc.query_id);
        for (k, v) in doc.features.iter().enumerate() {
            let _ = write!(line, " {}:{}", k + 1, v);
        }
        let _ = write!(line, " #docid = {}", doc.doc_id);
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Per-query feature normalization: each feature is centered on the group
/// mean and divided by the largest absolute raw value of that feature in the
/// group. A feature whose raw values are all zero maps to zero.
pub fn normalize_group(group: &QueryGroup) -> QueryGroup {
    let n = group.documents.len();
    if n == 0 {
        return group.clone();
    }
    let d = group.documents[0].features.len();
    let mut mean = vec![0.0; d];
    let mut max_abs = vec![0.0f64; d];
    for doc in &group.documents {
        for (r, &v) in doc.features.iter().enumerate() {
            mean[r] += v;
            max_abs[r] = max_abs[r].max(v.abs());
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    // the raw sum can overflow for huge values; center after scaling instead
    let mut scaled_mean: Vec<Option<f64>> = vec![None; d];
    for r in 0..d {
        if !mean[r].is_finite() {
            let s: f64 = group
                .documents
                .iter()
                .map(|doc| doc.features[r] / max_abs[r])
                .sum();
            scaled_mean[r] = Some(s / n as f64);
        }
    }

    let documents = group
        .documents
        .iter()
        .map(|doc| {
            let features: Vec<f64> = doc
                .features
                .iter()
                .enumerate()
                .map(|(r, &v)| match scaled_mean[r] {
                    _ if max_abs[r] == 0.0 => 0.0,
                    Some(sm) => v / max_abs[r] - sm,
                    None => (v - mean[r]) / max_abs[r],
                })
                .collect();
            Document {
                features: features.into(),
                ..doc.clone()
            }
        })
        .collect();
    QueryGroup {
        query_id: group.query_id.clone(),
        documents,
    }
}

pub fn normalize_all(groups: &[QueryGroup]) -> Vec<QueryGroup> {
    groups.iter().map(normalize_group).collect()
}

/// How queries are assigned to the five folds.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldSpec {
    /// Fold index (0..5) for each group, parallel to the group list.
    Assigned(Vec<usize>),
    /// Query `j` goes to fold `j mod 5`; with a seed the query order is
    /// shuffled first.
    RoundRobin { seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub train: Vec<QueryGroup>,
    pub validation: Vec<QueryGroup>,
    pub test: Vec<QueryGroup>,
}

/// Splits at query granularity: test is fold `f`, validation fold
/// `(f + 1) mod 5`, training the remaining three.
pub fn assemble_folds(groups: &[QueryGroup], spec: &FoldSpec, fold: usize) -> Result<Folds> {
    if fold >= NUM_FOLDS {
        return Err(Error::invalid(format!(
            "fold index {fold} must be below {NUM_FOLDS}"
        )));
    }
    let assignment = fold_assignment(groups.len(), spec)?;
    let valid_fold = (fold + 1) % NUM_FOLDS;
    let mut folds = Folds {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (g, f) in groups.iter().zip(assignment) {
        let bucket = if f == fold {
            &mut folds.test
        } else if f == valid_fold {
            &mut folds.validation
        } else {
            &mut folds.train
        };
        bucket.push(g.clone());
    }
    Ok(folds)
}

fn fold_assignment(num_groups: usize, spec: &FoldSpec) -> Result<Vec<usize>> {
    match spec {
        FoldSpec::Assigned(a) => {
            if a.len() != num_groups {
                return Err(Error::DimensionMismatch {
                    expected: num_groups,
                    got: a.len(),
                });
            }
            if let Some(bad) = a.iter().find(|&&f| f >= NUM_FOLDS) {
                return Err(Error::invalid(format!("fold assignment {bad} out of range")));
            }
            Ok(a.clone())
        }
        FoldSpec::RoundRobin { seed } => {
            if num_groups < NUM_FOLDS {
                return Err(Error::invalid(format!(
                    "round-robin folds need at least {NUM_FOLDS} queries, got {num_groups}"
                )));
            }
            let mut order: Vec<usize> = (0..num_groups).collect();
            if let Some(seed) = seed {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            }
            let mut assignment = vec![0; num_groups];
            for (pos, &g) in order.iter().enumerate() {
                assignment[g] = pos % NUM_FOLDS;
            }
            Ok(assignment)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn group(qid: &str, cols: &[&[f64]]) -> QueryGroup {
        let n = cols[0].len();
        QueryGroup {
            query_id: qid.into(),
            documents: (0..n)
                .map(|j| Document {
                    query_id: qid.into(),
                    doc_id: format!("d{j}"),
                    label: 0,
                    features: cols.iter().map(|c| c[j]).collect::<Vec<_>>().into(),
                })
                .collect(),
        }
    }

    #[test]
    fn parses_single_line() {
        let g = parse_letor("1 qid:10 1:0.5 2:-0.3 #docid = d7".as_bytes(), Some(2)).unwrap();
        assert_eq!(g.len(), 1);
        let doc = &g[0].documents[0];
        assert_eq!(doc.label, 1);
        assert_eq!(doc.query_id, "10");
        assert_eq!(doc.doc_id, "d7");
        assert_eq!(&*doc.features, &[0.5, -0.3]);
    }

    #[test]
    fn groups_by_qid() {
        let text = "0 qid:10 1:1 #docid = a\n1 qid:11 1:2 #docid = b\n0 qid:10 1:3 #docid = c\n";
        let g = parse_letor(text.as_bytes(), None).unwrap();
        assert_eq!(g.iter().map(|q| q.len()).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(g[0].documents[1].doc_id, "c");
    }

    #[test]
    fn short_line_is_an_error_naming_the_line() {
        let mut text = String::new();
        for line in 0..2 {
            let n = if line == 1 { 43 } else { 44 };
            let feats: Vec<String> = (1..=n).map(|k| format!("{k}:0.1")).collect();
            text.push_str(&format!("0 qid:1 {}\n", feats.join(" ")));
        }
        let err = parse_letor(text.as_bytes(), Some(44)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("43"));
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "x qid:1 1:0",
            "1 q:1 1:0",
            "1 qid:1 2:0",
            "1 qid:1 1:abc",
            "1 qid:1 1:0 1:0",
            "-1 qid:1 1:0",
            "1 qid:1",
        ] {
            assert!(parse_letor(bad.as_bytes(), None).is_err(), "{bad}");
        }
        assert!(matches!(
            parse_letor("".as_bytes(), None),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            parse_letor("# only a comment\n\n".as_bytes(), None),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn missing_docid_gets_line_name() {
        let g = parse_letor("\n0 qid:1 1:0.5 # no id here".as_bytes(), None).unwrap();
        assert_eq!(g[0].documents[0].doc_id, "line2");
    }

    #[test]
    fn normalization_matches_hand_values() {
        let g = normalize_group(&group("q", &[&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]]));
        let col0: Vec<f64> = g.documents.iter().map(|d| d.features[0]).collect();
        let col1: Vec<f64> = g.documents.iter().map(|d| d.features[1]).collect();
        assert_eq!(col0, vec![-1.0 / 3.0, 0.0, 1.0 / 3.0]);
        assert_eq!(col1, vec![0.0, 0.0, 0.0]);

        // uncentered denominator: [1, 1, 10] -> mean 4, max 10
        let g = normalize_group(&group("q", &[&[1.0, 1.0, 10.0]]));
        let col: Vec<f64> = g.documents.iter().map(|d| d.features[0]).collect();
        assert_eq!(col, vec![-0.3, -0.3, 0.6]);
    }

    #[test]
    fn folds_round_robin() {
        let groups: Vec<QueryGroup> = (0..5).map(|q| group(&format!("q{q}"), &[&[0.0]])).collect();
        let f = assemble_folds(&groups, &FoldSpec::RoundRobin { seed: None }, 0).unwrap();
        let ids = |v: &[QueryGroup]| v.iter().map(|g| g.query_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&f.test), vec!["q0"]);
        assert_eq!(ids(&f.validation), vec!["q1"]);
        assert_eq!(ids(&f.train), vec!["q2", "q3", "q4"]);

        let f4 = assemble_folds(&groups, &FoldSpec::RoundRobin { seed: None }, 4).unwrap();
        assert_eq!(ids(&f4.test), vec!["q4"]);
        assert_eq!(ids(&f4.validation), vec!["q0"]);

        assert!(assemble_folds(&groups[..4], &FoldSpec::RoundRobin { seed: None }, 0).is_err());
        assert!(assemble_folds(&groups, &FoldSpec::RoundRobin { seed: None }, 5).is_err());
        assert!(assemble_folds(&groups, &FoldSpec::Assigned(vec![0, 1, 2, 3, 7]), 0).is_err());
    }

    #[test]
    fn folds_have_td2004_shape() {
        let groups: Vec<QueryGroup> = (0..75).map(|q| group(&format!("q{q}"), &[&[0.0]])).collect();
        for fold in 0..NUM_FOLDS {
            let f = assemble_folds(&groups, &FoldSpec::RoundRobin { seed: Some(9) }, fold).unwrap();
            assert_eq!((f.test.len(), f.validation.len(), f.train.len()), (15, 15, 45));
        }
        let a = assemble_folds(&groups, &FoldSpec::RoundRobin { seed: Some(9) }, 2).unwrap();
        let b = assemble_folds(&groups, &FoldSpec::RoundRobin { seed: Some(9) }, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_survives_huge_values() {
        let g = normalize_group(&group("q", &[&[1.5e308, 1.5e308, -1.5e308, 0.0]]));
        let got: Vec<f64> = g.documents.iter().map(|d| d.features[0]).collect();
        assert_eq!(got, vec![0.75, 0.75, -1.25, -0.25]);
    }

    fn naive_normalize(col: &[f64]) -> Vec<f64> {
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        let m = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        col.iter()
            .map(|v| if m == 0.0 { 0.0 } else { (v - mu) / m })
            .collect()
    }

    proptest! {
        #[test]
        fn normalization_is_centered_and_matches_naive(
            cols in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 1..30), 1..5)
        ) {
            let n = cols[0].len();
            let cols: Vec<Vec<f64>> = cols.into_iter().map(|mut c| { c.resize(n, 0.0); c }).collect();
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let g = normalize_group(&group("q", &refs));
            for (r, col) in cols.iter().enumerate() {
                let got: Vec<f64> = g.documents.iter().map(|d| d.features[r]).collect();
                let sum: f64 = got.iter().sum();
                prop_assert!(sum.abs() <= 1e-12 * n as f64, "sum {}", sum);
                let naive = naive_normalize(col);
                for (a, b) in got.iter().zip(&naive) {
                    prop_assert!((a - b).abs() <= 1e-15, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn write_then_parse_round_trips(
            docs in prop::collection::vec(
                (0u32..3, 0usize..4, prop::collection::vec(-1e6f64..1e6, 3)), 1..20)
        ) {
            let mut text = Vec::new();
            let mut groups: Vec<QueryGroup> = Vec::new();
            for (j, (label, q, feats)) in docs.into_iter().enumerate() {
                let qid = format!("{q}");
                let doc = Document { query_id: qid.clone(), doc_id: format!("doc{j}"), label, features: feats.into() };
                match groups.iter_mut().find(|g| g.query_id == qid) {
                    Some(g) => g.documents.push(doc),
                    None => groups.push(QueryGroup { query_id: qid, documents: vec![doc] }),
                }
            }
            write_letor(&groups, &mut text).unwrap();
            let back = parse_letor(text.as_slice(), Some(3)).unwrap();
            prop_assert_eq!(back, groups);
        }
    }
}
