//! Synthetic ranking data with a known linear utility.
//!
//! Each query gets documents with features drawn uniformly from `[-1, 1]`;
//! the top fraction by utility `w . x` is labeled relevant. The same
//! utility is shared by every split generated from one [`LinearUtility`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Document, QueryGroup};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearUtility {
    pub weights: Vec<f64>,
}

impl LinearUtility {
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            weights: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    pub fn utility(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// `queries` groups of `docs_per_query` documents; in each, the
    /// `round(relevant_fraction * docs_per_query)` highest-utility documents
    /// (at least one) get label 1.
    pub fn generate(
        &self,
        query_prefix: &str,
        queries: usize,
        docs_per_query: usize,
        relevant_fraction: f64,
        seed: u64,
    ) -> Vec<QueryGroup> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.weights.len();
        let num_relevant =
            ((relevant_fraction * docs_per_query as f64).round() as usize).clamp(1, docs_per_query);
        (0..queries)
            .map(|q| {
                let query_id = format!("{query_prefix}{q}");
                let feats: Vec<Vec<f64>> = (0..docs_per_query)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let mut by_utility: Vec<usize> = (0..docs_per_query).collect();
                by_utility.sort_by(|&a, &b| self.utility(&feats[b]).total_cmp(&self.utility(&feats[a])));
                let mut labels = vec![0u32; docs_per_query];
                for &j in &by_utility[..num_relevant] {
                    labels[j] = 1;
                }
                let documents = feats
                    .into_iter()
                    .zip(labels)
                    .enumerate()
                    .map(|(j, (f, label))| Document {
                        query_id: query_id.clone(),
                        doc_id: format!("{query_id}-d{j}"),
                        label,
                        features: f.into(),
                    })
                    .collect();
                QueryGroup { query_id, documents }
            })
            .collect()
    }
}

/// Utility seed shared by the bundled fixture files.
pub const FIXTURE_UTILITY_SEED: u64 = 2009;
pub const FIXTURE_DIM: usize = 5;

/// The bundled fixture splits: `(name, query prefix, queries, docs per query, seed)`.
pub const FIXTURE_SPLITS: [(&str, &str, usize, usize, u64); 6] = [
    ("synthetic_train", "tr", 3, 200, 11),
    ("synthetic_valid", "va", 3, 200, 12),
    ("synthetic_test", "te", 3, 200, 13),
    ("small_train", "str", 3, 30, 21),
    ("small_valid", "sva", 3, 30, 22),
    ("small_test", "ste", 3, 30, 23),
];

pub const FIXTURE_RELEVANT_FRACTION: f64 = 0.1;

pub fn fixture_split(name: &str) -> Option<Vec<QueryGroup>> {
    let (_, prefix, queries, docs, seed) = FIXTURE_SPLITS.iter().find(|s| s.0 == name)?;
    let utility = LinearUtility::seeded(FIXTURE_DIM, FIXTURE_UTILITY_SEED);
    Some(utility.generate(prefix, *queries, *docs, FIXTURE_RELEVANT_FRACTION, *seed))
}
