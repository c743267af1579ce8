//! Built-in verification suites run by `sortnet selftest`.
//!
//! Each suite checks the library against an independent route: swapped
//! inputs for symmetry, central finite differences for gradients, naive
//! enumeration for the metrics and direct evaluation of the plain net for
//! the doubling construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comparator::{
    symmetrize_network, target_loss, Activation, Layout, PlainThreeLayerNet, Target, WeightSharedComparator,
};
use crate::metrics::{average_precision, mean_average_precision, ndcg_at, precision_at, RelevanceList};

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Negative control: perturb every analytic gradient before checking it.
    pub corrupt_gradient: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            let status = if r.passed() { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "{status} {:<14} {} cases, {} failures{}\n",
                r.name,
                r.cases,
                r.failures,
                if r.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", r.detail)
                }
            ));
        }
        let passed = self.suites.iter().filter(|r| r.passed()).count();
        s.push_str(&format!("{passed}/{} suites passed\n", self.suites.len()));
        s
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    SelftestReport {
        suites: vec![
            symmetry_suite(opts.seed),
            gradient_suite(opts.seed, opts.corrupt_gradient),
            metric_oracle_suite(),
            symmetrize_suite(opts.seed),
        ],
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_net(rng: &mut ChaCha8Rng, d: usize, h: usize, act: Activation) -> WeightSharedComparator {
    let params = random_vec(rng, Layout { d, h }.len(), 2.0);
    WeightSharedComparator::from_params(d, h, act, params).expect("valid shape")
}

pub fn symmetry_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 1000;
    let mut failures = 0;
    for c in 0..cases {
        let d = rng.gen_range(1..=8);
        let h = rng.gen_range(1..=6);
        let act = if c % 2 == 0 {
            Activation::Logistic
        } else {
            Activation::Tanh
        };
        let net = random_net(&mut rng, d, h, act);
        let x = random_vec(&mut rng, d, 3.0);
        let y = random_vec(&mut rng, d, 3.0);
        let a = net.forward_unchecked(&x, &y);
        let b = net.forward_unchecked(&y, &x);
        let diag = net.forward_unchecked(&x, &x);
        if a.n_succ.to_bits() != b.n_prec.to_bits()
            || a.n_prec.to_bits() != b.n_succ.to_bits()
            || diag.n_succ.to_bits() != diag.n_prec.to_bits()
        {
            failures += 1;
        }
    }
    SuiteResult {
        name: "symmetry",
        cases,
        failures,
        detail: "bit-exact".into(),
    }
}

/// Largest relative error `|analytic - fd| / max(1, |fd|)` over all stored
/// parameters, using central differences with step `1e-5`.
pub fn max_gradient_error(
    net: &WeightSharedComparator,
    x: &[f64],
    y: &[f64],
    target: Target,
    corrupt: bool,
) -> f64 {
    const STEP: f64 = 1e-5;
    let mut analytic = net.gradient(x, y, target).expect("matching dims");
    if corrupt {
        analytic.values_mut().iter_mut().for_each(|g| *g += 1e-2);
    }
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for idx in 0..net.params().len() {
        let orig = probe.params()[idx];
        probe.params_mut()[idx] = orig + STEP;
        let plus = target_loss(&probe.forward_unchecked(x, y), target);
        probe.params_mut()[idx] = orig - STEP;
        let minus = target_loss(&probe.forward_unchecked(x, y), target);
        probe.params_mut()[idx] = orig;
        let fd = (plus - minus) / (2.0 * STEP);
        let err = (analytic.values()[idx] - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

pub fn gradient_suite(seed: u64, corrupt: bool) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut cases = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for d in [1, 3, 7] {
        for h in [1, 2, 5] {
            for act in [Activation::Logistic, Activation::Tanh] {
                for target in [Target::Succ, Target::Prec] {
                    let net = random_net(&mut rng, d, h, act);
                    let x = random_vec(&mut rng, d, 1.0);
                    let y = random_vec(&mut rng, d, 1.0);
                    let err = max_gradient_error(&net, &x, &y, target, corrupt);
                    worst = worst.max(err);
                    cases += 1;
                    if err.is_nan() || err >= 1e-4 {
                        failures += 1;
                    }
                }
            }
        }
    }
    SuiteResult {
        name: "gradient-check",
        cases,
        failures,
        detail: format!("max rel err {worst:.2e}"),
    }
}

fn naive_precision(rel: &[bool], n: usize) -> f64 {
    let mut hits = 0;
    for r in &rel[..n] {
        if *r {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

fn naive_ap(rel: &[bool]) -> Option<f64> {
    let total = rel.iter().filter(|r| **r).count();
    if total == 0 {
        return None;
    }
    let mut sum = 0.0;
    for n in 1..=rel.len() {
        if rel[n - 1] {
            sum += naive_precision(rel, n);
        }
    }
    Some(sum / total as f64)
}

fn naive_dcg(rel: &[bool], n: usize) -> f64 {
    let mut s = 0.0;
    for (j, r) in rel[..n].iter().enumerate() {
        let gain = if *r { 1.0 } else { 0.0 };
        s += gain / (1.0 + (j + 1) as f64).ln();
    }
    s
}

/// NDCG with the ideal found by trying every arrangement of the list's
/// relevant documents.
fn naive_ndcg(rel: &[bool], n: usize) -> f64 {
    let len = rel.len();
    let k = rel.iter().filter(|r| **r).count();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << len) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let arrangement: Vec<bool> = (0..len).map(|j| mask >> j & 1 == 1).collect();
        best = best.max(naive_dcg(&arrangement, n));
    }
    if best == 0.0 {
        0.0
    } else {
        naive_dcg(rel, n) / best
    }
}

pub fn metric_oracle_suite() -> SuiteResult {
    let mut cases = 0;
    let mut failures = 0;
    let mut lists = Vec::new();
    for len in 1..=8usize {
        for mask in 0u32..(1 << len) {
            let rel: Vec<bool> = (0..len).map(|j| mask >> j & 1 == 1).collect();
            let list = RelevanceList::from_binary(&rel);
            for n in 1..=len {
                cases += 2;
                if precision_at(&list, n).ok() != Some(naive_precision(&rel, n)) {
                    failures += 1;
                }
                if ndcg_at(&list, n).ok() != Some(naive_ndcg(&rel, n)) {
                    failures += 1;
                }
            }
            cases += 1;
            if average_precision(&list) != naive_ap(&rel) {
                failures += 1;
            }
            lists.push((rel, list));
        }
    }
    // MAP over consecutive windows of the enumeration
    for w in lists.windows(3) {
        cases += 1;
        let aps: Vec<f64> = w.iter().filter_map(|(r, _)| naive_ap(r)).collect();
        let naive = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
        let got: Vec<RelevanceList> = w.iter().map(|(_, l)| l.clone()).collect();
        if mean_average_precision(&got).ok() != naive {
            failures += 1;
        }
    }
    SuiteResult {
        name: "metric-oracle",
        cases,
        failures,
        detail: "exact".into(),
    }
}

pub fn symmetrize_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let cases = 100;
    let mut failures = 0;
    for c in 0..cases {
        let d = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=8);
        let act = if c % 2 == 0 {
            Activation::Logistic
        } else {
            Activation::Tanh
        };
        let plain = PlainThreeLayerNet::random(d, m, act, rng.gen());
        let b = symmetrize_network(&plain).expect("valid plain net");
        let x = random_vec(&mut rng, d, 2.0);
        let y = random_vec(&mut rng, d, 2.0);
        let (rs_xy, rp_xy) = plain.output(&x, &y).expect("dims");
        let (rs_yx, rp_yx) = plain.output(&y, &x).expect("dims");
        let (bs, bp) = b.forward(&x, &y).expect("dims");
        let (bs_sw, bp_sw) = b.forward(&y, &x).expect("dims");
        let decomposes = (bs - (rs_xy + rp_yx)).abs() <= 1e-12 && (bp - (rp_xy + rs_yx)).abs() <= 1e-12;
        let symmetric = bs.to_bits() == bp_sw.to_bits() && bp.to_bits() == bs_sw.to_bits();
        if !(decomposes && symmetric) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "symmetrize",
        cases,
        failures,
        detail: "tol 1e-12".into(),
    }
}
