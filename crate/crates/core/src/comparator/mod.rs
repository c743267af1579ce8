//! The weight-shared comparator network.
//!
//! A three-layer net reads the concatenated pair `<x, y>` and produces two
//! outputs, `succ` (evidence that `x` should precede `y`) and `prec` (the
//! reverse). Hidden units come in dual pairs `(i, i')`: unit `i'` sees the
//! input with `x` and `y` swapped and sends its output to the opposite
//! output node. Only the canonical half of the parameters is stored, so the
//! sharing rules cannot be broken by any update, and
//! `forward(x, y).succ == forward(y, x).prec` holds bit-for-bit.

mod model_file;
mod symmetrize;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model_file::{format_hex_f64, parse_hex_f64};
pub use symmetrize::{symmetrize_network, LinearOutputComparator, PlainThreeLayerNet};

/// Squashing function used on the hidden and output layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Logistic,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-a).exp()),
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output value.
    #[inline]
    pub fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Logistic => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// Outcome of comparing `x` against `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preference {
    /// `x` should be ranked before `y`.
    Succ,
    /// `y` should be ranked before `x`.
    Prec,
    Tie,
}

impl Preference {
    pub fn reversed(self) -> Self {
        match self {
            Preference::Succ => Preference::Prec,
            Preference::Prec => Preference::Succ,
            Preference::Tie => Preference::Tie,
        }
    }
}

/// Training target for an ordered pair: `[1, 0]` when `x` precedes `y`,
/// `[0, 1]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Succ,
    Prec,
}

impl Target {
    pub fn values(self) -> [f64; 2] {
        match self {
            Target::Succ => [1.0, 0.0],
            Target::Prec => [0.0, 1.0],
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Target::Succ => Target::Prec,
            Target::Prec => Target::Succ,
        }
    }

    pub fn agrees_with(self, pref: Preference) -> bool {
        matches!(
            (self, pref),
            (Target::Succ, Preference::Succ) | (Target::Prec, Preference::Prec)
        )
    }
}

impl TryFrom<[f64; 2]> for Target {
    type Error = Error;

    fn try_from(t: [f64; 2]) -> Result<Self> {
        if t == [1.0, 0.0] {
            Ok(Target::Succ)
        } else if t == [0.0, 1.0] {
            Ok(Target::Prec)
        } else {
            Err(Error::invalid(format!(
                "target must be [1, 0] or [0, 1], got {t:?}"
            )))
        }
    }
}

/// Shape of the canonical parameter vector. Blocks are stored contiguously
/// in the order `v_x, v_y, b_h, w_succ, w_prec, b_out`; the input weight
/// matrices are row-major `H x d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub d: usize,
    pub h: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        2 * self.h * self.d + 3 * self.h + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn v_x(&self) -> Range<usize> {
        0..self.h * self.d
    }

    pub fn v_y(&self) -> Range<usize> {
        let s = self.h * self.d;
        s..2 * s
    }

    pub fn b_h(&self) -> Range<usize> {
        let s = 2 * self.h * self.d;
        s..s + self.h
    }

    pub fn w_succ(&self) -> Range<usize> {
        let s = 2 * self.h * self.d + self.h;
        s..s + self.h
    }

    pub fn w_prec(&self) -> Range<usize> {
        let s = 2 * self.h * self.d + 2 * self.h;
        s..s + self.h
    }

    pub fn b_out(&self) -> usize {
        2 * self.h * self.d + 3 * self.h
    }

    /// Name of the block holding flat index `idx`, for diagnostics.
    pub fn block_name(&self, idx: usize) -> &'static str {
        if self.v_x().contains(&idx) {
            "v_x"
        } else if self.v_y().contains(&idx) {
            "v_y"
        } else if self.b_h().contains(&idx) {
            "b_h"
        } else if self.w_succ().contains(&idx) {
            "w_succ"
        } else if self.w_prec().contains(&idx) {
            "w_prec"
        } else {
            "b_out"
        }
    }
}

/// Activations recorded by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `h_i` at slot `2i`, its dual `h_i'` at slot `2i + 1`.
    pub hidden: Vec<f64>,
    pub n_succ: f64,
    pub n_prec: f64,
}

impl ForwardTrace {
    pub fn preference(&self) -> Preference {
        if self.n_succ > self.n_prec {
            Preference::Succ
        } else if self.n_prec > self.n_succ {
            Preference::Prec
        } else {
            Preference::Tie
        }
    }
}

/// Squared error `(t1 - succ)^2 + (t2 - prec)^2` of a trace against a raw
/// target vector. Only `[1, 0]` and `[0, 1]` are accepted.
pub fn loss(trace: &ForwardTrace, target: [f64; 2]) -> Result<f64> {
    let target = Target::try_from(target)?;
    Ok(target_loss(trace, target))
}

pub(crate) fn target_loss(trace: &ForwardTrace, target: Target) -> f64 {
    let [t1, t2] = target.values();
    let e1 = t1 - trace.n_succ;
    let e2 = t2 - trace.n_prec;
    e1 * e1 + e2 * e2
}

/// Gradient of the squared error with respect to the canonical parameters,
/// laid out exactly like [`WeightSharedComparator::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradient {
    layout: Layout,
    values: Vec<f64>,
}

impl ParameterGradient {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Adds `other` into `self`; used for mini-batch accumulation.
    pub fn accumulate(&mut self, other: &ParameterGradient) -> Result<()> {
        if other.layout != self.layout {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// The comparator: canonical half of the shared weights plus activation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSharedComparator {
    layout: Layout,
    activation: Activation,
    params: Vec<f64>,
}

impl WeightSharedComparator {
    /// Uniform init in `[-r, r]`, `r = 1 / sqrt(2d)`, deterministic per seed.
    pub fn init_random(d: usize, h: usize, activation: Activation, seed: u64) -> Result<Self> {
        check_shape(d, h)?;
        let layout = Layout { d, h };
        let r = 1.0 / ((2 * d) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..layout.len()).map(|_| rng.gen_range(-r..=r)).collect();
        Ok(Self {
            layout,
            activation,
            params,
        })
    }

    /// All-zero parameters. Every comparison on such a net is a tie.
    pub fn zeros(d: usize, h: usize, activation: Activation) -> Result<Self> {
        check_shape(d, h)?;
        let layout = Layout { d, h };
        Ok(Self {
            layout,
            activation,
            params: vec![0.0; layout.len()],
        })
    }

    pub fn from_params(d: usize, h: usize, activation: Activation, params: Vec<f64>) -> Result<Self> {
        check_shape(d, h)?;
        let layout = Layout { d, h };
        if params.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: params.len(),
            });
        }
        Ok(Self {
            layout,
            activation,
            params,
        })
    }

    pub fn d(&self) -> usize {
        self.layout.d
    }

    pub fn hidden_pairs(&self) -> usize {
        self.layout.h
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn v_x(&self) -> &[f64] {
        &self.params[self.layout.v_x()]
    }

    pub fn v_y(&self) -> &[f64] {
        &self.params[self.layout.v_y()]
    }

    pub fn b_h(&self) -> &[f64] {
        &self.params[self.layout.b_h()]
    }

    pub fn w_succ(&self) -> &[f64] {
        &self.params[self.layout.w_succ()]
    }

    pub fn w_prec(&self) -> &[f64] {
        &self.params[self.layout.w_prec()]
    }

    pub fn b_out(&self) -> f64 {
        self.params[self.layout.b_out()]
    }

    /// Pre-activation of canonical hidden unit `i` on the ordered input
    /// `(a, b)`. The dual unit's pre-activation on `(x, y)` is this same
    /// function evaluated on `(y, x)`, so the two share one code path and
    /// one floating-point operation sequence.
    #[inline]
    fn hidden_pre(&self, i: usize, a: &[f64], b: &[f64]) -> f64 {
        let d = self.layout.d;
        let vx = &self.v_x()[i * d..(i + 1) * d];
        let vy = &self.v_y()[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for (w, v) in vx.iter().zip(a) {
            acc += w * v;
        }
        for (w, v) in vy.iter().zip(b) {
            acc += w * v;
        }
        acc + self.b_h()[i]
    }

    fn check_inputs(&self, x: &[f64], y: &[f64]) -> Result<()> {
        for v in [x, y] {
            if v.len() != self.layout.d {
                return Err(Error::DimensionMismatch {
                    expected: self.layout.d,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Hidden activations in canonical slot order.
    fn hidden(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut hidden = Vec::with_capacity(2 * self.layout.h);
        for i in 0..self.layout.h {
            hidden.push(self.activation.apply(self.hidden_pre(i, x, y)));
            hidden.push(self.activation.apply(self.hidden_pre(i, y, x)));
        }
        hidden
    }

    /// Output pre-activations `(succ, prec)` given hidden activations.
    ///
    /// Each dual pair contributes one parenthesized two-term sum. Swapping
    /// the input swaps `h_i` with `h_i'`, which turns the `succ` pair sum
    /// into the `prec` pair sum with its operands commuted; a single IEEE
    /// addition is commutative, so the results agree exactly.
    fn output_pre(&self, hidden: &[f64]) -> (f64, f64) {
        let (ws, wp) = (self.w_succ(), self.w_prec());
        let mut succ = 0.0;
        let mut prec = 0.0;
        for i in 0..self.layout.h {
            let (h, hd) = (hidden[2 * i], hidden[2 * i + 1]);
            succ += ws[i] * h + wp[i] * hd;
            prec += wp[i] * h + ws[i] * hd;
        }
        let b = self.b_out();
        (succ + b, prec + b)
    }

    pub fn forward(&self, x: &[f64], y: &[f64]) -> Result<ForwardTrace> {
        self.check_inputs(x, y)?;
        Ok(self.forward_unchecked(x, y))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64], y: &[f64]) -> ForwardTrace {
        let hidden = self.hidden(x, y);
        let (succ, prec) = self.output_pre(&hidden);
        ForwardTrace {
            hidden,
            n_succ: self.activation.apply(succ),
            n_prec: self.activation.apply(prec),
        }
    }

    /// Outputs before the final squashing. Used by the linear-output variant.
    pub fn forward_pre_activation(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        self.check_inputs(x, y)?;
        Ok(self.output_pre(&self.hidden(x, y)))
    }

    pub fn compare(&self, x: &[f64], y: &[f64]) -> Result<Preference> {
        Ok(self.forward(x, y)?.preference())
    }

    pub(crate) fn compare_unchecked(&self, x: &[f64], y: &[f64]) -> Preference {
        self.forward_unchecked(x, y).preference()
    }

    /// Exact gradient of the squared error on one pair.
    ///
    /// Every stored weight stands for two logical connections (the canonical
    /// one and its mirror on the dual unit), so each entry sums both paths.
    pub fn gradient(&self, x: &[f64], y: &[f64], target: Target) -> Result<ParameterGradient> {
        self.check_inputs(x, y)?;
        Ok(self.gradient_with_trace(x, y, target).0)
    }

    pub(crate) fn gradient_with_trace(
        &self,
        x: &[f64],
        y: &[f64],
        target: Target,
    ) -> (ParameterGradient, ForwardTrace) {
        let act = self.activation;
        let layout = self.layout;
        let (d, h) = (layout.d, layout.h);
        let trace = self.forward_unchecked(x, y);
        let [t1, t2] = target.values();

        let delta_succ = -2.0 * (t1 - trace.n_succ) * act.derivative_from_output(trace.n_succ);
        let delta_prec = -2.0 * (t2 - trace.n_prec) * act.derivative_from_output(trace.n_prec);

        let mut grad = ParameterGradient::zeros(layout);
        let g = &mut grad.values;
        let (ws, wp) = (self.w_succ(), self.w_prec());

        for i in 0..h {
            let hi = trace.hidden[2 * i];
            let hd = trace.hidden[2 * i + 1];

            g[layout.w_succ().start + i] = delta_succ * hi + delta_prec * hd;
            g[layout.w_prec().start + i] = delta_succ * hd + delta_prec * hi;

            let gamma = (delta_succ * ws[i] + delta_prec * wp[i]) * act.derivative_from_output(hi);
            let gamma_dual = (delta_succ * wp[i] + delta_prec * ws[i]) * act.derivative_from_output(hd);

            g[layout.b_h().start + i] = gamma + gamma_dual;
            let vx0 = layout.v_x().start + i * d;
            let vy0 = layout.v_y().start + i * d;
            for k in 0..d {
                // unit i reads (x, y); its dual reads (y, x) through the same weights
                g[vx0 + k] = gamma * x[k] + gamma_dual * y[k];
                g[vy0 + k] = gamma * y[k] + gamma_dual * x[k];
            }
        }
        g[layout.b_out()] = delta_succ + delta_prec;
        (grad, trace)
    }

    /// Plain gradient-descent step. Rejects non-finite gradients and leaves
    /// the net untouched in that case.
    pub fn apply_update(&mut self, grad: &ParameterGradient, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if grad.layout != self.layout {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grad.values.len(),
            });
        }
        if let Some(idx) = grad.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::TrainingFault(format!(
                "non-finite gradient entry in {} (flat index {idx})",
                self.layout.block_name(idx)
            )));
        }
        for (p, g) in self.params.iter_mut().zip(&grad.values) {
            *p -= learning_rate * g;
        }
        Ok(())
    }
}

fn check_shape(d: usize, h: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("feature dimension d must be at least 1"));
    }
    if h == 0 {
        return Err(Error::invalid("hidden pair count H must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn logistic(a: f64) -> f64 {
        1.0 / (1.0 + (-a).exp())
    }

    fn tiny_net() -> WeightSharedComparator {
        // d=1, H=1: v_x=[[1]], v_y=[[0]], b_h=[0], w_succ=[1], w_prec=[0], b_out=0
        WeightSharedComparator::from_params(1, 1, Activation::Logistic, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
            .unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = WeightSharedComparator::init_random(2, 3, Activation::Logistic, 7).unwrap();
        let b = WeightSharedComparator::init_random(2, 3, Activation::Logistic, 7).unwrap();
        assert_eq!(a, b);
        let c = WeightSharedComparator::init_random(2, 3, Activation::Logistic, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_empty_shapes() {
        assert!(WeightSharedComparator::init_random(0, 1, Activation::Logistic, 0).is_err());
        assert!(WeightSharedComparator::init_random(1, 0, Activation::Logistic, 0).is_err());
    }

    #[test]
    fn init_range_is_fan_in_scaled() {
        let net = WeightSharedComparator::init_random(44, 10, Activation::Logistic, 1).unwrap();
        assert_eq!(net.v_x().len(), 10 * 44);
        assert_eq!(net.v_y().len(), 10 * 44);
        let r = 1.0 / 88f64.sqrt();
        assert!(net.params().iter().all(|p| p.abs() <= r));
    }

    #[test]
    fn hand_computed_forward() {
        let t = tiny_net().forward(&[0.0], &[0.0]).unwrap();
        assert_eq!(t.hidden, vec![0.5, 0.5]);
        let expected = logistic(0.5);
        assert_eq!(t.n_succ, expected);
        assert_eq!(t.n_prec, expected);
        assert!((expected - 0.622459).abs() < 1e-6);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = tiny_net();
        assert!(matches!(
            net.forward(&[0.0, 1.0], &[0.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn loss_values() {
        let perfect = ForwardTrace {
            hidden: vec![],
            n_succ: 1.0,
            n_prec: 0.0,
        };
        assert_eq!(loss(&perfect, [1.0, 0.0]).unwrap(), 0.0);
        let half = ForwardTrace {
            hidden: vec![],
            n_succ: 0.5,
            n_prec: 0.5,
        };
        assert_eq!(loss(&half, [1.0, 0.0]).unwrap(), 0.5);
        let t = tiny_net().forward(&[0.0], &[0.0]).unwrap();
        let e = loss(&t, [0.0, 1.0]).unwrap();
        // sigma(0.5)^2 + (1 - sigma(0.5))^2, evaluated independently
        assert!((e - 0.529_992_575_596_811).abs() < 1e-12, "{e}");
        assert!(loss(&half, [0.5, 0.5]).is_err());
        assert!(loss(&half, [1.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        // saturated logistic outputs hit 1.0 and 0.0 exactly, so E = 0
        let net = WeightSharedComparator::from_params(
            1,
            1,
            Activation::Logistic,
            vec![100.0, -100.0, 0.0, 100.0, -1000.0, 0.0],
        )
        .unwrap();
        let t = net.forward(&[1.0], &[-1.0]).unwrap();
        assert_eq!((t.n_succ, t.n_prec), (1.0, 0.0));
        assert_eq!(loss(&t, [1.0, 0.0]).unwrap(), 0.0);
        let g = net.gradient(&[1.0], &[-1.0], Target::Succ).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0), "{:?}", g.values());
    }

    #[test]
    fn update_arithmetic() {
        let mut net = tiny_net();
        let mut g = ParameterGradient::zeros(net.layout());
        g.values_mut()[0] = 0.5;
        net.apply_update(&g, 0.1).unwrap();
        assert_eq!(net.v_x()[0], 0.95);

        let before = net.clone();
        net.apply_update(&ParameterGradient::zeros(net.layout()), 0.1)
            .unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut net = tiny_net();
        let before = net.clone();
        let mut g = ParameterGradient::zeros(net.layout());
        g.values_mut()[3] = f64::NAN;
        let err = net.apply_update(&g, 0.1).unwrap_err();
        assert!(matches!(err, Error::TrainingFault(_)));
        assert!(err.to_string().contains("w_succ"));
        assert_eq!(net, before);
        assert!(net
            .apply_update(&ParameterGradient::zeros(net.layout()), 0.0)
            .is_err());
    }

    #[test]
    fn one_step_decreases_loss() {
        let net0 = WeightSharedComparator::init_random(3, 2, Activation::Logistic, 11).unwrap();
        let (x, y) = ([0.2, -0.4, 0.9], [-0.7, 0.1, 0.3]);
        let e0 = target_loss(&net0.forward(&x, &y).unwrap(), Target::Succ);
        let mut net = net0.clone();
        let g = net.gradient(&x, &y, Target::Succ).unwrap();
        net.apply_update(&g, 1e-3).unwrap();
        let e1 = target_loss(&net.forward(&x, &y).unwrap(), Target::Succ);
        assert!(e1 < e0, "{e1} !< {e0}");
    }

    #[test]
    fn zero_net_ties_everything() {
        let net = WeightSharedComparator::zeros(4, 3, Activation::Logistic).unwrap();
        assert_eq!(
            net.compare(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap(),
            Preference::Tie
        );
    }

    fn net_strategy() -> impl Strategy<Value = (WeightSharedComparator, Vec<f64>, Vec<f64>)> {
        (1usize..6, 1usize..5, any::<bool>()).prop_flat_map(|(d, h, tanh)| {
            let act = if tanh {
                Activation::Tanh
            } else {
                Activation::Logistic
            };
            let layout = Layout { d, h };
            (
                prop::collection::vec(-3.0f64..3.0, layout.len()),
                prop::collection::vec(-5.0f64..5.0, d),
                prop::collection::vec(-5.0f64..5.0, d),
            )
                .prop_map(move |(p, x, y)| (WeightSharedComparator::from_params(d, h, act, p).unwrap(), x, y))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn symmetry_is_bit_exact((net, x, y) in net_strategy()) {
            let a = net.forward(&x, &y).unwrap();
            let b = net.forward(&y, &x).unwrap();
            prop_assert_eq!(a.n_succ.to_bits(), b.n_prec.to_bits());
            prop_assert_eq!(a.n_prec.to_bits(), b.n_succ.to_bits());
            let d = net.forward(&x, &x).unwrap();
            prop_assert_eq!(d.n_succ.to_bits(), d.n_prec.to_bits());
        }

        #[test]
        fn compare_is_antisymmetric((net, x, y) in net_strategy()) {
            let ab = net.compare(&x, &y).unwrap();
            let ba = net.compare(&y, &x).unwrap();
            prop_assert_eq!(ab, ba.reversed());
            prop_assert_eq!(net.compare(&x, &x).unwrap(), Preference::Tie);
        }

        #[test]
        fn hidden_values_in_activation_range((net, x, y) in net_strategy()) {
            let t = net.forward(&x, &y).unwrap();
            let (lo, hi) = match net.activation() {
                Activation::Logistic => (0.0, 1.0),
                Activation::Tanh => (-1.0, 1.0),
            };
            prop_assert!(t.hidden.iter().all(|v| (lo..=hi).contains(v)));
        }
    }
}
