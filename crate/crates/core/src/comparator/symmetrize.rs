//! Doubling an unconstrained pair network into a weight-shared one.
//!
//! Given any three-layer net `A: R^{2d} -> R^2` with linear outputs, the
//! doubled net `B` keeps `A`'s hidden units as the canonical half and
//! derives the dual half by the sharing rules. Its outputs decompose as
//! `out_succ(x, y) = r_succ(x, y) + r_prec(y, x)` and
//! `out_prec(x, y) = r_prec(x, y) + r_succ(y, x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, WeightSharedComparator};
use crate::error::{Error, Result};

/// An ordinary three-layer network on the concatenated pair, no sharing,
/// linear output units.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainThreeLayerNet {
    pub d: usize,
    pub activation: Activation,
    /// `m x 2d`, row-major; columns `0..d` read `x`, columns `d..2d` read `y`.
    pub input_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// Weights from each hidden unit to the `succ` output.
    pub out_succ: Vec<f64>,
    /// Weights from each hidden unit to the `prec` output.
    pub out_prec: Vec<f64>,
    /// Output biases `[succ, prec]`.
    pub out_bias: [f64; 2],
}

impl PlainThreeLayerNet {
    pub fn hidden_units(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn random(d: usize, m: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let input_weights = draw(m * 2 * d);
        let hidden_bias = draw(m);
        let out_succ = draw(m);
        let out_prec = draw(m);
        let b = draw(2);
        Self {
            d,
            activation,
            input_weights,
            hidden_bias,
            out_succ,
            out_prec,
            out_bias: [b[0], b[1]],
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.hidden_units();
        if self.d == 0 || m == 0 {
            return Err(Error::invalid(
                "plain net needs d >= 1 and at least one hidden unit",
            ));
        }
        let checks = [
            (m * 2 * self.d, self.input_weights.len()),
            (m, self.out_succ.len()),
            (m, self.out_prec.len()),
        ];
        for (expected, got) in checks {
            if expected != got {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        Ok(())
    }

    /// Linear outputs `(r_succ, r_prec)` on the pair `<x, y>`.
    pub fn output(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        self.validate()?;
        for v in [x, y] {
            if v.len() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: v.len(),
                });
            }
        }
        let d = self.d;
        let mut succ = self.out_bias[0];
        let mut prec = self.out_bias[1];
        for i in 0..self.hidden_units() {
            let row = &self.input_weights[i * 2 * d..(i + 1) * 2 * d];
            let a: f64 = row[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                + row[d..].iter().zip(y).map(|(w, v)| w * v).sum::<f64>()
                + self.hidden_bias[i];
            let h = self.activation.apply(a);
            succ += self.out_succ[i] * h;
            prec += self.out_prec[i] * h;
        }
        Ok((succ, prec))
    }
}

/// A weight-shared comparator read at the output pre-activation, i.e. with
/// linear output units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutputComparator(WeightSharedComparator);

impl LinearOutputComparator {
    pub fn forward(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        self.0.forward_pre_activation(x, y)
    }

    pub fn inner(&self) -> &WeightSharedComparator {
        &self.0
    }

    pub fn into_inner(self) -> WeightSharedComparator {
        self.0
    }
}

/// Builds the doubled network `B` from `plain`.
///
/// The shared output bias is `c_succ + c_prec`. When `A` already satisfies
/// the symmetry constraint its two biases coincide and this is twice `A`'s
/// bias; for arbitrary `A` it is what the decomposition requires while still
/// keeping one bias for both outputs.
pub fn symmetrize_network(plain: &PlainThreeLayerNet) -> Result<LinearOutputComparator> {
    plain.validate()?;
    let (d, m) = (plain.d, plain.hidden_units());
    let mut v_x = Vec::with_capacity(m * d);
    let mut v_y = Vec::with_capacity(m * d);
    for row in plain.input_weights.chunks_exact(2 * d) {
        v_x.extend_from_slice(&row[..d]);
        v_y.extend_from_slice(&row[d..]);
    }
    let mut params = v_x;
    params.extend(v_y);
    params.extend_from_slice(&plain.hidden_bias);
    params.extend_from_slice(&plain.out_succ);
    params.extend_from_slice(&plain.out_prec);
    params.push(plain.out_bias[0] + plain.out_bias[1]);
    let net = WeightSharedComparator::from_params(d, m, plain.activation, params)?;
    Ok(LinearOutputComparator(net))
}
