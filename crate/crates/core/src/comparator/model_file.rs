//! Versioned text format for comparator parameters.
//!
//! ```text
//! sortnet-model v1
//! d=<int> H=<int> activation=<logistic|tanh>
//! v_x <H*d hex floats, row-major>
//! v_y <H*d hex floats>
//! b_h <H hex floats>
//! w_succ <H hex floats>
//! w_prec <H hex floats>
//! b_out <1 hex float>
//! ```
//!
//! Floats are written as C-style hexadecimal (`0x1.8p+1`), which reloads
//! bit-exactly, so save -> load -> save reproduces the same bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, Layout, WeightSharedComparator};
use crate::error::{Error, Result};

const MAGIC: &str = "sortnet-model v1";
const BLOCKS: [&str; 6] = ["v_x", "v_y", "b_h", "w_succ", "w_prec", "b_out"];

const MANTISSA_BITS: u32 = 52;
const MANTISSA_MASK: u64 = (1 << MANTISSA_BITS) - 1;
const EXP_BIAS: i64 = 1023;

/// Formats a finite float as a hexadecimal literal. Normal numbers use
/// `[-]0x1.<hex>p<exp>`, subnormals `[-]0x0.<hex>p-1022`, zero `[-]0x0p+0`.
pub fn format_hex_f64(v: f64) -> String {
    assert!(v.is_finite(), "hex formatting needs a finite value");
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let biased = ((bits >> MANTISSA_BITS) & 0x7ff) as i64;
    let mantissa = bits & MANTISSA_MASK;
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 {
        (0, 1 - EXP_BIAS)
    } else {
        (1, biased - EXP_BIAS)
    };
    let mut s = format!("{sign}0x{lead}");
    if mantissa != 0 {
        let digits = format!("{mantissa:013x}");
        let _ = write!(s, ".{}", digits.trim_end_matches('0'));
    }
    let _ = write!(s, "p{exp:+}");
    s
}

/// Parses the format produced by [`format_hex_f64`].
pub fn parse_hex_f64(s: &str) -> Result<f64> {
    let bad = || Error::Model(format!("malformed hex float '{s}'"));
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))
        .ok_or_else(bad)?;
    let (mant, exp) = rest.split_once(['p', 'P']).ok_or_else(bad)?;
    let exp: i64 = exp.parse().map_err(|_| bad())?;
    let (lead, frac) = match mant.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant, ""),
    };
    if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(&format!("{frac:0<13}"), 16).map_err(|_| bad())?
    };
    let sign_bit = u64::from(negative) << 63;
    let bits = match lead {
        "1" => {
            let biased = exp + EXP_BIAS;
            if !(1..=2046).contains(&biased) {
                return Err(bad());
            }
            ((biased as u64) << MANTISSA_BITS) | frac_bits
        }
        "0" if frac_bits == 0 => 0,
        "0" => {
            if exp != 1 - EXP_BIAS {
                return Err(bad());
            }
            frac_bits
        }
        _ => return Err(bad()),
    };
    Ok(f64::from_bits(sign_bit | bits))
}

impl WeightSharedComparator {
    pub fn to_model_string(&self) -> Result<String> {
        if let Some(idx) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Model(format!(
                "refusing to save non-finite parameter in {}",
                self.layout.block_name(idx)
            )));
        }
        let l = self.layout;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "d={} H={} activation={}", l.d, l.h, self.activation.tag());
        let ranges = [
            l.v_x(),
            l.v_y(),
            l.b_h(),
            l.w_succ(),
            l.w_prec(),
            l.b_out()..l.b_out() + 1,
        ];
        for (name, range) in BLOCKS.iter().zip(ranges) {
            out.push_str(name);
            for v in &self.params[range] {
                out.push(' ');
                out.push_str(&format_hex_f64(*v));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(MAGIC) => {}
            Some(other) => {
                return Err(Error::Model(format!(
                    "unsupported header '{other}', expected '{MAGIC}'"
                )))
            }
            None => return Err(Error::Model("empty model file".into())),
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Model("missing shape line".into()))?;
        let (mut d, mut h, mut activation) = (None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Model(format!("bad shape field '{field}'")))?;
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Model(format!("bad integer in '{field}'")))
            };
            match key {
                "d" => d = Some(int()?),
                "H" => h = Some(int()?),
                "activation" => activation = Some(value.parse::<Activation>()?),
                _ => return Err(Error::Model(format!("unknown shape field '{key}'"))),
            }
        }
        let (Some(d), Some(h), Some(activation)) = (d, h, activation) else {
            return Err(Error::Model("shape line needs d, H and activation".into()));
        };
        let layout = Layout { d, h };
        let sizes = [h * d, h * d, h, h, h, 1];
        let mut params = Vec::with_capacity(layout.len());
        for (name, size) in BLOCKS.iter().zip(sizes) {
            let line = lines
                .next()
                .ok_or_else(|| Error::Model(format!("missing block {name}")))?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some(name) {
                return Err(Error::Model(format!("expected block {name}, found '{line}'")));
            }
            let before = params.len();
            for f in fields {
                params.push(parse_hex_f64(f)?);
            }
            if params.len() - before != size {
                return Err(Error::Model(format!(
                    "block {name} has {} values, expected {size}",
                    params.len() - before
                )));
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Model("trailing content after b_out".into()));
        }
        WeightSharedComparator::from_params(d, h, activation, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_model_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_model_str(&text)
    }
}
