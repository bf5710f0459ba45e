//! Induced operator norms `||A||_{p->q}` for p, q in {1, 2, inf}.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormOrder {
    One,
    Two,
    Inf,
}

impl NormOrder {
    /// Hoelder conjugate: 1/p + 1/p' = 1.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::One => NormOrder::Inf,
            NormOrder::Two => NormOrder::Two,
            NormOrder::Inf => NormOrder::One,
        }
    }

    pub fn vector_norm(self, v: ArrayView1<'_, f64>) -> f64 {
        match self {
            NormOrder::One => v.iter().map(|x| x.abs()).sum(),
            NormOrder::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        })
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "inf" | "infinity" | "∞" => Ok(NormOrder::Inf),
            other => Err(Error::Parse(format!("unknown norm order '{other}'"))),
        }
    }
}

/// Input/output norm orders of an induced norm. Only pairs with a cheap
/// closed form are representable: `p = q`, `p = 1`, or `q = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormPair {
    p: NormOrder,
    q: NormOrder,
}

impl NormPair {
    pub fn new(p: NormOrder, q: NormOrder) -> Result<Self> {
        let supported = p == q || p == NormOrder::One || q == NormOrder::Inf;
        if !supported {
            return Err(Error::UnsupportedNorm(format!("{p}->{q}")));
        }
        Ok(Self { p, q })
    }

    pub fn same(order: NormOrder) -> Self {
        Self { p: order, q: order }
    }

    pub fn p(&self) -> NormOrder {
        self.p
    }

    pub fn q(&self) -> NormOrder {
        self.q
    }

    pub fn is_symmetric(&self) -> bool {
        self.p == self.q
    }
}

impl Default for NormPair {
    fn default() -> Self {
        Self::same(NormOrder::Two)
    }
}

impl fmt::Display for NormPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p == self.q {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}:{}", self.p, self.q)
        }
    }
}

/// Parses `P` or `P:Q`. Syntax errors are [`Error::Parse`]; well-formed but
/// unsupported pairs are [`Error::UnsupportedNorm`].
impl FromStr for NormPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let p: NormOrder = parts.next().unwrap_or("").parse()?;
        let q = match parts.next() {
            Some(q) => q.parse()?,
            None => p,
        };
        if parts.next().is_some() {
            return Err(Error::Parse(format!("malformed norm pair '{s}'")));
        }
        NormPair::new(p, q)
    }
}

impl Serialize for NormPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// `max_{x != 0} ||A x||_q / ||x||_p`.
pub fn induced_norm(a: ArrayView2<'_, f64>, np: NormPair) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix entry is not finite".into()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let value = match (np.p, np.q) {
        (NormOrder::Two, NormOrder::Two) => spectral_norm(a),
        (NormOrder::One, q) => a
            .columns()
            .into_iter()
            .map(|c| q.vector_norm(c))
            .fold(0.0, f64::max),
        (p, NormOrder::Inf) => a
            .rows()
            .into_iter()
            .map(|r| p.dual().vector_norm(r))
            .fold(0.0, f64::max),
        (p, q) => return Err(Error::UnsupportedNorm(format!("{p}->{q}"))),
    };
    Ok(value)
}

/// Largest singular value via a cyclic Jacobi eigen-solve of the smaller Gram
/// matrix.
fn spectral_norm(a: ArrayView2<'_, f64>) -> f64 {
    let gram = if a.nrows() <= a.ncols() {
        a.dot(&a.t())
    } else {
        a.t().dot(&a)
    };
    let lambda = max_symmetric_eigenvalue(gram);
    lambda.max(0.0).sqrt()
}

fn max_symmetric_eigenvalue(mut s: Array2<f64>) -> f64 {
    let n = s.nrows();
    if n == 1 {
        return s[[0, 0]];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[[i, j]] * s[[i, j]])
            .sum();
        let diag: f64 = (0..n).map(|i| s[[i, i]] * s[[i, i]]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = s[[p, p]];
                let aqq = s[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[[k, p]];
                    let skq = s[[k, q]];
                    s[[k, p]] = c * skp - sn * skq;
                    s[[k, q]] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[[p, k]];
                    let sqk = s[[q, k]];
                    s[[p, k]] = c * spk - sn * sqk;
                    s[[q, k]] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}
