//! Elementwise interval matrices.
//!
//! Vectors are carried as `n x 1` matrices so that the slope hulls and the
//! bias hulls of an activation layer share one code path.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Entrywise bounds `lower <= M <= upper` on a real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lower: Array2<f64>,
    upper: Array2<f64>,
}

impl IntervalMatrix {
    pub fn new(lower: Array2<f64>, upper: Array2<f64>) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::Dimension(format!(
                "interval bounds have shapes {:?} and {:?}",
                lower.dim(),
                upper.dim()
            )));
        }
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("interval bound is not finite".into()));
        }
        if Zip::from(&lower).and(&upper).any(|&lo, &hi| lo > hi) {
            return Err(Error::InvalidInput("interval with lower > upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The degenerate interval `[m, m]`.
    pub fn exact(m: ArrayView2<'_, f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entry is not finite".into()));
        }
        Ok(Self {
            lower: m.to_owned(),
            upper: m.to_owned(),
        })
    }

    /// Column vector `[v, v]` as an `n x 1` interval matrix.
    pub fn exact_column(v: &[f64]) -> Result<Self> {
        let m = Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape");
        Self::exact(m.view())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            lower: Array2::zeros((rows, cols)),
            upper: Array2::zeros((rows, cols)),
        }
    }

    /// Entrywise min/max over a non-empty set of equally shaped matrices.
    pub fn hull<'a, I>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let mut iter = pieces.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidInput("hull of an empty sequence".into()))?;
        let mut out = Self::exact(first)?;
        for m in iter {
            if m.dim() != out.dim() {
                return Err(Error::Dimension(format!(
                    "hull pieces have shapes {:?} and {:?}",
                    out.dim(),
                    m.dim()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("matrix entry is not finite".into()));
            }
            Zip::from(&mut out.lower)
                .and(&mut out.upper)
                .and(&m)
                .for_each(|lo, hi, &v| {
                    *lo = lo.min(v);
                    *hi = hi.max(v);
                });
        }
        Ok(out)
    }

    /// Copy of `self` with the rows in `rows` replaced by the hull of the
    /// corresponding rows of `pieces`; all other rows are left untouched.
    pub fn hull_rows<'a, I>(&self, pieces: I, rows: &[usize]) -> Result<Self>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let hull = Self::hull(pieces)?;
        if hull.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "row hull of shape {:?} applied to {:?}",
                hull.dim(),
                self.dim()
            )));
        }
        let mut out = self.clone();
        for &r in rows {
            if r >= out.nrows() {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    width: out.nrows(),
                });
            }
            out.lower.row_mut(r).assign(&hull.lower.row(r));
            out.upper.row_mut(r).assign(&hull.upper.row(r));
        }
        Ok(out)
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array2<f64> {
        &self.upper
    }

    pub fn dim(&self) -> (usize, usize) {
        self.lower.dim()
    }

    pub fn nrows(&self) -> usize {
        self.lower.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.lower.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Overwrite one row with the exact values `row`.
    pub(crate) fn set_row_exact(&mut self, r: usize, row: &[f64]) {
        for (j, &v) in row.iter().enumerate() {
            self.lower[[r, j]] = v;
            self.upper[[r, j]] = v;
        }
    }

    /// Overwrite one row with elementwise bounds.
    pub(crate) fn set_row(&mut self, r: usize, lower: &[f64], upper: &[f64]) {
        for (j, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            self.lower[[r, j]] = lo;
            self.upper[[r, j]] = hi;
        }
    }

    /// Whether `m` is a realization of this interval matrix.
    pub fn contains(&self, m: ArrayView2<'_, f64>, tol: f64) -> bool {
        m.dim() == self.dim()
            && Zip::from(&self.lower)
                .and(&self.upper)
                .and(&m)
                .all(|&lo, &hi, &v| v >= lo - tol && v <= hi + tol)
    }

    /// Sound product: every `A' B'` with `A' in self`, `B' in rhs` lies inside
    /// the result. Each scalar product is the exact hull of the four endpoint
    /// products; accumulation is plain floating point.
    pub fn matmul(&self, rhs: &IntervalMatrix) -> Result<IntervalMatrix> {
        let (m, k) = self.dim();
        let (k2, n) = rhs.dim();
        if k != k2 {
            return Err(Error::Dimension(format!(
                "interval product of {m}x{k} and {k2}x{n}"
            )));
        }
        let mut lower = Array2::zeros((m, n));
        let mut upper = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                let (mut lo, mut hi) = (0.0, 0.0);
                for t in 0..k {
                    let (a_lo, a_hi) = (self.lower[[i, t]], self.upper[[i, t]]);
                    let (b_lo, b_hi) = (rhs.lower[[t, j]], rhs.upper[[t, j]]);
                    let (p_lo, p_hi) = scalar_product(a_lo, a_hi, b_lo, b_hi);
                    lo += p_lo;
                    hi += p_hi;
                }
                lower[[i, j]] = lo;
                upper[[i, j]] = hi;
            }
        }
        Ok(IntervalMatrix { lower, upper })
    }

    /// `U[i][j] = max(|lower[i][j]|, |upper[i][j]|)`, the smallest matrix
    /// dominating every realization in absolute value.
    pub fn abs_upper_envelope(&self) -> Array2<f64> {
        Zip::from(&self.lower)
            .and(&self.upper)
            .map_collect(|lo, hi| lo.abs().max(hi.abs()))
    }
}

fn scalar_product(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> (f64, f64) {
    // Degenerate factors are the common case (exact weights).
    if a_lo == a_hi && b_lo == b_hi {
        let p = a_lo * b_lo;
        return (p, p);
    }
    let products = [a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi];
    let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
