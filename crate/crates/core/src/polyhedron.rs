//! Half-space polyhedra `{x : C x <= c}` and the LP queries run on them.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};

/// Slack allowed by [`Polyhedron::is_feasible`].
pub const FEAS_TOL: f64 = 1e-9;

/// Chebyshev radius below which a polyhedron counts as lower-dimensional.
pub const INTERIOR_TOL: f64 = 1e-9;

const ZERO_ROW_TOL: f64 = 1e-12;

/// Closed polyhedron in half-space form. Nonzero rows of `C` have unit
/// Euclidean norm; zero rows are dropped when trivially satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    a: Array2<f64>,
    b: Array1<f64>,
}

impl Polyhedron {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        let dim = a.ncols();
        Self::with_dim(dim, a, b)
    }

    fn with_dim(dim: usize, a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "polyhedron dimension must be positive".into(),
            ));
        }
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} bounds",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() != dim {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} columns, dimension is {dim}",
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("non-finite constraint data".into()));
        }
        Ok(normalize(dim, a.view(), b.view()))
    }

    /// All of `R^dim`.
    pub fn unconstrained(dim: usize) -> Result<Self> {
        Self::with_dim(dim, Array2::zeros((0, dim)), Array1::zeros(0))
    }

    /// Axis-aligned box; infinite bounds produce no row.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "box bounds of lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        let dim = lower.len();
        let mut rows = Vec::new();
        let mut bounds = Vec::new();
        for i in 0..dim {
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::InvalidInput("NaN box bound".into()));
            }
            if lower[i] > upper[i] {
                return Err(Error::InvalidInput(format!(
                    "box coordinate {i} has lower {} > upper {}",
                    lower[i], upper[i]
                )));
            }
            if upper[i].is_finite() {
                let mut r = vec![0.0; dim];
                r[i] = 1.0;
                rows.push(r);
                bounds.push(upper[i]);
            }
            if lower[i].is_finite() {
                let mut r = vec![0.0; dim];
                r[i] = -1.0;
                rows.push(r);
                bounds.push(-lower[i]);
            }
        }
        let a = Array2::from_shape_vec((rows.len(), dim), rows.concat())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::with_dim(dim, a, Array1::from(bounds))
    }

    /// Hypercube `[lo, hi]^dim`.
    pub fn hypercube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_box(&vec![lo; dim], &vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn constraints(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn bounds(&self) -> ArrayView1<'_, f64> {
        self.b.view()
    }

    /// Intersection: the constraint rows of both polyhedra.
    pub fn stack(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "stacking polyhedra of dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        let a = ndarray::concatenate(Axis(0), &[self.a.view(), other.a.view()])
            .expect("equal column counts");
        let b = ndarray::concatenate(Axis(0), &[self.b.view(), other.b.view()]).expect("vectors");
        Ok(normalize(self.dim, a.view(), b.view()))
    }

    /// `{x : J x + offset in self}`.
    pub fn affine_preimage(
        &self,
        j: ArrayView2<'_, f64>,
        offset: ArrayView1<'_, f64>,
    ) -> Result<Polyhedron> {
        if j.nrows() != self.dim || offset.len() != self.dim {
            return Err(Error::Dimension(format!(
                "preimage of a {}-dimensional polyhedron through a {}x{} map with {} offsets",
                self.dim,
                j.nrows(),
                j.ncols(),
                offset.len()
            )));
        }
        let a = self.a.dot(&j);
        let b = &self.b - &self.a.dot(&offset);
        Self::with_dim(j.ncols(), a, b)
    }

    /// Embeds into `R^(dim + extra)` with the new coordinates unconstrained.
    pub fn extend_dims(&self, extra: usize) -> Polyhedron {
        let mut a = Array2::zeros((self.a.nrows(), self.dim + extra));
        a.slice_mut(s![.., ..self.dim]).assign(&self.a);
        Polyhedron {
            dim: self.dim + extra,
            a,
            b: self.b.clone(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim
            && self
                .a
                .rows()
                .into_iter()
                .zip(self.b.iter())
                .all(|(row, &c)| row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() <= c + tol)
    }

    /// A point with `C x <= c + FEAS_TOL`, if one exists.
    pub fn feasible_point(&self) -> Result<Option<Vec<f64>>> {
        if self.a.nrows() == 0 {
            return Ok(Some(vec![0.0; self.dim]));
        }
        let relaxed: Vec<f64> = self.b.iter().map(|c| c + FEAS_TOL).collect();
        match lp::maximize(self.a.view(), &relaxed, &vec![0.0; self.dim])? {
            LpOutcome::Optimal { x, .. } => Ok(Some(x)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::SolverFailure(
                "zero objective reported unbounded".into(),
            )),
        }
    }

    /// Closed feasibility with tolerance [`FEAS_TOL`].
    pub fn is_feasible(&self) -> Result<bool> {
        Ok(self.feasible_point()?.is_some())
    }

    /// `(inf, sup)` of `objective . x` over the polyhedron; unbounded
    /// directions give infinities.
    pub fn linear_bounds(&self, objective: &[f64]) -> Result<(f64, f64)> {
        if objective.len() != self.dim {
            return Err(Error::Dimension(format!(
                "objective of length {} for dimension {}",
                objective.len(),
                self.dim
            )));
        }
        let relaxed: Vec<f64> = self.b.iter().map(|c| c + FEAS_TOL).collect();
        let hi = match lp::maximize(self.a.view(), &relaxed, objective)? {
            LpOutcome::Optimal { value, .. } => value,
            LpOutcome::Unbounded => f64::INFINITY,
            LpOutcome::Infeasible => return Err(Error::InfeasibleRegion),
        };
        let neg: Vec<f64> = objective.iter().map(|v| -v).collect();
        let lo = match lp::maximize(self.a.view(), &relaxed, &neg)? {
            LpOutcome::Optimal { value, .. } => -value,
            LpOutcome::Unbounded => f64::NEG_INFINITY,
            LpOutcome::Infeasible => return Err(Error::InfeasibleRegion),
        };
        Ok((lo, hi))
    }

    /// Radius of the largest ball inside the polyhedron, capped at 1.
    /// Negative when the polyhedron is empty.
    pub fn chebyshev_radius(&self) -> Result<f64> {
        let m = self.a.nrows();
        if m == 0 {
            return Ok(1.0);
        }
        let d = self.dim;
        let mut a = Array2::zeros((m + 1, d + 1));
        let mut b = Vec::with_capacity(m + 1);
        for i in 0..m {
            let row = self.a.row(i);
            a.slice_mut(s![i, ..d]).assign(&row);
            a[[i, d]] = row.dot(&row).sqrt();
            b.push(self.b[i]);
        }
        a[[m, d]] = 1.0;
        b.push(1.0);
        let mut obj = vec![0.0; d + 1];
        obj[d] = 1.0;
        match lp::maximize(a.view(), &b, &obj)? {
            LpOutcome::Optimal { value, .. } => Ok(value),
            // only a zero row with a negative bound makes this LP infeasible
            LpOutcome::Infeasible => Ok(-1.0),
            LpOutcome::Unbounded => Err(Error::SolverFailure(
                "Chebyshev LP reported unbounded".into(),
            )),
        }
    }

    /// Whether the polyhedron is full-dimensional.
    pub fn has_interior(&self) -> Result<bool> {
        Ok(self.chebyshev_radius()? > INTERIOR_TOL)
    }

    /// Coordinate-wise bounding box; unbounded coordinates give infinities.
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>> {
        (0..self.dim)
            .map(|i| {
                let mut e = vec![0.0; self.dim];
                e[i] = 1.0;
                self.linear_bounds(&e)
            })
            .collect()
    }

    /// Parses a region file: `{"dim", "C", "c"}`, `{"box": {"lower", "upper"}}`
    /// or `{"global": d}`.
    pub fn from_region_json(text: &str) -> Result<Polyhedron> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_region_value(&value)
    }

    pub fn from_region_slice(bytes: &[u8]) -> Result<Polyhedron> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_region_value(&value)
    }

    fn from_region_value(value: &Value) -> Result<Polyhedron> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("region must be a JSON object".into()))?;
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        let form = if obj.contains_key("box") {
            check_fields("region", &keys, &["box"])?;
            RegionFile::Box(de(&obj["box"], "box")?)
        } else if obj.contains_key("global") {
            check_fields("region", &keys, &["global"])?;
            RegionFile::Global(de(&obj["global"], "global")?)
        } else {
            check_fields("region", &keys, &["dim", "C", "c"])?;
            RegionFile::HalfSpaces(de(value, "region")?)
        };
        match form {
            RegionFile::Global(d) => Self::unconstrained(d),
            RegionFile::Box(b) => Self::from_box(&b.lower, &b.upper),
            RegionFile::HalfSpaces(h) => {
                if h.c_mat.len() != h.c_vec.len() {
                    return Err(Error::Dimension(format!(
                        "region has {} rows in C and {} bounds",
                        h.c_mat.len(),
                        h.c_vec.len()
                    )));
                }
                if let Some(bad) = h.c_mat.iter().position(|r| r.len() != h.dim) {
                    return Err(Error::Dimension(format!(
                        "row {bad} of C has length {}, expected {}",
                        h.c_mat[bad].len(),
                        h.dim
                    )));
                }
                if h.c_vec.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("non-finite region bound".into()));
                }
                let a = Array2::from_shape_vec((h.c_mat.len(), h.dim), h.c_mat.concat())
                    .map_err(|e| Error::Parse(e.to_string()))?;
                Self::with_dim(h.dim, a, Array1::from(h.c_vec))
            }
        }
    }
}

enum RegionFile {
    Global(usize),
    Box(BoxSpec),
    HalfSpaces(HalfSpaceSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct HalfSpaceSpec {
    dim: usize,
    #[serde(rename = "C")]
    c_mat: Vec<Vec<f64>>,
    #[serde(rename = "c")]
    c_vec: Vec<f64>,
}

fn de<T: for<'de> Deserialize<'de>>(v: &Value, what: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub(crate) fn check_fields(context: &str, keys: &[&str], allowed: &[&str]) -> Result<()> {
    let unknown: Vec<String> = keys
        .iter()
        .filter(|k| !allowed.contains(k))
        .map(|k| k.to_string())
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::UnknownFields {
            context: context.to_string(),
            fields: unknown,
        })
    }
}

/// Unit-normalizes rows, drops trivially true zero rows and merges identical
/// rows (keeping the tightest bound).
fn normalize(dim: usize, a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Polyhedron {
    let mut rows: Vec<f64> = Vec::with_capacity(a.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(b.len());
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut empty = false;
    for (row, &c) in a.rows().into_iter().zip(b.iter()) {
        if c == f64::INFINITY {
            continue;
        }
        let norm = row.dot(&row).sqrt();
        if norm <= ZERO_ROW_TOL {
            if c < -FEAS_TOL {
                empty = true;
            }
            continue;
        }
        let unit: Vec<f64> = row.iter().map(|v| v / norm).collect();
        let bound = c / norm;
        let key: Vec<u64> = unit.iter().map(|v| (v + 0.0).to_bits()).collect();
        match seen.get(&key) {
            Some(&k) => bounds[k] = bounds[k].min(bound),
            None => {
                seen.insert(key, bounds.len());
                rows.extend_from_slice(&unit);
                bounds.push(bound);
            }
        }
    }
    if empty {
        // canonical infeasible marker: 0 . x <= -1
        rows.extend(std::iter::repeat_n(0.0, dim));
        bounds.push(-1.0);
    }
    let m = bounds.len();
    Polyhedron {
        dim,
        a: Array2::from_shape_vec((m, dim), rows).expect("row-major constraint data"),
        b: Array1::from(bounds),
    }
}
