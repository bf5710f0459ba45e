//! Piecewise-linear activation layers and their per-neuron decompositions.
//!
//! Every activation describes, for each output neuron `n`, a list of closed
//! polyhedra covering its input space. On each polyhedron a fixed set of
//! neurons (always including `n`) is affine with known slope rows and biases.
//! Neurons whose pieces are tied together (a GroupSort group) share one list
//! of pieces, exposed as a [`NeuronGroup`].

use ndarray::{Array1, Array2, ArrayView1};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::norms::NormPair;
use crate::polyhedron::Polyhedron;

/// Distance to a piece boundary below which a point is flagged as possibly
/// non-differentiable.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Largest sorting group accepted (7! = 5040 pieces).
pub const MAX_GROUP_SIZE: usize = 7;

/// Affine rows `T x + t` for the neurons fixed by one piece.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    neurons: Vec<usize>,
    slopes: Array2<f64>,
    bias: Vec<f64>,
}

impl AffinePiece {
    pub fn neurons(&self) -> &[usize] {
        &self.neurons
    }

    pub fn slopes(&self) -> &Array2<f64> {
        &self.slopes
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Slope row and bias for neuron `n`, if this piece fixes it.
    pub fn row_of(&self, n: usize) -> Option<(ArrayView1<'_, f64>, f64)> {
        let k = self.neurons.iter().position(|&m| m == n)?;
        Some((self.slopes.row(k), self.bias[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronPiece {
    pub region: Polyhedron,
    pub piece: AffinePiece,
}

impl NeuronPiece {
    pub fn fixed_neurons(&self) -> &[usize] {
        &self.piece.neurons
    }
}

/// Neurons that are always fixed together, with their shared decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronGroup {
    pub neurons: Vec<usize>,
    pub pieces: Vec<NeuronPiece>,
}

/// One-dimensional continuous linear spline: `k` closed intervals split at
/// `k - 1` sorted breakpoints, slope `a_j` and intercept `b_j` on interval `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl Spline {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 || intercepts.len() != slopes.len() {
            return Err(Error::InvalidInput(format!(
                "spline with {} breakpoints needs {} slopes and intercepts, got {} and {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len(),
                intercepts.len()
            )));
        }
        if breakpoints
            .iter()
            .chain(&slopes)
            .chain(&intercepts)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("non-finite spline parameter".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "spline breakpoints must be strictly increasing".into(),
            ));
        }
        for (j, &bp) in breakpoints.iter().enumerate() {
            let left = slopes[j] * bp + intercepts[j];
            let right = slopes[j + 1] * bp + intercepts[j + 1];
            if (left - right).abs() > 1e-9 * left.abs().max(right.abs()).max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "spline is discontinuous at breakpoint {bp}: {left} vs {right}"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            slopes,
            intercepts,
        })
    }

    pub fn relu() -> Self {
        Self::leaky(0.0)
    }

    pub fn leaky(slope: f64) -> Self {
        Self {
            breakpoints: vec![0.0],
            slopes: vec![slope, 1.0],
            intercepts: vec![0.0, 0.0],
        }
    }

    pub fn n_pieces(&self) -> usize {
        self.slopes.len()
    }

    /// Lowest-index interval containing `x`.
    fn interval_of(&self, x: f64) -> usize {
        self.breakpoints.iter().filter(|&&bp| bp < x).count()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let j = self.interval_of(x);
        self.slopes[j] * x + self.intercepts[j]
    }

    fn near_breakpoint(&self, x: f64) -> bool {
        self.breakpoints
            .iter()
            .any(|bp| (x - bp).abs() <= BOUNDARY_TOL)
    }

    fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Parameters of an activation as they appear in a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationKind {
    Relu,
    LeakyRelu { slope: f64 },
    Prelu { slopes: Vec<f64> },
    Spline { spline: Spline },
    GroupSort { group_size: usize },
    FullSort,
    MaxMin,
    MaxPool { windows: Vec<Vec<usize>> },
    Identity,
}

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leaky_relu",
            ActivationKind::Prelu { .. } => "prelu",
            ActivationKind::Spline { .. } => "spline",
            ActivationKind::GroupSort { .. } => "groupsort",
            ActivationKind::FullSort => "fullsort",
            ActivationKind::MaxMin => "maxmin",
            ActivationKind::MaxPool { .. } => "maxpool",
            ActivationKind::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Evaluator {
    Componentwise(Vec<Spline>),
    Sort { group_size: usize },
    MaxPool(Vec<Vec<usize>>),
    Identity,
}

/// A piecewise-linear activation layer with its decomposition precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    kind: ActivationKind,
    input_width: usize,
    output_width: usize,
    eval: Evaluator,
    groups: Vec<NeuronGroup>,
    group_of: Vec<usize>,
}

/// Local affine form of an activation at a point.
#[derive(Debug, Clone)]
pub struct LocalAffine {
    pub slopes: Array2<f64>,
    pub bias: Array1<f64>,
    pub on_boundary: bool,
}

impl Activation {
    /// Builds the activation for an input of width `input_width`.
    pub fn new(kind: ActivationKind, input_width: usize) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::InvalidInput(
                "activation width must be positive".into(),
            ));
        }
        let d = input_width;
        let (eval, output_width) = match &kind {
            ActivationKind::Relu => (Evaluator::Componentwise(vec![Spline::relu(); d]), d),
            ActivationKind::LeakyRelu { slope } => {
                if !slope.is_finite() {
                    return Err(Error::InvalidInput("non-finite leaky_relu slope".into()));
                }
                (Evaluator::Componentwise(vec![Spline::leaky(*slope); d]), d)
            }
            ActivationKind::Prelu { slopes } => {
                if slopes.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "prelu has {} slopes for width {d}",
                        slopes.len()
                    )));
                }
                if slopes.iter().any(|s| !s.is_finite()) {
                    return Err(Error::InvalidInput("non-finite prelu slope".into()));
                }
                let splines = slopes.iter().map(|&s| Spline::leaky(s)).collect();
                (Evaluator::Componentwise(splines), d)
            }
            ActivationKind::Spline { spline } => {
                (Evaluator::Componentwise(vec![spline.clone(); d]), d)
            }
            ActivationKind::GroupSort { group_size } => {
                check_group_size(*group_size)?;
                (
                    Evaluator::Sort {
                        group_size: *group_size,
                    },
                    d,
                )
            }
            ActivationKind::FullSort => {
                check_group_size(d)?;
                (Evaluator::Sort { group_size: d }, d)
            }
            ActivationKind::MaxMin => (Evaluator::Sort { group_size: 2 }, d),
            ActivationKind::MaxPool { windows } => {
                check_windows(windows, d)?;
                (Evaluator::MaxPool(windows.clone()), windows.len())
            }
            ActivationKind::Identity => (Evaluator::Identity, d),
        };
        let groups = build_groups(&eval, input_width, output_width)?;
        let mut group_of = vec![0; output_width];
        for (g, group) in groups.iter().enumerate() {
            for &n in &group.neurons {
                group_of[n] = g;
            }
        }
        Ok(Self {
            kind,
            input_width,
            output_width,
            eval,
            groups,
            group_of,
        })
    }

    pub fn identity(width: usize) -> Result<Self> {
        Self::new(ActivationKind::Identity, width)
    }

    pub fn kind(&self) -> &ActivationKind {
        &self.kind
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn groups(&self) -> &[NeuronGroup] {
        &self.groups
    }

    pub fn group_of(&self, n: usize) -> Result<&NeuronGroup> {
        let g = *self.group_of.get(n).ok_or(Error::IndexOutOfRange {
            index: n,
            width: self.output_width,
        })?;
        Ok(&self.groups[g])
    }

    /// The pieces covering the input space for neuron `n`.
    pub fn neuron_decomposition(&self, n: usize) -> Result<&[NeuronPiece]> {
        Ok(&self.group_of(n)?.pieces)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(match &self.eval {
            Evaluator::Componentwise(splines) => {
                x.iter().zip(splines).map(|(&v, s)| s.eval(v)).collect()
            }
            Evaluator::Sort { group_size } => {
                let mut out = x.to_vec();
                for chunk in out.chunks_mut(*group_size) {
                    chunk.sort_by(f64::total_cmp);
                }
                out
            }
            Evaluator::MaxPool(windows) => windows
                .iter()
                .map(|w| w.iter().map(|&k| x[k]).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
            Evaluator::Identity => x.to_vec(),
        })
    }

    /// Slopes and biases of the piece selected at `x` (lowest-index piece on
    /// ties), and whether `x` is within [`BOUNDARY_TOL`] of a piece boundary.
    pub fn local_affine(&self, x: &[f64]) -> Result<LocalAffine> {
        self.check_input(x)?;
        let mut slopes = Array2::zeros((self.output_width, self.input_width));
        let mut bias = Array1::zeros(self.output_width);
        let mut on_boundary = false;
        match &self.eval {
            Evaluator::Componentwise(splines) => {
                for (n, s) in splines.iter().enumerate() {
                    let j = s.interval_of(x[n]);
                    slopes[[n, n]] = s.slopes[j];
                    bias[n] = s.intercepts[j];
                    on_boundary |= s.near_breakpoint(x[n]);
                }
            }
            Evaluator::Sort { group_size } => {
                for start in (0..self.input_width).step_by(*group_size) {
                    let end = (start + group_size).min(self.input_width);
                    let mut order: Vec<usize> = (start..end).collect();
                    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
                    for (k, &src) in order.iter().enumerate() {
                        slopes[[start + k, src]] = 1.0;
                    }
                    on_boundary |= order
                        .windows(2)
                        .any(|w| (x[w[1]] - x[w[0]]).abs() <= BOUNDARY_TOL);
                }
            }
            Evaluator::MaxPool(windows) => {
                for (n, w) in windows.iter().enumerate() {
                    let mut best = w[0];
                    for &k in &w[1..] {
                        if x[k] > x[best] {
                            best = k;
                        }
                    }
                    slopes[[n, best]] = 1.0;
                    on_boundary |= w
                        .iter()
                        .any(|&k| k != best && x[best] - x[k] <= BOUNDARY_TOL);
                }
            }
            Evaluator::Identity => {
                for n in 0..self.input_width {
                    slopes[[n, n]] = 1.0;
                }
            }
        }
        Ok(LocalAffine {
            slopes,
            bias,
            on_boundary,
        })
    }

    /// Lipschitz constant of the layer on its own: the largest induced norm of
    /// any of its affine pieces.
    pub fn lipschitz(&self, _np: NormPair) -> Result<f64> {
        // Every supported pair reduces to the same closed form here: pieces
        // are diagonal (splines) or 0/1 matrices with at most one 1 per row
        // and column (sorting, disjoint pooling, identity).
        Ok(match &self.eval {
            Evaluator::Componentwise(splines) => splines
                .iter()
                .map(Spline::max_abs_slope)
                .fold(0.0, f64::max),
            Evaluator::Sort { .. } | Evaluator::MaxPool(_) | Evaluator::Identity => 1.0,
        })
    }

    pub fn to_json(&self) -> Value {
        match &self.kind {
            ActivationKind::LeakyRelu { slope } => json!({"type": "leaky_relu", "slope": slope}),
            ActivationKind::Prelu { slopes } => json!({"type": "prelu", "slopes": slopes}),
            ActivationKind::Spline { spline } => json!({
                "type": "spline",
                "breakpoints": spline.breakpoints,
                "slopes": spline.slopes,
                "intercepts": spline.intercepts,
            }),
            ActivationKind::GroupSort { group_size } => {
                json!({"type": "groupsort", "group_size": group_size})
            }
            ActivationKind::MaxPool { windows } => json!({"type": "maxpool", "windows": windows}),
            other => json!({"type": other.name()}),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width {
            return Err(Error::Dimension(format!(
                "{} activation expects width {}, got {}",
                self.kind.name(),
                self.input_width,
                x.len()
            )));
        }
        Ok(())
    }
}

fn check_group_size(g: usize) -> Result<()> {
    if g == 0 {
        return Err(Error::InvalidInput("group size must be positive".into()));
    }
    if g > MAX_GROUP_SIZE {
        return Err(Error::InvalidInput(format!(
            "sorting group of size {g} exceeds the limit of {MAX_GROUP_SIZE}"
        )));
    }
    Ok(())
}

fn check_windows(windows: &[Vec<usize>], width: usize) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::InvalidInput(
            "maxpool needs at least one window".into(),
        ));
    }
    let mut used = vec![false; width];
    for (n, w) in windows.iter().enumerate() {
        if w.is_empty() {
            return Err(Error::InvalidInput(format!("maxpool window {n} is empty")));
        }
        for &k in w {
            if k >= width {
                return Err(Error::IndexOutOfRange { index: k, width });
            }
            if used[k] {
                return Err(Error::InvalidInput(format!(
                    "maxpool windows overlap at input {k}"
                )));
            }
            used[k] = true;
        }
    }
    Ok(())
}

fn unit_row(width: usize, k: usize) -> Array1<f64> {
    let mut r = Array1::zeros(width);
    r[k] = 1.0;
    r
}

fn build_groups(eval: &Evaluator, d_in: usize, d_out: usize) -> Result<Vec<NeuronGroup>> {
    let mut groups = Vec::new();
    match eval {
        Evaluator::Componentwise(splines) => {
            for (n, s) in splines.iter().enumerate() {
                let mut pieces = Vec::with_capacity(s.n_pieces());
                for j in 0..s.n_pieces() {
                    let mut lower = vec![f64::NEG_INFINITY; d_in];
                    let mut upper = vec![f64::INFINITY; d_in];
                    if j > 0 {
                        lower[n] = s.breakpoints[j - 1];
                    }
                    if j < s.breakpoints.len() {
                        upper[n] = s.breakpoints[j];
                    }
                    let mut slopes = Array2::zeros((1, d_in));
                    slopes[[0, n]] = s.slopes[j];
                    pieces.push(NeuronPiece {
                        region: Polyhedron::from_box(&lower, &upper)?,
                        piece: AffinePiece {
                            neurons: vec![n],
                            slopes,
                            bias: vec![s.intercepts[j]],
                        },
                    });
                }
                groups.push(NeuronGroup {
                    neurons: vec![n],
                    pieces,
                });
            }
        }
        Evaluator::Sort { group_size } => {
            for start in (0..d_in).step_by(*group_size) {
                let end = (start + group_size).min(d_in);
                let members: Vec<usize> = (start..end).collect();
                let mut pieces = Vec::new();
                for perm in permutations(&members) {
                    // x_{perm[0]} <= x_{perm[1]} <= ...
                    let mut a = Array2::zeros((perm.len().saturating_sub(1), d_in));
                    for k in 0..perm.len().saturating_sub(1) {
                        a[[k, perm[k]]] = 1.0;
                        a[[k, perm[k + 1]]] = -1.0;
                    }
                    let b = Array1::zeros(a.nrows());
                    let region = if a.nrows() == 0 {
                        Polyhedron::unconstrained(d_in)?
                    } else {
                        Polyhedron::new(a, b)?
                    };
                    let mut slopes = Array2::zeros((perm.len(), d_in));
                    for (k, &src) in perm.iter().enumerate() {
                        slopes.row_mut(k).assign(&unit_row(d_in, src));
                    }
                    pieces.push(NeuronPiece {
                        region,
                        piece: AffinePiece {
                            neurons: members.clone(),
                            slopes,
                            bias: vec![0.0; perm.len()],
                        },
                    });
                }
                groups.push(NeuronGroup {
                    neurons: members,
                    pieces,
                });
            }
        }
        Evaluator::MaxPool(windows) => {
            for (n, w) in windows.iter().enumerate() {
                let mut pieces = Vec::with_capacity(w.len());
                for &k in w {
                    let others: Vec<usize> = w.iter().copied().filter(|&j| j != k).collect();
                    let region = if others.is_empty() {
                        Polyhedron::unconstrained(d_in)?
                    } else {
                        let mut a = Array2::zeros((others.len(), d_in));
                        for (r, &j) in others.iter().enumerate() {
                            a[[r, j]] = 1.0;
                            a[[r, k]] = -1.0;
                        }
                        Polyhedron::new(a, Array1::zeros(others.len()))?
                    };
                    let slopes = unit_row(d_in, k).insert_axis(ndarray::Axis(0));
                    pieces.push(NeuronPiece {
                        region,
                        piece: AffinePiece {
                            neurons: vec![n],
                            slopes,
                            bias: vec![0.0],
                        },
                    });
                }
                groups.push(NeuronGroup {
                    neurons: vec![n],
                    pieces,
                });
            }
        }
        Evaluator::Identity => {
            for n in 0..d_out {
                groups.push(NeuronGroup {
                    neurons: vec![n],
                    pieces: vec![NeuronPiece {
                        region: Polyhedron::unconstrained(d_in)?,
                        piece: AffinePiece {
                            neurons: vec![n],
                            slopes: unit_row(d_in, n).insert_axis(ndarray::Axis(0)),
                            bias: vec![0.0],
                        },
                    }],
                });
            }
        }
    }
    Ok(groups)
}

/// All orderings of `items` in lexicographic order of positions.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn act(kind: ActivationKind, d: usize) -> Activation {
        Activation::new(kind, d).unwrap()
    }

    #[test]
    fn relu_decomposition() {
        let relu = act(ActivationKind::Relu, 2);
        let pieces = relu.neuron_decomposition(0).unwrap();
        assert_eq!(pieces.len(), 2);
        // inactive: x0 <= 0, slope row 0
        assert!(pieces[0].region.contains(&[-1.0, 5.0], 0.0));
        assert!(!pieces[0].region.contains(&[1.0, 5.0], 0.0));
        assert_eq!(pieces[0].piece.slopes(), &array![[0.0, 0.0]]);
        // active: x0 >= 0, slope row e0
        assert!(pieces[1].region.contains(&[1.0, -5.0], 0.0));
        assert_eq!(pieces[1].piece.slopes(), &array![[1.0, 0.0]]);
        assert_eq!(pieces[1].fixed_neurons(), &[0]);
        // the two pieces differ in T
        assert_ne!(pieces[0].piece.slopes(), pieces[1].piece.slopes());
    }

    #[test]
    fn maxmin_decomposition() {
        let mm = act(ActivationKind::MaxMin, 2);
        let pieces = mm.neuron_decomposition(0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert!(pieces[0].region.contains(&[0.0, 1.0], 0.0));
        assert_eq!(pieces[0].piece.slopes(), &array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(pieces[1].region.contains(&[1.0, 0.0], 0.0));
        assert_eq!(pieces[1].piece.slopes(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(pieces.iter().all(|p| p.fixed_neurons() == [0, 1]));
    }

    #[test]
    fn fullsort_piece_counts() {
        let fs = act(ActivationKind::FullSort, 3);
        for n in 0..3 {
            let pieces = fs.neuron_decomposition(n).unwrap();
            assert_eq!(pieces.len(), 6);
            assert!(pieces.iter().all(|p| p.fixed_neurons() == [0, 1, 2]));
        }
        assert!(Activation::new(ActivationKind::FullSort, 8).is_err());
    }

    #[test]
    fn groupsort_remainder_group() {
        let gs = act(ActivationKind::GroupSort { group_size: 2 }, 3);
        assert_eq!(gs.groups().len(), 2);
        assert_eq!(gs.neuron_decomposition(2).unwrap().len(), 1);
        assert_eq!(
            gs.evaluate(&[3.0, 1.0, -7.0]).unwrap(),
            vec![1.0, 3.0, -7.0]
        );
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(
            act(ActivationKind::Relu, 2).evaluate(&[-1.0, 2.0]).unwrap(),
            vec![0.0, 2.0]
        );
        assert_eq!(
            act(ActivationKind::MaxMin, 2)
                .evaluate(&[3.0, 1.0])
                .unwrap(),
            vec![1.0, 3.0]
        );
        let pool = act(
            ActivationKind::MaxPool {
                windows: vec![vec![0, 1]],
            },
            2,
        );
        assert_eq!(pool.evaluate(&[0.5, -2.0]).unwrap(), vec![0.5]);
        assert!(pool.evaluate(&[0.5]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let np = NormPair::same(crate::norms::NormOrder::Inf);
        assert_eq!(act(ActivationKind::Relu, 3).lipschitz(np).unwrap(), 1.0);
        assert_eq!(
            act(ActivationKind::LeakyRelu { slope: 0.1 }, 3)
                .lipschitz(np)
                .unwrap(),
            1.0
        );
        let two = NormPair::same(crate::norms::NormOrder::Two);
        assert_eq!(act(ActivationKind::MaxMin, 4).lipschitz(two).unwrap(), 1.0);
        let steep = Spline::new(vec![0.0], vec![0.5, -3.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(
            act(ActivationKind::Spline { spline: steep }, 2)
                .lipschitz(two)
                .unwrap(),
            3.0
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(Spline::new(vec![0.0], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Spline::new(vec![1.0, 0.0], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(Activation::new(
            ActivationKind::MaxPool {
                windows: vec![vec![0, 1], vec![1, 2]]
            },
            3
        )
        .is_err());
        assert!(Activation::new(
            ActivationKind::MaxPool {
                windows: vec![vec![0, 5]]
            },
            3
        )
        .is_err());
        assert!(Activation::new(ActivationKind::Prelu { slopes: vec![0.1] }, 2).is_err());
        assert!(act(ActivationKind::Relu, 2)
            .neuron_decomposition(2)
            .is_err());
    }

    fn all_kinds() -> Vec<Activation> {
        vec![
            act(ActivationKind::Relu, 4),
            act(ActivationKind::LeakyRelu { slope: 0.1 }, 4),
            act(
                ActivationKind::Prelu {
                    slopes: vec![0.1, -0.5, 2.0, 0.0],
                },
                4,
            ),
            act(
                ActivationKind::Spline {
                    spline: Spline::new(
                        vec![-0.5, 0.5],
                        vec![0.2, 1.0, -0.3],
                        vec![-0.4, 0.0, 0.65],
                    )
                    .unwrap(),
                },
                4,
            ),
            act(ActivationKind::GroupSort { group_size: 3 }, 4),
            act(ActivationKind::FullSort, 4),
            act(ActivationKind::MaxMin, 4),
            act(
                ActivationKind::MaxPool {
                    windows: vec![vec![0, 2], vec![1], vec![3]],
                },
                4,
            ),
            act(ActivationKind::Identity, 4),
        ]
    }

    #[test]
    fn pieces_agree_with_evaluate_and_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for a in all_kinds() {
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y = a.evaluate(&x).unwrap();
                for n in 0..a.output_width() {
                    let pieces = a.neuron_decomposition(n).unwrap();
                    let hits: Vec<&NeuronPiece> = pieces
                        .iter()
                        .filter(|p| p.region.contains(&x, 0.0))
                        .collect();
                    assert!(!hits.is_empty(), "{} not covered at {x:?}", a.kind().name());
                    for p in hits {
                        for &m in p.fixed_neurons() {
                            let (row, t) = p.piece.row_of(m).unwrap();
                            let v: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() + t;
                            assert!((v - y[m]).abs() < 1e-12, "{}", a.kind().name());
                        }
                    }
                }
                let local = a.local_affine(&x).unwrap();
                let lin = local.slopes.dot(&Array1::from(x.clone())) + &local.bias;
                for (u, v) in lin.iter().zip(&y) {
                    assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn boundary_flags() {
        let relu = act(ActivationKind::Relu, 1);
        assert!(relu.local_affine(&[0.0]).unwrap().on_boundary);
        assert!(!relu.local_affine(&[0.5]).unwrap().on_boundary);
        let mm = act(ActivationKind::MaxMin, 2);
        assert!(mm.local_affine(&[1.0, 1.0]).unwrap().on_boundary);
        // tie: lowest-index piece (identity ordering)
        assert_eq!(
            mm.local_affine(&[1.0, 1.0]).unwrap().slopes,
            array![[1.0, 0.0], [0.0, 1.0]]
        );
    }
}
