//! Initial activation pattern by symbolic propagation.
//!
//! Pre-activations are tracked as affine functions `B z + b` of a symbolic
//! variable `z` ranging over a polyhedron. `z` starts as the network input.
//! Whenever a neuron can take two parameter-distinct pieces (a star neuron)
//! its post-activation is replaced by a fresh symbolic variable bounded by
//! the box of its possible values, so that linear relations survive in the
//! neurons that are still fixed.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::activation::{Activation, NeuronPiece};
use crate::error::{Error, Result};
use crate::interval::IntervalMatrix;
use crate::network::Network;
use crate::polyhedron::Polyhedron;

/// Activation state of one layer over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPattern {
    /// Hull of the feasible slope rows, `output x input` of the activation.
    pub slopes: IntervalMatrix,
    /// Hull of the feasible biases as a column.
    pub biases: IntervalMatrix,
    /// Sorted indices of neurons with several distinct feasible pieces.
    pub stars: Vec<usize>,
}

impl LayerPattern {
    pub fn is_fixed(&self) -> bool {
        self.stars.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitPattern {
    pub layers: Vec<LayerPattern>,
    /// Index of the first layer with a star neuron; `depth` if there is none.
    pub first_star: usize,
}

/// Symbolic post-activation state after one layer.
#[derive(Debug, Clone)]
pub struct SymState {
    pub coeffs: Array2<f64>,
    pub offset: Array1<f64>,
    pub region: Polyhedron,
    pub aux_count: usize,
}

impl SymState {
    pub fn symbolic_dim(&self) -> usize {
        self.region.dim()
    }
}

/// Checks that `omega` is a usable input region for `net`.
pub(crate) fn check_region(net: &Network, omega: &Polyhedron) -> Result<()> {
    if omega.dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "region has dimension {} but the network takes {} inputs",
            omega.dim(),
            net.input_dim()
        )));
    }
    if !omega.is_feasible()? {
        return Err(Error::EmptyRegion("region is infeasible".into()));
    }
    if !omega.has_interior()? {
        return Err(Error::EmptyRegion("region has empty interior".into()));
    }
    Ok(())
}

pub fn symprop(net: &Network, omega: &Polyhedron) -> Result<InitPattern> {
    Ok(symprop_with_states(net, omega)?.0)
}

/// Like [`symprop`], also returning the symbolic post-activation state of
/// every layer.
pub fn symprop_with_states(
    net: &Network,
    omega: &Polyhedron,
) -> Result<(InitPattern, Vec<SymState>)> {
    check_region(net, omega)?;
    let layers = net.layers();
    let mut region = omega.clone();
    let mut coeffs = layers[0].weight.clone();
    let mut offset = layers[0].bias.clone();
    let mut aux_count = 0;
    let mut patterns = Vec::with_capacity(layers.len());
    let mut states = Vec::with_capacity(layers.len());

    for (l, layer) in layers.iter().enumerate() {
        let act = &layer.activation;
        // auxiliary boxes can be degenerate, so interiors are only meaningful
        // before the first auxiliary variable exists
        let exact_mode = aux_count == 0;
        let step = propagate_layer(act, &region, &coeffs, offset.view(), exact_mode)?;

        let k = step.star_bounds.len();
        let sym_dim = region.dim();
        let mut b_hat = Array2::zeros((act.output_width(), sym_dim + k));
        b_hat
            .slice_mut(s![.., ..sym_dim])
            .assign(&step.fixed_slopes.dot(&coeffs));
        let b_vec = step.fixed_slopes.dot(&offset) + &step.fixed_bias;
        let mut extended = region.extend_dims(k);
        let mut lower = vec![f64::NEG_INFINITY; sym_dim + k];
        let mut upper = vec![f64::INFINITY; sym_dim + k];
        for (i, &(n, lo, hi)) in step.star_bounds.iter().enumerate() {
            b_hat[[n, sym_dim + i]] = 1.0;
            lower[sym_dim + i] = lo;
            upper[sym_dim + i] = hi;
        }
        if k > 0 {
            extended = extended.stack(&Polyhedron::from_box(&lower, &upper)?)?;
        }
        region = extended;
        aux_count += k;

        patterns.push(step.pattern);
        states.push(SymState {
            coeffs: b_hat.clone(),
            offset: b_vec.clone(),
            region: region.clone(),
            aux_count,
        });

        if let Some(next) = layers.get(l + 1) {
            coeffs = next.weight.dot(&b_hat);
            offset = next.weight.dot(&b_vec) + &next.bias;
        }
    }
    let first_star = patterns
        .iter()
        .position(|p| !p.is_fixed())
        .unwrap_or(layers.len());
    Ok((
        InitPattern {
            layers: patterns,
            first_star,
        },
        states,
    ))
}

struct LayerStep {
    pattern: LayerPattern,
    fixed_slopes: Array2<f64>,
    fixed_bias: Array1<f64>,
    /// (neuron, min, max) of each star neuron's post-activation.
    star_bounds: Vec<(usize, f64, f64)>,
}

fn propagate_layer(
    act: &Activation,
    region: &Polyhedron,
    coeffs: &Array2<f64>,
    offset: ArrayView1<'_, f64>,
    exact_mode: bool,
) -> Result<LayerStep> {
    let (d_out, d_in) = (act.output_width(), act.input_width());
    let mut slopes = IntervalMatrix::zeros(d_out, d_in);
    let mut biases = IntervalMatrix::zeros(d_out, 1);
    let mut fixed_slopes = Array2::zeros((d_out, d_in));
    let mut fixed_bias = Array1::zeros(d_out);
    let mut stars = Vec::new();
    let mut star_bounds = Vec::new();

    for group in act.groups() {
        let feasible = feasible_pieces(&group.pieces, region, coeffs, offset, exact_mode)?;
        for &n in &group.neurons {
            let rows: Vec<(ArrayView1<'_, f64>, f64)> = feasible
                .iter()
                .map(|(p, _)| p.piece.row_of(n).expect("group pieces fix all members"))
                .collect();
            let (lo, hi, lo_b, hi_b) = row_hull(&rows);
            slopes.set_row(n, &lo, &hi);
            biases.set_row(n, &[lo_b], &[hi_b]);
            if distinct(&rows) {
                stars.push(n);
                let mut vmin = f64::INFINITY;
                let mut vmax = f64::NEG_INFINITY;
                for ((row, t), (_, stacked)) in rows.iter().zip(&feasible) {
                    let obj = row.dot(coeffs);
                    let shift = row.dot(&offset) + t;
                    let (a, b) = stacked.linear_bounds(obj.as_slice().expect("contiguous"))?;
                    vmin = vmin.min(a + shift);
                    vmax = vmax.max(b + shift);
                }
                star_bounds.push((n, vmin, vmax));
            } else {
                let (row, t) = rows[0];
                fixed_slopes.row_mut(n).assign(&row);
                fixed_bias[n] = t;
            }
        }
    }
    stars.sort_unstable();
    star_bounds.sort_by_key(|&(n, _, _)| n);
    Ok(LayerStep {
        pattern: LayerPattern {
            slopes,
            biases,
            stars,
        },
        fixed_slopes,
        fixed_bias,
        star_bounds,
    })
}

/// Pieces whose region meets `region` after pulling it back through
/// `z -> coeffs z + offset`, each with the stacked polyhedron. With
/// `exact_mode` a nonempty interior is required; if no piece qualifies
/// (numerically tiny region) closed feasibility is used instead.
pub(crate) fn feasible_pieces<'a>(
    pieces: &'a [NeuronPiece],
    region: &Polyhedron,
    coeffs: &Array2<f64>,
    offset: ArrayView1<'_, f64>,
    exact_mode: bool,
) -> Result<Vec<(&'a NeuronPiece, Polyhedron)>> {
    let stacked: Vec<(&NeuronPiece, Polyhedron)> = pieces
        .iter()
        .map(|p| {
            let pre = p.region.affine_preimage(coeffs.view(), offset)?;
            Ok((p, region.stack(&pre)?))
        })
        .collect::<Result<_>>()?;
    if exact_mode {
        let mut out = Vec::new();
        for (p, poly) in &stacked {
            if poly.has_interior()? {
                out.push((*p, poly.clone()));
            }
        }
        if !out.is_empty() {
            return Ok(out);
        }
    }
    let mut out = Vec::new();
    for (p, poly) in stacked {
        if poly.is_feasible()? {
            out.push((p, poly));
        }
    }
    if out.is_empty() {
        return Err(Error::SolverFailure(
            "no activation piece is feasible on a nonempty region".into(),
        ));
    }
    Ok(out)
}

pub(crate) fn row_hull(rows: &[(ArrayView1<'_, f64>, f64)]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let width = rows[0].0.len();
    let mut lo = vec![f64::INFINITY; width];
    let mut hi = vec![f64::NEG_INFINITY; width];
    let mut lo_b = f64::INFINITY;
    let mut hi_b = f64::NEG_INFINITY;
    for (row, t) in rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
        lo_b = lo_b.min(*t);
        hi_b = hi_b.max(*t);
    }
    (lo, hi, lo_b, hi_b)
}

/// Whether at least two rows differ in slope or bias (exact comparison; the
/// parameters come from the same stored numbers).
pub(crate) fn distinct(rows: &[(ArrayView1<'_, f64>, f64)]) -> bool {
    rows.iter()
        .skip(1)
        .any(|(r, t)| *t != rows[0].1 || r != &rows[0].0)
}
