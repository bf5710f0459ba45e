//! Feedforward networks `f = a_L . W_L . ... . a_1 . W_1` with affine `W_l`
//! and piecewise-linear `a_l`, plus the JSON model format.
//!
//! ```json
//! {"layers": [
//!   {"type": "affine", "W": [[1.0], [-1.0]], "b": [0.0, 0.0]},
//!   {"type": "relu"},
//!   {"type": "affine", "W": [[1.0, 1.0]]}
//! ]}
//! ```
//!
//! Files need not alternate strictly: identity activations are inserted
//! between adjacent affine layers and after a trailing affine layer, and
//! identity affine layers between adjacent activations.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use serde_json::{json, Map, Value};

use crate::activation::{Activation, ActivationKind, Spline};
use crate::error::{Error, Result};
use crate::interval::IntervalMatrix;
use crate::polyhedron::check_fields;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weight.nrows() != bias.len() || weight.nrows() != activation.input_width() {
            return Err(Error::Dimension(format!(
                "affine {}x{} with {} biases feeding a width-{} activation",
                weight.nrows(),
                weight.ncols(),
                bias.len(),
                activation.input_width()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.activation.output_width()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Affine map `x -> J x + b` equal to a leading part of the network on a
/// region where that part is fixed linear.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPrefix {
    pub jacobian: Array2<f64>,
    pub offset: Array1<f64>,
}

impl LinearPrefix {
    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.jacobian.dot(&x) + &self.offset
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].input_width() != pair[0].output_width() {
                return Err(Error::Shape {
                    layer: i + 2,
                    msg: format!(
                        "affine layer takes {} inputs but the previous activation has width {}",
                        pair[1].input_width(),
                        pair[0].output_width()
                    ),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of affine/activation pairs.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_width()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let root = value
            .as_object()
            .ok_or_else(|| Error::Parse("model must be a JSON object".into()))?;
        check_fields("model", &keys(root), &["layers"])?;
        let entries = root
            .get("layers")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("model needs a \"layers\" array".into()))?;
        let mut raw = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            raw.push(parse_entry(i + 1, entry)?);
        }
        assemble(raw)
    }

    pub fn to_json(&self) -> Value {
        let mut layers = Vec::new();
        for layer in &self.layers {
            let w: Vec<Vec<f64>> = layer
                .weight
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect();
            layers.push(json!({"type": "affine", "W": w, "b": layer.bias.to_vec()}));
            layers.push(layer.activation.to_json());
        }
        json!({ "layers": layers })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = Array1::from(x.to_vec());
        for layer in &self.layers {
            let pre = layer.weight.dot(&h) + &layer.bias;
            h = Array1::from(
                layer
                    .activation
                    .evaluate(pre.as_slice().expect("contiguous"))?,
            );
        }
        Ok(h.to_vec())
    }

    /// Pre-activation vectors of every layer at `x`.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut h = Array1::from(x.to_vec());
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let pre = layer.weight.dot(&h) + &layer.bias;
            let pre = pre.to_vec();
            h = Array1::from(layer.activation.evaluate(&pre)?);
            out.push(pre);
        }
        Ok(out)
    }

    /// Jacobian of the piece selected at `x` (lowest-index piece on ties) and
    /// whether any pre-activation lies near a piece boundary.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<(Array2<f64>, bool)> {
        self.check_input(x)?;
        let mut h = Array1::from(x.to_vec());
        let mut jac = Array2::eye(x.len());
        let mut boundary = false;
        for layer in &self.layers {
            let pre = layer.weight.dot(&h) + &layer.bias;
            let local = layer
                .activation
                .local_affine(pre.as_slice().expect("contiguous"))?;
            boundary |= local.on_boundary;
            jac = local.slopes.dot(&layer.weight.dot(&jac));
            h = local.slopes.dot(&pre) + &local.bias;
        }
        Ok((jac, boundary))
    }

    /// Folds the network from the input up to the pre-activation of layer
    /// `end` (or the output when `end == depth`) into one affine map, using the
    /// activation states in `slopes`/`biases`, which must be degenerate on
    /// every activation that is folded.
    pub fn lin_prop(
        &self,
        slopes: &[IntervalMatrix],
        biases: &[IntervalMatrix],
        end: usize,
    ) -> Result<LinearPrefix> {
        let first = &self.layers[0];
        let prefix = LinearPrefix {
            jacobian: first.weight.clone(),
            offset: first.bias.clone(),
        };
        self.fold(prefix, slopes, biases, 0, end)
    }

    /// Extends `prefix`, which maps inputs to the pre-activation of layer
    /// `start`, through activations `start..end` and the affine layers after
    /// them.
    pub fn fold(
        &self,
        mut prefix: LinearPrefix,
        slopes: &[IntervalMatrix],
        biases: &[IntervalMatrix],
        start: usize,
        end: usize,
    ) -> Result<LinearPrefix> {
        if end > self.depth() || start > end {
            return Err(Error::InvalidInput(format!(
                "cannot fold layers {start}..{end} of a depth-{} network",
                self.depth()
            )));
        }
        if slopes.len() < end || biases.len() < end {
            return Err(Error::Dimension(format!(
                "{} slope and {} bias states for folding up to layer {end}",
                slopes.len(),
                biases.len()
            )));
        }
        for l in start..end {
            let (lam, bias) = (&slopes[l], &biases[l]);
            if !lam.is_degenerate() || !bias.is_degenerate() {
                return Err(Error::NotFixedLinear(l + 1));
            }
            let t = lam.lower();
            let tb = bias.lower().column(0);
            let mut jac = t.dot(&prefix.jacobian);
            let mut off = t.dot(&prefix.offset) + &tb;
            if let Some(next) = self.layers.get(l + 1) {
                jac = next.weight.dot(&jac);
                off = next.weight.dot(&off) + &next.bias;
            }
            prefix = LinearPrefix {
                jacobian: jac,
                offset: off,
            };
        }
        Ok(prefix)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

enum RawLayer {
    Affine {
        index: usize,
        weight: Array2<f64>,
        bias: Array1<f64>,
    },
    Activation {
        index: usize,
        kind: ActivationKind,
    },
}

fn keys(obj: &Map<String, Value>) -> Vec<&str> {
    obj.keys().map(String::as_str).collect()
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, layer: usize) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::Parse(format!("layer {layer}: missing field \"{name}\"")))
}

fn number(v: &Value, what: &str, layer: usize) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("layer {layer}: {what} must be a number")))?;
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "layer {layer}: {what} is not finite"
        )));
    }
    Ok(x)
}

fn numbers(v: &Value, what: &str, layer: usize) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("layer {layer}: {what} must be an array")))?
        .iter()
        .map(|x| number(x, what, layer))
        .collect()
}

fn parse_entry(index: usize, entry: &Value) -> Result<RawLayer> {
    let obj = entry
        .as_object()
        .ok_or_else(|| Error::Parse(format!("layer {index} must be an object")))?;
    let ty = field(obj, "type", index)?
        .as_str()
        .ok_or_else(|| Error::Parse(format!("layer {index}: \"type\" must be a string")))?;
    let ks = keys(obj);
    let ctx = format!("layer {index}");
    let kind = match ty {
        "affine" => {
            check_fields(&ctx, &ks, &["type", "W", "b"])?;
            let rows = field(obj, "W", index)?
                .as_array()
                .ok_or_else(|| Error::Parse(format!("layer {index}: W must be an array")))?;
            let rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| numbers(r, "W", index))
                .collect::<Result<_>>()?;
            let n_rows = rows.len();
            let n_cols = rows.first().map_or(0, Vec::len);
            if n_rows == 0 || n_cols == 0 {
                return Err(Error::Shape {
                    layer: index,
                    msg: "W must be a non-empty matrix".into(),
                });
            }
            if rows.iter().any(|r| r.len() != n_cols) {
                return Err(Error::Shape {
                    layer: index,
                    msg: "W rows have different lengths".into(),
                });
            }
            let bias = match obj.get("b") {
                Some(b) => numbers(b, "b", index)?,
                None => vec![0.0; n_rows],
            };
            if bias.len() != n_rows {
                return Err(Error::Shape {
                    layer: index,
                    msg: format!("W has {n_rows} rows but b has {} entries", bias.len()),
                });
            }
            let weight =
                Array2::from_shape_vec((n_rows, n_cols), rows.concat()).expect("checked shape");
            return Ok(RawLayer::Affine {
                index,
                weight,
                bias: Array1::from(bias),
            });
        }
        "relu" | "fullsort" | "maxmin" | "identity" => {
            check_fields(&ctx, &ks, &["type"])?;
            match ty {
                "relu" => ActivationKind::Relu,
                "fullsort" => ActivationKind::FullSort,
                "maxmin" => ActivationKind::MaxMin,
                _ => ActivationKind::Identity,
            }
        }
        "leaky_relu" => {
            check_fields(&ctx, &ks, &["type", "slope"])?;
            ActivationKind::LeakyRelu {
                slope: number(field(obj, "slope", index)?, "slope", index)?,
            }
        }
        "prelu" => {
            check_fields(&ctx, &ks, &["type", "slopes"])?;
            ActivationKind::Prelu {
                slopes: numbers(field(obj, "slopes", index)?, "slopes", index)?,
            }
        }
        "spline" => {
            check_fields(&ctx, &ks, &["type", "breakpoints", "slopes", "intercepts"])?;
            let spline = Spline::new(
                numbers(field(obj, "breakpoints", index)?, "breakpoints", index)?,
                numbers(field(obj, "slopes", index)?, "slopes", index)?,
                numbers(field(obj, "intercepts", index)?, "intercepts", index)?,
            )
            .map_err(|e| Error::Parse(format!("layer {index}: {e}")))?;
            ActivationKind::Spline { spline }
        }
        "groupsort" => {
            check_fields(&ctx, &ks, &["type", "group_size"])?;
            let g = field(obj, "group_size", index)?.as_u64().ok_or_else(|| {
                Error::Parse(format!(
                    "layer {index}: group_size must be a positive integer"
                ))
            })?;
            ActivationKind::GroupSort {
                group_size: usize::try_from(g)
                    .map_err(|_| Error::Parse(format!("layer {index}: group_size too large")))?,
            }
        }
        "maxpool" => {
            check_fields(&ctx, &ks, &["type", "windows"])?;
            let windows = field(obj, "windows", index)?
                .as_array()
                .ok_or_else(|| Error::Parse(format!("layer {index}: windows must be an array")))?
                .iter()
                .map(|w| {
                    w.as_array()
                        .ok_or_else(|| {
                            Error::Parse(format!("layer {index}: each window must be an array"))
                        })?
                        .iter()
                        .map(|k| {
                            k.as_u64()
                                .and_then(|k| usize::try_from(k).ok())
                                .ok_or_else(|| {
                                    Error::Parse(format!(
                                    "layer {index}: window indices must be non-negative integers"
                                ))
                                })
                        })
                        .collect::<Result<Vec<usize>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            ActivationKind::MaxPool { windows }
        }
        other => return Err(Error::UnknownActivation(other.to_string())),
    };
    Ok(RawLayer::Activation { index, kind })
}

fn assemble(raw: Vec<RawLayer>) -> Result<Network> {
    let mut layers = Vec::new();
    let mut pending: Option<(usize, Array2<f64>, Array1<f64>)> = None;
    let mut width: Option<usize> = None;
    for entry in raw {
        match entry {
            RawLayer::Affine {
                index,
                weight,
                bias,
            } => {
                if let Some(w) = width {
                    if weight.ncols() != w {
                        let layer = layers.len() + 1 + usize::from(pending.is_some());
                        return Err(Error::Shape {
                            layer,
                            msg: format!(
                                "W (file entry {index}) has {} columns but the previous layer has width {w}",
                                weight.ncols()
                            ),
                        });
                    }
                }
                if let Some((_, pw, pb)) = pending.take() {
                    let act = Activation::identity(pw.nrows())?;
                    layers.push(Layer::new(pw, pb, act)?);
                }
                width = Some(weight.nrows());
                pending = Some((index, weight, bias));
            }
            RawLayer::Activation { index, kind } => {
                let (w, b) = match pending.take() {
                    Some((_, w, b)) => (w, b),
                    None => {
                        let d = width.ok_or_else(|| Error::Shape {
                            layer: index,
                            msg: "model must start with an affine layer".into(),
                        })?;
                        (Array2::eye(d), Array1::zeros(d))
                    }
                };
                let layer = layers.len() + 1;
                let act = Activation::new(kind, w.nrows()).map_err(|e| Error::Shape {
                    layer,
                    msg: format!("activation (file entry {index}): {e}"),
                })?;
                width = Some(act.output_width());
                layers.push(Layer::new(w, b, act)?);
            }
        }
    }
    if let Some((_, w, b)) = pending.take() {
        let act = Activation::identity(w.nrows())?;
        layers.push(Layer::new(w, b, act)?);
    }
    Network::new(layers)
}
