#![allow(dead_code)]

use exact_lipschitz::{Network, Polyhedron};
use rand::Rng;
use serde_json::{json, Value};

pub const ABS: &str = r#"{"layers": [
    {"type": "affine", "W": [[1.0], [-1.0]], "b": [0.0, 0.0]},
    {"type": "relu"},
    {"type": "affine", "W": [[1.0, 1.0]], "b": [0.0]}
]}"#;

pub fn abs_net() -> Network {
    Network::from_json_str(ABS).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Relu,
    Leaky,
    MaxMin,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Relu, Kind::Leaky, Kind::MaxMin];

    fn layer(self) -> Value {
        match self {
            Kind::Relu => json!({"type": "relu"}),
            Kind::Leaky => json!({"type": "leaky_relu", "slope": 0.1}),
            Kind::MaxMin => json!({"type": "maxmin"}),
        }
    }
}

fn matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Model JSON with the given widths `[d0, h1, ..., out]` and one activation
/// kind between affine layers.
pub fn random_model(rng: &mut impl Rng, widths: &[usize], kind: Kind) -> Value {
    let mut layers = Vec::new();
    for (i, w) in widths.windows(2).enumerate() {
        layers.push(json!({
            "type": "affine",
            "W": matrix(rng, w[1], w[0]),
            "b": vector(rng, w[1], 0.5),
        }));
        if i + 2 < widths.len() {
            layers.push(kind.layer());
        }
    }
    json!({ "layers": layers })
}

/// Small network: input dim 1..=3, one or two hidden layers of width 1..=4,
/// output dim 1..=2.
pub fn random_small_net(rng: &mut impl Rng, kind: Kind) -> Network {
    let mut widths = vec![rng.gen_range(1..=3)];
    let hidden = rng.gen_range(1..=2);
    for _ in 0..hidden {
        widths.push(rng.gen_range(1..=4));
    }
    widths.push(rng.gen_range(1..=2));
    Network::from_json_value(&random_model(rng, &widths, kind)).unwrap()
}

pub fn cube(d: usize, r: f64) -> Polyhedron {
    Polyhedron::hypercube(d, -r, r).unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|)`, with a 1e-12 absolute floor for values
/// at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + 1e-12
}
