//! Exhaustive reference: the largest norm over every full-dimensional
//! combination of activation pieces.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::norms::{induced_norm, NormPair};
use crate::polyhedron::Polyhedron;
use crate::symprop::check_region;

/// Largest number of piece combinations the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Product of the piece counts of every neuron group in the network,
/// saturating.
pub fn combination_count(net: &Network) -> u128 {
    net.layers()
        .iter()
        .flat_map(|l| l.activation.groups())
        .fold(1u128, |acc, g| acc.saturating_mul(g.pieces.len() as u128))
}

pub fn brute_force_oracle(net: &Network, omega: &Polyhedron, np: NormPair) -> Result<f64> {
    let count = combination_count(net);
    if count > ORACLE_LIMIT {
        return Err(Error::Guardrail {
            count,
            limit: ORACLE_LIMIT,
        });
    }
    check_region(net, omega)?;
    let first = &net.layers()[0];
    let mut best = f64::NEG_INFINITY;
    let state = State {
        region: omega.clone(),
        jac: first.weight.clone(),
        off: first.bias.clone(),
        layer: 0,
        group: 0,
        t: Array2::zeros((
            first.activation.output_width(),
            first.activation.input_width(),
        )),
        tb: Array1::zeros(first.activation.output_width()),
    };
    search(net, np, state, &mut best)?;
    if best == f64::NEG_INFINITY {
        return Err(Error::SolverFailure("no feasible piece combination".into()));
    }
    Ok(best)
}

#[derive(Clone)]
struct State {
    region: Polyhedron,
    // map from inputs to the pre-activation of `layer`
    jac: Array2<f64>,
    off: Array1<f64>,
    layer: usize,
    group: usize,
    // rows of the layer's activation fixed so far
    t: Array2<f64>,
    tb: Array1<f64>,
}

fn search(net: &Network, np: NormPair, mut st: State, best: &mut f64) -> Result<()> {
    let layers = net.layers();
    let act = &layers[st.layer].activation;
    if st.group == act.groups().len() {
        let mut jac = st.t.dot(&st.jac);
        let mut off = st.t.dot(&st.off) + &st.tb;
        let Some(next) = layers.get(st.layer + 1) else {
            *best = best.max(induced_norm(jac.view(), np)?);
            return Ok(());
        };
        jac = next.weight.dot(&jac);
        off = next.weight.dot(&off) + &next.bias;
        let a = &next.activation;
        st = State {
            region: st.region,
            jac,
            off,
            layer: st.layer + 1,
            group: 0,
            t: Array2::zeros((a.output_width(), a.input_width())),
            tb: Array1::zeros(a.output_width()),
        };
        return search(net, np, st, best);
    }
    let group = &act.groups()[st.group];
    let mut candidates = Vec::with_capacity(group.pieces.len());
    for piece in &group.pieces {
        let pre = piece.region.affine_preimage(st.jac.view(), st.off.view())?;
        candidates.push((piece, st.region.stack(&pre)?));
    }
    let mut chosen = Vec::new();
    for (piece, region) in &candidates {
        if region.has_interior()? {
            chosen.push((*piece, region.clone()));
        }
    }
    if chosen.is_empty() {
        for (piece, region) in candidates {
            if region.is_feasible()? {
                chosen.push((piece, region));
            }
        }
    }
    for (piece, region) in chosen {
        let mut next = st.clone();
        next.region = region;
        next.group += 1;
        for &n in piece.fixed_neurons() {
            let (row, b) = piece.piece.row_of(n).expect("fixed neuron has a row");
            next.t.row_mut(n).assign(&row);
            next.tb[n] = b;
        }
        search(net, np, next, best)?;
    }
    Ok(())
}
