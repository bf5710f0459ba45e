//! Cheaper estimators: the layerwise product bound, the bound of the initial
//! symbolic pass alone, and a sampled lower bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnb::Subproblem;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::norms::{induced_norm, NormPair};
use crate::polyhedron::Polyhedron;
use crate::symprop::check_region;

/// Product of the weight norms and activation constants. Needs `p == q`.
pub fn layerwise_bound(net: &Network, np: NormPair) -> Result<f64> {
    if !np.is_symmetric() {
        return Err(Error::UnsupportedNorm(format!(
            "{np} (the layerwise bound needs p = q)"
        )));
    }
    let mut bound = 1.0;
    for layer in net.layers() {
        bound *= induced_norm(layer.weight.view(), np)? * layer.activation.lipschitz(np)?;
    }
    Ok(bound)
}

pub fn symprop_bound(net: &Network, omega: &Polyhedron, np: NormPair) -> Result<f64> {
    Ok(Subproblem::root(net, omega, np)?.upper())
}

/// Sampling range of every coordinate: the bounding box of `omega`, with
/// unbounded sides replaced from `default_box`.
pub fn sampling_box(omega: &Polyhedron, default_box: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let width = default_box.1 - default_box.0;
    Ok(omega
        .bounding_box()?
        .into_iter()
        .map(|(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo + width),
            (false, true) => (hi - width, hi),
            (false, false) => default_box,
        })
        .collect())
}

/// `n` points drawn uniformly from `omega` (clipped to the sampling box) by
/// rejection.
pub fn sample_region(
    omega: &Polyhedron,
    n: usize,
    rng: &mut impl Rng,
    default_box: (f64, f64),
) -> Result<Vec<Vec<f64>>> {
    let bbox = sampling_box(omega, default_box)?;
    let max_rejections = 100 * n;
    let mut rejections = 0;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = bbox
            .iter()
            .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        if omega.contains(&x, 0.0) {
            out.push(x);
        } else {
            rejections += 1;
            if rejections > max_rejections {
                return Err(Error::Sampling(format!(
                    "{rejections} rejections while drawing {n} points"
                )));
            }
        }
    }
    Ok(out)
}

/// Largest Jacobian norm over `n` random points of `omega`, skipping points
/// close to a piece boundary; 0 when no point is usable.
pub fn sampled_lower_bound(
    net: &Network,
    omega: &Polyhedron,
    np: NormPair,
    n: usize,
    seed: u64,
    default_box: (f64, f64),
) -> Result<f64> {
    check_region(net, omega)?;
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for x in sample_region(omega, n, &mut rng, default_box)? {
        let (jac, boundary) = net.jacobian_at(&x)?;
        if !boundary {
            best = best.max(induced_norm(jac.view(), np)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormOrder;

    const ABS: &str = r#"{"layers": [{"type": "affine", "W": [[1.0], [-1.0]]}, {"type": "relu"},
                                     {"type": "affine", "W": [[1.0, 1.0]]}]}"#;

    fn two() -> NormPair {
        NormPair::same(NormOrder::Two)
    }

    #[test]
    fn abs_estimators() {
        let net = Network::from_json_str(ABS).unwrap();
        let global = Polyhedron::unconstrained(1).unwrap();
        assert!((layerwise_bound(&net, two()).unwrap() - 2.0).abs() < 1e-12);
        assert!((symprop_bound(&net, &global, two()).unwrap() - 1.0).abs() < 1e-12);
        let box1 = Polyhedron::hypercube(1, -1.0, 1.0).unwrap();
        for seed in 0..5 {
            let v = sampled_lower_bound(&net, &box1, two(), 5, seed, (-10.0, 10.0)).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            sampled_lower_bound(&net, &box1, two(), 0, 0, (-10.0, 10.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn relu_paths_do_not_cancel() {
        let net = Network::from_json_str(
            r#"{"layers": [{"type": "affine", "W": [[1.0, 0.0], [0.0, 1.0]]}, {"type": "relu"},
                           {"type": "affine", "W": [[1.0, 1.0]]}]}"#,
        )
        .unwrap();
        let v = symprop_bound(&net, &Polyhedron::unconstrained(2).unwrap(), two()).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn affine_estimators_agree() {
        let net = Network::from_json_str(
            r#"{"layers": [{"type": "affine", "W": [[2.0, 0.0], [0.0, 2.0]]}]}"#,
        )
        .unwrap();
        let omega = Polyhedron::hypercube(2, 0.0, 1.0).unwrap();
        assert_eq!(layerwise_bound(&net, two()).unwrap(), 2.0);
        assert_eq!(symprop_bound(&net, &omega, two()).unwrap(), 2.0);
        assert_eq!(
            sampled_lower_bound(&net, &omega, two(), 1, 3, (-10.0, 10.0)).unwrap(),
            2.0
        );
    }

    #[test]
    fn layerwise_rejects_mixed_pair() {
        let net = Network::from_json_str(ABS).unwrap();
        let np = NormPair::new(NormOrder::One, NormOrder::Inf).unwrap();
        assert!(matches!(
            layerwise_bound(&net, np),
            Err(Error::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn half_bounded_sampling_box() {
        let omega =
            Polyhedron::from_box(&[1.0, f64::NEG_INFINITY], &[f64::INFINITY, f64::INFINITY])
                .unwrap();
        let b = sampling_box(&omega, (-10.0, 10.0)).unwrap();
        assert!((b[0].0 - 1.0).abs() < 1e-8 && (b[0].1 - 21.0).abs() < 1e-8);
        assert_eq!(b[1], (-10.0, 10.0));
    }

    #[test]
    fn same_seed_same_bound() {
        let net = Network::from_json_str(
            r#"{"layers": [{"type": "affine", "W": [[1.0, -2.0], [0.5, 1.0]], "b": [0.1, -0.2]},
                           {"type": "relu"}, {"type": "affine", "W": [[1.0, 3.0]]}]}"#,
        )
        .unwrap();
        let omega = Polyhedron::hypercube(2, -1.0, 1.0).unwrap();
        let a = sampled_lower_bound(&net, &omega, two(), 50, 7, (-10.0, 10.0)).unwrap();
        let b = sampled_lower_bound(&net, &omega, two(), 50, 7, (-10.0, 10.0)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
