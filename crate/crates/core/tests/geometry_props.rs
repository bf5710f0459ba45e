mod common;

use exact_lipschitz::symprop::{symprop, symprop_with_states};
use exact_lipschitz::{Network, Polyhedron};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{cube, random_small_net, Kind};

fn random_polytope(rng: &mut impl Rng, d: usize) -> Polyhedron {
    // random cuts through a box, keeping the origin inside
    let m = rng.gen_range(1..5);
    let cuts = Array2::from_shape_fn((m, d), |_| rng.gen_range(-1.0..1.0));
    let rhs = Array1::from_shape_fn(m, |_| rng.gen_range(0.1..1.0));
    Polyhedron::new(cuts, rhs)
        .unwrap()
        .stack(&Polyhedron::hypercube(d, -1.0, 1.0).unwrap())
        .unwrap()
}

fn point(rng: &mut impl Rng, d: usize, r: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-r..r)).collect()
}

fn kind(seed: u64) -> Kind {
    Kind::ALL[(seed % 3) as usize]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn preimage_membership(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, e) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let p = random_polytope(&mut rng, e);
        let j = Array2::from_shape_fn((e, d), |_| rng.gen_range(-2.0..2.0));
        let b = Array1::from_shape_fn(e, |_| rng.gen_range(-0.5..0.5));
        let pre = p.affine_preimage(j.view(), b.view()).unwrap();
        for _ in 0..50 {
            let x = point(&mut rng, d, 2.0);
            let y = j.dot(&Array1::from(x.clone())) + &b;
            let inside = p.contains(y.as_slice().unwrap(), 0.0);
            // skip points numerically on the boundary
            if p.contains(y.as_slice().unwrap(), 1e-9) != p.contains(y.as_slice().unwrap(), -1e-9) {
                continue;
            }
            prop_assert_eq!(pre.contains(&x, 0.0), inside);
        }
    }

    #[test]
    fn linear_bounds_sandwich(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.gen_range(1..4);
        let p = random_polytope(&mut rng, d);
        let obj: Vec<f64> = point(&mut rng, d, 1.0);
        let (lo, hi) = p.linear_bounds(&obj).unwrap();
        prop_assert!(lo <= hi + 1e-9);
        let mut seen_lo = f64::INFINITY;
        let mut seen_hi = f64::NEG_INFINITY;
        for _ in 0..500 {
            let x = point(&mut rng, d, 1.0);
            if p.contains(&x, 0.0) {
                let v: f64 = obj.iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
                seen_lo = seen_lo.min(v);
                seen_hi = seen_hi.max(v);
            }
        }
        // origin is feasible, so the optimum is no worse than it
        prop_assert!(lo <= 1e-9 && hi >= -1e-9);
    }

    #[test]
    fn feasible_point_is_a_certificate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.gen_range(1..4);
        let m = rng.gen_range(1..6);
        let a = Array2::from_shape_fn((m, d), |_| rng.gen_range(-1.0..1.0));
        let b = Array1::from_shape_fn(m, |_| rng.gen_range(-1.0..1.0));
        let p = Polyhedron::new(a, b).unwrap();
        match p.feasible_point().unwrap() {
            Some(x) => prop_assert!(p.contains(&x, 1e-7)),
            None => {
                // no sampled point may satisfy it
                for _ in 0..2000 {
                    prop_assert!(!p.contains(&point(&mut rng, d, 50.0), 0.0));
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_small_net(&mut rng, kind(seed));
        let d = net.input_dim();
        let x = point(&mut rng, d, 1.0);
        let (jac, boundary) = net.jacobian_at(&x).unwrap();
        prop_assume!(!boundary);
        let h = 1e-7;
        let f0 = net.forward(&x).unwrap();
        for j in 0..d {
            let mut xp = x.clone();
            xp[j] += h;
            let (_, b2) = net.jacobian_at(&xp).unwrap();
            let (j2, _) = net.jacobian_at(&xp).unwrap();
            prop_assume!(!b2 && j2 == jac);
            let f1 = net.forward(&xp).unwrap();
            for i in 0..f0.len() {
                let fd = (f1[i] - f0[i]) / h;
                prop_assert!((fd - jac[[i, j]]).abs() <= 1e-5 * jac[[i, j]].abs().max(1.0));
            }
        }
    }

    #[test]
    fn lin_prop_equals_forward_on_fixed_region(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_small_net(&mut rng, kind(seed));
        let d = net.input_dim();
        let c = point(&mut rng, d, 1.0);
        let r = 1e-3;
        let lower: Vec<f64> = c.iter().map(|v| v - r).collect();
        let upper: Vec<f64> = c.iter().map(|v| v + r).collect();
        let omega = Polyhedron::from_box(&lower, &upper).unwrap();
        let pattern = symprop(&net, &omega).unwrap();
        prop_assume!(pattern.first_star == net.depth());
        let slopes: Vec<_> = pattern.layers.iter().map(|l| l.slopes.clone()).collect();
        let biases: Vec<_> = pattern.layers.iter().map(|l| l.biases.clone()).collect();
        let prefix = net.lin_prop(&slopes, &biases, net.depth()).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = c.iter().map(|v| v + rng.gen_range(-r..r)).collect();
            let y = prefix.apply(Array1::from(x.clone()).view());
            let f = net.forward(&x).unwrap();
            for (a, b) in y.iter().zip(&f) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn symprop_fixed_neurons_match_evaluation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_small_net(&mut rng, kind(seed));
        let d = net.input_dim();
        let omega = cube(d, rng.gen_range(0.1..1.0));
        let (pattern, states) = symprop_with_states(&net, &omega).unwrap();
        let bbox = omega.bounding_box().unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            let pre = net.pre_activations(&x).unwrap();
            let mut aux = Vec::new();
            let mut z = x.clone();
            for (l, layer) in net.layers().iter().enumerate() {
                let local = layer.activation.local_affine(&pre[l]).unwrap();
                let post = layer.activation.evaluate(&pre[l]).unwrap();
                let lp = &pattern.layers[l];
                if !local.on_boundary {
                    for n in 0..post.len() {
                        if lp.stars.contains(&n) {
                            continue;
                        }
                        // fixed neurons carry a degenerate row equal to the selected piece
                        for j in 0..pre[l].len() {
                            prop_assert_eq!(lp.slopes.lower()[[n, j]], lp.slopes.upper()[[n, j]]);
                            prop_assert_eq!(lp.slopes.lower()[[n, j]], local.slopes[[n, j]]);
                        }
                    }
                }
                for &n in &lp.stars {
                    aux.push(post[n]);
                }
                z.truncate(d);
                z.extend(&aux);
                let st = &states[l];
                prop_assert_eq!(st.symbolic_dim(), z.len());
                prop_assert!(st.region.contains(&z, 1e-7));
                let env = st.coeffs.dot(&Array1::from(z.clone())) + &st.offset;
                for (a, b) in env.iter().zip(&post) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn shrinking_region_shrinks_stars(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_small_net(&mut rng, kind(seed));
        let d = net.input_dim();
        let big = symprop(&net, &cube(d, 1.0)).unwrap();
        let small = symprop(&net, &cube(d, rng.gen_range(0.05..1.0))).unwrap();
        for (s, b) in small.layers.iter().zip(&big.layers) {
            prop_assert!(s.stars.iter().all(|n| b.stars.contains(n)));
        }
        prop_assert!(small.first_star >= big.first_star);
    }
}

#[test]
fn network_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in Kind::ALL {
        let net = random_small_net(&mut rng, k);
        let back = Network::from_json_value(&net.to_json()).unwrap();
        assert_eq!(net, back);
    }
}
