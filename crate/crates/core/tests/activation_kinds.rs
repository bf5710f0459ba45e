mod common;
use common::*;
use exact_lipschitz::bnb::solve;
use exact_lipschitz::oracle::{brute_force_oracle, combination_count};
use exact_lipschitz::{Network, NormOrder, NormPair, Polyhedron, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[test]
fn other_activation_kinds_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    for i in 0..80 {
        let d0 = rng.gen_range(1..=3);
        let h = rng.gen_range(2..=6);
        let w1: Vec<Vec<f64>> = (0..h)
            .map(|_| (0..d0).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let b1: Vec<f64> = (0..h).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (act, out_w) = match i % 4 {
            0 => (json!({"type": "groupsort", "group_size": 3}), h),
            1 => (
                json!({"type": "prelu", "slopes": (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()}),
                h,
            ),
            2 => (
                json!({"type": "spline", "breakpoints": [-0.3, 0.4], "slopes": [0.5, -1.0, 2.0], "intercepts": [-0.15, -0.6, -1.8]}),
                h,
            ),
            _ => {
                let half = h / 2;
                let windows: Vec<Vec<usize>> = if half == 0 {
                    vec![vec![0]]
                } else {
                    (0..half).map(|k| vec![2 * k, 2 * k + 1]).collect()
                };
                let nw = windows.len();
                (json!({"type": "maxpool", "windows": windows}), nw)
            }
        };
        let w2: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..out_w).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = json!({"layers": [{"type": "affine", "W": w1, "b": b1}, act, {"type": "affine", "W": w2}]});
        let net = match Network::from_json_value(&model) {
            Ok(n) => n,
            Err(e) => panic!("{i}: {e} {model}"),
        };
        if combination_count(&net) > 1_000_000 {
            continue;
        }
        let omega = if i % 2 == 0 {
            Polyhedron::unconstrained(d0).unwrap()
        } else {
            cube(d0, 0.8)
        };
        for np in [NormOrder::One, NormOrder::Two, NormOrder::Inf].map(NormPair::same) {
            let res = solve(&net, &omega, SolverConfig::new(np)).unwrap();
            let ex = brute_force_oracle(&net, &omega, np).unwrap();
            let samp = exact_lipschitz::baselines::sampled_lower_bound(
                &net,
                &omega,
                np,
                300,
                i as u64,
                (-10.0, 10.0),
            )
            .unwrap();
            n += 1;
            assert!(
                rel_close(res.gub, ex, 1e-6) && rel_close(res.glb, ex, 1e-6),
                "{i} {np}: {res:?} vs {ex}"
            );
            assert!(samp <= ex + 1e-9, "{i}: sampled {samp} > {ex}");
        }
    }
    assert!(n > 150);
}
