#![no_main]

use exact_lipschitz::Polyhedron;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = Polyhedron::from_region_slice(data) {
        assert!(p.constraints().iter().all(|v| v.is_finite()));
        assert!(p.bounds().iter().all(|v| v.is_finite()));
        if p.dim() <= 8 && p.n_constraints() <= 32 {
            let _ = p.is_feasible();
        }
    }
});
