#![no_main]

use exact_lipschitz::Network;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = Network::from_json_slice(data) {
        // accepted models must round-trip and evaluate
        let back = Network::from_json_value(&net.to_json()).expect("round trip");
        assert_eq!(net, back);
        if net.input_dim() <= 64 {
            let x = vec![0.5; net.input_dim()];
            let _ = net.forward(&x).expect("forward on a valid model");
        }
    }
});
