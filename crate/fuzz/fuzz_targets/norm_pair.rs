#![no_main]

use exact_lipschitz::NormPair;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(np) = text.parse::<NormPair>() {
            let again: NormPair = np.to_string().parse().expect("display parses back");
            assert_eq!(np, again);
        }
    }
});
