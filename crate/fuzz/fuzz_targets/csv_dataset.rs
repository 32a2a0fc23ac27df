#![no_main]

use libfuzzer_sys::fuzz_target;
use pwlcert::network::parse_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = parse_csv(data) {
        if let Some(first) = samples.first() {
            assert!(samples.iter().all(|s| s.input.len() == first.input.len()));
        }
        assert!(samples.iter().flat_map(|s| &s.input).all(|v| (0.0..=1.0).contains(v)));
    }
});
