#![no_main]

use libfuzzer_sys::fuzz_target;
use pwlcert::network::parse_idx;

// First two bytes: length of the images file; the rest is the labels file.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let split = (usize::from(u16::from_le_bytes([data[0], data[1]])) + 2).min(data.len());
    if let Ok(samples) = parse_idx(&data[2..split], &data[split..]) {
        for s in &samples {
            assert!(s.input.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(s.label < 256);
        }
    }
});
