#![no_main]

use libfuzzer_sys::fuzz_target;
use pwlcert::network::parse_idx_array;

fuzz_target!(|data: &[u8]| {
    if let Ok(arr) = parse_idx_array(data) {
        assert_eq!(arr.dims.iter().product::<usize>(), arr.data.len());
        assert_eq!(data.len(), 4 + 4 * arr.dims.len() + arr.data.len());
    }
});
