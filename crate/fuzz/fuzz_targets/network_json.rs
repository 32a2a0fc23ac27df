#![no_main]

use libfuzzer_sys::fuzz_target;
use pwlcert::network::Network;

fuzz_target!(|data: &[u8]| {
    // parsing validates shapes, so anything accepted must round-trip
    if let Ok(net) = Network::from_json_slice(data) {
        let again = Network::from_json_slice(net.to_json().as_bytes()).expect("serialized network re-parses");
        assert_eq!(net, again);
        assert!(net.num_labels() > 0);
    }
});
