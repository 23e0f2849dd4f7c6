#![no_main]

use libfuzzer_sys::fuzz_target;
use seqexplain::network::Network;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = Network::from_bytes(data) {
        assert_eq!(Network::from_bytes(&net.to_bytes()).expect("re-encoded checkpoint decodes"), net);
    }
});
