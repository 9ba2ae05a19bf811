#![no_main]

use bevscene_core::bevmap::BevMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = BevMap::from_bytes(data) {
        // Anything accepted must re-encode to a file that decodes identically.
        let bytes = map.to_bytes().expect("re-encode");
        assert_eq!(BevMap::from_bytes(&bytes).expect("decode re-encoded"), map);
    }
});
