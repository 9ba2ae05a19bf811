#![no_main]

use bevscene_core::generator::GeneratorParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = GeneratorParams::from_bytes(data) {
        let bytes = params.to_bytes().expect("re-encode");
        let again = GeneratorParams::from_bytes(&bytes).expect("decode re-encoded");
        assert_eq!(again.to_bytes().unwrap(), bytes);
    }
});
