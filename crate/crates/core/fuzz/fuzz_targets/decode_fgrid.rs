#![no_main]

use bevscene_core::signal::FeatureGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = FeatureGrid::from_bytes(data) {
        let bytes = grid.to_bytes().expect("re-encode");
        let again = FeatureGrid::from_bytes(&bytes).expect("decode re-encoded");
        assert_eq!(again.dims(), grid.dims());
        assert!(again.data().iter().zip(grid.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
