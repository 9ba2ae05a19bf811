#![no_main]

use bevscene_core::renderer::Image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = Image::from_bytes(data) {
        let bytes = img.to_bytes().expect("re-encode");
        assert_eq!(bytes, Image::from_bytes(&bytes).expect("decode re-encoded").to_bytes().unwrap());
    }
});
