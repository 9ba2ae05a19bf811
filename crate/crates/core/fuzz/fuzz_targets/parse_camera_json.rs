#![no_main]

use bevscene_core::renderer::{make_rays, Camera};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(cam) = serde_json::from_slice::<Camera>(data) else { return };
    if cam.validate().is_ok() {
        for ray in make_rays(&cam, 3, 2) {
            assert!(ray.direction.iter().all(|v| v.is_finite()));
        }
    }
});
