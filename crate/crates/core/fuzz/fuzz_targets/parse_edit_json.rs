#![no_main]

use bevscene_core::bevmap::{BevLayout, BevMap, Edit};
use bevscene_core::pipeline::sample_scene;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(edit) = Edit::from_json(data) else { return };
    let layout = BevLayout::clevr(32, 32, 4);
    let map = sample_scene(0, &layout, &bevscene_core::bevmap::SceneSampler::with_count(2, 3)).unwrap();
    // Accepted edits must leave a map that satisfies every invariant.
    if let Ok(next) = map.edit(&edit) {
        next.check_invariants().expect("edited map breaks an invariant");
        let _ = BevMap::from_bytes(&next.to_bytes().unwrap()).expect("edited map round-trips");
    }
});
