//! Writes the checked-in fuzz corpus seeds under `fuzz/corpus/<target>/`.
//!
//! `cargo run -p bevscene-core --example fuzz_seeds`

use std::path::Path;

use bevscene_core::bevmap::{BevLayout, ChannelSchema, Edit, SceneObject, SceneSampler, Shape, WindowSpec};
use bevscene_core::generator::{init_params, GeneratorConfig};
use bevscene_core::pipeline::{sample_scene, top_down_camera};
use bevscene_core::renderer::{Camera, Image, Projection};
use bevscene_core::signal::{fourier_grid, FeatureGrid, FourierConfig};

fn write(target: &str, name: &str, bytes: &[u8]) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(name), bytes).unwrap();
}

fn main() {
    let layout = BevLayout::clevr(16, 16, 2);
    let b = sample_scene(1, &layout, &SceneSampler::with_count(1, 2)).unwrap();
    write("decode_bev", "clevr_16", &b.to_bytes().unwrap());
    let occ = BevLayout { schema: ChannelSchema::Occupancy, ..BevLayout::clevr(8, 12, 0) };
    write("decode_bev", "occupancy_empty", &bevscene_core::bevmap::BevMap::empty(&occ).unwrap().to_bytes().unwrap());

    let g = FeatureGrid::from_bev(&b);
    write("decode_fgrid", "from_bev", &g.to_bytes().unwrap());
    let t = layout.transform;
    let f = fourier_grid(&FourierConfig::for_grid(4, t.scale), &WindowSpec::new(-3, 5, 4, 6), &t).unwrap();
    write("decode_fgrid", "fourier", &f.to_bytes().unwrap());

    let img = Image::from_fn(3, 5, |r, c| [r as f64 / 3.0, c as f64 / 5.0, 0.5]);
    write("decode_imgf", "gradient", &img.to_bytes().unwrap());

    let params = init_params(&GeneratorConfig::tiny(), 0).unwrap();
    write("decode_weights", "tiny", &params.to_bytes().unwrap());

    let object = SceneObject { id: 9, shape: Shape::Cube, color: 1, center: [4.0, 4.0], footprint_radius: 0.5, height: 1.0 };
    let edits = [
        ("insert", Edit::Insert { object }),
        ("remove", Edit::Remove { id: 0 }),
        ("move", Edit::Move { id: 0, delta: [2, -1] }),
        ("restyle", Edit::Restyle { id: 1, color: Some(3), shape: Some(Shape::Sphere) }),
    ];
    for (name, e) in edits {
        write("parse_edit_json", name, &serde_json::to_vec(&e).unwrap());
    }

    let top = top_down_camera(64, 64, 4.0, 3.0).unwrap();
    write("parse_camera_json", "top_down", &serde_json::to_vec(&top).unwrap());
    let persp =
        Camera::look_at([0.0, -4.0, 2.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0], Projection::Pinhole { f_norm: 1.0 }, 0.1, 20.0)
            .unwrap();
    write("parse_camera_json", "pinhole", &serde_json::to_vec(&persp).unwrap());
}
