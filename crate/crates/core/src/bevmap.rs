//! Bird's-eye-view semantic maps.
//!
//! A [`BevMap`] is always derived from its object list: every edit re-rasterizes
//! from scratch, and translation moves grid and objects together. Maps loaded
//! from a raw grid may carry an empty object list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};

pub const BEV_MAGIC: &[u8; 8] = b"BEVMAP01";

/// CLEVR palette, linear RGB.
pub const CLEVR_COLORS: [[f64; 3]; 8] = [
    [0.341, 0.341, 0.341], // gray
    [0.678, 0.137, 0.137], // red
    [0.165, 0.294, 0.843], // blue
    [0.114, 0.412, 0.078], // green
    [0.506, 0.290, 0.098], // brown
    [0.506, 0.149, 0.753], // purple
    [0.161, 0.816, 0.816], // cyan
    [1.000, 0.933, 0.200], // yellow
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Cube,
    Sphere,
    Cylinder,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Cube, Shape::Sphere, Shape::Cylinder];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Shape::Cube => 0,
            Shape::Sphere => 1,
            Shape::Cylinder => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub shape: Shape,
    /// Palette index.
    pub color: usize,
    /// World units, (x, y).
    pub center: [f64; 2],
    pub footprint_radius: f64,
    pub height: f64,
}

impl SceneObject {
    fn validate(&self, n_colors: usize) -> Result<()> {
        let ok = self.footprint_radius > 0.0
            && self.footprint_radius.is_finite()
            && self.height > 0.0
            && self.height.is_finite()
            && self.center.iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "object {} has non-positive or non-finite geometry",
                self.id
            )));
        }
        if self.color >= n_colors {
            return Err(Error::InvalidArgument(format!(
                "object {} color {} outside palette of {n_colors}",
                self.id, self.color
            )));
        }
        Ok(())
    }

    /// Radius of the circle enclosing the footprint (squares reach out to their corners).
    pub fn bounding_radius(&self) -> f64 {
        match self.shape {
            Shape::Cube => self.footprint_radius * std::f64::consts::SQRT_2,
            Shape::Sphere | Shape::Cylinder => self.footprint_radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSchema {
    OnehotColorShape,
    Occupancy,
}

/// World → grid affine map: `col = scale * x + offset[0]`, `row = scale * y + offset[1]`.
///
/// Grid coordinates are continuous; pixel `(r, c)` covers `[r, r+1) x [c, c+1)`
/// so its center sits at `(r + 0.5, c + 0.5)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTransform {
    pub scale: f64,
    pub offset: [f64; 2],
}

impl GridTransform {
    pub fn new(scale: f64, offset: [f64; 2]) -> Self {
        Self { scale, offset }
    }

    /// World (x, y) → continuous grid (col, row).
    pub fn to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        (self.scale * x + self.offset[0], self.scale * y + self.offset[1])
    }

    /// Continuous grid (col, row) → world (x, y).
    pub fn to_world(&self, col: f64, row: f64) -> (f64, f64) {
        ((col - self.offset[0]) / self.scale, (row - self.offset[1]) / self.scale)
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        self.to_world(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Same world frame, viewed through a window whose pixel (0, 0) is global `(row, col)`.
    pub fn shifted(&self, row: i64, col: i64) -> Self {
        Self {
            scale: self.scale,
            offset: [self.offset[0] - col as f64, self.offset[1] - row as f64],
        }
    }
}

impl Default for GridTransform {
    fn default() -> Self {
        Self::new(4.0, [0.0, 0.0])
    }
}

/// Everything about a map except its content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevLayout {
    pub height: usize,
    pub width: usize,
    pub schema: ChannelSchema,
    pub n_colors: usize,
    pub transform: GridTransform,
    pub margin_px: usize,
}

impl BevLayout {
    pub fn clevr(height: usize, width: usize, margin_px: usize) -> Self {
        Self {
            height,
            width,
            schema: ChannelSchema::OnehotColorShape,
            n_colors: CLEVR_COLORS.len(),
            transform: GridTransform::default(),
            margin_px,
        }
    }

    pub fn channels(&self) -> usize {
        match self.schema {
            ChannelSchema::OnehotColorShape => self.n_colors + Shape::COUNT,
            ChannelSchema::Occupancy => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!(
                "map dims must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        if self.schema == ChannelSchema::OnehotColorShape && self.n_colors == 0 {
            return Err(Error::InvalidArgument("one-hot schema needs at least one color".into()));
        }
        if !(self.transform.scale > 0.0 && self.transform.scale.is_finite())
            || !self.transform.offset.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument("world_to_grid must be finite with positive scale".into()));
        }
        if 2 * self.margin_px >= self.height.min(self.width) {
            return Err(Error::InvalidArgument(format!(
                "margin {} leaves no interior in a {}x{} map",
                self.margin_px, self.height, self.width
            )));
        }
        Ok(())
    }

    /// A tight layout has no margin; footprints are clipped at the canvas edge.
    pub fn is_tight(&self) -> bool {
        self.margin_px == 0
    }
}

/// Pixel rectangle of a window inside a larger (possibly unbounded) map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// (row, col) of the window's top-left pixel in the global map.
    pub origin: [i64; 2],
    /// (h, w) in pixels.
    pub size: [usize; 2],
}

impl WindowSpec {
    pub fn new(row: i64, col: i64, h: usize, w: usize) -> Self {
        Self { origin: [row, col], size: [h, w] }
    }

    pub fn full(map: &BevMap) -> Self {
        Self::new(0, 0, map.height(), map.width())
    }

    pub fn offset(&self, d_row: i64, d_col: i64) -> Self {
        Self::new(self.origin[0] + d_row, self.origin[1] + d_col, self.size[0], self.size[1])
    }

    pub fn check_inside(&self, map_h: usize, map_w: usize) -> Result<()> {
        let [row, col] = self.origin;
        let [h, w] = self.size;
        let fits = row >= 0
            && col >= 0
            && h > 0
            && w > 0
            && (row as u64).saturating_add(h as u64) <= map_h as u64
            && (col as u64).saturating_add(w as u64) <= map_w as u64;
        if fits {
            Ok(())
        } else {
            Err(Error::WindowOutOfBounds { row, col, h, w, map_h, map_w })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    Insert { object: SceneObject },
    Remove { id: u32 },
    /// Shift by whole pixels, `[d_col, d_row]`.
    Move { id: u32, delta: [i64; 2] },
    Restyle {
        id: u32,
        #[serde(default)]
        color: Option<usize>,
        #[serde(default)]
        shape: Option<Shape>,
    },
}

impl Edit {
    /// Parses an edit payload as received over the wire.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// Immutable semantic map: `height x width x channels` values, row-major, channel-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct BevMap {
    layout: BevLayout,
    objects: Vec<SceneObject>,
    grid: Vec<f32>,
}

/// Integer pixel footprint of an object: center pixel and half extent.
struct Footprint {
    row: i64,
    col: i64,
    radius_px: f64,
    reach: i64,
    shape: Shape,
}

impl Footprint {
    fn of(obj: &SceneObject, t: &GridTransform) -> Self {
        let (gc, gr) = t.to_grid(obj.center[0], obj.center[1]);
        let radius_px = obj.footprint_radius * t.scale;
        Footprint {
            row: gr.floor() as i64,
            col: gc.floor() as i64,
            radius_px,
            reach: radius_px.floor() as i64,
            shape: obj.shape,
        }
    }

    fn contains(&self, row: i64, col: i64) -> bool {
        let dr = (row - self.row) as f64;
        let dc = (col - self.col) as f64;
        match self.shape {
            Shape::Cube => dr.abs() <= self.radius_px && dc.abs() <= self.radius_px,
            Shape::Sphere | Shape::Cylinder => dr * dr + dc * dc <= self.radius_px * self.radius_px,
        }
    }

    fn rows(&self) -> std::ops::RangeInclusive<i64> {
        self.row - self.reach..=self.row + self.reach
    }

    fn cols(&self) -> std::ops::RangeInclusive<i64> {
        self.col - self.reach..=self.col + self.reach
    }

    fn touches(&self, h: usize, w: usize) -> bool {
        self.row + self.reach >= 0
            && self.col + self.reach >= 0
            && self.row - self.reach < h as i64
            && self.col - self.reach < w as i64
    }
}

/// Draws `objects` into a fresh grid. Later objects win where footprints overlap.
pub fn rasterize(objects: &[SceneObject], layout: &BevLayout) -> Result<BevMap> {
    layout.validate()?;
    let (h, w, c) = (layout.height, layout.width, layout.channels());
    let mut grid = vec![0.0f32; h * w * c];
    let m = layout.margin_px as i64;
    for obj in objects {
        obj.validate(layout.n_colors)?;
        let fp = Footprint::of(obj, &layout.transform);
        if !layout.is_tight() {
            let lo_r = fp.row - fp.reach;
            let hi_r = fp.row + fp.reach;
            let lo_c = fp.col - fp.reach;
            let hi_c = fp.col + fp.reach;
            if lo_r < m || lo_c < m || hi_r >= h as i64 - m || hi_c >= w as i64 - m {
                return Err(Error::ObjectOutOfBounds {
                    id: obj.id as usize,
                    reason: format!(
                        "pixels rows {lo_r}..={hi_r}, cols {lo_c}..={hi_c} reach the {m} px margin of a {h}x{w} map"
                    ),
                });
            }
        }
        for row in fp.rows() {
            if row < 0 || row >= h as i64 {
                continue;
            }
            for col in fp.cols() {
                if col < 0 || col >= w as i64 || !fp.contains(row, col) {
                    continue;
                }
                let px = &mut grid[(row as usize * w + col as usize) * c..][..c];
                match layout.schema {
                    ChannelSchema::OnehotColorShape => {
                        px.fill(0.0);
                        px[obj.color] = 1.0;
                        px[layout.n_colors + obj.shape.index()] = 1.0;
                    }
                    ChannelSchema::Occupancy => px[0] = 1.0,
                }
            }
        }
    }
    Ok(BevMap {
        layout: layout.clone(),
        objects: objects.to_vec(),
        grid,
    })
}

impl BevMap {
    /// All-zero map with no objects.
    pub fn empty(layout: &BevLayout) -> Result<Self> {
        rasterize(&[], layout)
    }

    /// Wraps a raw grid (e.g. painted occupancy) after checking every invariant.
    pub fn from_grid(layout: BevLayout, grid: Vec<f32>, objects: Vec<SceneObject>) -> Result<Self> {
        layout.validate()?;
        let n = container::checked_volume(&[layout.height, layout.width, layout.channels()])?;
        if grid.len() != n {
            return Err(Error::ShapeMismatch(format!("grid has {} values, layout needs {n}", grid.len())));
        }
        for obj in &objects {
            obj.validate(layout.n_colors)?;
        }
        let map = Self { layout, objects, grid };
        map.check_invariants()?;
        Ok(map)
    }

    pub fn layout(&self) -> &BevLayout {
        &self.layout
    }
    pub fn height(&self) -> usize {
        self.layout.height
    }
    pub fn width(&self) -> usize {
        self.layout.width
    }
    pub fn channels(&self) -> usize {
        self.layout.channels()
    }
    pub fn margin_px(&self) -> usize {
        self.layout.margin_px
    }
    pub fn transform(&self) -> &GridTransform {
        &self.layout.transform
    }
    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }
    pub fn grid(&self) -> &[f32] {
        &self.grid
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let c = self.channels();
        &self.grid[(row * self.width() + col) * c..][..c]
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn next_object_id(&self) -> u32 {
        self.objects.iter().map(|o| o.id + 1).max().unwrap_or(0)
    }

    /// Sum of each channel over the whole grid.
    pub fn channel_sums(&self) -> Vec<f64> {
        let c = self.channels();
        let mut sums = vec![0.0; c];
        for px in self.grid.chunks_exact(c) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += *v as f64;
            }
        }
        sums
    }

    pub fn nonzero_pixels(&self) -> usize {
        self.grid
            .chunks_exact(self.channels())
            .filter(|px| px.iter().any(|&v| v != 0.0))
            .count()
    }

    /// Value range, schema one-hot structure and the all-zero margin band.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_encoding()?;
        let (h, w, m) = (self.height(), self.width(), self.margin_px());
        for row in 0..h {
            for col in 0..w {
                let in_band = row < m || col < m || row >= h - m || col >= w - m;
                if in_band && self.pixel(row, col).iter().any(|&v| v != 0.0) {
                    return Err(Error::Format(format!("margin pixel ({row}, {col}) is not zero")));
                }
            }
        }
        Ok(())
    }

    /// Per-pixel checks only: values in `[0, 1]` and the schema's one-hot
    /// structure. Translated maps pass this but may have content in the margin.
    pub fn check_encoding(&self) -> Result<()> {
        let (h, w, c) = (self.height(), self.width(), self.channels());
        for row in 0..h {
            for col in 0..w {
                let px = self.pixel(row, col);
                if px.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Format(format!("pixel ({row}, {col}) has values outside [0, 1]")));
                }
                match self.layout.schema {
                    ChannelSchema::OnehotColorShape => {
                        let nc = self.layout.n_colors;
                        let binary = px.iter().all(|&v| v == 0.0 || v == 1.0);
                        let colors = px[..nc].iter().filter(|&&v| v == 1.0).count();
                        let shapes = px[nc..].iter().filter(|&&v| v == 1.0).count();
                        if !binary || colors > 1 || shapes > 1 {
                            return Err(Error::Format(format!("pixel ({row}, {col}) is not one-hot")));
                        }
                    }
                    ChannelSchema::Occupancy => {
                        if px[0] != 0.0 && px[0] != 1.0 {
                            return Err(Error::Format(format!("pixel ({row}, {col}) occupancy is not binary")));
                        }
                    }
                }
            }
        }
        debug_assert_eq!(self.grid.len(), h * w * c);
        Ok(())
    }

    /// Sub-map under `window`. World coordinates are preserved: the crop's
    /// transform is shifted so each pixel keeps its global position. The crop
    /// is tight (margin 0) and keeps every object with at least one pixel inside.
    pub fn crop_window(&self, window: &WindowSpec) -> Result<BevMap> {
        window.check_inside(self.height(), self.width())?;
        let [r0, c0] = window.origin;
        let [h, w] = window.size;
        let c = self.channels();
        let mut grid = Vec::with_capacity(h * w * c);
        for row in 0..h {
            let start = ((r0 as usize + row) * self.width() + c0 as usize) * c;
            grid.extend_from_slice(&self.grid[start..start + w * c]);
        }
        let layout = BevLayout {
            height: h,
            width: w,
            margin_px: 0,
            transform: self.layout.transform.shifted(r0, c0),
            ..self.layout.clone()
        };
        let objects = self
            .objects
            .iter()
            .filter(|o| {
                let fp = Footprint::of(o, &layout.transform);
                fp.touches(h, w)
                    && fp.rows().any(|r| {
                        (0..h as i64).contains(&r)
                            && fp.cols().any(|cc| (0..w as i64).contains(&cc) && fp.contains(r, cc))
                    })
            })
            .cloned()
            .collect();
        Ok(BevMap { layout, objects, grid })
    }

    /// Shifts content by `dx` columns and `dy` rows, zero-filling. The shift
    /// must stay within the margin so no content is lost.
    pub fn translate(&self, dx: i64, dy: i64) -> Result<BevMap> {
        let m = self.margin_px() as i64;
        if dx.abs() > m || dy.abs() > m {
            return Err(Error::ShiftExceedsMargin { dx, dy, margin: self.margin_px() });
        }
        Ok(self.shift_unchecked(dx, dy))
    }

    /// Like [`translate`](Self::translate) but content pushed past the canvas
    /// edge is dropped, along with objects that no longer have any pixel inside.
    /// Only meaningful for tight maps.
    pub fn translate_clipped(&self, dx: i64, dy: i64) -> BevMap {
        let mut out = self.shift_unchecked(dx, dy);
        let (h, w) = (out.height(), out.width());
        let t = out.layout.transform;
        out.objects.retain(|o| {
            let fp = Footprint::of(o, &t);
            fp.rows().any(|r| {
                (0..h as i64).contains(&r) && fp.cols().any(|c| (0..w as i64).contains(&c) && fp.contains(r, c))
            })
        });
        out
    }

    fn shift_unchecked(&self, dx: i64, dy: i64) -> BevMap {
        let (h, w, c) = (self.height(), self.width(), self.channels());
        let mut grid = vec![0.0f32; self.grid.len()];
        for row in 0..h as i64 {
            let src_r = row - dy;
            if src_r < 0 || src_r >= h as i64 {
                continue;
            }
            for col in 0..w as i64 {
                let src_c = col - dx;
                if src_c < 0 || src_c >= w as i64 {
                    continue;
                }
                let dst = (row as usize * w + col as usize) * c;
                let src = (src_r as usize * w + src_c as usize) * c;
                grid[dst..dst + c].copy_from_slice(&self.grid[src..src + c]);
            }
        }
        let s = self.layout.transform.scale;
        let objects = self
            .objects
            .iter()
            .map(|o| SceneObject {
                center: [o.center[0] + dx as f64 / s, o.center[1] + dy as f64 / s],
                ..o.clone()
            })
            .collect();
        BevMap { layout: self.layout.clone(), objects, grid }
    }

    /// Applies an object-level edit and re-rasterizes.
    pub fn edit(&self, edit: &Edit) -> Result<BevMap> {
        let mut objects = self.objects.clone();
        let find = |objects: &[SceneObject], id: u32| {
            objects.iter().position(|o| o.id == id).ok_or(Error::UnknownObject(id as usize))
        };
        match edit {
            Edit::Insert { object } => {
                if self.object(object.id).is_some() {
                    return Err(Error::InvalidArgument(format!("object id {} already exists", object.id)));
                }
                objects.push(object.clone());
            }
            Edit::Remove { id } => {
                let i = find(&objects, *id)?;
                objects.remove(i);
            }
            Edit::Move { id, delta } => {
                let i = find(&objects, *id)?;
                let s = self.layout.transform.scale;
                let o = &mut objects[i];
                o.center = [o.center[0] + delta[0] as f64 / s, o.center[1] + delta[1] as f64 / s];
            }
            Edit::Restyle { id, color, shape } => {
                let i = find(&objects, *id)?;
                if let Some(color) = color {
                    objects[i].color = *color;
                }
                if let Some(shape) = shape {
                    objects[i].shape = *shape;
                }
            }
        }
        rasterize(&objects, &self.layout)
    }

    /// Serializes to the `.bev` container.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = BevHeader {
            h: self.height(),
            w: self.width(),
            c: self.channels(),
            schema: self.layout.schema,
            world_to_grid: self.layout.transform,
            margin_px: self.margin_px(),
            objects: self.objects.clone(),
        };
        container::encode(BEV_MAGIC, &header, &container::f32_payload(self.grid.iter().copied()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload): (BevHeader, _) = container::decode(BEV_MAGIC, bytes)?;
        let n_colors = match header.schema {
            ChannelSchema::OnehotColorShape => header.c.checked_sub(Shape::COUNT).filter(|&n| n > 0).ok_or_else(|| {
                Error::Format(format!("one-hot schema needs more than {} channels, got {}", Shape::COUNT, header.c))
            })?,
            ChannelSchema::Occupancy => {
                if header.c != 1 {
                    return Err(Error::Format(format!("occupancy schema needs 1 channel, got {}", header.c)));
                }
                0
            }
        };
        let layout = BevLayout {
            height: header.h,
            width: header.w,
            schema: header.schema,
            n_colors,
            transform: header.world_to_grid,
            margin_px: header.margin_px,
        };
        let n = container::checked_volume(&[header.h, header.w, header.c])?;
        let grid = container::read_f32s(payload, n)?;
        Self::from_grid(layout, grid, header.objects)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BevHeader {
    h: usize,
    w: usize,
    c: usize,
    schema: ChannelSchema,
    world_to_grid: GridTransform,
    margin_px: usize,
    objects: Vec<SceneObject>,
}

/// Random CLEVR-style layouts: a uniform object count, then rejection-sampled
/// placements whose centers snap to pixel centers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneSampler {
    pub n_min: usize,
    pub n_max: usize,
    /// World units.
    pub radius_range: [f64; 2],
    /// Allowed fraction of `r1 + r2` by which two bounding circles may overlap.
    pub max_overlap: f64,
    pub max_attempts: usize,
}

impl Default for SceneSampler {
    fn default() -> Self {
        Self {
            n_min: 3,
            n_max: 8,
            radius_range: [0.5, 1.0],
            max_overlap: 0.0,
            max_attempts: 10_000,
        }
    }
}

impl SceneSampler {
    pub fn with_count(n_min: usize, n_max: usize) -> Self {
        Self { n_min, n_max, ..Self::default() }
    }

    /// Objects that fit inside `layout`'s margin. Tight layouts keep footprints fully on canvas.
    pub fn sample(&self, seed: u64, layout: &BevLayout) -> Result<Vec<SceneObject>> {
        if self.n_min > self.n_max {
            return Err(Error::InvalidArgument(format!("n_min {} > n_max {}", self.n_min, self.n_max)));
        }
        let [r_lo, r_hi] = self.radius_range;
        if !(r_lo > 0.0 && r_lo <= r_hi) {
            return Err(Error::InvalidArgument(format!("bad radius range {:?}", self.radius_range)));
        }
        layout.validate()?;
        let n_colors = match layout.schema {
            ChannelSchema::OnehotColorShape => layout.n_colors,
            ChannelSchema::Occupancy => layout.n_colors.max(1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.random_range(self.n_min..=self.n_max);
        let t = layout.transform;
        let m = layout.margin_px as i64;
        let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
        let mut attempts = 0;
        while objects.len() < count {
            attempts += 1;
            if attempts > self.max_attempts {
                return Err(Error::SamplerExhausted { seed, count });
            }
            let shape = Shape::ALL[rng.random_range(0..Shape::COUNT)];
            let color = rng.random_range(0..n_colors);
            let radius = rng.random_range(r_lo..=r_hi);
            let reach = (radius * t.scale).floor() as i64;
            let lo_r = m + reach;
            let hi_r = layout.height as i64 - 1 - m - reach;
            let lo_c = m + reach;
            let hi_c = layout.width as i64 - 1 - m - reach;
            if lo_r > hi_r || lo_c > hi_c {
                continue;
            }
            let row = rng.random_range(lo_r..=hi_r);
            let col = rng.random_range(lo_c..=hi_c);
            let (x, y) = t.pixel_center(row as usize, col as usize);
            let candidate = SceneObject {
                id: objects.len() as u32,
                shape,
                color,
                center: [x, y],
                footprint_radius: radius,
                height: 2.0 * radius,
            };
            let clear = objects.iter().all(|o| {
                let d = ((o.center[0] - x).powi(2) + (o.center[1] - y).powi(2)).sqrt();
                let reach = o.bounding_radius() + candidate.bounding_radius();
                (reach - d).max(0.0) / reach <= self.max_overlap
            });
            if clear {
                objects.push(candidate);
            }
        }
        Ok(objects)
    }
}
