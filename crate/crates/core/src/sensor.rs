//! Semantic + depth cameras.
//!
//! Each pixel casts a pinhole ray from the camera and walks the scene grid
//! cell by cell (exact traversal). Inside a cell the ray's height range is
//! tested against the cell's slabs, which are axis-aligned boxes, so the
//! first hit and its Euclidean distance are exact.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embodiment::{CameraConfig, EmbodimentConfig};
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::sim::Pose;

pub const NO_HIT: u16 = 65535;
pub const MAX_RANGE: f64 = 20.0;

/// Semantic instance ids and depth in millimeters, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub camera_index: u8,
    pub semantic: Vec<u16>,
    pub depth: Vec<u16>,
}

impl Image {
    /// Image with nothing in view.
    pub fn empty(width: u32, height: u32, camera_index: u8) -> Self {
        let n = (width * height) as usize;
        Self {
            width,
            height,
            camera_index,
            semantic: vec![0; n],
            depth: vec![NO_HIT; n],
        }
    }

    /// All-zero placeholder standing in for a missing camera.
    pub fn masked(width: u32, height: u32, camera_index: u8) -> Self {
        let n = (width * height) as usize;
        Self {
            width,
            height,
            camera_index,
            semantic: vec![0; n],
            depth: vec![0; n],
        }
    }

    pub fn is_masked(&self) -> bool {
        self.semantic.iter().all(|&s| s == 0) && self.depth.iter().all(|&d| d == 0)
    }

    pub fn pixel_count(&self) -> usize {
        self.semantic.len()
    }

    /// Per pixel `u16 semantic, u16 depth`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixel_count() * 4);
        for (s, d) in self.semantic.iter().zip(&self.depth) {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(width: u32, height: u32, camera_index: u8, bytes: &[u8]) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if bytes.len() != n * 4 {
            return Err(Error::Argument(format!(
                "image payload is {} bytes, expected {} for {width}x{height}",
                bytes.len(),
                n * 4
            )));
        }
        let mut semantic = Vec::with_capacity(n);
        let mut depth = Vec::with_capacity(n);
        for px in bytes.chunks_exact(4) {
            semantic.push(u16::from_le_bytes([px[0], px[1]]));
            depth.push(u16::from_le_bytes([px[2], px[3]]));
        }
        Ok(Self {
            width,
            height,
            camera_index,
            semantic,
            depth,
        })
    }

    /// Count of pixels showing `instance`.
    pub fn pixels_of(&self, instance: u16) -> usize {
        self.semantic.iter().filter(|&&s| s == instance).count()
    }
}

/// Set of instance ids with at least one pixel.
pub fn visible_instances(img: &Image) -> BTreeSet<u16> {
    img.semantic.iter().copied().filter(|&s| s != 0).collect()
}

/// Centers the image on a square canvas (padding is "nothing in view"), then
/// nearest-neighbor resizes it to `side × side`.
pub fn pad_to_square(img: &Image, side: u32) -> Result<Image> {
    let (w, h) = (img.width, img.height);
    let s = w.max(h);
    if side < s {
        return Err(Error::Range(format!("side {side} smaller than {w}x{h} input")));
    }
    let mut canvas = Image::empty(s, s, img.camera_index);
    let (ox, oy) = ((s - w) / 2, (s - h) / 2);
    for y in 0..h {
        let src = (y * w) as usize;
        let dst = ((y + oy) * s + ox) as usize;
        canvas.semantic[dst..dst + w as usize].copy_from_slice(&img.semantic[src..src + w as usize]);
        canvas.depth[dst..dst + w as usize].copy_from_slice(&img.depth[src..src + w as usize]);
    }
    if side == s {
        return Ok(canvas);
    }
    let mut out = Image::empty(side, side, img.camera_index);
    let map = |d: u32| (((d as u64 * 2 + 1) * s as u64) / (2 * side as u64)) as u32;
    for y in 0..side {
        let sy = map(y);
        for x in 0..side {
            let sx = map(x);
            let (di, si) = ((y * side + x) as usize, (sy * s + sx) as usize);
            out.semantic[di] = canvas.semantic[si];
            out.depth[di] = canvas.depth[si];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Render at this `(width, height)` instead of the camera's own resolution.
    pub size: Option<(u32, u32)>,
    pub max_range: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            size: None,
            max_range: MAX_RANGE,
        }
    }
}

/// World position `(x, y, z)` of camera `cam` and its absolute yaw in degrees.
pub fn camera_placement(e: &EmbodimentConfig, pose: &Pose, cam: &CameraConfig) -> ([f64; 3], f64) {
    let (cx, cz) = pose.collider_center(e);
    let (fx, fz) = pose.forward();
    let (rx, rz) = pose.right();
    let x = cx + cam.pos_x * rx + cam.pos_z * fx;
    let z = cz + cam.pos_x * rz + cam.pos_z * fz;
    ([x, cam.pos_y, z], pose.heading + cam.yaw)
}

/// Renders camera `cam` at its configured resolution.
pub fn render(scene: &Scene, e: &EmbodimentConfig, pose: &Pose, cam: usize) -> Result<Image> {
    render_with(scene, e, pose, cam, &RenderOptions::default())
}

pub fn render_with(
    scene: &Scene,
    e: &EmbodimentConfig,
    pose: &Pose,
    cam: usize,
    opts: &RenderOptions,
) -> Result<Image> {
    let camera = e.cameras.get(cam).ok_or_else(|| {
        Error::Index(format!("camera {cam} requested, embodiment has {}", e.cameras.len()))
    })?;
    let (width, height) = opts.size.unwrap_or((camera.width, camera.height));
    let (origin, yaw) = camera_placement(e, pose, camera);
    let mut img = Image::empty(width, height, cam as u8);

    let tx = (camera.hfov.to_radians() / 2.0).tan();
    let ty = (camera.vfov.to_radians() / 2.0).tan();
    let (sp, cp) = camera.pitch.to_radians().sin_cos();
    let (sy, cy) = yaw.to_radians().sin_cos();
    let marcher = Marcher::new(scene, origin, opts.max_range);
    for v in 0..height {
        let yc = (1.0 - 2.0 * (v as f64 + 0.5) / height as f64) * ty;
        for u in 0..width {
            let xc = (2.0 * (u as f64 + 0.5) / width as f64 - 1.0) * tx;
            let n = (xc * xc + yc * yc + 1.0).sqrt();
            let (x, y, z) = (xc / n, yc / n, 1.0 / n);
            // Pitch down about the camera's right axis, then yaw clockwise.
            let y2 = y * cp - z * sp;
            let z2 = z * cp + y * sp;
            let dir = [x * cy + z2 * sy, y2, -x * sy + z2 * cy];
            if let Some((inst, t)) = marcher.cast(dir) {
                let i = (v * width + u) as usize;
                img.semantic[i] = inst;
                img.depth[i] = ((t * 1000.0).round() as u64).min(NO_HIT as u64 - 1) as u16;
            }
        }
    }
    Ok(img)
}

struct Marcher<'a> {
    scene: &'a Scene,
    origin: [f64; 3],
    max_range: f64,
    top: f64,
}

impl<'a> Marcher<'a> {
    fn new(scene: &'a Scene, origin: [f64; 3], max_range: f64) -> Self {
        Self {
            scene,
            origin,
            max_range,
            top: scene.max_height() as f64,
        }
    }

    /// First `(instance, distance)` hit along the unit direction `d`.
    fn cast(&self, d: [f64; 3]) -> Option<(u16, f64)> {
        let s = self.scene;
        let cs = s.cell_size;
        let [ox, oy, oz] = self.origin;
        let mut t_end = self.max_range;
        // Nothing exists below the floor or above the tallest column.
        if d[1] < 0.0 {
            t_end = t_end.min(-oy / d[1]);
        } else if d[1] > 0.0 {
            if oy > self.top {
                return None;
            }
            t_end = t_end.min((self.top - oy) / d[1]);
        } else if oy < 0.0 || oy > self.top {
            return None;
        }

        // Clip against the grid rectangle.
        let (w, dep) = (s.nx as f64 * cs, s.nz as f64 * cs);
        let mut t0: f64 = 0.0;
        let mut t1 = t_end;
        for (o, dd, hi) in [(ox, d[0], w), (oz, d[2], dep)] {
            if dd.abs() < 1e-15 {
                if o < 0.0 || o >= hi {
                    return None;
                }
            } else {
                let (a, b) = ((0.0 - o) / dd, (hi - o) / dd);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if t0 > t1 {
            return None;
        }
        let px = ox + d[0] * t0;
        let pz = oz + d[2] * t0;
        let mut ix = ((px / cs).floor() as isize).clamp(0, s.nx as isize - 1);
        let mut iz = ((pz / cs).floor() as isize).clamp(0, s.nz as isize - 1);

        let step_x: isize = if d[0] > 0.0 { 1 } else { -1 };
        let step_z: isize = if d[2] > 0.0 { 1 } else { -1 };
        let next = |i: isize, step: isize, o: f64, dd: f64| -> (f64, f64) {
            if dd.abs() < 1e-15 {
                return (f64::INFINITY, f64::INFINITY);
            }
            let edge = if step > 0 { (i + 1) as f64 * cs } else { i as f64 * cs };
            ((edge - o) / dd, cs / dd.abs())
        };
        let (mut tx, dtx) = next(ix, step_x, ox, d[0]);
        let (mut tz, dtz) = next(iz, step_z, oz, d[2]);
        let mut t_in = t0;
        loop {
            let t_out = tx.min(tz).min(t1);
            let cell = iz as usize * s.nx + ix as usize;
            let y_in = oy + d[1] * t_in;
            let y_out = oy + d[1] * t_out;
            let (y_lo, y_hi) = if y_in < y_out { (y_in, y_out) } else { (y_out, y_in) };
            if (s.column_top(cell) as f64) >= y_lo {
                let mut best: Option<(u16, f64)> = None;
                for slab in s.slabs_at(cell) {
                    let (a, b) = (slab.y_min as f64, slab.y_max as f64);
                    if y_hi < a || y_lo > b {
                        continue;
                    }
                    let t = if y_in >= a && y_in <= b {
                        t_in
                    } else if y_in > b {
                        (b - oy) / d[1]
                    } else {
                        (a - oy) / d[1]
                    };
                    if best.is_none_or(|(_, bt)| t < bt) {
                        best = Some((slab.instance, t));
                    }
                }
                if best.is_some() {
                    return best;
                }
            }
            if t_out >= t1 {
                return None;
            }
            if tx < tz {
                ix += step_x;
                t_in = tx;
                tx += dtx;
            } else {
                iz += step_z;
                t_in = tz;
                tz += dtz;
            }
            if ix < 0 || iz < 0 || ix >= s.nx as isize || iz >= s.nz as isize {
                return None;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embodiment::preset_embodiment;
    use crate::scene::{SceneBuilder, WALL_CATEGORY};

    fn wall_scene() -> Scene {
        // 4 m square room, wall along z = 3.0..3.1.
        let mut b = SceneBuilder::new(0.05, 80, 80, 0);
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, 0..80, 60..62, 0.0, 2.0);
        b.build()
    }

    fn one_cam(pitch: f64, w: u32, h: u32) -> EmbodimentConfig {
        let mut e = preset_embodiment("locobot").unwrap();
        e.cameras[0].pitch = pitch;
        e.cameras[0].width = w;
        e.cameras[0].height = h;
        e
    }

    #[test]
    fn wall_one_meter_ahead() {
        let s = wall_scene();
        let e = one_cam(0.0, 65, 65);
        let pose = Pose::new(2.0, 2.0, 0.0);
        let img = render(&s, &e, &pose, 0).unwrap();
        let c = (32 * 65 + 32) as usize;
        assert!((img.depth[c] as i32 - 1000).abs() <= 1, "depth {}", img.depth[c]);
        assert_eq!(img.semantic[c], 1);
    }

    #[test]
    fn empty_scene_sees_nothing() {
        let s = SceneBuilder::new(0.05, 40, 40, 0).build();
        let e = one_cam(20.0, 32, 24);
        let img = render(&s, &e, &Pose::new(1.0, 1.0, 45.0), 0).unwrap();
        assert!(img.semantic.iter().all(|&v| v == 0));
        assert!(img.depth.iter().all(|&v| v == NO_HIT));
    }

    #[test]
    fn camera_index_checked() {
        let s = wall_scene();
        let e = one_cam(0.0, 8, 8);
        assert!(matches!(render(&s, &e, &Pose::new(2.0, 2.0, 0.0), 1), Err(Error::Index(_))));
    }

    #[test]
    fn rear_camera_matches_turned_agent() {
        let mut b = SceneBuilder::new(0.05, 80, 80, 0);
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, 0..80, 0..2, 0.0, 2.0);
        b.add_cells(w, 0..80, 78..80, 0.0, 2.0);
        let v = b.add_instance("vase");
        b.add_cells(v, 30..40, 10..14, 0.0, 0.5);
        let s = b.build();
        let mut e = one_cam(10.0, 40, 30);
        let mut rear = e.cameras[0];
        rear.yaw = 180.0;
        e.cameras.push(rear);
        let pose = Pose::new(2.0, 2.0, 0.0);
        let back = render(&s, &e, &pose, 1).unwrap();
        let turned = render(&s, &e, &Pose::new(2.0, 2.0, 180.0), 0).unwrap();
        assert_eq!(back.semantic, turned.semantic);
        assert_eq!(back.depth, turned.depth);
        assert!(visible_instances(&back).contains(&2));
    }

    #[test]
    fn visible_set() {
        let mut img = Image::empty(4, 4, 0);
        assert!(visible_instances(&img).is_empty());
        img.semantic[5] = 9;
        img.depth[5] = 100;
        assert_eq!(visible_instances(&img), BTreeSet::from([9]));
    }

    #[test]
    fn pad_square_identity_and_bands() {
        let mut img = Image::empty(6, 6, 0);
        img.semantic[7] = 3;
        img.depth[7] = 10;
        assert_eq!(pad_to_square(&img, 6).unwrap(), img);

        let mut wide = Image::empty(448, 112, 0);
        wide.semantic.iter_mut().for_each(|s| *s = 1);
        wide.depth.iter_mut().for_each(|d| *d = 5);
        let sq = pad_to_square(&wide, 448).unwrap();
        assert_eq!((sq.width, sq.height), (448, 448));
        assert!(sq.semantic[..168 * 448].iter().all(|&s| s == 0));
        assert!(sq.semantic[168 * 448..280 * 448].iter().all(|&s| s == 1));
        assert!(sq.semantic[280 * 448..].iter().all(|&s| s == 0));
        assert!(pad_to_square(&wide, 300).is_err());
    }

    #[test]
    fn image_bytes_round_trip() {
        let mut img = Image::empty(3, 2, 1);
        img.semantic[1] = 0x0102;
        img.depth[1] = 0x0304;
        let bytes = img.to_bytes();
        assert_eq!(&bytes[4..8], &[0x02, 0x01, 0x04, 0x03]);
        assert_eq!(Image::from_bytes(3, 2, 1, &bytes).unwrap(), img);
    }
}
