//! Top-down trajectory plots.

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use embnav::embodiment::EmbodimentConfig;
use embnav::scene::{Scene, WALL_CATEGORY};
use embnav::sim::Pose;

const PX_PER_M: f64 = 60.0;
const FLOOR: Rgb<u8> = Rgb([250, 250, 250]);
const WALL: Rgb<u8> = Rgb([70, 70, 70]);
const TARGET: Rgb<u8> = Rgb([220, 30, 30]);
const PLAN: Rgb<u8> = Rgb([40, 90, 220]);
const WAYPOINT: Rgb<u8> = Rgb([245, 150, 20]);
const EXECUTED: Rgb<u8> = Rgb([30, 160, 60]);
const START: Rgb<u8> = Rgb([0, 0, 0]);

/// Stable color per category name (FNV-1a of the name).
pub fn category_color(name: &str) -> Rgb<u8> {
    if name == WALL_CATEGORY {
        return WALL;
    }
    let mut h: u32 = 0x811c_9dc5;
    for b in name.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    let c = |shift: u32| 70 + ((h >> shift) & 0x7f) as u8;
    Rgb([c(0), c(8), c(16)])
}

fn blend(a: Rgb<u8>, b: Rgb<u8>, t: f64) -> Rgb<u8> {
    let m = |x: u8, y: u8| (x as f64 * (1.0 - t) + y as f64 * t).round() as u8;
    Rgb([m(a[0], b[0]), m(a[1], b[1]), m(a[2], b[2])])
}

pub struct Overlay<'a> {
    pub targets: &'a [u16],
    /// Planned node positions, in order.
    pub plan: &'a [[f64; 2]],
    pub waypoints: &'a [[f64; 2]],
    pub executed: &'a [Pose],
}

/// Draws the scene as seen by `e`: cells the agent cannot pass are filled
/// with their category color, furniture it can drive under is tinted.
pub fn draw(scene: &Scene, e: &EmbodimentConfig, overlay: &Overlay) -> RgbImage {
    let (ex, ez) = scene.extent();
    let (w, h) = ((ex * PX_PER_M).ceil() as u32, (ez * PX_PER_M).ceil() as u32);
    let mut img = RgbImage::from_pixel(w.max(1), h.max(1), FLOOR);
    let to_px = |x: f64, z: f64| (x * PX_PER_M, h as f64 - z * PX_PER_M);
    let category = |id: u16| scene.instance(id).map_or(WALL_CATEGORY, |i| i.category.as_str());
    for iz in 0..scene.nz {
        for ix in 0..scene.nx {
            let slabs = scene.cell_slabs(ix, iz);
            let Some(top) = slabs.iter().max_by(|a, b| a.y_max.total_cmp(&b.y_max)) else {
                continue;
            };
            let color = category_color(category(top.instance));
            let blocking = slabs.iter().any(|s| s.blocks_below(e.collider.y));
            let fill = if blocking { color } else { blend(FLOOR, color, 0.3) };
            let r = scene.cell_rect(ix, iz);
            let (x0, y1) = to_px(r.min_x, r.min_z);
            let (x1, y0) = to_px(r.max_x, r.max_z);
            let (px0, py0) = (x0.floor() as u32, y0.floor().max(0.0) as u32);
            let (px1, py1) = ((x1.ceil() as u32).min(w), (y1.ceil() as u32).min(h));
            for py in py0..py1 {
                for px in px0..px1 {
                    img.put_pixel(px, py, fill);
                }
            }
        }
    }
    for &id in overlay.targets {
        if let Some(inst) = scene.instance(id) {
            let f = inst.footprint.inflate(0.05);
            let (x0, y0) = to_px(f.min_x, f.max_z);
            let (x1, y1) = to_px(f.max_x, f.min_z);
            let rect = Rect::at(x0 as i32, y0 as i32).of_size(((x1 - x0) as u32).max(1), ((y1 - y0) as u32).max(1));
            draw_hollow_rect_mut(&mut img, rect, TARGET);
        }
    }
    let polyline = |img: &mut RgbImage, pts: &[(f64, f64)], color| {
        for pair in pts.windows(2) {
            let (a, b) = (to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1));
            draw_line_segment_mut(img, (a.0 as f32, a.1 as f32), (b.0 as f32, b.1 as f32), color);
        }
    };
    let plan: Vec<(f64, f64)> = overlay.plan.iter().map(|p| (p[0], p[1])).collect();
    polyline(&mut img, &plan, PLAN);
    for p in overlay.waypoints {
        let (x, y) = to_px(p[0], p[1]);
        draw_filled_circle_mut(&mut img, (x as i32, y as i32), 4, WAYPOINT);
    }
    let executed: Vec<(f64, f64)> = overlay.executed.iter().map(|p| (p.x, p.z)).collect();
    polyline(&mut img, &executed, EXECUTED);
    if let Some(first) = overlay.executed.first() {
        let (x, y) = to_px(first.x, first.z);
        draw_filled_circle_mut(&mut img, (x as i32, y as i32), 5, START);
    }
    if let Some(last) = overlay.executed.last() {
        let (x, y) = to_px(last.x, last.z);
        draw_filled_circle_mut(&mut img, (x as i32, y as i32), 5, EXECUTED);
        let (fx, fz) = last.forward();
        let (tx, ty) = to_px(last.x + 0.3 * fx, last.z + 0.3 * fz);
        draw_line_segment_mut(&mut img, (x as f32, y as f32), (tx as f32, ty as f32), START);
    }
    img
}
