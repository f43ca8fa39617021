//! Procedural room-grid houses.
//!
//! Rooms are laid out on a grid and joined through doorways chosen by a
//! randomized spanning tree (plus optional extra doors), so every room is
//! reachable. Furniture is placed either flush against a wall or free
//! standing with a clear gap around it; doorways keep a furniture-free apron.

use serde::{Deserialize, Serialize};

use super::{Aabb2, Scene, SceneBuilder, WALL_CATEGORY};
use crate::embodiment::Interval;
use crate::error::{Error, Result};
use crate::rng::{split, SeededRng};

/// Tabletop occupancy of the default table template.
pub const TABLE_TOP: (f32, f32) = (0.6, 0.75);
pub const BED_TOP: f32 = 0.45;
pub const RAISED_BED_BOTTOM: f32 = 0.25;

/// Geometry template of a category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// Solid box from the floor (or from `y_min`) up to a sampled height.
    Block {
        size_x: Interval,
        size_z: Interval,
        y_min: f32,
        height: Interval,
    },
    /// Tabletop slab on four single-cell legs.
    Table {
        size_x: Interval,
        size_z: Interval,
        top: (f32, f32),
    },
    /// Low slab; with probability `raised_prob` it floats at `[0.25, top]`
    /// leaving a crawl gap underneath.
    Bed {
        size_x: Interval,
        size_z: Interval,
        top: f32,
        raised_prob: f64,
    },
    /// Small object resting on a table top.
    OnTable { size: f64, height: f32 },
}

impl Template {
    fn footprint_size(&self, rng: &mut SeededRng) -> (f64, f64) {
        match self {
            Template::Block { size_x, size_z, .. }
            | Template::Table { size_x, size_z, .. }
            | Template::Bed { size_x, size_z, .. } => {
                (rng.uniform(size_x.lo, size_x.hi), rng.uniform(size_z.lo, size_z.hi))
            }
            Template::OnTable { size, .. } => (*size, *size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub templates: Vec<Template>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub cell_size: f64,
    pub rooms_x: usize,
    pub rooms_z: usize,
    pub room_size: Interval,
    pub doorway_width: Interval,
    pub wall_thickness: f64,
    pub wall_height: f32,
    /// Probability of a door on a room adjacency outside the spanning tree.
    pub extra_door_prob: f64,
    /// Fraction of interior floor area covered by furniture footprints.
    pub furniture_density: f64,
    /// Minimum gap around free-standing furniture, meters.
    pub furniture_gap: f64,
    /// Depth of the furniture-free apron on each side of a doorway, meters.
    pub doorway_apron: f64,
    pub categories: Vec<CategorySpec>,
    pub target_categories: Vec<String>,
    /// Put on-table objects on the floor instead (for low-camera robots).
    #[serde(default)]
    pub low_targets: bool,
    pub max_attempts: u32,
}

fn block(sx: (f64, f64), sz: (f64, f64), h: (f64, f64)) -> Template {
    Template::Block {
        size_x: Interval::new(sx.0, sx.1),
        size_z: Interval::new(sz.0, sz.1),
        y_min: 0.0,
        height: Interval::new(h.0, h.1),
    }
}

fn category(name: &str, templates: Vec<Template>) -> CategorySpec {
    CategorySpec {
        name: name.to_string(),
        templates,
    }
}

impl Default for SceneParams {
    fn default() -> Self {
        let categories = vec![
            category("apple", vec![Template::OnTable { size: 0.1, height: 0.1 }]),
            category(
                "bed",
                vec![Template::Bed {
                    size_x: Interval::new(1.4, 1.8),
                    size_z: Interval::new(1.9, 2.1),
                    top: BED_TOP,
                    raised_prob: 0.5,
                }],
            ),
            category("chair", vec![block((0.45, 0.5), (0.45, 0.5), (0.85, 0.95))]),
            category("houseplant", vec![block((0.3, 0.45), (0.3, 0.45), (0.8, 1.2))]),
            category("sofa", vec![block((1.6, 2.0), (0.8, 0.9), (0.8, 0.9))]),
            category("television", vec![block((0.9, 1.2), (0.3, 0.4), (1.0, 1.2))]),
            category("vase", vec![block((0.2, 0.3), (0.2, 0.3), (0.4, 0.6))]),
            category("toilet", vec![block((0.4, 0.45), (0.6, 0.7), (0.7, 0.8))]),
            category("trashcan", vec![block((0.3, 0.35), (0.3, 0.35), (0.55, 0.65))]),
            category("mug", vec![Template::OnTable { size: 0.1, height: 0.1 }]),
            category(
                "table",
                vec![Template::Table {
                    size_x: Interval::new(0.9, 1.4),
                    size_z: Interval::new(0.6, 0.9),
                    top: TABLE_TOP,
                }],
            ),
        ];
        let target_categories = [
            "apple",
            "bed",
            "chair",
            "houseplant",
            "sofa",
            "television",
            "vase",
            "toilet",
            "trashcan",
            "mug",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        Self {
            cell_size: 0.05,
            rooms_x: 2,
            rooms_z: 2,
            room_size: Interval::new(3.5, 4.5),
            doorway_width: Interval::new(1.2, 1.6),
            wall_thickness: 0.1,
            wall_height: 2.0,
            extra_door_prob: 0.3,
            furniture_density: 0.08,
            furniture_gap: 1.0,
            doorway_apron: 1.0,
            categories,
            target_categories,
            low_targets: false,
            max_attempts: 8,
        }
    }
}

impl SceneParams {
    pub fn category(&self, name: &str) -> Option<&CategorySpec> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation("scene params", m));
        if !(self.cell_size > 0.0) {
            return bad("cell_size must be positive".into());
        }
        if self.rooms_x == 0 || self.rooms_z == 0 {
            return bad("room grid must be at least 1x1".into());
        }
        if self.room_size.lo <= 0.0 || self.room_size.lo > self.room_size.hi {
            return bad("room_size must be a positive interval".into());
        }
        if self.doorway_width.lo < 2.0 * self.cell_size || self.doorway_width.lo > self.doorway_width.hi {
            return bad("doorway width must be at least two cells".into());
        }
        if self.doorway_width.hi + 0.2 > self.room_size.lo {
            return bad("doorways must fit inside the smallest room side".into());
        }
        if !(0.0..=1.0).contains(&self.furniture_density) {
            return bad("furniture_density must lie in [0, 1]".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        for t in &self.target_categories {
            match self.category(t) {
                Some(c) if !c.templates.is_empty() => {}
                _ => return bad(format!("target category `{t}` has no template")),
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy)]
struct Room {
    x0: usize,
    x1: usize,
    z0: usize,
    z1: usize,
}

struct Layout<'p> {
    params: &'p SceneParams,
    b: SceneBuilder,
    rooms: Vec<Room>,
    keep_out: Vec<Aabb2>,
    furniture: Vec<Aabb2>,
    tables: Vec<(usize, Aabb2)>,
    placed_area: f64,
}

/// Generates a house. Deterministic in `(seed, params)`.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let mut last = String::new();
    for attempt in 0..params.max_attempts {
        let mut rng = SeededRng::new(split(seed, attempt as u64));
        match try_generate(&mut rng, seed, params) {
            Ok(scene) => return Ok(scene),
            Err(reason) => {
                log::debug!("scene {seed} attempt {attempt} rejected: {reason}");
                last = reason;
            }
        }
    }
    Err(Error::Generation {
        attempts: params.max_attempts,
        constraint: last,
    })
}

fn try_generate(rng: &mut SeededRng, seed: u64, p: &SceneParams) -> std::result::Result<Scene, String> {
    let cs = p.cell_size;
    let cells = |m: f64| ((m / cs).round() as usize).max(1);
    let t = cells(p.wall_thickness);
    let widths: Vec<usize> = (0..p.rooms_x).map(|_| cells(rng.uniform(p.room_size.lo, p.room_size.hi))).collect();
    let depths: Vec<usize> = (0..p.rooms_z).map(|_| cells(rng.uniform(p.room_size.lo, p.room_size.hi))).collect();
    let nx = widths.iter().sum::<usize>() + (p.rooms_x + 1) * t;
    let nz = depths.iter().sum::<usize>() + (p.rooms_z + 1) * t;

    // Interior start of each column/row.
    let starts = |sizes: &[usize]| {
        let mut out = Vec::with_capacity(sizes.len());
        let mut at = t;
        for s in sizes {
            out.push(at);
            at += s + t;
        }
        out
    };
    let xs = starts(&widths);
    let zs = starts(&depths);
    let mut rooms = Vec::new();
    for r in 0..p.rooms_z {
        for c in 0..p.rooms_x {
            rooms.push(Room {
                x0: xs[c],
                x1: xs[c] + widths[c],
                z0: zs[r],
                z1: zs[r] + depths[r],
            });
        }
    }

    let mut b = SceneBuilder::new(cs, nx, nz, seed);
    let wh = p.wall_height;
    for (xr, zr) in [(0..t, 0..nz), (nx - t..nx, 0..nz), (t..nx - t, 0..t), (t..nx - t, nz - t..nz)] {
        let w = b.add_instance(WALL_CATEGORY);
        b.add_cells(w, xr, zr, 0.0, wh);
    }

    // Room adjacency: (room a, room b, vertical wall?) in a fixed order, then shuffled.
    let idx = |c: usize, r: usize| r * p.rooms_x + c;
    let mut edges = Vec::new();
    for r in 0..p.rooms_z {
        for c in 0..p.rooms_x {
            if c + 1 < p.rooms_x {
                edges.push((idx(c, r), idx(c + 1, r), true));
            }
            if r + 1 < p.rooms_z {
                edges.push((idx(c, r), idx(c, r + 1), false));
            }
        }
    }
    for i in (1..edges.len()).rev() {
        let j = rng.index(i + 1);
        edges.swap(i, j);
    }
    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut doors: Vec<(usize, usize, bool)> = Vec::new();
    for &(a, bb, vertical) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, bb));
        let extra = rng.bernoulli(p.extra_door_prob);
        if ra != rb {
            parent[ra] = rb;
            doors.push((a, bb, vertical));
        } else if extra {
            doors.push((a, bb, vertical));
        }
    }

    // Interior walls: vertical lines span the full interior height, horizontal
    // lines only the room columns so junction cells are owned once.
    let margin = cells(0.3);
    let mut keep_out = Vec::new();
    let mut gaps_v: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p.rooms_x.saturating_sub(1)];
    let mut gaps_h: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p.rooms_z.saturating_sub(1)];
    doors.sort_unstable();
    for &(a, bb, vertical) in &doors {
        let width = cells(rng.uniform(p.doorway_width.lo, p.doorway_width.hi));
        let ra = rooms[a];
        if vertical {
            let span = ra.z1 - ra.z0;
            let room = span.saturating_sub(width + 2 * margin);
            let z0 = ra.z0 + margin + rng.index(room + 1);
            let c = a % p.rooms_x;
            gaps_v[c].push((z0, z0 + width));
            let wx0 = ra.x1 as f64 * cs;
            keep_out.push(Aabb2::new(
                wx0 - p.doorway_apron,
                z0 as f64 * cs - 0.3,
                wx0 + t as f64 * cs + p.doorway_apron,
                (z0 + width) as f64 * cs + 0.3,
            ));
        } else {
            let span = ra.x1 - ra.x0;
            let room = span.saturating_sub(width + 2 * margin);
            let x0 = ra.x0 + margin + rng.index(room + 1);
            let r = a / p.rooms_x;
            gaps_h[r].push((x0, x0 + width));
            let wz0 = ra.z1 as f64 * cs;
            keep_out.push(Aabb2::new(
                x0 as f64 * cs - 0.3,
                wz0 - p.doorway_apron,
                (x0 + width) as f64 * cs + 0.3,
                wz0 + t as f64 * cs + p.doorway_apron,
            ));
        }
        let _ = bb;
    }
    for c in 0..p.rooms_x.saturating_sub(1) {
        let w = b.add_instance(WALL_CATEGORY);
        let x = xs[c] + widths[c];
        for iz in t..nz - t {
            if !gaps_v[c].iter().any(|&(g0, g1)| iz >= g0 && iz < g1) {
                b.add_cells(w, x..x + t, iz..iz + 1, 0.0, wh);
            }
        }
    }
    for r in 0..p.rooms_z.saturating_sub(1) {
        let w = b.add_instance(WALL_CATEGORY);
        let z = zs[r] + depths[r];
        for c in 0..p.rooms_x {
            for ix in xs[c]..xs[c] + widths[c] {
                if !gaps_h[r].iter().any(|&(g0, g1)| ix >= g0 && ix < g1) {
                    b.add_cells(w, ix..ix + 1, z..z + t, 0.0, wh);
                }
            }
        }
    }

    let mut layout = Layout {
        params: p,
        b,
        rooms,
        keep_out,
        furniture: Vec::new(),
        tables: Vec::new(),
        placed_area: 0.0,
    };

    for target in &p.target_categories {
        if !layout.place_category(rng, target, None) {
            return Err(format!("could not place target category `{target}`"));
        }
    }

    let interior: f64 = layout
        .rooms
        .iter()
        .map(|r| ((r.x1 - r.x0) * (r.z1 - r.z0)) as f64 * cs * cs)
        .sum();
    let wanted = p.furniture_density * interior;
    let fillers: Vec<&CategorySpec> = p
        .categories
        .iter()
        .filter(|c| !c.templates.is_empty() && !c.templates.iter().any(|t| matches!(t, Template::OnTable { .. })))
        .collect();
    let mut tries = 0;
    while layout.placed_area < wanted {
        if fillers.is_empty() || tries >= 60 * layout.rooms.len() {
            return Err(format!(
                "furniture density {} unsatisfiable (covered {:.2} of {:.2} m²)",
                p.furniture_density, layout.placed_area, wanted
            ));
        }
        tries += 1;
        let cat = fillers[rng.index(fillers.len())];
        let room = rng.index(layout.rooms.len());
        layout.place_category(rng, &cat.name, Some(room));
    }

    let Layout { b, rooms, .. } = layout;
    let scene = b.build();
    check_connectivity(&scene, &rooms)?;
    Ok(scene)
}

impl Layout<'_> {
    /// Places one instance of `name`; `room` pins the room, otherwise rooms are tried in random order.
    fn place_category(&mut self, rng: &mut SeededRng, name: &str, room: Option<usize>) -> bool {
        let Some(spec) = self.params.category(name) else {
            return false;
        };
        let template = spec.templates[rng.index(spec.templates.len())].clone();
        let order: Vec<usize> = match room {
            Some(r) => vec![r],
            None => {
                let mut o: Vec<usize> = (0..self.rooms.len()).collect();
                for i in (1..o.len()).rev() {
                    let j = rng.index(i + 1);
                    o.swap(i, j);
                }
                o
            }
        };
        if let Template::OnTable { size, height } = template {
            if self.params.low_targets {
                let floor = Template::Block {
                    size_x: Interval::new(size, size),
                    size_z: Interval::new(size, size),
                    y_min: 0.0,
                    height: Interval::new(height as f64, height as f64),
                };
                return order.iter().any(|&r| self.place_in_room(rng, name, &floor, r));
            }
            return self.place_on_table(rng, name, size, height, &order);
        }
        order.iter().any(|&r| self.place_in_room(rng, name, &template, r))
    }

    fn place_on_table(&mut self, rng: &mut SeededRng, name: &str, size: f64, height: f32, order: &[usize]) -> bool {
        let table = self
            .params
            .categories
            .iter()
            .flat_map(|c| c.templates.iter())
            .find(|t| matches!(t, Template::Table { .. }))
            .cloned();
        let mut host = None;
        if let Some(table) = table {
            for &r in order {
                if self.place_in_room(rng, "table", &table, r) {
                    host = self.tables.last().copied();
                    break;
                }
            }
        }
        if host.is_none() && !self.tables.is_empty() {
            host = Some(self.tables[rng.index(self.tables.len())]);
        }
        let Some((_, top)) = host else {
            return false;
        };
        let top_y = match self
            .params
            .categories
            .iter()
            .flat_map(|c| c.templates.iter())
            .find_map(|t| match t {
                Template::Table { top, .. } => Some(top.1),
                _ => None,
            }) {
            Some(y) => y,
            None => TABLE_TOP.1,
        };
        // Keep the object off the leg cells and inside the top.
        let inset = 0.1 + size / 2.0;
        let cx = rng.uniform(top.min_x + inset, (top.max_x - inset).max(top.min_x + inset));
        let cz = rng.uniform(top.min_z + inset, (top.max_z - inset).max(top.min_z + inset));
        let rect = Aabb2::new(cx - size / 2.0, cz - size / 2.0, cx + size / 2.0, cz + size / 2.0);
        let id = self.b.add_instance(name);
        self.b.add_box(id, rect, top_y, top_y + height);
        true
    }

    fn place_in_room(&mut self, rng: &mut SeededRng, name: &str, template: &Template, r: usize) -> bool {
        let room = self.rooms[r];
        let cs = self.params.cell_size;
        let (rx0, rx1) = (room.x0 as f64 * cs, room.x1 as f64 * cs);
        let (rz0, rz1) = (room.z0 as f64 * cs, room.z1 as f64 * cs);
        let gap = self.params.furniture_gap;
        for _ in 0..50 {
            let (mut sx, mut sz) = template.footprint_size(rng);
            if rng.bernoulli(0.5) {
                std::mem::swap(&mut sx, &mut sz);
            }
            let against_wall = rng.bernoulli(0.6);
            let side = rng.index(4);
            let (ux, uz) = (rng.unit(), rng.unit());
            if sx + 2.0 * gap > rx1 - rx0 && sz + 2.0 * gap > rz1 - rz0 && !against_wall {
                continue;
            }
            let (x0, z0) = if against_wall {
                let along_x = rx0 + ux * (rx1 - rx0 - sx).max(0.0);
                let along_z = rz0 + uz * (rz1 - rz0 - sz).max(0.0);
                match side {
                    0 => (rx0, along_z),
                    1 => (rx1 - sx, along_z),
                    2 => (along_x, rz0),
                    _ => (along_x, rz1 - sz),
                }
            } else {
                (
                    rx0 + gap + ux * (rx1 - rx0 - sx - 2.0 * gap).max(0.0),
                    rz0 + gap + uz * (rz1 - rz0 - sz - 2.0 * gap).max(0.0),
                )
            };
            // Snap to the cell grid so footprints are exact.
            let snap = |v: f64| (v / cs).round() * cs;
            let rect = Aabb2::new(snap(x0), snap(z0), snap(x0 + sx), snap(z0 + sz));
            if rect.max_x - rect.min_x < cs || rect.max_z - rect.min_z < cs {
                continue;
            }
            if rect.min_x < rx0 - 1e-9 || rect.max_x > rx1 + 1e-9 || rect.min_z < rz0 - 1e-9 || rect.max_z > rz1 + 1e-9 {
                continue;
            }
            if self.keep_out.iter().any(|k| k.overlaps(&rect)) {
                continue;
            }
            if self.furniture.iter().any(|f| f.inflate(gap).overlaps(&rect)) {
                continue;
            }
            self.emit(rng, name, template, rect, r);
            return true;
        }
        false
    }

    fn emit(&mut self, rng: &mut SeededRng, name: &str, template: &Template, rect: Aabb2, room: usize) {
        let id = self.b.add_instance(name);
        match *template {
            Template::Block { y_min, height, .. } => {
                let h = rng.uniform(height.lo, height.hi) as f32;
                self.b.add_box(id, rect, y_min, y_min + h.max(0.01));
            }
            Template::Table { top, .. } => {
                self.b.add_box(id, rect, top.0, top.1);
                let ((x0, x1), (z0, z1)) = self.b.cell_span(rect);
                for (lx, lz) in [(x0, z0), (x1 - 1, z0), (x0, z1 - 1), (x1 - 1, z1 - 1)] {
                    self.b.add_cells(id, lx..lx + 1, lz..lz + 1, 0.0, top.0);
                }
                self.tables.push((room, rect));
            }
            Template::Bed { top, raised_prob, .. } => {
                let bottom = if rng.bernoulli(raised_prob) { RAISED_BED_BOTTOM } else { 0.0 };
                self.b.add_box(id, rect, bottom, top);
            }
            Template::OnTable { height, .. } => {
                self.b.add_box(id, rect, 0.0, height);
            }
        }
        self.furniture.push(rect);
        self.placed_area += rect.area();
    }
}

/// Cells where a disc of `radius` centered on the cell center, spanning
/// heights `(0, height)`, touches no slab.
pub(crate) fn disc_free_cells(scene: &Scene, height: f64, radius: f64) -> Vec<bool> {
    let blocked = scene.blocked_mask(height);
    let cs = scene.cell_size;
    let reach = (radius / cs).ceil() as isize + 1;
    let (nx, nz) = (scene.nx as isize, scene.nz as isize);
    let mut free = vec![false; blocked.len()];
    for iz in 0..nz {
        for ix in 0..nx {
            let (cx, cz) = ((ix as f64 + 0.5) * cs, (iz as f64 + 0.5) * cs);
            let mut ok = cx - radius >= 0.0 && cz - radius >= 0.0 && cx + radius <= nx as f64 * cs && cz + radius <= nz as f64 * cs;
            'scan: for dz in -reach..=reach {
                for dx in -reach..=reach {
                    if !ok {
                        break 'scan;
                    }
                    let (jx, jz) = (ix + dx, iz + dz);
                    if jx < 0 || jz < 0 || jx >= nx || jz >= nz {
                        continue;
                    }
                    if blocked[(jz * nx + jx) as usize] && scene.cell_rect(jx as usize, jz as usize).distance_to(cx, cz) < radius {
                        ok = false;
                    }
                }
            }
            free[(iz * nx + ix) as usize] = ok;
        }
    }
    free
}

fn check_connectivity(scene: &Scene, rooms: &[Room]) -> std::result::Result<(), String> {
    let free = disc_free_cells(scene, 0.2, 0.2);
    let (nx, nz) = (scene.nx, scene.nz);
    let first = rooms
        .iter()
        .find_map(|r| (r.z0..r.z1).flat_map(|z| (r.x0..r.x1).map(move |x| z * nx + x)).find(|&i| free[i]));
    let Some(start) = first else {
        return Err("no free space for a 0.2 m disc".into());
    };
    let mut seen = vec![false; free.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        let (x, z) = (i % nx, i / nx);
        let mut push = |j: usize| {
            if free[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < nx {
            push(i + 1);
        }
        if z > 0 {
            push(i - nx);
        }
        if z + 1 < nz {
            push(i + nx);
        }
    }
    for (k, r) in rooms.iter().enumerate() {
        let reached = (r.z0..r.z1).any(|z| (r.x0..r.x1).any(|x| seen[z * nx + x]));
        if !reached {
            return Err(format!("room {k} is not connected"));
        }
    }
    let _ = nz;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        SceneParams::default().validate().unwrap();
    }

    #[test]
    fn zero_furniture_is_walls_only() {
        let p = SceneParams {
            furniture_density: 0.0,
            target_categories: vec![],
            ..Default::default()
        };
        let s = generate_scene(3, &p).unwrap();
        assert!(s.instances.iter().all(|i| i.category == WALL_CATEGORY));
        assert!(s.all_slabs().all(|(_, sl)| s.instance(sl.instance).unwrap().category == WALL_CATEGORY));
    }

    #[test]
    fn deterministic() {
        let p = SceneParams::default();
        let a = generate_scene(7, &p).unwrap();
        let b = generate_scene(7, &p).unwrap();
        assert_eq!(a, b);
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        super::super::write_scene(&a, &mut ba).unwrap();
        super::super::write_scene(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn every_target_present() {
        let p = SceneParams::default();
        for seed in 0..10 {
            let s = generate_scene(seed, &p).unwrap();
            for t in &p.target_categories {
                assert!(s.has_category(t), "seed {seed} missing {t}");
            }
        }
    }

    #[test]
    fn impossible_density_fails() {
        let p = SceneParams {
            furniture_density: 1.0,
            max_attempts: 2,
            ..Default::default()
        };
        match generate_scene(1, &p) {
            Err(Error::Generation { attempts, constraint }) => {
                assert_eq!(attempts, 2);
                assert!(constraint.contains("density"), "{constraint}");
            }
            other => panic!("expected generation error, got {other:?}"),
        }
    }

    #[test]
    fn narrow_doorway_rejected() {
        let p = SceneParams {
            doorway_width: Interval::new(0.05, 0.5),
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
