//! 2.5D heightfield scenes.
//!
//! A scene is a grid of square cells; each cell holds the vertical intervals
//! ("slabs") that are occupied above it, tagged with the instance that owns
//! them. Tables and raised beds leave gaps under their tops, so what is an
//! obstacle depends on the height of the agent.

mod gen;
mod io;

pub use gen::{generate_scene, CategorySpec, SceneParams, Template};
pub use io::{load_scene, read_scene, save_scene, write_scene};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WALL_CATEGORY: &str = "wall";

/// Occupied vertical interval `[y_min, y_max]` of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub y_min: f32,
    pub y_max: f32,
    pub instance: u16,
}

impl Slab {
    /// True when the slab meets the open height band `(0, height)`.
    #[inline]
    pub fn blocks_below(&self, height: f64) -> bool {
        (self.y_min as f64) < height && self.y_max > 0.0
    }
}

/// Axis-aligned rectangle on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb2 {
    pub min_x: f64,
    pub min_z: f64,
    pub max_x: f64,
    pub max_z: f64,
}

impl Aabb2 {
    pub fn new(min_x: f64, min_z: f64, max_x: f64, max_z: f64) -> Self {
        Self {
            min_x,
            min_z,
            max_x,
            max_z,
        }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.min_x && x <= self.max_x && z >= self.min_z && z <= self.max_z
    }

    /// Euclidean distance from a point to the nearest point of the rectangle.
    pub fn distance_to(&self, x: f64, z: f64) -> f64 {
        let dx = (self.min_x - x).max(0.0).max(x - self.max_x);
        let dz = (self.min_z - z).max(0.0).max(z - self.max_z);
        (dx * dx + dz * dz).sqrt()
    }

    pub fn overlaps(&self, o: &Aabb2) -> bool {
        self.min_x < o.max_x && o.min_x < self.max_x && self.min_z < o.max_z && o.min_z < self.max_z
    }

    pub fn inflate(&self, m: f64) -> Aabb2 {
        Aabb2::new(self.min_x - m, self.min_z - m, self.max_x + m, self.max_z + m)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_z + self.max_z) / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_z - self.min_z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// 1-based; 0 is reserved for "nothing".
    pub id: u16,
    pub category: String,
    pub footprint: Aabb2,
    /// Footprint centroid at the vertical midpoint of the instance's slabs, `[x, y, z]`.
    pub point: [f64; 3],
}

/// Immutable heightfield scene. Cell `(ix, iz)` covers
/// `[ix·cell_size, (ix+1)·cell_size] × [iz·cell_size, (iz+1)·cell_size]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cell_size: f64,
    pub nx: usize,
    pub nz: usize,
    pub seed: u64,
    pub instances: Vec<Instance>,
    offsets: Vec<u32>,
    slabs: Vec<Slab>,
    column_top: Vec<f32>,
}

impl Scene {
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.cell_size, self.nz as f64 * self.cell_size)
    }

    pub fn bounds(&self) -> Aabb2 {
        let (w, d) = self.extent();
        Aabb2::new(0.0, 0.0, w, d)
    }

    #[inline]
    pub fn cell_index(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    /// Slabs of a cell, sorted by `y_min`. Callers guarantee bounds.
    #[inline]
    pub fn cell_slabs(&self, ix: usize, iz: usize) -> &[Slab] {
        let i = self.cell_index(ix, iz);
        &self.slabs[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    #[inline]
    pub(crate) fn slabs_at(&self, index: usize) -> &[Slab] {
        &self.slabs[self.offsets[index] as usize..self.offsets[index + 1] as usize]
    }

    /// Highest occupied point over the cell (0 when empty).
    #[inline]
    pub fn column_top(&self, index: usize) -> f32 {
        self.column_top[index]
    }

    pub fn occupied_intervals(&self, ix: usize, iz: usize) -> Result<&[Slab]> {
        if ix >= self.nx || iz >= self.nz {
            return Err(Error::Index(format!(
                "cell ({ix}, {iz}) outside {}x{} grid",
                self.nx, self.nz
            )));
        }
        Ok(self.cell_slabs(ix, iz))
    }

    pub fn all_slabs(&self) -> impl Iterator<Item = (usize, &Slab)> + '_ {
        (0..self.nx * self.nz).flat_map(move |i| self.slabs_at(i).iter().map(move |s| (i, s)))
    }

    pub fn max_height(&self) -> f32 {
        self.column_top.iter().copied().fold(0.0, f32::max)
    }

    pub fn instance(&self, id: u16) -> Option<&Instance> {
        if id == 0 {
            return None;
        }
        self.instances.get(id as usize - 1)
    }

    pub fn instances_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances.iter().filter(move |i| i.category == category)
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.instances_of(category).next().is_some()
    }

    /// Per-cell flag: some slab meets the height band `(0, height)`.
    pub fn blocked_mask(&self, height: f64) -> Vec<bool> {
        (0..self.nx * self.nz)
            .map(|i| self.slabs_at(i).iter().any(|s| s.blocks_below(height)))
            .collect()
    }

    /// Total occupied volume, m³.
    pub fn slab_volume(&self) -> f64 {
        let a = self.cell_size * self.cell_size;
        self.slabs.iter().map(|s| (s.y_max - s.y_min) as f64 * a).sum()
    }

    pub fn world_to_cell(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        if x < 0.0 || z < 0.0 {
            return None;
        }
        let ix = (x / self.cell_size) as usize;
        let iz = (z / self.cell_size) as usize;
        (ix < self.nx && iz < self.nz).then_some((ix, iz))
    }

    pub fn cell_rect(&self, ix: usize, iz: usize) -> Aabb2 {
        let s = self.cell_size;
        Aabb2::new(ix as f64 * s, iz as f64 * s, (ix + 1) as f64 * s, (iz + 1) as f64 * s)
    }

    /// Copy of the scene with every slab of `instance` removed.
    pub fn without_instance(&self, instance: u16) -> Scene {
        let mut b = SceneBuilder::from_scene(self);
        for cell in &mut b.cells {
            cell.retain(|s| s.instance != instance);
        }
        b.finish_keep_instances()
    }

    fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::validation("scene", "cell_size must be positive"));
        }
        for (k, inst) in self.instances.iter().enumerate() {
            if inst.id as usize != k + 1 {
                return Err(Error::validation(
                    "scene",
                    format!("instance ids must be 1..=n in order; found {} at {k}", inst.id),
                ));
            }
            if !inst.footprint.contains(inst.point[0], inst.point[2]) {
                return Err(Error::validation(
                    "scene",
                    format!("instance {} point outside its footprint", inst.id),
                ));
            }
        }
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                for s in self.cell_slabs(ix, iz) {
                    if !(s.y_min >= 0.0 && s.y_min < s.y_max) {
                        return Err(Error::validation(
                            format!("slab in cell ({ix}, {iz})"),
                            format!("requires 0 <= y_min < y_max, got [{}, {}]", s.y_min, s.y_max),
                        ));
                    }
                    if s.instance == 0 || s.instance as usize > self.instances.len() {
                        return Err(Error::validation(
                            format!("slab in cell ({ix}, {iz})"),
                            format!("unknown instance {}", s.instance),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Mutable accumulator for scene geometry.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    pub cell_size: f64,
    pub nx: usize,
    pub nz: usize,
    pub seed: u64,
    cells: Vec<Vec<Slab>>,
    categories: Vec<String>,
    fixed_instances: Option<Vec<Instance>>,
}

impl SceneBuilder {
    pub fn new(cell_size: f64, nx: usize, nz: usize, seed: u64) -> Self {
        Self {
            cell_size,
            nx,
            nz,
            seed,
            cells: vec![Vec::new(); nx * nz],
            categories: Vec::new(),
            fixed_instances: None,
        }
    }

    fn from_scene(scene: &Scene) -> Self {
        let cells = (0..scene.nx * scene.nz).map(|i| scene.slabs_at(i).to_vec()).collect();
        Self {
            cell_size: scene.cell_size,
            nx: scene.nx,
            nz: scene.nz,
            seed: scene.seed,
            cells,
            categories: scene.instances.iter().map(|i| i.category.clone()).collect(),
            fixed_instances: Some(scene.instances.clone()),
        }
    }

    pub fn add_instance(&mut self, category: &str) -> u16 {
        self.categories.push(category.to_string());
        assert!(self.categories.len() < u16::MAX as usize, "too many instances");
        self.categories.len() as u16
    }

    /// Cell range whose centers fall inside `[lo, hi)` along one axis (at least one cell).
    fn span(&self, lo: f64, hi: f64, n: usize) -> (usize, usize) {
        let s = self.cell_size;
        let a = ((lo / s) - 0.5).ceil().max(0.0) as usize;
        let b = (((hi / s) - 0.5).ceil().max(0.0) as usize).min(n);
        if b <= a {
            let c = (((lo + hi) / 2.0) / s).floor().clamp(0.0, (n - 1) as f64) as usize;
            (c, c + 1)
        } else {
            (a, b)
        }
    }

    /// Occupies `[y_min, y_max]` over every cell whose center lies inside `rect`.
    pub fn add_box(&mut self, instance: u16, rect: Aabb2, y_min: f32, y_max: f32) {
        let (x0, x1) = self.span(rect.min_x, rect.max_x, self.nx);
        let (z0, z1) = self.span(rect.min_z, rect.max_z, self.nz);
        self.add_cells(instance, x0..x1, z0..z1, y_min, y_max);
    }

    pub fn add_cells(
        &mut self,
        instance: u16,
        xs: std::ops::Range<usize>,
        zs: std::ops::Range<usize>,
        y_min: f32,
        y_max: f32,
    ) {
        for iz in zs {
            for ix in xs.clone() {
                let i = iz * self.nx + ix;
                self.cells[i].push(Slab {
                    y_min,
                    y_max,
                    instance,
                });
            }
        }
    }

    pub fn cell_slabs(&self, ix: usize, iz: usize) -> &[Slab] {
        &self.cells[iz * self.nx + ix]
    }

    pub fn cell_span(&self, rect: Aabb2) -> ((usize, usize), (usize, usize)) {
        (self.span(rect.min_x, rect.max_x, self.nx), self.span(rect.min_z, rect.max_z, self.nz))
    }

    fn pack(&mut self) -> (Vec<u32>, Vec<Slab>, Vec<f32>) {
        let mut offsets = Vec::with_capacity(self.cells.len() + 1);
        let mut slabs = Vec::new();
        let mut tops = Vec::with_capacity(self.cells.len());
        offsets.push(0u32);
        for cell in &mut self.cells {
            cell.sort_by(|a, b| {
                a.y_min
                    .total_cmp(&b.y_min)
                    .then(a.y_max.total_cmp(&b.y_max))
                    .then(a.instance.cmp(&b.instance))
            });
            tops.push(cell.iter().map(|s| s.y_max).fold(0.0, f32::max));
            slabs.extend_from_slice(cell);
            offsets.push(slabs.len() as u32);
        }
        (offsets, slabs, tops)
    }

    fn finish_keep_instances(mut self) -> Scene {
        let instances = self.fixed_instances.take().unwrap_or_default();
        let (offsets, slabs, column_top) = self.pack();
        Scene {
            cell_size: self.cell_size,
            nx: self.nx,
            nz: self.nz,
            seed: self.seed,
            instances,
            offsets,
            slabs,
            column_top,
        }
    }

    /// Freezes the geometry. Footprints are the union of each instance's
    /// cells; instances without cells are dropped and ids compacted.
    pub fn build(mut self) -> Scene {
        let n = self.categories.len();
        let mut fp: Vec<Option<Aabb2>> = vec![None; n];
        let mut yr: Vec<(f32, f32)> = vec![(f32::MAX, f32::MIN); n];
        let s = self.cell_size;
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                for slab in &self.cells[iz * self.nx + ix] {
                    let k = slab.instance as usize - 1;
                    let r = Aabb2::new(ix as f64 * s, iz as f64 * s, (ix + 1) as f64 * s, (iz + 1) as f64 * s);
                    fp[k] = Some(match fp[k] {
                        None => r,
                        Some(a) => Aabb2::new(
                            a.min_x.min(r.min_x),
                            a.min_z.min(r.min_z),
                            a.max_x.max(r.max_x),
                            a.max_z.max(r.max_z),
                        ),
                    });
                    yr[k].0 = yr[k].0.min(slab.y_min);
                    yr[k].1 = yr[k].1.max(slab.y_max);
                }
            }
        }
        let mut remap = vec![0u16; n + 1];
        let mut instances = Vec::new();
        for k in 0..n {
            if let Some(f) = fp[k] {
                let id = instances.len() as u16 + 1;
                remap[k + 1] = id;
                let (cx, cz) = f.center();
                let cy = (yr[k].0 as f64 + yr[k].1 as f64) / 2.0;
                instances.push(Instance {
                    id,
                    category: self.categories[k].clone(),
                    footprint: f,
                    point: [cx, cy, cz],
                });
            }
        }
        for cell in &mut self.cells {
            for slab in cell.iter_mut() {
                slab.instance = remap[slab.instance as usize];
            }
        }
        self.fixed_instances = Some(instances);
        self.finish_keep_instances()
    }
}
