//! Reachable-node grid and the clipped obstacle-distance cost field.

use crate::embodiment::EmbodimentConfig;
use crate::scene::Scene;

/// Blocked-cell mask with an exact point-to-nearest-obstacle query.
#[derive(Debug, Clone)]
pub struct ObstacleMap {
    blocked: Vec<bool>,
    nx: usize,
    nz: usize,
    cell: f64,
}

impl ObstacleMap {
    pub fn new(scene: &Scene, height: f64) -> Self {
        Self::from_mask(scene.blocked_mask(height), scene.nx, scene.nz, scene.cell_size)
    }

    pub fn from_mask(blocked: Vec<bool>, nx: usize, nz: usize, cell: f64) -> Self {
        assert_eq!(blocked.len(), nx * nz, "mask size");
        Self { blocked, nx, nz, cell }
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.cell, self.nz as f64 * self.cell)
    }

    fn square_distance(&self, ix: usize, iz: usize, x: f64, z: f64) -> f64 {
        let s = self.cell;
        let (x0, z0) = (ix as f64 * s, iz as f64 * s);
        let dx = (x0 - x).max(x - (x0 + s)).max(0.0);
        let dz = (z0 - z).max(z - (z0 + s)).max(0.0);
        dx.hypot(dz)
    }

    /// Exhaustive nearest-obstacle distance (reference implementation).
    pub fn distance_brute(&self, x: f64, z: f64) -> f64 {
        let mut best = f64::INFINITY;
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                if self.blocked[iz * self.nx + ix] {
                    best = best.min(self.square_distance(ix, iz, x, z));
                }
            }
        }
        best
    }
}

/// Cell offsets sorted by a lower bound on the distance from any point of
/// the center cell to the offset cell.
struct RingOffsets {
    offsets: Vec<(f64, isize, isize)>,
}

impl RingOffsets {
    fn new(cap: f64, cell: f64) -> Self {
        let k = (cap / cell).ceil() as isize + 1;
        let mut offsets = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
        for dz in -k..=k {
            for dx in -k..=k {
                let gx = (dx.abs() - 1).max(0) as f64 * cell;
                let gz = (dz.abs() - 1).max(0) as f64 * cell;
                let lb = gx.hypot(gz);
                if lb < cap {
                    offsets.push((lb, dx, dz));
                }
            }
        }
        offsets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        Self { offsets }
    }

    /// Exact distance to the nearest blocked cell, or `cap` if none is closer.
    fn query(&self, map: &ObstacleMap, x: f64, z: f64, cap: f64) -> f64 {
        let cx = ((x / map.cell).floor() as isize).clamp(0, map.nx as isize - 1);
        let cz = ((z / map.cell).floor() as isize).clamp(0, map.nz as isize - 1);
        let mut best = cap;
        for &(lb, dx, dz) in &self.offsets {
            if lb >= best {
                break;
            }
            let (ix, iz) = (cx + dx, cz + dz);
            if ix < 0 || iz < 0 || ix >= map.nx as isize || iz >= map.nz as isize {
                continue;
            }
            let (ix, iz) = (ix as usize, iz as usize);
            if map.blocked[iz * map.nx + ix] {
                best = best.min(map.square_distance(ix, iz, x, z));
            }
        }
        best
    }
}

/// Nodes on a regular grid; a node is reachable when a disc of `radius`
/// around it stays inside the world and clear of every obstacle cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachGrid {
    pub spacing: f64,
    /// World position of node (0, 0).
    pub origin: (f64, f64),
    pub nx: usize,
    pub nz: usize,
    pub radius: f64,
    pub reachable: Vec<bool>,
    /// Distance to the nearest obstacle, exact below `clearance_cap`.
    pub clearance: Vec<f64>,
    pub clearance_cap: f64,
}

impl ReachGrid {
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % self.nx, node / self.nx);
        (
            self.origin.0 + i as f64 * self.spacing,
            self.origin.1 + j as f64 * self.spacing,
        )
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable.iter().filter(|&&r| r).count()
    }
}

/// Reachability grid for `e`, using the pivot-centered disc that covers the
/// collider at every heading.
pub fn reachable_grid(scene: &Scene, e: &EmbodimentConfig, spacing: f64) -> ReachGrid {
    reachable_grid_with(scene, e, spacing, 0.0, 1.0)
}

/// Like [`reachable_grid`] with an extra clearance `margin` on the disc; clearances
/// are kept exact up to at least `distance_cap`.
pub fn reachable_grid_with(
    scene: &Scene,
    e: &EmbodimentConfig,
    spacing: f64,
    margin: f64,
    distance_cap: f64,
) -> ReachGrid {
    assert!(spacing > 0.0, "spacing must be positive");
    let map = ObstacleMap::new(scene, e.collider.y);
    grid_from_map(&map, spacing, e.sweep_radius() + margin, distance_cap)
}

pub fn grid_from_map(map: &ObstacleMap, spacing: f64, radius: f64, distance_cap: f64) -> ReachGrid {
    let (w, d) = map.extent();
    let origin = (spacing / 2.0, spacing / 2.0);
    let count = |extent: f64| {
        if extent < origin.0 {
            0
        } else {
            ((extent - origin.0) / spacing).floor() as usize + 1
        }
    };
    let (nx, nz) = (count(w), count(d));
    // Slightly above the largest distance anyone asks about, so values below it are exact.
    let cap = radius.max(distance_cap) + map.cell;
    let rings = RingOffsets::new(cap, map.cell);
    let mut reachable = vec![false; nx * nz];
    let mut clearance = vec![0.0; nx * nz];
    for j in 0..nz {
        for i in 0..nx {
            let (x, z) = (origin.0 + i as f64 * spacing, origin.1 + j as f64 * spacing);
            let c = rings.query(map, x, z, cap);
            let n = j * nx + i;
            clearance[n] = c;
            let inside = x - radius >= 0.0 && z - radius >= 0.0 && x + radius <= w && z + radius <= d;
            reachable[n] = inside && c >= radius;
        }
    }
    ReachGrid {
        spacing,
        origin,
        nx,
        nz,
        radius,
        reachable,
        clearance,
        clearance_cap: cap,
    }
}

/// Per-node clipped obstacle distance and its inverse-cube cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub distance: Vec<f64>,
    pub cost: Vec<f64>,
    pub clip: (f64, f64),
}

/// `cost = clip(distance, lo, hi)^-3`.
pub fn distance_field(grid: &ReachGrid, clip: (f64, f64)) -> CostField {
    let (lo, hi) = clip;
    assert!(0.0 < lo && lo <= hi, "invalid distance clip");
    assert!(hi <= grid.clearance_cap, "clearance not exact up to the clip bound");
    let distance: Vec<f64> = grid.clearance.iter().map(|&c| c.clamp(lo, hi)).collect();
    let cost = distance.iter().map(|&d| d.powi(-3)).collect();
    CostField { distance, cost, clip }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embodiment::preset_embodiment;
    use crate::rng::SeededRng;
    use crate::scene::{Aabb2, SceneBuilder};

    #[test]
    fn empty_scene_reachable_inside_margin() {
        let s = SceneBuilder::new(0.05, 80, 80, 0).build();
        let e = preset_embodiment("locobot").unwrap();
        let g = reachable_grid(&s, &e, 0.1);
        let r = e.sweep_radius();
        for n in 0..g.len() {
            let (x, z) = g.point(n);
            let inside = x >= r && z >= r && x <= 4.0 - r && z <= 4.0 - r;
            assert_eq!(g.reachable[n], inside, "node at ({x}, {z})");
        }
    }

    #[test]
    fn clip_and_cost() {
        let mut b = SceneBuilder::new(0.05, 80, 80, 0);
        let v = b.add_instance("vase");
        b.add_cells(v, 0..80, 0..3, 0.0, 1.0); // wall along z in [0, 0.15]
        let s = b.build();
        let e = preset_embodiment("unitree_go1").unwrap();
        let g = reachable_grid(&s, &e, 0.1);
        let f = distance_field(&g, (0.05, 1.0));
        let node = |x: f64, z: f64| {
            (0..g.len())
                .find(|&n| {
                    let p = g.point(n);
                    (p.0 - x).abs() < 1e-9 && (p.1 - z).abs() < 1e-9
                })
                .unwrap()
        };
        let far = node(2.05, 2.05);
        assert_eq!(f.distance[far], 1.0);
        assert_eq!(f.cost[far], 1.0);
        let half = node(2.05, 0.65);
        assert!((f.distance[half] - 0.5).abs() < 1e-12);
        assert!((f.cost[half] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn ring_search_matches_brute_force() {
        let mut rng = SeededRng::new(5);
        let mask: Vec<bool> = (0..32 * 32).map(|_| rng.bernoulli(0.05)).collect();
        let map = ObstacleMap::from_mask(mask, 32, 32, 0.05);
        let g = grid_from_map(&map, 0.1, 0.1, 1.0);
        for n in 0..g.len() {
            let (x, z) = g.point(n);
            let want = map.distance_brute(x, z).min(g.clearance_cap);
            assert!((g.clearance[n] - want).abs() < 1e-12, "node {n}");
        }
    }

    #[test]
    fn table_clearance_depends_on_height() {
        let mut b = SceneBuilder::new(0.05, 100, 100, 0);
        let t = b.add_instance("table");
        b.add_box(t, Aabb2::new(1.0, 1.0, 4.0, 4.0), 0.6, 0.75);
        let s = b.build();
        let mut low = preset_embodiment("locobot").unwrap();
        low.collider.y = 0.4;
        low.cameras[0].pos_y = 0.4;
        let high = preset_embodiment("stretch_re1").unwrap();
        let gl = reachable_grid(&s, &low, 0.1);
        let gh = reachable_grid(&s, &high, 0.1);
        let center = (0..gl.len())
            .find(|&n| {
                let p = gl.point(n);
                (p.0 - 2.45).abs() < 1e-9 && (p.1 - 2.45).abs() < 1e-9
            })
            .unwrap();
        assert!(gl.reachable[center]);
        assert!(!gh.reachable[center]);
    }
}
