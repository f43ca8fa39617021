//! 8-connected planning graph, A*, and straight-segment costing for waypoint skipping.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::grid::{CostField, ReachGrid};
use crate::error::{Error, Result};

/// Grid graph over reachable nodes. Edges join 8-neighbors; a diagonal edge
/// also needs both orthogonal neighbors reachable, so paths never cut corners.
/// Edge weight is `length × max(cost(u), cost(v))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanGraph {
    pub nx: usize,
    pub nz: usize,
    pub spacing: f64,
    pub origin: (f64, f64),
    reachable: Vec<bool>,
    cost: Vec<f64>,
    /// Lower bound on cost per unit length, used to scale the heuristic.
    pub heuristic_weight: f64,
    component: Vec<u32>,
    component_size: Vec<usize>,
}

const NO_COMPONENT: u32 = u32::MAX;

/// Neighbor offsets; diagonals last.
const STEPS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl PlanGraph {
    pub fn new(grid: &ReachGrid, field: &CostField) -> Self {
        let mut g = Self::build(
            grid.nx,
            grid.nz,
            grid.spacing,
            grid.origin,
            grid.reachable.clone(),
            field.cost.clone(),
        );
        g.heuristic_weight = field.clip.1.powi(-3);
        g
    }

    /// Graph from a raw reachability mask and per-node costs. The heuristic
    /// weight is the smallest reachable cost, which keeps A* admissible.
    pub fn from_parts(
        nx: usize,
        nz: usize,
        spacing: f64,
        origin: (f64, f64),
        reachable: Vec<bool>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        if reachable.len() != nx * nz || cost.len() != nx * nz {
            return Err(Error::Argument(format!(
                "graph arrays must have {} entries (got {} and {})",
                nx * nz,
                reachable.len(),
                cost.len()
            )));
        }
        if !(spacing > 0.0) {
            return Err(Error::Argument("spacing must be positive".into()));
        }
        if let Some(n) = (0..nx * nz).find(|&n| reachable[n] && !(cost[n] > 0.0 && cost[n].is_finite())) {
            return Err(Error::Argument(format!("node {n} has non-positive or non-finite cost {}", cost[n])));
        }
        let mut g = Self::build(nx, nz, spacing, origin, reachable, cost);
        g.heuristic_weight = (0..nx * nz)
            .filter(|&n| g.reachable[n])
            .map(|n| g.cost[n])
            .fold(f64::INFINITY, f64::min);
        if !g.heuristic_weight.is_finite() {
            g.heuristic_weight = 0.0;
        }
        Ok(g)
    }

    fn build(nx: usize, nz: usize, spacing: f64, origin: (f64, f64), reachable: Vec<bool>, cost: Vec<f64>) -> Self {
        let mut g = Self {
            nx,
            nz,
            spacing,
            origin,
            reachable,
            cost,
            heuristic_weight: 0.0,
            component: Vec::new(),
            component_size: Vec::new(),
        };
        g.label_components();
        g
    }

    fn label_components(&mut self) {
        let mut component = vec![NO_COMPONENT; self.len()];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for seed in 0..self.len() {
            if !self.reachable[seed] || component[seed] != NO_COMPONENT {
                continue;
            }
            let label = sizes.len() as u32;
            component[seed] = label;
            queue.push_back(seed);
            let mut size = 0;
            while let Some(n) = queue.pop_front() {
                size += 1;
                for (m, _) in self.neighbors(n) {
                    if component[m] == NO_COMPONENT {
                        component[m] = label;
                        queue.push_back(m);
                    }
                }
            }
            sizes.push(size);
        }
        self.component = component;
        self.component_size = sizes;
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn point(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.coords(node);
        (
            self.origin.0 + i as f64 * self.spacing,
            self.origin.1 + j as f64 * self.spacing,
        )
    }

    pub fn is_reachable(&self, node: usize) -> bool {
        self.reachable[node]
    }

    pub fn cost(&self, node: usize) -> f64 {
        self.cost[node]
    }

    /// Connected-component label of a reachable node.
    pub fn component(&self, node: usize) -> Option<usize> {
        let c = self.component[node];
        (c != NO_COMPONENT).then_some(c as usize)
    }

    pub fn component_size(&self, component: usize) -> usize {
        self.component_size[component]
    }

    fn offset(&self, node: usize, (di, dj): (isize, isize)) -> Option<usize> {
        let (i, j) = self.coords(node);
        let (a, b) = (i as isize + di, j as isize + dj);
        if a < 0 || b < 0 || a >= self.nx as isize || b >= self.nz as isize {
            return None;
        }
        let m = self.node(a as usize, b as usize);
        self.reachable[m].then_some(m)
    }

    /// Reachable neighbors with edge weights.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let ok = self.reachable[node];
        STEPS.iter().filter_map(move |&(di, dj)| {
            if !ok {
                return None;
            }
            let m = self.offset(node, (di, dj))?;
            let len = if di != 0 && dj != 0 {
                self.offset(node, (di, 0))?;
                self.offset(node, (0, dj))?;
                self.spacing * std::f64::consts::SQRT_2
            } else {
                self.spacing
            };
            Some((m, len * self.cost[node].max(self.cost[m])))
        })
    }

    /// Nearest reachable node to a world point, optionally within one component.
    /// Ties go to the lower node index.
    pub fn nearest_reachable(&self, x: f64, z: f64, component: Option<usize>) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for n in 0..self.len() {
            if !self.reachable[n] || component.is_some_and(|c| self.component(n) != Some(c)) {
                continue;
            }
            let (px, pz) = self.point(n);
            let d = (px - x).hypot(pz - z);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, n));
            }
        }
        best.map(|(_, n)| n)
    }

    fn heuristic(&self, a: usize, b: usize) -> f64 {
        let (ax, az) = self.point(a);
        let (bx, bz) = self.point(b);
        (ax - bx).hypot(az - bz) * self.heuristic_weight
    }

    /// Cost of the straight segment between two node centers, by supercover
    /// traversal of the node cells (squares of side `spacing` centered on
    /// nodes). A positive-length piece costs its length times the largest
    /// cost among its own cell and the neighboring positive-length pieces'
    /// cells. Cells touched only at a corner must be reachable. Any
    /// unreachable or out-of-grid cell makes the segment infinite.
    pub fn segment_cost(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return if self.reachable[a] { 0.0 } else { f64::INFINITY };
        }
        let pieces = match self.supercover(a, b) {
            Some(p) => p,
            None => return f64::INFINITY,
        };
        let (ax, az) = self.point(a);
        let (bx, bz) = self.point(b);
        let length = (ax - bx).hypot(az - bz);
        let mut total = 0.0;
        for k in 0..pieces.len() {
            let (cell, frac) = pieces[k];
            let mut c = self.cost[cell];
            if k > 0 {
                c = c.max(self.cost[pieces[k - 1].0]);
            }
            if k + 1 < pieces.len() {
                c = c.max(self.cost[pieces[k + 1].0]);
            }
            total += frac * length * c;
        }
        total
    }

    /// Positive-length cells crossed from `a` to `b` with their length
    /// fractions, or `None` if any touched cell is unreachable.
    ///
    /// Works in doubled integer coordinates: node centers are odd, cell
    /// boundaries even, so crossings and exact corner hits compare exactly.
    fn supercover(&self, a: usize, b: usize) -> Option<Vec<(usize, f64)>> {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        let (du, dv) = (2 * (bi as i64 - ai as i64), 2 * (bj as i64 - aj as i64));
        let (su, sv) = (du.signum(), dv.signum());
        let (adu, adv) = (du.abs(), dv.abs());
        // The k-th boundary along u (k from 0) is crossed at t = (2k + 1) / |du|.
        let (nu, nv) = (adu / 2, adv / 2);
        let (mut ku, mut kv) = (0i64, 0i64);
        let (mut ci, mut cj) = (ai as i64, aj as i64);
        let mut pieces: Vec<(usize, f64)> = Vec::new();
        let mut t_prev = 0.0;
        let check = |i: i64, j: i64| -> Option<usize> {
            if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.nz as i64 {
                return None;
            }
            let n = self.node(i as usize, j as usize);
            self.reachable[n].then_some(n)
        };
        loop {
            let cur = check(ci, cj)?;
            // Next crossing parameters as fractions (num / den).
            let next_u = (ku < nu).then(|| (2 * ku + 1, adu));
            let next_v = (kv < nv).then(|| (2 * kv + 1, adv));
            let order = match (next_u, next_v) {
                (None, None) => {
                    pieces.push((cur, 1.0 - t_prev));
                    break;
                }
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (Some((pu, qu)), Some((pv, qv))) => (pu * qv).cmp(&(pv * qu)),
            };
            let t = match order {
                Ordering::Less | Ordering::Equal => {
                    let (p, q) = next_u.unwrap();
                    p as f64 / q as f64
                }
                Ordering::Greater => {
                    let (p, q) = next_v.unwrap();
                    p as f64 / q as f64
                }
            };
            if t > t_prev {
                pieces.push((cur, t - t_prev));
            }
            t_prev = t;
            match order {
                Ordering::Less => {
                    ku += 1;
                    ci += su;
                }
                Ordering::Greater => {
                    kv += 1;
                    cj += sv;
                }
                Ordering::Equal => {
                    // Passing exactly through a corner touches both side cells.
                    check(ci + su, cj)?;
                    check(ci, cj + sv)?;
                    ku += 1;
                    kv += 1;
                    ci += su;
                    cj += sv;
                }
            }
        }
        Some(pieces)
    }

    /// Sum of per-edge segment costs along a node path.
    pub fn path_cost(&self, path: &[usize]) -> f64 {
        path.windows(2).map(|w| self.segment_cost(w[0], w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we pop the smallest (f, h, node).
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost path from `start` to `goal` and its cost.
pub fn astar(g: &PlanGraph, start: usize, goal: usize) -> Result<(Vec<usize>, f64)> {
    for (what, n) in [("start", start), ("goal", goal)] {
        if n >= g.len() || !g.is_reachable(n) {
            return Err(Error::NoReachableNode(format!("{what} node {n} is not reachable")));
        }
    }
    if start == goal {
        return Ok((Vec::new(), 0.0));
    }
    let (cs, cg) = (g.component(start).unwrap(), g.component(goal).unwrap());
    if cs != cg {
        return Err(Error::Unreachable {
            start_component: cs,
            start_size: g.component_size(cs),
            goal_component: cg,
            goal_size: g.component_size(cg),
        });
    }
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut parent = vec![usize::MAX; g.len()];
    let mut closed = vec![false; g.len()];
    let mut open = BinaryHeap::new();
    dist[start] = 0.0;
    let h0 = g.heuristic(start, goal);
    open.push(Open { f: h0, h: h0, node: start });
    while let Some(Open { node, .. }) = open.pop() {
        if closed[node] {
            continue;
        }
        if node == goal {
            break;
        }
        closed[node] = true;
        for (m, w) in g.neighbors(node) {
            if closed[m] {
                continue;
            }
            let d = dist[node] + w;
            if d < dist[m] {
                dist[m] = d;
                parent[m] = node;
                let h = g.heuristic(m, goal);
                open.push(Open { f: d + h, h, node: m });
            }
        }
    }
    let mut path = vec![goal];
    let mut n = goal;
    while n != start {
        n = parent[n];
        path.push(n);
    }
    path.reverse();
    Ok((path, dist[goal]))
}

/// Greedy waypoint extraction: from each waypoint, jump to the farthest later
/// path node whose straight segment costs no more than following the path
/// (relative tolerance `epsilon`). Endpoints are always kept. Returns indices
/// into `path`.
pub fn extract_waypoints(g: &PlanGraph, path: &[usize], epsilon: f64) -> Vec<usize> {
    if path.is_empty() {
        return Vec::new();
    }
    // Prefix sums of per-edge costs along the path.
    let mut along = vec![0.0; path.len()];
    for k in 1..path.len() {
        along[k] = along[k - 1] + g.segment_cost(path[k - 1], path[k]);
    }
    let mut out = vec![0];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut next = i + 1;
        for j in (i + 2..path.len()).rev() {
            let direct = g.segment_cost(path[i], path[j]);
            if direct <= (along[j] - along[i]) * (1.0 + epsilon) {
                next = j;
                break;
            }
        }
        out.push(next);
        i = next;
    }
    out
}
