//! Exact nearest / radius queries over belief sets.
//!
//! Both metrics are bounded below by a function of the Euclidean distance between the
//! planar mean positions, so a uniform grid over positions can discard whole cells without
//! changing any answer. The linear scan is the reference the grid is tested against.

use std::cmp::Ordering;

use crate::belief::GaussianBelief;
use crate::geometry::Aabb;
use crate::metric::MetricKind;

/// `(distance, id)` ordering: smaller distance first, then lower id.
pub(crate) fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Equal => a.1 < b.1,
        Ordering::Greater => false,
    }
}

/// Strategy for near-neighbour queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearestSearch {
    Linear,
    Grid,
}

#[derive(Debug, Clone)]
pub struct BeliefIndex {
    kind: NearestSearch,
    ids: Vec<usize>,
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
    overflow: Vec<usize>,
}

impl Grid {
    fn locate(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let fx = ((p[0] - self.origin[0]) / self.cell).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    fn slot(&mut self, p: [f64; 2]) -> &mut Vec<usize> {
        match self.locate(p) {
            Some((x, y)) => &mut self.cells[y * self.nx + x],
            None => &mut self.overflow,
        }
    }
}

fn pos(b: &GaussianBelief) -> [f64; 2] {
    let m = b.mean();
    [m[0], if m.len() > 1 { m[1] } else { 0.0 }]
}

impl BeliefIndex {
    /// `cell` is the grid pitch in meters; the grid covers `bounds`.
    pub fn new(kind: NearestSearch, bounds: &Aabb, cell: f64) -> Self {
        let grid = (kind == NearestSearch::Grid).then(|| {
            let w = bounds.upper[0] - bounds.lower[0];
            let h = bounds.upper[1] - bounds.lower[1];
            let nx = ((w / cell).ceil() as usize).clamp(1, 4096);
            let ny = ((h / cell).ceil() as usize).clamp(1, 4096);
            Grid {
                origin: [bounds.lower[0], bounds.lower[1]],
                cell: (w / nx as f64).max(h / ny as f64),
                nx,
                ny,
                cells: vec![Vec::new(); nx * ny],
                overflow: Vec::new(),
            }
        });
        Self { kind, ids: Vec::new(), grid }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn kind(&self) -> NearestSearch {
        self.kind
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, id: usize, belief: &GaussianBelief) {
        self.ids.push(id);
        if let Some(g) = &mut self.grid {
            g.slot(pos(belief)).push(id);
        }
    }

    pub fn remove(&mut self, id: usize, belief: &GaussianBelief) {
        if let Some(i) = self.ids.iter().position(|&x| x == id) {
            self.ids.swap_remove(i);
        }
        if let Some(g) = &mut self.grid {
            let slot = g.slot(pos(belief));
            if let Some(i) = slot.iter().position(|&x| x == id) {
                slot.swap_remove(i);
            }
        }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Nearest item to `query`, ties by lowest id.
    pub fn nearest<'a, F>(&self, query: &GaussianBelief, metric: MetricKind, belief_of: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> &'a GaussianBelief,
    {
        let mut best: Option<(f64, usize)> = None;
        let consider = |best: &mut Option<(f64, usize)>, id: usize| {
            let d = metric.distance(belief_of(id), query);
            if best.is_none_or(|b| better((d, id), b)) {
                *best = Some((d, id));
            }
        };
        match &self.grid {
            None => self.ids.iter().for_each(|&id| consider(&mut best, id)),
            Some(g) => {
                g.overflow.iter().for_each(|&id| consider(&mut best, id));
                let q = pos(query);
                let (cx, cy) = clamp_cell(g, q);
                let max_ring = g.nx.max(g.ny);
                for ring in 0..=max_ring {
                    if ring >= 1 {
                        // every cell of this ring is at least (ring - 1) pitches away, plus
                        // whatever distance the query lies outside the grid
                        let gap = (ring - 1) as f64 * g.cell;
                        if let Some((d, _)) = best {
                            if metric.lower_bound_from_mean_distance(gap) > d {
                                break;
                            }
                        }
                    }
                    for_ring(g, cx, cy, ring, |cell| g.cells[cell].iter().for_each(|&id| consider(&mut best, id)));
                }
            }
        }
        best.map(|(d, id)| (id, d))
    }

    /// All items within `radius` (inclusive) of `query`, sorted by id.
    pub fn within<'a, F>(&self, query: &GaussianBelief, radius: f64, metric: MetricKind, belief_of: F) -> Vec<(usize, f64)>
    where
        F: Fn(usize) -> &'a GaussianBelief,
    {
        let mut out = Vec::new();
        let mut consider = |id: usize| {
            let d = metric.distance(belief_of(id), query);
            if d <= radius {
                out.push((id, d));
            }
        };
        match &self.grid {
            None => self.ids.iter().for_each(|&id| consider(id)),
            Some(g) => {
                g.overflow.iter().for_each(|&id| consider(id));
                let q = pos(query);
                let (cx, cy) = clamp_cell(g, q);
                let max_ring = g.nx.max(g.ny);
                for ring in 0..=max_ring {
                    if ring >= 1 {
                        let gap = (ring - 1) as f64 * g.cell;
                        if metric.lower_bound_from_mean_distance(gap) > radius {
                            break;
                        }
                    }
                    for_ring(g, cx, cy, ring, |cell| g.cells[cell].iter().for_each(|&id| consider(id)));
                }
            }
        }
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

fn clamp_cell(g: &Grid, q: [f64; 2]) -> (usize, usize) {
    let fx = ((q[0] - g.origin[0]) / g.cell).floor().clamp(0.0, (g.nx - 1) as f64);
    let fy = ((q[1] - g.origin[1]) / g.cell).floor().clamp(0.0, (g.ny - 1) as f64);
    (fx as usize, fy as usize)
}

fn for_ring(g: &Grid, cx: usize, cy: usize, ring: usize, mut f: impl FnMut(usize)) {
    let (cx, cy, r) = (cx as i64, cy as i64, ring as i64);
    let (nx, ny) = (g.nx as i64, g.ny as i64);
    let mut visit = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < nx && y < ny {
            f((y * nx + x) as usize);
        }
    };
    if r == 0 {
        visit(cx, cy);
        return;
    }
    for x in (cx - r)..=(cx + r) {
        visit(x, cy - r);
        visit(x, cy + r);
    }
    for y in (cy - r + 1)..=(cy + r - 1) {
        visit(cx - r, y);
        visit(cx + r, y);
    }
}
