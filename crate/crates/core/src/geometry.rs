//! Planar primitives on the unit square `Q = [0,1]²`: points, antenna
//! sectors, Monte Carlo clipped areas and a fixed-radius grid index.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Area of the unit disk.
pub const UNIT_DISK_AREA: f64 = PI;

/// Default number of stratified samples for a single area estimate.
pub const DEFAULT_AREA_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    /// Distance to the nearest side of the unit square (negative outside).
    pub fn boundary_distance(self) -> f64 {
        self.x.min(1.0 - self.x).min(self.y).min(1.0 - self.y)
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// A circular sector: the points within `radius` of `apex` whose direction
/// falls in the half-open arc `[elevation, elevation + central_angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub apex: Point2,
    pub elevation: f64,
    pub central_angle: f64,
    pub radius: f64,
}

impl Sector {
    pub fn new(apex: Point2, elevation: f64, central_angle: f64, radius: f64) -> Self {
        debug_assert!(central_angle > 0.0 && central_angle <= TAU);
        debug_assert!(radius > 0.0);
        Self {
            apex,
            elevation: wrap_angle(elevation),
            central_angle,
            radius,
        }
    }

    /// The full disk `B(center, radius)`.
    pub fn disk(center: Point2, radius: f64) -> Self {
        Self::new(center, 0.0, TAU, radius)
    }

    pub fn is_full_disk(&self) -> bool {
        self.central_angle >= TAU
    }

    /// Unclipped area `α r² / 2`.
    pub fn area(&self) -> f64 {
        0.5 * self.central_angle * self.radius * self.radius
    }

    /// True when the whole disk of the sector lies inside the unit square,
    /// so `|S ∩ Q| = |S|` exactly.
    pub fn is_interior(&self) -> bool {
        self.apex.boundary_distance() >= self.radius
    }

    pub fn contains(&self, p: Point2) -> bool {
        sector_contains(self, p)
    }
}

/// Sector membership. The apex itself is excluded, the distance test is
/// inclusive and the arc is half-open.
pub fn sector_contains(s: &Sector, p: Point2) -> bool {
    let dx = p.x - s.apex.x;
    let dy = p.y - s.apex.y;
    let d2 = dx * dx + dy * dy;
    if d2 == 0.0 || d2 > s.radius * s.radius {
        return false;
    }
    if s.is_full_disk() {
        return true;
    }
    let offset = wrap_angle(dy.atan2(dx) - s.elevation);
    offset < s.central_angle
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

/// Axis-aligned rectangle `[x0,x1] × [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Bounding box of `B(c, r)` clipped to the unit square.
    pub(crate) fn disk_box_in_square(c: Point2, r: f64) -> Self {
        Self {
            x0: (c.x - r).max(0.0),
            y0: (c.y - r).max(0.0),
            x1: (c.x + r).min(1.0),
            y1: (c.y + r).min(1.0),
        }
    }

    pub(crate) fn union(self, other: Rect) -> Self {
        Self {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub(crate) fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

/// Jittered stratified sampling: one uniform point in each cell of a
/// `g × g` grid over `rect`, where `g = ceil(sqrt(samples))`. Calls `visit`
/// for every point and returns the number of points drawn.
pub(crate) fn stratified_points<R: Rng>(
    rect: Rect,
    samples: usize,
    rng: &mut R,
    mut visit: impl FnMut(Point2),
) -> usize {
    let g = (samples.max(1) as f64).sqrt().ceil() as usize;
    let w = (rect.x1 - rect.x0) / g as f64;
    let h = (rect.y1 - rect.y0) / g as f64;
    for iy in 0..g {
        for ix in 0..g {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            visit(Point2::new(
                rect.x0 + (ix as f64 + u) * w,
                rect.y0 + (iy as f64 + v) * h,
            ));
        }
    }
    g * g
}

/// Area estimate from a hit count over `total` points in a box of area
/// `box_area`, with the binomial standard error.
pub(crate) fn hit_estimate(hits: usize, total: usize, box_area: f64) -> Estimate {
    if total == 0 {
        return Estimate::exact(0.0);
    }
    let p = hits as f64 / total as f64;
    Estimate {
        value: box_area * p,
        std_error: box_area * (p * (1.0 - p) / total as f64).sqrt(),
    }
}

/// Monte Carlo estimate of `|S ∩ Q|`, deterministic for a fixed `seed`.
///
/// Points are drawn by jittered stratification over the bounding box of
/// the sector's disk clipped to `Q`; the reported standard error is the
/// plain binomial one, which overstates the stratified error.
pub fn clipped_area(s: &Sector, samples: usize, seed: u64) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clipped_area_with(s, samples, &mut rng)
}

pub(crate) fn clipped_area_with<R: Rng>(s: &Sector, samples: usize, rng: &mut R) -> Estimate {
    let rect = Rect::disk_box_in_square(s.apex, s.radius);
    let box_area = rect.area();
    if box_area <= 0.0 {
        return Estimate::exact(0.0);
    }
    let mut hits = 0usize;
    let total = stratified_points(rect, samples, rng, |p| {
        if sector_contains(s, p) {
            hits += 1;
        }
    });
    hit_estimate(hits, total, box_area)
}

/// `|S ∩ Q|`, exact for sectors whose disk lies inside `Q` and estimated
/// otherwise.
pub(crate) fn region_area<R: Rng>(s: &Sector, samples: usize, rng: &mut R) -> Estimate {
    if s.is_interior() {
        Estimate::exact(s.area())
    } else {
        clipped_area_with(s, samples, rng)
    }
}

/// Uniform grid over the points' bounding box, stored as compressed
/// buckets: `entries[starts[c]..starts[c + 1]]` are the point indices of
/// cell `c = cy * nx + cx`.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    origin: Point2,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    entries: Vec<u32>,
}

const MAX_CELLS: usize = 1 << 24;

/// Build a grid index with (at least) the requested cell size. The cell
/// size is enlarged when the requested one would need more than 2²⁴ cells;
/// query correctness only needs `radius ≤ cell_size`.
pub fn build_index(points: &[Point2], cell_size: f64) -> GridIndex {
    assert!(cell_size > 0.0, "cell_size must be positive");
    if points.is_empty() {
        return GridIndex {
            cell_size,
            origin: Point2::new(0.0, 0.0),
            nx: 0,
            ny: 0,
            starts: vec![0],
            entries: Vec::new(),
        };
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let mut cell = cell_size;
    let (mut nx, mut ny);
    loop {
        nx = ((x1 - x0) / cell).floor() as usize + 1;
        ny = ((y1 - y0) / cell).floor() as usize + 1;
        if nx.saturating_mul(ny) <= MAX_CELLS {
            break;
        }
        cell *= 2.0;
    }
    let mut idx = GridIndex {
        cell_size: cell,
        origin: Point2::new(x0, y0),
        nx,
        ny,
        starts: vec![0; nx * ny + 1],
        entries: vec![0; points.len()],
    };
    let cells: Vec<usize> = points.iter().map(|&p| idx.cell_of(p)).collect();
    for &c in &cells {
        idx.starts[c + 1] += 1;
    }
    for c in 0..nx * ny {
        idx.starts[c + 1] += idx.starts[c];
    }
    let mut fill = idx.starts.clone();
    for (i, &c) in cells.iter().enumerate() {
        idx.entries[fill[c] as usize] = i as u32;
        fill[c] += 1;
    }
    idx
}

impl GridIndex {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn coords_of(&self, p: Point2) -> (isize, isize) {
        (
            ((p.x - self.origin.x) / self.cell_size).floor() as isize,
            ((p.y - self.origin.y) / self.cell_size).floor() as isize,
        )
    }

    fn cell_of(&self, p: Point2) -> usize {
        let (cx, cy) = self.coords_of(p);
        let cx = cx.clamp(0, self.nx as isize - 1) as usize;
        let cy = cy.clamp(0, self.ny as isize - 1) as usize;
        cy * self.nx + cx
    }

    fn bucket(&self, c: usize) -> &[u32] {
        &self.entries[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Nonempty buckets keyed by integer cell coordinates.
    pub fn buckets(&self) -> impl Iterator<Item = ((usize, usize), &[u32])> + '_ {
        (0..self.nx * self.ny)
            .map(move |c| ((c % self.nx, c / self.nx), self.bucket(c)))
            .filter(|(_, b)| !b.is_empty())
    }

    /// Visit every indexed point within the 3×3 cell block around `center`.
    /// Candidates still need an exact distance test.
    pub fn for_each_candidate(&self, center: Point2, mut visit: impl FnMut(usize)) {
        if self.is_empty() {
            return;
        }
        let (cx, cy) = self.coords_of(center);
        for gy in (cy - 1).max(0)..=(cy + 1).min(self.ny as isize - 1) {
            for gx in (cx - 1).max(0)..=(cx + 1).min(self.nx as isize - 1) {
                for &j in self.bucket(gy as usize * self.nx + gx as usize) {
                    visit(j as usize);
                }
            }
        }
    }
}

/// Indices `j` with `‖points[j] − center‖ ≤ radius`, including a point at
/// `center` itself. Requires `radius ≤ idx.cell_size()`.
pub fn neighbors_within(
    idx: &GridIndex,
    points: &[Point2],
    center: Point2,
    radius: f64,
) -> Vec<usize> {
    assert!(
        radius <= idx.cell_size(),
        "query radius {radius} exceeds cell size {}",
        idx.cell_size()
    );
    let r2 = radius * radius;
    let mut out = Vec::new();
    idx.for_each_candidate(center, |j| {
        if points[j].dist_sq(center) <= r2 {
            out.push(j);
        }
    });
    out.sort_unstable();
    out
}
