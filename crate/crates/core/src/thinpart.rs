//! Planar thin decomposition: centroid cuts by equipartitioning lines until
//! every convex piece fits in a strip of width `2ε`.
//!
//! The signed function is `f = vol(S₂)·1_{S₁} − vol(S₁)·1_{S₂}` with `S₁`,
//! `S₂` given as weighted rectangles. Pieces are convex cells of the region's
//! hull; each piece's share of the region is `piece ∩ region`.

use std::f64::consts::{E, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Halfspace, Point, StarBody};

pub type Vertex = [f64; 2];

pub fn signed_area(p: &[Vertex]) -> f64 {
    let n = p.len();
    (0..n).map(|i| cross(p[i], p[(i + 1) % n])).sum::<f64>() / 2.0
}

pub fn polygon_area(p: &[Vertex]) -> f64 {
    signed_area(p).abs()
}

#[inline]
fn cross(a: Vertex, b: Vertex) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn sub(a: Vertex, b: Vertex) -> Vertex {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot2(a: Vertex, b: Vertex) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn centroid(p: &[Vertex]) -> Vertex {
    let n = p.len();
    let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
    // Shift to the first vertex for conditioning.
    let o = p[0];
    for i in 0..n {
        let u = sub(p[i], o);
        let v = sub(p[(i + 1) % n], o);
        let w = cross(u, v);
        a += w;
        cx += (u[0] + v[0]) * w;
        cy += (u[1] + v[1]) * w;
    }
    [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
}

/// Part of `p` with `a·x ≤ b` (Sutherland–Hodgman against one line). Any
/// simple subject gives the correct area; convex subjects stay convex.
pub fn clip_halfplane(p: &[Vertex], a: Vertex, b: f64) -> Vec<Vertex> {
    let n = p.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = p[i];
        let next = p[(i + 1) % n];
        let sc = dot2(a, cur) - b;
        let sn = dot2(a, next) - b;
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
        }
    }
    dedup_ring(&mut out);
    if out.len() < 3 {
        out.clear();
    }
    out
}

fn dedup_ring(p: &mut Vec<Vertex>) {
    p.dedup_by(|a, b| {
        (a[0] - b[0]).abs() <= 1e-15 * (1.0 + b[0].abs()) && (a[1] - b[1]).abs() <= 1e-15 * (1.0 + b[1].abs())
    });
    while p.len() > 1 {
        let (f, l) = (p[0], p[p.len() - 1]);
        if (f[0] - l[0]).abs() <= 1e-15 * (1.0 + f[0].abs()) && (f[1] - l[1]).abs() <= 1e-15 * (1.0 + f[1].abs()) {
            p.pop();
        } else {
            break;
        }
    }
}

/// Halfplane `{x : a·x ≤ b}` whose boundary is the line through `p → q`,
/// keeping the left side.
fn left_of(p: Vertex, q: Vertex) -> (Vertex, f64) {
    let e = sub(q, p);
    let a = [e[1], -e[0]];
    (a, dot2(a, p))
}

/// `subject ∩ clip` for a counterclockwise convex `clip`.
pub fn clip_convex(subject: &[Vertex], clip: &[Vertex]) -> Vec<Vertex> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = left_of(clip[i], clip[(i + 1) % clip.len()]);
        out = clip_halfplane(&out, a, b);
    }
    out
}

/// Counterclockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Vertex]) -> Vec<Vertex> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vertex> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vertex>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(sub(hull[hull.len() - 1], hull[hull.len() - 2]), sub(p, hull[hull.len() - 2])) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn is_convex_ccw(p: &[Vertex]) -> bool {
    let n = p.len();
    n >= 3
        && signed_area(p) > 0.0
        && (0..n).all(|i| cross(sub(p[(i + 1) % n], p[i]), sub(p[(i + 2) % n], p[(i + 1) % n])) >= -1e-12)
}

/// Exact minimum width of a convex polygon and the unit normal attaining it.
/// The minimum is attained at an edge normal, so every edge is tried.
pub fn min_width(p: &[Vertex]) -> Result<(f64, Vertex)> {
    if p.len() < 3 || !(polygon_area(p) > 0.0) {
        return Err(Error::Degenerate("polygon has no area".into()));
    }
    let n = p.len();
    let mut best = (f64::INFINITY, [1.0, 0.0]);
    for i in 0..n {
        let e = sub(p[(i + 1) % n], p[i]);
        let len = e[0].hypot(e[1]);
        if len == 0.0 {
            continue;
        }
        let u = [-e[1] / len, e[0] / len];
        let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            let s = dot2(u, v);
            (lo.min(s), hi.max(s))
        });
        if hi - lo < best.0 {
            best = (hi - lo, u);
        }
    }
    Ok(best)
}

/// Width of `p` along the unit direction `u`.
pub fn width_along(p: &[Vertex], u: Vertex) -> f64 {
    let (lo, hi) =
        p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(dot2(u, v)), hi.max(dot2(u, v))));
    hi - lo
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: &[Vertex], x: Vertex) -> bool {
    let n = p.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (p[i], p[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) && x[0] < (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// A simple polygon with a kernel of positive area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vertex>", into = "Vec<Vertex>")]
pub struct StarPolygon {
    vertices: Vec<Vertex>,
    #[serde(skip)]
    kernel: Vec<Vertex>,
    #[serde(skip)]
    edges: Vec<(Vertex, f64)>,
}

impl StarPolygon {
    /// Accepts either orientation; stores the ring counterclockwise.
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() < 3 || vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("polygon needs at least three finite vertices".into()));
        }
        dedup_ring(&mut vertices);
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        if !(signed_area(&vertices) > 0.0) {
            return Err(Error::InvalidSpec("polygon has zero area".into()));
        }
        let n = vertices.len();
        let edges: Vec<(Vertex, f64)> = (0..n).map(|i| left_of(vertices[i], vertices[(i + 1) % n])).collect();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let mut kernel = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
        for &(a, b) in &edges {
            kernel = clip_halfplane(&kernel, a, b);
            if kernel.is_empty() {
                break;
            }
        }
        if kernel.len() < 3 || !(polygon_area(&kernel) > 1e-14 * signed_area(&vertices)) {
            return Err(Error::InvalidSpec("polygon is not star-shaped (empty kernel)".into()));
        }
        // A ring winding once around a kernel point is simple and star-shaped
        // with respect to it.
        let c = centroid(&kernel);
        let turn: f64 = (0..n)
            .map(|i| {
                let (u, v) = (sub(vertices[i], c), sub(vertices[(i + 1) % n], c));
                cross(u, v).atan2(dot2(u, v))
            })
            .sum();
        if (turn - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::InvalidSpec("polygon ring is not simple around its kernel".into()));
        }
        Ok(StarPolygon { vertices, kernel, edges })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// The kernel polygon: the intersection of the edges' inner halfplanes.
    pub fn kernel(&self) -> &[Vertex] {
        &self.kernel
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }
}

impl TryFrom<Vec<Vertex>> for StarPolygon {
    type Error = Error;
    fn try_from(v: Vec<Vertex>) -> Result<Self> {
        StarPolygon::new(v)
    }
}

impl From<StarPolygon> for Vec<Vertex> {
    fn from(p: StarPolygon) -> Self {
        p.vertices
    }
}

impl StarBody for StarPolygon {
    fn dimension(&self) -> usize {
        2
    }
    fn contains(&self, x: &[f64]) -> bool {
        point_in_polygon(&self.vertices, [x[0], x[1]]) || self.kernel_contains(x)
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.edges.iter().all(|(a, b)| a[0] * x[0] + a[1] * x[1] <= *b)
    }
    fn interior_point(&self) -> Point {
        let c = centroid(&self.kernel);
        Point::from_finite(vec![c[0], c[1]])
    }
    fn radius_bound(&self) -> f64 {
        self.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
    fn kernel_inner_radius(&self) -> f64 {
        let c = centroid(&self.kernel);
        self.edges.iter().map(|(a, b)| (b - dot2(*a, c)) / a[0].hypot(a[1])).fold(f64::INFINITY, f64::min)
    }
    fn bounding_box(&self) -> BoundingBox {
        let (mut lo, mut hi) = (vec![f64::INFINITY; 2], vec![f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        BoundingBox::new(lo, hi)
    }
    fn diameter_bound(&self) -> f64 {
        let h = convex_hull(&self.vertices);
        let mut d: f64 = 0.0;
        for a in &h {
            for b in &h {
                d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }
}

fn default_weight() -> f64 {
    1.0
}

/// Axis-aligned cell `[x0, x1] × [y0, y1]` of an indicator support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rect: [f64; 4],
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl Cell {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Cell { rect: [x0, y0, x1, y1], weight: 1.0 }
    }

    pub fn polygon(&self) -> Vec<Vertex> {
        let [x0, y0, x1, y1] = self.rect;
        vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.rect;
        if !(x0 < x1 && y0 < y1) || self.rect.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("cell {:?} is empty or non-finite", self.rect)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidSpec(format!("cell weight {} must be positive", self.weight)));
        }
        Ok(())
    }
}

/// A polygon carrying constant signed density.
#[derive(Debug, Clone, PartialEq)]
pub struct MassCell {
    pub polygon: Vec<Vertex>,
    pub density: f64,
}

impl MassCell {
    pub fn mass(&self) -> f64 {
        self.density * polygon_area(&self.polygon)
    }
}

/// Cells of `f` clipped to the region, and the total mass `∫|f|`.
pub fn signed_cells(region: &StarPolygon, s1: &[Cell], s2: &[Cell]) -> Result<(Vec<MassCell>, f64)> {
    let clip = |cells: &[Cell]| -> Result<Vec<(Vec<Vertex>, f64)>> {
        cells
            .iter()
            .map(|c| {
                c.validate()?;
                Ok((clip_convex(region.vertices(), &c.polygon()), c.weight))
            })
            .filter(|r: &Result<(Vec<Vertex>, f64)>| r.as_ref().map_or(true, |(p, _)| !p.is_empty()))
            .collect()
    };
    let (c1, c2) = (clip(s1)?, clip(s2)?);
    let vol = |cs: &[(Vec<Vertex>, f64)]| cs.iter().map(|(p, w)| w * polygon_area(p)).sum::<f64>();
    let (v1, v2) = (vol(&c1), vol(&c2));
    let mut out: Vec<MassCell> = c1.into_iter().map(|(polygon, w)| MassCell { polygon, density: v2 * w }).collect();
    out.extend(c2.into_iter().map(|(polygon, w)| MassCell { polygon, density: -v1 * w }));
    out.retain(|c| c.density != 0.0);
    Ok((out, 2.0 * v1 * v2))
}

fn mass_below(cells: &[MassCell], a: Vertex, b: f64) -> f64 {
    cells.iter().map(|c| c.density * polygon_area(&clip_halfplane(&c.polygon, a, b))).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equipartition {
    pub theta: f64,
    /// The `H⁻` side `{x : a·x ≤ a·z}`, `a = (cos θ, sin θ)`.
    pub halfspace: Halfspace,
    /// `∫_{H⁺} f − ∫_{H⁻} f` at the returned angle.
    pub imbalance: f64,
}

const BISECTION_STEPS: usize = 64;

/// Line through `z` equipartitioning the signed cells, by bisection on the
/// angle. The imbalance at `θ + π` is the negation of that at `θ`.
pub fn equipartition_line(piece: &[Vertex], cells: &[MassCell], z: Vertex) -> Result<Equipartition> {
    if !point_in_polygon(piece, z) {
        return Err(Error::InvalidParameter("cut point lies outside the piece".into()));
    }
    let total: f64 = cells.iter().map(MassCell::mass).sum();
    let scale: f64 = cells.iter().map(|c| c.mass().abs()).sum();
    let g = |theta: f64| {
        let a = [theta.cos(), theta.sin()];
        total - 2.0 * mass_below(cells, a, dot2(a, z))
    };
    let make = |theta: f64, imbalance: f64| -> Result<Equipartition> {
        let a = [theta.cos(), theta.sin()];
        Ok(Equipartition { theta, halfspace: Halfspace::new(vec![a[0], a[1]], dot2(a, z))?, imbalance })
    };
    let g0 = g(0.0);
    if g0.abs() <= 1e-15 * scale || scale == 0.0 {
        return make(0.0, g0);
    }
    let (mut lo, mut hi) = (0.0, PI);
    let (mut glo, mut ghi) = (g0, -g0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return make(mid, 0.0);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    if ghi.abs() < glo.abs() {
        make(hi, ghi)
    } else {
        make(lo, glo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPiece {
    /// Counterclockwise convex ring.
    pub polygon: Vec<Vertex>,
    pub cut_lineage: Vec<Halfspace>,
    pub area: f64,
    /// `area(piece ∩ region)`.
    pub region_area: f64,
    /// `∫_piece f`.
    pub integral: f64,
    pub min_width: f64,
    pub width_direction: Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub depth: usize,
    /// Smaller side's share of the cut piece's area.
    pub fraction: f64,
    pub imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub pieces: Vec<ConvexPiece>,
    pub epsilon: f64,
    pub root_region: Vec<Vertex>,
    /// Convex hull of the region: the set actually partitioned.
    pub hull: Vec<Vertex>,
    pub total_mass: f64,
    pub tolerance: f64,
    pub depth_cap: usize,
    pub cuts: Vec<CutRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    /// Balance tolerance relative to `∫|f|`.
    pub tolerance: f64,
    pub depth_margin: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { tolerance: 1e-6, depth_margin: 8 }
    }
}

/// `⌈log_{e/(e−1)}(πD²/(2ε²))⌉ + margin`, with `D` the hull radius about its centroid.
pub fn depth_cap(hull: &[Vertex], epsilon: f64, margin: usize) -> usize {
    let c = centroid(hull);
    let d = hull.iter().map(|v| (v[0] - c[0]).hypot(v[1] - c[1])).fold(0.0, f64::max);
    let ratio = PI * d * d / (2.0 * epsilon * epsilon);
    let steps = if ratio > 1.0 { (ratio.ln() / (E / (E - 1.0)).ln()).ceil() as usize } else { 0 };
    steps + margin
}

struct Work {
    polygon: Vec<Vertex>,
    lineage: Vec<Halfspace>,
    cells: Vec<MassCell>,
    depth: usize,
}

enum Step {
    Done(ConvexPiece),
    Split([Work; 2], CutRecord),
}

pub fn thin_decompose(region: &StarPolygon, s1: &[Cell], s2: &[Cell], epsilon: f64) -> Result<Decomposition> {
    thin_decompose_with(region, s1, s2, epsilon, DecomposeOptions::default())
}

pub fn thin_decompose_with(
    region: &StarPolygon,
    s1: &[Cell],
    s2: &[Cell],
    epsilon: f64,
    opts: DecomposeOptions,
) -> Result<Decomposition> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    let (cells, total_mass) = signed_cells(region, s1, s2)?;
    let hull = convex_hull(region.vertices());
    let cap = depth_cap(&hull, epsilon, opts.depth_margin);
    let stop_area = 2.0 * epsilon * epsilon;

    let mut frontier = vec![Work { polygon: hull.clone(), lineage: Vec::new(), cells, depth: 0 }];
    let mut pieces = Vec::new();
    let mut cuts = Vec::new();
    while !frontier.is_empty() {
        let steps: Vec<Step> = frontier
            .into_par_iter()
            .map(|w| -> Result<Step> {
                let area = polygon_area(&w.polygon);
                let (width, dir) = min_width(&w.polygon)?;
                if area < stop_area || width <= 2.0 * epsilon {
                    return Ok(Step::Done(ConvexPiece {
                        region_area: polygon_area(&clip_convex(region.vertices(), &w.polygon)),
                        integral: w.cells.iter().map(MassCell::mass).sum(),
                        polygon: w.polygon,
                        cut_lineage: w.lineage,
                        area,
                        min_width: width,
                        width_direction: dir,
                    }));
                }
                if w.depth >= cap {
                    return Err(Error::IterationCap(format!("piece at depth {} exceeds the cap {cap}", w.depth)));
                }
                let z = centroid(&w.polygon);
                let eq = equipartition_line(&w.polygon, &w.cells, z)?;
                let a = [eq.halfspace.normal[0], eq.halfspace.normal[1]];
                let b = eq.halfspace.offset;
                let flipped = Halfspace::new(vec![-a[0], -a[1]], -b)?;
                let side = |a: Vertex, b: f64, h: Halfspace| {
                    let polygon = clip_halfplane(&w.polygon, a, b);
                    let cells = w
                        .cells
                        .iter()
                        .filter_map(|c| {
                            let p = clip_halfplane(&c.polygon, a, b);
                            (!p.is_empty()).then_some(MassCell { polygon: p, density: c.density })
                        })
                        .collect();
                    let mut lineage = w.lineage.clone();
                    lineage.push(h);
                    Work { polygon, lineage, cells, depth: w.depth + 1 }
                };
                let lower = side(a, b, eq.halfspace.clone());
                let upper = side([-a[0], -a[1]], -b, flipped);
                let (al, au) = (polygon_area(&lower.polygon), polygon_area(&upper.polygon));
                let record = CutRecord { depth: w.depth, fraction: al.min(au) / area, imbalance: eq.imbalance };
                Ok(Step::Split([lower, upper], record))
            })
            .collect::<Result<_>>()?;
        frontier = Vec::new();
        for s in steps {
            match s {
                Step::Done(p) => pieces.push(p),
                Step::Split(children, record) => {
                    cuts.push(record);
                    frontier.extend(children.into_iter().filter(|c| !c.polygon.is_empty()));
                }
            }
        }
    }
    let key = |p: &ConvexPiece| centroid(&p.polygon);
    pieces.sort_by(|p, q| {
        let (a, b) = (key(p), key(q));
        a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
    });
    Ok(Decomposition {
        pieces,
        epsilon,
        root_region: region.vertices().to_vec(),
        hull,
        total_mass,
        tolerance: opts.tolerance,
        depth_cap: cap,
        cuts,
    })
}

impl Decomposition {
    /// Largest `|∫_piece f| / ∫|f|`.
    pub fn worst_balance(&self) -> f64 {
        if self.total_mass == 0.0 {
            return 0.0;
        }
        self.pieces.iter().map(|p| p.integral.abs() / self.total_mass).fold(0.0, f64::max)
    }

    pub fn is_balanced(&self) -> bool {
        self.worst_balance() <= self.tolerance
    }
}

/// Random polygon star-shaped about the origin: sorted angles, radii in
/// `[r_min, 1]`.
pub fn random_star_polygon<R: Rng + ?Sized>(rng: &mut R, vertices: usize, r_min: f64) -> Result<StarPolygon> {
    let mut angles: Vec<f64> = (0..vertices).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let ring = angles
        .iter()
        .map(|t| {
            let r = rng.random_range(r_min..1.0);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    StarPolygon::new(ring)
}

/// Random disjoint `S₁`, `S₂` markings of the grid cells lying inside the
/// region; each inside cell joins `S₁` or `S₂` with probability `p` each.
pub fn random_markings<R: Rng + ?Sized>(
    rng: &mut R,
    region: &StarPolygon,
    grid: usize,
    p: f64,
) -> (Vec<Cell>, Vec<Cell>) {
    let bb = region.bounding_box();
    let (wx, wy) = ((bb.hi[0] - bb.lo[0]) / grid as f64, (bb.hi[1] - bb.lo[1]) / grid as f64);
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for i in 0..grid {
        for j in 0..grid {
            let x0 = bb.lo[0] + i as f64 * wx;
            let y0 = bb.lo[1] + j as f64 * wy;
            let cell = Cell::new(x0, y0, x0 + wx, y0 + wy);
            if polygon_area(&clip_convex(region.vertices(), &cell.polygon())) < 0.999_999 * wx * wy {
                continue;
            }
            let u: f64 = rng.random();
            if u < p {
                s1.push(cell);
            } else if u < 2.0 * p {
                s2.push(cell);
            }
        }
    }
    (s1, s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn square(s: f64) -> StarPolygon {
        StarPolygon::new(vec![[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]]).unwrap()
    }

    fn l_shape() -> StarPolygon {
        StarPolygon::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap()
    }

    #[test]
    fn polygon_basics() {
        let sq = square(2.0);
        assert_eq!(sq.area(), 4.0);
        assert_eq!(centroid(sq.vertices()), [1.0, 1.0]);
        assert!(is_convex_ccw(sq.vertices()));
        let cw = StarPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(signed_area(cw.vertices()) > 0.0);
        let half = clip_halfplane(sq.vertices(), [1.0, 0.0], 0.5);
        assert!((polygon_area(&half) - 1.0).abs() < 1e-15);
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 1.0], [0.5, 0.0]]);
        assert_eq!(h.len(), 4);
        assert!((polygon_area(&h) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn star_polygon_validation() {
        assert!(StarPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(StarPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        // Two disjoint lobes joined by a thin comb: no common visible point.
        let zigzag =
            vec![[0.0, 0.0], [4.0, 0.0], [4.0, 1.0], [3.0, 1.0], [3.0, 0.2], [1.0, 0.2], [1.0, 1.0], [0.0, 1.0]];
        assert!(StarPolygon::new(zigzag).is_err());
        let l = l_shape();
        assert!((polygon_area(l.kernel()) - 1.0).abs() < 1e-12);
        assert!(l.kernel_contains(&[0.5, 0.5]) && !l.kernel_contains(&[1.5, 0.5]));
        assert!(l.contains(&[1.5, 0.5]) && !l.contains(&[1.5, 1.5]));
        assert!(l.kernel_inner_radius() > 0.49);
        let json = serde_json::to_string(&l).unwrap();
        let back: StarPolygon = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn width_examples() {
        let (w, d) = min_width(square(1.0).vertices()).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        assert!(d[0].abs() < 1e-15 || d[1].abs() < 1e-15);
        let rect = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let (w, d) = min_width(&rect).unwrap();
        assert!((w - 1.0).abs() < 1e-15 && d[0].abs() < 1e-15);
        assert!(min_width(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn equipartition_square_split() {
        let sq = square(2.0);
        let s1 = vec![Cell::new(0.0, 0.0, 1.0, 2.0)];
        let s2 = vec![Cell::new(1.0, 0.0, 2.0, 2.0)];
        let (cells, total) = signed_cells(&sq, &s1, &s2).unwrap();
        assert_eq!(total, 8.0);
        let eq = equipartition_line(sq.vertices(), &cells, [1.0, 1.0]).unwrap();
        assert!(eq.imbalance.abs() < 1e-12);
        // Every line through the centre is balanced here except the one
        // separating S₁ from S₂; bisection lands on the horizontal one.
        assert!(eq.halfspace.normal[0].abs() < 1e-12, "{eq:?}");
        let vertical = -2.0 * mass_below(&cells, [1.0, 0.0], 1.0);
        assert_eq!(vertical, -8.0);
    }

    #[test]
    fn equipartition_zero_function() {
        let sq = square(1.0);
        let eq = equipartition_line(sq.vertices(), &[], [0.5, 0.5]).unwrap();
        assert_eq!(eq.theta, 0.0);
        assert!(equipartition_line(sq.vertices(), &[], [3.0, 0.5]).is_err());
    }

    #[test]
    fn equipartition_against_angle_sweep() {
        let sq = square(1.0);
        let s1 = vec![Cell::new(0.05, 0.1, 0.35, 0.3), Cell::new(0.6, 0.7, 0.7, 0.95)];
        let s2 = vec![Cell::new(0.5, 0.05, 0.9, 0.25)];
        let (cells, total) = signed_cells(&sq, &s1, &s2).unwrap();
        let z = [0.5, 0.5];
        let eq = equipartition_line(sq.vertices(), &cells, z).unwrap();
        assert!(eq.imbalance.abs() <= 1e-6 * total);
        // Sweep oracle on a plain area-summation of the rectangles.
        let imbalance = |t: f64| {
            let a = [t.cos(), t.sin()];
            let b = dot2(a, z);
            let m = |cs: &[Cell], dens: f64| {
                cs.iter()
                    .map(|c| {
                        dens * (polygon_area(&c.polygon()) - 2.0 * polygon_area(&clip_halfplane(&c.polygon(), a, b)))
                    })
                    .sum::<f64>()
            };
            m(&s1, 0.08) + m(&s2, -0.085)
        };
        assert!((imbalance(eq.theta) - eq.imbalance).abs() < 1e-12);
        let sweep: Vec<f64> = (0..10_000).map(|i| imbalance(PI * i as f64 / 10_000.0)).collect();
        let changes = sweep.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert!(changes >= 1);
        let nearest = (0..10_000)
            .filter(|&i| sweep[i].abs() < 1e-3 * total)
            .map(|i| (PI * i as f64 / 10_000.0 - eq.theta).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-3);
    }

    fn check_decomposition(region: &StarPolygon, dec: &Decomposition, s1: &[Cell], s2: &[Cell]) {
        let hull_area = polygon_area(&dec.hull);
        let sum: f64 = dec.pieces.iter().map(|p| p.area).sum();
        assert!((sum - hull_area).abs() <= 1e-9 * hull_area);
        let sum_region: f64 = dec.pieces.iter().map(|p| p.region_area).sum();
        assert!((sum_region - region.area()).abs() <= 1e-9 * region.area());
        let (v1, v2): (f64, f64) =
            (s1.iter().map(|c| polygon_area(&c.polygon())).sum(), s2.iter().map(|c| polygon_area(&c.polygon())).sum());
        for p in &dec.pieces {
            assert!(is_convex_ccw(&p.polygon));
            assert!(p.min_width <= 2.0 * dec.epsilon || p.area < 2.0 * dec.epsilon * dec.epsilon);
            if p.area < 2.0 * dec.epsilon * dec.epsilon {
                assert!(p.min_width <= 2.0 * dec.epsilon);
            }
            // Direct summation: clip every rectangle by the finished piece.
            let direct: f64 = s1.iter().map(|c| v2 * polygon_area(&clip_convex(&c.polygon(), &p.polygon))).sum::<f64>()
                - s2.iter().map(|c| v1 * polygon_area(&clip_convex(&c.polygon(), &p.polygon))).sum::<f64>();
            assert!((direct - p.integral).abs() <= 1e-9 * dec.total_mass.max(1.0));
            assert!(direct.abs() <= 1e-6 * dec.total_mass.max(f64::MIN_POSITIVE));
            let mut replay = dec.hull.clone();
            for h in &p.cut_lineage {
                replay = clip_halfplane(&replay, [h.normal[0], h.normal[1]], h.offset);
            }
            assert!((polygon_area(&replay) - p.area).abs() <= 1e-12);
            for v in &p.polygon {
                let d = replay.iter().map(|r| (r[0] - v[0]).hypot(r[1] - v[1])).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-9);
            }
        }
        let lo = 1.0 / E - 1e-9;
        assert!(dec.cuts.iter().all(|c| c.fraction >= lo && c.fraction <= 1.0 - lo));
    }

    #[test]
    fn square_with_zero_function() {
        let sq = square(1.0);
        let dec = thin_decompose(&sq, &[], &[], 0.25).unwrap();
        assert!(dec.pieces.iter().all(|p| p.min_width <= 0.5));
        check_decomposition(&sq, &dec, &[], &[]);
    }

    #[test]
    fn l_shape_with_markings() {
        let l = l_shape();
        let mut rng = stream(3, purpose::DIAGNOSTIC, 0);
        let (s1, s2) = random_markings(&mut rng, &l, 16, 0.3);
        assert!(!s1.is_empty() && !s2.is_empty());
        let dec = thin_decompose(&l, &s1, &s2, 0.1).unwrap();
        assert!(dec.is_balanced());
        check_decomposition(&l, &dec, &s1, &s2);
        assert_eq!(dec, thin_decompose(&l, &s1, &s2, 0.1).unwrap());
    }

    #[test]
    fn depth_cap_errors_when_too_small() {
        let l = l_shape();
        let opts = DecomposeOptions { tolerance: 1e-6, depth_margin: 0 };
        assert!(depth_cap(&convex_hull(l.vertices()), 0.01, 0) > 10);
        let tiny = DecomposeOptions { depth_margin: 0, ..opts };
        let hull = convex_hull(l.vertices());
        let cap = depth_cap(&hull, 1.0, 0);
        let r = thin_decompose_with(&l, &[], &[], 1.0, tiny);
        assert!(r.is_ok() || cap == 0);
        assert!(thin_decompose(&l, &[], &[], 0.0).is_err());
    }

    #[test]
    fn area_width_claim_on_random_polygons() {
        let mut rng = stream(5, purpose::DIAGNOSTIC, 1);
        for _ in 0..500 {
            let pts: Vec<Vertex> = (0..8).map(|_| [rng.random::<f64>(), rng.random::<f64>() * 0.2]).collect();
            let h = convex_hull(&pts);
            if h.len() < 3 {
                continue;
            }
            let delta = (2.0 * polygon_area(&h)).sqrt() * 1.000_001;
            assert!(min_width(&h).unwrap().0 <= delta);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn min_width_matches_direction_sweep(seed in any::<u64>()) {
            let mut rng = stream(seed, purpose::DIAGNOSTIC, 2);
            let pts: Vec<Vertex> = (0..12).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)]).collect();
            let h = convex_hull(&pts);
            prop_assume!(h.len() >= 3);
            let (w, d) = min_width(&h).unwrap();
            let wt = |t: f64| width_along(&h, [t.cos(), t.sin()]);
            let step = PI / 10_000.0;
            let best = (0..10_000).min_by(|&i, &j| wt(i as f64 * step).total_cmp(&wt(j as f64 * step))).unwrap();
            // Golden-section refinement inside the winning bracket.
            let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
                if wt(a) < wt(b) { hi = b } else { lo = a }
            }
            let sweep = wt(0.5 * (lo + hi)).min(wt(best as f64 * step));
            prop_assert!((width_along(&h, d) - w).abs() < 1e-12);
            prop_assert!((sweep - w).abs() <= 1e-9, "{} vs {}", sweep, w);
        }

        #[test]
        fn centroid_cuts_respect_grunbaum(seed in any::<u64>(), theta in 0.0f64..PI) {
            let mut rng = stream(seed, purpose::DIAGNOSTIC, 3);
            let pts: Vec<Vertex> = (0..10).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let h = convex_hull(&pts);
            prop_assume!(h.len() >= 3);
            let c = centroid(&h);
            let a = [theta.cos(), theta.sin()];
            let part = polygon_area(&clip_halfplane(&h, a, dot2(a, c))) / polygon_area(&h);
            prop_assert!((4.0 / 9.0 - 1e-9..=5.0 / 9.0 + 1e-9).contains(&part));
        }
    }
}
