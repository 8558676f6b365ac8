//! Points, halfspaces, polytopes and the star-body oracle interface.
//!
//! Membership is closed everywhere (`<=` comparisons, no tolerance inside the
//! oracles). The k-of-m families store an explicit witness of the full
//! intersection, which is also the point their kernel oracle is built around.

use std::fmt;
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝⁿ with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point has no coordinates".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    /// Wraps coordinates produced by arithmetic on finite inputs.
    pub(crate) fn from_finite(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `{x : normal·x <= offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    #[serde(rename = "a")]
    pub normal: Vec<f64>,
    #[serde(rename = "b")]
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::InvalidParameter("non-finite halfspace".into()));
        }
        if normal.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter("halfspace normal is zero".into()));
        }
        Ok(Halfspace { normal, offset })
    }

    pub fn dimension(&self) -> usize {
        self.normal.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) <= self.offset
    }

    /// Euclidean distance from `x` to the boundary, positive inside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        (self.offset - dot(&self.normal, x)) / norm(&self.normal)
    }

    fn validate(&self) -> Result<()> {
        Halfspace::new(self.normal.clone(), self.offset).map(|_| ())
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        BoundingBox { lo, hi }
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        BoundingBox::new(vec![-half_width; n], vec![half_width; n])
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (i, v) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *v = self.lo[i] + u * (self.hi[i] - self.lo[i]);
        }
    }

    /// Largest distance from `x` to a corner of the box.
    pub fn farthest_corner_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| {
                let d = (v - a).abs().max((b - v).abs());
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn diagonal(&self) -> f64 {
        distance(&self.lo, &self.hi)
    }
}

/// A star-shaped body presented by oracles.
///
/// Contract: `contains(interior_point())` and `kernel_contains(interior_point())`
/// hold; `kernel_contains(x)` implies `contains(x)`; `contains(x)` implies
/// `‖x‖ <= radius_bound()`; the ball of radius `kernel_inner_radius()` around
/// the interior point lies in the kernel.
pub trait StarBody: Send + Sync {
    fn dimension(&self) -> usize;

    fn contains(&self, x: &[f64]) -> bool;

    fn kernel_contains(&self, x: &[f64]) -> bool;

    fn interior_point(&self) -> Point;

    /// `D` with `S ⊆ B(0, D)`.
    fn radius_bound(&self) -> f64;

    /// Radius of a ball around `interior_point()` contained in the kernel.
    fn kernel_inner_radius(&self) -> f64;

    fn bounding_box(&self) -> BoundingBox {
        BoundingBox::cube(self.dimension(), self.radius_bound())
    }

    /// Upper bound on the diameter of the body.
    fn diameter_bound(&self) -> f64 {
        2.0 * self.radius_bound()
    }

    fn check_contains(&self, x: &[f64]) -> Result<bool> {
        check_dimension(self.dimension(), x.len())?;
        Ok(self.contains(x))
    }

    fn check_kernel_contains(&self, x: &[f64]) -> Result<bool> {
        check_dimension(self.dimension(), x.len())?;
        Ok(self.kernel_contains(x))
    }
}

pub(crate) fn check_dimension(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

macro_rules! forward_star_body {
    ($($ty:ty),*) => {$(
        impl<B: StarBody + ?Sized> StarBody for $ty {
            fn dimension(&self) -> usize { (**self).dimension() }
            #[inline]
            fn contains(&self, x: &[f64]) -> bool { (**self).contains(x) }
            #[inline]
            fn kernel_contains(&self, x: &[f64]) -> bool { (**self).kernel_contains(x) }
            fn interior_point(&self) -> Point { (**self).interior_point() }
            fn radius_bound(&self) -> f64 { (**self).radius_bound() }
            fn kernel_inner_radius(&self) -> f64 { (**self).kernel_inner_radius() }
            fn bounding_box(&self) -> BoundingBox { (**self).bounding_box() }
            fn diameter_bound(&self) -> f64 { (**self).diameter_bound() }
        }
    )*};
}

forward_star_body!(&B, Box<B>, Arc<B>);

pub type SharedBody = Arc<dyn StarBody>;

/// Presents the kernel oracle of a body as a (convex) body of its own.
pub struct KernelView<B>(pub B);

impl<B: StarBody> StarBody for KernelView<B> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.0.kernel_contains(x)
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.0.kernel_contains(x)
    }
    fn interior_point(&self) -> Point {
        self.0.interior_point()
    }
    fn radius_bound(&self) -> f64 {
        self.0.radius_bound()
    }
    fn kernel_inner_radius(&self) -> f64 {
        self.0.kernel_inner_radius()
    }
    fn bounding_box(&self) -> BoundingBox {
        self.0.bounding_box()
    }
    fn diameter_bound(&self) -> f64 {
        self.0.diameter_bound()
    }
}

/// Intersection of a convex body with a ball; used by the multiphase volume
/// schedule.
pub struct BallSection<B> {
    pub body: B,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl<B: StarBody> StarBody for BallSection<B> {
    fn dimension(&self) -> usize {
        self.body.dimension()
    }
    fn contains(&self, x: &[f64]) -> bool {
        distance(x, &self.center) <= self.radius && self.body.contains(x)
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        distance(x, &self.center) <= self.radius && self.body.kernel_contains(x)
    }
    fn interior_point(&self) -> Point {
        Point::from_finite(self.center.clone())
    }
    fn radius_bound(&self) -> f64 {
        (norm(&self.center) + self.radius).min(self.body.radius_bound())
    }
    fn kernel_inner_radius(&self) -> f64 {
        self.body.kernel_inner_radius().min(self.radius)
    }
    fn bounding_box(&self) -> BoundingBox {
        let bb = self.body.bounding_box();
        let lo = bb.lo.iter().zip(&self.center).map(|(l, c)| l.max(c - self.radius)).collect();
        let hi = bb.hi.iter().zip(&self.center).map(|(h, c)| h.min(c + self.radius)).collect();
        BoundingBox::new(lo, hi)
    }
}

/// Counts oracle calls. Counters are atomic so totals do not depend on how
/// work is spread over threads.
pub struct CountingBody<B> {
    inner: B,
    membership: AtomicU64,
    kernel: AtomicU64,
}

impl<B> CountingBody<B> {
    pub fn new(inner: B) -> Self {
        CountingBody { inner, membership: AtomicU64::new(0), kernel: AtomicU64::new(0) }
    }

    pub fn membership_calls(&self) -> u64 {
        self.membership.load(Ordering::Relaxed)
    }

    pub fn kernel_calls(&self) -> u64 {
        self.kernel.load(Ordering::Relaxed)
    }
}

impl<B: StarBody> StarBody for CountingBody<B> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.membership.fetch_add(1, Ordering::Relaxed);
        self.inner.contains(x)
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.kernel.fetch_add(1, Ordering::Relaxed);
        self.inner.kernel_contains(x)
    }
    fn interior_point(&self) -> Point {
        self.inner.interior_point()
    }
    fn radius_bound(&self) -> f64 {
        self.inner.radius_bound()
    }
    fn kernel_inner_radius(&self) -> f64 {
        self.inner.kernel_inner_radius()
    }
    fn bounding_box(&self) -> BoundingBox {
        self.inner.bounding_box()
    }
    fn diameter_bound(&self) -> f64 {
        self.inner.diameter_bound()
    }
}

/// Visits every `k`-subset of `0..m` in lexicographic order.
pub(crate) fn for_each_combination(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + m - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Intersection of finitely many halfspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polytope {
    pub halfspaces: Vec<Halfspace>,
}

const VERTEX_TOL: f64 = 1e-9;

impl Polytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let first = halfspaces
            .first()
            .ok_or_else(|| Error::InvalidParameter("polytope needs at least one halfspace".into()))?;
        let n = first.dimension();
        for h in &halfspaces {
            h.validate()?;
            check_dimension(n, h.dimension())?;
        }
        Ok(Polytope { halfspaces })
    }

    pub fn dimension(&self) -> usize {
        self.halfspaces[0].dimension()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }

    /// Distance from `x` to the nearest facet hyperplane (negative if outside).
    pub fn inner_radius_at(&self, x: &[f64]) -> f64 {
        self.halfspaces.iter().map(|h| h.slack(x)).fold(f64::INFINITY, f64::min)
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_fn(self.halfspaces.len(), n, |i, j| self.halfspaces[i].normal[j])
    }

    /// True iff the polyhedron has no recession direction: the normals have
    /// full rank and no extreme ray `d` of `{d : A d <= 0}` exists.
    pub fn is_bounded(&self) -> bool {
        let n = self.dimension();
        let a = self.matrix();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rank = a.clone().svd(false, false).rank(1e-10 * scale.max(1.0));
        if rank < n {
            return false;
        }
        let m = self.halfspaces.len();
        let mut bounded = true;
        for_each_combination(m, n - 1, |rows| {
            if !bounded {
                return;
            }
            let mut sub = DMatrix::<f64>::zeros(n, n);
            for (r, &i) in rows.iter().enumerate() {
                sub.row_mut(r).copy_from(&a.row(i));
            }
            let svd = sub.svd(false, true);
            let sv = &svd.singular_values;
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let tol = 1e-10 * smax.max(1.0);
            let small: Vec<usize> = (0..n).filter(|&i| sv[i] <= tol).collect();
            if small.len() != 1 {
                return;
            }
            let vt = svd.v_t.as_ref().expect("requested v_t");
            let d: Vec<f64> = vt.row(small[0]).iter().cloned().collect();
            for sign in [1.0, -1.0] {
                let ok = (0..m)
                    .all(|i| sign * dot(&self.halfspaces[i].normal, &d) <= 1e-12 * norm(&self.halfspaces[i].normal));
                if ok {
                    bounded = false;
                }
            }
        });
        bounded
    }

    /// Vertices by brute-force enumeration of `n`-subsets of facets.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let a = self.matrix();
        let m = self.halfspaces.len();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for_each_combination(m, n, |rows| {
            let sub = DMatrix::from_fn(n, n, |r, c| a[(rows[r], c)]);
            let rhs = DVector::from_fn(n, |r, _| self.halfspaces[rows[r]].offset);
            let Some(sol) = sub.lu().solve(&rhs) else { return };
            let x: Vec<f64> = sol.iter().cloned().collect();
            if x.iter().any(|v| !v.is_finite()) {
                return;
            }
            let feasible = self.halfspaces.iter().all(|h| {
                dot(&h.normal, &x) <= h.offset + VERTEX_TOL * (1.0 + h.offset.abs()) * norm(&h.normal).max(1.0)
            });
            if feasible && !out.iter().any(|v| distance(v, &x) < 1e-9) {
                out.push(x);
            }
        });
        out
    }

    /// Bounding box and radius bound certified from the vertex set.
    pub fn certify_bounds(&self) -> Result<(BoundingBox, f64)> {
        if !self.is_bounded() {
            return Err(Error::InvalidSpec("polytope is unbounded; radius bound cannot be certified".into()));
        }
        let verts = self.vertices();
        if verts.is_empty() {
            return Err(Error::InvalidSpec("polytope is empty".into()));
        }
        let n = self.dimension();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut radius: f64 = 0.0;
        for v in &verts {
            for i in 0..n {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
            radius = radius.max(norm(v));
        }
        Ok((BoundingBox::new(lo, hi), radius))
    }
}

fn merge_boxes(boxes: &[BoundingBox]) -> BoundingBox {
    let n = boxes[0].dimension();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for b in boxes {
        for i in 0..n {
            lo[i] = lo[i].min(b.lo[i]);
            hi[i] = hi[i].max(b.hi[i]);
        }
    }
    BoundingBox::new(lo, hi)
}

fn resolve_radius(certified: f64, declared: Option<f64>) -> Result<f64> {
    match declared {
        Some(d) if !(d.is_finite() && d > 0.0) => {
            Err(Error::InvalidSpec(format!("radius_bound {d} must be positive and finite")))
        }
        Some(d) if d < certified * (1.0 - 1e-12) => Err(Error::InvalidSpec(format!(
            "declared radius_bound {d} is smaller than the certified bound {certified}"
        ))),
        Some(d) => Ok(d),
        None => Ok(certified),
    }
}

/// Points satisfying at least `k` of `m` linear inequalities (and every box
/// constraint). The kernel oracle tests all `m` inequalities.
#[derive(Debug, Clone)]
pub struct KOfMHalfspaces {
    k: usize,
    halfspaces: Vec<Halfspace>,
    box_bound: Vec<Halfspace>,
    witness: Point,
    radius: f64,
    inner_radius: f64,
    bbox: BoundingBox,
}

impl KOfMHalfspaces {
    pub fn new(
        k: usize,
        halfspaces: Vec<Halfspace>,
        box_bound: Option<Vec<Halfspace>>,
        witness: Point,
        radius_bound: Option<f64>,
    ) -> Result<Self> {
        let m = halfspaces.len();
        if k == 0 || k > m {
            return Err(Error::InvalidSpec(format!("need 1 <= k <= m, got k = {k}, m = {m}")));
        }
        let n = witness.dimension();
        let box_bound = box_bound.unwrap_or_default();
        for h in halfspaces.iter().chain(&box_bound) {
            h.validate()?;
            check_dimension(n, h.dimension())?;
        }
        if !halfspaces.iter().chain(&box_bound).all(|h| h.contains(&witness)) {
            return Err(Error::InvalidSpec("witness x0 violates a constraint of the full intersection".into()));
        }
        let (bbox, certified) = if !box_bound.is_empty() {
            Polytope::new(box_bound.clone())?.certify_bounds()?
        } else if k == m {
            Polytope::new(halfspaces.clone())?.certify_bounds()?
        } else {
            return Err(Error::InvalidSpec(
                "k < m without box_bound: the body is unbounded and radius_bound cannot be certified".into(),
            ));
        };
        let radius = resolve_radius(certified, radius_bound)?;
        let inner_radius =
            halfspaces.iter().chain(&box_bound).map(|h| h.slack(&witness)).fold(f64::INFINITY, f64::min).max(0.0);
        Ok(KOfMHalfspaces { k, halfspaces, box_bound, witness, radius, inner_radius, bbox })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn box_bound(&self) -> &[Halfspace] {
        &self.box_bound
    }

    pub fn witness(&self) -> &Point {
        &self.witness
    }

    fn in_box(&self, x: &[f64]) -> bool {
        self.box_bound.iter().all(|h| h.contains(x))
    }
}

impl StarBody for KOfMHalfspaces {
    fn dimension(&self) -> usize {
        self.witness.dimension()
    }

    fn contains(&self, x: &[f64]) -> bool {
        if !self.in_box(x) {
            return false;
        }
        let mut satisfied = 0;
        for (i, h) in self.halfspaces.iter().enumerate() {
            if h.contains(x) {
                satisfied += 1;
                if satisfied >= self.k {
                    return true;
                }
            } else if satisfied + (self.halfspaces.len() - i - 1) < self.k {
                return false;
            }
        }
        satisfied >= self.k
    }

    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.in_box(x) && self.halfspaces.iter().all(|h| h.contains(x))
    }

    fn interior_point(&self) -> Point {
        self.witness.clone()
    }

    fn radius_bound(&self) -> f64 {
        self.radius
    }

    fn kernel_inner_radius(&self) -> f64 {
        self.inner_radius
    }

    fn bounding_box(&self) -> BoundingBox {
        self.bbox.clone()
    }

    fn diameter_bound(&self) -> f64 {
        self.bbox.diagonal().min(2.0 * self.radius)
    }
}

/// Points lying in at least `k` of `m` polytopes with a common point.
#[derive(Debug, Clone)]
pub struct KOfMPolytopes {
    k: usize,
    polytopes: Vec<Polytope>,
    witness: Point,
    radius: f64,
    inner_radius: f64,
    bbox: BoundingBox,
}

impl KOfMPolytopes {
    pub fn new(k: usize, polytopes: Vec<Polytope>, witness: Point, radius_bound: Option<f64>) -> Result<Self> {
        let m = polytopes.len();
        if k == 0 || k > m {
            return Err(Error::InvalidSpec(format!("need 1 <= k <= m, got k = {k}, m = {m}")));
        }
        let n = witness.dimension();
        for p in &polytopes {
            check_dimension(n, p.dimension())?;
        }
        if !polytopes.iter().all(|p| p.contains(&witness)) {
            return Err(Error::InvalidSpec("witness x0 is not in every polytope".into()));
        }
        let mut boxes = Vec::with_capacity(m);
        let mut certified: f64 = 0.0;
        for p in &polytopes {
            let (b, r) = p.certify_bounds()?;
            boxes.push(b);
            certified = certified.max(r);
        }
        let radius = resolve_radius(certified, radius_bound)?;
        let inner_radius = polytopes.iter().map(|p| p.inner_radius_at(&witness)).fold(f64::INFINITY, f64::min).max(0.0);
        Ok(KOfMPolytopes { k, polytopes, witness, radius, inner_radius, bbox: merge_boxes(&boxes) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn polytopes(&self) -> &[Polytope] {
        &self.polytopes
    }

    pub fn witness(&self) -> &Point {
        &self.witness
    }
}

impl StarBody for KOfMPolytopes {
    fn dimension(&self) -> usize {
        self.witness.dimension()
    }

    fn contains(&self, x: &[f64]) -> bool {
        let mut hits = 0;
        for p in &self.polytopes {
            if p.contains(x) {
                hits += 1;
                if hits >= self.k {
                    return true;
                }
            }
        }
        false
    }

    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.polytopes.iter().all(|p| p.contains(x))
    }

    fn interior_point(&self) -> Point {
        self.witness.clone()
    }

    fn radius_bound(&self) -> f64 {
        self.radius
    }

    fn kernel_inner_radius(&self) -> f64 {
        self.inner_radius
    }

    fn bounding_box(&self) -> BoundingBox {
        self.bbox.clone()
    }

    fn diameter_bound(&self) -> f64 {
        self.bbox.diagonal().min(2.0 * self.radius)
    }
}

/// Largest condition number accepted for an affine map.
pub const MAX_CONDITION: f64 = 1e12;

/// Image `{A y + shift : y ∈ inner}` of a body under an invertible affine map.
pub struct AffineImage {
    inner: SharedBody,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    shift: Vec<f64>,
    sigma_max: f64,
    sigma_min: f64,
}

impl fmt::Debug for AffineImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineImage").field("matrix", &self.matrix).field("shift", &self.shift).finish()
    }
}

impl AffineImage {
    pub fn new(inner: SharedBody, matrix: DMatrix<f64>, shift: Vec<f64>) -> Result<Self> {
        let n = inner.dimension();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        check_dimension(n, shift.len())?;
        if matrix.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("affine map has non-finite entries".into()));
        }
        let sv = matrix.clone().svd(false, false).singular_values;
        let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
        let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(Error::SingularMap(cond));
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::SingularMap(cond))?;
        Ok(AffineImage { inner, matrix, inverse, shift, sigma_max, sigma_min })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn inner(&self) -> &SharedBody {
        &self.inner
    }

    /// `A⁻¹ (x − shift)`.
    pub fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.inverse[(i, j)] * (x[j] - self.shift[j]);
            }
            y[i] = acc;
        }
        y
    }

    /// `A y + shift`.
    pub fn push_forward(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * y[j]).sum::<f64>() + self.shift[i]).collect()
    }
}

impl StarBody for AffineImage {
    fn dimension(&self) -> usize {
        self.shift.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.inner.contains(&self.pull_back(x))
    }

    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.inner.kernel_contains(&self.pull_back(x))
    }

    fn interior_point(&self) -> Point {
        Point::from_finite(self.push_forward(&self.inner.interior_point()))
    }

    fn radius_bound(&self) -> f64 {
        self.sigma_max * self.inner.radius_bound() + norm(&self.shift)
    }

    fn kernel_inner_radius(&self) -> f64 {
        self.sigma_min * self.inner.kernel_inner_radius()
    }

    fn bounding_box(&self) -> BoundingBox {
        let n = self.dimension();
        if n > 12 {
            let r = self.radius_bound();
            return BoundingBox::cube(n, r);
        }
        let inner = self.inner.bounding_box();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut corner = vec![0.0; n];
        for mask in 0u32..(1 << n) {
            for i in 0..n {
                corner[i] = if mask & (1 << i) != 0 { inner.hi[i] } else { inner.lo[i] };
            }
            let img = self.push_forward(&corner);
            for i in 0..n {
                lo[i] = lo[i].min(img[i]);
                hi[i] = hi[i].max(img[i]);
            }
        }
        BoundingBox::new(lo, hi)
    }

    fn diameter_bound(&self) -> f64 {
        (self.sigma_max * self.inner.diameter_bound()).min(2.0 * self.radius_bound())
    }
}

/// Wraps `inner` as its image under `x ↦ map·x + shift`.
pub fn affine_image(inner: SharedBody, map: DMatrix<f64>, shift: Vec<f64>) -> Result<AffineImage> {
    AffineImage::new(inner, map, shift)
}

/// Checks `samples` evenly spaced points of `[a, b]` (endpoints included)
/// against the membership oracle. One-sided: `true` does not prove
/// `[a, b] ⊆ S`.
pub fn segment_in_body<B: StarBody + ?Sized>(body: &B, a: &[f64], b: &[f64], samples: usize) -> bool {
    let samples = samples.max(2);
    let mut x = vec![0.0; a.len()];
    (0..samples).all(|i| {
        let t = i as f64 / (samples - 1) as f64;
        for j in 0..a.len() {
            x[j] = (1.0 - t) * a[j] + t * b[j];
        }
        body.contains(&x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_ball, make_cube};
    use crate::rng::{purpose, stream};

    fn hs(a: &[f64], b: f64) -> Halfspace {
        Halfspace::new(a.to_vec(), b).unwrap()
    }

    fn square_constraints() -> Vec<Halfspace> {
        vec![hs(&[1.0, 0.0], 1.0), hs(&[0.0, 1.0], 1.0), hs(&[-1.0, 0.0], 1.0), hs(&[0.0, -1.0], 1.0)]
    }

    fn unit_box(lo: f64, hi: f64) -> Vec<Halfspace> {
        vec![hs(&[1.0, 0.0], hi), hs(&[0.0, 1.0], hi), hs(&[-1.0, 0.0], -lo), hs(&[0.0, -1.0], -lo)]
    }

    fn quadrant_body() -> KOfMHalfspaces {
        KOfMHalfspaces::new(
            1,
            vec![hs(&[1.0, 0.0], 0.0), hs(&[0.0, 1.0], 0.0)],
            Some(unit_box(-1.0, 1.0)),
            Point::new(vec![-0.5, -0.5]).unwrap(),
            None,
        )
        .unwrap()
    }

    /// Unit squares [0,1]² and [-1,0]² touching at the origin.
    fn corner_squares() -> KOfMPolytopes {
        let a = Polytope::new(unit_box(0.0, 1.0)).unwrap();
        let b = Polytope::new(unit_box(-1.0, 0.0)).unwrap();
        KOfMPolytopes::new(1, vec![a, b], Point::origin(2), None).unwrap()
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn halfspace_rejects_zero_normal() {
        assert!(Halfspace::new(vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn k_of_m_witness_is_member_and_kernel() {
        let body = KOfMHalfspaces::new(4, square_constraints(), None, Point::origin(2), None).unwrap();
        assert!(body.contains(&[0.0, 0.0]));
        assert!(body.kernel_contains(&[0.0, 0.0]));
        assert!(!body.check_contains(&[2.0, 0.0]).unwrap());
        assert!((body.radius_bound() - 2f64.sqrt()).abs() < 1e-12);
        assert!((body.kernel_inner_radius() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_of_m_counts_constraints() {
        let body = quadrant_body();
        assert!(body.contains(&[0.5, -0.5]));
        assert!(!body.kernel_contains(&[0.5, -0.5]));
        assert!(!body.contains(&[0.5, 0.5]));
        assert!(!body.contains(&[-1.5, -0.5]));
    }

    #[test]
    fn k_of_m_dimension_mismatch() {
        let body = quadrant_body();
        assert!(matches!(body.check_contains(&[0.0, 0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(body.check_kernel_contains(&[0.0]).is_err());
    }

    #[test]
    fn k_of_m_rejects_missing_box_and_bad_witness() {
        let open =
            KOfMHalfspaces::new(1, vec![hs(&[1.0, 0.0], 0.0), hs(&[0.0, 1.0], 0.0)], None, Point::origin(2), None);
        assert!(matches!(open, Err(Error::InvalidSpec(_))));
        let bad = KOfMHalfspaces::new(4, square_constraints(), None, Point::new(vec![3.0, 0.0]).unwrap(), None);
        assert!(bad.is_err());
        let k0 = KOfMHalfspaces::new(0, square_constraints(), None, Point::origin(2), None);
        assert!(k0.is_err());
        let small_d = KOfMHalfspaces::new(4, square_constraints(), None, Point::origin(2), Some(1.0));
        assert!(small_d.is_err());
    }

    #[test]
    fn convex_case_kernel_equals_body() {
        let body = KOfMHalfspaces::new(4, square_constraints(), None, Point::origin(2), None).unwrap();
        let mut rng = stream(3, purpose::PILOT, 0);
        let bb = BoundingBox::cube(2, 1.5);
        let mut x = [0.0; 2];
        for _ in 0..1000 {
            bb.sample_into(&mut rng, &mut x);
            assert_eq!(body.contains(&x), body.kernel_contains(&x));
        }
    }

    #[test]
    fn polytope_union_membership() {
        let body = corner_squares();
        assert!(body.contains(&[0.0, 0.0]));
        assert!(body.kernel_contains(&[0.0, 0.0]));
        assert!(body.contains(&[0.5, 0.5]));
        let two = KOfMPolytopes::new(2, body.polytopes().to_vec(), Point::origin(2), None).unwrap();
        assert!(!two.contains(&[0.5, 0.5]));
        assert!(two.contains(&[0.0, 0.0]));
    }

    #[test]
    fn segment_certificate() {
        let ball = make_ball(2, 1.0).unwrap();
        assert!(segment_in_body(&ball, &[0.0, 0.0], &[0.0, 0.0], 2));
        assert!(segment_in_body(&ball, &[0.9, 0.0], &[-0.9, 0.0], 100));
        let squares = corner_squares();
        // Midpoint (0, 0.5)... lies in neither square.
        assert!(!segment_in_body(&squares, &[0.5, 0.9], &[-0.5, 0.1], 64));
    }

    #[test]
    fn unbounded_polytope_is_detected() {
        let strip = Polytope::new(vec![hs(&[1.0, 0.0], 1.0), hs(&[-1.0, 0.0], 1.0)]).unwrap();
        assert!(!strip.is_bounded());
        let wedge = Polytope::new(vec![hs(&[-1.0, 0.0], 0.0), hs(&[0.0, -1.0], 0.0), hs(&[1.0, -1.0], 0.0)]).unwrap();
        assert!(!wedge.is_bounded());
        let tri = Polytope::new(vec![hs(&[-1.0, 0.0], 0.0), hs(&[0.0, -1.0], 0.0), hs(&[1.0, 1.0], 1.0)]).unwrap();
        assert!(tri.is_bounded());
        let (bb, r) = tri.certify_bounds().unwrap();
        assert_eq!(bb.lo, vec![0.0, 0.0]);
        assert!((bb.hi[0] - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_identity_and_scaling() {
        let ball: SharedBody = Arc::new(make_ball(2, 1.0).unwrap());
        let id = affine_image(ball.clone(), DMatrix::identity(2, 2), vec![0.0, 0.0]).unwrap();
        let mut rng = stream(4, purpose::PILOT, 0);
        let bb = BoundingBox::cube(2, 1.5);
        let mut x = [0.0; 2];
        for _ in 0..1000 {
            bb.sample_into(&mut rng, &mut x);
            assert_eq!(id.contains(&x), ball.contains(&x));
        }
        let doubled = affine_image(ball.clone(), DMatrix::identity(2, 2) * 2.0, vec![0.0, 0.0]).unwrap();
        assert!(doubled.contains(&[1.5, 0.0]));
        assert!(!ball.contains(&[1.5, 0.0]));
        assert!((doubled.radius_bound() - 2.0).abs() < 1e-12);
        let moved = affine_image(ball, DMatrix::identity(2, 2), vec![3.0, -1.0]).unwrap();
        assert!(moved.contains(&[3.0, -1.0]));
        assert!(!moved.contains(&[0.0, 0.0]));
        assert_eq!(moved.interior_point().coords(), &[3.0, -1.0]);
    }

    #[test]
    fn affine_rejects_singular() {
        let ball: SharedBody = Arc::new(make_ball(2, 1.0).unwrap());
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(affine_image(ball, sing, vec![0.0, 0.0]), Err(Error::SingularMap(_))));
    }

    #[test]
    fn affine_composition() {
        let cube: SharedBody = Arc::new(make_cube(2, 1.0).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.4, 1.1]);
        let s1 = vec![0.2, -0.1];
        let s2 = vec![-0.5, 0.3];
        let first: SharedBody = Arc::new(affine_image(cube.clone(), a.clone(), s1.clone()).unwrap());
        let nested = affine_image(first, b.clone(), s2.clone()).unwrap();
        let s1v = DVector::from_vec(s1);
        let shift: Vec<f64> = (&b * s1v + DVector::from_vec(s2)).iter().cloned().collect();
        let direct = affine_image(cube, &b * &a, shift).unwrap();
        let mut rng = stream(5, purpose::PILOT, 0);
        let bb = BoundingBox::cube(2, 4.0);
        let mut x = [0.0; 2];
        let mut disagreements = 0;
        for _ in 0..1000 {
            bb.sample_into(&mut rng, &mut x);
            if nested.contains(&x) != direct.contains(&x) {
                disagreements += 1;
            }
        }
        // Only points within rounding of the boundary may differ.
        assert!(disagreements <= 1, "{disagreements} disagreements");
    }

    #[test]
    fn combinations_enumerate_binomial() {
        let mut count = 0;
        for_each_combination(6, 3, |c| {
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            count += 1;
        });
        assert_eq!(count, 20);
        let mut empty = 0;
        for_each_combination(4, 0, |c| {
            assert!(c.is_empty());
            empty += 1;
        });
        assert_eq!(empty, 1);
    }
}
