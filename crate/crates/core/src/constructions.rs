//! Calibration bodies (ball, cube) and the glued-cones family with its
//! cross-sectional densities along the x₁ axis.
//!
//! With `c = √(n(n+2))` and `l` fixed by `(1 − l/c)ⁿ = η`, the body is
//! `ρ ≤ 1 − (l − |x₁|)/c` and its kernel is `ρ ≤ 1 − (l + |x₁|)/c`, both for
//! `|x₁| ≤ l`, where `ρ` is the transverse radius divided by `axis_scale`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{norm, BoundingBox, Point, StarBody};
use crate::quad::integrate_piecewise;
use crate::rng::{purpose, stream, uniform_in_ball, StreamRng};

/// Exact (non-Markov) uniform sampler for a body.
pub trait ExactSampler: Sync {
    fn sample_dimension(&self) -> usize;

    /// Writes one uniform point into `out`; returns the number of attempts.
    fn sample_exact(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64>;
}

/// `count` independent exact samples; sample `i` uses its own stream.
pub fn exact_samples<S: ExactSampler + ?Sized>(sampler: &S, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = sampler.sample_dimension();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, purpose::REJECTION, i as u64);
            let mut x = vec![0.0; n];
            sampler.sample_exact(&mut rng, &mut x)?;
            Ok(x)
        })
        .collect()
}

/// Rejection from the bounding box of an arbitrary body.
pub struct BoxRejection<B> {
    pub body: B,
    pub bbox: BoundingBox,
    pub max_attempts: u64,
    pub kernel: bool,
}

impl<B: StarBody> BoxRejection<B> {
    pub fn new(body: B) -> Self {
        let bbox = body.bounding_box();
        BoxRejection { body, bbox, max_attempts: 10_000_000, kernel: false }
    }

    /// Samples the kernel instead of the body.
    pub fn kernel(body: B) -> Self {
        BoxRejection { kernel: true, ..BoxRejection::new(body) }
    }
}

impl<B: StarBody> ExactSampler for BoxRejection<B> {
    fn sample_dimension(&self) -> usize {
        self.body.dimension()
    }

    fn sample_exact(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        for attempt in 1..=self.max_attempts {
            self.bbox.sample_into(rng, out);
            let hit = if self.kernel { self.body.kernel_contains(out) } else { self.body.contains(out) };
            if hit {
                return Ok(attempt);
            }
        }
        Err(Error::KernelRejection { attempts: self.max_attempts })
    }
}

/// Euclidean ball of radius `r` centred at the origin.
#[derive(Debug, Clone)]
pub struct Ball {
    n: usize,
    r: f64,
}

pub fn make_ball(n: usize, r: f64) -> Result<Ball> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius {r} must be positive")));
    }
    Ok(Ball { n, r })
}

impl Ball {
    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.n, self.r)
    }
}

impl StarBody for Ball {
    fn dimension(&self) -> usize {
        self.n
    }
    fn contains(&self, x: &[f64]) -> bool {
        norm(x) <= self.r
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.contains(x)
    }
    fn interior_point(&self) -> Point {
        Point::origin(self.n)
    }
    fn radius_bound(&self) -> f64 {
        self.r
    }
    fn kernel_inner_radius(&self) -> f64 {
        self.r
    }
}

impl ExactSampler for Ball {
    fn sample_dimension(&self) -> usize {
        self.n
    }
    fn sample_exact(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        uniform_in_ball(rng, self.r, out);
        Ok(1)
    }
}

/// Volume of the `n`-ball of radius `r`, by the two-step recursion
/// `V_n = 2π/n · V_{n−2}`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    let mut v = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v * r.powi(n as i32)
}

/// Cube `[−h, h]ⁿ`.
#[derive(Debug, Clone)]
pub struct Cube {
    n: usize,
    h: f64,
}

pub fn make_cube(n: usize, half_width: f64) -> Result<Cube> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidParameter(format!("cube half width {half_width} must be positive")));
    }
    Ok(Cube { n, h: half_width })
}

impl Cube {
    pub fn half_width(&self) -> f64 {
        self.h
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.h).powi(self.n as i32)
    }
}

impl StarBody for Cube {
    fn dimension(&self) -> usize {
        self.n
    }
    fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.h)
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.contains(x)
    }
    fn interior_point(&self) -> Point {
        Point::origin(self.n)
    }
    fn radius_bound(&self) -> f64 {
        self.h * (self.n as f64).sqrt()
    }
    fn kernel_inner_radius(&self) -> f64 {
        self.h
    }
    fn bounding_box(&self) -> BoundingBox {
        BoundingBox::cube(self.n, self.h)
    }
}

impl ExactSampler for Cube {
    fn sample_dimension(&self) -> usize {
        self.n
    }
    fn sample_exact(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        for v in out.iter_mut() {
            *v = self.h * (2.0 * rng.random::<f64>() - 1.0);
        }
        Ok(1)
    }
}

/// Two truncated rotational cones glued at their narrow ends.
#[derive(Debug, Clone)]
pub struct GluedCones {
    n: usize,
    eta: f64,
    l: f64,
    c: f64,
    axis_scale: f64,
}

/// `l_n = √(n(n+2))·(1 − η^{1/n})`.
pub fn truncation_length(n: usize, eta: f64) -> f64 {
    let nf = n as f64;
    (nf * (nf + 2.0)).sqrt() * (1.0 - eta.powf(1.0 / nf))
}

pub fn make_glued_cones(n: usize, eta: f64) -> Result<GluedCones> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("glued cones need n >= 2, got {n}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
    }
    let nf = n as f64;
    let c = (nf * (nf + 2.0)).sqrt();
    let l = truncation_length(n, eta);
    if 2.0 * l > c {
        return Err(Error::InvalidParameter(format!(
            "n = {n} is below the threshold for eta = {eta}: 2·l_n = {} exceeds √(n(n+2)) = {c}",
            2.0 * l
        )));
    }
    Ok(GluedCones { n, eta, l, c, axis_scale: 1.0 })
}

impl GluedCones {
    /// Shrinks the directions orthogonal to x₁ by `s`.
    pub fn with_axis_scale(mut self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("axis_scale {s} must be positive")));
        }
        self.axis_scale = s;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn l_n(&self) -> f64 {
        self.l
    }

    pub fn axis_scale(&self) -> f64 {
        self.axis_scale
    }

    /// Transverse radius (unscaled) of the body at `x₁`, or `None` off the support.
    pub fn body_radius(&self, x1: f64) -> Option<f64> {
        (x1.abs() <= self.l).then(|| 1.0 - (self.l - x1.abs()) / self.c)
    }

    pub fn kernel_radius(&self, x1: f64) -> Option<f64> {
        (x1.abs() <= self.l).then(|| 1.0 - (self.l + x1.abs()) / self.c)
    }

    fn transverse(&self, x: &[f64]) -> f64 {
        x[1..].iter().map(|v| v * v).sum::<f64>().sqrt() / self.axis_scale
    }

    /// Kernel volume over body volume, in closed form:
    /// `(η − (1 − 2l/c)ⁿ) / (1 − η)`.
    pub fn kernel_fraction(&self) -> f64 {
        (self.eta - (1.0 - 2.0 * self.l / self.c).powi(self.n as i32)) / (1.0 - self.eta)
    }

    /// Exact volume of the body.
    pub fn volume(&self) -> f64 {
        // Each half is a frustum: ∫ V_{n−1}(s·r(t)) dt with r running from 1−l/c to 1.
        let nf = self.n as f64;
        let v = ball_volume(self.n - 1, self.axis_scale);
        2.0 * v * self.c / nf * (1.0 - self.eta)
    }
}

impl StarBody for GluedCones {
    fn dimension(&self) -> usize {
        self.n
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self.body_radius(x[0]) {
            Some(r) => self.transverse(x) <= r,
            None => false,
        }
    }

    fn kernel_contains(&self, x: &[f64]) -> bool {
        match self.kernel_radius(x[0]) {
            Some(r) => self.transverse(x) <= r,
            None => false,
        }
    }

    fn interior_point(&self) -> Point {
        Point::origin(self.n)
    }

    fn radius_bound(&self) -> f64 {
        self.l.hypot(self.axis_scale)
    }

    fn kernel_inner_radius(&self) -> f64 {
        let s = self.axis_scale;
        let cone = s * (1.0 - self.l / self.c) / (1.0 + s * s / (self.c * self.c)).sqrt();
        cone.min(self.l)
    }

    fn bounding_box(&self) -> BoundingBox {
        let mut lo = vec![-self.axis_scale; self.n];
        let mut hi = vec![self.axis_scale; self.n];
        lo[0] = -self.l;
        hi[0] = self.l;
        BoundingBox::new(lo, hi)
    }

    fn diameter_bound(&self) -> f64 {
        (2.0 * self.l).hypot(2.0 * self.axis_scale)
    }
}

impl ExactSampler for GluedCones {
    fn sample_dimension(&self) -> usize {
        self.n
    }

    /// Rejection from the cylinder `|x₁| ≤ l`, transverse radius `axis_scale`.
    fn sample_exact(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<u64> {
        let max_attempts = 10_000_000u64;
        for attempt in 1..=max_attempts {
            out[0] = self.l * (2.0 * rng.random::<f64>() - 1.0);
            uniform_in_ball(rng, self.axis_scale, &mut out[1..]);
            if self.contains(out) {
                return Ok(attempt);
            }
        }
        Err(Error::KernelRejection { attempts: max_attempts })
    }
}

/// Which of the four cross-sectional densities a [`Density1D`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Body,
    Kernel,
    AsymptoticBody,
    AsymptoticKernel,
}

/// A density on a closed interval, with closed-form CDF.
#[derive(Debug, Clone)]
pub struct Density1D {
    kind: DensityKind,
    n: usize,
    eta: f64,
    half_width: f64,
    c: f64,
    prefactor: f64,
    scale: f64,
    raw_body_mass: f64,
}

impl Density1D {
    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }

    /// Mass of the printed body formula before renormalization.
    pub fn raw_body_mass(&self) -> f64 {
        self.raw_body_mass
    }

    /// Factor applied to the printed formula.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The printed formula, without normalization.
    pub fn raw(&self, x: f64) -> f64 {
        if x.abs() > self.half_width {
            return 0.0;
        }
        let (l, c, nm1) = (self.half_width, self.c, self.n.saturating_sub(1) as i32);
        let p = self.prefactor;
        match self.kind {
            DensityKind::Body => p * (1.0 - (l - x.abs()) / c).powi(nm1),
            DensityKind::Kernel => p * (1.0 - (l + x.abs()) / c).powi(nm1),
            DensityKind::AsymptoticBody => p * x.abs().exp(),
            DensityKind::AsymptoticKernel => p * (-x.abs()).exp(),
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.scale * self.raw(x)
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        let (l, c) = (self.half_width, self.c);
        let x = x.clamp(-l, l);
        let p = self.prefactor;
        let nf = self.n as f64;
        let ni = self.n as i32;
        let pw = |t: f64| t.powi(ni);
        match self.kind {
            DensityKind::Body => {
                let half = p * c / nf * (1.0 - pw(1.0 - l / c));
                if x <= 0.0 {
                    p * c / nf * (1.0 - pw(1.0 - (l + x) / c))
                } else {
                    half + p * c / nf * (pw(1.0 - (l - x) / c) - pw(1.0 - l / c))
                }
            }
            DensityKind::Kernel => {
                let half = p * c / nf * (pw(1.0 - l / c) - pw(1.0 - 2.0 * l / c));
                if x <= 0.0 {
                    p * c / nf * (pw(1.0 - (l - x) / c) - pw(1.0 - 2.0 * l / c))
                } else {
                    half + p * c / nf * (pw(1.0 - l / c) - pw(1.0 - (l + x) / c))
                }
            }
            DensityKind::AsymptoticBody => {
                let eta = self.eta;
                if x <= 0.0 {
                    p * (1.0 / eta - (-x).exp())
                } else {
                    p * (1.0 / eta - 1.0) + p * (x.exp() - 1.0)
                }
            }
            DensityKind::AsymptoticKernel => {
                let eta = self.eta;
                if x <= 0.0 {
                    p * (x.exp() - eta)
                } else {
                    p * (1.0 - eta) + p * (1.0 - (-x).exp())
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.scale * self.raw_cdf(x)
    }

    pub fn mass(&self) -> f64 {
        self.cdf(self.half_width)
    }
}

fn finite_density(n: usize, eta: f64, kind: DensityKind) -> Result<Density1D> {
    let cones = make_glued_cones(n, eta)?;
    let nf = n as f64;
    let prefactor = 1.0 / (2.0 * (1.0 - eta)) * cones.c / nf;
    let mut d = Density1D {
        kind: DensityKind::Body,
        n,
        eta,
        half_width: cones.l,
        c: cones.c,
        prefactor,
        scale: 1.0,
        raw_body_mass: 0.0,
    };
    let l = cones.l;
    let body_mass = integrate_piecewise(&|x| d.raw(x), &[-l, 0.0, l], 1e-14);
    d.kind = kind;
    d.raw_body_mass = body_mass;
    d.scale = 1.0 / body_mass;
    Ok(d)
}

/// `f_n`, renormalized to unit mass by quadrature.
pub fn cross_density_body(n: usize, eta: f64) -> Result<Density1D> {
    finite_density(n, eta, DensityKind::Body)
}

/// `f_n^K`, divided by the same constant as `f_n` so that its mass is the
/// kernel fraction.
pub fn cross_density_kernel(n: usize, eta: f64) -> Result<Density1D> {
    finite_density(n, eta, DensityKind::Kernel)
}

/// The limiting pair `(f_η, f_η^K)` on `[−ln(1/η), ln(1/η)]`.
pub fn asymptotic_densities(eta: f64) -> Result<(Density1D, Density1D)> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
    }
    let base = Density1D {
        kind: DensityKind::AsymptoticBody,
        n: 0,
        eta,
        half_width: (1.0 / eta).ln(),
        c: f64::INFINITY,
        prefactor: eta / (2.0 * (1.0 - eta)),
        scale: 1.0,
        raw_body_mass: 1.0,
    };
    let kernel = Density1D { kind: DensityKind::AsymptoticKernel, ..base.clone() };
    Ok((base, kernel))
}

/// `f(0) / min{F(0), 1 − F(0)}` for a unit-mass density: the isoperimetric
/// coefficient of the cut at x₁ = 0.
pub fn center_cut_coefficient(d: &Density1D) -> f64 {
    let left = d.cdf(0.0);
    let right = d.mass() - left;
    d.evaluate(0.0) / left.min(right)
}

/// Rows `(x, f_n, f_n^K, f_η, f_η^K)` on `points` evenly spaced abscissae
/// covering both supports.
pub fn density_table(n: usize, eta: f64, points: usize) -> Result<Vec<[f64; 5]>> {
    let fb = cross_density_body(n, eta)?;
    let fk = cross_density_kernel(n, eta)?;
    let (ab, ak) = asymptotic_densities(eta)?;
    let half = fb.support().1.max(ab.support().1);
    let points = points.max(2);
    Ok((0..points)
        .map(|i| {
            let x = -half + 2.0 * half * i as f64 / (points - 1) as f64;
            [x, fb.evaluate(x), fk.evaluate(x), ab.evaluate(x), ak.evaluate(x)]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
    fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(order);
        for i in 1..=order {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let rule = gauss_legendre(20);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                rule.iter().map(|(x, w)| w * f(lo + 0.5 * h * (x + 1.0))).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    fn both_halves(f: impl Fn(f64) -> f64 + Copy, l: f64) -> f64 {
        gl_integrate(f, -l, 0.0, 8) + gl_integrate(f, 0.0, l, 8)
    }

    #[test]
    fn truncation_length_closed_form() {
        let l = truncation_length(2, 0.25);
        assert!((l - 8f64.sqrt() * 0.5).abs() < 1e-12);
        for (n, eta) in [(2, 0.25), (3, 0.5), (10, 0.1), (50, 0.5)] {
            let l = truncation_length(n, eta);
            let c = ((n * (n + 2)) as f64).sqrt();
            assert!(((1.0 - l / c).powi(n as i32) - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn glued_cones_membership() {
        let s = make_glued_cones(2, 0.25).unwrap();
        assert!(s.contains(&[0.0, 0.0]) && s.kernel_contains(&[0.0, 0.0]));
        assert!(s.contains(&[s.l_n(), 0.0]));
        assert!(s.contains(&[-s.l_n(), 0.0]));
        assert!(!s.contains(&[s.l_n() + 1e-9, 0.0]));
        // At the ends the body has unit radius, the kernel radius 1 − 2l/c.
        assert!(s.contains(&[s.l_n(), 1.0]));
        assert!(!s.kernel_contains(&[s.l_n(), 0.5]));
        assert!(s.kernel_contains(&[s.l_n(), 0.0]));
    }

    #[test]
    fn glued_cones_rejects_bad_parameters() {
        assert!(make_glued_cones(1, 0.5).is_err());
        assert!(make_glued_cones(3, 0.0).is_err());
        assert!(make_glued_cones(3, 1.0).is_err());
        // 2·l_2 ≤ √8 needs η ≥ 1/4 in the plane.
        assert!(make_glued_cones(2, 0.2).is_err());
        assert!(make_glued_cones(2, 0.25).is_ok());
    }

    #[test]
    fn raw_body_mass_is_n_plus_two_over_n() {
        for (n, eta) in [(2, 0.5), (3, 0.5), (5, 0.25), (10, 0.1)] {
            let f = cross_density_body(n, eta).unwrap();
            let l = f.support().1;
            let raw = both_halves(|x| f.raw(x), l);
            let expected = (n as f64 + 2.0) / n as f64;
            assert!((raw - expected).abs() < 1e-9, "n={n}: {raw} vs {expected}");
            assert!((f.raw_body_mass() - expected).abs() < 1e-9);
            assert!((both_halves(|x| f.evaluate(x), l) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn densities_symmetric_and_ordered() {
        let f = cross_density_body(4, 0.3).unwrap();
        let g = cross_density_kernel(4, 0.3).unwrap();
        let l = f.support().1;
        for i in 0..=50 {
            let x = l * i as f64 / 50.0;
            assert_eq!(f.evaluate(x), f.evaluate(-x));
            assert!(f.evaluate(x) >= f.evaluate(0.0));
            assert!(g.raw(x) <= f.raw(x) + 1e-15);
        }
        assert_eq!(f.raw(0.0), g.raw(0.0));
    }

    #[test]
    fn cdf_matches_quadrature() {
        for kind in [0, 1] {
            let d = if kind == 0 { cross_density_body(3, 0.5).unwrap() } else { cross_density_kernel(3, 0.5).unwrap() };
            let l = d.support().1;
            for x in [-l, -0.7 * l, -0.1, 0.0, 0.3 * l, l] {
                let q = gl_integrate(|t| d.evaluate(t), -l, x.min(0.0), 8)
                    + if x > 0.0 { gl_integrate(|t| d.evaluate(t), 0.0, x, 8) } else { 0.0 };
                assert!((d.cdf(x) - q).abs() < 1e-12, "kind {kind} x {x}: {} vs {q}", d.cdf(x));
            }
        }
    }

    #[test]
    fn kernel_mass_matches_closed_form_fraction() {
        for (n, eta) in [(2, 0.5), (3, 0.5), (6, 0.25)] {
            let g = cross_density_kernel(n, eta).unwrap();
            let l = g.support().1;
            let q = both_halves(|x| g.evaluate(x), l);
            let cones = make_glued_cones(n, eta).unwrap();
            assert!((q - cones.kernel_fraction()).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_mass_approaches_eta() {
        let g = cross_density_kernel(50, 0.5).unwrap();
        assert!((g.mass() - 0.5).abs() < 0.05, "{}", g.mass());
    }

    #[test]
    fn asymptotic_pair() {
        let (f, fk) = asymptotic_densities(0.5).unwrap();
        assert!((f.evaluate(0.0) - 0.5).abs() < 1e-15);
        let l = f.support().1;
        assert!((both_halves(|x| fk.evaluate(x), l) - 0.5).abs() < 1e-12);
        assert!((both_halves(|x| f.evaluate(x), l) - 1.0).abs() < 1e-12);
        assert!((center_cut_coefficient(&f) - 1.0).abs() < 1e-12);
        for eta in [0.1, 0.25, 0.5] {
            let (f, fk) = asymptotic_densities(eta).unwrap();
            assert!((fk.mass() - eta).abs() < 1e-12);
            assert!((center_cut_coefficient(&f) - eta / (1.0 - eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_and_kernel_fraction_by_rejection() {
        let s = make_glued_cones(3, 0.5).unwrap();
        let pts = exact_samples(&s, 20_000, 11).unwrap();
        let hits = pts.iter().filter(|p| s.kernel_contains(p)).count() as f64 / pts.len() as f64;
        let q = s.kernel_fraction();
        let se = (q * (1.0 - q) / pts.len() as f64).sqrt();
        assert!((hits - q).abs() < 4.0 * se, "{hits} vs {q}");
        // Planar body: area = 2·∫ 2r(t) dt.
        let p = make_glued_cones(2, 0.5).unwrap();
        let l = p.l_n();
        let area = 2.0 * gl_integrate(|t| 2.0 * p.body_radius(t).unwrap(), 0.0, l, 4);
        assert!((p.volume() - area).abs() < 1e-12);
    }

    #[test]
    fn ball_volume_recursion() {
        assert!((ball_volume(1, 1.0) - 2.0).abs() < 1e-15);
        assert!((ball_volume(2, 1.0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ball_volume(3, 2.0) - 4.0 / 3.0 * std::f64::consts::PI * 8.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_bodies() {
        let b = make_ball(3, 2.0).unwrap();
        assert!(b.contains(&[0.0; 3]));
        assert_eq!(b.radius_bound(), 2.0);
        let c = make_cube(2, 1.0).unwrap();
        assert!(c.contains(&[1.0, -1.0]) && !c.contains(&[1.0, 1.0001]));
        assert!(make_ball(2, 0.0).is_err() && make_cube(2, -1.0).is_err());
    }

    #[test]
    fn axis_scale_shrinks_transverse_directions() {
        let s = make_glued_cones(10, 0.5).unwrap().with_axis_scale(0.01).unwrap();
        assert!(s.contains(&[0.0, 0.009, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(!s.contains(&[0.0, 0.011, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let expected = (2.0 * s.l_n()).hypot(0.02);
        assert!((s.diameter_bound() - expected).abs() < 1e-15);
    }
}
