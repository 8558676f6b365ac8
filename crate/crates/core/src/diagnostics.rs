//! Empirical checks of the isoperimetric, conductance and coupling
//! inequalities, plus the TV and mixture-moment tools they rely on.
//!
//! Proven inequalities are flagged only beyond 4σ of Monte Carlo noise, so a
//! flag means a bug, not bad luck.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, dot, norm, StarBody};
use crate::rng::{purpose, stream, uniform_in_ball, unit_direction};
use crate::stats::{bin_index, binomial_se, std_error};

/// Flag threshold for proven inequalities, in standard deviations.
pub const VIOLATION_SIGMAS: f64 = 4.0;

/// Slab partition: class 1 is `v·x < t₁`, class 2 is `v·x > t₂`, class 3 the
/// slab between. `v` is stored normalized, so `d(S₁, S₂) ≥ t₂ − t₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition3 {
    pub normal: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
}

impl Partition3 {
    pub fn new(normal: Vec<f64>, t1: f64, t2: f64) -> Result<Self> {
        let len = norm(&normal);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParameter("slab normal must be nonzero".into()));
        }
        if !(t1 < t2) {
            return Err(Error::InvalidParameter(format!("slab needs t1 < t2, got {t1} and {t2}")));
        }
        Ok(Partition3 { normal: normal.iter().map(|v| v / len).collect(), t1: t1 / len, t2: t2 / len })
    }

    pub fn classify(&self, x: &[f64]) -> u8 {
        let p = dot(&self.normal, x);
        if p < self.t1 {
            1
        } else if p > self.t2 {
            2
        } else {
            3
        }
    }

    /// Lower bound on the distance between classes 1 and 2.
    pub fn separation(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn description(&self) -> String {
        format!("slab {:?}·x in [{}, {}]", self.normal, self.t1, self.t2)
    }
}

/// Class fractions with their multinomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFractions {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub count: usize,
}

pub fn class_fractions(partition: &Partition3, samples: &[Vec<f64>]) -> Result<ClassFractions> {
    let mut c = [0usize; 3];
    for s in samples {
        c[(partition.classify(s) - 1) as usize] += 1;
    }
    let n = samples.len();
    if c[0] == 0 || c[1] == 0 {
        return Err(Error::Degenerate(format!("partition leaves a side empty ({} / {} / {})", c[0], c[2], c[1])));
    }
    let f = |k: usize| k as f64 / n as f64;
    Ok(ClassFractions { p1: f(c[0]), p2: f(c[1]), p3: f(c[2]), count: n })
}

/// Standard deviation of `a·p₃ − b·min(p₁, p₂)` under multinomial sampling.
fn slab_sigma(fr: &ClassFractions, a: f64, b: f64) -> f64 {
    let pm = fr.p1.min(fr.p2);
    let n = fr.count as f64;
    let var = a * a * fr.p3 * (1.0 - fr.p3) + b * b * pm * (1.0 - pm) + 2.0 * a * b * fr.p3 * pm;
    (var / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iso1Report {
    pub partition: Partition3,
    pub fractions: ClassFractions,
    pub eta: f64,
    pub diameter: f64,
    /// `vol(S₃)·4D / vol(S)`.
    pub lhs: f64,
    /// `η·d·min{vol(S₁), vol(S₂)} / vol(S)`.
    pub rhs: f64,
    pub sigma: f64,
    pub ratio: f64,
    /// Observed `vol(S₃) / (d·min{vol(S₁), vol(S₂)})`.
    pub coefficient: f64,
    pub violated: bool,
}

/// Checks `vol(S₃) ≥ η/(4D)·d(S₁,S₂)·min{vol(S₁), vol(S₂)}` on uniform samples.
pub fn iso1_check(eta: f64, diameter: f64, partition: &Partition3, samples: &[Vec<f64>]) -> Result<Iso1Report> {
    let fr = class_fractions(partition, samples)?;
    let d = partition.separation();
    let pm = fr.p1.min(fr.p2);
    let lhs = fr.p3 * 4.0 * diameter;
    let rhs = eta * d * pm;
    let sigma = slab_sigma(&fr, 4.0 * diameter, eta * d);
    Ok(Iso1Report {
        partition: partition.clone(),
        fractions: fr,
        eta,
        diameter,
        lhs,
        rhs,
        sigma,
        ratio: lhs / rhs,
        coefficient: fr.p3 / (d * pm),
        violated: rhs - lhs > VIOLATION_SIGMAS * sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iso2Report {
    pub partition: Partition3,
    pub fractions: ClassFractions,
    pub eta: f64,
    pub mean_sq_distance: f64,
    /// `vol(S₃) ≥ η/4·vol(S)`.
    pub volume_branch_margin: f64,
    pub volume_branch_sigma: f64,
    pub volume_branch_holds: bool,
    /// `vol(S₃) ≥ η^{3/2}/(16√M_S)·d·min{vol(S₁), vol(S₂)}`.
    pub moment_branch_margin: f64,
    pub moment_branch_sigma: f64,
    pub moment_branch_holds: bool,
    pub disjunction_holds: bool,
}

/// Checks the two-branch inequality; reports which branches hold within 4σ.
pub fn iso2_check(eta: f64, mean_sq_distance: f64, partition: &Partition3, samples: &[Vec<f64>]) -> Result<Iso2Report> {
    let fr = class_fractions(partition, samples)?;
    let n = fr.count as f64;
    let vol_margin = fr.p3 - eta / 4.0;
    let vol_sigma = (fr.p3 * (1.0 - fr.p3) / n).sqrt();
    let coef = eta.powf(1.5) / (16.0 * mean_sq_distance.sqrt());
    let b = coef * partition.separation();
    let mom_margin = fr.p3 - b * fr.p1.min(fr.p2);
    let mom_sigma = slab_sigma(&fr, 1.0, b);
    let vol_holds = vol_margin >= -VIOLATION_SIGMAS * vol_sigma;
    let mom_holds = mom_margin >= -VIOLATION_SIGMAS * mom_sigma;
    Ok(Iso2Report {
        partition: partition.clone(),
        fractions: fr,
        eta,
        mean_sq_distance,
        volume_branch_margin: vol_margin,
        volume_branch_sigma: vol_sigma,
        volume_branch_holds: vol_holds,
        moment_branch_margin: mom_margin,
        moment_branch_sigma: mom_sigma,
        moment_branch_holds: mom_holds,
        disjunction_holds: vol_holds || mom_holds,
    })
}

/// `count` random slabs whose thresholds are sample quantiles along a random
/// direction, so both outer classes are nonempty.
pub fn random_slabs(samples: &[Vec<f64>], count: usize, seed: u64) -> Vec<Partition3> {
    let n = samples[0].len();
    let mut rng = stream(seed, purpose::SLABS, 0);
    (0..count)
        .map(|_| {
            let v = unit_direction(&mut rng, n);
            let mut proj: Vec<f64> = samples.iter().map(|x| dot(&v, x)).collect();
            proj.sort_by(|a, b| a.total_cmp(b));
            let q1: f64 = rng.random_range(0.1..0.6);
            let w: f64 = rng.random_range(0.02..0.3);
            let at = |q: f64| proj[((q * proj.len() as f64) as usize).min(proj.len() - 1)];
            let (t1, mut t2) = (at(q1), at(q1 + w));
            if t2 <= t1 {
                t2 = t1 + 1e-9;
            }
            Partition3::new(v, t1, t2).expect("unit direction and ordered thresholds")
        })
        .collect()
}

/// Monte Carlo `l(x) = vol(B(x,r) ∩ S)/vol(B(0,r))` with its binomial error.
pub fn local_conductance<B: StarBody + ?Sized>(
    body: &B,
    x: &[f64],
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !body.contains(x) {
        return Err(Error::OutsideBody);
    }
    let mut rng = stream(seed, purpose::DIAGNOSTIC, 0);
    Ok(local_conductance_with(body, x, r, trials, &mut rng))
}

fn local_conductance_with<B: StarBody + ?Sized, R: Rng + ?Sized>(
    body: &B,
    x: &[f64],
    r: f64,
    trials: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut u = vec![0.0; x.len()];
    let mut hits = 0;
    for _ in 0..trials {
        uniform_in_ball(rng, r, &mut u);
        for (a, b) in u.iter_mut().zip(x) {
            *a += b;
        }
        if body.contains(&u) {
            hits += 1;
        }
    }
    let l = hits as f64 / trials as f64;
    (l, binomial_se(l, trials))
}

/// Per-point local conductance estimates, each point on its own stream.
pub fn local_conductances<B: StarBody + ?Sized>(
    body: &B,
    points: &[Vec<f64>],
    r: f64,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = stream(seed, purpose::DIAGNOSTIC, i as u64 + 1);
            local_conductance_with(body, x, r, trials, &mut rng).0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductanceSummary {
    pub r: f64,
    pub mean: f64,
    pub se: f64,
    /// `1 − r√n/2`.
    pub floor: f64,
    pub s_r_fraction: f64,
    pub s_r_se: f64,
    /// `1 − 2r√n`.
    pub s_r_floor: f64,
    pub points: usize,
}

impl ConductanceSummary {
    pub fn mean_ok(&self) -> bool {
        self.mean >= self.floor - 3.0 * self.se
    }

    pub fn s_r_ok(&self) -> bool {
        self.s_r_fraction >= self.s_r_floor - 3.0 * self.s_r_se
    }
}

/// Average local conductance and the fraction of points with `l̂ ≥ 3/4`.
pub fn conductance_summary<B: StarBody + ?Sized>(
    body: &B,
    points: &[Vec<f64>],
    r: f64,
    trials: usize,
    seed: u64,
) -> ConductanceSummary {
    let n = body.dimension() as f64;
    let ls = local_conductances(body, points, r, trials, seed);
    let good: Vec<f64> = ls.iter().map(|&l| if l >= 0.75 { 1.0 } else { 0.0 }).collect();
    let frac = crate::stats::mean(&good);
    ConductanceSummary {
        r,
        mean: crate::stats::mean(&ls),
        se: std_error(&ls),
        floor: 1.0 - r * n.sqrt() / 2.0,
        s_r_fraction: frac,
        s_r_se: binomial_se(frac, points.len()).max(1.0 / points.len() as f64),
        s_r_floor: 1.0 - 2.0 * r * n.sqrt(),
        points: points.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrReport {
    pub body: ConductanceSummary,
    pub kernel: ConductanceSummary,
}

/// `S_r` fractions among body samples and among kernel samples.
pub fn s_r_fraction<B: StarBody + ?Sized>(
    body: &B,
    r: f64,
    body_samples: &[Vec<f64>],
    kernel_samples: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> SrReport {
    SrReport {
        body: conductance_summary(body, body_samples, r, trials, seed),
        kernel: conductance_summary(body, kernel_samples, r, trials, seed ^ 0x5EED),
    }
}

/// Area of the cap of a disk of radius `r` beyond a chord at distance `h`
/// from the centre.
pub fn cap_area(r: f64, h: f64) -> f64 {
    let h = h.clamp(-r, r);
    r * r * (h / r).acos() - h * (r * r - h * h).sqrt()
}

/// One-step TV between interior points at distance `d` whose proposal disks
/// lie inside the body: `1 − 2·cap(d/2)/(πr²)`.
pub fn deep_interior_tv(d: f64, r: f64) -> f64 {
    if d >= 2.0 * r {
        return 1.0;
    }
    1.0 - 2.0 * cap_area(r, d / 2.0) / (std::f64::consts::PI * r * r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub tv: f64,
    pub l_u: f64,
    pub l_v: f64,
    pub t: f64,
    /// `1 + t − min{l(u), l(v)}`.
    pub bound: f64,
    pub closed_form: f64,
    pub holds: bool,
}

/// Areas of `B(c,r) ∩ S` for each centre and of `B(u,r) ∩ B(v,r) ∩ S`, by
/// midpoint integration over `grid` vertical lines with exact chords and
/// `sub` membership probes per chord. Columns are summed in order so the
/// result does not depend on the thread count.
fn disk_areas_2d<B: StarBody + ?Sized>(
    body: &B,
    u: &[f64],
    v: &[f64],
    r: f64,
    grid: usize,
    sub: usize,
) -> (f64, f64, f64) {
    let chord = |c: &[f64], x: f64| {
        let dx = x - c[0];
        let h2 = r * r - dx * dx;
        if h2 <= 0.0 {
            None
        } else {
            let h = h2.sqrt();
            Some((c[1] - h, c[1] + h))
        }
    };
    let inside_len = |x: f64, lo: f64, hi: f64| {
        if hi <= lo {
            return 0.0;
        }
        let step = (hi - lo) / sub as f64;
        let hits = (0..sub).filter(|k| body.contains(&[x, lo + (*k as f64 + 0.5) * step])).count();
        (hi - lo) * hits as f64 / sub as f64
    };
    let column = |c: &[f64]| {
        let w = 2.0 * r / grid as f64;
        (0..grid)
            .into_par_iter()
            .map(|i| {
                let x = c[0] - r + (i as f64 + 0.5) * w;
                chord(c, x).map_or(0.0, |(lo, hi)| inside_len(x, lo, hi)) * w
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
    };
    let area_u = column(u);
    let area_v = column(v);
    let lo_x = u[0].max(v[0]) - r;
    let hi_x = u[0].min(v[0]) + r;
    let both = if hi_x > lo_x {
        let w = (hi_x - lo_x) / grid as f64;
        (0..grid)
            .into_par_iter()
            .map(|i| {
                let x = lo_x + (i as f64 + 0.5) * w;
                match (chord(u, x), chord(v, x)) {
                    (Some(a), Some(b)) => inside_len(x, a.0.max(b.0), a.1.min(b.1)) * w,
                    _ => 0.0,
                }
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>()
    } else {
        0.0
    };
    (area_u, area_v, both)
}

/// One-step TV between the ball-walk kernels at `u` and `v` in the plane,
/// including the stay-put atoms, against `1 + t − l`.
pub fn coupling_overlap<B: StarBody + ?Sized>(
    body: &B,
    u: &[f64],
    v: &[f64],
    r: f64,
    grid: usize,
) -> Result<CouplingReport> {
    if body.dimension() != 2 {
        return Err(Error::InvalidParameter("coupling quadrature is planar only".into()));
    }
    if !body.contains(u) || !body.contains(v) {
        return Err(Error::OutsideBody);
    }
    let disk = std::f64::consts::PI * r * r;
    let (au, av, both) = disk_areas_2d(body, u, v, r, grid, 64);
    let (l_u, l_v) = (au / disk, av / disk);
    let d = distance(u, v);
    let tv = if d == 0.0 { 0.0 } else { (1.0 - both / disk).clamp(0.0, 1.0) };
    let t = d * 2f64.sqrt() / r;
    let bound = 1.0 + t - l_u.min(l_v);
    Ok(CouplingReport { tv, l_u, l_v, t, bound, closed_form: deep_interior_tv(d, r), holds: tv <= bound + 1e-6 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductanceReport {
    pub phi: f64,
    pub phi_se: f64,
    pub side_fraction: f64,
    /// `sη/(2¹³nD)`.
    pub floor: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Estimates `φ(A) = ∫_A P_x(Ā)dx / min{vol(A), vol(Ā)}` for the halfspace
/// `A = {normal·x ≤ offset}` with one proposal per uniform sample.
#[allow(clippy::too_many_arguments)]
pub fn partition_conductance<B: StarBody + ?Sized>(
    body: &B,
    normal: &[f64],
    offset: f64,
    r: f64,
    samples: &[Vec<f64>],
    s: f64,
    eta: f64,
    seed: u64,
) -> Result<ConductanceReport> {
    let n = body.dimension();
    let in_a = |x: &[f64]| dot(normal, x) <= offset;
    let count = samples.len() as f64;
    let frac_a = samples.iter().filter(|x| in_a(x)).count() as f64 / count;
    let side = frac_a.min(1.0 - frac_a);
    if side <= s {
        return Err(Error::Degenerate(format!("smaller side has mass {side}, not above s = {s}")));
    }
    let crossings: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = stream(seed, purpose::DIAGNOSTIC, i as u64);
            let mut y = vec![0.0; n];
            uniform_in_ball(&mut rng, r, &mut y);
            for (a, b) in y.iter_mut().zip(x) {
                *a += b;
            }
            // Flow from the smaller side counts moves into the other side.
            let from_a = in_a(x);
            let small_is_a = frac_a <= 0.5;
            if from_a == small_is_a && in_a(&y) != from_a && body.contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let flow = crate::stats::mean(&crossings);
    let phi = flow / side;
    let phi_se = std_error(&crossings) / side;
    let floor = s * eta / (8192.0 * n as f64 * body.diameter_bound());
    Ok(ConductanceReport { phi, phi_se, side_fraction: side, floor, margin: phi / floor, holds: phi >= floor })
}

/// Per-component moments for the mixture identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// `E‖X‖²`.
    pub raw_second: f64,
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!("mixture weight {w} is not positive")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
    }
    Ok(())
}

/// `(lhs, rhs)` of `E‖Y−μ‖² = Σpᵢ E‖Xᵢ−μᵢ‖² + Σ_{i<j} pᵢpⱼ‖μᵢ−μⱼ‖²` from
/// exact moments. The two sides are computed along different routes.
pub fn mixture_identity_exact(components: &[ComponentMoments]) -> Result<(f64, f64)> {
    check_weights(components.iter().map(|c| c.weight))?;
    let n = components[0].mean.len();
    let mut mu = vec![0.0; n];
    let mut raw = 0.0;
    for c in components {
        raw += c.weight * c.raw_second;
        for (m, v) in mu.iter_mut().zip(&c.mean) {
            *m += c.weight * v;
        }
    }
    let lhs = raw - dot(&mu, &mu);
    let mut rhs = 0.0;
    for (i, a) in components.iter().enumerate() {
        rhs += a.weight * (a.raw_second - dot(&a.mean, &a.mean));
        for b in &components[i + 1..] {
            rhs += a.weight * b.weight * distance(&a.mean, &b.mean).powi(2);
        }
    }
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z: f64,
}

/// Sampled form: the left side from `mixture` samples, the right side from
/// per-component samples.
#[allow(clippy::type_complexity)]
pub fn var_mixture_identity(components: &[(f64, Vec<Vec<f64>>)], mixture: &[Vec<f64>]) -> Result<MixtureReport> {
    check_weights(components.iter().map(|c| c.0))?;
    let centred_sq = |pts: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>) {
        let n = pts[0].len();
        let mut m = vec![0.0; n];
        for p in pts {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b / pts.len() as f64;
            }
        }
        let sq = pts.iter().map(|p| distance(p, &m).powi(2)).collect();
        (m, sq)
    };
    if mixture.len() < 2 || components.iter().any(|c| c.1.len() < 2) {
        return Err(Error::InsufficientSamples("each sample set needs at least two points".into()));
    }
    let (_, ysq) = centred_sq(mixture);
    let ny = mixture.len() as f64;
    let lhs = crate::stats::mean(&ysq) * ny / (ny - 1.0);
    let lhs_se = std_error(&ysq);

    let stats: Vec<(f64, Vec<f64>, Vec<f64>, &Vec<Vec<f64>>)> = components
        .iter()
        .map(|(w, pts)| {
            let (m, sq) = centred_sq(pts);
            (*w, m, sq, pts)
        })
        .collect();
    let n = mixture[0].len();
    let mut mu = vec![0.0; n];
    for (w, m, _, _) in &stats {
        for (a, b) in mu.iter_mut().zip(m) {
            *a += w * b;
        }
    }
    let mut rhs = 0.0;
    let mut var = 0.0;
    for (i, (w, m, sq, pts)) in stats.iter().enumerate() {
        let k = pts.len() as f64;
        rhs += w * crate::stats::mean(sq) * k / (k - 1.0);
        var += (w * std_error(sq)).powi(2);
        for (w2, m2, _, _) in &stats[i + 1..] {
            rhs += w * w2 * distance(m, m2).powi(2);
        }
        // Gradient of the between-means term with respect to μᵢ is 2pᵢ(μᵢ − μ).
        let g: Vec<f64> = m.iter().zip(&mu).map(|(a, b)| 2.0 * w * (a - b)).collect();
        let proj: Vec<f64> = pts.iter().map(|p| dot(&g, p)).collect();
        var += crate::stats::variance(&proj) / k;
    }
    let rhs_se = var.sqrt();
    let z = (lhs - rhs) / (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    Ok(MixtureReport { lhs, lhs_se, rhs, rhs_se, z })
}

/// Axis-aligned product grid for binning point sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: usize,
}

impl Binning {
    fn cell(&self, x: &[f64]) -> u64 {
        let mut idx = 0u64;
        for (i, v) in x.iter().enumerate() {
            let b = bin_index(*v, self.lo[i], self.hi[i], self.bins);
            if b == self.bins {
                return u64::MAX;
            }
            idx = idx * self.bins as u64 + b as u64;
        }
        idx
    }

    /// Empirical probability of every occupied cell; points outside the grid
    /// share one overflow cell.
    pub fn histogram(&self, pts: &[Vec<f64>]) -> BTreeMap<u64, f64> {
        let mut h = BTreeMap::new();
        for p in pts {
            *h.entry(self.cell(p)).or_insert(0.0) += 1.0 / pts.len() as f64;
        }
        h
    }
}

/// Half the L1 distance between binned empirical measures: a lower bound on
/// the TV distance of the underlying laws.
pub fn empirical_tv(a: &[Vec<f64>], b: &[Vec<f64>], binning: &Binning) -> Result<f64> {
    if binning.bins == 0 {
        return Err(Error::InvalidParameter("binning needs at least one bin".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples("empty sample set".into()));
    }
    tv_of_histograms(&binning.histogram(a), &binning.histogram(b))
}

/// TV between an empirical histogram and exact cell probabilities.
pub fn tv_of_histograms(ha: &BTreeMap<u64, f64>, hb: &BTreeMap<u64, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (k, p) in ha {
        total += (p - hb.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, q) in hb {
        if !ha.contains_key(k) {
            total += q;
        }
    }
    Ok((0.5 * total).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymdiffReport {
    pub vol_a: f64,
    pub vol_b: f64,
    pub vol_intersection: f64,
    /// `vol(A △ B) / min{vol(A), vol(B)}`.
    pub symdiff_fraction: f64,
    /// TV of the uniform measures by the set-volume formula.
    pub tv: f64,
    /// `½∫|f_A − f_B|` on the same grid.
    pub tv_l1: f64,
    pub implication_holds: bool,
}

/// Grid areas of two planar bodies and the TV of their uniform measures.
pub fn symdiff_tv_check<A: StarBody + ?Sized, B: StarBody + ?Sized>(
    a: &A,
    b: &B,
    grid: usize,
) -> Result<SymdiffReport> {
    if a.dimension() != 2 || b.dimension() != 2 {
        return Err(Error::InvalidParameter("symmetric-difference grid is planar only".into()));
    }
    let (ba, bb) = (a.bounding_box(), b.bounding_box());
    let lo = [ba.lo[0].min(bb.lo[0]), ba.lo[1].min(bb.lo[1])];
    let hi = [ba.hi[0].max(bb.hi[0]), ba.hi[1].max(bb.hi[1])];
    let (wx, wy) = ((hi[0] - lo[0]) / grid as f64, (hi[1] - lo[1]) / grid as f64);
    let cell = wx * wy;
    let counts: (u64, u64, u64) = (0..grid)
        .into_par_iter()
        .map(|i| {
            let x = lo[0] + (i as f64 + 0.5) * wx;
            let mut c = (0u64, 0u64, 0u64);
            for j in 0..grid {
                let p = [x, lo[1] + (j as f64 + 0.5) * wy];
                let (ia, ib) = (a.contains(&p), b.contains(&p));
                c.0 += ia as u64;
                c.1 += ib as u64;
                c.2 += (ia && ib) as u64;
            }
            c
        })
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    let (va, vb, vi) = (counts.0 as f64 * cell, counts.1 as f64 * cell, counts.2 as f64 * cell);
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("a body has zero grid area".into()));
    }
    let (v1, v2) = if va <= vb { (va, vb) } else { (vb, va) };
    let (only1, only2) = (v1 - vi, v2 - vi);
    let tv = 0.5 * (only1 / v1 + only2 / v2 + vi * (1.0 / v1 - 1.0 / v2));
    let tv_l1 = 0.5 * ((va - vi) / va + (vb - vi) / vb + vi * (1.0 / va - 1.0 / vb).abs());
    let symdiff_fraction = (va + vb - 2.0 * vi) / va.min(vb);
    Ok(SymdiffReport {
        vol_a: va,
        vol_b: vb,
        vol_intersection: vi,
        symdiff_fraction,
        tv,
        tv_l1,
        implication_holds: tv <= symdiff_fraction + 1e-12,
    })
}
