//! Kernel rounding: moments of kernel samples, the whitening map they
//! induce, and the cross-section checks that justify rounding only the kernel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballwalk::{choose_warm_start, warm_start_point, WarmStart};
use crate::error::{Error, Result};
use crate::geometry::{dot, StarBody};
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<Vec<f64>>,
    pub sample_count: usize,
    /// Smallest eigenvalue is below `1e−12` times the largest.
    pub rank_deficient: bool,
}

impl MomentEstimate {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }

    /// `E‖X − μ‖²`, the trace of the covariance.
    pub fn mean_squared_distance(&self) -> f64 {
        (0..self.mean.len()).map(|i| self.covariance[i][i]).sum()
    }
}

const EIGEN_FLOOR: f64 = 1e-12;

/// Unbiased mean and covariance.
pub fn estimate_moments(samples: &[Vec<f64>]) -> Result<MomentEstimate> {
    let count = samples.len();
    let n = samples.first().map_or(0, |s| s.len());
    if n == 0 || count <= n {
        return Err(Error::InsufficientSamples(format!("{count} samples in dimension {n}")));
    }
    let mut mean = vec![0.0; n];
    for s in samples {
        if s.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.len() });
        }
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut cov = vec![vec![0.0; n]; n];
    for s in samples {
        for i in 0..n {
            let di = s[i] - mean[i];
            for j in i..n {
                cov[i][j] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= (count - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let mut est = MomentEstimate { mean, covariance: cov, sample_count: count, rank_deficient: false };
    let eig = est.covariance_matrix().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    est.rank_deficient = !(min > EIGEN_FLOOR * max);
    Ok(est)
}

/// `(T, shift)` with `T = Σ^{−1/2}` (symmetric root) and `shift = −T μ`, so
/// `x ↦ T x + shift` maps the samples to zero mean and identity covariance.
pub fn whitening_map(est: &MomentEstimate) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let eig = est.covariance_matrix().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0 && min > EIGEN_FLOOR * max) {
        return Err(Error::Degenerate(format!("covariance is not positive definite (eigenvalues {min:e} .. {max:e})")));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let t = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let t = (&t + t.transpose()) * 0.5;
    let shift = -(&t * DVector::from_column_slice(&est.mean));
    Ok((t, shift.iter().cloned().collect()))
}

/// Applies `x ↦ T x + shift` to every sample.
pub fn apply_map(samples: &[Vec<f64>], t: &DMatrix<f64>, shift: &[f64]) -> Vec<Vec<f64>> {
    let n = shift.len();
    samples.iter().map(|x| (0..n).map(|i| (0..n).map(|j| t[(i, j)] * x[j]).sum::<f64>() + shift[i]).collect()).collect()
}

/// Empirical `E[(vᵀX)²]`; `v` is normalized first.
pub fn directional_second_moment(samples: &[Vec<f64>], v: &[f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    samples.iter().map(|x| (dot(v, x) / norm).powi(2)).sum::<f64>() / samples.len() as f64
}

/// Upper bound `3328/η²` on the directional second moment under an
/// isotropic kernel.
pub fn directional_moment_bound(eta: f64) -> f64 {
    3328.0 / (eta * eta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRounding {
    pub moments: MomentEstimate,
    pub map: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
    pub warm_start: WarmStart,
}

impl KernelRounding {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.shift.len();
        DMatrix::from_fn(n, n, |i, j| self.map[i][j])
    }
}

/// Draws `count` kernel points with the warm-start machinery, estimates
/// their moments and returns the whitening map.
pub fn round_kernel<B: StarBody>(body: &B, count: usize, seed: u64) -> Result<KernelRounding> {
    let warm = choose_warm_start(body, seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| warm_start_point(body, &warm, seed ^ purpose::ROUNDING, i as u64))
        .collect::<Result<_>>()?;
    let moments = estimate_moments(&pts)?;
    let (t, shift) = whitening_map(&moments)?;
    let n = shift.len();
    let map = (0..n).map(|i| (0..n).map(|j| t[(i, j)]).collect()).collect();
    Ok(KernelRounding { moments, map, shift, warm_start: warm })
}

/// One violated instance of the restricted Brunn–Minkowski inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabViolation {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub sigma: f64,
    pub multiplicative: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogConcavityReport {
    pub grid: Vec<f64>,
    pub slab_half_width: f64,
    pub f_body: Vec<f64>,
    pub f_kernel: Vec<f64>,
    pub sigma_body: Vec<f64>,
    pub sigma_kernel: Vec<f64>,
    pub triples_tested: usize,
    pub violations: Vec<SlabViolation>,
    pub multiplicative_triples_tested: usize,
    pub multiplicative_violations: Vec<SlabViolation>,
}

const MIN_BOX_SAMPLES_PER_SLAB: f64 = 100.0;

/// Estimates the cross-sectional volumes `f_S`, `f_K` in direction `v` on a
/// grid of slab centres and tests
/// `f_S(αx+(1−α)y)^{1/(n−1)} ≥ α f_K(x)^{1/(n−1)} + (1−α) f_S(y)^{1/(n−1)}`
/// and `f_S(αx+(1−α)y) ≥ f_K(x)^α f_S(y)^{1−α}` for `α ∈ {1/4, 1/2, 3/4}`,
/// flagging shortfalls beyond `3σ` of slab noise.
pub fn cross_section_logconcavity_check<B: StarBody>(
    body: &B,
    v: &[f64],
    grid: usize,
    samples: usize,
    seed: u64,
) -> Result<LogConcavityReport> {
    let n = body.dimension();
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("slab estimation supports n in {{2, 3}}, got {n}")));
    }
    let vn = dot(v, v).sqrt();
    if (vn - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("direction has norm {vn}, expected 1")));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let bbox = body.bounding_box();
    let (mut lo, mut hi) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (v[i] * bbox.lo[i], v[i] * bbox.hi[i]);
        lo += a.min(b);
        hi += a.max(b);
    }
    let step = (hi - lo) / grid as f64;
    let h = (hi - lo) / (4.0 * grid as f64);
    let centers: Vec<f64> = (0..grid).map(|i| lo + (i as f64 + 0.5) * step).collect();

    // Each box sample lands in at most one slab since 2h < step.
    let chunks = 64usize;
    let per_chunk = samples.div_ceil(chunks);
    let counts: Vec<(Vec<u64>, Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, purpose::DIAGNOSTIC, c as u64);
            let mut x = vec![0.0; n];
            let mut s = vec![0u64; grid];
            let mut k = vec![0u64; grid];
            let todo = per_chunk.min(samples.saturating_sub(c * per_chunk));
            for _ in 0..todo {
                bbox.sample_into(&mut rng, &mut x);
                let p = dot(v, &x);
                let idx = ((p - lo) / step).floor();
                if idx < 0.0 || idx >= grid as f64 {
                    continue;
                }
                let i = idx as usize;
                if (p - centers[i]).abs() > h {
                    continue;
                }
                if body.contains(&x) {
                    s[i] += 1;
                    if body.kernel_contains(&x) {
                        k[i] += 1;
                    }
                }
            }
            (s, k, todo as u64)
        })
        .collect();
    let total: u64 = counts.iter().map(|c| c.2).sum();
    let mut hs = vec![0u64; grid];
    let mut hk = vec![0u64; grid];
    for (s, k, _) in &counts {
        for i in 0..grid {
            hs[i] += s[i];
            hk[i] += k[i];
        }
    }
    let slab_box_fraction = 2.0 * h / (hi - lo);
    if (total as f64) * slab_box_fraction < MIN_BOX_SAMPLES_PER_SLAB {
        return Err(Error::InsufficientSamples(format!(
            "about {:.1} box samples per slab; need at least {MIN_BOX_SAMPLES_PER_SLAB}",
            total as f64 * slab_box_fraction
        )));
    }
    let scale = bbox.volume() / (total as f64 * 2.0 * h);
    let estimate = |hits: u64| {
        let p = hits as f64 / total as f64;
        (scale * hits as f64, scale * (total as f64 * p * (1.0 - p)).sqrt().max(1.0))
    };
    let (f_body, sigma_body): (Vec<f64>, Vec<f64>) = hs.iter().map(|&c| estimate(c)).unzip();
    let (f_kernel, sigma_kernel): (Vec<f64>, Vec<f64>) = hk.iter().map(|&c| estimate(c)).unzip();

    let p = 1.0 / (n as f64 - 1.0);
    // Half the spread of g over [f − σ, f + σ]: a σ for g(f) that stays finite at f = 0.
    let spread = |g: &dyn Fn(f64) -> f64, f: f64, s: f64| 0.5 * (g(f + s) - g((f - s).max(0.0)));
    let pow = move |f: f64| f.powf(p);
    let mut violations = Vec::new();
    let mut multiplicative_violations = Vec::new();
    let mut tested = 0;
    let mut mult_tested = 0;
    for alpha in [0.25, 0.5, 0.75] {
        for i in 0..grid {
            for j in 0..grid {
                let zf = alpha * i as f64 + (1.0 - alpha) * j as f64;
                if zf.fract() != 0.0 {
                    continue;
                }
                let k = zf as usize;
                let (fk, sk) = (f_kernel[i], sigma_kernel[i]);
                let (fs, ss) = (f_body[j], sigma_body[j]);
                let (fz, sz) = (f_body[k], sigma_body[k]);
                if fk > 3.0 * sk && fs > 3.0 * ss {
                    tested += 1;
                    let lhs = pow(fz);
                    let rhs = alpha * pow(fk) + (1.0 - alpha) * pow(fs);
                    let sigma = (spread(&pow, fz, sz).powi(2)
                        + (alpha * spread(&pow, fk, sk)).powi(2)
                        + ((1.0 - alpha) * spread(&pow, fs, ss)).powi(2))
                    .sqrt();
                    if rhs - lhs > 3.0 * sigma {
                        violations.push(SlabViolation {
                            x: centers[i],
                            y: centers[j],
                            alpha,
                            lhs,
                            rhs,
                            sigma,
                            multiplicative: false,
                        });
                    }
                }
                mult_tested += 1;
                let rhs = fk.powf(alpha) * fs.powf(1.0 - alpha);
                let sig_rhs = {
                    let up = (fk + sk).powf(alpha) * (fs + ss).powf(1.0 - alpha);
                    let down = (fk - sk).max(0.0).powf(alpha) * (fs - ss).max(0.0).powf(1.0 - alpha);
                    0.5 * (up - down)
                };
                let sigma = (sz * sz + sig_rhs * sig_rhs).sqrt();
                if rhs - fz > 3.0 * sigma {
                    multiplicative_violations.push(SlabViolation {
                        x: centers[i],
                        y: centers[j],
                        alpha,
                        lhs: fz,
                        rhs,
                        sigma,
                        multiplicative: true,
                    });
                }
            }
        }
    }
    Ok(LogConcavityReport {
        grid: centers,
        slab_half_width: h,
        f_body,
        f_kernel,
        sigma_body,
        sigma_kernel,
        triples_tested: tested,
        violations,
        multiplicative_triples_tested: mult_tested,
        multiplicative_violations,
    })
}
