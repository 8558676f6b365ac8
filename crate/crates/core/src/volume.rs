//! Volume of a star-shaped body as `vol(K) / η̂`: a multiphase estimate of
//! the kernel volume and a kernel-hit fraction over ball-walk samples of the
//! body.
//!
//! The multiphase estimator never touches the star-shaped machinery: each
//! phase samples `K ∩ B(x₀, rᵢ)`, which is convex.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballwalk::{plan_for_body, sample_uniform, Chain};
use crate::constructions::ball_volume;
use crate::error::{Error, Result};
use crate::geometry::{norm, BallSection, KernelView, StarBody};
use crate::rng::{purpose, stream, uniform_in_ball};
use crate::stats::{binomial_se, Z95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub radius: f64,
    pub ratio: f64,
    pub steps: u64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard deviation of the log-volume estimate.
    pub log_sd: f64,
    pub base_radius: f64,
    pub samples_per_phase: usize,
    pub phases: Vec<PhaseRecord>,
}

/// Number of sub-phases per factor-2 volume step; 1 gives radii `r₀·2^{i/n}`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSchedule {
    pub refinement: usize,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        PhaseSchedule { refinement: 1 }
    }
}

/// Multiphase volume of a convex body given as a [`StarBody`] whose
/// membership oracle is used (its kernel oracle is ignored).
pub fn kernel_volume<B: StarBody>(kernel: &B, eps: f64, seed: u64) -> Result<VolumeEstimate> {
    kernel_volume_with(kernel, eps, seed, PhaseSchedule::default())
}

pub fn kernel_volume_with<B: StarBody>(
    kernel: &B,
    eps: f64,
    seed: u64,
    schedule: PhaseSchedule,
) -> Result<VolumeEstimate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    let n = kernel.dimension();
    let x0 = kernel.interior_point();
    let r0 = kernel.kernel_inner_radius();
    if !(r0 > 0.0) {
        return Err(Error::Degenerate("kernel inner radius is zero".into()));
    }
    let far = kernel.bounding_box().farthest_corner_distance(&x0).min(kernel.radius_bound() + norm(&x0));
    let per_doubling = (n * schedule.refinement.max(1)) as f64;
    let q = if far > r0 { (per_doubling * (far / r0).log2()).ceil() as usize } else { 0 };
    let radii: Vec<f64> = (0..=q).map(|i| r0 * 2f64.powf(i as f64 / per_doubling)).collect();
    let samples = ((4 * q.max(1)) as f64 / (eps * eps)).ceil() as usize;
    let delta = r0 / (n as f64).sqrt();

    // Phase 0: exact uniform points of B(x₀, r₀) ⊆ K.
    let mut points: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, purpose::VOLUME_PHASE, j as u64);
            let mut u = vec![0.0; n];
            uniform_in_ball(&mut rng, r0, &mut u);
            u.iter().zip(x0.iter()).map(|(a, b)| a + b).collect()
        })
        .collect();

    let mut log_volume = ball_volume(n, r0).ln();
    let mut log_var = 0.0;
    let mut phases = Vec::with_capacity(q);
    for i in 1..=q {
        let section = BallSection { body: kernel, center: x0.to_vec(), radius: radii[i] };
        let inner = radii[i - 1];
        let diam = 2.0 * radii[i];
        let steps = (2.0 * (n as f64 + 2.0) * (diam / delta).powi(2)).ceil() as u64;
        let results: Vec<(Vec<f64>, u64, u64)> = points
            .par_iter()
            .enumerate()
            .map(|(j, start)| {
                let rng = stream(seed, purpose::VOLUME_PHASE, ((i as u64) << 32) | j as u64);
                let mut chain = Chain::new(&section, start, rng)?;
                chain.run(delta, steps);
                let (p, a) = (chain.proposals(), chain.accepts());
                Ok((chain.into_current(), p, a))
            })
            .collect::<Result<_>>()?;
        let proposals: u64 = results.iter().map(|r| r.1).sum();
        let accepts: u64 = results.iter().map(|r| r.2).sum();
        let acceptance = accepts as f64 / proposals.max(1) as f64;
        if acceptance < 1e-3 {
            return Err(Error::ChainStuck(acceptance));
        }
        points = results.into_iter().map(|r| r.0).collect();
        let hits = points.iter().filter(|p| crate::geometry::distance(p, &x0) <= inner).count();
        let ratio = hits as f64 / samples as f64;
        if ratio < 0.25 {
            return Err(Error::PhaseRatio { phase: i, ratio });
        }
        log_volume -= ratio.ln();
        log_var += (1.0 - ratio) / (ratio * samples as f64);
        phases.push(PhaseRecord { radius: radii[i], ratio, steps, acceptance });
    }
    let volume = log_volume.exp();
    let sd = log_var.sqrt();
    Ok(VolumeEstimate {
        volume,
        ci_low: (log_volume - Z95 * sd).exp(),
        ci_high: (log_volume + Z95 * sd).exp(),
        log_sd: sd,
        base_radius: r0,
        samples_per_phase: samples,
        phases,
    })
}

/// `(η̂, standard error)`: the fraction of `samples` passing the kernel oracle.
pub fn estimate_eta<B: StarBody + ?Sized>(body: &B, samples: &[Vec<f64>]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples("no samples".into()));
    }
    let hits = samples.iter().filter(|p| body.kernel_contains(p)).count();
    if hits == 0 {
        return Err(Error::InsufficientSamples(format!(
            "no kernel hits among {} samples; eta is below resolution",
            samples.len()
        )));
    }
    let eta = hits as f64 / samples.len() as f64;
    Ok((eta, binomial_se(eta, samples.len())))
}

/// Samples needed for relative 95% half-width `eps/2` on η̂.
pub fn eta_sample_count(eta: f64, eps: f64) -> usize {
    ((1.0 - eta) / eta * (2.0 * Z95 / eps).powi(2)).ceil() as usize
}

const ETA_PILOT: usize = 500;
const ETA_MAX_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyVolume {
    pub volume: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub eta_hat: f64,
    pub eta_se: f64,
    pub eta_samples: usize,
    pub walk_delta: f64,
    pub walk_steps: u64,
    pub kernel: VolumeEstimate,
}

/// `vol(K)/η̂` with a delta-method 95% interval on the log scale.
pub fn body_volume<B: StarBody>(body: &B, eps: f64, seed: u64) -> Result<BodyVolume> {
    let kernel = kernel_volume(&KernelView(body), eps, seed)?;
    let (plan, warm) = plan_for_body(body, 1.0, eps, seed ^ purpose::ETA)?;
    let pilot = sample_uniform(body, ETA_PILOT, &plan, &warm, seed ^ (purpose::ETA << 8))?;
    let (eta_pilot, _) = estimate_eta(body, &pilot.points)?;
    let count =
        if eta_pilot >= 1.0 { ETA_PILOT } else { eta_sample_count(eta_pilot, eps).clamp(ETA_PILOT, ETA_MAX_SAMPLES) };
    let run = sample_uniform(body, count, &plan, &warm, seed ^ (purpose::ETA << 16))?;
    let (eta_hat, eta_se) = estimate_eta(body, &run.points)?;
    let log_volume = kernel.volume.ln() - eta_hat.ln();
    let sd = (kernel.log_sd.powi(2) + (eta_se / eta_hat).powi(2)).sqrt();
    Ok(BodyVolume {
        volume: log_volume.exp(),
        ci_low: (log_volume - Z95 * sd).exp(),
        ci_high: (log_volume + Z95 * sd).exp(),
        eta_hat,
        eta_se,
        eta_samples: count,
        walk_delta: run.delta,
        walk_steps: run.steps,
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_ball, make_cube};
    use crate::geometry::affine_image;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    #[test]
    fn disk_and_square() {
        let disk = make_ball(2, 1.0).unwrap();
        let v = kernel_volume(&disk, 0.05, 1).unwrap();
        assert!((v.volume / std::f64::consts::PI - 1.0).abs() < 0.05, "{v:?}");
        let sq = make_cube(2, 1.0).unwrap();
        let v = kernel_volume(&sq, 0.05, 2).unwrap();
        assert!((v.volume / 4.0 - 1.0).abs() < 0.05, "{v:?}");
        assert!(v.ci_low < v.volume && v.volume < v.ci_high);
        assert!(v.phases.iter().all(|p| p.ratio >= 0.25));
    }

    #[test]
    fn scaling_multiplies_by_c_to_the_n() {
        let sq: Arc<dyn StarBody> = Arc::new(make_cube(2, 1.0).unwrap());
        let big = affine_image(sq.clone(), DMatrix::identity(2, 2) * 3.0, vec![1.0, 1.0]).unwrap();
        let a = kernel_volume(&sq, 0.05, 3).unwrap().volume;
        let b = kernel_volume(&big, 0.05, 3).unwrap().volume;
        assert!((b / (9.0 * a) - 1.0).abs() < 0.08, "{a} {b}");
    }

    #[test]
    fn convex_body_has_unit_eta() {
        let sq = make_cube(2, 1.0).unwrap();
        let pts = crate::constructions::exact_samples(&sq, 100, 4).unwrap();
        assert_eq!(estimate_eta(&sq, &pts).unwrap(), (1.0, 0.0));
        let bv = body_volume(&sq, 0.1, 5).unwrap();
        assert_eq!(bv.eta_hat, 1.0);
        assert_eq!(bv.volume, bv.kernel.volume);
    }

    #[test]
    fn eta_errors_without_hits() {
        let sq = make_cube(2, 1.0).unwrap();
        assert!(estimate_eta(&sq, &[]).is_err());
        let outside = crate::geometry::KOfMHalfspaces::new(
            1,
            vec![
                crate::Halfspace::new(vec![1.0, 0.0], 0.0).unwrap(),
                crate::Halfspace::new(vec![0.0, 1.0], 0.0).unwrap(),
            ],
            Some(vec![
                crate::Halfspace::new(vec![1.0, 0.0], 1.0).unwrap(),
                crate::Halfspace::new(vec![-1.0, 0.0], 1.0).unwrap(),
                crate::Halfspace::new(vec![0.0, 1.0], 1.0).unwrap(),
                crate::Halfspace::new(vec![0.0, -1.0], 1.0).unwrap(),
            ]),
            crate::Point::new(vec![-0.5, -0.5]).unwrap(),
            None,
        )
        .unwrap();
        assert!(estimate_eta(&outside, &[vec![0.5, -0.5]]).is_err());
    }

    #[test]
    fn eta_budget_scales_inverse_square() {
        let a = eta_sample_count(0.2, 0.1) as f64;
        let b = eta_sample_count(0.2, 0.05) as f64;
        assert!((b / a - 4.0).abs() < 1e-3);
        assert!(eta_sample_count(0.1, 0.1) > eta_sample_count(0.2, 0.1));
    }
}
