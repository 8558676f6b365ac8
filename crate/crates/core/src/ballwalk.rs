//! The ball walk, its step-count formulas, and seeded multi-chain sampling
//! from a kernel warm start.
//!
//! Every chain owns a ChaCha stream keyed by `(seed, purpose, index)`, so the
//! output of [`sample_uniform`] is a pure function of its inputs no matter how
//! rayon schedules the chains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dimension, KernelView, Point, StarBody};
use crate::rng::{purpose, stream, uniform_in_ball, StreamRng};
use crate::stats::binned_tv_1d;

/// Constant of the step-count bound, `2²⁹`.
pub const THEORY_CONSTANT: f64 = 536_870_912.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub delta: f64,
    pub steps: u64,
    pub seed: u64,
    pub record_trace: bool,
}

impl WalkConfig {
    pub fn new(delta: f64, steps: u64, seed: u64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("step radius {delta} must be positive")));
        }
        Ok(WalkConfig { delta, steps, seed, record_trace: false })
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// A ball-walk chain on `body`.
pub struct Chain<B> {
    body: B,
    current: Vec<f64>,
    scratch: Vec<f64>,
    proposals: u64,
    accepts: u64,
    rng: StreamRng,
}

impl<B: StarBody> Chain<B> {
    pub fn new(body: B, start: &[f64], rng: StreamRng) -> Result<Self> {
        check_dimension(body.dimension(), start.len())?;
        if !body.contains(start) {
            return Err(Error::OutsideBody);
        }
        Ok(Chain { body, current: start.to_vec(), scratch: vec![0.0; start.len()], proposals: 0, accepts: 0, rng })
    }

    /// One step: propose uniformly in `B(current, delta)`, move if the
    /// proposal is in the body, otherwise stay.
    #[inline]
    pub fn step(&mut self, delta: f64) -> &[f64] {
        uniform_in_ball(&mut self.rng, delta, &mut self.scratch);
        for (p, c) in self.scratch.iter_mut().zip(&self.current) {
            *p += c;
        }
        self.proposals += 1;
        if self.body.contains(&self.scratch) {
            std::mem::swap(&mut self.current, &mut self.scratch);
            self.accepts += 1;
        }
        debug_assert!(self.body.contains(&self.current));
        &self.current
    }

    pub fn run(&mut self, delta: f64, steps: u64) -> &[f64] {
        for _ in 0..steps {
            self.step(delta);
        }
        &self.current
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn proposals(&self) -> u64 {
        self.proposals
    }

    pub fn accepts(&self) -> u64 {
        self.accepts
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }

    pub fn into_current(self) -> Vec<f64> {
        self.current
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub proposals: u64,
    pub accepts: u64,
    /// Fraction of accepted proposals; an unbiased estimate of the average
    /// local conductance along the trajectory.
    pub acceptance_rate: f64,
    /// Start point followed by the point after each step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<f64>>>,
}

/// Runs `config.steps` steps from `start` on the chain stream of `config.seed`.
pub fn run_chain<B: StarBody>(body: &B, start: &Point, config: &WalkConfig) -> Result<(Point, ChainStats)> {
    let mut chain = Chain::new(body, start, stream(config.seed, purpose::CHAIN, 0))?;
    let mut trace = config.record_trace.then(|| {
        let mut t = Vec::with_capacity(config.steps as usize + 1);
        t.push(start.to_vec());
        t
    });
    for _ in 0..config.steps {
        let x = chain.step(config.delta);
        if let Some(t) = trace.as_mut() {
            t.push(x.to_vec());
        }
    }
    let stats = ChainStats {
        proposals: chain.proposals(),
        accepts: chain.accepts(),
        acceptance_rate: chain.acceptance_rate(),
        trace,
    };
    Ok((Point::from_finite(chain.into_current()), stats))
}

/// How the step radius and step count actually used were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticalSchedule {
    pub delta: f64,
    pub m: u64,
    /// Diffusion floor `(n+2)·(D/δ)²/acceptance` the search started from.
    pub floor: u64,
    pub pilot_acceptance: f64,
    /// Max-coordinate marginal TV between the ensembles at `m` and `2m`.
    pub plateau_tv: f64,
    pub plateau_threshold: f64,
    pub doublings: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingPlan {
    pub n: usize,
    pub diameter: f64,
    pub warmth: f64,
    pub eta: f64,
    pub eps: f64,
    pub constant: f64,
    /// `ε / (8M√n)`.
    pub delta: f64,
    /// `⌈C·n²D²M²/(η²ε²)·ln(2M/ε)⌉`, as a float because it routinely exceeds `u64`.
    pub m: f64,
    pub practical: Option<PracticalSchedule>,
}

/// Step radius and step count of the sampling theorem for an `M`-warm start.
pub fn mixing_plan(n: usize, diameter: f64, warmth: f64, eta: f64, eps: f64) -> Result<MixingPlan> {
    MixingPlan::with_constant(n, diameter, warmth, eta, eps, THEORY_CONSTANT)
}

impl MixingPlan {
    pub fn with_constant(n: usize, diameter: f64, warmth: f64, eta: f64, eps: f64, constant: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        positive("diameter", diameter)?;
        positive("warmth", warmth)?;
        positive("eta", eta)?;
        positive("eps", eps)?;
        positive("constant", constant)?;
        if eta > 1.0 {
            return Err(Error::InvalidParameter(format!("eta = {eta} exceeds 1")));
        }
        if eps >= 1.0 {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be below 1")));
        }
        let nf = n as f64;
        let delta = eps / (8.0 * warmth * nf.sqrt());
        let m = (constant * nf * nf * diameter * diameter * warmth * warmth / (eta * eta * eps * eps)
            * (2.0 * warmth / eps).ln())
        .ceil();
        Ok(MixingPlan { n, diameter, warmth, eta, eps, constant, delta, m, practical: None })
    }

    /// Step radius used by [`sample_uniform`].
    pub fn effective_delta(&self) -> f64 {
        self.practical.as_ref().map_or(self.delta, |p| p.delta)
    }

    /// Step count used by [`sample_uniform`]; the theoretical count saturates
    /// at `u64::MAX`.
    pub fn effective_steps(&self) -> u64 {
        match &self.practical {
            Some(p) => p.m,
            None => {
                if self.m >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    self.m as u64
                }
            }
        }
    }
}

/// Step count of the isotropic-kernel sampling theorem:
/// `2⁴⁴n³/(η⁴ε²)·ln(2/(ηε))`.
pub fn isotropic_steps(n: usize, eta: f64, eps: f64) -> f64 {
    let nf = n as f64;
    (17_592_186_044_416.0 * nf.powi(3) / (eta.powi(4) * eps * eps) * (2.0 / (eta * eps)).ln()).ceil()
}

/// `M·s + M·(1 − φ²/2)^m`.
pub fn tv_decay_bound(warmth: f64, s: f64, phi_s: f64, m: u64) -> Result<f64> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::InvalidParameter(format!("s = {s} must lie in (0, 1/2]")));
    }
    if !(0.0..=1.0).contains(&phi_s) {
        return Err(Error::InvalidParameter(format!("phi_s = {phi_s} must lie in [0, 1]")));
    }
    Ok(warmth * s + warmth * (1.0 - phi_s * phi_s / 2.0).powf(m as f64))
}

/// How warm-start points are drawn from the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum WarmStart {
    /// Rejection from the body's bounding box against the kernel oracle.
    KernelRejection { pilot_acceptance: f64, max_attempts: u64 },
    /// Ball walk restricted to the (convex) kernel, started at the interior point.
    KernelWalk { delta: f64, steps: u64 },
}

const REJECTION_MAX_DIM: usize = 6;
const REJECTION_PILOT: usize = 20_000;
const REJECTION_MIN_ACCEPT: f64 = 1e-4;
const REJECTION_BUDGET: u64 = 1_000_000;

/// Chooses and parameterizes the warm-start procedure for `body`.
pub fn choose_warm_start<B: StarBody>(body: &B, seed: u64) -> WarmStart {
    let n = body.dimension();
    if n <= REJECTION_MAX_DIM {
        let bbox = body.bounding_box();
        let mut rng = stream(seed, purpose::WARM_START, u64::MAX);
        let mut x = vec![0.0; n];
        let hits = (0..REJECTION_PILOT)
            .filter(|_| {
                bbox.sample_into(&mut rng, &mut x);
                body.kernel_contains(&x)
            })
            .count();
        let rate = hits as f64 / REJECTION_PILOT as f64;
        if rate >= REJECTION_MIN_ACCEPT {
            return WarmStart::KernelRejection { pilot_acceptance: rate, max_attempts: REJECTION_BUDGET };
        }
    }
    let delta = practical_delta(body);
    let steps = diffusion_floor(n, body.diameter_bound(), delta, 0.5);
    WarmStart::KernelWalk { delta, steps }
}

/// Draws warm-start point `index` from the kernel.
pub fn warm_start_point<B: StarBody>(body: &B, method: &WarmStart, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut rng = stream(seed, purpose::WARM_START, index);
    match *method {
        WarmStart::KernelRejection { max_attempts, .. } => {
            let bbox = body.bounding_box();
            let mut x = vec![0.0; body.dimension()];
            for _ in 0..max_attempts {
                bbox.sample_into(&mut rng, &mut x);
                if body.kernel_contains(&x) {
                    return Ok(x);
                }
            }
            Err(Error::KernelRejection { attempts: max_attempts })
        }
        WarmStart::KernelWalk { delta, steps } => {
            let kernel = KernelView(body);
            let start = body.interior_point();
            let mut chain = Chain::new(&kernel, &start, rng)?;
            chain.run(delta, steps);
            Ok(chain.into_current())
        }
    }
}

/// `r/√n` for the kernel inner radius `r`: proposals from the interior point
/// are accepted with probability one.
pub fn practical_delta<B: StarBody + ?Sized>(body: &B) -> f64 {
    body.kernel_inner_radius() / (body.dimension() as f64).sqrt()
}

/// `(n+2)·(D/δ)² / acceptance`, rounded up.
pub fn diffusion_floor(n: usize, diameter: f64, delta: f64, acceptance: f64) -> u64 {
    let ratio = diameter / delta;
    ((n as f64 + 2.0) * ratio * ratio / acceptance.max(0.05)).ceil() as u64
}

const PILOT_CHAINS: usize = 512;
const PILOT_BINS: usize = 16;
const PILOT_MAX_DOUBLINGS: u32 = 8;

/// Picks `(δ, m)` for desk-scale runs: `δ` from the kernel inner radius, `m`
/// from the diffusion floor, doubled until the coordinate marginals of a
/// 512-chain pilot ensemble stop changing between `m` and `2m`.
pub fn practical_schedule<B: StarBody>(body: &B, warm: &WarmStart, seed: u64) -> Result<PracticalSchedule> {
    let n = body.dimension();
    let delta = practical_delta(body);
    if !(delta > 0.0) {
        return Err(Error::Degenerate("kernel inner radius is zero".into()));
    }
    let mut chains: Vec<Chain<&B>> = (0..PILOT_CHAINS)
        .into_par_iter()
        .map(|i| {
            let start = warm_start_point(body, warm, seed ^ 0x9E37_79B9_7F4A_7C15, i as u64)?;
            Chain::new(body, &start, stream(seed, purpose::PILOT, i as u64))
        })
        .collect::<Result<_>>()?;
    // Short burst for the acceptance rate.
    let burst = 200u64;
    chains.par_iter_mut().for_each(|c| {
        c.run(delta, burst);
    });
    let accepts: u64 = chains.iter().map(|c| c.accepts()).sum();
    let pilot_acceptance = accepts as f64 / (burst * PILOT_CHAINS as u64) as f64;
    if pilot_acceptance < 1e-3 {
        return Err(Error::ChainStuck(pilot_acceptance));
    }
    let floor = diffusion_floor(n, body.diameter_bound(), delta, pilot_acceptance);
    let bbox = body.bounding_box();
    let threshold = 2.0 * (PILOT_BINS as f64 / (std::f64::consts::PI * PILOT_CHAINS as f64)).sqrt();
    let mut m = floor.max(burst);
    let mut done = burst;
    let mut doublings = 0;
    loop {
        let advance = |chains: &mut Vec<Chain<&B>>, to: u64, from: u64| {
            chains.par_iter_mut().for_each(|c| {
                c.run(delta, to - from);
            });
        };
        advance(&mut chains, m, done);
        let at_m: Vec<Vec<f64>> = chains.iter().map(|c| c.current().to_vec()).collect();
        advance(&mut chains, 2 * m, m);
        done = 2 * m;
        let tv = (0..n)
            .map(|j| {
                let a: Vec<f64> = at_m.iter().map(|p| p[j]).collect();
                let b: Vec<f64> = chains.iter().map(|c| c.current()[j]).collect();
                binned_tv_1d(&a, &b, bbox.lo[j], bbox.hi[j], PILOT_BINS)
            })
            .fold(0.0, f64::max);
        if tv <= threshold || doublings == PILOT_MAX_DOUBLINGS {
            return Ok(PracticalSchedule {
                delta,
                m,
                floor,
                pilot_acceptance,
                plateau_tv: tv,
                plateau_threshold: threshold,
                doublings,
            });
        }
        m *= 2;
        doublings += 1;
    }
}

/// Plan with the practical override filled in for `body`.
pub fn plan_for_body<B: StarBody>(body: &B, eta: f64, eps: f64, seed: u64) -> Result<(MixingPlan, WarmStart)> {
    let warm = choose_warm_start(body, seed);
    let mut plan = mixing_plan(body.dimension(), body.diameter_bound(), 1.0 / eta, eta, eps)?;
    plan.practical = Some(practical_schedule(body, &warm, seed)?);
    Ok((plan, warm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub points: Vec<Vec<f64>>,
    pub delta: f64,
    pub steps: u64,
    pub proposals: u64,
    pub accepts: u64,
    pub acceptance_rate: f64,
    pub warm_start: WarmStart,
}

/// `count` points, each the end of an independent `m`-step chain started
/// from its own kernel warm-start point.
pub fn sample_uniform<B: StarBody>(
    body: &B,
    count: usize,
    plan: &MixingPlan,
    warm: &WarmStart,
    seed: u64,
) -> Result<SampleRun> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let delta = plan.effective_delta();
    let steps = plan.effective_steps();
    let results: Vec<(Vec<f64>, u64, u64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let start = warm_start_point(body, warm, seed, i as u64)?;
            let mut chain = Chain::new(body, &start, stream(seed, purpose::SAMPLE, i as u64))?;
            chain.run(delta, steps);
            let (p, a) = (chain.proposals(), chain.accepts());
            Ok((chain.into_current(), p, a))
        })
        .collect::<Result<_>>()?;
    let proposals: u64 = results.iter().map(|r| r.1).sum();
    let accepts: u64 = results.iter().map(|r| r.2).sum();
    Ok(SampleRun {
        points: results.into_iter().map(|r| r.0).collect(),
        delta,
        steps,
        proposals,
        accepts,
        acceptance_rate: if proposals == 0 { 1.0 } else { accepts as f64 / proposals as f64 },
        warm_start: warm.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_ball, make_cube};
    use crate::geometry::distance;
    use proptest::prelude::*;

    #[test]
    fn proposals_stay_within_delta() {
        let cube = make_cube(3, 10.0).unwrap();
        let mut chain = Chain::new(&cube, &[0.0; 3], stream(1, purpose::CHAIN, 0)).unwrap();
        let mut prev = chain.current().to_vec();
        for _ in 0..1000 {
            let x = chain.step(1e-3).to_vec();
            assert!(distance(&x, &prev) <= 1e-3 * (1.0 + 1e-12));
            prev = x;
        }
    }

    #[test]
    fn interior_steps_always_accepted() {
        let ball = make_ball(3, 1.0).unwrap();
        let mut chain = Chain::new(&ball, &[0.0; 3], stream(2, purpose::CHAIN, 0)).unwrap();
        for _ in 0..10_000 {
            chain.step(0.1);
            // Reset to the centre so every trial has the full ball available.
            chain.current.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(chain.accepts(), 10_000);
    }

    #[test]
    fn flat_face_accepts_half() {
        let cube = make_cube(2, 100.0).unwrap();
        let start = [100.0, 0.0];
        let mut accepted = 0;
        let mut rng = stream(3, purpose::CHAIN, 0);
        let mut u = [0.0; 2];
        for _ in 0..10_000 {
            uniform_in_ball(&mut rng, 0.5, &mut u);
            if cube.contains(&[start[0] + u[0], start[1] + u[1]]) {
                accepted += 1;
            }
        }
        assert!((accepted as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn run_chain_zero_steps_and_determinism() {
        let ball = make_ball(2, 1.0).unwrap();
        let start = Point::new(vec![0.3, -0.2]).unwrap();
        let cfg = WalkConfig::new(0.2, 0, 5).unwrap();
        assert_eq!(run_chain(&ball, &start, &cfg).unwrap().0, start);
        let cfg = WalkConfig::new(0.2, 500, 5).unwrap();
        let a = run_chain(&ball, &start, &cfg).unwrap().0;
        let b = run_chain(&ball, &start, &cfg).unwrap().0;
        assert_eq!(a.coords(), b.coords());
        let outside = Point::new(vec![2.0, 0.0]).unwrap();
        assert!(matches!(run_chain(&ball, &outside, &cfg), Err(Error::OutsideBody)));
    }

    #[test]
    fn mixing_plan_arithmetic() {
        let plan = mixing_plan(2, 1.0, 2.0, 0.5, 0.25).unwrap();
        assert!((plan.delta - 1.1048543456039804e-2).abs() < 1e-15);
        let twice = mixing_plan(2, 2.0, 2.0, 0.5, 0.25).unwrap();
        let raw = |p: &MixingPlan| {
            let nf = p.n as f64;
            THEORY_CONSTANT * nf * nf * p.diameter.powi(2) * p.warmth.powi(2) / (p.eta * p.eta * p.eps * p.eps)
                * (2.0 * p.warmth / p.eps).ln()
        };
        assert_eq!(raw(&twice), 4.0 * raw(&plan));
        assert!(mixing_plan(2, 1.0, 2.0, 0.5, 1.0).is_err());
        assert!(mixing_plan(2, -1.0, 2.0, 0.5, 0.5).is_err());
        assert!(mixing_plan(2, 1.0, 2.0, 1.5, 0.5).is_err());
    }

    #[test]
    fn decay_bound_values() {
        assert_eq!(tv_decay_bound(2.0, 0.25, 0.3, 0).unwrap(), 2.0 * 0.25 + 2.0);
        assert_eq!(tv_decay_bound(2.0, 0.25, 0.0, 10_000).unwrap(), 2.5);
        let v = tv_decay_bound(2.0, 1.0 / 16.0, 0.1, 2000).unwrap();
        assert!((v - (0.125 + 2.0 * 0.995f64.powi(2000))).abs() < 1e-15);
        assert!((v - 0.12509).abs() < 1e-5);
        assert!(tv_decay_bound(2.0, 0.6, 0.1, 1).is_err());
    }

    #[test]
    fn sample_uniform_reproducible() {
        let ball = make_ball(3, 1.0).unwrap();
        let (plan, warm) = plan_for_body(&ball, 1.0, 0.1, 7).unwrap();
        let a = sample_uniform(&ball, 3, &plan, &warm, 7).unwrap();
        let b = sample_uniform(&ball, 3, &plan, &warm, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| ball.contains(p)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn chain_never_leaves_body(seed in any::<u64>(), delta in 0.01f64..2.0, x in -0.9f64..0.9) {
            let ball = make_ball(2, 1.0).unwrap();
            let mut chain = Chain::new(&ball, &[x, 0.0], stream(seed, purpose::CHAIN, 0)).unwrap();
            for _ in 0..200 {
                let before = chain.current().to_vec();
                let accepts = chain.accepts();
                let now = chain.step(delta).to_vec();
                prop_assert!(ball.contains(&now));
                if chain.accepts() == accepts {
                    prop_assert_eq!(now, before);
                }
            }
            prop_assert!(chain.accepts() <= chain.proposals());
        }

        #[test]
        fn decay_bound_monotone_in_m(phi in 0.0f64..1.0, s in 0.01f64..0.5, m in 0u64..10_000) {
            let a = tv_decay_bound(1.5, s, phi, m).unwrap();
            let b = tv_decay_bound(1.5, s, phi, m + 1).unwrap();
            prop_assert!(b <= a);
            prop_assert!(a >= 1.5 * s);
        }
    }
}
