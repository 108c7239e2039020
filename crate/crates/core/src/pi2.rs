//! Simplified policy improvement with path integrals.
//!
//! Each iteration perturbs the current forcing weights with Gaussian noise
//! whose spread grows with the basis index, scores every rollout with the
//! accumulated trajectory cost, and moves to the exponentiated-cost weighted
//! average of the candidates. The unperturbed weights are always one of the
//! candidates, so a round of bad samples cannot drag the policy away.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::costs::{CostBreakdown, CostError, ModelConfig};
use crate::dmp::{Dmp, DmpError, ForcingWeights};

#[derive(Debug, Error)]
pub enum Pi2Error {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("cost of candidate {0} is not finite")]
    NonFiniteCost(usize),
    #[error("candidate weights sum to zero")]
    ZeroWeight,
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Pi2Error> = std::result::Result<T, E>;

/// Default physical length of the demonstration, a desk-scale reach.
pub const DEMO_LENGTH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi2Config {
    /// Perturbed rollouts per iteration, in addition to the unperturbed one.
    pub rollouts: usize,
    pub gamma: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub max_iters: usize,
    /// Stop once the primary shape cost reaches `target * length`.
    pub target: f64,
    pub length: f64,
    /// Physical length (m) of the demonstration the weights describe. The
    /// exploration bounds act on weights in those units, so the noise on the
    /// length-normalized weights is divided by this.
    pub demo_length: f64,
    pub seed: u64,
}

impl Pi2Config {
    pub fn for_model(model: &ModelConfig, seed: u64) -> Self {
        Pi2Config {
            rollouts: 16,
            gamma: 10.0,
            sigma_min: model.sigma_min,
            sigma_max: model.sigma_max,
            max_iters: 2000,
            target: model.target,
            length: 1.0,
            demo_length: DEMO_LENGTH,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rollouts < 1 {
            return Err(Pi2Error::Config("need at least one perturbed rollout".into()));
        }
        if !(self.gamma > 0.0) || self.max_iters == 0 || !(self.length > 0.0) || !(self.demo_length > 0.0) {
            return Err(Pi2Error::Config(format!(
                "gamma {}, max_iters {} and length {} must be positive",
                self.gamma, self.max_iters, self.length
            )));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_max >= 0.0) {
            return Err(Pi2Error::Config("exploration bounds must be >= 0".into()));
        }
        Ok(())
    }
}

/// Exploration variance of basis `i`: the log-scale bound grows
/// quadratically from `sigma_min` to `sigma_max` across the basis.
pub fn sigma_schedule(i: usize, n: usize, sigma_min: f64, sigma_max: f64) -> Result<f64> {
    if n < 2 || i >= n {
        return Err(Pi2Error::Config(format!("basis index {i} of {n}")));
    }
    let frac = i as f64 / (n - 1) as f64;
    let s = sigma_min + (sigma_max - sigma_min) * frac * frac;
    Ok(s.exp_m1().powi(2))
}

/// Standard deviations for every basis index.
pub fn sigma_profile(n: usize, sigma_min: f64, sigma_max: f64) -> Result<Vec<f64>> {
    (0..n).map(|i| sigma_schedule(i, n, sigma_min, sigma_max).map(f64::sqrt)).collect()
}

/// Generator for candidate `candidate` of iteration `iter`; independent of
/// evaluation order.
pub fn candidate_rng(seed: u64, iter: usize, candidate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iter as u64) << 24) | candidate as u64);
    rng
}

/// Adds independent `N(0, std[i]^2)` noise to every weight of every axis.
pub fn perturb_one<R: rand::Rng>(theta: &ForcingWeights, std: &[f64], rng: &mut R) -> ForcingWeights {
    let mut out = theta.clone();
    let n = theta.basis();
    for (k, w) in out.as_mut_slice().iter_mut().enumerate() {
        let eps: f64 = StandardNormal.sample(rng);
        *w += std[k % n] * eps;
    }
    out
}

/// The `q` perturbed candidates of one iteration.
pub fn perturb(theta: &ForcingWeights, std: &[f64], q: usize, seed: u64, iter: usize) -> Vec<ForcingWeights> {
    (1..=q).map(|c| perturb_one(theta, std, &mut candidate_rng(seed, iter, c))).collect()
}

/// `exp(-gamma (S - min) / (max - min))`, uniform when all costs coincide.
pub fn weights_from_costs(costs: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Pi2Error::NonFiniteCost(i));
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![1.0; costs.len()]);
    }
    Ok(costs.iter().map(|c| (-gamma * (c - lo) / (hi - lo)).exp()).collect())
}

/// Normalized weighted average of the candidates, elementwise. Accumulated
/// as offsets from the first candidate so identical candidates reproduce it
/// bit for bit.
pub fn update(candidates: &[ForcingWeights], weights: &[f64]) -> Result<ForcingWeights> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || candidates.is_empty() {
        return Err(Pi2Error::ZeroWeight);
    }
    let base = &candidates[0];
    let mut delta = vec![0.0; base.as_slice().len()];
    for (cand, w) in candidates.iter().zip(weights).skip(1) {
        for ((d, v), b) in delta.iter_mut().zip(cand.as_slice()).zip(base.as_slice()) {
            *d += w * (v - b);
        }
    }
    let mut out = base.clone();
    for (o, d) in out.as_mut_slice().iter_mut().zip(delta) {
        *o += d / total;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub weights: ForcingWeights,
    pub shape: f64,
    pub total: f64,
    pub costs: CostBreakdown,
}

/// Policy after every iteration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Pi2Trace {
    pub run_params: Vec<f64>,
    pub entries: Vec<TraceEntry>,
    /// Whether the target was reached before the iteration limit.
    pub completed: bool,
}

impl Pi2Trace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> &TraceEntry {
        self.entries.last().expect("a trace always holds the initial policy")
    }

    /// Best primary shape cost seen so far, per iteration.
    pub fn running_min_shape(&self) -> Vec<f64> {
        self.entries
            .iter()
            .scan(f64::INFINITY, |best, e| {
                *best = best.min(e.shape);
                Some(*best)
            })
            .collect()
    }

    /// `iter,S_shape,S_total`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,S_shape,S_total")?;
        for e in &self.entries {
            writeln!(w, "{},{:e},{:e}", e.iter, e.shape, e.total)?;
        }
        Ok(())
    }
}

fn score(dmp: &Dmp, model: &ModelConfig, run: &[f64], length: f64, theta: &ForcingWeights) -> Result<CostBreakdown> {
    let traj = dmp.rollout_local(theta, length)?;
    let costs = model.total_cost(&traj, length, run)?;
    if !costs.total.is_finite() || !costs.primary_shape().is_finite() {
        return Err(Pi2Error::NonFiniteCost(0));
    }
    Ok(costs)
}

/// Runs until the primary shape cost of the current policy reaches the
/// target or the iteration limit is hit. Entry `j` of the trace holds the
/// policy evaluated at the start of iteration `j`; an incomplete run is
/// returned with `completed == false`.
pub fn optimize(
    dmp: &Dmp,
    model: &ModelConfig,
    run: &[f64],
    config: &Pi2Config,
    init: &ForcingWeights,
) -> Result<Pi2Trace> {
    config.validate()?;
    let n = dmp.config().basis_count;
    let std: Vec<f64> = sigma_profile(n, config.sigma_min, config.sigma_max)?
        .into_iter()
        .map(|s| s / config.demo_length)
        .collect();
    let goal = config.target * config.length;
    let mut theta = init.clone();
    let mut current = score(dmp, model, run, config.length, &theta)?;
    let mut entries = Vec::new();
    for iter in 0.. {
        entries.push(TraceEntry {
            iter,
            weights: theta.clone(),
            shape: current.primary_shape(),
            total: current.total,
            costs: current.clone(),
        });
        if current.primary_shape() <= goal {
            return Ok(Pi2Trace { run_params: run.to_vec(), entries, completed: true });
        }
        if iter + 1 >= config.max_iters {
            break;
        }
        let mut candidates = vec![theta.clone()];
        candidates.extend(perturb(&theta, &std, config.rollouts, config.seed, iter));
        let scored: Vec<f64> = candidates[1..]
            .par_iter()
            .map(|c| score(dmp, model, run, config.length, c).map(|s| s.total))
            .collect::<Result<_>>()?;
        let mut totals = vec![current.total];
        totals.extend(scored);
        let w = weights_from_costs(&totals, config.gamma)?;
        theta = update(&candidates, &w)?;
        current = score(dmp, model, run, config.length, &theta)?;
    }
    Ok(Pi2Trace { run_params: run.to_vec(), entries, completed: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::ModelFamily;
    use crate::dmp::DmpConfig;
    use crate::geometry::{min_jerk_demo, DemoSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn demo_init(dmp: &Dmp) -> ForcingWeights {
        let demo = min_jerk_demo(&DemoSpec::default()).unwrap().embed(2);
        dmp.learn_from_demo(&demo, 1.0).unwrap()
    }

    #[test]
    fn schedule_values() {
        assert_relative_eq!(sigma_schedule(0, 10, 0.0003, 0.05).unwrap(), 9.0e-8, max_relative = 1e-3);
        assert_relative_eq!(sigma_schedule(9, 10, 0.0003, 0.05).unwrap(), 2.629e-3, max_relative = 1e-3);
        let flat: Vec<f64> = (0..5).map(|i| sigma_schedule(i, 5, 0.01, 0.01).unwrap()).collect();
        assert!(flat.iter().all(|v| *v == flat[0]));
        assert!(sigma_schedule(0, 1, 0.1, 0.2).is_err());
    }

    #[test]
    fn perturbation_statistics() {
        let theta = ForcingWeights::zeros(2, 10);
        let zero = perturb(&theta, &[0.0; 10], 4, 1, 0);
        assert!(zero.iter().all(|c| *c == theta));
        assert_eq!(perturb(&theta, &[0.1; 10], 4, 7, 3), perturb(&theta, &[0.1; 10], 4, 7, 3));
        assert_ne!(perturb(&theta, &[0.1; 10], 4, 7, 3), perturb(&theta, &[0.1; 10], 4, 7, 4));

        let std = sigma_profile(10, 0.0003, 0.05).unwrap();
        let var = std[9] * std[9];
        let draws = 100_000;
        let mut sum = 0.0;
        for c in 0..draws / 2 {
            let p = perturb_one(&theta, &std, &mut candidate_rng(11, 0, c));
            sum += p.row(0)[9].powi(2) + p.row(1)[9].powi(2);
        }
        let est = sum / draws as f64;
        assert!((est - var).abs() < 0.05 * var, "{est} vs {var}");
    }

    #[test]
    fn cost_weights() {
        let w = weights_from_costs(&[0.0, 5.0, 10.0], 10.0).unwrap();
        assert_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], 6.738e-3, max_relative = 1e-3);
        assert_relative_eq!(w[2], 4.54e-5, max_relative = 1e-3);
        assert_eq!(weights_from_costs(&[2.0; 4], 10.0).unwrap(), vec![1.0; 4]);
        assert!(matches!(weights_from_costs(&[1.0, f64::NAN], 10.0), Err(Pi2Error::NonFiniteCost(1))));
    }

    #[test]
    fn weighted_update() {
        let a = ForcingWeights::new(2, 2, vec![0.0; 4]).unwrap();
        let b = ForcingWeights::new(2, 2, vec![1.0; 4]).unwrap();
        assert_eq!(update(&[a.clone(), b.clone()], &[0.0, 1.0]).unwrap(), b);
        assert_eq!(update(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap().as_slice(), &[0.5; 4]);
        let e = (-10.0f64).exp();
        let mixed = update(&[a.clone(), b.clone()], &[1.0, e]).unwrap();
        assert_relative_eq!(mixed.as_slice()[0], 4.54e-5, max_relative = 1e-3);
        assert!(matches!(update(&[a, b], &[0.0, 0.0]), Err(Pi2Error::ZeroWeight)));
    }

    #[test]
    fn zero_target_stops_immediately() {
        let model = ModelConfig::preset(ModelFamily::OneParam2d);
        let dmp = Dmp::new(DmpConfig::with_basis(model.basis)).unwrap();
        let cfg = Pi2Config { target: 0.0, ..Pi2Config::for_model(&model, 0) };
        let trace = optimize(&dmp, &model, &[], &cfg, &demo_init(&dmp)).unwrap();
        assert!(trace.completed);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn no_exploration_never_moves() {
        let model = ModelConfig::preset(ModelFamily::OneParam2d);
        let dmp = Dmp::new(DmpConfig::with_basis(model.basis)).unwrap();
        let cfg = Pi2Config { sigma_min: 0.0, sigma_max: 0.0, max_iters: 20, ..Pi2Config::for_model(&model, 0) };
        let init = demo_init(&dmp);
        let trace = optimize(&dmp, &model, &[], &cfg, &init).unwrap();
        assert!(!trace.completed);
        assert_eq!(trace.len(), 20);
        assert!(trace.entries.iter().all(|e| e.weights == init));
    }

    #[test]
    fn one_param_run_reaches_target() {
        let model = ModelConfig::preset(ModelFamily::OneParam2d);
        let dmp = Dmp::new(DmpConfig::with_basis(model.basis)).unwrap();
        let cfg = Pi2Config::for_model(&model, 0);
        let trace = optimize(&dmp, &model, &[], &cfg, &demo_init(&dmp)).unwrap();
        assert!(trace.completed, "stopped at {} with {}", trace.len(), trace.last().shape);
        assert!(trace.last().shape <= -0.47);
        assert!(trace.last().shape < trace.entries[0].shape);
        let best = trace.running_min_shape();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        let again = optimize(&dmp, &model, &[], &cfg, &demo_init(&dmp)).unwrap();
        assert_eq!(again, trace);
    }

    proptest! {
        #[test]
        fn update_is_shift_invariant_and_convex(
            data in prop::collection::vec(-3.0f64..3.0, 24),
            costs in prop::collection::vec(-5.0f64..5.0, 4),
            shift in -100.0f64..100.0,
        ) {
            let cands: Vec<ForcingWeights> =
                data.chunks(6).map(|c| ForcingWeights::new(2, 3, c.to_vec()).unwrap()).collect();
            let w = weights_from_costs(&costs, 10.0).unwrap();
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let ws = weights_from_costs(&shifted, 10.0).unwrap();
            let a = update(&cands, &w).unwrap();
            let b = update(&cands, &ws).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
            for k in 0..6 {
                let lo = cands.iter().map(|c| c.as_slice()[k]).fold(f64::INFINITY, f64::min);
                let hi = cands.iter().map(|c| c.as_slice()[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(a.as_slice()[k] >= lo - 1e-12 && a.as_slice()[k] <= hi + 1e-12);
            }
        }
    }
}
