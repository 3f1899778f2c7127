//! Randomized stochastic gradient solvers.
//!
//! All solvers share one driver: the output index `R` is drawn first, then every player
//! takes a synchronous projected step from the current iterate using a mini-batch
//! direction. The solvers differ only in how a player's direction is formed:
//!
//! * [`rsg_run`]: stochastic first-order oracle,
//! * [`rs_rsg_run`]: two-point zeroth-order estimate of the nonsmooth part plus a sampled
//!   gradient of the smooth part,
//! * [`b_rs_rsg_run`]: as RS-RSG, with follower responses from stochastic approximation.

mod config;
mod lower;
mod rs_rsg;
mod rsg;
mod sizing;

pub use config::{
    Budget, BatchRule, FollowerMode, InnerSchedule, LowerLevelConfig, OutputRule, SolverConfig, StepRule, StopRule,
};
pub use lower::{b_rs_rsg_run, bias_bound, sa_error_bound, sa_lower_solve};
pub use rs_rsg::rs_rsg_run;
pub use rsg::rsg_run;
pub use sizing::{
    analytic_smoothness, batch_size_from_budget, empirical_sigma, estimate_smoothness, numeric_smoothness,
    sigma_hierarchical, sigma_nonsmooth, SmoothnessEstimate, SmoothnessMethod,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::games::Players;
use crate::rng::{sample_output_index, OutputDistribution, Purpose, RandomStream, StreamKey};
use crate::sets::{ConvexSet, StrategyProfile};

/// Cumulative oracle calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SampleCounts {
    /// Zeroth-order (function value) calls.
    pub zeroth: u64,
    /// First-order (gradient) calls.
    pub first: u64,
    /// Lower-level stochastic approximation steps.
    pub lower: u64,
}

impl SampleCounts {
    fn add(&mut self, other: SampleCounts) {
        self.zeroth += other.zeroth;
        self.first += other.first;
        self.lower += other.lower;
    }

    fn fits(&self, cost: SampleCounts, budget: &Budget) -> bool {
        let within = |used: u64, add: u64, cap: Option<u64>| cap.is_none_or(|c| used + add <= c);
        within(self.zeroth, cost.zeroth, budget.zeroth)
            && within(self.first, cost.first, budget.first)
            && within(self.lower, cost.lower, budget.lower)
    }
}

/// Residual of iterate `x^k` and the calls spent before it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub k: usize,
    pub samples: SampleCounts,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub k: usize,
    pub values: Vec<f64>,
}

/// Result of one solver path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    /// The output iterate `x^R`.
    pub output: Vec<f64>,
    /// The output index `R`, in `1..=iterations`.
    pub output_index: usize,
    /// Horizon `T` the output index was drawn over.
    pub planned_iterations: usize,
    /// Iterations actually carried out.
    pub iterations: usize,
    pub batch_size: usize,
    /// Calls spent over all executed iterations.
    pub samples: SampleCounts,
    pub trace: Vec<TracePoint>,
    /// Every `snapshot_stride`-th iterate plus the last one.
    pub iterates: Vec<Snapshot>,
    /// The budget ran out before the planned stopping point.
    pub truncated: bool,
    /// `R` was redrawn uniformly over the completed iterations after truncation.
    pub resampled: bool,
}

/// Residual evaluated along the trajectory.
pub type TraceFn<'a> = dyn Fn(&StrategyProfile) -> f64 + Sync + 'a;

/// Direction oracle plugged into the shared driver.
pub(crate) trait Directions {
    /// Calls consumed by iteration `k` (zero based) with batch size `batch`.
    fn cost(&self, k: usize, batch: usize) -> SampleCounts;

    /// Writes player `i`'s direction at iteration `k` into `out`, reading only `x`.
    fn direction(&self, k: usize, i: usize, x: &StrategyProfile, batch: usize, out: &mut [f64]) -> Result<()>;
}

/// Planned horizon: the configured iteration count, or the largest one the budget
/// allows.
fn plan_horizon(cfg: &SolverConfig, oracle: &dyn Directions, batch: usize) -> Result<usize> {
    if let Some(t) = cfg.iterations {
        return Ok(t);
    }
    if cfg.budget.is_unbounded() {
        return Err(Error::invalid("iterations", "set an iteration count or a budget"));
    }
    let mut used = SampleCounts::default();
    let mut t = 0usize;
    while t < MAX_HORIZON {
        let cost = oracle.cost(t, batch);
        if !used.fits(cost, &cfg.budget) {
            break;
        }
        used.add(cost);
        t += 1;
    }
    if t == 0 {
        return Err(Error::BudgetTooSmall(format!(
            "budget {:?} does not cover one iteration with batch size {batch}",
            cfg.budget
        )));
    }
    Ok(t)
}

/// Upper limit on a budget-derived horizon.
pub const MAX_HORIZON: usize = 100_000_000;

pub(crate) fn drive(
    players: &Players,
    cfg: &SolverConfig,
    path: u64,
    oracle: &dyn Directions,
    batch: usize,
    trace: Option<&TraceFn<'_>>,
) -> Result<RunRecord> {
    cfg.validate(players)?;
    let dim = players.partition().total_dim();
    let mut x = players.profile(match &cfg.x0 {
        Some(v) => v.clone(),
        None => players.joint().midpoint(),
    })?;
    let horizon = plan_horizon(cfg, oracle, batch)?;
    let steps: Vec<f64> = (0..horizon).map(|k| cfg.step.gamma(k)).collect::<Result<_>>()?;
    let dist = match cfg.output {
        OutputRule::Uniform => OutputDistribution::uniform(horizon)?,
        OutputRule::Weighted { lipschitz } => OutputDistribution::from_steps(&steps, lipschitz)?,
    };
    let mut r = sample_output_index(
        &mut RandomStream::derive(cfg.seed, StreamKey::new(path, 0, 0, Purpose::Output, 0)),
        &dist,
    );
    let target = match cfg.stop {
        StopRule::OutputIndex => r,
        StopRule::Horizon => horizon,
    };
    let order: Vec<usize> = cfg
        .update_order
        .clone()
        .unwrap_or_else(|| (0..players.count()).collect());
    let stride = cfg.trace_stride.max(1);

    let mut history = Vec::with_capacity((target + 1) * dim);
    history.extend_from_slice(x.values());
    let mut samples = SampleCounts::default();
    let mut trace_points = Vec::new();
    let mut snapshots = Vec::new();
    let mut directions = vec![0.0; dim];
    let mut truncated = false;
    let mut completed = 0;

    for k in 0..target {
        if let Some(f) = trace {
            if k % stride == 0 {
                trace_points.push(TracePoint {
                    k,
                    samples,
                    value: f(&x),
                });
            }
        }
        if let Some(s) = cfg.snapshot_stride {
            if s > 0 && k % s == 0 {
                snapshots.push(Snapshot {
                    k,
                    values: x.values().to_vec(),
                });
            }
        }
        let cost = oracle.cost(k, batch);
        if !samples.fits(cost, &cfg.budget) {
            truncated = true;
            break;
        }
        for &i in &order {
            let range = players.partition().range(i)?;
            oracle.direction(k, i, &x, batch, &mut directions[range])?;
        }
        let gamma = steps[k];
        for (v, d) in x.values_mut().iter_mut().zip(&directions) {
            *v -= gamma * d;
        }
        players.joint().project_in_place(x.values_mut());
        samples.add(cost);
        history.extend_from_slice(x.values());
        completed = k + 1;
    }

    if cfg.snapshot_stride.is_some_and(|s| s > 0) && snapshots.last().is_none_or(|s: &Snapshot| s.k != completed) {
        snapshots.push(Snapshot {
            k: completed,
            values: x.values().to_vec(),
        });
    }

    let mut resampled = false;
    if completed < r {
        if completed == 0 {
            return Err(Error::BudgetTooSmall("no iteration fits in the budget".into()));
        }
        let dist = OutputDistribution::uniform(completed)?;
        r = sample_output_index(
            &mut RandomStream::derive(cfg.seed, StreamKey::new(path, 0, 0, Purpose::Resample, 0)),
            &dist,
        );
        resampled = true;
    }
    Ok(RunRecord {
        output: history[r * dim..(r + 1) * dim].to_vec(),
        output_index: r,
        planned_iterations: horizon,
        iterations: completed,
        batch_size: batch,
        samples,
        trace: trace_points,
        iterates: snapshots,
        truncated,
        resampled,
    })
}

/// Key of the stream for `(iteration, player, purpose, index)` on `path`.
#[inline]
pub(crate) fn stream(seed: u64, path: u64, k: usize, i: usize, purpose: Purpose, index: u64) -> RandomStream {
    RandomStream::derive(seed, StreamKey::new(path, k as u64, i as u64, purpose, index))
}
