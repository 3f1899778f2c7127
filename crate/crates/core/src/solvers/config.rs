use serde::Serialize;

use crate::error::{Error, Result};
use crate::games::Players;
use crate::sets::ConvexSet;

/// Step sizes `gamma_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StepRule {
    Constant(f64),
    /// One step per iteration; the run may not exceed its length.
    Explicit(Vec<f64>),
}

impl StepRule {
    /// `gamma = 1 / (2 L)`.
    pub fn half_inverse(lipschitz: f64) -> Self {
        StepRule::Constant(0.5 / lipschitz)
    }

    pub fn gamma(&self, k: usize) -> Result<f64> {
        match self {
            StepRule::Constant(g) => Ok(*g),
            StepRule::Explicit(v) => v
                .get(k)
                .copied()
                .ok_or_else(|| Error::invalid("step", format!("no step given for iteration {}", k + 1))),
        }
    }

    fn steps(&self) -> Vec<f64> {
        match self {
            StepRule::Constant(g) => vec![*g],
            StepRule::Explicit(v) => v.clone(),
        }
    }
}

/// Mini-batch size `S_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum BatchRule {
    Constant(usize),
    /// `S = max(1, ceil(sigma sqrt(6 M) / (4 L D)))` with `M` the first-order budget.
    FromBudget { sigma: f64, lipschitz: f64, d: f64 },
}

/// Oracle-call budgets; `None` means unlimited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Budget {
    pub zeroth: Option<u64>,
    pub first: Option<u64>,
    pub lower: Option<u64>,
}

impl Budget {
    /// Total budget `M` for the upper level, split as `M0 = 2 M` zeroth-order and
    /// `M1 = M` first-order calls so that `T = floor(M / (S N))` for every scheme.
    pub fn upper(m: u64) -> Self {
        Self {
            zeroth: Some(2 * m),
            first: Some(m),
            lower: None,
        }
    }

    pub fn with_lower(mut self, lower: u64) -> Self {
        self.lower = Some(lower);
        self
    }

    pub fn is_unbounded(&self) -> bool {
        self.zeroth.is_none() && self.first.is_none() && self.lower.is_none()
    }

    /// The `M` used by the batch-size formula.
    pub fn reference(&self) -> Option<u64> {
        self.first.or(self.zeroth.map(|z| z / 2))
    }
}

/// Distribution of the output index `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum OutputRule {
    Uniform,
    /// `P(R = k)` proportional to `gamma_k - L gamma_k^2`.
    Weighted { lipschitz: f64 },
}

/// Where the run stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopRule {
    /// Stop after iteration `R`.
    OutputIndex,
    /// Run the full horizon `T`; the output is still `x^R`. Every draw is keyed by
    /// iteration, so `x^R` is identical under both rules.
    Horizon,
}

/// Number of lower-level steps `t_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InnerSchedule {
    /// `t_k = ceil(k^(1 + delta))` with `k` one based.
    Power { delta: f64 },
    Constant(usize),
}

impl InnerSchedule {
    /// Steps at the zero-based iteration `k`.
    pub fn steps(&self, k: usize) -> usize {
        match self {
            InnerSchedule::Power { delta } => ((k + 1) as f64).powf(1.0 + delta).ceil() as usize,
            InnerSchedule::Constant(t) => *t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerLevelConfig {
    /// Initial step `alpha_0`; defaults to `1 / mu_i`.
    pub alpha0: Option<f64>,
    /// Offset `Gamma` in `alpha_t = alpha_0 / (t + Gamma)`.
    pub offset: f64,
    pub schedule: InnerSchedule,
}

impl Default for LowerLevelConfig {
    fn default() -> Self {
        Self {
            alpha0: None,
            offset: 1.0,
            schedule: InnerSchedule::Power { delta: 0.1 },
        }
    }
}

impl LowerLevelConfig {
    pub fn alpha0_for(&self, mu: f64) -> f64 {
        self.alpha0.unwrap_or(1.0 / mu)
    }
}

/// How the biased scheme obtains follower responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FollowerMode {
    /// Stochastic approximation with `t_k` steps.
    Stochastic,
    /// The exact response; requires a closed form.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Smoothing radius; ignored by RSG.
    pub eta: f64,
    pub step: StepRule,
    pub batch: BatchRule,
    /// Horizon `T`; derived from the budget when absent.
    pub iterations: Option<usize>,
    pub budget: Budget,
    pub output: OutputRule,
    pub lower: LowerLevelConfig,
    /// Initial point; the midpoint of `X` when absent.
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
    pub stop: StopRule,
    /// When set, the steps must satisfy `gamma_k <= 1 / (2 L)`.
    pub lipschitz: Option<f64>,
    /// Order in which player directions are evaluated. Updates are synchronous, so
    /// this cannot change the result.
    pub update_order: Option<Vec<usize>>,
    pub trace_stride: usize,
    pub snapshot_stride: Option<usize>,
}

impl SolverConfig {
    /// Constant step `gamma`, fixed batch size and horizon, uniform output.
    pub fn new(gamma: f64, batch: usize, iterations: usize) -> Self {
        Self {
            eta: 0.5,
            step: StepRule::Constant(gamma),
            batch: BatchRule::Constant(batch),
            iterations: Some(iterations),
            budget: Budget::default(),
            output: OutputRule::Uniform,
            lower: LowerLevelConfig::default(),
            x0: None,
            seed: 0,
            stop: StopRule::OutputIndex,
            lipschitz: None,
            update_order: None,
            trace_stride: 1,
            snapshot_stride: None,
        }
    }

    pub fn resolve_batch(&self) -> Result<usize> {
        match self.batch {
            BatchRule::Constant(s) => Ok(s),
            BatchRule::FromBudget { sigma, lipschitz, d } => {
                let m = self
                    .budget
                    .reference()
                    .ok_or_else(|| Error::invalid("batch", "batch size from budget needs a budget"))?;
                super::batch_size_from_budget(m as f64, sigma, lipschitz, d)
            }
        }
    }

    pub fn validate(&self, players: &Players) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid("eta", "smoothing radius must be positive"));
        }
        let steps = self.step.steps();
        if steps.is_empty() || steps.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("step", "steps must be positive"));
        }
        if let Some(l) = self.lipschitz {
            let cap = 0.5 / l;
            if steps.iter().any(|g| *g > cap * (1.0 + 1e-12)) {
                return Err(Error::invalid("step", format!("steps must not exceed 1/(2L) = {cap}")));
            }
        }
        if let (StepRule::Explicit(v), Some(t)) = (&self.step, self.iterations) {
            if v.len() < t {
                return Err(Error::invalid("step", "fewer steps than iterations"));
            }
        }
        if self.resolve_batch()? == 0 {
            return Err(Error::invalid("batch", "batch size must be positive"));
        }
        if self.iterations == Some(0) {
            return Err(Error::invalid("iterations", "horizon must be positive"));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != players.partition().total_dim() {
                return Err(Error::Dimension {
                    expected: players.partition().total_dim(),
                    got: x0.len(),
                });
            }
            if !players.joint().contains(x0, 0.0) {
                return Err(Error::invalid("x0", "initial point lies outside the strategy sets"));
            }
        }
        if let Some(order) = &self.update_order {
            let mut seen = vec![false; players.count()];
            if order.len() != players.count() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::invalid("update_order", "must be a permutation of the players"));
            }
        }
        if !(self.lower.offset.is_finite() && self.lower.offset > 0.0) {
            return Err(Error::invalid("offset", "lower-level step offset must be positive"));
        }
        match self.lower.schedule {
            InnerSchedule::Power { delta } if !(delta.is_finite() && delta > 0.0) => {
                return Err(Error::invalid("delta", "must be positive"));
            }
            InnerSchedule::Constant(0) => return Err(Error::invalid("inner_iterations", "must be positive")),
            _ => {}
        }
        Ok(())
    }
}
