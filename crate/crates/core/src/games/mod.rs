//! Game models.
//!
//! Three model families are supported, matching the three solver families:
//!
//! * [`SmoothGame`]: stochastic first-order oracle for each player's partial gradient.
//! * [`NonsmoothGame`]: each cost splits as `h_i(x_i, xi) + m_i(x, xi)` with `h_i`
//!   Lipschitz (possibly nonsmooth) and `m_i` smooth.
//! * [`HierarchicalGame`]: the nonsmooth part also depends on a follower response
//!   `y_i(x_i)` solving a strongly monotone stochastic variational inequality.
//!
//! Player indices are zero based throughout.

pub mod cournot;
pub mod hierarchical;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sets::{BoxSet, ConvexSet, Partition, StrategyProfile};

/// Player structure shared by every model: the partition and the strategy sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Players {
    partition: Partition,
    sets: Vec<BoxSet>,
    joint: BoxSet,
}

impl Players {
    pub fn new(sets: Vec<BoxSet>) -> Result<Self> {
        let dims: Vec<usize> = sets.iter().map(|s| s.dim()).collect();
        let partition = Partition::new(&dims)?;
        let joint = BoxSet::product(&sets)?;
        Ok(Self {
            partition,
            sets,
            joint,
        })
    }

    pub fn count(&self) -> usize {
        self.sets.len()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn set(&self, i: usize) -> &BoxSet {
        &self.sets[i]
    }

    pub fn joint(&self) -> &BoxSet {
        &self.joint
    }

    pub fn dim(&self, i: usize) -> usize {
        self.partition.dim(i)
    }

    pub fn max_dim(&self) -> usize {
        self.partition.max_dim()
    }

    /// Wraps `values` as a profile after checking its length.
    pub fn profile(&self, values: Vec<f64>) -> Result<StrategyProfile> {
        StrategyProfile::new(values, self.partition.clone())
    }

    /// Checks that `x` has this game's partition.
    pub fn check(&self, x: &StrategyProfile) -> Result<()> {
        if x.partition() != &self.partition {
            return Err(Error::Dimension {
                expected: self.partition.total_dim(),
                got: x.values().len(),
            });
        }
        Ok(())
    }
}

/// Common interface of every model.
pub trait Game: Sync {
    fn players(&self) -> &Players;

    /// Expected cost `f_i(x)`, when available in closed form.
    fn expected_cost(&self, _i: usize, _x: &StrategyProfile) -> Option<f64> {
        None
    }

    /// Exact partial gradient of the expected cost, where it exists. Returns `false`
    /// when no closed form is available.
    fn exact_grad(&self, _i: usize, _x: &StrategyProfile, _out: &mut [f64]) -> bool {
        false
    }
}

/// Stochastic first-order model.
pub trait SmoothGame: Game {
    /// Writes one unbiased sample of `grad_{x_i} f_i(x)` into `out`.
    fn sample_grad(&self, i: usize, x: &StrategyProfile, stream: &mut RandomStream, out: &mut [f64]);
}

/// Structured nonsmooth model `f_i = E[h_i(x_i, xi)] + E[m_i(x, xi)]`.
pub trait NonsmoothGame: Game {
    type Noise: Copy + Send + Sync;

    fn sample_noise(&self, stream: &mut RandomStream) -> Self::Noise;

    /// Noise value whose oracles equal the expected oracles. Only meaningful for models
    /// whose oracles are affine in the noise; used by [`Noiseless`].
    fn mean_noise(&self) -> Self::Noise;

    /// Sampled nonsmooth part `h_i(x_i, xi)`.
    fn h_value(&self, i: usize, x_i: &[f64], xi: &Self::Noise) -> f64;

    /// Sampled gradient `grad_{x_i} m_i(x, xi)`.
    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &Self::Noise, out: &mut [f64]);

    /// Lipschitz constant `L_i` of `h_i(., xi)`, uniform in the noise.
    fn h_lipschitz(&self, i: usize) -> f64;

    /// Expected nonsmooth part `E[h_i(x_i, xi)]`.
    fn h_mean(&self, _i: usize, _x_i: &[f64]) -> Option<f64> {
        None
    }

    /// Expected nonsmooth part as a piecewise-linear function, for scalar players.
    fn h_piecewise(&self, _i: usize) -> Option<&crate::smoothing::PiecewiseLinear1D> {
        None
    }

    /// Expected gradient of the smooth part.
    fn m_grad_mean(&self, _i: usize, _x: &StrategyProfile, _out: &mut [f64]) -> bool {
        false
    }

    /// Lipschitz constant of the joint map `x -> (grad_{x_i} E m_i(x))_i`.
    fn coupling_smoothness(&self) -> Option<f64> {
        None
    }

    /// Upper bound on the variance of the smooth-part gradient sample over `X`.
    fn coupling_noise_bound(&self) -> Option<f64> {
        None
    }
}

/// Constants of the follower problem used by the error bounds of the SA routine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FollowerBounds {
    /// Bound on `|E F_i(x_i, y_i, xi)|` over the feasible sets.
    pub c_f: f64,
    /// Bound on the variance of `F_i(x_i, y_i, xi)` over the feasible sets.
    pub v_sq: f64,
}

/// Hierarchical model in which player `i`'s nonsmooth part depends on the solution
/// `y_i(x_i)` of a strongly monotone stochastic variational inequality.
pub trait HierarchicalGame: Game {
    type Noise: Copy + Send + Sync;

    fn sample_noise(&self, stream: &mut RandomStream) -> Self::Noise;

    fn mean_noise(&self) -> Self::Noise;

    fn follower_set(&self, i: usize) -> &BoxSet;

    /// Sampled nonsmooth part `h_i(x_i, y_i, xi)`.
    fn h_value(&self, i: usize, x_i: &[f64], y_i: &[f64], xi: &Self::Noise) -> f64;

    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &Self::Noise, out: &mut [f64]);

    /// Sampled follower operator `F_i(x_i, y_i, xi)`.
    fn follower_operator(&self, i: usize, x_i: &[f64], y_i: &[f64], xi: &Self::Noise, out: &mut [f64]);

    /// Strong monotonicity modulus `mu_i` of `E F_i(x_i, .)`.
    fn follower_modulus(&self, i: usize) -> f64;

    /// Lipschitz constant of `x_i -> h_i(x_i, y_i(x_i), xi)`, uniform in the noise.
    fn h_lipschitz(&self, i: usize) -> f64;

    /// Lipschitz constant `L^y_i` of `h_i` in `y_i` over `X_i + eta B`.
    fn follower_lipschitz(&self, i: usize, eta: f64) -> f64;

    fn follower_bounds(&self, _i: usize) -> Option<FollowerBounds> {
        None
    }

    /// Exact follower response `y_i(x_i)`.
    fn exact_follower(&self, _i: usize, _x_i: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `E[h_i(x_i, y_i, xi)]`.
    fn h_mean(&self, _i: usize, _x_i: &[f64], _y_i: &[f64]) -> Option<f64> {
        None
    }

    fn m_grad_mean(&self, _i: usize, _x: &StrategyProfile, _out: &mut [f64]) -> bool {
        false
    }

    fn coupling_smoothness(&self) -> Option<f64> {
        None
    }

    fn coupling_noise_bound(&self) -> Option<f64> {
        None
    }
}

/// Nonsmooth game obtained from a hierarchical one by plugging in the exact follower.
#[derive(Clone, Copy, Debug)]
pub struct ExactFollower<'a, H> {
    inner: &'a H,
}

impl<'a, H: HierarchicalGame> ExactFollower<'a, H> {
    pub fn new(inner: &'a H) -> Result<Self> {
        let x0 = inner.players().set(0).midpoint();
        if inner.exact_follower(0, &x0).is_none() {
            return Err(Error::MissingOracle("exact follower response"));
        }
        Ok(Self { inner })
    }

    pub fn inner(&self) -> &'a H {
        self.inner
    }

    fn follower(&self, i: usize, x_i: &[f64]) -> Vec<f64> {
        self.inner
            .exact_follower(i, x_i)
            .expect("exact follower checked at construction")
    }
}

impl<H: HierarchicalGame> Game for ExactFollower<'_, H> {
    fn players(&self) -> &Players {
        self.inner.players()
    }

    fn expected_cost(&self, i: usize, x: &StrategyProfile) -> Option<f64> {
        self.inner.expected_cost(i, x)
    }

    fn exact_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.inner.exact_grad(i, x, out)
    }
}

impl<H: HierarchicalGame> NonsmoothGame for ExactFollower<'_, H> {
    type Noise = H::Noise;

    fn sample_noise(&self, stream: &mut RandomStream) -> Self::Noise {
        self.inner.sample_noise(stream)
    }

    fn mean_noise(&self) -> Self::Noise {
        self.inner.mean_noise()
    }

    fn h_value(&self, i: usize, x_i: &[f64], xi: &Self::Noise) -> f64 {
        let y = self.follower(i, x_i);
        self.inner.h_value(i, x_i, &y, xi)
    }

    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &Self::Noise, out: &mut [f64]) {
        self.inner.m_grad(i, x, xi, out)
    }

    fn h_lipschitz(&self, i: usize) -> f64 {
        self.inner.h_lipschitz(i)
    }

    fn h_mean(&self, i: usize, x_i: &[f64]) -> Option<f64> {
        let y = self.follower(i, x_i);
        self.inner.h_mean(i, x_i, &y)
    }

    fn m_grad_mean(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.inner.m_grad_mean(i, x, out)
    }

    fn coupling_smoothness(&self) -> Option<f64> {
        self.inner.coupling_smoothness()
    }

    fn coupling_noise_bound(&self) -> Option<f64> {
        self.inner.coupling_noise_bound()
    }
}

/// Deterministic version of a model: every noise draw is replaced by the mean noise.
/// Exact for models whose oracles are affine in the noise.
#[derive(Clone, Copy, Debug)]
pub struct Noiseless<G>(pub G);

impl<G: Game> Game for Noiseless<G> {
    fn players(&self) -> &Players {
        self.0.players()
    }

    fn expected_cost(&self, i: usize, x: &StrategyProfile) -> Option<f64> {
        self.0.expected_cost(i, x)
    }

    fn exact_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.0.exact_grad(i, x, out)
    }
}

impl<G: Game> SmoothGame for Noiseless<G> {
    fn sample_grad(&self, i: usize, x: &StrategyProfile, _stream: &mut RandomStream, out: &mut [f64]) {
        let ok = self.0.exact_grad(i, x, out);
        assert!(ok, "noiseless smooth model requires exact gradients");
    }
}

impl<G: NonsmoothGame> NonsmoothGame for Noiseless<G> {
    type Noise = G::Noise;

    fn sample_noise(&self, _stream: &mut RandomStream) -> Self::Noise {
        self.0.mean_noise()
    }

    fn mean_noise(&self) -> Self::Noise {
        self.0.mean_noise()
    }

    fn h_value(&self, i: usize, x_i: &[f64], xi: &Self::Noise) -> f64 {
        self.0.h_value(i, x_i, xi)
    }

    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &Self::Noise, out: &mut [f64]) {
        self.0.m_grad(i, x, xi, out)
    }

    fn h_lipschitz(&self, i: usize) -> f64 {
        self.0.h_lipschitz(i)
    }

    fn h_mean(&self, i: usize, x_i: &[f64]) -> Option<f64> {
        self.0.h_mean(i, x_i)
    }

    fn h_piecewise(&self, i: usize) -> Option<&crate::smoothing::PiecewiseLinear1D> {
        self.0.h_piecewise(i)
    }

    fn m_grad_mean(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.0.m_grad_mean(i, x, out)
    }

    fn coupling_smoothness(&self) -> Option<f64> {
        self.0.coupling_smoothness()
    }

    fn coupling_noise_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Smooth game formed by the `m` part of a nonsmooth game alone.
#[derive(Clone, Copy, Debug)]
pub struct SmoothPart<'a, G>(pub &'a G);

impl<G: NonsmoothGame> Game for SmoothPart<'_, G> {
    fn players(&self) -> &Players {
        self.0.players()
    }

    fn exact_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.0.m_grad_mean(i, x, out)
    }
}

impl<G: NonsmoothGame> SmoothGame for SmoothPart<'_, G> {
    fn sample_grad(&self, i: usize, x: &StrategyProfile, stream: &mut RandomStream, out: &mut [f64]) {
        let xi = self.0.sample_noise(stream);
        self.0.m_grad(i, x, &xi, out);
    }
}

/// Potential function `P` of a potential game.
pub trait Potential: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Potential for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Smoothed potential `P_eta = P - sum_i E h_i + sum_i E h_i^eta` for scalar players.
pub struct SmoothedPotential<'a, G, P> {
    game: &'a G,
    potential: &'a P,
    eta: f64,
}

impl<'a, G: NonsmoothGame, P: Potential> SmoothedPotential<'a, G, P> {
    pub fn new(game: &'a G, potential: &'a P, eta: f64) -> Result<Self> {
        let players = game.players();
        if players.max_dim() != 1 {
            return Err(Error::invalid("game", "smoothed potential requires scalar players"));
        }
        if eta.is_nan() || eta <= 0.0 {
            return Err(Error::invalid("eta", "must be positive"));
        }
        for i in 0..players.count() {
            if game.h_mean(i, &players.set(i).midpoint()).is_none() {
                return Err(Error::MissingOracle("expected nonsmooth cost"));
            }
        }
        Ok(Self { game, potential, eta })
    }

    fn h_smoothed(&self, i: usize, t: f64) -> f64 {
        match self.game.h_piecewise(i) {
            Some(f) => f.integral(t - self.eta, t + self.eta) / (2.0 * self.eta),
            None => crate::smoothing::interval_average(|s| self.game.h_mean(i, &[s]).unwrap(), t, self.eta),
        }
    }
}

impl<G: NonsmoothGame, P: Potential> Potential for SmoothedPotential<'_, G, P> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.potential.value(x);
        for (i, &t) in x.iter().enumerate() {
            let h = match self.game.h_piecewise(i) {
                Some(f) => f.eval(t),
                None => self.game.h_mean(i, &[t]).unwrap(),
            };
            v += self.h_smoothed(i, t) - h;
        }
        v
    }
}

/// Largest absolute discrepancy between `f_i(x_i', x_-i) - f_i(x)` and
/// `P(x_i', x_-i) - P(x)` over all players at the pair `(x, x')`.
pub fn potential_identity_gap<G: Game, P: Potential>(
    game: &G,
    potential: &P,
    x: &StrategyProfile,
    other: &StrategyProfile,
) -> Result<f64> {
    let players = game.players();
    players.check(x)?;
    players.check(other)?;
    let p0 = potential.value(x.values());
    let mut worst = 0.0f64;
    for i in 0..players.count() {
        let mut moved = x.clone();
        moved.set_player(i, other.player(i))?;
        let df = game
            .expected_cost(i, &moved)
            .zip(game.expected_cost(i, x))
            .map(|(a, b)| a - b)
            .ok_or(Error::MissingOracle("expected cost"))?;
        let dp = potential.value(moved.values()) - p0;
        worst = worst.max((df - dp).abs());
    }
    Ok(worst)
}

/// Largest absolute difference between the exact partial gradients and central finite
/// differences of the potential at `x`.
pub fn potential_gradient_check<G: Game, P: Potential>(
    game: &G,
    potential: &P,
    x: &StrategyProfile,
    fd_step: f64,
) -> Result<f64> {
    if fd_step.is_nan() || fd_step <= 0.0 {
        return Err(Error::invalid("fd_step", "must be positive"));
    }
    let players = game.players();
    players.check(x)?;
    let mut worst = 0.0f64;
    let mut probe = x.values().to_vec();
    for i in 0..players.count() {
        let mut grad = vec![0.0; players.dim(i)];
        if !game.exact_grad(i, x, &mut grad) {
            return Err(Error::MissingOracle("exact gradient"));
        }
        let range = players.partition().range(i)?;
        for (j, idx) in range.enumerate() {
            let orig = probe[idx];
            probe[idx] = orig + fd_step;
            let up = potential.value(&probe);
            probe[idx] = orig - fd_step;
            let down = potential.value(&probe);
            probe[idx] = orig;
            worst = worst.max(((up - down) / (2.0 * fd_step) - grad[j]).abs());
        }
    }
    Ok(worst)
}

/// Where a pair of potential bounds came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BoundsProvenance {
    /// Grid search with `points_per_dim` points per coordinate followed by local
    /// pattern search. The result is an estimate, not a certified bound.
    GridEstimate { points_per_dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialBounds {
    pub max: f64,
    pub min: f64,
    pub provenance: BoundsProvenance,
}

impl PotentialBounds {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Largest grid the bound estimator will evaluate.
pub const MAX_GRID_POINTS: u128 = 50_000_000;

/// Estimates `max P` and `min P` over a box by grid search refined with a projected
/// compass search around the best grid points.
pub fn estimate_potential_bounds<P: Potential>(
    potential: &P,
    set: &BoxSet,
    points_per_dim: usize,
) -> Result<PotentialBounds> {
    if points_per_dim < 2 {
        return Err(Error::invalid("points_per_dim", "need at least two points per coordinate"));
    }
    let n = set.dim();
    let total = (points_per_dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge {
            points: total,
            limit: MAX_GRID_POINTS,
        });
    }
    let axis = |j: usize, k: usize| {
        let (l, u) = (set.lower()[j], set.upper()[j]);
        l + (u - l) * k as f64 / (points_per_dim - 1) as f64
    };
    let mut idx = vec![0usize; n];
    let mut point: Vec<f64> = (0..n).map(|j| axis(j, 0)).collect();
    let (mut best_max, mut best_min) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut arg_max, mut arg_min) = (point.clone(), point.clone());
    loop {
        let v = potential.value(&point);
        if v > best_max {
            best_max = v;
            arg_max.copy_from_slice(&point);
        }
        if v < best_min {
            best_min = v;
            arg_min.copy_from_slice(&point);
        }
        let mut j = 0;
        loop {
            if j == n {
                let spacing = (0..n)
                    .map(|j| (set.upper()[j] - set.lower()[j]) / (points_per_dim - 1) as f64)
                    .fold(0.0, f64::max);
                let max = -compass_search(&|x: &[f64]| -potential.value(x), set, arg_max, spacing);
                let min = compass_search(&|x: &[f64]| potential.value(x), set, arg_min, spacing);
                return Ok(PotentialBounds {
                    max: max.max(best_max),
                    min: min.min(best_min),
                    provenance: BoundsProvenance::GridEstimate { points_per_dim },
                });
            }
            idx[j] += 1;
            if idx[j] < points_per_dim {
                point[j] = axis(j, idx[j]);
                break;
            }
            idx[j] = 0;
            point[j] = axis(j, 0);
            j += 1;
        }
    }
}

/// Projected compass search for a local minimum; returns the best value found.
fn compass_search(f: &dyn Fn(&[f64]) -> f64, set: &BoxSet, mut x: Vec<f64>, mut step: f64) -> f64 {
    let mut fx = f(&x);
    let mut trial = x.clone();
    while step > 1e-9 {
        let mut improved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[j] += dir * step;
                set.project_in_place(&mut trial);
                let ft = f(&trial);
                if ft < fx {
                    fx = ft;
                    x.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}
