use super::{drive, stream, Directions, FollowerMode, LowerLevelConfig, RunRecord, SampleCounts, SolverConfig, TraceFn};
use crate::error::{Error, Result};
use crate::games::{FollowerBounds, HierarchicalGame};
use crate::rng::{Purpose, RandomStream};
use crate::sets::{ConvexSet, StrategyProfile};
use crate::smoothing::accumulate_two_point;

fn check_alpha0(alpha0: f64, mu: f64) -> Result<()> {
    if !(alpha0.is_finite() && 2.0 * mu * alpha0 > 1.0) {
        return Err(Error::invalid(
            "alpha0",
            format!("need alpha0 > 1/(2 mu) = {}, got {alpha0}", 0.5 / mu),
        ));
    }
    Ok(())
}

/// Runs `t` projected SA steps `y <- Proj_Y(y - alpha_s F_i(x_hat, y, xi_s))` with
/// `alpha_s = alpha0 / (s + Gamma)` from the midpoint of `Y_i`, writing the result into
/// `y`. `scratch` must have the follower dimension.
#[inline]
#[allow(clippy::too_many_arguments)]
fn sa_into<H: HierarchicalGame>(
    game: &H,
    i: usize,
    x_hat: &[f64],
    t: usize,
    alpha0: f64,
    offset: f64,
    stream: &mut RandomStream,
    y: &mut [f64],
    scratch: &mut [f64],
) {
    let set = game.follower_set(i);
    for (v, (l, u)) in y.iter_mut().zip(set.lower().iter().zip(set.upper())) {
        *v = 0.5 * (l + u);
    }
    for s in 0..t {
        let xi = game.sample_noise(stream);
        game.follower_operator(i, x_hat, y, &xi, scratch);
        let alpha = alpha0 / (s as f64 + offset);
        for (v, f) in y.iter_mut().zip(scratch.iter()) {
            *v -= alpha * f;
        }
        set.project_in_place(y);
    }
}

/// Approximates the follower response `y_i(x_hat)` with `t >= 1` stochastic
/// approximation steps drawn from `stream`.
pub fn sa_lower_solve<H: HierarchicalGame>(
    game: &H,
    i: usize,
    x_hat: &[f64],
    t: usize,
    cfg: &LowerLevelConfig,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    let players = game.players();
    if i >= players.count() {
        return Err(Error::PlayerIndex {
            index: i,
            players: players.count(),
        });
    }
    if x_hat.len() != players.dim(i) {
        return Err(Error::Dimension {
            expected: players.dim(i),
            got: x_hat.len(),
        });
    }
    if t == 0 {
        return Err(Error::invalid("t", "at least one step is required"));
    }
    let mu = game.follower_modulus(i);
    let alpha0 = cfg.alpha0_for(mu);
    check_alpha0(alpha0, mu)?;
    let dim = game.follower_set(i).dim();
    let mut y = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    sa_into(game, i, x_hat, t, alpha0, cfg.offset, stream, &mut y, &mut scratch);
    Ok(y)
}

/// Mean-squared error bound of the SA output after `t` steps:
/// `max{(c_F^2 + v^2) alpha0^2 / (2 mu alpha0 - 1), Gamma R^2} / (t + Gamma)`, where
/// `R^2` bounds the squared distance from the starting point to any point of `Y`.
pub fn sa_error_bound(bounds: FollowerBounds, mu: f64, alpha0: f64, offset: f64, radius_sq: f64, t: usize) -> Result<f64> {
    check_alpha0(alpha0, mu)?;
    let a = (bounds.c_f * bounds.c_f + bounds.v_sq) * alpha0 * alpha0 / (2.0 * mu * alpha0 - 1.0);
    Ok(a.max(offset * radius_sq) / (t as f64 + offset))
}

/// Bound on the bias of the inexact two-point estimate caused by a follower error with
/// mean square `epsilon`: `n_max L^y_max sqrt(epsilon) / eta`.
pub fn bias_bound<H: HierarchicalGame>(game: &H, eta: f64, epsilon: f64) -> f64 {
    let players = game.players();
    let ly = (0..players.count())
        .map(|i| game.follower_lipschitz(i, eta))
        .fold(0.0, f64::max);
    players.max_dim() as f64 * ly * epsilon.sqrt() / eta
}

struct Biased<'a, H> {
    game: &'a H,
    eta: f64,
    seed: u64,
    path: u64,
    lower: LowerLevelConfig,
    mode: FollowerMode,
}

impl<H: HierarchicalGame> Directions for Biased<'_, H> {
    fn cost(&self, k: usize, batch: usize) -> SampleCounts {
        let nb = (self.game.players().count() * batch) as u64;
        let lower = match self.mode {
            FollowerMode::Stochastic => 2 * nb * self.lower.schedule.steps(k) as u64,
            FollowerMode::Exact => 0,
        };
        SampleCounts {
            zeroth: 2 * nb,
            first: nb,
            lower,
        }
    }

    fn direction(&self, k: usize, i: usize, x: &StrategyProfile, batch: usize, out: &mut [f64]) -> Result<()> {
        let game = self.game;
        let mut noise = stream(self.seed, self.path, k, i, Purpose::Noise, 0);
        let mut dirs = stream(self.seed, self.path, k, i, Purpose::Direction, 0);
        let x_i = x.player(i);
        let n = x_i.len();
        let ydim = game.follower_set(i).dim();
        let t = self.lower.schedule.steps(k);
        let mu = game.follower_modulus(i);
        let alpha0 = self.lower.alpha0_for(mu);
        check_alpha0(alpha0, mu)?;
        let mut v = vec![0.0; n];
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut y_plus = vec![0.0; ydim];
        let mut y_minus = vec![0.0; ydim];
        let mut scratch = vec![0.0; ydim];
        let mut m = vec![0.0; n];
        let mut sum_h = vec![0.0; n];
        let mut sum_m = vec![0.0; n];
        for l in 0..batch {
            let xi = game.sample_noise(&mut noise);
            dirs.sphere_into(self.eta, &mut v);
            for j in 0..n {
                plus[j] = x_i[j] + v[j];
                minus[j] = x_i[j] - v[j];
            }
            match self.mode {
                FollowerMode::Stochastic => {
                    let mut s = stream(self.seed, self.path, k, i, Purpose::LowerLevel, 2 * l as u64);
                    sa_into(game, i, &plus, t, alpha0, self.lower.offset, &mut s, &mut y_plus, &mut scratch);
                    let mut s = stream(self.seed, self.path, k, i, Purpose::LowerLevel, 2 * l as u64 + 1);
                    sa_into(game, i, &minus, t, alpha0, self.lower.offset, &mut s, &mut y_minus, &mut scratch);
                }
                FollowerMode::Exact => {
                    let missing = || Error::MissingOracle("exact follower response");
                    y_plus = game.exact_follower(i, &plus).ok_or_else(missing)?;
                    y_minus = game.exact_follower(i, &minus).ok_or_else(missing)?;
                }
            }
            let fp = game.h_value(i, &plus, &y_plus, &xi);
            let fm = game.h_value(i, &minus, &y_minus, &xi);
            accumulate_two_point(&v, self.eta, fp, fm, &mut sum_h);
            game.m_grad(i, x, &xi, &mut m);
            for (s, g) in sum_m.iter_mut().zip(&m) {
                *s += g;
            }
        }
        let b = batch as f64;
        for j in 0..n {
            out[j] = sum_h[j] / b + sum_m[j] / b;
        }
        Ok(())
    }
}

/// Biased RS-RSG for a hierarchical potential game.
///
/// Each evaluation of the nonsmooth part uses a follower response computed by
/// [`sa_lower_solve`] with `t_k` steps from `cfg.lower.schedule`, or the exact response
/// under [`FollowerMode::Exact`]. Each iteration spends `2 N S` zeroth-order,
/// `N S` first-order and `2 N S t_k` lower-level calls.
pub fn b_rs_rsg_run<H: HierarchicalGame>(
    game: &H,
    cfg: &SolverConfig,
    mode: FollowerMode,
    path: u64,
    trace: Option<&TraceFn<'_>>,
) -> Result<RunRecord> {
    let batch = cfg.resolve_batch()?;
    let oracle = Biased {
        game,
        eta: cfg.eta,
        seed: cfg.seed,
        path,
        lower: cfg.lower,
        mode,
    };
    drive(game.players(), cfg, path, &oracle, batch, trace)
}
