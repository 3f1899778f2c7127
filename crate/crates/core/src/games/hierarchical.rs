//! Hierarchical stochastic Cournot game with one follower per leader.
//!
//! Leader `i` chooses `x_i` in `[0, x_cap]` and its follower chooses `y_i` in
//! `[0, y_cap]`. With `xi ~ U[-1, 1]`, `a(xi) = a0 + a1 xi` and `b(xi) = b0 + b1 xi`:
//!
//! * leader cost: `(c0 + xi) log(x_i + 1) + b(xi) x_i y_i - (a(xi) - b(xi) sum_j x_j) x_i`,
//! * follower operator: `F_i = (f0 + f1 xi) - a(xi) + b(xi) (x_i + 2 y_i)`.
//!
//! The first two leader terms form the nonsmooth part `h_i`, the rest the smooth part.

use serde::Serialize;

use crate::error::Result;
use crate::games::{FollowerBounds, Game, HierarchicalGame, Players, Potential};
use crate::rng::RandomStream;
use crate::sets::{BoxSet, StrategyProfile};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HierParams {
    pub players: usize,
    pub leader_capacity: f64,
    pub follower_capacity: f64,
    pub leader_cost: f64,
    pub follower_cost: f64,
    pub follower_cost_noise: f64,
    pub demand_intercept: f64,
    pub demand_intercept_noise: f64,
    pub demand_slope: f64,
    pub demand_slope_noise: f64,
}

impl HierParams {
    /// The four-leader benchmark.
    pub fn benchmark() -> Self {
        Self {
            players: 4,
            leader_capacity: 20.0,
            follower_capacity: 200.0,
            leader_cost: 5.0,
            follower_cost: 1.0,
            follower_cost_noise: 0.2,
            demand_intercept: 8.0,
            demand_intercept_noise: 2.0,
            demand_slope: 0.02,
            demand_slope_noise: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HierGame {
    params: HierParams,
    players: Players,
    follower_sets: Vec<BoxSet>,
}

/// Potential of the game reduced by the exact follower responses.
#[derive(Clone, Debug)]
pub struct HierPotential {
    game: HierGame,
}

impl HierGame {
    pub fn new(params: HierParams) -> Result<(Self, HierPotential)> {
        let sets = (0..params.players)
            .map(|_| BoxSet::interval(0.0, params.leader_capacity))
            .collect::<Result<Vec<_>>>()?;
        let follower_sets = (0..params.players)
            .map(|_| BoxSet::interval(0.0, params.follower_capacity))
            .collect::<Result<Vec<_>>>()?;
        let game = Self {
            players: Players::new(sets)?,
            params,
            follower_sets,
        };
        Ok((game.clone(), HierPotential { game }))
    }

    pub fn benchmark() -> (Self, HierPotential) {
        Self::new(HierParams::benchmark()).expect("benchmark parameters are valid")
    }

    pub fn params(&self) -> &HierParams {
        &self.params
    }

    /// Exact follower response and its derivative in `x_i`.
    fn response(&self, x: f64) -> (f64, f64) {
        let p = &self.params;
        let raw = (p.demand_intercept - p.follower_cost - p.demand_slope * x) / (2.0 * p.demand_slope);
        if raw <= 0.0 {
            (0.0, 0.0)
        } else if raw >= p.follower_capacity {
            (p.follower_capacity, 0.0)
        } else {
            (raw, -0.5)
        }
    }

    #[inline]
    fn slope(&self, xi: f64) -> f64 {
        self.params.demand_slope + self.params.demand_slope_noise * xi
    }

    #[inline]
    fn intercept(&self, xi: f64) -> f64 {
        self.params.demand_intercept + self.params.demand_intercept_noise * xi
    }

    /// Expected reduced nonsmooth part `E h_i(x, y(x))`.
    fn reduced_h(&self, x: f64) -> f64 {
        let y = self.response(x).0;
        self.params.leader_cost * (x + 1.0).ln() + self.params.demand_slope * x * y
    }
}

impl Game for HierGame {
    fn players(&self) -> &Players {
        &self.players
    }

    fn expected_cost(&self, i: usize, x: &StrategyProfile) -> Option<f64> {
        let xi = x.player(i)[0];
        let p = &self.params;
        Some(self.reduced_h(xi) - (p.demand_intercept - p.demand_slope * x.total()) * xi)
    }

    fn exact_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        let xi = x.player(i)[0];
        let p = &self.params;
        let (y, dy) = self.response(xi);
        out[0] = p.leader_cost / (xi + 1.0) + p.demand_slope * (y + xi * dy) - p.demand_intercept
            + p.demand_slope * (x.total() + xi);
        true
    }
}

impl HierarchicalGame for HierGame {
    type Noise = f64;

    #[inline]
    fn sample_noise(&self, stream: &mut RandomStream) -> f64 {
        stream.uniform(-1.0, 1.0)
    }

    fn mean_noise(&self) -> f64 {
        0.0
    }

    fn follower_set(&self, i: usize) -> &BoxSet {
        &self.follower_sets[i]
    }

    #[inline]
    fn h_value(&self, _i: usize, x_i: &[f64], y_i: &[f64], xi: &f64) -> f64 {
        (self.params.leader_cost + xi) * (x_i[0] + 1.0).ln() + self.slope(*xi) * x_i[0] * y_i[0]
    }

    #[inline]
    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &f64, out: &mut [f64]) {
        out[0] = -self.intercept(*xi) + self.slope(*xi) * (x.total() + x.player(i)[0]);
    }

    #[inline]
    fn follower_operator(&self, _i: usize, x_i: &[f64], y_i: &[f64], xi: &f64, out: &mut [f64]) {
        let p = &self.params;
        out[0] = p.follower_cost + p.follower_cost_noise * xi - self.intercept(*xi)
            + self.slope(*xi) * (x_i[0] + 2.0 * y_i[0]);
    }

    fn follower_modulus(&self, _i: usize) -> f64 {
        2.0 * self.params.demand_slope
    }

    /// `sup |d/dx h_i(x, y(x), xi)|` over `X_i` and the noise support, found on a grid.
    fn h_lipschitz(&self, _i: usize) -> f64 {
        let p = &self.params;
        let steps = 20_000;
        let mut worst = 0.0f64;
        for k in 0..=steps {
            let x = p.leader_capacity * k as f64 / steps as f64;
            let (y, dy) = self.response(x);
            for xi in [-1.0, 1.0] {
                let d = (p.leader_cost + xi) / (x + 1.0) + self.slope(xi) * (y + x * dy);
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    fn follower_lipschitz(&self, _i: usize, eta: f64) -> f64 {
        let p = &self.params;
        (p.demand_slope.abs() + p.demand_slope_noise.abs()) * (p.leader_capacity + eta)
    }

    /// Both quantities are extremal at a corner of `X_i x Y_i`.
    fn follower_bounds(&self, i: usize) -> Option<FollowerBounds> {
        let p = &self.params;
        let mut c_f = 0.0f64;
        let mut v_sq = 0.0f64;
        for x in [0.0, p.leader_capacity] {
            for y in self.follower_set(i).lower().iter().chain(self.follower_set(i).upper()) {
                let s = x + 2.0 * y;
                let mean = p.follower_cost - p.demand_intercept + p.demand_slope * s;
                let noise = p.follower_cost_noise - p.demand_intercept_noise + p.demand_slope_noise * s;
                c_f = c_f.max(mean.abs());
                v_sq = v_sq.max(noise * noise / 3.0);
            }
        }
        Some(FollowerBounds { c_f, v_sq })
    }

    fn exact_follower(&self, _i: usize, x_i: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.response(x_i[0]).0])
    }

    fn h_mean(&self, _i: usize, x_i: &[f64], y_i: &[f64]) -> Option<f64> {
        Some(self.params.leader_cost * (x_i[0] + 1.0).ln() + self.params.demand_slope * x_i[0] * y_i[0])
    }

    fn m_grad_mean(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        self.m_grad(i, x, &0.0, out);
        true
    }

    fn coupling_smoothness(&self) -> Option<f64> {
        Some(self.params.demand_slope * (self.params.players as f64 + 1.0))
    }

    fn coupling_noise_bound(&self) -> Option<f64> {
        let p = &self.params;
        let s_max = (p.players as f64 + 1.0) * p.leader_capacity;
        let worst = p
            .demand_intercept_noise
            .abs()
            .max((p.demand_slope_noise * s_max - p.demand_intercept_noise).abs());
        Some(worst * worst / 3.0)
    }
}

impl Potential for HierPotential {
    fn value(&self, x: &[f64]) -> f64 {
        let p = &self.game.params;
        let total: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let h: f64 = x.iter().map(|v| self.game.reduced_h(*v)).sum();
        h - p.demand_intercept * total + p.demand_slope * sq + 0.5 * p.demand_slope * (total * total - sq)
    }
}
