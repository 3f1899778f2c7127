//! Nonsmooth stochastic Cournot game.
//!
//! `N` firms choose quantities `x_i` in `[0, cap]`. Player `i` pays
//! `c_i(xi) g(x_i) - (a(xi) - b(xi) sum_j x_j) x_i` with `xi ~ U[0, 1]`,
//! `c_i(xi) = (c0 + i / (8 N)) xi` (players numbered from one), `a(xi) = a0 xi`,
//! `b(xi) = b0 xi` and `g(x) = min(x, x / 2 + 2)`.

use serde::Serialize;

use crate::error::Result;
use crate::games::{Game, NonsmoothGame, Players, Potential, SmoothGame};
use crate::rng::RandomStream;
use crate::sets::{BoxSet, StrategyProfile};
use crate::smoothing::PiecewiseLinear1D;

/// Parameters of the Cournot family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CournotParams {
    pub players: usize,
    pub capacity: f64,
    pub cost_base: f64,
    pub demand_intercept: f64,
    pub demand_slope: f64,
    /// Production function `g`.
    pub production: PiecewiseLinear1D,
}

impl CournotParams {
    /// The six-firm benchmark with the kinked production function.
    pub fn benchmark() -> Self {
        Self {
            players: 6,
            capacity: 12.0,
            cost_base: 5.0,
            demand_intercept: 4.0,
            demand_slope: 0.02,
            production: PiecewiseLinear1D::new(vec![4.0], vec![1.0, 0.5], 0.0, 0.0)
                .expect("valid production function"),
        }
    }

    /// Same game with a linear production function `g(x) = slope * x`.
    pub fn linear(slope: f64) -> Self {
        Self {
            production: PiecewiseLinear1D::linear(slope),
            ..Self::benchmark()
        }
    }
}

/// Cournot game model. Implements both [`NonsmoothGame`] and [`SmoothGame`]; the latter
/// is a true gradient oracle only away from kinks of `g`.
#[derive(Clone, Debug)]
pub struct CournotGame {
    params: CournotParams,
    players: Players,
    /// `c0 + i / (8N)`: the cost coefficient at `xi = 1`.
    cost_peak: Vec<f64>,
    expected_h: Vec<PiecewiseLinear1D>,
}

/// Potential of the Cournot game.
#[derive(Clone, Debug)]
pub struct CournotPotential {
    expected_h: Vec<PiecewiseLinear1D>,
    a_mean: f64,
    b_mean: f64,
}

impl CournotGame {
    pub fn new(params: CournotParams) -> Result<(Self, CournotPotential)> {
        let n = params.players;
        let sets = (0..n)
            .map(|_| BoxSet::interval(0.0, params.capacity))
            .collect::<Result<Vec<_>>>()?;
        let players = Players::new(sets)?;
        let cost_peak: Vec<f64> = (1..=n)
            .map(|i| params.cost_base + i as f64 / (8 * n) as f64)
            .collect();
        let expected_h: Vec<PiecewiseLinear1D> = cost_peak
            .iter()
            .map(|c| params.production.scaled(0.5 * c))
            .collect();
        let potential = CournotPotential {
            expected_h: expected_h.clone(),
            a_mean: 0.5 * params.demand_intercept,
            b_mean: 0.5 * params.demand_slope,
        };
        Ok((
            Self {
                params,
                players,
                cost_peak,
                expected_h,
            },
            potential,
        ))
    }

    /// The six-firm nonsmooth benchmark.
    pub fn benchmark() -> (Self, CournotPotential) {
        Self::new(CournotParams::benchmark()).expect("benchmark parameters are valid")
    }

    /// Benchmark with `g(x) = x`.
    pub fn smooth() -> (Self, CournotPotential) {
        Self::new(CournotParams::linear(1.0)).expect("benchmark parameters are valid")
    }

    pub fn params(&self) -> &CournotParams {
        &self.params
    }

    /// Mean cost coefficient `E c_i(xi)`.
    pub fn mean_cost(&self, i: usize) -> f64 {
        0.5 * self.cost_peak[i]
    }

    #[inline]
    fn m_grad_at(&self, xi: f64, x: &StrategyProfile, i: usize) -> f64 {
        let p = &self.params;
        -p.demand_intercept * xi + p.demand_slope * xi * (x.total() + x.player(i)[0])
    }
}

impl Game for CournotGame {
    fn players(&self) -> &Players {
        &self.players
    }

    fn expected_cost(&self, i: usize, x: &StrategyProfile) -> Option<f64> {
        let xi = x.player(i)[0];
        let a = 0.5 * self.params.demand_intercept;
        let b = 0.5 * self.params.demand_slope;
        Some(self.expected_h[i].eval(xi) - (a - b * x.total()) * xi)
    }

    fn exact_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        let xi = x.player(i)[0];
        let (lo, _) = self.expected_h[i].clarke_interval(xi);
        out[0] = lo + self.m_grad_at(0.5, x, i);
        true
    }
}

impl SmoothGame for CournotGame {
    fn sample_grad(&self, i: usize, x: &StrategyProfile, stream: &mut RandomStream, out: &mut [f64]) {
        let xi = stream.next_f64();
        let (slope, _) = self.params.production.clarke_interval(x.player(i)[0]);
        out[0] = self.cost_peak[i] * xi * slope + self.m_grad_at(xi, x, i);
    }
}

impl NonsmoothGame for CournotGame {
    type Noise = f64;

    #[inline]
    fn sample_noise(&self, stream: &mut RandomStream) -> f64 {
        stream.next_f64()
    }

    fn mean_noise(&self) -> f64 {
        0.5
    }

    #[inline]
    fn h_value(&self, i: usize, x_i: &[f64], xi: &f64) -> f64 {
        self.cost_peak[i] * xi * self.params.production.eval(x_i[0])
    }

    #[inline]
    fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &f64, out: &mut [f64]) {
        out[0] = self.m_grad_at(*xi, x, i);
    }

    fn h_lipschitz(&self, i: usize) -> f64 {
        self.cost_peak[i] * self.params.production.lipschitz()
    }

    fn h_mean(&self, i: usize, x_i: &[f64]) -> Option<f64> {
        Some(self.expected_h[i].eval(x_i[0]))
    }

    fn h_piecewise(&self, i: usize) -> Option<&PiecewiseLinear1D> {
        Some(&self.expected_h[i])
    }

    fn m_grad_mean(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) -> bool {
        out[0] = self.m_grad_at(0.5, x, i);
        true
    }

    /// The Hessian of the smooth part of the potential is `b (I + e e^T)`.
    fn coupling_smoothness(&self) -> Option<f64> {
        Some(0.5 * self.params.demand_slope * (self.params.players as f64 + 1.0))
    }

    /// `Var(xi) * sup |a0 - b0 (sum_j x_j + x_i)|^2`, attained at a corner.
    fn coupling_noise_bound(&self) -> Option<f64> {
        let p = &self.params;
        let s_max = (p.players as f64 + 1.0) * p.capacity;
        let worst = p
            .demand_intercept
            .abs()
            .max((p.demand_slope * s_max - p.demand_intercept).abs());
        Some(worst * worst / 12.0)
    }
}

impl Potential for CournotPotential {
    fn value(&self, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let h: f64 = self.expected_h.iter().zip(x).map(|(f, v)| f.eval(*v)).sum();
        h - self.a_mean * total + self.b_mean * sq + 0.5 * self.b_mean * (total * total - sq)
    }
}
