use super::{drive, stream, Directions, RunRecord, SampleCounts, SolverConfig, TraceFn};
use crate::error::Result;
use crate::games::NonsmoothGame;
use crate::rng::Purpose;
use crate::sets::StrategyProfile;
use crate::smoothing::accumulate_two_point;

pub(crate) struct ZerothOrder<'a, G> {
    pub game: &'a G,
    pub eta: f64,
    pub seed: u64,
    pub path: u64,
}

impl<G: NonsmoothGame> Directions for ZerothOrder<'_, G> {
    fn cost(&self, _k: usize, batch: usize) -> SampleCounts {
        let nb = (self.game.players().count() * batch) as u64;
        SampleCounts {
            zeroth: 2 * nb,
            first: nb,
            lower: 0,
        }
    }

    fn direction(&self, k: usize, i: usize, x: &StrategyProfile, batch: usize, out: &mut [f64]) -> Result<()> {
        let game = self.game;
        let mut noise = stream(self.seed, self.path, k, i, Purpose::Noise, 0);
        let mut dirs = stream(self.seed, self.path, k, i, Purpose::Direction, 0);
        let x_i = x.player(i);
        let n = x_i.len();
        let mut v = vec![0.0; n];
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut m = vec![0.0; n];
        let mut sum_h = vec![0.0; n];
        let mut sum_m = vec![0.0; n];
        for _ in 0..batch {
            let xi = game.sample_noise(&mut noise);
            dirs.sphere_into(self.eta, &mut v);
            for j in 0..n {
                plus[j] = x_i[j] + v[j];
                minus[j] = x_i[j] - v[j];
            }
            let fp = game.h_value(i, &plus, &xi);
            let fm = game.h_value(i, &minus, &xi);
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

/// Randomized smoothing RSG for a structured nonsmooth potential game.
///
/// The nonsmooth part of each player's cost is handled by the two-point estimator with
/// radius `cfg.eta`, sharing the noise draw between both evaluation points and the
/// smooth-part gradient. Each iteration spends `2 N S` zeroth-order and `N S`
/// first-order calls.
pub fn rs_rsg_run<G: NonsmoothGame>(
    game: &G,
    cfg: &SolverConfig,
    path: u64,
    trace: Option<&TraceFn<'_>>,
) -> Result<RunRecord> {
    let batch = cfg.resolve_batch()?;
    let oracle = ZerothOrder {
        game,
        eta: cfg.eta,
        seed: cfg.seed,
        path,
    };
    drive(game.players(), cfg, path, &oracle, batch, trace)
}
