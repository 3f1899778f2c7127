use super::{drive, stream, Directions, RunRecord, SampleCounts, SolverConfig, TraceFn};
use crate::error::Result;
use crate::games::SmoothGame;
use crate::rng::Purpose;
use crate::sets::StrategyProfile;

struct FirstOrder<'a, G> {
    game: &'a G,
    seed: u64,
    path: u64,
}

impl<G: SmoothGame> Directions for FirstOrder<'_, G> {
    fn cost(&self, _k: usize, batch: usize) -> SampleCounts {
        SampleCounts {
            first: (self.game.players().count() * batch) as u64,
            ..Default::default()
        }
    }

    fn direction(&self, k: usize, i: usize, x: &StrategyProfile, batch: usize, out: &mut [f64]) -> Result<()> {
        let mut noise = stream(self.seed, self.path, k, i, Purpose::Noise, 0);
        let mut draw = vec![0.0; out.len()];
        let mut sum = vec![0.0; out.len()];
        for _ in 0..batch {
            self.game.sample_grad(i, x, &mut noise, &mut draw);
            for (s, d) in sum.iter_mut().zip(&draw) {
                *s += d;
            }
        }
        for (o, s) in out.iter_mut().zip(&sum) {
            *o = s / batch as f64;
        }
        Ok(())
    }
}

/// Randomized stochastic gradient method for a smooth stochastic potential game.
///
/// Each iteration spends `N * S` first-order calls. `trace`, when given, is evaluated at
/// every `cfg.trace_stride`-th iterate.
pub fn rsg_run<G: SmoothGame>(
    game: &G,
    cfg: &SolverConfig,
    path: u64,
    trace: Option<&TraceFn<'_>>,
) -> Result<RunRecord> {
    let batch = cfg.resolve_batch()?;
    let oracle = FirstOrder {
        game,
        seed: cfg.seed,
        path,
    };
    drive(game.players(), cfg, path, &oracle, batch, trace)
}
