//! Stationarity residuals.
//!
//! For an operator `F` and step `gamma`, the natural residual is
//! `G(x) = (x - Proj_X(x - gamma F(x))) / gamma`. The reported quantity is the squared
//! norm `|G(x)|^2`. For nonsmooth games `F` is the smoothed gradient field, or a member
//! of the Clarke subdifferential chosen to minimize the residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::games::{NonsmoothGame, Players, SmoothGame};
use crate::rng::{Purpose, RandomStream, StreamKey};
use crate::sets::StrategyProfile;
use crate::smoothing::accumulate_two_point;

/// Squared residual, optionally averaged over paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Mean of `per_path`.
    pub mean_sq: f64,
    /// Standard error of the mean over paths, or the Monte Carlo error of a single
    /// estimate.
    pub std_err: f64,
    pub per_path: Vec<f64>,
    pub gamma: f64,
    /// Oracle samples spent on the estimate; zero for closed forms.
    pub samples: usize,
}

impl ResidualReport {
    /// Aggregates per-path squared residuals.
    pub fn aggregate(per_path: Vec<f64>, gamma: f64, samples: usize) -> Result<Self> {
        if per_path.is_empty() {
            return Err(Error::invalid("per_path", "no paths to aggregate"));
        }
        let n = per_path.len() as f64;
        let mean_sq = per_path.iter().sum::<f64>() / n;
        let std_err = if per_path.len() > 1 {
            (per_path.iter().map(|v| (v - mean_sq).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean_sq,
            std_err,
            per_path,
            gamma,
            samples,
        })
    }

    fn single(value: f64, std_err: f64, gamma: f64, samples: usize) -> Self {
        Self {
            mean_sq: value,
            std_err,
            per_path: vec![value],
            gamma,
            samples,
        }
    }
}

/// Where the operator values come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum GradientSource {
    Exact,
    /// Mean of `samples` oracle draws per player from streams keyed by `seed`.
    MonteCarlo { samples: usize, seed: u64 },
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("step {gamma} must be positive")));
    }
    Ok(())
}

/// `|(x - Proj_X(x - gamma F)) / gamma|^2` for a joint operator value `field`.
pub fn residual_sq(players: &Players, x: &StrategyProfile, field: &[f64], gamma: f64) -> f64 {
    let set = players.joint();
    let mut total = 0.0;
    for (j, (v, f)) in x.values().iter().zip(field).enumerate() {
        let moved = (v - gamma * f).clamp(set.lower()[j], set.upper()[j]);
        let g = (v - moved) / gamma;
        total += g * g;
    }
    total
}

/// Squared natural residual of a smooth game.
pub fn vi_residual<G: SmoothGame>(
    game: &G,
    x: &StrategyProfile,
    gamma: f64,
    source: GradientSource,
) -> Result<ResidualReport> {
    check_gamma(gamma)?;
    let players = game.players();
    players.check(x)?;
    let mut field = vec![0.0; x.values().len()];
    match source {
        GradientSource::Exact => {
            for i in 0..players.count() {
                let r = players.partition().range(i)?;
                if !game.exact_grad(i, x, &mut field[r]) {
                    return Err(Error::MissingOracle("exact gradient"));
                }
            }
            Ok(ResidualReport::single(residual_sq(players, x, &field, gamma), 0.0, gamma, 0))
        }
        GradientSource::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("samples", "must be positive"));
            }
            let mut buf = vec![0.0; players.max_dim()];
            for i in 0..players.count() {
                let r = players.partition().range(i)?;
                let mut stream = RandomStream::derive(seed, StreamKey::new(0, 0, i as u64, Purpose::Probe, 0));
                for _ in 0..samples {
                    let b = &mut buf[..r.len()];
                    game.sample_grad(i, x, &mut stream, b);
                    for (f, v) in field[r.clone()].iter_mut().zip(b.iter()) {
                        *f += v;
                    }
                }
                for f in &mut field[r] {
                    *f /= samples as f64;
                }
            }
            let samples_used = samples * players.count();
            Ok(ResidualReport::single(
                residual_sq(players, x, &field, gamma),
                f64::NAN,
                gamma,
                samples_used,
            ))
        }
    }
}

/// Draws used per player when a smoothed gradient has no closed form.
pub const FALLBACK_DRAWS: usize = 200_000;

/// Seed of the fallback Monte Carlo streams.
const FALLBACK_SEED: u64 = 0x5eed_f1e1d;

/// Writes the smoothed gradient field `F_eta(x)` into `field` and returns the largest
/// per-coordinate Monte Carlo standard error (zero when every block is in closed form).
///
/// Scalar players with a closed-form expected cost use
/// `(h(x + eta) - h(x - eta)) / (2 eta)`, which is exact.
pub fn smoothed_field<G: NonsmoothGame>(
    game: &G,
    x: &StrategyProfile,
    eta: f64,
    field: &mut [f64],
) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("smoothing radius {eta} must be positive")));
    }
    let players = game.players();
    players.check(x)?;
    let mut worst_se = 0.0f64;
    for i in 0..players.count() {
        let r = players.partition().range(i)?;
        let xi = x.player(i);
        let n_i = r.len();
        let block = &mut field[r];
        let closed = if n_i == 1 {
            match (game.h_mean(i, &[xi[0] + eta]), game.h_mean(i, &[xi[0] - eta])) {
                (Some(up), Some(down)) => {
                    block[0] = (up - down) / (2.0 * eta);
                    true
                }
                _ => false,
            }
        } else {
            false
        };
        if !closed {
            let mut stream = RandomStream::derive(FALLBACK_SEED, StreamKey::new(0, 0, i as u64, Purpose::Probe, 1));
            let mut dir = vec![0.0; n_i];
            let mut plus = vec![0.0; n_i];
            let mut minus = vec![0.0; n_i];
            let mut draw = vec![0.0; n_i];
            let mut sum = vec![0.0; n_i];
            let mut sq = vec![0.0; n_i];
            for _ in 0..FALLBACK_DRAWS {
                let noise = game.sample_noise(&mut stream);
                stream.sphere_into(eta, &mut dir);
                for k in 0..n_i {
                    plus[k] = xi[k] + dir[k];
                    minus[k] = xi[k] - dir[k];
                }
                draw.iter_mut().for_each(|d| *d = 0.0);
                accumulate_two_point(
                    &dir,
                    eta,
                    game.h_value(i, &plus, &noise),
                    game.h_value(i, &minus, &noise),
                    &mut draw,
                );
                for k in 0..n_i {
                    sum[k] += draw[k];
                    sq[k] += draw[k] * draw[k];
                }
            }
            let n = FALLBACK_DRAWS as f64;
            for k in 0..n_i {
                block[k] = sum[k] / n;
                let var = (sq[k] / n - block[k] * block[k]).max(0.0);
                worst_se = worst_se.max((var / n).sqrt());
            }
        }
        let mut m = vec![0.0; n_i];
        if !game.m_grad_mean(i, x, &mut m) {
            let mut stream = RandomStream::derive(FALLBACK_SEED, StreamKey::new(0, 0, i as u64, Purpose::Probe, 2));
            let mut draw = vec![0.0; n_i];
            m.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..FALLBACK_DRAWS {
                let noise = game.sample_noise(&mut stream);
                game.m_grad(i, x, &noise, &mut draw);
                for (a, d) in m.iter_mut().zip(&draw) {
                    *a += d / FALLBACK_DRAWS as f64;
                }
            }
        }
        for (b, v) in block.iter_mut().zip(&m) {
            *b += v;
        }
    }
    Ok(worst_se)
}

/// Squared residual of the smoothed game with radius `eta`.
pub fn smoothed_residual<G: NonsmoothGame>(
    game: &G,
    x: &StrategyProfile,
    gamma: f64,
    eta: f64,
) -> Result<ResidualReport> {
    check_gamma(gamma)?;
    let mut field = vec![0.0; x.values().len()];
    let se = smoothed_field(game, x, eta, &mut field)?;
    let samples = if se > 0.0 { FALLBACK_DRAWS } else { 0 };
    Ok(ResidualReport::single(
        residual_sq(game.players(), x, &field, gamma),
        se,
        gamma,
        samples,
    ))
}

/// `dist(0, G_gamma(x))^2` where the residual set is generated by the Clarke
/// subdifferential of the expected nonsmooth parts. Requires scalar players with
/// piecewise-linear expected costs; each coordinate is minimized by golden-section
/// search over its subdifferential interval.
pub fn clarke_residual<G: NonsmoothGame>(game: &G, x: &StrategyProfile, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let players = game.players();
    players.check(x)?;
    let mut total = 0.0;
    let mut m = [0.0];
    for i in 0..players.count() {
        if players.dim(i) != 1 {
            return Err(Error::NotPiecewiseLinear(i));
        }
        let f = game.h_piecewise(i).ok_or(Error::NotPiecewiseLinear(i))?;
        if !game.m_grad_mean(i, x, &mut m) {
            return Err(Error::MissingOracle("expected smooth-part gradient"));
        }
        let v = x.player(i)[0];
        let set = players.set(i);
        let (lo, hi) = f.clarke_interval(v);
        let phi = |u: f64| {
            let moved = (v - gamma * (u + m[0])).clamp(set.lower()[0], set.upper()[0]);
            ((v - moved) / gamma).powi(2)
        };
        total += golden_section_min(phi, lo, hi, 1e-10);
    }
    Ok(total)
}

/// Minimum of a unimodal function on `[a, b]`, endpoints included.
fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b - a <= tol {
        return f(a).min(f(b));
    }
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(a)).min(f(b)).min(f(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::cournot::CournotGame;
    use crate::games::{ExactFollower, Game};
    use crate::games::hierarchical::HierGame;

    #[test]
    fn interior_point_of_smooth_game() {
        let (game, _) = CournotGame::smooth();
        let x = game.players().profile(vec![1.0; 6]).unwrap();
        let r = vi_residual(&game, &x, 0.1, GradientSource::Exact).unwrap();
        let mut expected = 0.0;
        let mut g = [0.0];
        for i in 0..6 {
            game.exact_grad(i, &x, &mut g);
            expected += g[0] * g[0];
        }
        assert!((r.mean_sq - expected).abs() < 1e-12);
    }

    #[test]
    fn boundary_with_outward_gradient_is_stationary() {
        let (game, _) = CournotGame::smooth();
        let x = game.players().profile(vec![0.0; 6]).unwrap();
        let r = vi_residual(&game, &x, 0.05, GradientSource::Exact).unwrap();
        assert_eq!(r.mean_sq, 0.0);
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let (game, _) = CournotGame::smooth();
        let x = game.players().profile(vec![3.0; 6]).unwrap();
        let exact = vi_residual(&game, &x, 0.1, GradientSource::Exact).unwrap();
        let mc = vi_residual(&game, &x, 0.1, GradientSource::MonteCarlo { samples: 200_000, seed: 4 }).unwrap();
        assert!((exact.mean_sq - mc.mean_sq).abs() < 0.02 * exact.mean_sq);
    }

    #[test]
    fn smoothed_residual_away_from_kinks_equals_plain_residual() {
        let (game, _) = CournotGame::benchmark();
        let x = game.players().profile(vec![1.0, 1.5, 2.0, 8.0, 9.0, 10.0]).unwrap();
        let plain = vi_residual(&crate::games::Noiseless(game.clone()), &x, 0.02, GradientSource::Exact).unwrap();
        let smooth = smoothed_residual(&game, &x, 0.02, 0.5).unwrap();
        assert!((plain.mean_sq - smooth.mean_sq).abs() < 1e-12);
        assert_eq!(smooth.samples, 0);
    }

    #[test]
    fn smoothed_residual_uses_slope_average_at_kink() {
        let (game, _) = CournotGame::benchmark();
        let x = game.players().profile(vec![4.0; 6]).unwrap();
        let mut field = vec![0.0; 6];
        smoothed_field(&game, &x, 0.5, &mut field).unwrap();
        let mut m = [0.0];
        game.m_grad_mean(0, &x, &mut m);
        assert!((field[0] - (0.75 * game.mean_cost(0) + m[0])).abs() < 1e-12);
    }

    #[test]
    fn fallback_agrees_with_closed_form() {
        /// Same game without closed-form expected costs.
        struct Opaque(CournotGame);
        impl Game for Opaque {
            fn players(&self) -> &Players {
                self.0.players()
            }
        }
        impl NonsmoothGame for Opaque {
            type Noise = f64;
            fn sample_noise(&self, s: &mut RandomStream) -> f64 {
                self.0.sample_noise(s)
            }
            fn mean_noise(&self) -> f64 {
                0.5
            }
            fn h_value(&self, i: usize, x: &[f64], xi: &f64) -> f64 {
                self.0.h_value(i, x, xi)
            }
            fn m_grad(&self, i: usize, x: &StrategyProfile, xi: &f64, out: &mut [f64]) {
                self.0.m_grad(i, x, xi, out)
            }
            fn h_lipschitz(&self, i: usize) -> f64 {
                self.0.h_lipschitz(i)
            }
        }
        let (game, _) = CournotGame::benchmark();
        let x = game.players().profile(vec![4.1, 3.8, 1.0, 6.0, 0.2, 11.0]).unwrap();
        let mut exact = vec![0.0; 6];
        smoothed_field(&game, &x, 0.5, &mut exact).unwrap();
        let opaque = Opaque(game);
        let mut mc = vec![0.0; 6];
        let se = smoothed_field(&opaque, &x, 0.5, &mut mc).unwrap();
        assert!(se > 0.0);
        for (a, b) in exact.iter().zip(&mc) {
            assert!((a - b).abs() < 5.0 * se + 5e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn clarke_residual_at_kink_picks_best_slope() {
        let (game, _) = CournotGame::benchmark();
        let x = game.players().profile(vec![4.0; 6]).unwrap();
        let gamma = 0.01;
        let r = clarke_residual(&game, &x, gamma).unwrap();
        let mut expected = 0.0;
        let mut m = [0.0];
        for i in 0..6 {
            game.m_grad_mean(i, &x, &mut m);
            let c = game.mean_cost(i);
            let (lo, hi) = (0.5 * c + m[0], c + m[0]);
            let best = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
            expected += best * best;
        }
        assert!((r - expected).abs() < 1e-8, "{r} vs {expected}");
    }

    #[test]
    fn clarke_residual_requires_piecewise_linear() {
        let (game, _) = HierGame::benchmark();
        let reduced = ExactFollower::new(&game).unwrap();
        let x = game.players().profile(vec![1.0; 4]).unwrap();
        assert!(matches!(
            clarke_residual(&reduced, &x, 0.1),
            Err(Error::NotPiecewiseLinear(0))
        ));
    }

    #[test]
    fn golden_section_on_flat_and_sloped() {
        assert!(golden_section_min(|u| (u - 0.3).powi(2), 0.0, 1.0, 1e-10) < 1e-18);
        assert_eq!(golden_section_min(|u| u, 2.0, 3.0, 1e-10), 2.0);
    }
}
