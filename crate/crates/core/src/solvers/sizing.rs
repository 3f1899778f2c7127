use serde::Serialize;

use super::lower::sa_error_bound;
use super::LowerLevelConfig;
use crate::error::{Error, Result};
use crate::games::{estimate_potential_bounds, HierarchicalGame, NonsmoothGame, Potential, PotentialBounds, SmoothedPotential};
use crate::metrics::smoothed_field;
use crate::rng::{Purpose, RandomStream, StreamKey};
use crate::sets::{dist_sq, StrategyProfile};
use crate::smoothing::accumulate_two_point;

/// Mini-batch size `max(1, ceil(sigma sqrt(6 M) / (4 L D)))`.
pub fn batch_size_from_budget(m: f64, sigma: f64, lipschitz: f64, d: f64) -> Result<usize> {
    for (name, v) in [("M", m), ("L", lipschitz), ("D", d)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument {
                name: "batch_size_from_budget",
                reason: format!("{name} = {v} must be positive"),
            });
        }
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be nonnegative")));
    }
    let s = (sigma * (6.0 * m).sqrt() / (4.0 * lipschitz * d)).ceil();
    Ok((s as usize).max(1))
}

fn max_lipschitz<G: NonsmoothGame>(game: &G) -> f64 {
    (0..game.players().count()).map(|i| game.h_lipschitz(i)).fold(0.0, f64::max)
}

/// `L(eta) = L_m + L_max sqrt(n_max) sqrt(N) / eta`: smoothness of the smoothed gradient
/// field, from the Lipschitz constants of the nonsmooth parts and the smoothness `L_m`
/// of the smooth parts.
pub fn analytic_smoothness<G: NonsmoothGame>(game: &G, eta: f64) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    let lm = game
        .coupling_smoothness()
        .ok_or(Error::MissingOracle("smooth-part Lipschitz constant"))?;
    let players = game.players();
    let n = players.max_dim() as f64;
    Ok(lm + max_lipschitz(game) * n.sqrt() * (players.count() as f64).sqrt() / eta)
}

/// Twice the largest difference quotient `|F_eta(a) - F_eta(b)| / |a - b|` over all
/// pairs of probes and over each probe paired with its coordinate shifts by `fd_step`.
pub fn numeric_smoothness<G: NonsmoothGame>(
    game: &G,
    eta: f64,
    probes: &[StrategyProfile],
    fd_step: f64,
) -> Result<f64> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::invalid("fd_step", "must be positive"));
    }
    let players = game.players();
    let dim = players.partition().total_dim();
    let field = |x: &StrategyProfile| -> Result<Vec<f64>> {
        let mut f = vec![0.0; dim];
        smoothed_field(game, x, eta, &mut f)?;
        Ok(f)
    };
    let mut points: Vec<(StrategyProfile, Vec<f64>)> = Vec::new();
    for p in probes {
        players.check(p)?;
        points.push((p.clone(), field(p)?));
    }
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    let mut consider = |a: &(StrategyProfile, Vec<f64>), b: &(StrategyProfile, Vec<f64>)| {
        let dx = dist_sq(a.0.values(), b.0.values()).sqrt();
        if dx > 0.0 {
            worst = worst.max(dist_sq(&a.1, &b.1).sqrt() / dx);
            pairs += 1;
        }
    };
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            consider(&points[a], &points[b]);
        }
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut shifted = points[a].0.clone();
                let lo = players.joint().lower()[j];
                let hi = players.joint().upper()[j];
                let v = &mut shifted.values_mut()[j];
                *v = (*v + sign * fd_step).clamp(lo, hi);
                let f = field(&shifted)?;
                consider(&points[a], &(shifted, f));
            }
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateProbes("no pair of distinct probe points".into()));
    }
    Ok(2.0 * worst)
}

/// How `L(eta)` is obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SmoothnessMethod {
    Analytic,
    Numeric { probes: Vec<Vec<f64>>, fd_step: f64 },
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessEstimate {
    pub lipschitz: f64,
    /// `D(eta) = sqrt((P_eta max - P_eta min) / L(eta))`.
    pub d: f64,
    pub bounds: PotentialBounds,
    pub method: SmoothnessMethod,
}

/// `L(eta)` together with `D(eta)` from grid-estimated bounds of the smoothed potential.
pub fn estimate_smoothness<G: NonsmoothGame, P: Potential>(
    game: &G,
    potential: &P,
    eta: f64,
    method: SmoothnessMethod,
    grid_points: usize,
) -> Result<SmoothnessEstimate> {
    let lipschitz = match &method {
        SmoothnessMethod::Analytic => analytic_smoothness(game, eta)?,
        SmoothnessMethod::Numeric { probes, fd_step } => {
            let profiles = probes
                .iter()
                .map(|p| game.players().profile(p.clone()))
                .collect::<Result<Vec<_>>>()?;
            numeric_smoothness(game, eta, &profiles, *fd_step)?
        }
        SmoothnessMethod::Fixed(l) => {
            if !(l.is_finite() && *l > 0.0) {
                return Err(Error::invalid("lipschitz", "must be positive"));
            }
            *l
        }
    };
    let smoothed = SmoothedPotential::new(game, potential, eta)?;
    let bounds = estimate_potential_bounds(&smoothed, game.players().joint(), grid_points)?;
    Ok(SmoothnessEstimate {
        lipschitz,
        d: (bounds.range() / lipschitz).sqrt(),
        bounds,
        method,
    })
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Second-moment constant of the RS-RSG direction:
/// `sigma^2 = 32 sqrt(2 pi) L_max^2 n_max + 2 sigma_m^2`.
pub fn sigma_nonsmooth<G: NonsmoothGame>(game: &G) -> Result<f64> {
    let sm = game
        .coupling_noise_bound()
        .ok_or(Error::MissingOracle("smooth-part variance bound"))?;
    let l = max_lipschitz(game);
    let n = game.players().max_dim() as f64;
    Ok((32.0 * SQRT_2PI * l * l * n + 2.0 * sm).sqrt())
}

/// Second-moment constant of the biased direction at the first iteration, where the
/// follower error bound is largest:
/// `4 n_max^2 (L^y_max)^2 eps_0 / eta^2 + 64 sqrt(2 pi) L_max^2 n_max + 2 sigma_m^2`.
pub fn sigma_hierarchical<H: HierarchicalGame>(game: &H, eta: f64, lower: &LowerLevelConfig) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    let players = game.players();
    let sm = game
        .coupling_noise_bound()
        .ok_or(Error::MissingOracle("smooth-part variance bound"))?;
    let t0 = lower.schedule.steps(0);
    let mut eps = 0.0f64;
    let mut l = 0.0f64;
    let mut ly = 0.0f64;
    for i in 0..players.count() {
        let bounds = game
            .follower_bounds(i)
            .ok_or(Error::MissingOracle("follower operator bounds"))?;
        let mu = game.follower_modulus(i);
        let set = game.follower_set(i);
        let radius_sq = set.max_sq_distance_from(&set.midpoint());
        eps = eps.max(sa_error_bound(bounds, mu, lower.alpha0_for(mu), lower.offset, radius_sq, t0)?);
        l = l.max(game.h_lipschitz(i));
        ly = ly.max(game.follower_lipschitz(i, eta));
    }
    let n = players.max_dim() as f64;
    Ok((4.0 * n * n * ly * ly * eps / (eta * eta) + 64.0 * SQRT_2PI * l * l * n + 2.0 * sm).sqrt())
}

/// Measured counterpart of [`sigma_nonsmooth`]: the largest per-player mean squared
/// deviation of a single RS-RSG direction sample from the smoothed gradient, over the
/// probe points, with `draws` samples per probe and player.
pub fn empirical_sigma<G: NonsmoothGame>(
    game: &G,
    eta: f64,
    probes: &[StrategyProfile],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if probes.is_empty() || draws == 0 {
        return Err(Error::DegenerateProbes("need at least one probe and one draw".into()));
    }
    let players = game.players();
    let dim = players.partition().total_dim();
    let mut worst = 0.0f64;
    for (p, x) in probes.iter().enumerate() {
        players.check(x)?;
        let mut field = vec![0.0; dim];
        smoothed_field(game, x, eta, &mut field)?;
        for i in 0..players.count() {
            let r = players.partition().range(i)?;
            let n = r.len();
            let x_i = x.player(i);
            let mut s = RandomStream::derive(seed, StreamKey::new(p as u64, 0, i as u64, Purpose::Probe, 3));
            let (mut v, mut plus, mut minus, mut m, mut est) =
                (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut total = 0.0;
            for _ in 0..draws {
                let xi = game.sample_noise(&mut s);
                s.sphere_into(eta, &mut v);
                for j in 0..n {
                    plus[j] = x_i[j] + v[j];
                    minus[j] = x_i[j] - v[j];
                }
                est.iter_mut().for_each(|e| *e = 0.0);
                accumulate_two_point(&v, eta, game.h_value(i, &plus, &xi), game.h_value(i, &minus, &xi), &mut est);
                game.m_grad(i, x, &xi, &mut m);
                total += est
                    .iter()
                    .zip(&m)
                    .zip(&field[r.clone()])
                    .map(|((e, g), f)| (e + g - f).powi(2))
                    .sum::<f64>();
            }
            worst = worst.max(total / draws as f64);
        }
    }
    Ok(worst.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::cournot::CournotGame;
    use crate::games::hierarchical::HierGame;
    use crate::games::{ExactFollower, Game};

    #[test]
    fn batch_size_examples() {
        assert_eq!(batch_size_from_budget(1e6, 0.0, 1.0, 1.0).unwrap(), 1);
        assert_eq!(batch_size_from_budget(6.0, 4.0, 1.0, 1.0).unwrap(), 6);
        assert_eq!(batch_size_from_budget(6.0, 4.1, 1.0, 1.0).unwrap(), 7);
        assert!(batch_size_from_budget(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(batch_size_from_budget(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn analytic_constants_of_benchmarks() {
        let (c, _) = CournotGame::benchmark();
        let l = analytic_smoothness(&c, 0.5).unwrap();
        assert!((l - (0.07 + 5.125 * 6f64.sqrt() / 0.5)).abs() < 1e-12);
        let s = sigma_nonsmooth(&c).unwrap();
        let expected = (32.0 * (2.0 * std::f64::consts::PI).sqrt() * 5.125f64.powi(2) + 2.0 * 16.0 / 12.0).sqrt();
        assert!((s - expected).abs() < 1e-10);

        let (h, _) = HierGame::benchmark();
        let reduced = ExactFollower::new(&h).unwrap();
        let l = analytic_smoothness(&reduced, 0.5).unwrap();
        assert!((l - (0.1 + 11.25 * 2.0 / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn hierarchical_sigma_matches_formula() {
        let (h, _) = HierGame::benchmark();
        let eta = 0.7;
        let lower = LowerLevelConfig::default();
        let s = sigma_hierarchical(&h, eta, &lower).unwrap();
        let (cf, v2, mu) = (7.0f64, 2.4f64 * 2.4 / 3.0, 0.04f64);
        let a0 = 1.0 / mu;
        let eps = ((cf * cf + v2) * a0 * a0 / (2.0 * mu * a0 - 1.0)).max(1e4) / 2.0;
        let ly = 0.03 * (20.0 + eta);
        let expected = (4.0 * ly * ly * eps / (eta * eta)
            + 64.0 * (2.0 * std::f64::consts::PI).sqrt() * 11.25f64.powi(2)
            + 2.0 * 4.0 / 3.0)
            .sqrt();
        assert!((s - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn numeric_smoothness_is_below_analytic() {
        let (c, _) = CournotGame::benchmark();
        let probes: Vec<StrategyProfile> = [1.0, 3.8, 4.0, 4.2, 7.0, 11.0]
            .iter()
            .map(|v| c.players().profile(vec![*v; 6]).unwrap())
            .collect();
        let numeric = numeric_smoothness(&c, 0.5, &probes, 1e-3).unwrap();
        let analytic = analytic_smoothness(&c, 0.5).unwrap();
        assert!(numeric > 0.0 && numeric <= analytic, "{numeric} vs {analytic}");
        let single = [probes[0].clone()];
        assert!(numeric_smoothness(&c, 0.5, &single, 1e-3).is_ok());
    }

    #[test]
    fn degenerate_probes() {
        let (c, _) = CournotGame::benchmark();
        let corner = c.players().profile(vec![0.0; 6]).unwrap();
        assert!(numeric_smoothness(&c, 0.5, &[corner.clone(), corner], 1e-3).is_ok());
        assert!(matches!(
            numeric_smoothness(&c, 0.5, &[], 1e-3),
            Err(Error::DegenerateProbes(_))
        ));
    }

    #[test]
    fn empirical_sigma_is_below_analytic() {
        let (c, _) = CournotGame::benchmark();
        let probes = vec![c.players().profile(vec![12.0; 6]).unwrap()];
        let emp = empirical_sigma(&c, 0.5, &probes, 20_000, 1).unwrap();
        assert!(emp > 0.0 && emp < sigma_nonsmooth(&c).unwrap());
    }
}
