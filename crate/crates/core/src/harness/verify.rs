use serde::Serialize;

use crate::games::cournot::CournotGame;
use crate::games::hierarchical::HierGame;
use crate::games::{potential_gradient_check, potential_identity_gap, Game, HierarchicalGame, NonsmoothGame, Noiseless, Players, SmoothedPotential};
use crate::games::Potential;
use crate::metrics::smoothed_field;
use crate::rng::{Purpose, RandomStream, StreamKey};
use crate::sets::{BoxSet, StrategyProfile};
use crate::smoothing::{accumulate_two_point, inclusion_gap, smooth_1d_closed_form};
use crate::solvers::{analytic_smoothness, rs_rsg_run, sa_error_bound, sa_lower_solve, LowerLevelConfig, SolverConfig, StepRule, StopRule};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check.
    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {:<40} measured {:.6e}  bound {:.6e}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.bound
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Factor applied to the Lipschitz constants in the moment and smoothing bounds.
    /// Values well below one must make those checks fail.
    pub lipschitz_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            lipschitz_scale: 1.0,
        }
    }
}

fn check(name: &str, measured: f64, bound: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        measured,
        bound,
        passed: measured <= bound,
    }
}

fn random_profile(players: &Players, s: &mut RandomStream) -> StrategyProfile {
    let set = players.joint();
    let v = set.lower().iter().zip(set.upper()).map(|(l, u)| s.uniform(*l, *u)).collect();
    players.profile(v).expect("dimension matches")
}

/// Runs the property checks at reduced sample sizes with fixed seeds.
pub fn verify_suite(opts: &VerifyOptions) -> VerifyReport {
    let seed = opts.seed;
    let mut checks = Vec::new();
    let (cournot, cournot_pot) = CournotGame::benchmark();
    let (hier, hier_pot) = HierGame::benchmark();
    let mut s = RandomStream::derive(seed, StreamKey::new(0, 0, 0, Purpose::Probe, 100));

    // Projection: idempotent and non-expansive.
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let lo: Vec<f64> = (0..4).map(|_| s.uniform(-10.0, 10.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + s.uniform(0.0, 5.0)).collect();
        let set = BoxSet::new(lo, hi).unwrap();
        let a: Vec<f64> = (0..4).map(|_| s.uniform(-30.0, 30.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| s.uniform(-30.0, 30.0)).collect();
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        let again = set.project(&pa).unwrap();
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d(&pa, &again)).max(d(&pa, &pb) - d(&a, &b));
    }
    checks.push(check("projection idempotent and non-expansive", worst, 1e-12));

    // Sphere sampler radius.
    let mut worst = 0.0f64;
    let mut v = vec![0.0; 5];
    for _ in 0..10_000 {
        s.sphere_into(0.4, &mut v);
        worst = worst.max((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 0.4).abs());
    }
    checks.push(check("sphere sample radius", worst, 1e-12));

    // Two-point estimator: unbiasedness and second moment.
    let eta = 0.5;
    let draws = 100_000;
    let mut z_worst = 0.0f64;
    let mut moment_ratio = 0.0f64;
    let mut plus = [0.0];
    let mut minus = [0.0];
    for p in 0..5 {
        let x = random_profile(cournot.players(), &mut s);
        for i in 0..6 {
            let f = cournot.h_piecewise(i).unwrap();
            let target = smooth_1d_closed_form(f, eta).unwrap().grad(x.player(i)[0]);
            let mut st = RandomStream::derive(seed, StreamKey::new(p, 0, i as u64, Purpose::Probe, 101));
            let (mut sum, mut sq) = (0.0, 0.0);
            let mut dir = [0.0];
            for _ in 0..draws {
                let xi = cournot.sample_noise(&mut st);
                st.sphere_into(eta, &mut dir);
                plus[0] = x.player(i)[0] + dir[0];
                minus[0] = x.player(i)[0] - dir[0];
                let mut g = [0.0];
                accumulate_two_point(&dir, eta, cournot.h_value(i, &plus, &xi), cournot.h_value(i, &minus, &xi), &mut g);
                sum += g[0];
                sq += g[0] * g[0];
            }
            let n = draws as f64;
            let mean = sum / n;
            let se = ((sq / n - mean * mean) / n).sqrt();
            z_worst = z_worst.max((mean - target).abs() / se);
            let l0 = cournot.h_lipschitz(i) * opts.lipschitz_scale;
            let bound = 16.0 * (2.0 * std::f64::consts::PI).sqrt() * l0 * l0;
            moment_ratio = moment_ratio.max(sq / n / bound);
        }
    }
    checks.push(check("two-point estimator bias (std errors)", z_worst, 4.0));
    checks.push(check("two-point second moment / bound", moment_ratio, 1.0));

    // Smoothing bounds and the inclusion of the smoothed gradient.
    let mut value_gap = 0.0f64;
    let mut grad_gap = 0.0f64;
    let mut deviation = 0.0f64;
    for eta in [0.3, 0.5, 0.8] {
        for i in 0..6 {
            let f = cournot.h_piecewise(i).unwrap();
            let sm = smooth_1d_closed_form(f, eta).unwrap();
            let l0 = f.lipschitz() * opts.lipschitz_scale;
            for k in 0..200 {
                let x = 12.0 * k as f64 / 199.0;
                value_gap = value_gap.max((sm.value(x) - f.eval(x)).abs() - l0 * eta);
                grad_gap = grad_gap.max(sm.grad(x).abs() - l0);
                deviation = deviation.max(inclusion_gap(f, x, eta).unwrap());
            }
        }
    }
    checks.push(check("smoothing value gap minus L0 eta", value_gap, 1e-12));
    checks.push(check("smoothed gradient norm minus L0", grad_gap, 1e-12));
    checks.push(check("smoothed gradient outside delta-Clarke set", deviation, 1e-12));

    // Potential identities on both benchmarks.
    let mut gap = 0.0f64;
    let mut fd = 0.0f64;
    for _ in 0..50 {
        let a = random_profile(cournot.players(), &mut s);
        let b = random_profile(cournot.players(), &mut s);
        gap = gap.max(potential_identity_gap(&cournot, &cournot_pot, &a, &b).unwrap());
        fd = fd.max(potential_gradient_check(&cournot, &cournot_pot, &a, 1e-6).unwrap());
        let a = random_profile(hier.players(), &mut s);
        let b = random_profile(hier.players(), &mut s);
        gap = gap.max(potential_identity_gap(&hier, &hier_pot, &a, &b).unwrap());
        fd = fd.max(potential_gradient_check(&hier, &hier_pot, &a, 1e-6).unwrap());
    }
    checks.push(check("potential identity gap", gap, 1e-8));
    checks.push(check("potential gradient identity (FD)", fd, 1e-5));

    // Smooth-part oracle unbiasedness.
    let x = random_profile(cournot.players(), &mut s);
    let mut z = 0.0f64;
    let mut m = [0.0];
    for i in 0..6 {
        cournot.m_grad_mean(i, &x, &mut m);
        let mut st = RandomStream::derive(seed, StreamKey::new(0, 0, i as u64, Purpose::Probe, 102));
        let (mut sum, mut sq) = (0.0, 0.0);
        let mut g = [0.0];
        for _ in 0..draws {
            let xi = cournot.sample_noise(&mut st);
            cournot.m_grad(i, &x, &xi, &mut g);
            sum += g[0];
            sq += g[0] * g[0];
        }
        let n = draws as f64;
        let mean = sum / n;
        z = z.max((mean - m[0]).abs() / ((sq / n - mean * mean) / n).sqrt());
    }
    checks.push(check("smooth-part oracle bias (std errors)", z, 4.0));

    // Lower-level SA error against its bound.
    let lower = LowerLevelConfig::default();
    let bounds = hier.follower_bounds(0).unwrap();
    let mu = hier.follower_modulus(0);
    let set = hier.follower_set(0);
    let radius_sq = set.max_sq_distance_from(&set.midpoint());
    let mut ratio = 0.0f64;
    for t in [100, 1_000] {
        let exact = hier.exact_follower(0, &[7.0]).unwrap()[0];
        let reps = 200;
        let mut mse = 0.0;
        for r in 0..reps {
            let mut st = RandomStream::derive(seed, StreamKey::new(r, t as u64, 0, Purpose::LowerLevel, 103));
            let y = sa_lower_solve(&hier, 0, &[7.0], t, &lower, &mut st).unwrap()[0];
            mse += (y - exact).powi(2) / reps as f64;
        }
        let bound = sa_error_bound(bounds, mu, lower.alpha0_for(mu), lower.offset, radius_sq, t).unwrap();
        ratio = ratio.max(mse / bound);
    }
    checks.push(check("SA mean-squared error / bound", ratio, 1.0));

    // Budget accounting and reproducibility.
    let mut cfg = SolverConfig::new(0.01, 5, 40);
    cfg.x0 = Some(vec![12.0; 6]);
    cfg.seed = seed;
    cfg.stop = StopRule::Horizon;
    let a = rs_rsg_run(&cournot, &cfg, 0, None).unwrap();
    let b = rs_rsg_run(&cournot, &cfg, 0, None).unwrap();
    let expected = (2 * 6 * 5 * 40) as f64;
    checks.push(check("zeroth-order call count error", (a.samples.zeroth as f64 - expected).abs(), 0.0));
    checks.push(check("rerun output difference", if a == b { 0.0 } else { 1.0 }, 0.0));

    // Noiseless descent of the smoothed potential.
    let l = analytic_smoothness(&cournot, eta).unwrap();
    let mut cfg = SolverConfig::new(0.5 / l, 1, 200);
    cfg.step = StepRule::half_inverse(l);
    cfg.eta = eta;
    cfg.x0 = Some(vec![12.0; 6]);
    cfg.stop = StopRule::Horizon;
    cfg.snapshot_stride = Some(1);
    let rec = rs_rsg_run(&Noiseless(cournot.clone()), &cfg, 0, None).unwrap();
    let sp = SmoothedPotential::new(&cournot, &cournot_pot, eta).unwrap();
    let rise = rec
        .iterates
        .windows(2)
        .map(|w| sp.value(&w[1].values) - sp.value(&w[0].values))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(check("noiseless smoothed-potential increase", rise, 1e-12));

    // Smoothed field is finite on the hierarchical game.
    let reduced = crate::games::ExactFollower::new(&hier).unwrap();
    let x = hier.players().profile(vec![19.0; 4]).unwrap();
    let mut f = vec![0.0; 4];
    let se = smoothed_field(&reduced, &x, 0.7, &mut f).unwrap();
    checks.push(check("hierarchical smoothed field sampling error", se, 0.0));

    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = verify_suite(&VerifyOptions::default());
        assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn corrupted_constant_is_caught() {
        let report = verify_suite(&VerifyOptions {
            seed: 1,
            lipschitz_scale: 0.05,
        });
        assert!(!report.passed());
        let failing: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failing.contains(&"two-point second moment / bound"), "{failing:?}");
    }
}
