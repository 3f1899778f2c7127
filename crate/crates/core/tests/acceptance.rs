//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use potgame_core::games::{potential_gradient_check, potential_identity_gap, FollowerBounds, Noiseless};
use potgame_core::harness::{run_experiment, ExperimentConfig, ExperimentOutput, RunOverrides};
use potgame_core::metrics::{clarke_residual, smoothed_residual, vi_residual, GradientSource};
use potgame_core::smoothing::{deviation_bound, interval_average, smooth_1d_closed_form, two_point_gradient};
use potgame_core::solvers::{bias_bound, rsg_run, sa_error_bound, sa_lower_solve, LowerLevelConfig, StopRule};
use potgame_core::*;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn stream(purpose: Purpose, a: u64, b: u64, c: u64) -> RandomStream {
    RandomStream::derive(SEED, StreamKey::new(a, b, c, purpose, 0))
}

fn random_profile(players: &Players, s: &mut RandomStream) -> StrategyProfile {
    let set = players.joint();
    let v = set.lower().iter().zip(set.upper()).map(|(l, u)| s.uniform(*l, *u)).collect();
    players.profile(v).unwrap()
}

/// Twenty evaluation points: twelve spread over the box and eight within the smoothing
/// window of the production kink at 4.
fn estimator_points() -> Vec<(f64, f64)> {
    let etas = [0.3, 0.5, 0.8];
    let mut s = stream(Purpose::Probe, 1, 0, 0);
    let mut points = Vec::new();
    for k in 0..20 {
        let eta = etas[k % 3];
        let x = if k < 12 { s.uniform(0.0, 12.0) } else { 4.0 + s.uniform(-eta, eta) };
        points.push((x, eta));
    }
    points
}

/// Criteria 1 and 2 from one pass over the draws.
fn estimator_criteria() -> (Outcome, Outcome) {
    let (game, _) = CournotGame::benchmark();
    let draws = 1_000_000;
    let mut worst_z = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for (p, (x, eta)) in estimator_points().into_iter().enumerate() {
        for i in 0..game.players().count() {
            let f = game.h_piecewise(i).unwrap();
            let target = smooth_1d_closed_form(f, eta).unwrap().grad(x);
            let mut s = stream(Purpose::Noise, p as u64, 1, i as u64);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..draws {
                let g = two_point_gradient(&game, i, &[x], eta, &mut s).unwrap().gradient[0];
                sum += g;
                sq += g * g;
            }
            let n = draws as f64;
            let mean = sum / n;
            let se = ((sq / n - mean * mean) / n).sqrt();
            worst_z = worst_z.max((mean - target).abs() / se);
            let l0 = game.h_lipschitz(i);
            worst_ratio = worst_ratio.max(sq / n / (16.0 * (2.0 * PI).sqrt() * l0 * l0));
        }
    }
    (
        outcome(worst_z <= 4.0, format!("worst |mean - closed form| = {worst_z:.3} standard errors (limit 4)")),
        outcome(worst_ratio <= 1.0, format!("worst E|g|^2 / 16 sqrt(2 pi) L0^2 n = {worst_ratio:.4e} (limit 1)")),
    )
}

fn smoothing_bounds() -> Outcome {
    let (game, _) = CournotGame::benchmark();
    let mut value_ratio = 0.0f64;
    let mut quotient_ratio = 0.0f64;
    let mut quadrature_gap = 0.0f64;
    for eta in [0.3, 0.5, 0.8] {
        for i in 0..game.players().count() {
            let f = game.h_piecewise(i).unwrap();
            let l0 = f.lipschitz();
            let sm = smooth_1d_closed_form(f, eta).unwrap();
            let grid: Vec<f64> = (0..200).map(|k| 12.0 * k as f64 / 199.0).collect();
            for &x in &grid {
                value_ratio = value_ratio.max((sm.value(x) - f.eval(x)).abs() / (l0 * eta));
                quadrature_gap = quadrature_gap.max((interval_average(|t| f.eval(t), x, eta) - sm.value(x)).abs());
            }
            for w in grid.windows(2) {
                let q = (sm.grad(w[1]) - sm.grad(w[0])).abs() / (w[1] - w[0]);
                quotient_ratio = quotient_ratio.max(q / (l0 / eta));
            }
        }
    }
    outcome(
        value_ratio <= 1.0 && quotient_ratio <= 1.0 && quadrature_gap <= 1e-4,
        format!(
            "|h_eta - h| / L0 eta = {value_ratio:.4}, grad quotient / (L0 sqrt(n) / eta) = {quotient_ratio:.4}, quadrature gap {quadrature_gap:.1e}"
        ),
    )
}

fn potential_identities() -> Outcome {
    let mut s = stream(Purpose::Probe, 4, 0, 0);
    let mut gap = 0.0f64;
    let mut fd = 0.0f64;
    let mut check = |game: &dyn Fn(&StrategyProfile, &StrategyProfile) -> (f64, f64), players: &Players| {
        for _ in 0..100 {
            let a = random_profile(players, &mut s);
            let b = random_profile(players, &mut s);
            let (g, d) = game(&a, &b);
            gap = gap.max(g);
            fd = fd.max(d);
        }
    };
    let (cournot, cp) = CournotGame::benchmark();
    check(
        &|a, b| {
            (
                potential_identity_gap(&cournot, &cp, a, b).unwrap(),
                potential_gradient_check(&cournot, &cp, a, 1e-6).unwrap(),
            )
        },
        cournot.players(),
    );
    let (smooth, sp) = CournotGame::smooth();
    check(
        &|a, b| {
            (
                potential_identity_gap(&smooth, &sp, a, b).unwrap(),
                potential_gradient_check(&smooth, &sp, a, 1e-6).unwrap(),
            )
        },
        smooth.players(),
    );
    let (hier, hp) = HierGame::benchmark();
    check(
        &|a, b| {
            (
                potential_identity_gap(&hier, &hp, a, b).unwrap(),
                potential_gradient_check(&hier, &hp, a, 1e-6).unwrap(),
            )
        },
        hier.players(),
    );
    outcome(
        gap <= 1e-8 && fd <= 1e-5,
        format!("identity gap {gap:.2e} (limit 1e-8), gradient FD gap {fd:.2e} (limit 1e-5)"),
    )
}

fn noiseless_descent() -> Outcome {
    let (game, pot) = CournotGame::smooth();
    let game = Noiseless(game);
    // The exact operator is affine with Lipschitz constant b (N + 1) = 0.07.
    let l = 0.07;
    let gamma = 0.5 / l;
    let mut cfg = SolverConfig::new(gamma, 1, 1_000);
    cfg.x0 = Some(vec![12.0; 6]);
    cfg.stop = StopRule::Horizon;
    cfg.snapshot_stride = Some(1);
    let rec = rsg_run(&game, &cfg, 0, None).unwrap();
    let values: Vec<f64> = rec.iterates.iter().map(|s| pot.value(&s.values)).collect();
    let rise = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let last = game.players().profile(rec.iterates.last().unwrap().values.clone()).unwrap();
    let residual = vi_residual(&game, &last, gamma, GradientSource::Exact).unwrap().mean_sq.sqrt();
    outcome(
        rise <= 0.0 && residual <= 1e-6 && rec.iterates.len() == 1_001,
        format!("largest potential increase {rise:.2e}, final |G| = {residual:.2e} (limit 1e-6)"),
    )
}

fn cournot_config() -> ExperimentConfig {
    ExperimentConfig::parse(
        r#"
game = "cournot6"
eta_sweep = [0.3, 0.5, 0.8]
thresholds = [1e-2]
M = 1e6
sigma = "empirical"
paths = 10
seed = 7
"#,
    )
    .unwrap()
}

fn cournot_reproduction(out: &ExperimentOutput) -> Outcome {
    let iters: Vec<Option<usize>> = out.table.iter().map(|r| r.iters).collect();
    let reached = iters.iter().all(Option::is_some) && out.failed.is_empty();
    let ordered = reached && iters.windows(2).all(|w| w[0] > w[1]);
    let shown: Vec<String> = out
        .table
        .iter()
        .map(|r| format!("T({})={}", r.eta, r.iters.map_or("NA".into(), |t| t.to_string())))
        .collect();
    outcome(reached && ordered, format!("{} at threshold 1e-2", shown.join(", ")))
}

fn clarke_chain(out: &ExperimentOutput) -> Outcome {
    let (game, _) = CournotGame::benchmark();
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for (plan, records) in out.plans.iter().zip(&out.records) {
        for rec in records.iter().flatten() {
            let x = game.players().profile(rec.output.clone()).unwrap();
            let lhs = clarke_residual(&game, &x, plan.gamma).unwrap();
            let dev: f64 = (0..game.players().count())
                .map(|i| deviation_bound(game.h_piecewise(i).unwrap(), x.player(i)[0], plan.eta).unwrap().powi(2))
                .sum();
            let smoothed = smoothed_residual(&game, &x, plan.gamma, plan.eta).unwrap().mean_sq;
            worst = worst.max(lhs - 2.0 * dev - 2.0 * smoothed);
            count += 1;
        }
    }
    outcome(
        count == 30 && worst <= 1e-10,
        format!("max dist^2 - (2 sum D^2 + 2 |G_eta|^2) = {worst:.3e} over {count} outputs (slack 1e-10)"),
    )
}

fn sa_rate() -> Outcome {
    let (game, _) = HierGame::benchmark();
    let lower = LowerLevelConfig::default();
    let mu = game.follower_modulus(0);
    let alpha0 = lower.alpha0_for(mu);
    let set = game.follower_set(0);
    let radius_sq = set.max_sq_distance_from(&set.midpoint());
    // Measured constants: sup over Y of |E F(0, y)| and of Var F(0, y, xi).
    let mut s = stream(Purpose::Probe, 8, 0, 0);
    let (mut c_f, mut v_sq) = (0.0f64, 0.0f64);
    let mut out = [0.0];
    for k in 0..=100 {
        let y = set.lower()[0] + (set.upper()[0] - set.lower()[0]) * k as f64 / 100.0;
        let draws = 20_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..draws {
            let xi = game.sample_noise(&mut s);
            game.follower_operator(0, &[0.0], &[y], &xi, &mut out);
            sum += out[0];
            sq += out[0] * out[0];
        }
        let mean = sum / draws as f64;
        c_f = c_f.max(mean.abs());
        v_sq = v_sq.max(sq / draws as f64 - mean * mean);
    }
    let bounds = FollowerBounds { c_f, v_sq };
    let y_star = 175.0;
    let reps = 200;
    let mut log_t = Vec::new();
    let mut log_mse = Vec::new();
    let mut within = true;
    let mut shown = Vec::new();
    for t in [100usize, 1_000, 10_000] {
        let mut mse = 0.0;
        for r in 0..reps {
            let mut s = stream(Purpose::LowerLevel, r, t as u64, 8);
            let y = sa_lower_solve(&game, 0, &[0.0], t, &lower, &mut s).unwrap()[0];
            mse += (y - y_star).powi(2) / reps as f64;
        }
        let bound = sa_error_bound(bounds, mu, alpha0, lower.offset, radius_sq, t).unwrap();
        within &= mse <= bound;
        shown.push(format!("t={t}: {mse:.3e} <= {bound:.3e}"));
        log_t.push((t as f64).ln());
        log_mse.push(mse.ln());
    }
    let slope = least_squares_slope(&log_t, &log_mse);
    outcome(
        within && slope <= -0.8,
        format!("log-log slope {slope:.3} (limit -0.8); {}", shown.join(", ")),
    )
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn follower_bias() -> Outcome {
    let (game, _) = HierGame::benchmark();
    let lower = LowerLevelConfig::default();
    let eta = 0.7;
    let leaders = [2.0, 6.5, 10.0, 14.0, 18.5];
    let draws = 20_000;
    let mut worst = 0.0f64;
    let mut shown = Vec::new();
    for t in [10usize, 100, 1_000] {
        let mut worst_t = 0.0f64;
        for (p, &x) in leaders.iter().enumerate() {
            let mut noise = stream(Purpose::Noise, p as u64, t as u64, 9);
            let mut dirs = stream(Purpose::Direction, p as u64, t as u64, 9);
            let (mut diff, mut err_sq) = (0.0, 0.0);
            let mut v = [0.0];
            for l in 0..draws {
                let xi = game.sample_noise(&mut noise);
                dirs.sphere_into(eta, &mut v);
                let (plus, minus) = ([x + v[0]], [x - v[0]]);
                let mut s = RandomStream::derive(SEED, StreamKey::new(p as u64, t as u64, 0, Purpose::LowerLevel, 2 * l));
                let yp = sa_lower_solve(&game, 0, &plus, t, &lower, &mut s).unwrap();
                let mut s = RandomStream::derive(SEED, StreamKey::new(p as u64, t as u64, 0, Purpose::LowerLevel, 2 * l + 1));
                let ym = sa_lower_solve(&game, 0, &minus, t, &lower, &mut s).unwrap();
                let ep = game.exact_follower(0, &plus).unwrap();
                let em = game.exact_follower(0, &minus).unwrap();
                let scale = 1.0 / (2.0 * eta) * v[0].signum();
                let inexact = scale * (game.h_value(0, &plus, &yp, &xi) - game.h_value(0, &minus, &ym, &xi));
                let exact = scale * (game.h_value(0, &plus, &ep, &xi) - game.h_value(0, &minus, &em, &xi));
                diff += inexact - exact;
                err_sq += 0.5 * ((yp[0] - ep[0]).powi(2) + (ym[0] - em[0]).powi(2));
            }
            let bias = (diff / draws as f64).abs();
            let eps = err_sq / draws as f64;
            let ratio = bias / bias_bound(&game, eta, eps);
            worst_t = worst_t.max(ratio);
        }
        worst = worst.max(worst_t);
        shown.push(format!("t={t}: {worst_t:.3e}"));
    }
    outcome(worst <= 1.0, format!("worst bias / bound {} (limit 1)", shown.join(", ")))
}

fn hier_config() -> ExperimentConfig {
    ExperimentConfig::parse(
        r#"
game = "hier4"
eta_sweep = [0.5, 0.7, 0.9]
thresholds = [1e-1]
M = 1e7
lower_budget = 1.5e8
paths = 10
seed = 7
"#,
    )
    .unwrap()
}

fn hier_reproduction() -> Outcome {
    let out = run_experiment(&hier_config(), &RunOverrides::default()).unwrap();
    let mut decreasing = out.failed.is_empty();
    let mut shown = Vec::new();
    for (plan, records) in out.plans.iter().zip(&out.records) {
        let done: Vec<&RunRecord> = records.iter().flatten().collect();
        let len = done.iter().map(|r| r.trace.len()).min().unwrap_or(0);
        let avg: Vec<f64> = (0..len)
            .map(|j| done.iter().map(|r| r.trace[j].value).sum::<f64>() / done.len() as f64)
            .collect();
        let quarter = (len / 4).max(1);
        let head = avg[..quarter].iter().sum::<f64>() / quarter as f64;
        let tail = avg[len - quarter..].iter().sum::<f64>() / quarter as f64;
        decreasing &= len >= 2 && tail < head && avg[len - 1] < avg[0];
        shown.push(format!("eta={}: {:.3e} -> {:.3e}", plan.eta, avg[0], avg[len - 1]));
    }
    let iters: Vec<Option<usize>> = out.table.iter().map(|r| r.iters).collect();
    let ordered = iters.iter().all(Option::is_some) && iters.windows(2).all(|w| w[0] > w[1]);
    let t: Vec<String> = iters.iter().map(|i| i.map_or("NA".into(), |v| v.to_string())).collect();
    outcome(
        decreasing && ordered,
        format!("{}; iterations to 1e-1: {}", shown.join(", "), t.join(" > ")),
    )
}

fn determinism(first: &ExperimentOutput) -> Outcome {
    let cfg = cournot_config();
    let again = run_experiment(&cfg, &RunOverrides::default()).unwrap();
    let serial = run_experiment(
        &cfg,
        &RunOverrides {
            jobs: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let wide = run_experiment(
        &cfg,
        &RunOverrides {
            jobs: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    let same = [&again, &serial, &wide]
        .iter()
        .all(|o| o.trace_csv == first.trace_csv && o.table_csv == first.table_csv);
    outcome(
        same,
        format!("trace.csv {} bytes, table.csv {} bytes, identical across reruns and 1/4 jobs", first.trace_csv.len(), first.table_csv.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let timed = |name: &'static str, f: &mut dyn FnMut() -> Outcome, results: &mut Vec<(&str, Outcome, f64)>| {
        let start = Instant::now();
        let o = f();
        results.push((name, o, start.elapsed().as_secs_f64()));
    };

    let start = Instant::now();
    let (c1, c2) = estimator_criteria();
    let shared = start.elapsed().as_secs_f64();
    results.push(("1 two-point estimator unbiased", c1, shared));
    results.push(("2 two-point second moment bound", c2, shared));
    timed("3 smoothing value and gradient bounds", &mut smoothing_bounds, &mut results);
    timed("4 potential identities", &mut potential_identities, &mut results);
    timed("5 noiseless RSG descent", &mut noiseless_descent, &mut results);

    let start = Instant::now();
    let cournot = run_experiment(&cournot_config(), &RunOverrides::default()).unwrap();
    let run_time = start.elapsed().as_secs_f64();
    results.push(("6 cournot6 iteration ordering", cournot_reproduction(&cournot), run_time));
    timed("7 Clarke residual chain", &mut || clarke_chain(&cournot), &mut results);
    timed("8 SA rate and error bound", &mut sa_rate, &mut results);
    timed("9 inexact follower bias bound", &mut follower_bias, &mut results);
    timed("10 hier4 residual and ordering", &mut hier_reproduction, &mut results);
    timed("11 byte-identical reruns", &mut || determinism(&cournot), &mut results);

    let mut ok = true;
    for (name, o, secs) in &results {
        ok &= o.passed;
        println!(
            "{} criterion {:<40} {:>7.1}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            name,
            secs,
            o.detail
        );
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
