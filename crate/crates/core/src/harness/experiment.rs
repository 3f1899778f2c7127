use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, GameName, LipschitzChoice, OutputChoice, SigmaChoice};
use crate::error::{Error, Result};
use crate::games::cournot::CournotGame;
use crate::games::hierarchical::HierGame;
use crate::games::{estimate_potential_bounds, ExactFollower, NonsmoothGame, Potential, SmoothGame};
use crate::metrics::{smoothed_residual, vi_residual, GradientSource};
use crate::rng::{Purpose, RandomStream, StreamKey};
use crate::sets::StrategyProfile;
use crate::solvers::{
    b_rs_rsg_run, batch_size_from_budget, empirical_sigma, estimate_smoothness, rs_rsg_run, rsg_run,
    sigma_hierarchical, sigma_nonsmooth, Budget, BatchRule, FollowerMode, InnerSchedule, LowerLevelConfig, OutputRule,
    RunRecord, SmoothnessMethod, SolverConfig, StepRule, StopRule,
};

pub const TRACE_HEADER: &str = "eta,path,k,zo_samples,fo_samples,ll_samples,residual_sq";
pub const TABLE_HEADER: &str = "eta,threshold,iters,zo_samples,fo_samples,ll_samples";

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// Constants resolved for one smoothing radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaPlan {
    pub eta: f64,
    pub lipschitz: f64,
    pub d: f64,
    pub potential_max: f64,
    pub potential_min: f64,
    pub sigma: f64,
    pub batch: usize,
    pub iterations: usize,
    pub gamma: f64,
    pub residual_stride: usize,
}

/// One row of the threshold table. Missing values mean the averaged residual never
/// reached the threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub eta: f64,
    pub threshold: f64,
    pub iters: Option<usize>,
    pub zo_samples: Option<u64>,
    pub fo_samples: Option<u64>,
    pub ll_samples: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailedPath {
    pub eta: f64,
    pub path: usize,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub plans: Vec<EtaPlan>,
    pub table: Vec<TableRow>,
    pub failed: Vec<FailedPath>,
    #[serde(skip)]
    pub trace_csv: String,
    #[serde(skip)]
    pub table_csv: String,
    #[serde(skip)]
    pub records: Vec<Vec<Option<RunRecord>>>,
}

impl ExperimentOutput {
    pub fn metadata_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }

    /// Writes `trace.csv`, `table.csv` and `metadata.json` into `dir`.
    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), &self.trace_csv)?;
        std::fs::write(dir.join("table.csv"), &self.table_csv)?;
        std::fs::write(dir.join("metadata.json"), self.metadata_json())?;
        Ok(())
    }
}

/// Float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn probe_points(players: &crate::games::Players, x0: &[f64], count: usize, seed: u64) -> Result<Vec<StrategyProfile>> {
    let mut s = RandomStream::derive(seed, StreamKey::new(0, 0, 0, Purpose::Probe, 7));
    let set = players.joint();
    let mut out = vec![players.profile(x0.to_vec())?];
    for _ in 1..count {
        let v = set.lower().iter().zip(set.upper()).map(|(l, u)| s.uniform(*l, *u)).collect();
        out.push(players.profile(v)?);
    }
    Ok(out)
}

/// Horizon implied by the budgets when no iteration count is set.
fn horizon(cfg: &ExperimentConfig, players: usize, batch: usize, lower: Option<&InnerSchedule>) -> Result<usize> {
    if let Some(t) = cfg.iterations {
        return Ok(t);
    }
    let m = cfg.budget.expect("validated: budget or iterations");
    let per = (players * batch) as u64;
    let mut t = (m / per) as usize;
    if let (Some(lb), Some(schedule)) = (cfg.lower_budget, lower) {
        let mut used = 0u64;
        for k in 0..t {
            used += 2 * per * schedule.steps(k) as u64;
            if used > lb {
                t = k;
                break;
            }
        }
    }
    if t == 0 {
        return Err(Error::BudgetTooSmall(format!("budget does not cover one iteration with batch size {batch}")));
    }
    Ok(t)
}

fn base_solver_config(cfg: &ExperimentConfig, eta: f64, gamma: f64, batch: usize, iterations: usize, stride: usize, seed: u64) -> SolverConfig {
    let mut budget = cfg.budget.map(Budget::upper).unwrap_or_default();
    if let Some(lb) = cfg.lower_budget {
        budget = budget.with_lower(lb);
    }
    SolverConfig {
        eta,
        step: StepRule::Constant(gamma),
        batch: BatchRule::Constant(batch),
        iterations: Some(iterations),
        budget,
        output: match cfg.output_rule {
            OutputChoice::Uniform => OutputRule::Uniform,
            OutputChoice::Weighted => OutputRule::Weighted { lipschitz: 0.5 / gamma },
        },
        lower: lower_config(cfg),
        x0: Some(cfg.x0.clone()),
        seed,
        stop: StopRule::Horizon,
        lipschitz: None,
        update_order: None,
        trace_stride: stride,
        snapshot_stride: None,
    }
}

fn lower_config(cfg: &ExperimentConfig) -> LowerLevelConfig {
    LowerLevelConfig {
        alpha0: cfg.alpha0,
        offset: cfg.gamma_offset,
        schedule: match cfg.inner_iterations {
            Some(t) => InnerSchedule::Constant(t),
            None => InnerSchedule::Power { delta: cfg.delta },
        },
    }
}

fn stride_for(cfg: &ExperimentConfig, iterations: usize) -> usize {
    cfg.residual_eval_every.unwrap_or((iterations / 500).max(1))
}

/// Resolves `L`, `D`, `sigma`, `S`, `T` and `gamma` for a nonsmooth (or reduced
/// hierarchical) game.
fn plan_nonsmooth<G: NonsmoothGame, P: Potential>(
    cfg: &ExperimentConfig,
    game: &G,
    potential: &P,
    eta: f64,
    analytic_sigma: impl Fn() -> Result<f64>,
    lower: Option<&InnerSchedule>,
    seed: u64,
) -> Result<EtaPlan> {
    let players = game.players();
    let probes = probe_points(players, &cfg.x0, cfg.sigma_probes, seed)?;
    let method = match cfg.lipschitz {
        LipschitzChoice::Analytic => SmoothnessMethod::Analytic,
        LipschitzChoice::Numeric => SmoothnessMethod::Numeric {
            probes: probes.iter().map(|p| p.values().to_vec()).collect(),
            fd_step: 1e-3,
        },
        LipschitzChoice::Value(l) => SmoothnessMethod::Fixed(l),
    };
    let est = estimate_smoothness(game, potential, eta, method, cfg.grid_points)?;
    let sigma = match cfg.sigma {
        SigmaChoice::Analytic => analytic_sigma()?,
        SigmaChoice::Empirical => empirical_sigma(game, eta, &probes, cfg.sigma_draws, seed)?,
        SigmaChoice::Value(v) => v,
    };
    let batch = match (cfg.batch, cfg.budget) {
        (Some(b), _) => b,
        (None, Some(m)) => batch_size_from_budget(m as f64, sigma, est.lipschitz, est.d)?,
        (None, None) => unreachable!("validated: batch or budget"),
    };
    let iterations = horizon(cfg, players.count(), batch, lower)?;
    Ok(EtaPlan {
        eta,
        lipschitz: est.lipschitz,
        d: est.d,
        potential_max: est.bounds.max,
        potential_min: est.bounds.min,
        sigma,
        batch,
        iterations,
        gamma: cfg.step.unwrap_or(0.5 / est.lipschitz),
        residual_stride: stride_for(cfg, iterations),
    })
}

fn plan_smooth<G: SmoothGame, P: Potential>(cfg: &ExperimentConfig, game: &G, potential: &P, lipschitz: f64, seed: u64) -> Result<EtaPlan> {
    let players = game.players();
    let lipschitz = match cfg.lipschitz {
        LipschitzChoice::Value(l) => l,
        _ => lipschitz,
    };
    let bounds = estimate_potential_bounds(potential, players.joint(), cfg.grid_points)?;
    let d = (bounds.range() / lipschitz).sqrt();
    let sigma = match cfg.sigma {
        SigmaChoice::Value(v) => v,
        _ => {
            let probes = probe_points(players, &cfg.x0, cfg.sigma_probes, seed)?;
            let mut worst = 0.0f64;
            let mut draw = vec![0.0; players.max_dim()];
            let mut exact = vec![0.0; players.max_dim()];
            for (p, x) in probes.iter().enumerate() {
                for i in 0..players.count() {
                    let n = players.dim(i);
                    if !game.exact_grad(i, x, &mut exact[..n]) {
                        return Err(Error::MissingOracle("exact gradient"));
                    }
                    let mut s = RandomStream::derive(seed, StreamKey::new(p as u64, 0, i as u64, Purpose::Probe, 3));
                    let mut total = 0.0;
                    for _ in 0..cfg.sigma_draws {
                        game.sample_grad(i, x, &mut s, &mut draw[..n]);
                        total += draw[..n].iter().zip(&exact[..n]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                    }
                    worst = worst.max(total / cfg.sigma_draws as f64);
                }
            }
            worst.sqrt()
        }
    };
    let batch = match (cfg.batch, cfg.budget) {
        (Some(b), _) => b,
        (None, Some(m)) => batch_size_from_budget(m as f64, sigma, lipschitz, d)?,
        (None, None) => unreachable!("validated: batch or budget"),
    };
    let iterations = horizon(cfg, players.count(), batch, None)?;
    Ok(EtaPlan {
        eta: 0.0,
        lipschitz,
        d,
        potential_max: bounds.max,
        potential_min: bounds.min,
        sigma,
        batch,
        iterations,
        gamma: cfg.step.unwrap_or(0.5 / lipschitz),
        residual_stride: stride_for(cfg, iterations),
    })
}

type PathResult = std::result::Result<RunRecord, String>;

fn run_paths(paths: usize, jobs: usize, f: impl Fn(usize) -> Result<RunRecord> + Sync) -> Result<Vec<PathResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    Ok(pool.install(|| {
        (0..paths)
            .into_par_iter()
            .map(|p| f(p).map_err(|e| e.to_string()))
            .collect()
    }))
}

/// Runs every smoothing radius of the sweep over all paths and builds the trace and
/// threshold tables. Paths run in parallel on at most `jobs` threads; results are merged
/// in path order, so the output does not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig, overrides: &RunOverrides) -> Result<ExperimentOutput> {
    let mut cfg = config.clone();
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(p) = overrides.paths {
        if p == 0 {
            return Err(Error::field("paths", "must be positive"));
        }
        cfg.paths = p;
    }
    if let Some(d) = &overrides.out_dir {
        cfg.output = d.clone();
    }
    let jobs = overrides.jobs.unwrap_or_else(rayon::current_num_threads).max(1);

    let mut plans = Vec::new();
    let mut all_records = Vec::new();
    let mut failed = Vec::new();
    for &eta in &cfg.eta_sweep {
        let (plan, results) = match cfg.game {
            GameName::Cournot6 => {
                let (game, potential) = CournotGame::benchmark();
                let plan = plan_nonsmooth(&cfg, &game, &potential, eta, || sigma_nonsmooth(&game), None, cfg.seed)?;
                let solver_cfg = base_solver_config(&cfg, eta, plan.gamma, plan.batch, plan.iterations, plan.residual_stride, cfg.seed);
                let metric = |x: &StrategyProfile| smoothed_residual(&game, x, plan.gamma, eta).map(|r| r.mean_sq).unwrap_or(f64::NAN);
                let results = run_paths(cfg.paths, jobs, |p| rs_rsg_run(&game, &solver_cfg, p as u64, Some(&metric)))?;
                (plan, results)
            }
            GameName::Cournot6Smooth => {
                let (game, potential) = CournotGame::smooth();
                let l = game.coupling_smoothness().expect("cournot smoothness is known");
                let plan = plan_smooth(&cfg, &game, &potential, l, cfg.seed)?;
                let solver_cfg = base_solver_config(&cfg, 1.0, plan.gamma, plan.batch, plan.iterations, plan.residual_stride, cfg.seed);
                let metric = |x: &StrategyProfile| {
                    vi_residual(&game, x, plan.gamma, GradientSource::Exact).map(|r| r.mean_sq).unwrap_or(f64::NAN)
                };
                let results = run_paths(cfg.paths, jobs, |p| rsg_run(&game, &solver_cfg, p as u64, Some(&metric)))?;
                (EtaPlan { eta, ..plan }, results)
            }
            GameName::Hier4 => {
                let (game, potential) = HierGame::benchmark();
                let reduced = ExactFollower::new(&game)?;
                let lower = lower_config(&cfg);
                let plan = plan_nonsmooth(
                    &cfg,
                    &reduced,
                    &potential,
                    eta,
                    || sigma_hierarchical(&game, eta, &lower),
                    Some(&lower.schedule),
                    cfg.seed,
                )?;
                let solver_cfg = base_solver_config(&cfg, eta, plan.gamma, plan.batch, plan.iterations, plan.residual_stride, cfg.seed);
                let metric = |x: &StrategyProfile| smoothed_residual(&reduced, x, plan.gamma, eta).map(|r| r.mean_sq).unwrap_or(f64::NAN);
                let results = run_paths(cfg.paths, jobs, |p| {
                    b_rs_rsg_run(&game, &solver_cfg, FollowerMode::Stochastic, p as u64, Some(&metric))
                })?;
                (plan, results)
            }
        };
        let mut records = Vec::with_capacity(results.len());
        for (p, r) in results.into_iter().enumerate() {
            match r {
                Ok(rec) => records.push(Some(rec)),
                Err(error) => {
                    failed.push(FailedPath { eta, path: p, error });
                    records.push(None);
                }
            }
        }
        plans.push(plan);
        all_records.push(records);
    }

    let mut trace_csv = String::from(TRACE_HEADER);
    trace_csv.push('\n');
    for (plan, records) in plans.iter().zip(&all_records) {
        for (p, rec) in records.iter().enumerate() {
            let Some(rec) = rec else { continue };
            for t in &rec.trace {
                writeln!(
                    trace_csv,
                    "{},{},{},{},{},{},{}",
                    fmt_float(plan.eta),
                    p,
                    t.k,
                    t.samples.zeroth,
                    t.samples.first,
                    t.samples.lower,
                    fmt_float(t.value)
                )
                .unwrap();
            }
        }
    }

    let mut table = Vec::new();
    for (plan, records) in plans.iter().zip(&all_records) {
        let done: Vec<&RunRecord> = records.iter().flatten().collect();
        let len = done.iter().map(|r| r.trace.len()).min().unwrap_or(0);
        let averaged: Vec<f64> = (0..len)
            .map(|j| done.iter().map(|r| r.trace[j].value).sum::<f64>() / done.len() as f64)
            .collect();
        for &threshold in &cfg.thresholds {
            let hit = averaged.iter().position(|v| *v <= threshold);
            let point = hit.map(|j| &done[0].trace[j]);
            table.push(TableRow {
                eta: plan.eta,
                threshold,
                iters: point.map(|t| t.k),
                zo_samples: point.map(|t| t.samples.zeroth),
                fo_samples: point.map(|t| t.samples.first),
                ll_samples: point.map(|t| t.samples.lower),
            });
        }
    }
    let mut table_csv = String::from(TABLE_HEADER);
    table_csv.push('\n');
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
    for row in &table {
        writeln!(
            table_csv,
            "{},{},{},{},{},{}",
            fmt_float(row.eta),
            fmt_float(row.threshold),
            opt(row.iters.map(|k| k as u64)),
            opt(row.zo_samples),
            opt(row.fo_samples),
            opt(row.ll_samples)
        )
        .unwrap();
    }

    Ok(ExperimentOutput {
        config: cfg,
        plans,
        table,
        failed,
        trace_csv,
        table_csv,
        records: all_records,
    })
}
