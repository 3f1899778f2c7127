use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Benchmark games known to the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GameName {
    /// Six-firm Cournot game with a kinked production function.
    Cournot6,
    /// The same game with linear production; smooth.
    Cournot6Smooth,
    /// Four-leader hierarchical game.
    Hier4,
}

impl GameName {
    pub const ALL: [GameName; 3] = [GameName::Cournot6, GameName::Cournot6Smooth, GameName::Hier4];

    pub fn as_str(self) -> &'static str {
        match self {
            GameName::Cournot6 => "cournot6",
            GameName::Cournot6Smooth => "cournot6-smooth",
            GameName::Hier4 => "hier4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            GameName::Cournot6 => "6-player stochastic Cournot game, cost c_i(xi) min(x, x/2 + 2); solver rs-rsg",
            GameName::Cournot6Smooth => "6-player stochastic Cournot game with linear cost; solver rsg",
            GameName::Hier4 => "4-leader hierarchical Cournot game with SA followers; solver b-rs-rsg",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == name).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|g| g.as_str()).collect();
            Error::field("game", format!("unknown game `{name}`; known games: {}", known.join(", ")))
        })
    }

    /// The solver this game is run with.
    pub fn solver(self) -> SolverName {
        match self {
            GameName::Cournot6 => SolverName::RsRsg,
            GameName::Cournot6Smooth => SolverName::Rsg,
            GameName::Hier4 => SolverName::BRsRsg,
        }
    }

    fn default_x0(self) -> f64 {
        match self {
            GameName::Cournot6 | GameName::Cournot6Smooth => 12.0,
            GameName::Hier4 => 19.0,
        }
    }

    fn default_etas(self) -> Vec<f64> {
        match self {
            GameName::Cournot6 => vec![0.3, 0.5, 0.8],
            // RSG does not smooth; the single entry only labels the rows.
            GameName::Cournot6Smooth => vec![1.0],
            GameName::Hier4 => vec![0.5, 0.7, 0.9],
        }
    }

    fn default_thresholds(self) -> Vec<f64> {
        match self {
            GameName::Cournot6 | GameName::Cournot6Smooth => vec![1e-2, 7.5e-3, 5e-3, 2.5e-3, 1e-3],
            GameName::Hier4 => vec![1e-1, 7.5e-2, 5e-2, 2.5e-2, 1e-2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverName {
    Rsg,
    RsRsg,
    BRsRsg,
}

impl SolverName {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverName::Rsg => "rsg",
            SolverName::RsRsg => "rs-rsg",
            SolverName::BRsRsg => "b-rs-rsg",
        }
    }

    fn parse(name: &str) -> Result<Self> {
        [SolverName::Rsg, SolverName::RsRsg, SolverName::BRsRsg]
            .into_iter()
            .find(|s| s.as_str() == name)
            .ok_or_else(|| Error::field("solver", format!("unknown solver `{name}`; expected rsg, rs-rsg or b-rs-rsg")))
    }
}

/// A constant that is either computed by a named rule or given as a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawChoice {
    Value(f64),
    Named(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SigmaChoice {
    /// The second-moment constant from the Lipschitz constants.
    Analytic,
    /// Measured at probe points.
    Empirical,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LipschitzChoice {
    Analytic,
    Numeric,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutputChoice {
    Uniform,
    Weighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawPoint {
    Fill(f64),
    Full(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    game: String,
    solver: Option<String>,
    eta_sweep: Option<Vec<f64>>,
    thresholds: Option<Vec<f64>>,
    #[serde(alias = "M")]
    budget: Option<f64>,
    lower_budget: Option<f64>,
    iterations: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    residual_eval_every: Option<usize>,
    batch: Option<usize>,
    sigma: Option<RawChoice>,
    sigma_probes: Option<usize>,
    sigma_draws: Option<usize>,
    lipschitz: Option<RawChoice>,
    x0: Option<RawPoint>,
    step: Option<f64>,
    output_rule: Option<String>,
    delta: Option<f64>,
    alpha0: Option<f64>,
    gamma_offset: Option<f64>,
    inner_iterations: Option<usize>,
    grid_points: Option<usize>,
}

/// Fully resolved experiment configuration. Every default is filled in, so the
/// serialized form records exactly what was run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub game: GameName,
    pub solver: SolverName,
    pub eta_sweep: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Upper-level budget `M`.
    pub budget: Option<u64>,
    pub lower_budget: Option<u64>,
    pub iterations: Option<usize>,
    pub paths: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Residual evaluation stride; `max(1, T / 500)` when absent.
    pub residual_eval_every: Option<usize>,
    pub batch: Option<usize>,
    pub sigma: SigmaChoice,
    pub sigma_probes: usize,
    pub sigma_draws: usize,
    pub lipschitz: LipschitzChoice,
    pub x0: Vec<f64>,
    pub step: Option<f64>,
    pub output_rule: OutputChoice,
    pub delta: f64,
    pub alpha0: Option<f64>,
    pub gamma_offset: f64,
    pub inner_iterations: Option<usize>,
    pub grid_points: usize,
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::field(field, format!("must be a positive number, got {v}")))
    }
}

fn count(field: &str, v: f64) -> Result<u64> {
    let v = positive(field, v)?;
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(Error::field(field, format!("must be a whole number, got {v}")));
    }
    Ok(v as u64)
}

impl ExperimentConfig {
    /// Parses and validates a config file's contents.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        Self::resolve(raw)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let game = GameName::parse(&raw.game)?;
        let solver = match raw.solver {
            Some(s) => SolverName::parse(&s)?,
            None => game.solver(),
        };
        if solver != game.solver() {
            return Err(Error::field(
                "solver",
                format!("game `{}` is run with `{}`, not `{}`", game.as_str(), game.solver().as_str(), solver.as_str()),
            ));
        }
        let eta_sweep = raw.eta_sweep.unwrap_or_else(|| game.default_etas());
        if eta_sweep.is_empty() {
            return Err(Error::field("eta_sweep", "must list at least one radius"));
        }
        for e in &eta_sweep {
            positive("eta_sweep", *e)?;
        }
        let thresholds = raw.thresholds.unwrap_or_else(|| game.default_thresholds());
        for t in &thresholds {
            positive("thresholds", *t)?;
        }
        if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::field("thresholds", "must be a non-empty strictly decreasing list"));
        }
        let budget = raw.budget.map(|m| count("budget", m)).transpose()?;
        let lower_budget = raw.lower_budget.map(|m| count("lower_budget", m)).transpose()?;
        if budget.is_none() && raw.iterations.is_none() {
            return Err(Error::field("budget", "set `budget` (M) or `iterations`"));
        }
        if raw.iterations == Some(0) {
            return Err(Error::field("iterations", "must be positive"));
        }
        if raw.batch.is_none() && budget.is_none() {
            return Err(Error::field("batch", "set `batch` when no budget is given"));
        }
        let paths = raw.paths.unwrap_or(10);
        if paths == 0 {
            return Err(Error::field("paths", "must be positive"));
        }
        if raw.batch == Some(0) {
            return Err(Error::field("batch", "must be positive"));
        }
        if raw.residual_eval_every == Some(0) {
            return Err(Error::field("residual_eval_every", "must be positive"));
        }
        let sigma = match raw.sigma {
            None => match solver {
                SolverName::Rsg => SigmaChoice::Empirical,
                _ => SigmaChoice::Analytic,
            },
            Some(RawChoice::Value(v)) => {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::field("sigma", "must be nonnegative"));
                }
                SigmaChoice::Value(v)
            }
            Some(RawChoice::Named(s)) => match s.as_str() {
                "analytic" if solver == SolverName::Rsg => {
                    return Err(Error::field("sigma", "no analytic constant for rsg; use `empirical` or a number"))
                }
                "analytic" => SigmaChoice::Analytic,
                "empirical" if solver == SolverName::BRsRsg => {
                    return Err(Error::field("sigma", "`empirical` is not supported for b-rs-rsg"))
                }
                "empirical" => SigmaChoice::Empirical,
                other => return Err(Error::field("sigma", format!("expected analytic, empirical or a number, got `{other}`"))),
            },
        };
        let lipschitz = match raw.lipschitz {
            None => LipschitzChoice::Analytic,
            Some(RawChoice::Value(v)) => LipschitzChoice::Value(positive("lipschitz", v)?),
            Some(RawChoice::Named(s)) => match s.as_str() {
                "analytic" => LipschitzChoice::Analytic,
                "numeric" if solver == SolverName::Rsg => {
                    return Err(Error::field("lipschitz", "`numeric` applies to smoothed games only"))
                }
                "numeric" => LipschitzChoice::Numeric,
                other => {
                    return Err(Error::field("lipschitz", format!("expected analytic, numeric or a number, got `{other}`")))
                }
            },
        };
        let players = match game {
            GameName::Hier4 => 4,
            _ => 6,
        };
        let x0 = match raw.x0 {
            None => vec![game.default_x0(); players],
            Some(RawPoint::Fill(v)) => vec![v; players],
            Some(RawPoint::Full(v)) => {
                if v.len() != players {
                    return Err(Error::field("x0", format!("expected {players} entries, got {}", v.len())));
                }
                v
            }
        };
        let output_rule = match raw.output_rule.as_deref() {
            None | Some("uniform") => OutputChoice::Uniform,
            Some("weighted") => OutputChoice::Weighted,
            Some(other) => return Err(Error::field("output_rule", format!("expected uniform or weighted, got `{other}`"))),
        };
        if let Some(s) = raw.step {
            positive("step", s)?;
        }
        if let Some(a) = raw.alpha0 {
            positive("alpha0", a)?;
        }
        if raw.inner_iterations == Some(0) {
            return Err(Error::field("inner_iterations", "must be positive"));
        }
        let grid_points = raw.grid_points.unwrap_or(9);
        if grid_points < 2 {
            return Err(Error::field("grid_points", "must be at least 2"));
        }
        Ok(Self {
            game,
            solver,
            eta_sweep,
            thresholds,
            budget,
            lower_budget,
            iterations: raw.iterations,
            paths,
            seed: raw.seed.unwrap_or(1),
            output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
            residual_eval_every: raw.residual_eval_every,
            batch: raw.batch,
            sigma,
            sigma_probes: raw.sigma_probes.unwrap_or(16).max(1),
            sigma_draws: raw.sigma_draws.unwrap_or(4_000).max(1),
            lipschitz,
            x0,
            step: raw.step,
            output_rule,
            delta: positive("delta", raw.delta.unwrap_or(0.1))?,
            alpha0: raw.alpha0,
            gamma_offset: positive("gamma_offset", raw.gamma_offset.unwrap_or(1.0))?,
            inner_iterations: raw.inner_iterations,
            grid_points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(
            "game = \"cournot6\"\nsolver = \"rs-rsg\"\neta_sweep = [0.5]\nM = 1e6\nseed = 42\npaths = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.budget, Some(1_000_000));
        assert_eq!(cfg.x0, vec![12.0; 6]);
        assert_eq!(cfg.sigma, SigmaChoice::Analytic);
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.paths, 2);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::parse("game = \"cournot6\"\nM = 1e6\npaths = 0\n").unwrap_err();
        assert!(matches!(err, Error::ConfigField { ref field, .. } if field == "paths"));
        let err = ExperimentConfig::parse("game = \"tetris\"\nM = 1\n").unwrap_err();
        assert!(err.to_string().contains("cournot6"));
        let err = ExperimentConfig::parse("game = \"hier4\"\nsolver = \"rsg\"\nM = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigField { ref field, .. } if field == "solver"));
        let err = ExperimentConfig::parse("game = \"hier4\"\nM = 1\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse(_)));
        for list in ["[1e-2, 1e-1]", "[1e-2, 1e-2]", "[]"] {
            let err = ExperimentConfig::parse(&format!("game = \"cournot6\"\nM = 1e6\nthresholds = {list}\n")).unwrap_err();
            assert!(matches!(err, Error::ConfigField { ref field, .. } if field == "thresholds"), "{list}");
        }
        let err = ExperimentConfig::parse("game = \"hier4\"\nM = -5\n").unwrap_err();
        assert!(matches!(err, Error::ConfigField { ref field, .. } if field == "budget"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ExperimentConfig::parse("game = \"hier4\"\nM = = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn numeric_choices() {
        let cfg = ExperimentConfig::parse("game = \"cournot6\"\nM = 100\nsigma = 0.7\nlipschitz = \"numeric\"\nx0 = 3.0\n").unwrap();
        assert_eq!(cfg.sigma, SigmaChoice::Value(0.7));
        assert_eq!(cfg.lipschitz, LipschitzChoice::Numeric);
        assert_eq!(cfg.x0, vec![3.0; 6]);
    }
}
