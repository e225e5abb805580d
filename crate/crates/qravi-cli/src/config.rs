//! Run configuration: a flat, namespaced `key=value` surface shared by
//! config files and command-line overrides.
//!
//! Every tunable lives under one of five namespaces — `agent.*`, `env.*`,
//! `risk.*`, `net.*`, `kde.*` — plus `out.dir` and `run.id` for output
//! routing. The same key table drives file parsing, `--section.key value`
//! overrides, and the resolved echo written next to every run's outputs, so
//! the three can never drift apart. Precedence, lowest to highest: built-in
//! defaults, the `--scale` preset, the config file, then individual
//! command-line overrides.
//!
//! The resolved echo is re-parseable: feeding `config_resolved.txt` back in
//! as `--config` reproduces the exact same configuration (floats round-trip
//! through the shortest-representation formatter).

use qravi::agent::{AgentConfig, Variant};
use qravi::env::EnvConfig;
use qravi::risk::{BandwidthRule, QrNorm};
use qravi::{Error, Result};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Environment variable naming the default output root (fallback: `runs`).
pub const OUT_ROOT_ENV: &str = "QRAVI_OUT";

/// Workload preset selected by `--scale`: the desk-sized default or the
/// full-length configuration from the training hyperparameter table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 2e4 environment steps, horizon 200, 5e4 replay slots, 1e4-step
    /// exploration decay. Minutes on a laptop.
    Smoke,
    /// 1e6 environment steps, horizon 1000, 5e5 replay slots, 5e5-step
    /// exploration decay.
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::invalid(format!(
                "unknown scale `{other}` (expected smoke or paper)"
            ))),
        }
    }
}

/// The complete, validated description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentConfig,
    pub env: EnvConfig,
    /// Output root; run artifacts land in `<out_dir>/<run_id>/`.
    pub out_dir: PathBuf,
    /// Run directory name. Empty until [`RunConfig::finalize`], which
    /// derives `<variant>_s<seed>` when the operator did not choose one.
    pub run_id: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let out_dir =
            PathBuf::from(std::env::var(OUT_ROOT_ENV).unwrap_or_else(|_| "runs".to_string()));
        RunConfig {
            agent: AgentConfig::default(),
            env: EnvConfig::default(),
            out_dir,
            run_id: String::new(),
        }
    }
}

/// Every key the configuration surface accepts, sorted. The unit tests
/// assert this list, [`RunConfig::set`], and [`RunConfig::resolved`] agree.
pub const KEYS: &[&str] = &[
    "agent.alpha",
    "agent.batch",
    "agent.buffer_capacity",
    "agent.checkpoint_every",
    "agent.eps0",
    "agent.eps_decay_steps",
    "agent.eps_t",
    "agent.eta",
    "agent.gamma",
    "agent.kappa",
    "agent.n_tau",
    "agent.qr_norm",
    "agent.risk_shaped_targets",
    "agent.seed",
    "agent.target_freq",
    "agent.total_env_steps",
    "agent.train_freq",
    "agent.variant",
    "env.goal_bonus",
    "env.goal_radius",
    "env.half_axle",
    "env.hazard_radius",
    "env.horizon",
    "env.lidar_bins",
    "env.lidar_range",
    "env.n_hazards",
    "env.n_obstacles",
    "env.obstacle_half_width",
    "env.pose_noise_sigma",
    "env.robot_radius",
    "env.seed",
    "env.step_penalty",
    "env.wheel_radius",
    "kde.bandwidth",
    "kde.grid_size",
    "net.hidden1",
    "net.hidden2",
    "out.dir",
    "risk.beta",
    "risk.c_max",
    "risk.lambda",
    "run.id",
];

fn parse_as<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("key `{key}` expects {what}, got `{value}`")))
}

fn parse_qr_norm(value: &str) -> Result<QrNorm> {
    match value {
        "pair_mean" => Ok(QrNorm::PairMean),
        "target_sum" => Ok(QrNorm::TargetSum),
        other => Err(Error::invalid(format!(
            "key `agent.qr_norm` expects pair_mean or target_sum, got `{other}`"
        ))),
    }
}

fn parse_bandwidth(value: &str) -> Result<BandwidthRule> {
    if let Some(h) = value.strip_prefix("fixed:") {
        let h: f64 = parse_as("kde.bandwidth", h, "a number after `fixed:`")?;
        return Ok(BandwidthRule::Fixed(h));
    }
    match value {
        "scott" => Ok(BandwidthRule::Scott),
        "count_pow" => Ok(BandwidthRule::CountPow),
        other => Err(Error::invalid(format!(
            "key `kde.bandwidth` expects scott, count_pow, or fixed:<h>, got `{other}`"
        ))),
    }
}

fn bandwidth_str(rule: BandwidthRule) -> String {
    match rule {
        BandwidthRule::Scott => "scott".to_string(),
        BandwidthRule::CountPow => "count_pow".to_string(),
        BandwidthRule::Fixed(h) => format!("fixed:{h}"),
    }
}

impl RunConfig {
    /// Apply the `--scale` preset. Presets touch only the four
    /// workload-sized fields; everything else keeps its current value.
    pub fn apply_scale(&mut self, scale: Scale) {
        match scale {
            Scale::Smoke => {
                self.agent.total_env_steps = 20_000;
                self.agent.buffer_capacity = 50_000;
                self.agent.eps_decay_steps = 10_000;
                self.env.horizon = 200;
            }
            Scale::Paper => {
                self.agent.total_env_steps = 1_000_000;
                self.agent.buffer_capacity = 500_000;
                self.agent.eps_decay_steps = 500_000;
                self.env.horizon = 1000;
            }
        }
    }

    /// Set one key. Unknown keys and malformed values are errors naming the
    /// key, so callers can prepend file/line context.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "agent.alpha" => self.agent.alpha = parse_as(key, value, "a number")?,
            "agent.batch" => self.agent.batch = parse_as(key, value, "an integer")?,
            "agent.buffer_capacity" => {
                self.agent.buffer_capacity = parse_as(key, value, "an integer")?
            }
            "agent.checkpoint_every" => {
                self.agent.checkpoint_every = parse_as(key, value, "an integer")?
            }
            "agent.eps0" => self.agent.eps0 = parse_as(key, value, "a number")?,
            "agent.eps_decay_steps" => {
                self.agent.eps_decay_steps = parse_as(key, value, "an integer")?
            }
            "agent.eps_t" => self.agent.eps_t = parse_as(key, value, "a number")?,
            "agent.eta" => self.agent.eta = parse_as(key, value, "a number")?,
            "agent.gamma" => self.agent.gamma = parse_as(key, value, "a number")?,
            "agent.kappa" => self.agent.kappa = parse_as(key, value, "a number")?,
            "agent.n_tau" => self.agent.n_tau = parse_as(key, value, "an integer")?,
            "agent.qr_norm" => self.agent.qr_norm = parse_qr_norm(value)?,
            "agent.risk_shaped_targets" => {
                self.agent.risk_shaped_targets = parse_as(key, value, "true or false")?
            }
            "agent.seed" => self.agent.seed = parse_as(key, value, "an integer")?,
            "agent.target_freq" => self.agent.target_freq = parse_as(key, value, "an integer")?,
            "agent.total_env_steps" => {
                self.agent.total_env_steps = parse_as(key, value, "an integer")?
            }
            "agent.train_freq" => self.agent.train_freq = parse_as(key, value, "an integer")?,
            "agent.variant" => self.agent.variant = value.parse::<Variant>()?,
            "env.goal_bonus" => self.env.goal_bonus = parse_as(key, value, "a number")?,
            "env.goal_radius" => self.env.goal_radius = parse_as(key, value, "a number")?,
            "env.half_axle" => self.env.half_axle = parse_as(key, value, "a number")?,
            "env.hazard_radius" => self.env.hazard_radius = parse_as(key, value, "a number")?,
            "env.horizon" => self.env.horizon = parse_as(key, value, "an integer")?,
            "env.lidar_bins" => self.env.lidar_bins = parse_as(key, value, "an integer")?,
            "env.lidar_range" => self.env.lidar_range = parse_as(key, value, "a number")?,
            "env.n_hazards" => self.env.n_hazards = parse_as(key, value, "an integer")?,
            "env.n_obstacles" => self.env.n_obstacles = parse_as(key, value, "an integer")?,
            "env.obstacle_half_width" => {
                self.env.obstacle_half_width = parse_as(key, value, "a number")?
            }
            "env.pose_noise_sigma" => {
                self.env.pose_noise_sigma = parse_as(key, value, "a number")?
            }
            "env.robot_radius" => self.env.robot_radius = parse_as(key, value, "a number")?,
            "env.seed" => self.env.seed = parse_as(key, value, "an integer")?,
            "env.step_penalty" => self.env.step_penalty = parse_as(key, value, "a number")?,
            "env.wheel_radius" => self.env.wheel_radius = parse_as(key, value, "a number")?,
            "kde.bandwidth" => self.agent.kde.bandwidth = parse_bandwidth(value)?,
            "kde.grid_size" => self.agent.kde.grid_size = parse_as(key, value, "an integer")?,
            "net.hidden1" => self.agent.hidden.0 = parse_as(key, value, "an integer")?,
            "net.hidden2" => self.agent.hidden.1 = parse_as(key, value, "an integer")?,
            "out.dir" => self.out_dir = PathBuf::from(value),
            "risk.beta" => self.agent.risk.beta = parse_as(key, value, "a number")?,
            "risk.c_max" => self.agent.risk.c_max = parse_as(key, value, "a number")?,
            "risk.lambda" => self.agent.risk.lambda = parse_as(key, value, "a number")?,
            "run.id" => self.run_id = value.to_string(),
            other => return Err(Error::invalid(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Read one key back in its textual form (the inverse of [`set`]).
    ///
    /// [`set`]: RunConfig::set
    pub fn get(&self, key: &str) -> String {
        match key {
            "agent.alpha" => self.agent.alpha.to_string(),
            "agent.batch" => self.agent.batch.to_string(),
            "agent.buffer_capacity" => self.agent.buffer_capacity.to_string(),
            "agent.checkpoint_every" => self.agent.checkpoint_every.to_string(),
            "agent.eps0" => self.agent.eps0.to_string(),
            "agent.eps_decay_steps" => self.agent.eps_decay_steps.to_string(),
            "agent.eps_t" => self.agent.eps_t.to_string(),
            "agent.eta" => self.agent.eta.to_string(),
            "agent.gamma" => self.agent.gamma.to_string(),
            "agent.kappa" => self.agent.kappa.to_string(),
            "agent.n_tau" => self.agent.n_tau.to_string(),
            "agent.qr_norm" => match self.agent.qr_norm {
                QrNorm::PairMean => "pair_mean".to_string(),
                QrNorm::TargetSum => "target_sum".to_string(),
            },
            "agent.risk_shaped_targets" => self.agent.risk_shaped_targets.to_string(),
            "agent.seed" => self.agent.seed.to_string(),
            "agent.target_freq" => self.agent.target_freq.to_string(),
            "agent.total_env_steps" => self.agent.total_env_steps.to_string(),
            "agent.train_freq" => self.agent.train_freq.to_string(),
            "agent.variant" => self.agent.variant.to_string(),
            "env.goal_bonus" => self.env.goal_bonus.to_string(),
            "env.goal_radius" => self.env.goal_radius.to_string(),
            "env.half_axle" => self.env.half_axle.to_string(),
            "env.hazard_radius" => self.env.hazard_radius.to_string(),
            "env.horizon" => self.env.horizon.to_string(),
            "env.lidar_bins" => self.env.lidar_bins.to_string(),
            "env.lidar_range" => self.env.lidar_range.to_string(),
            "env.n_hazards" => self.env.n_hazards.to_string(),
            "env.n_obstacles" => self.env.n_obstacles.to_string(),
            "env.obstacle_half_width" => self.env.obstacle_half_width.to_string(),
            "env.pose_noise_sigma" => self.env.pose_noise_sigma.to_string(),
            "env.robot_radius" => self.env.robot_radius.to_string(),
            "env.seed" => self.env.seed.to_string(),
            "env.step_penalty" => self.env.step_penalty.to_string(),
            "env.wheel_radius" => self.env.wheel_radius.to_string(),
            "kde.bandwidth" => bandwidth_str(self.agent.kde.bandwidth),
            "kde.grid_size" => self.agent.kde.grid_size.to_string(),
            "net.hidden1" => self.agent.hidden.0.to_string(),
            "net.hidden2" => self.agent.hidden.1.to_string(),
            "out.dir" => self.out_dir.display().to_string(),
            "risk.beta" => self.agent.risk.beta.to_string(),
            "risk.c_max" => self.agent.risk.c_max.to_string(),
            "risk.lambda" => self.agent.risk.lambda.to_string(),
            "run.id" => self.run_id.clone(),
            other => unreachable!("get called with unknown key `{other}`"),
        }
    }

    /// Apply a config file: one `key=value` per line, `#` starts a comment,
    /// blank lines ignored. Errors carry the file path and 1-based line.
    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!(
                    "{} line {}: expected key=value, got `{line}`",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| {
                Error::invalid(format!("{} line {}: {e}", path.display(), idx + 1))
            })?;
        }
        Ok(())
    }

    /// Fill in the derived run id and check every numeric domain.
    pub fn finalize(&mut self) -> Result<()> {
        if self.run_id.is_empty() {
            self.run_id = format!("{}_s{}", self.agent.variant, self.agent.seed);
        }
        self.agent.validate()?;
        self.env.validate()?;
        Ok(())
    }

    /// The full configuration as sorted `key=value` lines — the provenance
    /// echo written next to every run's outputs.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key));
        }
        out
    }

    /// Directory that receives this run's artifacts.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.run_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_and_unique() {
        for pair in KEYS.windows(2) {
            assert!(pair[0] < pair[1], "{} and {} out of order", pair[0], pair[1]);
        }
    }

    #[test]
    fn resolved_echo_round_trips() {
        let mut cfg = RunConfig::default();
        // Perturb a representative key in every namespace (and both
        // non-default enum arms) so the round trip exercises real parsing.
        for (k, v) in [
            ("agent.gamma", "0.97"),
            ("agent.variant", "e_qravi"),
            ("agent.qr_norm", "target_sum"),
            ("agent.risk_shaped_targets", "true"),
            ("env.lidar_bins", "8"),
            ("kde.bandwidth", "fixed:0.3"),
            ("net.hidden1", "16"),
            ("risk.lambda", "0.25"),
            ("out.dir", "elsewhere"),
            ("run.id", "trial_a"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let echoed = cfg.resolved();
        let mut reparsed = RunConfig::default();
        for line in echoed.lines() {
            let (k, v) = line.split_once('=').unwrap();
            reparsed.set(k, v).unwrap();
        }
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn every_key_is_gettable_and_settable() {
        let mut cfg = RunConfig::default();
        for key in KEYS {
            let current = cfg.get(key);
            // Setting a key to its own echo must succeed and be a no-op.
            cfg.set(key, &current).unwrap();
            assert_eq!(cfg.get(key), current, "echo drifted for {key}");
        }
        assert_eq!(cfg, {
            let mut fresh = RunConfig::default();
            fresh.run_id = cfg.run_id.clone();
            fresh
        });
    }

    #[test]
    fn unknown_key_and_bad_value_are_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("agent.gama", "0.5").unwrap_err().to_string();
        assert!(err.contains("agent.gama"), "{err}");
        let err = cfg.set("agent.gamma", "brisk").unwrap_err().to_string();
        assert!(err.contains("agent.gamma") && err.contains("brisk"), "{err}");
    }

    #[test]
    fn file_parsing_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# header\nagent.gamma = 0.9\n\nrisk.betta = 0.9\n").unwrap();
        let mut cfg = RunConfig::default();
        let err = cfg.apply_file(&path).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("risk.betta"), "{err}");
        // The valid line before the failure was applied.
        assert_eq!(cfg.agent.gamma, 0.9);
    }

    #[test]
    fn inline_comments_and_spacing_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "risk.beta=0.95 # tail level\n  env.horizon  =  100\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.agent.risk.beta, 0.95);
        assert_eq!(cfg.env.horizon, 100);
    }

    #[test]
    fn scale_presets_set_the_four_workload_fields() {
        let mut cfg = RunConfig::default();
        cfg.apply_scale(Scale::Paper);
        assert_eq!(cfg.agent.total_env_steps, 1_000_000);
        assert_eq!(cfg.agent.buffer_capacity, 500_000);
        assert_eq!(cfg.agent.eps_decay_steps, 500_000);
        assert_eq!(cfg.env.horizon, 1000);
        cfg.apply_scale(Scale::Smoke);
        assert_eq!(cfg.agent.total_env_steps, 20_000);
        assert_eq!(cfg.env.horizon, 200);
    }

    #[test]
    fn finalize_derives_run_id_and_validates() {
        let mut cfg = RunConfig::default();
        cfg.finalize().unwrap();
        assert_eq!(cfg.run_id, "rho_qravi_s0");
        let mut bad = RunConfig::default();
        bad.set("risk.beta", "1.5").unwrap();
        assert!(bad.finalize().is_err());
    }
}
