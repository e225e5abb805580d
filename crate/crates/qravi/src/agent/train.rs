//! The training loop: interact, store, update, synchronize, log.
//!
//! One loop drives one run. Per environment step it takes an ε-greedy
//! action, stores the transition, and — once the buffer holds a batch and
//! the step count hits the update cadence — performs one gradient update on
//! a freshly sampled batch. The target network is blended every
//! `target_freq` steps. Every random choice runs on its own stream derived
//! from the run seed (initialization, exploration, batch sampling, episode
//! scenes), so runs are reproducible bit for bit and insensitive to
//! unrelated stream consumption.
//!
//! A non-finite composite loss aborts the run with a diagnostic error
//! carrying the step and the offending components; everything logged up to
//! that point remains available to the caller through the error path's
//! partial log (see [`train`]).

use super::{compute_loss, compute_targets, epsilon, select_action, AgentConfig};
use crate::env::{EnvConfig, ReachAvoidEnv, ACTION_TABLE};
use crate::error::{Error, Result};
use crate::net::{save_checkpoint, soft_update, step, NetworkParams, OptimizerState};
use crate::replay::{ReplayBuffer, Transition};
use crate::seeds::{derive, derive_indexed, TAG_EPISODE, TAG_EXPLORE, TAG_INIT, TAG_SAMPLE};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

/// One gradient update as logged.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    /// Environment step at which the update ran.
    pub step: usize,
    /// Unweighted quantile (or MSE) loss.
    pub quantile_loss: f64,
    /// `lambda`-scaled risk penalty; identically zero without a risk term.
    pub risk_loss: f64,
    /// Composite loss actually optimized.
    pub total_loss: f64,
    /// Exploration rate in effect at this step.
    pub epsilon: f64,
    /// Batch risk statistic, when the variant has one.
    pub rho_hat: Option<f64>,
    /// Whether the CVaR came from a numerically empty density tail.
    pub degenerate_tail: bool,
}

/// One completed episode as logged.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Sum of stage costs over the episode.
    pub cum_stage_cost: f64,
    /// Sum of violation costs over the episode.
    pub cum_violation_cost: f64,
    /// Goals reached during the episode.
    pub goals: usize,
}

/// Everything a run logs. Only completed episodes are recorded; a partial
/// trailing episode contributes transitions but no episode row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub updates: Vec<UpdateRecord>,
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainLog {
    /// The per-update CSV (`step,quantile_loss,risk_loss,total_loss,epsilon,rho_hat`).
    /// Floats print in shortest round-trip form, so equal logs give equal
    /// bytes; a missing risk statistic prints as an empty field.
    pub fn train_csv(&self) -> String {
        let mut s = String::from("step,quantile_loss,risk_loss,total_loss,epsilon,rho_hat\n");
        for u in &self.updates {
            let _ = write!(
                s,
                "{},{},{},{},{},",
                u.step, u.quantile_loss, u.risk_loss, u.total_loss, u.epsilon
            );
            if let Some(rho) = u.rho_hat {
                let _ = write!(s, "{rho}");
            }
            s.push('\n');
        }
        s
    }

    /// The per-episode CSV (`episode,cum_stage_cost,cum_violation_cost,goals`).
    pub fn episodes_csv(&self) -> String {
        let mut s = String::from("episode,cum_stage_cost,cum_violation_cost,goals\n");
        for e in &self.episodes {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                e.episode, e.cum_stage_cost, e.cum_violation_cost, e.goals
            );
        }
        s
    }

    /// Write `train_log.csv` and `episodes.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("train_log.csv"), self.train_csv())?;
        std::fs::write(dir.join("episodes.csv"), self.episodes_csv())?;
        Ok(())
    }
}

/// A finished run: the trained online network and the full log.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: NetworkParams,
    pub log: TrainLog,
}

/// Run the full training loop. Deterministic given the configs.
///
/// When `checkpoint_dir` is set, the final state is written there as
/// `checkpoint.bin`, plus intermediate `checkpoint_<step>.bin` files every
/// `checkpoint_every` steps (when nonzero).
pub fn train(
    cfg: &AgentConfig,
    env_cfg: &EnvConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    env_cfg.validate()?;
    let obs_dim = env_cfg.obs_dim();
    let n_actions = ACTION_TABLE.len();
    let n_tau_eff = cfg.variant.n_tau_eff(cfg.n_tau);

    let mut online = NetworkParams::init_with_hidden(
        obs_dim,
        n_actions,
        n_tau_eff,
        cfg.hidden,
        derive(cfg.seed, TAG_INIT),
    )?;
    let mut target = online.clone();
    let mut opt = OptimizerState::adam(cfg.alpha)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut explore_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, TAG_EXPLORE));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, TAG_SAMPLE));

    let mut episode_idx: u64 = 0;
    let mut env =
        ReachAvoidEnv::reset(env_cfg.clone(), derive_indexed(cfg.seed, TAG_EPISODE, episode_idx))?;
    let mut obs = env.observe();
    let mut cum_stage = 0.0;
    let mut cum_violation = 0.0;
    let mut log = TrainLog::default();

    for t in 0..cfg.total_env_steps {
        let eps = epsilon(t, cfg);
        let action = select_action(&online, &obs, eps, &mut explore_rng)?;
        let out = env.step(action)?;
        cum_stage += out.stage_cost;
        cum_violation += out.violation_cost();
        buffer.push(Transition {
            obs: std::mem::take(&mut obs),
            action,
            stage_cost: out.stage_cost,
            violation_cost: out.violation_cost(),
            next_obs: out.obs.clone(),
            done: out.done,
        })?;
        if out.done {
            log.episodes.push(EpisodeRecord {
                episode: episode_idx as usize,
                cum_stage_cost: cum_stage,
                cum_violation_cost: cum_violation,
                goals: env.world().goals_reached,
            });
            episode_idx += 1;
            env = ReachAvoidEnv::reset(
                env_cfg.clone(),
                derive_indexed(cfg.seed, TAG_EPISODE, episode_idx),
            )?;
            obs = env.observe();
            cum_stage = 0.0;
            cum_violation = 0.0;
        } else {
            obs = out.obs;
        }

        if buffer.len() >= cfg.batch && (t + 1) % cfg.train_freq == 0 {
            let batch = buffer.sample(cfg.batch, &mut sample_rng)?;
            let targets = compute_targets(&target, &batch, cfg.gamma)?;
            let loss = compute_loss(&online, &batch, &targets, cfg)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    step: t,
                    detail: format!(
                        "total loss {} (quantile {}, risk {})",
                        loss.total, loss.quantile_component, loss.risk_component
                    ),
                });
            }
            step(&mut online, &loss.grads, &mut opt);
            log.updates.push(UpdateRecord {
                step: t,
                quantile_loss: loss.quantile_component,
                risk_loss: loss.risk_component,
                total_loss: loss.total,
                epsilon: eps,
                rho_hat: loss.rho_hat,
                degenerate_tail: loss.degenerate_tail,
            });
        }

        if (t + 1) % cfg.target_freq == 0 {
            soft_update(&mut target, &online, cfg.eta)?;
        }

        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0
                && (t + 1) % cfg.checkpoint_every == 0
                && t + 1 < cfg.total_env_steps
            {
                let name = format!("checkpoint_{:07}.bin", t + 1);
                save_checkpoint(&dir.join(name), &online, &opt, (t + 1) as u64)?;
            }
        }
    }

    if let Some(dir) = checkpoint_dir {
        save_checkpoint(&dir.join("checkpoint.bin"), &online, &opt, cfg.total_env_steps as u64)?;
    }
    Ok(TrainOutput { params: online, log })
}
