//! Policy evaluation: frozen parameters, greedy (or uniform-random
//! baseline) acting, fixed seed grid, per-episode metrics and optional
//! step-level traces.
//!
//! Episodes are independent given their derived scene seeds, so they fan
//! out across the worker pool in parallel builds; results are merged in
//! (seed, episode) order either way, making the report identical between
//! the parallel and sequential paths.

use super::select_action;
use crate::env::{EnvConfig, ReachAvoidEnv, ACTION_TABLE};
use crate::error::{Error, Result};
use crate::exec;
use crate::net::NetworkParams;
use crate::seeds::{derive_indexed, TAG_EVAL, TAG_POLICY};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How actions are chosen during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPolicy {
    /// Greedy with respect to the quantile means (no exploration).
    Greedy,
    /// Uniform-random actions — the no-learning baseline.
    UniformRandom,
}

/// One step of an evaluation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub action: usize,
    pub stage_cost: f64,
    pub hazard_cost: f64,
    pub obstacle_cost: f64,
    pub goal_reached: bool,
}

/// One evaluation episode's totals (and its trace, when collected).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    /// The evaluation seed this episode belongs to.
    pub eval_seed: u64,
    /// Episode index within its seed.
    pub episode: usize,
    pub cum_stage_cost: f64,
    pub cum_violation_cost: f64,
    pub goals: usize,
    pub steps: usize,
    pub trace: Option<Vec<TraceRow>>,
}

/// Aggregated evaluation metrics over all episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EvalEpisode>,
    /// Mean over episodes of the cumulative stage cost.
    pub avg_cost_to_go: f64,
    /// Total stage cost divided by total steps.
    pub avg_cost_per_step: f64,
    /// Mean over episodes of the cumulative violation cost.
    pub violation_mean: f64,
    /// Population standard deviation of the same.
    pub violation_std: f64,
    /// Goals reached, summed over all episodes.
    pub total_goals: usize,
}

/// Evaluate `params` over `seeds x episodes_per_seed` episodes (parallel
/// across episodes in parallel builds).
pub fn evaluate(
    params: &NetworkParams,
    policy: EvalPolicy,
    seeds: &[u64],
    episodes_per_seed: usize,
    env_cfg: &EnvConfig,
    collect_traces: bool,
) -> Result<EvalReport> {
    run_evaluate(params, policy, seeds, episodes_per_seed, env_cfg, collect_traces, true)
}

/// [`evaluate`] forced onto the sequential path regardless of build
/// features.
pub fn evaluate_seq(
    params: &NetworkParams,
    policy: EvalPolicy,
    seeds: &[u64],
    episodes_per_seed: usize,
    env_cfg: &EnvConfig,
    collect_traces: bool,
) -> Result<EvalReport> {
    run_evaluate(params, policy, seeds, episodes_per_seed, env_cfg, collect_traces, false)
}

fn run_evaluate(
    params: &NetworkParams,
    policy: EvalPolicy,
    seeds: &[u64],
    episodes_per_seed: usize,
    env_cfg: &EnvConfig,
    collect_traces: bool,
    parallel: bool,
) -> Result<EvalReport> {
    env_cfg.validate()?;
    if seeds.is_empty() || episodes_per_seed == 0 {
        return Err(Error::invalid("evaluation needs at least one seed and one episode"));
    }
    if params.obs_dim() != env_cfg.obs_dim() {
        return Err(Error::invalid(format!(
            "network expects {}-dim observations, environment produces {}",
            params.obs_dim(),
            env_cfg.obs_dim()
        )));
    }
    let n = seeds.len() * episodes_per_seed;
    let job = |i: usize| -> Result<EvalEpisode> {
        let eval_seed = seeds[i / episodes_per_seed];
        let episode = i % episodes_per_seed;
        run_episode(params, policy, eval_seed, episode, env_cfg, collect_traces)
    };
    let results = if parallel { exec::indexed_map(n, job) } else { exec::indexed_map_seq(n, job) };
    let episodes: Vec<EvalEpisode> = results.into_iter().collect::<Result<_>>()?;

    let n_f = episodes.len() as f64;
    let avg_cost_to_go = episodes.iter().map(|e| e.cum_stage_cost).sum::<f64>() / n_f;
    let total_steps: usize = episodes.iter().map(|e| e.steps).sum();
    let avg_cost_per_step =
        episodes.iter().map(|e| e.cum_stage_cost).sum::<f64>() / total_steps as f64;
    let violation_mean = episodes.iter().map(|e| e.cum_violation_cost).sum::<f64>() / n_f;
    let violation_var = episodes
        .iter()
        .map(|e| (e.cum_violation_cost - violation_mean).powi(2))
        .sum::<f64>()
        / n_f;
    let total_goals = episodes.iter().map(|e| e.goals).sum();
    Ok(EvalReport {
        episodes,
        avg_cost_to_go,
        avg_cost_per_step,
        violation_mean,
        violation_std: violation_var.sqrt(),
        total_goals,
    })
}

fn run_episode(
    params: &NetworkParams,
    policy: EvalPolicy,
    eval_seed: u64,
    episode: usize,
    env_cfg: &EnvConfig,
    collect_traces: bool,
) -> Result<EvalEpisode> {
    let scene_seed = derive_indexed(eval_seed, TAG_EVAL, episode as u64);
    let mut env = ReachAvoidEnv::reset(env_cfg.clone(), scene_seed)?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_indexed(eval_seed, TAG_POLICY, episode as u64));
    let mut obs = env.observe();
    let mut cum_stage = 0.0;
    let mut cum_violation = 0.0;
    let mut steps = 0;
    let mut trace = collect_traces.then(Vec::new);
    loop {
        let action = match policy {
            EvalPolicy::Greedy => select_action(params, &obs, 0.0, &mut rng)?,
            EvalPolicy::UniformRandom => rng.random_range(0..ACTION_TABLE.len()),
        };
        let out = env.step(action)?;
        cum_stage += out.stage_cost;
        cum_violation += out.violation_cost();
        if let Some(rows) = trace.as_mut() {
            let r = &env.world().robot;
            rows.push(TraceRow {
                t: steps,
                x: r.x,
                y: r.y,
                theta: r.theta,
                action,
                stage_cost: out.stage_cost,
                hazard_cost: out.hazard_cost,
                obstacle_cost: out.obstacle_cost,
                goal_reached: out.goal_reached,
            });
        }
        steps += 1;
        if out.done {
            break;
        }
        obs = out.obs;
    }
    Ok(EvalEpisode {
        eval_seed,
        episode,
        cum_stage_cost: cum_stage,
        cum_violation_cost: cum_violation,
        goals: env.world().goals_reached,
        steps,
        trace,
    })
}
