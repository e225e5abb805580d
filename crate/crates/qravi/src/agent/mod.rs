//! The learning agent: ε-greedy acting, bootstrap target computation,
//! composite loss assembly for all four training variants, and the training
//! and evaluation drivers (in the [`mod@train`] and [`mod@eval`]
//! submodules).
//!
//! The four variants differ only in the loss placed on a sampled batch:
//!
//! * `avi` — plain expected-value iteration: one output per action, mean
//!   squared error against the scalar bootstrap target.
//! * `qr_avi` — quantile regression against the full target quantile
//!   vector.
//! * `e_qravi` — quantile regression plus a budget penalty on the **mean**
//!   batch violation cost.
//! * `rho_qravi` — quantile regression plus a budget penalty on the
//!   **CVaR** of the batch violation costs under a fitted density.
//!
//! For the risk-aware variants the composite loss is
//! `(1 - lambda) * L_QR + lambda * penalty`. The penalty depends only on
//! the sampled costs, not on the network parameters, so the parameter
//! gradient is exactly `(1 - lambda)` times the quantile-loss gradient —
//! the implementation computes the quantile gradient once and rescales it,
//! making that identity bitwise. An optional extension
//! (`risk_shaped_targets`) adds the scaled penalty to every bootstrap
//! target instead, giving the risk term a parameter pathway; it is off by
//! default and clearly labeled where exposed.

pub mod eval;
pub mod train;

pub use eval::{evaluate, evaluate_seq, EvalEpisode, EvalPolicy, EvalReport, TraceRow};
pub use train::{train, EpisodeRecord, TrainLog, TrainOutput, UpdateRecord};

use crate::error::{Error, Result};
use crate::net::{NetworkGrads, NetworkParams};
use crate::replay::Transition;
use crate::risk::kde::{expected_cost, KdeEstimate, KdeSettings};
use crate::risk::{risk_penalty, RiskConfig, TauGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Training-loss variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Expected-value iteration (single output per action, MSE).
    Avi,
    /// Quantile-regression value iteration, no risk term.
    QrAvi,
    /// Quantile regression + penalty on the mean batch violation cost.
    EQrAvi,
    /// Quantile regression + penalty on the density-estimated CVaR of the
    /// batch violation costs.
    RhoQrAvi,
}

impl Variant {
    /// Whether the variant carries a risk penalty term.
    pub fn has_risk_term(self) -> bool {
        matches!(self, Variant::EQrAvi | Variant::RhoQrAvi)
    }

    /// Quantile resolution actually used by the network: `avi` collapses to
    /// a single output per action.
    pub fn n_tau_eff(self, n_tau: usize) -> usize {
        match self {
            Variant::Avi => 1,
            _ => n_tau,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avi" => Ok(Variant::Avi),
            "qr_avi" => Ok(Variant::QrAvi),
            "e_qravi" => Ok(Variant::EQrAvi),
            "rho_qravi" => Ok(Variant::RhoQrAvi),
            other => Err(Error::invalid(format!(
                "unknown variant '{other}' (expected avi, qr_avi, e_qravi, or rho_qravi)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::Avi => "avi",
            Variant::QrAvi => "qr_avi",
            Variant::EQrAvi => "e_qravi",
            Variant::RhoQrAvi => "rho_qravi",
        };
        f.write_str(s)
    }
}

/// Everything the training loop needs. Defaults are the desk-scale
/// hyperparameters (20k environment steps); the full-size experiment is
/// reached through the run config's `paper` scale preset.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub variant: Variant,
    pub risk: RiskConfig,
    /// Discount factor, in `(0, 1]`.
    pub gamma: f64,
    /// Huber width of the quantile loss.
    pub kappa: f64,
    /// Quantile resolution (ignored by `avi`, which uses one output).
    pub n_tau: usize,
    /// Batch size B.
    pub batch: usize,
    /// Environment steps between gradient updates.
    pub train_freq: usize,
    /// Environment steps between target-network blends.
    pub target_freq: usize,
    /// Target blend weight, in `(0, 1]` (1 = hard copy).
    pub eta: f64,
    /// Exploration schedule: linear from `eps0` to `eps_t` over
    /// `eps_decay_steps`, then flat.
    pub eps0: f64,
    pub eps_t: f64,
    pub eps_decay_steps: usize,
    /// Total environment interactions.
    pub total_env_steps: usize,
    /// Replay capacity.
    pub buffer_capacity: usize,
    /// Learning rate (Adam).
    pub alpha: f64,
    /// Hidden-layer widths.
    pub hidden: (usize, usize),
    /// Quantile-loss normalization convention.
    pub qr_norm: crate::risk::QrNorm,
    /// Density-estimation settings for the CVaR statistic.
    pub kde: KdeSettings,
    /// Extension (off by default): add the scaled risk penalty to every
    /// bootstrap target, creating a parameter pathway for the risk term.
    pub risk_shaped_targets: bool,
    /// Write an intermediate checkpoint every this many environment steps
    /// (0 = final checkpoint only).
    pub checkpoint_every: usize,
    /// Base seed; all training streams derive from it.
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            variant: Variant::RhoQrAvi,
            risk: RiskConfig::default(),
            gamma: 0.99,
            kappa: 1.0,
            n_tau: 32,
            batch: 128,
            train_freq: 10,
            target_freq: 500,
            eta: 1.0,
            eps0: 1.0,
            eps_t: 0.05,
            eps_decay_steps: 10_000,
            total_env_steps: 20_000,
            buffer_capacity: 50_000,
            alpha: 2.5e-4,
            hidden: crate::net::DEFAULT_HIDDEN,
            qr_norm: crate::risk::QrNorm::PairMean,
            kde: KdeSettings::default(),
            risk_shaped_targets: false,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl AgentConfig {
    /// Check every numeric domain.
    pub fn validate(&self) -> Result<()> {
        self.risk.validate()?;
        self.kde.validate()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.n_tau == 0 {
            return Err(Error::invalid("n_tau must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch must be at least 1"));
        }
        if self.train_freq == 0 || self.target_freq == 0 {
            return Err(Error::invalid("train_freq and target_freq must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.eps0 >= self.eps_t && self.eps_t > 0.0 && self.eps0 <= 1.0) {
            return Err(Error::invalid(format!(
                "need eps0 >= eps_t > 0 and eps0 <= 1, got eps0 {} eps_t {}",
                self.eps0, self.eps_t
            )));
        }
        if self.eps_decay_steps == 0 {
            return Err(Error::invalid("eps_decay_steps must be at least 1"));
        }
        if self.buffer_capacity < self.batch {
            return Err(Error::invalid(format!(
                "buffer capacity {} cannot hold one batch of {}",
                self.buffer_capacity, self.batch
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Ok(())
    }
}

/// Linear exploration schedule: from `eps0` down to `eps_t` over
/// `eps_decay_steps` environment steps, then exactly flat at `eps_t`.
pub fn epsilon(t: usize, cfg: &AgentConfig) -> f64 {
    if t >= cfg.eps_decay_steps {
        return cfg.eps_t;
    }
    let frac = t as f64 / cfg.eps_decay_steps as f64;
    (cfg.eps0 + frac * (cfg.eps_t - cfg.eps0)).max(cfg.eps_t)
}

/// ε-greedy action choice: with probability `eps` a uniform action,
/// otherwise the greedy (lowest quantile-mean, ties to the lowest index)
/// action. `eps = 0` consumes no generator draws.
pub fn select_action(
    params: &NetworkParams,
    obs: &[f64],
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    debug_assert!((0.0..=1.0).contains(&eps));
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..params.n_actions()));
    }
    Ok(params.forward(obs)?.greedy_action())
}

/// Bootstrap targets for a batch under the target network: for each sample,
/// `y_j = g + gamma * (1 - done) * theta'(next_obs, u*, tau_j)` where `u*`
/// is the target network's greedy next action. Terminal samples collapse to
/// the constant vector `g`, as does everything when `gamma = 0`.
///
/// The vector length is the target network's per-action output count, so
/// the same routine serves the scalar (`avi`) and quantile variants.
pub fn compute_targets(
    target: &NetworkParams,
    batch: &[&Transition],
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    if batch.is_empty() {
        return Err(Error::invalid("target computation needs a non-empty batch"));
    }
    batch
        .iter()
        .map(|t| {
            let g = t.stage_cost;
            if t.done || gamma == 0.0 {
                return Ok(vec![g; target.n_tau()]);
            }
            let next = target.forward(&t.next_obs)?;
            let u_star = next.greedy_action();
            Ok(next.action_row(u_star).iter().map(|&q| g + gamma * q).collect())
        })
        .collect()
}

/// One loss evaluation over a batch: the components, the batch risk
/// statistic, and the parameter gradients.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    /// The composite loss actually optimized:
    /// `(1 - lambda) * L_QR + lambda * penalty` for risk variants, plain
    /// `L_QR` (or MSE) otherwise.
    pub total: f64,
    /// Unweighted quantile (or MSE) component, comparable across variants.
    pub quantile_component: f64,
    /// `lambda * penalty`; identically zero for `avi` and `qr_avi`.
    pub risk_component: f64,
    /// The batch risk statistic (mean or CVaR of violation costs); `None`
    /// for variants without a risk term.
    pub rho_hat: Option<f64>,
    /// True when the CVaR came from a numerically empty density tail.
    pub degenerate_tail: bool,
    /// Parameter gradients of the composite loss.
    pub grads: NetworkGrads,
}

/// Assemble the variant's loss and gradients on a batch.
///
/// `targets` must align with `batch` (same length, each row as produced by
/// [`compute_targets`]). The quantile gradient is accumulated unscaled and
/// the whole gradient is rescaled by `(1 - lambda)` at the end, so the
/// risk-variant gradient is bit-for-bit that rescaling of the plain
/// quantile gradient.
pub fn compute_loss(
    online: &NetworkParams,
    batch: &[&Transition],
    targets: &[Vec<f64>],
    cfg: &AgentConfig,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::invalid("loss computation needs a non-empty batch"));
    }
    if batch.len() != targets.len() {
        return Err(Error::invalid(format!(
            "batch size {} does not match target count {}",
            batch.len(),
            targets.len()
        )));
    }
    let n_tau_eff = online.n_tau();
    let b = batch.len() as f64;

    // Batch risk statistic first: the optional target shift depends on it.
    let (rho_hat, degenerate_tail) = match cfg.variant {
        Variant::EQrAvi => {
            let costs: Vec<f64> = batch.iter().map(|t| t.violation_cost).collect();
            (Some(expected_cost(&costs)?), false)
        }
        Variant::RhoQrAvi => {
            let costs: Vec<f64> = batch.iter().map(|t| t.violation_cost).collect();
            let fit = KdeEstimate::fit(&costs, cfg.kde.bandwidth, cfg.kde.grid_size)?;
            let est = fit.cvar(cfg.risk.beta)?;
            (Some(est.value), est.degenerate_tail)
        }
        _ => (None, false),
    };
    let penalty = rho_hat.map(|rho| risk_penalty(rho, cfg.risk.c_max)).unwrap_or(0.0);
    let lambda = if cfg.variant.has_risk_term() { cfg.risk.lambda } else { 0.0 };
    let target_shift =
        if cfg.risk_shaped_targets && cfg.variant.has_risk_term() { lambda * penalty } else { 0.0 };

    let mut quantile_sum = 0.0;
    let mut grads = NetworkGrads::zeros_like(online);
    let mut shifted = Vec::new();
    let taus = TauGrid::new(n_tau_eff)?;
    for (t, target) in batch.iter().zip(targets) {
        if target.len() != n_tau_eff {
            return Err(Error::invalid(format!(
                "target row length {} does not match the network's {} outputs per action",
                target.len(),
                n_tau_eff
            )));
        }
        let target: &[f64] = if target_shift != 0.0 {
            shifted.clear();
            shifted.extend(target.iter().map(|y| y + target_shift));
            &shifted
        } else {
            target
        };
        let out = online.forward(&t.obs)?;
        let pred = out.action_row(t.action);
        // Per-sample loss and d(loss)/d(pred); averaged over the batch.
        let (sample_loss, row_grad) = match cfg.variant {
            Variant::Avi => {
                let diff = pred[0] - target[0];
                (diff * diff, vec![2.0 * diff])
            }
            _ => crate::risk::qr_loss_with_norm(pred, target, &taus, cfg.kappa, cfg.qr_norm)?,
        };
        quantile_sum += sample_loss;
        let mut full_grad = vec![0.0; online.n_actions() * n_tau_eff];
        full_grad[t.action * n_tau_eff..(t.action + 1) * n_tau_eff].copy_from_slice(&row_grad);
        online.backward_into(&t.obs, &full_grad, 1.0 / b, &mut grads)?;
    }
    let quantile_component = quantile_sum / b;
    grads.scale(1.0 - lambda);

    let risk_component = lambda * penalty;
    let total = (1.0 - lambda) * quantile_component + risk_component;
    Ok(LossBreakdown {
        total,
        quantile_component,
        risk_component,
        rho_hat,
        degenerate_tail,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::DenseLayer;
    use rand_chacha::rand_core::SeedableRng;

    fn small_cfg(variant: Variant) -> AgentConfig {
        AgentConfig {
            variant,
            n_tau: 4,
            batch: 8,
            hidden: (8, 8),
            ..AgentConfig::default()
        }
    }

    /// A network whose outputs are the last-layer biases, independent of the
    /// observation (zero weights throughout).
    fn bias_net(obs_dim: usize, n_actions: usize, n_tau: usize, biases: Vec<f64>) -> NetworkParams {
        let h = 4;
        let layers = vec![
            DenseLayer::new(obs_dim, h, vec![0.0; obs_dim * h], vec![0.0; h]).unwrap(),
            DenseLayer::new(h, h, vec![0.0; h * h], vec![0.0; h]).unwrap(),
            DenseLayer::new(h, n_actions * n_tau, vec![0.0; h * n_actions * n_tau], biases)
                .unwrap(),
        ];
        NetworkParams::from_layers(obs_dim, n_actions, n_tau, layers).unwrap()
    }

    fn transition(obs: Vec<f64>, action: usize, g: f64, cost: f64, done: bool) -> Transition {
        let next_obs = obs.clone();
        Transition { obs, action, stage_cost: g, violation_cost: cost, next_obs, done }
    }

    #[test]
    fn epsilon_schedule_reference_points() {
        let cfg = AgentConfig { eps_decay_steps: 10_000, ..AgentConfig::default() };
        assert_eq!(epsilon(0, &cfg), 1.0);
        assert!((epsilon(5_000, &cfg) - 0.525).abs() < 1e-12);
        assert_eq!(epsilon(10_000, &cfg), 0.05);
        assert_eq!(epsilon(10_001, &cfg), 0.05);
        assert_eq!(epsilon(1_000_000, &cfg), 0.05);
    }

    #[test]
    fn config_validation_covers_every_domain() {
        assert!(AgentConfig::default().validate().is_ok());
        let bad = |f: fn(&mut AgentConfig)| {
            let mut c = AgentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.gamma = 0.0));
        assert!(bad(|c| c.gamma = 1.5));
        assert!(bad(|c| c.kappa = 0.0));
        assert!(bad(|c| c.n_tau = 0));
        assert!(bad(|c| c.batch = 0));
        assert!(bad(|c| c.train_freq = 0));
        assert!(bad(|c| c.target_freq = 0));
        assert!(bad(|c| c.eta = 0.0));
        assert!(bad(|c| c.eps_t = 0.0));
        assert!(bad(|c| { c.eps0 = 0.01; c.eps_t = 0.05 }));
        assert!(bad(|c| c.eps_decay_steps = 0));
        assert!(bad(|c| c.buffer_capacity = 1));
        assert!(bad(|c| c.alpha = 0.0));
        assert!(bad(|c| c.hidden = (0, 8)));
        assert!(bad(|c| c.risk.beta = 1.0));
    }

    #[test]
    fn full_exploration_is_uniform_over_actions() {
        let params = bias_net(2, 5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[select_action(&params, &[0.0, 0.0], 1.0, &mut rng).unwrap()] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.2).abs() < 0.01, "frequency {freq} off uniform");
        }
    }

    #[test]
    fn greedy_choice_minimizes_and_breaks_ties_low_and_spares_the_stream() {
        // Means per action: [2, 1, 1] — argmin ties between 1 and 2.
        let params = bias_net(2, 3, 2, vec![2.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pristine = rng.clone();
        let a = select_action(&params, &[0.3, -0.2], 0.0, &mut rng).unwrap();
        assert_eq!(a, 1);
        // eps = 0 consumed nothing from the stream.
        assert_eq!(rng, pristine);
        // A strictly smallest mean is always chosen.
        let params = bias_net(2, 3, 2, vec![2.0, 2.0, 1.0, 1.0, 0.0, 0.5]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(select_action(&params, &[0.0, 0.0], 0.0, &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn greedy_choice_is_invariant_under_constant_output_shifts() {
        let params = NetworkParams::init_with_hidden(6, 5, 4, (8, 8), 3).unwrap();
        let mut shifted = params.clone();
        // Shift every output by the same constant through the last biases.
        {
            let last = shifted.layers().len() - 1;
            let biases: Vec<f64> =
                shifted.layers()[last].biases().iter().map(|b| b + 7.5).collect();
            let l = &shifted.layers()[last];
            let new = DenseLayer::new(l.in_dim(), l.out_dim(), l.weights().to_vec(), biases)
                .unwrap();
            let mut layers: Vec<DenseLayer> = shifted.layers().to_vec();
            layers[last] = new;
            shifted = NetworkParams::from_layers(6, 5, 4, layers).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let obs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = params.forward(&obs).unwrap().greedy_action();
            let b = shifted.forward(&obs).unwrap().greedy_action();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn terminal_and_undiscounted_targets_collapse_to_the_stage_cost() {
        let target = NetworkParams::init_with_hidden(3, 2, 4, (8, 8), 5).unwrap();
        let done = transition(vec![0.1, 0.2, 0.3], 0, 0.7, 0.0, true);
        let live = transition(vec![0.1, 0.2, 0.3], 0, 0.7, 0.0, false);
        let ys = compute_targets(&target, &[&done, &live], 0.99).unwrap();
        assert_eq!(ys[0], vec![0.7; 4]);
        assert_ne!(ys[1], vec![0.7; 4]);
        // gamma = 0 removes the network from the picture entirely.
        let ys = compute_targets(&target, &[&live], 0.0).unwrap();
        assert_eq!(ys[0], vec![0.7; 4]);
        assert!(compute_targets(&target, &[], 0.99).is_err());
    }

    #[test]
    fn targets_match_a_hand_rolled_oracle() {
        let target = NetworkParams::init_with_hidden(3, 2, 4, (8, 8), 19).unwrap();
        let t = transition(vec![0.4, -0.3, 0.2], 1, -0.25, 0.0, false);
        let gamma = 0.9;
        let ys = compute_targets(&target, &[&t], gamma).unwrap();
        // Oracle: forward the next observation, pick the action with the
        // smaller quantile mean, combine by hand.
        let out = target.forward(&t.next_obs).unwrap();
        let mean = |u: usize| out.action_row(u).iter().sum::<f64>() / 4.0;
        let u_star = if mean(0) <= mean(1) { 0 } else { 1 };
        for (j, y) in ys[0].iter().enumerate() {
            let expect = -0.25 + gamma * out.action_row(u_star)[j];
            assert!((y - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn clean_batches_carry_no_risk_component() {
        let cfg = small_cfg(Variant::RhoQrAvi);
        let online = NetworkParams::init_with_hidden(2, 2, 4, (8, 8), 1).unwrap();
        let batch: Vec<Transition> =
            (0..8).map(|k| transition(vec![0.1 * k as f64, 0.0], 0, 0.2, 0.0, false)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg.gamma).unwrap();
        let out = compute_loss(&online, &refs, &targets, &cfg).unwrap();
        assert_eq!(out.risk_component, 0.0);
        let rho = out.rho_hat.unwrap();
        assert!(rho.abs() < 0.05, "near-zero costs should give tiny CVaR, got {rho}");
        assert!((out.total - (1.0 - cfg.risk.lambda) * out.quantile_component).abs() < 1e-15);
    }

    #[test]
    fn lambda_zero_reduces_to_the_plain_quantile_loss() {
        let mut cfg = small_cfg(Variant::RhoQrAvi);
        cfg.risk.lambda = 0.0;
        let online = NetworkParams::init_with_hidden(2, 2, 4, (8, 8), 2).unwrap();
        let batch: Vec<Transition> =
            (0..8).map(|k| transition(vec![0.1 * k as f64, 0.5], 0, 0.2, 0.9, false)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg.gamma).unwrap();
        let out = compute_loss(&online, &refs, &targets, &cfg).unwrap();
        assert_eq!(out.total, out.quantile_component);
        assert_eq!(out.risk_component, 0.0);
    }

    #[test]
    fn uniform_violation_costs_hit_the_analytic_penalty() {
        // Costs U[0,1]: CVaR_0.9 = 0.95, so the risk component approaches
        // lambda * (0.95 - 0.1)^2 = 0.5 * 0.7225.
        let cfg = AgentConfig { variant: Variant::RhoQrAvi, batch: 128, ..small_cfg(Variant::RhoQrAvi) };
        let online = NetworkParams::init_with_hidden(2, 2, 4, (8, 8), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let batch: Vec<Transition> = (0..128)
            .map(|_| transition(vec![0.0, 0.0], 0, 0.1, rng.random::<f64>(), false))
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg.gamma).unwrap();
        let out = compute_loss(&online, &refs, &targets, &cfg).unwrap();
        let expect = cfg.risk.lambda * (0.95f64 - 0.1).powi(2);
        assert!(
            (out.risk_component - expect).abs() < 0.05,
            "risk component {} vs analytic {expect}",
            out.risk_component
        );
        assert!(!out.degenerate_tail);
    }

    #[test]
    fn tail_statistic_dominates_the_mean_statistic() {
        // On a clearly violating batch the CVaR penalty exceeds the mean
        // penalty at equal lambda and budget.
        let cfg_e = small_cfg(Variant::EQrAvi);
        let cfg_rho = small_cfg(Variant::RhoQrAvi);
        let online = NetworkParams::init_with_hidden(2, 2, 4, (8, 8), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let batch: Vec<Transition> = (0..64)
            .map(|_| transition(vec![0.0, 0.0], 0, 0.1, 0.5 + 0.5 * rng.random::<f64>(), false))
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg_e.gamma).unwrap();
        let out_e = compute_loss(&online, &refs, &targets, &cfg_e).unwrap();
        let out_rho = compute_loss(&online, &refs, &targets, &cfg_rho).unwrap();
        assert!(out_rho.rho_hat.unwrap() > out_e.rho_hat.unwrap());
        assert!(out_rho.risk_component > out_e.risk_component);
        // Both are positive: the statistic exceeds the 0.1 budget.
        assert!(out_e.risk_component > 0.0);
    }

    #[test]
    fn risk_scaling_of_the_gradient_is_bitwise() {
        let cfg_qr = small_cfg(Variant::QrAvi);
        let mut cfg_rho = small_cfg(Variant::RhoQrAvi);
        cfg_rho.risk.lambda = 0.5;
        let online = NetworkParams::init_with_hidden(3, 2, 4, (8, 8), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let batch: Vec<Transition> = (0..16)
            .map(|k| {
                transition(
                    vec![rng.random_range(-1.0..1.0), 0.2, -0.4],
                    k % 2,
                    0.3,
                    rng.random::<f64>(),
                    false,
                )
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg_qr.gamma).unwrap();
        let g_qr = compute_loss(&online, &refs, &targets, &cfg_qr).unwrap().grads;
        let g_rho = compute_loss(&online, &refs, &targets, &cfg_rho).unwrap().grads;
        let scale = 1.0 - cfg_rho.risk.lambda;
        for (a, b) in g_qr.flat_iter().zip(g_rho.flat_iter()) {
            assert_eq!(a * scale, *b, "gradient scaling must be exact");
        }
    }

    #[test]
    fn avi_uses_scalar_targets_and_mse() {
        let cfg = AgentConfig { variant: Variant::Avi, ..small_cfg(Variant::Avi) };
        // Single output per action; prediction is the bias.
        let online = bias_net(2, 2, 1, vec![0.4, 0.9]);
        let batch = [transition(vec![0.0, 0.0], 0, 0.1, 0.0, true)];
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg.gamma).unwrap();
        assert_eq!(targets[0], vec![0.1]);
        let out = compute_loss(&online, &refs, &targets, &cfg).unwrap();
        // MSE: (0.4 - 0.1)^2.
        assert!((out.total - 0.09).abs() < 1e-15);
        assert_eq!(out.risk_component, 0.0);
        assert!(out.rho_hat.is_none());
    }

    #[test]
    fn shaped_targets_shift_by_the_scaled_penalty() {
        let mut cfg = small_cfg(Variant::EQrAvi);
        cfg.risk_shaped_targets = true;
        let online = NetworkParams::init_with_hidden(2, 2, 4, (8, 8), 8).unwrap();
        // Constant violation cost 0.6: penalty (0.6 - 0.1)^2 = 0.25,
        // shift = 0.5 * 0.25 = 0.125.
        let batch: Vec<Transition> =
            (0..8).map(|_| transition(vec![0.1, 0.2], 0, 0.3, 0.6, true)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = compute_targets(&online, &refs, cfg.gamma).unwrap();
        let shaped = compute_loss(&online, &refs, &targets, &cfg).unwrap();
        // Against hand-shifted targets under the plain variant the quantile
        // component must agree.
        let mut plain_cfg = cfg.clone();
        plain_cfg.risk_shaped_targets = false;
        let shifted: Vec<Vec<f64>> =
            targets.iter().map(|row| row.iter().map(|y| y + 0.125).collect()).collect();
        let plain = compute_loss(&online, &refs, &shifted, &plain_cfg).unwrap();
        assert!((shaped.quantile_component - plain.quantile_component).abs() < 1e-15);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant::Avi, Variant::QrAvi, Variant::EQrAvi, Variant::RhoQrAvi] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("qravi".parse::<Variant>().is_err());
        assert_eq!(Variant::Avi.n_tau_eff(32), 1);
        assert_eq!(Variant::RhoQrAvi.n_tau_eff(32), 32);
    }
}
