//! Fully connected quantile-value network with hand-derived
//! backpropagation, SGD/Adam optimizers, Polyak target blending, and a
//! self-describing binary checkpoint format.
//!
//! Topology is fixed at three dense layers, `obs_dim -> h1 -> h2 ->
//! n_actions * n_tau`, rectifier activations on the hidden layers and
//! identity on the output. The output vector is read as a matrix of
//! `n_actions` rows by `n_tau` columns: row `u` holds the quantile estimates
//! of the cost distribution of action `u`.
//!
//! # Checkpoint byte layout (version 1)
//!
//! All integers little-endian, all floats IEEE-754 binary64 little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "QNETCKPT"
//! 8       4     format version (u32) = 1
//! 12      4     obs_dim (u32)
//! 16      4     n_actions (u32)
//! 20      4     n_tau (u32)
//! 24      4     layer count L (u32) = 3
//! 28      8*L   per layer: in_dim (u32), out_dim (u32)
//! ...           per layer, in order: weights (out_dim*in_dim f64,
//!               row-major, rows = output units), then biases (out_dim f64)
//! ...     1     optimizer mode (u8): 0 = sgd, 1 = adam
//! ...     8     base learning rate alpha (f64)
//! ...     1     diminishing-schedule flag (u8): 0 = off, 1 = on
//! ...     8     k_alpha (f64; 0 when the flag is off)
//! ...     8     optimizer step counter t (u64)
//! [adam only]
//! ...     24    beta1, beta2, eps (f64 each)
//! ...     8*P   first moments m (P = total parameter count, flattened in
//!               the layer order above, weights then biases per layer)
//! ...     8*P   second moments v
//! [all modes]
//! ...     8     skipped-update count (u64)
//! ...     8     global environment-step counter (u64)
//! ```
//!
//! The layout is append-only: future versions may extend the tail but will
//! bump the version field for any incompatible change.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

/// Default hidden-layer widths.
pub const DEFAULT_HIDDEN: (usize, usize) = (120, 84);

const CHECKPOINT_MAGIC: &[u8; 8] = b"QNETCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// One dense layer: `out = W x + b`, weights row-major with one row per
/// output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl DenseLayer {
    /// Build a layer from explicit parameters (row-major weights).
    pub fn new(in_dim: usize, out_dim: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if w.len() != in_dim * out_dim || b.len() != out_dim {
            return Err(Error::invalid(format!(
                "layer parameter sizes {}x{} do not match dims {out_dim}x{in_dim}",
                w.len(),
                b.len()
            )));
        }
        Ok(DenseLayer { in_dim, out_dim, w, b })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Row-major weights (row = output unit).
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    /// `out = W x + b`, appended into `out`.
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// The full parameter set of the three-layer quantile network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    obs_dim: usize,
    n_actions: usize,
    n_tau: usize,
    layers: Vec<DenseLayer>,
}

impl NetworkParams {
    /// Initialize with the default hidden widths (120 and 84): weights
    /// uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` drawn from a ChaCha
    /// stream seeded by `seed`, biases zero. Deterministic given `seed`.
    pub fn init(obs_dim: usize, n_actions: usize, n_tau: usize, seed: u64) -> Result<Self> {
        Self::init_with_hidden(obs_dim, n_actions, n_tau, DEFAULT_HIDDEN, seed)
    }

    /// [`NetworkParams::init`] with explicit hidden widths (used by the
    /// shrunken-network gradient checks).
    pub fn init_with_hidden(
        obs_dim: usize,
        n_actions: usize,
        n_tau: usize,
        hidden: (usize, usize),
        seed: u64,
    ) -> Result<Self> {
        if obs_dim == 0 || n_actions == 0 || n_tau == 0 || hidden.0 == 0 || hidden.1 == 0 {
            return Err(Error::invalid("network dimensions must all be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [(obs_dim, hidden.0), (hidden.0, hidden.1), (hidden.1, n_actions * n_tau)];
        let layers = dims
            .iter()
            .map(|&(in_dim, out_dim)| {
                let bound = 1.0 / (in_dim as f64).sqrt();
                let w = (0..in_dim * out_dim).map(|_| rng.random_range(-bound..bound)).collect();
                DenseLayer { in_dim, out_dim, w, b: vec![0.0; out_dim] }
            })
            .collect();
        Ok(NetworkParams { obs_dim, n_actions, n_tau, layers })
    }

    /// Assemble a network from explicit layers (shapes are validated,
    /// including the `n_actions * n_tau` output width). Mainly useful for
    /// constructing reference cases in tests and diagnostics.
    pub fn from_layers(
        obs_dim: usize,
        n_actions: usize,
        n_tau: usize,
        layers: Vec<DenseLayer>,
    ) -> Result<Self> {
        if layers.len() != 3 {
            return Err(Error::invalid("the network topology is fixed at three layers"));
        }
        if layers[0].in_dim != obs_dim
            || layers[0].out_dim != layers[1].in_dim
            || layers[1].out_dim != layers[2].in_dim
            || layers[2].out_dim != n_actions * n_tau
        {
            return Err(Error::invalid("layer dimensions do not chain to the declared shape"));
        }
        Ok(NetworkParams { obs_dim, n_actions, n_tau, layers })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    /// The layers, input to output.
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass. Errors when `obs` has the wrong length or non-finite
    /// entries.
    pub fn forward(&self, obs: &[f64]) -> Result<QuantileOutput> {
        Ok(self.forward_full(obs)?.into_output(self.n_actions, self.n_tau))
    }

    /// Forward pass retaining pre-activations (for backpropagation).
    fn forward_full(&self, obs: &[f64]) -> Result<Activations> {
        if obs.len() != self.obs_dim {
            return Err(Error::invalid(format!(
                "observation length {} does not match obs_dim {}",
                obs.len(),
                self.obs_dim
            )));
        }
        if obs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("observation contains non-finite entries"));
        }
        let mut pre1 = Vec::new();
        self.layers[0].affine(obs, &mut pre1);
        let act1: Vec<f64> = pre1.iter().map(|&z| z.max(0.0)).collect();
        let mut pre2 = Vec::new();
        self.layers[1].affine(&act1, &mut pre2);
        let act2: Vec<f64> = pre2.iter().map(|&z| z.max(0.0)).collect();
        let mut out = Vec::new();
        self.layers[2].affine(&act2, &mut out);
        Ok(Activations { pre1, act1, pre2, act2, out })
    }

    /// Exact reverse-accumulation gradients of the scalar loss whose
    /// derivative with respect to the output matrix is `loss_grad`
    /// (row-major, `n_actions * n_tau` entries). Scaled by `scale` and
    /// accumulated into `grads`.
    ///
    /// The rectifier subgradient at exactly zero pre-activation is taken as
    /// zero.
    pub fn backward_into(
        &self,
        obs: &[f64],
        loss_grad: &[f64],
        scale: f64,
        grads: &mut NetworkGrads,
    ) -> Result<()> {
        if loss_grad.len() != self.n_actions * self.n_tau {
            return Err(Error::invalid(format!(
                "loss gradient length {} does not match output size {}",
                loss_grad.len(),
                self.n_actions * self.n_tau
            )));
        }
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.dw.len() != l.w.len() || g.db.len() != l.b.len())
        {
            return Err(Error::invalid("gradient accumulator shape does not match the network"));
        }
        let acts = self.forward_full(obs)?;

        // Output layer.
        let l2 = &self.layers[2];
        let g2 = &mut grads.layers[2];
        for o in 0..l2.out_dim {
            let d = loss_grad[o] * scale;
            g2.db[o] += d;
            let row = &mut g2.dw[o * l2.in_dim..(o + 1) * l2.in_dim];
            for (gw, &a) in row.iter_mut().zip(&acts.act2) {
                *gw += d * a;
            }
        }
        // Backpropagate through the second rectifier.
        let mut delta2 = vec![0.0; l2.in_dim];
        for o in 0..l2.out_dim {
            let d = loss_grad[o] * scale;
            if d == 0.0 {
                continue;
            }
            let row = &l2.w[o * l2.in_dim..(o + 1) * l2.in_dim];
            for (dd, &w) in delta2.iter_mut().zip(row) {
                *dd += d * w;
            }
        }
        for (dd, &z) in delta2.iter_mut().zip(&acts.pre2) {
            if z <= 0.0 {
                *dd = 0.0;
            }
        }

        let l1 = &self.layers[1];
        let g1 = &mut grads.layers[1];
        for o in 0..l1.out_dim {
            let d = delta2[o];
            g1.db[o] += d;
            let row = &mut g1.dw[o * l1.in_dim..(o + 1) * l1.in_dim];
            for (gw, &a) in row.iter_mut().zip(&acts.act1) {
                *gw += d * a;
            }
        }
        let mut delta1 = vec![0.0; l1.in_dim];
        for o in 0..l1.out_dim {
            let d = delta2[o];
            if d == 0.0 {
                continue;
            }
            let row = &l1.w[o * l1.in_dim..(o + 1) * l1.in_dim];
            for (dd, &w) in delta1.iter_mut().zip(row) {
                *dd += d * w;
            }
        }
        for (dd, &z) in delta1.iter_mut().zip(&acts.pre1) {
            if z <= 0.0 {
                *dd = 0.0;
            }
        }

        let l0 = &self.layers[0];
        let g0 = &mut grads.layers[0];
        for o in 0..l0.out_dim {
            let d = delta1[o];
            g0.db[o] += d;
            let row = &mut g0.dw[o * l0.in_dim..(o + 1) * l0.in_dim];
            for (gw, &x) in row.iter_mut().zip(obs) {
                *gw += d * x;
            }
        }
        Ok(())
    }

    /// Convenience wrapper around [`NetworkParams::backward_into`] returning
    /// fresh gradients.
    pub fn backward(&self, obs: &[f64], loss_grad: &[f64]) -> Result<NetworkGrads> {
        let mut grads = NetworkGrads::zeros_like(self);
        self.backward_into(obs, loss_grad, 1.0, &mut grads)?;
        Ok(grads)
    }
}

/// Intermediate activations of one forward pass.
struct Activations {
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    out: Vec<f64>,
}

impl Activations {
    fn into_output(self, n_actions: usize, n_tau: usize) -> QuantileOutput {
        QuantileOutput { values: self.out, n_actions, n_tau }
    }
}

/// Network output read as a matrix: one row of `n_tau` quantile estimates
/// per action.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileOutput {
    values: Vec<f64>,
    n_actions: usize,
    n_tau: usize,
}

impl QuantileOutput {
    /// The flattened row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    /// The quantile row of one action.
    pub fn action_row(&self, u: usize) -> &[f64] {
        &self.values[u * self.n_tau..(u + 1) * self.n_tau]
    }

    /// Mean of an action's quantiles — the expected-cost estimate of that
    /// action.
    pub fn action_mean(&self, u: usize) -> f64 {
        let row = self.action_row(u);
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// The greedy (cost-minimizing) action: the lowest index among actions
    /// with minimal quantile mean.
    pub fn greedy_action(&self) -> usize {
        let mut best = 0;
        let mut best_mean = self.action_mean(0);
        for u in 1..self.n_actions {
            let m = self.action_mean(u);
            if m < best_mean {
                best = u;
                best_mean = m;
            }
        }
        best
    }
}

/// Per-layer gradient accumulators mirroring [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq)]
struct LayerGrads {
    dw: Vec<f64>,
    db: Vec<f64>,
}

impl NetworkGrads {
    /// Zero gradients shaped like `params`.
    pub fn zeros_like(params: &NetworkParams) -> Self {
        NetworkGrads {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads { dw: vec![0.0; l.w.len()], db: vec![0.0; l.b.len()] })
                .collect(),
        }
    }

    /// Reset to zero in place.
    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.dw.iter_mut().for_each(|g| *g = 0.0);
            l.db.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Multiply every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.dw.iter_mut().for_each(|g| *g *= s);
            l.db.iter_mut().for_each(|g| *g *= s);
        }
    }

    /// Visit every gradient entry in flattened order (layer by layer,
    /// weights then biases).
    pub fn flat_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.dw.iter().chain(l.db.iter()))
    }

    /// Whether every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.flat_iter().all(|g| g.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.flat_iter().fold(0.0, |acc, g| acc.max(g.abs()))
    }
}

/// Optimizer family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptMode {
    /// Plain stochastic gradient descent.
    Sgd,
    /// Adam with bias-corrected first and second moments.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

/// Optimizer state: mode, learning rate, optional diminishing schedule
/// `alpha_t = k_alpha / (t + 1)`, step counter, and (for Adam) the moment
/// vectors, flattened in the same layer order as the checkpoint format.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    mode: OptMode,
    alpha: f64,
    diminishing_k: Option<f64>,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    skipped: u64,
}

impl OptimizerState {
    /// Plain SGD at fixed rate `alpha`.
    pub fn sgd(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {alpha}")));
        }
        Ok(OptimizerState {
            mode: OptMode::Sgd,
            alpha,
            diminishing_k: None,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
            skipped: 0,
        })
    }

    /// Adam with the customary moment constants (0.9, 0.999, 1e-8).
    pub fn adam(alpha: f64) -> Result<Self> {
        Self::adam_with(alpha, 0.9, 0.999, 1e-8)
    }

    /// Adam with explicit moment constants.
    pub fn adam_with(alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {alpha}")));
        }
        if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0) {
            return Err(Error::invalid("adam moment constants must lie in (0, 1)"));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("adam eps must be positive"));
        }
        Ok(OptimizerState {
            mode: OptMode::Adam { beta1, beta2, eps },
            alpha,
            diminishing_k: None,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
            skipped: 0,
        })
    }

    /// Replace the fixed rate by the diminishing schedule
    /// `alpha_t = k_alpha / (t + 1)` (`t` counts completed updates).
    pub fn with_diminishing(mut self, k_alpha: f64) -> Result<Self> {
        if !(k_alpha > 0.0) || !k_alpha.is_finite() {
            return Err(Error::invalid(format!("k_alpha must be positive, got {k_alpha}")));
        }
        self.diminishing_k = Some(k_alpha);
        Ok(self)
    }

    pub fn mode(&self) -> OptMode {
        self.mode
    }

    /// Completed (applied) updates.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates skipped because of non-finite gradients.
    pub fn skipped_updates(&self) -> u64 {
        self.skipped
    }

    /// The learning rate the next update will use.
    pub fn effective_alpha(&self) -> f64 {
        match self.diminishing_k {
            Some(k) => k / (self.t as f64 + 1.0),
            None => self.alpha,
        }
    }
}

/// Apply one optimizer update in place. Returns `true` when the update was
/// applied; a non-finite gradient entry skips the whole update and bumps the
/// optimizer's skipped-update counter instead (the training loop surfaces
/// that in its log).
pub fn step(params: &mut NetworkParams, grads: &NetworkGrads, opt: &mut OptimizerState) -> bool {
    debug_assert_eq!(grads.layers.len(), params.layers.len());
    if !grads.all_finite() {
        opt.skipped += 1;
        return false;
    }
    let alpha = opt.effective_alpha();
    match opt.mode {
        OptMode::Sgd => {
            for (l, g) in params.layers.iter_mut().zip(&grads.layers) {
                for (p, gw) in l.w.iter_mut().zip(&g.dw) {
                    *p -= alpha * gw;
                }
                for (p, gb) in l.b.iter_mut().zip(&g.db) {
                    *p -= alpha * gb;
                }
            }
        }
        OptMode::Adam { beta1, beta2, eps } => {
            let count = params.param_count();
            if opt.m.is_empty() {
                opt.m = vec![0.0; count];
                opt.v = vec![0.0; count];
            }
            debug_assert_eq!(opt.m.len(), count);
            let t = (opt.t + 1) as i32;
            let corr1 = 1.0 - beta1.powi(t);
            let corr2 = 1.0 - beta2.powi(t);
            let mut k = 0;
            for (l, g) in params.layers.iter_mut().zip(&grads.layers) {
                for (p, gr) in
                    l.w.iter_mut().zip(&g.dw).chain(l.b.iter_mut().zip(&g.db))
                {
                    let m = beta1 * opt.m[k] + (1.0 - beta1) * gr;
                    let v = beta2 * opt.v[k] + (1.0 - beta2) * gr * gr;
                    opt.m[k] = m;
                    opt.v[k] = v;
                    *p -= alpha * (m / corr1) / ((v / corr2).sqrt() + eps);
                    k += 1;
                }
            }
        }
    }
    opt.t += 1;
    true
}

/// Polyak blend `target <- eta * online + (1 - eta) * target`. `eta = 1` is
/// a hard copy. Requires `eta` in `(0, 1]` and identical shapes.
pub fn soft_update(target: &mut NetworkParams, online: &NetworkParams, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
    }
    let same_shape = target.layers.len() == online.layers.len()
        && target
            .layers
            .iter()
            .zip(&online.layers)
            .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim);
    if !same_shape {
        return Err(Error::invalid("target and online networks have different shapes"));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        for (tp, op) in t.w.iter_mut().zip(&o.w).chain(t.b.iter_mut().zip(&o.b)) {
            *tp = eta * op + (1.0 - eta) * *tp;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Write a checkpoint (see the module docs for the exact byte layout).
pub fn save_checkpoint(
    path: &Path,
    params: &NetworkParams,
    opt: &OptimizerState,
    global_step: u64,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for dim in [params.obs_dim, params.n_actions, params.n_tau, params.layers.len()] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for l in &params.layers {
        buf.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
    }
    for l in &params.layers {
        for x in l.w.iter().chain(&l.b) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    match opt.mode {
        OptMode::Sgd => buf.push(0),
        OptMode::Adam { .. } => buf.push(1),
    }
    buf.extend_from_slice(&opt.alpha.to_le_bytes());
    buf.push(opt.diminishing_k.map_or(0, |_| 1));
    buf.extend_from_slice(&opt.diminishing_k.unwrap_or(0.0).to_le_bytes());
    buf.extend_from_slice(&opt.t.to_le_bytes());
    if let OptMode::Adam { beta1, beta2, eps } = opt.mode {
        for x in [beta1, beta2, eps] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let count = params.param_count();
        // Moments may be unallocated when no update ran yet; store zeros.
        let zeros = vec![0.0; count];
        let m = if opt.m.is_empty() { &zeros } else { &opt.m };
        let v = if opt.v.is_empty() { &zeros } else { &opt.v };
        if m.len() != count || v.len() != count {
            return Err(Error::Checkpoint("optimizer moments do not match the network".into()));
        }
        for x in m.iter().chain(v) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf.extend_from_slice(&opt.skipped.to_le_bytes());
    buf.extend_from_slice(&global_step.to_le_bytes());
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        self.inner
            .read_exact(&mut out)
            .map_err(|_| Error::Checkpoint("file truncated".into()))?;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Read a checkpoint back. Errors on missing files, bad magic/version, or
/// truncation.
pub fn load_checkpoint(path: &Path) -> Result<(NetworkParams, OptimizerState, u64)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    let mut r = Reader { inner: std::io::BufReader::new(file) };
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic — not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let obs_dim = r.u32()? as usize;
    let n_actions = r.u32()? as usize;
    let n_tau = r.u32()? as usize;
    let n_layers = r.u32()? as usize;
    if n_layers != 3 {
        return Err(Error::Checkpoint(format!("expected 3 layers, found {n_layers}")));
    }
    let mut dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        dims.push((r.u32()? as usize, r.u32()? as usize));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for &(in_dim, out_dim) in &dims {
        let w = r.f64_vec(in_dim * out_dim)?;
        let b = r.f64_vec(out_dim)?;
        layers.push(DenseLayer::new(in_dim, out_dim, w, b)?);
    }
    let params = NetworkParams::from_layers(obs_dim, n_actions, n_tau, layers)
        .map_err(|e| Error::Checkpoint(format!("inconsistent dims: {e}")))?;

    let mode_tag = r.u8()?;
    let alpha = r.f64()?;
    let dim_flag = r.u8()?;
    let k_alpha = r.f64()?;
    let t = r.u64()?;
    let mut opt = match mode_tag {
        0 => OptimizerState::sgd(alpha)
            .map_err(|e| Error::Checkpoint(format!("bad optimizer state: {e}")))?,
        1 => {
            let beta1 = r.f64()?;
            let beta2 = r.f64()?;
            let eps = r.f64()?;
            let mut o = OptimizerState::adam_with(alpha, beta1, beta2, eps)
                .map_err(|e| Error::Checkpoint(format!("bad optimizer state: {e}")))?;
            let count = params.param_count();
            o.m = r.f64_vec(count)?;
            o.v = r.f64_vec(count)?;
            o
        }
        other => return Err(Error::Checkpoint(format!("unknown optimizer mode {other}"))),
    };
    if dim_flag == 1 {
        opt = opt
            .with_diminishing(k_alpha)
            .map_err(|e| Error::Checkpoint(format!("bad schedule: {e}")))?;
    }
    opt.t = t;
    opt.skipped = r.u64()?;
    let global_step = r.u64()?;
    Ok((params, opt, global_step))
}
