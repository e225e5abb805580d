//! Quantile-regression losses and scalar risk statistics.
//!
//! The learning target throughout this crate is a *cost distribution*
//! represented by `N_tau` quantile estimates at the midpoint levels
//! `tau_n = (n - 0.5) / N_tau`, `n = 1..=N_tau`. This module provides:
//!
//! * [`TauGrid`] — the midpoint quantile levels;
//! * [`huber`] / [`quantile_huber`] — the robust elementwise losses, with
//!   analytic derivatives;
//! * [`qr_loss`] — the averaged quantile-regression objective between a set of
//!   predicted quantiles and a set of target samples, returning the loss value
//!   together with its exact gradient in the predictions;
//! * [`risk_penalty`] — the hinge-squared penalty charging a risk statistic
//!   for exceeding a budget;
//! * [`wasserstein1_atoms`] — the 1-Wasserstein distance between two empirical
//!   distributions with equally many equally weighted atoms;
//! * [`kde`] — kernel density estimation over cost samples and the
//!   expectation / VaR / CVaR statistics computed from it.

pub mod kde;

pub use kde::{BandwidthRule, CvarEstimate, KdeEstimate, Kernel, expected_cost, DEFAULT_GRID_SIZE};

use crate::error::{Error, Result};

/// A set of quantile estimates indexed by the levels of a [`TauGrid`].
///
/// Entries are *positional* (entry `n` estimates the quantile at level
/// `tau_n`); they are not required to be sorted, since intermediate network
/// outputs may cross.
pub type QuantileSet = Vec<f64>;

/// Midpoint quantile levels `tau_n = (n - 0.5) / N_tau` for `n = 1..=N_tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    taus: Vec<f64>,
}

impl TauGrid {
    /// Build the grid of `n_tau` midpoint levels.
    ///
    /// Returns an error when `n_tau == 0`.
    pub fn new(n_tau: usize) -> Result<Self> {
        if n_tau == 0 {
            return Err(Error::invalid("tau grid needs at least one level"));
        }
        let n = n_tau as f64;
        let taus = (1..=n_tau).map(|i| (i as f64 - 0.5) / n).collect();
        Ok(TauGrid { taus })
    }

    /// The levels, ascending, all strictly inside `(0, 1)`.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Number of levels.
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    /// Whether the grid is empty (never true for a constructed grid).
    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Huber loss `L_kappa(m)`: quadratic inside `|m| <= kappa`, linear outside.
///
/// `L_kappa(m) = m^2 / 2` for `|m| <= kappa`, else `kappa * (|m| - kappa / 2)`.
/// The two branches agree at `|m| = kappa`, so the loss and its derivative are
/// continuous. Requires `kappa > 0`.
pub fn huber(m: f64, kappa: f64) -> f64 {
    assert!(kappa > 0.0, "huber threshold must be positive");
    if m.abs() <= kappa {
        0.5 * m * m
    } else {
        kappa * (m.abs() - 0.5 * kappa)
    }
}

/// Derivative of [`huber`] in `m`: `m` inside the quadratic zone, else
/// `kappa * sign(m)`.
pub fn huber_deriv(m: f64, kappa: f64) -> f64 {
    assert!(kappa > 0.0, "huber threshold must be positive");
    if m.abs() <= kappa {
        m
    } else {
        kappa * m.signum()
    }
}

/// Asymmetric Huber quantile loss `rho^kappa_tau(m) = |tau - 1{m < 0}| * L_kappa(m)`.
///
/// Under-estimates (`m > 0`, target above prediction) are weighted by `tau`,
/// over-estimates by `1 - tau`, which makes the population minimizer track the
/// `tau`-quantile (exactly so as `kappa -> 0`). Requires `kappa > 0` and
/// `tau` in `(0, 1)`.
pub fn quantile_huber(m: f64, tau: f64, kappa: f64) -> f64 {
    assert!(tau > 0.0 && tau < 1.0, "quantile level must lie in (0, 1)");
    let w = if m < 0.0 { 1.0 - tau } else { tau };
    w * huber(m, kappa)
}

/// Derivative of [`quantile_huber`] in `m`. Continuous at `m = 0` (both
/// one-sided limits are zero) and at `|m| = kappa`.
pub fn quantile_huber_deriv(m: f64, tau: f64, kappa: f64) -> f64 {
    assert!(tau > 0.0 && tau < 1.0, "quantile level must lie in (0, 1)");
    let w = if m < 0.0 { 1.0 - tau } else { tau };
    w * huber_deriv(m, kappa)
}

/// Normalization convention for [`qr_loss_with_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrNorm {
    /// Mean over all `(level, target)` pairs: divide the double sum by
    /// `pred.len() * targets.len()`. The default.
    PairMean,
    /// Mean over levels only: divide the double sum by `pred.len()`, leaving
    /// the sum over targets unreduced. Scales the loss (and gradients) by the
    /// target count relative to [`QrNorm::PairMean`].
    TargetSum,
}

impl Default for QrNorm {
    fn default() -> Self {
        QrNorm::PairMean
    }
}

/// Quantile-regression loss between predicted quantiles and target samples,
/// with its exact gradient in the predictions.
///
/// For predictions `theta_n` at levels `tau_n` and target samples `y_j`,
/// the [`QrNorm::PairMean`] loss is
///
/// ```text
/// L = 1 / (N * J) * sum_n sum_j rho^kappa_{tau_n}(y_j - theta_n)
/// ```
///
/// and the returned gradient entry `n` is `dL / d theta_n` (note the inner
/// sign flip: the loss argument is `y_j - theta_n`).
///
/// `pred` and `taus` must have equal nonzero length and `targets` must be
/// nonempty; mismatches are reported as invalid-argument errors.
pub fn qr_loss(
    pred: &[f64],
    targets: &[f64],
    taus: &TauGrid,
    kappa: f64,
) -> Result<(f64, Vec<f64>)> {
    qr_loss_with_norm(pred, targets, taus, kappa, QrNorm::PairMean)
}

/// [`qr_loss`] with an explicit normalization convention.
pub fn qr_loss_with_norm(
    pred: &[f64],
    targets: &[f64],
    taus: &TauGrid,
    kappa: f64,
    norm: QrNorm,
) -> Result<(f64, Vec<f64>)> {
    if pred.len() != taus.len() {
        return Err(Error::invalid(format!(
            "prediction count {} does not match tau grid size {}",
            pred.len(),
            taus.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::invalid("qr loss needs at least one target sample"));
    }
    let scale = match norm {
        QrNorm::PairMean => 1.0 / (pred.len() * targets.len()) as f64,
        QrNorm::TargetSum => 1.0 / pred.len() as f64,
    };
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (n, (&theta, &tau)) in pred.iter().zip(taus.taus()).enumerate() {
        let mut l_n = 0.0;
        let mut g_n = 0.0;
        for &y in targets {
            let m = y - theta;
            l_n += quantile_huber(m, tau, kappa);
            // d/d theta rho(y - theta) = -rho'(m)
            g_n -= quantile_huber_deriv(m, tau, kappa);
        }
        loss += l_n;
        grad[n] = g_n * scale;
    }
    Ok((loss * scale, grad))
}

/// Risk-budget penalty: `max(0, rho - c_max)^2`.
///
/// Zero whenever the statistic is within budget (including exactly at it),
/// smooth everywhere, and quadratically increasing beyond the budget.
pub fn risk_penalty(rho: f64, c_max: f64) -> f64 {
    let excess = (rho - c_max).max(0.0);
    excess * excess
}

/// 1-Wasserstein distance between two empirical distributions given as equal
/// numbers of equally weighted atoms: sort both sides and average the
/// absolute differences of the matched order statistics.
///
/// Errors when either side is empty or the lengths differ.
pub fn wasserstein1_atoms(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "atom lists must be nonempty and equal length (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.len() as f64)
}

/// Shared risk-constraint settings: the tail level of the CVaR statistic, the
/// cost budget it is held to, and the weight trading the quantile loss
/// against the budget penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskConfig {
    /// CVaR tail level; the statistic conditions on the worst `1 - beta`
    /// fraction of outcomes. Must lie strictly inside `(0, 1)`.
    pub beta: f64,
    /// Cost budget the risk statistic is penalized for exceeding.
    /// Must be nonnegative.
    pub c_max: f64,
    /// Mixing weight of the composite loss
    /// `(1 - lambda) * quantile_loss + lambda * penalty`. Must lie in `[0, 1]`.
    pub lambda: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig { beta: 0.9, c_max: 0.1, lambda: 0.5 }
    }
}

impl RiskConfig {
    /// Check the documented field domains.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.c_max >= 0.0) {
            return Err(Error::invalid(format!("c_max must be nonnegative, got {}", self.c_max)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn tau_grid_matches_closed_form() {
        let grid = TauGrid::new(32).unwrap();
        assert_eq!(grid.len(), 32);
        // 0.5/32 and 31.5/32 are exactly representable.
        assert_eq!(grid.taus()[0], 0.015625);
        assert_eq!(grid.taus()[31], 0.984375);
        for (i, &tau) in grid.taus().iter().enumerate() {
            assert_eq!(tau, (i as f64 + 0.5) / 32.0);
        }
    }

    #[test]
    fn tau_grid_is_symmetric_and_interior() {
        for n in [1usize, 2, 5, 32, 200] {
            let grid = TauGrid::new(n).unwrap();
            let taus = grid.taus();
            for i in 0..n {
                assert!(taus[i] > 0.0 && taus[i] < 1.0);
                // Levels are mirror images around 1/2.
                assert!((taus[i] + taus[n - 1 - i] - 1.0).abs() < 1e-15);
            }
            for w in taus.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn tau_grid_rejects_zero() {
        assert!(TauGrid::new(0).is_err());
    }

    #[test]
    fn huber_values_and_continuity() {
        assert_eq!(huber(0.0, 1.0), 0.0);
        assert_eq!(huber(0.5, 1.0), 0.125);
        // Outside the quadratic zone: kappa * (|m| - kappa/2).
        assert_eq!(huber(-2.0, 1.0), 1.5);
        // The two branches meet at |m| = kappa with value kappa^2 / 2.
        assert_eq!(huber(1.0, 1.0), 0.5);
        let eps = 1e-9;
        assert!((huber(1.0 + eps, 1.0) - huber(1.0, 1.0)).abs() < 1e-8);
        // Derivative is m inside, kappa * sign(m) outside, continuous at the seam.
        assert_eq!(huber_deriv(0.3, 1.0), 0.3);
        assert_eq!(huber_deriv(2.0, 1.0), 1.0);
        assert_eq!(huber_deriv(-2.0, 1.0), -1.0);
        assert_eq!(huber_deriv(1.0, 1.0), 1.0);
    }

    #[test]
    fn quantile_huber_reference_values() {
        // m > 0 weighted by tau: 0.5 * (0.5^2 / 2) = 0.0625.
        assert_eq!(quantile_huber(0.5, 0.5, 1.0), 0.0625);
        // m < 0 weighted by 1 - tau: 0.1 * 1.5 = 0.15.
        assert!((quantile_huber(-2.0, 0.9, 1.0) - 0.15).abs() < 1e-15);
        // Zero residual, zero loss and slope.
        assert_eq!(quantile_huber(0.0, 0.25, 1.0), 0.0);
        assert_eq!(quantile_huber_deriv(0.0, 0.25, 1.0), 0.0);
    }

    #[test]
    fn quantile_huber_deriv_matches_finite_differences() {
        // Central differences around points away from the (measure-zero)
        // derivative seams; the loss is C^1 so this pins the analytic form.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..500 {
            let m: f64 = rng.random_range(-3.0..3.0);
            let tau: f64 = rng.random_range(0.05..0.95);
            let kappa: f64 = rng.random_range(0.1..2.0);
            let fd = (quantile_huber(m + h, tau, kappa) - quantile_huber(m - h, tau, kappa))
                / (2.0 * h);
            let an = quantile_huber_deriv(m, tau, kappa);
            let denom = (fd.abs() + an.abs()).max(1e-8);
            assert!(
                (fd - an).abs() / denom < 1e-4 || (fd - an).abs() < 1e-7,
                "derivative mismatch at m={m} tau={tau} kappa={kappa}: fd={fd} analytic={an}"
            );
        }
    }

    #[test]
    fn qr_loss_single_level_single_target() {
        let taus = TauGrid::new(1).unwrap();
        let (loss, grad) = qr_loss(&[0.0], &[1.0], &taus, 1.0).unwrap();
        // rho^1_{0.5}(1) = 0.5 * 0.5 = 0.25; d/dtheta = -0.5.
        assert_eq!(loss, 0.25);
        assert_eq!(grad, vec![-0.5]);
    }

    #[test]
    fn qr_loss_two_levels() {
        let taus = TauGrid::new(2).unwrap();
        // All four residuals are +1 (inside the quadratic zone boundary):
        // L = (1/4) * 2 * (0.25 + 0.75) * 0.5 = 0.25.
        let (loss, grad) = qr_loss(&[0.0, 0.0], &[1.0, 1.0], &taus, 1.0).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
        assert!((grad[0] - (-0.125)).abs() < 1e-15);
        assert!((grad[1] - (-0.375)).abs() < 1e-15);
    }

    #[test]
    fn qr_loss_zero_iff_exact_point_mass_fit() {
        let taus = TauGrid::new(8).unwrap();
        let pred = vec![0.7; 8];
        let (loss, grad) = qr_loss(&pred, &[0.7], &taus, 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        // Any perturbed prediction strictly increases the loss.
        let mut bumped = pred.clone();
        bumped[3] += 1e-3;
        let (loss_b, _) = qr_loss(&bumped, &[0.7], &taus, 1.0).unwrap();
        assert!(loss_b > 0.0);
        // And a spread target cannot be fit exactly by any single set:
        let (loss_s, _) = qr_loss(&pred, &[0.0, 1.4], &taus, 1.0).unwrap();
        assert!(loss_s > 0.0);
    }

    #[test]
    fn qr_loss_norm_conventions_scale_by_target_count() {
        let taus = TauGrid::new(4).unwrap();
        let pred = [0.1, 0.2, 0.3, 0.4];
        let targets = [0.0, 0.5, 1.0];
        let (pair, gp) = qr_loss_with_norm(&pred, &targets, &taus, 1.0, QrNorm::PairMean).unwrap();
        let (tsum, gt) = qr_loss_with_norm(&pred, &targets, &taus, 1.0, QrNorm::TargetSum).unwrap();
        let j = targets.len() as f64;
        assert!((tsum - pair * j).abs() <= 1e-12 * tsum.abs().max(1.0));
        for (a, b) in gp.iter().zip(&gt) {
            assert!((b - a * j).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn qr_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-5;
        for &(n_tau, n_targets) in &[(1usize, 1usize), (2, 4), (8, 3), (32, 64)] {
            for _ in 0..5 {
                let taus = TauGrid::new(n_tau).unwrap();
                let kappa: f64 = rng.random_range(0.05..1.5);
                let pred: Vec<f64> = (0..n_tau).map(|_| rng.random_range(-1.0..1.0)).collect();
                let targets: Vec<f64> =
                    (0..n_targets).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (_, grad) = qr_loss(&pred, &targets, &taus, kappa).unwrap();
                for i in 0..n_tau {
                    let mut hi = pred.clone();
                    let mut lo = pred.clone();
                    hi[i] += h;
                    lo[i] -= h;
                    let (lh, _) = qr_loss(&hi, &targets, &taus, kappa).unwrap();
                    let (ll, _) = qr_loss(&lo, &targets, &taus, kappa).unwrap();
                    let fd = (lh - ll) / (2.0 * h);
                    let denom = (fd.abs() + grad[i].abs()).max(1e-8);
                    assert!(
                        (fd - grad[i]).abs() / denom < 1e-4 || (fd - grad[i]).abs() < 1e-7,
                        "grad[{i}] mismatch: fd={fd} analytic={} (n_tau={n_tau})",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn qr_loss_is_midpoint_convex_in_predictions() {
        // The loss is convex in theta (each term is a weighted Huber of an
        // affine function of theta), so the midpoint value never exceeds the
        // average of the endpoint values.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let taus = TauGrid::new(8).unwrap();
        for _ in 0..1000 {
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (la, _) = qr_loss(&a, &targets, &taus, 1.0).unwrap();
            let (lb, _) = qr_loss(&b, &targets, &taus, 1.0).unwrap();
            let (lm, _) = qr_loss(&mid, &targets, &taus, 1.0).unwrap();
            assert!(lm <= 0.5 * (la + lb) + 1e-12);
        }
    }

    #[test]
    fn qr_loss_rejects_shape_mismatches() {
        let taus = TauGrid::new(2).unwrap();
        assert!(qr_loss(&[0.0], &[1.0], &taus, 1.0).is_err());
        assert!(qr_loss(&[0.0, 0.0], &[], &taus, 1.0).is_err());
    }

    #[test]
    fn risk_penalty_hinges_at_the_budget() {
        assert_eq!(risk_penalty(0.05, 0.1), 0.0);
        assert_eq!(risk_penalty(0.1, 0.1), 0.0);
        assert!((risk_penalty(0.3, 0.1) - 0.04).abs() < 1e-15);
        // Smooth at the hinge: quadratic growth just beyond it.
        assert!(risk_penalty(0.1 + 1e-6, 0.1) < 1e-11);
        // Monotone beyond the budget.
        assert!(risk_penalty(0.5, 0.1) > risk_penalty(0.2, 0.1));
    }

    #[test]
    fn wasserstein_reference_values() {
        let d = wasserstein1_atoms(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(d, 1.0);
        // Order of atoms within a list is irrelevant.
        let d2 = wasserstein1_atoms(&[1.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_eq!(d2, 1.0);
        // Identity.
        assert_eq!(wasserstein1_atoms(&[0.3, 0.7], &[0.7, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_shift_symmetry_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=16);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dab = wasserstein1_atoms(&a, &b).unwrap();
            let dba = wasserstein1_atoms(&b, &a).unwrap();
            assert_eq!(dab, dba);
            let dac = wasserstein1_atoms(&a, &c).unwrap();
            let dbc = wasserstein1_atoms(&b, &c).unwrap();
            assert!(dac <= dab + dbc + 1e-12);
            // A constant shift moves the distribution by exactly that much.
            let shift = rng.random_range(-0.5..0.5);
            let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
            assert!((wasserstein1_atoms(&a, &shifted).unwrap() - shift.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn wasserstein_rejects_bad_shapes() {
        assert!(wasserstein1_atoms(&[], &[]).is_err());
        assert!(wasserstein1_atoms(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn risk_config_validation() {
        assert!(RiskConfig::default().validate().is_ok());
        assert!(RiskConfig { beta: 0.0, ..Default::default() }.validate().is_err());
        assert!(RiskConfig { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(RiskConfig { c_max: -0.1, ..Default::default() }.validate().is_err());
        assert!(RiskConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(RiskConfig { lambda: 0.0, ..Default::default() }.validate().is_ok());
        assert!(RiskConfig { lambda: 1.0, ..Default::default() }.validate().is_ok());
    }
}
