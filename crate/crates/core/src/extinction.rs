//! Monte Carlo estimation of ε-extinction times and the quantitative checks
//! behind the extinction bound: the probability floor
//! `P(τ_e ≤ T) ≥ 1 − c*‖x‖_H^{2-α}/T`, the mean bound `E τ_e ≤ c*‖x‖_H^{2-α}`
//! with `c* = 1/(δ(c0/2)^α(1−α/2))`, the supermartingale property of
//! `t ↦ ‖X(t)‖_H^{2-α}`, and the pathwise energy inequality in expectation.
//!
//! Everything here measures the regularized, discretized dynamics at a fixed
//! desk-scale resolution: the bound holds for the limit object, so the
//! comparisons carry a statistical buffer (3·SE on one-sided checks) and the
//! reports label `τ_e^ε` as a threshold surrogate, with an ε-sensitivity
//! column from a companion run at ε/10 on the same Brownian paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::operators::SingleValuedDrift;
use crate::sde::{simulate_batch, SimConfig, Trajectory};
use crate::spaces::embedding_constant;

/// `c* = 1/(δ (c0/2)^α (1 − α/2))`; finite and positive only for `α ∈ (1,2)`.
pub fn c_star(delta: f64, alpha: f64, c0: f64) -> Result<f64, Error> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::invalid("c* needs alpha in (1,2)"));
    }
    if !(delta > 0.0) || !(c0 > 0.0) {
        return Err(Error::invalid("c* needs delta > 0 and c0 > 0"));
    }
    Ok(1.0 / (delta * (c0 / 2.0).powf(alpha) * (1.0 - alpha / 2.0)))
}

/// Horizon that puts the theoretical probability floor at `floor`:
/// `T = c*‖x‖^{2-α} / (1 − floor)`.
pub fn horizon_for_floor(cstar: f64, x_norm_h: f64, alpha: f64, floor: f64) -> Result<f64, Error> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::invalid("floor must lie in (0,1)"));
    }
    Ok(cstar * x_norm_h.powf(2.0 - alpha) / (1.0 - floor))
}

/// First recorded time with `‖X‖_H ≤ ε`, `None` when censored at the horizon.
pub fn extinction_time(traj: &Trajectory) -> Option<f64> {
    traj.extinction_time
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * ((p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt()) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-trajectory extinction sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TauSample {
    pub index: u64,
    /// τ at the primary threshold ε (None = censored at T).
    pub tau: Option<f64>,
    /// τ at ε/10 on the same Brownian path.
    pub tau_tenth: Option<f64>,
}

/// Headline extinction statistics against the theoretical bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtinctionReport {
    pub n_traj: u64,
    pub eps: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub delta: f64,
    pub c0: f64,
    /// `ρ = c0/2`, the constant the energy inequality is stated with.
    pub rho: f64,
    pub c_star: f64,
    pub x_norm_h: f64,
    /// Theoretical floor `1 − c*‖x‖^{2-α}/T` (clamped at 0).
    pub prob_floor: f64,
    /// Theoretical mean bound `c*‖x‖^{2-α}`.
    pub mean_bound: f64,
    pub extinct_count: u64,
    pub prob_empirical: f64,
    pub prob_se: f64,
    pub prob_wilson: (f64, f64),
    /// Censored-at-T mean: a valid lower bound for `E τ_e^ε`.
    pub mean_tau_censored: f64,
    pub mean_tau_censored_se: f64,
    /// Mean over the uncensored samples only (second bracketing column).
    pub mean_tau_observed: Option<f64>,
    pub prob_pass: bool,
    pub mean_pass: bool,
    /// Same probability at the ε/10 threshold (sensitivity column).
    pub prob_empirical_tenth: f64,
    pub mean_tau_censored_tenth: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupermartingaleRow {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    /// `m(t_j) ≤ m(t_{j-1}) + 2·SE_{j-1}` (first row is the exact start value).
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupermartingaleTable {
    pub rows: Vec<SupermartingaleRow>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    /// `E‖X(t)‖^{2-α} + δρ^α(1−α/2)·E∫₀ᵗ 1_alive`
    pub lhs: f64,
    pub se: f64,
    /// `‖x‖^{2-α}`
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyTable {
    pub rows: Vec<EnergyRow>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEnvelope {
    /// `max_i sup_t ‖X_i(t)‖_H²`
    pub worst_sup_sq: f64,
    /// Desk-scale envelope `10·‖x‖_H²`.
    pub envelope: f64,
    pub pass: bool,
}

/// Full study output: report, proof-skeleton checks, and per-trajectory τ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtinctionStudy {
    pub report: ExtinctionReport,
    pub supermartingale: SupermartingaleTable,
    pub energy: EnergyTable,
    pub moment: MomentEnvelope,
    pub checkpoints: Vec<f64>,
    pub samples: Vec<TauSample>,
}

fn validate_extinction_setting(cfg: &SimConfig) -> Result<(f64, f64), Error> {
    let a = cfg.op.assumptions();
    if !(a.alpha > 1.0 && a.alpha < 2.0) {
        return Err(Error::invalid(
            "extinction bounds are vacuous outside alpha in (1,2); rejecting the run",
        ));
    }
    if a.delta <= 0.0 {
        return Err(Error::invalid("extinction bounds need a coercive operator (delta > 0)"));
    }
    if !matches!(cfg.drift, SingleValuedDrift::Zero) {
        return Err(Error::invalid("the extinction setting runs with B = 0 (f ≡ 0)"));
    }
    // (H_σ*) with f ≡ 0: (α-1)h(t) ≥ 0 holds for any noise model
    Ok((a.alpha, a.delta))
}

/// Runs the full extinction study: `n` seeded trajectories, the τ statistics
/// against the theoretical floor and mean bound, the supermartingale and
/// energy-inequality tables on `n_checkpoints` equispaced times, the moment
/// envelope, and the ε/10 sensitivity companion (same Brownian paths).
pub fn run_extinction_study(
    cfg: &SimConfig,
    n: u64,
    n_checkpoints: usize,
) -> Result<ExtinctionStudy, Error> {
    let (alpha, delta) = validate_extinction_setting(cfg)?;
    if n < 100 {
        return Err(Error::invalid("Monte Carlo extinction needs N >= 100"));
    }
    let t_end = cfg.horizon;
    let checkpoints: Vec<f64> =
        (1..=n_checkpoints.max(1)).map(|j| t_end * j as f64 / n_checkpoints.max(1) as f64).collect();

    let mut main_cfg = cfg.clone();
    main_cfg.checkpoints = checkpoints.clone();
    main_cfg.keep_snapshots = false;
    main_cfg.validate()?;

    let trajs = simulate_batch(&main_cfg, n)?;

    // companion run at ε/10 for the sensitivity column; the time-step chatter
    // floor of the explicit scheme scales like Δt², so reaching a 10× smaller
    // threshold needs Δt/√10
    let mut tenth_cfg = main_cfg.clone();
    tenth_cfg.eps_extinct = cfg.eps_extinct / 10.0;
    tenth_cfg.dt = cfg.dt / 10f64.sqrt();
    let tenth: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| crate::sde::simulate(&tenth_cfg, i).map(|t| t.extinction_time))
        .collect::<Result<Vec<_>, _>>()?;

    let x_norm_h = cfg.op.triple().h_norm(&cfg.initial);
    let c0 = embedding_constant(cfg.op.triple(), cfg.grid())?;
    let cstar = c_star(delta, alpha, c0)?;
    let mean_bound = cstar * x_norm_h.powf(2.0 - alpha);
    let prob_floor = (1.0 - mean_bound / t_end).max(0.0);

    let samples: Vec<TauSample> = trajs
        .iter()
        .zip(&tenth)
        .map(|(t, tt)| TauSample { index: t.index, tau: t.extinction_time, tau_tenth: *tt })
        .collect();

    let extinct: u64 = samples.iter().filter(|s| s.tau.is_some()).count() as u64;
    let p_hat = extinct as f64 / n as f64;
    let prob_se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    let censored: Vec<f64> = samples.iter().map(|s| s.tau.unwrap_or(t_end)).collect();
    let (mean_cens, mean_cens_se) = mean_se(&censored);
    let observed: Vec<f64> = samples.iter().filter_map(|s| s.tau).collect();
    let mean_obs = if observed.is_empty() { None } else { Some(mean_se(&observed).0) };

    let extinct_tenth = samples.iter().filter(|s| s.tau_tenth.is_some()).count() as u64;
    let censored_tenth: Vec<f64> = samples.iter().map(|s| s.tau_tenth.unwrap_or(t_end)).collect();

    let rel_se = if mean_cens > 0.0 { mean_cens_se / mean_cens } else { 0.0 };
    let report = ExtinctionReport {
        n_traj: n,
        eps: cfg.eps_extinct,
        horizon: t_end,
        alpha,
        delta,
        c0,
        rho: c0 / 2.0,
        c_star: cstar,
        x_norm_h,
        prob_floor,
        mean_bound,
        extinct_count: extinct,
        prob_empirical: p_hat,
        prob_se,
        prob_wilson: wilson_interval(extinct, n),
        mean_tau_censored: mean_cens,
        mean_tau_censored_se: mean_cens_se,
        mean_tau_observed: mean_obs,
        prob_pass: p_hat >= prob_floor - 3.0 * prob_se,
        mean_pass: mean_cens <= mean_bound * (1.0 + 3.0 * rel_se),
        prob_empirical_tenth: extinct_tenth as f64 / n as f64,
        mean_tau_censored_tenth: mean_se(&censored_tenth).0,
    };

    let supermartingale = supermartingale_table(&trajs, &checkpoints, alpha, x_norm_h);
    let energy = energy_table(&trajs, &checkpoints, alpha, delta, c0, x_norm_h, t_end);
    let moment = moment_envelope(&trajs, x_norm_h);

    Ok(ExtinctionStudy { report, supermartingale, energy, moment, checkpoints, samples })
}

fn supermartingale_table(
    trajs: &[Trajectory],
    checkpoints: &[f64],
    alpha: f64,
    x_norm_h: f64,
) -> SupermartingaleTable {
    let mut rows = Vec::with_capacity(checkpoints.len() + 1);
    let m0 = x_norm_h.powf(2.0 - alpha);
    rows.push(SupermartingaleRow { t: 0.0, mean: m0, se: 0.0, pass: true });
    let mut prev_mean = m0;
    let mut prev_se = 0.0_f64;
    let mut passed = true;
    for (j, &t) in checkpoints.iter().enumerate() {
        let vals: Vec<f64> = trajs
            .iter()
            .map(|tr| {
                let h = tr.checkpoint_norm_h.get(j).copied().unwrap_or(0.0);
                if h == 0.0 { 0.0 } else { h.powf(2.0 - alpha) }
            })
            .collect();
        let (mean, se) = mean_se(&vals);
        let pass = mean <= prev_mean + 2.0 * prev_se.max(se);
        passed &= pass;
        rows.push(SupermartingaleRow { t, mean, se, pass });
        prev_mean = mean;
        prev_se = se;
    }
    SupermartingaleTable { rows, passed }
}

fn energy_table(
    trajs: &[Trajectory],
    checkpoints: &[f64],
    alpha: f64,
    delta: f64,
    c0: f64,
    x_norm_h: f64,
    horizon: f64,
) -> EnergyTable {
    let rho = c0 / 2.0;
    let k = delta * rho.powf(alpha) * (1.0 - alpha / 2.0);
    let rhs = x_norm_h.powf(2.0 - alpha);
    let mut rows = Vec::new();
    let mut passed = true;
    for (j, &t) in checkpoints.iter().enumerate() {
        let vals: Vec<f64> = trajs
            .iter()
            .map(|tr| {
                let h = tr.checkpoint_norm_h.get(j).copied().unwrap_or(0.0);
                let pow = if h == 0.0 { 0.0 } else { h.powf(2.0 - alpha) };
                let alive = tr.extinction_time.unwrap_or(horizon).min(t);
                pow + k * alive
            })
            .collect();
        let (lhs, se) = mean_se(&vals);
        let pass = lhs <= rhs + 2.0 * se;
        passed &= pass;
        rows.push(EnergyRow { t, lhs, se, rhs, pass });
    }
    EnergyTable { rows, passed }
}

fn moment_envelope(trajs: &[Trajectory], x_norm_h: f64) -> MomentEnvelope {
    let worst = trajs.iter().fold(0.0_f64, |m, t| m.max(t.sup_norm_h * t.sup_norm_h));
    let envelope = 10.0 * x_norm_h * x_norm_h;
    MomentEnvelope { worst_sup_sq: worst, envelope, pass: worst <= envelope }
}

/// Standalone supermartingale check (spec surface): runs `n` trajectories and
/// tests `m(t_{j+1}) ≤ m(t_j) + 2·SE_j` on the checkpoint grid.
pub fn supermartingale_check(
    cfg: &SimConfig,
    n: u64,
    checkpoints: &[f64],
) -> Result<SupermartingaleTable, Error> {
    let (alpha, _) = validate_extinction_setting(cfg)?;
    let mut c = cfg.clone();
    c.checkpoints = checkpoints.to_vec();
    c.keep_snapshots = false;
    let trajs = simulate_batch(&c, n)?;
    let x_norm_h = cfg.op.triple().h_norm(&cfg.initial);
    Ok(supermartingale_table(&trajs, checkpoints, alpha, x_norm_h))
}

/// Standalone energy-inequality check (spec surface).
pub fn energy_inequality_check(
    cfg: &SimConfig,
    n: u64,
    checkpoints: &[f64],
) -> Result<EnergyTable, Error> {
    let (alpha, delta) = validate_extinction_setting(cfg)?;
    let mut c = cfg.clone();
    c.checkpoints = checkpoints.to_vec();
    c.keep_snapshots = false;
    let trajs = simulate_batch(&c, n)?;
    let x_norm_h = cfg.op.triple().h_norm(&cfg.initial);
    let c0 = embedding_constant(cfg.op.triple(), cfg.grid())?;
    Ok(energy_table(&trajs, checkpoints, alpha, delta, c0, x_norm_h, cfg.horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_star_formula() {
        // δ=1, α=1.5, c0=2 → 1/(1·1·0.25) = 4
        assert!((c_star(1.0, 1.5, 2.0).unwrap() - 4.0).abs() < 1e-14);
        // α → 2⁻ diverges
        assert!(c_star(1.0, 1.999999, 2.0).unwrap() > 1e5);
        // doubling c0 scales by 2^{-α}
        let a = c_star(1.0, 1.5, 1.0).unwrap();
        let b = c_star(1.0, 1.5, 2.0).unwrap();
        assert!((b / a - 2f64.powf(-1.5)).abs() < 1e-12);
        // α outside (1,2) rejected
        assert!(c_star(1.0, 2.5, 1.0).is_err());
        assert!(c_star(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn horizon_floor_roundtrip() {
        let cstar = 4.0;
        let x = 0.3;
        let alpha = 1.5;
        let t = horizon_for_floor(cstar, x, alpha, 0.5).unwrap();
        let floor = 1.0 - cstar * x.powf(2.0 - alpha) / t;
        assert!((floor - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bound_monotonicity() {
        // floor increasing in T, decreasing in ‖x‖ for α < 2
        let cstar = 4.0;
        let alpha = 1.5;
        let floor = |t: f64, x: f64| 1.0 - cstar * x.powf(2.0 - alpha) / t;
        assert!(floor(2.0, 0.3) > floor(1.0, 0.3));
        assert!(floor(1.0, 0.4) < floor(1.0, 0.3));
    }

    #[test]
    fn wilson_basic() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.94 && hi == 1.0);
    }
}
