//! Empirical ergodicity instrumentation: exponential drift ratios,
//! tail-increment stationarity tests, return-time statistics, oracle
//! robustness checks, and the uniform/geometric/non-geometric
//! classifier.
//!
//! The uniform verdict is anchored on the oracle tail-probability check
//! (a theorem-backed sufficient condition), evaluated before the
//! simulation-based rules: partial tightness of the updated block implies
//! uniform ergodicity outright, whereas the simulation evidence about a
//! finite chain segment can only support or contradict geometric decay.


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{init_state, one_step_grouped_x, one_step_theta, step};
use crate::model::{HierModel, Parametrisation, Stability};
use crate::oracle::{cdf_distance, conditional_mean, conditional_tail_prob, Frame, Reference};
use crate::quad::QuadConfig;
use crate::slice::SliceConfig;
use crate::stats::{ks_two_sample, mean, median, quantile};
use crate::{chain_rng, ChainRng};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    /// Drift exponent in `V(θ) = e^{α|θ|}`; small so light-tailed cells
    /// keep finite moment generating functions.
    pub alpha: f64,
    /// Strictly increasing tail rungs standing in for |θ| → ∞.
    pub theta_ladder: Vec<f64>,
    /// One-step replications per rung.
    pub n_rep: usize,
    /// Radius of the mode set for tightness and return times.
    pub mode_radius: f64,
    /// Two-sample KS level under which consecutive rungs count as
    /// increment-stationary (random-walk-like).
    pub ks_threshold: f64,
    /// Drift ratios must stay below this at every rung for an
    /// unambiguous geometric verdict.
    pub drift_threshold: f64,
    /// The oracle tightness check requires tail mass ≤ 1 − this margin
    /// at every rung.
    pub ptip_margin: f64,
    /// Slice sweeps used to refresh X from its conditional in one-step
    /// protocols.
    pub refresh_sweeps: usize,
    /// Seeds per return-time experiment.
    pub return_seeds: u64,
    /// Censoring horizon for return times.
    pub return_max_iter: usize,
    /// Return times at or under this bound (in sweeps, median over
    /// seeds) count as confirming uniform behaviour. Calibration choice,
    /// reported in the evidence text.
    pub uniform_return_envelope: f64,
}

impl Default for DiagConfig {
    fn default() -> Self {
        DiagConfig {
            alpha: 0.05,
            theta_ladder: vec![1e2, 1e3, 1e4],
            n_rep: 10_000,
            mode_radius: 10.0,
            ks_threshold: 0.05,
            drift_threshold: 0.95,
            ptip_margin: 0.05,
            refresh_sweeps: 16,
            return_seeds: 20,
            return_max_iter: 2000,
            uniform_return_envelope: 100.0,
        }
    }
}

impl DiagConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in [0, 1)".into()));
        }
        if self.theta_ladder.len() < 2 || self.theta_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "theta_ladder must be strictly increasing with at least two rungs".into(),
            ));
        }
        if self.n_rep < 1000 {
            return Err(Error::InvalidConfig("n_rep must be at least 10^3".into()));
        }
        if !(self.mode_radius > 0.0) {
            return Err(Error::InvalidConfig("mode_radius must be positive".into()));
        }
        Ok(())
    }
}

/// One-step θ (or grouped X) draws from a rung; the shared engine behind
/// the drift and increment diagnostics.
fn one_step_batch(
    kernel: Parametrisation,
    model: &HierModel,
    anchor: f64,
    n_rep: usize,
    sweeps: usize,
    rng: &mut ChainRng,
    slice_cfg: &SliceConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_rep);
    if let Parametrisation::Grouped = kernel {
        let x0 = vec![anchor; model.n_effects()];
        for _ in 0..n_rep {
            out.push(one_step_grouped_x(model, &x0, slice_cfg, rng)?[0]);
        }
    } else {
        for _ in 0..n_rep {
            out.push(one_step_theta(kernel, model, anchor, sweeps, slice_cfg, rng)?);
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of `E[e^{α|Θ1|} | θ0] / e^{α|θ0|}` with its
/// standard error, from `n_rep` independent one-step draws. Computed in
/// shifted log space so far rungs cannot overflow.
pub fn drift_ratio(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    alpha: f64,
    n_rep: usize,
    seed: u64,
    cfg: &DiagConfig,
) -> Result<(f64, f64)> {
    let slice_cfg = SliceConfig::default();
    let mut rng = chain_rng(seed, 0);
    let draws = one_step_batch(
        kernel,
        model,
        theta0,
        n_rep,
        cfg.refresh_sweeps,
        &mut rng,
        &slice_cfg,
    )?;
    Ok(drift_from_draws(&draws, theta0, alpha))
}

fn drift_from_draws(draws: &[f64], theta0: f64, alpha: f64) -> (f64, f64) {
    let logs: Vec<f64> = draws.iter().map(|t| alpha * t.abs()).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let m = mean(&scaled);
    let sd = crate::stats::variance(&scaled).sqrt();
    let factor = (peak - alpha * theta0.abs()).exp();
    (
        factor * m,
        factor * sd / (draws.len() as f64).sqrt(),
    )
}

/// Increment-law stationarity along the rung ladder: the two-sample KS
/// between increments at consecutive rungs, and (when a limit law is
/// registered) one-sample KS against it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IncrementTests {
    pub rungs: Vec<f64>,
    pub ks_consecutive: Vec<f64>,
    pub ks_vs_limit: Option<Vec<f64>>,
}

pub fn increment_stationarity(
    kernel: Parametrisation,
    model: &HierModel,
    theta_ladder: &[f64],
    n_rep: usize,
    seed: u64,
    cfg: &DiagConfig,
    limit_cdf: Option<&dyn Fn(f64) -> f64>,
) -> Result<IncrementTests> {
    assert!(theta_ladder.len() >= 2, "need at least two rungs");
    let slice_cfg = SliceConfig::default();
    let mut batches = Vec::with_capacity(theta_ladder.len());
    for (i, rung) in theta_ladder.iter().enumerate() {
        let mut rng = chain_rng(seed, i as u64);
        let draws = one_step_batch(
            kernel,
            model,
            *rung,
            n_rep,
            cfg.refresh_sweeps,
            &mut rng,
            &slice_cfg,
        )?;
        batches.push(draws.iter().map(|t| t - rung).collect::<Vec<f64>>());
    }
    let ks_consecutive = batches
        .windows(2)
        .map(|w| ks_two_sample(&w[0], &w[1]))
        .collect();
    let ks_vs_limit = limit_cdf.map(|cdf| {
        batches
            .iter()
            .map(|b| crate::stats::ks_one_sample(b, cdf))
            .collect()
    });
    Ok(IncrementTests {
        rungs: theta_ladder.to_vec(),
        ks_consecutive,
        ks_vs_limit,
    })
}

/// Return-time quantiles from `theta0` into the mode set {|θ| ≤ k}.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReturnTimes {
    pub theta0: f64,
    pub mode_radius: f64,
    pub max_iter: usize,
    /// First hitting sweep per seed; censored runs carry `max_iter`.
    pub times: Vec<usize>,
    pub censored: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn return_time(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    mode_radius: f64,
    max_iter: usize,
    seeds: &[u64],
    base_seed: u64,
) -> Result<ReturnTimes> {
    let slice_cfg = SliceConfig::default();
    let grouped = matches!(kernel, Parametrisation::Grouped);
    let mut times = Vec::with_capacity(seeds.len());
    let mut censored = 0usize;
    for s in seeds {
        let mut rng = chain_rng(base_seed, *s);
        if theta0.abs() <= mode_radius {
            times.push(0);
            continue;
        }
        let mut state = init_state(kernel, model, theta0, &slice_cfg, &mut rng)?;
        // The grouped scheme is monitored on the X chain.
        if grouped {
            state.x = vec![theta0; model.n_effects()];
        }
        let mut hit = max_iter;
        for n in 1..=max_iter {
            state = step(kernel, model, &state, &slice_cfg, &mut rng)?;
            let monitored = if grouped { state.x[0] } else { state.theta };
            if monitored.abs() <= mode_radius {
                hit = n;
                break;
            }
        }
        if hit == max_iter {
            censored += 1;
        }
        times.push(hit);
    }
    let as_f: Vec<f64> = times.iter().map(|t| *t as f64).collect();
    Ok(ReturnTimes {
        theta0,
        mode_radius,
        max_iter,
        median: median(&as_f),
        q25: quantile(&as_f, 0.25),
        q75: quantile(&as_f, 0.75),
        times,
        censored,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftPoint {
    pub theta0: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// Full diagnostic record for one (model, kernel) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub model_id: String,
    pub kernel_id: String,
    pub seed: u64,
    pub drift_curve: Vec<DriftPoint>,
    pub increment_tests: IncrementTests,
    pub return_times: ReturnTimes,
    pub oracle_ptip: Option<Vec<f64>>,
    pub classification: Stability,
    pub evidence: String,
    pub config: DiagConfig,
}

/// Run an oracle query with tolerance escalation: the cubic exponents of
/// the lighter-than-Gaussian cells hit the f64 cancellation noise floor
/// (relative ~1e-5 at rungs near 10^4), so the default 1e-9 target can be
/// unattainable even though the value is far more accurate than any
/// diagnostic margin needs. Each retry still reports honest error
/// estimates; only genuinely non-quadrature failures propagate.
fn with_escalation<T>(mut op: impl FnMut(&QuadConfig) -> Result<T>) -> Result<T> {
    let mut last = None;
    for rel_tol in [1e-9, 1e-6, 1e-4] {
        let qcfg = QuadConfig {
            rel_tol,
            ..QuadConfig::default()
        };
        match op(&qcfg) {
            Ok(v) => return Ok(v),
            Err(e @ Error::QuadratureNonConvergence { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Oracle tail mass of the updated block at one rung, in the frame the
/// kernel updates.
fn block_tail_prob(
    model: &HierModel,
    kernel: Parametrisation,
    rung: f64,
    k: f64,
) -> Result<Option<f64>> {
    let frame = match kernel {
        Parametrisation::Centred => Some(Frame::Centred),
        Parametrisation::NonCentred => Some(Frame::NonCentred),
        _ => None,
    };
    match frame {
        Some(f) => with_escalation(|q| conditional_tail_prob(model, rung, k, f, q)).map(Some),
        None => Ok(None),
    }
}

/// Classify the kernel on this model as uniformly ergodic, geometrically
/// ergodic, or sub-geometric.
///
/// Rule order: (i) uniform when the oracle shows the updated block stays
/// partially tight along the whole rung ladder (sufficient for uniform
/// ergodicity; return times are reported as corroborating evidence);
/// (ii) sub-geometric when the tail increments are stationary across the
/// largest rungs and the drift ratio at the top rung is not below one;
/// (iii) geometric otherwise, flagged as ambiguous when some drift ratio
/// exceeds the configured threshold.
pub fn classify(
    kernel: Parametrisation,
    model: &HierModel,
    cfg: &DiagConfig,
    seed: u64,
) -> Result<StabilityReport> {
    cfg.validate()?;
    kernel.validate(model)?;
    let slice_cfg = SliceConfig::default();
    let scalar = model.n_effects() == 1 && model.y[0].len() == 1;

    // One-step batches per rung, shared by the drift and increment tests.
    let mut batches: Vec<Vec<f64>> = Vec::with_capacity(cfg.theta_ladder.len());
    for (i, rung) in cfg.theta_ladder.iter().enumerate() {
        let mut rng = chain_rng(seed, i as u64);
        batches.push(one_step_batch(
            kernel,
            model,
            *rung,
            cfg.n_rep,
            cfg.refresh_sweeps,
            &mut rng,
            &slice_cfg,
        )?);
    }
    let drift_curve: Vec<DriftPoint> = cfg
        .theta_ladder
        .iter()
        .zip(&batches)
        .map(|(rung, draws)| {
            let (ratio, stderr) = drift_from_draws(draws, *rung, cfg.alpha);
            DriftPoint {
                theta0: *rung,
                ratio,
                stderr,
            }
        })
        .collect();
    let increments: Vec<Vec<f64>> = cfg
        .theta_ladder
        .iter()
        .zip(&batches)
        .map(|(rung, draws)| draws.iter().map(|t| t - rung).collect())
        .collect();
    let ks_consecutive: Vec<f64> = increments
        .windows(2)
        .map(|w| ks_two_sample(&w[0], &w[1]))
        .collect();
    let increment_tests = IncrementTests {
        rungs: cfg.theta_ladder.clone(),
        ks_consecutive: ks_consecutive.clone(),
        ks_vs_limit: None,
    };

    // Oracle tightness of the updated block (scalar models, P0/P1 and the
    // hybrid through either of its components).
    let oracle_ptip = if scalar {
        match kernel {
            Parametrisation::Centred | Parametrisation::NonCentred => {
                let mut v = Vec::new();
                for rung in &cfg.theta_ladder {
                    v.push(
                        block_tail_prob(model, kernel, *rung, cfg.mode_radius)?
                            .expect("frame exists"),
                    );
                }
                Some(v)
            }
            Parametrisation::Hybrid { .. } => {
                // A mixture inherits uniform ergodicity from either
                // component, so tightness of either frame counts.
                let mut best = Vec::new();
                for rung in &cfg.theta_ladder {
                    let c = with_escalation(|q| {
                        conditional_tail_prob(model, *rung, cfg.mode_radius, Frame::Centred, q)
                    })?;
                    let n = with_escalation(|q| {
                        conditional_tail_prob(model, *rung, cfg.mode_radius, Frame::NonCentred, q)
                    })?;
                    best.push(c.min(n));
                }
                Some(best)
            }
            _ => None,
        }
    } else {
        None
    };
    let ptip_pass = oracle_ptip
        .as_ref()
        .map(|v| v.iter().all(|p| *p <= 1.0 - cfg.ptip_margin))
        .unwrap_or(false);

    // Return times from the largest rung.
    let top = *cfg.theta_ladder.last().unwrap();
    let seeds: Vec<u64> = (0..cfg.return_seeds).collect();
    let return_times = return_time(
        kernel,
        model,
        top,
        cfg.mode_radius,
        cfg.return_max_iter,
        &seeds,
        seed.wrapping_add(0x5eed),
    )?;

    let rw_flag = ks_consecutive
        .last()
        .map(|ks| *ks <= cfg.ks_threshold)
        .unwrap_or(false);
    let top_drift = drift_curve.last().unwrap();
    let drift_not_contracting = top_drift.ratio >= 1.0 - 2.0 * top_drift.stderr;
    let drift_all_below = drift_curve
        .iter()
        .all(|d| d.ratio <= cfg.drift_threshold);

    let (classification, evidence) = if ptip_pass {
        let confirm = if return_times.censored == 0
            && return_times.median <= cfg.uniform_return_envelope
        {
            format!(
                "return times confirm (median {} <= envelope {})",
                return_times.median, cfg.uniform_return_envelope
            )
        } else {
            format!(
                "return times do not confirm (median {}, {} censored at {}): the \
                 implemented conditional sampler separates far modes, so the \
                 oracle tightness rule decides",
                return_times.median, return_times.censored, return_times.max_iter
            )
        };
        (
            Stability::Uniform,
            format!(
                "oracle tail mass of the updated block stays bounded along the ladder \
                 (max {:.3} <= {:.3}); {confirm}",
                oracle_ptip
                    .as_ref()
                    .unwrap()
                    .iter()
                    .cloned()
                    .fold(0.0, f64::max),
                1.0 - cfg.ptip_margin
            ),
        )
    } else if rw_flag && drift_not_contracting {
        (
            Stability::NonGeometric,
            format!(
                "tail increments stationary across the top rungs (KS {:.3} <= {:.3}) \
                 and the drift ratio at the top rung is not below one ({:.4} +- {:.4})",
                ks_consecutive.last().unwrap(),
                cfg.ks_threshold,
                top_drift.ratio,
                top_drift.stderr
            ),
        )
    } else if drift_all_below {
        (
            Stability::Geometric,
            format!(
                "drift ratios contract at every rung (max {:.4} <= {:.2}) and no \
                 uniform/sub-geometric rule fired",
                drift_curve
                    .iter()
                    .map(|d| d.ratio)
                    .fold(f64::NEG_INFINITY, f64::max),
                cfg.drift_threshold
            ),
        )
    } else {
        (
            Stability::Geometric,
            format!(
                "ambiguous evidence: drift ratio reaches {:.4} (> threshold {:.2}) but the \
                 sub-geometric rule did not fire (KS {:.3}, top drift {:.4} +- {:.4})",
                drift_curve
                    .iter()
                    .map(|d| d.ratio)
                    .fold(f64::NEG_INFINITY, f64::max),
                cfg.drift_threshold,
                ks_consecutive.last().unwrap(),
                top_drift.ratio,
                top_drift.stderr
            ),
        )
    };

    Ok(StabilityReport {
        model_id: format!(
            "{}(s1={},s2={})",
            model.cell_id(),
            model.f1.scale(),
            model.f2.scale()
        ),
        kernel_id: kernel.id(),
        seed,
        drift_curve,
        increment_tests,
        return_times,
        oracle_ptip,
        classification,
        evidence,
        config: cfg.clone(),
    })
}

/// Oracle-ladder verdicts for the robustness properties of the model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub rip: bool,
    pub rid: bool,
    pub dur: bool,
    pub pur: bool,
    pub ptip_p0: bool,
    pub ptip_p1: bool,
    pub rip_distances: Vec<f64>,
    pub rid_distances: Vec<f64>,
    /// `|θ| − |E[X|θ]|` per rung; a uniform positive gap is the DUR pull.
    pub dur_gaps: Vec<f64>,
    /// `sgn(θ)(E[X|θ] − y)` per rung; a uniform positive gap is PUR.
    pub pur_gaps: Vec<f64>,
    pub ptip_p0_tails: Vec<f64>,
    pub ptip_p1_tails: Vec<f64>,
}

pub fn property_check(model: &HierModel, cfg: &DiagConfig) -> Result<PropertyRecord> {
    cfg.validate()?;
    let y = model.scalar_y()?;
    let ladder = &cfg.theta_ladder;

    let mut rip_distances = Vec::new();
    let mut rid_distances = Vec::new();
    let mut dur_gaps = Vec::new();
    let mut pur_gaps = Vec::new();
    let mut ptip_p0_tails = Vec::new();
    let mut ptip_p1_tails = Vec::new();
    for rung in ladder {
        rip_distances.push(with_escalation(|q| {
            cdf_distance(
                model,
                *rung,
                Frame::Centred,
                Reference::Shifted {
                    dist: model.f1,
                    shift: y,
                },
                q,
            )
        })?);
        rid_distances.push(with_escalation(|q| {
            cdf_distance(
                model,
                *rung,
                Frame::NonCentred,
                Reference::Shifted {
                    dist: model.f2,
                    shift: 0.0,
                },
                q,
            )
        })?);
        let m = with_escalation(|q| conditional_mean(model, *rung, q))?;
        dur_gaps.push(rung.abs() - m.abs());
        pur_gaps.push(rung.signum() * (m - y));
        ptip_p0_tails.push(with_escalation(|q| {
            conditional_tail_prob(model, *rung, cfg.mode_radius, Frame::Centred, q)
        })?);
        ptip_p1_tails.push(with_escalation(|q| {
            conditional_tail_prob(model, *rung, cfg.mode_radius, Frame::NonCentred, q)
        })?);
    }

    let nonincreasing =
        |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let rip = rip_distances.last().map(|d| *d <= 0.01).unwrap_or(false)
        && nonincreasing(&rip_distances);
    let rid = rid_distances.last().map(|d| *d <= 0.01).unwrap_or(false)
        && nonincreasing(&rid_distances);
    let dur = dur_gaps.iter().all(|g| *g >= 1e-2);
    let pur = pur_gaps.iter().all(|g| *g >= 1e-2);
    let ptip_p0 = ptip_p0_tails.iter().all(|p| *p <= 1.0 - cfg.ptip_margin);
    let ptip_p1 = ptip_p1_tails.iter().all(|p| *p <= 1.0 - cfg.ptip_margin);

    Ok(PropertyRecord {
        rip,
        rid,
        dur,
        pur,
        ptip_p0,
        ptip_p1,
        rip_distances,
        rid_distances,
        dur_gaps,
        pur_gaps,
        ptip_p0_tails,
        ptip_p1_tails,
    })
}
