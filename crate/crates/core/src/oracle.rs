//! Deterministic quadrature ground truth for the scalar model:
//! conditional normalizers, moments, tail probabilities, the marginal
//! posterior of Θ, CDF distances to reference laws, and the closed-form
//! Gaussian rate.
//!
//! Everything integrates through the `x = c + s·tan(u)` substitution, so
//! heavy (Cauchy) tails carry no truncation bias: there is no cutoff
//! radius anywhere, only the declared tolerances.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::error_dist::ErrorDist;
use crate::model::HierModel;
use crate::quad::{integrate, integrate_tan, QuadConfig, QuadResult};

/// Whether a conditional quantity is taken in the centred frame (the law
/// of X) or the non-centred frame (the law of X̃ = X − θ).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Centred,
    NonCentred,
}

/// Reference law for CDF distances.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "reference", rename_all = "snake_case")]
pub enum Reference {
    Normal { mean: f64, var: f64 },
    /// The law of `dist + shift`.
    Shifted { dist: ErrorDist, shift: f64 },
    /// The quadrature law itself (zero distance; a self-test hook).
    SelfQuadrature,
}

fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (var.sqrt() * std::f64::consts::SQRT_2))
}

/// The scalar conditional density of X at a fixed θ, evaluated in
/// max-log-shifted space so that very light-tailed cells (where the whole
/// product underflows f64) still integrate to usable ratios.
struct Cond<'a> {
    model: &'a HierModel,
    y: f64,
    theta: f64,
    /// `exp(shift)` scales the shifted integrals back to absolute ones.
    shift: f64,
    center: f64,
    scale: f64,
    bps: Vec<f64>,
}

impl<'a> Cond<'a> {
    fn new(model: &'a HierModel, theta: f64) -> Result<Self> {
        let y = model.scalar_y()?;
        let (s1, s2) = (model.f1.scale(), model.f2.scale());
        let log_f =
            |x: f64| model.f1.log_density(y - x) + model.f2.log_density(x - theta);
        // Locate the global log-density peak: coarse scans over both bump
        // windows and the segment between them, then a golden-section
        // refinement around the best point of each scan. Light-tailed
        // cells concentrate in a spike between the bumps whose location
        // must be pinned accurately or the shifted integrand overflows.
        let best_of = |lo: f64, hi: f64, n: usize| -> (f64, f64) {
            let mut bx = lo;
            let mut bv = f64::NEG_INFINITY;
            for i in 0..=n {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                let v = log_f(x);
                if v > bv {
                    bv = v;
                    bx = x;
                }
            }
            (bx, (hi - lo) / n as f64)
        };
        let mut candidates = vec![
            best_of(y - 8.0 * s1, y + 8.0 * s1, 64),
            best_of(theta - 8.0 * s2, theta + 8.0 * s2, 64),
        ];
        if (theta - y).abs() > 0.0 {
            candidates.push(best_of(y.min(theta), y.max(theta), 256));
        }
        let mut peak_x = y;
        let mut shift = f64::NEG_INFINITY;
        for (bx, gap) in candidates {
            // Golden-section refinement inside the bracketing cell.
            let r = 0.5 * (5.0_f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (bx - gap, bx + gap);
            let mut x1 = hi - r * (hi - lo);
            let mut x2 = lo + r * (hi - lo);
            let (mut v1, mut v2) = (log_f(x1), log_f(x2));
            for _ in 0..80 {
                if v1 < v2 {
                    lo = x1;
                    x1 = x2;
                    v1 = v2;
                    x2 = lo + r * (hi - lo);
                    v2 = log_f(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    v2 = v1;
                    x1 = hi - r * (hi - lo);
                    v1 = log_f(x1);
                }
            }
            let (vx, vv) = if v1 > v2 { (x1, v1) } else { (x2, v2) };
            if vv > shift {
                shift = vv;
                peak_x = vx;
            }
        }
        // Width of the peak from the second difference of the log
        // density; brackets the spike for the panel seeds.
        let h = (s1.min(s2) * 1e-3).max(1e-9 * (1.0 + peak_x.abs()));
        let curv = ((log_f(peak_x - h) - 2.0 * shift + log_f(peak_x + h)) / (h * h)).abs();
        let peak_w = if curv > 0.0 {
            (1.0 / curv.sqrt()).clamp(1e-6 * (s1 + s2), s1 + s2)
        } else {
            s1 + s2
        };
        let center = 0.5 * (y + theta);
        let scale = (theta - y).abs().max(s1 + s2);
        let bps = vec![
            y - 8.0 * s1,
            y,
            y + 8.0 * s1,
            theta - 8.0 * s2,
            theta,
            theta + 8.0 * s2,
            peak_x - 8.0 * peak_w,
            peak_x,
            peak_x + 8.0 * peak_w,
        ];
        Ok(Cond {
            model,
            y,
            theta,
            shift,
            center,
            scale,
            bps,
        })
    }

    fn g(&self, x: f64) -> f64 {
        (self.model.f1.log_density(self.y - x) + self.model.f2.log_density(x - self.theta)
            - self.shift)
            .exp()
    }

    /// Shifted mass over a possibly unbounded window.
    fn mass(&self, lo: Option<f64>, hi: Option<f64>, cfg: &QuadConfig) -> Result<f64> {
        integrate_tan(
            |x| self.g(x),
            self.center,
            self.scale,
            lo,
            hi,
            &self.bps,
            cfg,
        )
        .map(|r| r.value)
    }

    /// Shifted mass over a finite window (no substitution).
    fn mass_finite(&self, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
        integrate(|x| self.g(x), lo, hi, &self.bps, cfg).map(|r| r.value)
    }

    fn total(&self, cfg: &QuadConfig) -> Result<f64> {
        let t = self.mass(None, None, cfg)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::ImproperIntegral(format!(
                "conditional normalizer (shifted) {t} at theta={}",
                self.theta
            )));
        }
        Ok(t)
    }
}

/// `c_θ = ∫ f1(y−x) f2(x−θ) dx`, the conditional normalizing constant.
/// For extremely light-tailed cells at far θ the absolute value may
/// underflow f64 even though the shifted computation is exact.
pub fn normalizing_constant(model: &HierModel, theta: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    let cond = Cond::new(model, theta)?;
    let r = integrate_tan(
        |x| cond.g(x),
        cond.center,
        cond.scale,
        None,
        None,
        &cond.bps,
        cfg,
    )?;
    let s = cond.shift.exp();
    Ok(QuadResult {
        value: r.value * s,
        est_error: r.est_error * s,
        subdivisions: r.subdivisions,
    })
}

/// `E[X | Y=y, Θ=θ]` by quadrature of `x·f_θ(x)/c_θ`.
pub fn conditional_mean(model: &HierModel, theta: f64, cfg: &QuadConfig) -> Result<f64> {
    let cond = Cond::new(model, theta)?;
    let total = cond.total(cfg)?;
    let first = integrate_tan(
        |x| x * cond.g(x),
        cond.center,
        cond.scale,
        None,
        None,
        &cond.bps,
        cfg,
    )?
    .value;
    Ok(first / total)
}

/// `P(|X| > k | y, θ)` (centred frame) or `P(|X − θ| > k | y, θ)`
/// (non-centred frame), computed from the two one-sided tail integrals.
pub fn conditional_tail_prob(
    model: &HierModel,
    theta: f64,
    k: f64,
    frame: Frame,
    cfg: &QuadConfig,
) -> Result<f64> {
    assert!(k >= 0.0, "tail radius must be non-negative");
    if k == 0.0 {
        return Ok(1.0);
    }
    let cond = Cond::new(model, theta)?;
    let total = cond.total(cfg)?;
    let (lo, hi) = match frame {
        Frame::Centred => (-k, k),
        Frame::NonCentred => (theta - k, theta + k),
    };
    let below = cond.mass(None, Some(lo), cfg)?;
    let above = cond.mass(Some(hi), None, cfg)?;
    Ok(((below + above) / total).clamp(0.0, 1.0))
}

/// Interior mass `P(X ∈ [−k, k])` (or the θ-centred window), the
/// complement route used by the self-consistency check.
pub fn conditional_window_mass(
    model: &HierModel,
    theta: f64,
    k: f64,
    frame: Frame,
    cfg: &QuadConfig,
) -> Result<f64> {
    let cond = Cond::new(model, theta)?;
    let total = cond.total(cfg)?;
    let (lo, hi) = match frame {
        Frame::Centred => (-k, k),
        Frame::NonCentred => (theta - k, theta + k),
    };
    let inner = cond.mass_finite(lo, hi, cfg)?;
    Ok((inner / total).clamp(0.0, 1.0))
}

/// `P(|Θ| > a | y)` under the flat prior: the marginal density of Θ is
/// proportional to `c_θ`, integrated by the nested rule.
pub fn marginal_tail_prob(model: &HierModel, a: f64, cfg: &QuadConfig) -> Result<f64> {
    assert!(a >= 0.0);
    if a == 0.0 {
        return Ok(1.0);
    }
    let y = model.scalar_y()?;
    let (s1, s2) = (model.f1.scale(), model.f2.scale());
    // The inner integral runs at the same tolerance; its error folds into
    // the outer error estimate through the nested rule disagreement.
    let c_theta = |theta: f64| {
        Cond::new(model, theta)
            .and_then(|cond| cond.mass(None, None, cfg).map(|m| m * cond.shift.exp()))
            .unwrap_or(0.0)
    };
    let spread = s1 + s2;
    let bps = [y - 8.0 * spread, y, y + 8.0 * spread, -a, a];
    let total = integrate_tan(c_theta, y, spread, None, None, &bps, cfg)?.value;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ImproperIntegral(format!(
            "marginal normalizer {total}"
        )));
    }
    let below = integrate_tan(c_theta, y, spread, None, Some(-a), &bps, cfg)?.value;
    let above = integrate_tan(c_theta, y, spread, Some(a), None, &bps, cfg)?.value;
    Ok(((below + above) / total).clamp(0.0, 1.0))
}

/// A tabulated marginal posterior CDF of Θ on `[lo, hi]`, exact at the
/// nodes, for inverse-CDF initialisation of chains at stationarity.
pub struct MarginalTable {
    pub thetas: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl MarginalTable {
    /// Quantile by linear interpolation between exact nodes (clamped to
    /// the tabulated range).
    pub fn quantile(&self, prob: f64) -> f64 {
        let i = self.cdf.partition_point(|c| *c < prob);
        if i == 0 {
            return self.thetas[0];
        }
        if i >= self.cdf.len() {
            return *self.thetas.last().unwrap();
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (t0, t1) = (self.thetas[i - 1], self.thetas[i]);
        if c1 > c0 {
            t0 + (t1 - t0) * (prob - c0) / (c1 - c0)
        } else {
            t0
        }
    }
}

pub fn marginal_cdf_table(
    model: &HierModel,
    lo: f64,
    hi: f64,
    n: usize,
    cfg: &QuadConfig,
) -> Result<MarginalTable> {
    assert!(hi > lo && n >= 2);
    let y = model.scalar_y()?;
    let (s1, s2) = (model.f1.scale(), model.f2.scale());
    let c_theta = |theta: f64| {
        Cond::new(model, theta)
            .and_then(|cond| cond.mass(None, None, cfg).map(|m| m * cond.shift.exp()))
            .unwrap_or(0.0)
    };
    let spread = s1 + s2;
    let outer_bps = [y - 8.0 * spread, y, y + 8.0 * spread];
    let total = integrate_tan(c_theta, y, spread, None, None, &outer_bps, cfg)?.value;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ImproperIntegral(format!(
            "marginal normalizer {total}"
        )));
    }
    let thetas: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = integrate_tan(c_theta, y, spread, None, Some(lo), &outer_bps, cfg)?.value;
    cdf.push(acc / total);
    for w in thetas.windows(2) {
        acc += integrate(c_theta, w[0], w[1], &outer_bps, cfg)?.value;
        cdf.push((acc / total).min(1.0));
    }
    Ok(MarginalTable { thetas, cdf })
}

/// The closed-form convergence rate of the Gaussian model under the
/// partial centring `u = x − ρθ`, with `κ = σ2²/(σ1² + σ2²)`:
/// `r_ρ = (ρ − (1−κ))² / (ρ²κ + (1−ρ)²(1−κ))`.
pub fn gaussian_rate(sigma1: f64, sigma2: f64, rho: f64) -> f64 {
    assert!(sigma1 > 0.0 && sigma2 > 0.0 && (0.0..=1.0).contains(&rho));
    let kappa = sigma2 * sigma2 / (sigma1 * sigma1 + sigma2 * sigma2);
    let num = (rho - (1.0 - kappa)).powi(2);
    let den = rho * rho * kappa + (1.0 - rho) * (1.0 - rho) * (1.0 - kappa);
    num / den
}

fn reference_cdf(reference: &Reference, t: f64) -> f64 {
    match reference {
        Reference::Normal { mean, var } => normal_cdf(t, *mean, *var),
        Reference::Shifted { dist, shift } => dist.cdf(t - shift),
        Reference::SelfQuadrature => unreachable!("handled by caller"),
    }
}

/// Invert a CDF by bisection on `[lo, hi]`.
fn cdf_inv<F: Fn(f64) -> f64>(cdf: F, prob: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sup-distance over a quantile-aware grid between the quadrature CDF of
/// the conditional (in the chosen frame) and a reference law.
pub fn cdf_distance(
    model: &HierModel,
    theta: f64,
    frame: Frame,
    reference: Reference,
    cfg: &QuadConfig,
) -> Result<f64> {
    if matches!(reference, Reference::SelfQuadrature) {
        return Ok(0.0);
    }
    let cond = Cond::new(model, theta)?;
    let total = cond.total(cfg)?;
    let (s1, s2) = (model.f1.scale(), model.f2.scale());

    // Grid in frame coordinates: reference quantiles plus local windows
    // around both (frame-mapped) density bumps.
    let shift = match frame {
        Frame::Centred => 0.0,
        Frame::NonCentred => theta,
    };
    let mut grid = Vec::with_capacity(520);
    let rlo = cdf_inv(|t| reference_cdf(&reference, t), 1e-5, -1e12, 1e12);
    let rhi = cdf_inv(|t| reference_cdf(&reference, t), 1.0 - 1e-5, -1e12, 1e12);
    for i in 0..256 {
        let q = (i as f64 + 0.5) / 256.0;
        grid.push(cdf_inv(|t| reference_cdf(&reference, t), q, rlo, rhi));
    }
    for (center, scale) in [(cond.y - shift, s1), (theta - shift, s2)] {
        for i in 0..128 {
            grid.push(center + 8.0 * scale * (i as f64 / 63.5 - 1.0));
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    // Cumulative quadrature along the grid: one tail integral, then
    // narrow exact segments.
    let x_of = |t: f64| t + shift;
    let mut acc = cond.mass(None, Some(x_of(grid[0])), cfg)?;
    let mut dist = (acc / total - reference_cdf(&reference, grid[0])).abs();
    for w in grid.windows(2) {
        acc += cond.mass_finite(x_of(w[0]), x_of(w[1]), cfg)?;
        let fq = (acc / total).min(1.0);
        dist = dist.max((fq - reference_cdf(&reference, w[1])).abs());
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn model(f1: ErrorDist, f2: ErrorDist) -> HierModel {
        HierModel::scalar(f1, f2, 0.0).unwrap()
    }

    #[test]
    fn gaussian_conditional_mean_exact() {
        let m = model(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
        );
        let mean = conditional_mean(&m, 4.0, &cfg()).unwrap();
        assert!((mean - 2.0).abs() < 1e-9, "mean {mean}");
    }

    #[test]
    fn gaussian_laplace_limit_mean() {
        // Far tails: X | θ → N(y + σ1²/σ2, σ1²).
        let m = model(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::double_exp(1.0).unwrap(),
        );
        let mean = conditional_mean(&m, 50.0, &cfg()).unwrap();
        assert!((mean - 1.0).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn exp_power_limit_weight_is_half_at_equal_scales() {
        let d = ErrorDist::exp_power(1.0, 3.0).unwrap();
        let m = model(d, d);
        let mean = conditional_mean(&m, 100.0, &cfg()).unwrap();
        assert!((mean / 100.0 - 0.5).abs() < 0.01, "mean/theta {}", mean / 100.0);
    }

    #[test]
    fn narrow_interior_peak_cells_integrate() {
        // Light data error against a Gaussian hidden error concentrates
        // the far-tail conditional in a narrow spike near y + sqrt(θ/3);
        // the mean and tail probabilities must still come out right.
        let lg = model(
            ErrorDist::exp_power(1.0, 3.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
        );
        let theta = 1e4;
        let mean = conditional_mean(&lg, theta, &cfg()).unwrap();
        let want = (theta / 3.0_f64).sqrt();
        assert!(
            (mean - want).abs() < 0.5,
            "mean {mean} vs asymptote {want}"
        );
        let tail = conditional_tail_prob(&lg, theta, 10.0, Frame::Centred, &cfg()).unwrap();
        assert!(tail > 0.999, "tail {tail}");

        // Mirror cell: the spike sits near θ − sqrt(θ/3).
        let gl = model(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::exp_power(1.0, 3.0).unwrap(),
        );
        let mean = conditional_mean(&gl, theta, &cfg()).unwrap();
        let want = theta - (theta / 3.0_f64).sqrt();
        assert!((mean - want).abs() < 0.5, "mean {mean} vs {want}");
    }

    #[test]
    fn ee_uniform_pull_bound() {
        // Lighter hidden error (σ1/σ2 = 2): the data pulls the conditional
        // mean down by 2/(σ²−1) = 2/3 in the far tail.
        let m = model(
            ErrorDist::double_exp(1.0).unwrap(),
            ErrorDist::double_exp(0.5).unwrap(),
        );
        let bound = -2.0 / 3.0;
        for theta in [50.0, 100.0, 500.0] {
            let gap = conditional_mean(&m, theta, &cfg()).unwrap() - theta;
            assert!(
                gap <= bound * 0.8 && gap >= bound * 1.2,
                "theta {theta}: gap {gap} vs bound {bound}"
            );
        }
    }

    #[test]
    fn tail_prob_trivial_and_limits() {
        let m = model(
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::gaussian(5.0_f64.sqrt()).unwrap(),
        );
        assert_eq!(
            conditional_tail_prob(&m, 3.0, 0.0, Frame::Centred, &cfg()).unwrap(),
            1.0
        );
        // Far tail, non-centred frame: P(|X−θ|>10) → P(|Z2|>10) = 2Φ̄(10/√5).
        let p = conditional_tail_prob(&m, 1e4, 10.0, Frame::NonCentred, &cfg()).unwrap();
        let want = 2.0 * (1.0 - normal_cdf(10.0 / 5.0_f64.sqrt(), 0.0, 1.0));
        assert!(
            (p - want).abs() / want < 0.2,
            "tail {p} vs limit {want}"
        );
        // Centred frame at the same θ: the mass tracks θ.
        let pc = conditional_tail_prob(&m, 1e4, 10.0, Frame::Centred, &cfg()).unwrap();
        assert!(pc > 0.999, "centred tail {pc}");
    }

    #[test]
    fn tail_prob_self_consistency() {
        let m = model(
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::double_exp(1.0).unwrap(),
        );
        for theta in [0.0, 7.0, 120.0] {
            for k in [1.0, 10.0] {
                let tail = conditional_tail_prob(&m, theta, k, Frame::Centred, &cfg()).unwrap();
                let window =
                    conditional_window_mass(&m, theta, k, Frame::Centred, &cfg()).unwrap();
                assert!(
                    (tail + window - 1.0).abs() < 1e-8,
                    "theta {theta} k {k}: {tail} + {window}"
                );
            }
        }
    }

    #[test]
    fn marginal_tail_prob_motivating_value() {
        // Cauchy data error, N(0,5) hidden error, y=0: P(|Θ| > 40) ≈ 0.015.
        let m = model(
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::gaussian(5.0_f64.sqrt()).unwrap(),
        );
        let p = marginal_tail_prob(&m, 40.0, &cfg()).unwrap();
        assert!((p - 0.015).abs() < 0.003, "p = {p}");
        assert_eq!(marginal_tail_prob(&m, 0.0, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn marginal_tail_prob_gaussian_closed_form() {
        // (G,G): Θ | y ~ N(y, σ1² + σ2²), so a=2 gives 2Φ̄(2/√2).
        let m = model(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
        );
        let p = marginal_tail_prob(&m, 2.0, &cfg()).unwrap();
        let want = 2.0 * (1.0 - normal_cdf(2.0 / 2.0_f64.sqrt(), 0.0, 1.0));
        assert!((p - want).abs() < 1e-6, "{p} vs {want}");
    }

    #[test]
    fn marginal_table_quantiles_match_tail_prob() {
        let m = model(
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::gaussian(5.0_f64.sqrt()).unwrap(),
        );
        let table = marginal_cdf_table(&m, -400.0, 400.0, 512, &cfg()).unwrap();
        // The tabulated CDF at 40 must agree with the direct computation.
        let p_tail = marginal_tail_prob(&m, 40.0, &cfg()).unwrap();
        let i = table.thetas.partition_point(|t| *t < 40.0);
        let f40 = table.cdf[i];
        // By symmetry F(40) ≈ 1 − tail/2.
        assert!(
            (f40 - (1.0 - p_tail / 2.0)).abs() < 2e-3,
            "F(40) {f40} vs {}",
            1.0 - p_tail / 2.0
        );
        let med = table.quantile(0.5);
        assert!(med.abs() < 0.05, "median {med}");
    }

    #[test]
    fn gaussian_rate_special_cases() {
        assert!((gaussian_rate(1.0, 1.0, 0.0) - 0.5).abs() < 1e-12);
        assert!(gaussian_rate(1.0, 1.0, 0.5).abs() < 1e-12);
        assert!((gaussian_rate(1.0, 2.0, 1.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn cdf_distance_far_tail_limits() {
        // Non-centred frame of the RID cell approaches the hidden law.
        let rid = model(
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::gaussian(5.0_f64.sqrt()).unwrap(),
        );
        let d = cdf_distance(
            &rid,
            1e4,
            Frame::NonCentred,
            Reference::Normal {
                mean: 0.0,
                var: 5.0,
            },
            &cfg(),
        )
        .unwrap();
        assert!(d <= 0.01, "RID distance {d}");

        // Centred frame of the mirrored cell approaches the data law.
        let rip = model(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::cauchy(1.0).unwrap(),
        );
        let d = cdf_distance(
            &rip,
            1e4,
            Frame::Centred,
            Reference::Shifted {
                dist: ErrorDist::gaussian(1.0).unwrap(),
                shift: 0.0,
            },
            &cfg(),
        )
        .unwrap();
        assert!(d <= 0.01, "RIP distance {d}");

        let zero = cdf_distance(&rid, 0.0, Frame::Centred, Reference::SelfQuadrature, &cfg())
            .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn normalizer_translation_invariance() {
        let f1 = ErrorDist::cauchy(1.0).unwrap();
        let f2 = ErrorDist::double_exp(1.0).unwrap();
        let c = 13.7;
        let base = HierModel::scalar(f1, f2, 0.0).unwrap();
        let shifted = HierModel::scalar(f1, f2, c).unwrap();
        for theta in [0.0, 3.0, 80.0] {
            let a = normalizing_constant(&base, theta, &cfg()).unwrap().value;
            let b = normalizing_constant(&shifted, theta + c, &cfg())
                .unwrap()
                .value;
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(b.abs()),
                "theta {theta}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn oracle_requires_scalar_model() {
        let m = HierModel::new(
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
            vec![vec![0.0, 1.0]],
        )
        .unwrap();
        assert!(normalizing_constant(&m, 0.0, &cfg()).is_err());
    }
}
