//! Symmetric error families for the observation and hidden equations:
//! Cauchy, double exponential, Gaussian, and exponential power with
//! tails lighter than Gaussian (shape β > 2).
//!
//! Densities are fully normalized so that oracle probabilities and
//! i moments are absolute, not merely proportional.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Tail weight ordering used by the stability table lookup:
/// polynomial (Cauchy) < exponential < Gaussian < lighter-than-Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TailClass {
    Polynomial,
    Exponential,
    Gaussian,
    LighterThanGaussian,
}

impl TailClass {
    /// Single-letter code used in the stability table layout.
    pub fn code(self) -> char {
        match self {
            TailClass::Polynomial => 'C',
            TailClass::Exponential => 'E',
            TailClass::Gaussian => 'G',
            TailClass::LighterThanGaussian => 'L',
        }
    }
}

/// A symmetric, zero-centred error distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorDist {
    Cauchy { scale: f64 },
    #[serde(rename = "dexp")]
    DoubleExp { scale: f64 },
    #[serde(rename = "gauss")]
    Gaussian { scale: f64 },
    #[serde(rename = "exppower")]
    ExpPower { scale: f64, beta: f64 },
}

impl ErrorDist {
    pub fn cauchy(scale: f64) -> Result<Self> {
        let d = ErrorDist::Cauchy { scale };
        d.validate()?;
        Ok(d)
    }

    pub fn double_exp(scale: f64) -> Result<Self> {
        let d = ErrorDist::DoubleExp { scale };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        let d = ErrorDist::Gaussian { scale };
        d.validate()?;
        Ok(d)
    }

    pub fn exp_power(scale: f64, beta: f64) -> Result<Self> {
        let d = ErrorDist::ExpPower { scale, beta };
        d.validate()?;
        Ok(d)
    }

    /// Check the scale/shape constraints. Deserialized values must be
    /// passed through here before use.
    pub fn validate(&self) -> Result<()> {
        let scale = self.scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidDist(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        if let ErrorDist::ExpPower { beta, .. } = self {
            if !(*beta > 2.0 && beta.is_finite()) {
                return Err(Error::InvalidDist(format!(
                    "exponential power shape must satisfy beta > 2, got {beta}"
                )));
            }
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        match *self {
            ErrorDist::Cauchy { scale }
            | ErrorDist::DoubleExp { scale }
            | ErrorDist::Gaussian { scale }
            | ErrorDist::ExpPower { scale, .. } => scale,
        }
    }

    /// Log of the fully normalized density; finite for all finite `x`.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            ErrorDist::Cauchy { scale } => {
                let z = x / scale;
                -(std::f64::consts::PI * scale).ln() - (1.0 + z * z).ln()
            }
            ErrorDist::DoubleExp { scale } => -x.abs() / scale - (2.0 * scale).ln(),
            ErrorDist::Gaussian { scale } => {
                let z = x / scale;
                -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - scale.ln()
            }
            ErrorDist::ExpPower { scale, beta } => {
                let z = (x / scale).abs();
                -z.powf(beta) + beta.ln() - (2.0 * scale).ln() - ln_gamma(1.0 / beta)
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Exact cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ErrorDist::Cauchy { scale } => 0.5 + (x / scale).atan() / std::f64::consts::PI,
            ErrorDist::DoubleExp { scale } => {
                if x < 0.0 {
                    0.5 * (x / scale).exp()
                } else {
                    1.0 - 0.5 * (-x / scale).exp()
                }
            }
            ErrorDist::Gaussian { scale } => 0.5 * erfc(-x / (scale * std::f64::consts::SQRT_2)),
            ErrorDist::ExpPower { scale, beta } => {
                let z = (x.abs() / scale).powf(beta);
                let half = if z > 0.0 {
                    0.5 * gamma_lr(1.0 / beta, z)
                } else {
                    0.0
                };
                if x < 0.0 {
                    0.5 - half
                } else {
                    0.5 + half
                }
            }
        }
    }

    /// Draw one value; deterministic given the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Cauchy { scale } => {
                // Inverse CDF; u is kept away from the endpoints by the
                // open-interval uniform.
                let u: f64 = rng.gen::<f64>();
                scale * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            ErrorDist::DoubleExp { scale } => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * scale * e
            }
            ErrorDist::Gaussian { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            }
            ErrorDist::ExpPower { scale, beta } => {
                // |X| = scale * G^(1/beta) with G ~ Gamma(1/beta, 1): exact,
                // no rejection loop.
                let g = Gamma::new(1.0 / beta, 1.0).expect("validated shape");
                let v: f64 = g.sample(rng);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * scale * v.powf(1.0 / beta)
            }
        }
    }

    pub fn tail_class(&self) -> TailClass {
        match self {
            ErrorDist::Cauchy { .. } => TailClass::Polynomial,
            ErrorDist::DoubleExp { .. } => TailClass::Exponential,
            ErrorDist::Gaussian { .. } => TailClass::Gaussian,
            ErrorDist::ExpPower { .. } => TailClass::LighterThanGaussian,
        }
    }

    /// Table code of the family (C, E, G or L).
    pub fn code(&self) -> char {
        self.tail_class().code()
    }
}

impl std::fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorDist::Cauchy { scale } => write!(f, "C(scale={scale})"),
            ErrorDist::DoubleExp { scale } => write!(f, "E(scale={scale})"),
            ErrorDist::Gaussian { scale } => write!(f, "G(scale={scale})"),
            ErrorDist::ExpPower { scale, beta } => write!(f, "L(scale={scale},beta={beta})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_tan, QuadConfig};
    use crate::stats::{ks_one_sample, mean};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn all_families() -> Vec<ErrorDist> {
        vec![
            ErrorDist::cauchy(1.0).unwrap(),
            ErrorDist::cauchy(0.5).unwrap(),
            ErrorDist::cauchy(3.0).unwrap(),
            ErrorDist::double_exp(1.0).unwrap(),
            ErrorDist::double_exp(0.5).unwrap(),
            ErrorDist::double_exp(2.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::gaussian(0.5).unwrap(),
            ErrorDist::gaussian(2.0).unwrap(),
            ErrorDist::exp_power(1.0, 3.0).unwrap(),
            ErrorDist::exp_power(2.0, 3.0).unwrap(),
            ErrorDist::exp_power(1.0, 4.0).unwrap(),
        ]
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ErrorDist::cauchy(0.0).is_err());
        assert!(ErrorDist::gaussian(-1.0).is_err());
        assert!(ErrorDist::exp_power(1.0, 2.0).is_err());
        assert!(ErrorDist::exp_power(1.0, f64::NAN).is_err());
    }

    #[test]
    fn known_log_densities_at_zero() {
        let g = ErrorDist::gaussian(1.0).unwrap();
        assert!((g.log_density(0.0) + 0.9189385332046727).abs() < 1e-12);
        let c = ErrorDist::cauchy(1.0).unwrap();
        assert!((c.log_density(0.0) + std::f64::consts::PI.ln()).abs() < 1e-12);
        let e = ErrorDist::double_exp(1.0).unwrap();
        assert!((e.log_density(0.0) + 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn densities_integrate_to_one() {
        let cfg = QuadConfig::default();
        for d in all_families() {
            let mass = integrate_tan(
                |x| d.density(x),
                0.0,
                d.scale(),
                None,
                None,
                &[],
                &cfg,
            )
            .unwrap();
            assert!(
                (mass.value - 1.0).abs() < 1e-8,
                "{d}: mass {}",
                mass.value
            );
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let cfg = QuadConfig::default();
        for d in all_families() {
            for t in [-3.0, -0.7, 0.0, 0.4, 2.5] {
                let q = integrate_tan(
                    |x| d.density(x),
                    0.0,
                    d.scale(),
                    None,
                    Some(t * d.scale()),
                    &[],
                    &cfg,
                )
                .unwrap();
                let c = d.cdf(t * d.scale());
                assert!((q.value - c).abs() < 1e-8, "{d} at {t}: {} vs {c}", q.value);
            }
        }
    }

    #[test]
    fn samples_agree_with_cdf() {
        // Kolmogorov-Smirnov distance between 10^5 draws and the CDF.
        let mut r = rng(7);
        for d in all_families() {
            let draws: Vec<f64> = (0..100_000).map(|_| d.sample(&mut r)).collect();
            let ks = ks_one_sample(&draws, |x| d.cdf(x));
            assert!(ks <= 0.01, "{d}: KS = {ks}");
        }
    }

    #[test]
    fn gaussian_sample_mean_within_lln_band() {
        let mut r = rng(11);
        let d = ErrorDist::gaussian(2.0).unwrap();
        let n = 1_000_000usize;
        let m = mean(&(0..n).map(|_| d.sample(&mut r)).collect::<Vec<_>>());
        assert!(m.abs() < 4.0 * 2.0 / 1e3, "mean {m}");
    }

    #[test]
    fn cauchy_sample_median_near_zero() {
        let mut r = rng(13);
        let d = ErrorDist::cauchy(1.0).unwrap();
        let draws: Vec<f64> = (0..100_000).map(|_| d.sample(&mut r)).collect();
        let med = crate::stats::median(&draws);
        assert!(med.abs() < 0.02, "median {med}");
    }

    #[test]
    fn exp_power_absolute_moment_matches_quadrature() {
        // E|X| for the beta=3 family: quadrature oracle against the MC mean,
        // and both against the closed form scale * Gamma(2/b) / Gamma(1/b).
        let d = ErrorDist::exp_power(1.0, 3.0).unwrap();
        let cfg = QuadConfig::default();
        let oracle = integrate_tan(
            |x| x.abs() * d.density(x),
            0.0,
            1.0,
            None,
            None,
            &[],
            &cfg,
        )
        .unwrap()
        .value;
        let closed = (ln_gamma(2.0 / 3.0) - ln_gamma(1.0 / 3.0)).exp();
        assert!((oracle - closed).abs() < 1e-9);

        let mut r = rng(17);
        let n = 100_000usize;
        let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut r).abs()).collect();
        let m = mean(&draws);
        let sd = crate::stats::variance(&draws).sqrt();
        assert!(
            (m - oracle).abs() < 3.0 * sd / (n as f64).sqrt(),
            "MC {m} vs oracle {oracle}"
        );
    }

    #[test]
    fn exp_power_gamma_transform_identity() {
        // |X/scale|^beta ~ Gamma(1/beta, 1).
        let d = ErrorDist::exp_power(1.5, 3.0).unwrap();
        let mut r = rng(19);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| (d.sample(&mut r).abs() / 1.5).powf(3.0))
            .collect();
        let ks = ks_one_sample(&draws, |t| if t <= 0.0 { 0.0 } else { gamma_lr(1.0 / 3.0, t) });
        assert!(ks <= 0.01, "KS = {ks}");
    }

    #[test]
    fn draws_have_no_skew() {
        // Finite-variance families: the empirical skew statistic stays
        // within 4 standard errors of zero. (The Cauchy has no moments and
        // is covered by the sign-balance test below.)
        let mut r = rng(29);
        let n = 100_000usize;
        for d in [
            ErrorDist::double_exp(1.0).unwrap(),
            ErrorDist::gaussian(1.0).unwrap(),
            ErrorDist::exp_power(1.0, 3.0).unwrap(),
        ] {
            let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
            let m = mean(&draws);
            let m2 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            let m3 = draws.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n as f64;
            let skew = m3 / m2.powf(1.5);
            let se = (6.0 / n as f64).sqrt();
            assert!(skew.abs() < 4.0 * se, "{d}: skew {skew}");
        }
    }

    #[test]
    fn sign_balance_of_draws() {
        // Symmetry of the samplers via the sign statistic: the positive
        // fraction of 10^5 draws stays within 4 binomial standard errors.
        let mut r = rng(23);
        for d in all_families() {
            let n = 100_000usize;
            let pos = (0..n).filter(|_| d.sample(&mut r) > 0.0).count() as f64;
            let frac = pos / n as f64;
            let se = 0.5 / (n as f64).sqrt();
            assert!((frac - 0.5).abs() < 4.0 * se, "{d}: positive fraction {frac}");
        }
    }

    #[test]
    fn tail_classes_and_order() {
        assert_eq!(
            ErrorDist::cauchy(1.0).unwrap().tail_class(),
            TailClass::Polynomial
        );
        assert_eq!(
            ErrorDist::double_exp(1.0).unwrap().tail_class(),
            TailClass::Exponential
        );
        assert_eq!(
            ErrorDist::exp_power(1.0, 4.0).unwrap().tail_class(),
            TailClass::LighterThanGaussian
        );
        assert!(TailClass::Polynomial < TailClass::Exponential);
        assert!(TailClass::Exponential < TailClass::Gaussian);
        assert!(TailClass::Gaussian < TailClass::LighterThanGaussian);
    }

    #[test]
    fn json_round_trip() {
        let d = ErrorDist::exp_power(1.0, 3.0).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"kind":"exppower","scale":1.0,"beta":3.0}"#);
        let back: ErrorDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let c: ErrorDist = serde_json::from_str(r#"{"kind":"cauchy","scale":2.0}"#).unwrap();
        assert_eq!(c, ErrorDist::cauchy(2.0).unwrap());
    }
}
