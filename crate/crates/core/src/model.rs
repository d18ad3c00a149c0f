//! The two-level linear hierarchical model
//!
//! ```text
//! Y_ij = X_i + Z1_ij,   j = 1..m_i
//! X_i  = Θ + Z2_i,      i = 1..m
//! ```
//!
//! with a flat prior on Θ. `m = m_1 = 1` recovers the scalar model
//! `Y = X + Z1`, `X = Θ + Z2` that all closed-form results refer to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_dist::{ErrorDist, TailClass};

/// Observation error `f1`, hidden error `f2`, and the (ragged) data matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierModel {
    pub f1: ErrorDist,
    pub f2: ErrorDist,
    /// `y[i][j]` is the j-th replicate of the i-th random effect.
    pub y: Vec<Vec<f64>>,
}

impl HierModel {
    pub fn new(f1: ErrorDist, f2: ErrorDist, y: Vec<Vec<f64>>) -> Result<Self> {
        let m = HierModel { f1, f2, y };
        m.validate()?;
        Ok(m)
    }

    /// The scalar model with a single observation.
    pub fn scalar(f1: ErrorDist, f2: ErrorDist, y: f64) -> Result<Self> {
        HierModel::new(f1, f2, vec![vec![y]])
    }

    pub fn validate(&self) -> Result<()> {
        self.f1.validate()?;
        self.f2.validate()?;
        if self.y.is_empty() {
            return Err(Error::InvalidModel("need m >= 1 random effects".into()));
        }
        for (i, row) in self.y.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "random effect {i} has no observations (m_i >= 1 required)"
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "non-finite observation in row {i}"
                )));
            }
        }
        Ok(())
    }

    /// Number of random effects `m`.
    pub fn n_effects(&self) -> usize {
        self.y.len()
    }

    /// Total number of observations.
    pub fn n_obs(&self) -> usize {
        self.y.iter().map(Vec::len).sum()
    }

    /// The single observation of the scalar model.
    pub fn scalar_y(&self) -> Result<f64> {
        if self.n_effects() == 1 && self.y[0].len() == 1 {
            Ok(self.y[0][0])
        } else {
            Err(Error::InvalidModel(
                "operation requires the scalar model (m = m_1 = 1)".into(),
            ))
        }
    }

    /// Log joint density of (x, θ) given the data, up to the flat prior:
    /// `Σ_i [ Σ_j log f1(y_ij − x_i) + log f2(x_i − θ) ]`.
    pub fn joint_log_density(&self, x: &[f64], theta: f64) -> Result<f64> {
        if x.len() != self.n_effects() {
            return Err(Error::DimensionMismatch {
                expected: self.n_effects(),
                got: x.len(),
            });
        }
        let mut total = 0.0;
        for (xi, row) in x.iter().zip(&self.y) {
            for yij in row {
                total += self.f1.log_density(yij - xi);
            }
            total += self.f2.log_density(xi - theta);
        }
        Ok(total)
    }

    /// Tail classes of (f1, f2).
    pub fn tail_pair(&self) -> (TailClass, TailClass) {
        (self.f1.tail_class(), self.f2.tail_class())
    }

    /// Short cell id like `CG` (f1 code then f2 code).
    pub fn cell_id(&self) -> String {
        format!("{}{}", self.f1.code(), self.f2.code())
    }
}

/// Which blocks the two-component Gibbs sampler updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Parametrisation {
    /// P0: update (X, Θ).
    Centred,
    /// P1: update (X̃, Θ) with X̃ = X − Θ.
    NonCentred,
    /// U = X − ρΘ for ρ in [0, 1]; ρ=0 is centred, ρ=1 non-centred.
    PartiallyCentred { rho: f64 },
    /// Three-component scheme with the auxiliary Cauchy mixing precision Q,
    /// (Θ, Q) updated as one block. Requires f1 Cauchy and f2 Gaussian.
    Grouped,
    /// Mix of a centred and a non-centred sweep per iteration.
    Hybrid {
        #[serde(default = "default_p_mix")]
        p_mix: f64,
    },
}

fn default_p_mix() -> f64 {
    0.5
}

impl Parametrisation {
    pub fn validate(&self, model: &HierModel) -> Result<()> {
        match self {
            Parametrisation::PartiallyCentred { rho } => {
                if !(0.0..=1.0).contains(rho) {
                    return Err(Error::InvalidConfig(format!(
                        "rho must be in [0, 1], got {rho}"
                    )));
                }
            }
            Parametrisation::Hybrid { p_mix } => {
                if !(*p_mix > 0.0 && *p_mix < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "p_mix must be in (0, 1), got {p_mix}"
                    )));
                }
            }
            Parametrisation::Grouped => {
                let ok = matches!(model.f1, ErrorDist::Cauchy { .. })
                    && matches!(model.f2, ErrorDist::Gaussian { .. });
                if !ok {
                    return Err(Error::InvalidConfig(format!(
                        "grouped scheme needs a Cauchy observation error and Gaussian \
                         hidden error; model is ({}, {})",
                        model.f1, model.f2
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        match self {
            Parametrisation::Centred => "P0".into(),
            Parametrisation::NonCentred => "P1".into(),
            Parametrisation::PartiallyCentred { rho } => format!("PC({rho})"),
            Parametrisation::Grouped => "grouped".into(),
            Parametrisation::Hybrid { p_mix } => format!("hybrid({p_mix})"),
        }
    }
}

/// Ergodicity class of the marginal Θ chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Uniform,
    Geometric,
    NonGeometric,
}

impl Stability {
    pub fn code(self) -> char {
        match self {
            Stability::Uniform => 'U',
            Stability::Geometric => 'G',
            Stability::NonGeometric => 'N',
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Non-centring transform `x̃ = x − θ·1` and its inverse.
pub fn to_noncentred(x: &[f64], theta: f64) -> Vec<f64> {
    x.iter().map(|xi| xi - theta).collect()
}

pub fn from_noncentred(xt: &[f64], theta: f64) -> Vec<f64> {
    xt.iter().map(|xi| xi + theta).collect()
}

/// Stability of the centred sampler as a function of the two tail
/// classes, with the double-exponential/double-exponential cell resolved
/// by the scale ratio.
///
/// In the (E, E) cell, writing the f2 rate relative to f1 as
/// sigma = sigma1/sigma2, the conditional mass of X hugs θ when the
/// hidden error is the lighter one (sigma2 < sigma1), giving the uniform
/// pull E{X − θ} → −2/(sigma² − 1) and hence geometric ergodicity; when
/// the hidden error is the heavier one (sigma2 > sigma1) the mass hugs y,
/// the update is partially tight in the parameter, and the sampler is
/// uniformly ergodic. Equal scales give the exact conditional-mean
/// contraction E(Θ1|θ0) = (y + θ0)/2, hence geometric.
fn centred_stability(t1: TailClass, t2: TailClass, sigma1: f64, sigma2: f64) -> Stability {
    use TailClass::*;
    match (t1, t2) {
        // Heavy hidden tails dominate: the X-update keeps mass near y.
        (_, Polynomial) => Stability::Uniform,
        // Heavy observation tails with a lighter hidden error: the
        // conditional tracks θ and the chain is random-walk-like.
        (Polynomial, _) => Stability::NonGeometric,
        (Exponential, Exponential) => {
            if sigma2 > sigma1 {
                Stability::Uniform
            } else {
                Stability::Geometric
            }
        }
        // Exponential hidden error against Gaussian-or-lighter data error:
        // the update forgets θ up to a bounded shift.
        (Gaussian | LighterThanGaussian, Exponential) => Stability::Uniform,
        _ => Stability::Geometric,
    }
}

/// The tabulated stability of the centred (P0) or non-centred (P1)
/// sampler for this model. Other parametrisations are not tabulated.
pub fn theoretical_stability(model: &HierModel, par: Parametrisation) -> Result<Stability> {
    let (t1, t2) = model.tail_pair();
    let (s1, s2) = (model.f1.scale(), model.f2.scale());
    match par {
        Parametrisation::Centred => Ok(centred_stability(t1, t2, s1, s2)),
        // Under non-centring the model coincides with the centred one with
        // the error distributions interchanged (and the ratio inverted).
        Parametrisation::NonCentred => Ok(centred_stability(t2, t1, s2, s1)),
        other => Err(Error::NotTabulated(other.id())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(code: char) -> ErrorDist {
        match code {
            'C' => ErrorDist::cauchy(1.0).unwrap(),
            'E' => ErrorDist::double_exp(1.0).unwrap(),
            'G' => ErrorDist::gaussian(1.0).unwrap(),
            'L' => ErrorDist::exp_power(1.0, 3.0).unwrap(),
            _ => unreachable!(),
        }
    }

    fn cell(f1: char, f2: char) -> HierModel {
        HierModel::scalar(dist(f1), dist(f2), 0.0).unwrap()
    }

    #[test]
    fn joint_log_density_gaussian_mode() {
        let m = cell('G', 'G');
        let v = m.joint_log_density(&[0.0], 0.0).unwrap();
        assert!((v - 2.0 * (-0.9189385332046727)).abs() < 1e-9);
    }

    #[test]
    fn joint_log_density_is_termwise_sum() {
        let m = cell('C', 'G');
        let (x, theta) = (1.3, -0.4);
        let v = m.joint_log_density(&[x], theta).unwrap();
        let direct = m.f1.log_density(-x) + m.f2.log_density(x - theta);
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn joint_log_density_ee_plateau() {
        // For equal double-exponential rates the density is constant in x
        // between y and θ: (1/4) e^{-(θ-y)} with the normalized factors.
        let m = cell('E', 'E');
        let theta = 3.0;
        let expect = (0.25_f64).ln() - theta;
        for x in [0.0, 0.7, 1.5, 2.9] {
            let v = m.joint_log_density(&[x], theta).unwrap();
            assert!((v - expect).abs() < 1e-12, "x={x}: {v} vs {expect}");
        }
    }

    #[test]
    fn joint_log_density_dimension_check() {
        let m = cell('G', 'G');
        assert!(m.joint_log_density(&[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn joint_log_density_reflection_invariance() {
        let f1 = ErrorDist::double_exp(0.7).unwrap();
        let f2 = ErrorDist::exp_power(1.3, 3.0).unwrap();
        let m = HierModel::new(f1, f2, vec![vec![0.5, -1.2], vec![2.0]]).unwrap();
        let m_neg = HierModel::new(
            f1,
            f2,
            m.y.iter()
                .map(|r| r.iter().map(|v| -v).collect())
                .collect(),
        )
        .unwrap();
        let x = [0.3, -0.9];
        let x_neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = m.joint_log_density(&x, 0.8).unwrap();
        let b = m_neg.joint_log_density(&x_neg, -0.8).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn noncentring_round_trip() {
        let x = vec![3.0];
        assert_eq!(to_noncentred(&x, 2.0), vec![1.0]);
        let xt = to_noncentred(&x, 2.0);
        assert_eq!(from_noncentred(&xt, 2.0), x);
        assert_eq!(to_noncentred(&x, 0.0), x);
    }

    #[test]
    fn table_cells_match_tabulated_stability() {
        use Stability::*;
        // Centred panel, rows f2 in C,E,G,L and columns f1 in C,E,G,L.
        let p0: [[Stability; 4]; 4] = [
            [Uniform, Uniform, Uniform, Uniform],
            [NonGeometric, Geometric, Uniform, Uniform],
            [NonGeometric, Geometric, Geometric, Geometric],
            [NonGeometric, Geometric, Geometric, Geometric],
        ];
        // Non-centred panel, same layout.
        let p1: [[Stability; 4]; 4] = [
            [Uniform, NonGeometric, NonGeometric, NonGeometric],
            [Uniform, Geometric, Geometric, Geometric],
            [Uniform, Uniform, Geometric, Geometric],
            [Uniform, Uniform, Geometric, Geometric],
        ];
        let codes = ['C', 'E', 'G', 'L'];
        for (i2, c2) in codes.iter().enumerate() {
            for (i1, c1) in codes.iter().enumerate() {
                let m = cell(*c1, *c2);
                // Equal scales: the (E,E) cell resolves to geometric.
                assert_eq!(
                    theoretical_stability(&m, Parametrisation::Centred).unwrap(),
                    p0[i2][i1],
                    "P0 cell ({c1},{c2})"
                );
                assert_eq!(
                    theoretical_stability(&m, Parametrisation::NonCentred).unwrap(),
                    p1[i2][i1],
                    "P1 cell ({c1},{c2})"
                );
            }
        }
    }

    #[test]
    fn ee_cell_scale_split() {
        // Lighter hidden error (sigma2 < sigma1): geometric under P0,
        // uniform under P1; heavier hidden error: the mirror image.
        let light_hidden = HierModel::scalar(
            ErrorDist::double_exp(1.0).unwrap(),
            ErrorDist::double_exp(0.5).unwrap(),
            0.0,
        )
        .unwrap();
        let heavy_hidden = HierModel::scalar(
            ErrorDist::double_exp(1.0).unwrap(),
            ErrorDist::double_exp(2.0).unwrap(),
            0.0,
        )
        .unwrap();
        use Parametrisation::*;
        assert_eq!(
            theoretical_stability(&light_hidden, Centred).unwrap(),
            Stability::Geometric
        );
        assert_eq!(
            theoretical_stability(&light_hidden, NonCentred).unwrap(),
            Stability::Uniform
        );
        assert_eq!(
            theoretical_stability(&heavy_hidden, Centred).unwrap(),
            Stability::Uniform
        );
        assert_eq!(
            theoretical_stability(&heavy_hidden, NonCentred).unwrap(),
            Stability::Geometric
        );
    }

    #[test]
    fn table_antisymmetry_under_interchange() {
        let codes = ['C', 'E', 'G', 'L'];
        let scales = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)];
        for c1 in codes {
            for c2 in codes {
                for (s1, s2) in scales {
                    let make = |code: char, s: f64| match code {
                        'C' => ErrorDist::cauchy(s).unwrap(),
                        'E' => ErrorDist::double_exp(s).unwrap(),
                        'G' => ErrorDist::gaussian(s).unwrap(),
                        'L' => ErrorDist::exp_power(s, 3.0).unwrap(),
                        _ => unreachable!(),
                    };
                    let m = HierModel::scalar(make(c1, s1), make(c2, s2), 0.0).unwrap();
                    let swapped = HierModel::scalar(make(c2, s2), make(c1, s1), 0.0).unwrap();
                    assert_eq!(
                        theoretical_stability(&m, Parametrisation::Centred).unwrap(),
                        theoretical_stability(&swapped, Parametrisation::NonCentred).unwrap(),
                        "cell ({c1},{c2}) scales ({s1},{s2})"
                    );
                }
            }
        }
    }

    #[test]
    fn specific_tabulated_examples() {
        assert_eq!(
            theoretical_stability(&cell('C', 'C'), Parametrisation::Centred).unwrap(),
            Stability::Uniform
        );
        assert_eq!(
            theoretical_stability(&cell('G', 'C'), Parametrisation::NonCentred).unwrap(),
            Stability::NonGeometric
        );
        assert_eq!(
            theoretical_stability(&cell('C', 'G'), Parametrisation::Centred).unwrap(),
            Stability::NonGeometric
        );
        assert_eq!(
            theoretical_stability(&cell('C', 'G'), Parametrisation::NonCentred).unwrap(),
            Stability::Uniform
        );
    }

    #[test]
    fn untabulated_parametrisations_error() {
        let m = cell('G', 'G');
        assert!(theoretical_stability(&m, Parametrisation::Grouped).is_err());
        assert!(
            theoretical_stability(&m, Parametrisation::PartiallyCentred { rho: 0.5 }).is_err()
        );
    }

    #[test]
    fn grouped_requires_cauchy_gaussian() {
        let ok = cell('C', 'G');
        assert!(Parametrisation::Grouped.validate(&ok).is_ok());
        let bad = cell('G', 'G');
        assert!(Parametrisation::Grouped.validate(&bad).is_err());
    }

    #[test]
    fn model_json_shape() {
        let m = cell('C', 'G');
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"f1":{"kind":"cauchy","scale":1.0},"f2":{"kind":"gauss","scale":1.0},"y":[[0.0]]}"#
        );
        let back: HierModel = serde_json::from_str(&s).unwrap();
        back.validate().unwrap();
    }
}
