//! Experiment configuration schema. Strictly validated before any
//! computation: unknown keys are rejected by serde, value constraints by
//! `validate`.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use hiergibbs::diagnostics::DiagConfig;
use hiergibbs::latent_gp::{build_ar1_cov, LgpModel, MalaConfig};
use hiergibbs::model::{HierModel, Parametrisation};
use hiergibbs::ErrorDist;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Model descriptor: the scalar/replicated hierarchical model or the
/// latent Gaussian process (either an AR(1) covariance or an explicit
/// matrix, with data given or simulated at a stated level).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Hier {
        f1: ErrorDist,
        f2: ErrorDist,
        y: Vec<Vec<f64>>,
    },
    Lgp {
        f1: ErrorDist,
        #[serde(default)]
        p: Option<usize>,
        #[serde(default)]
        phi: Option<f64>,
        #[serde(default)]
        marginal_var: Option<f64>,
        #[serde(default)]
        sigma: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        y: Option<Vec<f64>>,
        /// Level used to simulate data when `y` is absent.
        #[serde(default)]
        theta_true: Option<f64>,
        #[serde(default)]
        data_seed: Option<u64>,
    },
}

pub enum BuiltModel {
    Hier(HierModel),
    Lgp(LgpModel),
}

impl ModelSpec {
    pub fn build(&self) -> anyhow::Result<BuiltModel> {
        match self {
            ModelSpec::Hier { f1, f2, y } => {
                let m = HierModel::new(*f1, *f2, y.clone()).context("invalid hier model")?;
                Ok(BuiltModel::Hier(m))
            }
            ModelSpec::Lgp {
                f1,
                p,
                phi,
                marginal_var,
                sigma,
                y,
                theta_true,
                data_seed,
            } => {
                let cov = match (sigma, p, phi, marginal_var) {
                    (Some(rows), _, _, _) => {
                        let n = rows.len();
                        if rows.iter().any(|r| r.len() != n) {
                            bail!("explicit sigma must be square");
                        }
                        nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j])
                    }
                    (None, Some(p), Some(phi), Some(v)) => {
                        build_ar1_cov(*p, *phi, *v).context("invalid AR(1) covariance")?
                    }
                    _ => bail!(
                        "lgp model needs either an explicit `sigma` or all of `p`, `phi`, \
                         `marginal_var`"
                    ),
                };
                match y {
                    Some(data) => {
                        if data.len() != cov.nrows() {
                            bail!("lgp data length {} != p {}", data.len(), cov.nrows());
                        }
                        let m = LgpModel::new(
                            cov,
                            nalgebra::DVector::from_row_slice(data),
                            *f1,
                        )
                        .context("invalid lgp model")?;
                        Ok(BuiltModel::Lgp(m))
                    }
                    None => {
                        let theta = theta_true
                            .context("lgp model without data needs `theta_true`")?;
                        let seed = data_seed
                            .context("lgp model without data needs `data_seed`")?;
                        let mut rng = hiergibbs::chain_rng(seed, u64::MAX);
                        let m = LgpModel::simulate_data(cov, theta, *f1, &mut rng)
                            .context("simulating lgp data")?;
                        Ok(BuiltModel::Lgp(m))
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub theta0: OneOrMany<f64>,
    pub n_iter: usize,
    #[serde(default)]
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub n_chains: u64,
    #[serde(default)]
    pub record_x: bool,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kernel: OneOrMany<Parametrisation>,
    pub run: RunSpec,
    #[serde(default)]
    pub diag: Option<DiagConfig>,
    #[serde(default)]
    pub mala: Option<MalaConfig>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).context("config schema error")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.run.n_iter == 0 {
            bail!("run.n_iter must be at least 1");
        }
        if self.run.n_chains == 0 {
            bail!("run.n_chains must be at least 1");
        }
        if self.run.burn_in >= self.run.n_iter {
            bail!("run.burn_in must be smaller than run.n_iter");
        }
        if let Some(d) = &self.diag {
            d.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        if let Some(m) = &self.mala {
            m.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        match &self.model {
            ModelSpec::Hier { f1, f2, .. } => {
                f1.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
                f2.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
            }
            ModelSpec::Lgp { f1, .. } => {
                f1.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
            }
        }
        let built = self.model.build()?;
        if let BuiltModel::Hier(m) = &built {
            for k in self.kernel.to_vec() {
                k.validate(m).map_err(|e| anyhow::anyhow!("{e}"))?;
            }
        }
        Ok(())
    }
}

/// Diagnose-command configuration: one scalar model, one kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub model: ModelSpec,
    pub kernel: Parametrisation,
    #[serde(default)]
    pub diag: Option<DiagConfig>,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}
