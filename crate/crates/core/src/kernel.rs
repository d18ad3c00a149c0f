//! One-step transition kernels for the centred, non-centred, partially
//! centred, grouped and hybrid Gibbs samplers, and a chain runner that
//! produces seeded, reproducible traces.
//!
//! Every sub-draw is a full-conditional update (exact or one slice
//! transition from the previous value), so each kernel leaves the joint
//! posterior invariant. The recorded Θ is always on the model scale, no
//! matter which transformed blocks the kernel works in internally.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::conditionals::{
    grouped_q_update, grouped_x_update, sample_theta_given_x, sample_theta_noncentred,
    sample_theta_partially_centred, sample_x_given_theta,
};
use crate::error::Result;
use crate::model::{to_noncentred, HierModel, Parametrisation};
use crate::slice::SliceConfig;
use crate::{chain_rng, ChainRng};

/// Current position of one chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub theta: f64,
    /// Random effects on the model scale (length m).
    pub x: Vec<f64>,
    /// Auxiliary mixing precisions, ragged like the data; grouped only.
    pub q: Option<Vec<Vec<f64>>>,
}

/// The recorded output of one chain.
#[derive(Clone, Debug)]
pub struct Trace {
    pub thetas: Vec<f64>,
    pub xs: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub kernel_id: String,
    pub n_iter: usize,
    pub burn_in: usize,
    /// Mean Metropolis acceptance rate, for kernels that have one.
    pub accept_rate: Option<f64>,
}

impl Trace {
    /// Θ values after burn-in.
    pub fn kept(&self) -> &[f64] {
        &self.thetas[self.burn_in.min(self.thetas.len())..]
    }

    /// Write `iter,theta[,x_1..x_m]` rows with full round-trip precision.
    /// `comment` lines (if any) are emitted before the header, prefixed
    /// with `#`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        match &self.xs {
            None => {
                writeln!(w, "iter,theta")?;
                for (i, t) in self.thetas.iter().enumerate() {
                    writeln!(w, "{},{}", i + 1, t)?;
                }
            }
            Some(xs) => {
                let m = xs.first().map_or(0, Vec::len);
                let mut header = String::from("iter,theta");
                for j in 1..=m {
                    header.push_str(&format!(",x_{j}"));
                }
                writeln!(w, "{header}")?;
                for (i, (t, x)) in self.thetas.iter().zip(xs).enumerate() {
                    let mut row = format!("{},{}", i + 1, t);
                    for v in x {
                        row.push_str(&format!(",{v}"));
                    }
                    writeln!(w, "{row}")?;
                }
            }
        }
        Ok(())
    }
}

/// Pick a starting point for the X-slice in the bulk of the conditional:
/// the best of the data mean, θ, and their midpoint, coordinate-wise.
fn x_bulk_start(model: &HierModel, theta: f64) -> Vec<f64> {
    model
        .y
        .iter()
        .map(|row| {
            let ybar = row.iter().sum::<f64>() / row.len() as f64;
            let f1 = model.f1;
            let f2 = model.f2;
            let score = |x: f64| {
                row.iter().map(|y| f1.log_density(y - x)).sum::<f64>() + f2.log_density(x - theta)
            };
            *[ybar, theta, 0.5 * (ybar + theta)]
                .iter()
                .max_by(|a, b| score(**a).total_cmp(&score(**b)))
                .unwrap()
        })
        .collect()
}

/// Draw X from `L(X | Y, Θ=θ)` without a previous value: start each
/// coordinate in the bulk of its conditional and apply `sweeps` slice
/// sweeps (exact conjugate cells ignore the start entirely).
pub fn conditional_x_draw<R: Rng + ?Sized>(
    model: &HierModel,
    theta: f64,
    sweeps: usize,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut x = x_bulk_start(model, theta);
    for _ in 0..sweeps.max(1) {
        x = sample_x_given_theta(model, theta, &x, cfg, rng)?;
    }
    Ok(x)
}

/// Initial state for a chain started at `theta0`: X from one conditional
/// draw (grouped: Q from its prior, then the exact X update).
pub fn init_state<R: Rng + ?Sized>(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    kernel.validate(model)?;
    if let Parametrisation::Grouped = kernel {
        let (s1, s2) = (model.f1.scale(), model.f2.scale());
        let prior = Gamma::new(0.5, 2.0).expect("fixed shape"); // Ga(1/2, rate 1/2)
        let q: Vec<Vec<f64>> = model
            .y
            .iter()
            .map(|row| row.iter().map(|_| prior.sample(rng)).collect())
            .collect();
        let x: Vec<f64> = model
            .y
            .iter()
            .zip(&q)
            .map(|(row, qrow)| grouped_x_update(row, qrow, theta0, s1, s2, rng))
            .collect();
        return Ok(ChainState {
            theta: theta0,
            x,
            q: Some(q),
        });
    }
    let x = conditional_x_draw(model, theta0, 4, cfg, rng)
        .map_err(|e| e.in_kernel(kernel.id()))?;
    Ok(ChainState {
        theta: theta0,
        x,
        q: None,
    })
}

fn centred_step<R: Rng + ?Sized>(
    model: &HierModel,
    state: &ChainState,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let x = sample_x_given_theta(model, state.theta, &state.x, cfg, rng)?;
    let theta = sample_theta_given_x(model, &x, state.theta, cfg, rng)?;
    Ok(ChainState { theta, x, q: None })
}

fn noncentred_step<R: Rng + ?Sized>(
    model: &HierModel,
    state: &ChainState,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    // X̃' ~ L(X̃ | Y, θ) is the shifted draw X' − θ.
    let x = sample_x_given_theta(model, state.theta, &state.x, cfg, rng)?;
    let xt = to_noncentred(&x, state.theta);
    let theta = sample_theta_noncentred(model, &xt, state.theta, cfg, rng)?;
    // Back to the model scale with the fresh θ.
    Ok(ChainState {
        theta,
        x: crate::model::from_noncentred(&xt, theta),
        q: None,
    })
}

fn partially_centred_step<R: Rng + ?Sized>(
    model: &HierModel,
    rho: f64,
    state: &ChainState,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let x = sample_x_given_theta(model, state.theta, &state.x, cfg, rng)?;
    let u: Vec<f64> = x.iter().map(|xi| xi - rho * state.theta).collect();
    let theta = sample_theta_partially_centred(model, &u, rho, state.theta, cfg, rng)?;
    Ok(ChainState {
        theta,
        x: u.iter().map(|ui| ui + rho * theta).collect(),
        q: None,
    })
}

fn grouped_step<R: Rng + ?Sized>(
    model: &HierModel,
    state: &ChainState,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let (s1, s2) = (model.f1.scale(), model.f2.scale());
    // Θ and Q are independent given X, so the block update draws them
    // both from their X-conditionals before X moves.
    let theta = sample_theta_given_x(model, &state.x, state.theta, cfg, rng)?;
    let q: Vec<Vec<f64>> = model
        .y
        .iter()
        .zip(&state.x)
        .map(|(row, xi)| {
            row.iter()
                .map(|y| grouped_q_update(*y, *xi, s1, rng))
                .collect()
        })
        .collect();
    let x: Vec<f64> = model
        .y
        .iter()
        .zip(&q)
        .map(|(row, qrow)| grouped_x_update(row, qrow, theta, s1, s2, rng))
        .collect();
    Ok(ChainState {
        theta,
        x,
        q: Some(q),
    })
}

/// One full sweep of the chosen kernel.
pub fn step<R: Rng + ?Sized>(
    kernel: Parametrisation,
    model: &HierModel,
    state: &ChainState,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let res = match kernel {
        Parametrisation::Centred => centred_step(model, state, cfg, rng),
        Parametrisation::NonCentred => noncentred_step(model, state, cfg, rng),
        Parametrisation::PartiallyCentred { rho } => {
            partially_centred_step(model, rho, state, cfg, rng)
        }
        Parametrisation::Grouped => grouped_step(model, state, cfg, rng),
        Parametrisation::Hybrid { p_mix } => {
            if rng.gen::<f64>() < p_mix {
                centred_step(model, state, cfg, rng)
            } else {
                noncentred_step(model, state, cfg, rng)
            }
        }
    };
    res.map_err(|e| e.in_kernel(kernel.id()))
}

/// One marginal-chain transition Θ0 → Θ1 with X refreshed from its
/// conditional at θ0 (`sweeps` slice sweeps from a bulk start). This is
/// the protocol behind the one-step diagnostics.
pub fn one_step_theta<R: Rng + ?Sized>(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    sweeps: usize,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<f64> {
    let x = conditional_x_draw(model, theta0, sweeps, cfg, rng)
        .map_err(|e| e.in_kernel(kernel.id()))?;
    let state = ChainState {
        theta: theta0,
        x,
        q: None,
    };
    let out = match kernel {
        Parametrisation::Grouped => grouped_step(model, &state, cfg, rng),
        Parametrisation::Centred => {
            let theta = sample_theta_given_x(model, &state.x, theta0, cfg, rng)?;
            Ok(ChainState { theta, ..state })
        }
        Parametrisation::NonCentred => {
            let xt = to_noncentred(&state.x, theta0);
            let theta = sample_theta_noncentred(model, &xt, theta0, cfg, rng)?;
            Ok(ChainState { theta, ..state })
        }
        Parametrisation::PartiallyCentred { rho } => {
            let u: Vec<f64> = state.x.iter().map(|xi| xi - rho * theta0).collect();
            let theta = sample_theta_partially_centred(model, &u, rho, theta0, cfg, rng)?;
            Ok(ChainState { theta, ..state })
        }
        Parametrisation::Hybrid { p_mix } => {
            if rng.gen::<f64>() < p_mix {
                let theta = sample_theta_given_x(model, &state.x, theta0, cfg, rng)?;
                Ok(ChainState { theta, ..state })
            } else {
                let xt = to_noncentred(&state.x, theta0);
                let theta = sample_theta_noncentred(model, &xt, theta0, cfg, rng)?;
                Ok(ChainState { theta, ..state })
            }
        }
    };
    out.map(|s| s.theta).map_err(|e| e.in_kernel(kernel.id()))
}

/// One grouped-scheme transition of the X chain from a given `x0`:
/// (Θ, Q) jointly from their X-conditionals, then the exact X update.
pub fn one_step_grouped_x<R: Rng + ?Sized>(
    model: &HierModel,
    x0: &[f64],
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let state = ChainState {
        theta: 0.0,
        x: x0.to_vec(),
        q: None,
    };
    grouped_step(model, &state, cfg, rng).map(|s| s.x)
}

/// Run one chain for `n_iter` sweeps. Deterministic given
/// `(kernel, model, theta0, n_iter, seed)`; nothing is discarded
/// internally (`burn_in` is metadata for downstream summaries).
pub fn run_chain(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    n_iter: usize,
    burn_in: usize,
    seed: u64,
    record_x: bool,
    cfg: &SliceConfig,
) -> Result<Trace> {
    let mut rng: ChainRng = chain_rng(seed, 0);
    run_chain_with_rng(
        kernel, model, theta0, n_iter, burn_in, seed, record_x, cfg, &mut rng,
    )
}

/// As `run_chain`, but drawing from a caller-provided stream (used for
/// parallel multi-chain fan-out with split streams).
#[allow(clippy::too_many_arguments)]
pub fn run_chain_with_rng<R: Rng + ?Sized>(
    kernel: Parametrisation,
    model: &HierModel,
    theta0: f64,
    n_iter: usize,
    burn_in: usize,
    seed: u64,
    record_x: bool,
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<Trace> {
    let mut state = init_state(kernel, model, theta0, cfg, rng)?;
    let mut thetas = Vec::with_capacity(n_iter);
    let mut xs = record_x.then(|| Vec::with_capacity(n_iter));
    for _ in 0..n_iter {
        state = step(kernel, model, &state, cfg, rng)?;
        thetas.push(state.theta);
        if let Some(xs) = xs.as_mut() {
            xs.push(state.x.clone());
        }
    }
    Ok(Trace {
        thetas,
        xs,
        seed,
        kernel_id: kernel.id(),
        n_iter,
        burn_in,
        accept_rate: None,
    })
}
