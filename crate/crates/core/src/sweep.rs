//! The full stability sweep: every (f1, f2) cell of the four error
//! families under both the centred and non-centred samplers, with the
//! double-exponential/double-exponential cell run at both scale ratios.
//! Produces the two-panel classification matrix and per-cell evidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{classify, DiagConfig, StabilityReport};
use crate::error::Result;
use crate::error_dist::ErrorDist;
use crate::model::{theoretical_stability, HierModel, Parametrisation, Stability};

pub const FAMILY_CODES: [char; 4] = ['C', 'E', 'G', 'L'];

/// Build one error family at a given scale with the sweep's shape
/// default (β = 3) for the exponential power family.
pub fn family(code: char, scale: f64, beta: f64) -> Result<ErrorDist> {
    match code {
        'C' => ErrorDist::cauchy(scale),
        'E' => ErrorDist::double_exp(scale),
        'G' => ErrorDist::gaussian(scale),
        'L' => ErrorDist::exp_power(scale, beta),
        other => Err(crate::error::Error::InvalidConfig(format!(
            "unknown family code `{other}`"
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCell {
    pub f1: char,
    pub f2: char,
    pub sigma1: f64,
    pub sigma2: f64,
    pub kernel: Parametrisation,
    /// The tabulated classification for this cell.
    pub expected: Stability,
    /// The empirical classification; absent if the cell errored.
    pub observed: Option<Stability>,
    pub report: Option<StabilityReport>,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn matches(&self) -> bool {
        self.observed == Some(self.expected)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub seed: u64,
}

/// The cell list for the sweep: unit scales everywhere, except that the
/// (E, E) cell is replaced by its two scale-ratio variants
/// σ2/σ1 ∈ {1/2, 2}.
pub fn sweep_cells(beta: f64) -> Vec<(char, char, f64, f64, Parametrisation)> {
    let mut cells = Vec::new();
    for f2 in FAMILY_CODES {
        for f1 in FAMILY_CODES {
            let scale_pairs:
                Vec<(f64, f64)> = if f1 == 'E' && f2 == 'E' {
                vec![(1.0, 0.5), (1.0, 2.0)]
            } else {
                vec![(1.0, 1.0)]
            };
            for (s1, s2) in scale_pairs {
                for kernel in [Parametrisation::Centred, Parametrisation::NonCentred] {
                    cells.push((f1, f2, s1, s2, kernel));
                }
            }
        }
    }
    let _ = beta;
    cells
}

/// Run the classifier over every cell (optionally restricted by a
/// filter), in parallel, with per-cell seeds derived from the base seed
/// by position so the fan-out order cannot change results. Per-cell
/// failures are recorded in the cell and do not abort the sweep.
pub fn table2_sweep(
    cfg: &DiagConfig,
    beta: f64,
    seed: u64,
    filter: Option<&dyn Fn(char, char, Parametrisation) -> bool>,
) -> SweepResult {
    let specs = sweep_cells(beta);
    let keep: Vec<(usize, (char, char, f64, f64, Parametrisation))> = specs
        .into_iter()
        .enumerate()
        .filter(|(_, (f1, f2, _, _, kernel))| filter.map_or(true, |f| f(*f1, *f2, *kernel)))
        .collect();
    let mut cells: Vec<SweepCell> = keep
        .into_par_iter()
        .map(|(idx, (f1, f2, s1, s2, kernel))| {
            let built = family(f1, s1, beta)
                .and_then(|d1| family(f2, s2, beta).map(|d2| (d1, d2)))
                .and_then(|(d1, d2)| HierModel::scalar(d1, d2, 0.0));
            let model = match built {
                Ok(m) => m,
                Err(e) => {
                    return SweepCell {
                        f1,
                        f2,
                        sigma1: s1,
                        sigma2: s2,
                        kernel,
                        expected: Stability::Geometric,
                        observed: None,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            let expected = theoretical_stability(&model, kernel).expect("tabulated kernels");
            match classify(kernel, &model, cfg, seed.wrapping_add(idx as u64)) {
                Ok(report) => SweepCell {
                    f1,
                    f2,
                    sigma1: s1,
                    sigma2: s2,
                    kernel,
                    expected,
                    observed: Some(report.classification),
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepCell {
                    f1,
                    f2,
                    sigma1: s1,
                    sigma2: s2,
                    kernel,
                    expected,
                    observed: None,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.kernel.id(), c.f2, c.f1, (c.sigma2 * 100.0) as i64));
    SweepResult { cells, seed }
}

impl SweepResult {
    /// Cells whose empirical class disagrees with the tabulated one.
    pub fn mismatches(&self) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| !c.matches()).collect()
    }

    fn cell_text(&self, kernel: Parametrisation, f1: char, f2: char) -> String {
        let hits: Vec<&SweepCell> = self
            .cells
            .iter()
            .filter(|c| c.kernel == kernel && c.f1 == f1 && c.f2 == f2)
            .collect();
        match hits.len() {
            0 => "-".into(),
            1 => hits[0]
                .observed
                .map(|s| s.to_string())
                .unwrap_or_else(|| "!".into()),
            // The (E,E) cell shows the lighter-hidden variant first, the
            // heavier-hidden one second.
            _ => {
                let mut sorted = hits;
                sorted.sort_by(|a, b| a.sigma2.total_cmp(&b.sigma2));
                sorted
                    .iter()
                    .map(|c| {
                        c.observed
                            .map(|s| s.to_string())
                            .unwrap_or_else(|| "!".into())
                    })
                    .collect::<Vec<_>>()
                    .join("/")
            }
        }
    }

    /// Two-panel matrix (rows: hidden error f2; columns: data error f1)
    /// in CSV form. Split cells list the σ2 < σ1 variant first.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("panel,f2\\f1,C,E,G,L\n");
        for kernel in [Parametrisation::Centred, Parametrisation::NonCentred] {
            for f2 in FAMILY_CODES {
                let row: Vec<String> = FAMILY_CODES
                    .iter()
                    .map(|f1| self.cell_text(kernel, *f1, f2))
                    .collect();
                out.push_str(&format!("{},{},{}\n", kernel.id(), f2, row.join(",")));
            }
        }
        out
    }
}
