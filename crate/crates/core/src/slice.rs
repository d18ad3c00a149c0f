//! Univariate slice sampling with stepping out and shrinkage (Neal 2003).
//!
//! This is the universal fallback for every non-Gaussian full conditional:
//! it needs no proposal scale tuning and is valid for any continuous
//! positive target known up to a constant. One call is one reversible
//! transition that leaves the target invariant; callers start it at the
//! previous value of the coordinate being updated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceConfig {
    /// Width of the initial bracket placed around the current point.
    pub initial_width: f64,
    /// Cap on the total number of stepping-out expansions (randomly split
    /// between the two sides, which keeps the capped procedure valid).
    pub max_stepout: u32,
    /// Cap on shrinkage draws before giving up.
    pub max_shrink: u32,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            initial_width: 1.0,
            max_stepout: 1024,
            max_shrink: 1024,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_width > 0.0 && self.initial_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "slice initial_width must be positive, got {}",
                self.initial_width
            )));
        }
        if self.max_stepout == 0 {
            return Err(Error::InvalidConfig("max_stepout must be positive".into()));
        }
        if self.max_shrink < 50 {
            return Err(Error::InvalidConfig(format!(
                "max_shrink must be at least 50, got {}",
                self.max_shrink
            )));
        }
        Ok(())
    }

    pub fn with_width(self, width: f64) -> Self {
        SliceConfig {
            initial_width: width,
            ..self
        }
    }
}

/// One slice-sampling transition for the log target `log_f`, from `x0`.
pub fn slice_sample<F, R>(log_f: F, x0: f64, cfg: &SliceConfig, rng: &mut R) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let w = cfg.initial_width;
    let log_fx0 = log_f(x0);
    if !log_fx0.is_finite() {
        return Err(Error::SliceExhausted {
            start: x0,
            theta: f64::NAN,
            max_shrink: 0,
        });
    }
    let level = log_fx0 + rng.gen::<f64>().ln();

    // Stepping out, with the expansion budget split at random between the
    // two sides.
    let mut left = x0 - rng.gen::<f64>() * w;
    let mut right = left + w;
    let mut grow_left = (rng.gen::<f64>() * cfg.max_stepout as f64).floor() as u32;
    let mut grow_right = cfg.max_stepout - 1 - grow_left;
    while grow_left > 0 && log_f(left) > level {
        left -= w;
        grow_left -= 1;
    }
    while grow_right > 0 && log_f(right) > level {
        right += w;
        grow_right -= 1;
    }

    // Shrinkage.
    for _ in 0..cfg.max_shrink {
        let x1 = left + rng.gen::<f64>() * (right - left);
        if log_f(x1) > level {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    Err(Error::SliceExhausted {
        start: x0,
        theta: f64::NAN,
        max_shrink: cfg.max_shrink,
    })
}
