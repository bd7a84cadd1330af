use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance within which a sample counts toward a mode.
pub const COVERAGE_RADIUS: f64 = 0.3;

/// Heavy mode centers in report order: top, right, bottom, left.
pub const HIGH_MODES: [[f64; 2]; 4] =
    [[0.0, SQRT_2], [SQRT_2, 0.0], [0.0, -SQRT_2], [-SQRT_2, 0.0]];

/// Share of samples near each heavy bandit mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverageReport {
    /// top, right, bottom, left
    pub proportions: [f64; 4],
    pub sum: f64,
    pub samples: usize,
}

pub fn mode_coverage(samples: &[[f32; 2]], radius: f64) -> Result<ModeCoverageReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(radius > 0.0) {
        return Err(Error::Config(format!(
            "coverage radius must be positive, got {radius}"
        )));
    }
    let r2 = radius * radius;
    let mut counts = [0usize; 4];
    for s in samples {
        let (x, y) = (s[0] as f64, s[1] as f64);
        for (count, c) in counts.iter_mut().zip(HIGH_MODES) {
            if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r2 {
                *count += 1;
            }
        }
    }
    let n = samples.len() as f64;
    let proportions = counts.map(|c| c as f64 / n);
    Ok(ModeCoverageReport {
        proportions,
        sum: proportions.iter().sum(),
        samples: samples.len(),
    })
}
