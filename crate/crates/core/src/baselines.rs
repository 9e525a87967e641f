//! CSI-based reference optimizers: cyclic coordinate ascent over a phase
//! grid, exhaustive codebook search, and random codebook selection.

use std::f64::consts::TAU;

use rand::Rng;

use crate::channel::{rate, ChannelRealization, RisPhases, ScenarioConfig};
use crate::error::{Error, Result};
use crate::pilots::Codebook;

#[derive(Debug, Clone, PartialEq)]
pub struct DsmResult {
    pub phases: RisPhases,
    pub rate: f64,
    /// Rate at initialization followed by the rate after each full sweep.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsmSettings {
    pub grid_points: usize,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for DsmSettings {
    fn default() -> Self {
        Self {
            grid_points: 64,
            max_sweeps: 50,
            tol: 1e-6,
        }
    }
}

/// Cyclic per-element ascent from all-zero phases. Each element is set to the
/// best of `grid_points` equally spaced angles with the others held fixed;
/// sweeps repeat until the gain of a sweep drops below `tol`.
pub fn dsm_optimize(
    re: &ChannelRealization,
    config: &ScenarioConfig,
    grid_points: usize,
    max_sweeps: usize,
    tol: f64,
) -> Result<DsmResult> {
    if grid_points < 3 {
        return Err(Error::Config(format!("grid_points must be at least 3, got {grid_points}")));
    }
    let n = re.n_elements();
    let grid: Vec<f64> = (0..grid_points).map(|k| TAU * k as f64 / grid_points as f64).collect();
    let mut phases = RisPhases::zeros(n);
    let mut best = rate(re, &phases, config)?;
    let mut trace = vec![best];
    for _ in 0..max_sweeps {
        let before = best;
        for elem in 0..n {
            let current = phases.theta[elem];
            let mut pick = current;
            for &angle in &grid {
                phases.theta[elem] = angle;
                let r = rate(re, &phases, config)?;
                if r > best {
                    best = r;
                    pick = angle;
                }
            }
            phases.theta[elem] = pick;
        }
        trace.push(best);
        if best - before < tol {
            break;
        }
    }
    Ok(DsmResult {
        phases,
        rate: best,
        trace,
    })
}

/// Best codebook entry by rate; ties go to the lowest index.
pub fn exhaustive_codebook(re: &ChannelRealization, cb: &Codebook, config: &ScenarioConfig) -> Result<(usize, f64)> {
    if cb.is_empty() {
        return Err(Error::Config("codebook is empty".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for idx in 0..cb.len() {
        let r = rate(re, &cb.phases(idx), config)?;
        if r > best.1 {
            best = (idx, r);
        }
    }
    Ok(best)
}

/// Index of a uniformly drawn codebook entry.
pub fn random_codebook_index<R: Rng + ?Sized>(cb: &Codebook, rng: &mut R) -> usize {
    rng.random_range(0..cb.len())
}

/// Uniformly drawn codebook entry as phases.
pub fn random_codebook<R: Rng + ?Sized>(cb: &Codebook, rng: &mut R) -> RisPhases {
    cb.phases(random_codebook_index(cb, rng))
}
