//! Grid refinement of `E[sup]`: nested subgrids of one fine sample, so the
//! estimate is non-decreasing in the grid size path by path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::McEstimate;
use crate::grid::TimeGrid;
use crate::harness::SweepConfig;
use crate::kernels::{Comparison, KernelParams};
use crate::rng::job_master;
use crate::sampling::{Process, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub h: f64,
    pub k: f64,
    pub role: String,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// `E[sup]` of `W`, `Y⁽¹⁾`, `Y⁽²⁾` on the uniform grids with `points`
/// intervals, for every `(H, K)` of the sweep. Every entry of `points` must
/// divide the largest one.
pub fn refinement_study(cfg: &SweepConfig, points: &[usize], paths: usize) -> Result<Vec<RefinementRow>> {
    let finest = points.iter().copied().max().unwrap_or(0);
    if finest == 0 || points.iter().any(|&n| n == 0 || finest % n != 0) {
        return Err(Error::Config(format!(
            "`refinement.points`: {points:?} must be positive divisors of the largest entry"
        )));
    }
    if paths < 2 {
        return Err(Error::Config("`refinement.paths` must be >= 2".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let grid = TimeGrid::uniform(cfg.horizon, finest)?;
    let mut rows = Vec::new();
    for &h in &cfg.hurst {
        for &k in &cfg.k {
            let params = KernelParams::bifbm(h, k)?;
            let roles = [
                ("W", Process::Bifbm(params)),
                ("Y1", Process::FbmScaled(Comparison::Y1.process(&params))),
                ("Y2", Process::FbmScaled(Comparison::Y2.process(&params))),
            ];
            for (role, process) in roles {
                let label = format!("refine|{role}|H={h}|K={k}|T={}|n={finest}|M={paths}", cfg.horizon);
                let sampler = Sampler::prepare(&process, &grid)?;
                let strides: Vec<usize> = sorted.iter().map(|&n| finest / n).collect();
                let cols = grid.columns();
                let blocks = sampler.map_blocks(job_master(cfg.seed, &label), paths, |_, _, values| {
                    let mut sups = vec![Vec::new(); strides.len()];
                    for row in values.chunks_exact(cols) {
                        for (i, &s) in strides.iter().enumerate() {
                            let m = row.iter().step_by(s).copied().fold(f64::NEG_INFINITY, f64::max);
                            sups[i].push(m);
                        }
                    }
                    sups
                });
                for (i, &n) in sorted.iter().enumerate() {
                    let values: Vec<f64> = blocks.iter().flat_map(|b| b[i].iter().copied()).collect();
                    let est = McEstimate::from_values(&values);
                    rows.push(RefinementRow {
                        h,
                        k,
                        role: role.to_string(),
                        n,
                        mean: est.mean,
                        stderr: est.stderr,
                        paths,
                    });
                }
            }
        }
    }
    Ok(rows)
}
