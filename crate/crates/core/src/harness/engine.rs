//! Sampling plan for one `(H, K)` pair.
//!
//! Check families register the functionals they need on named process sets;
//! each set is then sampled once, block by block, and every registered
//! functional is evaluated on the fly. A set's stream depends only on the run
//! seed and its label, never on which families asked for it.

use crate::error::Result;
use crate::estimators::{FunctionalDescriptor, FunctionalSet, McEstimate};
use crate::grid::TimeGrid;
use crate::rng::job_master;
use crate::sampling::{Process, Sampler, BATCH_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SetId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatId {
    set: usize,
    index: usize,
}

impl StatId {
    pub fn set(&self) -> SetId {
        SetId(self.set)
    }
}

struct ProcessSet {
    label: String,
    process: Process,
    grid: TimeGrid,
    paths: usize,
    master: u64,
    stats: Vec<FunctionalDescriptor>,
    values: Vec<Vec<f64>>,
}

pub struct Plan {
    seed: u64,
    sets: Vec<ProcessSet>,
}

impl Plan {
    pub fn new(seed: u64) -> Self {
        Plan {
            seed,
            sets: Vec::new(),
        }
    }

    /// Registers (or finds) a process set. Sets are identified by `label`,
    /// which also names the random stream.
    pub fn set(&mut self, label: &str, process: Process, grid: &TimeGrid, paths: usize) -> SetId {
        self.set_with_stream(label, label, process, grid, paths)
    }

    /// Like [`Plan::set`], but the stream is named by `stream`, so distinct
    /// sets can share their normals (stream coupling).
    pub fn set_with_stream(
        &mut self,
        label: &str,
        stream: &str,
        process: Process,
        grid: &TimeGrid,
        paths: usize,
    ) -> SetId {
        if let Some(i) = self.sets.iter().position(|s| s.label == label) {
            debug_assert_eq!(self.sets[i].paths, paths);
            debug_assert_eq!(self.sets[i].grid, *grid);
            return SetId(i);
        }
        self.sets.push(ProcessSet {
            label: label.to_string(),
            process,
            grid: grid.clone(),
            paths,
            master: job_master(self.seed, stream),
            stats: Vec::new(),
            values: Vec::new(),
        });
        SetId(self.sets.len() - 1)
    }

    pub fn stat(&mut self, set: SetId, f: FunctionalDescriptor) -> StatId {
        let s = &mut self.sets[set.0];
        let index = match s.stats.iter().position(|g| *g == f) {
            Some(i) => i,
            None => {
                s.stats.push(f);
                s.stats.len() - 1
            }
        };
        StatId { set: set.0, index }
    }

    pub fn grid(&self, set: SetId) -> &TimeGrid {
        &self.sets[set.0].grid
    }

    pub fn paths(&self, set: SetId) -> usize {
        self.sets[set.0].paths
    }

    pub fn master(&self, set: SetId) -> u64 {
        self.sets[set.0].master
    }

    pub fn label(&self, set: SetId) -> &str {
        &self.sets[set.0].label
    }

    pub fn process(&self, set: SetId) -> &Process {
        &self.sets[set.0].process
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    /// Samples every set that has registered functionals.
    pub fn run(&mut self) -> Result<()> {
        for set in &mut self.sets {
            if set.stats.is_empty() || !set.values.is_empty() {
                continue;
            }
            let fset = FunctionalSet::new(&set.grid, set.stats.clone())?;
            let sampler = Sampler::prepare(&set.process, &set.grid)?;
            let cols = set.grid.columns();
            let k = fset.len();
            let blocks = sampler.map_blocks(set.master, set.paths, |_, rows, values| -> Result<Vec<f64>> {
                // block-local values, stat-major
                let mut out = vec![0.0; k * rows];
                let mut slot = vec![0.0; k];
                let mut scratch = Vec::new();
                for (r, row) in values.chunks_exact(cols).enumerate() {
                    fset.evaluate_row(row, &mut slot, &mut scratch)?;
                    for (i, v) in slot.iter().enumerate() {
                        out[i * rows + r] = *v;
                    }
                }
                Ok(out)
            });
            let mut values = vec![Vec::with_capacity(set.paths); k];
            for (b, block) in blocks.into_iter().enumerate() {
                let block = block?;
                let rows = BATCH_ROWS.min(set.paths - b * BATCH_ROWS);
                for (i, v) in values.iter_mut().enumerate() {
                    v.extend_from_slice(&block[i * rows..(i + 1) * rows]);
                }
            }
            set.values = values;
        }
        Ok(())
    }

    pub fn values(&self, stat: StatId) -> &[f64] {
        &self.sets[stat.set].values[stat.index]
    }

    pub fn descriptor(&self, stat: StatId) -> &FunctionalDescriptor {
        &self.sets[stat.set].stats[stat.index]
    }

    pub fn estimate(&self, stat: StatId) -> McEstimate {
        self.estimate_range(stat, 0, self.paths(stat.set()))
    }

    /// Estimate from rows `start..end` only.
    pub fn estimate_range(&self, stat: StatId, start: usize, end: usize) -> McEstimate {
        let values = &self.values(stat)[start..end];
        if self.descriptor(stat).transform.is_exp() {
            exp_guarded(values)
        } else {
            McEstimate::from_values(values)
        }
    }
}

/// Largest share of the total a single path may carry before an
/// exponential moment is considered not estimable at this sample size.
pub const EXP_GUARD_SHARE: f64 = 0.01;

/// Mean of exponential-transform values, flagged unreliable when a value
/// overflowed or when one path dominates the sum.
pub fn exp_guarded(values: &[f64]) -> McEstimate {
    let mut est = McEstimate::from_values(values).with_capped_diagnostic(values);
    if est.reliable {
        let total = est.mean * values.len() as f64;
        let largest = values.iter().copied().fold(0.0, f64::max);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN totals must trip the guard
        if !(largest <= EXP_GUARD_SHARE * total) {
            est.reliable = false;
        }
    }
    est
}

/// Split point for two independent halves, aligned to stream blocks.
pub fn half_split(paths: usize) -> usize {
    let blocks = paths.div_ceil(BATCH_ROWS);
    if blocks >= 2 {
        blocks.div_ceil(2) * BATCH_ROWS
    } else {
        paths / 2
    }
}
