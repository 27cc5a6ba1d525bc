//! Exact sampling of centered Gaussian paths on a time grid.
//!
//! bifBm is sampled through the Cholesky factor of its Gram matrix; scaled
//! fBm on a uniform grid goes through circulant embedding of its stationary
//! increments. Paths are produced in fixed blocks of [`BATCH_ROWS`] rows and
//! block `b` always draws from `derive_stream(master, b)`, so the output does
//! not depend on how many worker threads run the blocks.

mod circulant;
mod export;

pub use circulant::CirculantEmbedding;
pub use export::{read_raw, write_raw, RawHeader, RAW_HEADER_LEN};

use nalgebra::linalg::Cholesky;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{psd_check, Covariance, GramMatrix, KernelParams, ScaledFbm};
use crate::rng::{derive_stream, StreamSeed};

/// Rows per random stream.
pub const BATCH_ROWS: usize = 4096;

const MAX_JITTER_ESCALATIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum ProcessLabel {
    Bifbm { h: f64, k: f64 },
    FbmScaled { hurst: f64, scale: f64 },
}

/// The processes the samplers know about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Process {
    Bifbm(KernelParams),
    FbmScaled(ScaledFbm),
}

impl Process {
    pub fn label(&self) -> ProcessLabel {
        match self {
            Process::Bifbm(p) => ProcessLabel::Bifbm { h: p.h(), k: p.k() },
            Process::FbmScaled(f) => ProcessLabel::FbmScaled {
                hurst: f.hurst,
                scale: f.scale,
            },
        }
    }

    /// Self-similarity index.
    pub fn index(&self) -> f64 {
        match self {
            Process::Bifbm(p) => p.hk(),
            Process::FbmScaled(f) => f.hurst,
        }
    }
}

impl Covariance for Process {
    fn cov(&self, s: f64, t: f64) -> f64 {
        match self {
            Process::Bifbm(p) => p.cov(s, t),
            Process::FbmScaled(f) => f.cov(s, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedInfo {
    pub master: u64,
    pub batches: u64,
    pub jitter: f64,
    pub circulant_fallback: bool,
}

/// `rows` sampled paths; row-major, `grid.columns()` values per row, column 0
/// is the deterministic zero at the origin.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub rows: usize,
    pub values: Vec<f64>,
    pub label: ProcessLabel,
    pub seed_info: SeedInfo,
}

impl PathBatch {
    pub fn row(&self, m: usize) -> &[f64] {
        let c = self.grid.columns();
        &self.values[m * c..(m + 1) * c]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.grid.columns())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }
}

/// Lower-triangular `L` with `L Lᵀ = Σ + jitter·I`.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    pub l: DMatrix<f64>,
    pub jitter: f64,
    pub escalations: u32,
}

impl LowerFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `‖L Lᵀ − Σ‖_max`.
    pub fn reconstruction_error(&self, gram: &GramMatrix) -> f64 {
        let rebuilt = &self.l * self.l.transpose();
        (rebuilt - &gram.values).amax()
    }
}

fn try_factor(values: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let mut m = values.clone();
    if jitter > 0.0 {
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
    }
    let l = Cholesky::new(m)?.unpack();
    let ok = (0..l.nrows()).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite())
        && l.iter().all(|v| v.is_finite());
    ok.then_some(l)
}

/// Cholesky factor with the fixed jitter escalation policy: on failure the
/// jitter becomes `1e-12 · max diag` (or ×10 if already positive), at most
/// three times.
pub fn cholesky_factor(gram: &GramMatrix, jitter: f64) -> Result<LowerFactor> {
    let base = 1e-12 * gram.max_diagonal();
    let mut current = jitter.max(0.0);
    let mut escalations = 0;
    loop {
        if let Some(l) = try_factor(&gram.values, current) {
            return Ok(LowerFactor {
                l,
                jitter: current,
                escalations,
            });
        }
        if escalations == MAX_JITTER_ESCALATIONS {
            return Err(Error::FactorizationFailed {
                escalations,
                jitter: current,
            });
        }
        current = if current > 0.0 { current * 10.0 } else { base };
        escalations += 1;
    }
}

/// `out[b] = L z[b]` for each row of `z` (`rows × n`), written into the path
/// layout (stride `n + 1`, column 0 left at zero).
fn apply_factor(l: &DMatrix<f64>, z: &[f64], rows: usize, out: &mut [f64]) {
    let n = l.nrows();
    assert_eq!(z.len(), rows * n);
    assert_eq!(out.len(), rows * (n + 1));
    if rows == 0 {
        return;
    }
    // Column-major L read as row-major Lᵀ: element (j, i) sits at j·n + i.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            n,
            n,
            1.0,
            z.as_ptr(),
            n as isize,
            1,
            l.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr().add(1),
            (n + 1) as isize,
            1,
        );
    }
    for r in 0..rows {
        out[r * (n + 1)] = 0.0;
    }
}

/// Paths `L z` from explicit standard-normal rows.
pub fn paths_from_normals(factor: &LowerFactor, z: &[f64], rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * (factor.dim() + 1)];
    apply_factor(&factor.l, z, rows, &mut out);
    out
}

/// A sampler prepared for one process on one grid.
#[derive(Debug, Clone)]
pub enum Sampler {
    Cholesky {
        factor: LowerFactor,
        circulant_fallback: bool,
    },
    Circulant(CirculantEmbedding),
}

impl Sampler {
    pub fn cholesky(factor: LowerFactor) -> Self {
        Sampler::Cholesky {
            factor,
            circulant_fallback: false,
        }
    }

    /// Cholesky for bifBm (gated by a PSD check in the extended regime),
    /// circulant embedding for scaled fBm on uniform grids with Cholesky as
    /// the fallback.
    pub fn prepare(process: &Process, grid: &TimeGrid) -> Result<Self> {
        match process {
            Process::Bifbm(params) => {
                let mut gram = GramMatrix::from_times(grid.times(), params)?;
                if params.is_extended() {
                    let tol = gram.default_psd_tol();
                    psd_check(&mut gram, tol).map_err(|e| Error::ExtendedRegimeRejected {
                        k: params.k(),
                        reason: e.to_string(),
                    })?;
                }
                Ok(Sampler::cholesky(cholesky_factor(&gram, 0.0)?))
            }
            Process::FbmScaled(f) => {
                if grid.is_uniform() {
                    match CirculantEmbedding::new(f.hurst, grid.len(), grid.horizon(), f.scale) {
                        Ok(c) => return Ok(Sampler::Circulant(c)),
                        Err(Error::NotPositiveSemidefinite { .. }) => {}
                        Err(e) => return Err(e),
                    }
                    let gram = GramMatrix::from_times(grid.times(), f)?;
                    return Ok(Sampler::Cholesky {
                        factor: cholesky_factor(&gram, 0.0)?,
                        circulant_fallback: true,
                    });
                }
                let gram = GramMatrix::from_times(grid.times(), f)?;
                Ok(Sampler::cholesky(cholesky_factor(&gram, 0.0)?))
            }
        }
    }

    pub fn grid_points(&self) -> usize {
        match self {
            Sampler::Cholesky { factor, .. } => factor.dim(),
            Sampler::Circulant(c) => c.grid_points(),
        }
    }

    /// One block of `rows` paths from one stream.
    pub fn sample_block(&self, stream: StreamSeed, rows: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        match self {
            Sampler::Cholesky { factor, .. } => {
                let mut z = vec![0.0; rows * factor.dim()];
                rng.fill_normals(&mut z);
                paths_from_normals(factor, &z, rows)
            }
            Sampler::Circulant(c) => c.sample_block(&mut rng, rows),
        }
    }

    /// Runs `f(block_index, block_rows, values)` for every block of `paths`
    /// rows on the current rayon pool; results come back in block order.
    pub fn map_blocks<T, F>(&self, master: u64, paths: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize, Vec<f64>) -> T + Sync,
    {
        let blocks = paths.div_ceil(BATCH_ROWS);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let rows = BATCH_ROWS.min(paths - b * BATCH_ROWS);
                let values = self.sample_block(derive_stream(master, b as u64), rows);
                f(b, rows, values)
            })
            .collect()
    }

    fn seed_info(&self, master: u64, paths: usize) -> SeedInfo {
        let (jitter, circulant_fallback) = match self {
            Sampler::Cholesky {
                factor,
                circulant_fallback,
            } => (factor.jitter, *circulant_fallback),
            Sampler::Circulant(_) => (0.0, false),
        };
        SeedInfo {
            master,
            batches: paths.div_ceil(BATCH_ROWS) as u64,
            jitter,
            circulant_fallback,
        }
    }

    /// Materializes `paths` rows.
    pub fn sample(&self, process: &Process, grid: &TimeGrid, master: u64, paths: usize) -> PathBatch {
        assert_eq!(grid.len(), self.grid_points(), "sampler prepared for another grid");
        let blocks = self.map_blocks(master, paths, |_, _, v| v);
        PathBatch {
            grid: grid.clone(),
            rows: paths,
            values: blocks.concat(),
            label: process.label(),
            seed_info: self.seed_info(master, paths),
        }
    }
}

/// `M` Cholesky paths of the factor's process on `grid`.
pub fn sample_paths(
    factor: &LowerFactor,
    grid: &TimeGrid,
    label: ProcessLabel,
    paths: usize,
    master: u64,
) -> PathBatch {
    let sampler = Sampler::cholesky(factor.clone());
    let blocks = sampler.map_blocks(master, paths, |_, _, v| v);
    PathBatch {
        grid: grid.clone(),
        rows: paths,
        values: blocks.concat(),
        label,
        seed_info: sampler.seed_info(master, paths),
    }
}

/// `scale · W^{hurst}` on the uniform grid `j T / n` via circulant embedding,
/// falling back to Cholesky when the embedding has negative eigenvalues.
pub fn sample_fbm_circulant(
    hurst: f64,
    n: usize,
    horizon: f64,
    paths: usize,
    master: u64,
    scale: f64,
) -> Result<PathBatch> {
    let process = Process::FbmScaled(ScaledFbm::new(hurst, scale)?);
    let grid = TimeGrid::uniform(horizon, n)?;
    let sampler = Sampler::prepare(&process, &grid)?;
    Ok(sampler.sample(&process, &grid, master, paths))
}

/// Convenience: prepare and sample in one go.
pub fn sample_process(process: &Process, grid: &TimeGrid, paths: usize, master: u64) -> Result<PathBatch> {
    let sampler = Sampler::prepare(process, grid)?;
    Ok(sampler.sample(process, grid, master, paths))
}
