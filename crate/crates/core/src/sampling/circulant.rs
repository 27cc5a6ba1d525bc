use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::power;
use crate::rng::NormalStream;

/// Davies–Harte embedding of fractional Gaussian noise on `n` steps of size
/// `T / n` into a circulant of size `2n`.
///
/// One complex FFT of `sqrt(λ/2n)·(a + ib)` yields two independent increment
/// sequences (real and imaginary parts), each with the exact fGn covariance.
#[derive(Clone)]
pub struct CirculantEmbedding {
    n: usize,
    scale: f64,
    sqrt_eig: Vec<f64>,
    min_eig: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("n", &self.n)
            .field("scale", &self.scale)
            .field("min_eig", &self.min_eig)
            .finish()
    }
}

/// Autocovariance of fGn with unit step at lag `k`.
fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * (power(k + 1.0, h2) - 2.0 * power(k, h2) + power((k - 1.0).abs(), h2))
}

impl CirculantEmbedding {
    /// Fails with `NotPositiveSemidefinite` when an eigenvalue is below
    /// `-1e-10 · max eigenvalue`; smaller negative values are clamped to 0.
    pub fn new(hurst: f64, n: usize, horizon: f64, scale: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::InvalidParameter {
                field: "hurst",
                value: hurst,
                reason: "must lie in (0, 1)",
            });
        }
        if n == 0 {
            return Err(Error::InvalidGrid("circulant embedding needs n >= 1".into()));
        }
        let size = 2 * n;
        let step_var = power(horizon / n as f64, 2.0 * hurst);
        let mut c: Vec<Complex64> = Vec::with_capacity(size);
        for k in 0..=n {
            c.push(Complex64::new(step_var * fgn_autocov(k, hurst), 0.0));
        }
        for k in (1..n).rev() {
            c.push(Complex64::new(step_var * fgn_autocov(k, hurst), 0.0));
        }
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut c);
        let max_eig = c.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let min_eig = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let tol = 1e-10 * max_eig.abs();
        if min_eig < -tol {
            return Err(Error::NotPositiveSemidefinite { min_eig, tol });
        }
        let sqrt_eig = c
            .iter()
            .map(|z| (z.re.max(0.0) / size as f64).sqrt())
            .collect();
        Ok(CirculantEmbedding {
            n,
            scale,
            sqrt_eig,
            min_eig,
            fft,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.n
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    /// `rows` paths in the standard row layout. Normals are consumed as
    /// `(a_0, b_0, a_1, b_1, …)` per pair of rows.
    pub fn sample_block(&self, rng: &mut NormalStream, rows: usize) -> Vec<f64> {
        let n = self.n;
        let size = 2 * n;
        let cols = n + 1;
        let mut out = vec![0.0; rows * cols];
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut r = 0;
        while r < rows {
            for (w, &s) in buf.iter_mut().zip(&self.sqrt_eig) {
                let a = rng.next_normal();
                let b = rng.next_normal();
                *w = Complex64::new(s * a, s * b);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let mut acc = 0.0;
            let row = &mut out[r * cols..(r + 1) * cols];
            for j in 0..n {
                acc += buf[j].re;
                row[j + 1] = self.scale * acc;
            }
            r += 1;
            if r < rows {
                let mut acc = 0.0;
                let row = &mut out[r * cols..(r + 1) * cols];
                for j in 0..n {
                    acc += buf[j].im;
                    row[j + 1] = self.scale * acc;
                }
                r += 1;
            }
        }
        out
    }
}
