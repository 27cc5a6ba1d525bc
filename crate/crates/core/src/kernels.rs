//! Closed-form covariance kernels for fractional and bifractional Brownian
//! motion, Gram matrices on time grids, and the analytic properties the
//! comparison checks depend on.
//!
//! fBm with Hurst index `H`:
//!
//! ```text
//! R_H(s, t) = ½ (t^{2H} + s^{2H} − |t − s|^{2H})
//! ```
//!
//! bifBm with indices `(H, K)`:
//!
//! ```text
//! C(s, t) = 2^{−K} [ (t^{2H} + s^{2H})^K − |t − s|^{2HK} ]
//! ```
//!
//! For `K ∈ (0, 1]` the increments satisfy
//! `2^{−K}|t−s|^{2HK} ≤ E(W_t − W_s)² ≤ 2^{1−K}|t−s|^{2HK}`, which is what makes
//! the scaled fBm processes `Y1 = 2^{(1−K)/2} W^{HK}` and `Y2 = 2^{−K/2} W^{HK}`
//! valid comparison processes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{validate_times, TimeGrid};

/// `x^alpha` as `exp(alpha ln x)`, with `0^alpha = 0` for `alpha > 0`.
#[inline]
pub fn power(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        if alpha > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        (alpha * x.ln()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Fbm,
    Bifbm,
}

/// Validated `(H, K)` pair. `hk` is cached as the exact product `H·K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    kind: KernelKind,
    h: f64,
    k: f64,
    hk: f64,
}

impl KernelParams {
    pub fn new(kind: KernelKind, h: f64, k: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0 && h < 1.0) {
            return Err(Error::InvalidParameter {
                field: "H",
                value: h,
                reason: "must lie in (0, 1)",
            });
        }
        if !(k.is_finite() && k > 0.0 && k < 2.0) {
            return Err(Error::InvalidParameter {
                field: "K",
                value: k,
                reason: "must lie in (0, 2)",
            });
        }
        if kind == KernelKind::Fbm && k != 1.0 {
            return Err(Error::InvalidParameter {
                field: "K",
                value: k,
                reason: "fBm kernel requires K = 1",
            });
        }
        let hk = h * k;
        if k > 1.0 && hk >= 1.0 {
            return Err(Error::InvalidParameter {
                field: "K",
                value: k,
                reason: "extended regime K > 1 requires H*K < 1",
            });
        }
        Ok(KernelParams { kind, h, k, hk })
    }

    pub fn fbm(h: f64) -> Result<Self> {
        Self::new(KernelKind::Fbm, h, 1.0)
    }

    pub fn bifbm(h: f64, k: f64) -> Result<Self> {
        Self::new(KernelKind::Bifbm, h, k)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Self-similarity index `H·K`.
    pub fn hk(&self) -> f64 {
        self.hk
    }

    /// `K > 1`: admissible only after a numerical PSD check.
    pub fn is_extended(&self) -> bool {
        self.k > 1.0
    }
}

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field: name,
            value: t,
            reason: "time must be finite and >= 0",
        })
    }
}

fn fbm_cov_unchecked(s: f64, t: f64, h: f64) -> f64 {
    if s == t {
        return power(t, 2.0 * h);
    }
    0.5 * (power(t, 2.0 * h) + power(s, 2.0 * h) - power((t - s).abs(), 2.0 * h))
}

fn bifbm_cov_unchecked(s: f64, t: f64, p: &KernelParams) -> f64 {
    if s == t {
        return power(t, 2.0 * p.hk);
    }
    let sum = power(t, 2.0 * p.h) + power(s, 2.0 * p.h);
    power(2.0, -p.k) * (power(sum, p.k) - power((t - s).abs(), 2.0 * p.hk))
}

/// fBm covariance `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_cov(s: f64, t: f64, h: f64) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter {
            field: "H",
            value: h,
            reason: "must lie in (0, 1)",
        });
    }
    Ok(fbm_cov_unchecked(s, t, h))
}

/// bifBm covariance `2^{−K}[(t^{2H} + s^{2H})^K − |t−s|^{2HK}]`.
pub fn bifbm_cov(s: f64, t: f64, params: &KernelParams) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    Ok(params.cov(s, t))
}

/// `E(W_t − W_s)²`, composed from the kernel.
pub fn increment_variance(s: f64, t: f64, params: &KernelParams) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    Ok(params.increment_variance(s, t))
}

/// The increment sandwich `(2^{−K}|t−s|^{2HK}, 2^{1−K}|t−s|^{2HK})`.
pub fn increment_bounds(s: f64, t: f64, params: &KernelParams) -> Result<(f64, f64)> {
    check_time("s", s)?;
    check_time("t", t)?;
    let lo = power(2.0, -params.k) * power((t - s).abs(), 2.0 * params.hk);
    Ok((lo, 2.0 * lo))
}

/// A centered Gaussian process given by its covariance function.
pub trait Covariance: Sync {
    fn cov(&self, s: f64, t: f64) -> f64;

    fn variance(&self, t: f64) -> f64 {
        self.cov(t, t)
    }

    fn increment_variance(&self, s: f64, t: f64) -> f64 {
        if s == t {
            return 0.0;
        }
        (self.variance(t) + self.variance(s) - 2.0 * self.cov(s, t)).max(0.0)
    }
}

impl Covariance for KernelParams {
    fn cov(&self, s: f64, t: f64) -> f64 {
        match self.kind {
            KernelKind::Fbm => fbm_cov_unchecked(s, t, self.h),
            KernelKind::Bifbm => bifbm_cov_unchecked(s, t, self),
        }
    }
}

/// `scale · W^{hurst}` for a standard fBm `W^{hurst}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledFbm {
    pub hurst: f64,
    pub scale: f64,
}

impl ScaledFbm {
    pub fn new(hurst: f64, scale: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::InvalidParameter {
                field: "hurst",
                value: hurst,
                reason: "must lie in (0, 1)",
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                field: "scale",
                value: scale,
                reason: "must be finite and > 0",
            });
        }
        Ok(ScaledFbm { hurst, scale })
    }
}

impl Covariance for ScaledFbm {
    fn cov(&self, s: f64, t: f64) -> f64 {
        self.scale * self.scale * fbm_cov_unchecked(s, t, self.hurst)
    }
}

/// The two scaled-fBm comparison processes for a bifBm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    /// `2^{(1−K)/2} W^{HK}`, dominates the bifBm increments.
    Y1,
    /// `2^{−K/2} W^{HK}`, dominated by the bifBm increments.
    Y2,
}

impl Comparison {
    pub fn scale(self, k: f64) -> f64 {
        match self {
            Comparison::Y1 => power(2.0, (1.0 - k) / 2.0),
            Comparison::Y2 => power(2.0, -k / 2.0),
        }
    }

    pub fn process(self, params: &KernelParams) -> ScaledFbm {
        ScaledFbm {
            hurst: params.hk,
            scale: self.scale(params.k),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Comparison::Y1 => "Y1",
            Comparison::Y2 => "Y2",
        }
    }
}

/// Kernel evaluations at the strictly positive grid times.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
    pub min_eig: Option<f64>,
}

impl GramMatrix {
    pub fn from_times<C: Covariance + ?Sized>(times: &[f64], kernel: &C) -> Result<Self> {
        validate_times(times)?;
        let n = times.len();
        let mut values = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = kernel.cov(times[i], times[j]);
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Ok(GramMatrix {
            times: times.to_vec(),
            values,
            min_eig: None,
        })
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::Domain("Gram matrix must be square".into()));
        }
        Ok(GramMatrix {
            times: Vec::new(),
            values,
            min_eig: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.values.diagonal().iter().cloned().fold(0.0, f64::max)
    }

    /// Relative PSD tolerance `1e-8 · max diagonal`.
    pub fn default_psd_tol(&self) -> f64 {
        1e-8 * self.max_diagonal()
    }
}

/// Gram matrix of `params` on `grid` (origin excluded).
pub fn gram_matrix(grid: &TimeGrid, params: &KernelParams) -> Result<GramMatrix> {
    GramMatrix::from_times(grid.times(), params)
}

/// Smallest eigenvalue of the Gram matrix; errors when it is below `-psd_tol`.
/// The eigenvalue is cached in `gram.min_eig` either way.
pub fn psd_check(gram: &mut GramMatrix, psd_tol: f64) -> Result<f64> {
    let n = gram.dim();
    if n == 0 {
        return Err(Error::Domain("empty Gram matrix".into()));
    }
    for j in 0..n {
        for i in j + 1..n {
            if gram.values[(i, j)] != gram.values[(j, i)] {
                return Err(Error::Domain(format!("Gram matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let eigs = gram.values.clone().symmetric_eigenvalues();
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    gram.min_eig = Some(min_eig);
    if min_eig < -psd_tol {
        Err(Error::NotPositiveSemidefinite { min_eig, tol: psd_tol })
    } else {
        Ok(min_eig)
    }
}

/// Pointwise variance ordering on the grid: `C(t,t) ≤ E(Y1_t²)` for `Y1`,
/// `E(Y2_t²) ≤ C(t,t)` for `Y2`.
pub fn variance_domination(params: &KernelParams, comparison: Comparison, grid: &TimeGrid) -> bool {
    let y = comparison.process(params);
    grid.times().iter().all(|&t| {
        let x_var = params.variance(t);
        let y_var = y.variance(t);
        let slack = 1e-12 * x_var.max(y_var);
        match comparison {
            Comparison::Y1 => x_var <= y_var + slack,
            Comparison::Y2 => y_var <= x_var + slack,
        }
    })
}

/// Increment-variance ordering between the bifBm and a comparison process,
/// over every pair of grid points including the origin. Returns the worst
/// violation (positive means violated) together with the offending pair.
pub fn increment_domination_gap(
    params: &KernelParams,
    comparison: Comparison,
    grid: &TimeGrid,
) -> (f64, (f64, f64)) {
    let y = comparison.process(params);
    let mut points = Vec::with_capacity(grid.len() + 1);
    points.push(0.0);
    points.extend_from_slice(grid.times());
    let mut worst = (f64::NEG_INFINITY, (0.0, 0.0));
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (s, t) = (points[i], points[j]);
            let x = params.increment_variance(s, t);
            let yv = y.increment_variance(s, t);
            let gap = match comparison {
                Comparison::Y1 => x - yv,
                Comparison::Y2 => yv - x,
            };
            if gap > worst.0 {
                worst = (gap, (s, t));
            }
        }
    }
    worst
}

/// Sudakov–Fernique hypothesis on the grid, with the absolute tolerance used
/// by the property tests.
pub fn check_increment_domination(
    params: &KernelParams,
    comparison: Comparison,
    grid: &TimeGrid,
) -> Result<()> {
    let (gap, (s, t)) = increment_domination_gap(params, comparison, grid);
    if gap > 1e-10 {
        Err(Error::PreconditionViolated(format!(
            "increment variance ordering against {} fails at (s, t) = ({s}, {t}) by {gap:e}",
            comparison.label()
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fbm_cov_examples() {
        assert!(close(fbm_cov(1.0, 2.0, 0.5).unwrap(), 1.0, 1e-14));
        assert!(close(fbm_cov(3.0, 3.0, 0.7).unwrap(), 3f64.powf(1.4), 1e-13));
        assert!(close(fbm_cov(3.0, 3.0, 0.7).unwrap(), 4.65553, 1e-5));
        // ½(8 + 1 − 3^{1.5})
        assert!(close(fbm_cov(1.0, 4.0, 0.75).unwrap(), 1.901923788646684, 1e-12));
    }

    #[test]
    fn fbm_cov_rejects_bad_inputs() {
        assert!(fbm_cov(-1.0, 1.0, 0.5).is_err());
        assert!(fbm_cov(1.0, 1.0, 1.0).is_err());
        assert!(fbm_cov(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bifbm_cov_examples() {
        let bm = KernelParams::bifbm(0.5, 1.0).unwrap();
        assert!(close(bifbm_cov(1.0, 2.0, &bm).unwrap(), 1.0, 1e-14));
        let p = KernelParams::bifbm(0.5, 0.5).unwrap();
        // (√5 − √3)/√2
        let expected = (5f64.sqrt() - 3f64.sqrt()) / 2f64.sqrt();
        assert!(close(bifbm_cov(1.0, 4.0, &p).unwrap(), expected, 1e-14));
        assert!(close(expected, 0.356394, 1e-6));
        let q = KernelParams::bifbm(0.3, 0.7).unwrap();
        assert!(close(bifbm_cov(2.5, 2.5, &q).unwrap(), 2.5f64.powf(2.0 * 0.21), 1e-14));
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::bifbm(1.5, 0.5).is_err());
        assert!(KernelParams::bifbm(0.5, 0.0).is_err());
        assert!(KernelParams::bifbm(0.5, 2.0).is_err());
        assert!(KernelParams::bifbm(0.7, 1.5).is_err());
        assert!(KernelParams::new(KernelKind::Fbm, 0.5, 0.5).is_err());
        let ext = KernelParams::bifbm(0.4, 1.5).unwrap();
        assert!(ext.is_extended());
        assert_eq!(ext.hk(), 0.4 * 1.5);
    }

    #[test]
    fn increment_examples() {
        let p = KernelParams::bifbm(0.5, 0.5).unwrap();
        assert_eq!(increment_variance(2.0, 2.0, &p).unwrap(), 0.0);
        let bm = KernelParams::bifbm(0.5, 1.0).unwrap();
        assert!(close(increment_variance(0.0, 1.0, &bm).unwrap(), 1.0, 1e-14));
        let iv = increment_variance(1.0, 4.0, &p).unwrap();
        assert!(close(iv, 3.0 - 2.0 * 0.3563939, 1e-6));
        assert!(close(iv, 2.287212, 1e-6));

        assert_eq!(increment_bounds(3.0, 3.0, &p).unwrap(), (0.0, 0.0));
        let (lo, hi) = increment_bounds(0.0, 1.0, &KernelParams::bifbm(0.3, 1.0).unwrap()).unwrap();
        assert_eq!((lo, hi), (0.5, 1.0));
        // |t−s|^{2HK} = 3^{1/2}, so the bounds are (√(3/2), √6).
        let (lo, hi) = increment_bounds(1.0, 4.0, &p).unwrap();
        assert!(close(lo, 1.5f64.sqrt(), 1e-14));
        assert!(close(hi, 6f64.sqrt(), 1e-14));
        assert!(lo <= iv && iv <= hi);
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(
            &TimeGrid::from_times(vec![1.0], true).unwrap(),
            &KernelParams::bifbm(0.6, 0.5).unwrap(),
        )
        .unwrap();
        assert!(close(g.values[(0, 0)], 1.0, 1e-15));

        let g = gram_matrix(
            &TimeGrid::from_times(vec![1.0, 2.0], true).unwrap(),
            &KernelParams::bifbm(0.5, 1.0).unwrap(),
        )
        .unwrap();
        let expect = [[1.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(g.values[(i, j)], expect[i][j], 1e-14));
            }
        }

        let g = gram_matrix(
            &TimeGrid::from_times(vec![1.0, 4.0], true).unwrap(),
            &KernelParams::bifbm(0.5, 0.5).unwrap(),
        )
        .unwrap();
        assert!(close(g.values[(0, 1)], 0.356394, 1e-6));
        assert!(close(g.values[(1, 1)], 2.0, 1e-14));
        assert!(GramMatrix::from_times(&[0.0, 1.0], &KernelParams::fbm(0.5).unwrap()).is_err());
        assert!(GramMatrix::from_times(&[1.0, 1.0], &KernelParams::fbm(0.5).unwrap()).is_err());
    }

    #[test]
    fn psd_examples() {
        let mut g = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])).unwrap();
        let e = psd_check(&mut g, 1e-8).unwrap();
        assert!(close(e, (3.0 - 5f64.sqrt()) / 2.0, 1e-12));
        assert!(close(e, 0.381966, 1e-6));
        let mut id = GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert!(close(psd_check(&mut id, 1e-8).unwrap(), 1.0, 1e-14));
        let mut bad = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(
            psd_check(&mut bad, 1e-8),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        assert!(bad.min_eig.unwrap() < 0.0);
    }

    #[test]
    fn variance_domination_examples() {
        let grid = TimeGrid::uniform(2.0, 16).unwrap();
        for (h, k) in [(0.5, 1.0), (0.5, 0.5), (0.25, 0.75)] {
            let p = KernelParams::bifbm(h, k).unwrap();
            assert!(variance_domination(&p, Comparison::Y1, &grid));
            assert!(variance_domination(&p, Comparison::Y2, &grid));
        }
        // 2^{1−K} < 1 once K > 1.
        let ext = KernelParams::bifbm(0.4, 1.5).unwrap();
        assert!(!variance_domination(&ext, Comparison::Y1, &grid));
    }

    #[test]
    fn comparison_scales() {
        assert_eq!(Comparison::Y1.scale(1.0), 1.0);
        assert!(close(Comparison::Y2.scale(1.0), 0.5f64.sqrt(), 1e-15));
        assert!(close(Comparison::Y1.scale(0.5), 2f64.powf(0.25), 1e-15));
    }

    #[test]
    fn increment_domination_holds_for_standard_range() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let p = KernelParams::bifbm(0.75, 0.5).unwrap();
        check_increment_domination(&p, Comparison::Y1, &grid).unwrap();
        check_increment_domination(&p, Comparison::Y2, &grid).unwrap();
    }
}
