use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Drift, Transform};
use crate::harness::CheckFamily;
use crate::kernels::KernelParams;

fn bad(field: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {why}"))
}

fn check_positive(field: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(bad(field, "must not be empty"));
    }
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(v) => Err(bad(field, format!("{v} is not a finite positive number"))),
        None => Ok(()),
    }
}

fn check_finite(field: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(bad(field, format!("{v} is not finite"))),
        None => Ok(()),
    }
}

fn check_transforms(field: &str, ts: &[Transform], nonnegative_base: bool) -> Result<()> {
    for t in ts {
        t.validate().map_err(|e| bad(field, e))?;
        let ok = if nonnegative_base {
            t.convex_on_nonnegative()
        } else {
            t.convex_on_nonnegative() || t.convex_on_reals()
        };
        if !ok {
            return Err(bad(field, format!("{} is not non-decreasing and convex", t.label())));
        }
    }
    Ok(())
}

fn check_drifts(field: &str, ds: &[Drift]) -> Result<()> {
    for d in ds {
        d.validate().map_err(|e| bad(field, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// Absolute horizons; every pair `T₁ < T₂` is checked.
    pub horizons: Vec<f64>,
    pub moments: Vec<f64>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            horizons: vec![0.5, 1.0, 2.0],
            moments: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementConfig {
    pub transforms: Vec<Transform>,
}

impl Default for IncrementConfig {
    fn default() -> Self {
        IncrementConfig {
            transforms: vec![
                Transform::Identity,
                Transform::Moment { p: 2.0 },
                Transform::Hinge { level: 1.0 },
            ],
        }
    }
}

fn default_drifts() -> Vec<Drift> {
    vec![
        Drift::ZERO,
        Drift {
            coef: 1.0,
            exponent: 1.0,
        },
        Drift {
            coef: -2.0,
            exponent: 1.0,
        },
        Drift {
            coef: 0.1,
            exponent: 2.0,
        },
    ]
}

fn default_convex() -> Vec<Transform> {
    vec![
        Transform::Identity,
        Transform::Hinge { level: 0.0 },
        Transform::Moment { p: 2.0 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub drifts: Vec<Drift>,
    /// Anchor times as fractions of `T`, snapped to the nearest grid column.
    pub anchors: Vec<f64>,
    pub floors: Vec<f64>,
    /// Transforms not valid for a given functional are skipped.
    pub transforms: Vec<Transform>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            drifts: default_drifts(),
            anchors: vec![0.0, 0.5],
            floors: vec![0.0, 0.5],
            transforms: default_convex(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VitaleConfig {
    pub drifts: Vec<Drift>,
    pub floors: Vec<f64>,
    pub transforms: Vec<Transform>,
    /// Integrated-tail levels in units of `T^{HK}`.
    pub tail_levels: Vec<f64>,
}

impl Default for VitaleConfig {
    fn default() -> Self {
        VitaleConfig {
            drifts: default_drifts(),
            floors: vec![0.0, 0.5],
            transforms: default_convex(),
            tail_levels: vec![0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WillsConfig {
    /// Deviation levels `a` in units of `T^{HK}`.
    pub levels: Vec<f64>,
}

impl Default for WillsConfig {
    fn default() -> Self {
        WillsConfig {
            levels: vec![0.5, 1.0, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReflectionConfig {
    /// Levels `u` in units of `T^{HK}`; non-positive levels are skipped.
    pub levels: Vec<f64>,
    /// Rescaling factors `r`: sup over `[0, rT]` against sup over `[0, T]`.
    pub rescale: Vec<f64>,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            levels: vec![0.5, 1.0, 1.5],
            rescale: vec![0.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub hurst: Vec<f64>,
    pub k: Vec<f64>,
    pub horizon: f64,
    pub n: usize,
    pub paths: usize,
    /// Paths for the stream-coupled (exact) rescaling checks.
    pub coupled_paths: usize,
    pub seed: u64,
    pub z_crit: f64,
    /// Multiplier for the checks stated with an explicit `3·stderr` allowance.
    pub tail_sigmas: f64,
    /// Absolute allowance for the hinge-versus-quadrature agreement.
    pub quadrature_tol: f64,
    /// Points on each exported tail curve, spread over `[0, 3·T^{HK}]`.
    pub tail_curve_points: usize,
    pub checks: Vec<CheckFamily>,
    pub scaling: ScalingConfig,
    pub increment_convex: IncrementConfig,
    pub drift: DriftConfig,
    pub vitale: VitaleConfig,
    pub wills: WillsConfig,
    pub reflection: ReflectionConfig,
    /// Test hook: sample `Y⁽²⁾` where `Y⁽¹⁾` is expected and vice versa,
    /// while the analytic preconditions keep the nominal roles.
    #[serde(skip)]
    pub swap_comparisons: bool,
}

pub const DEFAULT_SEED: u64 = 20_240_611;

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            hurst: vec![0.25, 0.5, 0.75],
            k: vec![0.5, 0.75, 1.0],
            horizon: 1.0,
            n: 512,
            paths: 200_000,
            coupled_paths: 16_384,
            seed: DEFAULT_SEED,
            z_crit: super::DEFAULT_Z_CRIT,
            tail_sigmas: 3.0,
            quadrature_tol: 1e-3,
            tail_curve_points: 61,
            checks: CheckFamily::ALL.to_vec(),
            scaling: ScalingConfig::default(),
            increment_convex: IncrementConfig::default(),
            drift: DriftConfig::default(),
            vitale: VitaleConfig::default(),
            wills: WillsConfig::default(),
            reflection: ReflectionConfig::default(),
            swap_comparisons: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hurst.is_empty() {
            return Err(bad("hurst", "must not be empty"));
        }
        if self.k.is_empty() {
            return Err(bad("k", "must not be empty"));
        }
        for &h in &self.hurst {
            if !(h.is_finite() && h > 0.0 && h < 1.0) {
                return Err(bad("hurst", format!("{h} must lie in (0, 1)")));
            }
            for &k in &self.k {
                KernelParams::bifbm(h, k).map_err(|e| bad("k", e))?;
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(bad("horizon", format!("{} must be finite and > 0", self.horizon)));
        }
        if self.n == 0 {
            return Err(bad("n", "must be >= 1"));
        }
        if self.paths < 2 {
            return Err(bad("paths", "must be >= 2"));
        }
        if self.coupled_paths < 2 {
            return Err(bad("coupled_paths", "must be >= 2"));
        }
        for (field, v) in [
            ("z_crit", self.z_crit),
            ("tail_sigmas", self.tail_sigmas),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(field, format!("{v} must be finite and > 0")));
            }
        }
        if !(self.quadrature_tol.is_finite() && self.quadrature_tol >= 0.0) {
            return Err(bad("quadrature_tol", "must be finite and >= 0"));
        }
        if self.tail_curve_points == 1 {
            return Err(bad("tail_curve_points", "must be 0 or >= 2"));
        }
        if self.checks.is_empty() {
            return Err(bad("checks", "must enable at least one check"));
        }

        check_positive("scaling.horizons", &self.scaling.horizons)?;
        check_positive("scaling.moments", &self.scaling.moments)?;
        if self.checks.contains(&CheckFamily::Scaling) && self.distinct_horizons().len() < 2 {
            return Err(bad("scaling.horizons", "needs at least two distinct horizons"));
        }

        check_transforms("increment_convex.transforms", &self.increment_convex.transforms, true)?;

        check_drifts("drift.drifts", &self.drift.drifts)?;
        check_finite("drift.floors", &self.drift.floors)?;
        check_transforms("drift.transforms", &self.drift.transforms, false)?;
        if let Some(a) = self.drift.anchors.iter().find(|a| !(**a >= 0.0 && **a <= 1.0)) {
            return Err(bad("drift.anchors", format!("{a} must lie in [0, 1]")));
        }

        check_drifts("vitale.drifts", &self.vitale.drifts)?;
        check_finite("vitale.floors", &self.vitale.floors)?;
        check_transforms("vitale.transforms", &self.vitale.transforms, false)?;
        if let Some(t) = self.vitale.tail_levels.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(bad("vitale.tail_levels", format!("{t} must be finite and >= 0")));
        }

        check_positive("wills.levels", &self.wills.levels)?;
        check_finite("reflection.levels", &self.reflection.levels)?;
        check_positive("reflection.rescale", &self.reflection.rescale)?;
        Ok(())
    }

    /// Scaling horizons, sorted and deduplicated.
    pub fn distinct_horizons(&self) -> Vec<f64> {
        let mut hs = self.scaling.horizons.clone();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        hs
    }

    /// Anchor column for a fraction of `T` on the sweep grid.
    pub fn anchor_column(&self, fraction: f64) -> usize {
        (fraction * self.n as f64).round() as usize
    }

    /// Number of records one `(H, K)` pair produces with every family enabled.
    pub fn records_per_pair(&self, family: CheckFamily) -> usize {
        checks::record_count(self, family)
    }
}

use super::checks;
