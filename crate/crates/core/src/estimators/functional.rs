//! Path functionals: extremes of a sampled path, with optional drift, anchor
//! subtraction, floor and a transform from a closed catalog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::power;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    /// `max_t X_t`
    Sup,
    /// `max_t |X_t|`
    SupAbs,
    /// `max_{t,s} (X_t − X_s) = max − min`
    SupIncrement,
    /// `max_t (−X_t) = −min`
    SupNegated,
    /// `max_t (X_t + m(t))`
    SupPlusDrift,
    /// `max_t (X_t + m(t)) − X_s`
    SupDriftMinusAnchor,
}

impl Base {
    fn uses_drift(self) -> bool {
        matches!(self, Base::SupPlusDrift | Base::SupDriftMinusAnchor)
    }
}

/// Polynomial drift `m(t) = coef · t^exponent`, `exponent ≥ 0` (`t^0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub coef: f64,
    pub exponent: f64,
}

impl Drift {
    pub const ZERO: Drift = Drift {
        coef: 0.0,
        exponent: 0.0,
    };

    pub fn new(coef: f64, exponent: f64) -> Result<Self> {
        let d = Drift { coef, exponent };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coef.is_finite() {
            return Err(Error::InvalidParameter {
                field: "drift.coef",
                value: self.coef,
                reason: "must be finite",
            });
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "drift.exponent",
                value: self.exponent,
                reason: "must be finite and >= 0",
            });
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef * power(t, self.exponent)
        }
    }

    fn key(&self) -> (u64, u64) {
        (self.coef.to_bits(), self.exponent.to_bits())
    }

    pub fn label(&self) -> String {
        if self.coef == 0.0 {
            "0".into()
        } else if self.exponent == 0.0 {
            format!("{}", self.coef)
        } else if self.exponent == 1.0 {
            format!("{}t", self.coef)
        } else {
            format!("{}t^{}", self.coef, self.exponent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `x^p`, defined for `x ≥ 0`.
    Moment { p: f64 },
    /// `exp(rate · x)`
    Exp { rate: f64 },
    /// `(x − level)₊`
    Hinge { level: f64 },
    /// `max(x, c)`
    MaxWith { c: f64 },
    /// `1{x ≥ level}`; not convex, used for probabilities only.
    Exceeds { level: f64 },
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Transform::Moment { p } if !(p.is_finite() && p > 0.0) => Err(Error::InvalidParameter {
                field: "moment.p",
                value: p,
                reason: "must be finite and > 0",
            }),
            Transform::Exp { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(Error::InvalidParameter {
                    field: "exp.rate",
                    value: rate,
                    reason: "must be finite and > 0",
                })
            }
            Transform::Hinge { level: v } | Transform::MaxWith { c: v } | Transform::Exceeds { level: v }
                if v.is_nan() =>
            {
                Err(Error::InvalidParameter {
                    field: "transform level",
                    value: v,
                    reason: "must not be NaN",
                })
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Transform::Identity => x,
            Transform::Moment { p } => {
                if x < 0.0 {
                    return Err(Error::Domain(format!("moment of negative value {x}")));
                }
                if p == 1.0 {
                    x
                } else if p == 2.0 {
                    x * x
                } else {
                    power(x, p)
                }
            }
            Transform::Exp { rate } => (rate * x).exp(),
            Transform::Hinge { level } => (x - level).max(0.0),
            Transform::MaxWith { c } => x.max(c),
            Transform::Exceeds { level } => {
                if x >= level {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Non-decreasing and convex on all of ℝ.
    pub fn convex_on_reals(&self) -> bool {
        matches!(
            self,
            Transform::Identity | Transform::Exp { .. } | Transform::Hinge { .. } | Transform::MaxWith { .. }
        )
    }

    /// Non-decreasing and convex on `[0, ∞)`.
    pub fn convex_on_nonnegative(&self) -> bool {
        match *self {
            Transform::Moment { p } => p >= 1.0,
            Transform::Exceeds { .. } => false,
            _ => true,
        }
    }

    pub fn is_exp(&self) -> bool {
        matches!(self, Transform::Exp { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            Transform::Identity => "identity".into(),
            Transform::Moment { p } => format!("moment({p})"),
            Transform::Exp { rate } => format!("exp({rate})"),
            Transform::Hinge { level } => format!("hinge({level})"),
            Transform::MaxWith { c } => format!("max_with({c})"),
            Transform::Exceeds { level } => format!("exceeds({level})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDescriptor {
    pub base: Base,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Drift>,
    /// Path column of the anchor `s` (0 is the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<usize>,
    /// `max(·, c)` applied to the base value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    pub transform: Transform,
}

impl FunctionalDescriptor {
    pub fn new(base: Base) -> Self {
        FunctionalDescriptor {
            base,
            drift: None,
            anchor: None,
            floor: None,
            transform: Transform::Identity,
        }
    }

    pub fn sup() -> Self {
        Self::new(Base::Sup)
    }

    pub fn sup_abs() -> Self {
        Self::new(Base::SupAbs)
    }

    pub fn sup_increment() -> Self {
        Self::new(Base::SupIncrement)
    }

    pub fn sup_negated() -> Self {
        Self::new(Base::SupNegated)
    }

    pub fn sup_plus_drift(drift: Drift) -> Self {
        FunctionalDescriptor {
            drift: Some(drift),
            ..Self::new(Base::SupPlusDrift)
        }
    }

    pub fn sup_drift_minus_anchor(drift: Drift, anchor: usize) -> Self {
        FunctionalDescriptor {
            drift: Some(drift),
            anchor: Some(anchor),
            ..Self::new(Base::SupDriftMinusAnchor)
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_floor(mut self, c: f64) -> Self {
        self.floor = Some(c);
        self
    }

    fn drift_or_zero(&self) -> Drift {
        self.drift.unwrap_or(Drift::ZERO)
    }

    /// A value the base (after the floor) can never fall below on `grid`.
    pub fn lower_bound(&self, grid: &TimeGrid) -> f64 {
        let origin = grid.includes_origin();
        let lb = match self.base {
            Base::SupAbs | Base::SupIncrement => 0.0,
            Base::Sup | Base::SupNegated => {
                if origin {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Base::SupPlusDrift => {
                if origin {
                    self.drift_or_zero().value(0.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Base::SupDriftMinusAnchor => match self.anchor {
                Some(s) if s >= grid.first_active_column() && s < grid.columns() => {
                    self.drift_or_zero().value(grid.column_time(s))
                }
                _ => f64::NEG_INFINITY,
            },
        };
        match self.floor {
            Some(c) => lb.max(c),
            None => lb,
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        self.transform.validate()?;
        if let Some(d) = &self.drift {
            if !self.base.uses_drift() {
                return Err(Error::Domain(format!("drift given for base {:?}", self.base)));
            }
            d.validate()?;
        }
        match (self.base, self.anchor) {
            (Base::SupDriftMinusAnchor, None) => {
                return Err(Error::Domain("anchored functional needs an anchor column".into()))
            }
            (Base::SupDriftMinusAnchor, Some(s)) if s >= grid.columns() => {
                return Err(Error::Domain(format!(
                    "anchor column {s} outside grid with {} columns",
                    grid.columns()
                )))
            }
            (b, Some(_)) if b != Base::SupDriftMinusAnchor => {
                return Err(Error::Domain(format!("anchor given for base {b:?}")))
            }
            _ => {}
        }
        if let Some(c) = self.floor {
            if c.is_nan() {
                return Err(Error::InvalidParameter {
                    field: "floor",
                    value: c,
                    reason: "must not be NaN",
                });
            }
        }
        if matches!(self.transform, Transform::Moment { .. }) && self.lower_bound(grid) < 0.0 {
            return Err(Error::Domain(
                "moment transform needs a base that is nonnegative on every path".into(),
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let mut s = format!("{:?}", self.base);
        if let Some(d) = &self.drift {
            s.push_str(&format!("[m={}]", d.label()));
        }
        if let Some(a) = self.anchor {
            s.push_str(&format!("[s=col{a}]"));
        }
        if let Some(c) = self.floor {
            s.push_str(&format!("[c={c}]"));
        }
        if self.transform != Transform::Identity {
            s.push_str(&format!("|{}", self.transform.label()));
        }
        s
    }
}

/// Extremes of one path over its active columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFunctionals {
    pub sup: f64,
    pub inf: f64,
    pub sup_abs: f64,
    pub sup_increment: f64,
}

/// Extremes of `values` (which should include the origin value 0).
pub fn path_functionals(values: &[f64]) -> PathFunctionals {
    assert!(!values.is_empty(), "path must not be empty");
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for &v in values {
        sup = sup.max(v);
        inf = inf.min(v);
    }
    PathFunctionals {
        sup,
        inf,
        sup_abs: sup.abs().max(inf.abs()),
        sup_increment: sup - inf,
    }
}

fn finish(f: &FunctionalDescriptor, base_value: f64) -> Result<f64> {
    let v = match f.floor {
        Some(c) => base_value.max(c),
        None => base_value,
    };
    f.transform.apply(v)
}

/// Evaluates one descriptor on one path row (`grid.columns()` values).
pub fn apply_functional(row: &[f64], grid: &TimeGrid, f: &FunctionalDescriptor) -> Result<f64> {
    if row.len() != grid.columns() {
        return Err(Error::Domain(format!(
            "path has {} values, grid has {} columns",
            row.len(),
            grid.columns()
        )));
    }
    f.validate(grid)?;
    let first = grid.first_active_column();
    let active = &row[first..];
    let base = match f.base {
        Base::Sup | Base::SupAbs | Base::SupIncrement | Base::SupNegated => {
            let pf = path_functionals(active);
            match f.base {
                Base::Sup => pf.sup,
                Base::SupAbs => pf.sup_abs,
                Base::SupIncrement => pf.sup_increment,
                _ => -pf.inf,
            }
        }
        Base::SupPlusDrift | Base::SupDriftMinusAnchor => {
            let d = f.drift_or_zero();
            let m = (first..row.len())
                .map(|j| row[j] + d.value(grid.column_time(j)))
                .fold(f64::NEG_INFINITY, f64::max);
            match f.anchor {
                Some(s) if f.base == Base::SupDriftMinusAnchor => m - row[s],
                _ => m,
            }
        }
    };
    finish(f, base)
}

/// Many descriptors evaluated together: the plain extremes are computed once
/// per row, and each distinct drift costs one pass.
#[derive(Debug, Clone)]
pub struct FunctionalSet {
    grid: TimeGrid,
    descriptors: Vec<FunctionalDescriptor>,
    drift_index: Vec<Option<usize>>,
    drift_values: Vec<Vec<f64>>,
}

impl FunctionalSet {
    pub fn new(grid: &TimeGrid, descriptors: Vec<FunctionalDescriptor>) -> Result<Self> {
        let mut keys: Vec<(u64, u64)> = Vec::new();
        let mut drift_values = Vec::new();
        let mut drift_index = Vec::with_capacity(descriptors.len());
        for f in &descriptors {
            f.validate(grid)?;
            if f.base.uses_drift() {
                let d = f.drift_or_zero();
                let idx = match keys.iter().position(|k| *k == d.key()) {
                    Some(i) => i,
                    None => {
                        keys.push(d.key());
                        drift_values.push((0..grid.columns()).map(|j| d.value(grid.column_time(j))).collect());
                        keys.len() - 1
                    }
                };
                drift_index.push(Some(idx));
            } else {
                drift_index.push(None);
            }
        }
        Ok(FunctionalSet {
            grid: grid.clone(),
            descriptors,
            drift_index,
            drift_values,
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[FunctionalDescriptor] {
        &self.descriptors
    }

    /// Writes one value per descriptor into `out`. `drift_max` is scratch of
    /// length at least the number of distinct drifts.
    pub fn evaluate_row(&self, row: &[f64], out: &mut [f64], drift_max: &mut Vec<f64>) -> Result<()> {
        debug_assert_eq!(row.len(), self.grid.columns());
        let first = self.grid.first_active_column();
        let pf = path_functionals(&row[first..]);
        drift_max.clear();
        for m in &self.drift_values {
            let mut best = f64::NEG_INFINITY;
            for j in first..row.len() {
                best = best.max(row[j] + m[j]);
            }
            drift_max.push(best);
        }
        for ((f, slot), di) in self.descriptors.iter().zip(out.iter_mut()).zip(&self.drift_index) {
            let base = match f.base {
                Base::Sup => pf.sup,
                Base::SupAbs => pf.sup_abs,
                Base::SupIncrement => pf.sup_increment,
                Base::SupNegated => -pf.inf,
                Base::SupPlusDrift => drift_max[di.unwrap()],
                Base::SupDriftMinusAnchor => drift_max[di.unwrap()] - row[f.anchor.unwrap()],
            };
            *slot = finish(f, base)?;
        }
        Ok(())
    }
}
