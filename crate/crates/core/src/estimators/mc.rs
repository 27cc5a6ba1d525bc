use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::functional::{FunctionalDescriptor, FunctionalSet};
use crate::estimators::sum::CompensatedSum;
use crate::sampling::{PathBatch, ProcessLabel};

/// Sample mean with standard error `sd / √M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    /// False when some rows produced non-finite values (EXP overflow).
    pub reliable: bool,
    /// Mean with values capped at the `1 − 1e-6` empirical quantile; a
    /// diagnostic for exponential transforms only, never used in verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capped_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<ProcessLabel>,
}

impl McEstimate {
    /// A known value with zero uncertainty.
    pub fn exact(value: f64) -> Self {
        McEstimate {
            mean: value,
            stderr: 0.0,
            paths: 0,
            reliable: value.is_finite(),
            capped_mean: None,
            functional: None,
            label: None,
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let paths = values.len();
        let reliable = values.iter().all(|v| v.is_finite());
        if paths == 0 {
            return McEstimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                paths,
                reliable: false,
                capped_mean: None,
                functional: None,
                label: None,
            };
        }
        let mean = CompensatedSum::sum_iter(values.iter().copied()) / paths as f64;
        let stderr = if paths < 2 {
            0.0
        } else if reliable {
            let ss = CompensatedSum::sum_iter(values.iter().map(|v| (v - mean) * (v - mean)));
            (ss / (paths - 1) as f64).sqrt() / (paths as f64).sqrt()
        } else {
            f64::NAN
        };
        McEstimate {
            mean,
            stderr,
            paths,
            reliable,
            capped_mean: None,
            functional: None,
            label: None,
        }
    }

    pub fn with_capped_diagnostic(mut self, values: &[f64]) -> Self {
        let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return self;
        }
        finite.sort_by(f64::total_cmp);
        let idx = (((1.0 - 1e-6) * finite.len() as f64).ceil() as usize).clamp(1, finite.len()) - 1;
        let cap = finite[idx];
        let capped = CompensatedSum::sum_iter(values.iter().map(|v| if v.is_nan() { cap } else { v.min(cap) }));
        self.capped_mean = Some(capped / values.len() as f64);
        self
    }

    pub fn describe(mut self, functional: FunctionalDescriptor, label: ProcessLabel) -> Self {
        self.functional = Some(functional);
        self.label = Some(label);
        self
    }
}

/// Values of one functional over every row of a batch, in row order.
pub fn functional_values(batch: &PathBatch, f: &FunctionalDescriptor) -> Result<Vec<f64>> {
    let set = FunctionalSet::new(&batch.grid, vec![*f])?;
    let mut out = Vec::with_capacity(batch.rows);
    let mut slot = [0.0];
    let mut scratch = Vec::new();
    for row in batch.iter_rows() {
        set.evaluate_row(row, &mut slot, &mut scratch)?;
        out.push(slot[0]);
    }
    Ok(out)
}

pub fn mc_estimate(batch: &PathBatch, f: &FunctionalDescriptor) -> Result<McEstimate> {
    if batch.rows < 2 {
        return Err(Error::Domain("Monte Carlo estimate needs at least 2 paths".into()));
    }
    let values = functional_values(batch, f)?;
    let mut est = McEstimate::from_values(&values);
    if f.transform.is_exp() {
        est = est.with_capped_diagnostic(&values);
    }
    Ok(est.describe(*f, batch.label))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub u: f64,
    pub p_hat: f64,
    pub stderr: f64,
}

/// Binomial proportion with its standard error.
pub fn proportion(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|u| u.is_nan()) || levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("tail levels must be ascending".into()));
    }
    Ok(())
}

/// `(u, P̂(S > u), stderr)` for ascending `levels`.
pub fn tail_curve_from_values(sups: &[f64], levels: &[f64]) -> Result<Vec<TailPoint>> {
    check_levels(levels)?;
    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(levels
        .iter()
        .map(|&u| {
            let above = sorted.len() - sorted.partition_point(|&s| s <= u);
            let (p_hat, stderr) = proportion(above, sorted.len());
            TailPoint { u, p_hat, stderr }
        })
        .collect())
}

pub fn tail_curve(batch: &PathBatch, levels: &[f64]) -> Result<Vec<TailPoint>> {
    tail_curve_from_values(&functional_values(batch, &FunctionalDescriptor::sup())?, levels)
}

/// `E[S − t]₊` two ways: the hinge average (primary) and a trapezoid
/// integral of the empirical tail from `t` upwards. The trapezoid error is
/// at most `quadrature_step / 2` for an empirical survival function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratedTail {
    pub level: f64,
    pub hinge: McEstimate,
    pub quadrature: f64,
    pub quadrature_step: f64,
}

const QUADRATURE_STEP: f64 = 1e-3;
const QUADRATURE_MAX_NODES: usize = 400_000;

pub fn integrated_tail_from_values(sups: &[f64], t: f64) -> Result<IntegratedTail> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "t",
            value: t,
            reason: "must be finite and >= 0",
        });
    }
    let hinge_vals: Vec<f64> = sups.iter().map(|s| (s - t).max(0.0)).collect();
    let hinge = McEstimate::from_values(&hinge_vals);

    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    let upper = sorted.last().copied().unwrap_or(t);
    let (quadrature, step) = if upper <= t {
        (0.0, QUADRATURE_STEP)
    } else {
        let span = upper - t;
        let nodes = ((span / QUADRATURE_STEP).ceil() as usize).clamp(1, QUADRATURE_MAX_NODES);
        let h = span / nodes as f64;
        let total = sorted.len() as f64;
        let surv = |u: f64| (sorted.len() - sorted.partition_point(|&s| s <= u)) as f64 / total;
        let mut acc = CompensatedSum::new();
        let mut prev = surv(t);
        for i in 1..=nodes {
            let cur = surv(t + h * i as f64);
            acc.add(0.5 * h * (prev + cur));
            prev = cur;
        }
        (acc.value(), h)
    };
    Ok(IntegratedTail {
        level: t,
        hinge,
        quadrature,
        quadrature_step: step,
    })
}

pub fn integrated_tail(batch: &PathBatch, t: f64) -> Result<IntegratedTail> {
    integrated_tail_from_values(&functional_values(batch, &FunctionalDescriptor::sup())?, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_values_have_zero_stderr() {
        let e = McEstimate::from_values(&[1.5; 10]);
        assert_eq!(e.mean, 1.5);
        assert_eq!(e.stderr, 0.0);
        assert!(e.reliable);
    }

    #[test]
    fn stderr_matches_definition() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let e = McEstimate::from_values(&v);
        // sample sd = sqrt(5/3)
        assert!((e.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn overflow_marks_unreliable() {
        let e = McEstimate::from_values(&[1.0, f64::INFINITY, 2.0]).with_capped_diagnostic(&[1.0, f64::INFINITY, 2.0]);
        assert!(!e.reliable);
        assert!(e.capped_mean.unwrap().is_finite());
    }

    #[test]
    fn tail_curve_edges() {
        let sups = [0.0, 0.5, 1.0, 2.0];
        let t = tail_curve_from_values(&sups, &[-1.0, 0.5, 10.0]).unwrap();
        assert_eq!(t[0].p_hat, 1.0);
        assert_eq!(t[1].p_hat, 0.5);
        assert_eq!(t[2].p_hat, 0.0);
        assert!(tail_curve_from_values(&sups, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn integrated_tail_edges() {
        let sups = [0.0, 0.5, 1.0, 2.0];
        let at0 = integrated_tail_from_values(&sups, 0.0).unwrap();
        assert_eq!(at0.hinge.mean, 0.875);
        assert!((at0.quadrature - 0.875).abs() <= at0.quadrature_step / 2.0 + 1e-12);
        let far = integrated_tail_from_values(&sups, 100.0).unwrap();
        assert_eq!(far.hinge.mean, 0.0);
        assert_eq!(far.quadrature, 0.0);
    }
}
