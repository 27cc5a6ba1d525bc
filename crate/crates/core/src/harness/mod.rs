//! One executable statistical check per comparison inequality.
//!
//! Every check estimates both sides of an inequality on the time grid, forms
//! `z = (rhs − lhs) / √(se_lhs² + se_rhs²)` and fails only when `z < −z_crit`.
//! Comparison checks first verify the increment-variance hypothesis (and,
//! where required, the pointwise variance ordering) analytically; if that
//! fails the check is reported INCONCLUSIVE instead of being run.

mod checks;
mod config;
mod engine;
mod refinement;
mod two_point;

pub use checks::PairOutput;
pub use config::{
    DriftConfig, IncrementConfig, ReflectionConfig, ScalingConfig, SweepConfig, VitaleConfig, WillsConfig,
};
pub use engine::{half_split, Plan, SetId, StatId};
pub use refinement::{refinement_study, RefinementRow};
pub use two_point::{two_point_sandwich, TwoPointOutcome};

use std::collections::BTreeMap;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{McEstimate, TailPoint};
use crate::kernels::KernelParams;

pub const DEFAULT_Z_CRIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFamily {
    Scaling,
    SupSandwich,
    IncrementConvex,
    DriftComparison,
    VitaleMaxC,
    WillsExponential,
    ReflectionSymmetry,
}

impl CheckFamily {
    pub const ALL: [CheckFamily; 7] = [
        CheckFamily::Scaling,
        CheckFamily::SupSandwich,
        CheckFamily::IncrementConvex,
        CheckFamily::DriftComparison,
        CheckFamily::VitaleMaxC,
        CheckFamily::WillsExponential,
        CheckFamily::ReflectionSymmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckFamily::Scaling => "scaling",
            CheckFamily::SupSandwich => "sup_sandwich",
            CheckFamily::IncrementConvex => "increment_convex",
            CheckFamily::DriftComparison => "drift_comparison",
            CheckFamily::VitaleMaxC => "vitale_max_c",
            CheckFamily::WillsExponential => "wills_exponential",
            CheckFamily::ReflectionSymmetry => "reflection_symmetry",
        }
    }
}

impl fmt::Display for CheckFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// What a record asserts about `lhs` and `rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Relation {
    /// `lhs ≤ rhs`, one-sided at `z_crit`.
    Le,
    /// `lhs = rhs`, two-sided at `z_crit`.
    Eq,
    /// `|lhs − rhs| ≤ rel_tol · |rhs|`, deterministic.
    Exact { rel_tol: f64 },
    /// `|lhs − rhs| ≤ sigmas · se + abs_tol`.
    Within { sigmas: f64, abs_tol: f64 },
}

/// `PASS` when `rhs − lhs ≥ −z_crit·se`; `INCONCLUSIVE` if either side is
/// flagged unreliable.
pub fn one_sided_verdict(lhs: &McEstimate, rhs: &McEstimate, z_crit: f64) -> Verdict {
    if !lhs.reliable || !rhs.reliable {
        return Verdict::Inconclusive;
    }
    let se = combined_stderr(lhs, rhs);
    if rhs.mean - lhs.mean >= -z_crit * se {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn combined_stderr(lhs: &McEstimate, rhs: &McEstimate) -> f64 {
    (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Side {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub reliable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capped_mean: Option<f64>,
}

impl Side {
    pub fn new(label: impl Into<String>, est: &McEstimate) -> Self {
        Side {
            label: label.into(),
            mean: est.mean,
            stderr: est.stderr,
            paths: est.paths,
            reliable: est.reliable,
            capped_mean: est.capped_mean,
        }
    }

    pub fn exact(label: impl Into<String>, value: f64) -> Self {
        Side::new(label, &McEstimate::exact(value))
    }

    fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean,
            stderr: self.stderr,
            paths: self.paths,
            reliable: self.reliable,
            capped_mean: None,
            functional: None,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check_id: String,
    pub family: CheckFamily,
    pub h: f64,
    pub k: f64,
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(flatten)]
    pub relation: Relation,
    pub lhs: Side,
    pub rhs: Side,
    pub margin: f64,
    pub z: Option<f64>,
    pub z_crit: f64,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        check_id: String,
        family: CheckFamily,
        params: &KernelParams,
        relation: Relation,
        lhs: Side,
        rhs: Side,
        z_crit: f64,
        seed: u64,
    ) -> Self {
        let margin = rhs.mean - lhs.mean;
        let se = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
        let z = if se > 0.0 && margin.is_finite() {
            Some(margin / se)
        } else if margin == 0.0 {
            Some(0.0)
        } else {
            None
        };
        let verdict = if !lhs.reliable || !rhs.reliable {
            Verdict::Inconclusive
        } else {
            let ok = match relation {
                Relation::Le => return_le(&lhs, &rhs, z_crit),
                Relation::Eq => margin.abs() <= z_crit * se,
                Relation::Exact { rel_tol } => margin.abs() <= rel_tol * rhs.mean.abs(),
                Relation::Within { sigmas, abs_tol } => margin.abs() <= sigmas * se + abs_tol,
            };
            if ok {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        };
        CheckResult {
            check_id,
            family,
            h: params.h(),
            k: params.k(),
            params: BTreeMap::new(),
            relation,
            lhs,
            rhs,
            margin,
            z,
            z_crit,
            verdict,
            seed,
            note: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Marks the record as not run because a hypothesis failed.
    pub fn precondition_failed(mut self, why: &str) -> Self {
        self.verdict = Verdict::Inconclusive;
        self.note = Some(format!("precondition violated: {why}"));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn combined_stderr(&self) -> f64 {
        combined_stderr(&self.lhs.estimate(), &self.rhs.estimate())
    }
}

fn return_le(lhs: &Side, rhs: &Side, z_crit: f64) -> bool {
    one_sided_verdict(&lhs.estimate(), &rhs.estimate(), z_crit) == Verdict::Pass
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub h: f64,
    pub k: f64,
    pub role: String,
    pub points: Vec<TailPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepError {
    pub h: f64,
    pub k: f64,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<CheckResult>,
    pub tails: Vec<TailCurve>,
    pub errors: Vec<SweepError>,
    /// Wall-clock seconds per `(H, K)` pair; not part of any deterministic output.
    pub timings: Vec<(f64, f64, f64)>,
}

/// `family/H=…/K=…`, the prefix of every check id of that family and pair.
pub fn pair_prefix(family: CheckFamily, h: f64, k: f64) -> String {
    format!("{}/H={h}/K={k}", family.name())
}

/// Whether `id` lies under the `/`-separated prefix `only`, segment by
/// segment, so `scaling/H=0.5` does not select `scaling/H=0.55`.
pub fn id_matches(only: &str, id: &str) -> bool {
    let mut ids = id.split('/');
    only.split('/').all(|seg| ids.next() == Some(seg))
}

// A pair runs if `only` selects its prefix or something below it.
fn pair_selected(only: Option<&str>, family: CheckFamily, h: f64, k: f64) -> bool {
    match only {
        None => true,
        Some(o) => {
            let p = pair_prefix(family, h, k);
            id_matches(o, &p) || id_matches(&p, o)
        }
    }
}

/// Runs every enabled family over the `(H, K)` lattice in lattice order.
/// `only` restricts to check ids under that prefix (a family name, a
/// `family/H=…/K=…` pair prefix, or a full check id). Records are identical
/// to the ones a full run produces, since every set's stream depends only on
/// the seed and the set.
pub fn run_sweep(cfg: &SweepConfig, only: Option<&str>) -> Result<SweepOutput> {
    cfg.validate()?;
    let mut out = SweepOutput::default();
    for &h in &cfg.hurst {
        for &k in &cfg.k {
            let params = KernelParams::bifbm(h, k)?;
            let fams: Vec<CheckFamily> = CheckFamily::ALL
                .into_iter()
                .filter(|f| cfg.checks.contains(f) && pair_selected(only, *f, h, k))
                .collect();
            if fams.is_empty() {
                continue;
            }
            let started = Instant::now();
            match checks::run_pair(cfg, &params, &fams) {
                Ok(pair) => {
                    out.records
                        .extend(pair.records.into_iter().filter(|r| only.is_none_or(|o| id_matches(o, &r.check_id))));
                    out.tails.extend(pair.tails);
                }
                Err(e) => out.errors.push(SweepError {
                    h,
                    k,
                    numerical: e.is_numerical(),
                    message: e.to_string(),
                }),
            }
            out.timings.push((h, k, started.elapsed().as_secs_f64()));
        }
    }
    Ok(out)
}

/// Records a full run of `cfg` produces: the per-pair count of every
/// enabled family times the lattice size.
pub fn expected_record_count(cfg: &SweepConfig) -> usize {
    let per_pair: usize = cfg.checks.iter().map(|&f| cfg.records_per_pair(f)).sum();
    per_pair * cfg.hurst.len() * cfg.k.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, stderr: f64) -> McEstimate {
        McEstimate {
            stderr,
            paths: 100,
            ..McEstimate::exact(mean)
        }
    }

    #[test]
    fn verdict_examples() {
        // combined stderr 0.01 from two sides of 0.01/√2
        let s = 0.01 / 2f64.sqrt();
        assert_eq!(one_sided_verdict(&est(1.0, s), &est(1.1, s), 4.0), Verdict::Pass);
        assert_eq!(one_sided_verdict(&est(1.1, s), &est(1.0, s), 4.0), Verdict::Fail);
        assert_eq!(one_sided_verdict(&est(1.01, s), &est(1.0, s), 4.0), Verdict::Pass);
        let mut bad = est(1.0, s);
        bad.reliable = false;
        assert_eq!(one_sided_verdict(&bad, &est(2.0, s), 4.0), Verdict::Inconclusive);
    }

    #[test]
    fn id_prefix_matching() {
        assert!(id_matches("scaling", "scaling/H=0.5/K=1/x"));
        assert!(id_matches("scaling/H=0.5", "scaling/H=0.5/K=1/x"));
        assert!(!id_matches("scaling/H=0.5", "scaling/H=0.55/K=1/x"));
        assert!(!id_matches("scaling/H=0.5/K=1/x/y", "scaling/H=0.5/K=1/x"));
        assert!(pair_selected(Some("sup_sandwich/H=0.5/K=0.5/sup/le_Y1"), CheckFamily::SupSandwich, 0.5, 0.5));
        assert!(!pair_selected(Some("sup_sandwich"), CheckFamily::Scaling, 0.5, 0.5));
    }

    #[test]
    fn family_names_round_trip() {
        for f in CheckFamily::ALL {
            assert_eq!(f.name().parse::<CheckFamily>().unwrap(), f);
        }
        assert!("nope".parse::<CheckFamily>().is_err());
    }

    #[test]
    fn record_relations() {
        let p = KernelParams::bifbm(0.5, 0.5).unwrap();
        let r = CheckResult::evaluate(
            "x".into(),
            CheckFamily::Scaling,
            &p,
            Relation::Exact { rel_tol: 1e-8 },
            Side::exact("a", 2.0 + 1e-9),
            Side::exact("b", 2.0),
            4.0,
            0,
        );
        assert_eq!(r.verdict, Verdict::Pass);
        let r = CheckResult::evaluate(
            "x".into(),
            CheckFamily::Scaling,
            &p,
            Relation::Eq,
            Side::new("a", &est(1.0, 0.01)),
            Side::new("b", &est(1.1, 0.01)),
            4.0,
            0,
        );
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.z.unwrap() - 0.1 / (0.0002f64).sqrt()).abs() < 1e-9);
    }
}
