//! Sandwich check on a two-point grid, where the expected maximum of a
//! centered Gaussian pair has the closed form `√(Var(X₁ − X₂) / (2π))`.

use serde::Serialize;

use crate::error::Result;
use crate::estimators::FunctionalDescriptor;
use crate::grid::TimeGrid;
use crate::harness::engine::Plan;
use crate::harness::{one_sided_verdict, Verdict};
use crate::kernels::{Comparison, Covariance, KernelParams};
use crate::sampling::Process;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPointOutcome {
    pub h: f64,
    pub k: f64,
    pub t1: f64,
    pub t2: f64,
    /// Closed-form `E max` for `W`, `Y⁽¹⁾`, `Y⁽²⁾`.
    pub exact: [f64; 3],
    /// Monte Carlo means in the same order.
    pub estimated: [f64; 3],
    /// Closed-form truth of `E max W ≤ E max Y⁽¹⁾` and `E max Y⁽²⁾ ≤ E max W`.
    pub analytic_holds: [bool; 2],
    pub verdicts: [Verdict; 2],
}

impl TwoPointOutcome {
    /// Monte Carlo verdicts agree with the closed-form ordering: PASS where
    /// the inequality holds, FAIL where it does not.
    pub fn agrees(&self) -> bool {
        self.analytic_holds
            .iter()
            .zip(&self.verdicts)
            .all(|(&holds, &v)| (v == Verdict::Pass) == holds)
    }
}

fn expected_max<C: Covariance>(c: &C, t1: f64, t2: f64) -> f64 {
    (c.increment_variance(t1, t2) / (2.0 * std::f64::consts::PI)).sqrt()
}

/// Samples `W`, `Y⁽¹⁾`, `Y⁽²⁾` at `{t₁, t₂}` (origin excluded) and runs both
/// sandwich comparisons on `max(X_{t₁}, X_{t₂})`.
pub fn two_point_sandwich(
    params: &KernelParams,
    t1: f64,
    t2: f64,
    paths: usize,
    seed: u64,
    z_crit: f64,
) -> Result<TwoPointOutcome> {
    let grid = TimeGrid::from_times(vec![t1, t2], false)?;
    let y1 = Comparison::Y1.process(params);
    let y2 = Comparison::Y2.process(params);
    let exact = [
        expected_max(params, t1, t2),
        expected_max(&y1, t1, t2),
        expected_max(&y2, t1, t2),
    ];

    let mut plan = Plan::new(seed);
    let tag = format!("two-point|H={}|K={}|t1={t1}|t2={t2}", params.h(), params.k());
    let processes = [Process::Bifbm(*params), Process::FbmScaled(y1), Process::FbmScaled(y2)];
    let stats: Vec<_> = ["W", "Y1", "Y2"]
        .iter()
        .zip(processes)
        .map(|(role, process)| {
            let set = plan.set(&format!("{role}|{tag}"), process, &grid, paths);
            plan.stat(set, FunctionalDescriptor::sup())
        })
        .collect();
    plan.run()?;
    let est: Vec<_> = stats.iter().map(|&s| plan.estimate(s)).collect();

    Ok(TwoPointOutcome {
        h: params.h(),
        k: params.k(),
        t1,
        t2,
        exact,
        estimated: [est[0].mean, est[1].mean, est[2].mean],
        analytic_holds: [exact[0] <= exact[1], exact[2] <= exact[0]],
        verdicts: [
            one_sided_verdict(&est[0], &est[1], z_crit),
            one_sided_verdict(&est[2], &est[0], z_crit),
        ],
    })
}
