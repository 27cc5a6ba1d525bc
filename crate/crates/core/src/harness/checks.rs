//! The seven check families, registered on a shared per-pair sampling plan.

use serde_json::{json, Value};

use crate::error::Result;
use crate::estimators::{
    integrated_tail_from_values, proportion, tail_curve_from_values, Drift, FunctionalDescriptor, McEstimate,
    Transform,
};
use crate::grid::TimeGrid;
use crate::harness::engine::{half_split, Plan, SetId, StatId};
use crate::harness::{CheckFamily, CheckResult, Relation, Side, SweepConfig, TailCurve};
use crate::kernels::{check_increment_domination, power, variance_domination, Comparison, KernelParams};
use crate::sampling::Process;

#[derive(Debug, Clone, Default)]
pub struct PairOutput {
    pub records: Vec<CheckResult>,
    pub tails: Vec<TailCurve>,
}

type Finisher<'a> = Box<dyn FnOnce(&Plan) -> CheckResult + 'a>;

const COMPARISONS: [Comparison; 2] = [Comparison::Y1, Comparison::Y2];

fn direction(c: Comparison) -> &'static str {
    match c {
        Comparison::Y1 => "le_Y1",
        Comparison::Y2 => "ge_Y2",
    }
}

struct Preconditions {
    increments: [Option<String>; 2],
    variances: [bool; 2],
}

impl Preconditions {
    fn new(params: &KernelParams, grid: &TimeGrid) -> Self {
        let inc = |c| check_increment_domination(params, c, grid).err().map(|e| e.to_string());
        Preconditions {
            increments: [inc(Comparison::Y1), inc(Comparison::Y2)],
            variances: [
                variance_domination(params, Comparison::Y1, grid),
                variance_domination(params, Comparison::Y2, grid),
            ],
        }
    }

    fn failure(&self, c: Comparison, need_variance: bool) -> Option<String> {
        let i = c as usize;
        if let Some(e) = &self.increments[i] {
            return Some(e.clone());
        }
        if need_variance && !self.variances[i] {
            return Some(format!("pointwise variance ordering against {} fails", c.label()));
        }
        None
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn unavailable(label: &str) -> Side {
    Side {
        label: label.to_string(),
        mean: f64::NAN,
        stderr: f64::NAN,
        paths: 0,
        reliable: false,
        capped_mean: None,
    }
}

struct Pair<'a> {
    cfg: &'a SweepConfig,
    params: KernelParams,
    grid: TimeGrid,
    /// `T^{HK}`, the unit for levels.
    unit: f64,
    pre: Preconditions,
    plan: Plan,
    finishers: Vec<Finisher<'a>>,
}

impl<'a> Pair<'a> {
    fn new(cfg: &'a SweepConfig, params: KernelParams) -> Result<Self> {
        let grid = TimeGrid::uniform(cfg.horizon, cfg.n)?;
        let pre = Preconditions::new(&params, &grid);
        Ok(Pair {
            cfg,
            params,
            unit: power(cfg.horizon, params.hk()),
            grid,
            pre,
            plan: Plan::new(cfg.seed),
            finishers: Vec::new(),
        })
    }

    fn tag(&self) -> String {
        format!("H={}|K={}|n={}", self.params.h(), self.params.k(), self.cfg.n)
    }

    fn id(&self, family: CheckFamily, detail: &str) -> String {
        format!("{}/H={}/K={}/{detail}", family.name(), self.params.h(), self.params.k())
    }

    /// Independent bifBm paths on `[0, horizon]`.
    fn w_at(&mut self, horizon: f64) -> Result<SetId> {
        let grid = TimeGrid::uniform(horizon, self.cfg.n)?;
        let label = format!("W|{}|T={}|M={}", self.tag(), fmt_f(horizon), self.cfg.paths);
        Ok(self.plan.set(&label, Process::Bifbm(self.params), &grid, self.cfg.paths))
    }

    fn w(&mut self) -> SetId {
        let label = format!("W|{}|T={}|M={}", self.tag(), fmt_f(self.cfg.horizon), self.cfg.paths);
        self.plan.set(&label, Process::Bifbm(self.params), &self.grid, self.cfg.paths)
    }

    /// bifBm paths on `[0, horizon]` that share one stream across horizons.
    fn w_coupled(&mut self, horizon: f64) -> Result<SetId> {
        let grid = TimeGrid::uniform(horizon, self.cfg.n)?;
        let stream = format!("W|{}|coupled|M={}", self.tag(), self.cfg.coupled_paths);
        let label = format!("{stream}|T={}", fmt_f(horizon));
        Ok(self
            .plan
            .set_with_stream(&label, &stream, Process::Bifbm(self.params), &grid, self.cfg.coupled_paths))
    }

    fn y(&mut self, c: Comparison) -> SetId {
        let sampled = match (self.cfg.swap_comparisons, c) {
            (false, c) => c,
            (true, Comparison::Y1) => Comparison::Y2,
            (true, Comparison::Y2) => Comparison::Y1,
        };
        let label = format!(
            "{}|{}|T={}|M={}",
            c.label(),
            self.tag(),
            fmt_f(self.cfg.horizon),
            self.cfg.paths
        );
        let process = Process::FbmScaled(sampled.process(&self.params));
        self.plan.set(&label, process, &self.grid, self.cfg.paths)
    }

    fn push(&mut self, f: impl FnOnce(&Plan) -> CheckResult + 'a) {
        self.finishers.push(Box::new(f));
    }

    /// `E f(W) ≤ E f(Y1)` or `E f(Y2) ≤ E f(W)`, gated on the analytic
    /// hypotheses.
    fn compare(
        &mut self,
        family: CheckFamily,
        detail: &str,
        f: FunctionalDescriptor,
        c: Comparison,
        need_variance: bool,
        extra: Vec<(&'static str, Value)>,
    ) {
        let id = self.id(family, &format!("{detail}/{}", direction(c)));
        let (params, z_crit, seed) = (self.params, self.cfg.z_crit, self.cfg.seed);
        let w_label = format!("W:{}", f.label());
        let y_label = format!("{}:{}", c.label(), f.label());
        let decorate = move |mut r: CheckResult| {
            r = r.with_param("functional", f.label());
            for (k, v) in extra {
                r = r.with_param(k, v);
            }
            r
        };
        if let Some(why) = self.pre.failure(c, need_variance) {
            self.push(move |_| {
                let (lhs, rhs) = match c {
                    Comparison::Y1 => (unavailable(&w_label), unavailable(&y_label)),
                    Comparison::Y2 => (unavailable(&y_label), unavailable(&w_label)),
                };
                decorate(CheckResult::evaluate(id, family, &params, Relation::Le, lhs, rhs, z_crit, seed))
                    .precondition_failed(&why)
            });
            return;
        }
        let w = self.w();
        let y = self.y(c);
        let sw = self.plan.stat(w, f);
        let sy = self.plan.stat(y, f);
        self.push(move |plan| {
            let ws = Side::new(w_label, &plan.estimate(sw));
            let ys = Side::new(y_label, &plan.estimate(sy));
            let (lhs, rhs) = match c {
                Comparison::Y1 => (ws, ys),
                Comparison::Y2 => (ys, ws),
            };
            decorate(CheckResult::evaluate(id, family, &params, Relation::Le, lhs, rhs, z_crit, seed))
        });
    }

    fn compare_both(
        &mut self,
        family: CheckFamily,
        detail: &str,
        f: FunctionalDescriptor,
        need_variance: bool,
        extra: Vec<(&'static str, Value)>,
    ) {
        for c in COMPARISONS {
            self.compare(family, detail, f, c, need_variance, extra.clone());
        }
    }

    fn finish(mut self) -> Result<Vec<CheckResult>> {
        self.plan.run()?;
        let plan = &self.plan;
        Ok(self.finishers.drain(..).map(|f| f(plan)).collect())
    }
}

/// Transform usable on a functional: non-decreasing and convex over the
/// functional's range on the grid.
fn transform_valid(f: &FunctionalDescriptor, g: Transform, grid: &TimeGrid) -> bool {
    let fg = f.with_transform(g);
    if fg.validate(grid).is_err() {
        return false;
    }
    g.convex_on_reals() || (g.convex_on_nonnegative() && f.lower_bound(grid) >= 0.0)
}

fn ratio(num: &McEstimate, den: &McEstimate) -> McEstimate {
    let r = num.mean / den.mean;
    let rel = ((num.stderr / num.mean).powi(2) + (den.stderr / den.mean).powi(2)).sqrt();
    McEstimate {
        mean: r,
        stderr: r.abs() * rel,
        paths: num.paths.min(den.paths),
        reliable: num.reliable && den.reliable && r.is_finite(),
        capped_mean: None,
        functional: None,
        label: None,
    }
}

fn scaling(p: &mut Pair) -> Result<()> {
    let fam = CheckFamily::Scaling;
    let hs = p.cfg.distinct_horizons();
    let (params, seed, sigmas) = (p.params, p.cfg.seed, p.cfg.tail_sigmas);
    for &m in &p.cfg.scaling.moments {
        let f = FunctionalDescriptor::sup().with_transform(Transform::Moment { p: m });
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                let (t1, t2) = (hs[i], hs[j]);
                let target = power(t2 / t1, m * params.hk());
                let detail = format!("p={m}/T={t1}->{t2}");

                let a = p.w_coupled(t1)?;
                let b = p.w_coupled(t2)?;
                let (sa, sb) = (p.plan.stat(a, f), p.plan.stat(b, f));
                let id = p.id(fam, &format!("coupled/{detail}"));
                p.push(move |plan| {
                    let mut r = ratio(&plan.estimate(sb), &plan.estimate(sa));
                    r.stderr = 0.0;
                    CheckResult::evaluate(
                        id,
                        fam,
                        &params,
                        Relation::Exact { rel_tol: 1e-8 },
                        Side::new("coupled ratio", &r),
                        Side::exact("(T2/T1)^(pHK)", target),
                        sigmas,
                        seed,
                    )
                    .with_param("p", m)
                    .with_param("T1", t1)
                    .with_param("T2", t2)
                });

                let a = p.w_at(t1)?;
                let b = p.w_at(t2)?;
                let (sa, sb) = (p.plan.stat(a, f), p.plan.stat(b, f));
                let id = p.id(fam, &format!("independent/{detail}"));
                p.push(move |plan| {
                    let r = ratio(&plan.estimate(sb), &plan.estimate(sa));
                    CheckResult::evaluate(
                        id,
                        fam,
                        &params,
                        Relation::Within {
                            sigmas,
                            abs_tol: 0.0,
                        },
                        Side::new("independent ratio", &r),
                        Side::exact("(T2/T1)^(pHK)", target),
                        sigmas,
                        seed,
                    )
                    .with_param("p", m)
                    .with_param("T1", t1)
                    .with_param("T2", t2)
                });
            }
        }
    }
    Ok(())
}

fn sup_sandwich(p: &mut Pair) {
    p.compare_both(CheckFamily::SupSandwich, "sup", FunctionalDescriptor::sup(), false, vec![]);
}

fn increment_convex(p: &mut Pair) {
    for &g in &p.cfg.increment_convex.transforms {
        let f = FunctionalDescriptor::sup_increment().with_transform(g);
        p.compare_both(
            CheckFamily::IncrementConvex,
            &format!("g={}", g.label()),
            f,
            false,
            vec![("g", json!(g.label()))],
        );
    }
}

fn drift_comparison(p: &mut Pair) {
    let fam = CheckFamily::DriftComparison;
    let cfg = p.cfg;
    for &m in &cfg.drift.drifts {
        let md = format!("m={}", m.label());
        p.compare_both(
            fam,
            &md,
            FunctionalDescriptor::sup_plus_drift(m),
            false,
            vec![("drift", json!(m.label()))],
        );
        for &a in &cfg.drift.anchors {
            let col = cfg.anchor_column(a);
            let s = p.grid.column_time(col);
            let base = FunctionalDescriptor::sup_drift_minus_anchor(m, col);
            for &c in &cfg.drift.floors {
                p.compare_both(
                    fam,
                    &format!("{md}/s={s}/c={c}"),
                    base.with_floor(c),
                    false,
                    vec![("drift", json!(m.label())), ("s", json!(s)), ("c", json!(c))],
                );
            }
            for &g in &cfg.drift.transforms {
                if !transform_valid(&base, g, &p.grid) {
                    continue;
                }
                p.compare_both(
                    fam,
                    &format!("{md}/s={s}/g={}", g.label()),
                    base.with_transform(g),
                    false,
                    vec![("drift", json!(m.label())), ("s", json!(s)), ("g", json!(g.label()))],
                );
            }
        }
    }
}

fn vitale_max_c(p: &mut Pair) {
    let fam = CheckFamily::VitaleMaxC;
    let cfg = p.cfg;
    for &m in &cfg.vitale.drifts {
        let md = format!("m={}", m.label());
        let base = FunctionalDescriptor::sup_plus_drift(m);
        for &c in &cfg.vitale.floors {
            p.compare_both(
                fam,
                &format!("{md}/c={c}"),
                base.with_floor(c),
                true,
                vec![("drift", json!(m.label())), ("c", json!(c))],
            );
        }
        for &g in &cfg.vitale.transforms {
            if !transform_valid(&base, g, &p.grid) {
                continue;
            }
            p.compare_both(
                fam,
                &format!("{md}/g={}", g.label()),
                base.with_transform(g),
                true,
                vec![("drift", json!(m.label())), ("g", json!(g.label()))],
            );
        }
    }
    for &lvl in &cfg.vitale.tail_levels {
        let t = lvl * p.unit;
        let f = FunctionalDescriptor::sup().with_transform(Transform::Hinge { level: t });
        p.compare_both(fam, &format!("tail/t={t}"), f, true, vec![("t", json!(t))]);

        let w = p.w();
        let sup = p.plan.stat(w, FunctionalDescriptor::sup());
        let id = p.id(fam, &format!("tail/t={t}/hinge_vs_quadrature"));
        let (params, seed, sigmas, tol) = (p.params, cfg.seed, cfg.tail_sigmas, cfg.quadrature_tol);
        p.push(move |plan| {
            let (lhs, rhs) = match integrated_tail_from_values(plan.values(sup), t) {
                Ok(it) => (
                    Side::new("W: E[sup - t]+", &it.hinge),
                    Side::exact("W: quadrature of tail", it.quadrature),
                ),
                Err(_) => (unavailable("W: E[sup - t]+"), unavailable("W: quadrature of tail")),
            };
            CheckResult::evaluate(
                id,
                fam,
                &params,
                Relation::Within { sigmas, abs_tol: tol },
                lhs,
                rhs,
                sigmas,
                seed,
            )
            .with_param("t", t)
        });
    }
}

fn wills_exponential(p: &mut Pair) {
    let fam = CheckFamily::WillsExponential;
    let cfg = p.cfg;
    let (params, seed, z_crit, sigmas) = (p.params, cfg.seed, cfg.z_crit, cfg.tail_sigmas);
    let w = p.w();
    let sup = p.plan.stat(w, FunctionalDescriptor::sup());
    let compensated = FunctionalDescriptor::sup_plus_drift(Drift {
        coef: -0.5,
        exponent: 2.0 * params.hk(),
    })
    .with_transform(Transform::Exp { rate: 1.0 });
    let ex = p.plan.stat(w, compensated);
    let paths = cfg.paths;
    let split = half_split(paths);

    let id = p.id(fam, "exp_moment");
    p.push(move |plan| {
        let lhs = plan.estimate_range(ex, split, paths);
        let a = plan.estimate_range(sup, 0, split);
        let e = a.mean.exp();
        let rhs = McEstimate {
            mean: e,
            stderr: e * a.stderr,
            ..a.clone()
        };
        let mut r = CheckResult::evaluate(
            id,
            fam,
            &params,
            Relation::Le,
            Side::new("B: E exp(sup(W - t^(2HK)/2))", &lhs),
            Side::new("A: exp(E sup W)", &rhs),
            z_crit,
            seed,
        )
        .with_param("split", split);
        if !lhs.reliable {
            r = r.with_note("exponential moment guard tripped");
        }
        r
    });

    let var = power(p.unit, 2.0);
    for &lvl in &cfg.wills.levels {
        let a = lvl * p.unit;
        let bound = (-a * a / (2.0 * var)).exp();
        let id = p.id(fam, &format!("tail/a={a}"));
        p.push(move |plan| {
            let mu = plan.estimate_range(sup, 0, split).mean;
            let b = &plan.values(sup)[split..];
            let hits = b.iter().filter(|&&s| s - mu >= a).count();
            let (ph, se) = proportion(hits, b.len());
            let lhs = McEstimate {
                stderr: se,
                paths: b.len(),
                ..McEstimate::exact(ph)
            };
            CheckResult::evaluate(
                id,
                fam,
                &params,
                Relation::Le,
                Side::new("B: P(sup - E_A sup >= a)", &lhs),
                Side::exact("exp(-a^2/(2T^(2HK)))", bound),
                sigmas,
                seed,
            )
            .with_param("a", a)
        });
    }
}

fn reflection_symmetry(p: &mut Pair) -> Result<()> {
    let fam = CheckFamily::ReflectionSymmetry;
    let cfg = p.cfg;
    let (params, seed, z_crit, sigmas) = (p.params, cfg.seed, cfg.z_crit, cfg.tail_sigmas);
    let horizon = cfg.horizon;
    for &lvl in &cfg.reflection.levels {
        if lvl <= 0.0 {
            continue;
        }
        let u = lvl * p.unit;
        let w = p.w();
        let abs = p.plan.stat(w, FunctionalDescriptor::sup_abs().with_transform(Transform::Exceeds { level: u }));
        let one = p.plan.stat(w, FunctionalDescriptor::sup().with_transform(Transform::Exceeds { level: u }));
        let id = p.id(fam, &format!("abs/u={u}"));
        p.push(move |plan| {
            let two = plan.estimate(one);
            let rhs = McEstimate {
                mean: 2.0 * two.mean,
                stderr: 2.0 * two.stderr,
                ..two
            };
            CheckResult::evaluate(
                id,
                fam,
                &params,
                Relation::Le,
                Side::new("P(sup|W| >= u)", &plan.estimate(abs)),
                Side::new("2 P(sup W >= u)", &rhs),
                sigmas,
                seed,
            )
            .with_param("u", u)
        });

        for &r in &cfg.reflection.rescale {
            let scaled_u = u * power(r, -params.hk());
            let short = FunctionalDescriptor::sup().with_transform(Transform::Exceeds { level: u });
            let unit = FunctionalDescriptor::sup().with_transform(Transform::Exceeds { level: scaled_u });
            for coupled in [false, true] {
                let (a, b) = if coupled {
                    (p.w_coupled(r * horizon)?, p.w_coupled(horizon)?)
                } else {
                    (p.w_at(r * horizon)?, p.w())
                };
                let (sa, sb) = (p.plan.stat(a, short), p.plan.stat(b, unit));
                let kind = if coupled { "coupled" } else { "independent" };
                let id = p.id(fam, &format!("rescale/r={r}/u={u}/{kind}"));
                let relation = if coupled {
                    Relation::Exact { rel_tol: 0.0 }
                } else {
                    Relation::Within {
                        sigmas,
                        abs_tol: 0.0,
                    }
                };
                p.push(move |plan| {
                    let (mut ea, mut eb) = (plan.estimate(sa), plan.estimate(sb));
                    if coupled {
                        ea.stderr = 0.0;
                        eb.stderr = 0.0;
                    }
                    CheckResult::evaluate(
                        id,
                        fam,
                        &params,
                        relation,
                        Side::new("P(sup_[0,rT] W >= u)", &ea),
                        Side::new("P(sup_[0,T] W >= u r^(-HK))", &eb),
                        sigmas,
                        seed,
                    )
                    .with_param("u", u)
                    .with_param("r", r)
                });
            }
        }
    }

    let w = p.w();
    let pos = p.plan.stat(w, FunctionalDescriptor::sup());
    let neg = p.plan.stat(w, FunctionalDescriptor::sup_negated());
    let paths = cfg.paths;
    let split = half_split(paths);
    let id = p.id(fam, "negation");
    p.push(move |plan| {
        CheckResult::evaluate(
            id,
            fam,
            &params,
            Relation::Eq,
            Side::new("A: E sup(-W)", &plan.estimate_range(neg, 0, split)),
            Side::new("B: E sup W", &plan.estimate_range(pos, split, paths)),
            z_crit,
            seed,
        )
    });
    Ok(())
}

fn tail_curves(p: &mut Pair) -> Vec<(String, StatId)> {
    if p.cfg.tail_curve_points == 0 {
        return Vec::new();
    }
    let sup = FunctionalDescriptor::sup();
    let w = p.w();
    let y1 = p.y(Comparison::Y1);
    let y2 = p.y(Comparison::Y2);
    vec![
        ("W".to_string(), p.plan.stat(w, sup)),
        ("Y1".to_string(), p.plan.stat(y1, sup)),
        ("Y2".to_string(), p.plan.stat(y2, sup)),
    ]
}

/// Runs the given families for one `(H, K)` pair on one shared plan.
pub fn run_pair(cfg: &SweepConfig, params: &KernelParams, families: &[CheckFamily]) -> Result<PairOutput> {
    let mut p = Pair::new(cfg, *params)?;
    let mut tails = Vec::new();
    for &fam in CheckFamily::ALL.iter().filter(|f| families.contains(f)) {
        match fam {
            CheckFamily::Scaling => scaling(&mut p)?,
            CheckFamily::SupSandwich => {
                sup_sandwich(&mut p);
                tails = tail_curves(&mut p);
            }
            CheckFamily::IncrementConvex => increment_convex(&mut p),
            CheckFamily::DriftComparison => drift_comparison(&mut p),
            CheckFamily::VitaleMaxC => vitale_max_c(&mut p),
            CheckFamily::WillsExponential => wills_exponential(&mut p),
            CheckFamily::ReflectionSymmetry => reflection_symmetry(&mut p)?,
        }
    }
    let unit = p.unit;
    let points = cfg.tail_curve_points;
    let levels: Vec<f64> = (0..points)
        .map(|i| 3.0 * unit * i as f64 / (points.max(2) - 1) as f64)
        .collect();
    let plan_records;
    let mut curves = Vec::new();
    {
        p.plan.run()?;
        for (role, stat) in &tails {
            curves.push(TailCurve {
                h: params.h(),
                k: params.k(),
                role: role.clone(),
                points: tail_curve_from_values(p.plan.values(*stat), &levels)?,
            });
        }
        plan_records = p.finish()?;
    }
    Ok(PairOutput {
        records: plan_records,
        tails: curves,
    })
}

/// Records one `(H, K)` pair yields for `family`, from the sweep definition
/// alone.
pub fn record_count(cfg: &SweepConfig, family: CheckFamily) -> usize {
    let sides = 2;
    match family {
        CheckFamily::Scaling => {
            let h = cfg.distinct_horizons().len();
            cfg.scaling.moments.len() * h * (h.saturating_sub(1)) / 2 * 2
        }
        CheckFamily::SupSandwich => sides,
        CheckFamily::IncrementConvex => sides * cfg.increment_convex.transforms.len(),
        CheckFamily::DriftComparison => {
            let grid = match TimeGrid::uniform(cfg.horizon, cfg.n) {
                Ok(g) => g,
                Err(_) => return 0,
            };
            let mut n = 0;
            for &m in &cfg.drift.drifts {
                n += sides;
                for &a in &cfg.drift.anchors {
                    let base = FunctionalDescriptor::sup_drift_minus_anchor(m, cfg.anchor_column(a));
                    n += sides * cfg.drift.floors.len();
                    n += sides
                        * cfg
                            .drift
                            .transforms
                            .iter()
                            .filter(|&&g| transform_valid(&base, g, &grid))
                            .count();
                }
            }
            n
        }
        CheckFamily::VitaleMaxC => {
            let grid = match TimeGrid::uniform(cfg.horizon, cfg.n) {
                Ok(g) => g,
                Err(_) => return 0,
            };
            let mut n = 0;
            for &m in &cfg.vitale.drifts {
                let base = FunctionalDescriptor::sup_plus_drift(m);
                n += sides * cfg.vitale.floors.len();
                n += sides
                    * cfg
                        .vitale
                        .transforms
                        .iter()
                        .filter(|&&g| transform_valid(&base, g, &grid))
                        .count();
            }
            n + 3 * cfg.vitale.tail_levels.len()
        }
        CheckFamily::WillsExponential => 1 + cfg.wills.levels.len(),
        CheckFamily::ReflectionSymmetry => {
            let u = cfg.reflection.levels.iter().filter(|&&u| u > 0.0).count();
            u * (1 + 2 * cfg.reflection.rescale.len()) + 1
        }
    }
}
