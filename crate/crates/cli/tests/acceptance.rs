//! Acceptance gate: one PASS/FAIL line per criterion. Expected values come
//! from closed forms evaluated here, independently of the library code.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bifbm_cli::{execute, RunConfig, RunOutcome, EXIT_FAIL, EXIT_OK};
use bifbm_core::estimators::{FunctionalDescriptor, Transform};
use bifbm_core::harness::{two_point_sandwich, CheckFamily, CheckResult, Plan, Verdict};
use bifbm_core::kernels::{bifbm_cov, fbm_cov, increment_variance};
use bifbm_core::rng::derive_stream;
use bifbm_core::sampling::Process;
use bifbm_core::{KernelParams, TimeGrid};
use statrs::distribution::{ContinuousCDF, Normal};

struct Line {
    number: u32,
    title: &'static str,
    ok: bool,
    detail: String,
    elapsed: Duration,
}

fn report(lines: &mut Vec<Line>, number: u32, title: &'static str, started: Instant, ok: bool, detail: String) {
    let l = Line {
        number,
        title,
        ok,
        detail,
        elapsed: started.elapsed(),
    };
    println!(
        "criterion {:>2} {:<40} {} ({:.1} s) {}",
        l.number,
        l.title,
        if l.ok { "PASS" } else { "FAIL" },
        l.elapsed.as_secs_f64(),
        l.detail
    );
    lines.push(l);
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn uniforms(label: u64, count: usize) -> Vec<f64> {
    let mut rng = derive_stream(0x00ac_ce97, label).rng();
    (0..count).map(|_| rng.next_uniform()).collect()
}

fn criterion_1(lines: &mut Vec<Line>) {
    let started = Instant::now();
    let u = uniforms(1, 30_000);
    let mut worst_fbm: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    for c in u.chunks_exact(3) {
        let (s, t, h) = (10.0 * c[0], 10.0 * c[1], 0.01 + 0.98 * c[2]);
        let p = KernelParams::bifbm(h, 1.0).unwrap();
        let got = bifbm_cov(s, t, &p).unwrap();
        let oracle = 0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
        worst_fbm = worst_fbm.max(rel_err(got, oracle)).max(rel_err(got, fbm_cov(s, t, h).unwrap()));
        let k = 0.05 + 0.95 * c[0];
        let pk = KernelParams::bifbm(h, k).unwrap();
        worst_diag = worst_diag.max(rel_err(bifbm_cov(t, t, &pk).unwrap(), t.powf(2.0 * h * k)));
    }
    let ok = worst_fbm <= 1e-12 && worst_diag <= 1e-12 && started.elapsed() < Duration::from_secs(1);
    report(
        lines,
        1,
        "kernel exactness (10^4 cases)",
        started,
        ok,
        format!("max rel err K=1 vs fBm {worst_fbm:.1e}, diagonal {worst_diag:.1e}"),
    );
}

fn criterion_2(lines: &mut Vec<Line>) {
    let started = Instant::now();
    let grid = TimeGrid::uniform(1.0, 128).unwrap();
    let mut pts = vec![0.0];
    pts.extend_from_slice(grid.times());
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for i in 1..=9 {
        for j in 1..=10 {
            let (h, k) = (i as f64 / 10.0, j as f64 / 10.0);
            let p = KernelParams::bifbm(h, k).unwrap();
            for (a, &s) in pts.iter().enumerate() {
                for &t in &pts[a + 1..] {
                    let v = increment_variance(s, t, &p).unwrap();
                    let lo = 2f64.powf(-k) * (t - s).powf(2.0 * h * k);
                    let hi = 2.0 * lo;
                    worst = worst.max(lo - v).max(v - hi);
                    pairs += 1;
                }
            }
        }
    }
    let ok = worst <= 1e-10 && started.elapsed() < Duration::from_secs(5);
    report(
        lines,
        2,
        "deterministic increment sandwich",
        started,
        ok,
        format!("{pairs} pairs, worst excursion {worst:.1e}"),
    );
}

/// `∫_a^∞ 2(1 − Φ(u)) du` by composite Simpson on `[a, a + 12]`.
fn brownian_integrated_tail(a: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).unwrap();
    let f = |u: f64| 2.0 * (1.0 - z.cdf(u));
    let n = 24_000;
    let h = 12.0 / n as f64;
    let mut acc = f(a) + f(a + 12.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Returns whether everything except the stated hinge bound holds.
fn criterion_3(lines: &mut Vec<Line>) -> bool {
    let started = Instant::now();
    let p = KernelParams::bifbm(0.5, 1.0).unwrap();
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let mut plan = Plan::new(20_240_611);
    let set = plan.set("acceptance|brownian", Process::Bifbm(p), &grid, 200_000);
    let sup = plan.stat(set, FunctionalDescriptor::sup());
    let exceed = plan.stat(set, FunctionalDescriptor::sup().with_transform(Transform::Exceeds { level: 1.0 }));
    let hinge = plan.stat(set, FunctionalDescriptor::sup().with_transform(Transform::Hinge { level: 0.5 }));
    plan.run().unwrap();
    let (s, e, g) = (plan.estimate(sup), plan.estimate(exceed), plan.estimate(hinge));

    let z = Normal::new(0.0, 1.0).unwrap();
    let mean_oracle = (2.0 / std::f64::consts::PI).sqrt();
    let tail_oracle = 2.0 * (1.0 - z.cdf(1.0));
    let hinge_oracle = brownian_integrated_tail(0.5);
    let stated_hinge = 0.19780;

    let mean_ok = (0.74..=0.80).contains(&s.mean) && s.mean <= mean_oracle + 3.0 * s.stderr;
    let tail_ok = e.mean <= 0.31731 + 3.0 * e.stderr && (tail_oracle - 0.31731).abs() < 1e-5;
    let hinge_ok = g.mean <= hinge_oracle + 3.0 * g.stderr;
    let stated_ok = g.mean <= stated_hinge + 3.0 * g.stderr;
    // The stated hinge bound is below the reflection-principle value, so a
    // correct sampler cannot meet it; the line reports that honestly.
    let ok = mean_ok && tail_ok && stated_ok && started.elapsed() < Duration::from_secs(60);
    report(
        lines,
        3,
        "Brownian oracles (n=512, M=2e5)",
        started,
        ok,
        format!(
            "E sup {:.5}±{:.5} (oracle {mean_oracle:.5}); P(sup>=1) {:.5}±{:.5} (oracle {tail_oracle:.5}); \
             E[sup-0.5]+ {:.5}±{:.5} vs 0.19780: {}; vs integrated oracle {hinge_oracle:.5}: {}",
            s.mean,
            s.stderr,
            e.mean,
            e.stderr,
            g.mean,
            g.stderr,
            if stated_ok { "within" } else { "exceeds (0.19780 is E[(Z-0.5)+], sup B_1 has the law of |Z|)" },
            if hinge_ok { "within" } else { "exceeds" }
        ),
    );
    mean_ok && tail_ok && hinge_ok
}

fn family(records: &[CheckResult], f: CheckFamily) -> impl Iterator<Item = &CheckResult> {
    records.iter().filter(move |r| r.family == f)
}

fn tally<'a>(it: impl Iterator<Item = &'a CheckResult>) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for r in it {
        let key = match r.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        *m.entry(key).or_insert(0) += 1;
    }
    m
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

/// Records of one `(H, K)` pair for the default sweep, from the sweep
/// definition: drifts {0, t, -2t, 0.1t^2}, anchors {0, T/2}, floors {0, 0.5},
/// transforms {identity, hinge(0), moment(2)}.
fn expected_default_count() -> usize {
    let scaling = 3 * 2 * 2;
    let sandwich = 2;
    let increments = 3 * 2;
    // moment(2) needs sup(W + m - W_s) >= m(s) >= 0: fails only for -2t at s = T/2
    let drift = 4 * (2 + 2 * 2 * 2) + 2 * (8 * 2 + 7);
    let vitale = 4 * 2 * 2 + 4 * 3 * 2 + 3 * 3;
    let wills = 1 + 3;
    let reflection = 3 * (1 + 2 * 2) + 1;
    9 * (scaling + sandwich + increments + drift + vitale + wills + reflection)
}

fn sweep_criteria(lines: &mut Vec<Line>, outcome: &RunOutcome, sweep_time: Duration) {
    let records = &outcome.output.records;
    let started = Instant::now() - sweep_time;

    let scaling: Vec<_> = family(records, CheckFamily::Scaling).collect();
    let coupled_ok = scaling
        .iter()
        .filter(|r| r.check_id.contains("/coupled/"))
        .all(|r| r.verdict == Verdict::Pass && rel_err(r.lhs.mean, r.rhs.mean) <= 1e-8);
    let indep_ok = scaling
        .iter()
        .filter(|r| r.check_id.contains("/independent/"))
        .all(|r| r.verdict == Verdict::Pass && (r.lhs.mean - r.rhs.mean).abs() <= 3.0 * r.lhs.stderr);
    let worst_z = scaling
        .iter()
        .filter_map(|r| r.z)
        .filter(|z| z.is_finite())
        .fold(0.0f64, |m, z| m.max(z.abs()));
    report(
        lines,
        4,
        "self-similar moment scaling",
        started,
        coupled_ok && indep_ok && scaling.len() == 9 * 12,
        format!(
            "{} records, coupled exact {coupled_ok}, independent within 3 se {indep_ok} (max |z| {worst_z:.2}); shares the sweep run",
            scaling.len()
        ),
    );

    let sandwich: Vec<_> = records
        .iter()
        .filter(|r| matches!(r.family, CheckFamily::SupSandwich | CheckFamily::IncrementConvex))
        .collect();
    let no_fail = sandwich.iter().all(|r| r.verdict != Verdict::Fail);
    let degenerate: Vec<_> = sandwich.iter().filter(|r| r.k == 1.0 && r.check_id.ends_with("le_Y1")).collect();
    let degenerate_ok = degenerate.iter().all(|r| r.z.is_some_and(|z| z.abs() <= 4.0));
    let all_ok = outcome.exit_code == EXIT_OK
        && records.len() == expected_default_count()
        && records.iter().all(|r| r.verdict != Verdict::Fail);
    report(
        lines,
        5,
        "sup and increment sandwiches",
        started,
        no_fail && degenerate_ok && all_ok && sweep_time < Duration::from_secs(600),
        format!(
            "{:?}; K=1 upper-side |z|<=4 on {}/{}; full sweep {} records (expected {}), exit {}, {:?}",
            tally(sandwich.iter().copied()),
            degenerate.iter().filter(|r| r.z.is_some_and(|z| z.abs() <= 4.0)).count(),
            degenerate.len(),
            records.len(),
            expected_default_count(),
            outcome.exit_code,
            tally(records.iter())
        ),
    );

    let drift: Vec<_> = records
        .iter()
        .filter(|r| matches!(r.family, CheckFamily::DriftComparison | CheckFamily::VitaleMaxC))
        .collect();
    let quad: Vec<_> = drift.iter().filter(|r| r.check_id.ends_with("hinge_vs_quadrature")).collect();
    let quad_ok = quad.iter().all(|r| {
        r.verdict == Verdict::Pass && (r.lhs.mean - r.rhs.mean).abs() <= 3.0 * r.combined_stderr() + 1e-3
    });
    report(
        lines,
        6,
        "drift, floor and integrated tails",
        started,
        drift.iter().all(|r| r.verdict != Verdict::Fail) && quad_ok && !quad.is_empty(),
        format!("{:?}; hinge vs quadrature agree on {}/{}", tally(drift.iter().copied()), quad.len(), quad.len()),
    );

    let wills: Vec<_> = family(records, CheckFamily::WillsExponential).collect();
    let tails_ok = wills
        .iter()
        .filter(|r| r.check_id.contains("/tail/"))
        .all(|r| r.verdict == Verdict::Pass && r.lhs.mean <= r.rhs.mean + 3.0 * r.lhs.stderr);
    let exp_ok = wills.iter().filter(|r| r.check_id.ends_with("exp_moment")).all(|r| match r.verdict {
        Verdict::Pass => true,
        Verdict::Inconclusive => r.note.as_deref().is_some_and(|n| n.contains("guard")),
        Verdict::Fail => false,
    });
    report(
        lines,
        7,
        "Gaussian concentration and exp moment",
        started,
        tails_ok && exp_ok && wills.len() == 9 * 4,
        format!("{:?}", tally(wills.iter().copied())),
    );
}

fn criterion_8(lines: &mut Vec<Line>) {
    let started = Instant::now();
    let u = uniforms(8, 200);
    let mut agree = 0;
    let mut total = 0;
    for (i, c) in u.chunks_exact(4).enumerate() {
        let h = 0.05 + 0.9 * c[0];
        let k = 0.05 + 0.95 * c[1];
        let (a, b) = (0.01 + 0.99 * c[2], 0.01 + 0.99 * c[3]);
        let (t1, t2) = if a < b { (a, b) } else { (b, a) };
        if t2 - t1 < 1e-3 {
            continue;
        }
        let p = KernelParams::bifbm(h, k).unwrap();
        let out = two_point_sandwich(&p, t1, t2, 20_000, 1000 + i as u64, 4.0).unwrap();
        // closed form `E max = sqrt(Var(X1 - X2) / 2pi)`, computed here
        let (a2, b2) = (t1.powf(2.0 * h), t2.powf(2.0 * h));
        let cross = 2f64.powf(-k) * ((a2 + b2).powf(k) - (t2 - t1).powf(2.0 * h * k));
        let var_w = t1.powf(2.0 * h * k) + t2.powf(2.0 * h * k) - 2.0 * cross;
        let two_pi = 2.0 * std::f64::consts::PI;
        let e_w = (var_w / two_pi).sqrt();
        let e_y1 = (2f64.powf(1.0 - k) * (t2 - t1).powf(2.0 * h * k) / two_pi).sqrt();
        let e_y2 = (2f64.powf(-k) * (t2 - t1).powf(2.0 * h * k) / two_pi).sqrt();
        let holds = [e_w <= e_y1 * (1.0 + 1e-12), e_y2 <= e_w * (1.0 + 1e-12)];
        let matches = holds
            .iter()
            .zip(&out.verdicts)
            .all(|(&h, &v)| (v == Verdict::Pass) == h)
            && (out.exact[0] - e_w).abs() <= 1e-10;
        total += 1;
        if matches {
            agree += 1;
        }
    }
    report(
        lines,
        8,
        "two-point brute-force equivalence",
        started,
        total == 50 && agree == total && started.elapsed() < Duration::from_secs(60),
        format!("{agree}/{total} grids agree with the closed-form ordering"),
    );
}

const DETERMINISM: &str = r#"
schema_version = 1
[sweep]
hurst = [0.25, 0.75]
k = [0.5, 1.0]
n = 64
paths = 20000
coupled_paths = 4096
[refinement]
enabled = true
points = [16, 32, 64]
paths = 4096
"#;

fn report_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timings.csv") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9(lines: &mut Vec<Line>, limit: Duration) {
    let started = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for workers in [1usize, 4, 8] {
        let mut cfg = RunConfig::from_toml(DETERMINISM).unwrap();
        cfg.output.dir = root.path().join(format!("w{workers}"));
        cfg.output.workers = Some(workers);
        let outcome = execute(&cfg, None);
        assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.errors);
        reports.push(report_files(&cfg.output.dir));
    }
    let identical = reports[0] == reports[1] && reports[0] == reports[2];
    report(
        lines,
        9,
        "byte-identical reports (1/4/8 workers)",
        started,
        identical && !reports[0].is_empty() && started.elapsed() < limit,
        format!("{} files compared per run (reduced 2x2 sweep, timings excluded)", reports[0].len()),
    );
}

const NEGATIVE: &str = r#"
schema_version = 1
[sweep]
hurst = [0.5]
k = [0.5]
checks = ["sup_sandwich"]
[test_hooks]
swap_comparisons = true
"#;

fn criterion_10(lines: &mut Vec<Line>) {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("negative.toml");
    fs::write(&cfg, NEGATIVE).unwrap();
    let out_dir = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_bifbm"))
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let text = fs::read_to_string(out_dir.join("records.jsonl")).unwrap_or_default();
    let verdicts: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["verdict"].as_str().unwrap().to_string())
        .collect();
    let ok = status.status.code() == Some(EXIT_FAIL)
        && !verdicts.is_empty()
        && verdicts.iter().all(|v| v == "FAIL")
        && started.elapsed() < Duration::from_secs(120);
    report(
        lines,
        10,
        "negative control (swapped roles)",
        started,
        ok,
        format!("exit {:?}, verdicts {verdicts:?}", status.status.code()),
    );
}

/// Criteria whose stated bound contradicts a closed form; they still print
/// FAIL but do not fail the target.
const UNATTAINABLE: [u32; 1] = [3];

fn main() {
    // `cargo test -- --list` and filters: this target has no named tests.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut lines = Vec::new();
    criterion_1(&mut lines);
    criterion_2(&mut lines);
    let brownian_rest_ok = criterion_3(&mut lines);

    let sweep_dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&config_path()).unwrap();
    cfg.output.dir = sweep_dir.path().to_path_buf();
    let started = Instant::now();
    let outcome = execute(&cfg, None);
    let sweep_time = started.elapsed();
    println!(
        "default sweep: {} records, exit {}, {:.1} s",
        outcome.output.records.len(),
        outcome.exit_code,
        sweep_time.as_secs_f64()
    );
    for r in outcome.output.records.iter().filter(|r| r.verdict != Verdict::Pass) {
        println!("  {} {} z={:?} {:?}", r.verdict, r.check_id, r.z, r.note);
    }
    sweep_criteria(&mut lines, &outcome, sweep_time);

    criterion_8(&mut lines);
    criterion_9(&mut lines, 3 * sweep_time);
    criterion_10(&mut lines);

    let failed: Vec<u32> = lines.iter().filter(|l| !l.ok).map(|l| l.number).collect();
    println!("acceptance: {}/{} criteria pass", lines.len() - failed.len(), lines.len());
    let unexpected: Vec<u32> = failed
        .iter()
        .copied()
        .filter(|&n| !UNATTAINABLE.contains(&n) || (n == 3 && !brownian_rest_ok))
        .collect();
    if failed.iter().any(|n| UNATTAINABLE.contains(n)) {
        println!("known unattainable: criterion 3 hinge bound 0.19780 (see the Brownian line above)");
    }
    if !unexpected.is_empty() {
        println!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
