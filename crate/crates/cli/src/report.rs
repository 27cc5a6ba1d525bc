//! Report files. Everything written here is a pure function of the results,
//! so identical runs produce identical bytes; wall-clock timings go to their
//! own file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use bifbm_core::harness::{CheckResult, RefinementRow, SweepError, SweepOutput, TailCurve, Verdict};

use crate::config::Format;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "run.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const REFINEMENT_CSV: &str = "refinement.csv";
pub const TIMINGS_CSV: &str = "timings.csv";
pub const TAILS_DIR: &str = "tails";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl VerdictCounts {
    pub fn of(records: &[CheckResult]) -> Self {
        let mut c = VerdictCounts::default();
        for r in records {
            match r.verdict {
                Verdict::Pass => c.pass += 1,
                Verdict::Fail => c.fail += 1,
                Verdict::Inconclusive => c.inconclusive += 1,
            }
        }
        c
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn write(path: &Path, text: &str) -> io::Result<PathBuf> {
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

pub fn records_jsonl(records: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("check records serialize"));
        out.push('\n');
    }
    out
}

pub fn results_csv(records: &[CheckResult]) -> String {
    let mut out = String::from(
        "check_id,family,h,k,relation,lhs_mean,lhs_stderr,rhs_mean,rhs_stderr,margin,z,z_crit,verdict,seed\n",
    );
    for r in records {
        let relation = serde_json::to_value(r.relation).expect("relation serializes");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.check_id,
            r.family,
            r.h,
            r.k,
            relation["relation"].as_str().unwrap_or(""),
            num(r.lhs.mean),
            num(r.lhs.stderr),
            num(r.rhs.mean),
            num(r.rhs.stderr),
            num(r.margin),
            r.z.map(num).unwrap_or_default(),
            r.z_crit,
            r.verdict,
            r.seed
        );
    }
    out
}

pub fn tail_csv(curve: &TailCurve) -> String {
    let mut out = String::from("u,p_hat,stderr\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{}", p.u, p.p_hat, p.stderr);
    }
    out
}

pub fn tail_file_name(curve: &TailCurve) -> String {
    format!("tail_H{}_K{}_{}.csv", curve.h, curve.k, curve.role)
}

pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("h,k,role,n,mean,stderr,paths\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.h, r.k, r.role, r.n, r.mean, r.stderr, r.paths);
    }
    out
}

pub fn timings_csv(timings: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("h,k,seconds\n");
    for (h, k, s) in timings {
        let _ = writeln!(out, "{h},{k},{s:.3}");
    }
    out
}

/// Run-level summary: configuration echo, counts and every error.
pub fn summary_json(
    echo: &serde_json::Value,
    only: Option<&str>,
    records: &[CheckResult],
    errors: &[SweepError],
    extra_errors: &[String],
) -> String {
    let c = VerdictCounts::of(records);
    let mut by_family: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for r in records {
        let e = by_family.entry(r.family.name().to_string()).or_default();
        match r.verdict {
            Verdict::Pass => e[0] += 1,
            Verdict::Fail => e[1] += 1,
            Verdict::Inconclusive => e[2] += 1,
        }
    }
    let families: BTreeMap<_, _> = by_family
        .into_iter()
        .map(|(k, v)| (k, serde_json::json!({"PASS": v[0], "FAIL": v[1], "INCONCLUSIVE": v[2]})))
        .collect();
    let v = serde_json::json!({
        "config": echo,
        "only": only,
        "records": records.len(),
        "verdicts": {"PASS": c.pass, "FAIL": c.fail, "INCONCLUSIVE": c.inconclusive},
        "families": families,
        "errors": errors,
        "other_errors": extra_errors,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes every report file for `format` into `dir` and returns their paths.
pub fn emit_report(
    dir: &Path,
    format: Format,
    echo: &serde_json::Value,
    only: Option<&str>,
    output: &SweepOutput,
    refinement: Option<&[RefinementRow]>,
    extra_errors: &[String],
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    files.push(write(
        &dir.join(SUMMARY_FILE),
        &summary_json(echo, only, &output.records, &output.errors, extra_errors),
    )?);
    if format.records() {
        files.push(write(&dir.join(RECORDS_FILE), &records_jsonl(&output.records))?);
    }
    if format.csv() {
        files.push(write(&dir.join(RESULTS_CSV), &results_csv(&output.records))?);
        if !output.tails.is_empty() {
            let tails = dir.join(TAILS_DIR);
            fs::create_dir_all(&tails)?;
            for curve in &output.tails {
                files.push(write(&tails.join(tail_file_name(curve)), &tail_csv(curve))?);
            }
        }
        if let Some(rows) = refinement {
            files.push(write(&dir.join(REFINEMENT_CSV), &refinement_csv(rows))?);
        }
    }
    files.push(write(&dir.join(TIMINGS_CSV), &timings_csv(&output.timings))?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bifbm_core::harness::{CheckFamily, Relation, Side};
    use bifbm_core::KernelParams;

    fn record(verdict_margin: f64) -> CheckResult {
        let p = KernelParams::bifbm(0.5, 0.5).unwrap();
        CheckResult::evaluate(
            "sup_sandwich/H=0.5/K=0.5/sup/le_Y1".into(),
            CheckFamily::SupSandwich,
            &p,
            Relation::Le,
            Side::exact("lhs", 1.0),
            Side::exact("rhs", 1.0 + verdict_margin),
            4.0,
            7,
        )
    }

    #[test]
    fn empty_report_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let out = SweepOutput::default();
        emit_report(dir.path(), Format::Both, &serde_json::json!({}), None, &out, None, &[]).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap(), "");
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
        assert_eq!(summary["records"], 0);
        assert_eq!(fs::read_to_string(dir.path().join(RESULTS_CSV)).unwrap().lines().count(), 1);
    }

    #[test]
    fn one_pass_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = SweepOutput {
            records: vec![record(0.1)],
            ..SweepOutput::default()
        };
        emit_report(dir.path(), Format::Records, &serde_json::json!({}), None, &out, None, &[]).unwrap();
        let text = fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["verdict"], "PASS");
        assert_eq!(v["seed"], 7);
        assert_eq!(v["relation"], "le");
        assert!(!dir.path().join(RESULTS_CSV).exists());
    }

    #[test]
    fn csv_leaves_non_finite_cells_empty() {
        let mut r = record(0.1);
        r.margin = f64::NAN;
        r.z = None;
        let csv = results_csv(&[r]);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains(",,,"), "{row}");
    }
}
