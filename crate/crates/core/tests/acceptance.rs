//! Acceptance criteria 1–10 at their stated tolerances and default budgets.
//!
//! The `magtomo` binary runs `full-suite` twice with the same seed. Criteria
//! 1–9 are decided from the JSON records of the first run, with every
//! threshold restated here rather than taken from the records. Criterion 10
//! compares the two output directories byte for byte; `timings.json` holds
//! wall-clock times and is the one file left out.

use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;

fn record(dir: &Path, experiment: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{experiment}.json"))).unwrap_or_else(|e| panic!("{experiment}.json: {e}"));
    serde_json::from_str(&text).unwrap()
}

fn num(v: &Value, pointer: &str) -> f64 {
    v.pointer(pointer).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn list<'a>(v: &'a Value, pointer: &str) -> &'a [Value] {
    v.pointer(pointer).and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[])
}

struct Criterion {
    id: usize,
    name: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(id: usize, name: &'static str) -> Self {
        Self { id, name, failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let mut s = format!("criterion {:>2} {:<28} {status}", self.id, self.name);
        if !self.notes.is_empty() {
            s += &format!("  [{}]", self.notes.join("; "));
        }
        for f in &self.failures {
            s += &format!("\n    failed: {f}");
        }
        s
    }
}

fn full_suite(out: &Path) -> i32 {
    // output is captured so that only the criterion lines are printed
    let run = Command::new(env!("CARGO_BIN_EXE_magtomo"))
        .args(["--seed", "0", "--out"])
        .arg(out)
        .arg("full-suite")
        .output()
        .expect("magtomo runs");
    if !run.status.success() {
        eprintln!("{}{}", String::from_utf8_lossy(&run.stdout), String::from_utf8_lossy(&run.stderr));
    }
    run.status.code().unwrap_or(-1)
}

fn frame(dir: &Path, secs: f64) -> Criterion {
    let mut c = Criterion::new(1, "frame identities");
    let r = record(dir, "frame_identities");
    let surfaces = list(&r, "/summary/surfaces");
    c.require(surfaces.len() == 4, format!("expected torus and three Bolza surfaces, got {}", surfaces.len()));
    for s in surfaces {
        let name = s["surface"].as_str().unwrap_or("?");
        c.require(s["samples"].as_u64() == Some(50), format!("{name}: 50 samples"));
        let worst = num(s, "/max_residual");
        c.require(worst < 1e-8, format!("{name}: residual {worst:.2e} < 1e-8"));
    }
    c.require(secs < 60.0, format!("runtime {secs:.1}s < 1 min"));
    c.note(format!("max residual {:.2e}, {secs:.1}s", num(&r, "/summary/max_residual")));
    c
}

fn pestov(dir: &Path, secs: f64) -> Criterion {
    let mut c = Criterion::new(2, "Pestov identity");
    let r = record(dir, "pestov_identity");
    let surfaces = list(&r, "/summary/surfaces");
    let models: std::collections::BTreeSet<_> = surfaces.iter().filter_map(|s| s["surface"].as_str()).map(|s| s.split('(').next().unwrap()).collect();
    c.require(models.len() == 2, "both surface models covered");
    for s in surfaces {
        let name = s["surface"].as_str().unwrap_or("?");
        c.require(s["samples"].as_u64() == Some(100), format!("{name}: 100 samples"));
        let worst = num(s, "/max_residual");
        c.require(worst < 1e-8, format!("{name}: residual {worst:.2e} < 1e-8"));
    }
    c.require(secs < 120.0, format!("runtime {secs:.1}s < 2 min"));
    c.note(format!("max residual {:.2e}, {secs:.1}s", num(&r, "/summary/max_residual")));
    c
}

fn anchors(dir: &Path) -> Criterion {
    let mut c = Criterion::new(3, "Gauss-Bonnet and volume");
    let r = record(dir, "volume_anchors");
    let area = num(&r, "/summary/bolza_area");
    c.require((area - 4.0 * std::f64::consts::PI).abs() < 1e-6, format!("Bolza area {area} = 4π within 1e-6"));
    for s in list(&r, "/summary/surfaces") {
        let name = s["surface"].as_str().unwrap_or("?");
        let unit = num(s, "/unit_norm");
        let a = num(s, "/area");
        c.require((unit - 2.0 * std::f64::consts::PI * a).abs() < 1e-6, format!("{name}: ⟨1,1⟩ = 2π·Area within 1e-6"));
        c.require(num(s, "/gauss_bonnet_error") < 1e-6, format!("{name}: ∫K = 2πχ within 1e-6"));
    }
    c.note(format!("|Area − 4π| = {:.1e}", (area - 4.0 * std::f64::consts::PI).abs()));
    c
}

fn orbits(dir: &Path, secs: f64) -> Criterion {
    let mut c = Criterion::new(4, "orbit suite");
    let r = record(dir, "orbits");
    let s = &r["summary"];
    let n = s["orbits"].as_u64().unwrap_or(0);
    c.require(n > 0, "orbits found");
    c.require(list(s, "/skipped").is_empty(), format!("no word class without an orbit: {:?}", s["skipped"]));
    c.require(num(s, "/max_closure_error") < 1e-8, format!("closure {:.2e} < 1e-8", num(s, "/max_closure_error")));
    c.require(num(s, "/max_period_error") < 1e-8, format!("period error {:.2e} < 1e-8", num(s, "/max_period_error")));
    c.require(num(s, "/continued_to") == 0.2, "continued to λ = 0.2");
    c.require(s["continued"].as_u64() == Some(n) && list(s, "/continuation_failures").is_empty(), "every orbit continued");
    let cont = num(s, "/max_continued_closure_error");
    c.require(cont < 1e-8, format!("continued closure {cont:.2e} < 1e-8"));
    c.require(secs < 300.0, format!("runtime {secs:.1}s < 5 min"));
    c.note(format!("{n} orbits, closure {:.1e}, continued {cont:.1e}, {secs:.1}s", num(s, "/max_closure_error")));
    c
}

fn riccati(dir: &Path) -> Criterion {
    let mut c = Criterion::new(5, "Riccati");
    let s = &record(dir, "riccati")["summary"];
    for key in ["geodesic_plus_error", "geodesic_minus_error", "geodesic_separation_error"] {
        c.require(num(s, &format!("/{key}")) < 1e-6, format!("{key} {:.2e} < 1e-6", num(s, &format!("/{key}"))));
    }
    c.require(num(s, "/lambda") == 0.2, "Bolza λ = 0.2");
    c.require(num(s, "/separation") > 0.0, "positive separation at λ = 0.2");
    c.require(num(s, "/max_residual") < 1e-6, format!("Riccati residual {:.2e} < 1e-6", num(s, "/max_residual")));
    c.require(num(s, "/flat_separation") < 1e-3, "flat torus separation < 1e-3");
    c.note(format!("separation {:.6}, flat {:.1e}", num(s, "/separation"), num(s, "/flat_separation")));
    c
}

fn alpha(dir: &Path) -> Criterion {
    let mut c = Criterion::new(6, "alpha control");
    let s = &record(dir, "alpha_control")["summary"];
    let surfaces = list(s, "/surfaces");
    let lambdas: Vec<&str> = surfaces.iter().filter_map(|r| r["surface"].as_str()).collect();
    c.require(lambdas == ["bolza(lambda=0)", "bolza(lambda=0.2)", "bolza(lambda=0.5)"], format!("Bolza λ ∈ {{0, 0.2, 0.5}}: {lambdas:?}"));
    let mut alphas = Vec::new();
    for r in surfaces {
        let name = r["surface"].as_str().unwrap_or("?");
        c.require(r["samples"].as_u64().unwrap_or(0) >= 200, format!("{name}: 200 samples"));
        c.require(num(r, "/alpha") > 0.0, format!("{name}: α̂ = {} > 0", num(r, "/alpha")));
        c.require(num(r, "/min_gap_slack") >= -1e-8, format!("{name}: gap slack {} ≥ −1e-8", num(r, "/min_gap_slack")));
        alphas.push(format!("{:.3}", num(r, "/alpha")));
    }
    c.require(num(s, "/control/alpha") < 0.0, format!("flat torus α̂ = {} < 0", num(s, "/control/alpha")));
    c.note(format!("α̂ = {}, control {:.3}", alphas.join(", "), num(s, "/control/alpha")));
    c
}

fn ray(dir: &Path) -> Criterion {
    let mut c = Criterion::new(7, "ray transform kernel");
    let s = &record(dir, "ray_transform")["summary"];
    for lambda in [0.0, 0.2] {
        let fields: Vec<&Value> = list(s, "/fields").iter().filter(|f| num(f, "/lambda") == lambda).collect();
        c.require(fields.len() == 20, format!("λ = {lambda}: 20 fields, got {}", fields.len()));
        let worst = fields.iter().map(|f| num(f, "/max_relative")).fold(0.0, f64::max);
        c.require(worst < 1e-6, format!("λ = {lambda}: max |I|/T = {worst:.2e} < 1e-6"));
        let witness = list(s, "/witness_error").iter().find(|w| w[0].as_f64() == Some(lambda)).and_then(|w| w[1].as_f64()).unwrap_or(f64::NAN);
        // exact up to rounding in the quadrature sum
        c.require(witness <= 16.0 * f64::EPSILON, format!("λ = {lambda}: |I(1) − T|/T = {witness:.1e}"));
        c.note(format!("λ={lambda}: {worst:.1e}"));
    }
    c
}

fn transport(dir: &Path) -> Criterion {
    let mut c = Criterion::new(8, "transport recovery");
    let s = &record(dir, "transport_recovery")["summary"];
    let cases = list(s, "/cases");
    c.require(!cases.is_empty(), "cases ran");
    for r in cases {
        let tag = format!("{} case {}", r["surface"].as_str().unwrap_or("?"), r["case"]);
        c.require(num(r, "/relative_error") < 1e-5, format!("{tag}: error {:.2e} < 1e-5", num(r, "/relative_error")));
        c.require(num(r, "/energy_fraction") >= 0.999, format!("{tag}: energy fraction {} ≥ 0.999", num(r, "/energy_fraction")));
    }
    c.note(format!("max error {:.1e}", num(s, "/max_error")));
    c
}

fn entropy(dir: &Path, secs: f64) -> Criterion {
    let mut c = Criterion::new(9, "entropy production");
    let s = &record(dir, "entropy")["summary"];
    let zero = list(s, "/curve").iter().find(|p| num(p, "/s") == 0.0).map(|p| num(p, "/production"));
    c.require(zero == Some(0.0), format!("e(0) = 0 exactly: {zero:?}"));
    c.require(num(s, "/conformal_max_production") == 0.0, "conformal q gives a zero curve");
    let d = &s["derivatives"];
    let (e1, se1) = (num(d, "/first_derivative"), num(d, "/first_stderr"));
    c.require(e1.abs() < 3.0 * se1, format!("|ê'(0)| = {:.3e} < 3·stderr = {:.3e}", e1.abs(), 3.0 * se1));
    let (e2, var) = (num(d, "/second_derivative"), num(d, "/variance"));
    let rel = (e2 - var).abs() / var.abs();
    c.require(rel < 0.2, format!("|ê''(0) − Var|/Var = {rel:.3} < 0.2"));
    let (cv, cse) = (num(s, "/coboundary_variance"), num(s, "/coboundary_stderr"));
    c.require(cv.abs() < 3.0 * cse, format!("coboundary variance {cv:.2e} within 3·{cse:.2e}"));
    c.require(secs < 900.0, format!("runtime {secs:.1}s < 15 min"));
    c.note(format!("ê'' = {e2:.3}, Var = {var:.3}, rel {:.1}%, {secs:.1}s", 100.0 * rel));
    c
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism(a: &Path, b: &Path) -> Criterion {
    let mut c = Criterion::new(10, "determinism");
    let (fa, fb) = (files(a), files(b));
    c.require(fa.keys().eq(fb.keys()), format!("same file set: {:?} vs {:?}", fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>()));
    for (name, bytes) in &fa {
        c.require(fb.get(name) == Some(bytes), format!("{name} differs"));
    }
    c.note(format!("{} files compared", fa.len()));
    c
}

#[test]
fn acceptance_criteria() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let code = full_suite(first.path());
    let timings: BTreeMap<String, f64> = serde_json::from_str(&std::fs::read_to_string(first.path().join("timings.json")).unwrap()).unwrap();
    let t = |k: &str| timings.get(k).copied().unwrap_or(f64::INFINITY);
    let code2 = full_suite(second.path());

    let criteria = [
        frame(first.path(), t("frame_identities")),
        pestov(first.path(), t("pestov_identity")),
        anchors(first.path()),
        orbits(first.path(), t("orbits")),
        riccati(first.path()),
        alpha(first.path()),
        ray(first.path()),
        transport(first.path()),
        entropy(first.path(), t("entropy")),
        determinism(first.path(), second.path()),
    ];
    // written to the stderr handle directly, which the test harness does not
    // capture, so the lines appear in every `cargo test` log
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for c in &criteria {
        writeln!(err, "{}", c.line()).unwrap();
    }
    writeln!(err, "full-suite exit codes: {code}, {code2}").unwrap();
    drop(err);
    let failed: Vec<usize> = criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
    assert_eq!((code, code2), (0, 0), "full-suite exit status");
}
