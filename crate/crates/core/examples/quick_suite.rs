//! Run the experiment suite at reduced budgets through the library and print
//! every check. The same records are written as by `magtomo full-suite`.
//!
//! `cargo run --release --example quick_suite [out-dir]`

use magtomo::cli::{run, Experiment, ExperimentConfig};

fn main() -> magtomo::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "magtomo-quick".into());
    let mut cfg = ExperimentConfig { out: out.into(), ..Default::default() };
    cfg.surface.bolza_grid = 48;
    cfg.frame.samples = 5;
    cfg.pestov.samples = 5;
    cfg.alpha.samples = 20;
    cfg.alpha.gap_samples = 4;
    cfg.orbits.max_word_length = 2;
    cfg.ray.fields = 3;
    cfg.entropy.length = 2000.0;
    cfg.entropy.samples = 1000;
    let result = run(&cfg, &Experiment::ALL)?;
    for (e, o) in &result.outcomes {
        println!("{} {}: {}", o.criterion, e.name(), if o.passed() { "pass" } else { "FAIL" });
        for c in &o.report.checks {
            println!("    {:<32} {:>11.3e} {:>2} {:.3e}", c.id, c.value, c.comparison, c.threshold);
        }
    }
    for (e, msg) in &result.errors {
        println!("{}: error {msg}", e.name());
    }
    Ok(())
}
