//! Runs every method on a shortened version of the shipped desk model with
//! a small cost sweep, then writes the CSV reports and SVG charts.

use std::path::PathBuf;

use regime_alloc::experiment::run_comparison;
use regime_alloc::io::ModelFile;

fn main() -> regime_alloc::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let text = std::fs::read_to_string(&path).expect("shipped config");
    let mut file = ModelFile::parse(&text, &path)?;
    file.run.horizon = 12;
    file.lmcts.iterations = 500;
    file.lmcts.pool_paths = 2000;
    file.nn.epochs = 5;
    file.nn.train_paths = 1024;
    file.nn.validation_paths = 512;
    file.evaluation.paths = 10_000;
    file.evaluation.cost_rates = Some(vec![0.0, 0.005, 0.01]);
    let cfg = file.into_config()?;

    let out = std::env::temp_dir().join("regime-alloc-comparison");
    let cmp = run_comparison(&cfg, Some(&out))?;
    println!("{:<20} {:>10} {:>8} {:>9} {:>9}", "method", "E[U]", "se", "P(goal)", "turnover");
    for r in &cmp.reports {
        println!(
            "{:<20} {:>10.5} {:>8.5} {:>9.4} {:>9.3}",
            r.method,
            r.expected_utility,
            r.utility_se,
            r.goal_probability.unwrap_or(f64::NAN),
            r.mean_turnover
        );
    }
    println!("\n{} files in {}", cmp.files.len(), out.display());
    Ok(())
}
