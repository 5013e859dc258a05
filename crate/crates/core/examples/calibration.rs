//! Generates labeled returns from a known model, writes them as CSV,
//! estimates the model back and saves the result as a model file.

use std::fmt::Write as _;

use regime_alloc::io::{estimate_labeled, read_labeled_returns, write_atomic, LABEL_COLUMN};
use regime_alloc::market::{Belief, RegimeModel};
use regime_alloc::rng::{stream, Domain};
use regime_alloc::sim::simulate_path;

fn main() -> regime_alloc::Result<()> {
    let truth = RegimeModel::new(
        vec![vec![0.010, 0.006], vec![-0.008, -0.003]],
        vec![
            vec![vec![0.0016, 0.0004], vec![0.0004, 0.0006]],
            vec![vec![0.0036, 0.0015], vec![0.0015, 0.0012]],
        ],
        vec![vec![0.96, 0.04], vec![0.12, 0.88]],
        vec![0.0005],
    )?;
    let mut rng = stream(1, Domain::Misc, 0);
    let path = simulate_path(&truth, &Belief::new(truth.stationary())?, 20_000, &mut rng);

    let dir = std::env::temp_dir().join("regime-alloc-calibration");
    let csv = dir.join("returns.csv");
    let mut text = format!("growth,value,{LABEL_COLUMN}\n");
    for t in 0..path.horizon() {
        let r = path.returns(t);
        writeln!(text, "{},{},{}", r[0], r[1], path.regimes[t]).unwrap();
    }
    write_atomic(&csv, text.as_bytes())?;

    let data = read_labeled_returns(&csv)?;
    let fitted = estimate_labeled(&data.returns, &data.labels, 2, vec![0.0005])?;
    for k in 0..2 {
        println!("regime {k}: mu {:?} (true {:?})", round(fitted.mu(k)), truth.mu(k));
    }
    println!("transitions {:?}", fitted.trans().iter().map(|r| round(r)).collect::<Vec<_>>());
    println!(
        "\nthe same step from the command line:\n  regime-alloc calibrate --returns {} --out {}",
        csv.display(),
        dir.display()
    );
    Ok(())
}

fn round(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| (v * 1e4).round() / 1e4).collect()
}
