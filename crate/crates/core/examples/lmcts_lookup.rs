//! Builds the LMCTS lookup table backward in time, smooths it, and compares
//! it with the dynamic program on the same market.

use regime_alloc::dp::{DpOptions, DpSolver};
use regime_alloc::grid::BeliefGrid;
use regime_alloc::lmcts::{build_lookup, smooth_lookup, LmctsConfig};
use regime_alloc::market::{Constraints, RegimeModel, Utility};

fn main() -> regime_alloc::Result<()> {
    let model = RegimeModel::new(
        vec![vec![0.010, 0.006], vec![-0.008, -0.003]],
        vec![
            vec![vec![0.0016, 0.0004], vec![0.0004, 0.0006]],
            vec![vec![0.0036, 0.0015], vec![0.0015, 0.0012]],
        ],
        vec![vec![0.96, 0.04], vec![0.12, 0.88]],
        vec![0.0005],
    )?;
    let horizon = 20;
    let grid = BeliefGrid::new(2, 0.1)?;
    let utility = Utility::Crra { gamma: -1.0 };
    let constraints = Constraints::NoShort;

    let cfg = LmctsConfig { iterations: 1000, pool_paths: 2000, ..Default::default() };
    let run = build_lookup(&model, horizon, &grid, &utility, &constraints, &cfg)?;
    let smoothed = smooth_lookup(&run.lookup, 11, 1, &constraints)?;
    let dp = DpSolver::new(&model, &grid, constraints, &utility, DpOptions::default())?.solve(horizon)?;

    let b = grid.nearest(&model.stationary());
    println!("belief {:?}", grid.point(b).probs());
    println!("   t  lmcts (raw)      lmcts (smoothed)  dp");
    for t in 0..horizon {
        let fmt = |w: &[f64]| format!("{:.2}/{:.2}/{:.2}", w[0], w[1], w[2]);
        println!(
            "{t:>4}  {:<15}  {:<16}  {}",
            fmt(run.lookup.get(t, b)?.weights()),
            fmt(smoothed.get(t, b)?.weights()),
            fmt(dp.alloc[t][b].weights())
        );
    }
    let children: usize = run.reports.iter().flatten().map(|r| r.children).sum();
    println!("{} nodes, {children} children expanded", horizon * grid.len());
    Ok(())
}
