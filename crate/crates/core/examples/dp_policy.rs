//! Solves the belief-grid dynamic program for a two-asset market and prints
//! the allocation at the first step across beliefs.

use regime_alloc::dp::{DpOptions, DpSolver};
use regime_alloc::grid::BeliefGrid;
use regime_alloc::market::{Constraints, RegimeModel, Utility};

fn main() -> regime_alloc::Result<()> {
    let model = RegimeModel::new(
        vec![vec![0.08, 0.05], vec![-0.06, 0.01]],
        vec![
            vec![vec![0.04, 0.009], vec![0.009, 0.0225]],
            vec![vec![0.09, 0.018], vec![0.018, 0.04]],
        ],
        vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        vec![0.01],
    )?;
    let grid = BeliefGrid::new(2, 0.1)?;
    let utility = Utility::Crra { gamma: -1.0 };
    let table = DpSolver::new(&model, &grid, Constraints::NoShort, &utility, DpOptions::default())?.solve(4)?;

    println!("P(crash)  asset1  asset2  cash    value");
    for b in 0..grid.len() {
        let w = table.alloc[0][b].weights();
        println!(
            "{:>8.2}  {:>6.2}  {:>6.2}  {:>5.2}  {:>8.5}",
            grid.point(b).probs()[1],
            w[0],
            w[1],
            w[2],
            table.value[0][b]
        );
    }
    if !table.unconverged.is_empty() {
        println!("{} searches stopped at the move cap", table.unconverged.len());
    }
    Ok(())
}
