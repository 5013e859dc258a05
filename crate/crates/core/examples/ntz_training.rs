//! Trains a no-trade-zone network around a dynamic-programming base under
//! a 1% proportional cost and shows the learned bands.

use regime_alloc::dp::{DpOptions, DpSolver};
use regime_alloc::grid::BeliefGrid;
use regime_alloc::market::{Belief, Constraints, RegimeModel, Utility};
use regime_alloc::ntz::{train, zone, BasePolicy, TrainConfig};

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
    let horizon = 12;
    let constraints = Constraints::NoShort;
    let grid = BeliefGrid::new(2, 0.1)?;
    let dp = DpSolver::new(&model, &grid, constraints, &Utility::Crra { gamma: -1.0 }, DpOptions::default())?
        .solve(horizon)?;
    let base = BasePolicy::from_policy(&dp);
    let start = Belief::new(model.stationary())?;

    let cfg = TrainConfig {
        epochs: 8,
        train_paths: 2048,
        validation_paths: 1024,
        learning_rate: 0.5,
        cost_rate: 0.01,
        ..Default::default()
    };
    let report = train(&base, &model, &start, horizon, constraints, &cfg)?;
    println!("validation loss at init {:.6}", report.initial_validation_loss);
    for e in &report.history {
        println!("epoch {:>2}  train {:.6}  validation {:.6}", e.epoch, e.train_loss, e.validation_loss);
    }
    println!("kept epoch {}", report.best_epoch);

    println!("\nP(crash)  base w1  band w1         base w2  band w2");
    for b in (0..grid.len()).step_by(2) {
        let belief = grid.point(b);
        let alloc = base.at(0, belief)?;
        let z = zone(&report.params.layout, &report.params.values, alloc, belief.probs(), &constraints);
        let w = alloc.weights();
        println!(
            "{:>8.2}  {:>7.2}  [{:.2}, {:.2}]    {:>7.2}  [{:.2}, {:.2}]",
            belief.probs()[1],
            w[0],
            z.lower[0],
            z.upper[0],
            w[1],
            z.lower[1],
            z.upper[1]
        );
    }
    Ok(())
}
