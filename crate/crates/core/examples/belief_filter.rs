//! Simulates a two-regime market and tracks the filtered belief in the
//! crash regime against the regime that actually produced each return.

use regime_alloc::market::{advance_belief, Belief, RegimeModel};
use regime_alloc::rng::{stream, Domain};
use regime_alloc::sim::simulate_path;

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
    let start = Belief::new(model.stationary())?;
    let mut rng = stream(3, Domain::Misc, 0);
    let path = simulate_path(&model, &start, 40, &mut rng);

    let mut belief = start;
    println!("week  regime  returns            P(crash)");
    for t in 0..path.horizon() {
        let r = path.returns(t);
        belief = advance_belief(&model, &belief, r);
        let bar = "#".repeat((belief.probs()[1] * 30.0).round() as usize);
        println!(
            "{t:>4}  {:>6}  {:>+7.4} {:>+7.4}   {:.3} {bar}",
            if path.regimes[t] == 0 { "normal" } else { "crash" },
            r[0],
            r[1],
            belief.probs()[1]
        );
    }
    Ok(())
}
