//! Policy evaluation on held-out paths, method comparisons, CSV reports
//! and charts.

mod chart;
mod compare;
mod evaluate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chart::{line_chart, Series};
pub use compare::{
    belief_grid, eval_spec, in_stage, report_csv, run_comparison, solve_adjusted_dp, solve_base, solve_dp,
    solve_lmcts, summary_csv, train_nn, write_outputs, Comparison,
};
pub use evaluate::{
    evaluate, evaluate_on, evaluation_paths, mean_se, paired_difference, quantile_sorted, reported_utility, run_path,
    summarize, EvalReport, EvalSpec, PathOutcome, Policy,
};

/// Methods a comparison can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dp,
    Lmcts,
    DpNn,
    LmctsNn,
    AdjustedDp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dp, Method::Lmcts, Method::DpNn, Method::LmctsNn, Method::AdjustedDp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dp => "dp",
            Method::Lmcts => "lmcts",
            Method::DpNn => "dp_nn",
            Method::LmctsNn => "lmcts_nn",
            Method::AdjustedDp => "adjusted_dp",
        }
    }

    pub fn uses_network(self) -> bool {
        matches!(self, Method::DpNn | Method::LmctsNn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| format!("unknown method `{s}`; expected one of dp, lmcts, dp_nn, lmcts_nn, adjusted_dp"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain_of, stream_id, Domain};

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("dp-nn".parse::<Method>().unwrap(), Method::DpNn);
        assert!("nn".parse::<Method>().is_err());
    }

    #[test]
    fn evaluation_streams_are_disjoint_from_solver_streams() {
        let others = [Domain::DpScenarios, Domain::PathPool, Domain::MctsSearch, Domain::NnInit, Domain::NnTrain, Domain::NnValidation];
        for i in [0u64, 1, 1 << 40, (1 << 56) - 1] {
            let e = stream_id(Domain::Evaluation, i);
            assert_eq!(domain_of(e), Domain::Evaluation as u8);
            for d in others {
                for j in [0u64, i, (1 << 56) - 1] {
                    assert_ne!(e, stream_id(d, j));
                }
            }
        }
    }
}
