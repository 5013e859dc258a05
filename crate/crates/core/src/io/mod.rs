//! Model files, labeled-return calibration and table serialization.

mod config;
mod estimate;
mod table;

pub use config::{
    load_model, ConstraintKind, DpSection, EvaluationSection, LmctsSection, MarketSection, ModelFile, NnSection,
    RateSpec, RunConfig, RunSection, SelectionKind, UtilityKind, UtilitySection,
};
pub use estimate::{estimate_labeled, estimate_segments, read_labeled_returns, LabeledReturns, LABEL_COLUMN};
pub use table::{
    fmt_real, load_table, read_header, save_table, write_atomic, Header, Row, TableData, TableReader, TABLE_VERSION,
};
