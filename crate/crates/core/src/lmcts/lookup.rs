use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::market::Allocation;

/// Solved allocations keyed by time step and grid belief. Stages are filled
/// backward from the horizon, one full grid at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    horizon: usize,
    grid: BeliefGrid,
    stages: Vec<Option<Vec<Allocation>>>,
}

impl LookupTable {
    pub fn new(horizon: usize, grid: BeliefGrid) -> Self {
        LookupTable {
            horizon,
            grid,
            stages: vec![None; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    pub fn get(&self, t: usize, b: usize) -> Result<&Allocation> {
        self.stages
            .get(t)
            .and_then(|s| s.as_ref())
            .and_then(|s| s.get(b))
            .ok_or(Error::MissingEntry { t, belief: b })
    }

    pub fn stage(&self, t: usize) -> Option<&[Allocation]> {
        self.stages.get(t).and_then(|s| s.as_deref())
    }

    pub fn insert_stage(&mut self, t: usize, allocs: Vec<Allocation>) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::invalid("t", format!("{t} is beyond horizon {}", self.horizon)));
        }
        if allocs.len() != self.grid.len() {
            return Err(Error::invalid(
                "stage",
                format!("{} allocations for a grid of {}", allocs.len(), self.grid.len()),
            ));
        }
        self.stages[t] = Some(allocs);
        Ok(())
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.stages.iter().flatten().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether stages `from..horizon` are all present.
    pub fn complete_from(&self, from: usize) -> bool {
        self.stages[from.min(self.horizon)..].iter().all(|s| s.is_some())
    }

    pub fn is_complete(&self) -> bool {
        self.complete_from(0)
    }
}
