use faer::MatRef;

use crate::model::ParameterPoint;

/// One Newton (tier I) or Gauss–Newton (tier II) iteration, reported at the
/// moment its search direction has been computed.
#[derive(Debug, Clone, Copy)]
pub enum IterationEvent<'a> {
    TierOne {
        mu: ParameterPoint,
        /// Index of the state being computed (`n + 1`).
        step: usize,
        iteration: usize,
        residual: &'a [f64],
    },
    TierTwo {
        mu: ParameterPoint,
        step: usize,
        iteration: usize,
        residual: &'a [f64],
        /// `J⁽ᵏ⁾·Φ_w`, `N × n_w`.
        jacobian_basis: MatRef<'a, f64>,
        /// Gauss–Newton direction `s⁽ᵏ⁾`.
        direction: &'a [f64],
    },
}

impl IterationEvent<'_> {
    pub fn tier(&self) -> u8 {
        match self {
            IterationEvent::TierOne { .. } => 1,
            IterationEvent::TierTwo { .. } => 2,
        }
    }
}

/// Hook invoked by the owning solver, single-threaded, once per iteration.
pub trait IterationObserver {
    fn observe(&mut self, event: IterationEvent<'_>);
}

/// Observer that ignores every event.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl IterationObserver for NoObserver {
    fn observe(&mut self, _event: IterationEvent<'_>) {}
}
