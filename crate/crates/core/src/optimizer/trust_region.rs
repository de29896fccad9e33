//! Single trust-region state machine (one global region, TuRBO-1 style).

use serde::{Deserialize, Serialize};

pub const INITIAL_LENGTH: f64 = 0.8;
pub const MIN_LENGTH: f64 = 1.0 / 128.0;
pub const MAX_LENGTH: f64 = 1.6;
/// Relative margin a batch must beat the incumbent by to count as a success.
const IMPROVEMENT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionSettings {
    pub initial_length: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub success_tolerance: usize,
    /// Defaults to `max(5, ceil(d / g))` when unset.
    pub failure_tolerance: Option<usize>,
}

impl Default for TrustRegionSettings {
    fn default() -> Self {
        Self {
            initial_length: INITIAL_LENGTH,
            min_length: MIN_LENGTH,
            max_length: MAX_LENGTH,
            success_tolerance: 3,
            failure_tolerance: None,
        }
    }
}

pub fn default_failure_tolerance(dimension: usize, batch_size: usize) -> usize {
    dimension.div_ceil(batch_size.max(1)).max(5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionState {
    pub side_length: f64,
    pub success_count: usize,
    pub failure_count: usize,
    pub success_tolerance: usize,
    pub failure_tolerance: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub initial_length: f64,
    /// Incumbent of the current region, unit-cube coordinates.
    pub center: Vec<f64>,
}

impl TrustRegionState {
    pub fn new(settings: &TrustRegionSettings, failure_tolerance: usize, center: Vec<f64>) -> Self {
        Self {
            side_length: settings.initial_length,
            success_count: 0,
            failure_count: 0,
            success_tolerance: settings.success_tolerance,
            failure_tolerance,
            min_length: settings.min_length,
            max_length: settings.max_length,
            initial_length: settings.initial_length,
            center,
        }
    }

    fn reset(&mut self) {
        self.side_length = self.initial_length;
        self.success_count = 0;
        self.failure_count = 0;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegionUpdate {
    pub state: TrustRegionState,
    /// The region collapsed below `min_length`; `state` is already reset to
    /// the initial length and the caller must re-seed the region.
    pub restart: bool,
    /// Side length right after the expand/shrink rule, before any reset.
    pub length_before_reset: f64,
}

pub fn is_improvement(batch_best: f64, incumbent: f64) -> bool {
    batch_best < incumbent - IMPROVEMENT_TOLERANCE * incumbent.abs()
}

/// Apply one batch outcome to the region.
pub fn update_trust_region(state: &TrustRegionState, batch_best: f64, incumbent: f64) -> TrustRegionUpdate {
    let mut next = state.clone();
    if is_improvement(batch_best, incumbent) {
        next.success_count += 1;
        next.failure_count = 0;
    } else {
        next.failure_count += 1;
        next.success_count = 0;
    }
    if next.success_count >= next.success_tolerance {
        next.side_length = (2.0 * next.side_length).min(next.max_length);
        next.success_count = 0;
    } else if next.failure_count >= next.failure_tolerance {
        next.side_length /= 2.0;
        next.failure_count = 0;
    }
    let length_before_reset = next.side_length;
    let restart = next.side_length < next.min_length;
    if restart {
        next.reset();
    }
    TrustRegionUpdate {
        state: next,
        restart,
        length_before_reset,
    }
}
