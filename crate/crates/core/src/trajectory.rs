use serde::{Deserialize, Serialize};

/// One record per outer step, taken at `(x_t, y_t)` before `x` moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub outer_t: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub grad_x_norm: f64,
    pub grad_map_y: f64,
    /// `‖y − y*(x)‖`, NaN when `y*` is unavailable.
    pub dist_y_star: f64,
    /// `max(grad_x_norm, dist_y_star)`.
    pub stationarity: f64,
    pub value: f64,
    pub inner_iters: u64,
    pub oracle_calls_x: u64,
    pub oracle_calls_y: u64,
    /// Outer second-moment accumulator after this step's update (scalar
    /// drivers), or its coordinate mean.
    pub v_outer: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    /// An iterate or gradient left the finite range; the trajectory is partial.
    DivergedNonfinite,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::DivergedNonfinite => "diverged-nonfinite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub status: RunStatus,
    /// Outer steps whose criterion-I inner loop hit the iteration cap.
    pub inner_cap_hits: u64,
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            status: RunStatus::Completed,
            inner_cap_hits: 0,
            final_x: Vec::new(),
            final_y: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    pub fn total_calls(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.oracle_calls_x + r.oracle_calls_y)
    }

    /// Smallest stationarity among rows whose cumulative oracle calls do not
    /// exceed `budget`.
    pub fn best_stationarity_within(&self, budget: u64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.oracle_calls_x + r.oracle_calls_y <= budget)
            .map(|r| r.stationarity)
            .filter(|s| !s.is_nan())
            .reduce(f64::min)
    }

    /// Running minimum of `grad_x_norm` over the rows.
    pub fn running_min_grad_x(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.min(r.grad_x_norm);
                best
            })
            .collect()
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new()
    }
}
