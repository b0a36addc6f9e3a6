//! Executable controller realization, closed-loop simulation and
//! time-domain performance metrics.

mod lfr;
mod metrics;
mod sim;

pub use lfr::{build_lfr, frozen_controller_frf, LfrController};
pub use metrics::{step_metrics, StepMetrics};
pub use sim::{
    butterworth_lowpass, filtered_square_wave, simulate_closed_loop, simulate_frozen_lti, square_wave,
    ScenarioOptions, ScenarioSignals,
};
