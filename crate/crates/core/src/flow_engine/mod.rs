//! Integral curves of the drift, Brownian paths, the Ito-Wentzell flow and minimum-energy controls.

mod control;
mod curve;
mod path;
mod wentzell;

pub use control::{optimal_control, ControlResult};
pub use curve::{integrate_end, integrate_stops, CurveEnd, Diffusion, IntegralCurve, StepRule};
pub use path::BrownianPath;
pub use wentzell::{FlowState, ItoWentzellFlow};
