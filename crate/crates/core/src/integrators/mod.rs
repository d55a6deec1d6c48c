//! One-step integration machinery: MIRK tableaus and stepping, explicit
//! Runge–Kutta, an adaptive Dormand–Prince reference solver, trajectory
//! containers with CSV/JSON serialization, and empirical convergence-order
//! estimation.

mod dopri5;
mod order;
mod step;
mod tableau;
mod trajectory;

pub use dopri5::{adaptive_solve, reference_solve, REFERENCE_TOL};
pub use order::{
    estimate_order, forward_certification_plan, theorem_probe, theorem_step_sizes, ErrorTarget,
    ForwardPlan, OrderProbe,
};
pub use step::{explicit_step, mirk_forward_step, mirk_injected_step};
pub use tableau::{builtin_tableaus, euler, rk4, training_tableau, ExplicitTableau, MirkTableau};
pub use trajectory::{Trajectory, TrajectoryMeta};
