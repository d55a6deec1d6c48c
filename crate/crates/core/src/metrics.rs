//! Post-training evaluation of a learned Hamiltonian.
//!
//! The learned field is rolled out with the high-accuracy adaptive solver on
//! a fine grid (h_test = h/20) extending well past the training horizon, and
//! compared against a freshly generated reference trajectory of the true
//! system. Three numbers summarize a run: the mean 2-norm flow error inside
//! the training window (interpolation), the same over the continuation
//! (extrapolation), and the mean-subtracted Hamiltonian error — the mean is
//! removed because only ∇H is trained, so H_θ carries an arbitrary constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSystem, SystemName};
use crate::integrators::{adaptive_solve, reference_solve, Trajectory, REFERENCE_TOL};
use crate::model::MlpHamiltonian;

/// States whose max-norm exceeds this abort a rollout as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Closed evaluation windows on the time axis; the training horizon's end
/// belongs to both, matching the closed-interval window definitions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Windows {
    pub interp: [f64; 2],
    pub extrap: [f64; 2],
}

/// Metric bundle for one trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub e_interp: f64,
    pub e_extrap: f64,
    pub e_hamiltonian: f64,
    pub h_test: f64,
    pub windows: Windows,
}

/// Evaluation grid for a model trained on (h, N): sample spacing h/20 and
/// `extrap_ratio`× the training horizon, so the default ratio 4 turns a
/// [0, 20] training window into a [0, 80] test trajectory.
pub fn test_grid(h: f64, n: usize, extrap_ratio: usize) -> (f64, usize) {
    (h / 20.0, extrap_ratio * 20 * n)
}

/// Integrate an arbitrary field on a uniform sample grid, aborting once a
/// sample leaves the divergence bound.
///
/// Sampling restarts the adaptive solver on each interval, so a blow-up is
/// attributed to the first sample index past the bound.
pub fn rollout_field<F>(field: &F, y0: &[f64], h_test: f64, n_steps: usize) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h_test > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "test step must be positive, got {h_test}"
        )));
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(y0.to_vec());
    for step in 1..=n_steps {
        let next = adaptive_solve(
            field,
            states.last().unwrap(),
            0.0,
            h_test,
            1,
            REFERENCE_TOL,
            REFERENCE_TOL,
        )?
        .pop()
        .expect("one sample requested");
        if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Divergence {
                step,
                bound: DIVERGENCE_BOUND,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        system_name: "learned".into(),
        t0: 0.0,
        h: h_test,
        states,
    })
}

/// Roll out the learned vector field J∇H_θ.
pub fn rollout(
    model: &MlpHamiltonian,
    y0: &[f64],
    h_test: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if y0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: y0.len(),
        });
    }
    let field = model.field_closure();
    rollout_field(&field, y0, h_test, n_steps)
}

fn grids_match(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: a.dim(),
        });
    }
    let tol = 1e-9 * a.h.abs().max(1.0);
    if (a.h - b.h).abs() > tol || (a.t0 - b.t0).abs() > tol || a.states.len() != b.states.len() {
        return Err(Error::InvalidArgument(
            "trajectories are sampled on different grids".into(),
        ));
    }
    Ok(())
}

/// Mean 2-norm deviation over all grid points inside the closed window.
pub fn flow_error(rollout: &Trajectory, truth: &Trajectory, window: [f64; 2]) -> Result<f64> {
    grids_match(rollout, truth)?;
    let tol = 1e-9 * window[1].abs().max(1.0);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (n, (a, b)) in rollout.states.iter().zip(&truth.states).enumerate() {
        let t = truth.time(n);
        if t >= window[0] - tol && t <= window[1] + tol {
            let norm = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            sum += norm;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "no grid points inside window [{}, {}]",
            window[0], window[1]
        )));
    }
    Ok(sum / count as f64)
}

/// Mean-subtracted Hamiltonian error over a reference trajectory:
/// (1/(M+1)) Σ |δ_n − δ̄| with δ_n = H(y(t_n)) − H_θ(y(t_n)).
///
/// Subtracting the mean removes the constant gauge that gradient-only
/// training cannot determine.
pub fn hamiltonian_error(model: &MlpHamiltonian, truth: &Trajectory) -> Result<f64> {
    let system_name: SystemName = truth.system_name.parse()?;
    let system = HamiltonianSystem::new(system_name);
    let mut deltas = Vec::with_capacity(truth.states.len());
    for y in &truth.states {
        deltas.push(system.hamiltonian(y)? - model.eval(y)?);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    Ok(deltas.iter().map(|d| (d - mean).abs()).sum::<f64>() / deltas.len() as f64)
}

/// Full evaluation of a trained model against its system.
///
/// Regenerates the ground truth at the test resolution (never interpolated
/// from training data), rolls out the learned field on the same grid, and
/// assembles the metric bundle. `extrap_ratio` extends the horizon beyond
/// the training window; the presets default to 4.
pub fn evaluate_model(
    model: &MlpHamiltonian,
    system: &HamiltonianSystem,
    y0: &[f64],
    h: f64,
    n: usize,
    extrap_ratio: usize,
) -> Result<EvalReport> {
    if extrap_ratio < 1 {
        return Err(Error::InvalidArgument(
            "extrapolation ratio must be at least 1".into(),
        ));
    }
    let (h_test, n_test) = test_grid(h, n, extrap_ratio);
    let t_train = h * n as f64;
    let t_end = t_train * extrap_ratio as f64;
    let truth = reference_solve(system, y0, t_end, h_test)?;
    let learned = rollout(model, y0, h_test, n_test)?;
    let e_interp = flow_error(&learned, &truth, [0.0, t_train])?;
    let e_extrap = flow_error(&learned, &truth, [t_train, t_end])?;
    let e_hamiltonian = hamiltonian_error(model, &truth)?;
    Ok(EvalReport {
        e_interp,
        e_extrap,
        e_hamiltonian,
        h_test,
        windows: Windows {
            interp: [0.0, t_train],
            extrap: [t_train, t_end],
        },
    })
}
