//! Full-batch L-BFGS training of the Hamiltonian surrogate.
//!
//! The optimizer is a standard limited-memory BFGS: a two-loop recursion
//! over a short history of (step, gradient-change) pairs builds the search
//! direction, and a strong-Wolfe line search (bracket + cubic-interpolation
//! zoom) picks the step length. Training is full-batch; one epoch is one
//! optimizer round of up to `lbfgs_iters_per_epoch` quasi-Newton iterations
//! (the granularity at which the loss is logged), so the default budget of
//! 100 epochs spends up to 2000 iterations. Runs are bit-deterministic for
//! a fixed (seed, config, data) triple.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::integrators::{training_tableau, Trajectory};
use crate::model::{loss_and_param_grad, MlpHamiltonian};

/// Everything that determines a single training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub system_name: String,
    pub tableau_name: String,
    /// Sampling interval of the training trajectory.
    pub h: f64,
    /// Number of transitions in the training trajectory.
    pub n_samples: usize,
    pub epochs: usize,
    /// Quasi-Newton iterations per epoch; the loss is logged per epoch.
    pub lbfgs_iters_per_epoch: usize,
    pub lbfgs_history: usize,
    /// Armijo (sufficient decrease) constant.
    pub c1: f64,
    /// Curvature condition constant.
    pub c2: f64,
    /// Objective-evaluation budget of one line search.
    pub max_line_search_evals: usize,
    /// Terminate when the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
    /// Number of hidden layers in the surrogate network.
    pub hidden_layers: usize,
    /// Width of each hidden layer.
    pub hidden_width: usize,
}

impl TrainConfig {
    pub fn new(system_name: &str, tableau_name: &str, h: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            system_name: system_name.to_string(),
            tableau_name: tableau_name.to_string(),
            h,
            n_samples,
            epochs: 100,
            lbfgs_iters_per_epoch: 20,
            lbfgs_history: 50,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 20,
            grad_tol: 1e-10,
            seed,
            hidden_layers: 3,
            hidden_width: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.lbfgs_iters_per_epoch < 1 {
            return Err(Error::InvalidArgument(
                "epochs and iterations per epoch must be at least 1".into(),
            ));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling interval must be positive, got {}",
                self.h
            )));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "line-search constants need 0 < c1 < c2 < 1, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if self.lbfgs_history == 0 || self.max_line_search_evals == 0 {
            return Err(Error::InvalidArgument(
                "history and line-search budget must be positive".into(),
            ));
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one hidden layer of positive width".into(),
            ));
        }
        Ok(())
    }

    /// Stable 16-hex-digit digest of the configuration, stored in
    /// checkpoints so evaluation can detect mismatched settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    EpochsExhausted,
    GradTol,
    LineSearchFailure,
}

/// Optimization trace returned alongside the trained parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at the end of epoch k; entry 0 is the initial loss, so a run
    /// of n full epochs has n + 1 entries. A run that terminates mid-epoch
    /// (gradient tolerance, line-search failure) closes the history with
    /// the terminal loss.
    pub loss_history: Vec<f64>,
    /// Gradient max-norm at each recorded epoch, aligned with loss_history.
    pub grad_norm_history: Vec<f64>,
    pub final_grad_norm: f64,
    pub wall_time: f64,
    pub termination_reason: TerminationReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

struct LinePoint {
    alpha: f64,
    value: f64,
    /// Directional derivative φ'(α) = ∇f(x + αd)ᵀd.
    slope: f64,
    grad: Vec<f64>,
}

/// Cubic minimizer of the interpolant through two (α, φ, φ') samples,
/// safeguarded to the interior of the bracket; falls back to bisection.
fn cubic_interpolate(lo: &LinePoint, hi: &LinePoint) -> f64 {
    let (a, fa, ga) = (lo.alpha, lo.value, lo.slope);
    let (b, fb, gb) = (hi.alpha, hi.value, hi.slope);
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let mid = 0.5 * (a + b);
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt() * (b - a).signum();
    let trial = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if !trial.is_finite() || trial < left + margin || trial > right - margin {
        mid
    } else {
        trial
    }
}

/// Outcome of one strong-Wolfe line search.
enum LineSearch {
    /// A point satisfying both Wolfe conditions (or, when the evaluation
    /// budget runs out, the best sufficient-decrease point seen).
    Accepted(LinePoint),
    Failed,
}

/// Minimize a smooth objective with L-BFGS.
///
/// `objective` maps parameters to (value, gradient); gradients are trusted
/// (they are finite-difference-validated where this is used for training).
/// Termination: gradient max-norm below `cfg.grad_tol` (checked before the
/// first step, so a stationary start stops at epoch 0), the iteration
/// budget `cfg.epochs × cfg.lbfgs_iters_per_epoch`, or a line search that
/// cannot find any decrease.
pub fn lbfgs_minimize<F>(
    mut objective: F,
    x0: &[f64],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    let (mut value, mut grad) = objective(&x)?;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericalOverflow {
            context: "objective at the initial point",
            index: 0,
        });
    }

    let mut loss_history = vec![value];
    let mut grad_norm_history = vec![max_norm(&grad)];
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y, 1/yᵀs)
    let mut reason = TerminationReason::EpochsExhausted;

    if max_norm(&grad) <= cfg.grad_tol {
        reason = TerminationReason::GradTol;
    } else {
        // The current (value, grad) is not yet logged at an epoch boundary.
        let mut pending = false;
        for iter in 0..cfg.epochs * cfg.lbfgs_iters_per_epoch {
            // Two-loop recursion: d = −H·g with H seeded by the scaled identity.
            let mut q = grad.clone();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &q);
                for (qk, yk) in q.iter_mut().zip(y) {
                    *qk -= a * yk;
                }
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.last() {
                let gamma = dot(s, y) / dot(y, y);
                for qk in q.iter_mut() {
                    *qk *= gamma;
                }
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let beta = rho * dot(y, &q);
                for (qk, sk) in q.iter_mut().zip(s) {
                    *qk += (a - beta) * sk;
                }
            }
            let direction: Vec<f64> = q.iter().map(|v| -v).collect();

            let slope0 = dot(&grad, &direction);
            if slope0 >= 0.0 {
                // Curvature information went stale; a fresh steepest-descent
                // step is always a descent direction.
                history.clear();
                let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
                let slope0 = dot(&grad, &direction);
                match wolfe_search(&mut objective, &x, value, &direction, slope0, 1.0, cfg)? {
                    LineSearch::Accepted(pt) => {
                        accept_step(&mut x, &direction, pt, &mut value, &mut grad, &mut history, cfg);
                    }
                    LineSearch::Failed => {
                        reason = TerminationReason::LineSearchFailure;
                        break;
                    }
                }
            } else {
                let alpha0 = if iter == 0 {
                    let g1: f64 = grad.iter().map(|g| g.abs()).sum();
                    (1.0 / g1).min(1.0)
                } else {
                    1.0
                };
                match wolfe_search(&mut objective, &x, value, &direction, slope0, alpha0, cfg)? {
                    LineSearch::Accepted(pt) => {
                        accept_step(&mut x, &direction, pt, &mut value, &mut grad, &mut history, cfg);
                    }
                    LineSearch::Failed => {
                        reason = TerminationReason::LineSearchFailure;
                        break;
                    }
                }
            }

            pending = true;
            if (iter + 1) % cfg.lbfgs_iters_per_epoch == 0 {
                loss_history.push(value);
                grad_norm_history.push(max_norm(&grad));
                pending = false;
            }
            if max_norm(&grad) <= cfg.grad_tol {
                reason = TerminationReason::GradTol;
                break;
            }
        }
        if pending {
            loss_history.push(value);
            grad_norm_history.push(max_norm(&grad));
        }
    }

    let final_grad_norm = max_norm(&grad);
    Ok((
        x,
        TrainReport {
            loss_history,
            grad_norm_history,
            final_grad_norm,
            wall_time: start.elapsed().as_secs_f64(),
            termination_reason: reason,
        },
    ))
}

/// Apply an accepted line-search point and push the (s, y) pair, skipping
/// pairs whose curvature yᵀs is too small to keep the metric positive.
fn accept_step(
    x: &mut [f64],
    direction: &[f64],
    pt: LinePoint,
    value: &mut f64,
    grad: &mut Vec<f64>,
    history: &mut Vec<(Vec<f64>, Vec<f64>, f64)>,
    cfg: &TrainConfig,
) {
    let s: Vec<f64> = direction.iter().map(|d| pt.alpha * d).collect();
    let y: Vec<f64> = pt.grad.iter().zip(grad.iter()).map(|(gn, go)| gn - go).collect();
    let ys = dot(&y, &s);
    // Relative guard: curvature must be positive by a margin that scales
    // with the pair, or tiny late-stage steps would all be rejected.
    if ys > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
        if history.len() == cfg.lbfgs_history {
            history.remove(0);
        }
        history.push((s.clone(), y, 1.0 / ys));
    }
    for (xk, sk) in x.iter_mut().zip(&s) {
        *xk += sk;
    }
    *value = pt.value;
    *grad = pt.grad;
}

/// Strong-Wolfe line search: bracketing walk followed by zoom with cubic
/// interpolation. Non-finite trial values are treated as "stepped too far"
/// and shrink the bracket. If the evaluation budget runs out, the best
/// point with sufficient decrease is accepted; with no such point the
/// search reports failure.
fn wolfe_search<F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    direction: &[f64],
    slope0: f64,
    alpha0: f64,
    cfg: &TrainConfig,
) -> Result<LineSearch>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut evals = 0usize;
    let mut probe = |alpha: f64, evals: &mut usize| -> Result<LinePoint> {
        *evals += 1;
        let trial: Vec<f64> = x.iter().zip(direction).map(|(xk, dk)| xk + alpha * dk).collect();
        let (value, grad) = objective(&trial)?;
        let slope = if value.is_finite() { dot(&grad, direction) } else { f64::NAN };
        Ok(LinePoint { alpha, value, slope, grad })
    };

    let armijo = |pt: &LinePoint| pt.value <= f0 + cfg.c1 * pt.alpha * slope0;
    let curvature = |pt: &LinePoint| pt.slope.abs() <= -cfg.c2 * slope0;

    let mut best: Option<LinePoint> = None;
    let consider_best = |pt: &LinePoint, best: &mut Option<LinePoint>| {
        if pt.value.is_finite() && pt.value < f0 && armijo(pt) {
            let better = best.as_ref().map_or(true, |b| pt.value < b.value);
            if better {
                *best = Some(LinePoint {
                    alpha: pt.alpha,
                    value: pt.value,
                    slope: pt.slope,
                    grad: pt.grad.clone(),
                });
            }
        }
    };

    // Bracketing phase.
    let mut prev = LinePoint {
        alpha: 0.0,
        value: f0,
        slope: slope0,
        grad: Vec::new(),
    };
    let mut alpha = alpha0;
    let mut bracket: Option<(LinePoint, LinePoint)> = None;
    while evals < cfg.max_line_search_evals {
        let pt = probe(alpha, &mut evals)?;
        consider_best(&pt, &mut best);
        if !pt.value.is_finite() || !armijo(&pt) || (prev.alpha > 0.0 && pt.value >= prev.value) {
            bracket = Some((prev, pt));
            break;
        }
        if curvature(&pt) {
            return Ok(LineSearch::Accepted(pt));
        }
        if pt.slope >= 0.0 {
            bracket = Some((pt, prev));
            break;
        }
        let next = alpha * 2.0;
        prev = pt;
        alpha = next;
    }

    // Zoom phase: lo always satisfies sufficient decrease, the minimizer is
    // bracketed between lo and hi.
    if let Some((mut lo, mut hi)) = bracket {
        while evals < cfg.max_line_search_evals {
            if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
                break;
            }
            let trial_alpha = if lo.grad.is_empty() || !hi.value.is_finite() {
                0.5 * (lo.alpha + hi.alpha)
            } else {
                cubic_interpolate(&lo, &hi)
            };
            let pt = probe(trial_alpha, &mut evals)?;
            consider_best(&pt, &mut best);
            if !pt.value.is_finite() || !armijo(&pt) || pt.value >= lo.value {
                hi = pt;
            } else {
                if curvature(&pt) {
                    return Ok(LineSearch::Accepted(pt));
                }
                if pt.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = LinePoint {
                        alpha: lo.alpha,
                        value: lo.value,
                        slope: lo.slope,
                        grad: std::mem::take(&mut lo.grad),
                    };
                }
                lo = pt;
            }
        }
    }

    match best {
        Some(pt) => Ok(LineSearch::Accepted(pt)),
        None => Ok(LineSearch::Failed),
    }
}

/// Train a Hamiltonian surrogate on one sampled trajectory.
///
/// Builds the network dictated by the config (seeded initialization), then
/// minimizes the interpolation loss of the configured tableau over the full
/// dataset. Returns the trained model and the optimization trace.
pub fn train(cfg: &TrainConfig, data: &Trajectory) -> Result<(MlpHamiltonian, TrainReport)> {
    cfg.validate()?;
    let tableau = training_tableau(&cfg.tableau_name)?;
    if (data.h - cfg.h).abs() > 1e-9 * cfg.h {
        return Err(Error::InvalidArgument(format!(
            "dataset sampled at h={} but config expects h={}",
            data.h, cfg.h
        )));
    }
    if data.n_transitions() != cfg.n_samples {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} transitions but config expects {}",
            data.n_transitions(),
            cfg.n_samples
        )));
    }
    if !data.system_name.is_empty() && data.system_name != cfg.system_name {
        return Err(Error::InvalidArgument(format!(
            "dataset is from system '{}' but config names '{}'",
            data.system_name, cfg.system_name
        )));
    }

    let mut layer_dims = Vec::with_capacity(cfg.hidden_layers + 2);
    layer_dims.push(data.dim());
    layer_dims.extend(std::iter::repeat(cfg.hidden_width).take(cfg.hidden_layers));
    layer_dims.push(1);
    let mut model = MlpHamiltonian::new(&layer_dims, cfg.seed)?;

    let mut scratch = model.clone();
    let objective = |params: &[f64]| -> Result<(f64, Vec<f64>)> {
        scratch.set_params(params)?;
        loss_and_param_grad(&scratch, data, &tableau)
    };
    let (params, report) = lbfgs_minimize(objective, &model.params(), cfg)?;
    model.set_params(&params)?;
    Ok((model, report))
}
