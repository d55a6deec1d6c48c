//! One-step evaluation: injected (explicit) MIRK steps, fixed-point solved
//! forward MIRK steps, and standard explicit Runge–Kutta steps.

use crate::error::{Error, Result};
use crate::integrators::tableau::{ExplicitTableau, MirkTableau};

/// Maximum fixed-point iterations for the forward (implicit) solve.
const FIXED_POINT_CAP: usize = 100;

/// Evaluates the MIRK stages with a known endpoint value:
/// k_i = f(y_n + v_i (y_np1 − y_n) + h Σ_{j<i} d_ij k_j).
/// Exactly one `f` evaluation per stage, in index order.
fn mirk_stages<F>(
    tab: &MirkTableau,
    f: &F,
    y_n: &[f64],
    y_np1: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let dim = y_n.len();
    let s = tab.stages();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut x = vec![0.0; dim];
    for i in 0..s {
        for m in 0..dim {
            let mut xm = y_n[m] + tab.v[i] * (y_np1[m] - y_n[m]);
            for (j, k) in stages.iter().enumerate() {
                let d_ij = tab.d[i][j];
                if d_ij != 0.0 {
                    xm += h * d_ij * k[m];
                }
            }
            x[m] = xm;
        }
        let k = f(&x);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow {
                context: "mirk stage",
                index: i,
            });
        }
        stages.push(k);
    }
    Ok(stages)
}

fn combine(tab: &MirkTableau, y_n: &[f64], h: f64, stages: &[Vec<f64>]) -> Vec<f64> {
    let mut out = y_n.to_vec();
    for (bi, k) in tab.b.iter().zip(stages) {
        for (o, km) in out.iter_mut().zip(k) {
            *o += h * bi * km;
        }
    }
    out
}

/// One inverse-injected MIRK step: both endpoint states are known data, so
/// the stages are explicit and the step costs exactly s evaluations of `f`.
/// Returns ŷ_{n+1} = y_n + h Σ b_i k̂_i.
pub fn mirk_injected_step<F>(
    tab: &MirkTableau,
    f: &F,
    y_n: &[f64],
    y_np1: &[f64],
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    if y_n.len() != y_np1.len() {
        return Err(Error::DimensionMismatch {
            expected: y_n.len(),
            got: y_np1.len(),
        });
    }
    let stages = mirk_stages(tab, f, y_n, y_np1, h)?;
    Ok(combine(tab, y_n, h, &stages))
}

/// One forward (implicit) MIRK step, solved by fixed-point iteration on
/// y_{n+1} starting from an explicit Euler predictor. Converges when h is
/// inside the method's contraction region; iterates until successive
/// y_{n+1} values differ by less than `tol` in max-norm.
pub fn mirk_forward_step<F>(
    tab: &MirkTableau,
    f: &F,
    y_n: &[f64],
    h: f64,
    tol: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let f0 = f(y_n);
    let mut y_next: Vec<f64> = y_n.iter().zip(&f0).map(|(y, k)| y + h * k).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_CAP {
        let stages = mirk_stages(tab, f, y_n, &y_next, h)?;
        let candidate = combine(tab, y_n, h, &stages);
        residual = y_next
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        y_next = candidate;
        if residual < tol {
            return Ok(y_next);
        }
    }
    Err(Error::NoConvergence { residual })
}

/// One standard explicit Runge–Kutta step (s evaluations of `f`).
pub fn explicit_step<F>(tab: &ExplicitTableau, f: &F, y_n: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let dim = y_n.len();
    let s = tab.stages();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut x = vec![0.0; dim];
    for i in 0..s {
        for m in 0..dim {
            let mut xm = y_n[m];
            for (j, k) in stages.iter().enumerate() {
                let a_ij = tab.a[i][j];
                if a_ij != 0.0 {
                    xm += h * a_ij * k[m];
                }
            }
            x[m] = xm;
        }
        let k = f(&x);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow {
                context: "explicit stage",
                index: i,
            });
        }
        stages.push(k);
    }
    let mut out = y_n.to_vec();
    for (bi, k) in tab.b.iter().zip(&stages) {
        for (o, km) in out.iter_mut().zip(k) {
            *o += h * bi * km;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::tableau::{builtin_tableaus, euler, rk4, training_tableau};
    use std::cell::Cell;

    fn zero_field(y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }

    fn linear(y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    #[test]
    fn zero_field_returns_y_n() {
        for tab in builtin_tableaus() {
            let out = mirk_injected_step(&tab, &zero_field, &[1.0, -2.0], &[9.0, 9.0], 0.3).unwrap();
            assert_eq!(out, vec![1.0, -2.0]);
            let fwd = mirk_forward_step(&tab, &zero_field, &[1.0, -2.0], 0.3, 1e-14).unwrap();
            assert_eq!(fwd, vec![1.0, -2.0]);
        }
        let out = explicit_step(&rk4(), &zero_field, &[4.0], 0.5).unwrap();
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn midpoint_injection_closed_form() {
        // k₁ = f((y_n + y_{n+1})/2) for f(y) = y gives 1 + 0.1·(1 + 1.1)/2.
        let tab = &builtin_tableaus()[0];
        let out = mirk_injected_step(tab, &linear, &[1.0], &[1.1], 0.1).unwrap();
        assert!((out[0] - 1.105).abs() < 1e-15);
    }

    #[test]
    fn mirk4_injection_matches_hand_evaluated_stages() {
        let tab = &builtin_tableaus()[2];
        let (y0, h) = (1.0_f64, 0.1_f64);
        let y1 = (0.1_f64).exp();
        // Stage formulas with f(y) = y: k₁ = y_n, k₂ = y_{n+1},
        // k₃ = (y_n + y_{n+1})/2 + h/8 (k₁ − k₂), then
        // ŷ = y_n + h/6 (k₁ + k₂ + 4k₃).
        let k1 = y0;
        let k2 = y1;
        let k3 = 0.5 * (y0 + y1) + h / 8.0 * (k1 - k2);
        let expected = y0 + h / 6.0 * (k1 + k2 + 4.0 * k3);
        let out = mirk_injected_step(tab, &linear, &[y0], &[y1], h).unwrap();
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn injected_step_costs_exactly_s_evaluations() {
        for tab in builtin_tableaus() {
            let count = Cell::new(0usize);
            let f = |y: &[f64]| {
                count.set(count.get() + 1);
                y.to_vec()
            };
            mirk_injected_step(&tab, &f, &[1.0], &[1.05], 0.05).unwrap();
            assert_eq!(count.get(), tab.stages(), "{}", tab.name);
        }
    }

    #[test]
    fn forward_midpoint_matches_stability_function() {
        // Implicit midpoint on f(y) = λy has R(hλ) = (1 + hλ/2)/(1 − hλ/2).
        let tab = &builtin_tableaus()[0];
        let lambda = -1.3;
        let h = 0.2;
        let f = |y: &[f64]| vec![lambda * y[0]];
        let out = mirk_forward_step(tab, &f, &[2.0], h, 1e-15).unwrap();
        let z = h * lambda;
        let expected = 2.0 * (1.0 + 0.5 * z) / (1.0 - 0.5 * z);
        assert!((out[0] - expected).abs() < 1e-12, "{} vs {expected}", out[0]);
    }

    #[test]
    fn injection_of_converged_endpoint_is_self_consistent() {
        let f = |y: &[f64]| vec![(-y[0]).sin(), y[0] * 0.5 - y[1]];
        for tab in builtin_tableaus() {
            let y0 = [0.7, -0.2];
            let tol = 1e-14;
            let solved = mirk_forward_step(&tab, &f, &y0, 0.1, tol).unwrap();
            let injected = mirk_injected_step(&tab, &f, &y0, &solved, 0.1).unwrap();
            for (a, b) in injected.iter().zip(&solved) {
                assert!((a - b).abs() < 10.0 * tol, "{}", tab.name);
            }
        }
    }

    #[test]
    fn forward_solve_reports_non_convergence() {
        // h far outside the contraction region.
        let tab = &builtin_tableaus()[0];
        let f = |y: &[f64]| vec![100.0 * y[0] * y[0] + 1.0];
        let err = mirk_forward_step(tab, &f, &[1.0], 1.0, 1e-12);
        assert!(matches!(
            err,
            Err(Error::NoConvergence { .. }) | Err(Error::NumericalOverflow { .. })
        ));
    }

    #[test]
    fn rk4_linear_step_matches_stability_polynomial() {
        // 1 + h + h²/2 + h³/6 + h⁴/24 at h = 0.1.
        let out = explicit_step(&rk4(), &linear, &[1.0], 0.1).unwrap();
        let expected = 1.0 + 0.1 + 0.01 / 2.0 + 0.001 / 6.0 + 0.0001 / 24.0;
        assert!((out[0] - expected).abs() < 1e-16);
    }

    #[test]
    fn euler_linear_step() {
        let out = explicit_step(&euler(), &linear, &[1.0], 0.1).unwrap();
        assert_eq!(out, vec![1.1]);
    }

    #[test]
    fn rk4_in_mirk_form_equals_explicit_rk4() {
        // With v = 0 the injected step ignores the endpoint entirely.
        let mirk_rk4 = training_tableau("rk4").unwrap();
        let f = |y: &[f64]| vec![y[1], -y[0] * (1.0 + y[0] * y[0])];
        let y0 = [0.4, -0.3];
        let a = mirk_injected_step(&mirk_rk4, &f, &y0, &[123.0, -456.0], 0.2).unwrap();
        let b = explicit_step(&rk4(), &f, &y0, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn injected_step_commutes_with_constant_shift() {
        // Affine covariance: stepping the shifted field z ↦ f(z − c) from
        // y + c equals the unshifted step plus c.
        let f = |y: &[f64]| vec![y[1].cos(), y[0] * y[0] - 0.5];
        let c = [3.25, -1.5];
        let shifted = |z: &[f64]| f(&[z[0] - c[0], z[1] - c[1]]);
        for tab in builtin_tableaus() {
            let y0 = [0.3, 0.8];
            let y1 = [0.35, 0.78];
            let plain = mirk_injected_step(&tab, &f, &y0, &y1, 0.25).unwrap();
            let moved = mirk_injected_step(
                &tab,
                &shifted,
                &[y0[0] + c[0], y0[1] + c[1]],
                &[y1[0] + c[0], y1[1] + c[1]],
                0.25,
            )
            .unwrap();
            for i in 0..2 {
                assert!(
                    (moved[i] - (plain[i] + c[i])).abs() < 1e-14,
                    "{} component {i}",
                    tab.name
                );
            }
        }
    }

    #[test]
    fn overflow_reports_stage_index() {
        let f = |_: &[f64]| vec![f64::NAN];
        let tab = &builtin_tableaus()[2];
        match mirk_injected_step(tab, &f, &[1.0], &[1.0], 0.1) {
            Err(Error::NumericalOverflow { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }
}
