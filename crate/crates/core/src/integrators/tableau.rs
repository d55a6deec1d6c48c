//! Butcher tableaus: mono-implicit Runge–Kutta methods of orders 2–6 and
//! classic explicit methods.
//!
//! A MIRK method is a Runge–Kutta method whose matrix factors as
//! A = D + v·bᵀ with D strictly lower triangular. Its stages
//!
//! k_i = f(y_n + v_i (y_{n+1} − y_n) + h Σ_{j<i} d_ij k_j)
//!
//! are implicit only through y_{n+1}; substituting a known endpoint value
//! makes them explicit in index order.
//!
//! MIRK2 (implicit midpoint) and MIRK4 are classical; the order-3, order-5,
//! and order-6 tableaus below are from the minimal-stage (s = p − 1) families
//! of optimized MIRK methods used in boundary-value solvers. Transcription is
//! not trusted: the order-estimation tests certify every tableau's empirical
//! convergence order, and all coefficients satisfy the Butcher order
//! conditions up to the nominal order.

use crate::error::{Error, Result};

/// A mono-implicit Runge–Kutta tableau (A = D + v·bᵀ).
#[derive(Debug, Clone, PartialEq)]
pub struct MirkTableau {
    pub name: String,
    /// Quadrature weights, length s.
    pub b: Vec<f64>,
    /// Endpoint-injection weights, length s.
    pub v: Vec<f64>,
    /// Strictly lower-triangular stage coupling, s×s.
    pub d: Vec<Vec<f64>>,
    /// Nominal convergence order.
    pub p: usize,
}

impl MirkTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Checks the structural invariants: consistent lengths, strictly
    /// lower-triangular D, and Σb = 1.
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if self.v.len() != s || self.d.len() != s {
            return Err(Error::InvalidArgument(format!(
                "tableau {}: inconsistent stage counts",
                self.name
            )));
        }
        for (i, row) in self.d.iter().enumerate() {
            if row.len() != s {
                return Err(Error::InvalidArgument(format!(
                    "tableau {}: D row {i} has length {}",
                    self.name,
                    row.len()
                )));
            }
            for (j, &val) in row.iter().enumerate() {
                if j >= i && val != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "tableau {}: D is not strictly lower triangular at ({i},{j})",
                        self.name
                    )));
                }
            }
        }
        let sum: f64 = self.b.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidArgument(format!(
                "tableau {}: Σb = {sum} ≠ 1",
                self.name
            )));
        }
        Ok(())
    }

    /// The induced Runge–Kutta matrix A = D + v·bᵀ.
    pub fn a_matrix(&self) -> Vec<Vec<f64>> {
        let s = self.stages();
        let mut a = vec![vec![0.0; s]; s];
        for i in 0..s {
            for j in 0..s {
                a[i][j] = self.d[i][j] + self.v[i] * self.b[j];
            }
        }
        a
    }
}

/// A standard explicit Runge–Kutta tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitTableau {
    pub name: String,
    /// Strictly lower-triangular stage matrix, s×s.
    pub a: Vec<Vec<f64>>,
    /// Quadrature weights, length s.
    pub b: Vec<f64>,
    /// Stage abscissae (unused for autonomous fields, kept for completeness).
    pub c: Vec<f64>,
    pub p: usize,
}

impl ExplicitTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

/// The built-in MIRK tableaus, orders 2 through 6, each with the minimal
/// stage count (s = 1 for the midpoint method, s = p − 1 above order 2).
pub fn builtin_tableaus() -> Vec<MirkTableau> {
    vec![mirk2(), mirk3(), mirk4(), mirk5(), mirk6()]
}

/// Looks up a tableau usable for training: one of the built-in MIRK methods
/// or the classic RK4 written in MIRK form (v = 0, so the injected step
/// reduces to the ordinary explicit method).
pub fn training_tableau(name: &str) -> Result<MirkTableau> {
    match name {
        "mirk2" => Ok(mirk2()),
        "mirk3" => Ok(mirk3()),
        "mirk4" => Ok(mirk4()),
        "mirk5" => Ok(mirk5()),
        "mirk6" => Ok(mirk6()),
        "rk4" => Ok(rk4_as_mirk()),
        other => Err(Error::InvalidArgument(format!(
            "unknown tableau '{other}' (expected mirk2..mirk6 or rk4)"
        ))),
    }
}

fn mirk2() -> MirkTableau {
    MirkTableau {
        name: "mirk2".into(),
        b: vec![1.0],
        v: vec![0.5],
        d: vec![vec![0.0]],
        p: 2,
    }
}

fn mirk3() -> MirkTableau {
    MirkTableau {
        name: "mirk3".into(),
        b: vec![0.25, 0.75],
        v: vec![0.0, 4.0 / 9.0],
        d: vec![vec![0.0, 0.0], vec![2.0 / 9.0, 0.0]],
        p: 3,
    }
}

fn mirk4() -> MirkTableau {
    MirkTableau {
        name: "mirk4".into(),
        b: vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        v: vec![0.0, 1.0, 0.5],
        d: vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0 / 8.0, -1.0 / 8.0, 0.0],
        ],
        p: 4,
    }
}

fn mirk5() -> MirkTableau {
    MirkTableau {
        name: "mirk5".into(),
        b: vec![5.0 / 54.0, 1.0 / 14.0, 32.0 / 81.0, 250.0 / 567.0],
        v: vec![0.0, 1.0, 27.0 / 32.0, 837.0 / 1250.0],
        d: vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![3.0 / 64.0, -9.0 / 64.0, 0.0, 0.0],
            vec![21.0 / 1000.0, 63.0 / 5000.0, -252.0 / 625.0, 0.0],
        ],
        p: 5,
    }
}

fn mirk6() -> MirkTableau {
    MirkTableau {
        name: "mirk6".into(),
        b: vec![7.0 / 90.0, 7.0 / 90.0, 16.0 / 45.0, 16.0 / 45.0, 2.0 / 15.0],
        v: vec![0.0, 1.0, 5.0 / 32.0, 27.0 / 32.0, 0.5],
        d: vec![
            vec![0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0],
            vec![9.0 / 64.0, -3.0 / 64.0, 0.0, 0.0, 0.0],
            vec![3.0 / 64.0, -9.0 / 64.0, 0.0, 0.0, 0.0],
            vec![-5.0 / 24.0, 5.0 / 24.0, 2.0 / 3.0, -2.0 / 3.0, 0.0],
        ],
        p: 6,
    }
}

/// Classic RK4 in MIRK form: v = 0 makes every stage independent of the
/// endpoint, so inverse injection leaves the method unchanged. Used to train
/// the explicit baseline through the same pipeline as the MIRK methods.
fn rk4_as_mirk() -> MirkTableau {
    MirkTableau {
        name: "rk4".into(),
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        v: vec![0.0; 4],
        d: vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        p: 4,
    }
}

/// Classic fourth-order Runge–Kutta as an explicit tableau.
pub fn rk4() -> ExplicitTableau {
    ExplicitTableau {
        name: "rk4".into(),
        a: vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        c: vec![0.0, 0.5, 0.5, 1.0],
        p: 4,
    }
}

/// Forward Euler (mostly for degenerate-case tests).
pub fn euler() -> ExplicitTableau {
    ExplicitTableau {
        name: "euler".into(),
        a: vec![vec![0.0]],
        b: vec![1.0],
        c: vec![0.0],
        p: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_structurally_valid() {
        let tabs = builtin_tableaus();
        assert_eq!(tabs.len(), 5);
        for (tab, p) in tabs.iter().zip([2usize, 3, 4, 5, 6]) {
            tab.validate().unwrap();
            assert_eq!(tab.p, p);
            let expected_stages = if p == 2 { 1 } else { p - 1 };
            assert_eq!(tab.stages(), expected_stages, "{}", tab.name);
        }
        training_tableau("rk4").unwrap().validate().unwrap();
    }

    #[test]
    fn midpoint_matches_displayed_form() {
        let t = &builtin_tableaus()[0];
        assert_eq!(t.b, vec![1.0]);
        assert_eq!(t.v, vec![0.5]);
        assert_eq!(t.d, vec![vec![0.0]]);
        assert_eq!(t.p, 2);
    }

    #[test]
    fn mirk4_matches_displayed_form() {
        let t = &builtin_tableaus()[2];
        assert_eq!(t.b, vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
        assert_eq!(t.v, vec![0.0, 1.0, 0.5]);
        assert_eq!(t.d[2][0], 1.0 / 8.0);
        assert_eq!(t.d[2][1], -1.0 / 8.0);
    }

    #[test]
    fn a_matrix_is_d_plus_vb() {
        for tab in builtin_tableaus() {
            let a = tab.a_matrix();
            for i in 0..tab.stages() {
                for j in 0..tab.stages() {
                    let expected = tab.d[i][j] + tab.v[i] * tab.b[j];
                    assert_eq!(a[i][j], expected);
                }
            }
        }
    }

    /// Order conditions on the induced A = D + v·bᵀ, checked through order 4
    /// (the classic rooted-tree conditions; higher orders are certified
    /// empirically by the convergence tests).
    #[test]
    fn order_conditions_up_to_four() {
        for tab in builtin_tableaus() {
            let s = tab.stages();
            let a = tab.a_matrix();
            let c: Vec<f64> = (0..s).map(|i| a[i].iter().sum()).collect();
            let b = &tab.b;
            let dot = |w: &[f64]| -> f64 { (0..s).map(|i| b[i] * w[i]).sum() };

            let sum_b: f64 = b.iter().sum();
            assert!((sum_b - 1.0).abs() < 1e-14, "{}", tab.name);
            if tab.p >= 2 {
                assert!((dot(&c) - 0.5).abs() < 1e-14, "{} b·c", tab.name);
            }
            if tab.p >= 3 {
                let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
                let ac: Vec<f64> =
                    (0..s).map(|i| (0..s).map(|j| a[i][j] * c[j]).sum()).collect();
                assert!((dot(&c2) - 1.0 / 3.0).abs() < 1e-14, "{} b·c²", tab.name);
                assert!((dot(&ac) - 1.0 / 6.0).abs() < 1e-14, "{} b·Ac", tab.name);
            }
            if tab.p >= 4 {
                let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
                let ac: Vec<f64> =
                    (0..s).map(|i| (0..s).map(|j| a[i][j] * c[j]).sum()).collect();
                let cac: Vec<f64> = (0..s).map(|i| c[i] * ac[i]).collect();
                let ac2: Vec<f64> = (0..s)
                    .map(|i| (0..s).map(|j| a[i][j] * c[j] * c[j]).sum())
                    .collect();
                let aac: Vec<f64> =
                    (0..s).map(|i| (0..s).map(|j| a[i][j] * ac[j]).sum()).collect();
                assert!((dot(&c3) - 0.25).abs() < 1e-14, "{} b·c³", tab.name);
                assert!((dot(&cac) - 0.125).abs() < 1e-14, "{} b·(c∘Ac)", tab.name);
                assert!((dot(&ac2) - 1.0 / 12.0).abs() < 1e-14, "{} b·Ac²", tab.name);
                assert!((dot(&aac) - 1.0 / 24.0).abs() < 1e-14, "{} b·A²c", tab.name);
            }
        }
    }

    #[test]
    fn unknown_tableau_is_rejected() {
        assert!(training_tableau("mirk7").is_err());
    }
}
