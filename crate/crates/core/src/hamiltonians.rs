//! Benchmark Hamiltonian systems with exact energies and gradients.
//!
//! Both systems live in ℝ⁴ with the state ordered as (q₁, q₂, p₁, p₂) —
//! positions first, momenta second — so the canonical structure matrix
//! J = [[0, I], [−I, 0]] maps a gradient to the velocity ẏ = J ∇H(y).
//!
//! - Double pendulum: nondimensionalized chaotic benchmark,
//!   H = (½p₁² + p₂² − p₁p₂ cos(q₁−q₂)) / (1 + sin²(q₁−q₂)) − 2cos q₁ − cos q₂.
//! - FPUT: a two-degree-of-freedom Fermi–Pasta–Ulam–Tsingou oscillator chain
//!   (unit masses, stiffness ω = 2) with quartic inter-mass potentials,
//!   H = ½(p₁² + p₂²) + (ω²/4)(q₂ − q₁)² + q₁⁴ + q₂⁴.
//!
//! Gradients are hand-derived closed forms; the unit tests arbitrate them
//! against central finite differences of the energies.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};

/// Canonical structure matrix J = [[0, I], [−I, 0]] for d position/momentum
/// pairs (state dimension 2d).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureMatrix {
    dim_half: usize,
}

impl StructureMatrix {
    pub fn new(dim_half: usize) -> Self {
        assert!(dim_half > 0, "structure matrix needs at least one pair");
        Self { dim_half }
    }

    pub fn dim_half(&self) -> usize {
        self.dim_half
    }

    pub fn dim(&self) -> usize {
        2 * self.dim_half
    }

    /// Applies J to a vector: (g_q, g_p) ↦ (g_p, −g_q).
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), g.len())?;
        let d = self.dim_half;
        let mut out = Vec::with_capacity(2 * d);
        out.extend_from_slice(&g[d..]);
        out.extend(g[..d].iter().map(|x| -x));
        Ok(out)
    }

    /// Dense matrix form, mainly for structural tests.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim_half;
        let mut m = vec![vec![0.0; 2 * d]; 2 * d];
        for i in 0..d {
            m[i][d + i] = 1.0;
            m[d + i][i] = -1.0;
        }
        m
    }
}

/// Identifies one of the built-in benchmark systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemName {
    #[serde(rename = "dp")]
    DoublePendulum,
    #[serde(rename = "fput")]
    Fput,
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemName::DoublePendulum => write!(f, "dp"),
            SystemName::Fput => write!(f, "fput"),
        }
    }
}

impl FromStr for SystemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(SystemName::DoublePendulum),
            "fput" => Ok(SystemName::Fput),
            other => Err(Error::InvalidArgument(format!(
                "unknown system '{other}' (expected 'dp' or 'fput')"
            ))),
        }
    }
}

/// A benchmark system: closed-form Hamiltonian, exact gradient, and the
/// induced vector field f = J ∇H.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HamiltonianSystem {
    name: SystemName,
}

/// FPUT stiffness constant ω.
pub const FPUT_OMEGA: f64 = 2.0;
/// FPUT mass parameter (fixed).
pub const FPUT_MASS: f64 = 1.0;

impl HamiltonianSystem {
    pub fn new(name: SystemName) -> Self {
        Self { name }
    }

    pub fn name(&self) -> SystemName {
        self.name
    }

    /// State dimension (4 for both built-in systems).
    pub fn dim(&self) -> usize {
        4
    }

    pub fn structure(&self) -> StructureMatrix {
        StructureMatrix::new(self.dim() / 2)
    }

    /// Energy H(y).
    pub fn hamiltonian(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(match self.name {
            SystemName::DoublePendulum => {
                let (q1, q2, p1, p2) = (y[0], y[1], y[2], y[3]);
                let delta = q1 - q2;
                let den = 1.0 + delta.sin().powi(2);
                (0.5 * p1 * p1 + p2 * p2 - p1 * p2 * delta.cos()) / den
                    - 2.0 * q1.cos()
                    - q2.cos()
            }
            SystemName::Fput => {
                let (q1, q2, p1, p2) = (y[0], y[1], y[2], y[3]);
                let w2 = FPUT_OMEGA * FPUT_OMEGA;
                0.5 * (p1 * p1 + p2 * p2) / FPUT_MASS
                    + w2 / 4.0 * (q2 - q1).powi(2)
                    + q1.powi(4)
                    + q2.powi(4)
            }
        })
    }

    /// Exact gradient ∇H(y).
    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        Ok(match self.name {
            SystemName::DoublePendulum => {
                let (q1, q2, p1, p2) = (y[0], y[1], y[2], y[3]);
                let delta = q1 - q2;
                let (s, c) = (delta.sin(), delta.cos());
                let den = 1.0 + s * s;
                let kin = 0.5 * p1 * p1 + p2 * p2 - p1 * p2 * c;
                // Quotient rule for ∂/∂δ of kin/den, with ∂δ/∂q1 = 1 = −∂δ/∂q2.
                let dq = (p1 * p2 * s * den - kin * 2.0 * s * c) / (den * den);
                vec![
                    dq + 2.0 * q1.sin(),
                    -dq + q2.sin(),
                    (p1 - p2 * c) / den,
                    (2.0 * p2 - p1 * c) / den,
                ]
            }
            SystemName::Fput => {
                let (q1, q2, p1, p2) = (y[0], y[1], y[2], y[3]);
                let w2 = FPUT_OMEGA * FPUT_OMEGA;
                vec![
                    -w2 / 2.0 * (q2 - q1) + 4.0 * q1.powi(3),
                    w2 / 2.0 * (q2 - q1) + 4.0 * q2.powi(3),
                    p1 / FPUT_MASS,
                    p2 / FPUT_MASS,
                ]
            }
        })
    }

    /// True vector field f(y) = J ∇H(y).
    pub fn vector_field(&self, y: &[f64]) -> Result<Vec<f64>> {
        let g = self.gradient(y)?;
        self.structure().apply(&g)
    }

    /// Unchecked closure form of the vector field, for handing to steppers
    /// and solvers that already validated dimensions.
    pub fn field_closure(&self) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let sys = *self;
        move |y: &[f64]| {
            let g = sys.gradient(y).expect("dimension checked by caller");
            sys.structure().apply(&g).expect("dimension checked")
        }
    }
}
