//! Curated test systems with facts that can be checked independently.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::linalg::{diag, real_matrix, CMatrix};
use crate::propagator::{FourierTerm, SystemSpec};

/// The Vinograd-type system
/// `A(t) = [[-1 + a cos²t, 1 - a sin t cos t], [-1 - a sin t cos t, -1 + a sin²t]]`.
///
/// Its pointwise eigenvalues have real part `(a - 2) / 2` for every `t`, yet
/// `e^{(a-1)t}(cos t, -sin t)` solves it, so for `1 < a < 2` the frozen-time
/// spectrum predicts decay while solutions grow.
pub fn vinograd(a: f64) -> SystemSpec {
    let half = a / 2.0;
    SystemSpec::periodic_fourier(
        TAU,
        vec![
            FourierTerm {
                harmonic: 0,
                cos: real_matrix(&[&[-1.0 + half, 1.0], &[-1.0, -1.0 + half]]),
                sin: CMatrix::zeros(2, 2),
            },
            FourierTerm {
                harmonic: 2,
                cos: real_matrix(&[&[half, 0.0], &[0.0, -half]]),
                sin: real_matrix(&[&[0.0, -half], &[-half, 0.0]]),
            },
        ],
    )
    .expect("vinograd coefficients are well formed")
}

/// Max residual of the closed-form Vinograd solution over one period,
/// relative to the solution's size.
pub fn vinograd_closed_form_residual(a: f64) -> f64 {
    let spec = vinograd(a);
    let mut worst: f64 = 0.0;
    for k in 0..=4096 {
        let t = TAU * k as f64 / 4096.0;
        let g = ((a - 1.0) * t).exp();
        let y = [g * t.cos(), -g * t.sin()];
        let dy = [
            g * ((a - 1.0) * t.cos() - t.sin()),
            g * (-(a - 1.0) * t.sin() - t.cos()),
        ];
        let m = spec.eval(t).expect("periodic spec evaluates everywhere");
        for r in 0..2 {
            let ay = m[(r, 0)].re * y[0] + m[(r, 1)].re * y[1];
            worst = worst.max((ay - dy[r]).abs() / g);
        }
    }
    worst
}

/// `A(t) = ω(t) J` with `ω(t) = 1 + ε cos t`: a rotation whose angle after one
/// period is exactly `2π`, so the monodromy is the identity.
pub fn modulated_rotation(eps: f64) -> SystemSpec {
    let j = real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]);
    SystemSpec::periodic_fourier(
        TAU,
        vec![
            FourierTerm {
                harmonic: 0,
                cos: j.clone(),
                sin: CMatrix::zeros(2, 2),
            },
            FourierTerm {
                harmonic: 1,
                cos: j * crate::linalg::c(eps, 0.0),
                sin: CMatrix::zeros(2, 2),
            },
        ],
    )
    .expect("rotation coefficients are well formed")
}

/// `diag(-1 + sin t, 1 + cos t)`: Floquet exponents exactly -1 and 1.
pub fn periodic_saddle() -> SystemSpec {
    SystemSpec::periodic_fourier(
        TAU,
        vec![
            FourierTerm {
                harmonic: 0,
                cos: diag(&[-1.0, 1.0]),
                sin: CMatrix::zeros(2, 2),
            },
            FourierTerm {
                harmonic: 1,
                cos: diag(&[0.0, 1.0]),
                sin: diag(&[1.0, 0.0]),
            },
        ],
    )
    .expect("saddle coefficients are well formed")
}

pub fn harmonic_oscillator() -> CMatrix {
    real_matrix(&[&[0.0, 1.0], &[-1.0, 0.0]])
}

/// `blockdiag(-1, [[0, -1], [1, 0]])`: one damped mode, one neutral rotation.
pub fn damped_plus_rotation() -> CMatrix {
    real_matrix(&[&[-1.0, 0.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 1.0, 0.0]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedClass {
    UniformlyStable,
    Hyperbolic,
    OnAxis,
}

/// How a known fact is established without the code under test.
#[derive(Debug, Clone, Copy)]
pub enum Oracle {
    /// Residual of a closed-form solution substituted into the ODE.
    ClosedForm(fn() -> f64),
    /// `det U(T, 0) = exp ∫_0^T tr A(t) dt`, the trace integrated by quadrature.
    LiouvilleTrace,
    /// Eigenvalues of the constant coefficient matrix, exponentiated.
    Eigensolve,
    /// Diagonal coefficients: each multiplier is `exp ∫_0^T a_ii(t) dt`.
    DiagonalQuadrature,
}

impl Oracle {
    pub fn name(&self) -> &'static str {
        match self {
            Oracle::ClosedForm(_) => "closed_form_solution",
            Oracle::LiouvilleTrace => "liouville_trace",
            Oracle::Eigensolve => "eigensolve",
            Oracle::DiagonalQuadrature => "diagonal_quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    MaxFloquetModulus,
    MinFloquetModulus,
    MonodromyDeterminantModulus,
}

#[derive(Debug, Clone)]
pub struct KnownFact {
    pub quantity: Quantity,
    pub expected: f64,
    pub oracle: Oracle,
}

#[derive(Debug, Clone)]
pub struct GallerySystem {
    pub name: &'static str,
    pub spec: SystemSpec,
    pub facts: Vec<KnownFact>,
    pub expected: ExpectedClass,
    /// Frozen-time eigenvalues all have negative real part although the
    /// system is not uniformly stable.
    pub misleading_pointwise: bool,
}

fn vinograd_residual_15() -> f64 {
    vinograd_closed_form_residual(1.5)
}

fn vinograd_residual_05() -> f64 {
    vinograd_closed_form_residual(0.5)
}

fn liouville(expected: f64) -> KnownFact {
    KnownFact {
        quantity: Quantity::MonodromyDeterminantModulus,
        expected,
        oracle: Oracle::LiouvilleTrace,
    }
}

/// The full gallery, in a fixed order.
pub fn gallery() -> Vec<GallerySystem> {
    let constant = |m: CMatrix| SystemSpec::constant(m).expect("gallery matrix is square");
    vec![
        GallerySystem {
            name: "vinograd_a1.5",
            spec: vinograd(1.5),
            facts: vec![
                KnownFact {
                    quantity: Quantity::MaxFloquetModulus,
                    expected: PI.exp(),
                    oracle: Oracle::ClosedForm(vinograd_residual_15),
                },
                liouville((-PI).exp()),
            ],
            expected: ExpectedClass::Hyperbolic,
            misleading_pointwise: true,
        },
        GallerySystem {
            name: "vinograd_a0.5",
            spec: vinograd(0.5),
            facts: vec![
                KnownFact {
                    quantity: Quantity::MaxFloquetModulus,
                    expected: (-PI).exp(),
                    oracle: Oracle::ClosedForm(vinograd_residual_05),
                },
                liouville((-3.0 * PI).exp()),
            ],
            expected: ExpectedClass::UniformlyStable,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "saddle_diag(-1,2)",
            spec: constant(diag(&[-1.0, 2.0])),
            facts: vec![
                KnownFact {
                    quantity: Quantity::MaxFloquetModulus,
                    expected: (2.0 * TAU).exp(),
                    oracle: Oracle::Eigensolve,
                },
                KnownFact {
                    quantity: Quantity::MinFloquetModulus,
                    expected: (-TAU).exp(),
                    oracle: Oracle::Eigensolve,
                },
            ],
            expected: ExpectedClass::Hyperbolic,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "stable_node_diag(-3,-1)",
            spec: constant(diag(&[-3.0, -1.0])),
            facts: vec![KnownFact {
                quantity: Quantity::MaxFloquetModulus,
                expected: (-TAU).exp(),
                oracle: Oracle::Eigensolve,
            }],
            expected: ExpectedClass::UniformlyStable,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "periodic_saddle",
            spec: periodic_saddle(),
            facts: vec![
                KnownFact {
                    quantity: Quantity::MaxFloquetModulus,
                    expected: TAU.exp(),
                    oracle: Oracle::DiagonalQuadrature,
                },
                liouville(1.0),
            ],
            expected: ExpectedClass::Hyperbolic,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "harmonic_oscillator",
            spec: constant(harmonic_oscillator()),
            facts: vec![KnownFact {
                quantity: Quantity::MaxFloquetModulus,
                expected: 1.0,
                oracle: Oracle::Eigensolve,
            }],
            expected: ExpectedClass::OnAxis,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "modulated_rotation",
            spec: modulated_rotation(0.5),
            facts: vec![liouville(1.0)],
            expected: ExpectedClass::OnAxis,
            misleading_pointwise: false,
        },
        GallerySystem {
            name: "damped_plus_rotation",
            spec: constant(damped_plus_rotation()),
            facts: vec![KnownFact {
                quantity: Quantity::MinFloquetModulus,
                expected: (-TAU).exp(),
                oracle: Oracle::Eigensolve,
            }],
            expected: ExpectedClass::OnAxis,
            misleading_pointwise: false,
        },
    ]
}
