//! Momentum-resolved Lindblad dynamics of two-band fermion chains at the
//! correlation-matrix level, and the topology of the resulting Bloch-vector
//! trajectories.
//!
//! For a quadratic Lindbladian the single-particle correlation matrix
//! `Δ(t,k)` obeys
//!
//! ```text
//!   dΔ/dt = X Δ + Δ X† + 2 M_g,          X = i h − Γ σ0,
//! ```
//!
//! so every momentum evolves independently as a 2×2 problem: a closed-form
//! propagator `e^{Xt}`, a Lyapunov equation for the steady state, and a
//! Bloch-vector readout `δ_a = ½ Tr(Δ σ_a)`. Winding numbers of the unit
//! Bloch vector over one or several Brillouin zones are computed from
//! spherical-triangle solid angles; gain matrices with fractional momentum
//! dependence produce fractional per-zone windings that re-quantize over
//! multiple zones.
//!
//! Modules:
//! - [`pauli`]: exact 2×2 machinery (Pauli decomposition, matrix
//!   exponential, eigenpairs, Lyapunov solver)
//! - [`model`]: the dissipative SSH chain and its long-range variant
//! - [`dynamics`]: steady states, transient evolution, momentum trajectories
//! - [`topology`]: Bloch vectors, purification, windings, transition scans
//! - [`symmetry`]: inversion-symmetry audits, modular Hamiltonian,
//!   solid-angle preservation under matrix functions
//! - [`cli`]: scenario presets, sweeps and machine-readable reports

// Validation guards use `!(a > b)` on purpose: the negated form also rejects
// NaN inputs, which `a <= b` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod model;
pub mod pauli;
pub mod symmetry;
pub mod topology;

use thiserror::Error;

/// Errors shared across the crate. Numerical refusals (gap closed, origin
/// crossing, coarse grid) signal physics, not bugs: they mark transitions or
/// under-resolved trajectories.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigenvalues coincide and the matrix is non-diagonalizable (exceptional point); eigenvector gap {gap:.3e}")]
    Degenerate { gap: f64 },
    #[error("matrix is not stable: max eigenvalue real part {max_re:.3e} >= -{eps:.1e}")]
    Unstable { max_re: f64, eps: f64 },
    #[error("4x4 Lyapunov system is numerically singular")]
    SingularSystem,
    #[error("RK4 step {dt:.3e} exceeds accuracy guard {limit:.3e}")]
    StepSize { dt: f64, limit: f64 },
    #[error("purity gap closed (|d| = {purity:.3e}); no unit Bloch vector{}", at_k(.k))]
    GapClosed { purity: f64, k: Option<f64> },
    #[error("xy-projection passes within {radius:.3e} of the origin{}; planar winding undefined (transition signature)", at_k(.k))]
    OriginCrossing { radius: f64, k: Option<f64> },
    #[error("adjacent Bloch vectors separated by {separation:.3} rad at sample {index}; refine the momentum grid")]
    CoarseGrid { separation: f64, index: usize },
    #[error("trajectory passes within {dist:.3e} of the reference axis pole at sample {index}")]
    ReferenceOnPath { dist: f64, index: usize },
    #[error("eigenvalue {eigenvalue:.6} outside the domain of the matrix function")]
    Spectrum { eigenvalue: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn at_k(k: &Option<f64>) -> String {
    match k {
        Some(k) => format!(" at k = {k:.6}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
