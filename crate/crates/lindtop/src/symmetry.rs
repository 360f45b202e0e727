//! Symmetry and matrix-function audits.
//!
//! Three verification tools: the inversion-symmetry defect
//! `‖σx O(k) σx − O(−k)‖` of any momentum-indexed operator, the modular
//! Hamiltonian `Kᵀ = ln(Δ⁻¹ − σ0)` of a correlation matrix, and the
//! alignment of Bloch directions under matrix functions. Hermitian matrix
//! functions preserve the Bloch axis — `f(Δ)` has traceless part
//! `(f_odd/|δ⃗|)·δ⃗·σ⃗` — but the *sign* of the direction follows the sign
//! of the odd part `f_odd`, which is negative for the (decreasing) modular
//! map. The audits therefore assert parallelism `|cos| = 1` and report the
//! sign instead of asserting unsigned equality.

use crate::model::KWindow;
use crate::pauli::{decompose, Mat2, PauliVector};
use crate::topology::{bloch_vector, GAP_TOL};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use serde::Serialize;

/// Eigenvalues of the modular map's argument must stay this far inside (0,1).
pub const EPS_SPEC: f64 = 1e-12;

/// Worst-case inversion defect of an operator over a momentum grid.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub operator_name: String,
    pub max_defect: f64,
    pub worst_k: f64,
    pub samples: usize,
}

/// Maximum of `‖σx O(k) σx − O(−k)‖` (Frobenius) over the window grid.
pub fn inversion_defect<F: Fn(f64) -> Mat2>(
    sampler: F,
    w: &KWindow,
    operator_name: &str,
) -> SymmetryReport {
    let sx = Mat2::sigma_x();
    let mut max_defect = 0.0;
    let mut worst_k = w.k_lo;
    let mut samples = 0;
    for k in w.samples() {
        let defect = sx.mul(&sampler(k)).mul(&sx).sub(&sampler(-k)).norm();
        if defect > max_defect {
            max_defect = defect;
            worst_k = k;
        }
        samples += 1;
    }
    SymmetryReport { operator_name: operator_name.into(), max_defect, worst_k, samples }
}

/// The fixed catalog of matrix functions used by the alignment audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFunction {
    /// `λ ↦ ln(1/λ − 1)`, defined for `λ ∈ (0, 1)`; decreasing.
    Modular,
    Square,
    Cube,
    Exponential,
}

impl MatrixFunction {
    fn check_domain(&self, lambda: f64) -> Result<()> {
        match self {
            MatrixFunction::Modular => {
                if lambda <= EPS_SPEC || lambda >= 1.0 - EPS_SPEC {
                    Err(Error::Spectrum { eigenvalue: lambda })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, lambda: f64) -> f64 {
        match self {
            MatrixFunction::Modular => (1.0 / lambda - 1.0).ln(),
            MatrixFunction::Square => lambda * lambda,
            MatrixFunction::Cube => lambda * lambda * lambda,
            MatrixFunction::Exponential => lambda.exp(),
        }
    }
}

/// Evaluate `f(Δ)` for Hermitian `Δ` by spectral decomposition in the Pauli
/// basis: eigenvalues `δ0 ± |δ⃗|`, eigenvectors shared with `Δ`.
pub fn apply_matrix_function(delta: &Mat2, f: MatrixFunction) -> Result<Mat2> {
    let v = decompose(delta);
    if !v.is_real(1e-10) {
        return Err(Error::InvalidConfig(
            "matrix function input must be Hermitian".into(),
        ));
    }
    let d0 = v.c[0].re;
    let dvec = [v.c[1].re, v.c[2].re, v.c[3].re];
    let r = (dvec[0] * dvec[0] + dvec[1] * dvec[1] + dvec[2] * dvec[2]).sqrt();
    let (lo, hi) = (d0 - r, d0 + r);
    f.check_domain(lo)?;
    f.check_domain(hi)?;
    let even = 0.5 * (f.eval(hi) + f.eval(lo));
    let odd = 0.5 * (f.eval(hi) - f.eval(lo));
    let scale = if r > 0.0 { odd / r } else { 0.0 };
    Ok(PauliVector {
        c: [
            C::new(even, 0.0),
            C::new(scale * dvec[0], 0.0),
            C::new(scale * dvec[1], 0.0),
            C::new(scale * dvec[2], 0.0),
        ],
    }
    .reconstruct())
}

/// Modular Hamiltonian `K` with `Kᵀ = ln(Δ⁻¹ − σ0)`.
///
/// Refuses when an eigenvalue of `Δ` leaves `(EPS_SPEC, 1 − EPS_SPEC)` —
/// pure states and over-filled states (`δ0 + |δ⃗| ≥ 1`) have no finite `K`.
pub fn modular_hamiltonian(delta: &Mat2) -> Result<Mat2> {
    Ok(apply_matrix_function(delta, MatrixFunction::Modular)?.transpose())
}

/// Signed cosine between the unit Bloch vectors of `Δ` and `f(Δ)`;
/// `±1` whenever both directions are defined.
pub fn matrix_function_cosine(delta: &Mat2, f: MatrixFunction) -> Result<f64> {
    let (_, _, n_in, _) = bloch_vector(delta)?;
    let out = apply_matrix_function(delta, f)?;
    let (_, _, n_out, _) = bloch_vector(&out)?;
    Ok(n_in[0] * n_out[0] + n_in[1] * n_out[1] + n_in[2] * n_out[2])
}

/// `|cos|` between the Bloch directions of `Δ` and `f(Δ)`; expected 1.
pub fn matrix_function_alignment(delta: &Mat2, f: MatrixFunction) -> Result<f64> {
    Ok(matrix_function_cosine(delta, f)?.abs())
}

/// True when the purity gap of `Δ` is open (a direction exists at all).
pub fn direction_defined(delta: &Mat2) -> bool {
    let v = decompose(delta);
    let r = (v.c[1].re.powi(2) + v.c[2].re.powi(2) + v.c[3].re.powi(2)).sqrt();
    r > GAP_TOL
}
