//! Exact 2×2 complex-matrix machinery.
//!
//! Everything downstream works with 2×2 matrices per momentum, so this module
//! provides closed forms instead of general dense linear algebra: Pauli
//! decomposition, the matrix exponential in the Pauli basis, eigenpairs with a
//! deterministic phase convention, and the continuous Lyapunov solver
//! `X Δ + Δ X† + 2C = 0` via a 4×4 linear system.

use crate::{Error, Result};
use num_complex::Complex64 as C;

/// Stability tolerance for the Lyapunov precondition: every eigenvalue of `X`
/// must satisfy `Re λ < -EPS_STAB`.
pub const EPS_STAB: f64 = 1e-9;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Dense 2×2 complex matrix, row-major `[a11, a12, a21, a22]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub e: [C; 4],
}

/// Coefficients of a 2×2 matrix in the `{σ0, σx, σy, σz}` basis with the
/// convention `c_a = ½ Tr(M σ_a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliVector {
    pub c: [C; 4],
}

impl Mat2 {
    pub const fn new(a11: C, a12: C, a21: C, a22: C) -> Self {
        Mat2 { e: [a11, a12, a21, a22] }
    }

    pub fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn sigma_x() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma_y() -> Self {
        Mat2::new(ZERO, -I, I, ZERO)
    }

    pub fn sigma_z() -> Self {
        Mat2::new(ONE, ZERO, ZERO, -ONE)
    }

    /// `c0 σ0 + c1 σx + c2 σy + c3 σz` with real coefficients.
    pub fn from_pauli_re(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        PauliVector {
            c: [C::new(c0, 0.0), C::new(c1, 0.0), C::new(c2, 0.0), C::new(c3, 0.0)],
        }
        .reconstruct()
    }

    pub fn trace(&self) -> C {
        self.e[0] + self.e[3]
    }

    pub fn det(&self) -> C {
        self.e[0] * self.e[3] - self.e[1] * self.e[2]
    }

    pub fn adjoint(&self) -> Self {
        Mat2::new(self.e[0].conj(), self.e[2].conj(), self.e[1].conj(), self.e[3].conj())
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.e[0], self.e[2], self.e[1], self.e[3])
    }

    pub fn scale(&self, s: C) -> Self {
        Mat2::new(self.e[0] * s, self.e[1] * s, self.e[2] * s, self.e[3] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C::new(s, 0.0))
    }

    pub fn add(&self, o: &Mat2) -> Self {
        Mat2::new(self.e[0] + o.e[0], self.e[1] + o.e[1], self.e[2] + o.e[2], self.e[3] + o.e[3])
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        Mat2::new(self.e[0] - o.e[0], self.e[1] - o.e[1], self.e[2] - o.e[2], self.e[3] - o.e[3])
    }

    pub fn mul(&self, o: &Mat2) -> Self {
        Mat2::new(
            self.e[0] * o.e[0] + self.e[1] * o.e[2],
            self.e[0] * o.e[1] + self.e[1] * o.e[3],
            self.e[2] * o.e[0] + self.e[3] * o.e[2],
            self.e[2] * o.e[1] + self.e[3] * o.e[3],
        )
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖M − M†‖`, zero for Hermitian matrices.
    pub fn herm_defect(&self) -> f64 {
        self.sub(&self.adjoint()).norm()
    }

    /// Symmetrize: `(M + M†)/2`.
    pub fn hermitize(&self) -> Self {
        self.add(&self.adjoint()).scale_re(0.5)
    }

    /// Apply `v ↦ M v` to a 2-vector.
    pub fn apply(&self, v: [C; 2]) -> [C; 2] {
        [
            self.e[0] * v[0] + self.e[1] * v[1],
            self.e[2] * v[0] + self.e[3] * v[1],
        ]
    }
}

impl PauliVector {
    /// Sum `Σ_a c_a σ_a`.
    pub fn reconstruct(&self) -> Mat2 {
        let [c0, c1, c2, c3] = self.c;
        Mat2::new(c0 + c3, c1 - I * c2, c1 + I * c2, c0 - c3)
    }

    /// True when all coefficients are real within `tol` (Hermitian source).
    pub fn is_real(&self, tol: f64) -> bool {
        self.c.iter().all(|z| z.im.abs() <= tol)
    }
}

/// Pauli decomposition `c_a = ½ Tr(M σ_a)`.
pub fn decompose(m: &Mat2) -> PauliVector {
    let [a11, a12, a21, a22] = m.e;
    PauliVector {
        c: [
            (a11 + a22) * 0.5,
            (a12 + a21) * 0.5,
            I * (a12 - a21) * 0.5,
            (a11 - a22) * 0.5,
        ],
    }
}

/// Inverse of [`decompose`].
pub fn reconstruct(v: &PauliVector) -> Mat2 {
    v.reconstruct()
}

/// Matrix exponential via the Pauli closed form.
///
/// For `M = c0 σ0 + c⃗·σ⃗` and `r = √(c⃗·c⃗)` (complex; either branch),
/// `e^M = e^{c0} (cosh r · σ0 + sinh(r)/r · c⃗·σ⃗)`. Both `cosh r` and
/// `sinh(r)/r` are even in `r`, so the square-root branch is irrelevant; for
/// `|r| < 1e-6` the series limits are used.
pub fn expm2(m: &Mat2) -> Mat2 {
    let v = decompose(m);
    let [c0, c1, c2, c3] = v.c;
    let r2 = c1 * c1 + c2 * c2 + c3 * c3;
    let r = r2.sqrt();
    let (cosh_r, sinhc_r) = if r.norm() < 1e-6 {
        // cosh r = 1 + r²/2 + r⁴/24; sinh(r)/r = 1 + r²/6 + r⁴/120
        (
            ONE + r2 * 0.5 + r2 * r2 / 24.0,
            ONE + r2 / 6.0 + r2 * r2 / 120.0,
        )
    } else {
        (r.cosh(), r.sinh() / r)
    };
    let scale = c0.exp();
    PauliVector {
        c: [
            scale * cosh_r,
            scale * sinhc_r * c1,
            scale * sinhc_r * c2,
            scale * sinhc_r * c3,
        ],
    }
    .reconstruct()
}

/// One eigenpair: eigenvalue and a unit eigenvector with the first component
/// above `1e-12·‖v‖` made real-positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub value: C,
    pub vector: [C; 2],
}

/// Eigenpairs of a general 2×2 matrix, ordered by ascending real part of the
/// eigenvalue (ties broken by ascending imaginary part).
///
/// Refuses with [`Error::Degenerate`] at exceptional points, where the two
/// eigenvalues coincide but the matrix is not diagonalizable.
pub fn eig2(m: &Mat2) -> Result<[EigenPair; 2]> {
    let mean = m.trace() * 0.5;
    let disc = (mean * mean - m.det()).sqrt();
    let (l1, l2) = (mean - disc, mean + disc);
    let scale = m.norm().max(1.0);
    let tol = 1e-12 * scale;

    if (l1 - l2).norm() <= tol {
        // Coinciding eigenvalues: diagonalizable only if M = λ·σ0.
        let resid = m.sub(&Mat2::identity().scale(mean)).norm();
        if resid <= tol {
            return Ok([
                EigenPair { value: mean, vector: [ONE, ZERO] },
                EigenPair { value: mean, vector: [ZERO, ONE] },
            ]);
        }
        return Err(Error::Degenerate { gap: (l1 - l2).norm() });
    }

    let mut pairs = [
        EigenPair { value: l1, vector: eigvec(m, l1) },
        EigenPair { value: l2, vector: eigvec(m, l2) },
    ];
    let key = |p: &EigenPair| (p.value.re, p.value.im);
    if key(&pairs[1]) < key(&pairs[0]) {
        pairs.swap(0, 1);
    }
    Ok(pairs)
}

fn eigvec(m: &Mat2, lambda: C) -> [C; 2] {
    // Rows of (M − λ) are orthogonal to the eigenvector's conjugate; the two
    // null-space candidates below come from the two rows. Pick the larger.
    let c1 = [m.e[1], lambda - m.e[0]];
    let c2 = [lambda - m.e[3], m.e[2]];
    let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
    let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
    let v = if n1 >= n2 { c1 } else { c2 };
    normalize_phase(v)
}

/// Unit-normalize and rotate the global phase so the first component with
/// magnitude above `1e-12` of the vector norm is real-positive.
pub fn normalize_phase(v: [C; 2]) -> [C; 2] {
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let lead = if v[0].norm() > 1e-12 * norm { v[0] } else { v[1] };
    let phase = lead / C::new(lead.norm(), 0.0);
    let s = phase.conj() / norm;
    [v[0] * s, v[1] * s]
}

/// Solve the continuous Lyapunov equation `X Δ + Δ X† + 2C = 0` for Hermitian
/// `Δ`, given stable `X` (all eigenvalue real parts `< -EPS_STAB`) and
/// Hermitian `C`.
pub fn solve_lyapunov(x: &Mat2, c: &Mat2) -> Result<Mat2> {
    let mean = x.trace() * 0.5;
    let disc = (mean * mean - x.det()).sqrt();
    let max_re = (mean + disc).re.max((mean - disc).re);
    if max_re >= -EPS_STAB {
        return Err(Error::Unstable { max_re, eps: EPS_STAB });
    }

    // Vectorize: Σ_mn A[(i,j),(m,n)] Δ_mn = -2 C_ij with
    // A[(i,j),(m,n)] = X_im δ_jn + δ_im conj(X_jn).
    let mut a = [[ZERO; 4]; 4];
    let mut b = [ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            let row = 2 * i + j;
            b[row] = C::new(-2.0, 0.0) * c.e[2 * i + j];
            for m in 0..2 {
                for n in 0..2 {
                    let col = 2 * m + n;
                    let mut v = ZERO;
                    if j == n {
                        v += x.e[2 * i + m];
                    }
                    if i == m {
                        v += x.e[2 * j + n].conj();
                    }
                    a[row][col] = v;
                }
            }
        }
    }
    let sol = solve4(&mut a, &mut b)?;
    let delta = Mat2::new(sol[0], sol[1], sol[2], sol[3]);
    Ok(delta.hermitize())
}

/// Gaussian elimination with partial pivoting on a 4×4 complex system.
fn solve4(a: &mut [[C; 4]; 4], b: &mut [C; 4]) -> Result<[C; 4]> {
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[pivot][col].norm() <= 1e-14 * scale {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (j, &v) in pivot_row.iter().enumerate().skip(col) {
                a[row][j] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [ZERO; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for j in row + 1..4 {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
