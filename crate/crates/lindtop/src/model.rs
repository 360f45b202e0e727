//! The dissipative SSH chain in momentum space.
//!
//! Per momentum `k` the model is fully specified by four 2×2 matrices: the
//! Bloch Hamiltonian `h(k)`, the gain and loss matrices `M_g(k)`, `M_l(k)`
//! built from single-particle jump operators, and the damping matrix `X(k)`.
//! The gain/loss matrices carry a fractional momentum `k/n`, so they are
//! periodic only over `n` Brillouin zones while `h` and `X` stay 2π-periodic.
//! All constructors respect the inversion symmetry `σx O(k) σx = O(−k)`.

use crate::pauli::{eig2, Mat2};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

/// Model variant: the fractional-momentum gain chain or its long-range
/// hopping simulation (`H′(k)` with `t3 cos 3k` and a 2π-periodic gain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Longrange,
}

/// All physical parameters of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Intra-cell hopping.
    pub t1: f64,
    /// Inter-cell hopping (standard variant).
    pub t2: f64,
    /// Long-range hopping (longrange variant).
    pub t3: f64,
    /// Dissipation rates; `Γ = γ1 + γ2` is the Liouvillian gap.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Gain-matrix control parameter.
    pub gamma: f64,
    /// Auxiliary jump rate; the closed-form gain matrix contains no `γ0`
    /// term, so it defaults to zero.
    pub gamma0: f64,
    /// Branch count: `M_g/l` are `2πn`-periodic in `k`.
    pub n: u32,
    pub variant: Variant,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            t1: 1.0,
            t2: 2.0,
            t3: 2.0,
            gamma1: 0.5,
            gamma2: 0.5,
            gamma: 0.5,
            gamma0: 0.0,
            n: 3,
            variant: Variant::Standard,
        }
    }
}

impl ModelParams {
    /// Liouvillian gap `Γ = γ1 + γ2`.
    pub fn gamma_total(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_total() > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma1 + gamma2 must be positive, got {}",
                self.gamma_total()
            )));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 || self.gamma0 < 0.0 {
            return Err(Error::InvalidConfig(
                "dissipation rates gamma1, gamma2, gamma0 must be non-negative".into(),
            ));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("branch count n must be >= 1".into()));
        }
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("t3", self.t3),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Uniform momentum grid over `[k_lo, k_hi]` with `count` intervals; the
/// sample list includes both endpoints (`count + 1` points). For `closed`
/// windows `k_hi` is identified with `k_lo`, so the first and last samples
/// describe the same physical momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KWindow {
    pub k_lo: f64,
    pub k_hi: f64,
    pub count: usize,
    pub closed: bool,
}

impl KWindow {
    pub fn new(k_lo: f64, k_hi: f64, count: usize, closed: bool) -> Result<Self> {
        if !(k_hi > k_lo) {
            return Err(Error::InvalidConfig(format!(
                "momentum window must have k_hi > k_lo, got [{k_lo}, {k_hi}]"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidConfig(format!(
                "momentum grid needs at least 2 intervals, got {count}"
            )));
        }
        Ok(KWindow { k_lo, k_hi, count, closed })
    }

    pub fn spacing(&self) -> f64 {
        (self.k_hi - self.k_lo) / self.count as f64
    }

    /// Grid samples, endpoints included.
    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..=self.count).map(move |j| {
            if j == self.count {
                self.k_hi
            } else {
                self.k_lo + j as f64 * h
            }
        })
    }
}

/// Bloch Hamiltonian `h(k)`: `(t1 + t2 cos k)σx + t2 sin k σy` for the
/// standard variant, `(t1 + t3 cos 3k)σx + t3 sin 3k σy` for longrange.
pub fn bloch_hamiltonian(p: &ModelParams, k: f64) -> Mat2 {
    match p.variant {
        Variant::Standard => {
            Mat2::from_pauli_re(0.0, p.t1 + p.t2 * k.cos(), p.t2 * k.sin(), 0.0)
        }
        Variant::Longrange => {
            let q = 3.0 * k;
            Mat2::from_pauli_re(0.0, p.t1 + p.t3 * q.cos(), p.t3 * q.sin(), 0.0)
        }
    }
}

/// Gain matrix `M_g(k)`.
pub fn gain_matrix(p: &ModelParams, k: f64) -> Mat2 {
    match p.variant {
        Variant::Standard => {
            let q = k / p.n as f64;
            Mat2::from_pauli_re(p.gamma_total(), p.gamma + q.cos(), q.sin(), 0.0)
        }
        Variant::Longrange => Mat2::from_pauli_re(1.0, k.cos(), k.sin(), 0.0),
    }
}

/// Loss matrix `M_l(k)`, mirroring the gain with the traceless part negated.
pub fn loss_matrix(p: &ModelParams, k: f64) -> Mat2 {
    match p.variant {
        Variant::Standard => {
            let q = k / p.n as f64;
            Mat2::from_pauli_re(p.gamma_total(), -(p.gamma + q.cos()), -q.sin(), 0.0)
        }
        Variant::Longrange => Mat2::from_pauli_re(1.0, -k.cos(), -k.sin(), 0.0),
    }
}

/// Which construction of the damping matrix to use.
///
/// `Explicit` is the closed form `X = i h(k) − Γ σ0` used for every figure
/// reproduction. `Composed` assembles `X = i hᵀ − M_lᵀ − M_g` from the model
/// pieces under the momentum-space transpose `Mᵀ(k) ≡ [M(−k)]ᵀ`; its traceless
/// part agrees with `Explicit` but its σ0 coefficient is `−2Γ` instead of
/// `−Γ`, a normalization mismatch inherited from the master-equation
/// convention, kept observable rather than silently patched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingConvention {
    Explicit,
    Composed,
}

/// Damping matrix `X(k)`.
pub fn damping_matrix(p: &ModelParams, k: f64, convention: DampingConvention) -> Mat2 {
    match convention {
        DampingConvention::Explicit => bloch_hamiltonian(p, k)
            .scale(C::new(0.0, 1.0))
            .sub(&Mat2::identity().scale_re(p.gamma_total())),
        DampingConvention::Composed => {
            let h_t = bloch_hamiltonian(p, -k).transpose();
            let ml_t = loss_matrix(p, -k).transpose();
            let mg = gain_matrix(p, k);
            h_t.scale(C::new(0.0, 1.0)).sub(&ml_t).sub(&mg)
        }
    }
}

/// Gain or loss character of a jump operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Gain,
    Loss,
}

/// A single-particle jump operator in momentum space, reduced to its
/// coefficient 2-vector over the (A, B) sublattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub kind: JumpKind,
    pub coeff: [C; 2],
}

/// The model's momentum-space jump operators. The `γ0` operators are emitted
/// only when `γ0 > 0`.
pub fn jump_operators(p: &ModelParams, k: f64) -> Vec<JumpOperator> {
    let one = C::new(1.0, 0.0);
    let phase = C::from_polar(1.0, -k / p.n as f64);
    let (s1, s2, s0) = (p.gamma1.sqrt(), p.gamma2.sqrt(), p.gamma0.sqrt());
    let mut ops = vec![
        JumpOperator { kind: JumpKind::Gain, coeff: [one * s1, one * s1] },
        JumpOperator { kind: JumpKind::Gain, coeff: [phase * s2, one * s2] },
        JumpOperator { kind: JumpKind::Loss, coeff: [one * s1, -one * s1] },
        JumpOperator { kind: JumpKind::Loss, coeff: [phase * s2, -one * s2] },
    ];
    if p.gamma0 > 0.0 {
        ops.push(JumpOperator { kind: JumpKind::Gain, coeff: [one * s0, C::new(0.0, 0.0)] });
        ops.push(JumpOperator { kind: JumpKind::Gain, coeff: [C::new(0.0, 0.0), one * s0] });
        ops.push(JumpOperator { kind: JumpKind::Loss, coeff: [one * s0, C::new(0.0, s0)] });
    }
    ops
}

/// Gram-matrix accumulation `(M)_{ij} = Σ_μ D*_{μi} D_{μj}` over the jump
/// coefficient vectors, split by kind. Both outputs are Hermitian PSD.
pub fn m_from_jumps(jumps: &[JumpOperator]) -> (Mat2, Mat2) {
    let mut mg = Mat2::zero();
    let mut ml = Mat2::zero();
    for op in jumps {
        let d = op.coeff;
        let gram = Mat2::new(
            d[0].conj() * d[0],
            d[0].conj() * d[1],
            d[1].conj() * d[0],
            d[1].conj() * d[1],
        );
        match op.kind {
            JumpKind::Gain => mg = mg.add(&gram),
            JumpKind::Loss => ml = ml.add(&gram),
        }
    }
    (mg, ml)
}

/// Initial correlation matrix: the rank-one projector onto the eigenvector of
/// `X(k)` whose eigenvalue has the larger imaginary part (the upper band of
/// the Hermitian generator). Deterministic through the eig2 ordering and
/// phase convention.
pub fn initial_correlation(p: &ModelParams, k: f64) -> Result<Mat2> {
    let x = damping_matrix(p, k, DampingConvention::Explicit);
    let pairs = eig2(&x)?;
    let u = if pairs[1].value.im > pairs[0].value.im {
        pairs[1].vector
    } else {
        pairs[0].vector
    };
    Ok(Mat2::new(
        u[0] * u[0].conj(),
        u[0] * u[1].conj(),
        u[1] * u[0].conj(),
        u[1] * u[1].conj(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::decompose;
    use std::f64::consts::PI;

    fn params(gamma: f64) -> ModelParams {
        ModelParams { gamma, ..ModelParams::default() }
    }

    #[test]
    fn bloch_standard_at_high_symmetry_points() {
        let p = params(0.5);
        let h0 = bloch_hamiltonian(&p, 0.0);
        assert!(h0.sub(&Mat2::sigma_x().scale_re(3.0)).norm() < 1e-14);
        let hpi = bloch_hamiltonian(&p, PI);
        assert!(hpi.add(&Mat2::sigma_x()).norm() < 1e-14);
    }

    #[test]
    fn bloch_longrange() {
        let p = ModelParams { variant: Variant::Longrange, t3: 2.0, ..params(0.0) };
        let h = bloch_hamiltonian(&p, PI / 3.0);
        assert!(h.add(&Mat2::sigma_x()).norm() < 1e-13);
    }

    #[test]
    fn gain_matrix_fig3_values() {
        let p = params(1.2);
        let mg = gain_matrix(&p, 0.0);
        let want = Mat2::from_pauli_re(1.0, 2.2, 0.0, 0.0);
        assert!(mg.sub(&want).norm() < 1e-14);
    }

    #[test]
    fn gain_matrix_critical_point_is_scalar() {
        let p = params(1.0);
        let mg = gain_matrix(&p, 3.0 * PI);
        assert!(mg.sub(&Mat2::identity()).norm() < 1e-13);
    }

    #[test]
    fn gain_plus_loss_is_scalar() {
        let p = params(0.77);
        for k in [0.0, 0.3, 2.0, 5.5, 11.0] {
            let sum = gain_matrix(&p, k).add(&loss_matrix(&p, k));
            assert!(sum.sub(&Mat2::identity().scale_re(2.0 * p.gamma_total())).norm() < 1e-13);
        }
    }

    #[test]
    fn damping_explicit_at_k0() {
        let p = params(0.5);
        let x = damping_matrix(&p, 0.0, DampingConvention::Explicit);
        let want = Mat2::sigma_x()
            .scale(C::new(0.0, 3.0))
            .sub(&Mat2::identity());
        assert!(x.sub(&want).norm() < 1e-14);
    }

    #[test]
    fn damping_eigenvalue_real_parts_are_minus_gamma() {
        let p = params(0.9);
        for k in [0.1, 1.0, 2.7, 4.4] {
            let x = damping_matrix(&p, k, DampingConvention::Explicit);
            for pair in eig2(&x).unwrap() {
                assert!((pair.value.re + p.gamma_total()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composed_vs_explicit_factor_two() {
        // Traceless anti-Hermitian parts equal; σ0 coefficient −2Γ vs −Γ.
        let p = params(0.5);
        let k = 1.0;
        let explicit = damping_matrix(&p, k, DampingConvention::Explicit);
        let composed = damping_matrix(&p, k, DampingConvention::Composed);
        let ve = decompose(&explicit);
        let vc = decompose(&composed);
        for a in 1..4 {
            assert!((ve.c[a] - vc.c[a]).norm() < 1e-13);
        }
        assert!((ve.c[0] - C::new(-p.gamma_total(), 0.0)).norm() < 1e-13);
        assert!((vc.c[0] - C::new(-2.0 * p.gamma_total(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn jump_operator_coefficients() {
        let p = params(0.5);
        let k = 1.3;
        let ops = jump_operators(&p, k);
        assert_eq!(ops.len(), 4); // γ0 = 0 leaves the four γ1/γ2 operators
        let s = 0.5f64.sqrt();
        assert!((ops[0].coeff[0] - C::new(s, 0.0)).norm() < 1e-14);
        assert!((ops[0].coeff[1] - C::new(s, 0.0)).norm() < 1e-14);
        // L^l_2 = √γ2 (e^{−ik/n}, −1)
        let ll2 = &ops[3];
        assert_eq!(ll2.kind, JumpKind::Loss);
        assert!((ll2.coeff[0] - C::from_polar(s, -k / 3.0)).norm() < 1e-14);
        assert!((ll2.coeff[1] + C::new(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn jump_operators_with_gamma0() {
        let p = ModelParams { gamma0: 0.3, ..params(0.5) };
        assert_eq!(jump_operators(&p, 0.7).len(), 7);
    }

    #[test]
    fn gram_of_single_gain_operator() {
        let op = JumpOperator {
            kind: JumpKind::Gain,
            coeff: [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        };
        let (mg, ml) = m_from_jumps(&[op]);
        assert!(mg.sub(&Mat2::new(C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0))).norm() < 1e-15);
        assert!(ml.norm() < 1e-15);
    }

    #[test]
    fn gram_of_model_gain_list_at_k0() {
        // Hand evaluation at k=0, γ1=γ2=0.5: D1=(√.5,√.5), D2=(√.5,√.5) give
        // all entries 1. This does not equal the closed-form M_g; the two
        // constructions are kept separate on purpose.
        let p = params(0.5);
        let ops = jump_operators(&p, 0.0);
        let (mg, _) = m_from_jumps(&ops);
        for entry in mg.e {
            assert!((entry - C::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn gram_outputs_hermitian_psd() {
        let p = ModelParams { gamma0: 0.2, ..params(0.8) };
        for k in [0.0, 1.1, 3.9] {
            let (mg, ml) = m_from_jumps(&jump_operators(&p, k));
            for m in [mg, ml] {
                assert!(m.herm_defect() < 1e-13);
                let pairs = eig2(&m).unwrap();
                assert!(pairs[0].value.re > -1e-13);
            }
        }
    }

    #[test]
    fn initial_state_at_k0_is_upper_band_projector() {
        let p = params(1.2);
        let d0 = initial_correlation(&p, 0.0).unwrap();
        // h(0) = 3σx; the eigenvalue of X with larger imaginary part maps to
        // the upper band of h, Bloch vector (+1, 0, 0).
        let want = Mat2::identity().add(&Mat2::sigma_x()).scale_re(0.5);
        assert!(d0.sub(&want).norm() < 1e-13);
    }

    #[test]
    fn initial_state_is_projector() {
        let p = params(0.5);
        for k in [0.2, 1.7, 4.1, 9.0] {
            let d0 = initial_correlation(&p, k).unwrap();
            assert!(d0.mul(&d0).sub(&d0).norm() < 1e-12);
            assert!((d0.trace() - C::new(1.0, 0.0)).norm() < 1e-13);
            assert!(d0.herm_defect() < 1e-13);
        }
    }

    #[test]
    fn inversion_symmetry_of_constructors() {
        let p = params(0.9);
        let sx = Mat2::sigma_x();
        for k in [0.15, 1.2, 2.9, 7.3] {
            let ops: [(Mat2, Mat2); 4] = [
                (bloch_hamiltonian(&p, k), bloch_hamiltonian(&p, -k)),
                (gain_matrix(&p, k), gain_matrix(&p, -k)),
                (loss_matrix(&p, k), loss_matrix(&p, -k)),
                (
                    damping_matrix(&p, k, DampingConvention::Explicit),
                    damping_matrix(&p, -k, DampingConvention::Explicit),
                ),
            ];
            for (at_k, at_minus_k) in ops {
                let defect = sx.mul(&at_k).mul(&sx).sub(&at_minus_k).norm();
                assert!(defect < 1e-12);
            }
        }
    }

    #[test]
    fn periodicity() {
        let p = params(0.6);
        let k = 0.83;
        let tau = 2.0 * PI;
        let x = |k| damping_matrix(&p, k, DampingConvention::Explicit);
        assert!(x(k + tau).sub(&x(k)).norm() < 1e-12);
        assert!(gain_matrix(&p, k + 3.0 * tau).sub(&gain_matrix(&p, k)).norm() < 1e-12);
        // n = 3 gain is not 2π-periodic.
        assert!(gain_matrix(&p, k + tau).sub(&gain_matrix(&p, k)).norm() > 0.1);
    }

    #[test]
    fn kwindow_validation() {
        assert!(KWindow::new(0.0, 1.0, 10, false).is_ok());
        assert!(KWindow::new(1.0, 0.0, 10, false).is_err());
        assert!(KWindow::new(0.0, 1.0, 1, false).is_err());
        let w = KWindow::new(0.0, 6.0 * PI, 3000, true).unwrap();
        let ks: Vec<f64> = w.samples().collect();
        assert_eq!(ks.len(), 3001);
        assert_eq!(ks[0], 0.0);
        assert_eq!(*ks.last().unwrap(), 6.0 * PI);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams { gamma1: 0.0, gamma2: 0.0, ..ModelParams::default() };
        assert!(bad.validate().is_err());
        let bad = ModelParams { n: 0, ..ModelParams::default() };
        assert!(bad.validate().is_err());
    }
}
