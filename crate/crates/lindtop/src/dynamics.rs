//! Steady states and transient evolution of the correlation matrix.
//!
//! Per momentum the flow `dΔ/dt = XΔ + ΔX† + 2M_g` has the closed-form
//! solution `Δ(t) = e^{Xt} Δ̃(0) e^{X†t} + Δ_s` with `Δ̃(0) = Δ(0) − Δ_s` and
//! `Δ_s` the Lyapunov fixed point. The closed form is authoritative; a
//! fixed-step RK4 integrator is kept solely as a cross-validation oracle.

use crate::model::{
    damping_matrix, gain_matrix, initial_correlation, DampingConvention, KWindow, ModelParams,
};
use crate::pauli::{expm2, solve_lyapunov, Mat2};
use crate::topology::{bloch_components, Sample, Trajectory};
use crate::{Error, Result};

/// Which state of the flow a trajectory samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSpec {
    /// The Lyapunov fixed point `Δ_s`.
    Steady,
    /// The transient `Δ(t)` from the band-projector initial state.
    At(f64),
}

/// Everything needed to evaluate `Δ(t, k)` at arbitrary `t` for one momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionState {
    pub k: f64,
    /// Damping matrix `X(k)`.
    pub x: Mat2,
    /// Initial correlation matrix `Δ(0, k)`.
    pub delta0: Mat2,
    /// Steady state `Δ_s(k)`.
    pub steady: Mat2,
    /// Deviation `Δ̃(0, k) = Δ(0, k) − Δ_s(k)`.
    pub deviation: Mat2,
}

/// Steady state `Δ_s` solving `XΔ_s + Δ_sX† + 2M_g = 0`; Hermitian.
pub fn steady_state(x: &Mat2, mg: &Mat2) -> Result<Mat2> {
    solve_lyapunov(x, mg)
}

/// Assemble the per-momentum evolution data for the model at `k`.
pub fn evolution_state(p: &ModelParams, k: f64) -> Result<EvolutionState> {
    let x = damping_matrix(p, k, DampingConvention::Explicit);
    let mg = gain_matrix(p, k);
    let steady = steady_state(&x, &mg)?;
    let delta0 = initial_correlation(p, k)?;
    Ok(EvolutionState { k, x, delta0, steady, deviation: delta0.sub(&steady) })
}

/// Closed-form `Δ(t) = e^{Xt} Δ̃(0) e^{X†t} + Δ_s` for `t ≥ 0`.
pub fn propagate(state: &EvolutionState, t: f64) -> Mat2 {
    let ext = expm2(&state.x.scale_re(t));
    ext.mul(&state.deviation).mul(&ext.adjoint()).add(&state.steady)
}

/// Fixed-step fourth-order Runge–Kutta integration of
/// `dΔ/dt = XΔ + ΔX† + 2M_g` — the independent oracle for [`propagate`].
///
/// Refuses steps coarser than `0.1/‖X‖` so the oracle stays trustworthy.
pub fn integrate_ode(delta0: &Mat2, x: &Mat2, mg: &Mat2, t_end: f64, dt: f64) -> Result<Mat2> {
    if !(dt > 0.0) || t_end < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "integration needs dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}"
        )));
    }
    let limit = 0.1 / x.norm().max(1e-300);
    if dt > limit {
        return Err(Error::StepSize { dt, limit });
    }

    let rhs = |d: &Mat2| x.mul(d).add(&d.mul(&x.adjoint())).add(&mg.scale_re(2.0));
    let mut delta = *delta0;
    let mut t = 0.0;
    while t < t_end {
        let h = dt.min(t_end - t);
        let k1 = rhs(&delta);
        let k2 = rhs(&delta.add(&k1.scale_re(h * 0.5)));
        let k3 = rhs(&delta.add(&k2.scale_re(h * 0.5)));
        let k4 = rhs(&delta.add(&k3.scale_re(h)));
        let incr = k1
            .add(&k2.scale_re(2.0))
            .add(&k3.scale_re(2.0))
            .add(&k4)
            .scale_re(h / 6.0);
        delta = delta.add(&incr);
        t += h;
    }
    Ok(delta)
}

/// Sample the model over a momentum window at one time (or at the steady
/// state), recording Bloch data per momentum in ascending `k` order.
///
/// Per-momentum failures (exceptional points, unstable `X`) annotate the
/// sample instead of aborting; winding computations downstream refuse
/// trajectories carrying annotations.
pub fn trajectory(p: &ModelParams, w: &KWindow, time: TimeSpec) -> Trajectory {
    let mut samples = Vec::with_capacity(w.count + 1);
    let mut errors = Vec::new();
    for (index, k) in w.samples().enumerate() {
        match sample_at(p, k, time) {
            Ok(delta) => {
                let (delta0, dvec, purity) = bloch_components(&delta);
                samples.push(Sample { k, delta0, dvec, purity });
            }
            Err(err) => {
                errors.push((index, err));
                samples.push(Sample {
                    k,
                    delta0: f64::NAN,
                    dvec: [f64::NAN; 3],
                    purity: f64::NAN,
                });
            }
        }
    }
    Trajectory { window: *w, samples, errors }
}

fn sample_at(p: &ModelParams, k: f64, time: TimeSpec) -> Result<Mat2> {
    match time {
        TimeSpec::Steady => {
            let x = damping_matrix(p, k, DampingConvention::Explicit);
            steady_state(&x, &gain_matrix(p, k))
        }
        TimeSpec::At(t) => {
            let state = evolution_state(p, k)?;
            Ok(propagate(&state, t))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::decompose;
    use num_complex::Complex64 as C;
    use std::f64::consts::PI;

    fn fig_params(gamma: f64) -> ModelParams {
        ModelParams { gamma, ..ModelParams::default() }
    }

    /// Adaptive Simpson quadrature of a matrix-valued integrand.
    fn simpson(f: &dyn Fn(f64) -> Mat2, a: f64, b: f64, tol: f64, depth: u32) -> Mat2 {
        let m = 0.5 * (a + b);
        let whole = f(a).add(&f(m).scale_re(4.0)).add(&f(b)).scale_re((b - a) / 6.0);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = f(a).add(&f(lm).scale_re(4.0)).add(&f(m)).scale_re((m - a) / 6.0);
        let right = f(m).add(&f(rm).scale_re(4.0)).add(&f(b)).scale_re((b - m) / 6.0);
        let refined = left.add(&right);
        if depth == 0 || refined.sub(&whole).norm() < 15.0 * tol {
            refined
        } else {
            simpson(f, a, m, tol * 0.5, depth - 1).add(&simpson(f, m, b, tol * 0.5, depth - 1))
        }
    }

    #[test]
    fn steady_state_critical_point_is_completely_mixed() {
        let x = Mat2::sigma_x().scale(C::new(0.0, 3.0)).sub(&Mat2::identity());
        let d = steady_state(&x, &Mat2::identity()).unwrap();
        assert!(d.sub(&Mat2::identity()).norm() < 1e-13);
    }

    #[test]
    fn steady_state_residual_small() {
        let p = fig_params(0.5);
        for k in [0.3, 1.0, 2.4, 5.0, 8.8] {
            let x = damping_matrix(&p, k, DampingConvention::Explicit);
            let mg = gain_matrix(&p, k);
            let d = steady_state(&x, &mg).unwrap();
            let resid = x.mul(&d).add(&d.mul(&x.adjoint())).add(&mg.scale_re(2.0));
            assert!(resid.norm() < 1e-12);
            assert!(d.herm_defect() < 1e-12);
        }
    }

    #[test]
    fn steady_state_matches_quadrature() {
        // Δ_s = 2 ∫₀^∞ e^{Xt} M_g e^{X†t} dt, truncated at T = 30 (decay e^{-2ΓT}).
        let p = fig_params(0.5);
        let k = 1.0;
        let x = damping_matrix(&p, k, DampingConvention::Explicit);
        let mg = gain_matrix(&p, k);
        let d = steady_state(&x, &mg).unwrap();
        let integrand = |t: f64| {
            let e = expm2(&x.scale_re(t));
            e.mul(&mg).mul(&e.adjoint())
        };
        let quad = simpson(&integrand, 0.0, 30.0, 1e-10, 24).scale_re(2.0);
        assert!(d.sub(&quad).norm() < 1e-6);
    }

    #[test]
    fn propagate_at_zero_returns_initial_state() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 0.7).unwrap();
        assert!(propagate(&s, 0.0).sub(&s.delta0).norm() < 1e-13);
    }

    #[test]
    fn propagate_converges_to_steady() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 1.9).unwrap();
        let t = 50.0 / p.gamma_total();
        assert!(propagate(&s, t).sub(&s.steady).norm() < 1e-10);
    }

    #[test]
    fn propagate_matches_rk4() {
        let p = fig_params(1.2);
        for k in [0.4, 2.0, 4.8] {
            let s = evolution_state(&p, k).unwrap();
            let mg = gain_matrix(&p, k);
            for t in [0.1, 0.2] {
                let closed = propagate(&s, t);
                let rk4 = integrate_ode(&s.delta0, &s.x, &mg, t, 1e-4).unwrap();
                assert!(closed.sub(&rk4).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn rk4_scalar_decay() {
        // M_g = 0, X = −σ0 → dΔ/dt = −2Δ, Δ(1) = e^{−2}σ0.
        let x = Mat2::identity().scale_re(-1.0);
        let d = integrate_ode(&Mat2::identity(), &x, &Mat2::zero(), 1.0, 1e-3).unwrap();
        let want = Mat2::identity().scale_re((-2.0f64).exp());
        assert!(d.sub(&want).norm() < 1e-8);
    }

    #[test]
    fn rk4_step_guard() {
        let x = Mat2::identity().scale_re(-10.0);
        let got = integrate_ode(&Mat2::identity(), &x, &Mat2::zero(), 1.0, 0.05);
        assert!(matches!(got, Err(Error::StepSize { .. })));
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 1.3).unwrap();
        let mg = gain_matrix(&p, 1.3);
        let exact = propagate(&s, 0.5);
        let err = |dt: f64| {
            integrate_ode(&s.delta0, &s.x, &mg, 0.5, dt)
                .unwrap()
                .sub(&exact)
                .norm()
        };
        let (coarse, fine) = (err(0.01), err(0.005));
        assert!(coarse / fine > 8.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn semigroup_property() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 2.2).unwrap();
        let mid = propagate(&s, 0.07);
        let rebased = EvolutionState { deviation: mid.sub(&s.steady), ..s };
        let two_step = propagate(&rebased, 0.11);
        let one_step = propagate(&s, 0.18);
        assert!(two_step.sub(&one_step).norm() < 1e-10);
    }

    #[test]
    fn hermiticity_along_evolution() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 3.1).unwrap();
        for t in [0.0, 0.05, 0.1, 0.2, 1.0, 5.0] {
            assert!(propagate(&s, t).herm_defect() < 1e-10);
        }
    }

    #[test]
    fn inversion_symmetry_propagates() {
        // σx Δ(t, k) σx = Δ(t, −k) for the symmetric model inputs.
        let p = fig_params(1.2);
        let sx = Mat2::sigma_x();
        for k in [0.5, 1.7, 4.0] {
            let plus = evolution_state(&p, k).unwrap();
            let minus = evolution_state(&p, -k).unwrap();
            for t in [0.0, 0.1, 0.2, 2.0] {
                let mapped = sx.mul(&propagate(&plus, t)).mul(&sx);
                assert!(mapped.sub(&propagate(&minus, t)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn steady_state_independent_of_initial_state() {
        let p = fig_params(0.5);
        let s = evolution_state(&p, 1.1).unwrap();
        let other = Mat2::from_pauli_re(0.5, 0.0, 0.0, 0.4);
        let rebased = EvolutionState {
            delta0: other,
            deviation: other.sub(&s.steady),
            ..s
        };
        let t = 30.0 / p.gamma_total();
        assert!(propagate(&s, t).sub(&propagate(&rebased, t)).norm() < 1e-8);
    }

    #[test]
    fn initial_trajectory_is_pure() {
        let p = fig_params(1.2);
        let w = KWindow::new(0.0, 6.0 * PI, 300, true).unwrap();
        let traj = trajectory(&p, &w, TimeSpec::At(0.0));
        assert!(traj.errors.is_empty());
        for s in &traj.samples {
            assert!((s.purity / s.delta0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn steady_trajectory_closes_over_three_zones() {
        let p = fig_params(1.2);
        let w = KWindow::new(0.0, 6.0 * PI, 3000, true).unwrap();
        let traj = trajectory(&p, &w, TimeSpec::Steady);
        assert!(traj.errors.is_empty());
        let first = traj.samples.first().unwrap();
        let last = traj.samples.last().unwrap();
        let gap: f64 = first
            .dvec
            .iter()
            .zip(last.dvec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(gap < 1e-8);
    }

    #[test]
    fn purity_gap_closes_at_critical_gamma() {
        let p = fig_params(1.0);
        let w = KWindow::new(0.0, 6.0 * PI, 3000, true).unwrap();
        let traj = trajectory(&p, &w, TimeSpec::Steady);
        let min = traj
            .samples
            .iter()
            .map(|s| s.purity)
            .fold(f64::INFINITY, f64::min);
        assert!(min < 1e-6, "min purity {min}");
        // Locate the closing at k = 3π.
        let worst = traj
            .samples
            .iter()
            .min_by(|a, b| a.purity.total_cmp(&b.purity))
            .unwrap();
        assert!((worst.k - 3.0 * PI).abs() < 0.02);
    }

    #[test]
    fn trajectory_annotates_unstable_samples() {
        // Γ = 0 makes X marginally stable; every sample should be annotated.
        let p = ModelParams { gamma1: 0.0, gamma2: 0.0, ..fig_params(0.5) };
        let w = KWindow::new(0.0, 2.0 * PI, 8, true).unwrap();
        let traj = trajectory(&p, &w, TimeSpec::Steady);
        assert_eq!(traj.errors.len(), traj.samples.len());
        assert!(matches!(traj.errors[0].1, Error::Unstable { .. }));
    }

    #[test]
    fn deviation_decays_at_liouvillian_rate() {
        let p = fig_params(1.2);
        let s = evolution_state(&p, 0.9).unwrap();
        let gamma = p.gamma_total();
        for t in [0.5, 1.0, 2.0, 4.0] {
            let dist = propagate(&s, t).sub(&s.steady).norm();
            // ‖e^{Xt}‖ = e^{−Γt} exactly for X = i·Hermitian − Γσ0.
            let bound = (-2.0 * gamma * t).exp() * s.deviation.norm() * 1.0001;
            assert!(dist <= bound, "t={t}: {dist} > {bound}");
        }
    }

    #[test]
    fn composed_convention_still_relaxes() {
        // The −2Γ convention decays twice as fast but reaches a steady state
        // with the same Bloch direction structure at k where sin terms vanish.
        let p = fig_params(0.5);
        let x = damping_matrix(&p, 0.0, DampingConvention::Composed);
        let mg = gain_matrix(&p, 0.0);
        let d = steady_state(&x, &mg).unwrap();
        let v = decompose(&d);
        assert!(v.is_real(1e-12));
    }
}
