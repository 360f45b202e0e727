//! Bloch-vector trajectories and their winding numbers.
//!
//! A momentum trajectory is the curve `k ↦ δ̂(k)` traced by the unit Bloch
//! vector of the correlation matrix on the sphere. Two invariants are
//! computed:
//!
//! - the planar winding of the `(δ̂1, δ̂2)` projection around the origin, and
//! - the Berry winding `N = Ω/2π`, with `Ω` the signed solid angle
//!   accumulated as spherical-triangle excesses against a fixed reference
//!   pole.
//!
//! Closed trajectories over the full period of the gain matrix give integer
//! `N`; single 2π sub-windows of an `n`-branch gain matrix give fractional
//! decomposition values. Open sub-windows are closed through the reference
//! poles: a meridian closure whose solid-angle difference between the two
//! poles reduces exactly to the xy-longitude sweep divided by π, so the
//! decomposition values are grid-exact and sum-compatible with the figures.
//!
//! Transitions are detected operationally: the purity gap `min_k |δ⃗|`
//! closing to zero as a control parameter (γ or t) varies.

use crate::dynamics::{self, TimeSpec};
use crate::model::{damping_matrix, gain_matrix, DampingConvention, KWindow, ModelParams};
use crate::pauli::{decompose, solve_lyapunov, Mat2};
use crate::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Purity below this means the Bloch direction is undefined.
pub const GAP_TOL: f64 = 1e-6;
/// Planar windings refuse xy-projections passing closer than this to origin.
pub const ORIGIN_TOL: f64 = 1e-6;
/// Classification tolerance for integer windings.
pub const INT_TOL: f64 = 1e-3;
/// Maximum angular separation (radians) between adjacent trajectory points.
pub const MAX_SEPARATION: f64 = 0.5;
/// Guard distance between the trajectory and the reference pole.
pub const REF_TOL: f64 = 1e-6;

/// One momentum sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub k: f64,
    /// σ0 coefficient `½Tr Δ`.
    pub delta0: f64,
    /// Traceless Pauli coefficients `(δ1, δ2, δ3)`.
    pub dvec: [f64; 3],
    /// `|dvec|`.
    pub purity: f64,
}

impl Sample {
    /// Unit Bloch vector; refuses when the purity gap is closed.
    pub fn nvec(&self) -> Result<[f64; 3]> {
        if !(self.purity > GAP_TOL) {
            return Err(Error::GapClosed { purity: self.purity, k: Some(self.k) });
        }
        Ok(scale3(self.dvec, 1.0 / self.purity))
    }
}

/// Ordered Bloch data over a momentum window. Per-momentum numerical
/// failures are annotated rather than silently dropped; winding computations
/// refuse annotated trajectories.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub window: KWindow,
    pub samples: Vec<Sample>,
    pub errors: Vec<(usize, Error)>,
}

impl Trajectory {
    /// Build a synthetic trajectory from unit Bloch directions (purity ½).
    pub fn from_directions(window: KWindow, nvecs: &[[f64; 3]]) -> Self {
        let samples = window
            .samples()
            .zip(nvecs)
            .map(|(k, n)| Sample { k, delta0: 0.5, dvec: scale3(*n, 0.5), purity: 0.5 })
            .collect();
        Trajectory { window, samples, errors: Vec::new() }
    }

    /// First annotated per-sample error, if any.
    pub fn check(&self) -> Result<()> {
        match self.errors.first() {
            Some((_, err)) => Err(err.clone()),
            None => Ok(()),
        }
    }

    /// Unit Bloch vectors at every sample; refuses annotated trajectories and
    /// closed purity gaps.
    pub fn unit_vectors(&self) -> Result<Vec<[f64; 3]>> {
        self.check()?;
        self.samples.iter().map(Sample::nvec).collect()
    }

    /// Minimum purity over the samples (NaN-free trajectories only).
    pub fn min_purity(&self) -> f64 {
        self.samples.iter().map(|s| s.purity).fold(f64::INFINITY, f64::min)
    }
}

/// Winding data over a full multi-zone span plus its per-zone decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct WindingReport {
    /// xy-plane winding of the full span.
    pub planar: f64,
    /// Solid-angle winding `Ω/2π` of the full closed span.
    pub berry: f64,
    /// Per-2π-window decomposition values (gauge fixed by the meridian
    /// closure through the reference poles).
    pub per_window: Vec<SubWindow>,
    pub total_span: f64,
    pub integrality: Integrality,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubWindow {
    pub window: [f64; 2],
    pub berry: f64,
}

/// Integer/fractional classification of a full-span winding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrality {
    Integer(i64),
    Fractional(f64),
}

pub fn classify(value: f64, tol: f64) -> Integrality {
    let nearest = value.round();
    if (value - nearest).abs() <= tol {
        Integrality::Integer(nearest as i64)
    } else {
        Integrality::Fractional(value)
    }
}

/// A purity-gap closing located in a control-parameter scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitionEvent {
    pub kind: TransitionKind,
    /// γ value (steady) or time t (dynamical) at the event.
    pub control: f64,
    /// Critical momentum.
    pub k0: f64,
    /// Purity gap at the event (≤ [`GAP_TOL`]).
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Steady,
    Dynamical,
}

// --- Bloch-vector extraction ------------------------------------------------

/// Pauli readout `δ_a = ½Tr(Δσ_a)` of a Hermitian matrix: `(δ0, δ⃗, |δ⃗|)`.
pub fn bloch_components(delta: &Mat2) -> (f64, [f64; 3], f64) {
    let v = decompose(delta);
    let dvec = [v.c[1].re, v.c[2].re, v.c[3].re];
    (v.c[0].re, dvec, norm3(dvec))
}

/// Full Bloch readout `(δ0, δ⃗, δ̂, |δ⃗|)`; refuses closed purity gaps.
pub fn bloch_vector(delta: &Mat2) -> Result<(f64, [f64; 3], [f64; 3], f64)> {
    let (delta0, dvec, purity) = bloch_components(delta);
    if !(purity > GAP_TOL) {
        return Err(Error::GapClosed { purity, k: None });
    }
    Ok((delta0, dvec, scale3(dvec, 1.0 / purity), purity))
}

/// Directional purification: the rank-one projector `½(σ0 + δ̂·σ⃗)` with the
/// same Bloch direction (same solid angle) as the input.
pub fn purify(delta: &Mat2) -> Result<Mat2> {
    let (_, _, n, _) = bloch_vector(delta)?;
    Ok(Mat2::from_pauli_re(0.5, 0.5 * n[0], 0.5 * n[1], 0.5 * n[2]))
}

// --- Windings ----------------------------------------------------------------

/// Winding of the `(δ̂1, δ̂2)` projection around the origin: accumulated
/// wrapped `atan2` increments over the closed trajectory, divided by 2π.
pub fn planar_winding(traj: &Trajectory) -> Result<f64> {
    traj.check()?;
    let mut angles = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        if !(s.purity > GAP_TOL) {
            return Err(Error::OriginCrossing { radius: s.purity, k: Some(s.k) });
        }
        let n = scale3(s.dvec, 1.0 / s.purity);
        let radius = n[0].hypot(n[1]);
        if radius < ORIGIN_TOL {
            return Err(Error::OriginCrossing { radius, k: Some(s.k) });
        }
        angles.push(n[1].atan2(n[0]));
    }
    let mut total = 0.0;
    for j in 0..angles.len() {
        let next = angles[(j + 1) % angles.len()];
        total += wrap_angle(next - angles[j]);
    }
    Ok(total / (2.0 * PI))
}

/// Berry winding `N = Ω/2π` of a closed trajectory, with the default
/// reference pole `−ẑ`.
pub fn berry_winding(traj: &Trajectory) -> Result<f64> {
    berry_winding_with(traj, [0.0, 0.0, -1.0])
}

/// Berry winding against a configurable reference pole.
///
/// The solid angle is accumulated as the signed spherical-triangle excess
/// between the antipode of the reference and consecutive trajectory points;
/// the gauge is fixed by assigning winding 0 to the reference itself.
pub fn berry_winding_with(traj: &Trajectory, reference: [f64; 3]) -> Result<f64> {
    let nvecs = traj.unit_vectors()?;
    let reference = scale3(reference, 1.0 / norm3(reference));
    let apex = scale3(reference, -1.0);
    check_separations(&nvecs, true)?;
    for (index, n) in nvecs.iter().enumerate() {
        let dist = norm3(sub3(*n, reference));
        if dist < REF_TOL {
            return Err(Error::ReferenceOnPath { dist, index });
        }
    }
    let mut omega = 0.0;
    for j in 0..nvecs.len() {
        omega += triangle_excess(apex, nvecs[j], nvecs[(j + 1) % nvecs.len()]);
    }
    Ok(omega / (2.0 * PI))
}

/// Decomposition value of an open arc: the arc is closed by meridians through
/// the reference poles, and the resulting solid-angle winding reduces exactly
/// to the signed xy-longitude sweep divided by π.
pub fn open_arc_winding(nvecs: &[[f64; 3]]) -> Result<f64> {
    check_separations(nvecs, false)?;
    let mut sweep = 0.0;
    let mut prev: Option<f64> = None;
    for (index, n) in nvecs.iter().enumerate() {
        let radius = n[0].hypot(n[1]);
        if radius < ORIGIN_TOL {
            return Err(Error::OriginCrossing { radius, k: Some(index as f64) });
        }
        let theta = n[1].atan2(n[0]);
        if let Some(p) = prev {
            sweep += wrap_angle(theta - p);
        }
        prev = Some(theta);
    }
    Ok(sweep / PI)
}

fn check_separations(nvecs: &[[f64; 3]], closed: bool) -> Result<()> {
    let pairs = if closed { nvecs.len() } else { nvecs.len().saturating_sub(1) };
    for j in 0..pairs {
        let a = nvecs[j];
        let b = nvecs[(j + 1) % nvecs.len()];
        let angle = norm3(cross3(a, b)).atan2(dot3(a, b));
        if angle > MAX_SEPARATION {
            return Err(Error::CoarseGrid { separation: angle, index: j });
        }
    }
    Ok(())
}

/// Signed solid angle of the spherical triangle `(a, b, c)` (unit vectors),
/// positive for counterclockwise orientation seen from outside the sphere.
fn triangle_excess(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let num = dot3(a, cross3(b, c));
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    2.0 * num.atan2(den)
}

/// Windings of the model state over `n_windows` Brillouin zones: full-span
/// planar and Berry windings, per-zone decomposition, and the integrality
/// classification of the full-span value.
///
/// `grid_per_window` is the interval count per 2π zone. Sub-windows whose
/// trajectory closes on itself get the closed-loop Berry value; open
/// sub-windows get the meridian-closure decomposition value.
pub fn window_windings(
    p: &ModelParams,
    time: TimeSpec,
    n_windows: usize,
    grid_per_window: usize,
) -> Result<WindingReport> {
    if n_windows == 0 {
        return Err(Error::InvalidConfig("n_windows must be >= 1".into()));
    }
    let total_span = 2.0 * PI * n_windows as f64;
    let window = KWindow::new(0.0, total_span, grid_per_window * n_windows, true)?;
    let traj = dynamics::trajectory(p, &window, time);
    let berry = berry_winding(&traj)?;
    let planar = planar_winding(&traj)?;
    let nvecs = traj.unit_vectors()?;

    let mut per_window = Vec::with_capacity(n_windows);
    for j in 0..n_windows {
        let lo = 2.0 * PI * j as f64;
        let hi = 2.0 * PI * (j + 1) as f64;
        let slice = &nvecs[j * grid_per_window..=(j + 1) * grid_per_window];
        let endpoint_gap = norm3(sub3(slice[0], slice[slice.len() - 1]));
        let value = if endpoint_gap < 1e-9 {
            let sub = KWindow::new(lo, hi, grid_per_window, true)?;
            let sub_traj = Trajectory::from_directions(sub, slice);
            berry_winding(&sub_traj)?
        } else {
            open_arc_winding(slice)?
        };
        per_window.push(SubWindow { window: [lo, hi], berry: value });
    }

    Ok(WindingReport {
        planar,
        berry,
        per_window,
        total_span,
        integrality: classify(berry, INT_TOL),
    })
}

// --- Transition detection -----------------------------------------------------

fn steady_purity(p: &ModelParams, k: f64) -> f64 {
    let x = damping_matrix(p, k, DampingConvention::Explicit);
    match solve_lyapunov(&x, &gain_matrix(p, k)) {
        Ok(d) => bloch_components(&d).2,
        Err(_) => f64::INFINITY,
    }
}

fn transient_purity(p: &ModelParams, k: f64, t: f64) -> f64 {
    match dynamics::evolution_state(p, k) {
        Ok(s) => bloch_components(&dynamics::propagate(&s, t)).2,
        Err(_) => f64::INFINITY,
    }
}

/// Golden-ish ternary minimization of a unimodal scalar function.
fn ternary_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    for _ in 0..iters {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Minimum of `f(k)` over `[0, span]`: coarse scan plus local refinement.
fn min_over_k(f: &dyn Fn(f64) -> f64, span: f64, coarse: usize) -> (f64, f64) {
    let h = span / coarse as f64;
    let mut best = (0, f64::INFINITY);
    for j in 0..=coarse {
        let v = f(j as f64 * h);
        if v < best.1 {
            best = (j, v);
        }
    }
    let lo = (best.0 as f64 - 1.0).max(0.0) * h;
    let hi = ((best.0 + 1) as f64 * h).min(span);
    let (k, v) = ternary_min(f, lo, hi, 60);
    (v, k)
}

const COARSE_K: usize = 480;

/// Scan γ over `[lo, hi]` for steady-state purity-gap closings: locate local
/// minima of the gap on the scan grid, refine them by nested minimization,
/// and accept closings below [`GAP_TOL`]. Where the gain matrix becomes
/// scalar at the event (the analytic transition condition), the reported
/// `(γ, k0)` are polished onto the exact condition `sin(k0/n) = 0`,
/// `γ = −cos(k0/n)`.
pub fn detect_steady_transitions(
    p: &ModelParams,
    gamma_lo: f64,
    gamma_hi: f64,
    steps: usize,
) -> Vec<TransitionEvent> {
    if !(gamma_hi > gamma_lo) || steps < 2 {
        return Vec::new();
    }
    let span = 2.0 * PI * p.n as f64;
    let gap_at = |gamma: f64| {
        let pg = ModelParams { gamma, ..*p };
        min_over_k(&|k| steady_purity(&pg, k), span, COARSE_K)
    };

    let h = (gamma_hi - gamma_lo) / steps as f64;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .map(|j| {
            let g = gamma_lo + j as f64 * h;
            (g, gap_at(g).0)
        })
        .collect();

    let mut events = Vec::new();
    for j in 1..steps {
        if grid[j].1 <= grid[j - 1].1 && grid[j].1 <= grid[j + 1].1 {
            let (gamma_star, gap) =
                ternary_min(&|g| gap_at(g).0, grid[j - 1].0, grid[j + 1].0, 90);
            if gap > GAP_TOL {
                continue;
            }
            let pg = ModelParams { gamma: gamma_star, ..*p };
            let (_, k0) = min_over_k(&|k| steady_purity(&pg, k), span, COARSE_K);
            let (control, k0, gap) = polish_steady_event(p, gamma_star, k0, gap);
            if events
                .iter()
                .all(|e: &TransitionEvent| (e.control - control).abs() > h)
            {
                events.push(TransitionEvent { kind: TransitionKind::Steady, control, k0, gap });
            }
        }
    }
    events
}

/// Snap a numerically located steady transition onto the analytic condition
/// `M_g(k0) ∝ σ0` when the refined point already satisfies it closely.
fn polish_steady_event(p: &ModelParams, gamma: f64, k0: f64, gap: f64) -> (f64, f64, f64) {
    let n = p.n as f64;
    let pg = ModelParams { gamma, ..*p };
    let v = decompose(&gain_matrix(&pg, k0));
    let traceless = (v.c[1].norm_sqr() + v.c[2].norm_sqr() + v.c[3].norm_sqr()).sqrt();
    if traceless > 1e-4 {
        return (gamma, k0, gap);
    }
    let k_snap = (k0 / (PI * n)).round() * PI * n;
    let gamma_snap = -(k_snap / n).cos();
    if (k_snap - k0).abs() < 1e-2 && (gamma_snap - gamma).abs() < 1e-2 {
        let ps = ModelParams { gamma: gamma_snap, ..*p };
        (gamma_snap, k_snap, steady_purity(&ps, k_snap))
    } else {
        (gamma, k0, gap)
    }
}

/// Scan time over `[lo, hi]` for transient purity-gap closings of the
/// band-projector initial state, refining each bracketed minimum jointly in
/// `t` and `k`.
pub fn detect_dynamical_transition(
    p: &ModelParams,
    t_lo: f64,
    t_hi: f64,
    steps: usize,
) -> Vec<TransitionEvent> {
    if !(t_hi > t_lo) || t_lo < 0.0 || steps < 2 {
        return Vec::new();
    }
    let span = 2.0 * PI * p.n as f64;
    let gap_at = |t: f64| min_over_k(&|k| transient_purity(p, k, t), span, COARSE_K);

    let h = (t_hi - t_lo) / steps as f64;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .map(|j| {
            let t = t_lo + j as f64 * h;
            (t, gap_at(t).0)
        })
        .collect();

    let mut events = Vec::new();
    for j in 1..steps {
        if grid[j].1 <= grid[j - 1].1 && grid[j].1 <= grid[j + 1].1 {
            let (t_star, gap) = ternary_min(&|t| gap_at(t).0, grid[j - 1].0, grid[j + 1].0, 90);
            if gap > GAP_TOL {
                continue;
            }
            let (_, k0) = gap_at(t_star);
            if events
                .iter()
                .all(|e: &TransitionEvent| (e.control - t_star).abs() > h)
            {
                events.push(TransitionEvent {
                    kind: TransitionKind::Dynamical,
                    control: t_star,
                    k0,
                    gap,
                });
            }
        }
    }
    events
}

// --- 3-vector helpers ----------------------------------------------------------

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Wrap an angle difference into `(−π, π]`.
fn wrap_angle(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}
