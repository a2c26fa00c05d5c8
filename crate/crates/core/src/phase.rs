//! The Emden-Fowler phase plane for `-M⁻(D²u) = u^p` in the plane.
//!
//! With `X = -r u'/u`, `Z = -r u^p/u'` and `t = ln r`, positive decreasing
//! radial solutions become orbits of an autonomous planar system that is
//! smooth on each side of the concavity line `ℓ = {Z = Λ}`:
//!
//! ```text
//! R⁺ (Z > Λ):  Ẋ = X (X + Z/Λ)              Ż = Z (2 - pX - Z/Λ)
//! R⁻ (Z < Λ):  Ẋ = X (X - (Ñ₋-2) + Z/λ)     Ż = Z (Ñ₋ - pX - Z/λ)
//! ```
//!
//! The two branches agree on `Z = Λ` in the plane because
//! `X - (Ñ₋-2) + Λ/λ = X + 1` there; this identity is re-checked at startup
//! on a deterministic pseudo-random grid before any orbit is launched.
//!
//! `N₀ = (0, 2Λ)`, `A₀ = (Ñ₋-2, 0)` and `O` are saddles, while
//! `M₀ = (α, λ(Ñ₋-2-α))` with `α = 2/(p-1)` turns from source to center to
//! sink as `p` crosses `p_c = (Ñ₋+2)/(Ñ₋-2)`. The regular orbit `Γ_p` leaves
//! `N₀` along its unstable direction; its fate (finite-time blow-up of `X`,
//! capture by `A₀` or `M₀`, or a stabilized return sequence) mirrors the
//! fate of the radial solution.

use crate::error::Error;
use crate::integrator::{
    integrate, Direction, Event, EventAction, IntegrationControls, PiecewiseField, Switch,
    Termination, Trajectory,
};
use crate::params::{DerivedConstants, ProblemParams};
use crate::radial::RadialSolution;
use crate::Result;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Default horizon (in `t = ln r`) for fate decisions.
pub const DEFAULT_HORIZON: f64 = 200.0;
/// Capture-disk radius around `M₀`.
pub const M0_DISK: f64 = 1e-4;
/// Capture-disk radius around `A₀`.
pub const A0_DISK: f64 = 1e-4;
/// Approach-disk radius around `N₀` for backward-orbit classification; wider
/// than the capture disks because transversal error grows backward in time.
pub const N0_DISK: f64 = 1e-3;
/// `Z` must have collapsed below this before a large `X` counts as blow-up.
pub const BLOWUP_Z: f64 = 1e-6;
/// Return amplitudes must agree within this to call a sequence periodic...
pub const PERIODIC_AGREE: f64 = 1e-5;
/// ...and sit above this level, separating limit cycles from slow spirals.
pub const PERIODIC_LEVEL: f64 = 1e-3;

/// A point of the phase plane together with its time `t = ln r`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PhasePoint {
    pub x: f64,
    pub z: f64,
    pub t: f64,
}

/// Names of the stationary points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum PointName {
    N0,
    A0,
    M0,
    O,
}

/// Dynamical type implied by the branch-Jacobian eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum PointKind {
    Saddle,
    Source,
    Sink,
    Center,
}

/// A stationary point with its classification data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPointInfo {
    pub name: PointName,
    pub coords: (f64, f64),
    pub eigenvalues: [Complex64; 2],
    pub kind: PointKind,
}

/// Where an orbit was launched from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitOrigin {
    FromN0,
    BackwardFromA0,
    FromPoint(PhasePoint),
}

/// Fate of the forward regular orbit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind"))]
pub enum OrbitFate {
    /// `X → ∞`, `Z → 0` in finite time `T = ln R_p`.
    BallBlowUp { time: f64 },
    /// ω-limit `A₀`.
    FastDecay,
    /// ω-limit `M₀`.
    SlowDecay,
    /// Stabilized section returns: ω-limit is a periodic orbit.
    PseudoSlow { period: f64, amplitude: f64 },
    Undetermined { reason: String },
}

impl OrbitFate {
    /// Whether the orbit corresponds to an entire solution (no blow-up).
    pub fn is_entire(&self) -> bool {
        matches!(self, OrbitFate::FastDecay | OrbitFate::SlowDecay | OrbitFate::PseudoSlow { .. })
    }
}

/// α-limit of the backward orbit from `A₀`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind"))]
pub enum AlphaLimit {
    M0,
    Periodic { period: f64, amplitude: f64 },
    N0,
    BlowsUpBackward { time: f64 },
    Undetermined { reason: String },
}

/// The forward regular orbit `Γ_p` with its line crossings and fate.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub params: ProblemParams,
    pub origin: OrbitOrigin,
    pub trajectory: Trajectory<2>,
    /// Crossings of the concavity line `ℓ`, as `(t, X)` pairs.
    pub ell_crossings: Vec<(f64, f64)>,
    pub fate: OrbitFate,
}

/// The backward orbit seeded on the stable direction of `A₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOrbit {
    pub params: ProblemParams,
    pub trajectory: Trajectory<2>,
    pub ell_crossings: Vec<(f64, f64)>,
    pub alpha_limit: AlphaLimit,
}

/// Branch right-hand side: branch 0 is `R⁺` (`Z > Λ`), branch 1 is `R⁻`.
pub fn branch_rhs(params: &ProblemParams, branch: usize, x: f64, z: f64) -> (f64, f64) {
    let (lo, hi, p) = (params.lambda, params.big_lambda, params.p);
    let a = n_minus(params) - 2.0;
    if branch == 0 {
        (x * (x + z / hi), z * (2.0 - p * x - z / hi))
    } else {
        (x * (x - a + z / lo), z * (a + 2.0 - p * x - z / lo))
    }
}

fn n_minus(params: &ProblemParams) -> f64 {
    params.big_lambda / params.lambda * (f64::from(params.dimension) - 1.0) + 1.0
}

/// The phase-plane vector field `(Ẋ, Ż)` at `(X, Z)` in the first quadrant.
pub fn field(params: &ProblemParams, x: f64, z: f64) -> Result<(f64, f64)> {
    params.require_planar_minus()?;
    if x < 0.0 || z < 0.0 {
        return Err(Error::invalid("the phase plane lives in the first quadrant"));
    }
    Ok(branch_rhs(params, usize::from(z < params.big_lambda), x, z))
}

/// Analytic Jacobian of one branch at `(X, Z)`.
pub fn branch_jacobian(params: &ProblemParams, branch: usize, x: f64, z: f64) -> [[f64; 2]; 2] {
    let (lo, hi, p) = (params.lambda, params.big_lambda, params.p);
    let a = n_minus(params) - 2.0;
    if branch == 0 {
        [[2.0 * x + z / hi, x / hi], [-p * z, 2.0 - p * x - 2.0 * z / hi]]
    } else {
        [[2.0 * x - a + z / lo, x / lo], [-p * z, a + 2.0 - p * x - 2.0 * z / lo]]
    }
}

fn eigenvalues_2x2(j: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(0.5 * (tr + s), 0.0), Complex64::new(0.5 * (tr - s), 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(0.5 * tr, 0.5 * s), Complex64::new(0.5 * tr, -0.5 * s)]
    }
}

fn kind_of(eigs: [Complex64; 2]) -> PointKind {
    let scale = 1.0 + eigs[0].norm().max(eigs[1].norm());
    let re_zero = |c: &Complex64| c.re.abs() <= 1e-12 * scale;
    if eigs.iter().all(|c| c.im == 0.0) && eigs[0].re * eigs[1].re < 0.0 {
        PointKind::Saddle
    } else if eigs.iter().all(re_zero) {
        PointKind::Center
    } else if eigs.iter().all(|c| c.re > 0.0) {
        PointKind::Source
    } else {
        PointKind::Sink
    }
}

/// All stationary points with their branch-Jacobian eigenvalues and type.
///
/// Covers the regime `p > Ñ₋/(Ñ₋-2)`; `M₀` is omitted if its `Z`-coordinate
/// is not positive. `N₀` is classified on the `R⁺` branch; `A₀`, `M₀` and
/// `O` on `R⁻`.
pub fn stationary_points(params: &ProblemParams) -> Result<Vec<StationaryPointInfo>> {
    params.require_planar_minus()?;
    let d = params.derive();
    let serrin = d.serrin_minus.ok_or(Error::DegenerateMinus)?;
    if params.p <= serrin {
        return Err(Error::invalid(format!(
            "stationary-point classification needs p > {serrin}, got {}",
            params.p
        )));
    }
    let a = d.n_tilde_minus - 2.0;
    let classify = |name, branch, x: f64, z: f64| {
        let eigs = eigenvalues_2x2(branch_jacobian(params, branch, x, z));
        StationaryPointInfo { name, coords: (x, z), eigenvalues: eigs, kind: kind_of(eigs) }
    };

    let mut out = Vec::with_capacity(4);
    out.push(classify(PointName::N0, 0, 0.0, 2.0 * params.big_lambda));
    out.push(classify(PointName::A0, 1, a, 0.0));
    let zm = params.lambda * (a - d.alpha);
    if zm > 0.0 {
        out.push(classify(PointName::M0, 1, d.alpha, zm));
    }
    out.push(classify(PointName::O, 1, 0.0, 0.0));
    Ok(out)
}

/// Unit unstable eigendirection at `N₀`, oriented into the open quadrant
/// (`v_X > 0`, `v_Z < 0`).
pub fn n0_unstable_direction(params: &ProblemParams) -> [f64; 2] {
    // R⁺ Jacobian at N₀ is [[2, 0], [-2pΛ, -2]]; eigenvalue 2 carries the
    // eigenvector (2, -pΛ).
    normalize([2.0, -params.p * params.big_lambda])
}

/// Unit stable eigendirection at `A₀`, oriented into the open quadrant
/// (`v_X < 0`, `v_Z > 0`).
pub fn a0_stable_direction(params: &ProblemParams) -> [f64; 2] {
    let d = params.derive();
    let a = d.n_tilde_minus - 2.0;
    let mu2 = d.n_tilde_minus - params.p * a;
    // R⁻ Jacobian at A₀ is [[a, a/λ], [0, μ₂]]; eigenvalue μ₂ carries the
    // eigenvector (a/λ, -(a - μ₂)), flipped so the Z-component is positive.
    normalize([-a / params.lambda, a - mu2])
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Checks that the two branch formulas agree on the concavity line, on a
/// deterministic pseudo-random set of 10³ abscissas. Run before any orbit.
pub fn verify_branch_continuity(params: &ProblemParams) -> Result<()> {
    params.require_planar_minus()?;
    let d = params.derive();
    let a = d.n_tilde_minus - 2.0;
    let z = params.big_lambda;
    let x_hi = 2.0 * (a + 2.0);
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    for _ in 0..1000 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let x = (state >> 11) as f64 / (1u64 << 53) as f64 * x_hi;
        let (fp, gp) = branch_rhs(params, 0, x, z);
        let (fm, gm) = branch_rhs(params, 1, x, z);
        let scale = 1.0 + fp.abs().max(gp.abs());
        if (fp - fm).abs() > 1e-12 * scale || (gp - gm).abs() > 1e-12 * scale {
            return Err(Error::ShapeViolation(format!(
                "branch mismatch on the concavity line at X = {x}: ({fp}, {gp}) vs ({fm}, {gm})"
            )));
        }
    }
    Ok(())
}

struct PhaseSetup {
    d: DerivedConstants,
    a: f64,
    x_blowup: f64,
}

fn setup(params: &ProblemParams) -> Result<PhaseSetup> {
    verify_branch_continuity(params)?;
    let d = params.derive();
    let a = d.n_tilde_minus - 2.0;
    Ok(PhaseSetup { d, a, x_blowup: 10.0 * a + 100.0 })
}

fn phase_field(params: &ProblemParams) -> PiecewiseField<2> {
    let ps = *params;
    let big = params.big_lambda;
    PiecewiseField::new(
        Box::new(move |_, y: &[f64; 2]| usize::from(y[1] < big)),
        vec![
            Box::new(move |_, y: &[f64; 2]| {
                let (f, g) = branch_rhs(&ps, 0, y[0], y[1]);
                [f, g]
            }),
            Box::new(move |_, y: &[f64; 2]| {
                let (f, g) = branch_rhs(&ps, 1, y[0], y[1]);
                [f, g]
            }),
        ],
        vec![Switch { label: "ell", f: Box::new(move |_, y: &[f64; 2]| y[1] - big) }],
    )
}

fn dist_event(
    label: &'static str,
    center: (f64, f64),
    radius: f64,
    action: EventAction,
) -> Event<2> {
    Event::new(label, Direction::Down, action, move |_, y: &[f64; 2]| {
        let (dx, dz) = (y[0] - center.0, y[1] - center.1);
        (dx * dx + dz * dz).sqrt() - radius
    })
}

/// Seed offset used when launching from a stationary point.
pub fn default_delta(coords: (f64, f64)) -> f64 {
    1e-7 * (1.0 + (coords.0 * coords.0 + coords.1 * coords.1).sqrt())
}

/// Upward crossings (`Ż > 0`, i.e. `X < 1/p` on the line) of `Z = Λ`.
fn upward_hits(traj: &Trajectory<2>, p: f64) -> Vec<(f64, f64)> {
    traj.hits("ell").filter(|h| h.y[0] < 1.0 / p).map(|h| (h.t, h.y[0])).collect()
}

/// Looks for three successive return amplitudes `|X_k - α|` that agree within
/// [`PERIODIC_AGREE`] at a level above [`PERIODIC_LEVEL`].
fn stabilized_returns(upward: &[(f64, f64)], alpha: f64) -> Option<(f64, f64)> {
    let n = upward.len();
    if n < 3 {
        return None;
    }
    let amp = |i: usize| (upward[i].1 - alpha).abs();
    let (a0, a1, a2) = (amp(n - 3), amp(n - 2), amp(n - 1));
    let spread = a0.max(a1).max(a2) - a0.min(a1).min(a2);
    if spread < PERIODIC_AGREE && a0.min(a1).min(a2) > PERIODIC_LEVEL {
        Some(((upward[n - 1].0 - upward[n - 2].0).abs(), a2))
    } else {
        None
    }
}

/// Launches the regular orbit `Γ_p` from `N₀ + δ v` and classifies its fate.
///
/// The orbit clock is anchored to the radial variable of the `γ = 1` shot:
/// near the origin `X ≈ e^{2t}/(2Λ)`, so the seed gets
/// `t₀ = ln(2Λ X_seed)/2` and blow-up then happens at `T = ln R_p` up to
/// `O(δ)`. The reported blow-up time corrects for the cut-off at the `X`
/// threshold with the exact `Z = 0` tail formula
/// `T = t_stop - ln(1 - a/X_stop)/a`.
pub fn regular_orbit(
    params: &ProblemParams,
    delta: Option<f64>,
    controls: &IntegrationControls,
) -> Result<Orbit> {
    let st = setup(params)?;
    let n0 = (0.0, 2.0 * params.big_lambda);
    let delta = delta.unwrap_or_else(|| default_delta(n0));
    let v = n0_unstable_direction(params);
    let seed = [n0.0 + delta * v[0], n0.1 + delta * v[1]];
    let t0 = 0.5 * (2.0 * params.big_lambda * seed[0]).ln();

    let horizon = if controls.max_time.is_finite() { controls.max_time } else { DEFAULT_HORIZON };
    let mut ctl = *controls;
    ctl.max_time = f64::INFINITY;
    ctl.blowup_norm = ctl.blowup_norm.min(1e9);

    let field = phase_field(params);
    let mut events = vec![
        Event::new("x_ntilde", Direction::Up, EventAction::Record, {
            let a = st.a;
            move |_, y: &[f64; 2]| y[0] - a
        }),
        Event::new("blowup", Direction::Up, EventAction::Stop, {
            let xb = st.x_blowup;
            move |_, y: &[f64; 2]| y[0] - xb
        }),
        dist_event("a0_disk", (st.a, 0.0), A0_DISK, EventAction::Stop),
    ];
    let zm = params.lambda * (st.a - st.d.alpha);
    if zm > 0.0 {
        events.push(dist_event("m0_disk", (st.d.alpha, zm), M0_DISK, EventAction::Stop));
    }

    let traj = integrate(&field, seed, (t0, t0 + horizon), &events, &ctl)?;
    let upward = upward_hits(&traj, params.p);
    let fate = classify_forward(&traj, &st, &upward);
    let ell_crossings = traj.hits("ell").map(|h| (h.t, h.y[0])).collect();
    Ok(Orbit {
        params: *params,
        origin: OrbitOrigin::FromN0,
        trajectory: traj,
        ell_crossings,
        fate,
    })
}

fn classify_forward(traj: &Trajectory<2>, st: &PhaseSetup, upward: &[(f64, f64)]) -> OrbitFate {
    let end = traj.last();
    match traj.termination {
        Termination::EventStop("blowup") | Termination::BlowUp(_) => {
            if end.y[1] < BLOWUP_Z {
                let t_corr = -(1.0 - st.a / end.y[0]).ln() / st.a;
                OrbitFate::BallBlowUp { time: end.t + t_corr }
            } else {
                OrbitFate::Undetermined {
                    reason: format!(
                        "X passed the threshold while Z = {} had not collapsed",
                        end.y[1]
                    ),
                }
            }
        }
        Termination::EventStop("a0_disk") => OrbitFate::FastDecay,
        Termination::EventStop("m0_disk") => {
            // Guard against a tight cycle: if returns were seen, they must
            // not be expanding on the way in.
            let n = upward.len();
            if n >= 3 {
                let d_last = (upward[n - 1].1 - upward[n - 2].1).abs();
                let d_first = (upward[1].1 - upward[0].1).abs();
                if d_last > d_first && d_last > PERIODIC_LEVEL {
                    return OrbitFate::Undetermined {
                        reason: String::from("entered the M0 disk with expanding returns"),
                    };
                }
            }
            OrbitFate::SlowDecay
        }
        Termination::HorizonReached => match stabilized_returns(upward, st.d.alpha) {
            Some((period, amplitude)) => OrbitFate::PseudoSlow { period, amplitude },
            None => OrbitFate::Undetermined {
                reason: String::from("horizon reached without meeting any fate criterion"),
            },
        },
        Termination::EventStop(other) => {
            OrbitFate::Undetermined { reason: format!("unexpected stop event {other}") }
        }
        Termination::StepCollapse(t) => {
            OrbitFate::Undetermined { reason: format!("step collapse at t = {t}") }
        }
    }
}

/// Integrates backward from `A₀ + δ w` along the stable direction and
/// classifies the α-limit.
pub fn backward_orbit_from_a0(
    params: &ProblemParams,
    delta: Option<f64>,
    controls: &IntegrationControls,
) -> Result<BackwardOrbit> {
    let st = setup(params)?;
    let a0 = (st.a, 0.0);
    let delta = delta.unwrap_or_else(|| default_delta(a0));
    let w = a0_stable_direction(params);
    let seed = [a0.0 + delta * w[0], a0.1 + delta * w[1]];

    let horizon = if controls.max_time.is_finite() { controls.max_time } else { DEFAULT_HORIZON };
    let mut ctl = *controls;
    ctl.max_time = f64::INFINITY;
    ctl.blowup_norm = ctl.blowup_norm.min(1e9);

    let field = phase_field(params);
    let n0 = (0.0, 2.0 * params.big_lambda);
    let mut events = vec![dist_event("n0_disk", n0, N0_DISK, EventAction::Stop)];
    let zm = params.lambda * (st.a - st.d.alpha);
    if zm > 0.0 {
        events.push(dist_event("m0_disk", (st.d.alpha, zm), M0_DISK, EventAction::Stop));
    }

    let traj = integrate(&field, seed, (0.0, -horizon), &events, &ctl)?;
    let upward = upward_hits(&traj, params.p);
    let alpha_limit = match traj.termination {
        Termination::EventStop("m0_disk") => AlphaLimit::M0,
        Termination::EventStop("n0_disk") => AlphaLimit::N0,
        Termination::BlowUp(t) => AlphaLimit::BlowsUpBackward { time: t },
        Termination::HorizonReached => match stabilized_returns(&upward, st.d.alpha) {
            Some((period, amplitude)) => AlphaLimit::Periodic { period, amplitude },
            None => AlphaLimit::Undetermined {
                reason: String::from("backward horizon reached without an alpha-limit"),
            },
        },
        Termination::EventStop(other) => {
            AlphaLimit::Undetermined { reason: format!("unexpected stop event {other}") }
        }
        Termination::StepCollapse(t) => {
            AlphaLimit::Undetermined { reason: format!("step collapse at t = {t}") }
        }
    };
    let ell_crossings = traj.hits("ell").map(|h| (h.t, h.y[0])).collect();
    Ok(BackwardOrbit { params: *params, trajectory: traj, ell_crossings, alpha_limit })
}

/// Verdict of a Poincaré return sequence on `{Z = Λ, Ż > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum SectionVerdict {
    /// Differences decay geometrically: the orbit spirals into `M₀`.
    SpiralIn,
    /// Returns stabilize at positive amplitude: a periodic orbit.
    Periodic { period: f64, amplitude: f64 },
    /// Fewer than 3 hits, or no clear pattern.
    Inconclusive,
}

/// Return sequence of an orbit on the upward section of the concavity line.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionReturns {
    /// `X`-coordinates of successive upward crossings.
    pub xs: Vec<f64>,
    pub times: Vec<f64>,
    /// `|X_{k+1} - X_k|`.
    pub diffs: Vec<f64>,
    pub verdict: SectionVerdict,
}

/// Extracts the upward return sequence of an orbit and classifies it.
pub fn poincare_section(orbit: &Orbit) -> SectionReturns {
    section_returns(&orbit.trajectory, &orbit.params)
}

pub(crate) fn section_returns(traj: &Trajectory<2>, params: &ProblemParams) -> SectionReturns {
    let upward = upward_hits(traj, params.p);
    let xs: Vec<f64> = upward.iter().map(|u| u.1).collect();
    let times: Vec<f64> = upward.iter().map(|u| u.0).collect();
    let diffs: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let alpha = params.derive().alpha;
    let verdict = if xs.len() < 3 {
        SectionVerdict::Inconclusive
    } else if let Some((period, amplitude)) = stabilized_returns(&upward, alpha) {
        SectionVerdict::Periodic { period, amplitude }
    } else if diffs.len() >= 2 && diffs.windows(2).all(|w| w[1] < w[0]) {
        SectionVerdict::SpiralIn
    } else {
        SectionVerdict::Inconclusive
    };
    SectionReturns { xs, times, diffs, verdict }
}

impl Orbit {
    /// One full return loop (between the last two upward section hits), as a
    /// closed polygon suitable for [`dulac_integral`].
    pub fn loop_polygon(&self) -> Option<Vec<(f64, f64)>> {
        loop_polygon_of(&self.trajectory, &self.params)
    }
}

impl BackwardOrbit {
    /// One full return loop of the backward trajectory.
    pub fn loop_polygon(&self) -> Option<Vec<(f64, f64)>> {
        loop_polygon_of(&self.trajectory, &self.params)
    }
}

fn loop_polygon_of(traj: &Trajectory<2>, params: &ProblemParams) -> Option<Vec<(f64, f64)>> {
    let upward = upward_hits(traj, params.p);
    if upward.len() < 2 {
        return None;
    }
    let (t1, x1) = upward[upward.len() - 2];
    let (t2, x2) = upward[upward.len() - 1];
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    let lam = params.big_lambda;
    let mut poly = vec![(x1, lam)];
    poly.extend(
        traj.samples.iter().filter(|s| s.t > lo && s.t < hi).map(|s| (s.y[0], s.y[1])),
    );
    poly.push((x2, lam));
    Some(poly)
}

/// Re-integrates the last full return loop of a trajectory with a capped step
/// so the polygon resolves the curve to well below quadrature accuracy.
///
/// Accepted-step samples are too sparse for the area integral: the chord bias
/// of a coarse polygon swamps the Dulac residual of a genuine cycle.
pub fn refined_loop_polygon(
    params: &ProblemParams,
    traj: &Trajectory<2>,
    n: usize,
    controls: &IntegrationControls,
) -> Result<Option<Vec<(f64, f64)>>> {
    let upward = upward_hits(traj, params.p);
    if upward.len() < 2 {
        return Ok(None);
    }
    let (t1, x1) = upward[upward.len() - 2];
    let (t2, _) = upward[upward.len() - 1];
    let mut ctl = *controls;
    ctl.max_step = ((t2 - t1).abs() / n as f64).max(1e-8);
    ctl.max_time = f64::INFINITY;
    let field = phase_field(params);
    let seed = [x1, params.big_lambda];
    let fine = integrate(&field, seed, (t1, t2), &[], &ctl)?;
    Ok(Some(fine.samples.iter().map(|s| (s.y[0], s.y[1])).collect()))
}

/// The two signed halves and the total of the Dulac identity
/// `∬_D ∂_X(φf) + ∂_Z(φg) dX dZ` with `φ = X^α Z^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DulacReport {
    pub i_plus: f64,
    pub i_minus: f64,
    pub total: f64,
}

/// The weighted divergence `Φ = ∂_X(φf) + ∂_Z(φg)`, which collapses to a
/// single sign per region; `α = 2/(p-1)` is the unique exponent for which
/// all `X`- and `Z`-dependent terms cancel (the test suite re-derives this
/// by expanding the divergence numerically on both branches).
pub fn dulac_density(params: &ProblemParams, x: f64, z: f64) -> f64 {
    let d = params.derive();
    let phi = x.powf(d.alpha) * z.powf(d.beta);
    let nt = d.n_tilde_minus;
    if z > params.big_lambda {
        phi * 4.0 / (params.p - 1.0)
    } else {
        -phi * (params.p * (nt - 2.0) - (nt + 2.0)) / (params.p - 1.0)
    }
}

/// Integrates the Dulac density over the region enclosed by a closed
/// polygonal orbit around `M₀`, split along the concavity line.
///
/// For a true periodic orbit the boundary integral of `φ F·n` vanishes
/// identically (the field is tangent), so `total` must be numerically zero;
/// a strict sign certifies that no periodic orbit can bound the region.
pub fn dulac_integral(params: &ProblemParams, polygon: &[(f64, f64)]) -> Result<DulacReport> {
    params.require_planar_minus()?;
    if polygon.len() < 4 {
        return Err(Error::invalid("polygon needs at least 4 vertices"));
    }
    let first = polygon[0];
    let last = polygon[polygon.len() - 1];
    let diam = polygon_diameter(polygon);
    let gap = ((first.0 - last.0).powi(2) + (first.1 - last.1).powi(2)).sqrt();
    if gap > 1e-2 * diam {
        return Err(Error::invalid(format!(
            "polygon is not closed: endpoint gap {gap:.3e} vs diameter {diam:.3e}"
        )));
    }
    let d = params.derive();
    let zm = params.lambda * (d.n_tilde_minus - 2.0 - d.alpha);
    if zm <= 0.0 || !point_in_polygon((d.alpha, zm), polygon) {
        return Err(Error::invalid("polygon must enclose M0"));
    }

    let lam = params.big_lambda;
    let nt = d.n_tilde_minus;
    let above = clip_halfplane(polygon, lam, true);
    let below = clip_halfplane(polygon, lam, false);
    let c_plus = 4.0 / (params.p - 1.0);
    let c_minus = -(params.p * (nt - 2.0) - (nt + 2.0)) / (params.p - 1.0);
    let i_plus = c_plus * power_moment(&above, d.alpha, d.beta);
    let i_minus = c_minus * power_moment(&below, d.alpha, d.beta);
    Ok(DulacReport { i_plus, i_minus, total: i_plus + i_minus })
}

fn polygon_diameter(poly: &[(f64, f64)]) -> f64 {
    let (mut xmin, mut xmax, mut zmin, mut zmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, z) in poly {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        zmin = zmin.min(z);
        zmax = zmax.max(z);
    }
    ((xmax - xmin).powi(2) + (zmax - zmin).powi(2)).sqrt()
}

fn point_in_polygon(pt: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, zi) = poly[i];
        let (xj, zj) = poly[j];
        if (zi > pt.1) != (zj > pt.1) && pt.0 < (xj - xi) * (pt.1 - zi) / (zj - zi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Sutherland-Hodgman clip of a polygon against `Z >= c` (or `Z <= c`).
fn clip_halfplane(poly: &[(f64, f64)], c: f64, keep_above: bool) -> Vec<(f64, f64)> {
    let keep = |p: (f64, f64)| if keep_above { p.1 >= c } else { p.1 <= c };
    let mut out = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let (kc, kp) = (keep(cur), keep(prev));
        if kc != kp {
            let s = (c - prev.1) / (cur.1 - prev.1);
            out.push((prev.0 + s * (cur.0 - prev.0), c));
        }
        if kc {
            out.push(cur);
        }
    }
    out
}

/// `∬ X^α Z^β dX dZ` over a simple polygon, exact in `Z`.
///
/// The integrand has an antiderivative `X^α Z^{β+1}/(β+1)` in `Z`, so by
/// Green's theorem the area integral equals `-∮ X^α Z^{β+1}/(β+1) dX` over
/// the counterclockwise boundary. `Z^{β+1} = Z^α` with `α > 0` is continuous
/// down to `Z = 0`, which matters because return loops hug the axes and a
/// plain 2-D quadrature cannot resolve the `Z^β` layer there.
pub(crate) fn power_moment(poly: &[(f64, f64)], alpha: f64, beta: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = poly.to_vec();
    pts.dedup_by(|a, b| (a.0 - b.0).abs() + (a.1 - b.1).abs() < 1e-300);
    if pts.len() > 1 {
        let (f, l) = (pts[0], pts[pts.len() - 1]);
        if (f.0 - l.0).abs() + (f.1 - l.1).abs() < 1e-300 {
            pts.pop();
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    // 8-point Gauss-Legendre nodes on [0, 1].
    const GL: [(f64, f64); 8] = [
        (0.019_855_071_751_231_84, 0.050_614_268_145_188_13),
        (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
        (0.237_233_795_041_835_5, 0.156_853_322_938_943_62),
        (0.408_282_678_752_175_2, 0.181_341_891_689_180_97),
        (0.591_717_321_247_824_8, 0.181_341_891_689_180_97),
        (0.762_766_204_958_164_5, 0.156_853_322_938_943_62),
        (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
        (0.980_144_928_248_768_2, 0.050_614_268_145_188_13),
    ];
    let bp1 = beta + 1.0;
    let n = pts.len();
    let mut total = 0.0;
    for i in 0..n {
        let (x0, z0) = pts[i];
        let (x1, z1) = pts[(i + 1) % n];
        let dx = x1 - x0;
        if dx == 0.0 {
            continue;
        }
        // Fractional powers have branch points on the axes; keep panels short
        // so the Gauss rule only ever sees a mildly non-smooth stretch.
        let panels = ((dx.abs() / 0.02) as usize + 1).min(512);
        let mut edge = 0.0;
        for k in 0..panels {
            let (s0, s1) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
            for &(s, w) in &GL {
                let sq = s0 + s * (s1 - s0);
                let x = x0 + sq * dx;
                let z = z0 + sq * (z1 - z0);
                edge += w * (s1 - s0) * x.max(0.0).powf(alpha) * z.max(0.0).powf(bp1);
            }
        }
        total -= dx * edge / bp1;
    }
    if signed_area(&pts) < 0.0 {
        total = -total;
    }
    total
}

fn signed_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x1, z1) = poly[i];
        let (x2, z2) = poly[(i + 1) % n];
        s += x1 * z2 - x2 * z1;
    }
    0.5 * s
}

/// Maps a radial shot into the phase plane through the Emden-Fowler change
/// of variables. Samples with `u <= 0` or `u' = 0` are skipped.
pub fn phase_image(sol: &RadialSolution) -> Vec<PhasePoint> {
    sol.samples
        .iter()
        .filter(|s| s.u > 0.0 && s.du != 0.0)
        .map(|s| PhasePoint {
            x: -s.r * s.du / s.u,
            z: -s.r * s.u.powf(sol.params.p) / s.du,
            t: s.r.ln(),
        })
        .collect()
}

/// Symmetric Hausdorff distance between two polylines.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &p in a {
        let mut best = f64::MAX;
        if b.len() == 1 {
            best = dist2(p, b[0]).sqrt();
        }
        for w in b.windows(2) {
            best = best.min(dist_point_segment(p, w[0], w[1]));
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vz) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vz * vz;
    let s = if len2 > 0.0 { ((p.0 - a.0) * vx + (p.1 - a.1) * vz) / len2 } else { 0.0 };
    let s = s.clamp(0.0, 1.0);
    dist2(p, (a.0 + s * vx, a.1 + s * vz)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Operator;

    fn minus(p: f64) -> ProblemParams {
        ProblemParams::new(1.0, 2.0, p, Operator::Minus).unwrap()
    }

    #[test]
    fn branch_continuity_holds() {
        for p in [3.0, 4.0, 5.0, 7.5, 20.0] {
            verify_branch_continuity(&minus(p)).unwrap();
        }
        verify_branch_continuity(&ProblemParams::new(0.5, 3.7, 9.0, Operator::Minus).unwrap())
            .unwrap();
    }

    #[test]
    fn field_vanishes_at_m0_and_on_l1() {
        let ps = minus(5.0);
        let d = ps.derive();
        let a = d.n_tilde_minus - 2.0;
        let (f, g) = field(&ps, d.alpha, ps.lambda * (a - d.alpha)).unwrap();
        assert!(f.abs() < 1e-14 && g.abs() < 1e-14, "M0 must be stationary, got ({f}, {g})");
        // On ℓ₁ = {Z = λ(Ñ₋-2-X)} inside R⁻ the X-equation vanishes.
        for x in [0.1, 0.3, 0.7] {
            let z = ps.lambda * (a - x);
            let (f, _) = field(&ps, x, z).unwrap();
            assert!(f.abs() < 1e-14, "f = {f} on l1 at X = {x}");
        }
    }

    #[test]
    fn field_substitution_in_r_plus() {
        let ps = minus(5.0);
        let (f, g) = field(&ps, 0.2, 3.0).unwrap();
        assert!((f - 0.34).abs() < 1e-15);
        assert!((g - (-1.5)).abs() < 1e-15);
    }

    #[test]
    fn field_rejects_plus_operator() {
        let ps = ProblemParams::new(1.0, 2.0, 3.0, Operator::Plus).unwrap();
        assert!(field(&ps, 0.1, 0.1).is_err());
    }

    #[test]
    fn stationary_points_reference_case() {
        let pts = stationary_points(&minus(5.0)).unwrap();
        let by_name = |n: PointName| *pts.iter().find(|q| q.name == n).unwrap();

        let n0 = by_name(PointName::N0);
        assert_eq!(n0.coords, (0.0, 4.0));
        assert_eq!(n0.kind, PointKind::Saddle);
        assert_eq!(n0.eigenvalues[0].re, 2.0);
        assert_eq!(n0.eigenvalues[1].re, -2.0);

        let a0 = by_name(PointName::A0);
        assert_eq!(a0.coords, (1.0, 0.0));
        assert_eq!(a0.kind, PointKind::Saddle);

        let m0 = by_name(PointName::M0);
        assert_eq!(m0.coords, (0.5, 0.5));
        assert_eq!(m0.kind, PointKind::Center, "p = p_c = 5 is the center case");
        assert!(m0.eigenvalues.iter().all(|e| e.re.abs() < 1e-9));
        assert!(m0.eigenvalues[0].im != 0.0);

        assert_eq!(by_name(PointName::O).kind, PointKind::Saddle);
    }

    #[test]
    fn m0_type_transition_at_p_c() {
        let kind_at = |p: f64| {
            stationary_points(&minus(p))
                .unwrap()
                .into_iter()
                .find(|q| q.name == PointName::M0)
                .unwrap()
                .kind
        };
        assert_eq!(kind_at(4.9), PointKind::Source);
        assert_eq!(kind_at(5.1), PointKind::Sink);
        assert_eq!(kind_at(6.0), PointKind::Sink);
    }

    #[test]
    fn stationary_points_reject_small_p() {
        // serrin = 3 for Λ/λ = 2
        assert!(stationary_points(&minus(2.5)).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let ps = minus(6.3);
        let d = ps.derive();
        let a = d.n_tilde_minus - 2.0;
        let pts = [
            (0usize, 0.0, 2.0 * ps.big_lambda),
            (1, a, 0.0),
            (1, d.alpha, ps.lambda * (a - d.alpha)),
            (1, 0.0, 0.0),
            (0, 0.4, 3.1),
            (1, 0.9, 0.7),
        ];
        let h = 1e-6;
        for (branch, x, z) in pts {
            let j = branch_jacobian(&ps, branch, x, z);
            let num = [
                [
                    (branch_rhs(&ps, branch, x + h, z).0 - branch_rhs(&ps, branch, x - h, z).0)
                        / (2.0 * h),
                    (branch_rhs(&ps, branch, x, z + h).0 - branch_rhs(&ps, branch, x, z - h).0)
                        / (2.0 * h),
                ],
                [
                    (branch_rhs(&ps, branch, x + h, z).1 - branch_rhs(&ps, branch, x - h, z).1)
                        / (2.0 * h),
                    (branch_rhs(&ps, branch, x, z + h).1 - branch_rhs(&ps, branch, x, z - h).1)
                        / (2.0 * h),
                ],
            ];
            for r in 0..2 {
                for c in 0..2 {
                    let scale = 1.0 + j[r][c].abs();
                    assert!(
                        (j[r][c] - num[r][c]).abs() / scale < 1e-6,
                        "J[{r}][{c}] = {} vs fd {} at ({x}, {z}) branch {branch}",
                        j[r][c],
                        num[r][c]
                    );
                }
            }
        }
    }

    #[test]
    fn eigendirections_satisfy_eigen_equations() {
        let ps = minus(7.3);
        let d = ps.derive();
        let a = d.n_tilde_minus - 2.0;

        let v = n0_unstable_direction(&ps);
        assert!(v[0] > 0.0 && v[1] < 0.0);
        let j = branch_jacobian(&ps, 0, 0.0, 2.0 * ps.big_lambda);
        let jv = [j[0][0] * v[0] + j[0][1] * v[1], j[1][0] * v[0] + j[1][1] * v[1]];
        assert!((jv[0] - 2.0 * v[0]).abs() < 1e-12 && (jv[1] - 2.0 * v[1]).abs() < 1e-12);

        let w = a0_stable_direction(&ps);
        assert!(w[0] < 0.0 && w[1] > 0.0);
        let mu2 = d.n_tilde_minus - ps.p * a;
        assert!(mu2 < 0.0);
        let j = branch_jacobian(&ps, 1, a, 0.0);
        let jw = [j[0][0] * w[0] + j[0][1] * w[1], j[1][0] * w[0] + j[1][1] * w[1]];
        assert!((jw[0] - mu2 * w[0]).abs() < 1e-12 && (jw[1] - mu2 * w[1]).abs() < 1e-12);
    }

    #[test]
    fn dulac_density_matches_numeric_divergence() {
        // The closed form of Φ relies on α = 2/(p-1) making every X- and
        // Z-dependent term cancel; re-derive ∂_X(φf) + ∂_Z(φg) numerically.
        let mut state: u64 = 42;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for &p in &[3.5, 5.0, 8.0, 12.0] {
            let ps = minus(p);
            let d = ps.derive();
            for _ in 0..200 {
                let x = 0.05 + 1.2 * rng();
                let z = 0.05 + 3.4 * rng();
                if (z - ps.big_lambda).abs() < 0.05 {
                    continue;
                }
                let branch = usize::from(z < ps.big_lambda);
                let phi = |x: f64, z: f64| x.powf(d.alpha) * z.powf(d.beta);
                let h = 1e-6;
                let div = (phi(x + h, z) * branch_rhs(&ps, branch, x + h, z).0
                    - phi(x - h, z) * branch_rhs(&ps, branch, x - h, z).0)
                    / (2.0 * h)
                    + (phi(x, z + h) * branch_rhs(&ps, branch, x, z + h).1
                        - phi(x, z - h) * branch_rhs(&ps, branch, x, z - h).1)
                        / (2.0 * h);
                let closed = dulac_density(&ps, x, z);
                assert!(
                    (div - closed).abs() <= 1e-6 * (1.0 + closed.abs()),
                    "divergence mismatch at p={p} ({x}, {z}): {div} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn polygon_power_moment_oracles() {
        // ∬ X^α Z^β over the unit square = 1/((α+1)(β+1)).
        let square = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert!((power_moment(&square, 0.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((power_moment(&square, 1.0, 0.0) - 0.5).abs() < 1e-12);
        assert!((power_moment(&square, 2.0, 1.0) - 1.0 / 6.0).abs() < 1e-12);
        let (a, b) = (0.4, -0.6);
        let exact = 1.0 / ((a + 1.0) * (b + 1.0));
        // branch point sits exactly on the corner: composite Gauss error ~3e-6
        assert!((power_moment(&square, a, b) - exact).abs() < 1e-5);
        // Orientation invariance.
        let mut rev = square.clone();
        rev.reverse();
        assert!((power_moment(&rev, a, b) - exact).abs() < 1e-5);
        // Non-convex L-shape: area 3/4.
        let ell = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)];
        assert!((power_moment(&ell, 0.0, 0.0) - 0.75).abs() < 1e-12);
        // Triangle with a fractional moment against high-res reference:
        // ∬_T X^0.4 over {0<=Z<=X<=1} = ∫ x^0.4 · x dx = 1/2.4.
        let tri = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)];
        assert!((power_moment(&tri, 0.4, 0.0) - 1.0 / 2.4).abs() < 1e-8);
    }

    fn egg_around_m0(ps: &ProblemParams, n: usize) -> Vec<(f64, f64)> {
        // A closed curve around M0 that crosses Z = Λ and stays in the open
        // quadrant: ellipse centered above M0.
        let d = ps.derive();
        let a = d.n_tilde_minus - 2.0;
        let zm = ps.lambda * (a - d.alpha);
        let (cx, cz) = (d.alpha, 0.25 * (zm + 2.1 * ps.big_lambda));
        let (rx, rz) = (0.35 * d.alpha.min(a - d.alpha) + 0.05, cz - 0.02 * zm);
        (0..=n)
            .map(|i| {
                let th = core::f64::consts::TAU * (i as f64) / (n as f64);
                (cx + rx * th.cos(), cz + rz * th.sin())
            })
            .collect()
    }

    #[test]
    fn dulac_positive_below_p_c() {
        let ps = minus(4.0);
        let poly = egg_around_m0(&ps, 400);
        let rep = dulac_integral(&ps, &poly).unwrap();
        assert!(rep.i_plus > 0.0, "I+ = {}", rep.i_plus);
        assert!(rep.i_minus > 0.0, "I- = {}", rep.i_minus);
        assert!(rep.total > 0.0);
    }

    #[test]
    fn dulac_r_minus_term_vanishes_at_p_c() {
        let ps = minus(5.0);
        let poly = egg_around_m0(&ps, 400);
        let rep = dulac_integral(&ps, &poly).unwrap();
        assert_eq!(rep.i_minus, 0.0, "the R⁻ coefficient vanishes at p = p_c");
        assert!(rep.i_plus > 0.0);
        assert_eq!(rep.total, rep.i_plus);
    }

    #[test]
    fn dulac_rejects_open_and_offcenter_polygons() {
        let ps = minus(4.0);
        let mut poly = egg_around_m0(&ps, 100);
        poly.truncate(40);
        assert!(dulac_integral(&ps, &poly).is_err());
        let far = vec![(3.0, 3.0), (3.4, 3.0), (3.4, 3.4), (3.0, 3.4), (3.0, 3.0)];
        assert!(dulac_integral(&ps, &far).is_err());
    }

    #[test]
    fn hausdorff_basics() {
        let a = vec![(0.0, 0.0), (1.0, 0.0)];
        let b = vec![(0.0, 0.1), (1.0, 0.1)];
        assert!((hausdorff_distance(&a, &b) - 0.1).abs() < 1e-14);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn regular_orbit_p4_blows_up_after_crossing() {
        let ps = minus(4.0);
        let orbit = regular_orbit(&ps, None, &IntegrationControls::default()).unwrap();
        let OrbitFate::BallBlowUp { time } = orbit.fate else {
            panic!("expected blow-up, got {:?}", orbit.fate)
        };
        assert!(time.is_finite());
        // Lemma-box crossing of X = Ñ₋-2 happens strictly before blow-up.
        let cross = orbit.trajectory.hits("x_ntilde").next().expect("X = Ñ₋-2 crossing");
        assert!(cross.t < time);
        // Confinement in the rectangle until the crossing.
        for s in &orbit.trajectory.samples {
            if s.t < cross.t {
                assert!(s.y[0] <= 1.0 + 1e-9 && s.y[1] <= 4.0 + 1e-9);
            }
        }
    }

    #[test]
    fn regular_orbit_p20_slow_decay_at_m0() {
        let ps = minus(20.0);
        let orbit = regular_orbit(&ps, None, &IntegrationControls::default()).unwrap();
        assert_eq!(orbit.fate, OrbitFate::SlowDecay, "fate: {:?}", orbit.fate);
        let end = orbit.trajectory.last();
        let alpha = 2.0 / 19.0;
        assert!((end.y[0] - alpha).abs() < 1e-3, "terminal X = {} vs {alpha}", end.y[0]);
        // Rectangle confinement for an entire-solution orbit.
        for s in &orbit.trajectory.samples {
            assert!(s.y[0] >= -1e-12 && s.y[0] <= 1.0 + 1e-9);
            assert!(s.y[1] >= -1e-12 && s.y[1] <= 4.0 + 1e-9);
        }
    }

    #[test]
    fn backward_orbit_sinks_into_m0_below_p_c() {
        // p = 4 < p_c: M0 is a source, so the backward flow captures it.
        let orbit =
            backward_orbit_from_a0(&minus(4.0), None, &IntegrationControls::default()).unwrap();
        assert_eq!(orbit.alpha_limit, AlphaLimit::M0, "{:?}", orbit.alpha_limit);
    }

    #[test]
    fn backward_classification_robust_to_delta() {
        let ps = minus(4.0);
        let d0 = default_delta((1.0, 0.0));
        let a = backward_orbit_from_a0(&ps, Some(d0), &IntegrationControls::default()).unwrap();
        let b =
            backward_orbit_from_a0(&ps, Some(d0 / 2.0), &IntegrationControls::default()).unwrap();
        assert_eq!(a.alpha_limit, b.alpha_limit);
    }

    #[test]
    fn forward_classification_robust_to_delta() {
        let ps = minus(4.0);
        let d0 = default_delta((0.0, 4.0));
        let a = regular_orbit(&ps, Some(d0), &IntegrationControls::default()).unwrap();
        let b = regular_orbit(&ps, Some(d0 / 2.0), &IntegrationControls::default()).unwrap();
        assert!(matches!(a.fate, OrbitFate::BallBlowUp { .. }));
        assert!(matches!(b.fate, OrbitFate::BallBlowUp { .. }));
    }
}
