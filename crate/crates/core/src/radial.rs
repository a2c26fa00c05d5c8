//! Shooting solver for the radial Lane-Emden ODE `-M(D²u) = u^p`.
//!
//! On radial functions the Hessian eigenvalues are `u''` (simple) and `u'/r`
//! (multiplicity `N-1`), so the equation reduces to a piecewise-linear
//! composition of those two numbers. For `M⁻` and a decreasing solution,
//!
//! ```text
//! u'' = M(s),   s = -Λ (N-1) u'/r - u^p,   M(s) = s/Λ if s <= 0, s/λ if s > 0,
//! ```
//!
//! and the `M⁺` analogue carries `λ` inside `s` and swaps the slopes. The
//! sign of `s` equals the sign of `u''`, so `s` doubles as the switching
//! observable of the piecewise field and its zeros are the inflection radii.
//!
//! A shot starts from a second-order Taylor expansion at a tiny radius
//! (`u ≈ γ + c r²`), integrates outward, and ends either at a zero of `u`
//! (the Dirichlet ball solution, [`Fate::VanishesAt`]) or at the window edge
//! ([`Fate::PositiveOnWindow`]).

use crate::curve::SampledCurve;
use crate::error::Error;
use crate::integrator::{
    integrate, Direction, Event, EventAction, IntegrationControls, PiecewiseField, Switch,
    Termination,
};
use crate::params::{Operator, ProblemParams};
use crate::Result;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Outcome of a radial shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fate {
    /// `u` hits zero at the given radius: the Dirichlet ball solution.
    VanishesAt(f64),
    /// `u` stayed positive on the whole integration window.
    PositiveOnWindow(f64),
}

/// One sampled point of a radial solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSample {
    pub r: f64,
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    /// 0 on the concave branch (`u'' <= 0`), 1 on the convex branch.
    pub branch: usize,
}

/// A completed radial shot.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub gamma: f64,
    pub params: ProblemParams,
    pub samples: Vec<RadialSample>,
    pub fate: Fate,
    /// Radii where `u''` changes sign, located by event refinement.
    pub inflections: Vec<f64>,
}

impl RadialSolution {
    /// The solution as a Hermite-interpolable curve `r -> (u, u')`.
    pub fn curve(&self) -> SampledCurve {
        SampledCurve::from_triples(self.samples.iter().map(|s| (s.r, s.u, s.du)))
    }

    /// Vanishing radius, when the fate is a ball solution.
    pub fn vanishing_radius(&self) -> Option<f64> {
        match self.fate {
            Fate::VanishesAt(r) => Some(r),
            Fate::PositiveOnWindow(_) => None,
        }
    }
}

/// The switching observable: `s` for `M⁻`, `s̃` for `M⁺`.
pub fn concavity_indicator(params: &ProblemParams, r: f64, u: f64, du: f64) -> f64 {
    let m = f64::from(params.dimension) - 1.0;
    let coeff = match params.operator {
        Operator::Minus => params.big_lambda,
        Operator::Plus => params.lambda,
    };
    -coeff * m * du / r - positive_pow(u, params.p)
}

/// `u^p` extended by zero to `u <= 0`, so trial stages that overshoot the
/// vanishing radius stay finite.
fn positive_pow(u: f64, p: f64) -> f64 {
    if u > 0.0 {
        u.powf(p)
    } else {
        0.0
    }
}

/// Right-hand side `u''` of the radial ODE. Rejects `r = 0` (use
/// [`taylor_start`]) and non-positive `u`.
pub fn radial_rhs(params: &ProblemParams, r: f64, u: f64, du: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::invalid("radial_rhs needs r > 0; start from taylor_start"));
    }
    if u <= 0.0 {
        return Err(Error::invalid("radial_rhs needs u > 0"));
    }
    Ok(rhs_value(params, r, u, du))
}

fn rhs_value(params: &ProblemParams, r: f64, u: f64, du: f64) -> f64 {
    let s = concavity_indicator(params, r, u, du);
    s / branch_slope(params, if s <= 0.0 { 0 } else { 1 })
}

/// Divisor applied to the switching observable on each branch.
fn branch_slope(params: &ProblemParams, branch: usize) -> f64 {
    match (params.operator, branch) {
        (Operator::Minus, 0) => params.big_lambda,
        (Operator::Minus, _) => params.lambda,
        (Operator::Plus, 0) => params.lambda,
        (Operator::Plus, _) => params.big_lambda,
    }
}

/// Second-order start values `(u, u')` at a small radius `r0`.
///
/// `u ≈ γ + c r0²` with `c = -γ^p / (2 N k)`, `k = Λ` for `M⁻` and `k = λ`
/// for `M⁺`: near the origin both Hessian eigenvalues equal `2c < 0`.
pub fn taylor_start(params: &ProblemParams, gamma: f64, r0: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(r0 > 0.0) {
        return Err(Error::invalid("taylor_start needs r0 > 0"));
    }
    let c = taylor_coefficient(params, gamma);
    Ok((gamma + c * r0 * r0, 2.0 * c * r0))
}

fn taylor_coefficient(params: &ProblemParams, gamma: f64) -> f64 {
    let n = f64::from(params.dimension);
    let k = match params.operator {
        Operator::Minus => params.big_lambda,
        Operator::Plus => params.lambda,
    };
    -gamma.powf(params.p) / (2.0 * n * k)
}

/// Default start radius: keeps the `O(r0²)` expansion error below the
/// integration tolerance across solution scales.
pub fn default_start_radius(params: &ProblemParams, gamma: f64) -> f64 {
    1e-6 * 1.0f64.max(gamma.powf(0.5 * (1.0 - params.p)))
}

/// Shoots the radial solution with `u(0) = γ`, `u'(0) = 0` out to `r_max`.
pub fn shoot(
    params: &ProblemParams,
    gamma: f64,
    r_max: f64,
    controls: &IntegrationControls,
) -> Result<RadialSolution> {
    let r0 = default_start_radius(params, gamma);
    if r_max <= r0 {
        return Err(Error::invalid(format!(
            "r_max = {r_max} does not exceed the start radius {r0}"
        )));
    }
    let init = taylor_start(params, gamma, r0)?;

    let ps = *params;
    let field = PiecewiseField::new(
        Box::new(move |t, y: &[f64; 2]| usize::from(concavity_indicator(&ps, t, y[0], y[1]) > 0.0)),
        vec![
            Box::new(move |t, y: &[f64; 2]| {
                [y[1], concavity_indicator(&ps, t, y[0], y[1]) / branch_slope(&ps, 0)]
            }),
            Box::new(move |t, y: &[f64; 2]| {
                [y[1], concavity_indicator(&ps, t, y[0], y[1]) / branch_slope(&ps, 1)]
            }),
        ],
        vec![Switch {
            label: "inflection",
            f: Box::new(move |t, y: &[f64; 2]| concavity_indicator(&ps, t, y[0], y[1])),
        }],
    );
    let vanish = Event::new("vanish", Direction::Down, EventAction::Stop, |_, y: &[f64; 2]| y[0]);

    // Cap the step so Hermite interpolation between samples stays ~O(1e-10).
    let mut ctl = *controls;
    ctl.max_step = ctl.max_step.min((r_max * 4e-4).max(0.02));
    let traj = integrate(&field, [init.0, init.1], (r0, r_max), &[vanish], &ctl)?;

    let fate = match traj.termination {
        Termination::EventStop("vanish") => {
            Fate::VanishesAt(traj.hits("vanish").last().expect("stop event recorded").t)
        }
        Termination::HorizonReached => Fate::PositiveOnWindow(r_max),
        Termination::BlowUp(t) => {
            return Err(Error::Undetermined(format!("radial state blew up at r = {t}")))
        }
        Termination::StepCollapse(t) => {
            return Err(Error::Undetermined(format!(
                "step collapse at r = {t} before any fate event"
            )))
        }
        Termination::EventStop(other) => {
            return Err(Error::Undetermined(format!("unexpected stop event {other}")))
        }
    };

    if params.operator == Operator::Plus {
        // The M⁺ branch formulas assume u' <= 0; a violation means the run
        // left the monotone regime and its output cannot be trusted.
        if let Some(bad) = traj.samples.iter().find(|s| s.y[1] > 1e-9 * gamma.max(1.0)) {
            return Err(Error::ShapeViolation(format!(
                "u' = {} > 0 at r = {} in an M+ shot",
                bad.y[1], bad.t
            )));
        }
    }

    let samples = traj
        .samples
        .iter()
        .map(|s| RadialSample {
            r: s.t,
            u: s.y[0],
            du: s.y[1],
            d2u: rhs_value(params, s.t, s.y[0], s.y[1]),
            branch: s.branch,
        })
        .collect();
    let inflections = traj.hits("inflection").map(|h| h.t).collect();

    Ok(RadialSolution { gamma, params: *params, samples, fate, inflections })
}

/// Scaling-covariance report: how well `u₂(r)` matches `(γ₂/γ₁) u₁(κ r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    pub kappa: f64,
    /// Max deviation over the common domain, relative to the local value
    /// (floored at `1e-6 γ₂` so the zero boundary does not dominate).
    pub max_rel_dev: f64,
    /// Relative error of `R_p(γ₂) = κ⁻¹ R_p(γ₁)`, when both shots vanish.
    pub radius_rel_dev: Option<f64>,
}

/// Verifies the exact covariance `u_γ(r) = γ u_1(γ^{(p-1)/2} r)` between two
/// shots of the same problem, with `κ = (γ₂/γ₁)^{(p-1)/2}`.
pub fn scaling_check(
    params: &ProblemParams,
    gamma1: f64,
    gamma2: f64,
    r_max: f64,
    controls: &IntegrationControls,
) -> Result<ScalingReport> {
    let s1 = shoot(params, gamma1, r_max, controls)?;
    let s2 = shoot(params, gamma2, r_max, controls)?;
    let ratio = gamma2 / gamma1;
    let kappa = ratio.powf(0.5 * (params.p - 1.0));

    let c1 = s1.curve();
    let c2 = s2.curve();
    let lo = c2.domain().0.max(c1.domain().0 / kappa);
    let mut hi = c2.domain().1.min(c1.domain().1 / kappa);
    // Stay a hair inside a vanishing endpoint, where the pointwise quotient
    // is dominated by event-location noise.
    if let Fate::VanishesAt(rp) = s2.fate {
        hi = hi.min(0.995 * rp);
    }
    if !(hi > lo) {
        return Err(Error::invalid("scaling_check: empty common domain"));
    }
    let mut max_rel: f64 = 0.0;
    let n = 512;
    for i in 0..=n {
        let r = lo + (hi - lo) * (i as f64) / (n as f64);
        let (Some(u2), Some(u1)) = (c2.value(r), c1.value(kappa * r)) else { continue };
        let dev = (u2 - ratio * u1).abs() / u2.abs().max(1e-6 * gamma2);
        max_rel = max_rel.max(dev);
    }

    let radius_rel_dev = match (s1.fate, s2.fate) {
        (Fate::VanishesAt(r1), Fate::VanishesAt(r2)) => {
            let predicted = r1 / kappa;
            Some((r2 - predicted).abs() / predicted)
        }
        _ => None,
    };

    Ok(ScalingReport { kappa, max_rel_dev: max_rel, radius_rel_dev })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(op: Operator, lambda: f64, big: f64, p: f64) -> ProblemParams {
        ProblemParams::new(lambda, big, p, op).unwrap()
    }

    #[test]
    fn rhs_collapses_to_laplacian_when_constants_match() {
        for op in [Operator::Plus, Operator::Minus] {
            let ps = params(op, 1.0, 1.0, 2.0);
            let got = radial_rhs(&ps, 0.7, 0.9, -0.3).unwrap();
            let want = 0.3 / 0.7 - 0.81; // -(N-1) u'/r - u^p with N = 2
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn rhs_minus_branch_substitution() {
        let ps = params(Operator::Minus, 1.0, 2.0, 2.0);
        // s = -2*0/1 - 1 = -1 <= 0  =>  u'' = s/Λ = -1/2
        assert_eq!(radial_rhs(&ps, 1.0, 1.0, 0.0).unwrap(), -0.5);
    }

    #[test]
    fn rhs_plus_branch_substitution() {
        let ps = params(Operator::Plus, 1.0, 2.0, 2.0);
        // s̃ = -1*(-2)/1 - 1 = 1 > 0  =>  u'' = s̃/Λ = 1/2
        assert_eq!(radial_rhs(&ps, 1.0, 1.0, -2.0).unwrap(), 0.5);
    }

    #[test]
    fn rhs_rejects_origin_and_nonpositive_u() {
        let ps = params(Operator::Minus, 1.0, 2.0, 2.0);
        assert!(radial_rhs(&ps, 0.0, 1.0, 0.0).is_err());
        assert!(radial_rhs(&ps, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn taylor_coefficient_values() {
        // Laplacian, N=2, γ=1, p=2: c = -1/4.
        let ps = params(Operator::Minus, 1.0, 1.0, 2.0);
        assert_eq!(taylor_coefficient(&ps, 1.0), -0.25);
        // M⁻ with Λ=2: c = -γ^p/8.
        let ps = params(Operator::Minus, 1.0, 2.0, 3.0);
        assert_eq!(taylor_coefficient(&ps, 1.0), -0.125);
        assert_eq!(taylor_coefficient(&ps, 2.0), -1.0);
    }

    #[test]
    fn taylor_start_residual_is_second_order() {
        // Oracle: the ODE residual of the quadratic start decays like r².
        for ps in [
            params(Operator::Minus, 1.0, 1.0, 2.0),
            params(Operator::Minus, 1.0, 2.0, 3.0),
            params(Operator::Plus, 1.0, 2.0, 3.0),
        ] {
            let gamma = 1.0;
            let c = taylor_coefficient(&ps, gamma);
            let resid = |r: f64| {
                let (u, du) = taylor_start(&ps, gamma, r).unwrap();
                (2.0 * c - radial_rhs(&ps, r, u, du).unwrap()).abs()
            };
            let (r1, r2) = (resid(1e-3), resid(1e-4));
            assert!(r1 < 1e-5, "residual too large: {r1}");
            assert!(r1 / r2 > 50.0, "expected ~100x decay, got {}", r1 / r2);
        }
    }

    #[test]
    fn laplacian_shot_self_converges() {
        let ps = params(Operator::Minus, 1.0, 1.0, 3.0);
        let coarse = shoot(&ps, 1.0, 10.0, &IntegrationControls::default()).unwrap();
        let fine =
            shoot(&ps, 1.0, 10.0, &IntegrationControls::default().scaled_tol(0.1)).unwrap();
        let ra = coarse.vanishing_radius().expect("ball solution");
        let rb = fine.vanishing_radius().expect("ball solution");
        assert!((ra - rb).abs() < 1e-6, "R_p self-convergence: {ra} vs {rb}");
    }

    #[test]
    fn plus_ball_solution_exists_and_is_monotone() {
        let ps = params(Operator::Plus, 1.0, 2.0, 3.0);
        let sol = shoot(&ps, 1.0, 50.0, &IntegrationControls::default()).unwrap();
        let rp = sol.vanishing_radius().expect("M+ admits a ball solution for every p > 1");
        assert!(rp > 0.1 && rp < 50.0);
        for s in &sol.samples[1..] {
            assert!(s.du < 0.0, "u' must stay negative, got {} at r = {}", s.du, s.r);
        }
        // Exactly one concavity change along the ball solution.
        assert_eq!(sol.inflections.len(), 1, "inflections: {:?}", sol.inflections);
        let y = sol.inflections[0];
        assert!(y > 0.0 && y < rp);
    }

    #[test]
    fn minus_subcritical_vanishes_with_one_inflection() {
        let ps = params(Operator::Minus, 1.0, 2.0, 4.0);
        let sol = shoot(&ps, 1.0, 50.0, &IntegrationControls::default()).unwrap();
        assert!(sol.vanishing_radius().is_some());
        assert_eq!(sol.inflections.len(), 1);
        for s in &sol.samples[1..] {
            assert!(s.du < 0.0);
        }
    }

    #[test]
    fn shots_are_deterministic() {
        let ps = params(Operator::Minus, 1.0, 2.0, 4.0);
        let a = shoot(&ps, 1.0, 20.0, &IntegrationControls::default()).unwrap();
        let b = shoot(&ps, 1.0, 20.0, &IntegrationControls::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_identity_is_exact() {
        let ps = params(Operator::Minus, 1.0, 2.0, 4.0);
        let rep = scaling_check(&ps, 1.0, 1.0, 20.0, &IntegrationControls::default()).unwrap();
        assert_eq!(rep.kappa, 1.0);
        assert_eq!(rep.max_rel_dev, 0.0);
        assert_eq!(rep.radius_rel_dev, Some(0.0));
    }

    #[test]
    fn scaling_covariance_plus_p3() {
        let ps = params(Operator::Plus, 1.0, 2.0, 3.0);
        let rep = scaling_check(&ps, 1.0, 16.0, 20.0, &IntegrationControls::default()).unwrap();
        assert_eq!(rep.kappa, 16.0);
        assert!(rep.max_rel_dev < 1e-5, "deviation {}", rep.max_rel_dev);
        assert!(rep.radius_rel_dev.unwrap() < 1e-5, "radius law {:?}", rep.radius_rel_dev);
    }
}
