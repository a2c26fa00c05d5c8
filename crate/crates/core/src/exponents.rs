//! Estimation of the critical exponent `p₋*` and the periodic-orbit
//! threshold `p̃₋` by sweeping and bisecting orbit fates.
//!
//! The fate of the regular orbit `Γ_p` partitions the exponent axis: below
//! `p₋*` it blows up in finite time (the Dirichlet ball solution exists), at
//! and above it is entire. Bisection on that fate brackets `p₋*`. Periodic
//! orbits are probed with two detectors suggested by the dynamics:
//!
//! * `Γ_p` itself classifying as pseudo-slow (a stabilized return sequence);
//! * the backward orbit from `A₀` ending on a periodic α-limit, which also
//!   sees cycles that repel forward orbits.
//!
//! Every detected cycle is validated against the Dulac identity: the area
//! integral of the weighted divergence over the enclosed region must vanish
//! for a true periodic orbit. The empirical `p̃₋` is the supremum of the
//! exponents where a validated cycle is seen (the infimum above which no
//! detector fires); when no cycle is visible at all it collapses onto the
//! `p₋*` bracket, consistent with `p₋* <= p̃₋`.

use crate::error::Error;
use crate::integrator::IntegrationControls;
use crate::params::{exponent_bounds, BoundsReport, ProblemParams};
use crate::phase::{
    backward_orbit_from_a0, dulac_integral, refined_loop_polygon, regular_orbit, AlphaLimit,
    DulacReport, Orbit, OrbitFate, DEFAULT_HORIZON,
};
use crate::Result;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Relative Dulac residual below which a loop counts as a certified cycle.
pub const DULAC_CERTIFY: f64 = 1e-3;
/// Polygon resolution used when re-integrating a return loop for validation.
const LOOP_RESOLUTION: usize = 4096;

/// A closed exponent bracket `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, other: &Bracket) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// Decay class of an entire radial solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Decay {
    /// `r^{Ñ₋-2} u → c`: ω-limit `A₀`.
    Fast,
    /// `r^α u → c`: ω-limit `M₀`.
    Slow,
    /// Oscillating `r^α u`: ω-limit a periodic orbit.
    PseudoSlow,
}

/// One entry of a fate-vs-p sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FateSample {
    pub p: f64,
    pub fate: OrbitFate,
    /// Terminal phase point of the forward orbit.
    pub terminal: (f64, f64),
    /// Stabilized return amplitude, when one was seen.
    pub amplitude: Option<f64>,
    /// α-limit of the backward orbit, when the sample ran both detectors.
    pub backward: Option<AlphaLimit>,
    /// Whether a validated periodic orbit was present at this `p`.
    pub periodic_detected: bool,
}

/// Consistency of the empirical estimates with the proved inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConsistencyFlags {
    /// The strict lower bound sits below the `p₋*` bracket.
    pub lower_below_p_star: bool,
    /// `p₋* <= p̃₋` within the combined tolerance.
    pub ordering_ok: bool,
    /// Empirical `p̃₋` satisfies the theorem-statement (`+`) upper bound.
    pub upper_plus_satisfied: bool,
    /// Empirical `p̃₋` satisfies the proof-text (`-`) upper bound.
    pub upper_minus_satisfied: bool,
}

/// Joint estimate of the two thresholds with its supporting evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub p_star: Bracket,
    /// Fates certifying the bracket endpoints (blow-up below, entire above).
    pub p_star_fates: (OrbitFate, OrbitFate),
    pub p_tilde: Bracket,
    /// Whether `p_tilde` came from observed cycles (otherwise it collapsed
    /// onto the `p_star` bracket because no detector ever fired).
    pub p_tilde_from_cycles: bool,
    pub cycles_detected: usize,
    /// Dulac validation of each detected cycle, as `(p, report)`.
    pub dulac_checks: Vec<(f64, DulacReport)>,
    pub tolerance: f64,
    pub bounds: BoundsReport,
    pub sweep: Vec<FateSample>,
    pub consistency: ConsistencyFlags,
}

/// Default probe window `(p_c, upper bound in the proof-text form]`.
pub fn default_window(params: &ProblemParams) -> Result<(f64, f64)> {
    let b = exponent_bounds(params)?;
    Ok((b.lower, b.upper_minus_form))
}

/// Decides the fate of `Γ_p`, retrying once with tolerances tightened 10x
/// and the horizon doubled when the first run is undetermined.
pub fn decided_fate(params: &ProblemParams, controls: &IntegrationControls) -> Result<Orbit> {
    let orbit = regular_orbit(params, None, controls)?;
    if !matches!(orbit.fate, OrbitFate::Undetermined { .. }) {
        return Ok(orbit);
    }
    let mut retry = controls.scaled_tol(0.1);
    retry.max_time =
        2.0 * if controls.max_time.is_finite() { controls.max_time } else { DEFAULT_HORIZON };
    regular_orbit(params, None, &retry)
}

fn decided_backward(
    params: &ProblemParams,
    controls: &IntegrationControls,
) -> Result<AlphaLimit> {
    let bw = backward_orbit_from_a0(params, None, controls)?;
    if !matches!(bw.alpha_limit, AlphaLimit::Undetermined { .. }) {
        return validate_periodic(params, bw, controls);
    }
    let mut retry = controls.scaled_tol(0.1);
    retry.max_time =
        2.0 * if controls.max_time.is_finite() { controls.max_time } else { DEFAULT_HORIZON };
    let bw = backward_orbit_from_a0(params, None, &retry)?;
    validate_periodic(params, bw, &retry)
}

/// Downgrades a periodic classification that fails the Dulac identity.
fn validate_periodic(
    params: &ProblemParams,
    bw: crate::phase::BackwardOrbit,
    controls: &IntegrationControls,
) -> Result<AlphaLimit> {
    if let AlphaLimit::Periodic { .. } = bw.alpha_limit {
        if cycle_check(params, &bw.trajectory, controls)?.is_none() {
            return Ok(AlphaLimit::Undetermined {
                reason: String::from("stabilized returns failed the Dulac identity"),
            });
        }
    }
    Ok(bw.alpha_limit)
}

/// Re-integrates the last return loop and runs the Dulac identity on it.
/// Returns the report when the loop certifies as a cycle.
fn cycle_check(
    params: &ProblemParams,
    traj: &crate::integrator::Trajectory<2>,
    controls: &IntegrationControls,
) -> Result<Option<DulacReport>> {
    let Some(poly) = refined_loop_polygon(params, traj, LOOP_RESOLUTION, controls)? else {
        return Ok(None);
    };
    let rep = dulac_integral(params, &poly)?;
    let ratio = rep.total.abs() / (rep.i_plus.abs() + rep.i_minus.abs());
    Ok((ratio < DULAC_CERTIFY).then_some(rep))
}

/// Runs both periodic-orbit detectors at one exponent.
fn probe_cycles(
    params: &ProblemParams,
    controls: &IntegrationControls,
) -> Result<(Orbit, AlphaLimit, Option<DulacReport>)> {
    let orbit = decided_fate(params, controls)?;
    let backward = decided_backward(params, controls)?;
    let mut dulac = None;
    if let OrbitFate::PseudoSlow { .. } = orbit.fate {
        // The forward detector fired: certify its loop too.
        dulac = cycle_check(params, &orbit.trajectory, controls)?;
    }
    if let AlphaLimit::Periodic { .. } = backward {
        if dulac.is_none() {
            let bw = backward_orbit_from_a0(params, None, controls)?;
            dulac = cycle_check(params, &bw.trajectory, controls)?;
        }
    }
    Ok((orbit, backward, dulac))
}

fn cycle_present(fate: &OrbitFate, backward: &AlphaLimit) -> bool {
    matches!(fate, OrbitFate::PseudoSlow { .. }) || matches!(backward, AlphaLimit::Periodic { .. })
}

fn sample_points(window: (f64, f64), n_uniform: usize, n_low: usize) -> Vec<f64> {
    let (lo, hi) = window;
    let mut pts = Vec::with_capacity(n_uniform + n_low);
    for j in 1..=n_uniform {
        pts.push(lo + (hi - lo) * (j as f64) / (n_uniform as f64));
    }
    // Extra resolution just above the window floor: cycle bands abut p_c.
    let band = (hi - lo) / 8.0;
    for j in 1..=n_low {
        pts.push(lo + band * (j as f64) / (n_low as f64));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Joint sweep-and-bisect estimator for `p₋*` and `p̃₋`.
///
/// A preliminary sweep (32 uniform samples plus 16 packed against the
/// window floor) validates the single-threshold fate structure, then the
/// blow-up/entire transition and the top of the cycle band are refined to
/// width `tol` by bisection with endpoint certification.
pub fn estimate(
    params: &ProblemParams,
    tol: f64,
    window: Option<(f64, f64)>,
    controls: &IntegrationControls,
) -> Result<ExponentEstimate> {
    params.require_planar_minus()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let bounds = exponent_bounds(params)?;
    let window = match window {
        Some(w) if w.0 < w.1 => w,
        Some(w) => return Err(Error::invalid(format!("empty window ({}, {})", w.0, w.1))),
        None => (bounds.lower, bounds.upper_minus_form),
    };

    // Sweep both detectors across the window.
    let mut sweep = Vec::new();
    for p in sample_points(window, 32, 16) {
        let at = params.with_p(p)?;
        let (orbit, backward, dulac) = probe_cycles(&at, controls)?;
        let periodic = cycle_present(&orbit.fate, &backward) && dulac.is_some();
        let end = orbit.trajectory.last();
        let amplitude = match orbit.fate {
            OrbitFate::PseudoSlow { amplitude, .. } => Some(amplitude),
            _ => match backward {
                AlphaLimit::Periodic { amplitude, .. } => Some(amplitude),
                _ => None,
            },
        };
        sweep.push((
            FateSample {
                p,
                fate: orbit.fate,
                terminal: (end.y[0], end.y[1]),
                amplitude,
                backward: Some(backward),
                periodic_detected: periodic,
            },
            dulac,
        ));
    }

    // Single-transition validation: every decided blow-up sample must sit
    // below every decided entire sample.
    let highest_blowup = sweep
        .iter()
        .filter(|(s, _)| matches!(s.fate, OrbitFate::BallBlowUp { .. }))
        .map(|(s, _)| s.p)
        .fold(f64::NEG_INFINITY, f64::max);
    let lowest_entire = sweep
        .iter()
        .filter(|(s, _)| s.fate.is_entire())
        .map(|(s, _)| s.p)
        .fold(f64::INFINITY, f64::min);
    if !highest_blowup.is_finite() || !lowest_entire.is_finite() {
        return Err(Error::NonMonotoneSweep(format!(
            "window ({}, {}) does not show both fates: highest blow-up {highest_blowup}, lowest entire {lowest_entire}",
            window.0, window.1
        )));
    }
    if highest_blowup > lowest_entire {
        return Err(Error::NonMonotoneSweep(format!(
            "blow-up at p = {highest_blowup} above an entire fate at p = {lowest_entire}"
        )));
    }

    // Bisection for p*.
    let mut lo = highest_blowup;
    let mut hi = lowest_entire;
    let mut lo_fate = sweep
        .iter()
        .find(|(s, _)| s.p == lo)
        .map(|(s, _)| s.fate.clone())
        .expect("lo comes from the sweep");
    let mut hi_fate = sweep
        .iter()
        .find(|(s, _)| s.p == hi)
        .map(|(s, _)| s.fate.clone())
        .expect("hi comes from the sweep");
    while hi - lo > tol {
        let (p, fate) = probe_decided(params, 0.5 * (lo + hi), hi - lo, controls)?;
        if matches!(fate, OrbitFate::BallBlowUp { .. }) {
            lo = p;
            lo_fate = fate;
        } else {
            hi = p;
            hi_fate = fate;
        }
    }
    let p_star = Bracket { lo, hi };

    // Cycle band: refine the top of the detected region.
    let mut dulac_checks: Vec<(f64, DulacReport)> =
        sweep.iter().filter_map(|(s, d)| d.map(|rep| (s.p, rep))).collect();
    let cycles_detected = sweep.iter().filter(|(s, _)| s.periodic_detected).count();
    let top_detected = sweep
        .iter()
        .filter(|(s, _)| s.periodic_detected)
        .map(|(s, _)| s.p)
        .fold(f64::NEG_INFINITY, f64::max);

    let (p_tilde, from_cycles) = if top_detected.is_finite() {
        let mut lo_c = top_detected;
        let mut hi_c = sweep
            .iter()
            .filter(|(s, _)| !s.periodic_detected && s.p > top_detected)
            .map(|(s, _)| s.p)
            .fold(window.1, f64::min);
        while hi_c - lo_c > tol {
            let p = 0.5 * (lo_c + hi_c);
            let at = params.with_p(p)?;
            let (orbit, backward, dulac) = probe_cycles(&at, controls)?;
            if cycle_present(&orbit.fate, &backward) && dulac.is_some() {
                if let Some(rep) = dulac {
                    dulac_checks.push((p, rep));
                }
                lo_c = p;
            } else {
                hi_c = p;
            }
        }
        (Bracket { lo: lo_c, hi: hi_c }, true)
    } else {
        // No cycle visible anywhere: the empirical threshold collapses onto
        // the critical exponent, consistent with p* <= p̃.
        (p_star, false)
    };

    let sweep: Vec<FateSample> = sweep.into_iter().map(|(s, _)| s).collect();
    let consistency = consistency_flags(&bounds, &p_star, &p_tilde, tol);
    Ok(ExponentEstimate {
        p_star,
        p_star_fates: (lo_fate, hi_fate),
        p_tilde,
        p_tilde_from_cycles: from_cycles,
        cycles_detected,
        dulac_checks,
        tolerance: tol,
        bounds,
        sweep,
        consistency,
    })
}

/// One decided bisection probe; deterministically nudges the probe point
/// when a fate stays undetermined after the retry.
fn probe_decided(
    params: &ProblemParams,
    mid: f64,
    width: f64,
    controls: &IntegrationControls,
) -> Result<(f64, OrbitFate)> {
    for shift in [0.0, 0.125, -0.125, 0.25] {
        let p = mid + shift * width;
        let orbit = decided_fate(&params.with_p(p)?, controls)?;
        if !matches!(orbit.fate, OrbitFate::Undetermined { .. }) {
            return Ok((p, orbit.fate));
        }
    }
    Err(Error::Undetermined(format!(
        "fate near p = {mid} stayed undetermined after retries and probe shifts"
    )))
}

fn consistency_flags(
    bounds: &BoundsReport,
    p_star: &Bracket,
    p_tilde: &Bracket,
    tol: f64,
) -> ConsistencyFlags {
    ConsistencyFlags {
        lower_below_p_star: bounds.lower < p_star.lo,
        ordering_ok: p_star.hi <= p_tilde.hi + tol,
        upper_plus_satisfied: p_tilde.hi <= bounds.upper_plus_form + tol,
        upper_minus_satisfied: p_tilde.hi <= bounds.upper_minus_form + tol,
    }
}

/// Bisection estimate of the critical exponent `p₋*` (runs the joint
/// estimator; see [`estimate`]).
pub fn estimate_p_star(
    params: &ProblemParams,
    tol: f64,
    window: Option<(f64, f64)>,
    controls: &IntegrationControls,
) -> Result<ExponentEstimate> {
    estimate(params, tol, window, controls)
}

/// Estimate of the periodic-orbit threshold `p̃₋` (runs the joint
/// estimator; see [`estimate`]).
pub fn estimate_p_tilde(
    params: &ProblemParams,
    tol: f64,
    window: Option<(f64, f64)>,
    controls: &IntegrationControls,
) -> Result<ExponentEstimate> {
    estimate(params, tol, window, controls)
}

/// Re-derives the consistency flags of a finished estimate.
pub fn verify_bounds(estimate: &ExponentEstimate) -> ConsistencyFlags {
    consistency_flags(&estimate.bounds, &estimate.p_star, &estimate.p_tilde, estimate.tolerance)
}

/// Decay class of an entire-solution orbit per the ω-limit correspondence.
pub fn classify_decay(orbit: &Orbit) -> Result<Decay> {
    let d = orbit.params.derive();
    let a = d.n_tilde_minus - 2.0;
    let end = orbit.trajectory.last();
    match &orbit.fate {
        OrbitFate::FastDecay => {
            debug_assert!((end.y[0] - a).abs() < 0.1);
            Ok(Decay::Fast)
        }
        OrbitFate::SlowDecay => {
            if (end.y[0] - d.alpha).abs() > 1e-2 * (1.0 + d.alpha) {
                return Err(Error::ShapeViolation(format!(
                    "slow-decay orbit ended at X = {} instead of alpha = {}",
                    end.y[0], d.alpha
                )));
            }
            Ok(Decay::Slow)
        }
        OrbitFate::PseudoSlow { .. } => Ok(Decay::PseudoSlow),
        OrbitFate::BallBlowUp { .. } => {
            Err(Error::invalid("blow-up orbits do not decay; no class applies"))
        }
        OrbitFate::Undetermined { reason } => {
            Err(Error::Undetermined(format!("cannot classify an undetermined orbit: {reason}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Operator;

    fn minus(p: f64) -> ProblemParams {
        ProblemParams::new(1.0, 2.0, p, Operator::Minus).unwrap()
    }

    #[test]
    fn default_window_reference() {
        let (lo, hi) = default_window(&minus(6.0)).unwrap();
        assert_eq!(lo, 5.0);
        assert_eq!(hi, 13.0);
    }

    #[test]
    fn degenerate_operator_rejected() {
        let ps = ProblemParams::new(1.0, 1.0, 6.0, Operator::Minus).unwrap();
        assert!(estimate(&ps, 0.1, None, &IntegrationControls::default()).is_err());
    }

    #[test]
    fn classify_decay_mapping() {
        let c = IntegrationControls::default();
        let slow = regular_orbit(&minus(20.0), None, &c).unwrap();
        assert_eq!(classify_decay(&slow).unwrap(), Decay::Slow);
        let blow = regular_orbit(&minus(4.0), None, &c).unwrap();
        assert!(classify_decay(&blow).is_err());
    }

    #[test]
    fn estimate_reference_pair_brackets() {
        let c = IntegrationControls::default();
        let est = estimate(&minus(6.0), 0.2, None, &c).unwrap();
        // Bracket inside (5, 13], endpoints certified.
        assert!(est.p_star.lo > 5.0 && est.p_star.hi <= 13.0);
        assert!(est.p_star.width() <= 0.2);
        assert!(matches!(est.p_star_fates.0, OrbitFate::BallBlowUp { .. }));
        assert!(est.p_star_fates.1.is_entire());
        // The reference pair has a cycle band below p*, so p̃ is cycle-based.
        assert!(est.p_tilde_from_cycles);
        assert!(est.cycles_detected > 0);
        for (p, rep) in &est.dulac_checks {
            let ratio = rep.total.abs() / (rep.i_plus.abs() + rep.i_minus.abs());
            assert!(ratio < DULAC_CERTIFY, "cycle at p = {p} failed Dulac: {ratio}");
        }
        // Ordering and bound adjudication.
        assert!(est.consistency.lower_below_p_star);
        assert!(est.consistency.ordering_ok);
        assert!(est.consistency.upper_plus_satisfied);
        assert!(est.consistency.upper_minus_satisfied);

        // Nesting under tolerance refinement.
        let fine = estimate(&minus(6.0), 0.05, None, &c).unwrap();
        assert!(fine.p_star.width() <= 0.05);
        assert!(est.p_star.contains(&fine.p_star), "{:?} not inside {:?}", fine.p_star, est.p_star);
    }

    #[test]
    fn no_cycles_detected_below_p_c() {
        // No periodic orbits below p_c; 16 samples across (serrin, p_c).
        let c = IntegrationControls::default();
        for j in 1..=16 {
            let p = 3.0 + 2.0 * (j as f64) / 17.0;
            let at = minus(p);
            let (orbit, backward, dulac) = probe_cycles(&at, &c).unwrap();
            let detected = cycle_present(&orbit.fate, &backward) && dulac.is_some();
            assert!(!detected, "spurious cycle at p = {p}: {:?} / {:?}", orbit.fate, backward);
        }
    }
}
