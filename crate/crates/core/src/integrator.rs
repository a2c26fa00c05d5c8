//! Adaptive explicit integration with event location and piecewise
//! right-hand-side switching.
//!
//! The stepper is the Dormand-Prince embedded 5(4) pair with the classical
//! 4th-order continuous extension and Lund-stabilized (PI) step control.
//! Fields may be piecewise: each branch is smooth on its open region and the
//! full field is continuous across the switching surfaces. Every sign change
//! of a switching or event function is located on the dense output of the
//! accepted step by bracketing bisection, the step is re-taken to the located
//! time, and the branch label is re-evaluated there, so no accepted step
//! straddles a switching surface by more than `event_tol` in time.

use crate::error::Error;
use crate::Result;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Right-hand side of one smooth branch.
pub type RhsFn<const D: usize> = Box<dyn Fn(f64, &[f64; D]) -> [f64; D] + Send + Sync>;
/// Scalar observable of the state (switching surfaces, event functions).
pub type ScalarFn<const D: usize> = Box<dyn Fn(f64, &[f64; D]) -> f64 + Send + Sync>;
/// Maps a state to the active branch index.
pub type SelectorFn<const D: usize> = Box<dyn Fn(f64, &[f64; D]) -> usize + Send + Sync>;

/// A labelled switching surface; its zero set is a branch boundary.
pub struct Switch<const D: usize> {
    pub label: &'static str,
    pub f: ScalarFn<D>,
}

/// A vector field assembled from smooth branches separated by switching
/// surfaces. The field must be continuous across each surface.
pub struct PiecewiseField<const D: usize> {
    selector: SelectorFn<D>,
    branches: Vec<RhsFn<D>>,
    switching: Vec<Switch<D>>,
}

impl<const D: usize> PiecewiseField<D> {
    pub fn new(selector: SelectorFn<D>, branches: Vec<RhsFn<D>>, switching: Vec<Switch<D>>) -> Self {
        Self { selector, branches, switching }
    }

    /// A single-branch smooth field with no switching surfaces.
    pub fn smooth(rhs: impl Fn(f64, &[f64; D]) -> [f64; D] + Send + Sync + 'static) -> Self {
        Self {
            selector: Box::new(|_, _| 0),
            branches: vec![Box::new(rhs)],
            switching: Vec::new(),
        }
    }

    pub fn branch_of(&self, t: f64, y: &[f64; D]) -> usize {
        (self.selector)(t, y)
    }

    pub fn eval(&self, branch: usize, t: f64, y: &[f64; D]) -> [f64; D] {
        (self.branches[branch])(t, y)
    }
}

/// What to do when an event function crosses zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    /// Record the hit and keep integrating.
    Record,
    /// Record the hit and terminate with [`Termination::EventStop`].
    Stop,
}

/// Which sign changes of an event function count as a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    /// Negative to positive.
    Up,
    /// Positive to negative.
    Down,
}

/// A labelled event function watched along the integration.
pub struct Event<const D: usize> {
    pub label: &'static str,
    pub direction: Direction,
    pub action: EventAction,
    pub f: ScalarFn<D>,
}

impl<const D: usize> Event<D> {
    pub fn new(
        label: &'static str,
        direction: Direction,
        action: EventAction,
        f: impl Fn(f64, &[f64; D]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label, direction, action, f: Box::new(f) }
    }
}

/// Tolerances and guards for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Sup-norm threshold beyond which the run terminates with `BlowUp`.
    pub blowup_norm: f64,
    /// Cap on |t - t0| regardless of the requested span.
    pub max_time: f64,
    /// Width, in time, to which event and switching zeros are refined.
    pub event_tol: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-13,
            blowup_norm: 1e12,
            max_time: f64::INFINITY,
            event_tol: 1e-10,
        }
    }
}

impl IntegrationControls {
    /// Same controls with both tolerances scaled by `factor`.
    pub fn scaled_tol(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(Error::invalid("need 0 < min_step <= max_step"));
        }
        if !(self.event_tol > 0.0) {
            return Err(Error::invalid("event_tol must be positive"));
        }
        Ok(())
    }
}

/// One accepted state of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub branch: usize,
}

/// A located event or switching crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub label: &'static str,
}

/// Why the integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    HorizonReached,
    EventStop(&'static str),
    BlowUp(f64),
    StepCollapse(f64),
}

/// Integration output: accepted samples, located crossings, end cause.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub samples: Vec<StatePoint<D>>,
    pub events: Vec<EventHit<D>>,
    pub termination: Termination,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> &StatePoint<D> {
        self.samples.last().expect("trajectory always holds the initial state")
    }

    /// Hits of one labelled event/switching function, in time order.
    pub fn hits<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a EventHit<D>> + 'a {
        self.events.iter().filter(move |e| e.label == label)
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Coefficients of the 4th-order continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Step-control constants (Lund stabilization, as in classic DOPRI5).
const SAFE: f64 = 0.9;
const BETA_PI: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA_PI * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

const MAX_STEPS: usize = 50_000_000;
const N_SCAN: usize = 10;

struct StepResult<const D: usize> {
    y1: [f64; D],
    err: f64,
    k1: [f64; D],
    k: [[f64; D]; 7],
}

fn dp45_step<const D: usize>(
    rhs: &dyn Fn(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    h: f64,
    k1: [f64; D],
    rel_tol: f64,
    abs_tol: f64,
) -> StepResult<D> {
    let stage = |coeffs: &[(f64, usize)], k: &[[f64; D]; 7]| {
        let mut out = *y;
        for i in 0..D {
            let mut acc = 0.0;
            for &(c, j) in coeffs {
                acc += c * k[j][i];
            }
            out[i] += h * acc;
        }
        out
    };

    let mut k = [[0.0; D]; 7];
    k[0] = k1;
    k[1] = rhs(t + C2 * h, &stage(&[(A21, 0)], &k));
    k[2] = rhs(t + C3 * h, &stage(&[(A31, 0), (A32, 1)], &k));
    k[3] = rhs(t + C4 * h, &stage(&[(A41, 0), (A42, 1), (A43, 2)], &k));
    k[4] = rhs(t + C5 * h, &stage(&[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], &k));
    k[5] = rhs(t + h, &stage(&[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], &k));
    let y1 = stage(&[(B1, 0), (B3, 2), (B4, 3), (B5, 4), (B6, 5)], &k);
    k[6] = rhs(t + h, &y1);

    let mut err: f64 = 0.0;
    for i in 0..D {
        let e = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i]);
        let scale = abs_tol + rel_tol * y[i].abs().max(y1[i].abs());
        let w = e / scale;
        if w.is_nan() {
            err = f64::INFINITY;
            break;
        }
        err = err.max(w.abs());
    }
    if !y1.iter().all(|v| v.is_finite()) {
        err = f64::INFINITY;
    }
    StepResult { y1, err, k1, k }
}

/// Continuous extension of one accepted step.
struct DenseOutput<const D: usize> {
    t0: f64,
    h: f64,
    rc: [[f64; D]; 5],
}

impl<const D: usize> DenseOutput<D> {
    fn build(t0: f64, h: f64, y0: &[f64; D], res: &StepResult<D>) -> Self {
        let mut rc = [[0.0; D]; 5];
        for i in 0..D {
            let ydiff = res.y1[i] - y0[i];
            let bspl = h * res.k1[i] - ydiff;
            rc[0][i] = y0[i];
            rc[1][i] = ydiff;
            rc[2][i] = bspl;
            rc[3][i] = ydiff - h * res.k[6][i] - bspl;
            rc[4][i] = h
                * (D1 * res.k[0][i] + D3 * res.k[2][i] + D4 * res.k[3][i] + D5 * res.k[4][i]
                    + D6 * res.k[5][i] + D7 * res.k[6][i]);
        }
        Self { t0, h, rc }
    }

    fn at(&self, t: f64) -> [f64; D] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = self.rc[0][i]
                + th * (self.rc[1][i]
                    + th1 * (self.rc[2][i] + th * (self.rc[3][i] + th1 * self.rc[4][i])));
        }
        out
    }
}

/// Locates a root of `f` inside `bracket` by bisection, to width `tol`.
///
/// The bracket ends must carry opposite signs (an endpoint sitting exactly
/// on zero counts as the root).
pub fn refine_event(bracket: (f64, f64), f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = bracket;
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange(a, b));
    }
    let mut sa = fa.signum();
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
            sa = fm.signum();
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Clone, Copy, PartialEq)]
enum WatchKind {
    Switch(usize),
    Event(usize),
}

/// Integrates a piecewise field over `span`, locating every switching and
/// event crossing. `span` may run backward (`span.1 < span.0`).
pub fn integrate<const D: usize>(
    field: &PiecewiseField<D>,
    init: [f64; D],
    span: (f64, f64),
    events: &[Event<D>],
    controls: &IntegrationControls,
) -> Result<Trajectory<D>> {
    controls.validate()?;
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite() && t0 != t1) {
        return Err(Error::invalid("span must be a non-degenerate finite interval"));
    }
    if !init.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let dir = (t1 - t0).signum();
    let t_end = if (t1 - t0).abs() <= controls.max_time { t1 } else { t0 + dir * controls.max_time };

    let mut branch = field.branch_of(t0, &init);
    if branch >= field.branches.len() {
        return Err(Error::invalid(format!("no branch defined for the initial state (selector gave {branch})")));
    }

    let n_watch = field.switching.len() + events.len();
    let watch_value = |w: usize, t: f64, y: &[f64; D]| -> f64 {
        if w < field.switching.len() {
            (field.switching[w].f)(t, y)
        } else {
            (events[w - field.switching.len()].f)(t, y)
        }
    };
    let mut last_hit: Vec<Option<f64>> = vec![None; n_watch];
    for (w, slot) in last_hit.iter_mut().enumerate() {
        if watch_value(w, t0, &init) == 0.0 {
            *slot = Some(t0);
        }
    }

    let mut t = t0;
    let mut y = init;
    let mut samples = vec![StatePoint { t, y, branch }];
    let mut hits: Vec<EventHit<D>> = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    // Initial step size: conservative curvature-free guess, clamped to the
    // controls so that min_step == max_step forces fixed-step operation.
    let f0 = field.eval(branch, t, &y);
    let mut h = {
        let mut ynorm: f64 = 0.0;
        let mut fnorm: f64 = 0.0;
        for i in 0..D {
            ynorm = ynorm.max(y[i].abs());
            fnorm = fnorm.max(f0[i].abs());
        }
        let guess = if fnorm > 0.0 { 1e-2 * (ynorm + controls.abs_tol) / fnorm } else { 1e-2 };
        dir * guess
            .min((t_end - t0).abs() * 0.1)
            .min(controls.max_step)
            .max(controls.min_step)
    };
    let mut fsal: Option<[f64; D]> = Some(f0);
    let mut facold: f64 = 1e-4;
    let mut reject = false;

    for _ in 0..MAX_STEPS {
        if dir * (t_end - t) <= 0.0 {
            return Ok(Trajectory { samples, events: hits, termination: Termination::HorizonReached, steps_accepted: accepted, steps_rejected: rejected });
        }
        let mut last = false;
        if dir * h >= dir * (t_end - t) {
            h = t_end - t;
            last = true;
        }

        let rhs = &field.branches[branch];
        let k1 = match fsal.take() {
            Some(k) => k,
            None => rhs(t, &y),
        };
        let res = dp45_step(rhs.as_ref(), t, &y, h, k1, controls.rel_tol, controls.abs_tol);

        let fac11 = res.err.powf(EXPO1);
        if res.err <= 1.0 {
            // Accepted. Scan the dense output for the earliest crossing.
            let fac_pi = fac11 / facold.powf(BETA_PI);
            facold = res.err.max(1e-4);
            let dense = DenseOutput::build(t, h, &y, &res);
            let mut cut: Option<(f64, WatchKind, f64)> = None; // (t_c, kind, sign_before)
            for w in 0..n_watch {
                let dir_filter = if w < field.switching.len() {
                    Direction::Any
                } else {
                    events[w - field.switching.len()].direction
                };
                let mut prev_t = t;
                let mut prev_v = watch_value(w, t, &y);
                for j in 1..=N_SCAN {
                    let tj = if j == N_SCAN { t + h } else { t + h * (j as f64) / (N_SCAN as f64) };
                    let yj = if j == N_SCAN { res.y1 } else { dense.at(tj) };
                    let vj = watch_value(w, tj, &yj);
                    let crossing = prev_v != 0.0 && (vj == 0.0 || (prev_v.signum() != vj.signum() && !vj.is_nan()));
                    if crossing {
                        let wanted = match dir_filter {
                            Direction::Any => true,
                            Direction::Up => prev_v < 0.0,
                            Direction::Down => prev_v > 0.0,
                        };
                        if wanted {
                            let tc = refine_event(
                                (prev_t, tj),
                                |tt| watch_value(w, tt, &dense.at(tt)),
                                controls.event_tol,
                            )
                            .unwrap_or(tj);
                            let fresh = match last_hit[w] {
                                Some(prev_hit) => dir * (tc - prev_hit) > 4.0 * controls.event_tol,
                                None => true,
                            };
                            if fresh && cut.map_or(true, |(tb, _, _)| dir * tc < dir * tb) {
                                cut = Some((tc, if w < field.switching.len() { WatchKind::Switch(w) } else { WatchKind::Event(w - field.switching.len()) }, prev_v));
                            }
                            break;
                        }
                    }
                    prev_t = tj;
                    prev_v = vj;
                }
            }

            if let Some((tc, kind, _)) = cut {
                // Re-take the step up to the crossing so the state there is
                // full-order, then restart from it.
                let t_full = t + h;
                let hc = tc - t;
                let yc = if hc.abs() < 1e-3 * controls.event_tol {
                    y
                } else {
                    dp45_step(rhs.as_ref(), t, &y, hc, res.k1, controls.rel_tol, controls.abs_tol).y1
                };
                t = tc;
                y = yc;
                accepted += 1;
                match kind {
                    WatchKind::Switch(i) => {
                        last_hit[i] = Some(tc);
                        hits.push(EventHit { t: tc, y: yc, label: field.switching[i].label });
                        // Probe the dense output just past the crossing; that
                        // consistent (time, state) pair decides the new label.
                        let dt = {
                            let sub = h / (N_SCAN as f64);
                            let rem = t_full - tc;
                            0.5 * if rem.abs() < sub.abs() { rem } else { sub }
                        };
                        let y_probe = dense.at(tc + dt);
                        let new_branch = field.branch_of(tc + dt, &y_probe);
                        if new_branch >= field.branches.len() {
                            return Err(Error::invalid("switch led to an undefined branch"));
                        }
                        branch = new_branch;
                        samples.push(StatePoint { t, y, branch });
                    }
                    WatchKind::Event(i) => {
                        last_hit[field.switching.len() + i] = Some(tc);
                        samples.push(StatePoint { t, y, branch });
                        hits.push(EventHit { t: tc, y: yc, label: events[i].label });
                        if events[i].action == EventAction::Stop {
                            return Ok(Trajectory { samples, events: hits, termination: Termination::EventStop(events[i].label), steps_accepted: accepted, steps_rejected: rejected });
                        }
                    }
                }
                fsal = None;
                reject = false;
                continue;
            }

            // Plain accepted step.
            t = if last { t_end } else { t + h };
            y = res.y1;
            accepted += 1;
            // A missed crossing (selector disagrees at the endpoint without a
            // located zero) is adopted silently; the scan grid makes this rare.
            let end_branch = field.branch_of(t, &y);
            if end_branch != branch && end_branch < field.branches.len() {
                branch = end_branch;
                fsal = None;
            } else {
                fsal = Some(res.k[6]);
            }
            samples.push(StatePoint { t, y, branch });

            let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm > controls.blowup_norm {
                return Ok(Trajectory { samples, events: hits, termination: Termination::BlowUp(t), steps_accepted: accepted, steps_rejected: rejected });
            }

            let fac = (fac_pi / SAFE).max(1.0 / FAC_MAX).min(1.0 / FAC_MIN);
            let mut hnew = h / fac;
            if reject {
                hnew = dir * hnew.abs().min(h.abs());
            }
            reject = false;
            h = dir * hnew.abs().min(controls.max_step).max(controls.min_step);
        } else {
            // Rejected.
            rejected += 1;
            reject = true;
            let hnew = h / (fac11 / SAFE).min(1.0 / FAC_MIN);
            if hnew.abs() < controls.min_step {
                if h.abs() <= controls.min_step * 1.000001 {
                    return Ok(Trajectory { samples, events: hits, termination: Termination::StepCollapse(t), steps_accepted: accepted, steps_rejected: rejected });
                }
                h = dir * controls.min_step;
            } else {
                h = hnew;
            }
        }
    }
    Err(Error::Undetermined(format!("step budget exhausted at t = {t}")))
}
