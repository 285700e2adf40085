//! Adaptive Dormand–Prince 5(4) integration of the S/I system.
//!
//! Smooth responses are integrated directly. For step responses the state
//! space is split by the line `I = I*` into two smooth regimes; crossings are
//! located by bisection on the dense output of the accepted step, and the
//! integration restarts on the other side with the matching field. Since
//! `dI/dt` is continuous across the line, trajectories cross it everywhere
//! except at `(delta/beta, I*)`, which is either the sliding equilibrium or a
//! tangency continued with the field from below (`p_sp = 0, p_ps = 1`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{find_equilibria_continuous, find_equilibria_step, Equilibrium, EquilibriumKind};
use crate::model::{rates, ModelError, ModelParams, ResponseSpec, State, DOMAIN_SLACK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size collapsed to {h:e} at t = {t} (state {state:?})")]
    StepUnderflow { t: f64, h: f64, state: State },
    #[error("trajectory left the state space at t = {t}: {state:?}")]
    LeftDomain { t: f64, state: State },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state is not on the discontinuity line I = {i_star}")]
    NotOnLine { i_star: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    /// Crossing localisation tolerance, in time.
    pub event_tol: f64,
    /// Convergence radius for [`EventKind::ReachedEquilibrium`].
    pub equilibrium_eps: f64,
    /// Attempted steps before giving up with [`Outcome::StepLimit`].
    pub max_steps: u64,
    /// Keep every accepted step and every crossing. When `false` only the
    /// first and last samples and the terminal events are stored.
    pub keep_samples: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            t_max: 1e4,
            event_tol: 1e-10,
            equilibrium_eps: 1e-7,
            max_steps: 200_000_000,
            keep_samples: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("event_tol", self.event_tol),
            ("equilibrium_eps", self.equilibrium_eps),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IntegrateError::InvalidConfig(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    CrossUp,
    CrossDown,
    HitSliding,
    ReachedEquilibrium,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::CrossUp => "cross_up",
            Self::CrossDown => "cross_down",
            Self::HitSliding => "hit_sliding",
            Self::ReachedEquilibrium => "reached_equilibrium",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Equilibrium(EquilibriumKind),
    Horizon,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Number of crossings of the discontinuity line, recorded or not.
    pub crossings: u64,
    pub accepted_steps: u64,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn final_sample(&self) -> Sample {
        *self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn final_state(&self) -> State {
        self.final_sample().state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Smooth,
    Below,
    Above,
}

// Dormand–Prince 5(4) tableau with Hairer's dense output coefficients.
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.1;
const FAC_MAX: f64 = 5.0;
// PI step-size control as in Hairer's dopri5
const PI_BETA: f64 = 0.04;
const PI_EXPO: f64 = 0.2 - 0.75 * PI_BETA;
/// Interior probes per step used to bracket a crossing.
const PROBES: usize = 8;

type Vec2 = [f64; 2];

#[inline]
fn axpy(y: Vec2, terms: &[(f64, Vec2)], h: f64) -> Vec2 {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec2; 5],
}

impl Dense {
    #[inline]
    fn eval_component(&self, theta: f64, c: usize) -> f64 {
        let r = &self.coeffs;
        let t1 = 1.0 - theta;
        r[0][c] + theta * (r[1][c] + t1 * (r[2][c] + theta * (r[3][c] + t1 * r[4][c])))
    }

    /// Interpolated state at absolute time `t` (within the step).
    pub fn at(&self, t: f64) -> State {
        let theta = (t - self.t0) / self.h;
        State::new_unchecked(self.eval_component(theta, 0), self.eval_component(theta, 1))
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    kind: EquilibriumKind,
    point: State,
}

struct Solver<'a> {
    params: ModelParams,
    spec: &'a ResponseSpec,
    cfg: IntegratorConfig,
    i_star: Option<f64>,
    targets: Vec<Target>,
    sliding_admissible: bool,
    stop_at_equilibrium: bool,
}

/// Per-segment callback: dense output and the end time of the valid part.
trait StepSink {
    fn segment(&mut self, dense: &Dense, t_end: f64, y_end: State);
    fn event(&mut self, t: f64, kind: EventKind, y: State);
}

struct RunEnd {
    t: f64,
    y: State,
    outcome: Outcome,
    crossings: u64,
    accepted: u64,
}

impl<'a> Solver<'a> {
    fn new(
        params: &ModelParams,
        spec: &'a ResponseSpec,
        cfg: &IntegratorConfig,
    ) -> Result<Self, IntegrateError> {
        params.validate()?;
        spec.validate()?;
        cfg.validate()?;
        let i_star = spec.step_threshold();
        let (targets, sliding_admissible) = match i_star {
            Some(i_star) => {
                let eqs = find_equilibria_step(params, i_star)
                    .map_err(|e| IntegrateError::InvalidConfig(e.to_string()))?;
                let targets: Vec<Target> = eqs.admissible().map(target_of).collect();
                let sliding = eqs.conditions.x2_cond;
                (targets, sliding)
            }
            None => match find_equilibria_continuous(params, spec) {
                Ok(eqs) => (eqs.admissible().iter().map(target_of).collect(), false),
                Err(_) => (Vec::new(), false),
            },
        };
        Ok(Self {
            params: *params,
            spec,
            cfg: *cfg,
            i_star,
            targets,
            sliding_admissible,
            stop_at_equilibrium: true,
        })
    }

    #[inline]
    fn rhs(&self, regime: Regime, y: Vec2) -> Vec2 {
        let x = State::new_unchecked(y[0], y[1]);
        let (p_sp, p_ps) = match regime {
            Regime::Below => (0.0, 1.0),
            Regime::Above => (1.0, 0.0),
            Regime::Smooth => self.spec.select(y[1]),
        };
        let (ds, di) = rates(&self.params, x, p_sp, p_ps);
        [ds, di]
    }

    fn reached(&self, regime: Regime, y: State) -> Option<EquilibriumKind> {
        let eps = self.cfg.equilibrium_eps;
        self.targets.iter().find_map(|tgt| {
            if y.distance(&tgt.point) >= eps {
                return None;
            }
            if tgt.kind == EquilibriumKind::Sliding {
                // the Filippov set contains zero there; one-sided fields do not vanish
                return Some(tgt.kind);
            }
            let f = self.rhs(regime, [y.s, y.i]);
            (f[0].hypot(f[1]) < eps).then_some(tgt.kind)
        })
    }

    /// Regime to use from a point exactly on the line; `None` means the point
    /// is the sliding equilibrium.
    fn regime_on_line(&self, y: State, i_star: f64) -> Option<Regime> {
        let di = i_star * (self.params.beta * y.s - self.params.delta);
        if di > 0.0 {
            Some(Regime::Above)
        } else if di < 0.0 {
            Some(Regime::Below)
        } else if self.sliding_admissible {
            None
        } else {
            Some(Regime::Below)
        }
    }

    fn initial_step(&self, y: Vec2, f: Vec2) -> f64 {
        let sc = |c: usize| self.cfg.abs_tol + self.cfg.rel_tol * y[c].abs();
        let d0 = ((y[0] / sc(0)).powi(2) + (y[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let d1 = ((f[0] / sc(0)).powi(2) + (f[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(self.cfg.t_max).max(1e-12 * self.cfg.t_max)
    }

    fn run(&self, x0: State, sink: &mut impl StepSink) -> Result<RunEnd, IntegrateError> {
        let cfg = &self.cfg;
        let mut t = 0.0_f64;
        let mut y = x0;
        let mut crossings = 0u64;
        let mut accepted = 0u64;
        let mut attempts = 0u64;

        let mut regime = match self.i_star {
            None => Regime::Smooth,
            Some(i_star) if y.i < i_star => Regime::Below,
            Some(i_star) if y.i > i_star => Regime::Above,
            Some(i_star) => match self.regime_on_line(y, i_star) {
                None => {
                    sink.event(0.0, EventKind::HitSliding, y);
                    sink.event(0.0, EventKind::ReachedEquilibrium, y);
                    return Ok(RunEnd {
                        t,
                        y,
                        outcome: Outcome::Equilibrium(EquilibriumKind::Sliding),
                        crossings,
                        accepted,
                    });
                }
                Some(r) => {
                    let kind = if r == Regime::Above {
                        EventKind::CrossUp
                    } else {
                        EventKind::CrossDown
                    };
                    sink.event(0.0, kind, y);
                    r
                }
            },
        };
        let mut on_line = self.i_star == Some(y.i);

        if self.stop_at_equilibrium {
            if let Some(kind) = self.reached(regime, y) {
                sink.event(t, EventKind::ReachedEquilibrium, y);
                return Ok(RunEnd {
                    t,
                    y,
                    outcome: Outcome::Equilibrium(kind),
                    crossings,
                    accepted,
                });
            }
        }

        let mut yv = [y.s, y.i];
        let mut k1 = self.rhs(regime, yv);
        let mut h = self.initial_step(yv, k1);
        let mut last_cross_t = 0.0_f64;
        let h_floor = 1e-14 * cfg.t_max;
        let mut err_old = 1e-4_f64;

        while t < cfg.t_max {
            attempts += 1;
            if attempts > cfg.max_steps {
                return Ok(RunEnd {
                    t,
                    y,
                    outcome: Outcome::StepLimit,
                    crossings,
                    accepted,
                });
            }
            if h < h_floor {
                return Err(IntegrateError::StepUnderflow { t, h, state: y });
            }
            let h_try = h.min(cfg.t_max - t);

            let k2 = self.rhs(regime, axpy(yv, &[(A21, k1)], h_try));
            let k3 = self.rhs(regime, axpy(yv, &[(A31, k1), (A32, k2)], h_try));
            let k4 = self.rhs(regime, axpy(yv, &[(A41, k1), (A42, k2), (A43, k3)], h_try));
            let k5 = self.rhs(
                regime,
                axpy(yv, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h_try),
            );
            let k6 = self.rhs(
                regime,
                axpy(
                    yv,
                    &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                    h_try,
                ),
            );
            let y1 = axpy(
                yv,
                &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
                h_try,
            );
            let k7 = self.rhs(regime, y1);

            let mut err_sq = 0.0;
            for c in 0..2 {
                let e = h_try * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]);
                let sc = cfg.abs_tol + cfg.rel_tol * yv[c].abs().max(y1[c].abs());
                err_sq += (e / sc).powi(2);
            }
            let err = (err_sq / 2.0).sqrt();
            if !err.is_finite() || err > 1.0 {
                let fac = if err.is_finite() {
                    (SAFETY * err.powf(-PI_EXPO)).max(FAC_MIN)
                } else {
                    FAC_MIN
                };
                h = h_try * fac;
                continue;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-PI_EXPO) * err_old.powf(PI_BETA)).clamp(FAC_MIN, FAC_MAX)
            };
            err_old = err.max(1e-4);

            let mut coeffs = [[0.0; 2]; 5];
            for c in 0..2 {
                let ydiff = y1[c] - yv[c];
                let bspl = h_try * k1[c] - ydiff;
                coeffs[0][c] = yv[c];
                coeffs[1][c] = ydiff;
                coeffs[2][c] = bspl;
                coeffs[3][c] = ydiff - h_try * k7[c] - bspl;
                coeffs[4][c] =
                    h_try * (D1 * k1[c] + D3 * k3[c] + D4 * k4[c] + D5 * k5[c] + D6 * k6[c] + D7 * k7[c]);
            }
            let dense = Dense {
                t0: t,
                h: h_try,
                coeffs,
            };

            if let (Some(i_star), Regime::Below | Regime::Above) = (self.i_star, regime) {
                let sigma = if regime == Regime::Above { 1.0 } else { -1.0 };
                let g = |theta: f64| sigma * (dense.eval_component(theta, 1) - i_star);
                let mut lo = 0.0;
                let mut bracket = None;
                for k in 1..=PROBES {
                    let theta = k as f64 / PROBES as f64;
                    if g(theta) <= 0.0 {
                        bracket = Some((lo, theta));
                        break;
                    }
                    lo = theta;
                }
                if let Some((mut lo, mut hi)) = bracket {
                    if lo == 0.0 && on_line {
                        // left the line and came back within the first probe
                        h = h_try / (2.0 * PROBES as f64);
                        continue;
                    }
                    let theta_tol = cfg.event_tol / h_try;
                    while hi - lo > theta_tol {
                        let mid = 0.5 * (lo + hi);
                        if g(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let tc = t + hi * h_try;
                    let yc = State::new_unchecked(dense.eval_component(hi, 0), i_star);
                    if !yc.in_domain(DOMAIN_SLACK) {
                        return Err(IntegrateError::LeftDomain { t: tc, state: yc });
                    }
                    let yc = yc.clipped();
                    let yc = State::new_unchecked(yc.s, i_star);
                    accepted += 1;
                    sink.segment(&dense, tc, yc);
                    crossings += 1;
                    let half = tc - last_cross_t;
                    last_cross_t = tc;
                    t = tc;
                    y = yc;
                    on_line = true;
                    match self.regime_on_line(yc, i_star) {
                        None => {
                            sink.event(t, EventKind::HitSliding, y);
                            sink.event(t, EventKind::ReachedEquilibrium, y);
                            return Ok(RunEnd {
                                t,
                                y,
                                outcome: Outcome::Equilibrium(EquilibriumKind::Sliding),
                                crossings,
                                accepted,
                            });
                        }
                        Some(next) => {
                            if next != regime {
                                let kind = if next == Regime::Above {
                                    EventKind::CrossUp
                                } else {
                                    EventKind::CrossDown
                                };
                                sink.event(t, kind, y);
                                regime = next;
                            }
                        }
                    }
                    yv = [y.s, y.i];
                    k1 = self.rhs(regime, yv);
                    if self.stop_at_equilibrium {
                        if let Some(kind) = self.reached(regime, y) {
                            sink.event(t, EventKind::ReachedEquilibrium, y);
                            return Ok(RunEnd {
                                t,
                                y,
                                outcome: Outcome::Equilibrium(kind),
                                crossings,
                                accepted,
                            });
                        }
                    }
                    // the next half-orbit is about as long as the last one
                    h = (h_try * fac).min(2.0 * half.max(h_floor));
                    continue;
                }
            }

            let next = State::new_unchecked(y1[0], y1[1]);
            if !next.in_domain(DOMAIN_SLACK) {
                return Err(IntegrateError::LeftDomain {
                    t: t + h_try,
                    state: next,
                });
            }
            let next = next.clipped();
            t += h_try;
            accepted += 1;
            sink.segment(&dense, t, next);
            on_line = false;
            if next.s != y1[0] || next.i != y1[1] {
                yv = [next.s, next.i];
                k1 = self.rhs(regime, yv);
            } else {
                yv = y1;
                k1 = k7;
            }
            y = next;
            if self.stop_at_equilibrium {
                if let Some(kind) = self.reached(regime, y) {
                    sink.event(t, EventKind::ReachedEquilibrium, y);
                    return Ok(RunEnd {
                        t,
                        y,
                        outcome: Outcome::Equilibrium(kind),
                        crossings,
                        accepted,
                    });
                }
            }
            h = h_try * fac;
        }
        Ok(RunEnd {
            t,
            y,
            outcome: Outcome::Horizon,
            crossings,
            accepted,
        })
    }
}

fn target_of(e: &Equilibrium) -> Target {
    Target {
        kind: e.kind,
        point: e.point,
    }
}

struct Recorder {
    keep: bool,
    samples: Vec<Sample>,
    events: Vec<Event>,
}

impl StepSink for Recorder {
    fn segment(&mut self, _dense: &Dense, t_end: f64, y_end: State) {
        if self.keep {
            self.samples.push(Sample {
                t: t_end,
                state: y_end,
            });
        }
    }

    fn event(&mut self, t: f64, kind: EventKind, _y: State) {
        let terminal = matches!(kind, EventKind::ReachedEquilibrium | EventKind::HitSliding);
        if self.keep || terminal {
            self.events.push(Event { t, kind });
        }
    }
}

/// Integrates from `x0` until an admissible equilibrium is reached (within
/// `equilibrium_eps`) or `t_max` elapses.
pub fn integrate(
    params: &ModelParams,
    spec: &ResponseSpec,
    x0: State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    if !x0.in_domain(DOMAIN_SLACK) {
        return Err(ModelError::OutsideDomain { s: x0.s, i: x0.i }.into());
    }
    let x0 = x0.clipped();
    let solver = Solver::new(params, spec, cfg)?;
    let mut rec = Recorder {
        keep: cfg.keep_samples,
        samples: vec![Sample { t: 0.0, state: x0 }],
        events: Vec::new(),
    };
    let end = solver.run(x0, &mut rec)?;
    if !cfg.keep_samples && end.t > 0.0 {
        rec.samples.push(Sample {
            t: end.t,
            state: end.y,
        });
    }
    Ok(Trajectory {
        samples: rec.samples,
        events: rec.events,
        crossings: end.crossings,
        accepted_steps: end.accepted,
        outcome: end.outcome,
    })
}

/// Integration started on the discontinuity line of the step response
/// with threshold `i_star`.
pub fn integrate_sliding(
    params: &ModelParams,
    i_star: f64,
    x0: State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    if x0.i != i_star {
        return Err(IntegrateError::NotOnLine { i_star });
    }
    integrate(params, &ResponseSpec::step(i_star), x0, cfg)
}

/// Solution values at the given non-decreasing output times in `[0, t_max]`,
/// from the dense output. Equilibria do not stop the integration.
pub fn integrate_at(
    params: &ModelParams,
    spec: &ResponseSpec,
    x0: State,
    cfg: &IntegratorConfig,
    times: &[f64],
) -> Result<Vec<State>, IntegrateError> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(IntegrateError::InvalidConfig(
            "output times must be sorted".into(),
        ));
    }
    if let Some(&last) = times.last() {
        if last > cfg.t_max || times[0] < 0.0 {
            return Err(IntegrateError::InvalidConfig(
                "output times must lie in [0, t_max]".into(),
            ));
        }
    }
    if !x0.in_domain(DOMAIN_SLACK) {
        return Err(ModelError::OutsideDomain { s: x0.s, i: x0.i }.into());
    }
    let x0 = x0.clipped();
    let mut solver = Solver::new(params, spec, cfg)?;
    solver.stop_at_equilibrium = false;

    struct AtTimes<'t> {
        times: &'t [f64],
        next: usize,
        out: Vec<State>,
    }
    impl StepSink for AtTimes<'_> {
        fn segment(&mut self, dense: &Dense, t_end: f64, y_end: State) {
            while self.next < self.times.len() && self.times[self.next] <= t_end {
                let t = self.times[self.next];
                let x = if t == t_end { y_end } else { dense.at(t) };
                self.out.push(x.clipped());
                self.next += 1;
            }
        }
        fn event(&mut self, _t: f64, _kind: EventKind, _y: State) {}
    }

    let mut sink = AtTimes {
        times,
        next: 0,
        out: Vec::with_capacity(times.len()),
    };
    while sink.next < times.len() && times[sink.next] <= 0.0 {
        sink.out.push(x0);
        sink.next += 1;
    }
    let end = solver.run(x0, &mut sink)?;
    // a run can only stop early at the sliding point, where it rests
    while sink.out.len() < times.len() {
        sink.out.push(end.y);
    }
    Ok(sink.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(beta: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::new(beta, gamma, delta).unwrap()
    }

    #[test]
    fn sir_peak_at_threshold_susceptibility() {
        let p = params(1.0, 0.0, 0.5);
        let cfg = IntegratorConfig {
            t_max: 60.0,
            ..Default::default()
        };
        let times: Vec<f64> = (0..=600_000).map(|k| k as f64 * 1e-4).collect();
        let xs = integrate_at(
            &p,
            &ResponseSpec::step(1.0),
            State::new(0.99, 0.01).unwrap(),
            &cfg,
            &times,
        )
        .unwrap();
        let (k_max, _) = xs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.i.total_cmp(&b.1.i))
            .unwrap();
        assert_abs_diff_eq!(xs[k_max].s, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn infection_free_start_goes_to_disease_free() {
        let p = params(1.0, 1.0, 0.5);
        let traj = integrate(
            &p,
            &ResponseSpec::step(0.2),
            State::new(0.3, 0.0).unwrap(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(traj.outcome, Outcome::Equilibrium(EquilibriumKind::DiseaseFree));
        assert!(traj.samples.iter().all(|s| s.state.i == 0.0));
        let end = traj.final_state();
        assert!(end.distance(&State::new_unchecked(1.0, 0.0)) < 1e-7);
    }

    #[test]
    fn converges_to_sliding_equilibrium() {
        let p = params(1.0, 1.0, 0.5);
        let cfg = IntegratorConfig {
            equilibrium_eps: 1e-6,
            keep_samples: false,
            ..Default::default()
        };
        let traj = integrate(&p, &ResponseSpec::step(0.2), State::new(0.9, 0.05).unwrap(), &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::Equilibrium(EquilibriumKind::Sliding));
        assert!(traj.final_state().distance(&State::new_unchecked(0.5, 0.2)) <= 1e-6);
        assert!(traj.crossings > 100);
    }

    #[test]
    fn sliding_starts() {
        let p = params(1.0, 1.0, 0.5);
        let cfg = IntegratorConfig::default();
        let rest = integrate_sliding(&p, 0.2, State::new(0.5, 0.2).unwrap(), &cfg).unwrap();
        assert_eq!(rest.events[0].kind, EventKind::HitSliding);
        assert_eq!(rest.final_state(), State::new_unchecked(0.5, 0.2));
        assert_eq!(rest.outcome, Outcome::Equilibrium(EquilibriumKind::Sliding));

        let up = integrate_sliding(&p, 0.2, State::new(0.7, 0.2).unwrap(), &cfg).unwrap();
        assert_eq!(
            up.events[0],
            Event {
                t: 0.0,
                kind: EventKind::CrossUp
            }
        );
        assert!(up.samples[1].state.i > 0.2);

        let down = integrate_sliding(&p, 0.2, State::new(0.3, 0.2).unwrap(), &cfg).unwrap();
        assert_eq!(
            down.events[0],
            Event {
                t: 0.0,
                kind: EventKind::CrossDown
            }
        );
        assert!(down.samples[1].state.i < 0.2);

        assert!(integrate_sliding(&p, 0.2, State::new(0.3, 0.1).unwrap(), &cfg).is_err());
    }

    #[test]
    fn tangency_without_sliding_point_continues_below() {
        // X2 inadmissible: 1/3 < 0.4
        let p = params(1.0, 1.0, 0.5);
        let traj = integrate_sliding(
            &p,
            0.4,
            State::new(0.5, 0.4).unwrap(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.events[0].kind, EventKind::CrossDown);
        assert!(traj.samples[1].state.i < 0.4);
        assert_eq!(traj.outcome, Outcome::Equilibrium(EquilibriumKind::Endemic));
    }

    #[test]
    fn crossings_alternate_and_sides_are_consistent() {
        let p = params(1.0, 1.0, 0.5);
        let i_star = 0.2;
        let cfg = IntegratorConfig {
            t_max: 30.0,
            ..Default::default()
        };
        let traj = integrate(
            &p,
            &ResponseSpec::step(i_star),
            State::new(0.9, 0.05).unwrap(),
            &cfg,
        )
        .unwrap();
        let crosses: Vec<&Event> = traj
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::CrossUp | EventKind::CrossDown))
            .collect();
        assert!(crosses.len() > 4);
        for w in crosses.windows(2) {
            assert_ne!(w[0].kind, w[1].kind);
        }
        // between events, samples stay on one side
        let mut side = -1.0;
        let mut ev = crosses.iter().peekable();
        for s in &traj.samples[1..] {
            while let Some(e) = ev.peek() {
                if e.t <= s.t {
                    side = if e.kind == EventKind::CrossUp { 1.0 } else { -1.0 };
                    ev.next();
                } else {
                    break;
                }
            }
            assert!(
                side * (s.state.i - i_star) >= -1e-12,
                "sample {s:?} on wrong side"
            );
        }
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let p = params(1.0, 1.0, 0.5);
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(&p, &ResponseSpec::step(0.2), State::new(0.5, 0.1).unwrap(), &cfg),
            Err(IntegrateError::InvalidConfig(_))
        ));
        assert!(integrate(
            &p,
            &ResponseSpec::step(0.2),
            State::new_unchecked(0.9, 0.5),
            &IntegratorConfig::default()
        )
        .is_err());
    }

    #[test]
    fn step_limit_reported() {
        let p = params(1.0, 1.0, 0.5);
        let cfg = IntegratorConfig {
            max_steps: 10,
            ..Default::default()
        };
        let traj = integrate(&p, &ResponseSpec::step(0.5), State::new(0.9, 0.05).unwrap(), &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::StepLimit);
    }
}
