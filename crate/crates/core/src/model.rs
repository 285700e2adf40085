//! Rates, states, user response functions and the (possibly set-valued)
//! vector field of the two-dimensional S/I system.
//!
//! The protected fraction is never stored: `P = 1 - S - I`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when checking membership of the simplex `D`.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Tolerance on the sum of class weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid rate `{name}` = {value}: {reason}")]
    InvalidRate {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("state ({s}, {i}) lies outside the simplex")]
    OutsideDomain { s: f64, i: f64 },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid class layout: {0}")]
    InvalidClasses(String),
}

/// Per-user event rates: meetings (`beta`), state-report updates (`gamma`)
/// and disinfection opportunities (`delta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, delta: f64) -> Result<Self, ModelError> {
        let params = Self { beta, gamma, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name, value: f64, strict: bool| {
            if !value.is_finite() {
                return Err(ModelError::InvalidRate {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if strict && value <= 0.0 {
                return Err(ModelError::InvalidRate {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
            if value < 0.0 {
                return Err(ModelError::InvalidRate {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
            Ok(())
        };
        check("beta", self.beta, true)?;
        check("gamma", self.gamma, false)?;
        check("delta", self.delta, true)
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    /// `delta / beta`: the susceptible fraction at which `dI/dt` changes sign.
    pub fn s_threshold(&self) -> f64 {
        self.delta / self.beta
    }

    /// Infected fraction of the SIRS-type endemic point,
    /// `(1 - delta/beta) / (1 + delta/gamma)`, written so that `gamma = 0`
    /// yields zero instead of a division by zero.
    pub fn sirs_endemic_infected(&self) -> f64 {
        self.gamma * (1.0 - self.s_threshold()) / (self.gamma + self.delta)
    }
}

/// A point `(S, I)` of the simplex `D = {S, I >= 0, S + I <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub i: f64,
}

impl State {
    /// Validates membership of `D` (with [`DOMAIN_SLACK`]) and clips into it.
    pub fn new(s: f64, i: f64) -> Result<Self, ModelError> {
        let state = Self { s, i };
        if !state.in_domain(DOMAIN_SLACK) {
            return Err(ModelError::OutsideDomain { s, i });
        }
        Ok(state.clipped())
    }

    /// Builds a state without any check. Callers must guarantee membership.
    pub const fn new_unchecked(s: f64, i: f64) -> Self {
        Self { s, i }
    }

    pub fn p(&self) -> f64 {
        1.0 - self.s - self.i
    }

    pub fn in_domain(&self, slack: f64) -> bool {
        self.s.is_finite()
            && self.i.is_finite()
            && self.s >= -slack
            && self.i >= -slack
            && self.s + self.i <= 1.0 + slack
    }

    /// Projects onto `D`; only meaningful for points within the slack.
    pub fn clipped(self) -> Self {
        let mut s = self.s.clamp(0.0, 1.0);
        let mut i = self.i.clamp(0.0, 1.0);
        let excess = s + i - 1.0;
        if excess > 0.0 {
            // split the overshoot proportionally
            let total = s + i;
            s -= excess * s / total;
            i -= excess * i / total;
        }
        Self { s, i }
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.s - other.s).hypot(self.i - other.i)
    }
}

/// One `(I, p_SP, p_PS)` sample of a tabulated response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Knot {
    pub i: f64,
    pub p_sp: f64,
    pub p_ps: f64,
}

impl From<[f64; 3]> for Knot {
    fn from([i, p_sp, p_ps]: [f64; 3]) -> Self {
        Self { i, p_sp, p_ps }
    }
}

impl From<Knot> for [f64; 3] {
    fn from(k: Knot) -> Self {
        [k.i, k.p_sp, k.p_ps]
    }
}

/// How users in the `S` and `P` compartments react to an update that
/// reports the current infected fraction `I`.
///
/// `p_sp` is the probability that a susceptible user protects itself,
/// `p_ps` the probability that a protected user drops its protection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseSpec {
    /// Strict cost minimisers with threshold `I* = c_P / c_I`.
    Step {
        i_star: f64,
    },
    /// Linear ramp of width `epsilon` centred on `i_star`; `p_ps = 1 - p_sp`.
    Sigmoid {
        i_star: f64,
        epsilon: f64,
    },
    /// Piecewise linear through the knots, clamped outside their range.
    Tabulated {
        knots: Vec<Knot>,
    },
    Constant {
        p_sp: f64,
        p_ps: f64,
    },
}

/// Closed probability interval; a point when `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Value of a response at some `I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub p_sp: Interval,
    pub p_ps: Interval,
}

impl ResponseSpec {
    pub fn step(i_star: f64) -> Self {
        Self::Step { i_star }
    }

    pub fn sigmoid(i_star: f64, epsilon: f64) -> Self {
        Self::Sigmoid { i_star, epsilon }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidResponse(msg));
        match self {
            Self::Step { i_star } => {
                if !(*i_star > 0.0 && *i_star <= 1.0) {
                    return bad(format!("step threshold {i_star} not in (0, 1]"));
                }
            }
            Self::Sigmoid { i_star, epsilon } => {
                if !i_star.is_finite() {
                    return bad(format!("sigmoid threshold {i_star} not finite"));
                }
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return bad(format!("sigmoid ramp width {epsilon} must be positive"));
                }
            }
            Self::Tabulated { knots } => {
                if knots.is_empty() {
                    return bad("tabulated response needs at least one knot".into());
                }
                for k in knots {
                    if !(0.0..=1.0).contains(&k.p_sp) || !(0.0..=1.0).contains(&k.p_ps) {
                        return bad(format!("knot at I = {} has a probability outside [0, 1]", k.i));
                    }
                    if !k.i.is_finite() {
                        return bad("knot abscissa not finite".into());
                    }
                }
                for w in knots.windows(2) {
                    if w[1].i <= w[0].i {
                        return bad("knot abscissae must be strictly increasing".into());
                    }
                    if w[1].p_sp < w[0].p_sp {
                        return bad(format!("p_sp decreases between I = {} and {}", w[0].i, w[1].i));
                    }
                    if w[1].p_ps > w[0].p_ps {
                        return bad(format!("p_ps increases between I = {} and {}", w[0].i, w[1].i));
                    }
                }
            }
            Self::Constant { p_sp, p_ps } => {
                if !(0.0..=1.0).contains(p_sp) || !(0.0..=1.0).contains(p_ps) {
                    return bad("constant response probabilities must lie in [0, 1]".into());
                }
            }
        }
        Ok(())
    }

    /// `true` unless the response is the multivalued best response.
    pub fn is_single_valued(&self) -> bool {
        !matches!(self, Self::Step { .. })
    }

    pub fn step_threshold(&self) -> Option<f64> {
        match self {
            Self::Step { i_star } => Some(*i_star),
            _ => None,
        }
    }

    /// Single-valued selection. At the indifference point of a step response
    /// the canonical `(p_sp, p_ps) = (0, 1)` is used.
    pub fn select(&self, i: f64) -> (f64, f64) {
        match self {
            Self::Step { i_star } => {
                if i > *i_star {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
            Self::Sigmoid { i_star, epsilon } => {
                let p = sigmoid_ramp(*i_star, *epsilon, i);
                (p, 1.0 - p)
            }
            Self::Tabulated { knots } => {
                let (p_sp, p_ps, _, _) = tabulated(knots, i);
                (p_sp, p_ps)
            }
            Self::Constant { p_sp, p_ps } => (*p_sp, *p_ps),
        }
    }

    /// Derivatives `(dp_sp/dI, dp_ps/dI)`; at kinks the slope to the right
    /// is returned. Step responses are flat away from the threshold.
    pub fn slopes(&self, i: f64) -> (f64, f64) {
        match self {
            Self::Step { .. } | Self::Constant { .. } => (0.0, 0.0),
            Self::Sigmoid { i_star, epsilon } => {
                let lo = i_star - epsilon / 2.0;
                let hi = i_star + epsilon / 2.0;
                if i >= lo && i < hi {
                    (1.0 / epsilon, -1.0 / epsilon)
                } else {
                    (0.0, 0.0)
                }
            }
            Self::Tabulated { knots } => {
                let (_, _, d_sp, d_ps) = tabulated(knots, i);
                (d_sp, d_ps)
            }
        }
    }
}

fn sigmoid_ramp(i_star: f64, epsilon: f64, i: f64) -> f64 {
    ((i - i_star + epsilon / 2.0) / epsilon).clamp(0.0, 1.0)
}

/// Interpolated values and right slopes of a tabulated response.
fn tabulated(knots: &[Knot], i: f64) -> (f64, f64, f64, f64) {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if i < first.i {
        return (first.p_sp, first.p_ps, 0.0, 0.0);
    }
    if i >= last.i {
        return (last.p_sp, last.p_ps, 0.0, 0.0);
    }
    // index of the segment [k, k + 1] with knots[k].i <= i < knots[k + 1].i
    let k = knots.partition_point(|kn| kn.i <= i) - 1;
    let (a, b) = (knots[k], knots[k + 1]);
    let w = (i - a.i) / (b.i - a.i);
    let d_sp = (b.p_sp - a.p_sp) / (b.i - a.i);
    let d_ps = (b.p_ps - a.p_ps) / (b.i - a.i);
    (
        a.p_sp + w * (b.p_sp - a.p_sp),
        a.p_ps + w * (b.p_ps - a.p_ps),
        d_sp,
        d_ps,
    )
}

/// Evaluates the response at `i`. Only a step response at its threshold
/// returns non-degenerate intervals.
pub fn eval_response(spec: &ResponseSpec, i: f64) -> Response {
    match spec {
        ResponseSpec::Step { i_star } if i == *i_star => Response {
            p_sp: Interval::UNIT,
            p_ps: Interval::UNIT,
        },
        _ => {
            let (p_sp, p_ps) = spec.select(i);
            Response {
                p_sp: Interval::point(p_sp),
                p_ps: Interval::point(p_ps),
            }
        }
    }
}

/// Right-hand side of the system for a chosen pair of switching
/// probabilities.
#[inline]
pub fn rates(params: &ModelParams, x: State, p_sp: f64, p_ps: f64) -> (f64, f64) {
    let contact = params.beta * x.s * x.i;
    let ds = -contact - params.gamma * x.s * p_sp + params.gamma * x.p() * p_ps;
    let di = contact - params.delta * x.i;
    (ds, di)
}

/// The value of the vector field: a point, or on the discontinuity line of a
/// step response the segment of admissible `dS/dt` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldValue {
    Point { ds: f64, di: f64 },
    Segment { ds_lo: f64, ds_hi: f64, di: f64 },
}

impl FieldValue {
    pub fn di(&self) -> f64 {
        match *self {
            Self::Point { di, .. } | Self::Segment { di, .. } => di,
        }
    }

    /// `dS/dt` of the element of smallest norm.
    pub fn min_norm_ds(&self) -> f64 {
        match *self {
            Self::Point { ds, .. } => ds,
            Self::Segment { ds_lo, ds_hi, .. } => 0.0_f64.clamp(ds_lo, ds_hi),
        }
    }

    /// Euclidean norm of the smallest element of the set.
    pub fn min_norm(&self) -> f64 {
        self.min_norm_ds().hypot(self.di())
    }

    /// Whether the zero vector lies in the set, up to `tol` per component.
    pub fn contains_zero(&self, tol: f64) -> bool {
        match *self {
            Self::Point { ds, di } => ds.abs() <= tol && di.abs() <= tol,
            Self::Segment { ds_lo, ds_hi, di } => ds_lo - tol <= 0.0 && 0.0 <= ds_hi + tol && di.abs() <= tol,
        }
    }
}

/// Evaluates `(dS/dt, dI/dt)` at `x`.
pub fn field(params: &ModelParams, spec: &ResponseSpec, x: State) -> FieldValue {
    let r = eval_response(spec, x.i);
    field_from_response(params, x, r)
}

fn field_from_response(params: &ModelParams, x: State, r: Response) -> FieldValue {
    if r.p_sp.is_point() && r.p_ps.is_point() {
        let (ds, di) = rates(params, x, r.p_sp.lo, r.p_ps.lo);
        return FieldValue::Point { ds, di };
    }
    // dS/dt is decreasing in p_sp and increasing in p_ps
    let (ds_lo, di) = rates(params, x, r.p_sp.hi, r.p_ps.lo);
    let (ds_hi, _) = rates(params, x, r.p_sp.lo, r.p_ps.hi);
    FieldValue::Segment { ds_lo, ds_hi, di }
}

/// One user class: its share of the population and its response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub weight: f64,
    pub response: ResponseSpec,
}

pub fn validate_classes(classes: &[ClassSpec]) -> Result<(), ModelError> {
    if classes.is_empty() {
        return Err(ModelError::InvalidClasses("no classes given".into()));
    }
    for (c, class) in classes.iter().enumerate() {
        if !(class.weight > 0.0 && class.weight <= 1.0) {
            return Err(ModelError::InvalidClasses(format!(
                "class {c} weight {} not in (0, 1]",
                class.weight
            )));
        }
        class.response.validate()?;
    }
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(ModelError::InvalidClasses(format!(
            "class weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Per-class `(S_c, I_c)`, both measured as fractions of the whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassState {
    pub classes: Vec<State>,
}

impl MultiClassState {
    pub fn new(classes: Vec<State>, specs: &[ClassSpec]) -> Result<Self, ModelError> {
        if classes.len() != specs.len() {
            return Err(ModelError::InvalidClasses(format!(
                "{} class states for {} classes",
                classes.len(),
                specs.len()
            )));
        }
        for (x, spec) in classes.iter().zip(specs) {
            if x.s < -DOMAIN_SLACK || x.i < -DOMAIN_SLACK || x.s + x.i > spec.weight + DOMAIN_SLACK {
                return Err(ModelError::OutsideDomain { s: x.s, i: x.i });
            }
        }
        let state = Self { classes };
        let total = state.total();
        if !total.in_domain(DOMAIN_SLACK) {
            return Err(ModelError::OutsideDomain {
                s: total.s,
                i: total.i,
            });
        }
        Ok(state)
    }

    pub fn total(&self) -> State {
        let (s, i) = self
            .classes
            .iter()
            .fold((0.0, 0.0), |(s, i), x| (s + x.s, i + x.i));
        State::new_unchecked(s, i)
    }
}

/// Per-class rates. Every class reacts to the aggregate infected fraction and
/// is infected by infected users of any class.
pub fn field_multiclass(
    params: &ModelParams,
    specs: &[ClassSpec],
    x: &MultiClassState,
) -> Result<Vec<FieldValue>, ModelError> {
    if specs.len() != x.classes.len() {
        return Err(ModelError::InvalidClasses(format!(
            "{} class states for {} classes",
            x.classes.len(),
            specs.len()
        )));
    }
    let i_total = x.total().i;
    Ok(specs
        .iter()
        .zip(&x.classes)
        .map(|(spec, xc)| {
            let r = eval_response(&spec.response, i_total);
            let protected = spec.weight - xc.s - xc.i;
            let ds_at = |p_sp: f64, p_ps: f64| {
                -params.beta * xc.s * i_total - params.gamma * xc.s * p_sp + params.gamma * protected * p_ps
            };
            let di = params.beta * xc.s * i_total - params.delta * xc.i;
            if r.p_sp.is_point() && r.p_ps.is_point() {
                FieldValue::Point {
                    ds: ds_at(r.p_sp.lo, r.p_ps.lo),
                    di,
                }
            } else {
                FieldValue::Segment {
                    ds_lo: ds_at(r.p_sp.hi, r.p_ps.lo),
                    ds_hi: ds_at(r.p_sp.lo, r.p_ps.hi),
                    di,
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(beta: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::new(beta, gamma, delta).unwrap()
    }

    #[test]
    fn step_response_values() {
        let spec = ResponseSpec::step(0.5);
        let below = eval_response(&spec, 0.3);
        assert_eq!(below.p_sp, Interval::point(0.0));
        assert_eq!(below.p_ps, Interval::point(1.0));
        let at = eval_response(&spec, 0.5);
        assert_eq!(at.p_sp, Interval::UNIT);
        assert_eq!(at.p_ps, Interval::UNIT);
        let above = eval_response(&spec, 0.7);
        assert_eq!(above.p_sp, Interval::point(1.0));
        assert_eq!(above.p_ps, Interval::point(0.0));
    }

    #[test]
    fn sigmoid_response_values() {
        let mid = eval_response(&ResponseSpec::sigmoid(0.5, 0.001), 0.5);
        assert_abs_diff_eq!(mid.p_sp.lo, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.p_ps.lo, 0.5, epsilon = 1e-12);
        let high = eval_response(&ResponseSpec::sigmoid(0.1, 0.001), 0.2);
        assert_eq!((high.p_sp.lo, high.p_ps.lo), (1.0, 0.0));
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let spec = ResponseSpec::Tabulated {
            knots: vec![
                [0.1, 0.0, 1.0].into(),
                [0.3, 0.5, 0.2].into(),
                [0.5, 1.0, 0.0].into(),
            ],
        };
        spec.validate().unwrap();
        assert_eq!(spec.select(0.0), (0.0, 1.0));
        assert_eq!(spec.select(0.9), (1.0, 0.0));
        let (a, b) = spec.select(0.2);
        assert_abs_diff_eq!(a, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.6, epsilon = 1e-12);
        // right slope at an interior knot
        let (d_sp, d_ps) = spec.slopes(0.3);
        assert_abs_diff_eq!(d_sp, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d_ps, -1.0, epsilon = 1e-12);
        assert_eq!(spec.slopes(0.5), (0.0, 0.0));
    }

    #[test]
    fn tabulated_rejects_non_monotone() {
        let spec = ResponseSpec::Tabulated {
            knots: vec![[0.0, 0.5, 1.0].into(), [1.0, 0.2, 0.0].into()],
        };
        assert!(spec.validate().is_err());
        let spec = ResponseSpec::Tabulated {
            knots: vec![[0.0, 0.0, 0.5].into(), [1.0, 0.2, 0.7].into()],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.0, f64::NAN).is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.0).is_ok());
        assert!(ResponseSpec::step(0.0).validate().is_err());
        assert!(ResponseSpec::step(1.0).validate().is_ok());
    }

    #[test]
    fn state_domain_checks() {
        assert!(State::new(0.6, 0.5).is_err());
        assert!(State::new(-0.1, 0.5).is_err());
        let x = State::new(0.5 + 5e-10, 0.5).unwrap();
        assert!(x.s + x.i <= 1.0);
    }

    #[test]
    fn segment_on_discontinuity_line() {
        let p = params(1.0, 1.0, 0.5);
        let v = field(&p, &ResponseSpec::step(0.5), State::new(0.5, 0.5).unwrap());
        let FieldValue::Segment { ds_lo, ds_hi, di } = v else {
            panic!("expected a segment, got {v:?}");
        };
        assert_abs_diff_eq!(ds_lo, -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(ds_hi, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(di, 0.0, epsilon = 1e-15);
        // one-sided limits from just above and below the line
        let h = 1e-9;
        let above = field(&p, &ResponseSpec::step(0.5), State::new_unchecked(0.5, 0.5 + h));
        let below = field(&p, &ResponseSpec::step(0.5), State::new_unchecked(0.5, 0.5 - h));
        assert_abs_diff_eq!(above.min_norm_ds(), ds_lo, epsilon = 1e-8);
        assert_abs_diff_eq!(below.min_norm_ds(), ds_hi, epsilon = 1e-8);
    }

    #[test]
    fn infection_free_axis_and_sir_reduction() {
        let p = params(2.0, 0.7, 0.3);
        let v = field(&p, &ResponseSpec::step(0.4), State::new(0.3, 0.0).unwrap());
        assert_eq!(
            v,
            FieldValue::Point {
                ds: 0.7 * 0.7,
                di: 0.0
            }
        );

        let sir = params(1.0, 0.0, 0.5);
        let v = field(&sir, &ResponseSpec::step(0.4), State::new(0.6, 0.2).unwrap());
        let FieldValue::Point { ds, di } = v else { panic!() };
        assert_abs_diff_eq!(ds, -0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(di, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn multiclass_single_class_matches_field() {
        let p = params(1.3, 0.8, 0.4);
        let spec = ResponseSpec::sigmoid(0.3, 0.01);
        let classes = [ClassSpec {
            weight: 1.0,
            response: spec.clone(),
        }];
        for a in 0..10 {
            for b in 0..10 {
                let s = a as f64 / 10.0;
                let i = b as f64 / 10.0 * (1.0 - s);
                let x = State::new(s, i).unwrap();
                let mc = MultiClassState::new(vec![x], &classes).unwrap();
                let got = field_multiclass(&p, &classes, &mc).unwrap();
                assert_eq!(got, vec![field(&p, &spec, x)]);
            }
        }
        let step_classes = [ClassSpec {
            weight: 1.0,
            response: ResponseSpec::step(0.25),
        }];
        let x = State::new(0.5, 0.25).unwrap();
        let mc = MultiClassState::new(vec![x], &step_classes).unwrap();
        assert_eq!(
            field_multiclass(&p, &step_classes, &mc).unwrap(),
            vec![field(&p, &ResponseSpec::step(0.25), x)]
        );
    }

    #[test]
    fn multiclass_without_infection_is_flat_in_i() {
        let p = params(1.0, 1.0, 0.5);
        let classes = [
            ClassSpec {
                weight: 0.2,
                response: ResponseSpec::step(0.1),
            },
            ClassSpec {
                weight: 0.8,
                response: ResponseSpec::step(0.9),
            },
        ];
        let x = MultiClassState::new(
            vec![State::new_unchecked(0.1, 0.0), State::new_unchecked(0.3, 0.0)],
            &classes,
        )
        .unwrap();
        for v in field_multiclass(&p, &classes, &x).unwrap() {
            assert_eq!(v.di(), 0.0);
        }
    }

    #[test]
    fn class_weights_must_sum_to_one() {
        let classes = [
            ClassSpec {
                weight: 0.2,
                response: ResponseSpec::step(0.1),
            },
            ClassSpec {
                weight: 0.7,
                response: ResponseSpec::step(0.9),
            },
        ];
        assert!(validate_classes(&classes).is_err());
    }

    fn continuous_spec() -> impl Strategy<Value = ResponseSpec> {
        prop_oneof![
            (0.01f64..1.0, 1e-4f64..0.3).prop_map(|(a, e)| ResponseSpec::sigmoid(a, e)),
            proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..6).prop_map(|raw| {
                let mut xs: Vec<f64> = raw.iter().map(|r| r.0).collect();
                xs.sort_by(f64::total_cmp);
                xs.dedup();
                let mut sp: Vec<f64> = raw.iter().map(|r| r.1).collect();
                sp.sort_by(f64::total_cmp);
                let mut ps: Vec<f64> = raw.iter().map(|r| r.2).collect();
                ps.sort_by(|a, b| b.total_cmp(a));
                ResponseSpec::Tabulated {
                    knots: xs
                        .iter()
                        .enumerate()
                        .map(|(k, &i)| Knot {
                            i,
                            p_sp: sp[k],
                            p_ps: ps[k],
                        })
                        .collect(),
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn continuous_responses_are_monotone(spec in continuous_spec()) {
            spec.validate().unwrap();
            let mut prev = spec.select(0.0);
            for k in 1..=500 {
                let cur = spec.select(k as f64 / 500.0);
                prop_assert!(cur.0 >= prev.0 && cur.1 <= prev.1);
                prop_assert!((0.0..=1.0).contains(&cur.0) && (0.0..=1.0).contains(&cur.1));
                prev = cur;
            }
        }

        #[test]
        fn field_keeps_simplex_forward_invariant(
            beta in 0.01f64..10.0, gamma in 0.0f64..10.0, delta in 0.01f64..10.0,
            i_star in 0.01f64..1.0, t in 0.0f64..1.0,
        ) {
            let p = params(beta, gamma, delta);
            let spec = ResponseSpec::step(i_star);
            // S = 0 edge
            let v = field(&p, &spec, State::new_unchecked(0.0, t));
            let ds_min = match v { FieldValue::Point { ds, .. } => ds, FieldValue::Segment { ds_lo, .. } => ds_lo };
            prop_assert!(ds_min >= 0.0);
            // I = 0 edge
            prop_assert_eq!(field(&p, &spec, State::new_unchecked(t, 0.0)).di(), 0.0);
            // S + I = 1 edge
            let v = field(&p, &spec, State::new_unchecked(t, 1.0 - t));
            let ds_max = match v { FieldValue::Point { ds, .. } => ds, FieldValue::Segment { ds_hi, .. } => ds_hi };
            prop_assert!(ds_max + v.di() <= 1e-12);
        }

        #[test]
        fn segment_endpoints_are_one_sided_limits(
            beta in 0.01f64..10.0, gamma in 0.0f64..10.0, delta in 0.01f64..10.0,
            i_star in 0.05f64..0.95, u in 0.0f64..1.0,
        ) {
            let p = params(beta, gamma, delta);
            let spec = ResponseSpec::step(i_star);
            let s = u * (1.0 - i_star);
            let FieldValue::Segment { ds_lo, ds_hi, di } = field(&p, &spec, State::new_unchecked(s, i_star)) else {
                panic!("expected a segment");
            };
            let h = 1e-6;
            // Lipschitz bound of the one-sided fields in I
            let tol = h * (beta + gamma + delta) + 1e-12;
            let up = field(&p, &spec, State::new_unchecked(s, i_star + h));
            let down = field(&p, &spec, State::new_unchecked(s, i_star - h));
            prop_assert!((up.min_norm_ds() - ds_lo).abs() <= tol);
            prop_assert!((down.min_norm_ds() - ds_hi).abs() <= tol);
            prop_assert!((up.di() - di).abs() <= tol && (down.di() - di).abs() <= tol);
        }

        #[test]
        fn identical_classes_aggregate_to_single_class(
            beta in 0.01f64..10.0, gamma in 0.0f64..10.0, delta in 0.01f64..10.0,
            w in 0.05f64..0.95, f in proptest::array::uniform4(0.0f64..1.0),
        ) {
            let p = params(beta, gamma, delta);
            let spec = ResponseSpec::sigmoid(0.4, 0.05);
            let classes = [
                ClassSpec { weight: w, response: spec.clone() },
                ClassSpec { weight: 1.0 - w, response: spec.clone() },
            ];
            let x1 = State::new_unchecked(f[0] * w, f[1] * (1.0 - f[0]) * w);
            let x2 = State::new_unchecked(f[2] * (1.0 - w), f[3] * (1.0 - f[2]) * (1.0 - w));
            let mc = MultiClassState::new(vec![x1, x2], &classes).unwrap();
            let per_class = field_multiclass(&p, &classes, &mc).unwrap();
            let FieldValue::Point { ds, di } = field(&p, &spec, mc.total()) else { panic!() };
            let agg_ds: f64 = per_class.iter().map(FieldValue::min_norm_ds).sum();
            let agg_di: f64 = per_class.iter().map(FieldValue::di).sum();
            prop_assert!((agg_ds - ds).abs() <= 1e-12 * (1.0 + ds.abs()) * 10.0);
            prop_assert!((agg_di - di).abs() <= 1e-12 * (1.0 + di.abs()) * 10.0);
        }
    }
}
