//! Stationary points, their admissibility, and local stability.
//!
//! Step responses have up to three candidates: the disease-free point
//! `X0 = (1, 0)`, the SIRS-type endemic point `X1 = (delta/beta, I1)` below
//! the discontinuity line, and the point `X2 = (delta/beta, I*)` on the line.
//! Continuous responses have `X0` and at most one endemic point found as the
//! root of a monotone function `g`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{field, FieldValue, ModelParams, ResponseSpec, State};

/// Tolerance for `0 ∈ F(x)` at a reported equilibrium.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Real parts within this distance of zero give a [`Verdict::Boundary`].
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

const BISECTION_TOLERANCE: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("no endemic equilibrium: g(0) = {g0} < 0, the existence condition fails")]
    NoRoot { g0: f64 },
    #[error("response must be single-valued for this analysis")]
    NotSingleValued,
    #[error("response must be a step function for this analysis")]
    NotStep,
    #[error("p_sp(0) + p_ps(0) = 0: the infection-free axis is entirely stationary")]
    DegenerateResponse,
    #[error("stability of a sliding equilibrium needs the sliding analysis")]
    SlidingPoint,
    #[error("sliding stability hypothesis violated: {0}")]
    HypothesisViolated(Hypothesis),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EquilibriumKind {
    /// `X0`
    DiseaseFree,
    /// `X1`
    Endemic,
    /// `X2`, on the discontinuity line
    Sliding,
}

impl EquilibriumKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::DiseaseFree => "X0",
            Self::Endemic => "X1",
            Self::Sliding => "X2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub point: State,
    pub admissible: bool,
    /// For `X2`: the mixing value `p_ps(I*)` paired with `p_sp(I*) = 0`.
    pub aux: Option<f64>,
}

/// Truth values of the existence conditions for a step response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepConditions {
    /// `delta / beta <= 1`
    pub x0_cond: bool,
    /// `(1 - delta/beta) / (1 + delta/gamma) < I*`
    pub x1_cond: bool,
    /// `I* <= (1 - delta/beta) / (1 + delta/gamma)`
    pub x2_cond: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEquilibria {
    /// Candidates lying in the state space; check `admissible`.
    pub candidates: Vec<Equilibrium>,
    pub conditions: StepConditions,
    /// `delta == beta`: `X0` and `X1` coincide.
    pub degenerate: bool,
}

impl StepEquilibria {
    pub fn admissible(&self) -> impl Iterator<Item = &Equilibrium> {
        self.candidates.iter().filter(|e| e.admissible)
    }

    pub fn get(&self, kind: EquilibriumKind) -> Option<&Equilibrium> {
        self.admissible().find(|e| e.kind == kind)
    }
}

/// Solves `0 ∈ F(x)` for the best-response dynamics with threshold `i_star`.
pub fn find_equilibria_step(params: &ModelParams, i_star: f64) -> Result<StepEquilibria, EquilibriumError> {
    params.validate()?;
    ResponseSpec::step(i_star).validate()?;
    let s1 = params.s_threshold();
    let i1 = params.sirs_endemic_infected();
    let x0_cond = s1 <= 1.0;
    let x1_cond = x0_cond && i1 < i_star;
    // Equality goes to X2; there X1 and X2 are the same point.
    let x2_cond = x0_cond && i_star <= i1;
    let conditions = StepConditions {
        x0_cond,
        x1_cond,
        x2_cond,
    };

    let mut candidates = vec![Equilibrium {
        kind: EquilibriumKind::DiseaseFree,
        point: State::new_unchecked(1.0, 0.0),
        admissible: true,
        aux: None,
    }];
    if x0_cond {
        candidates.push(Equilibrium {
            kind: EquilibriumKind::Endemic,
            point: State::new_unchecked(s1, i1),
            admissible: x1_cond,
            aux: None,
        });
    }
    if s1 + i_star <= 1.0 {
        let aux = (params.gamma > 0.0)
            .then(|| params.delta * i_star / (params.gamma * (1.0 - s1 - i_star)))
            .filter(|a| a.is_finite());
        candidates.push(Equilibrium {
            kind: EquilibriumKind::Sliding,
            point: State::new_unchecked(s1, i_star),
            admissible: x2_cond,
            aux: if x2_cond { aux } else { None },
        });
    }
    Ok(StepEquilibria {
        candidates,
        conditions,
        degenerate: s1 == 1.0,
    })
}

/// `g(I) = -delta I - (gamma delta / beta) p_sp(I) + gamma (1 - delta/beta - I) p_ps(I)`;
/// its root is the infected fraction of the endemic point.
pub fn g_function(params: &ModelParams, spec: &ResponseSpec, i: f64) -> f64 {
    let (p_sp, p_ps) = spec.select(i);
    let s1 = params.s_threshold();
    -params.delta * i - params.gamma * s1 * p_sp + params.gamma * (1.0 - s1 - i) * p_ps
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEquilibria {
    pub x0: Equilibrium,
    pub x1: Result<Equilibrium, EquilibriumError>,
}

impl ContinuousEquilibria {
    pub fn admissible(&self) -> Vec<Equilibrium> {
        let mut out = vec![self.x0];
        if let Ok(x1) = &self.x1 {
            out.push(*x1);
        }
        out
    }
}

/// Equilibria for a single-valued response.
pub fn find_equilibria_continuous(
    params: &ModelParams,
    spec: &ResponseSpec,
) -> Result<ContinuousEquilibria, EquilibriumError> {
    params.validate()?;
    spec.validate()?;
    if !spec.is_single_valued() {
        return Err(EquilibriumError::NotSingleValued);
    }
    let (sp0, ps0) = spec.select(0.0);
    if sp0 + ps0 == 0.0 {
        return Err(EquilibriumError::DegenerateResponse);
    }
    let x0 = Equilibrium {
        kind: EquilibriumKind::DiseaseFree,
        point: State::new_unchecked(ps0 / (sp0 + ps0), 0.0),
        admissible: true,
        aux: None,
    };
    let x1 = endemic_root(params, spec).map(|i1| Equilibrium {
        kind: EquilibriumKind::Endemic,
        point: State::new_unchecked(params.s_threshold(), i1),
        admissible: true,
        aux: None,
    });
    Ok(ContinuousEquilibria { x0, x1 })
}

fn endemic_root(params: &ModelParams, spec: &ResponseSpec) -> Result<f64, EquilibriumError> {
    let g = |i| g_function(params, spec, i);
    let g0 = g(0.0);
    if g0 < 0.0 {
        return Err(EquilibriumError::NoRoot { g0 });
    }
    if g0 == 0.0 {
        return Ok(0.0);
    }
    // g is non-increasing with g(1) < 0, so [0, 1] brackets the root
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    AsymptoticallyStable,
    Unstable,
    Saddle,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub eigenvalues: Option<[Complex64; 2]>,
    pub a_plus: Option<f64>,
    pub a_minus: Option<f64>,
}

/// Jacobian of the smooth field at `x` for a single-valued branch of the
/// response; step responses use the constant branch of the side `x` lies on.
pub fn jacobian(params: &ModelParams, spec: &ResponseSpec, x: State) -> [[f64; 2]; 2] {
    let (p_sp, p_ps) = spec.select(x.i);
    let (d_sp, d_ps) = spec.slopes(x.i);
    let ModelParams { beta, gamma, delta } = *params;
    [
        [
            -beta * x.i - gamma * (p_sp + p_ps),
            -beta * x.s - gamma * x.s * d_sp - gamma * p_ps + gamma * x.p() * d_ps,
        ],
        [beta * x.i, beta * x.s - delta],
    ]
}

/// Roots of `λ² - tr λ + det` from the characteristic polynomial.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // larger-magnitude root first, the other from the product
        let big = 0.5 * (tr + tr.signum() * root);
        let big = if tr == 0.0 { 0.5 * root } else { big };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if big <= small { (big, small) } else { (small, big) };
        [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * tr, -im), Complex64::new(0.5 * tr, im)]
    }
}

fn classify(eigs: [Complex64; 2]) -> Verdict {
    let max_re = eigs[0].re.max(eigs[1].re);
    let min_re = eigs[0].re.min(eigs[1].re);
    if max_re.abs() <= BOUNDARY_TOLERANCE {
        Verdict::Boundary
    } else if max_re < 0.0 {
        Verdict::AsymptoticallyStable
    } else if min_re < -BOUNDARY_TOLERANCE && eigs[0].im == 0.0 {
        Verdict::Saddle
    } else {
        Verdict::Unstable
    }
}

/// Linear stability of `X0` or `X1`.
pub fn stability_smooth(
    params: &ModelParams,
    spec: &ResponseSpec,
    eq: &Equilibrium,
) -> Result<StabilityReport, EquilibriumError> {
    if eq.kind == EquilibriumKind::Sliding {
        return Err(EquilibriumError::SlidingPoint);
    }
    if let Some(i_star) = spec.step_threshold() {
        if eq.point.i == i_star {
            return Err(EquilibriumError::SlidingPoint);
        }
    }
    let eigs = eigenvalues_2x2(jacobian(params, spec, eq.point));
    Ok(StabilityReport {
        verdict: classify(eigs),
        eigenvalues: Some(eigs),
        a_plus: None,
        a_minus: None,
    })
}

/// A hypothesis of the sliding-focus stability theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    QMinusZero,
    QPlusZero,
    PMinusNegative,
    PPlusPositive,
    QxMinusNegative,
    QxPlusNegative,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::QMinusZero => "Q- = 0 at the origin",
            Self::QPlusZero => "Q+ = 0 at the origin",
            Self::PMinusNegative => "P- < 0 at the origin",
            Self::PPlusPositive => "P+ > 0 at the origin",
            Self::QxMinusNegative => "Q-_x < 0 at the origin",
            Self::QxPlusNegative => "Q+_x < 0 at the origin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `I < I*`
    Below,
    /// `I > I*`
    Above,
}

/// The system in coordinates `x = delta/beta - S`, `y = I - I*`, which put
/// the sliding point at the origin and the discontinuity on `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedSystem {
    pub params: ModelParams,
    pub i_star: f64,
}

/// Values and partial derivatives of `P` and `Q` at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginPartials {
    pub p: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub q: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub q_xx: f64,
}

impl ShiftedSystem {
    pub fn new(params: ModelParams, i_star: f64) -> Self {
        Self { params, i_star }
    }

    /// `dx/dt` on the given side.
    pub fn p(&self, side: Side, x: f64, y: f64) -> f64 {
        let ModelParams { beta, gamma, delta } = self.params;
        let i_star = self.i_star;
        let common = -beta * x * y - (beta * i_star + gamma) * x + delta * (i_star + gamma / beta);
        match side {
            Side::Below => common + (gamma + delta) * y - gamma * (1.0 - i_star),
            Side::Above => common + delta * y,
        }
    }

    /// `dy/dt`, identical on both sides.
    pub fn q(&self, _side: Side, x: f64, y: f64) -> f64 {
        -self.params.beta * x * (y + self.i_star)
    }

    pub fn origin_partials(&self, side: Side) -> OriginPartials {
        let ModelParams { beta, gamma, delta } = self.params;
        let i_star = self.i_star;
        let p = match side {
            Side::Below => -gamma * (1.0 - i_star) + delta * (i_star + gamma / beta),
            Side::Above => delta * (i_star + gamma / beta),
        };
        let p_y = match side {
            Side::Below => gamma + delta,
            Side::Above => delta,
        };
        OriginPartials {
            p,
            p_x: -(beta * i_star + gamma),
            p_y,
            q: 0.0,
            q_x: -beta * i_star,
            q_y: 0.0,
            q_xx: 0.0,
        }
    }

    /// `A = (2/3) ((P_x + Q_y) / P - Q_xx / (2 Q_x))` at the origin.
    pub fn a_value(&self, side: Side) -> f64 {
        let d = self.origin_partials(side);
        2.0 / 3.0 * ((d.p_x + d.q_y) / d.p - d.q_xx / (2.0 * d.q_x))
    }
}

/// Stability of the sliding point `(delta/beta, I*)` from the signs of
/// `A+ - A-`, after checking the theorem's hypotheses.
pub fn stability_sliding(params: &ModelParams, i_star: f64) -> Result<StabilityReport, EquilibriumError> {
    params.validate()?;
    ResponseSpec::step(i_star).validate()?;
    let sys = ShiftedSystem::new(*params, i_star);
    let below = sys.origin_partials(Side::Below);
    let above = sys.origin_partials(Side::Above);
    let checks = [
        (below.q == 0.0, Hypothesis::QMinusZero),
        (above.q == 0.0, Hypothesis::QPlusZero),
        (below.p < 0.0, Hypothesis::PMinusNegative),
        (above.p > 0.0, Hypothesis::PPlusPositive),
        (below.q_x < 0.0, Hypothesis::QxMinusNegative),
        (above.q_x < 0.0, Hypothesis::QxPlusNegative),
    ];
    if let Some((_, h)) = checks.iter().find(|(ok, _)| !ok) {
        return Err(EquilibriumError::HypothesisViolated(*h));
    }
    let a_plus = sys.a_value(Side::Above);
    let a_minus = sys.a_value(Side::Below);
    let diff = a_plus - a_minus;
    let verdict = if diff < 0.0 {
        Verdict::AsymptoticallyStable
    } else if diff > 0.0 {
        Verdict::Unstable
    } else {
        Verdict::Boundary
    };
    Ok(StabilityReport {
        verdict,
        eigenvalues: None,
        a_plus: Some(a_plus),
        a_minus: Some(a_minus),
    })
}

/// Residual check `0 ∈ F(point)`.
pub fn residual_ok(params: &ModelParams, spec: &ResponseSpec, eq: &Equilibrium, tol: f64) -> bool {
    let v = field(params, spec, eq.point);
    match (eq.kind, v) {
        (EquilibriumKind::Sliding, FieldValue::Segment { .. }) => v.contains_zero(tol),
        (EquilibriumKind::Sliding, FieldValue::Point { .. }) => false,
        _ => v.contains_zero(tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub i_eq: f64,
    pub kind: EquilibriumKind,
}

/// Infected fraction at the attracting equilibrium of the best-response
/// dynamics, `min{(1 - delta/beta)/(1 + delta/gamma), I*}`, for each
/// update rate of `gammas` (in order). The `gamma` field of `params` is
/// ignored.
pub fn equilibrium_infection_vs_gamma(params: &ModelParams, i_star: f64, gammas: &[f64]) -> Vec<SweepRow> {
    gammas
        .iter()
        .map(|&gamma| {
            let p = params.with_gamma(gamma);
            if p.delta >= p.beta {
                return SweepRow {
                    gamma,
                    i_eq: 0.0,
                    kind: EquilibriumKind::DiseaseFree,
                };
            }
            let i1 = p.sirs_endemic_infected();
            if i1 < i_star {
                SweepRow {
                    gamma,
                    i_eq: i1,
                    kind: EquilibriumKind::Endemic,
                }
            } else {
                SweepRow {
                    gamma,
                    i_eq: i_star,
                    kind: EquilibriumKind::Sliding,
                }
            }
        })
        .collect()
}

/// Same sweep for a single-valued response: the endemic root of `g` when it
/// exists, otherwise the disease-free point.
pub fn equilibrium_infection_vs_gamma_continuous(
    params: &ModelParams,
    spec: &ResponseSpec,
    gammas: &[f64],
) -> Result<Vec<SweepRow>, EquilibriumError> {
    gammas
        .iter()
        .map(|&gamma| {
            let eqs = find_equilibria_continuous(&params.with_gamma(gamma), spec)?;
            Ok(match eqs.x1 {
                Ok(x1) => SweepRow {
                    gamma,
                    i_eq: x1.point.i,
                    kind: EquilibriumKind::Endemic,
                },
                Err(_) => SweepRow {
                    gamma,
                    i_eq: 0.0,
                    kind: EquilibriumKind::DiseaseFree,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rates;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(beta: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::new(beta, gamma, delta).unwrap()
    }

    fn kinds(r: &StepEquilibria) -> Vec<EquilibriumKind> {
        r.admissible().map(|e| e.kind).collect()
    }

    #[test]
    fn subcritical_has_only_disease_free() {
        let r = find_equilibria_step(&params(0.5, 1.0, 1.0), 0.5).unwrap();
        assert_eq!(kinds(&r), vec![EquilibriumKind::DiseaseFree]);
        assert!(!r.degenerate);
    }

    #[test]
    fn endemic_below_threshold() {
        let p = params(1.0, 1.0, 0.5);
        let spec = ResponseSpec::step(0.5);
        let r = find_equilibria_step(&p, 0.5).unwrap();
        assert_eq!(
            kinds(&r),
            vec![EquilibriumKind::DiseaseFree, EquilibriumKind::Endemic]
        );
        let x1 = r.get(EquilibriumKind::Endemic).unwrap();
        assert_abs_diff_eq!(x1.point.s, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x1.point.i, 1.0 / 3.0, epsilon = 1e-15);
        let FieldValue::Point { ds, di } = field(&p, &spec, x1.point) else {
            panic!()
        };
        assert!(ds.abs() <= 1e-12 && di.abs() <= 1e-12);
    }

    #[test]
    fn sliding_when_threshold_is_low() {
        let p = params(1.0, 1.0, 0.5);
        let r = find_equilibria_step(&p, 0.2).unwrap();
        assert_eq!(
            kinds(&r),
            vec![EquilibriumKind::DiseaseFree, EquilibriumKind::Sliding]
        );
        let x2 = r.get(EquilibriumKind::Sliding).unwrap();
        assert_eq!(x2.point, State::new_unchecked(0.5, 0.2));
        assert_abs_diff_eq!(x2.aux.unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(residual_ok(&p, &ResponseSpec::step(0.2), x2, 1e-12));
        // the mixed selection (p_sp, p_ps) = (0, aux) zeroes the field exactly
        let (ds, di) = rates(&p, x2.point, 0.0, x2.aux.unwrap());
        assert!(ds.abs() < 1e-15 && di.abs() < 1e-15);
    }

    #[test]
    fn boundary_equality_goes_to_sliding() {
        // (1 - 1/2) / (1 + 1/2) = 1/3 exactly representable? use i_star = i1
        let p = params(1.0, 1.0, 0.5);
        let i1 = p.sirs_endemic_infected();
        let r = find_equilibria_step(&p, i1).unwrap();
        assert!(r.conditions.x2_cond && !r.conditions.x1_cond);
        assert_eq!(
            kinds(&r),
            vec![EquilibriumKind::DiseaseFree, EquilibriumKind::Sliding]
        );
    }

    #[test]
    fn degenerate_when_rates_equal() {
        let r = find_equilibria_step(&params(0.7, 1.0, 0.7), 0.3).unwrap();
        assert!(r.degenerate);
        let x1 = r.get(EquilibriumKind::Endemic).unwrap();
        assert_eq!(x1.point, State::new_unchecked(1.0, 0.0));
    }

    #[test]
    fn continuous_endemic_root() {
        let p = params(1.0, 1.0, 0.5);
        let r = find_equilibria_continuous(&p, &ResponseSpec::sigmoid(0.5, 0.001)).unwrap();
        assert_eq!(r.x0.point, State::new_unchecked(1.0, 0.0));
        let x1 = r.x1.unwrap();
        assert_abs_diff_eq!(x1.point.s, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x1.point.i, 1.0 / 3.0, epsilon = 1e-12);
        let FieldValue::Point { ds, di } = field(&p, &ResponseSpec::sigmoid(0.5, 0.001), x1.point) else {
            panic!()
        };
        assert!(ds.abs() < 1e-11 && di.abs() < 1e-15);
    }

    #[test]
    fn continuous_no_root_is_signalled() {
        let p = params(0.5, 1.0, 1.0);
        let r = find_equilibria_continuous(&p, &ResponseSpec::sigmoid(0.3, 0.01)).unwrap();
        assert!(matches!(r.x1, Err(EquilibriumError::NoRoot { .. })));
        assert_eq!(r.admissible().len(), 1);

        let r =
            find_equilibria_continuous(&params(2.0, 0.5, 0.1), &ResponseSpec::sigmoid(0.3, 0.01)).unwrap();
        assert_eq!(r.x0.point, State::new_unchecked(1.0, 0.0));
        assert!(find_equilibria_continuous(&p, &ResponseSpec::step(0.3)).is_err());
    }

    #[test]
    fn disease_free_eigenvalues() {
        let spec = ResponseSpec::step(0.5);
        let p = params(0.5, 1.0, 1.0);
        let x0 = find_equilibria_step(&p, 0.5).unwrap().candidates[0];
        let rep = stability_smooth(&p, &spec, &x0).unwrap();
        let e = rep.eigenvalues.unwrap();
        assert_abs_diff_eq!(e[0].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1].re, -0.5, epsilon = 1e-15);
        assert_eq!(rep.verdict, Verdict::AsymptoticallyStable);

        let p = params(1.0, 1.0, 0.5);
        let rep = stability_smooth(&p, &spec, &x0).unwrap();
        let e = rep.eigenvalues.unwrap();
        assert_abs_diff_eq!(e[0].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1].re, 0.5, epsilon = 1e-15);
        assert_eq!(rep.verdict, Verdict::Saddle);
    }

    #[test]
    fn boundary_verdict_at_transcritical_point() {
        let p = params(1.0, 1.0, 1.0);
        let x0 = find_equilibria_step(&p, 0.5).unwrap().candidates[0];
        let rep = stability_smooth(&p, &ResponseSpec::step(0.5), &x0).unwrap();
        assert_eq!(rep.verdict, Verdict::Boundary);
    }

    #[test]
    fn endemic_spirals_near_discriminant_minimum() {
        // the discriminant of J(X1), as a quadratic in beta, is smallest at
        // beta = 2 (gamma + delta)^2 / gamma - gamma, where it is negative
        for &(gamma, delta) in &[(1.0, 0.5), (0.3, 0.2), (2.0, 1.0)] {
            let beta = 2.0 * (gamma + delta) * (gamma + delta) / gamma - gamma;
            let p = params(beta, gamma, delta);
            let r = find_equilibria_step(&p, 1.0).unwrap();
            let x1 = r.get(EquilibriumKind::Endemic).unwrap();
            let rep = stability_smooth(&p, &ResponseSpec::step(1.0), x1).unwrap();
            assert_eq!(rep.verdict, Verdict::AsymptoticallyStable);
            assert!(rep.eigenvalues.unwrap()[0].im.abs() > 0.0);
        }
    }

    #[test]
    fn sliding_stability_example() {
        let rep = stability_sliding(&params(1.0, 1.0, 0.5), 0.2).unwrap();
        assert!(rep.a_plus.unwrap() < 0.0);
        assert!(rep.a_minus.unwrap() > 0.0);
        assert_eq!(rep.verdict, Verdict::AsymptoticallyStable);
        // P+ = 0.6, P- = -0.2, P_x = -1.2
        assert_relative_eq!(rep.a_plus.unwrap(), -4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(rep.a_minus.unwrap(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn sliding_hypothesis_fails_without_x2() {
        let err = stability_sliding(&params(1.0, 1.0, 0.5), 0.4).unwrap_err();
        assert_eq!(
            err,
            EquilibriumError::HypothesisViolated(Hypothesis::PMinusNegative)
        );
    }

    #[test]
    fn sweep_formula_points() {
        let p = params(1.0, 1.0, 0.5);
        let rows = equilibrium_infection_vs_gamma(&p, 0.5, &[0.5, 1.0, 1e9]);
        assert_abs_diff_eq!(rows[0].i_eq, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[1].i_eq, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[2].i_eq, 0.5, epsilon = 1e-8);
        let sub = equilibrium_infection_vs_gamma(&params(0.5, 1.0, 1.0), 0.5, &[1.0]);
        assert_eq!(sub[0].i_eq, 0.0);
    }

    #[test]
    fn eigen_solver_matches_triangular_diagonal() {
        let e = eigenvalues_2x2([[-10.0, 3.0], [0.0, 1e-3]]);
        assert_abs_diff_eq!(e[0].re, -10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1].re, 1e-3, epsilon = 1e-16);
        let e = eigenvalues_2x2([[0.0, -1.0], [1.0, 0.0]]);
        assert_abs_diff_eq!(e[1].im, 1.0, epsilon = 1e-15);
    }
}
