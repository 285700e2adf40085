//! Conserved and monotone quantities plus the Dulac divergence scan used to
//! rule out periodic orbits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, ResponseSpec, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error("function undefined at {state:?}: needs S > 0 and I > 0")]
    Domain { state: State },
    #[error("{0}")]
    InvalidArgument(String),
}

fn require_interior(x: State) -> Result<(), DiagnosticError> {
    if x.s > 0.0 && x.i > 0.0 {
        Ok(())
    } else {
        Err(DiagnosticError::Domain { state: x })
    }
}

/// First integral of the `p_sp = 1` (above-threshold) field:
/// `S - (delta/beta) ln S + I + (gamma/beta) ln I`.
pub fn energy_e(params: &ModelParams, x: State) -> Result<f64, DiagnosticError> {
    require_interior(x)?;
    let (b, g, d) = (params.beta, params.gamma, params.delta);
    Ok(x.s - (d / b) * x.s.ln() + x.i + (g / b) * x.i.ln())
}

/// Lyapunov function of the `p_ps = 1` (below-threshold) field, non-increasing
/// along its trajectories when `delta < beta`:
/// `S - (S1 + gamma/beta) ln(S + gamma/beta) + I - I1 ln I`.
pub fn monotone_m(params: &ModelParams, x: State) -> Result<f64, DiagnosticError> {
    require_interior(x)?;
    let (b, g) = (params.beta, params.gamma);
    let s1 = params.s_threshold();
    let i1 = params.sirs_endemic_infected();
    Ok(x.s - (s1 + g / b) * (x.s + g / b).ln() + x.i - i1 * x.i.ln())
}

/// Divergence of `F / I`, i.e. `-beta - gamma (p_sp + p_ps) / I`.
pub fn dulac_divergence(params: &ModelParams, spec: &ResponseSpec, x: State) -> Result<f64, DiagnosticError> {
    require_interior(x)?;
    let (p_sp, p_ps) = spec.select(x.i);
    Ok(-params.beta - params.gamma * (p_sp + p_ps) / x.i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DulacScan {
    pub points: usize,
    pub max_divergence: f64,
    pub argmax: State,
}

impl DulacScan {
    pub fn strictly_negative(&self) -> bool {
        self.max_divergence < 0.0
    }
}

/// Evaluates the Dulac divergence on the lattice `s = j/n, i = k/n`
/// with `k >= 1` and `s + i <= 1`.
pub fn dulac_scan(params: &ModelParams, spec: &ResponseSpec, n: usize) -> Result<DulacScan, DiagnosticError> {
    if n == 0 {
        return Err(DiagnosticError::InvalidArgument(
            "grid resolution must be positive".into(),
        ));
    }
    let mut scan = DulacScan {
        points: 0,
        max_divergence: f64::NEG_INFINITY,
        argmax: State::new_unchecked(0.0, 1.0),
    };
    for k in 1..=n {
        for j in 0..=(n - k) {
            let x = State::new_unchecked(j as f64 / n as f64, k as f64 / n as f64);
            // the divergence does not involve S, so the S = 0 column is fine
            let (p_sp, p_ps) = spec.select(x.i);
            let div = -params.beta - params.gamma * (p_sp + p_ps) / x.i;
            scan.points += 1;
            if div > scan.max_divergence {
                scan.max_divergence = div;
                scan.argmax = x;
            }
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rates;
    use approx::assert_relative_eq;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5).unwrap()
    }

    fn grad(f: impl Fn(State) -> f64, x: State) -> (f64, f64) {
        let h = 1e-6;
        (
            (f(State::new_unchecked(x.s + h, x.i)) - f(State::new_unchecked(x.s - h, x.i))) / (2.0 * h),
            (f(State::new_unchecked(x.s, x.i + h)) - f(State::new_unchecked(x.s, x.i - h))) / (2.0 * h),
        )
    }

    #[test]
    fn energy_is_conserved_above() {
        let p = params();
        for &(s, i) in &[(0.2, 0.5), (0.6, 0.3), (0.1, 0.85)] {
            let x = State::new_unchecked(s, i);
            let (gs, gi) = grad(|y| energy_e(&p, y).unwrap(), x);
            let (ds, di) = rates(&p, x, 1.0, 0.0);
            assert!((gs * ds + gi * di).abs() < 1e-8);
        }
    }

    #[test]
    fn monotone_decreases_below() {
        let p = params();
        let i1 = p.sirs_endemic_infected();
        for &(s, i) in &[(0.2, 0.1), (0.9, 0.05), (0.5, 0.4), (0.5, i1)] {
            let x = State::new_unchecked(s, i);
            let (gs, gi) = grad(|y| monotone_m(&p, y).unwrap(), x);
            let (ds, di) = rates(&p, x, 0.0, 1.0);
            let expected =
                -(p.beta * s - p.delta).powi(2) * (p.gamma + p.beta * i1) / (p.beta * (p.beta * s + p.gamma));
            assert_relative_eq!(gs * ds + gi * di, expected, epsilon = 1e-8);
            assert!(expected <= 0.0);
        }
    }

    #[test]
    fn undefined_on_boundary() {
        let p = params();
        assert!(energy_e(&p, State::new_unchecked(0.0, 0.5)).is_err());
        assert!(monotone_m(&p, State::new_unchecked(0.5, 0.0)).is_err());
    }

    #[test]
    fn dulac_matches_finite_difference() {
        let p = params();
        let spec = ResponseSpec::sigmoid(0.3, 0.05);
        for &(s, i) in &[(0.2, 0.1), (0.6, 0.25), (0.1, 0.7)] {
            let x = State::new_unchecked(s, i);
            let h = 1e-6;
            let hf = |y: State| {
                let (a, b) = spec.select(y.i);
                let (ds, di) = rates(&p, y, a, b);
                (ds / y.i, di / y.i)
            };
            let dsx =
                (hf(State::new_unchecked(s + h, i)).0 - hf(State::new_unchecked(s - h, i)).0) / (2.0 * h);
            let diy =
                (hf(State::new_unchecked(s, i + h)).1 - hf(State::new_unchecked(s, i - h)).1) / (2.0 * h);
            assert_relative_eq!(dsx + diy, dulac_divergence(&p, &spec, x).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn scan_negative_everywhere() {
        let p = params();
        let scan = dulac_scan(&p, &ResponseSpec::step(0.2), 100).unwrap();
        assert!(scan.strictly_negative());
        assert_eq!(scan.points, 100 * 101 / 2);
        let sir = ModelParams::new(1.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(
            dulac_scan(&sir, &ResponseSpec::step(0.2), 10)
                .unwrap()
                .max_divergence,
            -1.0
        );
    }
}
