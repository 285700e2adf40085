//! Basin classification over a grid of initial states, and a return-map
//! check that trajectories spiral in rather than around.

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumKind;
use crate::integrator::{integrate, IntegrateError, IntegratorConfig, Outcome, Trajectory};
use crate::model::{ModelParams, ResponseSpec, State};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinLabel {
    Converged(EquilibriumKind),
    Unresolved,
}

impl BasinLabel {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged(k) => k.label(),
            Self::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    pub x0: State,
    pub label: BasinLabel,
    pub final_state: State,
    pub final_t: f64,
    pub crossings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub points: Vec<BasinPoint>,
    pub unresolved: usize,
}

/// Lattice `s = j/(n-1), i = k/(n-1)` restricted to `s + i <= 1`.
pub fn lattice_grid(n: usize) -> Vec<State> {
    assert!(n >= 2, "lattice needs at least two points per axis");
    let m = n - 1;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for k in 0..=m {
        for j in 0..=(m - k) {
            out.push(State::new_unchecked(j as f64 / m as f64, k as f64 / m as f64));
        }
    }
    out
}

/// Integrates every grid start and labels it by the equilibrium reached.
pub fn classify_basin(
    params: &ModelParams,
    spec: &ResponseSpec,
    grid: &[State],
    cfg: &IntegratorConfig,
) -> Result<BasinReport, IntegrateError> {
    let cfg = IntegratorConfig {
        keep_samples: false,
        ..*cfg
    };
    let points: Vec<BasinPoint> = par::map(grid, |&x0| {
        let traj = integrate(params, spec, x0, &cfg)?;
        let end = traj.final_sample();
        let label = match traj.outcome {
            Outcome::Equilibrium(k) => BasinLabel::Converged(k),
            Outcome::Horizon | Outcome::StepLimit => BasinLabel::Unresolved,
        };
        Ok(BasinPoint {
            x0,
            label,
            final_state: end.state,
            final_t: end.t,
            crossings: traj.crossings,
        })
    })
    .into_iter()
    .collect::<Result<_, IntegrateError>>()?;
    let unresolved = points
        .iter()
        .filter(|p| p.label == BasinLabel::Unresolved)
        .count();
    Ok(BasinReport { points, unresolved })
}

/// Distances `s - s_eq` at successive upward crossings of `I = i_eq`
/// (linear interpolation between samples). Upward crossings happen only
/// where `S > delta/beta`, so the values are positive.
pub fn section_returns(traj: &Trajectory, target: State) -> Vec<f64> {
    traj.samples
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].state, w[1].state);
            if a.i < target.i && b.i >= target.i {
                let f = (target.i - a.i) / (b.i - a.i);
                Some(a.s + f * (b.s - a.s) - target.s)
            } else {
                None
            }
        })
        .collect()
}

/// Number of returns that fail to move strictly closer to the equilibrium.
/// A closed orbit would repeat its section point, so zero violations rules
/// one out along this trajectory.
pub fn return_violations(returns: &[f64]) -> usize {
    returns.windows(2).filter(|w| w[1].abs() >= w[0].abs()).count()
}
