//! Exact event-driven simulation of the finite-population chain and the
//! mean-field convergence study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate_at, IntegrateError, IntegratorConfig};
use crate::model::{validate_classes, ClassSpec, ModelError, ModelParams, ResponseSpec, State};
use crate::par;
use crate::trace::class_sizes;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("mean-field reference failed: {0}")]
    Reference(#[from] IntegrateError),
}

/// Per-state head counts of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub n_s: u64,
    pub n_i: u64,
    pub n_p: u64,
}

impl Counts {
    pub fn new(n_s: u64, n_i: u64, n_p: u64) -> Self {
        Self { n_s, n_i, n_p }
    }

    pub fn n(&self) -> u64 {
        self.n_s + self.n_i + self.n_p
    }

    /// Rounds `x` to counts summing to `n`; P absorbs the remainder.
    pub fn from_fractions(n: u64, x: State) -> Self {
        let n_s = ((x.s * n as f64).round() as u64).min(n);
        let n_i = ((x.i * n as f64).round() as u64).min(n - n_s);
        Self {
            n_s,
            n_i,
            n_p: n - n_s - n_i,
        }
    }

    pub fn fractions(&self) -> State {
        let n = self.n() as f64;
        State::new_unchecked(self.n_s as f64 / n, self.n_i as f64 / n)
    }

    fn add(&mut self, other: &Counts) {
        self.n_s += other.n_s;
        self.n_i += other.n_i;
        self.n_p += other.n_p;
    }
}

/// Agents grouped by response class; agents within a class are exchangeable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPopulation {
    pub classes: Vec<Counts>,
}

impl AgentPopulation {
    pub fn single(counts: Counts) -> Self {
        Self {
            classes: vec![counts],
        }
    }

    pub fn n(&self) -> u64 {
        self.classes.iter().map(Counts::n).sum()
    }

    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in &self.classes {
            t.add(c);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcConfig {
    pub t_max: f64,
    pub sample_interval: f64,
}

impl CtmcConfig {
    fn validate(&self) -> Result<(), StochasticError> {
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(StochasticError::InvalidConfig(format!("t_max = {}", self.t_max)));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(StochasticError::InvalidConfig(format!(
                "sample_interval = {}",
                self.sample_interval
            )));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let k_max = (self.t_max / self.sample_interval + 1e-9).floor() as usize;
        (0..=k_max).map(|k| k as f64 * self.sample_interval).collect()
    }
}

/// Counts of each legal transition plus the time integral of the
/// susceptible head count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionAudit {
    pub events: u64,
    pub infections: u64,
    pub s_to_p: u64,
    pub p_to_s: u64,
    pub i_to_p: u64,
    pub susceptible_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcSample {
    pub t: f64,
    pub classes: Vec<Counts>,
}

impl CtmcSample {
    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in &self.classes {
            t.add(c);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub seed: u64,
    pub run_index: u64,
    pub samples: Vec<CtmcSample>,
    pub final_t: f64,
    pub audit: TransitionAudit,
}

/// RNG for run `run_index` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn pick_weighted(classes: &[Counts], key: impl Fn(&Counts) -> u64, mut u: u64) -> usize {
    for (k, c) in classes.iter().enumerate() {
        let w = key(c);
        if u < w {
            return k;
        }
        u -= w;
    }
    unreachable!("index beyond total weight")
}

/// Simulates the chain with one response per class.
pub fn simulate_ctmc_classes(
    params: &ModelParams,
    specs: &[ResponseSpec],
    pop0: &AgentPopulation,
    cfg: &CtmcConfig,
    seed: u64,
    run_index: u64,
) -> Result<SimRun, StochasticError> {
    params.validate()?;
    cfg.validate()?;
    if specs.len() != pop0.classes.len() {
        return Err(StochasticError::InvalidPopulation(format!(
            "{} responses for {} classes",
            specs.len(),
            pop0.classes.len()
        )));
    }
    for s in specs {
        s.validate()?;
    }
    let n = pop0.n();
    if n < 2 {
        return Err(StochasticError::InvalidPopulation(
            "need at least two agents".into(),
        ));
    }

    let mut rng = run_rng(seed, run_index);
    let mut classes = pop0.classes.clone();
    let mut n_i_total: u64 = classes.iter().map(|c| c.n_i).sum();
    let mut n_s_total: u64 = classes.iter().map(|c| c.n_s).sum();
    let total_rate = params.beta + params.gamma + params.delta;
    let event_rate = n as f64 * total_rate;
    let sizes: Vec<u64> = classes.iter().map(Counts::n).collect();

    let times = cfg.sample_times();
    let mut samples = Vec::with_capacity(times.len());
    let mut next_sample = 0usize;
    let mut audit = TransitionAudit::default();
    let mut t = 0.0_f64;

    loop {
        let dt: f64 = Exp1.sample(&mut rng);
        let t_next = t + dt / event_rate;
        while next_sample < times.len() && times[next_sample] < t_next {
            samples.push(CtmcSample {
                t: times[next_sample],
                classes: classes.clone(),
            });
            next_sample += 1;
        }
        if t_next > cfg.t_max {
            audit.susceptible_time += n_s_total as f64 * (cfg.t_max - t);
            break;
        }
        audit.susceptible_time += n_s_total as f64 * (t_next - t);
        t = t_next;
        audit.events += 1;

        let who = rng.random_range(0..n);
        let ck = pick_weighted(&classes, Counts::n, who);
        let c = classes[ck];
        let local = rng.random_range(0..c.n());
        let (is_s, is_i) = (local < c.n_s, local >= c.n_s && local < c.n_s + c.n_i);

        let r = rng.random::<f64>() * total_rate;
        if r < params.beta {
            // partner uniform among the other n - 1 agents; either role
            // transmits with probability 1/2 so the drift is beta*S*I
            let others_i = n_i_total - is_i as u64;
            let others_s = n_s_total - is_s as u64;
            let partner = rng.random_range(0..n - 1);
            let transmit = rng.random::<bool>();
            if transmit && is_s && partner < others_i {
                classes[ck].n_s -= 1;
                classes[ck].n_i += 1;
                n_s_total -= 1;
                n_i_total += 1;
                audit.infections += 1;
            } else if transmit && is_i && partner < others_s {
                let j = pick_weighted(&classes, |c| c.n_s, partner);
                classes[j].n_s -= 1;
                classes[j].n_i += 1;
                n_s_total -= 1;
                n_i_total += 1;
                audit.infections += 1;
            }
        } else if r < params.beta + params.gamma {
            if !is_i {
                let frac_i = n_i_total as f64 / n as f64;
                let (p_sp, p_ps) = specs[ck].select(frac_i);
                let u = rng.random::<f64>();
                if is_s && u < p_sp {
                    classes[ck].n_s -= 1;
                    classes[ck].n_p += 1;
                    n_s_total -= 1;
                    audit.s_to_p += 1;
                } else if !is_s && u < p_ps {
                    classes[ck].n_p -= 1;
                    classes[ck].n_s += 1;
                    n_s_total += 1;
                    audit.p_to_s += 1;
                }
            }
        } else if is_i {
            classes[ck].n_i -= 1;
            classes[ck].n_p += 1;
            n_i_total -= 1;
            audit.i_to_p += 1;
        }
        debug_assert!(classes.iter().zip(&sizes).all(|(c, s)| c.n() == *s));
        debug_assert_eq!(classes.iter().map(|c| c.n_i).sum::<u64>(), n_i_total);
        debug_assert_eq!(classes.iter().map(|c| c.n_s).sum::<u64>(), n_s_total);
    }

    Ok(SimRun {
        seed,
        run_index,
        samples,
        final_t: cfg.t_max,
        audit,
    })
}

/// Single-class simulation.
pub fn simulate_ctmc(
    params: &ModelParams,
    spec: &ResponseSpec,
    pop0: Counts,
    cfg: &CtmcConfig,
    seed: u64,
    run_index: u64,
) -> Result<SimRun, StochasticError> {
    simulate_ctmc_classes(
        params,
        std::slice::from_ref(spec),
        &AgentPopulation::single(pop0),
        cfg,
        seed,
        run_index,
    )
}

/// Population split by class weights with every class starting at `x0`.
pub fn population_from_classes(
    n: u64,
    x0: State,
    classes: &[ClassSpec],
) -> Result<AgentPopulation, StochasticError> {
    validate_classes(classes)?;
    let sizes = class_sizes(classes, n as usize);
    Ok(AgentPopulation {
        classes: sizes
            .into_iter()
            .map(|m| Counts::from_fractions(m as u64, x0))
            .collect(),
    })
}

/// Independent runs `0..runs`, executed in parallel when enabled.
pub fn simulate_batch(
    params: &ModelParams,
    spec: &ResponseSpec,
    pop0: Counts,
    cfg: &CtmcConfig,
    seed: u64,
    runs: u64,
) -> Result<Vec<SimRun>, StochasticError> {
    let idx: Vec<u64> = (0..runs).collect();
    par::map(&idx, |&r| simulate_ctmc(params, spec, pop0, cfg, seed, r))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub mean_error: f64,
    pub std_error: f64,
    pub runs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// `errors[k][r]`: sup-norm error of run `r` at `n_list[k]`. Run `r` uses
    /// the same RNG stream for every `n`.
    pub errors: Vec<Vec<f64>>,
}

/// Sup-norm distance over sample times between the scaled chain and the
/// mean-field solution, as a function of population size.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    params: &ModelParams,
    spec: &ResponseSpec,
    x0: State,
    n_list: &[u64],
    runs: u64,
    cfg: &CtmcConfig,
    seed: u64,
) -> Result<ConvergenceStudy, StochasticError> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StochasticError::InvalidConfig("n_list must be increasing".into()));
    }
    if runs == 0 {
        return Err(StochasticError::InvalidConfig("runs must be positive".into()));
    }
    cfg.validate()?;
    let times = cfg.sample_times();
    let ode_cfg = IntegratorConfig {
        t_max: cfg.t_max.max(f64::MIN_POSITIVE),
        ..Default::default()
    };
    let reference = integrate_at(params, spec, x0, &ode_cfg, &times)?;

    let mut rows = Vec::with_capacity(n_list.len());
    let mut errors = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let pop0 = Counts::from_fractions(n, x0);
        let runs_at_n = simulate_batch(params, spec, pop0, cfg, seed, runs)?;
        let errs: Vec<f64> = runs_at_n.iter().map(|run| sup_error(run, &reference)).collect();
        let mean = errs.iter().sum::<f64>() / runs as f64;
        let var = if runs > 1 {
            errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (runs - 1) as f64
        } else {
            0.0
        };
        rows.push(ConvergenceRow {
            n,
            mean_error: mean,
            std_error: (var / runs as f64).sqrt(),
            runs,
        });
        errors.push(errs);
    }
    Ok(ConvergenceStudy { rows, errors })
}

/// Largest deviation of scaled (S, I) from `reference` over the sample times.
pub fn sup_error(run: &SimRun, reference: &[State]) -> f64 {
    run.samples
        .iter()
        .zip(reference)
        .map(|(s, x)| {
            let f = s.total().fractions();
            (f.s - x.s).abs().max((f.i - x.i).abs())
        })
        .fold(0.0, f64::max)
}

/// Time average of the infected fraction over samples with `t >= t_from`.
pub fn time_average_infected(run: &SimRun, t_from: f64) -> f64 {
    let xs: Vec<f64> = run
        .samples
        .iter()
        .filter(|s| s.t >= t_from)
        .map(|s| s.total().fractions().i)
        .collect();
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
