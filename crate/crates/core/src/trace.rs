//! Replays a recorded contact trace as the meeting process. Updates and
//! disinfections still come from per-agent Poisson clocks.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_classes, ClassSpec, ModelError};
use crate::par;
use crate::stochastic::run_rng;

/// Default averaging grid step in seconds.
pub const GRID_STEP: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("trace contains no contacts")]
    EmptyTrace,
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub t_start: f64,
    pub t_end: f64,
    pub a: u64,
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactTrace {
    /// Sorted node identifiers.
    pub nodes: Vec<u64>,
    /// Sorted by `(t_start, a, b)`.
    pub contacts: Vec<Contact>,
}

impl ContactTrace {
    pub fn new(mut contacts: Vec<Contact>) -> Result<Self, TraceError> {
        if contacts.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        for (k, c) in contacts.iter().enumerate() {
            if c.a == c.b {
                return Err(TraceError::Parse {
                    line: k as u64 + 1,
                    message: format!("self-contact of node {}", c.a),
                });
            }
            if !(c.t_start >= 0.0 && c.t_start.is_finite() && c.t_end.is_finite() && c.t_start <= c.t_end) {
                return Err(TraceError::Parse {
                    line: k as u64 + 1,
                    message: format!("bad interval [{}, {}]", c.t_start, c.t_end),
                });
            }
        }
        contacts.sort_by(|x, y| {
            x.t_start
                .total_cmp(&y.t_start)
                .then(x.a.cmp(&y.a))
                .then(x.b.cmp(&y.b))
        });
        let mut nodes: Vec<u64> = contacts.iter().flat_map(|c| [c.a, c.b]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(Self { nodes, contacts })
    }

    pub fn start(&self) -> f64 {
        self.contacts[0].t_start
    }

    pub fn end(&self) -> f64 {
        self.contacts
            .iter()
            .map(|c| c.t_end)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }
}

/// Parses `a,b,t_start,t_end` rows; lines starting with `#` and blank lines
/// are skipped.
pub fn parse_trace<R: Read>(input: R) -> Result<ContactTrace, TraceError> {
    let mut contacts = Vec::new();
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let line_no = k as u64 + 1;
        let bad = |message: String| TraceError::Parse {
            line: line_no,
            message,
        };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let row = line.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let id = |k: usize| {
            fields[k]
                .parse::<u64>()
                .map_err(|e| bad(format!("node id {:?}: {e}", fields[k])))
        };
        let time = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("time {:?}: {e}", fields[k])))
        };
        let c = Contact {
            a: id(0)?,
            b: id(1)?,
            t_start: time(2)?,
            t_end: time(3)?,
        };
        if c.a == c.b {
            return Err(bad(format!("self-contact of node {}", c.a)));
        }
        if !(c.t_start >= 0.0 && c.t_end >= c.t_start && c.t_end.is_finite()) {
            return Err(bad(format!("bad interval [{}, {}]", c.t_start, c.t_end)));
        }
        contacts.push(c);
    }
    ContactTrace::new(contacts)
}

/// Complete-mixing trace: each pair of nodes `0..n_nodes` meets as an
/// independent Poisson process of rate `pair_rate` over `[0, duration]`;
/// every contact lasts `contact_len` seconds.
pub fn synthetic_trace(
    n_nodes: u64,
    pair_rate: f64,
    duration: f64,
    contact_len: f64,
    seed: u64,
) -> Result<ContactTrace, TraceError> {
    let mut rng = run_rng(seed, u64::MAX);
    let mut contacts = Vec::new();
    for a in 0..n_nodes {
        for b in (a + 1)..n_nodes {
            let mut t = 0.0;
            loop {
                let e: f64 = Exp1.sample(&mut rng);
                t += e / pair_rate;
                if t > duration {
                    break;
                }
                contacts.push(Contact {
                    t_start: t,
                    t_end: t + contact_len,
                    a,
                    b,
                });
            }
        }
    }
    ContactTrace::new(contacts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentState {
    Susceptible,
    Infected,
    Protected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeAssignment {
    pub class: usize,
    pub state: AgentState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Class labels drawn per run from the class weights; one node of
    /// `infected_class` infected, everyone else susceptible.
    SingleInfected {
        infected_class: usize,
    },
    Explicit {
        nodes: BTreeMap<u64, NodeAssignment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceExperiment {
    /// Update rate per second.
    pub gamma: f64,
    /// Disinfection rate per second.
    pub delta: f64,
    pub classes: Vec<ClassSpec>,
    pub initial: InitialCondition,
    pub runs: u64,
    /// Seconds from the trace start excluded from averages; `None` means 10%
    /// of the span.
    pub transient_cut: Option<f64>,
    pub grid_step: f64,
}

impl TraceExperiment {
    pub fn validate(&self, trace: &ContactTrace) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidExperiment(m));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {}", self.gamma));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {}", self.delta));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return bad(format!("grid_step = {}", self.grid_step));
        }
        if let Some(cut) = self.transient_cut {
            if !(cut >= 0.0 && cut.is_finite()) {
                return bad(format!("transient_cut = {cut}"));
            }
        }
        validate_classes(&self.classes)?;
        match &self.initial {
            InitialCondition::SingleInfected { infected_class } => {
                if *infected_class >= self.classes.len() {
                    return bad(format!("infected_class {infected_class} out of range"));
                }
                let sizes = class_sizes(&self.classes, trace.nodes.len());
                if sizes[*infected_class] == 0 {
                    return bad(format!("class {infected_class} has no members"));
                }
            }
            InitialCondition::Explicit { nodes } => {
                for id in &trace.nodes {
                    let Some(a) = nodes.get(id) else {
                        return bad(format!("node {id} has no initial assignment"));
                    };
                    if a.class >= self.classes.len() {
                        return bad(format!("node {id}: class {} out of range", a.class));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn cut(&self, trace: &ContactTrace) -> f64 {
        self.transient_cut.unwrap_or(0.1 * trace.duration())
    }
}

/// Rounded class sizes summing to `n`; the largest class absorbs drift.
pub fn class_sizes(classes: &[ClassSpec], n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = classes
        .iter()
        .map(|c| (c.weight * n as f64).round() as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    if let Some(big) = (0..sizes.len()).max_by_key(|&k| sizes[k]) {
        sizes[big] = (sizes[big] + n).saturating_sub(assigned);
    }
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRunSummary {
    pub run_index: u64,
    /// Mean infected fraction over grid points after the transient cut.
    pub mean_i_total: f64,
    /// Within-class means after the transient cut.
    pub class_mean_s: Vec<f64>,
    pub class_mean_i: Vec<f64>,
    pub class_mean_p: Vec<f64>,
    /// Nodes ever infected during the run.
    pub ever_infected: Vec<u64>,
    /// Time the run stopped (no infected left, or trace end).
    pub stopped_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    /// Absolute grid times at or after the transient cut.
    pub t: Vec<f64>,
    pub s_total: Vec<f64>,
    pub i_total: Vec<f64>,
    /// `class_s[c][k]`: within-class susceptible fraction of class `c`.
    pub class_s: Vec<Vec<f64>>,
    pub class_i: Vec<Vec<f64>>,
    pub runs: Vec<TraceRunSummary>,
}

struct RunGrid {
    // [grid point][class] -> (n_s, n_i, n_p)
    counts: Vec<Vec<[u32; 3]>>,
    summary: TraceRunSummary,
}

fn state_index(s: AgentState) -> usize {
    match s {
        AgentState::Susceptible => 0,
        AgentState::Infected => 1,
        AgentState::Protected => 2,
    }
}

fn run_once(
    trace: &ContactTrace,
    exp: &TraceExperiment,
    grid: &[f64],
    first_kept: usize,
    seed: u64,
    run_index: u64,
) -> RunGrid {
    let mut rng = run_rng(seed, run_index);
    let n = trace.nodes.len();
    let n_classes = exp.classes.len();
    let index: HashMap<u64, usize> = trace.nodes.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let mut class_of = vec![0usize; n];
    let mut state = vec![AgentState::Susceptible; n];
    match &exp.initial {
        InitialCondition::SingleInfected { infected_class } => {
            let sizes = class_sizes(&exp.classes, n);
            let mut labels: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
                .collect();
            labels.shuffle(&mut rng);
            class_of.copy_from_slice(&labels);
            let members: Vec<usize> = (0..n).filter(|&k| class_of[k] == *infected_class).collect();
            let seed_node = members[rng.random_range(0..members.len())];
            state[seed_node] = AgentState::Infected;
        }
        InitialCondition::Explicit { nodes } => {
            for (k, id) in trace.nodes.iter().enumerate() {
                let a = nodes[id];
                class_of[k] = a.class;
                state[k] = a.state;
            }
        }
    }

    let mut counts = vec![[0u32; 3]; n_classes];
    for k in 0..n {
        counts[class_of[k]][state_index(state[k])] += 1;
    }
    let class_n: Vec<u32> = counts.iter().map(|c| c[0] + c[1] + c[2]).collect();
    let mut n_infected: usize = state.iter().filter(|&&s| s == AgentState::Infected).count();
    let mut ever = vec![false; n];
    for k in 0..n {
        ever[k] = state[k] == AgentState::Infected;
    }

    let clock_rate = n as f64 * (exp.gamma + exp.delta);
    let next_clock = |t: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        if clock_rate > 0.0 {
            let e: f64 = Exp1.sample(rng);
            t + e / clock_rate
        } else {
            f64::INFINITY
        }
    };

    let t_end = trace.end();
    let mut t = trace.start();
    let mut t_clock = next_clock(t, &mut rng);
    let mut ci = 0usize;
    let mut gi = 0usize;
    let mut out = Vec::with_capacity(grid.len());

    let record_until =
        |limit: f64, inclusive: bool, counts: &[[u32; 3]], out: &mut Vec<Vec<[u32; 3]>>, gi: &mut usize| {
            while *gi < grid.len() && (grid[*gi] < limit || (inclusive && grid[*gi] <= limit)) {
                out.push(counts.to_vec());
                *gi += 1;
            }
        };

    let stopped_at = loop {
        if n_infected == 0 {
            break t;
        }
        let t_contact = trace.contacts.get(ci).map_or(f64::INFINITY, |c| c.t_start);
        let t_next = t_contact.min(t_clock);
        if t_next > t_end {
            break t_end;
        }
        // grid points strictly before the next event see the current state
        record_until(t_next, false, &counts, &mut out, &mut gi);
        t = t_next;
        if t_contact <= t_clock {
            let c = trace.contacts[ci];
            ci += 1;
            let (a, b) = (index[&c.a], index[&c.b]);
            let target = match (state[a], state[b]) {
                (AgentState::Susceptible, AgentState::Infected) => Some(a),
                (AgentState::Infected, AgentState::Susceptible) => Some(b),
                _ => None,
            };
            if let Some(k) = target {
                counts[class_of[k]][0] -= 1;
                counts[class_of[k]][1] += 1;
                state[k] = AgentState::Infected;
                ever[k] = true;
                n_infected += 1;
            }
        } else {
            let k = rng.random_range(0..n);
            let update = rng.random::<f64>() * (exp.gamma + exp.delta) < exp.gamma;
            let cls = class_of[k];
            match (update, state[k]) {
                (true, AgentState::Susceptible) => {
                    let (p_sp, _) = exp.classes[cls].response.select(n_infected as f64 / n as f64);
                    if rng.random::<f64>() < p_sp {
                        state[k] = AgentState::Protected;
                        counts[cls][0] -= 1;
                        counts[cls][2] += 1;
                    }
                }
                (true, AgentState::Protected) => {
                    let (_, p_ps) = exp.classes[cls].response.select(n_infected as f64 / n as f64);
                    if rng.random::<f64>() < p_ps {
                        state[k] = AgentState::Susceptible;
                        counts[cls][2] -= 1;
                        counts[cls][0] += 1;
                    }
                }
                (false, AgentState::Infected) => {
                    state[k] = AgentState::Protected;
                    counts[cls][1] -= 1;
                    counts[cls][2] += 1;
                    n_infected -= 1;
                }
                _ => {}
            }
            t_clock = next_clock(t, &mut rng);
        }
        debug_assert!(counts.iter().zip(&class_n).all(|(c, m)| c[0] + c[1] + c[2] == *m));
    };
    // the final state is held for the rest of the grid
    record_until(f64::INFINITY, true, &counts, &mut out, &mut gi);

    let kept = &out[first_kept..];
    let m = kept.len().max(1) as f64;
    let mean_i_total = kept
        .iter()
        .map(|row| row.iter().map(|c| c[1]).sum::<u32>() as f64 / n as f64)
        .sum::<f64>()
        / m;
    let class_mean = |j: usize| -> Vec<f64> {
        (0..n_classes)
            .map(|c| {
                if class_n[c] == 0 {
                    return f64::NAN;
                }
                kept.iter()
                    .map(|row| row[c][j] as f64 / class_n[c] as f64)
                    .sum::<f64>()
                    / m
            })
            .collect()
    };
    let summary = TraceRunSummary {
        run_index,
        mean_i_total,
        class_mean_s: class_mean(0),
        class_mean_i: class_mean(1),
        class_mean_p: class_mean(2),
        ever_infected: (0..n).filter(|&k| ever[k]).map(|k| trace.nodes[k]).collect(),
        stopped_at,
    };
    RunGrid { counts: out, summary }
}

/// Runs `exp.runs` replays and averages the per-run trajectories pointwise on
/// the grid. Class columns are fractions of the class's own size.
pub fn run_trace_experiment(
    trace: &ContactTrace,
    exp: &TraceExperiment,
    seed: u64,
) -> Result<TraceResult, TraceError> {
    exp.validate(trace)?;
    let t0 = trace.start();
    let steps = (trace.duration() / exp.grid_step).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| t0 + k as f64 * exp.grid_step).collect();
    let cut = t0 + exp.cut(trace);
    let first_kept = grid
        .partition_point(|&t| t < cut)
        .min(grid.len().saturating_sub(1));

    let idx: Vec<u64> = (0..exp.runs).collect();
    let runs = par::map(&idx, |&r| run_once(trace, exp, &grid, first_kept, seed, r));

    let n = trace.nodes.len() as f64;
    let n_classes = exp.classes.len();
    let kept = grid.len() - first_kept;
    let mut s_total = vec![0.0; kept];
    let mut i_total = vec![0.0; kept];
    let mut class_s = vec![vec![0.0; kept]; n_classes];
    let mut class_i = vec![vec![0.0; kept]; n_classes];
    let mut class_den = vec![vec![0.0; kept]; n_classes];
    let r = exp.runs as f64;
    for run in &runs {
        for (k, row) in run.counts[first_kept..].iter().enumerate() {
            let (mut s, mut i) = (0u32, 0u32);
            for (c, cnt) in row.iter().enumerate() {
                s += cnt[0];
                i += cnt[1];
                let m = (cnt[0] + cnt[1] + cnt[2]) as f64;
                if m > 0.0 {
                    class_s[c][k] += cnt[0] as f64 / m;
                    class_i[c][k] += cnt[1] as f64 / m;
                    class_den[c][k] += 1.0;
                }
            }
            s_total[k] += s as f64 / n / r;
            i_total[k] += i as f64 / n / r;
        }
    }
    for c in 0..n_classes {
        for k in 0..kept {
            let d = class_den[c][k];
            class_s[c][k] = if d > 0.0 { class_s[c][k] / d } else { f64::NAN };
            class_i[c][k] = if d > 0.0 { class_i[c][k] / d } else { f64::NAN };
        }
    }
    Ok(TraceResult {
        t: grid[first_kept..].to_vec(),
        s_total,
        i_total,
        class_s,
        class_i,
        runs: runs.into_iter().map(|g| g.summary).collect(),
    })
}
