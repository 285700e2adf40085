use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use epigame_core::basin::{classify_basin, lattice_grid};
use epigame_core::equilibrium::{
    equilibrium_infection_vs_gamma, equilibrium_infection_vs_gamma_continuous, find_equilibria_continuous,
    find_equilibria_step, stability_sliding, stability_smooth, Equilibrium, EquilibriumKind, StabilityReport,
    StepConditions,
};
use epigame_core::integrator::integrate;
use epigame_core::model::field;
use epigame_core::output::fmt_f64;
use epigame_core::stochastic::{convergence_study, simulate_batch, Counts, CtmcConfig};
use epigame_core::trace::{parse_trace, run_trace_experiment, TraceExperiment};
use serde::Serialize;

use crate::config::{state, Config, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub enum CmdError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

fn runtime(e: impl std::fmt::Display) -> CmdError {
    CmdError::Runtime(e.to_string())
}

pub struct Ctx {
    pub config: Config,
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub format: Format,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CmdError> {
        fs::create_dir_all(&self.out).map_err(|e| runtime(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf, CmdError> {
        #[derive(Serialize)]
        struct WithConfig<'a, T> {
            config: &'a Config,
            result: &'a T,
        }
        let text = serde_json::to_string_pretty(&WithConfig {
            config: &self.config,
            result: payload,
        })
        .map_err(runtime)?;
        self.write(name, &(text + "\n"))
    }
}

fn csv_row(fields: &[f64]) -> String {
    fields.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct EquilibriumEntry {
    label: &'static str,
    #[serde(flatten)]
    equilibrium: Equilibrium,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability: Option<StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability_error: Option<String>,
}

#[derive(Serialize)]
struct EquilibriaReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    conditions: Option<StepConditions>,
    degenerate: bool,
    equilibria: Vec<EquilibriumEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    endemic_error: Option<String>,
}

pub fn equilibria(ctx: &Ctx) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let report = match spec.step_threshold() {
        Some(i_star) => {
            let eqs = find_equilibria_step(&params, i_star).map_err(runtime)?;
            let equilibria = eqs
                .candidates
                .iter()
                .map(|e| {
                    if !e.admissible {
                        return EquilibriumEntry {
                            label: e.kind.label(),
                            equilibrium: *e,
                            stability: None,
                            stability_error: None,
                        };
                    }
                    let st = if e.kind == EquilibriumKind::Sliding {
                        stability_sliding(&params, i_star)
                    } else {
                        stability_smooth(&params, spec, e)
                    };
                    entry(*e, st)
                })
                .collect();
            EquilibriaReport {
                conditions: Some(eqs.conditions),
                degenerate: eqs.degenerate,
                equilibria,
                endemic_error: None,
            }
        }
        None => {
            let eqs = find_equilibria_continuous(&params, spec).map_err(runtime)?;
            let mut equilibria = vec![entry(eqs.x0, stability_smooth(&params, spec, &eqs.x0))];
            let mut endemic_error = None;
            match &eqs.x1 {
                Ok(x1) => equilibria.push(entry(*x1, stability_smooth(&params, spec, x1))),
                Err(e) => endemic_error = Some(e.to_string()),
            }
            EquilibriaReport {
                conditions: None,
                degenerate: false,
                equilibria,
                endemic_error,
            }
        }
    };

    let mut text = String::new();
    for e in &report.equilibria {
        let _ = write!(
            text,
            "{} ({:.12}, {:.12}) admissible={}",
            e.label, e.equilibrium.point.s, e.equilibrium.point.i, e.equilibrium.admissible
        );
        if let Some(st) = &e.stability {
            let _ = write!(text, " verdict={:?}", st.verdict);
            if let Some(ev) = st.eigenvalues {
                let _ = write!(text, " eigenvalues=[{}, {}]", ev[0], ev[1]);
            }
            if let (Some(ap), Some(am)) = (st.a_plus, st.a_minus) {
                let _ = write!(text, " A+={ap:.12} A-={am:.12}");
            }
        }
        if let Some(err) = &e.stability_error {
            let _ = write!(text, " stability: {err}");
        }
        text.push('\n');
    }
    if let Some(err) = &report.endemic_error {
        let _ = writeln!(text, "X1: {err}");
    }
    print!("{text}");

    match ctx.format {
        Format::Json => ctx.write_json("equilibria.json", &report)?,
        Format::Csv => {
            let mut csv = String::from("kind,s,i,admissible,aux,verdict\n");
            for e in &report.equilibria {
                let verdict = e
                    .stability
                    .map_or_else(String::new, |s| format!("{:?}", s.verdict));
                let aux = e.equilibrium.aux.map_or_else(String::new, fmt_f64);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{aux},{verdict}",
                    e.label,
                    fmt_f64(e.equilibrium.point.s),
                    fmt_f64(e.equilibrium.point.i),
                    e.equilibrium.admissible
                );
            }
            ctx.write("equilibria.csv", &csv)?
        }
    };
    Ok(())
}

fn entry<E: std::fmt::Display>(e: Equilibrium, st: Result<StabilityReport, E>) -> EquilibriumEntry {
    let (stability, stability_error) = match st {
        Ok(s) => (Some(s), None),
        Err(err) => (None, Some(err.to_string())),
    };
    EquilibriumEntry {
        label: e.kind.label(),
        equilibrium: e,
        stability,
        stability_error,
    }
}

pub fn integrate_cmd(ctx: &Ctx, vector_field: bool) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let section = ctx.config.section(&ctx.config.integrate, "integrate")?;

    if vector_field {
        let n = section.vector_field_n;
        if n < 2 {
            return Err(ConfigError("integrate.vector_field_n must be at least 2".into()).into());
        }
        let mut csv = String::from("s,i,ds,di\n");
        for x in lattice_grid(n) {
            // on the discontinuity line the minimum-norm element is drawn
            let f = field(&params, spec, x);
            csv += &csv_row(&[x.s, x.i, f.min_norm_ds(), f.di()]);
            csv.push('\n');
        }
        ctx.write("vector_field.csv", &csv)?;
        return Ok(());
    }

    let x0 = state(section.x0, "integrate.x0")?;
    let traj = integrate(&params, spec, x0, &ctx.config.integrator()).map_err(runtime)?;
    match ctx.format {
        Format::Json => {
            ctx.write_json("trajectory.json", &traj)?;
        }
        Format::Csv => {
            let mut csv = String::from("t,s,i,p\n");
            for s in &traj.samples {
                csv += &csv_row(&[s.t, s.state.s, s.state.i, s.state.p()]);
                csv.push('\n');
            }
            ctx.write("trajectory.csv", &csv)?;
            let mut ev = String::from("t,event\n");
            for e in &traj.events {
                let _ = writeln!(ev, "{},{}", fmt_f64(e.t), e.kind.label());
            }
            ctx.write("events.csv", &ev)?;
        }
    }
    let end = traj.final_sample();
    println!(
        "outcome={:?} t={} s={} i={} crossings={}",
        traj.outcome, end.t, end.state.s, end.state.i, traj.crossings
    );
    Ok(())
}

pub fn basin(ctx: &Ctx) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let section = ctx.config.section(&ctx.config.basin, "basin")?;
    if section.grid_n < 2 {
        return Err(ConfigError("basin.grid_n must be at least 2".into()).into());
    }
    let grid = lattice_grid(section.grid_n);
    let report = classify_basin(&params, spec, &grid, &ctx.config.integrator()).map_err(runtime)?;
    match ctx.format {
        Format::Json => {
            ctx.write_json("basin.json", &report)?;
        }
        Format::Csv => {
            let mut csv = String::from("s0,i0,label,s_final,i_final,t_final,crossings\n");
            for p in &report.points {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(p.x0.s),
                    fmt_f64(p.x0.i),
                    p.label.label(),
                    fmt_f64(p.final_state.s),
                    fmt_f64(p.final_state.i),
                    fmt_f64(p.final_t),
                    p.crossings
                );
            }
            ctx.write("basin.csv", &csv)?;
        }
    }
    println!("points={} unresolved={}", report.points.len(), report.unresolved);
    Ok(())
}

pub fn sweep_gamma(ctx: &Ctx) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let gammas = ctx.config.gammas()?;
    let rows = match spec.step_threshold() {
        Some(i_star) => equilibrium_infection_vs_gamma(&params, i_star, &gammas),
        None => equilibrium_infection_vs_gamma_continuous(&params, spec, &gammas).map_err(runtime)?,
    };
    match ctx.format {
        Format::Json => {
            ctx.write_json("sweep.json", &rows)?;
        }
        Format::Csv => {
            let mut csv = String::from("gamma,i_eq,kind\n");
            for r in &rows {
                let _ = writeln!(csv, "{},{},{}", fmt_f64(r.gamma), fmt_f64(r.i_eq), r.kind.label());
            }
            ctx.write("sweep.csv", &csv)?;
        }
    }
    Ok(())
}

pub fn simulate(ctx: &Ctx) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let seed = ctx.config.seed(ctx.seed)?;
    let s = ctx.config.section(&ctx.config.simulate, "simulate")?;
    let x0 = state(s.x0, "simulate.x0")?;
    let cfg = CtmcConfig {
        t_max: s.t_max,
        sample_interval: s.sample_interval,
    };
    let runs = simulate_batch(&params, spec, Counts::from_fractions(s.n, x0), &cfg, seed, s.runs)
        .map_err(|e| ConfigError(format!("simulate: {e}")))?;
    match ctx.format {
        Format::Json => {
            ctx.write_json("simulate.json", &runs)?;
        }
        Format::Csv => {
            let mut csv = String::from("t,n_s,n_i,n_p,seed,run\n");
            for run in &runs {
                for smp in &run.samples {
                    let c = smp.total();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        fmt_f64(smp.t),
                        c.n_s,
                        c.n_i,
                        c.n_p,
                        run.seed,
                        run.run_index
                    );
                }
            }
            ctx.write("simulate.csv", &csv)?;
        }
    }
    Ok(())
}

pub fn converge(ctx: &Ctx) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let spec = ctx.config.response()?;
    let seed = ctx.config.seed(ctx.seed)?;
    let s = ctx.config.section(&ctx.config.converge, "converge")?;
    let x0 = state(s.x0, "converge.x0")?;
    let cfg = CtmcConfig {
        t_max: s.t_max,
        sample_interval: s.sample_interval,
    };
    let study = convergence_study(&params, spec, x0, &s.n_list, s.runs, &cfg, seed)
        .map_err(|e| ConfigError(format!("converge: {e}")))?;
    match ctx.format {
        Format::Json => {
            ctx.write_json("convergence.json", &study)?;
        }
        Format::Csv => {
            let mut csv = String::from("n,mean_error,std_error,runs\n");
            for r in &study.rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    r.n,
                    fmt_f64(r.mean_error),
                    fmt_f64(r.std_error),
                    r.runs
                );
            }
            ctx.write("convergence.csv", &csv)?;
        }
    }
    Ok(())
}

pub fn trace(ctx: &Ctx, trace_flag: Option<&Path>) -> Result<(), CmdError> {
    let params = ctx.config.params()?;
    let seed = ctx.config.seed(ctx.seed)?;
    let t = ctx.config.section(&ctx.config.trace, "trace")?;
    let path = match (trace_flag, &t.path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => ctx.config_dir.join(p),
        (None, None) => {
            return Err(ConfigError("missing trace path: set trace.path or pass --trace".into()).into())
        }
    };
    let file = fs::File::open(&path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let trace = parse_trace(file).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let exp = TraceExperiment {
        gamma: params.gamma,
        delta: params.delta,
        classes: ctx.config.trace_classes()?,
        initial: t.initial.clone(),
        runs: t.runs,
        transient_cut: t.transient_cut,
        grid_step: t.grid_step,
    };
    let result = run_trace_experiment(&trace, &exp, seed).map_err(|e| ConfigError(format!("trace: {e}")))?;
    match ctx.format {
        Format::Json => {
            ctx.write_json("trace.json", &result)?;
        }
        Format::Csv => {
            let n_classes = exp.classes.len();
            let mut csv = String::from("t,s_total,i_total");
            for c in 1..=n_classes {
                let _ = write!(csv, ",s_c{c},i_c{c}");
            }
            csv.push('\n');
            for k in 0..result.t.len() {
                let mut row = vec![result.t[k], result.s_total[k], result.i_total[k]];
                for c in 0..n_classes {
                    row.push(result.class_s[c][k]);
                    row.push(result.class_i[c][k]);
                }
                csv += &csv_row(&row);
                csv.push('\n');
            }
            ctx.write("trace_average.csv", &csv)?;

            let mut runs = String::from("run,mean_i_total,stopped_at");
            for c in 1..=n_classes {
                let _ = write!(runs, ",s_c{c},i_c{c},p_c{c}");
            }
            runs.push('\n');
            for r in &result.runs {
                let _ = write!(
                    runs,
                    "{},{},{}",
                    r.run_index,
                    fmt_f64(r.mean_i_total),
                    fmt_f64(r.stopped_at)
                );
                for c in 0..n_classes {
                    let _ = write!(
                        runs,
                        ",{},{},{}",
                        fmt_f64(r.class_mean_s[c]),
                        fmt_f64(r.class_mean_i[c]),
                        fmt_f64(r.class_mean_p[c])
                    );
                }
                runs.push('\n');
            }
            ctx.write("trace_runs.csv", &runs)?;
        }
    }
    let mean = result.runs.iter().map(|r| r.mean_i_total).sum::<f64>() / result.runs.len() as f64;
    println!("runs={} mean_i_after_transient={mean}", result.runs.len());
    Ok(())
}
