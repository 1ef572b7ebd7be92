//! The three subcommands and their output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sppc_core::{
    run_montecarlo, run_trial, synthesize, HorizonData, MonteCarloResult, PacketSolver, PlantModel, SimTrace,
    SynthesisParams, SynthesisResult, TrialSpec,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const TRACE_HEADER: &str = "k,norm_x,l0_u,dropped,input,design_time_us";

/// Everything derived from a config before any simulation.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Config with `x0` and `l1_fixed_bound` filled in.
    pub config: ExperimentConfig,
    pub plant: PlantModel,
    pub x0: Vec<f64>,
    pub synthesis: SynthesisResult,
    pub horizon: HorizonData,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;
        let plant = config.build_plant()?;
        let n = plant.dim();
        let q = config.weight(n)?;
        let x0 = config.initial_state(n)?;
        let params = SynthesisParams {
            horizon: config.horizon,
            alpha: config.alpha,
            c_interpretation: config.c_interpretation,
        };
        let (synthesis, horizon) = synthesize(&plant, &q, &params).map_err(CliError::Numeric)?;
        let mut resolved = config.clone();
        resolved.x0 = Some(x0.clone());
        resolved.l1_fixed_bound = Some(config.l1_bound());
        Ok(Self {
            config: resolved,
            plant,
            x0,
            synthesis,
            horizon,
        })
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.synthesis
            .check_invariants(&self.plant)
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.to_string())
            .collect()
    }

    pub fn spec(&self, solver: PacketSolver) -> TrialSpec {
        TrialSpec {
            solver,
            x0: self.x0.clone(),
            steps: self.config.steps,
            p_drop: self.config.p_drop,
        }
    }

    pub fn omp_solver(&self) -> PacketSolver {
        PacketSolver::Omp(self.config.omp_selection)
    }

    pub fn l1_solver(&self) -> PacketSolver {
        PacketSolver::L1 {
            lambda: self.config.lambda,
            fixed_bound: self.config.l1_bound(),
        }
    }

    /// Solvers requested by the config, labelled.
    pub fn solvers(&self) -> Vec<(&'static str, PacketSolver)> {
        let mut out = Vec::new();
        if self.config.solver.runs_omp() {
            out.push(("omp", self.omp_solver()));
        }
        if self.config.solver.runs_l1() {
            out.push(("l1", self.l1_solver()));
        }
        out
    }

    pub fn manifest(&self, command: &str) -> Value {
        let syn = &self.synthesis;
        let checks: Vec<Value> = syn
            .check_invariants(&self.plant)
            .into_iter()
            .map(|c| json!({ "name": c.name, "passed": c.passed, "value": c.value, "bound": c.bound }))
            .collect();
        let all_passed = checks.iter().all(|c| c["passed"] == json!(true));
        json!({
            "command": command,
            "config": serde_json::to_value(&self.config).expect("config serializes"),
            "plant": { "a": self.plant.a().to_rows(), "b": self.plant.b_vec() },
            "synthesis": {
                "q": syn.q.to_rows(),
                "p": syn.p.to_rows(),
                "rho": syn.rho,
                "c": syn.c,
                "alpha": syn.alpha,
                "c_interpretation": syn.c_interpretation,
                "eps": syn.eps.to_rows(),
                "w": syn.w.to_rows(),
                "riccati_iterations": syn.riccati_iterations,
                "riccati_residual": syn.riccati_residual,
            },
            "checks": checks,
            "all_checks_passed": all_passed,
        })
    }

    fn require_checks(&self) -> Result<(), CliError> {
        let failed = self.failed_checks();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Checks(failed))
        }
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Seventeen significant digits, so parsing the text recovers the value exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            num(r.norm_x),
            r.sparsity,
            u8::from(r.dropped),
            num(r.input),
            num(r.design_time_us)
        );
    }
    out
}

pub fn aggregate_csv(results: &[(&str, &MonteCarloResult)]) -> String {
    let mut header = vec!["k".to_string()];
    for (label, _) in results {
        header.push(format!("mean_norm_x_{label}"));
        header.push(if *label == "omp" {
            "mean_l0_omp".into()
        } else {
            format!("mean_{label}_l0")
        });
    }
    let mut out = header.join(",");
    out.push('\n');
    let len = results.first().map_or(0, |(_, r)| r.mean_norm_x.len());
    for k in 0..len {
        out.push_str(&k.to_string());
        for (_, r) in results {
            let _ = write!(out, ",{},{}", num(r.mean_norm_x[k]), num(r.mean_sparsity[k]));
        }
        out.push('\n');
    }
    out
}

/// Least-squares slope of `ln(mean_norm_x)` against `k` over the final half
/// of the run, skipping non-positive entries. `None` with fewer than two points.
pub fn decay_slope(mean_norm_x: &[f64]) -> Option<f64> {
    let start = mean_norm_x.len() / 2;
    let points: Vec<(f64, f64)> = mean_norm_x
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mk = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(k, l)| (k - mk) * (l - ml)).sum();
    let sxx: f64 = points.iter().map(|(k, _)| (k - mk) * (k - mk)).sum();
    Some(sxy / sxx)
}

/// Writes `manifest.json`; fails after writing if any invariant check fails.
pub fn cmd_synthesize(config: &ExperimentConfig, out: &Path) -> Result<Prepared, CliError> {
    prepare_and_record(config, out, "synthesize")
}

/// Runs one trial per requested solver with `config.seed`. The first solver's
/// trace goes to `trace.csv`; with `solver = both` the ℓ¹ trace goes to
/// `trace_l1.csv`.
pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<Vec<SimTrace>, CliError> {
    let prepared = prepare_and_record(config, out, "simulate")?;
    let mut traces = Vec::new();
    for (i, (label, solver)) in prepared.solvers().into_iter().enumerate() {
        let trace = run_trial(
            &prepared.plant,
            &prepared.horizon,
            &prepared.synthesis,
            &prepared.spec(solver),
            prepared.config.seed,
        )
        .map_err(CliError::from_simulation)?;
        let name = if i == 0 {
            "trace.csv".to_string()
        } else {
            format!("trace_{label}.csv")
        };
        fs::write(out.join(name), trace_csv(&trace))?;
        traces.push(trace);
    }
    Ok(traces)
}

fn prepare_and_record(config: &ExperimentConfig, out: &Path, command: &str) -> Result<Prepared, CliError> {
    let prepared = Prepared::new(config)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("manifest.json"), &prepared.manifest(command))?;
    prepared.require_checks()?;
    Ok(prepared)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Default,
    Threads(usize),
}

impl Parallelism {
    /// `--jobs`: 1 is sequential, 0 or absent uses all cores.
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Parallelism::Sequential,
            Some(0) | None => Parallelism::Default,
            Some(n) => Parallelism::Threads(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub prepared: Prepared,
    pub results: Vec<(&'static str, MonteCarloResult)>,
    pub summary: Value,
}

impl MonteCarloReport {
    pub fn get(&self, label: &str) -> Option<&MonteCarloResult> {
        self.results.iter().find(|(l, _)| *l == label).map(|(_, r)| r)
    }
}

fn montecarlo_with(
    prepared: &Prepared,
    solver: PacketSolver,
    parallelism: Parallelism,
) -> Result<MonteCarloResult, CliError> {
    let spec = prepared.spec(solver);
    let run = |parallel| {
        run_montecarlo(
            &prepared.plant,
            &prepared.horizon,
            &prepared.synthesis,
            &spec,
            prepared.config.trials,
            prepared.config.seed,
            parallel,
        )
    };
    let result = match parallelism {
        Parallelism::Sequential => run(false),
        Parallelism::Default => run(true),
        Parallelism::Threads(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| run(true))
        }
    };
    result.map_err(CliError::from_simulation)
}

pub fn cmd_montecarlo(
    config: &ExperimentConfig,
    out: &Path,
    parallelism: Parallelism,
) -> Result<MonteCarloReport, CliError> {
    let prepared = prepare_and_record(config, out, "montecarlo")?;
    let mut results = Vec::new();
    for (label, solver) in prepared.solvers() {
        results.push((label, montecarlo_with(&prepared, solver, parallelism)?));
    }
    let borrowed: Vec<(&str, &MonteCarloResult)> = results.iter().map(|(l, r)| (*l, r)).collect();
    fs::write(out.join("aggregate.csv"), aggregate_csv(&borrowed))?;

    let mut summary = serde_json::Map::new();
    summary.insert("trials".into(), json!(prepared.config.trials));
    summary.insert("steps".into(), json!(prepared.config.steps));
    summary.insert("seed".into(), json!(prepared.config.seed));
    for (label, r) in &results {
        summary.insert(
            (*label).into(),
            json!({
                "decay_slope": decay_slope(&r.mean_norm_x),
                "mean_sparsity": r.overall_mean_sparsity(),
                "mean_design_time_us": r.mean_design_time_us(),
                "initial_mean_norm_x": r.mean_norm_x.first(),
                "final_mean_norm_x": r.mean_norm_x.last(),
            }),
        );
    }
    let summary = Value::Object(summary);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(MonteCarloReport {
        prepared,
        results,
        summary,
    })
}
