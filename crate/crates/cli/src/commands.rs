use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use slrr::features::{Kind, RawSample};
use slrr::io::{self as sio, Dataset};
use slrr::solver::TraceRecord;
use slrr::synth::{self, SynthSpec};

use crate::args::*;
use crate::error::{invalid, CliError};
use crate::pipeline::{self, RunConfig, SweepMethod};

/// How a successful command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 3,
        }
    }

    fn from_converged(converged: bool) -> Self {
        if converged {
            Status::Ok
        } else {
            Status::NotConverged
        }
    }
}

pub fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Fit(a) => fit(&a),
        Command::Cluster(a) => cluster(&a),
        Command::Classify(a) => classify(&a),
        Command::NoiseSweep(a) => noise_sweep(&a),
        Command::Synth(a) => synth(&a),
    }
}

enum Sink {
    Stdout,
    Stderr,
}

fn emit(path: Option<&Path>, fallback: Sink, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut out = BufWriter::new(File::create(p)?);
            write(&mut out)?;
            out.flush()?;
        }
        None => match fallback {
            Sink::Stdout => write(&mut io::stdout().lock())?,
            Sink::Stderr => write(&mut io::stderr().lock())?,
        },
    }
    Ok(())
}

fn emit_json(path: Option<&Path>, fallback: Sink, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    text.push('\n');
    emit(path, fallback, |w| Ok(w.write_all(text.as_bytes())?))
}

fn load(input: &Path, features: &FeatureArgs) -> Result<(Vec<RawSample>, RunConfig), CliError> {
    let data: Dataset = sio::read_dataset(input)?;
    let kind: Kind = match (features.kind, data.kind) {
        (Some(k), _) => k.into(),
        (None, Some(k)) => k,
        (None, None) => return Err(invalid("input kind unknown: pass --kind or add a #kind= line")),
    };
    let mut cfg = RunConfig::new(kind);
    cfg.bins = features.bins;
    cfg.dims = features.dims;
    cfg.alpha = features.alpha;
    Ok((data.samples, cfg))
}

fn apply_solver(cfg: &mut RunConfig, s: &SolverArgs) {
    cfg.lambda = s.lambda;
    cfg.nu = s.nu;
    cfg.sigma = s.sigma;
    cfg.mu_factor = s.mu_factor;
    cfg.forbid_diagonal = s.forbid_diagonal;
    cfg.eps = s.eps;
    cfg.max_iters = s.max_iters;
    cfg.rho = s.rho;
    cfg.beta0 = s.beta0;
    cfg.beta_max = s.beta_max;
    cfg.n_max = s.n_max;
}

fn apply_graph(cfg: &mut RunConfig, g: &GraphArgs) -> Result<(), CliError> {
    if let Some(w) = g.kernel_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("--kernel-width must be positive, got {w}")));
        }
    }
    cfg.affinity = g.affinity;
    cfg.kernel_width = g.kernel_width;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine {
    iter: usize,
    objective: f64,
    violation: f64,
    rank: usize,
    beta: f64,
    mu: f64,
}

fn write_trace(path: Option<&Path>, trace: &[TraceRecord<f64>]) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    emit(Some(path), Sink::Stdout, |w| {
        for r in trace {
            let line = TraceLine {
                iter: r.iter,
                objective: r.objective,
                violation: r.violation,
                rank: r.rank,
                beta: r.beta,
                mu: r.mu,
            };
            serde_json::to_writer(&mut *w, &line).map_err(|e| invalid(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn warn_not_converged(iters: usize) {
    eprintln!("warning: solver stopped after {iters} iterations without meeting the tolerance");
}

pub fn fit(a: &FitArgs) -> Result<Status, CliError> {
    let (samples, mut cfg) = load(&a.input, &a.features)?;
    apply_solver(&mut cfg, &a.solver);
    cfg.seed = a.seed;
    let prep = pipeline::prepare(&samples, &cfg)?;
    let sol = pipeline::solve(pipeline::Representation::Sphere, &prep, &cfg)?;
    let w = sol.w.as_matrix();
    let binary = a.out.as_deref().is_some_and(|p| p.extension().is_some_and(|e| e == "bin"));
    emit(a.out.as_deref(), Sink::Stdout, |out| {
        if binary {
            sio::write_matrix_bin(out, w)?;
        } else {
            sio::write_matrix_csv(out, w)?;
        }
        Ok(())
    })?;
    write_trace(a.trace.as_deref(), &sol.trace)?;
    if !sol.converged {
        warn_not_converged(sol.iterations());
    }
    Ok(Status::from_converged(sol.converged))
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    method: ClusterMethod,
    k: usize,
    accuracy: Option<f64>,
    seed: u64,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_width: Option<f64>,
    config: &'a RunConfig,
}

pub fn cluster(a: &ClusterArgs) -> Result<Status, CliError> {
    let (samples, mut cfg) = load(&a.input, &a.features)?;
    apply_solver(&mut cfg, &a.solver);
    apply_graph(&mut cfg, &a.graph)?;
    cfg.seed = a.seed;
    let prep = pipeline::prepare(&samples, &cfg)?;
    let k = match a.graph.k {
        Some(k) => k,
        None if prep.classes > 0 => prep.classes,
        None => return Err(invalid("--k is required when the input has no label column")),
    };
    let out = pipeline::cluster(a.method, &prep, k, &cfg)?;
    emit(a.out.as_deref(), Sink::Stdout, |w| {
        w.write_all(b"id,cluster\n")?;
        for (id, l) in prep.ids.iter().zip(&out.result.labels) {
            writeln!(w, "{id},{l}")?;
        }
        Ok(())
    })?;
    if let Some(sol) = &out.solution {
        write_trace(a.trace.as_deref(), &sol.trace)?;
    }
    let report = ClusterReport {
        method: a.method,
        k,
        accuracy: out.result.accuracy,
        seed: a.seed,
        converged: out.converged(),
        iterations: out.solution.as_ref().map(|s| s.iterations()),
        kernel_width: out.kernel_width,
        config: &cfg,
    };
    emit_json(a.results.as_deref(), Sink::Stderr, &report)?;
    if !out.converged() {
        warn_not_converged(report.iterations.unwrap_or_default());
    }
    Ok(Status::from_converged(out.converged()))
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    results: Vec<pipeline::ClassifyOutcome>,
    n_train: usize,
    n_test: usize,
    seed: u64,
    config: &'a RunConfig,
}

pub fn classify(a: &ClassifyArgs) -> Result<Status, CliError> {
    let (samples, mut cfg) = load(&a.input, &a.features)?;
    apply_solver(&mut cfg, &a.solver);
    cfg.split = a.split.split;
    cfg.neighbors = a.split.neighbors;
    cfg.seed = a.seed;
    let prep = pipeline::prepare(&samples, &cfg)?;
    let truth = prep.require_truth()?;
    let (train, test) = pipeline::stratified_split(truth, cfg.split, cfg.seed)?;
    let mut methods = a.methods.clone();
    methods.sort();
    methods.dedup();
    let results = methods
        .iter()
        .map(|&m| pipeline::classify(m, &prep, &train, &test, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let converged = results.iter().all(|r| r.converged.unwrap_or(true));
    let report = ClassifyReport { results, n_train: train.len(), n_test: test.len(), seed: a.seed, config: &cfg };
    emit_json(a.out.as_deref(), Sink::Stdout, &report)?;
    Ok(Status::from_converged(converged))
}

fn parse_sweep_methods(task: Task, names: &[String]) -> Result<Vec<SweepMethod>, CliError> {
    let mut methods = names
        .iter()
        .map(|n| match task {
            Task::Cluster => ClusterMethod::from_str(n, false).map(SweepMethod::Cluster),
            Task::Classify => ClassifyMethod::from_str(n, false).map(SweepMethod::Classify),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| invalid(format!("unknown method: {e}")))?;
    methods.sort_by_key(|m| m.name());
    methods.dedup();
    Ok(methods)
}

pub fn noise_sweep(a: &SweepArgs) -> Result<Status, CliError> {
    let (samples, mut cfg) = load(&a.input, &a.features)?;
    apply_solver(&mut cfg, &a.solver);
    apply_graph(&mut cfg, &a.graph)?;
    cfg.split = a.split.split;
    cfg.neighbors = a.split.neighbors;
    cfg.seed = a.seed;
    let methods = parse_sweep_methods(a.task, &a.methods)?;
    let mut snrs: Vec<f64> = a.snr.iter().copied().chain(a.snr_db.iter().map(|&db| slrr::features::snr_from_db(db))).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let rows = pipeline::noise_sweep(&samples, &methods, &snrs, a.trials, a.graph.k, &cfg)?;
    emit(a.out.as_deref(), Sink::Stdout, |w| {
        w.write_all(b"method,snr,trial,accuracy\n")?;
        for r in &rows {
            writeln!(w, "{},{},{},{}", r.method, r.snr, r.trial, r.accuracy)?;
        }
        Ok(())
    })?;
    Ok(Status::Ok)
}

/// The dataset written by the `synth` command.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset, CliError> {
    let set = synth::generate::<f64>(spec)?;
    let samples = set
        .points()
        .iter()
        .zip(set.labels())
        .enumerate()
        .map(|(i, (p, &l))| RawSample::new(i.to_string(), p.coords().iter().copied().collect()).with_label(l as i64))
        .collect();
    let columns = (0..=spec.m).map(|c| format!("x{c}")).collect();
    Ok(Dataset { kind: Some(Kind::Sphere), columns, samples })
}

pub fn synth(a: &SynthArgs) -> Result<Status, CliError> {
    let spec = SynthSpec { k: a.k, n_per: a.n_per, m: a.m, spread: a.spread, min_sep: a.min_sep, seed: a.seed };
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    let data = synth_dataset(&spec)?;
    emit(a.out.as_deref(), Sink::Stdout, |w| Ok(sio::write_csv(w, &data)?))?;
    Ok(Status::Ok)
}
