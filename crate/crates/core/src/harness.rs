//! Experiment harness: builds instances, runs solver comparisons and writes
//! CSV traces, summary tables, certificate reports and graymap images.
//!
//! Independent solver runs execute on the rayon thread pool. Every output
//! file is written atomically once all runs of an experiment have finished.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, ImageEncoder, ImageFormat};
use rayon::prelude::*;

use crate::error::HarnessError;
use crate::geometry::{ManifoldKind, Point};
use crate::io::atomic_write;
use crate::problems::{
    blur_instance, expander_instance, read_instance, tomography_instance, toy_problem, write_instance,
    GroundTruthInstance,
};
use crate::solvers::{solve, Algorithm, IterationTrace, SolveResult, SolverConfig, Termination};

/// Header of every per-algorithm trace file.
pub const TRACE_HEADER: [&str; 8] =
    ["iter", "objective", "rel_objective", "grad_norm", "step_size", "matvec_count", "certificate", "inner_backtracks"];

/// Instance family and its parameters.
///
/// The textual form is `tag` or `tag:key=value,key=value`, for example
/// `expander:m=40,n=200` or `tomo:size=32,angles=10,noise=0.01`. Omitted
/// parameters take the defaults shown by [`ProblemSpec::default_for`].
/// `files:<dir>` loads an instance written by [`generate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Toy,
    Expander { m: usize, n: usize, col_weight: usize, sparsity: usize },
    Tomography { size: usize, angles: usize, noise: f64 },
    Blur { size: usize, mask: usize, sigma: f64, noise: f64 },
    FromFiles(PathBuf),
}

impl ProblemSpec {
    /// The family `tag` with default parameters.
    pub fn default_for(tag: &str) -> Result<Self, HarnessError> {
        match tag {
            "toy" => Ok(Self::Toy),
            "expander" => Ok(Self::Expander { m: 40, n: 200, col_weight: 12, sparsity: 20 }),
            "tomo" | "tomography" => Ok(Self::Tomography { size: 32, angles: 10, noise: 0.01 }),
            "blur" => Ok(Self::Blur { size: 32, mask: 9, sigma: 2.0, noise: 0.01 }),
            other => Err(HarnessError::Config(format!("unknown problem {other:?}"))),
        }
    }

    /// Short name used in report files.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Toy => "toy",
            Self::Expander { .. } => "expander",
            Self::Tomography { .. } => "tomo",
            Self::Blur { .. } => "blur",
            Self::FromFiles(_) => "files",
        }
    }

    /// `(height, width)` when the unknowns form an image.
    pub fn image_shape(&self) -> Option<(usize, usize)> {
        match *self {
            Self::Tomography { size, .. } | Self::Blur { size, .. } => Some((size, size)),
            _ => None,
        }
    }

    /// Builds the instance for `seed`. The toy problem ignores the seed.
    pub fn build(&self, seed: u64) -> Result<GroundTruthInstance, HarnessError> {
        Ok(match self {
            Self::Toy => toy_problem(),
            &Self::Expander { m, n, col_weight, sparsity } => expander_instance(m, n, col_weight, sparsity, seed)?,
            &Self::Tomography { size, angles, noise } => tomography_instance(size, angles, noise, seed)?,
            &Self::Blur { size, mask, sigma, noise } => blur_instance(size, mask, sigma, noise, seed)?,
            Self::FromFiles(dir) => read_instance(dir)?,
        })
    }
}

impl FromStr for ProblemSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tag, params) = match s.split_once(':') {
            Some((tag, params)) => (tag.trim(), params.trim()),
            None => (s.trim(), ""),
        };
        if tag == "files" {
            if params.is_empty() {
                return Err(HarnessError::Config("files: needs a directory".into()));
            }
            return Ok(Self::FromFiles(PathBuf::from(params)));
        }
        let mut spec = Self::default_for(tag)?;
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) =
                pair.split_once('=').ok_or_else(|| HarnessError::Config(format!("expected key=value in {pair:?}")))?;
            let bad = || HarnessError::Config(format!("{tag}: invalid value {value:?} for {key}"));
            let count = || value.trim().parse::<usize>().map_err(|_| bad());
            let real = || value.trim().parse::<f64>().map_err(|_| bad());
            match (&mut spec, key.trim()) {
                (Self::Expander { m, .. }, "m") => *m = count()?,
                (Self::Expander { n, .. }, "n") => *n = count()?,
                (Self::Expander { col_weight, .. }, "col_weight") => *col_weight = count()?,
                (Self::Expander { sparsity, .. }, "sparsity") => *sparsity = count()?,
                (Self::Tomography { size, .. }, "size") => *size = count()?,
                (Self::Tomography { angles, .. }, "angles") => *angles = count()?,
                (Self::Tomography { noise, .. }, "noise") => *noise = real()?,
                (Self::Blur { size, .. }, "size") => *size = count()?,
                (Self::Blur { mask, .. }, "mask") => *mask = count()?,
                (Self::Blur { sigma, .. }, "sigma") => *sigma = real()?,
                (Self::Blur { noise, .. }, "noise") => *noise = real()?,
                _ => return Err(HarnessError::Config(format!("{tag} has no parameter {key:?}"))),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Toy => write!(f, "toy"),
            Self::Expander { m, n, col_weight, sparsity } => {
                write!(f, "expander:m={m},n={n},col_weight={col_weight},sparsity={sparsity}")
            }
            Self::Tomography { size, angles, noise } => write!(f, "tomo:size={size},angles={angles},noise={noise}"),
            Self::Blur { size, mask, sigma, noise } => {
                write!(f, "blur:size={size},mask={mask},sigma={sigma},noise={noise}")
            }
            Self::FromFiles(dir) => write!(f, "files:{}", dir.display()),
        }
    }
}

/// A comparison of several solver configurations on one instance.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Domain to pose the instance on; `None` keeps the instance's own.
    pub manifold: Option<ManifoldKind>,
    pub algorithms: Vec<SolverConfig>,
    /// Overrides `max_iter` of every solver configuration.
    pub max_iter: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("no algorithms to run".into()));
        }
        for cfg in &self.algorithms {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one solver run within an experiment.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Unique name within the experiment; also the stem of its output files.
    pub label: String,
    pub algorithm: Algorithm,
    /// `None` when the solver rejected its input before iterating.
    pub trace_file: Option<PathBuf>,
    pub image_file: Option<PathBuf>,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    pub final_rel_objective: Option<f64>,
    pub average_matvec: Option<f64>,
    pub termination: Option<Termination>,
    pub error: Option<String>,
    /// Hamming error after thresholding, when the ground truth is binary.
    pub threshold_error: Option<usize>,
    /// Root mean square distance to the ground truth.
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub runs: Vec<RunSummary>,
    /// Smallest objective seen by any run; the zero of the relative scale.
    pub f_ref: f64,
    pub summary_file: PathBuf,
    pub certificate_file: Option<PathBuf>,
    pub truth_image: Option<PathBuf>,
}

impl ComparisonReport {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// `(f_k - f_ref) / (f_0 - f_ref)` clamped to `[0, 1]`, or all zeros when
/// the trace starts at `f_ref`.
pub fn relative_history(trace: &[IterationTrace], f_ref: f64) -> Vec<f64> {
    let Some(first) = trace.first() else { return Vec::new() };
    let span = first.objective - f_ref;
    if !(span > 0.0) {
        return vec![0.0; trace.len()];
    }
    trace.iter().map(|t| ((t.objective - f_ref) / span).clamp(0.0, 1.0)).collect()
}

/// Number of entries where `x_i ≥ 0.5` disagrees with the binary `x_true`.
///
/// # Panics
/// If the lengths differ.
pub fn threshold_error(x: &[f64], x_true: &[f64]) -> usize {
    assert_eq!(x.len(), x_true.len(), "threshold_error needs vectors of equal length");
    x.iter().zip(x_true).filter(|(xi, ti)| (**xi >= 0.5) != (**ti >= 0.5)).count()
}

/// Final product count divided by the number of iterations. Trace counts
/// start at 0 after the starting point is evaluated. `None` for traces
/// without iterations.
pub fn average_matvec(trace: &[IterationTrace]) -> Option<f64> {
    let last = trace.last()?;
    (last.iter > 0).then(|| last.matvec_count as f64 / last.iter as f64)
}

/// Trace file contents with the fixed [`TRACE_HEADER`]. Missing
/// certificates are written as empty fields.
pub fn trace_csv(trace: &[IterationTrace], f_ref: f64) -> String {
    let rel = relative_history(trace, f_ref);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("writing to memory");
    for (t, r) in trace.iter().zip(rel) {
        w.write_record([
            t.iter.to_string(),
            t.objective.to_string(),
            r.to_string(),
            t.grad_norm.to_string(),
            t.step_size.to_string(),
            t.matvec_count.to_string(),
            t.certificate.map(|c| c.to_string()).unwrap_or_default(),
            t.inner_backtracks.to_string(),
        ])
        .expect("writing to memory");
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is UTF-8")
}

/// Certificate values of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSeries {
    pub instance: String,
    pub gammas: Vec<f64>,
    /// First iteration whose certificate equals `gamma_min`.
    pub first_min_iter: Option<usize>,
}

/// Extracts the certificate series of each named trace.
pub fn certificate_report(
    traces: &[(String, &[IterationTrace])],
    gamma_min: f64,
) -> Result<Vec<CertificateSeries>, HarnessError> {
    traces
        .iter()
        .map(|(name, trace)| {
            let gammas = trace
                .iter()
                .map(|t| t.certificate)
                .collect::<Option<Vec<f64>>>()
                .filter(|g| !g.is_empty())
                .ok_or_else(|| HarnessError::NoCertificates(name.clone()))?;
            let first_min_iter = trace.iter().find(|t| t.certificate == Some(gamma_min)).map(|t| t.iter);
            Ok(CertificateSeries { instance: name.clone(), gammas, first_min_iter })
        })
        .collect()
}

/// Long-format certificate table `instance,iter,gamma`.
pub fn certificate_series_csv(series: &[CertificateSeries]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance", "iter", "gamma"]).expect("writing to memory");
    for s in series {
        for (k, g) in s.gammas.iter().enumerate() {
            w.write_record([s.instance.clone(), k.to_string(), g.to_string()]).expect("writing to memory");
        }
    }
    into_string(w)
}

/// One row per instance: `instance,gamma0,gamma_final,first_gamma_min_iter`.
pub fn certificate_summary_csv(series: &[CertificateSeries]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["instance", "gamma0", "gamma_final", "first_gamma_min_iter"]).expect("writing to memory");
    for s in series {
        w.write_record([
            s.instance.clone(),
            s.gammas[0].to_string(),
            s.gammas[s.gammas.len() - 1].to_string(),
            s.first_min_iter.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .expect("writing to memory");
    }
    into_string(w)
}

/// ASCII graymap (P2, maxval 255) of a row-major image with values in
/// `[0, 1]`; values outside are clamped.
pub fn encode_pgm(values: &[f64], height: usize, width: usize) -> Result<Vec<u8>, HarnessError> {
    if values.len() != height * width {
        return Err(HarnessError::Config(format!(
            "image of {} values does not have shape {height}x{width}",
            values.len()
        )));
    }
    let pixels: Vec<u8> = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Ascii))
        .write_image(&pixels, width as u32, height as u32, ColorType::L8)
        .map_err(|e| HarnessError::Image { path: "<memory>".into(), message: e.to_string() })?;
    Ok(out)
}

/// Reads a graymap back as `(values / 255, height, width)`.
pub fn read_pgm(path: &Path) -> Result<(Vec<f64>, usize, usize), HarnessError> {
    let bytes = std::fs::read(path).map_err(|source| io_error(path, source))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)
        .map_err(|e| HarnessError::Image { path: path.display().to_string(), message: e.to_string() })?
        .into_luma8();
    let (w, h) = img.dimensions();
    Ok((img.into_raw().into_iter().map(|p| f64::from(p) / 255.0).collect(), h as usize, w as usize))
}

pub fn write_pgm(path: &Path, values: &[f64], height: usize, width: usize) -> Result<(), HarnessError> {
    write_file(path, &encode_pgm(values, height, width)?)
}

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    atomic_write(path, contents).map_err(|source| io_error(path, source))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| io_error(dir, source))
}

fn is_binary(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

fn rmse(x: &[f64], y: &[f64]) -> f64 {
    (x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::GradTol => "grad_tol",
        Termination::MaxIter => "max_iter",
        Termination::NumericalError => "numerical_error",
    }
}

/// Output stems: lowercase labels, suffixed with `-2`, `-3`, … on repeats.
fn unique_labels(algorithms: &[SolverConfig]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::with_capacity(algorithms.len());
    for cfg in algorithms {
        let base = cfg.label().to_ascii_lowercase();
        let mut label = base.clone();
        let mut n = 1;
        while seen.contains(&label) {
            n += 1;
            label = format!("{base}-{n}");
        }
        seen.push(label);
    }
    seen
}

/// Builds the instance for `cfg`, posed on the requested domain.
fn prepare(
    problem: &ProblemSpec,
    manifold: Option<ManifoldKind>,
    seed: u64,
) -> Result<GroundTruthInstance, HarnessError> {
    let instance = problem.build(seed)?;
    match manifold {
        Some(kind) if kind != instance.problem.kind() => Ok(instance.with_kind(kind)?),
        _ => Ok(instance),
    }
}

/// Runs every configured algorithm from the barycenter of the instance's
/// domain and writes `<label>.csv` traces, `<label>.pgm` reconstructions for
/// image problems, `truth.pgm`, `summary.csv` and, when FSMART-E is among
/// the algorithms, `certificates.csv`.
///
/// Solver failures are recorded in the report and do not stop other runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport, HarnessError> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let instance = prepare(&cfg.problem, cfg.manifold, cfg.seed)?;
    let problem = &instance.problem;
    let x0 = Point::barycenter(problem.kind(), problem.dim());
    let labels = unique_labels(&cfg.algorithms);

    let results: Vec<Result<SolveResult, String>> = cfg
        .algorithms
        .par_iter()
        .map(|solver| {
            let solver = solver.clone().with_max_iter(cfg.max_iter);
            solve(problem, &x0, &solver).map_err(|e| e.to_string())
        })
        .collect();

    let f_ref = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .flat_map(|r| r.trace.iter().map(|t| t.objective))
        .fold(f64::INFINITY, f64::min);
    let shape = cfg.problem.image_shape();
    let binary_truth = is_binary(&instance.x_true);

    let truth_image = match shape {
        Some((h, w)) => {
            let path = cfg.output_dir.join("truth.pgm");
            write_pgm(&path, &instance.x_true, h, w)?;
            Some(path)
        }
        None => None,
    };

    let mut runs = Vec::with_capacity(results.len());
    let mut certified: Vec<(String, &[IterationTrace])> = Vec::new();
    for ((label, solver), result) in labels.into_iter().zip(&cfg.algorithms).zip(&results) {
        let mut summary = RunSummary {
            label: label.clone(),
            algorithm: solver.algorithm,
            trace_file: None,
            image_file: None,
            iterations: 0,
            final_objective: None,
            final_rel_objective: None,
            average_matvec: None,
            termination: None,
            error: None,
            threshold_error: None,
            rmse: None,
        };
        match result {
            Err(message) => {
                log::warn!("{label}: {message}");
                summary.error = Some(message.clone());
            }
            Ok(res) => {
                let trace_path = cfg.output_dir.join(format!("{label}.csv"));
                write_file(&trace_path, trace_csv(&res.trace, f_ref).as_bytes())?;
                let x = res.final_point.coords();
                if let Some((h, w)) = shape {
                    let path = cfg.output_dir.join(format!("{label}.pgm"));
                    write_pgm(&path, x, h, w)?;
                    summary.image_file = Some(path);
                }
                if solver.algorithm == Algorithm::FsmartE {
                    certified.push((label.clone(), &res.trace));
                }
                summary.trace_file = Some(trace_path);
                summary.iterations = res.iterations();
                summary.final_objective = Some(res.final_objective());
                summary.final_rel_objective = relative_history(&res.trace, f_ref).last().copied();
                summary.average_matvec = average_matvec(&res.trace);
                summary.termination = Some(res.termination);
                summary.error = res.error.as_ref().map(|e| e.to_string());
                summary.threshold_error = binary_truth.then(|| threshold_error(x, &instance.x_true));
                summary.rmse = Some(rmse(x, &instance.x_true));
            }
        }
        runs.push(summary);
    }

    let summary_file = cfg.output_dir.join("summary.csv");
    write_file(&summary_file, summary_csv(&runs).as_bytes())?;
    let certificate_file = if certified.is_empty() {
        None
    } else {
        let gamma_min =
            cfg.algorithms.iter().find(|a| a.algorithm == Algorithm::FsmartE).map_or(1.0, |a| a.e_gamma_min);
        let series = certificate_report(&certified, gamma_min)?;
        let path = cfg.output_dir.join("certificates.csv");
        write_file(&path, certificate_series_csv(&series).as_bytes())?;
        Some(path)
    };
    Ok(ComparisonReport { runs, f_ref, summary_file, certificate_file, truth_image })
}

/// Summary table, one row per run.
pub fn summary_csv(runs: &[RunSummary]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "algorithm",
        "iterations",
        "final_objective",
        "final_rel_objective",
        "average_matvec",
        "termination",
        "threshold_error",
        "rmse",
        "error",
    ])
    .expect("writing to memory");
    for r in runs {
        w.write_record([
            r.label.clone(),
            r.algorithm.name().to_string(),
            r.iterations.to_string(),
            opt(r.final_objective.map(|v| v.to_string())),
            opt(r.final_rel_objective.map(|v| v.to_string())),
            opt(r.average_matvec.map(|v| v.to_string())),
            opt(r.termination.map(|t| termination_name(t).to_string())),
            opt(r.threshold_error.map(|v| v.to_string())),
            opt(r.rmse.map(|v| v.to_string())),
            opt(r.error.clone()),
        ])
        .expect("writing to memory");
    }
    into_string(w)
}

/// Writes the instance for `seed` to `dir`, plus `truth.pgm` for image
/// problems.
pub fn generate_instance(
    problem: &ProblemSpec,
    manifold: Option<ManifoldKind>,
    seed: u64,
    dir: &Path,
) -> Result<GroundTruthInstance, HarnessError> {
    let instance = prepare(problem, manifold, seed)?;
    write_instance(&instance, dir)?;
    if let Some((h, w)) = problem.image_shape() {
        write_pgm(&dir.join("truth.pgm"), &instance.x_true, h, w)?;
    }
    Ok(instance)
}

/// FSMART-E runs on several seeded instances of one problem family.
#[derive(Debug, Clone)]
pub struct CertifyConfig {
    pub problem: ProblemSpec,
    pub manifold: Option<ManifoldKind>,
    /// FSMART-E parameters; the algorithm field is ignored.
    pub solver: SolverConfig,
    pub max_iter: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

/// Runs FSMART-E on each seeded instance and writes `certificates.csv` and
/// `certificate_summary.csv`. Instances are named `seed<seed>`.
pub fn run_certification(cfg: &CertifyConfig) -> Result<Vec<CertificateSeries>, HarnessError> {
    if cfg.seeds.is_empty() {
        return Err(HarnessError::Config("no instances to certify".into()));
    }
    let mut solver = cfg.solver.clone().with_max_iter(cfg.max_iter);
    solver.algorithm = Algorithm::FsmartE;
    solver.validate()?;
    create_dir(&cfg.output_dir)?;
    let traces: Vec<(String, Vec<IterationTrace>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_, HarnessError> {
            let instance = prepare(&cfg.problem, cfg.manifold, seed)?;
            let p = &instance.problem;
            let res = solve(p, &Point::barycenter(p.kind(), p.dim()), &solver)?;
            if let Some(e) = &res.error {
                log::warn!("seed {seed}: {e}");
            }
            Ok((format!("seed{seed}"), res.trace))
        })
        .collect::<Result<_, _>>()?;
    let borrowed: Vec<(String, &[IterationTrace])> = traces.iter().map(|(n, t)| (n.clone(), t.as_slice())).collect();
    let series = certificate_report(&borrowed, solver.e_gamma_min)?;
    write_file(&cfg.output_dir.join("certificates.csv"), certificate_series_csv(&series).as_bytes())?;
    write_file(&cfg.output_dir.join("certificate_summary.csv"), certificate_summary_csv(&series).as_bytes())?;
    Ok(series)
}
