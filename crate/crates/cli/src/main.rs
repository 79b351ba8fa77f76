use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use smartkl::harness::{
    generate_instance, run_certification, run_experiment, CertifyConfig, ComparisonReport, ExperimentConfig,
    ProblemSpec,
};
use smartkl::io::parse_key_values;
use smartkl::{Algorithm, BetaRule, ManifoldKind, SolverConfig};

/// KL regression solvers over the orthant, box and simplex.
#[derive(Parser, Debug)]
#[command(name = "smartkl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an instance to a directory.
    Generate(Common),
    /// Run one algorithm.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Algorithm name, e.g. SMART, FSMART-G or RG-CG-PR.
        #[arg(long)]
        algorithm: String,
    },
    /// Run several algorithms on the same instance.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated algorithm names; defaults to all of them.
        #[arg(long, value_delimiter = ',')]
        algorithm: Vec<String>,
    },
    /// Collect FSMART-E certificates over several seeded instances.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Number of instances, seeded consecutively from --seed.
        #[arg(long, default_value_t = 4)]
        instances: u64,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Problem family with optional parameters, e.g. `expander:m=40`,
    /// `tomo:size=32,angles=10`, `blur`, `toy` or `files:<dir>`.
    #[arg(long, default_value = "toy")]
    problem: String,
    /// Domain to pose the problem on.
    #[arg(long, value_parser = parse_manifold)]
    manifold: Option<ManifoldKind>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Stopping tolerance on the gradient norm.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// File of `key=value` solver parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_manifold(s: &str) -> Result<ManifoldKind, String> {
    ManifoldKind::from_name(s).ok_or_else(|| format!("unknown manifold {s:?}; expected orthant, box or simplex"))
}

/// Parses names like `RG-CG-HS` into a conjugate gradient configuration
/// with the given rule; other names map directly onto [`Algorithm`].
fn solver_config(name: &str) -> Result<SolverConfig> {
    let upper = name.trim().to_ascii_uppercase().replace('_', "-");
    if let Some(rule) = upper.strip_prefix("RG-CG-") {
        let rule: BetaRule = rule.parse()?;
        return Ok(SolverConfig::new(Algorithm::RgCg).with_beta_rule(rule));
    }
    Ok(SolverConfig::new(upper.parse()?))
}

impl Common {
    fn problem(&self) -> Result<ProblemSpec> {
        Ok(self.problem.parse()?)
    }

    fn configure(&self, mut cfg: SolverConfig) -> Result<SolverConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let pairs =
                parse_key_values(&text).map_err(anyhow::Error::msg).with_context(|| path.display().to_string())?;
            for (key, value) in pairs {
                if key == "algorithm" {
                    continue;
                }
                cfg.set(&key, &value).with_context(|| path.display().to_string())?;
            }
        }
        if let Some(tol) = self.tol {
            cfg = cfg.with_grad_tol(tol);
        }
        Ok(cfg.with_max_iter(self.max_iter))
    }

    fn experiment(&self, names: &[String]) -> Result<ExperimentConfig> {
        let algorithms =
            names.iter().map(|n| solver_config(n).and_then(|c| self.configure(c))).collect::<Result<Vec<_>>>()?;
        Ok(ExperimentConfig {
            problem: self.problem()?,
            manifold: self.manifold,
            algorithms,
            max_iter: self.max_iter,
            output_dir: self.out.clone(),
            seed: self.seed,
        })
    }
}

fn print_report(report: &ComparisonReport, out: &Path) {
    println!(
        "{:<12} {:>7} {:>14} {:>12} {:>8} {:>10}  status",
        "algorithm", "iters", "objective", "rel", "matvec", "hamming"
    );
    for r in &report.runs {
        let num = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$e}"));
        let status = match (&r.error, r.termination) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(t)) => format!("{t:?}"),
            (None, None) => String::new(),
        };
        println!(
            "{:<12} {:>7} {:>14} {:>12} {:>8} {:>10}  {}",
            r.label,
            r.iterations,
            num(r.final_objective, 6),
            num(r.final_rel_objective, 3),
            r.average_matvec.map_or("-".into(), |v| format!("{v:.3}")),
            r.threshold_error.map_or("-".into(), |v| v.to_string()),
            status
        );
    }
    println!("results written to {}", out.display());
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(common) => {
            let instance = generate_instance(&common.problem()?, common.manifold, common.seed, &common.out)?;
            let p = &instance.problem;
            println!(
                "{}x{} instance with {} nonzeros on the {} written to {}",
                p.matrix().rows(),
                p.dim(),
                p.matrix().nnz(),
                p.kind().name(),
                common.out.display()
            );
        }
        Command::Solve { common, algorithm } => {
            let report = run_experiment(&common.experiment(&[algorithm])?)?;
            print_report(&report, &common.out);
            if let Some(e) = report.runs.iter().find_map(|r| r.error.as_ref()) {
                bail!("solver failed: {e}");
            }
        }
        Command::Compare { common, algorithm } => {
            let names: Vec<String> = if algorithm.is_empty() {
                Algorithm::ALL.iter().map(|a| a.name().to_string()).collect()
            } else {
                algorithm
            };
            let report = run_experiment(&common.experiment(&names)?)?;
            print_report(&report, &common.out);
        }
        Command::Certify { common, instances } => {
            if instances == 0 {
                bail!("--instances must be positive");
            }
            let cfg = CertifyConfig {
                problem: common.problem()?,
                manifold: common.manifold,
                solver: common.configure(SolverConfig::new(Algorithm::FsmartE))?,
                max_iter: common.max_iter,
                seeds: (common.seed..common.seed + instances).collect(),
                output_dir: common.out.clone(),
            };
            for s in run_certification(&cfg)? {
                let first = s.first_min_iter.map_or("not reached".to_string(), |k| format!("iteration {k}"));
                println!(
                    "{}: gamma {} -> {}, minimum {}",
                    s.instance,
                    s.gammas[0],
                    s.gammas[s.gammas.len() - 1],
                    first
                );
            }
            println!("results written to {}", common.out.display());
        }
    }
    Ok(())
}
