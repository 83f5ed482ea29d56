use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use colnorm::ensemble::{read_dump, write_dump};
use colnorm::harness::{
    erp_check_matrix, run_erp_check, run_inradius, run_moment_experiment, run_positive_control, run_sweep,
    run_trials, EnsembleKind, ExperimentConfig, HarnessError, TSampler,
};
use colnorm::report::{emit_report, render, Report, ReportFormat, ReportRow};

#[derive(Parser)]
#[command(name = "colnorm", version, about = "Column-normalization counterexample experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One report row per seeded trial.
    Trial(Common),
    /// Aggregated event and witness rates per m.
    Sweep(Common),
    /// Normalized moment ratios over random directions.
    Moments(Common),
    /// Certify the exact reconstruction property of order s.
    ErpCheck(ErpArgs),
    /// Inradius of the spike-free column block.
    Inradius(Common),
    /// Certification rate for Gaussian or Rademacher matrices.
    PositiveControl(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated m values for `sweep`.
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "r")]
    r: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    ensemble: Option<EnsembleKind>,
    /// Solve every certification LP in rational arithmetic.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<ReportFormat>,
}

#[derive(Args, Clone)]
struct ErpArgs {
    #[command(flatten)]
    common: Common,
    /// Certify a dumped matrix instead of drawing one.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Write the drawn matrix (and its spike indicators) here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn config(c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| HarnessError::ConfigRefused(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = c.d {
        cfg.d = d;
    }
    if let Some(p) = c.p {
        cfg.p = p;
    }
    if c.m.is_some() {
        cfg.m = c.m;
    }
    if let Some(ms) = &c.m_list {
        cfg.m_list = ms.clone();
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(seed) = c.seed {
        cfg.seed_base = seed;
    }
    if c.delta.is_some() {
        cfg.delta_override = c.delta;
    }
    if c.r.is_some() {
        cfg.r_override = c.r;
    }
    if let Some(s) = c.s {
        cfg.s = s;
    }
    if let Some(e) = c.ensemble {
        cfg.ensemble = e;
    }
    cfg.exact |= c.exact;
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn output<R: ReportRow>(cfg: &ExperimentConfig, command: &str, rows: Vec<R>) -> Result<(), HarnessError> {
    let report = Report { header: cfg.header(command), rows };
    match &cfg.out {
        Some(path) => {
            emit_report(&report, path, cfg.format)?;
        }
        None => print!("{}", render(&report, cfg.format)?),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Trial(c) => {
            let cfg = config(&c)?;
            output(&cfg, "trial", run_trials(&cfg)?)
        }
        Command::Sweep(c) => {
            let cfg = config(&c)?;
            output(&cfg, "sweep", run_sweep(&cfg)?)
        }
        Command::Moments(c) => {
            let cfg = config(&c)?;
            let sampler = TSampler::SparseGaussian { support: cfg.t_support };
            let rows = run_moment_experiment(&cfg, &cfg.q_list, &sampler, cfg.n_vectors)?;
            output(&cfg, "moments", rows)
        }
        Command::ErpCheck(a) => {
            let cfg = config(&a.common)?;
            let rows = match &a.matrix {
                Some(path) => {
                    let dr = read_dump::<f64>(path)?;
                    erp_check_matrix(&dr.gamma, cfg.s, dr.seed, cfg.mode())?
                }
                None => {
                    let (dr, rows) = run_erp_check(&cfg)?;
                    if let Some(path) = &a.dump {
                        write_dump(&dr, path)?;
                    }
                    rows
                }
            };
            output(&cfg, "erp-check", rows)
        }
        Command::Inradius(c) => {
            let cfg = config(&c)?;
            output(&cfg, "inradius", run_inradius(&cfg)?)
        }
        Command::PositiveControl(c) => {
            let cfg = config(&c)?;
            let m = cfg.m.unwrap_or(cfg.d);
            let row = run_positive_control(cfg.d, cfg.s, m, cfg.trials, cfg.ensemble, cfg.seed_base, cfg.mode())?;
            output(&cfg, "positive-control", vec![row])
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("colnorm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
