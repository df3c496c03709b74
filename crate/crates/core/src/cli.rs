//! Command-line interface.
//!
//! Exit codes: 0 when the reported value is exact (or a rank probe verified),
//! 2 when it is only a bound (or the probe failed), 1 on usage or input errors.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::backward::{
    eta_structured, eta_unstructured, expected_full_rank, mu_skew_system, mu_skew_value, rank_condition_probe,
    reduce_to_constraints, skew_pencil_witness, BackwardStatus, RankProbe, RankProbeOptions, RankVerdict, Reduction,
    Structure,
};
use crate::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use crate::io::{format_float, parse_complex, parse_matrix, parse_polynomial, parse_system, records_to_csv, write_file, ReportRecord};
use crate::oracle::{karow_single, penalty_maximize, KarowOptions, PenaltyOptions};
use crate::rayleigh::{m_tilde_value, m_value, BoundKind, MValue, SolveStatus, SolverOptions};

pub const EXIT_EXACT: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_BOUND: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "symrq", version, about = "Rayleigh quotients under complex symmetric constraints and structured backward errors")]
pub struct Cli {
    /// Include wall-clock timings in reports (output is then no longer reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Supremum (or infimum with --tilde) of v*Hv over unit v with v^T S_j v = 0.
    Mhs(MhsArgs),
    /// Structured and unstructured eigenvalue backward errors at one point.
    BackwardError(BackwardArgs),
    /// Seeded random backward-error study written as CSV.
    Experiment(ExperimentArgs),
    /// mu-value of a matrix for skew-symmetric perturbations.
    MuSkew(MuArgs),
    /// Sample the rank of f(t) over the unit sphere of parameters.
    RankCheck(RankArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Multistart count of the global search.
    #[arg(long, default_value_t = 30)]
    pub starts: usize,
    /// Seed of every random choice.
    #[arg(long, env = "RQ_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl SolveArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions::default().with_seed(self.seed).with_starts(self.starts)
    }
}

#[derive(Debug, Clone, Copy, Args)]
#[group(multiple = false)]
pub struct FormatArgs {
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct MhsArgs {
    /// System document `{ n, k, H, constraints }`.
    #[arg(long)]
    pub input: PathBuf,
    /// Report the infimum instead of the supremum.
    #[arg(long)]
    pub tilde: bool,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct BackwardArgs {
    /// Polynomial document `{ degree, n, structure, coefficients }`.
    #[arg(long)]
    pub poly: PathBuf,
    /// Evaluation point, "a+bi" or "a,b".
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: String,
    /// Structure to use instead of the file's tag.
    #[arg(long)]
    pub structure: Option<Structure>,
    /// Cross-check with the penalty oracle (and the one-parameter formula for one constraint).
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub kind: ExperimentKind,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Number of evaluation points (default 10 for tables, 6 for the sweep).
    #[arg(long)]
    pub points: Option<usize>,
    /// Structure of the sweep polynomial.
    #[arg(long, default_value = "even_T")]
    pub structure: Structure,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct MuArgs {
    /// Matrix document `{ n, M }`.
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// System document.
    #[arg(long, conflicts_with_all = ["poly", "lambda"], required_unless_present = "poly")]
    pub input: Option<PathBuf>,
    /// Polynomial document; the system comes from its reduction at --lambda.
    #[arg(long, requires = "lambda")]
    pub poly: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "RQ_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Rank expected at every nonzero parameter point.
    #[arg(long)]
    pub full_rank: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error(transparent)]
    Backward(#[from] crate::backward::BackwardError),
    #[error(transparent)]
    Rayleigh(#[from] crate::rayleigh::RayleighError),
    #[error(transparent)]
    Experiment(#[from] crate::experiment::ExperimentError),
    #[error("{0}")]
    Usage(String),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn elapsed_ms(start: Instant, on: bool) -> Option<f64> {
    on.then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Runs a parsed command, writing the report to `out`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    match &cli.command {
        Command::Mhs(a) => cmd_mhs(a, cli.timings, out),
        Command::BackwardError(a) => cmd_backward_error(a, cli.timings, out),
        Command::Experiment(a) => cmd_experiment(a, cli.timings, out),
        Command::MuSkew(a) => cmd_mu_skew(a, cli.timings, out),
        Command::RankCheck(a) => cmd_rank_check(a, out),
    }
}

#[derive(Debug, Serialize)]
struct CertificateReport {
    v: Vec<Complex64>,
    constraint_residual: f64,
    quotient_residual: f64,
}

#[derive(Debug, Serialize)]
struct MhsReport {
    quantity: &'static str,
    value: f64,
    bound: BoundKind,
    status: SolveStatus,
    lambda2_hat: f64,
    t_hat: Vec<f64>,
    beta: Option<f64>,
    c: Option<f64>,
    is_simple: bool,
    certificate: Option<CertificateReport>,
    starts: usize,
    seed: u64,
    diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Exact => "exact",
        SolveStatus::UpperBoundOnly => "upper_bound_only",
        SolveStatus::UnboundedRegionWarning => "unbounded_region_warning",
    }
}

fn bound_str(b: BoundKind) -> &'static str {
    match b {
        BoundKind::Exact => "exact",
        BoundKind::UpperBound => "upper_bound",
        BoundKind::LowerBound => "lower_bound",
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn mhs_report(r: &MValue, tilde: bool, opts: &SolverOptions, elapsed: Option<f64>) -> MhsReport {
    let m = &r.minimization;
    MhsReport {
        quantity: if tilde { "m_tilde" } else { "m" },
        value: r.value,
        bound: r.bound,
        status: m.status,
        lambda2_hat: m.lambda2_hat,
        t_hat: m.t_hat.0.clone(),
        beta: m.beta,
        c: m.c_value,
        is_simple: m.is_simple,
        certificate: m.certificate.as_ref().map(|c| CertificateReport {
            v: c.v.clone(),
            constraint_residual: c.constraint_residual,
            quotient_residual: c.quotient_residual,
        }),
        starts: opts.starts,
        seed: opts.seed,
        diagnostics: m.diagnostics.clone(),
        elapsed_ms: elapsed,
    }
}

fn cmd_mhs(a: &MhsArgs, timings: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let start = Instant::now();
    let sys = parse_system(&a.input)?;
    let opts = a.solve.options();
    let r = if a.tilde { m_tilde_value(&sys, &opts)? } else { m_value(&sys, &opts)? };
    let rep = mhs_report(&r, a.tilde, &opts, elapsed_ms(start, timings));
    if a.format.json {
        write_json(out, &rep)?;
    } else if a.format.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value", "bound", "status", "lambda2_hat", "beta", "c", "constraint_residual", "quotient_residual"])
            .map_err(crate::io::IoError::from)?;
        let cert = rep.certificate.as_ref();
        w.write_record([
            rep.quantity.to_string(),
            format_float(rep.value),
            bound_str(rep.bound).into(),
            status_str(rep.status).into(),
            format_float(rep.lambda2_hat),
            opt_float(rep.beta),
            opt_float(rep.c),
            opt_float(cert.map(|c| c.constraint_residual)),
            opt_float(cert.map(|c| c.quotient_residual)),
        ])
        .map_err(crate::io::IoError::from)?;
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.into_error()))?;
        out.write_all(&bytes)?;
    } else {
        writeln!(out, "{} = {}", rep.quantity, rep.value)?;
        writeln!(out, "bound: {}", bound_str(rep.bound))?;
        writeln!(out, "status: {}", status_str(rep.status))?;
        writeln!(out, "lambda2_hat: {}", rep.lambda2_hat)?;
        writeln!(out, "t_hat: {:?}", rep.t_hat)?;
        writeln!(out, "beta: {}", rep.beta.map_or("absent".into(), |b| b.to_string()))?;
        writeln!(out, "c: {}", rep.c.map_or("absent".into(), |c| c.to_string()))?;
        writeln!(out, "simple: {}", rep.is_simple)?;
        match &rep.certificate {
            Some(c) => writeln!(
                out,
                "certificate: constraint residual {:e}, quotient residual {:e}",
                c.constraint_residual, c.quotient_residual
            )?,
            None => writeln!(out, "certificate: absent")?,
        }
        for d in &rep.diagnostics {
            writeln!(out, "note: {d}")?;
        }
        if let Some(ms) = rep.elapsed_ms {
            writeln!(out, "elapsed_ms: {ms:.3}")?;
        }
    }
    Ok(if r.bound == BoundKind::Exact { EXIT_EXACT } else { EXIT_BOUND })
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    penalty_value: Option<f64>,
    penalty_delta: Option<f64>,
    line_search_value: Option<f64>,
    line_search_delta: Option<f64>,
    diagnostics: Vec<String>,
}

#[derive(Debug, Serialize)]
struct BackwardReport {
    structure: Structure,
    #[serde(flatten)]
    record: ReportRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<VerifyReport>,
}

fn relative_delta(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn cmd_backward_error(a: &BackwardArgs, timings: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let start = Instant::now();
    let mut p = parse_polynomial(&a.poly)?;
    if let Some(s) = a.structure {
        p = p.with_structure(s)?;
    }
    let lambda = parse_complex(&a.lambda).map_err(CliError::Usage)?;
    let opts = a.solve.options();
    let rep = eta_structured(&p, lambda, &opts)?;
    let verify = if a.verify {
        Some(match &rep.system {
            None => VerifyReport {
                penalty_value: None,
                penalty_delta: None,
                line_search_value: None,
                line_search_delta: None,
                diagnostics: vec!["lambda is an eigenvalue; nothing to verify".into()],
            },
            Some(sys) => {
                let pen = penalty_maximize(
                    sys,
                    &PenaltyOptions {
                        seed: opts.seed,
                        ..PenaltyOptions::default()
                    },
                );
                let mut diagnostics = pen.diagnostics.clone();
                let line = (sys.constraints().len() == 1).then(|| {
                    let k = karow_single(sys.h(), &sys.constraints()[0], &KarowOptions::default());
                    if let Some(w) = &k.warning {
                        diagnostics.push(w.clone());
                    }
                    k.value
                });
                VerifyReport {
                    penalty_value: pen.value,
                    penalty_delta: pen.value.map(|v| relative_delta(v, rep.m_value)),
                    line_search_value: line,
                    line_search_delta: line.map(|v| relative_delta(v, rep.m_value)),
                    diagnostics,
                }
            }
        })
    } else {
        None
    };
    let record = ReportRecord {
        lambda,
        eta_unstructured: eta_unstructured(&p, lambda),
        eta_structured: rep.eta,
        status: rep.status.as_str().into(),
        m_value: rep.m_value,
        t_hat: rep.minimization.as_ref().map(|m| m.t_hat.0.clone()).unwrap_or_default(),
        timings: timings.then(|| crate::io::Timings {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        }),
    };
    let report = BackwardReport {
        structure: p.structure(),
        record,
        verify,
    };
    if a.format.json {
        write_json(out, &report)?;
    } else if a.format.csv {
        out.write_all(records_to_csv(std::slice::from_ref(&report.record))?.as_bytes())?;
    } else {
        let r = &report.record;
        writeln!(out, "structure: {}", report.structure)?;
        writeln!(out, "lambda: {}", r.lambda)?;
        writeln!(out, "eta_unstructured: {}", r.eta_unstructured)?;
        writeln!(out, "eta_structured: {}", r.eta_structured)?;
        writeln!(out, "status: {}", r.status)?;
        writeln!(out, "m_value: {}", r.m_value)?;
        writeln!(out, "t_hat: {:?}", r.t_hat)?;
        if let Some(v) = &report.verify {
            writeln!(out, "penalty_value: {}", v.penalty_value.map_or("absent".into(), |x| x.to_string()))?;
            writeln!(out, "penalty_delta: {}", v.penalty_delta.map_or("absent".into(), |x| format!("{x:e}")))?;
            if let Some(k) = v.line_search_value {
                writeln!(out, "line_search_value: {k}")?;
                writeln!(out, "line_search_delta: {:e}", v.line_search_delta.unwrap_or(f64::NAN))?;
            }
            for d in &v.diagnostics {
                writeln!(out, "note: {d}")?;
            }
        }
        if let Some(t) = r.timings {
            writeln!(out, "elapsed_ms: {:.3}", t.total_ms)?;
        }
    }
    Ok(if rep.status == BackwardStatus::Exact { EXIT_EXACT } else { EXIT_BOUND })
}

fn cmd_experiment(a: &ExperimentArgs, timings: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut cfg = ExperimentConfig::new(a.kind, a.n, a.degree, a.solve.seed);
    if let Some(p) = a.points {
        if p == 0 {
            return Err(CliError::Usage("--points must be at least 1".into()));
        }
        cfg.points = p;
    }
    cfg.structure = a.structure;
    cfg.solver = a.solve.options();
    cfg.timings = timings;
    let res = run_experiment(&cfg)?;
    let text = records_to_csv(&res.records)?;
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            writeln!(out, "wrote {} rows to {}", res.records.len(), path.display())?;
            if let Some(z) = res.target {
                writeln!(out, "target eigenvalue: {z}")?;
            }
            if timings {
                for r in &res.records {
                    if let Some(t) = r.timings {
                        writeln!(out, "lambda {}: {:.3} ms", r.lambda, t.total_ms)?;
                    }
                }
            }
        }
        None => out.write_all(text.as_bytes())?,
    }
    let all_exact = res.records.iter().all(|r| r.status == BackwardStatus::Exact.as_str());
    Ok(if all_exact { EXIT_EXACT } else { EXIT_BOUND })
}

#[derive(Debug, Serialize)]
struct MuOutput {
    mu: f64,
    m_value: f64,
    status: SolveStatus,
    line_search_mu: f64,
    line_search_delta: f64,
    warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

fn cmd_mu_skew(a: &MuArgs, timings: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let start = Instant::now();
    let m = parse_matrix(&a.matrix)?;
    let rep = mu_skew_value(&m, &a.solve.options())?;
    let sys = mu_skew_system(&m)?;
    let k = karow_single(sys.h(), &sys.constraints()[0], &KarowOptions::default());
    let line_search_mu = k.value.max(0.0).sqrt();
    let o = MuOutput {
        mu: rep.mu,
        m_value: rep.m.value,
        status: rep.m.status(),
        line_search_mu,
        line_search_delta: relative_delta(rep.mu, line_search_mu),
        warning: rep.warning.clone(),
        elapsed_ms: elapsed_ms(start, timings),
    };
    if a.json {
        write_json(out, &o)?;
    } else {
        writeln!(out, "mu: {}", o.mu)?;
        writeln!(out, "m_value: {}", o.m_value)?;
        writeln!(out, "status: {}", status_str(o.status))?;
        writeln!(out, "line_search_mu: {}", o.line_search_mu)?;
        writeln!(out, "line_search_delta: {:e}", o.line_search_delta)?;
        if let Some(w) = &o.warning {
            writeln!(out, "warning: {w}")?;
        }
        if let Some(ms) = o.elapsed_ms {
            writeln!(out, "elapsed_ms: {ms:.3}")?;
        }
    }
    Ok(if o.status == SolveStatus::Exact { EXIT_EXACT } else { EXIT_BOUND })
}

fn cmd_rank_check(a: &RankArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut opts = RankProbeOptions {
        trials: a.trials,
        seed: a.seed,
        full_rank: a.full_rank,
        ..RankProbeOptions::default()
    };
    let sys = match (&a.input, &a.poly) {
        (Some(path), _) => parse_system(path)?,
        (None, Some(path)) => {
            let p = parse_polynomial(path)?;
            let text = a.lambda.as_deref().ok_or_else(|| CliError::Usage("--lambda is required with --poly".into()))?;
            let lambda = parse_complex(text).map_err(CliError::Usage)?;
            if opts.full_rank.is_none() {
                opts.full_rank = expected_full_rank(p.structure(), p.size());
            }
            if p.structure() == Structure::SkewT && p.degree() == 1 {
                opts.witnesses.push(skew_pencil_witness(lambda));
                opts.full_rank.get_or_insert(2 * p.size());
            }
            match reduce_to_constraints(&p, lambda)? {
                Reduction::System(s) => s,
                Reduction::Eigenvalue { sigma_min } => {
                    return Err(CliError::Usage(format!(
                        "lambda is an eigenvalue of the polynomial (sigma_min = {sigma_min:e}); no system to probe"
                    )))
                }
            }
        }
        (None, None) => return Err(CliError::Usage("one of --input or --poly is required".into())),
    };
    let probe: RankProbe = rank_condition_probe(&sys, &opts)?;
    if a.json {
        write_json(out, &probe)?;
    } else {
        writeln!(out, "verdict: {}", probe.verdict.as_str())?;
        writeln!(out, "min_rank: {}", probe.min_rank)?;
        writeln!(out, "required_rank: {}", probe.required_rank)?;
        writeln!(out, "points_checked: {}", probe.points_checked)?;
        if let (Some(w), Some(r)) = (&probe.witness, probe.witness_rank) {
            writeln!(out, "witness: {:?} (rank {r})", w.0)?;
        }
    }
    Ok(match probe.verdict {
        RankVerdict::VerifiedFull | RankVerdict::VerifiedGe2 => EXIT_EXACT,
        RankVerdict::Failed | RankVerdict::Inconclusive => EXIT_BOUND,
    })
}
