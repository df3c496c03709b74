//! Seeded backward-error studies on random structured polynomials.
//!
//! `pal-table` and `even-table` evaluate both backward errors at random
//! points; `approach-sweep` walks a geometric sequence of points towards a
//! computed eigenvalue. Coefficients come from [`random_structured_polynomial`]
//! on stream 0 of the seed and evaluation points from stream 1.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::backward::{
    eta_structured, eta_unstructured, random_structured_polynomial, BackwardError, MatrixPolynomial, Structure,
};
use crate::io::{ReportRecord, Timings};
use crate::linalg::c64;
use crate::random::{complex_normal, stream_rng};
use crate::rayleigh::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PalTable,
    EvenTable,
    ApproachSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PalTable => "pal-table",
            ExperimentKind::EvenTable => "even-table",
            ExperimentKind::ApproachSweep => "approach-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [ExperimentKind::PalTable, ExperimentKind::EvenTable, ExperimentKind::ApproachSweep]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}' (expected pal-table, even-table or approach-sweep)"))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub degree: usize,
    pub seed: u64,
    /// Random points for the tables, sequence length for the sweep.
    pub points: usize,
    /// Structure of the sweep polynomial (the tables fix their own).
    pub structure: Structure,
    pub solver: SolverOptions,
    pub timings: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, n: usize, degree: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            degree,
            seed,
            points: if kind == ExperimentKind::ApproachSweep { 6 } else { 10 },
            structure: Structure::EvenT,
            solver: SolverOptions::default().with_seed(seed),
            timings: false,
        }
    }

    pub fn structure(&self) -> Structure {
        match self.kind {
            ExperimentKind::PalTable => Structure::PalT,
            ExperimentKind::EvenTable => Structure::EvenT,
            ExperimentKind::ApproachSweep => self.structure,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("n and degree must be at least 1")]
    EmptyProblem,
    #[error("no eigenvalue suitable for the sweep (need a finite, isolated eigenvalue away from the excluded points)")]
    NoTargetEigenvalue,
    #[error(transparent)]
    Backward(#[from] BackwardError),
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub polynomial: MatrixPolynomial,
    /// Eigenvalue approached by the sweep.
    pub target: Option<Complex64>,
    pub records: Vec<ReportRecord>,
}

fn excluded(structure: Structure, z: Complex64, margin: f64) -> bool {
    if z.norm() < margin {
        return true;
    }
    matches!(structure, Structure::PalT | Structure::AntipalT)
        && ((z - c64(1.0, 0.0)).norm() < margin || (z + c64(1.0, 0.0)).norm() < margin)
}

/// Evaluates both backward errors at `lambda`.
pub fn evaluate_point(p: &MatrixPolynomial, lambda: Complex64, opts: &SolverOptions, timings: bool) -> Result<ReportRecord, BackwardError> {
    let start = Instant::now();
    let un = eta_unstructured(p, lambda);
    let rep = eta_structured(p, lambda, opts)?;
    let t_hat = rep
        .minimization
        .as_ref()
        .map(|m| m.t_hat.0.clone())
        .unwrap_or_default();
    Ok(ReportRecord {
        lambda,
        eta_unstructured: un,
        eta_structured: rep.eta,
        status: rep.status.as_str().to_string(),
        m_value: rep.m_value,
        t_hat,
        timings: timings.then(|| Timings {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        }),
    })
}

/// Picks the eigenvalue with the largest separation from the others among
/// those clear of the excluded points; ties go to the earlier one in sorted order.
pub fn sweep_target(p: &MatrixPolynomial) -> Result<(Complex64, f64), ExperimentError> {
    let ev = p.eigenvalues()?;
    let mut best: Option<(Complex64, f64)> = None;
    for (i, &z) in ev.iter().enumerate() {
        if excluded(p.structure(), z, 1e-2) || !z.re.is_finite() || !z.im.is_finite() {
            continue;
        }
        let sep = ev
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, w)| (z - w).norm())
            .fold(f64::INFINITY, f64::min);
        let mut sep = sep.min(z.norm());
        if matches!(p.structure(), Structure::PalT | Structure::AntipalT) {
            sep = sep.min((z - c64(1.0, 0.0)).norm()).min((z + c64(1.0, 0.0)).norm());
        }
        if sep > 1e-3 && best.is_none_or(|(_, s)| sep > s) {
            best = Some((z, sep));
        }
    }
    best.ok_or(ExperimentError::NoTargetEigenvalue)
}

/// `λ_i = z + d · 10^{-i} · u` for `i = 0..count` with `d = min(0.1, sep/4)`.
pub fn sweep_points(target: Complex64, sep: f64, count: usize, direction: Complex64) -> Vec<Complex64> {
    let d = (0.25 * sep).min(0.1);
    let u = direction / direction.norm();
    (0..count).map(|i| target + u * (d * 10f64.powi(-(i as i32)))).collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    if cfg.n == 0 || cfg.degree == 0 {
        return Err(ExperimentError::EmptyProblem);
    }
    let structure = cfg.structure();
    let mut coeff_rng = stream_rng(cfg.seed, 0);
    let p = random_structured_polynomial(&mut coeff_rng, structure, cfg.n, cfg.degree)?;
    let mut point_rng = stream_rng(cfg.seed, 1);
    let (lambdas, target) = match cfg.kind {
        ExperimentKind::PalTable | ExperimentKind::EvenTable => {
            let mut pts = Vec::with_capacity(cfg.points);
            while pts.len() < cfg.points {
                let z = complex_normal(&mut point_rng);
                if !excluded(structure, z, 1e-6) {
                    pts.push(z);
                }
            }
            (pts, None)
        }
        ExperimentKind::ApproachSweep => {
            let (z, sep) = sweep_target(&p)?;
            let dir = complex_normal(&mut point_rng);
            (sweep_points(z, sep, cfg.points, dir), Some(z))
        }
    };
    let records = lambdas
        .par_iter()
        .map(|&z| evaluate_point(&p, z, &cfg.solver, cfg.timings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput {
        polynomial: p,
        target,
        records,
    })
}
