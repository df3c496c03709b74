//! Supremum of the Rayleigh quotient `v^*Hv / v^*v` over the vectors satisfying
//! `v^T S_j v = 0` for every constraint `S_j`.
//!
//! With `f(t) = Σ_{j<k} (t_{2j} + i t_{2j+1}) S_j + t_{2k} S_k` the Hermitian pencil
//!
//! ```text
//!        [ H     conj(f(t)) ]
//! F(t) = [ f(t)  conj(H)    ]  = G + Σ_j t_j H_j
//! ```
//!
//! satisfies `m ≤ ψ(t) := λ₂(F(t))` for every real `t`, and the bound is tight
//! at a global minimizer of ψ where λ₂ is a simple eigenvalue. This module
//! assembles the pencil, evaluates ψ and its gradient, bounds the region that
//! holds the global minimizer, runs the seeded multistart search and extracts
//! a feasible vector that certifies the value.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    c64, eig_hermitian_raw, eigenvalues_descending_raw, lambda_max, lambda_min, spectral_norm,
    ComplexMatrix, HermitianMatrix, LinalgError, SymmetricMatrix,
};
use crate::optim::{hybrid_minimize, Eval, LocalOptions};
use crate::random::{stream_rng, uniform_in_ball, unit_direction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RayleighError {
    #[error("at least one constraint is required")]
    NoConstraints,
    #[error("constraint {index} has dimension {found}, expected {expected}")]
    ConstraintDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("parameter vector has length {found}, expected {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error("invalid solver option: {0}")]
    InvalidOption(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Objective `H` with the ordered constraints `S_0, …, S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    h: HermitianMatrix,
    constraints: Vec<SymmetricMatrix>,
}

impl ConstraintSystem {
    pub fn new(h: HermitianMatrix, constraints: Vec<SymmetricMatrix>) -> Result<Self, RayleighError> {
        if constraints.is_empty() {
            return Err(RayleighError::NoConstraints);
        }
        let n = h.dim();
        for (index, s) in constraints.iter().enumerate() {
            if s.dim() != n {
                return Err(RayleighError::ConstraintDimension {
                    index,
                    expected: n,
                    found: s.dim(),
                });
            }
        }
        Ok(Self { h, constraints })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Index of the last constraint (the one with a real weight).
    pub fn k(&self) -> usize {
        self.constraints.len() - 1
    }

    pub fn param_len(&self) -> usize {
        2 * self.k() + 1
    }

    pub fn h(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn constraints(&self) -> &[SymmetricMatrix] {
        &self.constraints
    }

    /// `(−H, −S_0, …, −S_k)`, whose `m` is minus the infimum of the original.
    pub fn negated(&self) -> Self {
        Self {
            h: self.h.neg(),
            constraints: self.constraints.iter().map(SymmetricMatrix::neg).collect(),
        }
    }

    pub fn check_params(&self, t: &ParamVector) -> Result<(), RayleighError> {
        if t.len() != self.param_len() {
            return Err(RayleighError::ParamLength {
                expected: self.param_len(),
                found: t.len(),
            });
        }
        Ok(())
    }

    /// Complex weight of constraint `j` under the parameter layout.
    fn weight(&self, t: &[f64], j: usize) -> Complex64 {
        if j < self.k() {
            c64(t[2 * j], t[2 * j + 1])
        } else {
            c64(t[2 * j], 0.0)
        }
    }
}

/// Real parameters `(t_0, …, t_{2k})`: pairs `(t_{2j}, t_{2j+1})` weight `S_j` for
/// `j < k`, and `t_{2k}` is the real weight of `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// λ₂, for the supremum.
    SecondLargest,
    /// λ_{2n−1}, for the infimum.
    SecondSmallest,
}

/// `G = diag(H, conj H)` and the coefficient matrices `H_0, …, H_{2k}`.
#[derive(Debug, Clone)]
pub struct PencilAssembly {
    pub g: HermitianMatrix,
    pub blocks: Vec<HermitianMatrix>,
}

impl PencilAssembly {
    pub fn new(sys: &ConstraintSystem) -> Self {
        let n = sys.dim();
        let mut g = ComplexMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(sys.h.as_matrix());
        g.view_mut((n, n), (n, n)).copy_from(&sys.h.conj().into_inner());
        let mut blocks = Vec::with_capacity(sys.param_len());
        let k = sys.k();
        for (j, s) in sys.constraints.iter().enumerate() {
            let s = s.as_matrix();
            blocks.push(HermitianMatrix::from_trusted(off_diagonal(s)));
            if j < k {
                blocks.push(HermitianMatrix::from_trusted(off_diagonal(&s.map(|z| z * Complex64::i()))));
            }
        }
        Self {
            g: HermitianMatrix::from_trusted(g),
            blocks,
        }
    }

    /// `G + Σ t_j H_j`.
    pub fn evaluate(&self, t: &[f64]) -> ComplexMatrix {
        let mut f = self.g.as_matrix().clone();
        for (tj, hj) in t.iter().zip(&self.blocks) {
            if *tj != 0.0 {
                f += hj.as_matrix().map(|z| z * *tj);
            }
        }
        f
    }
}

/// `[[0, conj(S)], [S, 0]]`.
fn off_diagonal(s: &ComplexMatrix) -> ComplexMatrix {
    crate::linalg::takagi_block(s)
}

/// `f(t) = Σ_{j<k}(t_{2j} + i t_{2j+1}) S_j + t_{2k} S_k`.
pub fn assemble_f(sys: &ConstraintSystem, t: &ParamVector) -> Result<ComplexMatrix, RayleighError> {
    sys.check_params(t)?;
    Ok(weighted_constraints(sys, t.as_slice()))
}

fn weighted_constraints(sys: &ConstraintSystem, t: &[f64]) -> ComplexMatrix {
    let n = sys.dim();
    let mut f = ComplexMatrix::zeros(n, n);
    for (j, s) in sys.constraints.iter().enumerate() {
        let w = sys.weight(t, j);
        if w != Complex64::default() {
            f += s.as_matrix().map(|z| z * w);
        }
    }
    f
}

fn pencil_raw(sys: &ConstraintSystem, t: &[f64]) -> ComplexMatrix {
    let n = sys.dim();
    let f = weighted_constraints(sys, t);
    let h = sys.h.as_matrix();
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(h);
    out.view_mut((0, n), (n, n)).copy_from(&f.map(|z| z.conj()));
    out.view_mut((n, 0), (n, n)).copy_from(&f);
    out.view_mut((n, n), (n, n)).copy_from(&h.map(|z| z.conj()));
    out
}

/// The Hermitian pencil `F(t) = [[H, conj f(t)], [f(t), conj H]]`.
pub fn assemble_pencil(sys: &ConstraintSystem, t: &ParamVector) -> Result<HermitianMatrix, RayleighError> {
    sys.check_params(t)?;
    Ok(HermitianMatrix::from_trusted(pencil_raw(sys, t.as_slice())))
}

/// ψ(t) = λ₂(F(t)), or λ_{2n−1}(F(t)) for [`Variant::SecondSmallest`].
pub fn psi(sys: &ConstraintSystem, t: &ParamVector, variant: Variant) -> Result<f64, RayleighError> {
    sys.check_params(t)?;
    Ok(psi_raw(sys, t.as_slice(), variant))
}

fn psi_raw(sys: &ConstraintSystem, t: &[f64], variant: Variant) -> f64 {
    let ev = eigenvalues_descending_raw(&pencil_raw(sys, t));
    match variant {
        Variant::SecondLargest => ev[1],
        Variant::SecondSmallest => ev[ev.len() - 2],
    }
}

#[derive(Debug, Clone)]
pub struct PsiGradient {
    pub value: f64,
    pub grad: Vec<f64>,
    pub is_simple: bool,
    /// Distance from λ₂ to its nearest neighbour in the spectrum.
    pub gap: f64,
    /// Spectral norm of `F(t)`.
    pub pencil_norm: f64,
}

/// Gradient `∂ψ/∂t_j = v^* H_j v` from a unit λ₂-eigenvector `v`.
///
/// When λ₂ is not separated from λ₁ and λ₃ by more than `gap_tol · ‖F‖` the
/// same formula is evaluated with whichever eigenvector the solver returned and
/// `is_simple` is false; the caller must treat it as a subgradient surrogate.
pub fn psi_gradient(sys: &ConstraintSystem, t: &ParamVector, gap_tol: f64) -> Result<PsiGradient, RayleighError> {
    sys.check_params(t)?;
    Ok(psi_gradient_raw(sys, t.as_slice(), gap_tol))
}


/// Value, gradient and gap of λ₂ for a `2n × 2n` matrix whose parameter
/// dependence is `Σ t_j H_j` (shared by ψ and the sphere objective for `c`).
fn second_eigen_with_grad(sys: &ConstraintSystem, m: &ComplexMatrix, gap_tol: f64) -> PsiGradient {
    let n = sys.dim();
    let spec = eig_hermitian_raw(m);
    let ev = &spec.eigenvalues;
    let pencil_norm = ev[0].abs().max(ev[ev.len() - 1].abs());
    let mut gap = ev[0] - ev[1];
    if ev.len() > 2 {
        gap = gap.min(ev[1] - ev[2]);
    }
    let v = spec.eigenvectors.column(1);
    let x = v.rows(0, n);
    let lower = v.rows(n, n);
    let k = sys.k();
    let mut grad = Vec::with_capacity(sys.param_len());
    for (j, s) in sys.constraints.iter().enumerate() {
        // v^*[[0, conj S], [S, 0]]v = 2 Re(q) with q = lower^* S x; the i·S block gives −2 Im(q)
        let sx = s.as_matrix() * x;
        let q: Complex64 = lower.iter().zip(sx.iter()).map(|(a, b)| a.conj() * b).sum();
        grad.push(2.0 * q.re);
        if j < k {
            grad.push(-2.0 * q.im);
        }
    }
    PsiGradient {
        value: ev[1],
        grad,
        is_simple: gap > gap_tol * pencil_norm,
        gap,
        pencil_norm,
    }
}

fn psi_gradient_raw(sys: &ConstraintSystem, t: &[f64], gap_tol: f64) -> PsiGradient {
    second_eigen_with_grad(sys, &pencil_raw(sys, t), gap_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub starts: usize,
    pub seed: u64,
    pub local_tol: f64,
    pub gap_tol: f64,
    pub max_ball_growth: usize,
    pub c_sphere_starts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 30,
            seed: 0,
            local_tol: 1e-10,
            gap_tol: 1e-8,
            max_ball_growth: 3,
            c_sphere_starts: 50,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn validate(&self) -> Result<(), RayleighError> {
        if self.starts == 0 {
            return Err(RayleighError::InvalidOption("starts must be at least 1"));
        }
        if self.c_sphere_starts == 0 {
            return Err(RayleighError::InvalidOption("c_sphere_starts must be at least 1"));
        }
        if !(self.local_tol > 0.0) {
            return Err(RayleighError::InvalidOption("local_tol must be positive"));
        }
        if !(self.gap_tol > 0.0) {
            return Err(RayleighError::InvalidOption("gap_tol must be positive"));
        }
        Ok(())
    }

    fn local(&self) -> LocalOptions {
        LocalOptions {
            grad_tol: self.local_tol,
            ..LocalOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The reported value equals `m` (certified by a feasible vector).
    Exact,
    /// The reported value is an upper bound on `m`.
    UpperBoundOnly,
    /// No bounded search region could be established; the value is still an upper bound.
    UnboundedRegionWarning,
}

/// A feasible unit vector whose Rayleigh quotient matches the optimal ψ value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub v: Vec<Complex64>,
    pub quotient: f64,
    /// `max_j |v^T S_j v| / ‖S_j‖`.
    pub constraint_residual: f64,
    /// `|v^*Hv − λ̂| / ‖H‖`.
    pub quotient_residual: f64,
}

/// Relative validation threshold for certificates.
pub const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub variant: Variant,
    pub t_hat: ParamVector,
    /// min ψ for [`Variant::SecondLargest`], max of λ_{2n−1} for [`Variant::SecondSmallest`].
    pub lambda2_hat: f64,
    pub is_simple: bool,
    pub gap: f64,
    pub certificate: Option<Certificate>,
    pub beta: Option<f64>,
    pub c_value: Option<f64>,
    pub status: SolveStatus,
    pub starts_run: usize,
    pub evaluations: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CBeta {
    pub c: f64,
    pub beta: Option<f64>,
    /// Unit direction attaining the estimate of `c`.
    pub direction: ParamVector,
}

fn sphere_eval(sys: &ConstraintSystem, u: &[f64], gap_tol: f64) -> Eval {
    let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r == 0.0 {
        return Eval {
            value: f64::INFINITY,
            grad: vec![0.0; u.len()],
            smooth: false,
        };
    }
    let t: Vec<f64> = u.iter().map(|x| x / r).collect();
    let m = crate::linalg::takagi_block(&weighted_constraints(sys, &t));
    let g = second_eigen_with_grad(sys, &m, gap_tol);
    let radial: f64 = g.grad.iter().zip(&t).map(|(a, b)| a * b).sum();
    let grad = g.grad.iter().zip(&t).map(|(gj, tj)| (gj - radial * tj) / r).collect();
    Eval {
        value: g.value,
        grad,
        smooth: g.is_simple,
    }
}

/// Multistart estimate of `c = min_{‖t‖=1} λ₂(Σ t_j H_j)` and the radius
/// `β = (λ_max(H) − λ_min(H)) / c` of a ball holding a global minimizer of ψ.
///
/// `β` is absent when `c` is numerically zero, which happens when some
/// nonzero `f(t)` has rank below two.
pub fn compute_c_beta(sys: &ConstraintSystem, opts: &SolverOptions) -> CBeta {
    compute_c_beta_with_hints(sys, opts, &[])
}

fn compute_c_beta_with_hints(sys: &ConstraintSystem, opts: &SolverOptions, hints: &[Vec<f64>]) -> CBeta {
    let d = sys.param_len();
    let (c, direction) = if d == 1 {
        // the sphere is {±1} and λ₂ of [[0, ±S̄], [±S, 0]] is σ₂(S) in both cases
        let e = sphere_eval(sys, &[1.0], opts.gap_tol);
        (e.value, vec![1.0])
    } else {
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            starts.push(e);
        }
        starts.extend(hints.iter().cloned());
        let mut rng = stream_rng(opts.seed ^ 0x5eed_c0de, 0);
        while starts.len() < opts.c_sphere_starts.max(d) + hints.len() {
            starts.push(unit_direction(&mut rng, d));
        }
        let local = opts.local();
        let f = |u: &[f64]| sphere_eval(sys, u, opts.gap_tol);
        let runs: Vec<(f64, Vec<f64>)> = starts
            .par_iter()
            .map(|s| {
                let r = hybrid_minimize(&f, s, &local);
                let norm = r.x.iter().map(|x| x * x).sum::<f64>().sqrt();
                (r.value, r.x.iter().map(|x| x / norm).collect())
            })
            .collect();
        runs.into_iter()
            .fold((f64::INFINITY, vec![0.0; d]), |best, cand| if cand.0 < best.0 { cand } else { best })
    };
    let scale = sys
        .constraints
        .iter()
        .map(|s| spectral_norm(s.as_matrix()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let spread = lambda_max(&sys.h) - lambda_min(&sys.h);
    let beta = if c > 1e-10 * scale { Some(spread.max(0.0) / c) } else { None };
    CBeta {
        c,
        beta,
        direction: ParamVector(direction),
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    index: usize,
    t: Vec<f64>,
    value: f64,
    evaluations: usize,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Smallest value wins; values within 1e-12 are broken by smaller ‖t‖, then by start index.
fn better(a: &Candidate, b: &Candidate) -> bool {
    let tol = 1e-12 * a.value.abs().max(b.value.abs()).max(1.0);
    if (a.value - b.value).abs() > tol {
        return a.value < b.value;
    }
    let (na, nb) = (norm2(&a.t), norm2(&b.t));
    if na != nb {
        return na < nb;
    }
    a.index < b.index
}

fn start_points(d: usize, radius: f64, count: usize, first_index: usize, include_origin: bool, seed: u64) -> Vec<(usize, Vec<f64>)> {
    let mut out = Vec::with_capacity(count);
    let mut index = first_index;
    if include_origin && out.len() < count {
        out.push((index, vec![0.0; d]));
        index += 1;
    }
    for j in 0..d {
        if out.len() >= count {
            break;
        }
        let mut e = vec![0.0; d];
        e[j] = 0.5 * radius;
        out.push((index, e));
        index += 1;
    }
    while out.len() < count {
        let mut rng = stream_rng(seed, index as u64);
        out.push((index, uniform_in_ball(&mut rng, d, radius)));
        index += 1;
    }
    out
}

fn run_starts(sys: &ConstraintSystem, starts: &[(usize, Vec<f64>)], opts: &SolverOptions) -> Vec<Candidate> {
    let local = opts.local();
    let gap_tol = opts.gap_tol;
    let f = |t: &[f64]| {
        let g = psi_gradient_raw(sys, t, gap_tol);
        Eval {
            value: g.value,
            grad: g.grad,
            smooth: g.is_simple,
        }
    };
    starts
        .par_iter()
        .map(|(index, t0)| {
            let r = hybrid_minimize(&f, t0, &local);
            Candidate {
                index: *index,
                t: r.x,
                value: r.value,
                evaluations: r.evaluations,
            }
        })
        .collect()
}

fn select_best(cands: &[Candidate]) -> Candidate {
    let mut best = cands[0].clone();
    for c in &cands[1..] {
        if better(c, &best) {
            best = c.clone();
        }
    }
    best
}

/// Seeded multistart global minimization of ψ (or maximization of λ_{2n−1}).
///
/// Starts are `t = 0`, one point on each axis and uniform samples in the
/// β-ball; each start runs BFGS on the analytic gradient alternated with
/// Nelder–Mead where eigenvalues coalesce. Without a finite β the search
/// repeats over balls of radius `2^i (1 + ‖H‖)`. The result is a pure
/// function of `(sys, variant, opts)`.
pub fn minimize_psi(sys: &ConstraintSystem, variant: Variant, opts: &SolverOptions) -> Result<MinimizationResult, RayleighError> {
    opts.validate()?;
    match variant {
        Variant::SecondLargest => Ok(minimize_second_largest(sys, opts)),
        Variant::SecondSmallest => {
            // λ_{2n−1}(F(t)) = −λ₂(F_neg(t)) for the negated system, at the same t
            let mut r = minimize_second_largest(&sys.negated(), opts);
            r.variant = Variant::SecondSmallest;
            r.lambda2_hat = -r.lambda2_hat;
            if let Some(cert) = r.certificate.as_mut() {
                cert.quotient = -cert.quotient;
            }
            Ok(r)
        }
    }
}

fn minimize_second_largest(sys: &ConstraintSystem, opts: &SolverOptions) -> MinimizationResult {
    let d = sys.param_len();
    let mut diagnostics = Vec::new();
    let mut cb = compute_c_beta(sys, opts);
    let psi0 = lambda_max(&sys.h);

    let mut cands = Vec::new();
    match cb.beta {
        Some(beta) if beta == 0.0 => {
            cands.push(Candidate {
                index: 0,
                t: vec![0.0; d],
                value: psi0,
                evaluations: 1,
            });
        }
        Some(beta) => {
            let starts = start_points(d, beta, opts.starts, 0, true, opts.seed);
            cands = run_starts(sys, &starts, opts);
        }
        None => {
            diagnostics.push(format!(
                "c = {:.3e} is numerically zero; searching balls of growing radius",
                cb.c
            ));
            let r0 = 1.0 + spectral_norm(sys.h.as_matrix());
            let mut next_index = 0;
            for i in 0..=opts.max_ball_growth {
                let radius = r0 * 2f64.powi(i as i32);
                let starts = start_points(d, radius, opts.starts, next_index, i == 0, opts.seed);
                next_index += starts.len();
                cands.extend(run_starts(sys, &starts, opts));
            }
        }
    }
    let starts_run = cands.len();
    let evaluations = cands.iter().map(|c| c.evaluations).sum();
    let mut best = select_best(&cands);

    if best.value > psi0 {
        best = Candidate {
            index: usize::MAX,
            t: vec![0.0; d],
            value: psi0,
            evaluations: 0,
        };
    }

    // a minimizer outside the β-ball with ψ < ψ(0) exposes a sphere direction with a
    // smaller λ₂ than the estimated c; re-estimate c from it
    for _ in 0..3 {
        let Some(beta) = cb.beta else { break };
        let nt = norm2(&best.t);
        if nt <= beta * (1.0 + 1e-8) {
            break;
        }
        let hint: Vec<f64> = best.t.iter().map(|x| x / nt).collect();
        let refined = compute_c_beta_with_hints(sys, opts, &[hint]);
        diagnostics.push(format!(
            "minimizer at ‖t‖ = {nt:.6e} outside β = {beta:.6e}; c re-estimated {:.6e} -> {:.6e}",
            cb.c, refined.c
        ));
        cb = refined;
    }
    if let Some(beta) = cb.beta {
        if norm2(&best.t) > beta * (1.0 + 1e-8) {
            diagnostics.push("minimizer remains outside the β-ball; region bound dropped".into());
            cb.beta = None;
        }
    }

    let g = psi_gradient_raw(sys, &best.t, opts.gap_tol);
    let mut is_simple = g.is_simple;
    let mut certificate = None;
    if is_simple {
        match simple_certificate(sys, &best.t, best.value) {
            Ok(c) => certificate = Some(c),
            Err(reason) => {
                diagnostics.push(format!("simple eigenvalue at optimum but {reason}; treated as non-simple"));
                is_simple = false;
            }
        }
    }
    if certificate.is_none() {
        certificate = cluster_certificate(sys, &best.t, best.value, opts.seed);
        if certificate.is_none() && !is_simple {
            diagnostics.push("optimal eigenvalue is multiple and no feasible certificate was found".into());
        }
    }
    let status = if certificate.is_some() {
        SolveStatus::Exact
    } else if cb.beta.is_none() {
        SolveStatus::UnboundedRegionWarning
    } else {
        SolveStatus::UpperBoundOnly
    };
    MinimizationResult {
        variant: Variant::SecondLargest,
        t_hat: ParamVector(best.t),
        lambda2_hat: best.value,
        is_simple,
        gap: g.gap,
        certificate,
        beta: cb.beta,
        c_value: Some(cb.c),
        status,
        starts_run,
        evaluations,
        diagnostics,
    }
}

/// Checks `v` against the constraint and quotient thresholds.
pub fn validate_certificate(sys: &ConstraintSystem, v: &DVector<Complex64>, target: f64) -> Result<Certificate, String> {
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err("zero certificate vector".into());
    }
    let v = v.unscale(norm);
    let mut constraint_residual: f64 = 0.0;
    for s in &sys.constraints {
        let s_norm = spectral_norm(s.as_matrix()).max(f64::MIN_POSITIVE);
        let q = v.transpose() * s.as_matrix() * &v;
        constraint_residual = constraint_residual.max(q[(0, 0)].norm() / s_norm);
    }
    let quotient = (v.adjoint() * sys.h.as_matrix() * &v)[(0, 0)].re;
    let h_norm = spectral_norm(sys.h.as_matrix());
    let quotient_residual = if h_norm > 0.0 {
        (quotient - target).abs() / h_norm
    } else {
        (quotient - target).abs()
    };
    if constraint_residual > CERTIFICATE_TOL {
        return Err(format!("constraint residual {constraint_residual:.3e} exceeds {CERTIFICATE_TOL:.0e}"));
    }
    if quotient_residual > CERTIFICATE_TOL {
        return Err(format!("quotient residual {quotient_residual:.3e} exceeds {CERTIFICATE_TOL:.0e}"));
    }
    Ok(Certificate {
        v: v.iter().copied().collect(),
        quotient,
        constraint_residual,
        quotient_residual,
    })
}

/// For a simple λ̂₂ with eigenvector `[x; conj y]`, `y = αx` with `|α| = 1`, so
/// `x / ‖x‖` is feasible with quotient λ̂₂.
fn simple_certificate(sys: &ConstraintSystem, t: &[f64], lambda_hat: f64) -> Result<Certificate, String> {
    let n = sys.dim();
    let spec = eig_hermitian_raw(&pencil_raw(sys, t));
    let x: DVector<Complex64> = spec.eigenvectors.column(1).rows(0, n).into_owned();
    validate_certificate(sys, &x, lambda_hat)
}

/// The eigenspace of λ̂₂ is invariant under `J[a; b] = [conj b; conj a]`.
/// Searches the real span of its `J`-fixed vectors `[x; conj x]` for an `x`
/// satisfying every constraint.
fn cluster_certificate(sys: &ConstraintSystem, t: &[f64], lambda_hat: f64, seed: u64) -> Option<Certificate> {
    let n = sys.dim();
    let spec = eig_hermitian_raw(&pencil_raw(sys, t));
    let scale = spec.eigenvalues[0].abs().max(spec.eigenvalues[2 * n - 1].abs()).max(f64::MIN_POSITIVE);
    for rel in [1e-9, 1e-8, 1e-7, 1e-6, 1e-5] {
        let cluster: Vec<usize> = (0..2 * n)
            .filter(|&j| (spec.eigenvalues[j] - lambda_hat).abs() <= rel * scale)
            .collect();
        if cluster.is_empty() {
            continue;
        }
        let basis = fixed_real_basis(&spec.eigenvectors, &cluster, n);
        if basis.is_empty() {
            continue;
        }
        if let Some(cert) = search_fixed_span(sys, &basis, lambda_hat, seed) {
            return Some(cert);
        }
    }
    None
}

fn apply_j(w: &DVector<Complex64>, n: usize) -> DVector<Complex64> {
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = w[n + i].conj();
        out[n + i] = w[i].conj();
    }
    out
}

fn real_inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Real-orthonormal basis of `{w ∈ span(cluster) : Jw = w}`.
fn fixed_real_basis(vectors: &ComplexMatrix, cluster: &[usize], n: usize) -> Vec<DVector<Complex64>> {
    let mut raw = Vec::with_capacity(2 * cluster.len());
    for &j in cluster {
        let u: DVector<Complex64> = vectors.column(j).into_owned();
        let iu = u.map(|z| z * Complex64::i());
        raw.push(&u + apply_j(&u, n));
        raw.push(&iu + apply_j(&iu, n));
    }
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for mut w in raw {
        for b in &basis {
            let p = real_inner(b, &w);
            w -= b.map(|z| z * p);
        }
        let nw = real_inner(&w, &w).sqrt();
        if nw > 1e-6 {
            basis.push(w.unscale(nw));
        }
        if basis.len() == cluster.len() {
            break;
        }
    }
    basis
}

fn search_fixed_span(sys: &ConstraintSystem, basis: &[DVector<Complex64>], lambda_hat: f64, seed: u64) -> Option<Certificate> {
    let n = sys.dim();
    let r = basis.len();
    let top = |c: &[f64]| -> DVector<Complex64> {
        let mut x = DVector::zeros(n);
        for (ci, b) in c.iter().zip(basis) {
            x += b.rows(0, n).map(|z| z * *ci);
        }
        x
    };
    if r == 1 {
        return validate_certificate(sys, &top(&[1.0]), lambda_hat).ok();
    }
    let s_norms: Vec<f64> = sys
        .constraints
        .iter()
        .map(|s| spectral_norm(s.as_matrix()).max(f64::MIN_POSITIVE))
        .collect();
    let h_norm = spectral_norm(sys.h.as_matrix()).max(f64::MIN_POSITIVE);
    let residual = |c: &[f64]| -> f64 {
        let x = top(c);
        let nx2 = x.norm_squared();
        if !(nx2 > 0.0) {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for (s, sn) in sys.constraints.iter().zip(&s_norms) {
            let q = (x.transpose() * s.as_matrix() * &x)[(0, 0)];
            acc += q.norm_sqr() / (sn * sn * nx2 * nx2);
        }
        let quotient = (x.adjoint() * sys.h.as_matrix() * &x)[(0, 0)].re / nx2;
        acc + ((quotient - lambda_hat) / h_norm).powi(2)
    };
    let f = |c: &[f64]| Eval {
        value: residual(c),
        grad: vec![0.0; c.len()],
        smooth: false,
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..r {
        let mut e = vec![0.0; r];
        e[i] = 1.0;
        starts.push(e);
        for j in i + 1..r {
            let mut e = vec![0.0; r];
            e[i] = 1.0;
            e[j] = 1.0;
            starts.push(e.clone());
            e[j] = -1.0;
            starts.push(e);
        }
    }
    let mut rng = stream_rng(seed ^ 0xce27_1f1c, 0);
    for _ in 0..8 {
        starts.push(unit_direction(&mut rng, r));
    }
    let local = LocalOptions {
        max_nm_evals: 400 * r,
        rounds: 4,
        ..LocalOptions::default()
    };
    let mut best: Option<Certificate> = None;
    for s in starts {
        let out = crate::optim::nelder_mead_minimize(&f, &s, 0.25, local.max_nm_evals, local.rounds);
        if let Ok(cert) = validate_certificate(sys, &top(&out.x), lambda_hat) {
            let better = best
                .as_ref()
                .map_or(true, |b| cert.constraint_residual + cert.quotient_residual < b.constraint_residual + b.quotient_residual);
            if better {
                best = Some(cert);
            }
            if best.as_ref().is_some_and(|b| b.constraint_residual < 1e-12) {
                break;
            }
        }
    }
    best
}

/// Re-derives the certificate of a simple optimum; absent when the optimum is
/// not simple or the vector fails validation.
pub fn extract_certificate(sys: &ConstraintSystem, result: &MinimizationResult) -> Option<Certificate> {
    if !result.is_simple {
        return None;
    }
    let (target_sys, sign) = match result.variant {
        Variant::SecondLargest => (sys.clone(), 1.0),
        Variant::SecondSmallest => (sys.negated(), -1.0),
    };
    match simple_certificate(&target_sys, result.t_hat.as_slice(), sign * result.lambda2_hat) {
        Ok(mut c) => {
            c.quotient *= sign;
            Some(c)
        }
        Err(reason) => {
            log::warn!("certificate rejected: {reason}");
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MValue {
    pub value: f64,
    pub bound: BoundKind,
    pub minimization: MinimizationResult,
}

impl MValue {
    pub fn status(&self) -> SolveStatus {
        self.minimization.status
    }
}

/// `m(H, S_0, …, S_k)`: exact when certified, otherwise an upper bound.
pub fn m_value(sys: &ConstraintSystem, opts: &SolverOptions) -> Result<MValue, RayleighError> {
    let r = minimize_psi(sys, Variant::SecondLargest, opts)?;
    Ok(MValue {
        value: r.lambda2_hat,
        bound: if r.status == SolveStatus::Exact {
            BoundKind::Exact
        } else {
            BoundKind::UpperBound
        },
        minimization: r,
    })
}

/// `m̃(H, S_0, …, S_k) = −m(−H, −S_0, …, −S_k)`: exact when certified, otherwise a lower bound.
pub fn m_tilde_value(sys: &ConstraintSystem, opts: &SolverOptions) -> Result<MValue, RayleighError> {
    let r = minimize_psi(sys, Variant::SecondSmallest, opts)?;
    Ok(MValue {
        value: r.lambda2_hat,
        bound: if r.status == SolveStatus::Exact {
            BoundKind::Exact
        } else {
            BoundKind::LowerBound
        },
        minimization: r,
    })
}
