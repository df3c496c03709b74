//! Structured eigenvalue backward errors of matrix polynomials.
//!
//! For `P(z) = Σ z^j A_j` with structured coefficients and a point `λ` where
//! `M = P(λ)^{-1}` exists, the structured backward error equals
//! `m(H, S_0, …, S_k)^{-1/2}` for a Hermitian `H` and complex symmetric `S_j`
//! of size `(m+1)n` built from `M` and `Λ_m = [1, λ, …, λ^m]`.
//!
//! Basis vectors `e_1, …, e_{m+1}` are 1-based, so the matrix `C_j` built from
//! `e_{j+1}` touches coefficient index `j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    c64, check_finite, kron, numerical_rank, singular_values, spectral_norm,
    ComplexMatrix, HermitianMatrix, LinalgError, SymmetricMatrix, DEFAULT_RANK_TOL,
};
use crate::random::{random_complex, stream_rng, unit_direction};
use crate::rayleigh::{
    m_value, ConstraintSystem, MValue, MinimizationResult, ParamVector, RayleighError, SolveStatus, SolverOptions,
};

/// Relative tolerance of the coefficient structure check.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// `P(λ)` is treated as singular when `σ_min ≤ SINGULAR_TOL · σ_max`.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Minimum distance of `λ` from `±1` for the palindromic structures.
pub const UNIT_EXCLUSION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackwardError {
    #[error("a matrix polynomial needs degree at least 1 (got {0} coefficients)")]
    DegreeTooSmall(usize),
    #[error("coefficient {index} has shape {rows}x{cols}, expected {n}x{n}")]
    CoefficientShape {
        index: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("coefficient {index}: {source}")]
    Coefficient {
        index: usize,
        #[source]
        source: LinalgError,
    },
    #[error("{structure} structure violated: A_{index}^T differs from {sign}A_{partner} by relative {deviation:.3e}")]
    StructureViolation {
        structure: Structure,
        index: usize,
        partner: usize,
        sign: &'static str,
        deviation: f64,
    },
    #[error("lambda = {lambda} is excluded for {structure}: {reason}")]
    ExcludedLambda {
        lambda: Complex64,
        structure: Structure,
        reason: &'static str,
    },
    #[error("structured backward error needs a structure tag other than none")]
    Unstructured,
    #[error("leading coefficient is singular; eigenvalues at infinity are not supported")]
    SingularLeading,
    #[error("inverse of P(lambda) is inaccurate: residual {0:.3e}")]
    InaccurateInverse(f64),
    #[error(transparent)]
    Rayleigh(#[from] RayleighError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "pal_T")]
    PalT,
    #[serde(rename = "antipal_T")]
    AntipalT,
    #[serde(rename = "even_T")]
    EvenT,
    #[serde(rename = "odd_T")]
    OddT,
    #[serde(rename = "skew_T")]
    SkewT,
    #[serde(rename = "none")]
    None,
}

impl Structure {
    pub const ALL: [Structure; 6] = [
        Structure::PalT,
        Structure::AntipalT,
        Structure::EvenT,
        Structure::OddT,
        Structure::SkewT,
        Structure::None,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Structure::PalT => "pal_T",
            Structure::AntipalT => "antipal_T",
            Structure::EvenT => "even_T",
            Structure::OddT => "odd_T",
            Structure::SkewT => "skew_T",
            Structure::None => "none",
        }
    }

    /// `(partner, sign)` with `A_j^T = sign · A_partner`, or `None` when unconstrained.
    fn relation(self, j: usize, m: usize) -> Option<(usize, f64)> {
        let parity = if j % 2 == 0 { 1.0 } else { -1.0 };
        match self {
            Structure::PalT => Some((m - j, 1.0)),
            Structure::AntipalT => Some((m - j, -1.0)),
            Structure::EvenT => Some((j, parity)),
            Structure::OddT => Some((j, -parity)),
            Structure::SkewT => Some((j, -1.0)),
            Structure::None => None,
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Structure::ALL
            .into_iter()
            .find(|st| st.tag().eq_ignore_ascii_case(s) || st.tag().replace('_', "-").eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown structure '{s}' (expected pal_T, antipal_T, even_T, odd_T, skew_T or none)"))
    }
}

/// `P(z) = Σ_{j=0}^m z^j A_j` with a verified structure tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coefficients: Vec<ComplexMatrix>,
    structure: Structure,
}

impl MatrixPolynomial {
    pub fn new(coefficients: Vec<ComplexMatrix>, structure: Structure) -> Result<Self, BackwardError> {
        if coefficients.len() < 2 {
            return Err(BackwardError::DegreeTooSmall(coefficients.len()));
        }
        let n = coefficients[0].nrows();
        for (index, a) in coefficients.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n || n == 0 {
                return Err(BackwardError::CoefficientShape {
                    index,
                    rows: a.nrows(),
                    cols: a.ncols(),
                    n: n.max(1),
                });
            }
            check_finite(a).map_err(|source| BackwardError::Coefficient { index, source })?;
        }
        let p = Self {
            coefficients,
            structure,
        };
        p.check_structure(structure)?;
        Ok(p)
    }

    /// Verifies that the coefficients carry `structure` to [`STRUCTURE_TOL`].
    pub fn check_structure(&self, structure: Structure) -> Result<(), BackwardError> {
        let m = self.degree();
        let scale = self
            .coefficients
            .iter()
            .map(|a| a.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for j in 0..=m {
            let Some((partner, sign)) = structure.relation(j, m) else {
                continue;
            };
            let diff = self.coefficients[j].transpose() - self.coefficients[partner].map(|z| z * sign);
            let deviation = diff.norm() / scale;
            if deviation > STRUCTURE_TOL {
                return Err(BackwardError::StructureViolation {
                    structure,
                    index: j,
                    partner,
                    sign: if sign > 0.0 { "" } else { "-" },
                    deviation,
                });
            }
        }
        Ok(())
    }

    /// Same coefficients under another tag, re-validated.
    pub fn with_structure(&self, structure: Structure) -> Result<Self, BackwardError> {
        self.check_structure(structure)?;
        Ok(Self {
            coefficients: self.coefficients.clone(),
            structure,
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn size(&self) -> usize {
        self.coefficients[0].nrows()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn coefficients(&self) -> &[ComplexMatrix] {
        &self.coefficients
    }

    /// `P(λ)` by Horner's rule.
    pub fn evaluate(&self, lambda: Complex64) -> ComplexMatrix {
        let mut acc = self.coefficients[self.degree()].clone();
        for a in self.coefficients.iter().rev().skip(1) {
            acc = acc.map(|z| z * lambda) + a;
        }
        acc
    }

    /// Finite eigenvalues from the block companion matrix of `A_m^{-1} P`.
    ///
    /// When `A_m` is singular the reversed polynomial `z^m P(1/z)` is used
    /// instead and its zero eigenvalues (infinite ones of `P`) are dropped.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, BackwardError> {
        let m = self.degree();
        let mut out = match companion_eigenvalues(&self.coefficients) {
            Some(ev) => ev,
            None => {
                let reversed: Vec<ComplexMatrix> = self.coefficients.iter().rev().cloned().collect();
                let ev = companion_eigenvalues(&reversed).ok_or(BackwardError::SingularLeading)?;
                let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
                ev.into_iter()
                    .filter(|z| z.norm() > 1e-8 * scale)
                    .map(|z| z.inv())
                    .collect()
            }
        };
        debug_assert!(out.len() <= m * self.size());
        for z in out.iter_mut() {
            *z = self.newton_refine(*z);
        }
        out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(out)
    }

    /// A few Newton steps on `det P` via `tr(P(z)^{-1} P'(z))`.
    fn newton_refine(&self, z0: Complex64) -> Complex64 {
        let mut z = z0;
        let scale = self.coefficients.iter().map(|a| a.norm()).fold(0.0, f64::max);
        for _ in 0..3 {
            let p = self.evaluate(z);
            if sigma_min_cheap(&p) <= 1e-14 * scale * (1.0 + z.norm()).powi(self.degree() as i32) {
                break;
            }
            let Some(inv) = p.try_inverse() else { break };
            let dp = self.derivative_at(z);
            let tr = (inv * dp).trace();
            if tr.norm() == 0.0 {
                break;
            }
            let step = tr.inv();
            if step.norm() > 1e-6 * (1.0 + z.norm()) {
                break;
            }
            z -= step;
        }
        z
    }

    fn derivative_at(&self, z: Complex64) -> ComplexMatrix {
        let m = self.degree();
        let mut acc = self.coefficients[m].map(|w| w * m as f64);
        for j in (1..m).rev() {
            acc = acc.map(|w| w * z) + self.coefficients[j].map(|w| w * j as f64);
        }
        acc
    }
}

fn sigma_min_cheap(a: &ComplexMatrix) -> f64 {
    *singular_values(a).last().unwrap_or(&0.0)
}

/// Eigenvalues of the block companion matrix, or `None` when the last coefficient is singular.
fn companion_eigenvalues(coefficients: &[ComplexMatrix]) -> Option<Vec<Complex64>> {
    let m = coefficients.len() - 1;
    let n = coefficients[0].nrows();
    let lead = &coefficients[m];
    let s = singular_values(lead);
    if s[n - 1] <= SINGULAR_TOL * s[0] {
        return None;
    }
    let lu = lead.clone().lu();
    let mut c = ComplexMatrix::zeros(m * n, m * n);
    for b in 0..m - 1 {
        for i in 0..n {
            c[(b * n + i, (b + 1) * n + i)] = c64(1.0, 0.0);
        }
    }
    for (j, a) in coefficients.iter().take(m).enumerate() {
        let bj = lu.solve(a)?;
        c.view_mut(((m - 1) * n, j * n), (n, n)).copy_from(&(-bj));
    }
    Some(c.eigenvalues()?.iter().copied().collect())
}

/// `Λ_m = [1, λ, …, λ^m]` as a `1 × (m+1)` row.
pub fn lambda_row(lambda: Complex64, m: usize) -> ComplexMatrix {
    let mut row = ComplexMatrix::zeros(1, m + 1);
    let mut p = c64(1.0, 0.0);
    for j in 0..=m {
        row[(0, j)] = p;
        p *= lambda;
    }
    row
}

/// Diagonal of `Γ ⊗ I_n` for the palindromic reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaScaling {
    /// Per-coefficient factors `(γ_{01}, …, γ_{k1}, [1], γ_{k2}, …, γ_{02})`.
    pub factors: Vec<f64>,
    pub n: usize,
}

impl GammaScaling {
    pub fn diagonal(&self) -> Vec<f64> {
        self.factors
            .iter()
            .flat_map(|&g| std::iter::repeat_n(g, self.n))
            .collect()
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let d = self.diagonal();
        ComplexMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&x| c64(x, 0.0))))
    }

    /// `Γ^{-1} A Γ^{-1}` for a square `A` of matching size.
    fn sandwich_inverse(&self, a: &ComplexMatrix) -> ComplexMatrix {
        let d = self.diagonal();
        let mut out = a.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] /= d[i] * d[j];
            }
        }
        out
    }
}

/// `γ_{j1} = √(2/(1+|λ|^{m−2j}))`, `γ_{j2} = √(2|λ|^{m−2j}/(1+|λ|^{m−2j}))`, `j = 0..=⌊(m−1)/2⌋`.
pub fn gamma_scaling(lambda: Complex64, m: usize, n: usize) -> Result<GammaScaling, BackwardError> {
    if lambda.norm() == 0.0 {
        return Err(BackwardError::ExcludedLambda {
            lambda,
            structure: Structure::PalT,
            reason: "Gamma scaling requires lambda != 0",
        });
    }
    let k = (m - 1) / 2;
    let r = lambda.norm();
    let mut first = Vec::with_capacity(k + 1);
    let mut second = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let p = r.powi(m as i32 - 2 * j as i32);
        first.push((2.0 / (1.0 + p)).sqrt());
        second.push((2.0 * p / (1.0 + p)).sqrt());
    }
    let mut factors = first;
    if m % 2 == 0 {
        factors.push(1.0);
    }
    factors.extend(second.into_iter().rev());
    Ok(GammaScaling { factors, n })
}

/// `P(λ)`, its inverse `M` and `Λ_m` at a regular point.
#[derive(Debug, Clone)]
pub struct EvaluationPoint {
    pub lambda: Complex64,
    pub m: ComplexMatrix,
    pub lambda_row: ComplexMatrix,
}

/// Outcome of reducing `(P, λ)` to a constraint system.
#[derive(Debug, Clone)]
pub enum Reduction {
    System(ConstraintSystem),
    /// `P(λ)` is numerically singular: `λ` is already an eigenvalue.
    Eigenvalue { sigma_min: f64 },
}

fn check_lambda(structure: Structure, lambda: Complex64) -> Result<(), BackwardError> {
    if structure == Structure::None {
        return Err(BackwardError::Unstructured);
    }
    if lambda.norm() == 0.0 {
        return Err(BackwardError::ExcludedLambda {
            lambda,
            structure,
            reason: "the reduction requires lambda != 0",
        });
    }
    if matches!(structure, Structure::PalT | Structure::AntipalT) {
        let one = c64(1.0, 0.0);
        if (lambda - one).norm() < UNIT_EXCLUSION_TOL || (lambda + one).norm() < UNIT_EXCLUSION_TOL {
            return Err(BackwardError::ExcludedLambda {
                lambda,
                structure,
                reason: "the palindromic reduction requires lambda not in {0, 1, -1}",
            });
        }
    }
    Ok(())
}

/// Evaluates `P(λ)` and inverts it, or reports that `λ` is an eigenvalue.
pub fn evaluation_point(p: &MatrixPolynomial, lambda: Complex64) -> Result<Result<EvaluationPoint, f64>, BackwardError> {
    let pl = p.evaluate(lambda);
    let s = singular_values(&pl);
    let (smax, smin) = (s[0], s[s.len() - 1]);
    if smin <= SINGULAR_TOL * smax || smax == 0.0 {
        return Ok(Err(smin));
    }
    let m = pl.clone().try_inverse().ok_or(BackwardError::InaccurateInverse(f64::INFINITY))?;
    let n = p.size();
    let residual = (&pl * &m - ComplexMatrix::identity(n, n)).norm();
    if residual > 1e-8 * (smax / smin).max(1.0) {
        return Err(BackwardError::InaccurateInverse(residual));
    }
    Ok(Ok(EvaluationPoint {
        lambda,
        m,
        lambda_row: lambda_row(lambda, p.degree()),
    }))
}

/// `(m+1) × (m+1)` matrix `e_{row} ⊗ Λ_m` placed in row `row` (0-based).
fn row_block(lrow: &ComplexMatrix, row: usize) -> ComplexMatrix {
    let d = lrow.ncols();
    let mut e = ComplexMatrix::zeros(d, d);
    e.row_mut(row).copy_from(lrow);
    e
}

/// `Λ_m^T e_{col+1}^T`: `Λ_m^T` placed in column `col` (0-based).
fn column_block(lrow: &ComplexMatrix, col: usize) -> ComplexMatrix {
    let d = lrow.ncols();
    let mut e = ComplexMatrix::zeros(d, d);
    e.column_mut(col).copy_from(&lrow.transpose());
    e
}

fn hermitian(a: ComplexMatrix) -> Result<HermitianMatrix, BackwardError> {
    Ok(HermitianMatrix::new(a)?)
}

fn symmetric(a: ComplexMatrix) -> Result<SymmetricMatrix, BackwardError> {
    Ok(SymmetricMatrix::new(a)?)
}

/// Builds `(H, S_0, …, S_k)` whose `m` gives the structured backward error at `λ`.
pub fn reduce_to_constraints(p: &MatrixPolynomial, lambda: Complex64) -> Result<Reduction, BackwardError> {
    let structure = p.structure();
    check_lambda(structure, lambda)?;
    let pt = match evaluation_point(p, lambda)? {
        Ok(pt) => pt,
        Err(sigma_min) => return Ok(Reduction::Eigenvalue { sigma_min }),
    };
    Ok(Reduction::System(system_at(structure, &pt)?))
}

/// The constraint system of `structure` at a regular evaluation point.
pub fn system_at(structure: Structure, pt: &EvaluationPoint) -> Result<ConstraintSystem, BackwardError> {
    let deg = pt.lambda_row.ncols() - 1;
    let n = pt.m.nrows();
    let lr = &pt.lambda_row;
    let mt = pt.m.transpose();
    let gram = kron(&(lr.adjoint() * lr), &(pt.m.adjoint() * &pt.m));
    // C_j = (Λ^T e_{j+1}^T) ⊗ M^T, touching coefficient j
    let c_plain = |j: usize| kron(&column_block(lr, j), &mt);
    let sym_part = |c: &ComplexMatrix| c + c.transpose();

    let (h, constraints) = match structure {
        Structure::PalT | Structure::AntipalT => {
            let gamma = gamma_scaling(pt.lambda, deg, n)?;
            let k = (deg - 1) / 2;
            let sign = if structure == Structure::PalT { -1.0 } else { 1.0 };
            let c_pal = |j: usize| {
                let reflected = kron(&row_block(lr, deg - j), &pt.m);
                c_plain(j) + reflected.map(|z| z * sign)
            };
            let mut cs = Vec::with_capacity(k + 2);
            for j in 0..=k {
                cs.push(symmetric(gamma.sandwich_inverse(&sym_part(&c_pal(j))))?);
            }
            if structure == Structure::AntipalT && deg % 2 == 0 {
                let mid = deg / 2;
                let c_mid = c_plain(mid) + kron(&row_block(lr, mid), &pt.m);
                cs.push(symmetric(gamma.sandwich_inverse(&c_mid))?);
            }
            (hermitian(gamma.sandwich_inverse(&gram))?, cs)
        }
        Structure::EvenT | Structure::OddT => {
            // even_T uses e_{2j+2} (coefficients 1, 3, …); odd_T uses e_{2j+1} (coefficients 0, 2, …)
            let (k, offset) = if structure == Structure::EvenT {
                ((deg - 1) / 2, 1)
            } else {
                (deg / 2, 0)
            };
            let cs = (0..=k)
                .map(|j| symmetric(sym_part(&c_plain(2 * j + offset))))
                .collect::<Result<Vec<_>, _>>()?;
            (hermitian(gram)?, cs)
        }
        Structure::SkewT => {
            let cs = (0..=deg)
                .map(|j| symmetric(sym_part(&c_plain(j))))
                .collect::<Result<Vec<_>, _>>()?;
            (hermitian(gram)?, cs)
        }
        Structure::None => return Err(BackwardError::Unstructured),
    };
    Ok(ConstraintSystem::new(h, constraints)?)
}

/// `η(P, λ) = σ_min(P(λ)) / ‖Λ_m‖₂`.
pub fn eta_unstructured(p: &MatrixPolynomial, lambda: Complex64) -> f64 {
    let s = singular_values(&p.evaluate(lambda));
    let denom = lambda_row(lambda, p.degree()).norm();
    s[s.len() - 1] / denom
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardStatus {
    Exact,
    /// `eta` is a lower bound on the structured backward error.
    BoundOnly,
}

impl BackwardStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BackwardStatus::Exact => "exact",
            BackwardStatus::BoundOnly => "bound_only",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackwardErrorReport {
    pub lambda: Complex64,
    pub structure: Structure,
    pub eta: f64,
    pub m_value: f64,
    pub status: BackwardStatus,
    /// Absent when `λ` is already an eigenvalue.
    pub system: Option<ConstraintSystem>,
    pub minimization: Option<MinimizationResult>,
}

/// Solves with `H` and every `S_j` scaled to unit spectral norm, then undoes the
/// scaling of `H` (the feasible set ignores the scaling of the constraints).
pub fn normalized_m_value(sys: &ConstraintSystem, opts: &SolverOptions) -> Result<(MValue, f64), RayleighError> {
    let h_norm = spectral_norm(sys.h().as_matrix());
    let h_scale = if h_norm > 0.0 { h_norm } else { 1.0 };
    let h = HermitianMatrix::new(sys.h().as_matrix().unscale(h_scale))?;
    let cs = sys
        .constraints()
        .iter()
        .map(|s| {
            let sn = spectral_norm(s.as_matrix());
            if sn > 0.0 {
                s.scale(c64(1.0 / sn, 0.0))
            } else {
                s.clone()
            }
        })
        .collect();
    let scaled = ConstraintSystem::new(h, cs)?;
    let r = m_value(&scaled, opts)?;
    Ok((r, h_scale))
}

/// `η^S(P, λ) = m^{-1/2}`, exact when the optimum is certified and a lower bound otherwise.
pub fn eta_structured(p: &MatrixPolynomial, lambda: Complex64, opts: &SolverOptions) -> Result<BackwardErrorReport, BackwardError> {
    let structure = p.structure();
    let sys = match reduce_to_constraints(p, lambda)? {
        Reduction::Eigenvalue { .. } => {
            return Ok(BackwardErrorReport {
                lambda,
                structure,
                eta: 0.0,
                m_value: f64::INFINITY,
                status: BackwardStatus::Exact,
                system: None,
                minimization: None,
            })
        }
        Reduction::System(sys) => sys,
    };
    let (r, scale) = normalized_m_value(&sys, opts)?;
    let m = r.value * scale;
    let eta = if m > 0.0 { m.sqrt().recip() } else { f64::INFINITY };
    let status = if r.minimization.status == SolveStatus::Exact {
        BackwardStatus::Exact
    } else {
        BackwardStatus::BoundOnly
    };
    Ok(BackwardErrorReport {
        lambda,
        structure,
        eta,
        m_value: m,
        status,
        system: Some(sys),
        minimization: Some(r.minimization),
    })
}

#[derive(Debug, Clone)]
pub struct MuReport {
    pub mu: f64,
    pub m: MValue,
    pub system: ConstraintSystem,
    pub warning: Option<String>,
}

/// `μ(M) = m(M^*M, M + M^T)^{1/2}` for skew-symmetric perturbations.
pub fn mu_skew_value(m: &ComplexMatrix, opts: &SolverOptions) -> Result<MuReport, BackwardError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        }
        .into());
    }
    check_finite(m)?;
    let system = mu_skew_system(m)?;
    let s0 = system.constraints()[0].as_matrix();
    let rank = numerical_rank(s0, DEFAULT_RANK_TOL)?;
    let warning = (rank < 2).then(|| format!("rank(M + M^T) = {rank} < 2; the search interval is not bounded a priori"));
    let (r, scale) = normalized_m_value(&system, opts)?;
    let value = r.value * scale;
    let mut mv = r;
    mv.value = value;
    Ok(MuReport {
        mu: value.max(0.0).sqrt(),
        m: mv,
        system,
        warning,
    })
}

/// `(H, S_0) = (M^*M, M + M^T)`.
pub fn mu_skew_system(m: &ComplexMatrix) -> Result<ConstraintSystem, BackwardError> {
    let h = hermitian(m.adjoint() * m)?;
    let s = symmetric(m + m.transpose())?;
    Ok(ConstraintSystem::new(h, vec![s])?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankVerdict {
    VerifiedFull,
    VerifiedGe2,
    Failed,
    Inconclusive,
}

impl RankVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RankVerdict::VerifiedFull => "verified_full",
            RankVerdict::VerifiedGe2 => "verified_ge2",
            RankVerdict::Failed => "failed",
            RankVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankProbeOptions {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Rank every nonzero `f(t)` is expected to reach.
    pub full_rank: Option<usize>,
    /// Extra parameter points checked before the random ones.
    pub witnesses: Vec<ParamVector>,
}

impl Default for RankProbeOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            tol: DEFAULT_RANK_TOL,
            full_rank: None,
            witnesses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProbe {
    pub verdict: RankVerdict,
    pub min_rank: usize,
    pub required_rank: usize,
    pub points_checked: usize,
    /// First parameter point whose rank falls below `required_rank`.
    pub witness: Option<ParamVector>,
    pub witness_rank: Option<usize>,
}

/// Samples the rank of `f(t)` on the unit sphere.
///
/// The verdict is `failed` when some point falls below the required rank
/// (`full_rank` when given, else 2), `verified_full` when every point reaches
/// `full_rank`, `verified_ge2` when every point has rank at least 2, and
/// `inconclusive` when a decision flips under a 100× change of `tol`. Ranks
/// count singular values above `tol · ‖t‖ · (Σ‖S_j‖²)^{1/2}`.
pub fn rank_condition_probe(sys: &ConstraintSystem, opts: &RankProbeOptions) -> Result<RankProbe, BackwardError> {
    if opts.trials == 0 && opts.witnesses.is_empty() {
        return Err(RayleighError::InvalidOption("trials must be at least 1").into());
    }
    if !(opts.tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(opts.tol).into());
    }
    let d = sys.param_len();
    let mut points: Vec<ParamVector> = opts.witnesses.clone();
    for w in &points {
        sys.check_params(w)?;
    }
    let mut rng = stream_rng(opts.seed, 0x7a4c);
    for _ in 0..opts.trials {
        points.push(ParamVector(unit_direction(&mut rng, d)));
    }
    let required = opts.full_rank.unwrap_or(2);
    let mut min_rank = usize::MAX;
    let mut witness = None;
    let mut ambiguous = false;
    // cutoffs scale with ‖t‖·(Σ‖S_j‖²)^{1/2} ≥ ‖f(t)‖, so cancellation inside f(t) registers as rank loss
    let s_scale = sys
        .constraints()
        .iter()
        .map(|s| spectral_norm(s.as_matrix()).powi(2))
        .sum::<f64>()
        .sqrt();
    let rank_at = |s: &[f64], scale: f64, tol: f64| s.iter().filter(|&&x| x > tol * scale).count();
    for t in &points {
        let f = crate::rayleigh::assemble_f(sys, t)?;
        let s = singular_values(&f);
        let scale = t.norm() * s_scale;
        let r = rank_at(&s, scale, opts.tol);
        let r_loose = rank_at(&s, scale, opts.tol * 100.0);
        let r_tight = rank_at(&s, scale, opts.tol / 100.0);
        if (r_loose < required) != (r_tight < required) {
            ambiguous = true;
        }
        min_rank = min_rank.min(r);
        if r < required && witness.is_none() {
            witness = Some((t.clone(), r));
        }
    }
    let verdict = if witness.is_some() {
        RankVerdict::Failed
    } else if ambiguous {
        RankVerdict::Inconclusive
    } else if opts.full_rank.is_some() {
        RankVerdict::VerifiedFull
    } else {
        RankVerdict::VerifiedGe2
    };
    let (witness, witness_rank) = match witness {
        Some((t, r)) => (Some(t), Some(r)),
        None => (None, None),
    };
    Ok(RankProbe {
        verdict,
        min_rank,
        required_rank: required,
        points_checked: points.len(),
        witness,
        witness_rank,
    })
}

/// Rank the structure theory predicts for every nonzero `f(t)`: `2n` for the
/// palindromic and even/odd reductions, none for skew-symmetric ones.
pub fn expected_full_rank(structure: Structure, n: usize) -> Option<usize> {
    match structure {
        Structure::PalT | Structure::AntipalT | Structure::EvenT | Structure::OddT => Some(2 * n),
        Structure::SkewT | Structure::None => None,
    }
}

/// For a skew-symmetric pencil (`m = 1`), the direction `t_0 + i t_1 = conj(λ)/|λ|`,
/// `t_2 = λ(t_0 + i t_1) = |λ|`, where `f(t) = a [1; λ][1, λ] ⊗ (M + M^T)` has rank at most `n`.
pub fn skew_pencil_witness(lambda: Complex64) -> ParamVector {
    let r = lambda.norm();
    let a = lambda.conj() / r;
    ParamVector(vec![a.re, a.im, r])
}

/// Random coefficients carrying `structure`, with standard normal real and
/// imaginary parts. Free coefficients are drawn in index order, then the
/// structure fixes the rest by reflection.
pub fn random_structured_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    structure: Structure,
    n: usize,
    degree: usize,
) -> Result<MatrixPolynomial, BackwardError> {
    let m = degree;
    let sym = |a: ComplexMatrix| (&a + a.transpose()).unscale(2.0);
    let skew = |a: ComplexMatrix| (&a - a.transpose()).unscale(2.0);
    let mut coeffs: Vec<Option<ComplexMatrix>> = vec![None; m + 1];
    for j in 0..=m {
        if coeffs[j].is_some() {
            continue;
        }
        let a = random_complex(rng, n, n);
        match structure {
            Structure::PalT | Structure::AntipalT => {
                let sign = if structure == Structure::PalT { 1.0 } else { -1.0 };
                if 2 * j == m {
                    coeffs[j] = Some(if sign > 0.0 { sym(a) } else { skew(a) });
                } else {
                    coeffs[m - j] = Some(a.transpose().map(|z| z * sign));
                    coeffs[j] = Some(a);
                }
            }
            Structure::EvenT => coeffs[j] = Some(if j % 2 == 0 { sym(a) } else { skew(a) }),
            Structure::OddT => coeffs[j] = Some(if j % 2 == 0 { skew(a) } else { sym(a) }),
            Structure::SkewT => coeffs[j] = Some(skew(a)),
            Structure::None => coeffs[j] = Some(a),
        }
    }
    MatrixPolynomial::new(coeffs.into_iter().map(|c| c.expect("every coefficient assigned")).collect(), structure)
}

/// Polynomial of the given coefficients without structure check, for tests and oracles.
pub fn unstructured(coeffs: Vec<DMatrix<Complex64>>) -> Result<MatrixPolynomial, BackwardError> {
    MatrixPolynomial::new(coeffs, Structure::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, lambda_max};
    use crate::random::random_complex_vector;

    fn random_poly(seed: u64, structure: Structure, n: usize, m: usize) -> MatrixPolynomial {
        let mut rng = stream_rng(seed, 0);
        random_structured_polynomial(&mut rng, structure, n, m).unwrap()
    }

    fn system(r: Reduction) -> ConstraintSystem {
        match r {
            Reduction::System(s) => s,
            Reduction::Eigenvalue { .. } => panic!("unexpected eigenvalue"),
        }
    }

    #[test]
    fn lambda_row_examples() {
        let r = lambda_row(c64(2.0, 0.0), 2);
        assert_eq!(r.as_slice(), &[c64(1.0, 0.0), c64(2.0, 0.0), c64(4.0, 0.0)]);
        let r = lambda_row(c64(0.0, 0.0), 3);
        assert_eq!(r.as_slice(), &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        let r = lambda_row(c64(0.0, 1.0), 2);
        assert_eq!(r.as_slice(), &[c64(1.0, 0.0), c64(0.0, 1.0), c64(-1.0, 0.0)]);
    }

    #[test]
    fn gamma_examples() {
        for m in 1..6 {
            let g = gamma_scaling(Complex64::from_polar(1.0, 0.7), m, 2).unwrap();
            assert_eq!(g.diagonal().len(), (m + 1) * 2);
            assert!(g.diagonal().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        }
        let g = gamma_scaling(c64(2.0, 0.0), 1, 1).unwrap();
        assert!((g.factors[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((g.factors[1] - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(gamma_scaling(c64(0.0, 0.0), 2, 1).is_err());
    }

    #[test]
    fn gamma_identities() {
        for (lam, m) in [(c64(0.3, 0.2), 3), (c64(-2.5, 1.0), 4), (c64(7.0, 0.0), 5)] {
            let g = gamma_scaling(lam, m, 1).unwrap();
            let k = (m - 1) / 2;
            for j in 0..=k {
                let (g1, g2) = (g.factors[j], g.factors[m - j]);
                let p = lam.norm().powi(m as i32 - 2 * j as i32);
                assert!((g1 * g1 + g2 * g2 - 2.0).abs() < 1e-12);
                assert!((g1 * g2 - 2.0 * p.sqrt() / (1.0 + p)).abs() < 1e-12);
                assert!(g1 * g1 > 0.0 && g1 * g1 < 2.0 && g2 * g2 > 0.0 && g2 * g2 < 2.0);
            }
            if m % 2 == 0 {
                assert_eq!(g.factors[m / 2], 1.0);
            }
        }
    }

    #[test]
    fn structure_validation() {
        for s in Structure::ALL {
            for m in 1..5 {
                let p = random_poly(m as u64, s, 3, m);
                assert_eq!(p.structure(), s);
            }
        }
        let mut coeffs = random_poly(1, Structure::PalT, 2, 3).coefficients().to_vec();
        coeffs[0][(0, 1)] += c64(1.0, 0.0);
        let err = MatrixPolynomial::new(coeffs, Structure::PalT).unwrap_err();
        assert!(matches!(err, BackwardError::StructureViolation { index: 0, partner: 3, .. }), "{err}");
        assert!(matches!(
            MatrixPolynomial::new(vec![ComplexMatrix::identity(2, 2)], Structure::None),
            Err(BackwardError::DegreeTooSmall(1))
        ));
    }

    #[test]
    fn structure_tags_parse() {
        for s in Structure::ALL {
            assert_eq!(s.tag().parse::<Structure>().unwrap(), s);
        }
        assert_eq!("even-t".parse::<Structure>().unwrap(), Structure::EvenT);
        assert!("hermitian".parse::<Structure>().is_err());
    }

    #[test]
    fn constraint_counts() {
        let lam = c64(0.4, 0.9);
        let cases = [
            (Structure::PalT, 3, 2),
            (Structure::PalT, 4, 2),
            (Structure::AntipalT, 3, 2),
            (Structure::AntipalT, 4, 3),
            (Structure::AntipalT, 2, 2),
            (Structure::EvenT, 3, 2),
            (Structure::EvenT, 2, 1),
            (Structure::OddT, 3, 2),
            (Structure::OddT, 4, 3),
            (Structure::SkewT, 2, 3),
        ];
        for (s, m, count) in cases {
            let sys = system(reduce_to_constraints(&random_poly(5, s, 2, m), lam).unwrap());
            assert_eq!(sys.constraints().len(), count, "{s} m={m}");
            assert_eq!(sys.dim(), (m + 1) * 2);
        }
    }

    #[test]
    fn even_constraints_use_odd_coefficients() {
        let p = random_poly(3, Structure::EvenT, 2, 3);
        let lam = c64(0.5, -0.3);
        let sys = system(reduce_to_constraints(&p, lam).unwrap());
        let m = p.evaluate(lam).try_inverse().unwrap();
        let lr = lambda_row(lam, 3);
        for (j, col) in [(0, 1), (1, 3)] {
            let c = kron(&column_block(&lr, col), &m.transpose());
            let expect = &c + c.transpose();
            assert!((sys.constraints()[j].as_matrix() - &expect).norm() < 1e-12 * expect.norm());
        }
    }

    #[test]
    fn unit_circle_pal_gram() {
        let p = random_poly(8, Structure::PalT, 2, 3);
        let lam = Complex64::from_polar(1.0, 1.1);
        let sys = system(reduce_to_constraints(&p, lam).unwrap());
        let m = p.evaluate(lam).try_inverse().unwrap();
        let smax = spectral_norm(&m);
        assert!((lambda_max(sys.h()) - 4.0 * smax * smax).abs() < 1e-9 * smax * smax);
    }

    #[test]
    fn pal_and_antipal_share_h_on_unit_circle() {
        let p = random_poly(4, Structure::PalT, 2, 3);
        let lam = Complex64::from_polar(1.0, 2.0);
        let pt = evaluation_point(&p, lam).unwrap().unwrap();
        let pal = system_at(Structure::PalT, &pt).unwrap();
        let anti = system_at(Structure::AntipalT, &pt).unwrap();
        assert!((pal.h().as_matrix() - anti.h().as_matrix()).norm() < 1e-14 * pal.h().as_matrix().norm());
        let off = evaluation_point(&p, c64(0.3, 0.2)).unwrap().unwrap();
        let pal = system_at(Structure::PalT, &off).unwrap();
        let anti = system_at(Structure::AntipalT, &off).unwrap();
        assert_eq!(pal.h(), anti.h());
    }

    #[test]
    fn skew_pencil_closed_forms() {
        let n = 4;
        let p = random_poly(6, Structure::SkewT, n, 1);
        let lam = c64(0.7, 0.4);
        let sys = system(reduce_to_constraints(&p, lam).unwrap());
        let m = p.evaluate(lam).try_inverse().unwrap();
        let sum = &m + m.transpose();
        let mut s0 = ComplexMatrix::zeros(2 * n, 2 * n);
        s0.view_mut((0, 0), (n, n)).copy_from(&sum);
        s0.view_mut((0, n), (n, n)).copy_from(&m.map(|z| z * lam));
        s0.view_mut((n, 0), (n, n)).copy_from(&m.transpose().map(|z| z * lam));
        let mut s1 = ComplexMatrix::zeros(2 * n, 2 * n);
        s1.view_mut((0, n), (n, n)).copy_from(&m.transpose());
        s1.view_mut((n, 0), (n, n)).copy_from(&m);
        s1.view_mut((n, n), (n, n)).copy_from(&sum.map(|z| z * lam));
        assert!((sys.constraints()[0].as_matrix() - &s0).norm() < 1e-12 * s0.norm());
        assert!((sys.constraints()[1].as_matrix() - &s1).norm() < 1e-12 * s1.norm());
    }

    #[test]
    fn skew_witness_has_low_rank() {
        let p = random_poly(2, Structure::SkewT, 4, 1);
        let lam = c64(-0.6, 1.3);
        let sys = system(reduce_to_constraints(&p, lam).unwrap());
        let opts = RankProbeOptions {
            trials: 20,
            full_rank: Some(8),
            witnesses: vec![skew_pencil_witness(lam)],
            ..RankProbeOptions::default()
        };
        let probe = rank_condition_probe(&sys, &opts).unwrap();
        assert_eq!(probe.verdict, RankVerdict::Failed);
        assert!(probe.witness_rank.unwrap() <= 4);
        assert_eq!(probe.witness.unwrap(), skew_pencil_witness(lam));
    }

    #[test]
    fn pal_and_even_rank_probe() {
        for (s, seed) in [(Structure::PalT, 1), (Structure::EvenT, 2), (Structure::OddT, 3), (Structure::AntipalT, 4)] {
            let p = random_poly(seed, s, 3, 3);
            let sys = system(reduce_to_constraints(&p, c64(0.8, 0.5)).unwrap());
            let opts = RankProbeOptions {
                trials: 100,
                seed,
                full_rank: expected_full_rank(s, 3),
                ..RankProbeOptions::default()
            };
            assert_eq!(rank_condition_probe(&sys, &opts).unwrap().verdict, RankVerdict::VerifiedFull, "{s}");
        }
    }

    #[test]
    fn excluded_points() {
        let p = random_poly(1, Structure::PalT, 2, 3);
        for lam in [c64(0.0, 0.0), c64(1.0, 0.0), c64(-1.0, 1e-9)] {
            assert!(matches!(
                reduce_to_constraints(&p, lam),
                Err(BackwardError::ExcludedLambda { .. })
            ));
        }
        let e = random_poly(1, Structure::EvenT, 2, 3);
        assert!(reduce_to_constraints(&e, c64(1.0, 0.0)).is_ok());
        let u = random_poly(1, Structure::None, 2, 2);
        assert!(matches!(reduce_to_constraints(&u, c64(0.5, 0.0)), Err(BackwardError::Unstructured)));
    }

    #[test]
    fn unstructured_examples() {
        let mut rng = stream_rng(1, 0);
        let a0 = random_complex(&mut rng, 3, 3);
        let p = unstructured(vec![a0.clone(), random_complex(&mut rng, 3, 3)]).unwrap();
        let s = singular_values(&a0);
        assert!((eta_unstructured(&p, c64(0.0, 0.0)) - s[2]).abs() < 1e-14);
        let id = unstructured(vec![ComplexMatrix::identity(2, 2), ComplexMatrix::zeros(2, 2)]).unwrap();
        assert!((eta_unstructured(&id, c64(1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_are_roots() {
        for (s, n, finite) in [(Structure::PalT, 3, 9), (Structure::EvenT, 4, 12), (Structure::None, 3, 9), (Structure::EvenT, 3, 8)] {
            let p = random_poly(9, s, n, 3);
            let ev = p.eigenvalues().unwrap();
            assert_eq!(ev.len(), finite, "{s} n={n}");
            for z in ev {
                assert!(eta_unstructured(&p, z) < 1e-10, "{s} {z}");
            }
        }
    }

    #[test]
    fn eigenvalue_gives_zero_error() {
        // P(z) = A0 + z A1 with A0 = -λ A1 + rank-one correction so that P(λ) x = 0
        let mut rng = stream_rng(4, 0);
        let a1 = random_complex(&mut rng, 3, 3);
        let lam = c64(0.3, 0.8);
        let x = random_complex_vector(&mut rng, 3);
        let base = random_complex(&mut rng, 3, 3);
        let r = &base * &x;
        let a0 = &base - (r + a1.map(|z| z * lam) * &x) * x.adjoint().unscale(x.norm_squared());
        let p = unstructured(vec![a0, a1]).unwrap();
        assert!(eta_unstructured(&p, lam) < 1e-10);

        let q = random_poly(7, Structure::EvenT, 2, 3);
        let z = q.eigenvalues().unwrap()[0];
        let rep = eta_structured(&q, z, &SolverOptions::default()).unwrap();
        assert!(rep.eta < 1e-6, "{}", rep.eta);
    }

    #[test]
    fn built_matrices_are_structured() {
        for s in [Structure::PalT, Structure::AntipalT, Structure::EvenT, Structure::OddT, Structure::SkewT] {
            for m in 1..5 {
                let p = random_poly(10 + m as u64, s, 2, m);
                let sys = system(reduce_to_constraints(&p, c64(0.6, -0.7)).unwrap());
                let h = sys.h().as_matrix();
                assert!((h - h.adjoint()).norm() <= 1e-12 * h.norm());
                for c in sys.constraints() {
                    let c = c.as_matrix();
                    assert!((c - c.transpose()).norm() <= 1e-12 * c.norm().max(1e-300));
                }
                let spec = eig_hermitian(sys.h());
                assert!(spec.eigenvalues.last().unwrap() > &(-1e-9 * spec.eigenvalues[0]));
            }
        }
    }

    #[test]
    fn structured_dominates_unstructured() {
        let opts = SolverOptions::default().with_starts(12);
        for (s, seed) in [(Structure::PalT, 1u64), (Structure::EvenT, 2), (Structure::SkewT, 3)] {
            let p = random_poly(seed, s, 2, 2);
            let mut rng = stream_rng(seed, 9);
            for _ in 0..2 {
                let lam = c64(crate::random::normal(&mut rng), crate::random::normal(&mut rng));
                let rep = eta_structured(&p, lam, &opts).unwrap();
                let un = eta_unstructured(&p, lam);
                assert!(rep.eta >= un - 1e-8 || rep.status == BackwardStatus::BoundOnly, "{s}: {} < {un}", rep.eta);
            }
        }
    }

    #[test]
    fn mu_examples() {
        let opts = SolverOptions::default();
        let r = mu_skew_value(&ComplexMatrix::identity(2, 2), &opts).unwrap();
        assert!((r.mu - 1.0).abs() < 1e-10);
        let mut rng = stream_rng(3, 0);
        let k = crate::random::random_skew(&mut rng, 4);
        let r = mu_skew_value(&k, &opts).unwrap();
        assert!((r.mu - spectral_norm(&k)).abs() < 1e-8, "{} vs {}", r.mu, spectral_norm(&k));
        assert!(r.warning.is_some());
    }
}
