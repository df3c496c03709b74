//! Independent checks for the pencil solver.
//!
//! * [`karow_single`]: one-parameter formula for a single constraint.
//! * [`penalty_maximize`]: direct maximization of the Rayleigh quotient with a
//!   quadratic penalty on the constraints, giving a lower bound on `m`.
//! * [`feasible_sample`]: unit vectors satisfying every constraint.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::linalg::{
    c64, eigenvalues_descending, singular_values, spectral_norm, ComplexMatrix, HermitianMatrix, SymmetricMatrix,
};
use crate::optim::{hybrid_minimize, Eval, LocalOptions};
use crate::random::{complex_normal, random_complex_vector, stream_rng};
use crate::rayleigh::ConstraintSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarowOptions {
    pub grid: usize,
    /// Golden-section stopping width in `t`.
    pub tol: f64,
    /// Interval doublings tried when `σ₂(S) = 0`.
    pub max_growth: usize,
}

impl Default for KarowOptions {
    fn default() -> Self {
        Self {
            grid: 2000,
            tol: 1e-10,
            max_growth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KarowResult {
    pub value: f64,
    pub t: f64,
    pub grid_value: f64,
    pub interval_end: f64,
    pub warning: Option<String>,
}

/// `g(t) = λ₂([[H, t conj(S)], [t S, conj(H)]])`.
pub fn karow_g(h: &HermitianMatrix, s: &SymmetricMatrix, t: f64) -> f64 {
    let n = h.dim();
    let hm = h.as_matrix();
    let sm = s.as_matrix();
    let mut f = ComplexMatrix::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(hm);
    f.view_mut((n, n), (n, n)).copy_from(&hm.map(|z| z.conj()));
    f.view_mut((0, n), (n, n)).copy_from(&sm.map(|z| z.conj() * t));
    f.view_mut((n, 0), (n, n)).copy_from(&sm.map(|z| z * t));
    eigenvalues_descending(&HermitianMatrix::new(f).expect("block matrix is Hermitian"))[1]
}

/// `inf_{t ≥ 0} g(t)`, searched on `[0, 2‖H‖/σ₂(S)]` by a dense grid and a
/// golden-section refinement of the best bracket.
pub fn karow_single(h: &HermitianMatrix, s: &SymmetricMatrix, opts: &KarowOptions) -> KarowResult {
    let sv = singular_values(s.as_matrix());
    let h_norm = spectral_norm(h.as_matrix());
    let sigma2 = sv.get(1).copied().unwrap_or(0.0);
    let grid = opts.grid.max(3);
    let scan = |end: f64| -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut best_i = 0;
        for i in 0..grid {
            let t = end * i as f64 / (grid - 1) as f64;
            let g = karow_g(h, s, t);
            if g < best.0 {
                best = (g, t);
                best_i = i;
            }
        }
        let step = end / (grid - 1) as f64;
        let lo = best_i.saturating_sub(1) as f64 * step;
        let hi = ((best_i + 1).min(grid - 1)) as f64 * step;
        let (t_ref, g_ref) = golden(|t| karow_g(h, s, t), lo, hi, opts.tol);
        if g_ref < best.0 {
            (g_ref, t_ref)
        } else {
            best
        }
    };
    let grid_min = |end: f64| -> f64 {
        (0..grid)
            .map(|i| karow_g(h, s, end * i as f64 / (grid - 1) as f64))
            .fold(f64::INFINITY, f64::min)
    };
    if sigma2 > 1e-12 * sv[0].max(f64::MIN_POSITIVE) && h_norm > 0.0 {
        let end = 2.0 * h_norm / sigma2;
        let (value, t) = scan(end);
        return KarowResult {
            value,
            t,
            grid_value: grid_min(end),
            interval_end: end,
            warning: None,
        };
    }
    if h_norm == 0.0 {
        return KarowResult {
            value: 0.0,
            t: 0.0,
            grid_value: 0.0,
            interval_end: 0.0,
            warning: None,
        };
    }
    let mut best = (f64::INFINITY, 0.0);
    let mut end = 1.0 + h_norm;
    let mut last_end = end;
    for i in 0..=opts.max_growth {
        end = (1.0 + h_norm) * 2f64.powi(i as i32);
        let cand = scan(end);
        if cand.0 < best.0 {
            best = cand;
        }
        last_end = end;
    }
    KarowResult {
        value: best.0,
        t: best.1,
        grid_value: grid_min(last_end),
        interval_end: end,
        warning: Some(format!("sigma_2(S) = {sigma2:.3e}; interval bound unavailable, searched up to t = {end:.3e}")),
    }
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyOptions {
    pub starts: usize,
    pub seed: u64,
    pub schedule: Vec<f64>,
    /// Relative residual `|v^T S_j v| / ‖S_j‖` accepted after polishing.
    pub feasibility_tol: f64,
    pub ascent_steps: usize,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            seed: 0,
            schedule: vec![1e1, 1e3, 1e5, 1e7],
            feasibility_tol: 1e-6,
            ascent_steps: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyResult {
    /// Best feasible Rayleigh quotient, a lower bound on `m`.
    pub value: Option<f64>,
    pub v: Option<DVector<Complex64>>,
    pub constraint_residual: Option<f64>,
    pub feasible_starts: usize,
    pub diagnostics: Vec<String>,
}

struct Quadrics<'a> {
    h: &'a ComplexMatrix,
    s: Vec<&'a ComplexMatrix>,
    s_norm: Vec<f64>,
}

impl<'a> Quadrics<'a> {
    fn new(sys: &'a ConstraintSystem) -> Self {
        let s: Vec<&ComplexMatrix> = sys.constraints().iter().map(|c| c.as_matrix()).collect();
        let s_norm = s.iter().map(|m| spectral_norm(m).max(f64::MIN_POSITIVE)).collect();
        Self {
            h: sys.h().as_matrix(),
            s,
            s_norm,
        }
    }

    fn quotient(&self, v: &DVector<Complex64>) -> f64 {
        (v.adjoint() * self.h * v)[(0, 0)].re / v.norm_squared()
    }

    fn residuals(&self, v: &DVector<Complex64>) -> Vec<Complex64> {
        self.s.iter().map(|s| (v.transpose() * *s * v)[(0, 0)]).collect()
    }

    fn max_relative_residual(&self, v: &DVector<Complex64>) -> f64 {
        let n2 = v.norm_squared();
        self.residuals(v)
            .iter()
            .zip(&self.s_norm)
            .map(|(r, sn)| r.norm() / (sn * n2))
            .fold(0.0, f64::max)
    }

    /// `−q_H(v) + ρ Σ_j |v^T S_j v|² / (‖S_j‖² ‖v‖⁴)` and its gradient in `(Re v, Im v)`.
    fn penalty(&self, x: &[f64], rho: f64) -> Eval {
        let n = x.len() / 2;
        let v = to_complex(x);
        let nn = v.norm_squared();
        if !(nn > 0.0) {
            return Eval {
                value: f64::INFINITY,
                grad: vec![0.0; x.len()],
                smooth: true,
            };
        }
        let hv = self.h * &v;
        let q = v.dotc(&hv).re / nn;
        // Wirtinger derivative with respect to conj(v)
        let mut g = (&hv - v.map(|z| z * q)).map(|z| -z / nn);
        let mut value = -q;
        let vbar = v.map(|z| z.conj());
        for (s, sn) in self.s.iter().zip(&self.s_norm) {
            let w = rho / (sn * sn);
            let r = (v.transpose() * *s * &v)[(0, 0)] / nn;
            value += w * r.norm_sqr();
            let sbar_vbar = s.map(|z| z.conj()) * &vbar;
            g += (sbar_vbar.map(|z| z * r * 2.0) - v.map(|z| z * (2.0 * r.norm_sqr()))).map(|z| z * (w / nn));
        }
        let mut grad = vec![0.0; 2 * n];
        for i in 0..n {
            grad[i] = 2.0 * g[i].re;
            grad[n + i] = 2.0 * g[i].im;
        }
        Eval {
            value,
            grad,
            smooth: true,
        }
    }

    /// `2 (S_j v)^T` stacked: the holomorphic Jacobian of `v ↦ (v^T S_j v)_j`.
    fn jacobian(&self, v: &DVector<Complex64>) -> ComplexMatrix {
        let n = v.len();
        let mut j = ComplexMatrix::zeros(self.s.len(), n);
        for (row, s) in self.s.iter().enumerate() {
            let sv = *s * v;
            for c in 0..n {
                j[(row, c)] = sv[c] * 2.0;
            }
        }
        j
    }

    /// Minimum-norm Newton steps on the residual map, keeping `‖v‖ = 1`.
    fn polish(&self, v: &DVector<Complex64>, iters: usize, target: f64) -> DVector<Complex64> {
        let mut v = v.unscale(v.norm());
        let scaled_residuals = |v: &DVector<Complex64>| -> DVector<Complex64> {
            let r = self.residuals(v);
            DVector::from_iterator(r.len(), r.iter().zip(&self.s_norm).map(|(r, sn)| r / *sn))
        };
        for _ in 0..iters {
            let r = scaled_residuals(&v);
            let worst = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if worst <= target {
                break;
            }
            let mut jac = self.jacobian(&v);
            for (row, sn) in self.s_norm.iter().enumerate() {
                jac.row_mut(row).unscale_mut(*sn);
            }
            let Ok(pinv) = jac.pseudo_inverse(1e-14) else { break };
            let next = &v - pinv * r;
            let nn = next.norm();
            if !(nn > 0.0) {
                break;
            }
            let next = next.unscale(nn);
            let next_worst = self.max_relative_residual(&next);
            if next_worst >= worst {
                break;
            }
            v = next;
        }
        v
    }

    /// Gradient ascent of `q_H` along the tangent space of the constraints, re-polished after each step.
    fn manifold_ascent(&self, v: &DVector<Complex64>, steps: usize, tol: f64) -> DVector<Complex64> {
        let mut v = v.clone();
        let mut q = self.quotient(&v);
        let h_norm = spectral_norm(self.h).max(f64::MIN_POSITIVE);
        let mut step = 1.0 / h_norm;
        for _ in 0..steps {
            let hv = self.h * &v;
            let g = &hv - v.map(|z| z * q);
            let jac = self.jacobian(&v);
            let Ok(pinv) = jac.clone().pseudo_inverse(1e-14) else { break };
            let tangent = &g - &pinv * (&jac * &g);
            if tangent.norm() <= 1e-14 * h_norm {
                break;
            }
            let mut improved = false;
            for _ in 0..20 {
                let trial = self.polish(&(&v + tangent.map(|z| z * step)), 30, 1e-15);
                if self.max_relative_residual(&trial) <= tol {
                    let qt = self.quotient(&trial);
                    if qt > q {
                        v = trial;
                        q = qt;
                        improved = true;
                        step *= 2.0;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        v
    }
}

fn to_complex(x: &[f64]) -> DVector<Complex64> {
    let n = x.len() / 2;
    DVector::from_iterator(n, (0..n).map(|i| c64(x[i], x[n + i])))
}

fn to_real(v: &DVector<Complex64>) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Lower bound on `m` by penalized multistart ascent.
///
/// Each start minimizes `−q_H(v) + ρ Σ_j |v^T S_j v|²/(‖S_j‖²‖v‖⁴)` for the
/// increasing penalties of `schedule`, then polishes feasibility by Newton's
/// method and climbs along the constraint manifold. Starts whose relative
/// residual stays above `feasibility_tol` are discarded.
pub fn penalty_maximize(sys: &ConstraintSystem, opts: &PenaltyOptions) -> PenaltyResult {
    let quad = Quadrics::new(sys);
    let n = sys.dim();
    let local = LocalOptions {
        max_bfgs_iter: 500,
        rounds: 1,
        ..LocalOptions::default()
    };
    let runs: Vec<Option<(usize, f64, DVector<Complex64>, f64)>> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(opts.seed, index as u64);
            let mut x = to_real(&random_complex_vector(&mut rng, n));
            for &rho in &opts.schedule {
                let r = hybrid_minimize(&|y: &[f64]| quad.penalty(y, rho), &x, &local);
                let norm = r.x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return None;
                }
                x = r.x.iter().map(|a| a / norm).collect();
            }
            let v = quad.polish(&to_complex(&x), 50, 1e-15);
            if quad.max_relative_residual(&v) > opts.feasibility_tol {
                return None;
            }
            let v = quad.manifold_ascent(&v, opts.ascent_steps, opts.feasibility_tol.min(1e-10));
            let res = quad.max_relative_residual(&v);
            (res <= opts.feasibility_tol).then(|| (index, quad.quotient(&v), v, res))
        })
        .collect();
    let mut diagnostics = Vec::new();
    let feasible: Vec<_> = runs.into_iter().flatten().collect();
    let feasible_starts = feasible.len();
    if feasible.is_empty() {
        diagnostics.push(format!(
            "no start reached relative constraint residual {:.0e}",
            opts.feasibility_tol
        ));
        return PenaltyResult {
            value: None,
            v: None,
            constraint_residual: None,
            feasible_starts,
            diagnostics,
        };
    }
    let best = feasible
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("non-empty");
    PenaltyResult {
        value: Some(best.1),
        constraint_residual: Some(best.3),
        v: Some(best.2),
        feasible_starts,
        diagnostics,
    }
}

/// Absolute residual bound for [`feasible_sample`] outputs (unit vectors).
pub const FEASIBLE_TOL: f64 = 1e-8;

/// Up to `count` unit vectors with `max_j |v^T S_j v| ≤ 1e-8`, one Newton run per attempt.
pub fn feasible_sample(constraints: &[SymmetricMatrix], count: usize, seed: u64) -> Vec<DVector<Complex64>> {
    let Some(first) = constraints.first() else {
        return Vec::new();
    };
    let n = first.dim();
    let h = HermitianMatrix::identity(n);
    let Ok(sys) = ConstraintSystem::new(h, constraints.to_vec()) else {
        return Vec::new();
    };
    let quad = Quadrics::new(&sys);
    (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let v0 = DVector::from_iterator(n, (0..n).map(|_| complex_normal(&mut rng)));
            let v = quad.polish(&v0, 100, 1e-16);
            let worst = quad.residuals(&v).iter().map(|r| r.norm()).fold(0.0, f64::max);
            (worst <= FEASIBLE_TOL).then_some(v)
        })
        .collect()
}
