//! Local minimizers for low-dimensional, possibly nonsmooth objectives.
//!
//! The objectives here are eigenvalue functions: smooth wherever the tracked
//! eigenvalue is simple and Lipschitz with kinks where eigenvalues coalesce.
//! [`hybrid_minimize`] alternates BFGS with a weak Wolfe line search (which
//! behaves well on such kinks) and Nelder–Mead polishing.

/// One objective evaluation. `grad` is a true gradient when `smooth`, otherwise a
/// subgradient surrogate.
#[derive(Debug, Clone)]
pub struct Eval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub smooth: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LocalOptions {
    pub grad_tol: f64,
    pub max_bfgs_iter: usize,
    pub max_nm_evals: usize,
    pub rounds: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_bfgs_iter: 200,
            max_nm_evals: 600,
            rounds: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

struct Counter<'a, F> {
    f: &'a F,
    count: usize,
}

impl<'a, F: Fn(&[f64]) -> Eval> Counter<'a, F> {
    fn eval(&mut self, x: &[f64]) -> Eval {
        self.count += 1;
        (self.f)(x)
    }
}

/// BFGS with the bisection weak Wolfe line search. Returns the best point seen.
fn bfgs<F: Fn(&[f64]) -> Eval>(
    obj: &mut Counter<'_, F>,
    x0: &[f64],
    opts: &LocalOptions,
) -> (Vec<f64>, Eval) {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut cur = obj.eval(&x);
    let mut hinv = vec![vec![0.0; d]; d];
    for (i, row) in hinv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut scaled = false;

    for _ in 0..opts.max_bfgs_iter {
        let gnorm = norm(&cur.grad);
        if !gnorm.is_finite() || gnorm <= opts.grad_tol {
            break;
        }
        let mut dir: Vec<f64> = (0..d).map(|i| -dot(&hinv[i], &cur.grad)).collect();
        let mut slope = dot(&dir, &cur.grad);
        if !(slope < 0.0) {
            hinv = identity(d);
            dir = cur.grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }
        let Some((step, next)) = weak_wolfe(obj, &x, &cur, &dir, slope) else {
            break;
        };
        let s: Vec<f64> = dir.iter().map(|v| v * step).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let x_next = axpy(&x, step, &dir);
        let progress = cur.value - next.value;
        x = x_next;
        cur = next;
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                for (i, row) in hinv.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = gamma;
                }
                scaled = true;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        if norm(&s) <= 1e-15 * (1.0 + norm(&x)) || progress <= 1e-16 * (1.0 + cur.value.abs()) {
            break;
        }
    }
    (x, cur)
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn bfgs_update(hinv: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..d).map(|i| dot(&hinv[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Weak Wolfe conditions by bracketing/bisection (Armijo c1 = 1e-4, curvature c2 = 0.9).
fn weak_wolfe<F: Fn(&[f64]) -> Eval>(
    obj: &mut Counter<'_, F>,
    x: &[f64],
    cur: &Eval,
    dir: &[f64],
    slope: f64,
) -> Option<(f64, Eval)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut t = 1.0;
    let mut best: Option<(f64, Eval)> = None;
    for _ in 0..60 {
        let trial = obj.eval(&axpy(x, t, dir));
        let armijo = trial.value <= cur.value + C1 * t * slope;
        if !armijo {
            hi = t;
        } else {
            let better = best.as_ref().is_none_or(|(_, b)| trial.value < b.value);
            let curvature = dot(&trial.grad, dir) >= C2 * slope;
            if curvature {
                return Some((t, trial));
            }
            if better {
                best = Some((t, trial));
            }
            lo = t;
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        if hi.is_finite() && (hi - lo) <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    best.filter(|(_, e)| e.value < cur.value)
}

/// Nelder–Mead with the dimension-adaptive coefficients of Gao and Han.
fn nelder_mead<F: Fn(&[f64]) -> Eval>(
    obj: &mut Counter<'_, F>,
    x0: &[f64],
    f0: f64,
    size: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let nd = d as f64;
    let (alpha, gamma, rho, sigma) = if d <= 1 {
        (1.0, 2.0, 0.5, 0.5)
    } else {
        (1.0, 1.0 + 2.0 / nd, 0.75 - 1.0 / (2.0 * nd), 1.0 - 1.0 / nd)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    let start = obj.count;
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += size;
        let f = obj.eval(&p).value;
        simplex.push((p, f));
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut simplex);
    while obj.count - start < max_evals {
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let scale = 1.0 + norm(&simplex[0].0);
        if (worst - best).abs() <= 1e-15 * (1.0 + best.abs()) && spread <= 1e-12 * scale {
            break;
        }
        if spread <= 1e-14 * scale {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(p, _)| p[i]).sum::<f64>() / nd)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(m, w)| m + c * (m - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = obj.eval(&xr).value;
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = obj.eval(&xe).value;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let xc = along(alpha * rho);
                let fc = obj.eval(&xc).value;
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = obj.eval(&xc).value;
                (xc, fc)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = x_best
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, q)| b + sigma * (q - b))
                        .collect();
                    let f = obj.eval(&p).value;
                    *entry = (p, f);
                }
            }
        }
        sort(&mut simplex);
    }
    let (x, f) = simplex.swap_remove(0);
    (x, f)
}

/// Alternating BFGS / Nelder–Mead local descent from `x0`.
pub fn hybrid_minimize<F: Fn(&[f64]) -> Eval>(f: &F, x0: &[f64], opts: &LocalOptions) -> LocalResult {
    let mut obj = Counter { f, count: 0 };
    let (mut x, eval) = bfgs(&mut obj, x0, opts);
    let mut value = eval.value;
    let mut smooth = eval.smooth && norm(&eval.grad) <= opts.grad_tol.max(1e-8 * (1.0 + value.abs()));
    let mut size = 1e-3 * (1.0 + norm(&x));
    for _ in 0..opts.rounds {
        if smooth {
            break;
        }
        let (xn, fn_) = nelder_mead(&mut obj, &x, value, size, opts.max_nm_evals);
        let improved = fn_ < value;
        if improved {
            x = xn;
            value = fn_;
        }
        let (xb, eb) = bfgs(&mut obj, &x, opts);
        let gain = value - eb.value;
        if eb.value < value {
            x = xb;
            value = eb.value;
        }
        smooth = eb.smooth && norm(&eb.grad) <= opts.grad_tol.max(1e-8 * (1.0 + value.abs()));
        if !improved && gain <= 0.0 {
            break;
        }
        size *= 0.1;
    }
    LocalResult {
        x,
        value,
        evaluations: obj.count,
    }
}

/// Restarted Nelder–Mead without gradient information.
pub fn nelder_mead_minimize<F: Fn(&[f64]) -> Eval>(
    f: &F,
    x0: &[f64],
    size: f64,
    max_evals: usize,
    restarts: usize,
) -> LocalResult {
    let mut obj = Counter { f, count: 0 };
    let mut x = x0.to_vec();
    let mut value = obj.eval(&x).value;
    let mut size = size;
    for _ in 0..restarts.max(1) {
        let (xn, fn_) = nelder_mead(&mut obj, &x, value, size, max_evals);
        let gain = value - fn_;
        if fn_ <= value {
            x = xn;
            value = fn_;
        }
        if gain <= 1e-16 * (1.0 + value.abs()) {
            break;
        }
        size *= 0.1;
    }
    LocalResult {
        x,
        value,
        evaluations: obj.count,
    }
}
