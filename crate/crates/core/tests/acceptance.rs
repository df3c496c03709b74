//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use symrq::backward::{
    random_structured_polynomial, rank_condition_probe, reduce_to_constraints, skew_pencil_witness, MatrixPolynomial,
    RankProbeOptions, RankVerdict, Reduction, Structure, mu_skew_system, mu_skew_value,
};
use symrq::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
use symrq::io::{emit_matrix, emit_polynomial, emit_system};
use symrq::linalg::{c64, numerical_rank, singular_values, spectral_norm, ComplexMatrix, HermitianMatrix, SymmetricMatrix, DEFAULT_RANK_TOL};
use symrq::oracle::{karow_single, penalty_maximize, KarowOptions, PenaltyOptions};
use symrq::random::{complex_normal, random_complex, random_hermitian, random_skew, random_symmetric, random_unitary, stream_rng};
use symrq::rayleigh::{
    assemble_f, m_tilde_value, m_value, minimize_psi, psi, psi_gradient, ConstraintSystem, MinimizationResult, ParamVector,
    SolveStatus, SolverOptions, Variant,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_system(seed: u64, n: usize, k: usize) -> ConstraintSystem {
    let mut rng = stream_rng(seed, 0);
    let h = random_hermitian(&mut rng, n);
    let s = (0..=k).map(|_| random_symmetric(&mut rng, n)).collect();
    ConstraintSystem::new(h, s).unwrap()
}

fn quad(v: &DVector<Complex64>, a: &ComplexMatrix) -> Complex64 {
    (v.adjoint() * a * v)[(0, 0)]
}

fn bilinear(v: &DVector<Complex64>, s: &ComplexMatrix) -> Complex64 {
    (v.transpose() * s * v)[(0, 0)]
}

/// Independent check of an exact-status result.
fn certificate_ok(sys: &ConstraintSystem, r: &MinimizationResult) -> Result<(), String> {
    let cert = r.certificate.as_ref().ok_or("exact status without certificate")?;
    let v = DVector::from_vec(cert.v.clone());
    let nv = v.norm();
    if (nv - 1.0).abs() > 1e-8 {
        return Err(format!("certificate norm {nv}"));
    }
    for (j, s) in sys.constraints().iter().enumerate() {
        let lhs = bilinear(&v, s.as_matrix()).norm();
        let bound = 1e-7 * spectral_norm(s.as_matrix());
        if lhs > bound {
            return Err(format!("|v^T S_{j} v| = {lhs:e} > {bound:e}"));
        }
    }
    let q = quad(&v, sys.h().as_matrix()).re;
    let bound = 1e-7 * spectral_norm(sys.h().as_matrix());
    if (q - r.lambda2_hat).abs() > bound {
        return Err(format!("|v*Hv - lambda2| = {:e} > {bound:e}", (q - r.lambda2_hat).abs()));
    }
    Ok(())
}

#[derive(Default)]
struct Ledger {
    exact_runs: usize,
    certificate_failures: Vec<String>,
    beta_checked: usize,
    beta_failures: Vec<String>,
}

impl Ledger {
    fn record(&mut self, label: &str, sys: &ConstraintSystem, r: &MinimizationResult, rank_verified: bool) {
        if r.status == SolveStatus::Exact {
            self.exact_runs += 1;
            if let Err(e) = certificate_ok(sys, r) {
                self.certificate_failures.push(format!("{label}: {e}"));
            }
        }
        if rank_verified {
            self.beta_checked += 1;
            match r.beta {
                Some(b) if r.t_hat.norm() <= b * (1.0 + 1e-8) => {}
                Some(b) => self.beta_failures.push(format!("{label}: |t| = {} > beta = {b}", r.t_hat.norm())),
                None => self.beta_failures.push(format!("{label}: beta unavailable")),
            }
        }
    }
}

fn rank_verified(sys: &ConstraintSystem, seed: u64) -> bool {
    let opts = RankProbeOptions {
        seed,
        ..RankProbeOptions::default()
    };
    matches!(
        rank_condition_probe(sys, &opts).map(|p| p.verdict),
        Ok(RankVerdict::VerifiedFull | RankVerdict::VerifiedGe2)
    )
}

fn solver(seed: u64) -> SolverOptions {
    SolverOptions::default().with_seed(seed)
}

fn single_constraint_equivalence(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut used = 0;
    let mut seed = 1000;
    while used < 50 {
        seed += 1;
        let n = 2 + (used % 4);
        let sys = random_system(seed, n, 0);
        let s0 = &sys.constraints()[0];
        if numerical_rank(s0.as_matrix(), DEFAULT_RANK_TOL).unwrap() < 2 {
            continue;
        }
        used += 1;
        let r = minimize_psi(&sys, Variant::SecondLargest, &solver(seed)).unwrap();
        let k = karow_single(sys.h(), s0, &KarowOptions::default());
        let e = rel(r.lambda2_hat, k.value);
        worst = worst.max(e);
        if e > 1e-6 {
            failures.push(format!("seed {seed} n {n}: psi {} line search {} rel {e:e}", r.lambda2_hat, k.value));
        }
        ledger.record(&format!("single seed {seed}"), &sys, &r, rank_verified(&sys, seed));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs <= 60.0;
    let mut detail = format!("50 instances, worst rel {worst:.2e}, {secs:.1} s");
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    outcome(pass, detail)
}

fn sandwich(ledger: &mut Ledger) -> Outcome {
    let mut violations = Vec::new();
    let mut exact = 0;
    let mut agree = 0;
    let mut stalls = Vec::new();
    let mut empty = Vec::new();
    for i in 0..30u64 {
        let seed = 2000 + i;
        let n = 3 + (i as usize % 2);
        let k = 1 + (i as usize / 2) % 2;
        let sys = random_system(seed, n, k);
        let r = minimize_psi(&sys, Variant::SecondLargest, &solver(seed)).unwrap();
        let pen = penalty_maximize(
            &sys,
            &PenaltyOptions {
                seed,
                ..PenaltyOptions::default()
            },
        );
        ledger.record(&format!("sandwich seed {seed}"), &sys, &r, rank_verified(&sys, seed));
        let label = format!("seed {seed} (n {n}, k {k})");
        match pen.value {
            None => empty.push(label),
            Some(p) => {
                if p > r.lambda2_hat + 1e-6 {
                    violations.push(format!("{label}: penalty {p} > psi {}", r.lambda2_hat));
                }
                if r.status == SolveStatus::Exact {
                    exact += 1;
                    if rel(p, r.lambda2_hat) <= 1e-4 {
                        agree += 1;
                    } else {
                        stalls.push(format!("{label}: penalty {p} vs {}", r.lambda2_hat));
                    }
                }
            }
        }
        if pen.value.is_none() && r.status == SolveStatus::Exact {
            exact += 1;
            stalls.push(format!("seed {seed}: penalty found no feasible point on an exact instance"));
        }
    }
    let ratio = if exact == 0 { 1.0 } else { agree as f64 / exact as f64 };
    let pass = violations.is_empty() && ratio >= 0.9;
    let mut detail = format!(
        "30 instances, {} sandwich violations, {agree}/{exact} exact instances agree ({:.0}%)",
        violations.len(),
        100.0 * ratio
    );
    if !stalls.is_empty() {
        detail += &format!("; flagged stalls: {}", stalls.join("; "));
    }
    if !empty.is_empty() {
        detail += &format!("; no feasible point found (not counted): {}", empty.join(", "));
    }
    if !violations.is_empty() {
        detail += &format!("; violations: {}", violations.join("; "));
    }
    outcome(pass, detail)
}

fn diag(values: &[f64]) -> ComplexMatrix {
    DMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&x| c64(x, 0.0))))
}

fn analytic_anchor(ledger: &mut Ledger) -> Outcome {
    let sys = ConstraintSystem::new(
        HermitianMatrix::new(diag(&[2.0, 1.0, 0.0])).unwrap(),
        vec![SymmetricMatrix::new(diag(&[1.0, -1.0, 0.0])).unwrap()],
    )
    .unwrap();
    let m = m_value(&sys, &solver(7)).unwrap();
    ledger.record("anchor", &sys, &m.minimization, rank_verified(&sys, 7));
    let Some(cert) = m.minimization.certificate.as_ref() else {
        return outcome(false, format!("m = {}, no certificate", m.value));
    };
    let v = &cert.v;
    let scale = (v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    let (a, b, c) = (v[0].norm() / scale, v[1].norm() / scale, v[2].norm() / scale);
    let pass = (m.value - 1.5).abs() <= 1e-6 && (a - b).abs() <= 1e-6 && c <= 1e-6;
    outcome(pass, format!("m = {}, |v1| = {a:.9}, |v2| = {b:.9}, |v3| = {c:.1e}", m.value))
}

fn gradient_check() -> Outcome {
    let h = 1e-6;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut rng = stream_rng(3000, 0);
    let mut trial = 0u64;
    while checked < 100 {
        trial += 1;
        let n = rng.random_range(2..=4);
        let k = rng.random_range(0..=2);
        let sys = random_system(3000 + trial, n, k);
        let t = ParamVector((0..sys.param_len()).map(|_| rng.random_range(-2.0..2.0)).collect());
        let g = psi_gradient(&sys, &t, 1e-6).unwrap();
        if g.gap <= 1e-6 * g.pencil_norm {
            continue;
        }
        checked += 1;
        let fd: Vec<f64> = (0..t.0.len())
            .map(|j| {
                let mut up = t.clone();
                let mut dn = t.clone();
                up.0[j] += h;
                dn.0[j] -= h;
                (psi(&sys, &up, Variant::SecondLargest).unwrap() - psi(&sys, &dn, Variant::SecondLargest).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff = g.grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        let e = diff / norm.max(1e-300);
        worst = worst.max(e);
        if e > 1e-5 {
            failures.push(format!("trial {trial}: rel {e:e}"));
        }
    }
    let mut detail = format!("100 points, worst rel {worst:.2e}");
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    outcome(failures.is_empty(), detail)
}

fn beta_containment(ledger: &mut Ledger) -> Outcome {
    // Backward-error systems add structured instances to the ones gathered above.
    for (i, s) in [Structure::PalT, Structure::EvenT, Structure::OddT].into_iter().enumerate() {
        let mut rng = stream_rng(4000 + i as u64, 0);
        let p = random_structured_polynomial(&mut rng, s, 3, 2).unwrap();
        let lambda = complex_normal(&mut rng);
        if let Ok(Reduction::System(sys)) = reduce_to_constraints(&p, lambda) {
            let r = minimize_psi(&sys, Variant::SecondLargest, &solver(4000)).unwrap();
            ledger.record(&format!("{s} reduction"), &sys, &r, rank_verified(&sys, 4000));
        }
    }
    let pass = ledger.beta_failures.is_empty() && ledger.beta_checked > 0;
    let mut detail = format!("{} rank-verified instances", ledger.beta_checked);
    if !ledger.beta_failures.is_empty() {
        detail += &format!("; {}", ledger.beta_failures.join("; "));
    }
    outcome(pass, detail)
}

fn certificate_validity(ledger: &Ledger) -> Outcome {
    let pass = ledger.certificate_failures.is_empty() && ledger.exact_runs > 0;
    let mut detail = format!("{} exact runs checked", ledger.exact_runs);
    if !ledger.certificate_failures.is_empty() {
        detail += &format!("; {}", ledger.certificate_failures.join("; "));
    }
    outcome(pass, detail)
}

fn transform(sys: &ConstraintSystem, u: &ComplexMatrix, weights: &[Complex64]) -> ConstraintSystem {
    let h = u.adjoint() * sys.h().as_matrix() * u;
    let s = sys
        .constraints()
        .iter()
        .zip(weights)
        .map(|(s, w)| SymmetricMatrix::new(u.transpose() * s.as_matrix() * u * *w).unwrap())
        .collect();
    ConstraintSystem::new(HermitianMatrix::new(h).unwrap(), s).unwrap()
}

fn invariance() -> Outcome {
    let mut problems = Vec::new();
    let mut worst_psi: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut scaled_exact = 0;
    for i in 0..10u64 {
        let seed = 5000 + i;
        let mut rng = stream_rng(seed, 9);
        let n = 2 + (i as usize % 3);
        let k = i as usize % 3;
        let sys = random_system(seed, n, k);
        let u = random_unitary(&mut rng, n);
        let ones = vec![c64(1.0, 0.0); k + 1];
        let rotated = transform(&sys, &u, &ones);
        for _ in 0..5 {
            let t = ParamVector((0..sys.param_len()).map(|_| rng.random_range(-2.0..2.0)).collect());
            let a = psi(&sys, &t, Variant::SecondLargest).unwrap();
            let b = psi(&rotated, &t, Variant::SecondLargest).unwrap();
            let e = (a - b).abs() / a.abs().max(1.0);
            worst_psi = worst_psi.max(e);
            if e > 1e-9 {
                problems.push(format!("seed {seed}: congruence {e:e}"));
            }
        }

        let mut weights: Vec<Complex64> = (0..k).map(|_| complex_normal(&mut rng) + c64(0.5, 0.0)).collect();
        weights.push(c64(rng.random_range(0.3..3.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 }, 0.0));
        let identity = ComplexMatrix::identity(n, n);
        let scaled = transform(&sys, &identity, &weights);
        let m0 = m_value(&sys, &solver(seed)).unwrap();
        let m1 = m_value(&scaled, &solver(seed)).unwrap();
        if m0.minimization.status == SolveStatus::Exact && m1.minimization.status == SolveStatus::Exact {
            scaled_exact += 1;
            let e = rel(m1.value, m0.value);
            worst_scale = worst_scale.max(e);
            if e > 1e-6 {
                problems.push(format!("seed {seed}: scaling {} vs {}", m1.value, m0.value));
            }
        }

        let tilde = m_tilde_value(&sys, &solver(seed)).unwrap();
        let neg = m_value(&sys.negated(), &solver(seed)).unwrap();
        if tilde.value.to_bits() != (-neg.value).to_bits() {
            problems.push(format!("seed {seed}: m_tilde {} vs -m(-H,-S) {}", tilde.value, -neg.value));
        }
    }
    let detail = format!(
        "congruence worst {worst_psi:.1e}, scaling worst {worst_scale:.1e} over {scaled_exact} exact pairs, m_tilde identity bitwise{}",
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn backward_ordering() -> Outcome {
    let mut problems = Vec::new();
    let mut rows = 0;
    for (kind, n) in [
        (ExperimentKind::PalTable, 3),
        (ExperimentKind::PalTable, 4),
        (ExperimentKind::EvenTable, 3),
        (ExperimentKind::EvenTable, 4),
    ] {
        let cfg = ExperimentConfig::new(kind, n, 3, 6000 + n as u64);
        let out = run_experiment(&cfg).unwrap();
        for r in &out.records {
            rows += 1;
            if r.eta_structured < r.eta_unstructured - 1e-8 {
                problems.push(format!("{kind} n {n} at {}: {} < {}", r.lambda, r.eta_structured, r.eta_unstructured));
            }
        }
    }
    let mut sweeps = Vec::new();
    for (structure, n) in [(Structure::PalT, 3), (Structure::EvenT, 3), (Structure::EvenT, 4)] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::ApproachSweep, n, 3, 6100 + n as u64);
        cfg.structure = structure;
        let out = run_experiment(&cfg).unwrap();
        let first = &out.records[0];
        let last = out.records.last().unwrap();
        sweeps.push(format!(
            "{structure} n {n}: unstructured {:.1e} -> {:.1e}, structured {:.1e} -> {:.1e}",
            first.eta_unstructured, last.eta_unstructured, first.eta_structured, last.eta_structured
        ));
        for (name, a, b) in [
            ("unstructured", first.eta_unstructured, last.eta_unstructured),
            ("structured", first.eta_structured, last.eta_structured),
        ] {
            if !(b <= 1e-2 && b <= 0.2 * a) {
                problems.push(format!("{structure} sweep {name}: {a} -> {b}"));
            }
        }
    }
    let detail = format!(
        "{rows} table rows; {}{}",
        sweeps.join("; "),
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn rank_of(a: &ComplexMatrix) -> usize {
    numerical_rank(a, DEFAULT_RANK_TOL).unwrap()
}

fn low_rank_symmetric<R: Rng>(rng: &mut R, n: usize, r: usize) -> ComplexMatrix {
    let x = random_complex(rng, n, r);
    &x * x.transpose()
}

fn rank_conditions() -> Outcome {
    let mut problems = Vec::new();

    let mut rng = stream_rng(7000, 0);
    let mut pal_points = 0;
    for n in [2, 3] {
        let p = random_structured_polynomial(&mut rng, Structure::PalT, n, 2).unwrap();
        let lambda = c64(0.4, 0.9);
        let Ok(Reduction::System(sys)) = reduce_to_constraints(&p, lambda) else {
            problems.push(format!("pal n {n}: reduction failed"));
            continue;
        };
        let probe = rank_condition_probe(
            &sys,
            &RankProbeOptions {
                trials: 100,
                seed: 7000 + n as u64,
                full_rank: Some(2 * n),
                ..RankProbeOptions::default()
            },
        )
        .unwrap();
        pal_points += probe.points_checked;
        if probe.verdict != RankVerdict::VerifiedFull {
            problems.push(format!("pal n {n}: {} (min rank {})", probe.verdict.as_str(), probe.min_rank));
        }
    }

    let mut pairs = 0;
    let mut rejected = 0;
    while pairs < 100 {
        let n = rng.random_range(3..=5);
        let r1 = rng.random_range(2..=n);
        let r2 = rng.random_range(2..=n);
        let a = low_rank_symmetric(&mut rng, n, r1);
        // Half the pairs share column space with `a` to exercise near-cancellation.
        let b = if rng.random_bool(0.5) {
            let shared = -&a * complex_normal(&mut rng);
            shared + low_rank_symmetric(&mut rng, n, r2)
        } else {
            low_rank_symmetric(&mut rng, n, r2)
        };
        let (ra, rb) = (rank_of(&a), rank_of(&b));
        let mut side = ComplexMatrix::zeros(n, 2 * n);
        side.view_mut((0, 0), (n, n)).copy_from(&a);
        side.view_mut((0, n), (n, n)).copy_from(&b);
        let mut stack = ComplexMatrix::zeros(2 * n, n);
        stack.view_mut((0, 0), (n, n)).copy_from(&a);
        stack.view_mut((n, 0), (n, n)).copy_from(&b);
        if ra < 2 || rb < 2 || rank_of(&side) + rank_of(&stack) < ra + rb + 2 {
            rejected += 1;
            continue;
        }
        pairs += 1;
        let sum_rank = rank_of(&(&a + &b));
        if sum_rank < 2 {
            problems.push(format!("pair {pairs}: rank of sum {sum_rank}"));
        }
    }

    let mut witness_ranks = Vec::new();
    for n in [2, 4] {
        let mut prng = stream_rng(7100 + n as u64, 0);
        let p = MatrixPolynomial::new(vec![random_skew(&mut prng, n), random_skew(&mut prng, n)], Structure::SkewT).unwrap();
        let lambda = c64(0.3, 0.7);
        let Ok(Reduction::System(sys)) = reduce_to_constraints(&p, lambda) else {
            problems.push(format!("skew n {n}: reduction failed"));
            continue;
        };
        let w = skew_pencil_witness(lambda);
        let f = assemble_f(&sys, &w).unwrap();
        // f is zero up to roundoff here, so the cutoff is scaled by the system, not by f
        let scale = w.norm() * sys.constraints().iter().map(|s| spectral_norm(s.as_matrix()).powi(2)).sum::<f64>().sqrt();
        let r = singular_values(&f).iter().filter(|&&s| s > DEFAULT_RANK_TOL * scale).count();
        witness_ranks.push(format!("n {n}: {r}"));
        if r > n {
            problems.push(format!("skew n {n}: witness rank {r} > {n}"));
        }
    }

    let detail = format!(
        "pal_T full rank at {pal_points} points; {pairs} hypothesis pairs ({rejected} rejected); skew witness ranks {}{}",
        witness_ranks.join(", "),
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn mu_identity() -> Outcome {
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = stream_rng(8000 + i, 0);
        let n = 2 + (i as usize % 4);
        let m = random_complex(&mut rng, n, n);
        let mu = mu_skew_value(&m, &solver(8000 + i)).unwrap();
        let sys = mu_skew_system(&m).unwrap();
        let k = karow_single(sys.h(), &sys.constraints()[0], &KarowOptions::default());
        let e = rel(mu.mu, k.value.sqrt());
        worst = worst.max(e);
        if e > 1e-6 {
            problems.push(format!("seed {}: mu {} vs line search {}", 8000 + i, mu.mu, k.value.sqrt()));
        }
    }
    let mut worst_skew: f64 = 0.0;
    for i in 0..5u64 {
        let mut rng = stream_rng(8100 + i, 0);
        let n = 2 + i as usize % 4;
        let m = random_skew(&mut rng, n);
        let mu = mu_skew_value(&m, &solver(8100 + i)).unwrap();
        let e = (mu.mu - spectral_norm(&m)).abs();
        worst_skew = worst_skew.max(e);
        if e > 1e-8 {
            problems.push(format!("skew seed {}: mu {} vs norm {}", 8100 + i, mu.mu, spectral_norm(&m)));
        }
    }
    let detail = format!(
        "20 random M worst rel {worst:.1e}; 5 skew M worst abs {worst_skew:.1e}{}",
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn run_cli(args: &[&str]) -> (Vec<u8>, Option<i32>) {
    let out = Command::new(env!("CARGO_BIN_EXE_symrq"))
        .args(args)
        .env_remove("RQ_SEED")
        .output()
        .expect("spawn symrq");
    (out.stdout, out.status.code())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut rng = stream_rng(9000, 0);
    let sys = random_system(9000, 3, 1);
    let poly = random_structured_polynomial(&mut rng, Structure::PalT, 3, 2).unwrap();
    let m = random_complex(&mut rng, 3, 3);
    std::fs::write(path("sys.json"), emit_system(&sys)).unwrap();
    std::fs::write(path("poly.json"), emit_polynomial(&poly)).unwrap();
    std::fs::write(path("m.json"), emit_matrix(&m)).unwrap();
    let (sysp, polyp, mp) = (path("sys.json"), path("poly.json"), path("m.json"));
    let commands: Vec<Vec<&str>> = vec![
        vec!["mhs", "--input", &sysp, "--seed", "5"],
        vec!["mhs", "--input", &sysp, "--tilde", "--json", "--seed", "5"],
        vec!["mhs", "--input", &sysp, "--csv", "--seed", "5"],
        vec!["backward-error", "--poly", &polyp, "--lambda", "0.4+0.8i", "--verify", "--seed", "5"],
        vec!["backward-error", "--poly", &polyp, "--lambda", "0.4+0.8i", "--json", "--seed", "5"],
        vec!["backward-error", "--poly", &polyp, "--lambda", "-1.2,0.3", "--csv", "--seed", "5"],
        vec!["experiment", "--kind", "pal-table", "--n", "3", "--degree", "3", "--points", "4", "--seed", "5"],
        vec!["experiment", "--kind", "approach-sweep", "--n", "2", "--degree", "3", "--seed", "5"],
        vec!["mu-skew", "--matrix", &mp, "--seed", "5"],
        vec!["mu-skew", "--matrix", &mp, "--json", "--seed", "5"],
        vec!["rank-check", "--input", &sysp, "--seed", "5"],
        vec!["rank-check", "--poly", &polyp, "--lambda", "0.4+0.8i", "--json", "--seed", "5"],
    ];
    let mut problems = Vec::new();
    for args in &commands {
        let a = run_cli(args);
        let b = run_cli(args);
        if a.0.is_empty() || a.1.is_none() || a.1 == Some(1) {
            problems.push(format!("{}: exit {:?}", args.join(" "), a.1));
        } else if a != b {
            problems.push(format!("{}: outputs differ", args.join(" ")));
        }
    }
    let out1 = path("a.csv");
    let out2 = path("b.csv");
    for out in [&out1, &out2] {
        run_cli(&["experiment", "--kind", "even-table", "--n", "3", "--degree", "3", "--points", "4", "--seed", "5", "--out", out]);
    }
    let f1 = std::fs::read(Path::new(&out1)).unwrap_or_default();
    let f2 = std::fs::read(Path::new(&out2)).unwrap_or_default();
    if f1.is_empty() || f1 != f2 {
        problems.push("experiment --out files differ".into());
    }
    let detail = format!(
        "{} commands run twice plus --out files{}",
        commands.len(),
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty(), detail)
}

fn main() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("single-constraint equivalence", single_constraint_equivalence(&mut ledger)));
    results.push(("sandwich property", sandwich(&mut ledger)));
    results.push(("analytic anchor", analytic_anchor(&mut ledger)));
    results.push(("gradient check", gradient_check()));
    results.push(("beta containment", beta_containment(&mut ledger)));
    results.push(("certificate validity", certificate_validity(&ledger)));
    results.push(("invariance suite", invariance()));
    results.push(("backward-error ordering", backward_ordering()));
    results.push(("rank conditions", rank_conditions()));
    results.push(("mu identity", mu_identity()));
    results.push(("determinism", determinism()));
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
