//! Acceptance run: one line per criterion with its verdict, the measured
//! quantity and the wall time.  Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hamspec::classify::{classify, CaseKind, ClassifyOptions};
use hamspec::extension::{PsiBasis, RegularBC, SseDescriptor};
use hamspec::matrix::{CMat, C64};
use hamspec::model::{
    ex_lcc, ex_lpc, ex_mid, second_order, Blocks, HamSequence, Profile, SecondOrderParams, Shape, SystemCoefficients,
    TailTag,
};
use hamspec::solution::{lagrange_residual, solve_ivp, symplectic_defect, FundamentalMatrix, TailOptions};
use hamspec::spectral::{
    approximate, defect_study, eigen_oracle, eigenvalues_regular, random_sequences, weighted_norm2, ApproxOptions,
    EigenOptions, LimitOptions, OracleOptions, RegularResolvent,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn identity(n: usize) -> CMat {
    CMat::identity(n)
}

fn lcc_descriptor(shift: f64) -> SseDescriptor {
    SseDescriptor::limit_circle(&ex_lcc().shifted(shift), identity(2), identity(2), -shift).expect("ex-lcc extension")
}

fn lpc_descriptor() -> SseDescriptor {
    SseDescriptor::limit_point(&ex_lpc(), CMat::from_real(&[&[1.0, 0.0]]), None, 0.0).expect("ex-lpc extension")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. Symplectic and Lagrange identities on random systems
// ---------------------------------------------------------------------------

const RANDOM_SCALE: f64 = 0.02;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
}

fn random_system(rng: &mut ChaCha8Rng, n: usize, last: i64) -> SystemCoefficients {
    let rows: Vec<Blocks> = (0..=last)
        .map(|_| {
            let herm = |m: CMat| m.hermitian_part();
            let psd = |m: CMat| m.matmul(&m.adjoint());
            let a = random_matrix(rng, n, RANDOM_SCALE);
            let b = herm(random_matrix(rng, n, RANDOM_SCALE));
            let c = herm(random_matrix(rng, n, RANDOM_SCALE));
            let w1 = psd(random_matrix(rng, n, RANDOM_SCALE.sqrt()));
            let w2 = psd(random_matrix(rng, n, RANDOM_SCALE.sqrt()));
            Blocks { a, b, c, w1, w2 }
        })
        .collect();
    SystemCoefficients::new(n, 0, TailTag::Constant, "random", move |t| {
        rows[(t.max(0) as usize).min(rows.len() - 1)].clone()
    })
}

fn random_vector(rng: &mut ChaCha8Rng, m: usize) -> Vec<C64> {
    (0..m).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lambdas = [C64::new(0.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(1.7, 0.0)];
    let horizon = 200;
    let (mut worst_sym, mut worst_lag) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let n = 1 + i % 2;
        let sys = random_system(&mut rng, n, horizon + 1);
        sys.validate(0..=horizon + 1, 1e-10).map_err(|e| format!("system {i} invalid: {e}"))?;
        for &lam in &lambdas {
            let mut phi = FundamentalMatrix::new(&sys, lam);
            let mut phi_bar = FundamentalMatrix::new(&sys, lam.conj());
            for t in 0..=horizon {
                let d = symplectic_defect(&phi.at(t).unwrap(), &phi_bar.at(t).unwrap(), n);
                worst_sym = worst_sym.max(d);
            }
        }
        for &lam in &lambdas {
            for &mu in &lambdas {
                let x0 = random_vector(&mut rng, 2 * n);
                let y0 = random_vector(&mut rng, 2 * n);
                let x = solve_ivp(&sys, lam, &x0, horizon + 1).unwrap();
                let y = solve_ivp(&sys, mu, &y0, horizon + 1).unwrap();
                let f = x.scale(lam);
                let g = y.scale(mu);
                let r = lagrange_residual(&sys, &x, &f, &y, &g, 0, horizon).map_err(|e| e.to_string())?;
                worst_lag = worst_lag.max(r);
            }
        }
    }
    check(
        worst_sym <= 1e-10 && worst_lag <= 1e-10,
        format!("max ‖Φ*(λ̄)JΦ(λ) − J‖ = {worst_sym:.2e}, max Lagrange residual = {worst_lag:.2e} (limit 1e-10)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Induced boundary conditions
// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let psi = PsiBasis::build(&ex_mid(), -1.0, 3, 61).map_err(|e| e.to_string())?;
    let cases: Vec<(&str, SseDescriptor)> = vec![
        ("limit-circle", lcc_descriptor(0.0)),
        ("limit-point", lpc_descriptor()),
        ("intermediate", SseDescriptor::intermediate_natural(&ex_mid(), psi).map_err(|e| e.to_string())?),
    ];
    let mut worst = 0.0f64;
    for (name, desc) in &cases {
        for b in [15, 30, 60] {
            let bc = desc.induce_regular(b).map_err(|e| format!("{name} b={b}: {e}"))?;
            let rep = bc.report();
            if rep.rank != 2 * desc.n() {
                return Err(format!("{name} b={b}: rank(P, Q) = {}", rep.rank));
            }
            worst = worst.max(rep.symplectic_residual);
        }
    }
    check(worst <= 1e-9, format!("rank 2n in all 9 cases, max ‖PJP* − QJQ*‖ = {worst:.2e} (limit 1e-9)"))
}

// ---------------------------------------------------------------------------
// 3. Compression eigenvalues against the exact chain spectrum and the determinant scan
// ---------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let p = SecondOrderParams { p: Profile::Constant(1.0), q: Profile::Constant(0.0), w: Profile::Constant(1.0), a: 0 };
    let sys = second_order(&p, "chain");
    let bc = RegularBC::dirichlet(1, 8);
    let list = eigenvalues_regular(&sys, &bc, &EigenOptions::default()).map_err(|e| e.to_string())?;
    let exact: Vec<f64> = (1..=8).map(|k| 4.0 * (k as f64 * std::f64::consts::PI / 18.0).sin().powi(2)).collect();
    if list.values.len() != 8 {
        return Err(format!("{} eigenvalues instead of 8", list.values.len()));
    }
    let err_exact = list.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let roots = eigen_oracle(&sys, &bc, -0.5, 4.5, &OracleOptions::default()).map_err(|e| e.to_string())?;
    if roots.len() != 8 {
        return Err(format!("determinant scan found {} roots", roots.len()));
    }
    let err_oracle = list.values.iter().zip(&roots).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        err_exact <= 1e-8 && err_oracle <= 1e-7,
        format!("max |λ − 4sin²(kπ/18)| = {err_exact:.2e} (1e-8), max |λ − root| = {err_oracle:.2e} (1e-7)"),
    )
}

// ---------------------------------------------------------------------------
// 4. Kernel sum against variation of constants
// ---------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let desc = lcc_descriptor(0.0);
    let sys = desc.system().clone();
    let z = C64::new(0.3, 0.7);
    let j = CMat::j(1);
    let mut worst = 0.0f64;
    for b in [15, 30, 60] {
        let bc = desc.induce_regular(b).map_err(|e| e.to_string())?;
        let res = RegularResolvent::new(&sys, &bc, z).map_err(|e| e.to_string())?;
        let diff = &res.green.m_kernel - &res.green.n_kernel;
        if diff != j {
            return Err(format!("b={b}: M − N differs from J: {diff:?}"));
        }
        for g in random_sequences(&sys, b, 5, 11 + b as u64) {
            let y1 = res.apply(&g).map_err(|e| e.to_string())?;
            let y2 = res.apply_kernel(&g).map_err(|e| e.to_string())?;
            let d = HamSequence {
                start: y1.start,
                values: y1
                    .values
                    .iter()
                    .zip(&y2.values)
                    .map(|(p, q)| p.iter().zip(q).map(|(a, c)| a - c).collect())
                    .collect(),
            };
            worst = worst.max(weighted_norm2(&sys, &d, sys.start()..=b).unwrap().sqrt());
        }
    }
    check(
        worst <= 1e-9,
        format!("M − N = J bitwise for b ∈ {{15,30,60}}, max weighted ‖kernel − VoC‖ = {worst:.2e} (1e-9)"),
    )
}

// ---------------------------------------------------------------------------
// 5. Resolvent defect decay and the a-priori bound
// ---------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let desc = lcc_descriptor(0.0);
    let sys = desc.system().clone();
    let schedule = [15, 30, 60, 120];
    let gs = random_sequences(&sys, 15, 3, 5);
    let samples =
        defect_study(&desc, C64::new(0.0, 1.0), &gs, &schedule, LimitOptions::default(), TailOptions::default())
            .map_err(|e| e.to_string())?;
    let mut last = Vec::new();
    for s in 0..gs.len() {
        let seq: Vec<_> = samples.iter().filter(|d| d.sample == s).collect();
        if seq.len() != schedule.len() {
            return Err(format!("sample {s}: {} defects", seq.len()));
        }
        if seq.windows(2).any(|w| w[1].delta >= w[0].delta) {
            return Err(format!("sample {s}: δ not decreasing: {:?}", seq.iter().map(|d| d.delta).collect::<Vec<_>>()));
        }
        if let Some(d) = seq.iter().find(|d| d.delta > d.bound) {
            return Err(format!("sample {s}, b={}: δ = {:.3e} exceeds η‖g‖² = {:.3e}", d.b, d.delta, d.bound));
        }
        last.push(seq.last().unwrap().delta);
    }
    let worst = last.iter().cloned().fold(0.0, f64::max);
    check(worst < 1e-6, format!("δ decreasing and ≤ η‖g‖² for 3 samples, δ at b=120 ≤ {worst:.2e} (1e-6)"))
}

// ---------------------------------------------------------------------------
// 6, 7, 9. Limit-circle trajectories
// ---------------------------------------------------------------------------

/// Spectral shift placing three eigenvalues of ex-lcc on each side of 0.
const LCC_SHIFT: f64 = 5.0;

fn criterion_6() -> Outcome {
    let desc = lcc_descriptor(LCC_SHIFT);
    let opts = ApproxOptions { spectral_shift: LCC_SHIFT, ..Default::default() };
    let rep = approximate(&desc, &[15, 30, 60, 120], &opts).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in [-3i64, -2, -1, 1, 2, 3] {
        let tr = rep.trajectories.iter().find(|t| t.k == k).ok_or(format!("no trajectory for k = {k}"))?;
        let at = |b: i64| tr.points.iter().find(|p| p.b == b).map(|p| p.lambda);
        let (l60, l120) = (at(60).ok_or("missing b=60")?, at(120).ok_or("missing b=120")?);
        worst = worst.max((l60 - l120).abs());
    }
    check(worst <= 1e-6, format!("6 trajectories (shift {LCC_SHIFT}), max |λ_k(60) − λ_k(120)| = {worst:.2e} (1e-6)"))
}

fn criterion_7() -> Outcome {
    let desc = lcc_descriptor(LCC_SHIFT);
    let opts = ApproxOptions { spectral_shift: LCC_SHIFT, ..Default::default() };
    let rep = approximate(&desc, &[60, 120, 480], &opts).map_err(|e| e.to_string())?;
    let (mut valid, mut skipped, mut worst_ratio) = (0, 0, 0.0f64);
    for k in [-3i64, -2, -1, 1, 2, 3] {
        let tr = rep.trajectories.iter().find(|t| t.k == k).ok_or(format!("no trajectory for k = {k}"))?;
        let proxy = tr.points.iter().find(|p| p.b == 480).ok_or("missing b=480")?.lambda;
        for p in tr.points.iter().filter(|p| p.b == 60 || p.b == 120) {
            match p.bound_a {
                Some(bound) => {
                    valid += 1;
                    let err = (p.lambda - proxy).abs();
                    if err > bound {
                        return Err(format!("k={k} b={}: |λ − λ(480)| = {err:.3e} > bound {bound:.3e}", p.b));
                    }
                    if bound > 0.0 {
                        worst_ratio = worst_ratio.max(err / bound);
                    }
                }
                None => skipped += 1,
            }
        }
    }
    check(valid > 0, format!("{valid} valid bounds hold ({skipped} not valid), max error/bound = {worst_ratio:.2e}"))
}

fn criterion_9() -> Outcome {
    let desc = lcc_descriptor(0.0);
    let schedule = [15, 30, 60, 120, 240];
    let rep = approximate(&desc, &schedule, &ApproxOptions::default()).map_err(|e| e.to_string())?;
    let sums: Vec<f64> = rep.runs.iter().map(|r| r.hs_sum.ok_or("missing sum")).collect::<Result<_, _>>()?;
    let sup = sums.iter().cloned().fold(0.0, f64::max);
    let last = *sums.last().unwrap();
    let monotone = sums.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let diffs: Vec<f64> = sums.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let settling = diffs.windows(2).all(|w| w[1] <= w[0] || w[1] <= 1e-12 * last);
    check(
        monotone && settling && sup <= last * (1.0 + 1e-9),
        format!(
            "Σ|λ_k|⁻² = {:?}, nondecreasing with shrinking increments, bounded by {sup:.10}",
            sums.iter().map(|s| format!("{s:.8}")).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Classification fixtures
// ---------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let opts = ClassifyOptions::default();
    let mut seen = Vec::new();
    for (sys, kind, d) in [
        (ex_lcc(), CaseKind::LimitCircle, 2),
        (ex_lpc(), CaseKind::LimitPoint, 1),
        (ex_mid(), CaseKind::Intermediate, 3),
    ] {
        let label = classify(&sys, &opts).map_err(|e| format!("{}: {e}", sys.label()))?;
        if label.kind != kind || label.d != d {
            return Err(format!("{}: got ({:?}, {})", sys.label(), label.kind, label.d));
        }
        seen.push(format!("{} → ({:?}, {})", sys.label(), label.kind, label.d));
    }
    let p = SecondOrderParams {
        p: Profile::Constant(1.0),
        q: Profile::Constant(0.0),
        w: Profile::Shaped(Shape::Table { values: vec![1.0, 2.0, 1.0, 0.5], then: 0.0 }),
        a: 0,
    };
    let label = classify(&second_order(&p, "finite"), &opts).map_err(|e| e.to_string())?;
    if !(label.finite_dim_space && label.d == 2) {
        return Err(format!("finite support: finite_dim_space = {}, d = {}", label.finite_dim_space, label.d));
    }
    seen.push("finite support → finite_dim_space, d = 2".into());
    Ok(seen.join("; "))
}

// ---------------------------------------------------------------------------
// 10. Limit-point inclusion
// ---------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let desc = lpc_descriptor();
    let schedule = [30, 60, 120];
    let rep = approximate(&desc, &schedule, &ApproxOptions { max_index: 1, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let mut counts = Vec::new();
    let mut gaps = Vec::new();
    for run in &rep.runs {
        let list = run.eigen.as_ref().ok_or(format!("run b={} failed: {:?}", run.b, run.error))?;
        let inside: Vec<f64> = list.values.iter().cloned().filter(|v| (0.5..=3.5).contains(v)).collect();
        counts.push(inside.len());
        gaps.push(inside.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
    }
    let growing = counts.windows(2).all(|w| w[1] > w[0]);
    let shrink = gaps[0] / gaps[2];
    check(
        growing && shrink >= 2.0,
        format!(
            "counts in [0.5, 3.5] = {counts:?}, largest gap {:.4} → {:.4} (shrink ×{shrink:.2}, need ≥ 2)",
            gaps[0], gaps[2]
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "symplectic and Lagrange identities", Duration::from_secs(10), criterion_1),
        (2, "induced boundary conditions", Duration::from_secs(10), criterion_2),
        (3, "eigensolver vs exact spectrum and determinant oracle", Duration::from_secs(5), criterion_3),
        (4, "Green kernel vs variation of constants", Duration::from_secs(10), criterion_4),
        (5, "resolvent defect decay", Duration::from_secs(60), criterion_5),
        (6, "limit-circle trajectory convergence", Duration::from_secs(60), criterion_6),
        (7, "error bound validity against b=480 proxy", Duration::from_secs(300), criterion_7),
        (8, "classification fixtures", Duration::from_secs(30), criterion_8),
        (9, "Hilbert-Schmidt partial sums bounded", Duration::from_secs(60), criterion_9),
        (10, "limit-point inclusion filling", Duration::from_secs(60), criterion_10),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let clock = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = clock.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; exceeded time limit {:.0} s", limit.as_secs_f64())),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {verdict} [{:.3} s / {:.0} s] {name}: {detail}",
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
