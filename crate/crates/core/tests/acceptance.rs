//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! hard criterion fails. Criterion 6 (wall-time ratio) is advisory.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use mmmc::analysis::{error_vs_exact, exact_expectation_1d, NormKind, NormMatrices};
use mmmc::assembly::{assemble_perturbation_matrix, assemble_stiffness};
use mmmc::experiments::{
    benchmark_1d_inputs, benchmark_1d_mesh, benchmark_2d_inputs, benchmark_2d_mesh, compare,
    converge, table1, truncation_errors, CompareOptions, ConvergeOptions, ExpectationMode,
    Table1Options,
};
use mmmc::quadrature::QuadratureRule;
use mmmc::random_fields::{
    draw_sample, kl_decompose, kl_to_weak_form, CovarianceKernel, DeterministicField, NoiseLaw,
    NystromOptions, VariateStream, ETA_STREAM,
};
use mmmc::solver::{run_bruteforce_mc, run_multimode_mc, MeshSpec, SolverConfig, SolverVariant};
use mmmc::{Domain, ScalarField};

struct Outcome {
    pass: bool,
    detail: String,
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Published values of the 1D relative-error table, rows ε = 0.2..0.8, columns N = 2..6.
const TABLE1: [[f64; 5]; 4] = [
    [1.95e-2, 3.15e-3, 4.74e-4, 1.45e-4, 6.40e-5],
    [7.66e-2, 2.42e-2, 8.05e-3, 2.71e-3, 9.84e-4],
    [0.1688, 0.0806, 0.0391, 0.0208, 0.0100],
    [0.2960, 0.1869, 0.1222, 0.0839, 0.0574],
];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    let cases = [
        (benchmark_1d_mesh(50), benchmark_1d_inputs(), 0.3, 4, 123),
        (benchmark_2d_mesh(8), benchmark_2d_inputs(), 0.4, 3, 17),
        (benchmark_1d_mesh(7), benchmark_1d_inputs(), 0.9, 1, 1),
    ];
    for (mesh, inputs, eps, n, m) in cases {
        let mut cfg = SolverConfig::new(mesh, eps, n, m, 5);
        let r = run_multimode_mc(&cfg, &inputs).expect("multi-modes run");
        let c = r.counters;
        pass &= c.factorizations == 1
            && c.triangular_solve_pairs == (m * n) as u64
            && c.matvecs == (m * (n - 1)) as u64;
        cfg.variant = SolverVariant::BruteForce;
        let b = run_bruteforce_mc(&cfg, &inputs).expect("brute-force run");
        pass &= b.counters.factorizations == m as u64 && b.counters.triangular_solve_pairs == m as u64;
        lines.push(format!(
            "M={m} N={n}: mm fact={} pairs={}, bf fact={}",
            c.factorizations, c.triangular_solve_pairs, b.counters.factorizations
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass, format!("{} ({secs:.2}s)", lines.join("; ")))
}

fn criterion_2() -> Outcome {
    let opts = Table1Options {
        seed: 2024,
        ..Table1Options::default()
    };
    let t = table1(&opts).expect("table run");
    let mut pass = true;
    let mut worst = String::new();
    let mut worst_excess = f64::NEG_INFINITY;
    for (i, &eps) in opts.epsilons.iter().enumerate() {
        for (k, &n) in opts.modes.iter().enumerate() {
            let cell = t.cell(eps, n).expect("cell");
            let reference = TABLE1[i][k];
            let se = cell.rel_standard_error;
            let (ok, excess) = if reference < 5e-4 {
                (cell.rel_l2_error <= 5.0 * se, cell.rel_l2_error / (5.0 * se))
            } else {
                let tol = (0.25 * reference).max(3.0 * se);
                let d = (cell.rel_l2_error - reference).abs();
                (d <= tol, d / tol)
            };
            pass &= ok;
            if excess > worst_excess {
                worst_excess = excess;
                worst = format!(
                    "worst cell ε={eps} N={n}: {:.3e} vs {reference:.3e} (SE {se:.1e})",
                    cell.rel_l2_error
                );
            }
        }
    }
    let c = t.cell(0.6, 4).expect("cell");
    outcome(
        pass,
        format!(
            "ε=0.6 N=4: {:.4} (reference 0.0391); {worst}; {:.1}s",
            c.rel_l2_error,
            t.timings.total.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let r = converge(&ConvergeOptions::default()).expect("convergence run");
    let h1 = r.h1.orders();
    let l2 = r.l2.orders();
    let h1_at_005 = r.h1.rows[2].error;
    let pass = h1.iter().all(|o| (0.9..=1.1).contains(o))
        && l2.iter().all(|o| (1.8..=2.7).contains(o))
        && (h1_at_005 / 5.46e-3 - 1.0).abs() <= 0.15;
    outcome(
        pass,
        format!("H1 orders {h1:.3?}; L2 orders {l2:.3?}; H1(h=0.05) = {h1_at_005:.3e} (reference 5.46e-3)"),
    )
}

fn criterion_4() -> Outcome {
    let e = truncation_errors(200, 0.5, 5, ExpectationMode::Quadrature { points: 64 }, 0)
        .expect("truncation run");
    let ratios: Vec<f64> = e.windows(2).map(|w| w[1] / w[0]).collect();
    let pass = ratios.iter().all(|r| (0.25..=1.0).contains(r));
    outcome(pass, format!("errors {}; ratios {ratios:.3?}", sci(&e)))
}

fn compare_options() -> CompareOptions {
    let mut opts = CompareOptions::benchmark_2d(0.1, 500).expect("benchmark options");
    opts.epsilons = vec![0.2, 0.4];
    opts.n_max = 5;
    opts.seed = 7;
    opts
}

fn criteria_5_and_6() -> (Outcome, Outcome) {
    let start = Instant::now();
    let r = compare(&compare_options()).expect("comparison run");
    let mut pass = true;
    let mut lines = Vec::new();
    for eps in [0.2, 0.4] {
        let d: Vec<f64> = (2..=5).map(|n| r.distance(eps, n).expect("row")).collect();
        pass &= d[0] > d[1] && d[1] > d[2];
        lines.push(format!("ε={eps}: {}", sci(&d)));
    }
    let d04 = r.distance(0.4, 2).expect("row");
    pass &= d04 >= 0.0416 / 2.0 && d04 <= 0.0416 * 2.0;
    let c5 = outcome(
        pass,
        format!(
            "{}; ε=0.4 N=2 {d04:.4} (reference 0.0416); {:.1}s",
            lines.join("; "),
            start.elapsed().as_secs_f64()
        ),
    );
    let ratios: Vec<String> = r
        .timings
        .iter()
        .map(|t| {
            format!(
                "ε={}: bf {:.3}s / mm {:.3}s = {:.2}",
                t.epsilon,
                t.bruteforce.as_secs_f64(),
                t.multimode.as_secs_f64(),
                t.ratio()
            )
        })
        .collect();
    let best = r.timings.iter().map(|t| t.ratio()).fold(0.0, f64::max);
    (c5, outcome(best >= 5.0, ratios.join("; ")))
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let cases = [
        (benchmark_1d_mesh(40), benchmark_1d_inputs(), 200),
        (benchmark_2d_mesh(10), benchmark_2d_inputs(), 30),
    ];
    for (mesh, inputs, m) in cases {
        for n in [1, 4] {
            let mut cfg = SolverConfig::new(mesh, 0.0, n, m, 99);
            let a = run_multimode_mc(&cfg, &inputs).expect("multi-modes run");
            cfg.variant = SolverVariant::BruteForce;
            let b = run_bruteforce_mc(&cfg, &inputs).expect("brute-force run");
            let d = NormMatrices::new(&a.mesh)
                .distance(&a.psi, &b.psi, NormKind::RelativeL2)
                .expect("distance");
            worst = worst.max(d);
        }
    }
    outcome(worst < 1e-10, format!("max relative L2 distance {worst:.2e}"))
}

/// Eigenvalues of `exp(−|x−y|/ℓ)` on `(0, 1)` from the transcendental equations
/// `c − ω tan(ω/2) = 0` and `ω + c tan(ω/2) = 0`, `c = 1/ℓ`, `λ = 2c/(ω² + c²)`.
fn exponential_kernel_eigenvalues(length: f64, count: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let c = 1.0 / length;
    let bisect = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let even = |w: f64| c - w * (w / 2.0).tan();
    let odd = |w: f64| w + c * (w / 2.0).tan();
    let pad = 1e-12;
    let mut lambdas = Vec::new();
    for k in 0..count {
        let k = k as f64;
        let we = bisect(&even, 2.0 * k * PI + pad, (2.0 * k + 1.0) * PI - pad);
        let wo = bisect(&odd, (2.0 * k + 1.0) * PI + pad, (2.0 * k + 2.0) * PI - pad);
        for w in [we, wo] {
            lambdas.push(2.0 * c / (w * w + c * c));
        }
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.truncate(count);
    lambdas
}

fn criterion_8() -> Outcome {
    let domain = Domain::interval(0.0, 1.0).expect("domain");
    let kernel = CovarianceKernel::exp_abs(1, 0.5).expect("kernel");
    let oracle = exponential_kernel_eigenvalues(0.5, 5);
    let corrected = kl_decompose(&kernel, &domain, NystromOptions::new(400, 10)).expect("kl");
    let eig_err = corrected.eigenvalues()[..5]
        .iter()
        .zip(&oracle)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    let plain = kl_decompose(&kernel, &domain, NystromOptions::plain(400, 10)).expect("kl");
    let trace_err = (plain.trace() - 1.0).abs();

    let basis = Arc::new(corrected);
    let weak = kl_to_weak_form(
        DeterministicField::Constant(2.0),
        Arc::clone(&basis),
        10,
        NoiseLaw::StandardNormal,
        ETA_STREAM,
    )
    .expect("weak form");
    let mut recomb_err = 0.0f64;
    for j in 0..20u64 {
        let xi = weak.eta.draw_coordinates(3, j);
        let zeta = weak.eta.realize(&xi).expect("realize");
        for i in 0..=20 {
            let x = [i as f64 / 20.0, 0.0];
            let lhs = 2.0 + weak.epsilon * zeta.value(x);
            let rhs = basis.direct_sum(2.0, &xi, x);
            recomb_err = recomb_err.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    let short = kl_decompose(
        &CovarianceKernel::exp_abs(1, 0.1).expect("kernel"),
        &domain,
        NystromOptions::new(400, 10),
    )
    .expect("kl");
    let eps_short = short.eigenvalues()[0].sqrt();
    let eps_long = weak.epsilon;
    let pass = eig_err <= 1e-6 && trace_err <= 1e-6 && recomb_err <= 1e-12 && eps_short < eps_long;
    outcome(
        pass,
        format!(
            "eigenvalue rel err {eig_err:.1e}; trace err {trace_err:.1e}; recombination {recomb_err:.1e}; ε(ℓ=0.1)={eps_short:.4} < ε(ℓ=0.5)={eps_long:.4}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();

    // Symmetry and positive definiteness on random vectors.
    let mesh = benchmark_2d_mesh(9).build().expect("mesh");
    let inputs = benchmark_2d_inputs();
    let q = QuadratureRule::assembly_default(2);
    let draw = draw_sample(&inputs.eta, &inputs.f, 1, 0);
    let coeff = |x: [f64; 2]| 1.0 + 0.4 * draw.eta().value(x);
    let k = assemble_stiffness(&mesh, &coeff, &q).expect("stiffness");
    let k_eta = assemble_perturbation_matrix(&mesh, &draw.eta(), &q).expect("perturbation");
    let mut s = VariateStream::new(11, 0, 0);
    let spd = (0..50).all(|_| {
        let v: Vec<f64> = (0..mesh.n_dofs()).map(|_| s.uniform(-1.0, 1.0)).collect();
        k.quadratic_form(&v).expect("form") > 0.0
    });
    if !(k.is_symmetric() && k_eta.is_symmetric() && spd) {
        failures.push("symmetry/SPD");
    }

    // Estimator identity.
    let cfg = SolverConfig::new(benchmark_2d_mesh(6), 0.35, 4, 25, 3);
    let r = run_multimode_mc(&cfg, &inputs).expect("run");
    let mut sum = vec![0.0; r.psi.len()];
    for (n, phi) in r.mode_means.iter().enumerate() {
        let w = 0.35f64.powi(n as i32);
        sum.iter_mut().zip(phi.iter()).for_each(|(a, b)| *a += w * b);
    }
    let id_err = r
        .psi
        .iter()
        .zip(&sum)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = r.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if id_err > 1e-12 * scale {
        failures.push("estimator identity");
    }

    // Per-sample mode ratio in the 1D benchmark.
    let eps = 0.6;
    let mesh1 = benchmark_1d_mesh(30).build().expect("mesh");
    let in1 = benchmark_1d_inputs();
    let solver = mmmc::solver::MultiModeSolver::new(&mesh1, &in1.a0, QuadratureRule::assembly_default(1))
        .expect("solver");
    let norms = NormMatrices::new(&mesh1);
    let mut ratio_ok = true;
    for j in 0..200 {
        let d = draw_sample(&in1.eta, &in1.f, 5, j);
        let mut prev = None;
        let mut w = 1.0;
        solver
            .sample_modes(
                &d,
                6,
                &mut Default::default(),
                &mut Default::default(),
                |_, u| {
                    let h = w * norms.h1(u);
                    if let Some(p) = prev {
                        ratio_ok &= h <= eps * p * (1.0 + 1e-12);
                    }
                    prev = Some(h);
                    w *= eps;
                },
            )
            .expect("modes");
    }
    if !ratio_ok {
        failures.push("mode ratio");
    }

    // Draw determinism.
    let a = draw_sample(&inputs.eta, &inputs.f, 77, 12345);
    let b = draw_sample(&inputs.eta, &inputs.f, 77, 12345);
    if a.eta_coords != b.eta_coords || a.f_coords != b.f_coords {
        failures.push("draw determinism");
    }

    // Bitwise reproducibility at a fixed worker count.
    let mut cfg = SolverConfig::new(benchmark_2d_mesh(6), 0.5, 3, 40, 8);
    cfg.workers = 3;
    let x = run_multimode_mc(&cfg, &inputs).expect("run");
    let y = run_multimode_mc(&cfg, &inputs).expect("run");
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    if bits(&x.psi) != bits(&y.psi) {
        failures.push("bitwise reproducibility");
    }

    // ε = 0 multi-modes equals brute force on a custom mesh spec as well.
    let mut zero = SolverConfig::new(
        MeshSpec {
            domain: Domain::interval(-1.0, 2.0).expect("domain"),
            cells: 13,
        },
        0.0,
        2,
        10,
        4,
    );
    let m0 = run_multimode_mc(&zero, &in1).expect("run");
    zero.variant = SolverVariant::BruteForce;
    let b0 = run_bruteforce_mc(&zero, &in1).expect("run");
    if NormMatrices::new(&m0.mesh)
        .distance(&m0.psi, &b0.psi, NormKind::RelativeL2)
        .expect("distance")
        > 1e-12
    {
        failures.push("zero-ε agreement");
    }

    let exact = exact_expectation_1d(0.0).expect("exact");
    if error_vs_exact(&m0.mesh, &m0.psi, &exact, NormKind::L2).is_err() {
        failures.push("error evaluation");
    }

    if failures.is_empty() {
        outcome(true, "symmetry/SPD, estimator identity, mode ratio ≤ ε, draw determinism, bitwise reproducibility")
    } else {
        outcome(false, format!("failed: {}", failures.join(", ")))
    }
}

fn main() -> ExitCode {
    let mut hard_failures = 0;
    let mut report = |id: &str, name: &str, advisory: bool, o: Outcome| {
        let status = match (o.pass, advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (advisory)",
        };
        println!("criterion {id} [{name}]: {status}: {}", o.detail);
        if !o.pass && !advisory {
            hard_failures += 1;
        }
    };
    report("1", "operation counters", false, criterion_1());
    report("2", "1D relative error table", false, criterion_2());
    report("3", "1D mesh convergence orders", false, criterion_3());
    report("4", "mode truncation rate", false, criterion_4());
    let (c5, c6) = criteria_5_and_6();
    report("5", "2D shared-sample comparison", false, c5);
    report("6", "wall-time ratio", true, c6);
    report("7", "zero-perturbation equivalence", false, criterion_7());
    report("8", "KL decomposition", false, criterion_8());
    report("9", "property checks", false, criterion_9());
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
