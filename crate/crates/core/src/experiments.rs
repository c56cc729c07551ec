//! Benchmark problems and the experiment drivers behind the command-line tool.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::analysis::{
    convergence_orders, error_vs_exact, exact_expectation_1d, quadrature_expectation_1d,
    ConvergenceTable, NormKind, NormMatrices,
};
use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::mesh::Domain;
use crate::random_fields::{
    draw_sample, kl_decompose, kl_to_weak_form, CovarianceKernel, DeterministicField, KlBasis,
    NoiseLaw, NystromOptions, RandomFieldSpec, WeakForm, ETA_STREAM, SOURCE_STREAM,
};
use crate::solver::{
    for_each_sample, run_bruteforce_mc, run_multimode_mc, MeshSpec, MultiModeSolver,
    ProblemInputs, SolverConfig, SolverVariant, Timings,
};
use crate::sparse_direct::OpCounters;

/// `−((1 + εY) u')' = Y` on `(0, 1)` with one `Y ~ U[0, 1]` driving both inputs.
pub fn benchmark_1d_inputs() -> ProblemInputs {
    let y = RandomFieldSpec::scalar_uniform(0.0, 1.0, ETA_STREAM).expect("valid range");
    ProblemInputs {
        a0: DeterministicField::Constant(1.0),
        eta: y.clone(),
        f: y,
    }
}

pub fn benchmark_1d_mesh(cells: usize) -> MeshSpec {
    MeshSpec {
        domain: Domain::Interval1D {
            x_lo: 0.0,
            x_hi: 1.0,
        },
        cells,
    }
}

/// Unit background coefficient with the trigonometric-series `η` and `f` on `(0, 2)²`.
pub fn benchmark_2d_inputs() -> ProblemInputs {
    ProblemInputs {
        a0: DeterministicField::Constant(1.0),
        eta: RandomFieldSpec::trig_eta(ETA_STREAM),
        f: RandomFieldSpec::trig_source(SOURCE_STREAM),
    }
}

/// Square cells of side `2 / cells`.
pub fn benchmark_2d_mesh(cells: usize) -> MeshSpec {
    MeshSpec {
        domain: Domain::Rect2D {
            x_lo: 0.0,
            x_hi: 2.0,
            y_lo: 0.0,
            y_hi: 2.0,
        },
        cells,
    }
}

/// Number of cells of size `h` covering a length, rejecting non-divisors.
pub fn cells_for(length: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(h <= length) {
        return Err(Error::InvalidConfig(format!("mesh size {h} out of range")));
    }
    let n = (length / h).round();
    if (n * h - length).abs() > 1e-9 * length {
        return Err(Error::InvalidConfig(format!(
            "mesh size {h} does not divide length {length}"
        )));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone)]
pub struct Table1Options {
    pub cells: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub epsilons: Vec<f64>,
    pub modes: Vec<usize>,
}

impl Default for Table1Options {
    fn default() -> Self {
        Self {
            cells: 100,
            n_samples: 100_000,
            seed: 0,
            workers: 1,
            epsilons: vec![0.2, 0.4, 0.6, 0.8],
            modes: vec![2, 3, 4, 5, 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Cell {
    pub epsilon: f64,
    pub n_modes: usize,
    pub rel_l2_error: f64,
    /// Monte Carlo standard error relative to `‖E(u^ε)‖_{L2}`.
    pub rel_standard_error: f64,
}

#[derive(Debug, Clone)]
pub struct Table1Result {
    pub cells: Vec<Table1Cell>,
    pub counters: OpCounters,
    pub timings: Timings,
}

impl Table1Result {
    pub fn cell(&self, epsilon: f64, n_modes: usize) -> Option<&Table1Cell> {
        self.cells
            .iter()
            .find(|c| c.epsilon == epsilon && c.n_modes == n_modes)
    }
}

/// Per-node first moments of each mode and mixed second moments of mode pairs.
struct ModeMoments {
    n_modes: usize,
    s1: Vec<Vec<f64>>,
    /// `s2[pair(n, m)]` for `n ≤ m`.
    s2: Vec<Vec<f64>>,
    counters: OpCounters,
    timings: Timings,
    modes: Vec<Vec<f64>>,
}

fn pair(n: usize, m: usize, n_modes: usize) -> usize {
    n * n_modes - n * (n + 1) / 2 + m
}

impl ModeMoments {
    fn new(dim: usize, n_modes: usize) -> Self {
        Self {
            n_modes,
            s1: vec![vec![0.0; dim]; n_modes],
            s2: vec![vec![0.0; dim]; n_modes * (n_modes + 1) / 2],
            counters: OpCounters::default(),
            timings: Timings::default(),
            modes: vec![vec![0.0; dim]; n_modes],
        }
    }

    fn absorb_modes(&mut self) {
        let nm = self.n_modes;
        for n in 0..nm {
            for (s, v) in self.s1[n].iter_mut().zip(&self.modes[n]) {
                *s += v;
            }
            for m in n..nm {
                let (a, b) = (&self.modes[n], &self.modes[m]);
                for ((s, x), y) in self.s2[pair(n, m, nm)].iter_mut().zip(a).zip(b) {
                    *s += x * y;
                }
            }
        }
    }

    fn merge(&mut self, other: &ModeMoments) {
        for (a, b) in self.s1.iter_mut().chain(self.s2.iter_mut()).zip(other.s1.iter().chain(&other.s2)) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.counters += other.counters;
        self.timings.factorization += other.timings.factorization;
        self.timings.assembly += other.timings.assembly;
        self.timings.solves += other.timings.solves;
    }

    /// Estimator and per-node variance of `Σ_{n<N} ε^n u_n` over `m` samples.
    fn reweight(&self, epsilon: f64, n_modes: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
        let dim = self.s1[0].len();
        let mf = m as f64;
        let w: Vec<f64> = (0..n_modes).map(|n| epsilon.powi(n as i32)).collect();
        let mut mean = vec![0.0; dim];
        for n in 0..n_modes {
            mean.iter_mut().zip(&self.s1[n]).for_each(|(a, s)| *a += w[n] * s / mf);
        }
        let mut var = vec![0.0; dim];
        if m >= 2 {
            for n in 0..n_modes {
                for k in n..n_modes {
                    let c = if k == n { 1.0 } else { 2.0 } * w[n] * w[k];
                    var.iter_mut()
                        .zip(&self.s2[pair(n, k, self.n_modes)])
                        .for_each(|(v, s)| *v += c * s);
                }
            }
            for (v, a) in var.iter_mut().zip(&mean) {
                *v = ((*v - mf * a * a) / (mf - 1.0)).max(0.0);
            }
        }
        (mean, var)
    }
}

/// Relative L2 errors of the 1D benchmark over an `(ε, N)` grid.
///
/// The modes do not depend on `ε`, so one pass computing `N_max` modes per
/// sample serves every cell by reweighting.
pub fn table1(opts: &Table1Options) -> Result<Table1Result> {
    let n_max = opts.modes.iter().copied().max().unwrap_or(0);
    if n_max == 0 || opts.epsilons.is_empty() {
        return Err(Error::InvalidConfig("table needs at least one ε and one N".into()));
    }
    if opts.n_samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let start = Instant::now();
    let inputs = benchmark_1d_inputs();
    let mut config = SolverConfig::new(benchmark_1d_mesh(opts.cells), 0.0, n_max, opts.n_samples, opts.seed);
    config.workers = opts.workers;
    config.validate()?;
    let mesh = config.mesh.build()?;
    let solver = MultiModeSolver::new(&mesh, &inputs.a0, config.quadrature_rule())?;
    let dim = mesh.n_dofs();
    let states = for_each_sample(
        opts.n_samples,
        opts.workers,
        || ModeMoments::new(dim, n_max),
        |acc, j| {
            let draw = draw_sample(&inputs.eta, &inputs.f, opts.seed, j as u64);
            let ModeMoments {
                counters,
                timings,
                modes,
                ..
            } = acc;
            solver.sample_modes(&draw, n_max, counters, timings, |n, u| {
                modes[n].copy_from_slice(u);
            })?;
            acc.absorb_modes();
            Ok(())
        },
    )?;
    let mut it = states.into_iter();
    let mut acc = it.next().expect("at least one worker");
    for s in it {
        acc.merge(&s);
    }
    acc.counters += solver.setup_counters();

    let norms = NormMatrices::new(&mesh);
    let mut cells = Vec::new();
    for &eps in &opts.epsilons {
        let exact = exact_expectation_1d(eps)?;
        let exact_l2 = error_vs_exact(&mesh, &vec![0.0; dim], &exact, NormKind::L2)?;
        for &n in &opts.modes {
            let (mean, var) = acc.reweight(eps, n, opts.n_samples);
            let rel = error_vs_exact(&mesh, &mean, &exact, NormKind::RelativeL2)?;
            let se: f64 = var
                .iter()
                .zip(norms.lumped_mass())
                .map(|(v, w)| v * w)
                .sum::<f64>()
                / opts.n_samples as f64;
            cells.push(Table1Cell {
                epsilon: eps,
                n_modes: n,
                rel_l2_error: rel,
                rel_standard_error: se.sqrt() / exact_l2,
            });
        }
    }
    let mut timings = acc.timings;
    timings.total = start.elapsed();
    Ok(Table1Result {
        cells,
        counters: acc.counters,
        timings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationMode {
    /// Gauss–Legendre quadrature in the scalar random input.
    Quadrature { points: usize },
    MonteCarlo { n_samples: usize },
}

#[derive(Debug, Clone)]
pub struct ConvergeOptions {
    /// Strictly decreasing mesh sizes on `(0, 1)`.
    pub hs: Vec<f64>,
    pub epsilon: f64,
    pub n_modes: usize,
    pub mode: ExpectationMode,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            hs: vec![0.2, 0.1, 0.05, 0.025],
            epsilon: 0.5,
            n_modes: 10,
            mode: ExpectationMode::Quadrature { points: 64 },
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergeResult {
    pub h1: ConvergenceTable,
    pub l2: ConvergenceTable,
}

fn benchmark_1d_expectation(
    cells: usize,
    epsilon: f64,
    n_modes: usize,
    mode: ExpectationMode,
    seed: u64,
    workers: usize,
) -> Result<(Arc<crate::mesh::Mesh>, Vec<FieldVector>)> {
    let inputs = benchmark_1d_inputs();
    match mode {
        ExpectationMode::Quadrature { points } => {
            let config = SolverConfig::new(benchmark_1d_mesh(cells), epsilon, n_modes, 1, seed);
            let q = quadrature_expectation_1d(&config, &inputs, points)?;
            Ok((Arc::new(config.mesh.build()?), q.mode_means))
        }
        ExpectationMode::MonteCarlo { n_samples } => {
            let mut config =
                SolverConfig::new(benchmark_1d_mesh(cells), epsilon, n_modes, n_samples, seed);
            config.workers = workers;
            let r = run_multimode_mc(&config, &inputs)?;
            Ok((r.mesh, r.mode_means))
        }
    }
}

fn partial_sum(mode_means: &[FieldVector], epsilon: f64, n: usize) -> FieldVector {
    let mut psi = FieldVector::zeros(mode_means[0].len());
    let mut w = 1.0;
    for m in &mode_means[..n] {
        psi.axpy(w, m);
        w *= epsilon;
    }
    psi
}

/// Absolute H1 and L2 errors of the 1D benchmark under mesh refinement.
pub fn converge(opts: &ConvergeOptions) -> Result<ConvergeResult> {
    if opts.hs.is_empty() {
        return Err(Error::InvalidConfig("need at least one mesh size".into()));
    }
    if opts.hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("mesh sizes must be strictly decreasing".into()));
    }
    let exact = exact_expectation_1d(opts.epsilon)?;
    let (mut h1, mut l2) = (Vec::new(), Vec::new());
    for &h in &opts.hs {
        let cells = cells_for(1.0, h)?;
        let (mesh, means) =
            benchmark_1d_expectation(cells, opts.epsilon, opts.n_modes, opts.mode, opts.seed, opts.workers)?;
        let psi = partial_sum(&means, opts.epsilon, opts.n_modes);
        h1.push((h, error_vs_exact(&mesh, &psi, &exact, NormKind::H1)?));
        l2.push((h, error_vs_exact(&mesh, &psi, &exact, NormKind::L2)?));
    }
    Ok(ConvergeResult {
        h1: convergence_orders(&h1)?,
        l2: convergence_orders(&l2)?,
    })
}

/// Relative H1 errors of the 1D benchmark for `N = 1..=n_max` modes.
pub fn truncation_errors(
    cells: usize,
    epsilon: f64,
    n_max: usize,
    mode: ExpectationMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let exact = exact_expectation_1d(epsilon)?;
    let (mesh, means) = benchmark_1d_expectation(cells, epsilon, n_max, mode, seed, 1)?;
    (1..=n_max)
        .map(|n| {
            let psi = partial_sum(&means, epsilon, n);
            error_vs_exact(&mesh, &psi, &exact, NormKind::RelativeH1)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub mesh: MeshSpec,
    pub inputs: ProblemInputs,
    pub n_samples: usize,
    pub epsilons: Vec<f64>,
    /// Distances are reported for `N = 2..=n_max`.
    pub n_max: usize,
    /// Mode count of the timed multi-modes run.
    pub timing_modes: usize,
    pub seed: u64,
    pub workers: usize,
    /// Samples of the untimed warm-up run; zero disables it.
    pub warmup_samples: usize,
}

impl CompareOptions {
    /// The 2D benchmark with square cells of side `cell_side`.
    pub fn benchmark_2d(cell_side: f64, n_samples: usize) -> Result<Self> {
        Ok(Self {
            mesh: benchmark_2d_mesh(cells_for(2.0, cell_side)?),
            inputs: benchmark_2d_inputs(),
            n_samples,
            epsilons: vec![0.2, 0.4, 0.6, 0.8],
            n_max: 5,
            timing_modes: 3,
            seed: 0,
            workers: 1,
            warmup_samples: 10,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub epsilon: f64,
    pub n_modes: usize,
    pub rel_l2_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareTiming {
    pub epsilon: f64,
    pub bruteforce: Duration,
    pub multimode: Duration,
    pub bruteforce_counters: OpCounters,
    pub multimode_counters: OpCounters,
}

impl CompareTiming {
    /// Brute-force over multi-modes wall time.
    pub fn ratio(&self) -> f64 {
        self.bruteforce.as_secs_f64() / self.multimode.as_secs_f64()
    }
}

#[derive(Debug, Clone)]
pub struct CompareResult {
    pub rows: Vec<CompareRow>,
    pub timings: Vec<CompareTiming>,
}

impl CompareResult {
    pub fn distance(&self, epsilon: f64, n_modes: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epsilon == epsilon && r.n_modes == n_modes)
            .map(|r| r.rel_l2_distance)
    }
}

/// Shared-sample comparison of `Ψ_N` against the brute-force estimator.
pub fn compare(opts: &CompareOptions) -> Result<CompareResult> {
    if opts.n_max < 2 || opts.timing_modes < 1 {
        return Err(Error::InvalidConfig("compare needs n_max ≥ 2 and timing_modes ≥ 1".into()));
    }
    let config = |eps: f64, n: usize, m: usize, variant: SolverVariant| {
        let mut c = SolverConfig::new(opts.mesh, eps, n, m, opts.seed);
        c.workers = opts.workers;
        c.variant = variant;
        c
    };
    if opts.warmup_samples > 0 {
        let eps = opts.epsilons.first().copied().unwrap_or(0.0);
        let m = opts.warmup_samples.min(opts.n_samples);
        run_bruteforce_mc(&config(eps, 1, m, SolverVariant::BruteForce), &opts.inputs)?;
        run_multimode_mc(&config(eps, opts.timing_modes, m, SolverVariant::MultiModes), &opts.inputs)?;
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &eps in &opts.epsilons {
        let brute = run_bruteforce_mc(&config(eps, 1, opts.n_samples, SolverVariant::BruteForce), &opts.inputs)?;
        let multi = run_multimode_mc(
            &config(eps, opts.n_max, opts.n_samples, SolverVariant::MultiModes),
            &opts.inputs,
        )?;
        let norms = NormMatrices::new(&multi.mesh);
        for n in 2..=opts.n_max {
            let psi = partial_sum(&multi.mode_means, eps, n);
            rows.push(CompareRow {
                epsilon: eps,
                n_modes: n,
                rel_l2_distance: norms.distance(&psi, &brute.psi, NormKind::RelativeL2)?,
            });
        }
        let timed = if opts.timing_modes == opts.n_max {
            multi
        } else {
            run_multimode_mc(
                &config(eps, opts.timing_modes, opts.n_samples, SolverVariant::MultiModes),
                &opts.inputs,
            )?
        };
        timings.push(CompareTiming {
            epsilon: eps,
            bruteforce: brute.timings.total,
            multimode: timed.timings.total,
            bruteforce_counters: brute.counters,
            multimode_counters: timed.counters,
        });
    }
    Ok(CompareResult { rows, timings })
}

#[derive(Debug, Clone)]
pub struct KlOptions {
    pub kernel: CovarianceKernel,
    pub domain: Domain,
    pub nodes_per_dir: usize,
    pub k_max: usize,
    pub correction: bool,
    pub mean: f64,
    pub law: NoiseLaw,
}

#[derive(Debug, Clone)]
pub struct KlSummary {
    pub basis: Arc<KlBasis>,
    pub weak_form: WeakForm,
}

/// Spectrum of the covariance operator and the derived weak-perturbation form.
pub fn kl_experiment(opts: &KlOptions) -> Result<KlSummary> {
    let nystrom = NystromOptions {
        nodes_per_dir: opts.nodes_per_dir,
        k_max: opts.k_max,
        correction: opts.correction,
    };
    let basis = Arc::new(kl_decompose(&opts.kernel, &opts.domain, nystrom)?);
    let weak_form = kl_to_weak_form(
        DeterministicField::Constant(opts.mean),
        Arc::clone(&basis),
        opts.k_max,
        opts.law,
        ETA_STREAM,
    )?;
    Ok(KlSummary { basis, weak_form })
}
