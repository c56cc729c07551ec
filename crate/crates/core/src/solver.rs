//! Multi-modes Monte Carlo solver and the brute-force Monte Carlo reference.
//!
//! For each sample `ω_j` the modes solve
//!
//! ```text
//! (a0 ∇u_0, ∇v) = ⟨f(ω_j), v⟩
//! (a0 ∇u_n, ∇v) = −(η(ω_j) ∇u_{n−1}, ∇v),   n ≥ 1
//! ```
//!
//! and the estimator is `Ψ_N = (1/M) Σ_j Σ_{n<N} ε^n u_n(ω_j)`. All systems share
//! the `a0` stiffness matrix, which is factored once per run.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::analysis::NormMatrices;
use crate::assembly::{assemble_load, assemble_perturbation_matrix, assemble_stiffness, mode_rhs_into};
use crate::error::{Error, Result};
use crate::field::{FieldVector, Perturbed, ScalarField};
use crate::mesh::{build_mesh_1d, build_mesh_2d, Domain, Mesh};
use crate::quadrature::QuadratureRule;
use crate::random_fields::{draw_sample, DeterministicField, RandomFieldSpec, SampleDraw};
use crate::sparse::CsrMatrix;
use crate::sparse_direct::{Factorization, OpCounters};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverVariant {
    MultiModes,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub domain: Domain,
    /// Cells per direction.
    pub cells: usize,
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self.domain {
            Domain::Interval1D { .. } => build_mesh_1d(self.domain, self.cells),
            Domain::Rect2D { .. } => build_mesh_2d(self.domain, self.cells),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub n_modes: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub variant: SolverVariant,
    pub mesh: MeshSpec,
    /// Assembly rule; `None` selects the default for the mesh dimension.
    pub quadrature: Option<QuadratureRule>,
}

impl SolverConfig {
    pub fn new(mesh: MeshSpec, epsilon: f64, n_modes: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            epsilon,
            n_modes,
            n_samples,
            seed,
            workers: 1,
            variant: SolverVariant::MultiModes,
            mesh,
            quadrature: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.n_modes < 1 {
            return Err(Error::InvalidConfig("need at least one mode".into()));
        }
        if self.n_samples < 1 {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        if self.workers < 1 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        self.mesh.domain.validate()
    }

    /// `ε ≥ 1` lies outside the regime where the expansion is known to converge.
    pub fn epsilon_outside_proven_regime(&self) -> bool {
        self.epsilon >= 1.0
    }

    pub fn quadrature_rule(&self) -> QuadratureRule {
        self.quadrature
            .clone()
            .unwrap_or_else(|| QuadratureRule::assembly_default(self.mesh.domain.dim()))
    }
}

/// Deterministic background coefficient plus the random perturbation and source.
#[derive(Debug, Clone)]
pub struct ProblemInputs {
    pub a0: DeterministicField,
    pub eta: RandomFieldSpec,
    pub f: RandomFieldSpec,
}

/// Accumulated wall-clock time per stage, summed over workers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub factorization: Duration,
    pub assembly: Duration,
    pub solves: Duration,
    /// Elapsed wall time of the whole run.
    pub total: Duration,
}

impl Timings {
    fn merge(&mut self, other: &Timings) {
        self.factorization += other.factorization;
        self.assembly += other.assembly;
        self.solves += other.solves;
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: SolverVariant,
    pub epsilon: f64,
    pub n_modes: usize,
    pub n_samples: usize,
    pub mesh: Arc<Mesh>,
    /// The estimator of `E(u)`.
    pub psi: FieldVector,
    /// Sample means `Φ_n` of each mode (multi-modes only).
    pub mode_means: Vec<FieldVector>,
    /// Sample means of `‖u_n‖_{H1}` (multi-modes only).
    pub mode_mean_h1: Vec<f64>,
    /// Per-node sample variance of the per-sample solution (`M ≥ 2`).
    pub psi_variance: Option<FieldVector>,
    /// L2-aggregated Monte Carlo standard error of `psi` (`M ≥ 2`).
    pub mc_standard_error_l2: Option<f64>,
    pub counters: OpCounters,
    pub timings: Timings,
    /// Samples whose last weighted mode outgrew the leading mode.
    pub divergent_samples: usize,
    pub epsilon_warning: bool,
}

impl RunResult {
    /// `ε^n`-weighted mean mode norms, `ε^n E‖u_n‖_{H1}`.
    pub fn weighted_mode_h1(&self) -> Vec<f64> {
        self.mode_mean_h1
            .iter()
            .enumerate()
            .map(|(n, v)| self.epsilon.powi(n as i32) * v)
            .collect()
    }
}

/// Runs `body(state, j)` for every sample, splitting `0..n_samples` into
/// contiguous per-worker chunks. States are returned in worker order; on
/// failure the error with the smallest sample index is returned.
pub(crate) fn for_each_sample<S, I, B>(
    n_samples: usize,
    workers: usize,
    init: I,
    body: B,
) -> Result<Vec<S>>
where
    S: Send,
    I: Fn() -> S + Sync,
    B: Fn(&mut S, usize) -> Result<()> + Sync,
{
    let workers = workers.clamp(1, n_samples.max(1));
    let bounds = |w: usize| (w * n_samples / workers, (w + 1) * n_samples / workers);
    let run_chunk = |w: usize| -> Result<S> {
        let mut state = init();
        let (lo, hi) = bounds(w);
        for j in lo..hi {
            body(&mut state, j)?;
        }
        Ok(state)
    };
    if workers == 1 {
        return Ok(vec![run_chunk(0)?]);
    }
    let results: Vec<Result<S>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run_chunk = &run_chunk;
                scope.spawn(move || run_chunk(w))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Streams the modes `u_0, …, u_{N−1}` of one sample to `visit`.
///
/// Performs exactly `N` solve pairs and `N − 1` matrix-vector products.
pub fn recurse_modes(
    factor: &Factorization,
    k_eta: &CsrMatrix,
    f_load: &[f64],
    n_modes: usize,
    counters: &mut OpCounters,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let dim = factor.dim();
    if f_load.len() != dim {
        return Err(Error::Shape {
            expected: dim,
            found: f_load.len(),
        });
    }
    if k_eta.dim() != dim {
        return Err(Error::Shape {
            expected: dim,
            found: k_eta.dim(),
        });
    }
    if n_modes == 0 {
        return Err(Error::InvalidConfig("need at least one mode".into()));
    }
    let mut mode = f_load.to_vec();
    factor.solve_in_place(&mut mode, counters)?;
    visit(0, &mode);
    let mut rhs = vec![0.0; dim];
    for n in 1..n_modes {
        mode_rhs_into(k_eta, &mode, &mut rhs)?;
        counters.matvecs += 1;
        std::mem::swap(&mut mode, &mut rhs);
        factor.solve_in_place(&mut mode, counters)?;
        visit(n, &mode);
    }
    Ok(())
}

/// Modes of one sample and their weighted partial sum `U_N = Σ ε^n u_n`.
pub fn solve_modes_one_sample(
    factor: &Factorization,
    k_eta: &CsrMatrix,
    f_load: &[f64],
    n_modes: usize,
    epsilon: f64,
    counters: &mut OpCounters,
) -> Result<(FieldVector, Vec<FieldVector>)> {
    let mut sum = FieldVector::zeros(factor.dim());
    let mut modes = Vec::with_capacity(n_modes);
    let mut weight = 1.0;
    recurse_modes(factor, k_eta, f_load, n_modes, counters, |_, u| {
        sum.axpy(weight, u);
        weight *= epsilon;
        modes.push(FieldVector(u.to_vec()));
    })?;
    Ok((sum, modes))
}

/// Shared per-run state of the multi-modes method: the mesh, the assembly
/// rule and the factored `a0` stiffness matrix.
pub struct MultiModeSolver<'m> {
    mesh: &'m Mesh,
    quad: QuadratureRule,
    factor: Factorization,
    setup_counters: OpCounters,
    setup_time: Duration,
}

impl<'m> MultiModeSolver<'m> {
    pub fn new<A: ScalarField + ?Sized>(mesh: &'m Mesh, a0: &A, quad: QuadratureRule) -> Result<Self> {
        let start = Instant::now();
        let mut counters = OpCounters::default();
        let k0 = assemble_stiffness(mesh, a0, &quad)?;
        counters.assemblies += 1;
        let factor = Factorization::new(&k0, &mut counters)?;
        Ok(Self {
            mesh,
            quad,
            factor,
            setup_counters: counters,
            setup_time: start.elapsed(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// Counters for the one-time assembly and factorization.
    pub fn setup_counters(&self) -> OpCounters {
        self.setup_counters
    }

    /// Assembles the sample's load and `K_η`, then streams its modes.
    pub fn sample_modes(
        &self,
        draw: &SampleDraw<'_>,
        n_modes: usize,
        counters: &mut OpCounters,
        timings: &mut Timings,
        visit: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        let j = draw.index as usize;
        let t0 = Instant::now();
        let load = assemble_load(self.mesh, &draw.f(), &self.quad)
            .map_err(|e| e.in_sample("source assembly", j))?;
        let k_eta = assemble_perturbation_matrix(self.mesh, &draw.eta(), &self.quad)
            .map_err(|e| e.in_sample("perturbation assembly", j))?;
        counters.assemblies += 2;
        let t1 = Instant::now();
        timings.assembly += t1 - t0;
        recurse_modes(&self.factor, &k_eta, &load, n_modes, counters, visit)
            .map_err(|e| e.in_sample("mode solve", j))?;
        timings.solves += t1.elapsed();
        Ok(())
    }
}

struct Accumulator {
    sum_u: Vec<f64>,
    sum_u2: Vec<f64>,
    sum_modes: Vec<Vec<f64>>,
    sum_mode_h1: Vec<f64>,
    counters: OpCounters,
    timings: Timings,
    divergent: usize,
}

impl Accumulator {
    fn new(dim: usize, n_modes: usize) -> Self {
        Self {
            sum_u: vec![0.0; dim],
            sum_u2: vec![0.0; dim],
            sum_modes: vec![vec![0.0; dim]; n_modes],
            sum_mode_h1: vec![0.0; n_modes],
            counters: OpCounters::default(),
            timings: Timings::default(),
            divergent: 0,
        }
    }

    fn add_sample(&mut self, u: &[f64]) {
        for ((s, s2), v) in self.sum_u.iter_mut().zip(self.sum_u2.iter_mut()).zip(u) {
            *s += v;
            *s2 += v * v;
        }
    }

    fn merge(&mut self, other: Accumulator) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.sum_u, &other.sum_u);
        add(&mut self.sum_u2, &other.sum_u2);
        for (a, b) in self.sum_modes.iter_mut().zip(&other.sum_modes) {
            add(a, b);
        }
        add(&mut self.sum_mode_h1, &other.sum_mode_h1);
        self.counters += other.counters;
        self.timings.merge(&other.timings);
        self.divergent += other.divergent;
    }

    fn merged(states: Vec<Accumulator>) -> Accumulator {
        let mut it = states.into_iter();
        let mut acc = it.next().expect("at least one worker");
        for s in it {
            acc.merge(s);
        }
        acc
    }
}

/// Per-node unbiased variance and the L2-aggregated standard error of the mean.
fn variance_and_error(
    sum: &[f64],
    sum_sq: &[f64],
    m: usize,
    lumped_mass: &[f64],
) -> (Option<FieldVector>, Option<f64>) {
    if m < 2 {
        return (None, None);
    }
    let mf = m as f64;
    let var: Vec<f64> = sum
        .iter()
        .zip(sum_sq)
        .map(|(s, s2)| ((s2 - s * s / mf) / (mf - 1.0)).max(0.0))
        .collect();
    let se = (var.iter().zip(lumped_mass).map(|(v, w)| v * w).sum::<f64>() / mf).sqrt();
    (Some(FieldVector(var)), Some(se))
}

/// The multi-modes Monte Carlo estimator `Ψ_N`.
pub fn run_multimode_mc(config: &SolverConfig, inputs: &ProblemInputs) -> Result<RunResult> {
    config.validate()?;
    inputs.eta.validate()?;
    inputs.f.validate()?;
    let start = Instant::now();
    let mesh = Arc::new(config.mesh.build()?);
    let solver = MultiModeSolver::new(&mesh, &inputs.a0, config.quadrature_rule())?;
    let norms = NormMatrices::new(&mesh);
    let (n_modes, eps, dim) = (config.n_modes, config.epsilon, mesh.n_dofs());

    let states = for_each_sample(
        config.n_samples,
        config.workers,
        || (Accumulator::new(dim, n_modes), vec![0.0; dim]),
        |(acc, u_sum), j| {
            let draw = draw_sample(&inputs.eta, &inputs.f, config.seed, j as u64);
            u_sum.iter_mut().for_each(|v| *v = 0.0);
            let mut weight = 1.0;
            let mut first_h1 = 0.0;
            let mut last_weighted_h1 = 0.0;
            let Accumulator {
                sum_modes,
                sum_mode_h1,
                counters,
                timings,
                ..
            } = acc;
            solver.sample_modes(&draw, n_modes, counters, timings, |n, u| {
                for ((s, m), v) in u_sum.iter_mut().zip(sum_modes[n].iter_mut()).zip(u) {
                    *s += weight * v;
                    *m += v;
                }
                let h1 = norms.h1(u);
                sum_mode_h1[n] += h1;
                if n == 0 {
                    first_h1 = h1;
                }
                last_weighted_h1 = weight * h1;
                weight *= eps;
            })?;
            if n_modes > 1 && last_weighted_h1 > first_h1 {
                acc.divergent += 1;
            }
            acc.add_sample(u_sum);
            Ok(())
        },
    )?;
    let mut acc = Accumulator::merged(states.into_iter().map(|(a, _)| a).collect());
    acc.counters += solver.setup_counters();
    acc.timings.factorization += solver.setup_time;

    let m = config.n_samples as f64;
    let psi = FieldVector(acc.sum_u.iter().map(|s| s / m).collect());
    let mode_means = acc
        .sum_modes
        .iter()
        .map(|s| FieldVector(s.iter().map(|v| v / m).collect()))
        .collect();
    let (psi_variance, mc_standard_error_l2) =
        variance_and_error(&acc.sum_u, &acc.sum_u2, config.n_samples, norms.lumped_mass());
    acc.timings.total = start.elapsed();
    Ok(RunResult {
        variant: SolverVariant::MultiModes,
        epsilon: eps,
        n_modes,
        n_samples: config.n_samples,
        mesh: Arc::clone(&mesh),
        psi,
        mode_means,
        mode_mean_h1: acc.sum_mode_h1.iter().map(|s| s / m).collect(),
        psi_variance,
        mc_standard_error_l2,
        counters: acc.counters,
        timings: acc.timings,
        divergent_samples: acc.divergent,
        epsilon_warning: config.epsilon_outside_proven_regime(),
    })
}

/// Classical Monte Carlo: assemble, factor and solve `a0 + ε η_j` per sample.
pub fn run_bruteforce_mc(config: &SolverConfig, inputs: &ProblemInputs) -> Result<RunResult> {
    config.validate()?;
    inputs.eta.validate()?;
    inputs.f.validate()?;
    let start = Instant::now();
    let mesh = Arc::new(config.mesh.build()?);
    let quad = config.quadrature_rule();
    let norms = NormMatrices::new(&mesh);
    let dim = mesh.n_dofs();

    let states = for_each_sample(
        config.n_samples,
        config.workers,
        || Accumulator::new(dim, 0),
        |acc, j| {
            let draw = draw_sample(&inputs.eta, &inputs.f, config.seed, j as u64);
            let eta = draw.eta();
            let t0 = Instant::now();
            let coeff = Perturbed {
                base: &inputs.a0,
                scale: config.epsilon,
                other: &eta,
            };
            let k = assemble_stiffness(&mesh, &coeff, &quad)
                .map_err(|e| e.in_sample("stiffness assembly", j))?;
            let load = assemble_load(&mesh, &draw.f(), &quad)
                .map_err(|e| e.in_sample("source assembly", j))?;
            acc.counters.assemblies += 2;
            let t1 = Instant::now();
            let factor = Factorization::new(&k, &mut acc.counters)
                .map_err(|e| e.in_sample("factorization", j))?;
            let t2 = Instant::now();
            let u = factor
                .solve(&load, &mut acc.counters)
                .map_err(|e| e.in_sample("solve", j))?;
            acc.timings.assembly += t1 - t0;
            acc.timings.factorization += t2 - t1;
            acc.timings.solves += t2.elapsed();
            acc.add_sample(&u);
            Ok(())
        },
    )?;
    let mut acc = Accumulator::merged(states);
    let m = config.n_samples as f64;
    let psi = FieldVector(acc.sum_u.iter().map(|s| s / m).collect());
    let (psi_variance, mc_standard_error_l2) =
        variance_and_error(&acc.sum_u, &acc.sum_u2, config.n_samples, norms.lumped_mass());
    acc.timings.total = start.elapsed();
    Ok(RunResult {
        variant: SolverVariant::BruteForce,
        epsilon: config.epsilon,
        n_modes: 1,
        n_samples: config.n_samples,
        mesh,
        psi,
        mode_means: Vec::new(),
        mode_mean_h1: Vec::new(),
        psi_variance,
        mc_standard_error_l2,
        counters: acc.counters,
        timings: acc.timings,
        divergent_samples: 0,
        epsilon_warning: config.epsilon_outside_proven_regime(),
    })
}

/// Dispatches on `config.variant`.
pub fn run(config: &SolverConfig, inputs: &ProblemInputs) -> Result<RunResult> {
    match config.variant {
        SolverVariant::MultiModes => run_multimode_mc(config, inputs),
        SolverVariant::BruteForce => run_bruteforce_mc(config, inputs),
    }
}
